//! Transfer-operator route to the same rare-event quantities the Monte Carlo
//! estimators measure: Ulam discretization of the (possibly noise-averaged)
//! transfer operator, the "holed" open operator, leading eigenvalues, the
//! escape mass Delta, the correlation series q_k, and the spectral EI.
//!
//! Conventions. Densities are stored as cell-mass vectors v (v[i] is the
//! measure of cell I_i = [i/k, (i+1)/k)), evolved forward by v -> vM with
//! M[i][j] = Leb(I_i ∩ f^{-1}(I_j)) / Leb(I_i). Additive noise acts after the
//! map as a circulant kernel, so the noisy operator is v -> (vM) * N_eps.
//! The open operator masks the hole cells of the *input* vector first.

use crate::exact::{CircleSet, Rat};
use crate::maps::{NoiseKind, NoiseModel, PiecewiseMap};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("{0}")]
    Domain(String),
    #[error("power iteration failed to converge: residual {residual:.3e} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },
}

/// Ulam discretization of the transfer operator on k equal cells, with an
/// optional post-composed noise kernel.
#[derive(Clone, Debug)]
pub struct UlamOperator {
    pub k: usize,
    /// Sparse rows: rows[i] lists (j, M[i][j]) with the row summing to 1.
    rows: Vec<Vec<(u32, f64)>>,
    /// Circulant noise weights indexed by displacement d mod k (band only).
    noise: Option<NoiseKernel>,
    /// Input-cell mask of the open operator (None = closed).
    hole: Option<HoleSpec>,
    /// Entries built by exact interval intersection (vs sampled).
    pub exact: bool,
    /// Set when the noise support is narrower than one cell.
    pub resolution_warning: bool,
    transpose: std::cell::OnceCell<Vec<Vec<(u32, f64)>>>,
}

/// Symmetric circulant cell-to-cell kernel of mod-1 additive noise.
#[derive(Clone, Debug)]
pub struct NoiseKernel {
    pub k: usize,
    /// weights[b] is the weight of displacement d = b - half (so the band is
    /// symmetric around zero); wrapped mod k on application.
    weights: Vec<f64>,
    half: usize,
}

impl NoiseKernel {
    /// Exact cell-transition weights of additive noise: the weight of moving
    /// d cells is (1/h) ∫∫ s_eps(y - x) dy dx over x in I_0, y in I_d, which
    /// reduces to a second antiderivative of the noise density evaluated at
    /// the tent spanned by the two cells.
    pub fn build(noise: &NoiseModel, k: usize) -> NoiseKernel {
        let h = 1.0 / k as f64;
        let eps = noise.epsilon;
        // s2(t) = ∫ s(u) (t - u)_+ du, the second antiderivative of the
        // density; the double cell integral is s2(c+h) - 2 s2(c) + s2(c-h)
        // with c = d*h.
        let s2 = |t: f64| -> f64 {
            match noise.kind {
                NoiseKind::Uniform => {
                    if t <= -eps {
                        0.0
                    } else if t >= eps {
                        t
                    } else {
                        (t + eps) * (t + eps) / (4.0 * eps)
                    }
                }
                NoiseKind::SymmetricTriangular => {
                    if t <= -eps {
                        0.0
                    } else if t <= 0.0 {
                        (t + eps).powi(3) / (6.0 * eps * eps)
                    } else if t < eps {
                        eps / 6.0 + t + ((eps - t).powi(3) - eps.powi(3)) / (6.0 * eps * eps)
                    } else {
                        t
                    }
                }
            }
        };
        let half = ((eps / h).ceil() as usize + 1).min(k / 2);
        let mut weights = vec![0.0; 2 * half + 1];
        for (b, w) in weights.iter_mut().enumerate() {
            let c = (b as f64 - half as f64) * h;
            *w = (s2(c + h) - 2.0 * s2(c) + s2(c - h)) / h;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        NoiseKernel { k, weights, half }
    }

    pub fn weight(&self, d: isize) -> f64 {
        let b = d + self.half as isize;
        if b < 0 || b as usize >= self.weights.len() {
            0.0
        } else {
            self.weights[b as usize]
        }
    }

    /// Circular band convolution (symmetric kernel, so self-transpose).
    fn convolve(&self, v: &[f64]) -> Vec<f64> {
        let k = self.k;
        let mut out = vec![0.0; k];
        for (i, &m) in v.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for (b, &w) in self.weights.iter().enumerate() {
                let j = (i + k + b - self.half) % k;
                out[j] += m * w;
            }
        }
        out
    }
}

/// Hole as a set of whole cells of the k-grid.
#[derive(Clone, Debug, Serialize)]
pub struct HoleSpec {
    pub k: usize,
    pub cells: Vec<usize>,
    /// |Leb(cells) - target measure| when snapped from a ball, else 0.
    pub snap_residual: f64,
}

impl HoleSpec {
    pub fn new(k: usize, mut cells: Vec<usize>) -> Result<HoleSpec, SpectralError> {
        cells.sort_unstable();
        cells.dedup();
        if cells.is_empty() {
            return Err(SpectralError::Domain("hole must be nonempty".into()));
        }
        if cells.len() >= k || cells.iter().any(|&c| c >= k) {
            return Err(SpectralError::Domain(
                "hole must be a proper subset of the cells".into(),
            ));
        }
        Ok(HoleSpec {
            k,
            cells,
            snap_residual: 0.0,
        })
    }

    /// Cells with positive-measure overlap with the ball B_radius(center).
    pub fn from_ball(k: usize, center: &Rat, radius: &Rat) -> Result<HoleSpec, SpectralError> {
        let ball = CircleSet::ball(center, radius);
        let kq = Rat::from_integer((k as i64).into());
        let mut cells = Vec::new();
        for i in 0..k {
            let lo = Rat::from_integer((i as i64).into()) / &kq;
            let hi = Rat::from_integer((i as i64 + 1).into()) / &kq;
            let cell = CircleSet::from_interval(&lo, &hi);
            if !ball.intersect(&cell).measure().is_zero() {
                cells.push(i);
            }
        }
        let target = ball.measure().to_f64().unwrap_or(0.0);
        let mut hole = HoleSpec::new(k, cells)?;
        hole.snap_residual = (hole.cells.len() as f64 / k as f64 - target).abs();
        Ok(hole)
    }

    pub fn lebesgue(&self) -> f64 {
        self.cells.len() as f64 / self.k as f64
    }
}

fn rat_of(i: i64, q: i64) -> Rat {
    Rat::new(i.into(), q.into())
}

/// Exact Ulam matrix of a piecewise-affine map (closed, no noise).
///
/// Entry (i, j) is the Lebesgue fraction of cell i that the map sends into
/// cell j, accumulated in rational arithmetic so each row sums to exactly 1.
///
/// ```
/// use evlab::maps::doubling;
/// use evlab::spectral::{leading_eigen, ulam_build};
///
/// // The doubling map spreads each cell over two image cells...
/// let op = ulam_build(&doubling(), 8).unwrap();
/// assert_eq!(op.row(3), &[(6, 0.5), (7, 0.5)]);
/// // ...and Lebesgue is invariant: lambda = 1, flat density.
/// let pair = leading_eigen(&op, 1e-12).unwrap();
/// assert!((pair.lambda - 1.0).abs() < 1e-10);
/// ```
pub fn ulam_build(map: &PiecewiseMap, k: usize) -> Result<UlamOperator, SpectralError> {
    if k < 2 {
        return Err(SpectralError::Domain("need k >= 2 cells".into()));
    }
    let mut rows = Vec::with_capacity(k);
    let cell_len = rat_of(1, k as i64);
    for i in 0..k {
        let cell_lo = rat_of(i as i64, k as i64);
        let cell_hi = rat_of(i as i64 + 1, k as i64);
        // Rational accumulation per target cell, then one rounding at the end.
        let mut acc: std::collections::BTreeMap<usize, Rat> = std::collections::BTreeMap::new();
        for br in map.branches() {
            let lo = if br.lo > cell_lo { br.lo.clone() } else { cell_lo.clone() };
            let hi = if br.hi < cell_hi { br.hi.clone() } else { cell_hi.clone() };
            if lo >= hi {
                continue;
            }
            let e1 = &br.slope * &lo + &br.intercept;
            let e2 = &br.slope * &hi + &br.intercept;
            let (mut a, b) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let speed = br.slope.abs();
            // Walk the image interval in unit-circle coordinates.
            while a < b {
                let fa = a.floor();
                let seg_hi = if b < &fa + Rat::one() { b.clone() } else { &fa + Rat::one() };
                let (sa, sb) = (&a - &fa, &seg_hi - &fa); // within [0,1]
                // Overlapping target cells.
                let j_lo = (&sa / &cell_len).floor().to_integer().to_i64().unwrap() as usize;
                let j_hi_r = (&sb / &cell_len).ceil().to_integer().to_i64().unwrap() as usize;
                for j in j_lo..j_hi_r.min(k) {
                    let t_lo = rat_of(j as i64, k as i64);
                    let t_hi = rat_of(j as i64 + 1, k as i64);
                    let o_lo = if sa > t_lo { sa.clone() } else { t_lo };
                    let o_hi = if sb < t_hi { sb.clone() } else { t_hi };
                    if o_lo < o_hi {
                        let mass = (o_hi - o_lo) / &speed / &cell_len;
                        *acc.entry(j).or_insert_with(Rat::zero) += mass;
                    }
                }
                a = seg_hi;
            }
        }
        let total: Rat = acc.values().sum();
        debug_assert_eq!(total, Rat::one(), "row {i} mass");
        let mut row: Vec<(u32, f64)> = acc
            .into_iter()
            .map(|(j, m)| (j as u32, m.to_f64().unwrap()))
            .collect();
        // Absorb the f64 rounding residual into the largest entry so the
        // floating row sums to exactly 1.0.
        let sum: f64 = row.iter().map(|&(_, w)| w).sum();
        if let Some(mx) = row
            .iter_mut()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        {
            mx.1 += 1.0 - sum;
        }
        rows.push(row);
    }
    Ok(UlamOperator {
        k,
        rows,
        noise: None,
        hole: None,
        exact: true,
        resolution_warning: false,
        transpose: std::cell::OnceCell::new(),
    })
}

/// Sampled Ulam matrix (inexact fallback for maps without affine branches):
/// each cell is probed on a uniform sub-grid and images are binned.
pub fn ulam_build_sampled(
    map: &PiecewiseMap,
    k: usize,
    probes_per_cell: usize,
) -> Result<UlamOperator, SpectralError> {
    if k < 2 || probes_per_cell == 0 {
        return Err(SpectralError::Domain("need k >= 2 and probes >= 1".into()));
    }
    let mut rows = Vec::with_capacity(k);
    for i in 0..k {
        let mut counts = std::collections::BTreeMap::new();
        for p in 0..probes_per_cell {
            let x = (i as f64 + (p as f64 + 0.5) / probes_per_cell as f64) / k as f64;
            if let Ok((y, _)) = map.step(x) {
                let j = ((y * k as f64) as usize).min(k - 1);
                *counts.entry(j as u32).or_insert(0usize) += 1;
            }
        }
        let total: usize = counts.values().sum();
        rows.push(
            counts
                .into_iter()
                .map(|(j, c)| (j, c as f64 / total as f64))
                .collect(),
        );
    }
    Ok(UlamOperator {
        k,
        rows,
        noise: None,
        hole: None,
        exact: false,
        resolution_warning: false,
        transpose: std::cell::OnceCell::new(),
    })
}

/// Ulam operator of the noise-averaged dynamics: apply the map, then the
/// circulant kernel of the mod-1 additive noise.
pub fn ulam_random(
    map: &PiecewiseMap,
    noise: &NoiseModel,
    k: usize,
) -> Result<UlamOperator, SpectralError> {
    let mut op = ulam_build(map, k)?;
    op.resolution_warning = noise.epsilon < 1.0 / k as f64;
    op.noise = Some(NoiseKernel::build(noise, k));
    Ok(op)
}

/// The open operator: mask the hole cells of the input density, then apply.
pub fn open_operator(op: &UlamOperator, hole: &HoleSpec) -> Result<UlamOperator, SpectralError> {
    if hole.k != op.k {
        return Err(SpectralError::Domain("hole grid mismatch".into()));
    }
    let mut out = op.clone();
    out.hole = Some(hole.clone());
    Ok(out)
}

impl UlamOperator {
    pub fn noise_kernel(&self) -> Option<&NoiseKernel> {
        self.noise.as_ref()
    }

    pub fn hole(&self) -> Option<&HoleSpec> {
        self.hole.as_ref()
    }

    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn uniform(&self) -> Vec<f64> {
        vec![1.0 / self.k as f64; self.k]
    }

    fn masked(&self, v: &[f64]) -> Vec<f64> {
        let mut w = v.to_vec();
        if let Some(h) = &self.hole {
            for &c in &h.cells {
                w[c] = 0.0;
            }
        }
        w
    }

    /// Forward application v -> (mask) -> vM -> (noise).
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let v = self.masked(v);
        let mut out = vec![0.0; self.k];
        for (i, row) in self.rows.iter().enumerate() {
            let m = v[i];
            if m == 0.0 {
                continue;
            }
            for &(j, w) in row {
                out[j as usize] += m * w;
            }
        }
        match &self.noise {
            Some(ker) => ker.convolve(&out),
            None => out,
        }
    }

    /// Adjoint application (noise is symmetric, so self-transposed).
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        let v = match &self.noise {
            Some(ker) => ker.convolve(v),
            None => v.to_vec(),
        };
        let cols = self.transpose.get_or_init(|| {
            let mut cols = vec![Vec::new(); self.k];
            for (i, row) in self.rows.iter().enumerate() {
                for &(j, w) in row {
                    cols[j as usize].push((i as u32, w));
                }
            }
            cols
        });
        let mut out = vec![0.0; self.k];
        for (j, col) in cols.iter().enumerate() {
            let m = v[j];
            if m == 0.0 {
                continue;
            }
            for &(i, w) in col {
                out[i as usize] += m * w;
            }
        }
        self.masked(&out)
    }
}

fn mass(v: &[f64]) -> f64 {
    v.iter().sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenPair {
    pub lambda: f64,
    /// Right density, cell masses normalized to total mass 1.
    pub phi: Vec<f64>,
    /// Left functional, normalized so nu(phi) = 1.
    pub nu: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Leading eigenvalue and eigenvectors by power iteration (the operators here
/// are nonnegative and primitive on their surviving class, so the iteration
/// converges at the spectral-gap rate).
pub fn leading_eigen(op: &UlamOperator, tol: f64) -> Result<EigenPair, SpectralError> {
    const MAX_ITER: usize = 100_000;
    let mut v = op.uniform();
    let mut lambda = 1.0;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_ITER {
        let w = op.apply(&v);
        let m = mass(&w);
        if m <= 0.0 {
            // Nilpotent open operator: mass dies entirely.
            return Ok(EigenPair {
                lambda: 0.0,
                phi: v,
                nu: vec![0.0; op.k],
                iterations: it,
                residual: 0.0,
            });
        }
        let next: Vec<f64> = w.iter().map(|x| x / m).collect();
        residual = (m - lambda).abs() / m.max(f64::MIN_POSITIVE);
        let delta_v: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .sum();
        lambda = m;
        v = next;
        iterations = it;
        if residual < tol && delta_v < tol {
            break;
        }
    }
    if residual >= tol {
        return Err(SpectralError::NoConvergence {
            residual,
            iterations,
        });
    }
    // Left functional on the adjoint.
    let mut u = vec![1.0; op.k];
    for _ in 0..MAX_ITER {
        let w = op.apply_transpose(&u);
        let m = mass(&w).abs();
        if m <= 0.0 {
            u = vec![0.0; op.k];
            break;
        }
        let next: Vec<f64> = w.iter().map(|x| x * op.k as f64 / m).collect();
        let delta_u: f64 = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).sum();
        u = next;
        if delta_u < tol * op.k as f64 {
            break;
        }
    }
    let pairing: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
    if pairing.abs() > 0.0 {
        for x in &mut u {
            *x /= pairing;
        }
    }
    Ok(EigenPair {
        lambda,
        phi: v,
        nu: u,
        iterations,
        residual,
    })
}

/// Total surviving mass of h after m steps of the open operator.
pub fn survival(open: &UlamOperator, h: &[f64], m: usize) -> f64 {
    let mut v = h.to_vec();
    for _ in 0..m {
        v = open.apply(&v);
    }
    mass(&v)
}

/// Escape mass per step from the stationary density: the hole mass of h.
/// Identical to the total mass of h(M - M~) because M conserves mass.
pub fn delta(open: &UlamOperator, h: &[f64]) -> Result<f64, SpectralError> {
    let hole = open
        .hole
        .as_ref()
        .ok_or_else(|| SpectralError::Domain("operator is not open".into()))?;
    Ok(hole.cells.iter().map(|&c| h[c]).sum())
}

/// Correlation series q_k = mass of h (M - M~) M~^k (M - M~) / Delta.
/// (M - M~) applied to v is the hole part of v pushed through the closed
/// step, so each q_k is the hole mass of the evolving vector.
pub fn qk_series(
    closed: &UlamOperator,
    open: &UlamOperator,
    h: &[f64],
    delta: f64,
    kmax: usize,
) -> Result<Vec<f64>, SpectralError> {
    let hole = open
        .hole
        .as_ref()
        .ok_or_else(|| SpectralError::Domain("operator is not open".into()))?;
    if delta <= 0.0 {
        return Err(SpectralError::Domain("Delta must be positive".into()));
    }
    let hole_part = |v: &[f64]| -> Vec<f64> {
        let mut w = vec![0.0; v.len()];
        for &c in &hole.cells {
            w[c] = v[c];
        }
        w
    };
    let mut v = closed.apply(&hole_part(h));
    let mut q = Vec::with_capacity(kmax + 1);
    for _ in 0..=kmax {
        q.push(mass(&hole_part(&v)) / delta);
        v = open.apply(&v);
    }
    Ok(q)
}

/// EI from the eigenvalue perturbation: (1 - lambda)/Delta.
pub fn spectral_ei(lambda: f64, delta: f64) -> Result<f64, SpectralError> {
    if delta <= 0.0 {
        return Err(SpectralError::Domain("Delta must be positive".into()));
    }
    Ok((1.0 - lambda) / delta)
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub k: usize,
    pub hole_cells: Vec<usize>,
    pub hole_lebesgue: f64,
    pub lambda: f64,
    pub delta: f64,
    pub q: Vec<f64>,
    pub theta_ratio: f64,
    pub theta_series: f64,
    pub gap: f64,
    pub iterations: usize,
    pub residual: f64,
    pub resolution_warning: bool,
    pub exact: bool,
}

/// Full pipeline: stationary density of the closed operator, open-operator
/// eigenvalue, Delta, the q_k series, and both EI readings.
pub fn spectral_report(
    map: &PiecewiseMap,
    noise: Option<&NoiseModel>,
    k: usize,
    hole: &HoleSpec,
    kmax: usize,
    tol: f64,
) -> Result<SpectralReport, SpectralError> {
    let closed = match noise {
        Some(nm) => ulam_random(map, nm, k)?,
        None => ulam_build(map, k)?,
    };
    let open = open_operator(&closed, hole)?;
    let stat = leading_eigen(&closed, tol)?;
    let open_eig = leading_eigen(&open, tol)?;
    let d = delta(&open, &stat.phi)?;
    let q = qk_series(&closed, &open, &stat.phi, d, kmax)?;
    let theta_ratio = spectral_ei(open_eig.lambda, d)?;
    let theta_series = 1.0 - q.iter().sum::<f64>();
    Ok(SpectralReport {
        k,
        hole_cells: hole.cells.clone(),
        hole_lebesgue: hole.lebesgue(),
        lambda: open_eig.lambda,
        delta: d,
        q,
        gap: (theta_ratio - theta_series).abs(),
        theta_ratio,
        theta_series,
        iterations: open_eig.iterations,
        residual: open_eig.residual,
        resolution_warning: closed.resolution_warning,
        exact: closed.exact,
    })
}

/// L1 closeness of two same-grid operators over indicator probes of dyadic
/// intervals (normalized densities). The maximum difference is an operator
/// closeness proxy; for affine maps with uniform noise it scales like eps.
pub fn closeness_check(a: &UlamOperator, b: &UlamOperator) -> Result<f64, SpectralError> {
    if a.k != b.k {
        return Err(SpectralError::Domain("grid mismatch".into()));
    }
    let k = a.k;
    let max_level = (k.trailing_zeros().min(6)).max(1);
    let mut worst: f64 = 0.0;
    for level in 0..=max_level {
        let pieces = 1usize << level;
        if k % pieces != 0 {
            continue;
        }
        let span = k / pieces;
        for p in 0..pieces {
            // Height-one indicator density (bounded variation independent of
            // the interval length), stored as cell masses.
            let mut v = vec![0.0; k];
            for c in 0..span {
                v[p * span + c] = 1.0 / k as f64;
            }
            let va = a.apply(&v);
            let vb = b.apply(&v);
            let dist: f64 = va.iter().zip(&vb).map(|(x, y)| (x - y).abs()).sum();
            worst = worst.max(dist);
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorProfileRow {
    pub t: f64,
    pub steps: usize,
    pub survival: f64,
    pub residual: f64,
    pub envelope: f64,
    pub ratio: f64,
}

/// Exponential-law error profile: |survival at ceil(t/(xi*Delta)) - e^{-t}|
/// against the (t v 1) e^{-t} envelope, with the best-fit envelope constant.
pub fn prop_error_profile(
    open: &UlamOperator,
    h: &[f64],
    delta_val: f64,
    xi: f64,
    t_grid: &[f64],
) -> Result<(Vec<ErrorProfileRow>, f64), SpectralError> {
    if delta_val <= 0.0 || xi <= 0.0 {
        return Err(SpectralError::Domain("need Delta > 0 and xi > 0".into()));
    }
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut best_c: f64 = 0.0;
    let mut v = h.to_vec();
    let mut done = 0usize;
    let mut grid: Vec<f64> = t_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &t in &grid {
        let m = (t / (xi * delta_val)).ceil() as usize;
        while done < m {
            v = open.apply(&v);
            done += 1;
        }
        let s = mass(&v);
        let residual = (s - (-t).exp()).abs();
        let envelope = t.max(1.0) * (-t).exp();
        let ratio = residual / envelope;
        best_c = best_c.max(ratio);
        rows.push(ErrorProfileRow {
            t,
            steps: m,
            survival: s,
            residual,
            envelope,
            ratio,
        });
    }
    Ok((rows, best_c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::maps::doubling;
    use approx::assert_abs_diff_eq;

    #[test]
    fn doubling_rows_are_half_half() {
        let op = ulam_build(&doubling(), 4).unwrap();
        for i in 0..4 {
            let row = op.row(i);
            assert_eq!(row.len(), 2);
            assert_eq!(row[0].0 as usize, (2 * i) % 4);
            assert_eq!(row[1].0 as usize, (2 * i + 1) % 4);
            assert_eq!(row[0].1, 0.5);
            assert_eq!(row[1].1, 0.5);
        }
    }

    #[test]
    fn rows_sum_to_one_exactly_after_residual_absorption() {
        let map = crate::maps::boundary_return_map();
        let op = ulam_build(&map, 96).unwrap();
        for i in 0..96 {
            let s: f64 = op.row(i).iter().map(|&(_, w)| w).sum();
            assert_eq!(s, 1.0, "row {i}");
        }
    }

    #[test]
    fn uniform_density_is_fixed_for_doubling() {
        let op = ulam_build(&doubling(), 128).unwrap();
        let v = op.uniform();
        let w = op.apply(&v);
        for (a, b) in v.iter().zip(&w) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn cell_width_uniform_noise_is_quarter_half_quarter() {
        let noise = NoiseModel::uniform(1.0 / 16.0);
        let ker = NoiseKernel::build(&noise, 16);
        assert_abs_diff_eq!(ker.weight(-1), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(ker.weight(0), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(ker.weight(1), 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(ker.weight(2), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn noise_keeps_uniform_fixed_and_preserves_mass() {
        let noise = NoiseModel::uniform(0.05);
        let op = ulam_random(&doubling(), &noise, 64).unwrap();
        let v = op.uniform();
        let w = op.apply(&v);
        assert_abs_diff_eq!(mass(&w), 1.0, epsilon = 1e-12);
        for (a, b) in v.iter().zip(&w) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn tiny_noise_flags_resolution_warning() {
        let noise = NoiseModel::uniform(0.001);
        let op = ulam_random(&doubling(), &noise, 64).unwrap();
        assert!(op.resolution_warning);
        let op2 = ulam_random(&doubling(), &noise, 4096).unwrap();
        assert!(!op2.resolution_warning);
    }

    #[test]
    fn two_cell_open_doubling_has_lambda_half() {
        let op = ulam_build(&doubling(), 2).unwrap();
        let hole = HoleSpec::new(2, vec![0]).unwrap();
        let open = open_operator(&op, &hole).unwrap();
        let eig = leading_eigen(&open, 1e-12).unwrap();
        assert_abs_diff_eq!(eig.lambda, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn delta_is_hole_mass_both_ways() {
        let op = ulam_build(&doubling(), 300).unwrap();
        let hole = HoleSpec::new(300, vec![10, 11, 12]).unwrap();
        let open = open_operator(&op, &hole).unwrap();
        let h = op.uniform();
        let d = delta(&open, &h).unwrap();
        assert_abs_diff_eq!(d, 0.01, epsilon = 1e-15);
        // Operator-difference route: mass of hM - mass of hM~.
        let alt = mass(&op.apply(&h)) - mass(&open.apply(&h));
        assert_abs_diff_eq!(d, alt, epsilon = 1e-15);
    }

    #[test]
    fn survival_steps_match_mass_bookkeeping() {
        let op = ulam_build(&doubling(), 64).unwrap();
        let hole = HoleSpec::new(64, vec![0, 63]).unwrap();
        let open = open_operator(&op, &hole).unwrap();
        let h = op.uniform();
        assert_eq!(survival(&open, &h, 0), 1.0);
        let d = delta(&open, &h).unwrap();
        assert_abs_diff_eq!(survival(&open, &h, 1), 1.0 - d, epsilon = 1e-14);
    }

    #[test]
    fn fixed_point_hole_gives_half_ei() {
        // Hole = two cells around the fixed point 0 of the doubling map.
        let hole = HoleSpec::from_ball(512, &Rat::zero(), &rat(1, 512)).unwrap();
        assert_eq!(hole.cells, vec![0, 511]);
        let rep = spectral_report(&doubling(), None, 512, &hole, 12, 1e-12).unwrap();
        assert!((rep.theta_ratio - 0.5).abs() < 0.02, "{}", rep.theta_ratio);
        assert!((rep.theta_series - 0.5).abs() < 0.02, "{}", rep.theta_series);
        assert!(rep.q[0] > 0.45 && rep.q[0] < 0.55);
        assert!(rep.q[1..].iter().all(|&q| q.abs() < 0.01));
    }

    #[test]
    fn noise_pushes_ei_to_one() {
        let hole = HoleSpec::from_ball(1024, &Rat::zero(), &rat(1, 1024)).unwrap();
        let noise = NoiseModel::uniform(0.05);
        let rep =
            spectral_report(&doubling(), Some(&noise), 1024, &hole, 12, 1e-12).unwrap();
        assert!(rep.theta_ratio > 0.95, "{}", rep.theta_ratio);
        assert!(rep.q.iter().all(|&q| q.abs() < 0.03));
    }

    #[test]
    fn closeness_scales_linearly_in_epsilon() {
        let base = ulam_build(&doubling(), 256).unwrap();
        let mut dists = Vec::new();
        for eps in [0.1, 0.05, 0.025] {
            let noisy =
                ulam_random(&doubling(), &NoiseModel::uniform(eps), 256).unwrap();
            dists.push(closeness_check(&base, &noisy).unwrap());
        }
        assert!(dists[0] > dists[1] && dists[1] > dists[2]);
        let slope = (dists[0] / dists[2]).log2() / 2.0;
        assert!((slope - 1.0).abs() < 0.25, "slope {slope}");
    }

    #[test]
    fn error_profile_has_bounded_envelope_ratio() {
        let op = ulam_build(&doubling(), 1024).unwrap();
        let hole = HoleSpec::from_ball(1024, &Rat::zero(), &rat(1, 1024)).unwrap();
        let open = open_operator(&op, &hole).unwrap();
        let h = op.uniform();
        let d = delta(&open, &h).unwrap();
        let eig = leading_eigen(&open, 1e-12).unwrap();
        let xi = spectral_ei(eig.lambda, d).unwrap();
        let grid: Vec<f64> = (1..=10).map(|i| i as f64 / 2.0).collect();
        let (rows, c) = prop_error_profile(&open, &h, d, xi, &grid).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(c < 0.5, "envelope constant {c}");
    }
}
