//! Piecewise affine expanding circle/interval maps, torus linear maps,
//! additive noise models, and exact classification of target points.
//!
//! Classification runs entirely in rational arithmetic: floating-point
//! "periods" are numerically meaningless, so `classify` refuses anything that
//! is not exactly representable. When the forward orbit of a target point
//! lands on a discontinuity of the map, the point is doubled into left/right
//! versions whose orbits continue through the one-sided branch extensions;
//! the classification records whether and how those sided orbits return.

use crate::exact::{format_rat, frac, parse_rat, rat_to_f64, CircleSet, Rat};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("point {0} outside the phase space")]
    OutOfDomain(f64),
    #[error("branches must partition [0,1): {0}")]
    BadPartition(String),
    #[error("branch {index} has |slope| = {slope} <= 1; map must be expanding")]
    NotExpanding { index: usize, slope: f64 },
    #[error("sided evaluation requested at {0}, which is not a branch boundary")]
    SideAtInteriorPoint(String),
    #[error("classification requires exact affine branch data")]
    NotExactAffine,
    #[error("interval-topology image escaped [0,1]: {0}")]
    IntervalEscape(f64),
    #[error("torus matrix must be {0}")]
    BadMatrix(String),
    #[error("invalid map spec: {0}")]
    BadSpec(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Circle,
    Interval,
}

/// One affine branch f(x) = slope*x + intercept on the half-open domain [lo, hi).
#[derive(Clone, Debug)]
pub struct Branch {
    pub lo: Rat,
    pub hi: Rat,
    pub slope: Rat,
    pub intercept: Rat,
    lo_f: f64,
    slope_f: f64,
    intercept_f: f64,
}

impl Branch {
    fn new(lo: Rat, hi: Rat, slope: Rat, intercept: Rat) -> Branch {
        Branch {
            lo_f: rat_to_f64(&lo),
            slope_f: rat_to_f64(&slope),
            intercept_f: rat_to_f64(&intercept),
            lo,
            hi,
            slope,
            intercept,
        }
    }

    /// Closure value of the branch at any point of [lo, hi] (exact, no mod).
    fn value_raw(&self, x: &Rat) -> Rat {
        &self.slope * x + &self.intercept
    }
}

#[derive(Clone, Debug)]
pub struct PiecewiseMap {
    pub name: String,
    pub topology: Topology,
    branches: Vec<Branch>,
    /// Sorted locations of genuine discontinuities (left/right closure values
    /// differ modulo the topology). Branch joints where the values agree are
    /// not listed.
    discontinuities: Vec<Rat>,
    pub exact_affine: bool,
}

/// Side labels for points doubled at a discontinuity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plain,
    Plus,
    Minus,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Plus => Side::Minus,
            Side::Minus => Side::Plus,
            Side::Plain => Side::Plain,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SidedPoint {
    pub location: Rat,
    pub side: Side,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PointKind {
    /// Orbit avoids the discontinuity set and never returns within the horizon.
    SimpleAperiodic,
    /// Exactly periodic, orbit avoids the discontinuity set.
    SimplePeriodic { period: usize, contraction: Rat },
    /// Orbit hits a discontinuity; neither sided continuation returns.
    NonsimpleAperiodic,
    /// Exactly one sided continuation returns to the target.
    SinglyReturning {
        side: Side,
        period: usize,
        landing: Side,
        contraction: Rat,
    },
    /// Both sided continuations return to the target.
    DoublyReturning {
        period_plus: usize,
        landing_plus: Side,
        a_plus: Rat,
        period_minus: usize,
        landing_minus: Side,
        a_minus: Rat,
    },
}

impl PointKind {
    /// Number of sided returns landing on the opposite side (0, 1 or 2);
    /// None for simple/aperiodic kinds.
    pub fn switches(&self) -> Option<u8> {
        match self {
            PointKind::DoublyReturning {
                landing_plus,
                landing_minus,
                ..
            } => Some(
                u8::from(*landing_plus != Side::Plus) + u8::from(*landing_minus != Side::Minus),
            ),
            _ => None,
        }
    }

    /// A singly returning point whose return lands on the non-returning side
    /// follows that side's (aperiodic) orbit afterwards.
    pub fn eventually_aperiodic(&self) -> bool {
        matches!(
            self,
            PointKind::SinglyReturning { side, landing, .. } if landing != side
        )
    }
}

#[derive(Clone, Debug)]
pub struct PointClassification {
    pub kind: PointKind,
    /// First hitting time of the discontinuity set (None for simple points).
    pub ell: Option<usize>,
    /// Horizon up to which absence of (further) returns was certified.
    pub return_lower_bound: Option<usize>,
    /// Set when a sided orbit lands on a second, distinct discontinuity;
    /// the literal side-propagation rule was applied but the case deserves
    /// manual review.
    pub extra_discontinuity_hits: bool,
}

impl PiecewiseMap {
    pub fn from_branches(
        name: &str,
        topology: Topology,
        branch_data: Vec<(Rat, Rat, Rat, Rat)>,
    ) -> Result<PiecewiseMap, MapError> {
        if branch_data.is_empty() {
            return Err(MapError::BadPartition("no branches".into()));
        }
        let mut branches = Vec::with_capacity(branch_data.len());
        let mut cursor = Rat::zero();
        for (i, (lo, hi, slope, intercept)) in branch_data.into_iter().enumerate() {
            if lo != cursor {
                return Err(MapError::BadPartition(format!(
                    "branch {i} starts at {} but previous ends at {}",
                    format_rat(&lo),
                    format_rat(&cursor)
                )));
            }
            if hi <= lo {
                return Err(MapError::BadPartition(format!("branch {i} is empty")));
            }
            if slope.abs() <= Rat::one() {
                return Err(MapError::NotExpanding {
                    index: i,
                    slope: rat_to_f64(&slope),
                });
            }
            cursor = hi.clone();
            branches.push(Branch::new(lo, hi, slope, intercept));
        }
        if cursor != Rat::one() {
            return Err(MapError::BadPartition(format!(
                "last branch ends at {}, expected 1",
                format_rat(&cursor)
            )));
        }
        let mut map = PiecewiseMap {
            name: name.to_string(),
            topology,
            branches,
            discontinuities: Vec::new(),
            exact_affine: true,
        };
        map.discontinuities = map.find_discontinuities();
        Ok(map)
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    fn reduce(&self, v: Rat) -> Rat {
        match self.topology {
            Topology::Circle => frac(&v),
            Topology::Interval => v,
        }
    }

    fn values_agree(&self, a: &Rat, b: &Rat) -> bool {
        match self.topology {
            Topology::Circle => frac(a) == frac(b),
            Topology::Interval => a == b,
        }
    }

    fn find_discontinuities(&self) -> Vec<Rat> {
        let mut out = Vec::new();
        for i in 1..self.branches.len() {
            let b = &self.branches[i].lo;
            let left = self.branches[i - 1].value_raw(b);
            let right = self.branches[i].value_raw(b);
            if !self.values_agree(&left, &right) {
                out.push(b.clone());
            }
        }
        if self.topology == Topology::Circle {
            // 0 and 1 are the same circle point; its left side is the last
            // branch's closure at 1, its right side the first branch at 0.
            let left = self.branches.last().unwrap().value_raw(&Rat::one());
            let right = self.branches[0].value_raw(&Rat::zero());
            if !self.values_agree(&left, &right) {
                out.insert(0, Rat::zero());
            }
        }
        out
    }

    pub fn discontinuities(&self) -> &[Rat] {
        &self.discontinuities
    }

    /// Index of the branch whose half-open domain contains x (the right
    /// branch at an exact boundary).
    pub fn branch_index(&self, x: f64) -> Result<usize, MapError> {
        if !(0.0..1.0).contains(&x) {
            return Err(MapError::OutOfDomain(x));
        }
        let i = self
            .branches
            .partition_point(|b| b.lo_f <= x)
            .saturating_sub(1);
        Ok(i)
    }

    pub fn branch_index_rat(&self, x: &Rat) -> usize {
        self.branches
            .partition_point(|b| &b.lo <= x)
            .saturating_sub(1)
    }

    /// One step of the map; returns the image and the branch used.
    pub fn step(&self, x: f64) -> Result<(f64, usize), MapError> {
        let i = self.branch_index(x)?;
        let b = &self.branches[i];
        let mut y = b.slope_f * x + b.intercept_f;
        match self.topology {
            Topology::Circle => {
                y = y.rem_euclid(1.0);
                if y >= 1.0 {
                    y = 0.0; // rem_euclid(1.0) can round up to exactly 1.0
                }
            }
            Topology::Interval => {
                if !(0.0..=1.0).contains(&y) {
                    return Err(MapError::IntervalEscape(y));
                }
            }
        }
        Ok((y, i))
    }

    /// Exact step on rationals (right branch at boundaries).
    pub fn step_rat(&self, x: &Rat) -> Rat {
        let b = &self.branches[self.branch_index_rat(x)];
        self.reduce(b.value_raw(x))
    }

    pub fn derivative(&self, x: f64) -> Result<f64, MapError> {
        Ok(self.branches[self.branch_index(x)?].slope_f)
    }

    /// Branch seen by points just left (Minus) / just right (Plus) of x.
    fn sided_branch_index(&self, x: &Rat, side: Side) -> Result<usize, MapError> {
        match side {
            Side::Plain | Side::Plus => Ok(self.branch_index_rat(x)),
            Side::Minus => {
                if x.is_zero() {
                    if self.topology == Topology::Circle {
                        Ok(self.branches.len() - 1)
                    } else {
                        Err(MapError::SideAtInteriorPoint("0-".into()))
                    }
                } else {
                    let i = self.branches.partition_point(|b| &b.lo < x);
                    Ok(i - 1)
                }
            }
        }
    }

    fn is_branch_boundary(&self, x: &Rat) -> bool {
        self.branches.iter().any(|b| &b.lo == x)
    }

    fn is_discontinuity(&self, x: &Rat) -> bool {
        self.discontinuities.binary_search_by(|d| d.cmp(x)).is_ok()
    }

    /// Signed one-sided step used by the classification machinery: evaluates
    /// the branch extension on the given side and propagates the side through
    /// the sign of the branch slope. `sign` must be Plus or Minus.
    fn step_signed(&self, x: &Rat, sign: Side) -> Result<(Rat, Side, &Branch), MapError> {
        let i = self.sided_branch_index(x, sign)?;
        let b = &self.branches[i];
        // Left-branch closure at its right endpoint needs the raw value of
        // that branch, which branch_index_rat would not pick. The circle
        // point 0 approached from the left is the last branch's closure at 1.
        let arg = if sign == Side::Minus && x.is_zero() {
            Rat::one()
        } else {
            x.clone()
        };
        let y = self.reduce(b.value_raw(&arg));
        let out_sign = if b.slope.is_positive() {
            sign
        } else {
            sign.opposite()
        };
        Ok((y, out_sign, b))
    }

    /// Continuous branch-extension evaluation at a (possibly) doubled point.
    pub fn step_sided(&self, p: &SidedPoint) -> Result<SidedPoint, MapError> {
        if p.side == Side::Plain {
            let y = self.step_rat(&p.location);
            return Ok(SidedPoint {
                location: y,
                side: Side::Plain,
            });
        }
        if !self.is_branch_boundary(&p.location)
            && !(self.topology == Topology::Circle && p.location.is_zero())
        {
            return Err(MapError::SideAtInteriorPoint(format_rat(&p.location)));
        }
        let (y, sign, _) = self.step_signed(&p.location, p.side)?;
        let side = if self.is_discontinuity(&y) {
            sign
        } else {
            Side::Plain
        };
        Ok(SidedPoint { location: y, side })
    }

    /// Floating-point orbit [x0, f(x0), ..., f^n(x0)]. Note: for maps with
    /// power-of-two slopes this depletes mantissa bits (the doubling map
    /// collapses to 0 in ~53 steps); statistical sampling uses the exact
    /// lattice engine in the stochastic module instead.
    pub fn orbit(&self, x0: f64, n: usize) -> Result<Vec<f64>, MapError> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(x0);
        let mut x = x0;
        for _ in 0..n {
            x = self.step(x)?.0;
            out.push(x);
        }
        Ok(out)
    }

    pub fn orbit_rat(&self, x0: &Rat, n: usize) -> Vec<Rat> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(x0.clone());
        let mut x = x0.clone();
        for _ in 0..n {
            x = self.step_rat(&x);
            out.push(x.clone());
        }
        out
    }

    /// (inf |Df|, sup |Df|) over branches.
    pub fn expansion_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for b in &self.branches {
            let s = b.slope_f.abs();
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }

    /// Exact forward image of a set (union over branches of affine images).
    pub fn image_set(&self, set: &CircleSet) -> CircleSet {
        let mut out = CircleSet::empty();
        for b in &self.branches {
            let dom = CircleSet::from_interval(&b.lo, &b.hi);
            for (lo, hi) in set.intersect(&dom).pieces() {
                let (v1, v2) = (b.value_raw(lo), b.value_raw(hi));
                let piece = if v1 <= v2 {
                    CircleSet::from_interval(&v1, &v2)
                } else {
                    CircleSet::from_interval(&v2, &v1)
                };
                out = out.union(&piece);
            }
        }
        out
    }

    /// Exact preimage f^{-1}(set).
    pub fn preimage_set(&self, set: &CircleSet) -> CircleSet {
        let mut out = CircleSet::empty();
        for b in &self.branches {
            // Solve slope*x + intercept = y + k over integers k for which the
            // solution lies in [lo, hi); the branch image spans |slope|*(hi-lo),
            // so finitely many k contribute.
            let (vlo, vhi) = {
                let v1 = b.value_raw(&b.lo);
                let v2 = b.value_raw(&b.hi);
                if v1 <= v2 {
                    (v1, v2)
                } else {
                    (v2, v1)
                }
            };
            let kmin = vlo.floor().to_integer().to_i64().unwrap();
            let kmax = vhi.ceil().to_integer().to_i64().unwrap();
            for k in kmin..=kmax {
                let shift = Rat::from_integer(k.into());
                for (ylo, yhi) in set.pieces() {
                    let x1 = (ylo + &shift - &b.intercept) / &b.slope;
                    let x2 = (yhi + &shift - &b.intercept) / &b.slope;
                    let (xlo, xhi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
                    let xlo = if xlo > b.lo { xlo } else { b.lo.clone() };
                    let xhi = if xhi < b.hi { xhi } else { b.hi.clone() };
                    if xhi > xlo {
                        out = out.union(&CircleSet::from_interval(&xlo, &xhi));
                    }
                }
            }
        }
        out
    }

    /// Exact classification of the target point's orbit structure.
    ///
    /// Iterates `zeta` in rational arithmetic, tracking discontinuity hits and
    /// sided continuations, for up to `horizon` steps.
    ///
    /// ```
    /// use evlab::exact::rat;
    /// use evlab::maps::{doubling, PointKind};
    ///
    /// // 1/3 -> 2/3 -> 1/3: period 2, |Df^2| = 4, contraction 1/4.
    /// let c = doubling().classify(&rat(1, 3), 100).unwrap();
    /// assert_eq!(
    ///     c.kind,
    ///     PointKind::SimplePeriodic { period: 2, contraction: rat(1, 4) }
    /// );
    /// ```
    pub fn classify(&self, zeta: &Rat, horizon: usize) -> Result<PointClassification, MapError> {
        if !self.exact_affine {
            return Err(MapError::NotExactAffine);
        }
        if zeta < &Rat::zero() || zeta >= &Rat::one() {
            return Err(MapError::OutOfDomain(rat_to_f64(zeta)));
        }

        // Phase 1: plain exact orbit until it returns to zeta or hits a
        // discontinuity.
        let mut x = zeta.clone();
        let mut ell: Option<usize> = None;
        let mut prefix_contraction = Rat::one(); // 1/|Df^j| along zeta -> z
        for j in 0..=horizon {
            if self.is_discontinuity(&x) {
                ell = Some(j);
                break;
            }
            if j == horizon {
                break;
            }
            let b = &self.branches[self.branch_index_rat(&x)];
            prefix_contraction /= b.slope.abs();
            x = self.reduce(b.value_raw(&x));
            if &x == zeta {
                return Ok(PointClassification {
                    kind: PointKind::SimplePeriodic {
                        period: j + 1,
                        contraction: prefix_contraction,
                    },
                    ell: None,
                    return_lower_bound: None,
                    extra_discontinuity_hits: false,
                });
            }
        }
        let Some(ell) = ell else {
            return Ok(PointClassification {
                kind: PointKind::SimpleAperiodic,
                ell: None,
                return_lower_bound: Some(horizon),
                extra_discontinuity_hits: false,
            });
        };
        let z = x;

        // Phase 2: continue both one-sided extensions from the doubled point.
        let mut flagged = false;
        let mut returns: [Option<(usize, Rat, Side)>; 2] = [None, None];
        for (slot, side) in [(0usize, Side::Minus), (1usize, Side::Plus)] {
            let mut loc = z.clone();
            let mut sign = side;
            let mut contraction = prefix_contraction.clone();
            let mut found: Option<(usize, Rat)> = None; // (period, a)
            // horizon bounds the certified period; the extra ell steps only
            // finish the trek back to z to read off the landing side.
            for k in 1..=(horizon + ell) {
                if self.is_discontinuity(&loc) && loc != z {
                    flagged = true;
                }
                let (next, next_sign, branch) = self.step_signed(&loc, sign)?;
                contraction /= branch.slope.abs();
                loc = next;
                sign = next_sign;
                if found.is_none() && k <= horizon && &loc == zeta {
                    found = Some((ell + k, contraction.clone()));
                    if ell == 0 {
                        // z == zeta: the landing side is the side at arrival.
                        returns[slot] = Some((ell + k, contraction.clone(), sign));
                        break;
                    }
                }
                if found.is_some() && loc == z {
                    let (p, a) = found.take().unwrap();
                    returns[slot] = Some((p, a, sign));
                    break;
                }
            }
        }

        let [ret_minus, ret_plus] = returns;
        let kind = match (ret_minus, ret_plus) {
            (None, None) => PointKind::NonsimpleAperiodic,
            (Some((p, a, landing)), None) => PointKind::SinglyReturning {
                side: Side::Minus,
                period: p,
                landing,
                contraction: a,
            },
            (None, Some((p, a, landing))) => PointKind::SinglyReturning {
                side: Side::Plus,
                period: p,
                landing,
                contraction: a,
            },
            (Some((pm, am, lm)), Some((pp, ap, lp))) => PointKind::DoublyReturning {
                period_plus: pp,
                landing_plus: lp,
                a_plus: ap,
                period_minus: pm,
                landing_minus: lm,
                a_minus: am,
            },
        };
        let lower = match &kind {
            PointKind::NonsimpleAperiodic | PointKind::SinglyReturning { .. } => Some(horizon),
            _ => None,
        };
        Ok(PointClassification {
            kind,
            ell: Some(ell),
            return_lower_bound: lower,
            extra_discontinuity_hits: flagged,
        })
    }
}

/// Expanding (or at least invertible) integer linear map on the 1- or 2-torus.
#[derive(Clone, Debug)]
pub struct TorusLinearMap {
    pub dim: usize,
    pub matrix: [[i64; 2]; 2],
}

impl TorusLinearMap {
    pub fn new(rows: &[Vec<i64>]) -> Result<TorusLinearMap, MapError> {
        let dim = rows.len();
        if dim == 0 || dim > 2 || rows.iter().any(|r| r.len() != dim) {
            return Err(MapError::BadMatrix("square of dimension 1 or 2".into()));
        }
        let mut matrix = [[0i64; 2]; 2];
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                matrix[i][j] = v;
            }
        }
        let map = TorusLinearMap { dim, matrix };
        if map.det() == 0 {
            return Err(MapError::BadMatrix("invertible (nonzero determinant)".into()));
        }
        Ok(map)
    }

    pub fn det(&self) -> i64 {
        match self.dim {
            1 => self.matrix[0][0],
            _ => self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0],
        }
    }

    /// All eigenvalue moduli > 1 (volume expansion alone is not enough).
    pub fn is_expanding(&self) -> bool {
        match self.dim {
            1 => self.matrix[0][0].unsigned_abs() > 1,
            _ => {
                let t = (self.matrix[0][0] + self.matrix[1][1]) as f64;
                let d = self.det() as f64;
                let disc = t * t - 4.0 * d;
                if disc >= 0.0 {
                    let r = disc.sqrt();
                    ((t - r) / 2.0).abs() > 1.0 && ((t + r) / 2.0).abs() > 1.0
                } else {
                    d.abs() > 1.0 // complex pair, |lambda|^2 = det
                }
            }
        }
    }

    pub fn step(&self, x: [f64; 2]) -> [f64; 2] {
        match self.dim {
            1 => [(self.matrix[0][0] as f64 * x[0]).rem_euclid(1.0), 0.0],
            _ => {
                let y0 = self.matrix[0][0] as f64 * x[0] + self.matrix[0][1] as f64 * x[1];
                let y1 = self.matrix[1][0] as f64 * x[0] + self.matrix[1][1] as f64 * x[1];
                [y0.rem_euclid(1.0), y1.rem_euclid(1.0)]
            }
        }
    }

    pub fn orbit(&self, x0: [f64; 2], n: usize) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(x0);
        let mut x = x0;
        for _ in 0..n {
            x = self.step(x);
            out.push(x);
        }
        out
    }

    /// (min, max) singular values.
    pub fn expansion_bounds(&self) -> (f64, f64) {
        match self.dim {
            1 => {
                let s = (self.matrix[0][0] as f64).abs();
                (s, s)
            }
            _ => {
                // Eigenvalues of A^T A via trace/determinant.
                let mut t = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        t += (self.matrix[i][j] as f64).powi(2);
                    }
                }
                let d = (self.det() as f64).powi(2);
                let disc = (t * t - 4.0 * d).max(0.0).sqrt();
                (((t - disc) / 2.0).sqrt(), ((t + disc) / 2.0).sqrt())
            }
        }
    }

    /// Euclidean quotient metric on the torus.
    pub fn dist(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            let d = (x[i] - y[i]).abs();
            let d = d.min(1.0 - d);
            s += d * d;
        }
        s.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Uniform,
    SymmetricTriangular,
}

/// Additive noise with i.i.d. increments supported on [-epsilon, epsilon].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub epsilon: f64,
}

impl NoiseModel {
    pub fn uniform(epsilon: f64) -> NoiseModel {
        NoiseModel {
            kind: NoiseKind::Uniform,
            epsilon,
        }
    }

    pub fn triangular(epsilon: f64) -> NoiseModel {
        NoiseModel {
            kind: NoiseKind::SymmetricTriangular,
            epsilon,
        }
    }

    /// (inf, sup) of the noise density on its support. The triangular
    /// density vanishes at the support edges, so its lower bound is 0.
    pub fn density_bounds(&self) -> (f64, f64) {
        match self.kind {
            NoiseKind::Uniform => (0.5 / self.epsilon, 0.5 / self.epsilon),
            NoiseKind::SymmetricTriangular => (0.0, 1.0 / self.epsilon),
        }
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Uniform => rng.gen_range(-self.epsilon..=self.epsilon),
            NoiseKind::SymmetricTriangular => {
                let h = self.epsilon / 2.0;
                rng.gen_range(-h..=h) + rng.gen_range(-h..=h)
            }
        }
    }
}

/// f(x) + omega with the topology's reduction.
pub fn random_step(map: &PiecewiseMap, noise: &NoiseModel, x: f64, omega: f64) -> Result<f64, MapError> {
    debug_assert!(omega.abs() <= noise.epsilon * (1.0 + 1e-12));
    let (y, _) = map.step(x)?;
    let z = y + omega;
    match map.topology {
        Topology::Circle => Ok(z.rem_euclid(1.0)),
        Topology::Interval => {
            if (0.0..=1.0).contains(&z) {
                Ok(z)
            } else {
                Err(MapError::IntervalEscape(z))
            }
        }
    }
}

/// Orbit of the noisy map together with the noise realization (quenched access).
pub fn random_orbit(
    map: &PiecewiseMap,
    noise: &NoiseModel,
    x0: f64,
    seed: u64,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>), MapError> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n + 1);
    let mut omegas = Vec::with_capacity(n);
    points.push(x0);
    let mut x = x0;
    for _ in 0..n {
        let w = noise.sample(&mut rng);
        x = random_step(map, noise, x, w)?;
        points.push(x);
        omegas.push(w);
    }
    Ok((points, omegas))
}

/// Circle distance for floating-point coordinates.
pub fn circle_dist_f64(x: f64, y: f64) -> f64 {
    let d = (x - y).abs();
    d.min(1.0 - d)
}

pub use crate::exact::circle_dist as circle_dist_rat;

// ---------------------------------------------------------------------------
// Serialized map specs (rationals as strings "p/q").

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchSpec {
    pub a: String,
    pub b: String,
    pub slope: String,
    pub intercept: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum MapSpec {
    #[serde(rename = "piecewise_affine")]
    PiecewiseAffine {
        branches: Vec<BranchSpec>,
        topology: Topology,
        #[serde(default)]
        name: Option<String>,
    },
    #[serde(rename = "torus_linear")]
    TorusLinear { matrix: Vec<Vec<i64>> },
}

/// Runtime dynamics selected by a MapSpec.
#[derive(Clone, Debug)]
pub enum Dynamics {
    Piecewise(PiecewiseMap),
    Torus(TorusLinearMap),
}

impl MapSpec {
    pub fn build(&self) -> Result<Dynamics, MapError> {
        match self {
            MapSpec::PiecewiseAffine {
                branches,
                topology,
                name,
            } => {
                let mut data = Vec::with_capacity(branches.len());
                for b in branches {
                    let parse = |s: &str| parse_rat(s).map_err(MapError::BadSpec);
                    data.push((parse(&b.a)?, parse(&b.b)?, parse(&b.slope)?, parse(&b.intercept)?));
                }
                let name = name.clone().unwrap_or_else(|| "custom".into());
                Ok(Dynamics::Piecewise(PiecewiseMap::from_branches(
                    &name, *topology, data,
                )?))
            }
            MapSpec::TorusLinear { matrix } => Ok(Dynamics::Torus(TorusLinearMap::new(matrix)?)),
        }
    }

    pub fn of(map: &PiecewiseMap) -> MapSpec {
        MapSpec::PiecewiseAffine {
            branches: map
                .branches
                .iter()
                .map(|b| BranchSpec {
                    a: format_rat(&b.lo),
                    b: format_rat(&b.hi),
                    slope: format_rat(&b.slope),
                    intercept: format_rat(&b.intercept),
                })
                .collect(),
            topology: map.topology,
            name: Some(map.name.clone()),
        }
    }
}

// ---------------------------------------------------------------------------
// Catalogue maps.

use crate::exact::rat;

/// 2x mod 1.
pub fn doubling() -> PiecewiseMap {
    PiecewiseMap::from_branches(
        "doubling",
        Topology::Circle,
        vec![
            (rat(0, 1), rat(1, 2), rat(2, 1), rat(0, 1)),
            (rat(1, 2), rat(1, 1), rat(2, 1), rat(-1, 1)),
        ],
    )
    .unwrap()
}

/// 3x mod 1.
pub fn tripling() -> PiecewiseMap {
    PiecewiseMap::from_branches(
        "tripling",
        Topology::Circle,
        vec![
            (rat(0, 1), rat(1, 3), rat(3, 1), rat(0, 1)),
            (rat(1, 3), rat(2, 3), rat(3, 1), rat(-1, 1)),
            (rat(2, 3), rat(1, 1), rat(3, 1), rat(-2, 1)),
        ],
    )
    .unwrap()
}

/// Lebesgue-invariant circle map with a genuine discontinuity at 0 whose
/// right extension returns to 0 in one step (through slope -2, so it lands on
/// the minus side) while the left extension falls onto the fixed point 1/3 and
/// never returns: 0 is an eventually aperiodic, singly returning target with
/// a+ = 1/2.
pub fn boundary_return_map() -> PiecewiseMap {
    PiecewiseMap::from_branches(
        "boundary-return",
        Topology::Circle,
        vec![
            (rat(0, 1), rat(1, 2), rat(-2, 1), rat(1, 1)),
            (rat(1, 2), rat(5, 6), rat(2, 1), rat(-2, 3)),
            (rat(5, 6), rat(1, 1), rat(2, 1), rat(-5, 3)),
        ],
    )
    .unwrap()
}
