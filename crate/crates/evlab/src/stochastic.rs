//! Observables, threshold schedules, and sampling of the stationary
//! exceedance processes.
//!
//! Sampling of affine maps runs on an exact streaming-window engine: the
//! orbit state is the integer window X of the leading digits of x = (X + u)/q
//! (q = D * 2^64 ticks, arithmetic exact in i128), and each step injects the
//! uniform carry of the unrevealed tail u. This reproduces the exact joint
//! law of hit/exceedance sequences, sidestepping both the floating-point
//! mantissa depletion that collapses naive iteration of power-of-two slopes
//! after ~53 steps and the spurious short periods of any fixed finite lattice
//! (the multiplicative order of the slope mod q bounds those periods).

use crate::exact::{rat_to_f64, Rat};
use crate::maps::{circle_dist_f64, NoiseKind, NoiseModel, PiecewiseMap, Topology};
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("tau/n = {0} is not attainable by a ball around the target")]
    TauTooLarge(f64),
    #[error("tau/n = {0} below the empirical model's resolution limit")]
    BelowResolution(f64),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Map(#[from] crate::maps::MapError),
}

/// Observable shapes: strictly decreasing functions of the distance to the
/// target, so every upper level set is a metric ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    NegDist,
    NegLogDist,
}

impl Shape {
    pub fn u_from_r(self, r: f64) -> f64 {
        match self {
            Shape::NegDist => -r,
            Shape::NegLogDist => -r.ln(),
        }
    }

    pub fn r_from_u(self, u: f64) -> f64 {
        match self {
            Shape::NegDist => -u,
            Shape::NegLogDist => (-u).exp(),
        }
    }

    pub fn value(self, dist: f64) -> f64 {
        match self {
            Shape::NegDist => -dist,
            Shape::NegLogDist => -dist.ln(),
        }
    }
}

/// phi(x) = shape(dist(x, center)); the canonical shape is -dist.
#[derive(Clone, Debug)]
pub struct Observable {
    pub center: Rat,
    pub shape: Shape,
    center_f: f64,
}

impl Observable {
    pub fn new(center: Rat, shape: Shape) -> Observable {
        Observable {
            center_f: rat_to_f64(&center),
            center,
            shape,
        }
    }

    pub fn neg_dist(center: Rat) -> Observable {
        Observable::new(center, Shape::NegDist)
    }

    pub fn center_f64(&self) -> f64 {
        self.center_f
    }

    pub fn value(&self, x: f64) -> f64 {
        let d = circle_dist_f64(x, self.center_f);
        match self.shape {
            Shape::NegDist => -d,
            Shape::NegLogDist => -d.ln(),
        }
    }
}

/// Where ball-measure queries come from.
#[derive(Clone, Debug)]
pub enum MeasureModel {
    LebesgueExact { dim: usize },
    DensityGrid { cells: Vec<f64> },
    Empirical { samples: Vec<f64> },
}

impl MeasureModel {
    /// mu(B_r(center)); center is 1-D except for the LebesgueExact dim-2 case
    /// (where the measure is rotation invariant anyway).
    pub fn ball_measure(&self, center: f64, r: f64) -> f64 {
        match self {
            MeasureModel::LebesgueExact { dim: 1 } => (2.0 * r).min(1.0),
            MeasureModel::LebesgueExact { .. } => std::f64::consts::PI * r * r,
            MeasureModel::DensityGrid { cells } => {
                let k = cells.len();
                let h = 1.0 / k as f64;
                let mut mass = 0.0;
                for (i, c) in cells.iter().enumerate() {
                    let lo = i as f64 * h;
                    let hi = lo + h;
                    // overlap of the cell with the ball, on the circle
                    let mut overlap = 0.0;
                    for shift in [-1.0, 0.0, 1.0] {
                        let a = (center - r).max(lo + shift);
                        let b = (center + r).min(hi + shift);
                        if b > a {
                            overlap += b - a;
                        }
                    }
                    mass += c * overlap.min(h); // cells hold density values
                }
                mass
            }
            MeasureModel::Empirical { samples } => {
                let hits = samples
                    .iter()
                    .filter(|&&x| circle_dist_f64(x, center) < r)
                    .count();
                hits as f64 / samples.len() as f64
            }
        }
    }
}

/// Threshold u_n with n * mu(B_{r_n}) = tau.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub tau: f64,
    pub n: usize,
    pub u_n: f64,
    pub r_n: f64,
}

pub fn threshold_for(
    measure: &MeasureModel,
    obs: &Observable,
    tau: f64,
    n: usize,
) -> Result<ThresholdSchedule, SampleError> {
    assert!(tau > 0.0 && n >= 1);
    let target = tau / n as f64;
    let r = match measure {
        MeasureModel::LebesgueExact { dim: 1 } => {
            if target > 1.0 {
                return Err(SampleError::TauTooLarge(target));
            }
            target / 2.0
        }
        MeasureModel::LebesgueExact { .. } => {
            let r = (target / std::f64::consts::PI).sqrt();
            if r > 0.5 {
                return Err(SampleError::TauTooLarge(target));
            }
            r
        }
        MeasureModel::DensityGrid { .. } => {
            if measure.ball_measure(obs.center_f64(), 0.5) < target {
                return Err(SampleError::TauTooLarge(target));
            }
            // ball measure is monotone in r: bisect
            let (mut lo, mut hi) = (0.0f64, 0.5f64);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if measure.ball_measure(obs.center_f64(), mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
        MeasureModel::Empirical { samples } => {
            let m = (target * samples.len() as f64).round() as usize;
            if m < 10 {
                return Err(SampleError::BelowResolution(target));
            }
            let mut dists: Vec<f64> = samples
                .iter()
                .map(|&x| circle_dist_f64(x, obs.center_f64()))
                .collect();
            dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // smallest r with #{dist < r} = m
            0.5 * (dists[m - 1] + dists[m.min(dists.len() - 1)])
        }
    };
    Ok(ThresholdSchedule {
        tau,
        n,
        u_n: obs.shape.u_from_r(r),
        r_n: r,
    })
}

/// Compact exceedance record: everything the estimators need.
#[derive(Clone, Debug, Default)]
pub struct Exceedances {
    pub n: u32,
    pub times: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub map: String,
    pub noise: Option<NoiseModel>,
    pub seed: Option<u64>,
    pub start: String,
}

#[derive(Clone, Debug)]
pub struct ProcessSample {
    pub values: Vec<f64>,
    pub u_n: f64,
    pub exceedances: Exceedances,
    pub m_n: f64,
    pub provenance: Provenance,
}

impl ProcessSample {
    fn from_values(values: Vec<f64>, u_n: f64, provenance: Provenance) -> ProcessSample {
        let times = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > u_n)
            .map(|(j, _)| j as u32)
            .collect();
        let m_n = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        ProcessSample {
            exceedances: Exceedances {
                n: values.len() as u32,
                times,
            },
            values,
            u_n,
            m_n,
            provenance,
        }
    }
}

// ---------------------------------------------------------------------------
// Exact streaming-window engine.
//
// A continuum start x is represented as x = (X + u)/q, where X is the integer
// window of the leading digits (q = D * 2^64 ticks) and u in [0, 1) is the
// unrevealed uniform tail. Under an integer-slope branch x' = s*x + t, the new
// window is X' = s*X + t*q + floor(s*u) (mod q), and for uniform u the carry
// floor(s*u) is uniform on {0..s-1} (s > 0) or {-|s|..-1} (s < 0) and
// independent of the new tail, which is again uniform. So stepping the window
// and injecting a fresh uniform carry each step reproduces the exact joint law
// of every event sequence whose defining sets are unions of whole ticks
// (branch cuts, target balls, and grid cells are all tick-aligned by
// construction). Unlike a fixed-lattice orbit, which is eventually periodic
// with period bounded by the multiplicative order of the slope mod q, the
// streamed orbit never repeats spuriously.

const WINDOW: i128 = 1i128 << 64;

fn lcm_i128(a: i128, b: i128) -> i128 {
    fn gcd(mut a: i128, mut b: i128) -> i128 {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a.abs()
    }
    a / gcd(a, b) * b
}

/// Fixed-denominator lattice {0, 1/q, ..., (q-1)/q} closed under the map.
#[derive(Clone, Debug)]
pub struct Lattice {
    pub q: i128,
}

impl Lattice {
    /// Smallest q = D * 2^64 whose ticks align with the map's intercepts and
    /// branch cuts plus the given extra rationals (targets, centers, ...).
    pub fn for_map(map: &PiecewiseMap, extra: &[&Rat]) -> Option<Lattice> {
        let mut d: i128 = 1;
        for b in map.branches() {
            if !b.slope.denom().is_one() {
                return None; // non-integer slope: ticks not closed under carry
            }
            d = lcm_i128(d, b.intercept.denom().to_i128()?);
            d = lcm_i128(d, b.lo.denom().to_i128()?);
            d = lcm_i128(d, b.hi.denom().to_i128()?);
        }
        for r in extra {
            d = lcm_i128(d, r.denom().to_i128()?);
        }
        let q = d.checked_mul(WINDOW)?;
        // headroom so slope * p + offset stays inside i128
        if q > (1i128 << 100) {
            return None;
        }
        Some(Lattice { q })
    }

    /// Exact tick count of a rational representable on the lattice.
    pub fn ticks(&self, r: &Rat) -> Option<i128> {
        let den = r.denom().to_i128()?;
        if self.q % den != 0 {
            return None;
        }
        Some(r.numer().to_i128()? * (self.q / den))
    }

    pub fn ticks_round(&self, x: f64) -> i128 {
        (x * self.q as f64).round() as i128
    }

    pub fn circle_dist_ticks(&self, a: i128, b: i128) -> i128 {
        let d = (a - b).rem_euclid(self.q);
        d.min(self.q - d)
    }
}

#[derive(Clone, Debug)]
struct LatticeStepper {
    q: i128,
    cuts: Vec<i128>, // branch i covers ticks [cuts[i], cuts[i+1])
    slopes: Vec<i128>,
    offsets: Vec<i128>,
}

impl LatticeStepper {
    fn new(map: &PiecewiseMap, lattice: &Lattice) -> Option<LatticeStepper> {
        let q = lattice.q;
        let mut cuts = vec![0i128];
        let mut slopes = Vec::new();
        let mut offsets = Vec::new();
        for b in map.branches() {
            let hi_num = b.hi.numer().to_i128()?;
            let hi_den = b.hi.denom().to_i128()?;
            // smallest p with p/q >= hi
            cuts.push((hi_num.checked_mul(q)? + hi_den - 1).div_euclid(hi_den));
            slopes.push(b.slope.to_integer().to_i128()?);
            offsets.push(lattice.ticks(&b.intercept)?);
        }
        Some(LatticeStepper {
            q,
            cuts,
            slopes,
            offsets,
        })
    }

    /// One step of the window orbit. The jitter draw stands in for the carry
    /// floor(s*u) of the unrevealed uniform tail u; see the module notes on
    /// the streaming-window engine.
    #[inline]
    fn step(&self, p: i128, rng: &mut ChaCha8Rng) -> i128 {
        let mut i = 0;
        while i + 2 < self.cuts.len() && p >= self.cuts[i + 1] {
            i += 1;
        }
        let s = self.slopes[i];
        let carry = if s > 0 {
            rng.gen_range(0..s)
        } else {
            rng.gen_range(s..0)
        };
        (s * p + self.offsets[i] + carry).rem_euclid(self.q)
    }
}

#[derive(Clone, Debug)]
struct LatticeNoise {
    kind: NoiseKind,
    e: i128,
}

impl LatticeNoise {
    #[inline]
    fn sample(&self, rng: &mut ChaCha8Rng) -> i128 {
        match self.kind {
            NoiseKind::Uniform => rng.gen_range(-self.e..=self.e),
            NoiseKind::SymmetricTriangular => {
                let h = self.e / 2;
                rng.gen_range(-h..=h) + rng.gen_range(-h..=h)
            }
        }
    }
}

/// What counts as a "hit" along a lattice orbit.
#[derive(Clone, Debug)]
pub enum LatticeTarget {
    /// dist(x, center) < radius, in ticks.
    Ball { center: i128, radius: i128 },
    /// x falls in a union of grid cells [a/k, b/k) (half-open ranges of cell
    /// indices, used to match spectral holes exactly).
    Cells { k: i128, ranges: Vec<(i128, i128)> },
}

impl LatticeTarget {
    #[inline]
    fn hit(&self, p: i128, q: i128) -> bool {
        match self {
            LatticeTarget::Ball { center, radius } => {
                // tick p covers [p/q, (p+1)/q), inside the ball iff
                // p in [center - radius, center + radius)
                (p - center + radius).rem_euclid(q) < 2 * radius
            }
            LatticeTarget::Cells { k, ranges } => {
                let cell = p * k / q;
                ranges.iter().any(|&(a, b)| a <= cell && cell < b)
            }
        }
    }
}

/// Exact orbit sampler on the lattice; the workhorse behind every Monte Carlo
/// experiment on affine maps.
#[derive(Clone, Debug)]
pub struct OrbitSampler {
    pub lattice: Lattice,
    stepper: LatticeStepper,
    noise: Option<LatticeNoise>,
    pub target: LatticeTarget,
}

impl OrbitSampler {
    pub fn for_ball(
        map: &PiecewiseMap,
        noise: Option<&NoiseModel>,
        center: &Rat,
        radius: f64,
    ) -> Option<OrbitSampler> {
        let lattice = Lattice::for_map(map, &[center])?;
        let stepper = LatticeStepper::new(map, &lattice)?;
        let c = lattice.ticks(center)?;
        let r = lattice.ticks_round(radius);
        let target = LatticeTarget::Ball {
            center: c,
            radius: r,
        };
        Some(OrbitSampler::assemble(map, noise, lattice, stepper, target))
    }

    pub fn for_cells(
        map: &PiecewiseMap,
        noise: Option<&NoiseModel>,
        k: usize,
        ranges: Vec<(i128, i128)>,
    ) -> Option<OrbitSampler> {
        let lattice = Lattice::for_map(map, &[])?;
        let stepper = LatticeStepper::new(map, &lattice)?;
        let target = LatticeTarget::Cells {
            k: k as i128,
            ranges,
        };
        Some(OrbitSampler::assemble(map, noise, lattice, stepper, target))
    }

    fn assemble(
        map: &PiecewiseMap,
        noise: Option<&NoiseModel>,
        lattice: Lattice,
        stepper: LatticeStepper,
        target: LatticeTarget,
    ) -> OrbitSampler {
        debug_assert_eq!(map.topology, Topology::Circle);
        let noise = noise.map(|nm| LatticeNoise {
            kind: nm.kind,
            e: lattice.ticks_round(nm.epsilon),
        });
        OrbitSampler {
            lattice,
            stepper,
            noise,
            target,
        }
    }

    pub fn uniform_start(&self, rng: &mut ChaCha8Rng) -> i128 {
        rng.gen_range(0..self.lattice.q)
    }

    /// Hit times j in [0, n) along the orbit started at x0 (x0 itself is time 0).
    pub fn hit_times(&self, x0: i128, n: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let mut times = Vec::new();
        let q = self.lattice.q;
        let mut p = x0;
        for j in 0..n {
            if self.target.hit(p, q) {
                times.push(j as u32);
            }
            p = self.stepper.step(p, rng);
            if let Some(noise) = &self.noise {
                p = (p + noise.sample(rng)).rem_euclid(q);
            }
        }
        times
    }

    /// First j in 1..=horizon with orbit_j in the target, else None.
    pub fn first_hit(&self, x0: i128, horizon: usize, rng: &mut ChaCha8Rng) -> Option<u32> {
        let q = self.lattice.q;
        let mut p = x0;
        for j in 1..=horizon {
            p = self.stepper.step(p, rng);
            if let Some(noise) = &self.noise {
                p = (p + noise.sample(rng)).rem_euclid(q);
            }
            if self.target.hit(p, q) {
                return Some(j as u32);
            }
        }
        None
    }

    /// Uniform tick inside the ball target (for return-time starts).
    pub fn uniform_start_in_target(&self, rng: &mut ChaCha8Rng) -> i128 {
        match &self.target {
            LatticeTarget::Ball { center, radius } => {
                let off = rng.gen_range(-radius..*radius);
                (center + off).rem_euclid(self.lattice.q)
            }
            LatticeTarget::Cells { k, ranges } => {
                let q = self.lattice.q;
                let total: i128 = ranges.iter().map(|&(a, b)| b - a).sum();
                let pick = rng.gen_range(0..total);
                let mut acc = 0;
                for &(a, b) in ranges {
                    if pick < acc + (b - a) {
                        let cell = a + (pick - acc);
                        let lo = cell * q / k;
                        let hi = (cell + 1) * q / k;
                        return rng.gen_range(lo..hi);
                    }
                    acc += b - a;
                }
                unreachable!()
            }
        }
    }

    /// Exact orbit in ticks: [x0, f(x0), ..., f^n(x0)] (noisy if configured).
    pub fn orbit_ticks(&self, x0: i128, n: usize, rng: &mut ChaCha8Rng) -> Vec<i128> {
        let q = self.lattice.q;
        let mut out = Vec::with_capacity(n + 1);
        out.push(x0);
        let mut p = x0;
        for _ in 0..n {
            p = self.stepper.step(p, rng);
            if let Some(noise) = &self.noise {
                p = (p + noise.sample(rng)).rem_euclid(q);
            }
            out.push(p);
        }
        out
    }

    /// Full trial values (phi along the orbit) for the public sampling API.
    fn values(&self, x0: i128, n: usize, shape: Shape, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let LatticeTarget::Ball { center, .. } = self.target else {
            panic!("values() requires a ball target")
        };
        let q = self.lattice.q;
        let qf = q as f64;
        let mut out = Vec::with_capacity(n);
        let mut p = x0;
        for j in 0..n {
            let d = (p - center).rem_euclid(q);
            let d = d.min(q - d) as f64 / qf;
            out.push(match shape {
                Shape::NegDist => -d,
                Shape::NegLogDist => -d.ln(),
            });
            if j + 1 < n {
                p = self.stepper.step(p, rng);
                if let Some(noise) = &self.noise {
                    p = (p + noise.sample(rng)).rem_euclid(q);
                }
            }
        }
        out
    }
}

/// Per-trial RNG stream: splitmix of (master seed, trial index).
pub fn trial_rng(master_seed: u64, trial: u64) -> ChaCha8Rng {
    let mut z = master_seed ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

// ---------------------------------------------------------------------------
// Public sampling API.

/// Exact check that the map preserves Lebesgue: the preimage of every cell of
/// the partition refined at all branch-image endpoints has the cell's measure.
pub fn is_lebesgue_invariant(map: &PiecewiseMap) -> bool {
    use crate::exact::{frac, CircleSet};
    let mut cuts: Vec<Rat> = Vec::new();
    for b in map.branches() {
        let lo = &b.slope * &b.lo + &b.intercept;
        let hi = &b.slope * &b.hi + &b.intercept;
        cuts.push(frac(&lo));
        cuts.push(frac(&hi));
    }
    cuts.push(Rat::from_integer(0.into()));
    cuts.sort();
    cuts.dedup();
    cuts.push(Rat::one());
    for w in cuts.windows(2) {
        let cell = CircleSet::from_interval(&w[0], &w[1]);
        if map.preimage_set(&cell).measure() != cell.measure() {
            return false;
        }
    }
    true
}

/// Draw a start distributed by the stationary measure: exactly uniform when
/// Lebesgue is invariant, otherwise uniform followed by a burn-in.
pub fn stationary_start(
    map: &PiecewiseMap,
    noise: Option<&NoiseModel>,
    burn_in: usize,
    seed: u64,
) -> Result<f64, SampleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: f64 = rng.gen_range(0.0..1.0);
    // Additive noise mod 1 preserves Lebesgue whenever the map alone does.
    if !is_lebesgue_invariant(map) {
        for _ in 0..burn_in {
            x = match noise {
                None => map.step(x)?.0,
                Some(nm) => {
                    let w = nm.sample(&mut rng);
                    crate::maps::random_step(map, nm, x, w)?
                }
            };
        }
    }
    Ok(x)
}

fn sample_on_lattice(
    map: &PiecewiseMap,
    noise: Option<&NoiseModel>,
    obs: &Observable,
    x0: Option<f64>,
    seed: u64,
    sched: &ThresholdSchedule,
) -> Option<ProcessSample> {
    let sampler = OrbitSampler::for_ball(map, noise, &obs.center, sched.r_n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = match x0 {
        Some(x) => sampler.lattice.ticks_round(x),
        None => sampler.uniform_start(&mut rng),
    };
    let values = sampler.values(start, sched.n, obs.shape, &mut rng);
    Some(ProcessSample::from_values(
        values,
        sched.u_n,
        Provenance {
            map: map.name.clone(),
            noise: noise.copied(),
            seed: Some(seed),
            start: match x0 {
                Some(x) => format!("fixed({x})"),
                None => "stationary".into(),
            },
        },
    ))
}

/// Observable values along the deterministic orbit from x0.
pub fn sample_deterministic(
    map: &PiecewiseMap,
    obs: &Observable,
    x0: f64,
    sched: &ThresholdSchedule,
) -> Result<ProcessSample, SampleError> {
    if let Some(s) = sample_on_lattice(map, None, obs, Some(x0), 0, sched) {
        return Ok(s);
    }
    let orbit = map.orbit(x0, sched.n.saturating_sub(1))?;
    let values = orbit.iter().map(|&x| obs.value(x)).collect();
    Ok(ProcessSample::from_values(
        values,
        sched.u_n,
        Provenance {
            map: map.name.clone(),
            noise: None,
            seed: None,
            start: format!("fixed({x0})"),
        },
    ))
}

/// Observable values along a noisy orbit; the seed drives the stationary
/// start and the noise realization.
pub fn sample_random(
    map: &PiecewiseMap,
    noise: &NoiseModel,
    obs: &Observable,
    seed: u64,
    sched: &ThresholdSchedule,
) -> Result<ProcessSample, SampleError> {
    if let Some(s) = sample_on_lattice(map, Some(noise), obs, None, seed, sched) {
        return Ok(s);
    }
    let x0 = stationary_start(map, Some(noise), 1000, seed)?;
    let (orbit, _) = crate::maps::random_orbit(map, noise, x0, seed.wrapping_add(1), sched.n.saturating_sub(1))?;
    let values = orbit.iter().map(|&x| obs.value(x)).collect();
    Ok(ProcessSample::from_values(
        values,
        sched.u_n,
        Provenance {
            map: map.name.clone(),
            noise: Some(*noise),
            seed: Some(seed),
            start: "stationary".into(),
        },
    ))
}

/// Fast path for large experiments: exceedance time sets only.
pub fn run_trials(
    map: &PiecewiseMap,
    noise: Option<&NoiseModel>,
    center: &Rat,
    sched: &ThresholdSchedule,
    trials: usize,
    master_seed: u64,
) -> Vec<Exceedances> {
    use rayon::prelude::*;
    let sampler = OrbitSampler::for_ball(map, noise, center, sched.r_n)
        .expect("map is not lattice-compatible; use sample_deterministic/sample_random");
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t as u64);
            let x0 = sampler.uniform_start(&mut rng);
            Exceedances {
                n: sched.n as u32,
                times: sampler.hit_times(x0, sched.n, &mut rng),
            }
        })
        .collect()
}
