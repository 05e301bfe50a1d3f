//! Hitting- and return-time statistics, the maxima/hitting duality identity,
//! the HTS<->RTS integral relation, exact first-return lower bounds, and the
//! short-return probability bound for noisy orbits.
//!
//! The target limit law for shrinking balls is the standard exponential
//! 1 - e^{-t} (in the aperiodic/noisy cases); empirical CDFs are reported on
//! the Kac-normalized time scale r * mu(V).

use crate::exact::{CircleSet, Rat};
use crate::maps::{NoiseModel, PiecewiseMap};
use crate::stochastic::{trial_rng, Exceedances, OrbitSampler, ThresholdSchedule};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HittingError {
    #[error("censored mass {0:.4} exceeds 1% at the grid end")]
    TooMuchCensoring(f64),
    #[error("input CDF is not monotone at index {0}")]
    NotMonotone(usize),
    #[error("map is not lattice-compatible for exact simulation")]
    NoLattice,
    #[error("interval piece count exceeded {0}; returning would be unsound")]
    PieceBlowup(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartMode {
    /// Start distributed by the stationary measure (hitting times).
    Ambient,
    /// Start conditioned on the target set (return times).
    ConditionedOnTarget,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HittingSample {
    /// First hit time in 1..=horizon, None if censored at the horizon.
    pub r: Option<u32>,
    /// Kac scale 1/mu(V).
    pub kac_scale: f64,
    pub start_mode: StartMode,
}

/// First j in 1..=horizon with orbit_j inside the ball V = B_radius(center).
pub fn hitting_time(
    map: &PiecewiseMap,
    noise: Option<&NoiseModel>,
    x0: f64,
    seed: u64,
    center: &Rat,
    radius: f64,
    horizon: usize,
) -> Result<HittingSample, HittingError> {
    let sampler =
        OrbitSampler::for_ball(map, noise, center, radius).ok_or(HittingError::NoLattice)?;
    let mut rng = trial_rng(seed, 0);
    let x0 = sampler.lattice.ticks_round(x0);
    Ok(HittingSample {
        r: sampler.first_hit(x0, horizon, &mut rng),
        kac_scale: 1.0 / (2.0 * radius),
        start_mode: StartMode::Ambient,
    })
}

/// Default censoring horizon: 50 Kac times.
pub fn default_horizon(mu_v: f64) -> usize {
    (50.0 / mu_v).ceil() as usize
}

/// Batch of first-hit times with stationary (Ambient) or in-target
/// (ConditionedOnTarget) starts.
pub fn hitting_trials(
    map: &PiecewiseMap,
    noise: Option<&NoiseModel>,
    center: &Rat,
    radius: f64,
    trials: usize,
    horizon: usize,
    master_seed: u64,
    mode: StartMode,
) -> Result<Vec<Option<u32>>, HittingError> {
    use rayon::prelude::*;
    let sampler =
        OrbitSampler::for_ball(map, noise, center, radius).ok_or(HittingError::NoLattice)?;
    Ok((0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t as u64);
            let x0 = match mode {
                StartMode::Ambient => sampler.uniform_start(&mut rng),
                StartMode::ConditionedOnTarget => sampler.uniform_start_in_target(&mut rng),
            };
            sampler.first_hit(x0, horizon, &mut rng)
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalCdf {
    pub t: Vec<f64>,
    pub g: Vec<f64>,
    pub censored_mass: f64,
}

/// Empirical CDF of r * mu(V) on the given grid; errors if more than 1% of
/// the mass is censored (the tail bias would corrupt the estimate).
pub fn hts_cdf(rs: &[Option<u32>], mu_v: f64, grid: &[f64]) -> Result<EmpiricalCdf, HittingError> {
    let n = rs.len() as f64;
    let censored = rs.iter().filter(|r| r.is_none()).count() as f64 / n;
    if censored > 0.01 {
        return Err(HittingError::TooMuchCensoring(censored));
    }
    let mut scaled: Vec<f64> = rs
        .iter()
        .flatten()
        .map(|&r| r as f64 * mu_v)
        .collect();
    scaled.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let g = grid
        .iter()
        .map(|&t| scaled.partition_point(|&s| s <= t) as f64 / n)
        .collect();
    Ok(EmpiricalCdf {
        t: grid.to_vec(),
        g,
        censored_mass: censored,
    })
}

/// Return-time CDF: same estimator, different start mode upstream.
pub fn rts_cdf(rs: &[Option<u32>], mu_v: f64, grid: &[f64]) -> Result<EmpiricalCdf, HittingError> {
    hts_cdf(rs, mu_v, grid)
}

/// G(t) = integral_0^t (1 - G~(s)) ds by the trapezoid rule on the grid.
pub fn hts_from_rts(rts: &EmpiricalCdf) -> Result<EmpiricalCdf, HittingError> {
    for i in 1..rts.g.len() {
        if rts.g[i] < rts.g[i - 1] {
            return Err(HittingError::NotMonotone(i));
        }
    }
    let mut g = Vec::with_capacity(rts.t.len());
    let mut acc = 0.0;
    // The grid is assumed to start near 0; integrate from t = 0 to the first
    // grid point with the integrand at its left value (1 - G~(0) = 1).
    let mut prev_t = 0.0;
    let mut prev_v = 1.0;
    for (&t, &gt) in rts.t.iter().zip(&rts.g) {
        let v = 1.0 - gt;
        acc += 0.5 * (prev_v + v) * (t - prev_t);
        g.push(acc.min(1.0));
        prev_t = t;
        prev_v = v;
    }
    Ok(EmpiricalCdf {
        t: rts.t.clone(),
        g,
        censored_mass: rts.censored_mass,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DualityOutcome {
    /// The path-wise identity {M_n <= u} = {r > n-1}, checked on trials with
    /// X_0 <= u (r starts counting at j = 1, the maximum at j = 0).
    pub agrees: Option<bool>,
    /// Whether this trial had to be excluded from the conditioned check.
    pub x0_exceeds: bool,
    /// True when the two sides disagree without the conditioning (exactly the
    /// trials whose only exceedance is at j = 0).
    pub unconditioned_mismatch: bool,
}

/// Event-wise check of the maxima/hitting duality on one trial.
pub fn duality_check(sample: &Exceedances) -> DualityOutcome {
    let x0_exceeds = sample.times.first() == Some(&0);
    let max_below = sample.times.is_empty();
    let no_hit = !sample.times.iter().any(|&t| t >= 1);
    if x0_exceeds {
        DualityOutcome {
            agrees: None,
            x0_exceeds,
            unconditioned_mismatch: max_below != no_hit,
        }
    } else {
        DualityOutcome {
            agrees: Some(max_below == no_hit),
            x0_exceeds,
            unconditioned_mismatch: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReturnBound {
    /// R(V): first j with f^j(V) meeting V.
    Exact(usize),
    /// No intersection up to this horizon (certified).
    GreaterThan(usize),
}

const PIECE_GUARD: usize = 1_000_000;

/// Exact minimum return time of an interval: propagates V forward as a union
/// of rational intervals and reports the first overlap with V.
pub fn first_return_min(
    map: &PiecewiseMap,
    v: &CircleSet,
    horizon: usize,
) -> Result<ReturnBound, HittingError> {
    let mut w = v.clone();
    for j in 1..=horizon {
        w = map.image_set(&w);
        if w.piece_count() > PIECE_GUARD {
            return Err(HittingError::PieceBlowup(PIECE_GUARD));
        }
        if !w.intersect(v).is_empty() {
            return Ok(ReturnBound::Exact(j));
        }
    }
    Ok(ReturnBound::GreaterThan(horizon))
}

#[derive(Clone, Debug, Serialize)]
pub struct ShortReturnReport {
    pub alpha_n: usize,
    pub p_hat: f64,
    pub se: f64,
    /// Union bound sup-density * sum_j Leb(B_{2 eta^j |U|}).
    pub bound: f64,
    pub trials: usize,
}

/// Default cutoff alpha_n = ceil(log log n) + 2.
pub fn default_alpha_n(n: usize) -> usize {
    ((n as f64).ln().ln().ceil() as usize) + 2
}

/// Monte Carlo probability (over noise realizations) that the noisy orbit of
/// the target returns within alpha_n steps to the expanding-safety ball
/// B_{2 eta^j |U_n|}, reported against the analytic union bound.
pub fn short_return_prob(
    map: &PiecewiseMap,
    noise: Option<&NoiseModel>,
    zeta: &Rat,
    sched: &ThresholdSchedule,
    alpha_n: usize,
    trials: usize,
    master_seed: u64,
) -> Result<ShortReturnReport, HittingError> {
    let sampler =
        OrbitSampler::for_ball(map, noise, zeta, sched.r_n).ok_or(HittingError::NoLattice)?;
    let zeta_ticks = sampler
        .lattice
        .ticks(zeta)
        .ok_or(HittingError::NoLattice)?;
    let (_, eta) = map.expansion_bounds();
    let diameter = 2.0 * sched.r_n; // |U_n|
    let q = sampler.lattice.q as f64;
    let radii: Vec<i128> = (1..=alpha_n)
        .map(|j| (2.0 * eta.powi(j as i32) * diameter * q).round() as i128)
        .collect();
    let mut hits = 0usize;
    for t in 0..trials {
        let mut rng = trial_rng(master_seed, t as u64);
        let orbit = sampler.orbit_ticks(zeta_ticks, alpha_n, &mut rng);
        let hit = orbit[1..].iter().zip(&radii).any(|(&p, &r)| {
            sampler.lattice.circle_dist_ticks(p, zeta_ticks) <= r
        });
        if hit {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / trials as f64;
    let bound = match noise {
        Some(nm) => {
            let (_, g_hi) = nm.density_bounds();
            (1..=alpha_n)
                .map(|j| g_hi * 4.0 * eta.powi(j as i32) * diameter)
                .sum()
        }
        None => f64::INFINITY,
    };
    Ok(ShortReturnReport {
        alpha_n,
        p_hat,
        se: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        bound,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{rat, CircleSet, Rat};
    use crate::maps::{doubling, NoiseModel};
    use crate::stochastic::ThresholdSchedule;
    use approx::assert_abs_diff_eq;
    use num_traits::Zero;

    #[test]
    fn hitting_counts_from_step_one() {
        let map = doubling();
        // 1/3 -> 2/3 -> 1/3: the orbit re-enters B_0.1(1/3) at step 2, and
        // starting inside the ball does not count as a hit at step 0.
        let s = hitting_time(&map, None, 1.0 / 3.0, 0, &rat(1, 3), 0.1, 100).unwrap();
        assert_eq!(s.r, Some(2));
        // A ball covering the whole circle is hit immediately.
        let s = hitting_time(&map, None, 0.77, 0, &rat(1, 3), 0.6, 10).unwrap();
        assert_eq!(s.r, Some(1));
        // Censoring: tiny ball, tiny horizon.
        let s = hitting_time(&map, None, 0.77, 0, &rat(1, 3), 1e-9, 3).unwrap();
        assert_eq!(s.r, None);
    }

    #[test]
    fn default_horizon_is_fifty_kac_times() {
        assert_eq!(default_horizon(0.01), 5000);
    }

    #[test]
    fn kac_lemma_holds_for_conditioned_starts() {
        let map = doubling();
        let center = rat(1, 10);
        let radius = 0.01;
        let mu = 2.0 * radius;
        let trials = 4000;
        let rs = hitting_trials(
            &map,
            None,
            &center,
            radius,
            trials,
            default_horizon(mu),
            31,
            StartMode::ConditionedOnTarget,
        )
        .unwrap();
        let scaled: Vec<f64> = rs.iter().flatten().map(|&r| r as f64 * mu).collect();
        assert!(scaled.len() >= trials - trials / 100);
        let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
        let var = scaled.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
            / scaled.len() as f64;
        let se = (var / scaled.len() as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se + 0.01, "mean {mean}, se {se}");
    }

    #[test]
    fn hitting_cdf_tracks_the_exponential_law() {
        let map = doubling();
        let center = rat(1, 10);
        let radius = 0.005;
        let mu = 2.0 * radius;
        let rs = hitting_trials(
            &map,
            None,
            &center,
            radius,
            4000,
            default_horizon(mu),
            17,
            StartMode::Ambient,
        )
        .unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 4.0).collect();
        let cdf = hts_cdf(&rs, mu, &grid).unwrap();
        assert_eq!(cdf.g[0], 0.0);
        for (&t, &g) in cdf.t.iter().zip(&cdf.g) {
            assert!((g - (1.0 - (-t).exp())).abs() < 0.03, "t {t}: {g}");
        }
    }

    #[test]
    fn censoring_above_one_percent_is_rejected() {
        let rs: Vec<Option<u32>> = (0..100)
            .map(|i| if i < 90 { Some(i + 1) } else { None })
            .collect();
        assert!(hts_cdf(&rs, 0.01, &[0.5, 1.0]).is_err());
    }

    #[test]
    fn rts_integration_recovers_hts() {
        // The exponential law is the fixed point of the integral relation.
        let grid: Vec<f64> = (0..400).map(|i| i as f64 / 40.0).collect();
        let g: Vec<f64> = grid.iter().map(|&t| 1.0 - (-t).exp()).collect();
        let rts = EmpiricalCdf {
            t: grid.clone(),
            g,
            censored_mass: 0.0,
        };
        let hts = hts_from_rts(&rts).unwrap();
        for (&t, &v) in hts.t.iter().zip(&hts.g) {
            assert!((v - (1.0 - (-t).exp())).abs() < 1e-3, "t {t}: {v}");
            assert!(v <= t + 1e-12);
        }
        // G~ == 1 integrates to zero.
        let flat = EmpiricalCdf {
            t: grid.clone(),
            g: vec![1.0; grid.len()],
            censored_mass: 0.0,
        };
        assert!(hts_from_rts(&flat).unwrap().g.iter().all(|&v| v == 0.0));
        // Non-monotone input is rejected.
        let bad = EmpiricalCdf {
            t: vec![0.0, 1.0, 2.0],
            g: vec![0.0, 0.5, 0.4],
            censored_mass: 0.0,
        };
        assert!(hts_from_rts(&bad).is_err());
    }

    #[test]
    fn duality_cases() {
        use crate::stochastic::Exceedances;
        let clean = duality_check(&Exceedances { n: 10, times: vec![] });
        assert_eq!(clean.agrees, Some(true));
        let mid = duality_check(&Exceedances { n: 10, times: vec![3] });
        assert_eq!(mid.agrees, Some(true));
        // An exceedance only at j = 0: excluded from the conditioned check
        // and exactly the case where the unconditioned reading disagrees.
        let zero_only = duality_check(&Exceedances { n: 10, times: vec![0] });
        assert_eq!(zero_only.agrees, None);
        assert!(zero_only.unconditioned_mismatch);
        let zero_and = duality_check(&Exceedances { n: 10, times: vec![0, 4] });
        assert_eq!(zero_and.agrees, None);
        assert!(!zero_and.unconditioned_mismatch);
    }

    #[test]
    fn exact_first_return_times() {
        let map = doubling();
        let v0 = CircleSet::ball(&Rat::zero(), &rat(1, 100));
        assert_eq!(first_return_min(&map, &v0, 10).unwrap(), ReturnBound::Exact(1));
        let v3 = CircleSet::ball(&rat(1, 3), &rat(1, 100));
        assert_eq!(first_return_min(&map, &v3, 10).unwrap(), ReturnBound::Exact(2));
    }

    #[test]
    fn return_time_grows_as_the_ball_shrinks() {
        let map = doubling();
        // A point with a long transient before anything resembling a return.
        let center = rat(1, 10);
        let mut last = 0usize;
        for denom in [10i64, 1000, 100_000] {
            let v = CircleSet::ball(&center, &rat(1, denom));
            match first_return_min(&map, &v, 40).unwrap() {
                ReturnBound::Exact(j) => {
                    assert!(j >= last, "smaller ball returned sooner");
                    last = j;
                }
                ReturnBound::GreaterThan(h) => {
                    assert!(h >= last);
                    last = h;
                }
            }
        }
        assert!(last > 1);
    }

    #[test]
    fn short_returns_certain_at_a_deterministic_fixed_point() {
        let map = doubling();
        let sched = ThresholdSchedule {
            tau: 1.0,
            n: 10_000,
            u_n: -5e-5,
            r_n: 5e-5,
        };
        let rep = short_return_prob(&map, None, &Rat::zero(), &sched, 3, 50, 3).unwrap();
        assert_eq!(rep.p_hat, 1.0);
        assert!(rep.bound.is_infinite());
    }

    #[test]
    fn noisy_short_returns_respect_the_union_bound() {
        let map = doubling();
        let noise = NoiseModel::uniform(0.05);
        let sched = ThresholdSchedule {
            tau: 1.0,
            n: 10_000,
            u_n: -5e-5,
            r_n: 5e-5,
        };
        let alpha = default_alpha_n(sched.n);
        let rep =
            short_return_prob(&map, Some(&noise), &Rat::zero(), &sched, alpha, 20_000, 9).unwrap();
        assert!(rep.p_hat <= rep.bound + 3.0 * rep.se, "{rep:?}");
        // The bound is linear in the ball size.
        let sched2 = ThresholdSchedule {
            tau: 1.0,
            n: 10_000,
            u_n: -5e-6,
            r_n: 5e-6,
        };
        let rep2 =
            short_return_prob(&map, Some(&noise), &Rat::zero(), &sched2, alpha, 2000, 9).unwrap();
        assert_abs_diff_eq!(rep2.bound, rep.bound / 10.0, epsilon = 1e-12);
        assert!(rep2.p_hat <= rep.p_hat + 3.0 * (rep.se + rep2.se));
    }
}
