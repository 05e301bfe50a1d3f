//! The acceptance gate: ten numbered cross-checks that pit Monte Carlo
//! estimates, spectral values, and closed-form predictions against each other
//! at declared tolerances. Each check reports one pass/fail line plus the
//! numbers behind it; the CLI `verify` subcommand and the acceptance
//! integration test both run these.

use crate::exact::{rat, rat_to_f64, Rat};
use crate::extremes::{
    cluster_histogram, compound_poisson_pmf, default_k_n, dispersion_index, dprime_stat,
    ei_estimate, ks_exp1, polya_aeppli_pmf, repp, total_variation,
};
use crate::hitting::{
    default_alpha_n, default_horizon, duality_check, hitting_trials, hts_cdf, hts_from_rts,
    rts_cdf, short_return_prob, StartMode,
};
use crate::maps::{boundary_return_map, doubling, NoiseModel, PiecewiseMap, PointKind, Side};
use crate::spectral::{
    delta, leading_eigen, open_operator, spectral_report, survival, ulam_build, HoleSpec,
};
use crate::stochastic::{
    run_trials, threshold_for, MeasureModel, Observable, OrbitSampler, ThresholdSchedule,
};
use crate::theory::{
    annulus_family, ei_from_annulus, ei_nonsimple, geometric_multiplicity,
    multiplicity_from_annuli, multiplicity_nonsimple, multiplicity_tail, NonSimpleData,
};
use num_traits::{One, Zero};

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub pass: bool,
    pub details: Vec<String>,
}

impl CriterionResult {
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {}",
            self.id,
            if self.pass { "PASS" } else { "FAIL" },
            self.name
        )
    }
}

struct Check {
    pass: bool,
    details: Vec<String>,
}

impl Check {
    fn new() -> Check {
        Check {
            pass: true,
            details: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, msg: String) {
        self.details
            .push(format!("{} {msg}", if ok { "ok  " } else { "FAIL" }));
        self.pass &= ok;
    }

    fn note(&mut self, msg: String) {
        self.details.push(format!("     {msg}"));
    }

    fn done(self, id: usize, name: &'static str) -> CriterionResult {
        CriterionResult {
            id,
            name: name.into(),
            pass: self.pass,
            details: self.details,
        }
    }
}

/// A target whose extremal behavior is indistinguishable from an aperiodic
/// point at any feasible sample size: its doubling orbit has period 31 (the
/// multiplicative order of 2 mod 2^31 - 1), the exact returns are contracted
/// by 2^-31, and at every other lag below 61 the orbit stays more than 0.005
/// away from the point, far outside all the balls the experiments use. The
/// numerator keeps the point > 0.11 from every fixed or period-2 point.
pub fn effectively_aperiodic_zeta() -> Rat {
    rat(964_379_555, 2_147_483_647)
}

fn lebesgue_schedule(center: &Rat, tau: f64, n: usize) -> ThresholdSchedule {
    threshold_for(
        &MeasureModel::LebesgueExact { dim: 1 },
        &Observable::neg_dist(center.clone()),
        tau,
        n,
    )
    .expect("schedule")
}

fn fmt3(x: f64) -> String {
    format!("{x:.4}")
}

// --- 1 ----------------------------------------------------------------

/// Extremal-index dichotomy on the doubling map at a fixed point, a period-2
/// point, and an effectively aperiodic point.
pub fn criterion1(seed: u64) -> CriterionResult {
    let mut c = Check::new();
    let map = doubling();
    let n = 10_000;
    let trials = 10_000;
    let cases: [(&str, Rat, Option<usize>, f64, bool); 3] = [
        ("zeta=0", Rat::zero(), Some(1), 0.5, false),
        ("zeta=1/3", rat(1, 3), Some(2), 0.75, false),
        ("zeta aperiodic", effectively_aperiodic_zeta(), None, 0.95, true),
    ];
    for (i, (label, zeta, period, target, lower_bound_only)) in cases.into_iter().enumerate() {
        let sched = lebesgue_schedule(&zeta, 1.0, n);
        let samples = run_trials(&map, None, &zeta, &sched, trials, seed + i as u64);
        let est = ei_estimate(&samples, &sched, period).expect("estimate");
        for (which, e) in [
            ("logratio", est.theta_logratio),
            ("annulus", est.theta_annulus),
            ("cluster", est.theta_cluster),
        ] {
            let ok = if lower_bound_only {
                e.value >= target
            } else {
                (e.value - target).abs() <= 0.05
            };
            c.require(
                ok,
                format!(
                    "{label} theta_{which} = {} (target {}{target}, se {})",
                    fmt3(e.value),
                    if lower_bound_only { ">= " } else { "" },
                    fmt3(e.se)
                ),
            );
        }
    }
    c.done(1, "extremal-index dichotomy (deterministic doubling)")
}

// --- 2 ----------------------------------------------------------------

/// Additive noise restores EI = 1 at the fixed point.
pub fn criterion2(seed: u64) -> CriterionResult {
    let mut c = Check::new();
    let map = doubling();
    let noise = NoiseModel::uniform(0.05);
    let zeta = Rat::zero();
    let sched = lebesgue_schedule(&zeta, 1.0, 10_000);
    let samples = run_trials(&map, Some(&noise), &zeta, &sched, 10_000, seed);
    let est = ei_estimate(&samples, &sched, Some(1)).expect("estimate");
    for (which, e) in [
        ("logratio", est.theta_logratio),
        ("annulus", est.theta_annulus),
        ("cluster", est.theta_cluster),
    ] {
        c.require(
            e.value >= 0.95,
            format!("noisy theta_{which} = {} (target >= 0.95)", fmt3(e.value)),
        );
    }
    c.note("deterministic counterpart at the same point: theta = 0.5 (criterion 1)".into());
    c.done(2, "noise kills clustering at the fixed point")
}

// --- 3 ----------------------------------------------------------------

/// Rare-event point process at a periodic point: geometric cluster sizes and
/// Polya-Aeppli window counts.
pub fn criterion3(seed: u64) -> CriterionResult {
    let mut c = Check::new();
    let map = doubling();
    let zeta = Rat::zero();
    let theta: f64 = 0.5;
    let tau = 10.0;
    let n = 10_000;
    let trials = 25_000;
    let sched = lebesgue_schedule(&zeta, tau, n);
    let samples = run_trials(&map, None, &zeta, &sched, trials, seed);

    let hist = cluster_histogram(&samples, 1);
    c.require(
        hist.cluster_count >= 100_000,
        format!("cluster count = {} (need >= 100000)", hist.cluster_count),
    );
    let kmax = hist.pi_hat.len().max(20);
    let geo: Vec<f64> = (1..=kmax)
        .map(|k| theta * (1.0 - theta).powi(k as i32 - 1))
        .collect();
    let tv_geo = total_variation(&hist.pi_hat, &geo);
    c.require(
        tv_geo < 0.03,
        format!("TV(cluster sizes, geometric({theta})) = {}", fmt3(tv_geo)),
    );

    // Counts in unit windows of rescaled time, pooled over trials.
    let windows: Vec<(f64, f64)> = (0..tau as usize).map(|i| (i as f64, i as f64 + 1.0)).collect();
    let mut counts: Vec<u64> = Vec::with_capacity(trials * windows.len());
    for s in &samples {
        counts.extend(repp(s, &sched, &windows).expect("repp").counts);
    }
    let max_count = counts.iter().copied().max().unwrap_or(0) as usize;
    let mut pmf_emp = vec![0.0; max_count + 1];
    for &k in &counts {
        pmf_emp[k as usize] += 1.0 / counts.len() as f64;
    }
    let pmf_pa: Vec<f64> = (0..=max_count.max(20))
        .map(|k| polya_aeppli_pmf(theta, 1.0, k).expect("pmf"))
        .collect();
    let tv_pa = total_variation(&pmf_emp, &pmf_pa);
    c.require(
        tv_pa < 0.03,
        format!("TV(N[0,1] counts, Polya-Aeppli({theta}, 1)) = {}", fmt3(tv_pa)),
    );
    c.done(3, "clustered point process at a periodic point")
}

// --- 4 ----------------------------------------------------------------

/// Rare-event point process without clustering: exponential gaps and unit
/// dispersion, both for an aperiodic target and for a noisy periodic one.
pub fn criterion4(seed: u64) -> CriterionResult {
    let mut c = Check::new();
    let map = doubling();
    // Long windows per trial: gaps collected inside a window of length tau
    // are length-biased against values comparable to tau, an O(1/tau) edge
    // effect that must sit well below the KS tolerance.
    let tau = 100.0;
    let n = 100_000;
    let trials = 1200;
    let noise = NoiseModel::uniform(0.05);
    let cases: [(&str, Rat, Option<&NoiseModel>); 2] = [
        ("aperiodic", effectively_aperiodic_zeta(), None),
        ("noisy zeta=0", Rat::zero(), Some(&noise)),
    ];
    for (i, (label, zeta, nm)) in cases.into_iter().enumerate() {
        let sched = lebesgue_schedule(&zeta, tau, n);
        let samples = run_trials(&map, nm, &zeta, &sched, trials, seed + 100 * i as u64);
        let windows: Vec<(f64, f64)> =
            (0..tau as usize).map(|j| (j as f64, j as f64 + 1.0)).collect();
        let mut gaps: Vec<f64> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        let mut events = 0usize;
        for s in &samples {
            let r = repp(s, &sched, &windows).expect("repp");
            events += r.rescaled_times.len();
            gaps.extend(r.rescaled_times.windows(2).map(|w| w[1] - w[0]));
            counts.extend(r.counts);
        }
        c.note(format!("{label}: {events} events, {} gaps", gaps.len()));
        c.require(events >= 100_000, format!("{label}: >= 100000 events"));
        let ks = ks_exp1(&mut gaps);
        c.require(ks < 0.02, format!("{label}: KS(gaps, Exp(1)) = {}", fmt3(ks)));
        let disp = dispersion_index(&counts);
        c.require(
            (0.95..=1.05).contains(&disp),
            format!("{label}: dispersion index = {}", fmt3(disp)),
        );
    }
    c.done(4, "Poissonian point process without clustering")
}

// --- 5 ----------------------------------------------------------------

/// Discontinuity-point laws on the boundary-return map: the target 0 is
/// eventually aperiodic with a+ = 1/2, alpha- = 1/2, so theta = 3/4 and the
/// cluster-size law is (2/3, 1/3, 0, ...). The exact parameters are certified
/// by classification and by the annulus decomposition before the Monte Carlo
/// comparison.
pub fn criterion5(seed: u64) -> CriterionResult {
    let mut c = Check::new();
    let map = boundary_return_map();
    let zeta = Rat::zero();

    // certification, route 1: exact orbit classification
    let pc = map.classify(&zeta, 64).expect("classify");
    let certified_kind = matches!(
        &pc.kind,
        PointKind::SinglyReturning { side: Side::Plus, period: 1, landing: Side::Minus, contraction }
            if *contraction == rat(1, 2)
    );
    c.require(
        certified_kind && pc.kind.eventually_aperiodic(),
        format!("classification: {:?} (eventually aperiodic, a+ = 1/2)", pc.kind),
    );
    let data = NonSimpleData::from_classification(&pc, rat(1, 2)).expect("data");
    let theta_exact = ei_nonsimple(&data);
    let pi_exact = multiplicity_nonsimple(&data, 6).expect("pi");
    c.require(
        theta_exact == rat(3, 4) && pi_exact[0] == rat(2, 3) && pi_exact[1] == rat(1, 3),
        "closed form: theta = 3/4, pi = (2/3, 1/3, 0, ...)".into(),
    );

    // certification, route 2: exact annulus masses of an actual neighborhood
    let fam = annulus_family(&map, &zeta, 1, &rat(1, 64), 4).expect("annuli");
    let theta_ann = ei_from_annulus(&fam.q_measures[0], &fam.mu_u).expect("ei");
    let pi_ann = multiplicity_from_annuli(&fam.q_measures).expect("pi");
    c.require(
        theta_ann == rat(3, 4) && pi_ann[0] == rat(2, 3) && pi_ann[1] == rat(1, 3),
        "annulus decomposition at r = 1/64 reproduces theta and pi exactly".into(),
    );

    // Monte Carlo comparison
    let sched = lebesgue_schedule(&zeta, 5.0, 10_000);
    let samples = run_trials(&map, None, &zeta, &sched, 10_000, seed);
    let est = ei_estimate(&samples, &sched, Some(1)).expect("estimate");
    c.require(
        (est.theta_annulus.value - 0.75).abs() <= 0.05,
        format!("theta_hat = {} (target 0.75)", fmt3(est.theta_annulus.value)),
    );
    let hist = cluster_histogram(&samples, 1);
    let p1 = hist.pi_hat.first().copied().unwrap_or(0.0);
    let p2 = hist.pi_hat.get(1).copied().unwrap_or(0.0);
    let p_tail: f64 = hist.pi_hat.iter().skip(2).sum();
    c.require(
        (p1 - 2.0 / 3.0).abs() <= 0.05,
        format!("pi_hat(1) = {} (target 2/3)", fmt3(p1)),
    );
    c.require(
        (p2 - 1.0 / 3.0).abs() <= 0.05,
        format!("pi_hat(2) = {} (target 1/3)", fmt3(p2)),
    );
    c.require(p_tail < 0.02, format!("pi_hat(>=3) = {}", fmt3(p_tail)));
    c.done(5, "discontinuity-point laws (eventually aperiodic target)")
}

// --- 6 ----------------------------------------------------------------

/// Hitting/return-time statistics: path-wise duality, the integral relation
/// between the two laws, and Kac's normalization of the mean return time.
pub fn criterion6(seed: u64) -> CriterionResult {
    let mut c = Check::new();
    let map = doubling();
    let zeta = rat(1, 3);

    // duality on every trial
    let sched = lebesgue_schedule(&zeta, 5.0, 1000);
    let samples = run_trials(&map, None, &zeta, &sched, 100_000, seed);
    let mut checked = 0usize;
    let mut disagreements = 0usize;
    for s in &samples {
        let out = duality_check(s);
        if let Some(agrees) = out.agrees {
            checked += 1;
            if !agrees {
                disagreements += 1;
            }
        }
    }
    c.require(
        disagreements == 0 && checked > 0,
        format!("duality holds on {checked}/{checked} conditioned trials (of {})", samples.len()),
    );

    // Kac's lemma for conditioned starts
    let radius = 5e-4;
    let mu = 2.0 * radius;
    let horizon = default_horizon(mu);
    let rts = hitting_trials(
        &map,
        None,
        &zeta,
        radius,
        20_000,
        horizon,
        seed + 1,
        StartMode::ConditionedOnTarget,
    )
    .expect("returns");
    let scaled: Vec<f64> = rts.iter().flatten().map(|&r| r as f64 * mu).collect();
    let kac = scaled.iter().sum::<f64>() / scaled.len() as f64;
    c.require(
        (0.97..=1.03).contains(&kac),
        format!("Kac mean normalized return = {}", fmt3(kac)),
    );

    // hitting law reconstructed from the return law
    let hts = hitting_trials(
        &map,
        None,
        &zeta,
        radius,
        20_000,
        horizon,
        seed + 2,
        StartMode::Ambient,
    )
    .expect("hits");
    // dense grid: the return law at a periodic point jumps by 1 - theta
    // essentially at t = 0, and the trapezoid reconstruction needs steps
    // small enough to not smear that jump across the first cell
    let grid: Vec<f64> = (1..=250).map(|i| i as f64 / 50.0).collect();
    let g_hit = hts_cdf(&hts, mu, &grid).expect("hts cdf");
    let g_ret = rts_cdf(&rts, mu, &grid).expect("rts cdf");
    let g_rec = hts_from_rts(&g_ret).expect("integral relation");
    let trials = 20_000f64;
    let mut worst: f64 = 0.0;
    let mut all_in_band = true;
    for i in 0..grid.len() {
        let se = |g: f64| (g * (1.0 - g) / trials).sqrt();
        let band = 3.0 * (se(g_hit.g[i]) + se(g_ret.g[i])) + 0.015;
        let gap = (g_hit.g[i] - g_rec.g[i]).abs();
        worst = worst.max(gap - band);
        all_in_band &= gap <= band;
    }
    c.require(
        all_in_band,
        format!("reconstructed hitting law inside bands (worst excess {})", fmt3(worst)),
    );
    c.done(6, "hitting/return duality, integral relation, Kac")
}

// --- 7 ----------------------------------------------------------------

/// Spectral refinement ladder: two-cell holes at the fixed point and the
/// period-2 point, deterministic and noisy.
pub fn criterion7() -> CriterionResult {
    let mut c = Check::new();
    let map = doubling();
    let ladder = [1 << 10, 1 << 12, 1 << 14];

    let hole_at = |k: usize, zeta: &Rat| -> HoleSpec {
        if zeta.is_zero() {
            HoleSpec::from_ball(k, zeta, &rat(1, k as i64)).expect("hole")
        } else {
            // two cells nearest to zeta, which sits in a cell interior
            let cell = (rat_to_f64(zeta) * k as f64).floor() as usize;
            HoleSpec::new(k, vec![cell, (cell + 1) % k]).expect("hole")
        }
    };

    for (zeta, target) in [(Rat::zero(), 0.5), (rat(1, 3), 0.75)] {
        let mut last = None;
        for &k in &ladder {
            let hole = hole_at(k, &zeta);
            assert_eq!(hole.cells.len(), 2);
            let rep = spectral_report(&map, None, k, &hole, 12, 1e-12).expect("report");
            c.note(format!(
                "det zeta={zeta} k={k}: theta_ratio={} theta_series={}",
                fmt3(rep.theta_ratio),
                fmt3(rep.theta_series)
            ));
            last = Some(rep);
        }
        let rep = last.unwrap();
        c.require(
            (rep.theta_ratio - target).abs() <= 0.02,
            format!("det zeta={zeta} finest theta_ratio = {} (target {target})", fmt3(rep.theta_ratio)),
        );
        c.require(
            (rep.theta_ratio - rep.theta_series).abs() <= 0.01,
            format!("det zeta={zeta} |theta_ratio - theta_series| = {}", fmt3((rep.theta_ratio - rep.theta_series).abs())),
        );
    }

    let noise = NoiseModel::uniform(0.05);
    let mut last = None;
    for &k in &ladder {
        let hole = hole_at(k, &Rat::zero());
        let rep = spectral_report(&map, Some(&noise), k, &hole, 12, 1e-12).expect("report");
        c.note(format!(
            "noisy k={k}: theta_ratio={} max q_k={}",
            fmt3(rep.theta_ratio),
            fmt3(rep.q.iter().cloned().fold(0.0, f64::max))
        ));
        last = Some(rep);
    }
    let rep = last.unwrap();
    c.require(
        rep.theta_ratio >= 0.97,
        format!("noisy finest theta_ratio = {}", fmt3(rep.theta_ratio)),
    );
    let qmax = rep.q.iter().cloned().fold(0.0, f64::max);
    c.require(qmax <= 0.02, format!("noisy max q_k = {}", fmt3(qmax)));
    c.require(
        (rep.theta_ratio - rep.theta_series).abs() <= 0.01,
        format!("noisy |theta_ratio - theta_series| = {}", fmt3((rep.theta_ratio - rep.theta_series).abs())),
    );
    c.done(7, "spectral refinement ladder")
}

// --- 8 ----------------------------------------------------------------

/// Oracle equivalence: open-system survival from the discretized operator vs
/// Monte Carlo avoidance probability of the identical snapped hole.
pub fn criterion8(seed: u64) -> CriterionResult {
    let mut c = Check::new();
    let k = 4096usize;
    let trials = 40_000usize;
    let points: [(&str, PiecewiseMap, Rat); 4] = [
        ("doubling zeta=0", doubling(), Rat::zero()),
        ("doubling zeta=1/3", doubling(), rat(1, 3)),
        ("doubling aperiodic", doubling(), effectively_aperiodic_zeta()),
        ("boundary zeta=0", boundary_return_map(), Rat::zero()),
    ];
    for (i, (label, map, zeta)) in points.into_iter().enumerate() {
        let hole = HoleSpec::from_ball(k, &zeta, &rat(1, k as i64)).expect("hole");
        let op = ulam_build(&map, k).expect("ulam");
        let open = open_operator(&op, &hole).expect("open");
        let h = leading_eigen(&op, 1e-12).expect("eigen").phi;
        let d = delta(&open, &h).expect("delta");
        let m = (0.5 / d).ceil() as usize;
        let s_spec = survival(&open, &h, m);

        // identical event, sampled: the hole cells as exact lattice ranges
        let ranges: Vec<(i128, i128)> = merge_cells(&hole.cells);
        let sampler = OrbitSampler::for_cells(&map, None, k, ranges).expect("sampler");
        let mut no_hit = 0usize;
        for t in 0..trials {
            let mut rng = crate::stochastic::trial_rng(seed + i as u64, t as u64);
            let x0 = sampler.uniform_start(&mut rng);
            if sampler.hit_times(x0, m, &mut rng).is_empty() {
                no_hit += 1;
            }
        }
        let p_mc = no_hit as f64 / trials as f64;
        let se = (p_mc * (1.0 - p_mc) / trials as f64).sqrt();
        let tol = 3.0 * se + 2.0 / k as f64;
        c.require(
            (s_spec - p_mc).abs() <= tol,
            format!(
                "{label}: survival({m}) spectral {} vs MC {} (tol {})",
                fmt3(s_spec),
                fmt3(p_mc),
                fmt3(tol)
            ),
        );
    }
    c.done(8, "spectral vs Monte Carlo survival oracle")
}

fn merge_cells(cells: &[usize]) -> Vec<(i128, i128)> {
    let mut sorted: Vec<i128> = cells.iter().map(|&c| c as i128).collect();
    sorted.sort_unstable();
    let mut out: Vec<(i128, i128)> = Vec::new();
    for c in sorted {
        match out.last_mut() {
            Some(r) if r.1 == c => r.1 = c + 1,
            _ => out.push((c, c + 1)),
        }
    }
    out
}

// --- 9 ----------------------------------------------------------------

/// Exact property suites: pmf normalization across the parameter grid, the
/// mean-cluster-size identity, annulus telescoping, stochastic Ulam rows, the
/// compound-Poisson/Polya-Aeppli identity, and the short-return bound.
pub fn criterion9(seed: u64) -> CriterionResult {
    let mut c = Check::new();

    // pmf normalization over the closed-form family (exact telescoping)
    let mut grid_ok = true;
    let mut cases = 0usize;
    for num in [1i64, 3, 5, 7, 9] {
        let a = rat(num, 10);
        for anum in [1i64, 5, 9] {
            let alpha = rat(anum, 10);
            for data in nonsimple_grid(&a, &alpha) {
                let kmax = 40;
                let pi = match multiplicity_nonsimple(&data, kmax) {
                    Ok(pi) => pi,
                    Err(_) => {
                        grid_ok = false;
                        continue;
                    }
                };
                let total: Rat = pi.iter().fold(Rat::zero(), |s, p| s + p);
                let with_tail = &total + &multiplicity_tail(&data, kmax);
                grid_ok &= with_tail == Rat::one();
                cases += 1;
            }
        }
    }
    c.require(grid_ok && cases > 50, format!("pmf + tail = 1 exactly on {cases} grid cases"));

    // EI = 1 / mean cluster size for the geometric law
    let mut mean_ok = true;
    for t in [1i64, 2, 3] {
        let theta = rat(t, 4);
        let pi = geometric_multiplicity(&theta, 4000);
        let mean: f64 = pi
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * rat_to_f64(p))
            .sum();
        mean_ok &= (mean - 1.0 / rat_to_f64(&theta)).abs() < 1e-10;
    }
    c.require(mean_ok, "mean cluster size = 1/theta within 1e-10".into());

    // annulus decomposition telescopes exactly
    let mut ann_ok = true;
    for (map, zeta, p) in [
        (doubling(), Rat::zero(), 1usize),
        (doubling(), rat(1, 3), 2),
        (boundary_return_map(), Rat::zero(), 1),
    ] {
        let fam = annulus_family(&map, &zeta, p, &rat(1, 64), 5).expect("annuli");
        let sum = fam.q_measures.iter().fold(Rat::zero(), |s, q| s + q);
        let tail = fam.u_sets.last().unwrap().measure();
        ann_ok &= &sum + &tail == fam.mu_u;
    }
    c.require(ann_ok, "sum of annulus masses + tail = mu(U) exactly".into());

    // stochasticity of the discretized operator, exact after residual absorption
    let op = ulam_build(&boundary_return_map(), 128).expect("ulam");
    let rows_ok = (0..128).all(|i| op.row(i).iter().map(|&(_, w)| w).sum::<f64>() == 1.0);
    c.require(rows_ok, "all Ulam rows sum to exactly 1.0".into());

    // compound Poisson with geometric multiplicities = Polya-Aeppli
    let mut cp_ok = true;
    for theta in [0.3f64, 0.5, 0.8] {
        let pi: Vec<f64> = (1..=200).map(|k| theta * (1.0 - theta).powi(k as i32 - 1)).collect();
        for t in [0.5, 1.0, 2.0] {
            for k in 0..30 {
                let a = compound_poisson_pmf(theta, &pi, t, k).expect("cp");
                let b = polya_aeppli_pmf(theta, t, k).expect("pa");
                cp_ok &= (a - b).abs() < 1e-10;
            }
        }
    }
    c.require(cp_ok, "compound-Poisson/Polya-Aeppli identity within 1e-10".into());

    // short returns of the noisy target respect the analytic union bound
    let sched = lebesgue_schedule(&Rat::zero(), 1.0, 10_000);
    let noise = NoiseModel::uniform(0.05);
    let rep = short_return_prob(
        &doubling(),
        Some(&noise),
        &Rat::zero(),
        &sched,
        default_alpha_n(10_000),
        20_000,
        seed,
    )
    .expect("short returns");
    c.require(
        rep.p_hat <= rep.bound + 3.0 * rep.se,
        format!("short-return p_hat = {} <= bound {} + 3se", fmt3(rep.p_hat), fmt3(rep.bound)),
    );
    c.done(9, "exact property suites")
}

fn nonsimple_grid(a: &Rat, alpha: &Rat) -> Vec<NonSimpleData> {
    use crate::theory::NonSimpleCase;
    let mut out = Vec::new();
    let sides = [Side::Plus, Side::Minus];
    for side in sides {
        for landing in sides {
            if let Ok(d) = NonSimpleData::new(
                NonSimpleCase::SinglyReturning {
                    side,
                    landing,
                    a: a.clone(),
                },
                alpha.clone(),
            ) {
                out.push(d);
            }
        }
    }
    for lp in sides {
        for lm in sides {
            if let Ok(d) = NonSimpleData::new(
                NonSimpleCase::DoublyReturning {
                    a_plus: a.clone(),
                    landing_plus: lp,
                    a_minus: a.clone(),
                    landing_minus: lm,
                },
                alpha.clone(),
            ) {
                out.push(d);
            }
        }
    }
    out
}

// --- 10 ---------------------------------------------------------------

/// Dependence diagnostics: the pair-count statistic vanishes with n where the
/// mixing condition should hold and stays bounded below at the clustering
/// fixed point.
pub fn criterion10(seed: u64) -> CriterionResult {
    let mut c = Check::new();
    let map = doubling();
    let tau = 1.0;
    let ladder: [(usize, usize); 3] = [(1000, 20_000), (10_000, 2000), (100_000, 200)];
    let noise = NoiseModel::uniform(0.05);
    let cases: [(&str, Rat, Option<&NoiseModel>); 2] = [
        ("aperiodic", effectively_aperiodic_zeta(), None),
        ("noisy zeta=0", Rat::zero(), Some(&noise)),
    ];
    for (i, (label, zeta, nm)) in cases.into_iter().enumerate() {
        let mut prev: Option<crate::extremes::Estimate> = None;
        let mut decreasing = true;
        let mut values = Vec::new();
        for (j, &(n, trials)) in ladder.iter().enumerate() {
            let sched = lebesgue_schedule(&zeta, tau, n);
            let samples =
                run_trials(&map, nm, &zeta, &sched, trials, seed + (10 * i + j) as u64);
            let est = dprime_stat(&samples, &sched, default_k_n(n));
            values.push(format!("n={n}: {}+-{}", fmt3(est.value), fmt3(est.se)));
            if let Some(p) = prev {
                decreasing &= est.value <= p.value + 2.0 * (p.se + est.se);
            }
            prev = Some(est);
        }
        c.note(format!("{label}: {}", values.join("; ")));
        c.require(decreasing, format!("{label}: pair counts decrease along n"));
    }

    let zeta = Rat::zero();
    let sched = lebesgue_schedule(&zeta, tau, 10_000);
    let samples = run_trials(&map, None, &zeta, &sched, 2000, seed + 99);
    let est = dprime_stat(&samples, &sched, default_k_n(10_000));
    c.require(
        est.value >= 0.4 * tau,
        format!("deterministic zeta=0: pair count = {} (target >= {})", fmt3(est.value), 0.4 * tau),
    );
    c.done(10, "pair-count dependence diagnostics")
}

/// Run every criterion with seeds derived from one master seed.
pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    vec![
        criterion1(seed),
        criterion2(seed.wrapping_add(1 << 32)),
        criterion3(seed.wrapping_add(2 << 32)),
        criterion4(seed.wrapping_add(3 << 32)),
        criterion5(seed.wrapping_add(4 << 32)),
        criterion6(seed.wrapping_add(5 << 32)),
        criterion7(),
        criterion8(seed.wrapping_add(7 << 32)),
        criterion9(seed.wrapping_add(8 << 32)),
        criterion10(seed.wrapping_add(9 << 32)),
    ]
}
