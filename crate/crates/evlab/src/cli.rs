//! Experiment runner: a single JSON config selects the experiment, the map,
//! the target, and the estimator options; every run writes a `report.json`
//! (with a canonical config hash) plus tidy CSV series into the output
//! directory. (config, seed) fully determines every numeric output.

use crate::exact::{format_rat, parse_rat, rat, rat_to_f64, Rat};
use crate::extremes::{
    cluster_histogram, dispersion_index, ei_estimate, ks_exp1, repp, total_variation,
};
use crate::hitting::{
    default_alpha_n, default_horizon, duality_check, hitting_trials, hts_cdf, hts_from_rts,
    rts_cdf, short_return_prob, StartMode,
};
use crate::maps::{Dynamics, MapSpec, NoiseModel, PiecewiseMap, PointKind};
use crate::report::{config_hash, fmt_f64, write_csv, write_json};
use crate::spectral::{spectral_report, HoleSpec, SpectralReport};
use crate::stochastic::{
    run_trials, sample_deterministic, sample_random, stationary_start, threshold_for,
    MeasureModel, Observable, ThresholdSchedule,
};
use crate::theory::{ei_nonsimple, geometric_multiplicity, multiplicity_nonsimple, NonSimpleData};
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config.{0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Run(String),
}

fn bad(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    Ei,
    Repp,
    Hts,
    Spectral,
    Dichotomy,
    ShortReturn,
    Classify,
    Verify,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorOptions {
    /// Declustering/annulus period; defaults to the classified period or
    /// ceil(ln n).
    #[serde(default)]
    pub period: Option<usize>,
    #[serde(default)]
    pub k_n: Option<usize>,
    #[serde(default)]
    pub alpha_n: Option<usize>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default = "d_kmax")]
    pub kmax: usize,
    #[serde(default = "d_ladder")]
    pub ulam_k: Vec<usize>,
    #[serde(default = "d_classify_horizon")]
    pub classify_horizon: usize,
    #[serde(default = "d_ei_tol")]
    pub ei_tol: f64,
    #[serde(default = "d_grid_max")]
    pub grid_max: f64,
}

fn d_kmax() -> usize {
    12
}
fn d_ladder() -> Vec<usize> {
    vec![1 << 10, 1 << 12, 1 << 14]
}
fn d_classify_horizon() -> usize {
    64
}
fn d_ei_tol() -> f64 {
    0.05
}
fn d_grid_max() -> f64 {
    5.0
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            period: None,
            k_n: None,
            alpha_n: None,
            horizon: None,
            kmax: d_kmax(),
            ulam_k: d_ladder(),
            classify_horizon: d_classify_horizon(),
            ei_tol: d_ei_tol(),
            grid_max: d_grid_max(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub map: MapSpec,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    /// Target point as a rational string "p/q".
    #[serde(default)]
    pub zeta: Option<String>,
    /// Target list for the dichotomy table.
    #[serde(default)]
    pub zetas: Option<Vec<String>>,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_n")]
    pub n: usize,
    #[serde(default = "d_trials")]
    pub trials: usize,
    /// Master seed; required so reruns are reproducible by construction.
    pub seed: u64,
    #[serde(default)]
    pub options: EstimatorOptions,
}

fn d_tau() -> f64 {
    1.0
}
fn d_n() -> usize {
    10_000
}
fn d_trials() -> usize {
    1000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| bad("<root>", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.map.build().map_err(|e| bad("map", e))?;
        if let Some(z) = &self.zeta {
            parse_rat(z).map_err(|e| bad("zeta", e))?;
        }
        for (i, z) in self.zetas.iter().flatten().enumerate() {
            parse_rat(z).map_err(|e| bad(&format!("zetas[{i}]"), e))?;
        }
        if !(self.tau > 0.0) {
            return Err(bad("tau", "must be > 0"));
        }
        if self.n == 0 {
            return Err(bad("n", "must be >= 1"));
        }
        if self.trials == 0 {
            return Err(bad("trials", "must be >= 1"));
        }
        if let Some(nm) = &self.noise {
            if !(nm.epsilon > 0.0 && nm.epsilon <= 0.5) {
                return Err(bad("noise.epsilon", "must be in (0, 0.5]"));
            }
        }
        if self.options.ulam_k.iter().any(|&k| k < 2) {
            return Err(bad("options.ulam_k", "grid sizes must be >= 2"));
        }
        if !(self.options.ei_tol > 0.0) {
            return Err(bad("options.ei_tol", "must be > 0"));
        }
        Ok(())
    }

    fn piecewise(&self) -> Result<PiecewiseMap, CliError> {
        match self.map.build().map_err(|e| bad("map", e))? {
            Dynamics::Piecewise(m) => Ok(m),
            Dynamics::Torus(_) => Err(bad("map", "this experiment needs a circle map")),
        }
    }

    fn zeta_rat(&self) -> Result<Rat, CliError> {
        let z = self.zeta.as_deref().ok_or_else(|| bad("zeta", "required"))?;
        parse_rat(z).map_err(|e| bad("zeta", e))
    }

    fn schedule(&self, zeta: &Rat) -> Result<ThresholdSchedule, CliError> {
        threshold_for(
            &MeasureModel::LebesgueExact { dim: 1 },
            &Observable::neg_dist(zeta.clone()),
            self.tau,
            self.n,
        )
        .map_err(|e| CliError::Run(e.to_string()))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub target: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub results: serde_json::Value,
    /// Closed-form values for the same (map, zeta, noise) triple, when the
    /// classification admits them; exact rationals rendered as strings.
    pub predictions: serde_json::Value,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
    pub wall_ms: u128,
}

/// Dispatch one experiment; writes report.json and CSV series under `out`.
pub fn run(config: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    config.validate()?;
    let started = std::time::Instant::now();
    let hash = config_hash(&serde_json::to_value(config)?);
    let (results, predictions, verdicts) = match config.kind {
        ExperimentKind::Simulate => simulate(config, out)?,
        ExperimentKind::Ei => ei_experiment(config, out)?,
        ExperimentKind::Repp => repp_experiment(config, out)?,
        ExperimentKind::Hts => hts_experiment(config, out)?,
        ExperimentKind::Spectral => spectral_experiment(config, out)?,
        ExperimentKind::Dichotomy => dichotomy(config, out)?,
        ExperimentKind::ShortReturn => short_return(config)?,
        ExperimentKind::Classify => classify_cmd_inner(config)?,
        ExperimentKind::Verify => verify_inner(config)?,
    };
    let all_pass = verdicts.iter().all(|v| v.pass);
    let report = RunReport {
        kind: config.kind,
        config_hash: hash,
        results,
        predictions,
        verdicts,
        all_pass,
        wall_ms: started.elapsed().as_millis(),
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

type Parts = (serde_json::Value, serde_json::Value, Vec<Verdict>);

/// theta and the cluster-size law predicted from the exact classification of
/// (map, zeta); None when the orbit defeats the closed forms (e.g. horizon
/// exhausted). A two-sided ball puts half its mass on each side, so
/// alpha+ = 1/2 for discontinuity targets.
fn predicted_law(map: &PiecewiseMap, zeta: &Rat, horizon: usize) -> Option<(Rat, Vec<Rat>)> {
    let pc = map.classify(zeta, horizon).ok()?;
    match &pc.kind {
        PointKind::SimpleAperiodic | PointKind::NonsimpleAperiodic => {
            Some((Rat::one(), vec![Rat::one()]))
        }
        PointKind::SimplePeriodic { contraction, .. } => {
            let theta = Rat::one() - contraction;
            let pi = geometric_multiplicity(&theta, 8);
            Some((theta, pi))
        }
        _ => {
            let data = NonSimpleData::from_classification(&pc, rat(1, 2)).ok()?;
            let theta = ei_nonsimple(&data);
            let pi = multiplicity_nonsimple(&data, 8).ok()?;
            Some((theta, pi))
        }
    }
}

fn prediction_json(pred: &Option<(Rat, Vec<Rat>)>) -> serde_json::Value {
    match pred {
        None => serde_json::Value::Null,
        Some((theta, pi)) => json!({
            "theta": { "exact": format_rat(theta), "decimal": rat_to_f64(theta) },
            "pi": pi.iter().map(|p| json!({
                "exact": format_rat(p), "decimal": rat_to_f64(p)
            })).collect::<Vec<_>>(),
        }),
    }
}

fn classified_period(map: &PiecewiseMap, zeta: &Rat, horizon: usize) -> Option<usize> {
    match map.classify(zeta, horizon).ok()?.kind {
        PointKind::SimplePeriodic { period, .. } => Some(period),
        PointKind::SinglyReturning { period, .. } => Some(period),
        PointKind::DoublyReturning {
            period_plus,
            period_minus,
            ..
        } => Some(period_plus.min(period_minus)),
        _ => None,
    }
}

fn simulate(config: &ExperimentConfig, out: &Path) -> Result<Parts, CliError> {
    let map = config.piecewise()?;
    let zeta = config.zeta_rat()?;
    let sched = config.schedule(&zeta)?;
    let obs = Observable::neg_dist(zeta.clone());
    let sample = match &config.noise {
        Some(nm) => sample_random(&map, nm, &obs, config.seed, &sched),
        None => {
            let x0 = stationary_start(&map, None, 1000, config.seed)
                .map_err(|e| CliError::Run(e.to_string()))?;
            sample_deterministic(&map, &obs, x0, &sched)
        }
    }
    .map_err(|e| CliError::Run(e.to_string()))?;
    let rows: Vec<Vec<String>> = sample
        .values
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            vec![
                j.to_string(),
                fmt_f64(v),
                u8::from(v > sample.u_n).to_string(),
            ]
        })
        .collect();
    write_csv(&out.join("orbit.csv"), &["j", "value", "exceeds"], &rows)?;
    let results = json!({
        "n": sched.n, "tau": sched.tau, "u_n": sched.u_n, "r_n": sched.r_n,
        "exceedances": sample.exceedances.times.len(),
        "max": sample.m_n,
        "provenance": sample.provenance,
    });
    Ok((results, serde_json::Value::Null, vec![]))
}

fn ei_experiment(config: &ExperimentConfig, out: &Path) -> Result<Parts, CliError> {
    let map = config.piecewise()?;
    let zeta = config.zeta_rat()?;
    let sched = config.schedule(&zeta)?;
    let period = config
        .options
        .period
        .or_else(|| classified_period(&map, &zeta, config.options.classify_horizon));
    let samples = run_trials(&map, config.noise.as_ref(), &zeta, &sched, config.trials, config.seed);
    let est = ei_estimate(&samples, &sched, period).map_err(|e| CliError::Run(e.to_string()))?;
    let pred = match &config.noise {
        Some(_) => Some((Rat::one(), vec![Rat::one()])),
        None => predicted_law(&map, &zeta, config.options.classify_horizon),
    };
    let mut verdicts = Vec::new();
    if let Some((theta, _)) = &pred {
        let t = rat_to_f64(theta);
        for (name, e) in [
            ("theta_logratio", est.theta_logratio),
            ("theta_annulus", est.theta_annulus),
            ("theta_cluster", est.theta_cluster),
        ] {
            verdicts.push(Verdict {
                name: name.into(),
                value: e.value,
                target: format!("{t} +- {}", config.options.ei_tol),
                pass: (e.value - t).abs() <= config.options.ei_tol,
            });
        }
    }
    write_csv(
        &out.join("estimates.csv"),
        &["estimator", "value", "se"],
        &[
            vec!["logratio".into(), fmt_f64(est.theta_logratio.value), fmt_f64(est.theta_logratio.se)],
            vec!["annulus".into(), fmt_f64(est.theta_annulus.value), fmt_f64(est.theta_annulus.se)],
            vec!["cluster".into(), fmt_f64(est.theta_cluster.value), fmt_f64(est.theta_cluster.se)],
        ],
    )?;
    let results = json!({
        "schedule": { "n": sched.n, "tau": sched.tau, "u_n": sched.u_n, "r_n": sched.r_n },
        "period": period,
        "estimate": est,
    });
    Ok((results, prediction_json(&pred), verdicts))
}

fn repp_experiment(config: &ExperimentConfig, out: &Path) -> Result<Parts, CliError> {
    let map = config.piecewise()?;
    let zeta = config.zeta_rat()?;
    let sched = config.schedule(&zeta)?;
    let period = config
        .options
        .period
        .or_else(|| classified_period(&map, &zeta, config.options.classify_horizon));
    let gap = period.unwrap_or_else(|| (sched.n as f64).ln().ceil() as usize);
    let samples = run_trials(&map, config.noise.as_ref(), &zeta, &sched, config.trials, config.seed);

    let hist = cluster_histogram(&samples, gap);
    let windows: Vec<(f64, f64)> = (0..config.tau.floor().max(1.0) as usize)
        .map(|i| (i as f64, i as f64 + 1.0))
        .collect();
    let mut gaps = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for s in &samples {
        let r = repp(s, &sched, &windows).map_err(|e| CliError::Run(e.to_string()))?;
        gaps.extend(r.rescaled_times.windows(2).map(|w| w[1] - w[0]));
        counts.extend(r.counts);
    }
    let ks = ks_exp1(&mut gaps);
    let disp = dispersion_index(&counts);

    let hist_rows: Vec<Vec<String>> = hist
        .pi_hat
        .iter()
        .enumerate()
        .map(|(i, &p)| vec![(i + 1).to_string(), fmt_f64(p)])
        .collect();
    write_csv(&out.join("cluster_hist.csv"), &["kappa", "pi_hat"], &hist_rows)?;
    let count_rows: Vec<Vec<String>> = counts
        .iter()
        .fold(std::collections::BTreeMap::<u64, u64>::new(), |mut m, &k| {
            *m.entry(k).or_default() += 1;
            m
        })
        .into_iter()
        .map(|(k, c)| vec![k.to_string(), c.to_string()])
        .collect();
    write_csv(&out.join("window_counts.csv"), &["count", "windows"], &count_rows)?;

    let pred = match &config.noise {
        Some(_) => Some((Rat::one(), vec![Rat::one()])),
        None => predicted_law(&map, &zeta, config.options.classify_horizon),
    };
    let mut verdicts = Vec::new();
    if let Some((theta, _)) = &pred {
        let t = rat_to_f64(theta);
        if t < 1.0 {
            let geo: Vec<f64> = (1..=hist.pi_hat.len().max(20))
                .map(|k| t * (1.0 - t).powi(k as i32 - 1))
                .collect();
            let tv = total_variation(&hist.pi_hat, &geo);
            verdicts.push(Verdict {
                name: "tv_cluster_sizes_vs_geometric".into(),
                value: tv,
                target: "< 0.05".into(),
                pass: tv < 0.05,
            });
        } else {
            verdicts.push(Verdict {
                name: "ks_gaps_vs_exp1".into(),
                value: ks,
                target: "< 0.05".into(),
                pass: ks < 0.05,
            });
            verdicts.push(Verdict {
                name: "dispersion_index".into(),
                value: disp,
                target: "[0.9, 1.1]".into(),
                pass: (0.9..=1.1).contains(&disp),
            });
        }
    }
    let results = json!({
        "schedule": { "n": sched.n, "tau": sched.tau, "u_n": sched.u_n, "r_n": sched.r_n },
        "gap": gap,
        "clusters": hist.cluster_count,
        "pi_hat": hist.pi_hat,
        "ks_gaps": ks,
        "dispersion": disp,
        "windows": counts.len(),
    });
    Ok((results, prediction_json(&pred), verdicts))
}

fn hts_experiment(config: &ExperimentConfig, out: &Path) -> Result<Parts, CliError> {
    let map = config.piecewise()?;
    let zeta = config.zeta_rat()?;
    let sched = config.schedule(&zeta)?;
    let mu = 2.0 * sched.r_n;
    let horizon = config.options.horizon.unwrap_or_else(|| default_horizon(mu));
    let noise = config.noise.as_ref();
    let grid: Vec<f64> = (1..=(4.0 * config.options.grid_max) as usize)
        .map(|i| i as f64 / 4.0)
        .collect();

    let hits = hitting_trials(&map, noise, &zeta, sched.r_n, config.trials, horizon, config.seed, StartMode::Ambient)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let rets = hitting_trials(&map, noise, &zeta, sched.r_n, config.trials, horizon, config.seed + 1, StartMode::ConditionedOnTarget)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let g_hit = hts_cdf(&hits, mu, &grid).map_err(|e| CliError::Run(e.to_string()))?;
    let g_ret = rts_cdf(&rets, mu, &grid).map_err(|e| CliError::Run(e.to_string()))?;
    let g_rec = hts_from_rts(&g_ret).map_err(|e| CliError::Run(e.to_string()))?;

    for (name, cdf) in [("hts.csv", &g_hit), ("rts.csv", &g_ret), ("hts_from_rts.csv", &g_rec)] {
        let rows: Vec<Vec<String>> = cdf
            .t
            .iter()
            .zip(&cdf.g)
            .map(|(&t, &g)| vec![fmt_f64(t), fmt_f64(g)])
            .collect();
        write_csv(&out.join(name), &["t", "G"], &rows)?;
    }

    let scaled: Vec<f64> = rets.iter().flatten().map(|&r| r as f64 * mu).collect();
    let kac = scaled.iter().sum::<f64>() / scaled.len() as f64;

    let dual_samples = run_trials(&map, noise, &zeta, &sched, config.trials, config.seed + 2);
    let mut dual_checked = 0usize;
    let mut dual_bad = 0usize;
    for s in &dual_samples {
        if let Some(agrees) = duality_check(s).agrees {
            dual_checked += 1;
            dual_bad += usize::from(!agrees);
        }
    }

    let worst_gap = g_hit
        .g
        .iter()
        .zip(&g_rec.g)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let verdicts = vec![
        Verdict {
            name: "kac_mean_normalized_return".into(),
            value: kac,
            target: "[0.95, 1.05]".into(),
            pass: (0.95..=1.05).contains(&kac),
        },
        Verdict {
            name: "duality_disagreements".into(),
            value: dual_bad as f64,
            target: "= 0".into(),
            pass: dual_bad == 0,
        },
    ];
    let results = json!({
        "schedule": { "n": sched.n, "tau": sched.tau, "r_n": sched.r_n },
        "horizon": horizon,
        "censored_hts": g_hit.censored_mass,
        "censored_rts": g_ret.censored_mass,
        "kac": kac,
        "duality_checked": dual_checked,
        "worst_gap_hts_vs_reconstruction": worst_gap,
    });
    Ok((results, serde_json::Value::Null, verdicts))
}

/// The two grid cells tightest around zeta (wrapping at 0).
fn hole_two_cells(k: usize, zeta: &Rat) -> Result<HoleSpec, CliError> {
    if zeta.is_zero() {
        HoleSpec::from_ball(k, zeta, &rat(1, k as i64)).map_err(|e| CliError::Run(e.to_string()))
    } else {
        let cell = (rat_to_f64(zeta) * k as f64).floor() as usize % k;
        HoleSpec::new(k, vec![cell, (cell + 1) % k]).map_err(|e| CliError::Run(e.to_string()))
    }
}

fn spectral_experiment(config: &ExperimentConfig, out: &Path) -> Result<Parts, CliError> {
    let map = config.piecewise()?;
    let zeta = config.zeta_rat()?;
    let mut table: Vec<SpectralReport> = Vec::new();
    for &k in &config.options.ulam_k {
        let hole = hole_two_cells(k, &zeta)?;
        let rep = spectral_report(&map, config.noise.as_ref(), k, &hole, config.options.kmax, 1e-12)
            .map_err(|e| CliError::Run(e.to_string()))?;
        table.push(rep);
    }
    let mut rows = Vec::new();
    for rep in &table {
        for (kappa, &q) in rep.q.iter().enumerate() {
            rows.push(vec![rep.k.to_string(), kappa.to_string(), fmt_f64(q)]);
        }
    }
    write_csv(&out.join("qk.csv"), &["k", "kappa", "q"], &rows)?;

    let pred = match &config.noise {
        Some(_) => Some((Rat::one(), vec![Rat::one()])),
        None => predicted_law(&map, &zeta, config.options.classify_horizon),
    };
    let finest = table.last().expect("nonempty ladder");
    let mut verdicts = vec![Verdict {
        name: "theta_ratio_vs_theta_series".into(),
        value: (finest.theta_ratio - finest.theta_series).abs(),
        target: "<= 0.01".into(),
        pass: (finest.theta_ratio - finest.theta_series).abs() <= 0.01,
    }];
    if let Some((theta, _)) = &pred {
        let t = rat_to_f64(theta);
        verdicts.push(Verdict {
            name: "theta_ratio_vs_prediction".into(),
            value: finest.theta_ratio,
            target: format!("{t} +- {}", config.options.ei_tol),
            pass: (finest.theta_ratio - t).abs() <= config.options.ei_tol,
        });
    }
    let results = json!({ "ladder": table });
    Ok((results, prediction_json(&pred), verdicts))
}

fn dichotomy(config: &ExperimentConfig, out: &Path) -> Result<Parts, CliError> {
    let map = config.piecewise()?;
    let zetas: Vec<Rat> = match &config.zetas {
        Some(zs) => zs
            .iter()
            .map(|z| parse_rat(z).map_err(|e| bad("zetas", e)))
            .collect::<Result<_, _>>()?,
        None => vec![
            Rat::zero(),
            rat(1, 3),
            crate::verify::effectively_aperiodic_zeta(),
        ],
    };
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let mut verdicts = Vec::new();
    for (i, zeta) in zetas.iter().enumerate() {
        let sched = config.schedule(zeta)?;
        let period = classified_period(&map, zeta, config.options.classify_horizon);
        let samples =
            run_trials(&map, config.noise.as_ref(), zeta, &sched, config.trials, config.seed + i as u64);
        let est = ei_estimate(&samples, &sched, period).map_err(|e| CliError::Run(e.to_string()))?;
        let pred = match &config.noise {
            Some(_) => Some((Rat::one(), vec![Rat::one()])),
            None => predicted_law(&map, zeta, config.options.classify_horizon),
        };
        let theory = pred.as_ref().map(|(t, _)| rat_to_f64(t));
        rows.push(vec![
            format_rat(zeta),
            fmt_f64(est.theta_logratio.value),
            fmt_f64(est.theta_annulus.value),
            fmt_f64(est.theta_cluster.value),
            theory.map(fmt_f64).unwrap_or_else(|| "".into()),
        ]);
        if let Some(t) = theory {
            verdicts.push(Verdict {
                name: format!("theta_annulus at {}", format_rat(zeta)),
                value: est.theta_annulus.value,
                target: format!("{t} +- {}", config.options.ei_tol),
                pass: (est.theta_annulus.value - t).abs() <= config.options.ei_tol,
            });
        }
        table.push(json!({
            "zeta": format_rat(zeta),
            "estimate": est,
            "theory": theory,
        }));
    }
    write_csv(
        &out.join("dichotomy.csv"),
        &["zeta", "theta_logratio", "theta_annulus", "theta_cluster", "theory"],
        &rows,
    )?;
    Ok((json!({ "rows": table }), serde_json::Value::Null, verdicts))
}

fn short_return(config: &ExperimentConfig) -> Result<Parts, CliError> {
    let map = config.piecewise()?;
    let zeta = config.zeta_rat()?;
    let sched = config.schedule(&zeta)?;
    let alpha_n = config.options.alpha_n.unwrap_or_else(|| default_alpha_n(config.n));
    let rep = short_return_prob(
        &map,
        config.noise.as_ref(),
        &zeta,
        &sched,
        alpha_n,
        config.trials,
        config.seed,
    )
    .map_err(|e| CliError::Run(e.to_string()))?;
    let mut verdicts = Vec::new();
    if rep.bound.is_finite() {
        verdicts.push(Verdict {
            name: "short_return_prob_vs_union_bound".into(),
            value: rep.p_hat,
            target: format!("<= {} + 3se", rep.bound),
            pass: rep.p_hat <= rep.bound + 3.0 * rep.se,
        });
    }
    Ok((serde_json::to_value(&rep)?, serde_json::Value::Null, verdicts))
}

fn classify_cmd_inner(config: &ExperimentConfig) -> Result<Parts, CliError> {
    let map = config.piecewise()?;
    let zeta = config.zeta_rat()?;
    let pc = map
        .classify(&zeta, config.options.classify_horizon)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let pred = predicted_law(&map, &zeta, config.options.classify_horizon);
    let results = json!({
        "kind": format!("{:?}", pc.kind),
        "ell": pc.ell,
        "return_lower_bound": pc.return_lower_bound,
        "extra_discontinuity_hits": pc.extra_discontinuity_hits,
        "eventually_aperiodic": pc.kind.eventually_aperiodic(),
    });
    Ok((results, prediction_json(&pred), vec![]))
}

/// Front end to the exact point classification; returns the printed lines.
pub fn classify_cmd(map: &PiecewiseMap, zeta: &Rat, horizon: usize) -> Result<Vec<String>, CliError> {
    let pc = map
        .classify(zeta, horizon)
        .map_err(|e| CliError::Run(e.to_string()))?;
    let mut lines = vec![
        format!("zeta = {}", format_rat(zeta)),
        format!("kind = {:?}", pc.kind),
    ];
    if let Some(ell) = pc.ell {
        lines.push(format!("first discontinuity hit at step {ell}"));
    }
    if let Some((theta, pi)) = predicted_law(map, zeta, horizon) {
        lines.push(format!("theta = {} = {}", format_rat(&theta), rat_to_f64(&theta)));
        let pi_str: Vec<String> = pi.iter().map(format_rat).collect();
        lines.push(format!("pi = ({})", pi_str.join(", ")));
    }
    Ok(lines)
}

fn verify_inner(config: &ExperimentConfig) -> Result<Parts, CliError> {
    let criteria = crate::verify::run_all(config.seed);
    let verdicts = criteria
        .iter()
        .map(|c| Verdict {
            name: c.name.clone(),
            value: f64::from(u8::from(c.pass)),
            target: "pass".into(),
            pass: c.pass,
        })
        .collect();
    Ok((serde_json::to_value(&criteria)?, serde_json::Value::Null, verdicts))
}

/// Thread-count resolution: flag, then EVLAB_THREADS, then library default.
pub fn resolve_threads(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| std::env::var("EVLAB_THREADS").ok()?.parse().ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doubling_config(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            map: MapSpec::of(&crate::maps::doubling()),
            noise: None,
            zeta: Some("1/3".into()),
            zetas: None,
            tau: 2.0,
            n: 2000,
            trials: 400,
            seed: 11,
            options: EstimatorOptions::default(),
        }
    }

    #[test]
    fn config_rejects_bad_fields_with_paths() {
        let mut cfg = doubling_config(ExperimentKind::Ei);
        cfg.zeta = Some("one third".into());
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.starts_with("config.zeta"), "{err}");
        let mut cfg = doubling_config(ExperimentKind::Ei);
        cfg.tau = 0.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("tau"));
        let mut cfg = doubling_config(ExperimentKind::Ei);
        cfg.noise = Some(NoiseModel::uniform(0.9));
        assert!(cfg.validate().unwrap_err().to_string().contains("noise.epsilon"));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let text = r#"{"kind":"ei","map":{"type":"piecewise_affine","branches":[],"topology":"circle"},"seed":1,"bogus":3}"#;
        assert!(ExperimentConfig::from_json(text).is_err());
    }

    #[test]
    fn ei_run_emits_report_and_estimates() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = doubling_config(ExperimentKind::Ei);
        let rep = run(&cfg, dir.path()).unwrap();
        assert_eq!(rep.verdicts.len(), 3);
        assert!(rep.all_pass, "{:?}", rep.verdicts);
        assert!(dir.path().join("report.json").exists());
        assert!(dir.path().join("estimates.csv").exists());
        // the prediction for the period-2 point is 3/4
        assert_eq!(rep.predictions["theta"]["exact"], "3/4");
    }

    #[test]
    fn identical_runs_are_byte_identical_up_to_wall_time() {
        let cfg = doubling_config(ExperimentKind::Ei);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run(&cfg, d1.path()).unwrap();
        run(&cfg, d2.path()).unwrap();
        let strip = |p: &Path| {
            std::fs::read_to_string(p.join("report.json"))
                .unwrap()
                .lines()
                .filter(|l| !l.contains("wall_ms"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(d1.path()), strip(d2.path()));
        assert_eq!(
            std::fs::read(d1.path().join("estimates.csv")).unwrap(),
            std::fs::read(d2.path().join("estimates.csv")).unwrap()
        );
    }

    #[test]
    fn classify_lines_include_the_exact_law() {
        let lines = classify_cmd(&crate::maps::boundary_return_map(), &Rat::zero(), 64).unwrap();
        let text = lines.join("\n");
        assert!(text.contains("theta = 3/4"), "{text}");
        assert!(text.contains("2/3"), "{text}");
    }

    #[test]
    fn threads_fall_back_to_the_environment() {
        // no flag, no env: None (library default)
        std::env::remove_var("EVLAB_THREADS");
        assert_eq!(resolve_threads(Some(3)), Some(3));
        assert_eq!(resolve_threads(None), None);
        std::env::set_var("EVLAB_THREADS", "2");
        assert_eq!(resolve_threads(None), Some(2));
        assert_eq!(resolve_threads(Some(5)), Some(5));
        std::env::remove_var("EVLAB_THREADS");
    }
}
