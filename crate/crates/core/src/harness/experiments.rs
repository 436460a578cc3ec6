use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::table::{ResultRow, ResultTable};
use crate::ghost::phase_indices;
use crate::models::{
    alternative_sigma_diag, sample_block_dataset, sample_sphere_rows, sample_spike_dataset, BlockModelConfig,
    BlockSpec, Direction, SeedSpec,
};
use crate::spectral::{column_energies, covariance_stats};
use crate::sphericity::{calibrate_all, two_sided_critical_value};
use crate::{Error, Result};

/// Test methods in table order.
pub const METHODS: [&str; 3] = ["gaussian", "wy", "corrected"];

/// Number of replicates with `--full`.
pub const FULL_REPS: usize = 10_000;

/// Run `reps` replicates in parallel, returned in replicate order.
pub fn run_replicates<T, F>(reps: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..reps as u64).into_par_iter().map(f).collect()
}

/// Per-replicate outcome of John's test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JohnDraw {
    /// z-scores in [`METHODS`] order.
    pub z: [f64; 3],
    pub n_u: f64,
    pub gamma_hat: f64,
}

/// John's test on one draw of `cfg`.
pub fn john_draw(cfg: &BlockModelConfig, seed: &SeedSpec) -> Result<JohnDraw> {
    let x = sample_block_dataset(cfg, seed)?;
    let s = covariance_stats(x.as_ref(), false)?;
    let r = calibrate_all(&s, Some(x.as_ref()))?;
    Ok(JohnDraw {
        z: [r.z_gaussian, r.z_wy.expect("data supplied"), r.z_corrected],
        n_u: cfg.n as f64 * r.u,
        gamma_hat: r.gamma_hat,
    })
}

fn mean_var(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    let v = xs.map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

struct RowSink<'a> {
    table: &'a mut ResultTable,
    id: String,
    model: String,
    p: usize,
    n: usize,
    reps: usize,
    seed: u64,
}

impl RowSink<'_> {
    fn put(&mut self, method: &str, metric: &str, value: f64) {
        self.table.push(ResultRow {
            experiment_id: self.id.clone(),
            model: self.model.clone(),
            p: self.p,
            n: self.n,
            method: method.into(),
            metric: metric.into(),
            value,
            reps: self.reps,
            seed: self.seed,
        });
    }
}

/// Empirical size of the three two-sided calibrated tests for every model
/// and `p`.
///
/// Metrics: `rejection_rate` per method, plus `mean_nu`, `var_nu` and
/// `mean_gamma_hat` under method `john`.
pub fn run_size(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate_for(ExperimentKind::Size)?;
    let crit = two_sided_critical_value(cfg.level)?;
    let mut table = ResultTable::default();
    for m in &cfg.models {
        for &p in &cfg.p_grid {
            let n = cfg.n_rule.n_for(p);
            let model = m.build(p, n)?;
            let id = format!("size:{}:{p}", m.name);
            let spec = SeedSpec::new(cfg.seed, id.clone(), 0);
            let draws = run_replicates(cfg.reps, |r| john_draw(&model, &spec.with_replicate(r)))?;
            let mut sink = RowSink {
                table: &mut table,
                id,
                model: m.name.clone(),
                p,
                n,
                reps: cfg.reps,
                seed: cfg.seed,
            };
            for (k, method) in METHODS.iter().enumerate() {
                let rejections = draws.iter().filter(|d| d.z[k].abs() > crit).count();
                sink.put(method, "rejection_rate", rejections as f64 / cfg.reps as f64);
            }
            let (mean, var) = mean_var(draws.iter().map(|d| d.n_u));
            sink.put("john", "mean_nu", mean);
            sink.put("john", "var_nu", var);
            let (g, _) = mean_var(draws.iter().map(|d| d.gamma_hat));
            sink.put("john", "mean_gamma_hat", g);
        }
    }
    table.sort();
    Ok(table)
}

/// Upper `(1 - level)` empirical quantile: the `ceil((1 - level) R)`-th
/// order statistic.
pub fn empirical_critical_value(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() || !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(
            "empirical quantile needs data and a level in (0,1)".into(),
        ));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((1.0 - level) * v.len() as f64).ceil() as usize;
    Ok(v[k.clamp(1, v.len()) - 1])
}

/// Size-adjusted power under `Sigma = diag(a, .., a, 1, .., 1)`.
///
/// Critical values come from a null run with experiment id suffix `:null`.
/// All alternatives share the seeds of the `:alt` stream, so the curves in
/// `a` are driven by common random numbers. The value of `a` is part of the
/// row's experiment id.
pub fn run_power(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate_for(ExperimentKind::Power)?;
    let alt = cfg.alternative.as_ref().expect("validated");
    let mut table = ResultTable::default();
    for m in &cfg.models {
        for &p in &cfg.p_grid {
            let n = cfg.n_rule.n_for(p);
            let null_model = m.build(p, n)?;
            let base = format!("power:{}:{p}", m.name);
            let null_spec = SeedSpec::new(cfg.seed, format!("{base}:null"), 0);
            let null = run_replicates(cfg.reps, |r| john_draw(&null_model, &null_spec.with_replicate(r)))?;
            let mut crit = [0.0; 3];
            for (k, c) in crit.iter_mut().enumerate() {
                let zs: Vec<f64> = null.iter().map(|d| d.z[k]).collect();
                *c = empirical_critical_value(&zs, cfg.level)?;
            }
            let alt_spec = SeedSpec::new(cfg.seed, format!("{base}:alt"), 0);
            for &a in &alt.a_grid {
                let mut model = null_model.clone();
                model.sigma_diag = Some(alternative_sigma_diag(p, alt.fraction, a));
                let draws = run_replicates(cfg.reps, |r| john_draw(&model, &alt_spec.with_replicate(r)))?;
                let mut sink = RowSink {
                    table: &mut table,
                    id: format!("{base}:a={a}"),
                    model: m.name.clone(),
                    p,
                    n,
                    reps: cfg.reps,
                    seed: cfg.seed,
                };
                for (k, method) in METHODS.iter().enumerate() {
                    let hits = draws.iter().filter(|d| d.z[k] > crit[k]).count();
                    sink.put(method, "power", hits as f64 / cfg.reps as f64);
                    sink.put(method, "null_critical_value", crit[k]);
                }
                sink.put("alternative", "a", a);
            }
        }
    }
    table.sort();
    Ok(table)
}

/// Single Gaussian block with the given radial parameters.
pub fn phase_model(p: usize, n: usize, alpha: f64, tau: f64, delta: f64) -> BlockModelConfig {
    let mut block = BlockSpec::new(1.0, Direction::Gaussian, tau, delta);
    block.alpha = alpha;
    BlockModelConfig::new(p, n, vec![block])
}

/// Variance of `L(x^2) = tr S^2 - p(1 + c_n)` across the phase grid, raw
/// and rescaled by `r_p(kappa)^2`.
pub fn run_phase(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate_for(ExperimentKind::Phase)?;
    let ph = cfg.phase.as_ref().expect("validated");
    let mut table = ResultTable::default();
    for &delta in &ph.delta_grid {
        for &p in &cfg.p_grid {
            let n = cfg.n_rule.n_for(p);
            let model = phase_model(p, n, ph.alpha, ph.tau, delta);
            model.validate()?;
            let idx = phase_indices(&[(ph.alpha, delta)], p)?;
            let id = format!("phase:delta={delta}:{p}");
            let spec = SeedSpec::new(cfg.seed, id.clone(), 0);
            let c_n = model.c_n();
            let stats = run_replicates(cfg.reps, |r| {
                let x = sample_block_dataset(&model, &spec.with_replicate(r))?;
                let s = covariance_stats(x.as_ref(), false)?;
                Ok(s.l2 - p as f64 * (1.0 + c_n))
            })?;
            let (mean, var) = mean_var(stats.iter().copied());
            let mut sink = RowSink {
                table: &mut table,
                id,
                model: format!("gaussian:alpha={}:tau={}:delta={delta}", ph.alpha, ph.tau),
                p,
                n,
                reps: cfg.reps,
                seed: cfg.seed,
            };
            sink.put("f2", "mean_raw", mean);
            sink.put("f2", "var_raw", var);
            sink.put("f2", "var_rescaled", idx.r_p * idx.r_p * var);
            sink.put("f2", "r_p", idx.r_p);
            sink.put("f2", "phi", idx.phi[0]);
        }
    }
    table.sort();
    Ok(table)
}

/// Least-squares slope of `log y` on `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::InvalidArgument("slope needs two or more positive points".into()));
    }
    let k = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Summary of one phase setting across `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSummary {
    pub phi: f64,
    pub slope_raw: f64,
    pub ratio_raw: f64,
    pub ratio_rescaled: f64,
}

fn max_over_min(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

/// Collapse a phase table into one summary per distinct model.
pub fn summarize_phase(table: &ResultTable) -> Result<Vec<(String, PhaseSummary)>> {
    let mut models: Vec<String> = table.rows.iter().map(|r| r.model.clone()).collect();
    models.dedup();
    models
        .into_iter()
        .map(|model| {
            let pick = |metric: &str| -> Vec<(f64, f64)> {
                table
                    .rows
                    .iter()
                    .filter(|r| r.model == model && r.metric == metric)
                    .map(|r| (r.p as f64, r.value))
                    .collect()
            };
            let raw = pick("var_raw");
            let rescaled: Vec<f64> = pick("var_rescaled").into_iter().map(|v| v.1).collect();
            let phi = pick("phi").first().map(|v| v.1).unwrap_or(f64::NAN);
            let raw_values: Vec<f64> = raw.iter().map(|v| v.1).collect();
            Ok((
                model,
                PhaseSummary {
                    phi,
                    slope_raw: loglog_slope(&raw)?,
                    ratio_raw: max_over_min(&raw_values),
                    ratio_rescaled: max_over_min(&rescaled),
                },
            ))
        })
        .collect()
}

/// Empirical law of `tr S - p + lambda` in the sparse-spike model.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonCheck {
    /// `P(round(L + lambda) = k)` for `k = 0..pmf.len()`.
    pub pmf: Vec<f64>,
    /// `e^{-lambda} lambda^k / k!`.
    pub target: Vec<f64>,
    pub mean: f64,
}

impl PoissonCheck {
    pub fn max_pmf_error(&self) -> f64 {
        self.pmf
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn poisson_spike_check(lambda: f64, p: usize, n: usize, reps: usize, seed: u64) -> Result<PoissonCheck> {
    let spec = SeedSpec::new(seed, format!("poisson:{lambda}:{p}:{n}"), 0);
    let values = run_replicates(reps, |r| {
        let d = sample_spike_dataset(p, n, lambda, &spec.with_replicate(r))?;
        let l1 = column_energies(d.x.as_ref()).iter().sum::<f64>() / n as f64;
        Ok(l1 - p as f64 + lambda)
    })?;
    let kmax = 4;
    let mut pmf = vec![0.0; kmax];
    for v in &values {
        let k = v.round();
        if k >= 0.0 && (k as usize) < kmax {
            pmf[k as usize] += 1.0 / reps as f64;
        }
    }
    let mut target = Vec::with_capacity(kmax);
    let mut term = (-lambda).exp();
    for k in 0..kmax {
        if k > 0 {
            term *= lambda / k as f64;
        }
        target.push(term);
    }
    Ok(PoissonCheck {
        pmf,
        target,
        mean: values.iter().sum::<f64>() / reps as f64,
    })
}

/// Monte Carlo estimate of `E Y_1^4` for uniform unit vectors in `R^n`,
/// with its standard error. Each row contributes the average of its `n`
/// fourth powers.
pub fn sphere_fourth_moment(n: usize, rows: usize, seed: u64) -> Result<(f64, f64)> {
    const CHUNK: usize = 10_000;
    let chunks = rows.div_ceil(CHUNK);
    let spec = SeedSpec::new(seed, format!("sphere:{n}"), 0);
    let parts = run_replicates(chunks, |c| {
        let count = CHUNK.min(rows - c as usize * CHUNK);
        let y = sample_sphere_rows(n, count, &spec.with_replicate(c))?;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for j in 0..count {
            let b: f64 = y.col(j).iter().map(|v| v.powi(4)).sum::<f64>() / n as f64;
            s += b;
            s2 += b * b;
        }
        Ok((s, s2))
    })?;
    let (s, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let k = rows as f64;
    let mean = s / k;
    let var = (s2 - k * mean * mean) / (k - 1.0);
    Ok((mean, (var / k).sqrt()))
}
