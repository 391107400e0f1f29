//! Single identification runs and Monte Carlo aggregation.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::oe::DmEstimator;
use crate::sim::config::{SimConfig, System};
use crate::sim::simulate::{OeSimulator, StaticSimulator};
use crate::variance::{cr_lower_bound, VarianceEstimator};
use crate::wls::WlsEstimator;

/// Environment variable capping Monte Carlo parallelism (0 = rayon default).
pub const THREADS_ENV: &str = "QIDENT_THREADS";

/// Geometric checkpoints from `start` with `per_decade` points per decade,
/// always ending at `steps`. Exact powers of ten on the way are hit exactly
/// when `start` is itself a power of ten.
pub fn checkpoint_grid(start: u64, per_decade: u32, steps: u64) -> Vec<u64> {
    let mut ks = BTreeSet::new();
    if start <= steps {
        let base = (start as f64).log10();
        for i in 0.. {
            let k = 10f64.powf(base + i as f64 / per_decade as f64).round() as u64;
            if k > steps {
                break;
            }
            ks.insert(k);
        }
    }
    ks.insert(steps);
    ks.into_iter().collect()
}

/// `sqrt(k / log log k) * err`, defined for `k >= 3` only.
pub fn lil_scaled(k: u64, err: f64) -> f64 {
    if k < 3 {
        f64::NAN
    } else {
        let kf = k as f64;
        (kf / kf.ln().ln()).sqrt() * err
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub k: u64,
    /// `||theta_hat - theta||` (or `theta*` for OE).
    pub err_theta: f64,
    /// `|delta_hat - delta|`.
    pub err_delta: f64,
    pub scaled_err: f64,
    pub theta_hat: Vec<f64>,
}

impl Checkpoint {
    pub fn new(k: u64, theta_hat: &DVector<f64>, theta: &DVector<f64>, err_delta: f64) -> Self {
        let err_theta = (theta_hat - theta).norm();
        Self {
            k,
            err_theta,
            err_delta,
            scaled_err: lil_scaled(k, err_theta),
            theta_hat: theta_hat.iter().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: u64,
    pub theta_dim: usize,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunRecord {
    pub fn empty(run_id: u64, theta_dim: usize) -> Self {
        Self {
            run_id,
            theta_dim,
            checkpoints: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    pub fn at(&self, k: u64) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.k == k)
    }

    /// Largest `sqrt(k / log log k) * ||theta_err||` over checkpoints in
    /// `[k_lo, k_hi]`.
    pub fn max_scaled_theta(&self, k_lo: u64, k_hi: u64) -> f64 {
        self.window(k_lo, k_hi)
            .map(|c| c.scaled_err)
            .fold(0.0, f64::max)
    }

    /// Same as [`Self::max_scaled_theta`] for the deviation error.
    pub fn max_scaled_delta(&self, k_lo: u64, k_hi: u64) -> f64 {
        self.window(k_lo, k_hi)
            .map(|c| lil_scaled(c.k, c.err_delta))
            .fold(0.0, f64::max)
    }

    fn window(&self, k_lo: u64, k_hi: u64) -> impl Iterator<Item = &Checkpoint> {
        self.checkpoints
            .iter()
            .filter(move |c| c.k >= k_lo && c.k <= k_hi)
    }
}

/// Runs the estimator pipeline matching `cfg.system` on the stream of
/// `seed`, recording at the checkpoint grid. Pure in `(cfg, seed)`.
pub fn run_identification(cfg: &SimConfig, seed: u64) -> Result<RunRecord> {
    let grid = checkpoint_grid(
        cfg.run.checkpoint_start,
        cfg.run.checkpoints_per_decade,
        cfg.run.steps,
    );
    let theta = cfg.true_parameter();
    let delta = cfg.true_output_std();
    let est = cfg.estimator;
    let mut record = RunRecord::empty(seed, theta.len());
    let mut next = grid.iter().copied().peekable();

    match &cfg.system {
        System::Static(system) => {
            let mut sim = StaticSimulator::new(system.clone(), cfg.quantizer.clone(), seed)?;
            let mut var = VarianceEstimator::new(cfg.quantizer.clone(), est.variance())?;
            let mut wls = WlsEstimator::with_scaled_identity(
                theta.len(),
                est.p0_scale,
                (est.beta, est.beta),
            )?;
            for k in 1..=cfg.run.steps {
                let obs = sim.step();
                var.ml_update(obs.s)?;
                wls.update(obs.phi, obs.s, est.beta)?;
                if next.peek() == Some(&k) {
                    next.next();
                    let theta_hat = wls.theta_hat(var.delta_hat(), &cfg.quantizer)?;
                    let err_delta = (var.delta_hat() - delta).abs();
                    record
                        .checkpoints
                        .push(Checkpoint::new(k, &theta_hat, &theta, err_delta));
                }
            }
        }
        System::Oe { system, kappa } => {
            let model = &system.model;
            let mut sim = OeSimulator::new(system.clone(), cfg.quantizer.clone(), seed)?;
            let mut dm = DmEstimator::new(
                cfg.quantizer.clone(),
                model.input_dim(),
                model.n_a(),
                model.n_b(),
                est.dm(*kappa),
            )?;
            for k in 1..=cfg.run.steps {
                let obs = sim.step();
                dm.dm_update(obs.phi, obs.s)?;
                if next.peek() == Some(&k) {
                    next.next();
                    if !k.is_multiple_of(est.recover_interval) {
                        dm.refresh()?;
                    }
                    let err_delta = (dm.delta_hat() - delta).abs();
                    record.checkpoints.push(Checkpoint::new(
                        k,
                        dm.theta_star_hat(),
                        &theta,
                        err_delta,
                    ));
                }
            }
        }
    }
    Ok(record)
}

/// Cross-replica statistics at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub k: u64,
    pub mean_err_theta: f64,
    pub median_err: f64,
    pub mean_err2_theta: f64,
    /// `k * mean ||theta_err||^2`.
    pub k_mse: f64,
    /// `mean ||theta_err||^p` for the configured moment order.
    pub moment_err_theta: f64,
    pub mean_err2_delta: f64,
    /// `mean delta_err^2 / sigma_CR(k)` at the true deviation.
    pub cr_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub replicas: usize,
    pub moment_order: u32,
    pub rows: Vec<SummaryRow>,
}

impl McSummary {
    pub fn at(&self, k: u64) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.k == k)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Aggregates replica records (in replica order) into per-checkpoint
/// statistics.
pub fn summarize(cfg: &SimConfig, records: &[RunRecord]) -> Result<McSummary> {
    let first = records
        .first()
        .ok_or_else(|| Error::Domain("no replica records to summarise".into()))?;
    let delta = cfg.true_output_std();
    let p = cfg.run.moment_order as i32;
    let m = records.len() as f64;
    let mut rows = Vec::with_capacity(first.checkpoints.len());
    for (idx, cp) in first.checkpoints.iter().enumerate() {
        let k = cp.k;
        let mut errs = Vec::with_capacity(records.len());
        let mut err_delta2 = 0.0;
        for r in records {
            let c = r
                .checkpoints
                .get(idx)
                .filter(|c| c.k == k)
                .ok_or_else(|| Error::Dimension("replica checkpoint grids differ".into()))?;
            errs.push(c.err_theta);
            err_delta2 += c.err_delta * c.err_delta;
        }
        let mean_err_theta = errs.iter().sum::<f64>() / m;
        let mean_err2_theta = errs.iter().map(|e| e * e).sum::<f64>() / m;
        let moment_err_theta = errs.iter().map(|e| e.powi(p)).sum::<f64>() / m;
        let mean_err2_delta = err_delta2 / m;
        let cr_ratio = cr_lower_bound(&cfg.quantizer, delta, k)
            .map(|cr| mean_err2_delta / cr)
            .unwrap_or(f64::NAN);
        rows.push(SummaryRow {
            k,
            mean_err_theta,
            median_err: median(&mut errs),
            mean_err2_theta,
            k_mse: k as f64 * mean_err2_theta,
            moment_err_theta,
            mean_err2_delta,
            cr_ratio,
        });
    }
    Ok(McSummary {
        replicas: records.len(),
        moment_order: cfg.run.moment_order,
        rows,
    })
}

/// Runs `cfg.run.replicas` replicas with seeds `seed, seed + 1, ...` in
/// parallel and aggregates them in replica order.
pub fn monte_carlo(cfg: &SimConfig) -> Result<McSummary> {
    let records = replica_records(cfg)?;
    summarize(cfg, &records)
}

/// Per-replica records of a Monte Carlo run, in replica order.
pub fn replica_records(cfg: &SimConfig) -> Result<Vec<RunRecord>> {
    if cfg.run.replicas < 2 {
        return Err(Error::Config(format!(
            "Monte Carlo needs at least 2 replicas, got {}",
            cfg.run.replicas
        )));
    }
    (0..cfg.run.replicas as u64)
        .into_par_iter()
        .map(|r| run_identification(cfg, cfg.run.seed.wrapping_add(r)))
        .collect()
}

/// Like [`monte_carlo`] on a dedicated pool of `threads` workers
/// (0 = rayon default).
pub fn monte_carlo_with_threads(cfg: &SimConfig, threads: usize) -> Result<McSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Domain(format!("cannot build thread pool: {e}")))?;
    pool.install(|| monte_carlo(cfg))
}

/// Thread cap from `QIDENT_THREADS`; unset or unparsable means 0 (auto).
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}
