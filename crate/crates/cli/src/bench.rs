//! Per-step adaptation latency.
//!
//! Each measured step moves the goal, so the boundary constraint is
//! replaced on every tick on top of the state constraint. Basis values are
//! computed ahead of time and only [`AdaptationState::step`] is timed.

use std::time::Instant;

use anyhow::{ensure, Result};
use dmpp_core::adaptation::{AdaptationConfig, AdaptationState, PhaseSample, StepInput};
use dmpp_core::model::{Demonstration, TrainingOptions};
use dmpp_core::{BasisValues, Direction, DmpModel, Gains, StateTriplet};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::generators::min_jerk;
use crate::metrics::LatencyStats;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub kernels: Vec<usize>,
    pub dofs: usize,
    pub steps: usize,
    /// Untimed steps run before measuring.
    pub warmup: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            kernels: vec![10, 20, 40, 80],
            dofs: 6,
            steps: 2000,
            warmup: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub kernels: usize,
    pub dofs: usize,
    pub steps: usize,
    #[serde(flatten)]
    pub latency: LatencyStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Slope of `log(mean latency)` against `log(K)`; needs two kernel counts.
    pub exponent: Option<f64>,
}

fn bench_model(kernels: usize, dofs: usize, rng: &mut ChaCha8Rng) -> Result<DmpModel> {
    let m = 400;
    let times: Vec<f64> = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
    let amp: Vec<f64> = (0..dofs).map(|_| rng.random_range(-1.0..1.0)).collect();
    let pos = DMatrix::from_fn(dofs, m, |r, j| amp[r] * min_jerk(times[j]));
    let demo = Demonstration::new(times, pos)?;
    let opts = TrainingOptions {
        kernels,
        ..TrainingOptions::default()
    };
    Ok(DmpModel::train(&demo, &opts, Gains::critically_damped(dofs, 300.0)?)?.0)
}

/// Latencies in seconds of `warmup + steps` adaptation steps; the warmup
/// part is dropped.
pub fn measure(kernels: usize, cfg: &BenchConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let n = cfg.dofs;
    let model = bench_model(kernels, n, rng)?;
    let total = cfg.steps + cfg.warmup;
    let dt = 2e-3;
    let sd = 1.0 / (total.max(1) as f64 * dt);
    let mut goal = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let mut state = AdaptationState::init(
        &model,
        None,
        &StateTriplet::zeros(n),
        &goal,
        &[],
        Direction::Forward,
        AdaptationConfig::default(),
    )?;
    let mut values = BasisValues::zeros(kernels);
    let mut out = Vec::with_capacity(cfg.steps);
    for i in 1..=total {
        let s = (i as f64 * dt * sd).min(1.0);
        model.basis().eval_into(s, &mut values);
        for g in goal.iter_mut() {
            *g += rng.random_range(-1e-3..1e-3);
        }
        let input = StepInput {
            phase: PhaseSample { s, sd, sdd: 0.0 },
            basis: &values,
            goal: &goal,
            add: &[],
            remove: &[],
            measured: None,
        };
        let t0 = Instant::now();
        state.step(&model, &input)?;
        let elapsed = t0.elapsed().as_secs_f64();
        if i > cfg.warmup {
            out.push(elapsed);
        }
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn run(cfg: &BenchConfig) -> Result<BenchReport> {
    ensure!(cfg.dofs > 0, "bench needs at least one degree of freedom");
    ensure!(
        cfg.kernels.iter().all(|&k| k >= 2),
        "bench needs at least 2 kernels"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    if cfg.steps > 0 {
        for &k in &cfg.kernels {
            let samples = measure(k, cfg, &mut rng)?;
            if let Some(latency) = LatencyStats::from_seconds(&samples) {
                rows.push(BenchRow {
                    kernels: k,
                    dofs: cfg.dofs,
                    steps: cfg.steps,
                    latency,
                });
            }
        }
    }
    let k: Vec<f64> = rows.iter().map(|r| r.kernels as f64).collect();
    let t: Vec<f64> = rows.iter().map(|r| r.latency.mean_us).collect();
    Ok(BenchReport {
        exponent: loglog_slope(&k, &t),
        rows,
    })
}

impl BenchReport {
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:>6} {:>5} {:>7} {:>10} {:>10} {:>10}\n",
            "K", "n", "steps", "mean_us", "p99_us", "max_us"
        );
        for r in &self.rows {
            s += &format!(
                "{:>6} {:>5} {:>7} {:>10.2} {:>10.2} {:>10.2}\n",
                r.kernels, r.dofs, r.steps, r.latency.mean_us, r.latency.p99_us, r.latency.max_us
            );
        }
        if let Some(e) = self.exponent {
            s += &format!("exponent (mean latency vs K): {e:.2}\n");
        }
        s
    }
}
