//! End-to-end workflows behind the CLI: fit-and-evaluate on a trace, and
//! seeded parameter sweeps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::energy::{Constituent, ConstituentFlowVector, ConstituentMask};
use crate::error::{Error, Result};
use crate::estimate::{error_report, fit_ls, predict, rolling_fit, ErrorReport, FitResult, ObservationSet, RollingFit};
use crate::sim::{self, Phase, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub mask: ConstituentMask,
    /// Leading fraction of rows used for fitting; the rest are held out.
    /// 1 fits and evaluates on every row.
    pub train_fraction: f64,
    pub window: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mask: ConstituentMask::CORE,
            train_fraction: 1.0,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub index: u32,
    pub phase: Option<Phase>,
    pub split: Split,
    pub observed: f64,
    pub predicted: f64,
    /// Absolute percentage error; NaN when the observation is zero.
    pub pct_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseShare {
    pub phase: Phase,
    /// Fitted energy share per constituent over this phase's rows.
    pub shares: [f64; 5],
    pub mean_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub fit: FitResult,
    /// Rows before this index were used for fitting.
    pub split_at: usize,
    pub predictions: Vec<PredictionRow>,
    /// Over held-out rows, or over all rows when nothing is held out.
    pub errors: ErrorReport,
    pub shares: [f64; 5],
    pub phase_shares: Vec<PhaseShare>,
    pub dominant: Constituent,
    pub rolling: Option<RollingFit>,
}

/// Zeroes flows outside `mask`.
fn project(flows: &ConstituentFlowVector, mask: ConstituentMask) -> ConstituentFlowVector {
    let mut out = ConstituentFlowVector::default();
    for c in mask.active() {
        out[c] = flows[c];
    }
    out
}

/// Share of fitted energy `alpha_k * sum(b_k)` carried by each constituent.
pub fn energy_shares(fit: &FitResult, rows: &[ConstituentFlowVector]) -> [f64; 5] {
    let mut e = [0.0; 5];
    for r in rows {
        for c in fit.coefficients.mask.active() {
            e[c.index()] += fit.coefficients.alpha[c.index()] * r[c];
        }
    }
    let total: f64 = e.iter().sum();
    if total == 0.0 {
        return [f64::NAN; 5];
    }
    e.map(|v| v / total)
}

pub fn fit_observations(obs: &ObservationSet, opts: &FitOptions) -> Result<FitReport> {
    if !(opts.train_fraction > 0.0 && opts.train_fraction <= 1.0) {
        return Err(Error::arg("train_fraction", opts.train_fraction, "must lie in (0, 1]"));
    }
    let mut obs = obs.clone();
    obs.mask = opts.mask;
    let n = obs.len();
    let split_at = if opts.train_fraction < 1.0 {
        (n as f64 * opts.train_fraction).floor() as usize
    } else {
        n
    };
    let fit = fit_ls(&obs.slice(0..split_at))?;
    let rows: Vec<ConstituentFlowVector> = obs.rows.iter().map(|r| project(r, opts.mask)).collect();
    let mut predictions = Vec::with_capacity(n);
    for (i, r) in rows.iter().enumerate() {
        let predicted = predict(&fit.coefficients, r)?;
        let observed = obs.energy[i];
        let pct_error = if observed == 0.0 {
            f64::NAN
        } else {
            100.0 * ((predicted - observed) / observed).abs()
        };
        predictions.push(PredictionRow {
            index: obs.annotations[i].index,
            phase: obs.annotations[i].phase,
            split: if i < split_at { Split::Train } else { Split::Test },
            observed,
            predicted,
            pct_error,
        });
    }
    let eval = if split_at < n { split_at..n } else { 0..n };
    let pred: Vec<f64> = predictions[eval.clone()].iter().map(|p| p.predicted).collect();
    let errors = error_report(&pred, &obs.energy[eval])?;

    let shares = energy_shares(&fit, &rows);
    let mut phase_shares = Vec::new();
    for phase in [Phase::Initialization, Phase::Collection, Phase::Maintenance] {
        let idx: Vec<usize> = (0..n).filter(|&i| obs.annotations[i].phase == Some(phase)).collect();
        if idx.is_empty() {
            continue;
        }
        let sub: Vec<ConstituentFlowVector> = idx.iter().map(|&i| rows[i]).collect();
        phase_shares.push(PhaseShare {
            phase,
            shares: energy_shares(&fit, &sub),
            mean_energy: idx.iter().map(|&i| obs.energy[i]).sum::<f64>() / idx.len() as f64,
        });
    }
    let dominant = opts
        .mask
        .active()
        .max_by(|a, b| {
            shares[a.index()]
                .total_cmp(&shares[b.index()])
                .then(b.index().cmp(&a.index()))
        })
        .expect("mask has an active constituent");
    let rolling = opts.window.map(|w| rolling_fit(&obs, w)).transpose()?;
    Ok(FitReport {
        fit,
        split_at,
        predictions,
        errors,
        shares,
        phase_shares,
        dominant,
        rolling,
    })
}

pub fn fit_trace(trace: &Trace, opts: &FitOptions) -> Result<FitReport> {
    fit_observations(&ObservationSet::from_trace(trace, opts.mask), opts)
}

/// Per-run aggregate of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run: u32,
    pub seed: u64,
    /// Sampled parameters as applied (count parameters rounded).
    pub params: Vec<(String, f64)>,
    pub flows: ConstituentFlowVector,
    pub energy_j: f64,
    pub slices: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub run: u32,
    pub config: ScenarioConfig,
    pub params: Vec<(String, f64)>,
}

/// Draws every run's seed and parameters from the master seed, in run
/// order, before anything executes.
pub fn plan_sweep(cfg: &ScenarioConfig, master_seed: u64, runs: u32) -> Result<Vec<PlannedRun>> {
    if runs < 1 {
        return Err(Error::arg("runs", f64::from(runs), "need at least one run"));
    }
    cfg.validate()?;
    cfg.validate_sweep_ranges()?;
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    let mut plan = Vec::with_capacity(runs as usize);
    for run in 0..runs {
        let mut config = cfg.clone();
        config.sim.seed = rng.random();
        let mut params = Vec::with_capacity(cfg.sweep.ranges.len());
        for (key, &[lo, hi]) in &cfg.sweep.ranges {
            let v = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            config.set_parameter(key, v)?;
            params.push((key.clone(), config.parameter(key).expect("known parameter")));
        }
        config.validate()?;
        plan.push(PlannedRun { run, config, params });
    }
    Ok(plan)
}

/// Total flows and energy of a trace.
pub fn aggregate(trace: &Trace) -> (ConstituentFlowVector, f64) {
    (trace.total_flows(), trace.total_energy())
}

pub fn execute(planned: &PlannedRun) -> Result<SweepRow> {
    let out = sim::run(&planned.config)?;
    let (flows, energy_j) = aggregate(&out.trace);
    Ok(SweepRow {
        run: planned.run,
        seed: planned.config.sim.seed,
        params: planned.params.clone(),
        flows,
        energy_j,
        slices: out.trace.len() as u32,
    })
}

/// Runs a seeded sweep in parallel; rows come back in run order.
pub fn sweep(cfg: &ScenarioConfig, master_seed: u64, runs: u32) -> Result<Vec<SweepRow>> {
    let plan = plan_sweep(cfg, master_seed, runs)?;
    plan.par_iter().map(execute).collect()
}

/// Sweep rows as observations, one per run.
pub fn sweep_observations(rows: &[SweepRow], mask: ConstituentMask) -> Result<ObservationSet> {
    let mut obs = ObservationSet::new(
        rows.iter().map(|r| r.flows).collect(),
        rows.iter().map(|r| r.energy_j).collect(),
        mask,
    )?;
    for (a, r) in obs.annotations.iter_mut().zip(rows) {
        a.index = r.run;
    }
    Ok(obs)
}
