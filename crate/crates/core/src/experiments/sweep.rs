//! Multi-`r` steady-state sweeps.
//!
//! Each `(r, replication)` pair is one independent run. Every statistic is a
//! time average over `[warmup, horizon)` with a batch-means CI. Pooled rows
//! merge the batches of all replications in replication order, so the
//! output does not depend on how the runs were scheduled.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ConfigError, OutputError};
use crate::estimate::{Estimate, Inconclusive, TimeAverageEstimator};
use crate::experiments::config::ExperimentConfig;
use crate::model::{ItemKind, ModelParams};
use crate::observables::{snapshot_detail, PairCap, SnapshotDetail, WindowBounds, WindowSpec};
use crate::sim::{make_initial, simulate, DeltaRecord, InitialState, Observer, SimState, StreamSeed};

/// Column names of the sweep statistics, in output order.
pub fn metric_names(caps: &[PairCap]) -> Vec<String> {
    let mut names: Vec<String> = [
        "count1",
        "count2",
        "ones_lower",
        "twos_lower",
        "empty_lower",
        "d_lower",
        "g_lower",
        "p_g0_dpos_lower",
        "ones_packed",
        "twos_packed",
        "ones",
        "twos",
        "x",
        "empty",
        "d",
        "g",
        "g1",
        "g_delta",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    names.extend(caps.iter().map(|cap| format!("u_{cap}")));
    names.extend(["p_g1_zero", "p_g0_dpos", "wasted"].iter().map(|s| s.to_string()));
    names
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Values of [`metric_names`] for one snapshot. Counts are scaled by `1/r`
/// except `count1`/`count2`; probabilities are indicators.
fn metric_values(detail: &SnapshotDetail, bounds: &WindowBounds, r: f64, out: &mut Vec<f64>) {
    let s = &detail.snapshot;
    let lower = &detail.lower;
    out.clear();
    out.extend([
        f64::NAN, // count1, filled by the caller
        f64::NAN, // count2
        lower.ones as f64 / r,
        lower.twos as f64 / r,
        (bounds.lower - lower.occupied) as f64 / r,
        lower.two_capacity as f64 / r,
        lower.odd_holes as f64 / r,
        indicator(lower.odd_holes == 0 && lower.two_capacity > 0),
        detail.packed.ones as f64 / r,
        detail.packed.twos as f64 / r,
        s.y as f64 / r,
        s.z as f64 / r,
        s.x as f64 / r,
        (bounds.window - s.x) as f64 / r,
        s.d as f64 / r,
        s.g as f64 / r,
        s.g1 as f64 / r,
        s.g_delta as f64 / r,
    ]);
    out.extend(s.u.iter().map(|&(_, u)| u as f64 / r));
    out.extend([indicator(s.g1_zero), indicator(s.g_zero_d_pos), s.wasted as f64 / r]);
}

/// `U^{inf} - U^{i} <= y r / (2 i)` for every finite cap, exactly.
pub fn pair_bound_holds(u: &[(PairCap, usize)], window_cells: usize) -> bool {
    let Some(&(_, unbounded)) = u.iter().find(|(cap, _)| *cap == PairCap::Infinite) else {
        return true;
    };
    u.iter().all(|&(cap, count)| match cap {
        PairCap::Finite(i) => (unbounded - count) * 2 * i as usize <= window_cells,
        PairCap::Infinite => true,
    })
}

/// Accumulates every sweep statistic over a run.
pub struct SweepObserver {
    params: ModelParams,
    window: WindowSpec,
    bounds: WindowBounds,
    /// Events touching only cells beyond this leave every statistic unchanged.
    watch_limit: usize,
    dirty: bool,
    values: Vec<f64>,
    estimators: Vec<TimeAverageEstimator>,
    snapshots: u64,
    bound_violations: u64,
}

impl SweepObserver {
    pub fn new(params: ModelParams, window: WindowSpec, warmup: f64, horizon: f64, batches: usize) -> Self {
        let bounds = window.bounds(&params);
        let metrics = metric_names(&window.caps).len();
        Self {
            params,
            bounds,
            watch_limit: bounds.window.max(bounds.packed).max(bounds.lower),
            window,
            dirty: true,
            values: Vec::with_capacity(metrics),
            estimators: vec![TimeAverageEstimator::new(warmup, horizon, batches); metrics],
            snapshots: 0,
            bound_violations: 0,
        }
    }

    pub fn estimators(&self) -> &[TimeAverageEstimator] {
        &self.estimators
    }

    /// Snapshots computed, and how many broke the pair-count bound.
    pub fn bound_checks(&self) -> (u64, u64) {
        (self.snapshots, self.bound_violations)
    }
}

impl Observer for SweepObserver {
    fn observe(&mut self, state: &SimState, hold: f64) {
        if state.clock() + hold <= self.estimators[0].warmup() {
            return;
        }
        if self.dirty {
            let detail = snapshot_detail(state.config(), &self.params, &self.window);
            self.snapshots += 1;
            if !pair_bound_holds(&detail.snapshot.u, self.bounds.window) {
                self.bound_violations += 1;
            }
            metric_values(&detail, &self.bounds, self.params.r(), &mut self.values);
            self.dirty = false;
        }
        self.values[0] = state.config().count(ItemKind::One) as f64;
        self.values[1] = state.config().count(ItemKind::Two) as f64;
        for (est, &v) in self.estimators.iter_mut().zip(&self.values) {
            est.accumulate(v, hold, state.clock());
        }
    }

    fn on_delta(&mut self, _state: &SimState, delta: &DeltaRecord) {
        if delta.start <= self.watch_limit {
            self.dirty = true;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Metric {
    pub name: String,
    pub estimate: Result<Estimate, Inconclusive>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub r: f64,
    /// `None` for the row pooling all replications.
    pub replication: Option<usize>,
    pub events: u64,
    pub snapshots: u64,
    pub bound_violations: u64,
    pub metrics: Vec<Metric>,
    /// Second-half minus first-half batch mean of `wasted`.
    pub wasted_drift: Result<Estimate, Inconclusive>,
}

impl SweepRow {
    pub fn metric(&self, name: &str) -> Option<&Result<Estimate, Inconclusive>> {
        self.metrics.iter().find(|m| m.name == name).map(|m| &m.estimate)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub columns: Vec<String>,
    pub rows: Vec<SweepRow>,
}

struct ReplicationOutcome {
    estimators: Vec<TimeAverageEstimator>,
    events: u64,
    snapshots: u64,
    violations: u64,
}

fn run_replication(
    config: &ExperimentConfig,
    init: &InitialState,
    window: &WindowSpec,
    r: f64,
    replication: usize,
) -> Result<ReplicationOutcome, ConfigError> {
    let params = config.params(r)?;
    let seed = StreamSeed::new(config.seed.unwrap_or(0), replication as u64);
    let state = make_initial(init, params, seed)?;
    let mut observer = SweepObserver::new(params, window.clone(), config.warmup, config.horizon, config.batches);
    let result = simulate(state, config.horizon, &mut [&mut observer]);
    let (snapshots, violations) = observer.bound_checks();
    Ok(ReplicationOutcome {
        estimators: observer.estimators,
        events: result.events,
        snapshots,
        violations,
    })
}

fn make_row(
    columns: &[String],
    r: f64,
    replication: Option<usize>,
    estimators: &[TimeAverageEstimator],
    counters: (u64, u64, u64),
) -> SweepRow {
    let wasted = estimators.last().expect("wasted is the last metric");
    SweepRow {
        r,
        replication,
        events: counters.0,
        snapshots: counters.1,
        bound_violations: counters.2,
        metrics: columns
            .iter()
            .zip(estimators)
            .map(|(name, est)| Metric { name: name.clone(), estimate: est.finalize() })
            .collect(),
        wasted_drift: wasted.drift(),
    }
}

/// Runs every `(r, replication)` pair and returns per-replication rows
/// followed by a pooled row for each `r`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepTable, ConfigError> {
    config.validate()?;
    if config.seed.is_none() {
        return Err(ConfigError::Invalid("a sweep needs an explicit seed".into()));
    }
    let init = config.init.load()?;
    let window = config.window()?;
    let columns = metric_names(&window.caps);
    let jobs: Vec<(f64, usize)> = config
        .r
        .iter()
        .flat_map(|&r| (0..config.replications).map(move |k| (r, k)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(r, k)| run_replication(config, &init, &window, r, k))
        .collect::<Result<Vec<_>, _>>()?;

    let mut rows = Vec::with_capacity(jobs.len() + config.r.len());
    for (chunk, &r) in outcomes.chunks(config.replications).zip(&config.r) {
        let mut pooled: Option<Vec<TimeAverageEstimator>> = None;
        let mut totals = (0, 0, 0);
        for (k, outcome) in chunk.iter().enumerate() {
            let counters = (outcome.events, outcome.snapshots, outcome.violations);
            rows.push(make_row(&columns, r, Some(k), &outcome.estimators, counters));
            totals = (totals.0 + counters.0, totals.1 + counters.1, totals.2 + counters.2);
            match pooled.as_mut() {
                None => pooled = Some(outcome.estimators.clone()),
                Some(acc) => acc.iter_mut().zip(&outcome.estimators).for_each(|(a, b)| a.merge(b)),
            }
        }
        let pooled = pooled.expect("at least one replication");
        rows.push(make_row(&columns, r, None, &pooled, totals));
    }
    Ok(SweepTable { columns, rows })
}

impl SweepTable {
    pub fn pooled(&self) -> impl Iterator<Item = &SweepRow> + '_ {
        self.rows.iter().filter(|row| row.replication.is_none())
    }

    pub fn header(&self) -> Vec<String> {
        let mut header = vec![
            "r".to_string(),
            "replication".into(),
            "events".into(),
            "snapshots".into(),
            "u_bound_violations".into(),
        ];
        for name in &self.columns {
            header.push(name.clone());
            header.push(format!("{name}_ci"));
        }
        header.push("wasted_drift".into());
        header.push("wasted_drift_ci".into());
        header
    }

    /// CSV with one row per `(r, replication)` and a `pooled` row per `r`.
    /// Every estimate is followed by its 95% CI half-width.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), OutputError> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(self.header())?;
        for row in &self.rows {
            let mut record = vec![
                row.r.to_string(),
                row.replication.map_or("pooled".into(), |k| k.to_string()),
                row.events.to_string(),
                row.snapshots.to_string(),
                row.bound_violations.to_string(),
            ];
            let push = |record: &mut Vec<String>, est: &Result<Estimate, Inconclusive>| match est {
                Ok(e) => {
                    record.push(e.mean.to_string());
                    record.push(e.half_width.to_string());
                }
                Err(_) => {
                    record.push("inconclusive".into());
                    record.push("inconclusive".into());
                }
            };
            for metric in &row.metrics {
                push(&mut record, &metric.estimate);
            }
            push(&mut record, &row.wasted_drift);
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
pub struct SweepMetadata<'a> {
    pub software: &'static str,
    pub version: &'static str,
    pub seed: Option<u64>,
    pub rng: &'static str,
    pub confidence: f64,
    pub columns: Vec<String>,
    pub config: &'a ExperimentConfig,
}

pub fn write_metadata<W: Write>(config: &ExperimentConfig, table: &SweepTable, out: W) -> Result<(), OutputError> {
    let meta = SweepMetadata {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: config.seed,
        rng: "ChaCha8, seed_from_u64(seed), stream = replication index",
        confidence: 0.95,
        columns: table.header(),
        config,
    };
    serde_json::to_writer_pretty(out, &meta)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_bound_check() {
        let u = [(PairCap::Finite(1), 0), (PairCap::Finite(4), 3), (PairCap::Infinite, 5)];
        // (5 - 0) * 2 = 10 and (5 - 3) * 8 = 16
        assert!(pair_bound_holds(&u, 16));
        assert!(!pair_bound_holds(&u, 15));
        assert!(pair_bound_holds(&u[..2], 0));
    }

    #[test]
    fn small_sweep_shape() {
        let config = ExperimentConfig {
            seed: Some(3),
            r: vec![10.0, 20.0],
            warmup: 2.0,
            horizon: 12.0,
            replications: 2,
            ..ExperimentConfig::default()
        };
        let table = run_sweep(&config).unwrap();
        assert_eq!(table.rows.len(), 6);
        assert_eq!(table.pooled().count(), 2);
        let pooled = table.pooled().next().unwrap();
        assert_eq!(pooled.metric("wasted").unwrap().as_ref().unwrap().batches, 40);
        assert_eq!(pooled.bound_violations, 0);
        let mut csv = Vec::new();
        table.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.lines().next().unwrap().contains("u_inf,u_inf_ci"));
    }

    #[test]
    fn sweep_requires_seed() {
        let config = ExperimentConfig { r: vec![10.0], ..ExperimentConfig::default() };
        assert!(run_sweep(&config).is_err());
    }
}
