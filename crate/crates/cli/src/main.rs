//! `ffpack`: simulate, sweep, replay traces and render stored configurations.

use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ffpack::experiments::config::Outputs;
use ffpack::experiments::sweep::{write_metadata, SweepObserver};
use ffpack::experiments::trace::TraceWriter;
use ffpack::experiments::{replay_trace, run_sweep, ExperimentConfig, InitSpec};
use ffpack::model::cells;
use ffpack::observables::{snapshot_observables, wasted_space};
use ffpack::snapshot::{parse_snapshot, render_text};
use ffpack::{make_initial, simulate, ItemKind, Observer, PairCap, SimState, StreamSeed};
use serde_json::json;

const DEFAULT_CELLS_PER_ROW: usize = 100;

#[derive(Parser)]
#[command(name = "ffpack", version, about = "Dynamic first-fit packing of size-1 and size-2 items")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one replication; optionally record a trace and render snapshots.
    Simulate(SimulateArgs),
    /// Steady-state estimates over several values of r, written as CSV.
    Sweep(SweepArgs),
    /// Re-run a trace with first-fit and compare every placement.
    Replay {
        trace: PathBuf,
    },
    /// Render a stored configuration as a text pixmap.
    Snapshot {
        path: PathBuf,
        #[arg(long)]
        cells_per_row: Option<usize>,
    },
}

/// Every config-file key, settable from the command line.
#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated r values.
    #[arg(long, value_delimiter = ',')]
    r: Option<Vec<f64>>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    y: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Comma-separated pair caps, e.g. `1,2,4,8,inf`.
    #[arg(long, value_delimiter = ',')]
    i_list: Option<Vec<PairCap>>,
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    /// `empty`, `opposite` or `snapshot:<path>`.
    #[arg(long)]
    init: Option<InitSpec>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// Comma-separated clock values.
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Option<Vec<f64>>,
    #[arg(long)]
    cells_per_row: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Replication index, i.e. the random stream.
    #[arg(long, default_value_t = 0)]
    replication: u64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, required = true)]
    seed: u64,
    #[command(flatten)]
    config: ConfigArgs,
}

impl ConfigArgs {
    fn resolve(self, seed: Option<u64>) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let mut config = ExperimentConfig::from_toml(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                rebase_paths(&mut config, path.parent().unwrap_or(Path::new(".")));
                config
            }
            None => ExperimentConfig::default(),
        };
        fn set<T>(slot: &mut T, value: Option<T>) {
            if let Some(v) = value {
                *slot = v;
            }
        }
        fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
            if value.is_some() {
                *slot = value;
            }
        }
        set_opt(&mut config.seed, seed);
        set(&mut config.r, self.r);
        set(&mut config.p1, self.p1);
        set_opt(&mut config.y, self.y);
        set_opt(&mut config.delta, self.delta);
        set(&mut config.i_list, self.i_list);
        set(&mut config.warmup, self.warmup);
        set(&mut config.horizon, self.horizon);
        set(&mut config.replications, self.replications);
        set(&mut config.batches, self.batches);
        set(&mut config.init, self.init);
        let out = &mut config.outputs;
        set_opt(&mut out.csv, self.csv);
        set_opt(&mut out.json, self.json);
        set_opt(&mut out.trace, self.trace);
        set_opt(&mut out.snapshot_dir, self.snapshot_dir);
        set(&mut out.snapshot_times, self.snapshot_times);
        set_opt(&mut out.cells_per_row, self.cells_per_row);
        config.validate()?;
        Ok(config)
    }
}

/// Relative paths in a config file are relative to the file.
fn rebase_paths(config: &mut ExperimentConfig, base: &Path) {
    let rebase = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let InitSpec::Snapshot(p) = &mut config.init {
        rebase(p);
    }
    let Outputs { csv, json, trace, snapshot_dir, .. } = &mut config.outputs;
    for p in [csv, json, trace, snapshot_dir].into_iter().flatten() {
        rebase(p);
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Renders the configuration at each requested clock value.
struct SnapshotRecorder {
    times: Vec<f64>,
    next: usize,
    cells_per_row: usize,
    dir: Option<PathBuf>,
    /// `(time, F1(p1 r) / r, wasted / r)` per snapshot.
    summary: Vec<(f64, f64, f64)>,
    error: Option<anyhow::Error>,
}

impl SnapshotRecorder {
    fn new(mut times: Vec<f64>, cells_per_row: usize, dir: Option<PathBuf>) -> Self {
        times.sort_by(f64::total_cmp);
        Self { times, next: 0, cells_per_row, dir, summary: Vec::new(), error: None }
    }

    fn take(&mut self, state: &SimState, time: f64) {
        let params = state.params();
        let r = params.r();
        let config = state.config();
        let f1 = config.count_left_of(ItemKind::One, cells(params.p1(), r)) as f64 / r;
        let wasted = wasted_space(config, params) as f64 / r;
        self.summary.push((time, f1, wasted));
        if let (Some(dir), None) = (&self.dir, &self.error) {
            let path = dir.join(format!("t{time:07.3}.txt"));
            let text = format!(
                "# clock {time}, r {r}, p1 {}\n# F1(p1 r)/r {f1:.4}, wasted/r {wasted:.4}\n{}",
                params.p1(),
                render_text(config, self.cells_per_row)
            );
            if let Err(e) = create(&path).and_then(|mut f| Ok(f.write_all(text.as_bytes())?)) {
                self.error = Some(e);
            }
        }
    }
}

impl Observer for SnapshotRecorder {
    fn observe(&mut self, state: &SimState, hold: f64) {
        while let Some(&t) = self.times.get(self.next) {
            if t >= state.clock() + hold {
                break;
            }
            self.next += 1;
            self.take(state, t);
        }
    }

    fn finish(&mut self, state: &SimState) {
        while let Some(&t) = self.times.get(self.next) {
            if t > state.clock() {
                break;
            }
            self.next += 1;
            self.take(state, t);
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let config = args.config.resolve(args.seed)?;
    if config.r.len() != 1 {
        bail!("simulate takes exactly one r value, got {}", config.r.len());
    }
    let r = config.r[0];
    let params = config.params(r)?;
    let window = config.window()?;
    let seed = config.seed.unwrap_or(0);
    let state = make_initial(&config.init.load()?, params, StreamSeed::new(seed, args.replication))?;
    let initial = snapshot_observables(state.config(), &params, &window);

    let outputs = &config.outputs;
    let mut recorder = SnapshotRecorder::new(
        outputs.snapshot_times.clone(),
        outputs.cells_per_row.unwrap_or(DEFAULT_CELLS_PER_ROW),
        outputs.snapshot_dir.clone(),
    );
    let mut averages =
        SweepObserver::new(params, window.clone(), config.warmup, config.horizon, config.batches);
    let mut trace = match &outputs.trace {
        Some(path) => Some(TraceWriter::start(create(path)?, state.config())?),
        None => None,
    };
    let result = {
        let mut observers: Vec<&mut dyn Observer> = vec![&mut recorder, &mut averages];
        if let Some(t) = trace.as_mut() {
            observers.push(t);
        }
        simulate(state, config.horizon, &mut observers)
    };
    if let Some(t) = trace {
        t.finish()?;
    }
    if let Some(e) = recorder.error.take() {
        return Err(e);
    }

    let names = ffpack::experiments::sweep::metric_names(&window.caps);
    let averages: serde_json::Map<String, serde_json::Value> = names
        .iter()
        .zip(averages.estimators())
        .map(|(name, est)| {
            let value = match est.finalize() {
                Ok(e) => json!({ "mean": e.mean, "ci": e.half_width }),
                Err(_) => json!("inconclusive"),
            };
            (name.clone(), value)
        })
        .collect();
    let final_state = snapshot_observables(result.state.config(), &params, &window);
    let report = json!({
        "r": r,
        "p1": params.p1(),
        "seed": seed,
        "replication": args.replication,
        "init": config.init.to_string(),
        "horizon": config.horizon,
        "events": result.events,
        "arrivals": result.arrivals,
        "departures": result.departures,
        "count1": result.state.config().count(ItemKind::One),
        "count2": result.state.config().count(ItemKind::Two),
        "initial": initial,
        "final": final_state,
        "time_averages": averages,
        "snapshots": recorder.summary.iter().map(|&(t, f1, w)| json!({
            "clock": t, "f1_lower": f1, "wasted": w
        })).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&report)?;
    match &outputs.json {
        Some(path) => {
            let mut f = create(path)?;
            writeln!(f, "{text}")?;
            f.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let config = args.config.resolve(Some(args.seed))?;
    let table = run_sweep(&config)?;
    match &config.outputs.csv {
        Some(path) => {
            let mut f = create(path)?;
            table.write_csv(&mut f)?;
            f.flush()?;
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    if let Some(path) = &config.outputs.json {
        let mut f = create(path)?;
        write_metadata(&config, &table, &mut f)?;
        f.flush()?;
    }
    let violations: u64 = table.pooled().map(|row| row.bound_violations).sum();
    if violations > 0 {
        bail!("{violations} snapshots broke the pair-count bound");
    }
    Ok(())
}

fn cmd_replay(path: &Path) -> Result<bool> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let report = replay_trace(BufReader::new(file));
    println!("{report}");
    Ok(report.is_clean())
}

fn cmd_snapshot(path: &Path, cells_per_row: Option<usize>) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config = parse_snapshot(&text).with_context(|| format!("parsing {}", path.display()))?;
    let cells_per_row = cells_per_row.unwrap_or(DEFAULT_CELLS_PER_ROW);
    if cells_per_row == 0 {
        bail!("cells-per-row must be positive");
    }
    print!("{}", render_text(&config, cells_per_row));
    eprintln!(
        "{} 1-items, {} 2-items, extent {}, {} holes",
        config.count(ItemKind::One),
        config.count(ItemKind::Two),
        config.extent(),
        config.holes(config.extent()).len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(args).map(|_| true),
        Command::Sweep(args) => cmd_sweep(args).map(|_| true),
        Command::Replay { trace } => cmd_replay(&trace),
        Command::Snapshot { path, cells_per_row } => cmd_snapshot(&path, cells_per_row).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
