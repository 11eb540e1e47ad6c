use std::io::Write;

use ffpack::experiments::{record_trace, replay_trace, run_sweep, ExperimentConfig, InitSpec};
use ffpack::{make_initial, InitialState, ModelParams, StreamSeed};

fn record(r: f64, seed: u64, horizon: f64, init: &InitialState) -> (u64, String) {
    let state = make_initial(init, ModelParams::new(r, 0.5).unwrap(), StreamSeed::new(seed, 0)).unwrap();
    let (result, bytes) = record_trace(state, horizon, Vec::new()).unwrap();
    (result.events, String::from_utf8(bytes).unwrap())
}

#[test]
fn long_self_recorded_trace_replays_clean() {
    // about 2 r events per time unit once stationary
    let (events, text) = record(100.0, 5, 520.0, &InitialState::Empty);
    assert!(events >= 100_000, "only {events} events");
    let report = replay_trace(text.as_bytes());
    assert!(report.is_clean(), "{report}");
    assert_eq!(report.records, events);
    assert_eq!(report.arrivals + report.departures, events);
}

#[test]
fn opposite_start_replays_clean() {
    let (events, text) = record(40.0, 1, 5.0, &InitialState::Opposite);
    let report = replay_trace(text.as_bytes());
    assert!(report.is_clean(), "{report}");
    assert_eq!(report.records, events + 40);
}

#[test]
fn edited_placement_is_flagged_once() {
    let (_, text) = record(20.0, 3, 30.0, &InitialState::Empty);
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    // edit the 50th arrival
    let (line_no, line) = lines
        .iter()
        .enumerate()
        .filter(|(_, l)| l.contains(",ARR,"))
        .nth(50)
        .map(|(n, l)| (n, l.clone()))
        .unwrap();
    let mut fields: Vec<String> = line.split(',').map(str::to_string).collect();
    let start: usize = fields[4].parse().unwrap();
    fields[4] = (start + 1000).to_string();
    lines[line_no] = fields.join(",");
    let edited = lines.join("\n");

    let report = replay_trace(edited.as_bytes());
    assert_eq!(report.mismatches.len(), 1, "{report}");
    let m = &report.mismatches[0];
    assert_eq!(m.line, line_no + 1);
    assert_eq!((m.expected, m.recomputed), (start + 1000, start));
    assert!(report.fault.is_none());
    assert!(report.to_string().ends_with("FAILED"));
}

#[test]
fn truncated_line_is_a_fault_with_line_number() {
    let (_, text) = record(10.0, 3, 5.0, &InitialState::Empty);
    let mut lines: Vec<&str> = text.lines().collect();
    lines[6] = "5,0.3,ARR";
    let report = replay_trace(lines.join("\n").as_bytes());
    assert_eq!(report.fault.unwrap().line, 7);
}

fn small_sweep(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed: Some(seed),
        r: vec![20.0, 40.0],
        warmup: 5.0,
        horizon: 25.0,
        replications: 2,
        ..ExperimentConfig::default()
    }
}

fn csv_bytes(config: &ExperimentConfig) -> Vec<u8> {
    let mut out = Vec::new();
    run_sweep(config).unwrap().write_csv(&mut out).unwrap();
    out
}

#[test]
fn sweep_csv_is_deterministic() {
    let a = csv_bytes(&small_sweep(17));
    assert_eq!(a, csv_bytes(&small_sweep(17)));
    assert_ne!(a, csv_bytes(&small_sweep(18)));
}

#[test]
fn sweep_does_not_depend_on_thread_count() {
    let config = small_sweep(4);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = single.install(|| csv_bytes(&config));
    let b = many.install(|| csv_bytes(&config));
    assert_eq!(a, b);
}

#[test]
fn every_estimate_has_a_ci_column() {
    let table = run_sweep(&small_sweep(2)).unwrap();
    let header = table.header();
    for name in &table.columns {
        let k = header.iter().position(|h| h == name).unwrap();
        assert_eq!(header[k + 1], format!("{name}_ci"));
    }
    let mut out = Vec::new();
    table.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let widths: Vec<usize> = text.lines().map(|l| l.split(',').count()).collect();
    assert!(widths.iter().all(|&w| w == header.len()));
    assert_eq!(text.lines().filter(|l| l.contains(",pooled,")).count(), 2);
}

#[test]
fn sweep_from_snapshot_file() {
    let dir = std::env::temp_dir().join(format!("ffpack-sweep-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("start.txt");
    let mut file = std::fs::File::create(&path).unwrap();
    writeln!(file, "# hand-made start\n1.22\n.1").unwrap();
    let config = ExperimentConfig {
        init: InitSpec::Snapshot(path.clone()),
        ..small_sweep(9)
    };
    assert!(run_sweep(&config).is_ok());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_round_trips_through_toml() {
    let text = r#"
# sweep over two scales
seed = 11
r = [125, 250]
p1 = 0.5
i_list = [1, 2, "inf"]
init = "opposite"

[outputs]
csv = "out.csv"
"#;
    let config = ExperimentConfig::from_toml(text).unwrap();
    assert_eq!(config.r, vec![125.0, 250.0]);
    assert_eq!(config.init, InitSpec::Opposite);
    assert_eq!(config.replications, 8);
    assert!(ExperimentConfig::from_toml("seeed = 1").is_err());
}
