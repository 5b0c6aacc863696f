use std::fs;
use std::path::Path;

use convdiss::cli::run_cli;
use convdiss::config::{load_config, parse_config};

const BURGERS: &str = r#"
model = "burgers"
p = 1
f = "signed_power"
q = 1
amplitude = 5
n_cells = 32

[controls]
t_max = 0.5
"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn cli(args: &[&str]) -> i32 {
    let mut full = vec!["convdiss"];
    full.extend_from_slice(args);
    run_cli(full)
}

#[test]
fn run_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", BURGERS);
    let out = dir.path().join("out");
    assert_eq!(cli(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--t-max", "0.25"]), 0);
    let series = fs::read_to_string(out.join("series.csv")).unwrap();
    let header = series.lines().next().unwrap();
    assert!(header.starts_with("t,L2,Linf"), "{header}");
    let last_t: f64 = series.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((last_t - 0.25).abs() < 1e-12);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["regime"], "dissipative");
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_key = write(dir.path(), "a.toml", &format!("{BURGERS}\nbogus = 1\n"));
    assert_eq!(cli(&["run", "--config", &bad_key]), 2);
    let bad_lambda = write(dir.path(), "b.toml", "model = \"burgers\"\nlambda = 2\n");
    assert_eq!(cli(&["run", "--config", &bad_lambda]), 2);
    assert_eq!(cli(&["run"]), 2);
    assert_eq!(cli(&["frobnicate"]), 2);
    assert_eq!(cli(&["verify", "--n-cells", "64"]), 2);
}

#[test]
fn io_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(cli(&["run", "--config", missing.to_str().unwrap()]), 3);
    let cfg = write(dir.path(), "run.toml", BURGERS);
    let blocker = write(dir.path(), "file", "");
    assert_eq!(cli(&["run", "--config", &cfg, "--out", &format!("{blocker}/sub")]), 3);
}

#[test]
fn sweep_is_independent_of_job_count() {
    let dir = tempfile::tempdir().unwrap();
    let text = "model = \"burgers\"\nf = \"abs_power\"\nn_cells = 32\n\n[controls]\nt_max = 2\n\n\
                [sweep]\np_values = [1, 2]\nq_values = [1, 2]\namplitudes = [1, 20]\n";
    let cfg = write(dir.path(), "sweep.toml", text);
    let mut maps = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("out{jobs}"));
        assert_eq!(cli(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", jobs]), 0);
        maps.push(fs::read_to_string(out.join("regime_map.csv")).unwrap());
    }
    assert_eq!(maps[0], maps[1]);
    assert_eq!(maps[0].lines().count(), 9);
    assert!(maps[0].lines().any(|l| l.contains("blow_up")));
}

#[test]
fn converge_reports_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let text = "model = \"burgers\"\nf = \"signed_power\"\nq = 1\n\n[controls]\nt_max = 0.5\ntol = 1e-9\n\n\
                [converge]\nresolutions = [32, 64, 128]\ndts = []\n";
    let cfg = write(dir.path(), "conv.toml", text);
    let out = dir.path().join("out");
    assert_eq!(cli(&["converge", "--config", &cfg, "--out", out.to_str().unwrap()]), 0);
    let csv = fs::read_to_string(out.join("orders.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let order: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
    assert!((order - 2.0).abs() < 0.2, "{csv}");
}

#[test]
fn config_round_trips_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    let c = parse_config(BURGERS).unwrap();
    let path = write(dir.path(), "again.toml", &c.to_toml());
    assert_eq!(load_config(Path::new(&path)).unwrap(), c);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let c = load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            c.validate().unwrap();
            count += 1;
        }
    }
    assert!(count >= 3);
}
