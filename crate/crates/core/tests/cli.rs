use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nbiot-alloc"))
}

fn paper() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/paper_s5.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(report: &str, key: &str) -> Vec<f64> {
    let line = report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}` in report:\n{report}"));
    line.split_whitespace()
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn run_reference_scenario() {
    let o = run(&["run", paper().to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report = stdout(&o);
    assert_eq!(field(&report, "confirmed_demands"), vec![1.0, 2.0, 2.0]);
    for (x, want) in field(&report, "allocations").iter().zip([0.78, 1.67, 2.55]) {
        assert!((x - want).abs() <= 0.01);
    }
    assert!(report.contains("converged: true"));
}

#[test]
fn run_missing_file() {
    let o = run(&["run", "missing.json"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn run_iteration_cap() {
    let o = run(&["run", paper().to_str().unwrap(), "--max-iters", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("converged: false"));
}

#[test]
fn bad_arguments_are_invalid_input() {
    assert_eq!(
        run(&["run", paper().to_str().unwrap(), "--init", "sideways"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        run(&["run", paper().to_str().unwrap(), "--eta", "-1"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn trace_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let plot = dir.path().join("plot.gp");
    let o = run(&[
        "run",
        paper().to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--gnuplot",
        plot.to_str().unwrap(),
        "--stride",
        "7",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("iter,device,x,u_prime,zeta,q"));
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len() % 3, 0);
    let mut last = 0usize;
    for chunk in rows.chunks(3) {
        let iter: usize = chunk[0][0].parse().unwrap();
        assert!(iter >= last);
        last = iter;
        for (d, row) in chunk.iter().enumerate() {
            assert_eq!(row.len(), 6);
            assert_eq!(row[0].parse::<usize>().unwrap(), iter);
            assert_eq!(row[1].parse::<usize>().unwrap(), d);
            for v in &row[2..] {
                assert!(v.parse::<f64>().unwrap().is_finite());
            }
        }
    }
    assert_eq!(last as f64, field(&stdout(&o), "iterations")[0]);
    assert!(std::fs::read_to_string(plot).unwrap().contains("trace.csv"));
}

#[test]
fn oracle_reports_multiplier() {
    let o = run(&["oracle", paper().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let report = stdout(&o);
    assert!((field(&report, "lambda")[0] - 1.061_733).abs() < 1e-6);
    for (x, want) in field(&report, "allocations")
        .iter()
        .zip([0.778_061, 1.675_875, 2.546_064])
    {
        assert!((x - want).abs() < 1e-6);
    }
    assert!((field(&report, "objective")[0] - 15.381_607).abs() < 1e-6);
}

#[test]
fn oracle_single_device_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("one.json");
    let o = run(&[
        "gen",
        "--n",
        "1",
        "--seed",
        "7",
        "--out",
        single.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let report = stdout(&run(&["oracle", single.to_str().unwrap()]));
    assert_eq!(
        field(&report, "allocations"),
        field(&report, "confirmed_demands")
    );

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"bandwidth\": 5").unwrap();
    assert_eq!(
        run(&["oracle", bad.to_str().unwrap()]).status.code(),
        Some(1)
    );
}

#[test]
fn compare_reference_and_generated() {
    let o = run(&["compare", paper().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(field(&stdout(&o), "max_gap")[0] <= 1e-3);

    let dir = tempfile::tempdir().unwrap();
    let generated = dir.path().join("g.json");
    run(&[
        "gen",
        "--n",
        "10",
        "--seed",
        "1",
        "--out",
        generated.to_str().unwrap(),
    ]);
    let o = run(&["compare", generated.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn compare_unstable_gain() {
    let o = run(&["compare", paper().to_str().unwrap(), "--eta", "50"]);
    assert!(matches!(o.status.code(), Some(2) | Some(3)));
}

#[test]
fn gen_to_stdout_parses() {
    let o = run(&["gen", "--n", "4", "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0));
    let s: nbiot_alloc::Scenario64 = nbiot_alloc::parse_scenario(&stdout(&o)).unwrap();
    assert_eq!(s.len(), 4);
    assert_eq!(
        run(&["gen", "--n", "0", "--seed", "1"]).status.code(),
        Some(1)
    );
}
