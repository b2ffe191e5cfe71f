use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_datamarket"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const EXPONENTIAL: &str = r#"{"family": "exponential", "mu": 0.457, "h": 0.039}"#;
const FRACTION: &str = r#"{"family": "fraction", "kappa": 1.109, "g": 0.271}"#;

fn f64_at(v: &Value, pointer: &str) -> f64 {
    v.pointer(pointer).and_then(Value::as_f64).unwrap_or_else(|| panic!("missing {pointer} in {v}"))
}

#[test]
fn synth_then_fit_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "truth.json", EXPONENTIAL);
    let out = run(d, &["synth", "--params", "truth.json", "--sizes", "10,300,25", "--out", "pts.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = run(d, &["fit", "--input", "pts.csv", "--family", "exponential", "--out", "p.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(d.join("p.json"));
    assert!((f64_at(&v, "/params/mu") - 0.457).abs() <= 1e-6);
    assert!((f64_at(&v, "/params/h") - 0.039).abs() <= 1e-6);

    let out = run(d, &["fit", "--input", "pts.csv", "--family", "both", "--out", "both.json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(d.join("both.json"));
    assert!(f64_at(&v, "/fits/fraction/sse") >= 0.0);
    assert!(f64_at(&v, "/fits/exponential/sse") <= f64_at(&v, "/fits/fraction/sse"));

    // fit output feeds straight back into the optimizer
    let out = run(d, &["optimize", "--params", "both.json", "--users", "500", "--data-price", "0.5", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert!((f64_at(&json(d.join("s.json")), "/decision/n") - 54.66).abs() <= 0.05);
}

#[test]
fn fit_reports_missing_header_on_line_one() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "100,0.4\n200,0.3\n");
    let out = run(dir.path(), &["fit", "--input", "bad.csv", "--family", "fraction", "--out", "p.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn fit_rejects_out_of_range_error_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.csv", "n,error\n100,0.4\n200,1.2\n");
    let out = run(dir.path(), &["fit", "--input", "bad.csv", "--family", "fraction", "--out", "p.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn optimize_worked_point_and_fixed_variants() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "p.json", EXPONENTIAL);
    let market = ["--params", "p.json", "--users", "500", "--data-price", "0.5"];

    let out = run(d, &[&["optimize"][..], &market, &["--out", "s.json"]].concat());
    assert_eq!(out.status.code(), Some(0));
    let v = json(d.join("s.json"));
    assert!((f64_at(&v, "/decision/n") - 54.66).abs() <= 0.05);
    assert!((f64_at(&v, "/decision/p_s") - 0.4729).abs() <= 1e-4);
    assert_eq!(v["method"], "numeric");

    let out = run(d, &[&["optimize"][..], &market, &["--closed-form", "--out", "c.json"]].concat());
    assert_eq!(out.status.code(), Some(0));
    let v = json(d.join("c.json"));
    assert_eq!(v["method"], "closed_form");
    assert_eq!(v["closed_form_roots"].as_array().unwrap().len(), 2);
    assert_eq!(v["closed_form_agrees"], true);

    let out = run(d, &[&["optimize"][..], &market, &["--fix-n", "100", "--out", "n.json"]].concat());
    assert_eq!(out.status.code(), Some(0));
    let phi = 1.0 - 0.457 * (-0.039f64 * 100.0).exp();
    let expected: f64 = format!("{:.8e}", phi / 2.0).parse().unwrap();
    assert_eq!(f64_at(&json(d.join("n.json")), "/decision/p_s"), expected);

    let out = run(d, &[&["optimize"][..], &market, &["--fix-ps", "0.4729", "--out", "f.json"]].concat());
    assert_eq!(out.status.code(), Some(0));
    assert!((f64_at(&json(d.join("f.json")), "/decision/n") - 54.6569).abs() <= 1e-3);

    let out = run(d, &[&["optimize"][..], &market, &["--fix-n", "1", "--fix-ps", "0.4", "--out", "x.json"]].concat());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn optimize_input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "p.json", EXPONENTIAL);
    let out = run(d, &["optimize", "--params", "p.json", "--users", "0", "--data-price", "0.5", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(1));
    write(d, "bad.json", r#"{"family": "exponential", "mu": 1.5, "h": 0.039}"#);
    let out = run(d, &["optimize", "--params", "bad.json", "--users", "5", "--data-price", "0.5", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(d, &["optimize", "--params", "missing.json", "--users", "5", "--data-price", "0.5", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn closed_form_unavailable_still_writes_numeric() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "p.json", EXPONENTIAL);
    // h M / 8 = 2.4375 < p_b
    let out = run(d, &["optimize", "--params", "p.json", "--users", "500", "--data-price", "3", "--closed-form", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(d.join("s.json"))["method"], "numeric");
}

#[test]
fn fraction_closed_form_reports_agreement_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "p.json", FRACTION);
    let out = run(d, &["optimize", "--params", "p.json", "--users", "500", "--data-price", "0.5", "--closed-form", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(d.join("s.json"));
    assert!(v["closed_form_agrees"].is_boolean());
    assert_eq!(v["closed_form_roots"].as_array().unwrap().len(), 9);
}

fn surface_rows(path: PathBuf) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["n", "p_s", "profit", "feasible"]);
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn surface_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "p.json", EXPONENTIAL);
    let market = ["--params", "p.json", "--users", "500", "--data-price", "0.5"];

    let out = run(d, &[&["surface"][..], &market, &["--n-grid", "10,20,2", "--ps-grid", "0.1,0.2,2", "--out", "s.csv"]].concat());
    assert_eq!(out.status.code(), Some(0));
    let rows = surface_rows(d.join("s.csv"));
    assert_eq!(rows.len(), 4);
    assert_eq!((rows[1][0].as_str(), rows[1][1].as_str()), ("10", "0.2"));

    // a grid centred on the optimum peaks at its centre
    run(d, &[&["optimize"][..], &market, &["--out", "opt.json"]].concat());
    let v = json(d.join("opt.json"));
    let (n, p) = (f64_at(&v, "/decision/n"), f64_at(&v, "/decision/p_s"));
    let n_grid = format!("{},{},3", n - 1.0, n + 1.0);
    let ps_grid = format!("{},{},3", p - 0.01, p + 0.01);
    run(d, &[&["surface"][..], &market, &["--n-grid", &n_grid, "--ps-grid", &ps_grid, "--out", "c.csv"]].concat());
    let profits: Vec<f64> = surface_rows(d.join("c.csv")).iter().map(|r| r[2].parse().unwrap()).collect();
    let best = (0..profits.len()).fold(0, |b, i| if profits[i] > profits[b] { i } else { b });
    assert_eq!(best, 4, "{profits:?}");

    // fees above the willingness to pay are kept and flagged
    run(d, &[&["surface"][..], &market, &["--n-grid", "10,10,1", "--ps-grid", "0,1,3", "--out", "f.csv"]].concat());
    let rows = surface_rows(d.join("f.csv"));
    assert_eq!(rows.iter().map(|r| r[3].as_str()).collect::<Vec<_>>(), ["true", "true", "false"]);
    assert!(rows[2][2].parse::<f64>().unwrap() < 0.0);

    let out = run(d, &[&["surface"][..], &market, &["--n-grid", "20,10,2", "--ps-grid", "0,1,2", "--out", "x.csv"]].concat());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn equilibrium_is_deterministic_and_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "p.json", EXPONENTIAL);
    let args = |tag: &str| {
        vec![
            "equilibrium".to_string(),
            "--params".into(),
            "p.json".into(),
            "--users".into(),
            "500".into(),
            "--out".into(),
            format!("e{tag}.json"),
            "--curve-out".into(),
            format!("c{tag}.csv"),
        ]
    };
    for tag in ["1", "2"] {
        let out = bin().current_dir(d).args(args(tag)).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |name: &str| std::fs::read(d.join(name)).unwrap();
    assert_eq!(read("e1.json"), read("e2.json"));
    assert_eq!(read("c1.csv"), read("c2.csv"));

    let mut rdr = csv::Reader::from_path(d.join("c1.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["p_b", "n", "leader_profit", "follower_profit"]);
    let demand: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(demand.len(), 200);
    let positive = demand.iter().take_while(|&&n| n > 0.0).count();
    assert!(demand[..positive].windows(2).all(|w| w[1] < w[0]));
    assert!(demand.windows(2).all(|w| w[1] <= w[0]));

    let v = json(d.join("e1.json"));
    let p = f64_at(&v, "/p_b_star") * f64_at(&v, "/n_star");
    assert!((p - f64_at(&v, "/leader_profit")).abs() <= 1e-6 * p);
}

#[test]
fn sweep_g_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(d, "p.json", FRACTION);
    write(d, "cfg.json", r#"{"params": "p.json", "users": 500, "data_price": 0.5, "sweep_g": [0.1, 0.2, 0.3], "grid": 100}"#);
    let out = run(d, &["equilibrium", "--config", "cfg.json", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(d.join("s.json"));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let ns: Vec<f64> = rows.iter().map(|r| r["n_at_price"].as_f64().unwrap()).collect();
    assert!(ns.windows(2).all(|w| w[1] <= w[0]), "{ns:?}");

    // explicit flags override the config file
    let out = run(d, &["equilibrium", "--config", "cfg.json", "--sweep-g", "0.4", "--out", "t.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(d.join("t.json"))["rows"].as_array().unwrap().len(), 1);
}

#[test]
fn presets_and_no_trade() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = run(d, &["equilibrium", "--preset", "fig6", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(d.join("s.json"))["rows"].as_array().unwrap().len(), 4);

    let out = run(d, &["equilibrium", "--preset", "fig5", "--out", "e.json"]);
    assert_eq!(out.status.code(), Some(0));

    write(d, "p.json", EXPONENTIAL);
    let out = run(d, &["equilibrium", "--params", "p.json", "--users", "500", "--bracket", "20,40", "--out", "n.json"]);
    assert_eq!(out.status.code(), Some(4));
    let out = run(d, &["equilibrium", "--params", "p.json", "--users", "500", "--bracket", "2,1", "--out", "n.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_and_unknown_flags() {
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(bin().args(["fit", "--bogus"]).output().unwrap().status.code(), Some(1));
}
