use std::fs;
use std::path::Path;

use notrade::cli::run_cli;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv: Vec<&str> = std::iter::once("notrade")
        .chain(args.iter().copied())
        .collect();
    let code = run_cli(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

const SYNTH: &str = r#"
[strategy]
kind = "one_factor"
[strategy.params]
kappa = 0.02
beta = 0.04
sigma_x = 0.5
n_steps = 1500
[experiment]
epsilons = [0.02, 0.05, 0.1, 0.2, 0.5]
n_seeds = 2
"#;

#[test]
fn calc_ty1() {
    let (code, out, _) = run(&[
        "calc",
        "--epsilon",
        "10",
        "--sigma-theta",
        "35",
        "--sigma-x",
        "400",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("rounded 49"), "{out}");
    assert!(out.contains("half_width 48.607"), "{out}");
}

#[test]
fn calc_cds_with_gamma() {
    let gamma = (4.0f64 / 875.0).powi(2).to_string();
    let (code, out, _) = run(&[
        "calc",
        "--epsilon",
        "190",
        "--gearing",
        "5e5",
        "--gamma0-sq",
        &gamma,
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("rounded 14"), "{out}");
}

#[test]
fn calc_rejects_negative_cost() {
    let (code, _, err) = run(&["calc", "--epsilon=-1", "--gamma0-sq", "1"]);
    assert_eq!(code, 1);
    assert!(err.contains("epsilon"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["calc", "--epsilon", "1"]).0, 2);
    assert_eq!(run(&["frobnicate"]).0, 2);
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("oracle"));
}

#[test]
fn synth_writes_five_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SYNTH).unwrap();
    let csv = dir.path().join("out/sweep.csv");
    let (code, out, err) = run(&[
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("wrote"));
    let text = fs::read_to_string(&csv).unwrap();
    let mut eps: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap())
        .collect();
    eps.dedup();
    assert_eq!(eps, vec!["0.02", "0.05", "0.1", "0.2", "0.5"]);
    assert_eq!(text.lines().count(), 1 + 5 * 10);
}

#[test]
fn synth_seed_flag_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SYNTH).unwrap();
    let a = run(&["synth", "--config", cfg.to_str().unwrap(), "--seed", "10"]).1;
    let b = run(&["synth", "--config", cfg.to_str().unwrap(), "--seed", "11"]).1;
    let c = run(&["synth", "--config", cfg.to_str().unwrap(), "--seed", "10"]).1;
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn bad_config_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, SYNTH.replace("n_seeds = 2", "n_seeds = 2\nseedz = 3")).unwrap();
    let (code, _, err) = run(&["synth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("experiment"), "{err}");
    assert!(err.contains("seedz"), "{err}");
}

#[test]
fn missing_config_file() {
    let (code, _, err) = run(&["synth", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code, 1);
    assert!(err.contains("/nonexistent/run.toml"), "{err}");
}

fn write_prices(path: &Path, n: usize) {
    let mut s = String::from("date,price\n");
    let start = chrono::NaiveDate::from_ymd_opt(2010, 1, 4).unwrap();
    let mut p: f64 = 100.0;
    for i in 0..n {
        // deterministic wiggle with a slow trend
        p += 0.3 * ((i as f64) * 0.7).sin() + 0.05 * ((i as f64) / 90.0).cos();
        let d = start + chrono::Duration::days(i as i64);
        s.push_str(&format!("{},{p:.4}\n", d.format("%Y-%m-%d")));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn momentum_on_price_file() {
    let dir = tempfile::tempdir().unwrap();
    write_prices(&dir.path().join("px.csv"), 600);
    let cfg = dir.path().join("mom.toml");
    fs::write(
        &cfg,
        "[market]\ncost_convention = \"fraction_of_price\"\n\
         [strategy]\nkind = \"momentum\"\n[strategy.params]\nprices = \"px.csv\"\n\
         [experiment]\nepsilons = [0.01, 0.1]\n",
    )
    .unwrap();
    let (code, out, err) = run(&["momentum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("epsilon,lambda,avg_width"), "{out}");
    assert_eq!(out.lines().count(), 1 + 2 * 10);
}

#[test]
fn momentum_rejects_bad_price_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("px.csv"),
        "date,price\n2020-01-02,1\n2020-01-02,2\n",
    )
    .unwrap();
    let cfg = dir.path().join("mom.toml");
    fs::write(
        &cfg,
        "[strategy]\nkind = \"momentum\"\n[strategy.params]\nprices = \"px.csv\"\n[experiment]\nepsilons = [0.01]\n",
    )
    .unwrap();
    let (code, _, err) = run(&["momentum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("row 3") && err.contains("duplicate"), "{err}");
}

#[test]
fn oracle_small_grid() {
    let (code, out, err) = run(&[
        "oracle",
        "--epsilons",
        "0.05,0.1",
        "--nz",
        "21",
        "--ntheta",
        "41",
        "--discount",
        "1e-3",
    ]);
    assert_eq!(code, 0, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(
        lines[0],
        "epsilon,oracle_half_width,formula_half_width,ratio,iterations"
    );
    assert_eq!(lines.len(), 3);
}

#[test]
fn oracle_non_convergence_is_reported() {
    let (code, _, err) = run(&[
        "oracle",
        "--epsilons",
        "0.1",
        "--nz",
        "21",
        "--ntheta",
        "41",
        "--max-iters",
        "2",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("did not converge"), "{err}");
}
