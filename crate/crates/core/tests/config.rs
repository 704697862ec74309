use std::path::Path;

use notrade::backtest::RiskKind;
use notrade::data_io::{default_lambdas, load_config, CostConvention, RunConfig};
use notrade::strategy::Registry;
use notrade::Error;
use proptest::prelude::*;

const MINIMAL: &str = r#"
[strategy]
kind = "one_factor"
[strategy.params]
kappa = 0.02
beta = 0.04
sigma_x = 0.5
[experiment]
epsilons = [0.02, 0.05, 0.1, 0.2, 0.5]
"#;

fn parse(text: &str) -> notrade::Result<RunConfig> {
    RunConfig::from_toml_str(text, Path::new("."), &Registry::builtin())
}

fn key_of(e: Error) -> String {
    match e {
        Error::Config { key, .. } => key,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let cfg = parse(MINIMAL).unwrap();
    assert_eq!(cfg.market.gearing, 1e6);
    assert_eq!(cfg.market.annualization, 252.0);
    assert_eq!(cfg.market.cost_convention, CostConvention::Dollars);
    assert_eq!(cfg.experiment.lambdas, default_lambdas());
    assert_eq!(cfg.experiment.n_seeds, 20);
    assert_eq!(cfg.experiment.risk_measures, RiskKind::ALL.to_vec());
    assert_eq!(cfg.strategy.params["n_steps"].as_integer(), Some(10_000));
}

#[test]
fn round_trip() {
    let cfg = parse(MINIMAL).unwrap();
    let text = cfg.to_toml_string();
    assert_eq!(parse(&text).unwrap(), cfg);
}

#[test]
fn lambda_grid_is_sorted_and_contains_one() {
    let cfg =
        parse(&MINIMAL.replace("[experiment]", "[experiment]\nlambdas = [4.0, 0.5, 0.0]")).unwrap();
    assert_eq!(cfg.experiment.lambdas, vec![0.0, 0.5, 1.0, 4.0]);
}

#[test]
fn errors_are_keyed() {
    let cases = [
        (
            MINIMAL.replace("epsilons = [0.02, 0.05, 0.1, 0.2, 0.5]", "epsilons = []"),
            "experiment.epsilons",
        ),
        (
            MINIMAL.replace("[0.02, 0.05", "[-0.02, 0.05"),
            "experiment.epsilons[0]",
        ),
        (
            MINIMAL.replace("[experiment]", "[experiment]\nlambdas = [-1.0]"),
            "experiment.lambdas[0]",
        ),
        (
            MINIMAL.replace("[experiment]", "[experiment]\nlambdas = [1.0, 1.0]"),
            "experiment.lambdas",
        ),
        (
            MINIMAL.replace("[experiment]", "[experiment]\nn_seeds = 0"),
            "experiment.n_seeds",
        ),
        (
            MINIMAL.replace("[experiment]", "[experiment]\ntail_prob = 0.7"),
            "experiment.tail_prob",
        ),
        (
            MINIMAL.replace("\"one_factor\"", "\"carry\""),
            "strategy.kind",
        ),
        (
            format!("{MINIMAL}\n[market]\ngearing = 0.0\n"),
            "market.gearing",
        ),
        (
            MINIMAL.replace("kappa = 0.02", "kappa = -0.02"),
            "strategy.params",
        ),
    ];
    for (text, key) in cases {
        assert_eq!(key_of(parse(&text).unwrap_err()), key, "{text}");
    }
}

#[test]
fn unknown_keys_are_rejected_with_path() {
    let e = parse(&MINIMAL.replace("[experiment]", "[experiment]\nepsilonz = 1")).unwrap_err();
    let msg = e.to_string();
    assert!(msg.contains("epsilonz"), "{msg}");
    let e = parse(&format!("{MINIMAL}\n[market]\ngearing = \"big\"\n")).unwrap_err();
    assert_eq!(key_of(e), "market.gearing");
    let e = parse(&MINIMAL.replace("[experiment]", "[experiment]\nrisk_measures = [\"cvar\"]"))
        .unwrap_err();
    assert!(key_of(e).starts_with("experiment.risk_measures"));
}

#[test]
fn missing_section() {
    let e = parse("[strategy]\nkind = \"one_factor\"\n").unwrap_err();
    assert!(e.to_string().contains("experiment"), "{e}");
}

#[test]
fn relative_paths_resolve_against_config_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("px.csv"),
        "date,price\n2020-01-02,1\n2020-01-03,2\n",
    )
    .unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(
        &path,
        "[strategy]\nkind = \"momentum\"\n[strategy.params]\nprices = \"px.csv\"\n\
         [experiment]\nepsilons = [0.1]\n[output]\ncsv = \"out.csv\"\n",
    )
    .unwrap();
    let cfg = load_config(&path, &Registry::builtin()).unwrap();
    assert_eq!(cfg.output.csv.unwrap(), dir.path().join("out.csv"));
    let prices = cfg.strategy.params["prices"].as_str().unwrap();
    assert_eq!(Path::new(prices), dir.path().join("px.csv"));
}

#[test]
fn non_utf8_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, [0xff, 0xfe, 0x00]).unwrap();
    assert!(load_config(&path, &Registry::builtin()).is_err());
}

proptest! {
    #[test]
    fn loader_is_total(text in ".{0,300}") {
        let _ = parse(&text);
    }

    #[test]
    fn loader_is_total_on_near_configs(cut in 0usize..MINIMAL.len(), junk in "[a-z=\\[\\]0-9.\" \n-]{0,20}") {
        let mut text = MINIMAL[..cut].to_string();
        text.push_str(&junk);
        text.push_str(&MINIMAL[cut..]);
        let _ = parse(&text);
    }
}
