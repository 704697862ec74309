use std::path::Path;

use notrade::data_io::RunConfig;
use notrade::experiments::{lambda_sweep, sweep_csv};
use notrade::strategy::Registry;

fn config() -> RunConfig {
    let text = r#"
[strategy]
kind = "one_factor"
[strategy.params]
kappa = 0.02
beta = 0.04
sigma_x = 0.5
n_steps = 3000
[experiment]
epsilons = [0.05, 0.5]
n_seeds = 4
base_seed = 9
"#;
    RunConfig::from_toml_str(text, Path::new("."), &Registry::builtin()).unwrap()
}

fn csv_with_threads(threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| sweep_csv(&lambda_sweep(&config(), &Registry::builtin()).unwrap()))
}

#[test]
fn same_bytes_across_runs_and_thread_counts() {
    let a = csv_with_threads(1);
    let b = csv_with_threads(1);
    let c = csv_with_threads(4);
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn different_seed_set_changes_output() {
    let mut cfg = config();
    let a = sweep_csv(&lambda_sweep(&cfg, &Registry::builtin()).unwrap());
    cfg.experiment.base_seed = 10;
    let b = sweep_csv(&lambda_sweep(&cfg, &Registry::builtin()).unwrap());
    assert_ne!(a, b);
}
