//! Command-line front end. [`run_cli`] is the testable entry point.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::buffer::BufferParams;
use crate::data_io::{load_config, RunConfig};
use crate::dp::{self, GridSpec};
use crate::error::{Error, Result};
use crate::experiments::{lambda_sweep, oracle_csv, sweep_csv, write_text, SweepCurve};
use crate::strategy::{OneFactorSpec, Registry};
use crate::synth::OneFactorParams;

#[derive(Debug, Parser)]
#[command(
    name = "notrade",
    version,
    about = "No-trade buffers under proportional costs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Buffer half-width from ε, G and Γ̂₀².
    Calc(CalcArgs),
    /// λ sweep over a synthetic model.
    Synth(RunArgs),
    /// λ sweep of the momentum strategy on a price file.
    Momentum(MomentumArgs),
    /// Compare the cube-root law with a dynamic-programming solution.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct CalcArgs {
    /// Half-spread in dollars per unit of position.
    #[arg(long)]
    epsilon: f64,
    /// Gearing in dollars.
    #[arg(long, default_value_t = 1e6)]
    gearing: f64,
    #[arg(long, conflicts_with_all = ["sigma_theta", "sigma_x"], required_unless_present_all = ["sigma_theta", "sigma_x"])]
    gamma0_sq: Option<f64>,
    /// Daily volatility of the frictionless target (units of position).
    #[arg(long, requires = "sigma_x")]
    sigma_theta: Option<f64>,
    /// Daily dollar volatility of the asset.
    #[arg(long, requires = "sigma_theta")]
    sigma_x: Option<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// First seed; overrides `experiment.base_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV; overrides `output.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MomentumArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Price CSV; overrides `strategy.params.prices`.
    #[arg(long)]
    prices: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// One-factor config; the reference model is used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Costs in dollars per unit of position.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0125, 0.025, 0.05, 0.1])]
    epsilons: Vec<f64>,
    #[arg(long)]
    gearing: Option<f64>,
    #[arg(long, default_value_t = 101)]
    nz: usize,
    #[arg(long, default_value_t = 201)]
    ntheta: usize,
    #[arg(long, default_value_t = dp::DEFAULT_DT)]
    dt: f64,
    #[arg(long, default_value_t = dp::DEFAULT_DISCOUNT)]
    discount: f64,
    #[arg(long, default_value_t = dp::DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = dp::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Output CSV; the table is printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run_cli<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    let registry = Registry::builtin();
    match command {
        Command::Calc(a) => calc(a, out),
        Command::Synth(a) => {
            let cfg = load_run_config(&a, &registry)?;
            if cfg.strategy.kind == "momentum" {
                return Err(Error::config(
                    "strategy.kind",
                    "use the momentum subcommand for price files",
                ));
            }
            sweep(cfg, a.out, &registry, out)
        }
        Command::Momentum(a) => {
            let mut cfg = load_run_config(&a.run, &registry)?;
            if cfg.strategy.kind != "momentum" {
                return Err(Error::config("strategy.kind", "expected \"momentum\""));
            }
            if let Some(p) = a.prices {
                cfg.strategy.params.insert(
                    "prices".into(),
                    toml::Value::String(p.to_string_lossy().into_owned()),
                );
                cfg.normalize(&registry)?;
            }
            sweep(cfg, a.run.out, &registry, out)
        }
        Command::Oracle(a) => oracle(a, &registry, out),
    }
}

fn calc(a: CalcArgs, out: &mut dyn Write) -> Result<()> {
    let gamma = match (a.gamma0_sq, a.sigma_theta, a.sigma_x) {
        (Some(g), _, _) => g,
        (None, Some(st), Some(sx)) => {
            if !(sx > 0.0) {
                return Err(Error::domain("sigma-x must be > 0"));
            }
            (st / sx).powi(2)
        }
        _ => {
            return Err(Error::domain(
                "give --gamma0-sq or both --sigma-theta and --sigma-x",
            ))
        }
    };
    let w = BufferParams::new(a.epsilon, a.gearing, gamma)?.half_width();
    emit(out, &format!("half_width {w}\nrounded {}\n", w.round()))
}

fn load_run_config(a: &RunArgs, registry: &Registry) -> Result<RunConfig> {
    let mut cfg = load_config(&a.config, registry)?;
    if let Some(seed) = a.seed {
        cfg.experiment.base_seed = seed;
    }
    Ok(cfg)
}

fn sweep(
    cfg: RunConfig,
    out_path: Option<PathBuf>,
    registry: &Registry,
    out: &mut dyn Write,
) -> Result<()> {
    let curves = lambda_sweep(&cfg, registry)?;
    let csv = sweep_csv(&curves);
    match out_path.or(cfg.output.csv.clone()) {
        Some(p) => {
            write_text(&p, &csv)?;
            emit(out, &summary(&curves))?;
            emit(out, &format!("wrote {}\n", p.display()))
        }
        None => emit(out, &csv),
    }
}

/// One line per cost: width and stdev Sharpe at λ = 1, and the best λ.
fn summary(curves: &[SweepCurve]) -> String {
    let mut s = String::new();
    for c in curves {
        let p = c.optimal_point();
        let best = c
            .points
            .iter()
            .filter_map(|q| q.sharpe.iter().flatten().next().map(|e| (q.lambda, e.mean)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let sharpe = p
            .sharpe
            .iter()
            .flatten()
            .next()
            .map(|e| format!("{:.4}", e.mean))
            .unwrap_or_else(|| "undefined".into());
        let best = best
            .map(|(l, v)| format!("{l} ({v:.4})"))
            .unwrap_or_else(|| "n/a".into());
        s.push_str(&format!(
            "epsilon {}: width {:.3} sharpe {} best lambda {}\n",
            c.epsilon, p.avg_width, sharpe, best
        ));
    }
    s
}

fn oracle(a: OracleArgs, registry: &Registry, out: &mut dyn Write) -> Result<()> {
    let (model, cfg_gearing) = match &a.config {
        Some(path) => {
            let cfg = load_config(path, registry)?;
            if cfg.strategy.kind != "one_factor" {
                return Err(Error::config(
                    "strategy.kind",
                    "the oracle needs a one_factor model",
                ));
            }
            let spec: OneFactorSpec = crate::data_io::typed_from_toml(
                toml::Value::Table(cfg.strategy.params.clone()),
                "strategy.params",
            )?;
            (spec.params(), Some(cfg.market.gearing))
        }
        None => (OneFactorParams::reference(), None),
    };
    let gearing = a.gearing.or(cfg_gearing).unwrap_or(1e6);
    let theta_max = 2.0 * crate::synth::rms_target(&model, gearing);
    let grid = GridSpec::uniform(a.nz, 4.0, a.ntheta, theta_max, a.dt, a.discount)?;
    let rows = dp::oracle_table(&model, gearing, &a.epsilons, &grid, a.tol, a.max_iters)?;
    let csv = oracle_csv(&rows);
    match a.out {
        Some(p) => {
            write_text(&p, &csv)?;
            emit(out, &format!("wrote {}\n", p.display()))
        }
        None => emit(out, &csv),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}
