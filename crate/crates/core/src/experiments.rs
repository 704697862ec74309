//! Lambda sweeps over the cost grid and the CSV tables they produce.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::backtest::{compute_pnl, sharpe, RiskKind, RiskMeasure};
use crate::buffer::BufferPolicy;
use crate::data_io::{cost_from_quote, RunConfig};
use crate::dp::OracleRow;
use crate::error::{Error, Result};
use crate::strategy::{Registry, Scenario, TargetModel};

/// Seed-averaged statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    /// Standard error of the mean across seeds; zero for a single seed.
    pub stderr: f64,
}

impl Estimate {
    pub fn from_samples(x: &[f64]) -> Self {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let stderr = if x.len() > 1 {
            let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub lambda: f64,
    /// Time-averaged band half-width, averaged over seeds.
    pub avg_width: f64,
    /// Indexed like [`RiskKind::ALL`]; `None` when not requested or undefined.
    pub sharpe: [Option<Estimate>; 3],
    pub mean_pnl: f64,
    pub total_cost: f64,
    /// Some requested Sharpe ratio was undefined for at least one seed.
    pub undefined: bool,
}

impl SweepPoint {
    pub fn sharpe_for(&self, kind: RiskKind) -> Option<Estimate> {
        self.sharpe[kind_index(kind)]
    }
}

fn kind_index(kind: RiskKind) -> usize {
    RiskKind::ALL.iter().position(|&k| k == kind).unwrap()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    /// Cost as quoted in the config.
    pub epsilon: f64,
    /// Dollars per unit of position.
    pub epsilon_dollars: f64,
    /// Strictly increasing in `lambda`.
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    pub fn at_lambda(&self, lambda: f64) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.lambda == lambda)
    }

    /// The `λ = 1` point.
    pub fn optimal_point(&self) -> &SweepPoint {
        self.at_lambda(1.0).expect("lambda grid always contains 1")
    }
}

/// One backtest on one seed.
#[derive(Debug, Clone, PartialEq)]
struct CellResult {
    avg_width: f64,
    sharpe: [Option<f64>; 3],
    mean_pnl: f64,
    total_cost: f64,
}

fn run_cell(
    scenario: &Scenario,
    epsilon: f64,
    lambda: f64,
    cfg: &RunConfig,
    warmup: usize,
) -> Result<CellResult> {
    let targets = scenario.targets.clone().with_warmup(warmup);
    let policy = BufferPolicy::new(epsilon, cfg.market.gearing, lambda)?;
    let exec = policy.execute(&targets, cfg.market.initial_position)?;
    let pnl = compute_pnl(&exec, &scenario.prices, epsilon)?.measured(warmup);
    let mut out = [None; 3];
    for &kind in &cfg.experiment.risk_measures {
        let m = RiskMeasure::new(kind, cfg.experiment.tail_prob)?;
        out[kind_index(kind)] = sharpe(&pnl, m, cfg.market.annualization)?;
    }
    Ok(CellResult {
        avg_width: policy.time_average_width(&targets)?,
        sharpe: out,
        mean_pnl: pnl.mean(),
        total_cost: pnl.total_cost(),
    })
}

/// Cost quotes converted to dollars per unit of position.
pub fn dollar_epsilons(cfg: &RunConfig, model: &dyn TargetModel) -> Result<Vec<f64>> {
    let reference = cfg
        .market
        .reference_price
        .or_else(|| model.reference_price())
        .unwrap_or(f64::NAN);
    cfg.experiment
        .epsilons
        .iter()
        .map(|&q| {
            cost_from_quote(
                cfg.market.cost_convention,
                q,
                reference,
                cfg.market.contract_size,
            )
        })
        .collect()
}

/// Sweep every `(ε, λ)` pair over the configured seeds.
///
/// Cells run in parallel; results are assembled in grid order so the output
/// does not depend on scheduling.
pub fn lambda_sweep(cfg: &RunConfig, registry: &Registry) -> Result<Vec<SweepCurve>> {
    let model = registry.build(&cfg.strategy.kind, &cfg.strategy.params)?;
    sweep_model(cfg, model.as_ref())
}

pub fn sweep_model(cfg: &RunConfig, model: &dyn TargetModel) -> Result<Vec<SweepCurve>> {
    let seeds = if model.is_stochastic() {
        cfg.experiment.seeds()
    } else {
        vec![cfg.experiment.base_seed]
    };
    let scenarios = seeds
        .par_iter()
        .map(|&s| model.scenario(s, cfg.market.gearing))
        .collect::<Result<Vec<_>>>()?;
    let warmup = match cfg.experiment.warmup {
        Some(w) => w,
        None => scenarios
            .iter()
            .map(|s| s.targets.warmup)
            .max()
            .unwrap_or(0),
    };
    if let Some(s) = scenarios.iter().find(|s| warmup + 2 > s.prices.len()) {
        return Err(Error::domain(format!(
            "warm-up of {warmup} leaves nothing to measure in {} steps",
            s.prices.len()
        )));
    }
    let eps_dollars = dollar_epsilons(cfg, model)?;
    let lambdas = &cfg.experiment.lambdas;
    let (ne, nl, ns) = (eps_dollars.len(), lambdas.len(), scenarios.len());

    let cells = (0..ne * nl * ns)
        .into_par_iter()
        .map(|k| {
            let (ie, rest) = (k / (nl * ns), k % (nl * ns));
            let (il, is) = (rest / ns, rest % ns);
            run_cell(&scenarios[is], eps_dollars[ie], lambdas[il], cfg, warmup)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::with_capacity(ne);
    for (ie, (&epsilon, &epsilon_dollars)) in
        cfg.experiment.epsilons.iter().zip(&eps_dollars).enumerate()
    {
        let mut points = Vec::with_capacity(nl);
        for (il, &lambda) in lambdas.iter().enumerate() {
            let base = (ie * nl + il) * ns;
            points.push(aggregate(lambda, &cells[base..base + ns], cfg));
        }
        curves.push(SweepCurve {
            epsilon,
            epsilon_dollars,
            points,
        });
    }
    Ok(curves)
}

fn aggregate(lambda: f64, cells: &[CellResult], cfg: &RunConfig) -> SweepPoint {
    let n = cells.len() as f64;
    let mean = |f: fn(&CellResult) -> f64| cells.iter().map(f).sum::<f64>() / n;
    let mut sharpe = [None; 3];
    let mut undefined = false;
    for &kind in &cfg.experiment.risk_measures {
        let i = kind_index(kind);
        let samples: Option<Vec<f64>> = cells.iter().map(|c| c.sharpe[i]).collect();
        match samples {
            Some(s) => sharpe[i] = Some(Estimate::from_samples(&s)),
            None => undefined = true,
        }
    }
    if undefined {
        sharpe = [None; 3];
    }
    SweepPoint {
        lambda,
        avg_width: mean(|c| c.avg_width),
        sharpe,
        mean_pnl: mean(|c| c.mean_pnl),
        total_cost: mean(|c| c.total_cost),
        undefined,
    }
}

pub const SWEEP_HEADER: &str =
    "epsilon,lambda,avg_width,sharpe_stdev,sharpe_var,sharpe_esf,mean_pnl,total_cost,undefined_flag";

fn opt(v: Option<Estimate>) -> String {
    v.map(|e| e.mean.to_string()).unwrap_or_default()
}

pub fn sweep_csv(curves: &[SweepCurve]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for c in curves {
        for p in &c.points {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                c.epsilon,
                p.lambda,
                p.avg_width,
                opt(p.sharpe[0]),
                opt(p.sharpe[1]),
                opt(p.sharpe[2]),
                p.mean_pnl,
                p.total_cost,
                u8::from(p.undefined)
            )
            .unwrap();
        }
    }
    s
}

pub const ORACLE_HEADER: &str = "epsilon,oracle_half_width,formula_half_width,ratio,iterations";

pub fn oracle_csv(rows: &[OracleRow]) -> String {
    let mut s = String::from(ORACLE_HEADER);
    s.push('\n');
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{}",
            r.epsilon,
            r.oracle_half_width,
            r.formula_half_width,
            r.ratio(),
            r.iterations
        )
        .unwrap();
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn config(extra: &str) -> RunConfig {
        let text = format!(
            "[strategy]\nkind = \"one_factor\"\n[strategy.params]\nkappa = 0.02\nbeta = 0.04\nsigma_x = 0.5\nn_steps = 2000\n\
             [experiment]\nepsilons = [0.0, 0.1]\nlambdas = [0.0, 0.5, 2.0]\nn_seeds = 3\n{extra}"
        );
        RunConfig::from_toml_str(&text, Path::new("."), &Registry::builtin()).unwrap()
    }

    #[test]
    fn grid_shape_and_unit_lambda() {
        let curves = lambda_sweep(&config(""), &Registry::builtin()).unwrap();
        assert_eq!(curves.len(), 2);
        for c in &curves {
            let l: Vec<f64> = c.points.iter().map(|p| p.lambda).collect();
            assert_eq!(l, vec![0.0, 0.5, 1.0, 2.0]);
            assert!(c.optimal_point().avg_width >= 0.0);
        }
    }

    #[test]
    fn zero_cost_has_zero_width_and_cost() {
        let curves = lambda_sweep(&config(""), &Registry::builtin()).unwrap();
        for p in &curves[0].points {
            assert_eq!(p.avg_width, 0.0);
            assert_eq!(p.total_cost, 0.0);
        }
        // at zero cost every λ trades straight to target
        let a = curves[0].points[0].sharpe[0].unwrap().mean;
        let b = curves[0].points[3].sharpe[0].unwrap().mean;
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }

    #[test]
    fn wider_bands_cost_less() {
        let curves = lambda_sweep(&config(""), &Registry::builtin()).unwrap();
        let costs: Vec<f64> = curves[1].points.iter().map(|p| p.total_cost).collect();
        assert!(costs.windows(2).all(|w| w[1] < w[0]), "{costs:?}");
    }

    #[test]
    fn requested_measures_only() {
        let curves =
            lambda_sweep(&config("risk_measures = [\"var\"]"), &Registry::builtin()).unwrap();
        let p = &curves[1].points[2];
        assert!(p.sharpe_for(RiskKind::Var).is_some());
        assert!(p.sharpe_for(RiskKind::Stdev).is_none());
        let csv = sweep_csv(&curves);
        assert!(csv.starts_with(SWEEP_HEADER));
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
    }

    #[test]
    fn undefined_points_are_flagged() {
        let curve = SweepCurve {
            epsilon: 1.0,
            epsilon_dollars: 1.0,
            points: vec![SweepPoint {
                lambda: 1.0,
                avg_width: 3.0,
                sharpe: [None; 3],
                mean_pnl: 0.0,
                total_cost: 0.0,
                undefined: true,
            }],
        };
        let csv = sweep_csv(&[curve]);
        assert_eq!(csv.lines().nth(1).unwrap(), "1,1,3,,,,0,0,1");
    }

    #[test]
    fn standard_error() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(e.mean, 2.5);
        assert_relative_eq!(e.stderr, (5.0f64 / 3.0 / 4.0).sqrt(), max_relative = 1e-14);
        assert_eq!(Estimate::from_samples(&[7.0]).stderr, 0.0);
    }
}
