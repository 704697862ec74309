//! P&L accounting under proportional costs and Sharpe ratios under three
//! normalized risk measures.
//!
//! VaR and ESF are rescaled by their Normal values (`Φ⁻¹(1−p)` and
//! `φ(Φ⁻¹(p))/p`) so that all three measures equal the standard deviation
//! for zero-mean Normal P&L.

use std::fmt;
use std::str::FromStr;

use crate::buffer::ExecutionResult;
use crate::error::{Error, Result};
use crate::normal;

pub const TRADING_DAYS: f64 = 252.0;
pub const DEFAULT_TAIL_PROB: f64 = 0.01;
const MIN_TAIL_OBS: usize = 30;

/// Per-step dollar P&L split into its gross and cost parts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PnlSeries {
    /// `θ_t·(X_{t+1} − X_t)`; zero at the final step.
    pub gross: Vec<f64>,
    /// `ε·|Δθ_t|`.
    pub cost: Vec<f64>,
    /// `|Δθ_t|`.
    pub turnover: Vec<f64>,
}

impl PnlSeries {
    pub fn len(&self) -> usize {
        self.gross.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gross.is_empty()
    }

    pub fn net(&self) -> Vec<f64> {
        self.gross
            .iter()
            .zip(&self.cost)
            .map(|(g, c)| g - c)
            .collect()
    }

    /// Sub-series over `start..end`.
    pub fn window(&self, start: usize, end: usize) -> PnlSeries {
        let end = end.min(self.len());
        let start = start.min(end);
        PnlSeries {
            gross: self.gross[start..end].to_vec(),
            cost: self.cost[start..end].to_vec(),
            turnover: self.turnover[start..end].to_vec(),
        }
    }

    /// The steps that carry a realized return: `start..len−1`.
    pub fn measured(&self, start: usize) -> PnlSeries {
        self.window(start, self.len().saturating_sub(1))
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.net().iter().sum::<f64>() / self.len() as f64
    }

    pub fn traded(&self) -> bool {
        self.turnover.iter().any(|&q| q > 0.0)
    }
}

/// Book the P&L of an execution against a price path.
///
/// The position held after the trade at `t` earns `X_{t+1} − X_t`; the trade
/// at `t` is charged `ε·|Δθ_t|` at `t`.
pub fn compute_pnl(execution: &ExecutionResult, prices: &[f64], epsilon: f64) -> Result<PnlSeries> {
    if execution.len() != prices.len() || execution.trades.len() != prices.len() {
        return Err(Error::domain(format!(
            "execution has {} steps but price series has {}",
            execution.len(),
            prices.len()
        )));
    }
    if !(epsilon.is_finite() && epsilon >= 0.0) {
        return Err(Error::domain(format!(
            "epsilon must be >= 0, got {epsilon}"
        )));
    }
    let n = prices.len();
    let gross = (0..n)
        .map(|t| {
            if t + 1 < n {
                execution.positions[t] * (prices[t + 1] - prices[t])
            } else {
                0.0
            }
        })
        .collect();
    let turnover: Vec<f64> = execution.trades.iter().map(|d| d.abs()).collect();
    let cost = turnover.iter().map(|q| epsilon * q).collect();
    Ok(PnlSeries {
        gross,
        cost,
        turnover,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RiskKind {
    Stdev,
    Var,
    Esf,
}

impl RiskKind {
    pub const ALL: [RiskKind; 3] = [RiskKind::Stdev, RiskKind::Var, RiskKind::Esf];

    pub fn name(self) -> &'static str {
        match self {
            RiskKind::Stdev => "stdev",
            RiskKind::Var => "var",
            RiskKind::Esf => "esf",
        }
    }
}

impl fmt::Display for RiskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RiskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stdev" => Ok(RiskKind::Stdev),
            "var" => Ok(RiskKind::Var),
            "esf" => Ok(RiskKind::Esf),
            other => Err(Error::Unknown {
                kind: "risk measure",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskMeasure {
    pub kind: RiskKind,
    /// Tail probability for VaR and ESF.
    pub p: f64,
}

impl RiskMeasure {
    pub fn new(kind: RiskKind, p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 0.5) {
            return Err(Error::domain(format!(
                "tail probability must lie in (0, 0.5), got {p}"
            )));
        }
        Ok(Self { kind, p })
    }

    pub fn stdev() -> Self {
        Self {
            kind: RiskKind::Stdev,
            p: DEFAULT_TAIL_PROB,
        }
    }

    pub fn var() -> Self {
        Self {
            kind: RiskKind::Var,
            p: DEFAULT_TAIL_PROB,
        }
    }

    pub fn esf() -> Self {
        Self {
            kind: RiskKind::Esf,
            p: DEFAULT_TAIL_PROB,
        }
    }
}

/// Sample standard deviation (`n − 1` denominator).
pub fn stdev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Quantile with linear interpolation between order statistics of `sorted`.
fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Raw tail statistics of losses `−p_t`: the `(1−p)` quantile and the mean of
/// losses at or beyond it.
pub fn tail_losses(pnl: &[f64], p: f64) -> Result<(f64, f64)> {
    if pnl.len() < MIN_TAIL_OBS {
        return Err(Error::domain(format!(
            "{} observations; tail measures need at least {MIN_TAIL_OBS}",
            pnl.len()
        )));
    }
    let mut losses: Vec<f64> = pnl.iter().map(|v| -v).collect();
    losses.sort_by(f64::total_cmp);
    let var = interpolated_quantile(&losses, 1.0 - p);
    let tail: Vec<f64> = losses.iter().copied().filter(|&l| l >= var).collect();
    let esf = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok((var, esf))
}

/// Risk of a P&L sample in dollars per step, normalized to the stdev scale.
pub fn risk_of(pnl: &[f64], measure: RiskMeasure) -> Result<f64> {
    match measure.kind {
        RiskKind::Stdev => {
            if pnl.len() < 2 {
                return Err(Error::domain("stdev needs at least two observations"));
            }
            Ok(stdev(pnl))
        }
        RiskKind::Var => Ok(tail_losses(pnl, measure.p)?.0 / normal::var_scale(measure.p)),
        RiskKind::Esf => Ok(tail_losses(pnl, measure.p)?.1 / normal::esf_scale(measure.p)),
    }
}

pub fn risk(pnl: &PnlSeries, measure: RiskMeasure) -> Result<f64> {
    risk_of(&pnl.net(), measure)
}

/// Mean over risk of a raw P&L sample, times `√annualization`. `None` when
/// the risk is not strictly positive.
pub fn sharpe_of(pnl: &[f64], measure: RiskMeasure, annualization: f64) -> Result<Option<f64>> {
    let r = risk_of(pnl, measure)?;
    if !(r > 0.0 && r.is_finite()) {
        return Ok(None);
    }
    let mean = pnl.iter().sum::<f64>() / pnl.len() as f64;
    Ok(Some(mean / r * annualization.sqrt()))
}

/// Sharpe ratio of a backtest; `None` when nothing traded or the risk is zero.
pub fn sharpe(pnl: &PnlSeries, measure: RiskMeasure, annualization: f64) -> Result<Option<f64>> {
    if !(annualization.is_finite() && annualization > 0.0) {
        return Err(Error::domain("annualization must be > 0"));
    }
    if !pnl.traded() {
        return Ok(None);
    }
    sharpe_of(&pnl.net(), measure, annualization)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::rng;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal, StudentT};

    fn exec(positions: Vec<f64>) -> ExecutionResult {
        let mut prev = 0.0;
        let trades: Vec<f64> = positions
            .iter()
            .map(|&p| {
                let d = p - prev;
                prev = p;
                d
            })
            .collect();
        ExecutionResult {
            costs: vec![0.0; positions.len()],
            band: vec![0.0; positions.len()],
            trades,
            positions,
        }
    }

    #[test]
    fn flat_book_has_no_pnl() {
        let pnl = compute_pnl(&exec(vec![0.0; 4]), &[1.0, 3.0, 2.0, 5.0], 0.7).unwrap();
        assert!(pnl.net().iter().all(|&v| v == 0.0));
        assert!(!pnl.traded());
    }

    #[test]
    fn unit_position_earns_price_change() {
        let pnl = compute_pnl(&exec(vec![1.0, 1.0]), &[100.0, 101.0], 0.0).unwrap();
        assert_eq!(pnl.net()[0], 1.0);
        assert_eq!(pnl.measured(0).net(), vec![1.0]);
    }

    #[test]
    fn round_trip_costs_twice_epsilon() {
        let q = 7.5;
        let eps = 0.3;
        let pnl = compute_pnl(
            &exec(vec![0.0, q, q, q, 0.0]),
            &[1.0, 4.0, -2.0, 9.0, 3.0],
            eps,
        )
        .unwrap();
        assert_relative_eq!(pnl.total_cost(), 2.0 * eps * q, max_relative = 1e-15);
    }

    #[test]
    fn length_mismatch() {
        assert!(compute_pnl(&exec(vec![0.0; 3]), &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn normal_sample_measures_agree() {
        let mut r = rng(12345);
        let d = Normal::new(0.0, 1.0).unwrap();
        let x: Vec<f64> = (0..1_000_000).map(|_| d.sample(&mut r)).collect();
        for m in [RiskMeasure::stdev(), RiskMeasure::var(), RiskMeasure::esf()] {
            let v = risk_of(&x, m).unwrap();
            assert!((0.97..=1.03).contains(&v), "{:?}: {v}", m.kind);
        }
    }

    #[test]
    fn fat_tails_raise_tail_risk() {
        let mut r = rng(777);
        let t = StudentT::new(4.0).unwrap();
        // Student-t(4) has variance 2
        let x: Vec<f64> = (0..200_000)
            .map(|_| t.sample(&mut r) / 2f64.sqrt())
            .collect();
        let s = risk_of(&x, RiskMeasure::stdev()).unwrap();
        assert!(risk_of(&x, RiskMeasure::var()).unwrap() > s);
        assert!(risk_of(&x, RiskMeasure::esf()).unwrap() > s);
    }

    #[test]
    fn constant_pnl_has_zero_stdev() {
        assert_eq!(risk_of(&[3.0; 50], RiskMeasure::stdev()).unwrap(), 0.0);
        assert_eq!(
            sharpe_of(&[3.0; 50], RiskMeasure::stdev(), 252.0).unwrap(),
            None
        );
    }

    #[test]
    fn tail_measures_need_enough_data() {
        assert!(risk_of(&[1.0; 29], RiskMeasure::var()).is_err());
        assert!(risk_of(&[1.0; 29], RiskMeasure::esf()).is_err());
        assert!(risk_of(&[1.0], RiskMeasure::stdev()).is_err());
        assert!(RiskMeasure::new(RiskKind::Var, 0.5).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        // losses 1..=100; 0.99 quantile at h = 99·0.99 = 98.01
        let pnl: Vec<f64> = (1..=100).map(|v| -(v as f64)).collect();
        let (var, esf) = tail_losses(&pnl, 0.01).unwrap();
        assert_relative_eq!(var, 99.01, max_relative = 1e-12);
        assert_relative_eq!(esf, 100.0, max_relative = 1e-12);
    }

    #[test]
    fn idle_book_has_undefined_sharpe() {
        let pnl = PnlSeries {
            gross: vec![0.0; 40],
            cost: vec![0.0; 40],
            turnover: vec![0.0; 40],
        };
        for m in [RiskMeasure::stdev(), RiskMeasure::var(), RiskMeasure::esf()] {
            assert_eq!(sharpe(&pnl, m, 252.0).unwrap(), None);
        }
    }

    #[test]
    fn risk_kind_names_round_trip() {
        for k in RiskKind::ALL {
            assert_eq!(k.name().parse::<RiskKind>().unwrap(), k);
        }
        assert!("vol".parse::<RiskKind>().is_err());
    }

    fn sample(seed: u64, n: usize) -> PnlSeries {
        let mut r = rng(seed);
        let d = Normal::new(0.2, 1.0).unwrap();
        PnlSeries {
            gross: (0..n).map(|_| d.sample(&mut r)).collect(),
            cost: (0..n).map(|_| d.sample(&mut r).abs() * 0.1).collect(),
            turnover: vec![1.0; n],
        }
    }

    proptest! {
        #[test]
        fn sharpe_is_scale_invariant(seed in 0u64..500, c in 0.01f64..100.0) {
            let pnl = sample(seed, 200);
            let scaled = PnlSeries {
                gross: pnl.gross.iter().map(|v| c * v).collect(),
                cost: pnl.cost.iter().map(|v| c * v).collect(),
                turnover: pnl.turnover.iter().map(|v| c * v).collect(),
            };
            for m in [RiskMeasure::stdev(), RiskMeasure::var(), RiskMeasure::esf()] {
                let a = sharpe(&pnl, m, 252.0).unwrap().unwrap();
                let b = sharpe(&scaled, m, 252.0).unwrap().unwrap();
                prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
                let ra = risk(&pnl, m).unwrap();
                prop_assert!((risk(&scaled, m).unwrap() - c * ra).abs() <= 1e-12 * c * ra);
            }
        }

        #[test]
        fn costs_never_help(seed in 0u64..500, e1 in 0.0f64..1.0, extra in 0.0f64..1.0) {
            let positions: Vec<f64> = sample(seed, 60).gross;
            let prices: Vec<f64> = sample(seed + 1, 60).gross;
            let ex = exec(positions);
            let lo: f64 = compute_pnl(&ex, &prices, e1).unwrap().net().iter().sum();
            let hi: f64 = compute_pnl(&ex, &prices, e1 + extra).unwrap().net().iter().sum();
            prop_assert!(hi <= lo);
        }

        #[test]
        fn esf_dominates_var(x in prop::collection::vec(-100.0f64..100.0, 30..300), p in 0.005f64..0.2) {
            let v = risk_of(&x, RiskMeasure::new(RiskKind::Var, p).unwrap()).unwrap();
            let e = risk_of(&x, RiskMeasure::new(RiskKind::Esf, p).unwrap()).unwrap();
            let ratio = normal::esf_scale(p) / normal::var_scale(p);
            prop_assert!(v <= e * ratio + 1e-9 * (1.0 + v.abs()));
        }
    }
}
