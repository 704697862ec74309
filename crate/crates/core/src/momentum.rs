//! Momentum targets from EWMA crossovers of volatility-normalized returns.
//!
//! Pipeline over a price series `X_t`:
//!
//! 1. dollar returns `r_t = X_t − X_{t−1}` and an EWMA volatility `σ̂_t`;
//! 2. normalized returns `u_t = r_t / σ̂_t`;
//! 3. one unit-variance crossover signal `Z_j` per [`CrossoverSpec`];
//! 4. target `θ̂_t = G·Σ_j β_j·ψ(Z_{j,t}) / σ̂_t` with `ψ(z) = z·e^(−z²/2)`;
//! 5. `Γ̂₀²_t` from forgetting-factor sums of squared increments of `θ̂` and `X`.
//!
//! Every output at `t` depends only on prices up to `t`.

use nalgebra::{DMatrix, DVector};

use crate::buffer::TargetPath;
use crate::error::{Error, Result};

/// EWMA crossover with fast and slow periods in days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverSpec {
    pub t_fast: f64,
    pub t_slow: f64,
}

impl CrossoverSpec {
    pub fn new(t_fast: f64, t_slow: f64) -> Result<Self> {
        let s = Self { t_fast, t_slow };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_fast.is_finite() && self.t_slow.is_finite()) {
            return Err(Error::domain("crossover periods must be finite"));
        }
        if !(self.t_fast > 0.0 && self.t_fast < self.t_slow) {
            return Err(Error::domain(format!(
                "crossover needs 0 < t_fast < t_slow, got {}:{}",
                self.t_fast, self.t_slow
            )));
        }
        Ok(())
    }

    /// The 2:4, 4:8, 8:16 and 16:32 day crossovers.
    pub fn standard_set() -> Vec<CrossoverSpec> {
        [(2.0, 4.0), (4.0, 8.0), (8.0, 16.0), (16.0, 32.0)]
            .into_iter()
            .map(|(t_fast, t_slow)| CrossoverSpec { t_fast, t_slow })
            .collect()
    }

    fn decays(&self) -> (f64, f64) {
        ((-1.0 / self.t_fast).exp(), (-1.0 / self.t_slow).exp())
    }

    /// Scale `c` making `Var(c·(S − F)) = 1` on iid unit-variance input.
    pub fn normalization(&self) -> f64 {
        let (af, as_) = self.decays();
        let raw = 1.0 / (1.0 - as_ * as_) + 1.0 / (1.0 - af * af) - 2.0 / (1.0 - as_ * af);
        raw.sqrt().recip()
    }

    /// Continuous-time kernel `K(τ)` with unit `∫K²`.
    pub fn continuous_kernel(&self, tau: f64) -> f64 {
        let (tf, ts) = (self.t_fast, self.t_slow);
        let pref = (2.0 * (ts + tf)).sqrt() / (ts - tf).abs();
        pref * ((-tau / ts).exp() - (-tau / tf).exp())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumConfig {
    pub crossovers: Vec<CrossoverSpec>,
    /// One `β_j` per crossover.
    pub weights: Vec<f64>,
    /// EWMA period for `σ̂`, in days.
    pub vol_period: f64,
    /// `σ̂` floor as a fraction of the running mean absolute return.
    pub vol_floor_frac: f64,
    /// Forgetting factor `α` for `Γ̂₀²`.
    pub gamma_alpha: f64,
    /// Accumulated weight `Σαⁿ` needed before `Γ̂₀²` is reported.
    pub gamma_min_weight: f64,
    /// Steps excluded from measurement.
    pub warmup: usize,
}

impl Default for MomentumConfig {
    fn default() -> Self {
        let crossovers = CrossoverSpec::standard_set();
        let weights = equal_weights(crossovers.len(), DEFAULT_WEIGHT_SCALE);
        Self {
            crossovers,
            weights,
            vol_period: 32.0,
            vol_floor_frac: 1e-6,
            gamma_alpha: 1.0 - 1.0 / 32.0,
            gamma_min_weight: 16.0,
            warmup: 100,
        }
    }
}

pub const DEFAULT_WEIGHT_SCALE: f64 = 0.04;

/// `n` equal weights summing to `scale`.
pub fn equal_weights(n: usize, scale: f64) -> Vec<f64> {
    vec![scale / n as f64; n]
}

impl MomentumConfig {
    pub fn validate(&self) -> Result<()> {
        if self.crossovers.is_empty() {
            return Err(Error::domain(
                "momentum config needs at least one crossover",
            ));
        }
        for c in &self.crossovers {
            c.validate()?;
        }
        if self.weights.len() != self.crossovers.len() {
            return Err(Error::domain(format!(
                "{} weights for {} crossovers",
                self.weights.len(),
                self.crossovers.len()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::domain("weights must be finite"));
        }
        if !(self.gamma_alpha > 0.0 && self.gamma_alpha < 1.0) {
            return Err(Error::domain(format!(
                "gamma_alpha must lie in (0, 1), got {}",
                self.gamma_alpha
            )));
        }
        if !(self.vol_period >= 2.0 && self.vol_period.is_finite()) {
            return Err(Error::domain(format!(
                "vol_period must be >= 2, got {}",
                self.vol_period
            )));
        }
        if !(self.vol_floor_frac >= 0.0 && self.vol_floor_frac.is_finite()) {
            return Err(Error::domain("vol_floor_frac must be >= 0"));
        }
        if !(self.gamma_min_weight >= 0.0) {
            return Err(Error::domain("gamma_min_weight must be >= 0"));
        }
        Ok(())
    }
}

/// EWMA volatility of dollar returns:
/// `σ̂²_t = (1 − 1/P)·σ̂²_{t−1} + (1/P)·r_t²`, seeded with `r_0²`, floored at
/// `floor_frac` times the running mean of `|r|`.
///
/// Leading zero returns give `σ̂ = 0`; callers treat those steps as carrying
/// no signal.
pub fn ewma_volatility(returns: &[f64], period: f64, floor_frac: f64) -> Result<Vec<f64>> {
    if returns.is_empty() {
        return Err(Error::domain("no returns to estimate volatility from"));
    }
    if !(period >= 2.0 && period.is_finite()) {
        return Err(Error::domain(format!(
            "vol period must be >= 2, got {period}"
        )));
    }
    if let Some(t) = returns.iter().position(|r| !r.is_finite()) {
        return Err(Error::domain(format!("non-finite return at step {t}")));
    }
    if returns.iter().all(|&r| r == 0.0) {
        return Err(Error::domain(
            "all returns are zero; volatility estimate would be zero",
        ));
    }
    let w = 1.0 / period;
    let mut var = returns[0] * returns[0];
    let mut abs_sum = 0.0;
    let mut out = Vec::with_capacity(returns.len());
    for (t, &r) in returns.iter().enumerate() {
        if t > 0 {
            var = (1.0 - w) * var + w * r * r;
        }
        abs_sum += r.abs();
        let floor = floor_frac * abs_sum / (t + 1) as f64;
        out.push(var.sqrt().max(floor));
    }
    Ok(out)
}

/// Unit-variance crossover signal `Z_t = c·(S_t − F_t)` with
/// `S_t = a_s·S_{t−1} + u_t` and `F_t = a_f·F_{t−1} + u_t`.
pub fn crossover_signal(norm_returns: &[f64], spec: &CrossoverSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let (af, as_) = spec.decays();
    let c = spec.normalization();
    let (mut slow, mut fast) = (0.0, 0.0);
    Ok(norm_returns
        .iter()
        .map(|&u| {
            slow = as_ * slow + u;
            fast = af * fast + u;
            c * (slow - fast)
        })
        .collect())
}

/// `ψ(z) = z·e^(−z²/2)`.
pub fn response(z: f64) -> f64 {
    z * (-0.5 * z * z).exp()
}

/// `θ̂_t = G·Σ_j β_j·ψ(Z_{j,t}) / σ̂_t`; zero where `σ̂_t = 0`.
pub fn target_momentum(
    signals: &[Vec<f64>],
    weights: &[f64],
    sigma_hat: &[f64],
    gearing: f64,
) -> Result<Vec<f64>> {
    if signals.len() != weights.len() {
        return Err(Error::domain(format!(
            "{} signals for {} weights",
            signals.len(),
            weights.len()
        )));
    }
    if let Some(s) = signals.iter().find(|s| s.len() != sigma_hat.len()) {
        return Err(Error::domain(format!(
            "signal length {} does not match volatility length {}",
            s.len(),
            sigma_hat.len()
        )));
    }
    if !(gearing.is_finite() && gearing > 0.0) {
        return Err(Error::domain(format!("gearing must be > 0, got {gearing}")));
    }
    Ok(sigma_hat
        .iter()
        .enumerate()
        .map(|(t, &sig)| {
            if sig > 0.0 {
                let drive: f64 = signals
                    .iter()
                    .zip(weights)
                    .map(|(z, b)| b * response(z[t]))
                    .sum();
                gearing * drive / sig
            } else {
                0.0
            }
        })
        .collect())
}

/// Forgetting-factor estimate of `Γ̂₀²_t`:
///
/// ```text
/// Σ αⁿ (θ̂_{t−n} − θ̂_{t−n−1})²  /  Σ αⁿ (X_{t−n} − X_{t−n−1})²
/// ```
///
/// `None` until the accumulated weight `Σαⁿ` reaches `min_weight`, or while
/// the denominator is zero.
pub fn empirical_gamma0_sq(
    theta_hat: &[f64],
    x: &[f64],
    alpha: f64,
    min_weight: f64,
) -> Result<Vec<Option<f64>>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if theta_hat.len() != x.len() {
        return Err(Error::domain(format!(
            "target length {} does not match price length {}",
            theta_hat.len(),
            x.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::domain("need at least two observations"));
    }
    let (mut num, mut den, mut mass) = (0.0, 0.0, 0.0);
    let mut out = Vec::with_capacity(x.len());
    out.push(None);
    for t in 1..x.len() {
        let dth = theta_hat[t] - theta_hat[t - 1];
        let dx = x[t] - x[t - 1];
        num = alpha * num + dth * dth;
        den = alpha * den + dx * dx;
        mass = alpha * mass + 1.0;
        out.push((mass >= min_weight && den > 0.0).then(|| num / den));
    }
    Ok(out)
}

/// Ridge regression of forward normalized returns on response series.
///
/// Solves `(XᵀX + ridge·diag(XᵀX))·β = Xᵀy`.
pub fn fit_weights(responses: &[Vec<f64>], forward: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let m = responses.len();
    let n = forward.len();
    if m == 0 {
        return Err(Error::domain("no factors to fit"));
    }
    if responses.iter().any(|s| s.len() != n) {
        return Err(Error::domain("factor and return series are misaligned"));
    }
    if n < 10 * m {
        return Err(Error::domain(format!(
            "{n} observations for {m} factors; need at least {}",
            10 * m
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::domain("ridge penalty must be >= 0"));
    }
    let design = DMatrix::from_fn(n, m, |i, j| responses[j][i]);
    let y = DVector::from_column_slice(forward);
    let mut gram = design.transpose() * &design;
    let rhs = design.transpose() * y;
    let scale = gram.diagonal().max();
    if scale == 0.0 {
        return Err(Error::domain("design matrix is identically zero"));
    }
    for j in 0..m {
        gram[(j, j)] *= 1.0 + ridge;
    }
    let rank_deficient = || Error::domain("design matrix is rank deficient; add a ridge penalty");
    let chol = gram.cholesky().ok_or_else(rank_deficient)?;
    let min_pivot = chol
        .l()
        .diagonal()
        .iter()
        .map(|d| d * d)
        .fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-12 * scale {
        return Err(rank_deficient());
    }
    Ok(chol.solve(&rhs).iter().copied().collect())
}

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Intermediate series of the momentum pipeline, aligned with the prices.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSignals {
    /// `r_0 = 0`, `r_t = X_t − X_{t−1}`.
    pub returns: Vec<f64>,
    pub sigma_hat: Vec<f64>,
    pub norm_returns: Vec<f64>,
    /// One `Z` series per crossover.
    pub signals: Vec<Vec<f64>>,
}

impl MomentumSignals {
    pub fn compute(prices: &[f64], config: &MomentumConfig) -> Result<Self> {
        config.validate()?;
        if prices.len() < 2 {
            return Err(Error::domain("need at least two prices"));
        }
        let returns: Vec<f64> = std::iter::once(0.0)
            .chain(prices.windows(2).map(|w| w[1] - w[0]))
            .collect();
        // no estimate exists before the first return
        let mut sigma_hat =
            ewma_volatility(&returns[1..], config.vol_period, config.vol_floor_frac)?;
        sigma_hat.insert(0, 0.0);
        let norm_returns: Vec<f64> = returns
            .iter()
            .zip(&sigma_hat)
            .map(|(&r, &s)| if s > 0.0 { r / s } else { 0.0 })
            .collect();
        let signals = config
            .crossovers
            .iter()
            .map(|c| crossover_signal(&norm_returns, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            returns,
            sigma_hat,
            norm_returns,
            signals,
        })
    }

    pub fn responses(&self) -> Vec<Vec<f64>> {
        self.signals
            .iter()
            .map(|z| z.iter().map(|&v| response(v)).collect())
            .collect()
    }

    /// Regress `u_{t+1}` on `ψ(Z_{j,t})` over `t ≥ warmup`.
    pub fn fit_weights(&self, warmup: usize, ridge: f64) -> Result<Vec<f64>> {
        let n = self.norm_returns.len();
        if warmup + 1 >= n {
            return Err(Error::domain("warm-up leaves no observations to fit"));
        }
        let responses: Vec<Vec<f64>> = self
            .responses()
            .into_iter()
            .map(|s| s[warmup..n - 1].to_vec())
            .collect();
        fit_weights(&responses, &self.norm_returns[warmup + 1..], ridge)
    }
}

/// Full momentum pipeline: prices to a [`TargetPath`] with empirical `Γ̂₀²`.
///
/// Steps where `Γ̂₀²` is not yet defined carry zero (the band collapses onto
/// the target) and are pushed into the warm-up.
pub fn momentum_targets(
    prices: &[f64],
    config: &MomentumConfig,
    gearing: f64,
) -> Result<TargetPath> {
    let sig = MomentumSignals::compute(prices, config)?;
    let target = target_momentum(&sig.signals, &config.weights, &sig.sigma_hat, gearing)?;
    let gamma = empirical_gamma0_sq(&target, prices, config.gamma_alpha, config.gamma_min_weight)?;
    let first_valid = gamma
        .iter()
        .position(Option::is_some)
        .unwrap_or(gamma.len());
    Ok(TargetPath {
        target,
        gamma0_sq: gamma.into_iter().map(|g| g.unwrap_or(0.0)).collect(),
        sigma_x: sig.sigma_hat,
        warmup: config.warmup.max(first_valid),
    })
}
