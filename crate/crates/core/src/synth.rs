//! Synthetic market models with known frictionless targets.
//!
//! One-factor linear model (business-day time units):
//!
//! ```text
//! dX = β·σ_X·Z dt + σ_X dW₀
//! dZ = −κ·Z dt + √(2κ) dW₁,     corr(dW₀, dW₁) = ρ₀₁
//! ```
//!
//! Zero-factor model: `dX = −b·X dt + σ dW`, i.e. the traded asset is its own factor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::buffer::TargetPath;
use crate::error::{Error, Result};

/// Generator behind every seeded path in the crate.
pub type SimRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneFactorParams {
    /// Mean-reversion rate of the factor (1/day).
    pub kappa: f64,
    /// Predictive coupling (1/√day).
    pub beta: f64,
    /// Asset dollar volatility ($/√day).
    pub sigma_x: f64,
    /// Correlation between the asset and factor drivers.
    pub rho01: f64,
    /// Step size (days).
    pub dt: f64,
}

impl OneFactorParams {
    /// κ = 0.02, β = 0.04, σ = 0.5, ρ₀₁ = 0, daily steps.
    pub fn reference() -> Self {
        Self {
            kappa: 0.02,
            beta: 0.04,
            sigma_x: 0.5,
            rho01: 0.0,
            dt: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(Error::domain(format!(
                "kappa must be > 0, got {}",
                self.kappa
            )));
        }
        if !self.beta.is_finite() {
            return Err(Error::domain("beta must be finite"));
        }
        if !(self.sigma_x.is_finite() && self.sigma_x > 0.0) {
            return Err(Error::domain(format!(
                "sigma_x must be > 0, got {}",
                self.sigma_x
            )));
        }
        if !(self.rho01.abs() <= 1.0) {
            return Err(Error::domain(format!(
                "rho01 must lie in [-1, 1], got {}",
                self.rho01
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::domain(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }

    /// Frictionless target for a given factor level.
    pub fn target_at(&self, z: f64, gearing: f64) -> f64 {
        self.beta * z * gearing / self.sigma_x
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroFactorParams {
    /// Mean-reversion rate of the asset (1/day).
    pub b: f64,
    /// Dollar volatility ($/√day).
    pub sigma: f64,
    pub dt: f64,
}

impl ZeroFactorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::domain(format!("b must be > 0, got {}", self.b)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::domain(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::domain(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

/// Asset and factor paths from the one-factor model.
#[derive(Debug, Clone, PartialEq)]
pub struct OneFactorPath {
    /// Asset price in dollars, `X₀ = 0`.
    pub x: Vec<f64>,
    /// Standardized factor, started from its stationary law.
    pub z: Vec<f64>,
}

/// Simulate `n_steps` points of the one-factor model.
///
/// The factor uses the exact OU transition
/// `Z' = Z·e^(−κ·dt) + √(1 − e^(−2κ·dt))·ξ`; the asset increment over the
/// same step is `β·σ_X·Z·dt + σ_X·√dt·ζ` with `corr(ξ, ζ) = ρ₀₁`.
pub fn simulate_one_factor(
    params: &OneFactorParams,
    n_steps: usize,
    seed: u64,
) -> Result<OneFactorPath> {
    params.validate()?;
    let mut rng = rng(seed);
    let decay = (-params.kappa * params.dt).exp();
    let shock = (1.0 - decay * decay).sqrt();
    let rho = params.rho01;
    let rho_c = (1.0 - rho * rho).sqrt();
    let vol = params.sigma_x * params.dt.sqrt();
    let drift = params.beta * params.sigma_x * params.dt;

    let mut x = Vec::with_capacity(n_steps);
    let mut z = Vec::with_capacity(n_steps);
    if n_steps == 0 {
        return Ok(OneFactorPath { x, z });
    }
    let mut zt: f64 = StandardNormal.sample(&mut rng);
    let mut xt = 0.0;
    x.push(xt);
    z.push(zt);
    for _ in 1..n_steps {
        let xi: f64 = StandardNormal.sample(&mut rng);
        let eta: f64 = StandardNormal.sample(&mut rng);
        // Cholesky of [[1, ρ], [ρ, 1]]
        let zeta = rho * xi + rho_c * eta;
        xt += drift * zt + vol * zeta;
        zt = zt * decay + shock * xi;
        x.push(xt);
        z.push(zt);
    }
    Ok(OneFactorPath { x, z })
}

/// `θ̂_t = β·Z_t·G/σ_X` with the constant closed-form `Γ̂₀²` attached.
pub fn target_one_factor(z: &[f64], params: &OneFactorParams, gearing: f64) -> Result<TargetPath> {
    params.validate()?;
    check_gearing(gearing)?;
    let target = z.iter().map(|&zt| params.target_at(zt, gearing)).collect();
    Ok(TargetPath::constant(
        target,
        theoretical_gamma0_sq(params, gearing),
        params.sigma_x,
    ))
}

/// `Γ̂₀² = 2β²κG²/σ_X⁴`.
pub fn theoretical_gamma0_sq(params: &OneFactorParams, gearing: f64) -> f64 {
    2.0 * params.beta * params.beta * params.kappa * gearing * gearing / params.sigma_x.powi(4)
}

/// Frictionless Sharpe ratio `|β|·√T` for `T`-day returns.
pub fn theoretical_sharpe(beta: f64, horizon_days: f64) -> Result<f64> {
    if !(horizon_days.is_finite() && horizon_days > 0.0) {
        return Err(Error::domain(format!(
            "horizon must be > 0, got {horizon_days}"
        )));
    }
    Ok(beta.abs() * horizon_days.sqrt())
}

/// Root-mean-square frictionless position `G·|β|/σ_X`.
pub fn rms_target(params: &OneFactorParams, gearing: f64) -> f64 {
    gearing * params.beta.abs() / params.sigma_x
}

/// Simulate the zero-factor OU asset, started from its stationary law.
pub fn simulate_zero_factor(
    params: &ZeroFactorParams,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    params.validate()?;
    let mut rng = rng(seed);
    let decay = (-params.b * params.dt).exp();
    let stationary_sd = params.sigma / (2.0 * params.b).sqrt();
    let shock = stationary_sd * (1.0 - decay * decay).sqrt();
    let mut x = Vec::with_capacity(n_steps);
    if n_steps == 0 {
        return Ok(x);
    }
    let first: f64 = StandardNormal.sample(&mut rng);
    let mut xt = stationary_sd * first;
    x.push(xt);
    for _ in 1..n_steps {
        let xi: f64 = StandardNormal.sample(&mut rng);
        xt = xt * decay + shock * xi;
        x.push(xt);
    }
    Ok(x)
}

/// `θ̂_t = −b·X_t·G/σ²` with `Γ̂₀² = b²G²/σ⁴` (σ_θ̂ = bG/σ over σ_X = σ).
pub fn target_zero_factor(
    x: &[f64],
    params: &ZeroFactorParams,
    gearing: f64,
) -> Result<TargetPath> {
    params.validate()?;
    check_gearing(gearing)?;
    let s2 = params.sigma * params.sigma;
    let target = x.iter().map(|&xt| -params.b * xt * gearing / s2).collect();
    let gamma = (params.b * gearing / s2).powi(2);
    Ok(TargetPath::constant(target, gamma, params.sigma))
}

fn check_gearing(gearing: f64) -> Result<()> {
    if gearing.is_finite() && gearing > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("gearing must be > 0, got {gearing}")))
    }
}
