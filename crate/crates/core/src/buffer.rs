//! Optimal buffer half-width and the no-trade-zone execution rule.
//!
//! For a target position `θ̂_t` whose volatility relative to the traded asset
//! is `Γ̂₀ = σ_θ̂ / σ_X`, the small-cost optimal half-width of the no-trade
//! band is
//!
//! ```text
//! δθ = (3·ε·G·Γ̂₀² / 2)^(1/3)
//! ```
//!
//! with `ε` the cost per unit traded and `G` the gearing (dollars). The
//! execution rule holds the position while it sits inside
//! `[θ̂ − λδθ, θ̂ + λδθ]` and otherwise trades to the nearest edge.

use crate::error::{Error, Result};

/// Inputs to the half-width formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferParams {
    /// Dollars lost per unit of position traded.
    pub epsilon: f64,
    /// Gearing `G`, in dollars.
    pub gearing: f64,
    /// Squared ratio of target-position volatility to asset dollar volatility.
    pub gamma0_sq: f64,
}

impl BufferParams {
    pub fn new(epsilon: f64, gearing: f64, gamma0_sq: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            gearing,
            gamma0_sq,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::domain(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.gearing.is_finite() && self.gearing > 0.0) {
            return Err(Error::domain(format!(
                "gearing must be finite and > 0, got {}",
                self.gearing
            )));
        }
        if !(self.gamma0_sq.is_finite() && self.gamma0_sq >= 0.0) {
            return Err(Error::domain(format!(
                "gamma0_sq must be finite and >= 0, got {}",
                self.gamma0_sq
            )));
        }
        Ok(())
    }

    /// Half-width without re-validating; callers go through [`BufferParams::new`].
    pub fn half_width(&self) -> f64 {
        formula(self.epsilon, self.gearing, self.gamma0_sq)
    }
}

#[inline]
fn formula(epsilon: f64, gearing: f64, gamma0_sq: f64) -> f64 {
    (1.5 * epsilon * gearing * gamma0_sq).cbrt()
}

/// Optimal half-width `(3εGΓ̂₀²/2)^(1/3)` in position units.
pub fn half_width(params: &BufferParams) -> Result<f64> {
    params.validate()?;
    Ok(params.half_width())
}

/// Target position path with the per-step inputs needed to size the band.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TargetPath {
    /// Frictionless target position `θ̂_t`.
    pub target: Vec<f64>,
    /// `Γ̂₀²_t`, known at time `t`.
    pub gamma0_sq: Vec<f64>,
    /// Asset dollar volatility estimate `σ̂_X,t`.
    pub sigma_x: Vec<f64>,
    /// Leading steps excluded from performance measurement.
    pub warmup: usize,
}

impl TargetPath {
    /// Path with a constant `Γ̂₀²` and `σ_X`.
    pub fn constant(target: Vec<f64>, gamma0_sq: f64, sigma_x: f64) -> Self {
        let n = target.len();
        Self {
            target,
            gamma0_sq: vec![gamma0_sq; n],
            sigma_x: vec![sigma_x; n],
            warmup: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn with_warmup(mut self, warmup: usize) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.target.is_empty() {
            return Err(Error::domain("target path is empty"));
        }
        if self.gamma0_sq.len() != self.target.len() || self.sigma_x.len() != self.target.len() {
            return Err(Error::domain(format!(
                "target path series misaligned: target {}, gamma0_sq {}, sigma_x {}",
                self.target.len(),
                self.gamma0_sq.len(),
                self.sigma_x.len()
            )));
        }
        if let Some(t) = self.target.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite target at step {t}")));
        }
        if let Some(t) = self
            .gamma0_sq
            .iter()
            .position(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::domain(format!("invalid gamma0_sq at step {t}")));
        }
        Ok(())
    }

    /// Multiply positions by `c`; `Γ̂₀²` scales by `c²`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            target: self.target.iter().map(|v| v * c).collect(),
            gamma0_sq: self.gamma0_sq.iter().map(|v| v * c * c).collect(),
            sigma_x: self.sigma_x.clone(),
            warmup: self.warmup,
        }
    }
}

/// Realized positions after applying the band rule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExecutionResult {
    /// Post-trade position at each step.
    pub positions: Vec<f64>,
    pub trades: Vec<f64>,
    /// `ε·|trade|` in dollars.
    pub costs: Vec<f64>,
    /// The band half-width `λ·δθ_t` used at each step.
    pub band: Vec<f64>,
}

impl ExecutionResult {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Band sizing for one `(ε, G, λ)` combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferPolicy {
    pub epsilon: f64,
    pub gearing: f64,
    /// Multiplier on the optimal half-width; `0` tracks the target exactly.
    pub lambda: f64,
}

impl BufferPolicy {
    pub fn new(epsilon: f64, gearing: f64, lambda: f64) -> Result<Self> {
        BufferParams::new(epsilon, gearing, 0.0)?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::domain(format!(
                "lambda must be finite and >= 0, got {lambda}"
            )));
        }
        Ok(Self {
            epsilon,
            gearing,
            lambda,
        })
    }

    /// `λ·δθ_t` for every step of the path.
    pub fn band_half_widths(&self, targets: &TargetPath) -> Vec<f64> {
        targets
            .gamma0_sq
            .iter()
            .map(|&g| self.lambda * formula(self.epsilon, self.gearing, g))
            .collect()
    }

    pub fn execute(&self, targets: &TargetPath, initial_position: f64) -> Result<ExecutionResult> {
        targets.validate()?;
        if !initial_position.is_finite() {
            return Err(Error::domain("initial position must be finite"));
        }
        let band = self.band_half_widths(targets);
        let n = targets.len();
        let mut positions = Vec::with_capacity(n);
        let mut trades = Vec::with_capacity(n);
        let mut costs = Vec::with_capacity(n);

        let mut held = initial_position;
        for (&tgt, &w) in targets.target.iter().zip(&band) {
            // clamp leaves `held` untouched when it already lies in the closed band
            let next = held.clamp(tgt - w, tgt + w);
            let trade = next - held;
            positions.push(next);
            trades.push(trade);
            costs.push(self.epsilon * trade.abs());
            held = next;
        }
        Ok(ExecutionResult {
            positions,
            trades,
            costs,
            band,
        })
    }

    /// Mean of `λ·δθ_t` over the measured (post-warm-up) steps.
    pub fn time_average_width(&self, targets: &TargetPath) -> Result<f64> {
        let measured = targets.gamma0_sq.get(targets.warmup..).unwrap_or(&[]);
        if measured.is_empty() {
            return Err(Error::domain(
                "no measured steps to average the buffer width over",
            ));
        }
        let sum: f64 = measured
            .iter()
            .map(|&g| self.lambda * formula(self.epsilon, self.gearing, g))
            .sum();
        Ok(sum / measured.len() as f64)
    }
}

/// Run the band rule over `targets` starting from `initial_position`.
pub fn apply_buffer(
    targets: &TargetPath,
    epsilon: f64,
    gearing: f64,
    lambda: f64,
    initial_position: f64,
) -> Result<ExecutionResult> {
    BufferPolicy::new(epsilon, gearing, lambda)?.execute(targets, initial_position)
}

pub fn time_average_width(
    targets: &TargetPath,
    epsilon: f64,
    gearing: f64,
    lambda: f64,
) -> Result<f64> {
    BufferPolicy::new(epsilon, gearing, lambda)?.time_average_width(targets)
}
