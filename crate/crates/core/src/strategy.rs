//! Target-position models selected by name.
//!
//! Each factory owns the schema of its `[strategy.params]` table, so adding a
//! model means implementing [`ModelFactory`] and registering it.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::buffer::TargetPath;
use crate::data_io::{load_price_csv, typed_from_toml, PriceSeries};
use crate::error::{Error, Result};
use crate::momentum::{self, CrossoverSpec, MomentumConfig};
use crate::synth::{self, OneFactorParams, ZeroFactorParams};

/// Prices and the frictionless targets derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub prices: Vec<f64>,
    pub targets: TargetPath,
}

pub trait TargetModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// False when every seed yields the same scenario.
    fn is_stochastic(&self) -> bool;

    fn scenario(&self, seed: u64, gearing: f64) -> Result<Scenario>;

    /// Price used to convert fractional cost quotes, if the model has one.
    fn reference_price(&self) -> Option<f64> {
        None
    }
}

pub trait ModelFactory: Send + Sync {
    fn name(&self) -> &'static str;

    /// Validate `params` and return them with every default filled in.
    /// Errors are keyed under `prefix`.
    fn normalize(&self, params: &toml::Table, prefix: &str) -> Result<toml::Table>;

    fn build(&self, params: &toml::Table) -> Result<Box<dyn TargetModel>>;
}

pub struct Registry {
    factories: BTreeMap<&'static str, Box<dyn ModelFactory>>,
}

impl Registry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    /// `one_factor`, `zero_factor` and `momentum`.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(OneFactorFactory));
        r.register(Box::new(ZeroFactorFactory));
        r.register(Box::new(MomentumFactory));
        r
    }

    pub fn register(&mut self, factory: Box<dyn ModelFactory>) {
        self.factories.insert(factory.name(), factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn ModelFactory> {
        self.factories
            .get(name)
            .map(|f| f.as_ref())
            .ok_or_else(|| Error::Unknown {
                kind: "model",
                name: name.to_string(),
            })
    }

    pub fn build(&self, name: &str, params: &toml::Table) -> Result<Box<dyn TargetModel>> {
        let factory = self.get(name)?;
        let params = factory.normalize(params, "strategy.params")?;
        factory.build(&params)
    }
}

impl Default for Registry {
    fn default() -> Self {
        Self::builtin()
    }
}

fn typed<T: DeserializeOwned>(params: &toml::Table, prefix: &str) -> Result<T> {
    typed_from_toml(toml::Value::Table(params.clone()), prefix)
}

fn to_table<T: Serialize>(value: &T) -> toml::Table {
    toml::Table::try_from(value).expect("model parameters serialize to a table")
}

fn domain_to_config(prefix: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Domain(msg) => Error::config(prefix, msg),
        other => other,
    }
}

fn default_dt() -> f64 {
    1.0
}

fn default_n_steps() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneFactorSpec {
    pub kappa: f64,
    pub beta: f64,
    pub sigma_x: f64,
    #[serde(default)]
    pub rho01: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
}

impl OneFactorSpec {
    pub fn params(&self) -> OneFactorParams {
        OneFactorParams {
            kappa: self.kappa,
            beta: self.beta,
            sigma_x: self.sigma_x,
            rho01: self.rho01,
            dt: self.dt,
        }
    }
}

pub struct OneFactorModel {
    pub spec: OneFactorSpec,
}

impl TargetModel for OneFactorModel {
    fn name(&self) -> &'static str {
        "one_factor"
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn scenario(&self, seed: u64, gearing: f64) -> Result<Scenario> {
        let p = self.spec.params();
        let path = synth::simulate_one_factor(&p, self.spec.n_steps, seed)?;
        let targets = synth::target_one_factor(&path.z, &p, gearing)?;
        Ok(Scenario {
            prices: path.x,
            targets,
        })
    }
}

pub struct OneFactorFactory;

impl ModelFactory for OneFactorFactory {
    fn name(&self) -> &'static str {
        "one_factor"
    }

    fn normalize(&self, params: &toml::Table, prefix: &str) -> Result<toml::Table> {
        let spec: OneFactorSpec = typed(params, prefix)?;
        spec.params().validate().map_err(domain_to_config(prefix))?;
        if spec.n_steps < 2 {
            return Err(Error::config(format!("{prefix}.n_steps"), "must be >= 2"));
        }
        Ok(to_table(&spec))
    }

    fn build(&self, params: &toml::Table) -> Result<Box<dyn TargetModel>> {
        Ok(Box::new(OneFactorModel {
            spec: typed(params, "strategy.params")?,
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroFactorSpec {
    pub b: f64,
    pub sigma: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_n_steps")]
    pub n_steps: usize,
}

impl ZeroFactorSpec {
    pub fn params(&self) -> ZeroFactorParams {
        ZeroFactorParams {
            b: self.b,
            sigma: self.sigma,
            dt: self.dt,
        }
    }
}

pub struct ZeroFactorModel {
    pub spec: ZeroFactorSpec,
}

impl TargetModel for ZeroFactorModel {
    fn name(&self) -> &'static str {
        "zero_factor"
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn scenario(&self, seed: u64, gearing: f64) -> Result<Scenario> {
        let p = self.spec.params();
        let x = synth::simulate_zero_factor(&p, self.spec.n_steps, seed)?;
        let targets = synth::target_zero_factor(&x, &p, gearing)?;
        Ok(Scenario { prices: x, targets })
    }
}

pub struct ZeroFactorFactory;

impl ModelFactory for ZeroFactorFactory {
    fn name(&self) -> &'static str {
        "zero_factor"
    }

    fn normalize(&self, params: &toml::Table, prefix: &str) -> Result<toml::Table> {
        let spec: ZeroFactorSpec = typed(params, prefix)?;
        spec.params().validate().map_err(domain_to_config(prefix))?;
        if spec.n_steps < 2 {
            return Err(Error::config(format!("{prefix}.n_steps"), "must be >= 2"));
        }
        Ok(to_table(&spec))
    }

    fn build(&self, params: &toml::Table) -> Result<Box<dyn TargetModel>> {
        Ok(Box::new(ZeroFactorModel {
            spec: typed(params, "strategy.params")?,
        }))
    }
}

fn default_crossovers() -> Vec<[f64; 2]> {
    CrossoverSpec::standard_set()
        .iter()
        .map(|c| [c.t_fast, c.t_slow])
        .collect()
}

fn default_weight_scale() -> f64 {
    momentum::DEFAULT_WEIGHT_SCALE
}

fn default_period() -> f64 {
    32.0
}

fn default_vol_floor() -> f64 {
    1e-6
}

fn default_gamma_min_weight() -> f64 {
    16.0
}

fn default_momentum_warmup() -> usize {
    100
}

fn default_ridge() -> f64 {
    momentum::DEFAULT_RIDGE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentumSpec {
    /// `date,price` CSV.
    pub prices: PathBuf,
    /// `[fast, slow]` periods in days.
    #[serde(default = "default_crossovers")]
    pub crossovers: Vec<[f64; 2]>,
    /// Explicit weights; equal weights summing to `weight_scale` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_weight_scale")]
    pub weight_scale: f64,
    /// Fit weights by ridge regression on the series after warm-up.
    #[serde(default)]
    pub fit_weights: bool,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_period")]
    pub vol_period: f64,
    #[serde(default = "default_vol_floor")]
    pub vol_floor_frac: f64,
    /// `Γ̂₀²` forgetting factor is `1 − 1/gamma_period`.
    #[serde(default = "default_period")]
    pub gamma_period: f64,
    #[serde(default = "default_gamma_min_weight")]
    pub gamma_min_weight: f64,
    #[serde(default = "default_momentum_warmup")]
    pub warmup: usize,
}

impl MomentumSpec {
    pub fn config(&self) -> Result<MomentumConfig> {
        let crossovers = self
            .crossovers
            .iter()
            .map(|&[f, s]| CrossoverSpec::new(f, s))
            .collect::<Result<Vec<_>>>()?;
        let weights = match &self.weights {
            Some(w) => w.clone(),
            None => momentum::equal_weights(crossovers.len(), self.weight_scale),
        };
        if !(self.gamma_period.is_finite() && self.gamma_period > 1.0) {
            return Err(Error::domain("gamma_period must be > 1"));
        }
        let cfg = MomentumConfig {
            crossovers,
            weights,
            vol_period: self.vol_period,
            vol_floor_frac: self.vol_floor_frac,
            gamma_alpha: 1.0 - 1.0 / self.gamma_period,
            gamma_min_weight: self.gamma_min_weight,
            warmup: self.warmup,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub struct MomentumModel {
    pub series: PriceSeries,
    pub config: MomentumConfig,
}

impl MomentumModel {
    pub fn new(series: PriceSeries, spec: &MomentumSpec) -> Result<Self> {
        let mut config = spec.config()?;
        if spec.fit_weights {
            let sig = momentum::MomentumSignals::compute(&series.prices, &config)?;
            config.weights = sig.fit_weights(config.warmup, spec.ridge)?;
        }
        Ok(Self { series, config })
    }
}

impl TargetModel for MomentumModel {
    fn name(&self) -> &'static str {
        "momentum"
    }

    fn is_stochastic(&self) -> bool {
        false
    }

    fn scenario(&self, _seed: u64, gearing: f64) -> Result<Scenario> {
        let targets = momentum::momentum_targets(&self.series.prices, &self.config, gearing)?;
        Ok(Scenario {
            prices: self.series.prices.clone(),
            targets,
        })
    }

    fn reference_price(&self) -> Option<f64> {
        Some(self.series.mean_price())
    }
}

pub struct MomentumFactory;

impl ModelFactory for MomentumFactory {
    fn name(&self) -> &'static str {
        "momentum"
    }

    fn normalize(&self, params: &toml::Table, prefix: &str) -> Result<toml::Table> {
        let spec: MomentumSpec = typed(params, prefix)?;
        spec.config().map_err(domain_to_config(prefix))?;
        if !spec.prices.is_file() {
            return Err(Error::config(
                format!("{prefix}.prices"),
                format!("no such file: {}", spec.prices.display()),
            ));
        }
        if !(spec.ridge.is_finite() && spec.ridge >= 0.0) {
            return Err(Error::config(format!("{prefix}.ridge"), "must be >= 0"));
        }
        Ok(to_table(&spec))
    }

    fn build(&self, params: &toml::Table) -> Result<Box<dyn TargetModel>> {
        let spec: MomentumSpec = typed(params, "strategy.params")?;
        let series = load_price_csv(&spec.prices)?;
        Ok(Box::new(MomentumModel::new(series, &spec)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: &str) -> toml::Table {
        s.parse().unwrap()
    }

    #[test]
    fn builtin_names() {
        assert_eq!(
            Registry::builtin().names(),
            vec!["momentum", "one_factor", "zero_factor"]
        );
    }

    #[test]
    fn unknown_model() {
        let e = Registry::builtin().get("carry").err().unwrap();
        assert!(matches!(e, Error::Unknown { kind: "model", .. }));
    }

    #[test]
    fn defaults_filled() {
        let reg = Registry::builtin();
        let t = reg
            .get("one_factor")
            .unwrap()
            .normalize(&table("kappa = 0.02\nbeta = 0.04\nsigma_x = 0.5"), "p")
            .unwrap();
        assert_eq!(t["dt"].as_float(), Some(1.0));
        assert_eq!(t["n_steps"].as_integer(), Some(10_000));
        assert_eq!(t["rho01"].as_float(), Some(0.0));
    }

    #[test]
    fn bad_params_are_keyed() {
        let reg = Registry::builtin();
        let f = reg.get("one_factor").unwrap();
        let e = f
            .normalize(
                &table("kappa = 0.02\nbeta = 0.04\nsigma_x = 0.5\nsigmax = 1.0"),
                "strategy.params",
            )
            .unwrap_err();
        assert!(e.to_string().contains("strategy.params"), "{e}");
        let e = f
            .normalize(
                &table("kappa = -1.0\nbeta = 0.04\nsigma_x = 0.5"),
                "strategy.params",
            )
            .unwrap_err();
        assert!(matches!(e, Error::Config { .. }), "{e}");
        let e = f
            .normalize(
                &table("kappa = 0.02\nbeta = \"x\"\nsigma_x = 0.5"),
                "strategy.params",
            )
            .unwrap_err();
        assert!(e.to_string().contains("strategy.params.beta"), "{e}");
    }

    #[test]
    fn synthetic_scenarios_are_seeded() {
        let reg = Registry::builtin();
        let m = reg
            .build("zero_factor", &table("b = 0.05\nsigma = 1.0\nn_steps = 50"))
            .unwrap();
        let a = m.scenario(3, 1e6).unwrap();
        let b = m.scenario(3, 1e6).unwrap();
        let c = m.scenario(4, 1e6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.prices, c.prices);
        assert_eq!(a.targets.len(), 50);
    }

    #[test]
    fn momentum_requires_existing_file() {
        let reg = Registry::builtin();
        let e = reg
            .get("momentum")
            .unwrap()
            .normalize(
                &table("prices = \"/nonexistent/prices.csv\""),
                "strategy.params",
            )
            .unwrap_err();
        assert!(e.to_string().contains("strategy.params.prices"), "{e}");
    }
}
