//! Price CSV ingestion, run configuration and cost-quote conversion.
//!
//! Price files carry a `date,price` header and one ISO-8601 date per row.
//! Rows are positional business days. Series must already be roll-adjusted.
//!
//! Run configurations are TOML:
//!
//! ```toml
//! [market]
//! gearing = 1e6                   # dollars
//! annualization = 252             # days per year
//! cost_convention = "dollars"     # or "fraction_of_price" / "fraction_of_par"
//! contract_size = 1.0
//!
//! [strategy]
//! kind = "one_factor"             # any name in the model registry
//! [strategy.params]
//! kappa = 0.02
//! beta = 0.04
//! sigma_x = 0.5
//!
//! [experiment]
//! epsilons = [0.02, 0.05, 0.1, 0.2, 0.5]
//! lambdas = [0.0, 0.125, 0.25, 0.5, 0.7071067811865476, 1.0, 1.4142135623730951, 2.0, 4.0, 8.0]
//! n_seeds = 20
//!
//! [output]
//! csv = "sweep.csv"
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::backtest::{RiskKind, DEFAULT_TAIL_PROB, TRADING_DAYS};
use crate::error::{Error, Result};
use crate::strategy::Registry;

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub prices: Vec<f64>,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn mean_price(&self) -> f64 {
        self.prices.iter().sum::<f64>() / self.prices.len() as f64
    }
}

pub fn load_price_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_price_csv(&bytes, path)
}

/// Parse `date,price` CSV content. `origin` labels error messages.
pub fn parse_price_csv(bytes: &[u8], origin: &Path) -> Result<PriceSeries> {
    let err = |row: usize, msg: String| Error::Parse {
        path: origin.to_path_buf(),
        row,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| err(1, format!("unreadable header: {e}")))?
        .clone();
    if headers.len() != 2 || &headers[0] != "date" || &headers[1] != "price" {
        return Err(err(
            1,
            format!(
                "expected header 'date,price', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut prices = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // header is line 1
        let row = i + 2;
        let record = record.map_err(|e| err(row, format!("malformed row: {e}")))?;
        if record.len() != 2 {
            return Err(err(
                row,
                format!("expected 2 fields, found {}", record.len()),
            ));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| err(row, format!("bad date '{}': {e}", &record[0])))?;
        let price: f64 = record[1]
            .parse()
            .map_err(|_| err(row, format!("bad price '{}'", &record[1])))?;
        if !price.is_finite() {
            return Err(err(row, format!("non-finite price '{}'", &record[1])));
        }
        if let Some(&prev) = dates.last() {
            if date == prev {
                return Err(err(row, format!("duplicate date {date}")));
            }
            if date < prev {
                return Err(err(
                    row,
                    format!("date {date} is earlier than {prev}; rows must be sorted"),
                ));
            }
        }
        dates.push(date);
        prices.push(price);
    }
    if prices.is_empty() {
        return Err(Error::Data {
            path: origin.to_path_buf(),
            msg: "no data rows".into(),
        });
    }
    Ok(PriceSeries { dates, prices })
}

/// How a quoted half-spread is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostConvention {
    /// Dollars per unit of position.
    #[default]
    Dollars,
    /// Price points; divided by the reference price to get a fraction of notional.
    FractionOfPrice,
    /// Price points per 100 of par.
    FractionOfPar,
}

impl CostConvention {
    pub fn name(self) -> &'static str {
        match self {
            CostConvention::Dollars => "dollars",
            CostConvention::FractionOfPrice => "fraction_of_price",
            CostConvention::FractionOfPar => "fraction_of_par",
        }
    }
}

impl fmt::Display for CostConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CostConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dollars" => Ok(Self::Dollars),
            "fraction_of_price" => Ok(Self::FractionOfPrice),
            "fraction_of_par" => Ok(Self::FractionOfPar),
            other => Err(Error::Unknown {
                kind: "cost convention",
                name: other.to_string(),
            }),
        }
    }
}

/// Convert a quoted half-spread into `ε`, dollars per unit of position.
///
/// `contract_size` is the notional (dollars) carried by one unit of position.
/// For [`CostConvention::Dollars`] the quote is returned unchanged.
pub fn cost_from_quote(
    convention: CostConvention,
    half_spread: f64,
    reference_price: f64,
    contract_size: f64,
) -> Result<f64> {
    if !(half_spread.is_finite() && half_spread >= 0.0) {
        return Err(Error::domain(format!(
            "half-spread must be >= 0, got {half_spread}"
        )));
    }
    let fraction = match convention {
        CostConvention::Dollars => return Ok(half_spread),
        CostConvention::FractionOfPrice => {
            if !(reference_price.is_finite() && reference_price > 0.0) {
                return Err(Error::domain(format!(
                    "reference price must be > 0, got {reference_price}"
                )));
            }
            half_spread / reference_price
        }
        CostConvention::FractionOfPar => half_spread / 100.0,
    };
    if !(contract_size.is_finite() && contract_size > 0.0) {
        return Err(Error::domain(format!(
            "contract size must be > 0, got {contract_size}"
        )));
    }
    Ok(fraction * contract_size)
}

fn default_gearing() -> f64 {
    1e6
}

fn default_annualization() -> f64 {
    TRADING_DAYS
}

fn default_contract_size() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    #[serde(default = "default_gearing")]
    pub gearing: f64,
    #[serde(default = "default_annualization")]
    pub annualization: f64,
    #[serde(default)]
    pub cost_convention: CostConvention,
    /// Price used by `fraction_of_price`; defaults to the series mean when the
    /// model provides prices.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_price: Option<f64>,
    #[serde(default = "default_contract_size")]
    pub contract_size: f64,
    #[serde(default)]
    pub initial_position: f64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        Self {
            gearing: default_gearing(),
            annualization: default_annualization(),
            cost_convention: CostConvention::Dollars,
            reference_price: None,
            contract_size: default_contract_size(),
            initial_position: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    /// Registered model name.
    pub kind: String,
    #[serde(default)]
    pub params: toml::Table,
}

/// `{0, ⅛, ¼, ½, 1/√2, 1, √2, 2, 4, 8}`.
pub fn default_lambdas() -> Vec<f64> {
    vec![
        0.0,
        0.125,
        0.25,
        0.5,
        std::f64::consts::FRAC_1_SQRT_2,
        1.0,
        std::f64::consts::SQRT_2,
        2.0,
        4.0,
        8.0,
    ]
}

fn default_n_seeds() -> usize {
    20
}

fn default_base_seed() -> u64 {
    1
}

fn default_risk_measures() -> Vec<RiskKind> {
    RiskKind::ALL.to_vec()
}

fn default_tail_prob() -> f64 {
    DEFAULT_TAIL_PROB
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Cost grid, quoted in `market.cost_convention`.
    pub epsilons: Vec<f64>,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    #[serde(default = "default_base_seed")]
    pub base_seed: u64,
    #[serde(default = "default_risk_measures")]
    pub risk_measures: Vec<RiskKind>,
    #[serde(default = "default_tail_prob")]
    pub tail_prob: f64,
    /// Overrides the model's own warm-up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<usize>,
}

impl ExperimentConfig {
    pub fn seeds(&self) -> Vec<u64> {
        (0..self.n_seeds as u64)
            .map(|i| self.base_seed + i)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub market: MarketConfig,
    pub strategy: StrategyConfig,
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Serialize for RiskKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RiskKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Deserialize `value` into `T`, reporting failures at `prefix.<path>`.
pub(crate) fn typed_from_toml<T: DeserializeOwned>(value: toml::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let key = match (prefix.is_empty(), inner.as_str()) {
            (true, _) => inner.clone(),
            (false, ".") => prefix.to_string(),
            (false, _) => format!("{prefix}.{inner}"),
        };
        Error::config(key, e.into_inner().message().to_string())
    })
}

impl RunConfig {
    /// Parse, fill defaults and validate. Relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: &Path, registry: &Registry) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("<root>", e.message().to_string()))?;
        let mut cfg: RunConfig = typed_from_toml(toml::Value::Table(table), "")?;
        cfg.resolve_paths(base_dir);
        cfg.normalize(registry)?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config is always representable as TOML")
    }

    fn resolve_paths(&mut self, base_dir: &Path) {
        if let Some(csv) = &self.output.csv {
            if csv.is_relative() {
                self.output.csv = Some(base_dir.join(csv));
            }
        }
        if let Some(toml::Value::String(p)) = self.strategy.params.get("prices") {
            let pb = PathBuf::from(p);
            if pb.is_relative() {
                let joined = base_dir.join(pb).to_string_lossy().into_owned();
                self.strategy
                    .params
                    .insert("prices".into(), toml::Value::String(joined));
            }
        }
    }

    /// Check every field and fill the model's defaults into `strategy.params`.
    pub fn normalize(&mut self, registry: &Registry) -> Result<()> {
        let m = &self.market;
        if !(m.gearing.is_finite() && m.gearing > 0.0) {
            return Err(Error::config("market.gearing", "must be > 0"));
        }
        if !(m.annualization.is_finite() && m.annualization > 0.0) {
            return Err(Error::config("market.annualization", "must be > 0"));
        }
        if !(m.contract_size.is_finite() && m.contract_size > 0.0) {
            return Err(Error::config("market.contract_size", "must be > 0"));
        }
        if let Some(p) = m.reference_price {
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::config("market.reference_price", "must be > 0"));
            }
        }
        if !m.initial_position.is_finite() {
            return Err(Error::config("market.initial_position", "must be finite"));
        }

        let e = &mut self.experiment;
        if e.epsilons.is_empty() {
            return Err(Error::config("experiment.epsilons", "must not be empty"));
        }
        for (i, &eps) in e.epsilons.iter().enumerate() {
            if !(eps.is_finite() && eps >= 0.0) {
                return Err(Error::config(
                    format!("experiment.epsilons[{i}]"),
                    "must be >= 0",
                ));
            }
        }
        if e.lambdas.is_empty() {
            return Err(Error::config("experiment.lambdas", "must not be empty"));
        }
        for (i, &l) in e.lambdas.iter().enumerate() {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::config(
                    format!("experiment.lambdas[{i}]"),
                    "must be >= 0",
                ));
            }
        }
        e.lambdas.sort_by(f64::total_cmp);
        if e.lambdas.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config(
                "experiment.lambdas",
                "values must be distinct",
            ));
        }
        // the λ = 1 point is always reported
        if let Err(pos) = e.lambdas.binary_search_by(|l| l.total_cmp(&1.0)) {
            e.lambdas.insert(pos, 1.0);
        }
        if e.n_seeds == 0 {
            return Err(Error::config("experiment.n_seeds", "must be >= 1"));
        }
        if e.risk_measures.is_empty() {
            return Err(Error::config(
                "experiment.risk_measures",
                "must not be empty",
            ));
        }
        e.risk_measures.sort();
        e.risk_measures.dedup();
        if !(e.tail_prob > 0.0 && e.tail_prob < 0.5) {
            return Err(Error::config(
                "experiment.tail_prob",
                "must lie in (0, 0.5)",
            ));
        }

        let factory = registry.get(&self.strategy.kind).map_err(|_| {
            Error::config(
                "strategy.kind",
                format!(
                    "unknown model '{}'; available: {}",
                    self.strategy.kind,
                    registry.names().join(", ")
                ),
            )
        })?;
        self.strategy.params = factory.normalize(&self.strategy.params, "strategy.params")?;
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>, registry: &Registry) -> Result<RunConfig> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text =
        String::from_utf8(bytes).map_err(|_| Error::config("<root>", "file is not valid UTF-8"))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    RunConfig::from_toml_str(&text, base, registry)
}
