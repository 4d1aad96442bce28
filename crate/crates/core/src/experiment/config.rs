//! Experiment configuration: a versioned TOML document with dotted sections.
//!
//! ```toml
//! schema_version = 1
//! name = "fig6"
//! metrics = ["opsc"]
//! methods = ["quadrature", "monte_carlo"]
//! r_th = 1.0
//!
//! [scenario]
//! topology = "s1"
//! k = [0.0, 10.0]
//! rho = [0.0, 0.7, 0.9]
//! independent_k = 0.0
//! eve_snr_db = [5.0]
//! eve_modes = ["true_snr", "naive"]
//! snr_reference = "achieved"
//!
//! [sweep]
//! gamma_b_db = [0.0, 10.0, 20.0]
//!
//! [mc]
//! n_samples = 1000000
//! seed = 1
//! ```
//!
//! Correlation is given either as `rho` or as `p = rho^2`, not both. The
//! `mc`, `quad` and `series` sections default to the library defaults.
//! Unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{EveMode, FadingParams, SnrReference, Topology, LOS_LIMIT_K};
use crate::dist::SeriesSettings;
use crate::error::{Error, Result};
use crate::mc::McSettings;
use crate::metrics::{Method, RateThreshold};
use crate::quadrature::QuadSettings;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Capacity,
    Outage,
    Asc,
    Opsc,
}

impl MetricKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::Capacity => "capacity",
            MetricKind::Outage => "outage",
            MetricKind::Asc => "asc",
            MetricKind::Opsc => "opsc",
        }
    }

    pub fn is_secrecy(self) -> bool {
        matches!(self, MetricKind::Asc | MetricKind::Opsc)
    }

    pub fn uses_threshold(self) -> bool {
        matches!(self, MetricKind::Outage | MetricKind::Opsc)
    }

    pub fn is_probability(self) -> bool {
        self.uses_threshold()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: Topology,
    /// Rician factors of the correlated pair.
    pub k: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    /// Rician factor of the link outside the pair.
    #[serde(default)]
    pub independent_k: f64,
    /// Nominal eavesdropper SNRs in dB.
    #[serde(default)]
    pub eve_snr_db: Vec<f64>,
    #[serde(default)]
    pub eve_modes: Vec<EveMode>,
    #[serde(default)]
    pub snr_reference: SnrReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Average legitimate SNRs in dB.
    pub gamma_b_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    pub scenario: ScenarioConfig,
    pub sweep: SweepConfig,
    pub metrics: Vec<MetricKind>,
    pub methods: Vec<Method>,
    #[serde(default = "default_r_th")]
    pub r_th: f64,
    #[serde(default)]
    pub mc: McSettings,
    #[serde(default)]
    pub quad: QuadSettings,
    #[serde(default)]
    pub series: SeriesSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

fn default_name() -> String {
    "custom".to_string()
}

fn default_r_th() -> f64 {
    1.0
}

/// One correlation level, keeping whichever of `rho` and `p` was given
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    pub p: f64,
}

fn field_err(field: &str, e: Error) -> Error {
    Error::config(field, e.to_string())
}

fn require_non_empty<T>(field: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::config(field, "must not be empty"));
    }
    Ok(())
}

fn require_finite(field: &str, v: &[f64]) -> Result<()> {
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::config(field, format!("{x} is not finite")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Applies `key=value` overrides. Keys are dotted paths into the document
    /// and values are TOML literals; a bare word is read as a string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let text = self.to_toml_string()?;
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.to_string()))?;
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::config(raw, "override must have the form key=value"))?;
            let key = key.trim();
            let value = parse_literal(value.trim());
            set_path(&mut doc, key, value)?;
        }
        let out = toml::to_string(&doc).map_err(|e| Error::config("config", e.to_string()))?;
        Self::from_toml_str(&out)
    }

    pub fn correlations(&self) -> Vec<Correlation> {
        match (&self.scenario.rho, &self.scenario.p) {
            (Some(rho), _) => rho.iter().map(|&r| Correlation { rho: r, p: r * r }).collect(),
            (None, Some(p)) => p.iter().map(|&p| Correlation { rho: p.sqrt(), p }).collect(),
            (None, None) => Vec::new(),
        }
    }

    pub fn threshold(&self) -> Result<RateThreshold> {
        RateThreshold::new(self.r_th).map_err(|e| field_err("r_th", e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("{} is unsupported; expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let sc = &self.scenario;
        require_non_empty("sweep.gamma_b_db", &self.sweep.gamma_b_db)?;
        require_finite("sweep.gamma_b_db", &self.sweep.gamma_b_db)?;
        require_non_empty("metrics", &self.metrics)?;
        require_non_empty("methods", &self.methods)?;
        require_non_empty("scenario.k", &sc.k)?;
        for &k in &sc.k {
            FadingParams::new(k, 0.0).map_err(|e| field_err("scenario.k", e))?;
        }
        let corr_field = match (&sc.rho, &sc.p) {
            (Some(_), Some(_)) => return Err(Error::config("scenario.rho", "give either rho or p, not both")),
            (None, None) => return Err(Error::config("scenario.rho", "one of rho or p is required")),
            (Some(v), None) => {
                require_non_empty("scenario.rho", v)?;
                "scenario.rho"
            }
            (None, Some(v)) => {
                require_non_empty("scenario.p", v)?;
                if let Some(p) = v.iter().find(|p| !(0.0..1.0).contains(*p)) {
                    return Err(Error::config("scenario.p", format!("{p} is outside [0, 1)")));
                }
                "scenario.p"
            }
        };
        for c in self.correlations() {
            FadingParams::new(0.0, c.rho).map_err(|e| field_err(corr_field, e))?;
        }
        if !(0.0..LOS_LIMIT_K).contains(&sc.independent_k) {
            return Err(Error::config(
                "scenario.independent_k",
                format!("{} must lie in [0, {LOS_LIMIT_K:e})", sc.independent_k),
            ));
        }
        let secrecy = sc.topology != Topology::P2p;
        if secrecy {
            require_non_empty("scenario.eve_snr_db", &sc.eve_snr_db)?;
            require_finite("scenario.eve_snr_db", &sc.eve_snr_db)?;
            require_non_empty("scenario.eve_modes", &sc.eve_modes)?;
            if sc.k.iter().any(|&k| k >= LOS_LIMIT_K) {
                return Err(Error::config(
                    "scenario.k",
                    "secrecy scenarios need k below the LOS limit",
                ));
            }
        } else {
            if !sc.eve_snr_db.is_empty() || !sc.eve_modes.is_empty() {
                return Err(Error::config(
                    "scenario.eve_snr_db",
                    "point-to-point scenarios take no eavesdropper",
                ));
            }
            if let Some(m) = self.metrics.iter().find(|m| m.is_secrecy()) {
                return Err(Error::config(
                    "metrics",
                    format!("{} needs topology s1 or s2", m.as_str()),
                ));
            }
        }
        if secrecy {
            if let Some(m) = self.metrics.iter().find(|m| !m.is_secrecy()) {
                return Err(Error::config(
                    "metrics",
                    format!("{} is a point-to-point metric; use topology p2p", m.as_str()),
                ));
            }
        }
        self.threshold()?;
        self.mc.validate().map_err(|e| field_err("mc", e))?;
        self.quad.validate().map_err(|e| field_err("quad", e))?;
        self.series.validate().map_err(|e| field_err("series", e))?;
        Ok(())
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::config(key, "empty key"))?;
    let mut table = doc;
    for part in parts {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("{part} is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
