//! JSON experiment configuration.
//!
//! ```text
//! {
//!   "model": "plant.json",
//!   "sweep": { "duration": 10.0, "f_start": 0.0, "f_end": 8.0 },
//!   "samples": 2000,
//!   "noise": ["none", 50, 20, 10, 6],
//!   "ident": { "n_max": 250, "beta": 3.0, "gamma": 20.0, "order": 2 },
//!   "trials": 100,
//!   "seed": 1
//! }
//! ```
//!
//! `model` is either a path (relative to the config file) or an inline
//! model object. Only `ident` is needed by `identify`.

use std::fmt;
use std::path::{Path, PathBuf};

use hdpbsid_core::ident::{IdentConfig, OrderSelection, DEFAULT_SV_GAP, DEFAULT_WINDOW};
use hdpbsid_core::lti::{NoiseSpec, StateSpaceModel, SweepSpec};
use serde::Deserialize;

use crate::formats::{json_error, read_model_json, read_text, FormatError, ModelFile};

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(ModelFile),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub duration: f64,
    pub f_start: f64,
    pub f_end: f64,
}

/// `"none"` or an SNR in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    None,
    SnrDb(f64),
}

impl NoiseLevel {
    pub fn spec(self, seed: u64) -> NoiseSpec {
        match self {
            NoiseLevel::None => NoiseSpec::noise_free(),
            NoiseLevel::SnrDb(db) => NoiseSpec::snr_db(db, seed),
        }
    }

    /// Directory name for campaign output.
    pub fn label(self) -> String {
        match self {
            NoiseLevel::None => "noise_free".into(),
            NoiseLevel::SnrDb(db) => format!("snr_{db}db"),
        }
    }
}

impl fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseLevel::None => f.write_str("none"),
            NoiseLevel::SnrDb(db) => write!(f, "{db}"),
        }
    }
}

impl<'de> Deserialize<'de> for NoiseLevel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Db(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Db(db) if db.is_finite() => Ok(NoiseLevel::SnrDb(db)),
            Raw::Word(w) if w == "none" => Ok(NoiseLevel::None),
            _ => Err(serde::de::Error::custom("noise level must be a finite SNR in dB or \"none\"")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderSetting(pub OrderSelection);

impl<'de> Deserialize<'de> for OrderSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Fixed(usize),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Fixed(n) => Ok(OrderSetting(OrderSelection::Fixed(n))),
            Raw::Word(w) if w == "auto" => Ok(OrderSetting(OrderSelection::Auto)),
            _ => Err(serde::de::Error::custom("order must be a positive integer or \"auto\"")),
        }
    }
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

fn default_gap() -> f64 {
    DEFAULT_SV_GAP
}

fn default_order() -> OrderSetting {
    OrderSetting(OrderSelection::Auto)
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentSection {
    pub n_max: usize,
    pub beta: f64,
    pub gamma: f64,
    #[serde(default = "default_window")]
    pub p: usize,
    #[serde(default = "default_window")]
    pub f: usize,
    #[serde(default = "default_order")]
    pub order: OrderSetting,
    #[serde(default = "default_gap")]
    pub sv_gap_threshold: f64,
}

impl IdentSection {
    pub fn to_config(self) -> IdentConfig {
        let mut cfg = IdentConfig::new(self.n_max, self.beta, self.gamma, self.order.0)
            .with_windows(self.p, self.f);
        cfg.sv_gap_threshold = self.sv_gap_threshold;
        cfg
    }
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: Option<ModelSource>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub samples: Option<usize>,
    /// Band-limit the sweep through a Hermite expansion of this order.
    #[serde(default)]
    pub bandlimit_eta: Option<usize>,
    #[serde(default)]
    pub noise: Vec<NoiseLevel>,
    pub ident: IdentSection,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub include_failures: bool,
    /// Leading channels of a combined data CSV that are inputs.
    #[serde(default)]
    pub n_inputs: Option<usize>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, FormatError> {
        let mut cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| json_error(path, &e))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, FormatError> {
        Self::parse(&read_text(path)?, path)
    }

    fn validate(&self, path: &Path) -> Result<(), FormatError> {
        let bad = |m: String| FormatError::invalid(path, m);
        if self.trials == 0 {
            return Err(bad("trials must be at least 1".into()));
        }
        self.ident
            .to_config()
            .validate()
            .map_err(|e| bad(format!("ident: {e}")))?;
        if let Some(s) = self.sweep {
            SweepSpec::new(s.duration, s.f_start, s.f_end).map_err(|e| bad(format!("sweep: {e}")))?;
        }
        if matches!(self.samples, Some(n) if n < 2) {
            return Err(bad("samples must be at least 2".into()));
        }
        Ok(())
    }

    pub fn ident_config(&self) -> IdentConfig {
        self.ident.to_config()
    }

    /// Resolves the plant, reading it from disk when given as a path.
    pub fn load_model(&self, path: &Path) -> Result<StateSpaceModel, FormatError> {
        match &self.model {
            None => Err(FormatError::invalid(path, "no model given")),
            Some(ModelSource::Inline(m)) => m
                .clone()
                .into_model()
                .map_err(|e| FormatError::invalid(path, format!("model: {e}"))),
            Some(ModelSource::Path(p)) => read_model_json(&self.base_dir.join(p)),
        }
    }

    pub fn sweep_spec(&self, path: &Path) -> Result<(SweepSpec, usize), FormatError> {
        let (Some(s), Some(n)) = (self.sweep, self.samples) else {
            return Err(FormatError::invalid(path, "sweep and samples are required"));
        };
        let spec = SweepSpec::new(s.duration, s.f_start, s.f_end)
            .map_err(|e| FormatError::invalid(path, e.to_string()))?;
        Ok((spec, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("dir/cfg.json")
    }

    #[test]
    fn full_config_parses() {
        let text = r#"{
            "model": {"A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]]},
            "sweep": {"duration": 10, "f_start": 0, "f_end": 8},
            "samples": 2000,
            "bandlimit_eta": 250,
            "noise": ["none", 50, 6.5],
            "ident": {"n_max": 250, "beta": 3, "gamma": 20, "order": 2},
            "trials": 4,
            "seed": 9
        }"#;
        let cfg = ExperimentConfig::parse(text, p()).unwrap();
        assert_eq!(cfg.noise, vec![NoiseLevel::None, NoiseLevel::SnrDb(50.0), NoiseLevel::SnrDb(6.5)]);
        assert_eq!(cfg.base_dir, Path::new("dir"));
        let ic = cfg.ident_config();
        assert_eq!((ic.p, ic.f, ic.order), (10, 10, OrderSelection::Fixed(2)));
        assert_eq!(cfg.load_model(p()).unwrap().n_x(), 1);
        assert_eq!(NoiseLevel::SnrDb(6.5).label(), "snr_6.5db");
    }

    #[test]
    fn minimal_config_defaults() {
        let cfg = ExperimentConfig::parse(r#"{"ident": {"n_max": 40, "beta": 1, "gamma": 5}}"#, p()).unwrap();
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.ident_config().order, OrderSelection::Auto);
        assert!(cfg.load_model(p()).is_err());
        assert!(cfg.sweep_spec(p()).is_err());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let cases = [
            r#"{"ident": {"n_max": 40, "beta": 1, "gamma": 5}, "trials": 0}"#,
            r#"{"ident": {"n_max": 40, "beta": 1, "gamma": 0}}"#,
            r#"{"ident": {"n_max": 40, "beta": 1, "gamma": 5, "p": 3, "f": 5}}"#,
            r#"{"ident": {"n_max": 40, "beta": 1, "gamma": 5, "order": "many"}}"#,
            r#"{"ident": {"n_max": 40, "beta": 1, "gamma": 5}, "noise": ["loud"]}"#,
            r#"{"ident": {"n_max": 40, "beta": 1, "gamma": 5}, "colour": 1}"#,
        ];
        for c in cases {
            assert!(ExperimentConfig::parse(c, p()).is_err(), "{c}");
        }
    }

    #[test]
    fn json_errors_report_the_line() {
        let err = ExperimentConfig::parse("{\n \"ident\": {\n \"n_max\": ,\n}}", p()).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 3, .. }), "{err}");
    }
}
