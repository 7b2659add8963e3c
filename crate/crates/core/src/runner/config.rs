use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::align::TrainConfig;
use crate::coreset::{SelectionMethod, DEFAULT_RESTARTS};
use crate::error::{Error, Result};
use crate::extrap::{FeatureMode, DEFAULT_LAMBDA};

/// Default share of models used by the oldest-fraction policy.
pub const DEFAULT_OLDEST_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Strong,
    Weak,
}

/// How source models are drawn from the pool; all other models become targets.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcePolicy {
    /// `|S|` models drawn uniformly.
    #[default]
    Random,
    /// `|S|` models drawn uniformly from one family.
    Family(String),
    /// Top (strong) or bottom (weak) `|S|` models by overall score; ties by name.
    Capability(Capability),
    /// The oldest `⌊f·M⌋` models by release date; ignores `|S|`.
    OldestFraction(f64),
}

impl fmt::Display for SourcePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourcePolicy::Random => f.write_str("random"),
            SourcePolicy::Family(name) => write!(f, "family:{name}"),
            SourcePolicy::Capability(Capability::Strong) => f.write_str("capability:strong"),
            SourcePolicy::Capability(Capability::Weak) => f.write_str("capability:weak"),
            SourcePolicy::OldestFraction(x) => write!(f, "oldest:{x}"),
        }
    }
}

impl FromStr for SourcePolicy {
    type Err = Error;

    /// `random`, `family:NAME`, `capability:strong|weak`, `oldest[:F]`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown source policy `{s}`"));
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("random", None) => Ok(SourcePolicy::Random),
            ("family", Some(name)) if !name.is_empty() => Ok(SourcePolicy::Family(name.to_string())),
            ("capability", Some("strong")) => Ok(SourcePolicy::Capability(Capability::Strong)),
            ("capability", Some("weak")) => Ok(SourcePolicy::Capability(Capability::Weak)),
            ("oldest", None) => Ok(SourcePolicy::OldestFraction(DEFAULT_OLDEST_FRACTION)),
            ("oldest", Some(f)) => f.parse().map(SourcePolicy::OldestFraction).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// Everything one experiment needs; loadable from JSON with per-field defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub num_source: usize,
    pub budgets: Vec<usize>,
    pub repeats: usize,
    pub selectors: Vec<SelectionMethod>,
    pub feature_mode: FeatureMode,
    pub lambda: f64,
    pub seed: u64,
    pub source_policy: SourcePolicy,
    /// Item fractions for alignment training, validation and test.
    pub split: (f64, f64, f64),
    pub restarts: usize,
    /// Fit the ridge extrapolator for the random selector instead of using its coreset mean.
    pub random_extrapolates: bool,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            out: None,
            num_source: 10,
            budgets: vec![10, 20, 30, 40, 50],
            repeats: 10,
            selectors: vec![
                SelectionMethod::Repcore,
                SelectionMethod::Random,
                SelectionMethod::BinaryKmeans,
            ],
            feature_mode: FeatureMode::MeanCorrectness,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
            source_policy: SourcePolicy::Random,
            split: (0.7, 0.1, 0.2),
            restarts: DEFAULT_RESTARTS,
            random_extrapolates: false,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    /// Applies the keys present in a JSON file on top of `self`; nested objects merge.
    pub fn overlay_file(&self, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let patch: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        let mut base = serde_json::to_value(self).expect("serializable");
        merge(&mut base, patch);
        serde_json::from_value(base).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self).expect("serializable"))
            .map_err(|e| Error::io(path, e))
    }

    /// Checks settings that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.budgets.is_empty() || self.budgets.contains(&0) {
            return bad("budgets must be a nonempty list of positive counts".into());
        }
        if self.selectors.is_empty() {
            return bad("at least one selector required".into());
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda = {} must be >= 0", self.lambda));
        }
        if self.restarts == 0 {
            return bad("restarts must be positive".into());
        }
        if let SourcePolicy::OldestFraction(f) = self.source_policy {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("oldest fraction {f} must lie in (0, 1)"));
            }
        }
        if !matches!(self.source_policy, SourcePolicy::OldestFraction(_)) && self.num_source == 0 {
            return bad("num_source must be positive".into());
        }
        self.train.validate()
    }

    /// Checks settings against a dataset's model and item counts.
    pub fn validate_for(&self, num_models: usize, num_items: usize) -> Result<()> {
        self.validate()?;
        if !matches!(self.source_policy, SourcePolicy::OldestFraction(_)) && self.num_source >= num_models {
            return Err(Error::InvalidConfig(format!(
                "num_source = {} must be below the {num_models} available models",
                self.num_source
            )));
        }
        if let Some(&k) = self.budgets.iter().find(|&&k| k > num_items) {
            return Err(Error::InvalidConfig(format!("budget {k} exceeds {num_items} items")));
        }
        Ok(())
    }
}

fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
