//! Experiment configuration: JSON schema, validation with field paths, and
//! the condition hash that keys RNG streams and output directories.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::{Environment, EnvironmentDef};
use crate::learners::{EstimateSchedule, LearnerModel, NoiseMode};
use crate::predictors::PredictorKind;

/// Environment variable that overrides the output root when no explicit
/// `--out` is given.
pub const OUT_DIR_ENV: &str = "PREFWATCH_OUT";

pub const DEFAULT_OUT_DIR: &str = "prefwatch-out";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config error at `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("config io error for {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl ConfigError {
    fn at(path: &str, message: impl fmt::Display) -> Self {
        ConfigError::Invalid {
            path: path.to_string(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSource,
    pub learner: LearnerSpec,
    pub predictor: PredictorSpec,
    #[serde(default = "default_measures")]
    pub measures: Vec<MeasureKind>,
    pub horizon: usize,
    pub seeds: SeedSpec,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn default_measures() -> Vec<MeasureKind> {
    vec![
        MeasureKind::Br,
        MeasureKind::Klbp,
        MeasureKind::L2,
        MeasureKind::Linf,
    ]
}

fn default_epsilon() -> f64 {
    0.1
}

/// Environment given inline or as a path to a JSON document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvironmentSource {
    Path(String),
    Inline(EnvironmentDef),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    ConstantAction,
    ExploreThenCommit,
    ExponentialWeights,
    BoltzmannSynthesized,
    EpsilonMixedOptimal,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_mode: Option<NoiseMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_action: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
}

impl LearnerSpec {
    /// Check the parameter set against the kind and build the model.
    /// Parameters a kind does not use are rejected rather than ignored.
    pub fn build_model(&self) -> Result<LearnerModel, ConfigError> {
        let require = |name: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(ConfigError::at(
                    &format!("learner.{name}"),
                    format!("required for kind {:?}", self.kind),
                ))
            }
        };
        let forbid = |name: &str, absent: bool| {
            if absent {
                Ok(())
            } else {
                Err(ConfigError::at(
                    &format!("learner.{name}"),
                    format!("not a parameter of kind {:?}", self.kind),
                ))
            }
        };
        match self.kind {
            LearnerKind::ConstantAction => {
                require("fixed_action", self.fixed_action.is_some())?;
                forbid("beta", self.beta.is_none())?;
                forbid("c", self.c.is_none())?;
                forbid("alpha", self.alpha.is_none())?;
                forbid("noise_mode", self.noise_mode.is_none())?;
                forbid("eta", self.eta.is_none())?;
                Ok(LearnerModel::ConstantAction {
                    action: self.fixed_action.unwrap(),
                })
            }
            LearnerKind::ExploreThenCommit => {
                forbid("beta", self.beta.is_none())?;
                forbid("c", self.c.is_none())?;
                forbid("alpha", self.alpha.is_none())?;
                forbid("noise_mode", self.noise_mode.is_none())?;
                forbid("fixed_action", self.fixed_action.is_none())?;
                forbid("eta", self.eta.is_none())?;
                Ok(LearnerModel::ExploreThenCommit)
            }
            LearnerKind::ExponentialWeights => {
                forbid("beta", self.beta.is_none())?;
                forbid("c", self.c.is_none())?;
                forbid("alpha", self.alpha.is_none())?;
                forbid("noise_mode", self.noise_mode.is_none())?;
                forbid("fixed_action", self.fixed_action.is_none())?;
                if let Some(eta) = self.eta {
                    if !eta.is_finite() || eta <= 0.0 {
                        return Err(ConfigError::at(
                            "learner.eta",
                            format!("must be finite and positive, got {eta}"),
                        ));
                    }
                }
                Ok(LearnerModel::ExponentialWeights { eta: self.eta })
            }
            LearnerKind::BoltzmannSynthesized => {
                require("beta", self.beta.is_some())?;
                require("c", self.c.is_some())?;
                require("alpha", self.alpha.is_some())?;
                require("noise_mode", self.noise_mode.is_some())?;
                forbid("fixed_action", self.fixed_action.is_none())?;
                forbid("eta", self.eta.is_none())?;
                let beta = self.beta.unwrap();
                if !beta.is_finite() || beta < 0.0 {
                    return Err(ConfigError::at(
                        "learner.beta",
                        format!("must be finite and nonnegative, got {beta}"),
                    ));
                }
                let schedule = EstimateSchedule::new(
                    self.c.unwrap(),
                    self.alpha.unwrap(),
                    self.noise_mode.unwrap(),
                )
                .map_err(|e| ConfigError::at("learner", e))?;
                Ok(LearnerModel::BoltzmannSynthesized { beta, schedule })
            }
            LearnerKind::EpsilonMixedOptimal => {
                require("alpha", self.alpha.is_some())?;
                forbid("beta", self.beta.is_none())?;
                forbid("fixed_action", self.fixed_action.is_none())?;
                forbid("eta", self.eta.is_none())?;
                // The error schedule of this kind is pinned by alpha alone;
                // an explicit c or noise_mode would be dead weight.
                forbid("c", self.c.is_none())?;
                forbid("noise_mode", self.noise_mode.is_none())?;
                let alpha = self.alpha.unwrap();
                if !alpha.is_finite() || alpha <= 0.0 || alpha >= 1.0 {
                    return Err(ConfigError::at(
                        "learner.alpha",
                        format!("must lie strictly between 0 and 1, got {alpha}"),
                    ));
                }
                Ok(LearnerModel::EpsilonMixedOptimal { alpha })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSpec {
    pub predictor: PredictorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<SigmaSpec>,
}

/// Normalization target for the frequency-inversion predictor: one scalar
/// (broadcast over states) or a per-state vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    Scalar(f64),
    PerState(Vec<f64>),
}

impl PredictorSpec {
    fn validate(&self, num_states: usize) -> Result<(), ConfigError> {
        match self.predictor {
            PredictorKind::Averaging => {
                let Some(beta) = self.beta else {
                    return Err(ConfigError::at(
                        "predictor.beta",
                        "required for the averaging predictor",
                    ));
                };
                if !beta.is_finite() || beta <= 0.0 {
                    return Err(ConfigError::at(
                        "predictor.beta",
                        format!("must be finite and positive, got {beta}"),
                    ));
                }
                match &self.sigma {
                    None | Some(SigmaSpec::Scalar(_)) => {}
                    Some(SigmaSpec::PerState(v)) => {
                        if v.len() != num_states {
                            return Err(ConfigError::at(
                                "predictor.sigma",
                                format!(
                                    "has {} entries for {num_states} states",
                                    v.len()
                                ),
                            ));
                        }
                    }
                }
                let finite = match &self.sigma {
                    None => true,
                    Some(SigmaSpec::Scalar(x)) => x.is_finite(),
                    Some(SigmaSpec::PerState(v)) => v.iter().all(|x| x.is_finite()),
                };
                if !finite {
                    return Err(ConfigError::at("predictor.sigma", "must be finite"));
                }
                Ok(())
            }
            PredictorKind::BestResponse | PredictorKind::ConstantZero => {
                if self.beta.is_some() {
                    return Err(ConfigError::at(
                        "predictor.beta",
                        format!("not a parameter of {:?}", self.predictor),
                    ));
                }
                if self.sigma.is_some() {
                    return Err(ConfigError::at(
                        "predictor.sigma",
                        format!("not a parameter of {:?}", self.predictor),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Per-state sigma vector, defaulting to zero.
    pub fn sigma_vector(&self, num_states: usize) -> Vec<f64> {
        match &self.sigma {
            None => vec![0.0; num_states],
            Some(SigmaSpec::Scalar(s)) => vec![*s; num_states],
            Some(SigmaSpec::PerState(v)) => v.clone(),
        }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum MeasureKind {
    Br,
    Klbp,
    L2,
    Linf,
}

impl MeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Br => "br",
            MeasureKind::Klbp => "klbp",
            MeasureKind::L2 => "l2",
            MeasureKind::Linf => "linf",
        }
    }
}

/// Seeds as an explicit list or as `{"count": n, "base": b}` meaning
/// `b, b+1, ..., b+n-1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List(Vec<u64>),
    Range {
        count: usize,
        #[serde(default)]
        base: u64,
    },
}

impl SeedSpec {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            SeedSpec::List(v) => v.clone(),
            SeedSpec::Range { count, base } => (0..*count as u64).map(|i| base + i).collect(),
        }
    }
}

/// A config with its environment loaded, every field validated, and the
/// condition hash computed.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub definition: EnvironmentDef,
    pub environment: Environment,
    /// First 16 hex digits of the SHA-256 of the experimental condition:
    /// environment, learner, predictor, measures, horizon, epsilon. Seeds
    /// and output paths are deliberately excluded so extending a sweep
    /// leaves existing runs untouched.
    pub hash: String,
}

#[derive(Serialize)]
struct ConditionFingerprint<'a> {
    environment: &'a EnvironmentDef,
    learner: &'a LearnerSpec,
    predictor: &'a PredictorSpec,
    measures: &'a [MeasureKind],
    horizon: usize,
    epsilon: f64,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Load the environment (relative paths resolve against `base_dir`),
    /// validate everything, and compute the condition hash.
    pub fn resolve(&self, base_dir: &Path) -> Result<ResolvedExperiment, ConfigError> {
        let definition = match &self.environment {
            EnvironmentSource::Inline(def) => def.clone(),
            EnvironmentSource::Path(rel) => {
                let mut path = PathBuf::from(rel);
                if path.is_relative() {
                    path = base_dir.join(path);
                }
                let text = fs::read_to_string(&path).map_err(|source| ConfigError::Io {
                    path,
                    source,
                })?;
                serde_json::from_str(&text)?
            }
        };
        let environment = definition
            .build()
            .map_err(|e| ConfigError::at("environment", e))?;
        self.validate(&environment)?;
        let fingerprint = ConditionFingerprint {
            environment: &definition,
            learner: &self.learner,
            predictor: &self.predictor,
            measures: &self.measures,
            horizon: self.horizon,
            epsilon: self.epsilon,
        };
        let bytes = serde_json::to_vec(&fingerprint)?;
        let digest = Sha256::digest(&bytes);
        let mut hash = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            hash.push_str(&format!("{byte:02x}"));
        }
        Ok(ResolvedExperiment {
            config: self.clone(),
            definition,
            environment,
            hash,
        })
    }

    fn validate(&self, environment: &Environment) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(ConfigError::at("horizon", "must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ConfigError::at(
                "epsilon",
                format!("must lie strictly between 0 and 1, got {}", self.epsilon),
            ));
        }
        if self.measures.is_empty() {
            return Err(ConfigError::at("measures", "need at least one measure"));
        }
        let mut sorted = self.measures.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.measures.len() {
            return Err(ConfigError::at("measures", "duplicate entries"));
        }
        if self.seeds.expand().is_empty() {
            return Err(ConfigError::at("seeds", "need at least one seed"));
        }
        let model = self.learner.build_model()?;
        if let LearnerModel::ConstantAction { action } = model {
            if action >= environment.num_actions() {
                return Err(ConfigError::at(
                    "learner.fixed_action",
                    format!(
                        "action {action} out of range for {} actions",
                        environment.num_actions()
                    ),
                ));
            }
        }
        self.predictor.validate(environment.num_states())?;
        Ok(())
    }
}

/// Output root priority: explicit CLI path, then the `PREFWATCH_OUT`
/// variable, then the config's `out_dir`, then `./prefwatch-out`.
pub fn resolve_out_dir(cli: Option<PathBuf>, config: &ExperimentConfig) -> PathBuf {
    if let Some(path) = cli {
        return path;
    }
    if let Ok(path) = std::env::var(OUT_DIR_ENV) {
        if !path.is_empty() {
            return PathBuf::from(path);
        }
    }
    if let Some(path) = &config.out_dir {
        return path.clone();
    }
    PathBuf::from(DEFAULT_OUT_DIR)
}
