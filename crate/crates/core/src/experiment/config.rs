use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::harness::{binomial, ENUMERATION_LIMIT, MIN_SIMPLEX_SAMPLES};
use crate::resources::{make_fitness_ensemble, FitnessGenerator, ResourceEnsemble, SearchAlgorithm};
use crate::search::{SearchSpace, TargetFunction};
use crate::{Error, Result};

fn default_samples() -> usize {
    10_000
}

/// An experiment, as read from a TOML file.
///
/// ```toml
/// n = 16
/// budget = 32
/// replicates = 200
/// q_min = [0.25, 0.5]
/// samples = 10000        # simplex Monte Carlo draws, >= 1000
/// seed = 1
///
/// [target]
/// k = 4                  # random k-hot target drawn from `seed`
/// seed = 3               # or: bits = [0, 1, 1, 0, ...]
///
/// [algorithm]
/// kind = "greedy_exploit"
/// epsilon = 0.1
/// beta = 5.0
///
/// [ensemble]
/// generator = "needle"   # iid_uniform | iid_normal | needle
/// needle_k = 1
/// count = 8
/// seed = 5               # or: file = "ensemble.json"
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub budget: usize,
    pub replicates: usize,
    pub q_min: Vec<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: u64,
    /// Output directory; `--out` overrides it. Not part of the digest.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    pub target: TargetSpec,
    pub algorithm: SearchAlgorithm,
    pub ensemble: EnsembleSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    IidUniform,
    IidNormal,
    Needle,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub needle_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_dev: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Canonical form: compact JSON of every field except `out`.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of [`ExperimentConfig::canonical`], hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every argument and guard before any work starts. Guards
    /// (enumeration size, sample count) raise [`Error::ResourceLimit`].
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if self.budget == 0 {
            return Err(Error::invalid("budget must be at least 1"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if self.q_min.is_empty() {
            return Err(Error::invalid("q_min needs at least one value"));
        }
        if let Some(q) = self.q_min.iter().find(|q| !(**q > 0.0 && **q <= 1.0)) {
            return Err(Error::invalid(format!("q_min values must lie in (0, 1], got {q}")));
        }
        self.algorithm.validate()?;
        let k = self.target_k()?;
        if binomial(self.n, k) > ENUMERATION_LIMIT {
            return Err(Error::ResourceLimit(format!(
                "C({}, {k}) targets exceeds the enumeration limit of {ENUMERATION_LIMIT}",
                self.n
            )));
        }
        if self.samples < MIN_SIMPLEX_SAMPLES {
            return Err(Error::ResourceLimit(format!(
                "samples = {} is below the minimum of {MIN_SIMPLEX_SAMPLES}",
                self.samples
            )));
        }
        let e = &self.ensemble;
        match (&e.file, e.generator) {
            (Some(_), None) => {
                if e.count.is_some() || e.needle_k.is_some() || e.mean.is_some() || e.std_dev.is_some() {
                    return Err(Error::invalid("ensemble.file cannot be combined with generator fields"));
                }
            }
            (None, Some(_)) => {
                if e.count.unwrap_or(0) == 0 {
                    return Err(Error::invalid("ensemble.count must be at least 1"));
                }
                if e.seed.is_none() {
                    return Err(Error::invalid("ensemble.seed is required with a generator"));
                }
            }
            _ => return Err(Error::invalid("ensemble needs exactly one of `file` or `generator`")),
        }
        Ok(())
    }

    fn target_k(&self) -> Result<usize> {
        match (&self.target.bits, self.target.k) {
            (Some(bits), None) => {
                if self.target.seed.is_some() {
                    return Err(Error::invalid("target.seed only applies to random targets"));
                }
                if bits.len() != self.n {
                    return Err(Error::invalid(format!("target has {} bits but n = {}", bits.len(), self.n)));
                }
                Ok(TargetFunction::from_ints(bits)?.k())
            }
            (None, Some(k)) => {
                if k == 0 || k > self.n {
                    return Err(Error::invalid(format!("target k must lie in 1..={}, got {k}", self.n)));
                }
                Ok(k)
            }
            _ => Err(Error::invalid("target needs exactly one of `bits` or `k`")),
        }
    }

    pub fn build_target(&self) -> Result<TargetFunction> {
        match (&self.target.bits, self.target.k) {
            (Some(bits), _) => TargetFunction::from_ints(bits),
            (None, Some(k)) => TargetFunction::random(self.n, k, self.target.seed.unwrap_or(self.seed)),
            (None, None) => Err(Error::invalid("target needs `bits` or `k`")),
        }
    }

    /// Builds or loads the ensemble. Relative file paths resolve against `base_dir`.
    pub fn build_ensemble(&self, base_dir: &Path) -> Result<ResourceEnsemble> {
        let space = SearchSpace::new(self.n)?;
        let e = &self.ensemble;
        let ensemble = if let Some(file) = &e.file {
            let path = base_dir.join(file);
            let text = fs::read_to_string(&path)
                .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
            ResourceEnsemble::from_json(&text)?
        } else {
            let generator = match e.generator.expect("validated") {
                GeneratorKind::IidUniform => FitnessGenerator::IidUniform,
                GeneratorKind::IidNormal => FitnessGenerator::IidNormal {
                    mean: e.mean.unwrap_or(0.0),
                    std_dev: e.std_dev.unwrap_or(1.0),
                },
                GeneratorKind::Needle => FitnessGenerator::Needle { k: e.needle_k.unwrap_or(1) },
            };
            make_fitness_ensemble(space, generator, e.count.unwrap_or(0), e.seed.unwrap_or(0))?
        };
        if let Some(r) = ensemble.resources().iter().find(|r| r.len() < self.n) {
            return Err(Error::DomainMismatch { resource: r.len(), space: self.n });
        }
        match &e.weights {
            Some(w) => ResourceEnsemble::new(ensemble.resources().to_vec(), Some(w.clone())),
            None => Ok(ensemble),
        }
    }
}
