use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::bias::{self, BiasValue};
use crate::experiment::ExperimentConfig;
use crate::harness::{BoundCheckResult, Harness, EXACT_SLACK, SIGMA_SLACK};
use crate::search::{derive_seed, estimate_pbar_and_success, ProbabilityVector, SearchSpace};
use crate::{Error, Execution, Result};

/// Stream index reserved for Monte Carlo seeds, far away from the per-resource streams.
const MONTE_CARLO_STREAM: u64 = u64::MAX;

/// One row of `q_table.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResourceScore {
    pub resource_label: String,
    pub q: f64,
    pub stderr: f64,
}

/// Everything an experiment produces. `checks` goes to `checks.jsonl`, the
/// rest to `bias_report.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub config_digest: String,
    pub algorithm: String,
    pub n: usize,
    pub k: usize,
    pub p: f64,
    pub budget: usize,
    pub replicates: usize,
    pub samples: usize,
    pub seed: u64,
    pub target: Vec<u8>,
    pub resources: Vec<ResourceScore>,
    pub weights: Vec<f64>,
    pub bias_set: BiasValue,
    /// Present when the ensemble carries explicit weights.
    pub bias_dist: Option<BiasValue>,
    pub divergence_degrees: f64,
    pub expected_pbar: Vec<f64>,
    #[serde(skip)]
    pub checks: Vec<BoundCheckResult>,
}

impl ResultRecord {
    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }
}

/// Validates `config`, estimates `P̄_f` for every resource and runs every
/// applicable check. Relative paths in `config` resolve against `base_dir`.
pub fn run_experiment(config: &ExperimentConfig, base_dir: &Path, exec: Execution) -> Result<ResultRecord> {
    config.validate()?;
    let space = SearchSpace::new(config.n)?;
    let target = config.build_target()?;
    let ensemble = config.build_ensemble(base_dir)?;
    let harness = Harness::new(exec);

    let mut pbars = Vec::with_capacity(ensemble.len());
    let mut successes = Vec::with_capacity(ensemble.len());
    for (i, resource) in ensemble.resources().iter().enumerate() {
        let (pbar, success) = estimate_pbar_and_success(
            &config.algorithm,
            space,
            resource,
            &target,
            config.budget,
            config.replicates,
            derive_seed(config.seed, i as u64),
            exec,
        )?;
        pbars.push(pbar);
        successes.push(success);
    }
    let weights = ensemble.weights();
    let refs: Vec<&ProbabilityVector> = pbars.iter().map(|a| &a.pbar).collect();
    let k = target.k();
    let p = bias::baseline_p(config.n as u128, k as u128)?;
    let bias_set = bias::bias_set(&refs, &target)?;
    let bias_dist = if ensemble.is_weighted() { Some(bias::bias_dist(&refs, &weights, &target)?) } else { None };
    let expected = ProbabilityVector::mixture(&refs, &weights)?;
    let divergence = bias::target_divergence(&target, expected.as_slice())?;

    let mc_seed = derive_seed(config.seed, MONTE_CARLO_STREAM);
    let mut checks = vec![
        harness.check_simplex_expectation(&refs, &weights)?,
        harness.check_conservation(&expected, k)?,
    ];
    for (j, &q_min) in config.q_min.iter().enumerate() {
        checks.push(harness.check_improbability(&pbars, &weights, &target, q_min)?);
        checks.push(harness.check_geometric(&pbars, &weights, &target, q_min)?);
        checks.extend(harness.check_famine_resources(&pbars, &target, q_min)?);
        checks.push(harness.check_famine_targets(&expected, k, q_min)?);
        checks.push(harness.check_famine_targets_loose(&expected, k, q_min)?);
        checks.push(harness.check_famine_distributions(
            &pbars,
            &target,
            q_min,
            config.samples,
            derive_seed(mc_seed, j as u64),
        )?);
    }
    let extra = config.q_min.len() as u64;
    checks.push(harness.check_bias_over_distributions(&pbars, &target, config.samples, derive_seed(mc_seed, extra))?);
    checks.push(harness.check_conservation_over_distributions(
        &pbars,
        k,
        config.samples,
        derive_seed(mc_seed, extra + 1),
    )?);

    let marginal: f64 = successes.iter().zip(&weights).map(|(s, w)| w * s.mean).sum();
    let sigma: f64 = successes.iter().zip(&weights).map(|(s, w)| (w * s.stderr).powi(2)).sum::<f64>().sqrt();
    if (marginal - p).abs() <= SIGMA_SLACK * sigma + EXACT_SLACK {
        checks.push(harness.check_futility_from_estimates(&successes, &weights, &target, config.algorithm.name())?);
    }

    Ok(ResultRecord {
        config_digest: config.digest(),
        algorithm: config.algorithm.name().to_owned(),
        n: config.n,
        k,
        p,
        budget: config.budget,
        replicates: config.replicates,
        samples: config.samples,
        seed: config.seed,
        target: target.to_ints(),
        resources: ensemble
            .resources()
            .iter()
            .zip(&successes)
            .map(|(r, s)| ResourceScore { resource_label: r.label().to_owned(), q: s.mean, stderr: s.stderr })
            .collect(),
        weights,
        bias_set,
        bias_dist,
        divergence_degrees: divergence.degrees,
        expected_pbar: expected.as_slice().to_vec(),
        checks,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

pub(crate) fn q_table(record: &ResultRecord) -> String {
    let mut out = String::from("resource_label,q,stderr\n");
    for r in &record.resources {
        out.push_str(&format!("{},{},{}\n", csv_field(&r.resource_label), r.q, r.stderr));
    }
    out
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Writes `q_table.csv`, `bias_report.json` and `checks.jsonl` into `dir`,
/// creating it if needed. Identical records give identical bytes.
pub fn write_outputs(record: &ResultRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
    write(dir, "q_table.csv", &q_table(record))?;
    let mut report = serde_json::to_string_pretty(record).expect("record serializes");
    report.push('\n');
    write(dir, "bias_report.json", &report)?;
    let mut lines = String::new();
    for c in &record.checks {
        lines.push_str(&c.to_json_line());
        lines.push('\n');
    }
    write(dir, "checks.jsonl", &lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str, alg: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(&format!(
            r#"
n = 16
budget = 32
replicates = 40
q_min = [0.25, 0.5]
samples = 2000
seed = 11
{extra}
[target]
k = 4
seed = 3

[algorithm]
{alg}

[ensemble]
generator = "needle"
needle_k = 1
count = 8
seed = 5
"#
        ))
        .unwrap()
    }

    #[test]
    fn uniform_needles_pass_every_check() {
        let record = run_experiment(&config("", "kind = \"uniform\""), Path::new("."), Execution::default()).unwrap();
        assert_eq!(record.resources.len(), 8);
        for r in &record.resources {
            assert!((r.q - 0.25).abs() < 1e-12);
        }
        assert!(record.bias_set.value.abs() < 1e-12);
        assert!(record.checks.iter().any(|c| c.name == "futility_of_bias_free_search"));
        for c in &record.checks {
            assert!(c.satisfied, "{c:?}");
        }
    }

    #[test]
    fn greedy_run_is_deterministic_across_execution_modes() {
        let c = config("", "kind = \"greedy_exploit\"\nepsilon = 0.1\nbeta = 5.0");
        let a = run_experiment(&c, Path::new("."), Execution::Serial).unwrap();
        let b = run_experiment(&c, Path::new("."), Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.all_satisfied());
    }

    #[test]
    fn csv_format() {
        let record = run_experiment(&config("", "kind = \"uniform\""), Path::new("."), Execution::Serial).unwrap();
        let csv = q_table(&record);
        assert!(csv.starts_with("resource_label,q,stderr\nneedle-"));
        assert_eq!(csv.lines().count(), 9);
        assert!(!csv.contains('\r'));
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }
}
