use std::fmt;
use std::str::FromStr;

use crate::harness::{sample_uniform_simplex, BoundCheckResult, Harness, MIN_SIMPLEX_SAMPLES};
use crate::resources::{
    make_classification_ensemble, make_fitness_ensemble, FitnessGenerator, InformationResource, ResourceEnsemble,
    SearchAlgorithm,
};
use crate::search::{
    derive_seed, estimate_pbar_with, AveragedDistribution, ProbabilityVector, SearchSpace, TargetFunction,
};
use crate::{Error, Result};

/// Per-query success thresholds swept by the battery.
pub const BATTERY_Q_MIN: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

const BATTERY_N: usize = 16;
const BATTERY_RESOURCES: usize = 6;
const BATTERY_BUDGET: usize = 24;
const BATTERY_REPLICATES: usize = 64;
const BATTERY_SEEDS: u64 = 4;

/// Which group of checks `verify` runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    /// Closed-form identities and bounds with no sampling error.
    Exact,
    /// Checks over estimated distributions or sampled ensembles.
    MonteCarlo,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Suite::Exact),
            "montecarlo" => Ok(Suite::MonteCarlo),
            "all" => Ok(Suite::All),
            other => Err(Error::invalid(format!("unknown suite `{other}`; expected exact, montecarlo or all"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Exact => "exact",
            Suite::MonteCarlo => "montecarlo",
            Suite::All => "all",
        })
    }
}

/// One algorithm, ensemble and target from the verification battery.
#[derive(Clone, Debug)]
pub struct BatteryInstance {
    pub label: String,
    pub algorithm: SearchAlgorithm,
    pub ensemble: ResourceEnsemble,
    pub target: TargetFunction,
    pub budget: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl BatteryInstance {
    /// Estimates `P̄_f` for every resource, seeding resource `i` with `derive_seed(seed, i)`.
    pub fn estimate(&self, harness: &Harness) -> Result<Vec<AveragedDistribution>> {
        let space = SearchSpace::new(self.target.len())?;
        self.ensemble
            .resources()
            .iter()
            .enumerate()
            .map(|(i, r)| {
                estimate_pbar_with(
                    &self.algorithm,
                    space,
                    r,
                    self.budget,
                    self.replicates,
                    derive_seed(self.seed, i as u64),
                    harness.execution(),
                )
            })
            .collect()
    }
}

fn battery_algorithms() -> Vec<SearchAlgorithm> {
    vec![
        SearchAlgorithm::Uniform,
        SearchAlgorithm::GreedyExploit { epsilon: 0.1, beta: 0.0 },
        SearchAlgorithm::GreedyExploit { epsilon: 0.1, beta: 1.0 },
        SearchAlgorithm::GreedyExploit { epsilon: 0.1, beta: 5.0 },
        SearchAlgorithm::Genetic { population: 6, mutation_rate: 0.1, crossover_rate: 0.7 },
    ]
}

fn battery_generators() -> Vec<FitnessGenerator> {
    vec![
        FitnessGenerator::IidUniform,
        FitnessGenerator::IidNormal { mean: 0.0, std_dev: 1.0 },
        FitnessGenerator::Needle { k: 2 },
    ]
}

/// The `k` highest-valued elements of `table`, ties broken by index.
fn top_k(table: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&a, &b| table[b].total_cmp(&table[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Converts a loss table into a score table (`1 − loss`) so that the
/// maximizing algorithms prefer low training loss.
fn as_accuracy(ensemble: &ResourceEnsemble) -> Result<ResourceEnsemble> {
    let resources = ensemble
        .resources()
        .iter()
        .map(|r| {
            InformationResource::new(
                format!("{}-accuracy", r.label()),
                r.init_info().to_vec(),
                r.table().iter().map(|l| 1.0 - l).collect(),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ResourceEnsemble::uniform(resources)
}

/// Deterministic battery of algorithm/ensemble/target combinations.
///
/// Every algorithm is paired with every generator over four seeds. Even
/// seeds use a random target; odd seeds use the top elements of the first
/// resource, which the exploiting algorithms find often. Two small
/// classification problems close the list.
pub fn ensemble_battery(seed: u64) -> Result<Vec<BatteryInstance>> {
    let space = SearchSpace::new(BATTERY_N)?;
    let mut out = Vec::new();
    let mut index = 0u64;
    for algorithm in battery_algorithms() {
        for generator in battery_generators() {
            for r in 0..BATTERY_SEEDS {
                let instance_seed = derive_seed(seed, index);
                index += 1;
                let ensemble = make_fitness_ensemble(space, generator, BATTERY_RESOURCES, instance_seed)?;
                let k = 1 + r as usize;
                let (target, kind) = if r % 2 == 0 {
                    (TargetFunction::random(BATTERY_N, k, derive_seed(instance_seed, 1 << 20))?, "random")
                } else {
                    let top = top_k(ensemble.resources()[0].table(), k);
                    (TargetFunction::from_indices(BATTERY_N, &top)?, "aligned")
                };
                out.push(BatteryInstance {
                    label: format!("{}/{}/{kind}-k{k}/s{r}", algorithm.name(), ensemble.resources()[0].label()),
                    algorithm: algorithm.clone(),
                    ensemble,
                    target,
                    budget: BATTERY_BUDGET,
                    replicates: BATTERY_REPLICATES,
                    seed: derive_seed(instance_seed, 1 << 21),
                });
            }
        }
    }
    for algorithm in [SearchAlgorithm::Uniform, SearchAlgorithm::GreedyExploit { epsilon: 0.1, beta: 5.0 }] {
        let instance_seed = derive_seed(seed, index);
        index += 1;
        let (_, target, losses) = make_classification_ensemble(6, 0.2, BATTERY_RESOURCES, instance_seed)?;
        out.push(BatteryInstance {
            label: format!("{}/classification-m6", algorithm.name()),
            algorithm,
            ensemble: as_accuracy(&losses)?,
            target,
            budget: 32,
            replicates: BATTERY_REPLICATES,
            seed: derive_seed(instance_seed, 1 << 21),
        });
    }
    Ok(out)
}

fn exact_suite(seed: u64, harness: &Harness) -> Result<Vec<BoundCheckResult>> {
    let mut out = Vec::new();
    let mut stream = 0u64;
    let mut next_seed = || {
        stream += 1;
        derive_seed(seed, stream)
    };

    for i in 0..20usize {
        let n = 3 + i % 10;
        let k = 1 + (i * 7) % n;
        let v = ProbabilityVector::new(sample_uniform_simplex(n, next_seed())?.weights)?;
        out.push(harness.check_conservation(&v, k)?);
    }

    for (n, k) in [(10, 2), (12, 3), (8, 1)] {
        for _ in 0..2 {
            let v = ProbabilityVector::new(sample_uniform_simplex(n, next_seed())?.weights)?;
            for q_min in [0.05, 0.1, 0.2] {
                out.push(harness.check_famine_targets(&v, k, q_min)?);
                out.push(harness.check_famine_targets_loose(&v, k, q_min)?);
            }
        }
        // A point mass concentrates all bias on the targets containing it.
        let point = ProbabilityVector::point_mass(n, 0);
        out.push(harness.check_famine_targets(&point, k, 0.5)?);
    }

    for count in 3..8usize {
        let n = 4 + count;
        let vectors = (0..count)
            .map(|_| ProbabilityVector::new(sample_uniform_simplex(n, next_seed())?.weights))
            .collect::<Result<Vec<_>>>()?;
        let weights = sample_uniform_simplex(count, next_seed())?.weights;
        let refs: Vec<&ProbabilityVector> = vectors.iter().collect();
        out.push(harness.check_simplex_expectation(&refs, &weights)?);
    }
    Ok(out)
}

fn montecarlo_suite(seed: u64, samples: usize, harness: &Harness) -> Result<Vec<BoundCheckResult>> {
    let mut out = Vec::new();
    let mc_seed = derive_seed(seed, u64::MAX);
    let mut stream = 0u64;
    let mut next_seed = || {
        stream += 1;
        derive_seed(mc_seed, stream)
    };

    let battery = ensemble_battery(seed)?;
    for (i, instance) in battery.iter().enumerate() {
        let pbars = instance.estimate(harness)?;
        let weights = instance.ensemble.weights();
        let t = &instance.target;
        for q_min in BATTERY_Q_MIN {
            out.push(harness.check_improbability(&pbars, &weights, t, q_min)?);
            out.push(harness.check_geometric(&pbars, &weights, t, q_min)?);
            out.extend(harness.check_famine_resources(&pbars, t, q_min)?);
        }
        if instance.algorithm == SearchAlgorithm::Uniform {
            out.push(harness.check_futility_from_pbars(&pbars, &weights, t)?);
        }
        if i % 12 == 0 && t.k() <= 3 {
            out.push(harness.check_bias_over_distributions(&pbars, t, samples, next_seed())?);
            out.push(harness.check_famine_distributions(&pbars, t, 0.1, samples, next_seed())?);
            out.push(harness.check_conservation_over_distributions(&pbars, t.k(), samples, next_seed())?);
        }
    }

    // Exploration-only greedy search behaves like uniform sampling.
    let space = SearchSpace::new(BATTERY_N)?;
    let ensemble = make_fitness_ensemble(space, FitnessGenerator::IidUniform, BATTERY_RESOURCES, next_seed())?;
    let t = TargetFunction::random(BATTERY_N, 3, next_seed())?;
    let greedy = SearchAlgorithm::GreedyExploit { epsilon: 1.0, beta: 5.0 };
    out.push(harness.check_futility(&greedy, &ensemble, &t, BATTERY_BUDGET, 200, next_seed())?);

    // Two opposite point masses: the reference instance for the distribution checks.
    let pair = [
        AveragedDistribution::exact(ProbabilityVector::new(vec![1.0, 0.0, 0.0])?),
        AveragedDistribution::exact(ProbabilityVector::new(vec![0.0, 0.0, 1.0])?),
    ];
    let t = TargetFunction::from_ints(&[1, 0, 0])?;
    out.push(harness.check_bias_over_distributions(&pair, &t, samples, next_seed())?);
    for q_min in [0.5, 0.6, 2.0 / 3.0] {
        out.push(harness.check_famine_distributions(&pair, &t, q_min, samples, next_seed())?);
    }
    for k in 1..=2 {
        out.push(harness.check_conservation_over_distributions(&pair, k, samples, next_seed())?);
    }
    Ok(out)
}

/// Runs a verification suite. Output depends only on `suite`, `seed` and
/// `samples`, never on the execution mode.
pub fn run_suite(suite: Suite, seed: u64, samples: usize, harness: &Harness) -> Result<Vec<BoundCheckResult>> {
    if suite != Suite::Exact && samples < MIN_SIMPLEX_SAMPLES {
        return Err(Error::ResourceLimit(format!(
            "samples = {samples} is below the minimum of {MIN_SIMPLEX_SAMPLES}"
        )));
    }
    let mut out = Vec::new();
    if matches!(suite, Suite::Exact | Suite::All) {
        out.extend(exact_suite(seed, harness)?);
    }
    if matches!(suite, Suite::MonteCarlo | Suite::All) {
        out.extend(montecarlo_suite(seed, samples, harness)?);
    }
    Ok(out)
}
