//! Concrete information resources and the built-in search algorithms.
//!
//! A resource is a lookup table `F(ω)` plus an opaque initialization blob
//! `F(∅)`. Algorithms map `(F(∅), history)` to the next query distribution.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore};
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::search::{
    rng_from_seed, ProbabilityVector, SearchHistory, SearchSpace, TargetFunction, SIMPLEX_TOLERANCE,
};
use crate::{Error, Result};

/// Largest instance count accepted by [`make_classification_ensemble`].
pub const MAX_CLASSIFICATION_INSTANCES: u32 = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct InformationResource {
    label: String,
    init_info: Vec<u8>,
    table: Vec<f64>,
}

impl InformationResource {
    pub fn new(label: impl Into<String>, init_info: Vec<u8>, table: Vec<f64>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::invalid("resource table must be non-empty"));
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("resource table values must be finite"));
        }
        Ok(Self { label: label.into(), init_info, table })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `F(∅)`.
    pub fn init_info(&self) -> &[u8] {
        &self.init_info
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// `F(ω)`.
    pub fn evaluate(&self, element: usize) -> f64 {
        self.table[element]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ResourceDoc::from(self)).expect("resource serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ResourceDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        doc.try_into()
    }
}

/// Wire form: `{label, n, init_info (base64), table}`, plus `weight` when the
/// resource is an ensemble member with an explicit distribution.
#[derive(Serialize, Deserialize)]
struct ResourceDoc {
    label: String,
    n: usize,
    init_info: String,
    table: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

impl From<&InformationResource> for ResourceDoc {
    fn from(r: &InformationResource) -> Self {
        Self {
            label: r.label.clone(),
            n: r.table.len(),
            init_info: BASE64.encode(&r.init_info),
            table: r.table.clone(),
            weight: None,
        }
    }
}

impl TryFrom<ResourceDoc> for InformationResource {
    type Error = Error;

    fn try_from(doc: ResourceDoc) -> Result<Self> {
        if doc.n != doc.table.len() {
            return Err(Error::Parse(format!(
                "resource {:?}: n = {} but table has {} entries",
                doc.label,
                doc.n,
                doc.table.len()
            )));
        }
        let init = BASE64
            .decode(doc.init_info.as_bytes())
            .map_err(|e| Error::Parse(format!("resource {:?}: init_info: {e}", doc.label)))?;
        InformationResource::new(doc.label, init, doc.table)
    }
}

/// The finite set `B`, optionally with a distribution `D` over it.
#[derive(Clone, Debug, PartialEq)]
pub struct ResourceEnsemble {
    resources: Vec<InformationResource>,
    weights: Option<Vec<f64>>,
}

impl ResourceEnsemble {
    pub fn new(resources: Vec<InformationResource>, weights: Option<Vec<f64>>) -> Result<Self> {
        if resources.is_empty() {
            return Err(Error::invalid("ensemble must contain at least one resource"));
        }
        if let Some(w) = &weights {
            validate_weights(w, resources.len())?;
        }
        Ok(Self { resources, weights })
    }

    pub fn uniform(resources: Vec<InformationResource>) -> Result<Self> {
        Self::new(resources, None)
    }

    pub fn resources(&self) -> &[InformationResource] {
        &self.resources
    }

    pub fn len(&self) -> usize {
        self.resources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.resources.is_empty()
    }

    pub fn is_weighted(&self) -> bool {
        self.weights.is_some()
    }

    /// Explicit weights, or the uniform distribution over the set.
    pub fn weights(&self) -> Vec<f64> {
        match &self.weights {
            Some(w) => w.clone(),
            None => vec![1.0 / self.resources.len() as f64; self.resources.len()],
        }
    }

    /// JSON array of resource documents; members carry `weight` when the
    /// ensemble is weighted.
    pub fn to_json(&self) -> String {
        let docs: Vec<ResourceDoc> = self
            .resources
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut d = ResourceDoc::from(r);
                d.weight = self.weights.as_ref().map(|w| w[i]);
                d
            })
            .collect();
        serde_json::to_string(&docs).expect("ensemble serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let docs: Vec<ResourceDoc> = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let weighted = docs.iter().filter(|d| d.weight.is_some()).count();
        if weighted != 0 && weighted != docs.len() {
            return Err(Error::Parse("either every ensemble member has a weight or none does".into()));
        }
        let weights = (weighted != 0).then(|| docs.iter().map(|d| d.weight.unwrap_or(0.0)).collect());
        let resources = docs.into_iter().map(InformationResource::try_from).collect::<Result<_>>()?;
        Self::new(resources, weights)
    }
}

pub(crate) fn validate_weights(w: &[f64], expected: usize) -> Result<()> {
    if w.len() != expected {
        return Err(Error::invalid(format!("{} weights for {expected} resources", w.len())));
    }
    if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid("weights must be finite and nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::invalid(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Built-in search algorithms.
///
/// `Fixed` ignores everything and emits the same distribution at every
/// step; it is the simplest algorithm with a known `P̄_f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SearchAlgorithm {
    Uniform,
    GreedyExploit {
        /// Weight of the uniform exploration component.
        epsilon: f64,
        /// Inverse temperature of the softmax over observed values.
        beta: f64,
    },
    Genetic {
        population: usize,
        mutation_rate: f64,
        crossover_rate: f64,
    },
    Fixed { mass: ProbabilityVector },
}

impl SearchAlgorithm {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SearchAlgorithm::Uniform | SearchAlgorithm::Fixed { .. } => Ok(()),
            SearchAlgorithm::GreedyExploit { epsilon, beta } => {
                if !(0.0..=1.0).contains(&epsilon) {
                    return Err(Error::invalid(format!("epsilon must lie in [0, 1], got {epsilon}")));
                }
                if beta.is_nan() || beta < 0.0 {
                    return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
                }
                Ok(())
            }
            SearchAlgorithm::Genetic { population, mutation_rate, crossover_rate } => {
                if population < 2 {
                    return Err(Error::invalid("genetic population must be at least 2"));
                }
                if !(0.0..=1.0).contains(&mutation_rate) {
                    return Err(Error::invalid(format!("mutation rate must lie in [0, 1], got {mutation_rate}")));
                }
                if !(0.0..=1.0).contains(&crossover_rate) {
                    return Err(Error::invalid(format!("crossover rate must lie in [0, 1], got {crossover_rate}")));
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SearchAlgorithm::Uniform => "uniform",
            SearchAlgorithm::GreedyExploit { .. } => "greedy_exploit",
            SearchAlgorithm::Genetic { .. } => "genetic",
            SearchAlgorithm::Fixed { .. } => "fixed",
        }
    }
}

/// Distribution for the next query given `F(∅)` and the history so far.
///
/// * uniform: the uniform vector.
/// * greedy-exploit: `ε·uniform + (1−ε)·softmax(β·F)` over the distinct
///   elements already queried; uniform while the history is empty. An
///   infinite `β` splits the exploitation mass evenly over the maxima.
/// * genetic: the last `population` queries form the population. A full
///   generation of offspring is bred by fitness-proportional selection,
///   uniform bitwise crossover and per-bit mutation on a fixed-width
///   encoding of element ids (ids that overflow the space wrap modulo
///   `n`), and the emitted distribution is the offspring frequency. Until
///   a full population has been queried the distribution is uniform.
pub fn next_distribution<R: RngCore + ?Sized>(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    _init_info: &[u8],
    history: &SearchHistory,
    rng: &mut R,
) -> ProbabilityVector {
    let n = space.size();
    match alg {
        SearchAlgorithm::Uniform => ProbabilityVector::uniform(n),
        SearchAlgorithm::Fixed { mass: p } => {
            assert_eq!(p.len(), n, "fixed distribution length differs from search space");
            p.clone()
        }
        SearchAlgorithm::GreedyExploit { epsilon, beta } => greedy(n, *epsilon, *beta, history),
        SearchAlgorithm::Genetic { population, mutation_rate, crossover_rate } => {
            genetic(n, *population, *mutation_rate, *crossover_rate, history, rng)
        }
    }
}

fn greedy(n: usize, epsilon: f64, beta: f64, history: &SearchHistory) -> ProbabilityVector {
    if history.is_empty() || epsilon >= 1.0 {
        return ProbabilityVector::uniform(n);
    }
    let observed: BTreeMap<usize, f64> = history.steps().iter().map(|s| (s.element, s.value)).collect();
    let best = observed.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let scores: Vec<(usize, f64)> = if beta.is_infinite() {
        observed.iter().map(|(&e, &v)| (e, if v == best { 1.0 } else { 0.0 })).collect()
    } else {
        observed.iter().map(|(&e, &v)| (e, (beta * (v - best)).exp())).collect()
    };
    let z: f64 = scores.iter().map(|(_, s)| s).sum();
    let mut mass = vec![epsilon / n as f64; n];
    for (e, s) in scores {
        mass[e] += (1.0 - epsilon) * s / z;
    }
    ProbabilityVector::new(mass).expect("greedy mixture is a simplex vector")
}

fn genetic<R: RngCore + ?Sized>(
    n: usize,
    population: usize,
    mutation_rate: f64,
    crossover_rate: f64,
    history: &SearchHistory,
    rng: &mut R,
) -> ProbabilityVector {
    let steps = history.steps();
    if steps.len() < population {
        return ProbabilityVector::uniform(n);
    }
    let parents = &steps[steps.len() - population..];
    let worst = parents.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    let fitness: Vec<f64> = parents.iter().map(|s| s.value - worst).collect();
    let selector = WeightedIndex::new(&fitness).ok();
    let pick = |rng: &mut R| match &selector {
        Some(w) => parents[w.sample(rng)].element as u64,
        None => parents[rng.random_range(0..population)].element as u64,
    };

    let width = (usize::BITS - (n.max(2) - 1).leading_zeros()) as u64;
    let width_mask = if width >= 64 { u64::MAX } else { (1u64 << width) - 1 };
    let mut mass = vec![0.0; n];
    let share = 1.0 / population as f64;
    for _ in 0..population {
        let a = pick(rng);
        let b = pick(rng);
        let mut child = if rng.random::<f64>() < crossover_rate {
            let mask = rng.random::<u64>() & width_mask;
            (a & mask) | (b & !mask & width_mask)
        } else {
            a
        };
        for bit in 0..width {
            if rng.random::<f64>() < mutation_rate {
                child ^= 1 << bit;
            }
        }
        mass[(child % n as u64) as usize] += share;
    }
    ProbabilityVector::new(mass).expect("offspring frequencies form a simplex vector")
}

/// How fitness tables are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum FitnessGenerator {
    /// i.i.d. `U[0, 1)`.
    IidUniform,
    /// i.i.d. normal.
    IidNormal { mean: f64, std_dev: f64 },
    /// Value 1 on `k` random elements, 0 elsewhere.
    Needle { k: usize },
}

impl FitnessGenerator {
    fn tag(&self) -> &'static str {
        match self {
            FitnessGenerator::IidUniform => "iid_uniform",
            FitnessGenerator::IidNormal { .. } => "iid_normal",
            FitnessGenerator::Needle { .. } => "needle",
        }
    }
}

pub fn make_fitness_table(
    space: SearchSpace,
    generator: FitnessGenerator,
    seed: u64,
) -> Result<InformationResource> {
    let n = space.size();
    let mut rng = rng_from_seed(seed);
    let table = match generator {
        FitnessGenerator::IidUniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        FitnessGenerator::IidNormal { mean, std_dev } => {
            if !mean.is_finite() {
                return Err(Error::invalid("normal generator mean must be finite"));
            }
            if !(std_dev.is_finite() && std_dev >= 0.0) {
                return Err(Error::invalid(format!("normal generator std_dev must be finite and >= 0, got {std_dev}")));
            }
            let dist = Normal::new(mean, std_dev)
                .map_err(|e| Error::invalid(format!("normal generator: {e}")))?;
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
        FitnessGenerator::Needle { k } => {
            if k == 0 || k > n {
                return Err(Error::invalid(format!("needle count must lie in 1..={n}, got {k}")));
            }
            let mut table = vec![0.0; n];
            for i in rand::seq::index::sample(&mut rng, n, k) {
                table[i] = 1.0;
            }
            table
        }
    };
    InformationResource::new(format!("{}-{seed}", generator.tag()), Vec::new(), table)
}

/// `count` tables from one generator, seeded from `seed` by index.
pub fn make_fitness_ensemble(
    space: SearchSpace,
    generator: FitnessGenerator,
    count: usize,
    seed: u64,
) -> Result<ResourceEnsemble> {
    let resources = (0..count as u64)
        .map(|i| make_fitness_table(space, generator, crate::search::derive_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    ResourceEnsemble::uniform(resources)
}

/// Binary classification over `m` instances as a search problem.
///
/// Elements are labelings `c ∈ {0,1}^m` encoded as bitmasks. A hidden true
/// labeling is drawn; the target holds every labeling whose error rate
/// against it is at most `target_error_threshold`. Each dataset draws a
/// random non-empty training subset; its table holds the 0/1 training loss
/// of every labeling and its `F(∅)` lists `(instance, label)` byte pairs.
pub fn make_classification_ensemble(
    instances: u32,
    target_error_threshold: f64,
    datasets: usize,
    seed: u64,
) -> Result<(SearchSpace, TargetFunction, ResourceEnsemble)> {
    if instances > MAX_CLASSIFICATION_INSTANCES {
        return Err(Error::ResourceLimit(format!(
            "{instances} instances means 2^{instances} labelings; limit is {MAX_CLASSIFICATION_INSTANCES}"
        )));
    }
    if instances == 0 {
        return Err(Error::invalid("need at least one instance"));
    }
    if !(target_error_threshold > 0.0 && target_error_threshold < 1.0) {
        return Err(Error::invalid(format!(
            "error threshold must lie in (0, 1), got {target_error_threshold}"
        )));
    }
    if datasets == 0 {
        return Err(Error::invalid("need at least one dataset"));
    }
    let m = instances;
    let n = 1usize << m;
    let space = SearchSpace::new(n)?;
    let mut rng = rng_from_seed(seed);
    let full = (n - 1) as u32;
    let truth = rng.random::<u32>() & full;

    let max_errors = target_error_threshold * m as f64 + 1e-9;
    let bits = (0..n as u32).map(|c| ((c ^ truth).count_ones() as f64) <= max_errors).collect();
    let target = TargetFunction::from_bits(bits)?;

    let mut resources = Vec::with_capacity(datasets);
    for d in 0..datasets {
        let mut subset = 0u32;
        while subset == 0 {
            subset = rng.random::<u32>() & full;
        }
        let size = subset.count_ones() as f64;
        let table = (0..n as u32).map(|c| ((c ^ truth) & subset).count_ones() as f64 / size).collect();
        let init: Vec<u8> = (0..m)
            .filter(|i| subset >> i & 1 == 1)
            .flat_map(|i| [i as u8, (truth >> i & 1) as u8])
            .collect();
        resources.push(InformationResource::new(format!("dataset-{d}"), init, table)?);
    }
    Ok((space, target, ResourceEnsemble::uniform(resources)?))
}
