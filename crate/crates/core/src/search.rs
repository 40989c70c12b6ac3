//! The search framework: a finite space, a k-hot target, and an algorithm that
//! emits a probability vector over the space before every query.
//!
//! Per-query success of an algorithm on a resource is `t·P̄_f`, where `P̄_f`
//! is the time-average of the emitted distributions, itself averaged over
//! the randomness of the search history. [`estimate_pbar`] estimates the
//! outer expectation with independent seeded replicates.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::resources::{next_distribution, InformationResource, SearchAlgorithm};
use crate::{Error, Execution, Result};

/// Allowed drift of a probability vector's total mass at construction.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Drift above which a validated vector is rescaled to unit mass.
pub const RENORMALIZE_TOLERANCE: f64 = 1e-12;

/// Replicates are reduced in chunks of this size so memory stays bounded
/// while the summation order is independent of the scheduler.
const REPLICATE_CHUNK: usize = 256;

/// Finite search space `{0, .., n-1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchSpace {
    size: usize,
}

impl SearchSpace {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("search space must contain at least one element"));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, element: usize) -> bool {
        element < self.size
    }
}

/// A k-hot indicator vector over the search space marking the target set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TargetFunction {
    bits: Vec<bool>,
    k: usize,
}

impl TargetFunction {
    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        let k = bits.iter().filter(|&&b| b).count();
        if k == 0 {
            return Err(Error::invalid("target must contain at least one element"));
        }
        Ok(Self { bits, k })
    }

    /// Builds a target from 0/1 integers, the form used in config files.
    pub fn from_ints(bits: &[u8]) -> Result<Self> {
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::invalid(format!("target bits must be 0 or 1, got {bad}")));
        }
        Self::from_bits(bits.iter().map(|&b| b == 1).collect())
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut bits = vec![false; n];
        for &i in indices {
            if i >= n {
                return Err(Error::invalid(format!("target index {i} outside space of size {n}")));
            }
            if bits[i] {
                return Err(Error::invalid(format!("target index {i} repeated")));
            }
            bits[i] = true;
        }
        Self::from_bits(bits)
    }

    /// Uniformly random k-hot target.
    pub fn random(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
        }
        let mut rng = rng_from_seed(seed);
        let mut idx = rand::seq::index::sample(&mut rng, n, k).into_vec();
        idx.sort_unstable();
        Self::from_indices(n, &idx)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn contains(&self, element: usize) -> bool {
        self.bits.get(element).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// `‖t‖²`, which equals `k` for a k-hot vector.
    pub fn squared_norm(&self) -> f64 {
        self.k as f64
    }

    /// `t·v`; callers check lengths.
    pub fn dot(&self, v: &[f64]) -> f64 {
        self.indices().map(|i| v[i]).sum()
    }

    pub fn to_ints(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| u8::from(b)).collect()
    }
}

/// A point of the probability simplex over the search space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbabilityVector {
    mass: Vec<f64>,
}

impl ProbabilityVector {
    /// Validates nonnegativity and unit mass (within [`SIMPLEX_TOLERANCE`]),
    /// rescaling when the drift exceeds [`RENORMALIZE_TOLERANCE`].
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::invalid("probability vector must be non-empty"));
        }
        if let Some(bad) = mass.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::invalid(format!("probability entries must be finite and >= 0, got {bad}")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::invalid(format!("probability vector sums to {total}, not 1")));
        }
        let mut v = Self { mass };
        if (total - 1.0).abs() > RENORMALIZE_TOLERANCE {
            v.mass.iter_mut().for_each(|x| *x /= total);
        }
        Ok(v)
    }

    /// Rescales arbitrary nonnegative weights to unit mass.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::invalid("weights must have positive finite total"));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform vector over an empty space");
        Self { mass: vec![1.0 / n as f64; n] }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        assert!(at < n, "point mass outside the space");
        let mut mass = vec![0.0; n];
        mass[at] = 1.0;
        Self { mass }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.mass.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &x) in self.mass.iter().enumerate() {
            if x > self.mass[best] {
                best = i;
            }
        }
        best
    }

    /// Inverse-CDF draw of one element.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rand::Rng::random(rng);
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &x) in self.mass.iter().enumerate() {
            if x > 0.0 {
                acc += x;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }

    /// Weighted mixture `Σ w_j v_j` of equal-length probability vectors.
    pub fn mixture(vectors: &[&ProbabilityVector], weights: &[f64]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::invalid("mixture of zero vectors"));
        }
        if vectors.len() != weights.len() {
            return Err(Error::invalid(format!(
                "{} vectors but {} weights",
                vectors.len(),
                weights.len()
            )));
        }
        let n = vectors[0].len();
        if vectors.iter().any(|v| v.len() != n) {
            return Err(Error::invalid("mixture of vectors with different lengths"));
        }
        let mut mass = vec![0.0; n];
        for (v, &w) in vectors.iter().zip(weights) {
            for (m, &x) in mass.iter_mut().zip(&v.mass) {
                *m += w * x;
            }
        }
        Self::new(mass)
    }
}

impl TryFrom<Vec<f64>> for ProbabilityVector {
    type Error = Error;

    fn try_from(mass: Vec<f64>) -> Result<Self> {
        Self::new(mass)
    }
}

impl From<ProbabilityVector> for Vec<f64> {
    fn from(v: ProbabilityVector) -> Self {
        v.mass
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryStep {
    /// 1-based query index.
    pub index: usize,
    pub element: usize,
    pub value: f64,
}

/// Queried elements and their evaluations, in query order. Repeated queries
/// of the same element are kept.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchHistory {
    steps: Vec<HistoryStep>,
}

impl SearchHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_steps(steps: Vec<HistoryStep>) -> Result<Self> {
        let mut history = Self::new();
        for s in steps {
            if s.index != history.len() + 1 {
                return Err(Error::invalid("history step indices must run 1, 2, 3, ..."));
            }
            history.push(s.element, s.value)?;
        }
        Ok(history)
    }

    pub fn push(&mut self, element: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::invalid("history values must be finite"));
        }
        let index = self.steps.len() + 1;
        self.steps.push(HistoryStep { index, element, value });
        Ok(())
    }

    pub fn steps(&self) -> &[HistoryStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Whether any query landed in the target. Diagnostic only; the bounds
    /// are stated in terms of per-query success.
    pub fn hit(&self, target: &TargetFunction) -> bool {
        self.steps.iter().any(|s| target.contains(s.element))
    }
}

/// One complete search: the emitted distributions and the resulting history.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchRun {
    pub distributions: Vec<ProbabilityVector>,
    pub history: SearchHistory,
    pub seed: u64,
}

/// Estimate of `P̄_f` with per-component standard errors over replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedDistribution {
    pub pbar: ProbabilityVector,
    pub replicates: usize,
    pub stderr: Vec<f64>,
}

impl AveragedDistribution {
    /// Wraps a known `P̄_f` with zero estimation error.
    pub fn exact(pbar: ProbabilityVector) -> Self {
        let n = pbar.len();
        Self { pbar, replicates: 1, stderr: vec![0.0; n] }
    }

    /// Conservative standard error of `t·P̄_f`: the sum of the component
    /// standard errors over the target, which bounds the true value from
    /// above whatever the correlation between components.
    pub fn success_stderr(&self, t: &TargetFunction) -> f64 {
        t.dot(&self.stderr)
    }
}

impl From<ProbabilityVector> for AveragedDistribution {
    fn from(pbar: ProbabilityVector) -> Self {
        Self::exact(pbar)
    }
}

/// Mean and standard error of per-query success over replicate runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub replicates: usize,
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for the `index`-th child of `master`: the first word of ChaCha
/// stream `index` under key `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.next_u64()
}

fn check_inputs(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    budget: usize,
) -> Result<()> {
    if budget == 0 {
        return Err(Error::invalid("query budget must be at least 1"));
    }
    if resource.len() < space.size() {
        return Err(Error::DomainMismatch { resource: resource.len(), space: space.size() });
    }
    alg.validate()
}

/// Core loop shared by [`run_search`] and the streaming estimators. The
/// algorithm sees only `F(∅)` and the history so far.
fn drive<F>(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    budget: usize,
    seed: u64,
    mut on_step: F,
) -> Result<SearchHistory>
where
    F: FnMut(ProbabilityVector),
{
    let mut rng = rng_from_seed(seed);
    let mut history = SearchHistory::new();
    for _ in 0..budget {
        let p = next_distribution(alg, space, resource.init_info(), &history, &mut rng);
        let element = p.sample(&mut rng);
        history.push(element, resource.evaluate(element))?;
        on_step(p);
    }
    Ok(history)
}

pub fn run_search(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    budget: usize,
    seed: u64,
) -> Result<SearchRun> {
    check_inputs(alg, space, resource, budget)?;
    let mut distributions = Vec::with_capacity(budget);
    let history = drive(alg, space, resource, budget, seed, |p| distributions.push(p))?;
    Ok(SearchRun { distributions, history, seed })
}

/// Time-average of the emitted distributions of one run.
pub fn average_run(run: &SearchRun) -> Result<ProbabilityVector> {
    average_distributions(&run.distributions)
}

pub fn average_distributions(distributions: &[ProbabilityVector]) -> Result<ProbabilityVector> {
    let first = distributions
        .first()
        .ok_or_else(|| Error::invalid("cannot average an empty distribution sequence"))?;
    let n = first.len();
    let mut sum = vec![0.0; n];
    for p in distributions {
        if p.len() != n {
            return Err(Error::invalid("distribution sequence mixes lengths"));
        }
        for (s, &x) in sum.iter_mut().zip(p.as_slice()) {
            *s += x;
        }
    }
    let count = distributions.len() as f64;
    ProbabilityVector::new(sum.into_iter().map(|s| s / count).collect())
}

/// Runs one replicate and returns its time-averaged distribution without
/// keeping the per-step vectors.
fn replicate_average(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    budget: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; space.size()];
    drive(alg, space, resource, budget, seed, |p| {
        for (s, &x) in sum.iter_mut().zip(p.as_slice()) {
            *s += x;
        }
    })?;
    let b = budget as f64;
    sum.iter_mut().for_each(|s| *s /= b);
    Ok(sum)
}

/// Streams replicate averages to `visit` in replicate order, computing each
/// chunk under `exec`.
#[allow(clippy::too_many_arguments)]
fn for_each_replicate<V>(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    budget: usize,
    replicates: usize,
    seed: u64,
    exec: Execution,
    mut visit: V,
) -> Result<()>
where
    V: FnMut(&[f64]),
{
    check_inputs(alg, space, resource, budget)?;
    if replicates == 0 {
        return Err(Error::invalid("replicates must be at least 1"));
    }
    let mut start = 0;
    while start < replicates {
        let len = REPLICATE_CHUNK.min(replicates - start);
        let chunk = exec.map_indexed(len, |j| {
            let r = (start + j) as u64;
            replicate_average(alg, space, resource, budget, derive_seed(seed, r))
        });
        for avg in chunk {
            visit(&avg?);
        }
        start += len;
    }
    Ok(())
}

pub fn estimate_pbar(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    budget: usize,
    replicates: usize,
    seed: u64,
) -> Result<AveragedDistribution> {
    estimate_pbar_with(alg, space, resource, budget, replicates, seed, Execution::default())
}

/// [`estimate_pbar`] with an explicit scheduling mode. Output does not
/// depend on `exec`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_pbar_with(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    budget: usize,
    replicates: usize,
    seed: u64,
    exec: Execution,
) -> Result<AveragedDistribution> {
    Ok(estimate(alg, space, resource, None, budget, replicates, seed, exec)?.0)
}

/// Per-query success `t·P̄_f` with its exact replicate standard error.
#[allow(clippy::too_many_arguments)]
pub fn estimate_success(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    target: &TargetFunction,
    budget: usize,
    replicates: usize,
    seed: u64,
    exec: Execution,
) -> Result<SuccessEstimate> {
    estimate_pbar_and_success(alg, space, resource, target, budget, replicates, seed, exec).map(|(_, s)| s)
}

/// Both estimates from one set of replicate runs.
#[allow(clippy::too_many_arguments)]
pub fn estimate_pbar_and_success(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    target: &TargetFunction,
    budget: usize,
    replicates: usize,
    seed: u64,
    exec: Execution,
) -> Result<(AveragedDistribution, SuccessEstimate)> {
    if target.len() != space.size() {
        return Err(Error::invalid(format!(
            "target length {} does not match space size {}",
            target.len(),
            space.size()
        )));
    }
    let (pbar, success) = estimate(alg, space, resource, Some(target), budget, replicates, seed, exec)?;
    Ok((pbar, success.expect("target supplied")))
}

/// Welford mean/variance accumulator.
#[derive(Clone, Copy, Default)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        let c = self.count as f64;
        (self.m2.max(0.0) / (c - 1.0) / c).sqrt()
    }
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    alg: &SearchAlgorithm,
    space: SearchSpace,
    resource: &InformationResource,
    target: Option<&TargetFunction>,
    budget: usize,
    replicates: usize,
    seed: u64,
    exec: Execution,
) -> Result<(AveragedDistribution, Option<SuccessEstimate>)> {
    let mut components = vec![Moments::default(); space.size()];
    let mut success = Moments::default();
    for_each_replicate(alg, space, resource, budget, replicates, seed, exec, |avg| {
        for (m, &x) in components.iter_mut().zip(avg) {
            m.push(x);
        }
        if let Some(t) = target {
            success.push(t.dot(avg));
        }
    })?;
    let stderr = components.iter().map(Moments::stderr).collect();
    let pbar = ProbabilityVector::new(components.iter().map(|m| m.mean.max(0.0)).collect())?;
    let estimate = AveragedDistribution { pbar, replicates, stderr };
    let success = target.map(|_| SuccessEstimate { mean: success.mean, stderr: success.stderr(), replicates });
    Ok((estimate, success))
}

/// `q(t, f) = t·P̄_f`.
pub fn per_query_success(t: &TargetFunction, pbar: &ProbabilityVector) -> Result<f64> {
    if t.len() != pbar.len() {
        return Err(Error::invalid(format!(
            "target length {} does not match distribution length {}",
            t.len(),
            pbar.len()
        )));
    }
    Ok(t.dot(pbar.as_slice()).clamp(0.0, 1.0))
}
