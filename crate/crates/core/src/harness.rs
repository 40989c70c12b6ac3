//! Numerical checks of the bias identities and famine bounds.
//!
//! Identities over targets are checked by exhaustive enumeration of k-hot
//! vectors. Statements about the space of distributions over a resource set
//! are checked by Monte Carlo over the uniform (flat Dirichlet) measure on
//! the simplex. Every check returns a [`BoundCheckResult`].
//!
//! Acceptance rules: an inequality passes when
//! `empirical ≤ bound + 3·mc_stderr + 1e-9`; an identity passes when
//! `|empirical − bound| ≤ 3·mc_stderr + 1e-9`.

use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::bias::{self, standard_bias, BiasFormula};
use crate::resources::{validate_weights, ResourceEnsemble, SearchAlgorithm};
use crate::search::{
    derive_seed, estimate_success, rng_from_seed, AveragedDistribution, ProbabilityVector, SearchSpace,
    SuccessEstimate, TargetFunction,
};
use crate::{Error, Execution, Result};

/// Most k-hot targets an exact check will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

/// Fewest simplex samples accepted by the Monte Carlo checks.
pub const MIN_SIMPLEX_SAMPLES: usize = 1_000;

/// Monte Carlo acceptance width in standard errors.
pub const SIGMA_SLACK: f64 = 3.0;

/// Absolute slack for floating-point rounding.
pub const EXACT_SLACK: f64 = 1e-9;

const SAMPLE_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `empirical ≤ bound`
    AtMost,
    /// `empirical = bound`
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckResult {
    pub name: String,
    pub relation: Relation,
    pub empirical: f64,
    pub bound: f64,
    pub satisfied: bool,
    pub mc_stderr: f64,
    /// The bound exceeds 1 and so constrains nothing.
    pub vacuous: bool,
    pub instance_summary: String,
}

impl BoundCheckResult {
    pub fn at_most(name: &str, empirical: f64, bound: f64, mc_stderr: f64, summary: String) -> Self {
        let satisfied = empirical <= bound + SIGMA_SLACK * mc_stderr + EXACT_SLACK;
        Self {
            name: name.to_owned(),
            relation: Relation::AtMost,
            empirical,
            bound,
            satisfied,
            mc_stderr,
            vacuous: bias::is_vacuous(bound),
            instance_summary: summary,
        }
    }

    pub fn equal(name: &str, empirical: f64, target: f64, mc_stderr: f64, summary: String) -> Self {
        let satisfied = (empirical - target).abs() <= SIGMA_SLACK * mc_stderr + EXACT_SLACK;
        Self {
            name: name.to_owned(),
            relation: Relation::Equal,
            empirical,
            bound: target,
            satisfied,
            mc_stderr,
            vacuous: false,
            instance_summary: summary,
        }
    }

    /// Room left before the check fails; negative on failure.
    pub fn margin(&self) -> f64 {
        let slack = SIGMA_SLACK * self.mc_stderr + EXACT_SLACK;
        match self.relation {
            Relation::AtMost => self.bound + slack - self.empirical,
            Relation::Equal => slack - (self.empirical - self.bound).abs(),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("check result serializes")
    }
}

/// One distribution `D` over a resource set, drawn uniformly from the simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexSample {
    pub weights: Vec<f64>,
    pub seed: u64,
}

/// Uniform point of the `dim`-simplex: i.i.d. standard exponentials,
/// normalised by their sum.
pub fn sample_uniform_simplex(dim: usize, seed: u64) -> Result<SimplexSample> {
    if dim == 0 {
        return Err(Error::invalid("simplex dimension must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut weights: Vec<f64> = (0..dim).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(SimplexSample { weights, seed })
}

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

fn check_enumeration_guard(n: usize, k: usize) -> Result<u128> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let count = binomial(n, k);
    if count > ENUMERATION_LIMIT {
        return Err(Error::ResourceLimit(format!(
            "C({n}, {k}) = {count} targets exceeds the enumeration limit of {ENUMERATION_LIMIT}"
        )));
    }
    Ok(count)
}

/// Every k-hot vector of length `n`, in lexicographic order of the index sets.
#[derive(Clone, Debug)]
pub struct KHotTargets {
    n: usize,
    indices: Vec<usize>,
    remaining: u128,
}

impl Iterator for KHotTargets {
    type Item = TargetFunction;

    fn next(&mut self) -> Option<TargetFunction> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let current = TargetFunction::from_indices(self.n, &self.indices).expect("valid k-subset");
        if self.remaining > 0 {
            let k = self.indices.len();
            let mut i = k;
            while i > 0 {
                i -= 1;
                if self.indices[i] < self.n - k + i {
                    self.indices[i] += 1;
                    for j in i + 1..k {
                        self.indices[j] = self.indices[j - 1] + 1;
                    }
                    break;
                }
            }
        }
        Some(current)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.remaining as usize;
        (r, Some(r))
    }
}

impl ExactSizeIterator for KHotTargets {}

pub fn enumerate_khot(n: usize, k: usize) -> Result<KHotTargets> {
    let count = check_enumeration_guard(n, k)?;
    Ok(KHotTargets { n, indices: (0..k).collect(), remaining: count })
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_SIMPLEX_SAMPLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_SIMPLEX_SAMPLES} simplex samples, got {samples}"
        )));
    }
    Ok(())
}

fn common_len(pbars: &[AveragedDistribution]) -> Result<usize> {
    let first = pbars.first().ok_or_else(|| Error::invalid("no resources to check"))?;
    let n = first.pbar.len();
    if pbars.iter().any(|p| p.pbar.len() != n) {
        return Err(Error::invalid("averaged distributions differ in length"));
    }
    Ok(n)
}

fn check_target(pbars: &[AveragedDistribution], t: &TargetFunction) -> Result<()> {
    if common_len(pbars)? != t.len() {
        return Err(Error::invalid("target length differs from distribution length"));
    }
    Ok(())
}

fn check_q_min(q_min: f64) -> Result<()> {
    if !(q_min > 0.0 && q_min <= 1.0) {
        return Err(Error::invalid(format!("q_min must lie in (0, 1], got {q_min}")));
    }
    Ok(())
}

fn baseline(t: &TargetFunction) -> f64 {
    t.k() as f64 / t.len() as f64
}

fn fmt_target(t: &TargetFunction) -> String {
    t.to_ints().iter().map(|b| char::from(b'0' + b)).collect()
}

/// Runs the checks with a chosen bias formula and scheduling mode.
///
/// The formula hook exists so the checks can be pointed at a deliberately
/// wrong formula and shown to fail.
#[derive(Clone, Copy, Debug)]
pub struct Harness {
    bias: BiasFormula,
    exec: Execution,
}

impl Default for Harness {
    fn default() -> Self {
        Self { bias: standard_bias, exec: Execution::default() }
    }
}

impl Harness {
    pub fn new(exec: Execution) -> Self {
        Self { exec, ..Self::default() }
    }

    pub fn with_bias_formula(mut self, formula: BiasFormula) -> Self {
        self.bias = formula;
        self
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    /// Sum of `bias(t)` over every k-hot `t`; zero for any simplex vector.
    pub fn check_conservation(&self, pbar_mean: &ProbabilityVector, k: usize) -> Result<BoundCheckResult> {
        let n = pbar_mean.len();
        let p = k as f64 / n as f64;
        let sum: f64 = enumerate_khot(n, k)?.map(|t| (self.bias)(t.dot(pbar_mean.as_slice()), p)).sum();
        Ok(BoundCheckResult::at_most(
            "conservation_of_bias",
            sum.abs(),
            0.0,
            0.0,
            format!("n={n} k={k} targets={}", binomial(n, k)),
        ))
    }

    /// Weighted fraction of resources with `q ≥ q_min` against `(p + bias(D,t))/q_min`.
    pub fn check_improbability(
        &self,
        pbars: &[AveragedDistribution],
        weights: &[f64],
        t: &TargetFunction,
        q_min: f64,
    ) -> Result<BoundCheckResult> {
        check_q_min(q_min)?;
        check_target(pbars, t)?;
        validate_weights(weights, pbars.len())?;
        let p = baseline(t);
        let (empirical, success, sigma) = weighted_success(pbars, weights, t, q_min);
        let bias = (self.bias)(success, p);
        let name = if bias.abs() <= SIGMA_SLACK * sigma + EXACT_SLACK {
            "improbability_bias_free"
        } else {
            "improbability_of_favorable_resources"
        };
        Ok(BoundCheckResult::at_most(
            name,
            empirical,
            (p + bias) / q_min,
            sigma / q_min,
            format!("|B|={} p={p} bias={bias} q_min={q_min}", pbars.len()),
        ))
    }

    /// Same empirical probability as [`Harness::check_improbability`] against `√k·cos θ/q_min`.
    pub fn check_geometric(
        &self,
        pbars: &[AveragedDistribution],
        weights: &[f64],
        t: &TargetFunction,
        q_min: f64,
    ) -> Result<BoundCheckResult> {
        check_q_min(q_min)?;
        check_target(pbars, t)?;
        validate_weights(weights, pbars.len())?;
        let (empirical, _, sigma) = weighted_success(pbars, weights, t, q_min);
        let refs: Vec<&ProbabilityVector> = pbars.iter().map(|a| &a.pbar).collect();
        let expected = ProbabilityVector::mixture(&refs, weights)?;
        let theta = bias::target_divergence(t, expected.as_slice())?;
        let bound = bias::geometric_success_bound(t.k(), theta, q_min)?;
        Ok(BoundCheckResult::at_most(
            "geometric_divergence",
            empirical,
            bound,
            sigma / q_min,
            format!("|B|={} k={} theta={:.6}deg q_min={q_min}", pbars.len(), t.k(), theta.degrees),
        ))
    }

    /// Fraction of the set with `q ≥ q_min` against `(p + bias(B,t))/q_min`.
    ///
    /// When the set is bias-free (within `3σ`) the result also carries the
    /// bias-free reading `p/q_min` and its fitness-function form
    /// `|t|/(q_min |Ω|)`.
    pub fn check_famine_resources(
        &self,
        pbars: &[AveragedDistribution],
        t: &TargetFunction,
        q_min: f64,
    ) -> Result<Vec<BoundCheckResult>> {
        check_q_min(q_min)?;
        check_target(pbars, t)?;
        let p = baseline(t);
        let weights = vec![1.0 / pbars.len() as f64; pbars.len()];
        let favorable = pbars.iter().filter(|a| t.dot(a.pbar.as_slice()) >= q_min).count();
        let empirical = favorable as f64 / pbars.len() as f64;
        let (_, success, sigma) = weighted_success(pbars, &weights, t, q_min);
        let bias = (self.bias)(success, p);
        let summary = format!("|B|={} favorable={favorable} p={p} bias={bias} q_min={q_min}", pbars.len());
        let mut out = vec![BoundCheckResult::at_most(
            "famine_of_favorable_resources",
            empirical,
            (p + bias) / q_min,
            sigma / q_min,
            summary.clone(),
        )];
        if bias.abs() <= SIGMA_SLACK * sigma + EXACT_SLACK {
            out.push(BoundCheckResult::at_most("bias_free_proportion", empirical, p / q_min, sigma / q_min, summary.clone()));
            let fitness_form = t.k() as f64 / (q_min * t.len() as f64);
            out.push(BoundCheckResult::at_most(
                "famine_of_favorable_fitness_functions",
                empirical,
                fitness_form,
                sigma / q_min,
                summary,
            ));
        }
        Ok(out)
    }

    /// Marginal per-query success of a bias-free configuration equals `p`.
    #[allow(clippy::too_many_arguments)]
    pub fn check_futility(
        &self,
        alg: &SearchAlgorithm,
        ensemble: &ResourceEnsemble,
        t: &TargetFunction,
        budget: usize,
        replicates: usize,
        seed: u64,
    ) -> Result<BoundCheckResult> {
        let space = SearchSpace::new(t.len())?;
        let estimates = ensemble
            .resources()
            .iter()
            .enumerate()
            .map(|(i, r)| estimate_success(alg, space, r, t, budget, replicates, derive_seed(seed, i as u64), self.exec))
            .collect::<Result<Vec<_>>>()?;
        self.futility_from_estimates(&estimates, &ensemble.weights(), t, alg.name())
    }

    /// [`Harness::check_futility`] on already-estimated distributions.
    pub fn check_futility_from_pbars(
        &self,
        pbars: &[AveragedDistribution],
        weights: &[f64],
        t: &TargetFunction,
    ) -> Result<BoundCheckResult> {
        check_target(pbars, t)?;
        let estimates: Vec<SuccessEstimate> = pbars
            .iter()
            .map(|a| SuccessEstimate { mean: t.dot(a.pbar.as_slice()), stderr: a.success_stderr(t), replicates: a.replicates })
            .collect();
        self.futility_from_estimates(&estimates, weights, t, "precomputed")
    }

    /// [`Harness::check_futility`] on already-computed success estimates.
    pub fn check_futility_from_estimates(
        &self,
        estimates: &[SuccessEstimate],
        weights: &[f64],
        t: &TargetFunction,
        label: &str,
    ) -> Result<BoundCheckResult> {
        self.futility_from_estimates(estimates, weights, t, label)
    }

    fn futility_from_estimates(
        &self,
        estimates: &[SuccessEstimate],
        weights: &[f64],
        t: &TargetFunction,
        label: &str,
    ) -> Result<BoundCheckResult> {
        validate_weights(weights, estimates.len())?;
        let marginal: f64 = estimates.iter().zip(weights).map(|(e, w)| w * e.mean).sum();
        let var: f64 = estimates.iter().zip(weights).map(|(e, w)| (w * e.stderr).powi(2)).sum();
        Ok(BoundCheckResult::equal(
            "futility_of_bias_free_search",
            marginal,
            baseline(t),
            var.sqrt(),
            format!("alg={label} |B|={} n={} k={}", estimates.len(), t.len(), t.k()),
        ))
    }

    /// Fraction of all k-hot targets with `bias ≥ q_min` against `p/(p + q_min)`.
    pub fn check_famine_targets(&self, pbar_mean: &ProbabilityVector, k: usize, q_min: f64) -> Result<BoundCheckResult> {
        let empirical = self.favorable_target_fraction(pbar_mean, k, q_min)?;
        let n = pbar_mean.len();
        let p = k as f64 / n as f64;
        let bound = bias::famine_target_bound(p, q_min)?;
        Ok(BoundCheckResult::at_most(
            "famine_of_applicable_targets",
            empirical,
            bound.tight,
            0.0,
            format!("n={n} k={k} q_min={q_min} loose={}", bound.loose),
        ))
    }

    /// Same fraction as [`Harness::check_famine_targets`] against `p/q_min`.
    pub fn check_famine_targets_loose(&self, pbar_mean: &ProbabilityVector, k: usize, q_min: f64) -> Result<BoundCheckResult> {
        let empirical = self.favorable_target_fraction(pbar_mean, k, q_min)?;
        let n = pbar_mean.len();
        let p = k as f64 / n as f64;
        let bound = bias::famine_target_bound(p, q_min)?;
        Ok(BoundCheckResult::at_most(
            "famine_of_applicable_targets_loose",
            empirical,
            bound.loose,
            0.0,
            format!("n={n} k={k} q_min={q_min}"),
        ))
    }

    fn favorable_target_fraction(&self, pbar_mean: &ProbabilityVector, k: usize, q_min: f64) -> Result<f64> {
        check_q_min(q_min)?;
        let n = pbar_mean.len();
        let p = k as f64 / n as f64;
        let targets = enumerate_khot(n, k)?;
        let total = targets.len();
        let favorable = targets.filter(|t| (self.bias)(t.dot(pbar_mean.as_slice()), p) >= q_min).count();
        Ok(favorable as f64 / total as f64)
    }

    /// Per-sample `bias(D, t)` for `samples` uniform draws of `D`, in sample order.
    fn sampled_biases(&self, successes: &[f64], p: f64, samples: usize, seed: u64) -> Result<Vec<f64>> {
        let dim = successes.len();
        let bias = self.bias;
        self.exec
            .map_indexed(samples, |i| {
                let d = sample_uniform_simplex(dim, derive_seed(seed, i as u64))?;
                let success: f64 = d.weights.iter().zip(successes).map(|(w, q)| w * q).sum();
                Ok(bias(success, p))
            })
            .into_iter()
            .collect()
    }

    /// Uniform measure of `{D : bias(D,t) ≥ q_min}` against `(p + bias(B,t))/q_min`.
    pub fn check_famine_distributions(
        &self,
        pbars: &[AveragedDistribution],
        t: &TargetFunction,
        q_min: f64,
        samples: usize,
        seed: u64,
    ) -> Result<BoundCheckResult> {
        check_q_min(q_min)?;
        check_samples(samples)?;
        check_target(pbars, t)?;
        let p = baseline(t);
        let successes: Vec<f64> = pbars.iter().map(|a| t.dot(a.pbar.as_slice())).collect();
        let hits = self.sampled_biases(&successes, p, samples, seed)?.into_iter().filter(|&b| b >= q_min).count();
        let frac = hits as f64 / samples as f64;
        let set_bias = (self.bias)(successes.iter().sum::<f64>() / successes.len() as f64, p);
        Ok(BoundCheckResult::at_most(
            "famine_of_favorable_distributions",
            frac,
            (p + set_bias) / q_min,
            (frac * (1.0 - frac) / samples as f64).sqrt(),
            format!("|B|={} samples={samples} p={p} bias_set={set_bias} q_min={q_min}", pbars.len()),
        ))
    }

    /// Monte Carlo mean of `bias(D,t)` over uniform `D` equals `bias(B,t)`.
    pub fn check_bias_over_distributions(
        &self,
        pbars: &[AveragedDistribution],
        t: &TargetFunction,
        samples: usize,
        seed: u64,
    ) -> Result<BoundCheckResult> {
        check_samples(samples)?;
        check_target(pbars, t)?;
        let p = baseline(t);
        let successes: Vec<f64> = pbars.iter().map(|a| t.dot(a.pbar.as_slice())).collect();
        let values = self.sampled_biases(&successes, p, samples, seed)?;
        let (mean, stderr) = mean_and_stderr(&values);
        let set_bias = bias::bias_set(&pbars.iter().map(|a| &a.pbar).collect::<Vec<_>>(), t)?.value;
        Ok(BoundCheckResult::equal(
            "bias_over_distributions",
            mean,
            set_bias,
            stderr,
            format!("|B|={} samples={samples} target={}", pbars.len(), fmt_target(t)),
        ))
    }

    /// `Σ_t ∫ bias(D,t) dD = 0`, with every target integrated over the same samples.
    pub fn check_conservation_over_distributions(
        &self,
        pbars: &[AveragedDistribution],
        k: usize,
        samples: usize,
        seed: u64,
    ) -> Result<BoundCheckResult> {
        check_samples(samples)?;
        let n = common_len(pbars)?;
        let targets: Vec<TargetFunction> = enumerate_khot(n, k)?.collect();
        let p = k as f64 / n as f64;
        let dim = pbars.len();
        let bias = self.bias;

        let mut means = vec![0.0; targets.len()];
        let mut m2 = vec![0.0; targets.len()];
        let mut count = 0usize;
        let mut start = 0;
        while start < samples {
            let len = SAMPLE_CHUNK.min(samples - start);
            let chunk = self.exec.map_indexed(len, |j| -> Result<Vec<f64>> {
                let d = sample_uniform_simplex(dim, derive_seed(seed, (start + j) as u64))?;
                let mut mixed = vec![0.0; n];
                for (w, a) in d.weights.iter().zip(pbars) {
                    for (m, x) in mixed.iter_mut().zip(a.pbar.as_slice()) {
                        *m += w * x;
                    }
                }
                Ok(targets.iter().map(|t| bias(t.dot(&mixed), p)).collect())
            });
            for row in chunk {
                let row = row?;
                count += 1;
                let c = count as f64;
                for ((mu, s), x) in means.iter_mut().zip(m2.iter_mut()).zip(row) {
                    let delta = x - *mu;
                    *mu += delta / c;
                    *s += delta * (x - *mu);
                }
            }
            start += len;
        }
        let total: f64 = means.iter().sum();
        let c = count as f64;
        let var: f64 = m2.iter().map(|s| s / (c - 1.0) / c).sum();
        Ok(BoundCheckResult::equal(
            "conservation_over_distributions",
            total,
            0.0,
            var.sqrt(),
            format!("|B|={dim} n={n} k={k} targets={} samples={samples}", targets.len()),
        ))
    }

    /// Weighted average of simplex vectors is a simplex vector.
    pub fn check_simplex_expectation(&self, pbars: &[&ProbabilityVector], weights: &[f64]) -> Result<BoundCheckResult> {
        if pbars.is_empty() {
            return Err(Error::invalid("no vectors to average"));
        }
        validate_weights(weights, pbars.len())?;
        let n = pbars[0].len();
        if pbars.iter().any(|p| p.len() != n) {
            return Err(Error::invalid("vectors differ in length"));
        }
        let mut mixed = vec![0.0; n];
        for (p, w) in pbars.iter().zip(weights) {
            for (m, x) in mixed.iter_mut().zip(p.as_slice()) {
                *m += w * x;
            }
        }
        let drift = (mixed.iter().sum::<f64>() - 1.0).abs();
        let negative = mixed.iter().fold(0.0f64, |acc, &x| acc.max(-x));
        Ok(BoundCheckResult::at_most(
            "simplex_expectation",
            drift.max(negative),
            0.0,
            0.0,
            format!("vectors={} n={n}", pbars.len()),
        ))
    }
}

/// `(Σ w·1[q ≥ q_min], Σ w·q, Σ w·σ_q)`.
fn weighted_success(pbars: &[AveragedDistribution], weights: &[f64], t: &TargetFunction, q_min: f64) -> (f64, f64, f64) {
    let mut favorable = 0.0;
    let mut success = 0.0;
    let mut sigma = 0.0;
    for (a, &w) in pbars.iter().zip(weights) {
        let q = t.dot(a.pbar.as_slice());
        if q >= q_min {
            favorable += w;
        }
        success += w * q;
        sigma += w * a.success_stderr(t);
    }
    (favorable, success, sigma)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn check_conservation(pbar_mean: &ProbabilityVector, k: usize) -> Result<BoundCheckResult> {
    Harness::default().check_conservation(pbar_mean, k)
}

pub fn check_improbability(
    pbars: &[AveragedDistribution],
    weights: &[f64],
    t: &TargetFunction,
    q_min: f64,
) -> Result<BoundCheckResult> {
    Harness::default().check_improbability(pbars, weights, t, q_min)
}

pub fn check_geometric(
    pbars: &[AveragedDistribution],
    weights: &[f64],
    t: &TargetFunction,
    q_min: f64,
) -> Result<BoundCheckResult> {
    Harness::default().check_geometric(pbars, weights, t, q_min)
}

pub fn check_famine_resources(
    pbars: &[AveragedDistribution],
    t: &TargetFunction,
    q_min: f64,
) -> Result<Vec<BoundCheckResult>> {
    Harness::default().check_famine_resources(pbars, t, q_min)
}

pub fn check_futility(
    alg: &SearchAlgorithm,
    ensemble: &ResourceEnsemble,
    t: &TargetFunction,
    budget: usize,
    replicates: usize,
    seed: u64,
) -> Result<BoundCheckResult> {
    Harness::default().check_futility(alg, ensemble, t, budget, replicates, seed)
}

pub fn check_famine_targets(pbar_mean: &ProbabilityVector, k: usize, q_min: f64) -> Result<BoundCheckResult> {
    Harness::default().check_famine_targets(pbar_mean, k, q_min)
}

pub fn check_famine_distributions(
    pbars: &[AveragedDistribution],
    t: &TargetFunction,
    q_min: f64,
    samples: usize,
    seed: u64,
) -> Result<BoundCheckResult> {
    Harness::default().check_famine_distributions(pbars, t, q_min, samples, seed)
}

pub fn check_bias_over_distributions(
    pbars: &[AveragedDistribution],
    t: &TargetFunction,
    samples: usize,
    seed: u64,
) -> Result<BoundCheckResult> {
    Harness::default().check_bias_over_distributions(pbars, t, samples, seed)
}

pub fn check_conservation_over_distributions(
    pbars: &[AveragedDistribution],
    k: usize,
    samples: usize,
    seed: u64,
) -> Result<BoundCheckResult> {
    Harness::default().check_conservation_over_distributions(pbars, k, samples, seed)
}

pub fn check_simplex_expectation(pbars: &[&ProbabilityVector], weights: &[f64]) -> Result<BoundCheckResult> {
    Harness::default().check_simplex_expectation(pbars, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resources::{make_fitness_ensemble, FitnessGenerator};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new(v.to_vec()).unwrap()
    }

    fn exact(vs: &[&[f64]]) -> Vec<AveragedDistribution> {
        vs.iter().map(|v| AveragedDistribution::exact(pv(v))).collect()
    }

    fn t(bits: &[u8]) -> TargetFunction {
        TargetFunction::from_ints(bits).unwrap()
    }

    #[test]
    fn simplex_sampler_basics() {
        assert_eq!(sample_uniform_simplex(1, 5).unwrap().weights, vec![1.0]);
        assert_eq!(sample_uniform_simplex(4, 9).unwrap(), sample_uniform_simplex(4, 9).unwrap());
        assert!(sample_uniform_simplex(0, 1).is_err());
        let s = sample_uniform_simplex(6, 2).unwrap();
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_sampler_first_moment() {
        // E[D_i] = 1/3 on the 3-simplex; Var[D_i] = (1/3)(2/3)/4 = 1/18
        let draws: Vec<SimplexSample> =
            (0..100_000).map(|i| sample_uniform_simplex(3, derive_seed(77, i)).unwrap()).collect();
        for c in 0..3 {
            let xs: Vec<f64> = draws.iter().map(|d| d.weights[c]).collect();
            let (mean, se) = mean_and_stderr(&xs);
            assert!((mean - 1.0 / 3.0).abs() <= 3.0 * se, "coord {c}: {mean} ± {se}");
            assert_relative_eq!(se, (1.0f64 / 18.0 / 100_000.0).sqrt(), max_relative = 0.05);
        }
    }

    #[test]
    fn khot_enumeration() {
        let basis: Vec<Vec<u8>> = enumerate_khot(3, 1).unwrap().map(|t| t.to_ints()).collect();
        assert_eq!(basis, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        assert_eq!(enumerate_khot(4, 2).unwrap().count(), 6);
        let all: Vec<TargetFunction> = enumerate_khot(10, 3).unwrap().collect();
        assert_eq!(all.len(), 120);
        assert!(all.iter().all(|t| t.k() == 3));
        let distinct: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), 120);
        // lexicographic in the index sets
        let idx: Vec<Vec<usize>> = all.iter().map(|t| t.indices().collect()).collect();
        let mut sorted = idx.clone();
        sorted.sort();
        assert_eq!(idx, sorted);
        assert_eq!(enumerate_khot(5, 5).unwrap().count(), 1);
        assert!(matches!(enumerate_khot(60, 30), Err(Error::ResourceLimit(_))));
        assert!(enumerate_khot(3, 0).is_err());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(200, 100), u128::MAX);
    }

    #[test]
    fn conservation_examples() {
        let r = check_conservation(&pv(&[0.4, 0.3, 0.2, 0.1]), 1).unwrap();
        assert!(r.satisfied && r.empirical < 1e-12);
        for k in 1..=5 {
            let r = check_conservation(&ProbabilityVector::uniform(5), k).unwrap();
            assert!(r.satisfied && r.empirical < 1e-12);
        }
        // terms {0.9, 0.8, 0.3} − 2/3
        let r = check_conservation(&pv(&[0.7, 0.2, 0.1]), 2).unwrap();
        assert!(r.empirical < 1e-12);
    }

    #[test]
    fn improbability_examples() {
        // q values {0.9, 0.1, 0.2} with p = 0.1 on a 10-element space, k = 1
        let mk = |q: f64| {
            let mut v = vec![(1.0 - q) / 9.0; 10];
            v[0] = q;
            v
        };
        let (a, b, c) = (mk(0.9), mk(0.1), mk(0.2));
        let pbars = exact(&[&a, &b, &c]);
        let target = TargetFunction::from_indices(10, &[0]).unwrap();
        let r = check_improbability(&pbars, &[1. / 3., 1. / 3., 1. / 3.], &target, 0.8).unwrap();
        assert_relative_eq!(r.empirical, 1.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(r.bound, 0.5, epsilon = 1e-12);
        assert!(r.satisfied);

        // unbiased: q = k/n everywhere
        let pbars = exact(&[&[0.25; 4], &[0.25; 4]]);
        let target = t(&[1, 0, 0, 0]);
        let r = check_improbability(&pbars, &[0.5, 0.5], &target, 0.5).unwrap();
        assert_eq!(r.name, "improbability_bias_free");
        assert_eq!((r.empirical, r.bound), (0.0, 0.5));

        // saturation
        let pbars = exact(&[&[1.0, 0.0]]);
        let r = check_improbability(&pbars, &[1.0], &t(&[1, 0]), 1.0).unwrap();
        assert_eq!((r.empirical, r.bound), (1.0, 1.0));
        assert!(r.satisfied);

        assert!(check_improbability(&pbars, &[1.0], &t(&[1, 0]), 0.0).is_err());
    }

    #[test]
    fn famine_resources_examples() {
        // |B| = 1, q = 0.7, p = 0.5 → bias 0.2, bound 1.4
        let pbars = exact(&[&[0.7, 0.3]]);
        let out = check_famine_resources(&pbars, &t(&[1, 0]), 0.5).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].empirical, 1.0);
        assert_relative_eq!(out[0].bound, 1.4, epsilon = 1e-12);
        assert!(out[0].satisfied && out[0].vacuous);

        // bias-free set also reports the p/q_min readings
        let pbars = exact(&[&[0.5, 0.0, 0.5, 0.0], &[0.0, 0.5, 0.0, 0.5]]);
        let out = check_famine_resources(&pbars, &t(&[1, 0, 0, 0]), 0.5).unwrap();
        let names: Vec<_> = out.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(
            names,
            ["famine_of_favorable_resources", "bias_free_proportion", "famine_of_favorable_fitness_functions"]
        );
        assert!(out.iter().all(|r| r.satisfied));
        assert_eq!(out[0].empirical, 0.5);
        assert_eq!(out[1].bound, 0.5);
    }

    #[test]
    fn futility_uniform_and_cancellation() {
        let space = SearchSpace::new(16).unwrap();
        let ens = make_fitness_ensemble(space, FitnessGenerator::IidUniform, 3, 4).unwrap();
        let target = TargetFunction::random(16, 4, 1).unwrap();
        let r = check_futility(&SearchAlgorithm::Uniform, &ens, &target, 8, 20, 3).unwrap();
        assert!(r.satisfied);
        assert_relative_eq!(r.empirical, 0.25, epsilon = 1e-12);

        let greedy = SearchAlgorithm::GreedyExploit { epsilon: 1.0, beta: 2.0 };
        let ens5 = make_fitness_ensemble(space, FitnessGenerator::IidNormal { mean: 0.0, std_dev: 1.0 }, 5, 4).unwrap();
        let r = check_futility(&greedy, &ens5, &target, 8, 20, 3).unwrap();
        assert!(r.satisfied);
        assert_relative_eq!(r.empirical, 0.25, epsilon = 1e-12);

        let pbars = exact(&[&[0.5, 0.5, 0.0, 0.0], &[0.0, 0.0, 0.5, 0.5]]);
        let r = Harness::default().check_futility_from_pbars(&pbars, &[0.5, 0.5], &t(&[1, 1, 0, 0])).unwrap();
        assert_eq!(r.empirical, 0.5);
        assert!(r.satisfied);
    }

    #[test]
    fn famine_targets_examples() {
        let v = pv(&[0.4, 0.3, 0.2, 0.1]);
        let r = check_famine_targets(&v, 1, 0.2).unwrap();
        assert_eq!(r.empirical, 0.0);
        assert_relative_eq!(r.bound, 0.25 / 0.45, epsilon = 1e-12);
        let r = check_famine_targets(&v, 1, 0.1).unwrap();
        assert_eq!(r.empirical, 0.25);
        assert_relative_eq!(r.bound, 0.25 / 0.35, epsilon = 1e-12);
        assert!(r.satisfied);
        for k in 1..=4 {
            assert_eq!(check_famine_targets(&ProbabilityVector::uniform(4), k, 0.01).unwrap().empirical, 0.0);
        }
    }

    #[test]
    fn famine_distributions_examples() {
        // bias(D, t) = D(f1) − 1/3 ≥ 1/2 iff D(f1) ≥ 5/6, which has measure 1/6
        let pbars = exact(&[&[1., 0., 0.], &[0., 0., 1.]]);
        let target = t(&[1, 0, 0]);
        let r = check_famine_distributions(&pbars, &target, 0.5, 20_000, 8).unwrap();
        assert!((r.empirical - 1.0 / 6.0).abs() <= 3.0 * r.mc_stderr, "{r:?}");
        assert_relative_eq!(r.bound, 1.0, epsilon = 1e-12);
        assert!(r.satisfied);

        let flat = exact(&[&[1. / 3.; 3], &[1. / 3.; 3]]);
        assert_eq!(check_famine_distributions(&flat, &target, 0.05, 1000, 1).unwrap().empirical, 0.0);
        // q_min beyond 1 − p is unreachable
        assert_eq!(check_famine_distributions(&pbars, &target, 0.7, 1000, 1).unwrap().empirical, 0.0);
        assert!(check_famine_distributions(&pbars, &target, 0.5, 999, 1).is_err());
    }

    #[test]
    fn bias_over_distributions_examples() {
        let pbars = exact(&[&[1., 0., 0.], &[0., 0., 1.]]);
        let r = check_bias_over_distributions(&pbars, &t(&[1, 0, 0]), 20_000, 3).unwrap();
        assert_relative_eq!(r.bound, 1.0 / 6.0, epsilon = 1e-15);
        assert!(r.satisfied, "{r:?}");

        let flat = exact(&[&[0.25; 4], &[0.25; 4], &[0.25; 4]]);
        let r = check_bias_over_distributions(&flat, &t(&[0, 1, 1, 0]), 1000, 3).unwrap();
        assert!(r.empirical.abs() < 1e-15 && r.satisfied);

        let single = exact(&[&[0.1, 0.6, 0.3]]);
        let r = check_bias_over_distributions(&single, &t(&[0, 1, 0]), 1000, 3).unwrap();
        assert!(r.mc_stderr < 1e-15);
        assert_relative_eq!(r.empirical, 0.6 - 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn stderr_halves_when_samples_quadruple() {
        // O(1/√N): doubling N shrinks the error by √2, quadrupling by 2
        let pbars = exact(&[&[1., 0., 0.], &[0., 0., 1.], &[0., 1., 0.]]);
        let target = t(&[1, 0, 0]);
        let a = check_bias_over_distributions(&pbars, &target, 10_000, 5).unwrap();
        let b = check_bias_over_distributions(&pbars, &target, 20_000, 5).unwrap();
        let ratio = a.mc_stderr / b.mc_stderr;
        assert!((ratio - 2f64.sqrt()).abs() < 0.2 * 2f64.sqrt(), "{ratio}");
    }

    #[test]
    fn conservation_over_distributions_examples() {
        let pbars = exact(&[&[1., 0., 0.], &[0., 0., 1.]]);
        let r = check_conservation_over_distributions(&pbars, 1, 2000, 1).unwrap();
        assert!(r.empirical.abs() < 1e-12, "{r:?}");

        let pbars = exact(&[&[0.1, 0.2, 0.3, 0.4], &[0.7, 0.1, 0.1, 0.1], &[0.25; 4]]);
        let r = check_conservation_over_distributions(&pbars, 2, 1000, 9).unwrap();
        assert!(r.empirical.abs() < 1e-12 && r.satisfied);

        let r = check_conservation_over_distributions(&pbars, 4, 1000, 9).unwrap();
        assert!(r.empirical.abs() < 1e-15);
    }

    #[test]
    fn simplex_expectation_examples() {
        let a = pv(&[1., 0.]);
        let b = pv(&[0., 1.]);
        assert!(check_simplex_expectation(&[&a, &b], &[0.5, 0.5]).unwrap().satisfied);
        assert!(check_simplex_expectation(&[&a, &b], &[0.0, 1.0]).unwrap().empirical < 1e-15);
        assert!(check_simplex_expectation(&[&a, &b], &[0.6, 0.6]).is_err());
    }

    #[test]
    fn corrupted_formula_breaks_conservation() {
        fn halved(success: f64, baseline: f64) -> f64 {
            success - baseline / 2.0
        }
        let h = Harness::default().with_bias_formula(halved);
        assert!(!h.check_conservation(&pv(&[0.4, 0.3, 0.2, 0.1]), 2).unwrap().satisfied);
    }

    #[test]
    fn serial_and_parallel_checks_agree() {
        let pbars = exact(&[&[0.5, 0.2, 0.3], &[0.1, 0.1, 0.8], &[0.3, 0.3, 0.4]]);
        let target = t(&[0, 1, 1]);
        let s = Harness::new(Execution::Serial);
        let p = Harness::new(Execution::Parallel);
        assert_eq!(
            s.check_bias_over_distributions(&pbars, &target, 5000, 2).unwrap(),
            p.check_bias_over_distributions(&pbars, &target, 5000, 2).unwrap()
        );
        assert_eq!(
            s.check_conservation_over_distributions(&pbars, 2, 3000, 2).unwrap(),
            p.check_conservation_over_distributions(&pbars, 2, 3000, 2).unwrap()
        );
    }

    proptest! {
        #[test]
        fn conservation_holds_for_random_vectors(
            raw in proptest::collection::vec(0.0f64..1.0, 2..10),
            k_seed in any::<usize>(),
        ) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let v = ProbabilityVector::from_weights(raw).unwrap();
            let k = 1 + k_seed % v.len();
            let r = check_conservation(&v, k).unwrap();
            prop_assert!(r.satisfied && r.empirical < 1e-9);
        }

        #[test]
        fn famine_targets_never_violated(
            raw in proptest::collection::vec(0.0f64..1.0, 2..9),
            k_seed in any::<usize>(),
            q_min in 0.01f64..=1.0,
        ) {
            prop_assume!(raw.iter().sum::<f64>() > 1e-6);
            let v = ProbabilityVector::from_weights(raw).unwrap();
            let k = 1 + k_seed % v.len();
            prop_assert!(check_famine_targets(&v, k, q_min).unwrap().satisfied);
            prop_assert!(Harness::default().check_famine_targets_loose(&v, k, q_min).unwrap().satisfied);
        }

        #[test]
        fn simplex_expectation_of_random_vectors(
            seed in any::<u64>(),
            count in 1usize..100,
        ) {
            let vs: Vec<ProbabilityVector> = (0..count as u64)
                .map(|i| ProbabilityVector::new(sample_uniform_simplex(7, derive_seed(seed, i)).unwrap().weights).unwrap())
                .collect();
            let refs: Vec<&ProbabilityVector> = vs.iter().collect();
            let w = sample_uniform_simplex(count, seed ^ 0xdead).unwrap().weights;
            let r = check_simplex_expectation(&refs, &w).unwrap();
            prop_assert!(r.satisfied && r.empirical < 1e-9);
        }

        #[test]
        fn markov_bounds_hold_on_random_sets(
            raws in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 5), 1..8),
            bits in proptest::collection::vec(any::<bool>(), 5),
            q_min in 0.05f64..=1.0,
        ) {
            prop_assume!(bits.iter().any(|&b| b));
            prop_assume!(raws.iter().all(|r| r.iter().sum::<f64>() > 1e-6));
            let pbars: Vec<AveragedDistribution> = raws
                .into_iter()
                .map(|r| AveragedDistribution::exact(ProbabilityVector::from_weights(r).unwrap()))
                .collect();
            let target = TargetFunction::from_bits(bits).unwrap();
            let w = vec![1.0 / pbars.len() as f64; pbars.len()];
            prop_assert!(check_improbability(&pbars, &w, &target, q_min).unwrap().satisfied);
            prop_assert!(check_geometric(&pbars, &w, &target, q_min).unwrap().satisfied);
            for r in check_famine_resources(&pbars, &target, q_min).unwrap() {
                prop_assert!(r.satisfied, "{:?}", r);
            }
        }
    }
}
