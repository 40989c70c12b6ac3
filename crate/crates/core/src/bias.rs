//! Bias of an algorithm toward a target, over a set or a distribution of
//! information resources, and the closed-form bounds built from it.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::resources::validate_weights;
use crate::search::{ProbabilityVector, TargetFunction};
use crate::{Error, Result};

/// Slack allowed when checking that a bias lies in `[-p, 1-p]`.
const RANGE_SLACK: f64 = 1e-12;

/// Largest `n` for which `k/n` is handled in plain `f64`.
const F64_EXACT_LIMIT_LOG2: f64 = 53.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasValue {
    pub value: f64,
    /// `p = k/n`.
    pub baseline: f64,
}

impl BiasValue {
    /// `p + bias`, the expected per-query success.
    pub fn success(&self) -> f64 {
        self.baseline + self.value
    }
}

/// Angle between a target and an averaged distribution, in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceAngle {
    pub degrees: f64,
}

impl DivergenceAngle {
    pub fn from_degrees(degrees: f64) -> Self {
        Self { degrees }
    }

    pub fn radians(&self) -> f64 {
        self.degrees.to_radians()
    }

    pub fn cos(&self) -> f64 {
        self.radians().cos()
    }
}

/// Signature shared by the standard bias formula and test doubles.
pub type BiasFormula = fn(success: f64, baseline: f64) -> f64;

/// `bias = t·P̄ − k/n`, written in terms of the success `t·P̄`.
pub fn standard_bias(success: f64, baseline: f64) -> f64 {
    success - baseline
}

/// `p = k/n`. Exact for powers of two up to `2^127`.
pub fn baseline_p(n: u128, k: u128) -> Result<f64> {
    if k == 0 || n == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    Ok(k as f64 / n as f64)
}

fn check_target_len(t: &TargetFunction, pbars: &[&ProbabilityVector]) -> Result<()> {
    if let Some(bad) = pbars.iter().find(|p| p.len() != t.len()) {
        return Err(Error::invalid(format!(
            "distribution length {} does not match target length {}",
            bad.len(),
            t.len()
        )));
    }
    Ok(())
}

fn baseline_of(t: &TargetFunction) -> f64 {
    t.k() as f64 / t.len() as f64
}

/// Bias over a finite set `B` (uniform weighting).
pub fn bias_set(pbars: &[&ProbabilityVector], t: &TargetFunction) -> Result<BiasValue> {
    if pbars.is_empty() {
        return Err(Error::invalid("bias over an empty set of resources"));
    }
    check_target_len(t, pbars)?;
    let total: f64 = pbars.iter().map(|p| t.dot(p.as_slice())).sum();
    let baseline = baseline_of(t);
    Ok(BiasValue { value: standard_bias(total / pbars.len() as f64, baseline), baseline })
}

/// Bias over a distribution `D` given as simplex weights over the set.
pub fn bias_dist(pbars: &[&ProbabilityVector], weights: &[f64], t: &TargetFunction) -> Result<BiasValue> {
    if pbars.is_empty() {
        return Err(Error::invalid("bias over an empty set of resources"));
    }
    validate_weights(weights, pbars.len())?;
    check_target_len(t, pbars)?;
    let success: f64 = pbars.iter().zip(weights).map(|(p, w)| w * t.dot(p.as_slice())).sum();
    let baseline = baseline_of(t);
    Ok(BiasValue { value: standard_bias(success, baseline), baseline })
}

/// `θ = arccos(t·v / (‖t‖ ‖v‖))`. `v` may be any nonzero vector, so scaled
/// copies of a distribution give the same angle.
pub fn target_divergence(t: &TargetFunction, v: &[f64]) -> Result<DivergenceAngle> {
    if t.len() != v.len() {
        return Err(Error::invalid(format!("target length {} vs vector length {}", t.len(), v.len())));
    }
    let norm_v = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm_v > 0.0 && norm_v.is_finite()) {
        return Err(Error::invalid("target divergence is undefined for the zero vector"));
    }
    // 2·atan2(‖â − b̂‖, ‖â + b̂‖) stays accurate near 0° where arccos does not.
    let norm_t = t.squared_norm().sqrt();
    let (mut diff, mut sum) = (0.0, 0.0);
    for (i, &x) in v.iter().enumerate() {
        let a = if t.contains(i) { 1.0 / norm_t } else { 0.0 };
        let b = x / norm_v;
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    let radians = 2.0 * diff.sqrt().atan2(sum.sqrt());
    Ok(DivergenceAngle { degrees: radians.to_degrees().clamp(0.0, 180.0) })
}

fn check_q_min(q_min: f64) -> Result<()> {
    if !(q_min > 0.0 && q_min <= 1.0) {
        return Err(Error::invalid(format!("q_min must lie in (0, 1], got {q_min}")));
    }
    Ok(())
}

fn check_p_bias(p: f64, bias: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("p must lie in [0, 1], got {p}")));
    }
    if !(bias >= -p - RANGE_SLACK && bias <= 1.0 - p + RANGE_SLACK) {
        return Err(Error::invalid(format!("bias {bias} outside [-p, 1-p] for p = {p}")));
    }
    Ok(())
}

/// `(p + bias)/q_min`, the Markov bound on `Pr(q ≥ q_min)`. Not clamped.
pub fn markov_success_bound(p: f64, bias: f64, q_min: f64) -> Result<f64> {
    check_q_min(q_min)?;
    check_p_bias(p, bias)?;
    Ok((p + bias) / q_min)
}

/// `√k·cos θ / q_min`.
pub fn geometric_success_bound(k: usize, theta: DivergenceAngle, q_min: f64) -> Result<f64> {
    check_q_min(q_min)?;
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    // cos(90°) in radians is 6e-17, not 0
    let cos = if theta.degrees == 90.0 { 0.0 } else { theta.cos() };
    Ok((k as f64).sqrt() * cos / q_min)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamineTargetBound {
    /// `p/(p + q_min)`.
    pub tight: f64,
    /// `p/q_min`.
    pub loose: f64,
}

pub fn famine_target_bound(p: f64, q_min: f64) -> Result<FamineTargetBound> {
    check_q_min(q_min)?;
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("p must lie in (0, 1], got {p}")));
    }
    Ok(FamineTargetBound { tight: p / (p + q_min), loose: p / q_min })
}

/// A bound above 1 says nothing about a probability.
pub fn is_vacuous(bound: f64) -> bool {
    bound > 1.0
}

/// `log2((k/n + bias)/q_min)` from `log2 n` and `log2 k`, without forming `n`.
///
/// With zero bias the answer is `log2 k − log2 n − log2 q_min`. A nonzero
/// bias needs `k/n` itself: plain `f64` while `n ≤ 2^53`, exact rational
/// arithmetic beyond that (which requires integral `log2 n`, `log2 k`).
pub fn log2_bound(log2_n: f64, log2_k: f64, q_min: f64, bias: f64) -> Result<f64> {
    check_q_min(q_min)?;
    if !(log2_n.is_finite() && log2_k.is_finite() && log2_k >= 0.0 && log2_k <= log2_n) {
        return Err(Error::invalid(format!("need 0 <= log2 k <= log2 n, got {log2_k}, {log2_n}")));
    }
    if !bias.is_finite() {
        return Err(Error::invalid("bias must be finite"));
    }
    if bias == 0.0 {
        return Ok(log2_k - log2_n - q_min.log2());
    }
    if log2_n <= F64_EXACT_LIMIT_LOG2 {
        let p = (log2_k - log2_n).exp2();
        check_p_bias(p, bias)?;
        return Ok(((p + bias).max(0.0) / q_min).log2());
    }
    if log2_n.fract() != 0.0 || log2_k.fract() != 0.0 || log2_n > 16_384.0 {
        return Err(Error::Precision(format!(
            "n = 2^{log2_n} with nonzero bias needs integral exponents for exact arithmetic"
        )));
    }
    let p = BigRational::new(BigInt::from(1) << (log2_k as usize), BigInt::from(1) << (log2_n as usize));
    let bias_q = BigRational::from_float(bias).expect("finite bias");
    let success = &p + &bias_q;
    if success.is_negative() || success > BigRational::from_integer(1.into()) {
        return Err(Error::invalid(format!("bias {bias} outside [-p, 1-p] for p = 2^{}", log2_k - log2_n)));
    }
    if success.is_zero() {
        return Ok(f64::NEG_INFINITY);
    }
    let ratio = success / BigRational::from_float(q_min).expect("finite q_min");
    Ok(log2_rational(&ratio))
}

/// `log2` of a positive rational to f64 precision.
fn log2_rational(r: &BigRational) -> f64 {
    fn split(x: &BigInt) -> (f64, i64) {
        let bits = x.bits() as i64;
        let shift = (bits - 64).max(0);
        let top: BigInt = x >> (shift as usize);
        let top = top.to_string().parse::<f64>().expect("64-bit integer");
        (top, shift)
    }
    let (num, ns) = split(r.numer());
    let (den, ds) = split(r.denom());
    num.log2() - den.log2() + (ns - ds) as f64
}
