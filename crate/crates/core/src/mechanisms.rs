//! The exponential mechanism, the learner interface, stock learners and the
//! subsampling wrapper that turns a private PAC learner into a private
//! empirical learner.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::concepts::{Concept, ConceptClass, Hypothesis, WeightedInstance};
use crate::data::{resample_with_replacement, Dataset, RandomStream};
use crate::error::{Error, Result};
use crate::rational::{ceil_mul, is_positive, serde_rational, to_f64, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyParams {
    #[serde(with = "serde_rational")]
    pub epsilon: Rational,
    #[serde(with = "serde_rational")]
    pub delta: Rational,
}

impl PrivacyParams {
    pub fn new(epsilon: Rational, delta: Rational) -> Result<Self> {
        if !is_positive(&epsilon) {
            return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if delta < Rational::zero() || delta >= Rational::one() {
            return Err(Error::invalid(format!("delta must lie in [0, 1), got {delta}")));
        }
        Ok(Self { epsilon, delta })
    }

    pub fn pure(epsilon: Rational) -> Result<Self> {
        Self::new(epsilon, Rational::zero())
    }
}

/// Scores (lower is better) for a finite candidate list with their sensitivity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredCandidates {
    pub scores: Vec<Rational>,
    pub sensitivity: Rational,
}

impl ScoredCandidates {
    pub fn new(scores: Vec<Rational>, sensitivity: Rational) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::invalid("exponential mechanism needs at least one candidate"));
        }
        if !is_positive(&sensitivity) {
            return Err(Error::invalid("sensitivity must be positive"));
        }
        Ok(Self { scores, sensitivity })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Unnormalized log-weights `−ε·q/(2Δ)`.
    pub fn log_weights(&self, eps: &Rational) -> Vec<f64> {
        let factor = to_f64(&(eps / (self.sensitivity * Rational::from_integer(2))));
        self.scores.iter().map(|q| -factor * to_f64(q)).collect()
    }

    /// Exact selection probabilities, normalized in log space.
    pub fn selection_probabilities(&self, eps: &Rational) -> Vec<f64> {
        normalize_log_weights(&self.log_weights(eps))
    }

    pub fn log_selection_probabilities(&self, eps: &Rational) -> Vec<f64> {
        let lw = self.log_weights(eps);
        let lse = log_sum_exp(&lw);
        lw.iter().map(|w| w - lse).collect()
    }

    pub fn min_score(&self) -> Rational {
        *self.scores.iter().min().expect("nonempty")
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn normalize_log_weights(lw: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(lw);
    lw.iter().map(|w| (w - lse).exp()).collect()
}

/// Index of a standard-Gumbel-perturbed maximum of `log_weights`, i.e. a draw
/// with probability proportional to `exp(log_weights[i])`.
pub fn gumbel_argmax(log_weights: &[f64], rng: &mut RandomStream) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &w) in log_weights.iter().enumerate() {
        let g = -(-rng.open_unit().ln()).ln();
        if w + g > best.1 {
            best = (i, w + g);
        }
    }
    best.0
}

/// Draws index `i` with probability `∝ exp(−ε·scores[i]/(2Δ))`.
pub fn exponential_mechanism(cands: &ScoredCandidates, eps: &Rational, rng: &mut RandomStream) -> Result<usize> {
    if !is_positive(eps) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if cands.len() == 1 {
        return Ok(0);
    }
    Ok(gumbel_argmax(&cands.log_weights(eps), rng))
}

/// `(2Δ/ε)·ln(|H|/β)`: with probability `1 − β` the selected score is within
/// this gap of the minimum.
pub fn em_utility_gap(num_candidates: usize, sensitivity: f64, eps: f64, beta: f64) -> Result<f64> {
    let positive = |v: f64| v > 0.0;
    if num_candidates == 0 || !positive(sensitivity) || !positive(eps) || !(positive(beta) && beta <= 1.0) {
        return Err(Error::invalid("utility gap needs candidates >= 1, positive sensitivity and epsilon, beta in (0, 1]"));
    }
    Ok(2.0 * sensitivity / eps * (num_candidates as f64 / beta).ln())
}

/// A (possibly randomized) learning algorithm.
pub trait Learner: Send + Sync {
    fn learn(&self, data: &Dataset, rng: &mut RandomStream) -> Result<Hypothesis>;

    /// Whether every output is a concept of the class.
    fn is_proper(&self) -> bool;

    fn name(&self) -> String;

    /// Exact output distribution when the learner can enumerate it.
    fn output_distribution(&self, _data: &Dataset) -> Option<Result<Vec<(Hypothesis, f64)>>> {
        None
    }
}

impl<L: Learner + ?Sized> Learner for Arc<L> {
    fn learn(&self, data: &Dataset, rng: &mut RandomStream) -> Result<Hypothesis> {
        (**self).learn(data, rng)
    }

    fn is_proper(&self) -> bool {
        (**self).is_proper()
    }

    fn name(&self) -> String {
        (**self).name()
    }

    fn output_distribution(&self, data: &Dataset) -> Option<Result<Vec<(Hypothesis, f64)>>> {
        (**self).output_distribution(data)
    }
}

/// Stock pure-DP proper empirical learner: the exponential mechanism over
/// every function of the class with score `err_S` and sensitivity `1/|S|`.
///
/// The candidate list is fixed by the class, not by the sample, so its
/// output distribution is `ε`-DP as a distribution over concepts.
#[derive(Debug, Clone)]
pub struct EmEmpiricalLearner {
    class: ConceptClass,
    eps: Rational,
    functions: Arc<Vec<Concept>>,
}

impl EmEmpiricalLearner {
    pub fn new(class: ConceptClass, eps: Rational) -> Result<Self> {
        if !is_positive(&eps) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        let functions = class.all_functions().entries.into_iter().map(|c| c.concept).collect();
        Ok(Self { class, eps, functions: Arc::new(functions) })
    }

    pub fn epsilon(&self) -> Rational {
        self.eps
    }

    pub fn candidates(&self) -> &[Concept] {
        &self.functions
    }

    /// Scores `err_S(c)` for every candidate.
    pub fn scored(&self, data: &Dataset) -> Result<ScoredCandidates> {
        if data.is_empty() {
            return Err(Error::invalid("empirical learner needs a nonempty dataset"));
        }
        self.class.check_points(data.iter().map(|e| e.x.0))?;
        let n = self.class.domain_size();
        let (mut zeros, mut ones) = (vec![0i128; n], vec![0i128; n]);
        for e in data.iter() {
            if e.y {
                ones[e.x.0] += 1;
            } else {
                zeros[e.x.0] += 1;
            }
        }
        let len = data.len() as i128;
        let scores = self
            .functions
            .iter()
            .map(|c| {
                let mistakes: i128 = (0..n).map(|x| if c.eval(x) { zeros[x] } else { ones[x] }).sum();
                Rational::new(mistakes, len)
            })
            .collect();
        ScoredCandidates::new(scores, Rational::new(1, len))
    }
}

impl Learner for EmEmpiricalLearner {
    fn learn(&self, data: &Dataset, rng: &mut RandomStream) -> Result<Hypothesis> {
        let scored = self.scored(data)?;
        let i = exponential_mechanism(&scored, &self.eps, rng)?;
        Ok(Hypothesis::Concept(self.functions[i].clone()))
    }

    fn is_proper(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        format!("em-empirical(eps={})", crate::rational::format_rational(&self.eps))
    }

    fn output_distribution(&self, data: &Dataset) -> Option<Result<Vec<(Hypothesis, f64)>>> {
        Some(self.scored(data).map(|s| {
            let probs = s.selection_probabilities(&self.eps);
            self.functions.iter().cloned().map(Hypothesis::Concept).zip(probs).collect()
        }))
    }
}

/// The stock `(ε, 0)`-DP proper empirical learner for `class`.
pub fn em_private_empirical_learner(class: ConceptClass, eps: Rational) -> Result<EmEmpiricalLearner> {
    EmEmpiricalLearner::new(class, eps)
}

/// Non-private: returns the canonical concept consistent with the input.
#[derive(Debug, Clone)]
pub struct ConsistentLearner {
    class: ConceptClass,
}

impl ConsistentLearner {
    pub fn new(class: ConceptClass) -> Self {
        Self { class }
    }

    fn fit(&self, data: &Dataset) -> Result<Concept> {
        self.class
            .consistent_concept(data)?
            .ok_or_else(|| Error::NotRealizable(format!("no {} concept is consistent with the data", self.class.kind())))
    }
}

impl Learner for ConsistentLearner {
    fn learn(&self, data: &Dataset, _rng: &mut RandomStream) -> Result<Hypothesis> {
        self.fit(data).map(Hypothesis::Concept)
    }

    fn is_proper(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "consistent".into()
    }

    fn output_distribution(&self, data: &Dataset) -> Option<Result<Vec<(Hypothesis, f64)>>> {
        Some(self.fit(data).map(|c| vec![(Hypothesis::Concept(c), 1.0)]))
    }
}

/// Non-private exact empirical risk minimizer.
#[derive(Debug, Clone)]
pub struct ErmLearner {
    class: ConceptClass,
}

impl ErmLearner {
    pub fn new(class: ConceptClass) -> Self {
        Self { class }
    }

    fn fit(&self, data: &Dataset) -> Result<Concept> {
        let mut inst = WeightedInstance::default();
        for e in data.iter() {
            inst.push(e.x.0, e.y, Rational::one())?;
        }
        self.class.weighted_erm(&inst).map(|(c, _)| c)
    }
}

impl Learner for ErmLearner {
    fn learn(&self, data: &Dataset, _rng: &mut RandomStream) -> Result<Hypothesis> {
        self.fit(data).map(Hypothesis::Concept)
    }

    fn is_proper(&self) -> bool {
        true
    }

    fn name(&self) -> String {
        "erm".into()
    }

    fn output_distribution(&self, data: &Dataset) -> Option<Result<Vec<(Hypothesis, f64)>>> {
        Some(self.fit(data).map(|c| vec![(Hypothesis::Concept(c), 1.0)]))
    }
}

/// Improper, non-private: memorizes the majority label of every observed
/// point (ties go to 1) and answers 0 elsewhere.
#[derive(Debug, Clone)]
pub struct LookupTableLearner {
    domain_size: usize,
}

impl LookupTableLearner {
    pub fn new(domain_size: usize) -> Self {
        Self { domain_size }
    }

    fn fit(&self, data: &Dataset) -> Result<Hypothesis> {
        let mut votes = vec![0i64; self.domain_size];
        let mut seen = vec![false; self.domain_size];
        for e in data.iter() {
            let x = e.x.0;
            if x >= self.domain_size {
                return Err(Error::invalid(format!("point {x} outside domain")));
            }
            seen[x] = true;
            votes[x] += if e.y { 1 } else { -1 };
        }
        Ok(Hypothesis::Table((0..self.domain_size).map(|x| seen[x] && votes[x] >= 0).collect()))
    }
}

impl Learner for LookupTableLearner {
    fn learn(&self, data: &Dataset, _rng: &mut RandomStream) -> Result<Hypothesis> {
        self.fit(data)
    }

    fn is_proper(&self) -> bool {
        false
    }

    fn name(&self) -> String {
        "lookup-table".into()
    }

    fn output_distribution(&self, data: &Dataset) -> Option<Result<Vec<(Hypothesis, f64)>>> {
        Some(self.fit(data).map(|h| vec![(h, 1.0)]))
    }
}

/// A base learner on `m` examples wrapped to take `n = ⌈6εm⌉` examples: the
/// input is resampled `m` times with replacement and handed to the base.
#[derive(Clone)]
pub struct EmpiricalLearner {
    base: Arc<dyn Learner>,
    eps: Rational,
    sample_size: usize,
    input_size: usize,
}

impl std::fmt::Debug for EmpiricalLearner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmpiricalLearner")
            .field("base", &self.base.name())
            .field("eps", &self.eps)
            .field("sample_size", &self.sample_size)
            .field("input_size", &self.input_size)
            .finish()
    }
}

impl EmpiricalLearner {
    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    /// Privacy of the wrapper when the base is `(ε, δ)`-DP:
    /// `ε' = 6εm/n` and `δ' = exp(ε')·(4m/n)·δ`.
    pub fn privacy(&self, base_delta: f64) -> (f64, f64) {
        let ratio = self.sample_size as f64 / self.input_size as f64;
        let eps_prime = 6.0 * to_f64(&self.eps) * ratio;
        (eps_prime, eps_prime.exp() * 4.0 * ratio * base_delta)
    }
}

impl Learner for EmpiricalLearner {
    fn learn(&self, data: &Dataset, rng: &mut RandomStream) -> Result<Hypothesis> {
        let resampled = resample_with_replacement(data, self.sample_size, &mut rng.fork(0))?;
        self.base.learn(&resampled, &mut rng.fork(1))
    }

    fn is_proper(&self) -> bool {
        self.base.is_proper()
    }

    fn name(&self) -> String {
        format!("amplified({}, m={}, n={})", self.base.name(), self.sample_size, self.input_size)
    }
}

/// Wraps `base` (a learner on `m` examples, `(ε, δ)`-DP with `ε ≤ 1`) into an
/// empirical learner on `n = ⌈6εm⌉` examples.
pub fn amplify_to_empirical(base: Arc<dyn Learner>, eps: Rational, m: usize) -> Result<EmpiricalLearner> {
    if !is_positive(&eps) || eps > Rational::one() {
        return Err(Error::invalid(format!("amplification needs 0 < eps <= 1, got {eps}")));
    }
    if m == 0 {
        return Err(Error::invalid("base sample size must be at least 1"));
    }
    let n = ceil_mul(&(eps * Rational::from_integer(6)), m);
    if n < 2 {
        return Err(Error::invalid(format!("eps*m = {} is below 1/3, giving input size {n} < 2", eps * Rational::from_integer(m as i128))));
    }
    Ok(EmpiricalLearner { base, eps, sample_size: m, input_size: n as usize })
}
