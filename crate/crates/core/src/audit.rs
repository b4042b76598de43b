//! Monte Carlo privacy auditing on neighboring datasets.
//!
//! A mechanism is run many times on `S` and on `S′`; every output is mapped
//! to a discrete event label. Exact binomial (Clopper-Pearson) intervals on
//! the event frequencies give a high-confidence lower bound on the privacy
//! loss under the pure-DP reading of the definition.

use num_traits::One;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};
use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use crate::concepts::{Concept, ConceptClass};
use crate::data::{Dataset, LabeledExample, RandomStream};
use crate::error::{Error, Result};
use crate::mechanisms::{em_private_empirical_learner, Learner, ScoredCandidates};
use crate::prediction::{fit_predictor_with_count, PredictorState};
use crate::rational::Rational;
use crate::transform::{agnostic_learn, relabel, AgnConfig};

/// A randomized procedure mapping a dataset to an event label.
pub type Mechanism = Arc<dyn Fn(&Dataset, &mut RandomStream) -> Result<String> + Send + Sync>;

pub const MIN_TRIALS: usize = 1000;

#[derive(Clone)]
pub struct AuditPlan {
    pub name: String,
    pub mechanism: Mechanism,
    pub s: Dataset,
    pub s_prime: Dataset,
    pub trials: usize,
    /// Joint coverage of all reported intervals.
    pub confidence: f64,
    /// An audit is inconclusive when no event reaches this count on either side.
    pub min_count: usize,
}

impl std::fmt::Debug for AuditPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuditPlan")
            .field("name", &self.name)
            .field("trials", &self.trials)
            .field("confidence", &self.confidence)
            .finish_non_exhaustive()
    }
}

impl AuditPlan {
    pub fn new(name: impl Into<String>, mechanism: Mechanism, s: Dataset, s_prime: Dataset, trials: usize) -> Self {
        Self { name: name.into(), mechanism, s, s_prime, trials, confidence: 0.95, min_count: 5 }
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < MIN_TRIALS {
            return Err(Error::invalid(format!("audits need at least {MIN_TRIALS} trials, got {}", self.trials)));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::invalid("confidence must lie in (0, 1)"));
        }
        let differing = self.s.examples.iter().zip(&self.s_prime.examples).filter(|(a, b)| a != b).count();
        if self.s.len() != self.s_prime.len() || differing != 1 {
            return Err(Error::invalid("audit datasets must be neighboring (same length, exactly one differing entry)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRow {
    pub event: String,
    pub count: usize,
    pub count_prime: usize,
    pub lower: f64,
    pub upper: f64,
    pub lower_prime: f64,
    pub upper_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub scenario: String,
    pub eps_hat: f64,
    pub inconclusive: bool,
    pub trials: usize,
    pub confidence: f64,
    pub events: Vec<EventRow>,
}

impl AuditReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["event", "count", "count_prime", "lower", "upper", "lower_prime", "upper_prime"])?;
        for e in &self.events {
            out.write_record([
                e.event.clone(),
                e.count.to_string(),
                e.count_prime.to_string(),
                e.lower.to_string(),
                e.upper.to_string(),
                e.lower_prime.to_string(),
                e.upper_prime.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Two-sided Clopper-Pearson interval for `k` successes in `n` trials at
/// miss probability `alpha`.
pub fn clopper_pearson(k: usize, n: usize, alpha: f64) -> (f64, f64) {
    assert!(n > 0 && k <= n && alpha > 0.0 && alpha < 1.0);
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 { 0.0 } else { Beta::new(kf, nf - kf + 1.0).expect("positive shapes").inverse_cdf(alpha / 2.0) };
    let upper = if k == n { 1.0 } else { Beta::new(kf + 1.0, nf - kf).expect("positive shapes").inverse_cdf(1.0 - alpha / 2.0) };
    (lower, upper)
}

fn run_side(plan: &AuditPlan, data: &Dataset, stream: &RandomStream) -> Result<BTreeMap<String, usize>> {
    let outputs: Vec<String> =
        (0..plan.trials as u64).into_par_iter().map(|i| (plan.mechanism)(data, &mut stream.fork(i))).collect::<Result<_>>()?;
    let mut counts = BTreeMap::new();
    for o in outputs {
        *counts.entry(o).or_insert(0) += 1;
    }
    Ok(counts)
}

/// Runs the plan and reports `max ln(lower(p_a)/upper(p_b))` over events
/// and both directions, clamped at 0, with Bonferroni-corrected intervals.
pub fn estimate_epsilon(plan: &AuditPlan, rng: &RandomStream) -> Result<AuditReport> {
    plan.validate()?;
    let a = run_side(plan, &plan.s, &rng.fork(0))?;
    let b = run_side(plan, &plan.s_prime, &rng.fork(1))?;
    Ok(report_from_counts(&plan.name, &a, &b, plan.trials, plan.confidence, plan.min_count))
}

pub fn report_from_counts(
    scenario: &str,
    a: &BTreeMap<String, usize>,
    b: &BTreeMap<String, usize>,
    trials: usize,
    confidence: f64,
    min_count: usize,
) -> AuditReport {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    let alpha = (1.0 - confidence) / (2 * keys.len().max(1)) as f64;
    let mut eps_hat: f64 = 0.0;
    let mut conclusive = false;
    let events = keys
        .into_iter()
        .map(|k| {
            let (ka, kb) = (a.get(k).copied().unwrap_or(0), b.get(k).copied().unwrap_or(0));
            let (la, ua) = clopper_pearson(ka, trials, alpha);
            let (lb, ub) = clopper_pearson(kb, trials, alpha);
            if ka.max(kb) >= min_count {
                conclusive = true;
            }
            if la > 0.0 {
                eps_hat = eps_hat.max((la / ub).ln());
            }
            if lb > 0.0 {
                eps_hat = eps_hat.max((lb / ua).ln());
            }
            EventRow { event: k.clone(), count: ka, count_prime: kb, lower: la, upper: ua, lower_prime: lb, upper_prime: ub }
        })
        .collect();
    AuditReport {
        scenario: scenario.to_string(),
        eps_hat: if conclusive { eps_hat.max(0.0) } else { 0.0 },
        inconclusive: !conclusive,
        trials,
        confidence,
        events,
    }
}

/// Largest exact `|ln P₁(i) − ln P₂(j)|` of the exponential mechanism over
/// aligned candidate pairs `(i, j)`; the identity alignment is used when
/// `alignment` is `None` and both lists have the same length.
pub fn analytic_em_ratio(
    c1: &ScoredCandidates,
    c2: &ScoredCandidates,
    eps: &Rational,
    alignment: Option<&[(usize, usize)]>,
) -> Result<f64> {
    let identity: Vec<(usize, usize)>;
    let pairs = match alignment {
        Some(p) => p,
        None => {
            if c1.len() != c2.len() {
                return Err(Error::invalid("candidate sets of different sizes need an alignment"));
            }
            identity = (0..c1.len()).map(|i| (i, i)).collect();
            &identity
        }
    };
    let (l1, l2) = (c1.log_selection_probabilities(eps), c2.log_selection_probabilities(eps));
    pairs.iter().try_fold(0.0f64, |acc, &(i, j)| {
        if i >= l1.len() || j >= l2.len() {
            return Err(Error::invalid(format!("alignment pair ({i}, {j}) out of range")));
        }
        Ok(acc.max((l1[i] - l2[j]).abs()))
    })
}

/// Reports its single input label, flipped with probability `flip`.
pub fn randomized_response(flip: f64) -> Mechanism {
    Arc::new(move |s: &Dataset, rng: &mut RandomStream| {
        let bit = s.examples.first().ok_or_else(|| Error::invalid("randomized response needs one example"))?.y;
        let out = if rng.bernoulli(flip) { !bit } else { bit };
        Ok(if out { "1" } else { "0" }.to_string())
    })
}

/// Named audit scenarios with hand-built worst-case neighboring pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// One bit, flip probability 1/4: true privacy loss `ln 3`.
    RandomizedResponse,
    /// Relabeling with a fixed subsample; the neighbors differ in one
    /// held-out example placed at the decision boundary.
    RelabelFixedSplit,
    /// The full agnostic pipeline; the neighbors differ in their first
    /// example, moved across the threshold with its label flipped.
    Agnostic,
    /// One prediction query; the neighbors differ in one example of the
    /// first chunk, which moves that chunk's concept across the query point.
    Predict,
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "randomized-response" => Ok(Self::RandomizedResponse),
            "relabel" => Ok(Self::RelabelFixedSplit),
            "agnostic" => Ok(Self::Agnostic),
            "predict" => Ok(Self::Predict),
            other => Err(Error::invalid(format!("unknown scenario {other:?}; expected randomized-response, relabel, agnostic or predict"))),
        }
    }
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Self::RandomizedResponse => "randomized-response",
            Self::RelabelFixedSplit => "relabel",
            Self::Agnostic => "agnostic",
            Self::Predict => "predict",
        }
    }

    /// The audit plan at privacy parameter `eps` (ignored for randomized response).
    pub fn plan(self, eps: Rational, trials: usize) -> Result<AuditPlan> {
        match self {
            Self::RandomizedResponse => Ok(AuditPlan::new(
                self.name(),
                randomized_response(0.25),
                Dataset::from_pairs(&[(0, 1)]),
                Dataset::from_pairs(&[(0, 0)]),
                trials,
            )),
            Self::RelabelFixedSplit => {
                let class = ConceptClass::thresholds(8)?;
                let t = Dataset::from_pairs(&[(1, 0), (3, 0), (4, 1), (6, 1)]);
                let w = Dataset::from_pairs(&[(0, 0), (2, 0), (3, 1), (5, 1), (7, 1), (4, 0)]);
                let w_prime = Dataset::from_pairs(&[(0, 0), (2, 0), (3, 1), (5, 1), (7, 1), (4, 1)]);
                let t_len = t.len();
                let mech: Mechanism = Arc::new(move |data: &Dataset, rng: &mut RandomStream| {
                    let (tt, ww) = data.examples.split_at(t_len);
                    let out = relabel(&class, &Dataset::new(tt.to_vec()), &Dataset::new(ww.to_vec()), eps, rng)?;
                    Ok(concept_label(&out.chosen))
                });
                Ok(AuditPlan::new(self.name(), mech, t.concat(&w), t.concat(&w_prime), trials))
            }
            Self::Agnostic => {
                let class = ConceptClass::thresholds(8)?;
                let base: Arc<dyn Learner> = Arc::new(em_private_empirical_learner(class, Rational::one())?);
                let cfg = AgnConfig::new(eps, class, base)?;
                let s: Dataset = (0..20).map(|i| LabeledExample::new(i % 8, i % 8 >= 4)).collect();
                let mut s_prime = s.clone();
                s_prime.examples[0] = LabeledExample::new(7, false);
                let mech: Mechanism = Arc::new(move |data: &Dataset, rng: &mut RandomStream| {
                    let h = agnostic_learn(&cfg, data, rng)?;
                    Ok(h.table_string(class.domain_size()))
                });
                Ok(AuditPlan::new(self.name(), mech, s, s_prime, trials))
            }
            Self::Predict => {
                let class = ConceptClass::thresholds(10)?;
                let r = 6;
                let chunk = |c: usize| (0..10).map(move |x| LabeledExample::new(x, x >= c));
                let s: Dataset = (0..r).flat_map(|_| chunk(5)).collect();
                let mut s_prime = s.clone();
                s_prime.examples[4] = LabeledExample::new(4, true);
                let mech: Mechanism = Arc::new(move |data: &Dataset, rng: &mut RandomStream| {
                    let state: PredictorState = fit_predictor_with_count(&class, data, eps, r)?;
                    Ok(if state.predict(4, rng)? { "1" } else { "0" }.to_string())
                });
                Ok(AuditPlan::new(self.name(), mech, s, s_prime, trials))
            }
        }
    }
}

fn concept_label(c: &Concept) -> String {
    serde_json::to_string(c).expect("concepts serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    #[test]
    fn clopper_pearson_reference_values() {
        // scipy.stats.beta.ppf(0.025, 5, 6) and beta.ppf(0.975, 6, 5)
        let (lo, hi) = clopper_pearson(5, 10, 0.05);
        assert!((lo - 0.187_086_1).abs() < 1e-6, "{lo}");
        assert!((hi - 0.812_913_9).abs() < 1e-6, "{hi}");
        assert_eq!(clopper_pearson(0, 10, 0.05).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.05).1, 1.0);
        let (_, hi0) = clopper_pearson(0, 10, 0.05);
        assert!((hi0 - (1.0 - 0.025f64.powf(0.1))).abs() < 1e-9);
    }

    #[test]
    fn more_trials_never_widen_intervals() {
        let mut prev = 1.0;
        for n in [1_000usize, 4_000, 16_000, 64_000] {
            let (lo, hi) = clopper_pearson(n / 4, n, 0.01);
            assert!(hi - lo <= prev);
            prev = hi - lo;
        }
    }

    #[test]
    fn input_independent_mechanism_gives_zero() {
        let mech: Mechanism = Arc::new(|_: &Dataset, rng: &mut RandomStream| Ok(rng.below(3).to_string()));
        let plan = AuditPlan::new("constant", mech, Dataset::from_pairs(&[(0, 0)]), Dataset::from_pairs(&[(0, 1)]), 5_000);
        let rep = estimate_epsilon(&plan, &RandomStream::from_seed(2)).unwrap();
        assert!(rep.eps_hat < 0.1, "{}", rep.eps_hat);
        assert!(!rep.inconclusive);
        assert_eq!(rep.events.len(), 3);
    }

    #[test]
    fn randomized_response_calibration() {
        let plan = Scenario::RandomizedResponse.plan(Rational::one(), 100_000).unwrap();
        let rep = estimate_epsilon(&plan, &RandomStream::from_seed(3)).unwrap();
        assert!(rep.eps_hat >= 0.9 && rep.eps_hat <= 3f64.ln() + 0.1, "{}", rep.eps_hat);
    }

    #[test]
    fn plan_validation() {
        let mech = randomized_response(0.25);
        let same = AuditPlan::new("x", mech.clone(), Dataset::from_pairs(&[(0, 1)]), Dataset::from_pairs(&[(0, 1)]), 1000);
        assert!(same.validate().is_err());
        let few = AuditPlan::new("x", mech, Dataset::from_pairs(&[(0, 1)]), Dataset::from_pairs(&[(0, 0)]), 10);
        assert!(few.validate().is_err());
    }

    #[test]
    fn inconclusive_when_counts_are_tiny() {
        let mut a = BTreeMap::new();
        let mut b = BTreeMap::new();
        for i in 0..1000 {
            a.insert(format!("a{i}"), 1);
            b.insert(format!("b{i}"), 1);
        }
        let rep = report_from_counts("tiny", &a, &b, 1000, 0.95, 5);
        assert!(rep.inconclusive);
        assert_eq!(rep.eps_hat, 0.0);
    }

    #[test]
    fn analytic_ratio_cases() {
        let eps = ratio(1, 2);
        let a = ScoredCandidates::new(vec![ratio(0, 1), ratio(1, 4), ratio(1, 2)], ratio(1, 4)).unwrap();
        assert_eq!(analytic_em_ratio(&a, &a, &eps, None).unwrap(), 0.0);
        let shifted = ScoredCandidates::new(vec![ratio(1, 4), ratio(1, 2), ratio(3, 4)], ratio(1, 4)).unwrap();
        assert!(analytic_em_ratio(&a, &shifted, &eps, None).unwrap() <= 0.5 + 1e-12);
        let mixed = ScoredCandidates::new(vec![ratio(1, 4), ratio(0, 1), ratio(1, 2)], ratio(1, 4)).unwrap();
        let v = analytic_em_ratio(&a, &mixed, &eps, None).unwrap();
        assert!(v > 0.0 && v <= 0.5 + 1e-12, "{v}");
        let short = ScoredCandidates::new(vec![ratio(0, 1)], ratio(1, 4)).unwrap();
        assert!(analytic_em_ratio(&a, &short, &eps, None).is_err());
        assert!(analytic_em_ratio(&a, &short, &eps, Some(&[(0, 0)])).is_ok());
    }

    #[test]
    fn report_serializes() {
        let plan = Scenario::RandomizedResponse.plan(Rational::one(), 1000).unwrap();
        let rep = estimate_epsilon(&plan, &RandomStream::from_seed(9)).unwrap();
        assert!(rep.to_json_string().unwrap().contains("eps_hat"));
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("event,count,count_prime"));
    }
}
