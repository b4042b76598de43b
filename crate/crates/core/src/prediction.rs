//! Private prediction by vote aggregation.
//!
//! A [`PredictorState`] holds `r` concepts trained on disjoint chunks. A query
//! is answered by the exponential mechanism over the two labels with score
//! minus the vote count, so one changed training example moves each count by
//! at most one.

use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::concepts::{Concept, ConceptClass};
use crate::data::{split_by_index, subsample_uniform_indices, Dataset, RandomStream};
use crate::error::{Error, Result};
use crate::mechanisms::{exponential_mechanism, ScoredCandidates};
use crate::metrics::DistributionSpec;
use crate::rational::{is_positive, ratio, serde_rational, to_f64, Rational};
use crate::transform::{relabel, subsample_size, STREAM_SELECT, STREAM_SUBSAMPLE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorState {
    pub class: ConceptClass,
    #[serde(with = "serde_rational")]
    pub eps_per_query: Rational,
    pub r: usize,
    pub hypotheses: Vec<Concept>,
}

fn in_unit(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

/// `⌈6·ln(4/α)/ε⌉`.
pub fn predictor_count(alpha: f64, eps: f64) -> Result<usize> {
    if !in_unit(alpha) || eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid(format!("need alpha in (0, 1) and eps > 0, got alpha={alpha}, eps={eps}")));
    }
    Ok((6.0 * (4.0 / alpha).ln() / eps).ceil() as usize)
}

/// Per-chunk size `⌈c·(d·ln(1/α) + ln(r/β))/α⌉`.
pub fn chunk_size(d: usize, alpha: f64, beta: f64, r: usize, c: f64) -> Result<usize> {
    if !in_unit(alpha) || !in_unit(beta) || r == 0 || c.is_nan() || c <= 0.0 {
        return Err(Error::invalid("chunk sizing needs alpha, beta in (0, 1), r >= 1 and c > 0"));
    }
    let raw = c * (d as f64 * (1.0 / alpha).ln() + (r as f64 / beta).ln()) / alpha;
    Ok(raw.ceil().max(1.0) as usize)
}

impl PredictorState {
    pub fn new(class: ConceptClass, eps_per_query: Rational, hypotheses: Vec<Concept>) -> Result<Self> {
        if !is_positive(&eps_per_query) {
            return Err(Error::invalid("eps_per_query must be positive"));
        }
        if hypotheses.is_empty() {
            return Err(Error::invalid("predictor needs at least one hypothesis"));
        }
        if let Some(bad) = hypotheses.iter().find(|h| !class.contains(h)) {
            return Err(Error::invalid(format!("hypothesis {bad:?} is not a member of the class")));
        }
        Ok(Self { class, eps_per_query, r: hypotheses.len(), hypotheses })
    }

    pub fn validate(&self) -> Result<()> {
        if self.r != self.hypotheses.len() {
            return Err(Error::invalid(format!("r = {} but {} hypotheses stored", self.r, self.hypotheses.len())));
        }
        Self::new(self.class, self.eps_per_query, self.hypotheses.clone()).map(|_| ())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let state: Self = serde_json::from_str(s)?;
        state.validate()?;
        Ok(state)
    }

    /// `(votes for 0, votes for 1)` at `x`.
    pub fn votes(&self, x: usize) -> (usize, usize) {
        let ones = self.hypotheses.iter().filter(|h| h.eval(x)).count();
        (self.r - ones, ones)
    }

    fn scored(&self, x: usize) -> ScoredCandidates {
        let (v0, v1) = self.votes(x);
        ScoredCandidates::new(vec![ratio(-(v0 as i128), 1), ratio(-(v1 as i128), 1)], Rational::one())
            .expect("two candidates with unit sensitivity")
    }

    /// Exact `P[predict(x) = 1]`.
    pub fn prob_one(&self, x: usize) -> f64 {
        let (v0, v1) = self.votes(x);
        let gap = to_f64(&self.eps_per_query) * (v1 as f64 - v0 as f64) / 2.0;
        1.0 / (1.0 + (-gap).exp())
    }

    pub fn predict(&self, x: usize, rng: &mut RandomStream) -> Result<bool> {
        self.class.check_point(x)?;
        Ok(exponential_mechanism(&self.scored(x), &self.eps_per_query, rng)? == 1)
    }

    /// Exact `err_D` of the randomized predictor.
    pub fn exact_error(&self, d: &DistributionSpec) -> Result<f64> {
        if d.domain_size() != self.class.domain_size() {
            return Err(Error::invalid("distribution and class domains differ"));
        }
        Ok((0..d.domain_size())
            .map(|x| {
                let (m, p1) = (to_f64(&d.marginal[x]), to_f64(&d.p1[x]));
                let q1 = self.prob_one(x);
                m * (p1 * (1.0 - q1) + (1.0 - p1) * q1)
            })
            .sum())
    }
}

/// Splits `s` into `r` contiguous chunks of `⌊|S|/r⌋` examples (remainder
/// dropped) and fits a consistent concept on each.
pub fn fit_predictor_with_count(class: &ConceptClass, s: &Dataset, eps: Rational, r: usize) -> Result<PredictorState> {
    if r == 0 || s.len() < r {
        return Err(Error::invalid(format!("need at least r = {r} examples, got {}", s.len())));
    }
    let size = s.len() / r;
    let hypotheses = s
        .examples
        .chunks_exact(size)
        .take(r)
        .enumerate()
        .map(|(i, chunk)| {
            class
                .consistent_concept(&Dataset::new(chunk.to_vec()))?
                .ok_or_else(|| Error::NotRealizable(format!("chunk {i} has no consistent concept")))
        })
        .collect::<Result<Vec<_>>>()?;
    PredictorState::new(*class, eps, hypotheses)
}

/// Realizable predictor with `r = ⌈6·ln(4/α)/ε⌉`.
pub fn fit_realizable_predictor(class: &ConceptClass, s: &Dataset, eps: Rational, alpha: f64) -> Result<PredictorState> {
    let r = predictor_count(alpha, to_f64(&eps))?;
    fit_predictor_with_count(class, s, eps, r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgnosticPredictorConfig {
    /// Privacy of the relabeling step and subsampling rate.
    #[serde(with = "serde_rational")]
    pub eps: Rational,
    pub alpha: f64,
    pub beta: f64,
    /// Constant of the per-chunk sample size.
    pub chunk_constant: f64,
    /// Per-query privacy of the inner vote aggregator.
    #[serde(with = "serde_rational")]
    pub inner_eps: Rational,
}

impl AgnosticPredictorConfig {
    pub fn new(eps: Rational, alpha: f64, beta: f64) -> Self {
        Self { eps, alpha, beta, chunk_constant: 1.0, inner_eps: Rational::one() }
    }

    /// `(r, n′)` for this configuration and class.
    pub fn sizing(&self, class: &ConceptClass) -> Result<(usize, usize)> {
        let r = predictor_count(self.alpha, to_f64(&self.inner_eps))?;
        let n_prime = chunk_size(class.vc_dimension(), self.alpha, self.beta, r, self.chunk_constant)?;
        Ok((r, n_prime))
    }

    /// Smallest `|S|` whose subsample reaches `r·n′` examples.
    pub fn required_sample_size(&self, class: &ConceptClass) -> Result<usize> {
        let (r, n_prime) = self.sizing(class)?;
        let need = (r * n_prime) as i128;
        let mut n = (Rational::from_integer(need) / self.eps).ceil().to_integer() as usize;
        while subsample_size(&self.eps, n).map_or(true, |k| k < need as usize) {
            n += 1;
        }
        Ok(n)
    }
}

/// Subsample, privately relabel, then fit the vote aggregator on the
/// relabeled subsample.
pub fn fit_agnostic_predictor(
    class: &ConceptClass,
    s: &Dataset,
    cfg: &AgnosticPredictorConfig,
    rng: &mut RandomStream,
) -> Result<PredictorState> {
    let (r, n_prime) = cfg.sizing(class)?;
    let k = subsample_size(&cfg.eps, s.len())?;
    if k < r * n_prime {
        return Err(Error::invalid(format!(
            "subsample of {k} examples is below r*n' = {r}*{n_prime} = {}; need |S| >= {}",
            r * n_prime,
            cfg.required_sample_size(class)?
        )));
    }
    let idx = subsample_uniform_indices(s.len(), k, &mut rng.fork(STREAM_SUBSAMPLE))?;
    let (t, w) = split_by_index(s, &idx)?;
    let outcome = relabel(class, &t, &w, cfg.eps, &mut rng.fork(STREAM_SELECT))?;
    fit_predictor_with_count(class, &outcome.relabeled, cfg.inner_eps, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::Hypothesis;
    use crate::data::LabeledExample;

    #[test]
    fn predictor_counts() {
        assert_eq!(predictor_count(0.2, 0.5).unwrap(), 36);
        assert_eq!(predictor_count(0.1, 1.0).unwrap(), 23);
        assert!(predictor_count(1.2, 1.0).is_err());
    }

    #[test]
    fn chunk_sizing_example() {
        assert_eq!(chunk_size(1, 0.2, 0.1, 36, 1.0).unwrap(), 38);
        assert_eq!(36 * chunk_size(1, 0.2, 0.1, 36, 1.0).unwrap(), 1368);
    }

    #[test]
    fn unanimous_and_tied_votes() {
        let class = ConceptClass::thresholds(10).unwrap();
        let p = PredictorState::new(class, Rational::one(), vec![Concept::Threshold(2); 23]).unwrap();
        let q = p.prob_one(5);
        assert!((q - 1.0 / (1.0 + (-11.5f64).exp())).abs() < 1e-15);
        assert!(1.0 - q < 1.1e-5);
        let mut hs = vec![Concept::Threshold(2); 4];
        hs.extend(vec![Concept::Threshold(8); 4]);
        let p = PredictorState::new(class, ratio(1, 2), hs).unwrap();
        assert_eq!(p.prob_one(5), 0.5);
    }

    #[test]
    fn fit_realizable_chunks_are_consistent() {
        let class = ConceptClass::thresholds(10).unwrap();
        let r = predictor_count(0.1, 1.0).unwrap();
        let s: Dataset = (0..r * 20).map(|i| LabeledExample::new((i * 7) % 10, (i * 7) % 10 >= 5)).collect();
        let p = fit_realizable_predictor(&class, &s, Rational::one(), 0.1).unwrap();
        assert_eq!(p.r, r);
        for (i, h) in p.hypotheses.iter().enumerate() {
            let chunk = &s.examples[i * 20..(i + 1) * 20];
            assert!(chunk.iter().all(|e| h.eval(e.x.0) == e.y));
        }
    }

    #[test]
    fn fit_errors() {
        let class = ConceptClass::thresholds(10).unwrap();
        let s = Dataset::from_pairs(&[(1, 1), (2, 0)]);
        assert!(matches!(fit_realizable_predictor(&class, &s, Rational::one(), 0.1), Err(Error::InvalidArgument(_))));
        let bad: Dataset = (0..46).map(|i| LabeledExample::new(if i % 2 == 0 { 3 } else { 6 }, i % 2 == 0)).collect();
        assert!(matches!(fit_realizable_predictor(&class, &bad, Rational::one(), 0.1), Err(Error::NotRealizable(_))));
    }

    #[test]
    fn prediction_frequency_matches_closed_form() {
        let class = ConceptClass::thresholds(10).unwrap();
        let mut hs = vec![Concept::Threshold(2); 3];
        hs.push(Concept::Threshold(8));
        let p = PredictorState::new(class, ratio(1, 2), hs).unwrap();
        let base = RandomStream::from_seed(4);
        let trials = 40_000;
        let ones = (0..trials).filter(|&i| p.predict(5, &mut base.fork(i)).unwrap()).count();
        assert!((ones as f64 / trials as f64 - p.prob_one(5)).abs() < 0.01);
    }

    #[test]
    fn exact_error_of_unanimous_correct_state() {
        let class = ConceptClass::thresholds(8).unwrap();
        let target = Hypothesis::Concept(Concept::Threshold(3));
        let d = DistributionSpec::realizable_uniform(&target, 8);
        let p = PredictorState::new(class, ratio(1, 1), vec![Concept::Threshold(3); 40]).unwrap();
        let e = p.exact_error(&d).unwrap();
        assert!(e > 0.0 && e < 1e-8);
    }

    #[test]
    fn json_round_trip() {
        let class = ConceptClass::intervals(12).unwrap();
        let p = PredictorState::new(class, ratio(1, 2), vec![Concept::Interval(1, 4), Concept::Interval(2, 9)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(PredictorState::from_json_str(&s).unwrap(), p);
        let broken = s.replace("\"r\":2", "\"r\":3");
        assert!(PredictorState::from_json_str(&broken).is_err());
    }

    #[test]
    fn agnostic_predictor_reports_requirement() {
        let class = ConceptClass::thresholds(16).unwrap();
        let cfg = AgnosticPredictorConfig::new(ratio(1, 5), 0.2, 0.1);
        let s: Dataset = (0..200).map(|i| LabeledExample::new(i % 16, i % 16 >= 8)).collect();
        let msg = fit_agnostic_predictor(&class, &s, &cfg, &mut RandomStream::from_seed(0)).unwrap_err().to_string();
        let need = cfg.required_sample_size(&class).unwrap();
        assert!(msg.contains(&need.to_string()), "{msg}");
        let s: Dataset = (0..need).map(|i| LabeledExample::new(i % 16, i % 16 >= 8)).collect();
        let p = fit_agnostic_predictor(&class, &s, &cfg, &mut RandomStream::from_seed(1)).unwrap();
        assert_eq!(p.r, cfg.sizing(&class).unwrap().0);
    }
}
