//! Error and disagreement metrics (exact) and sample-size calculators.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::concepts::{Concept, ConceptClass, Hypothesis, WeightedInstance, WeightedPoint};
use crate::data::{Dataset, DomainPoint, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::rational::{is_probability, serde_rational_vec, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyParams {
    pub alpha: f64,
    pub beta: f64,
}

impl AccuracyParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if !open_unit(alpha) || !open_unit(beta) {
            return Err(Error::invalid(format!("alpha and beta must lie in (0, 1), got alpha={alpha}, beta={beta}")));
        }
        Ok(Self { alpha, beta })
    }
}

/// The unnamed universal constants of the realizable and agnostic
/// generalization bounds. Both default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub realizable: f64,
    pub agnostic: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self { realizable: 1.0, agnostic: 1.0 }
    }
}

impl BoundConstants {
    pub fn new(realizable: f64, agnostic: f64) -> Result<Self> {
        if !(realizable > 0.0 && agnostic > 0.0) {
            return Err(Error::invalid("bound constants must be positive"));
        }
        Ok(Self { realizable, agnostic })
    }
}

/// A distribution over `[0, N) × {0, 1}` given by its marginal and the
/// conditional probability of label 1 at every point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(with = "serde_rational_vec")]
    pub marginal: Vec<Rational>,
    #[serde(with = "serde_rational_vec")]
    pub p1: Vec<Rational>,
}

impl DistributionSpec {
    pub fn new(marginal: Vec<Rational>, p1: Vec<Rational>) -> Result<Self> {
        let spec = Self { marginal, p1 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.marginal.len() != self.p1.len() {
            return Err(Error::invalid("marginal and p1 must have the same length"));
        }
        if self.marginal.len() < 2 {
            return Err(Error::invalid("distribution needs a domain of size at least 2"));
        }
        if !self.marginal.iter().chain(&self.p1).all(is_probability) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        let total: Rational = self.marginal.iter().sum();
        if !total.is_one() {
            return Err(Error::invalid(format!("marginal sums to {total}, not 1")));
        }
        Ok(())
    }

    pub fn domain_size(&self) -> usize {
        self.marginal.len()
    }

    /// Uniform marginal with labels given by `h`.
    pub fn realizable_uniform(h: &Hypothesis, domain_size: usize) -> Self {
        let m = Rational::new(1, domain_size as i128);
        Self {
            marginal: vec![m; domain_size],
            p1: (0..domain_size).map(|x| if h.eval(x) { Rational::one() } else { Rational::zero() }).collect(),
        }
    }

    /// The empirical distribution of `s`.
    pub fn empirical(s: &Dataset, domain_size: usize) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::invalid("empirical distribution of an empty dataset"));
        }
        let mut count = vec![0i128; domain_size];
        let mut ones = vec![0i128; domain_size];
        for e in s.iter() {
            if e.x.0 >= domain_size {
                return Err(Error::invalid(format!("point {} outside domain", e.x.0)));
            }
            count[e.x.0] += 1;
            ones[e.x.0] += e.y as i128;
        }
        let n = s.len() as i128;
        Self::new(
            count.iter().map(|&c| Rational::new(c, n)).collect(),
            count.iter().zip(&ones).map(|(&c, &o)| if c == 0 { Rational::zero() } else { Rational::new(o, c) }).collect(),
        )
    }
}

pub fn empirical_error(h: &Hypothesis, s: &Dataset) -> Result<Rational> {
    if s.is_empty() {
        return Err(Error::invalid("empirical error of an empty dataset"));
    }
    let mistakes = s.iter().filter(|e| h.eval(e.x.0) != e.y).count();
    Ok(Rational::new(mistakes as i128, s.len() as i128))
}

pub fn empirical_disagreement(h1: &Hypothesis, h2: &Hypothesis, sx: &UnlabeledDataset) -> Result<Rational> {
    if sx.is_empty() {
        return Err(Error::invalid("disagreement on an empty sample"));
    }
    let diff = sx.points.iter().filter(|p| h1.eval(p.0) != h2.eval(p.0)).count();
    Ok(Rational::new(diff as i128, sx.len() as i128))
}

pub fn generalization_error(h: &Hypothesis, d: &DistributionSpec) -> Rational {
    d.marginal.iter().zip(&d.p1).enumerate().map(|(x, (m, p))| if h.eval(x) { m * (Rational::one() - p) } else { m * p }).sum()
}

/// `Pr_{x ~ D_X}[h1(x) ≠ h2(x)]`.
pub fn generalization_disagreement(h1: &Hypothesis, h2: &Hypothesis, d: &DistributionSpec) -> Rational {
    d.marginal.iter().enumerate().filter(|&(x, _)| h1.eval(x) != h2.eval(x)).map(|(_, m)| *m).sum()
}

/// Best in-class error and a canonical concept attaining it.
pub fn optimal_concept(class: &ConceptClass, d: &DistributionSpec) -> Result<(Concept, Rational)> {
    if d.domain_size() != class.domain_size() {
        return Err(Error::invalid("distribution and class use different domain sizes"));
    }
    let mut items = Vec::with_capacity(2 * d.domain_size());
    for (x, (m, p)) in d.marginal.iter().zip(&d.p1).enumerate() {
        items.push(WeightedPoint { x: DomainPoint(x), target: true, weight: m * p });
        items.push(WeightedPoint { x: DomainPoint(x), target: false, weight: m * (Rational::one() - p) });
    }
    class.weighted_erm(&WeightedInstance::new(items)?)
}

pub fn optimal_error(class: &ConceptClass, d: &DistributionSpec) -> Result<Rational> {
    optimal_concept(class, d).map(|(_, v)| v)
}

pub fn xor_hypothesis(h1: &Hypothesis, h2: &Hypothesis, domain_size: usize) -> Hypothesis {
    Hypothesis::Table((0..domain_size).map(|x| h1.eval(x) != h2.eval(x)).collect())
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::invalid("VC dimension must be at least 1"));
    }
    Ok(())
}

/// `⌈C·(d·ln(1/α) + ln(1/β))/α⌉`.
pub fn realizable_sample_bound(d: usize, acc: AccuracyParams, k: BoundConstants) -> Result<usize> {
    check_dim(d)?;
    let v = k.realizable * (d as f64 * (1.0 / acc.alpha).ln() + (1.0 / acc.beta).ln()) / acc.alpha;
    Ok(v.ceil() as usize)
}

/// `⌈C·(d + ln(1/β))/α²⌉`.
pub fn agnostic_sample_bound(d: usize, acc: AccuracyParams, k: BoundConstants) -> Result<usize> {
    check_dim(d)?;
    let v = k.agnostic * (d as f64 + (1.0 / acc.beta).ln()) / (acc.alpha * acc.alpha);
    Ok(v.ceil() as usize)
}

/// Whether `n·α ≥ d·ln(e·n/d) + ln(1/β)`.
pub fn vc_tech_holds(n: usize, d: usize, acc: AccuracyParams) -> bool {
    let (n, d) = (n as f64, d as f64);
    n * acc.alpha >= d * (std::f64::consts::E * n / d).ln() + (1.0 / acc.beta).ln()
}

/// Smallest integer `n₀ ≥ (2d·ln(2/α) + 2·ln(1/β))/α`; the inequality of
/// [`vc_tech_holds`] holds at every `n ≥ n₀`.
pub fn vc_tech_threshold(d: usize, acc: AccuracyParams) -> Result<usize> {
    check_dim(d)?;
    let df = d as f64;
    let n0 = ((2.0 * df * (2.0 / acc.alpha).ln() + 2.0 * (1.0 / acc.beta).ln()) / acc.alpha).ceil() as usize;
    assert!(vc_tech_holds(n0, d, acc), "vc_tech inequality fails at n0={n0}");
    Ok(n0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn table(bits: &[u8]) -> Hypothesis {
        Hypothesis::Table(bits.iter().map(|&b| b == 1).collect())
    }

    fn noisy_threshold(n: usize, t: usize, eta: Rational) -> DistributionSpec {
        DistributionSpec::new(vec![ratio(1, n as i128); n], (0..n).map(|x| if x >= t { Rational::one() - eta } else { eta }).collect())
            .unwrap()
    }

    #[test]
    fn empirical_error_cases() {
        let s = Dataset::from_pairs(&[(0, 1), (1, 0), (2, 1), (3, 0), (4, 0), (5, 1), (6, 0), (7, 0), (8, 0), (9, 0)]);
        let zero = table(&[0; 10]);
        assert_eq!(empirical_error(&zero, &s).unwrap(), ratio(3, 10));
        let labels: Vec<u8> = s.iter().map(|e| e.y as u8).collect();
        assert_eq!(empirical_error(&table(&labels), &s).unwrap(), ratio(0, 1));
        let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        assert_eq!(empirical_error(&table(&flipped), &s).unwrap(), ratio(1, 1));
        assert!(empirical_error(&zero, &Dataset::default()).is_err());
    }

    #[test]
    fn disagreement_cases() {
        let sx = UnlabeledDataset::new([2, 4, 7]);
        let a: Hypothesis = Concept::Threshold(3).into();
        let b: Hypothesis = Concept::Threshold(6).into();
        assert_eq!(empirical_disagreement(&a, &b, &sx).unwrap(), ratio(1, 3));
        assert_eq!(empirical_disagreement(&a, &a, &sx).unwrap(), ratio(0, 1));
        let comp = table(&(0..8).map(|x| (x < 3) as u8).collect::<Vec<_>>());
        assert_eq!(empirical_disagreement(&a, &comp, &sx).unwrap(), ratio(1, 1));
        assert!(empirical_disagreement(&a, &b, &UnlabeledDataset::default()).is_err());
        let x = xor_hypothesis(&a, &b, 8);
        let mean = Rational::new(sx.points.iter().filter(|p| x.eval(p.0)).count() as i128, 3);
        assert_eq!(mean, empirical_disagreement(&a, &b, &sx).unwrap());
    }

    #[test]
    fn xor_identities() {
        let h: Hypothesis = Concept::Interval(2, 5).into();
        assert_eq!(xor_hypothesis(&h, &h, 8), table(&[0; 8]));
        assert_eq!(xor_hypothesis(&h, &table(&[0; 8]), 8).truth_table(8), h.truth_table(8));
    }

    #[test]
    fn generalization_error_cases() {
        let h: Hypothesis = Concept::Threshold(5).into();
        assert_eq!(generalization_error(&h, &DistributionSpec::realizable_uniform(&h, 10)), ratio(0, 1));
        let coin = DistributionSpec::new(vec![ratio(1, 10); 10], vec![ratio(1, 2); 10]).unwrap();
        assert_eq!(generalization_error(&h, &coin), ratio(1, 2));
        // 10 points each contributing (1/10)·(1/10)
        let d = noisy_threshold(10, 5, ratio(1, 10));
        assert_eq!(generalization_error(&h, &d), ratio(1, 10));
    }

    #[test]
    fn optimal_error_cases() {
        let class = ConceptClass::thresholds(10).unwrap();
        let h: Hypothesis = Concept::Threshold(4).into();
        assert_eq!(optimal_error(&class, &DistributionSpec::realizable_uniform(&h, 10)).unwrap(), ratio(0, 1));
        let d = noisy_threshold(10, 5, ratio(1, 10));
        let brute = (0..=10).map(|t| generalization_error(&Concept::Threshold(t).into(), &d)).min().unwrap();
        assert_eq!(brute, ratio(1, 10));
        assert_eq!(optimal_error(&class, &d).unwrap(), brute);
        let coin = DistributionSpec::new(vec![ratio(1, 10); 10], vec![ratio(1, 2); 10]).unwrap();
        assert_eq!(optimal_error(&class, &coin).unwrap(), ratio(1, 2));
    }

    #[test]
    fn empirical_distribution_matches_empirical_error() {
        let s = Dataset::from_pairs(&[(0, 1), (0, 0), (3, 1), (5, 0), (5, 0), (7, 1)]);
        let d = DistributionSpec::empirical(&s, 8).unwrap();
        for t in 0..=8 {
            let h: Hypothesis = Concept::Threshold(t).into();
            assert_eq!(generalization_error(&h, &d), empirical_error(&h, &s).unwrap());
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(DistributionSpec::new(vec![ratio(1, 2), ratio(1, 3)], vec![ratio(0, 1); 2]).is_err());
        assert!(DistributionSpec::new(vec![ratio(1, 2); 2], vec![ratio(3, 2), ratio(0, 1)]).is_err());
        let d: DistributionSpec = serde_json::from_str(r#"{"marginal":[0.5,"1/4",0.25],"p1":[0,1,0.1]}"#).unwrap();
        assert_eq!(d.p1[2], ratio(1, 10));
        assert!(d.validate().is_ok());
    }

    #[test]
    fn realizable_bound_cases() {
        let acc = AccuracyParams::new(0.1, 0.1).unwrap();
        let k = BoundConstants::default();
        assert_eq!(realizable_sample_bound(1, acc, k).unwrap(), 47);
        let half = AccuracyParams::new(0.05, 0.1).unwrap();
        assert!(realizable_sample_bound(1, half, k).unwrap() > 2 * 47);
        assert!(realizable_sample_bound(0, acc, k).is_err());
    }

    #[test]
    fn agnostic_bound_cases() {
        let acc = AccuracyParams::new(0.1, 0.1).unwrap();
        let k = BoundConstants::default();
        assert_eq!(agnostic_sample_bound(1, acc, k).unwrap(), 331);
        let half = AccuracyParams::new(0.05, 0.1).unwrap();
        let (a, b) = (agnostic_sample_bound(3, acc, k).unwrap(), agnostic_sample_bound(3, half, k).unwrap());
        assert!((b as f64 / a as f64 - 4.0).abs() < 0.01);
        assert!(agnostic_sample_bound(2, acc, k).unwrap() as f64 >= 2.0 / 0.01);
    }

    #[test]
    fn vc_tech_cases() {
        let acc = AccuracyParams::new(0.1, 0.1).unwrap();
        assert_eq!(vc_tech_threshold(1, acc).unwrap(), 106);
        let rhs = (std::f64::consts::E * 106.0).ln() + 10f64.ln();
        assert!((rhs - 7.97).abs() < 0.01 && 10.6 >= rhs);
        let smaller = AccuracyParams::new(0.05, 0.1).unwrap();
        assert!(vc_tech_threshold(1, smaller).unwrap() > 106);
        for d in [1, 2] {
            for alpha in [0.05, 0.1] {
                for beta in [0.05, 0.1] {
                    let acc = AccuracyParams::new(alpha, beta).unwrap();
                    let n0 = vc_tech_threshold(d, acc).unwrap();
                    assert!((n0..=10 * n0).all(|n| vc_tech_holds(n, d, acc)));
                }
            }
        }
    }

    #[test]
    fn accuracy_validation() {
        assert!(AccuracyParams::new(0.0, 0.1).is_err());
        assert!(AccuracyParams::new(0.5, 1.0).is_err());
        assert!(BoundConstants::new(0.0, 1.0).is_err());
    }
}
