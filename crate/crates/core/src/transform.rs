//! Private relabeling and the realizable-to-agnostic transformation.
//!
//! [`relabel`] picks a concept among the labelings of a subsample `T` with the
//! exponential mechanism, scoring each candidate against the held-out part
//! `W`. [`agnostic_learn`] subsamples, relabels and runs a base learner on the
//! relabeled subsample. [`aux_run`] is the analysis-only variant that XORs the
//! base output with a concept consistent with the second half of `T`.

use num_traits::One;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

use crate::concepts::{CandidateSet, Concept, ConceptClass, DomainCosts, Hypothesis};
use crate::data::{split_by_index, subsample_uniform_indices, Dataset, IndexSet, LabeledExample, RandomStream, UnlabeledDataset};
use crate::error::{Error, Result};
use crate::mechanisms::{exponential_mechanism, Learner, ScoredCandidates};
use crate::metrics::{
    agnostic_sample_bound, empirical_disagreement, realizable_sample_bound, xor_hypothesis, AccuracyParams, BoundConstants,
};
use crate::rational::{ceil_mul, is_positive, ratio, Rational};

/// Stream tags used by [`agnostic_learn`] and [`aux_run`].
pub const STREAM_SUBSAMPLE: u64 = 1;
pub const STREAM_SELECT: u64 = 2;
pub const STREAM_BASE: u64 = 3;

/// Batch evaluator of `q(T∘W, h) = min_f dis_T(h, f) + err_W(f)` for many
/// labelings of one fixed `T_X`.
///
/// Costs are kept as integers over the denominator `|T|·|W|`: every point of
/// `T_X` weighs `|W|` and every example of `W` weighs `|T|`.
#[derive(Debug, Clone)]
pub struct QScorer<'a> {
    class: &'a ConceptClass,
    points: Vec<usize>,
    w_costs: DomainCosts,
    t_weight: i128,
    denom: i128,
}

impl<'a> QScorer<'a> {
    pub fn new(class: &'a ConceptClass, tx: &UnlabeledDataset, w: &Dataset) -> Result<Self> {
        if tx.is_empty() || w.is_empty() {
            return Err(Error::invalid("score needs nonempty T and W"));
        }
        class.check_points(tx.points.iter().map(|p| p.0))?;
        class.check_points(w.iter().map(|e| e.x.0))?;
        let (t_len, w_len) = (tx.len() as i128, w.len() as i128);
        let mut w_costs = DomainCosts::new(class.domain_size());
        for e in w.iter() {
            w_costs.add(e.x.0, e.y, t_len);
        }
        Ok(Self { class, points: tx.points.iter().map(|p| p.0).collect(), w_costs, t_weight: w_len, denom: t_len * w_len })
    }

    /// Score of a labeling of `T_X`, given in the order of `T_X`.
    pub fn score_labeling(&self, labels: &[bool]) -> Rational {
        debug_assert_eq!(labels.len(), self.points.len());
        let mut costs = self.w_costs.clone();
        for (&x, &l) in self.points.iter().zip(labels) {
            costs.add(x, l, self.t_weight);
        }
        let (_, v) = self.class.erm_on_costs(&costs);
        Rational::new(v, self.denom)
    }

    pub fn score(&self, h: &Concept) -> Rational {
        let labels: Vec<bool> = self.points.iter().map(|&x| h.eval(x)).collect();
        self.score_labeling(&labels)
    }

    pub fn sensitivity(&self) -> Rational {
        Rational::new(1, self.t_weight)
    }
}

/// `q(T∘W, h)`, exact.
pub fn score_q(class: &ConceptClass, h: &Concept, tx: &UnlabeledDataset, w: &Dataset) -> Result<Rational> {
    Ok(QScorer::new(class, tx, w)?.score(h))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelabelOutcome {
    pub chosen: Concept,
    pub relabeled: Dataset,
    #[serde(with = "crate::rational::serde_rational")]
    pub score_of_chosen: Rational,
    pub candidate_count: usize,
}

/// The candidate set of a relabeling step with the exact selection law.
#[derive(Debug, Clone)]
pub struct RelabelDistribution {
    pub candidates: CandidateSet,
    pub scored: ScoredCandidates,
    pub eps: Rational,
}

impl RelabelDistribution {
    pub fn probabilities(&self) -> Vec<f64> {
        self.scored.selection_probabilities(&self.eps)
    }

    pub fn log_probabilities(&self) -> Vec<f64> {
        self.scored.log_selection_probabilities(&self.eps)
    }

    fn draw(&self, t: &Dataset, rng: &mut RandomStream) -> Result<RelabelOutcome> {
        let i = exponential_mechanism(&self.scored, &self.eps, rng)?;
        let chosen = self.candidates.entries[i].concept.clone();
        Ok(RelabelOutcome {
            relabeled: relabel_with(t, &chosen),
            chosen,
            score_of_chosen: self.scored.scores[i],
            candidate_count: self.candidates.len(),
        })
    }
}

/// `T^h`: the points of `t` in order, labeled by `h`.
pub fn relabel_with(t: &Dataset, h: &Concept) -> Dataset {
    t.iter().map(|e| LabeledExample { x: e.x, y: h.eval(e.x.0) }).collect()
}

fn check_eps(eps: &Rational) -> Result<()> {
    if is_positive(eps) {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon must be positive, got {eps}")))
    }
}

/// Candidates `Π_C(T_X)` scored by `q` with sensitivity `1/|W|`.
pub fn relabel_distribution(class: &ConceptClass, t: &Dataset, w: &Dataset, eps: Rational) -> Result<RelabelDistribution> {
    check_eps(&eps)?;
    let tx = t.unlabeled();
    let scorer = QScorer::new(class, &tx, w)?;
    let candidates = class.dichotomies(&tx)?;
    let scores = candidates.entries.iter().map(|c| scorer.score_labeling(&c.labeling)).collect();
    let scored = ScoredCandidates::new(scores, scorer.sensitivity())?;
    Ok(RelabelDistribution { candidates, scored, eps })
}

pub fn relabel(class: &ConceptClass, t: &Dataset, w: &Dataset, eps: Rational, rng: &mut RandomStream) -> Result<RelabelOutcome> {
    relabel_distribution(class, t, w, eps)?.draw(t, rng)
}

/// Subsample-only relabeling law: candidates `Π_C(T_X)` scored by `err_T`
/// with sensitivity `1/|T|`.
pub fn relabel_subsample_only_distribution(class: &ConceptClass, t: &Dataset, eps: Rational) -> Result<RelabelDistribution> {
    check_eps(&eps)?;
    if t.is_empty() {
        return Err(Error::invalid("relabeling needs a nonempty T"));
    }
    let candidates = class.dichotomies(&t.unlabeled())?;
    let len = t.len() as i128;
    let scores = candidates
        .entries
        .iter()
        .map(|c| {
            let mistakes = c.labeling.iter().zip(t.iter()).filter(|(l, e)| **l != e.y).count();
            Rational::new(mistakes as i128, len)
        })
        .collect();
    let scored = ScoredCandidates::new(scores, Rational::new(1, len))?;
    Ok(RelabelDistribution { candidates, scored, eps })
}

pub fn relabel_subsample_only(class: &ConceptClass, t: &Dataset, eps: Rational, rng: &mut RandomStream) -> Result<RelabelOutcome> {
    relabel_subsample_only_distribution(class, t, eps)?.draw(t, rng)
}

/// Which score the relabeling step uses inside [`agnostic_learn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelabelScore {
    /// `q(T∘W, h)` with sensitivity `1/|W|`.
    #[default]
    Full,
    /// `err_T(h)` with sensitivity `1/|T|` and privacy parameter 1, `W`
    /// discarded.
    SubsampleOnly,
}

#[derive(Clone)]
pub struct AgnConfig {
    pub eps: Rational,
    pub class: ConceptClass,
    pub base: Arc<dyn Learner>,
    pub score: RelabelScore,
}

impl std::fmt::Debug for AgnConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AgnConfig")
            .field("eps", &self.eps)
            .field("class", &self.class)
            .field("base", &self.base.name())
            .field("score", &self.score)
            .finish()
    }
}

impl AgnConfig {
    pub fn new(eps: Rational, class: ConceptClass, base: Arc<dyn Learner>) -> Result<Self> {
        check_eps(&eps)?;
        if eps >= Rational::one() {
            return Err(Error::invalid("epsilon must be below 1 so that W is nonempty"));
        }
        Ok(Self { eps, class, base, score: RelabelScore::Full })
    }

    pub fn with_score(mut self, score: RelabelScore) -> Self {
        self.score = score;
        self
    }
}

/// `|T| = ⌈εn⌉`, checking `εn ≥ 1` and `|T| < n`.
pub fn subsample_size(eps: &Rational, n: usize) -> Result<usize> {
    if eps * Rational::from_integer(n as i128) < Rational::one() {
        return Err(Error::invalid(format!("subsample empty: eps*n = {} is below 1", eps * Rational::from_integer(n as i128))));
    }
    let k = ceil_mul(eps, n) as usize;
    if k >= n {
        return Err(Error::invalid(format!("W empty: subsample size {k} leaves nothing of n = {n}")));
    }
    Ok(k)
}

/// Sample sizes for the relabeling step to land within `α` of the best
/// concept with probability `1 − β`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TransformSizing {
    /// `|T| ≥ C₁·(d·ln(1/α) + ln(1/β))/α`.
    pub subsample: usize,
    /// `|W| ≥ max(C₂·(d + ln(1/β))/α², |T|/(6ε))`.
    pub holdout: usize,
    /// Smallest `n` with `⌈εn⌉ ≥ |T|` and `n − ⌈εn⌉ ≥ |W|`.
    pub total: usize,
}

pub fn transform_sizing(d: usize, acc: AccuracyParams, eps: &Rational, k: BoundConstants) -> Result<TransformSizing> {
    check_eps(eps)?;
    if *eps >= Rational::one() {
        return Err(Error::invalid("epsilon must be below 1"));
    }
    let subsample = realizable_sample_bound(d, acc, k)?;
    let by_eps = (Rational::from_integer(subsample as i128) / (eps * Rational::from_integer(6))).ceil().to_integer() as usize;
    let holdout = agnostic_sample_bound(d, acc, k)?.max(by_eps);
    let fits = |n: usize| {
        let t = ceil_mul(eps, n) as usize;
        t >= subsample && n - t.min(n) >= holdout
    };
    let mut total = subsample + holdout;
    while !fits(total) {
        total += 1;
    }
    Ok(TransformSizing { subsample, holdout, total })
}

/// Everything one run of [`agnostic_learn`] did.
#[derive(Debug, Clone, Serialize)]
pub struct AgnRun {
    pub subsample: Vec<usize>,
    pub relabel: RelabelOutcome,
    pub hypothesis: Hypothesis,
}

pub fn agnostic_learn(cfg: &AgnConfig, s: &Dataset, rng: &mut RandomStream) -> Result<Hypothesis> {
    agnostic_learn_traced(cfg, s, rng).map(|r| r.hypothesis)
}

pub fn agnostic_learn_traced(cfg: &AgnConfig, s: &Dataset, rng: &mut RandomStream) -> Result<AgnRun> {
    let k = subsample_size(&cfg.eps, s.len())?;
    if cfg.eps > ratio(1, 3) {
        log::warn!("eps = {} exceeds 1/3; the privacy analysis assumes eps <= 1/3", cfg.eps);
    }
    let idx = subsample_uniform_indices(s.len(), k, &mut rng.fork(STREAM_SUBSAMPLE))?;
    let (t, w) = split_by_index(s, &idx)?;
    let mut select = rng.fork(STREAM_SELECT);
    let outcome = match cfg.score {
        RelabelScore::Full => relabel(&cfg.class, &t, &w, cfg.eps, &mut select)?,
        RelabelScore::SubsampleOnly => relabel_subsample_only(&cfg.class, &t, Rational::one(), &mut select)?,
    };
    let hypothesis = cfg.base.learn(&outcome.relabeled, &mut rng.fork(STREAM_BASE))?;
    Ok(AgnRun { subsample: idx.indices().to_vec(), relabel: outcome, hypothesis })
}

/// Output of one [`aux_run`] with the pieces the analysis refers to.
#[derive(Debug, Clone, Serialize)]
pub struct AuxOutcome {
    pub relabel: RelabelOutcome,
    /// Base learner output on `T^h`.
    pub g: Hypothesis,
    /// Canonical concept consistent with `V^h`.
    pub h_bar: Concept,
    /// `g ⊕ h̄`.
    pub output: Hypothesis,
    /// `dis_{U_X}(g, h̄)`.
    #[serde(with = "crate::rational::serde_rational")]
    pub dis_u: Rational,
}

fn consistent_on_v(class: &ConceptClass, relabeled: &Dataset, u_len: usize) -> Result<Concept> {
    let v = Dataset::new(relabeled.examples[u_len..].to_vec());
    class.consistent_concept(&v)?.ok_or_else(|| Error::NotRealizable("relabeled V has no consistent concept".into()))
}

fn check_aux_inputs(u: &Dataset, v: &Dataset, w: &Dataset) -> Result<()> {
    if u.is_empty() || v.is_empty() || w.is_empty() {
        return Err(Error::invalid("aux needs nonempty U, V and W"));
    }
    Ok(())
}

pub fn aux_run(
    class: &ConceptClass,
    u: &Dataset,
    v: &Dataset,
    w: &Dataset,
    eps: Rational,
    base: &dyn Learner,
    rng: &mut RandomStream,
) -> Result<AuxOutcome> {
    check_aux_inputs(u, v, w)?;
    let t = u.concat(v);
    let outcome = relabel(class, &t, w, eps, &mut rng.fork(STREAM_SELECT))?;
    let h_bar = consistent_on_v(class, &outcome.relabeled, u.len())?;
    let g = base.learn(&outcome.relabeled, &mut rng.fork(STREAM_BASE))?;
    let n = class.domain_size();
    let hb = Hypothesis::Concept(h_bar.clone());
    let dis_u = empirical_disagreement(&g, &hb, &u.unlabeled())?;
    let output = xor_hypothesis(&g, &hb, n);
    Ok(AuxOutcome { relabel: outcome, g, h_bar, output, dis_u })
}

/// Exact law of the aux output truth table, for a base learner that can
/// enumerate its own output distribution.
pub fn aux_output_distribution(
    class: &ConceptClass,
    u: &Dataset,
    v: &Dataset,
    w: &Dataset,
    eps: Rational,
    base: &dyn Learner,
) -> Result<BTreeMap<Vec<bool>, f64>> {
    check_aux_inputs(u, v, w)?;
    let t = u.concat(v);
    let dist = relabel_distribution(class, &t, w, eps)?;
    let n = class.domain_size();
    let mut law: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    for (cand, p) in dist.candidates.entries.iter().zip(dist.probabilities()) {
        let relabeled = relabel_with(&t, &cand.concept);
        let bar = consistent_on_v(class, &relabeled, u.len())?.truth_table(n);
        let inner = base
            .output_distribution(&relabeled)
            .ok_or_else(|| Error::invalid(format!("base learner {} has no exact output distribution", base.name())))??;
        for (g, q) in inner {
            let table: Vec<bool> = g.truth_table(n).iter().zip(&bar).map(|(a, b)| a ^ b).collect();
            *law.entry(table).or_insert(0.0) += p * q;
        }
    }
    Ok(law)
}

/// Exact law of the [`agnostic_learn`] output truth table with the
/// subsample fixed to `idx`.
pub fn agnostic_output_distribution_given_split(cfg: &AgnConfig, s: &Dataset, idx: &IndexSet) -> Result<BTreeMap<Vec<bool>, f64>> {
    let (t, w) = split_by_index(s, idx)?;
    let dist = match cfg.score {
        RelabelScore::Full => relabel_distribution(&cfg.class, &t, &w, cfg.eps)?,
        RelabelScore::SubsampleOnly => relabel_subsample_only_distribution(&cfg.class, &t, Rational::one())?,
    };
    let n = cfg.class.domain_size();
    let mut law: BTreeMap<Vec<bool>, f64> = BTreeMap::new();
    for (cand, p) in dist.candidates.entries.iter().zip(dist.probabilities()) {
        let relabeled = relabel_with(&t, &cand.concept);
        let inner = cfg
            .base
            .output_distribution(&relabeled)
            .ok_or_else(|| Error::invalid(format!("base learner {} has no exact output distribution", cfg.base.name())))??;
        for (g, q) in inner {
            *law.entry(g.truth_table(n)).or_insert(0.0) += p * q;
        }
    }
    Ok(law)
}

/// Largest `|ln p(O) − ln p'(O)|` over the union of both supports; infinite
/// when one law puts mass where the other puts none.
pub fn max_log_ratio(a: &BTreeMap<Vec<bool>, f64>, b: &BTreeMap<Vec<bool>, f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for key in a.keys().chain(b.keys()) {
        let pa = a.get(key).copied().unwrap_or(0.0);
        let pb = b.get(key).copied().unwrap_or(0.0);
        if pa == 0.0 && pb == 0.0 {
            continue;
        }
        worst = worst.max((pa.ln() - pb.ln()).abs());
    }
    worst
}
