//! Synthetic distributions, sampling and the excess-error experiment sweep.

use num_traits::{One, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

use crate::audit::{estimate_epsilon, AuditPlan, Mechanism};
use crate::concepts::{ConceptClass, Hypothesis};
use crate::data::{Dataset, LabeledExample, RandomStream};
use crate::error::{Error, Result};
use crate::mechanisms::{em_private_empirical_learner, ErmLearner, Learner};
use crate::metrics::{generalization_error, optimal_error, DistributionSpec};
use crate::rational::{ratio, serde_rational, serde_rational_vec, to_f64, Rational};
use crate::transform::{agnostic_learn, AgnConfig, RelabelScore};

fn uniform_marginal(n: usize) -> Vec<Rational> {
    vec![ratio(1, n as i128); n]
}

fn check_eta(eta: &Rational) -> Result<()> {
    if eta < &Rational::zero() || eta >= &ratio(1, 2) {
        return Err(Error::invalid(format!("noise rate must lie in [0, 1/2), got {eta}")));
    }
    Ok(())
}

/// Uniform marginal; label 1 with probability `1 − η` at `x ≥ t*` and `η`
/// below it.
pub fn gen_noisy_threshold(domain_size: usize, t_star: usize, eta: Rational) -> Result<DistributionSpec> {
    check_eta(&eta)?;
    if domain_size == 0 || t_star > domain_size {
        return Err(Error::invalid(format!("threshold {t_star} outside [0, {domain_size}]")));
    }
    let p1 = (0..domain_size).map(|x| if x >= t_star { Rational::one() - eta } else { eta }).collect();
    DistributionSpec::new(uniform_marginal(domain_size), p1)
}

/// Uniform marginal; label 1 with probability `1 − η` inside `[a, b)` and
/// `η` outside.
pub fn gen_noisy_interval(domain_size: usize, a: usize, b: usize, eta: Rational) -> Result<DistributionSpec> {
    check_eta(&eta)?;
    if a > b || b > domain_size || domain_size == 0 {
        return Err(Error::invalid(format!("interval [{a}, {b}) outside [0, {domain_size}]")));
    }
    let p1 = (0..domain_size).map(|x| if (a..b).contains(&x) { Rational::one() - eta } else { eta }).collect();
    DistributionSpec::new(uniform_marginal(domain_size), p1)
}

/// Uniform marginal with fair-coin labels.
pub fn gen_uniform_random_labels(domain_size: usize) -> Result<DistributionSpec> {
    if domain_size == 0 {
        return Err(Error::invalid("domain must be nonempty"));
    }
    DistributionSpec::new(uniform_marginal(domain_size), vec![ratio(1, 2); domain_size])
}

/// `n` i.i.d. draws from `d`.
pub fn sample_dataset(d: &DistributionSpec, n: usize, rng: &mut RandomStream) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let weights: Vec<f64> = d.marginal.iter().map(to_f64).collect();
    let index = WeightedIndex::new(&weights).map_err(|e| Error::invalid(format!("bad marginal: {e}")))?;
    Ok((0..n)
        .map(|_| {
            let x = index.sample(rng.rng());
            LabeledExample::new(x, rng.bernoulli(to_f64(&d.p1[x])))
        })
        .collect())
}

/// Among all single-entry replacements of example `i`, the neighbor of `s`
/// that maximizes `objective`. Used to build worst-case audit pairs.
pub fn most_distinguishing_replacement(
    s: &Dataset,
    i: usize,
    domain_size: usize,
    objective: impl Fn(&Dataset) -> Result<f64>,
) -> Result<(Dataset, f64)> {
    if i >= s.len() {
        return Err(Error::invalid(format!("index {i} outside dataset of length {}", s.len())));
    }
    let mut best: Option<(Dataset, f64)> = None;
    for x in 0..domain_size {
        for y in [false, true] {
            let e = LabeledExample::new(x, y);
            if s.examples[i] == e {
                continue;
            }
            let mut cand = s.clone();
            cand.examples[i] = e;
            let v = objective(&cand)?;
            if best.as_ref().is_none_or(|(_, b)| v > *b) {
                best = Some((cand, v));
            }
        }
    }
    best.ok_or_else(|| Error::invalid("no replacement available"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "kebab-case")]
pub enum DistributionGenerator {
    NoisyThreshold {
        t_star: usize,
        #[serde(with = "serde_rational")]
        eta: Rational,
    },
    NoisyInterval {
        a: usize,
        b: usize,
        #[serde(with = "serde_rational")]
        eta: Rational,
    },
    UniformRandomLabels,
}

impl DistributionGenerator {
    pub fn build(&self, domain_size: usize) -> Result<DistributionSpec> {
        match self {
            Self::NoisyThreshold { t_star, eta } => gen_noisy_threshold(domain_size, *t_star, *eta),
            Self::NoisyInterval { a, b, eta } => gen_noisy_interval(domain_size, *a, *b, *eta),
            Self::UniformRandomLabels => gen_uniform_random_labels(domain_size),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    NewTransform,
    BaselineSubsampleOnly,
    NonPrivate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::NewTransform => "new-transform",
            Self::BaselineSubsampleOnly => "baseline-subsample-only",
            Self::NonPrivate => "non-private",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub class: ConceptClass,
    pub distribution: DistributionGenerator,
    pub n_grid: Vec<usize>,
    #[serde(with = "serde_rational_vec")]
    pub eps_grid: Vec<Rational>,
    pub alpha_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
    /// When set, every private cell also audits its pipeline with this many
    /// trials per side.
    #[serde(default)]
    pub audit_trials: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.eps_grid.is_empty() || self.alpha_grid.is_empty() {
            return Err(Error::invalid("experiment grids must be nonempty"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if self.eps_grid.iter().any(|e| *e <= Rational::zero() || *e >= Rational::one()) {
            return Err(Error::invalid("every eps must lie in (0, 1)"));
        }
        if self.alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::invalid("every alpha must lie in (0, 1)"));
        }
        self.distribution.build(self.class.domain_size()).map(|_| ())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub class: String,
    #[serde(rename = "N")]
    pub domain_size: usize,
    pub mode: String,
    pub n: usize,
    pub eps: String,
    pub alpha: f64,
    pub trial: usize,
    /// `None` when the trial errored.
    pub excess_error: Option<f64>,
    pub failed: bool,
    pub eps_hat: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub class: String,
    #[serde(rename = "N")]
    pub domain_size: usize,
    pub mode: String,
    pub n: usize,
    pub eps: String,
    pub alpha: f64,
    pub trials: usize,
    pub errors: usize,
    pub median_excess: Option<f64>,
    pub mean_excess: Option<f64>,
    pub failure_fraction: f64,
    pub eps_hat: Option<f64>,
    pub error_messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<CellSummary>,
}

pub const CSV_HEADER: [&str; 11] = ["class", "N", "mode", "n", "eps", "alpha", "trial", "excess_error", "failed", "eps_hat", "seed"];

impl ExperimentResult {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(CSV_HEADER)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                r.class.clone(),
                r.domain_size.to_string(),
                r.mode.clone(),
                r.n.to_string(),
                r.eps.clone(),
                r.alpha.to_string(),
                r.trial.to_string(),
                opt(r.excess_error),
                u8::from(r.failed).to_string(),
                opt(r.eps_hat),
                r.seed.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary)?)
    }
}

pub type SampleLearner = Arc<dyn Fn(&Dataset, &mut RandomStream) -> Result<Hypothesis> + Send + Sync>;

/// The learner a mode runs on a sample.
pub fn pipeline(class: ConceptClass, mode: Mode, eps: Rational) -> Result<SampleLearner> {
    match mode {
        Mode::NonPrivate => {
            let erm = ErmLearner::new(class);
            Ok(Arc::new(move |s: &Dataset, rng: &mut RandomStream| erm.learn(s, rng)))
        }
        Mode::NewTransform | Mode::BaselineSubsampleOnly => {
            let base: Arc<dyn Learner> = Arc::new(em_private_empirical_learner(class, Rational::one())?);
            let score = if mode == Mode::NewTransform { RelabelScore::Full } else { RelabelScore::SubsampleOnly };
            let cfg = AgnConfig::new(eps, class, base)?.with_score(score);
            Ok(Arc::new(move |s: &Dataset, rng: &mut RandomStream| agnostic_learn(&cfg, s, rng)))
        }
    }
}

struct Cell {
    index: u64,
    n: usize,
    eps: Rational,
    alpha: f64,
}

fn median(sorted: &[f64]) -> Option<f64> {
    match sorted.len() {
        0 => None,
        k if k % 2 == 1 => Some(sorted[k / 2]),
        k => Some((sorted[k / 2 - 1] + sorted[k / 2]) / 2.0),
    }
}

/// Runs every `(n, eps, alpha)` cell for `trials` trials. Trial `t` of cell
/// `c` uses the stream `fork(c).fork(t)` of the root seed, so results do
/// not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let d = cfg.distribution.build(cfg.class.domain_size())?;
    let opt = optimal_error(&cfg.class, &d)?;
    let root = RandomStream::new(cfg.seed, 0);
    let mut cells = Vec::new();
    for &n in &cfg.n_grid {
        for &eps in &cfg.eps_grid {
            for &alpha in &cfg.alpha_grid {
                cells.push(Cell { index: cells.len() as u64, n, eps, alpha });
            }
        }
    }
    let class_name = cfg.class.kind().to_string();
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for cell in &cells {
        let learn = pipeline(cfg.class, cfg.mode, cell.eps);
        let cell_stream = root.fork(cell.index);
        let outcomes: Vec<std::result::Result<f64, String>> = match &learn {
            Ok(learn) => (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let trial = cell_stream.fork(t as u64);
                    let run = || -> Result<f64> {
                        let s = sample_dataset(&d, cell.n, &mut trial.fork(0))?;
                        let h = learn(&s, &mut trial.fork(1))?;
                        Ok(to_f64(&(generalization_error(&h, &d) - opt)))
                    };
                    run().map_err(|e| e.to_string())
                })
                .collect(),
            Err(e) => vec![Err(e.to_string()); cfg.trials],
        };
        let eps_hat = match (cfg.audit_trials, cfg.mode, &learn) {
            (Some(trials), Mode::NewTransform | Mode::BaselineSubsampleOnly, Ok(learn)) => {
                audit_cell(cfg, &d, cell, trials, learn.clone(), &cell_stream).ok()
            }
            _ => None,
        };
        let eps_str = crate::rational::format_rational(&cell.eps);
        let mut excess = Vec::new();
        let mut messages = Vec::new();
        for (t, o) in outcomes.into_iter().enumerate() {
            let (value, failed) = match o {
                Ok(v) => {
                    excess.push(v);
                    (Some(v), v > cell.alpha)
                }
                Err(e) => {
                    messages.push(format!("trial {t}: {e}"));
                    (None, true)
                }
            };
            rows.push(ResultRow {
                class: class_name.clone(),
                domain_size: cfg.class.domain_size(),
                mode: cfg.mode.as_str().into(),
                n: cell.n,
                eps: eps_str.clone(),
                alpha: cell.alpha,
                trial: t,
                excess_error: value,
                failed,
                eps_hat,
                seed: cfg.seed,
            });
        }
        let failures = rows[rows.len() - cfg.trials..].iter().filter(|r| r.failed).count();
        let mut sorted = excess.clone();
        sorted.sort_by(f64::total_cmp);
        messages.dedup();
        summary.push(CellSummary {
            class: class_name.clone(),
            domain_size: cfg.class.domain_size(),
            mode: cfg.mode.as_str().into(),
            n: cell.n,
            eps: eps_str,
            alpha: cell.alpha,
            trials: cfg.trials,
            errors: cfg.trials - excess.len(),
            median_excess: median(&sorted),
            mean_excess: (!excess.is_empty()).then(|| excess.iter().sum::<f64>() / excess.len() as f64),
            failure_fraction: failures as f64 / cfg.trials as f64,
            eps_hat,
            error_messages: messages,
        });
    }
    Ok(ExperimentResult { rows, summary })
}

/// Audits a cell's pipeline on one sampled dataset and its neighbor that
/// moves the first example to the opposite corner with the opposite label.
fn audit_cell(
    cfg: &ExperimentConfig,
    d: &DistributionSpec,
    cell: &Cell,
    trials: usize,
    learn: SampleLearner,
    stream: &RandomStream,
) -> Result<f64> {
    let s = sample_dataset(d, cell.n, &mut stream.fork(u64::MAX))?;
    let mut s_prime = s.clone();
    let first = s.examples[0];
    let n = cfg.class.domain_size();
    s_prime.examples[0] = LabeledExample::new(n - 1 - first.x.0, !first.y);
    let mech: Mechanism = Arc::new(move |data: &Dataset, rng: &mut RandomStream| Ok(learn(data, rng)?.table_string(n)));
    let plan = AuditPlan::new("experiment", mech, s, s_prime, trials);
    Ok(estimate_epsilon(&plan, &stream.fork(u64::MAX - 1))?.eps_hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::empirical_error;

    #[test]
    fn noisy_threshold_optima() {
        let class = ConceptClass::thresholds(64).unwrap();
        let d = gen_noisy_threshold(64, 20, Rational::zero()).unwrap();
        assert_eq!(optimal_error(&class, &d).unwrap(), Rational::zero());
        for t in [0, 13, 64] {
            let d = gen_noisy_threshold(64, t, ratio(1, 10)).unwrap();
            assert_eq!(optimal_error(&class, &d).unwrap(), ratio(1, 10));
        }
        let d = gen_noisy_threshold(64, 30, ratio(2, 5)).unwrap();
        assert_eq!(optimal_error(&class, &d).unwrap(), ratio(2, 5));
        assert!(gen_noisy_threshold(10, 3, ratio(1, 2)).is_err());
    }

    #[test]
    fn other_generators() {
        let class = ConceptClass::intervals(20).unwrap();
        let d = gen_noisy_interval(20, 4, 11, ratio(1, 5)).unwrap();
        assert_eq!(optimal_error(&class, &d).unwrap(), ratio(1, 5));
        let d = gen_uniform_random_labels(20).unwrap();
        assert_eq!(optimal_error(&class, &d).unwrap(), ratio(1, 2));
    }

    #[test]
    fn sampling_properties() {
        let mut marginal = vec![Rational::zero(); 6];
        marginal[2] = Rational::one();
        let d = DistributionSpec::new(marginal, vec![ratio(1, 2); 6]).unwrap();
        let s = sample_dataset(&d, 50, &mut RandomStream::from_seed(0)).unwrap();
        assert_eq!(s.len(), 50);
        assert!(s.iter().all(|e| e.x.0 == 2));
        let d = gen_noisy_threshold(4, 2, ratio(1, 10)).unwrap();
        let s = sample_dataset(&d, 40_000, &mut RandomStream::from_seed(1)).unwrap();
        for x in 0..4 {
            let at: Vec<_> = s.iter().filter(|e| e.x.0 == x).collect();
            let freq = at.iter().filter(|e| e.y).count() as f64 / at.len() as f64;
            assert!((freq - to_f64(&d.p1[x])).abs() <= 0.02, "x={x} freq={freq}");
        }
        assert!(sample_dataset(&d, 0, &mut RandomStream::from_seed(1)).is_err());
    }

    #[test]
    fn worst_replacement_maximizes_objective() {
        let s = Dataset::from_pairs(&[(1, 0), (2, 1)]);
        let (best, v) =
            most_distinguishing_replacement(&s, 0, 4, |c| Ok(c.examples[0].x.0 as f64 + f64::from(u8::from(c.examples[0].y)))).unwrap();
        assert_eq!(best.examples[0], LabeledExample::new(3, true));
        assert_eq!(v, 4.0);
    }

    fn small_config(mode: Mode) -> ExperimentConfig {
        ExperimentConfig {
            class: ConceptClass::thresholds(16).unwrap(),
            distribution: DistributionGenerator::NoisyThreshold { t_star: 6, eta: ratio(1, 10) },
            n_grid: vec![60, 120],
            eps_grid: vec![ratio(1, 5)],
            alpha_grid: vec![0.2],
            trials: 8,
            seed: 42,
            mode,
            audit_trials: None,
        }
    }

    #[test]
    fn experiment_is_deterministic_and_nonnegative() {
        for mode in [Mode::NewTransform, Mode::BaselineSubsampleOnly, Mode::NonPrivate] {
            let cfg = small_config(mode);
            let a = run_experiment(&cfg).unwrap();
            let b = run_experiment(&cfg).unwrap();
            let (mut ca, mut cb) = (Vec::new(), Vec::new());
            a.write_csv(&mut ca).unwrap();
            b.write_csv(&mut cb).unwrap();
            assert_eq!(ca, cb);
            assert!(String::from_utf8(ca).unwrap().starts_with("class,N,mode,n,eps,alpha,trial,excess_error,failed,eps_hat,seed\n"));
            assert_eq!(a.rows.len(), 16);
            assert!(a.rows.iter().all(|r| r.excess_error.unwrap() >= 0.0));
        }
    }

    #[test]
    fn erroring_cells_are_recorded() {
        let mut cfg = small_config(Mode::NewTransform);
        cfg.n_grid = vec![3, 60];
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.summary[0].errors, 8);
        assert!(res.summary[0].error_messages[0].contains("subsample empty"));
        assert_eq!(res.summary[1].errors, 0);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = small_config(Mode::BaselineSubsampleOnly);
        let s = serde_json::to_string(&cfg).unwrap();
        assert!(s.contains("\"generator\":\"noisy-threshold\""));
        assert_eq!(ExperimentConfig::from_json_str(&s).unwrap(), cfg);
    }

    #[test]
    fn non_private_erm_fits_sample() {
        let class = ConceptClass::thresholds(16).unwrap();
        let d = gen_noisy_threshold(16, 5, ratio(1, 10)).unwrap();
        let s = sample_dataset(&d, 200, &mut RandomStream::from_seed(3)).unwrap();
        let learn = pipeline(class, Mode::NonPrivate, ratio(1, 2)).unwrap();
        let h = learn(&s, &mut RandomStream::from_seed(0)).unwrap();
        let best = class
            .all_functions()
            .entries
            .iter()
            .map(|c| empirical_error(&Hypothesis::Concept(c.concept.clone()), &s).unwrap())
            .min()
            .unwrap();
        assert_eq!(empirical_error(&h, &s).unwrap(), best);
    }
}
