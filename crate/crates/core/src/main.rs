use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use dpagn::audit::{estimate_epsilon, Scenario};
use dpagn::harness::run_experiment;
use dpagn::harness::ExperimentConfig;
use dpagn::mechanisms::{em_private_empirical_learner, ConsistentLearner, ErmLearner, Learner};
use dpagn::metrics::{agnostic_sample_bound, realizable_sample_bound, vc_tech_threshold, AccuracyParams, BoundConstants};
use dpagn::prediction::{
    chunk_size, fit_agnostic_predictor, fit_realizable_predictor, predictor_count, AgnosticPredictorConfig, PredictorState,
};
use dpagn::rational::{format_rational, parse_rational, to_f64};
use dpagn::transform::{agnostic_learn_traced, relabel, transform_sizing, AgnConfig};
use dpagn::{ClassKind, ConceptClass, Dataset, Error, RandomStream, Rational, Result};

#[derive(Parser, Debug)]
#[command(name = "dpagn", version, about = "Differentially private agnostic learning on finite domains")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = OutputMode::Private)]
    mode: OutputMode,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OutputMode {
    /// Release only the private output.
    Private,
    /// Also emit diagnostics that are not private.
    Research,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BaseLearner {
    /// Exponential mechanism over the whole class, scored by empirical error.
    Em,
    Consistent,
    Erm,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Setting {
    Realizable,
    Agnostic,
}

#[derive(clap::Args, Debug)]
struct ClassArgs {
    /// points, thresholds, intervals or union:K
    #[arg(long)]
    class: ClassKind,
    #[arg(long)]
    domain_size: usize,
}

impl ClassArgs {
    fn build(&self) -> Result<ConceptClass> {
        ConceptClass::new(self.class, self.domain_size)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the private agnostic learner once.
    Learn {
        #[command(flatten)]
        class: ClassArgs,
        /// Dataset as JSON ([[x, y], ...]) or CSV (x,y header).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_rational)]
        eps: Rational,
        #[arg(long, value_enum, default_value_t = BaseLearner::Em)]
        base: BaseLearner,
        /// Privacy parameter of the EM base learner.
        #[arg(long, value_parser = parse_rational, default_value = "1")]
        base_eps: Rational,
    },
    /// Fit a private predictor and write its state.
    PredictFit {
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = parse_rational)]
        eps: Rational,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        beta: f64,
        #[arg(long, value_enum, default_value_t = Setting::Agnostic)]
        setting: Setting,
        #[arg(long, default_value_t = 1.0)]
        chunk_constant: f64,
        /// Per-query privacy of the aggregator in the agnostic setting.
        #[arg(long, value_parser = parse_rational, default_value = "1")]
        inner_eps: Rational,
    },
    /// Answer one query from a predictor state.
    PredictQuery {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        x: usize,
    },
    /// Relabel T against W (research mode only).
    Relabel {
        #[command(flatten)]
        class: ClassArgs,
        #[arg(long)]
        t: PathBuf,
        #[arg(long)]
        w: PathBuf,
        #[arg(long, value_parser = parse_rational)]
        eps: Rational,
    },
    /// Estimate the privacy loss of a built-in scenario.
    Audit {
        /// randomized-response, relabel, agnostic or predict
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        #[arg(long, value_parser = parse_rational, default_value = "0.5")]
        eps: Rational,
        /// Also write the per-event table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print every sample-size calculator.
    Bounds {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_parser = parse_rational)]
        eps: Rational,
        #[arg(long, default_value_t = 1.0)]
        realizable_constant: f64,
        #[arg(long, default_value_t = 1.0)]
        agnostic_constant: f64,
    },
    /// Run an experiment sweep from a JSON config and write CSV rows.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Also write the per-cell summary JSON here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn emit_json(out: &Option<PathBuf>, v: &Value) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    emit(out, s.as_bytes())
}

fn base_learner(kind: BaseLearner, class: ConceptClass, eps: Rational) -> Result<Arc<dyn Learner>> {
    Ok(match kind {
        BaseLearner::Em => Arc::new(em_private_empirical_learner(class, eps)?),
        BaseLearner::Consistent => Arc::new(ConsistentLearner::new(class)),
        BaseLearner::Erm => Arc::new(ErmLearner::new(class)),
    })
}

fn run(cli: Cli) -> Result<()> {
    let research = cli.mode == OutputMode::Research;
    let mut rng = RandomStream::from_seed(cli.seed);
    let started = Instant::now();
    match cli.command {
        Command::Learn { class, data, eps, base, base_eps } => {
            let class = class.build()?;
            let s = Dataset::load(&data)?;
            let cfg = AgnConfig::new(eps, class, base_learner(base, class, base_eps)?)?;
            let run = agnostic_learn_traced(&cfg, &s, &mut rng)?;
            let record = if research {
                json!({
                    "config": {"class": class, "eps": format_rational(&eps), "base": cfg.base.name(), "n": s.len()},
                    "seed": cli.seed,
                    "chosen_h": run.relabel.chosen,
                    "candidate_count": run.relabel.candidate_count,
                    "score": format_rational(&run.relabel.score_of_chosen),
                    "subsample": run.subsample,
                    "hypothesis": run.hypothesis,
                })
            } else {
                json!({ "hypothesis": run.hypothesis })
            };
            emit_json(&cli.out, &record)?;
        }
        Command::PredictFit { class, data, eps, alpha, beta, setting, chunk_constant, inner_eps } => {
            let class = class.build()?;
            let s = Dataset::load(&data)?;
            let state = match setting {
                Setting::Realizable => fit_realizable_predictor(&class, &s, eps, alpha)?,
                Setting::Agnostic => {
                    let cfg = AgnosticPredictorConfig { eps, alpha, beta, chunk_constant, inner_eps };
                    fit_agnostic_predictor(&class, &s, &cfg, &mut rng)?
                }
            };
            emit_json(&cli.out, &serde_json::to_value(&state)?)?;
        }
        Command::PredictQuery { state, x } => {
            let state = PredictorState::from_json_str(&read_to_string(&state)?)?;
            let label = state.predict(x, &mut rng)?;
            let mut v = json!({"x": x, "label": u8::from(label), "mode": if research { "research" } else { "private" }});
            if research {
                let (v0, v1) = state.votes(x);
                v["votes"] = json!([v0, v1]);
                v["prob_one"] = json!(state.prob_one(x));
            }
            emit_json(&cli.out, &v)?;
        }
        Command::Relabel { class, t, w, eps } => {
            if !research {
                return Err(Error::invalid("relabel exposes non-private diagnostics; rerun with --mode research"));
            }
            let class = class.build()?;
            let out = relabel(&class, &Dataset::load(&t)?, &Dataset::load(&w)?, eps, &mut rng)?;
            emit_json(&cli.out, &serde_json::to_value(&out)?)?;
        }
        Command::Audit { scenario, trials, confidence, eps, csv } => {
            let scenario: Scenario = scenario.parse()?;
            let plan = scenario.plan(eps, trials)?.with_confidence(confidence);
            let report = estimate_epsilon(&plan, &rng)?;
            if let Some(path) = csv {
                report.write_csv(fs::File::create(path)?)?;
            }
            let mut s = report.to_json_string()?;
            s.push('\n');
            emit(&cli.out, s.as_bytes())?;
        }
        Command::Bounds { d, alpha, beta, eps, realizable_constant, agnostic_constant } => {
            let acc = AccuracyParams::new(alpha, beta)?;
            let k = BoundConstants::new(realizable_constant, agnostic_constant)?;
            let sizing = transform_sizing(d, acc, &eps, k)?;
            let eps_f = to_f64(&eps);
            let r = predictor_count(alpha, eps_f)?;
            let r_inner = predictor_count(alpha, 1.0)?;
            let v = json!({
                "d": d,
                "alpha": alpha,
                "beta": beta,
                "eps": format_rational(&eps),
                "realizable_sample_bound": realizable_sample_bound(d, acc, k)?,
                "agnostic_sample_bound": agnostic_sample_bound(d, acc, k)?,
                "vc_tech_threshold": vc_tech_threshold(d, acc)?,
                "transform": sizing,
                "predictor_count": r,
                "agnostic_predictor": {
                    "r": r_inner,
                    "chunk_size": chunk_size(d, alpha, beta, r_inner, 1.0)?,
                },
            });
            emit_json(&cli.out, &v)?;
        }
        Command::Experiment { config, summary } => {
            let cfg = ExperimentConfig::from_json_str(&read_to_string(&config)?)?;
            let result = run_experiment(&cfg)?;
            let mut buf = Vec::new();
            result.write_csv(&mut buf)?;
            emit(&cli.out, &buf)?;
            if let Some(p) = summary {
                fs::write(p, result.summary_json()? + "\n")?;
            }
        }
    }
    log::info!("finished in {:.3}s", started.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NotRealizable(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}
