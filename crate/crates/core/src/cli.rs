//! Command-line front end.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibration::{label_dataset, min_calibration_size, sample_calibration, LabelOutcome, ScanStrategy, SizeTerm};
use crate::conformal::{detect, CalibrationTable, CoefficientMode, Decision};
use crate::error::{Error, Result};
use crate::eval::{render_table, run_experiment, synth_scores, ExperimentData, SyntheticSpec};
use crate::io::{read_dataset, read_json, read_jsonl, with_output, write_json, write_jsonl, CalsizeConfig, RunConfig, CONFIG_ENV};
use crate::numerics::RngSeed;
use crate::scores::{score_record, ScoreVector};

#[derive(Debug, Parser)]
#[command(name = "halludetect", version, about = "Flag prompts likely to make an LLM hallucinate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON). Defaults to $HALLUDETECT_CONFIG when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every stochastic step; overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Label prompts as hallucinating or not from ROUGE-L against references.
    Label {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Compute the uncertainty scores of every prompt.
    Score {
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sample a calibration table from labeled, scored prompts.
    Calibrate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        n_cal: Option<usize>,
        /// Where to write the ids of correct prompts left out of the table.
        #[arg(long)]
        holdout: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the global-null test on scored prompts.
    Detect {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Use this coefficient instead of the theoretical one.
        #[arg(long)]
        coefficient: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Smallest calibration size meeting the false-alarm guarantee.
    Calsize {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        n_max: Option<usize>,
        /// Check every size instead of striding.
        #[arg(long)]
        linear: bool,
        /// Only evaluate the condition at this size.
        #[arg(long)]
        at: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated randomized-calibration evaluation.
    Evaluate {
        #[arg(long, conflicts_with_all = ["synthetic", "scores"])]
        dataset: Option<PathBuf>,
        #[arg(long, conflicts_with = "scores")]
        synthetic: Option<PathBuf>,
        #[arg(long, requires = "labels")]
        scores: Option<PathBuf>,
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        n_cal: Option<usize>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        /// Also write the plain-text table here.
        #[arg(long)]
        table: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Draw synthetic score vectors from a parametric spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        /// Also write null/alternative labels here.
        #[arg(long)]
        labels_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Label { common, .. }
            | Command::Score { common, .. }
            | Command::Calibrate { common, .. }
            | Command::Detect { common, .. }
            | Command::Calsize { common, .. }
            | Command::Evaluate { common, .. }
            | Command::Synth { common, .. } => common,
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let path = common
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut cfg = match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// One line of `detect` output.
#[derive(Debug, Serialize, Deserialize)]
pub struct DecisionLine {
    #[serde(flatten)]
    pub decision: Decision,
    pub q: std::collections::BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
struct CalsizeReport {
    alpha: f64,
    epsilon: f64,
    delta: f64,
    k: usize,
    required_level: f64,
    n_max: usize,
    strategy: ScanStrategy,
    min_n: Option<usize>,
    evaluated_at: usize,
    holds: bool,
    terms: Vec<SizeTerm>,
}

fn execute(command: Command) -> Result<()> {
    let mut cfg = load_config(command.common())?;
    let out = command.common().out.clone();
    let out = out.as_deref();
    match command {
        Command::Label { dataset, tau, theta, .. } => {
            if let Some(t) = tau {
                cfg.labeling.tau = t;
            }
            if let Some(t) = theta {
                cfg.labeling.theta = t;
            }
            let records = read_dataset(&dataset)?;
            let outcome = label_dataset(&records, &cfg.labeling)?;
            with_output(out, |w| write_json(w, &outcome))
        }
        Command::Score { dataset, .. } => {
            let records = read_dataset(&dataset)?;
            let scoring = cfg.score_config();
            let vectors = records
                .iter()
                .map(|r| score_record(r, &scoring))
                .collect::<Result<Vec<_>>>()?;
            with_output(out, |w| write_jsonl(w, &vectors))
        }
        Command::Calibrate {
            scores,
            labels,
            n_cal,
            holdout,
            ..
        } => {
            let vectors: Vec<ScoreVector> = read_jsonl(&scores)?;
            let outcome: LabelOutcome = read_json(&labels)?;
            let n = n_cal.unwrap_or(cfg.evaluation.n_cal);
            let (table, rest) = sample_calibration(&outcome, &vectors, n, cfg.seed())?;
            if let Some(path) = holdout {
                with_output(Some(&path), |w| write_json(w, &rest))?;
            }
            with_output(out, |w| write_json(w, &table))
        }
        Command::Detect {
            scores,
            calibration,
            alpha,
            epsilon,
            coefficient,
            ..
        } => {
            let table: CalibrationTable = read_json::<CalibrationTable>(&calibration)?.validate()?;
            let vectors: Vec<ScoreVector> = read_jsonl(&scores)?;
            let mut detector = cfg.detector;
            if let Some(a) = alpha {
                detector.alpha = a;
            }
            if let Some(e) = epsilon {
                detector.epsilon = e;
            }
            if let Some(c) = coefficient {
                detector.coefficient = CoefficientMode::Empirical { coefficient: c };
            }
            if detector.k != 0 && detector.k != table.k() {
                return Err(Error::Config(format!(
                    "detector K = {} but the calibration table has {} scores",
                    detector.k,
                    table.k()
                )));
            }
            let detector = detector.with_k(table.k());
            detector.validate()?;
            let lines = vectors
                .iter()
                .map(|sv| {
                    let p = table.p_values(sv)?;
                    Ok(DecisionLine {
                        decision: detect(&p, &detector)?,
                        q: p.q,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            with_output(out, |w| write_jsonl(w, &lines))
        }
        Command::Calsize {
            alpha,
            epsilon,
            delta,
            k,
            n_max,
            linear,
            at,
            ..
        } => {
            let mut c: CalsizeConfig = cfg.calsize;
            c.alpha = alpha.unwrap_or(c.alpha);
            c.epsilon = epsilon.unwrap_or(c.epsilon);
            c.delta = delta.unwrap_or(c.delta);
            c.k = k.unwrap_or(c.k);
            c.n_max = n_max.unwrap_or(c.n_max);
            if linear {
                c.strategy = ScanStrategy::Linear;
            }
            let spec = c.spec();
            spec.validate()?;
            let min_n = match at {
                Some(_) => None,
                None => min_calibration_size(&spec, c.n_max, c.strategy)?,
            };
            let evaluated_at = at.or(min_n).unwrap_or(c.n_max);
            let terms = spec.terms(evaluated_at)?;
            let report = CalsizeReport {
                alpha: c.alpha,
                epsilon: c.epsilon,
                delta: c.delta,
                k: c.k,
                required_level: spec.required_level(),
                n_max: c.n_max,
                strategy: c.strategy,
                min_n,
                evaluated_at,
                holds: terms.iter().all(|t| t.passes),
                terms,
            };
            print_calsize(&report, at.is_some())?;
            match out {
                Some(p) => with_output(Some(p), |w| write_json(w, &report)),
                None => Ok(()),
            }
        }
        Command::Evaluate {
            dataset,
            synthetic,
            scores,
            labels,
            n_cal,
            repeats,
            alpha,
            table,
            ..
        } => {
            let mut eval = cfg.evaluation;
            eval.n_cal = n_cal.unwrap_or(eval.n_cal);
            eval.repeats = repeats.unwrap_or(eval.repeats);
            eval.alpha = alpha.unwrap_or(eval.alpha);
            let (label, data) = if let Some(path) = dataset {
                let records = read_dataset(&path)?;
                let data = ExperimentData::from_records(&records, &cfg.score_config(), &cfg.labeling)?;
                (file_label(&path), data)
            } else if let Some(path) = synthetic {
                let spec: SyntheticSpec = read_json(&path)?;
                (file_label(&path), synth_scores(&spec)?.into())
            } else if let (Some(s), Some(l)) = (scores, labels) {
                let vectors: Vec<ScoreVector> = read_jsonl(&s)?;
                let outcome: LabelOutcome = read_json(&l)?;
                (file_label(&s), split_by_labels(vectors, &outcome)?)
            } else {
                return Err(Error::Config(
                    "evaluate needs --dataset, --synthetic, or --scores with --labels".into(),
                ));
            };
            let report = run_experiment(&data, &eval, cfg.seed())?;
            let text = render_table(&[(label.as_str(), &report)]);
            eprint!("{text}");
            if let Some(p) = table {
                with_output(Some(&p), |w| {
                    w.write_all(text.as_bytes()).map_err(|e| Error::io(&p, e))
                })?;
            }
            with_output(out, |w| write_json(w, &report))
        }
        Command::Synth { spec, labels_out, common } => {
            let mut spec: SyntheticSpec = read_json(&spec)?;
            if let Some(seed) = common.seed {
                spec.seed = RngSeed(seed);
            }
            let sample = synth_scores(&spec)?;
            if let Some(path) = labels_out {
                let outcome = LabelOutcome {
                    correct_ids: sample.nulls.iter().map(|s| s.id.clone()).collect(),
                    incorrect_ids: sample.alts.iter().map(|s| s.id.clone()).collect(),
                    per_prompt_counts: Default::default(),
                };
                with_output(Some(&path), |w| write_json(w, &outcome))?;
            }
            let all: Vec<&ScoreVector> = sample.nulls.iter().chain(&sample.alts).collect();
            with_output(out, |w| write_jsonl(w, &all))
        }
    }
}

fn file_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into())
}

fn split_by_labels(vectors: Vec<ScoreVector>, outcome: &LabelOutcome) -> Result<ExperimentData> {
    let correct: HashSet<&str> = outcome.correct_ids.iter().map(String::as_str).collect();
    let incorrect: HashSet<&str> = outcome.incorrect_ids.iter().map(String::as_str).collect();
    let mut data = ExperimentData {
        nulls: Vec::new(),
        alts: Vec::new(),
    };
    for sv in vectors {
        if correct.contains(sv.id.as_str()) {
            data.nulls.push(sv);
        } else if incorrect.contains(sv.id.as_str()) {
            data.alts.push(sv);
        } else {
            return Err(Error::Validation(format!("score vector `{}` has no label", sv.id)));
        }
    }
    Ok(data)
}

fn print_calsize(report: &CalsizeReport, only_at: bool) -> Result<()> {
    let mut text = String::new();
    if only_at {
        let _ = writeln!(text, "{}", report.holds);
    } else {
        match report.min_n {
            Some(n) => {
                let _ = writeln!(text, "{n}");
            }
            None => {
                let _ = writeln!(text, "none");
            }
        }
    }
    let _ = writeln!(
        text,
        "# n = {}, required I >= {:.6}",
        report.evaluated_at, report.required_level
    );
    let _ = writeln!(text, "{:>3} {:>10} {:>10} {:>12} {:>12} {:>14} {:>5}", "j", "a_j", "b_j", "mu_j", "x_j", "I_x(a,b)", "ok");
    for t in &report.terms {
        let cdf = t.cdf.map(|v| format!("{v:.10}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            text,
            "{:>3} {:>10} {:>10} {:>12.8} {:>12.8} {:>14} {:>5}",
            t.j, t.a, t.b, t.mu, t.x, cdf, t.passes
        );
    }
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    lock.write_all(text.as_bytes())
        .map_err(|e| Error::io("<stdout>", e))
}
