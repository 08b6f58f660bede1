//! Building the null calibration set and checking that it is large enough.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::conformal::CalibrationTable;
use crate::error::{Error, Result};
use crate::numerics::{harmonic_number, incomplete_beta, RngSeed};
use crate::scores::{GenerationRecord, ScoreVector};
use crate::textsim::{rouge_l_max, tokenize, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelingConfig {
    /// A generation with ROUGE-L at or below `tau` against every reference is hallucinated.
    pub tau: f64,
    /// Fraction of hallucinated generations a correct prompt may have.
    pub theta: f64,
}

impl Default for LabelingConfig {
    fn default() -> Self {
        Self { tau: 0.3, theta: 0.1 }
    }
}

impl LabelingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if !(self.theta >= 0.0 && self.theta < 1.0) {
            return Err(Error::Config(format!("theta must lie in [0, 1), got {}", self.theta)));
        }
        Ok(())
    }

    /// Most hallucinated generations a prompt with `m` generations may have.
    pub fn allowed_failures(&self, m: usize) -> usize {
        (self.theta * m as f64 + 1e-9).floor() as usize
    }
}

/// Split of prompts into non-hallucinating (`correct_ids`) and hallucinating ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelOutcome {
    pub correct_ids: Vec<String>,
    pub incorrect_ids: Vec<String>,
    pub per_prompt_counts: BTreeMap<String, usize>,
}

impl LabelOutcome {
    pub fn is_correct(&self, id: &str) -> Option<bool> {
        if self.correct_ids.iter().any(|c| c == id) {
            Some(true)
        } else if self.incorrect_ids.iter().any(|c| c == id) {
            Some(false)
        } else {
            None
        }
    }
}

/// Number of generations whose best ROUGE-L against the references is `<= tau`.
pub fn hallucinated_count(record: &GenerationRecord, tau: f64) -> Result<usize> {
    let refs = match &record.references {
        Some(r) if !r.is_empty() => r,
        _ => {
            return Err(Error::Labeling {
                id: record.id.clone(),
                reason: "no reference answers".into(),
            })
        }
    };
    let refs: Vec<TokenSequence> = refs.iter().map(|r| tokenize(r)).collect();
    Ok(record
        .generations
        .iter()
        .filter(|g| rouge_l_max(&tokenize(g), &refs) <= tau)
        .count())
}

pub fn label_dataset(records: &[GenerationRecord], config: &LabelingConfig) -> Result<LabelOutcome> {
    config.validate()?;
    let mut outcome = LabelOutcome {
        correct_ids: Vec::new(),
        incorrect_ids: Vec::new(),
        per_prompt_counts: BTreeMap::new(),
    };
    for record in records {
        if record.generations.is_empty() {
            return Err(Error::Labeling {
                id: record.id.clone(),
                reason: "no generations".into(),
            });
        }
        let count = hallucinated_count(record, config.tau)?;
        if count <= config.allowed_failures(record.m()) {
            outcome.correct_ids.push(record.id.clone());
        } else {
            outcome.incorrect_ids.push(record.id.clone());
        }
        outcome.per_prompt_counts.insert(record.id.clone(), count);
    }
    Ok(outcome)
}

/// Draws `n` correct prompts uniformly without replacement into a calibration
/// table; the remaining correct prompts are returned as the null holdout.
pub fn sample_calibration(
    outcome: &LabelOutcome,
    scored: &[ScoreVector],
    n: usize,
    seed: RngSeed,
) -> Result<(CalibrationTable, Vec<String>)> {
    let available = outcome.correct_ids.len();
    if n == 0 {
        return Err(Error::Config("calibration size must be >= 1".into()));
    }
    if n > available {
        return Err(Error::InsufficientNulls {
            requested: n,
            available,
        });
    }
    let by_id: HashMap<&str, &ScoreVector> = scored.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut ids: Vec<&String> = outcome.correct_ids.iter().collect();
    let mut rng = seed.rng();
    ids.shuffle(&mut rng);
    let (chosen, rest) = ids.split_at(n);
    let vectors = chosen
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Validation(format!("no score vector for calibration prompt `{id}`")))
        })
        .collect::<Result<Vec<&ScoreVector>>>()?;
    let table = CalibrationTable::from_score_vectors(vectors)?;
    Ok((table, rest.iter().map(|s| s.to_string()).collect()))
}

/// Parameters of the calibration-size sufficiency condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSizeSpec {
    pub alpha: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
}

/// One rank's term of the condition at a given calibration size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeTerm {
    pub j: usize,
    pub a: u64,
    pub b: u64,
    pub mu: f64,
    /// `(1 + epsilon) * mu`, the Beta CDF evaluation point.
    pub x: f64,
    /// `I_x(a, b)`, absent when `a = 0`.
    pub cdf: Option<f64>,
    pub passes: bool,
}

impl CalibrationSizeSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("epsilon", self.epsilon), ("delta", self.delta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.k == 0 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        Ok(())
    }

    /// Each term must reach `1 - delta / K^2`.
    pub fn required_level(&self) -> f64 {
        1.0 - self.delta / (self.k * self.k) as f64
    }

    /// The per-rank terms `a_j`, `b_j`, `mu_j` and `I_{(1+eps) mu_j}(a_j, b_j)` at size `n`.
    pub fn terms(&self, n: usize) -> Result<Vec<SizeTerm>> {
        self.validate()?;
        let h = harmonic_number(self.k)?;
        let level = self.required_level();
        let total = n as u64 + 1;
        (1..=self.k)
            .map(|j| {
                let raw = total as f64 * self.alpha / ((1.0 + self.epsilon) * h) * j as f64 / self.k as f64;
                let a = raw.floor() as u64;
                let b = total - a;
                let mu = a as f64 / total as f64;
                let x = ((1.0 + self.epsilon) * mu).min(1.0);
                let cdf = if a == 0 { None } else { Some(incomplete_beta(x, a, b)?) };
                let passes = cdf.is_some_and(|v| v >= level);
                Ok(SizeTerm {
                    j,
                    a,
                    b,
                    mu,
                    x,
                    cdf,
                    passes,
                })
            })
            .collect()
    }
}

/// Whether `n` calibration prompts satisfy `min_j I_{(1+eps) mu_j}(a_j, b_j) >= 1 - delta/K^2`.
pub fn size_condition_holds(n: usize, spec: &CalibrationSizeSpec) -> Result<bool> {
    Ok(spec.terms(n)?.iter().all(|t| t.passes))
}

/// Faster form of [`size_condition_holds`] that stops at the first failing rank.
fn condition_short_circuit(n: usize, spec: &CalibrationSizeSpec, h: f64, level: f64) -> bool {
    let total = n as u64 + 1;
    (1..=spec.k).all(|j| {
        let a = (total as f64 * spec.alpha / ((1.0 + spec.epsilon) * h) * j as f64 / spec.k as f64).floor() as u64;
        if a == 0 {
            return false;
        }
        let x = ((1.0 + spec.epsilon) * a as f64 / total as f64).min(1.0);
        incomplete_beta(x, a, total - a).is_ok_and(|v| v >= level)
    })
}

/// Search strategy for [`min_calibration_size`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanStrategy {
    /// Test every `n` from 1; returns the globally smallest passing size.
    Linear,
    /// Test every `stride`-th size, then scan the window before the first hit.
    /// The result passes and its predecessor fails, but an isolated passing
    /// size between earlier stride points can be missed.
    Strided { stride: usize },
}

impl Default for ScanStrategy {
    fn default() -> Self {
        ScanStrategy::Strided { stride: 64 }
    }
}

/// Smallest calibration size up to `n_max` passing the condition.
///
/// The condition is not monotone in `n` (`a_j` is a floor), so the returned
/// value is always re-verified with [`size_condition_holds`].
pub fn min_calibration_size(
    spec: &CalibrationSizeSpec,
    n_max: usize,
    strategy: ScanStrategy,
) -> Result<Option<usize>> {
    spec.validate()?;
    if n_max == 0 {
        return Err(Error::Config("n_max must be >= 1".into()));
    }
    let h = harmonic_number(spec.k)?;
    let level = spec.required_level();
    let check = |n: usize| condition_short_circuit(n, spec, h, level);

    let found = match strategy {
        ScanStrategy::Linear => (1..=n_max).find(|&n| check(n)),
        ScanStrategy::Strided { stride } => {
            if stride == 0 {
                return Err(Error::Config("scan stride must be >= 1".into()));
            }
            let mut prev = 0usize;
            let mut hit = None;
            let mut n = stride.min(n_max);
            loop {
                if check(n) {
                    hit = Some(n);
                    break;
                }
                if n == n_max {
                    break;
                }
                prev = n;
                n = (n + stride).min(n_max);
            }
            hit.map(|hit| ((prev + 1)..=hit).find(|&m| check(m)).unwrap_or(hit))
        }
    };
    match found {
        Some(n) if size_condition_holds(n, spec)? => Ok(Some(n)),
        Some(n) => Err(Error::Domain(format!(
            "calibration size {n} failed re-verification"
        ))),
        None => Ok(None),
    }
}
