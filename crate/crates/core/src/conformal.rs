//! Conformal p-values and the harmonic-corrected BH global-null detector.
//!
//! A prompt is flagged when some sorted p-value `q_(j)` falls at or below
//! `c * j / K`. With the theoretical coefficient `c = alpha / ((1 + eps) H_K)`
//! the false alarm rate stays below `alpha` once the calibration set is large
//! enough (see [`crate::calibration::CalibrationSizeSpec`]).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::harmonic_number;
use crate::scores::ScoreVector;

/// Sorted null scores per score name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationTable {
    score_names: Vec<String>,
    sorted_scores: Vec<Vec<f64>>,
    n_cal: usize,
}

impl CalibrationTable {
    /// Builds the table from calibration score vectors; every vector must
    /// carry the same score names.
    pub fn from_score_vectors<'a>(vectors: impl IntoIterator<Item = &'a ScoreVector>) -> Result<Self> {
        let mut iter = vectors.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::Validation("calibration table needs at least one score vector".into()))?;
        first.validate()?;
        let score_names: Vec<String> = first.scores.keys().cloned().collect();
        let mut columns: Vec<Vec<f64>> = score_names.iter().map(|n| vec![first.scores[n]]).collect();
        for sv in iter {
            sv.validate()?;
            if sv.scores.len() != score_names.len() {
                return Err(Error::Validation(format!(
                    "calibration vector `{}` has {} scores, expected {}",
                    sv.id,
                    sv.scores.len(),
                    score_names.len()
                )));
            }
            for (col, name) in columns.iter_mut().zip(&score_names) {
                col.push(sv.get(name)?);
            }
        }
        Self::from_columns(score_names, columns)
    }

    pub fn from_columns(score_names: Vec<String>, mut columns: Vec<Vec<f64>>) -> Result<Self> {
        if score_names.is_empty() || score_names.len() != columns.len() {
            return Err(Error::Validation(format!(
                "calibration table has {} names but {} score columns",
                score_names.len(),
                columns.len()
            )));
        }
        let n_cal = columns[0].len();
        if n_cal == 0 {
            return Err(Error::Validation("calibration table needs n_cal >= 1".into()));
        }
        for (name, col) in score_names.iter().zip(&mut columns) {
            if col.len() != n_cal {
                return Err(Error::Validation(format!(
                    "calibration column `{name}` has {} values, expected {n_cal}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("calibration column `{name}` has non-finite values")));
            }
            col.sort_by(f64::total_cmp);
        }
        Ok(Self {
            score_names,
            sorted_scores: columns,
            n_cal,
        })
    }

    /// Re-checks invariants, e.g. after deserializing a table file.
    pub fn validate(self) -> Result<Self> {
        let claimed = self.n_cal;
        let unsorted = self
            .score_names
            .iter()
            .zip(&self.sorted_scores)
            .find(|(_, col)| col.windows(2).any(|w| w[0] > w[1]));
        if let Some((name, _)) = unsorted {
            return Err(Error::Validation(format!("calibration column `{name}` is not sorted")));
        }
        let mut names = self.score_names.clone();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Validation("calibration table repeats a score name".into()));
        }
        let table = Self::from_columns(self.score_names, self.sorted_scores)?;
        if table.n_cal != claimed {
            return Err(Error::Validation(format!(
                "calibration table declares n_cal = {claimed} but holds {} values per score",
                table.n_cal
            )));
        }
        Ok(table)
    }

    pub fn score_names(&self) -> &[String] {
        &self.score_names
    }

    pub fn n_cal(&self) -> usize {
        self.n_cal
    }

    pub fn k(&self) -> usize {
        self.score_names.len()
    }

    pub fn sorted_scores(&self, name: &str) -> Result<&[f64]> {
        self.score_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.sorted_scores[i].as_slice())
            .ok_or_else(|| Error::UnknownScore(name.to_string()))
    }

    /// `(1 + #{s_i >= t}) / (1 + n_cal)`.
    pub fn conformal_p(&self, score_name: &str, t: f64) -> Result<f64> {
        let sorted = self.sorted_scores(score_name)?;
        let below = sorted.partition_point(|&s| s < t);
        let at_or_above = sorted.len() - below;
        Ok((1 + at_or_above) as f64 / (1 + self.n_cal) as f64)
    }

    /// Conformal p-values for every score in the table.
    pub fn p_values(&self, scores: &ScoreVector) -> Result<PValueVector> {
        let mut q = BTreeMap::new();
        for name in &self.score_names {
            q.insert(name.clone(), self.conformal_p(name, scores.get(name)?)?);
        }
        Ok(PValueVector {
            id: scores.id.clone(),
            q,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueVector {
    pub id: String,
    pub q: BTreeMap<String, f64>,
}

impl PValueVector {
    /// `(name, q)` pairs sorted by q, ties broken by name.
    pub fn sorted(&self) -> Vec<(&str, f64)> {
        // BTreeMap iteration is already name-ordered, so a stable sort keeps the tie rule.
        let mut v: Vec<(&str, f64)> = self.q.iter().map(|(n, &q)| (n.as_str(), q)).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1));
        v
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientMode {
    /// `alpha / ((1 + epsilon) * H_K)`.
    Theoretical,
    /// A fixed coefficient, typically from [`tune_coefficient`].
    Empirical { coefficient: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Target false alarm rate.
    pub alpha: f64,
    pub epsilon: f64,
    /// Number of combined scores; 0 means "take it from the calibration table".
    pub k: usize,
    pub coefficient: CoefficientMode,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.1,
            k: 0,
            coefficient: CoefficientMode::Theoretical,
        }
    }
}

impl DetectorConfig {
    pub fn theoretical(alpha: f64, epsilon: f64, k: usize) -> Self {
        Self {
            alpha,
            epsilon,
            k,
            coefficient: CoefficientMode::Theoretical,
        }
    }

    pub fn empirical(alpha: f64, k: usize, coefficient: f64) -> Self {
        Self {
            alpha,
            epsilon: 0.0,
            k,
            coefficient: CoefficientMode::Empirical { coefficient },
        }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if self.k == 0 {
            return Err(Error::Config("detector K must be >= 1".into()));
        }
        if let CoefficientMode::Empirical { coefficient } = self.coefficient {
            if !(coefficient > 0.0 && coefficient.is_finite()) {
                return Err(Error::Config(format!("empirical coefficient must be > 0, got {coefficient}")));
            }
        }
        Ok(())
    }

    pub fn coefficient(&self) -> Result<f64> {
        self.validate()?;
        match self.coefficient {
            CoefficientMode::Theoretical => {
                Ok(self.alpha / ((1.0 + self.epsilon) * harmonic_number(self.k)?))
            }
            CoefficientMode::Empirical { coefficient } => Ok(coefficient),
        }
    }

    /// The ranked thresholds `c * j / K` for `j = 1..=K`.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        let c = self.coefficient()?;
        Ok((1..=self.k).map(|j| c * j as f64 / self.k as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub id: String,
    pub hallucination: bool,
    pub triggering_rank: Option<usize>,
    pub combined_stat: f64,
}

/// `K * q_(j) / j` for each rank, the coefficient at which rank `j` starts to fire.
fn rank_ratios<'a>(sorted: &'a [(&str, f64)]) -> impl Iterator<Item = f64> + 'a {
    let k = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(move |(i, &(_, q))| k * q / (i + 1) as f64)
}

/// Global-null test of one prompt.
///
/// The comparison `q_(j) <= c j / K` is evaluated as `K q_(j) / j <= c` so that
/// the decision at `c` agrees exactly with `combined_statistic >= -c`.
pub fn detect(pvec: &PValueVector, config: &DetectorConfig) -> Result<Decision> {
    if pvec.k() != config.k {
        return Err(Error::Validation(format!(
            "p-value vector `{}` has {} entries but the detector expects K = {}",
            pvec.id,
            pvec.k(),
            config.k
        )));
    }
    let c = config.coefficient()?;
    let sorted = pvec.sorted();
    let triggering_rank = rank_ratios(&sorted).position(|r| r <= c).map(|i| i + 1);
    Ok(Decision {
        id: pvec.id.clone(),
        hallucination: triggering_rank.is_some(),
        triggering_rank,
        combined_stat: combined_statistic(pvec)?,
    })
}

/// `-min_j K q_(j) / j`: larger means more hallucination-like.
pub fn combined_statistic(pvec: &PValueVector) -> Result<f64> {
    if pvec.q.is_empty() {
        return Err(Error::Validation(format!("p-value vector `{}` is empty", pvec.id)));
    }
    let sorted = pvec.sorted();
    Ok(-rank_ratios(&sorted).fold(f64::INFINITY, f64::min))
}

/// Largest coefficient whose flag rate on the held-out nulls is at most `alpha`.
///
/// A null is flagged at `c` iff its minimal rank ratio is `<= c`. With `k`
/// nulls allowed (`floor(alpha * n)`), the answer sits one ulp below the
/// `(k+1)`-th smallest ratio.
pub fn tune_coefficient(null_pvecs: &[PValueVector], alpha: f64) -> Result<f64> {
    if null_pvecs.is_empty() {
        return Err(Error::Config("coefficient tuning needs a non-empty null set".into()));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let mut ratios: Vec<f64> = null_pvecs
        .iter()
        .map(|p| combined_statistic(p).map(|s| -s))
        .collect::<Result<_>>()?;
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    let allowed = ((alpha * n as f64) + 1e-9).floor() as usize;
    if allowed >= n {
        return Ok(ratios[n - 1]);
    }
    Ok(ratios[allowed].next_down())
}
