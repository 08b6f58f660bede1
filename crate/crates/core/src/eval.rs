//! Evaluation harness: detection power at a fixed false alarm rate, AUROC,
//! and repeated experiments over randomized calibration sets.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calibration::{label_dataset, LabelingConfig};
use crate::conformal::{
    combined_statistic, detect, tune_coefficient, CalibrationTable, DetectorConfig, PValueVector,
};
use crate::error::{Error, Result};
use crate::numerics::{DetRng, RngSeed};
use crate::scores::{score_record, GenerationRecord, ScoreConfig, ScoreVector};

/// Mann-Whitney AUROC: share of (null, alt) pairs with `alt > null`, ties half.
pub fn auroc(null_stats: &[f64], alt_stats: &[f64]) -> Result<f64> {
    if null_stats.is_empty() || alt_stats.is_empty() {
        return Err(Error::Domain("AUROC needs non-empty null and alternative lists".into()));
    }
    if null_stats.iter().chain(alt_stats).any(|v| v.is_nan()) {
        return Err(Error::Domain("AUROC inputs must not be NaN".into()));
    }
    let mut nulls = null_stats.to_vec();
    nulls.sort_by(f64::total_cmp);
    // Twice the Mann-Whitney U, kept integral until the final division.
    let mut doubled: u128 = 0;
    for &a in alt_stats {
        let below = nulls.partition_point(|&v| v < a);
        let at_or_below = nulls.partition_point(|&v| v <= a);
        doubled += 2 * below as u128 + (at_or_below - below) as u128;
    }
    let pairs = 2 * null_stats.len() as u128 * alt_stats.len() as u128;
    Ok(doubled as f64 / pairs as f64)
}

/// Detection power of the rule `stat >= threshold` at false alarm rate `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerAtFar {
    pub power: f64,
    pub threshold: f64,
    /// Realized false alarm rate on the null list.
    pub far: f64,
}

/// The threshold is the smallest value flagging at most `floor(alpha * n)` nulls.
pub fn power_at_far(null_stats: &[f64], alt_stats: &[f64], alpha: f64) -> Result<PowerAtFar> {
    if null_stats.is_empty() || alt_stats.is_empty() {
        return Err(Error::Domain("power_at_far needs non-empty null and alternative lists".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut desc = null_stats.to_vec();
    desc.sort_by(|a, b| b.total_cmp(a));
    let allowed = (alpha * desc.len() as f64 + 1e-9).floor() as usize;
    let threshold = desc[allowed.min(desc.len() - 1)].next_up();
    let flagged = |xs: &[f64]| xs.iter().filter(|&&v| v >= threshold).count() as f64 / xs.len() as f64;
    Ok(PowerAtFar {
        power: flagged(alt_stats),
        threshold,
        far: flagged(null_stats),
    })
}

/// A per-score marginal law, applied to a standard-normal driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Marginal {
    Normal { mean: f64, sd: f64 },
    LogNormal { mu: f64, sigma: f64 },
    /// Mixture of normals; the component is drawn independently of the driver.
    Mixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

impl Marginal {
    pub fn standard() -> Self {
        Marginal::Normal { mean: 0.0, sd: 1.0 }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Marginal::Normal { mean, sd } => mean.is_finite() && sd.is_finite() && *sd >= 0.0,
            Marginal::LogNormal { mu, sigma } => mu.is_finite() && sigma.is_finite() && *sigma >= 0.0,
            Marginal::Mixture { components } => {
                !components.is_empty()
                    && components.iter().all(|c| {
                        c.weight >= 0.0 && c.weight.is_finite() && c.mean.is_finite() && c.sd.is_finite() && c.sd >= 0.0
                    })
                    && components.iter().map(|c| c.weight).sum::<f64>() > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("invalid marginal {self:?}")))
        }
    }

    fn transform(&self, driver: f64, rng: &mut DetRng) -> f64 {
        match self {
            Marginal::Normal { mean, sd } => mean + sd * driver,
            Marginal::LogNormal { mu, sigma } => (mu + sigma * driver).exp(),
            Marginal::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut u = rng.random::<f64>() * total;
                let mut chosen = &components[components.len() - 1];
                for c in components {
                    if u < c.weight {
                        chosen = c;
                        break;
                    }
                    u -= c.weight;
                }
                chosen.mean + chosen.sd * driver
            }
        }
    }
}

/// One kind of hallucinating prompt in a synthetic world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regime {
    pub weight: f64,
    pub marginals: Vec<Marginal>,
}

/// Parametric score world with a shared latent factor.
///
/// Each draw uses drivers `sqrt(rho) z + sqrt(1 - rho) e_j` with `z`, `e_j`
/// independent standard normals, so `dependence = rho` is the pairwise
/// correlation of the drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub score_names: Vec<String>,
    pub dependence: f64,
    pub null: Vec<Marginal>,
    pub alternatives: Vec<Regime>,
    pub n_null: usize,
    pub n_alt: usize,
    pub seed: RngSeed,
}

impl SyntheticSpec {
    /// Independent standard-normal nulls, and no alternatives.
    pub fn null_only(k: usize, dependence: f64, n_null: usize, seed: RngSeed) -> Self {
        Self {
            score_names: (1..=k).map(|j| format!("s{j}")).collect(),
            dependence,
            null: vec![Marginal::standard(); k],
            alternatives: Vec::new(),
            n_null,
            n_alt: 0,
            seed,
        }
    }

    pub fn k(&self) -> usize {
        self.score_names.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 {
            return Err(Error::Validation("synthetic spec needs at least one score".into()));
        }
        if !(0.0..=1.0).contains(&self.dependence) {
            return Err(Error::Validation(format!(
                "dependence must lie in [0, 1], got {}",
                self.dependence
            )));
        }
        if self.null.len() != k {
            return Err(Error::Validation(format!("{} null marginals for {k} scores", self.null.len())));
        }
        self.null.iter().try_for_each(Marginal::validate)?;
        for (i, regime) in self.alternatives.iter().enumerate() {
            if regime.marginals.len() != k {
                return Err(Error::Validation(format!(
                    "alternative regime {i} has {} marginals for {k} scores",
                    regime.marginals.len()
                )));
            }
            if !(regime.weight >= 0.0 && regime.weight.is_finite()) {
                return Err(Error::Validation(format!("regime {i} weight must be >= 0")));
            }
            regime.marginals.iter().try_for_each(Marginal::validate)?;
        }
        if self.n_alt > 0 && self.alternatives.iter().map(|r| r.weight).sum::<f64>() <= 0.0 {
            return Err(Error::Validation("n_alt > 0 needs an alternative regime with positive weight".into()));
        }
        Ok(())
    }

    /// Alternatives per regime by largest-remainder apportionment of `n_alt`.
    pub fn regime_counts(&self) -> Vec<usize> {
        let total: f64 = self.alternatives.iter().map(|r| r.weight).sum();
        if self.alternatives.is_empty() || total <= 0.0 {
            return vec![0; self.alternatives.len()];
        }
        let exact: Vec<f64> = self
            .alternatives
            .iter()
            .map(|r| r.weight / total * self.n_alt as f64)
            .collect();
        let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
        let mut rest = self.n_alt - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..exact.len()).collect();
        order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
        for &i in order.iter().cycle() {
            if rest == 0 {
                break;
            }
            counts[i] += 1;
            rest -= 1;
        }
        counts
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub nulls: Vec<ScoreVector>,
    pub alts: Vec<ScoreVector>,
    /// Regime index of each alternative.
    pub alt_regimes: Vec<usize>,
}

fn draw(spec: &SyntheticSpec, marginals: &[Marginal], id: String, rng: &mut DetRng) -> ScoreVector {
    let rho = spec.dependence;
    let shared: f64 = StandardNormal.sample(rng);
    let scores = spec
        .score_names
        .iter()
        .zip(marginals)
        .map(|(name, marginal)| {
            let own: f64 = StandardNormal.sample(rng);
            let driver = rho.sqrt() * shared + (1.0 - rho).sqrt() * own;
            (name.clone(), marginal.transform(driver, rng))
        })
        .collect();
    ScoreVector { id, scores }
}

/// Seeded i.i.d. draws from the null and (pooled) alternative laws.
pub fn synth_scores(spec: &SyntheticSpec) -> Result<SyntheticSample> {
    spec.validate()?;
    let mut rng = spec.seed.rng();
    let nulls = (0..spec.n_null)
        .map(|i| draw(spec, &spec.null, format!("null-{i:06}"), &mut rng))
        .collect();
    let mut alts = Vec::with_capacity(spec.n_alt);
    let mut alt_regimes = Vec::with_capacity(spec.n_alt);
    for (r, count) in spec.regime_counts().into_iter().enumerate() {
        for _ in 0..count {
            let id = format!("alt-{:06}", alts.len());
            alts.push(draw(spec, &spec.alternatives[r].marginals, id, &mut rng));
            alt_regimes.push(r);
        }
    }
    Ok(SyntheticSample {
        nulls,
        alts,
        alt_regimes,
    })
}

/// Score vectors split into null (non-hallucinating) and alternative prompts.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub nulls: Vec<ScoreVector>,
    pub alts: Vec<ScoreVector>,
}

impl From<SyntheticSample> for ExperimentData {
    fn from(s: SyntheticSample) -> Self {
        Self {
            nulls: s.nulls,
            alts: s.alts,
        }
    }
}

impl ExperimentData {
    /// Labels and scores a dataset of generation records.
    pub fn from_records(
        records: &[GenerationRecord],
        scoring: &ScoreConfig,
        labeling: &LabelingConfig,
    ) -> Result<Self> {
        let outcome = label_dataset(records, labeling)?;
        let mut nulls = Vec::new();
        let mut alts = Vec::new();
        for record in records {
            let sv = score_record(record, scoring)?;
            match outcome.is_correct(&record.id) {
                Some(true) => nulls.push(sv),
                _ => alts.push(sv),
            }
        }
        Ok(Self { nulls, alts })
    }

    fn score_names(&self) -> Result<Vec<String>> {
        self.nulls
            .first()
            .map(|sv| sv.scores.keys().cloned().collect())
            .ok_or_else(|| Error::InsufficientNulls {
                requested: 1,
                available: 0,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Target false alarm rate.
    pub alpha: f64,
    /// Slack for the theoretical coefficient.
    pub epsilon: f64,
    pub n_cal: usize,
    pub repeats: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            epsilon: 0.1,
            n_cal: 1000,
            repeats: 10,
        }
    }
}

/// Metrics of one method in one repeat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub far: f64,
    pub power: f64,
    pub auroc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub runs: Vec<RunMetrics>,
    pub far_mean: f64,
    pub power_mean: f64,
    pub power_std: f64,
    pub auroc_mean: f64,
    pub auroc_std: f64,
}

impl MethodReport {
    fn from_runs(runs: Vec<RunMetrics>) -> Self {
        let (far_mean, _) = mean_std(runs.iter().map(|r| r.far));
        let (power_mean, power_std) = mean_std(runs.iter().map(|r| r.power));
        let (auroc_mean, auroc_std) = mean_std(runs.iter().map(|r| r.auroc));
        Self {
            runs,
            far_mean,
            power_mean,
            power_std,
            auroc_mean,
            auroc_std,
        }
    }
}

/// Mean and sample (n - 1) standard deviation; the deviation is 0 for one value.
pub fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Method name of the combined detector with a per-repeat tuned coefficient.
pub const COMBINED: &str = "combined";
/// Method name of the combined detector with the theoretical coefficient.
pub const COMBINED_THEORETICAL: &str = "combined-theoretical";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub alpha: f64,
    pub epsilon: f64,
    pub n_cal: usize,
    pub repeats: usize,
    pub n_null: usize,
    pub n_alt: usize,
    pub methods: BTreeMap<String, MethodReport>,
}

/// Repeated randomized-calibration experiment.
///
/// Each repeat draws `n_cal` nulls into the calibration table and holds out
/// the rest. Single scores are thresholded on raw values at the empirical
/// quantile of the full null set. The combined detector is evaluated on the
/// holdout nulls and all alternatives, once with a coefficient tuned on the
/// holdout to the target rate and once with the theoretical coefficient.
pub fn run_experiment(data: &ExperimentData, config: &EvalConfig, seed: RngSeed) -> Result<EvalReport> {
    if config.repeats == 0 {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", config.alpha)));
    }
    if data.alts.is_empty() {
        return Err(Error::Validation("experiment needs at least one alternative prompt".into()));
    }
    if config.n_cal == 0 || config.n_cal >= data.nulls.len() {
        return Err(Error::InsufficientNulls {
            requested: config.n_cal + 1,
            available: data.nulls.len(),
        });
    }
    let names = data.score_names()?;
    let k = names.len();
    let theoretical = DetectorConfig::theoretical(config.alpha, config.epsilon, k);
    theoretical.validate()?;

    // Single-score baselines do not depend on the calibration draw.
    let mut single: BTreeMap<String, RunMetrics> = BTreeMap::new();
    for name in &names {
        let nulls = column(&data.nulls, name)?;
        let alts = column(&data.alts, name)?;
        let p = power_at_far(&nulls, &alts, config.alpha)?;
        single.insert(
            name.clone(),
            RunMetrics {
                far: p.far,
                power: p.power,
                auroc: auroc(&nulls, &alts)?,
            },
        );
    }

    let mut runs: BTreeMap<String, Vec<RunMetrics>> = BTreeMap::new();
    for r in 0..config.repeats {
        let mut order: Vec<usize> = (0..data.nulls.len()).collect();
        order.shuffle(&mut seed.derive_index(r as u64).rng());
        let (cal_idx, holdout_idx) = order.split_at(config.n_cal);
        let table = CalibrationTable::from_score_vectors(cal_idx.iter().map(|&i| &data.nulls[i]))?;

        let null_p = holdout_idx
            .iter()
            .map(|&i| table.p_values(&data.nulls[i]))
            .collect::<Result<Vec<_>>>()?;
        let alt_p = data
            .alts
            .iter()
            .map(|sv| table.p_values(sv))
            .collect::<Result<Vec<_>>>()?;
        let null_stat = null_p.iter().map(combined_statistic).collect::<Result<Vec<_>>>()?;
        let alt_stat = alt_p.iter().map(combined_statistic).collect::<Result<Vec<_>>>()?;
        let combined_auroc = auroc(&null_stat, &alt_stat)?;

        let tuned = DetectorConfig::empirical(config.alpha, k, tune_coefficient(&null_p, config.alpha)?);
        for (method, detector) in [(COMBINED, tuned), (COMBINED_THEORETICAL, theoretical)] {
            runs.entry(method.to_string()).or_default().push(RunMetrics {
                far: flag_rate(&null_p, &detector)?,
                power: flag_rate(&alt_p, &detector)?,
                auroc: combined_auroc,
            });
        }
        for (name, m) in &single {
            runs.entry(name.clone()).or_default().push(*m);
        }
    }

    Ok(EvalReport {
        alpha: config.alpha,
        epsilon: config.epsilon,
        n_cal: config.n_cal,
        repeats: config.repeats,
        n_null: data.nulls.len(),
        n_alt: data.alts.len(),
        methods: runs
            .into_iter()
            .map(|(name, runs)| (name, MethodReport::from_runs(runs)))
            .collect(),
    })
}

fn column(vectors: &[ScoreVector], name: &str) -> Result<Vec<f64>> {
    vectors.iter().map(|sv| sv.get(name)).collect()
}

/// Fraction of p-value vectors the detector flags.
pub fn flag_rate(pvecs: &[PValueVector], detector: &DetectorConfig) -> Result<f64> {
    if pvecs.is_empty() {
        return Err(Error::Domain("flag rate of an empty set".into()));
    }
    let mut flagged = 0usize;
    for p in pvecs {
        if detect(p, detector)?.hallucination {
            flagged += 1;
        }
    }
    Ok(flagged as f64 / pvecs.len() as f64)
}

/// Method rows by report columns, one block for power and one for AUROC.
pub fn render_table(columns: &[(&str, &EvalReport)]) -> String {
    let mut methods: Vec<&String> = Vec::new();
    for (_, report) in columns {
        for name in report.methods.keys() {
            if !methods.contains(&name) {
                methods.push(name);
            }
        }
    }
    let width = methods.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
    let mut out = String::new();
    for (metric, pick) in [
        ("Detection power", (|m: &MethodReport| (m.power_mean, m.power_std)) as fn(&MethodReport) -> (f64, f64)),
        ("AUROC", |m: &MethodReport| (m.auroc_mean, m.auroc_std)),
    ] {
        let alpha = columns.first().map(|(_, r)| r.alpha).unwrap_or(f64::NAN);
        if metric == "AUROC" {
            let _ = writeln!(out, "{metric}");
        } else {
            let _ = writeln!(out, "{metric} at FAR = {alpha}");
        }
        let _ = write!(out, "{:<width$}", "method");
        for (label, _) in columns {
            let _ = write!(out, "  {label:>17}");
        }
        out.push('\n');
        for method in &methods {
            let _ = write!(out, "{method:<width$}");
            for (_, report) in columns {
                match report.methods.get(*method) {
                    Some(m) => {
                        let (mean, std) = pick(m);
                        let _ = write!(out, "  {:>17}", format!("{mean:.3} ± {std:.3}"));
                    }
                    None => {
                        let _ = write!(out, "  {:>17}", "-");
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
