//! Per-prompt uncertainty scores over sampled generations.
//!
//! Every score is emitted so that larger values look more like a
//! hallucination: entropy-style scores as computed, lexical similarity negated.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{log_sum_exp, symmetric_eigenvalues, DetRng, RngSeed};
use crate::textsim::{
    pairwise_matrix, tokenize, EquivalenceOracle, Measure, SimilarityMatrix, TokenSequence,
};

/// One prompt with its sampled generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub id: String,
    #[serde(default)]
    pub prompt: String,
    pub generations: Vec<String>,
    /// Total natural-log likelihood of each generation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gen_logliks: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<Vec<String>>,
    /// Precomputed pairwise similarity between generations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_matrix: Option<SimilarityMatrix>,
}

impl GenerationRecord {
    pub fn new(id: impl Into<String>, generations: Vec<String>) -> Self {
        Self {
            id: id.into(),
            prompt: String::new(),
            generations,
            gen_logliks: None,
            references: None,
            sim_matrix: None,
        }
    }

    pub fn m(&self) -> usize {
        self.generations.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        if m == 0 {
            return Err(Error::Validation(format!("record `{}` has no generations", self.id)));
        }
        if let Some(ll) = &self.gen_logliks {
            if ll.len() != m {
                return Err(Error::Validation(format!(
                    "record `{}`: gen_logliks has {} entries but there are {m} generations",
                    self.id,
                    ll.len()
                )));
            }
            if ll.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "record `{}`: gen_logliks must be finite",
                    self.id
                )));
            }
        }
        if let Some(sim) = &self.sim_matrix {
            if sim.dim() != m {
                return Err(Error::Validation(format!(
                    "record `{}`: sim_matrix is {d}x{d} but there are {m} generations",
                    self.id,
                    d = sim.dim()
                )));
            }
        }
        Ok(())
    }

    pub fn tokenized_generations(&self) -> Vec<TokenSequence> {
        self.generations.iter().map(|g| tokenize(g)).collect()
    }
}

/// How the probability of a semantic cluster is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassMode {
    /// Cluster size over generation count.
    #[default]
    Frequency,
    /// Normalized summed sequence likelihood of the members.
    Likelihood,
}

/// A clustering of generations with a probability mass per cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    assignment: Vec<usize>,
    cluster_mass: Vec<f64>,
    /// Member counts, present for frequency masses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<Vec<usize>>,
}

impl ClusterPartition {
    /// `assignment` must use contiguous labels starting at 0 in order of first use.
    pub fn from_assignment(
        assignment: Vec<usize>,
        mass_mode: MassMode,
        logliks: Option<&[f64]>,
    ) -> Result<Self> {
        let m = assignment.len();
        if m == 0 {
            return Err(Error::Validation("cannot partition zero generations".into()));
        }
        let mut next = 0;
        for &c in &assignment {
            if c > next {
                return Err(Error::Validation("cluster labels must be contiguous from 0".into()));
            }
            if c == next {
                next += 1;
            }
        }
        let n_clusters = next;
        let mut counts = None;
        let cluster_mass = match mass_mode {
            MassMode::Frequency => {
                let mut sizes = vec![0usize; n_clusters];
                for &c in &assignment {
                    sizes[c] += 1;
                }
                let masses = sizes.iter().map(|&k| k as f64 / m as f64).collect();
                counts = Some(sizes);
                masses
            }
            MassMode::Likelihood => {
                let ll = logliks.ok_or_else(|| {
                    Error::Config("likelihood cluster mass requires gen_logliks".into())
                })?;
                if ll.len() != m {
                    return Err(Error::Validation(format!(
                        "{} log-likelihoods for {m} generations",
                        ll.len()
                    )));
                }
                let total = log_sum_exp(ll)?;
                let mut members: Vec<Vec<f64>> = vec![Vec::new(); n_clusters];
                for (&c, &v) in assignment.iter().zip(ll) {
                    members[c].push(v);
                }
                members
                    .iter()
                    .map(|vals| log_sum_exp(vals).map(|lse| (lse - total).exp()))
                    .collect::<Result<Vec<f64>>>()?
            }
        };
        Ok(Self {
            assignment,
            cluster_mass,
            counts,
        })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn cluster_mass(&self) -> &[f64] {
        &self.cluster_mass
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_mass.len()
    }
}

/// Greedy first-match clustering: each item joins the first cluster whose
/// founding member is equivalent to it, otherwise it founds a new one.
pub fn greedy_assignment(m: usize, mut equivalent: impl FnMut(usize, usize) -> bool) -> Vec<usize> {
    let mut representatives: Vec<usize> = Vec::new();
    let mut assignment = Vec::with_capacity(m);
    for i in 0..m {
        match representatives.iter().position(|&r| equivalent(r, i)) {
            Some(c) => assignment.push(c),
            None => {
                assignment.push(representatives.len());
                representatives.push(i);
            }
        }
    }
    assignment
}

pub fn cluster_bidirectional(
    record: &GenerationRecord,
    oracle: &EquivalenceOracle,
    mass_mode: MassMode,
) -> Result<ClusterPartition> {
    record.validate()?;
    let tokens = record.tokenized_generations();
    let bound = oracle.bind(&tokens, record.sim_matrix.as_ref())?;
    let assignment = greedy_assignment(record.m(), |i, j| bound.equivalent(i, j));
    ClusterPartition::from_assignment(assignment, mass_mode, record.gen_logliks.as_deref())
}

/// Sequential similarity-weighted clustering.
///
/// Generations are seated in a uniformly random order. Each one joins an
/// existing cluster `c` with weight equal to its summed similarity to the
/// members already seated in `c`, or opens a new cluster with weight `alpha`.
/// The random order makes the result invariant in distribution to the order
/// of the input.
pub fn alpha_assignment(sim: &SimilarityMatrix, alpha: f64, rng: &mut DetRng) -> Result<Vec<usize>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!("alpha must be a positive finite number, got {alpha}")));
    }
    let m = sim.dim();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let mut cluster_of: Vec<Option<usize>> = vec![None; m];
    let mut seated: Vec<usize> = Vec::with_capacity(m);
    let mut n_clusters = 0usize;
    let mut weights: Vec<f64> = Vec::with_capacity(m + 1);
    for &i in &order {
        weights.clear();
        weights.resize(n_clusters, 0.0);
        for &j in &seated {
            weights[cluster_of[j].expect("seated")] += sim.get(i, j);
        }
        weights.push(alpha);
        let pick = WeightedIndex::new(&weights)
            .map_err(|e| Error::Domain(format!("cluster weights: {e}")))?
            .sample(rng);
        if pick == n_clusters {
            n_clusters += 1;
        }
        cluster_of[i] = Some(pick);
        seated.push(i);
    }
    // Relabel by first appearance in input order.
    let mut relabel: Vec<Option<usize>> = vec![None; n_clusters];
    let mut next = 0;
    Ok(cluster_of
        .into_iter()
        .map(|c| {
            let c = c.expect("every generation seated");
            *relabel[c].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect())
}

pub fn cluster_alpha(
    record: &GenerationRecord,
    sim: &SimilarityMatrix,
    alpha: f64,
    seed: RngSeed,
    mass_mode: MassMode,
) -> Result<ClusterPartition> {
    record.validate()?;
    if sim.dim() != record.m() {
        return Err(Error::Validation(format!(
            "similarity matrix is {0}x{0} but record `{1}` has {2} generations",
            sim.dim(),
            record.id,
            record.m()
        )));
    }
    let mut rng = seed.rng();
    let assignment = alpha_assignment(sim, alpha, &mut rng)?;
    ClusterPartition::from_assignment(assignment, mass_mode, record.gen_logliks.as_deref())
}

/// Natural-log entropy of the cluster masses.
///
/// Frequency masses are grouped by cluster size and each group contributes
/// `(k n / m) ln(m / n)` from integer counts, so `c` equal clusters give
/// exactly `ln c`.
pub fn semantic_entropy(partition: &ClusterPartition) -> f64 {
    let h: f64 = match &partition.counts {
        Some(sizes) => {
            let m: usize = sizes.iter().sum();
            let mut by_size: BTreeMap<usize, usize> = BTreeMap::new();
            for &n in sizes.iter().filter(|&&n| n > 0) {
                *by_size.entry(n).or_default() += 1;
            }
            by_size
                .iter()
                .map(|(&n, &k)| (k * n) as f64 / m as f64 * (m as f64 / n as f64).ln())
                .sum()
        }
        None => partition
            .cluster_mass()
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum(),
    };
    h.max(0.0)
}

/// `sum_i max(0, 1 - lambda_i)` over the symmetric normalized Laplacian
/// `I - D^{-1/2} W D^{-1/2}`, degrees including the unit self-similarity.
pub fn eigv_score(sim: &SimilarityMatrix) -> Result<f64> {
    let m = sim.dim();
    let inv_sqrt_deg: Vec<f64> = sim
        .rows()
        .iter()
        .map(|row| 1.0 / row.iter().sum::<f64>().sqrt())
        .collect();
    let laplacian: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let n = sim.get(i, j) * inv_sqrt_deg[i] * inv_sqrt_deg[j];
                    if i == j {
                        1.0 - n
                    } else {
                        -n
                    }
                })
                .collect()
        })
        .collect();
    let spectrum = symmetric_eigenvalues(&laplacian)?;
    Ok(spectrum
        .eigenvalues()
        .iter()
        .map(|&l| (1.0 - l).max(0.0))
        .sum())
}

/// Negated sum of the upper-triangle similarities.
pub fn lexical_similarity_score(sim: &SimilarityMatrix) -> f64 {
    let m = sim.dim();
    let total: f64 = (0..m)
        .flat_map(|i| ((i + 1)..m).map(move |j| (i, j)))
        .map(|(i, j)| sim.get(i, j))
        .sum();
    -total
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreName {
    Eigv,
    SemanticEntropy,
    AlphaSemanticEntropy,
    LexicalSimilarity,
}

impl ScoreName {
    pub const ALL: [ScoreName; 4] = [
        ScoreName::Eigv,
        ScoreName::SemanticEntropy,
        ScoreName::AlphaSemanticEntropy,
        ScoreName::LexicalSimilarity,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScoreName::Eigv => "eigv",
            ScoreName::SemanticEntropy => "semantic-entropy",
            ScoreName::AlphaSemanticEntropy => "alpha-semantic-entropy",
            ScoreName::LexicalSimilarity => "lexical-similarity",
        }
    }
}

impl fmt::Display for ScoreName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoreName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::UnknownScore(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub enabled: Vec<ScoreName>,
    pub oracle: EquivalenceOracle,
    pub mass_mode: MassMode,
    /// New-cluster weight for the alpha semantic entropy.
    pub alpha: f64,
    #[serde(skip)]
    pub seed: RngSeed,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            enabled: ScoreName::ALL.to_vec(),
            oracle: EquivalenceOracle::default(),
            mass_mode: MassMode::Frequency,
            alpha: 0.5,
            seed: RngSeed::default(),
        }
    }
}

impl ScoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.enabled.is_empty() {
            return Err(Error::Config("at least one score must be enabled".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        self.oracle.validate()
    }
}

/// Named scores of one prompt, all oriented so larger is more hallucination-like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreVector {
    pub id: String,
    pub scores: BTreeMap<String, f64>,
}

impl ScoreVector {
    pub fn new(id: impl Into<String>, scores: BTreeMap<String, f64>) -> Result<Self> {
        let sv = Self {
            id: id.into(),
            scores,
        };
        sv.validate()?;
        Ok(sv)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scores.is_empty() {
            return Err(Error::Validation(format!("score vector `{}` is empty", self.id)));
        }
        if let Some((name, v)) = self.scores.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "score `{name}` of `{}` is not finite: {v}",
                self.id
            )));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        self.scores
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownScore(name.to_string()))
    }
}

/// Computes every enabled score for one record.
///
/// EigV and the alpha clustering use the record's `sim_matrix` when present and
/// pairwise ROUGE-L otherwise; the lexical score always uses ROUGE-L.
pub fn score_record(record: &GenerationRecord, config: &ScoreConfig) -> Result<ScoreVector> {
    config.validate()?;
    record.validate()?;
    if config.mass_mode == MassMode::Likelihood && record.gen_logliks.is_none() {
        return Err(Error::Config(format!(
            "record `{}`: likelihood mass mode requires gen_logliks",
            record.id
        )));
    }
    let tokens = record.tokenized_generations();
    let needs_rouge = config.enabled.contains(&ScoreName::LexicalSimilarity)
        || (record.sim_matrix.is_none()
            && config
                .enabled
                .iter()
                .any(|n| matches!(n, ScoreName::Eigv | ScoreName::AlphaSemanticEntropy)));
    let rouge = if needs_rouge {
        Some(pairwise_matrix(&tokens, Measure::RougeL)?)
    } else {
        None
    };
    let graph = record.sim_matrix.as_ref().or(rouge.as_ref());

    let logliks = record.gen_logliks.as_deref();
    let mut scores = BTreeMap::new();
    for name in &config.enabled {
        let value = match name {
            ScoreName::Eigv => eigv_score(graph.expect("similarity graph computed"))?,
            ScoreName::SemanticEntropy => {
                let bound = config.oracle.bind(&tokens, record.sim_matrix.as_ref())?;
                let assignment = greedy_assignment(record.m(), |i, j| bound.equivalent(i, j));
                semantic_entropy(&ClusterPartition::from_assignment(
                    assignment,
                    config.mass_mode,
                    logliks,
                )?)
            }
            ScoreName::AlphaSemanticEntropy => {
                let mut rng = config.seed.derive(&record.id).rng();
                let graph = graph.expect("similarity graph computed");
                let assignment = alpha_assignment(graph, config.alpha, &mut rng)?;
                semantic_entropy(&ClusterPartition::from_assignment(
                    assignment,
                    config.mass_mode,
                    logliks,
                )?)
            }
            ScoreName::LexicalSimilarity => {
                lexical_similarity_score(rouge.as_ref().expect("rouge matrix computed"))
            }
        };
        scores.insert(name.as_str().to_string(), value);
    }
    ScoreVector::new(record.id.clone(), scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(gens: &[&str]) -> GenerationRecord {
        GenerationRecord::new("r", gens.iter().map(|s| s.to_string()).collect())
    }

    fn all_ones(m: usize) -> SimilarityMatrix {
        SimilarityMatrix::from_fn(m, |_, _| 1.0)
    }

    #[test]
    fn identical_generations_form_one_cluster() {
        let r = record(&["paris"; 5]);
        let p = cluster_bidirectional(&r, &EquivalenceOracle::ExactNormalized, MassMode::Frequency).unwrap();
        assert_eq!(p.cluster_mass(), &[1.0]);
        assert_eq!(semantic_entropy(&p), 0.0);
    }

    #[test]
    fn distinct_generations_form_singletons() {
        let r = record(&["a", "b", "c", "d"]);
        let p = cluster_bidirectional(&r, &EquivalenceOracle::ExactNormalized, MassMode::Frequency).unwrap();
        assert_eq!(p.cluster_mass(), &[0.25; 4]);
        assert!((semantic_entropy(&p) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_even_clusters_of_ten() {
        let gens: Vec<&str> = (0..20).map(|i| if i % 2 == 0 { "rome" } else { "Milan." }).collect();
        let p = cluster_bidirectional(&record(&gens), &EquivalenceOracle::ExactNormalized, MassMode::Frequency)
            .unwrap();
        assert_eq!(p.cluster_mass(), &[0.5, 0.5]);
        assert_eq!(p.assignment()[..4], [0, 1, 0, 1]);
    }

    #[test]
    fn entropy_of_given_masses() {
        let p = ClusterPartition::from_assignment(vec![0, 0, 1, 2], MassMode::Frequency, None).unwrap();
        let expected = -(0.5 * 0.5f64.ln() + 2.0 * 0.25 * 0.25f64.ln());
        assert!((semantic_entropy(&p) - expected).abs() < 1e-15);
        assert!((semantic_entropy(&p) - 1.0397).abs() < 1e-4);
    }

    #[test]
    fn likelihood_mass_mode() {
        let ll = [0.0, 0.0, 2f64.ln()];
        let p = ClusterPartition::from_assignment(vec![0, 0, 1], MassMode::Likelihood, Some(&ll)).unwrap();
        assert!((p.cluster_mass()[0] - 0.5).abs() < 1e-15);
        assert!((p.cluster_mass()[1] - 0.5).abs() < 1e-15);
        assert!(matches!(
            ClusterPartition::from_assignment(vec![0, 1], MassMode::Likelihood, None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn non_contiguous_labels_rejected() {
        assert!(ClusterPartition::from_assignment(vec![0, 2], MassMode::Frequency, None).is_err());
        assert!(ClusterPartition::from_assignment(vec![], MassMode::Frequency, None).is_err());
    }

    #[test]
    fn alpha_clustering_edge_cases() {
        let r = record(&["x"]);
        let p = cluster_alpha(&r, &all_ones(1), 100.0, RngSeed(3), MassMode::Frequency).unwrap();
        assert_eq!(p.n_clusters(), 1);

        let r = record(&["a"; 6]);
        let zero = SimilarityMatrix::from_fn(6, |_, _| 0.0);
        let p = cluster_alpha(&r, &zero, 1e-6, RngSeed(3), MassMode::Frequency).unwrap();
        assert_eq!(p.n_clusters(), 6);

        assert!(cluster_alpha(&r, &zero, 0.0, RngSeed(3), MassMode::Frequency).is_err());
        assert!(cluster_alpha(&r, &all_ones(3), 0.5, RngSeed(3), MassMode::Frequency).is_err());
    }

    #[test]
    fn alpha_clustering_is_seeded() {
        let r = record(&["a"; 20]);
        let sim = SimilarityMatrix::from_fn(20, |i, j| if (i + j) % 3 == 0 { 0.9 } else { 0.1 });
        let a = cluster_alpha(&r, &sim, 0.5, RngSeed(9), MassMode::Frequency).unwrap();
        let b = cluster_alpha(&r, &sim, 0.5, RngSeed(9), MassMode::Frequency).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eigv_examples() {
        assert!((eigv_score(&all_ones(7)).unwrap() - 1.0).abs() < 1e-10);
        let blocks = [0, 0, 1, 1, 1, 2];
        let sim = SimilarityMatrix::from_fn(6, |i, j| if blocks[i] == blocks[j] { 1.0 } else { 0.0 });
        assert!((eigv_score(&sim).unwrap() - 3.0).abs() < 1e-10);
        assert!((eigv_score(&all_ones(1)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn lexical_examples() {
        assert_eq!(lexical_similarity_score(&all_ones(20)), -190.0);
        assert_eq!(lexical_similarity_score(&SimilarityMatrix::from_fn(5, |_, _| 0.0)), 0.0);
        let vals = [[1.0, 0.8, 0.5], [0.8, 1.0, 0.2], [0.5, 0.2, 1.0]];
        let sim = SimilarityMatrix::from_rows(vals.iter().map(|r| r.to_vec()).collect()).unwrap();
        assert!((lexical_similarity_score(&sim) + 1.5).abs() < 1e-15);
    }

    #[test]
    fn score_identical_generations() {
        let r = record(&["the answer is paris"; 8]);
        let cfg = ScoreConfig {
            alpha: 1e-9,
            ..ScoreConfig::default()
        };
        let sv = score_record(&r, &cfg).unwrap();
        assert!((sv.get("eigv").unwrap() - 1.0).abs() < 1e-10);
        assert_eq!(sv.get("semantic-entropy").unwrap(), 0.0);
        assert_eq!(sv.get("alpha-semantic-entropy").unwrap(), 0.0);
        assert_eq!(sv.get("lexical-similarity").unwrap(), -28.0);
    }

    #[test]
    fn score_single_generation() {
        let sv = score_record(&record(&["only one"]), &ScoreConfig::default()).unwrap();
        assert!((sv.get("eigv").unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sv.get("semantic-entropy").unwrap(), 0.0);
        assert_eq!(sv.get("lexical-similarity").unwrap(), 0.0);
    }

    #[test]
    fn score_with_external_matrix() {
        let mut r = record(&["a", "b", "c", "d"]);
        // Two blocks {0,1} and {2,3}.
        r.sim_matrix = Some(
            SimilarityMatrix::from_rows(vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0],
                vec![0.0, 0.0, 1.0, 1.0],
            ])
            .unwrap(),
        );
        let cfg = ScoreConfig {
            enabled: vec![ScoreName::Eigv, ScoreName::SemanticEntropy, ScoreName::LexicalSimilarity],
            oracle: EquivalenceOracle::ExternalMatrix { threshold: 0.5 },
            ..ScoreConfig::default()
        };
        let sv = score_record(&r, &cfg).unwrap();
        assert!((sv.get("eigv").unwrap() - 2.0).abs() < 1e-10);
        assert!((sv.get("semantic-entropy").unwrap() - 2f64.ln()).abs() < 1e-15);
        // Lexical uses ROUGE-L on the texts, which share no tokens.
        assert_eq!(sv.get("lexical-similarity").unwrap(), 0.0);
    }

    #[test]
    fn score_config_errors() {
        let r = record(&["a", "b"]);
        let cfg = ScoreConfig {
            mass_mode: MassMode::Likelihood,
            ..ScoreConfig::default()
        };
        assert!(matches!(score_record(&r, &cfg), Err(Error::Config(_))));
        let cfg = ScoreConfig {
            enabled: vec![],
            ..ScoreConfig::default()
        };
        assert!(matches!(score_record(&r, &cfg), Err(Error::Config(_))));
        let mut bad = r.clone();
        bad.gen_logliks = Some(vec![0.0]);
        assert!(matches!(bad.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn score_name_round_trip() {
        for n in ScoreName::ALL {
            assert_eq!(n.as_str().parse::<ScoreName>().unwrap(), n);
        }
        assert!("entropy".parse::<ScoreName>().is_err());
    }
}
