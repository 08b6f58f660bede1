//! Tokenization, ROUGE-L and pairwise similarity between generations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonically tokenized text: lowercased, whitespace split, edge punctuation stripped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(iter.into_iter().map(Into::into).collect())
    }
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c, '\u{00A1}' | '\u{00AB}' | '\u{00BB}' | '\u{00BF}' | '\u{00B7}')
        || ('\u{2010}'..='\u{205E}').contains(&c)
        || ('\u{3000}'..='\u{303F}').contains(&c)
        || ('\u{FF01}'..='\u{FF0F}').contains(&c)
}

pub fn tokenize(text: &str) -> TokenSequence {
    text.split_whitespace()
        .map(|raw| raw.to_lowercase())
        .map(|tok| tok.trim_matches(is_punctuation).to_string())
        .filter(|tok| !tok.is_empty())
        .collect()
}

/// Longest common subsequence length, two-row dynamic program.
pub fn lcs_length(a: &TokenSequence, b: &TokenSequence) -> usize {
    let (a, b) = (a.tokens(), b.tokens());
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 between a candidate and a reference.
pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    let l = lcs_length(candidate, reference);
    if l == 0 {
        return 0.0;
    }
    // 2PR / (P + R) with P = l/|c| and R = l/|r|, in a single rounding.
    2.0 * l as f64 / (candidate.len() + reference.len()) as f64
}

/// Best ROUGE-L against any of several references; 0 for none.
pub fn rouge_l_max(candidate: &TokenSequence, references: &[TokenSequence]) -> f64 {
    references
        .iter()
        .map(|r| rouge_l(candidate, r))
        .fold(0.0, f64::max)
}

/// Symmetric `m x m` similarity weights in `[0, 1]` with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimilarityMatrix {
    rows: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    /// Validates an externally supplied row-major matrix.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::Validation("similarity matrix must be at least 1x1".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Validation(format!(
                    "similarity matrix row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Validation(format!(
                        "similarity entry ({i},{j}) = {v} is outside [0, 1]"
                    )));
                }
            }
            if row[i] != 1.0 {
                return Err(Error::Validation(format!(
                    "similarity diagonal entry ({i},{i}) = {} must be 1",
                    row[i]
                )));
            }
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::Validation(format!(
                        "similarity matrix is not symmetric at ({i},{j}): {} vs {}",
                        rows[i][j], rows[j][i]
                    )));
                }
            }
        }
        Ok(Self { rows })
    }

    /// Builds a matrix from a pairwise measure, forcing the invariants.
    pub fn from_fn(m: usize, mut measure: impl FnMut(usize, usize) -> f64) -> Self {
        let mut rows = vec![vec![0.0; m]; m];
        for i in 0..m {
            rows[i][i] = 1.0;
            for j in (i + 1)..m {
                let v = measure(i, j).max(measure(j, i)).clamp(0.0, 1.0);
                rows[i][j] = v;
                rows[j][i] = v;
            }
        }
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl<'de> Deserialize<'de> for SimilarityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SimilarityMatrix::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// How pairwise similarity between generations is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Measure<'a> {
    RougeL,
    External(&'a SimilarityMatrix),
}

pub fn pairwise_matrix(generations: &[TokenSequence], measure: Measure<'_>) -> Result<SimilarityMatrix> {
    let m = generations.len();
    if m == 0 {
        return Err(Error::Validation("pairwise similarity needs at least one generation".into()));
    }
    match measure {
        Measure::RougeL => Ok(SimilarityMatrix::from_fn(m, |i, j| {
            rouge_l(&generations[i], &generations[j])
        })),
        Measure::External(matrix) => {
            if matrix.dim() != m {
                return Err(Error::Validation(format!(
                    "external similarity matrix is {0}x{0} but there are {m} generations",
                    matrix.dim()
                )));
            }
            Ok(matrix.clone())
        }
    }
}

/// Stand-in for semantic equivalence between two generations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EquivalenceOracle {
    /// Equal token sequences after canonical tokenization.
    ExactNormalized,
    /// ROUGE-L at least `threshold` in both directions.
    BidirectionalRouge { threshold: f64 },
    /// A per-record external matrix entry at least `threshold`.
    ExternalMatrix { threshold: f64 },
}

impl Default for EquivalenceOracle {
    fn default() -> Self {
        EquivalenceOracle::BidirectionalRouge { threshold: 0.5 }
    }
}

impl EquivalenceOracle {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EquivalenceOracle::ExactNormalized => Ok(()),
            EquivalenceOracle::BidirectionalRouge { threshold }
            | EquivalenceOracle::ExternalMatrix { threshold } => {
                if threshold > 0.0 && threshold <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "equivalence threshold must lie in (0, 1], got {threshold}"
                    )))
                }
            }
        }
    }

    /// Attaches the per-record data the oracle needs.
    pub fn bind<'a>(
        &'a self,
        generations: &'a [TokenSequence],
        matrix: Option<&'a SimilarityMatrix>,
    ) -> Result<BoundOracle<'a>> {
        self.validate()?;
        if let EquivalenceOracle::ExternalMatrix { .. } = self {
            let matrix = matrix.ok_or_else(|| {
                Error::Config("external-matrix equivalence requires a bound similarity matrix".into())
            })?;
            if matrix.dim() != generations.len() {
                return Err(Error::Validation(format!(
                    "external similarity matrix is {0}x{0} but there are {1} generations",
                    matrix.dim(),
                    generations.len()
                )));
            }
        }
        Ok(BoundOracle {
            oracle: self,
            generations,
            matrix,
        })
    }
}

/// Pairwise equivalence on two token sequences.
///
/// The external-matrix kind needs generation indices and is only usable
/// through [`EquivalenceOracle::bind`].
pub fn equivalent(a: &TokenSequence, b: &TokenSequence, oracle: &EquivalenceOracle) -> Result<bool> {
    oracle.validate()?;
    match *oracle {
        EquivalenceOracle::ExactNormalized => Ok(a == b),
        EquivalenceOracle::BidirectionalRouge { threshold } => {
            Ok(rouge_l(a, b) >= threshold && rouge_l(b, a) >= threshold)
        }
        EquivalenceOracle::ExternalMatrix { .. } => Err(Error::Config(
            "external-matrix equivalence requires a bound similarity matrix".into(),
        )),
    }
}

/// An oracle bound to one record's generations.
#[derive(Debug, Clone, Copy)]
pub struct BoundOracle<'a> {
    oracle: &'a EquivalenceOracle,
    generations: &'a [TokenSequence],
    matrix: Option<&'a SimilarityMatrix>,
}

impl BoundOracle<'_> {
    pub fn equivalent(&self, i: usize, j: usize) -> bool {
        if i == j {
            return true;
        }
        match *self.oracle {
            EquivalenceOracle::ExternalMatrix { threshold } => {
                // bind() guarantees the matrix is present with matching size.
                let m = self.matrix.expect("bound external matrix");
                m.get(i, j) >= threshold && m.get(j, i) >= threshold
            }
            ref other => equivalent(&self.generations[i], &self.generations[j], other)
                .expect("validated oracle"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> TokenSequence {
        tokenize(s)
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(toks("The cat sat.").tokens(), &["the", "cat", "sat"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("  A  B  ").tokens(), &["a", "b"]);
        assert_eq!(toks("\"Paris,\" she said…").tokens(), &["paris", "she", "said"]);
        assert!(toks(" ... !! ").is_empty());
        assert_eq!(toks("don't").tokens(), &["don't"]);
    }

    #[test]
    fn lcs_examples() {
        let abc: TokenSequence = ["a", "b", "c"].into_iter().collect();
        let ab: TokenSequence = ["a", "b"].into_iter().collect();
        let cd: TokenSequence = ["c", "d"].into_iter().collect();
        assert_eq!(lcs_length(&abc, &abc), 3);
        assert_eq!(lcs_length(&ab, &cd), 0);
        assert_eq!(lcs_length(&toks("the cat sat"), &toks("the cat ran")), 2);
        assert_eq!(lcs_length(&TokenSequence::default(), &abc), 0);
    }

    #[test]
    fn rouge_examples() {
        let s = toks("the cat sat on the mat");
        assert_eq!(rouge_l(&s, &s), 1.0);
        assert_eq!(rouge_l(&toks("a b"), &toks("c d")), 0.0);
        let v = rouge_l(&s, &toks("the cat is on the mat"));
        assert!((v - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(rouge_l(&TokenSequence::default(), &TokenSequence::default()), 0.0);
    }

    #[test]
    fn rouge_max_over_references() {
        let refs = vec![toks("berlin"), toks("paris")];
        assert_eq!(rouge_l_max(&toks("Paris"), &refs), 1.0);
        assert_eq!(rouge_l_max(&toks("Paris"), &[]), 0.0);
    }

    #[test]
    fn pairwise_examples() {
        let same = vec![toks("x y"), toks("x y"), toks("x y")];
        let m = pairwise_matrix(&same, Measure::RougeL).unwrap();
        assert!(m.rows().iter().flatten().all(|&v| v == 1.0));

        let single = pairwise_matrix(&[toks("hello")], Measure::RougeL).unwrap();
        assert_eq!(single.rows(), &[vec![1.0]]);

        let gens = vec![toks("a b c"), toks("a b d"), toks("e f g")];
        let m = pairwise_matrix(&gens, Measure::RougeL).unwrap();
        assert!((m.get(0, 1) - rouge_l(&gens[0], &gens[1])).abs() < 1e-15);
        assert_eq!(m.get(0, 2), 0.0);

        let empty = vec![TokenSequence::default(), TokenSequence::default()];
        let m = pairwise_matrix(&empty, Measure::RougeL).unwrap();
        assert_eq!(m.rows(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);

        assert!(pairwise_matrix(&[], Measure::RougeL).is_err());
    }

    #[test]
    fn external_matrix_validation() {
        assert!(SimilarityMatrix::from_rows(vec![vec![1.0, 0.3], vec![0.3, 1.0]]).is_ok());
        assert!(SimilarityMatrix::from_rows(vec![vec![1.0, 0.3], vec![0.2, 1.0]]).is_err());
        assert!(SimilarityMatrix::from_rows(vec![vec![0.9, 0.3], vec![0.3, 1.0]]).is_err());
        assert!(SimilarityMatrix::from_rows(vec![vec![1.0, 1.3], vec![1.3, 1.0]]).is_err());
        assert!(SimilarityMatrix::from_rows(vec![vec![1.0, 0.3]]).is_err());
        assert!(SimilarityMatrix::from_rows(vec![]).is_err());
        let ext = SimilarityMatrix::from_rows(vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        assert!(pairwise_matrix(&[toks("a")], Measure::External(&ext)).is_err());
        let parsed: std::result::Result<SimilarityMatrix, _> = serde_json::from_str("[[1.0, 0.5], [0.4, 1.0]]");
        assert!(parsed.is_err());
    }

    #[test]
    fn equivalence_examples() {
        let a = toks("the cat sat on the mat");
        let oracle = EquivalenceOracle::BidirectionalRouge { threshold: 0.5 };
        assert!(equivalent(&a, &a, &oracle).unwrap());
        assert!(!equivalent(&a, &toks("dogs bark loudly"), &oracle).unwrap());
        let strict = EquivalenceOracle::BidirectionalRouge { threshold: 0.8 };
        assert!(equivalent(&a, &toks("the cat is on the mat"), &strict).unwrap());
        assert!(equivalent(&toks("Paris."), &toks("paris"), &EquivalenceOracle::ExactNormalized).unwrap());
    }

    #[test]
    fn external_oracle_needs_matrix() {
        let oracle = EquivalenceOracle::ExternalMatrix { threshold: 0.5 };
        let gens = vec![toks("a"), toks("b")];
        assert!(matches!(equivalent(&gens[0], &gens[1], &oracle), Err(Error::Config(_))));
        assert!(matches!(oracle.bind(&gens, None), Err(Error::Config(_))));
        let m = SimilarityMatrix::from_rows(vec![vec![1.0, 0.7], vec![0.7, 1.0]]).unwrap();
        let bound = oracle.bind(&gens, Some(&m)).unwrap();
        assert!(bound.equivalent(0, 1));
        let low = EquivalenceOracle::ExternalMatrix { threshold: 0.8 };
        assert!(!low.bind(&gens, Some(&m)).unwrap().equivalent(1, 0));
        assert!(EquivalenceOracle::BidirectionalRouge { threshold: 0.0 }.validate().is_err());
    }
}
