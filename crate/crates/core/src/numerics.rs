//! Deterministic numerical kernels.
//!
//! Everything here is a pure function of its inputs. Stochastic code elsewhere
//! in the crate draws from a [`DetRng`] built from an explicit [`RngSeed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The generator threaded through every stochastic operation.
pub type DetRng = ChaCha8Rng;

/// Seed for a reproducible random stream.
///
/// ChaCha8 output is specified bit-for-bit, so the same seed replays the same
/// stream on every platform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> DetRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Child seed keyed by a label, e.g. a record id.
    pub fn derive(self, label: &str) -> RngSeed {
        // FNV-1a over the label, then mixed with the parent seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in label.as_bytes() {
            h ^= u64::from(*byte);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        RngSeed(splitmix64(self.0 ^ splitmix64(h)))
    }

    /// Child seed keyed by an index, e.g. a repeat number.
    pub fn derive_index(self, index: u64) -> RngSeed {
        RngSeed(splitmix64(self.0.wrapping_add(splitmix64(index ^ 0x9e37_79b9_7f4a_7c15))))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A point query of the Beta(a, b) CDF with integer shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaCdfQuery {
    pub x: f64,
    pub a: u64,
    pub b: u64,
}

impl BetaCdfQuery {
    pub fn new(x: f64, a: u64, b: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("incomplete beta requires 0 <= x <= 1, got {x}")));
        }
        if a < 1 || b < 1 {
            return Err(Error::Domain(format!(
                "incomplete beta requires shapes >= 1, got a={a}, b={b}"
            )));
        }
        Ok(Self { x, a, b })
    }

    pub fn eval(&self) -> f64 {
        let (x, a, b) = (self.x, self.a, self.b);
        // Closed forms for the shapes where the CDF is a single power.
        if b == 1 {
            return x.powf(a as f64);
        }
        if a == 1 {
            return -(b as f64 * (-x).ln_1p()).exp_m1();
        }
        if a == b && x == 0.5 {
            return 0.5;
        }
        regularized_beta(x, a as f64, b as f64)
    }
}

/// Regularized incomplete Beta function `I_x(a, b)`, the Beta(a, b) CDF at `x`.
pub fn incomplete_beta(x: f64, a: u64, b: u64) -> Result<f64> {
    Ok(BetaCdfQuery::new(x, a, b)?.eval())
}

fn regularized_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // The continued fraction converges fastest below the mean-ish split point.
    if x > (a + 1.0) / (a + b + 2.0) {
        return 1.0 - regularized_beta(1.0 - x, b, a);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    let value = ln_front.exp() * beta_continued_fraction(x, a, b) / a;
    value.clamp(0.0, 1.0)
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let max_iter = 200 + 20 * (a.max(b).sqrt() as usize);

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Lanczos approximation (g = 7, n = 9), valid for `x > 0`.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Ascending eigenvalues of a real symmetric matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    eigenvalues: Vec<f64>,
}

impl EigenSpectrum {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.eigenvalues
    }
}

const SYMMETRY_TOL: f64 = 1e-12;
const JACOBI_OFF_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
///
/// `matrix` is a list of rows. Sweeps stop once the off-diagonal Frobenius
/// norm drops below `1e-12` (relative to the matrix norm when that exceeds 1).
pub fn symmetric_eigenvalues(matrix: &[Vec<f64>]) -> Result<EigenSpectrum> {
    let n = matrix.len();
    if n == 0 {
        return Err(Error::Validation("eigensolver needs a matrix of dimension >= 1".into()));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Validation(format!(
                "matrix is not square: row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("matrix row {i} contains non-finite value {v}")));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (matrix[i][j] - matrix[j][i]).abs() > SYMMETRY_TOL {
                return Err(Error::Validation(format!(
                    "matrix is not symmetric at ({i},{j}): {} vs {}",
                    matrix[i][j], matrix[j][i]
                )));
            }
        }
    }

    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    // Work on the exactly symmetrized copy.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = avg;
            a[j][i] = avg;
        }
    }
    let frob: f64 = a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let tol = JACOBI_OFF_TOL * frob.max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off < tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for row in a.iter_mut() {
                    let (akp, akq) = (row[p], row[q]);
                    row[p] = c * akp - s * akq;
                    row[q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                a[p][q] = 0.0;
                a[q][p] = 0.0;
            }
        }
    }

    let mut eigenvalues: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(EigenSpectrum { eigenvalues })
}

/// `H_K = 1 + 1/2 + ... + 1/K`.
///
/// Accumulated as an exact fraction while it fits in 128 bits; beyond that
/// (K > ~40) the sum is taken in floating point from the smallest term up.
pub fn harmonic_number(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("harmonic number requires K >= 1".into()));
    }
    if let Some((num, den)) = harmonic_fraction(k) {
        return Ok(num as f64 / den as f64);
    }
    Ok((1..=k).rev().map(|i| 1.0 / i as f64).sum())
}

fn harmonic_fraction(k: usize) -> Option<(u128, u128)> {
    let (mut num, mut den): (u128, u128) = (0, 1);
    for i in 1..=k as u128 {
        // num/den + 1/i
        let g = gcd(den, i);
        let lcm = den.checked_mul(i / g)?;
        num = num.checked_mul(lcm / den)?.checked_add(lcm / i)?;
        den = lcm;
        let r = gcd(num, den);
        num /= r;
        den /= r;
    }
    Some((num, den))
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `ln(sum(exp(v)))` with max-shift stabilization.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    let max = values
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or_else(|| Error::Domain("log_sum_exp of an empty list".into()))?;
    if max == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    if !max.is_finite() {
        return Ok(max);
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    Ok(max + sum.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn beta_uniform_shape_is_identity() {
        assert!((incomplete_beta(0.37, 1, 1).unwrap() - 0.37).abs() < 1e-14);
    }

    #[test]
    fn beta_symmetric_median() {
        assert!((incomplete_beta(0.5, 2, 2).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn beta_two_five_at_point_three() {
        // 1 - [0.7^6 + 6 * 0.3 * 0.7^5] from the binomial tail identity.
        assert!((incomplete_beta(0.3, 2, 5).unwrap() - 0.579825).abs() < 1e-12);
    }

    #[test]
    fn beta_endpoints_and_domain() {
        assert_eq!(incomplete_beta(0.0, 3, 4).unwrap(), 0.0);
        assert_eq!(incomplete_beta(1.0, 3, 4).unwrap(), 1.0);
        assert!(matches!(incomplete_beta(1.5, 1, 1), Err(Error::Domain(_))));
        assert!(matches!(incomplete_beta(-0.1, 1, 1), Err(Error::Domain(_))));
        assert!(matches!(incomplete_beta(0.5, 0, 1), Err(Error::Domain(_))));
        assert!(matches!(incomplete_beta(f64::NAN, 1, 1), Err(Error::Domain(_))));
    }

    #[test]
    fn beta_is_monotone_in_x() {
        let mut prev = 0.0;
        for i in 0..=1000 {
            let x = i as f64 / 1000.0;
            let v = incomplete_beta(x, 7, 40).unwrap();
            assert!(v + 1e-15 >= prev, "not monotone at x={x}");
            prev = v;
        }
    }

    #[test]
    fn eigen_identity_and_diagonal() {
        let eye = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        assert_eq!(symmetric_eigenvalues(&eye).unwrap().eigenvalues(), &[1.0, 1.0, 1.0]);
        let diag = vec![vec![2.0, 0.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, 0.0]];
        assert_eq!(symmetric_eigenvalues(&diag).unwrap().eigenvalues(), &[-1.0, 0.0, 2.0]);
    }

    #[test]
    fn eigen_rejects_bad_input() {
        let asym = vec![vec![1.0, 0.5], vec![0.4, 1.0]];
        assert!(matches!(symmetric_eigenvalues(&asym), Err(Error::Validation(_))));
        let ragged = vec![vec![1.0, 0.5], vec![0.5]];
        assert!(matches!(symmetric_eigenvalues(&ragged), Err(Error::Validation(_))));
        assert!(matches!(symmetric_eigenvalues(&[]), Err(Error::Validation(_))));
    }

    #[test]
    fn eigen_trace_and_frobenius_on_random_matrices() {
        let mut rng = RngSeed(11).rng();
        for m in 1..=16 {
            let mut a = vec![vec![0.0; m]; m];
            for i in 0..m {
                for j in i..m {
                    let v: f64 = rng.random_range(-1.0..1.0);
                    a[i][j] = v;
                    a[j][i] = v;
                }
            }
            let ev = symmetric_eigenvalues(&a).unwrap();
            assert_eq!(ev.len(), m);
            assert!(ev.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
            let trace: f64 = (0..m).map(|i| a[i][i]).sum();
            let frob2: f64 = a.iter().flatten().map(|v| v * v).sum();
            let sum: f64 = ev.eigenvalues().iter().sum();
            let sum2: f64 = ev.eigenvalues().iter().map(|v| v * v).sum();
            assert!((sum - trace).abs() < 1e-8);
            assert!((sum2 - frob2).abs() < 1e-8);
        }
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic_number(1).unwrap(), 1.0);
        assert!((harmonic_number(4).unwrap() - 25.0 / 12.0).abs() < 1e-15);
        let direct: f64 = (1..=10).map(|i| 1.0 / i as f64).sum();
        assert!((harmonic_number(10).unwrap() - direct).abs() < 1e-14);
        assert!((harmonic_number(10).unwrap() - 2.928_968_253_968_254).abs() < 1e-14);
        assert!(matches!(harmonic_number(0), Err(Error::Domain(_))));
        // Past the exact-fraction range.
        let big: f64 = (1..=500).rev().map(|i| 1.0 / i as f64).sum();
        assert!((harmonic_number(500).unwrap() - big).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_values() {
        let ln2 = std::f64::consts::LN_2;
        assert!((log_sum_exp(&[0.0, 0.0]).unwrap() - ln2).abs() < 1e-15);
        assert!((log_sum_exp(&[-1000.0, -1000.0]).unwrap() - (-1000.0 + ln2)).abs() < 1e-12);
        let direct = (1f64.exp() + 2f64.exp() + 3f64.exp()).ln();
        assert!((log_sum_exp(&[1.0, 2.0, 3.0]).unwrap() - direct).abs() < 1e-14);
        assert!((log_sum_exp(&[1.0, 2.0, 3.0]).unwrap() - 3.4076).abs() < 1e-4);
        assert!(log_sum_exp(&[700.0, 700.0]).unwrap().is_finite());
        assert!(matches!(log_sum_exp(&[]), Err(Error::Domain(_))));
    }

    #[test]
    fn seeded_streams_replay() {
        let a: Vec<u64> = (0..64).map({
            let mut r = RngSeed(42).rng();
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..64).map({
            let mut r = RngSeed(42).rng();
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(RngSeed(42).derive("p1"), RngSeed(42).derive("p2"));
        assert_eq!(RngSeed(42).derive("p1"), RngSeed(42).derive("p1"));
        assert_ne!(RngSeed(42).derive_index(0), RngSeed(42).derive_index(1));
    }
}
