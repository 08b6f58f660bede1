//! Reference implementations used only by tests. None of them call into the
//! library's numerical or text routines.

#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// LCS by enumerating every subsequence of the shorter list.
pub fn brute_lcs(a: &[String], b: &[String]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16, "brute-force LCS limited to short inputs");
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let ones = mask.count_ones() as usize;
        if ones <= best {
            continue;
        }
        let picked: Vec<&String> = (0..short.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &short[i])
            .collect();
        let mut it = long.iter();
        if picked.iter().all(|p| it.any(|x| x == *p)) {
            best = ones;
        }
    }
    best
}

/// LCS by top-down recursion with a memo table.
pub fn memo_lcs(a: &[String], b: &[String]) -> usize {
    fn go(a: &[String], b: &[String], i: usize, j: usize, memo: &mut Vec<Vec<Option<usize>>>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len()]; a.len()];
    go(a, b, 0, 0, &mut memo)
}

pub fn rouge_oracle(candidate: &[String], reference: &[String]) -> f64 {
    let l = brute_lcs(candidate, reference);
    if l == 0 {
        return 0.0;
    }
    // F1 as 2l / (|c| + |r|).
    2.0 * l as f64 / (candidate.len() + reference.len()) as f64
}

fn ln_factorials(n: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    out.push(0.0);
    let mut acc = 0.0f64;
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// `I_x(a, b)` for integer shapes through the binomial tail
/// `P(Binomial(a + b - 1, x) >= a)`.
pub fn beta_cdf_binomial(x: f64, a: u64, b: u64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let n = a + b - 1;
    let lf = ln_factorials(n);
    let (lx, l1x) = (x.ln(), (-x).ln_1p());
    let term = |k: u64| (lf[n as usize] - lf[k as usize] - lf[(n - k) as usize] + k as f64 * lx + (n - k) as f64 * l1x).exp();
    // Sum the smaller tail for accuracy.
    let mode = ((n as f64 + 1.0) * x).floor() as u64;
    if a > mode {
        (a..=n).map(term).sum::<f64>().min(1.0)
    } else {
        (1.0 - (0..a).map(term).sum::<f64>()).max(0.0)
    }
}

/// `I_x(a, b)` by composite Simpson quadrature of the Beta density.
pub fn beta_cdf_simpson(x: f64, a: u64, b: u64, intervals: usize) -> f64 {
    let lf = ln_factorials(a + b);
    let ln_beta = lf[(a - 1) as usize] + lf[(b - 1) as usize] - lf[(a + b - 1) as usize];
    let density = |t: f64| {
        if t <= 0.0 {
            return if a == 1 { (-ln_beta).exp() } else { 0.0 };
        }
        if t >= 1.0 {
            return if b == 1 { (-ln_beta).exp() } else { 0.0 };
        }
        ((a - 1) as f64 * t.ln() + (b - 1) as f64 * (1.0 - t).ln() - ln_beta).exp()
    };
    let n = intervals + intervals % 2;
    let h = x / n as f64;
    let mut s = density(0.0) + density(x);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * density(i as f64 * h);
    }
    s * h / 3.0
}

/// Oracle for the calibration-size condition, returning per-rank CDF values
/// (`None` where `a_j = 0`) and the overall verdict.
pub fn size_condition_oracle(n: usize, alpha: f64, epsilon: f64, delta: f64, k: usize) -> (Vec<Option<f64>>, bool) {
    let h: f64 = (1..=k).map(|i| 1.0 / i as f64).sum();
    let level = 1.0 - delta / (k * k) as f64;
    let total = (n + 1) as u64;
    let mut cdfs = Vec::new();
    let mut ok = true;
    for j in 1..=k {
        let a = (total as f64 * alpha / ((1.0 + epsilon) * h) * j as f64 / k as f64).floor() as u64;
        if a == 0 {
            cdfs.push(None);
            ok = false;
            continue;
        }
        let x = ((1.0 + epsilon) * a as f64 / total as f64).min(1.0);
        let v = beta_cdf_binomial(x, a, total - a);
        ok &= v >= level;
        cdfs.push(Some(v));
    }
    (cdfs, ok)
}

fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    det
}

fn char_poly(a: &[Vec<f64>], lambda: f64) -> f64 {
    let shifted = a
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().map(|(j, &v)| if i == j { v - lambda } else { v }).collect())
        .collect();
    determinant(shifted)
}

/// Eigenvalues of a symmetric matrix with distinct spectrum, as sign changes of
/// `det(A - lambda I)` refined by bisection. Returns `None` if fewer than `n`
/// roots were isolated.
pub fn eigenvalues_by_charpoly(a: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = a.len();
    let radius = a
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum::<f64>())
        .collect::<Vec<_>>();
    let lo = (0..n).map(|i| a[i][i] - radius[i]).fold(f64::INFINITY, f64::min) - 1.0;
    let hi = (0..n).map(|i| a[i][i] + radius[i]).fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let steps = 200_000;
    let mut roots = Vec::new();
    let mut prev_x = lo;
    let mut prev_f = char_poly(a, lo);
    for s in 1..=steps {
        let x = lo + (hi - lo) * s as f64 / steps as f64;
        let f = char_poly(a, x);
        if f == 0.0 {
            roots.push(x);
        } else if prev_f != 0.0 && (f < 0.0) != (prev_f < 0.0) {
            let (mut l, mut r, mut fl) = (prev_x, x, prev_f);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                let fm = char_poly(a, mid);
                if (fm < 0.0) == (fl < 0.0) {
                    l = mid;
                    fl = fm;
                } else {
                    r = mid;
                }
            }
            roots.push(0.5 * (l + r));
        }
        prev_x = x;
        prev_f = f;
    }
    (roots.len() == n).then_some(roots)
}

/// EigV computed from scratch: build `I - D^{-1/2} W D^{-1/2}` and sum
/// `max(0, 1 - lambda)` over its spectrum.
pub fn eigv_oracle(w: &[Vec<f64>]) -> Option<f64> {
    let m = w.len();
    let d: Vec<f64> = w.iter().map(|row| row.iter().sum()).collect();
    let lap: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let v = w[i][j] / (d[i] * d[j]).sqrt();
                    if i == j {
                        1.0 - v
                    } else {
                        -v
                    }
                })
                .collect()
        })
        .collect();
    eigenvalues_by_charpoly(&lap).map(|ev| ev.iter().map(|l| (1.0 - l).max(0.0)).sum())
}

/// AUROC by enumerating every (null, alt) pair, as an exact fraction.
pub fn auroc_pairs(nulls: &[f64], alts: &[f64]) -> f64 {
    let mut doubled: u64 = 0;
    for &a in alts {
        for &n in nulls {
            doubled += if a > n {
                2
            } else if a == n {
                1
            } else {
                0
            };
        }
    }
    doubled as f64 / (2 * nulls.len() * alts.len()) as f64
}

pub fn words(tokens: &[&str]) -> Vec<String> {
    tokens.iter().map(|s| s.to_string()).collect()
}
