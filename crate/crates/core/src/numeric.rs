//! Small numeric kernels shared by the estimators: log-sum-exp, least-squares
//! lines, Perron roots of non-negative matrices, primitivity and log-binomials.

use crate::error::{Error, Result};

/// `log(sum(exp(x)))`, returning `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + s.ln()
}

/// Pairwise log-sum-exp. The reduction tree depends only on the slice length,
/// so the result is independent of how the inputs were produced.
pub fn log_sum_exp_tree(values: &[f64]) -> f64 {
    const LEAF: usize = 256;
    if values.len() <= LEAF {
        return log_sum_exp(values);
    }
    let mid = values.len() / 2;
    let (a, b) = rayon::join(
        || log_sum_exp_tree(&values[..mid]),
        || log_sum_exp_tree(&values[mid..]),
    );
    log_sum_exp(&[a, b])
}

/// Ordinary least-squares line through `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::Argument(format!(
            "fit_line: {} abscissae vs {} ordinates",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Argument("fit_line needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::Argument("fit_line: abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// True when the square 0/1 pattern of `matrix` (entries > 0) is primitive,
/// i.e. some power is strictly positive. Wielandt's bound `(k-1)^2 + 1`
/// limits the search.
pub fn is_primitive(matrix: &[Vec<f64>]) -> bool {
    let k = matrix.len();
    if k == 0 || matrix.iter().any(|row| row.len() != k) {
        return false;
    }
    let base: Vec<Vec<bool>> = matrix
        .iter()
        .map(|row| row.iter().map(|&v| v > 0.0).collect())
        .collect();
    let mut power = base.clone();
    let bound = (k - 1) * (k - 1) + 1;
    for _ in 0..bound {
        if power.iter().all(|row| row.iter().all(|&b| b)) {
            return true;
        }
        let mut next = vec![vec![false; k]; k];
        for i in 0..k {
            for m in 0..k {
                if power[i][m] {
                    for j in 0..k {
                        if base[m][j] {
                            next[i][j] = true;
                        }
                    }
                }
            }
        }
        power = next;
    }
    power.iter().all(|row| row.iter().all(|&b| b))
}

/// Perron root of a primitive non-negative square matrix by power iteration,
/// stopped when the Collatz-Wielandt bounds agree to `tol` (relative).
pub fn perron_root(matrix: &[Vec<f64>], tol: f64) -> Result<f64> {
    let k = matrix.len();
    if k == 0 || matrix.iter().any(|row| row.len() != k) {
        return Err(Error::Argument("perron_root needs a non-empty square matrix".into()));
    }
    if matrix.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Argument("perron_root needs finite non-negative entries".into()));
    }
    if !is_primitive(matrix) {
        return Err(Error::Structure("matrix is not primitive".into()));
    }
    let mut v = vec![1.0 / k as f64; k];
    let mut w = vec![0.0; k];
    for _ in 0..100_000 {
        for (i, row) in matrix.iter().enumerate() {
            w[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for i in 0..k {
            let ratio = w[i] / v[i];
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        if hi - lo <= tol * hi {
            return Ok(0.5 * (lo + hi));
        }
        let norm: f64 = w.iter().sum();
        for i in 0..k {
            v[i] = w[i] / norm;
        }
    }
    Err(Error::Precision("perron_root did not converge".into()))
}

/// `log(n choose k)` via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `log(n! / prod(c_i!))` for a count vector summing to `n`.
pub fn ln_multinomial(counts: &[u32]) -> f64 {
    let n: u64 = counts.iter().map(|&c| c as u64).sum();
    ln_factorial(n) - counts.iter().map(|&c| ln_factorial(c as u64)).sum::<f64>()
}

pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    if n <= 170 {
        let mut acc = 1.0_f64;
        for i in 2..=n {
            acc *= i as f64;
        }
        return acc.ln();
    }
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

/// Exact binomial coefficient when it fits in a `u128`.
pub fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
    }
    Some(acc)
}

/// Exact multinomial coefficient when it fits in a `u128`.
pub fn multinomial_u128(counts: &[u32]) -> Option<u128> {
    let mut remaining: u64 = counts.iter().map(|&c| c as u64).sum();
    let mut acc: u128 = 1;
    for &c in counts {
        acc = acc.checked_mul(binomial_u128(remaining, c as u64)?)?;
        remaining -= c as u64;
    }
    Some(acc)
}

/// Every count vector of length `k` summing to `n`, in lexicographically
/// decreasing order of the first coordinate.
pub fn compositions(n: u32, k: usize) -> Vec<Vec<u32>> {
    fn rec(rem: u32, k: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == 1 {
            prefix.push(rem);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for c in (0..=rem).rev() {
            prefix.push(c);
            rec(rem - c, k - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if k == 0 {
        return out;
    }
    rec(n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Number of count vectors of length `k` summing to `n`, saturating.
pub fn composition_count(n: u32, k: usize) -> u128 {
    if k == 0 {
        return 0;
    }
    binomial_u128(n as u64 + k as u64 - 1, k as u64 - 1).unwrap_or(u128::MAX)
}

/// Bisection for a root of a decreasing function on `[lo, hi]`.
/// Returns the midpoint of the final bracket.
pub fn bisect_decreasing<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= xtol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
