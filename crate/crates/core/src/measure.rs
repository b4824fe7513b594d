//! Bernoulli and Markov measures on a coding shift.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::is_primitive;
use crate::systems::SymbolicCoding;

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureSpec {
    Bernoulli { p: Vec<f64> },
    Markov { q: Vec<Vec<f64>> },
}

/// A validated ergodic measure with its stationary vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicMeasure {
    spec: MeasureSpec,
    stationary: Vec<f64>,
}

fn check_probability_vector(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() || p.len() > 255 {
        return Err(Error::Argument(format!("{what} must have 1..=255 entries")));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Argument(format!("{what} has negative or non-finite entries: {p:?}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::Argument(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// Stationary vector `pi Q = pi`, `sum pi = 1` of a primitive stochastic matrix.
pub fn stationary_distribution(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let k = q.len();
    if k == 0 || q.iter().any(|r| r.len() != k) {
        return Err(Error::Argument("Markov matrix must be square and non-empty".into()));
    }
    for (i, row) in q.iter().enumerate() {
        check_probability_vector(row, &format!("row {i} of the Markov matrix"))?;
    }
    if !is_primitive(q) {
        return Err(Error::Structure("Markov matrix is not primitive".into()));
    }
    // (Q^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = q[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Structure("singular stationary system".into()))?;
    let pi: Vec<f64> = pi.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.iter().map(|v| v / s).collect();
    for j in 0..k {
        let lhs: f64 = (0..k).map(|i| pi[i] * q[i][j]).sum();
        if (lhs - pi[j]).abs() > SUM_TOL {
            return Err(Error::Precision(format!(
                "stationary residual {} exceeds {SUM_TOL}",
                (lhs - pi[j]).abs()
            )));
        }
    }
    Ok(pi)
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

impl ErgodicMeasure {
    pub fn new(spec: MeasureSpec) -> Result<Self> {
        let stationary = match &spec {
            MeasureSpec::Bernoulli { p } => {
                check_probability_vector(p, "Bernoulli probability vector")?;
                p.clone()
            }
            MeasureSpec::Markov { q } => stationary_distribution(q)?,
        };
        Ok(ErgodicMeasure { spec, stationary })
    }

    pub fn bernoulli(p: &[f64]) -> Result<Self> {
        Self::new(MeasureSpec::Bernoulli { p: p.to_vec() })
    }

    pub fn uniform(k: usize) -> Result<Self> {
        Self::bernoulli(&vec![1.0 / k as f64; k])
    }

    pub fn markov(q: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(MeasureSpec::Markov { q })
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn alphabet(&self) -> usize {
        self.stationary.len()
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn is_bernoulli(&self) -> bool {
        matches!(self.spec, MeasureSpec::Bernoulli { .. })
    }

    /// Bernoulli probability vector, if this is a Bernoulli measure.
    pub fn bernoulli_probs(&self) -> Option<&[f64]> {
        match &self.spec {
            MeasureSpec::Bernoulli { p } => Some(p),
            MeasureSpec::Markov { .. } => None,
        }
    }

    /// Transition probability `i -> j` (the `j` marginal for Bernoulli).
    pub fn transition(&self, i: u8, j: u8) -> f64 {
        match &self.spec {
            MeasureSpec::Bernoulli { p } => p[j as usize],
            MeasureSpec::Markov { q } => q[i as usize][j as usize],
        }
    }

    /// Metric entropy in nats.
    pub fn entropy(&self) -> f64 {
        match &self.spec {
            MeasureSpec::Bernoulli { p } => -p.iter().map(|&v| xlogx(v)).sum::<f64>(),
            MeasureSpec::Markov { q } => -self
                .stationary
                .iter()
                .zip(q)
                .map(|(&pi, row)| pi * row.iter().map(|&v| xlogx(v)).sum::<f64>())
                .sum::<f64>(),
        }
    }

    /// Checks that the measure lives on `coding`: same alphabet and every
    /// positive transition allowed.
    pub fn check_supported_on(&self, coding: &SymbolicCoding) -> Result<()> {
        if self.alphabet() != coding.alphabet {
            return Err(Error::Argument(format!(
                "measure alphabet {} differs from coding alphabet {}",
                self.alphabet(),
                coding.alphabet
            )));
        }
        let k = coding.alphabet as u8;
        for i in 0..k {
            for j in 0..k {
                let positive = self.stationary[i as usize] > 0.0 && self.transition(i, j) > 0.0;
                if positive && !coding.allowed(i, j) {
                    return Err(Error::Structure(format!(
                        "measure charges forbidden transition {i} -> {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Log of the mass of the cylinder `[word]`.
    pub fn cylinder_log_mass(&self, word: &[u8]) -> f64 {
        let Some((&first, rest)) = word.split_first() else {
            return 0.0;
        };
        let mut acc = self.stationary[first as usize].ln();
        let mut prev = first;
        for &s in rest {
            acc += self.transition(prev, s).ln();
            prev = s;
        }
        acc
    }

    /// Deterministic generator for sample `index` of a run seeded with `seed`.
    pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng
    }

    /// Draws a word of length `len` distributed according to the measure.
    pub fn sample_word<R: Rng>(&self, rng: &mut R, len: usize) -> Vec<u8> {
        let mut word = Vec::with_capacity(len);
        if len == 0 {
            return word;
        }
        let mut cur = draw(rng, &self.stationary);
        word.push(cur);
        for _ in 1..len {
            cur = match &self.spec {
                MeasureSpec::Bernoulli { p } => draw(rng, p),
                MeasureSpec::Markov { q } => draw(rng, &q[cur as usize]),
            };
            word.push(cur);
        }
        word
    }
}

fn draw<R: Rng>(rng: &mut R, probs: &[f64]) -> u8 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u8;
        }
    }
    // rounding in the cumulative sum: fall back to the last positive entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stationary_examples() {
        let b = ErgodicMeasure::bernoulli(&[0.7, 0.3]).unwrap();
        assert_eq!(b.stationary(), &[0.7, 0.3]);
        let pi = stationary_distribution(&[vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(pi[0], 5.0 / 6.0, epsilon = 1e-14);
        assert_abs_diff_eq!(pi[1], 1.0 / 6.0, epsilon = 1e-14);
        assert_eq!(stationary_distribution(&[vec![1.0]]).unwrap(), vec![1.0]);
    }

    #[test]
    fn non_primitive_markov_is_a_structure_error() {
        let err = stationary_distribution(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap_err();
        assert!(matches!(err, Error::Structure(_)));
    }

    #[test]
    fn invalid_probability_vectors() {
        assert!(ErgodicMeasure::bernoulli(&[0.5, 0.6]).is_err());
        assert!(ErgodicMeasure::bernoulli(&[1.2, -0.2]).is_err());
        assert!(ErgodicMeasure::markov(vec![vec![0.9, 0.2], vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(ErgodicMeasure::uniform(2).unwrap().entropy(), 2f64.ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(
            ErgodicMeasure::bernoulli(&[0.7, 0.3]).unwrap().entropy(),
            0.610864302054894,
            epsilon = 1e-12
        );
        let m = ErgodicMeasure::markov(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(m.entropy(), 0.386427007919531, epsilon = 1e-12);
    }

    #[test]
    fn bernoulli_entropy_is_maximal_at_uniform() {
        for k in 2..=4usize {
            let uniform = ErgodicMeasure::uniform(k).unwrap().entropy();
            let steps = 8;
            let mut grid = vec![vec![]];
            for _ in 0..k - 1 {
                grid = grid
                    .into_iter()
                    .flat_map(|g: Vec<usize>| (0..=steps).map(move |s| [g.clone(), vec![s]].concat()))
                    .collect();
            }
            for g in grid {
                let used: usize = g.iter().sum();
                if used > steps {
                    continue;
                }
                let mut p: Vec<f64> = g.iter().map(|&s| s as f64 / steps as f64).collect();
                p.push((steps - used) as f64 / steps as f64);
                let h = ErgodicMeasure::bernoulli(&p).unwrap().entropy();
                assert!(h <= uniform + 1e-12, "p={p:?} h={h} > {uniform}");
            }
        }
    }

    #[test]
    fn cylinder_masses_and_sampling_are_consistent() {
        let m = ErgodicMeasure::markov(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(m.cylinder_log_mass(&[0, 0, 1]).exp(), 5.0 / 6.0 * 0.9 * 0.1, epsilon = 1e-15);
        let mut rng = ErgodicMeasure::sample_rng(7, 0);
        let w = m.sample_word(&mut rng, 200_000);
        let zeros = w.iter().filter(|&&s| s == 0).count() as f64 / w.len() as f64;
        assert!((zeros - 5.0 / 6.0).abs() < 0.01, "{zeros}");
        let again = m.sample_word(&mut ErgodicMeasure::sample_rng(7, 0), 200_000);
        assert_eq!(w, again);
    }
}
