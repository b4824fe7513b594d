//! Singular values of the derivative cocycle `D_x f^n`, singular-valued
//! potentials and Lyapunov exponents.
//!
//! Products are accumulated in blocks of [`REORTHO_BLOCK`] steps and
//! re-orthogonalized by a thin QR factorization. The R factors are chained
//! in normalized form with a separate log-scale, so `n` in the hundreds of
//! thousands neither overflows nor loses the smaller singular value (which
//! is recovered from the accumulated log-determinant).

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::ErgodicMeasure;
use crate::numeric::mean_and_stderr;
use crate::systems::{Jacobian, ModelSystem, Point};

/// Steps between QR re-orthogonalizations.
pub const REORTHO_BLOCK: usize = 10;

/// Symbols of exact word arithmetic used to place a point on a coded orbit.
pub const ORBIT_RESOLUTION: usize = 48;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CocycleResult {
    pub n: usize,
    /// `log alpha_1 >= ... >= log alpha_m0`.
    pub log_singular_values: Vec<f64>,
    pub reorthogonalizations: usize,
}

/// Accumulates a product of Jacobians `J_{n-1} ... J_0`.
#[derive(Debug, Clone)]
pub struct CocycleAccumulator {
    dim: usize,
    steps: usize,
    // 1-D: running log|product|
    log_scalar: f64,
    // 2-D: current block product B = J_k ... J_j Q
    block: Matrix2<f64>,
    // normalized chain of R factors and its log-scale
    chain: Matrix2<f64>,
    chain_log_scale: f64,
    log_det: f64,
    reorthogonalizations: usize,
}

impl CocycleAccumulator {
    pub fn new(dim: usize) -> Self {
        CocycleAccumulator {
            dim,
            steps: 0,
            log_scalar: 0.0,
            block: Matrix2::identity(),
            chain: Matrix2::identity(),
            chain_log_scale: 0.0,
            log_det: 0.0,
            reorthogonalizations: 0,
        }
    }

    pub fn push(&mut self, jac: &Jacobian) -> Result<()> {
        let step = self.steps;
        match (self.dim, jac) {
            (1, Jacobian::Scalar(v)) => {
                let l = v.abs().ln();
                if !l.is_finite() {
                    return Err(Error::Numerical {
                        step,
                        what: format!("log|f'| = {l}"),
                    });
                }
                self.log_scalar += l;
            }
            (2, Jacobian::Planar(m)) => {
                self.block = m * self.block;
                if !self.block.iter().all(|v| v.is_finite()) {
                    return Err(Error::Numerical {
                        step,
                        what: "non-finite block product".into(),
                    });
                }
                if (step + 1).is_multiple_of(REORTHO_BLOCK) {
                    self.reorthogonalize(step)?;
                }
            }
            _ => {
                return Err(Error::Argument(format!(
                    "jacobian of dimension {} pushed into a {}-dimensional cocycle",
                    jac.dim(),
                    self.dim
                )))
            }
        }
        self.steps += 1;
        Ok(())
    }

    fn reorthogonalize(&mut self, step: usize) -> Result<()> {
        let qr = self.block.qr();
        let q = qr.q();
        let r = qr.r();
        let (r11, r22) = (r[(0, 0)].abs(), r[(1, 1)].abs());
        if !(r11 > 0.0 && r22 > 0.0) {
            return Err(Error::Numerical {
                step,
                what: "singular derivative product".into(),
            });
        }
        self.log_det += r11.ln() + r22.ln();
        let mut chain = r * self.chain;
        let scale = chain.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Numerical {
                step,
                what: "degenerate R-factor chain".into(),
            });
        }
        chain /= scale;
        self.chain = chain;
        self.chain_log_scale += scale.ln();
        self.block = q;
        self.reorthogonalizations += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<CocycleResult> {
        let n = self.steps;
        let log_singular_values = match self.dim {
            1 => vec![self.log_scalar],
            _ => {
                if !self.steps.is_multiple_of(REORTHO_BLOCK) || self.steps == 0 {
                    self.reorthogonalize(self.steps)?;
                }
                let t = self.chain;
                let fro2 = t.iter().map(|v| v * v).sum::<f64>();
                let det = t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)];
                let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
                let s1 = ((fro2 + disc) / 2.0).sqrt();
                let l1 = s1.ln() + self.chain_log_scale;
                let l2 = self.log_det - l1;
                vec![l1, l2]
            }
        };
        if log_singular_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step: n,
                what: "non-finite log singular value".into(),
            });
        }
        Ok(CocycleResult {
            n,
            log_singular_values,
            reorthogonalizations: self.reorthogonalizations,
        })
    }
}

/// Log singular values of `D_x f^n` along the forward orbit of `x`.
pub fn orbit_singular_values(system: &ModelSystem, x: &Point, n: usize) -> Result<CocycleResult> {
    if n == 0 {
        return Err(Error::Argument("cocycle length n must be >= 1".into()));
    }
    let orbit = system.orbit(x, n - 1)?;
    let mut acc = CocycleAccumulator::new(system.dim());
    for p in &orbit {
        acc.push(&system.jacobian(p)?)?;
    }
    acc.finish()
}

/// Log singular values of the cocycle along the coded orbit of `word`
/// over its first `n` symbols.
pub fn word_singular_values(system: &ModelSystem, word: &[u8], n: usize) -> Result<CocycleResult> {
    if n == 0 {
        return Err(Error::Argument("cocycle length n must be >= 1".into()));
    }
    if n > word.len() {
        return Err(Error::Argument(format!("word of length {} shorter than n = {n}", word.len())));
    }
    let mut acc = CocycleAccumulator::new(system.dim());
    if system.branch_log_scales().is_some() {
        for &s in &word[..n] {
            let jac = system
                .symbol_jacobian(s)
                .ok_or_else(|| Error::Argument(format!("symbol {s} outside alphabet")))?;
            acc.push(&jac)?;
        }
    } else {
        for k in 0..n {
            let end = (k + ORBIT_RESOLUTION).min(word.len());
            let p = system.anchor(&word[k..end])?;
            acc.push(&system.jacobian(&p)?)?;
        }
    }
    acc.finish()
}

/// Direct product followed by a dense SVD. Test oracle for small `n` only.
pub fn direct_log_singular_values(jacobians: &[Jacobian]) -> Result<Vec<f64>> {
    let Some(first) = jacobians.first() else {
        return Err(Error::Argument("empty product".into()));
    };
    let mut prod = nalgebra::DMatrix::<f64>::identity(first.dim(), first.dim());
    for j in jacobians {
        prod = j.to_dmatrix() * prod;
    }
    let mut sv: Vec<f64> = prod.singular_values().iter().map(|v| v.ln()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// `phi^t` from log singular values sorted descending: the sum of the
/// `floor(t)` smallest plus the fractional part times the next one.
pub fn svp_from_log_singular_values(log_sv: &[f64], t: f64) -> Result<f64> {
    let m0 = log_sv.len();
    if !(0.0..=m0 as f64).contains(&t) {
        return Err(Error::Range {
            value: t,
            lo: 0.0,
            hi: m0 as f64,
        });
    }
    let k = t.floor() as usize;
    let mut acc: f64 = log_sv[m0 - k..].iter().sum();
    if k < m0 {
        acc += (t - k as f64) * log_sv[m0 - k - 1];
    }
    Ok(acc)
}

/// The sub-additive family `Phi_f(t) = {-phi^t(., f^n)}` for one `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularValuedPotential {
    t: f64,
    dim: usize,
}

impl SingularValuedPotential {
    pub fn new(system: &ModelSystem, t: f64) -> Result<Self> {
        let dim = system.dim();
        if !(0.0..=dim as f64).contains(&t) {
            return Err(Error::Range {
                value: t,
                lo: 0.0,
                hi: dim as f64,
            });
        }
        Ok(SingularValuedPotential { t, dim })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `phi^t` applied to precomputed log singular values.
    pub fn phi(&self, log_sv: &[f64]) -> f64 {
        svp_from_log_singular_values(log_sv, self.t).expect("t validated at construction")
    }
}

/// `phi^t(x, f^n)`.
pub fn svp(system: &ModelSystem, x: &Point, n: usize, t: f64) -> Result<f64> {
    let pot = SingularValuedPotential::new(system, t)?;
    let res = orbit_singular_values(system, x, n)?;
    Ok(pot.phi(&res.log_singular_values))
}

/// Monte-Carlo exponent estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentEstimate {
    /// `lambda_1 >= ... >= lambda_m0`.
    pub exponents: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n: usize,
    pub samples: usize,
}

/// Lyapunov exponents by averaging `(1/n) log alpha_i` over `samples`
/// measure-distributed coded orbits. Sample `i` draws from a generator
/// seeded by `(seed, i)`, so results do not depend on the thread count.
pub fn lyapunov_exponents(
    system: &ModelSystem,
    measure: &ErgodicMeasure,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<ExponentEstimate> {
    if samples == 0 {
        return Err(Error::Argument("lyapunov_exponents needs at least one sample".into()));
    }
    if n == 0 {
        return Err(Error::Argument("lyapunov_exponents needs n >= 1".into()));
    }
    measure.check_supported_on(&system.coding())?;
    let extra = if system.branch_log_scales().is_some() { 0 } else { ORBIT_RESOLUTION };
    let rows: Vec<Vec<f64>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ErgodicMeasure::sample_rng(seed, i);
            let word = measure.sample_word(&mut rng, n + extra);
            let res = word_singular_values(system, &word, n)?;
            Ok(res.log_singular_values.iter().map(|v| v / n as f64).collect())
        })
        .collect::<Result<_>>()?;
    let dim = system.dim();
    let mut exponents = Vec::with_capacity(dim);
    let mut std_errors = Vec::with_capacity(dim);
    for c in 0..dim {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        let (m, se) = mean_and_stderr(&col);
        exponents.push(m);
        std_errors.push(se);
    }
    Ok(ExponentEstimate {
        exponents,
        std_errors,
        n,
        samples,
    })
}

/// Closed-form exponents for systems whose branches are affine with
/// diagonal derivative: the stationary averages of the per-coordinate
/// log-scales, sorted descending.
pub fn exact_exponents(system: &ModelSystem, measure: &ErgodicMeasure) -> Option<Vec<f64>> {
    let scales = system.branch_log_scales()?;
    if scales.len() != measure.alphabet() {
        return None;
    }
    let pi = measure.stationary();
    let dim = system.dim();
    let mut lam: Vec<f64> = (0..dim)
        .map(|c| scales.iter().zip(pi).map(|(s, p)| p * s[c]).sum())
        .collect();
    lam.sort_by(|a, b| b.total_cmp(a));
    Some(lam)
}

/// Closed form when available, otherwise Monte-Carlo.
pub fn exponents_or_estimate(
    system: &ModelSystem,
    measure: &ErgodicMeasure,
    n: usize,
    samples: usize,
    seed: u64,
) -> Result<ExponentEstimate> {
    match exact_exponents(system, measure) {
        Some(exponents) => Ok(ExponentEstimate {
            std_errors: vec![0.0; exponents.len()],
            exponents,
            n: 0,
            samples: 0,
        }),
        None => lyapunov_exponents(system, measure, n, samples, seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diagonal_products_are_exact() {
        let torus = catalog::torus_2_3();
        let r = orbit_singular_values(&torus, &[0.3, 0.7], 4).unwrap();
        assert_abs_diff_eq!(r.log_singular_values[0], 4.0 * 3f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(r.log_singular_values[1], 4.0 * 2f64.ln(), epsilon = 1e-13);
        let hs = catalog::horseshoe_3_quarter();
        let r = orbit_singular_values(&hs, &[0.05, 0.5], 2).unwrap();
        assert_abs_diff_eq!(r.log_singular_values[0], 2.0 * 3f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(r.log_singular_values[1], -2.0 * 4f64.ln(), epsilon = 1e-13);
    }

    #[test]
    fn scalar_cocycle_matches_direct_product() {
        let sys = catalog::perturbed_circle();
        let x = [0.123456, 0.0];
        let r = orbit_singular_values(&sys, &x, 20).unwrap();
        let orbit = sys.orbit(&x, 19).unwrap();
        let direct: f64 = orbit
            .iter()
            .map(|p| match sys.jacobian(p).unwrap() {
                Jacobian::Scalar(v) => v.abs(),
                _ => unreachable!(),
            })
            .product::<f64>()
            .ln();
        assert_abs_diff_eq!(r.log_singular_values[0], direct, epsilon = 1e-10);
    }

    #[test]
    fn long_products_do_not_overflow() {
        let torus = catalog::torus_2_3();
        let r = orbit_singular_values(&torus, &[0.1, 0.2], 100_000).unwrap();
        assert_abs_diff_eq!(r.log_singular_values[0] / 1e5, 3f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(r.log_singular_values[1] / 1e5, 2f64.ln(), epsilon = 1e-12);
        assert_eq!(r.reorthogonalizations, 10_000);
    }

    #[test]
    fn qr_chain_matches_svd_for_rotating_products() {
        // Non-commuting products exercise the off-diagonal part of the chain.
        let mats = [
            Matrix2::new(2.0, 1.0, 0.0, 3.0),
            Matrix2::new(1.5, 0.0, 0.7, 2.5),
            Matrix2::new(0.4, 2.0, -1.1, 1.3),
        ];
        let jacs: Vec<Jacobian> = (0..30).map(|i| Jacobian::Planar(mats[i % 3])).collect();
        let mut acc = CocycleAccumulator::new(2);
        for j in &jacs {
            acc.push(j).unwrap();
        }
        let r = acc.finish().unwrap();
        let d = direct_log_singular_values(&jacs).unwrap();
        assert_abs_diff_eq!(r.log_singular_values[0], d[0], epsilon = 1e-8);
        assert_abs_diff_eq!(r.log_singular_values[1], d[1], epsilon = 1e-8);
    }

    #[test]
    fn svp_examples() {
        let torus = catalog::torus_2_3();
        assert_abs_diff_eq!(svp(&torus, &[0.2, 0.4], 1, 1.5).unwrap(), 1.2424533248940002, epsilon = 1e-12);
        assert_eq!(svp(&torus, &[0.2, 0.4], 1, 0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(svp(&torus, &[0.2, 0.4], 1, 2.0).unwrap(), 6f64.ln(), epsilon = 1e-12);
        assert!(matches!(svp(&torus, &[0.2, 0.4], 1, 2.5), Err(Error::Range { .. })));
        assert!(matches!(svp(&torus, &[0.2, 0.4], 1, -0.1), Err(Error::Range { .. })));
    }

    #[test]
    fn svp_integer_t_uses_no_fractional_term() {
        // at t = m0 the index m0 - floor(t) = 0 is never touched
        assert_eq!(svp_from_log_singular_values(&[5.0, 1.0], 2.0).unwrap(), 6.0);
        assert_eq!(svp_from_log_singular_values(&[5.0, 1.0], 1.0).unwrap(), 1.0);
        assert_eq!(svp_from_log_singular_values(&[5.0], 1.0).unwrap(), 5.0);
    }

    #[test]
    fn exponent_examples() {
        let doubling = catalog::doubling();
        let leb = ErgodicMeasure::uniform(2).unwrap();
        let e = lyapunov_exponents(&doubling, &leb, 100, 100, 1).unwrap();
        assert_abs_diff_eq!(e.exponents[0], 2f64.ln(), epsilon = 1e-13);
        let torus = catalog::torus_2_3();
        let m = ErgodicMeasure::bernoulli(&[0.3, 0.2, 0.15, 0.15, 0.1, 0.1]).unwrap();
        let e = lyapunov_exponents(&torus, &m, 50, 10, 2).unwrap();
        assert_abs_diff_eq!(e.exponents[0], 3f64.ln(), epsilon = 1e-13);
        assert_abs_diff_eq!(e.exponents[1], 2f64.ln(), epsilon = 1e-13);
        let hs = catalog::horseshoe_3_quarter();
        let b = ErgodicMeasure::bernoulli(&[0.7, 0.3]).unwrap();
        let e = lyapunov_exponents(&hs, &b, 200, 50, 3).unwrap();
        assert!((e.exponents[0] - 3f64.ln()).abs() <= 3.0 * e.std_errors[0] + 1e-12);
        assert!((e.exponents[1] + 4f64.ln()).abs() <= 3.0 * e.std_errors[1] + 1e-12);
        assert!(lyapunov_exponents(&hs, &b, 10, 0, 3).is_err());
    }

    #[test]
    fn perturbed_circle_exponent_is_above_expansion_floor() {
        let sys = catalog::perturbed_circle();
        let m = ErgodicMeasure::uniform(2).unwrap();
        let e = lyapunov_exponents(&sys, &m, 500, 40, 11).unwrap();
        let (kmin, kmax) = sys.expansion_bounds();
        assert!(e.exponents[0] > kmin.ln() && e.exponents[0] < kmax.ln());
        assert!(exact_exponents(&sys, &m).is_none());
    }
}
