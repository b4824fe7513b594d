//! Dimension estimators: Lyapunov dimension, Bowen roots, the
//! Ledrappier-Young formula, Carathéodory singular dimension, box counting
//! and local dimension.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub mod boxcount;
pub mod caratheodory;
pub mod local;

pub use boxcount::{box_counts, box_dimension, cylinder_anchor_cloud, log_spaced, BoxDimension};
pub use caratheodory::{caratheodory_dimension, CaratheodoryOptions, SetSpec};
pub use local::{local_dimension, LocalOptions};

/// Tolerance for the tie `lambda_m0 + ... = h` in the Lyapunov dimension.
const TIE_TOL: f64 = 1e-12;
/// Slack allowed above `sum(lambda)` before `h` is inconsistent.
const RUELLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionKind {
    Lyapunov,
    Caratheodory,
    BoxLower,
    BoxUpper,
    Local,
    LedrappierYoung,
    BowenRoot,
    Horseshoe,
}

impl DimensionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DimensionKind::Lyapunov => "lyapunov",
            DimensionKind::Caratheodory => "caratheodory",
            DimensionKind::BoxLower => "box-lower",
            DimensionKind::BoxUpper => "box-upper",
            DimensionKind::Local => "local",
            DimensionKind::LedrappierYoung => "ledrappier-young",
            DimensionKind::BowenRoot => "bowen-root",
            DimensionKind::Horseshoe => "horseshoe",
        }
    }
}

/// A dimension value with its estimator diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionReport {
    pub kind: DimensionKind,
    pub value: f64,
    pub diagnostics: BTreeMap<String, Value>,
}

impl DimensionReport {
    pub fn new(kind: DimensionKind, value: f64) -> Self {
        DimensionReport {
            kind,
            value,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Serialize) -> Self {
        self.diagnostics
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }
}

/// Lyapunov dimension of a measure with entropy `h` and positive exponents
/// `lambda_1 >= ... >= lambda_m0`.
pub fn lyapunov_dimension(h: f64, exponents: &[f64]) -> Result<f64> {
    if exponents.is_empty() {
        return Err(Error::Argument("no exponents given".into()));
    }
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Argument(format!("entropy {h} must be finite and >= 0")));
    }
    if let Some(l) = exponents.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Argument(format!("exponent {l} is not positive")));
    }
    if exponents.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::Argument(format!("exponents {exponents:?} are not sorted descending")));
    }
    let total: f64 = exponents.iter().sum();
    if h > total + RUELLE_TOL {
        return Err(Error::Inconsistent(format!(
            "entropy {h} exceeds the exponent sum {total}"
        )));
    }
    let m0 = exponents.len();
    // smallest exponent first
    let rev: Vec<f64> = exponents.iter().rev().copied().collect();
    if h < rev[0] {
        return Ok(h / rev[0]);
    }
    let mut ell = 0;
    let mut acc = 0.0;
    while ell < m0 && acc + rev[ell] <= h + TIE_TOL {
        acc += rev[ell];
        ell += 1;
    }
    if ell == m0 {
        return Ok(m0 as f64);
    }
    Ok(ell as f64 + ((h - acc) / rev[ell]).max(0.0))
}

/// `h / lambda_u - h / lambda_s` for one positive and one negative exponent.
pub fn ledrappier_young(h: f64, lambda_u: f64, lambda_s: f64) -> Result<f64> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::Argument(format!("entropy {h} must be finite and >= 0")));
    }
    if !(lambda_u > 0.0 && lambda_u.is_finite()) {
        return Err(Error::Argument(format!("unstable exponent {lambda_u} must be positive")));
    }
    if !(lambda_s < 0.0 && lambda_s.is_finite()) {
        return Err(Error::Argument(format!("stable exponent {lambda_s} must be negative")));
    }
    Ok(h / lambda_u - h / lambda_s)
}

/// Root of a decreasing pressure function with its final bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BowenRoot {
    pub root: f64,
    pub bracket: [f64; 2],
    pub values: [f64; 2],
    pub evaluations: usize,
}

/// Root of `pressure` on `[0, m0]` by bisection to width `tol`. Endpoint
/// values within `tol` of zero count as roots at that endpoint.
pub fn bowen_root<F>(mut pressure: F, m0: f64, tol: f64) -> Result<BowenRoot>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(tol > 0.0) || !(m0 > 0.0) {
        return Err(Error::Argument(format!("bowen_root needs tol > 0 and m0 > 0, got {tol}, {m0}")));
    }
    let (mut lo, mut hi) = (0.0, m0);
    let (mut f_lo, mut f_hi) = (pressure(lo)?, pressure(hi)?);
    let mut evaluations = 2;
    if !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::Numerical {
            step: 0,
            what: "pressure is not finite at an endpoint".into(),
        });
    }
    if f_lo < -tol || f_hi > tol {
        return Err(Error::Bracket { lo, hi, f_lo, f_hi });
    }
    let done = |root: f64, lo: f64, hi: f64, f_lo: f64, f_hi: f64, evaluations: usize| BowenRoot {
        root,
        bracket: [lo, hi],
        values: [f_lo, f_hi],
        evaluations,
    };
    if f_hi >= 0.0 {
        return Ok(done(m0, lo, hi, f_lo, f_hi, evaluations));
    }
    if f_lo <= 0.0 {
        return Ok(done(0.0, lo, hi, f_lo, f_hi, evaluations));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f = pressure(mid)?;
        evaluations += 1;
        if !f.is_finite() {
            return Err(Error::Numerical {
                step: evaluations,
                what: format!("pressure({mid}) = {f}"),
            });
        }
        if f > 0.0 {
            lo = mid;
            f_lo = f;
        } else {
            hi = mid;
            f_hi = f;
        }
    }
    // linear interpolation inside the final bracket
    let root = if f_lo > f_hi { lo + (hi - lo) * f_lo / (f_lo - f_hi) } else { 0.5 * (lo + hi) };
    Ok(done(root, lo, hi, f_lo, f_hi, evaluations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lyapunov_dimension_examples() {
        let (l2, l3) = (2f64.ln(), 3f64.ln());
        assert_eq!(lyapunov_dimension(0.0, &[l3, l2]).unwrap(), 0.0);
        assert_abs_diff_eq!(lyapunov_dimension(l2, &[l3]).unwrap(), 0.6309297535714574, epsilon = 1e-12);
        assert_abs_diff_eq!(lyapunov_dimension(0.9, &[l3, l2]).unwrap(), 1.188286, epsilon = 1e-6);
        assert_eq!(lyapunov_dimension(6f64.ln(), &[l3, l2]).unwrap(), 2.0);
    }

    #[test]
    fn lyapunov_dimension_errors() {
        assert!(matches!(lyapunov_dimension(0.5, &[1.0, 0.0]), Err(Error::Argument(_))));
        assert!(matches!(lyapunov_dimension(0.5, &[1.0, -0.2]), Err(Error::Argument(_))));
        assert!(matches!(lyapunov_dimension(2.0, &[1.0, 0.5]), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn ledrappier_young_examples() {
        let (l2, l3, l4) = (2f64.ln(), 3f64.ln(), 4f64.ln());
        assert_abs_diff_eq!(ledrappier_young(l2, l3, -l4).unwrap(), 1.1309297535714573, epsilon = 1e-12);
        assert_eq!(ledrappier_young(0.0, l3, -l4).unwrap(), 0.0);
        assert_abs_diff_eq!(
            ledrappier_young(0.6108643020548935, l3, -l4).unwrap(),
            0.9966780994917354,
            epsilon = 1e-12
        );
        assert!(ledrappier_young(l2, -l3, -l4).is_err());
        assert!(ledrappier_young(l2, l3, l4).is_err());
    }

    #[test]
    fn bowen_root_examples() {
        let (l2, l3) = (2f64.ln(), 3f64.ln());
        let r = bowen_root(|t| Ok(l2 - t * l3), 1.0, 1e-9).unwrap();
        assert_abs_diff_eq!(r.root, l2 / l3, epsilon = 1e-6);
        let r = bowen_root(|t| Ok(1.0 - t), 1.0, 1e-9).unwrap();
        assert_abs_diff_eq!(r.root, 1.0, epsilon = 1e-9);
        let piecewise = |t: f64| Ok(if t <= 1.0 { 6f64.ln() - t * l2 } else { (2.0 - t) * l3 });
        assert_eq!(bowen_root(piecewise, 2.0, 1e-9).unwrap().root, 2.0);
        assert!(matches!(bowen_root(|t| Ok(1.0 + t), 1.0, 1e-9), Err(Error::Bracket { .. })));
    }
}
