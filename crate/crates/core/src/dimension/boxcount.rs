//! Box counting on grids anchored at the origin.

use rayon::prelude::*;
use serde::Serialize;

use super::{DimensionKind, DimensionReport};
use crate::error::{Error, Result};
use crate::numeric::fit_line;
use crate::systems::{ModelSystem, Point};

/// Minimum span of a `delta` range, in decades.
pub const MIN_DECADES: f64 = 2.0;

/// `count` values from `lo` to `hi`, equally spaced in `log`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Number of occupied cells `floor(x / delta)` for each `delta`.
pub fn box_counts(points: &[Point], dim: usize, deltas: &[f64]) -> Vec<usize> {
    deltas
        .par_iter()
        .map(|&delta| {
            let mut cells: Vec<(i64, i64)> = points
                .iter()
                .map(|p| {
                    let cx = (p[0] / delta).floor() as i64;
                    let cy = if dim == 2 { (p[1] / delta).floor() as i64 } else { 0 };
                    (cx, cy)
                })
                .collect();
            cells.par_sort_unstable();
            cells.dedup();
            cells.len()
        })
        .collect()
}

/// Lower and upper box-dimension estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDimension {
    pub lower: DimensionReport,
    pub upper: DimensionReport,
    /// Slope of the fit over the full `delta` range.
    pub slope: f64,
    pub residual: f64,
    pub deltas: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Box dimension of a point cloud from counts at `deltas`. Lower and upper
/// values are the extreme least-squares slopes of `log N` against
/// `-log delta` over sliding windows spanning `window_decades`.
pub fn box_dimension(points: &[Point], dim: usize, deltas: &[f64], window_decades: f64) -> Result<BoxDimension> {
    if points.is_empty() {
        return Err(Error::Argument("box counting needs a non-empty point cloud".into()));
    }
    if deltas.len() < 3 {
        return Err(Error::Argument("box counting needs at least three deltas".into()));
    }
    if deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
        return Err(Error::Argument(format!("deltas {deltas:?} must be positive")));
    }
    let mut deltas = deltas.to_vec();
    deltas.sort_by(|a, b| b.total_cmp(a));
    deltas.dedup();
    let span = (deltas[0] / deltas[deltas.len() - 1]).log10();
    if span < MIN_DECADES - 1e-9 {
        return Err(Error::Argument(format!(
            "delta range spans {span:.3} decades; at least {MIN_DECADES} needed"
        )));
    }
    if !(window_decades > 0.0) || window_decades > span + 1e-9 {
        return Err(Error::Argument(format!(
            "window of {window_decades} decades does not fit in a {span:.3}-decade range"
        )));
    }
    let counts = box_counts(points, dim, &deltas);
    let x: Vec<f64> = deltas.iter().map(|d| -d.ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let full = fit_line(&x, &y)?;

    let mut windows = Vec::new();
    for i in 0..deltas.len() {
        let end = (i..deltas.len()).find(|&j| (deltas[i] / deltas[j]).log10() >= window_decades - 1e-9);
        let Some(j) = end else { break };
        if j - i + 1 < 2 {
            continue;
        }
        let fit = fit_line(&x[i..=j], &y[i..=j])?;
        windows.push((deltas[i], deltas[j], fit.slope, fit.residual));
    }
    if windows.is_empty() {
        return Err(Error::Argument("no sliding window fits the delta range".into()));
    }
    let lo = windows
        .iter()
        .copied()
        .min_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap();
    let hi = windows
        .iter()
        .copied()
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .unwrap();
    let report = |kind, w: (f64, f64, f64, f64)| {
        DimensionReport::new(kind, w.2)
            .with("delta_range", [w.1, w.0])
            .with("residual", w.3)
            .with("windows", windows.len())
            .with("points", points.len())
            .with("full_range_slope", full.slope)
            .with("full_range_residual", full.residual)
    };
    Ok(BoxDimension {
        lower: report(DimensionKind::BoxLower, lo),
        upper: report(DimensionKind::BoxUpper, hi),
        slope: full.slope,
        residual: full.residual,
        deltas,
        counts,
    })
}

/// Anchors of every cylinder of the given depth.
pub fn cylinder_anchor_cloud(system: &ModelSystem, depth: usize) -> Result<Vec<Point>> {
    let k = system.alphabet();
    let total = (0..depth)
        .try_fold(1usize, |acc, _| acc.checked_mul(k))
        .filter(|&t| t <= 1 << 26)
        .ok_or_else(|| Error::Precision(format!("{k}^{depth} cylinders is too many to enumerate")))?;
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut word = vec![0u8; depth];
            for slot in word.iter_mut().rev() {
                *slot = (idx % k) as u8;
                idx /= k;
            }
            system.anchor(&word)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn middle_third_cantor_set() {
        let pts = cylinder_anchor_cloud(&catalog::cantor_3_3(), 12).unwrap();
        let d = 2f64.ln() / 3f64.ln();
        let b = box_dimension(&pts, 1, &log_spaced(1e-5, 1e-2, 16), 3.0).unwrap();
        assert_eq!(b.lower.value, b.upper.value);
        assert!((b.slope - d).abs() < 0.02, "{}", b.slope);
        // shorter windows pick up the log-periodic oscillation of the counts
        let b = box_dimension(&pts, 1, &log_spaced(1e-5, 1e-2, 16), 2.0).unwrap();
        assert!(b.lower.value <= b.slope && b.slope <= b.upper.value);
        assert!(b.lower.value > d - 0.03 && b.upper.value < d + 0.03);
    }

    #[test]
    fn filled_square() {
        let m = 512;
        let pts: Vec<Point> = (0..m * m)
            .map(|i| [(i / m) as f64 / m as f64, (i % m) as f64 / m as f64])
            .collect();
        let deltas: Vec<f64> = (2..=9).map(|k| 0.5f64.powi(k)).collect();
        let b = box_dimension(&pts, 2, &deltas, 2.0).unwrap();
        assert_eq!(b.counts[7], m * m);
        assert!((b.lower.value - 2.0).abs() < 1e-12 && (b.upper.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn affine_images_keep_their_dimension() {
        let pts = cylinder_anchor_cloud(&catalog::cantor_3_3(), 12).unwrap();
        let image: Vec<Point> = pts.iter().map(|p| [0.37 * p[0] + 0.2, 0.0]).collect();
        let deltas = log_spaced(1e-5, 1e-2, 16);
        let a = box_dimension(&pts, 1, &deltas, 2.0).unwrap();
        let b = box_dimension(&image, 1, &deltas, 2.0).unwrap();
        assert!((a.slope - b.slope).abs() < 0.02, "{} vs {}", a.slope, b.slope);
    }

    #[test]
    fn degenerate_ranges_are_rejected() {
        let pts = vec![[0.1, 0.0]; 10];
        assert!(box_dimension(&pts, 1, &[0.1, 0.05, 0.02], 2.0).is_err());
        assert!(box_dimension(&pts, 1, &[0.1, 0.1], 1.0).is_err());
    }
}
