//! Local dimension of a measure from exact ball masses.
//!
//! Balls are sup-norm boxes `[x - r, x + r]^m0`. Their mass is computed by
//! descending the cylinder tree: cylinders inside the ball contribute their
//! whole mass, disjoint ones nothing, and cylinders straddling the boundary
//! are refined until their partially covered sides fall below `r / 8`, where
//! the covered area fraction is used.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DimensionKind, DimensionReport};
use crate::error::{Error, Result};
use crate::measure::ErgodicMeasure;
use crate::numeric::{fit_line, mean_and_stderr};
use crate::systems::{Cylinder, ModelSystem, Point};

/// Boundary cylinders are refined until their partially covered sides are
/// below `r * LEAF_RATIO`.
const LEAF_RATIO: f64 = 0.125;
/// Deepest cylinder the ball descent will visit.
const MAX_DEPTH: usize = 64;
/// Sample points sit in cylinders this much finer than the smallest radius.
const SAMPLE_REFINE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalOptions {
    pub radii: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

struct BallMass<'a> {
    system: &'a ModelSystem,
    measure: &'a ErgodicMeasure,
    dim: usize,
    /// Per-symbol first-level cylinders, for affine child extents.
    first: Option<Vec<Cylinder>>,
}

impl<'a> BallMass<'a> {
    fn new(system: &'a ModelSystem, measure: &'a ErgodicMeasure) -> Result<Self> {
        let first = match system.branch_log_scales() {
            Some(_) => Some(
                (0..system.alphabet() as u8)
                    .map(|s| system.decode(&[s]))
                    .collect::<Result<_>>()?,
            ),
            None => None,
        };
        Ok(BallMass {
            system,
            measure,
            dim: system.dim(),
            first,
        })
    }

    fn child(&self, word: &[u8], parent: &Cylinder, s: u8) -> Result<Cylinder> {
        match &self.first {
            Some(first) => {
                let f = &first[s as usize];
                let mut lo = parent.lo;
                let mut hi = parent.hi;
                for c in 0..self.dim {
                    let w = parent.hi[c] - parent.lo[c];
                    lo[c] = parent.lo[c] + w * f.lo[c];
                    hi[c] = parent.lo[c] + w * f.hi[c];
                }
                Ok(Cylinder { lo, hi })
            }
            None => {
                let mut w = word.to_vec();
                w.push(s);
                self.system.decode(&w)
            }
        }
    }

    fn descend(&self, word: &mut Vec<u8>, cyl: &Cylinder, log_mass: f64, ball: &Cylinder, r: f64) -> Result<f64> {
        let mut fraction = 1.0;
        let mut refine = false;
        for c in 0..self.dim {
            let w = cyl.hi[c] - cyl.lo[c];
            let overlap = (cyl.hi[c].min(ball.hi[c]) - cyl.lo[c].max(ball.lo[c])).max(0.0);
            if overlap <= 0.0 {
                return Ok(0.0);
            }
            if overlap < w {
                fraction *= overlap / w;
                if w >= r * LEAF_RATIO {
                    refine = true;
                }
            }
        }
        if fraction >= 1.0 {
            return Ok(log_mass.exp());
        }
        if !refine || word.len() >= MAX_DEPTH {
            return Ok(fraction * log_mass.exp());
        }
        let mut total = 0.0;
        for s in 0..self.system.alphabet() as u8 {
            let step = match word.last() {
                Some(&prev) => self.measure.transition(prev, s),
                None => self.measure.stationary()[s as usize],
            };
            if step <= 0.0 {
                continue;
            }
            let child = self.child(word, cyl, s)?;
            word.push(s);
            total += self.descend(word, &child, log_mass + step.ln(), ball, r)?;
            word.pop();
        }
        Ok(total)
    }

    /// `mu(B(x, r))` in the sup norm, wrapping around on the circle and torus.
    fn mass(&self, x: &Point, r: f64) -> Result<f64> {
        let root = Cylinder {
            lo: [0.0, 0.0],
            hi: if self.dim == 2 { [1.0, 1.0] } else { [1.0, 0.0] },
        };
        let shifts: Vec<[f64; 2]> = if self.system.is_periodic() {
            let s = [-1.0, 0.0, 1.0];
            if self.dim == 2 {
                s.iter().flat_map(|&a| s.iter().map(move |&b| [a, b])).collect()
            } else {
                s.iter().map(|&a| [a, 0.0]).collect()
            }
        } else {
            vec![[0.0, 0.0]]
        };
        let mut total = 0.0;
        for sh in shifts {
            let mut ball = Cylinder {
                lo: [x[0] + sh[0] - r, x[1] + sh[1] - r],
                hi: [x[0] + sh[0] + r, x[1] + sh[1] + r],
            };
            if self.dim == 1 {
                ball.lo[1] = 0.0;
                ball.hi[1] = 0.0;
            }
            total += self.descend(&mut Vec::new(), &root, 0.0, &ball, r)?;
        }
        Ok(total)
    }
}

/// Mean local dimension over `samples` measure-typical points, each from the
/// slope of `log mu(B(x, r))` against `log r`.
pub fn local_dimension(system: &ModelSystem, measure: &ErgodicMeasure, opts: &LocalOptions) -> Result<DimensionReport> {
    if system.is_horseshoe() {
        return Err(Error::Unsupported(
            "local dimension is computed on repellers; use the slice formulas for the horseshoe".into(),
        ));
    }
    measure.check_supported_on(&system.coding())?;
    if opts.samples == 0 {
        return Err(Error::Argument("local dimension needs at least one sample".into()));
    }
    let mut radii = opts.radii.clone();
    if radii.len() < 3 || radii.iter().any(|r| !(*r > 0.0 && *r < 0.5)) {
        return Err(Error::Argument("need at least three radii in (0, 1/2)".into()));
    }
    radii.sort_by(|a, b| b.total_cmp(a));
    let (r_max, r_min) = (radii[0], radii[radii.len() - 1]);
    if (r_max / r_min).log10() < 2.0 - 1e-9 {
        return Err(Error::Argument(format!("radii [{r_min}, {r_max}] span fewer than 2 decades")));
    }
    let depth = system
        .depth_for_diameter(r_min * SAMPLE_REFINE)
        .ok()
        .filter(|&d| d <= MAX_DEPTH / 2 && r_min * SAMPLE_REFINE > 1e-13)
        .ok_or_else(|| Error::Precision(format!("radius {r_min} is below the coding resolution")))?;

    let ball = BallMass::new(system, measure)?;
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let fits: Vec<(f64, f64)> = (0..opts.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ErgodicMeasure::sample_rng(opts.seed, i);
            let word = measure.sample_word(&mut rng, depth);
            let x = system.anchor(&word)?;
            let ys: Vec<f64> = radii
                .iter()
                .map(|&r| {
                    let m = ball.mass(&x, r)?;
                    if !(m > 0.0) {
                        return Err(Error::Numerical {
                            step: i as usize,
                            what: format!("ball of radius {r} has mass {m}"),
                        });
                    }
                    Ok(m.ln())
                })
                .collect::<Result<_>>()?;
            let fit = fit_line(&xs, &ys)?;
            Ok((fit.slope, fit.residual))
        })
        .collect::<Result<_>>()?;
    let slopes: Vec<f64> = fits.iter().map(|f| f.0).collect();
    let (mean, stderr) = mean_and_stderr(&slopes);
    let mean_residual = fits.iter().map(|f| f.1).sum::<f64>() / fits.len() as f64;
    Ok(DimensionReport::new(DimensionKind::Local, mean)
        .with("std_error", stderr)
        .with("samples", opts.samples)
        .with("radius_range", [r_min, r_max])
        .with("radii", radii.len())
        .with("sample_depth", depth)
        .with("mean_residual", mean_residual)
        .with("seed", opts.seed))
}
