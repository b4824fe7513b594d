//! Model dynamical systems with finite Markov codings.
//!
//! Every system here is either a uniformly expanding map (a repeller) or the
//! linear two-branch horseshoe. Each carries a full-shift coding by branch
//! index, and cylinders of the coding have exact extents computed by
//! composing inverse branches ("decode side"), never by iterating forward
//! in floating point.
//!
//! Points are `[f64; 2]`; one-dimensional systems ignore the second slot.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numeric::{is_primitive, perron_root};

pub type Point = [f64; 2];

/// Slack used when testing branch-domain membership in `eval`.
pub const DOMAIN_TOL: f64 = 1e-9;
/// Slack used when coding a point by cylinder descent.
pub const CODING_TOL: f64 = 1e-12;

/// Serializable description of a model system, as read from config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemSpec {
    /// `x -> m x + a sin(2 pi x) mod 1`.
    #[serde(rename_all = "snake_case")]
    ExpandingCircleMap {
        degree: u32,
        #[serde(default)]
        amplitude: f64,
    },
    /// `(x, y) -> (d1 x, d2 y) mod 1`.
    #[serde(rename_all = "snake_case")]
    ToralEndomorphism { diagonal: [u32; 2] },
    /// Affine expanding branches `x -> s_j (x - l_j)` on `[l_j, l_j + 1/s_j]`.
    #[serde(rename_all = "snake_case")]
    CantorRepeller {
        slopes: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        left_endpoints: Option<Vec<f64>>,
    },
    /// Affine branches with derivative `diag(u_j, v_j)` on disjoint rectangles.
    #[serde(rename_all = "snake_case")]
    PlanarRepeller {
        derivatives: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        corners: Option<Vec<[f64; 2]>>,
    },
    /// Two branches expanding `x` by `expansion`, contracting `y` by `contraction`.
    #[serde(rename_all = "snake_case")]
    LinearHorseshoe { expansion: f64, contraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine1 {
    left: f64,
    slope: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine2 {
    corner: [f64; 2],
    scale: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Circle {
        degree: u32,
        amplitude: f64,
        /// `cuts[j]` solves `m c + a sin(2 pi c) = j`; `cuts[m] = 1`.
        cuts: Vec<f64>,
    },
    Torus {
        d: [u32; 2],
    },
    Interval {
        branches: Vec<Affine1>,
    },
    Planar {
        branches: Vec<Affine2>,
    },
    Horseshoe {
        beta: f64,
        alpha: f64,
    },
}

/// Derivative of a one- or two-dimensional map at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Jacobian {
    Scalar(f64),
    Planar(Matrix2<f64>),
}

impl Jacobian {
    pub fn dim(&self) -> usize {
        match self {
            Jacobian::Scalar(_) => 1,
            Jacobian::Planar(_) => 2,
        }
    }

    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        match self {
            Jacobian::Scalar(v) => nalgebra::DMatrix::from_element(1, 1, *v),
            Jacobian::Planar(m) => nalgebra::DMatrix::from_column_slice(2, 2, m.as_slice()),
        }
    }
}

/// Axis-aligned cylinder extents `[lo, hi)` per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub lo: Point,
    pub hi: Point,
}

impl Cylinder {
    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn contains(&self, x: &Point, dim: usize, tol: f64) -> bool {
        (0..dim).all(|c| x[c] >= self.lo[c] - tol && x[c] <= self.hi[c] + tol)
    }

    pub fn contains_cylinder(&self, other: &Cylinder, dim: usize, tol: f64) -> bool {
        (0..dim).all(|c| other.lo[c] >= self.lo[c] - tol && other.hi[c] <= self.hi[c] + tol)
    }

    pub fn diameter(&self, dim: usize) -> f64 {
        (0..dim).map(|c| self.width(c).powi(2)).sum::<f64>().sqrt()
    }
}

/// Alphabet and 0/1 transition matrix of a subshift of finite type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolicCoding {
    pub alphabet: usize,
    pub transitions: Vec<Vec<u8>>,
}

impl SymbolicCoding {
    pub fn full_shift(alphabet: usize) -> Self {
        SymbolicCoding {
            alphabet,
            transitions: vec![vec![1; alphabet]; alphabet],
        }
    }

    pub fn from_matrix(transitions: Vec<Vec<u8>>) -> Result<Self> {
        let k = transitions.len();
        if k == 0 || k > 255 {
            return Err(Error::Argument(format!("alphabet size {k} not in 1..=255")));
        }
        if transitions.iter().any(|r| r.len() != k || r.iter().any(|&v| v > 1)) {
            return Err(Error::Argument("transition matrix must be square and 0/1".into()));
        }
        let coding = SymbolicCoding {
            alphabet: k,
            transitions,
        };
        if !is_primitive(&coding.as_f64()) {
            return Err(Error::Structure("transition matrix is not primitive".into()));
        }
        Ok(coding)
    }

    pub fn as_f64(&self) -> Vec<Vec<f64>> {
        self.transitions
            .iter()
            .map(|r| r.iter().map(|&v| v as f64).collect())
            .collect()
    }

    pub fn is_full_shift(&self) -> bool {
        self.transitions.iter().flatten().all(|&v| v == 1)
    }

    pub fn allowed(&self, a: u8, b: u8) -> bool {
        self.transitions[a as usize][b as usize] == 1
    }

    pub fn is_admissible(&self, word: &[u8]) -> bool {
        word.iter().all(|&s| (s as usize) < self.alphabet)
            && word.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    /// Topological entropy: log of the Perron root of the transition matrix.
    pub fn entropy(&self) -> Result<f64> {
        Ok(perron_root(&self.as_f64(), 1e-14)?.ln())
    }
}

/// A validated model system.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSystem {
    spec: SystemSpec,
    kind: Kind,
}

fn check_finite(x: &Point, dim: usize) -> Result<()> {
    if x[..dim].iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain { point: x[..dim].to_vec() })
    }
}

/// Left endpoints spreading branches of the given widths across `[0, 1]`
/// with equal gaps, first branch at 0 and last ending at 1.
fn spread(widths: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = widths.iter().sum();
    if total > 1.0 + 1e-15 {
        return Err(Error::Argument(format!(
            "branch widths sum to {total} > 1; domains cannot be disjoint"
        )));
    }
    let k = widths.len();
    let gap = if k > 1 { (1.0 - total).max(0.0) / (k - 1) as f64 } else { 0.0 };
    let mut lefts = Vec::with_capacity(k);
    let mut pos = 0.0;
    for w in widths {
        lefts.push(pos);
        pos += w + gap;
    }
    Ok(lefts)
}

impl ModelSystem {
    pub fn new(spec: SystemSpec) -> Result<Self> {
        let kind = match &spec {
            SystemSpec::ExpandingCircleMap { degree, amplitude } => {
                let m = *degree;
                let a = *amplitude;
                if m < 2 {
                    return Err(Error::Argument(format!("circle map degree {m} < 2")));
                }
                if !a.is_finite() || (2.0 * PI * a).abs() >= m as f64 - 1.0 {
                    return Err(Error::Argument(format!(
                        "amplitude {a} violates |2 pi a| < m - 1 = {}",
                        m - 1
                    )));
                }
                if m > 255 {
                    return Err(Error::Argument("circle map degree exceeds 255".into()));
                }
                let mut cuts = Vec::with_capacity(m as usize + 1);
                for j in 0..=m {
                    cuts.push(circle_lift_inverse(m, a, j as f64, 0.0, 1.0));
                }
                cuts[0] = 0.0;
                cuts[m as usize] = 1.0;
                Kind::Circle {
                    degree: m,
                    amplitude: a,
                    cuts,
                }
            }
            SystemSpec::ToralEndomorphism { diagonal } => {
                if diagonal.iter().any(|&d| d < 2) {
                    return Err(Error::Argument(format!(
                        "toral diagonal entries {diagonal:?} must be >= 2"
                    )));
                }
                if diagonal[0] * diagonal[1] > 255 {
                    return Err(Error::Argument("toral alphabet d1*d2 exceeds 255".into()));
                }
                Kind::Torus { d: *diagonal }
            }
            SystemSpec::CantorRepeller {
                slopes,
                left_endpoints,
            } => {
                if slopes.is_empty() || slopes.len() > 255 {
                    return Err(Error::Argument("cantor repeller needs 1..=255 branches".into()));
                }
                if slopes.iter().any(|s| !s.is_finite() || *s <= 1.0) {
                    return Err(Error::Argument(format!("slopes {slopes:?} must all exceed 1")));
                }
                let widths: Vec<f64> = slopes.iter().map(|s| 1.0 / s).collect();
                let lefts = match left_endpoints {
                    Some(l) => {
                        if l.len() != slopes.len() {
                            return Err(Error::Argument(
                                "left_endpoints and slopes differ in length".into(),
                            ));
                        }
                        l.clone()
                    }
                    None => spread(&widths)?,
                };
                let mut branches: Vec<Affine1> = lefts
                    .iter()
                    .zip(slopes)
                    .map(|(&left, &slope)| Affine1 { left, slope })
                    .collect();
                branches.sort_by(|a, b| a.left.total_cmp(&b.left));
                for b in &branches {
                    if b.left < -1e-15 || b.left + 1.0 / b.slope > 1.0 + 1e-12 {
                        return Err(Error::Argument(format!(
                            "branch domain [{}, {}] leaves [0, 1]",
                            b.left,
                            b.left + 1.0 / b.slope
                        )));
                    }
                }
                for w in branches.windows(2) {
                    if w[0].left + 1.0 / w[0].slope > w[1].left + 1e-12 {
                        return Err(Error::Argument("branch domains overlap".into()));
                    }
                }
                Kind::Interval { branches }
            }
            SystemSpec::PlanarRepeller {
                derivatives,
                corners,
            } => {
                if derivatives.is_empty() || derivatives.len() > 255 {
                    return Err(Error::Argument("planar repeller needs 1..=255 branches".into()));
                }
                if derivatives.iter().flatten().any(|s| !s.is_finite() || *s <= 1.0) {
                    return Err(Error::Argument(format!(
                        "derivative entries {derivatives:?} must all exceed 1"
                    )));
                }
                let corners = match corners {
                    Some(c) => {
                        if c.len() != derivatives.len() {
                            return Err(Error::Argument(
                                "corners and derivatives differ in length".into(),
                            ));
                        }
                        c.clone()
                    }
                    None => {
                        let xs = spread(&derivatives.iter().map(|d| 1.0 / d[0]).collect::<Vec<_>>())?;
                        let ys = spread(&derivatives.iter().map(|d| 1.0 / d[1]).collect::<Vec<_>>())?;
                        xs.into_iter().zip(ys).map(|(x, y)| [x, y]).collect()
                    }
                };
                let mut branches: Vec<Affine2> = corners
                    .iter()
                    .zip(derivatives)
                    .map(|(&corner, &scale)| Affine2 { corner, scale })
                    .collect();
                branches.sort_by(|a, b| {
                    a.corner[0]
                        .total_cmp(&b.corner[0])
                        .then(a.corner[1].total_cmp(&b.corner[1]))
                });
                for b in &branches {
                    for c in 0..2 {
                        if b.corner[c] < -1e-15 || b.corner[c] + 1.0 / b.scale[c] > 1.0 + 1e-12 {
                            return Err(Error::Argument("branch rectangle leaves the unit square".into()));
                        }
                    }
                }
                for i in 0..branches.len() {
                    for j in i + 1..branches.len() {
                        let (a, b) = (&branches[i], &branches[j]);
                        let overlap = (0..2).all(|c| {
                            a.corner[c] < b.corner[c] + 1.0 / b.scale[c] - 1e-12
                                && b.corner[c] < a.corner[c] + 1.0 / a.scale[c] - 1e-12
                        });
                        if overlap {
                            return Err(Error::Argument("branch rectangles overlap".into()));
                        }
                    }
                }
                Kind::Planar { branches }
            }
            SystemSpec::LinearHorseshoe {
                expansion,
                contraction,
            } => {
                let (beta, alpha) = (*expansion, *contraction);
                if !beta.is_finite() || beta < 2.0 {
                    return Err(Error::Argument(format!(
                        "expansion {beta} must be >= 2 so the two strips are disjoint"
                    )));
                }
                if !alpha.is_finite() || alpha <= 0.0 || alpha > 0.5 {
                    return Err(Error::Argument(format!(
                        "contraction {alpha} must lie in (0, 1/2] so the images are disjoint"
                    )));
                }
                Kind::Horseshoe { beta, alpha }
            }
        };
        Ok(ModelSystem { spec, kind })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    /// Short kebab-case kind tag.
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            Kind::Circle { .. } => "expanding-circle-map",
            Kind::Torus { .. } => "toral-endomorphism",
            Kind::Interval { .. } => "cantor-repeller",
            Kind::Planar { .. } => "planar-repeller",
            Kind::Horseshoe { .. } => "linear-horseshoe",
        }
    }

    /// Ambient dimension `m0`.
    pub fn dim(&self) -> usize {
        match self.kind {
            Kind::Circle { .. } | Kind::Interval { .. } => 1,
            _ => 2,
        }
    }

    pub fn alphabet(&self) -> usize {
        match &self.kind {
            Kind::Circle { degree, .. } => *degree as usize,
            Kind::Torus { d } => (d[0] * d[1]) as usize,
            Kind::Interval { branches } => branches.len(),
            Kind::Planar { branches } => branches.len(),
            Kind::Horseshoe { .. } => 2,
        }
    }

    pub fn coding(&self) -> SymbolicCoding {
        SymbolicCoding::full_shift(self.alphabet())
    }

    pub fn is_horseshoe(&self) -> bool {
        matches!(self.kind, Kind::Horseshoe { .. })
    }

    /// `(expansion, contraction)` for the linear horseshoe.
    pub fn horseshoe_rates(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::Horseshoe { beta, alpha } => Some((beta, alpha)),
            _ => None,
        }
    }

    /// Slopes of a Cantor repeller, in branch order.
    pub fn interval_slopes(&self) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Interval { branches } => Some(branches.iter().map(|b| b.slope).collect()),
            _ => None,
        }
    }

    /// Periodic quotient (circle or torus) rather than a subset of `R^m0`.
    pub fn is_periodic(&self) -> bool {
        matches!(self.kind, Kind::Circle { .. } | Kind::Torus { .. })
    }

    /// Per-branch log of the diagonal derivative entries when every branch is
    /// affine with diagonal derivative (everything except a perturbed circle
    /// map). Entry `[c]` is the log-scale along coordinate `c`.
    pub fn branch_log_scales(&self) -> Option<Vec<[f64; 2]>> {
        match &self.kind {
            Kind::Circle {
                degree, amplitude, ..
            } => {
                if *amplitude == 0.0 {
                    Some(vec![[(*degree as f64).ln(), 0.0]; *degree as usize])
                } else {
                    None
                }
            }
            Kind::Torus { d } => {
                let mut out = Vec::with_capacity((d[0] * d[1]) as usize);
                for _ in 0..d[0] {
                    for _ in 0..d[1] {
                        out.push([(d[0] as f64).ln(), (d[1] as f64).ln()]);
                    }
                }
                Some(out)
            }
            Kind::Interval { branches } => {
                Some(branches.iter().map(|b| [b.slope.ln(), 0.0]).collect())
            }
            Kind::Planar { branches } => Some(
                branches
                    .iter()
                    .map(|b| [b.scale[0].ln(), b.scale[1].ln()])
                    .collect(),
            ),
            Kind::Horseshoe { beta, alpha } => Some(vec![[beta.ln(), alpha.ln()]; 2]),
        }
    }

    /// Minimum and maximum per-step expansion along expanding directions.
    pub fn expansion_bounds(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Circle {
                degree, amplitude, ..
            } => {
                let m = *degree as f64;
                let p = (2.0 * PI * amplitude).abs();
                (m - p, m + p)
            }
            Kind::Torus { d } => (d[0].min(d[1]) as f64, d[0].max(d[1]) as f64),
            Kind::Interval { branches } => branches.iter().fold((f64::INFINITY, 0.0), |acc, b| {
                (acc.0.min(b.slope), acc.1.max(b.slope))
            }),
            Kind::Planar { branches } => branches.iter().fold((f64::INFINITY, 0.0), |acc, b| {
                (
                    acc.0.min(b.scale[0].min(b.scale[1])),
                    acc.1.max(b.scale[0].max(b.scale[1])),
                )
            }),
            Kind::Horseshoe { beta, .. } => (*beta, *beta),
        }
    }

    /// Per-coordinate minimum expansion; contracting coordinates report 1.
    fn coordinate_min_expansion(&self) -> [f64; 2] {
        match &self.kind {
            Kind::Circle { .. } => [self.expansion_bounds().0, 1.0],
            Kind::Torus { d } => [d[0] as f64, d[1] as f64],
            Kind::Interval { branches } => [
                branches.iter().map(|b| b.slope).fold(f64::INFINITY, f64::min),
                1.0,
            ],
            Kind::Planar { branches } => [
                branches.iter().map(|b| b.scale[0]).fold(f64::INFINITY, f64::min),
                branches.iter().map(|b| b.scale[1]).fold(f64::INFINITY, f64::min),
            ],
            Kind::Horseshoe { beta, .. } => [*beta, 1.0],
        }
    }

    /// Smallest distance between distinct branch domains (0 when they touch).
    pub fn min_branch_gap(&self) -> f64 {
        match &self.kind {
            Kind::Circle { .. } | Kind::Torus { .. } => 0.0,
            Kind::Interval { branches } => branches
                .windows(2)
                .map(|w| w[1].left - (w[0].left + 1.0 / w[0].slope))
                .fold(f64::INFINITY, f64::min)
                .max(0.0),
            Kind::Planar { branches } => {
                let mut gap = f64::INFINITY;
                for i in 0..branches.len() {
                    for j in i + 1..branches.len() {
                        let (a, b) = (&branches[i], &branches[j]);
                        let mut d2 = 0.0;
                        for c in 0..2 {
                            let (alo, ahi) = (a.corner[c], a.corner[c] + 1.0 / a.scale[c]);
                            let (blo, bhi) = (b.corner[c], b.corner[c] + 1.0 / b.scale[c]);
                            let sep = (blo - ahi).max(alo - bhi).max(0.0);
                            d2 += sep * sep;
                        }
                        gap = gap.min(d2.sqrt());
                    }
                }
                gap
            }
            Kind::Horseshoe { beta, .. } => 1.0 - 2.0 / beta,
        }
    }

    /// Radius below which two points that stay within it along an orbit
    /// are separated by the expansion at every step.
    pub fn expansivity_radius(&self) -> f64 {
        let gap = self.min_branch_gap();
        match &self.kind {
            Kind::Circle { .. } | Kind::Torus { .. } => 0.5 / self.expansion_bounds().1,
            _ => {
                if gap > 0.0 {
                    gap
                } else {
                    0.5 / self.expansion_bounds().1
                }
            }
        }
    }

    /// Radius scale below which Bowen balls stay inside one branch piece.
    pub fn lebesgue_number(&self) -> f64 {
        self.expansivity_radius()
    }

    /// Distance in the ambient metric (quotient metric on circle and torus).
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        let dim = self.dim();
        let periodic = self.is_periodic();
        let mut s = 0.0;
        for c in 0..dim {
            let mut d = (x[c] - y[c]).abs();
            if periodic {
                d = d.rem_euclid(1.0);
                d = d.min(1.0 - d);
            }
            s += d * d;
        }
        s.sqrt()
    }

    fn branch_index(&self, x: &Point, tol: f64) -> Option<usize> {
        match &self.kind {
            Kind::Circle { cuts, .. } => {
                let u = x[0].rem_euclid(1.0);
                let m = cuts.len() - 1;
                Some((0..m).find(|&j| u < cuts[j + 1]).unwrap_or(m - 1))
            }
            Kind::Torus { d } => {
                let i = ((x[0].rem_euclid(1.0)) * d[0] as f64).floor() as usize;
                let j = ((x[1].rem_euclid(1.0)) * d[1] as f64).floor() as usize;
                Some(i.min(d[0] as usize - 1) * d[1] as usize + j.min(d[1] as usize - 1))
            }
            Kind::Interval { branches } => {
                let exact = branches
                    .iter()
                    .position(|b| x[0] >= b.left && x[0] < b.left + 1.0 / b.slope);
                exact.or_else(|| {
                    branches.iter().position(|b| {
                        x[0] >= b.left - tol && x[0] <= b.left + 1.0 / b.slope + tol
                    })
                })
            }
            Kind::Planar { branches } => {
                let inside = |b: &Affine2, t: f64| {
                    (0..2).all(|c| x[c] >= b.corner[c] - t && x[c] <= b.corner[c] + 1.0 / b.scale[c] + t)
                };
                branches
                    .iter()
                    .position(|b| inside(b, 0.0))
                    .or_else(|| branches.iter().position(|b| inside(b, tol)))
            }
            Kind::Horseshoe { beta, .. } => {
                if x[1] < -tol || x[1] > 1.0 + tol {
                    return None;
                }
                let w = 1.0 / beta;
                if x[0] >= -tol && x[0] <= w + tol {
                    Some(0)
                } else if x[0] >= 1.0 - w - tol && x[0] <= 1.0 + tol {
                    Some(1)
                } else {
                    None
                }
            }
        }
    }

    /// `f(x)`. Circle and torus images are reduced into `[0, 1)`.
    pub fn eval(&self, x: &Point) -> Result<Point> {
        let dim = self.dim();
        check_finite(x, dim)?;
        let j = self
            .branch_index(x, DOMAIN_TOL)
            .ok_or_else(|| Error::Domain { point: x[..dim].to_vec() })?;
        Ok(match &self.kind {
            Kind::Circle {
                degree, amplitude, ..
            } => {
                let u = x[0];
                let y = *degree as f64 * u + amplitude * (2.0 * PI * u).sin();
                [y.rem_euclid(1.0), 0.0]
            }
            Kind::Torus { d } => [
                (d[0] as f64 * x[0]).rem_euclid(1.0),
                (d[1] as f64 * x[1]).rem_euclid(1.0),
            ],
            Kind::Interval { branches } => {
                let b = branches[j];
                [b.slope * (x[0] - b.left), 0.0]
            }
            Kind::Planar { branches } => {
                let b = branches[j];
                [
                    b.scale[0] * (x[0] - b.corner[0]),
                    b.scale[1] * (x[1] - b.corner[1]),
                ]
            }
            Kind::Horseshoe { beta, alpha } => {
                let shift = if j == 0 { 0.0 } else { 1.0 - 1.0 / beta };
                let lift = if j == 0 { 0.0 } else { 1.0 - alpha };
                [beta * (x[0] - shift), alpha * x[1] + lift]
            }
        })
    }

    /// Exact derivative `D_x f`.
    pub fn jacobian(&self, x: &Point) -> Result<Jacobian> {
        let dim = self.dim();
        check_finite(x, dim)?;
        let j = self
            .branch_index(x, DOMAIN_TOL)
            .ok_or_else(|| Error::Domain { point: x[..dim].to_vec() })?;
        Ok(match &self.kind {
            Kind::Circle {
                degree, amplitude, ..
            } => Jacobian::Scalar(*degree as f64 + 2.0 * PI * amplitude * (2.0 * PI * x[0]).cos()),
            Kind::Torus { d } => Jacobian::Planar(Matrix2::new(d[0] as f64, 0.0, 0.0, d[1] as f64)),
            Kind::Interval { branches } => Jacobian::Scalar(branches[j].slope),
            Kind::Planar { branches } => {
                let s = branches[j].scale;
                Jacobian::Planar(Matrix2::new(s[0], 0.0, 0.0, s[1]))
            }
            Kind::Horseshoe { beta, alpha } => Jacobian::Planar(Matrix2::new(*beta, 0.0, 0.0, *alpha)),
        })
    }

    /// Derivative on the branch of `symbol` when it does not depend on the point.
    pub fn symbol_jacobian(&self, symbol: u8) -> Option<Jacobian> {
        let scales = self.branch_log_scales()?;
        let s = scales.get(symbol as usize)?;
        Some(match self.dim() {
            1 => Jacobian::Scalar(s[0].exp()),
            _ => Jacobian::Planar(Matrix2::new(s[0].exp(), 0.0, 0.0, s[1].exp())),
        })
    }

    /// `[x, f(x), ..., f^n(x)]`.
    pub fn orbit(&self, x: &Point, n: usize) -> Result<Vec<Point>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(*x);
        let mut cur = *x;
        for step in 0..n {
            cur = self.eval(&cur).map_err(|e| match e {
                Error::Domain { .. } => Error::Escape { step },
                other => other,
            })?;
            out.push(cur);
        }
        Ok(out)
    }

    /// Inverse branch `g_j` applied to a point of the image domain `[0,1]^m0`.
    fn inverse_branch(&self, symbol: u8, y: &Point) -> Point {
        let j = symbol as usize;
        match &self.kind {
            Kind::Circle {
                degree, amplitude, cuts,
            } => {
                let m = *degree;
                let v = if *amplitude == 0.0 {
                    (j as f64 + y[0]) / m as f64
                } else if y[0] == 0.0 {
                    cuts[j]
                } else if y[0] == 1.0 {
                    cuts[j + 1]
                } else {
                    circle_lift_inverse(m, *amplitude, j as f64 + y[0], cuts[j], cuts[j + 1])
                };
                [v, 0.0]
            }
            Kind::Torus { d } => {
                let (i, k) = (j / d[1] as usize, j % d[1] as usize);
                [(i as f64 + y[0]) / d[0] as f64, (k as f64 + y[1]) / d[1] as f64]
            }
            Kind::Interval { branches } => {
                let b = branches[j];
                [b.left + y[0] / b.slope, 0.0]
            }
            Kind::Planar { branches } => {
                let b = branches[j];
                [b.corner[0] + y[0] / b.scale[0], b.corner[1] + y[1] / b.scale[1]]
            }
            Kind::Horseshoe { beta, .. } => {
                let shift = if j == 0 { 0.0 } else { 1.0 - 1.0 / beta };
                [shift + y[0] / beta, y[1]]
            }
        }
    }

    fn affine_inverse(&self, symbol: u8) -> Option<([f64; 2], [f64; 2])> {
        let j = symbol as usize;
        Some(match &self.kind {
            Kind::Circle {
                degree, amplitude, ..
            } => {
                if *amplitude != 0.0 {
                    return None;
                }
                let m = *degree as f64;
                ([j as f64 / m, 0.0], [1.0 / m, 1.0])
            }
            Kind::Torus { d } => {
                let (i, k) = (j / d[1] as usize, j % d[1] as usize);
                (
                    [i as f64 / d[0] as f64, k as f64 / d[1] as f64],
                    [1.0 / d[0] as f64, 1.0 / d[1] as f64],
                )
            }
            Kind::Interval { branches } => ([branches[j].left, 0.0], [1.0 / branches[j].slope, 1.0]),
            Kind::Planar { branches } => {
                let b = branches[j];
                (b.corner, [1.0 / b.scale[0], 1.0 / b.scale[1]])
            }
            Kind::Horseshoe { beta, .. } => {
                let shift = if j == 0 { 0.0 } else { 1.0 - 1.0 / beta };
                ([shift, 0.0], [1.0 / beta, 1.0])
            }
        })
    }

    /// `G_w = g_{w_0} o ... o g_{w_{n-1}}` applied to `y`.
    fn compose_inverse(&self, word: &[u8], y: &Point) -> Point {
        let mut cur = *y;
        for &s in word.iter().rev() {
            cur = self.inverse_branch(s, &cur);
        }
        cur
    }

    fn check_word(&self, word: &[u8]) -> Result<()> {
        let k = self.alphabet();
        if let Some(&s) = word.iter().find(|&&s| s as usize >= k) {
            return Err(Error::Argument(format!("symbol {s} outside alphabet of size {k}")));
        }
        Ok(())
    }

    /// Exact extents of the cylinder of `word`.
    pub fn decode(&self, word: &[u8]) -> Result<Cylinder> {
        self.check_word(word)?;
        let dim = self.dim();
        let affine: Option<Vec<_>> = word.iter().map(|&s| self.affine_inverse(s)).collect();
        let (lo, hi) = match affine {
            Some(maps) => {
                let mut off = [0.0, 0.0];
                let mut sc = [1.0, 1.0];
                for (o, s) in maps {
                    for c in 0..2 {
                        off[c] += sc[c] * o[c];
                        sc[c] *= s[c];
                    }
                }
                ([off[0], off[1]], [off[0] + sc[0], off[1] + sc[1]])
            }
            None => (
                self.compose_inverse(word, &[0.0, 0.0]),
                self.compose_inverse(word, &[1.0, 1.0]),
            ),
        };
        let mut cyl = Cylinder { lo, hi };
        if dim == 1 {
            cyl.lo[1] = 0.0;
            cyl.hi[1] = 0.0;
        }
        Ok(cyl)
    }

    /// Anchor point of a cylinder: the point with itinerary `word` followed by 0s.
    pub fn anchor(&self, word: &[u8]) -> Result<Point> {
        if self.affine_inverse(0).is_none() {
            self.check_word(word)?;
            return Ok(self.compose_inverse(word, &[0.0, 0.0]));
        }
        Ok(self.decode(word)?.lo)
    }

    /// Branch itinerary of `x` of length `depth`, found by descending through
    /// nested cylinders rather than iterating `f` forward.
    pub fn encode(&self, x: &Point, depth: usize) -> Result<Vec<u8>> {
        let dim = self.dim();
        check_finite(x, dim)?;
        let mut p = *x;
        if self.is_periodic() {
            for v in p.iter_mut().take(dim) {
                *v = v.rem_euclid(1.0);
                if *v >= 1.0 {
                    *v = 0.0;
                }
            }
        }
        let k = self.alphabet();
        let mut word: Vec<u8> = Vec::with_capacity(depth);
        for _ in 0..depth {
            let mut best: Option<(u8, f64)> = None;
            for s in 0..k as u8 {
                word.push(s);
                let cyl = self.decode(&word)?;
                word.pop();
                // Distance from p to the half-open child [lo, hi); 0 inside.
                let mut miss = 0.0_f64;
                let mut inside = true;
                for c in 0..dim {
                    if p[c] < cyl.lo[c] {
                        miss = miss.max(cyl.lo[c] - p[c]);
                        inside = false;
                    } else if p[c] >= cyl.hi[c] {
                        let closes = !self.is_periodic() && cyl.hi[c] >= 1.0 - 1e-15 && p[c] <= cyl.hi[c];
                        if !closes {
                            miss = miss.max(p[c] - cyl.hi[c]);
                            inside = false;
                        }
                    }
                }
                if self.is_horseshoe() && (p[1] < -CODING_TOL || p[1] > 1.0 + CODING_TOL) {
                    inside = false;
                    miss = f64::INFINITY;
                }
                if inside {
                    best = Some((s, 0.0));
                    break;
                }
                if miss <= CODING_TOL && best.is_none_or(|(_, m)| miss < m) {
                    best = Some((s, miss));
                }
            }
            match best {
                Some((s, _)) => word.push(s),
                None => {
                    return Err(Error::Coding {
                        point: x[..dim].to_vec(),
                        tolerance: CODING_TOL,
                    })
                }
            }
        }
        Ok(word)
    }

    /// Orbit points of the anchor of `word`: entry `k` is the anchor of the
    /// suffix `word[k..]` truncated to `resolution` symbols. Exact word
    /// arithmetic, so no forward error amplification.
    pub fn coded_orbit(&self, word: &[u8], n: usize, resolution: usize) -> Result<Vec<Point>> {
        if n > word.len() {
            return Err(Error::Argument(format!(
                "coded orbit of length {n} needs a word of at least that length, got {}",
                word.len()
            )));
        }
        if resolution >= word.len() && self.affine_inverse(0).is_none() {
            // every suffix anchor is one inverse branch away from the next
            self.check_word(word)?;
            let mut cur = self.compose_inverse(&word[n..], &[0.0, 0.0]);
            let mut out = vec![cur; n + 1];
            for k in (0..n).rev() {
                cur = self.inverse_branch(word[k], &cur);
                out[k] = cur;
            }
            return Ok(out);
        }
        (0..=n)
            .map(|k| {
                let end = (k + resolution).min(word.len());
                self.anchor(&word[k..end])
            })
            .collect()
    }

    /// Upper bound on cylinder diameters at `depth`.
    pub fn max_cylinder_diameter(&self, depth: usize) -> f64 {
        let dim = self.dim();
        let mut widths = [1.0_f64, 1.0];
        match &self.kind {
            Kind::Circle { .. } => widths[0] = self.expansion_bounds().0.powi(-(depth as i32)),
            Kind::Torus { d } => {
                widths[0] = (d[0] as f64).powi(-(depth as i32));
                widths[1] = (d[1] as f64).powi(-(depth as i32));
            }
            Kind::Interval { .. } | Kind::Planar { .. } | Kind::Horseshoe { .. } => {
                let min = self.coordinate_min_expansion();
                widths[0] = min[0].powi(-(depth as i32));
                if matches!(self.kind, Kind::Planar { .. }) {
                    widths[1] = min[1].powi(-(depth as i32));
                }
            }
        }
        if let Kind::Circle { degree, amplitude, .. } = &self.kind {
            if *amplitude == 0.0 {
                widths[0] = (*degree as f64).powi(-(depth as i32));
            }
        }
        (0..dim).map(|c| widths[c] * widths[c]).sum::<f64>().sqrt()
    }

    /// Smallest depth whose cylinders all have diameter below `r`.
    pub fn depth_for_diameter(&self, r: f64) -> Result<usize> {
        if !(r > 0.0) {
            return Err(Error::Argument(format!("diameter bound {r} must be positive")));
        }
        if self.is_horseshoe() && r <= 1.0 {
            return Err(Error::Precision(
                "horseshoe forward cylinders are full-height strips; use the realized set".into(),
            ));
        }
        (0..=2000)
            .find(|&d| self.max_cylinder_diameter(d) < r)
            .ok_or_else(|| Error::Precision(format!("no cylinder depth reaches diameter {r}")))
    }

    /// Per-coordinate neighbour window for `(n, eps)` separated-set search:
    /// if `d_n(x, y) <= eps <= expansivity_radius` then `|x_c - y_c| <= window[c]`.
    pub(crate) fn separation_window(&self, n: usize, eps: f64) -> [f64; 2] {
        let e = self.coordinate_min_expansion();
        let steps = n.saturating_sub(1) as i32;
        [eps / e[0].max(1.0).powi(steps), eps / e[1].max(1.0).powi(steps)]
    }

    /// Unstable-coordinate slice of the horseshoe's invariant set (a Cantor
    /// set) is coded by forward words; the stable slice by backward words.
    /// Returns the stable coordinate of the point whose past itinerary,
    /// most recent first, is `past`.
    pub fn horseshoe_stable_coordinate(&self, past: &[u8]) -> Result<f64> {
        let Kind::Horseshoe { alpha, .. } = self.kind else {
            return Err(Error::Argument("stable coordinates exist only for the horseshoe".into()));
        };
        self.check_word(past)?;
        let mut y = 0.0;
        for &s in past.iter().rev() {
            let lift = if s == 0 { 0.0 } else { 1.0 - alpha };
            y = alpha * y + lift;
        }
        Ok(y)
    }
}

/// Solves `m c + a sin(2 pi c) = target` for `c` in `[lo, hi]`; the lift is
/// strictly increasing under `|2 pi a| < m - 1`.
fn circle_lift_inverse(m: u32, a: f64, target: f64, lo: f64, hi: f64) -> f64 {
    let lift = |c: f64| m as f64 * c + a * (2.0 * PI * c).sin() - target;
    let (mut lo, mut hi) = (lo, hi);
    let mut c = 0.5 * (lo + hi);
    for _ in 0..200 {
        let v = lift(c);
        if v == 0.0 {
            return c;
        }
        if v > 0.0 {
            hi = c;
        } else {
            lo = c;
        }
        let deriv = m as f64 + 2.0 * PI * a * (2.0 * PI * c).cos();
        let newton = c - v / deriv;
        c = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-16 || (v / deriv).abs() < 1e-17 {
            break;
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn doubling() -> ModelSystem {
        ModelSystem::new(SystemSpec::ExpandingCircleMap { degree: 2, amplitude: 0.0 }).unwrap()
    }

    fn cantor33() -> ModelSystem {
        ModelSystem::new(SystemSpec::CantorRepeller {
            slopes: vec![3.0, 3.0],
            left_endpoints: None,
        })
        .unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_abs_diff_eq!(doubling().eval(&[0.3, 0.0]).unwrap()[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(cantor33().eval(&[0.7, 0.0]).unwrap()[0], 0.1, epsilon = 1e-14);
        let torus = ModelSystem::new(SystemSpec::ToralEndomorphism { diagonal: [2, 3] }).unwrap();
        let y = torus.eval(&[0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(y[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn eval_outside_domain_names_the_point() {
        let err = cantor33().eval(&[0.5, 0.0]).unwrap_err();
        assert_eq!(err, Error::Domain { point: vec![0.5] });
        assert!(err.to_string().contains("0.5"));
    }

    #[test]
    fn jacobian_examples() {
        assert_eq!(doubling().jacobian(&[0.77, 0.0]).unwrap(), Jacobian::Scalar(2.0));
        let pert = ModelSystem::new(SystemSpec::ExpandingCircleMap { degree: 2, amplitude: 0.1 }).unwrap();
        // f(x) = 2x + 0.1 sin(2 pi x): f'(0) = 2 + 0.2 pi
        let Jacobian::Scalar(d) = pert.jacobian(&[0.0, 0.0]).unwrap() else { panic!() };
        assert_abs_diff_eq!(d, 2.0 + 0.2 * PI, epsilon = 1e-12);
        let h = 1e-6;
        let fd = (pert.eval(&[h, 0.0]).unwrap()[0] - (pert.eval(&[1.0 - h, 0.0]).unwrap()[0] - 1.0)) / (2.0 * h);
        assert_abs_diff_eq!(fd, d, epsilon = 1e-8);
        let hs = ModelSystem::new(SystemSpec::LinearHorseshoe { expansion: 3.0, contraction: 0.25 }).unwrap();
        assert_eq!(
            hs.jacobian(&[0.1, 0.5]).unwrap(),
            Jacobian::Planar(Matrix2::new(3.0, 0.0, 0.0, 0.25))
        );
    }

    #[test]
    fn orbit_examples() {
        let o = doubling().orbit(&[0.1, 0.0], 3).unwrap();
        let xs: Vec<f64> = o.iter().map(|p| p[0]).collect();
        for (a, b) in xs.iter().zip([0.1, 0.2, 0.4, 0.8]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let o = cantor33().orbit(&[0.25, 0.0], 2).unwrap();
        for (a, b) in o.iter().zip([0.25, 0.75, 0.25]) {
            assert_abs_diff_eq!(a[0], b, epsilon = 1e-14);
        }
        let fixed = cantor33().orbit(&[0.0, 0.0], 5).unwrap();
        assert!(fixed.iter().all(|p| p[0] == 0.0));
    }

    #[test]
    fn orbit_escape_reports_step() {
        // 5/6 maps to 1/2, which lies in the gap
        let err = cantor33().orbit(&[5.0 / 6.0, 0.0], 4).unwrap_err();
        assert!(matches!(err, Error::Escape { step: 1 }), "{err:?}");
    }

    #[test]
    fn encode_decode_examples() {
        assert_eq!(doubling().encode(&[0.3, 0.0], 3).unwrap(), vec![0, 1, 0]);
        let c = doubling().decode(&[0, 1]).unwrap();
        assert_eq!((c.lo[0], c.hi[0]), (0.25, 0.5));
        let c = cantor33().decode(&[1, 0]).unwrap();
        assert_abs_diff_eq!(c.lo[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.hi[0], 2.0 / 3.0 + 1.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn encode_rejects_points_in_gaps() {
        let err = cantor33().encode(&[0.5, 0.0], 3).unwrap_err();
        assert!(matches!(err, Error::Coding { .. }));
    }

    #[test]
    fn encode_of_anchor_returns_word() {
        let sys = cantor33();
        let w = vec![1, 0, 1, 1, 0, 0, 1];
        let a = sys.anchor(&w).unwrap();
        assert_eq!(sys.encode(&a, w.len()).unwrap(), w);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(ModelSystem::new(SystemSpec::ExpandingCircleMap { degree: 2, amplitude: 0.2 }).is_err());
        assert!(ModelSystem::new(SystemSpec::ExpandingCircleMap { degree: 1, amplitude: 0.0 }).is_err());
        assert!(ModelSystem::new(SystemSpec::CantorRepeller { slopes: vec![1.5, 1.5], left_endpoints: None }).is_err());
        assert!(ModelSystem::new(SystemSpec::CantorRepeller { slopes: vec![3.0, 0.5], left_endpoints: None }).is_err());
        assert!(ModelSystem::new(SystemSpec::LinearHorseshoe { expansion: 3.0, contraction: 0.7 }).is_err());
        assert!(ModelSystem::new(SystemSpec::PlanarRepeller {
            derivatives: vec![[3.0, 4.0], [3.0, 4.0]],
            corners: Some(vec![[0.0, 0.0], [0.1, 0.1]])
        })
        .is_err());
    }

    #[test]
    fn perturbed_circle_cylinders_partition_the_circle() {
        let sys = ModelSystem::new(SystemSpec::ExpandingCircleMap { degree: 3, amplitude: 0.05 }).unwrap();
        let c0 = sys.decode(&[0]).unwrap();
        let c1 = sys.decode(&[1]).unwrap();
        let c2 = sys.decode(&[2]).unwrap();
        assert_eq!(c0.lo[0], 0.0);
        assert_abs_diff_eq!(c0.hi[0], c1.lo[0], epsilon = 1e-15);
        assert_abs_diff_eq!(c1.hi[0], c2.lo[0], epsilon = 1e-15);
        assert_abs_diff_eq!(c2.hi[0], 1.0, epsilon = 1e-15);
        // f maps each cylinder's anchor to the anchor of the shifted word
        let w = [2, 1, 0, 2, 2];
        let a = sys.anchor(&w).unwrap();
        let fa = sys.eval(&a).unwrap();
        assert_abs_diff_eq!(fa[0], sys.anchor(&w[1..]).unwrap()[0], epsilon = 1e-13);
    }

    #[test]
    fn golden_mean_coding_entropy() {
        let c = SymbolicCoding::from_matrix(vec![vec![1, 1], vec![1, 0]]).unwrap();
        assert_abs_diff_eq!(c.entropy().unwrap(), ((1.0 + 5f64.sqrt()) / 2.0).ln(), epsilon = 1e-12);
        assert!(c.is_admissible(&[0, 1, 0, 0]));
        assert!(!c.is_admissible(&[1, 1]));
        assert!(SymbolicCoding::from_matrix(vec![vec![0, 1], vec![1, 0]]).is_err());
    }
}
