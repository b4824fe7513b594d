//! Horseshoes built from measure-typical blocks.
//!
//! An `n`-block is selected when its empirical statistics are within `eps` of
//! the measure in sup norm: symbol frequencies for a Bernoulli measure, pair
//! frequencies `N_ij / n` against `pi_i q_ij` for a Markov measure. Bernoulli
//! blocks concatenate freely. Markov blocks are loops at a pivot symbol: they
//! start with the pivot and their last symbol may be followed by it, so every
//! concatenation is admissible and the block shift is the full shift on the
//! selected blocks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::exact_exponents;
use crate::dimension::{
    bowen_root, box_dimension, ledrappier_young, log_spaced, lyapunov_dimension, BoxDimension,
    DimensionKind, DimensionReport,
};
use crate::error::{Error, Result};
use crate::measure::ErgodicMeasure;
use crate::numeric::{composition_count, compositions, ln_multinomial, log_sum_exp, multinomial_u128};
use crate::systems::{ModelSystem, Point, SymbolicCoding};

/// Slack on the closeness test, so that frequencies equal to `p +- eps`
/// survive rounding.
pub const SELECTION_SLACK: f64 = 1e-12;
/// Markov blocks are found by scanning all `k^n` words up to this many.
pub const MAX_ENUMERATION: u64 = 1 << 24;
/// Largest number of Bernoulli frequency classes scanned.
pub const MAX_CLASSES: u128 = 4_000_000;
/// Support coverage is checked for window lengths up to this.
const MAX_COVERAGE_DEPTH: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Concatenation {
    Full,
    Pivot { symbol: u8 },
}

/// Selected blocks with the same symbol counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockClass {
    pub counts: Vec<u32>,
    pub log_count: f64,
    pub count: Option<u128>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolicHorseshoe {
    pub n: usize,
    pub epsilon: f64,
    pub alphabet: usize,
    pub concatenation: Concatenation,
    pub classes: Vec<BlockClass>,
    pub log_block_count: f64,
    pub block_count: Option<u128>,
    /// Combinatorial term `eps'` with `h_top <= h_mu + eps'`.
    pub entropy_correction: f64,
    /// Longest window length `d` such that every admissible `d`-word of the
    /// base occurs inside some selected block.
    pub coverage_depth: usize,
    /// Index-coded blocks, kept when they were enumerated.
    #[serde(skip)]
    words: Option<Vec<u32>>,
}

fn word_of(mut idx: u64, k: usize, n: usize) -> Vec<u8> {
    let mut w = vec![0u8; n];
    for slot in w.iter_mut().rev() {
        *slot = (idx % k as u64) as u8;
        idx /= k as u64;
    }
    w
}

fn entropy_of(freqs: impl Iterator<Item = f64>) -> f64 {
    freqs.filter(|&f| f > 0.0).map(|f| -f * f.ln()).sum()
}

impl SymbolicHorseshoe {
    /// `(1/n) log(block count)`, the topological entropy of the block shift
    /// per base symbol.
    pub fn entropy(&self) -> f64 {
        self.log_block_count / self.n as f64
    }

    /// The selected blocks in lexicographic order, if there are at most `limit`.
    pub fn blocks(&self, limit: usize) -> Result<Vec<Vec<u8>>> {
        let too_many = || Error::Precision(format!("horseshoe has more than {limit} blocks"));
        if self.log_block_count > (limit as f64).ln() + 1e-9 {
            return Err(too_many());
        }
        if let Some(words) = &self.words {
            return Ok(words
                .iter()
                .map(|&w| word_of(w as u64, self.alphabet, self.n))
                .collect());
        }
        let total = (self.alphabet as u64)
            .checked_pow(self.n as u32)
            .filter(|&t| t <= MAX_ENUMERATION)
            .ok_or_else(too_many)?;
        let wanted: Vec<&[u32]> = self.classes.iter().map(|c| c.counts.as_slice()).collect();
        let k = self.alphabet;
        let n = self.n;
        Ok((0..total)
            .into_par_iter()
            .filter_map(|i| {
                let w = word_of(i, k, n);
                let mut counts = vec![0u32; k];
                for &s in &w {
                    counts[s as usize] += 1;
                }
                wanted.contains(&counts.as_slice()).then_some(w)
            })
            .collect())
    }
}

/// All `n`-blocks of `base` whose empirical statistics are `eps`-close to
/// `measure`. `pivot` is used for Markov measures only; it defaults to the
/// symbol of largest stationary mass.
pub fn extract_horseshoe(
    base: &SymbolicCoding,
    measure: &ErgodicMeasure,
    n: usize,
    eps: f64,
    pivot: Option<u8>,
) -> Result<SymbolicHorseshoe> {
    if n == 0 {
        return Err(Error::Argument("block length must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::Argument(format!("eps = {eps} must lie in [0, 1]")));
    }
    if base.alphabet != measure.alphabet() {
        return Err(Error::Argument(format!(
            "measure on {} symbols, base on {}",
            measure.alphabet(),
            base.alphabet
        )));
    }
    measure.check_supported_on(base)?;
    let infeasible = || {
        Error::Infeasible(format!(
            "no {n}-block is within {eps} of the measure; try a larger n or eps"
        ))
    };
    let (mut h, class_count) = match measure.bernoulli_probs() {
        Some(p) => {
            if !base.is_full_shift() {
                return Err(Error::Unsupported(
                    "Bernoulli horseshoes need a full-shift base".into(),
                ));
            }
            bernoulli_blocks(p, n, eps)?
        }
        None => markov_blocks(base, measure, n, eps, pivot)?,
    };
    if h.classes.is_empty() {
        return Err(infeasible());
    }
    h.entropy_correction =
        (h.entropy_correction - measure.entropy()).max(0.0) + (class_count as f64).ln() / n as f64;
    Ok(h)
}

/// The horseshoe with `entropy_correction` holding the largest empirical
/// entropy, and the number of statistics classes it was bounded over.
fn bernoulli_blocks(p: &[f64], n: usize, eps: f64) -> Result<(SymbolicHorseshoe, usize)> {
    let k = p.len();
    if composition_count(n as u32, k) > MAX_CLASSES {
        return Err(Error::Precision(format!(
            "{k} symbols at block length {n} give too many frequency classes"
        )));
    }
    let classes: Vec<BlockClass> = compositions(n as u32, k)
        .into_par_iter()
        .filter(|c| {
            c.iter()
                .zip(p)
                .all(|(&ci, &pi)| (ci as f64 / n as f64 - pi).abs() <= eps + SELECTION_SLACK)
        })
        .map(|counts| BlockClass {
            log_count: ln_multinomial(&counts),
            count: multinomial_u128(&counts),
            counts,
        })
        .collect();
    let log_block_count = log_sum_exp(&classes.iter().map(|c| c.log_count).collect::<Vec<_>>());
    let block_count = classes
        .iter()
        .try_fold(0u128, |acc, c| c.count.and_then(|v| acc.checked_add(v)));
    // Each class holds at most exp(n H(c / n)) blocks.
    let max_empirical = classes
        .iter()
        .map(|c| entropy_of(c.counts.iter().map(|&v| v as f64 / n as f64)))
        .fold(f64::NEG_INFINITY, f64::max);
    let coverage_depth = class_coverage_depth(&classes, n, k);
    let class_count = classes.len();
    let h = SymbolicHorseshoe {
        n,
        epsilon: eps,
        alphabet: k,
        concatenation: Concatenation::Full,
        classes,
        log_block_count,
        block_count,
        entropy_correction: max_empirical,
        coverage_depth,
        words: None,
    };
    Ok((h, class_count))
}

/// A `d`-word occurs in a block of class `c` exactly when its counts are
/// dominated by `c`.
fn class_coverage_depth(classes: &[BlockClass], n: usize, k: usize) -> usize {
    let mut depth = 0;
    for d in 1..=n.min(MAX_COVERAGE_DEPTH) {
        if composition_count(d as u32, k) > MAX_CLASSES {
            break;
        }
        let covered = compositions(d as u32, k).iter().all(|u| {
            classes
                .iter()
                .any(|c| c.counts.iter().zip(u).all(|(ci, ui)| ci >= ui))
        });
        if !covered {
            break;
        }
        depth = d;
    }
    depth
}

fn markov_blocks(
    base: &SymbolicCoding,
    measure: &ErgodicMeasure,
    n: usize,
    eps: f64,
    pivot: Option<u8>,
) -> Result<(SymbolicHorseshoe, usize)> {
    let k = base.alphabet;
    let pi = measure.stationary();
    let pivot = match pivot {
        Some(p) if (p as usize) < k => p,
        Some(p) => return Err(Error::Argument(format!("pivot {p} outside alphabet of size {k}"))),
        None => (0..k)
            .max_by(|&a, &b| pi[a].total_cmp(&pi[b]).then(b.cmp(&a)))
            .unwrap() as u8,
    };
    let total = (k as u64)
        .checked_pow(n as u32)
        .filter(|&t| t <= MAX_ENUMERATION)
        .ok_or_else(|| {
            Error::Precision(format!(
                "Markov block selection scans {k}^{n} words; at most {MAX_ENUMERATION} supported"
            ))
        })?;
    let allowed = |a: u8, b: u8| base.allowed(a, b) && measure.transition(a, b) > 0.0;
    let target: Vec<f64> = (0..k * k)
        .map(|ij| pi[ij / k] * measure.transition((ij / k) as u8, (ij % k) as u8))
        .collect();
    // (index, symbol counts, pair counts) of every selected loop
    let selected: Vec<(u32, Vec<u32>, Vec<u32>)> = (0..total)
        .into_par_iter()
        .filter_map(|i| {
            let w = word_of(i, k, n);
            if w[0] != pivot || !allowed(w[n - 1], pivot) || !w.windows(2).all(|p| allowed(p[0], p[1])) {
                return None;
            }
            let mut pairs = vec![0u32; k * k];
            for t in 0..n {
                let next = if t + 1 < n { w[t + 1] } else { pivot };
                pairs[w[t] as usize * k + next as usize] += 1;
            }
            let close = pairs
                .iter()
                .zip(&target)
                .all(|(&c, &q)| (c as f64 / n as f64 - q).abs() <= eps + SELECTION_SLACK);
            if !close {
                return None;
            }
            let mut counts = vec![0u32; k];
            for &s in &w {
                counts[s as usize] += 1;
            }
            Some((i as u32, counts, pairs))
        })
        .collect();

    let mut by_counts: BTreeMap<Vec<u32>, u128> = BTreeMap::new();
    let mut pair_classes: BTreeMap<&[u32], ()> = BTreeMap::new();
    let mut max_empirical = f64::NEG_INFINITY;
    for (_, counts, pairs) in &selected {
        *by_counts.entry(counts.clone()).or_default() += 1;
        if pair_classes.insert(pairs.as_slice(), ()).is_none() {
            // loops with these pair counts number at most exp(n H_cond)
            let h: f64 = (0..k)
                .map(|a| {
                    let row = &pairs[a * k..(a + 1) * k];
                    let na: u32 = row.iter().sum();
                    if na == 0 {
                        return 0.0;
                    }
                    let cond = entropy_of(row.iter().map(|&c| c as f64 / na as f64));
                    na as f64 / n as f64 * cond
                })
                .sum();
            max_empirical = max_empirical.max(h);
        }
    }
    let pair_class_count = pair_classes.len();
    let classes: Vec<BlockClass> = by_counts
        .into_iter()
        .map(|(counts, c)| BlockClass {
            counts,
            log_count: (c as f64).ln(),
            count: Some(c),
        })
        .collect();
    let words: Vec<u32> = selected.iter().map(|s| s.0).collect();
    let coverage_depth = word_coverage_depth(&words, base, measure, n);
    let h = SymbolicHorseshoe {
        n,
        epsilon: eps,
        alphabet: k,
        concatenation: Concatenation::Pivot { symbol: pivot },
        log_block_count: (words.len() as f64).ln(),
        block_count: Some(words.len() as u128),
        entropy_correction: max_empirical,
        coverage_depth,
        classes,
        words: Some(words),
    };
    Ok((h, pair_class_count))
}

fn word_coverage_depth(words: &[u32], base: &SymbolicCoding, measure: &ErgodicMeasure, n: usize) -> usize {
    let k = base.alphabet;
    let mut depth = 0;
    for d in 1..=n.min(MAX_COVERAGE_DEPTH) {
        let size = (k as u64).pow(d as u32);
        if size > MAX_ENUMERATION {
            break;
        }
        let mut seen = vec![false; size as usize];
        for &w in words {
            let w = word_of(w as u64, k, n);
            for win in w.windows(d) {
                let idx = win.iter().fold(0usize, |acc, &s| acc * k + s as usize);
                seen[idx] = true;
            }
        }
        let covered = (0..size).all(|i| {
            let u = word_of(i, k, d);
            let admissible = u
                .windows(2)
                .all(|p| base.allowed(p[0], p[1]) && measure.transition(p[0], p[1]) > 0.0);
            !admissible || seen[i as usize]
        });
        if !covered {
            break;
        }
        depth = d;
    }
    depth
}

/// Geometry a symbolic horseshoe is realized in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Geometry {
    /// Linear horseshoe: unstable rate `expansion`, stable rate `contraction`.
    Horseshoe { expansion: f64, contraction: f64 },
    /// Cantor repeller with these branch slopes.
    Repeller { slopes: Vec<f64> },
}

impl Geometry {
    pub fn from_system(system: &ModelSystem) -> Result<Self> {
        if let Some((beta, alpha)) = system.horseshoe_rates() {
            return Ok(Geometry::Horseshoe {
                expansion: beta,
                contraction: alpha,
            });
        }
        if let Some(slopes) = system.interval_slopes() {
            return Ok(Geometry::Repeller { slopes });
        }
        Err(Error::Unsupported(format!(
            "horseshoes are realized in linear horseshoes and Cantor repellers, not {}",
            system.kind_name()
        )))
    }

    fn validate(&self, alphabet: usize) -> Result<()> {
        match self {
            Geometry::Horseshoe {
                expansion,
                contraction,
            } => {
                if !(*expansion > 1.0 && expansion.is_finite()) || !(*contraction > 0.0 && *contraction < 1.0) {
                    return Err(Error::Argument(format!(
                        "rates ({expansion}, {contraction}) are not hyperbolic"
                    )));
                }
                if alphabet != 2 {
                    return Err(Error::Argument(format!(
                        "linear horseshoe has 2 branches, blocks use {alphabet} symbols"
                    )));
                }
            }
            Geometry::Repeller { slopes } => {
                if slopes.iter().any(|s| !(*s > 1.0 && s.is_finite())) {
                    return Err(Error::Argument(format!("slopes {slopes:?} must all exceed 1")));
                }
                if slopes.len() != alphabet {
                    return Err(Error::Argument(format!(
                        "{} slopes for a {alphabet}-symbol horseshoe",
                        slopes.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Dimension of the realized horseshoe: `h/log(beta) + h/log(1/alpha)` in a
/// linear horseshoe, the Moran root of the block weights in a repeller.
pub fn horseshoe_dimension(h: &SymbolicHorseshoe, geometry: &Geometry) -> Result<DimensionReport> {
    geometry.validate(h.alphabet)?;
    let entropy = h.entropy();
    let report = match geometry {
        Geometry::Horseshoe {
            expansion,
            contraction,
        } => {
            let unstable = entropy / expansion.ln();
            let stable = entropy / (1.0 / contraction).ln();
            DimensionReport::new(DimensionKind::Horseshoe, unstable + stable)
                .with("unstable_slice", unstable)
                .with("stable_slice", stable)
        }
        Geometry::Repeller { slopes } => {
            let logs: Vec<f64> = slopes.iter().map(|s| s.ln()).collect();
            let n = h.n as f64;
            let weight = |t: f64| -> Result<f64> {
                let terms: Vec<f64> = h
                    .classes
                    .iter()
                    .map(|c| {
                        let scale: f64 = c.counts.iter().zip(&logs).map(|(&ci, l)| ci as f64 * l).sum();
                        c.log_count - t * scale
                    })
                    .collect();
                Ok(log_sum_exp(&terms) / n)
            };
            let root = bowen_root(weight, 1.0, 1e-12)?;
            DimensionReport::new(DimensionKind::Horseshoe, root.root)
                .with("unstable_slice", root.root)
                .with("bracket", root.bracket)
        }
    };
    Ok(report
        .with("entropy", entropy)
        .with("blocks", h.block_count.map(|c| c.to_string()))
        .with("log_blocks", h.log_block_count)
        .with("n", h.n)
        .with("epsilon", h.epsilon))
}

/// Point cloud of a horseshoe realized in `system`, with its coordinate
/// projections. Forward itineraries give the unstable coordinate and past
/// itineraries the stable one; each side uses as many whole blocks as fit in
/// the point budget.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizedSet {
    pub points: Vec<Point>,
    pub unstable: Vec<f64>,
    pub stable: Vec<f64>,
    /// Blocks per itinerary on the `[unstable, stable]` side.
    pub depth_blocks: [usize; 2],
    /// Cylinder widths of the finest itineraries.
    pub resolution: [f64; 2],
}

fn concatenations(blocks: &[Vec<u8>], m: usize) -> Vec<Vec<u8>> {
    let mut out: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..m {
        out = out
            .iter()
            .flat_map(|prefix| {
                blocks.iter().map(move |b| {
                    let mut w = prefix.clone();
                    w.extend_from_slice(b);
                    w
                })
            })
            .collect();
    }
    out
}

pub fn realized_points(h: &SymbolicHorseshoe, system: &ModelSystem, max_points: usize) -> Result<RealizedSet> {
    let geometry = Geometry::from_system(system)?;
    geometry.validate(h.alphabet)?;
    let planar = system.is_horseshoe();
    let side_budget = if planar { (max_points as f64).sqrt() as usize } else { max_points };
    let blocks = h.blocks(side_budget).map_err(|_| {
        Error::Precision(format!(
            "{} blocks exceed the point budget {max_points}; use a smaller n",
            h.block_count.map_or("too many".into(), |c| c.to_string())
        ))
    })?;
    let count = blocks.len();
    let m = if count <= 1 {
        1
    } else {
        ((side_budget as f64).ln() / (count as f64).ln()).floor().max(1.0) as usize
    };
    let forward = concatenations(&blocks, m);
    let unstable: Vec<f64> = forward
        .par_iter()
        .map(|w| system.anchor(w).map(|p| p[0]))
        .collect::<Result<_>>()?;
    let depth = m * h.n;
    if !planar {
        let x_res = system.max_cylinder_diameter(depth);
        return Ok(RealizedSet {
            points: unstable.iter().map(|&x| [x, 0.0]).collect(),
            unstable,
            stable: Vec::new(),
            depth_blocks: [m, 0],
            resolution: [x_res, 0.0],
        });
    }
    let Some((beta, alpha)) = system.horseshoe_rates() else { unreachable!() };
    // past itineraries, most recent symbol first
    let stable: Vec<f64> = forward
        .par_iter()
        .map(|w| {
            let past: Vec<u8> = w.iter().rev().copied().collect();
            system.horseshoe_stable_coordinate(&past)
        })
        .collect::<Result<_>>()?;
    let points = unstable
        .iter()
        .flat_map(|&x| stable.iter().map(move |&y| [x, y]))
        .collect();
    Ok(RealizedSet {
        points,
        unstable,
        stable,
        depth_blocks: [m, m],
        resolution: [beta.powi(-(depth as i32)), alpha.powi(depth as i32)],
    })
}

/// Box dimensions of a realized horseshoe and of its coordinate slices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricCheck {
    pub total: BoxDimension,
    pub unstable: BoxDimension,
    pub stable: Option<BoxDimension>,
    pub deltas: [f64; 2],
}

impl GeometricCheck {
    /// Full-range box slopes `[total, unstable, stable]`.
    pub fn slopes(&self) -> [f64; 3] {
        [
            self.total.slope,
            self.unstable.slope,
            self.stable.as_ref().map_or(0.0, |s| s.slope),
        ]
    }
}

/// Box counting on the realized set over `delta` from `delta_max` down to
/// a few cylinder widths, with a single window over the whole range.
pub fn geometric_check(
    h: &SymbolicHorseshoe,
    system: &ModelSystem,
    max_points: usize,
    delta_max: f64,
) -> Result<GeometricCheck> {
    let set = realized_points(h, system, max_points)?;
    let finest = set.resolution[0].max(set.resolution[1]);
    let delta_min = 4.0 * finest;
    if (delta_max / delta_min).log10() < crate::dimension::boxcount::MIN_DECADES {
        return Err(Error::Precision(format!(
            "realized set resolves only down to {finest:e}; box counting needs two decades below {delta_max}"
        )));
    }
    let deltas = log_spaced(delta_min, delta_max, 25);
    let span = (delta_max / delta_min).log10();
    let total_dim = if system.is_horseshoe() { 2 } else { 1 };
    let line = |v: &[f64]| v.iter().map(|&x| [x, 0.0]).collect::<Vec<Point>>();
    let total = box_dimension(&set.points, total_dim, &deltas, span)?;
    let unstable = box_dimension(&line(&set.unstable), 1, &deltas, span)?;
    let stable = if system.is_horseshoe() {
        Some(box_dimension(&line(&set.stable), 1, &deltas, span)?)
    } else {
        None
    };
    Ok(GeometricCheck {
        total,
        unstable,
        stable,
        deltas: [delta_min, delta_max],
    })
}

/// One block length of a convergence study. Values are absent on
/// infeasible rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub epsilon: f64,
    pub status: String,
    pub blocks: Option<u128>,
    pub log_blocks: Option<f64>,
    pub entropy: Option<f64>,
    pub dimension: Option<f64>,
    pub target_entropy: f64,
    pub target_dimension: f64,
    pub entropy_correction: Option<f64>,
    pub coverage_depth: Option<usize>,
    pub support_distance: Option<f64>,
}

impl ConvergenceRow {
    pub fn gap(&self) -> Option<f64> {
        self.dimension.map(|d| (d - self.target_dimension).abs())
    }

    pub fn entropy_gap(&self) -> Option<f64> {
        self.entropy.map(|e| (e - self.target_entropy).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub geometry: Geometry,
    pub target_entropy: f64,
    pub target_dimension: f64,
    pub rows: Vec<ConvergenceRow>,
}

/// Target dimension of `measure`: Ledrappier-Young in a linear horseshoe,
/// Lyapunov dimension in a repeller.
pub fn target_dimension(system: &ModelSystem, measure: &ErgodicMeasure) -> Result<f64> {
    let h = measure.entropy();
    let exps = exact_exponents(system, measure)
        .ok_or_else(|| Error::Unsupported(format!("no exact exponents for {}", system.kind_name())))?;
    match Geometry::from_system(system)? {
        Geometry::Horseshoe { .. } => ledrappier_young(h, exps[0], exps[1]),
        Geometry::Repeller { .. } => lyapunov_dimension(h, &exps),
    }
}

/// Horseshoe entropy and dimension against the measure's, for each `n`.
/// A block length with no qualifying blocks gives an infeasible row.
pub fn convergence_report(
    system: &ModelSystem,
    measure: &ErgodicMeasure,
    ns: &[usize],
    eps: f64,
    pivot: Option<u8>,
) -> Result<ConvergenceReport> {
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument(format!("block lengths {ns:?} must increase")));
    }
    let geometry = Geometry::from_system(system)?;
    let target_entropy = measure.entropy();
    let target = target_dimension(system, measure)?;
    let base = system.coding();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut row = ConvergenceRow {
            n,
            epsilon: eps,
            status: "ok".into(),
            blocks: None,
            log_blocks: None,
            entropy: None,
            dimension: None,
            target_entropy,
            target_dimension: target,
            entropy_correction: None,
            coverage_depth: None,
            support_distance: None,
        };
        match extract_horseshoe(&base, measure, n, eps, pivot) {
            Ok(h) => {
                let dim = horseshoe_dimension(&h, &geometry)?;
                row.blocks = h.block_count;
                row.log_blocks = Some(h.log_block_count);
                row.entropy = Some(h.entropy());
                row.dimension = Some(dim.value);
                row.entropy_correction = Some(h.entropy_correction);
                row.coverage_depth = Some(h.coverage_depth);
                row.support_distance = Some(support_distance(system, h.coverage_depth));
            }
            Err(Error::Infeasible(_)) => row.status = "infeasible".into(),
            Err(e) => return Err(e),
        }
        rows.push(row);
    }
    Ok(ConvergenceReport {
        geometry,
        target_entropy,
        target_dimension: target,
        rows,
    })
}

/// Bound on the distance from any point of the base set to the horseshoe
/// when every `d`-cylinder of the base meets it.
pub fn support_distance(system: &ModelSystem, d: usize) -> f64 {
    match system.horseshoe_rates() {
        Some((beta, alpha)) => (beta.powi(-2 * d as i32) + alpha.powi(2 * d as i32)).sqrt(),
        None => system.max_cylinder_diameter(d),
    }
}
