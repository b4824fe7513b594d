//! Carathéodory singular dimension from cylinder covers.
//!
//! On affine-diagonal systems the weight `exp(-phi^t)` of a depth-`D`
//! cylinder depends only on how many times each branch occurs in its word,
//! so a cover is summarized by count-vector classes with log multiplicities.
//! Branches with identical scales (and, for measure-typical families, equal
//! probabilities) are merged into one type first, which keeps the class count
//! polynomial in `D` with a small exponent.
//!
//! The jump-up value of `t -> m(Z, t, r)` is located from the growth rate of
//! the cover sums between depths `D` and `2D`, bisected in `t`. The depth is
//! doubled until successive estimates agree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bowen_root, DimensionKind, DimensionReport};
use crate::cocycle::svp_from_log_singular_values;
use crate::error::{Error, Result};
use crate::measure::ErgodicMeasure;
use crate::numeric::{composition_count, compositions, ln_multinomial, log_sum_exp};
use crate::systems::ModelSystem;

/// Set whose Carathéodory dimension is estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    WholeRepeller,
    /// Union of the cylinders of the given words.
    Cylinders { words: Vec<Vec<u8>> },
    /// The fixed point with constant itinerary `symbol`.
    FixedPoint { symbol: u8 },
    /// Smallest union of whole count classes with mass at least `1 - delta`
    /// at each depth (needs a measure).
    MeasureTypical { delta: f64 },
    /// Points whose itinerary is a free concatenation of the blocks.
    Horseshoe { blocks: Vec<Vec<u8>> },
}

impl SetSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SetSpec::WholeRepeller => "whole-repeller",
            SetSpec::Cylinders { .. } => "cylinders",
            SetSpec::FixedPoint { .. } => "fixed-point",
            SetSpec::MeasureTypical { .. } => "measure-typical",
            SetSpec::Horseshoe { .. } => "horseshoe",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaratheodoryOptions {
    /// First depth `N` of the doubling schedule (in blocks for horseshoes).
    pub start_depth: usize,
    pub max_depth: usize,
    /// Successive estimates must agree to this before the schedule stops.
    pub stabilize_tol: f64,
    /// Bisection width in `t`.
    pub t_tol: f64,
    pub max_classes: u128,
}

impl Default for CaratheodoryOptions {
    fn default() -> Self {
        CaratheodoryOptions {
            start_depth: 32,
            max_depth: 1 << 17,
            stabilize_tol: 0.005,
            t_tol: 1e-7,
            max_classes: 4_000_000,
        }
    }
}

/// Count class: multiplicity and per-coordinate log-scale sums.
#[derive(Debug, Clone, PartialEq)]
struct Class {
    log_count: f64,
    scale: [f64; 2],
}

struct Types {
    /// symbol -> type index
    of: Vec<usize>,
    size: Vec<usize>,
    scale: Vec<[f64; 2]>,
    log_p: Vec<f64>,
}

impl Types {
    fn new(scales: &[[f64; 2]], probs: Option<&[f64]>) -> Self {
        let mut keys: Vec<(u64, u64, u64)> = Vec::new();
        let mut types = Types {
            of: Vec::with_capacity(scales.len()),
            size: Vec::new(),
            scale: Vec::new(),
            log_p: Vec::new(),
        };
        for (j, s) in scales.iter().enumerate() {
            let p = probs.map(|p| p[j]).unwrap_or(1.0);
            let key = (s[0].to_bits(), s[1].to_bits(), p.to_bits());
            let idx = match keys.iter().position(|k| *k == key) {
                Some(i) => i,
                None => {
                    keys.push(key);
                    types.size.push(0);
                    types.scale.push(*s);
                    types.log_p.push(p.ln());
                    keys.len() - 1
                }
            };
            types.size[idx] += 1;
            types.of.push(idx);
        }
        types
    }

    fn len(&self) -> usize {
        self.size.len()
    }

    fn counts_of(&self, word: &[u8]) -> Vec<u32> {
        let mut c = vec![0u32; self.len()];
        for &s in word {
            c[self.of[s as usize]] += 1;
        }
        c
    }

    fn scale_of(&self, counts: &[u32]) -> [f64; 2] {
        let mut acc = [0.0, 0.0];
        for (c, s) in counts.iter().zip(&self.scale) {
            acc[0] += *c as f64 * s[0];
            acc[1] += *c as f64 * s[1];
        }
        acc
    }

    /// Number of words with the given type counts.
    fn log_words(&self, counts: &[u32]) -> f64 {
        ln_multinomial(counts)
            + counts
                .iter()
                .zip(&self.size)
                .map(|(&c, &n)| c as f64 * (n as f64).ln())
                .sum::<f64>()
    }

    fn log_mass(&self, counts: &[u32]) -> f64 {
        counts
            .iter()
            .zip(&self.log_p)
            .map(|(&c, &lp)| if c == 0 { 0.0 } else { c as f64 * lp })
            .sum()
    }
}

fn add(a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Resolved set description, able to produce its class family at any depth.
enum Family {
    Whole,
    Cylinders(Vec<Vec<u8>>),
    Fixed(u8),
    Typical { delta: f64 },
    Blocks { n: usize, histogram: BTreeMap<Vec<u32>, f64> },
}

impl Family {
    /// Depth in symbols of schedule step `units`.
    fn depth(&self, units: usize, offset: usize) -> usize {
        match self {
            Family::Blocks { n, .. } => (units + offset.div_ceil(*n)) * n,
            _ => units + offset,
        }
    }

    fn class_count(&self, types: &Types, depth: usize) -> u128 {
        match self {
            Family::Fixed(_) => 1,
            Family::Blocks { n, .. } => composition_count((depth / n * n) as u32, types.len()),
            _ => composition_count(depth as u32, types.len()),
        }
    }

    fn classes(&self, types: &Types, depth: usize) -> Vec<Class> {
        let free = |d: usize, prefix: &[u32], out: &mut Vec<Class>| {
            for c in compositions(d as u32, types.len()) {
                let total = add(&c, prefix);
                out.push(Class {
                    log_count: types.log_words(&c),
                    scale: types.scale_of(&total),
                });
            }
        };
        let mut out = Vec::new();
        match self {
            Family::Whole => free(depth, &vec![0; types.len()], &mut out),
            Family::Cylinders(words) => {
                for w in words {
                    free(depth - w.len(), &types.counts_of(w), &mut out);
                }
            }
            Family::Fixed(s) => {
                let mut c = vec![0u32; types.len()];
                c[types.of[*s as usize]] = depth as u32;
                out.push(Class {
                    log_count: 0.0,
                    scale: types.scale_of(&c),
                });
            }
            Family::Typical { delta } => {
                let mut all: Vec<(f64, f64, Vec<u32>)> = compositions(depth as u32, types.len())
                    .into_iter()
                    .map(|c| (types.log_mass(&c), types.log_words(&c), c))
                    .collect();
                // heaviest cylinders first; ties keep enumeration order
                all.sort_by(|a, b| b.0.total_cmp(&a.0));
                let target = (1.0 - delta).ln();
                let mut mass = f64::NEG_INFINITY;
                for (lm, lw, c) in all {
                    mass = log_sum_exp(&[mass, lm + lw]);
                    out.push(Class {
                        log_count: lw,
                        scale: types.scale_of(&c),
                    });
                    if mass >= target {
                        break;
                    }
                }
            }
            Family::Blocks { n, histogram } => {
                let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
                acc.insert(vec![0; types.len()], 0.0);
                for _ in 0..depth / n {
                    let mut next: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
                    for (a, la) in &acc {
                        for (b, lb) in histogram {
                            next.entry(add(a, b)).or_default().push(la + lb);
                        }
                    }
                    acc = next.into_iter().map(|(k, v)| (k, log_sum_exp(&v))).collect();
                }
                for (c, lc) in acc {
                    out.push(Class {
                        log_count: lc,
                        scale: types.scale_of(&c),
                    });
                }
            }
        }
        out
    }
}

/// `log` of the depth-`D` cover sum at `t`.
fn log_cover_sum(classes: &[Class], dim: usize, t: f64) -> Result<f64> {
    let terms: Vec<f64> = classes
        .iter()
        .map(|c| {
            let mut v = c.scale[..dim].to_vec();
            v.sort_by(|a, b| b.total_cmp(a));
            Ok(c.log_count - svp_from_log_singular_values(&v, t)?)
        })
        .collect::<Result<_>>()?;
    Ok(log_sum_exp(&terms))
}

#[derive(Debug, Clone, Serialize)]
struct Step {
    depths: [usize; 2],
    classes: usize,
    log_cover_size: f64,
    estimate: f64,
}

/// Estimate of `dim_{C,r}(Z)` for the set `set`.
pub fn caratheodory_dimension(
    system: &ModelSystem,
    set: &SetSpec,
    measure: Option<&ErgodicMeasure>,
    r: f64,
    opts: &CaratheodoryOptions,
) -> Result<DimensionReport> {
    if system.is_horseshoe() {
        return Err(Error::Unsupported(
            "Carathéodory covers need an expanding repeller; realize the horseshoe with repeller geometry".into(),
        ));
    }
    let scales = system.branch_log_scales().ok_or_else(|| {
        Error::Unsupported("Carathéodory covers need affine branches with diagonal derivative".into())
    })?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Argument(format!("r = {r} must be positive")));
    }
    let lebesgue = system.lebesgue_number();
    if r >= lebesgue {
        return Err(Error::Precision(format!(
            "r = {r} is not below the Lebesgue number {lebesgue} of the branch partition"
        )));
    }
    if opts.start_depth == 0 || opts.max_depth < opts.start_depth {
        return Err(Error::Argument("depth schedule needs 1 <= start_depth <= max_depth".into()));
    }
    let k = system.alphabet();
    let check_word = |w: &[u8]| -> Result<()> {
        if w.is_empty() || w.iter().any(|&s| s as usize >= k) {
            return Err(Error::Argument(format!("word {w:?} is empty or leaves the alphabet")));
        }
        Ok(())
    };

    let mut probs: Option<Vec<f64>> = None;
    let family = match set {
        SetSpec::WholeRepeller => Family::Whole,
        SetSpec::Cylinders { words } => {
            if words.is_empty() {
                return Err(Error::Argument("cylinder union needs at least one word".into()));
            }
            for w in words {
                check_word(w)?;
            }
            let mut kept: Vec<Vec<u8>> = words
                .iter()
                .filter(|w| !words.iter().any(|v| v.len() < w.len() && w.starts_with(v)))
                .cloned()
                .collect();
            kept.sort();
            kept.dedup();
            Family::Cylinders(kept)
        }
        SetSpec::FixedPoint { symbol } => {
            check_word(&[*symbol])?;
            Family::Fixed(*symbol)
        }
        SetSpec::MeasureTypical { delta } => {
            if !(*delta > 0.0 && *delta < 1.0) {
                return Err(Error::Argument(format!("delta = {delta} must lie in (0, 1)")));
            }
            let mu = measure.ok_or_else(|| Error::Argument("measure-typical set needs a measure".into()))?;
            mu.check_supported_on(&system.coding())?;
            let p = mu.bernoulli_probs().ok_or_else(|| {
                Error::Unsupported("measure-typical covers are implemented for Bernoulli measures".into())
            })?;
            probs = Some(p.to_vec());
            Family::Typical { delta: *delta }
        }
        SetSpec::Horseshoe { blocks } => {
            let Some(first) = blocks.first() else {
                return Err(Error::Argument("horseshoe needs at least one block".into()));
            };
            let n = first.len();
            for b in blocks {
                check_word(b)?;
                if b.len() != n {
                    return Err(Error::Argument("horseshoe blocks must share one length".into()));
                }
            }
            Family::Blocks {
                n,
                histogram: BTreeMap::new(),
            }
        }
    };
    let types = Types::new(&scales, probs.as_deref());
    let family = match (family, set) {
        (Family::Blocks { n, .. }, SetSpec::Horseshoe { blocks }) => {
            let mut uniq = blocks.clone();
            uniq.sort();
            uniq.dedup();
            let mut counts: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
            for b in &uniq {
                *counts.entry(types.counts_of(b)).or_insert(0.0) += 1.0;
            }
            Family::Blocks {
                n,
                histogram: counts.into_iter().map(|(c, m)| (c, m.ln())).collect(),
            }
        }
        (f, _) => f,
    };
    if let Family::Cylinders(words) = &family {
        let longest = words.iter().map(|w| w.len()).max().unwrap_or(0);
        if longest > opts.start_depth {
            return Err(Error::Argument(format!(
                "cylinder words of length {longest} exceed the starting depth {}",
                opts.start_depth
            )));
        }
    }

    let offset = system.depth_for_diameter(r)?;
    let dim = system.dim();
    let m0 = dim as f64;
    let mut steps: Vec<Step> = Vec::new();
    let mut units = match &family {
        Family::Blocks { n, .. } => opts.start_depth.div_ceil(*n).max(1),
        _ => opts.start_depth,
    };
    let mut lower = family.classes(&types, family.depth(units, offset));
    let mut converged = false;
    loop {
        let d1 = family.depth(units, offset);
        let d2 = family.depth(2 * units, offset);
        if d2 > opts.max_depth || family.class_count(&types, d2) > opts.max_classes {
            break;
        }
        let upper = family.classes(&types, d2);
        let rate = |t: f64| -> Result<f64> {
            Ok((log_cover_sum(&upper, dim, t)? - log_cover_sum(&lower, dim, t)?) / (d2 - d1) as f64)
        };
        let root = bowen_root(rate, m0, opts.t_tol)?;
        steps.push(Step {
            depths: [d1, d2],
            classes: upper.len(),
            log_cover_size: log_cover_sum(&upper, dim, 0.0)?,
            estimate: root.root,
        });
        let n = steps.len();
        if n >= 2 && (steps[n - 1].estimate - steps[n - 2].estimate).abs() < opts.stabilize_tol {
            converged = true;
            break;
        }
        lower = upper;
        units *= 2;
    }
    let n = steps.len();
    if !converged {
        let (lo, hi) = match n {
            0 => (0.0, m0),
            1 => (steps[0].estimate, steps[0].estimate),
            _ => {
                let (a, b) = (steps[n - 2].estimate, steps[n - 1].estimate);
                (a.min(b), a.max(b))
            }
        };
        return Err(Error::Unresolved { lo, hi });
    }
    let value = steps[n - 1].estimate;
    let diameter = system.max_cylinder_diameter(offset);
    let mut report = DimensionReport::new(DimensionKind::Caratheodory, value)
        .with("set", set.name())
        .with("r", r)
        .with("lebesgue_number", lebesgue)
        .with("depth_offset", offset)
        .with("cylinder_diameter_at_offset", diameter)
        .with("ball_to_cylinder_ratio", r / diameter)
        .with("types", types.len())
        .with("schedule", &steps)
        .with("previous_estimate", steps[n - 2].estimate);
    if let SetSpec::MeasureTypical { delta } = set {
        report = report.with("delta", delta);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;

    fn opts() -> CaratheodoryOptions {
        CaratheodoryOptions::default()
    }

    #[test]
    fn whole_cantor_set() {
        let sys = catalog::cantor_3_3();
        let d = caratheodory_dimension(&sys, &SetSpec::WholeRepeller, None, 0.1, &opts()).unwrap();
        assert_abs_diff_eq!(d.value, 2f64.ln() / 3f64.ln(), epsilon = 1e-6);
    }

    #[test]
    fn planar_repeller_uses_the_smallest_singular_value_first() {
        let sys = catalog::planar_3_4();
        let d = caratheodory_dimension(&sys, &SetSpec::WholeRepeller, None, 0.1, &opts()).unwrap();
        assert_abs_diff_eq!(d.value, 2f64.ln() / 3f64.ln(), epsilon = 1e-6);
    }

    #[test]
    fn unequal_slopes_solve_the_moran_equation() {
        // 3^-s + 4^-s = 1
        let sys = catalog::cantor_3_4();
        let d = caratheodory_dimension(&sys, &SetSpec::WholeRepeller, None, 0.1, &opts()).unwrap();
        assert_abs_diff_eq!(3f64.powf(-d.value) + 4f64.powf(-d.value), 1.0, epsilon = 1e-3);
    }

    #[test]
    fn fixed_point_has_dimension_zero() {
        let sys = catalog::cantor_3_3();
        let d = caratheodory_dimension(&sys, &SetSpec::FixedPoint { symbol: 1 }, None, 0.1, &opts()).unwrap();
        assert_eq!(d.value, 0.0);
    }

    #[test]
    fn cylinder_unions_have_full_dimension() {
        let sys = catalog::cantor_3_3();
        let set = SetSpec::Cylinders {
            words: vec![vec![0, 1], vec![1], vec![1, 0, 0]],
        };
        let d = caratheodory_dimension(&sys, &set, None, 0.1, &opts()).unwrap();
        assert_abs_diff_eq!(d.value, 2f64.ln() / 3f64.ln(), epsilon = 1e-6);
    }

    #[test]
    fn torus_is_full_dimensional() {
        let sys = catalog::torus_2_3();
        let d = caratheodory_dimension(&sys, &SetSpec::WholeRepeller, None, 0.1, &opts()).unwrap();
        assert_eq!(d.value, 2.0);
    }

    #[test]
    fn coarse_radius_is_a_precision_error() {
        let sys = catalog::cantor_3_3();
        let err = caratheodory_dimension(&sys, &SetSpec::WholeRepeller, None, 0.5, &opts()).unwrap_err();
        assert!(matches!(err, Error::Precision(_)));
    }

    #[test]
    fn markov_typical_sets_are_unsupported() {
        let sys = catalog::cantor_3_3();
        let mk = ErgodicMeasure::markov(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let err = caratheodory_dimension(&sys, &SetSpec::MeasureTypical { delta: 0.1 }, Some(&mk), 0.1, &opts())
            .unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn horseshoe_blocks_match_the_moran_root() {
        let sys = catalog::cantor_3_3();
        let blocks: Vec<Vec<u8>> = (0u32..16)
            .filter(|v| v.count_ones() == 2)
            .map(|v| (0..4).map(|i| ((v >> (3 - i)) & 1) as u8).collect())
            .collect();
        let d = caratheodory_dimension(&sys, &SetSpec::Horseshoe { blocks }, None, 0.1, &opts()).unwrap();
        assert_abs_diff_eq!(d.value, 6f64.ln() / (4.0 * 3f64.ln()), epsilon = 1e-6);
    }
}
