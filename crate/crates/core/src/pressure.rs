//! Topological pressure of additive and singular-valued potentials.
//!
//! Three routes:
//! * separated sets: greedy maximal `(n, eps)`-separated subsets of cylinder
//!   anchors, `log P_n` by a fixed log-sum-exp tree, and a least-squares
//!   slope in `n` per `eps`;
//! * the Perron root of a weighted transition matrix, exact for locally
//!   constant potentials on a subshift of finite type;
//! * `P_mu = h_mu + L_*` for ergodic measures.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::{exact_exponents, svp_from_log_singular_values, word_singular_values, ORBIT_RESOLUTION};
use crate::error::{Error, Result};
use crate::measure::ErgodicMeasure;
use crate::numeric::{fit_line, log_sum_exp_tree, mean_and_stderr, perron_root};
use crate::systems::{ModelSystem, Point, SymbolicCoding};

/// Largest candidate set a separated-set search will enumerate.
pub const MAX_CANDIDATES: usize = 40_000_000;

/// Tolerance on the expected growth of the estimate as `eps` shrinks.
pub const EPS_MONOTONE_TOL: f64 = 0.02;

/// A potential whose Birkhoff sums are evaluated along coded orbits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Potential {
    Zero,
    /// The sub-additive family `-phi^t(., f^n)`.
    Singular { t: f64 },
    /// Locally constant additive potential with one value per symbol.
    Symbol { weights: Vec<f64> },
    /// Additive potential `log |det D_x f|`.
    LogJacobian,
}

impl Potential {
    fn validate(&self, system: &ModelSystem) -> Result<()> {
        match self {
            Potential::Singular { t } => {
                let m0 = system.dim() as f64;
                if !(0.0..=m0).contains(t) {
                    return Err(Error::Range {
                        value: *t,
                        lo: 0.0,
                        hi: m0,
                    });
                }
            }
            Potential::Symbol { weights } => {
                if weights.len() != system.alphabet() {
                    return Err(Error::Argument(format!(
                        "{} symbol weights for an alphabet of {}",
                        weights.len(),
                        system.alphabet()
                    )));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(Error::Argument("symbol weights must be finite".into()));
                }
            }
            Potential::Zero | Potential::LogJacobian => {}
        }
        Ok(())
    }
}

/// `n`-step sum of the potential along the coded orbit of `word`.
pub fn potential_sum(system: &ModelSystem, potential: &Potential, word: &[u8], n: usize) -> Result<f64> {
    match potential {
        Potential::Zero => Ok(0.0),
        Potential::Symbol { weights } => Ok(word[..n].iter().map(|&s| weights[s as usize]).sum()),
        Potential::Singular { t } => {
            let r = word_singular_values(system, word, n)?;
            Ok(-svp_from_log_singular_values(&r.log_singular_values, *t)?)
        }
        Potential::LogJacobian => {
            let r = word_singular_values(system, word, n)?;
            Ok(r.log_singular_values.iter().sum())
        }
    }
}

/// Locally constant per-symbol values of a potential, when it has them.
/// `Singular` qualifies when every branch is affine-diagonal and all
/// branches order their coordinate scales the same way.
pub fn symbol_weights(system: &ModelSystem, potential: &Potential) -> Result<Vec<f64>> {
    potential.validate(system)?;
    let k = system.alphabet();
    match potential {
        Potential::Zero => Ok(vec![0.0; k]),
        Potential::Symbol { weights } => Ok(weights.clone()),
        Potential::Singular { .. } | Potential::LogJacobian => {
            let scales = system.branch_log_scales().ok_or_else(|| {
                Error::Unsupported("potential is not locally constant on a non-affine system".into())
            })?;
            let dim = system.dim();
            if dim == 2 {
                let up = scales.iter().all(|s| s[0] >= s[1]);
                let down = scales.iter().all(|s| s[0] <= s[1]);
                if !(up || down) && matches!(potential, Potential::Singular { .. }) {
                    return Err(Error::Unsupported(
                        "branches order their scales differently; singular potential is not additive".into(),
                    ));
                }
            }
            scales
                .iter()
                .map(|s| {
                    let mut v = s[..dim].to_vec();
                    v.sort_by(|a, b| b.total_cmp(a));
                    Ok(match potential {
                        Potential::Singular { t } => -svp_from_log_singular_values(&v, *t)?,
                        _ => v.iter().sum(),
                    })
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PressureMethod {
    SeparatedSet,
    SftExact,
    MeasureIdentity,
}

impl PressureMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            PressureMethod::SeparatedSet => "separated-set",
            PressureMethod::SftExact => "sft-exact",
            PressureMethod::MeasureIdentity => "measure-identity",
        }
    }
}

/// `log P_n` against `n` at one `eps`, with its regression.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonCurve {
    pub eps: f64,
    pub n: Vec<usize>,
    pub cardinality: Vec<usize>,
    pub log_partition: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    /// Increments `log P_{n_1} - log P_{n_0}` and `log P_{n_K} - log P_{n_{K-1}}`
    /// per unit `n`, the two ends of the regression window.
    pub window_rates: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatedDiagnostics {
    pub curves: Vec<EpsilonCurve>,
    pub n_lo: usize,
    pub n_hi: usize,
    /// Set when the estimate drops by more than [`EPS_MONOTONE_TOL`] as
    /// `eps` shrinks.
    pub eps_non_monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureEstimate {
    pub value: f64,
    pub method: PressureMethod,
    pub diagnostics: Option<SeparatedDiagnostics>,
}

impl PressureEstimate {
    /// `(eps, n_lo, n_hi, residual)` of the reported value, when separated.
    pub fn summary(&self) -> Option<(f64, usize, usize, f64)> {
        let d = self.diagnostics.as_ref()?;
        let last = d.curves.last()?;
        Some((last.eps, d.n_lo, d.n_hi, last.residual))
    }
}

/// Candidate anchors: either every cylinder of a symbolic depth, or (on the
/// torus) a product grid with separate depths per coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Candidates {
    Words { alphabet: usize, depth: usize },
    Grid { d: [usize; 2], depth: [usize; 2] },
}

fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    (0..exp).try_fold(1usize, |acc, _| acc.checked_mul(base))
}

fn digits(mut v: usize, base: usize, len: usize) -> Vec<u8> {
    let mut out = vec![0u8; len];
    for slot in out.iter_mut().rev() {
        *slot = (v % base) as u8;
        v /= base;
    }
    out
}

impl Candidates {
    fn count(&self) -> Option<usize> {
        match *self {
            Candidates::Words { alphabet, depth } => checked_pow(alphabet, depth),
            Candidates::Grid { d, depth } => checked_pow(d[0], depth[0])?.checked_mul(checked_pow(d[1], depth[1])?),
        }
    }

    fn depth(&self) -> [usize; 2] {
        match *self {
            Candidates::Words { depth, .. } => [depth, depth],
            Candidates::Grid { depth, .. } => depth,
        }
    }

    fn word(&self, idx: usize) -> Vec<u8> {
        match *self {
            Candidates::Words { alphabet, depth } => digits(idx, alphabet, depth),
            Candidates::Grid { d, depth } => {
                let ny = d[1].pow(depth[1] as u32);
                let (a, b) = (idx / ny, idx % ny);
                let xs = digits(a, d[0], depth[0]);
                let ys = digits(b, d[1], depth[1]);
                let len = depth[0].min(depth[1]);
                (0..len).map(|k| xs[k] * d[1] as u8 + ys[k]).collect()
            }
        }
    }

    fn point(&self, system: &ModelSystem, idx: usize) -> Result<Point> {
        match *self {
            Candidates::Words { .. } => system.anchor(&self.word(idx)),
            Candidates::Grid { d, depth } => {
                let nx = d[0].pow(depth[0] as u32);
                let ny = d[1].pow(depth[1] as u32);
                Ok([(idx / ny) as f64 / nx as f64, (idx % ny) as f64 / ny as f64])
            }
        }
    }

    /// `[p, f p, ..., f^{n-1} p]` for candidate `idx`, by exact word arithmetic.
    fn orbit(&self, system: &ModelSystem, idx: usize, n: usize) -> Result<Vec<Point>> {
        match *self {
            Candidates::Words { .. } => {
                let w = self.word(idx);
                system.coded_orbit(&w, n - 1, w.len())
            }
            Candidates::Grid { d, depth } => {
                let ny = d[1].pow(depth[1] as u32);
                let (a, b) = (idx / ny, idx % ny);
                Ok((0..n)
                    .map(|k| {
                        let mx = d[0].pow((depth[0] - k) as u32);
                        let my = d[1].pow((depth[1] - k) as u32);
                        [(a % mx) as f64 / mx as f64, (b % my) as f64 / my as f64]
                    })
                    .collect())
            }
        }
    }
}

/// Spatial hash of chosen points: dense when the cell count is moderate.
enum Buckets {
    Dense { ny: i64, cells: Vec<Vec<u32>> },
    Sparse(HashMap<(i64, i64), Vec<u32>>),
}

const DENSE_CELLS: i64 = 1 << 22;

impl Buckets {
    fn new(ncells: [i64; 2]) -> Self {
        // one spare cell per axis for points exactly at 1
        let (nx, ny) = (ncells[0] + 1, ncells[1] + 1);
        match nx.checked_mul(ny) {
            Some(total) if total <= DENSE_CELLS => Buckets::Dense {
                ny,
                cells: vec![Vec::new(); total as usize],
            },
            _ => Buckets::Sparse(HashMap::new()),
        }
    }

    fn index(ny: i64, len: usize, key: (i64, i64)) -> Option<usize> {
        if key.0 < 0 || key.1 < 0 || key.1 >= ny {
            return None;
        }
        let i = (key.0 * ny + key.1) as usize;
        (i < len).then_some(i)
    }

    fn get(&self, key: (i64, i64)) -> &[u32] {
        match self {
            Buckets::Dense { ny, cells } => match Self::index(*ny, cells.len(), key) {
                Some(i) => &cells[i],
                None => &[],
            },
            Buckets::Sparse(map) => map.get(&key).map(|v| v.as_slice()).unwrap_or(&[]),
        }
    }

    fn push(&mut self, key: (i64, i64), value: u32) {
        match self {
            Buckets::Dense { ny, cells } => {
                let i = Self::index(*ny, cells.len(), key).expect("chosen point inside the unit box");
                cells[i].push(value);
            }
            Buckets::Sparse(map) => map.entry(key).or_default().push(value),
        }
    }
}

/// A greedy maximal `(n, eps)`-separated subset of cylinder anchors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparatedSet {
    pub n: usize,
    pub eps: f64,
    pub points: Vec<Point>,
    /// Coding word of each point, at least `n` symbols long.
    #[serde(skip)]
    pub words: Vec<Vec<u8>>,
    pub candidates: usize,
    pub candidate_depth: [usize; 2],
    /// True when `eps` exceeded the expansivity radius and every pair was
    /// compared directly.
    pub brute_force: bool,
}

impl SeparatedSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `d_n(x, y) = max_k d(f^k x, f^k y)` from precomputed orbits.
pub fn bowen_distance(system: &ModelSystem, a: &[Point], b: &[Point]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| system.distance(p, q))
        .fold(0.0, f64::max)
}

fn auto_candidates(system: &ModelSystem, n: usize, eps: f64) -> Result<Candidates> {
    let target = eps / 4.0;
    if let crate::systems::SystemSpec::ToralEndomorphism { diagonal } = system.spec() {
        // Cylinders are products, so refine each coordinate only as far as
        // it needs: a `target / sqrt 2` side in each makes the diagonal < target.
        let side = target / std::f64::consts::SQRT_2;
        let depth = [0, 1].map(|c| {
            let d = diagonal[c] as f64;
            (0..200).find(|&k| d.powi(-(k as i32)) < side).unwrap_or(200) + n - 1
        });
        return Ok(Candidates::Grid {
            d: [diagonal[0] as usize, diagonal[1] as usize],
            depth,
        });
    }
    let depth = system.depth_for_diameter(target)? + n - 1;
    Ok(Candidates::Words {
        alphabet: system.alphabet(),
        depth,
    })
}

/// Greedy maximal `(n, eps)`-separated set over the anchors of all cylinders
/// of depth `candidate_depth` (chosen automatically when `None`), in
/// lexicographic word order.
pub fn separated_set(
    system: &ModelSystem,
    n: usize,
    eps: f64,
    candidate_depth: Option<usize>,
) -> Result<SeparatedSet> {
    if n == 0 {
        return Err(Error::Argument("separated sets need n >= 1".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Argument(format!("eps = {eps} must be positive")));
    }
    if system.is_horseshoe() {
        return Err(Error::Unsupported(
            "separated sets are built on repellers; the horseshoe is handled by its slices".into(),
        ));
    }
    let cands = match candidate_depth {
        None => auto_candidates(system, n, eps)?,
        Some(depth) => {
            if depth < n || system.max_cylinder_diameter(depth + 1 - n) >= eps / 4.0 {
                return Err(Error::Precision(format!(
                    "candidate depth {depth} leaves cylinders wider than eps/4 = {} after {} steps",
                    eps / 4.0,
                    n - 1
                )));
            }
            match system.spec() {
                crate::systems::SystemSpec::ToralEndomorphism { diagonal } => Candidates::Grid {
                    d: [diagonal[0] as usize, diagonal[1] as usize],
                    depth: [depth, depth],
                },
                _ => Candidates::Words {
                    alphabet: system.alphabet(),
                    depth,
                },
            }
        }
    };
    let total = cands
        .count()
        .filter(|&c| c <= MAX_CANDIDATES)
        .ok_or_else(|| Error::Precision(format!("more than {MAX_CANDIDATES} candidates at n = {n}, eps = {eps}")))?;

    let dim = system.dim();
    let periodic = system.is_periodic();
    let brute_force = eps > system.expansivity_radius();
    let window = system.separation_window(n, eps);
    let reach: i64 = if periodic { 2 } else { 1 };
    let ncells = [0, 1].map(|c| (1.0 / window[c]).ceil().max(1.0) as i64);
    let cell_of = |p: &Point| -> (i64, i64) {
        let cx = (p[0] / window[0]).floor() as i64;
        let cy = if dim == 2 { (p[1] / window[1]).floor() as i64 } else { 0 };
        (cx, cy)
    };
    let wrap = |v: i64, c: usize| if periodic { v.rem_euclid(ncells[c]) } else { v };

    let mut buckets = Buckets::new(ncells);
    // chosen orbits, flattened with stride n
    let mut orbits: Vec<Point> = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    let y_reach = if dim == 2 { reach } else { 0 };
    let near = |p: &Point, q: &Point| {
        (0..dim).all(|c| {
            let mut d = (p[c] - q[c]).abs();
            if periodic {
                d = d.min(1.0 - d);
            }
            d <= window[c] * (1.0 + 1e-9)
        })
    };

    for idx in 0..total {
        let p = cands.point(system, idx)?;
        let mut orbit: Option<Vec<Point>> = None;
        let mut separated = true;
        let check = |j: usize, orbit: &mut Option<Vec<Point>>| -> Result<bool> {
            let other = &orbits[j * n..(j + 1) * n];
            if !brute_force && !near(&p, &other[0]) {
                return Ok(true);
            }
            if orbit.is_none() {
                *orbit = Some(cands.orbit(system, idx, n)?);
            }
            Ok(bowen_distance(system, orbit.as_ref().unwrap(), other) > eps)
        };
        if brute_force {
            for j in 0..chosen.len() {
                if !check(j, &mut orbit)? {
                    separated = false;
                    break;
                }
            }
        } else {
            let (cx, cy) = cell_of(&p);
            'cells: for dx in -reach..=reach {
                for dy in -y_reach..=y_reach {
                    let key = (wrap(cx + dx, 0), wrap(cy + dy, 1));
                    for &j in buckets.get(key) {
                        if !check(j as usize, &mut orbit)? {
                            separated = false;
                            break 'cells;
                        }
                    }
                }
            }
        }
        if separated {
            let orbit = match orbit {
                Some(o) => o,
                None => cands.orbit(system, idx, n)?,
            };
            if !brute_force {
                let (cx, cy) = cell_of(&p);
                buckets.push((wrap(cx, 0), wrap(cy, 1)), chosen.len() as u32);
            }
            orbits.extend_from_slice(&orbit);
            chosen.push(idx);
        }
    }
    Ok(SeparatedSet {
        n,
        eps,
        points: orbits.iter().step_by(n).copied().collect(),
        words: chosen.iter().map(|&i| cands.word(i)).collect(),
        candidates: total,
        candidate_depth: cands.depth(),
        brute_force,
    })
}

/// Separated sets for every `(eps, n)` pair, reusable across potentials.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedFamily {
    pub eps: Vec<f64>,
    pub ns: Vec<usize>,
    /// `sets[i][j]` is the set for `eps[i]`, `ns[j]`.
    pub sets: Vec<Vec<SeparatedSet>>,
}

fn check_grid(eps: &[f64], ns: &[usize]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::Argument("eps list is empty".into()));
    }
    if eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::Argument(format!("eps list {eps:?} must be positive")));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Argument(format!("eps list {eps:?} must be strictly descending")));
    }
    if ns.len() < 4 {
        return Err(Error::Argument(format!("n range needs at least 4 values, got {}", ns.len())));
    }
    if ns[0] == 0 || ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument(format!("n range {ns:?} must be increasing and >= 1")));
    }
    Ok(())
}

impl SeparatedFamily {
    pub fn build(system: &ModelSystem, eps: &[f64], ns: &[usize]) -> Result<Self> {
        check_grid(eps, ns)?;
        let sets = eps
            .iter()
            .map(|&e| ns.iter().map(|&n| separated_set(system, n, e, None)).collect())
            .collect::<Result<_>>()?;
        Ok(SeparatedFamily {
            eps: eps.to_vec(),
            ns: ns.to_vec(),
            sets,
        })
    }

    /// Pressure of `potential` from the stored sets.
    pub fn estimate(&self, system: &ModelSystem, potential: &Potential) -> Result<PressureEstimate> {
        potential.validate(system)?;
        let mut curves = Vec::with_capacity(self.eps.len());
        for (i, &eps) in self.eps.iter().enumerate() {
            let mut log_partition = Vec::with_capacity(self.ns.len());
            let mut cardinality = Vec::with_capacity(self.ns.len());
            for set in &self.sets[i] {
                let sums: Vec<f64> = set
                    .words
                    .par_iter()
                    .map(|w| potential_sum(system, potential, w, set.n))
                    .collect::<Result<_>>()?;
                let lp = log_sum_exp_tree(&sums);
                if !lp.is_finite() {
                    return Err(Error::Numerical {
                        step: set.n,
                        what: format!("log P_n = {lp} at eps = {eps}"),
                    });
                }
                log_partition.push(lp);
                cardinality.push(set.len());
            }
            let xs: Vec<f64> = self.ns.iter().map(|&n| n as f64).collect();
            let fit = fit_line(&xs, &log_partition)?;
            let k = xs.len();
            let window_rates = [
                (log_partition[1] - log_partition[0]) / (xs[1] - xs[0]),
                (log_partition[k - 1] - log_partition[k - 2]) / (xs[k - 1] - xs[k - 2]),
            ];
            curves.push(EpsilonCurve {
                eps,
                n: self.ns.clone(),
                cardinality,
                log_partition,
                slope: fit.slope,
                intercept: fit.intercept,
                residual: fit.residual,
                window_rates,
            });
        }
        let eps_non_monotone = curves.windows(2).any(|w| w[1].slope < w[0].slope - EPS_MONOTONE_TOL);
        let value = curves.last().map(|c| c.slope).unwrap_or(f64::NAN);
        Ok(PressureEstimate {
            value,
            method: PressureMethod::SeparatedSet,
            diagnostics: Some(SeparatedDiagnostics {
                curves,
                n_lo: self.ns[0],
                n_hi: *self.ns.last().unwrap(),
                eps_non_monotone,
            }),
        })
    }
}

/// Separated-set pressure estimate; the value is the regression slope at the
/// smallest `eps`.
pub fn pressure_estimate(
    system: &ModelSystem,
    potential: &Potential,
    eps: &[f64],
    ns: &[usize],
) -> Result<PressureEstimate> {
    potential.validate(system)?;
    SeparatedFamily::build(system, eps, ns)?.estimate(system, potential)
}

/// `log` of the Perron root of `A_ij exp(w_j)`.
pub fn sft_pressure(coding: &SymbolicCoding, weights: &[f64]) -> Result<PressureEstimate> {
    if weights.len() != coding.alphabet {
        return Err(Error::Argument(format!(
            "{} weights for an alphabet of {}",
            weights.len(),
            coding.alphabet
        )));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Argument("weights must be finite".into()));
    }
    let wmax = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m: Vec<Vec<f64>> = coding
        .transitions
        .iter()
        .map(|row| {
            row.iter()
                .zip(weights)
                .map(|(&a, &w)| a as f64 * (w - wmax).exp())
                .collect()
        })
        .collect();
    let rho = perron_root(&m, 1e-12)?;
    Ok(PressureEstimate {
        value: rho.ln() + wmax,
        method: PressureMethod::SftExact,
        diagnostics: None,
    })
}

/// Exact SFT pressure of a locally constant potential on the system's coding.
pub fn system_sft_pressure(system: &ModelSystem, potential: &Potential) -> Result<PressureEstimate> {
    sft_pressure(&system.coding(), &symbol_weights(system, potential)?)
}

/// Horizon and sample count for Monte-Carlo potential averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageOptions {
    pub n_limit: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for AverageOptions {
    fn default() -> Self {
        AverageOptions {
            n_limit: 1000,
            samples: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialAverage {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
}

/// `L_*(Phi, mu) = lim (1/n) int phi_n dmu`: closed form on affine-diagonal
/// systems and for locally constant potentials, Monte-Carlo otherwise.
pub fn potential_average(
    system: &ModelSystem,
    measure: &ErgodicMeasure,
    potential: &Potential,
    opts: &AverageOptions,
) -> Result<PotentialAverage> {
    potential.validate(system)?;
    measure.check_supported_on(&system.coding())?;
    let exact = |value: f64| PotentialAverage {
        value,
        std_error: 0.0,
        exact: true,
    };
    let pi = measure.stationary();
    match potential {
        Potential::Zero => return Ok(exact(0.0)),
        Potential::Symbol { weights } => return Ok(exact(pi.iter().zip(weights).map(|(p, w)| p * w).sum())),
        Potential::Singular { t } => {
            if let Some(lam) = exact_exponents(system, measure) {
                return Ok(exact(-svp_from_log_singular_values(&lam, *t)?));
            }
        }
        Potential::LogJacobian => {
            if let Some(lam) = exact_exponents(system, measure) {
                return Ok(exact(lam.iter().sum()));
            }
        }
    }
    let n = opts.n_limit;
    if n == 0 || opts.samples == 0 {
        return Err(Error::Argument("Monte-Carlo average needs n_limit, samples >= 1".into()));
    }
    let vals: Vec<f64> = (0..opts.samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ErgodicMeasure::sample_rng(opts.seed, i);
            let w = measure.sample_word(&mut rng, n + ORBIT_RESOLUTION);
            Ok(potential_sum(system, potential, &w, n)? / n as f64)
        })
        .collect::<Result<_>>()?;
    let (value, std_error) = mean_and_stderr(&vals);
    if !value.is_finite() {
        return Err(Error::Numerical {
            step: n,
            what: "non-finite potential average".into(),
        });
    }
    Ok(PotentialAverage {
        value,
        std_error,
        exact: false,
    })
}

/// `P_mu(f, Phi) = h_mu + L_*(Phi, mu)`.
pub fn measure_pressure(
    system: &ModelSystem,
    measure: &ErgodicMeasure,
    potential: &Potential,
    opts: &AverageOptions,
) -> Result<f64> {
    Ok(measure.entropy() + potential_average(system, measure, potential, opts)?.value)
}

/// One sample of a pressure curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressurePoint {
    pub t: f64,
    pub value: f64,
    pub method: PressureMethod,
    pub eps: Option<f64>,
    pub n_lo: Option<usize>,
    pub n_hi: Option<usize>,
    pub residual: Option<f64>,
}

/// Sampled map `t -> P(t)` with a monotonicity flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PressureCurve {
    pub points: Vec<PressurePoint>,
    pub strictly_decreasing: bool,
}

impl PressureCurve {
    pub fn from_points(points: Vec<PressurePoint>) -> Self {
        let strictly_decreasing = points.windows(2).all(|w| w[1].value < w[0].value);
        PressureCurve {
            points,
            strictly_decreasing,
        }
    }
}

fn point_from(t: f64, est: &PressureEstimate) -> PressurePoint {
    let s = est.summary();
    PressurePoint {
        t,
        value: est.value,
        method: est.method,
        eps: s.map(|v| v.0),
        n_lo: s.map(|v| v.1),
        n_hi: s.map(|v| v.2),
        residual: s.map(|v| v.3),
    }
}

/// `t -> P_top(Phi_f(t))` on a `t`-grid from one separated family.
pub fn separated_pressure_curve(system: &ModelSystem, family: &SeparatedFamily, ts: &[f64]) -> Result<PressureCurve> {
    let points = ts
        .iter()
        .map(|&t| Ok(point_from(t, &family.estimate(system, &Potential::Singular { t })?)))
        .collect::<Result<_>>()?;
    Ok(PressureCurve::from_points(points))
}

/// `t -> P(Phi_f(t))` by the exact SFT formula.
pub fn sft_pressure_curve(system: &ModelSystem, ts: &[f64]) -> Result<PressureCurve> {
    let points = ts
        .iter()
        .map(|&t| Ok(point_from(t, &system_sft_pressure(system, &Potential::Singular { t })?)))
        .collect::<Result<_>>()?;
    Ok(PressureCurve::from_points(points))
}

/// `t -> P_mu(Phi_f(t))`.
pub fn measure_pressure_curve(
    system: &ModelSystem,
    measure: &ErgodicMeasure,
    ts: &[f64],
    opts: &AverageOptions,
) -> Result<PressureCurve> {
    let points = ts
        .iter()
        .map(|&t| {
            Ok(PressurePoint {
                t,
                value: measure_pressure(system, measure, &Potential::Singular { t }, opts)?,
                method: PressureMethod::MeasureIdentity,
                eps: None,
                n_lo: None,
                n_hi: None,
                residual: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(PressureCurve::from_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use approx::assert_abs_diff_eq;

    fn assert_pairwise_separated(system: &ModelSystem, set: &SeparatedSet) {
        let orbits: Vec<Vec<Point>> = set
            .points
            .iter()
            .map(|p| system.orbit(p, set.n - 1).unwrap())
            .collect();
        for i in 0..orbits.len() {
            for j in i + 1..orbits.len() {
                assert!(bowen_distance(system, &orbits[i], &orbits[j]) > set.eps);
            }
        }
    }

    #[test]
    fn separated_set_examples() {
        let doubling = catalog::doubling();
        let s = separated_set(&doubling, 3, 0.1, None).unwrap();
        assert!(s.len() >= 8 && s.len() <= 80, "{}", s.len());
        assert_pairwise_separated(&doubling, &s);
        let cantor = catalog::cantor_3_3();
        assert_eq!(separated_set(&cantor, 1, 1.0, None).unwrap().len(), 1);
        let s = separated_set(&cantor, 4, 0.1, None).unwrap();
        assert_pairwise_separated(&cantor, &s);
    }

    #[test]
    fn doubling_separated_set_matches_grid_brute_force() {
        // maximal greedy set over a 10^4-point grid, compared pairwise
        let doubling = catalog::doubling();
        let (n, eps) = (3, 0.1);
        let orbit = |x: f64| doubling.orbit(&[x, 0.0], n - 1).unwrap();
        let mut chosen: Vec<Vec<Point>> = Vec::new();
        for i in 0..10_000 {
            let o = orbit(i as f64 / 10_000.0);
            if chosen.iter().all(|c| bowen_distance(&doubling, c, &o) > eps) {
                chosen.push(o);
            }
        }
        let ours = separated_set(&doubling, n, eps, None).unwrap().len() as f64;
        let brute = chosen.len() as f64;
        assert!(ours / brute <= 2.0 && brute / ours <= 2.0, "{ours} vs {brute}");
    }

    #[test]
    fn spatial_filter_agrees_with_pairwise_scan() {
        let torus = catalog::torus_2_3();
        let s = separated_set(&torus, 2, 0.15, None).unwrap();
        assert!(!s.brute_force);
        assert_pairwise_separated(&torus, &s);
    }

    #[test]
    fn coarse_candidate_depth_is_a_precision_error() {
        let doubling = catalog::doubling();
        assert!(matches!(separated_set(&doubling, 5, 0.1, Some(6)), Err(Error::Precision(_))));
        assert!(separated_set(&doubling, 5, 0.1, Some(12)).is_ok());
    }

    #[test]
    fn sft_examples() {
        let two = SymbolicCoding::full_shift(2);
        assert_abs_diff_eq!(sft_pressure(&two, &[0.0, 0.0]).unwrap().value, 2f64.ln(), epsilon = 1e-12);
        let third = (1.0f64 / 3.0).ln();
        assert_abs_diff_eq!(
            sft_pressure(&two, &[third, third]).unwrap().value,
            -0.40546510810816444,
            epsilon = 1e-12
        );
        let golden = SymbolicCoding::from_matrix(vec![vec![1, 1], vec![1, 0]]).unwrap();
        let p = sft_pressure(&golden, &[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(p.value, 0.48121182505960347, epsilon = 1e-12);
        assert!(p.diagnostics.is_none());
    }

    #[test]
    fn potential_average_examples() {
        let opts = AverageOptions::default();
        let torus = catalog::torus_2_3();
        let m = ErgodicMeasure::bernoulli(&catalog::TORUS_NONUNIFORM).unwrap();
        let a = potential_average(&torus, &m, &Potential::Singular { t: 1.0 }, &opts).unwrap();
        assert_abs_diff_eq!(a.value, -2f64.ln(), epsilon = 1e-14);
        let doubling = catalog::doubling();
        let leb = ErgodicMeasure::uniform(2).unwrap();
        let a = potential_average(&doubling, &leb, &Potential::LogJacobian, &opts).unwrap();
        assert_abs_diff_eq!(a.value, 2f64.ln(), epsilon = 1e-14);
        let mk = ErgodicMeasure::markov(vec![vec![0.9, 0.1], vec![0.5, 0.5]]).unwrap();
        let ind = Potential::Symbol { weights: vec![1.0, 0.0] };
        let a = potential_average(&doubling, &mk, &ind, &opts).unwrap();
        assert_abs_diff_eq!(a.value, 5.0 / 6.0, epsilon = 1e-12);
    }

    #[test]
    fn monte_carlo_average_on_the_perturbed_circle() {
        let sys = catalog::perturbed_circle();
        let leb = ErgodicMeasure::uniform(2).unwrap();
        let opts = AverageOptions {
            n_limit: 400,
            samples: 40,
            seed: 5,
        };
        let a = potential_average(&sys, &leb, &Potential::LogJacobian, &opts).unwrap();
        assert!(!a.exact);
        let (lo, hi) = sys.expansion_bounds();
        assert!(a.value > lo.ln() && a.value < hi.ln());
    }

    #[test]
    fn measure_pressure_examples() {
        let opts = AverageOptions::default();
        let cantor = catalog::cantor_3_3();
        let half = ErgodicMeasure::uniform(2).unwrap();
        let s = 2f64.ln() / 3f64.ln();
        assert_abs_diff_eq!(
            measure_pressure(&cantor, &half, &Potential::Singular { t: s }, &opts).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            measure_pressure(&cantor, &half, &Potential::Singular { t: 0.0 }, &opts).unwrap(),
            2f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn separated_estimate_of_entropy() {
        let doubling = catalog::doubling();
        let est = pressure_estimate(&doubling, &Potential::Zero, &[0.2, 0.1], &[6, 7, 8, 9, 10]).unwrap();
        assert!((est.value - 2f64.ln()).abs() < 0.02, "{}", est.value);
        let d = est.diagnostics.unwrap();
        assert_eq!(d.curves.len(), 2);
        assert_eq!((d.n_lo, d.n_hi), (6, 10));
    }

    #[test]
    fn invalid_grids_are_rejected() {
        let doubling = catalog::doubling();
        assert!(pressure_estimate(&doubling, &Potential::Zero, &[0.1, 0.2], &[1, 2, 3, 4]).is_err());
        assert!(pressure_estimate(&doubling, &Potential::Zero, &[0.1], &[1, 2, 3]).is_err());
        assert!(pressure_estimate(&doubling, &Potential::Singular { t: 1.5 }, &[0.1], &[1, 2, 3, 4]).is_err());
    }
}
