//! Executable invariant suite: identities and inequalities that must hold on
//! every shipped system, each reported as a pass/fail record with its worst
//! deviation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::cocycle::{
    direct_log_singular_values, exact_exponents, lyapunov_exponents, svp_from_log_singular_values,
    word_singular_values,
};
use crate::dimension::{
    bowen_root, box_dimension, caratheodory_dimension, log_spaced, lyapunov_dimension, CaratheodoryOptions,
    SetSpec,
};
use crate::error::Result;
use crate::horseshoe::{extract_horseshoe, realized_points};
use crate::measure::ErgodicMeasure;
use crate::pressure::{
    measure_pressure, sft_pressure, system_sft_pressure, AverageOptions, Potential, SeparatedFamily,
};
use crate::systems::{Jacobian, ModelSystem, Point};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub subject: String,
    pub passed: bool,
    /// Worst deviation seen, in the units of `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub trials: usize,
}

impl CheckRecord {
    fn new(check: &str, subject: &str, worst: f64, tolerance: f64, trials: usize) -> Self {
        CheckRecord {
            check: check.into(),
            subject: subject.into(),
            passed: worst.is_finite() && worst <= tolerance,
            worst,
            tolerance,
            trials,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Random `(x, n, l, t)` triples per system for super-additivity.
    pub triples: usize,
    /// Words per system for the QR-versus-SVD comparison.
    pub qr_words: usize,
    pub qr_length: usize,
    pub t_step: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 0,
            triples: 1000,
            qr_words: 50,
            qr_length: 30,
            t_step: 0.125,
        }
    }
}

fn uniform(system: &ModelSystem) -> ErgodicMeasure {
    ErgodicMeasure::uniform(system.alphabet()).expect("alphabet is non-empty")
}

fn t_grid(m0: f64, step: f64) -> Vec<f64> {
    let count = (m0 / step).round() as usize;
    (0..=count).map(|i| (i as f64 * step).min(m0)).collect()
}

/// `phi^t(x, n + l) >= phi^t(x, n) + phi^t(f^n x, l)`.
pub fn check_super_additivity(name: &str, system: &ModelSystem, opts: &VerifyOptions) -> Result<CheckRecord> {
    let mu = uniform(system);
    let m0 = system.dim() as f64;
    let worst = (0..opts.triples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ErgodicMeasure::sample_rng(opts.seed, i);
            let n = rng.random_range(1..=50);
            let l = rng.random_range(1..=50);
            let t = rng.random_range(0.0..=m0);
            let word = mu.sample_word(&mut rng, n + l + 64);
            let whole = word_singular_values(system, &word, n + l)?;
            let head = word_singular_values(system, &word, n)?;
            let tail = word_singular_values(system, &word[n..], l)?;
            let lhs = svp_from_log_singular_values(&whole.log_singular_values, t)?;
            let rhs = svp_from_log_singular_values(&head.log_singular_values, t)?
                + svp_from_log_singular_values(&tail.log_singular_values, t)?;
            Ok(rhs - lhs)
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckRecord::new("phi-super-additivity", name, worst.max(0.0), 1e-9, opts.triples))
}

fn jacobians_along(system: &ModelSystem, word: &[u8], n: usize) -> Result<Vec<Jacobian>> {
    (0..n)
        .map(|k| match system.branch_log_scales() {
            Some(_) => Ok(system.symbol_jacobian(word[k]).expect("symbol in alphabet")),
            None => system.jacobian(&system.anchor(&word[k..(k + crate::cocycle::ORBIT_RESOLUTION).min(word.len())])?),
        })
        .collect()
}

/// QR-chained log singular values against a direct product SVD.
pub fn check_qr_against_svd(name: &str, system: &ModelSystem, opts: &VerifyOptions) -> Result<CheckRecord> {
    let mu = uniform(system);
    let n = opts.qr_length;
    let worst = (0..opts.qr_words as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ErgodicMeasure::sample_rng(opts.seed.wrapping_add(1), i);
            let word = mu.sample_word(&mut rng, n + 64);
            let qr = word_singular_values(system, &word, n)?;
            let direct = direct_log_singular_values(&jacobians_along(system, &word, n)?)?;
            Ok(qr
                .log_singular_values
                .iter()
                .zip(&direct)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(CheckRecord::new("qr-vs-svd", name, worst, 1e-8, opts.qr_words))
}

/// On affine models the cocycle of any orbit is the sum of the branch
/// log-scales along its itinerary, and sampled exponents equal the exact ones
/// when the derivative is constant.
pub fn check_exponent_exactness(name: &str, system: &ModelSystem, opts: &VerifyOptions) -> Result<Option<CheckRecord>> {
    let Some(scales) = system.branch_log_scales() else {
        return Ok(None);
    };
    let mu = uniform(system);
    let dim = system.dim();
    let n = 200;
    let words = 20u64;
    let mut worst = (0..words)
        .into_par_iter()
        .map(|i| {
            let mut rng = ErgodicMeasure::sample_rng(opts.seed.wrapping_add(2), i);
            let word = mu.sample_word(&mut rng, n);
            let got = word_singular_values(system, &word, n)?.log_singular_values;
            let mut want: Vec<f64> = (0..dim)
                .map(|c| word.iter().map(|&s| scales[s as usize][c]).sum())
                .collect();
            want.sort_by(|a, b| b.total_cmp(a));
            Ok(got
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).abs() / n as f64)
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let constant = scales.windows(2).all(|w| w[0] == w[1]);
    if constant {
        let exact = exact_exponents(system, &mu).expect("affine system");
        let est = lyapunov_exponents(system, &mu, 100, 16, opts.seed)?;
        for (a, b) in est.exponents.iter().zip(&exact) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Some(CheckRecord::new("exponent-exactness", name, worst, 1e-12, words as usize)))
}

/// Largest increase between consecutive samples of a pressure curve that
/// should be strictly decreasing; positive values are failures.
fn worst_step(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `t -> P(t)` strictly decreasing on a `t`-grid. Locally constant
/// potentials use the exact SFT value; the perturbed circle map uses a
/// separated-set estimate. On the linear horseshoe `Phi_f(t)` grows with
/// `t`, so the check runs on the unstable and stable slice potentials
/// `-t log(beta)` and `t log(alpha)` whose roots give the slice dimensions.
pub fn check_pressure_monotone(name: &str, system: &ModelSystem, opts: &VerifyOptions) -> Result<Vec<CheckRecord>> {
    let ts = t_grid(system.dim() as f64, opts.t_step);
    // the largest step must be a strict decrease
    let record = |subject: String, values: Vec<f64>| {
        let worst = worst_step(&values);
        CheckRecord {
            passed: worst < 0.0,
            ..CheckRecord::new("pressure-decreasing", &subject, worst, 0.0, values.len())
        }
    };
    let mut out = Vec::new();
    if let Some((beta, alpha)) = system.horseshoe_rates() {
        let coding = system.coding();
        for (slice, rate) in [("unstable", -beta.ln()), ("stable", alpha.ln())] {
            let ts = t_grid(1.0, opts.t_step);
            let values = ts
                .iter()
                .map(|&t| Ok(sft_pressure(&coding, &[t * rate; 2])?.value))
                .collect::<Result<Vec<f64>>>()?;
            out.push(record(format!("{name}/{slice}"), values));
        }
        return Ok(out);
    }
    let values = match system.branch_log_scales() {
        Some(_) => ts
            .iter()
            .map(|&t| Ok(system_sft_pressure(system, &Potential::Singular { t })?.value))
            .collect::<Result<Vec<f64>>>()?,
        None => {
            let family = SeparatedFamily::build(system, &[0.1], &[3, 4, 5, 6])?;
            ts.iter()
                .map(|&t| Ok(family.estimate(system, &Potential::Singular { t })?.value))
                .collect::<Result<Vec<f64>>>()?
        }
    };
    out.push(record(name.to_string(), values));
    Ok(out)
}

/// `bowen_root(P_mu(Phi_f(.)))` against the Lyapunov dimension.
pub fn check_bowen_identity(name: &str, system: &ModelSystem, mu: &ErgodicMeasure) -> Result<CheckRecord> {
    let avg = AverageOptions::default();
    let exps = exact_exponents(system, mu).expect("repeller pairs are affine");
    let target = lyapunov_dimension(mu.entropy(), &exps)?;
    let root = bowen_root(
        |t| measure_pressure(system, mu, &Potential::Singular { t }, &avg),
        system.dim() as f64,
        1e-10,
    )?;
    Ok(CheckRecord::new("bowen-identity", name, (root.root - target).abs(), 1e-6, 1))
}

/// `P_mu(Phi_f(t)) <= P_top(Phi_f(t))` and slope at most `-log(kappa)`.
pub fn check_variational(name: &str, system: &ModelSystem, mu: &ErgodicMeasure, opts: &VerifyOptions) -> Result<Vec<CheckRecord>> {
    let avg = AverageOptions::default();
    let ts = t_grid(system.dim() as f64, opts.t_step);
    let mut excess = f64::NEG_INFINITY;
    let mut values = Vec::with_capacity(ts.len());
    for &t in &ts {
        let pot = Potential::Singular { t };
        let pm = measure_pressure(system, mu, &pot, &avg)?;
        let pt = system_sft_pressure(system, &pot)?.value;
        excess = excess.max(pm - pt);
        values.push(pm);
    }
    let log_kappa = system.expansion_bounds().0.ln();
    let slope_excess = values
        .windows(2)
        .zip(ts.windows(2))
        .map(|(v, t)| (v[1] - v[0]) / (t[1] - t[0]) + log_kappa)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(vec![
        CheckRecord::new("variational-inequality", name, excess.max(0.0), 1e-9, ts.len()),
        CheckRecord::new("measure-pressure-slope", name, slope_excess.max(0.0), 1e-9, ts.len() - 1),
    ])
}

/// Carathéodory dimension of the measure-typical family against the
/// Lyapunov dimension.
pub fn check_caratheodory(name: &str, system: &ModelSystem, mu: &ErgodicMeasure, tolerance: f64) -> Result<CheckRecord> {
    let exps = exact_exponents(system, mu).expect("repeller pairs are affine");
    let target = lyapunov_dimension(mu.entropy(), &exps)?;
    let d = caratheodory_dimension(
        system,
        &SetSpec::MeasureTypical { delta: 0.1 },
        Some(mu),
        0.01,
        &CaratheodoryOptions::default(),
    )?;
    Ok(CheckRecord::new("caratheodory-vs-lyapunov", name, (d.value - target).abs(), tolerance, 1))
}

/// Sampled point cloud of a system: anchors of random deep itineraries, or
/// the realized set for the horseshoe.
fn sample_cloud(system: &ModelSystem, seed: u64) -> Result<Vec<Point>> {
    if system.is_horseshoe() {
        let mu = uniform(system);
        let h = extract_horseshoe(&system.coding(), &mu, 1, 1.0, None)?;
        return Ok(realized_points(&h, system, 1 << 16)?.points);
    }
    let mu = uniform(system);
    // itineraries of 24 symbols resolve well below the smallest box
    (0..1u64 << 16)
        .into_par_iter()
        .map(|i| {
            let mut rng = ErgodicMeasure::sample_rng(seed, i);
            system.anchor(&mu.sample_word(&mut rng, 24))
        })
        .collect()
}

/// Lower box dimension at most the upper one, over one-decade windows.
pub fn check_box_chain(name: &str, system: &ModelSystem, opts: &VerifyOptions) -> Result<CheckRecord> {
    let cloud = sample_cloud(system, opts.seed.wrapping_add(3))?;
    let b = box_dimension(&cloud, system.dim(), &log_spaced(2e-3, 0.2, 13), 1.0)?;
    // lower <= upper, and both inside [0, dim] up to counting noise
    let worst = (b.lower.value - b.upper.value)
        .max(b.upper.value - system.dim() as f64 - 0.05)
        .max(-b.lower.value)
        .max(0.0);
    Ok(CheckRecord::new("box-chain", name, worst, 1e-9, b.counts.len()))
}

/// Every check on every shipped system and measure.
pub fn run_suite(opts: &VerifyOptions) -> Result<Vec<CheckRecord>> {
    let mut out = Vec::new();
    for (name, system) in catalog::systems() {
        out.push(check_super_additivity(name, &system, opts)?);
        out.push(check_qr_against_svd(name, &system, opts)?);
        if let Some(r) = check_exponent_exactness(name, &system, opts)? {
            out.push(r);
        }
        out.extend(check_pressure_monotone(name, &system, opts)?);
        out.push(check_box_chain(name, &system, opts)?);
    }
    for (name, system, mu) in catalog::repeller_pairs() {
        out.push(check_bowen_identity(&name, &system, &mu)?);
        out.extend(check_variational(&name, &system, &mu, opts)?);
        let tolerance = if system.dim() == 2 && !system.is_periodic() { 0.08 } else { 0.05 };
        if system.dim() == 1 || !system.is_periodic() {
            out.push(check_caratheodory(&name, &system, &mu, tolerance)?);
        }
    }
    Ok(out)
}
