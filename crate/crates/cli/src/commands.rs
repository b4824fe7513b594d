//! One function per command, each producing its result tables.

use lyapdim_core::cocycle::{exact_exponents, exponents_or_estimate, lyapunov_exponents};
use lyapdim_core::dimension::{
    bowen_root, box_dimension, caratheodory_dimension, cylinder_anchor_cloud, local_dimension, lyapunov_dimension,
    BoxDimension, LocalOptions, SetSpec,
};
use lyapdim_core::horseshoe::{convergence_report, extract_horseshoe, geometric_check, realized_points};
use lyapdim_core::pressure::{
    measure_pressure, system_sft_pressure, AverageOptions, Potential, PressureMethod,
    SeparatedFamily,
};
use lyapdim_core::verify::{run_suite, VerifyOptions};
use lyapdim_core::{Error, ErgodicMeasure, ModelSystem, Point};
use rayon::prelude::*;

use crate::config::{
    BoxCountParams, BoxSource, DimensionMethod, DimensionParams, HorseshoeParams, LyapunovParams, PressureCurveParams,
};
use crate::error::Result;
use crate::table::{Cell, Table};

/// Tables of a finished command, and the number of failed checks for
/// `verify-identities`.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub tables: Vec<Table>,
    pub failed_checks: usize,
}

impl From<Vec<Table>> for Output {
    fn from(tables: Vec<Table>) -> Self {
        Output {
            tables,
            failed_checks: 0,
        }
    }
}

/// Point budget when box-counting the full horseshoe.
const HORSESHOE_BOX_POINTS: usize = 1 << 20;

fn m0(system: &ModelSystem) -> f64 {
    system.dim() as f64
}

pub fn pressure_curve(
    system: &ModelSystem,
    measure: Option<&ErgodicMeasure>,
    p: &PressureCurveParams,
    seed: u64,
) -> Result<Output> {
    let mut curve = Table::new("pressure_curve", &["method", "t", "pressure", "eps", "n_lo", "n_hi", "residual"]);
    let mut roots = Table::new(
        "bowen_root",
        &["method", "decreasing", "status", "root", "bracket_lo", "bracket_hi", "evaluations"],
    );
    let avg = AverageOptions {
        n_limit: p.average_n,
        samples: p.average_samples,
        seed,
    };
    for &method in &p.methods {
        let family = match method {
            PressureMethod::SeparatedSet => Some(SeparatedFamily::build(system, &p.eps, &p.n)?),
            _ => None,
        };
        let eval = |t: f64| -> lyapdim_core::Result<(f64, Option<(f64, usize, usize, f64)>)> {
            let pot = Potential::Singular { t };
            match method {
                PressureMethod::SeparatedSet => {
                    let est = family.as_ref().expect("built above").estimate(system, &pot)?;
                    Ok((est.value, est.summary()))
                }
                PressureMethod::SftExact => Ok((system_sft_pressure(system, &pot)?.value, None)),
                PressureMethod::MeasureIdentity => {
                    let mu = measure.expect("checked with the config");
                    Ok((measure_pressure(system, mu, &pot, &avg)?, None))
                }
            }
        };
        let values = p
            .t
            .iter()
            .map(|&t| {
                if t > m0(system) {
                    return Err(Error::Range {
                        value: t,
                        lo: 0.0,
                        hi: m0(system),
                    });
                }
                eval(t)
            })
            .collect::<lyapdim_core::Result<Vec<_>>>()?;
        for (&t, (value, s)) in p.t.iter().zip(&values) {
            curve.push(vec![
                method.as_str().into(),
                t.into(),
                (*value).into(),
                s.map(|v| v.0).into(),
                s.map(|v| v.1).into(),
                s.map(|v| v.2).into(),
                s.map(|v| v.3).into(),
            ]);
        }
        let decreasing = values.windows(2).all(|w| w[1].0 < w[0].0);
        if !p.root {
            continue;
        }
        let tol = match method {
            PressureMethod::SeparatedSet => p.separated_root_tol,
            _ => 1e-10,
        };
        match bowen_root(|t| eval(t).map(|v| v.0), m0(system), tol) {
            Ok(r) => roots.push(vec![
                method.as_str().into(),
                decreasing.into(),
                "ok".into(),
                r.root.into(),
                r.bracket[0].into(),
                r.bracket[1].into(),
                r.evaluations.into(),
            ]),
            Err(Error::Bracket { .. }) => roots.push(vec![
                method.as_str().into(),
                decreasing.into(),
                "no-sign-change".into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
            ]),
            Err(e) => return Err(e.into()),
        }
    }
    let mut tables = vec![curve];
    if p.root {
        tables.push(roots);
    }
    Ok(tables.into())
}

fn exponents(system: &ModelSystem, mu: &ErgodicMeasure, n: usize, samples: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(exponents_or_estimate(system, mu, n, samples, seed)?.exponents)
}

fn slope_row(b: &BoxDimension) -> [Cell; 3] {
    [b.lower.value.into(), b.upper.value.into(), b.slope.into()]
}

pub fn dimension(
    system: &ModelSystem,
    measure: Option<&ErgodicMeasure>,
    d: &DimensionParams,
    seed: u64,
) -> Result<Output> {
    let mut t = Table::new(
        "dimension",
        &[
            "system",
            "entropy",
            "lambda_1",
            "lambda_2",
            "lyapunov",
            "bowen_root",
            "bowen_gap",
            "caratheodory",
            "box_lower",
            "box_upper",
            "box_slope",
            "local",
            "local_std_error",
        ],
    );
    let wants = |m: DimensionMethod| d.methods.contains(&m);
    let mut row: Vec<Cell> = vec![Cell::Empty; t.header.len()];
    row[0] = system.kind_name().into();
    let mut lyap = None;
    if wants(DimensionMethod::Lyapunov) || wants(DimensionMethod::BowenRoot) {
        let mu = measure.expect("checked with the config");
        let h = mu.entropy();
        let lam = exponents(system, mu, d.exponent_n, d.exponent_samples, seed)?;
        row[1] = h.into();
        row[2] = lam[0].into();
        if lam.len() > 1 {
            row[3] = lam[1].into();
        }
        if system.is_horseshoe() {
            let v = lyapdim_core::horseshoe::target_dimension(system, mu)?;
            row[4] = v.into();
            lyap = Some(v);
        } else {
            let v = lyapunov_dimension(h, &lam)?;
            row[4] = v.into();
            lyap = Some(v);
        }
    }
    if wants(DimensionMethod::BowenRoot) {
        if system.is_horseshoe() {
            return Err(Error::Unsupported(
                "the Bowen equation is posed on repellers; the horseshoe uses its slice formulas".into(),
            )
            .into());
        }
        let mu = measure.expect("checked with the config");
        let avg = AverageOptions {
            n_limit: d.exponent_n,
            samples: d.exponent_samples,
            seed,
        };
        let r = bowen_root(
            |t| measure_pressure(system, mu, &Potential::Singular { t }, &avg),
            m0(system),
            1e-10,
        )?;
        row[5] = r.root.into();
        if let Some(l) = lyap {
            row[6] = (r.root - l).abs().into();
        }
    }
    if wants(DimensionMethod::Caratheodory) {
        let mu = match d.caratheodory_set {
            SetSpec::MeasureTypical { .. } => measure,
            _ => None,
        };
        let r = caratheodory_dimension(system, &d.caratheodory_set, mu, d.caratheodory_r, &d.caratheodory)?;
        row[7] = r.value.into();
    }
    if wants(DimensionMethod::Box) {
        let cloud = if system.is_horseshoe() {
            let mu = ErgodicMeasure::uniform(system.alphabet())?;
            let h = extract_horseshoe(&system.coding(), &mu, 1, 1.0, None)?;
            realized_points(&h, system, HORSESHOE_BOX_POINTS)?.points
        } else {
            cylinder_anchor_cloud(system, d.box_depth)?
        };
        let deltas = d.box_deltas.values();
        let window = d.box_window.unwrap_or((d.box_deltas.max / d.box_deltas.min).log10());
        let b = box_dimension(&cloud, system.dim(), &deltas, window)?;
        let [lo, hi, s] = slope_row(&b);
        row[8] = lo;
        row[9] = hi;
        row[10] = s;
    }
    if wants(DimensionMethod::Local) {
        let mu = measure.expect("checked with the config");
        let r = local_dimension(
            system,
            mu,
            &LocalOptions {
                radii: d.local_radii.values(),
                samples: d.local_samples,
                seed,
            },
        )?;
        row[11] = r.value.into();
        row[12] = r.diagnostics.get("std_error").and_then(|v| v.as_f64()).into();
    }
    t.push(row);
    Ok(vec![t].into())
}

pub fn lyapunov(system: &ModelSystem, mu: &ErgodicMeasure, l: &LyapunovParams, seed: u64) -> Result<Output> {
    let mut t = Table::new("exponents", &["n", "samples", "index", "exponent", "std_error", "closed_form"]);
    let exact = exact_exponents(system, mu);
    for &n in &l.n {
        let est = lyapunov_exponents(system, mu, n, l.samples, seed)?;
        for (i, (e, se)) in est.exponents.iter().zip(&est.std_errors).enumerate() {
            t.push(vec![
                n.into(),
                l.samples.into(),
                (i + 1).into(),
                (*e).into(),
                (*se).into(),
                exact.as_ref().map(|x| x[i]).into(),
            ]);
        }
    }
    Ok(vec![t].into())
}

fn sampled_cloud(system: &ModelSystem, mu: &ErgodicMeasure, points: usize, depth: usize, seed: u64) -> Result<Vec<Point>> {
    Ok((0..points as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ErgodicMeasure::sample_rng(seed, i);
            system.anchor(&mu.sample_word(&mut rng, depth))
        })
        .collect::<lyapdim_core::Result<_>>()?)
}

pub fn box_count(system: &ModelSystem, measure: Option<&ErgodicMeasure>, b: &BoxCountParams, seed: u64) -> Result<Output> {
    let deltas = b.deltas.values();
    let window = b.window.unwrap_or((b.deltas.max / b.deltas.min).log10());
    let line = |v: &[f64]| v.iter().map(|&x| [x, 0.0]).collect::<Vec<Point>>();
    // (set name, dimension, points)
    let mut sets: Vec<(&str, usize, Vec<Point>)> = Vec::new();
    match &b.source {
        BoxSource::Cylinders { depth } => sets.push(("set", system.dim(), cylinder_anchor_cloud(system, *depth)?)),
        BoxSource::Measure { points, depth } => {
            let mu = measure.expect("checked with the config");
            sets.push(("set", system.dim(), sampled_cloud(system, mu, *points, *depth, seed)?));
        }
        BoxSource::Horseshoe {
            n,
            epsilon,
            points,
            pivot,
        } => {
            let mu = measure.expect("checked with the config");
            let h = extract_horseshoe(&system.coding(), mu, *n, *epsilon, *pivot)?;
            let r = realized_points(&h, system, *points)?;
            sets.push(("set", system.dim(), r.points));
            sets.push(("unstable", 1, line(&r.unstable)));
            if system.is_horseshoe() {
                sets.push(("stable", 1, line(&r.stable)));
            }
        }
    }
    let mut counts = Table::new("box_counts", &["set", "delta", "count"]);
    let mut dims = Table::new(
        "box_dimension",
        &["set", "points", "lower", "upper", "slope", "residual", "window_decades"],
    );
    for (name, dim, pts) in &sets {
        let r = box_dimension(pts, *dim, &deltas, window)?;
        for (d, c) in r.deltas.iter().zip(&r.counts) {
            counts.push(vec![(*name).into(), (*d).into(), (*c).into()]);
        }
        let [lo, hi, s] = slope_row(&r);
        dims.push(vec![(*name).into(), pts.len().into(), lo, hi, s, r.residual.into(), window.into()]);
    }
    Ok(vec![counts, dims].into())
}

pub fn horseshoe_approx(system: &ModelSystem, mu: &ErgodicMeasure, h: &HorseshoeParams) -> Result<Output> {
    let report = convergence_report(system, mu, &h.n, h.epsilon, h.pivot)?;
    let mut t = Table::new(
        "convergence",
        &[
            "n",
            "epsilon",
            "status",
            "blocks",
            "log_blocks",
            "entropy",
            "target_entropy",
            "entropy_gap",
            "dimension",
            "target_dimension",
            "gap",
            "entropy_correction",
            "coverage_depth",
            "support_distance",
        ],
    );
    for r in &report.rows {
        t.push(vec![
            r.n.into(),
            r.epsilon.into(),
            r.status.clone().into(),
            r.blocks.into(),
            r.log_blocks.into(),
            r.entropy.into(),
            r.target_entropy.into(),
            r.entropy_gap().into(),
            r.dimension.into(),
            r.target_dimension.into(),
            r.gap().into(),
            r.entropy_correction.into(),
            r.coverage_depth.into(),
            r.support_distance.into(),
        ]);
    }
    let mut tables = vec![t];
    if h.geometric_check {
        let mut g = Table::new(
            "geometric_check",
            &[
                "n",
                "status",
                "points",
                "total",
                "unstable",
                "stable",
                "slice_sum",
                "delta_min",
                "delta_max",
            ],
        );
        for r in &report.rows {
            let mut row = vec![Cell::Empty; g.header.len()];
            row[0] = r.n.into();
            if r.status != "ok" {
                row[1] = r.status.clone().into();
                g.push(row);
                continue;
            }
            let hs = extract_horseshoe(&system.coding(), mu, r.n, h.epsilon, h.pivot)?;
            match geometric_check(&hs, system, h.geometric_points, h.geometric_delta_max) {
                Ok(c) => {
                    let [total, unstable, stable] = c.slopes();
                    row[1] = "ok".into();
                    row[2] = realized_count(&c).into();
                    row[3] = total.into();
                    row[4] = unstable.into();
                    if c.stable.is_some() {
                        row[5] = stable.into();
                    }
                    row[6] = (unstable + stable).into();
                    row[7] = c.deltas[0].into();
                    row[8] = c.deltas[1].into();
                }
                // the block count exceeds the point budget at this n
                Err(Error::Precision(_)) => row[1] = "unresolved".into(),
                Err(e) => return Err(e.into()),
            }
            g.push(row);
        }
        tables.push(g);
    }
    Ok(tables.into())
}

fn realized_count(c: &lyapdim_core::horseshoe::GeometricCheck) -> usize {
    c.total
        .lower
        .diagnostics
        .get("points")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as usize
}

pub fn verify_identities(opts: &VerifyOptions, seed: u64) -> Result<Output> {
    let opts = VerifyOptions { seed, ..opts.clone() };
    let records = run_suite(&opts)?;
    let mut t = Table::new("checks", &["check", "subject", "passed", "worst", "tolerance", "trials"]);
    for r in &records {
        t.push(vec![
            r.check.clone().into(),
            r.subject.clone().into(),
            r.passed.into(),
            r.worst.into(),
            r.tolerance.into(),
            r.trials.into(),
        ]);
    }
    Ok(Output {
        tables: vec![t],
        failed_checks: records.iter().filter(|r| !r.passed).count(),
    })
}
