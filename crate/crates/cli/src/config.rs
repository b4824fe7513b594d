//! Experiment configuration, read from TOML.
//!
//! The grammar is documented in `docs/config.md`. Unknown keys are rejected
//! everywhere, and a section for a command other than the selected one is an
//! error, so every accepted file means exactly one experiment.

use std::path::PathBuf;

use lyapdim_core::dimension::{CaratheodoryOptions, SetSpec};
use lyapdim_core::pressure::PressureMethod;
use lyapdim_core::verify::VerifyOptions;
use lyapdim_core::{MeasureSpec, SystemSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    PressureCurve,
    Dimension,
    Lyapunov,
    BoxCount,
    HorseshoeApprox,
    VerifyIdentities,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::PressureCurve => "pressure-curve",
            Command::Dimension => "dimension",
            Command::Lyapunov => "lyapunov",
            Command::BoxCount => "box-count",
            Command::HorseshoeApprox => "horseshoe-approx",
            Command::VerifyIdentities => "verify-identities",
        }
    }

    /// Name of the command's parameter table.
    pub fn section(&self) -> &'static str {
        match self {
            Command::PressureCurve => "pressure_curve",
            Command::Dimension => "dimension",
            Command::Lyapunov => "lyapunov",
            Command::BoxCount => "box_count",
            Command::HorseshoeApprox => "horseshoe_approx",
            Command::VerifyIdentities => "verify_identities",
        }
    }
}

/// Log-spaced grid `count` values from `min` to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        lyapdim_core::dimension::log_spaced(self.min, self.max, self.count)
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !(self.min > 0.0 && self.min.is_finite() && self.max.is_finite()) {
            return Err(CliError::schema(path, "min and max must be positive and finite"));
        }
        if self.max <= self.min {
            return Err(CliError::schema(path, "max must exceed min"));
        }
        if self.count < 3 {
            return Err(CliError::schema(format!("{path}.count"), "at least 3 values are needed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureCurveParams {
    pub t: Vec<f64>,
    #[serde(default = "default_pressure_methods")]
    pub methods: Vec<PressureMethod>,
    #[serde(default = "default_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "default_ns")]
    pub n: Vec<usize>,
    /// Solve `P(t) = 0` for each method.
    #[serde(default = "yes")]
    pub root: bool,
    /// Bisection width of the separated-set root.
    #[serde(default = "default_separated_root_tol")]
    pub separated_root_tol: f64,
    #[serde(default = "default_mc_n")]
    pub average_n: usize,
    #[serde(default = "default_mc_samples")]
    pub average_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionMethod {
    Lyapunov,
    BowenRoot,
    Caratheodory,
    Box,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionParams {
    #[serde(default = "default_dimension_methods")]
    pub methods: Vec<DimensionMethod>,
    #[serde(default = "default_mc_n")]
    pub exponent_n: usize,
    #[serde(default = "default_mc_samples")]
    pub exponent_samples: usize,
    #[serde(default = "default_caratheodory_set")]
    pub caratheodory_set: SetSpec,
    #[serde(default = "default_caratheodory_r")]
    pub caratheodory_r: f64,
    #[serde(default)]
    pub caratheodory: CaratheodoryOptions,
    #[serde(default = "default_box_depth")]
    pub box_depth: usize,
    #[serde(default = "default_box_deltas")]
    pub box_deltas: Grid,
    /// Sliding-window width in decades; the whole range when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_window: Option<f64>,
    #[serde(default = "default_local_radii")]
    pub local_radii: Grid,
    #[serde(default = "default_local_samples")]
    pub local_samples: usize,
}

impl Default for DimensionParams {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovParams {
    #[serde(default = "default_lyapunov_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_mc_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoxSource {
    /// Anchors of every cylinder of the given depth.
    Cylinders { depth: usize },
    /// Anchors of `points` measure-random itineraries of length `depth`.
    Measure { points: usize, depth: usize },
    /// The realized horseshoe of the measure's `(n, epsilon)` blocks.
    Horseshoe {
        n: usize,
        epsilon: f64,
        points: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pivot: Option<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxCountParams {
    pub source: BoxSource,
    pub deltas: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorseshoeParams {
    pub n: Vec<usize>,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pivot: Option<u8>,
    /// Box-count the realized sets as well.
    #[serde(default)]
    pub geometric_check: bool,
    #[serde(default = "default_geometric_points")]
    pub geometric_points: usize,
    #[serde(default = "default_geometric_delta_max")]
    pub geometric_delta_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_curve: Option<PressureCurveParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<DimensionParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_count: Option<BoxCountParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horseshoe_approx: Option<HorseshoeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_identities: Option<VerifyOptions>,
}

fn yes() -> bool {
    true
}
fn default_pressure_methods() -> Vec<PressureMethod> {
    vec![PressureMethod::SftExact]
}
fn default_eps() -> Vec<f64> {
    vec![0.1]
}
fn default_ns() -> Vec<usize> {
    vec![4, 5, 6, 7, 8]
}
fn default_separated_root_tol() -> f64 {
    0.01
}
fn default_mc_n() -> usize {
    1000
}
fn default_mc_samples() -> usize {
    200
}
fn default_dimension_methods() -> Vec<DimensionMethod> {
    vec![DimensionMethod::Lyapunov, DimensionMethod::BowenRoot]
}
fn default_caratheodory_set() -> SetSpec {
    SetSpec::MeasureTypical { delta: 0.1 }
}
fn default_caratheodory_r() -> f64 {
    0.01
}
fn default_box_depth() -> usize {
    12
}
fn default_box_deltas() -> Grid {
    Grid {
        min: 1e-5,
        max: 1e-2,
        count: 16,
    }
}
fn default_local_radii() -> Grid {
    Grid {
        min: 1e-6,
        max: 1e-2,
        count: 9,
    }
}
fn default_local_samples() -> usize {
    200
}
fn default_lyapunov_n() -> Vec<usize> {
    vec![1000]
}
fn default_geometric_points() -> usize {
    1 << 20
}
fn default_geometric_delta_max() -> f64 {
    0.1
}

/// Parses a config, reporting the key path of the first schema violation.
pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let describe = |e: &toml::de::Error| match e.span() {
        Some(span) => format!("{} (line {})", e.message(), text[..span.start].matches('\n').count() + 1),
        None => e.message().to_string(),
    };
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::schema("<document>", describe(&e)))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::schema(path, describe(e.inner()))
    })
}

fn check_positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::schema(path, format!("must be positive and finite, got {v}")))
    }
}

fn check_nonzero(path: &str, v: usize) -> Result<()> {
    if v == 0 {
        Err(CliError::schema(path, "must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_increasing(path: &str, v: &[usize]) -> Result<()> {
    if v.is_empty() {
        return Err(CliError::schema(path, "must not be empty"));
    }
    if v[0] == 0 || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::schema(path, format!("must be positive and increasing, got {v:?}")));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Section names present in the file, by command.
    fn sections(&self) -> [(Command, bool); 6] {
        [
            (Command::PressureCurve, self.pressure_curve.is_some()),
            (Command::Dimension, self.dimension.is_some()),
            (Command::Lyapunov, self.lyapunov.is_some()),
            (Command::BoxCount, self.box_count.is_some()),
            (Command::HorseshoeApprox, self.horseshoe_approx.is_some()),
            (Command::VerifyIdentities, self.verify_identities.is_some()),
        ]
    }

    /// Exponents of every shipped system but the perturbed circle have a
    /// closed form; the perturbed circle needs Monte-Carlo averages.
    fn closed_form_exponents(&self) -> bool {
        !matches!(self.system, Some(SystemSpec::ExpandingCircleMap { amplitude, .. }) if amplitude != 0.0)
    }

    fn needs_seed(&self) -> bool {
        let sampled = !self.closed_form_exponents();
        match self.command {
            Command::Lyapunov | Command::VerifyIdentities => true,
            Command::PressureCurve => {
                sampled
                    && self
                        .pressure_curve
                        .as_ref()
                        .is_some_and(|p| p.methods.contains(&PressureMethod::MeasureIdentity))
            }
            Command::Dimension => self.dimension.as_ref().is_some_and(|d| {
                d.methods.iter().any(|m| match m {
                    DimensionMethod::Local => true,
                    DimensionMethod::Lyapunov | DimensionMethod::BowenRoot => sampled,
                    _ => false,
                })
            }),
            Command::BoxCount => matches!(
                self.box_count.as_ref().map(|b| &b.source),
                Some(BoxSource::Measure { .. })
            ),
            Command::HorseshoeApprox => false,
        }
    }

    /// Applies command-line overrides, fills an omitted optional section with
    /// its defaults and checks every constraint the schema cannot express.
    pub fn resolve(mut self, seed: Option<u64>, geometric_check: bool) -> Result<Self> {
        if seed.is_some() {
            self.seed = seed;
        }
        for (cmd, present) in self.sections() {
            if present && cmd != self.command {
                return Err(CliError::schema(
                    cmd.section(),
                    format!("section does not apply to command {}", self.command.as_str()),
                ));
            }
        }
        match self.command {
            Command::Dimension if self.dimension.is_none() => self.dimension = Some(DimensionParams::default()),
            Command::Lyapunov if self.lyapunov.is_none() => {
                self.lyapunov = Some(LyapunovParams {
                    n: default_lyapunov_n(),
                    samples: default_mc_samples(),
                })
            }
            Command::VerifyIdentities if self.verify_identities.is_none() => {
                self.verify_identities = Some(VerifyOptions::default())
            }
            _ => {}
        }
        let required = |present: bool, name: &str| -> Result<()> {
            if present {
                Ok(())
            } else {
                Err(CliError::schema(name, "missing; required by this command"))
            }
        };
        if self.command != Command::VerifyIdentities {
            required(self.system.is_some(), "system")?;
        } else if self.system.is_some() || self.measure.is_some() {
            return Err(CliError::schema(
                "system",
                "verify-identities runs on the built-in catalog and takes no system or measure",
            ));
        }
        match self.command {
            Command::PressureCurve => {
                let p = self.pressure_curve.as_ref();
                required(p.is_some(), "pressure_curve")?;
                let p = p.unwrap();
                if p.t.is_empty() {
                    return Err(CliError::schema("pressure_curve.t", "must not be empty"));
                }
                if let Some(t) = p.t.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
                    return Err(CliError::schema("pressure_curve.t", format!("{t} is not a non-negative number")));
                }
                if p.t.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::schema("pressure_curve.t", "must be increasing"));
                }
                if p.methods.is_empty() {
                    return Err(CliError::schema("pressure_curve.methods", "must not be empty"));
                }
                for (i, e) in p.eps.iter().enumerate() {
                    check_positive(&format!("pressure_curve.eps[{i}]"), *e)?;
                }
                check_increasing("pressure_curve.n", &p.n)?;
                check_positive("pressure_curve.separated_root_tol", p.separated_root_tol)?;
                check_nonzero("pressure_curve.average_n", p.average_n)?;
                check_nonzero("pressure_curve.average_samples", p.average_samples)?;
                if p.methods.contains(&PressureMethod::MeasureIdentity) {
                    required(self.measure.is_some(), "measure")?;
                }
            }
            Command::Dimension => {
                let d = self.dimension.as_ref().unwrap();
                if d.methods.is_empty() {
                    return Err(CliError::schema("dimension.methods", "must not be empty"));
                }
                let needs_measure = d.methods.iter().any(|m| {
                    !matches!(m, DimensionMethod::Box)
                        && !(matches!(m, DimensionMethod::Caratheodory)
                            && !matches!(d.caratheodory_set, SetSpec::MeasureTypical { .. }))
                });
                if needs_measure {
                    required(self.measure.is_some(), "measure")?;
                }
                check_nonzero("dimension.exponent_n", d.exponent_n)?;
                check_nonzero("dimension.exponent_samples", d.exponent_samples)?;
                check_positive("dimension.caratheodory_r", d.caratheodory_r)?;
                if let SetSpec::MeasureTypical { delta } = d.caratheodory_set {
                    if !(0.0..1.0).contains(&delta) {
                        return Err(CliError::schema("dimension.caratheodory_set.delta", "must lie in [0, 1)"));
                    }
                }
                check_nonzero("dimension.box_depth", d.box_depth)?;
                d.box_deltas.validate("dimension.box_deltas")?;
                if let Some(w) = d.box_window {
                    check_positive("dimension.box_window", w)?;
                }
                d.local_radii.validate("dimension.local_radii")?;
                check_nonzero("dimension.local_samples", d.local_samples)?;
            }
            Command::Lyapunov => {
                required(self.measure.is_some(), "measure")?;
                let l = self.lyapunov.as_ref().unwrap();
                check_increasing("lyapunov.n", &l.n)?;
                check_nonzero("lyapunov.samples", l.samples)?;
            }
            Command::BoxCount => {
                let b = self.box_count.as_ref();
                required(b.is_some(), "box_count")?;
                let b = b.unwrap();
                match &b.source {
                    BoxSource::Cylinders { depth } => check_nonzero("box_count.source.depth", *depth)?,
                    BoxSource::Measure { points, depth } => {
                        required(self.measure.is_some(), "measure")?;
                        check_nonzero("box_count.source.points", *points)?;
                        check_nonzero("box_count.source.depth", *depth)?;
                    }
                    BoxSource::Horseshoe {
                        n, epsilon, points, ..
                    } => {
                        required(self.measure.is_some(), "measure")?;
                        check_nonzero("box_count.source.n", *n)?;
                        if !(*epsilon >= 0.0 && epsilon.is_finite()) {
                            return Err(CliError::schema("box_count.source.epsilon", format!("must be >= 0, got {epsilon}")));
                        }
                        check_nonzero("box_count.source.points", *points)?;
                    }
                }
                b.deltas.validate("box_count.deltas")?;
                if let Some(w) = b.window {
                    check_positive("box_count.window", w)?;
                }
            }
            Command::HorseshoeApprox => {
                required(self.measure.is_some(), "measure")?;
                let h = self.horseshoe_approx.as_mut();
                required(h.is_some(), "horseshoe_approx")?;
                let h = h.unwrap();
                h.geometric_check |= geometric_check;
                check_increasing("horseshoe_approx.n", &h.n)?;
                if !(h.epsilon >= 0.0 && h.epsilon.is_finite()) {
                    return Err(CliError::schema(
                        "horseshoe_approx.epsilon",
                        format!("must be a non-negative number, got {}", h.epsilon),
                    ));
                }
                check_nonzero("horseshoe_approx.geometric_points", h.geometric_points)?;
                check_positive("horseshoe_approx.geometric_delta_max", h.geometric_delta_max)?;
            }
            Command::VerifyIdentities => {
                let v = self.verify_identities.as_ref().unwrap();
                check_nonzero("verify_identities.triples", v.triples)?;
                check_nonzero("verify_identities.qr_words", v.qr_words)?;
                check_nonzero("verify_identities.qr_length", v.qr_length)?;
                check_positive("verify_identities.t_step", v.t_step)?;
            }
        }
        if self.seed.is_none() && self.needs_seed() {
            return Err(CliError::schema("seed", "required by this command; set it in the file or with --seed"));
        }
        Ok(self)
    }
}
