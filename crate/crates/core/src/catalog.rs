//! The shipped model systems and measures.

use crate::measure::ErgodicMeasure;
use crate::systems::{ModelSystem, SystemSpec};

fn build(spec: SystemSpec) -> ModelSystem {
    ModelSystem::new(spec).expect("catalog specs are valid")
}

/// `x -> 2x mod 1`.
pub fn doubling() -> ModelSystem {
    build(SystemSpec::ExpandingCircleMap {
        degree: 2,
        amplitude: 0.0,
    })
}

/// `x -> 2x + 0.1 sin(2 pi x) mod 1`.
pub fn perturbed_circle() -> ModelSystem {
    build(SystemSpec::ExpandingCircleMap {
        degree: 2,
        amplitude: 0.1,
    })
}

/// `(x, y) -> (2x, 3y) mod 1`.
pub fn torus_2_3() -> ModelSystem {
    build(SystemSpec::ToralEndomorphism { diagonal: [2, 3] })
}

/// Middle-third Cantor repeller: slopes 3 on `[0, 1/3]` and `[2/3, 1]`.
pub fn cantor_3_3() -> ModelSystem {
    build(SystemSpec::CantorRepeller {
        slopes: vec![3.0, 3.0],
        left_endpoints: None,
    })
}

/// Cantor repeller with unequal slopes 3 and 4.
pub fn cantor_3_4() -> ModelSystem {
    build(SystemSpec::CantorRepeller {
        slopes: vec![3.0, 4.0],
        left_endpoints: None,
    })
}

/// Two branches with derivative `diag(3, 4)` in opposite corners.
pub fn planar_3_4() -> ModelSystem {
    build(SystemSpec::PlanarRepeller {
        derivatives: vec![[3.0, 4.0], [3.0, 4.0]],
        corners: None,
    })
}

/// Linear horseshoe with expansion 3 and contraction 1/4.
pub fn horseshoe_3_quarter() -> ModelSystem {
    build(SystemSpec::LinearHorseshoe {
        expansion: 3.0,
        contraction: 0.25,
    })
}

/// Every shipped system with a short name.
pub fn systems() -> Vec<(&'static str, ModelSystem)> {
    vec![
        ("doubling", doubling()),
        ("perturbed-circle", perturbed_circle()),
        ("torus-2-3", torus_2_3()),
        ("cantor-3-3", cantor_3_3()),
        ("cantor-3-4", cantor_3_4()),
        ("planar-3-4", planar_3_4()),
        ("horseshoe-3-quarter", horseshoe_3_quarter()),
    ]
}

/// Non-uniform Bernoulli measure used on the torus.
pub const TORUS_NONUNIFORM: [f64; 6] = [0.3, 0.2, 0.15, 0.15, 0.1, 0.1];

fn bern(p: &[f64]) -> ErgodicMeasure {
    ErgodicMeasure::bernoulli(p).expect("catalog measures are valid")
}

/// The repeller (system, measure) pairs on which the dimension identities
/// are checked.
pub fn repeller_pairs() -> Vec<(String, ModelSystem, ErgodicMeasure)> {
    vec![
        ("cantor-3-3/bernoulli(1/2)".into(), cantor_3_3(), bern(&[0.5, 0.5])),
        ("cantor-3-3/bernoulli(0.7)".into(), cantor_3_3(), bern(&[0.7, 0.3])),
        ("torus-2-3/uniform".into(), torus_2_3(), bern(&[1.0 / 6.0; 6])),
        ("torus-2-3/non-uniform".into(), torus_2_3(), bern(&TORUS_NONUNIFORM)),
        ("planar-3-4/bernoulli(1/2)".into(), planar_3_4(), bern(&[0.5, 0.5])),
        ("planar-3-4/bernoulli(0.3)".into(), planar_3_4(), bern(&[0.3, 0.7])),
    ]
}
