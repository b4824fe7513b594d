use approx::assert_abs_diff_eq;
use lyapdim_core::catalog;
use lyapdim_core::cocycle::exact_exponents;
use lyapdim_core::dimension::{bowen_root, lyapunov_dimension};
use lyapdim_core::pressure::{measure_pressure, system_sft_pressure, AverageOptions, Potential};
use lyapdim_core::ErgodicMeasure;

fn sft(system: &lyapdim_core::ModelSystem, t: f64) -> f64 {
    system_sft_pressure(system, &Potential::Singular { t }).unwrap().value
}

#[test]
fn exact_pressure_of_the_singular_potential() {
    let torus = catalog::torus_2_3();
    // P(t) = log 6 - t log 2 on [0, 1] and (2 - t) log 3 on [1, 2]
    assert_abs_diff_eq!(sft(&torus, 0.0), 6f64.ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(sft(&torus, 1.0), 3f64.ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(sft(&torus, 1.5), 0.5 * 3f64.ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(sft(&torus, 2.0), 0.0, epsilon = 1e-12);
    let planar = catalog::planar_3_4();
    assert_abs_diff_eq!(sft(&planar, 0.5), 2f64.ln() - 0.5 * 3f64.ln(), epsilon = 1e-12);
    assert_abs_diff_eq!(sft(&planar, 1.5), 2f64.ln() - 3f64.ln() - 0.5 * 4f64.ln(), epsilon = 1e-12);
}

#[test]
fn topological_roots_match_the_moran_equation() {
    let cantor = catalog::cantor_3_4();
    let root = bowen_root(|t| Ok(sft(&cantor, t)), 1.0, 1e-12).unwrap().root;
    // 3^-s + 4^-s = 1
    assert_abs_diff_eq!(3f64.powf(-root) + 4f64.powf(-root), 1.0, epsilon = 1e-10);
    assert_abs_diff_eq!(root, 0.5604988652, epsilon = 1e-9);
    let torus = catalog::torus_2_3();
    assert_abs_diff_eq!(bowen_root(|t| Ok(sft(&torus, t)), 2.0, 1e-12).unwrap().root, 2.0, epsilon = 1e-12);
}

#[test]
fn measure_roots_equal_lyapunov_dimensions() {
    let opts = AverageOptions::default();
    for (name, system, mu) in catalog::repeller_pairs() {
        let lam = exact_exponents(&system, &mu).unwrap();
        let dim = lyapunov_dimension(mu.entropy(), &lam).unwrap();
        let root = bowen_root(
            |t| measure_pressure(&system, &mu, &Potential::Singular { t }, &opts),
            system.dim() as f64,
            1e-12,
        )
        .unwrap()
        .root;
        assert!((root - dim).abs() < 1e-9, "{name}: {root} vs {dim}");
    }
}

#[test]
fn the_variational_principle_holds_on_the_torus() {
    let torus = catalog::torus_2_3();
    let opts = AverageOptions::default();
    let mu = ErgodicMeasure::bernoulli(&catalog::TORUS_NONUNIFORM).unwrap();
    for t in [0.0, 0.5, 1.0, 1.5, 2.0] {
        let pot = Potential::Singular { t };
        let p_mu = measure_pressure(&torus, &mu, &pot, &opts).unwrap();
        assert!(p_mu <= sft(&torus, t) + 1e-12, "t = {t}");
    }
    // Lebesgue is the equilibrium state of -phi^t for every t
    let leb = ErgodicMeasure::uniform(6).unwrap();
    for t in [0.3, 1.7] {
        let p = measure_pressure(&torus, &leb, &Potential::Singular { t }, &opts).unwrap();
        assert_abs_diff_eq!(p, sft(&torus, t), epsilon = 1e-12);
    }
}
