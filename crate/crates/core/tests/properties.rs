use lyapdim_core::catalog;
use lyapdim_core::cocycle::{direct_log_singular_values, svp_from_log_singular_values, word_singular_values};
use lyapdim_core::dimension::lyapunov_dimension;
use lyapdim_core::horseshoe::extract_horseshoe;
use lyapdim_core::systems::Jacobian;
use lyapdim_core::{ErgodicMeasure, ModelSystem, SymbolicCoding};
use proptest::prelude::*;

fn system(i: usize) -> ModelSystem {
    catalog::systems().swap_remove(i).1
}

fn repeller(i: usize) -> ModelSystem {
    // every shipped system except the horseshoe
    system(i % 6)
}

fn word_strategy(max_len: usize) -> impl Strategy<Value = (usize, Vec<u8>)> {
    (0usize..7).prop_flat_map(move |i| {
        let k = system(i).alphabet() as u8;
        (Just(i), prop::collection::vec(0..k, 1..=max_len))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decode_of_encode_contains_the_point((i, word) in word_strategy(40), depth in 1usize..=40) {
        let sys = repeller(i);
        let word: Vec<u8> = word.into_iter().map(|s| s % sys.alphabet() as u8).collect();
        let x = sys.anchor(&word).unwrap();
        let code = sys.encode(&x, depth).unwrap();
        let cyl = sys.decode(&code).unwrap();
        prop_assert!(cyl.contains(&x, sys.dim(), 1e-12), "{x:?} not in {cyl:?}");
    }

    #[test]
    fn child_cylinders_nest((i, word) in word_strategy(30), s in 0u8..6) {
        let sys = system(i);
        let s = s % sys.alphabet() as u8;
        let parent = sys.decode(&word).unwrap();
        let mut longer = word.clone();
        longer.push(s);
        let child = sys.decode(&longer).unwrap();
        prop_assert!(parent.contains_cylinder(&child, sys.dim(), 1e-12));
    }

    #[test]
    fn jacobian_matches_finite_differences(i in 0usize..7, u in 0.02f64..0.98, v in 0.02f64..0.98) {
        let sys = system(i);
        // a point well inside the first branch domain
        let cyl = sys.decode(&[0]).unwrap();
        let mut x = [cyl.lo[0] + u * cyl.width(0), 0.0];
        if sys.dim() == 2 {
            x[1] = if sys.is_horseshoe() { v } else { cyl.lo[1] + v * cyl.width(1) };
        }
        let h = 1e-6 * cyl.width(0).min(if sys.dim() == 2 && !sys.is_horseshoe() { cyl.width(1) } else { 1.0 });
        let jac = sys.jacobian(&x).unwrap().to_dmatrix();
        for c in 0..sys.dim() {
            let mut a = x;
            let mut b = x;
            a[c] -= h;
            b[c] += h;
            let (fa, fb) = (sys.eval(&a).unwrap(), sys.eval(&b).unwrap());
            for r in 0..sys.dim() {
                let mut diff = fb[r] - fa[r];
                if sys.is_periodic() {
                    diff -= diff.round();
                }
                let fd = diff / (2.0 * h);
                prop_assert!((fd - jac[(r, c)]).abs() < 1e-6, "system {i} entry ({r},{c}): {fd} vs {}", jac[(r, c)]);
            }
        }
    }

    #[test]
    fn phi_is_super_additive((i, word) in word_strategy(120), n in 1usize..50, l in 1usize..50, frac in 0.0f64..=1.0) {
        let sys = system(i);
        let mut word = word;
        word.resize(n + l + 60, 1 % sys.alphabet() as u8);
        let t = frac * sys.dim() as f64;
        let whole = word_singular_values(&sys, &word, n + l).unwrap().log_singular_values;
        let head = word_singular_values(&sys, &word, n).unwrap().log_singular_values;
        let tail = word_singular_values(&sys, &word[n..], l).unwrap().log_singular_values;
        let lhs = svp_from_log_singular_values(&whole, t).unwrap();
        let rhs = svp_from_log_singular_values(&head, t).unwrap() + svp_from_log_singular_values(&tail, t).unwrap();
        prop_assert!(lhs >= rhs - 1e-9, "{lhs} < {rhs}");
    }

    #[test]
    fn phi_is_piecewise_linear_in_t(sv in prop::collection::vec(-5.0f64..5.0, 2), t in 0.0f64..2.0, dt in 0.0f64..0.3) {
        let mut sv = sv;
        sv.sort_by(|a, b| b.total_cmp(a));
        // linear between consecutive integers
        let k = t.floor();
        let t2 = (t + dt).min(k + 1.0).min(2.0);
        let p = |s: f64| svp_from_log_singular_values(&sv, s).unwrap();
        let slope = p(k + 1.0) - p(k);
        prop_assert!((p(t2) - p(t) - slope * (t2 - t)).abs() < 1e-9);
    }

    #[test]
    fn qr_agrees_with_direct_svd(m in prop::collection::vec((0.2f64..3.0, -1.0f64..1.0, -1.0f64..1.0, 0.2f64..3.0), 1..=30)) {
        let jacs: Vec<Jacobian> = m
            .iter()
            .map(|&(a, b, c, d)| Jacobian::Planar(nalgebra::Matrix2::new(a, b, c, d + 0.5)))
            .collect();
        let Ok(direct) = direct_log_singular_values(&jacs) else { return Ok(()) };
        prop_assume!(direct.iter().all(|v| v.is_finite() && *v > -20.0));
        let mut acc = lyapdim_core::cocycle::CocycleAccumulator::new(2);
        for j in &jacs {
            acc.push(j).unwrap();
        }
        let qr = acc.finish().unwrap().log_singular_values;
        // the direct product loses relative accuracy in the small singular
        // value in proportion to the condition number
        let cond = (direct[0] - direct[1]).abs().exp();
        for (a, b) in qr.iter().zip(&direct) {
            prop_assert!((a - b).abs() < 1e-8 + 1e-15 * cond, "{qr:?} vs {direct:?}");
        }
    }

    #[test]
    fn lyapunov_dimension_lies_in_range(h_frac in 0.0f64..=1.0, a in 0.1f64..3.0, b in 0.1f64..3.0) {
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let h = h_frac * (hi + lo);
        let d = lyapunov_dimension(h, &[hi, lo]).unwrap();
        prop_assert!((0.0..=2.0).contains(&d));
        // monotone in h
        let d2 = lyapunov_dimension((h + 0.01).min(hi + lo), &[hi, lo]).unwrap();
        prop_assert!(d2 >= d - 1e-12);
    }

    #[test]
    fn horseshoe_counts_match_brute_force(n in 1usize..=12, p in 0.05f64..0.95, eps in 0.0f64..0.5) {
        let mu = ErgodicMeasure::bernoulli(&[p, 1.0 - p]).unwrap();
        let brute = (0u32..1 << n)
            .filter(|w| {
                let zeros = n as u32 - w.count_ones();
                (zeros as f64 / n as f64 - p).abs() <= eps + 1e-12
            })
            .count() as u128;
        match extract_horseshoe(&SymbolicCoding::full_shift(2), &mu, n, eps, None) {
            Ok(h) => {
                prop_assert_eq!(h.block_count, Some(brute));
                prop_assert!(h.entropy() <= mu.entropy() + h.entropy_correction + 1e-12);
                prop_assert!(h.entropy() <= 2f64.ln() + 1e-12);
            }
            Err(_) => prop_assert_eq!(brute, 0),
        }
    }
}
