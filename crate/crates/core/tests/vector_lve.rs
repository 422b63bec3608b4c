use constructive::quadrature::gamma_rule;
use constructive::vector_lve::*;
use constructive::CostGuard;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use std::f64::consts::PI;

const CATALAN: [u64; 11] = [1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796];

fn laguerre_g2(z: f64, n: u64) -> f64 {
    let rule = gamma_rule(120, n as u32);
    let c = z / (2.0 * n as f64);
    let zed: f64 = rule.iter().map(|&(r, w)| w * (c * r * r).exp()).sum();
    let m1: f64 = rule.iter().map(|&(r, w)| w * r * (c * r * r).exp()).sum();
    m1 / (n as f64 * zed)
}

#[test]
fn plane_trees_are_catalan() {
    for (n, &k) in CATALAN.iter().enumerate() {
        let trees = enumerate_rooted_plane_trees(n, CostGuard::default()).unwrap();
        assert_eq!(trees.len() as u64, k);
        for t in &trees {
            assert_eq!(t.order(), n);
            assert_eq!(t.corner_degrees().iter().sum::<u32>() as usize, 2 * n + 1);
            assert!(t.forest().is_spanning_tree());
        }
        let mut dedup = trees.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), trees.len());
    }
}

#[test]
fn unbalanced_dyck_words_are_rejected() {
    assert!(RootedPlaneTree::from_dyck(&[false, true]).is_err());
    assert!(RootedPlaneTree::from_dyck(&[true, true, false]).is_err());
}

#[test]
fn radial_oracle_matches_laguerre() {
    for n in [1u64, 2, 3, 5, 8] {
        for z in [-0.01, -0.05, -0.2] {
            let p = ModelPoint::real(z, n).unwrap();
            let got = oracle_g2(&p).unwrap().value;
            let expect = laguerre_g2(z, n);
            assert!((got - expect).abs() < 1e-10, "N = {n}, z = {z}: {got} vs {expect}");
        }
    }
}

#[test]
fn tau_representation_agrees_with_radial() {
    for n in [1u64, 2, 4, 7] {
        for z in [-0.02, -0.1] {
            let p = ModelPoint::real(z, n).unwrap();
            let a = g2_from_tau_representation(&p).unwrap();
            let b = oracle_g2(&p).unwrap().value;
            assert!((a - b).abs() < 1e-7, "N = {n}, z = {z}");
            assert!(schwinger_dyson_residual(&p).unwrap() < 1e-8);
        }
    }
}

#[test]
fn single_component_coefficients() {
    let g: Vec<u64> = perturbative_coefficients(1, 7)
        .unwrap()
        .iter()
        .map(|c| c.to_integer().to_u64().unwrap())
        .collect();
    assert_eq!(g, [1, 2, 10, 74, 706, 8162, 110_410]);
}

#[test]
fn large_n_coefficients_approach_catalan() {
    let g = perturbative_coefficients(1_000_000, 6).unwrap();
    for (k, c) in g.iter().enumerate() {
        let v = c.to_f64().unwrap();
        assert!((v / CATALAN[k] as f64 - 1.0).abs() < 1e-3, "k = {k}: {v}");
    }
}

#[test]
fn taylor_remainder_scales_like_next_term() {
    let n = 3;
    let z = -0.002;
    let g = perturbative_coefficients(n, 5).unwrap();
    for order in 2..=4 {
        let r = taylor_remainder(&ModelPoint::real(z, n).unwrap(), order).unwrap();
        let lead = g[order].to_f64().unwrap() * z.powi(order as i32);
        assert!((r / lead - 1.0).abs() < 0.1, "order {order}: {r} vs {lead}");
    }
}

#[test]
fn order_one_term_matches_closed_weight_integral() {
    let tree = &enumerate_rooted_plane_trees(1, CostGuard::default()).unwrap()[0];
    let root = gamma_rule(80, 2);
    let leaf = gamma_rule(80, 1);
    for (z, n) in [(-0.05, 2u64), (-0.06, 1)] {
        let c = z / (2.0 * n as f64);
        let mut expect = 0.0;
        for &(b0, w0) in &root {
            for &(b1, w1) in &leaf {
                let a = 2.0 * c * b0 * b1;
                let line = if a.abs() < 1e-12 { 1.0 } else { a.exp_m1() / a };
                expect += w0 * w1 * (c * (b0 * b0 + b1 * b1)).exp() * line;
            }
        }
        expect *= z;
        let got = lve_tree_term(tree, &ModelPoint::real(z, n).unwrap(), &SamplingOptions::default(), 0).unwrap();
        assert_eq!(got.method, Method::Quadrature);
        assert!((got.value.re - expect).abs() < 1e-9 && got.value.im.abs() < 1e-15, "{} vs {expect}", got.value);
    }
}

#[test]
fn quadrature_and_monte_carlo_agree_on_trees() {
    let p = ModelPoint::real(-0.06, 1).unwrap();
    let quad = SamplingOptions::default();
    let mc = SamplingOptions { samples: 200_000, seed: 7, quadrature_max_order: 0 };
    for tree in enumerate_rooted_plane_trees(2, CostGuard::default()).unwrap() {
        let a = lve_tree_term(&tree, &p, &quad, 1).unwrap();
        let b = lve_tree_term(&tree, &p, &mc, 1).unwrap();
        assert_eq!(b.method, Method::MonteCarlo);
        assert!((a.value - b.value).norm() < 5.0 * b.std_error + 1e-12, "{} vs {} ± {}", a.value, b.value, b.std_error);
    }
}

#[test]
fn partial_sum_within_tail_of_oracle() {
    let opts = SamplingOptions { samples: 40_000, seed: 3, quadrature_max_order: 2 };
    for (z, n) in [(-0.01, 1u64), (-0.03, 4)] {
        let p = ModelPoint::real(z, n).unwrap();
        let sum = lve_partial_sum(&p, 5, &opts).unwrap();
        let oracle = oracle_g2(&p).unwrap().value;
        let allowed = sum.tail_bound + 4.0 * sum.std_error;
        assert!((sum.value.re - oracle).abs() <= allowed, "N = {n}, z = {z}");
    }
}

#[test]
fn infinite_n_sum_is_catalan_polynomial() {
    let z = Complex64::new(-0.04, 0.01);
    let p = ModelPoint::new(z, Dimension::Infinite).unwrap();
    let sum = lve_partial_sum(&p, 8, &SamplingOptions::default()).unwrap();
    let expect: Complex64 = (0..=8).map(|k| z.powu(k as u32) * CATALAN[k] as f64).sum();
    assert!((sum.value - expect).norm() < 1e-15);
    assert!((catalan_g2(z).unwrap() - expect).norm() < sum.tail_bound);
}

#[test]
fn tail_bound_behaviour() {
    let z = Complex64::new(-0.03, 0.0);
    let tails: Vec<f64> = (0..10).map(|n| lve_tail_bound(z, n)).collect();
    assert!(tails.windows(2).all(|w| w[1] < w[0]));
    assert!(lve_tail_bound(Complex64::new(-0.07, 0.0), 4).is_infinite());
    assert_eq!(lve_tail_bound(Complex64::new(0.0, 0.0), 4), 0.0);
}

#[test]
fn mean_cut_without_correction_is_catalan() {
    let opts = SamplingOptions { samples: 100, seed: 1, quadrature_max_order: 0 };
    let z = 0.05;
    let mc = mean_cut_functions(z, Dimension::Infinite, 6, &opts).unwrap();
    let expect: f64 = (0..=6).map(|k| CATALAN[k] as f64 * z.powi(k as i32)).sum();
    assert!((mc.mean - expect).abs() < 1e-14);
    assert_eq!(mc.cut, 0.0);
}

#[test]
fn mean_cut_at_large_n_is_near_catalan() {
    let opts = SamplingOptions { samples: 20_000, seed: 11, quadrature_max_order: 0 };
    let z = 0.05;
    let a = mean_cut_functions(z, Dimension::Finite(100_000), 4, &opts).unwrap();
    let b = mean_cut_functions(z, Dimension::Finite(100_000), 4, &opts).unwrap();
    assert_eq!(a, b);
    let expect: f64 = (0..=4).map(|k| CATALAN[k] as f64 * z.powi(k as i32)).sum();
    assert!((a.mean - expect).abs() < 5.0 * a.mean_std_error + 1e-3);
    assert!(a.cut.abs() < 5.0 * a.cut_std_error + 1e-3);
}

proptest! {
    #[test]
    fn half_disk_inside_both_cardioids(rho in 0.0f64..0.1, phi in -PI / 2.0..PI / 2.0) {
        if cardioid_contains_polar(rho, phi, CardioidVariant::UniformHalfDisk) {
            prop_assert!(cardioid_contains_polar(rho, phi, CardioidVariant::Standard));
            prop_assert!(cardioid_contains_polar(rho, phi, CardioidVariant::Extended));
        }
    }

    #[test]
    fn resolvent_bound_holds(rho in 0.001f64..2.0, phi in -3.1f64..3.1, tau in -1e3f64..1e3) {
        let lambda = Complex64::from_polar(rho, phi);
        let r = (Complex64::new(1.0, 0.0) - Complex64::i() * lambda.sqrt() * tau).inv().norm();
        prop_assert!(r <= resolvent_bound(lambda) * (1.0 + 1e-12));
    }

    #[test]
    fn standard_cardioid_is_symmetric(rho in 0.0f64..1.0, phi in 0.0f64..PI) {
        prop_assert_eq!(
            cardioid_contains_polar(rho, phi, CardioidVariant::Standard),
            cardioid_contains_polar(rho, -phi, CardioidVariant::Standard)
        );
    }
}
