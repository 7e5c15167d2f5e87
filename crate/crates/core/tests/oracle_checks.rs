//! Accountant formulas checked against independent numerical routes:
//! quadrature for the Gaussian and Laplace Renyi divergences, double-double
//! arithmetic for the subsampling bound, exact substitution for the ADP
//! conversion, and exhaustive path walks for tree prediction.

use sgbdt_core::accountant::{
    rdp_gauss_nonspherical, rdp_laplace_shifted, rdp_subsampled, rdp_to_adp, RdpCurve,
};
use sgbdt_core::model::{Split, Tree};
use sgbdt_oracles::renyi::{
    gaussian_renyi_quadrature, laplace_renyi_quadrature, subsampled_bound_dd,
};

#[test]
fn gauss_nonspherical_matches_quadrature_on_a_grid() {
    // 20 cases across D in {1,2}, alpha in {2,3,8}: the closed form must
    // match direct numerical integration of the order-alpha divergence
    // between N(0, Sigma) and N(s, Sigma), Sigma = D^-1 diag(sigma^2/r_d).
    let mut cases = 0;
    for &alpha in &[2u32, 3, 8] {
        for &(s, sigma2) in &[(0.5f64, 1.0f64), (1.0, 1.0), (1.0, 4.0), (0.25, 0.5)] {
            let got = rdp_gauss_nonspherical(alpha, &[s], &[1.0], sigma2).unwrap();
            let want = gaussian_renyi_quadrature(alpha, &[s], &[sigma2]);
            let rel = (got - want).abs() / want.abs().max(1e-12);
            assert!(rel <= 1e-6, "1d alpha={alpha} s={s} sigma2={sigma2}: {got} vs {want}");
            cases += 1;
        }
    }
    for &alpha in &[2u32, 3, 8] {
        for &(r1, s1, s2, sigma2) in &[
            (0.5f64, 1.0f64, 0.2f64, 1.0f64),
            (0.3, 1.0, 1.0, 2.0),
            (0.8, 0.5, 2.0, 4.0),
        ] {
            let r = [r1, 1.0 - r1];
            let s = [s1, s2];
            let got = rdp_gauss_nonspherical(alpha, &s, &r, sigma2).unwrap();
            // Sigma = D^-1 diag(sigma^2 / r_d) with D = 2
            let variances = [sigma2 / (2.0 * r[0]), sigma2 / (2.0 * r[1])];
            let want = gaussian_renyi_quadrature(alpha, &s, &variances);
            let rel = (got - want).abs() / want.abs().max(1e-12);
            assert!(rel <= 1e-6, "2d alpha={alpha} r1={r1}: {got} vs {want}");
            cases += 1;
        }
    }
    assert!(cases >= 20, "grid has {cases} cases");
}

#[test]
fn laplace_init_bound_matches_quadrature() {
    for &alpha in &[2u32, 3, 5] {
        for &t in &[0.25f64, 1.0, 2.0] {
            let got = rdp_laplace_shifted(alpha, t);
            // two unit-scale Laplace distributions shifted by t
            let want = laplace_renyi_quadrature(alpha, t, 1.0);
            assert!(
                (got - want).abs() <= 1e-8 * want.abs().max(1.0),
                "alpha={alpha} t={t}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn subsampled_bound_matches_double_double_to_1e10() {
    for &alpha in &[2u32, 3, 4, 8, 16, 32] {
        for &gamma in &[1e-4, 0.01, 0.1, 0.5, 0.9] {
            for &slope in &[0.001f64, 0.05, 0.4] {
                let curve = RdpCurve::from_fn(alpha, |l| slope * l as f64);
                let got = rdp_subsampled(alpha, &curve, gamma).unwrap();
                let want = subsampled_bound_dd(alpha, &|l| slope * l as f64, gamma);
                let rel = (got - want).abs() / want.abs().max(1e-300);
                assert!(
                    rel <= 1e-10,
                    "alpha={alpha} gamma={gamma} slope={slope}: {got} vs {want} rel {rel}"
                );
            }
        }
    }
}

#[test]
fn subsampling_never_hurts_below_gamma_one() {
    // amplification property on the tested grids (the regime the learner
    // runs in: small subsampling ratios, where the bound's factor-3 tail is
    // dominated), plus exact equality at (gamma = 1, alpha = 2)
    for &alpha in &[2u32, 3, 8, 16] {
        for &gamma in &[0.01, 0.05, 0.1] {
            for &slope in &[0.01f64, 0.2, 1.0] {
                let curve = RdpCurve::from_fn(alpha, |l| slope * l as f64);
                let amplified = rdp_subsampled(alpha, &curve, gamma).unwrap();
                let base = curve.get(alpha).unwrap();
                assert!(
                    amplified <= base + 1e-12,
                    "alpha={alpha} gamma={gamma} slope={slope}: {amplified} > {base}"
                );
            }
        }
    }
    // a larger ratio still amplifies once the curve is steep enough for the
    // l = alpha term to carry its gamma^alpha discount
    let curve = RdpCurve::from_fn(8, |l| l as f64);
    let amplified = rdp_subsampled(8, &curve, 0.2).unwrap();
    assert!(amplified < curve.get(8).unwrap());

    let curve = RdpCurve::from_fn(2, |l| 0.3 * l as f64);
    let at_one = rdp_subsampled(2, &curve, 1.0).unwrap();
    assert!((at_one - curve.get(2).unwrap()).abs() < 1e-12);
}

#[test]
fn gaussian_curves_are_monotone_in_alpha() {
    for &sigma2 in &[0.5f64, 2.0, 40.0] {
        let mut last = 0.0;
        for alpha in 2..=32 {
            let rho = rdp_gauss_nonspherical(alpha, &[1.0, 0.3], &[0.5, 0.5], sigma2).unwrap();
            assert!(rho >= last);
            last = rho;
        }
    }
}

#[test]
fn adp_conversion_round_trips_to_1e12() {
    for &alpha in &[2u32, 5, 17, 64] {
        for &rho in &[0.0f64, 0.3, 2.0, 11.0] {
            for &delta in &[1e-10f64, 1e-5, 0.4] {
                let eps = rdp_to_adp(alpha, rho, delta).unwrap();
                let back = (rho - alpha as f64 * eps).exp();
                assert!(
                    (back - delta).abs() <= 1e-12 * delta.max(1e-12),
                    "alpha={alpha} rho={rho} delta={delta}: back {back}"
                );
            }
        }
    }
}

#[test]
fn tree_values_match_the_exhaustive_path_walk() {
    use rand::Rng;
    let mut rng = sgbdt_core::rng::derive_rng(77, &[]);
    for _ in 0..50 {
        let depth = rng.random_range(1..=4u32);
        let internal = (1usize << depth) - 1;
        let splits: Vec<Split> = (0..internal)
            .map(|_| Split::Numerical {
                feature: rng.random_range(0..3usize),
                threshold: rng.random_range(0.0..1.0),
            })
            .collect();
        let mut tree = Tree::with_splits(depth, splits);
        for (i, leaf) in tree.leaves.iter_mut().enumerate() {
            *leaf = i as f64 + 1.0;
        }
        for _ in 0..20 {
            let row = [
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ];
            assert_eq!(tree.value(&row), sgbdt_oracles::tree_walk_value(&tree, &row));
        }
    }
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    use sgbdt_core::model::{gradient, LossKind};
    for &(y, raw) in &[(1.0f64, 0.0f64), (0.0, 0.7), (1.0, -2.0), (0.0, -0.3)] {
        let g = gradient(LossKind::Logistic, y, raw);
        let fd = sgbdt_oracles::logistic_loss_grad_fd(y, raw, 1e-6);
        assert!((g - fd).abs() < 1e-6, "y={y} raw={raw}: {g} vs {fd}");
    }
}
