mod common;

use miskrige::geometry::Point;
use miskrige::kernels::{Kernel, KernelError, KernelSpec};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn spec_strategy() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (prop_oneof![Just(0.5), Just(1.5), Just(2.5), 0.3f64..4.0], 0.5f64..20.0, 0.5f64..3.0)
            .prop_map(|(nu, kappa, sigma)| KernelSpec::Matern { sigma, nu, kappa, d: 1 }),
        (1u32..=3, 1usize..=16).prop_map(|(s, truncation)| KernelSpec::KlTrig { s, truncation }),
        (1usize..=2, 0usize..=5).prop_map(|(order, level)| KernelSpec::Wavelet {
            s: if order == 1 { 0.75 } else { 1.5 },
            level,
            order,
            resolution: 10,
        }),
        (1usize..=40, 1usize..=2).prop_map(|(mesh, degree)| KernelSpec::Fem { mesh, degree }),
    ]
}

fn inside(spec: &KernelSpec, u: f64) -> f64 {
    match spec {
        KernelSpec::Wavelet { .. } => 4.0 * u,
        _ => u,
    }
}

fn min_eig(k: &miskrige::linalg::Dense) -> (f64, f64) {
    let m = DMatrix::from_fn(k.n, k.n, |i, j| k.get(i, j));
    let eig = SymmetricEigen::new(m);
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    (lo, hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kernels_are_symmetric(spec in spec_strategy(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let k = Kernel::new(spec.clone()).unwrap();
        let (x, y) = (inside(&spec, u), inside(&spec, v));
        let a = k.eval(&[x], &[y]);
        let b = k.eval(&[y], &[x]);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn gram_matrices_are_positive_semidefinite(
        spec in spec_strategy(),
        us in prop::collection::vec(0.0f64..1.0, 2..24),
    ) {
        let k = Kernel::new(spec.clone()).unwrap();
        let pts: Vec<Point> = us.iter().map(|&u| Point::scalar(inside(&spec, u))).collect();
        let (lo, hi) = min_eig(&k.gram(&pts));
        prop_assert!(lo >= -1e-10 * hi.max(1.0), "smallest eigenvalue {lo} (largest {hi})");
    }

    #[test]
    fn kl_trig_is_one_periodic(s in 1u32..=3, truncation in 1usize..=20, x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let k = Kernel::new(KernelSpec::KlTrig { s, truncation }).unwrap();
        let kl = k.as_kl_trig().unwrap();
        let base = kl.eval(x, y);
        prop_assert!((kl.eval(x + 1.0, y) - base).abs() < 1e-12);
        prop_assert!((kl.eval(x, y - 1.0) - base).abs() < 1e-12);
        prop_assert!((kl.eval(x - y, 0.0) - base).abs() < 1e-12);
    }

    #[test]
    fn matern_is_stationary_and_peaks_at_zero(
        nu in 0.3f64..4.0, kappa in 0.5f64..20.0, x in 0.0f64..1.0, shift in 0.0f64..1.0, r in 0.0f64..1.0,
    ) {
        let k = Kernel::new(KernelSpec::Matern { sigma: 1.3, nu, kappa, d: 1 }).unwrap();
        let a = k.eval(&[x], &[x + r]);
        let b = k.eval(&[x + shift], &[x + shift + r]);
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a <= k.eval(&[x], &[x]) + 1e-12);
        prop_assert!((k.eval(&[x], &[x]) - 1.69).abs() < 1e-12);
    }
}

#[test]
fn matern_exponential_case_matches_closed_form() {
    let k = Kernel::new(KernelSpec::Matern { sigma: 1.0, nu: 0.5, kappa: 2.0, d: 1 }).unwrap();
    for &r in &[0.0, 0.01, 0.3, 1.0, 4.0] {
        assert!((k.eval(&[0.0], &[r]) - (-2.0f64 * r).exp()).abs() < 1e-13);
    }
}

#[test]
fn kl_trig_gram_rank_is_at_most_2n_plus_1() {
    let k = Kernel::new(KernelSpec::KlTrig { s: 1, truncation: 3 }).unwrap();
    let design = common::jittered(12, 0.0, 1.0, 9);
    let svals = {
        let g = k.gram(design.points());
        DMatrix::from_fn(g.n, g.n, |i, j| g.get(i, j)).singular_values()
    };
    let rank = svals.iter().filter(|&&s| s > 1e-10).count();
    assert_eq!(rank, 7);
}

#[test]
fn fem_kernel_rejects_points_outside_the_unit_interval() {
    let k = Kernel::new(KernelSpec::Fem { mesh: 8, degree: 1 }).unwrap();
    assert!(matches!(k.try_eval(&[1.2], &[0.5]), Err(KernelError::OutOfDomain { .. })));
    assert!(k.try_eval(&[1.0], &[0.0]).is_ok());
}

#[test]
fn invalid_parameters_are_rejected() {
    let bad = [
        KernelSpec::Matern { sigma: 1.0, nu: 0.0, kappa: 1.0, d: 1 },
        KernelSpec::Matern { sigma: -1.0, nu: 1.5, kappa: 1.0, d: 1 },
        KernelSpec::Matern { sigma: 1.0, nu: 1.5, kappa: 1.0, d: 3 },
        KernelSpec::KlTrig { s: 0, truncation: 3 },
        KernelSpec::Fem { mesh: 0, degree: 1 },
        KernelSpec::Fem { mesh: 4, degree: 3 },
        KernelSpec::Wavelet { s: -1.0, level: 2, order: 1, resolution: 10 },
    ];
    for spec in bad {
        assert!(Kernel::new(spec.clone()).is_err(), "{spec:?} accepted");
    }
}

#[test]
fn haar_finest_level_is_block_diagonal() {
    let k = Kernel::new(KernelSpec::Wavelet { s: 1.0, level: 5, order: 1, resolution: 10 }).unwrap();
    let w = k.as_wavelet().unwrap();
    let pts: Vec<f64> = (0..8).map(|i| (i as f64 + 0.5) / 8.0).collect();
    for (i, &x) in pts.iter().enumerate() {
        for (j, &y) in pts.iter().enumerate() {
            if i != j {
                assert_eq!(w.level_term(5, x, y), 0.0, "({x}, {y})");
            }
        }
        assert!(w.level_term(5, x, x) > 0.0);
    }
}
