use jostdet_core::numerics::{det, det2_matrix, eigenvalues, herm_eigs, polar_factor, trace_norm, CMatrix};
use jostdet_core::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(seed: u64, n: usize, scale: f64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
}

fn random_hermitian(seed: u64, n: usize) -> CMatrix {
    let m = random_matrix(seed, n, 1.0);
    let h = &m + &m.adjoint();
    h.scale(Complex64::new(0.5, 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn det_is_multiplicative(seed in any::<u64>(), n in 1usize..6) {
        let a = random_matrix(seed, n, 1.0);
        let b = random_matrix(seed ^ 0x9e37, n, 1.0);
        let lhs = det(&(&a * &b)).unwrap();
        let rhs = det(&a).unwrap() * det(&b).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn det2_is_regularized_eigenvalue_product(seed in any::<u64>(), n in 1usize..6) {
        let m = random_matrix(seed, n, 0.7);
        let oracle: Complex64 = eigenvalues(&m).unwrap().iter().map(|l| (1.0 - l) * l.exp()).product();
        let v = det2_matrix(&m).unwrap();
        prop_assert!((v - oracle).norm() <= 1e-11 * (1.0 + oracle.norm()));
    }

    #[test]
    fn strictly_triangular_det2_is_one(seed in any::<u64>(), n in 1usize..8) {
        let full = random_matrix(seed, n, 3.0);
        let lower = CMatrix::from_fn(n, n, |i, j| if j < i { full[(i, j)] } else { Complex64::new(0.0, 0.0) });
        prop_assert!((det2_matrix(&lower).unwrap() - 1.0).norm() <= 1e-13);
        prop_assert!((det2_matrix(&lower.transpose()).unwrap() - 1.0).norm() <= 1e-13);
    }

    #[test]
    fn polar_factor_reconstructs(seed in any::<u64>(), n in 1usize..5, hermitian in any::<bool>()) {
        let m = if hermitian { random_hermitian(seed, n) } else { random_matrix(seed, n, 1.0) };
        let (u, v) = polar_factor(&m).unwrap();
        prop_assert!((&(&u * &v) - &m).max_abs() <= 1e-12);
        prop_assert!(v.hermitian_defect() <= 1e-12);
        for l in herm_eigs(&v).unwrap().values {
            prop_assert!(l >= -1e-12);
        }
    }

    #[test]
    fn hermitian_eigenvalues_2x2(a in -3.0f64..3.0, d in -3.0f64..3.0, re in -2.0f64..2.0, im in -2.0f64..2.0) {
        let m = CMatrix::from_vec(2, 2, vec![
            Complex64::new(a, 0.0), Complex64::new(re, im), Complex64::new(re, -im), Complex64::new(d, 0.0),
        ]).unwrap();
        // roots of λ² - (a+d)λ + ad - |b|²
        let r = (0.25 * (a - d) * (a - d) + re * re + im * im).sqrt();
        let e = herm_eigs(&m).unwrap().values;
        prop_assert!((e[0] - (0.5 * (a + d) - r)).abs() <= 1e-12 * (1.0 + r));
        prop_assert!((e[1] - (0.5 * (a + d) + r)).abs() <= 1e-12 * (1.0 + r));
    }

    #[test]
    fn hermitian_eigen_decomposition(seed in any::<u64>(), n in 1usize..7) {
        let m = random_hermitian(seed, n);
        let e = herm_eigs(&m).unwrap();
        let sum: f64 = e.values.iter().sum();
        prop_assert!((sum - m.trace().re).abs() <= 1e-12 * (1.0 + m.norm_fro()));
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let q = &e.vectors;
        prop_assert!((&(&q.adjoint() * q) - &CMatrix::identity(n)).max_abs() <= 1e-12);
        let abs_sum: f64 = e.values.iter().map(|l| l.abs()).sum();
        prop_assert!((trace_norm(&m) - abs_sum).abs() <= 1e-12 * (1.0 + abs_sum));
    }
}
