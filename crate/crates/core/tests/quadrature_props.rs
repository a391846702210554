use jostdet_core::quadrature::truncate_interval;
use jostdet_core::{Envelope, Quadrature, Scheme};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauss_legendre_exact_to_degree(m in 2usize..12, panels in 1usize..4, a in -2.0f64..0.0, len in 0.1f64..3.0) {
        let b = a + len;
        let q = Quadrature::new(a, b, m, panels, Scheme::GaussLegendre).unwrap();
        for p in 0..2 * m as i32 {
            let exact = (b.powi(p + 1) - a.powi(p + 1)) / (p + 1) as f64;
            let got = q.integrate(|x| x.powi(p));
            prop_assert!((got - exact).abs() <= 1e-12 * (1.0 + exact.abs()) * 4f64.powi(p.min(8)), "degree {}", p);
        }
    }

    #[test]
    fn refinement_reduces_error(scheme in prop::sample::select(vec![Scheme::GaussLegendre, Scheme::Trapezoid]),
                                m in 2usize..6, c in 0.5f64..3.0) {
        let exact = (c.exp() - 1.0) / c;
        let mut q = Quadrature::new(0.0, 1.0, m, 1, scheme).unwrap();
        let mut last = f64::INFINITY;
        for _ in 0..5 {
            let err = (q.integrate(|x| (c * x).exp()) - exact).abs();
            prop_assert!(err <= last.max(1e-14));
            last = err;
            let r = q.refined();
            prop_assert_eq!(r.len(), 2 * q.len());
            q = r;
        }
    }

    #[test]
    fn algebraic_tail_truncation(tol in 1e-12f64..1e-3) {
        let env = Envelope::custom(|x| (1.0 + x.abs()).powi(-4));
        let r = truncate_interval(&env, (0.0, f64::INFINITY), tol).unwrap();
        let b = r.truncated.1;
        prop_assert!(b.is_finite());
        // ∫_b^∞ (1+x)^{-4} dx = 1/(3(1+b)³)
        let tail = 1.0 / (3.0 * (1.0 + b).powi(3));
        prop_assert!(tail <= tol * (1.0 + 1e-6));
        prop_assert!(tail >= 0.5 * tol);
    }
}

#[test]
fn integrates_across_breakpoints() {
    let q = Quadrature::with_breakpoints(-1.0, 2.0, &[0.3], 8, 0.5, Scheme::GaussLegendre).unwrap();
    assert!(q.edges().contains(&0.3));
    let got = q.integrate(|x| if x < 0.3 { 1.0 } else { x });
    assert!((got - (1.3 + 0.5 * (4.0 - 0.09))).abs() < 1e-14);
}
