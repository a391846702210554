use jostdet_core::numerics::{det, polar_factor, CMatrix};
use jostdet_core::reduction::{det1_semiseparable, nystrom_matrix, reduce, Tolerances};
use jostdet_core::schrodinger::*;
use jostdet_core::{Complex64, Error, VolterraMethod};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn sp(re: f64, im: f64) -> SpectralPoint {
    SpectralPoint::new(c(re, im)).unwrap()
}

fn grid_of(v: &Potential) -> jostdet_core::Quadrature {
    v.grid(&GridSpec::default()).unwrap().0
}

/// Square well `-depth` on `(0, a)`: transfer-matrix Jost function.
fn square_well_jost(depth: f64, a: f64, z: Complex64) -> Complex64 {
    let i = Complex64::i();
    let k = SpectralPoint::new(z).unwrap().k();
    let kp = (z + depth).sqrt();
    let sinc = if kp.norm() < 1e-12 { c(a, 0.0) } else { (kp * a).sin() / kp };
    (i * k * a).exp() * ((kp * a).cos() + (kp * kp + k * k) / (2.0 * i * k) * sinc)
}

/// RK4 for `ψ'' = (V - z)ψ` from `x0` to `x1` (scalar).
fn shoot(
    v: &Potential,
    z: Complex64,
    x0: f64,
    x1: f64,
    psi: Complex64,
    dpsi: Complex64,
    steps: usize,
) -> (Complex64, Complex64) {
    let h = (x1 - x0) / steps as f64;
    let rhs = |x: f64, y: [Complex64; 2]| [y[1], (v.eval(x)[(0, 0)] - z) * y[0]];
    let mut y = [psi, dpsi];
    for s in 0..steps {
        let x = x0 + h * s as f64;
        let k1 = rhs(x, y);
        let k2 = rhs(x + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs(x + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs(x + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for j in 0..2 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    (y[0], y[1])
}

#[test]
fn free_jost_solutions_are_plane_waves() {
    let v = Potential::zero(2, Domain::FullLine);
    let g = grid_of(&v);
    let z = sp(-1.0, 0.4);
    for side in [Side::Plus, Side::Minus] {
        let j = jost_solution(&v, z, side, &g).unwrap();
        let s = if side == Side::Plus { 1.0 } else { -1.0 };
        for (i, &x) in g.nodes().iter().enumerate() {
            let e = (Complex64::i() * z.k() * s * x).exp();
            assert_eq!(j.f(i), CMatrix::identity(2).scale(e));
        }
    }
    for route in JostRoute::ALL {
        assert_eq!(jost_function(&v, z, &g, route).unwrap(), CMatrix::identity(2));
    }
}

#[test]
fn square_well_jost_solution_matches_shooting() {
    let v = Potential::square_well(1.0, 1.0, 0.5).unwrap();
    let g = grid_of(&v);
    let z = sp(-0.5, 0.0);
    let k = z.k();
    let i = Complex64::i();
    let plus = jost_solution(&v, z, Side::Plus, &g).unwrap();
    let minus = jost_solution(&v, z, Side::Minus, &g).unwrap();
    for (n, &x) in g.nodes().iter().enumerate() {
        let (fp, _) = shoot(&v, z.z(), 1.0, x, (i * k).exp(), i * k * (i * k).exp(), 4000);
        let (fm, _) = shoot(&v, z.z(), 0.0, x, c(1.0, 0.0), -i * k, 4000);
        assert!((plus.f(n)[(0, 0)] - fp).norm() < 1e-7, "f+ at {x}");
        assert!((minus.f(n)[(0, 0)] - fm).norm() < 1e-7, "f- at {x}");
    }
    assert!(plus.residual < 1e-12 && minus.residual < 1e-12);
}

#[test]
fn square_well_jost_function_matches_transfer_matrix() {
    let v = Potential::square_well(1.0, 1.0, 0.5).unwrap();
    let g = grid_of(&v);
    for z in [sp(-1.0, 0.0), sp(-0.5, 0.0), sp(-2.0, 0.0), sp(-1.0, 0.5), sp(3.0, 0.2)] {
        let r = jost_function_routes(&v, z, &g, 1e-7).unwrap();
        let oracle = square_well_jost(1.0, 1.0, z.z());
        for route in JostRoute::ALL {
            assert!((r.get(route)[(0, 0)] - oracle).norm() < 1e-10, "{route:?} at {}", z.z());
        }
    }
}

#[test]
fn wronskian_matches_shooting() {
    // independent Wronskian of ODE-shot solutions at x = 0.3
    let v = Potential::gaussian(-1.5, 0.6, 0.2).unwrap();
    let g = grid_of(&v);
    let (a, b) = g.interval();
    let z = sp(-0.7, 0.0);
    let (k, i) = (z.k(), Complex64::i());
    let (fp, dfp) = shoot(&v, z.z(), b, 0.3, (i * k * b).exp(), i * k * (i * k * b).exp(), 20000);
    let (fm, dfm) = shoot(&v, z.z(), a, 0.3, (-i * k * a).exp(), -i * k * (-i * k * a).exp(), 20000);
    // real z on the negative axis: f₋(z̄)* = conj(f₋(z)) for real V
    let w = fm.conj() * dfp - dfm.conj() * fp;
    let oracle = w / (2.0 * i * k);
    let f = jost_function(&v, z, &g, JostRoute::Wronskian).unwrap();
    assert!((f[(0, 0)] - oracle).norm() < 1e-7 * (1.0 + oracle.norm()));
}

#[test]
fn block_diagonal_potential_decouples() {
    let v1 = Potential::square_well(2.0, 1.5, 0.0).unwrap();
    let v2 = Potential::gaussian(-1.0, 0.8, 0.5).unwrap();
    let v = Potential::matrix_diag(&[v1.clone(), v2.clone()]).unwrap();
    let g = grid_of(&v);
    let z = sp(-1.3, 0.2);
    let f = jost_function(&v, z, &g, JostRoute::PlusIntegral).unwrap();
    let f1 = jost_function(&v1, z, &g, JostRoute::PlusIntegral).unwrap();
    let f2 = jost_function(&v2, z, &g, JostRoute::PlusIntegral).unwrap();
    assert!((f[(0, 0)] - f1[(0, 0)]).norm() < 1e-13);
    assert!((f[(1, 1)] - f2[(0, 0)]).norm() < 1e-13);
    assert!(f[(0, 1)].norm() < 1e-15 && f[(1, 0)].norm() < 1e-15);
    let j = jost_solution(&v, z, Side::Minus, &g).unwrap();
    let j1 = jost_solution(&v1, z, Side::Minus, &g).unwrap();
    for n in 0..g.len() {
        assert!((j.m[n][(0, 0)] - j1.m[n][(0, 0)]).norm() < 1e-13);
        assert_eq!(j.m[n][(1, 0)], c(0.0, 0.0));
    }
}

#[test]
fn route_disagreement_lists_all_values() {
    let v = Potential::square_well(1.0, 1.0, 0.0).unwrap();
    let coarse = jostdet_core::Quadrature::new(-0.5, 0.5, 3, 1, jostdet_core::Scheme::GaussLegendre).unwrap();
    match jost_function_routes(&v, sp(-1.0, 0.0), &coarse, 0.0) {
        Err(Error::Inconsistent(msg)) => {
            assert!(msg.contains("plus_integral") && msg.contains("minus_integral") && msg.contains("wronskian"))
        }
        other => panic!("expected inconsistency, got {other:?}"),
    }
}

fn coupled_gaussian() -> Potential {
    let m = CMatrix::from_vec(2, 2, vec![c(-1.0, 0.0), c(0.4, 0.3), c(0.4, -0.3), c(-0.6, 0.0)]).unwrap();
    Potential::matrix_coupled(m, &Potential::gaussian(1.0, 1.0, 0.0).unwrap()).unwrap()
}

#[test]
fn fredholm_determinant_equals_jost_determinant() {
    let v = Potential::zero(1, Domain::FullLine);
    let g = grid_of(&v);
    let (l, r) = fredholm_jost_check(&v, sp(-1.0, 0.0), &g).unwrap();
    assert_eq!((l, r), (c(1.0, 0.0), c(1.0, 0.0)));

    let w = Potential::square_well(1.0, 1.0, 0.5).unwrap();
    let (l, r) = fredholm_jost_check(&w, sp(-1.0, 0.0), &grid_of(&w)).unwrap();
    assert!((l - r).norm() <= 1e-6);
    assert!((r - square_well_jost(1.0, 1.0, c(-1.0, 0.0))).norm() < 1e-10);

    let v = coupled_gaussian();
    let (l, r) = fredholm_jost_check(&v, sp(-2.0, 0.0), &grid_of(&v)).unwrap();
    assert!((l - r).norm() <= 1e-5);
}

#[test]
fn first_order_system_shares_det2() {
    let v = Potential::zero(1, Domain::FullLine);
    let t = first_order_check(&v, sp(-1.0, 0.0), &grid_of(&v)).unwrap();
    assert_eq!((t.system, t.kernel, t.jost), (c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)));

    let v = Potential::gaussian(-1.0, 0.5f64.sqrt(), 0.0).unwrap();
    let g = grid_of(&v);
    for z in [sp(-1.0, 0.0), sp(-1.0, 0.3)] {
        let t = first_order_check(&v, z, &g).unwrap();
        assert!(t.spread() <= 1e-6, "{t:?}");
    }
}

#[test]
fn fhat1_is_minus_u_times_jost_solution() {
    let v = coupled_gaussian();
    let g = grid_of(&v);
    let z = sp(-1.5, 0.4);
    let k = build_k_fullline(&v, z, &g).unwrap();
    let red = reduce(&k, c(1.0, 0.0), &g, VolterraMethod::BackSubstitution, &Tolerances::default()).unwrap();
    let plus = jost_solution(&v, z, Side::Plus, &g).unwrap();
    let minus = jost_solution(&v, z, Side::Minus, &g).unwrap();
    for (i, &x) in g.nodes().iter().enumerate() {
        let (u, _) = polar_factor(&v.eval(x)).unwrap();
        let e1 = &red.fhat1.samples[i] + &(&u * &plus.f(i));
        let e2 = &red.fhat2.samples[i] + &(&u * &minus.f(i));
        assert!(e1.max_abs() < 1e-10 && e2.max_abs() < 1e-10, "node {i}");
    }
}

#[test]
fn full_line_kernel_values() {
    let v = Potential::zero(1, Domain::FullLine);
    let g = grid_of(&v);
    let k = build_k_fullline(&v, sp(-1.0, 0.0), &g).unwrap();
    assert_eq!(k.eval_kernel(0.1, -0.3).unwrap().max_abs(), 0.0);

    let v = Potential::gaussian(-2.0, 1.0, 0.3).unwrap();
    let g = grid_of(&v);
    let z = sp(-0.8, 0.6);
    let k = build_k_fullline(&v, z, &g).unwrap();
    for (x, y) in [(0.1, -0.7), (1.2, 2.5), (-1.0, 0.4)] {
        let (u, _) = polar_factor(&v.eval(x)).unwrap();
        let (_, w) = polar_factor(&v.eval(y)).unwrap();
        let g0 = Complex64::i() / (2.0 * z.k()) * (Complex64::i() * z.k() * (x - y).abs()).exp();
        let expect = -u[(0, 0)] * g0 * w[(0, 0)];
        assert!((k.eval_kernel(x, y).unwrap()[(0, 0)] - expect).norm() < 1e-14);
    }
    // V ≤ 0 on the negative axis: the Nyström matrix is Hermitian with real spectrum
    let k = build_k_fullline(&v, sp(-0.8, 0.0), &g).unwrap();
    let m = nystrom_matrix(&k, c(1.0, 0.0), &g).unwrap();
    assert!(m.hermitian_defect() < 1e-12 * m.norm_fro());
    for l in jostdet_core::numerics::eigenvalues(&m).unwrap() {
        assert!(l.im.abs() < 1e-10);
    }
}

#[test]
fn ktilde_branches_and_refinement() {
    let v = Potential::zero(1, Domain::FullLine);
    let g = grid_of(&v);
    let kt = build_ktilde_system(&v, sp(-1.0, 0.0), &g).unwrap();
    assert_eq!(kt.d(), 2);
    assert_eq!(kt.eval_kernel(0.2, 0.4).unwrap().max_abs(), 0.0);

    let one = Potential::square_well(-1.0, 2.0, 0.0).unwrap();
    let g = grid_of(&one);
    let z = sp(-1.0, 0.5);
    let k = z.k();
    let i = Complex64::i();
    let kt = build_ktilde_system(&one, z, &g).unwrap();
    let x = 0.25;
    let eps = 1e-9;
    let below = kt.eval_kernel(x, x - eps).unwrap();
    let above = kt.eval_kernel(x, x + eps).unwrap();
    let lower = [-0.5 * i / k, c(0.5, 0.0)];
    let upper = [-0.5 * i / k, c(-0.5, 0.0)];
    for r in 0..2 {
        assert!((below[(r, 0)] - lower[r]).norm() < 1e-8);
        assert!((above[(r, 0)] - upper[r]).norm() < 1e-8);
        assert_eq!(below[(r, 1)], c(0.0, 0.0));
    }
    let hs = |q: &jostdet_core::Quadrature| nystrom_matrix(&kt, c(1.0, 0.0), q).unwrap().norm_fro();
    // the diagonal jump limits the discrete HS norm to first order
    let (h1, h2, h3) = (hs(&g), hs(&g.refined()), hs(&g.refined().refined()));
    assert!(h1.is_finite() && (h3 - h2).abs() < 0.6 * (h2 - h1).abs(), "{h1} {h2} {h3}");
}

#[test]
fn conjugate_symmetry_for_hermitian_potential() {
    let v = coupled_gaussian();
    let g = grid_of(&v);
    for z in [sp(-1.0, 0.5), sp(-0.3, 2.0), sp(2.0, 0.7)] {
        let f = det(&jost_function(&v, z, &g, JostRoute::PlusIntegral).unwrap()).unwrap();
        let fc = det(&jost_function(&v, z.conj(), &g, JostRoute::PlusIntegral).unwrap()).unwrap();
        assert!((fc - f.conj()).norm() < 1e-9, "{}", z.z());
    }
}

#[test]
fn jost_function_decays_at_large_energy() {
    let v = coupled_gaussian();
    let g0 = grid_of(&v);
    let l1: f64 =
        g0.nodes().iter().zip(g0.weights()).map(|(&x, w)| w * jostdet_core::numerics::trace_norm(&v.eval(x))).sum();
    for t in [10.0, 100.0, 1000.0] {
        let z = sp(-t, 0.0);
        let spec = GridSpec { max_panel: (2.0 / z.k().im).min(0.5), ..GridSpec::default() };
        let g = v.grid(&spec).unwrap().0;
        let f = jost_function(&v, z, &g, JostRoute::PlusIntegral).unwrap();
        let dev = (&f - &CMatrix::identity(2)).norm_fro();
        assert!(dev <= 0.5 * l1 / z.k().im, "t = {t}: {dev}");
    }
}

#[test]
fn half_line_kernel_structure() {
    let v = Potential::exponential(-1.5, 1.0).unwrap();
    let g = grid_of(&v);
    let z = sp(-0.6, 0.3);
    let k = z.k();
    let i = Complex64::i();
    let kh = build_k_halfline(&v, z, &g).unwrap();
    for (x, y) in [(0.3f64, 1.7f64), (2.2, 0.4), (1.0, 1.5)] {
        let free = i / (2.0 * k) * ((i * k * (x - y).abs()).exp() - (i * k * (x + y)).exp());
        let branch = (k * x.min(y)).sin() / k * (i * k * x.max(y)).exp();
        assert!((free - branch).norm() < 1e-14);
        let (u, _) = polar_factor(&v.eval(x)).unwrap();
        let (_, w) = polar_factor(&v.eval(y)).unwrap();
        let expect = -u[(0, 0)] * free * w[(0, 0)];
        assert!((kh.eval_kernel(x, y).unwrap()[(0, 0)] - expect).norm() < 1e-13);
    }
    for x in [1e-3, 1e-6, 0.0] {
        assert!(kh.eval_kernel(x, 0.8).unwrap().max_abs() < 2.0 * x.max(1e-300));
    }
    let zero = Potential::zero(1, Domain::HalfLine);
    let kz = build_k_halfline(&zero, z, &grid_of(&zero)).unwrap();
    assert_eq!(kz.eval_kernel(0.2, 0.6).unwrap().max_abs(), 0.0);
}

#[test]
fn half_line_fredholm_determinant_is_jost_function_at_zero() {
    let m = CMatrix::from_real(2, 2, &[-1.2, 0.3, 0.3, -0.4]).unwrap();
    let v = Potential::matrix_coupled(m, &Potential::exponential(1.0, 1.0).unwrap()).unwrap();
    let g = grid_of(&v);
    for z in [sp(-0.5, 0.0), sp(-1.0, 0.7)] {
        let kh = build_k_halfline(&v, z, &g).unwrap();
        let d1 = det1_semiseparable(&kh, c(1.0, 0.0), &g).unwrap();
        let jost = det(&half_line_jost_function(&v, z, &g).unwrap()).unwrap();
        assert!((d1.value - jost).norm() < 1e-9, "{} vs {jost}", d1.value);
    }
}

#[test]
fn no_bound_states_without_potential() {
    let opts = BoundStateOptions::default();
    for domain in [Domain::FullLine, Domain::HalfLine] {
        let v = Potential::zero(2, domain);
        for m in BoundStateMethod::ALL {
            let r = count_bound_states(&v, m, &opts).unwrap();
            assert_eq!(r.count, 0);
            assert!(!r.inconclusive);
        }
    }
}

#[test]
fn exponential_well_threshold() {
    let opts = BoundStateOptions::default();
    for (strength, expect) in [(1.0, 0), (2.0, 1)] {
        let v = Potential::exponential(-strength, 1.0).unwrap();
        let counts = count_bound_states_all(&v, &opts).unwrap();
        for r in counts {
            assert_eq!(r.count, expect, "{:?} at c = {strength}", r.method);
            assert!(!r.inconclusive, "{:?}", r.notes);
        }
    }
}

#[test]
fn square_well_counts_match_closed_form() {
    let opts = BoundStateOptions::default();
    for (depth, width) in [(1.0, 1.0), (4.0, 2.5), (9.0, 1.7), (0.3, 4.0)] {
        let expect = (f64::sqrt(depth) * width / std::f64::consts::PI).ceil() as usize;
        let v = Potential::square_well(depth, width, 0.3).unwrap();
        for r in count_bound_states_all(&v, &opts).unwrap() {
            assert_eq!(r.count, expect, "{:?} for ({depth}, {width})", r.method);
        }
    }
}

#[test]
fn jost_zeros_locate_square_well_energy() {
    // single even state of depth 1, width 1: tan(q/2) = κ/q with q² + κ² = 1
    let v = Potential::square_well(1.0, 1.0, 0.0).unwrap();
    let r = count_bound_states(&v, BoundStateMethod::JostZeros, &BoundStateOptions::default()).unwrap();
    assert_eq!(r.count, 1);
    let kappa = (-r.energies[0]).sqrt();
    let q = (1.0 - kappa * kappa).sqrt();
    assert!(((0.5 * q).tan() - kappa / q).abs() < 1e-9);
}

#[test]
fn non_hermitian_potentials_are_refused() {
    let m = CMatrix::from_vec(2, 2, vec![c(-1.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]).unwrap();
    let v = Potential::matrix_coupled(m, &Potential::gaussian(1.0, 1.0, 0.0).unwrap()).unwrap();
    assert!(!v.is_hermitian());
    let r = count_bound_states(&v, BoundStateMethod::DirectDiag, &BoundStateOptions::default());
    assert!(matches!(r, Err(Error::Contract(_))));
    // the determinant identities do not need self-adjointness
    let g = grid_of(&v);
    let (l, r) = fredholm_jost_check(&v, sp(-1.0, 0.2), &g).unwrap();
    assert!((l - r).norm() < 1e-9);
}

#[test]
fn bargmann_examples() {
    let spec = GridSpec { truncation_tol: 1e-13, ..GridSpec::default() };
    let rep = Potential::exponential(2.0, 1.0).unwrap();
    assert_eq!(bargmann_bound(&rep, &rep.grid(&spec).unwrap().0).unwrap(), 0.0);
    for strength in [0.5, 1.0, 3.0] {
        let v = Potential::exponential(-strength, 1.0).unwrap();
        let b = bargmann_bound(&v, &v.grid(&spec).unwrap().0).unwrap();
        assert!((b - strength).abs() < 1e-10);
    }
    let v = Potential::matrix_diag(&[
        Potential::exponential(-1.0, 1.0).unwrap(),
        Potential::exponential(1.0, 1.0).unwrap(),
    ])
    .unwrap();
    let b = bargmann_bound(&v, &v.grid(&spec).unwrap().0).unwrap();
    assert!((b - 1.0).abs() < 1e-10);
    let full = Potential::gaussian(-1.0, 1.0, 0.0).unwrap();
    assert!(bargmann_bound(&full, &grid_of(&full)).is_err());
}
