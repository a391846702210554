#![allow(dead_code)]

use std::f64::consts::PI;

use jostdet_core::numerics::{inverse, CMatrix};
use jostdet_core::{Complex64, OperatorFunction, SemiSeparableKernel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Independent branches; the kernel jumps across the diagonal.
    Jump,
    /// `F2 = F1 M`, `G2 = M⁻¹ G1`; continuous across the diagonal.
    Continuous,
    /// `F2 = [F1 X]`, `G2 = [G1; Y]` with `Y X = 0`; jumps, but the branch traces agree.
    TracelessJump,
}

fn crand(rng: &mut ChaCha8Rng, scale: f64) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
}

/// Entry-wise `c0 + c1 x + c2 cos(ω x + φ)`.
fn smooth_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> OperatorFunction {
    let mut coef = Vec::new();
    for _ in 0..rows * cols {
        let c = [crand(rng, scale), crand(rng, scale), crand(rng, scale)];
        let omega = rng.gen_range(0.5..3.0);
        let phi = rng.gen_range(0.0..2.0 * PI);
        coef.push((c, omega, phi));
    }
    OperatorFunction::new(rows, cols, (0.0, 1.0), move |x| {
        let v = coef.iter().map(|(c, w, p)| c[0] + c[1] * x + c[2] * (w * x + p).cos()).collect();
        CMatrix::from_vec(rows, cols, v).unwrap()
    })
}

pub fn random_kernel(rng: &mut ChaCha8Rng, family: Family, scale: f64) -> SemiSeparableKernel {
    let i = (0.0, 1.0);
    match family {
        Family::Jump => {
            let d = rng.gen_range(1..=3);
            let n1 = rng.gen_range(1..=2);
            let n2 = rng.gen_range(1..=2);
            SemiSeparableKernel::new(
                smooth_matrix(rng, d, n1, scale),
                smooth_matrix(rng, n1, d, scale),
                smooth_matrix(rng, d, n2, scale),
                smooth_matrix(rng, n2, d, scale),
                i,
            )
            .unwrap()
        }
        Family::Continuous => {
            let d = rng.gen_range(1..=3);
            let n = rng.gen_range(1..=2);
            let f1 = smooth_matrix(rng, d, n, scale);
            let g1 = smooth_matrix(rng, n, d, scale);
            let p = CMatrix::from_fn(
                n,
                n,
                |r, c| if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) } + crand(rng, 0.3),
            );
            let pinv = inverse(&p).unwrap();
            let lam: Vec<Complex64> = (0..n).map(|_| crand(rng, 1.0)).collect();
            let m = {
                let (p, pinv, lam) = (p.clone(), pinv.clone(), lam.clone());
                OperatorFunction::new(n, n, i, move |x| {
                    let dg = CMatrix::from_diag(&lam.iter().map(|l| (l * x).exp()).collect::<Vec<_>>());
                    &(&p * &dg) * &pinv
                })
            };
            let minv = OperatorFunction::new(n, n, i, move |x| {
                let dg = CMatrix::from_diag(&lam.iter().map(|l| (-l * x).exp()).collect::<Vec<_>>());
                &(&p * &dg) * &pinv
            });
            let f2 = f1.product(&m).unwrap();
            let g2 = minv.product(&g1).unwrap();
            SemiSeparableKernel::new(f1, g1, f2, g2, i).unwrap()
        }
        Family::TracelessJump => {
            let d = rng.gen_range(2..=3);
            let f1 = smooth_matrix(rng, d, 1, scale);
            let g1 = smooth_matrix(rng, 1, d, scale);
            let xq = smooth_matrix(rng, d, 1, scale);
            let yraw = smooth_matrix(rng, 1, d, scale);
            let (f1c, xc) = (f1.clone(), xq.clone());
            let f2 = OperatorFunction::new(d, 2, i, move |x| {
                CMatrix::hstack(&[&f1c.eval(x).unwrap(), &xc.eval(x).unwrap()])
            });
            let g1c = g1.clone();
            let g2 = OperatorFunction::new(2, d, i, move |x| {
                let q = xq.eval(x).unwrap();
                let y = yraw.eval(x).unwrap();
                let yq: Complex64 = (0..d).map(|k| y[(0, k)] * q[(k, 0)]).sum();
                let qq: f64 = (0..d).map(|k| q[(k, 0)].norm_sqr()).sum();
                let yo = CMatrix::from_fn(1, d, |_, k| y[(0, k)] - yq / qq * q[(k, 0)].conj());
                CMatrix::vstack(&[&g1c.eval(x).unwrap(), &yo])
            });
            SemiSeparableKernel::new(f1, g1, f2, g2, i).unwrap()
        }
    }
}

pub const BATTERY_FAMILIES: [Family; 3] = [Family::Jump, Family::Continuous, Family::TracelessJump];

/// Twenty kernels cycling through the three families.
pub fn battery(seed: u64, scale: f64) -> Vec<(Family, SemiSeparableKernel)> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..20)
        .map(|k| {
            let f = BATTERY_FAMILIES[k % 3];
            (f, random_kernel(&mut rng, f, scale))
        })
        .collect()
}
