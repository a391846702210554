//! Scattering kernels, Jost functions and bound states for matrix Schrödinger operators.

mod bound;
mod jost;
mod kernels;
mod potential;

pub use bound::{
    bargmann_bound, count_bound_states, count_bound_states_all, BoundStateCount, BoundStateMethod, BoundStateOptions,
};
pub use jost::{
    half_line_jost_function, jost_function, jost_function_routes, jost_solution, JostData, JostRoute, JostRoutes, Side,
};
pub use kernels::{
    build_k_fullline, build_k_halfline, build_ktilde_system, first_order_check, fredholm_jost_check, FirstOrderCheck,
};
pub use potential::{Domain, GridSpec, Potential, WeightClass};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Smallest `|z|` accepted; the free Green's function carries `z^{-1/2}`.
pub const Z_MIN: f64 = 1e-8;

/// Energy `z` with `k = z^{1/2}`, `Im k ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint {
    z: Complex64,
    k: Complex64,
}

impl SpectralPoint {
    pub fn new(z: Complex64) -> Result<Self> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::Contract(format!("non-finite energy {z}")));
        }
        if z.norm() < Z_MIN {
            return Err(Error::Contract(format!("|z| = {:.3e} below {Z_MIN:e}", z.norm())));
        }
        let mut k = z.sqrt();
        if k.im < 0.0 || (k.im == 0.0 && k.re < 0.0) {
            k = -k;
        }
        Ok(SpectralPoint { z, k })
    }

    pub fn real(z: f64) -> Result<Self> {
        Self::new(Complex64::new(z, 0.0))
    }

    pub fn from_k(k: Complex64) -> Result<Self> {
        if k.im < 0.0 || (k.im == 0.0 && k.re <= 0.0) {
            return Err(Error::Contract(format!("k = {k} outside the closed upper half-plane branch")));
        }
        let z = k * k;
        if z.norm() < Z_MIN {
            return Err(Error::Contract(format!("|z| = {:.3e} below {Z_MIN:e}", z.norm())));
        }
        Ok(SpectralPoint { z, k })
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }

    pub fn k(&self) -> Complex64 {
        self.k
    }

    /// `z̄`, whose square root on the branch is `-conj(k)`.
    pub fn conj(&self) -> Self {
        let k = if self.k.im == 0.0 { self.k } else { -self.k.conj() };
        SpectralPoint { z: self.z.conj(), k }
    }

    /// True off the half-line `[0, ∞)`.
    pub fn off_spectrum(&self) -> bool {
        self.k.im > 0.0
    }

    pub(crate) fn require_off_spectrum(&self) -> Result<()> {
        if !self.off_spectrum() {
            return Err(Error::Contract(format!("z = {} lies on [0, ∞)", self.z)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_has_nonnegative_imaginary_part() {
        for z in [
            Complex64::new(-1.0, 0.0),
            Complex64::new(-1.0, -0.0),
            Complex64::new(-1.0, 0.5),
            Complex64::new(-1.0, -0.5),
            Complex64::new(2.0, 1e-3),
            Complex64::new(2.0, -1e-3),
        ] {
            let p = SpectralPoint::new(z).unwrap();
            assert!(p.k().im >= 0.0, "{z}");
            assert!((p.k() * p.k() - z).norm() <= 1e-14 * z.norm());
        }
        assert_eq!(SpectralPoint::real(-4.0).unwrap().k(), Complex64::new(0.0, 2.0));
        assert_eq!(SpectralPoint::real(4.0).unwrap().k(), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn tiny_energy_rejected() {
        assert!(SpectralPoint::real(-1e-9).is_err());
        assert!(SpectralPoint::real(-1e-8).is_ok());
    }

    #[test]
    fn conjugate_branch() {
        let p = SpectralPoint::new(Complex64::new(-1.0, 0.3)).unwrap();
        let q = p.conj();
        assert!((q.k() * q.k() - q.z()).norm() < 1e-14);
        assert!(q.k().im >= 0.0);
    }
}
