//! First bending frequency of a uniform clamped beam with tip mass and rotary
//! inertia: finite-element pencil and the transcendental frequency equation.

use crate::error::Result;
use crate::fem::{beam_matrices, Mesh};
use crate::linalg::smallest_generalized_eigenvalue;
use crate::profile::Profile;

/// Uniform beam data for modal checks; `tip_mass` and `tip_inertia` may vanish.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformBeam {
    pub length: f64,
    pub rho: f64,
    pub stiffness: f64,
    pub tip_mass: f64,
    pub tip_inertia: f64,
}

impl UniformBeam {
    /// Frequency determinant at wavenumber `k` (with `ω² = c k⁴ / ρ`),
    /// divided by `cosh²(k l)` to stay bounded.
    ///
    /// Mode shape `A (cos − cosh) + B (sin − sinh)` already satisfies the
    /// clamped conditions; the rows are `c Y''' + ω² m Y = 0` and
    /// `c Y'' − ω² J Y' = 0` at `x = l`.
    pub fn frequency_determinant(&self, k: f64) -> f64 {
        let kl = k * self.length;
        let (s, co) = kl.sin_cos();
        let (sh, ch) = (kl.sinh(), kl.cosh());
        let mu = self.tip_mass * k / self.rho;
        let nu = self.tip_inertia * k.powi(3) / self.rho;
        let r11 = (s - sh) + mu * (co - ch);
        let r12 = (-co - ch) + mu * (s - sh);
        let r21 = (-co - ch) + nu * (s + sh);
        let r22 = (-s - sh) - nu * (co - ch);
        (r11 * r22 - r12 * r21) / (ch * ch)
    }

    /// Smallest positive root of the frequency determinant, by scanning for a
    /// sign change and bisecting to machine precision.
    pub fn first_wavenumber(&self) -> f64 {
        let step = 1e-3 / self.length;
        let mut lo = step;
        let mut f_lo = self.frequency_determinant(lo);
        loop {
            let hi = lo + step;
            let f_hi = self.frequency_determinant(hi);
            if f_lo == 0.0 {
                return lo;
            }
            if f_lo.signum() != f_hi.signum() {
                return bisect(|k| self.frequency_determinant(k), lo, hi);
            }
            lo = hi;
            f_lo = f_hi;
            assert!(lo * self.length < 1e3, "no root found for the frequency equation");
        }
    }

    /// First natural frequency squared, `c k⁴ / ρ`.
    pub fn first_eigenvalue(&self) -> f64 {
        self.stiffness * self.first_wavenumber().powi(4) / self.rho
    }

    /// Smallest eigenvalue of the Hermite pencil `(K, M_aug)`.
    pub fn fem_first_eigenvalue(&self, mesh: &Mesh) -> Result<f64> {
        let rho = Profile::constant(self.length, self.rho);
        let c = Profile::constant(self.length, self.stiffness);
        let (k, m) = beam_matrices(mesh, &rho, &c, self.tip_mass, self.tip_inertia)?;
        smallest_generalized_eigenvalue(&k, &m)
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
