//! The quadratic Lyapunov functional on the discrete state, and numerical
//! checks of the inequalities that bound it.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::beam::ChannelSpec;
use crate::control::{Gains, StabilityCertificate};
use crate::error::{Error, Result};
use crate::fem::{hermite, DiscreteOperators, Gram, Mesh};
use crate::linalg::generalized_eigenvalues;
use crate::profile::{integrate_product, Profile};
use crate::quadrature::GaussLegendre;
use crate::simulator::Trajectory;

/// `2V(x) = xᵀ P x` on the extended state `(a, b, φ, ω, p, q)` and on the
/// simulation state `(a, b, φ, ω)`.
///
/// `2V = αφ² + βω² + (b − ωψ̂)ᵀ M_dist (b − ωψ̂) + aᵀ K a + m (p − ψ̂(l) ω)²
///      + J (q − ψ̂'(l) ω)² − 2γφ L_rhoᵀ a`, with `ψ̂ = M_aug⁻¹ L_psi`.
#[derive(Debug, Clone)]
pub struct LyapunovForm {
    pub extended: DMatrix<f64>,
    pub simulation: DMatrix<f64>,
}

impl LyapunovForm {
    /// `V(x)` for either state layout.
    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        let p = if x.len() == self.simulation.nrows() {
            &self.simulation
        } else if x.len() == self.extended.nrows() {
            &self.extended
        } else {
            return Err(Error::DimensionMismatch {
                expected: self.simulation.nrows(),
                got: x.len(),
            });
        };
        Ok(0.5 * x.dot(&(p * x)))
    }
}

pub fn build_v(ops: &DiscreteOperators, ch: &ChannelSpec, g: &Gains) -> LyapunovForm {
    let layout = ops.layout;
    let nc = layout.constrained();
    let phys = ch.physical();
    let (m, j, gamma) = (phys.tip_mass(), phys.tip_inertia(), ch.gamma());
    let psi = &ops.psi_proj;
    let (psi_l, dpsi_l) = (psi[layout.tip_value()], psi[layout.tip_slope()]);
    let (ia, ib, iphi, iomega) = (0, nc, 2 * nc, 2 * nc + 1);

    let fill = |mass: &DMatrix<f64>, dim: usize| {
        let mut p = DMatrix::zeros(dim, dim);
        p.view_mut((ia, ia), (nc, nc)).copy_from(&ops.k);
        p.view_mut((ib, ib), (nc, nc)).copy_from(mass);
        let coupling = -(mass * psi);
        for i in 0..nc {
            p[(ia + i, iphi)] = -gamma * ops.l_rho[i];
            p[(iphi, ia + i)] = -gamma * ops.l_rho[i];
            p[(ib + i, iomega)] = coupling[i];
            p[(iomega, ib + i)] = coupling[i];
        }
        p[(iphi, iphi)] = g.alpha;
        p[(iomega, iomega)] = g.beta + psi.dot(&(mass * psi));
        p
    };

    let simulation = fill(&ops.m_aug, 2 * nc + 2);
    let mut extended = fill(&ops.m_dist, 2 * nc + 4);
    let (ip, iq) = (2 * nc + 2, 2 * nc + 3);
    extended[(iomega, iomega)] += m * psi_l * psi_l + j * dpsi_l * dpsi_l;
    extended[(ip, ip)] = m;
    extended[(iq, iq)] = j;
    extended[(ip, iomega)] = -m * psi_l;
    extended[(iomega, ip)] = -m * psi_l;
    extended[(iq, iomega)] = -j * dpsi_l;
    extended[(iomega, iq)] = -j * dpsi_l;
    LyapunovForm { extended, simulation }
}

/// `V(x_{n+1}) − V(x_n) + k Δt ω_mid²` for every step of `traj`.
pub fn dissipation_residual(traj: &Trajectory, form: &LyapunovForm, g: &Gains) -> Result<Vec<f64>> {
    let nc = traj.layout.constrained();
    let values = traj.states.iter().map(|x| form.value(x)).collect::<Result<Vec<_>>>()?;
    Ok(traj
        .states
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, v)| {
            let omega_mid = 0.5 * (x[0][2 * nc + 1] + x[1][2 * nc + 1]);
            v[1] - v[0] + g.k * traj.dt * omega_mid * omega_mid
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEquivalence {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub pass: bool,
}

/// Spectrum of the pencil `(P_ext, G_ext)` against `[M1, M2]`, with
/// tolerance `1e-8 M2` on both ends.
///
/// An infeasible certificate never passes: with `M1 ≤ 0` the lower
/// estimate carries no information.
pub fn norm_equivalence(form: &LyapunovForm, gram: &Gram, cert: &StabilityCertificate) -> Result<NormEquivalence> {
    let ev = generalized_eigenvalues(&form.extended, &gram.extended)?;
    let (lambda_min, lambda_max) = (ev[0], ev[ev.len() - 1]);
    let tol = 1e-8 * cert.m2;
    Ok(NormEquivalence {
        lambda_min,
        lambda_max,
        pass: cert.feasible && cert.m1 - tol <= lambda_min && lambda_max <= cert.m2 + tol,
    })
}

/// The three members of the clamped-function inequality chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FriedrichsChain {
    /// `∫ η²`
    pub value: f64,
    /// `(l²/2) ∫ η'²`
    pub slope: f64,
    /// `(l⁴/4) ∫ η''²`
    pub curvature: f64,
}

impl FriedrichsChain {
    pub fn holds(&self) -> bool {
        let tol = 1e-12 * self.curvature.abs();
        self.value <= self.slope + tol && self.slope <= self.curvature + tol
    }
}

/// `∫ η^(order)²` for each order 0..=2, per element with an exact rule.
fn derivative_energies(a: &DVector<f64>, mesh: &Mesh) -> [f64; 3] {
    let rule = GaussLegendre::new(4);
    let mut out = [0.0; 3];
    for e in 0..mesh.n_elements() {
        let (xa, xb) = mesh.element(e);
        let h = xb - xa;
        for (x, w) in rule.mapped(xa, xb) {
            let basis = hermite((x - xa) / h, h);
            for (order, acc) in out.iter_mut().enumerate() {
                let v: f64 = (0..4).map(|i| basis[order][i] * a[2 * e + i]).sum();
                *acc += w * v * v;
            }
        }
    }
    out
}

fn check_clamped(a: &DVector<f64>, mesh: &Mesh) -> Result<()> {
    mesh.layout().restrict(a).map(|_| ())
}

/// Friedrichs chain for a clamped FEM function given in the full layout.
pub fn friedrichs_check(a: &DVector<f64>, mesh: &Mesh) -> Result<FriedrichsChain> {
    check_clamped(a, mesh)?;
    let l = mesh.length();
    let [e0, e1, e2] = derivative_energies(a, mesh);
    Ok(FriedrichsChain {
        value: e0,
        slope: 0.5 * l * l * e1,
        curvature: 0.25 * l.powi(4) * e2,
    })
}

/// Left and right sides of one inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bound {
    pub lhs: f64,
    pub rhs: f64,
}

impl Bound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + 1e-12 * self.rhs.abs()
    }

    /// Relative slack `(rhs − lhs) / rhs`.
    pub fn margin(&self) -> f64 {
        if self.rhs == 0.0 {
            if self.lhs <= 0.0 {
                0.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            (self.rhs - self.lhs) / self.rhs.abs()
        }
    }
}

/// The Cauchy-Schwarz steps and the composite deflection bound used to
/// control the gravity cross term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeflectionBounds {
    /// `(∫ηρ)² ≤ ∫η² ∫ρ²`
    pub weighted_integral: Bound,
    /// `η(l)² ≤ l ∫η'²`
    pub tip_value: Bound,
    /// `(∫ηρ)² + m² η(l)² ≤ (l³/2)(m² + (l/2)∫ρ²) ∫η''²`
    pub composite: Bound,
}

impl DeflectionBounds {
    pub fn holds(&self) -> bool {
        self.weighted_integral.holds() && self.tip_value.holds() && self.composite.holds()
    }
}

pub fn deflection_bounds(a: &DVector<f64>, mesh: &Mesh, rho: &Profile, tip_mass: f64) -> Result<DeflectionBounds> {
    check_clamped(a, mesh)?;
    let l = mesh.length();
    let [e0, e1, e2] = derivative_energies(a, mesh);
    let rho_sq = integrate_product(&[rho, rho], 0)?;
    let rule = GaussLegendre::new(ELEMENT_RULE);
    let mut eta_rho = 0.0;
    for e in 0..mesh.n_elements() {
        let (xa, xb) = mesh.element(e);
        let h = xb - xa;
        let mut cuts = vec![xa];
        cuts.extend(rho.breakpoints().iter().copied().filter(|&x| x > xa && x < xb));
        cuts.push(xb);
        for w in cuts.windows(2) {
            eta_rho += rule.integrate(w[0], w[1], |x| {
                let basis = hermite((x - xa) / h, h);
                let eta: f64 = (0..4).map(|i| basis[0][i] * a[2 * e + i]).sum();
                eta * rho.eval(x)
            });
        }
    }
    let eta_l = a[a.len() - 2];
    Ok(DeflectionBounds {
        weighted_integral: Bound {
            lhs: eta_rho * eta_rho,
            rhs: e0 * rho_sq,
        },
        tip_value: Bound {
            lhs: eta_l * eta_l,
            rhs: l * e1,
        },
        composite: Bound {
            lhs: eta_rho * eta_rho + tip_mass * tip_mass * eta_l * eta_l,
            rhs: 0.5 * l.powi(3) * (tip_mass * tip_mass + 0.5 * l * rho_sq) * e2,
        },
    })
}

const ELEMENT_RULE: usize = 4;

/// Summary written by the verification workflow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    pub pass: bool,
    pub dissipation_max_residual: f64,
    pub friedrichs_violations: usize,
}
