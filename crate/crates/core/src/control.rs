//! The stabilizing boundary feedback, its gain certificate, and the
//! correspondence between hub torques and angular accelerations.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::beam::{ChannelSpec, ChannelTag, TorqueMapParams};
use crate::error::{invalid, Error, Result};
use crate::fem::{BoundaryRows, DiscreteOperators, Mesh};
use crate::profile::{integrate_product, integrate_profile};
use crate::simulator::DiscreteState;

/// Lower bound used for `alpha` (and `beta`) when the corresponding
/// constraint degenerates to `> 0`.
pub const FLOOR_GAIN: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gains {
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub kappa: f64,
}

impl Gains {
    pub fn new(alpha: f64, beta: f64, k: f64, kappa: f64) -> Result<Self> {
        let g = Self { alpha, beta, k, kappa };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", format!("must be positive, got {}", self.beta)));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(invalid("k", format!("must be positive, got {}", self.k)));
        }
        if !(self.kappa != 0.0 && self.kappa.is_finite()) {
            return Err(invalid("kappa", format!("must be nonzero, got {}", self.kappa)));
        }
        Ok(())
    }

    /// Same gains without velocity damping (`k = 0`); conservative closed loop.
    pub fn without_damping(self) -> Self {
        Self { k: 0.0, ..self }
    }
}

/// Norm-equivalence constants `M1 ||ξ||² ≤ 2V(ξ) ≤ M2 ||ξ||²` and the gain
/// constraints that make `M1` positive.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityCertificate {
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    pub kappa_lower_sq: f64,
    pub alpha_lower: f64,
    pub beta_lower: f64,
    pub feasible: bool,
    pub gains: Gains,
    /// The six arguments of the `min` defining `M1`.
    #[serde(skip)]
    pub m1_terms: [f64; 6],
    /// The six arguments of the `max` defining `M2`.
    #[serde(skip)]
    pub m2_terms: [f64; 6],
}

/// Integrals and extrema of a channel that enter the certificate.
#[derive(Debug, Clone, Copy)]
struct ChannelMoments {
    rho_min: f64,
    rho_max: f64,
    c_min: f64,
    c_max: f64,
    rho_sq: f64,
    rho_psi_sq: f64,
    psi_l: f64,
    dpsi_l: f64,
}

impl ChannelMoments {
    fn of(ch: &ChannelSpec) -> Self {
        let phys = ch.physical();
        let (rho, psi) = (phys.rho(), ch.psi());
        let (rho_min, rho_max) = rho.extrema();
        let (c_min, c_max) = phys.stiffness().extrema();
        let l = ch.length();
        Self {
            rho_min,
            rho_max,
            c_min,
            c_max,
            rho_sq: integrate_product(&[rho, rho], 0).expect("channel profiles share the domain"),
            rho_psi_sq: integrate_product(&[rho, psi, psi], 0).expect("channel profiles share the domain"),
            psi_l: psi.eval(l),
            dpsi_l: psi.derivative(l, 1),
        }
    }
}

/// Evaluates both closed-form constants and the feasibility constraints.
pub fn certificate(ch: &ChannelSpec, g: &Gains) -> StabilityCertificate {
    let mom = ChannelMoments::of(ch);
    let phys = ch.physical();
    let (l, m, j, gamma) = (ch.length(), phys.tip_mass(), phys.tip_inertia(), ch.gamma());
    let kappa_sq = g.kappa * g.kappa;
    // l³ (m² + (l/2) ∫ρ²): the constant of the composite η-bound.
    let eta_bound = l.powi(3) * (m * m + 0.5 * l * mom.rho_sq);
    let kappa_lower_sq = eta_bound / mom.c_min;
    let alpha_lower = kappa_sq * gamma * gamma;
    let beta_lower = mom.rho_psi_sq + m * mom.psi_l.powi(2) + j * mom.dpsi_l.powi(2);

    let m2_terms = [
        g.alpha + gamma * gamma,
        2.0 * m,
        2.0 * j,
        2.0 * mom.rho_max,
        g.beta + 2.0 * mom.rho_psi_sq + 2.0 * j * mom.dpsi_l.powi(2) + 2.0 * m * mom.psi_l.powi(2),
        eta_bound + mom.c_max,
    ];
    let m1_terms = [
        g.alpha - alpha_lower,
        0.5 * m,
        0.5 * j,
        0.5 * mom.rho_min,
        g.beta - beta_lower,
        mom.c_min - eta_bound / kappa_sq,
    ];
    let m1 = m1_terms.iter().copied().fold(f64::INFINITY, f64::min);
    let m2 = m2_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let feasible = kappa_sq > kappa_lower_sq && g.alpha > alpha_lower && g.beta > beta_lower;
    StabilityCertificate {
        m1,
        m2,
        kappa_lower_sq,
        alpha_lower,
        beta_lower,
        feasible,
        gains: *g,
        m1_terms,
        m2_terms,
    }
}

/// Gains meeting every constraint with the given multiplicative margin:
/// `κ² = margin·κ²_lower`, `α = max(margin·κ²γ², 1)`, `β = margin·β_lower`
/// (or 1 when `β_lower = 0`).
pub fn suggest_gains(ch: &ChannelSpec, margin: f64, k: f64) -> Result<Gains> {
    if !(margin > 1.0 && margin.is_finite()) {
        return Err(invalid("margin", format!("must exceed 1, got {margin}")));
    }
    let probe = certificate(
        ch,
        &Gains {
            alpha: 1.0,
            beta: 1.0,
            k,
            kappa: 1.0,
        },
    );
    let kappa_sq = margin * probe.kappa_lower_sq;
    let gamma = ch.gamma();
    let alpha = (margin * kappa_sq * gamma * gamma).max(FLOOR_GAIN);
    let beta = if probe.beta_lower > 0.0 {
        margin * probe.beta_lower
    } else {
        FLOOR_GAIN
    };
    Gains::new(alpha, beta, k, kappa_sq.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeedbackMode {
    /// Exactly dissipative with respect to the discrete Lyapunov functional.
    DiscreteConsistent,
    /// The continuous feedback formula evaluated on the FEM state, with
    /// end-element boundary recovery.
    ContinuousForm,
}

/// The feedback as a linear functional `u = w_a·a + w_φ φ + w_ω ω`.
///
/// The control never reads the beam velocity `b`.
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    pub mode: FeedbackMode,
    pub a: DVector<f64>,
    pub phi: f64,
    pub omega: f64,
}

impl FeedbackLaw {
    pub fn new(ops: &DiscreteOperators, ch: &ChannelSpec, g: &Gains, mode: FeedbackMode) -> Self {
        let gamma = ch.gamma();
        let scale = -1.0 / g.beta;
        let nc = ops.layout.constrained();
        let (a, phi) = match mode {
            FeedbackMode::DiscreteConsistent => {
                let beam = &ops.k * &ops.psi_proj - &ops.l_rho * gamma;
                let phi = g.alpha - gamma * ops.psi_proj.dot(&ops.l_rho);
                (beam, phi)
            }
            FeedbackMode::ContinuousForm => {
                let phys = ch.physical();
                let psi = ch.psi();
                let (c0, psi0, dpsi0) = (phys.stiffness().eval(0.0), psi.eval(0.0), psi.derivative(0.0, 1));
                // (c η'' ψ' − (c η'')' ψ) at x = 0
                let root = &ops.boundary.curvature_root * (c0 * dpsi0) - &ops.boundary.flux_root * psi0;
                let beam = &ops.k_psi + root.rows(2, nc) - &ops.l_rho * gamma;
                let l = ch.length();
                let rho_psi = integrate_profile(psi, Some(phys.rho()), 0).expect("channel profiles share the domain")
                    + phys.tip_mass() * psi.eval(l);
                (beam, g.alpha - gamma * rho_psi)
            }
        };
        Self {
            mode,
            a: a * scale,
            phi: phi * scale,
            omega: g.k * scale,
        }
    }

    pub fn eval(&self, x: &DiscreteState) -> f64 {
        self.a.dot(&x.a) + self.phi * x.phi + self.omega * x.omega
    }

    /// Evaluates on a flat `(a, b, φ, ω)` vector.
    pub fn eval_flat(&self, x: &DVector<f64>) -> f64 {
        let nc = self.a.len();
        self.a.dot(&x.rows(0, nc)) + self.phi * x[2 * nc] + self.omega * x[2 * nc + 1]
    }
}

fn check_state(x: &DiscreteState, ops: &DiscreteOperators) -> Result<()> {
    let nc = ops.layout.constrained();
    for len in [x.a.len(), x.b.len()] {
        if len != nc {
            return Err(Error::DimensionMismatch { expected: nc, got: len });
        }
    }
    Ok(())
}

/// Feedback control value for state `x`.
pub fn feedback(
    x: &DiscreteState,
    ops: &DiscreteOperators,
    ch: &ChannelSpec,
    g: &Gains,
    mode: FeedbackMode,
) -> Result<f64> {
    check_state(x, ops)?;
    Ok(FeedbackLaw::new(ops, ch, g, mode).eval(x))
}

fn expect_tag(ch: &ChannelSpec, tag: ChannelTag) -> Result<()> {
    if ch.tag() != tag {
        return Err(Error::WrongChannel {
            expected: tag,
            got: ch.tag(),
        });
    }
    Ok(())
}

/// Turning-channel control `u_T`.
pub fn feedback_turning(
    x: &DiscreteState,
    ops: &DiscreteOperators,
    ch: &ChannelSpec,
    g: &Gains,
    mode: FeedbackMode,
) -> Result<f64> {
    expect_tag(ch, ChannelTag::Turning)?;
    feedback(x, ops, ch, g, mode)
}

/// Raising-channel control `u_R`.
pub fn feedback_raising(
    x: &DiscreteState,
    ops: &DiscreteOperators,
    ch: &ChannelSpec,
    g: &Gains,
    mode: FeedbackMode,
) -> Result<f64> {
    expect_tag(ch, ChannelTag::Raising)?;
    feedback(x, ops, ch, g, mode)
}

/// Affine maps between hub torques and the angular accelerations `u_T`,
/// `u_R`, precomputed on one mesh.
///
/// `M_T = D_T u_T + (R (c_z y'')' + c_z y'' cos φ_R0)|_{x=0}` and
/// `M̃_R = D_R u_R − c_y z̃''|_{x=0} − g (∫z̃ρ + m z̃(l) + m0 d) sin φ_R0
///        − g (∫z0 ρ + m z0(l)) φ̃_R cos φ_R0`.
#[derive(Debug, Clone)]
pub struct TorqueMap {
    turning_inertia: f64,
    raising_inertia: f64,
    /// Constrained-layout row giving the turning boundary correction.
    turning_row: DVector<f64>,
    /// Constrained-layout row giving the raising beam correction.
    raising_row: DVector<f64>,
    raising_offset: f64,
    raising_angle_coef: f64,
    n_constrained: usize,
}

impl TorqueMap {
    pub fn new(p: &TorqueMapParams, mesh: &Mesh) -> Result<Self> {
        p.validate()?;
        let nc = mesh.layout().constrained();
        let (s, c) = p.phi_r0.sin_cos();
        let rows_z = BoundaryRows::new(mesh, &p.cz);
        let turning_full = &rows_z.flux_root * p.r + &rows_z.curvature_root * (p.cz.eval(0.0) * c);
        let rows_y = BoundaryRows::new(mesh, &p.cy);
        let l_rho = crate::fem::rho_load(mesh, &p.rho, p.m)?;
        let raising = -(rows_y.curvature_root.rows(2, nc) * p.cy.eval(0.0)) - l_rho * (p.g * s);
        let z0_moment = integrate_profile(&p.z0, Some(&p.rho), 0)? + p.m * p.z0.eval(p.l);
        Ok(Self {
            turning_inertia: p.turning_denominator()?,
            raising_inertia: p.raising_denominator(),
            turning_row: turning_full.rows(2, nc).into_owned(),
            raising_row: raising,
            raising_offset: -p.g * p.m0 * p.d * s,
            raising_angle_coef: -p.g * z0_moment * c,
            n_constrained: nc,
        })
    }

    fn check(&self, x: &DiscreteState) -> Result<()> {
        if x.a.len() != self.n_constrained {
            return Err(Error::DimensionMismatch {
                expected: self.n_constrained,
                got: x.a.len(),
            });
        }
        Ok(())
    }

    fn turning_bias(&self, x: &DiscreteState) -> f64 {
        self.turning_row.dot(&x.a)
    }

    fn raising_bias(&self, x: &DiscreteState) -> f64 {
        self.raising_row.dot(&x.a) + self.raising_offset + self.raising_angle_coef * x.phi
    }

    pub fn torque_turning(&self, u_t: f64, x_t: &DiscreteState) -> Result<f64> {
        self.check(x_t)?;
        Ok(self.turning_inertia * u_t + self.turning_bias(x_t))
    }

    pub fn torque_raising(&self, u_r: f64, x_r: &DiscreteState) -> Result<f64> {
        self.check(x_r)?;
        Ok(self.raising_inertia * u_r + self.raising_bias(x_r))
    }

    pub fn accel_turning(&self, torque: f64, x_t: &DiscreteState) -> Result<f64> {
        self.check(x_t)?;
        Ok((torque - self.turning_bias(x_t)) / self.turning_inertia)
    }

    pub fn accel_raising(&self, torque: f64, x_r: &DiscreteState) -> Result<f64> {
        self.check(x_r)?;
        Ok((torque - self.raising_bias(x_r)) / self.raising_inertia)
    }
}

/// `(M_T, M̃_R)` producing accelerations `(u_T, u_R)` in states `(x_T, x_R)`.
pub fn torque_from_accel(
    u_t: f64,
    u_r: f64,
    x_t: &DiscreteState,
    x_r: &DiscreteState,
    p: &TorqueMapParams,
    mesh: &Mesh,
) -> Result<(f64, f64)> {
    let map = TorqueMap::new(p, mesh)?;
    Ok((map.torque_turning(u_t, x_t)?, map.torque_raising(u_r, x_r)?))
}

/// `(u_T, u_R)` produced by torques `(M_T, M̃_R)` in states `(x_T, x_R)`.
pub fn accel_from_torque(
    m_t: f64,
    m_r: f64,
    x_t: &DiscreteState,
    x_r: &DiscreteState,
    p: &TorqueMapParams,
    mesh: &Mesh,
) -> Result<(f64, f64)> {
    let map = TorqueMap::new(p, mesh)?;
    Ok((map.accel_turning(m_t, x_t)?, map.accel_raising(m_r, x_r)?))
}
