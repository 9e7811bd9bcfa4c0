//! Physical parameters and the two channel specializations of the abstract
//! operator pair `(A, B)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::profile::{check_same_domain, integrate_profile, Profile};

/// Beam length, distributed density and stiffness, tip mass and inertia.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPhysical {
    length: f64,
    rho: Profile,
    stiffness: Profile,
    tip_mass: f64,
    tip_inertia: f64,
}

impl BeamPhysical {
    pub fn new(length: f64, rho: Profile, stiffness: Profile, tip_mass: f64, tip_inertia: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(invalid("length", format!("must be positive, got {length}")));
        }
        check_same_domain(length, rho.length())?;
        check_same_domain(length, stiffness.length())?;
        let rho_min = rho.min_value();
        if rho_min <= 0.0 {
            return Err(invalid("rho", format!("must be positive on [0, l], min = {rho_min}")));
        }
        let c_min = stiffness.min_value();
        if c_min <= 0.0 {
            return Err(invalid("c", format!("must be positive on [0, l], min = {c_min}")));
        }
        if !(tip_mass > 0.0 && tip_mass.is_finite()) {
            return Err(invalid("m", format!("tip mass must be positive, got {tip_mass}")));
        }
        if !(tip_inertia > 0.0 && tip_inertia.is_finite()) {
            return Err(invalid("J", format!("tip inertia must be positive, got {tip_inertia}")));
        }
        Ok(Self {
            length,
            rho,
            stiffness,
            tip_mass,
            tip_inertia,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn rho(&self) -> &Profile {
        &self.rho
    }

    /// Bending stiffness `c(x) = E(x) I(x)`.
    pub fn stiffness(&self) -> &Profile {
        &self.stiffness
    }

    pub fn tip_mass(&self) -> f64 {
        self.tip_mass
    }

    pub fn tip_inertia(&self) -> f64 {
        self.tip_inertia
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelTag {
    Turning,
    Raising,
    Custom,
}

/// One instance of the abstract control system: beam data plus the control
/// influence shape `psi` and the gravity coupling `gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    physical: BeamPhysical,
    psi: Profile,
    gamma: f64,
    tag: ChannelTag,
}

impl ChannelSpec {
    pub fn new(physical: BeamPhysical, psi: Profile, gamma: f64, tag: ChannelTag) -> Result<Self> {
        check_same_domain(physical.length(), psi.length())?;
        if !psi.is_c2() {
            return Err(Error::InvalidProfile(
                "control influence shape psi must be C2 on [0, l]".into(),
            ));
        }
        if !gamma.is_finite() {
            return Err(invalid("gamma", "must be finite"));
        }
        Ok(Self {
            physical,
            psi,
            gamma,
            tag,
        })
    }

    pub fn physical(&self) -> &BeamPhysical {
        &self.physical
    }

    pub fn psi(&self) -> &Profile {
        &self.psi
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn tag(&self) -> ChannelTag {
        self.tag
    }

    pub fn length(&self) -> f64 {
        self.physical.length
    }
}

/// Hub, platform and payload data of the one-link manipulator, together with
/// the equilibrium about which the model is linearized.
#[derive(Debug, Clone, PartialEq)]
pub struct TorqueMapParams {
    /// Platform moment of inertia.
    pub i0: f64,
    /// Hub moments of inertia.
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    /// Central moments of inertia of the payload.
    pub j1: f64,
    pub j2: f64,
    pub j3: f64,
    /// Hub mass and the offset of its centre of mass.
    pub m0: f64,
    pub d: f64,
    /// Platform radius.
    pub r: f64,
    pub g: f64,
    /// Equilibrium raising angle.
    pub phi_r0: f64,
    /// Equilibrium deflection `z_0(x)`; computed elsewhere, zero by default.
    pub z0: Profile,
    pub cz: Profile,
    pub cy: Profile,
    pub rho: Profile,
    /// Payload mass.
    pub m: f64,
    pub l: f64,
}

impl TorqueMapParams {
    /// Checks every parameter invariant, including strict positivity of both
    /// torque/acceleration denominators.
    pub fn validate(&self) -> Result<()> {
        let scalars: [(&'static str, f64); 14] = [
            ("I0", self.i0),
            ("I1", self.i1),
            ("I2", self.i2),
            ("I3", self.i3),
            ("J1", self.j1),
            ("J2", self.j2),
            ("J3", self.j3),
            ("m0", self.m0),
            ("d", self.d),
            ("R", self.r),
            ("g", self.g),
            ("phi_r0", self.phi_r0),
            ("m", self.m),
            ("l", self.l),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
        }
        for (name, v) in [
            ("I0", self.i0),
            ("I1", self.i1),
            ("I2", self.i2),
            ("I3", self.i3),
            ("J1", self.j1),
            ("m0", self.m0),
        ] {
            if v < 0.0 {
                return Err(invalid(name, format!("must be non-negative, got {v}")));
            }
        }
        // Positivity of l, rho, c, m and J is enforced by BeamPhysical.
        BeamPhysical::new(self.l, self.rho.clone(), self.cz.clone(), self.m, self.j3)?;
        BeamPhysical::new(self.l, self.rho.clone(), self.cy.clone(), self.m, self.j2)?;
        check_same_domain(self.l, self.z0.length())?;
        let dt = self.turning_denominator()?;
        if dt <= 0.0 {
            return Err(invalid(
                "turning inertia",
                format!("denominator of the turning acceleration map must be positive, got {dt}"),
            ));
        }
        let dr = self.raising_denominator();
        if dr <= 0.0 {
            return Err(invalid(
                "raising inertia",
                format!("I2 + m0 d^2 must be positive, got {dr}"),
            ));
        }
        Ok(())
    }

    /// Braced coefficient multiplying the turning acceleration `u_T`.
    pub fn turning_denominator(&self) -> Result<f64> {
        let (s, c) = self.phi_r0.sin_cos();
        let z0_l = self.z0.eval(self.l);
        let dz0_l = self.z0.derivative(self.l, 1);
        // ∫ (x cos φ - R) z0 ρ dx
        let moment = c * integrate_profile(&self.z0, Some(&self.rho), 1)?
            - self.r * integrate_profile(&self.z0, Some(&self.rho), 0)?;
        Ok(self.i0
            + (self.i1 + self.j1) * s * s
            + self.m0 * (self.r - self.d * c).powi(2)
            + (self.i3 * c + self.j3 * dz0_l * s) * c
            + (self.m * (self.l * c - self.r) * z0_l + moment) * s)
    }

    /// `I2 + m0 d^2`, the coefficient of the raising acceleration `u_R`.
    pub fn raising_denominator(&self) -> f64 {
        self.i2 + self.m0 * self.d * self.d
    }
}

/// Turning channel: `psi = x cos φ_R0 - z0(x) sin φ_R0 - R`, `gamma = 0`,
/// `c = c_z`, `J = J3`.
pub fn make_t_channel(p: &TorqueMapParams) -> Result<ChannelSpec> {
    p.validate()?;
    if !p.z0.is_c2() {
        return Err(Error::InvalidProfile(
            "equilibrium deflection z0 must be C2 for the turning channel".into(),
        ));
    }
    let (s, c) = p.phi_r0.sin_cos();
    let x = Profile::linear(p.l, 0.0, 1.0);
    let psi = Profile::affine(&[(c, &x), (-s, &p.z0)], -p.r)?;
    let physical = BeamPhysical::new(p.l, p.rho.clone(), p.cz.clone(), p.m, p.j3)?;
    ChannelSpec::new(physical, psi, 0.0, ChannelTag::Turning)
}

/// Raising channel: `psi = -x`, `gamma = g sin φ_R0`, `c = c_y`, `J = J2`.
pub fn make_r_channel(p: &TorqueMapParams) -> Result<ChannelSpec> {
    p.validate()?;
    let psi = Profile::linear(p.l, 0.0, -1.0);
    let physical = BeamPhysical::new(p.l, p.rho.clone(), p.cy.clone(), p.m, p.j2)?;
    ChannelSpec::new(physical, psi, p.g * p.phi_r0.sin(), ChannelTag::Raising)
}
