#![allow(dead_code)]

use flexbeam::beam::{make_r_channel, make_t_channel, BeamPhysical, ChannelSpec, ChannelTag, TorqueMapParams};
use flexbeam::fem::{DofLayout, Mesh};
use flexbeam::profile::Profile;
use flexbeam::simulator::DiscreteState;
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn params(phi_r0: f64, z0: Profile) -> TorqueMapParams {
    let l = z0.length();
    TorqueMapParams {
        i0: 2.0,
        i1: 0.3,
        i2: 0.4,
        i3: 0.2,
        j1: 0.05,
        j2: 0.05,
        j3: 0.05,
        m0: 1.5,
        d: 0.1,
        r: 0.5,
        g: 9.81,
        phi_r0,
        z0,
        cz: Profile::constant(l, 2.0),
        cy: Profile::constant(l, 3.0),
        rho: Profile::constant(l, 1.2),
        m: 0.5,
        l,
    }
}

pub fn turning() -> ChannelSpec {
    make_t_channel(&params(0.0, Profile::constant(1.0, 0.0))).unwrap()
}

pub fn raising(phi_r0: f64) -> ChannelSpec {
    make_r_channel(&params(phi_r0, Profile::constant(1.0, 0.0))).unwrap()
}

pub fn turning_cubic_z0() -> ChannelSpec {
    make_t_channel(&params(0.5, Profile::cubic(1.0, [0.0, 0.0, 0.0, 0.01]))).unwrap()
}

/// Graded density and stiffness, smooth non-polynomial-in-mesh influence shape.
pub fn graded() -> ChannelSpec {
    let phys = BeamPhysical::new(
        1.5,
        Profile::linear(1.5, 2.0, -0.8),
        Profile::linear(1.5, 3.0, -1.0),
        0.7,
        0.08,
    )
    .unwrap();
    let psi = Profile::cubic(1.5, [-0.2, 0.9, 0.0, -0.1]);
    ChannelSpec::new(phys, psi, 0.0, ChannelTag::Custom).unwrap()
}

/// The zero-influence channel: the hub decouples from the beam.
pub fn decoupled() -> ChannelSpec {
    let phys = BeamPhysical::new(1.0, Profile::constant(1.0, 1.0), Profile::constant(1.0, 1.0), 1.0, 1.0).unwrap();
    ChannelSpec::new(phys, Profile::constant(1.0, 0.0), 0.0, ChannelTag::Custom).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_state(rng: &mut ChaCha8Rng, layout: DofLayout) -> DiscreteState {
    let nc = layout.constrained();
    DiscreteState {
        a: random_vector(rng, nc),
        b: random_vector(rng, nc),
        phi: rng.random_range(-1.0..1.0),
        omega: rng.random_range(-1.0..1.0),
    }
}

/// Dofs of the smooth clamped shape `η(x) = s x²(x − 2l)² cos(1 + x)`.
pub fn smooth_clamped(mesh: &Mesh, scale: f64) -> DVector<f64> {
    let l = mesh.length();
    let full = mesh.interpolate_with(|x| {
        let (p, dp) = (
            x * x * (x - 2.0 * l).powi(2),
            2.0 * x * (x - 2.0 * l) * (2.0 * x - 2.0 * l),
        );
        let (c, s) = ((1.0 + x).cos(), (1.0 + x).sin());
        (scale * p * c, scale * (dp * c - p * s))
    });
    mesh.layout().restrict(&full).unwrap()
}
