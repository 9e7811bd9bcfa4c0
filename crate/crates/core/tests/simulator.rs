mod common;

use approx::assert_relative_eq;
use flexbeam::beam::ChannelTag;
use flexbeam::control::{suggest_gains, FeedbackMode, Gains, TorqueMap};
use flexbeam::fem::{assemble, LoadMode, Mesh};
use flexbeam::lyapunov::build_v;
use flexbeam::simulator::*;
use flexbeam::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::*;

fn system(n: usize, mode: FeedbackMode) -> (flexbeam::fem::DiscreteOperators, Gains, ClosedLoopSystem) {
    let ch = raising(0.6);
    let mesh = Mesh::uniform(n, 1.0).unwrap();
    let ops = assemble(&mesh, &ch, LoadMode::Consistent).unwrap();
    let g = suggest_gains(&ch, 2.0, 1.0).unwrap();
    let sys = build_closed_loop(&ops, &ch, &g, mode);
    (ops, g, sys)
}

#[test]
fn state_vector_round_trip() {
    let layout = Mesh::uniform(3, 1.0).unwrap().layout();
    let mut rng = rng(1);
    let x = random_state(&mut rng, layout);
    let v = x.to_vector();
    assert_eq!(v.len(), 14);
    assert_eq!(DiscreteState::from_vector(layout, &v).unwrap(), x);
    let e = x.to_extended();
    assert_eq!(e.len(), 16);
    assert_eq!(e[14], x.b[4]);
    assert_eq!(e[15], x.b[5]);
    assert_eq!(x.tip_displacement(), x.a[4]);
    assert!(DiscreteState::from_vector(layout, &DVector::zeros(5)).is_err());
}

#[test]
fn hub_row_is_the_feedback() {
    let (ops, g, sys) = system(4, FeedbackMode::DiscreteConsistent);
    let nc = ops.layout.constrained();
    let mut x = DiscreteState::zeros(ops.layout);
    x.omega = 0.4;
    let xdot = sys.closed_loop_matrix() * x.to_vector();
    assert_relative_eq!(xdot[2 * nc + 1], -g.k * 0.4 / g.beta, epsilon = 1e-15);
    assert_relative_eq!(xdot[2 * nc], 0.4, epsilon = 1e-15);
}

#[test]
fn decoupled_hub_is_a_damped_double_integrator() {
    let ch = decoupled();
    let mesh = Mesh::uniform(3, 1.0).unwrap();
    let ops = assemble(&mesh, &ch, LoadMode::Consistent).unwrap();
    let g = Gains::new(1.0, 1.0, 1.0, 3.0).unwrap();
    let mut sys = build_closed_loop(&ops, &ch, &g, FeedbackMode::DiscreteConsistent);
    let nc = ops.layout.constrained();
    let a = sys.closed_loop_matrix();
    let hub = a.view((2 * nc, 2 * nc), (2, 2)).into_owned();
    assert_eq!(hub, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]));

    // Midpoint map of [[0, 1], [-1, -1]] by hand, h = dt / 2.
    let dt = 0.3;
    let h = dt / 2.0;
    let det = 1.0 + h + h * h;
    let mut x = DiscreteState::zeros(ops.layout);
    x.phi = 0.7;
    x.omega = -0.2;
    sys.prepare(dt).unwrap();
    let next = sys.step_midpoint(&x.to_vector(), dt).unwrap();
    let phi = ((1.0 + h - h * h) * 0.7 + 2.0 * h * -0.2) / det;
    let omega = (-2.0 * h * 0.7 + (1.0 - h - h * h) * -0.2) / det;
    assert_relative_eq!(next[2 * nc], phi, epsilon = 1e-15);
    assert_relative_eq!(next[2 * nc + 1], omega, epsilon = 1e-15);
    assert!(next.rows(0, 2 * nc).iter().all(|&v| v == 0.0));
}

#[test]
fn zero_state_stays_zero() {
    let (ops, g, mut sys) = system(4, FeedbackMode::DiscreteConsistent);
    let form = build_v(&ops, &raising(0.6), &g);
    sys.prepare(0.05).unwrap();
    let z = DVector::zeros(sys.dim());
    assert_eq!(sys.step_midpoint(&z, 0.05).unwrap(), z);
    let obs = Observers {
        form: &form,
        gram: &ops.gram,
        torque: None,
    };
    let traj = simulate(&mut sys, &DiscreteState::zeros(ops.layout), 0.05, 1.0, &obs).unwrap();
    assert_eq!(traj.states.len(), 21);
    let t = &traj.table;
    for col in [&t.v, &t.norm_x, &t.omega, &t.phi, &t.u, &t.tip_disp] {
        assert!(col.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn step_requires_matching_factorization() {
    let (_, _, mut sys) = system(3, FeedbackMode::DiscreteConsistent);
    let x = DVector::zeros(sys.dim());
    assert!(matches!(
        sys.step_midpoint(&x, 0.1),
        Err(Error::StaleFactorization { .. })
    ));
    sys.prepare(0.1).unwrap();
    assert_eq!(sys.prepared_dt(), Some(0.1));
    assert!(matches!(
        sys.step_midpoint(&x, 0.2),
        Err(Error::StaleFactorization { .. })
    ));
    assert!(sys.prepare(0.0).is_err());
    assert!(matches!(
        sys.step_midpoint(&DVector::zeros(2), 0.1),
        Err(Error::DimensionMismatch { .. })
    ));
}

#[test]
fn midpoint_is_time_reversible() {
    let (ops, _, mut sys) = system(6, FeedbackMode::DiscreteConsistent);
    let mut rng = rng(8);
    let x = random_state(&mut rng, ops.layout).to_vector();
    sys.prepare(-0.05).unwrap();
    let back = sys.step_midpoint(&x, -0.05).unwrap();
    sys.prepare(0.05).unwrap();
    let again = sys.step_midpoint(&back, 0.05).unwrap();
    assert!((&again - &x).norm() <= 1e-10 * x.norm());
}

#[test]
fn step_count_and_grid() {
    let (ops, g, mut sys) = system(3, FeedbackMode::DiscreteConsistent);
    let form = build_v(&ops, &raising(0.6), &g);
    let obs = Observers {
        form: &form,
        gram: &ops.gram,
        torque: None,
    };
    let mut x0 = DiscreteState::zeros(ops.layout);
    x0.phi = 0.1;
    let traj = simulate(&mut sys, &x0, 0.3, 1.0, &obs).unwrap();
    assert_eq!(traj.times.len(), 5);
    assert_relative_eq!(traj.times[4], 1.2, epsilon = 1e-15);
    let traj = simulate(&mut sys, &x0, 0.1, 1.0, &obs).unwrap();
    assert_eq!(traj.times.len(), 11);
    assert!(simulate(&mut sys, &x0, 2.0, 1.0, &obs).is_err());
    assert!(simulate(&mut sys, &x0, -0.1, 1.0, &obs).is_err());
}

#[test]
fn observables_recompute_from_states() {
    let ch = raising(0.6);
    let p = params(0.6, flexbeam::profile::Profile::constant(1.0, 0.0));
    let mesh = Mesh::uniform(5, 1.0).unwrap();
    let ops = assemble(&mesh, &ch, LoadMode::Consistent).unwrap();
    let g = suggest_gains(&ch, 2.0, 1.0).unwrap();
    let form = build_v(&ops, &ch, &g);
    let map = TorqueMap::new(&p, &mesh).unwrap();
    let mut sys = build_closed_loop(&ops, &ch, &g, FeedbackMode::DiscreteConsistent);
    let obs = Observers {
        form: &form,
        gram: &ops.gram,
        torque: Some((ChannelTag::Raising, &map)),
    };
    let mut rng = rng(2);
    let x0 = random_state(&mut rng, ops.layout);
    let traj = simulate(&mut sys, &x0, 0.02, 0.5, &obs).unwrap();
    let torque = traj.table.torque.as_ref().unwrap();
    for (i, tq) in torque.iter().enumerate() {
        let s = traj.state(i);
        assert_relative_eq!(
            traj.table.v[i],
            form.value(&traj.states[i]).unwrap(),
            max_relative = 1e-14
        );
        assert_relative_eq!(traj.table.u[i], sys.law.eval(&s), max_relative = 1e-12);
        assert_relative_eq!(
            *tq,
            map.torque_raising(traj.u_applied[i], &s).unwrap(),
            max_relative = 1e-14
        );
        assert_eq!(traj.table.tip_disp[i], s.tip_displacement());
    }
    let again = observables(&traj, &obs).unwrap();
    assert_eq!(again, traj.table);
}

#[test]
fn csv_layout() {
    let table = ObservableTable {
        t: vec![0.0, 0.5],
        v: vec![1.0, 0.25],
        norm_x: vec![2.0, 1.0],
        omega: vec![0.1, -0.1],
        phi: vec![0.0, 1.0 / 3.0],
        u: vec![0.0, 0.0],
        tip_disp: vec![0.0, 0.0],
        torque: Some(vec![1.0, 2.0]),
    };
    let mut buf = Vec::new();
    table.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<_> = text.split('\n').collect();
    assert_eq!(lines[0], "t,V,norm_X,omega,phi,u,tip_disp,torque");
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[3], "");
    assert!(!text.contains('\r'));
    let phi: f64 = lines[2].split(',').nth(4).unwrap().parse().unwrap();
    assert_eq!(phi, 1.0 / 3.0);
    assert!(lines[2].split(',').nth(4).unwrap().starts_with("3.3333333333333331e-1"));
}

#[test]
fn midpoint_converges_with_order_two() {
    let ch = raising(0.6);
    let (ops, g, mut sys) = system(4, FeedbackMode::DiscreteConsistent);
    let form = build_v(&ops, &ch, &g);
    let radius = sys
        .eigenvalues(&form)
        .unwrap()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let dt0 = 0.05 / radius;
    let t_final = 400.0 * dt0;
    let mut rng = rng(12);
    let x0 = random_state(&mut rng, ops.layout).to_vector();
    let mut run = |dt: f64| {
        let steps = (t_final / dt).round() as usize;
        sys.prepare(dt).unwrap();
        let mut x = x0.clone();
        for _ in 0..steps {
            x = sys.step_midpoint(&x, dt).unwrap();
        }
        x
    };
    let xs: Vec<_> = [dt0, dt0 / 2.0, dt0 / 4.0].iter().map(|&dt| run(dt)).collect();
    let order = ((&xs[0] - &xs[1]).norm() / (&xs[1] - &xs[2]).norm()).log2();
    assert!((order - 2.0).abs() < 0.1, "observed order {order}");
    // Richardson reference from the two finest runs.
    let reference = &xs[2] + (&xs[2] - &xs[1]) / 3.0;
    assert!((&xs[2] - &reference).norm() < (&xs[1] - &reference).norm() / 3.5);
}

#[test]
fn closed_loop_spectrum() {
    for ch in [turning(), raising(0.8), turning_cubic_z0()] {
        let mesh = Mesh::uniform(16, 1.0).unwrap();
        let ops = assemble(&mesh, &ch, LoadMode::Consistent).unwrap();
        let g = suggest_gains(&ch, 2.0, 1.0).unwrap();
        let form = build_v(&ops, &ch, &g);
        let damped = build_closed_loop(&ops, &ch, &g, FeedbackMode::DiscreteConsistent);
        let ev = damped.eigenvalues(&form).unwrap();
        assert_eq!(ev.len(), damped.dim());
        assert!(ev.iter().all(|z| z.re <= 1e-10));
        assert!(ev.iter().any(|z| z.re < -1e-3));

        let free = build_closed_loop(&ops, &ch, &g.without_damping(), FeedbackMode::DiscreteConsistent);
        let form0 = build_v(&ops, &ch, &g.without_damping());
        assert!(free.eigenvalues(&form0).unwrap().iter().all(|z| z.re.abs() <= 1e-10));
    }
}

#[test]
fn default_step_resolves_the_fastest_mode() {
    let (ops, _, _) = system(4, FeedbackMode::DiscreteConsistent);
    let dt = default_time_step(&ops).unwrap();
    let lambda = flexbeam::linalg::generalized_eigenvalues(&ops.k, &ops.m_aug).unwrap();
    let period = std::f64::consts::TAU / lambda.last().unwrap().sqrt();
    assert_relative_eq!(dt * 20.0, period, max_relative = 1e-14);
}

proptest! {
    #[test]
    fn step_is_linear(seed in any::<u64>(), dt in 1e-3f64..1.0) {
        let (ops, _, mut sys) = system(4, FeedbackMode::ContinuousForm);
        sys.prepare(dt).unwrap();
        let mut rng = rng(seed);
        let x1 = random_state(&mut rng, ops.layout).to_vector();
        let x2 = random_state(&mut rng, ops.layout).to_vector();
        let lhs = sys.step_midpoint(&(&x1 + &x2), dt).unwrap();
        let rhs = sys.step_midpoint(&x1, dt).unwrap() + sys.step_midpoint(&x2, dt).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
    }

    #[test]
    fn lyapunov_value_never_increases(seed in any::<u64>(), log_dt in -3.0f64..1.0) {
        let dt = 10f64.powf(log_dt);
        let ch = raising(0.6);
        let (ops, g, mut sys) = system(4, FeedbackMode::DiscreteConsistent);
        let form = build_v(&ops, &ch, &g);
        sys.prepare(dt).unwrap();
        let mut rng = rng(seed);
        let mut x = random_state(&mut rng, ops.layout).to_vector();
        let v0 = form.value(&x).unwrap();
        for _ in 0..20 {
            let next = sys.step_midpoint(&x, dt).unwrap();
            prop_assert!(form.value(&next).unwrap() <= form.value(&x).unwrap() + 1e-13 * v0);
            x = next;
        }
    }
}
