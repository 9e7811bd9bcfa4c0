//! Closed-loop time integration with the implicit midpoint rule.

use std::io::{self, Write};

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn, LU};

use crate::beam::{ChannelSpec, ChannelTag};
use crate::control::{FeedbackLaw, FeedbackMode, Gains, TorqueMap};
use crate::error::{invalid, Error, Result};
use crate::fem::{DiscreteOperators, DofLayout, Gram};
use crate::linalg::generalized_eigenvalues;
use crate::lyapunov::LyapunovForm;

/// Beam deflection dofs `a`, beam velocity dofs `b` (whose tip entries are
/// `p` and `q`), rotation angle `φ` and rate `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub phi: f64,
    pub omega: f64,
}

impl DiscreteState {
    pub fn zeros(layout: DofLayout) -> Self {
        let nc = layout.constrained();
        Self {
            a: DVector::zeros(nc),
            b: DVector::zeros(nc),
            phi: 0.0,
            omega: 0.0,
        }
    }

    pub fn from_vector(layout: DofLayout, x: &DVector<f64>) -> Result<Self> {
        let nc = layout.constrained();
        if x.len() != 2 * nc + 2 {
            return Err(Error::DimensionMismatch {
                expected: 2 * nc + 2,
                got: x.len(),
            });
        }
        Ok(Self {
            a: x.rows(0, nc).into_owned(),
            b: x.rows(nc, nc).into_owned(),
            phi: x[2 * nc],
            omega: x[2 * nc + 1],
        })
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let nc = self.a.len();
        let mut x = DVector::zeros(2 * nc + 2);
        x.rows_mut(0, nc).copy_from(&self.a);
        x.rows_mut(nc, nc).copy_from(&self.b);
        x[2 * nc] = self.phi;
        x[2 * nc + 1] = self.omega;
        x
    }

    /// `(a, b, φ, ω, p, q)` with `p, q` read from the tip of `b`.
    pub fn to_extended(&self) -> DVector<f64> {
        let nc = self.a.len();
        let mut x = self.to_vector().resize_vertically(2 * nc + 4, 0.0);
        x[2 * nc + 2] = self.b[nc - 2];
        x[2 * nc + 3] = self.b[nc - 1];
        x
    }

    pub fn tip_displacement(&self) -> f64 {
        self.a[self.a.len() - 2]
    }
}

struct StepCache {
    dt: f64,
    lhs: LU<f64, Dyn, Dyn>,
    rhs: DMatrix<f64>,
}

/// `M_lhs ẋ = A_raw x` on `x = (a, b, φ, ω)` with the feedback folded in:
///
/// `ȧ = b`, `M_aug ḃ = −K a + γ φ L_rho + u L_psi`, `φ̇ = ω`, `ω̇ = u`.
pub struct ClosedLoopSystem {
    pub layout: DofLayout,
    pub mode: FeedbackMode,
    pub a_raw: DMatrix<f64>,
    pub m_lhs: DMatrix<f64>,
    /// Feedback applied in the loop.
    pub law: FeedbackLaw,
    /// The continuous-form feedback, recorded for comparison.
    pub literal: FeedbackLaw,
    cache: Option<StepCache>,
}

pub fn build_closed_loop(ops: &DiscreteOperators, ch: &ChannelSpec, g: &Gains, mode: FeedbackMode) -> ClosedLoopSystem {
    let law = FeedbackLaw::new(ops, ch, g, mode);
    let literal = FeedbackLaw::new(ops, ch, g, FeedbackMode::ContinuousForm);
    let nc = ops.layout.constrained();
    let dim = 2 * nc + 2;
    let (iphi, iomega) = (2 * nc, 2 * nc + 1);
    let gamma = ch.gamma();

    let mut a = DMatrix::zeros(dim, dim);
    for i in 0..nc {
        a[(i, nc + i)] = 1.0;
    }
    a.view_mut((nc, 0), (nc, nc))
        .copy_from(&(-&ops.k + &ops.l_psi * law.a.transpose()));
    for i in 0..nc {
        a[(nc + i, iphi)] = gamma * ops.l_rho[i] + ops.l_psi[i] * law.phi;
        a[(nc + i, iomega)] = ops.l_psi[i] * law.omega;
    }
    a[(iphi, iomega)] = 1.0;
    for i in 0..nc {
        a[(iomega, i)] = law.a[i];
    }
    a[(iomega, iphi)] = law.phi;
    a[(iomega, iomega)] = law.omega;

    let mut m = DMatrix::identity(dim, dim);
    m.view_mut((nc, nc), (nc, nc)).copy_from(&ops.m_aug);

    ClosedLoopSystem {
        layout: ops.layout,
        mode,
        a_raw: a,
        m_lhs: m,
        law,
        literal,
        cache: None,
    }
}

impl ClosedLoopSystem {
    pub fn dim(&self) -> usize {
        self.a_raw.nrows()
    }

    /// `M_lhs^{-1} A_raw`.
    pub fn closed_loop_matrix(&self) -> DMatrix<f64> {
        let nc = self.layout.constrained();
        let chol = Cholesky::new(self.m_lhs.view((nc, nc), (nc, nc)).into_owned())
            .expect("augmented mass matrix is positive definite");
        let mut out = self.a_raw.clone();
        let rows = chol.solve(&self.a_raw.rows(nc, nc).into_owned());
        out.rows_mut(nc, nc).copy_from(&rows);
        out
    }

    /// Eigenvalues of `M_lhs^{-1} A_raw`.
    ///
    /// The matrix is highly non-normal in the dof basis, so it is first
    /// brought to the `V`-orthonormal basis `Lᵀ A L^{-ᵀ}` (with `P = L Lᵀ`),
    /// where it is a skew-symmetric matrix plus a rank-one damping term and
    /// its eigenvalues are well conditioned. Needs `P` positive definite.
    pub fn eigenvalues(&self, form: &LyapunovForm) -> Result<Vec<Complex<f64>>> {
        if form.simulation.nrows() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: form.simulation.nrows(),
            });
        }
        let chol = Cholesky::new(form.simulation.clone()).ok_or(Error::NotPositiveDefinite("Lyapunov form"))?;
        let lt = chol.l().transpose();
        // (Lᵀ A) L^{-ᵀ} = (L^{-1} (Lᵀ A)ᵀ)ᵀ
        let lta = &lt * self.closed_loop_matrix();
        let mut inner = lta.transpose();
        if !chol.l().solve_lower_triangular_mut(&mut inner) {
            return Err(Error::NotPositiveDefinite("Lyapunov form"));
        }
        Ok(inner.transpose().complex_eigenvalues().iter().copied().collect())
    }

    /// Factorizes `M_lhs − (dt/2) A_raw` for steps of size `dt` (which may be
    /// negative for backward maps).
    pub fn prepare(&mut self, dt: f64) -> Result<()> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(invalid("dt", format!("must be finite and nonzero, got {dt}")));
        }
        if self.cache.as_ref().is_some_and(|c| c.dt == dt) {
            return Ok(());
        }
        let half = 0.5 * dt;
        let lhs = LU::new(&self.m_lhs - &self.a_raw * half);
        let rhs = &self.m_lhs + &self.a_raw * half;
        self.cache = Some(StepCache { dt, lhs, rhs });
        Ok(())
    }

    pub fn prepared_dt(&self) -> Option<f64> {
        self.cache.as_ref().map(|c| c.dt)
    }

    /// One implicit-midpoint step on a flat state vector.
    pub fn step_midpoint(&self, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
        let cache = self.cache.as_ref().ok_or(Error::StaleFactorization {
            prepared: f64::NAN,
            requested: dt,
        })?;
        if cache.dt != dt {
            return Err(Error::StaleFactorization {
                prepared: cache.dt,
                requested: dt,
            });
        }
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(cache
            .lhs
            .solve(&(&cache.rhs * x))
            .expect("midpoint matrix is nonsingular"))
    }
}

/// Observers sampled along a trajectory.
pub struct Observers<'a> {
    pub form: &'a LyapunovForm,
    pub gram: &'a Gram,
    pub torque: Option<(ChannelTag, &'a TorqueMap)>,
}

/// Time series sampled at every step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableTable {
    pub t: Vec<f64>,
    pub v: Vec<f64>,
    pub norm_x: Vec<f64>,
    pub omega: Vec<f64>,
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub tip_disp: Vec<f64>,
    pub torque: Option<Vec<f64>>,
}

impl ObservableTable {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV with 17 significant digits and LF line endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "t,V,norm_X,omega,phi,u,tip_disp")?;
        if self.torque.is_some() {
            write!(w, ",torque")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            let row = [
                self.t[i],
                self.v[i],
                self.norm_x[i],
                self.omega[i],
                self.phi[i],
                self.u[i],
                self.tip_disp[i],
            ];
            let mut line = row.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
            if let Some(tq) = &self.torque {
                line.push_str(&format!(",{:.16e}", tq[i]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub layout: DofLayout,
    pub times: Vec<f64>,
    /// Flat `(a, b, φ, ω)` states, one per sample.
    pub states: Vec<DVector<f64>>,
    /// Control as applied by the loop's feedback mode.
    pub u_applied: Vec<f64>,
    /// Control from the continuous feedback formula on the same state.
    pub u_literal: Vec<f64>,
    pub table: ObservableTable,
}

impl Trajectory {
    pub fn state(&self, i: usize) -> DiscreteState {
        DiscreteState::from_vector(self.layout, &self.states[i]).expect("stored states have the layout size")
    }
}

/// Integrates `⌈T / dt⌉` midpoint steps from `x0`, sampling every step.
pub fn simulate(
    sys: &mut ClosedLoopSystem,
    x0: &DiscreteState,
    dt: f64,
    t_final: f64,
    observers: &Observers,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    if !(t_final > 0.0 && t_final.is_finite() && dt <= t_final) {
        return Err(invalid(
            "t_final",
            format!("must be positive and at least dt, got {t_final}"),
        ));
    }
    let steps = (t_final / dt - 1e-9).ceil() as usize;
    sys.prepare(dt)?;
    let mut x = x0.to_vector();
    if x.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: x.len(),
        });
    }
    let mut traj = Trajectory {
        dt,
        layout: sys.layout,
        times: Vec::with_capacity(steps + 1),
        states: Vec::with_capacity(steps + 1),
        u_applied: Vec::with_capacity(steps + 1),
        u_literal: Vec::with_capacity(steps + 1),
        table: ObservableTable::default(),
    };
    for n in 0..=steps {
        traj.times.push(n as f64 * dt);
        traj.u_applied.push(sys.law.eval_flat(&x));
        traj.u_literal.push(sys.literal.eval_flat(&x));
        let next = if n < steps {
            Some(sys.step_midpoint(&x, dt)?)
        } else {
            None
        };
        traj.states.push(x);
        match next {
            Some(v) => x = v,
            None => break,
        }
    }
    traj.table = observables(&traj, observers)?;
    Ok(traj)
}

/// Observable series from stored states and controls only.
pub fn observables(traj: &Trajectory, obs: &Observers) -> Result<ObservableTable> {
    let nc = traj.layout.constrained();
    let mut table = ObservableTable {
        t: traj.times.clone(),
        u: traj.u_applied.clone(),
        torque: obs.torque.map(|_| Vec::with_capacity(traj.states.len())),
        ..Default::default()
    };
    for (i, x) in traj.states.iter().enumerate() {
        table.v.push(obs.form.value(x)?);
        table.norm_x.push(obs.gram.norm_sq(x).sqrt());
        table.phi.push(x[2 * nc]);
        table.omega.push(x[2 * nc + 1]);
        table.tip_disp.push(x[nc - 2]);
        if let (Some((tag, map)), Some(col)) = (obs.torque, table.torque.as_mut()) {
            let state = traj.state(i);
            let u = traj.u_applied[i];
            col.push(match tag {
                ChannelTag::Turning => map.torque_turning(u, &state)?,
                ChannelTag::Raising => map.torque_raising(u, &state)?,
                ChannelTag::Custom => f64::NAN,
            });
        }
    }
    Ok(table)
}

/// One twentieth of the shortest discrete period `2π / sqrt(λ_max(K, M_aug))`.
pub fn default_time_step(ops: &DiscreteOperators) -> Result<f64> {
    let lambda_max = *generalized_eigenvalues(&ops.k, &ops.m_aug)?
        .last()
        .expect("non-empty pencil");
    Ok(std::f64::consts::TAU / lambda_max.sqrt() / 20.0)
}
