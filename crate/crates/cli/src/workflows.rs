//! The four batch workflows. Each writes its reports atomically into the
//! output directory and returns an [`Outcome`] carrying the verdict.

use std::path::{Path, PathBuf};

use flexbeam::beam::{make_r_channel, make_t_channel, ChannelSpec, ChannelTag, TorqueMapParams};
use flexbeam::control::{
    certificate, suggest_gains, FeedbackLaw, FeedbackMode, Gains, StabilityCertificate, TorqueMap,
};
use flexbeam::fem::{assemble, DiscreteOperators, Mesh};
use flexbeam::linalg::smallest_generalized_eigenvalue;
use flexbeam::lyapunov::{
    build_v, deflection_bounds, dissipation_residual, friedrichs_check, norm_equivalence, LyapunovForm,
    VerificationReport,
};
use flexbeam::modal::UniformBeam;
use flexbeam::simulator::{
    build_closed_loop, default_time_step, simulate as integrate, ClosedLoopSystem, DiscreteState, Observers, Trajectory,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Channel, RunConfig};
use crate::output::{write_atomic, write_json};
use crate::CliError;

/// Meshes of the refinement study.
pub const REFINEMENT: [usize; 5] = [4, 8, 16, 32, 64];

/// Relative dissipation tolerance, scaled by `|V(x0)|`.
pub const DISSIPATION_TOL: f64 = 1e-10;
/// Relative slack on the stability bound `sqrt(M2 / M1)`.
pub const BOUND_TOL: f64 = 1e-8;
/// Largest admissible real part of a closed-loop eigenvalue.
pub const SPECTRUM_TOL: f64 = 1e-10;
/// `|ω(T)|` must fall below this fraction of `max |ω|`.
pub const LASALLE_RATIO: f64 = 1e-3;

/// Verdict of one workflow run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub pass: bool,
    pub files: Vec<PathBuf>,
    /// Non-fatal findings, printed to stderr by the binary.
    pub warnings: Vec<String>,
}

/// Everything derived from a configuration before any mesh is chosen.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: RunConfig,
    pub params: TorqueMapParams,
    pub channel: ChannelSpec,
    pub gains: Gains,
    pub certificate: StabilityCertificate,
}

/// Operators and derived objects on one mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub ops: DiscreteOperators,
    pub form: LyapunovForm,
    pub torque: TorqueMap,
    pub dt: f64,
}

fn config_error(context: &str) -> impl Fn(flexbeam::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{context}: {e}"))
}

impl Setup {
    /// Validates the configuration against every model invariant; profile
    /// files are resolved relative to `base`.
    pub fn new(config: &RunConfig, base: &Path) -> Result<Self, CliError> {
        config.check()?;
        let b = &config.beam;
        let l = b.length;
        let params = TorqueMapParams {
            i0: b.i0,
            i1: b.i1,
            i2: b.i2,
            i3: b.i3,
            j1: b.j1,
            j2: b.j2,
            j3: b.j3,
            m0: b.m0,
            d: b.d,
            r: b.radius,
            g: b.g,
            phi_r0: b.phi_r0,
            z0: b.z0.resolve("z0", l, base)?,
            cz: b.cz.resolve("cz", l, base)?,
            cy: b.cy.resolve("cy", l, base)?,
            rho: b.rho.resolve("rho", l, base)?,
            m: b.tip_mass,
            l,
        };
        params.validate().map_err(config_error("beam"))?;
        let channel = match b.channel {
            Channel::Turning => make_t_channel(&params),
            Channel::Raising => make_r_channel(&params),
        }
        .map_err(config_error("beam"))?;

        let gc = &config.gains;
        let mut gains = suggest_gains(&channel, gc.margin, gc.k).map_err(config_error("gains"))?;
        if let Some(alpha) = gc.alpha {
            gains.alpha = alpha;
        }
        if let Some(beta) = gc.beta {
            gains.beta = beta;
        }
        if let Some(kappa) = gc.kappa {
            gains.kappa = kappa;
        }
        gains.validate().map_err(config_error("gains"))?;
        let certificate = certificate(&channel, &gains);
        Ok(Self {
            config: config.clone(),
            params,
            channel,
            gains,
            certificate,
        })
    }

    /// Operators on a uniform mesh of `n` elements. The time step is the
    /// configured one, or the mesh default when none is given.
    pub fn discretize(&self, n: usize) -> Result<Discretization, CliError> {
        let mesh = Mesh::uniform(n, self.channel.length())?;
        let ops = assemble(&mesh, &self.channel, self.config.sim.load)?;
        let form = build_v(&ops, &self.channel, &self.gains);
        let torque = TorqueMap::new(&self.params, &mesh)?;
        let dt = match self.config.sim.dt {
            Some(dt) => dt,
            None => default_time_step(&ops)?,
        };
        Ok(Discretization { ops, form, torque, dt })
    }

    /// Hub at `(phi0, omega0)`, beam at rest in the static cantilever shape
    /// with tip deflection `tip0`.
    pub fn initial_state(&self, disc: &Discretization) -> Result<DiscreteState, CliError> {
        let s = &self.config.sim;
        let l = self.channel.length();
        let scale = s.tip0 / (2.0 * l.powi(3));
        let full = disc
            .ops
            .mesh
            .interpolate_with(|x| (scale * x * x * (3.0 * l - x), scale * 3.0 * x * (2.0 * l - x)));
        let mut x0 = DiscreteState::zeros(disc.ops.layout);
        x0.a = disc.ops.layout.restrict(&full)?;
        x0.phi = s.phi0;
        x0.omega = s.omega0;
        Ok(x0)
    }

    pub fn closed_loop(&self, disc: &Discretization, mode: FeedbackMode) -> ClosedLoopSystem {
        build_closed_loop(&disc.ops, &self.channel, &self.gains, mode)
    }

    fn observers<'a>(&self, disc: &'a Discretization) -> Observers<'a> {
        let torque = match self.channel.tag() {
            ChannelTag::Custom => None,
            tag => Some((tag, &disc.torque)),
        };
        Observers {
            form: &disc.form,
            gram: &disc.ops.gram,
            torque,
        }
    }

    fn stability_bound(&self) -> f64 {
        if self.certificate.feasible {
            (self.certificate.m2 / self.certificate.m1).sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// Writes `certificate.json`; passes iff the gains are feasible.
pub fn certify(setup: &Setup, out: &Path) -> Result<Outcome, CliError> {
    let file = write_json(out, "certificate.json", &setup.certificate)?;
    let mut warnings = Vec::new();
    if !setup.certificate.feasible {
        warnings.push(infeasibility_note(&setup.certificate, &setup.channel));
    }
    Ok(Outcome {
        pass: setup.certificate.feasible,
        files: vec![file],
        warnings,
    })
}

fn infeasibility_note(cert: &StabilityCertificate, ch: &ChannelSpec) -> String {
    let g = &cert.gains;
    format!(
        "infeasible gains: need kappa^2 > {:.6e} (have {:.6e}), alpha > {:.6e} (have {:.6e}, kappa^2 gamma^2 = {:.6e}), beta > {:.6e} (have {:.6e}); M1 = {:.6e}",
        cert.kappa_lower_sq,
        g.kappa * g.kappa,
        cert.alpha_lower,
        g.alpha,
        g.kappa * g.kappa * ch.gamma() * ch.gamma(),
        cert.beta_lower,
        g.beta,
        cert.m1
    )
}

/// Summary of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub channel: ChannelTag,
    pub feedback: FeedbackMode,
    pub elements: usize,
    pub dt: f64,
    pub steps: usize,
    pub feasible: bool,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    /// `sup_t ||ξ(t)|| / ||ξ(0)||`
    pub norm_ratio_sup: f64,
    /// `sqrt(M2 / M1)`; infinite for infeasible gains.
    pub stability_bound: f64,
    pub bound_holds: bool,
    /// `max |V(x_{n+1}) − V(x_n) + k Δt ω_mid²|`
    pub dissipation_max_residual: f64,
    /// The same, divided by `|V(x_0)|`.
    pub dissipation_max_relative: f64,
    pub final_abs_omega: f64,
    pub max_abs_omega: f64,
    /// `|ω(T)| / max_t |ω(t)|`
    pub omega_decay_ratio: f64,
    pub omega_decay_pass: bool,
    /// The torque column omits the equilibrium torque, which is not computed.
    pub torque_offset_included: bool,
}

/// Writes `trajectory.csv` and `summary.json`. Fails for infeasible gains
/// or a violated stability bound; a slow decay of `ω` is only a warning.
pub fn simulate(setup: &Setup, out: &Path) -> Result<Outcome, CliError> {
    let s = &setup.config.sim;
    let disc = setup.discretize(s.elements)?;
    let x0 = setup.initial_state(&disc)?;
    let mut sys = setup.closed_loop(&disc, s.feedback);
    let traj = integrate(&mut sys, &x0, disc.dt, s.t_final, &setup.observers(&disc))?;
    let summary = summarize(setup, &disc, &traj)?;

    let csv = write_atomic(out, "trajectory.csv", |w| traj.table.write_csv(w))?;
    let json = write_json(out, "summary.json", &summary)?;

    let mut warnings = Vec::new();
    if !setup.certificate.feasible {
        warnings.push(infeasibility_note(&setup.certificate, &setup.channel));
    }
    if !summary.bound_holds {
        warnings.push(format!(
            "stability bound violated: sup ||xi|| / ||xi0|| = {:.6e} > sqrt(M2/M1) = {:.6e}",
            summary.norm_ratio_sup, summary.stability_bound
        ));
    }
    if !summary.omega_decay_pass {
        warnings.push(format!(
            "hub rate has not settled: |omega(T)| / max |omega| = {:.3e} (threshold {LASALLE_RATIO:e}); n = {}, dt = {:e}, T = {}",
            summary.omega_decay_ratio, summary.elements, summary.dt, s.t_final
        ));
    }
    Ok(Outcome {
        pass: setup.certificate.feasible && summary.bound_holds,
        files: vec![csv, json],
        warnings,
    })
}

pub fn summarize(setup: &Setup, disc: &Discretization, traj: &Trajectory) -> Result<SimulationSummary, CliError> {
    let table = &traj.table;
    let norm0 = table.norm_x[0];
    let norm_ratio_sup = if norm0 > 0.0 {
        table.norm_x.iter().fold(0.0_f64, |m, &v| m.max(v)) / norm0
    } else {
        0.0
    };
    let stability_bound = setup.stability_bound();
    let residual = dissipation_residual(traj, &disc.form, &setup.gains)?;
    let max_residual = residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let v0 = table.v[0].abs();
    let max_abs_omega = table.omega.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
    let final_abs_omega = table.omega.last().map_or(0.0, |w| w.abs());
    let omega_decay_ratio = if max_abs_omega > 0.0 {
        final_abs_omega / max_abs_omega
    } else {
        0.0
    };
    Ok(SimulationSummary {
        channel: setup.channel.tag(),
        feedback: setup.config.sim.feedback,
        elements: disc.ops.mesh.n_elements(),
        dt: traj.dt,
        steps: traj.states.len() - 1,
        feasible: setup.certificate.feasible,
        m1: setup.certificate.m1,
        m2: setup.certificate.m2,
        norm_ratio_sup,
        stability_bound,
        bound_holds: setup.certificate.feasible && norm_ratio_sup <= stability_bound * (1.0 + BOUND_TOL),
        dissipation_max_residual: max_residual,
        dissipation_max_relative: if v0 > 0.0 { max_residual / v0 } else { max_residual },
        final_abs_omega,
        max_abs_omega,
        omega_decay_ratio,
        omega_decay_pass: omega_decay_ratio < LASALLE_RATIO,
        torque_offset_included: false,
    })
}

/// One line of the verification battery.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub pass: bool,
    /// Smallest relative slack `(rhs − lhs) / |rhs|` over all checks;
    /// negative when violated.
    pub worst_margin: f64,
    pub checks: usize,
    pub violations: usize,
}

impl PropertyResult {
    fn new(name: &str, margins: &[f64]) -> Self {
        let violations = margins.iter().filter(|m| m.is_nan() || **m < 0.0).count();
        Self {
            name: name.into(),
            pass: violations == 0,
            worst_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
            checks: margins.len(),
            violations,
        }
    }

    fn from_flags(name: &str, results: &[(bool, f64)]) -> Self {
        let violations = results.iter().filter(|(ok, _)| !ok).count();
        Self {
            name: name.into(),
            pass: violations == 0,
            worst_margin: results.iter().map(|(_, m)| *m).fold(f64::INFINITY, f64::min),
            checks: results.len(),
            violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    #[serde(flatten)]
    pub summary: VerificationReport,
    pub seed: u64,
    pub elements: usize,
    pub dt: f64,
    pub properties: Vec<PropertyResult>,
}

fn relative_slack(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs <= 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        (rhs - lhs) / rhs.abs()
    }
}

/// Uniform random vector in `[-1, 1]^len`.
pub fn random_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..=1.0))
}

/// Random simulation state of unit `X` norm.
pub fn random_unit_state(rng: &mut ChaCha8Rng, ops: &DiscreteOperators) -> DVector<f64> {
    let x = random_vector(rng, ops.sim_dim());
    let norm = ops.gram.norm_sq(&x).sqrt();
    x / norm
}

/// Runs the property battery and writes `verification.json`.
pub fn verify(setup: &Setup, out: &Path) -> Result<Outcome, CliError> {
    let report = verification_report(setup)?;
    let file = write_json(out, "verification.json", &report)?;
    let warnings = report
        .properties
        .iter()
        .filter(|p| !p.pass)
        .map(|p| {
            format!(
                "property {} failed: {} of {} checks, worst margin {:.3e}",
                p.name, p.violations, p.checks, p.worst_margin
            )
        })
        .collect();
    Ok(Outcome {
        pass: report.summary.pass,
        files: vec![file],
        warnings,
    })
}

pub fn verification_report(setup: &Setup) -> Result<VerifyReport, CliError> {
    let s = &setup.config.sim;
    let disc = setup.discretize(s.elements)?;
    let ops = &disc.ops;
    let cert = &setup.certificate;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut properties = Vec::new();

    // Exact dissipation and the stability bound along one random trajectory.
    let x0 = DiscreteState::from_vector(ops.layout, &random_unit_state(&mut rng, ops))?;
    let mut sys = setup.closed_loop(&disc, FeedbackMode::DiscreteConsistent);
    let t_final = s.verify_steps as f64 * disc.dt;
    let traj = integrate(&mut sys, &x0, disc.dt, t_final, &setup.observers(&disc))?;
    let residual = dissipation_residual(&traj, &disc.form, &setup.gains)?;
    let v0 = traj.table.v[0].abs();
    let max_residual = residual.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    properties.push(PropertyResult::new(
        "dissipation",
        &residual
            .iter()
            .map(|r| relative_slack(r.abs(), DISSIPATION_TOL * v0))
            .collect::<Vec<_>>(),
    ));

    let pencil = norm_equivalence(&disc.form, &ops.gram, cert)?;
    let pencil_margin = relative_slack(cert.m1, pencil.lambda_min + 1e-8 * cert.m2)
        .min(relative_slack(pencil.lambda_max, cert.m2 * (1.0 + 1e-8)));
    properties.push(PropertyResult::from_flags(
        "norm_equivalence",
        &[(pencil.pass, pencil_margin)],
    ));

    let mut friedrichs = Vec::with_capacity(s.samples);
    let mut cauchy_schwarz = Vec::with_capacity(2 * s.samples);
    let mut composite = Vec::with_capacity(s.samples);
    let rho = setup.channel.physical().rho();
    let tip_mass = setup.channel.physical().tip_mass();
    for _ in 0..s.samples {
        let a = ops.layout.expand(&random_vector(&mut rng, ops.layout.constrained()));
        let chain = friedrichs_check(&a, &ops.mesh)?;
        friedrichs.push((
            chain.holds(),
            relative_slack(chain.value, chain.slope).min(relative_slack(chain.slope, chain.curvature)),
        ));
        let bounds = deflection_bounds(&a, &ops.mesh, rho, tip_mass)?;
        cauchy_schwarz.push((bounds.weighted_integral.holds(), bounds.weighted_integral.margin()));
        cauchy_schwarz.push((bounds.tip_value.holds(), bounds.tip_value.margin()));
        composite.push((bounds.composite.holds(), bounds.composite.margin()));
    }
    let friedrichs_result = PropertyResult::from_flags("friedrichs", &friedrichs);
    let friedrichs_violations = friedrichs_result.violations;
    properties.push(friedrichs_result);
    properties.push(PropertyResult::from_flags("cauchy_schwarz", &cauchy_schwarz));
    properties.push(PropertyResult::from_flags("deflection_bound", &composite));

    let spectrum = if cert.feasible {
        sys.eigenvalues(&disc.form)?
            .iter()
            .map(|z| (z.re <= SPECTRUM_TOL, SPECTRUM_TOL - z.re))
            .collect()
    } else {
        vec![(false, f64::NEG_INFINITY)]
    };
    properties.push(PropertyResult::from_flags("spectrum", &spectrum));

    let bound = setup.stability_bound() * (1.0 + BOUND_TOL);
    let norm0 = traj.table.norm_x[0];
    properties.push(PropertyResult::new(
        "stability_bound",
        &traj
            .table
            .norm_x
            .iter()
            .map(|n| relative_slack(n / norm0, bound))
            .collect::<Vec<_>>(),
    ));

    let pass = properties.iter().all(|p| p.pass);
    Ok(VerifyReport {
        summary: VerificationReport {
            lambda_min: pencil.lambda_min,
            lambda_max: pencil.lambda_max,
            m1: cert.m1,
            m2: cert.m2,
            pass,
            dissipation_max_residual: max_residual,
            friedrichs_violations,
        },
        seed: s.seed,
        elements: s.elements,
        dt: disc.dt,
        properties,
    })
}

/// One row of the refinement table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Smallest eigenvalue of `(K, M_aug)`.
    pub lambda_fem: f64,
    /// Characteristic-equation value; NaN unless ρ and c are constant.
    pub lambda_exact: f64,
    /// `sqrt(lambda_fem / lambda_exact)`
    pub freq_ratio: f64,
    /// `|u_consistent − u_continuous|` on a smooth state.
    pub mode_gap: f64,
    /// Continuous-form dissipation residual, relative to `V(x0)`.
    pub continuous_residual: f64,
}

/// Observed order `log2(e_coarse / e_fine)`; NaN when undefined.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    if coarse > 0.0 && fine > 0.0 && coarse.is_finite() && fine.is_finite() {
        (coarse / fine).log2()
    } else {
        f64::NAN
    }
}

/// Smooth clamped shape `s x² (x − 2l)² cos(1 + x) / l⁴` in constrained dofs;
/// not in the FEM space for any mesh.
pub fn smooth_shape(mesh: &Mesh, scale: f64) -> Result<DVector<f64>, CliError> {
    let l = mesh.length();
    let s = scale / l.powi(4);
    let full = mesh.interpolate_with(|x| {
        let p = x * x * (x - 2.0 * l).powi(2);
        let dp = 2.0 * x * (x - 2.0 * l).powi(2) + 2.0 * x * x * (x - 2.0 * l);
        (
            s * p * (1.0 + x).cos(),
            s * (dp * (1.0 + x).cos() - p * (1.0 + x).sin()),
        )
    });
    Ok(mesh.layout().restrict(&full)?)
}

impl Setup {
    /// Smooth test state for the refinement study: smooth deflection and
    /// velocity, hub at `(phi0, omega0)` (or `(0.1, 0.05)` when both are 0).
    pub fn smooth_state(&self, ops: &DiscreteOperators) -> Result<DiscreteState, CliError> {
        let s = &self.config.sim;
        let (phi, omega) = if s.phi0 == 0.0 && s.omega0 == 0.0 {
            (0.1, 0.05)
        } else {
            (s.phi0, s.omega0)
        };
        let mut x = DiscreteState::zeros(ops.layout);
        x.a = smooth_shape(&ops.mesh, 0.05)?;
        x.b = smooth_shape(&ops.mesh, -0.02)?;
        x.phi = phi;
        x.omega = omega;
        Ok(x)
    }

    /// The uniform-beam oracle, when both profiles are constant.
    pub fn uniform_beam(&self) -> Option<UniformBeam> {
        let phys = self.channel.physical();
        let (rho, c) = (phys.rho(), phys.stiffness());
        (rho.degree() == 0 && c.degree() == 0).then(|| UniformBeam {
            length: phys.length(),
            rho: rho.eval(0.0),
            stiffness: c.eval(0.0),
            tip_mass: phys.tip_mass(),
            tip_inertia: phys.tip_inertia(),
        })
    }

    pub fn convergence_row(&self, n: usize) -> Result<ConvergenceRow, CliError> {
        let disc = self.discretize(n)?;
        let ops = &disc.ops;
        let lambda_fem = smallest_generalized_eigenvalue(&ops.k, &ops.m_aug)?;
        let lambda_exact = self.uniform_beam().map_or(f64::NAN, |b| b.first_eigenvalue());

        let x = self.smooth_state(ops)?;
        let consistent = FeedbackLaw::new(ops, &self.channel, &self.gains, FeedbackMode::DiscreteConsistent);
        let continuous = FeedbackLaw::new(ops, &self.channel, &self.gains, FeedbackMode::ContinuousForm);
        let mode_gap = (consistent.eval(&x) - continuous.eval(&x)).abs();

        let mut sys = self.closed_loop(&disc, FeedbackMode::ContinuousForm);
        let steps = self
            .config
            .sim
            .verify_steps
            .min((self.config.sim.t_final / disc.dt).ceil() as usize)
            .max(1);
        let traj = integrate(&mut sys, &x, disc.dt, steps as f64 * disc.dt, &self.observers(&disc))?;
        let residual = dissipation_residual(&traj, &disc.form, &self.gains)?;
        let v0 = traj.table.v[0].abs();
        let continuous_residual = residual.iter().fold(0.0_f64, |m, r| m.max(r.abs())) / v0;

        Ok(ConvergenceRow {
            n,
            lambda_fem,
            lambda_exact,
            freq_ratio: (lambda_fem / lambda_exact).sqrt(),
            mode_gap,
            continuous_residual,
        })
    }
}

/// Rows for every mesh of [`REFINEMENT`], computed in parallel, in order.
pub fn convergence_table(setup: &Setup) -> Result<Vec<ConvergenceRow>, CliError> {
    REFINEMENT.par_iter().map(|&n| setup.convergence_row(n)).collect()
}

/// First-eigenvalue study of a uniform beam over `meshes`:
/// `(n, lambda_fem, sqrt(lambda_fem / lambda_exact))`. Accepts `m = J = 0`.
pub fn frequency_study(beam: &UniformBeam, meshes: &[usize]) -> Result<Vec<(usize, f64, f64)>, CliError> {
    let exact = beam.first_eigenvalue();
    meshes
        .par_iter()
        .map(|&n| {
            let lambda = beam.fem_first_eigenvalue(&Mesh::uniform(n, beam.length)?)?;
            Ok((n, lambda, (lambda / exact).sqrt()))
        })
        .collect()
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.16e}")
    }
}

/// CSV of the refinement table with observed orders per column; the first
/// row's orders and undefined values are empty cells.
pub fn write_convergence_csv(rows: &[ConvergenceRow], w: &mut dyn std::io::Write) -> std::io::Result<()> {
    writeln!(
        w,
        "n,lambda_fem,lambda_exact,freq_ratio,freq_rel_error,mode_gap,continuous_residual,order_freq,order_gap,order_residual"
    )?;
    let freq_error = |r: &ConvergenceRow| (r.freq_ratio - 1.0).abs();
    for (i, r) in rows.iter().enumerate() {
        let orders = match i.checked_sub(1).map(|j| &rows[j]) {
            Some(p) => [
                observed_order(freq_error(p), freq_error(r)),
                observed_order(p.mode_gap, r.mode_gap),
                observed_order(p.continuous_residual, r.continuous_residual),
            ],
            None => [f64::NAN; 3],
        };
        let cells = [
            r.lambda_fem,
            r.lambda_exact,
            r.freq_ratio,
            r.freq_ratio - 1.0,
            r.mode_gap,
            r.continuous_residual,
            orders[0],
            orders[1],
            orders[2],
        ];
        let line = cells.iter().map(|&v| fmt(v)).collect::<Vec<_>>().join(",");
        writeln!(w, "{},{line}", r.n)?;
    }
    Ok(())
}

/// Writes `convergence.csv`; passes unless a row could not be computed.
pub fn converge(setup: &Setup, out: &Path) -> Result<Outcome, CliError> {
    let rows = convergence_table(setup)?;
    let file = write_atomic(out, "convergence.csv", |w| write_convergence_csv(&rows, w))?;
    Ok(Outcome {
        pass: true,
        files: vec![file],
        warnings: Vec::new(),
    })
}
