//! Hermite-cubic finite elements for the clamped beam with tip mass and
//! rotary inertia.
//!
//! Degrees of freedom are `(value, slope)` per node, node `i` owning global
//! indices `2i` and `2i + 1`. The clamped end removes node 0, so the
//! constrained layout is the full layout shifted by two.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::beam::ChannelSpec;
use crate::error::{invalid, Error, Result};
use crate::profile::{check_same_domain, Profile};
use crate::quadrature::GaussLegendre;

/// Points per element segment; exact to degree 11, which covers
/// `rho * psi * N` and `rho * N * N` with cubic profiles.
const ELEMENT_POINTS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
}

impl Mesh {
    pub fn uniform(n_elements: usize, length: f64) -> Result<Self> {
        if n_elements == 0 {
            return Err(Error::InvalidMesh("need at least one element".into()));
        }
        let nodes = (0..=n_elements)
            .map(|i| length * i as f64 / n_elements as f64)
            .collect();
        Self::from_nodes(nodes)
    }

    /// Graded meshes from an explicit node list starting at 0.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidMesh("need at least two nodes".into()));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidMesh(format!("first node must be 0, got {}", nodes[0])));
        }
        if nodes.iter().any(|x| !x.is_finite()) || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidMesh(
                "nodes must be finite and strictly increasing".into(),
            ));
        }
        Ok(Self { nodes })
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn length(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn layout(&self) -> DofLayout {
        DofLayout {
            n_elements: self.n_elements(),
        }
    }

    /// Element containing `x` and the local coordinate in `[0, 1]`.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.n_elements();
        let e = match self.nodes[1..n].binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
        .min(n - 1);
        let (a, b) = self.element(e);
        (e, (x - a) / (b - a))
    }

    /// Hermite interpolant of `f` (full layout).
    pub fn interpolate(&self, f: &Profile) -> DVector<f64> {
        self.interpolate_with(|x| (f.eval(x), f.derivative(x, 1)))
    }

    /// Hermite interpolant from a closure returning `(f(x), f'(x))`.
    pub fn interpolate_with(&self, f: impl Fn(f64) -> (f64, f64)) -> DVector<f64> {
        let mut dofs = DVector::zeros(2 * self.nodes.len());
        for (i, &x) in self.nodes.iter().enumerate() {
            let (v, s) = f(x);
            dofs[2 * i] = v;
            dofs[2 * i + 1] = s;
        }
        dofs
    }

    /// `order`-th derivative of the FEM function with full-layout dofs.
    pub fn eval(&self, dofs: &DVector<f64>, x: f64, order: usize) -> f64 {
        let (e, xi) = self.locate(x);
        let (a, b) = self.element(e);
        let basis = hermite(xi, b - a);
        (0..4).map(|i| basis[order][i] * dofs[2 * e + i]).sum()
    }
}

/// Bookkeeping between the full and clamped dof layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofLayout {
    pub n_elements: usize,
}

impl DofLayout {
    pub fn full(&self) -> usize {
        2 * (self.n_elements + 1)
    }

    pub fn constrained(&self) -> usize {
        2 * self.n_elements
    }

    /// Tip value and slope in the constrained layout.
    pub fn tip_value(&self) -> usize {
        2 * self.n_elements - 2
    }

    pub fn tip_slope(&self) -> usize {
        2 * self.n_elements - 1
    }

    pub fn expand(&self, constrained: &DVector<f64>) -> DVector<f64> {
        let mut full = DVector::zeros(self.full());
        full.rows_mut(2, self.constrained()).copy_from(constrained);
        full
    }

    /// Drops the clamped dofs, which must vanish.
    pub fn restrict(&self, full: &DVector<f64>) -> Result<DVector<f64>> {
        if full.len() != self.full() {
            return Err(Error::DimensionMismatch {
                expected: self.full(),
                got: full.len(),
            });
        }
        let worst = full[0].abs().max(full[1].abs());
        if worst != 0.0 {
            return Err(Error::ClampedDofsNonzero(worst));
        }
        Ok(full.rows(2, self.constrained()).into_owned())
    }
}

/// Hermite basis on an element of length `h`: rows are derivative orders
/// 0..=3 with respect to `x`, columns the dofs `(v_a, θ_a, v_b, θ_b)`.
pub fn hermite(xi: f64, h: f64) -> [[f64; 4]; 4] {
    let x2 = xi * xi;
    let x3 = x2 * xi;
    [
        [
            1.0 - 3.0 * x2 + 2.0 * x3,
            h * (xi - 2.0 * x2 + x3),
            3.0 * x2 - 2.0 * x3,
            h * (x3 - x2),
        ],
        [
            (-6.0 * xi + 6.0 * x2) / h,
            1.0 - 4.0 * xi + 3.0 * x2,
            (6.0 * xi - 6.0 * x2) / h,
            3.0 * x2 - 2.0 * xi,
        ],
        [
            (-6.0 + 12.0 * xi) / (h * h),
            (-4.0 + 6.0 * xi) / h,
            (6.0 - 12.0 * xi) / (h * h),
            (-2.0 + 6.0 * xi) / h,
        ],
        [12.0 / (h * h * h), 6.0 / (h * h), -12.0 / (h * h * h), 6.0 / (h * h)],
    ]
}

/// Splits `[a, b]` at every interior breakpoint in `cuts` (sorted).
fn segments(a: f64, b: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    let tol = 1e-13 * (b - a);
    let mut points = vec![a];
    points.extend(cuts.iter().copied().filter(|&x| x > a + tol && x < b - tol));
    points.push(b);
    points.windows(2).map(|w| (w[0], w[1])).collect()
}

fn sorted_cuts(profiles: &[&Profile]) -> Vec<f64> {
    let mut cuts: Vec<f64> = profiles.iter().flat_map(|p| p.breakpoints().iter().copied()).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts
}

/// Adds the symmetric 4x4 `local` (upper triangle authoritative) at element `e`.
fn scatter_sym(global: &mut DMatrix<f64>, e: usize, local: &[[f64; 4]; 4]) {
    for i in 0..4 {
        for j in i..4 {
            global[(2 * e + i, 2 * e + j)] += local[i][j];
            if i != j {
                global[(2 * e + j, 2 * e + i)] += local[i][j];
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadMode {
    /// `L_psi = M_aug psi_h` with `psi_h` the Hermite interpolant of `psi`.
    Consistent,
    /// `L_psi = ∫ rho psi v + m psi(l) v(l) + J psi'(l) v'(l)` by quadrature.
    ExactQuadrature,
}

/// Gram matrices of the discrete `X` inner product.
///
/// `extended` acts on `(a, b, φ, ω, p, q)` with independent `p, q`;
/// `simulation` on `(a, b, φ, ω)` where `p, q` are the tip dofs of `b`.
#[derive(Debug, Clone)]
pub struct Gram {
    pub extended: DMatrix<f64>,
    pub simulation: DMatrix<f64>,
}

impl Gram {
    pub fn norm_sq(&self, x: &DVector<f64>) -> f64 {
        let g = if x.len() == self.simulation.nrows() {
            &self.simulation
        } else {
            &self.extended
        };
        x.dot(&(g * x))
    }
}

/// Block-diagonal Gram matrix: unit bending stiffness on `a`, unit mass on
/// `b`, identity on the four scalars.
pub fn gram_matrix(mesh: &Mesh) -> Gram {
    let (ku, mu) = unit_matrices(mesh);
    gram_from_unit(mesh.layout(), &ku, &mu)
}

fn gram_from_unit(layout: DofLayout, ku: &DMatrix<f64>, mu: &DMatrix<f64>) -> Gram {
    let nc = layout.constrained();
    let mut extended = DMatrix::zeros(2 * nc + 4, 2 * nc + 4);
    extended
        .view_mut((0, 0), (nc, nc))
        .copy_from(&ku.view((2, 2), (nc, nc)));
    extended
        .view_mut((nc, nc), (nc, nc))
        .copy_from(&mu.view((2, 2), (nc, nc)));
    for k in 0..4 {
        extended[(2 * nc + k, 2 * nc + k)] = 1.0;
    }
    let mut simulation = extended.view((0, 0), (2 * nc + 2, 2 * nc + 2)).into_owned();
    simulation[(nc + layout.tip_value(), nc + layout.tip_value())] += 1.0;
    simulation[(nc + layout.tip_slope(), nc + layout.tip_slope())] += 1.0;
    Gram { extended, simulation }
}

/// Full-layout `∫ N_i'' N_j''` and `∫ N_i N_j`.
fn unit_matrices(mesh: &Mesh) -> (DMatrix<f64>, DMatrix<f64>) {
    let nf = mesh.layout().full();
    let rule = GaussLegendre::new(ELEMENT_POINTS);
    let mut ku = DMatrix::zeros(nf, nf);
    let mut mu = DMatrix::zeros(nf, nf);
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        let mut ke = [[0.0; 4]; 4];
        let mut me = [[0.0; 4]; 4];
        for (x, w) in rule.mapped(a, b) {
            let n = hermite((x - a) / h, h);
            for i in 0..4 {
                for j in i..4 {
                    ke[i][j] += w * n[2][i] * n[2][j];
                    me[i][j] += w * n[0][i] * n[0][j];
                }
            }
        }
        scatter_sym(&mut ku, e, &ke);
        scatter_sym(&mut mu, e, &me);
    }
    (ku, mu)
}

/// Constrained stiffness and augmented mass for a beam with possibly
/// vanishing tip mass or inertia (modal analysis).
pub fn beam_matrices(
    mesh: &Mesh,
    rho: &Profile,
    c: &Profile,
    tip_mass: f64,
    tip_inertia: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let layout = mesh.layout();
    let (k_full, m_full) = element_loop(mesh, rho, c, &[])?;
    let nc = layout.constrained();
    let k = k_full.view((2, 2), (nc, nc)).into_owned();
    let mut m = m_full.view((2, 2), (nc, nc)).into_owned();
    m[(layout.tip_value(), layout.tip_value())] += tip_mass;
    m[(layout.tip_slope(), layout.tip_slope())] += tip_inertia;
    Ok((k, m))
}

/// Full-layout `∫ c N'' N''` and `∫ rho N N`, checking positivity at every
/// quadrature point.
fn element_loop(
    mesh: &Mesh,
    rho: &Profile,
    c: &Profile,
    extra_cuts: &[&Profile],
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    check_same_domain(mesh.length(), rho.length())?;
    check_same_domain(mesh.length(), c.length())?;
    let nf = mesh.layout().full();
    let rule = GaussLegendre::new(ELEMENT_POINTS);
    let mut all: Vec<&Profile> = vec![rho, c];
    all.extend_from_slice(extra_cuts);
    let cuts = sorted_cuts(&all);
    let mut k = DMatrix::zeros(nf, nf);
    let mut m = DMatrix::zeros(nf, nf);
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        let mut ke = [[0.0; 4]; 4];
        let mut me = [[0.0; 4]; 4];
        for (sa, sb) in segments(a, b, &cuts) {
            for (x, w) in rule.mapped(sa, sb) {
                let n = hermite((x - a) / h, h);
                let rx = rho.eval(x);
                let cx = c.eval(x);
                if rx.is_nan() || rx <= 0.0 {
                    return Err(invalid("rho", format!("non-positive value {rx} at x = {x}")));
                }
                if cx.is_nan() || cx <= 0.0 {
                    return Err(invalid("c", format!("non-positive value {cx} at x = {x}")));
                }
                for i in 0..4 {
                    for j in i..4 {
                        ke[i][j] += w * cx * n[2][i] * n[2][j];
                        me[i][j] += w * rx * n[0][i] * n[0][j];
                    }
                }
            }
        }
        scatter_sym(&mut k, e, &ke);
        scatter_sym(&mut m, e, &me);
    }
    Ok((k, m))
}

/// `∫ rho v + m v(l)` in the constrained layout.
pub fn rho_load(mesh: &Mesh, rho: &Profile, tip_mass: f64) -> Result<DVector<f64>> {
    check_same_domain(mesh.length(), rho.length())?;
    let layout = mesh.layout();
    let rule = GaussLegendre::new(ELEMENT_POINTS);
    let cuts = sorted_cuts(&[rho]);
    let mut load = DVector::zeros(layout.full());
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        for (sa, sb) in segments(a, b, &cuts) {
            for (x, w) in rule.mapped(sa, sb) {
                let n = hermite((x - a) / h, h);
                let rx = rho.eval(x);
                for i in 0..4 {
                    load[2 * e + i] += w * rx * n[0][i];
                }
            }
        }
    }
    load[layout.full() - 2] += tip_mass;
    Ok(load.rows(2, layout.constrained()).into_owned())
}

/// Linear maps `a ↦ η''(0), (cη'')'(0), η''(l), (cη'')'(l)` on the full
/// layout, read from the end elements' cubics.
#[derive(Debug, Clone)]
pub struct BoundaryRows {
    pub curvature_root: DVector<f64>,
    pub flux_root: DVector<f64>,
    pub curvature_tip: DVector<f64>,
    pub flux_tip: DVector<f64>,
}

impl BoundaryRows {
    pub fn new(mesh: &Mesh, c: &Profile) -> Self {
        let nf = mesh.layout().full();
        let n = mesh.n_elements();
        let mut rows = Self {
            curvature_root: DVector::zeros(nf),
            flux_root: DVector::zeros(nf),
            curvature_tip: DVector::zeros(nf),
            flux_tip: DVector::zeros(nf),
        };
        let l = mesh.length();
        for (e, xi, x, curv, flux) in [
            (0, 0.0, 0.0, &mut rows.curvature_root, &mut rows.flux_root),
            (n - 1, 1.0, l, &mut rows.curvature_tip, &mut rows.flux_tip),
        ] {
            let (a, b) = mesh.element(e);
            let basis = hermite(xi, b - a);
            let (cx, dcx) = (c.eval(x), c.derivative(x, 1));
            for i in 0..4 {
                curv[2 * e + i] = basis[2][i];
                flux[2 * e + i] = dcx * basis[2][i] + cx * basis[3][i];
            }
        }
        rows
    }
}

/// End values `η''(0), (cη'')'(0), η''(l), (cη'')'(l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryValues {
    pub curvature_root: f64,
    pub flux_root: f64,
    pub curvature_tip: f64,
    pub flux_tip: f64,
}

/// Boundary recovery from full-layout dofs via the end elements.
pub fn recover_boundary(a: &DVector<f64>, mesh: &Mesh, ch: &ChannelSpec) -> Result<BoundaryValues> {
    let nf = mesh.layout().full();
    if a.len() != nf {
        return Err(Error::DimensionMismatch {
            expected: nf,
            got: a.len(),
        });
    }
    let rows = BoundaryRows::new(mesh, ch.physical().stiffness());
    Ok(BoundaryValues {
        curvature_root: rows.curvature_root.dot(a),
        flux_root: rows.flux_root.dot(a),
        curvature_tip: rows.curvature_tip.dot(a),
        flux_tip: rows.flux_tip.dot(a),
    })
}

/// Everything the control, Lyapunov and simulation layers consume.
///
/// Unless noted, vectors and matrices use the constrained layout.
#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub mesh: Mesh,
    pub layout: DofLayout,
    pub load_mode: LoadMode,
    /// `∫ c v'' w''` over all dofs.
    pub k_full: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// `∫ rho v w`, no tip terms.
    pub m_dist: DMatrix<f64>,
    /// `m_dist` plus `m` at the tip value and `J` at the tip slope.
    pub m_aug: DMatrix<f64>,
    /// `∫ rho v + m v(l)`.
    pub l_rho: DVector<f64>,
    /// Control load vector.
    pub l_psi: DVector<f64>,
    /// Hermite interpolant of `psi` (full layout).
    pub psi_h: DVector<f64>,
    /// `M_aug^{-1} L_psi`: the clamped function whose coupling makes the
    /// discrete dissipation identity exact.
    pub psi_proj: DVector<f64>,
    /// `∫ c psi'' v''` with the exact `psi`.
    pub k_psi: DVector<f64>,
    /// Boundary recovery rows for this channel's stiffness.
    pub boundary: BoundaryRows,
    pub gram: Gram,
    m_aug_chol: Cholesky<f64, nalgebra::Dyn>,
}

impl DiscreteOperators {
    /// Solves `M_aug x = rhs`.
    pub fn solve_mass(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.m_aug_chol.solve(rhs)
    }

    /// `2 (n + 1)`: state dimension of `(a, b, φ, ω)`.
    pub fn sim_dim(&self) -> usize {
        2 * self.layout.constrained() + 2
    }

    /// `(a, b, φ, ω, p, q)` dimension.
    pub fn extended_dim(&self) -> usize {
        2 * self.layout.constrained() + 4
    }
}

/// Assembles the discrete operators of one channel on `mesh`.
pub fn assemble(mesh: &Mesh, ch: &ChannelSpec, load_mode: LoadMode) -> Result<DiscreteOperators> {
    check_same_domain(mesh.length(), ch.length())?;
    let layout = mesh.layout();
    let (nf, nc) = (layout.full(), layout.constrained());
    let phys = ch.physical();
    let (rho, c, psi) = (phys.rho(), phys.stiffness(), ch.psi());
    let (m, j) = (phys.tip_mass(), phys.tip_inertia());
    let l = mesh.length();

    let (k_full, mut m_full) = element_loop(mesh, rho, c, &[psi])?;

    let rule = GaussLegendre::new(ELEMENT_POINTS);
    let cuts = sorted_cuts(&[rho, c, psi]);
    let mut l_rho_full = DVector::zeros(nf);
    let mut l_psi_exact = DVector::zeros(nf);
    let mut k_psi_full = DVector::zeros(nf);
    for e in 0..mesh.n_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        for (sa, sb) in segments(a, b, &cuts) {
            for (x, w) in rule.mapped(sa, sb) {
                let n = hermite((x - a) / h, h);
                let rx = rho.eval(x);
                let psix = psi.eval(x);
                let cpsi2 = c.eval(x) * psi.derivative(x, 2);
                for i in 0..4 {
                    l_rho_full[2 * e + i] += w * rx * n[0][i];
                    l_psi_exact[2 * e + i] += w * rx * psix * n[0][i];
                    k_psi_full[2 * e + i] += w * cpsi2 * n[2][i];
                }
            }
        }
    }
    let (tv, ts) = (nf - 2, nf - 1);
    m_full[(tv, tv)] += m;
    m_full[(ts, ts)] += j;
    l_rho_full[tv] += m;
    l_psi_exact[tv] += m * psi.eval(l);
    l_psi_exact[ts] += j * psi.derivative(l, 1);

    let psi_h = mesh.interpolate(psi);
    let l_psi_full = match load_mode {
        LoadMode::Consistent => &m_full * &psi_h,
        LoadMode::ExactQuadrature => l_psi_exact,
    };

    let m_aug = m_full.view((2, 2), (nc, nc)).into_owned();
    let mut m_dist = m_aug.clone();
    m_dist[(layout.tip_value(), layout.tip_value())] -= m;
    m_dist[(layout.tip_slope(), layout.tip_slope())] -= j;
    let m_aug_chol = Cholesky::new(m_aug.clone()).ok_or(Error::NotPositiveDefinite("augmented mass matrix"))?;
    let l_psi = l_psi_full.rows(2, nc).into_owned();
    let psi_proj = m_aug_chol.solve(&l_psi);

    let gram = gram_matrix(mesh);
    Ok(DiscreteOperators {
        mesh: mesh.clone(),
        layout,
        load_mode,
        k: k_full.view((2, 2), (nc, nc)).into_owned(),
        k_full,
        m_dist,
        m_aug,
        l_rho: l_rho_full.rows(2, nc).into_owned(),
        l_psi,
        psi_h,
        psi_proj,
        k_psi: k_psi_full.rows(2, nc).into_owned(),
        boundary: BoundaryRows::new(mesh, c),
        gram,
        m_aug_chol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{BeamPhysical, ChannelTag};
    use approx::assert_relative_eq;

    fn channel(l: f64, rho: Profile, c: Profile, m: f64, j: f64, psi: Profile, gamma: f64) -> ChannelSpec {
        let phys = BeamPhysical::new(l, rho, c, m, j).unwrap();
        ChannelSpec::new(phys, psi, gamma, ChannelTag::Custom).unwrap()
    }

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    #[test]
    fn single_element_stiffness_is_classical() {
        let (h, c) = (0.7, 3.0);
        let mesh = Mesh::uniform(1, h).unwrap();
        let (k, _) = element_loop(&mesh, &Profile::constant(h, 1.0), &Profile::constant(h, c), &[]).unwrap();
        let s = 2.0 * c / h.powi(3);
        let expected = [
            [6.0, 3.0 * h, -6.0, 3.0 * h],
            [3.0 * h, 2.0 * h * h, -3.0 * h, h * h],
            [-6.0, -3.0 * h, 6.0, -3.0 * h],
            [3.0 * h, h * h, -3.0 * h, 2.0 * h * h],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_relative_eq!(k[(i, j)], s * expected[i][j], epsilon = 1e-12 * s);
            }
        }
    }

    #[test]
    fn tip_only_mass() {
        let l = 1.0;
        let mesh = Mesh::uniform(3, l).unwrap();
        let (_, m) = beam_matrices(&mesh, &Profile::constant(l, 1.0), &Profile::constant(l, 1.0), 2.0, 0.3).unwrap();
        let (_, m0) = beam_matrices(&mesh, &Profile::constant(l, 1.0), &Profile::constant(l, 1.0), 0.0, 0.0).unwrap();
        let tip = m - m0;
        let layout = mesh.layout();
        let nonzeros: Vec<_> = tip.iter().filter(|v| v.abs() > 1e-15).collect();
        assert_eq!(nonzeros.len(), 2);
        assert_relative_eq!(tip[(layout.tip_value(), layout.tip_value())], 2.0, epsilon = 1e-14);
        assert_relative_eq!(tip[(layout.tip_slope(), layout.tip_slope())], 0.3, epsilon = 1e-14);
    }

    #[test]
    fn symmetric_and_definite() {
        let l = 1.5;
        let ch = channel(
            l,
            Profile::linear(l, 2.0, -0.5),
            Profile::cubic(l, [1.0, 0.1, 0.05, -0.01]),
            0.7,
            0.2,
            Profile::cubic(l, [-0.3, 1.0, 0.0, 0.02]),
            0.4,
        );
        let mesh = Mesh::uniform(7, l).unwrap();
        let ops = assemble(&mesh, &ch, LoadMode::Consistent).unwrap();
        for m in [
            &ops.k_full,
            &ops.k,
            &ops.m_dist,
            &ops.m_aug,
            &ops.gram.extended,
            &ops.gram.simulation,
        ] {
            assert_eq!(max_abs(&(m - m.transpose())), 0.0);
        }
        assert!(Cholesky::new(ops.k.clone()).is_some());
        assert!(Cholesky::new(ops.gram.extended.clone()).is_some());
        assert!(Cholesky::new(ops.gram.simulation.clone()).is_some());
        assert!(Cholesky::new(ops.m_dist.clone()).is_some());
    }

    #[test]
    fn load_modes_agree_for_linear_psi() {
        let l = 1.2;
        let ch = channel(
            l,
            Profile::linear(l, 1.0, 0.5),
            Profile::constant(l, 2.0),
            0.5,
            0.1,
            Profile::linear(l, 0.0, -1.0),
            1.0,
        );
        for n in [1, 4, 9] {
            let mesh = Mesh::uniform(n, l).unwrap();
            let a = assemble(&mesh, &ch, LoadMode::Consistent).unwrap();
            let b = assemble(&mesh, &ch, LoadMode::ExactQuadrature).unwrap();
            let diff = (&a.l_psi - &b.l_psi).amax();
            assert!(diff <= 1e-13, "n = {n}: {diff:e}");
        }
    }

    #[test]
    fn stiffness_energy_matches_curvature_integral() {
        // a^T K a = ∫ c (η'')^2 for the interpolant of a clamped cubic.
        let l = 2.0;
        let c = Profile::linear(l, 1.0, 0.25);
        let mesh = Mesh::uniform(5, l).unwrap();
        let (k_full, _) = element_loop(&mesh, &Profile::constant(l, 1.0), &c, &[]).unwrap();
        let eta = Profile::cubic(l, [0.0, 0.0, 0.3, -0.1]);
        let a = mesh.interpolate(&eta);
        let energy = a.dot(&(&k_full * &a));
        // η'' = 0.6 - 0.6 x, c = 1 + x/4: integrate the quintic exactly.
        let rule = GaussLegendre::new(4);
        let exact = rule.integrate(0.0, l, |x| c.eval(x) * (0.6 - 0.6 * x).powi(2));
        assert_relative_eq!(energy, exact, max_relative = 1e-12);
    }

    #[test]
    fn interpolation_examples() {
        let l = 1.0;
        let mesh = Mesh::uniform(4, l).unwrap();
        let d = mesh.interpolate(&Profile::linear(l, 0.0, 1.0));
        for (i, &x) in mesh.nodes().iter().enumerate() {
            assert_eq!(d[2 * i], x);
            assert_eq!(d[2 * i + 1], 1.0);
        }
        assert_eq!(mesh.interpolate(&Profile::constant(l, 0.0)).amax(), 0.0);
    }

    #[test]
    fn restrict_rejects_clamped_values() {
        let mesh = Mesh::uniform(2, 1.0).unwrap();
        let d = mesh.interpolate(&Profile::linear(1.0, 0.0, 1.0));
        assert!(matches!(mesh.layout().restrict(&d), Err(Error::ClampedDofsNonzero(_))));
    }

    #[test]
    fn boundary_recovery_exact_for_low_degree() {
        let l = 1.0;
        let ch = channel(
            l,
            Profile::constant(l, 1.0),
            Profile::constant(l, 1.0),
            1.0,
            1.0,
            Profile::linear(l, 0.0, -1.0),
            0.0,
        );
        let mesh = Mesh::uniform(3, l).unwrap();
        let sq = mesh.interpolate(&Profile::cubic(l, [0.0, 0.0, 1.0, 0.0]));
        let bv = recover_boundary(&sq, &mesh, &ch).unwrap();
        assert_relative_eq!(bv.curvature_root, 2.0, epsilon = 1e-12);
        assert!(bv.flux_root.abs() < 1e-10);
        let cube = mesh.interpolate(&Profile::cubic(l, [0.0, 0.0, 0.0, 1.0]));
        let bv = recover_boundary(&cube, &mesh, &ch).unwrap();
        assert_relative_eq!(bv.flux_root, 6.0, epsilon = 1e-10);
        assert_relative_eq!(bv.curvature_tip, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn mesh_rejects_bad_nodes() {
        assert!(Mesh::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Mesh::from_nodes(vec![0.1, 1.0]).is_err());
        assert!(Mesh::uniform(0, 1.0).is_err());
    }

    #[test]
    fn gram_examples() {
        let mesh = Mesh::uniform(4, 1.0).unwrap();
        let gram = gram_matrix(&mesh);
        let nc = mesh.layout().constrained();
        let mut x = DVector::zeros(2 * nc + 2);
        x[2 * nc] = 3.0;
        assert_relative_eq!(gram.norm_sq(&x), 9.0, epsilon = 1e-14);
        let eta = mesh.interpolate(&Profile::cubic(1.0, [0.0, 0.0, 1.0, 0.0]));
        let mut x = DVector::zeros(2 * nc + 4);
        x.rows_mut(0, nc).copy_from(&eta.rows(2, nc));
        assert_relative_eq!(gram.norm_sq(&x), 4.0, epsilon = 1e-12);
    }
}
