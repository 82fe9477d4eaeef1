//! Galerkin solvers for the two Dirichlet problems on meridian meshes.
//!
//! Both equations have the form `Δf - c f = g(f)`, whose weak residual is
//! `R_i(f) = ∫ ∇f·∇ψ_i + ∫ (c f + g(f)) ψ_i` over the free (non-Dirichlet) basis functions.
//! The Serrin problem `Δf + (n+1)K f = φ(f)` has `c = -(n+1)K` and `g = φ`; the warped torsion
//! problem has `c = ΔV/V` and `g ≡ 1`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{BoundarySurface, Topology};
use crate::error::{Error, Result};
use crate::jet::{ambient_from_chart, AmbientJet, FieldJet, SamplePoint};
use crate::mesh::{CellRef, MeridianMesh, NodeKind, QuadPoint};
use crate::profile::{interior_grid, WarpingProfile};
use crate::radial::torsion_inner_value;
use crate::recovery::{recover, NodalDerivatives};
use crate::source::SourceSpec;
use crate::sparse::{pcg, CgOptions, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear: LinearOptions,
    pub recovery_degree: usize,
    /// Largest admissible `max r` for hemisphere domains is `π/2 - hemisphere_margin`.
    pub hemisphere_margin: f64,
}

/// Serializable mirror of [`CgOptions`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl From<LinearOptions> for CgOptions {
    fn from(o: LinearOptions) -> Self {
        CgOptions { rel_tol: o.rel_tol, max_iter: o.max_iter }
    }
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-10,
            newton_max_iter: 50,
            linear: LinearOptions { rel_tol: 1e-12, max_iter: 50_000 },
            recovery_degree: 4,
            hemisphere_margin: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FieldKind {
    Serrin { curvature: f64, source: SourceSpec },
    Torsion { inner_value: Option<f64> },
    /// Nodal interpolant of a given function.
    Sampled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    /// Final nonlinear residual relative to the residual of the initial Dirichlet lift.
    pub residual: f64,
    /// Largest nodal value off the Dirichlet boundary (negative on a correct solve).
    pub interior_max: f64,
}

/// A P2 finite-element function on a meridian mesh with recovered derivatives.
#[derive(Clone, Debug)]
pub struct ScalarField {
    mesh: Arc<MeridianMesh>,
    pub values: Vec<f64>,
    recovered: Vec<NodalDerivatives>,
    pub kind: FieldKind,
    pub stats: SolveStats,
}

impl ScalarField {
    /// Interpolate a function of `(r, s)` at the mesh nodes and recover its derivatives.
    pub fn from_function(mesh: Arc<MeridianMesh>, f: impl Fn(f64, f64) -> f64, degree: usize) -> Result<Self> {
        let values: Vec<f64> = (0..mesh.num_nodes())
            .map(|v| {
                let (r, s) = mesh.polar(v);
                f(r, s)
            })
            .collect();
        Self::from_nodal(mesh, values, FieldKind::Sampled, SolveStats::default(), degree)
    }

    pub fn from_nodal(
        mesh: Arc<MeridianMesh>,
        values: Vec<f64>,
        kind: FieldKind,
        stats: SolveStats,
        degree: usize,
    ) -> Result<Self> {
        let recovered = recover(&mesh, &values, degree)?;
        Ok(Self { mesh, values, recovered, kind, stats })
    }

    pub fn mesh(&self) -> &MeridianMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<MeridianMesh> {
        Arc::clone(&self.mesh)
    }

    pub fn profile(&self) -> &WarpingProfile {
        self.mesh.profile()
    }

    /// Recovered chart derivatives at node `v`.
    pub fn nodal_derivatives(&self, v: usize) -> NodalDerivatives {
        self.recovered[v]
    }

    /// Ambient jet at a mesh node from the recovered derivatives.
    pub fn node_jet(&self, v: usize) -> AmbientJet {
        let d = &self.recovered[v];
        let c = [self.values[v], d[0], d[1], d[2], d[3], d[4], d[5]];
        ambient_from_chart(self.mesh.chart(), self.profile(), self.mesh.nodes[v], &c)
    }

    /// Ambient jet at a located point.
    pub fn cell_jet(&self, cell: CellRef) -> AmbientJet {
        let el = &self.mesh.elements[cell.elem];
        let (x, shape, _, _) = self.mesh.shape_at(cell.elem, cell.local);
        let mut c = [0.0; 7];
        for k in 0..6 {
            c[0] += shape[k] * self.values[el[k]];
            let d = &self.recovered[el[k]];
            for i in 0..6 {
                c[i + 1] += shape[k] * d[i];
            }
        }
        ambient_from_chart(self.mesh.chart(), self.profile(), x, &c)
    }

    /// Gradient of the finite-element function itself (chart components) at a located point.
    pub fn fe_gradient(&self, cell: CellRef) -> [f64; 2] {
        let el = &self.mesh.elements[cell.elem];
        let (_, _, grad, _) = self.mesh.shape_at(cell.elem, cell.local);
        let mut g = [0.0; 2];
        for k in 0..6 {
            g[0] += grad[k][0] * self.values[el[k]];
            g[1] += grad[k][1] * self.values[el[k]];
        }
        g
    }

    /// Ambient jet whose value and gradient are those of the finite-element function itself,
    /// so that `d/dt f(x(t)) = ∇f·x'` holds exactly along curves; second derivatives are the
    /// recovered ones.
    pub fn fe_jet(&self, cell: CellRef) -> AmbientJet {
        let g = self.fe_gradient(cell);
        let first = ambient_from_chart(
            self.mesh.chart(),
            self.profile(),
            self.mesh.shape_at(cell.elem, cell.local).0,
            &[self.fe_value(cell), g[0], g[1], 0.0, 0.0, 0.0, 0.0],
        );
        AmbientJet { f: first.f, grad_r: first.grad_r, grad_s: first.grad_s, ..self.cell_jet(cell) }
    }

    pub fn fe_value(&self, cell: CellRef) -> f64 {
        let el = &self.mesh.elements[cell.elem];
        let (_, shape, _, _) = self.mesh.shape_at(cell.elem, cell.local);
        (0..6).map(|k| shape[k] * self.values[el[k]]).sum()
    }

    /// Locate `(r, s)`, tolerating points slightly outside the curved boundary.
    pub fn locate(&self, r: f64, s: f64) -> Option<CellRef> {
        self.mesh.locate(self.mesh.chart().from_polar(r, s), 5e-2)
    }

    /// Nodal `(r, s, f, f_r, f_s)` rows.
    pub fn csv_rows(&self) -> Vec<[f64; 5]> {
        (0..self.mesh.num_nodes())
            .map(|v| {
                let j = self.node_jet(v);
                let theta = self.profile().jet(j.r).theta;
                [j.r, j.s, j.f, j.grad_r, j.f_s(theta)]
            })
            .collect()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl FieldJet for ScalarField {
    fn jet_at(&self, p: &SamplePoint) -> AmbientJet {
        let cell = p.cell.or_else(|| self.locate(p.r, p.s));
        match cell {
            Some(c) => {
                let mut j = self.cell_jet(c);
                j.r = p.r;
                j.s = p.s;
                j
            }
            None => {
                // outside the mesh by more than the tolerance: use the nearest node
                let x = self.mesh.chart().from_polar(p.r, p.s);
                let v = (0..self.mesh.num_nodes())
                    .min_by(|&a, &b| {
                        let da = (self.mesh.nodes[a][0] - x[0]).hypot(self.mesh.nodes[a][1] - x[1]);
                        let db = (self.mesh.nodes[b][0] - x[0]).hypot(self.mesh.nodes[b][1] - x[1]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                self.node_jet(v)
            }
        }
    }
}

/// Degrees of freedom: free index per node, `None` for Dirichlet nodes.
struct Dofs {
    free: Vec<Option<usize>>,
    count: usize,
}

impl Dofs {
    fn new(mesh: &MeridianMesh) -> Self {
        let mut count = 0;
        let free = mesh
            .kinds
            .iter()
            .map(|k| {
                if k.is_dirichlet() {
                    None
                } else {
                    count += 1;
                    Some(count - 1)
                }
            })
            .collect();
        Self { free, count }
    }
}

/// Assemble the residual and, optionally, the Jacobian. `reaction(q, f)` returns
/// `(c f + g(f), c + g'(f))` at a quadrature point.
fn assemble<F>(mesh: &MeridianMesh, dofs: &Dofs, f: &[f64], with_matrix: bool, reaction: &F) -> (Option<CsrMatrix>, Vec<f64>)
where
    F: Fn(&QuadPoint, f64) -> (f64, f64) + Sync,
{
    let locals: Vec<([f64; 6], [[f64; 6]; 6])> = (0..mesh.elements.len())
        .into_par_iter()
        .with_min_len(64)
        .map(|e| {
            let el = &mesh.elements[e];
            let mut res = [0.0; 6];
            let mut mat = [[0.0; 6]; 6];
            for q in mesh.element_quadrature(e).iter() {
                let fq: f64 = (0..6).map(|k| q.shape[k] * f[el[k]]).sum();
                let mut gq = [0.0; 2];
                for k in 0..6 {
                    gq[0] += q.grad[k][0] * f[el[k]];
                    gq[1] += q.grad[k][1] * f[el[k]];
                }
                let m = q.metric;
                let mg = [m[0][0] * gq[0] + m[0][1] * gq[1], m[1][0] * gq[0] + m[1][1] * gq[1]];
                let (s, ds) = reaction(q, fq);
                for i in 0..6 {
                    res[i] += q.weight * (q.grad[i][0] * mg[0] + q.grad[i][1] * mg[1] + s * q.shape[i]);
                    if with_matrix {
                        for j in 0..6 {
                            let mgj = [
                                m[0][0] * q.grad[j][0] + m[0][1] * q.grad[j][1],
                                m[1][0] * q.grad[j][0] + m[1][1] * q.grad[j][1],
                            ];
                            mat[i][j] += q.weight
                                * (q.grad[i][0] * mgj[0] + q.grad[i][1] * mgj[1] + ds * q.shape[i] * q.shape[j]);
                        }
                    }
                }
            }
            (res, mat)
        })
        .collect();
    let mut residual = vec![0.0; dofs.count];
    let mut triplets = Vec::with_capacity(if with_matrix { 36 * mesh.elements.len() } else { 0 });
    for (e, (res, mat)) in locals.iter().enumerate() {
        let el = &mesh.elements[e];
        for i in 0..6 {
            if let Some(fi) = dofs.free[el[i]] {
                residual[fi] += res[i];
                if with_matrix {
                    for j in 0..6 {
                        if let Some(fj) = dofs.free[el[j]] {
                            triplets.push((fi, fj, mat[i][j]));
                        }
                    }
                }
            }
        }
    }
    let matrix = with_matrix.then(|| CsrMatrix::from_triplets(dofs.count, triplets));
    (matrix, residual)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton iteration for `R(f) = 0` with Dirichlet data already in `f`.
fn newton<F>(mesh: &MeridianMesh, f: &mut [f64], reaction: &F, opts: &SolverOptions) -> Result<SolveStats>
where
    F: Fn(&QuadPoint, f64) -> (f64, f64) + Sync,
{
    let dofs = Dofs::new(mesh);
    // the reference residual is that of the Dirichlet lift, independent of the starting guess
    let lift: Vec<f64> = f.iter().zip(&dofs.free).map(|(v, d)| if d.is_some() { 0.0 } else { *v }).collect();
    let (_, r_lift) = assemble(mesh, &dofs, &lift, false, reaction);
    let reference = norm(&r_lift).max(f64::MIN_POSITIVE);
    let mut stats = SolveStats::default();
    let (_, mut residual) = assemble(mesh, &dofs, f, false, reaction);
    for it in 0..=opts.newton_max_iter {
        let rel = norm(&residual) / reference;
        stats.residual = rel;
        stats.newton_iterations = it;
        if rel <= opts.newton_tol {
            return Ok(stats);
        }
        if it == opts.newton_max_iter {
            break;
        }
        let (jac, res) = assemble(mesh, &dofs, f, true, reaction);
        let rhs: Vec<f64> = res.iter().map(|x| -x).collect();
        let out = pcg(jac.as_ref().unwrap(), &rhs, None, opts.linear.into())?;
        stats.linear_iterations += out.iterations;
        let base: Vec<f64> = f.to_vec();
        let current = norm(&res);
        let mut lambda = 1.0;
        loop {
            for (v, fv) in f.iter_mut().enumerate() {
                if let Some(i) = dofs.free[v] {
                    *fv = base[v] + lambda * out.x[i];
                }
            }
            let (_, trial) = assemble(mesh, &dofs, f, false, reaction);
            if norm(&trial) < current || lambda < 1.0 / 64.0 {
                residual = trial;
                break;
            }
            lambda *= 0.5;
        }
    }
    Err(Error::NewtonDivergence { iterations: opts.newton_max_iter, residual: stats.residual })
}

fn interior_max(mesh: &MeridianMesh, f: &[f64]) -> f64 {
    mesh.kinds
        .iter()
        .zip(f)
        .filter(|(k, _)| !k.is_dirichlet())
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solve `Δf + (n+1)K f = φ(f)` with `f = 0` on `M` in a spaceform ball-like domain.
pub fn solve_serrin(mesh: Arc<MeridianMesh>, source: &SourceSpec, opts: &SolverOptions) -> Result<ScalarField> {
    let domain = mesh.domain();
    let profile = domain.profile();
    let curvature = profile
        .spaceform_curvature()
        .ok_or_else(|| Error::InvalidDomain("the Serrin problem is posed in a spaceform".into()))?;
    if domain.topology() != Topology::NullHomologous {
        return Err(Error::InvalidDomain("the Serrin problem needs a null-homologous domain".into()));
    }
    if curvature > 0.0 && domain.max_u() > std::f64::consts::FRAC_PI_2 - opts.hemisphere_margin {
        return Err(Error::InvalidDomain(format!(
            "hemisphere domains must satisfy max r <= pi/2 - {}",
            opts.hemisphere_margin
        )));
    }
    source.validate(0.0)?;
    let n = profile.n() as f64;
    let c = -(n + 1.0) * curvature;
    let mut f = vec![0.0; mesh.num_nodes()];
    // initial guess: the linear problem with φ frozen at φ(0)
    let phi0 = source.phi(0.0);
    let linear = |_: &QuadPoint, v: f64| (c * v + phi0, c);
    newton(&mesh, &mut f, &linear, opts)?;
    let reaction = |_: &QuadPoint, v: f64| (c * v + source.phi(v), c + source.dphi(v));
    let mut stats = newton(&mesh, &mut f, &reaction, opts)?;
    let lo = f.iter().copied().fold(0.0, f64::min);
    source.validate(lo)?;
    stats.interior_max = interior_max(&mesh, &f);
    let kind = FieldKind::Serrin { curvature, source: source.clone() };
    ScalarField::from_nodal(mesh, f, kind, stats, opts.recovery_degree)
}

/// Solve `Δf - (ΔV/V) f = 1` with `f = 0` on `M` and `f = c₀` on the inner slice.
pub fn solve_warped_torsion(mesh: Arc<MeridianMesh>, opts: &SolverOptions) -> Result<ScalarField> {
    let domain = mesh.domain();
    let profile = domain.profile();
    let grid = interior_grid(domain.max_u(), 400);
    let report = profile.check_hypotheses(&grid, 0.5)?;
    let required: &[&str] = match domain.topology() {
        Topology::Homologous => &["H1", "H2", "H3", "H4", "H5"],
        Topology::NullHomologous => &["H2"],
    };
    for h in required {
        if !report.passed(h) {
            return Err(Error::Hypothesis(format!("{h} fails on the domain")));
        }
    }
    let inner_value = match domain.topology() {
        Topology::Homologous => Some(torsion_inner_value(profile)),
        Topology::NullHomologous => None,
    };
    let mut f: Vec<f64> = mesh
        .kinds
        .iter()
        .map(|k| if *k == NodeKind::InnerSlice { inner_value.unwrap_or(0.0) } else { 0.0 })
        .collect();
    let reaction = |q: &QuadPoint, v: f64| {
        let c = profile.laplace_v_over_v(q.r);
        (c * v + 1.0, c)
    };
    let mut stats = newton(&mesh, &mut f, &reaction, opts)?;
    stats.interior_max = interior_max(&mesh, &f);
    ScalarField::from_nodal(mesh, f, FieldKind::Torsion { inner_value }, stats, opts.recovery_degree)
}

/// `f_ν` at the nodes of an exactly sampled boundary surface.
pub fn neumann_trace(field: &ScalarField, surface: &BoundarySurface) -> Vec<f64> {
    surface
        .nodes
        .par_iter()
        .map(|p| {
            let j = field.jet_at(&SamplePoint::new(p.r, p.s));
            j.directional([p.nu_r, p.nu_s])
        })
        .collect()
}
