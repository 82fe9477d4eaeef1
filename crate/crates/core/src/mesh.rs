//! Quadratic isoparametric triangulations of the meridian section.
//!
//! Domains containing the inner slice are meshed in the polar chart `(r, s)`, which is regular
//! there because `ϑ(0) > 0`. Balls around the origin of a spaceform are meshed in the Cartesian
//! meridian chart `(x, y) = (r cos s, r sin s)`, `y ≥ 0`, so that the origin is an ordinary
//! interior point.
//!
//! In either chart the ambient Dirichlet form of axisymmetric functions reads
//! `∫ (∇f)ᵀ M (∇ψ) μ dx`, with `M` the inverse meridian metric and `μ` the density of the
//! warped volume (including the rotational factor `ϑⁿ⁻¹ sinⁿ⁻¹ s |Sⁿ⁻¹|`).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{MeridianDomain, Topology};
use crate::error::{Error, Result};
use crate::profile::{sphere_volume, WarpingProfile};
use crate::quadrature;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Chart {
    Polar,
    Cartesian,
}

impl Chart {
    pub fn for_topology(topology: Topology) -> Chart {
        match topology {
            Topology::Homologous => Chart::Polar,
            Topology::NullHomologous => Chart::Cartesian,
        }
    }

    /// Chart coordinates to `(r, s)`. The origin of the Cartesian chart maps to `(0, 0)`.
    pub fn to_polar(self, p: [f64; 2]) -> (f64, f64) {
        match self {
            Chart::Polar => (p[0], p[1]),
            Chart::Cartesian => {
                let r = p[0].hypot(p[1]);
                let s = if r == 0.0 { 0.0 } else { p[1].abs().atan2(p[0]) };
                (r, s)
            }
        }
    }

    pub fn from_polar(self, r: f64, s: f64) -> [f64; 2] {
        match self {
            Chart::Polar => [r, s],
            Chart::Cartesian => [r * s.cos(), r * s.sin()],
        }
    }

    /// Inverse meridian metric `M` at a chart point.
    pub fn inverse_metric(self, profile: &WarpingProfile, p: [f64; 2]) -> [[f64; 2]; 2] {
        match self {
            Chart::Polar => {
                let t = profile.jet(p[0]).theta;
                [[1.0, 0.0], [0.0, 1.0 / (t * t)]]
            }
            Chart::Cartesian => {
                let (r, s) = self.to_polar(p);
                let q = r_over_theta(profile, r);
                let (sn, cs) = s.sin_cos();
                let q2 = q * q;
                [
                    [cs * cs + q2 * sn * sn, cs * sn * (1.0 - q2)],
                    [cs * sn * (1.0 - q2), sn * sn + q2 * cs * cs],
                ]
            }
        }
    }

    /// Volume density `μ` with respect to the chart's Lebesgue measure.
    pub fn density(self, profile: &WarpingProfile, p: [f64; 2]) -> f64 {
        let n = profile.n();
        let c = sphere_volume(n - 1);
        match self {
            Chart::Polar => c * profile.jet(p[0]).theta.powi(n as i32) * p[1].sin().abs().powi(n as i32 - 1),
            Chart::Cartesian => {
                let r = p[0].hypot(p[1]);
                c * r_over_theta(profile, r).powi(-(n as i32)) * p[1].abs().powi(n as i32 - 1)
            }
        }
    }
}

/// `r / ϑ(r)`, continuous at the origin when `ϑ(0) = 0`.
pub fn r_over_theta(profile: &WarpingProfile, r: f64) -> f64 {
    let j = profile.jet(r);
    if r < 1e-8 && j.theta.abs() < 1e-7 {
        1.0 / profile.jet(0.0).d1
    } else {
        r / j.theta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeKind {
    Interior,
    /// On the symmetry axis `s ∈ {0, π}`; natural boundary condition.
    Axis,
    /// On `M = {r = u(s)}`.
    Boundary,
    /// On the inner slice `{r = 0}`.
    InnerSlice,
}

impl NodeKind {
    pub fn is_dirichlet(self) -> bool {
        matches!(self, NodeKind::Boundary | NodeKind::InnerSlice)
    }
}

/// Reference-element location of a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellRef {
    pub elem: usize,
    pub local: [f64; 2],
}

/// One quadrature point of an element with its shape data.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub x: [f64; 2],
    pub r: f64,
    pub s: f64,
    pub local: [f64; 2],
    /// Quadrature weight times `|det J|` times the volume density.
    pub weight: f64,
    pub shape: [f64; 6],
    /// Shape gradients with respect to chart coordinates.
    pub grad: [[f64; 2]; 6],
    pub metric: [[f64; 2]; 2],
}

/// A boundary edge on `M`: element, local edge index and its three nodes in order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub elem: usize,
    pub edge: usize,
    pub nodes: [usize; 3],
}

#[derive(Clone, Debug)]
pub struct MeridianMesh {
    domain: Arc<MeridianDomain>,
    chart: Chart,
    h: f64,
    pub nodes: Vec<[f64; 2]>,
    pub kinds: Vec<NodeKind>,
    /// Vertices 0..3 followed by the midpoints of edges (0,1), (1,2), (2,0).
    pub elements: Vec<[usize; 6]>,
    node_elements: Vec<Vec<usize>>,
    /// Polar: lattice dimensions. Cartesian: element ranges per ring band.
    layout: Layout,
}

#[derive(Clone, Debug)]
enum Layout {
    Polar { nr: usize, ns: usize },
    Rings { bands: Vec<std::ops::Range<usize>>, count: usize },
}

/// P2 shape functions and their reference gradients at `(ξ, η)`.
pub fn shape_functions(l: [f64; 2]) -> ([f64; 6], [[f64; 2]; 6]) {
    let (x, y) = (l[0], l[1]);
    let z = 1.0 - x - y;
    let n = [
        z * (2.0 * z - 1.0),
        x * (2.0 * x - 1.0),
        y * (2.0 * y - 1.0),
        4.0 * z * x,
        4.0 * x * y,
        4.0 * y * z,
    ];
    let g = [
        [1.0 - 4.0 * z, 1.0 - 4.0 * z],
        [4.0 * x - 1.0, 0.0],
        [0.0, 4.0 * y - 1.0],
        [4.0 * (z - x), -4.0 * x],
        [4.0 * y, 4.0 * x],
        [-4.0 * y, 4.0 * (z - y)],
    ];
    (n, g)
}

/// Local node pairs and midpoint of each edge.
pub const EDGES: [[usize; 3]; 3] = [[0, 3, 1], [1, 4, 2], [2, 5, 0]];

/// Build a mesh of characteristic size `h`.
pub fn mesh(domain: &MeridianDomain, h: f64) -> Result<MeridianMesh> {
    MeridianMesh::build(Arc::new(domain.clone()), h)
}

struct Builder {
    nodes: Vec<[f64; 2]>,
    kinds: Vec<NodeKind>,
    elements: Vec<[usize; 6]>,
    midpoints: HashMap<(usize, usize), usize>,
}

impl Builder {
    fn new() -> Self {
        Self { nodes: Vec::new(), kinds: Vec::new(), elements: Vec::new(), midpoints: HashMap::new() }
    }

    fn push(&mut self, p: [f64; 2], kind: NodeKind) -> usize {
        self.nodes.push(p);
        self.kinds.push(kind);
        self.nodes.len() - 1
    }

    fn triangle(&mut self, v: [usize; 3], midpoint: &mut impl FnMut(&mut Self, usize, usize) -> usize) {
        let m = [midpoint(self, v[0], v[1]), midpoint(self, v[1], v[2]), midpoint(self, v[2], v[0])];
        self.elements.push([v[0], v[1], v[2], m[0], m[1], m[2]]);
    }
}

impl MeridianMesh {
    pub fn build(domain: Arc<MeridianDomain>, h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Mesh(format!("mesh size must be positive, got {h}")));
        }
        if h >= domain.min_u() {
            return Err(Error::Mesh(format!(
                "mesh size {h} is not smaller than the domain thickness {}",
                domain.min_u()
            )));
        }
        let chart = Chart::for_topology(domain.topology());
        let (b, layout) = match chart {
            Chart::Polar => build_polar(&domain, h),
            Chart::Cartesian => build_rings(&domain, h),
        };
        let mut mesh = MeridianMesh {
            domain,
            chart,
            h,
            nodes: b.nodes,
            kinds: b.kinds,
            elements: b.elements,
            node_elements: Vec::new(),
            layout,
        };
        mesh.orient()?;
        let mut node_elements = vec![Vec::new(); mesh.nodes.len()];
        for (e, el) in mesh.elements.iter().enumerate() {
            for &v in el {
                node_elements[v].push(e);
            }
        }
        mesh.node_elements = node_elements;
        Ok(mesh)
    }

    fn orient(&mut self) -> Result<()> {
        for e in 0..self.elements.len() {
            let el = self.elements[e];
            let [a, b, c] = [self.nodes[el[0]], self.nodes[el[1]], self.nodes[el[2]]];
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if det == 0.0 {
                return Err(Error::Mesh(format!("degenerate element {e}")));
            }
            if det < 0.0 {
                self.elements[e] = [el[0], el[2], el[1], el[5], el[4], el[3]];
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &MeridianDomain {
        &self.domain
    }

    pub fn domain_arc(&self) -> Arc<MeridianDomain> {
        Arc::clone(&self.domain)
    }

    pub fn profile(&self) -> &WarpingProfile {
        self.domain.profile()
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements_of_node(&self, node: usize) -> &[usize] {
        &self.node_elements[node]
    }

    pub fn polar(&self, node: usize) -> (f64, f64) {
        self.chart.to_polar(self.nodes[node])
    }

    /// Isoparametric map and its Jacobian `∂x/∂(ξ,η)` for element `e`.
    pub fn map(&self, e: usize, l: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let (n, g) = shape_functions(l);
        let el = &self.elements[e];
        let mut x = [0.0; 2];
        let mut j = [[0.0; 2]; 2];
        for k in 0..6 {
            let p = self.nodes[el[k]];
            for a in 0..2 {
                x[a] += n[k] * p[a];
                for b in 0..2 {
                    j[a][b] += g[k][b] * p[a];
                }
            }
        }
        (x, j)
    }

    /// Shape values and chart gradients at a local point, with the Jacobian determinant.
    pub fn shape_at(&self, e: usize, l: [f64; 2]) -> ([f64; 2], [f64; 6], [[f64; 2]; 6], f64) {
        let (x, j) = self.map(e, l);
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
        let (n, g) = shape_functions(l);
        let mut grad = [[0.0; 2]; 6];
        for k in 0..6 {
            // ∇_x N = J⁻ᵀ ∇_ξ N
            grad[k] = [
                inv[0][0] * g[k][0] + inv[1][0] * g[k][1],
                inv[0][1] * g[k][0] + inv[1][1] * g[k][1],
            ];
        }
        (x, n, grad, det)
    }

    pub fn element_quadrature(&self, e: usize) -> [QuadPoint; 7] {
        let rule = quadrature::triangle_rule();
        let profile = self.profile();
        rule.map(|(l, w)| {
            let (x, shape, grad, det) = self.shape_at(e, l);
            let (r, s) = self.chart.to_polar(x);
            QuadPoint {
                x,
                r,
                s,
                local: l,
                weight: w * det.abs() * self.chart.density(profile, x),
                shape,
                grad,
                metric: self.chart.inverse_metric(profile, x),
            }
        })
    }

    /// Edges of the mesh lying on `M`, ordered by increasing angle.
    pub fn boundary_edges(&self) -> Vec<BoundaryEdge> {
        let mut out = Vec::new();
        for (e, el) in self.elements.iter().enumerate() {
            for (k, ed) in EDGES.iter().enumerate() {
                let nodes = [el[ed[0]], el[ed[1]], el[ed[2]]];
                if nodes.iter().all(|&v| self.kinds[v] == NodeKind::Boundary) {
                    let (sa, sb) = (self.polar(nodes[0]).1, self.polar(nodes[2]).1);
                    let nodes = if sa <= sb { nodes } else { [nodes[2], nodes[1], nodes[0]] };
                    out.push(BoundaryEdge { elem: e, edge: k, nodes });
                }
            }
        }
        out.sort_by(|a, b| self.polar(a.nodes[0]).1.partial_cmp(&self.polar(b.nodes[0]).1).unwrap());
        out
    }

    /// Locate a chart point, allowing a relative overshoot `slack` outside the element (used
    /// for points on the exact curve `M`, which the quadratic boundary only approximates).
    pub fn locate(&self, p: [f64; 2], slack: f64) -> Option<CellRef> {
        let (r, s) = self.chart.to_polar(p);
        let u = self.domain.u(s.clamp(0.0, PI));
        let rho = (r / u).clamp(0.0, 1.0);
        let candidates: Vec<usize> = match &self.layout {
            Layout::Polar { nr, ns } => {
                let i = ((rho * *nr as f64).floor() as usize).min(nr - 1);
                let j = ((s / PI * *ns as f64).floor() as usize).min(ns - 1);
                let mut c = Vec::new();
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if ii >= 0 && jj >= 0 && (ii as usize) < *nr && (jj as usize) < *ns {
                            let cell = ii as usize * ns + jj as usize;
                            c.push(2 * cell);
                            c.push(2 * cell + 1);
                        }
                    }
                }
                c
            }
            Layout::Rings { bands, count } => {
                let k = ((rho * *count as f64).floor() as usize).min(count - 1);
                let mut c = Vec::new();
                for band in k.saturating_sub(1)..(k + 2).min(*count) {
                    c.extend(bands[band].clone());
                }
                c
            }
        };
        let mut best: Option<(f64, CellRef)> = None;
        for e in candidates {
            if let Some(l) = self.inverse_map(e, p) {
                let excess = (-l[0]).max(-l[1]).max(l[0] + l[1] - 1.0).max(0.0);
                if excess <= 1e-10 {
                    return Some(CellRef { elem: e, local: l });
                }
                if excess <= slack && best.is_none_or(|(b, _)| excess < b) {
                    best = Some((excess, CellRef { elem: e, local: l }));
                }
            }
        }
        best.map(|(_, c)| c)
    }

    /// Newton inversion of the isoparametric map.
    pub fn inverse_map(&self, e: usize, p: [f64; 2]) -> Option<[f64; 2]> {
        let mut l = [1.0 / 3.0, 1.0 / 3.0];
        for _ in 0..30 {
            let (x, j) = self.map(e, l);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let d = [p[0] - x[0], p[1] - x[1]];
            let step = [(j[1][1] * d[0] - j[0][1] * d[1]) / det, (-j[1][0] * d[0] + j[0][0] * d[1]) / det];
            l = [l[0] + step[0], l[1] + step[1]];
            if l[0].abs() > 10.0 || l[1].abs() > 10.0 {
                return None;
            }
            if step[0].abs() + step[1].abs() < 1e-14 {
                return Some(l);
            }
        }
        Some(l)
    }

    /// `∫_Ω` of a nodal field interpolated by the P2 basis.
    pub fn integrate_nodal(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(Error::SizeMismatch { expected: self.nodes.len(), got: values.len() });
        }
        Ok(self.integrate(|e, q| {
            let el = &self.elements[e];
            (0..6).map(|k| q.shape[k] * values[el[k]]).sum()
        }))
    }

    /// `∫_Ω F` with `F` evaluated at every element quadrature point.
    pub fn integrate(&self, f: impl Fn(usize, &QuadPoint) -> f64) -> f64 {
        let mut total = 0.0;
        for e in 0..self.elements.len() {
            for q in self.element_quadrature(e).iter() {
                total += q.weight * f(e, q);
            }
        }
        total
    }

    /// Text dump: a `nodes` block of `x y kind` lines and an `elements` block of six indices.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# chart {:?}", self.chart);
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (p, k) in self.nodes.iter().zip(&self.kinds) {
            let _ = writeln!(out, "{:.17e} {:.17e} {:?}", p[0], p[1], k);
        }
        let _ = writeln!(out, "elements {}", self.elements.len());
        for el in &self.elements {
            let _ = writeln!(out, "{} {} {} {} {} {}", el[0], el[1], el[2], el[3], el[4], el[5]);
        }
        out
    }
}

/// Integrate a nodal field over the meshed domain.
pub fn integrate_volume(mesh: &MeridianMesh, values: &[f64]) -> Result<f64> {
    mesh.integrate_nodal(values)
}

fn build_polar(domain: &MeridianDomain, h: f64) -> (Builder, Layout) {
    let nr = (domain.max_u() / h).ceil() as usize;
    let ns = (PI / h).ceil().max(2.0) as usize;
    let (mr, ms) = (2 * nr + 1, 2 * ns + 1);
    let mut b = Builder::new();
    let mut index = vec![0usize; mr * ms];
    for i in 0..mr {
        for j in 0..ms {
            let s = PI * j as f64 / (ms - 1) as f64;
            let xi = i as f64 / (mr - 1) as f64;
            let kind = if i == 0 {
                NodeKind::InnerSlice
            } else if i == mr - 1 {
                NodeKind::Boundary
            } else if j == 0 || j == ms - 1 {
                NodeKind::Axis
            } else {
                NodeKind::Interior
            };
            let r = if i == mr - 1 { domain.u(s) } else { xi * domain.u(s) };
            index[i * ms + j] = b.push([r, s], kind);
        }
    }
    let at = |i: usize, j: usize| index[i * ms + j];
    for ci in 0..nr {
        for cj in 0..ns {
            let (i, j) = (2 * ci, 2 * cj);
            // two triangles per cell, lattice midpoints known directly
            b.elements.push([
                at(i, j),
                at(i + 2, j),
                at(i + 2, j + 2),
                at(i + 1, j),
                at(i + 2, j + 1),
                at(i + 1, j + 1),
            ]);
            b.elements.push([
                at(i, j),
                at(i + 2, j + 2),
                at(i, j + 2),
                at(i + 1, j + 1),
                at(i + 1, j + 2),
                at(i, j + 1),
            ]);
        }
    }
    (b, Layout::Polar { nr, ns })
}

fn build_rings(domain: &MeridianDomain, h: f64) -> (Builder, Layout) {
    let count = (domain.max_u() / h).ceil().max(2.0) as usize;
    let mut b = Builder::new();
    // reference half-disk coordinates (ρ̂, s) → chart point of (ρ̂ u(s), s)
    let place = |rho: f64, s: f64| -> [f64; 2] {
        let r = rho * domain.u(s);
        [r * s.cos(), r * s.sin()]
    };
    let kind_of = |rho_index: usize, s_index: usize, m: usize| {
        if rho_index == count {
            NodeKind::Boundary
        } else if rho_index == 0 || s_index == 0 || s_index == m {
            NodeKind::Axis
        } else {
            NodeKind::Interior
        }
    };
    let mut rings: Vec<Vec<(usize, f64)>> = Vec::with_capacity(count + 1);
    rings.push(vec![(b.push([0.0, 0.0], NodeKind::Axis), 0.0)]);
    for k in 1..=count {
        let m = (PI * k as f64).ceil() as usize;
        let rho = k as f64 / count as f64;
        let ring = (0..=m)
            .map(|j| {
                let s = PI * j as f64 / m as f64;
                (b.push(place(rho, s), kind_of(k, j, m)), s)
            })
            .collect();
        rings.push(ring);
    }
    // reference polar coordinates of every vertex, for midpoint placement
    let mut reference: HashMap<usize, (f64, f64)> = HashMap::new();
    for (k, ring) in rings.iter().enumerate() {
        for &(v, s) in ring {
            reference.insert(v, (k as f64 / count as f64, s));
        }
    }
    let mut midpoint = |b: &mut Builder, v: usize, w: usize| -> usize {
        let key = (v.min(w), v.max(w));
        if let Some(&m) = b.midpoints.get(&key) {
            return m;
        }
        let (ra, sa) = reference[&v];
        let (rb, sb) = reference[&w];
        let (kind, p) = if b.kinds[v] == NodeKind::Boundary && b.kinds[w] == NodeKind::Boundary {
            let s = 0.5 * (sa + sb);
            (NodeKind::Boundary, place(1.0, s))
        } else {
            let (xa, ya) = (ra * sa.cos(), ra * sa.sin());
            let (xb, yb) = (rb * sb.cos(), rb * sb.sin());
            let (x, y) = (0.5 * (xa + xb), 0.5 * (ya + yb));
            let rho = x.hypot(y);
            let s = if rho == 0.0 { 0.0 } else { y.atan2(x) };
            let on_axis = b.kinds[v] == NodeKind::Axis && b.kinds[w] == NodeKind::Axis && y.abs() < 1e-15;
            (if on_axis { NodeKind::Axis } else { NodeKind::Interior }, place(rho, s))
        };
        let m = b.push(if p[1].abs() < 1e-15 { [p[0], 0.0] } else { p }, kind);
        b.midpoints.insert(key, m);
        m
    };
    let mut bands = Vec::with_capacity(count);
    for k in 1..=count {
        let start = b.elements.len();
        let (inner, outer) = (&rings[k - 1], &rings[k]);
        let (mut i, mut j) = (0usize, 0usize);
        while i + 1 < inner.len() || j + 1 < outer.len() {
            let advance_outer = if j + 1 >= outer.len() {
                false
            } else if i + 1 >= inner.len() {
                true
            } else {
                outer[j + 1].1 <= inner[i + 1].1
            };
            if advance_outer {
                b.triangle([inner[i].0, outer[j].0, outer[j + 1].0], &mut midpoint);
                j += 1;
            } else {
                b.triangle([inner[i].0, outer[j].0, inner[i + 1].0], &mut midpoint);
                i += 1;
            }
        }
        bands.push(start..b.elements.len());
    }
    (b, Layout::Rings { bands, count })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, BoundarySpec};
    use crate::profile::{make_profile, ProfileKind, ProfileSpec};
    use approx::assert_relative_eq;

    fn schwarzschild_slab(r0: f64, coeffs: Vec<f64>) -> MeridianDomain {
        let p = Arc::new(make_profile(&ProfileSpec::schwarzschild(0, 0.5, 2)).unwrap());
        build_domain(p, BoundarySpec::CosineSeries { r0, coeffs }, Topology::Homologous).unwrap()
    }

    fn hyperbolic_ball(n: usize, radius: f64) -> MeridianDomain {
        let p = Arc::new(make_profile(&ProfileSpec::new(ProfileKind::SpaceformHyperbolic, n)).unwrap());
        build_domain(p, BoundarySpec::GeodesicBall { radius, center: 0.0 }, Topology::NullHomologous).unwrap()
    }

    #[test]
    fn shape_functions_partition_unity() {
        for l in [[0.1, 0.2], [0.5, 0.5], [0.0, 0.0], [0.3, 0.6]] {
            let (n, g) = shape_functions(l);
            assert_relative_eq!(n.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
            assert!(g.iter().map(|d| d[0]).sum::<f64>().abs() < 1e-14);
            assert!(g.iter().map(|d| d[1]).sum::<f64>().abs() < 1e-14);
        }
    }

    #[test]
    fn slab_weighted_area_matches_one_dimensional_quadrature() {
        let d = schwarzschild_slab(2.0, vec![]);
        let m = mesh(&d, 0.1).unwrap();
        let exact: f64 = 4.0
            * PI
            * quadrature::composite(0.0, 2.0, 16, 8)
                .iter()
                .map(|(r, w)| w * d.profile().jet(*r).theta.powi(2))
                .sum::<f64>();
        let area = integrate_volume(&m, &vec![1.0; m.num_nodes()]).unwrap();
        assert!((area - exact).abs() < 0.01 * exact);
        assert!((area - exact).abs() < 1e-8 * exact);
    }

    #[test]
    fn hyperbolic_disk_area_converges() {
        let d = hyperbolic_ball(1, 1.0);
        let exact = 2.0 * PI * (1f64.cosh() - 1.0);
        let err = |h: f64| {
            let m = mesh(&d, h).unwrap();
            (integrate_volume(&m, &vec![1.0; m.num_nodes()]).unwrap() - exact).abs()
        };
        let (a, b) = (err(0.2), err(0.1));
        assert!(a / b >= 3.0, "{a} {b}");
    }

    #[test]
    fn degenerate_mesh_size_is_rejected() {
        let d = schwarzschild_slab(2.0, vec![]);
        assert!(matches!(mesh(&d, 3.0), Err(Error::Mesh(_))));
        assert!(matches!(mesh(&d, -1.0), Err(Error::Mesh(_))));
    }

    #[test]
    fn boundary_nodes_lie_on_the_graph() {
        let d = hyperbolic_ball(2, 1.0);
        let dd = build_domain(
            d.profile_arc(),
            BoundarySpec::CosineSeries { r0: 1.0, coeffs: vec![0.1, 0.05] },
            Topology::NullHomologous,
        )
        .unwrap();
        let m = mesh(&dd, 0.1).unwrap();
        let mut count = 0;
        for (v, k) in m.kinds.iter().enumerate() {
            if *k == NodeKind::Boundary {
                let (r, s) = m.polar(v);
                assert!((r - dd.u(s)).abs() < 1e-13);
                count += 1;
            }
        }
        assert!(count > 20);
        let edges = m.boundary_edges();
        assert_eq!(edges.len() * 2 + 1, count);
        let covered: f64 = edges.iter().map(|e| m.polar(e.nodes[2]).1 - m.polar(e.nodes[0]).1).sum();
        assert_relative_eq!(covered, PI, max_relative = 1e-12);
    }

    #[test]
    fn elements_have_positive_jacobian_everywhere() {
        for m in [
            mesh(&schwarzschild_slab(1.5, vec![0.2, 0.1]), 0.15).unwrap(),
            mesh(&hyperbolic_ball(2, 1.0), 0.1).unwrap(),
        ] {
            for e in 0..m.elements.len() {
                for q in m.element_quadrature(e) {
                    let (_, _, _, det) = m.shape_at(e, q.local);
                    assert!(det > 0.0);
                    assert!(q.weight >= 0.0);
                }
            }
        }
    }

    #[test]
    fn locate_finds_points() {
        for m in [
            mesh(&schwarzschild_slab(1.5, vec![0.2]), 0.1).unwrap(),
            mesh(&hyperbolic_ball(2, 1.0), 0.1).unwrap(),
        ] {
            for &(r, s) in &[(0.3, 0.4), (0.95, 3.0), (0.05, 1.5), (0.7, 0.0)] {
                let p = m.chart().from_polar(r, s);
                let c = m.locate(p, 0.0).unwrap_or_else(|| panic!("point not found {r} {s} {:?}", m.chart()));
                let (x, _) = m.map(c.elem, c.local);
                assert!((x[0] - p[0]).abs() + (x[1] - p[1]).abs() < 1e-12);
            }
            // points on the exact curve need a little slack past the quadratic boundary
            let d = m.domain();
            for s in [0.0, 0.77, 2.0, PI] {
                let p = m.chart().from_polar(d.u(s), s);
                assert!(m.locate(p, 1e-3).is_some(), "boundary point at s={s}");
            }
        }
    }

    #[test]
    fn integrate_size_mismatch() {
        let m = mesh(&hyperbolic_ball(2, 1.0), 0.2).unwrap();
        assert!(integrate_volume(&m, &[1.0, 2.0]).is_err());
        assert_eq!(integrate_volume(&m, &vec![0.0; m.num_nodes()]).unwrap(), 0.0);
    }

    #[test]
    fn dump_has_expected_blocks() {
        let m = mesh(&hyperbolic_ball(2, 1.0), 0.3).unwrap();
        let text = m.dump();
        assert!(text.contains(&format!("nodes {}", m.num_nodes())));
        assert!(text.contains(&format!("elements {}", m.elements.len())));
    }
}
