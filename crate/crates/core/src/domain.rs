//! Rotation-invariant domains `Ω = {r < u(s)}` described by their meridian section, and the
//! extrinsic geometry of the boundary hypersurface `M = {r = u(s)}`.
//!
//! Here `s ∈ [0, π]` is the polar angle on `Sⁿ` measured from the symmetry axis. A domain is
//! either *null-homologous* (a spaceform ball around the origin, `ϑ(0) = 0`) or bounded by
//! `M` together with the inner slice `{r = 0}` (`ϑ(0) > 0`).

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profile::{sphere_volume, ProfileKind, WarpingProfile};
use crate::quadrature;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Topology {
    NullHomologous,
    Homologous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BoundarySpec {
    /// `u(s) = r0 + Σ_k coeffs[k-1] cos(k s)`.
    CosineSeries {
        r0: f64,
        #[serde(default)]
        coeffs: Vec<f64>,
    },
    /// Geodesic ball of the given radius, centred on the axis at signed distance `center`
    /// from the origin (towards `s = 0`). Spaceform profiles only.
    GeodesicBall {
        radius: f64,
        #[serde(default)]
        center: f64,
    },
}

/// `u`, `u'` and `u''` at one angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphPoint {
    pub u: f64,
    pub du: f64,
    pub ddu: f64,
}

#[derive(Clone, Debug)]
pub struct MeridianDomain {
    profile: Arc<WarpingProfile>,
    boundary: BoundarySpec,
    topology: Topology,
    rho: f64,
    beta2: Option<f64>,
    min_u: f64,
    max_u: f64,
}

const RANGE_SAMPLES: usize = 4096;

/// Validate a boundary description against the profile and estimate `ρ`.
pub fn build_domain(
    profile: Arc<WarpingProfile>,
    boundary: BoundarySpec,
    topology: Topology,
) -> Result<MeridianDomain> {
    let origin_collapses = profile.theta_at_origin() == 0.0;
    match (topology, origin_collapses) {
        (Topology::NullHomologous, false) => {
            return Err(Error::InvalidDomain(
                "null-homologous domains need a profile with theta(0) = 0".into(),
            ))
        }
        (Topology::Homologous, true) => {
            return Err(Error::InvalidDomain("homologous domains need a profile with theta(0) > 0".into()))
        }
        _ => {}
    }
    match &boundary {
        BoundarySpec::CosineSeries { r0, coeffs } => {
            if !r0.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidDomain("non-finite graph coefficients".into()));
            }
        }
        BoundarySpec::GeodesicBall { radius, center } => {
            if profile.spaceform_curvature().is_none() {
                return Err(Error::InvalidDomain("geodesic balls require a spaceform profile".into()));
            }
            if topology != Topology::NullHomologous {
                return Err(Error::InvalidDomain("geodesic balls are null-homologous".into()));
            }
            if !(*radius > 0.0) || !(center.abs() < *radius) {
                return Err(Error::InvalidDomain(format!(
                    "ball of radius {radius} centred at {center} does not contain the origin"
                )));
            }
        }
    }
    let mut domain = MeridianDomain {
        profile,
        boundary,
        topology,
        rho: 0.0,
        beta2: None,
        min_u: 0.0,
        max_u: 0.0,
    };
    let (lo, hi) = (0..=RANGE_SAMPLES)
        .map(|i| domain.u(PI * i as f64 / RANGE_SAMPLES as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| (lo.min(u), hi.max(u)));
    if !(lo > 0.0 && hi < domain.profile.r_bar()) {
        return Err(Error::InvalidDomain(format!(
            "graph range [{lo}, {hi}] exits (0, {})",
            domain.profile.r_bar()
        )));
    }
    domain.min_u = lo;
    domain.max_u = hi;
    domain.rho = interior_ball_radius(&domain);
    if !(domain.rho > 0.0) {
        return Err(Error::InvalidDomain("interior ball radius is not positive".into()));
    }
    Ok(domain)
}

impl MeridianDomain {
    pub fn profile(&self) -> &WarpingProfile {
        &self.profile
    }

    pub fn profile_arc(&self) -> Arc<WarpingProfile> {
        Arc::clone(&self.profile)
    }

    pub fn boundary(&self) -> &BoundarySpec {
        &self.boundary
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn n(&self) -> usize {
        self.profile.n()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn beta2(&self) -> Option<f64> {
        self.beta2
    }

    pub fn with_beta2(mut self, beta2: f64) -> Self {
        self.beta2 = Some(beta2);
        self
    }

    pub fn min_u(&self) -> f64 {
        self.min_u
    }

    pub fn max_u(&self) -> f64 {
        self.max_u
    }

    /// Distance of the graph from the nearest slice, `(max u - min u)/2`.
    pub fn slice_distance(&self) -> f64 {
        0.5 * (self.max_u - self.min_u)
    }

    pub fn u(&self, s: f64) -> f64 {
        self.graph(s).u
    }

    pub fn graph(&self, s: f64) -> GraphPoint {
        match &self.boundary {
            BoundarySpec::CosineSeries { r0, coeffs } => {
                let mut g = GraphPoint { u: *r0, du: 0.0, ddu: 0.0 };
                for (i, a) in coeffs.iter().enumerate() {
                    let k = (i + 1) as f64;
                    let (sn, cs) = (k * s).sin_cos();
                    g.u += a * cs;
                    g.du -= a * k * sn;
                    g.ddu -= a * k * k * cs;
                }
                g
            }
            BoundarySpec::GeodesicBall { radius, center } => {
                ball_graph(self.profile.kind(), *radius, *center, s)
            }
        }
    }

    /// Whether `(r, s)` lies in the closure of `Ω`.
    pub fn contains(&self, r: f64, s: f64) -> bool {
        r >= 0.0 && (0.0..=PI).contains(&s) && r <= self.u(s)
    }
}

/// Implicit equation `F(r, s) = 0` of a geodesic sphere and its second-order jet
/// `[F, F_r, F_s, F_rr, F_rs, F_ss]`.
fn ball_equation(kind: ProfileKind, radius: f64, c: f64, r: f64, s: f64) -> [f64; 6] {
    let (ss, cs) = s.sin_cos();
    match kind {
        ProfileKind::SpaceformSphere => {
            let (sr, cr) = r.sin_cos();
            let (sc, cc) = c.sin_cos();
            [
                radius.cos() - cr * cc - sr * sc * cs,
                sr * cc - cr * sc * cs,
                sr * sc * ss,
                cr * cc + sr * sc * cs,
                cr * sc * ss,
                sr * sc * cs,
            ]
        }
        ProfileKind::SpaceformHyperbolic => {
            let (sr, cr) = (r.sinh(), r.cosh());
            let (sc, cc) = (c.sinh(), c.cosh());
            [
                cr * cc - sr * sc * cs - radius.cosh(),
                sr * cc - cr * sc * cs,
                sr * sc * ss,
                cr * cc - sr * sc * cs,
                cr * sc * ss,
                sr * sc * cs,
            ]
        }
        _ => [
            r * r - 2.0 * r * c * cs + c * c - radius * radius,
            2.0 * r - 2.0 * c * cs,
            2.0 * r * c * ss,
            2.0,
            2.0 * c * ss,
            2.0 * r * c * cs,
        ],
    }
}

fn ball_graph(kind: ProfileKind, radius: f64, c: f64, s: f64) -> GraphPoint {
    let f = |r: f64| ball_equation(kind, radius, c, r, s)[0];
    // F < 0 inside the ball, F > 0 outside
    let (mut a, mut b) = (0.0, radius + c.abs());
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if f(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    let mut r = 0.5 * (a + b);
    for _ in 0..4 {
        let e = ball_equation(kind, radius, c, r, s);
        r -= e[0] / e[1];
    }
    let [_, fr, fs, frr, frs, fss] = ball_equation(kind, radius, c, r, s);
    let du = -fs / fr;
    let ddu = -(fss + 2.0 * frs * du + frr * du * du) / fr;
    GraphPoint { u: r, du, ddu }
}

/// Geometry of `M` at one boundary quadrature node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundaryNode {
    pub s: f64,
    pub r: f64,
    pub du: f64,
    pub ddu: f64,
    /// Arclength of the meridian curve from the axis point `s = 0`.
    pub arclength: f64,
    /// `L = sqrt(u'² + ϑ(u)²)`, the meridian speed `|dγ/ds|`.
    pub speed: f64,
    /// Quadrature weight of `∫_M` at this node.
    pub weight: f64,
    /// Orthonormal components of the outward normal in the `(∂_r, ϑ⁻¹∂_s)` frame.
    pub nu_r: f64,
    pub nu_s: f64,
    /// Orthonormal components of the unit meridian tangent (direction of increasing `s`).
    pub tau_r: f64,
    pub tau_s: f64,
    /// `⟨X, ν⟩` with `X = ϑ ∂_r`.
    pub support: f64,
    pub kappa_m: f64,
    pub kappa_p: f64,
    pub h1: f64,
    pub traceless_sq: f64,
}

impl BoundaryNode {
    /// `⟨∂_r, ν⟩`.
    pub fn radial_cos(&self) -> f64 {
        self.nu_r
    }

    /// `|∂_r^T|² = 1 - ⟨∂_r, ν⟩²`.
    pub fn radial_tangent_sq(&self) -> f64 {
        (1.0 - self.nu_r * self.nu_r).max(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct BoundarySurface {
    pub n: usize,
    pub nodes: Vec<BoundaryNode>,
}

/// Principal curvatures of `M` at angle `s` from the graph jet.
pub fn principal_curvatures(profile: &WarpingProfile, s: f64, g: GraphPoint) -> (f64, f64, f64) {
    let j = profile.jet(g.u);
    let (t, t1) = (j.theta, j.d1);
    let l = (g.du * g.du + t * t).sqrt();
    let kappa_m = (t * t * t1 + 2.0 * t1 * g.du * g.du - t * g.ddu) / (l * l * l);
    let sn = s.sin();
    // u' cot s → u''(0) at the axis
    let du_cot = if sn.abs() < 1e-7 { g.ddu } else { g.du * s.cos() / sn };
    let kappa_p = (t1 - du_cot / t) / l;
    (kappa_m, kappa_p, l)
}

/// Evaluate the extrinsic geometry of `M` at composite Gauss nodes (`panels` × 8 nodes).
pub fn boundary_geometry(domain: &MeridianDomain, panels: usize) -> BoundarySurface {
    let profile = domain.profile();
    let n = profile.n();
    let nf = n as f64;
    let area_const = sphere_volume(n - 1);
    let rule = quadrature::composite(0.0, PI, panels.max(1), 8);
    let arc_rule = quadrature::gauss_legendre(8);
    let speed = |s: f64| {
        let g = domain.graph(s);
        let t = profile.jet(g.u).theta;
        (g.du * g.du + t * t).sqrt()
    };
    let panel_width = PI / panels.max(1) as f64;
    let mut panel_prefix = vec![0.0; panels.max(1) + 1];
    for p in 0..panels.max(1) {
        let a0 = p as f64 * panel_width;
        let len: f64 = arc_rule
            .0
            .iter()
            .zip(&arc_rule.1)
            .map(|(x, wt)| 0.5 * panel_width * wt * speed(a0 + 0.5 * panel_width * (x + 1.0)))
            .sum();
        panel_prefix[p + 1] = panel_prefix[p] + len;
    }
    let nodes = rule
        .iter()
        .enumerate()
        .map(|(i, &(s, w))| {
            let g = domain.graph(s);
            let theta = profile.jet(g.u).theta;
            let (kappa_m, kappa_p, l) = principal_curvatures(profile, s, g);
            let panel = i / 8;
            let a = panel as f64 * panel_width;
            let full = panel_prefix[panel];
            let partial: f64 = arc_rule
                .0
                .iter()
                .zip(&arc_rule.1)
                .map(|(x, wt)| 0.5 * (s - a) * wt * speed(a + 0.5 * (s - a) * (x + 1.0)))
                .sum();
            let diff = kappa_m - kappa_p;
            BoundaryNode {
                s,
                r: g.u,
                du: g.du,
                ddu: g.ddu,
                arclength: full + partial,
                speed: l,
                weight: w * area_const * theta.powi(n as i32 - 1) * s.sin().powi(n as i32 - 1) * l,
                nu_r: theta / l,
                nu_s: -g.du / l,
                tau_r: g.du / l,
                tau_s: theta / l,
                support: theta * theta / l,
                kappa_m,
                kappa_p,
                h1: (kappa_m + (nf - 1.0) * kappa_p) / nf,
                traceless_sq: (nf - 1.0) / nf * diff * diff,
            }
        })
        .collect();
    BoundarySurface { n, nodes }
}

impl BoundarySurface {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.nodes.iter().map(|p| p.weight).sum()
    }

    /// `∫_M F` where `F(node)` is evaluated at each quadrature node.
    pub fn integrate(&self, f: impl Fn(&BoundaryNode) -> f64) -> f64 {
        self.nodes.iter().map(|p| p.weight * f(p)).sum()
    }

    /// `‖Å‖²_{L²(M)}`.
    pub fn traceless_norm_sq(&self) -> f64 {
        self.integrate(|p| p.traceless_sq)
    }

    pub fn max_traceless(&self) -> f64 {
        self.nodes.iter().fold(0.0f64, |m, p| m.max(p.traceless_sq.sqrt()))
    }
}

/// `∫_M` of values sampled at the surface nodes.
pub fn integrate_boundary(surface: &BoundarySurface, values: &[f64]) -> Result<f64> {
    if values.len() != surface.nodes.len() {
        return Err(Error::SizeMismatch { expected: surface.nodes.len(), got: values.len() });
    }
    Ok(surface.nodes.iter().zip(values).map(|(p, v)| p.weight * v).sum())
}

/// Lower estimate of the interior rolling-ball radius: the smaller of the radius allowed by
/// the largest principal curvature of `M` and an inradius estimate.
pub fn interior_ball_radius(domain: &MeridianDomain) -> f64 {
    let surface = boundary_geometry(domain, 64);
    let kappa_max = surface
        .nodes
        .iter()
        .fold(0.0f64, |m, p| m.max(p.kappa_m).max(p.kappa_p));
    let curvature_bound = if kappa_max <= 0.0 {
        f64::INFINITY
    } else {
        // radius of the geodesic sphere with mean curvature κ, where that makes sense
        match domain.profile().kind() {
            ProfileKind::SpaceformSphere => (1.0 / kappa_max).atan(),
            ProfileKind::SpaceformHyperbolic => {
                if kappa_max > 1.0 {
                    (1.0 / kappa_max).atanh()
                } else {
                    f64::INFINITY
                }
            }
            _ => 1.0 / kappa_max,
        }
    };
    let inradius = match domain.topology() {
        Topology::Homologous => 0.5 * domain.min_u(),
        Topology::NullHomologous => spaceform_axis_inradius(domain, &surface),
    };
    curvature_bound.min(inradius)
}

/// Maximize the distance to `M` over centres on the symmetry axis.
fn spaceform_axis_inradius(domain: &MeridianDomain, surface: &BoundarySurface) -> f64 {
    let kind = domain.profile().kind();
    let dist = |t: f64, p: &BoundaryNode| -> f64 {
        // signed axis position t (positive towards s = 0) to boundary point (r, s)
        let (c, cs) = (t, p.s.cos());
        match kind {
            ProfileKind::SpaceformSphere => {
                (p.r.cos() * c.cos() + p.r.sin() * c.sin() * cs).clamp(-1.0, 1.0).acos()
            }
            ProfileKind::SpaceformHyperbolic => {
                (p.r.cosh() * c.cosh() - p.r.sinh() * c.sinh() * cs).max(1.0).acosh()
            }
            _ => (p.r * p.r + c * c - 2.0 * p.r * c * cs).max(0.0).sqrt(),
        }
    };
    let clearance = |t: f64| surface.nodes.iter().fold(f64::INFINITY, |m, p| m.min(dist(t, p)));
    let (a, b) = (-domain.u(PI), domain.u(0.0));
    let samples = 400;
    let mut best = (0.0, clearance(0.0));
    for i in 0..=samples {
        let t = a + (b - a) * i as f64 / samples as f64;
        let c = clearance(t);
        if c > best.1 {
            best = (t, c);
        }
    }
    // golden-section refinement around the best sample
    let step = (b - a) / samples as f64;
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if clearance(x1) > clearance(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    best.1.max(clearance(0.5 * (lo + hi)))
}

/// A quadrature point of a volume or slice rule in polar meridian coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub s: f64,
    pub weight: f64,
}

/// Tensor Gauss rule for `∫_Ω` on `{r_in < r < u(s)}` with the warped volume weight.
pub fn graph_quadrature(domain: &MeridianDomain, s_panels: usize, r_panels: usize) -> Vec<PolarPoint> {
    let profile = domain.profile();
    let n = profile.n() as i32;
    let area_const = sphere_volume(profile.n() - 1);
    let mut out = Vec::new();
    for (s, ws) in quadrature::composite(0.0, PI, s_panels, 8) {
        let u = domain.u(s);
        let sw = ws * area_const * s.sin().powi(n - 1);
        for (r, wr) in quadrature::composite(0.0, u, r_panels, 8) {
            out.push(PolarPoint { r, s, weight: sw * wr * profile.jet(r).theta.powi(n) });
        }
    }
    out
}

/// Quadrature on the inner slice `{r = 0}` of a homologous domain, with outward normal `-∂_r`.
pub fn inner_slice_rule(domain: &MeridianDomain, panels: usize) -> Vec<PolarPoint> {
    if domain.topology() != Topology::Homologous {
        return Vec::new();
    }
    let profile = domain.profile();
    let n = profile.n() as i32;
    let scale = sphere_volume(profile.n() - 1) * profile.theta_at_origin().powi(n);
    quadrature::composite(0.0, PI, panels, 8)
        .into_iter()
        .map(|(s, w)| PolarPoint { r: 0.0, s, weight: w * scale * s.sin().powi(n - 1) })
        .collect()
}

/// `vol(Ω)` and `∫_Ω V` by one-dimensional quadrature in `s`, integrating `r` in closed form
/// where possible (`∫ ϑ'ϑⁿ dr = ϑ^{n+1}/(n+1)`).
pub fn integral_of_v(domain: &MeridianDomain, panels: usize) -> f64 {
    let profile = domain.profile();
    let n = profile.n() as i32;
    let t0 = profile.theta_at_origin().powi(n + 1);
    sphere_volume(profile.n() - 1)
        * quadrature::composite(0.0, PI, panels, 8)
            .into_iter()
            .map(|(s, w)| {
                w * (profile.jet(domain.u(s)).theta.powi(n + 1) - t0) / (n as f64 + 1.0)
                    * s.sin().powi(n - 1)
            })
            .sum::<f64>()
}

pub fn volume(domain: &MeridianDomain, panels: usize) -> f64 {
    graph_quadrature(domain, panels, panels).iter().map(|p| p.weight).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_profile, ProfileSpec};
    use approx::assert_relative_eq;

    fn hyperbolic(n: usize) -> Arc<WarpingProfile> {
        Arc::new(make_profile(&ProfileSpec::new(ProfileKind::SpaceformHyperbolic, n)).unwrap())
    }

    fn schwarzschild() -> Arc<WarpingProfile> {
        Arc::new(make_profile(&ProfileSpec::schwarzschild(0, 0.5, 2)).unwrap())
    }

    fn slab(u: f64) -> MeridianDomain {
        build_domain(schwarzschild(), BoundarySpec::CosineSeries { r0: u, coeffs: vec![] }, Topology::Homologous)
            .unwrap()
    }

    #[test]
    fn build_examples() {
        let ball = build_domain(
            hyperbolic(2),
            BoundarySpec::GeodesicBall { radius: 1.0, center: 0.0 },
            Topology::NullHomologous,
        )
        .unwrap();
        assert_eq!(ball.topology(), Topology::NullHomologous);
        assert_eq!(slab(2.0).topology(), Topology::Homologous);
        let perturbed = build_domain(
            schwarzschild(),
            BoundarySpec::CosineSeries { r0: 2.0, coeffs: vec![0.1] },
            Topology::Homologous,
        )
        .unwrap();
        assert_relative_eq!(perturbed.min_u(), 1.9, max_relative = 1e-12);
        assert_relative_eq!(perturbed.max_u(), 2.1, max_relative = 1e-12);
    }

    #[test]
    fn build_rejects_invalid_domains() {
        let p = schwarzschild();
        let exits = BoundarySpec::CosineSeries { r0: 0.5, coeffs: vec![0.6] };
        assert!(build_domain(p.clone(), exits, Topology::Homologous).is_err());
        let flat = BoundarySpec::CosineSeries { r0: 1.0, coeffs: vec![] };
        assert!(build_domain(p.clone(), flat.clone(), Topology::NullHomologous).is_err());
        assert!(build_domain(hyperbolic(2), flat, Topology::Homologous).is_err());
        let outside = BoundarySpec::GeodesicBall { radius: 1.0, center: 1.5 };
        assert!(build_domain(hyperbolic(2), outside, Topology::NullHomologous).is_err());
        let ball = BoundarySpec::GeodesicBall { radius: 1.0, center: 0.0 };
        assert!(build_domain(p, ball, Topology::Homologous).is_err());
    }

    #[test]
    fn slice_is_umbilic() {
        let d = slab(1.5);
        let surf = boundary_geometry(&d, 8);
        let j = d.profile().jet(1.5);
        for p in &surf.nodes {
            assert!(p.traceless_sq.sqrt() < 1e-12);
            assert_relative_eq!(p.h1, j.d1 / j.theta, max_relative = 1e-13);
            assert_eq!(p.radial_cos(), 1.0);
        }
    }

    #[test]
    fn offset_geodesic_spheres_are_umbilic() {
        for (kind, coth) in [
            (ProfileKind::SpaceformHyperbolic, 1.0 / 0.8f64.tanh()),
            (ProfileKind::SpaceformSphere, 1.0 / 0.8f64.tan()),
            (ProfileKind::Euclidean, 1.0 / 0.8),
        ] {
            let p = Arc::new(make_profile(&ProfileSpec::new(kind, 3)).unwrap());
            let d = build_domain(
                p,
                BoundarySpec::GeodesicBall { radius: 0.8, center: 0.3 },
                Topology::NullHomologous,
            )
            .unwrap();
            for node in &boundary_geometry(&d, 8).nodes {
                assert!((node.kappa_m - coth).abs() < 1e-9, "{kind:?}: {}", node.kappa_m);
                assert!((node.kappa_p - coth).abs() < 1e-9, "{kind:?}: {}", node.kappa_p);
            }
            assert!((d.rho() - 0.8).abs() < 1e-6, "{kind:?}: rho {}", d.rho());
        }
    }

    #[test]
    fn slice_area_and_hyperbolic_ball_volume() {
        // slice where ϑ = 2 in Schwarzschild
        let p = schwarzschild();
        let r2 = (0..200)
            .map(|i| p.r_bar() * i as f64 / 200.0)
            .min_by(|a, b| (p.jet(*a).theta - 2.0).abs().partial_cmp(&(p.jet(*b).theta - 2.0).abs()).unwrap())
            .unwrap();
        let d = slab(r2);
        let t = p.jet(r2).theta;
        let surf = boundary_geometry(&d, 4);
        let ones = vec![1.0; surf.len()];
        assert_relative_eq!(integrate_boundary(&surf, &ones).unwrap(), 4.0 * PI * t * t, max_relative = 1e-13);
        assert_eq!(integrate_boundary(&surf, &vec![0.0; surf.len()]).unwrap(), 0.0);
        assert!(integrate_boundary(&surf, &[1.0]).is_err());

        let ball = build_domain(
            hyperbolic(1),
            BoundarySpec::GeodesicBall { radius: 1.3, center: 0.0 },
            Topology::NullHomologous,
        )
        .unwrap();
        assert_relative_eq!(volume(&ball, 8), 2.0 * PI * (1.3f64.cosh() - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn minkowski_identity_in_spaceforms() {
        for kind in [ProfileKind::SpaceformHyperbolic, ProfileKind::SpaceformSphere, ProfileKind::Euclidean] {
            let p = Arc::new(make_profile(&ProfileSpec::new(kind, 2)).unwrap());
            let d = build_domain(
                p.clone(),
                BoundarySpec::CosineSeries { r0: 0.9, coeffs: vec![0.1, -0.05, 0.02] },
                Topology::NullHomologous,
            )
            .unwrap();
            let surf = boundary_geometry(&d, 32);
            let n = 2.0;
            let defect = surf.integrate(|q| n * p.jet(q.r).d1 - n * q.h1 * q.support);
            assert!(defect.abs() < 1e-10 * surf.area(), "{kind:?}: {defect}");
        }
    }

    #[test]
    fn support_integral_matches_divergence_of_x() {
        let p = schwarzschild();
        let d = build_domain(
            p.clone(),
            BoundarySpec::CosineSeries { r0: 1.2, coeffs: vec![0.2, 0.05] },
            Topology::Homologous,
        )
        .unwrap();
        let surf = boundary_geometry(&d, 32);
        let lhs = surf.integrate(|q| q.support);
        let rhs = 3.0 * integral_of_v(&d, 32) + 4.0 * PI;
        assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        let by_volume: f64 = graph_quadrature(&d, 32, 16).iter().map(|q| q.weight * p.jet(q.r).d1).sum();
        assert_relative_eq!(by_volume, integral_of_v(&d, 32), max_relative = 1e-12);
    }

    #[test]
    fn traceless_norm_is_resolution_stable() {
        let d = build_domain(
            schwarzschild(),
            BoundarySpec::CosineSeries { r0: 2.0, coeffs: vec![0.1] },
            Topology::Homologous,
        )
        .unwrap();
        let a = boundary_geometry(&d, 8).traceless_norm_sq();
        let b = boundary_geometry(&d, 16).traceless_norm_sq();
        assert!(a > 0.0);
        assert!((a - b).abs() < 0.01 * b);
    }

    #[test]
    fn rolling_radius_of_slab_and_thin_slab() {
        assert_relative_eq!(slab(2.0).rho(), 1.0, max_relative = 1e-12);
        let wavy = build_domain(
            schwarzschild(),
            BoundarySpec::CosineSeries { r0: 2.0, coeffs: vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.05] },
            Topology::Homologous,
        )
        .unwrap();
        let kmax = boundary_geometry(&wavy, 64).nodes.iter().fold(0.0f64, |m, p| m.max(p.kappa_m));
        assert!(wavy.rho() <= 1.0 / kmax + 1e-12);
        assert!(wavy.rho() < 0.95);
    }

    #[test]
    fn arclength_of_circle() {
        let p = Arc::new(make_profile(&ProfileSpec::new(ProfileKind::Euclidean, 2)).unwrap());
        let d = build_domain(p, BoundarySpec::GeodesicBall { radius: 1.0, center: 0.0 }, Topology::NullHomologous)
            .unwrap();
        for node in &boundary_geometry(&d, 4).nodes {
            assert_relative_eq!(node.arclength, node.s, max_relative = 1e-12);
        }
    }
}
