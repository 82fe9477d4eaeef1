//! Both sides of the integral identities, evaluated on sampled fields.
//!
//! A [`Sampling`] fixes the quadrature of `Ω`, of `M` and of the inner slice; a field is
//! evaluated once on it ([`SampledField`]) and every identity is then a plain weighted sum.
//! The same code therefore runs on finite-element fields and on radial oracles.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::{boundary_geometry, graph_quadrature, inner_slice_rule, BoundarySurface, MeridianDomain, Topology};
use crate::error::{Error, Result};
use crate::jet::{potential_jet, AmbientJet, FieldJet, SamplePoint};
use crate::mesh::{CellRef, MeridianMesh};
use crate::profile::{sphere_volume, WarpingProfile};
use crate::source::SourceSpec;

/// One itemized integral of an identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Term {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub id: String,
    pub left: f64,
    pub right: f64,
    pub absolute: f64,
    pub relative: f64,
    pub h: f64,
    pub left_terms: Vec<Term>,
    pub right_terms: Vec<Term>,
}

impl IdentityResidual {
    fn new(id: &str, h: f64, left_terms: Vec<Term>, right_terms: Vec<Term>) -> Self {
        let left: f64 = left_terms.iter().map(|t| t.value).sum();
        let right: f64 = right_terms.iter().map(|t| t.value).sum();
        let absolute = (left - right).abs();
        let relative = absolute / (left.abs() + right.abs() + f64::EPSILON);
        Self { id: id.to_string(), left, right, absolute, relative, h, left_terms, right_terms }
    }

    /// Sum of the absolute values of all itemized terms.
    pub fn scale(&self) -> f64 {
        self.left_terms.iter().chain(&self.right_terms).map(|t| t.value.abs()).sum()
    }

    /// `|L - R|` relative to [`Self::scale`]; meaningful when both sides vanish.
    pub fn scaled_residual(&self) -> f64 {
        self.absolute / (self.scale() + f64::EPSILON)
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.left_terms.iter().chain(&self.right_terms).find(|t| t.name == name).map(|t| t.value)
    }
}

fn term(name: &str, value: f64) -> Term {
    Term { name: name.to_string(), value }
}

/// A weighted point of a volume rule on `Ω`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VolumePoint {
    pub point: SamplePoint,
    pub weight: f64,
}

/// Quadrature data for `Ω`, `M` and (for homologous domains) the inner slice.
#[derive(Clone, Debug)]
pub struct Sampling {
    pub n: usize,
    pub topology: Topology,
    pub h: f64,
    pub volume: Vec<VolumePoint>,
    pub surface: BoundarySurface,
    /// Inner slice points with weights of `∫_{r=0}` (outward normal `-∂_r`).
    pub slice: Vec<VolumePoint>,
}

impl Sampling {
    /// Element quadrature of a mesh, exact boundary nodes with `panels` Gauss panels.
    pub fn from_mesh(mesh: &MeridianMesh, panels: usize) -> Self {
        let volume = (0..mesh.elements.len())
            .into_par_iter()
            .flat_map_iter(|e| {
                mesh.element_quadrature(e).into_iter().map(move |q| VolumePoint {
                    point: SamplePoint { r: q.r, s: q.s, cell: Some(CellRef { elem: e, local: q.local }) },
                    weight: q.weight,
                })
            })
            .collect();
        Self::with_volume(mesh.domain(), volume, mesh.h(), panels)
    }

    /// Tensor Gauss rule on the graph region; suited to fields given in closed form.
    pub fn from_graph(domain: &MeridianDomain, panels: usize) -> Self {
        let volume = graph_quadrature(domain, panels, panels)
            .into_iter()
            .map(|p| VolumePoint { point: SamplePoint::new(p.r, p.s), weight: p.weight })
            .collect();
        Self::with_volume(domain, volume, 0.0, panels)
    }

    fn with_volume(domain: &MeridianDomain, volume: Vec<VolumePoint>, h: f64, panels: usize) -> Self {
        let slice = inner_slice_rule(domain, panels)
            .into_iter()
            .map(|p| VolumePoint { point: SamplePoint::new(p.r, p.s), weight: p.weight })
            .collect();
        Self {
            n: domain.n(),
            topology: domain.topology(),
            h,
            volume,
            surface: boundary_geometry(domain, panels),
            slice,
        }
    }

    /// Evaluate a field at every quadrature point.
    pub fn sample(&self, field: &dyn FieldJet) -> SampledField {
        let eval = |pts: &[VolumePoint]| pts.par_iter().map(|p| field.jet_at(&p.point)).collect::<Vec<_>>();
        SampledField {
            volume: eval(&self.volume),
            boundary: self
                .surface
                .nodes
                .par_iter()
                .map(|b| field.jet_at(&SamplePoint::new(b.r, b.s)))
                .collect(),
            slice: eval(&self.slice),
        }
    }

    /// `∫_Ω g(jet of V, point)`.
    pub fn integrate_volume(&self, profile: &WarpingProfile, g: impl Fn(&AmbientJet, usize) -> f64 + Sync) -> f64 {
        self.volume
            .par_iter()
            .enumerate()
            .map(|(i, p)| p.weight * g(&potential_jet(profile, p.point.r, p.point.s), i))
            .collect::<Vec<f64>>()
            .iter()
            .sum()
    }
}

/// A field evaluated on a [`Sampling`].
#[derive(Clone, Debug)]
pub struct SampledField {
    pub volume: Vec<AmbientJet>,
    pub boundary: Vec<AmbientJet>,
    pub slice: Vec<AmbientJet>,
}

fn vol_sum(s: &Sampling, g: impl Fn(usize) -> f64 + Sync) -> f64 {
    // collected first so the summation order does not depend on thread scheduling
    s.volume.par_iter().enumerate().map(|(i, p)| p.weight * g(i)).collect::<Vec<f64>>().iter().sum()
}

fn bnd_sum(s: &Sampling, g: impl Fn(usize) -> f64) -> f64 {
    s.surface.nodes.iter().enumerate().map(|(i, b)| b.weight * g(i)).sum()
}

fn slice_sum(s: &Sampling, g: impl Fn(usize) -> f64) -> f64 {
    s.slice.iter().enumerate().map(|(i, p)| p.weight * g(i)).sum()
}

fn curvature_of(profile: &WarpingProfile) -> Result<f64> {
    profile
        .spaceform_curvature()
        .ok_or_else(|| Error::InvalidParameters("identity requires a spaceform profile".into()))
}

fn v_at(profile: &WarpingProfile, r: f64) -> f64 {
    profile.jet(r).d1
}

fn f_nu(s: &Sampling, f: &SampledField, i: usize) -> f64 {
    let b = &s.surface.nodes[i];
    f.boundary[i].directional([b.nu_r, b.nu_s])
}

/// `R = ∫_Ω Vφ(f) / ∫_{∂Ω} V`.
pub fn serrin_constant(s: &Sampling, profile: &WarpingProfile, f: &SampledField, source: &SourceSpec) -> f64 {
    let num = vol_sum(s, |i| v_at(profile, s.volume[i].point.r) * source.phi(f.volume[i].f));
    let den = bnd_sum(s, |i| v_at(profile, s.surface.nodes[i].r));
    num / den
}

/// The Pohozaev identity `½∫⟨X,ν⟩f_ν² = (n+1)(n+3)K/4 ∫Vf² - (n+1)∫VΦ + (n-1)/2 ∫Vfφ`.
pub fn pohozaev_residual(
    s: &Sampling,
    profile: &WarpingProfile,
    f: &SampledField,
    source: &SourceSpec,
) -> Result<IdentityResidual> {
    let k = curvature_of(profile)?;
    let n = s.n as f64;
    let lhs = 0.5 * bnd_sum(s, |i| s.surface.nodes[i].support * f_nu(s, f, i).powi(2));
    let vf2 = vol_sum(s, |i| v_at(profile, s.volume[i].point.r) * f.volume[i].f.powi(2));
    let vphi = vol_sum(s, |i| v_at(profile, s.volume[i].point.r) * source.big_phi(f.volume[i].f));
    let vfphi = vol_sum(s, |i| {
        let v = f.volume[i].f;
        v_at(profile, s.volume[i].point.r) * v * source.phi(v)
    });
    Ok(IdentityResidual::new(
        "pohozaev",
        s.h,
        vec![term("boundary ½⟨X,ν⟩f_ν²", lhs)],
        vec![
            term("(n+1)(n+3)K/4 ∫Vf²", (n + 1.0) * (n + 3.0) * k / 4.0 * vf2),
            term("-(n+1)∫VΦ", -(n + 1.0) * vphi),
            term("(n-1)/2 ∫Vfφ", (n - 1.0) / 2.0 * vfphi),
        ],
    ))
}

/// The three intermediate equalities of the Pohozaev computation, each as its own residual.
pub fn pohozaev_steps(
    s: &Sampling,
    profile: &WarpingProfile,
    f: &SampledField,
    source: &SourceSpec,
) -> Result<Vec<IdentityResidual>> {
    let k = curvature_of(profile)?;
    let n = s.n as f64;
    let x_grad_lap = vol_sum(s, |i| {
        let j = &f.volume[i];
        profile.jet(j.r).theta * j.grad_r * j.laplacian()
    });
    let v_grad_sq = vol_sum(s, |i| v_at(profile, s.volume[i].point.r) * f.volume[i].grad_sq());
    let flux = 0.5 * bnd_sum(s, |i| s.surface.nodes[i].support * f_nu(s, f, i).powi(2));
    let vf2 = vol_sum(s, |i| v_at(profile, s.volume[i].point.r) * f.volume[i].f.powi(2));
    let vphi = vol_sum(s, |i| v_at(profile, s.volume[i].point.r) * source.big_phi(f.volume[i].f));
    let vfphi = vol_sum(s, |i| {
        let v = f.volume[i].f;
        v_at(profile, s.volume[i].point.r) * v * source.phi(v)
    });
    Ok(vec![
        IdentityResidual::new(
            "pohozaev-divergence",
            s.h,
            vec![term("∫⟨X,∇f⟩Δf", x_grad_lap)],
            vec![term("½∫⟨X,ν⟩f_ν²", flux), term("(n-1)/2 ∫V|∇f|²", (n - 1.0) / 2.0 * v_grad_sq)],
        ),
        IdentityResidual::new(
            "pohozaev-equation",
            s.h,
            vec![term("∫⟨X,∇f⟩Δf", x_grad_lap)],
            vec![term("(n+1)²K/2 ∫Vf²", (n + 1.0).powi(2) * k / 2.0 * vf2), term("-(n+1)∫VΦ", -(n + 1.0) * vphi)],
        ),
        IdentityResidual::new(
            "pohozaev-energy",
            s.h,
            vec![term("∫V|∇f|²", v_grad_sq)],
            vec![term("(n+1)K/2 ∫Vf²", (n + 1.0) * k / 2.0 * vf2), term("-∫Vfφ", -vfphi)],
        ),
    ])
}

/// The master identity for `∫_Ω V f |∇̊²f|²` (trace over all `n+1` directions).
///
/// The left side is nonpositive for solutions with `f < 0`; `E_serrin` is its negative.
pub fn serrin_master_residual(
    s: &Sampling,
    profile: &WarpingProfile,
    f: &SampledField,
    source: &SourceSpec,
) -> Result<IdentityResidual> {
    let k = curvature_of(profile)?;
    let n = s.n as f64;
    let big_r = serrin_constant(s, profile, f, source);
    let lhs = vol_sum(s, |i| {
        let j = &f.volume[i];
        v_at(profile, j.r) * j.f * j.traceless_hess_sq()
    });
    let vol = |g: &(dyn Fn(f64) -> f64 + Sync)| vol_sum(s, |i| v_at(profile, s.volume[i].point.r) * g(f.volume[i].f));
    let boundary = bnd_sum(s, |i| {
        let b = &s.surface.nodes[i];
        let fnu = f_nu(s, f, i);
        (v_at(profile, b.r) * fnu - b.support / (n + 1.0)) * (fnu * fnu - big_r * big_r)
    });
    Ok(IdentityResidual::new(
        "serrin-master",
        s.h,
        vec![term("∫Vf|∇̊²f|²", lhs)],
        vec![
            term("R²/2 ∫V(1-φ)", 0.5 * big_r * big_r * vol(&|v| 1.0 - source.phi(v))),
            term("-½∫(Vf_ν - ⟨X,ν⟩/(n+1))(f_ν²-R²)", -0.5 * boundary),
            term(
                "(n+1)K/2 ∫V(Φf-Ψ-½f²)",
                (n + 1.0) * k / 2.0 * vol(&|v| source.big_phi(v) * v - source.psi(v) - 0.5 * v * v),
            ),
            term("K/2 ∫V(φ-1)f²", k / 2.0 * vol(&|v| (source.phi(v) - 1.0) * v * v)),
            term(
                "-(n+3)/(2(n+1)) ∫Vfφ(φ-1)",
                -(n + 3.0) / (2.0 * (n + 1.0)) * vol(&|v| v * source.phi(v) * (source.phi(v) - 1.0)),
            ),
            term(
                "∫V(1-3φ/2)(Φ-fφ)",
                vol(&|v| (1.0 - 1.5 * source.phi(v)) * (source.big_phi(v) - v * source.phi(v))),
            ),
        ],
    ))
}

/// `(∇̄²V - Δ̄V ḡ)(∇̄V, ν) / V` for a meridian unit normal with radial component `nu_r`.
fn hess_v_flux(profile: &WarpingProfile, r: f64, nu_r: f64) -> f64 {
    let j = profile.jet(r);
    -(profile.n() as f64) * j.d2 * j.d2_over_theta * nu_r
}

/// Boundary integrand of the Reilly formula at a point of a boundary component.
#[allow(clippy::too_many_arguments)]
fn reilly_boundary_integrand(
    profile: &WarpingProfile,
    fj: &AmbientJet,
    r: f64,
    s: f64,
    nu: [f64; 2],
    tau: [f64; 2],
    kappa_m: f64,
    h1: f64,
) -> f64 {
    let n = profile.n() as f64;
    let vj = potential_jet(profile, r, s);
    let v = vj.f;
    let fnu = fj.directional(nu);
    let ftau = fj.directional(tau);
    let v_nu = vj.directional(nu);
    // surface Laplacians from Δ̄u = Δ_M u + ∇̄²u(ν,ν) + n H₁ u_ν
    let lap_f = fj.laplacian() - fj.hess(nu, nu) - n * h1 * fnu;
    let lap_v = vj.laplacian() - vj.hess(nu, nu) - n * h1 * v_nu;
    v * kappa_m * ftau * ftau
        + 2.0 * v * fnu * lap_f
        + n * v * h1 * fnu * fnu
        + v_nu * ftau * ftau
        + 2.0 * fj.f * ftau * vj.hess(tau, nu)
        - 2.0 * fj.f * fnu * (lap_v + n * h1 * v_nu)
        - fj.f * fj.f * hess_v_flux(profile, r, nu[0])
}

/// The Reilly-type formula with `V = ϑ'` for any `C²` field, outward normals on all components.
pub fn reilly_residual(s: &Sampling, profile: &WarpingProfile, f: &SampledField) -> IdentityResidual {
    let n = s.n as f64;
    let operator_sq = vol_sum(s, |i| {
        let j = &f.volume[i];
        let v = v_at(profile, j.r);
        let l = j.laplacian() - profile.laplace_v_over_v(j.r) * j.f;
        v * l * l
    });
    let hess_sq = vol_sum(s, |i| {
        let j = &f.volume[i];
        let pj = profile.jet(j.r);
        let a = j.h_rr - pj.v3_over_v1 * j.f;
        let b = j.h_ss - pj.d2_over_theta * j.f;
        let c = j.hoop - pj.d2_over_theta * j.f;
        pj.d1 * (a * a + 2.0 * j.h_rs * j.h_rs + b * b + (n - 1.0) * c * c)
    });
    let boundary = bnd_sum(s, |i| {
        let b = &s.surface.nodes[i];
        reilly_boundary_integrand(profile, &f.boundary[i], b.r, b.s, [b.nu_r, b.nu_s], [b.tau_r, b.tau_s], b.kappa_m, b.h1)
    });
    let slice = slice_sum(s, |i| {
        let p = &s.slice[i].point;
        reilly_boundary_integrand(profile, &f.slice[i], p.r, p.s, [-1.0, 0.0], [0.0, 1.0], 0.0, 0.0)
    });
    // the curvature form vanishes radially; its tangential eigenvalue is V·combination/ϑ²
    let curvature = vol_sum(s, |i| {
        let j = &f.volume[i];
        let pj = profile.jet(j.r);
        pj.d1 * profile.laplace_combination(j.r) / (pj.theta * pj.theta) * j.grad_s * j.grad_s
    });
    IdentityResidual::new(
        "reilly",
        s.h,
        vec![term("∫V(Δf - (ΔV/V)f)²", operator_sq), term("-∫V|∇²f - (∇²V/V)f|²", -hess_sq)],
        vec![term("boundary M", boundary), term("inner slice", slice), term("curvature volume term", curvature)],
    )
}

/// `ϑ(0)^{n+1} |Sⁿ|` for homologous domains, zero otherwise.
pub fn slice_constant(s: &Sampling, profile: &WarpingProfile) -> f64 {
    match s.topology {
        Topology::Homologous => profile.theta_at_origin().powi(s.n as i32 + 1) * sphere_volume(s.n),
        Topology::NullHomologous => 0.0,
    }
}

/// The three flux identities of the torsion problem.
pub fn flux_residuals(s: &Sampling, profile: &WarpingProfile, f: &SampledField) -> Vec<IdentityResidual> {
    let n = s.n as f64;
    let int_v = s.integrate_volume(profile, |vj, _| vj.f);
    let v_fnu = bnd_sum(s, |i| v_at(profile, s.surface.nodes[i].r) * f_nu(s, f, i));
    let support = bnd_sum(s, |i| s.surface.nodes[i].support);
    let c = slice_constant(s, profile);
    vec![
        IdentityResidual::new(
            "flux-volume",
            s.h,
            vec![term("∫V", int_v)],
            vec![term("∫_M Vf_ν", v_fnu), term("-ϑ(0)^{n+1}|Sⁿ|/(n+1)", -c / (n + 1.0))],
        ),
        IdentityResidual::new(
            "flux-geometric",
            s.h,
            vec![term("(n+1)∫V", (n + 1.0) * int_v)],
            vec![term("∫_M⟨X,ν⟩", support), term("-ϑ(0)^{n+1}|Sⁿ|", -c)],
        ),
        IdentityResidual::new(
            "flux-boundary",
            s.h,
            vec![term("∫_M⟨X,ν⟩", support)],
            vec![term("(n+1)∫_M Vf_ν", (n + 1.0) * v_fnu)],
        ),
    ]
}

/// `∫_{∂Ω} V²∂_ν(f/V)` against `∫_Ω Vf(Δf/f - ΔV/V)`, both written without division.
pub fn divergence_residual(s: &Sampling, profile: &WarpingProfile, f: &SampledField) -> IdentityResidual {
    let volume = vol_sum(s, |i| {
        let j = &f.volume[i];
        let v = v_at(profile, j.r);
        v * j.laplacian() - j.f * v * profile.laplace_v_over_v(j.r)
    });
    let flux = |fj: &AmbientJet, r: f64, s_: f64, nu: [f64; 2]| {
        let vj = potential_jet(profile, r, s_);
        vj.f * fj.directional(nu) - fj.f * vj.directional(nu)
    };
    let boundary = bnd_sum(s, |i| {
        let b = &s.surface.nodes[i];
        flux(&f.boundary[i], b.r, b.s, [b.nu_r, b.nu_s])
    });
    let slice = slice_sum(s, |i| {
        let p = &s.slice[i].point;
        flux(&f.slice[i], p.r, p.s, [-1.0, 0.0])
    });
    IdentityResidual::new(
        "divergence",
        s.h,
        vec![term("∫_M V²∂_ν(f/V)", boundary), term("inner slice flux", slice)],
        vec![term("∫_Ω (VΔf - fΔV)", volume)],
    )
}

/// Observed convergence orders `log(e_k/e_{k+1}) / log(h_k/h_{k+1})` between consecutive levels.
pub fn observed_orders(levels: &[(f64, f64)]) -> Vec<f64> {
    levels.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect()
}

/// CSV convergence table with columns `h, residual, order`.
pub fn convergence_csv(levels: &[(f64, f64)]) -> String {
    let orders = observed_orders(levels);
    let mut out = String::from("h,residual,order\n");
    for (i, (h, e)) in levels.iter().enumerate() {
        let order = if i == 0 { String::new() } else { format!("{}", orders[i - 1]) };
        out.push_str(&format!("{h},{e},{order}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_domain, BoundarySpec};
    use crate::jet::{ambient_from_radial, AnalyticField};
    use crate::profile::{make_profile, ProfileKind, ProfileSpec};
    use crate::radial::{radial_oracle, torsion_inner_value, RadialProblem};
    use std::sync::Arc;

    fn domain(spec: ProfileSpec, boundary: BoundarySpec, topology: Topology) -> MeridianDomain {
        build_domain(Arc::new(make_profile(&spec).unwrap()), boundary, topology).unwrap()
    }

    fn hyperbolic_ball() -> MeridianDomain {
        domain(
            ProfileSpec::new(ProfileKind::SpaceformHyperbolic, 2),
            BoundarySpec::GeodesicBall { radius: 1.0, center: 0.0 },
            Topology::NullHomologous,
        )
    }

    #[test]
    fn radial_oracle_satisfies_serrin_identities() {
        let d = hyperbolic_ball();
        let sampling = Sampling::from_graph(&d, 24);
        for source in [SourceSpec::constant(1.0), SourceSpec::Exp { a: 1.0, b: 1.0 }] {
            let problem = RadialProblem::Serrin { curvature: -1.0, source: source.clone() };
            let oracle = radial_oracle(&problem, d.profile_arc(), 1.0).unwrap();
            let f = sampling.sample(&oracle);
            let p = pohozaev_residual(&sampling, d.profile(), &f, &source).unwrap();
            assert!(p.relative < 1e-8, "{p:?}");
            for step in pohozaev_steps(&sampling, d.profile(), &f, &source).unwrap() {
                assert!(step.relative < 1e-8, "{step:?}");
            }
            let m = serrin_master_residual(&sampling, d.profile(), &f, &source).unwrap();
            assert!(m.absolute < 1e-9 * m.scale().max(1e-3), "{m:?}");
        }
    }

    #[test]
    fn master_identity_vanishes_on_exact_ball() {
        let d = hyperbolic_ball();
        let sampling = Sampling::from_graph(&d, 16);
        let field = AnalyticField {
            eval: |r: f64, s: f64| {
                let c = 1f64.cosh();
                ambient_from_radial(d.profile(), r, s, [(r.cosh() / c - 1.0) / 3.0, r.sinh() / (3.0 * c), r.cosh() / (3.0 * c)])
            },
        };
        let f = sampling.sample(&field);
        let m = serrin_master_residual(&sampling, d.profile(), &f, &SourceSpec::constant(1.0)).unwrap();
        assert!(m.left.abs() < 1e-12 && m.right.abs() < 1e-12, "{m:?}");
        let r = serrin_constant(&sampling, d.profile(), &f, &SourceSpec::constant(1.0));
        assert!((r - 1f64.tanh() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn reilly_and_flux_on_schwarzschild_slab() {
        let d = domain(
            ProfileSpec::schwarzschild(0, 0.5, 2),
            BoundarySpec::CosineSeries { r0: 1.2, coeffs: vec![] },
            Topology::Homologous,
        );
        let sampling = Sampling::from_graph(&d, 16);
        let oracle = radial_oracle(&RadialProblem::Torsion, d.profile_arc(), 1.2).unwrap();
        let f = sampling.sample(&oracle);
        let reilly = reilly_residual(&sampling, d.profile(), &f);
        assert!(reilly.relative < 1e-6, "{reilly:?}");
        for r in flux_residuals(&sampling, d.profile(), &f) {
            assert!(r.relative < 1e-6, "{r:?}");
        }
        let div = divergence_residual(&sampling, d.profile(), &f);
        assert!(div.relative < 1e-6, "{div:?}");
        assert!((f.slice[0].f - torsion_inner_value(d.profile())).abs() < 1e-9);
    }

    #[test]
    fn reilly_holds_for_non_radial_fields() {
        // the formula is an identity for any C² field, not only for solutions
        let d = domain(
            ProfileSpec::schwarzschild(0, 0.5, 2),
            BoundarySpec::CosineSeries { r0: 1.2, coeffs: vec![0.0, 0.15] },
            Topology::Homologous,
        );
        let sampling = Sampling::from_graph(&d, 24);
        let p = d.profile();
        let field = AnalyticField {
            eval: |r: f64, s: f64| {
                // f = g(r) (2 + cos s) with g = 1 + r²
                let j = p.jet(r);
                let (g, g1, g2) = (1.0 + r * r, 2.0 * r, 2.0);
                let (c, sn) = (s.cos(), s.sin());
                let a = 2.0 + c;
                let lg = j.d1 / j.theta;
                let f_s = -g * sn;
                let f_ss = -g * c;
                let f_rs = -g1 * sn;
                AmbientJet {
                    n: 2,
                    r,
                    s,
                    f: g * a,
                    grad_r: g1 * a,
                    grad_s: f_s / j.theta,
                    h_rr: g2 * a,
                    h_rs: (f_rs - lg * f_s) / j.theta,
                    h_ss: f_ss / (j.theta * j.theta) + lg * g1 * a,
                    hoop: lg * g1 * a + (-g * c) / (j.theta * j.theta),
                }
            },
        };
        let f = sampling.sample(&field);
        let reilly = reilly_residual(&sampling, p, &f);
        assert!(reilly.relative < 1e-8, "{reilly:?}");
        let div = divergence_residual(&sampling, p, &f);
        assert!(div.relative < 1e-8, "{div:?}");
    }

    #[test]
    fn hyperbolic_curvature_form_vanishes() {
        let p = make_profile(&ProfileSpec::new(ProfileKind::SpaceformHyperbolic, 3)).unwrap();
        for r in [0.1, 0.7, 2.0] {
            assert!(p.laplace_combination(r).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_potential_vanishes() {
        let d = hyperbolic_ball();
        let sampling = Sampling::from_graph(&d, 8);
        let field = AnalyticField { eval: |r: f64, s: f64| potential_jet(d.profile(), r, s) };
        let f = sampling.sample(&field);
        let div = divergence_residual(&sampling, d.profile(), &f);
        assert!(div.left.abs() < 1e-12 && div.right.abs() < 1e-12);
    }

    #[test]
    fn convergence_table() {
        let levels = [(0.1, 4e-4), (0.05, 1e-4), (0.025, 2.5e-5)];
        let orders = observed_orders(&levels);
        assert!(orders.iter().all(|o| (o - 2.0).abs() < 1e-12));
        assert!(convergence_csv(&levels).starts_with("h,residual,order\n0.1,0.0004,\n"));
    }
}
