//! Stability deficits, closeness measures, the level-set flow near the boundary and
//! perturbation sweeps.

use std::f64::consts::PI;
use std::sync::Arc;

use ode_solvers::{Dopri5, System, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{build_domain, integral_of_v, BoundarySpec, BoundarySurface, MeridianDomain, Topology};
use crate::error::{Error, Result};
use crate::identities::{SampledField, Sampling};
use crate::jet::{ambient_from_radial, AmbientJet, FieldJet};
use crate::mesh::MeridianMesh;
use crate::profile::{sphere_volume, WarpingProfile};
use crate::quadrature;
use crate::radial::RadialSolution;
use crate::solver::{solve_serrin, solve_warped_torsion, ScalarField, SolverOptions};
use crate::source::SourceSpec;

/// The four L¹ components of the Serrin deficit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SerrinDeficit {
    pub epsilon: f64,
    pub neumann: f64,
    pub source: f64,
    pub primitive: f64,
    pub second_primitive: f64,
    pub r_constant: f64,
}

/// `ε = ‖f_ν - R‖₁,∂Ω + ‖φ-1‖₁,Ω + ‖Φ - fφ‖₁,Ω + ‖fΦ - Ψ - ½f²‖₁,Ω` together with `R`.
pub fn serrin_deficit(
    sampling: &Sampling,
    profile: &WarpingProfile,
    field: &SampledField,
    source: &SourceSpec,
) -> SerrinDeficit {
    let v = |r: f64| profile.jet(r).d1;
    let volume = |g: &(dyn Fn(f64) -> f64 + Sync)| -> f64 {
        let terms: Vec<f64> =
            sampling.volume.par_iter().zip(&field.volume).map(|(p, j)| p.weight * v(p.point.r) * g(j.f)).collect();
        terms.iter().sum()
    };
    let r_constant = volume(&|f| source.phi(f)) / sampling.surface.integrate(|b| v(b.r));
    let neumann = sampling
        .surface
        .nodes
        .iter()
        .zip(&field.boundary)
        .map(|(b, j)| b.weight * (j.directional([b.nu_r, b.nu_s]) - r_constant).abs())
        .sum();
    let source_part = volume(&|f| (source.phi(f) - 1.0).abs());
    let primitive = volume(&|f| (source.big_phi(f) - f * source.phi(f)).abs());
    let second_primitive = volume(&|f| (f * source.big_phi(f) - source.psi(f) - 0.5 * f * f).abs());
    SerrinDeficit {
        epsilon: neumann + source_part + primitive + second_primitive,
        neumann,
        source: source_part,
        primitive,
        second_primitive,
        r_constant,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HkDeficit {
    /// `∫_M (V/H₁ - ⟨X, ν⟩)`.
    pub deficit: f64,
    pub delta: f64,
    pub weighted_inverse_mean: f64,
    pub support_integral: f64,
    /// `(n+1)∫_Ω V + ϑ(0)^{n+1}|Sⁿ|`, which equals `∫_M ⟨X, ν⟩` by the divergence theorem.
    pub support_from_volume: f64,
    pub min_h1: f64,
}

/// Heintze–Karcher deficit of `M`.
pub fn hk_deficit(surface: &BoundarySurface, domain: &MeridianDomain, panels: usize) -> Result<HkDeficit> {
    let profile = domain.profile();
    let min_h1 = surface.nodes.iter().map(|b| b.h1).fold(f64::INFINITY, f64::min);
    if !(min_h1 > 0.0) {
        return Err(Error::NotMeanConvex(min_h1));
    }
    let weighted_inverse_mean = surface.integrate(|b| profile.jet(b.r).d1 / b.h1);
    let support_integral = surface.integrate(|b| b.support);
    Ok(HkDeficit {
        deficit: weighted_inverse_mean - support_integral,
        delta: weighted_inverse_mean / support_integral - 1.0,
        weighted_inverse_mean,
        support_integral,
        support_from_volume: enclosed_flux(domain, panels),
        min_h1,
    })
}

/// `(n+1)∫_Ω V + ϑ(0)^{n+1}|Sⁿ|`.
fn enclosed_flux(domain: &MeridianDomain, panels: usize) -> f64 {
    let profile = domain.profile();
    let n = profile.n();
    (n as f64 + 1.0) * integral_of_v(domain, panels)
        + profile.theta_at_origin().powi(n as i32 + 1) * sphere_volume(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CmcDeficit {
    pub deficit: f64,
    /// The constant `𝓗` the mean curvature is compared against.
    pub reference: f64,
}

/// `‖H₁ - 𝓗‖₁,M` with `𝓗 = ∫_M V / ((n+1)∫_Ω V + ϑ(0)^{n+1}|Sⁿ|)`.
pub fn cmc_deficit(surface: &BoundarySurface, domain: &MeridianDomain, panels: usize) -> CmcDeficit {
    let profile = domain.profile();
    let reference = surface.integrate(|b| profile.jet(b.r).d1) / enclosed_flux(domain, panels);
    CmcDeficit { deficit: surface.integrate(|b| (b.h1 - reference).abs()), reference }
}

/// Which traceless energy to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EnergyMode {
    /// `∫_Ω V(-f)|∇̊²f|²`.
    Serrin,
    /// `∫_Ω V|∇̊²f - (∇̊²V/V) f|²`.
    Warped,
    /// The warped integrand restricted to `{r ≥ r_min}`.
    WarpedRegion { r_min: f64 },
}

/// `∇²f - f ∇²V/V`, using the closed forms `ϑ'''/ϑ'` and `ϑ''/ϑ` of the eigenvalues of `∇²V/V`.
pub fn warped_combination(profile: &WarpingProfile, j: &AmbientJet) -> AmbientJet {
    let p = profile.jet(j.r);
    AmbientJet {
        h_rr: j.h_rr - j.f * p.v3_over_v1,
        h_ss: j.h_ss - j.f * p.d2_over_theta,
        hoop: j.hoop - j.f * p.d2_over_theta,
        ..*j
    }
}

/// `|∇̊²V/V|` at radius `r`.
pub fn potential_traceless_norm(profile: &WarpingProfile, r: f64) -> f64 {
    let p = profile.jet(r);
    let n = profile.n() as f64;
    (n / (n + 1.0)).sqrt() * (p.v3_over_v1 - p.d2_over_theta).abs()
}

pub fn traceless_energy(sampling: &Sampling, profile: &WarpingProfile, field: &SampledField, mode: EnergyMode) -> f64 {
    sampling
        .volume
        .par_iter()
        .zip(&field.volume)
        .map(|(p, j)| {
            let v = profile.jet(p.point.r).d1;
            let integrand = match mode {
                EnergyMode::Serrin => -j.f * j.traceless_hess_sq(),
                EnergyMode::Warped => warped_combination(profile, j).traceless_hess_sq(),
                EnergyMode::WarpedRegion { r_min } => {
                    if p.point.r >= r_min {
                        warped_combination(profile, j).traceless_hess_sq()
                    } else {
                        0.0
                    }
                }
            };
            p.weight * v * integrand
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// `‖Å‖²₂,M`.
pub fn ring_a_norm(surface: &BoundarySurface) -> f64 {
    surface.traceless_norm_sq()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graphicality {
    /// `min_M ⟨∂_r, ν⟩`.
    pub min_radial_cos: f64,
    /// `∫_M |∂_r^T|² ⟨∂_r, ν⟩²`.
    pub tangential_energy: f64,
    /// Whether `min_M ⟨∂_r, ν⟩ ≥ 1/4`.
    pub quarter_bound: bool,
    /// Largest pointwise defect of `1 - ⟨∂_r,ν⟩² = ϑ⁻²u'²/(1 + ϑ⁻²u'²)`.
    pub identity_residual: f64,
}

pub fn graphicality(surface: &BoundarySurface, profile: &WarpingProfile) -> Graphicality {
    let min_radial_cos = surface.nodes.iter().map(|b| b.radial_cos()).fold(f64::INFINITY, f64::min);
    let identity_residual = surface
        .nodes
        .iter()
        .map(|b| {
            let q = (b.du / profile.jet(b.r).theta).powi(2);
            ((1.0 - b.nu_r * b.nu_r) - q / (1.0 + q)).abs()
        })
        .fold(0.0, f64::max);
    Graphicality {
        min_radial_cos,
        tangential_energy: surface.integrate(|b| b.radial_tangent_sq() * b.nu_r * b.nu_r),
        quarter_bound: min_radial_cos >= 0.25,
        identity_residual,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceDistance {
    /// Hausdorff distance to the nearest slice, measured along radial geodesics.
    pub distance: f64,
    pub best_radius: f64,
    pub mean: f64,
    /// `‖u - ū‖²₂` over `Sⁿ`.
    pub oscillation_sq: f64,
    /// `‖∇^σ u‖²₂` over `Sⁿ`.
    pub gradient_sq: f64,
    /// `n ‖u - ū‖² / ‖∇^σ u‖²`, at most 1 by the Poincaré inequality.
    pub poincare_ratio: f64,
}

pub fn slice_distance(domain: &MeridianDomain) -> Result<SliceDistance> {
    if domain.min_u() <= 0.0 {
        return Err(Error::NotGraphical);
    }
    let n = domain.n();
    let area = sphere_volume(n - 1);
    let rule = quadrature::composite(0.0, PI, 32, 16);
    let measure = |s: f64| area * s.sin().powi(n as i32 - 1);
    let total: f64 = rule.iter().map(|(s, w)| w * measure(*s)).sum();
    let mean = rule.iter().map(|(s, w)| w * measure(*s) * domain.u(*s)).sum::<f64>() / total;
    let oscillation_sq: f64 = rule.iter().map(|(s, w)| w * measure(*s) * (domain.u(*s) - mean).powi(2)).sum();
    let gradient_sq: f64 = rule.iter().map(|(s, w)| w * measure(*s) * domain.graph(*s).du.powi(2)).sum();
    let (lo, hi) = (domain.min_u(), domain.max_u());
    Ok(SliceDistance {
        distance: 0.5 * (hi - lo),
        best_radius: 0.5 * (hi + lo),
        mean,
        oscillation_sq,
        gradient_sq,
        poincare_ratio: if gradient_sq > 0.0 { n as f64 * oscillation_sq / gradient_sq } else { 0.0 },
    })
}

/// Every deficit and closeness measure of one configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    pub serrin: Option<SerrinDeficit>,
    pub hk: Option<HkDeficit>,
    pub cmc: Option<CmcDeficit>,
    pub energy_serrin: Option<f64>,
    pub energy_warped: Option<f64>,
    pub ring_a_norm: f64,
    pub graphicality: Option<Graphicality>,
    pub slice: Option<SliceDistance>,
    /// `n/((n+1)²(1+δ)) ∫_M (V/H₁ - ⟨X,ν⟩)`, an upper bound for `E_warped`.
    pub hk_chain_bound: Option<f64>,
    /// `n ∫_M V(𝓗 - H₁) f_ν²`, an upper bound for `E_warped`.
    pub cmc_chain_bound: Option<f64>,
}

impl DeficitReport {
    /// Boundary-only quantities; the HK part is left empty when `M` is not mean convex.
    pub fn geometric(domain: &MeridianDomain, surface: &BoundarySurface, panels: usize) -> Self {
        let n = domain.n() as f64;
        let hk = hk_deficit(surface, domain, panels).ok();
        DeficitReport {
            hk,
            cmc: Some(cmc_deficit(surface, domain, panels)),
            ring_a_norm: ring_a_norm(surface),
            graphicality: Some(graphicality(surface, domain.profile())),
            slice: slice_distance(domain).ok(),
            hk_chain_bound: hk.map(|h| n / ((n + 1.0).powi(2) * (1.0 + h.delta)) * h.deficit),
            ..Default::default()
        }
    }

    pub fn with_serrin(
        mut self,
        sampling: &Sampling,
        profile: &WarpingProfile,
        field: &SampledField,
        source: &SourceSpec,
    ) -> Self {
        self.serrin = Some(serrin_deficit(sampling, profile, field, source));
        self.energy_serrin = Some(traceless_energy(sampling, profile, field, EnergyMode::Serrin));
        self
    }

    pub fn with_warped(mut self, sampling: &Sampling, profile: &WarpingProfile, field: &SampledField) -> Self {
        self.energy_warped = Some(traceless_energy(sampling, profile, field, EnergyMode::Warped));
        if let Some(cmc) = self.cmc {
            let n = profile.n() as f64;
            let bound = sampling
                .surface
                .nodes
                .iter()
                .zip(&field.boundary)
                .map(|(b, j)| {
                    b.weight * profile.jet(b.r).d1 * (cmc.reference - b.h1) * j.directional([b.nu_r, b.nu_s]).powi(2)
                })
                .sum::<f64>();
            self.cmc_chain_bound = Some(n * bound);
        }
        self
    }

    /// Largest of the deficits that are present.
    pub fn max_deficit(&self) -> f64 {
        let mut out = self.ring_a_norm.abs();
        if let Some(s) = self.serrin {
            out = out.max(s.neumann).max(s.source).max(s.primitive).max(s.second_primitive);
        }
        if let Some(h) = self.hk {
            out = out.max(h.deficit.abs());
        }
        if let Some(c) = self.cmc {
            out = out.max(c.deficit);
        }
        if let Some(sl) = self.slice {
            out = out.max(sl.distance);
        }
        out
    }
}

/// Data driving the flow at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowSample {
    /// Value and gradient of the field itself.
    pub jet: AmbientJet,
    /// Orthonormal components of the flow direction, a continuous approximation of `∇f`.
    pub direction: [f64; 2],
}

/// A field that can drive the level-set flow `∂_t F = -∇f/|∇f|²`.
///
/// The velocity used is `-d/⟨∇f, d⟩` for the supplied direction `d`. It equals the flow above
/// when `d = ∇f`, and in general still satisfies `d/dt f(F) = -1`; a continuous `d` avoids
/// trajectories sliding along element edges where a piecewise gradient jumps.
pub trait FlowSource: Sync {
    fn profile(&self) -> &WarpingProfile;
    /// `None` outside the field's domain.
    fn flow_sample(&self, r: f64, s: f64) -> Option<FlowSample>;
    /// Points of `M` where trajectories start, ordered by angle.
    fn start_points(&self) -> Vec<[f64; 2]>;
    /// Bound for the operator norm of `∇²f` over the domain.
    fn hess_sup(&self) -> f64;
}

impl FlowSource for ScalarField {
    fn profile(&self) -> &WarpingProfile {
        ScalarField::profile(self)
    }

    fn flow_sample(&self, r: f64, s: f64) -> Option<FlowSample> {
        let cell = self.mesh().locate(self.mesh().chart().from_polar(r, s), 1e-9)?;
        let smooth = self.cell_jet(cell);
        Some(FlowSample { jet: AmbientJet { r, s, ..self.fe_jet(cell) }, direction: [smooth.grad_r, smooth.grad_s] })
    }

    fn start_points(&self) -> Vec<[f64; 2]> {
        let mesh = self.mesh();
        let mut pts: Vec<[f64; 2]> = (0..mesh.num_nodes())
            .filter(|&v| mesh.kinds[v] == crate::mesh::NodeKind::Boundary)
            .map(|v| {
                let (r, s) = mesh.polar(v);
                [r, s]
            })
            .collect();
        pts.sort_by(|a, b| a[1].total_cmp(&b[1]));
        pts
    }

    fn hess_sup(&self) -> f64 {
        (0..self.mesh().num_nodes()).map(|v| self.node_jet(v).hess_norm()).fold(0.0, f64::max)
    }
}

/// Flow driver for a radial oracle on the ball `{r < R}`.
pub struct RadialFlow<'a> {
    pub solution: &'a RadialSolution,
    pub count: usize,
}

impl FlowSource for RadialFlow<'_> {
    fn profile(&self) -> &WarpingProfile {
        self.solution.profile()
    }

    fn flow_sample(&self, r: f64, s: f64) -> Option<FlowSample> {
        if !(0.0..=self.solution.radius).contains(&r) {
            return None;
        }
        let jet = ambient_from_radial(self.solution.profile(), r, s, self.solution.eval(r));
        Some(FlowSample { jet, direction: [jet.grad_r, jet.grad_s] })
    }

    fn start_points(&self) -> Vec<[f64; 2]> {
        let m = self.count.max(2);
        (0..m).map(|i| [self.solution.radius, PI * i as f64 / (m - 1) as f64]).collect()
    }

    fn hess_sup(&self) -> f64 {
        let r_max = self.solution.radius;
        (0..=400)
            .map(|i| {
                let r = r_max * i as f64 / 400.0;
                ambient_from_radial(self.solution.profile(), r, 0.5, self.solution.eval(r)).hess_norm()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Number of level surfaces returned, equally spaced in `(0, T]`.
    pub levels: usize,
    /// Caller-supplied cap on `T`, e.g. `ε^{1/(2+β)}`.
    pub cap: Option<f64>,
    /// `r₀` of the warped case: adds the cap `min_M|∇f|·r₀/4`, which keeps the flow in `{r ≥ r₀/2}`.
    pub clearance: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { levels: 8, cap: None, clearance: None, rtol: 1e-12, atol: 1e-14 }
    }
}

/// The cap `ε^{1/(2+β)}` (Serrin) or `ε^{1/(1+β)}` (warped) on the flow time.
pub fn epsilon_cap(epsilon: f64, beta: f64, warped: bool) -> f64 {
    let exponent = if warped { 1.0 / (1.0 + beta) } else { 1.0 / (2.0 + beta) };
    epsilon.max(0.0).powf(exponent)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSet {
    pub t: f64,
    /// Flowed points `(r, s)`, one per trajectory.
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSetFlow {
    pub t_max: f64,
    /// `min_M|∇f|² / (4 sup|∇²f|)`.
    pub t_curvature: f64,
    pub min_boundary_gradient: f64,
    pub hess_sup: f64,
    pub levels: Vec<LevelSet>,
    /// `max |f(F(t, ξ)) - f(ξ) + t|` over trajectories and levels.
    pub max_value_error: f64,
    pub min_radius: f64,
    pub min_gradient: f64,
}

struct FlowSystem<'a, S: FlowSource + ?Sized> {
    source: &'a S,
}

/// Reflect an angle into `[0, π]`, returning the sign of `ds` under the reflection.
fn fold_angle(s: f64) -> (f64, f64) {
    if s < 0.0 {
        (-s, -1.0)
    } else if s > PI {
        (2.0 * PI - s, -1.0)
    } else {
        (s, 1.0)
    }
}

impl<S: FlowSource + ?Sized> System<f64, Vector2<f64>> for FlowSystem<'_, S> {
    fn system(&self, _t: f64, y: &Vector2<f64>, dy: &mut Vector2<f64>) {
        let (s, sign) = fold_angle(y[1]);
        match self.source.flow_sample(y[0], s) {
            Some(p) if p.jet.directional(p.direction) > 0.0 => {
                let dot = p.jet.directional(p.direction);
                let theta = self.source.profile().jet(y[0]).theta;
                dy[0] = -p.direction[0] / dot;
                dy[1] = -sign * p.direction[1] / (theta * dot);
            }
            _ => {
                dy[0] = 0.0;
                dy[1] = 0.0;
            }
        }
    }
}

/// Integrate the level-set flow from every start point up to the admissible time `T`.
pub fn level_set_flow<S: FlowSource + ?Sized>(source: &S, opts: &FlowOptions) -> Result<LevelSetFlow> {
    let starts = source.start_points();
    if starts.is_empty() || opts.levels == 0 {
        return Err(Error::EmptyGrid);
    }
    let start_jets: Vec<AmbientJet> = starts
        .iter()
        .map(|p| source.flow_sample(p[0], p[1]).map(|x| x.jet).ok_or(Error::PointOutsideMesh))
        .collect::<Result<_>>()?;
    let min_grad = start_jets.iter().map(|j| j.grad_sq().sqrt()).fold(f64::INFINITY, f64::min);
    if !(min_grad > 0.0) {
        return Err(Error::InvalidParameters("the gradient vanishes on the boundary".into()));
    }
    let hess_sup = source.hess_sup();
    let t_curvature = if hess_sup > 0.0 { min_grad * min_grad / (4.0 * hess_sup) } else { f64::INFINITY };
    let mut t_max = t_curvature;
    if let Some(cap) = opts.cap {
        t_max = t_max.min(cap);
    }
    if let Some(r0) = opts.clearance {
        t_max = t_max.min(min_grad * r0 / 4.0);
    }
    if !(t_max.is_finite() && t_max > 0.0) {
        return Err(Error::InvalidParameters(format!("no admissible flow time (T = {t_max})")));
    }
    let times: Vec<f64> = (1..=opts.levels).map(|k| t_max * k as f64 / opts.levels as f64).collect();
    let floor = 0.5 * min_grad;

    struct Trajectory {
        points: Vec<[f64; 2]>,
        value_error: f64,
        min_radius: f64,
        min_gradient: f64,
    }
    let trajectories: Vec<Trajectory> = starts
        .par_iter()
        .zip(&start_jets)
        .map(|(p, j0)| {
            let mut y = Vector2::new(p[0], p[1]);
            let mut t_prev = 0.0;
            let mut out = Trajectory { points: Vec::new(), value_error: 0.0, min_radius: p[0], min_gradient: f64::INFINITY };
            for &t in &times {
                let mut stepper =
                    Dopri5::new(FlowSystem { source }, t_prev, t, t - t_prev, y, opts.rtol, opts.atol);
                stepper.set_output(ode_solvers::OutputType::Sparse);
                stepper.integrate().map_err(|e| Error::Shooting(e.to_string()))?;
                y = *stepper.y_out().last().ok_or(Error::FlowLeftDomain(t))?;
                let (s, _) = fold_angle(y[1]);
                let j = source.flow_sample(y[0], s).ok_or(Error::FlowLeftDomain(t))?.jet;
                let g = j.grad_sq().sqrt();
                if g < floor {
                    return Err(Error::WeakGradient(t));
                }
                out.value_error = out.value_error.max((j.f - j0.f + t).abs());
                out.min_radius = out.min_radius.min(y[0]);
                out.min_gradient = out.min_gradient.min(g);
                out.points.push([y[0], s]);
                t_prev = t;
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let levels = times
        .iter()
        .enumerate()
        .map(|(k, &t)| LevelSet { t, points: trajectories.iter().map(|tr| tr.points[k]).collect() })
        .collect();
    Ok(LevelSetFlow {
        t_max,
        t_curvature,
        min_boundary_gradient: min_grad,
        hess_sup,
        levels,
        max_value_error: trajectories.iter().map(|t| t.value_error).fold(0.0, f64::max),
        min_radius: trajectories.iter().map(|t| t.min_radius).fold(f64::INFINITY, f64::min),
        min_gradient: trajectories.iter().map(|t| t.min_gradient).fold(f64::INFINITY, f64::min),
    })
}

/// Segments `(r, s)` of the level set `{f = level}` of a finite-element field, from linear
/// interpolation on the four sub-triangles of each quadratic element.
pub fn contour(field: &ScalarField, level: f64) -> Vec<[[f64; 2]; 2]> {
    const SUB: [[usize; 3]; 4] = [[0, 3, 5], [3, 1, 4], [5, 4, 2], [3, 4, 5]];
    let mesh = field.mesh();
    let chart = mesh.chart();
    let mut out = Vec::new();
    for el in &mesh.elements {
        for tri in SUB {
            let p: Vec<[f64; 2]> = tri.iter().map(|&k| mesh.nodes[el[k]]).collect();
            let v: Vec<f64> = tri.iter().map(|&k| field.values[el[k]] - level).collect();
            let mut cut = Vec::with_capacity(2);
            for (a, b) in [(0, 1), (1, 2), (2, 0)] {
                if (v[a] < 0.0) != (v[b] < 0.0) {
                    let w = v[a] / (v[a] - v[b]);
                    let x = [p[a][0] + w * (p[b][0] - p[a][0]), p[a][1] + w * (p[b][1] - p[a][1])];
                    let (r, s) = chart.to_polar(x);
                    cut.push([r, s]);
                }
            }
            if cut.len() == 2 {
                out.push([cut[0], cut[1]]);
            }
        }
    }
    out
}

/// Distance from `p` to the segment `[a, b]` in the metric `dr² + ϑ(r_p)² ds²` frozen at `p`.
fn segment_distance(profile: &WarpingProfile, p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let theta = profile.jet(p[0]).theta;
    let map = |q: [f64; 2]| [q[0], theta * q[1]];
    let (p, a, b) = (map(p), map(a), map(b));
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let w = if len2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (p[0] - a[0] - w * d[0]).hypot(p[1] - a[1] - w * d[1])
}

/// Two-sided Hausdorff distance between a flowed level set (polyline ordered by angle) and
/// contour segments of the same level.
pub fn level_set_hausdorff(profile: &WarpingProfile, flowed: &[[f64; 2]], segments: &[[[f64; 2]; 2]]) -> f64 {
    if flowed.is_empty() || segments.is_empty() {
        return f64::INFINITY;
    }
    let to_contour = flowed
        .par_iter()
        .map(|p| segments.iter().map(|sg| segment_distance(profile, *p, sg[0], sg[1])).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max);
    let polyline: Vec<[[f64; 2]; 2]> = if flowed.len() == 1 {
        vec![[flowed[0], flowed[0]]]
    } else {
        flowed.windows(2).map(|w| [w[0], w[1]]).collect()
    };
    let to_flow = segments
        .par_iter()
        .flat_map_iter(|sg| sg.iter().copied())
        .map(|p| polyline.iter().map(|sg| segment_distance(profile, p, sg[0], sg[1])).fold(f64::INFINITY, f64::min))
        .reduce(|| 0.0, f64::max);
    to_contour.max(to_flow)
}

/// Hausdorff distance between flowed and contoured level sets at every flow level.
pub fn contour_agreement(field: &ScalarField, flow: &LevelSetFlow) -> Vec<f64> {
    let f0 = flow_start_value(field);
    flow.levels
        .iter()
        .map(|l| level_set_hausdorff(field.profile(), &l.points, &contour(field, f0 - l.t)))
        .collect()
}

fn flow_start_value(field: &ScalarField) -> f64 {
    let mesh = field.mesh();
    (0..mesh.num_nodes())
        .find(|&v| mesh.kinds[v] == crate::mesh::NodeKind::Boundary)
        .map_or(0.0, |v| field.values[v])
}

/// `|Å|²` of the level set of `f` through the point of `j`.
pub fn level_traceless_sq(j: &AmbientJet) -> f64 {
    let g = j.grad_sq().sqrt();
    if g == 0.0 {
        return 0.0;
    }
    let nf = j.n as f64;
    let tau = [-j.grad_s / g, j.grad_r / g];
    let k1 = j.hess(tau, tau) / g;
    let k2 = j.hoop / g;
    (nf - 1.0) / nf * (k1 - k2).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceValue {
    pub level: f64,
    /// `∫_{M_s} |Å|²`.
    pub ring_a_norm: f64,
    /// `∫_{M_s} |∇f| |Å|²`, the co-area integrand.
    pub weighted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoareaEstimate {
    pub t_max: f64,
    pub band: [f64; 2],
    pub band_volume: f64,
    /// `∫_band |∇̊²f|²`.
    pub band_integral: f64,
    /// `∫_band |∇f|² |Å_{level}|²`.
    pub coarea_volume: f64,
    /// The same quantity through the co-area formula, integrating slice integrals over levels.
    pub coarea_slices: f64,
    pub slices: Vec<SliceValue>,
    pub best_level: f64,
    pub best_value: f64,
    pub mean_value: f64,
    /// `‖Å‖²₂,M` of the boundary itself.
    pub boundary_value: f64,
    /// `|∫_{M_s}|Å|² - ∫_M|Å|²|` at the best slice.
    pub transfer_error: f64,
    /// Warped case: `2 E_region / min_band V + 2 T² sup|∇̊²V/V|² vol(band)`.
    pub warped_bound: Option<f64>,
    pub band_in_region: Option<bool>,
}

fn slice_integrals(field: &ScalarField, level: f64) -> (f64, f64) {
    let profile = field.profile();
    let n = profile.n() as i32;
    let area = sphere_volume(profile.n() - 1);
    let (gx, gw) = quadrature::gauss_legendre(2);
    let segments = contour(field, level);
    segments
        .par_iter()
        .map(|[a, b]| {
            let mut acc = (0.0, 0.0);
            for (x, w) in gx.iter().zip(&gw) {
                let l = 0.5 * (1.0 + x);
                let (r, s) = (a[0] + l * (b[0] - a[0]), a[1] + l * (b[1] - a[1]));
                let theta = profile.jet(r).theta;
                let dl = (b[0] - a[0]).hypot(theta * (b[1] - a[1]));
                let d_area = 0.5 * w * dl * area * (theta * s.sin()).powi(n - 1);
                let j = field.jet_at(&crate::jet::SamplePoint::new(r, s));
                let q = level_traceless_sq(&j);
                acc.0 += d_area * q;
                acc.1 += d_area * q * j.grad_sq().sqrt();
            }
            acc
        })
        .collect::<Vec<_>>()
        .iter()
        .fold((0.0, 0.0), |x, y| (x.0 + y.0, x.1 + y.1))
}

/// Co-area analysis of the band `{-T < f < -T/2}` below `M`.
///
/// `region` is the `r₀/2` of the warped case; when given, the warped bound of the band integral
/// is evaluated as well.
pub fn coarea_band_estimate(
    field: &ScalarField,
    sampling: &Sampling,
    sampled: &SampledField,
    t_max: f64,
    slices: usize,
    region: Option<f64>,
) -> Result<CoareaEstimate> {
    let profile = field.profile();
    let f0 = flow_start_value(field);
    let (lo, hi) = (f0 - t_max, f0 - 0.5 * t_max);
    let in_band: Vec<usize> = (0..sampling.volume.len())
        .filter(|&i| sampled.volume[i].f > lo && sampled.volume[i].f < hi)
        .collect();
    if in_band.is_empty() || slices == 0 {
        return Err(Error::EmptyBand);
    }
    let sum = |g: &(dyn Fn(&AmbientJet) -> f64 + Sync)| -> f64 {
        in_band.par_iter().map(|&i| sampling.volume[i].weight * g(&sampled.volume[i])).collect::<Vec<f64>>().iter().sum()
    };
    let band_volume = sum(&|_| 1.0);
    let band_integral = sum(&|j| j.traceless_hess_sq());
    let coarea_volume = sum(&|j| j.grad_sq() * level_traceless_sq(j));

    let rule = quadrature::composite(lo, hi, 1, slices);
    let values: Vec<SliceValue> = rule
        .iter()
        .map(|&(level, _)| {
            let (ring, weighted) = slice_integrals(field, level);
            SliceValue { level, ring_a_norm: ring, weighted }
        })
        .collect();
    let coarea_slices = values.iter().zip(&rule).map(|(v, (_, w))| w * v.weighted).sum();
    let mean_value = values.iter().zip(&rule).map(|(v, (_, w))| w * v.ring_a_norm).sum::<f64>() / (hi - lo);
    let best = values
        .iter()
        .min_by(|a, b| a.ring_a_norm.total_cmp(&b.ring_a_norm))
        .copied()
        .ok_or(Error::EmptyBand)?;
    let boundary_value = sampling.surface.traceless_norm_sq();

    let (warped_bound, band_in_region) = match region {
        Some(r_min) => {
            let e_region = traceless_energy(sampling, profile, sampled, EnergyMode::WarpedRegion { r_min });
            let v_min = in_band.iter().map(|&i| profile.jet(sampling.volume[i].point.r).d1).fold(f64::INFINITY, f64::min);
            let d_sup = in_band
                .iter()
                .map(|&i| potential_traceless_norm(profile, sampling.volume[i].point.r))
                .fold(0.0, f64::max);
            let inside = in_band.iter().all(|&i| sampling.volume[i].point.r >= r_min);
            (Some(2.0 * e_region / v_min + 2.0 * t_max * t_max * d_sup * d_sup * band_volume), Some(inside))
        }
        None => (None, None),
    };

    Ok(CoareaEstimate {
        t_max,
        band: [lo, hi],
        band_volume,
        band_integral,
        coarea_volume,
        coarea_slices,
        best_level: best.level,
        best_value: best.ring_a_norm,
        mean_value,
        boundary_value,
        transfer_error: (best.ring_a_norm - boundary_value).abs(),
        slices: values,
        warped_bound,
        band_in_region,
    })
}

/// The problem a sweep solves on each member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SweepKind {
    HeintzeKarcher,
    Cmc,
    Serrin { source: SourceSpec },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub r0: f64,
    /// Perturbation direction: member `t` has boundary `u = r0 + t Σ coeffs[k-1] cos(k s)`.
    pub coeffs: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub kind: SweepKind,
    pub topology: Topology,
    /// Mesh size for the field solve; geometric deficits only when absent.
    pub h: Option<f64>,
    pub panels: usize,
    pub solver: SolverOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    pub report: DeficitReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `log ‖Å‖²` against `log(deficit)`; descriptive only.
    pub exponent_ring: Option<f64>,
    /// Least-squares slope of `log d` against `log(deficit)`.
    pub exponent_distance: Option<f64>,
    pub monotone_deficit: bool,
    pub monotone_ring: bool,
    pub monotone_distance: bool,
}

impl SweepTable {
    /// The deficit the sweep is organised around.
    pub fn primary_deficit(kind: &SweepKind, report: &DeficitReport) -> Option<f64> {
        match kind {
            SweepKind::HeintzeKarcher => report.hk.map(|h| h.deficit),
            SweepKind::Cmc => report.cmc.map(|c| c.deficit),
            SweepKind::Serrin { .. } => report.serrin.map(|s| s.epsilon),
        }
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("t,deficit,ring_a_norm,slice_distance,energy\n");
        for row in &self.rows {
            let energy = row.report.energy_warped.or(row.report.energy_serrin);
            let cell = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
            out.push_str(&format!(
                "{},{},{:.12e},{},{}\n",
                row.t,
                cell(Self::primary_deficit(&self.kind, &row.report)),
                row.report.ring_a_norm,
                cell(row.report.slice.map(|s| s.distance)),
                cell(energy)
            ));
        }
        let cell = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.6}"));
        out.push_str(&format!(
            "# exponent_ring={} exponent_distance={}\n",
            cell(self.exponent_ring),
            cell(self.exponent_distance)
        ));
        out
    }
}

/// Least-squares slope of `log y` against `log x` over pairs with both entries positive.
pub fn loglog_slope(pairs: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        pairs.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

fn strictly_increasing(values: &[Option<f64>]) -> bool {
    values.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b > a))
}

fn sweep_member(profile: &Arc<WarpingProfile>, cfg: &SweepConfig, t: f64) -> Result<DeficitReport> {
    let spec = BoundarySpec::CosineSeries { r0: cfg.r0, coeffs: cfg.coeffs.iter().map(|c| c * t).collect() };
    let domain = build_domain(profile.clone(), spec, cfg.topology)?;
    let surface = crate::domain::boundary_geometry(&domain, cfg.panels);
    let mut report = DeficitReport::geometric(&domain, &surface, cfg.panels);
    if matches!(cfg.kind, SweepKind::HeintzeKarcher) && report.hk.is_none() {
        return Err(hk_deficit(&surface, &domain, cfg.panels).unwrap_err());
    }
    let Some(h) = cfg.h else {
        if let SweepKind::Serrin { .. } = cfg.kind {
            return Err(Error::InvalidParameters("a Serrin sweep needs a mesh size".into()));
        }
        return Ok(report);
    };
    let mesh = Arc::new(MeridianMesh::build(Arc::new(domain), h)?);
    let sampling = Sampling::from_mesh(&mesh, cfg.panels);
    match &cfg.kind {
        SweepKind::Serrin { source } => {
            let field = solve_serrin(mesh, source, &cfg.solver)?;
            let sampled = sampling.sample(&field);
            report = report.with_serrin(&sampling, profile, &sampled, source);
        }
        SweepKind::HeintzeKarcher | SweepKind::Cmc => {
            let field = solve_warped_torsion(mesh, &cfg.solver)?;
            let sampled = sampling.sample(&field);
            report = report.with_warped(&sampling, profile, &sampled);
        }
    }
    Ok(report)
}

/// Evaluate every member of the family in parallel and summarise the trend.
pub fn stability_sweep(profile: Arc<WarpingProfile>, cfg: &SweepConfig) -> Result<SweepTable> {
    if cfg.amplitudes.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut amplitudes = cfg.amplitudes.clone();
    amplitudes.sort_by(f64::total_cmp);
    let rows: Vec<SweepRow> = amplitudes
        .par_iter()
        .map(|&t| sweep_member(&profile, cfg, t).map(|report| SweepRow { t, report }))
        .collect::<Result<_>>()?;
    let deficits: Vec<Option<f64>> = rows.iter().map(|r| SweepTable::primary_deficit(&cfg.kind, &r.report)).collect();
    let rings: Vec<Option<f64>> = rows.iter().map(|r| Some(r.report.ring_a_norm)).collect();
    let distances: Vec<Option<f64>> = rows.iter().map(|r| r.report.slice.map(|s| s.distance)).collect();
    let pairs = |ys: &[Option<f64>]| -> Vec<(f64, f64)> {
        rows.iter()
            .zip(deficits.iter().zip(ys))
            .filter(|(r, _)| r.t > 0.0)
            .filter_map(|(_, (x, y))| Some(((*x)?, (*y)?)))
            .collect()
    };
    Ok(SweepTable {
        kind: cfg.kind.clone(),
        exponent_ring: loglog_slope(&pairs(&rings)),
        exponent_distance: loglog_slope(&pairs(&distances)),
        monotone_deficit: strictly_increasing(&deficits),
        monotone_ring: strictly_increasing(&rings),
        monotone_distance: strictly_increasing(&distances),
        rows,
    })
}
