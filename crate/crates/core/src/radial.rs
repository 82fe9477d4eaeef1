//! One-dimensional reference solutions for radially symmetric data.
//!
//! For `f = g(r)` the ambient Laplacian is `g'' + n (ϑ'/ϑ) g'`, so both boundary-value problems
//! reduce to `g'' + n (ϑ'/ϑ) g' = F(r, g)`. Balls are solved by shooting on `g(0)` with a series
//! start at the origin and Newton on the variational equation; slabs over the inner slice are
//! linear and solved by superposition. Integration is classical RK4 on a fine uniform grid.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{ambient_from_radial, AmbientJet, FieldJet, SamplePoint};
use crate::profile::WarpingProfile;
use crate::source::SourceSpec;

#[derive(Clone, Debug, PartialEq)]
pub enum RadialProblem {
    /// `Δf + (n+1)K f = φ(f)` on a ball about the origin of a spaceform, `f(R) = 0`.
    Serrin { curvature: f64, source: SourceSpec },
    /// `Δf - (ΔV/V) f = 1` with `f(R) = 0`, and `f(0) = c₀` when `ϑ(0) > 0`.
    Torsion,
}

/// Inner-slice value `c₀ = -ϑ(0) / ((n+1) ϑ''(0))` of the torsion problem.
pub fn torsion_inner_value(profile: &WarpingProfile) -> f64 {
    let j = profile.jet(0.0);
    -j.theta / ((profile.n() as f64 + 1.0) * j.d2)
}

#[derive(Clone, Debug)]
pub struct RadialSolution {
    profile: Arc<WarpingProfile>,
    problem: RadialProblem,
    pub radius: f64,
    start: f64,
    step: f64,
    /// `(g, g')` at `start + i·step`.
    samples: Vec<[f64; 2]>,
    /// `g''(0)` for the series continuation near the origin of a ball.
    center_curvature: f64,
    /// Set when the solution is not trustworthy: `R ≥ r̄`, a near-resonant homogeneous
    /// solution, or a huge solution.
    pub blow_up: bool,
}

const STEPS: usize = 20_000;

impl RadialSolution {
    fn rhs(&self, r: f64, g: f64) -> f64 {
        rhs(&self.profile, &self.problem, r, g)
    }

    fn deriv(&self, r: f64, y: [f64; 2]) -> [f64; 2] {
        deriv(&self.profile, &self.problem, r, y)
    }

    /// `(g, g', g'')` at radius `r ∈ [0, R]`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        if r < self.start {
            let a = self.samples[0][0] - 0.5 * self.center_curvature * self.start * self.start;
            let b = self.center_curvature;
            return [a + 0.5 * b * r * r, b * r, b];
        }
        let i = (((r - self.start) / self.step).floor() as usize).min(self.samples.len() - 1);
        let r0 = self.start + i as f64 * self.step;
        let y = rk4_step(|t, y| self.deriv(t, y), r0, self.samples[i], r - r0);
        let j = self.profile.jet(r);
        let g2 = self.rhs(r, y[0]) - self.profile.n() as f64 * j.d1 / j.theta * y[1];
        [y[0], y[1], g2]
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r)[0]
    }

    /// Outward normal derivative `g'(R)`.
    pub fn neumann_derivative(&self) -> f64 {
        self.samples[self.samples.len() - 1][1]
    }

    pub fn center_value(&self) -> f64 {
        self.eval(0.0)[0]
    }

    pub fn profile(&self) -> &WarpingProfile {
        &self.profile
    }

    pub fn problem(&self) -> &RadialProblem {
        &self.problem
    }

    pub fn source(&self) -> SourceSpec {
        match &self.problem {
            RadialProblem::Serrin { source, .. } => source.clone(),
            RadialProblem::Torsion => SourceSpec::constant(1.0),
        }
    }
}

impl FieldJet for RadialSolution {
    fn jet_at(&self, p: &SamplePoint) -> AmbientJet {
        ambient_from_radial(&self.profile, p.r, p.s, self.eval(p.r))
    }
}

fn rhs(profile: &WarpingProfile, problem: &RadialProblem, r: f64, g: f64) -> f64 {
    match problem {
        RadialProblem::Serrin { curvature, source } => {
            source.phi(g) - (profile.n() as f64 + 1.0) * curvature * g
        }
        RadialProblem::Torsion => 1.0 + profile.laplace_v_over_v(r) * g,
    }
}

fn deriv(profile: &WarpingProfile, problem: &RadialProblem, r: f64, y: [f64; 2]) -> [f64; 2] {
    let j = profile.jet(r);
    [y[1], rhs(profile, problem, r, y[0]) - profile.n() as f64 * j.d1 / j.theta * y[1]]
}

fn rk4_step<const N: usize>(f: impl Fn(f64, [f64; N]) -> [f64; N], t: f64, y: [f64; N], h: f64) -> [f64; N] {
    if h == 0.0 {
        return y;
    }
    let add = |a: [f64; N], b: [f64; N], c: f64| {
        let mut o = a;
        for i in 0..N {
            o[i] += c * b[i];
        }
        o
    };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, add(y, k1, 0.5 * h));
    let k3 = f(t + 0.5 * h, add(y, k2, 0.5 * h));
    let k4 = f(t + h, add(y, k3, h));
    let mut out = y;
    for i in 0..N {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Solve the radial problem on `[0, R]`.
pub fn radial_oracle(problem: &RadialProblem, profile: Arc<WarpingProfile>, radius: f64) -> Result<RadialSolution> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameters(format!("radius must be positive, got {radius}")));
    }
    if radius > profile.r_bar() + 1e-12 {
        return Err(Error::OutOfDomain { r: radius, r_bar: profile.r_bar() });
    }
    let at_edge = radius >= profile.r_bar() - 1e-12;
    let n = profile.n() as f64;
    if profile.theta_at_origin() == 0.0 {
        // ball: shoot on a = g(0) with the variational equation for ∂g/∂a
        let start = (1e-4 * radius).min(1e-4);
        let step = (radius - start) / STEPS as f64;
        let shoot = |a: f64| -> ([f64; 4], Vec<[f64; 2]>, f64) {
            let b = rhs(&profile, problem, 0.0, a) / (n + 1.0);
            let db = match problem {
                RadialProblem::Serrin { curvature, source } => (source.dphi(a) - (n + 1.0) * curvature) / (n + 1.0),
                RadialProblem::Torsion => profile.laplace_v_over_v(0.0) / (n + 1.0),
            };
            let mut y = [a + 0.5 * b * start * start, b * start, 1.0 + 0.5 * db * start * start, db * start];
            let mut samples = Vec::with_capacity(STEPS + 1);
            samples.push([y[0], y[1]]);
            let f = |r: f64, y: [f64; 4]| {
                let j = profile.jet(r);
                let lg = n * j.d1 / j.theta;
                let dfdg = match problem {
                    RadialProblem::Serrin { curvature, source } => source.dphi(y[0]) - (n + 1.0) * curvature,
                    RadialProblem::Torsion => profile.laplace_v_over_v(r),
                };
                [y[1], rhs(&profile, problem, r, y[0]) - lg * y[1], y[3], dfdg * y[2] - lg * y[3]]
            };
            for i in 0..STEPS {
                y = rk4_step(f, start + i as f64 * step, y, step);
                samples.push([y[0], y[1]]);
            }
            (y, samples, b)
        };
        let mut a = match problem {
            RadialProblem::Serrin { source, .. } => -source.phi(0.0) * radius * radius / (2.0 * (n + 1.0)),
            RadialProblem::Torsion => -radius * radius / (2.0 * (n + 1.0)),
        };
        for iter in 0..60 {
            let (y, samples, b) = shoot(a);
            let scale = samples.iter().fold(1e-300f64, |m, s| m.max(s[0].abs()));
            let resonant = y[2].abs() < 1e-10;
            let converged = y[0].abs() <= 1e-14 * scale.max(1.0);
            if converged || resonant || iter == 59 || !a.is_finite() {
                let blow_up = at_edge || resonant || scale > 1e6 || !a.is_finite();
                if !converged && !blow_up {
                    return Err(Error::Shooting(format!("no convergence, residual {}", y[0])));
                }
                return Ok(RadialSolution {
                    profile: Arc::clone(&profile),
                    problem: problem.clone(),
                    radius,
                    start,
                    step,
                    samples,
                    center_curvature: b,
                    blow_up,
                });
            }
            let mut da = -y[0] / y[2];
            let limit = 10.0 * a.abs().max(radius * radius);
            if da.abs() > limit {
                da = da.signum() * limit;
            }
            a += da;
        }
        unreachable!()
    } else {
        match problem {
            RadialProblem::Torsion => {}
            RadialProblem::Serrin { .. } => {
                return Err(Error::InvalidParameters("the Serrin oracle is defined on spaceform balls".into()))
            }
        }
        let c0 = torsion_inner_value(&profile);
        let step = radius / STEPS as f64;
        let run = |y0: [f64; 2], homogeneous: bool| -> Vec<[f64; 2]> {
            let f = |r: f64, y: [f64; 2]| {
                let mut d = deriv(&profile, problem, r, y);
                if homogeneous {
                    d[1] -= 1.0;
                }
                d
            };
            let mut y = y0;
            let mut out = Vec::with_capacity(STEPS + 1);
            out.push(y);
            for i in 0..STEPS {
                y = rk4_step(f, i as f64 * step, y, step);
                out.push(y);
            }
            out
        };
        let particular = run([c0, 0.0], false);
        let homogeneous = run([0.0, 1.0], true);
        let hr = homogeneous[STEPS][0];
        let alpha = -particular[STEPS][0] / hr;
        let samples: Vec<[f64; 2]> = particular
            .iter()
            .zip(&homogeneous)
            .map(|(p, h)| [p[0] + alpha * h[0], p[1] + alpha * h[1]])
            .collect();
        let scale = samples.iter().fold(0.0f64, |m, s| m.max(s[0].abs()));
        Ok(RadialSolution {
            profile,
            problem: problem.clone(),
            radius,
            start: 0.0,
            step,
            samples,
            center_curvature: 0.0,
            blow_up: at_edge || hr.abs() < 1e-10 || scale > 1e6,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_profile, ProfileKind, ProfileSpec};
    use std::f64::consts::FRAC_PI_2;

    fn spaceform(kind: ProfileKind) -> Arc<WarpingProfile> {
        Arc::new(make_profile(&ProfileSpec::new(kind, 2)).unwrap())
    }

    #[test]
    fn hyperbolic_serrin_matches_closed_form() {
        let p = spaceform(ProfileKind::SpaceformHyperbolic);
        let prob = RadialProblem::Serrin { curvature: -1.0, source: SourceSpec::constant(1.0) };
        let sol = radial_oracle(&prob, p, 1.0).unwrap();
        assert!(!sol.blow_up);
        for i in 0..=50 {
            let r = i as f64 / 50.0;
            let exact = (r.cosh() / 1f64.cosh() - 1.0) / 3.0;
            assert!((sol.value(r) - exact).abs() < 1e-10, "r={r}");
            let g2 = r.cosh() / 1f64.cosh() / 3.0;
            assert!((sol.eval(r)[2] - g2).abs() < 1e-8, "r={r}");
        }
        assert!((sol.neumann_derivative() - 1f64.tanh() / 3.0).abs() < 1e-10);
    }

    #[test]
    fn hemisphere_serrin_matches_closed_form() {
        let p = spaceform(ProfileKind::SpaceformSphere);
        let prob = RadialProblem::Serrin { curvature: 1.0, source: SourceSpec::constant(1.0) };
        let sol = radial_oracle(&prob, p, 0.8).unwrap();
        assert!((sol.neumann_derivative() - 0.8f64.tan() / 3.0).abs() < 1e-10);
    }

    #[test]
    fn hemisphere_edge_is_flagged() {
        let p = spaceform(ProfileKind::SpaceformSphere);
        let prob = RadialProblem::Serrin { curvature: 1.0, source: SourceSpec::constant(1.0) };
        assert!(radial_oracle(&prob, p.clone(), FRAC_PI_2).unwrap().blow_up);
        assert!(!radial_oracle(&prob, p.clone(), 1.0).unwrap().blow_up);
        assert!(radial_oracle(&prob, p, 2.0).is_err());
    }

    #[test]
    fn nonlinear_source_satisfies_the_ode() {
        let p = spaceform(ProfileKind::SpaceformHyperbolic);
        let source = SourceSpec::Polynomial { coeffs: vec![1.0, 0.0, 1.0] };
        let prob = RadialProblem::Serrin { curvature: -1.0, source: source.clone() };
        let sol = radial_oracle(&prob, p.clone(), 1.0).unwrap();
        assert!(sol.value(1.0).abs() < 1e-13);
        for r in [0.1, 0.5, 0.9] {
            let [g, g1, g2] = sol.eval(r);
            let res = g2 + 2.0 / r.tanh() * g1 - 3.0 * g - source.phi(g);
            assert!(res.abs() < 1e-9, "r={r}: {res}");
        }
    }

    #[test]
    fn torsion_slab_boundary_values() {
        let p = Arc::new(make_profile(&ProfileSpec::schwarzschild(0, 0.5, 2)).unwrap());
        assert!((torsion_inner_value(&p) + 2.0 / 3.0).abs() < 1e-12);
        let sol = radial_oracle(&RadialProblem::Torsion, p.clone(), 1.5).unwrap();
        assert!((sol.value(0.0) + 2.0 / 3.0).abs() < 1e-12);
        assert!(sol.value(1.5).abs() < 1e-13);
        assert!(sol.neumann_derivative() > 0.0);
        for i in 1..30 {
            assert!(sol.value(1.5 * i as f64 / 30.0) < 0.0);
        }
    }

    #[test]
    fn tolerance_tightening_is_self_consistent() {
        // halving the step of a single RK4 step from a grid node reproduces the stored sample
        let p = Arc::new(make_profile(&ProfileSpec::schwarzschild(0, 0.5, 2)).unwrap());
        let sol = radial_oracle(&RadialProblem::Torsion, p, 1.5).unwrap();
        let r = 0.7 + 0.3 * sol.step;
        let direct = sol.eval(r);
        let i = ((r - sol.start) / sol.step).floor() as usize;
        let r0 = sol.start + i as f64 * sol.step;
        let half = rk4_step(|t, y| sol.deriv(t, y), r0, sol.samples[i], 0.5 * (r - r0));
        let two = rk4_step(|t, y| sol.deriv(t, y), r0 + 0.5 * (r - r0), half, 0.5 * (r - r0));
        assert!((two[0] - direct[0]).abs() < 1e-14);
    }
}
