//! Pointwise first and second ambient derivatives of axisymmetric functions.
//!
//! Components are taken in the orthonormal frame `(∂_r, ŝ, e_hoop)` with `ŝ = ϑ⁻¹∂_s` and
//! `e_hoop` any unit vector tangent to the `Sⁿ⁻¹` orbits. By symmetry the Hessian is block
//! diagonal: a 2×2 meridian block plus an `(n-1)`-fold hoop eigenvalue.

use crate::mesh::{CellRef, Chart};
use crate::profile::WarpingProfile;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AmbientJet {
    pub n: usize,
    pub r: f64,
    pub s: f64,
    pub f: f64,
    pub grad_r: f64,
    pub grad_s: f64,
    pub h_rr: f64,
    pub h_rs: f64,
    pub h_ss: f64,
    pub hoop: f64,
}

impl AmbientJet {
    pub fn grad_sq(&self) -> f64 {
        self.grad_r * self.grad_r + self.grad_s * self.grad_s
    }

    pub fn laplacian(&self) -> f64 {
        self.h_rr + self.h_ss + (self.n as f64 - 1.0) * self.hoop
    }

    /// `|∇²f|²`.
    pub fn hess_sq(&self) -> f64 {
        self.h_rr * self.h_rr
            + 2.0 * self.h_rs * self.h_rs
            + self.h_ss * self.h_ss
            + (self.n as f64 - 1.0) * self.hoop * self.hoop
    }

    /// `|∇²f - (Δf/(n+1)) ḡ|²`.
    pub fn traceless_hess_sq(&self) -> f64 {
        let lap = self.laplacian();
        self.hess_sq() - lap * lap / (self.n as f64 + 1.0)
    }

    /// `⟨∇f, a⟩` for a meridian vector with orthonormal components `a`.
    pub fn directional(&self, a: [f64; 2]) -> f64 {
        self.grad_r * a[0] + self.grad_s * a[1]
    }

    /// `∇²f(a, b)` for meridian vectors with orthonormal components.
    pub fn hess(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        a[0] * (self.h_rr * b[0] + self.h_rs * b[1]) + a[1] * (self.h_rs * b[0] + self.h_ss * b[1])
    }

    /// `∂_s f` in the coordinate sense.
    pub fn f_s(&self, theta: f64) -> f64 {
        self.grad_s * theta
    }

    /// Largest absolute eigenvalue of the Hessian.
    pub fn hess_norm(&self) -> f64 {
        let tr = self.h_rr + self.h_ss;
        let det = self.h_rr * self.h_ss - self.h_rs * self.h_rs;
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        (0.5 * tr + disc).abs().max((0.5 * tr - disc).abs()).max(self.hoop.abs())
    }
}

/// Chart derivatives `[f, f_a, f_b, f_aa, f_ab, f_bb, q]` where `(a, b)` are the chart
/// coordinates and `q` is `f_s / tan s` (polar) or `f_y / y` (Cartesian), continued by
/// `f_ss` resp. `f_yy` on the axis.
pub type ChartJet = [f64; 7];

/// Convert chart derivatives to the ambient orthonormal frame.
pub fn ambient_from_chart(chart: Chart, profile: &WarpingProfile, x: [f64; 2], c: &ChartJet) -> AmbientJet {
    let n = profile.n();
    let (r, s) = chart.to_polar(x);
    let j = profile.jet(r);
    match chart {
        Chart::Polar => {
            let t = j.theta;
            let lg = j.d1 / t;
            AmbientJet {
                n,
                r,
                s,
                f: c[0],
                grad_r: c[1],
                grad_s: c[2] / t,
                h_rr: c[3],
                h_rs: (c[4] - lg * c[2]) / t,
                h_ss: c[5] / (t * t) + lg * c[1],
                hoop: lg * c[1] + c[6] / (t * t),
            }
        }
        Chart::Cartesian => {
            let (sn, cs) = s.sin_cos();
            let er = [cs, sn];
            let et = [-sn, cs];
            let d = [[c[3], c[4]], [c[4], c[5]]];
            let quad = |a: [f64; 2], b: [f64; 2]| {
                a[0] * (d[0][0] * b[0] + d[0][1] * b[1]) + a[1] * (d[1][0] * b[0] + d[1][1] * b[1])
            };
            let f_r = er[0] * c[1] + er[1] * c[2];
            let f_t = et[0] * c[1] + et[1] * c[2];
            // c1 = ϑ'/ϑ - r/ϑ² and c2 = (rϑ' - ϑ)/ϑ², expanded near the origin where ϑ'(0) = 1
            let (q, c1, c2) = if r < 1e-3 {
                let q = if r == 0.0 { 1.0 } else { r / j.theta };
                let c = r * j.v3_over_v1 / 3.0;
                (q, 2.0 * c, c)
            } else {
                let t2 = j.theta * j.theta;
                (r / j.theta, j.d1 / j.theta - r / t2, (r * j.d1 - j.theta) / t2)
            };
            AmbientJet {
                n,
                r,
                s,
                f: c[0],
                grad_r: f_r,
                grad_s: q * f_t,
                h_rr: quad(er, er),
                h_rs: q * quad(er, et) - c2 * f_t,
                h_ss: c1 * f_r + q * q * quad(et, et),
                hoop: c1 * f_r + q * q * c[6],
            }
        }
    }
}

/// Ambient jet of a radial function `g(r)` from `g, g', g''`.
pub fn ambient_from_radial(profile: &WarpingProfile, r: f64, s: f64, g: [f64; 3]) -> AmbientJet {
    let j = profile.jet(r);
    let tangential = if j.theta.abs() < 1e-300 { g[2] } else { j.d1 / j.theta * g[1] };
    AmbientJet {
        n: profile.n(),
        r,
        s,
        f: g[0],
        grad_r: g[1],
        grad_s: 0.0,
        h_rr: g[2],
        h_rs: 0.0,
        h_ss: tangential,
        hoop: tangential,
    }
}

/// A point at which a field is sampled, optionally with its mesh location.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplePoint {
    pub r: f64,
    pub s: f64,
    pub cell: Option<CellRef>,
}

impl SamplePoint {
    pub fn new(r: f64, s: f64) -> Self {
        Self { r, s, cell: None }
    }
}

/// Anything that can report value, gradient and Hessian at a point.
pub trait FieldJet: Sync {
    fn jet_at(&self, p: &SamplePoint) -> AmbientJet;
}

/// A field given in closed form.
pub struct AnalyticField<F: Fn(f64, f64) -> AmbientJet + Sync> {
    pub eval: F,
}

impl<F: Fn(f64, f64) -> AmbientJet + Sync> FieldJet for AnalyticField<F> {
    fn jet_at(&self, p: &SamplePoint) -> AmbientJet {
        (self.eval)(p.r, p.s)
    }
}

/// Jet of the potential `V = ϑ'`.
pub fn potential_jet(profile: &WarpingProfile, r: f64, s: f64) -> AmbientJet {
    let j = profile.jet(r);
    let tangential = j.d1 * j.d2_over_theta;
    AmbientJet {
        n: profile.n(),
        r,
        s,
        f: j.d1,
        grad_r: j.d2,
        grad_s: 0.0,
        h_rr: j.d3,
        h_rs: 0.0,
        h_ss: tangential,
        hoop: tangential,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{make_profile, ProfileKind, ProfileSpec};
    use approx::assert_relative_eq;

    /// Chart jet of `F(x, y) = x² + 3y² + x y²` (axisymmetric: even in `y`).
    fn cart_jet(x: f64, y: f64) -> ChartJet {
        let q = 6.0 + 2.0 * x;
        [x * x + 3.0 * y * y + x * y * y, 2.0 * x + y * y, 6.0 * y + 2.0 * x * y, 2.0, 2.0 * y, 6.0 + 2.0 * x, q]
    }

    #[test]
    fn cartesian_and_polar_charts_agree_in_euclidean_space() {
        let p = make_profile(&ProfileSpec::new(ProfileKind::Euclidean, 3)).unwrap();
        for &(r, s) in &[(0.7, 0.3), (1.1, 2.0), (0.4, 1.2)] {
            let (x, y) = (r * f64::cos(s), r * f64::sin(s));
            let a = ambient_from_chart(Chart::Cartesian, &p, [x, y], &cart_jet(x, y));
            // polar derivatives of the same function by the chain rule
            let c = cart_jet(x, y);
            let (sn, cs) = (s.sin(), s.cos());
            let f_r = cs * c[1] + sn * c[2];
            let f_s = -r * sn * c[1] + r * cs * c[2];
            let f_rr = cs * cs * c[3] + 2.0 * cs * sn * c[4] + sn * sn * c[5];
            let f_rs = (-sn * c[1] + cs * c[2]) + r * (-cs * sn * c[3] + (cs * cs - sn * sn) * c[4] + cs * sn * c[5]);
            let f_ss = r * r * (sn * sn * c[3] - 2.0 * sn * cs * c[4] + cs * cs * c[5]) - r * f_r;
            let pj = [c[0], f_r, f_s, f_rr, f_rs, f_ss, f_s * cs / sn];
            let b = ambient_from_chart(Chart::Polar, &p, [r, s], &pj);
            for (u, v) in [(a.grad_r, b.grad_r), (a.grad_s, b.grad_s), (a.h_rr, b.h_rr), (a.h_rs, b.h_rs)] {
                assert_relative_eq!(u, v, epsilon = 1e-12);
            }
            assert_relative_eq!(a.h_ss, b.h_ss, epsilon = 1e-12);
            assert_relative_eq!(a.hoop, b.hoop, epsilon = 1e-12);
            // Euclidean Laplacian of x² + 3y² + xy² in ℝ⁴ with y the radial coordinate of ℝ³
            let lap = 2.0 + (6.0 + 2.0 * x) + 2.0 * (6.0 + 2.0 * x);
            assert_relative_eq!(a.laplacian(), lap, max_relative = 1e-12);
        }
    }

    #[test]
    fn cartesian_chart_in_curved_space() {
        // F(x, y) = x + x² + y² in the Cartesian chart of hyperbolic space, compared with the
        // polar chart derivatives of f(r, s) = r cos s + r²
        let p = make_profile(&ProfileSpec::new(ProfileKind::SpaceformHyperbolic, 2)).unwrap();
        for &(r, s) in &[(0.7, 0.3), (1.3, 2.0), (2e-4, 1.0), (0.05, 0.0)] {
            let (x, y) = (r * f64::cos(s), r * f64::sin(s));
            let c = [x + x * x + y * y, 1.0 + 2.0 * x, 2.0 * y, 2.0, 0.0, 2.0, 2.0];
            let a = ambient_from_chart(Chart::Cartesian, &p, [x, y], &c);
            let (sn, cs) = s.sin_cos();
            let cot_term = if s == 0.0 { -r } else { -r * sn * cs / sn };
            let pj = [c[0], cs + 2.0 * r, -r * sn, 2.0, -sn, -r * cs, cot_term];
            let b = ambient_from_chart(Chart::Polar, &p, [r, s], &pj);
            for (u, v) in [(a.grad_r, b.grad_r), (a.grad_s, b.grad_s), (a.h_rr, b.h_rr), (a.h_rs, b.h_rs)] {
                assert_relative_eq!(u, v, epsilon = 1e-8);
            }
            assert_relative_eq!(a.h_ss, b.h_ss, epsilon = 1e-8);
            assert_relative_eq!(a.hoop, b.hoop, epsilon = 1e-8);
        }
    }

    #[test]
    fn potential_hessian_in_hyperbolic_space_is_conformal() {
        let p = make_profile(&ProfileSpec::new(ProfileKind::SpaceformHyperbolic, 2)).unwrap();
        for r in [0.0, 1e-9, 0.2, 1.5] {
            let j = potential_jet(&p, r, 0.4);
            // ∇²V = V ḡ when K = -1
            assert_relative_eq!(j.h_rr, j.f, max_relative = 1e-14);
            assert_relative_eq!(j.h_ss, j.f, max_relative = 1e-14);
            assert_relative_eq!(j.hoop, j.f, max_relative = 1e-14);
            assert!(j.traceless_hess_sq().abs() < 1e-13);
        }
    }

    #[test]
    fn radial_jet_at_origin_is_isotropic() {
        let p = make_profile(&ProfileSpec::new(ProfileKind::SpaceformSphere, 2)).unwrap();
        let j = ambient_from_radial(&p, 0.0, 0.0, [1.0, 0.0, 2.0]);
        assert_eq!(j.h_ss, 2.0);
        assert_eq!(j.laplacian(), 6.0);
        assert_eq!(j.hess_norm(), 2.0);
    }
}
