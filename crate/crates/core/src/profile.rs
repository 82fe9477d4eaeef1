//! Warping functions of rotationally symmetric metrics `dr² + ϑ(r)² σ` on `[0, r̄) × Sⁿ`.
//!
//! Closed-form kinds (sphere, hyperbolic, Euclidean) are evaluated directly. The black-hole
//! kinds are defined implicitly by `ϑ' = sqrt(P(ϑ))` with `ϑ(0)` the horizon, a simple root
//! of the radicand `P`. Since `ϑ'(0) = 0` the ODE start is degenerate; we substitute
//! `ϑ = ϑ₀ + w²`, for which `r(w) = ∫₀^w 2ω / sqrt(P(ϑ₀ + ω²)) dω` has a smooth integrand,
//! and store `w(r)` as a Chebyshev interpolant. Higher derivatives come from `P` analytically.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Volume of the unit `n`-sphere, `2π^{(n+1)/2} / Γ((n+1)/2)`.
pub fn sphere_volume(n: usize) -> f64 {
    // |S⁰| = 2, |S¹| = 2π, |Sⁿ| = 2π/(n-1) |Sⁿ⁻²|
    let (mut v, start) = if n.is_multiple_of(2) { (2.0, 0) } else { (2.0 * PI, 1) };
    let mut k = start;
    while k < n {
        k += 2;
        v *= 2.0 * PI / (k as f64 - 1.0);
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    SpaceformSphere,
    SpaceformHyperbolic,
    Euclidean,
    Schwarzschild,
    ReissnerNordstrom,
    Tabulated,
}

/// Construction parameters for a [`WarpingProfile`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSpec {
    pub kind: ProfileKind,
    /// Ambient sphere dimension `n` (the manifold has dimension `n + 1`).
    pub n: usize,
    #[serde(default)]
    pub kappa: i32,
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub charge: f64,
    #[serde(default)]
    pub r_bar: Option<f64>,
    /// For implicit kinds: `r̄` is the radius where `ϑ` reaches this value (default `8 ϑ(0)`).
    #[serde(default)]
    pub theta_cap: Option<f64>,
    /// Rows `(r, ϑ, ϑ', ϑ'', ϑ''')` for the tabulated kind.
    #[serde(default)]
    pub table: Option<Vec<[f64; 5]>>,
}

impl ProfileSpec {
    pub fn new(kind: ProfileKind, n: usize) -> Self {
        Self { kind, n, kappa: 0, mass: 0.0, charge: 0.0, r_bar: None, theta_cap: None, table: None }
    }

    pub fn schwarzschild(kappa: i32, mass: f64, n: usize) -> Self {
        Self { kappa, mass, ..Self::new(ProfileKind::Schwarzschild, n) }
    }

    pub fn reissner_nordstrom(kappa: i32, mass: f64, charge: f64, n: usize) -> Self {
        Self { kappa, mass, charge, ..Self::new(ProfileKind::ReissnerNordstrom, n) }
    }

    pub fn with_r_bar(mut self, r_bar: f64) -> Self {
        self.r_bar = Some(r_bar);
        self
    }

    pub fn with_theta_cap(mut self, cap: f64) -> Self {
        self.theta_cap = Some(cap);
        self
    }
}

/// `ϑ` and its derivatives at one radius, plus the ratios that stay finite where `ϑ` or `ϑ'`
/// vanish.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileJet {
    pub theta: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    /// `ϑ'''/ϑ'`, finite at `r = 0` for the implicit kinds.
    pub v3_over_v1: f64,
    /// `ϑ''/ϑ`, finite at `r = 0` when `ϑ(0) = 0`.
    pub d2_over_theta: f64,
}

/// Curvature data of the ambient metric at one radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AmbientCurvature {
    /// Ricci eigenvalue in the `∂_r` direction, `-n ϑ''/ϑ`.
    pub ricci_radial: f64,
    /// Ricci eigenvalue on unit tangential vectors, `(n-1)(1-ϑ'²)/ϑ² - ϑ''/ϑ`.
    pub ricci_tangential: f64,
    /// Coefficient `ϑϑ''` of `σ` in `∇̄²V / V`.
    pub hess_v_spherical: Option<f64>,
    /// Coefficient `ϑ'''/ϑ'` of `dr ⊗ dr` in `∇̄²V / V`.
    pub hess_v_radial: Option<f64>,
    /// `Δ̄V / V = ϑ'''/ϑ' + n ϑ''/ϑ`.
    pub laplace_v_over_v: Option<f64>,
    /// Set when `ϑ' = 0` and the Hessian-of-V coefficients are undefined.
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
struct Chebyshev {
    a: f64,
    b: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    fn fit(a: f64, b: f64, degree: usize, f: impl Fn(f64) -> f64) -> Self {
        let n = degree + 1;
        let values: Vec<f64> = (0..n)
            .map(|j| {
                let x = (PI * (j as f64 + 0.5) / n as f64).cos();
                f(0.5 * (b - a) * x + 0.5 * (b + a))
            })
            .collect();
        let coeffs = (0..n)
            .map(|k| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
                    .sum();
                if k == 0 {
                    s / n as f64
                } else {
                    2.0 * s / n as f64
                }
            })
            .collect();
        Self { a, b, coeffs }
    }

    fn eval(&self, r: f64) -> f64 {
        let x = (2.0 * r - self.a - self.b) / (self.b - self.a);
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in self.coeffs.iter().skip(1).rev() {
            let t = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = t;
        }
        x * b1 - b2 + self.coeffs[0]
    }
}

#[derive(Clone, Debug)]
struct Implicit {
    kappa: f64,
    mass: f64,
    charge: f64,
    n: f64,
    theta0: f64,
    p1_0: f64,
    p2_0: f64,
    w_of_r: Chebyshev,
}

impl Implicit {
    fn radicand(&self, t: f64) -> f64 {
        1.0 + self.kappa * t * t - 2.0 * self.mass * t.powf(1.0 - self.n)
            + self.charge * self.charge * t.powf(2.0 - 2.0 * self.n)
    }

    fn radicand_d1(&self, t: f64) -> f64 {
        let n = self.n;
        2.0 * self.kappa * t + 2.0 * self.mass * (n - 1.0) * t.powf(-n)
            - 2.0 * self.charge * self.charge * (n - 1.0) * t.powf(1.0 - 2.0 * n)
    }

    fn radicand_d2(&self, t: f64) -> f64 {
        let n = self.n;
        2.0 * self.kappa - 2.0 * self.mass * n * (n - 1.0) * t.powf(-n - 1.0)
            + 2.0 * self.charge * self.charge * (n - 1.0) * (2.0 * n - 1.0) * t.powf(-2.0 * n)
    }

    /// `P(ϑ₀ + w²) / w²`, by Taylor expansion near the horizon.
    fn radicand_over_w2(&self, w: f64) -> f64 {
        let d = w * w;
        if d < 1e-6 * self.theta0 {
            self.p1_0 + 0.5 * self.p2_0 * d
        } else {
            self.radicand(self.theta0 + d) / d
        }
    }

    fn r_of_w(&self, w: f64) -> f64 {
        if w == 0.0 {
            return 0.0;
        }
        quadrature::composite(0.0, w, 8, 16)
            .iter()
            .map(|(x, wt)| wt * 2.0 / self.radicand_over_w2(*x).max(1e-300).sqrt())
            .sum()
    }

    fn w_of_r_direct(&self, r: f64) -> f64 {
        let mut w = r * self.p1_0.sqrt() / 2.0;
        for _ in 0..60 {
            let g = 2.0 / self.radicand_over_w2(w).max(1e-300).sqrt();
            let dw = (self.r_of_w(w) - r) / g;
            w -= dw;
            if w < 0.0 {
                w = 0.0;
            }
            if dw.abs() < 1e-15 * (1.0 + w) {
                break;
            }
        }
        w
    }

    fn jet(&self, r: f64) -> ProfileJet {
        let w = if r == 0.0 { 0.0 } else { self.w_of_r.eval(r).abs() };
        let theta = self.theta0 + w * w;
        let d1 = w * self.radicand_over_w2(w).max(0.0).sqrt();
        let d2 = 0.5 * self.radicand_d1(theta);
        let v3_over_v1 = 0.5 * self.radicand_d2(theta);
        ProfileJet { theta, d1, d2, d3: v3_over_v1 * d1, v3_over_v1, d2_over_theta: d2 / theta }
    }
}

#[derive(Clone, Debug)]
struct Table {
    rows: Vec<[f64; 5]>,
}

impl Table {
    fn jet(&self, r: f64) -> ProfileJet {
        let rows = &self.rows;
        let i = match rows.binary_search_by(|row| row[0].partial_cmp(&r).unwrap()) {
            Ok(i) => i.min(rows.len() - 2),
            Err(i) => i.clamp(1, rows.len() - 1) - 1,
        };
        let (lo, hi) = (&rows[i], &rows[i + 1]);
        let h = hi[0] - lo[0];
        let t = (r - lo[0]) / h;
        let hermite = |k: usize| {
            let (y0, y1, m0, m1) = (lo[k], hi[k], lo[k + 1] * h, hi[k + 1] * h);
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                + (t3 - 2.0 * t2 + t) * m0
                + (-2.0 * t3 + 3.0 * t2) * y1
                + (t3 - t2) * m1
        };
        let theta = hermite(1);
        let d1 = hermite(2);
        let d2 = hermite(3);
        let d3 = lo[4] + t * (hi[4] - lo[4]);
        let v3_over_v1 = if d1.abs() > 1e-12 {
            d3 / d1
        } else {
            // ϑ'''/ϑ' → ϑ''''/ϑ'' at a simple zero of ϑ'
            (hi[4] - lo[4]) / h / d2
        };
        let d2_over_theta = if theta.abs() > 1e-12 {
            d2 / theta
        } else {
            // ϑ''/ϑ → ϑ'''/ϑ' at a simple zero of ϑ
            d3 / d1
        };
        ProfileJet { theta, d1, d2, d3, v3_over_v1, d2_over_theta }
    }
}

#[derive(Clone, Debug)]
enum Repr {
    Sin,
    Sinh,
    Linear,
    Implicit(Box<Implicit>),
    Table(Table),
}

/// A warping function `ϑ` on `[0, r̄)`. Immutable after construction.
#[derive(Clone, Debug)]
pub struct WarpingProfile {
    kind: ProfileKind,
    n: usize,
    kappa: i32,
    mass: f64,
    charge: f64,
    r_bar: f64,
    repr: Repr,
}

const DEFAULT_R_BAR: f64 = 8.0;
const CHEBYSHEV_DEGREE: usize = 96;

/// Build a profile from its specification.
pub fn make_profile(spec: &ProfileSpec) -> Result<WarpingProfile> {
    WarpingProfile::new(spec)
}

impl WarpingProfile {
    pub fn new(spec: &ProfileSpec) -> Result<Self> {
        if spec.n == 0 {
            return Err(Error::InvalidParameters("n must be at least 1".into()));
        }
        if let Some(r) = spec.r_bar {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidParameters(format!("r_bar must be positive, got {r}")));
            }
        }
        let base = |repr, r_bar| WarpingProfile {
            kind: spec.kind,
            n: spec.n,
            kappa: spec.kappa,
            mass: spec.mass,
            charge: spec.charge,
            r_bar,
            repr,
        };
        match spec.kind {
            ProfileKind::SpaceformSphere => {
                let r_bar = spec.r_bar.unwrap_or(FRAC_PI_2);
                if r_bar > FRAC_PI_2 + 1e-15 {
                    return Err(Error::InvalidParameters("sphere profile requires r_bar <= pi/2".into()));
                }
                Ok(WarpingProfile { kappa: 1, ..base(Repr::Sin, r_bar) })
            }
            ProfileKind::SpaceformHyperbolic => {
                Ok(WarpingProfile { kappa: -1, ..base(Repr::Sinh, spec.r_bar.unwrap_or(DEFAULT_R_BAR)) })
            }
            ProfileKind::Euclidean => {
                Ok(WarpingProfile { kappa: 0, ..base(Repr::Linear, spec.r_bar.unwrap_or(DEFAULT_R_BAR)) })
            }
            ProfileKind::Schwarzschild | ProfileKind::ReissnerNordstrom => {
                let charge = if spec.kind == ProfileKind::Schwarzschild { 0.0 } else { spec.charge };
                let imp = build_implicit(spec, charge)?;
                let r_bar = imp.1;
                Ok(WarpingProfile { charge, ..base(Repr::Implicit(Box::new(imp.0)), r_bar) })
            }
            ProfileKind::Tabulated => {
                let rows = spec
                    .table
                    .clone()
                    .ok_or_else(|| Error::InvalidParameters("tabulated profile needs a table".into()))?;
                Self::tabulated(spec.n, rows)
            }
        }
    }

    /// A profile interpolating samples `(r, ϑ, ϑ', ϑ'', ϑ''')`; `r̄` is the last sample radius.
    pub fn tabulated(n: usize, rows: Vec<[f64; 5]>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameters("n must be at least 1".into()));
        }
        if rows.len() < 2 {
            return Err(Error::InvalidParameters("table needs at least two rows".into()));
        }
        if rows[0][0] != 0.0 {
            return Err(Error::InvalidParameters("table must start at r = 0".into()));
        }
        for pair in rows.windows(2) {
            if !(pair[1][0] > pair[0][0]) {
                return Err(Error::InvalidParameters("table radii must be strictly increasing".into()));
            }
        }
        if rows.iter().any(|row| row[0] > 0.0 && !(row[1] > 0.0)) {
            return Err(Error::InvalidParameters("tabulated theta must be positive on (0, r_bar)".into()));
        }
        let r_bar = rows[rows.len() - 1][0];
        Ok(WarpingProfile {
            kind: ProfileKind::Tabulated,
            n,
            kappa: 0,
            mass: 0.0,
            charge: 0.0,
            r_bar,
            repr: Repr::Table(Table { rows }),
        })
    }

    pub fn kind(&self) -> ProfileKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> i32 {
        self.kappa
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn r_bar(&self) -> f64 {
        self.r_bar
    }

    /// Sectional curvature for the spaceform kinds.
    pub fn spaceform_curvature(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::SpaceformSphere => Some(1.0),
            ProfileKind::SpaceformHyperbolic => Some(-1.0),
            ProfileKind::Euclidean => Some(0.0),
            _ => None,
        }
    }

    /// `ϑ(0)`: zero for the spaceform kinds, the horizon radius for the implicit kinds.
    pub fn theta_at_origin(&self) -> f64 {
        self.jet(0.0).theta
    }

    /// `ϑ^{(k)}(r)` for `k ∈ {0,1,2,3}`.
    pub fn eval(&self, r: f64, k: usize) -> Result<f64> {
        if k > 3 {
            return Err(Error::BadOrder(k));
        }
        self.check_domain(r)?;
        let j = self.jet(r);
        Ok([j.theta, j.d1, j.d2, j.d3][k])
    }

    fn check_domain(&self, r: f64) -> Result<()> {
        if !(r >= 0.0 && r < self.r_bar) {
            return Err(Error::OutOfDomain { r, r_bar: self.r_bar });
        }
        Ok(())
    }

    /// Unchecked evaluation of all derivatives. Radii outside `[0, r̄)` are extrapolated.
    pub fn jet(&self, r: f64) -> ProfileJet {
        match &self.repr {
            Repr::Sin => {
                let (s, c) = r.sin_cos();
                ProfileJet { theta: s, d1: c, d2: -s, d3: -c, v3_over_v1: -1.0, d2_over_theta: -1.0 }
            }
            Repr::Sinh => {
                let (s, c) = (r.sinh(), r.cosh());
                ProfileJet { theta: s, d1: c, d2: s, d3: c, v3_over_v1: 1.0, d2_over_theta: 1.0 }
            }
            Repr::Linear => {
                ProfileJet { theta: r, d1: 1.0, d2: 0.0, d3: 0.0, v3_over_v1: 0.0, d2_over_theta: 0.0 }
            }
            Repr::Implicit(imp) => imp.jet(r),
            Repr::Table(t) => t.jet(r),
        }
    }

    /// `Δ̄V / V` with `V = ϑ'`.
    pub fn laplace_v_over_v(&self, r: f64) -> f64 {
        let j = self.jet(r);
        j.v3_over_v1 + self.n as f64 * j.d2_over_theta
    }

    /// `ϑ²ϑ'''/ϑ' + (n-2)ϑϑ'' + (n-1)(1-ϑ'²)`: the `σ`-coefficient of
    /// `Δ̄V ḡ/V - ∇̄²V/V + Ric`.
    pub fn laplace_combination(&self, r: f64) -> f64 {
        let j = self.jet(r);
        let n = self.n as f64;
        j.theta * j.theta * j.v3_over_v1 + (n - 2.0) * j.theta * j.d2 + (n - 1.0) * (1.0 - j.d1 * j.d1)
    }

    /// Ambient Ricci and Hessian-of-V data at `r ∈ (0, r̄)`.
    pub fn ambient_curvature(&self, r: f64) -> Result<AmbientCurvature> {
        if !(r > 0.0 && r < self.r_bar) {
            return Err(Error::OutOfDomain { r, r_bar: self.r_bar });
        }
        let j = self.jet(r);
        let n = self.n as f64;
        let ricci_radial = -n * j.d2_over_theta;
        let ricci_tangential = (n - 1.0) * (1.0 - j.d1 * j.d1) / (j.theta * j.theta) - j.d2_over_theta;
        if j.d1 == 0.0 {
            return Ok(AmbientCurvature {
                ricci_radial,
                ricci_tangential,
                hess_v_spherical: None,
                hess_v_radial: None,
                laplace_v_over_v: None,
                degenerate: true,
            });
        }
        let radial = j.d3 / j.d1;
        Ok(AmbientCurvature {
            ricci_radial,
            ricci_tangential,
            hess_v_spherical: Some(j.theta * j.d2),
            hess_v_radial: Some(radial),
            laplace_v_over_v: Some(radial + n * j.d2 / j.theta),
            degenerate: false,
        })
    }

    /// The (H3) quantity `2ϑ''/ϑ - (n-1)(1-ϑ'²)/ϑ²`.
    pub fn h3_quantity(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r < self.r_bar) {
            return Err(Error::OutOfDomain { r, r_bar: self.r_bar });
        }
        let j = self.jet(r);
        let n = self.n as f64;
        Ok(2.0 * j.d2_over_theta - (n - 1.0) * (1.0 - j.d1 * j.d1) / (j.theta * j.theta))
    }

    fn h4_quantity(&self, r: f64) -> f64 {
        let j = self.jet(r);
        j.d2_over_theta + (1.0 - j.d1 * j.d1) / (j.theta * j.theta)
    }

    /// Check (H1)–(H5) on a strictly increasing grid in `(0, r̄)`. `beta1` is the Hölder
    /// exponent used for the (H5) quotient.
    pub fn check_hypotheses(&self, grid: &[f64], beta1: f64) -> Result<HypothesisReport> {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if !(beta1 > 0.0 && beta1 < 1.0) {
            return Err(Error::InvalidParameters(format!("beta1 must lie in (0,1), got {beta1}")));
        }
        for (i, &r) in grid.iter().enumerate() {
            if !(r > 0.0 && r < self.r_bar) {
                return Err(Error::OutOfDomain { r, r_bar: self.r_bar });
            }
            if i > 0 && !(r > grid[i - 1]) {
                return Err(Error::InvalidParameters("grid must be strictly increasing".into()));
            }
        }
        let mut records = Vec::with_capacity(5);

        let j0 = self.jet(0.0);
        let h1 = j0.d1.abs() <= 1e-10 && j0.d2 > 1e-12;
        records.push(HypothesisRecord {
            hypothesis: "H1".into(),
            pass: h1,
            witness_r: 0.0,
            value: if j0.d1.abs() <= 1e-10 { j0.d2 } else { j0.d1 },
        });

        let (i2, v2) = argmin(grid.iter().map(|&r| self.jet(r).d1));
        records.push(HypothesisRecord { hypothesis: "H2".into(), pass: v2 > 0.0, witness_r: grid[i2], value: v2 });

        // Largest drop of q over any ordered pair; refinement can only increase it.
        let q: Vec<f64> = grid.iter().map(|&r| self.h3_quantity(r).unwrap()).collect();
        let scale = q.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut running_max = f64::NEG_INFINITY;
        let (mut worst, mut worst_r) = (f64::NEG_INFINITY, grid[0]);
        for (i, &qi) in q.iter().enumerate() {
            if i > 0 && running_max - qi > worst {
                worst = running_max - qi;
                worst_r = grid[i];
            }
            running_max = running_max.max(qi);
        }
        if q.len() == 1 {
            worst = 0.0;
        }
        records.push(HypothesisRecord {
            hypothesis: "H3".into(),
            pass: worst <= 1e-10 * scale,
            witness_r: worst_r,
            value: worst,
        });

        let (i4, v4) = argmin(grid.iter().map(|&r| self.h4_quantity(r)));
        records.push(HypothesisRecord { hypothesis: "H4".into(), pass: v4 > 0.0, witness_r: grid[i4], value: v4 });

        let mut pts: Vec<f64> = vec![0.0];
        pts.extend(grid.iter().copied());
        let g: Vec<f64> = pts.iter().map(|&r| self.jet(r).v3_over_v1).collect();
        let (mut sup, mut sup_r) = (0.0f64, 0.0);
        for i in 0..pts.len() {
            for k in (i + 1)..pts.len() {
                let quot = (g[k] - g[i]).abs() / (pts[k] - pts[i]).powf(beta1);
                if !(quot <= sup) {
                    sup = quot;
                    sup_r = pts[i];
                }
            }
        }
        records.push(HypothesisRecord {
            hypothesis: "H5".into(),
            pass: sup.is_finite() && sup < HOLDER_CAP,
            witness_r: sup_r,
            value: sup,
        });

        Ok(HypothesisReport { beta1, records })
    }

    /// Sample rows `(r, ϑ, ϑ', ϑ'', ϑ''')` suitable for [`WarpingProfile::tabulated`].
    pub fn sample_table(&self, radii: &[f64]) -> Vec<[f64; 5]> {
        radii
            .iter()
            .map(|&r| {
                let j = self.jet(r);
                [r, j.theta, j.d1, j.d2, j.d3]
            })
            .collect()
    }
}

const HOLDER_CAP: f64 = 1e8;

fn argmin(values: impl Iterator<Item = f64>) -> (usize, f64) {
    values
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) })
}

fn build_implicit(spec: &ProfileSpec, charge: f64) -> Result<(Implicit, f64)> {
    if ![-1, 0, 1].contains(&spec.kappa) {
        return Err(Error::InvalidParameters(format!("kappa must be -1, 0 or 1, got {}", spec.kappa)));
    }
    if !(spec.mass >= 0.0) || !(charge >= 0.0) {
        return Err(Error::InvalidParameters("mass and charge must be non-negative".into()));
    }
    let mut imp = Implicit {
        kappa: spec.kappa as f64,
        mass: spec.mass,
        charge,
        n: spec.n as f64,
        theta0: 0.0,
        p1_0: 0.0,
        p2_0: 0.0,
        w_of_r: Chebyshev { a: 0.0, b: 1.0, coeffs: vec![0.0] },
    };
    let theta0 = horizon(&imp).ok_or(Error::NoHorizon)?;
    imp.theta0 = theta0;
    imp.p1_0 = imp.radicand_d1(theta0);
    imp.p2_0 = imp.radicand_d2(theta0);
    if !(imp.p1_0 > 0.0) {
        return Err(Error::InvalidParameters("degenerate horizon (double root of the radicand)".into()));
    }
    // largest admissible ϑ: the next root above the horizon, if any
    let upper = next_root_above(&imp, theta0);
    let w_limit = |t: f64| (t - theta0).sqrt();
    let r_bar = match spec.r_bar {
        Some(r) => {
            let w_max = upper.map(|u| w_limit(u) * (1.0 - 1e-9));
            if let Some(w) = w_max {
                if imp.r_of_w(w) <= r {
                    return Err(Error::InvalidParameters(format!(
                        "r_bar {r} exceeds the outer root of the radicand"
                    )));
                }
            }
            r
        }
        None => {
            let mut cap = spec.theta_cap.unwrap_or(8.0 * theta0);
            if !(cap > theta0) {
                return Err(Error::InvalidParameters(format!("theta_cap {cap} must exceed theta(0) = {theta0}")));
            }
            if let Some(u) = upper {
                cap = cap.min(theta0 + (u - theta0) * (1.0 - 1e-9));
            }
            imp.r_of_w(w_limit(cap))
        }
    };
    let fitted = Chebyshev::fit(0.0, r_bar, CHEBYSHEV_DEGREE, |r| imp.w_of_r_direct(r));
    imp.w_of_r = fitted;
    Ok((imp, r_bar))
}

/// Largest `ϑ₀ > 0` with `P(ϑ₀) = 0` and `P > 0` just above it.
fn horizon(imp: &Implicit) -> Option<f64> {
    let samples: Vec<f64> = (0..=2400).map(|i| 10f64.powf(-6.0 + 12.0 * i as f64 / 2400.0)).collect();
    let mut found = None;
    for pair in samples.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if imp.radicand(a) < 0.0 && imp.radicand(b) >= 0.0 {
            found = Some(bisect(|t| imp.radicand(t), a, b));
        }
    }
    found
}

fn next_root_above(imp: &Implicit, theta0: f64) -> Option<f64> {
    let mut a = theta0 * (1.0 + 1e-6);
    for _ in 0..4000 {
        let b = a * 1.01;
        if imp.radicand(a) > 0.0 && imp.radicand(b) <= 0.0 {
            return Some(bisect(|t| imp.radicand(t), a, b));
        }
        a = b;
        if a > 1e8 {
            break;
        }
    }
    None
}

fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if (f(m) < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 4.0 * f64::EPSILON * b.abs() {
            break;
        }
    }
    0.5 * (a + b)
}

/// One row of a hypothesis report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub hypothesis: String,
    pub pass: bool,
    pub witness_r: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub beta1: f64,
    pub records: Vec<HypothesisRecord>,
}

impl HypothesisReport {
    pub fn passed(&self, name: &str) -> bool {
        self.records.iter().any(|r| r.hypothesis == name && r.pass)
    }

    pub fn all_passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }
}

/// Uniform grid of `count` points strictly inside `(0, r̄)`.
pub fn interior_grid(r_bar: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| r_bar * i as f64 / (count as f64 + 1.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn schwarzschild() -> WarpingProfile {
        make_profile(&ProfileSpec::schwarzschild(0, 0.5, 2)).unwrap()
    }

    #[test]
    fn sphere_volumes() {
        assert_relative_eq!(sphere_volume(0), 2.0);
        assert_relative_eq!(sphere_volume(1), 2.0 * PI);
        assert_relative_eq!(sphere_volume(2), 4.0 * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_volume(3), 2.0 * PI * PI, max_relative = 1e-15);
        assert_relative_eq!(sphere_volume(4), 8.0 * PI * PI / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn closed_form_examples() {
        let hyp = make_profile(&ProfileSpec::new(ProfileKind::SpaceformHyperbolic, 2)).unwrap();
        assert_relative_eq!(hyp.eval(1.0, 0).unwrap(), 1f64.sinh(), max_relative = 1e-15);
        assert!((hyp.eval(1.0, 0).unwrap() - 1.17520).abs() < 1e-5);
        let sph = make_profile(&ProfileSpec::new(ProfileKind::SpaceformSphere, 2)).unwrap();
        assert!((sph.eval(PI / 4.0, 1).unwrap() - 0.70711).abs() < 1e-5);
        let euc = make_profile(&ProfileSpec::new(ProfileKind::Euclidean, 2)).unwrap();
        assert_eq!(euc.eval(0.0, 2).unwrap(), 0.0);
    }

    #[test]
    fn eval_rejects_out_of_domain_and_bad_order() {
        let sph = make_profile(&ProfileSpec::new(ProfileKind::SpaceformSphere, 2)).unwrap();
        assert!(matches!(sph.eval(2.0, 0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(sph.eval(-0.1, 0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(sph.eval(0.1, 4), Err(Error::BadOrder(4))));
        assert!(make_profile(&ProfileSpec::new(ProfileKind::SpaceformSphere, 2).with_r_bar(2.0)).is_err());
    }

    #[test]
    fn schwarzschild_horizon_and_second_derivative() {
        let p = schwarzschild();
        // root of 1 - 2m ϑ^{1-n} with m = 1/2, n = 2
        assert_relative_eq!(p.theta_at_origin(), 1.0, max_relative = 1e-14);
        assert_eq!(p.eval(0.0, 1).unwrap(), 0.0);
        assert_relative_eq!(p.eval(0.0, 2).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn schwarzschild_third_over_first_at_theta_two() {
        let p = schwarzschild();
        let imp = match &p.repr {
            Repr::Implicit(i) => i,
            _ => unreachable!(),
        };
        let w = 1.0; // ϑ = 1 + w² = 2
        let r = imp.r_of_w(w);
        let c = p.ambient_curvature(r).unwrap();
        assert_relative_eq!(p.jet(r).theta, 2.0, max_relative = 1e-12);
        assert_relative_eq!(c.hess_v_radial.unwrap(), -0.125, max_relative = 1e-10);
    }

    #[test]
    fn implicit_profile_satisfies_its_ode() {
        for spec in [
            ProfileSpec::schwarzschild(0, 0.5, 2),
            ProfileSpec::schwarzschild(1, 0.5, 2),
            ProfileSpec::schwarzschild(0, 0.7, 3),
            ProfileSpec::reissner_nordstrom(0, 0.5, 0.3, 2),
        ] {
            let p = make_profile(&spec).unwrap();
            let imp = match &p.repr {
                Repr::Implicit(i) => i.clone(),
                _ => unreachable!(),
            };
            for i in 1..40 {
                let r = p.r_bar() * i as f64 / 40.0;
                let w_direct = imp.w_of_r_direct(r);
                let w_cheb = imp.w_of_r.eval(r);
                assert!((w_direct - w_cheb).abs() < 1e-11, "{spec:?} r={r}: {w_direct} {w_cheb}");
                // ϑ' = sqrt(P(ϑ)) and a centered difference of ϑ agree
                let h = 1e-5;
                let fd = (p.jet(r + h).theta - p.jet(r - h).theta) / (2.0 * h);
                assert!((fd - p.jet(r).d1).abs() < 1e-8, "{spec:?} r={r}");
            }
        }
    }

    #[test]
    fn de_sitter_schwarzschild_with_large_mass_has_no_horizon() {
        assert_eq!(make_profile(&ProfileSpec::schwarzschild(-1, 0.5, 2)).unwrap_err(), Error::NoHorizon);
        let small = make_profile(&ProfileSpec::schwarzschild(-1, 0.1, 2)).unwrap();
        assert!(small.theta_at_origin() > 0.0);
        assert!(small.jet(0.5 * small.r_bar()).d1 > 0.0);
    }

    #[test]
    fn tabulated_sinh_interpolates() {
        let hyp = make_profile(&ProfileSpec::new(ProfileKind::SpaceformHyperbolic, 2)).unwrap();
        let radii: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let tab = WarpingProfile::tabulated(2, hyp.sample_table(&radii)).unwrap();
        for r in [0.005, 0.123, 0.5, 0.777, 0.995] {
            assert!((tab.eval(r, 0).unwrap() - r.sinh()).abs() < 1e-9, "r={r}");
            assert!((tab.eval(r, 1).unwrap() - r.cosh()).abs() < 1e-9);
            assert!((tab.eval(r, 2).unwrap() - r.sinh()).abs() < 1e-9);
        }
        assert!(tab.eval(1.0, 0).is_err());
    }

    #[test]
    fn ambient_curvature_examples() {
        let euc = make_profile(&ProfileSpec::new(ProfileKind::Euclidean, 3)).unwrap();
        let c = euc.ambient_curvature(0.7).unwrap();
        assert_eq!(c.ricci_radial, 0.0);
        assert_eq!(c.ricci_tangential, 0.0);
        let sph = make_profile(&ProfileSpec::new(ProfileKind::SpaceformSphere, 2)).unwrap();
        let c = sph.ambient_curvature(0.3).unwrap();
        assert_relative_eq!(c.ricci_radial, 2.0, max_relative = 1e-14);
        assert_relative_eq!(c.ricci_tangential, 2.0, max_relative = 1e-12);
        let p = schwarzschild();
        let c0 = p.ambient_curvature(0.5 * p.r_bar()).unwrap();
        assert!(!c0.degenerate);
        assert!(p.ambient_curvature(0.0).is_err());
    }

    #[test]
    fn h3_quantity_examples() {
        let sph = make_profile(&ProfileSpec::new(ProfileKind::SpaceformSphere, 2)).unwrap();
        assert_relative_eq!(sph.h3_quantity(0.5).unwrap(), -3.0, max_relative = 1e-13);
        let euc = make_profile(&ProfileSpec::new(ProfileKind::Euclidean, 2)).unwrap();
        assert_eq!(euc.h3_quantity(0.5).unwrap(), 0.0);
        let hyp = make_profile(&ProfileSpec::new(ProfileKind::SpaceformHyperbolic, 2)).unwrap();
        assert_relative_eq!(hyp.h3_quantity(0.5).unwrap(), 3.0, max_relative = 1e-13);
        let p = schwarzschild();
        let (r1, r2) = (0.3, 1.7);
        assert!(p.h3_quantity(r1).unwrap() <= p.h3_quantity(r2).unwrap() + 1e-12);
    }

    #[test]
    fn hypotheses_for_named_examples() {
        for spec in [
            ProfileSpec::schwarzschild(0, 0.5, 2),
            ProfileSpec::schwarzschild(1, 0.5, 2),
            ProfileSpec::reissner_nordstrom(0, 0.5, 0.3, 2),
        ] {
            let p = make_profile(&spec).unwrap();
            let report = p.check_hypotheses(&interior_grid(p.r_bar(), 200), 0.5).unwrap();
            assert!(report.all_passed(), "{spec:?}: {report:?}");
        }
        let hyp = make_profile(&ProfileSpec::new(ProfileKind::SpaceformHyperbolic, 2)).unwrap();
        let rep = hyp.check_hypotheses(&interior_grid(2.0, 50), 0.5).unwrap();
        assert!(!rep.passed("H1"));
        assert_eq!(rep.records[0].value, 1.0);
        let euc = make_profile(&ProfileSpec::new(ProfileKind::Euclidean, 2)).unwrap();
        assert!(!euc.check_hypotheses(&interior_grid(2.0, 50), 0.5).unwrap().passed("H1"));
        assert_eq!(hyp.check_hypotheses(&[], 0.5).unwrap_err(), Error::EmptyGrid);
    }

    #[test]
    fn hypothesis_refinement_never_flips_failure() {
        // sphere profile: H4 holds, H3 holds (q constant); a sine-modulated table breaks H3
        let rows: Vec<[f64; 5]> = (0..=200)
            .map(|i| {
                let r = i as f64 * 0.01;
                let t = r + 0.05 * (3.0 * r).sin();
                let d1 = 1.0 + 0.15 * (3.0 * r).cos();
                let d2 = -0.45 * (3.0 * r).sin();
                let d3 = -1.35 * (3.0 * r).cos();
                [r, t, d1, d2, d3]
            })
            .collect();
        let p = WarpingProfile::tabulated(2, rows).unwrap();
        let coarse = interior_grid(1.9, 20);
        let mut fine = coarse.clone();
        fine.extend(interior_grid(1.9, 97));
        fine.sort_by(|a, b| a.partial_cmp(b).unwrap());
        fine.dedup();
        let a = p.check_hypotheses(&coarse, 0.5).unwrap();
        let b = p.check_hypotheses(&fine, 0.5).unwrap();
        for h in ["H2", "H3", "H4"] {
            assert!(!(!a.passed(h) && b.passed(h)), "{h} flipped");
        }
    }
}
