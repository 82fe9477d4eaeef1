//! Source terms `φ(f)` with antiderivatives `Φ(f) = ∫₀^f φ` and `Ψ(f) = ∫₀^f Φ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceSpec {
    /// `φ(f) = Σ_k coeffs[k] f^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `φ(f) = a e^{b f}`.
    Exp { a: f64, b: f64 },
}

impl SourceSpec {
    pub fn constant(c: f64) -> Self {
        SourceSpec::Polynomial { coeffs: vec![c] }
    }

    pub fn is_constant_one(&self) -> bool {
        matches!(self, SourceSpec::Polynomial { coeffs } if coeffs.first() == Some(&1.0)
            && coeffs.iter().skip(1).all(|c| *c == 0.0))
    }

    pub fn phi(&self, f: f64) -> f64 {
        match self {
            SourceSpec::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * f + c),
            SourceSpec::Exp { a, b } => a * (b * f).exp(),
        }
    }

    pub fn dphi(&self, f: f64) -> f64 {
        match self {
            SourceSpec::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(0.0, |acc, (k, c)| acc * f + k as f64 * c),
            SourceSpec::Exp { a, b } => a * b * (b * f).exp(),
        }
    }

    /// `Φ(f) = ∫₀^f φ`.
    pub fn big_phi(&self, f: f64) -> f64 {
        match self {
            SourceSpec::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, c)| acc * f + c / (k as f64 + 1.0))
                * f,
            SourceSpec::Exp { a, b } => {
                if *b == 0.0 {
                    a * f
                } else {
                    a * (b * f).exp_m1() / b
                }
            }
        }
    }

    /// `Ψ(f) = ∫₀^f Φ`.
    pub fn psi(&self, f: f64) -> f64 {
        match self {
            SourceSpec::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, c)| acc * f + c / ((k as f64 + 1.0) * (k as f64 + 2.0)))
                * f
                * f,
            SourceSpec::Exp { a, b } => {
                let x = b * f;
                if x.abs() < 1e-3 {
                    a * f * f * (0.5 + x / 6.0 + x * x / 24.0 + x * x * x / 120.0)
                } else {
                    a * (x.exp_m1() - x) / (b * b)
                }
            }
        }
    }

    /// Check that `φ > 0` on `[lo, 0]`.
    pub fn validate(&self, lo: f64) -> Result<()> {
        match self {
            SourceSpec::Polynomial { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidSource("polynomial source needs finite coefficients".into()));
                }
            }
            SourceSpec::Exp { a, b } => {
                if !(a.is_finite() && b.is_finite()) {
                    return Err(Error::InvalidSource("exponential source needs finite parameters".into()));
                }
            }
        }
        let lo = lo.min(0.0);
        let samples = 2000;
        for i in 0..=samples {
            let f = lo * i as f64 / samples as f64;
            let v = self.phi(f);
            if !(v > 0.0) {
                return Err(Error::InvalidSource(format!("phi({f}) = {v} is not positive")));
            }
        }
        Ok(())
    }
}
