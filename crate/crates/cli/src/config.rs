//! Run configuration: TOML schema and validation.
//!
//! Every block rejects unknown keys. [`RunConfig::validate`] builds the profile and domain and
//! checks all numeric parameters, so that nothing is computed or written for a bad config.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use warpstab_core::solver::LinearOptions;
use warpstab_core::{
    build_domain, make_profile, BoundarySpec, MeridianDomain, ProfileSpec, SolverOptions, SourceSpec, SweepKind,
    Topology, WarpingProfile,
};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileSpec,
    #[serde(default)]
    pub domain: Option<DomainBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    /// May be omitted when the subcommand's experiment has no required parameters.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    /// Output directory; relative paths are resolved against the working directory.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub boundary: BoundarySpec,
    pub topology: Topology,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverBlock {
    /// Finite-element degree; only quadratic elements are implemented.
    pub degree: usize,
    pub h: f64,
    /// Quadrature panels for boundary and volume sampling.
    pub panels: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub recovery_degree: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            degree: 2,
            h: 0.04,
            panels: 64,
            newton_tol: o.newton_tol,
            newton_max_iter: o.newton_max_iter,
            linear_tol: o.linear.rel_tol,
            linear_max_iter: o.linear.max_iter,
            recovery_degree: o.recovery_degree,
        }
    }
}

impl SolverBlock {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            linear: LinearOptions { rel_tol: self.linear_tol, max_iter: self.linear_max_iter },
            recovery_degree: self.recovery_degree,
            ..SolverOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest accepted identity residual at the finest level, relative to the sum of the
    /// absolute values of the identity's terms.
    pub identity: f64,
    /// Identities whose absolute residual is below this are accepted outright; on exact
    /// configurations every term can vanish, leaving no scale to compare against.
    pub identity_absolute: f64,
    /// Slack allowed in sign and bound checks on deficits.
    pub deficit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { identity: 1e-3, identity_absolute: 1e-8, deficit: 1e-8 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Serrin,
    Warped,
}

fn unit_source() -> SourceSpec {
    SourceSpec::constant(1.0)
}

fn default_grid_points() -> usize {
    200
}

fn default_beta1() -> f64 {
    0.5
}

fn default_levels() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    VerifyHypotheses {
        #[serde(default = "default_grid_points")]
        grid_points: usize,
        /// Extra sample radii drawn uniformly from `(0, r̄)` with the run seed.
        #[serde(default)]
        random_points: usize,
        #[serde(default = "default_beta1")]
        beta1: f64,
    },
    SolveSerrin {
        #[serde(default = "unit_source")]
        source: SourceSpec,
    },
    SolveWarped,
    Identities {
        problem: Problem,
        #[serde(default = "unit_source")]
        source: SourceSpec,
        /// Mesh sizes `h, h/2, ..., h/2^(levels-1)`.
        #[serde(default = "default_levels")]
        levels: usize,
    },
    HkDeficit,
    CmcDeficit,
    Sweep {
        r0: f64,
        coeffs: Vec<f64>,
        amplitudes: Vec<f64>,
        problem: SweepKind,
        topology: Topology,
        /// Solve for a field on every member (always done for the Serrin problem).
        #[serde(default)]
        solve: bool,
    },
}

impl Experiment {
    /// The experiment run by a subcommand whose config has no `[experiment]` block.
    pub fn default_for(name: &str) -> Option<Self> {
        match name {
            "verify-hypotheses" => Some(Experiment::VerifyHypotheses {
                grid_points: default_grid_points(),
                random_points: 0,
                beta1: default_beta1(),
            }),
            "solve-serrin" => Some(Experiment::SolveSerrin { source: unit_source() }),
            "solve-warped" => Some(Experiment::SolveWarped),
            "hk-deficit" => Some(Experiment::HkDeficit),
            "cmc-deficit" => Some(Experiment::CmcDeficit),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::VerifyHypotheses { .. } => "verify-hypotheses",
            Experiment::SolveSerrin { .. } => "solve-serrin",
            Experiment::SolveWarped => "solve-warped",
            Experiment::Identities { .. } => "identities",
            Experiment::HkDeficit => "hk-deficit",
            Experiment::CmcDeficit => "cmc-deficit",
            Experiment::Sweep { .. } => "sweep",
        }
    }
}

/// Profile and (when required) domain built from a validated config.
pub struct Prepared {
    pub profile: Arc<WarpingProfile>,
    pub domain: Option<MeridianDomain>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    /// Bind the config to the experiment named by the subcommand.
    pub fn select(&mut self, name: &str) -> Result<(), CliError> {
        match &self.experiment {
            Some(e) if e.name() == name => Ok(()),
            Some(e) => Err(CliError::Validation(format!(
                "config describes a '{}' experiment but the subcommand is '{name}'",
                e.name()
            ))),
            None => {
                self.experiment = Experiment::default_for(name);
                match self.experiment {
                    Some(_) => Ok(()),
                    None => Err(CliError::Validation(format!("'{name}' needs an [experiment] block"))),
                }
            }
        }
    }

    pub fn experiment(&self) -> &Experiment {
        self.experiment.as_ref().expect("experiment selected before use")
    }

    pub fn validate(&self) -> Result<Prepared, CliError> {
        let invalid = |msg: String| Err(CliError::Validation(msg));
        let Some(experiment) = &self.experiment else {
            return invalid("no [experiment] block".into());
        };
        let s = &self.solver;
        if s.degree != 2 {
            return invalid(format!("solver.degree = {} is not supported (quadratic elements only)", s.degree));
        }
        if !(s.h.is_finite() && s.h > 0.0) {
            return invalid(format!("solver.h must be positive, got {}", s.h));
        }
        if s.panels < 2 {
            return invalid("solver.panels must be at least 2".into());
        }
        if !(s.newton_tol > 0.0 && s.linear_tol > 0.0) || s.newton_max_iter == 0 || s.linear_max_iter == 0 {
            return invalid("solver tolerances and iteration caps must be positive".into());
        }
        if !(3..=4).contains(&s.recovery_degree) {
            return invalid(format!("solver.recovery_degree must be 3 or 4, got {}", s.recovery_degree));
        }
        let t = &self.tolerances;
        if !(t.identity > 0.0 && t.identity_absolute >= 0.0 && t.deficit >= 0.0) {
            return invalid("tolerances must be non-negative (identity strictly positive)".into());
        }

        let profile = Arc::new(make_profile(&self.profile).map_err(|e| CliError::Validation(format!("profile: {e}")))?);

        match experiment {
            Experiment::VerifyHypotheses { grid_points, beta1, .. } => {
                if *grid_points == 0 {
                    return invalid("experiment.grid_points must be positive".into());
                }
                if !(*beta1 > 0.0 && *beta1 < 1.0) {
                    return invalid(format!("experiment.beta1 must lie in (0, 1), got {beta1}"));
                }
            }
            Experiment::SolveSerrin { source } | Experiment::Identities { source, .. } => {
                source.validate(0.0).map_err(|e| CliError::Validation(format!("experiment.source: {e}")))?;
            }
            Experiment::Sweep { amplitudes, problem, .. } => {
                if self.domain.is_some() {
                    return invalid("sweep defines its own boundary family; remove the [domain] block".into());
                }
                if amplitudes.is_empty() || amplitudes.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
                    return invalid("experiment.amplitudes must be a non-empty list of non-negative numbers".into());
                }
                if let SweepKind::Serrin { source } = problem {
                    source.validate(0.0).map_err(|e| CliError::Validation(format!("experiment.problem: {e}")))?;
                }
            }
            _ => {}
        }
        if let Experiment::Identities { levels, .. } = experiment {
            if *levels == 0 {
                return invalid("experiment.levels must be positive".into());
            }
        }

        let needs_domain =
            !matches!(experiment, Experiment::VerifyHypotheses { .. } | Experiment::Sweep { .. });
        let domain = match (&self.domain, needs_domain) {
            (Some(d), true) => Some(
                build_domain(profile.clone(), d.boundary.clone(), d.topology)
                    .map_err(|e| CliError::Validation(format!("domain: {e}")))?,
            ),
            (None, true) => return invalid(format!("experiment '{}' requires a [domain] block", experiment.name())),
            (_, false) => None,
        };
        Ok(Prepared { profile, domain })
    }
}
