//! Geometry and analysis of Serrin-type overdetermined problems in rotationally symmetric
//! warped products.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod domain;
pub mod error;
pub mod identities;
pub mod jet;
pub mod mesh;
pub mod profile;
pub mod quadrature;
pub mod radial;
pub mod recovery;
pub mod solver;
pub mod source;
pub mod sparse;
pub mod stability;

pub use error::{Error, Result};
pub use profile::{make_profile, sphere_volume, ProfileJet, ProfileKind, ProfileSpec, WarpingProfile};
pub use domain::{build_domain, boundary_geometry, BoundarySpec, BoundarySurface, MeridianDomain, Topology};
pub use identities::{IdentityResidual, SampledField, Sampling};
pub use jet::{AmbientJet, FieldJet, SamplePoint};
pub use mesh::MeridianMesh;
pub use radial::{radial_oracle, RadialProblem, RadialSolution};
pub use solver::{solve_serrin, solve_warped_torsion, ScalarField, SolverOptions};
pub use source::SourceSpec;
pub use stability::{DeficitReport, SweepConfig, SweepKind, SweepTable};
