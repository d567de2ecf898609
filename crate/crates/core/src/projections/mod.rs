//! Mollified measures, projection pushforwards, radial slices and the
//! integral identities relating them.

mod ball;
mod grid;
mod identities;
mod mollify;
mod pushforward;

pub use ball::{ball_integral, ball_integral_scaling, BallScaling};
pub use grid::{GridHeader, GridMeasure};
pub use identities::{
    mattila_constant, mattila_identity_check, radial_identity_check, radial_identity_check_at, radial_slice_density, FnField,
    MattilaConfig, MattilaReport, RadialConfig, RadialIdentityReport, RotationSampling, ScalarField,
};
pub use mollify::{mollify_point_cloud, sphere_area, MollifierSpec};
pub use pushforward::{
    lp_norm, lp_norm_pow, project_measure, project_measure_with, projection_lp_integral, restricted_lp_contribution,
    LatticeFunction, McEstimate, PlaneSampling, ProjectedDensity, RestrictedContribution, Splat,
};
