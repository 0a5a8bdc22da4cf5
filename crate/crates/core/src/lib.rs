//! Projectively flat Finsler metrics of constant flag curvature: exact jets,
//! spray and curvature, parallel transport and the infinitesimal holonomy
//! algebra.

pub mod error;
pub mod jet;
pub mod metric;
pub mod spray;
pub mod algebra;
pub mod curvature;
pub mod ode;
pub mod sampling;
pub mod transport;

pub use error::{Error, Result};
pub use metric::{
    directional_derivatives, eval_norm, fundamental_tensor, DerivativeTensor, FinslerMetricSpec,
    FundamentalTensor, MetricKind, NormQuantity, Point, TangentVector,
};
pub use spray::{
    berwald_covariant_derivative, connection_x_derivatives, projective_factor, spray,
    ProjectiveFactorValue, SprayData, VerticalField,
};
pub use curvature::{
    curvature_vector_field, fit_flag_curvature, nabla_r_residual, riemann_curvature,
    CurvatureValue, FlagCurvatureFit,
};
pub use transport::{
    curvature_from_loops, holonomy_loop_map, integrate_geodesic, parallel_transport, CurveSpec,
    GeodesicTrajectory, IndicatrixMapSample, LoopCurvatureReport, TransportResult,
};
pub use algebra::{density_certificate, generate_ihol_basis, lie_bracket, DensityCertificate, ModelParams, SphereVectorField};
