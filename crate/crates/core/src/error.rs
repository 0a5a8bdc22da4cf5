use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The point lies outside the region where the metric is defined.
    #[error("domain violation: {0}")]
    Domain(String),

    /// Zero tangent vector or another input on which the geometry degenerates.
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported derivative order (x: {order_x}, y: {order_y}); supported up to x: {max_x}, y: {max_y}")]
    Capability {
        order_x: usize,
        order_y: usize,
        max_x: usize,
        max_y: usize,
    },

    #[error("fundamental tensor is singular or ill-conditioned (condition number {condition:e})")]
    SingularTensor { condition: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("transported vector left the slit tangent bundle at t = {t}")]
    TransportDegeneracy { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loop curvature sign is not consistent across coordinate planes: {0}")]
    ConventionMismatch(String),

    #[error("internal consistency check failed: {0}")]
    Internal(String),
}
