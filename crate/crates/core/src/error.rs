use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix shape mismatch in {context}: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    Shape {
        context: &'static str,
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },
    #[error("layer {layer}: expected input width {expected}, got {actual}")]
    LayerShape {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("{context} needs at least {needed} rows, got {got}")]
    TooFewRows {
        context: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },
    #[error("row {row} has norm {norm:e}, below the zero-norm tolerance")]
    ZeroNormRow { row: usize, norm: f64 },
    #[error("cannot form {k} clusters from {n} samples")]
    TooManyClusters { k: usize, n: usize },
    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },
    #[error("sample {index} assigned to cluster {cluster}, but only {k} clusters exist")]
    AssignmentOutOfRange {
        index: usize,
        cluster: usize,
        k: usize,
    },
    #[error("assignment vector has length {got}, data has {expected} rows")]
    AssignmentLength { expected: usize, got: usize },
    #[error("non-finite {component} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        component: String,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
