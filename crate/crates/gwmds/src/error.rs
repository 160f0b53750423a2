use thiserror::Error;

/// Error variants shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix expected to be square.
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    /// Two operands disagree on shape.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    /// Non-finite value encountered in sample data.
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },

    /// A relational-matrix invariant does not hold.
    #[error("relational matrix invariant violated: {0}")]
    InvalidMatrix(String),

    /// Failure attributable to one view of a multi-view dataset.
    #[error("view {view}: {source}")]
    View {
        view: usize,
        #[source]
        source: Box<Error>,
    },

    /// Transport marginals cannot be matched.
    #[error("infeasible marginals: mass mismatch {gap:e}")]
    InfeasibleMarginals { gap: f64 },

    /// Input is degenerate for the requested operation (e.g. zero variance).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An iterative solver exhausted its budget without meeting its tolerance.
    #[error("{context}: no convergence after {iterations} iterations")]
    NotConverged { context: String, iterations: usize },

    /// Embedding dimension must stay below the sample count.
    #[error("embedding dimension {q} must be smaller than sample count {n}")]
    DimensionTooLarge { q: usize, n: usize },

    /// Neighbor graph splits into several components.
    #[error("neighbor graph is disconnected: component sizes {sizes:?}")]
    Disconnected { sizes: Vec<usize> },

    /// A coupling provides no mass for a sample, so its barycentric
    /// alignment is undefined (signals a degenerate coupling).
    #[error("coupling carries no mass for sample {sample}")]
    NoAlignmentMass { sample: usize },

    /// Unknown manifold kind requested.
    #[error("unknown manifold kind: {0:?}")]
    UnknownManifold(String),

    /// Text input could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Configuration values violate a precondition.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Wrap an error with the index of the view it originated from.
    pub fn in_view(self, view: usize) -> Self {
        Error::View {
            view,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
