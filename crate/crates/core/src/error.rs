use thiserror::Error;

/// Errors raised by problem construction and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite {quantity} in {context}")]
    NonFinite {
        quantity: &'static str,
        context: &'static str,
    },

    #[error("inner solve diverged at step {step}: non-finite {quantity}")]
    DivergedInner {
        step: usize,
        quantity: &'static str,
    },

    #[error("barrier solve started outside the log domain (f_reg - f = {gap:e})")]
    InfeasibleStart { gap: f64 },

    #[error("barrier backtracking exhausted after {halvings} halvings at step {step}")]
    BacktrackExhausted { step: usize, halvings: usize },

    #[error("hypergradient evaluated outside the log domain (f_reg - f = {gap:e})")]
    BarrierDomain { gap: f64 },

    #[error("{method} requires Hessian- and Jacobian-vector product oracles, which this problem lacks")]
    MissingSecondOrder { method: &'static str },

    #[error("conjugate gradient broke down at iteration {iteration}: curvature {curvature:e}")]
    CgBreakdown { iteration: usize, curvature: f64 },

    #[error("line {line}, column {column}: {message}")]
    Spec {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("verification: {0}")]
    Verification(String),

    #[error("stage {stage}, iteration {l}: {source}")]
    Stage {
        stage: usize,
        l: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(self, stage: usize, l: usize) -> Self {
        match self {
            already @ Error::Stage { .. } => already,
            other => Error::Stage {
                stage,
                l,
                source: Box::new(other),
            },
        }
    }

    /// Innermost error, with stage context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for numeric failures (divergence, domain violations) as opposed to
    /// configuration or capability problems.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self.root(),
            Error::NonFinite { .. }
                | Error::DivergedInner { .. }
                | Error::InfeasibleStart { .. }
                | Error::BacktrackExhausted { .. }
                | Error::BarrierDomain { .. }
                | Error::CgBreakdown { .. }
        )
    }
}

impl Error {
    pub fn io(path: &std::path::Path, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
