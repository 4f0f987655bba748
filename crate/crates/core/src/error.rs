use thiserror::Error;

pub type Result<T, E = MtlsError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MtlsError {
    /// `A` does not have full column rank.
    #[error("matrix is rank deficient: pivot {pivot:.3e} below tolerance {tol:.3e}")]
    RankDeficient { pivot: f64, tol: f64 },

    #[error("SVD did not converge within {max_iter} iterations")]
    NoConvergence { max_iter: usize },

    /// An explicit Kronecker-structured matrix would exceed the dense cap.
    #[error("dense form needs {entries} entries, above the cap of {cap}; use a compact formula")]
    SizeOverflow { entries: usize, cap: usize },

    /// The genericity condition fails (no unique solution).
    #[error("problem is not generic: gap {gap:.3e} not above tolerance {tol:.3e}")]
    NonGeneric { gap: f64, tol: f64 },

    /// `Ax = b` is consistent, so the residual reflector is undefined.
    #[error("system is consistent: residual norm {residual:.3e} at or below {tol:.3e}")]
    ConsistentSystem { residual: f64, tol: f64 },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MtlsError {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        MtlsError::Dimension(msg.into())
    }
}
