pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("unsupported dimension {dim}: only 2 and 4 are handled")]
    UnsupportedDimension { dim: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("matrix is not Hermitian: asymmetry {asymmetry:e} exceeds {tol:e}")]
    NotHermitian { asymmetry: f64, tol: f64 },

    #[error("invalid quantum state: {reason}")]
    InvalidState { reason: String },

    #[error("invalid parameter {name} = {value}: expected {expected}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NonConvergence { sweeps: usize, off_norm: f64 },

    #[error("no shots recorded for group {group}")]
    EmptyCounts { group: u8 },

    #[error("tomography counts are missing setting {setting}")]
    MissingSetting { setting: u8 },

    #[error("malformed counts: {reason}")]
    MalformedCounts { reason: String },
}
