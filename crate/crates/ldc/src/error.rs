use thiserror::Error;

/// Errors shared across mesh construction, assembly, linear algebra and the
/// correction schemes.
#[derive(Debug, Error)]
pub enum Error {
    /// A domain or subdomain boundary does not lie on grid lines of the mesh
    /// it is applied to.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A composite partition has overlapping cells or leaves a gap.
    #[error("partition error: {0}")]
    Partition(String),

    /// Problem coefficients violate uniform strong ellipticity or the weight
    /// bound.
    #[error("coefficient error: {0}")]
    Coefficient(String),

    /// A function transfer was requested between meshes that are not nested.
    #[error("transfer error: {0}")]
    Transfer(String),

    /// A factorization hit a numerically singular pivot.
    #[error("singular matrix at pivot {pivot}: {detail}")]
    Singular { pivot: usize, detail: String },

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    /// The smallest-modulus eigenvalue appears to be a complex pair, which
    /// the real-arithmetic solver does not support.
    #[error("unsupported spectrum: {0}")]
    UnsupportedSpectrum(String),

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    /// b(u, u*) is numerically zero; the generalized Rayleigh quotient and
    /// the adjoint alignment are undefined.
    #[error("degenerate pairing: {0}")]
    DegeneratePairing(String),

    /// A planned schedule exceeds the configured degree-of-freedom budget.
    #[error("DOF budget exceeded: {0}")]
    Budget(String),

    /// Eigenvalue ascent greater than one is not implemented.
    #[error("unsupported ascent: {0}")]
    Ascent(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
