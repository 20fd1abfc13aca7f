//! Crate-wide error type.
//!
//! All fallible public operations return [`Result`]. The variants are
//! deliberately coarse: they distinguish *what kind* of precondition failed
//! (argument validation, representation mismatch, grid-resolution limits,
//! degenerate geometry, ...) rather than enumerating every call site.

use thiserror::Error;

/// Errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A scalar or structural argument was outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation required a field in one representation (spatial or
    /// frequency) but received the other.
    #[error("wrong field representation: expected {expected}, found {found}")]
    WrongRepresentation {
        /// Representation the operation needs.
        expected: &'static str,
        /// Representation that was supplied.
        found: &'static str,
    },

    /// Two objects that must agree on dimension/shape did not.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch {
        /// Expected dimension or shape description.
        expected: String,
        /// Actual dimension or shape description.
        found: String,
    },

    /// A dyadic frequency shell does not fit inside the sampled frequency
    /// lattice of an `n_x`-point grid.
    #[error("dyadic shell index {k} out of range for grid size {n_x}")]
    AnnulusOutOfRange {
        /// Requested shell index.
        k: i32,
        /// Spatial grid points per axis.
        n_x: usize,
    },

    /// A declared frequency band extends beyond the Nyquist frequency of the
    /// sampling lattice, so lattice sums would alias.
    #[error("frequency band [{lo}, {hi}] exceeds lattice Nyquist bound {nyquist}")]
    Aliasing {
        /// Lower end of the declared band.
        lo: f64,
        /// Upper end of the declared band.
        hi: f64,
        /// Largest representable frequency magnitude.
        nyquist: f64,
    },

    /// A root/critical-point solver failed to bracket or converge.
    #[error("root solve failed: {0}")]
    NoRoot(String),

    /// A frame or change-of-variables matrix was singular or numerically
    /// rank-deficient where invertibility is required.
    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    /// The contact-order scan hit its derivative cap without resolving the
    /// order of tangency.
    #[error("contact order at s = {s} undetermined up to derivative cap {cap}")]
    TypeUndetermined {
        /// Curve parameter where the scan failed.
        s: f64,
        /// Highest derivative order examined.
        cap: usize,
    },

    /// A constructed object carries more relative mass outside its declared
    /// support than the allowed tolerance.
    #[error("support violation: relative mass {mass_outside:.3e} outside declared support")]
    SupportViolation {
        /// Relative mass found outside the declared support.
        mass_outside: f64,
    },

    /// A quotient had a vanishing denominator where the convention does not
    /// define a value.
    #[error("division by zero: {0}")]
    DivisionByZero(String),

    /// Configuration file invalid (schema, field values, or version).
    #[error("config error: {0}")]
    Config(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// CSV (de)serialization failure.
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
