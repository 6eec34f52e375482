use alloc::string::String;
use core::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Structural problem with the input (dimension mismatch, empty program).
    Structure(String),
    /// Instance exceeds a hard enumeration cap.
    Capacity(String),
    /// A requested point is not in the convex hull of the given generators.
    NotInHull,
    /// A convex decomposition exists only beyond the configured precision.
    Precision(String),
    /// A feasibility or optimization run found no feasible point.
    Infeasible(String),
    /// Iteration budget exhausted without a certificate.
    Nonconvergence(String),
    /// Input outside the mathematical domain of an operation.
    Domain(String),
    /// An internal invariant that the algorithms guarantee was violated.
    Invariant(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Structure(m) => write!(f, "structural error: {m}"),
            Error::Capacity(m) => write!(f, "capacity exceeded: {m}"),
            Error::NotInHull => write!(f, "point is not in the convex hull of the generators"),
            Error::Precision(m) => write!(f, "precision error: {m}"),
            Error::Infeasible(m) => write!(f, "infeasible: {m}"),
            Error::Nonconvergence(m) => write!(f, "nonconvergence: {m}"),
            Error::Domain(m) => write!(f, "domain error: {m}"),
            Error::Invariant(m) => write!(f, "invariant violation: {m}"),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
