//! Exact symbolic engine for Drinfeld doubles and quasi-split universal iquantum
//! groups of finite type, built on an iHopf-algebra carrier.
//!
//! The layers, bottom to top:
//! * [`scalars`]: the coefficient field Q(u), u = v^{1/2}, with bar u ↦ u^{-1};
//! * [`cartan`]: finite-type Cartan data with a diagram involution, restricted
//!   Weyl combinatorics, root sequences;
//! * [`falgebra`]: the half quantum group f on rescaled generators ϑ_i, with
//!   normal forms per weight space, the twisted coproduct r, skew derivations,
//!   and the bilinear pairing;
//! * [`borel`]: the Borel carrier (Cartan monomials times f), its coproduct and
//!   Hopf pairing;
//! * [`ihopf`]: the involutive star product that deforms the Borel into the
//!   universal iquantum group, plus bar, diamond, and the tensor-square model
//!   of the Drinfeld double;
//! * [`braid`]: Lusztig braid operators on the double, relative braid operators
//!   on the star algebra, root vectors and quasi-K-matrices;
//! * [`dcb`]: dual canonical bases by bar-triangular solving, in f, in the star
//!   algebra, and in Heisenberg quotients of the double.
//!
//! All computation is exact; nothing is floating point and nothing is truncated
//! except explicitly height-bounded gradings.

pub mod cartan;
pub mod dcb;
pub mod falgebra;
pub mod format;
pub mod borel;
pub mod braid;
pub mod ihopf;
pub mod linalg;
pub mod scalars;

use thiserror::Error;

/// Errors surfaced across the engine.  The discriminants that matter to the CLI:
/// a triangularity violation exits with code 2, a convention-pin failure with 3.
#[derive(Error, Debug)]
pub enum EngineError {
    #[error("unsupported or non-finite Cartan type: {0}")]
    BadCartan(String),
    #[error("invalid diagram involution: {0}")]
    BadInvolution(String),
    #[error("weight height {got} exceeds configured bound {bound}")]
    HeightExceeded { got: i64, bound: i64 },
    #[error("operation requires the invertible-Cartan carrier")]
    NeedsInvertibleCartan,
    #[error("Cartan exponent went negative in the polynomial carrier")]
    NegativeCartanExponent,
    #[error("word is not reduced: {0}")]
    NotReduced(String),
    #[error("bar matrix is not unitriangular for the declared order: keys {x} vs {y}")]
    TriangularityViolation { x: String, y: String },
    #[error("convention pin failed: {0}")]
    ConventionPin(String),
    #[error("linear system is inconsistent or underdetermined: {0}")]
    SingularSystem(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, EngineError>;
