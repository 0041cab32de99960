//! Dense matrix arithmetic, Frobenius geometry, thin/truncated SVD and
//! Newton–Schulz orthogonalization.
//!
//! Everything here is a pure function of its inputs. Reductions run in a fixed
//! order, so results are bitwise reproducible for a given build.

mod matrix;
mod newton_schulz;
mod svd;

pub use matrix::{frobenius_inner, frobenius_norm, rank_one_accumulate, rank_one_update, Matrix};
pub use newton_schulz::{newton_schulz_orthogonalize, DEFAULT_NS_ITERS};
pub use svd::{jacobi_svd, randomized_svd, thin_svd, SvdFactors, JACOBI_MAX_DIM};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("{op}: dimension mismatch {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("{0}: non-finite entries")]
    NonFinite(&'static str),
    #[error("newton-schulz: spectral norm {0} is not below sqrt(3); normalize the input first")]
    Stability(f64),
    #[error("svd factors violate orthonormality or ordering: {0}")]
    InvalidFactors(String),
}
