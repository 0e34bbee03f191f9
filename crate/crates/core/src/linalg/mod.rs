//! Sparse symmetric linear algebra: storage, fill-reducing ordering,
//! static-pivot LDLᵀ with iterative refinement, and a dense oracle.

pub mod csc;
pub mod dense;
pub mod ldl;
pub mod mtx;
pub mod ordering;

use thiserror::Error;

pub use csc::{compress_symmetric_lower, compress_to_csc, CooMatrix, CscMatrix, SlotMap};
pub use dense::{dense_ldl_oracle, DenseLdl, DenseMatrix};
pub use ldl::{
    analyze, default_pivot_floor, iterative_refinement, numeric_factorize, solve_in_place, symbolic_factorize, Inertia,
    NumericFactorization, Refined, SparseLdl, SymbolicFactorization,
};
pub use ordering::fill_reducing_ordering;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite matrix value at position {index}")]
    NonFinite { index: usize },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("matrix market parse error: {0}")]
    Parse(String),
}
