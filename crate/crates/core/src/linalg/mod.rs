//! Sparse and dense kernels, factorizations and eigensolvers.

pub mod chol;
pub mod dense;
pub mod eig;
pub mod mm;
pub mod sparse;

pub use chol::{chol, chol_dropping, CholFactor, DenseChol, ProfileChol};
pub use dense::{axpy, dot, norm2, DenseMat, Lu};
pub use eig::{gen_sym_eig, pseudo_apply, sym_eig, sym_eig_tol, EigPair, GenEig, PseudoInverse};
pub use mm::{read_matrix_market, read_matrix_market_file, write_matrix_market, write_matrix_market_file};
pub use sparse::{triple_product, Restriction, SparseMat};
