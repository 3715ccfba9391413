//! Saddle point systems, desk-scale generators and the dense oracle.

pub mod generate;
pub mod oracle;
mod system;

pub use generate::{generate, CMode, ProblemKind, ProblemSpec};
pub use oracle::{oracle_assemble, oracle_gen_eig, pencil_eigenvalues, pencil_extremes, product_eigenvalues, DenseOracle, ORACLE_CAP};
pub use system::{Element, ProblemFiles, PsdSplit, SaddleSystem};
