//! Adaptive two-level domain decomposition preconditioners for sparse
//! saddle point systems
//!
//! ```text
//!     [ A   B^T ] [U]   [F_U]
//!     [ B   -C  ] [P] = [F_P]
//! ```
//!
//! with `A` SPD, `B` full row rank and `C` PSD, where `A` and `C` are sums of
//! small PSD element matrices.
//!
//! The preconditioner chain is built in three phases:
//!
//! 1. [`schwarz::PrimalPrecond`]: two-level additive Schwarz (or SORAS) for
//!    `A`, with a GenEO coarse space `V_0`.
//! 2. [`dual::DualPrecond`]: the dual operator `M_S = C + B M_A^{-1} B^T`
//!    split as `S_0 + S_1`, and a two-level Neumann–Neumann type
//!    preconditioner `M_{S_1}^{-1}` with its own GenEO coarse space.
//! 3. [`ns::NsPrecond`]: `N_S = S_0 + M_{S_1}` applied through a
//!    Sherman–Morrison–Woodbury update with the small dense system `M_{A_0}`.
//!
//! [`krylov::solve_saddle`] then solves the block system through its block
//! LDU factorization with (flexible) preconditioned conjugate gradients.

pub mod config;
pub mod decomposition;
pub mod dual;
pub mod error;
pub mod krylov;
pub mod linalg;
pub mod ns;
pub mod problem;
pub mod schwarz;
pub mod setup;
pub mod verify;

pub use config::{ChainOptions, PrimalMode, SolverOptions, Tolerances};
pub use decomposition::{Decomposition, Subdomain};
pub use error::{DdError, Result};
pub use problem::{PsdSplit, SaddleSystem};
pub use setup::SaddleChain;
