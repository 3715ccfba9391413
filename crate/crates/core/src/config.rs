//! Numerical knobs of the preconditioner chain.
//!
//! Every tolerance used by the library lives here with its default; nothing
//! downstream hard-codes a threshold.

use serde::{Deserialize, Serialize};

/// Local solver used inside the primal two-level preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PrimalMode {
    /// Additive Schwarz with Dirichlet local solves `(R_i A R_i^T)^{-1}`.
    #[default]
    Asm2,
    /// Weighted local Robin solves `D_i (A_i^rob)^{-1} D_i`.
    Soras,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative drop tolerance when whitening a singular right-hand matrix
    /// of a generalized eigenproblem (relative to its largest eigenvalue).
    pub eig_drop: f64,
    /// Relative drop tolerance of the local pseudo-inverses `T_i^+`.
    pub pinv_drop: f64,
    /// Relative drop tolerance of the S1-orthogonalization of the dual coarse basis.
    pub coarse_drop: f64,
    /// Relative drop tolerance for dependent primal coarse columns.
    pub primal_coarse_drop: f64,
    /// Symmetry tolerance (relative, max norm) for symmetric-flagged matrices.
    pub symmetry: f64,
    /// PSD tolerance (relative to the largest eigenvalue) for element matrices.
    pub psd: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eig_drop: 1e-12,
            pinv_drop: 1e-10,
            coarse_drop: 1e-10,
            primal_coarse_drop: 1e-10,
            symmetry: 1e-12,
            psd: 1e-10,
        }
    }
}

/// Everything needed to set up the preconditioner chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainOptions {
    pub mode: PrimalMode,
    /// Primal GenEO parameter: eigenvectors with `lambda > 1/tau_a` enter `V_0`.
    /// `0` disables the primal coarse space.
    pub tau_a: f64,
    /// Dual GenEO parameter: eigenvectors with `lambda > 1/tau_s1` enter `W_0`.
    /// `None` means `k0`, `Some(0.0)` disables the dual coarse space.
    pub tau_s1: Option<f64>,
    /// Optional cap on primal coarse vectors per subdomain (largest eigenvalues kept).
    pub max_coarse_per_subdomain: Option<usize>,
    /// Local matrices up to this size are factored densely, larger ones with a
    /// profile Cholesky.
    pub dense_cutoff: usize,
    /// Robin shift for SORAS local matrices, relative to the local diagonal.
    pub robin_shift: f64,
    pub tol: Tolerances,
}

impl Default for ChainOptions {
    fn default() -> Self {
        Self {
            mode: PrimalMode::Asm2,
            tau_a: 0.8,
            tau_s1: None,
            max_coarse_per_subdomain: None,
            dense_cutoff: 2000,
            robin_shift: 1.0,
            tol: Tolerances::default(),
        }
    }
}

/// Krylov solver settings for the block solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Target relative block residual.
    pub tol: f64,
    /// Relative tolerance of the inner A-solves inside the Schur operator.
    /// `None` means `1e-2 * tol`.
    pub inner_tol: Option<f64>,
    pub max_iter: usize,
    /// Use flexible CG for the Schur stage (tolerates inexact inner solves).
    pub flexible: bool,
    /// Number of previous directions kept by flexible CG.
    pub flexible_window: usize,
    /// Maximum number of defect-correction sweeps on the block system.
    pub max_refinements: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            inner_tol: None,
            max_iter: 1000,
            flexible: true,
            flexible_window: 5,
            max_refinements: 3,
        }
    }
}

impl SolverOptions {
    pub fn inner_tol(&self) -> f64 {
        self.inner_tol.unwrap_or(1e-2 * self.tol)
    }
}
