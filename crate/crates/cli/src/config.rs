//! Run configuration: JSON file, environment and flags, merged in that order.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use saddle_dd::problem::{CMode, ProblemFiles, ProblemKind, ProblemSpec};
use saddle_dd::{ChainOptions, PrimalMode, SolverOptions};
use serde::{Deserialize, Serialize};

/// Right-hand side of the block system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RhsKind {
    /// Uniform entries in [-1, 1), seeded by `rhs_seed`.
    Random,
    Ones,
    Zero,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Generated problem; ignored when `files` is set.
    pub problem: ProblemSpec,
    /// Problem read from disk.
    pub files: Option<ProblemFiles>,
    pub n_parts: usize,
    pub overlap: usize,
    pub tau_a: f64,
    /// `None` means `k0`.
    pub tau_s1: Option<f64>,
    pub mode: PrimalMode,
    pub tol: f64,
    /// `None` means `1e-2 * tol`.
    pub inner_tol: Option<f64>,
    pub eig_drop: f64,
    pub max_iter: usize,
    pub flexible: bool,
    pub rhs: RhsKind,
    pub rhs_seed: u64,
    /// Subdomain counts of a sweep.
    pub sweep_n: Vec<usize>,
    /// Target primal dofs per subdomain in a sweep; the grid grows with `N`.
    /// `None` keeps the problem fixed.
    pub sweep_local_size: Option<usize>,
    /// JSON summary path (stdout when absent).
    pub output: Option<PathBuf>,
    /// CSV path for residual histories (`run`) or the sweep table (`sweep`).
    pub csv: Option<PathBuf>,
    /// Target directory of `gen`.
    pub out_dir: Option<PathBuf>,
    /// Run the dense-oracle checks during `run`.
    pub verify: bool,
    /// Random probes per operator identity in the checks.
    pub probes: usize,
    /// Worker threads; `1` makes every result bit-reproducible.
    pub threads: Option<usize>,
    pub verbose: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let chain = ChainOptions::default();
        let solver = SolverOptions::default();
        Self {
            problem: ProblemSpec::new(ProblemKind::MixedDarcyMac, 24, 24),
            files: None,
            n_parts: 4,
            overlap: 2,
            tau_a: chain.tau_a,
            tau_s1: chain.tau_s1,
            mode: chain.mode,
            tol: solver.tol,
            inner_tol: solver.inner_tol,
            eig_drop: chain.tol.eig_drop,
            max_iter: solver.max_iter,
            flexible: solver.flexible,
            rhs: RhsKind::Random,
            rhs_seed: 1,
            sweep_n: vec![4, 9, 16],
            sweep_local_size: None,
            output: None,
            csv: None,
            out_dir: None,
            verify: false,
            probes: 100,
            threads: None,
            verbose: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_parts == 0 {
            bail!("n_parts must be at least 1");
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            bail!("tol must lie in (0, 1), got {}", self.tol);
        }
        if let Some(t) = self.inner_tol {
            if !(t > 0.0 && t < 1.0) {
                bail!("inner_tol must lie in (0, 1), got {t}");
            }
        }
        if !(self.tau_a >= 0.0) || !self.tau_a.is_finite() {
            bail!("tau_a must be finite and nonnegative, got {}", self.tau_a);
        }
        if let Some(t) = self.tau_s1 {
            if !(t >= 0.0) || !t.is_finite() {
                bail!("tau_s1 must be finite and nonnegative, got {t}");
            }
        }
        if !(self.eig_drop > 0.0 && self.eig_drop < 1.0) {
            bail!("eig_drop must lie in (0, 1), got {}", self.eig_drop);
        }
        if self.max_iter == 0 {
            bail!("max_iter must be positive");
        }
        if self.threads == Some(0) {
            bail!("threads must be positive");
        }
        if self.sweep_n.contains(&0) {
            bail!("sweep_n entries must be positive");
        }
        match &self.files {
            Some(f) => {
                for p in [&f.a, &f.b, &f.c, &f.a_split].into_iter().chain(&f.c_split).chain(&f.coords) {
                    if !p.exists() {
                        bail!("input file {} does not exist", p.display());
                    }
                }
            }
            None => {
                if self.problem.nx == 0 || self.problem.ny == 0 {
                    bail!("grid dimensions must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn chain_options(&self) -> ChainOptions {
        let mut c = ChainOptions {
            mode: self.mode,
            tau_a: self.tau_a,
            tau_s1: self.tau_s1,
            ..ChainOptions::default()
        };
        c.tol.eig_drop = self.eig_drop;
        c
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            inner_tol: self.inner_tol,
            max_iter: self.max_iter,
            flexible: self.flexible,
            ..SolverOptions::default()
        }
    }
}

/// Parses `zero`, `diag:EPS` or `split:EPS`.
pub fn parse_c_mode(s: &str) -> std::result::Result<CMode, String> {
    let eps = |v: &str| v.parse::<f64>().map_err(|e| format!("bad epsilon {v}: {e}"));
    match s.split_once(':') {
        None if s == "zero" => Ok(CMode::Zero),
        Some(("diag", v)) => Ok(CMode::DiagEps(eps(v)?)),
        Some(("split", v)) => Ok(CMode::Split(eps(v)?)),
        _ => Err(format!("expected zero, diag:EPS or split:EPS, got {s}")),
    }
}

/// Flags shared by every subcommand. Each maps to the `RunConfig` key of the
/// same name and overrides the config file; every flag also reads a
/// `DDSP_`-prefixed environment variable.
#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON config file.
    #[arg(long, env = "DDSP_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, env = "DDSP_KIND", value_parser = parse_kind)]
    pub kind: Option<ProblemKind>,
    #[arg(long, env = "DDSP_NX")]
    pub nx: Option<usize>,
    #[arg(long, env = "DDSP_NY")]
    pub ny: Option<usize>,
    #[arg(long, env = "DDSP_SEED")]
    pub seed: Option<u64>,
    /// `zero`, `diag:EPS` or `split:EPS`.
    #[arg(long, env = "DDSP_C_MODE", value_parser = parse_c_mode)]
    pub c_mode: Option<CMode>,
    #[arg(long, env = "DDSP_CONSTRAINT_FRACTION")]
    pub constraint_fraction: Option<f64>,
    /// Directory holding A.mtx, B.mtx, C.mtx, A.split and optionally C.split, coords.txt.
    #[arg(long, env = "DDSP_INPUT_DIR")]
    pub input_dir: Option<PathBuf>,
    #[arg(long, short = 'N', env = "DDSP_N_PARTS")]
    pub n_parts: Option<usize>,
    #[arg(long, env = "DDSP_OVERLAP")]
    pub overlap: Option<usize>,
    #[arg(long, env = "DDSP_TAU_A")]
    pub tau_a: Option<f64>,
    #[arg(long, env = "DDSP_TAU_S1")]
    pub tau_s1: Option<f64>,
    #[arg(long, env = "DDSP_MODE", value_parser = parse_mode)]
    pub mode: Option<PrimalMode>,
    #[arg(long, env = "DDSP_TOL")]
    pub tol: Option<f64>,
    #[arg(long, env = "DDSP_INNER_TOL")]
    pub inner_tol: Option<f64>,
    #[arg(long, env = "DDSP_EIG_DROP")]
    pub eig_drop: Option<f64>,
    #[arg(long, env = "DDSP_MAX_ITER")]
    pub max_iter: Option<usize>,
    #[arg(long, env = "DDSP_FLEXIBLE")]
    pub flexible: Option<bool>,
    #[arg(long, env = "DDSP_RHS", value_enum)]
    pub rhs: Option<RhsKind>,
    #[arg(long, env = "DDSP_RHS_SEED")]
    pub rhs_seed: Option<u64>,
    /// Comma-separated subdomain counts.
    #[arg(long, env = "DDSP_SWEEP_N", value_delimiter = ',')]
    pub sweep_n: Option<Vec<usize>>,
    #[arg(long, env = "DDSP_SWEEP_LOCAL_SIZE")]
    pub sweep_local_size: Option<usize>,
    #[arg(long, short, env = "DDSP_OUTPUT")]
    pub output: Option<PathBuf>,
    #[arg(long, env = "DDSP_CSV")]
    pub csv: Option<PathBuf>,
    #[arg(long, env = "DDSP_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, env = "DDSP_VERIFY")]
    pub verify: bool,
    #[arg(long, env = "DDSP_PROBES")]
    pub probes: Option<usize>,
    #[arg(long, env = "DDSP_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, short, env = "DDSP_VERBOSE")]
    pub verbose: bool,
}

fn parse_kind(s: &str) -> std::result::Result<ProblemKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown kind {s}; expected poisson2d_constrained, mixed_darcy_mac or random_spd_constrained"))
}

fn parse_mode(s: &str) -> std::result::Result<PrimalMode, String> {
    serde_json::from_value(serde_json::Value::String(s.to_lowercase())).map_err(|_| format!("unknown mode {s}; expected asm2 or soras"))
}

impl ConfigArgs {
    /// Config file (or defaults) with every given flag applied on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                }
            )*};
        }
        set!(n_parts, overlap, tau_a, tol, eig_drop, max_iter, flexible, rhs, rhs_seed, sweep_n, mode);
        if let Some(v) = self.tau_s1 {
            c.tau_s1 = Some(v);
        }
        if let Some(v) = self.inner_tol {
            c.inner_tol = Some(v);
        }
        if let Some(v) = self.sweep_local_size {
            c.sweep_local_size = Some(v);
        }
        if let Some(v) = self.threads {
            c.threads = Some(v);
        }
        if let Some(v) = self.probes {
            c.probes = v;
        }
        for (dst, src) in [(&mut c.output, &self.output), (&mut c.csv, &self.csv), (&mut c.out_dir, &self.out_dir)] {
            if src.is_some() {
                *dst = src.clone();
            }
        }
        if let Some(k) = self.kind {
            c.problem.kind = k;
        }
        if let Some(v) = self.nx {
            c.problem.nx = v;
        }
        if let Some(v) = self.ny {
            c.problem.ny = v;
        }
        if let Some(v) = self.seed {
            c.problem.seed = v;
        }
        if let Some(v) = self.c_mode {
            c.problem.c_mode = v;
        }
        if let Some(v) = self.constraint_fraction {
            c.problem.constraint_fraction = v;
        }
        if let Some(d) = &self.input_dir {
            c.files = Some(ProblemFiles::in_dir(d));
        }
        c.verify |= self.verify;
        c.verbose |= self.verbose;
        c.validate()?;
        Ok(c)
    }
}
