//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddle_dd::decomposition::DecompositionStats;
use saddle_dd::dual::DualStats;
use saddle_dd::krylov::{solve_saddle, write_history_csv, StageReport};
use saddle_dd::ns::{ma0_min_eigenvalue, SparsityReport};
use saddle_dd::problem::{generate, oracle_assemble, pencil_eigenvalues, product_eigenvalues, DenseOracle, ProblemKind, SaddleSystem};
use saddle_dd::schwarz::{spectrum_ma, PrimalStats};
use saddle_dd::setup::SetupTimings;
use saddle_dd::verify::{verify_chain, VerifyOptions, VerifyReport};
use saddle_dd::{PrimalMode, SaddleChain};
use serde::Serialize;

use crate::config::{RhsKind, RunConfig};

/// One Krylov stage without its residual history (that goes to CSV).
#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub stage: String,
    pub sweep: usize,
    pub iterations: usize,
    pub final_relres: f64,
    pub converged: bool,
    pub lanczos_min: f64,
    pub lanczos_max: f64,
    pub lanczos_cond_estimate: f64,
}

impl From<&StageReport> for StageSummary {
    fn from(s: &StageReport) -> Self {
        let r = &s.report;
        Self {
            stage: s.stage.clone(),
            sweep: s.sweep,
            iterations: r.iterations,
            final_relres: r.final_relres,
            converged: r.converged,
            lanczos_min: r.lanczos_min,
            lanczos_max: r.lanczos_max,
            lanczos_cond_estimate: r.lanczos_cond_estimate,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub n_parts: usize,
    pub overlap: usize,
    pub dim_v0: usize,
    pub dim_w0: usize,
    pub k0: usize,
    pub alpha: f64,
    pub tau_a: f64,
    pub tau_s1: f64,
    pub mode: PrimalMode,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timings {
    pub setup: SetupTimings,
    pub solve: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub problem: String,
    pub dims: Dims,
    pub decomposition: DecompositionStats,
    pub stages: Vec<StageSummary>,
    pub schur_iterations: usize,
    pub sweeps: usize,
    pub total_a_solves: usize,
    pub inner_iterations: usize,
    pub block_residual: f64,
    pub ma0_min_eigenvalue: f64,
    pub sparsity: SparsityReport,
    pub primal: PrimalStats,
    /// Per-subdomain eigenvalue lists; only with `verbose`.
    pub dual: Option<DualStats>,
    pub verify: Option<VerifyReport>,
    pub timings: Timings,
}

pub fn describe(cfg: &RunConfig) -> String {
    match &cfg.files {
        Some(f) => format!("files: {}", f.a.display()),
        None => serde_json::to_string(&cfg.problem).unwrap_or_default(),
    }
}

pub fn load_problem(cfg: &RunConfig) -> Result<SaddleSystem> {
    Ok(match &cfg.files {
        Some(f) => f.load()?,
        None => generate(&cfg.problem)?,
    })
}

fn rhs(cfg: &RunConfig, n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    match cfg.rhs {
        RhsKind::Zero => (vec![0.0; n], vec![0.0; m]),
        RhsKind::Ones => (vec![1.0; n], vec![1.0; m]),
        RhsKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rhs_seed);
            let fu = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fp = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (fu, fp)
        }
    }
}

fn progress(cfg: &RunConfig, msg: impl AsRef<str>) {
    if cfg.verbose {
        eprintln!("{}", msg.as_ref());
    }
}

pub fn build_chain(cfg: &RunConfig, sys: &SaddleSystem, n_parts: usize) -> Result<SaddleChain> {
    progress(cfg, format!("setup: n = {}, m = {}, N = {n_parts}", sys.n(), sys.m()));
    let chain = SaddleChain::build(sys, n_parts, cfg.overlap, &cfg.chain_options())?;
    progress(
        cfg,
        format!("setup done: dim V0 = {}, dim W0 = {}, k0 = {}", chain.primal.coarse.dim(), chain.dual.coarse.dim(), chain.dec.k0),
    );
    Ok(chain)
}

fn verify_options(cfg: &RunConfig) -> VerifyOptions {
    VerifyOptions {
        probes: cfg.probes,
        ..VerifyOptions::default()
    }
}

/// Setup, solve and (optionally) checks. The residual histories are written
/// to `cfg.csv` when set.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let sys = load_problem(cfg)?;
    run_on(cfg, &sys, cfg.n_parts)
}

fn run_on(cfg: &RunConfig, sys: &SaddleSystem, n_parts: usize) -> Result<RunSummary> {
    let chain = build_chain(cfg, sys, n_parts)?;
    let (fu, fp) = rhs(cfg, sys.n(), sys.m());
    let t = Instant::now();
    let sol = solve_saddle(sys, &chain, &fu, &fp, &cfg.solver_options())?;
    let solve = t.elapsed().as_secs_f64();
    progress(cfg, format!("solve done: block residual {:.3e}, step 3 iterations {}", sol.block_residual, sol.schur_iterations()));
    if let Some(path) = &cfg.csv {
        let w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        write_history_csv(&sol.reports, w)?;
    }
    let verify = if cfg.verify { Some(verify_chain(sys, &chain, &chain.dec, &verify_options(cfg))?) } else { None };
    Ok(RunSummary {
        problem: describe(cfg),
        dims: Dims {
            n: sys.n(),
            m: sys.m(),
            n_parts: chain.dec.len(),
            overlap: cfg.overlap,
            dim_v0: chain.primal.coarse.dim(),
            dim_w0: chain.dual.coarse.dim(),
            k0: chain.dec.k0,
            alpha: chain.dual.alpha(),
            tau_a: cfg.tau_a,
            tau_s1: chain.dual.tau_s1,
            mode: cfg.mode,
        },
        decomposition: chain.dec.stats(),
        stages: sol.reports.iter().map(StageSummary::from).collect(),
        schur_iterations: sol.schur_iterations(),
        sweeps: sol.sweeps,
        total_a_solves: sol.total_a_solves,
        inner_iterations: sol.inner_iterations,
        block_residual: sol.block_residual,
        ma0_min_eigenvalue: ma0_min_eigenvalue(&chain.ns.ma0)?,
        sparsity: chain.ns.sparsity.clone(),
        primal: chain.primal.stats(),
        dual: cfg.verbose.then(|| chain.dual.stats()),
        verify,
        timings: Timings {
            setup: chain.timings.clone(),
            solve,
        },
    })
}

/// Checks only, no solve.
pub fn verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let sys = load_problem(cfg)?;
    let chain = build_chain(cfg, &sys, cfg.n_parts)?;
    Ok(verify_chain(&sys, &chain, &chain.dec, &verify_options(cfg))?)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n_parts: usize,
    pub nx: usize,
    pub ny: usize,
    pub n: usize,
    pub m: usize,
    pub dim_v0: usize,
    pub dim_w0: usize,
    pub k0: usize,
    pub alpha: f64,
    pub step1_iterations: usize,
    pub step3_iterations: usize,
    pub block_residual: f64,
    pub max_bz_columns: usize,
    pub max_s1z_columns: usize,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

/// Grid side giving about `local` primal dofs per subdomain.
fn scaled_grid(kind: ProblemKind, local: usize, n_parts: usize) -> usize {
    // the MAC grid carries two velocity dofs per cell
    let per_cell = if kind == ProblemKind::MixedDarcyMac { 2.0 } else { 1.0 };
    ((local * n_parts) as f64 / per_cell).sqrt().round().max(2.0) as usize
}

pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let fixed = match (&cfg.files, cfg.sweep_local_size) {
        (Some(_), _) | (None, None) => Some(load_problem(cfg)?),
        _ => None,
    };
    let mut rows = Vec::new();
    for &np in &cfg.sweep_n {
        let owned;
        let (sys, nx, ny) = match &fixed {
            Some(s) => (s, cfg.problem.nx, cfg.problem.ny),
            None => {
                let side = scaled_grid(cfg.problem.kind, cfg.sweep_local_size.unwrap_or(500), np);
                let mut spec = cfg.problem.clone();
                spec.nx = side;
                spec.ny = side;
                owned = generate(&spec)?;
                (&owned, side, side)
            }
        };
        let s = run_on(cfg, sys, np)?;
        let step1 = s.stages.first().map_or(0, |st| st.iterations);
        rows.push(SweepRow {
            n_parts: np,
            nx,
            ny,
            n: s.dims.n,
            m: s.dims.m,
            dim_v0: s.dims.dim_v0,
            dim_w0: s.dims.dim_w0,
            k0: s.dims.k0,
            alpha: s.dims.alpha,
            step1_iterations: step1,
            step3_iterations: s.schur_iterations,
            block_residual: s.block_residual,
            max_bz_columns: s.sparsity.max_bz_columns,
            max_s1z_columns: s.sparsity.max_s1z_columns,
            setup_seconds: s.timings.setup.decomposition + s.timings.setup.primal + s.timings.setup.dual + s.timings.setup.ma0,
            solve_seconds: s.timings.solve,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the problem in the on-disk format plus `spec.json`.
pub fn gen(cfg: &RunConfig, dir: &Path) -> Result<()> {
    let sys = load_problem(cfg)?;
    sys.write_dir(dir)?;
    let mut w = BufWriter::new(File::create(dir.join("spec.json"))?);
    serde_json::to_writer_pretty(&mut w, &cfg.problem)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Spectrum {
    pub n: usize,
    pub m: usize,
    pub k0: usize,
    pub alpha: f64,
    /// Extremes of `M_A^{-1} A`.
    pub ma: (f64, f64),
    /// Extremes of the pencil `(S, M_S)`, `S` the exact Schur complement.
    pub s_ms: (f64, f64),
    /// Extremes of `M_S1^{-1} S_1`.
    pub s1: (f64, f64),
    /// Extremes of `N_S^{-1} S`.
    pub ns: (f64, f64),
}

fn extremes(v: &[f64]) -> (f64, f64) {
    (v[0], v[v.len() - 1])
}

/// Dense oracle assembly of every operator of the chain and their spectra.
pub fn spectrum(cfg: &RunConfig) -> Result<Spectrum> {
    let sys = load_problem(cfg)?;
    let chain = build_chain(cfg, &sys, cfg.n_parts)?;
    let m = sys.m();
    let s = DenseOracle::new(&sys)?.schur()?;
    let ms = oracle_assemble(|x| chain.dual.apply_ms(x), m)?;
    let minv_s1 = oracle_assemble(|x| chain.dual.apply_ms1_inv(x), m)?;
    let ns_inv = oracle_assemble(|x| chain.apply_ns_inv(x), m)?;
    Ok(Spectrum {
        n: sys.n(),
        m,
        k0: chain.dec.k0,
        alpha: chain.dual.alpha(),
        ma: spectrum_ma(&sys, &chain.primal)?,
        s_ms: extremes(&pencil_eigenvalues(&s, &ms)?),
        s1: extremes(&product_eigenvalues(&minv_s1, &chain.dual.s1.to_dense())?),
        ns: extremes(&product_eigenvalues(&ns_inv, &s)?),
    })
}
