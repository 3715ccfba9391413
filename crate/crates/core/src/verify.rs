//! Invariant checks on a built preconditioner chain.
//!
//! Structural checks always run. Checks that need dense operators run when
//! `m` (and `n` for the primal spectrum) fit under [`ORACLE_CAP`].

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decomposition::Decomposition;
use crate::dual::{apply_ms_direct, estimate_cr, verify_stable_decomposition, DualStats};
use crate::error::Result;
use crate::linalg::{chol, norm2, DenseMat};
use crate::ns::{assemble_ma0_naive, SparsityReport};
use crate::problem::{oracle_assemble, product_eigenvalues, DenseOracle, SaddleSystem, ORACLE_CAP};
use crate::schwarz::{spectrum_ma, PrimalStats};
use crate::setup::SaddleChain;

pub const PRIMAL_POU: &str = "primal partition of unity";
pub const DUAL_POU: &str = "dual partition of unity";
pub const SUPPORT: &str = "dual support identity";
pub const C_REASSEMBLY: &str = "C reassembly";
pub const COUPLING: &str = "coupling sets vs brute force";
pub const MS_PATHS: &str = "M_S two-path equivalence";
pub const STABLE_DECOMPOSITION: &str = "stable decomposition c_T = 1";
pub const ALPHA_BOUND: &str = "alpha bound on (S_1, M_S1)";
pub const SM_ROUND_TRIP: &str = "Sherman-Morrison round trip";
pub const MA0_PATHS: &str = "M_A0 assembly paths";
pub const SPARSITY: &str = "coarse column locality";

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Random probes for the operator identities.
    pub probes: usize,
    pub seed: u64,
    /// Run the dense-oracle checks.
    pub dense: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { probes: 100, seed: 17, dense: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity compared against `bound`.
    pub value: f64,
    pub bound: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: value <= bound,
            value,
            bound,
            detail,
        }
    }
}

/// Dense spectral measurements and eigenvalue lists.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralDiagnostics {
    /// Extremes of `M_A^{-1} A`; absent when `n` exceeds the oracle cap.
    pub ma_range: Option<(f64, f64)>,
    /// Extremes of `M_S1^{-1} S_1`.
    pub s1_range: (f64, f64),
    /// Extremes of `N_S^{-1} S` with the exact Schur complement.
    pub ns_range: Option<(f64, f64)>,
    pub alpha: f64,
    pub c_r: f64,
    pub primal: PrimalStats,
    pub dual: DualStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub sparsity: SparsityReport,
    pub spectral: Option<SpectralDiagnostics>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<4} {:<34} {:>11.3e} <= {:<11.3e} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound,
                c.detail
            )?;
        }
        Ok(())
    }
}

/// Test hook: perturbs one dual weight so the dual partition of unity breaks.
pub fn corrupt_dual_weights(dec: &mut Decomposition) {
    if let Some(s) = dec.subdomains.iter_mut().find(|s| !s.dt.is_empty()) {
        s.dt[0] *= 1.5;
    }
}

fn probes(len: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
}

/// Runs every check on `chain`. `dec` is normally `&chain.dec`; a separate
/// argument lets tests hand in a corrupted copy.
pub fn verify_chain(sys: &SaddleSystem, chain: &SaddleChain, dec: &Decomposition, opts: &VerifyOptions) -> Result<VerifyReport> {
    let dual = &chain.dual;
    let m = sys.m();
    let mut checks = Vec::new();

    checks.push(Check::at_most(PRIMAL_POU, dec.primal_pou_error(), 1e-15, String::new()));
    checks.push(Check::at_most(DUAL_POU, dec.dual_pou_error(), 1e-15, String::new()));
    checks.push(Check::at_most(SUPPORT, dec.support_mismatch(&sys.b) as f64, 0.0, "lost entries".into()));

    let c_err = dec.reassemble_c()?.add_scaled(-1.0, &sys.c)?.max_abs();
    checks.push(Check::at_most(C_REASSEMBLY, c_err, 1e-12 * sys.c.max_abs(), "max abs".into()));

    let mismatched = coupling_mismatch(dec, dual);
    checks.push(Check::at_most(COUPLING, mismatched as f64, 0.0, format!("k0 = {}", dec.k0)));

    let ps = probes(m, opts.probes, opts.seed);
    let mut worst: f64 = 0.0;
    for p in &ps {
        worst = worst.max(rel_gap(&dual.apply_ms(p)?, &apply_ms_direct(sys, &chain.primal, p)?));
    }
    checks.push(Check::at_most(MS_PATHS, worst, 1e-10, format!("{} probes", ps.len())));

    let mut worst: f64 = 0.0;
    for p in &ps {
        let (b, a) = verify_stable_decomposition(dual, p)?;
        worst = worst.max((b - a).abs() / b.abs().max(f64::MIN_POSITIVE));
    }
    checks.push(Check::at_most(STABLE_DECOMPOSITION, worst, 1e-12, "|b - a| / b".into()));

    let naive = assemble_ma0_naive(dual)?;
    let gap = if naive.nrows() == 0 { 0.0 } else { chain.ns.ma0.sub(&naive)?.max_abs() };
    checks.push(Check::at_most(MA0_PATHS, gap, 1e-9, format!("dim {}", naive.nrows())));

    let sparsity = chain.ns.sparsity.clone();
    let stray = stray_columns(chain);
    checks.push(Check::at_most(
        SPARSITY,
        stray as f64,
        0.0,
        format!("max columns: B Z {}, S1 Z_S {}", sparsity.max_bz_columns, sparsity.max_s1z_columns),
    ));

    let mut spectral = None;
    if opts.dense && m <= ORACLE_CAP {
        let minv = oracle_assemble(|x| dual.apply_ms1_inv(x), m)?;
        let s1 = dual.s1.to_dense();
        let ev = product_eigenvalues(&minv, &s1)?;
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        let alpha = dual.alpha();
        if dual.coarse.dim() == 0 {
            // one-level: only the upper bound k0 is claimed
            let k0 = dual.k0 as f64;
            checks.push(Check::at_most(ALPHA_BOUND, hi, k0 * (1.0 + 1e-6), format!("one-level, lambda in [{lo:.6}, {hi:.6}]")));
        } else {
            let mut c = Check::at_most(ALPHA_BOUND, hi, alpha * (1.0 + 1e-6), format!("lambda in [{lo:.6}, {hi:.6}], alpha = {alpha}"));
            c.passed &= lo >= 1.0 - 1e-8;
            checks.push(c);
        }

        let worst = sm_round_trip(chain, &minv, &ps)?;
        checks.push(Check::at_most(SM_ROUND_TRIP, worst, 1e-9, format!("{} probes", ps.len())));

        let ma_range = if sys.n() <= ORACLE_CAP { Some(spectrum_ma(sys, &chain.primal)?) } else { None };
        let ns_range = if sys.n() + m <= ORACLE_CAP {
            let s = DenseOracle::new(sys)?.schur()?;
            let nsinv = oracle_assemble(|x| chain.apply_ns_inv(x), m)?;
            let ev = product_eigenvalues(&nsinv, &s)?;
            Some((ev[0], ev[ev.len() - 1]))
        } else {
            None
        };
        spectral = Some(SpectralDiagnostics {
            ma_range,
            s1_range: (lo, hi),
            ns_range,
            alpha,
            c_r: estimate_cr(dec, dual, chain.opts.tol.pinv_drop)?,
            primal: chain.primal.stats(),
            dual: dual.stats(),
        });
    }

    Ok(VerifyReport { checks, sparsity, spectral })
}

/// `O(i)` from the nonzeros of `S_1` against the structural prediction.
fn coupling_mismatch(dec: &Decomposition, dual: &crate::dual::DualPrecond) -> usize {
    let mut bad = 0;
    for (i, s) in dec.subdomains.iter().enumerate() {
        let mut reach = vec![false; dec.m];
        for &r in s.dual.indices() {
            let (cols, vals) = dual.s1.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                if v != 0.0 {
                    reach[c] = true;
                }
            }
        }
        let brute: BTreeSet<usize> = dec
            .subdomains
            .iter()
            .enumerate()
            .filter(|(_, t)| t.dual.indices().iter().any(|&c| reach[c]))
            .map(|(j, _)| j)
            .collect();
        let predicted: BTreeSet<usize> = dec.coupling[i].iter().copied().collect();
        bad += brute.symmetric_difference(&predicted).count();
    }
    bad
}

/// Nonzero columns of `R̃_i B Z` owned outside the dual neighbours of `i`,
/// plus nonzero columns of `R̃_i S_1 Z_S` owned outside `O(i)`.
fn stray_columns(chain: &SaddleChain) -> usize {
    let dec = &chain.dec;
    let dual = &chain.dual;
    let owners_p = &chain.primal.coarse.column_owner;
    let owners_d = &dual.coarse.column_owner;
    let mut stray = 0;
    for (i, s) in dec.subdomains.iter().enumerate() {
        for (mat, owners, allowed) in [(&dual.bz, owners_p, &dec.dual_neighbors[i]), (&dual.coarse.y, owners_d, &dec.coupling[i])] {
            let mut seen = vec![false; mat.ncols()];
            for &r in s.dual.indices() {
                let (cols, vals) = mat.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    if v != 0.0 && !seen[c] {
                        seen[c] = true;
                        if !allowed.contains(&owners[c]) {
                            stray += 1;
                        }
                    }
                }
            }
        }
    }
    stray
}

/// Worst `||N_S (N_S^{-1} g) - g|| / ||g||` with `N_S = M_S1 + W W^T` and
/// `M_S1` applied through a dense factorization of the assembled `M_S1^{-1}`.
fn sm_round_trip(chain: &SaddleChain, minv: &DenseMat, ps: &[Vec<f64>]) -> Result<f64> {
    let mut mi = minv.clone();
    mi.symmetrize();
    let f = chol(&mi)?;
    let w = &chain.ns.w;
    let mut worst: f64 = 0.0;
    for g in ps {
        let x = chain.apply_ns_inv(g)?;
        let mut y = f.solve(&x)?;
        if w.ncols() > 0 {
            for (a, b) in y.iter_mut().zip(w.matvec(&w.matvec_t(&x)?)?) {
                *a += b;
            }
        }
        worst = worst.max(rel_gap(&y, g));
    }
    Ok(worst)
}
