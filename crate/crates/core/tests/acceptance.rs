//! Acceptance criteria. Each test writes one `criterion N: PASS|FAIL` line to
//! stderr (uncaptured) and then asserts.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saddle_dd::dual::{apply_ms_direct, verify_stable_decomposition};
use saddle_dd::krylov::{pcg, solve_saddle};
use saddle_dd::linalg::{chol, norm2};
use saddle_dd::ns::{assemble_ma0, assemble_ma0_naive};
use saddle_dd::problem::{generate, oracle_assemble, product_eigenvalues, CMode, DenseOracle, ProblemKind, ProblemSpec};
use saddle_dd::schwarz::{spectrum_ma, PrimalPrecond};
use saddle_dd::{ChainOptions, Decomposition, SaddleChain, SaddleSystem, SolverOptions};

fn report(id: usize, title: &str, pass: bool, detail: String) {
    let line = format!("criterion {id:>2} [{title}]: {} ({detail})\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} failed: {detail}");
}

fn sys(kind: ProblemKind, nx: usize, c: CMode) -> SaddleSystem {
    generate(&ProblemSpec::new(kind, nx, nx).with_seed(3).with_c(c)).unwrap()
}

/// Every generator with every `C` mode, with its decomposition parameters.
fn shipped() -> Vec<(String, SaddleSystem, usize, usize)> {
    let mut out = Vec::new();
    for kind in [ProblemKind::Poisson2dConstrained, ProblemKind::MixedDarcyMac, ProblemKind::RandomSpdConstrained] {
        for c in [CMode::Zero, CMode::DiagEps(1e-3), CMode::Split(1e-3)] {
            for (np, ov) in [(4, 1), (9, 2)] {
                out.push((format!("{kind:?}/{c:?}/N={np}"), sys(kind, 20, c), np, ov));
            }
        }
    }
    out
}

fn probes(len: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b)
}

fn desk_chain() -> &'static (SaddleSystem, SaddleChain) {
    static CHAIN: OnceLock<(SaddleSystem, SaddleChain)> = OnceLock::new();
    CHAIN.get_or_init(|| {
        let s = sys(ProblemKind::MixedDarcyMac, 16, CMode::DiagEps(1e-3));
        let c = SaddleChain::build(&s, 4, 2, &ChainOptions::default()).unwrap();
        (s, c)
    })
}

#[test]
fn criterion_01_partition_of_unity() {
    let (mut worst, mut slowest) = (0.0f64, 0.0f64);
    for (_, s, np, ov) in shipped() {
        let t = Instant::now();
        let dec = Decomposition::build(&s, np, ov).unwrap();
        worst = worst.max(dec.primal_pou_error()).max(dec.dual_pou_error());
        slowest = slowest.max(t.elapsed().as_secs_f64());
    }
    report(1, "partition of unity", worst <= 1e-15 && slowest < 1.0, format!("max error {worst:e}, slowest {slowest:.3}s"));
}

#[test]
fn criterion_02_support_identity() {
    let lost: usize = shipped().iter().map(|(_, s, np, ov)| Decomposition::build(s, *np, *ov).unwrap().support_mismatch(&s.b)).sum();
    report(2, "dual support identity", lost == 0, format!("{lost} mismatched entries"));
}

#[test]
fn criterion_03_c_reassembly() {
    let mut worst = 0.0f64;
    for (_, s, np, ov) in shipped() {
        let dec = Decomposition::build(&s, np, ov).unwrap();
        let err = dec.reassemble_c().unwrap().add_scaled(-1.0, &s.c).unwrap().max_abs();
        let scale = s.c.max_abs();
        worst = worst.max(if scale > 0.0 { err / scale } else { err });
    }
    report(3, "C reassembly", worst <= 1e-12, format!("max relative error {worst:e}"));
}

#[test]
fn criterion_04_ms_two_paths() {
    let (s, chain) = desk_chain();
    let worst = probes(s.m(), 100, 4)
        .iter()
        .map(|p| rel(&chain.dual.apply_ms(p).unwrap(), &apply_ms_direct(s, &chain.primal, p).unwrap()))
        .fold(0.0, f64::max);
    report(4, "M_S = S_0 + S_1", worst <= 1e-10, format!("max relative gap {worst:e} over 100 probes"));
}

#[test]
fn criterion_05_stable_decomposition() {
    let (s, chain) = desk_chain();
    let worst = probes(s.m(), 100, 5)
        .iter()
        .map(|p| {
            let (b, a) = verify_stable_decomposition(&chain.dual, p).unwrap();
            (b - a).abs() / b.abs()
        })
        .fold(0.0, f64::max);
    report(5, "stable decomposition c_T = 1", worst <= 1e-12, format!("max relative gap {worst:e}"));
}

#[test]
fn criterion_06_alpha_bound() {
    let t = Instant::now();
    let s = sys(ProblemKind::MixedDarcyMac, 24, CMode::Zero);
    let dec = Decomposition::build(&s, 4, 2).unwrap();
    let k0 = dec.k0 as f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for tau in [k0 / 2.0, k0, 2.0 * k0] {
        let opts = ChainOptions { tau_s1: Some(tau), ..Default::default() };
        let chain = SaddleChain::from_decomposition(&s, dec.clone(), &opts).unwrap();
        let minv = oracle_assemble(|x| chain.dual.apply_ms1_inv(x), s.m()).unwrap();
        let ev = product_eigenvalues(&minv, &chain.dual.s1.to_dense()).unwrap();
        let (lo, hi) = (ev[0], ev[ev.len() - 1]);
        let alpha = (k0 / tau).max(1.0);
        pass &= lo >= 1.0 - 1e-8 && hi <= alpha * (1.0 + 1e-6);
        parts.push(format!("tau {tau}: [{lo:.8}, {hi:.8}] alpha {alpha}, dim W0 {}", chain.dual.coarse.dim()));
    }
    let secs = t.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    report(6, "alpha bound", pass, format!("k0 {k0}; {}; {secs:.1}s", parts.join("; ")));
}

#[test]
fn criterion_07_sherman_morrison_round_trip() {
    let (s, chain) = desk_chain();
    let m = s.m();
    let mut minv = oracle_assemble(|x| chain.dual.apply_ms1_inv(x), m).unwrap();
    minv.symmetrize();
    let f = chol(&minv).unwrap();
    let s0 = oracle_assemble(|x| chain.dual.apply_s0(x), m).unwrap();
    let worst = probes(m, 100, 7)
        .iter()
        .map(|g| {
            let x = chain.apply_ns_inv(g).unwrap();
            // N_S x = M_S1 x + S_0 x
            let mut y = f.solve(&x).unwrap();
            for (a, b) in y.iter_mut().zip(s0.matvec(&x).unwrap()) {
                *a += b;
            }
            rel(&y, g)
        })
        .fold(0.0, f64::max);
    report(7, "Sherman-Morrison round trip", worst <= 1e-9, format!("max relative residual {worst:e}, dim V0 {}", chain.ns.dim()));
}

#[test]
fn criterion_08_ma0_paths() {
    let mut worst = 0.0f64;
    let mut dims = Vec::new();
    for (kind, c) in [(ProblemKind::MixedDarcyMac, CMode::DiagEps(1e-3)), (ProblemKind::Poisson2dConstrained, CMode::Zero)] {
        let s = sys(kind, 16, c);
        for tau_s1 in [None, Some(1.0)] {
            let chain = SaddleChain::build(&s, 9, 1, &ChainOptions { tau_s1, ..Default::default() }).unwrap();
            let gap = assemble_ma0(&chain.dual).unwrap().sub(&assemble_ma0_naive(&chain.dual).unwrap()).unwrap().max_abs();
            worst = worst.max(gap);
            dims.push(chain.ns.dim());
        }
    }
    report(8, "M_A0 assembly paths", worst <= 1e-9, format!("max abs gap {worst:e}, dims {dims:?}"));
}

#[test]
fn criterion_09_end_to_end() {
    let cases = [
        (ProblemKind::Poisson2dConstrained, 24, CMode::Zero),
        (ProblemKind::MixedDarcyMac, 16, CMode::DiagEps(1e-3)),
        (ProblemKind::RandomSpdConstrained, 20, CMode::Split(1e-2)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, nx, c) in cases {
        let t = Instant::now();
        let s = sys(kind, nx, c);
        let chain = SaddleChain::build(&s, 4, 2, &ChainOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fu: Vec<f64> = (0..s.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fp: Vec<f64> = (0..s.m()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = solve_saddle(&s, &chain, &fu, &fp, &SolverOptions::default()).unwrap();
        let (u, p) = DenseOracle::new(&s).unwrap().solve_lu(&fu, &fp).unwrap();
        let x: Vec<f64> = sol.u.iter().chain(&sol.p).copied().collect();
        let xd: Vec<f64> = u.iter().chain(&p).copied().collect();
        let err = rel(&x, &xd);
        let res = s.block_residual(&sol.u, &sol.p, &fu, &fp).unwrap();
        let secs = t.elapsed().as_secs_f64();
        pass &= res <= 1e-8 && err <= 1e-6 && secs < 120.0;
        parts.push(format!("{kind:?}: residual {res:.1e}, error {err:.1e}, {secs:.1}s"));
    }
    report(9, "end-to-end block solve", pass, parts.join("; "));
}

struct SweepPoint {
    n_parts: usize,
    dim_v0: usize,
    step3: usize,
    max_bz: usize,
    max_s1z: usize,
}

/// Fixed subdomain size (about 500 velocity dofs), `N` in {4, 9, 16}.
fn weak_sweep() -> &'static (Vec<SweepPoint>, f64) {
    static SWEEP: OnceLock<(Vec<SweepPoint>, f64)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let t = Instant::now();
        let mut pts = Vec::new();
        for np in [4usize, 9, 16] {
            let side = ((500 * np) as f64 / 2.0).sqrt().round() as usize;
            let s = sys(ProblemKind::MixedDarcyMac, side, CMode::Zero);
            let opts = ChainOptions { tau_s1: Some(1.0), ..Default::default() };
            let chain = SaddleChain::build(&s, np, 2, &opts).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(10);
            let fu: Vec<f64> = (0..s.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let fp: Vec<f64> = (0..s.m()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sol = solve_saddle(&s, &chain, &fu, &fp, &SolverOptions::default()).unwrap();
            pts.push(SweepPoint {
                n_parts: np,
                dim_v0: chain.primal.coarse.dim(),
                step3: sol.schur_iterations(),
                max_bz: chain.ns.sparsity.max_bz_columns,
                max_s1z: chain.ns.sparsity.max_s1z_columns,
            });
        }
        (pts, t.elapsed().as_secs_f64())
    })
}

#[test]
fn criterion_10_weak_scaling() {
    let (pts, secs) = weak_sweep();
    let its: Vec<usize> = pts.iter().map(|p| p.step3).collect();
    let (lo, hi) = (*its.iter().min().unwrap() as f64, *its.iter().max().unwrap() as f64);
    let spread = (hi - lo) / lo;
    let coarse_ok = pts.iter().all(|p| p.dim_v0 <= 20 * p.n_parts);
    let dims: Vec<usize> = pts.iter().map(|p| p.dim_v0).collect();
    report(
        10,
        "weak scaling",
        spread <= 0.2 && coarse_ok && *secs < 600.0,
        format!("step 3 iterations {its:?} (spread {:.0}%), dim V0 {dims:?} for N = 4, 9, 16, {secs:.0}s", 100.0 * spread),
    );
}

#[test]
fn criterion_11_column_counts() {
    let (pts, _) = weak_sweep();
    let bz: Vec<usize> = pts.iter().map(|p| p.max_bz).collect();
    let s1z: Vec<usize> = pts.iter().map(|p| p.max_s1z).collect();
    let within = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap() <= 2;
    report(
        11,
        "O(1) nonzero columns",
        within(&bz) && within(&s1z),
        format!("max columns of B Z {bz:?}, of S_1 Z_S {s1z:?} for N = 4, 9, 16"),
    );
}

#[test]
fn criterion_12_geneo_monotonicity() {
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, nx) in [(ProblemKind::Poisson2dConstrained, 16), (ProblemKind::MixedDarcyMac, 12)] {
        let s = sys(kind, nx, CMode::Zero);
        let dec = Decomposition::build(&s, 4, 1).unwrap();
        let mut prev = 0.0;
        let mut mins = Vec::new();
        for tau_a in [0.0, 0.25, 0.5, 0.8, 2.0, 10.0] {
            let p = PrimalPrecond::build(&s, &dec, &ChainOptions { tau_a, ..Default::default() }).unwrap();
            let (lo, _) = spectrum_ma(&s, &p).unwrap();
            pass &= lo >= prev * (1.0 - 1e-10);
            prev = lo;
            mins.push(format!("{lo:.3}"));
        }
        parts.push(format!("{kind:?} lambda_min {}", mins.join(" <= ")));
    }
    // PCG on the 32x32 Laplacian
    let s = sys(ProblemKind::Poisson2dConstrained, 32, CMode::Zero);
    let dec = Decomposition::build(&s, 16, 2).unwrap();
    let b: Vec<f64> = probes(s.n(), 1, 12).remove(0);
    let its = |tau_a: f64| {
        let p = PrimalPrecond::build(&s, &dec, &ChainOptions { tau_a, ..Default::default() }).unwrap();
        pcg(|v| s.a.spmv(v), |v| p.apply(v), &b, 1e-8, 1000).unwrap().1.iterations
    };
    let (one, two) = (its(0.0), its(ChainOptions::default().tau_a));
    pass &= two < one;
    parts.push(format!("32x32 PCG iterations two-level {two} < one-level {one}"));
    report(12, "GenEO-A monotonicity", pass, parts.join("; "));
}

