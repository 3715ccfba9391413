//! Randomized structural invariants over small generated problems.

use proptest::prelude::*;
use saddle_dd::dual::{apply_ms_direct, verify_stable_decomposition};
use saddle_dd::krylov::solve_saddle;
use saddle_dd::linalg::norm2;
use saddle_dd::problem::{generate, CMode, DenseOracle, ProblemKind, ProblemSpec};
use saddle_dd::{ChainOptions, Decomposition, SaddleChain, SaddleSystem, SolverOptions};

fn kind() -> impl Strategy<Value = ProblemKind> {
    prop_oneof![
        Just(ProblemKind::Poisson2dConstrained),
        Just(ProblemKind::MixedDarcyMac),
        Just(ProblemKind::RandomSpdConstrained),
    ]
}

fn c_mode() -> impl Strategy<Value = CMode> {
    prop_oneof![Just(CMode::Zero), (1e-4..1e-1f64).prop_map(CMode::DiagEps), (1e-4..1e-1f64).prop_map(CMode::Split)]
}

fn system() -> impl Strategy<Value = (SaddleSystem, usize, usize)> {
    (kind(), 6usize..12, c_mode(), any::<u64>(), 2usize..7, 1usize..3).prop_map(|(k, nx, c, seed, np, ov)| {
        let s = generate(&ProblemSpec::new(k, nx, nx).with_seed(seed).with_c(c)).unwrap();
        (s, np, ov)
    })
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn decomposition_invariants((s, np, ov) in system()) {
        let dec = Decomposition::build(&s, np, ov).unwrap();
        prop_assert!(dec.primal_pou_error() <= 1e-15);
        prop_assert!(dec.dual_pou_error() <= 1e-15);
        prop_assert_eq!(dec.support_mismatch(&s.b), 0);
        let err = dec.reassemble_c().unwrap().add_scaled(-1.0, &s.c).unwrap().max_abs();
        prop_assert!(err <= 1e-12 * s.c.max_abs().max(1.0));
        prop_assert!(dec.k0 >= 1 && dec.k0 <= dec.len());
    }

    #[test]
    fn dual_operators_agree((s, np, ov) in system(), seed in any::<u64>()) {
        let chain = SaddleChain::build(&s, np, ov, &ChainOptions { tau_s1: Some(1.0), ..Default::default() }).unwrap();
        let mut x = seed;
        let p: Vec<f64> = (0..s.m()).map(|_| {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (x >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }).collect();
        let a = chain.dual.apply_ms(&p).unwrap();
        let b = apply_ms_direct(&s, &chain.primal, &p).unwrap();
        prop_assert!(rel(&a, &b) <= 1e-10);
        let (lhs, rhs) = verify_stable_decomposition(&chain.dual, &p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
    }

    #[test]
    fn block_solve_matches_dense((s, np, ov) in system()) {
        let chain = SaddleChain::build(&s, np, ov, &ChainOptions::default()).unwrap();
        let fu: Vec<f64> = (0..s.n()).map(|i| ((i * 7 % 13) as f64) - 6.0).collect();
        let fp: Vec<f64> = (0..s.m()).map(|i| ((i * 5 % 11) as f64) - 5.0).collect();
        let sol = solve_saddle(&s, &chain, &fu, &fp, &SolverOptions::default()).unwrap();
        let (u, p) = DenseOracle::new(&s).unwrap().solve_lu(&fu, &fp).unwrap();
        prop_assert!(sol.block_residual <= 1e-8);
        let x: Vec<f64> = sol.u.iter().chain(&sol.p).copied().collect();
        let xd: Vec<f64> = u.iter().chain(&p).copied().collect();
        prop_assert!(rel(&x, &xd) <= 1e-6);
    }
}
