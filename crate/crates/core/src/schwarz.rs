//! Two-level overlapping Schwarz preconditioners for `A`.
//!
//! ```text
//! M_A^{-1} = Z (Z^T A Z)^{-1} Z^T + sum_i R_i^T K_i^{-1} R_i
//! ```
//!
//! with `K_i^{-1} = (R_i A R_i^T)^{-1}` (ASM) or
//! `K_i^{-1} = D_i (A_i^rob)^{-1} D_i` (SORAS). The coarse basis `Z` is built
//! from the local pencils `D_i A_i D_i p = lambda A_i^neu p`.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ChainOptions, PrimalMode};
use crate::decomposition::Decomposition;
use crate::error::{check_dim, DdError, Result};
use crate::linalg::{chol_dropping, gen_sym_eig, CholFactor, DenseChol, DenseMat, Restriction, SparseMat};
use crate::problem::{oracle_assemble, product_eigenvalues, SaddleSystem};

/// Coarse space `V_0` spanned by the columns of `Z`.
#[derive(Debug, Clone)]
pub struct CoarseSpaceA {
    /// `n x dim(V_0)`, every column supported in one subdomain.
    pub z: SparseMat,
    /// Subdomain owning each column.
    pub column_owner: Vec<usize>,
    /// Cholesky factor `L_0` of `Z^T A Z`; `None` for an empty space.
    pub factor: Option<DenseChol>,
    /// Per subdomain, the finite pencil eigenvalues (ascending).
    pub eigenvalues: Vec<Vec<f64>>,
    /// Per subdomain, the number of `+inf` eigenvalues.
    pub infinite: Vec<usize>,
    /// Per subdomain, the number of vectors selected before dependency dropping.
    pub selected: Vec<usize>,
}

impl CoarseSpaceA {
    pub fn empty(n: usize, nsub: usize) -> Self {
        Self {
            z: SparseMat::zeros(n, 0),
            column_owner: Vec::new(),
            factor: None,
            eigenvalues: vec![Vec::new(); nsub],
            infinite: vec![0; nsub],
            selected: vec![0; nsub],
        }
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    /// `Z (Z^T A Z)^{-1} Z^T r`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let Some(f) = &self.factor else {
            return Ok(vec![0.0; self.z.nrows()]);
        };
        let y = f.solve(&self.z.spmv_t(r)?)?;
        self.z.spmv(&y)
    }
}

/// GenEO coarse space for `A`.
///
/// Per subdomain the pencil `(D_i A_i D_i, A_i^neu)` is solved and the
/// eigenvectors with `lambda > 1/tau_a` (including the `+inf` directions of
/// the Neumann kernel) are lifted as `R_i^T D_i p`. `tau_a = 0` gives an
/// empty space. Columns that are numerically dependent in the `A` inner
/// product are dropped.
pub fn build_geneo_a(sys: &SaddleSystem, dec: &Decomposition, opts: &ChainOptions) -> Result<CoarseSpaceA> {
    let n = sys.n();
    let nsub = dec.len();
    if opts.tau_a <= 0.0 {
        return Ok(CoarseSpaceA::empty(n, nsub));
    }
    let threshold = 1.0 / opts.tau_a;
    let per_sub: Vec<Result<(Vec<f64>, usize, Vec<Vec<f64>>)>> = dec
        .subdomains
        .par_iter()
        .map(|s| {
            let left = s.a_local.to_dense().scale_rows_cols(&s.d, &s.d);
            let right = s.a_neu.to_dense();
            let eig = gen_sym_eig(&left, &right, opts.tol.eig_drop)?;
            // largest first: infinite directions, then finite descending
            let mut picked: Vec<Vec<f64>> = eig.infinite.clone();
            picked.extend(eig.finite.iter().rev().filter(|p| p.value > threshold).map(|p| p.vector.clone()));
            if let Some(cap) = opts.max_coarse_per_subdomain {
                picked.truncate(cap);
            }
            let lifted = picked
                .into_iter()
                .map(|v| v.iter().zip(&s.d).map(|(x, w)| x * w).collect())
                .collect();
            Ok((eig.finite.iter().map(|p| p.value).collect(), eig.infinite.len(), lifted))
        })
        .collect();

    let mut trip = Vec::new();
    let mut owner = Vec::new();
    let mut eigenvalues = Vec::with_capacity(nsub);
    let mut infinite = Vec::with_capacity(nsub);
    let mut selected = Vec::with_capacity(nsub);
    for (s, res) in dec.subdomains.iter().zip(per_sub) {
        let (vals, ninf, cols) = res?;
        eigenvalues.push(vals);
        infinite.push(ninf);
        selected.push(cols.len());
        for col in cols {
            let c = owner.len();
            for (&g, &v) in s.primal.indices().iter().zip(&col) {
                if v != 0.0 {
                    trip.push((g, c, v));
                }
            }
            owner.push(s.id);
        }
    }
    if owner.is_empty() {
        let mut e = CoarseSpaceA::empty(n, nsub);
        e.eigenvalues = eigenvalues;
        e.infinite = infinite;
        return Ok(e);
    }
    let z_all = SparseMat::from_triplets(n, owner.len(), &trip)?;
    let gram = galerkin(&sys.a, &z_all)?;
    let (keep, factor) = chol_dropping(&gram, opts.tol.primal_coarse_drop)?;
    let z = if keep.iter().enumerate().all(|(a, &b)| a == b) && keep.len() == owner.len() { z_all } else { z_all.submatrix(&(0..n).collect::<Vec<_>>(), &keep) };
    let column_owner = keep.iter().map(|&k| owner[k]).collect();
    Ok(CoarseSpaceA {
        z,
        column_owner,
        factor: Some(factor),
        eigenvalues,
        infinite,
        selected,
    })
}

/// Dense `Z^T M Z`.
pub(crate) fn galerkin(m: &SparseMat, z: &SparseMat) -> Result<DenseMat> {
    let mz = m.matmul(z)?;
    let mut g = z.transpose().matmul(&mz)?.to_dense();
    g.symmetrize();
    Ok(g)
}

/// Local piece of the primal preconditioner.
#[derive(Debug, Clone)]
struct LocalSolver {
    primal: Restriction,
    d: Vec<f64>,
    factor: CholFactor,
}

/// Two-level preconditioner `M_A^{-1}`.
#[derive(Debug, Clone)]
pub struct PrimalPrecond {
    pub mode: PrimalMode,
    pub coarse: CoarseSpaceA,
    local: Vec<LocalSolver>,
    n: usize,
}

impl PrimalPrecond {
    /// Builds the local factors and the GenEO coarse space.
    pub fn build(sys: &SaddleSystem, dec: &Decomposition, opts: &ChainOptions) -> Result<Self> {
        let coarse = build_geneo_a(sys, dec, opts)?;
        Self::with_coarse(sys, dec, opts, coarse)
    }

    /// Local factors with a given coarse space.
    pub fn with_coarse(sys: &SaddleSystem, dec: &Decomposition, opts: &ChainOptions, coarse: CoarseSpaceA) -> Result<Self> {
        check_dim("PrimalPrecond", sys.n(), coarse.z.nrows())?;
        let local = dec
            .subdomains
            .par_iter()
            .map(|s| {
                let mat = match opts.mode {
                    PrimalMode::Asm2 => s.a_local.clone(),
                    PrimalMode::Soras => robin_matrix(&s.a_local, &s.a_neu, &s.interface, opts.robin_shift)?,
                };
                let factor = CholFactor::factor_sparse(&mat, opts.dense_cutoff).map_err(|e| match e {
                    DdError::NotSpd { pivot, value } => DdError::NotSpd { pivot, value },
                    other => other,
                })?;
                Ok(LocalSolver {
                    primal: s.primal.clone(),
                    d: s.d.clone(),
                    factor,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            mode: opts.mode,
            coarse,
            local,
            n: sys.n(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_subdomains(&self) -> usize {
        self.local.len()
    }

    /// Local operator `K_i^{-1}` on a vector in the local primal ordering.
    pub fn local_solve(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let l = &self.local[i];
        match self.mode {
            PrimalMode::Asm2 => l.factor.solve(x),
            PrimalMode::Soras => {
                let dx: Vec<f64> = x.iter().zip(&l.d).map(|(v, w)| v * w).collect();
                let y = l.factor.solve(&dx)?;
                Ok(y.iter().zip(&l.d).map(|(v, w)| v * w).collect())
            }
        }
    }

    /// One-level part `sum_i R_i^T K_i^{-1} R_i r`.
    pub fn apply_local(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_dim("apply_local", self.n, r.len())?;
        let parts = self
            .local
            .par_iter()
            .enumerate()
            .map(|(i, l)| self.local_solve(i, &l.primal.restrict(r)))
            .collect::<Result<Vec<_>>>()?;
        let mut y = vec![0.0; self.n];
        for (l, p) in self.local.iter().zip(&parts) {
            l.primal.extend_add(p, &mut y);
        }
        Ok(y)
    }

    /// `M_A^{-1} r`.
    pub fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.apply_local(r)?;
        if self.coarse.dim() > 0 {
            for (a, b) in y.iter_mut().zip(self.coarse.apply(r)?) {
                *a += b;
            }
        }
        Ok(y)
    }
}

/// `A_i^neu + rho * diag(A_i)` on interface dofs.
fn robin_matrix(a_local: &SparseMat, a_neu: &SparseMat, interface: &[bool], rho: f64) -> Result<SparseMat> {
    let diag = a_local.diagonal();
    let trip: Vec<(usize, usize, f64)> = interface
        .iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(k, _)| (k, k, rho * diag[k]))
        .collect();
    let shift = SparseMat::from_triplets(a_local.nrows(), a_local.ncols(), &trip)?;
    a_neu.add_scaled(1.0, &shift)
}

/// Extreme eigenvalues of `M_A^{-1} A` by dense assembly.
pub fn spectrum_ma(sys: &SaddleSystem, p: &PrimalPrecond) -> Result<(f64, f64)> {
    let minv = oracle_assemble(|x| p.apply(x), sys.n())?;
    let vals = product_eigenvalues(&minv, &sys.a.to_dense())?;
    Ok((vals[0], *vals.last().expect("nonempty spectrum")))
}

/// Per-run primal diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct PrimalStats {
    pub dim_v0: usize,
    pub selected_per_subdomain: Vec<usize>,
    pub infinite_per_subdomain: Vec<usize>,
}

impl PrimalPrecond {
    pub fn stats(&self) -> PrimalStats {
        PrimalStats {
            dim_v0: self.coarse.dim(),
            selected_per_subdomain: self.coarse.selected.clone(),
            infinite_per_subdomain: self.coarse.infinite.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::problem::{generate, DenseOracle, ProblemKind, ProblemSpec};

    fn poisson(nx: usize) -> SaddleSystem {
        generate(&ProblemSpec::new(ProblemKind::Poisson2dConstrained, nx, nx).with_seed(2)).unwrap()
    }

    fn opts(tau: f64) -> ChainOptions {
        ChainOptions {
            tau_a: tau,
            ..ChainOptions::default()
        }
    }

    #[test]
    fn single_domain_is_exact_inverse() {
        let s = poisson(6);
        let dec = Decomposition::build(&s, 1, 1).unwrap();
        let p = PrimalPrecond::build(&s, &dec, &opts(0.0)).unwrap();
        assert_eq!(p.coarse.dim(), 0);
        let (lo, hi) = spectrum_ma(&s, &p).unwrap();
        assert!((lo - 1.0).abs() < 1e-10 && (hi - 1.0).abs() < 1e-10);
        // pencil (A, A): every eigenvalue is one
        let c = build_geneo_a(&s, &dec, &opts(0.5)).unwrap();
        assert_eq!(c.dim(), 0);
        assert!(c.eigenvalues[0].iter().all(|v| (v - 1.0).abs() < 1e-8));
    }

    #[test]
    fn zero_residual() {
        let s = poisson(8);
        let dec = Decomposition::build(&s, 4, 1).unwrap();
        let p = PrimalPrecond::build(&s, &dec, &ChainOptions::default()).unwrap();
        assert!(p.apply(&vec![0.0; s.n()]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn operator_matches_dense_formula() {
        let s = poisson(16);
        let dec = Decomposition::build(&s, 4, 2).unwrap();
        let p = PrimalPrecond::build(&s, &dec, &ChainOptions::default()).unwrap();
        let o = DenseOracle::new(&s).unwrap();
        let minv = oracle_assemble(|x| p.apply(x), s.n()).unwrap();
        // Z (Z^T A Z)^{-1} Z^T + sum_i R_i^T (R_i A R_i^T)^{-1} R_i, densely
        let z = p.coarse.z.to_dense();
        let g = z.t_matmul(&o.a.matmul(&z).unwrap()).unwrap();
        let mut dense = DenseMat::zeros(s.n(), s.n());
        let zt = z.transpose();
        for j in 0..s.n() {
            let y = g.lu_solve(zt.col(j)).unwrap();
            dense.col_mut(j).copy_from_slice(&z.matvec(&y).unwrap());
        }
        for sd in &dec.subdomains {
            let idx = sd.primal.indices();
            let ai = o.a.select(idx, idx);
            for (cj, &gj) in idx.iter().enumerate() {
                let mut e = vec![0.0; idx.len()];
                e[cj] = 1.0;
                let x = ai.lu_solve(&e).unwrap();
                for (ci, &gi) in idx.iter().enumerate() {
                    dense[(gi, gj)] += x[ci];
                }
            }
        }
        let diff = minv.sub(&dense).unwrap().max_abs();
        assert!(diff <= 1e-10 * dense.max_abs(), "{diff}");
    }

    #[test]
    fn coarse_columns_are_local_and_spd_operator() {
        for mode in [PrimalMode::Asm2, PrimalMode::Soras] {
            let s = poisson(12);
            let dec = Decomposition::build(&s, 4, 2).unwrap();
            let o = ChainOptions { mode, ..ChainOptions::default() };
            let p = PrimalPrecond::build(&s, &dec, &o).unwrap();
            for (c, &owner) in p.coarse.column_owner.iter().enumerate() {
                let inside = dec.subdomains[owner].primal.indices();
                for (r, _, _) in p.coarse.z.triplets().filter(|t| t.1 == c) {
                    assert!(inside.binary_search(&r).is_ok());
                }
            }
            let x: Vec<f64> = (0..s.n()).map(|i| (i as f64 * 0.7).sin()).collect();
            let y: Vec<f64> = (0..s.n()).map(|i| (i as f64 * 0.3).cos()).collect();
            let gap = dot(&p.apply(&x).unwrap(), &y) - dot(&x, &p.apply(&y).unwrap());
            assert!(gap.abs() <= 1e-10 * crate::linalg::norm2(&x) * crate::linalg::norm2(&y));
            assert!(dot(&p.apply(&x).unwrap(), &x) > 0.0);
        }
    }

    #[test]
    fn two_level_raises_lambda_min() {
        let s = poisson(24);
        let dec = Decomposition::build(&s, 4, 2).unwrap();
        let one = PrimalPrecond::build(&s, &dec, &opts(0.0)).unwrap();
        let two = PrimalPrecond::build(&s, &dec, &ChainOptions::default()).unwrap();
        let (l1, h1) = spectrum_ma(&s, &one).unwrap();
        let (l2, h2) = spectrum_ma(&s, &two).unwrap();
        let d = two.coarse.dim();
        assert!(d >= dec.len() && d <= 20 * dec.len(), "dim V0 = {d}");
        assert!(l2 > l1, "{l1} {l2}");
        assert!(h1 <= dec.k0 as f64 + 1e-8 && h2 <= dec.k0 as f64 + 1.0 + 1e-8, "{h1} {h2}");
    }
}
