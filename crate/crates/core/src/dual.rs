//! Dual (constraint space) operators and the two-level preconditioner for
//! `S_1`.
//!
//! ```text
//! T_i   = C̃_i + B̃_i K_i^{-1} B̃_i^T
//! S_1   = sum_i R̃_i^T T_i R̃_i
//! S_0   = (B Z) (Z^T A Z)^{-1} (B Z)^T
//! M_S   = C + B M_A^{-1} B^T = S_0 + S_1
//! M_S1^{-1} = Z_S G^{-1} Z_S^T + (I - P_0) (sum_i R̃_i^T D̃_i T_i^+ D̃_i R̃_i) (I - P_0^T)
//! ```
//!
//! with `G = Z_S^T S_1 Z_S` and `P_0 = Z_S G^{-1} Z_S^T S_1`.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ChainOptions;
use crate::decomposition::{Decomposition, Subdomain};
use crate::error::{check_dim, DdError, Result};
use crate::krylov::{pcg, PcgReport};
use crate::linalg::{chol_dropping, dot, gen_sym_eig, DenseChol, DenseMat, Lu, PseudoInverse, Restriction, SparseMat};
use crate::problem::{pencil_eigenvalues, SaddleSystem};
use crate::schwarz::PrimalPrecond;

/// `T_i` and its pseudo-inverse.
#[derive(Debug, Clone)]
pub struct LocalDualSchur {
    pub t: DenseMat,
    pub pinv: PseudoInverse,
}

impl LocalDualSchur {
    pub fn rank(&self) -> usize {
        self.pinv.rank()
    }
}

/// `T_i = C̃_i + B̃_i K_i^{-1} B̃_i^T`, one local solve per dual dof.
pub fn build_local_dual_schur(dec: &Decomposition, primal: &PrimalPrecond, opts: &ChainOptions) -> Result<Vec<LocalDualSchur>> {
    dec.subdomains
        .par_iter()
        .map(|s| {
            let nd = s.n_dual();
            let btt = s.bt.transpose();
            let mut t = s.ct.clone();
            let mut e = vec![0.0; nd];
            for j in 0..nd {
                e[j] = 1.0;
                let col = btt.spmv(&e)?;
                e[j] = 0.0;
                let x = primal.local_solve(s.id, &col)?;
                for (tij, v) in t.col_mut(j).iter_mut().zip(s.bt.spmv(&x)?) {
                    *tij += v;
                }
            }
            t.symmetrize();
            let pinv = PseudoInverse::new(&t, opts.tol.pinv_drop)?;
            Ok(LocalDualSchur { t, pinv })
        })
        .collect()
}

/// Solve `T_i p = g` through the augmented system
/// `[[A_i, B̃_i^T], [B̃_i, -C̃_i]] [u; p] = [0; -g]` (Dirichlet local matrix).
/// Requires `T_i` nonsingular.
pub fn augmented_solve(s: &Subdomain, g: &[f64]) -> Result<Vec<f64>> {
    let (np, nd) = (s.n_primal(), s.n_dual());
    check_dim("augmented_solve", nd, g.len())?;
    let a = s.a_local.to_dense();
    let bt = s.bt.to_dense();
    let k = DenseMat::from_fn(np + nd, np + nd, |i, j| match (i < np, j < np) {
        (true, true) => a[(i, j)],
        (true, false) => bt[(j - np, i)],
        (false, true) => bt[(i - np, j)],
        (false, false) => -s.ct[(i - np, j - np)],
    });
    let rhs: Vec<f64> = std::iter::repeat_n(0.0, np).chain(g.iter().map(|v| -v)).collect();
    let x = Lu::new(&k)?.solve(&rhs)?;
    Ok(x[np..].to_vec())
}

/// Coarse space `W_0` of the dual preconditioner.
#[derive(Debug, Clone)]
pub struct CoarseSpaceS1 {
    /// `m x dim(W_0)`, columns `R̃_i^T D̃_i P_ik`.
    pub z: SparseMat,
    /// `S_1 Z`.
    pub y: SparseMat,
    pub column_owner: Vec<usize>,
    /// Cholesky factor of `Z^T S_1 Z`; `None` for an empty space.
    pub factor: Option<DenseChol>,
    /// Per subdomain, finite pencil eigenvalues (ascending).
    pub eigenvalues: Vec<Vec<f64>>,
    /// Per subdomain, count of `+inf` eigenvalues.
    pub infinite: Vec<usize>,
    /// Per subdomain, vectors selected before dependency dropping.
    pub selected: Vec<usize>,
}

impl CoarseSpaceS1 {
    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    fn gsolve(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.factor {
            Some(f) => f.solve(x),
            None => Ok(Vec::new()),
        }
    }

    /// `P_0 x = Z G^{-1} Y^T x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.dim() == 0 {
            return Ok(vec![0.0; x.len()]);
        }
        self.z.spmv(&self.gsolve(&self.y.spmv_t(x)?)?)
    }

    /// `P_0^T x = Y G^{-1} Z^T x`.
    pub fn project_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.dim() == 0 {
            return Ok(vec![0.0; x.len()]);
        }
        self.y.spmv(&self.gsolve(&self.z.spmv_t(x)?)?)
    }
}

/// Continuity pencil of subdomain `i`:
/// `D̃_i (sum_{j} R̃_i R̃_j^T T_j R̃_j R̃_i^T) D̃_i`, summed over the subdomains
/// whose dual set meets that of `i`.
pub fn continuity_matrix(dec: &Decomposition, local: &[LocalDualSchur], i: usize) -> DenseMat {
    let si = &dec.subdomains[i];
    let nd = si.n_dual();
    let mut pos = vec![usize::MAX; dec.m];
    for (k, &g) in si.dual.indices().iter().enumerate() {
        pos[g] = k;
    }
    let mut left = DenseMat::zeros(nd, nd);
    for &j in &dec.dual_neighbors[i] {
        let sj = &dec.subdomains[j];
        let map: Vec<(usize, usize)> = sj
            .dual
            .indices()
            .iter()
            .enumerate()
            .filter(|(_, &g)| pos[g] != usize::MAX)
            .map(|(kj, &g)| (kj, pos[g]))
            .collect();
        for &(cj, ci) in &map {
            for &(rj, ri) in &map {
                left[(ri, ci)] += local[j].t[(rj, cj)];
            }
        }
    }
    let mut left = left.scale_rows_cols(&si.dt, &si.dt);
    left.symmetrize();
    left
}

/// Dual GenEO coarse space.
///
/// Eigenvectors of `continuity_matrix(i) P = lambda T_i P` with
/// `lambda > 1/tau_s1` (and every `+inf` direction when `tau_s1 > 0`) are
/// lifted as `R̃_i^T D̃_i P`. Dependent columns in the `S_1` inner product are
/// dropped by a pivoted Cholesky pass on `Z^T S_1 Z`.
pub fn build_geneo_s1(dec: &Decomposition, local: &[LocalDualSchur], s1: &SparseMat, tau_s1: f64, opts: &ChainOptions) -> Result<CoarseSpaceS1> {
    let m = dec.m;
    let threshold = if tau_s1 > 0.0 { 1.0 / tau_s1 } else { f64::INFINITY };
    let per_sub = (0..dec.len())
        .into_par_iter()
        .map(|i| {
            let s = &dec.subdomains[i];
            if s.n_dual() == 0 {
                return Ok((Vec::new(), 0, Vec::new()));
            }
            let left = continuity_matrix(dec, local, i);
            let eig = gen_sym_eig(&left, &local[i].t, opts.tol.eig_drop)?;
            let mut picked: Vec<Vec<f64>> = Vec::new();
            if threshold.is_finite() {
                picked.extend(eig.infinite.iter().cloned());
                picked.extend(eig.finite.iter().rev().filter(|p| p.value > threshold).map(|p| p.vector.clone()));
            }
            let lifted = picked
                .into_iter()
                .map(|v| v.iter().zip(&s.dt).map(|(x, w)| x * w).collect::<Vec<f64>>())
                .collect::<Vec<_>>();
            Ok((eig.finite.iter().map(|p| p.value).collect::<Vec<_>>(), eig.infinite.len(), lifted))
        })
        .collect::<Vec<Result<_>>>();

    let mut trip = Vec::new();
    let mut owner = Vec::new();
    let mut eigenvalues = Vec::with_capacity(dec.len());
    let mut infinite = Vec::with_capacity(dec.len());
    let mut selected = Vec::with_capacity(dec.len());
    for (s, res) in dec.subdomains.iter().zip(per_sub) {
        let (vals, ninf, cols) = res?;
        eigenvalues.push(vals);
        infinite.push(ninf);
        selected.push(cols.len());
        for col in cols {
            let c = owner.len();
            for (&g, &v) in s.dual.indices().iter().zip(&col) {
                if v != 0.0 {
                    trip.push((g, c, v));
                }
            }
            owner.push(s.id);
        }
    }
    let empty = |eigenvalues, infinite, selected| CoarseSpaceS1 {
        z: SparseMat::zeros(m, 0),
        y: SparseMat::zeros(m, 0),
        column_owner: Vec::new(),
        factor: None,
        eigenvalues,
        infinite,
        selected,
    };
    if owner.is_empty() {
        return Ok(empty(eigenvalues, infinite, selected));
    }
    let z_all = SparseMat::from_triplets(m, owner.len(), &trip)?;
    let y_all = s1.matmul(&z_all)?;
    let mut gram = z_all.transpose().matmul(&y_all)?.to_dense();
    gram.symmetrize();
    let (keep, factor) = chol_dropping(&gram, opts.tol.coarse_drop)?;
    if keep.is_empty() {
        return Ok(empty(eigenvalues, infinite, selected));
    }
    let rows: Vec<usize> = (0..m).collect();
    let (z, y) = if keep.iter().enumerate().all(|(a, &b)| a == b) && keep.len() == owner.len() {
        (z_all, y_all)
    } else {
        (z_all.submatrix(&rows, &keep), y_all.submatrix(&rows, &keep))
    };
    Ok(CoarseSpaceS1 {
        z,
        y,
        column_owner: keep.iter().map(|&k| owner[k]).collect(),
        factor: Some(factor),
        eigenvalues,
        infinite,
        selected,
    })
}

/// Per-run dual diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct DualStats {
    pub dim_w0: usize,
    pub k0: usize,
    pub tau_s1: f64,
    pub alpha: f64,
    pub local_ranks: Vec<usize>,
    pub local_sizes: Vec<usize>,
    pub selected_per_subdomain: Vec<usize>,
    pub infinite_per_subdomain: Vec<usize>,
    pub eigenvalues: Vec<Vec<f64>>,
}

/// Everything on the dual side: `S_0`, `S_1` and `M_{S_1}^{-1}`.
#[derive(Debug, Clone)]
pub struct DualPrecond {
    pub local: Vec<LocalDualSchur>,
    pub coarse: CoarseSpaceS1,
    /// `S_1` assembled (sparse, entries within dual supports).
    pub s1: SparseMat,
    /// `B Z` with `Z` the primal coarse basis.
    pub bz: SparseMat,
    /// Cholesky factor `L_0` of `Z^T A Z`.
    pub l0: Option<DenseChol>,
    pub tau_s1: f64,
    pub k0: usize,
    dual: Vec<(Restriction, Vec<f64>)>,
    m: usize,
}

impl DualPrecond {
    pub fn build(sys: &SaddleSystem, dec: &Decomposition, primal: &PrimalPrecond, opts: &ChainOptions) -> Result<Self> {
        let local = build_local_dual_schur(dec, primal, opts)?;
        let s1 = assemble_s1(dec, &local)?;
        let tau_s1 = opts.tau_s1.unwrap_or(dec.k0 as f64);
        let coarse = build_geneo_s1(dec, &local, &s1, tau_s1, opts)?;
        let bz = sys.b.matmul(&primal.coarse.z)?;
        Ok(Self {
            local,
            coarse,
            s1,
            bz,
            l0: primal.coarse.factor.clone(),
            tau_s1,
            k0: dec.k0,
            dual: dec.subdomains.iter().map(|s| (s.dual.clone(), s.dt.clone())).collect(),
            m: dec.m,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `alpha = max(1, k0 / tau_s1)`.
    pub fn alpha(&self) -> f64 {
        if self.tau_s1 > 0.0 {
            (self.k0 as f64 / self.tau_s1).max(1.0)
        } else {
            f64::INFINITY
        }
    }

    pub fn n_subdomains(&self) -> usize {
        self.local.len()
    }

    pub fn dual_restriction(&self, i: usize) -> (&Restriction, &[f64]) {
        (&self.dual[i].0, &self.dual[i].1)
    }

    /// `sum_i R̃_i^T f_i(R̃_i p)`, map over subdomains then ordered reduction.
    fn local_sum(&self, p: &[f64], f: impl Fn(usize, Vec<f64>) -> Result<Vec<f64>> + Sync) -> Result<Vec<f64>> {
        check_dim("dual local sum", self.m, p.len())?;
        let parts = (0..self.local.len())
            .into_par_iter()
            .map(|i| f(i, self.dual[i].0.restrict(p)))
            .collect::<Result<Vec<_>>>()?;
        let mut y = vec![0.0; self.m];
        for ((r, _), part) in self.dual.iter().zip(&parts) {
            r.extend_add(part, &mut y);
        }
        Ok(y)
    }

    /// `S_1 p = sum_i R̃_i^T T_i R̃_i p`.
    pub fn apply_s1(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.local_sum(p, |i, x| self.local[i].t.matvec(&x))
    }

    /// `S_0 p = (BZ) L_0^{-T} L_0^{-1} (BZ)^T p`.
    pub fn apply_s0(&self, p: &[f64]) -> Result<Vec<f64>> {
        check_dim("apply_s0", self.m, p.len())?;
        match &self.l0 {
            None => Ok(vec![0.0; self.m]),
            Some(l0) => self.bz.spmv(&l0.solve(&self.bz.spmv_t(p)?)?),
        }
    }

    /// `M_S p = S_0 p + S_1 p`.
    pub fn apply_ms(&self, p: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.apply_s0(p)?;
        for (a, b) in y.iter_mut().zip(self.apply_s1(p)?) {
            *a += b;
        }
        Ok(y)
    }

    /// `Q g = sum_i R̃_i^T D̃_i T_i^+ D̃_i R̃_i g`.
    pub fn apply_q(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.local_sum(g, |i, x| {
            let w = &self.dual[i].1;
            let dx: Vec<f64> = x.iter().zip(w).map(|(a, b)| a * b).collect();
            let y = self.local[i].pinv.apply(&dx)?;
            Ok(y.iter().zip(w).map(|(a, b)| a * b).collect())
        })
    }

    /// `M_{S_1}^{-1} g`.
    pub fn apply_ms1_inv(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_dim("apply_ms1_inv", self.m, g.len())?;
        let c = &self.coarse;
        if c.dim() == 0 {
            return self.apply_q(g);
        }
        let zg = c.gsolve(&c.z.spmv_t(g)?)?;
        let coarse = c.z.spmv(&zg)?;
        // (I - P_0^T) g
        let yz = c.y.spmv(&zg)?;
        let h: Vec<f64> = g.iter().zip(&yz).map(|(a, b)| a - b).collect();
        let q = self.apply_q(&h)?;
        // (I - P_0) q
        let pq = c.project(&q)?;
        Ok(coarse.iter().zip(&q).zip(&pq).map(|((a, b), c)| a + b - c).collect())
    }

    pub fn stats(&self) -> DualStats {
        DualStats {
            dim_w0: self.coarse.dim(),
            k0: self.k0,
            tau_s1: self.tau_s1,
            alpha: self.alpha(),
            local_ranks: self.local.iter().map(|l| l.rank()).collect(),
            local_sizes: self.local.iter().map(|l| l.t.nrows()).collect(),
            selected_per_subdomain: self.coarse.selected.clone(),
            infinite_per_subdomain: self.coarse.infinite.clone(),
            eigenvalues: self.coarse.eigenvalues.clone(),
        }
    }
}

/// `S_1` as a sparse matrix.
pub fn assemble_s1(dec: &Decomposition, local: &[LocalDualSchur]) -> Result<SparseMat> {
    let mut trip = Vec::new();
    for (s, l) in dec.subdomains.iter().zip(local) {
        let idx = s.dual.indices();
        for j in 0..idx.len() {
            for i in 0..idx.len() {
                let v = l.t[(i, j)];
                if v != 0.0 {
                    trip.push((idx[i], idx[j], v));
                }
            }
        }
    }
    SparseMat::from_triplets(dec.m, dec.m, &trip)
}

/// `M_S p` through the direct form `C p + B M_A^{-1} B^T p`.
pub fn apply_ms_direct(sys: &SaddleSystem, primal: &PrimalPrecond, p: &[f64]) -> Result<Vec<f64>> {
    let x = primal.apply(&sys.b.spmv_t(p)?)?;
    let mut y = sys.c.spmv(p)?;
    for (a, b) in y.iter_mut().zip(sys.b.spmv(&x)?) {
        *a += b;
    }
    Ok(y)
}

/// `S p = C p + B x` with `A x = B^T p` solved by PCG(M_A) to `inner_tol`.
pub fn apply_s(sys: &SaddleSystem, primal: &PrimalPrecond, p: &[f64], inner_tol: f64, max_iter: usize) -> Result<(Vec<f64>, PcgReport)> {
    check_dim("apply_s", sys.m(), p.len())?;
    let rhs = sys.b.spmv_t(p)?;
    let (x, rep) = pcg(|v| sys.a.spmv(v), |v| primal.apply(v), &rhs, inner_tol, max_iter)?;
    if !rep.converged {
        return Err(DdError::NoConvergence {
            stage: "inner A-solve of the Schur operator".into(),
            iterations: rep.iterations,
            relres: rep.final_relres,
        });
    }
    let mut y = sys.c.spmv(p)?;
    for (a, b) in y.iter_mut().zip(sys.b.spmv(&x)?) {
        *a += b;
    }
    Ok((y, rep))
}

/// Continuity constant `c_R`: the largest finite generalized Rayleigh
/// quotient of the continuity pencil over all subdomains, computed by
/// whitening the (SPD) continuity matrix and inverting the spectrum of the
/// reversed pencil.
pub fn estimate_cr(dec: &Decomposition, dual: &DualPrecond, drop: f64) -> Result<f64> {
    let mut cr: f64 = 0.0;
    for i in 0..dec.len() {
        if dec.subdomains[i].n_dual() == 0 {
            continue;
        }
        let left = continuity_matrix(dec, &dual.local, i);
        let mu = pencil_eigenvalues(&dual.local[i].t, &left)?;
        let mu_max = mu.last().copied().unwrap_or(0.0);
        if let Some(min_pos) = mu.iter().copied().find(|&v| v > drop * mu_max) {
            cr = cr.max(1.0 / min_pos);
        }
    }
    Ok(cr)
}

/// The two quadratic forms of the stable decomposition `P_i = R̃_i p`:
/// `b = sum_i <T_i P_i, P_i>` and `a = <S_1 R(P), R(P)>` with
/// `R(P) = sum_i R̃_i^T D̃_i P_i`.
pub fn verify_stable_decomposition(dual: &DualPrecond, p: &[f64]) -> Result<(f64, f64)> {
    check_dim("verify_stable_decomposition", dual.m(), p.len())?;
    let mut b = 0.0;
    let mut rp = vec![0.0; dual.m()];
    for i in 0..dual.n_subdomains() {
        let (r, w) = dual.dual_restriction(i);
        let pi = r.restrict(p);
        b += dot(&dual.local[i].t.matvec(&pi)?, &pi);
        let dpi: Vec<f64> = pi.iter().zip(w).map(|(x, y)| x * y).collect();
        r.extend_add(&dpi, &mut rp);
    }
    let a = dot(&dual.apply_s1(&rp)?, &rp);
    Ok((b, a))
}

/// `R((R̃_i p)_i) = sum_i R̃_i^T D̃_i R̃_i p`.
pub fn lift_decomposition(dual: &DualPrecond, p: &[f64]) -> Vec<f64> {
    let mut rp = vec![0.0; dual.m()];
    for i in 0..dual.n_subdomains() {
        let (r, w) = dual.dual_restriction(i);
        let dpi: Vec<f64> = r.restrict(p).iter().zip(w).map(|(x, y)| x * y).collect();
        r.extend_add(&dpi, &mut rp);
    }
    rp
}
