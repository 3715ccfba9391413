//! `N_S = S_0 + M_{S_1}` and its inverse by a low-rank update.
//!
//! With `W = (B Z) L_0^{-T}` we have `S_0 = W W^T`, hence
//!
//! ```text
//! N_S^{-1} = M_S1^{-1} - M_S1^{-1} W M_A0^{-1} W^T M_S1^{-1},
//! M_A0     = I + W^T M_S1^{-1} W.
//! ```

use rayon::prelude::*;
use serde::Serialize;

use crate::dual::DualPrecond;
use crate::error::{check_dim, DdError, Result};
use crate::linalg::{chol, DenseChol, DenseMat, SparseMat};

/// Nonzero-column counts of `D̃_i R̃_i B Z` and `D̃_i R̃_i S_1 Z_S` per subdomain.
#[derive(Debug, Clone, Serialize)]
pub struct SparsityReport {
    pub bz_columns: Vec<usize>,
    pub s1z_columns: Vec<usize>,
    pub max_bz_columns: usize,
    pub max_s1z_columns: usize,
    pub total_bz_columns: usize,
    pub total_s1z_columns: usize,
}

fn nonzero_columns(rows: &[usize], mat: &SparseMat) -> Vec<usize> {
    let mut seen = vec![false; mat.ncols()];
    for &r in rows {
        for (&c, &v) in mat.row(r).0.iter().zip(mat.row(r).1) {
            if v != 0.0 {
                seen[c] = true;
            }
        }
    }
    (0..mat.ncols()).filter(|&c| seen[c]).collect()
}

pub fn check_sparsity_assumptions(dual: &DualPrecond) -> SparsityReport {
    let mut bz = Vec::new();
    let mut s1z = Vec::new();
    for i in 0..dual.n_subdomains() {
        // D̃_i is positive, so it does not change column supports
        let rows = dual.dual_restriction(i).0.indices();
        bz.push(nonzero_columns(rows, &dual.bz).len());
        s1z.push(nonzero_columns(rows, &dual.coarse.y).len());
    }
    SparsityReport {
        max_bz_columns: bz.iter().copied().max().unwrap_or(0),
        max_s1z_columns: s1z.iter().copied().max().unwrap_or(0),
        total_bz_columns: dual.bz.ncols(),
        total_s1z_columns: dual.coarse.y.ncols(),
        bz_columns: bz,
        s1z_columns: s1z,
    }
}

/// `W`, the factored `M_{A_0}` and the column statistics.
#[derive(Debug, Clone)]
pub struct NsPrecond {
    /// `W = (B Z) L_0^{-T}`, dense `m x dim(V_0)`.
    pub w: DenseMat,
    pub ma0: DenseMat,
    factor: Option<DenseChol>,
    pub sparsity: SparsityReport,
}

impl NsPrecond {
    pub fn build(dual: &DualPrecond) -> Result<Self> {
        let w = build_w(dual)?;
        let ma0 = assemble_ma0(dual)?;
        let factor = if ma0.nrows() > 0 {
            Some(chol(&ma0).map_err(|e| e.at_stage("factorization of M_A0"))?)
        } else {
            None
        };
        Ok(Self {
            w,
            ma0,
            factor,
            sparsity: check_sparsity_assumptions(dual),
        })
    }

    pub fn dim(&self) -> usize {
        self.ma0.nrows()
    }

    /// `N_S^{-1} g`:
    /// 1. `G' = M_S1^{-1} G`;
    /// 2. `r = L_0^{-1} (B Z)^T G'`;
    /// 3. `M_A0 y = r`;
    /// 4. `P = M_S1^{-1} (G - (B Z) L_0^{-T} y)`.
    pub fn apply_inv(&self, dual: &DualPrecond, g: &[f64]) -> Result<Vec<f64>> {
        check_dim("apply_ns_inv", dual.m(), g.len())?;
        let Some(f) = &self.factor else {
            return dual.apply_ms1_inv(g);
        };
        let g1 = dual.apply_ms1_inv(g)?;
        let r = self.w.matvec_t(&g1)?;
        let y = f.solve(&r)?;
        let wy = self.w.matvec(&y)?;
        let h: Vec<f64> = g.iter().zip(&wy).map(|(a, b)| a - b).collect();
        dual.apply_ms1_inv(&h)
    }
}

/// `W = (B Z) L_0^{-T}`: row `r` of `W` is `L_0^{-1}` applied to row `r` of `B Z`.
pub fn build_w(dual: &DualPrecond) -> Result<DenseMat> {
    let (m, n0) = (dual.m(), dual.bz.ncols());
    let mut w = DenseMat::zeros(m, n0);
    let Some(l0) = &dual.l0 else {
        return Ok(w);
    };
    let mut row = vec![0.0; n0];
    for r in 0..m {
        let (cols, vals) = dual.bz.row(r);
        if cols.is_empty() {
            continue;
        }
        row.iter_mut().for_each(|v| *v = 0.0);
        for (&c, &v) in cols.iter().zip(vals) {
            row[c] = v;
        }
        for (c, v) in l0.forward(&row)?.into_iter().enumerate() {
            w[(r, c)] = v;
        }
    }
    Ok(w)
}

/// `M_A0 = I + L_0^{-1} K L_0^{-T}` with `K = (BZ)^T M_S1^{-1} (BZ)` expanded as
///
/// ```text
/// K = X^T G^{-1} X + U^T Q U,   X = Z_S^T (BZ),   U = BZ - Y G^{-1} X,
/// ```
///
/// `Q = sum_i R̃_i^T D̃_i T_i^+ D̃_i R̃_i`. The `U^T Q U` term is accumulated
/// subdomain by subdomain on the columns of `R̃_i U` that are nonzero.
pub fn assemble_ma0(dual: &DualPrecond) -> Result<DenseMat> {
    let n0 = dual.bz.ncols();
    let Some(l0) = &dual.l0 else {
        return Ok(DenseMat::zeros(0, 0));
    };
    let m = dual.m();
    let bz = dual.bz.to_dense();
    let c = &dual.coarse;
    let mut k = DenseMat::zeros(n0, n0);
    let mut u = bz.clone();
    if let Some(gf) = &c.factor {
        let x = c.z.transpose().to_dense_times(&bz)?;
        let mut gx = DenseMat::zeros(x.nrows(), n0);
        for j in 0..n0 {
            gx.col_mut(j).copy_from_slice(&gf.solve(x.col(j))?);
        }
        k = x.t_matmul(&gx)?;
        let v = c.y.to_dense_times_dense(&gx)?;
        u = u.sub(&v)?;
    }
    debug_assert_eq!(u.nrows(), m);
    // U^T Q U = sum_i (D̃_i R̃_i U)^T T_i^+ (D̃_i R̃_i U)
    let parts = (0..dual.n_subdomains())
        .into_par_iter()
        .map(|i| {
            let (r, w) = dual.dual_restriction(i);
            let rows = r.indices();
            let cols: Vec<usize> = (0..n0).filter(|&j| rows.iter().any(|&g| u[(g, j)] != 0.0)).collect();
            let local = DenseMat::from_fn(rows.len(), cols.len(), |a, b| w[a] * u[(rows[a], cols[b])]);
            let tl = dual.local[i].pinv.matrix().matmul(&local)?;
            Ok((cols, local.t_matmul(&tl)?))
        })
        .collect::<Result<Vec<_>>>()?;
    for (cols, blk) in parts {
        for (b, &cb) in cols.iter().enumerate() {
            for (a, &ca) in cols.iter().enumerate() {
                k[(ca, cb)] += blk[(a, b)];
            }
        }
    }
    finish_ma0(l0, &k)
}

/// `I + L_0^{-1} K L_0^{-T}`.
fn finish_ma0(l0: &DenseChol, k: &DenseMat) -> Result<DenseMat> {
    let n0 = k.nrows();
    let mut t = DenseMat::zeros(n0, n0);
    for j in 0..n0 {
        t.col_mut(j).copy_from_slice(&l0.forward(k.col(j))?);
    }
    let tt = t.transpose();
    let mut out = DenseMat::identity(n0);
    for j in 0..n0 {
        for (o, v) in out.col_mut(j).iter_mut().zip(l0.forward(tt.col(j))?) {
            *o += v;
        }
    }
    out.symmetrize();
    Ok(out)
}

/// Naive assembly: `M_S1^{-1}` applied to every column of `W`.
pub fn assemble_ma0_naive(dual: &DualPrecond) -> Result<DenseMat> {
    let w = build_w(dual)?;
    let n0 = w.ncols();
    let mut out = DenseMat::identity(n0);
    for j in 0..n0 {
        let y = dual.apply_ms1_inv(w.col(j))?;
        for (o, v) in out.col_mut(j).iter_mut().zip(w.matvec_t(&y)?) {
            *o += v;
        }
    }
    out.symmetrize();
    Ok(out)
}

/// Smallest eigenvalue of `M_A0`; at least one up to rounding.
pub fn ma0_min_eigenvalue(ma0: &DenseMat) -> Result<f64> {
    if ma0.nrows() == 0 {
        return Ok(1.0);
    }
    let ev = crate::linalg::sym_eig_tol(ma0, 1e-8)?;
    ev.first().map(|p| p.value).ok_or(DdError::Singular(0))
}

trait DenseProducts {
    fn to_dense_times(&self, d: &DenseMat) -> Result<DenseMat>;
    fn to_dense_times_dense(&self, d: &DenseMat) -> Result<DenseMat>;
}

impl DenseProducts for SparseMat {
    /// `self * d` with `d` dense.
    fn to_dense_times(&self, d: &DenseMat) -> Result<DenseMat> {
        self.to_dense_times_dense(d)
    }

    fn to_dense_times_dense(&self, d: &DenseMat) -> Result<DenseMat> {
        check_dim("sparse x dense", self.ncols(), d.nrows())?;
        let mut out = DenseMat::zeros(self.nrows(), d.ncols());
        for j in 0..d.ncols() {
            let y = self.spmv(d.col(j))?;
            out.col_mut(j).copy_from_slice(&y);
        }
        Ok(out)
    }
}
