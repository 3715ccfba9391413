//! Dense brute-force oracle for desk-scale verification.

use crate::error::{DdError, Result};
use crate::linalg::{chol, sym_eig_tol, DenseMat, Lu};
use crate::problem::SaddleSystem;

/// Hard cap on `n + m` for any dense oracle computation.
pub const ORACLE_CAP: usize = 5000;

fn check_cap(dim: usize) -> Result<()> {
    if dim > ORACLE_CAP {
        Err(DdError::OracleCap { dim, cap: ORACLE_CAP })
    } else {
        Ok(())
    }
}

/// Matrix of a linear operator, assembled column by column.
pub fn oracle_assemble(op: impl Fn(&[f64]) -> Result<Vec<f64>>, dim: usize) -> Result<DenseMat> {
    check_cap(dim)?;
    let mut m = DenseMat::zeros(dim, dim);
    let mut e = vec![0.0; dim];
    for j in 0..dim {
        e[j] = 1.0;
        let col = op(&e)?;
        m.col_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    Ok(m)
}

/// Extreme eigenvalues of the pencil `(left, right)`, `right` SPD.
pub fn pencil_extremes(left: &DenseMat, right: &DenseMat) -> Result<(f64, f64)> {
    let vals = pencil_eigenvalues(left, right)?;
    Ok((vals[0], *vals.last().expect("nonempty pencil")))
}

/// All eigenvalues of `(left, right)` through `right = L L^T` whitening.
pub fn pencil_eigenvalues(left: &DenseMat, right: &DenseMat) -> Result<Vec<f64>> {
    let mut l = left.clone();
    l.symmetrize();
    let mut r = right.clone();
    r.symmetrize();
    let f = chol(&r)?;
    let n = l.nrows();
    // W = L^{-1} left L^{-T}
    let mut tmp = DenseMat::zeros(n, n);
    for j in 0..n {
        tmp.col_mut(j).copy_from_slice(&f.forward(l.col(j))?);
    }
    let tmp_t = tmp.transpose();
    let mut w = DenseMat::zeros(n, n);
    for j in 0..n {
        w.col_mut(j).copy_from_slice(&f.forward(tmp_t.col(j))?);
    }
    w.symmetrize();
    Ok(sym_eig_tol(&w, 1e-8)?.into_iter().map(|p| p.value).collect())
}

/// Eigenvalues of `minv * s` for symmetric `minv` and SPD `s`, through the
/// similar matrix `L^T minv L` with `s = L L^T`. Ascending.
pub fn product_eigenvalues(minv: &DenseMat, s: &DenseMat) -> Result<Vec<f64>> {
    let mut sm = s.clone();
    sm.symmetrize();
    let f = chol(&sm)?;
    let l = f.l();
    let mut w = l.t_matmul(&minv.matmul(l)?)?;
    w.symmetrize();
    Ok(sym_eig_tol(&w, 1e-8)?.into_iter().map(|p| p.value).collect())
}

/// Extreme generalized eigenvalues of two symmetric operators.
pub fn oracle_gen_eig(
    op_left: impl Fn(&[f64]) -> Result<Vec<f64>>,
    op_right: impl Fn(&[f64]) -> Result<Vec<f64>>,
    dim: usize,
) -> Result<(f64, f64)> {
    let l = oracle_assemble(op_left, dim)?;
    let r = oracle_assemble(op_right, dim)?;
    pencil_extremes(&l, &r)
}

/// Dense copies of the blocks.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    pub a: DenseMat,
    pub b: DenseMat,
    pub c: DenseMat,
}

impl DenseOracle {
    pub fn new(sys: &SaddleSystem) -> Result<Self> {
        check_cap(sys.n() + sys.m())?;
        Ok(Self {
            a: sys.a.to_dense(),
            b: sys.b.to_dense(),
            c: sys.c.to_dense(),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    /// The full `(n+m) x (n+m)` saddle point matrix.
    pub fn block_matrix(&self) -> DenseMat {
        let (n, m) = (self.n(), self.m());
        DenseMat::from_fn(n + m, n + m, |i, j| match (i < n, j < n) {
            (true, true) => self.a[(i, j)],
            (true, false) => self.b[(j - n, i)],
            (false, true) => self.b[(i - n, j)],
            (false, false) => -self.c[(i - n, j - n)],
        })
    }

    /// Dense Schur complement `C + B A^{-1} B^T`.
    pub fn schur(&self) -> Result<DenseMat> {
        let f = chol(&self.a)?;
        let bt = self.b.transpose();
        let mut x = DenseMat::zeros(self.n(), self.m());
        for j in 0..self.m() {
            x.col_mut(j).copy_from_slice(&f.solve(bt.col(j))?);
        }
        let mut s = self.c.add(&self.b.matmul(&x)?)?;
        s.symmetrize();
        Ok(s)
    }

    /// Direct solve through the block factorization with dense Cholesky of
    /// `A` and of the Schur complement.
    pub fn solve_block_cholesky(&self, fu: &[f64], fp: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let fa = chol(&self.a)?;
        let gu = fa.solve(fu)?;
        let bgu = self.b.matvec(&gu)?;
        let rhs: Vec<f64> = bgu.iter().zip(fp).map(|(x, f)| x - f).collect();
        let p = if self.m() > 0 { chol(&self.schur()?)?.solve(&rhs)? } else { Vec::new() };
        let btp = self.b.matvec_t(&p)?;
        let r: Vec<f64> = fu.iter().zip(&btp).map(|(f, x)| f - x).collect();
        Ok((fa.solve(&r)?, p))
    }

    /// Direct solve of the indefinite block matrix by pivoted LU.
    pub fn solve_lu(&self, fu: &[f64], fp: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let rhs: Vec<f64> = fu.iter().chain(fp).copied().collect();
        let x = Lu::new(&self.block_matrix())?.solve(&rhs)?;
        let n = self.n();
        Ok((x[..n].to_vec(), x[n..].to_vec()))
    }

    /// Numerical rank of `B` (eigenvalues of `B B^T` above `1e-10 * max`).
    pub fn rank_b(&self) -> Result<usize> {
        let mut bbt = self.b.matmul(&self.b.transpose())?;
        bbt.symmetrize();
        let e = sym_eig_tol(&bbt, 1e-8)?;
        let max = e.last().map_or(0.0, |p| p.value);
        Ok(e.iter().filter(|p| p.value > 1e-10 * max).count())
    }
}
