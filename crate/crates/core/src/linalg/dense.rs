use std::ops::{Index, IndexMut};

use crate::error::{check_dim, DdError, Result};

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMat {
    nrows: usize,
    ncols: usize,
    vals: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            vals: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Row-major input, convenient for literals in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        Self::from_fn(nrows, ncols, |i, j| rows[i][j])
    }

    pub fn from_col_major(nrows: usize, ncols: usize, vals: Vec<f64>) -> Result<Self> {
        check_dim("from_col_major", nrows * ncols, vals.len())?;
        Ok(Self { nrows, ncols, vals })
    }

    /// Matrix whose columns are the given vectors (all of length `nrows`).
    pub fn from_columns(nrows: usize, cols: &[Vec<f64>]) -> Self {
        let mut vals = Vec::with_capacity(nrows * cols.len());
        for c in cols {
            assert_eq!(c.len(), nrows, "column length");
            vals.extend_from_slice(c);
        }
        Self {
            nrows,
            ncols: cols.len(),
            vals,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.vals
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.vals
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.vals[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.vals[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn is_finite(&self) -> bool {
        self.vals.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("matvec", self.ncols, x.len())?;
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (yi, &a) in y.iter_mut().zip(self.col(j)) {
                    *yi += a * xj;
                }
            }
        }
        Ok(y)
    }

    /// `M^T x`.
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("matvec_t", self.nrows, x.len())?;
        Ok((0..self.ncols).map(|j| dot(self.col(j), x)).collect())
    }

    pub fn matmul(&self, other: &DenseMat) -> Result<DenseMat> {
        check_dim("matmul", self.ncols, other.nrows)?;
        let mut out = DenseMat::zeros(self.nrows, other.ncols);
        for j in 0..other.ncols {
            let oc = other.col(j);
            let dst = &mut out.vals[j * self.nrows..(j + 1) * self.nrows];
            for (k, &b) in oc.iter().enumerate() {
                if b != 0.0 {
                    for (d, &a) in dst.iter_mut().zip(self.col(k)) {
                        *d += a * b;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &DenseMat) -> Result<DenseMat> {
        check_dim("t_matmul", self.nrows, other.nrows)?;
        Ok(DenseMat::from_fn(self.ncols, other.ncols, |i, j| {
            dot(self.col(i), other.col(j))
        }))
    }

    pub fn add(&self, other: &DenseMat) -> Result<DenseMat> {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &DenseMat) -> Result<DenseMat> {
        self.add_scaled(-1.0, other)
    }

    pub fn add_scaled(&self, alpha: f64, other: &DenseMat) -> Result<DenseMat> {
        check_dim("add rows", self.nrows, other.nrows)?;
        check_dim("add cols", self.ncols, other.ncols)?;
        let vals = self.vals.iter().zip(&other.vals).map(|(a, b)| a + alpha * b).collect();
        Ok(DenseMat {
            nrows: self.nrows,
            ncols: self.ncols,
            vals,
        })
    }

    pub fn scale(&self, s: f64) -> DenseMat {
        DenseMat {
            nrows: self.nrows,
            ncols: self.ncols,
            vals: self.vals.iter().map(|v| v * s).collect(),
        }
    }

    /// `diag(dl) * M * diag(dr)`.
    pub fn scale_rows_cols(&self, dl: &[f64], dr: &[f64]) -> DenseMat {
        DenseMat::from_fn(self.nrows, self.ncols, |i, j| dl[i] * self[(i, j)] * dr[j])
    }

    pub fn frobenius(&self) -> f64 {
        self.vals.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut a: f64 = 0.0;
        for j in 0..self.ncols {
            for i in 0..j {
                a = a.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        a
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol * self.max_abs()
    }

    /// Replace with `(M + M^T)/2`.
    pub fn symmetrize(&mut self) {
        for j in 0..self.ncols {
            for i in 0..j {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    /// Principal submatrix on the given indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> DenseMat {
        DenseMat::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    /// Solve `M x = b` by LU with partial pivoting.
    pub fn lu_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        Lu::new(self)?.solve(b)
    }
}

impl Index<(usize, usize)> for DenseMat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &self.vals[j * self.nrows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.nrows && j < self.ncols);
        &mut self.vals[j * self.nrows + i]
    }
}

/// LU factorization with partial pivoting, for the indefinite systems
/// (augmented local problems, dense oracles).
#[derive(Debug, Clone)]
pub struct Lu {
    lu: DenseMat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(m: &DenseMat) -> Result<Self> {
        if !m.is_square() {
            return Err(DdError::DimMismatch {
                op: "lu",
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = m.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |acc, e| if e.1 > acc.1 { e } else { acc });
            if pv <= 1e-14 * scale {
                return Err(DdError::Singular(k));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = t;
                }
            }
            let piv = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= piv;
            }
            for j in k + 1..n {
                let ukj = lu[(k, j)];
                if ukj == 0.0 {
                    continue;
                }
                let (head, tail) = lu.vals.split_at_mut(j * n);
                let colk = &head[k * n..(k + 1) * n];
                let colj = &mut tail[..n];
                for i in k + 1..n {
                    colj[i] -= colk[i] * ukj;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.nrows();
        check_dim("lu solve", n, b.len())?;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for i in j + 1..n {
                    x[i] -= self.lu[(i, j)] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.lu[(j, j)];
            let xj = x[j];
            for i in 0..j {
                x[i] -= self.lu[(i, j)] * xj;
            }
        }
        Ok(x)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
