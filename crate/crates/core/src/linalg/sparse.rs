//! Compressed sparse row matrices.

use crate::error::{check_dim, DdError, Result};
use crate::linalg::DenseMat;

/// CSR matrix with sorted, unique column indices and no stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMat {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMat {
    /// Assemble from (row, col, value) triplets. Duplicates are summed and
    /// entries that end up exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(DdError::Problem(format!(
                    "triplet ({r}, {c}) outside {nrows}x{ncols}"
                )));
            }
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut pos = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0f64; triplets.len()];
        for &(r, c, v) in triplets {
            cols[pos[r]] = c;
            vals[pos[r]] = v;
            pos[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let c = row[k].0;
                let mut s = 0.0;
                while k < row.len() && row[k].0 == c {
                    s += row[k].1;
                    k += 1;
                }
                if s != 0.0 {
                    col_idx.push(c);
                    out_vals.push(s);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals: out_vals,
        })
    }

    /// Build from raw CSR arrays, validating every structural invariant.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != nrows + 1 || row_ptr[0] != 0 || row_ptr[nrows] != col_idx.len() {
            return Err(DdError::Problem("malformed row_ptr".into()));
        }
        if col_idx.len() != vals.len() {
            return Err(DdError::Problem("col_idx/vals length mismatch".into()));
        }
        for i in 0..nrows {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(DdError::Problem("row_ptr not monotone".into()));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= ncols) {
                return Err(DdError::Problem(format!("row {i}: unsorted or out-of-range columns")));
            }
        }
        if vals.iter().any(|&v| v == 0.0 || !v.is_finite()) {
            return Err(DdError::Problem("explicit zero or non-finite value stored".into()));
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn diag(d: &[f64]) -> Self {
        let trip: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &trip).expect("diagonal triplets are in range")
    }

    pub fn from_dense(m: &DenseMat) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != 0.0 {
                    trip.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trip).expect("dense entries are in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.nrows).all(|i| self.row(i).0.iter().all(|&j| j == i))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = M x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("spmv", self.ncols, x.len())?;
        let mut y = vec![0.0; self.nrows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = M x`, dimensions checked by the caller.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `y = M^T x`.
    pub fn spmv_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim("spmv_t", self.nrows, x.len())?;
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.vals[k] * xi;
            }
        }
        Ok(y)
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let mut pos = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let c = self.col_idx[k];
                col_idx[pos[c]] = i;
                vals[pos[c]] = self.vals[k];
                pos[c] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            row_ptr: counts,
            col_idx,
            vals,
        }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &SparseMat) -> Result<SparseMat> {
        check_dim("matmul", self.ncols, other.nrows)?;
        let mut acc = vec![0.0; other.ncols];
        let mut mark = vec![usize::MAX; other.ncols];
        let mut touched = Vec::new();
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for i in 0..self.nrows {
            touched.clear();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.vals[k];
                let r = self.col_idx[k];
                for kk in other.row_ptr[r]..other.row_ptr[r + 1] {
                    let c = other.col_idx[kk];
                    if mark[c] != i {
                        mark[c] = i;
                        acc[c] = 0.0;
                        touched.push(c);
                    }
                    acc[c] += a * other.vals[kk];
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    col_idx.push(c);
                    vals.push(acc[c]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMat {
            nrows: self.nrows,
            ncols: other.ncols,
            row_ptr,
            col_idx,
            vals,
        })
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &SparseMat) -> Result<SparseMat> {
        check_dim("add_scaled rows", self.nrows, other.nrows)?;
        check_dim("add_scaled cols", self.ncols, other.ncols)?;
        let trip: Vec<_> = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, alpha * v)))
            .collect();
        SparseMat::from_triplets(self.nrows, self.ncols, &trip)
    }

    /// Submatrix on the given (sorted) row and column index sets.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMat {
        let mut local = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            local[c] = k;
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        let mut row: Vec<(usize, f64)> = Vec::new();
        for &r in rows {
            row.clear();
            let (c, v) = self.row(r);
            for (&j, &x) in c.iter().zip(v) {
                if local[j] != usize::MAX {
                    row.push((local[j], x));
                }
            }
            row.sort_unstable_by_key(|e| e.0);
            for &(j, x) in &row {
                col_idx.push(j);
                vals.push(x);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMat {
            nrows: rows.len(),
            ncols: cols.len(),
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn to_dense(&self) -> DenseMat {
        let mut d = DenseMat::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] = v;
        }
        d
    }

    /// `max |M_ij - M_ji|`.
    pub fn asymmetry(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let t = self.transpose();
        match self.add_scaled(-1.0, &t) {
            Ok(d) => d.max_abs(),
            Err(_) => f64::INFINITY,
        }
    }

    /// True when `‖M − Mᵀ‖_max ≤ rel_tol·‖M‖_max`.
    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        self.asymmetry() <= rel_tol * self.max_abs()
    }

    /// Adjacency lists of the symmetric sparsity graph (diagonal excluded).
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nrows];
        for (i, j, _) in self.triplets() {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in &mut adj {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }
}

/// A boolean restriction: row `k` selects global index `indices[k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Restriction {
    global_len: usize,
    indices: Vec<usize>,
}

impl Restriction {
    /// `indices` must be sorted and unique.
    pub fn new(global_len: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DdError::NotRestriction("indices not sorted/unique".into()));
        }
        if indices.last().is_some_and(|&l| l >= global_len) {
            return Err(DdError::NotRestriction("index out of range".into()));
        }
        Ok(Self { global_len, indices })
    }

    /// Interpret a sparse matrix as a restriction. Each row must hold exactly
    /// one unit entry; selected columns must be strictly increasing.
    pub fn from_sparse(r: &SparseMat) -> Result<Self> {
        let mut idx = Vec::with_capacity(r.nrows());
        for i in 0..r.nrows() {
            let (c, v) = r.row(i);
            if c.len() != 1 || v[0] != 1.0 {
                return Err(DdError::NotRestriction(format!("row {i} is not a unit selection")));
            }
            idx.push(c[0]);
        }
        Self::new(r.ncols(), idx)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            global_len: n,
            indices: (0..n).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn global_len(&self) -> usize {
        self.global_len
    }

    /// `R x`.
    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&g| x[g]).collect()
    }

    /// `y += R^T x_local`.
    pub fn extend_add(&self, x_local: &[f64], y: &mut [f64]) {
        for (&g, &v) in self.indices.iter().zip(x_local) {
            y[g] += v;
        }
    }

    pub fn to_sparse(&self) -> SparseMat {
        let trip: Vec<_> = self.indices.iter().enumerate().map(|(k, &g)| (k, g, 1.0)).collect();
        SparseMat::from_triplets(self.indices.len(), self.global_len, &trip)
            .expect("restriction indices are in range")
    }
}

/// `R A R^T`: the principal submatrix of `a` on the indices selected by `r`.
pub fn triple_product(r: &Restriction, a: &SparseMat) -> Result<SparseMat> {
    check_dim("triple_product", a.ncols(), r.global_len())?;
    check_dim("triple_product", a.nrows(), r.global_len())?;
    Ok(a.submatrix(r.indices(), r.indices()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_5pt(nx: usize) -> SparseMat {
        let id = |i: usize, j: usize| i * nx + j;
        let mut t = Vec::new();
        for i in 0..nx {
            for j in 0..nx {
                t.push((id(i, j), id(i, j), 4.0));
                if i > 0 {
                    t.push((id(i, j), id(i - 1, j), -1.0));
                }
                if i + 1 < nx {
                    t.push((id(i, j), id(i + 1, j), -1.0));
                }
                if j > 0 {
                    t.push((id(i, j), id(i, j - 1), -1.0));
                }
                if j + 1 < nx {
                    t.push((id(i, j), id(i, j + 1), -1.0));
                }
            }
        }
        SparseMat::from_triplets(nx * nx, nx * nx, &t).unwrap()
    }

    #[test]
    fn spmv_identity_and_zero() {
        let y = SparseMat::identity(3).spmv(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0, 3.0]);
        let y = SparseMat::zeros(2, 2).spmv(&[5.0, -1.0]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn spmv_laplacian_matches_dense() {
        let a = laplace_5pt(3);
        let x = vec![1.0; 9];
        let y = a.spmv(&x).unwrap();
        let d = a.to_dense();
        let yd: Vec<f64> = (0..9).map(|i| (0..9).map(|j| d[(i, j)] * x[j]).sum()).collect();
        assert_eq!(y, yd);
        // corners have two neighbours, edges three, centre four
        assert_eq!(y, vec![2.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0, 1.0, 2.0]);
    }

    #[test]
    fn spmv_dim_mismatch() {
        assert!(matches!(
            SparseMat::identity(3).spmv(&[1.0]),
            Err(DdError::DimMismatch { .. })
        ));
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMat::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, -1.0), (1, 0, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(1, 0), 5.0);
    }

    #[test]
    fn from_csr_rejects_unsorted() {
        assert!(SparseMat::from_csr(1, 3, vec![0, 2], vec![2, 0], vec![1.0, 1.0]).is_err());
        assert!(SparseMat::from_csr(1, 3, vec![0, 1], vec![0], vec![0.0]).is_err());
    }

    #[test]
    fn triple_product_cases() {
        let a = laplace_5pt(2);
        let all = Restriction::identity(4);
        assert_eq!(triple_product(&all, &a).unwrap(), a);
        let one = Restriction::new(4, vec![2]).unwrap();
        let s = triple_product(&one, &a).unwrap();
        assert_eq!(s.to_dense()[(0, 0)], 4.0);
        let bad = SparseMat::from_triplets(1, 4, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        assert!(matches!(Restriction::from_sparse(&bad), Err(DdError::NotRestriction(_))));
        let scaled = SparseMat::from_triplets(1, 4, &[(0, 0, 2.0)]).unwrap();
        assert!(Restriction::from_sparse(&scaled).is_err());
    }

    #[test]
    fn matmul_and_transpose() {
        let a = laplace_5pt(3);
        let r = Restriction::new(9, vec![0, 4, 8]).unwrap().to_sparse();
        let rar = r.matmul(&a).unwrap().matmul(&r.transpose()).unwrap();
        let direct = triple_product(&Restriction::from_sparse(&r).unwrap(), &a).unwrap();
        assert_eq!(rar, direct);
        assert!(a.is_symmetric(0.0));
    }
}
