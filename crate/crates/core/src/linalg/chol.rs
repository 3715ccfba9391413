//! Cholesky factorizations: dense for desk-scale local and coarse matrices,
//! profile (envelope) storage with reverse Cuthill–McKee ordering above the
//! dense cutoff.

use std::collections::VecDeque;

use crate::error::{check_dim, DdError, Result};
use crate::linalg::{DenseMat, SparseMat};

/// `P M P^T = L L^T`.
#[derive(Debug, Clone)]
pub enum CholFactor {
    Dense(DenseChol),
    Profile(ProfileChol),
}

impl CholFactor {
    pub fn dim(&self) -> usize {
        match self {
            CholFactor::Dense(d) => d.dim(),
            CholFactor::Profile(p) => p.dim(),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            CholFactor::Dense(d) => d.solve(b),
            CholFactor::Profile(p) => p.solve(b),
        }
    }

    /// Factor a sparse SPD matrix, densely when `n <= dense_cutoff`.
    pub fn factor_sparse(m: &SparseMat, dense_cutoff: usize) -> Result<Self> {
        if m.nrows() <= dense_cutoff {
            Ok(CholFactor::Dense(chol(&m.to_dense())?))
        } else {
            Ok(CholFactor::Profile(ProfileChol::new(m)?))
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseChol {
    l: DenseMat,
}

/// Dense Cholesky `M = L L^T` (identity permutation).
pub fn chol(m: &DenseMat) -> Result<DenseChol> {
    if !m.is_square() {
        return Err(DdError::DimMismatch {
            op: "chol",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let n = m.nrows();
    let mut l = m.clone();
    for k in 0..n {
        let d = l[(k, k)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(DdError::NotSpd { pivot: k, value: d });
        }
        let piv = d.sqrt();
        l[(k, k)] = piv;
        for i in k + 1..n {
            l[(i, k)] /= piv;
        }
        right_looking_update(&mut l, k);
    }
    zero_upper(&mut l);
    Ok(DenseChol { l })
}

fn right_looking_update(l: &mut DenseMat, k: usize) {
    let n = l.nrows();
    let (head, tail) = l.as_mut_slice().split_at_mut((k + 1) * n);
    let colk = &head[k * n..(k + 1) * n];
    for (jj, colj) in tail.chunks_mut(n).enumerate() {
        let j = k + 1 + jj;
        let ljk = colk[j];
        if ljk == 0.0 {
            continue;
        }
        for i in j..n {
            colj[i] -= colk[i] * ljk;
        }
    }
}

fn zero_upper(l: &mut DenseMat) {
    let n = l.nrows();
    for j in 0..n {
        for i in 0..j {
            l[(i, j)] = 0.0;
        }
    }
}

impl DenseChol {
    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn l(&self) -> &DenseMat {
        &self.l
    }

    /// Solve `L y = b`.
    pub fn forward(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim("chol forward", self.dim(), b.len())?;
        let n = self.dim();
        let mut y = b.to_vec();
        for j in 0..n {
            y[j] /= self.l[(j, j)];
            let yj = y[j];
            if yj != 0.0 {
                let c = self.l.col(j);
                for i in j + 1..n {
                    y[i] -= c[i] * yj;
                }
            }
        }
        Ok(y)
    }

    /// Solve `L^T x = y`.
    pub fn backward(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("chol backward", self.dim(), y.len())?;
        let n = self.dim();
        let mut x = y.to_vec();
        for j in (0..n).rev() {
            let c = self.l.col(j);
            let mut s = x[j];
            for i in j + 1..n {
                s -= c[i] * x[i];
            }
            x[j] = s / c[j];
        }
        Ok(x)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.backward(&self.forward(b)?)
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> DenseMat {
        self.l.matmul(&self.l.transpose()).expect("square factor")
    }
}

/// Rank-revealing Cholesky of a Gram matrix that drops dependent columns.
///
/// At every step the candidate with the largest remaining pivot relative to
/// its original diagonal `G_kk` is eliminated next; elimination stops once
/// that ratio is at most `rel_drop`. Returns the kept indices in elimination
/// order and the factor of `G[keep, keep]` in that order.
pub fn chol_dropping(g: &DenseMat, rel_drop: f64) -> Result<(Vec<usize>, DenseChol)> {
    if !g.is_square() {
        return Err(DdError::DimMismatch {
            op: "chol_dropping",
            expected: g.nrows(),
            got: g.ncols(),
        });
    }
    let n = g.nrows();
    let orig: Vec<f64> = (0..n).map(|k| g[(k, k)]).collect();
    let mut resid = orig.clone();
    let mut active: Vec<bool> = orig.iter().map(|&d| d > 0.0).collect();
    let mut keep = Vec::new();
    // cols[c][k] = L(k, c) for every candidate k (full-length columns)
    let mut cols: Vec<Vec<f64>> = Vec::new();
    loop {
        let best = (0..n)
            .filter(|&k| active[k])
            .map(|k| (k, resid[k] / orig[k]))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        let Some((j, ratio)) = best else { break };
        if ratio <= rel_drop {
            break;
        }
        let piv = resid[j].sqrt();
        let mut col = g.col(j).to_vec();
        for c in &cols {
            let cj = c[j];
            if cj != 0.0 {
                col.iter_mut().zip(c).for_each(|(s, ck)| *s -= ck * cj);
            }
        }
        for k in 0..n {
            if active[k] && k != j {
                col[k] /= piv;
                resid[k] -= col[k] * col[k];
            } else {
                col[k] = 0.0;
            }
        }
        col[j] = piv;
        active[j] = false;
        keep.push(j);
        cols.push(col);
    }
    let m = keep.len();
    let mut l = DenseMat::zeros(m, m);
    for (c, col) in cols.iter().enumerate() {
        for (r, &k) in keep.iter().enumerate().skip(c) {
            l[(r, c)] = col[k];
        }
    }
    Ok((keep, DenseChol { l }))
}

/// Envelope Cholesky on a reverse Cuthill–McKee ordering.
#[derive(Debug, Clone)]
pub struct ProfileChol {
    perm: Vec<usize>,
    /// first column of row `i` of L
    first: Vec<usize>,
    /// start offset of row `i` in `vals`
    start: Vec<usize>,
    vals: Vec<f64>,
}

impl ProfileChol {
    pub fn new(m: &SparseMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(DdError::DimMismatch {
                op: "profile chol",
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let n = m.nrows();
        let perm = rcm_order(&m.adjacency());
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (i, j, _) in m.triplets() {
            let (pi, pj) = (inv[i], inv[j]);
            if pj < pi {
                first[pi] = first[pi].min(pj);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut vals = vec![0.0; total];
        for (i, j, v) in m.triplets() {
            let (pi, pj) = (inv[i], inv[j]);
            if pj <= pi {
                vals[start[pi] + pj - first[pi]] = v;
            }
        }
        for i in 0..n {
            for j in first[i]..=i {
                let lo = first[i].max(first[j]);
                let mut s = vals[start[i] + j - first[i]];
                for k in lo..j {
                    s -= vals[start[i] + k - first[i]] * vals[start[j] + k - first[j]];
                }
                if j == i {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(DdError::NotSpd { pivot: perm[i], value: s });
                    }
                    vals[start[i] + i - first[i]] = s.sqrt();
                } else {
                    vals[start[i] + j - first[i]] = s / vals[start[j] + j - first[j]];
                }
            }
        }
        Ok(Self { perm, first, start, vals })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    fn l(&self, i: usize, j: usize) -> f64 {
        self.vals[self.start[i] + j - self.first[i]]
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        check_dim("profile solve", n, b.len())?;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in self.first[i]..i {
                s -= self.l(i, k) * y[k];
            }
            y[i] = s / self.l(i, i);
        }
        for i in (0..n).rev() {
            y[i] /= self.l(i, i);
            let yi = y[i];
            for k in self.first[i]..i {
                y[k] -= self.l(i, k) * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(x)
    }
}

/// Reverse Cuthill–McKee ordering, component by component, each started at
/// a pseudo-peripheral vertex. Returns `perm[new] = old`.
pub fn rcm_order(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adj, seed);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            nb.sort_by_key(|&w| (adj[w].len(), w));
            for w in nb {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// BFS levels from `start`: (distances, last level's vertices).
pub(crate) fn bfs_levels(adj: &[Vec<usize>], start: usize) -> (Vec<usize>, Vec<usize>) {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut maxd = 0;
    while let Some(v) = queue.pop_front() {
        maxd = maxd.max(dist[v]);
        for &w in &adj[v] {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    let last = (0..adj.len()).filter(|&v| dist[v] == maxd).collect();
    (dist, last)
}

pub(crate) fn pseudo_peripheral(adj: &[Vec<usize>], seed: usize) -> usize {
    let mut v = seed;
    let mut ecc = 0;
    loop {
        let (dist, last) = bfs_levels(adj, v);
        let d = dist[last[0]];
        let w = *last.iter().min_by_key(|&&u| (adj[u].len(), u)).expect("nonempty level");
        if d <= ecc {
            return v;
        }
        ecc = d;
        v = w;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::random_spd;

    #[test]
    fn chol_identity_and_2x2() {
        let f = chol(&DenseMat::identity(4)).unwrap();
        assert_eq!(f.l(), &DenseMat::identity(4));
        let f = chol(&DenseMat::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap();
        let l = f.l();
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(1, 0)], 1.0);
        assert_eq!(l[(0, 1)], 0.0);
        assert!((l[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn chol_reports_pivot() {
        let m = DenseMat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        match chol(&m) {
            Err(DdError::NotSpd { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("expected NotSpd, got {other:?}"),
        }
    }

    #[test]
    fn chol_random_reconstruction() {
        let m = random_spd(10, 3);
        let f = chol(&m).unwrap();
        let err = f.reconstruct().sub(&m).unwrap().frobenius() / m.frobenius();
        assert!(err <= 1e-12, "{err}");
    }

    #[test]
    fn chol_solve_residual_n500() {
        let m = random_spd(500, 11);
        let f = chol(&m).unwrap();
        let b: Vec<f64> = (0..500).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let x = f.solve(&b).unwrap();
        let r = m.matvec(&x).unwrap();
        let res: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * crate::linalg::norm2(&b));
    }

    #[test]
    fn dropping_chol_skips_dependent_columns() {
        // columns: e0, e1, e0+e1, e2
        let z = DenseMat::from_rows(&[&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        let g = z.t_matmul(&z).unwrap();
        let (keep, f) = chol_dropping(&g, 1e-10).unwrap();
        assert_eq!(keep, vec![0, 1, 3]);
        let sub = g.select(&keep, &keep);
        assert!(f.reconstruct().sub(&sub).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn profile_matches_dense() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
            if i + 7 < n {
                t.push((i, i + 7, -1.0));
                t.push((i + 7, i, -1.0));
            }
        }
        let a = SparseMat::from_triplets(n, n, &t).unwrap();
        let p = CholFactor::factor_sparse(&a, 0).unwrap();
        assert!(matches!(p, CholFactor::Profile(_)));
        let d = CholFactor::factor_sparse(&a, 100).unwrap();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let (x1, x2) = (p.solve(&b).unwrap(), d.solve(&b).unwrap());
        for (u, v) in x1.iter().zip(&x2) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn rcm_is_permutation() {
        let adj = vec![vec![1], vec![0, 2], vec![1], vec![]];
        let mut p = rcm_order(&adj);
        p.sort();
        assert_eq!(p, vec![0, 1, 2, 3]);
    }
}
