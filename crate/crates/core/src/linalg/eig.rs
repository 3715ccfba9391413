//! Dense symmetric eigenproblems.
//!
//! The standard problem is delegated to `nalgebra`'s symmetric QR solver;
//! the generalized pencil with a possibly singular right-hand matrix and the
//! pseudo-inverse are built on top of it.

use nalgebra::DMatrix;

use crate::config::Tolerances;
use crate::error::{DdError, Result};
use crate::linalg::DenseMat;

#[derive(Debug, Clone, PartialEq)]
pub struct EigPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

/// Full spectrum of a symmetric matrix, ascending, with orthonormal vectors.
pub fn sym_eig(m: &DenseMat) -> Result<Vec<EigPair>> {
    sym_eig_tol(m, Tolerances::default().symmetry)
}

pub fn sym_eig_tol(m: &DenseMat, sym_tol: f64) -> Result<Vec<EigPair>> {
    if !m.is_square() {
        return Err(DdError::DimMismatch {
            op: "sym_eig",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let asym = m.asymmetry();
    if asym > sym_tol * m.max_abs() {
        return Err(DdError::NotSymmetric(asym));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut sym = m.clone();
    sym.symmetrize();
    let dm = DMatrix::from_column_slice(n, n, sym.as_slice());
    let se = dm.symmetric_eigen();
    let mut pairs: Vec<EigPair> = (0..n)
        .map(|k| EigPair {
            value: se.eigenvalues[k],
            vector: se.eigenvectors.column(k).iter().copied().collect(),
        })
        .collect();
    pairs.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(pairs)
}

/// Solution of the pencil `L v = lambda Rm v` with `L`, `Rm` symmetric PSD.
#[derive(Debug, Clone, Default)]
pub struct GenEig {
    /// Finite pairs, ascending, `Rm`-orthonormal.
    pub finite: Vec<EigPair>,
    /// Directions of `ker(Rm)` on which `L` is positive: `lambda = +inf`.
    pub infinite: Vec<Vec<f64>>,
    /// Directions in `ker(L) ∩ ker(Rm)`, excluded from the spectrum.
    pub degenerate: Vec<Vec<f64>>,
}

impl GenEig {
    /// All eigenvalues with `+inf` for the infinite directions, ascending.
    pub fn values(&self) -> Vec<f64> {
        self.finite
            .iter()
            .map(|p| p.value)
            .chain(self.infinite.iter().map(|_| f64::INFINITY))
            .collect()
    }

    pub fn max_finite(&self) -> Option<f64> {
        self.finite.last().map(|p| p.value)
    }
}

/// Generalized symmetric eigenproblem `L v = lambda Rm v` with `Rm` possibly
/// singular.
///
/// `Rm` is diagonalized and split into its range and kernel (eigenvalues at
/// most `drop * lambda_max(Rm)` count as kernel). The kernel coordinates are
/// eliminated through the Schur complement of `L`, so the finite pairs are
/// exact eigenpairs of the full pencil; kernel directions where `L` is
/// positive are reported as infinite eigenvalues.
pub fn gen_sym_eig(l: &DenseMat, rm: &DenseMat, drop: f64) -> Result<GenEig> {
    let n = l.nrows();
    if !l.is_square() || !rm.is_square() || rm.nrows() != n {
        return Err(DdError::DimMismatch {
            op: "gen_sym_eig",
            expected: n,
            got: rm.nrows(),
        });
    }
    if n == 0 {
        return Ok(GenEig::default());
    }
    let rm_eig = sym_eig(rm)?;
    let rm_max = rm_eig.last().map_or(0.0, |p| p.value).max(0.0);
    let (range, kernel): (Vec<&EigPair>, Vec<&EigPair>) = rm_eig
        .iter()
        .partition(|p| rm_max > 0.0 && p.value > drop * rm_max);

    let vr = DenseMat::from_columns(n, &range.iter().map(|p| p.vector.clone()).collect::<Vec<_>>());
    let inv_sqrt: Vec<f64> = range.iter().map(|p| 1.0 / p.value.sqrt()).collect();
    let lrr = vr.t_matmul(&l.matmul(&vr)?)?;

    let mut out = GenEig::default();
    let (schur, lift) = if kernel.is_empty() {
        (lrr, None)
    } else {
        let vk = DenseMat::from_columns(n, &kernel.iter().map(|p| p.vector.clone()).collect::<Vec<_>>());
        let kk = vk.t_matmul(&l.matmul(&vk)?)?;
        let kk_eig = sym_eig_tol(&kk, 1e-8)?;
        let l_scale = l.frobenius().max(f64::MIN_POSITIVE);
        let mut pos_dirs = Vec::new();
        let mut pos_vals = Vec::new();
        for p in &kk_eig {
            let dir = vk.matvec(&p.vector)?;
            if p.value > drop * l_scale {
                pos_vals.push(p.value);
                pos_dirs.push(dir);
            } else {
                out.degenerate.push(dir);
            }
        }
        if pos_dirs.is_empty() {
            (lrr, None)
        } else {
            let u = DenseMat::from_columns(n, &pos_dirs);
            // L_ru K_p^{-1} L_ur
            let lru = vr.t_matmul(&l.matmul(&u)?)?;
            let scaled = DenseMat::from_fn(lru.nrows(), lru.ncols(), |i, j| lru[(i, j)] / pos_vals[j]);
            let corr = scaled.matmul(&lru.transpose())?;
            let schur = lrr.sub(&corr)?;
            out.infinite = pos_dirs;
            (schur, Some((u, scaled)))
        }
    };

    if !range.is_empty() {
        let mut whitened = schur.scale_rows_cols(&inv_sqrt, &inv_sqrt);
        whitened.symmetrize();
        let pairs = sym_eig_tol(&whitened, 1e-8)?;
        for p in pairs {
            let a: Vec<f64> = p.vector.iter().zip(&inv_sqrt).map(|(y, s)| y * s).collect();
            let mut v = vr.matvec(&a)?;
            if let Some((u, scaled)) = &lift {
                // b = -K_p^{-1} L_ur a
                let b: Vec<f64> = scaled.matvec_t(&a)?.iter().map(|x| -x).collect();
                let ub = u.matvec(&b)?;
                for (vi, x) in v.iter_mut().zip(&ub) {
                    *vi += x;
                }
            }
            out.finite.push(EigPair { value: p.value, vector: v });
        }
    }
    Ok(out)
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix, stored explicitly.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    pinv: DenseMat,
    rank: usize,
}

impl PseudoInverse {
    /// Eigenvalues at most `drop_tol * lambda_max` are treated as zero.
    pub fn new(m: &DenseMat, drop_tol: f64) -> Result<Self> {
        let n = m.nrows();
        let pairs = sym_eig_tol(m, 1e-8)?;
        let lmax = pairs.last().map_or(0.0, |p| p.value);
        let mut pinv = DenseMat::zeros(n, n);
        let mut rank = 0;
        if lmax > 0.0 {
            for p in pairs.iter().filter(|p| p.value > drop_tol * lmax) {
                rank += 1;
                let s = 1.0 / p.value;
                for j in 0..n {
                    let vj = p.vector[j] * s;
                    if vj == 0.0 {
                        continue;
                    }
                    for (c, &vi) in pinv.col_mut(j).iter_mut().zip(&p.vector) {
                        *c += vi * vj;
                    }
                }
            }
        }
        pinv.symmetrize();
        Ok(Self { pinv, rank })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &DenseMat {
        &self.pinv
    }

    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.pinv.matvec(g)
    }
}

/// `M^+ g` for symmetric PSD `M`, dropping eigenvalues `<= drop_tol * lambda_max`.
pub fn pseudo_apply(m: &DenseMat, drop_tol: f64, g: &[f64]) -> Result<Vec<f64>> {
    PseudoInverse::new(m, drop_tol)?.apply(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::{random_psd, random_sym};

    #[test]
    fn sym_eig_diag_and_swap() {
        let p = sym_eig(&DenseMat::from_diag(&[1.0, 2.0, 3.0])).unwrap();
        let vals: Vec<f64> = p.iter().map(|p| p.value).collect();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        for (k, pair) in p.iter().enumerate() {
            assert!((pair.vector[k].abs() - 1.0).abs() < 1e-15);
        }
        let p = sym_eig(&DenseMat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((p[0].value + 1.0).abs() < 1e-15 && (p[1].value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sym_eig_rejects_nonsymmetric() {
        let m = DenseMat::from_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(sym_eig(&m), Err(DdError::NotSymmetric(_))));
    }

    #[test]
    fn sym_eig_random_residual() {
        let m = random_sym(8, 5);
        let p = sym_eig(&m).unwrap();
        let v = DenseMat::from_columns(8, &p.iter().map(|p| p.vector.clone()).collect::<Vec<_>>());
        let lam = DenseMat::from_diag(&p.iter().map(|p| p.value).collect::<Vec<_>>());
        let r = m.matmul(&v).unwrap().sub(&v.matmul(&lam).unwrap()).unwrap();
        assert!(r.frobenius() <= 1e-10);
        let vtv = v.t_matmul(&v).unwrap().sub(&DenseMat::identity(8)).unwrap();
        assert!(vtv.max_abs() < 1e-12);
    }

    #[test]
    fn gen_eig_trivial_pencils() {
        let g = gen_sym_eig(&DenseMat::identity(3), &DenseMat::identity(3), 1e-12).unwrap();
        assert!(g.finite.iter().all(|p| (p.value - 1.0).abs() < 1e-14));
        let g = gen_sym_eig(&DenseMat::from_diag(&[2.0, 8.0]), &DenseMat::from_diag(&[1.0, 2.0]), 1e-12).unwrap();
        let v = g.values();
        assert!((v[0] - 2.0).abs() < 1e-14 && (v[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn gen_eig_singular_right_side() {
        let l = random_psd(6, 6, 1);
        let rm = random_psd(6, 4, 2);
        let g = gen_sym_eig(&l, &rm, 1e-12).unwrap();
        assert_eq!(g.finite.len(), 4);
        assert_eq!(g.infinite.len(), 2);
        let (ln, rn) = (l.frobenius(), rm.frobenius());
        for p in &g.finite {
            let lv = l.matvec(&p.vector).unwrap();
            let rv = rm.matvec(&p.vector).unwrap();
            let res: f64 = lv.iter().zip(&rv).map(|(a, b)| (a - p.value * b).powi(2)).sum::<f64>().sqrt();
            let vn = crate::linalg::norm2(&p.vector);
            assert!(res <= 1e-8 * (ln + p.value.abs() * rn) * vn, "residual {res}");
        }
        for (i, p) in g.finite.iter().enumerate() {
            let rp = rm.matvec(&p.vector).unwrap();
            for (j, q) in g.finite.iter().enumerate() {
                let ip = crate::linalg::dot(&rp, &q.vector);
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((ip - target).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn gen_eig_common_kernel_excluded() {
        let l = DenseMat::from_diag(&[1.0, 0.0, 3.0]);
        let rm = DenseMat::from_diag(&[1.0, 0.0, 0.0]);
        let g = gen_sym_eig(&l, &rm, 1e-12).unwrap();
        assert_eq!(g.finite.len(), 1);
        assert_eq!(g.infinite.len(), 1);
        assert_eq!(g.degenerate.len(), 1);
        assert!(g.degenerate[0][1].abs() > 0.99);
    }

    #[test]
    fn pseudo_apply_cases() {
        let g = vec![4.0, 5.0];
        assert_eq!(pseudo_apply(&DenseMat::identity(2), 1e-10, &g).unwrap(), g);
        let x = pseudo_apply(&DenseMat::from_diag(&[2.0, 0.0]), 1e-10, &g).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && x[1] == 0.0);
        let z = pseudo_apply(&DenseMat::zeros(2, 2), 1e-10, &g).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);
    }

    #[test]
    fn pseudo_inverse_penrose_identities() {
        for (n, r, seed) in [(5, 3, 7), (20, 11, 8), (50, 30, 9)] {
            let m = random_psd(n, r, seed);
            let p = PseudoInverse::new(&m, 1e-10).unwrap();
            assert_eq!(p.rank(), r);
            let x = p.matrix();
            let scale = m.max_abs();
            let mxm = m.matmul(x).unwrap().matmul(&m).unwrap();
            assert!(mxm.sub(&m).unwrap().max_abs() <= 1e-8 * scale);
            let xmx = x.matmul(&m).unwrap().matmul(x).unwrap();
            assert!(xmx.sub(x).unwrap().max_abs() <= 1e-8 * x.max_abs());
            let mx = m.matmul(x).unwrap();
            assert!(mx.asymmetry() <= 1e-8);
            let xm = x.matmul(&m).unwrap();
            assert!(xm.asymmetry() <= 1e-8);
        }
    }
}
