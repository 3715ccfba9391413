use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{DdError, Result};
use crate::linalg::{read_matrix_market_file, sym_eig_tol, write_matrix_market_file, DenseMat, SparseMat};

/// One element of a PSD splitting: a small dense PSD matrix and the global
/// indices it scatters to.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub dofs: Vec<usize>,
    pub mat: DenseMat,
}

/// A matrix written as a sum of small PSD element matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PsdSplit {
    pub elements: Vec<Element>,
}

impl PsdSplit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, dofs: Vec<usize>, mat: DenseMat) {
        debug_assert_eq!(dofs.len(), mat.nrows());
        self.elements.push(Element { dofs, mat });
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn assemble(&self, n: usize) -> Result<SparseMat> {
        let mut trip = Vec::new();
        for e in &self.elements {
            for (a, &i) in e.dofs.iter().enumerate() {
                for (b, &j) in e.dofs.iter().enumerate() {
                    let v = e.mat[(a, b)];
                    if v != 0.0 {
                        trip.push((i, j, v));
                    }
                }
            }
        }
        SparseMat::from_triplets(n, n, &trip)
    }

    /// Sum of the elements whose dofs all lie in `local_of` (global → local
    /// map, `usize::MAX` for outside), as a dense local matrix.
    pub fn assemble_local(&self, local_of: &[usize], size: usize) -> DenseMat {
        let mut m = DenseMat::zeros(size, size);
        for e in &self.elements {
            if e.dofs.iter().all(|&g| local_of[g] != usize::MAX) {
                for (a, &i) in e.dofs.iter().enumerate() {
                    for (b, &j) in e.dofs.iter().enumerate() {
                        m[(local_of[i], local_of[j])] += e.mat[(a, b)];
                    }
                }
            }
        }
        m
    }

    /// Checks every element is symmetric PSD (min eigenvalue ≥ −tol·λ_max).
    pub fn check_psd(&self, tol: &Tolerances) -> Result<()> {
        for (k, e) in self.elements.iter().enumerate() {
            let pairs = sym_eig_tol(&e.mat, tol.symmetry.max(1e-14))?;
            let lmax = pairs.last().map_or(0.0, |p| p.value);
            let lmin = pairs.first().map_or(0.0, |p| p.value);
            if lmin < -tol.psd * lmax.abs().max(f64::MIN_POSITIVE) {
                return Err(DdError::Problem(format!("element {k} not PSD (min eigenvalue {lmin:e})")));
            }
        }
        Ok(())
    }

    /// ASCII format: element count, then per element a line
    /// `size i_1 ... i_size` (1-based) and a line with the row-major entries.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.elements.len())?;
        for e in &self.elements {
            write!(w, "{}", e.dofs.len())?;
            for &d in &e.dofs {
                write!(w, " {}", d + 1)?;
            }
            writeln!(w)?;
            let k = e.dofs.len();
            let vals: Vec<String> = (0..k * k).map(|t| format!("{:e}", e.mat[(t / k, t % k)])).collect();
            writeln!(w, "{}", vals.join(" "))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            for t in line.split_whitespace() {
                tokens.push((ln + 1, t.to_string()));
            }
        }
        let mut it = tokens.into_iter();
        let mut next = |what: &str| -> Result<(usize, String)> {
            it.next().ok_or(DdError::Parse { line: 0, msg: format!("unexpected end of file, expected {what}") })
        };
        let parse_usize = |(ln, t): (usize, String)| -> Result<usize> {
            t.parse().map_err(|_| DdError::Parse { line: ln, msg: format!("bad integer {t}") })
        };
        let count = parse_usize(next("element count")?)?;
        let mut split = PsdSplit::new();
        for _ in 0..count {
            let k = parse_usize(next("element size")?)?;
            let mut dofs = Vec::with_capacity(k);
            for _ in 0..k {
                let (ln, t) = next("index")?;
                let d = parse_usize((ln, t))?;
                if d == 0 {
                    return Err(DdError::Parse { line: ln, msg: "indices are 1-based".into() });
                }
                dofs.push(d - 1);
            }
            let mut mat = DenseMat::zeros(k, k);
            for t in 0..k * k {
                let (ln, tok) = next("value")?;
                mat[(t / k, t % k)] = tok
                    .parse()
                    .map_err(|_| DdError::Parse { line: ln, msg: format!("bad value {tok}") })?;
            }
            split.push(dofs, mat);
        }
        Ok(split)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

/// The block system `[[A, B^T], [B, -C]]` with PSD splittings.
#[derive(Debug, Clone)]
pub struct SaddleSystem {
    pub a: SparseMat,
    pub b: SparseMat,
    pub c: SparseMat,
    pub a_split: PsdSplit,
    pub c_split: Option<PsdSplit>,
    /// Optional 2D coordinates of the primal dofs, used for coordinate bisection.
    pub coords: Option<Vec<[f64; 2]>>,
}

impl SaddleSystem {
    /// Builds the system and checks every structural hypothesis.
    pub fn new(
        a: SparseMat,
        b: SparseMat,
        c: SparseMat,
        a_split: PsdSplit,
        c_split: Option<PsdSplit>,
        coords: Option<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        let sys = Self {
            a,
            b,
            c,
            a_split,
            c_split,
            coords,
        };
        sys.validate(&Tolerances::default())?;
        Ok(sys)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.nrows()
    }

    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        let bad = |s: String| Err(DdError::Problem(s));
        if self.a.ncols() != n || self.b.ncols() != n || self.c.nrows() != m || self.c.ncols() != m {
            return bad(format!(
                "inconsistent block sizes: A {}x{}, B {}x{}, C {}x{}",
                self.a.nrows(),
                self.a.ncols(),
                self.b.nrows(),
                self.b.ncols(),
                self.c.nrows(),
                self.c.ncols()
            ));
        }
        if m >= n && m > 0 {
            return bad(format!("need m < n, got m = {m}, n = {n}"));
        }
        if !self.a.is_symmetric(tol.symmetry) {
            return bad("A is not symmetric".into());
        }
        if !self.c.is_symmetric(tol.symmetry) {
            return bad("C is not symmetric".into());
        }
        if self.c.diagonal().iter().any(|&d| d < 0.0) {
            return bad("C has a negative diagonal entry".into());
        }
        if let Some(i) = (0..m).find(|&i| self.b.row(i).0.is_empty()) {
            return bad(format!("B has a zero row ({i})"));
        }
        if let Some(coords) = &self.coords {
            if coords.len() != n {
                return bad("coordinate count differs from n".into());
            }
        }
        self.a_split.check_psd(tol)?;
        let gap = self.a_split.assemble(n)?.add_scaled(-1.0, &self.a)?.max_abs();
        if gap > 1e-12 * self.a.max_abs() {
            return bad(format!("A split does not reassemble A (gap {gap:e})"));
        }
        if let Some(cs) = &self.c_split {
            cs.check_psd(tol)?;
            let gap = cs.assemble(m)?.add_scaled(-1.0, &self.c)?.max_abs();
            if gap > 1e-12 * self.c.max_abs().max(f64::MIN_POSITIVE) {
                return bad(format!("C split does not reassemble C (gap {gap:e})"));
            }
        }
        Ok(())
    }

    /// `(A U + B^T P, B U - C P)`.
    pub fn apply(&self, u: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut top = self.a.spmv(u)?;
        for (t, v) in top.iter_mut().zip(self.b.spmv_t(p)?) {
            *t += v;
        }
        let mut bot = self.b.spmv(u)?;
        for (t, v) in bot.iter_mut().zip(self.c.spmv(p)?) {
            *t -= v;
        }
        Ok((top, bot))
    }

    /// Relative block residual `‖𝓐(U,P) − F‖ / ‖F‖` (absolute when `F = 0`).
    pub fn block_residual(&self, u: &[f64], p: &[f64], fu: &[f64], fp: &[f64]) -> Result<f64> {
        let (top, bot) = self.apply(u, p)?;
        let r2: f64 = top.iter().zip(fu).chain(bot.iter().zip(fp)).map(|(a, b)| (a - b).powi(2)).sum();
        let f2: f64 = fu.iter().chain(fp).map(|v| v * v).sum();
        Ok(if f2 > 0.0 { (r2 / f2).sqrt() } else { r2.sqrt() })
    }
}

/// Locations of a problem on disk: Matrix Market blocks, split files and
/// optional dof coordinates (one `x y` pair per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFiles {
    pub a: PathBuf,
    pub b: PathBuf,
    pub c: PathBuf,
    pub a_split: PathBuf,
    #[serde(default)]
    pub c_split: Option<PathBuf>,
    #[serde(default)]
    pub coords: Option<PathBuf>,
}

impl ProblemFiles {
    /// Standard names inside `dir`; optional files are kept only if present.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let d = dir.as_ref();
        let opt = |name: &str| Some(d.join(name)).filter(|p| p.exists());
        Self {
            a: d.join("A.mtx"),
            b: d.join("B.mtx"),
            c: d.join("C.mtx"),
            a_split: d.join("A.split"),
            c_split: opt("C.split"),
            coords: opt("coords.txt"),
        }
    }

    pub fn load(&self) -> Result<SaddleSystem> {
        let coords = match &self.coords {
            Some(p) => Some(read_coords(p)?),
            None => None,
        };
        let c_split = match &self.c_split {
            Some(p) => Some(PsdSplit::read_file(p)?),
            None => None,
        };
        SaddleSystem::new(
            read_matrix_market_file(&self.a)?,
            read_matrix_market_file(&self.b)?,
            read_matrix_market_file(&self.c)?,
            PsdSplit::read_file(&self.a_split)?,
            c_split,
            coords,
        )
    }
}

fn read_coords(path: &Path) -> Result<Vec<[f64; 2]>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| DdError::Parse { line: ln + 1, msg: format!("bad coordinate {t}") }))
            .collect::<Result<_>>()?;
        if v.len() != 2 {
            return Err(DdError::Parse { line: ln + 1, msg: "expected two coordinates".into() });
        }
        out.push([v[0], v[1]]);
    }
    Ok(out)
}

impl SaddleSystem {
    /// Writes the system under the standard names of [`ProblemFiles::in_dir`].
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<ProblemFiles> {
        let d = dir.as_ref();
        std::fs::create_dir_all(d)?;
        write_matrix_market_file(&self.a, d.join("A.mtx"))?;
        write_matrix_market_file(&self.b, d.join("B.mtx"))?;
        write_matrix_market_file(&self.c, d.join("C.mtx"))?;
        self.a_split.write_file(d.join("A.split"))?;
        if let Some(s) = &self.c_split {
            s.write_file(d.join("C.split"))?;
        }
        if let Some(xy) = &self.coords {
            let mut w = std::io::BufWriter::new(std::fs::File::create(d.join("coords.txt"))?);
            for p in xy {
                writeln!(w, "{:e} {:e}", p[0], p[1])?;
            }
            w.flush()?;
        }
        Ok(ProblemFiles::in_dir(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> SaddleSystem {
        let mut split = PsdSplit::new();
        split.push(vec![0, 1], DenseMat::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]));
        split.push(vec![0], DenseMat::from_rows(&[&[1.0]]));
        split.push(vec![1], DenseMat::from_rows(&[&[1.0]]));
        let a = split.assemble(2).unwrap();
        let b = SparseMat::from_triplets(1, 2, &[(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
        SaddleSystem::new(a, b, SparseMat::zeros(1, 1), split, None, None).unwrap()
    }

    #[test]
    fn validates_and_applies() {
        let s = tiny();
        let (t, b) = s.apply(&[1.0, 2.0], &[3.0]).unwrap();
        assert_eq!(t, vec![3.0, 6.0]);
        assert_eq!(b, vec![3.0]);
    }

    #[test]
    fn rejects_zero_row_in_b() {
        let s = tiny();
        let b = SparseMat::zeros(1, 2);
        let e = SaddleSystem::new(s.a.clone(), b, s.c.clone(), s.a_split.clone(), None, None);
        assert!(matches!(e, Err(DdError::Problem(_))));
    }

    #[test]
    fn rejects_non_psd_element() {
        let s = tiny();
        let mut split = s.a_split.clone();
        split.push(vec![0, 1], DenseMat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]));
        split.push(vec![0, 1], DenseMat::from_rows(&[&[0.0, -1.0], &[-1.0, 0.0]]));
        assert!(split.check_psd(&Tolerances::default()).is_err());
    }

    #[test]
    fn split_file_round_trip() {
        let s = tiny();
        let mut buf = Vec::new();
        s.a_split.write(&mut buf).unwrap();
        let back = PsdSplit::read(buf.as_slice()).unwrap();
        assert_eq!(back, s.a_split);
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = tiny();
        s.coords = Some(vec![[0.0, 0.5], [1.0, 0.5]]);
        let files = s.write_dir(dir.path()).unwrap();
        assert!(files.c_split.is_none());
        let back = files.load().unwrap();
        assert_eq!(back.a.to_dense(), s.a.to_dense());
        assert_eq!(back.b.to_dense(), s.b.to_dense());
        assert_eq!(back.a_split, s.a_split);
        assert_eq!(back.coords, s.coords);
    }
}
