//! Deterministic desk-scale saddle point problems with element-level PSD
//! splittings.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DdError, Result};
use crate::linalg::{DenseMat, SparseMat};
use crate::problem::{PsdSplit, SaddleSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Node-based 5-point Laplacian with sparse selection/difference constraints.
    Poisson2dConstrained,
    /// Staggered (MAC) velocity operator with the discrete divergence as `B`.
    MixedDarcyMac,
    /// Random element-wise PSD operator with sparse constraints, no coordinates.
    RandomSpdConstrained,
}

/// How the `C` block is generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CMode {
    Zero,
    /// `C = eps * I`.
    DiagEps(f64),
    /// `C = eps * (I + L_B)` where `L_B` couples constraints sharing a primal
    /// dof; delivered with its PSD splitting.
    Split(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub nx: usize,
    pub ny: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_c_mode")]
    pub c_mode: CMode,
    /// Constraints per primal dof for the constrained kinds.
    #[serde(default = "default_constraint_fraction")]
    pub constraint_fraction: f64,
}

fn default_c_mode() -> CMode {
    CMode::Zero
}

fn default_constraint_fraction() -> f64 {
    0.125
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, nx: usize, ny: usize) -> Self {
        Self {
            kind,
            nx,
            ny,
            seed: 0,
            c_mode: CMode::Zero,
            constraint_fraction: default_constraint_fraction(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_c(mut self, c_mode: CMode) -> Self {
        self.c_mode = c_mode;
        self
    }
}

pub fn generate(spec: &ProblemSpec) -> Result<SaddleSystem> {
    if spec.nx == 0 || spec.ny == 0 {
        return Err(DdError::Problem("grid dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (a_split, b, coords) = match spec.kind {
        ProblemKind::Poisson2dConstrained => {
            let (split, coords) = poisson_split(spec.nx, spec.ny);
            let adj = grid_adjacency(spec.nx, spec.ny);
            let b = pivot_constraints(&adj, spec.constraint_fraction, &mut rng)?;
            (split, b, Some(coords))
        }
        ProblemKind::MixedDarcyMac => {
            let (split, b, coords) = mac(spec.nx, spec.ny);
            (split, b, Some(coords))
        }
        ProblemKind::RandomSpdConstrained => {
            let split = random_element_split(spec.nx, spec.ny, &mut rng);
            let adj = grid_adjacency(spec.nx, spec.ny);
            let b = pivot_constraints(&adj, spec.constraint_fraction, &mut rng)?;
            (split, b, None)
        }
    };
    let n = b.ncols();
    let m = b.nrows();
    if m >= n {
        return Err(DdError::Problem(format!("inconsistent spec: m = {m} >= n = {n}")));
    }
    let a = a_split.assemble(n)?;
    let (c, c_split) = build_c(&b, spec.c_mode)?;
    SaddleSystem::new(a, b, c, a_split, c_split, coords)
}

fn build_c(b: &SparseMat, mode: CMode) -> Result<(SparseMat, Option<PsdSplit>)> {
    let m = b.nrows();
    match mode {
        CMode::Zero => Ok((SparseMat::zeros(m, m), None)),
        CMode::DiagEps(eps) => {
            if eps < 0.0 {
                return Err(DdError::Problem("C must be nonnegative".into()));
            }
            Ok((SparseMat::diag(&vec![eps; m]), None))
        }
        CMode::Split(eps) => {
            if eps < 0.0 {
                return Err(DdError::Problem("C must be nonnegative".into()));
            }
            let mut split = PsdSplit::new();
            for r in 0..m {
                split.push(vec![r], DenseMat::from_rows(&[&[eps]]));
            }
            // consecutive constraint rows sharing a primal dof
            let bt = b.transpose();
            for j in 0..bt.nrows() {
                let rows = bt.row(j).0;
                for w in rows.windows(2) {
                    split.push(vec![w[0], w[1]], DenseMat::from_rows(&[&[eps, -eps], &[-eps, eps]]));
                }
            }
            Ok((split.assemble(m)?, Some(split)))
        }
    }
}

fn edge(eps: f64) -> DenseMat {
    DenseMat::from_rows(&[&[eps, -eps], &[-eps, eps]])
}

fn scalar(v: f64) -> DenseMat {
    DenseMat::from_rows(&[&[v]])
}

/// Interior nodes of an `(nx+2) x (ny+2)` grid with homogeneous Dirichlet
/// boundary; one 2x2 element per interior edge, one 1x1 element per edge to
/// the boundary.
fn poisson_split(nx: usize, ny: usize) -> (PsdSplit, Vec<[f64; 2]>) {
    let id = |i: usize, j: usize| j * nx + i;
    let h = 1.0 / (nx.max(ny) + 1) as f64;
    let mut split = PsdSplit::new();
    let mut coords = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            coords.push([(i + 1) as f64 * h, (j + 1) as f64 * h]);
            if i + 1 < nx {
                split.push(vec![id(i, j), id(i + 1, j)], edge(1.0));
            }
            if j + 1 < ny {
                split.push(vec![id(i, j), id(i, j + 1)], edge(1.0));
            }
            let boundary_edges = [i == 0, i + 1 == nx, j == 0, j + 1 == ny].iter().filter(|&&b| b).count();
            if boundary_edges > 0 {
                split.push(vec![id(i, j)], scalar(boundary_edges as f64));
            }
        }
    }
    (split, coords)
}

fn grid_adjacency(nx: usize, ny: usize) -> Vec<Vec<usize>> {
    let id = |i: usize, j: usize| j * nx + i;
    let mut adj = vec![Vec::new(); nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            if i > 0 {
                adj[id(i, j)].push(id(i - 1, j));
            }
            if i + 1 < nx {
                adj[id(i, j)].push(id(i + 1, j));
            }
            if j > 0 {
                adj[id(i, j)].push(id(i, j - 1));
            }
            if j + 1 < ny {
                adj[id(i, j)].push(id(i, j + 1));
            }
        }
    }
    adj
}

/// Each constraint owns a distinct pivot dof (coefficient 1) and may subtract
/// a neighbouring non-pivot dof. The pivot columns form an identity block, so
/// `B` has full row rank.
fn pivot_constraints(adj: &[Vec<usize>], fraction: f64, rng: &mut ChaCha8Rng) -> Result<SparseMat> {
    let n = adj.len();
    let m = ((fraction * n as f64).round() as usize).max(1);
    if m >= n {
        return Err(DdError::Problem(format!("constraint fraction {fraction} gives m >= n")));
    }
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(rng);
    let mut pivots: Vec<usize> = nodes[..m].to_vec();
    pivots.sort_unstable();
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let mut trip = Vec::new();
    for (r, &p) in pivots.iter().enumerate() {
        trip.push((r, p, 1.0));
        if rng.gen_bool(0.5) {
            let free: Vec<usize> = adj[p].iter().copied().filter(|&q| !is_pivot[q]).collect();
            if let Some(&q) = free.choose(rng) {
                trip.push((r, q, -1.0));
            }
        }
    }
    SparseMat::from_triplets(m, n, &trip)
}

/// MAC grid on the unit square with `nx x ny` cells.
///
/// Normal velocities vanish on the left, bottom and top walls; the right
/// boundary is an outflow whose normal velocities are unknowns, which makes
/// the discrete divergence full rank. `A = L + h^2 I` per velocity component.
fn mac(nx: usize, ny: usize) -> (PsdSplit, SparseMat, Vec<[f64; 2]>) {
    let h = 1.0 / nx.max(ny) as f64;
    // u(i, j): i in 1..=nx, j in 0..ny
    let uid = |i: usize, j: usize| j * nx + (i - 1);
    let nu = nx * ny;
    // v(i, j): i in 0..nx, j in 1..ny
    let vid = |i: usize, j: usize| nu + (j - 1) * nx + i;
    let nv = nx * (ny - 1);
    let n = nu + nv;
    let mass = h * h;

    let mut split = PsdSplit::new();
    let mut coords = vec![[0.0; 2]; n];
    for j in 0..ny {
        for i in 1..=nx {
            let d = uid(i, j);
            coords[d] = [i as f64 * h, (j as f64 + 0.5) * h];
            let mut diag = mass;
            if i < nx {
                split.push(vec![d, uid(i + 1, j)], edge(1.0));
            }
            if i == 1 {
                diag += 1.0;
            }
            if j + 1 < ny {
                split.push(vec![d, uid(i, j + 1)], edge(1.0));
            }
            if j == 0 {
                diag += 1.0;
            }
            if j + 1 == ny {
                diag += 1.0;
            }
            split.push(vec![d], scalar(diag));
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let d = vid(i, j);
            coords[d] = [(i as f64 + 0.5) * h, j as f64 * h];
            let mut diag = mass;
            if i + 1 < nx {
                split.push(vec![d, vid(i + 1, j)], edge(1.0));
            }
            if i == 0 {
                diag += 1.0;
            }
            if j + 1 < ny {
                split.push(vec![d, vid(i, j + 1)], edge(1.0));
            }
            if j == 1 {
                diag += 1.0;
            }
            if j + 1 == ny {
                diag += 1.0;
            }
            split.push(vec![d], scalar(diag));
        }
    }

    let mut trip = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let cell = j * nx + i;
            trip.push((cell, uid(i + 1, j), 1.0));
            if i > 0 {
                trip.push((cell, uid(i, j), -1.0));
            }
            if j + 1 < ny {
                trip.push((cell, vid(i, j + 1), 1.0));
            }
            if j > 0 {
                trip.push((cell, vid(i, j), -1.0));
            }
        }
    }
    let b = SparseMat::from_triplets(nx * ny, n, &trip).expect("MAC indices in range");
    (split, b, coords)
}

/// Two triangles per grid cell, each carrying a random rank-2 element with
/// constant kernel (a perturbed P1 stiffness), plus a small mass term.
fn random_element_split(nx: usize, ny: usize, rng: &mut ChaCha8Rng) -> PsdSplit {
    let id = |i: usize, j: usize| j * nx + i;
    let h = 1.0 / nx.max(ny) as f64;
    let mut split = PsdSplit::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            for tri in [[id(i, j), id(i + 1, j), id(i, j + 1)], [id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]] {
                let mut g = DenseMat::zeros(2, 3);
                for r in 0..2 {
                    let row: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let mean = row.iter().sum::<f64>() / 3.0;
                    for (c, v) in row.iter().enumerate() {
                        g[(r, c)] = v - mean;
                    }
                }
                let weight = rng.gen_range(0.5..2.0);
                let mut e = g.t_matmul(&g).expect("2x3").scale(weight);
                e.symmetrize();
                split.push(tri.to_vec(), e);
            }
        }
    }
    for d in 0..nx * ny {
        split.push(vec![d], scalar(h * h));
    }
    split
}
