//! Overlapping algebraic partition of the primal space and the induced
//! objects on the constraint (dual) space.
//!
//! For every subdomain `i`:
//!
//! * `R_i` selects the overlapping primal dofs, `D_i` are the multiplicity
//!   weights with `sum_i R_i^T D_i R_i = I_n`;
//! * `R̃_i` selects the constraint rows touched by `B R_i^T`, `D̃_i` are their
//!   multiplicity weights with `sum_i R̃_i^T D̃_i R̃_i = I_m`;
//! * `B̃_i = R̃_i B R_i^T` and `C̃_i` is a local PSD piece of `C` with
//!   `sum_i R̃_i^T C̃_i R̃_i = C`.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::error::{DdError, Result};
use crate::linalg::chol::{bfs_levels, pseudo_peripheral};
use crate::linalg::{triple_product, DenseMat, Restriction, SparseMat};
use crate::problem::SaddleSystem;

#[derive(Debug, Clone)]
pub struct Subdomain {
    pub id: usize,
    /// Non-overlapping seed dofs.
    pub owned: Vec<usize>,
    /// `R_i`: overlapping primal dofs.
    pub primal: Restriction,
    /// `D_i`, in local ordering.
    pub d: Vec<f64>,
    /// Local dofs with a graph neighbour outside the subdomain.
    pub interface: Vec<bool>,
    /// `R̃_i`: constraint rows touched by `B R_i^T`.
    pub dual: Restriction,
    /// `D̃_i`, in local dual ordering.
    pub dt: Vec<f64>,
    /// `B̃_i = R̃_i B R_i^T`.
    pub bt: SparseMat,
    /// `C̃_i`, dense `|dual| x |dual|`.
    pub ct: DenseMat,
    /// `A_i = R_i A R_i^T`.
    pub a_local: SparseMat,
    /// Sum of the elements of the `A` splitting lying inside the subdomain.
    pub a_neu: SparseMat,
}

impl Subdomain {
    pub fn n_primal(&self) -> usize {
        self.primal.len()
    }

    pub fn n_dual(&self) -> usize {
        self.dual.len()
    }
}

/// Per-subdomain set sizes for reports.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionStats {
    pub n_subdomains: usize,
    pub primal_sizes: Vec<usize>,
    pub dual_sizes: Vec<usize>,
    pub k0: usize,
}

#[derive(Debug, Clone)]
pub struct Decomposition {
    pub n: usize,
    pub m: usize,
    pub subdomains: Vec<Subdomain>,
    /// Seed owner of every primal dof.
    pub owner: Vec<usize>,
    /// For each constraint row, the subdomains whose dual set contains it.
    pub dual_members: Vec<Vec<usize>>,
    /// `j` such that the dual sets of `i` and `j` intersect (includes `i`).
    pub dual_neighbors: Vec<Vec<usize>>,
    /// `O(i) = { j : R̃_i D̃_i S_1 D̃_j R̃_j^T != 0 }`, predicted structurally.
    pub coupling: Vec<Vec<usize>>,
    pub k0: usize,
}

impl Decomposition {
    /// Every construction step in order: partition, weights, dual objects,
    /// `C̃_i` and neighbour sets.
    pub fn build(sys: &SaddleSystem, n_parts: usize, overlap: usize) -> Result<Self> {
        let mut dec = build_partition(sys, n_parts, overlap)?;
        build_pou(&mut dec)?;
        build_dual_objects(sys, &mut dec)?;
        build_ct(sys, &mut dec)?;
        compute_k0_and_neighbors(&mut dec);
        Ok(dec)
    }

    pub fn len(&self) -> usize {
        self.subdomains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subdomains.is_empty()
    }

    pub fn stats(&self) -> DecompositionStats {
        DecompositionStats {
            n_subdomains: self.len(),
            primal_sizes: self.subdomains.iter().map(|s| s.n_primal()).collect(),
            dual_sizes: self.subdomains.iter().map(|s| s.n_dual()).collect(),
            k0: self.k0,
        }
    }

    /// `max |sum_i R_i^T D_i R_i - I|`.
    pub fn primal_pou_error(&self) -> f64 {
        let mut acc = vec![0.0; self.n];
        for s in &self.subdomains {
            s.primal.extend_add(&s.d, &mut acc);
        }
        acc.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `max |sum_i R̃_i^T D̃_i R̃_i - I|`.
    pub fn dual_pou_error(&self) -> f64 {
        let mut acc = vec![0.0; self.m];
        for s in &self.subdomains {
            s.dual.extend_add(&s.dt, &mut acc);
        }
        acc.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Number of entries of `B R_i^T` lost by `R̃_i^T R̃_i`, summed over
    /// subdomains. Zero when the dual supports are correct.
    pub fn support_mismatch(&self, b: &SparseMat) -> usize {
        let bt = b.transpose();
        let mut lost = 0;
        for s in &self.subdomains {
            let mut in_dual = vec![false; self.m];
            for &r in s.dual.indices() {
                in_dual[r] = true;
            }
            for &j in s.primal.indices() {
                lost += bt.row(j).0.iter().filter(|&&r| !in_dual[r]).count();
            }
        }
        lost
    }

    /// `sum_i R̃_i^T C̃_i R̃_i` as a sparse matrix.
    pub fn reassemble_c(&self) -> Result<SparseMat> {
        let mut trip = Vec::new();
        for s in &self.subdomains {
            let idx = s.dual.indices();
            for j in 0..idx.len() {
                for i in 0..idx.len() {
                    let v = s.ct[(i, j)];
                    if v != 0.0 {
                        trip.push((idx[i], idx[j], v));
                    }
                }
            }
        }
        SparseMat::from_triplets(self.m, self.m, &trip)
    }
}

/// Non-overlapping seeds grown by `overlap` layers of the graph of `A`.
///
/// Seeds come from coordinate multisection when the system carries
/// coordinates, otherwise from greedy graph growing. Subdomains are numbered
/// by their smallest dof.
pub fn build_partition(sys: &SaddleSystem, n_parts: usize, overlap: usize) -> Result<Decomposition> {
    let n = sys.n();
    if n_parts == 0 {
        return Err(DdError::Partition("need at least one subdomain".into()));
    }
    if n_parts > n {
        return Err(DdError::Partition(format!("{n_parts} subdomains for {n} dofs")));
    }
    let adj = sys.a.adjacency();
    let mut seeds = match &sys.coords {
        Some(coords) => coordinate_multisection(coords, n_parts),
        None => graph_growing(&adj, n_parts)?,
    };
    for s in &mut seeds {
        s.sort_unstable();
    }
    seeds.sort_by_key(|s| s[0]);

    let mut owner = vec![usize::MAX; n];
    for (p, s) in seeds.iter().enumerate() {
        for &d in s {
            owner[d] = p;
        }
    }

    let mut subdomains = Vec::with_capacity(n_parts);
    for (id, owned) in seeds.into_iter().enumerate() {
        let mut inside = vec![false; n];
        for &d in &owned {
            inside[d] = true;
        }
        let mut frontier = owned.clone();
        for _ in 0..overlap {
            let mut next = Vec::new();
            for &v in &frontier {
                for &w in &adj[v] {
                    if !inside[w] {
                        inside[w] = true;
                        next.push(w);
                    }
                }
            }
            frontier = next;
        }
        let dofs: Vec<usize> = (0..n).filter(|&d| inside[d]).collect();
        let interface = dofs.iter().map(|&d| adj[d].iter().any(|&w| !inside[w])).collect();
        let primal = Restriction::new(n, dofs)?;
        let a_local = triple_product(&primal, &sys.a)?;
        let mut local_of = vec![usize::MAX; n];
        for (k, &g) in primal.indices().iter().enumerate() {
            local_of[g] = k;
        }
        let a_neu = SparseMat::from_dense(&sys.a_split.assemble_local(&local_of, primal.len()));
        subdomains.push(Subdomain {
            id,
            owned,
            primal,
            d: Vec::new(),
            interface,
            dual: Restriction::new(sys.m(), Vec::new())?,
            dt: Vec::new(),
            bt: SparseMat::zeros(0, 0),
            ct: DenseMat::zeros(0, 0),
            a_local,
            a_neu,
        });
    }
    Ok(Decomposition {
        n,
        m: sys.m(),
        subdomains,
        owner,
        dual_members: Vec::new(),
        dual_neighbors: Vec::new(),
        coupling: Vec::new(),
        k0: 0,
    })
}

fn smallest_factor(n: usize) -> usize {
    (2..=n).find(|p| n.is_multiple_of(*p)).unwrap_or(n)
}

/// Recursive coordinate multisection: split along the longest extent into
/// `p` equal-count slabs, `p` the smallest prime factor of the part count.
fn coordinate_multisection(coords: &[[f64; 2]], n_parts: usize) -> Vec<Vec<usize>> {
    fn rec(coords: &[[f64; 2]], mut idx: Vec<usize>, parts: usize, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            out.push(idx);
            return;
        }
        let p = smallest_factor(parts);
        let extent = |ax: usize| {
            let (lo, hi) = idx
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(coords[d][ax]), hi.max(coords[d][ax])));
            hi - lo
        };
        let axis = if extent(0) >= extent(1) { 0 } else { 1 };
        idx.sort_by(|&a, &b| coords[a][axis].total_cmp(&coords[b][axis]).then(a.cmp(&b)));
        let len = idx.len();
        let mut start = 0;
        for k in 0..p {
            let end = (k + 1) * len / p;
            rec(coords, idx[start..end].to_vec(), parts / p, out);
            start = end;
        }
    }
    let mut out = Vec::with_capacity(n_parts);
    rec(coords, (0..coords.len()).collect(), n_parts, &mut out);
    out
}

/// Greedy graph growing, component by component.
fn graph_growing(adj: &[Vec<usize>], n_parts: usize) -> Result<Vec<Vec<usize>>> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let (dist, _) = bfs_levels(adj, s);
        let members: Vec<usize> = (0..n).filter(|&v| dist[v] != usize::MAX).collect();
        for &v in &members {
            comp[v] = comps.len();
        }
        comps.push(members);
    }
    if comps.len() > n_parts {
        return Err(DdError::Partition(format!(
            "graph has {} components but only {n_parts} subdomains requested",
            comps.len()
        )));
    }
    // one part per component, the rest by largest remainder on size
    let mut alloc = vec![1usize; comps.len()];
    let extra = n_parts - comps.len();
    if extra > 0 {
        let mut share: Vec<(f64, usize)> = comps
            .iter()
            .enumerate()
            .map(|(c, m)| (extra as f64 * m.len() as f64 / n as f64, c))
            .collect();
        let mut given = 0;
        for (s, c) in &share {
            let k = s.floor() as usize;
            alloc[*c] += k;
            given += k;
        }
        share.sort_by(|a, b| (b.0 - b.0.floor()).total_cmp(&(a.0 - a.0.floor())).then(a.1.cmp(&b.1)));
        for (_, c) in share.iter().cycle().take(extra - given) {
            alloc[*c] += 1;
        }
    }
    for (c, m) in comps.iter().enumerate() {
        if alloc[c] > m.len() {
            return Err(DdError::Partition("component smaller than its part count".into()));
        }
    }

    let mut assigned = vec![false; n];
    let mut parts = Vec::with_capacity(n_parts);
    for (c, members) in comps.iter().enumerate() {
        let k = alloc[c];
        let mut remaining = members.len();
        for p in 0..k {
            let target = if p + 1 == k { remaining } else { remaining / (k - p) };
            let mut part = Vec::with_capacity(target);
            while part.len() < target {
                let start = restricted_peripheral(adj, members, &assigned);
                let mut queue = VecDeque::from([start]);
                assigned[start] = true;
                while let Some(v) = queue.pop_front() {
                    part.push(v);
                    if part.len() == target {
                        for w in queue.drain(..) {
                            assigned[w] = false;
                        }
                        break;
                    }
                    for &w in &adj[v] {
                        if !assigned[w] {
                            assigned[w] = true;
                            queue.push_back(w);
                        }
                    }
                }
            }
            remaining -= part.len();
            parts.push(part);
        }
    }
    Ok(parts)
}

/// Pseudo-peripheral vertex of the unassigned part of a component.
fn restricted_peripheral(adj: &[Vec<usize>], members: &[usize], assigned: &[bool]) -> usize {
    let first = *members.iter().find(|&&v| !assigned[v]).expect("unassigned vertex left");
    let sub: Vec<Vec<usize>> = adj
        .iter()
        .enumerate()
        .map(|(v, nb)| {
            if assigned[v] {
                Vec::new()
            } else {
                nb.iter().copied().filter(|&w| !assigned[w]).collect()
            }
        })
        .collect();
    pseudo_peripheral(&sub, first)
}

/// Multiplicity weights on the primal sets.
pub fn build_pou(dec: &mut Decomposition) -> Result<()> {
    let mult = multiplicity(dec.n, dec.subdomains.iter().map(|s| s.primal.indices()));
    if let Some(d) = mult.iter().position(|&c| c == 0) {
        return Err(DdError::Partition(format!("primal dof {d} lies in no subdomain")));
    }
    for s in &mut dec.subdomains {
        s.d = s.primal.indices().iter().map(|&g| 1.0 / mult[g] as f64).collect();
    }
    if !dec.dual_members.is_empty() {
        build_dual_pou(dec)?;
    }
    Ok(())
}

fn build_dual_pou(dec: &mut Decomposition) -> Result<()> {
    let mult = multiplicity(dec.m, dec.subdomains.iter().map(|s| s.dual.indices()));
    if let Some(r) = mult.iter().position(|&c| c == 0) {
        return Err(DdError::Partition(format!("constraint {r} touches no subdomain")));
    }
    for s in &mut dec.subdomains {
        s.dt = s.dual.indices().iter().map(|&g| 1.0 / mult[g] as f64).collect();
    }
    Ok(())
}

fn multiplicity<'a>(len: usize, sets: impl Iterator<Item = &'a [usize]>) -> Vec<usize> {
    let mut mult = vec![0usize; len];
    for s in sets {
        for &g in s {
            mult[g] += 1;
        }
    }
    mult
}

/// Dual supports `R̃_i`, local blocks `B̃_i` and weights `D̃_i`.
pub fn build_dual_objects(sys: &SaddleSystem, dec: &mut Decomposition) -> Result<()> {
    let bt = sys.b.transpose();
    let m = sys.m();
    let mut members = vec![Vec::new(); m];
    for s in &mut dec.subdomains {
        let mut rows = BTreeSet::new();
        for &j in s.primal.indices() {
            rows.extend(bt.row(j).0.iter().copied());
        }
        let rows: Vec<usize> = rows.into_iter().collect();
        for &r in &rows {
            members[r].push(s.id);
        }
        s.bt = sys.b.submatrix(&rows, s.primal.indices());
        s.dual = Restriction::new(m, rows)?;
    }
    dec.dual_members = members;
    build_dual_pou(dec)?;
    let lost = dec.support_mismatch(&sys.b);
    if lost != 0 {
        return Err(DdError::Partition(format!("dual supports miss {lost} entries of B R_i^T")));
    }
    Ok(())
}

/// Local PSD pieces `C̃_i` of `C`.
///
/// Diagonal `C` is distributed with the dual weights,
/// `C̃_i = R̃_i C R̃_i^T D̃_i`. Otherwise each element of the `C` splitting
/// goes to the lowest-numbered subdomain whose dual set contains it.
pub fn build_ct(sys: &SaddleSystem, dec: &mut Decomposition) -> Result<()> {
    if sys.c.is_diagonal() {
        let diag = sys.c.diagonal();
        for s in &mut dec.subdomains {
            let vals: Vec<f64> = s.dual.indices().iter().zip(&s.dt).map(|(&g, w)| diag[g] * w).collect();
            s.ct = DenseMat::from_diag(&vals);
        }
        return Ok(());
    }
    let Some(split) = &sys.c_split else {
        return Err(DdError::AssumptionViolation {
            assumption: "C as a sum of local PSD matrices",
            detail: "C is neither diagonal nor given with a PSD splitting".into(),
        });
    };
    let mut local_of: Vec<Vec<usize>> = Vec::with_capacity(dec.len());
    for s in &mut dec.subdomains {
        let mut map = vec![usize::MAX; dec.m];
        for (k, &g) in s.dual.indices().iter().enumerate() {
            map[g] = k;
        }
        local_of.push(map);
        s.ct = DenseMat::zeros(s.n_dual(), s.n_dual());
    }
    for (k, e) in split.elements.iter().enumerate() {
        let host = dec.dual_members[e.dofs[0]]
            .iter()
            .copied()
            .find(|&i| e.dofs.iter().all(|&g| local_of[i][g] != usize::MAX))
            .ok_or_else(|| DdError::AssumptionViolation {
                assumption: "C as a sum of local PSD matrices",
                detail: format!("element {k} of the C splitting fits in no dual support"),
            })?;
        let s = &mut dec.subdomains[host];
        for (a, &gi) in e.dofs.iter().enumerate() {
            for (b, &gj) in e.dofs.iter().enumerate() {
                s.ct[(local_of[host][gi], local_of[host][gj])] += e.mat[(a, b)];
            }
        }
    }
    Ok(())
}

/// Dual neighbour sets and the coupling sets `O(i)`.
///
/// `S_1` couples two constraint rows exactly when some dual set contains
/// both, so `j ∈ O(i)` iff a subdomain `k` has a dual set meeting both the
/// dual set of `i` and that of `j`.
pub fn compute_k0_and_neighbors(dec: &mut Decomposition) {
    let nsub = dec.len();
    let mut nb: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nsub];
    for members in &dec.dual_members {
        for &i in members {
            nb[i].extend(members.iter().copied());
        }
    }
    for (i, set) in nb.iter_mut().enumerate() {
        set.insert(i);
    }
    let coupling: Vec<Vec<usize>> = (0..nsub)
        .map(|i| {
            let mut o = BTreeSet::new();
            for &k in &nb[i] {
                o.extend(nb[k].iter().copied());
            }
            o.into_iter().collect()
        })
        .collect();
    dec.dual_neighbors = nb.into_iter().map(|s| s.into_iter().collect()).collect();
    dec.k0 = coupling.iter().map(|o| o.len()).max().unwrap_or(0);
    dec.coupling = coupling;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMat;
    use crate::problem::{generate, CMode, ProblemKind, ProblemSpec, PsdSplit};

    fn path_system(n: usize) -> SaddleSystem {
        let mut split = PsdSplit::new();
        for i in 0..n - 1 {
            split.push(vec![i, i + 1], DenseMat::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]));
        }
        split.push(vec![0], DenseMat::from_rows(&[&[1.0]]));
        let a = split.assemble(n).unwrap();
        let b = SparseMat::from_triplets(1, n, &[(0, 0, 1.0)]).unwrap();
        SaddleSystem::new(a, b, SparseMat::zeros(1, 1), split, None, None).unwrap()
    }

    #[test]
    fn single_subdomain_is_identity() {
        let s = generate(&ProblemSpec::new(ProblemKind::Poisson2dConstrained, 5, 4)).unwrap();
        let dec = Decomposition::build(&s, 1, 2).unwrap();
        let sd = &dec.subdomains[0];
        assert_eq!(sd.primal, Restriction::identity(s.n()));
        assert!(sd.d.iter().all(|&w| w == 1.0));
        assert_eq!(sd.dual, Restriction::identity(s.m()));
        assert_eq!(dec.k0, 1);
    }

    #[test]
    fn path_graph_two_parts_overlap_one() {
        let s = path_system(8);
        let dec = build_partition(&s, 2, 1).unwrap();
        assert_eq!(dec.subdomains[0].primal.indices(), &[0, 1, 2, 3, 4]);
        assert_eq!(dec.subdomains[1].primal.indices(), &[3, 4, 5, 6, 7]);
    }

    #[test]
    fn pou_weights() {
        let s = path_system(8);
        let mut dec = build_partition(&s, 2, 0).unwrap();
        build_pou(&mut dec).unwrap();
        assert!(dec.subdomains.iter().all(|sd| sd.d.iter().all(|&w| w == 1.0)));
        let mut dec = build_partition(&s, 2, 1).unwrap();
        build_pou(&mut dec).unwrap();
        assert_eq!(dec.subdomains[0].d, vec![1.0, 1.0, 1.0, 0.5, 0.5]);
        assert_eq!(dec.primal_pou_error(), 0.0);
    }

    #[test]
    fn too_many_parts() {
        let s = path_system(4);
        assert!(matches!(build_partition(&s, 5, 1), Err(DdError::Partition(_))));
        assert!(matches!(build_partition(&s, 0, 1), Err(DdError::Partition(_))));
    }

    #[test]
    fn disconnected_graph_split_per_component() {
        let mut split = PsdSplit::new();
        for (i, j) in [(0, 1), (1, 2), (3, 4), (4, 5)] {
            split.push(vec![i, j], DenseMat::from_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]));
        }
        for i in 0..6 {
            split.push(vec![i], DenseMat::from_rows(&[&[0.1]]));
        }
        let a = split.assemble(6).unwrap();
        let b = SparseMat::from_triplets(1, 6, &[(0, 0, 1.0)]).unwrap();
        let s = SaddleSystem::new(a, b, SparseMat::zeros(1, 1), split, None, None).unwrap();
        let dec = build_partition(&s, 2, 1).unwrap();
        assert_eq!(dec.subdomains[0].owned, vec![0, 1, 2]);
        assert_eq!(dec.subdomains[1].owned, vec![3, 4, 5]);
        assert!(build_partition(&s, 3, 0).is_ok());
        let one = build_partition(&s, 1, 0);
        assert!(matches!(one, Err(DdError::Partition(_))));
    }

    #[test]
    fn grid_pou_and_dual_objects() {
        let s = generate(&ProblemSpec::new(ProblemKind::Poisson2dConstrained, 16, 16).with_seed(1)).unwrap();
        let dec = Decomposition::build(&s, 4, 2).unwrap();
        assert!(dec.primal_pou_error() <= 1e-15);
        assert!(dec.dual_pou_error() <= 1e-15);
        assert_eq!(dec.support_mismatch(&s.b), 0);
        assert_eq!(dec.k0, 4);
    }

    #[test]
    fn ct_cases() {
        let spec = ProblemSpec::new(ProblemKind::MixedDarcyMac, 8, 8);
        let s = generate(&spec).unwrap();
        let dec = Decomposition::build(&s, 4, 1).unwrap();
        assert!(dec.subdomains.iter().all(|sd| sd.ct.max_abs() == 0.0));

        let s = generate(&spec.clone().with_c(CMode::DiagEps(2.0))).unwrap();
        let dec = Decomposition::build(&s, 4, 1).unwrap();
        for sd in &dec.subdomains {
            for (k, &w) in sd.dt.iter().enumerate() {
                assert_eq!(sd.ct[(k, k)], 2.0 * w);
            }
        }
        assert!(dec.subdomains.iter().any(|sd| sd.dt.contains(&0.5)));
        let gap = dec.reassemble_c().unwrap().add_scaled(-1.0, &s.c).unwrap().max_abs();
        assert!(gap <= 1e-12 * 2.0);

        let s = generate(&spec.clone().with_c(CMode::Split(1e-2))).unwrap();
        let dec = Decomposition::build(&s, 4, 1).unwrap();
        let gap = dec.reassemble_c().unwrap().add_scaled(-1.0, &s.c).unwrap().max_abs();
        assert!(gap <= 1e-12 * s.c.max_abs());

        let mut s = s;
        s.c_split = None;
        assert!(matches!(
            Decomposition::build(&s, 4, 1),
            Err(DdError::AssumptionViolation { .. })
        ));
    }

    #[test]
    fn chain_coupling_reaches_two_neighbours() {
        // strips along x: every strip shares dual rows with its two neighbours
        let s = generate(&ProblemSpec::new(ProblemKind::MixedDarcyMac, 40, 4)).unwrap();
        let dec = Decomposition::build(&s, 5, 1).unwrap();
        assert_eq!(dec.dual_neighbors[2], vec![1, 2, 3]);
        assert_eq!(dec.coupling[2], vec![0, 1, 2, 3, 4]);
        assert_eq!(dec.k0, 5);
    }
}
