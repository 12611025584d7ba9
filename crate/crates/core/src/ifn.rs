//! Decomposable information filtering networks: MST and TMFG clique trees.
//!
//! Ties are always broken towards the lexicographically smallest sorted
//! vertex tuple, so both builders are bit-for-bit deterministic.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, PIVOT_TOLERANCE};

/// A separator of the clique tree together with its degree `k(S)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Separator {
    pub vertices: Vec<usize>,
    pub k: usize,
}

#[derive(Deserialize)]
struct RawCliqueTree {
    p: usize,
    cliques: Vec<Vec<usize>>,
    #[serde(default)]
    separators: Vec<Separator>,
}

/// Decomposable graph held as cliques and weighted separators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCliqueTree")]
pub struct CliqueTree {
    p: usize,
    cliques: Vec<Vec<usize>>,
    separators: Vec<Separator>,
    #[serde(skip)]
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawCliqueTree> for CliqueTree {
    type Error = Error;

    fn try_from(raw: RawCliqueTree) -> Result<Self> {
        CliqueTree::new(raw.p, raw.cliques, raw.separators)
    }
}

impl CliqueTree {
    /// Validates and canonicalises (sorts) a clique tree description.
    pub fn new(p: usize, mut cliques: Vec<Vec<usize>>, mut separators: Vec<Separator>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidInput("clique tree needs at least one vertex".into()));
        }
        let mut covered = vec![false; p];
        let mut member_of: Vec<Vec<usize>> = vec![Vec::new(); p];
        for (ci, c) in cliques.iter_mut().enumerate() {
            c.sort_unstable();
            if c.is_empty() || c.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("clique {ci} is empty or repeats a vertex")));
            }
            for &v in c.iter() {
                if v >= p {
                    return Err(Error::InvalidInput(format!("vertex {v} out of range (p = {p})")));
                }
                covered[v] = true;
                member_of[v].push(ci);
            }
        }
        if let Some(v) = covered.iter().position(|&c| !c) {
            return Err(Error::InvalidInput(format!("vertex {v} is not covered by any clique")));
        }
        for (si, s) in separators.iter_mut().enumerate() {
            s.vertices.sort_unstable();
            if s.vertices.is_empty() || s.vertices.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidInput(format!("separator {si} is empty or repeats a vertex")));
            }
            if s.k < 2 {
                return Err(Error::InvalidInput(format!("separator {si} has degree {} < 2", s.k)));
            }
            if s.vertices.iter().any(|&v| v >= p) {
                return Err(Error::InvalidInput(format!("separator {si} has a vertex out of range")));
            }
            let containing = member_of[s.vertices[0]]
                .iter()
                .filter(|&&ci| is_subset(&s.vertices, &cliques[ci]))
                .count();
            if containing < 2 {
                return Err(Error::InvalidInput(format!(
                    "separator {si} is contained in {containing} clique(s), need at least 2"
                )));
            }
        }
        let mut edges = BTreeSet::new();
        for c in &cliques {
            for (a, &i) in c.iter().enumerate() {
                for &j in &c[a + 1..] {
                    edges.insert((i, j));
                }
            }
        }
        Ok(Self {
            p,
            cliques,
            separators,
            edges: edges.into_iter().collect(),
        })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    pub fn separators(&self) -> &[Separator] {
        &self.separators
    }

    /// Covered vertex pairs `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search(&key).is_ok()
    }

    pub fn max_clique_size(&self) -> usize {
        self.cliques.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("clique tree serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One `"i j"` line per edge, 0-based.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edges.len() * 8);
        for (i, j) in &self.edges {
            out.push_str(&format!("{i} {j}\n"));
        }
        out
    }
}

fn is_subset(small: &[usize], big: &[usize]) -> bool {
    small.iter().all(|v| big.binary_search(v).is_ok())
}

fn check_correlation(corr: &SymMatrix, min_p: usize) -> Result<()> {
    if corr.dim() < min_p {
        return Err(Error::InvalidInput(format!(
            "need at least {min_p} variables, got {}",
            corr.dim()
        )));
    }
    if !corr.is_finite() {
        return Err(Error::InvalidInput("correlation matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Maximum spanning tree (Kruskal) over arbitrary symmetric edge weights.
pub fn mst_from_weights(weights: &SymMatrix) -> Result<CliqueTree> {
    check_correlation(weights, 2)?;
    let p = weights.dim();
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(p * (p - 1) / 2);
    for i in 0..p {
        for j in i + 1..p {
            pairs.push((i, j));
        }
    }
    pairs.sort_by(|&(a, b), &(c, d)| {
        weights
            .get(c, d)
            .total_cmp(&weights.get(a, b))
            .then((a, b).cmp(&(c, d)))
    });

    let mut parent: Vec<usize> = (0..p).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut tree = Vec::with_capacity(p - 1);
    for (i, j) in pairs {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            parent[ri] = rj;
            tree.push((i, j));
            if tree.len() == p - 1 {
                break;
            }
        }
    }
    tree.sort_unstable();

    let mut degree = vec![0usize; p];
    for &(i, j) in &tree {
        degree[i] += 1;
        degree[j] += 1;
    }
    let separators = degree
        .iter()
        .enumerate()
        .filter(|(_, &d)| d >= 2)
        .map(|(v, &d)| Separator {
            vertices: vec![v],
            k: d,
        })
        .collect();
    let cliques = tree.into_iter().map(|(i, j)| vec![i, j]).collect();
    CliqueTree::new(p, cliques, separators)
}

/// Maximum spanning tree over squared correlations `W_ij = R_ij²`.
pub fn build_mst(corr: &SymMatrix) -> Result<CliqueTree> {
    mst_from_weights(&squared(corr))
}

fn squared(corr: &SymMatrix) -> SymMatrix {
    let p = corr.dim();
    let mut w = SymMatrix::zeros(p);
    for i in 0..p {
        for j in 0..i {
            let r = corr.get(i, j);
            w.set(i, j, r * r);
        }
    }
    w
}

/// How TMFG insertion gains are scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainMode {
    /// `ln det R_S − ln det R_C`, the exact log-likelihood gain.
    #[default]
    LogDet,
    /// Second-order approximation: sum of squared correlations on new edges.
    SquaredCorrelation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TmfgOptions {
    pub gain: GainMode,
    /// Seed search is exhaustive up to this many variables.
    pub exhaustive_seed_limit: usize,
    /// Size of the high-strength candidate pool used above the limit.
    pub seed_candidates: usize,
}

impl Default for TmfgOptions {
    fn default() -> Self {
        Self {
            gain: GainMode::LogDet,
            exhaustive_seed_limit: 30,
            seed_candidates: 20,
        }
    }
}

/// `ln det` of a small correlation block, `-inf` when it is not positive definite.
fn block_logdet(corr: &SymMatrix, idx: &[usize]) -> f64 {
    crate::linalg::logdet(&corr.submatrix(idx)).unwrap_or(f64::NEG_INFINITY)
}

/// Picks the starting tetrahedron: smallest correlation determinant.
pub fn seed_clique_search(corr: &SymMatrix, opts: &TmfgOptions) -> Result<[usize; 4]> {
    check_correlation(corr, 4)?;
    let p = corr.dim();
    let candidates: Vec<usize> = if p <= opts.exhaustive_seed_limit {
        (0..p).collect()
    } else {
        let mut strength: Vec<(f64, usize)> = (0..p)
            .map(|i| {
                let s = (0..p)
                    .filter(|&j| j != i)
                    .map(|j| corr.get(i, j).powi(2))
                    .sum::<f64>();
                (s, i)
            })
            .collect();
        strength.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut top: Vec<usize> = strength
            .iter()
            .take(opts.seed_candidates.max(4))
            .map(|&(_, i)| i)
            .collect();
        top.sort_unstable();
        top
    };

    let score = |set: &[usize; 4]| -> f64 {
        match opts.gain {
            GainMode::LogDet => block_logdet(corr, set),
            GainMode::SquaredCorrelation => {
                let mut s = 0.0;
                for a in 0..4 {
                    for b in a + 1..4 {
                        s += corr.get(set[a], set[b]).powi(2);
                    }
                }
                -s
            }
        }
    };

    let n = candidates.len();
    let mut best: Option<(f64, [usize; 4])> = None;
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                for d in c + 1..n {
                    let set = [candidates[a], candidates[b], candidates[c], candidates[d]];
                    let s = score(&set);
                    if best.as_ref().is_none_or(|(bs, _)| s < *bs) {
                        best = Some((s, set));
                    }
                }
            }
        }
    }
    Ok(best.expect("at least one 4-subset").1)
}

struct Face {
    verts: [usize; 3],
    alive: bool,
    /// Cholesky factor of the 3×3 correlation block (row-major lower).
    chol: [[f64; 3]; 3],
    best: Option<(f64, usize)>,
}

fn factor3(corr: &SymMatrix, v: [usize; 3]) -> Result<[[f64; 3]; 3]> {
    let mut l = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut d = corr.get(v[j], v[j]);
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if !(d > PIVOT_TOLERANCE) {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        l[j][j] = d.sqrt();
        for i in j + 1..3 {
            let mut s = corr.get(v[i], v[j]);
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    Ok(l)
}

fn gain(corr: &SymMatrix, mode: GainMode, face: &Face, v: usize) -> Result<f64> {
    let f = face.verts;
    match mode {
        GainMode::SquaredCorrelation => Ok(f.iter().map(|&u| corr.get(u, v).powi(2)).sum()),
        GainMode::LogDet => {
            // Last pivot of the 4×4 Cholesky ordered (face, v):
            // ln det R_C = ln det R_S + ln(1 - |L⁻¹ r|²).
            let l = &face.chol;
            let mut y = [0.0; 3];
            for i in 0..3 {
                let mut s = corr.get(f[i], v);
                for k in 0..i {
                    s -= l[i][k] * y[k];
                }
                y[i] = s / l[i][i];
            }
            let d = corr.get(v, v) - (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
            if !(d > PIVOT_TOLERANCE) {
                return Err(Error::NotPositiveDefinite { pivot: 3 });
            }
            Ok(-d.ln())
        }
    }
}

fn best_vertex(corr: &SymMatrix, mode: GainMode, face: &Face, free: &[bool]) -> Result<Option<(f64, usize)>> {
    let mut best: Option<(f64, usize)> = None;
    for (v, _) in free.iter().enumerate().filter(|(_, &f)| f) {
        let g = gain(corr, mode, face, v)?;
        if best.is_none_or(|(bg, _)| g > bg) {
            best = Some((g, v));
        }
    }
    Ok(best)
}

fn sorted3(mut v: [usize; 3]) -> [usize; 3] {
    v.sort_unstable();
    v
}

/// Triangulated maximally filtered graph grown greedily from the seed tetrahedron.
pub fn build_tmfg(corr: &SymMatrix) -> Result<CliqueTree> {
    build_tmfg_with(corr, &TmfgOptions::default())
}

pub fn build_tmfg_with(corr: &SymMatrix, opts: &TmfgOptions) -> Result<CliqueTree> {
    let seed = seed_clique_search(corr, opts)?;
    let p = corr.dim();
    crate::linalg::cholesky(&corr.submatrix(&seed))?;

    let mut free = vec![true; p];
    for &v in &seed {
        free[v] = false;
    }
    let mut faces: Vec<Face> = Vec::with_capacity(2 * p);
    let new_face = |verts: [usize; 3], free: &[bool]| -> Result<Face> {
        let verts = sorted3(verts);
        let mut face = Face {
            verts,
            alive: true,
            chol: match opts.gain {
                GainMode::LogDet => factor3(corr, verts)?,
                GainMode::SquaredCorrelation => [[0.0; 3]; 3],
            },
            best: None,
        };
        face.best = best_vertex(corr, opts.gain, &face, free)?;
        Ok(face)
    };
    let [a, b, c, d] = seed;
    for tri in [[a, b, c], [a, b, d], [a, c, d], [b, c, d]] {
        faces.push(new_face(tri, &free)?);
    }

    let mut cliques = vec![seed.to_vec()];
    let mut separators = Vec::with_capacity(p.saturating_sub(4));
    for _ in 4..p {
        let mut pick: Option<usize> = None;
        for (fi, f) in faces.iter().enumerate() {
            let (Some((g, v)), true) = (f.best, f.alive) else {
                continue;
            };
            let better = match pick {
                None => true,
                Some(pi) => {
                    let (pg, pv) = faces[pi].best.expect("picked face has a candidate");
                    match g.total_cmp(&pg) {
                        Ordering::Greater => true,
                        Ordering::Less => false,
                        Ordering::Equal => (f.verts, v) < (faces[pi].verts, pv),
                    }
                }
            };
            if better {
                pick = Some(fi);
            }
        }
        let fi = pick.expect("a live face with a free vertex exists while vertices remain");
        let (_, v) = faces[fi].best.expect("picked face has a candidate");
        let [x, y, z] = faces[fi].verts;
        faces[fi].alive = false;
        free[v] = false;

        let mut clique = vec![x, y, z, v];
        clique.sort_unstable();
        cliques.push(clique);
        separators.push(Separator {
            vertices: vec![x, y, z],
            k: 2,
        });

        for f in faces.iter_mut().filter(|f| f.alive && f.best.is_some_and(|(_, bv)| bv == v)) {
            f.best = best_vertex(corr, opts.gain, f, &free)?;
        }
        for tri in [[x, y, v], [x, z, v], [y, z, v]] {
            faces.push(new_face(tri, &free)?);
        }
    }
    CliqueTree::new(p, cliques, separators)
}

/// Result of the chordality test: a perfect elimination ordering when chordal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChordalityWitness {
    pub is_chordal: bool,
    /// Maximum-cardinality-search elimination order (reverse visit order).
    pub ordering: Vec<usize>,
}

pub fn validate_chordal(tree: &CliqueTree) -> ChordalityWitness {
    is_chordal_graph(tree.p(), tree.edges())
}

/// Maximum cardinality search followed by a perfect-elimination check.
pub fn is_chordal_graph(p: usize, edges: &[(usize, usize)]) -> ChordalityWitness {
    let mut adj = vec![Vec::new(); p];
    let mut adjm = vec![false; p * p];
    for &(i, j) in edges {
        if i == j || adjm[i * p + j] {
            continue;
        }
        adj[i].push(j);
        adj[j].push(i);
        adjm[i * p + j] = true;
        adjm[j * p + i] = true;
    }

    let mut weight = vec![0usize; p];
    let mut numbered = vec![false; p];
    let mut visit = Vec::with_capacity(p);
    for _ in 0..p {
        let v = (0..p)
            .filter(|&v| !numbered[v])
            .max_by(|&a, &b| weight[a].cmp(&weight[b]).then(b.cmp(&a)))
            .expect("unnumbered vertex");
        numbered[v] = true;
        visit.push(v);
        for &u in &adj[v] {
            if !numbered[u] {
                weight[u] += 1;
            }
        }
    }
    let ordering: Vec<usize> = visit.into_iter().rev().collect();
    let mut pos = vec![0usize; p];
    for (k, &v) in ordering.iter().enumerate() {
        pos[v] = k;
    }

    let mut is_chordal = true;
    'outer: for &v in &ordering {
        let later: Vec<usize> = adj[v].iter().copied().filter(|&u| pos[u] > pos[v]).collect();
        if let Some(&parent) = later.iter().min_by_key(|&&u| pos[u]) {
            for &u in &later {
                if u != parent && !adjm[parent * p + u] {
                    is_chordal = false;
                    break 'outer;
                }
            }
        }
    }
    ChordalityWitness {
        is_chordal,
        ordering,
    }
}
