//! Global sparse precision matrices assembled from local clique/separator
//! inversions, and the Gaussian log-likelihood used to score them.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Block, Error, Result};
use crate::estimators::CovariancePair;
use crate::ifn::CliqueTree;
use crate::linalg::{self, Cholesky, SymMatrix};

/// Where the support of a precision matrix came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Structure {
    Named(StructureTag),
    Graph(CliqueTree),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StructureTag {
    Dense,
    Diagonal,
}

impl Structure {
    pub const DENSE: Structure = Structure::Named(StructureTag::Dense);
    pub const DIAGONAL: Structure = Structure::Named(StructureTag::Diagonal);
}

#[derive(Deserialize)]
struct RawPrecision {
    p: usize,
    mean: Vec<f64>,
    entries: Vec<(usize, usize, f64)>,
    structure: Structure,
}

/// Sparse symmetric precision matrix `J` (lower-triangle coordinate list)
/// plus the mean vector of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrecision")]
pub struct SparsePrecision {
    p: usize,
    mean: Vec<f64>,
    entries: Vec<(usize, usize, f64)>,
    structure: Structure,
}

impl TryFrom<RawPrecision> for SparsePrecision {
    type Error = Error;

    fn try_from(raw: RawPrecision) -> Result<Self> {
        SparsePrecision::new(raw.p, raw.mean, raw.entries, raw.structure)
    }
}

impl SparsePrecision {
    /// Normalises entries to `j <= i`, sorts them by `(i, j)` and checks that
    /// they respect the declared structure.
    pub fn new(p: usize, mean: Vec<f64>, entries: Vec<(usize, usize, f64)>, structure: Structure) -> Result<Self> {
        if mean.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: mean.len(),
            });
        }
        let mut map = BTreeMap::new();
        for (i, j, v) in entries {
            let (i, j) = if j <= i { (i, j) } else { (j, i) };
            if i >= p {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) out of range (p = {p})")));
            }
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite entry at ({i}, {j})")));
            }
            if map.insert((i, j), v).is_some() {
                return Err(Error::InvalidInput(format!("duplicate entry ({i}, {j})")));
            }
        }
        let allowed = |i: usize, j: usize| match &structure {
            Structure::Named(StructureTag::Dense) => true,
            Structure::Named(StructureTag::Diagonal) => i == j,
            Structure::Graph(t) => i == j || t.has_edge(i, j),
        };
        if let Structure::Graph(t) = &structure {
            if t.p() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: t.p(),
                });
            }
        }
        if let Some(&(i, j)) = map.keys().find(|&&(i, j)| !allowed(i, j)) {
            return Err(Error::InvalidInput(format!(
                "entry ({i}, {j}) lies outside the declared structure"
            )));
        }
        Ok(Self {
            p,
            mean,
            entries: map.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
            structure,
        })
    }

    /// Dense precision from a full symmetric matrix.
    pub fn from_dense(j: &SymMatrix, mean: Vec<f64>, structure: Structure) -> Result<Self> {
        let p = j.dim();
        let mut entries = Vec::new();
        for i in 0..p {
            for k in 0..=i {
                let keep = match &structure {
                    Structure::Named(StructureTag::Dense) => true,
                    Structure::Named(StructureTag::Diagonal) => i == k,
                    Structure::Graph(t) => i == k || t.has_edge(i, k),
                };
                if keep {
                    entries.push((i, k, j.get(i, k)));
                }
            }
        }
        Self::new(p, mean, entries, structure)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn with_mean(mut self, mean: Vec<f64>) -> Result<Self> {
        if mean.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                found: mean.len(),
            });
        }
        self.mean = mean;
        Ok(self)
    }

    /// Stored value of `J_ij` (zero when not stored).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if j <= i { (i, j) } else { (j, i) };
        self.entries
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
            .map_or(0.0, |k| self.entries[k].2)
    }

    /// Structural off-diagonal entries (upper triangle).
    pub fn nnz_offdiag(&self) -> usize {
        self.entries.iter().filter(|(i, j, _)| i != j).count()
    }

    /// Parameter count: off-diagonal structural entries plus `p` diagonals.
    pub fn n_params(&self) -> usize {
        self.nnz_offdiag() + self.p
    }

    pub fn to_dense(&self) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.p);
        for &(i, j, v) in &self.entries {
            m.set(i, j, v);
        }
        m
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.p, "matvec dimension mismatch");
        let mut out = vec![0.0; self.p];
        for &(i, j, a) in &self.entries {
            out[i] += a * v[j];
            if i != j {
                out[j] += a * v[i];
            }
        }
        out
    }

    /// Cholesky factor of the dense lift; fails when `J` is not positive definite.
    pub fn cholesky(&self) -> Result<Cholesky> {
        linalg::cholesky(&self.to_dense())
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("precision serialises")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Local inverse of one clique or separator block, with its signed weight.
#[derive(Debug, Clone)]
pub(crate) struct LocalBlock {
    pub vertices: Vec<usize>,
    pub weight: f64,
    pub inverse: SymMatrix,
}

/// Blocks of a tree in canonical order: cliques first, then separators.
fn block_list(tree: &CliqueTree) -> Vec<(Block, &[usize], f64)> {
    let cliques = tree
        .cliques()
        .iter()
        .enumerate()
        .map(|(i, c)| (Block::Clique(i), c.as_slice(), 1.0));
    let seps = tree
        .separators()
        .iter()
        .enumerate()
        .map(|(i, s)| (Block::Separator(i), s.vertices.as_slice(), -((s.k - 1) as f64)));
    cliques.chain(seps).collect()
}

fn check_inputs(tree: &CliqueTree, cov: &CovariancePair) -> Result<()> {
    if tree.p() != cov.p() {
        return Err(Error::DimensionMismatch {
            expected: cov.p(),
            found: tree.p(),
        });
    }
    let needed = tree.max_clique_size() + 1;
    if let Some(q) = cov.n_obs {
        if q < needed {
            let largest = tree
                .cliques()
                .iter()
                .position(|c| c.len() + 1 == needed)
                .unwrap_or(0);
            return Err(Error::LocalNotPositiveDefinite {
                block: Block::Clique(largest),
                detail: format!(
                    "cliques of size {} need at least {needed} observations, got {q}",
                    needed - 1
                ),
            });
        }
    }
    Ok(())
}

fn invert_block(cov: &CovariancePair, block: Block, vertices: &[usize]) -> Result<SymMatrix> {
    linalg::invert_spd(&cov.cov.submatrix(vertices)).map_err(|e| match e {
        Error::NotPositiveDefinite { pivot } => Error::LocalNotPositiveDefinite {
            block,
            detail: format!("pivot {pivot} of vertices {vertices:?}"),
        },
        other => other,
    })
}

/// Inverts the selected blocks in parallel; order of the output follows `blocks`.
fn local_inverses(blocks: &[(Block, &[usize], f64)], cov: &CovariancePair) -> Result<Vec<LocalBlock>> {
    blocks
        .par_iter()
        .map(|&(block, vertices, weight)| {
            Ok(LocalBlock {
                vertices: vertices.to_vec(),
                weight,
                inverse: invert_block(cov, block, vertices)?,
            })
        })
        .collect()
}

pub(crate) fn tree_blocks(tree: &CliqueTree, cov: &CovariancePair) -> Result<Vec<LocalBlock>> {
    check_inputs(tree, cov)?;
    local_inverses(&block_list(tree), cov)
}

/// Adds each block's weighted local inverse into `acc`, skipping entries
/// not in `acc`. Every entry sees its contributions in canonical block order.
fn accumulate(acc: &mut BTreeMap<(usize, usize), f64>, blocks: &[LocalBlock]) {
    for b in blocks {
        for (a, &i) in b.vertices.iter().enumerate() {
            for (c, &j) in b.vertices.iter().enumerate().take(a + 1) {
                let key = if j <= i { (i, j) } else { (j, i) };
                if let Some(slot) = acc.get_mut(&key) {
                    *slot += b.weight * b.inverse.get(a, c);
                }
            }
        }
    }
}

fn structural_keys(tree: &CliqueTree) -> BTreeMap<(usize, usize), f64> {
    let mut acc = BTreeMap::new();
    for i in 0..tree.p() {
        acc.insert((i, i), 0.0);
    }
    for &(i, j) in tree.edges() {
        acc.insert((j, i), 0.0);
    }
    acc
}

/// Global precision from local inversions:
/// `J = Σ_C [Σ_C⁻¹] − Σ_S (k(S) − 1) [Σ_S⁻¹]`, zero off the clique support.
pub fn assemble_precision(tree: &CliqueTree, cov: &CovariancePair) -> Result<SparsePrecision> {
    let blocks = tree_blocks(tree, cov)?;
    let mut acc = structural_keys(tree);
    accumulate(&mut acc, &blocks);
    Ok(SparsePrecision {
        p: tree.p(),
        mean: cov.means.clone(),
        entries: acc.into_iter().map(|((i, j), v)| (i, j, v)).collect(),
        structure: Structure::Graph(tree.clone()),
    })
}

/// `ln det J = Σ_S (k(S) − 1) ln det Σ_S − Σ_C ln det Σ_C`.
pub fn logdet_decomposed(tree: &CliqueTree, cov: &CovariancePair) -> Result<f64> {
    check_inputs(tree, cov)?;
    let terms: Vec<f64> = block_list(tree)
        .par_iter()
        .map(|&(block, vertices, weight)| {
            let ld = linalg::logdet(&cov.cov.submatrix(vertices)).map_err(|_| Error::LocalNotPositiveDefinite {
                block,
                detail: format!("vertices {vertices:?}"),
            })?;
            Ok(-weight * ld)
        })
        .collect::<Result<_>>()?;
    Ok(terms.into_iter().sum())
}

/// Recomputes only the entries touched by blocks that intersect `dirty`.
///
/// The result is bit-identical to `assemble_precision(tree, cov_new)`.
pub fn partial_update(
    model: &SparsePrecision,
    tree: &CliqueTree,
    cov_new: &CovariancePair,
    dirty: &BTreeSet<usize>,
) -> Result<SparsePrecision> {
    if model.p != tree.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p,
            found: tree.p(),
        });
    }
    if let Some(&v) = dirty.iter().find(|&&v| v >= tree.p()) {
        return Err(Error::InvalidInput(format!("dirty vertex {v} out of range")));
    }
    if dirty.is_empty() {
        return Ok(model.clone());
    }
    check_inputs(tree, cov_new)?;

    let all = block_list(tree);
    let touched_keys: BTreeSet<(usize, usize)> = all
        .iter()
        .filter(|(_, vs, _)| vs.iter().any(|v| dirty.contains(v)))
        .flat_map(|(_, vs, _)| {
            vs.iter()
                .flat_map(move |&i| vs.iter().filter(move |&&j| j <= i).map(move |&j| (i, j)))
        })
        .collect();
    let needed: Vec<(Block, &[usize], f64)> = all
        .iter()
        .filter(|(_, vs, _)| {
            vs.iter()
                .any(|&i| vs.iter().any(|&j| j <= i && touched_keys.contains(&(i, j))))
        })
        .cloned()
        .collect();

    let blocks = local_inverses(&needed, cov_new)?;
    let mut acc: BTreeMap<(usize, usize), f64> = touched_keys.iter().map(|&k| (k, 0.0)).collect();
    accumulate(&mut acc, &blocks);

    let mean = model
        .mean
        .iter()
        .enumerate()
        .map(|(i, &m)| if dirty.contains(&i) { cov_new.means[i] } else { m })
        .collect();
    let entries = model
        .entries
        .iter()
        .map(|&(i, j, v)| (i, j, acc.get(&(i, j)).copied().unwrap_or(v)))
        .collect();
    Ok(SparsePrecision {
        p: model.p,
        mean,
        entries,
        structure: Structure::Graph(tree.clone()),
    })
}

/// Gaussian log-likelihood of a test covariance under a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodReport {
    /// `½ (ln det J − Tr(Σ̂ J) − p ln 2π)`, nats per observation.
    pub per_obs_loglik: f64,
    /// `q_test · per_obs_loglik`.
    pub total_loglik: f64,
    pub logdet: f64,
    pub trace_term: f64,
    pub n_params: usize,
}

pub(crate) fn report_from(logdet: f64, trace_term: f64, p: usize, q_test: usize, n_params: usize) -> LikelihoodReport {
    let per_obs = 0.5 * (logdet - trace_term - p as f64 * (2.0 * PI).ln());
    LikelihoodReport {
        per_obs_loglik: per_obs,
        total_loglik: q_test as f64 * per_obs,
        logdet,
        trace_term,
        n_params,
    }
}

/// Sparse contraction `Σ_ij Σ̂_ij J_ij`.
pub fn trace_product(model: &SparsePrecision, cov: &SymMatrix) -> f64 {
    model
        .entries
        .iter()
        .map(|&(i, j, v)| if i == j { v * cov.get(i, i) } else { 2.0 * v * cov.get(i, j) })
        .sum()
}

pub fn log_likelihood(model: &SparsePrecision, test: &CovariancePair, q_test: usize) -> Result<LikelihoodReport> {
    if model.p != test.p() {
        return Err(Error::DimensionMismatch {
            expected: model.p,
            found: test.p(),
        });
    }
    let logdet = model.cholesky()?.logdet();
    let trace_term = trace_product(model, &test.cov);
    Ok(report_from(logdet, trace_term, model.p, q_test, model.n_params()))
}
