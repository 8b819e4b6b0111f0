//! Online per-batch neighborhood graph, pseudo-label assignment, and the
//! pair sampling that feeds the embedding and pseudo-label loss terms.
//!
//! The adjacency relation over a batch of `r` samples is tri-valued:
//! `-1` when both endpoints are labeled (their similarity is handled by
//! the supervised ranking term), `1` when the column sample is among the
//! row's k nearest neighbors by squared Euclidean feature distance, and
//! `0` otherwise. The relation is directional: kNN membership is judged
//! row-wise and never symmetrized.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mat::{squared_distance, Mat};

/// Tri-valued `r × r` neighbor relation for one batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyMatrix {
    r: usize,
    k: usize,
    values: Vec<i8>,
}

impl AdjacencyMatrix {
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.values[i * self.r + j]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.values[i * self.r..(i + 1) * self.r]
    }
}

/// Build the batch adjacency from feature rows.
///
/// Self-pairs are excluded from neighbor computation and `A(i,i) = 0`.
/// Ties at the k-th neighbor slot break toward the lower index.
pub fn build_adjacency(features: &Mat, labeled: &[bool], k: usize) -> Result<AdjacencyMatrix> {
    let r = features.rows();
    if labeled.len() != r {
        return Err(Error::Contract(format!(
            "labeled mask has {} entries for {r} rows",
            labeled.len()
        )));
    }
    if k < 1 || k >= r {
        return Err(Error::Parameter(format!(
            "k must satisfy 1 <= k < r, got k={k}, r={r}"
        )));
    }
    let mut values = vec![0i8; r * r];
    let mut order: Vec<usize> = Vec::with_capacity(r - 1);
    let mut dist: Vec<f64> = vec![0.0; r];
    for i in 0..r {
        order.clear();
        for j in 0..r {
            if j != i {
                dist[j] = squared_distance(features.row(i), features.row(j));
                order.push(j);
            }
        }
        order.sort_unstable_by(|&a, &b| {
            dist[a].partial_cmp(&dist[b]).unwrap().then(a.cmp(&b))
        });
        let row = &mut values[i * r..(i + 1) * r];
        for &j in order.iter().take(k) {
            row[j] = 1;
        }
        if labeled[i] {
            for (j, slot) in row.iter_mut().enumerate() {
                if j != i && labeled[j] {
                    *slot = -1;
                }
            }
        }
    }
    Ok(AdjacencyMatrix { r, k, values })
}

/// Where a pseudo label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoSource {
    GroundTruth,
    Predicted,
}

/// Per-row class assignment: ground truth where known, otherwise the
/// argmax of the classifier's probabilities.
#[derive(Debug, Clone)]
pub struct PseudoLabels {
    pub classes: Vec<usize>,
    pub sources: Vec<PseudoSource>,
}

/// Argmax ties resolve to the lowest class id.
pub fn assign_pseudo_labels(probs: &Mat, labels: &[Option<usize>]) -> PseudoLabels {
    let mut classes = Vec::with_capacity(probs.rows());
    let mut sources = Vec::with_capacity(probs.rows());
    for i in 0..probs.rows() {
        match labels.get(i).copied().flatten() {
            Some(c) => {
                classes.push(c);
                sources.push(PseudoSource::GroundTruth);
            }
            None => {
                let row = probs.row(i);
                let mut best = 0usize;
                for (j, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = j;
                    }
                }
                classes.push(best);
                sources.push(PseudoSource::Predicted);
            }
        }
    }
    PseudoLabels { classes, sources }
}

/// One sampled pair: `positive` means neighbor (embedding pairs) or
/// same pseudo label (pseudo pairs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
    pub positive: bool,
}

/// The sampled pairs feeding one batch's loss.
#[derive(Debug, Clone, Default)]
pub struct PairSets {
    pub embedding: Vec<Pair>,
    pub pseudo: Vec<Pair>,
}

/// Which rows anchor pseudo-label pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PseudoAnchorPolicy {
    /// Every batch row anchors one same-PL and one different-PL pair.
    AllRows,
    /// Only labeled rows anchor pseudo pairs.
    LabeledOnly,
}

/// For each row, draw one neighbor and one non-neighbor partner from the
/// adjacency. Rows lacking a candidate of a kind contribute no pair of
/// that kind.
pub fn sample_embedding_pairs<R: Rng>(adj: &AdjacencyMatrix, rng: &mut R) -> Vec<Pair> {
    let mut pairs = Vec::new();
    let mut neighbors = Vec::new();
    let mut non_neighbors = Vec::new();
    for i in 0..adj.r() {
        neighbors.clear();
        non_neighbors.clear();
        for (j, &v) in adj.row(i).iter().enumerate() {
            if j == i {
                continue;
            }
            match v {
                1 => neighbors.push(j),
                0 => non_neighbors.push(j),
                _ => {}
            }
        }
        if !neighbors.is_empty() {
            let j = neighbors[rng.gen_range(0..neighbors.len())];
            pairs.push(Pair { i, j, positive: true });
        }
        if !non_neighbors.is_empty() {
            let j = non_neighbors[rng.gen_range(0..non_neighbors.len())];
            pairs.push(Pair { i, j, positive: false });
        }
    }
    pairs
}

/// For each anchor row, draw one same-PL and one different-PL partner.
pub fn sample_pseudo_pairs<R: Rng>(
    pl: &PseudoLabels,
    rng: &mut R,
    policy: PseudoAnchorPolicy,
) -> Vec<Pair> {
    let r = pl.classes.len();
    let mut pairs = Vec::new();
    let mut same = Vec::new();
    let mut diff = Vec::new();
    for i in 0..r {
        if policy == PseudoAnchorPolicy::LabeledOnly && pl.sources[i] != PseudoSource::GroundTruth
        {
            continue;
        }
        same.clear();
        diff.clear();
        for j in 0..r {
            if j == i {
                continue;
            }
            if pl.classes[j] == pl.classes[i] {
                same.push(j);
            } else {
                diff.push(j);
            }
        }
        if !same.is_empty() {
            let j = same[rng.gen_range(0..same.len())];
            pairs.push(Pair { i, j, positive: true });
        }
        if !diff.is_empty() {
            let j = diff[rng.gen_range(0..diff.len())];
            pairs.push(Pair { i, j, positive: false });
        }
    }
    pairs
}

/// Draw both pair kinds for one batch.
pub fn sample_pairs<R: Rng>(
    adj: &AdjacencyMatrix,
    pl: &PseudoLabels,
    rng: &mut R,
    policy: PseudoAnchorPolicy,
) -> PairSets {
    PairSets {
        embedding: sample_embedding_pairs(adj, rng),
        pseudo: sample_pseudo_pairs(pl, rng, policy),
    }
}

/// Fraction of `A(i,j) = 1` edges whose endpoints share a true label;
/// `None` when the graph has no such edges.
pub fn graph_accuracy(adj: &AdjacencyMatrix, true_labels: &[usize]) -> Option<f64> {
    let mut edges = 0usize;
    let mut correct = 0usize;
    for i in 0..adj.r() {
        for (j, &v) in adj.row(i).iter().enumerate() {
            if v == 1 {
                edges += 1;
                if true_labels[i] == true_labels[j] {
                    correct += 1;
                }
            }
        }
    }
    if edges == 0 {
        None
    } else {
        Some(correct as f64 / edges as f64)
    }
}

/// Fraction of rows whose pseudo label equals the true label.
pub fn pseudo_label_accuracy(pl: &PseudoLabels, true_labels: &[usize]) -> f64 {
    if pl.classes.is_empty() {
        return 0.0;
    }
    let correct = pl
        .classes
        .iter()
        .zip(true_labels)
        .filter(|(a, b)| a == b)
        .count();
    correct as f64 / pl.classes.len() as f64
}
