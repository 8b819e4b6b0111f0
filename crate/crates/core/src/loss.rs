//! The three-term semi-supervised loss over relaxed hash outputs, the
//! classifier cross-entropy, and their exact subgradients.
//!
//! Term shapes (all on rows of `h ∈ (0,1)^q`):
//! - ranking: `max(0, m_t + ‖h_a−h_p‖² − ‖h_a−h_n‖²)` per triplet;
//! - contrastive (embedding and pseudo-label terms share it):
//!   neighbor → `‖h_i−h_j‖²`, non-neighbor → `max(0, m_p − ‖h_i−h_j‖²)`;
//! - total: `Σ ranking + λ·Σ embedding pairs + μ·Σ pseudo pairs`;
//!   cross-entropy is reported separately and routed only to the
//!   classifier branch.
//!
//! The published non-neighbor gradient (`2(‖d‖−m_p)·sgn(d)`) is not the
//! derivative of the non-neighbor loss above; `GradientMode::Consistent`
//! (the default) uses the true subgradient `−2d`, and
//! `GradientMode::PaperLiteral` keeps the published expression for
//! fidelity experiments.

use crate::encoder::Activations;
use crate::error::{Error, Result};
use crate::graph::PairSets;
use crate::mat::{squared_distance, Mat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMode {
    /// Exact subgradient of the implemented loss.
    Consistent,
    /// The published non-neighbor gradient expression, verbatim.
    PaperLiteral,
}

impl GradientMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GradientMode::Consistent => "consistent",
            GradientMode::PaperLiteral => "paper-literal",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "consistent" => Ok(GradientMode::Consistent),
            "paper-literal" => Ok(GradientMode::PaperLiteral),
            other => Err(Error::Parameter(format!("unknown gradient mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub triplet_margin: f64,
    pub pair_margin: f64,
    /// Weight of the embedding term.
    pub lambda: f64,
    /// Weight of the pseudo-label term.
    pub mu: f64,
    pub gradient_mode: GradientMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            triplet_margin: 1.0,
            pair_margin: 1.0,
            lambda: 0.1,
            mu: 0.1,
            gradient_mode: GradientMode::Consistent,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.triplet_margin < 0.0 || self.pair_margin < 0.0 {
            return Err(Error::Parameter("margins must be nonnegative".into()));
        }
        if self.lambda < 0.0 || self.mu < 0.0 {
            return Err(Error::Parameter("loss weights must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Per-term values for one batch. `total` covers the three hash-side
/// terms; `j_xent` is the classifier branch, reported alongside.
#[derive(Debug, Clone, Copy, Default)]
pub struct LossBreakdown {
    pub j_ranking: f64,
    pub j_embedding: f64,
    pub j_pseudo: f64,
    pub j_xent: f64,
    pub total: f64,
    pub n_triplets: usize,
    pub n_embedding_pairs: usize,
    pub n_pseudo_pairs: usize,
}

/// Triplet hinge and its subgradients w.r.t. `(h_a, h_p, h_n)`.
///
/// When the hinge is active the gradients are `2(h_n − h_p)`,
/// `2(h_p − h_a)` and `2(h_a − h_n)`; when inactive, all zero.
pub fn triplet_term(
    h_a: &[f64],
    h_p: &[f64],
    h_n: &[f64],
    margin: f64,
) -> Result<(f64, [Vec<f64>; 3])> {
    let q = h_a.len();
    if h_p.len() != q || h_n.len() != q {
        return Err(Error::Contract(format!(
            "triplet code lengths differ: {q}, {}, {}",
            h_p.len(),
            h_n.len()
        )));
    }
    let activation = margin + squared_distance(h_a, h_p) - squared_distance(h_a, h_n);
    if activation <= 0.0 {
        return Ok((0.0, [vec![0.0; q], vec![0.0; q], vec![0.0; q]]));
    }
    let mut ga = Vec::with_capacity(q);
    let mut gp = Vec::with_capacity(q);
    let mut gn = Vec::with_capacity(q);
    for k in 0..q {
        ga.push(2.0 * (h_n[k] - h_p[k]));
        gp.push(2.0 * (h_p[k] - h_a[k]));
        gn.push(2.0 * (h_a[k] - h_n[k]));
    }
    Ok((activation, [ga, gp, gn]))
}

/// Contrastive pair loss and gradients w.r.t. `(h_i, h_j)`.
pub fn contrastive_term(
    h_i: &[f64],
    h_j: &[f64],
    neighbor: bool,
    margin: f64,
    mode: GradientMode,
) -> Result<(f64, (Vec<f64>, Vec<f64>))> {
    let q = h_i.len();
    if h_j.len() != q {
        return Err(Error::Contract(format!(
            "pair code lengths differ: {q} vs {}",
            h_j.len()
        )));
    }
    let d2 = squared_distance(h_i, h_j);
    if neighbor {
        let gi = h_i
            .iter()
            .zip(h_j)
            .map(|(a, b)| 2.0 * (a - b))
            .collect::<Vec<_>>();
        let gj = gi.iter().map(|v| -v).collect();
        return Ok((d2, (gi, gj)));
    }
    let activation = margin - d2;
    if activation <= 0.0 {
        return Ok((0.0, (vec![0.0; q], vec![0.0; q])));
    }
    let (gi, gj) = match mode {
        GradientMode::Consistent => {
            let gi: Vec<f64> = h_i
                .iter()
                .zip(h_j)
                .map(|(a, b)| -2.0 * (a - b))
                .collect();
            let gj = gi.iter().map(|v| -v).collect();
            (gi, gj)
        }
        GradientMode::PaperLiteral => {
            let norm = d2.sqrt();
            let scale = 2.0 * (norm - margin);
            let gi: Vec<f64> = h_i
                .iter()
                .zip(h_j)
                .map(|(a, b)| scale * sgn(a - b))
                .collect();
            let gj = gi.iter().map(|v| -v).collect();
            (gi, gj)
        }
    };
    Ok((activation, (gi, gj)))
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Cross-entropy of one probability row against a true label, with the
/// gradient w.r.t. the logits (`p − onehot(y)`).
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= probs.len() {
        return Err(Error::Contract(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    let loss = -probs[label].max(1e-12).ln();
    let mut grad = probs.to_vec();
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Evaluate the full batch loss and accumulate gradients.
///
/// Returns the breakdown, `∂J/∂h` (an `r × q` matrix), and the
/// cross-entropy gradient w.r.t. the logits (`r × c`, nonzero only on
/// labeled rows).
pub fn total_loss(
    acts: &Activations,
    triplets: &[[usize; 3]],
    pairs: &PairSets,
    labels: &[Option<usize>],
    cfg: &LossConfig,
) -> Result<(LossBreakdown, Mat, Mat)> {
    cfg.validate()?;
    let h = &acts.hash;
    let mut grad_hash = Mat::zeros(h.rows(), h.cols());
    let mut grad_logits = Mat::zeros(acts.logits.rows(), acts.logits.cols());
    let mut breakdown = LossBreakdown::default();

    for &[a, p, n] in triplets {
        let (loss, [ga, gp, gn]) =
            triplet_term(h.row(a), h.row(p), h.row(n), cfg.triplet_margin)?;
        breakdown.j_ranking += loss;
        breakdown.n_triplets += 1;
        accumulate(&mut grad_hash, a, &ga, 1.0);
        accumulate(&mut grad_hash, p, &gp, 1.0);
        accumulate(&mut grad_hash, n, &gn, 1.0);
    }

    for pair in &pairs.embedding {
        let (loss, (gi, gj)) = contrastive_term(
            h.row(pair.i),
            h.row(pair.j),
            pair.positive,
            cfg.pair_margin,
            cfg.gradient_mode,
        )?;
        breakdown.j_embedding += loss;
        breakdown.n_embedding_pairs += 1;
        accumulate(&mut grad_hash, pair.i, &gi, cfg.lambda);
        accumulate(&mut grad_hash, pair.j, &gj, cfg.lambda);
    }

    for pair in &pairs.pseudo {
        let (loss, (gi, gj)) = contrastive_term(
            h.row(pair.i),
            h.row(pair.j),
            pair.positive,
            cfg.pair_margin,
            cfg.gradient_mode,
        )?;
        breakdown.j_pseudo += loss;
        breakdown.n_pseudo_pairs += 1;
        accumulate(&mut grad_hash, pair.i, &gi, cfg.mu);
        accumulate(&mut grad_hash, pair.j, &gj, cfg.mu);
    }

    for (row, label) in labels.iter().enumerate() {
        if let Some(y) = label {
            let (loss, grad) = cross_entropy(acts.probs.row(row), *y)?;
            breakdown.j_xent += loss;
            for (slot, g) in grad_logits.row_mut(row).iter_mut().zip(&grad) {
                *slot += g;
            }
        }
    }

    breakdown.total =
        breakdown.j_ranking + cfg.lambda * breakdown.j_embedding + cfg.mu * breakdown.j_pseudo;
    Ok((breakdown, grad_hash, grad_logits))
}

fn accumulate(m: &mut Mat, row: usize, grad: &[f64], weight: f64) {
    for (slot, g) in m.row_mut(row).iter_mut().zip(grad) {
        *slot += weight * g;
    }
}
