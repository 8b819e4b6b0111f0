//! Dataset loading, reproducible splits, and mini-batch sampling.

mod batch;
mod csv;
mod idx;
mod split;

pub use batch::{sample_minibatch, BatchConfig, MiniBatch};
pub use csv::load_csv_features;
pub use idx::{
    load_idx, load_idx_labels, write_idx_images, write_idx_labels, IDX_IMAGES_MAGIC,
    IDX_LABELS_MAGIC,
};
pub use split::{make_split, read_split, write_split, Protocol, Split, SplitConfig};

use crate::error::{Error, Result};
use crate::eval::RelevanceMode;

/// One sample viewed out of a [`Dataset`].
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub id: usize,
    pub features: &'a [f64],
    pub label: Option<usize>,
}

/// An in-memory dataset: `n` feature vectors of a fixed dimension with
/// optional class labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    dim: usize,
    /// Row-major `n × dim`.
    features: Vec<f64>,
    labels: Vec<Option<usize>>,
    n_classes: usize,
    relevance: RelevanceMode,
}

impl Dataset {
    pub fn from_parts(dim: usize, features: Vec<f64>, labels: Vec<Option<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Format("feature dimension must be positive".into()));
        }
        if features.len() % dim != 0 {
            return Err(Error::Length(format!(
                "feature buffer length {} is not a multiple of dim {dim}",
                features.len()
            )));
        }
        let n = features.len() / dim;
        if labels.len() != n {
            return Err(Error::Length(format!(
                "{} labels for {n} samples",
                labels.len()
            )));
        }
        let n_classes = labels.iter().flatten().max().map_or(0, |&m| m + 1);
        Ok(Dataset {
            dim,
            features,
            labels,
            n_classes,
            relevance: RelevanceMode::SingleLabel,
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of classes, `max label + 1`.
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn relevance_mode(&self) -> RelevanceMode {
        self.relevance
    }

    pub fn set_relevance_mode(&mut self, mode: RelevanceMode) {
        self.relevance = mode;
    }

    pub fn features_of(&self, id: usize) -> &[f64] {
        &self.features[id * self.dim..(id + 1) * self.dim]
    }

    pub fn label_of(&self, id: usize) -> Option<usize> {
        self.labels[id]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn sample(&self, id: usize) -> Sample<'_> {
        Sample {
            id,
            features: self.features_of(id),
            label: self.labels[id],
        }
    }

    /// Attach per-sample labels after the fact (e.g. from a separate IDX
    /// labels file). Count must match.
    pub fn attach_labels(&mut self, labels: Vec<usize>) -> Result<()> {
        if labels.len() != self.n() {
            return Err(Error::Length(format!(
                "{} labels for {} samples",
                labels.len(),
                self.n()
            )));
        }
        self.n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        self.labels = labels.into_iter().map(Some).collect();
        Ok(())
    }

    /// Ids grouped by class, classes in ascending order. Unlabeled samples
    /// are not included.
    pub fn ids_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.n_classes];
        for (id, label) in self.labels.iter().enumerate() {
            if let Some(c) = label {
                groups[*c].push(id);
            }
        }
        groups
    }
}
