//! Mini-batch sampling: labeled/unlabeled composition and per-anchor
//! triplet draws.

use rand::Rng;

use super::{Dataset, Split};
use crate::error::{Error, Result};
use crate::mat::Mat;

#[derive(Debug, Clone, Copy)]
pub struct BatchConfig {
    /// Total batch size.
    pub r: usize,
    /// Labeled samples per batch; the remaining `r - m` are unlabeled.
    pub m: usize,
}

impl Default for BatchConfig {
    fn default() -> Self {
        BatchConfig { r: 128, m: 64 }
    }
}

/// One training batch. Rows `0..m` are labeled, the rest unlabeled.
#[derive(Debug, Clone)]
pub struct MiniBatch {
    /// Dataset ids per batch row.
    pub ids: Vec<usize>,
    /// Ground-truth labels per row (`Some` exactly for rows `0..m`).
    pub labels: Vec<Option<usize>>,
    /// Gathered feature rows, `r × d`.
    pub features: Mat,
    /// `(anchor, positive, negative)` batch-row triplets, one per labeled
    /// row. Anchor and positive share a label, the negative differs.
    pub triplets: Vec<[usize; 3]>,
    pub m: usize,
}

/// Draw `count` items from `pool`, without replacement until the pool is
/// exhausted, then wrapping with a fresh shuffle.
fn draw_wrapping<R: Rng>(pool: &[usize], count: usize, rng: &mut R) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    let mut scratch = pool.to_vec();
    while out.len() < count {
        let take = (count - out.len()).min(scratch.len());
        for i in 0..take {
            let j = rng.gen_range(i..scratch.len());
            scratch.swap(i, j);
        }
        out.extend_from_slice(&scratch[..take]);
    }
    out
}

pub fn sample_minibatch<R: Rng>(
    ds: &Dataset,
    split: &Split,
    rng: &mut R,
    cfg: &BatchConfig,
) -> Result<MiniBatch> {
    if cfg.m == 0 {
        return Err(Error::Sampling(
            "m=0: no triplets constructible without labeled samples".into(),
        ));
    }
    if cfg.m > cfg.r {
        return Err(Error::Parameter(format!(
            "m={} exceeds batch size r={}",
            cfg.m, cfg.r
        )));
    }
    if cfg.m < 2 {
        return Err(Error::Sampling(
            "m=1: a triplet needs a same-label and a different-label partner".into(),
        ));
    }
    let pool = &split.train_labeled;
    if pool.is_empty() {
        return Err(Error::Sampling("labeled training pool is empty".into()));
    }
    let mut pool_classes: Vec<usize> = pool
        .iter()
        .map(|&id| {
            ds.label_of(id).ok_or_else(|| {
                Error::Sampling(format!("train_labeled id {id} has no label"))
            })
        })
        .collect::<Result<_>>()?;
    pool_classes.sort_unstable();
    pool_classes.dedup();
    if pool_classes.len() < 2 {
        return Err(Error::Sampling(
            "labeled pool holds a single class; triplet negatives cannot exist".into(),
        ));
    }

    // redraw until the labeled rows span at least two classes (needed for
    // negatives); with >=2 classes in the pool this terminates fast
    let mut labeled_ids = Vec::new();
    let mut ok = false;
    for _ in 0..1000 {
        labeled_ids = draw_wrapping(pool, cfg.m, rng);
        let first = ds.label_of(labeled_ids[0]).unwrap();
        if labeled_ids
            .iter()
            .any(|&id| ds.label_of(id).unwrap() != first)
        {
            ok = true;
            break;
        }
    }
    if !ok {
        return Err(Error::Sampling(
            "could not draw a labeled batch spanning two classes".into(),
        ));
    }

    let n_unlabeled = cfg.r - cfg.m;
    let unlabeled_ids = if n_unlabeled > 0 {
        if split.train_unlabeled.is_empty() {
            return Err(Error::Sampling(
                "unlabeled training pool is empty; set m = r for fully supervised batches".into(),
            ));
        }
        draw_wrapping(&split.train_unlabeled, n_unlabeled, rng)
    } else {
        Vec::new()
    };

    let mut ids = labeled_ids;
    ids.extend_from_slice(&unlabeled_ids);
    let labels: Vec<Option<usize>> = ids
        .iter()
        .enumerate()
        .map(|(row, &id)| if row < cfg.m { ds.label_of(id) } else { None })
        .collect();

    // one triplet per labeled row; if the anchor's class has no other
    // in-batch member the positive degenerates to the anchor itself
    let mut triplets = Vec::with_capacity(cfg.m);
    for a in 0..cfg.m {
        let la = labels[a].unwrap();
        let positives: Vec<usize> = (0..cfg.m)
            .filter(|&j| j != a && labels[j] == Some(la))
            .collect();
        let negatives: Vec<usize> = (0..cfg.m)
            .filter(|&j| labels[j] != Some(la))
            .collect();
        let p = if positives.is_empty() {
            a
        } else {
            positives[rng.gen_range(0..positives.len())]
        };
        let n = negatives[rng.gen_range(0..negatives.len())];
        triplets.push([a, p, n]);
    }

    let mut features = Mat::zeros(ids.len(), ds.dim());
    for (row, &id) in ids.iter().enumerate() {
        features.row_mut(row).copy_from_slice(ds.features_of(id));
    }

    Ok(MiniBatch {
        ids,
        labels,
        features,
        triplets,
        m: cfg.m,
    })
}
