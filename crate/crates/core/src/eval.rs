//! Retrieval metrics: average precision / MAP, precision@k, and
//! precision-recall curves over full rankings.
//!
//! Conventions:
//! - AP over a ranking of length `n` with `R` relevant items is
//!   `(1/R) * Σ_k (R_k / k) * rel_k` where `R_k` counts relevant items in
//!   the top `k`.
//! - Queries with no relevant database item are excluded from MAP (and from
//!   the averaged P@k / PR reports); their per-query AP is reported absent.
//! - Cross-query PR averaging interpolates each query's raw curve at 101
//!   evenly spaced recall levels.

use crate::codes::RetrievalResult;
use crate::error::{Error, Result};

/// How ground-truth relevance between two samples is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelevanceMode {
    /// Relevant iff both carry the same single label.
    SingleLabel,
    /// Relevant iff the label sets intersect.
    AnySharedLabel,
}

/// Ground-truth relevance judgments backed by per-sample label sets.
///
/// Judgments are symmetric and binary. Samples without labels are never
/// relevant to anything.
#[derive(Debug, Clone)]
pub struct RelevanceJudge {
    mode: RelevanceMode,
    labels: Vec<Option<Vec<usize>>>,
}

impl RelevanceJudge {
    pub fn from_single_labels(labels: &[Option<usize>], mode: RelevanceMode) -> Self {
        RelevanceJudge {
            mode,
            labels: labels.iter().map(|l| l.map(|v| vec![v])).collect(),
        }
    }

    pub fn from_label_sets(labels: Vec<Option<Vec<usize>>>, mode: RelevanceMode) -> Self {
        RelevanceJudge { mode, labels }
    }

    pub fn relevant(&self, a: usize, b: usize) -> bool {
        let (Some(la), Some(lb)) = (
            self.labels.get(a).and_then(|l| l.as_ref()),
            self.labels.get(b).and_then(|l| l.as_ref()),
        ) else {
            return false;
        };
        match self.mode {
            RelevanceMode::SingleLabel => la == lb && la.len() == 1,
            RelevanceMode::AnySharedLabel => la.iter().any(|x| lb.contains(x)),
        }
    }
}

/// Average precision of one ranked relevance sequence.
///
/// Returns `None` when the sequence contains no relevant item.
pub fn average_precision(rel: &[bool]) -> Option<f64> {
    let r_total = rel.iter().filter(|&&x| x).count();
    if r_total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (k, &is_rel) in rel.iter().enumerate() {
        if is_rel {
            hits += 1;
            acc += hits as f64 / (k + 1) as f64;
        }
    }
    Some(acc / r_total as f64)
}

/// Precision among the top `k` of a ranked relevance sequence: `R_k / k`.
pub fn precision_at_k(rel: &[bool], k: usize) -> Result<f64> {
    if k == 0 || k > rel.len() {
        return Err(Error::Contract(format!(
            "precision@k requires 1 <= k <= n, got k={k}, n={}",
            rel.len()
        )));
    }
    let hits = rel[..k].iter().filter(|&&x| x).count();
    Ok(hits as f64 / k as f64)
}

/// Raw PR curve: one `(recall, precision)` point per rank.
///
/// Returns `None` when no item is relevant.
pub fn pr_curve(rel: &[bool]) -> Option<Vec<(f64, f64)>> {
    let r_total = rel.iter().filter(|&&x| x).count();
    if r_total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut points = Vec::with_capacity(rel.len());
    for (k, &is_rel) in rel.iter().enumerate() {
        if is_rel {
            hits += 1;
        }
        points.push((hits as f64 / r_total as f64, hits as f64 / (k + 1) as f64));
    }
    Some(points)
}

/// Number of recall levels used when averaging PR curves across queries.
pub const PR_GRID_POINTS: usize = 101;

/// Precision of one query's raw curve sampled at each grid recall level:
/// the precision at the first rank whose recall reaches the level.
fn pr_at_grid(points: &[(f64, f64)]) -> Vec<f64> {
    let mut out = Vec::with_capacity(PR_GRID_POINTS);
    let mut idx = 0usize;
    for g in 0..PR_GRID_POINTS {
        let level = g as f64 / (PR_GRID_POINTS - 1) as f64;
        while idx < points.len() && points[idx].0 + 1e-12 < level {
            idx += 1;
        }
        // exhaustive rankings always end at recall 1.0, so idx stays in range
        out.push(points[idx.min(points.len() - 1)].1);
    }
    out
}

/// Aggregated retrieval metrics for a query set.
#[derive(Debug, Clone)]
pub struct MetricsReport {
    /// Mean average precision over queries with at least one relevant item.
    pub map: f64,
    /// Per-query AP; `None` marks queries with no relevant item.
    pub per_query_ap: Vec<Option<f64>>,
    /// Averaged PR curve on the fixed recall grid.
    pub pr_curve: Vec<(f64, f64)>,
    /// `(k, mean precision@k)` pairs, in the requested k order.
    pub precision_at_k: Vec<(usize, f64)>,
    pub n_queries: usize,
    pub n_queries_included: usize,
}

/// Score a batch of rankings against ground truth.
///
/// `query_ids[i]` is the dataset id behind `rankings[i]`; `db_ids[j]` is
/// the dataset id behind database row `j`. `ks` selects the precision@k
/// rows (values exceeding a ranking's length are skipped for it).
pub fn evaluate(
    rankings: &[RetrievalResult],
    query_ids: &[usize],
    db_ids: &[usize],
    judge: &RelevanceJudge,
    ks: &[usize],
) -> Result<MetricsReport> {
    if rankings.len() != query_ids.len() {
        return Err(Error::Contract(format!(
            "{} rankings but {} query ids",
            rankings.len(),
            query_ids.len()
        )));
    }
    let mut per_query_ap = Vec::with_capacity(rankings.len());
    let mut ap_sum = 0.0;
    let mut included = 0usize;
    let mut grid_sum = vec![0.0; PR_GRID_POINTS];
    let mut pk_sum = vec![0.0; ks.len()];
    let mut pk_count = vec![0usize; ks.len()];

    let mut rel = Vec::new();
    for (ranking, &qid) in rankings.iter().zip(query_ids) {
        rel.clear();
        rel.extend(ranking.ids.iter().map(|&row| {
            let db_id = db_ids[row];
            judge.relevant(qid, db_id)
        }));
        match average_precision(&rel) {
            Some(ap) => {
                ap_sum += ap;
                included += 1;
                per_query_ap.push(Some(ap));
                let points = pr_curve(&rel).expect("relevant item exists");
                for (acc, v) in grid_sum.iter_mut().zip(pr_at_grid(&points)) {
                    *acc += v;
                }
                for (slot, &k) in ks.iter().enumerate() {
                    if k >= 1 && k <= rel.len() {
                        pk_sum[slot] += precision_at_k(&rel, k)?;
                        pk_count[slot] += 1;
                    }
                }
            }
            None => per_query_ap.push(None),
        }
    }

    if included == 0 {
        return Err(Error::Evaluation(
            "no query had a relevant database item".into(),
        ));
    }

    let pr = grid_sum
        .iter()
        .enumerate()
        .map(|(g, &s)| {
            (
                g as f64 / (PR_GRID_POINTS - 1) as f64,
                s / included as f64,
            )
        })
        .collect();
    let precision_at_k = ks
        .iter()
        .enumerate()
        .filter(|(slot, _)| pk_count[*slot] > 0)
        .map(|(slot, &k)| (k, pk_sum[slot] / pk_count[slot] as f64))
        .collect();

    Ok(MetricsReport {
        map: ap_sum / included as f64,
        per_query_ap,
        pr_curve: pr,
        precision_at_k,
        n_queries: rankings.len(),
        n_queries_included: included,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ap_perfect_ranking() {
        assert_eq!(average_precision(&[true, true, true]), Some(1.0));
    }

    #[test]
    fn ap_single_relevant_at_rank_4() {
        assert_eq!(average_precision(&[false, false, false, true]), Some(0.25));
    }

    #[test]
    fn ap_interleaved_fixture() {
        // (1/3)(1/1 + 2/3 + 3/5)
        let ap = average_precision(&[true, false, true, false, true]).unwrap();
        assert!((ap - 0.75556).abs() < 1e-5);
    }

    #[test]
    fn ap_no_relevant_is_none() {
        assert_eq!(average_precision(&[false, false]), None);
    }

    #[test]
    fn ap_bounds_and_front_loading() {
        // all relevant first => exactly 1; any later placement strictly less
        assert_eq!(average_precision(&[true, true, false, false]), Some(1.0));
        let worse = average_precision(&[true, false, true, false]).unwrap();
        assert!(worse < 1.0 && worse > 0.0);
    }

    #[test]
    fn moving_a_relevant_item_earlier_never_decreases_ap() {
        let base = [false, true, false, true, false, false, true, false];
        let base_ap = average_precision(&base).unwrap();
        for i in 0..base.len() {
            for j in 0..i {
                if base[i] && !base[j] {
                    let mut moved = base;
                    moved.swap(i, j);
                    assert!(average_precision(&moved).unwrap() >= base_ap);
                }
            }
        }
    }

    #[test]
    fn precision_at_k_examples() {
        assert_eq!(
            precision_at_k(&[true, false, true, false], 2).unwrap(),
            0.5
        );
        assert_eq!(precision_at_k(&[true, false], 1).unwrap(), 1.0);
        assert!(precision_at_k(&[true], 2).is_err());
        assert!(precision_at_k(&[true], 0).is_err());
    }

    #[test]
    fn pr_curve_hand_enumeration() {
        let pts = pr_curve(&[true, true]).unwrap();
        assert_eq!(pts, vec![(0.5, 1.0), (1.0, 1.0)]);
    }

    #[test]
    fn pr_curve_ends_at_full_recall() {
        let pts = pr_curve(&[false, true, false, true]).unwrap();
        assert_eq!(pts.last().unwrap().0, 1.0);
    }

    #[test]
    fn grid_recalls_are_monotone() {
        let pts = pr_curve(&[true, false, true]).unwrap();
        let grid = pr_at_grid(&pts);
        assert_eq!(grid.len(), PR_GRID_POINTS);
        // the recall coordinate of the averaged curve is the grid itself
        for g in 1..PR_GRID_POINTS {
            assert!(g as f64 / 100.0 > (g - 1) as f64 / 100.0);
        }
        assert!(grid.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    fn ranking(ids: Vec<usize>) -> RetrievalResult {
        RetrievalResult {
            query_index: 0,
            distances: vec![0; ids.len()],
            ids,
        }
    }

    #[test]
    fn map_is_mean_of_included_aps() {
        // db ids 0..4 labeled 0,0,1,1; queries labeled 0 and 1
        let labels: Vec<Option<usize>> =
            vec![Some(0), Some(0), Some(1), Some(1), Some(0), Some(1)];
        let judge = RelevanceJudge::from_single_labels(&labels, RelevanceMode::SingleLabel);
        let rankings = vec![ranking(vec![0, 1, 2, 3]), ranking(vec![0, 1, 2, 3])];
        // query 4 (label 0): rel = 1,1,0,0 -> AP 1.0
        // query 5 (label 1): rel = 0,0,1,1 -> AP (1/2)(1/3 + 2/4) = 0.41666...
        let report = evaluate(&rankings, &[4, 5], &[0, 1, 2, 3], &judge, &[2]).unwrap();
        let expected = (1.0 + (1.0 / 3.0 + 0.5) / 2.0) / 2.0;
        assert!((report.map - expected).abs() < 1e-12);
        assert_eq!(report.n_queries_included, 2);
    }

    #[test]
    fn singleton_query_map_equals_its_ap() {
        let labels = vec![Some(1), Some(0), Some(1)];
        let judge = RelevanceJudge::from_single_labels(&labels, RelevanceMode::SingleLabel);
        let report = evaluate(&[ranking(vec![1, 0])], &[2], &[0, 1], &judge, &[1]).unwrap();
        // rel = [false, true] -> AP = 0.5
        assert!((report.map - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_included_queries_is_evaluation_error() {
        let labels = vec![Some(0), Some(1)];
        let judge = RelevanceJudge::from_single_labels(&labels, RelevanceMode::SingleLabel);
        let res = evaluate(&[ranking(vec![0])], &[1], &[0], &judge, &[1]);
        assert!(matches!(res, Err(Error::Evaluation(_))));
    }

    #[test]
    fn shared_label_mode_uses_set_intersection() {
        let labels = vec![
            Some(vec![0, 3]),
            Some(vec![3, 7]),
            Some(vec![1]),
            None,
        ];
        let judge = RelevanceJudge::from_label_sets(labels, RelevanceMode::AnySharedLabel);
        assert!(judge.relevant(0, 1));
        assert!(!judge.relevant(0, 2));
        assert!(!judge.relevant(0, 3));
        assert!(judge.relevant(1, 0));
    }
}
