//! Reproducible query/database/training splits under the standard and
//! transfer protocols, plus their on-disk id-list format.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Stratified query draw; labeled training drawn from the database;
    /// remaining database samples form the unlabeled training pool.
    Standard,
    /// A fraction of classes is held out: training sees only the known
    /// classes, queries come from held-out classes, and the known classes'
    /// test images act as distraction in the database.
    Transfer,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Standard => "standard",
            Protocol::Transfer => "transfer",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Protocol::Standard),
            "transfer" => Ok(Protocol::Transfer),
            other => Err(Error::Parameter(format!("unknown protocol {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SplitConfig {
    pub n_query_per_class: usize,
    pub n_labeled_per_class: usize,
    /// Cap on the unlabeled training pool; `None` keeps every candidate.
    pub n_unlabeled: Option<usize>,
    pub protocol: Protocol,
    pub seed: u64,
    /// Transfer protocol: how many classes are held out for evaluation.
    /// Defaults to roughly a quarter of the classes.
    pub holdout_classes: Option<usize>,
    /// Transfer protocol: fraction of each class routed to its train set.
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            n_query_per_class: 100,
            n_labeled_per_class: 500,
            n_unlabeled: None,
            protocol: Protocol::Standard,
            seed: 0,
            holdout_classes: None,
            train_fraction: 0.5,
        }
    }
}

/// Disjoint id sets produced by [`make_split`]. All lists are sorted
/// ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub query: Vec<usize>,
    pub database: Vec<usize>,
    pub train_labeled: Vec<usize>,
    pub train_unlabeled: Vec<usize>,
    pub protocol: Protocol,
    pub seed: u64,
}

pub fn make_split(ds: &Dataset, cfg: &SplitConfig) -> Result<Split> {
    match cfg.protocol {
        Protocol::Standard => make_standard(ds, cfg),
        Protocol::Transfer => make_transfer(ds, cfg),
    }
}

fn make_standard(ds: &Dataset, cfg: &SplitConfig) -> Result<Split> {
    let groups = ds.ids_by_class();
    if groups.iter().all(|g| g.is_empty()) {
        return Err(Error::InfeasibleSplit(
            "dataset has no labeled samples".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let need = cfg.n_query_per_class + cfg.n_labeled_per_class;

    let mut query = Vec::new();
    let mut database = Vec::new();
    let mut train_labeled = Vec::new();
    let mut unlabeled_pool = Vec::new();
    for (class, group) in groups.iter().enumerate() {
        if group.len() < need {
            return Err(Error::InfeasibleSplit(format!(
                "class {class} has {} samples, needs {need}",
                group.len()
            )));
        }
        let mut ids = group.clone();
        ids.shuffle(&mut rng);
        query.extend_from_slice(&ids[..cfg.n_query_per_class]);
        let rest = &ids[cfg.n_query_per_class..];
        database.extend_from_slice(rest);
        train_labeled.extend_from_slice(&rest[..cfg.n_labeled_per_class]);
        unlabeled_pool.extend_from_slice(&rest[cfg.n_labeled_per_class..]);
    }
    // dataset-level unlabeled samples join the database as distraction and
    // are eligible for unlabeled training
    for id in 0..ds.n() {
        if ds.label_of(id).is_none() {
            database.push(id);
            unlabeled_pool.push(id);
        }
    }
    let train_unlabeled = cap_pool(unlabeled_pool, cfg.n_unlabeled, &mut rng);

    Ok(finish(
        query,
        database,
        train_labeled,
        train_unlabeled,
        cfg,
    ))
}

fn make_transfer(ds: &Dataset, cfg: &SplitConfig) -> Result<Split> {
    let groups = ds.ids_by_class();
    let c = groups.len();
    if c < 2 {
        return Err(Error::InfeasibleSplit(
            "transfer protocol needs at least two classes".into(),
        ));
    }
    if groups.iter().any(|g| g.is_empty()) {
        return Err(Error::InfeasibleSplit(
            "transfer protocol requires every class id in [0, c) to be populated".into(),
        ));
    }
    if ds.labels().iter().any(|l| l.is_none()) {
        return Err(Error::InfeasibleSplit(
            "transfer protocol requires a fully labeled dataset".into(),
        ));
    }
    if !(0.0..=1.0).contains(&cfg.train_fraction) {
        return Err(Error::Parameter(format!(
            "train_fraction must lie in [0,1], got {}",
            cfg.train_fraction
        )));
    }
    let n_holdout = cfg
        .holdout_classes
        .unwrap_or_else(|| ((c as f64 / 4.0).round() as usize).max(1));
    if n_holdout == 0 || n_holdout >= c {
        return Err(Error::Parameter(format!(
            "holdout_classes must lie in [1, {}), got {n_holdout}",
            c
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut class_order: Vec<usize> = (0..c).collect();
    class_order.shuffle(&mut rng);
    let held: Vec<usize> = class_order[..n_holdout].to_vec();
    let is_held = |class: usize| held.contains(&class);

    let mut train_known = Vec::new(); // train75
    let mut test_known = Vec::new(); // test75
    let mut train_held = Vec::new(); // train25
    let mut test_held = Vec::new(); // test25
    let mut train_known_by_class = vec![Vec::new(); c];
    for (class, group) in groups.iter().enumerate() {
        let mut ids = group.clone();
        ids.shuffle(&mut rng);
        let cut = (cfg.train_fraction * ids.len() as f64).floor() as usize;
        if is_held(class) {
            train_held.extend_from_slice(&ids[..cut]);
            test_held.extend_from_slice(&ids[cut..]);
        } else {
            train_known.extend_from_slice(&ids[..cut]);
            test_known.extend_from_slice(&ids[cut..]);
            train_known_by_class[class] = ids[..cut].to_vec();
        }
    }

    let mut train_labeled = Vec::new();
    let mut unlabeled_pool = Vec::new();
    for (class, members) in train_known_by_class.iter().enumerate() {
        if is_held(class) {
            continue;
        }
        if members.len() < cfg.n_labeled_per_class {
            return Err(Error::InfeasibleSplit(format!(
                "class {class}: {} training samples, needs {}",
                members.len(),
                cfg.n_labeled_per_class
            )));
        }
        train_labeled.extend_from_slice(&members[..cfg.n_labeled_per_class]);
        unlabeled_pool.extend_from_slice(&members[cfg.n_labeled_per_class..]);
    }
    let train_unlabeled = cap_pool(unlabeled_pool, cfg.n_unlabeled, &mut rng);

    let query = test_held;
    let mut database = train_held;
    database.extend_from_slice(&test_known);
    let _ = train_known;

    Ok(finish(
        query,
        database,
        train_labeled,
        train_unlabeled,
        cfg,
    ))
}

fn cap_pool(mut pool: Vec<usize>, cap: Option<usize>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if let Some(cap) = cap {
        if pool.len() > cap {
            pool.shuffle(rng);
            pool.truncate(cap);
        }
    }
    pool
}

fn finish(
    mut query: Vec<usize>,
    mut database: Vec<usize>,
    mut train_labeled: Vec<usize>,
    mut train_unlabeled: Vec<usize>,
    cfg: &SplitConfig,
) -> Split {
    query.sort_unstable();
    database.sort_unstable();
    train_labeled.sort_unstable();
    train_unlabeled.sort_unstable();
    Split {
        query,
        database,
        train_labeled,
        train_unlabeled,
        protocol: cfg.protocol,
        seed: cfg.seed,
    }
}

const SUBSETS: [&str; 4] = ["query", "database", "train_labeled", "train_unlabeled"];

/// Persist a split as four plain-text id lists in `dir`
/// (`query.ids`, `database.ids`, `train_labeled.ids`,
/// `train_unlabeled.ids`), each starting with a header line naming the
/// protocol and seed.
pub fn write_split(dir: &Path, split: &Split) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (subset, ids) in SUBSETS.iter().zip([
        &split.query,
        &split.database,
        &split.train_labeled,
        &split.train_unlabeled,
    ]) {
        let mut text = format!(
            "# semihash-split subset={subset} protocol={} seed={}\n",
            split.protocol.as_str(),
            split.seed
        );
        for id in ids {
            text.push_str(&format!("{id}\n"));
        }
        fs::write(dir.join(format!("{subset}.ids")), text)?;
    }
    Ok(())
}

/// Read one id-list file, returning `(ids, protocol, seed)`.
pub fn read_id_file(path: &Path) -> Result<(Vec<usize>, Protocol, u64)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format(format!("{}: empty id file", path.display())))?;
    if !header.starts_with("# semihash-split") {
        return Err(Error::Format(format!(
            "{}: missing split header",
            path.display()
        )));
    }
    let mut protocol = None;
    let mut seed = None;
    for token in header.trim_start_matches('#').split_whitespace() {
        if let Some(v) = token.strip_prefix("protocol=") {
            protocol = Some(Protocol::parse(v)?);
        } else if let Some(v) = token.strip_prefix("seed=") {
            seed = Some(v.parse::<u64>().map_err(|_| {
                Error::Parse(format!("{}: bad seed {v:?}", path.display()))
            })?);
        }
    }
    let (Some(protocol), Some(seed)) = (protocol, seed) else {
        return Err(Error::Format(format!(
            "{}: header lacks protocol or seed",
            path.display()
        )));
    };
    let mut ids = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        ids.push(line.parse::<usize>().map_err(|_| {
            Error::Parse(format!("{}: bad id {line:?}", path.display()))
        })?);
    }
    Ok((ids, protocol, seed))
}

pub fn read_split(dir: &Path) -> Result<Split> {
    let mut parts = Vec::new();
    let mut protocol = None;
    let mut seed = None;
    for subset in SUBSETS {
        let (ids, p, s) = read_id_file(&dir.join(format!("{subset}.ids")))?;
        if let (Some(p0), Some(s0)) = (protocol, seed) {
            if p0 != p || s0 != s {
                return Err(Error::Format(format!(
                    "{subset}.ids header disagrees with the other subsets"
                )));
            }
        }
        protocol = Some(p);
        seed = Some(s);
        parts.push(ids);
    }
    let train_unlabeled = parts.pop().unwrap();
    let train_labeled = parts.pop().unwrap();
    let database = parts.pop().unwrap();
    let query = parts.pop().unwrap();
    Ok(Split {
        query,
        database,
        train_labeled,
        train_unlabeled,
        protocol: protocol.unwrap(),
        seed: seed.unwrap(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    /// `per_class` samples for each of `c` classes, one feature per sample.
    fn toy_dataset(c: usize, per_class: usize) -> Dataset {
        let n = c * per_class;
        let features: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let labels = (0..n).map(|i| Some(i % c)).collect();
        Dataset::from_parts(1, features, labels).unwrap()
    }

    #[test]
    fn standard_split_shapes_match_config() {
        // 10 classes x 700: query 100/class, labeled 500/class
        let ds = toy_dataset(10, 700);
        let cfg = SplitConfig {
            n_query_per_class: 100,
            n_labeled_per_class: 500,
            seed: 7,
            ..Default::default()
        };
        let split = make_split(&ds, &cfg).unwrap();
        assert_eq!(split.query.len(), 1_000);
        assert_eq!(split.train_labeled.len(), 5_000);
        assert_eq!(split.database.len(), 6_000);
        assert_eq!(split.train_unlabeled.len(), 1_000);
    }

    #[test]
    fn query_and_database_are_disjoint() {
        let ds = toy_dataset(4, 30);
        for protocol in [Protocol::Standard, Protocol::Transfer] {
            let cfg = SplitConfig {
                n_query_per_class: 5,
                n_labeled_per_class: 5,
                protocol,
                seed: 3,
                ..Default::default()
            };
            let split = make_split(&ds, &cfg).unwrap();
            let q: HashSet<_> = split.query.iter().collect();
            assert!(split.database.iter().all(|id| !q.contains(id)));
        }
    }

    #[test]
    fn standard_train_labeled_is_subset_of_database() {
        let ds = toy_dataset(3, 40);
        let cfg = SplitConfig {
            n_query_per_class: 5,
            n_labeled_per_class: 10,
            seed: 1,
            ..Default::default()
        };
        let split = make_split(&ds, &cfg).unwrap();
        let db: HashSet<_> = split.database.iter().collect();
        assert!(split.train_labeled.iter().all(|id| db.contains(id)));
        let labeled: HashSet<_> = split.train_labeled.iter().collect();
        assert!(split.train_unlabeled.iter().all(|id| !labeled.contains(id)));
    }

    #[test]
    fn same_seed_gives_identical_split() {
        let ds = toy_dataset(5, 50);
        let cfg = SplitConfig {
            n_query_per_class: 4,
            n_labeled_per_class: 6,
            seed: 42,
            ..Default::default()
        };
        assert_eq!(make_split(&ds, &cfg).unwrap(), make_split(&ds, &cfg).unwrap());
        let other = SplitConfig { seed: 43, ..cfg };
        assert_ne!(make_split(&ds, &cfg).unwrap(), make_split(&ds, &other).unwrap());
    }

    #[test]
    fn infeasible_class_is_reported() {
        let ds = toy_dataset(2, 8);
        let cfg = SplitConfig {
            n_query_per_class: 5,
            n_labeled_per_class: 5,
            seed: 0,
            ..Default::default()
        };
        assert!(matches!(
            make_split(&ds, &cfg),
            Err(Error::InfeasibleSplit(_))
        ));
    }

    #[test]
    fn transfer_query_classes_are_exactly_the_held_out_quarter() {
        let ds = toy_dataset(10, 40);
        let cfg = SplitConfig {
            n_query_per_class: 2,
            n_labeled_per_class: 5,
            protocol: Protocol::Transfer,
            seed: 9,
            ..Default::default()
        };
        let split = make_split(&ds, &cfg).unwrap();
        let query_classes: HashSet<_> =
            split.query.iter().map(|&id| ds.label_of(id).unwrap()).collect();
        let train_classes: HashSet<_> = split
            .train_labeled
            .iter()
            .map(|&id| ds.label_of(id).unwrap())
            .collect();
        // ~25% of 10 classes held out
        assert_eq!(query_classes.len(), 3);
        assert_eq!(train_classes.len(), 7);
        assert!(query_classes.is_disjoint(&train_classes));
    }

    #[test]
    fn transfer_unlabeled_cap_is_respected() {
        let ds = toy_dataset(4, 40);
        let cfg = SplitConfig {
            n_query_per_class: 2,
            n_labeled_per_class: 5,
            n_unlabeled: Some(7),
            protocol: Protocol::Transfer,
            seed: 5,
            ..Default::default()
        };
        let split = make_split(&ds, &cfg).unwrap();
        assert_eq!(split.train_unlabeled.len(), 7);
    }

    #[test]
    fn split_files_roundtrip() {
        let ds = toy_dataset(3, 30);
        let cfg = SplitConfig {
            n_query_per_class: 3,
            n_labeled_per_class: 4,
            seed: 11,
            ..Default::default()
        };
        let split = make_split(&ds, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_split(dir.path(), &split).unwrap();
        let back = read_split(dir.path()).unwrap();
        assert_eq!(back, split);
    }
}
