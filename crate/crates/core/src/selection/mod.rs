//! Two-stage feature selection.
//!
//! Stage one rebalances the classes and ranks every feature with four
//! filters (MIFS, mRMR, elastic net, GBT split gain); the union of each
//! filter's ten best features caps the candidate set at 40. Stage two runs
//! a backward wrapper: features are greedily eliminated as long as the
//! scene-wise F1 of the wrapped detector does not drop.

pub mod elastic_net;
pub mod mi;

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::gbt::{train_gbt, GbtParams};
use crate::rng::rng_for_stream;
use crate::scene::ClassLabel;

pub use elastic_net::{fit_multinomial_elastic_net, ElasticNetConfig, ElasticNetFit};
pub use mi::{equal_frequency_bins, mutual_information, rank_mifs, rank_mrmr, MI_BINS};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{n} samples is too few for {bins} bins")]
    TooFewSamples { n: usize, bins: usize },
    #[error("bin count {bins} is invalid")]
    BadBinCount { bins: usize },
    #[error("non-finite value {value} in feature data")]
    NonFiniteValue { value: f64 },
    #[error("requested {requested} features but only {available} exist")]
    TooManyRequested { requested: usize, available: usize },
    #[error("class `{0}` missing from labels")]
    MissingClass(ClassLabel),
    #[error("rebalance target for `{0}` must be positive")]
    ZeroTarget(ClassLabel),
    #[error("optimizer did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },
    #[error("no candidate features")]
    EmptyCandidates,
    #[error("wrapper evaluation failed: {0}")]
    Evaluator(String),
    #[error("classifier training failed: {0}")]
    Train(String),
}

/// Which filter produced a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Mifs,
    Mrmr,
    ElasticNet,
    Gbt,
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FilterKind::Mifs => "mifs",
            FilterKind::Mrmr => "mrmr",
            FilterKind::ElasticNet => "elastic_net",
            FilterKind::Gbt => "gbt",
        };
        f.write_str(s)
    }
}

/// Full feature ordering produced by one filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterRanking {
    pub filter: FilterKind,
    /// (feature index, score) in rank order; every feature appears once.
    pub scored: Vec<(usize, f64)>,
}

impl FilterRanking {
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        self.scored.iter().take(k).map(|s| s.0).collect()
    }
}

/// Outcome of the two-stage selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectedFeatures {
    /// Surviving feature indices, ascending.
    pub indices: Vec<usize>,
    /// Which filters proposed each candidate (union stage), for all union
    /// members including eliminated ones.
    pub provenance: BTreeMap<usize, Vec<FilterKind>>,
    /// Scene F1 achieved by the surviving set in the wrapper.
    pub wrapper_f1: f64,
}

/// Per-class resampling targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RebalanceSpec {
    pub seed: u64,
    /// Target sample count per class.
    pub targets: BTreeMap<ClassLabel, usize>,
}

impl RebalanceSpec {
    pub fn uniform(seed: u64, per_class: usize) -> RebalanceSpec {
        RebalanceSpec {
            seed,
            targets: ClassLabel::ALL.iter().map(|&c| (c, per_class)).collect(),
        }
    }
}

/// Resamples frame indices so every class hits its target count exactly.
///
/// Classes above target are undersampled without replacement; classes below
/// target keep all their frames and duplicate randomly drawn ones. Output is
/// grouped by class and deterministic for a fixed spec.
pub fn rebalance(labels: &[ClassLabel], spec: &RebalanceSpec) -> Result<Vec<usize>, SelectionError> {
    let mut out = Vec::new();
    for (class_slot, (&class, &target)) in spec.targets.iter().enumerate() {
        if target == 0 {
            return Err(SelectionError::ZeroTarget(class));
        }
        let members: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            return Err(SelectionError::MissingClass(class));
        }
        let mut rng = rng_for_stream(spec.seed, class_slot as u64);
        if target <= members.len() {
            let mut chosen: Vec<usize> = members
                .choose_multiple(&mut rng, target)
                .cloned()
                .collect();
            chosen.sort_unstable();
            out.extend(chosen);
        } else {
            let full_repeats = target / members.len();
            let remainder = target % members.len();
            for _ in 0..full_repeats {
                out.extend(&members);
            }
            let mut extra: Vec<usize> = members
                .choose_multiple(&mut rng, remainder)
                .cloned()
                .collect();
            extra.sort_unstable();
            out.extend(extra);
        }
    }
    Ok(out)
}

/// Model-based filter choice for [`rank_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelFilter {
    ElasticNet,
    Gbt,
}

/// Ranks features by a fitted model: elastic net scores by the largest
/// absolute multinomial coefficient, GBT by total split gain.
pub fn rank_model(x: &[Vec<f64>], y: &[usize], which: ModelFilter, seed: u64) -> Result<FilterRanking, SelectionError> {
    let scores: Vec<f64> = match which {
        ModelFilter::ElasticNet => {
            let config = ElasticNetConfig { seed, ..ElasticNetConfig::default() };
            fit_multinomial_elastic_net(x, y, &config)?.feature_scores()
        }
        ModelFilter::Gbt => {
            let labels: Vec<ClassLabel> = y.iter().map(|&c| ClassLabel::from_index(c)).collect();
            let params = GbtParams { seed, ..GbtParams::default() };
            let model = train_gbt(x, &labels, &params).map_err(|e| SelectionError::Train(e.to_string()))?;
            model.feature_gain.clone()
        }
    };
    let mut scored: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(FilterRanking {
        filter: match which {
            ModelFilter::ElasticNet => FilterKind::ElasticNet,
            ModelFilter::Gbt => FilterKind::Gbt,
        },
        scored,
    })
}

/// Union of each ranking's first `k` feature indices, ascending.
pub fn union_top_k(rankings: &[FilterRanking], k: usize) -> Vec<usize> {
    let mut union: Vec<usize> = rankings.iter().flat_map(|r| r.top_k(k)).collect();
    union.sort_unstable();
    union.dedup();
    union
}

/// Provenance map of the union stage: which filters put each feature in
/// their top `k`.
pub fn union_provenance(rankings: &[FilterRanking], k: usize) -> BTreeMap<usize, Vec<FilterKind>> {
    let mut map: BTreeMap<usize, Vec<FilterKind>> = BTreeMap::new();
    for ranking in rankings {
        for idx in ranking.top_k(k) {
            let entry = map.entry(idx).or_default();
            if !entry.contains(&ranking.filter) {
                entry.push(ranking.filter);
            }
        }
    }
    for filters in map.values_mut() {
        filters.sort();
    }
    map
}

/// Greedy backward elimination on scene F1.
///
/// `evaluate` trains the wrapped detector on a feature subset and returns
/// its validation scene F1. Each round removes the single feature whose
/// removal yields the best F1, as long as that F1 stays within 1e-9 of the
/// best seen so far; ties remove the highest feature index.
pub fn backward_select<E>(
    candidates: &[usize],
    provenance: BTreeMap<usize, Vec<FilterKind>>,
    evaluate: E,
) -> Result<SelectedFeatures, SelectionError>
where
    E: Fn(&[usize]) -> Result<f64, SelectionError>,
{
    if candidates.is_empty() {
        return Err(SelectionError::EmptyCandidates);
    }
    let mut current: Vec<usize> = candidates.to_vec();
    current.sort_unstable();
    current.dedup();

    let mut achieved = evaluate(&current)?;
    let mut best_so_far = achieved;

    while current.len() > 1 {
        let mut best_removal: Option<(usize, f64)> = None;
        for (slot, &feature) in current.iter().enumerate() {
            let mut reduced = current.clone();
            reduced.remove(slot);
            let f1 = evaluate(&reduced)?;
            // ties prefer dropping the highest index, i.e. later candidates
            let better = match best_removal {
                None => true,
                Some((best_feature, best_f1)) => f1 > best_f1 || (f1 == best_f1 && feature > best_feature),
            };
            if better {
                best_removal = Some((feature, f1));
            }
        }
        let (feature, f1) = best_removal.unwrap();
        if f1 >= best_so_far - 1e-9 {
            current.retain(|&f| f != feature);
            achieved = f1;
            best_so_far = best_so_far.max(f1);
        } else {
            break;
        }
    }

    Ok(SelectedFeatures {
        indices: current,
        provenance,
        wrapper_f1: achieved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(waiting: usize, starting: usize, moving: usize) -> Vec<ClassLabel> {
        let mut v = vec![ClassLabel::Waiting; waiting];
        v.extend(vec![ClassLabel::Starting; starting]);
        v.extend(vec![ClassLabel::Moving; moving]);
        v
    }

    #[test]
    fn rebalance_undersamples_majority_without_replacement() {
        let y = labels(1000, 100, 100);
        let spec = RebalanceSpec::uniform(7, 100);
        let idx = rebalance(&y, &spec).unwrap();
        assert_eq!(idx.len(), 300);
        let mut counts = [0usize; 3];
        for &i in &idx {
            counts[y[i].index()] += 1;
        }
        assert_eq!(counts, [100, 100, 100]);
        // waiting indices must be unique (no replacement)
        let mut waiting: Vec<usize> = idx.iter().filter(|&&i| y[i] == ClassLabel::Waiting).cloned().collect();
        waiting.sort_unstable();
        waiting.dedup();
        assert_eq!(waiting.len(), 100);
    }

    #[test]
    fn rebalance_oversamples_by_duplicating() {
        let y = labels(100, 50, 100);
        let spec = RebalanceSpec::uniform(7, 100);
        let idx = rebalance(&y, &spec).unwrap();
        assert_eq!(idx.len(), 300);
        let starting: Vec<usize> = idx.iter().filter(|&&i| y[i] == ClassLabel::Starting).cloned().collect();
        assert_eq!(starting.len(), 100);
        // only duplicates of existing indices
        assert!(starting.iter().all(|&i| (100..150).contains(&i)));
        // every original starting frame appears at least once (full repeat)
        for original in 100..150 {
            assert!(starting.contains(&original));
        }
    }

    #[test]
    fn rebalance_is_deterministic() {
        let y = labels(500, 80, 220);
        let spec = RebalanceSpec::uniform(99, 150);
        assert_eq!(rebalance(&y, &spec).unwrap(), rebalance(&y, &spec).unwrap());
        let other = RebalanceSpec::uniform(98, 150);
        assert_ne!(rebalance(&y, &spec).unwrap(), rebalance(&y, &other).unwrap());
    }

    #[test]
    fn rebalance_missing_class_is_an_error() {
        let y = labels(100, 0, 100);
        let err = rebalance(&y, &RebalanceSpec::uniform(1, 50)).unwrap_err();
        assert!(matches!(err, SelectionError::MissingClass(ClassLabel::Starting)));
    }

    fn ranking(filter: FilterKind, indices: &[usize]) -> FilterRanking {
        FilterRanking {
            filter,
            scored: indices.iter().enumerate().map(|(rank, &i)| (i, -(rank as f64))).collect(),
        }
    }

    #[test]
    fn union_of_disjoint_top10s_has_40_features() {
        let rankings: Vec<FilterRanking> = (0..4)
            .map(|f| {
                let base = f * 10;
                ranking(
                    [FilterKind::Mifs, FilterKind::Mrmr, FilterKind::ElasticNet, FilterKind::Gbt][f],
                    &(base..base + 10).collect::<Vec<_>>(),
                )
            })
            .collect();
        assert_eq!(union_top_k(&rankings, 10).len(), 40);
    }

    #[test]
    fn union_of_identical_top10s_has_10_features() {
        let indices: Vec<usize> = (5..15).collect();
        let rankings = vec![
            ranking(FilterKind::Mifs, &indices),
            ranking(FilterKind::Mrmr, &indices),
            ranking(FilterKind::ElasticNet, &indices),
            ranking(FilterKind::Gbt, &indices),
        ];
        let union = union_top_k(&rankings, 10);
        assert_eq!(union, indices);
        let prov = union_provenance(&rankings, 10);
        assert_eq!(prov[&5].len(), 4);
    }

    #[test]
    fn union_with_partial_overlap() {
        let a: Vec<usize> = (0..10).collect();
        let b: Vec<usize> = (7..17).collect(); // shares 7, 8, 9
        let rankings = vec![ranking(FilterKind::Mifs, &a), ranking(FilterKind::Mrmr, &b)];
        assert_eq!(union_top_k(&rankings, 10).len(), 17);
    }

    #[test]
    fn backward_select_drops_noise_keeps_informative() {
        // evaluator: F1 = 0.9 if feature 0 present, minus 0.2 if feature 1 present
        let eval = |subset: &[usize]| -> Result<f64, SelectionError> {
            let mut f1: f64 = 0.1;
            if subset.contains(&0) {
                f1 = 0.9;
            }
            if subset.contains(&1) {
                f1 -= 0.2;
            }
            Ok(f1.max(0.0))
        };
        let selected = backward_select(&[0, 1], BTreeMap::new(), eval).unwrap();
        assert_eq!(selected.indices, vec![0]);
        assert!((selected.wrapper_f1 - 0.9).abs() < 1e-12);

        // exhaustive check over all nonempty subsets of {0, 1}
        let all: Vec<(Vec<usize>, f64)> = vec![
            (vec![0], eval(&[0]).unwrap()),
            (vec![1], eval(&[1]).unwrap()),
            (vec![0, 1], eval(&[0, 1]).unwrap()),
        ];
        let best = all.iter().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap()).unwrap();
        assert_eq!(best.0, selected.indices);
    }

    #[test]
    fn backward_select_keeps_single_candidate() {
        let selected = backward_select(&[3], BTreeMap::new(), |_| Ok(0.5)).unwrap();
        assert_eq!(selected.indices, vec![3]);
        assert_eq!(selected.wrapper_f1, 0.5);
    }

    #[test]
    fn backward_select_removes_exactly_one_redundant_copy() {
        // two redundant copies (2, 5): F1 = 0.8 while at least one present
        let eval = |subset: &[usize]| -> Result<f64, SelectionError> {
            Ok(if subset.contains(&2) || subset.contains(&5) { 0.8 } else { 0.0 })
        };
        let selected = backward_select(&[2, 5], BTreeMap::new(), eval).unwrap();
        assert_eq!(selected.indices.len(), 1);
        assert_eq!(selected.indices, vec![2], "tie removes the higher index");

        // exhaustive: both singletons score 0.8, the pair scores 0.8; greedy
        // must end at a singleton with F1 0.8
        assert!((selected.wrapper_f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn backward_select_never_ends_below_full_set_f1() {
        let eval = |subset: &[usize]| -> Result<f64, SelectionError> {
            // each feature adds 0.1
            Ok(subset.len() as f64 * 0.1)
        };
        let full: Vec<usize> = (0..5).collect();
        let full_f1 = eval(&full).unwrap();
        let selected = backward_select(&full, BTreeMap::new(), eval).unwrap();
        assert!(selected.wrapper_f1 >= full_f1 - 1e-9);
        assert_eq!(selected.indices, full);
    }

    #[test]
    fn backward_select_propagates_evaluator_failure() {
        let eval = |_: &[usize]| -> Result<f64, SelectionError> { Err(SelectionError::Evaluator("boom".into())) };
        assert!(backward_select(&[1, 2], BTreeMap::new(), eval).is_err());
    }

    #[test]
    fn empty_candidates_is_an_error() {
        assert!(matches!(
            backward_select(&[], BTreeMap::new(), |_| Ok(0.0)),
            Err(SelectionError::EmptyCandidates)
        ));
    }
}
