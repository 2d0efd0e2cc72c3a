//! Mutual-information feature ranking: plain relevance ordering (MIFS) and
//! the greedy redundancy-penalized variant (mRMR, difference form).
//!
//! Continuous features are discretized with equal-frequency binning. Bin
//! edges are taken from the sorted values and deduplicated, so tied values
//! always land in the same bin; discrete features with fewer levels than
//! bins degrade gracefully to their own level partition.

use super::{FilterKind, FilterRanking, SelectionError};

/// Default bin count for mutual-information estimates.
pub const MI_BINS: usize = 32;

/// Equal-frequency bin codes for a continuous feature.
pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Result<Vec<u32>, SelectionError> {
    if bins < 1 {
        return Err(SelectionError::BadBinCount { bins });
    }
    if x.len() < bins {
        return Err(SelectionError::TooFewSamples { n: x.len(), bins });
    }
    if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
        return Err(SelectionError::NonFiniteValue { value: *bad });
    }
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut edges: Vec<f64> = Vec::with_capacity(bins - 1);
    for b in 1..bins {
        let v = sorted[b * x.len() / bins];
        if edges.last() != Some(&v) {
            edges.push(v);
        }
    }
    Ok(x.iter()
        .map(|v| edges.partition_point(|e| e <= v) as u32)
        .collect())
}

/// Mutual information in bits between two code sequences, from the empirical
/// contingency table.
pub fn mutual_information_codes(a: &[u32], b: &[u32]) -> Result<f64, SelectionError> {
    if a.len() != b.len() {
        return Err(SelectionError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(SelectionError::TooFewSamples { n: 0, bins: 1 });
    }
    let ka = *a.iter().max().unwrap() as usize + 1;
    let kb = *b.iter().max().unwrap() as usize + 1;
    let n = a.len() as f64;
    let mut joint = vec![0u64; ka * kb];
    let mut row = vec![0u64; ka];
    let mut col = vec![0u64; kb];
    for (&ai, &bi) in a.iter().zip(b) {
        joint[ai as usize * kb + bi as usize] += 1;
        row[ai as usize] += 1;
        col[bi as usize] += 1;
    }
    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let c = joint[i * kb + j];
            if c == 0 {
                continue;
            }
            let p = c as f64 / n;
            mi += p * (p * n * n / (row[i] as f64 * col[j] as f64)).log2();
        }
    }
    Ok(mi.max(0.0))
}

/// Mutual information in bits between an equal-frequency-binned continuous
/// feature and a discrete target.
pub fn mutual_information(x: &[f64], y: &[usize], bins: usize) -> Result<f64, SelectionError> {
    if x.len() != y.len() {
        return Err(SelectionError::LengthMismatch { left: x.len(), right: y.len() });
    }
    let codes = equal_frequency_bins(x, bins)?;
    let y_codes: Vec<u32> = y.iter().map(|&c| c as u32).collect();
    mutual_information_codes(&codes, &y_codes)
}

fn column(x: &[Vec<f64>], j: usize) -> Vec<f64> {
    x.iter().map(|row| row[j]).collect()
}

fn binned_columns(x: &[Vec<f64>], bins: usize) -> Result<Vec<Vec<u32>>, SelectionError> {
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    (0..d).map(|j| equal_frequency_bins(&column(x, j), bins)).collect()
}

/// Ranks every feature by I(feature; target), descending; ties broken by
/// ascending feature index.
pub fn rank_mifs(x: &[Vec<f64>], y: &[usize], bins: usize) -> Result<FilterRanking, SelectionError> {
    let y_codes: Vec<u32> = y.iter().map(|&c| c as u32).collect();
    let mut scored: Vec<(usize, f64)> = binned_columns(x, bins)?
        .iter()
        .enumerate()
        .map(|(j, codes)| Ok((j, mutual_information_codes(codes, &y_codes)?)))
        .collect::<Result<_, SelectionError>>()?;
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(FilterRanking {
        filter: FilterKind::Mifs,
        scored,
    })
}

/// Greedy mRMR ranking (difference form): the first feature maximizes
/// relevance I(f; y); each next maximizes I(f; y) − mean over the selected
/// set of I(f; s). After `k` greedy picks the remaining features are
/// appended by relevance. Scores record the criterion value at pick time.
pub fn rank_mrmr(x: &[Vec<f64>], y: &[usize], k: usize, bins: usize) -> Result<FilterRanking, SelectionError> {
    let d = x.first().map(|r| r.len()).unwrap_or(0);
    if k > d {
        return Err(SelectionError::TooManyRequested { requested: k, available: d });
    }
    let y_codes: Vec<u32> = y.iter().map(|&c| c as u32).collect();
    let codes = binned_columns(x, bins)?;
    let relevance: Vec<f64> = codes
        .iter()
        .map(|c| mutual_information_codes(c, &y_codes))
        .collect::<Result<_, _>>()?;

    let mut selected: Vec<(usize, f64)> = Vec::with_capacity(d);
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut redundancy_sum = vec![0.0; d];

    while selected.len() < k && !remaining.is_empty() {
        let n_sel = selected.len();
        let mut best: Option<(usize, f64)> = None;
        for &j in &remaining {
            let criterion = if n_sel == 0 {
                relevance[j]
            } else {
                relevance[j] - redundancy_sum[j] / n_sel as f64
            };
            // strict improvement keeps the lowest index on ties
            if best.is_none_or(|(_, b)| criterion > b) {
                best = Some((j, criterion));
            }
        }
        let (pick, score) = best.unwrap();
        selected.push((pick, score));
        remaining.retain(|&j| j != pick);
        for &j in &remaining {
            redundancy_sum[j] += mutual_information_codes(&codes[j], &codes[pick])?;
        }
    }

    let mut rest: Vec<(usize, f64)> = remaining.into_iter().map(|j| (j, relevance[j])).collect();
    rest.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    selected.extend(rest);
    Ok(FilterRanking {
        filter: FilterKind::Mrmr,
        scored: selected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn deterministic_feature_equals_label_gives_one_bit() {
        let n = 1000;
        let x: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let mi = mutual_information(&x, &y, 32).unwrap();
        assert!((mi - 1.0).abs() < 1e-12, "mi = {mi}");
    }

    #[test]
    fn independent_noise_has_near_zero_mi() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(51);
        let n = 10_000;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..2usize)).collect();
        let mi = mutual_information(&x, &y, 32).unwrap();
        assert!(mi >= 0.0);
        assert!(mi < 0.02, "mi = {mi}");
    }

    #[test]
    fn matches_hand_computed_contingency_table() {
        // 4-level x, binary y, joint counts over 16 samples:
        //       y=0  y=1
        // x=0    4    0
        // x=1    2    2
        // x=2    1    3
        // x=3    0    4
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (level, (n0, n1)) in [(4, 0), (2, 2), (1, 3), (0, 4)].iter().enumerate() {
            for _ in 0..*n0 {
                x.push(level as f64);
                y.push(0usize);
            }
            for _ in 0..*n1 {
                x.push(level as f64);
                y.push(1usize);
            }
        }
        // p(x) = 1/4 each, p(y) = 1/2 each
        let expected: f64 = [4.0f64, 2.0, 2.0, 1.0, 3.0, 4.0]
            .iter()
            .map(|c| {
                let p = c / 16.0;
                p * (p / (0.25 * 0.5)).log2()
            })
            .sum();
        let mi = mutual_information(&x, &y, 16).unwrap();
        assert!((mi - expected).abs() < 1e-10, "{mi} vs {expected}");
    }

    #[test]
    fn mi_is_symmetric_for_discretized_features() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(52);
        let a: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v * 0.5 + rng.random_range(-0.3..0.3)).collect();
        let ca = equal_frequency_bins(&a, 32).unwrap();
        let cb = equal_frequency_bins(&b, 32).unwrap();
        let ab = mutual_information_codes(&ca, &cb).unwrap();
        let ba = mutual_information_codes(&cb, &ca).unwrap();
        assert!(ab >= 0.0);
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn binning_keeps_ties_together() {
        let x = vec![1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0];
        let codes = equal_frequency_bins(&x, 8).unwrap();
        assert_eq!(codes[0], codes[3]);
        assert_eq!(codes[4], codes[5]);
        assert_ne!(codes[0], codes[4]);
        assert_ne!(codes[4], codes[6]);
    }

    #[test]
    fn too_few_samples_is_an_error() {
        let x = vec![1.0; 10];
        let y = vec![0usize; 10];
        assert!(matches!(
            mutual_information(&x, &y, 32),
            Err(SelectionError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(matches!(
            mutual_information(&[1.0; 40], &vec![0usize; 39], 8),
            Err(SelectionError::LengthMismatch { .. })
        ));
    }

    fn noise_matrix(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
    }

    #[test]
    fn mifs_ranks_label_copy_first() {
        let mut x = noise_matrix(600, 5, 53);
        let y: Vec<usize> = (0..600).map(|i| i % 3).collect();
        for (i, row) in x.iter_mut().enumerate() {
            row[3] = y[i] as f64;
        }
        let ranking = rank_mifs(&x, &y, 32).unwrap();
        assert_eq!(ranking.scored[0].0, 3);
        assert_eq!(ranking.scored.len(), 5);
    }

    #[test]
    fn mifs_breaks_ties_by_index() {
        let mut x = noise_matrix(600, 4, 54);
        let y: Vec<usize> = (0..600).map(|i| i % 2).collect();
        for (i, row) in x.iter_mut().enumerate() {
            row[2] = y[i] as f64;
            row[1] = y[i] as f64; // identical copy at lower index
        }
        let ranking = rank_mifs(&x, &y, 32).unwrap();
        assert_eq!(ranking.scored[0].0, 1);
        assert_eq!(ranking.scored[1].0, 2);
    }

    #[test]
    fn mifs_scores_match_independent_mi() {
        let x = noise_matrix(400, 6, 55);
        let y: Vec<usize> = (0..400).map(|i| (i / 100) % 2).collect();
        let ranking = rank_mifs(&x, &y, 32).unwrap();
        for &(j, score) in &ranking.scored {
            let direct = mutual_information(&column(&x, j), &y, 32).unwrap();
            assert!((score - direct).abs() < 1e-12);
            assert!(score < 0.05, "noise feature {j} scored {score}");
        }
        let order: Vec<f64> = ranking.scored.iter().map(|s| s.1).collect();
        assert!(order.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn mrmr_defers_redundant_copy() {
        // informative feature 0, exact copy at 1, weaker independent at 2
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(56);
        let n = 2000;
        let y: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = y[i] as f64 + rng.random_range(-0.05..0.05);
                let b = if rng.random_range(0.0..1.0) < 0.75 { y[i] as f64 } else { 1.0 - y[i] as f64 };
                vec![a, a, b + rng.random_range(-0.01..0.01)]
            })
            .collect();
        let ranking = rank_mrmr(&x, &y, 3, 32).unwrap();
        let order: Vec<usize> = ranking.scored.iter().map(|s| s.0).collect();
        assert_eq!(order, vec![0, 2, 1]);
    }

    #[test]
    fn mrmr_first_pick_equals_mifs_first_pick() {
        let mut x = noise_matrix(800, 8, 57);
        let y: Vec<usize> = (0..800).map(|i| i % 3).collect();
        for (i, row) in x.iter_mut().enumerate() {
            row[5] = y[i] as f64 * 2.0;
        }
        let mifs = rank_mifs(&x, &y, 32).unwrap();
        let mrmr = rank_mrmr(&x, &y, 4, 32).unwrap();
        assert_eq!(mifs.scored[0].0, mrmr.scored[0].0);
        assert!((mifs.scored[0].1 - mrmr.scored[0].1).abs() < 1e-12);
    }

    #[test]
    fn mrmr_single_feature_is_trivially_first() {
        let x = noise_matrix(100, 1, 58);
        let y: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let ranking = rank_mrmr(&x, &y, 1, 16).unwrap();
        assert_eq!(ranking.scored.len(), 1);
        assert_eq!(ranking.scored[0].0, 0);
    }

    #[test]
    fn all_constant_features_rank_by_index() {
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![1.0, 2.0, 3.0]).collect();
        let y: Vec<usize> = (0..200).map(|i| i % 2).collect();
        let ranking = rank_mrmr(&x, &y, 3, 16).unwrap();
        let order: Vec<usize> = ranking.scored.iter().map(|s| s.0).collect();
        assert_eq!(order, vec![0, 1, 2]);
        assert!(ranking.scored.iter().all(|s| s.1.abs() < 1e-12));
    }

    #[test]
    fn mrmr_greedy_matches_exhaustive_criterion() {
        // brute-force check of the greedy rule on random 3-feature problems
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(59);
        for round in 0..20 {
            let n = 400;
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..2usize)).collect();
            let x: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..3)
                        .map(|j| y[i] as f64 * rng.random_range(0.0..(j + 1) as f64) + rng.random_range(-1.0..1.0))
                        .collect()
                })
                .collect();
            let ranking = rank_mrmr(&x, &y, 3, 32).unwrap();

            // exhaustive evaluation of the same criterion
            let codes: Vec<Vec<u32>> = (0..3).map(|j| equal_frequency_bins(&column(&x, j), 32).unwrap()).collect();
            let y_codes: Vec<u32> = y.iter().map(|&c| c as u32).collect();
            let rel: Vec<f64> = (0..3).map(|j| mutual_information_codes(&codes[j], &y_codes).unwrap()).collect();
            let pair = |a: usize, b: usize| mutual_information_codes(&codes[a], &codes[b]).unwrap();

            let mut selected: Vec<usize> = Vec::new();
            let mut remaining: Vec<usize> = (0..3).collect();
            while !remaining.is_empty() {
                let mut best: Option<(usize, f64)> = None;
                for &j in &remaining {
                    let crit = if selected.is_empty() {
                        rel[j]
                    } else {
                        rel[j] - selected.iter().map(|&s| pair(j, s)).sum::<f64>() / selected.len() as f64
                    };
                    if best.is_none_or(|(_, b)| crit > b) {
                        best = Some((j, crit));
                    }
                }
                let (pick, _) = best.unwrap();
                selected.push(pick);
                remaining.retain(|&j| j != pick);
            }
            let greedy: Vec<usize> = ranking.scored.iter().map(|s| s.0).collect();
            assert_eq!(greedy, selected, "round {round}");
        }
    }
}
