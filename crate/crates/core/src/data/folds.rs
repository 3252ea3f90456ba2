use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cross-validation fold over a binned timeline. Training data may be
/// split into two segments around the held-out blocks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train: Vec<Range<usize>>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

impl FoldSplit {
    pub fn train_indices(&self) -> Vec<usize> {
        self.train.iter().flat_map(|r| r.clone()).collect()
    }

    pub fn validation_indices(&self) -> Vec<usize> {
        self.validation.clone().collect()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.test.clone().collect()
    }

    pub fn n_train(&self) -> usize {
        self.train.iter().map(|r| r.len()).sum()
    }
}

/// Contiguous, unshuffled k-fold partition.
///
/// Fold `i` tests on the `i`-th block. Its validation block of
/// `round(val_fraction·n_bins)` bins sits immediately before the test block
/// (immediately after it for the first fold); everything else trains.
pub fn make_folds(n_bins: usize, n_folds: usize, val_fraction: f64) -> Result<Vec<FoldSplit>> {
    if n_folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {n_folds}")));
    }
    if !(val_fraction > 0.0 && val_fraction < 0.5) {
        return Err(Error::Config(format!(
            "val_fraction must lie in (0, 0.5), got {val_fraction}"
        )));
    }
    if n_bins < n_folds {
        return Err(Error::Config(format!(
            "{n_bins} bins cannot be split into {n_folds} folds"
        )));
    }
    let n_val = ((val_fraction * n_bins as f64).round() as usize).max(1);
    let boundary = |i: usize| i * n_bins / n_folds;
    let max_test = (0..n_folds).map(|i| boundary(i + 1) - boundary(i)).max().unwrap_or(0);
    if max_test + n_val >= n_bins {
        return Err(Error::Config(format!(
            "{n_bins} bins leave no training data for {n_folds} folds with val_fraction {val_fraction}"
        )));
    }

    let folds = (0..n_folds)
        .map(|i| {
            let test = boundary(i)..boundary(i + 1);
            let validation = if test.start >= n_val {
                test.start - n_val..test.start
            } else {
                test.end..test.end + n_val
            };
            let held_start = test.start.min(validation.start);
            let held_end = test.end.max(validation.end);
            let train = [0..held_start, held_end..n_bins]
                .into_iter()
                .filter(|r| !r.is_empty())
                .collect();
            FoldSplit {
                fold_index: i,
                train,
                validation,
                test,
            }
        })
        .collect();
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_folds_of_twenty() {
        let folds = make_folds(100, 5, 0.1).unwrap();
        assert_eq!(folds.len(), 5);
        for f in &folds {
            assert_eq!(f.test.len(), 20);
            assert_eq!(f.validation.len(), 10);
            assert_eq!(f.n_train(), 70);
        }
        assert_eq!(folds[0].validation, 20..30);
        assert_eq!(folds[1].validation, 10..20);
    }

    #[test]
    fn infeasible_partition() {
        assert!(matches!(make_folds(10, 20, 0.1), Err(Error::Config(_))));
        assert!(make_folds(10, 1, 0.1).is_err());
        assert!(make_folds(100, 5, 0.5).is_err());
    }

    #[test]
    fn test_blocks_partition_timeline() {
        let folds = make_folds(1000, 10, 0.1).unwrap();
        let concat: Vec<usize> = folds.iter().flat_map(|f| f.test_indices()).collect();
        assert_eq!(concat, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn each_fold_covers_timeline_disjointly() {
        for (n, k) in [(1000, 10), (97, 4), (13, 3)] {
            for f in make_folds(n, k, 0.15).unwrap() {
                let mut seen = vec![0u8; n];
                for i in f.train_indices().into_iter().chain(f.validation_indices()).chain(f.test_indices()) {
                    seen[i] += 1;
                }
                assert!(seen.iter().all(|&c| c == 1), "fold {} of ({n},{k})", f.fold_index);
                assert!(!f.validation.is_empty() && !f.test.is_empty());
            }
        }
    }
}
