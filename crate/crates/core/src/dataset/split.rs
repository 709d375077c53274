use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dialogue::{Subset, Thread};

/// Number of test threads to draw per subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Holdout(pub BTreeMap<Subset, usize>);

impl Default for Holdout {
    fn default() -> Self {
        Self(BTreeMap::from([(Subset::Mrg, 800), (Subset::Lc, 200)]))
    }
}

impl Holdout {
    pub fn new(entries: impl IntoIterator<Item = (Subset, usize)>) -> Self {
        Self(entries.into_iter().collect())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("subset {subset} has {available} threads, {requested} requested for testing")]
    Insufficient {
        subset: Subset,
        requested: usize,
        available: usize,
    },
    #[error("every remaining thread shares an image with the test split")]
    ImpossibleDisjointness,
}

/// Train/test split. `quarantine` holds threads that share an image with
/// the test split and therefore may not be used for training.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<Thread>,
    pub test: Vec<Thread>,
    pub quarantine: Vec<Thread>,
}

/// Draw the holdout per subset, then keep every image seen in the test
/// split out of training. Outputs preserve input order.
pub fn split_dataset(threads: &[Thread], holdout: &Holdout, seed: u64) -> Result<Split, SplitError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; threads.len()];

    for (&subset, &requested) in &holdout.0 {
        let mut candidates: Vec<usize> = threads
            .iter()
            .enumerate()
            .filter(|(_, t)| t.subset == subset)
            .map(|(i, _)| i)
            .collect();
        if candidates.len() < requested {
            return Err(SplitError::Insufficient {
                subset,
                requested,
                available: candidates.len(),
            });
        }
        candidates.shuffle(&mut rng);
        for &i in &candidates[..requested] {
            in_test[i] = true;
        }
    }

    let test_images: BTreeSet<&str> = threads
        .iter()
        .zip(&in_test)
        .filter(|(_, &t)| t)
        .map(|(th, _)| th.image_id.as_str())
        .collect();

    let mut split = Split::default();
    for (t, &is_test) in threads.iter().zip(&in_test) {
        if is_test {
            split.test.push(t.clone());
        } else if test_images.contains(t.image_id.as_str()) {
            split.quarantine.push(t.clone());
        } else {
            split.train.push(t.clone());
        }
    }
    if split.train.is_empty() && !split.quarantine.is_empty() {
        return Err(SplitError::ImpossibleDisjointness);
    }
    Ok(split)
}
