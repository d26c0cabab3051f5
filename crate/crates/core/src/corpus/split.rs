use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, NewsPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

impl SplitSizes {
    /// Reference proportions 211,744 / 1,200 / 1,200 out of 214,120, scaled
    /// to `n` pairs (dev and test get at least one pair each when n ≥ 3).
    pub fn reference_proportions(n: usize) -> Self {
        let held = |n: usize| -> usize {
            let v = (n as f64 * 1_200.0 / 214_120.0).round() as usize;
            if n >= 3 {
                v.max(1)
            } else {
                v
            }
        };
        let dev = held(n);
        let test = held(n).min(n - dev);
        SplitSizes { train: n - dev - test, dev, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.dev + self.test
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<NewsPair>,
    pub dev: Vec<NewsPair>,
    pub test: Vec<NewsPair>,
}

/// Seeded shuffle, then consecutive train/dev/test slices.
pub fn split(pairs: &[NewsPair], sizes: SplitSizes, seed: u64) -> Result<Split, CorpusError> {
    if sizes.total() > pairs.len() {
        return Err(CorpusError::SplitTooLarge { requested: sizes.total(), available: pairs.len() });
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = |range: std::ops::Range<usize>| order[range].iter().map(|&i| pairs[i].clone()).collect();
    let a = sizes.train;
    let b = a + sizes.dev;
    let c = b + sizes.test;
    Ok(Split { train: take(0..a), dev: take(a..b), test: take(b..c) })
}

/// Split by explicit id lists; pairs in none of the lists are left out.
pub fn split_by_ids(
    pairs: &[NewsPair],
    train: &[String],
    dev: &[String],
    test: &[String],
) -> Result<Split, CorpusError> {
    let by_id: HashMap<&str, &NewsPair> = pairs.iter().map(|p| (p.id.as_str(), p)).collect();
    let pick = |ids: &[String]| -> Result<Vec<NewsPair>, CorpusError> {
        ids.iter()
            .map(|id| by_id.get(id.as_str()).map(|p| (*p).clone()).ok_or_else(|| CorpusError::UnknownId(id.clone())))
            .collect()
    };
    Ok(Split { train: pick(train)?, dev: pick(dev)?, test: pick(test)? })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn pairs(n: usize) -> Vec<NewsPair> {
        (0..n)
            .map(|i| NewsPair {
                id: format!("p{i}"),
                article: vec!["a".into()],
                summary: [vec!["x".into()], vec!["y".into()], vec!["z".into()]],
                label: None,
                category: None,
            })
            .collect()
    }

    #[test]
    fn disjoint_cover() {
        let s = split(&pairs(4), SplitSizes { train: 2, dev: 1, test: 1 }, 3).unwrap();
        let ids: HashSet<_> = s.train.iter().chain(&s.dev).chain(&s.test).map(|p| p.id.clone()).collect();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn same_seed_same_split() {
        let p = pairs(20);
        let sizes = SplitSizes { train: 10, dev: 5, test: 5 };
        assert_eq!(split(&p, sizes, 9).unwrap(), split(&p, sizes, 9).unwrap());
        assert_ne!(split(&p, sizes, 9).unwrap(), split(&p, sizes, 10).unwrap());
    }

    #[test]
    fn oversized_request_rejected() {
        let err = split(&pairs(3), SplitSizes { train: 2, dev: 1, test: 1 }, 0).unwrap_err();
        assert!(matches!(err, CorpusError::SplitTooLarge { requested: 4, available: 3 }));
    }

    #[test]
    fn reference_proportions_at_full_scale() {
        assert_eq!(SplitSizes::reference_proportions(214_120), SplitSizes { train: 211_720, dev: 1_200, test: 1_200 });
        let small = SplitSizes::reference_proportions(100);
        assert_eq!(small.total(), 100);
        assert_eq!((small.dev, small.test), (1, 1));
    }

    #[test]
    fn by_ids() {
        let p = pairs(5);
        let s = split_by_ids(&p, &["p0".into(), "p1".into()], &["p2".into()], &["p4".into()]).unwrap();
        assert_eq!(s.test[0].id, "p4");
        assert!(split_by_ids(&p, &["nope".into()], &[], &[]).is_err());
    }
}
