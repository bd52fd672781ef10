//! Pair-score records and rating aggregation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One human rating of a (test, reference) utterance pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairRecord {
    pub pair_id: String,
    pub system_id: String,
    pub test_path: String,
    pub ref_path: String,
    /// 1 (same speaker) ..= 4 (different speakers).
    pub score: u8,
    pub split: Split,
}

impl PairRecord {
    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.score) {
            return Err(Error::RatingOutOfRange(self.score as i64));
        }
        if self.test_path.is_empty() || self.ref_path.is_empty() {
            return Err(Error::InvalidArgument("empty utterance path".into()));
        }
        if self.pair_id.is_empty() {
            return Err(Error::InvalidArgument("empty pair_id".into()));
        }
        Ok(())
    }
}

/// All ratings of one pair collapsed to their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedPair {
    pub pair_id: String,
    pub system_id: String,
    pub test_path: String,
    pub ref_path: String,
    pub mean_score: f64,
    pub rating_count: u32,
    /// Number of ratings per label 1..=4.
    pub histogram: [u32; 4],
}

impl GroupedPair {
    /// Most frequent rating, ties toward the lower label.
    pub fn majority_rating(&self) -> u8 {
        let mut best = 0;
        for i in 1..4 {
            if self.histogram[i] > self.histogram[best] {
                best = i;
            }
        }
        best as u8 + 1
    }
}

/// One group per distinct `pair_id`, in order of first appearance.
pub fn group_by_pair(records: &[PairRecord]) -> Vec<GroupedPair> {
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut sums: Vec<u32> = Vec::new();
    let mut groups: Vec<GroupedPair> = Vec::new();
    for r in records {
        let i = *index.entry(r.pair_id.as_str()).or_insert_with(|| {
            groups.push(GroupedPair {
                pair_id: r.pair_id.clone(),
                system_id: r.system_id.clone(),
                test_path: r.test_path.clone(),
                ref_path: r.ref_path.clone(),
                mean_score: 0.0,
                rating_count: 0,
                histogram: [0; 4],
            });
            sums.push(0);
            groups.len() - 1
        });
        let g = &mut groups[i];
        g.rating_count += 1;
        sums[i] += r.score as u32;
        if (1..=4).contains(&r.score) {
            g.histogram[r.score as usize - 1] += 1;
        }
    }
    for (g, s) in groups.iter_mut().zip(sums) {
        g.mean_score = s as f64 / g.rating_count as f64;
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn rec(pair: &str, score: u8) -> PairRecord {
        PairRecord {
            pair_id: pair.into(),
            system_id: "S".into(),
            test_path: format!("{pair}_t.wav"),
            ref_path: format!("{pair}_r.wav"),
            score,
            split: Split::Test,
        }
    }

    #[test]
    fn averaging_rule() {
        let g = group_by_pair(&[rec("p", 2), rec("p", 3)]);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].mean_score, 2.5);
        assert_eq!(g[0].rating_count, 2);
        let g = group_by_pair(&[rec("q", 4)]);
        assert_eq!(g[0].mean_score, 4.0);
    }

    #[test]
    fn first_appearance_order() {
        let g = group_by_pair(&[rec("c", 1), rec("a", 2), rec("c", 3), rec("b", 4)]);
        let ids: Vec<_> = g.iter().map(|g| g.pair_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);
        assert_eq!(g.iter().map(|g| g.rating_count).sum::<u32>(), 4);
    }

    #[test]
    fn majority_ties_go_low() {
        let g = group_by_pair(&[rec("p", 4), rec("p", 2), rec("p", 2), rec("p", 4)]);
        assert_eq!(g[0].majority_rating(), 2);
    }

    #[test]
    fn validation() {
        assert!(rec("p", 0).validate().is_err());
        assert!(rec("p", 5).validate().is_err());
        assert!(rec("p", 3).validate().is_ok());
    }
}
