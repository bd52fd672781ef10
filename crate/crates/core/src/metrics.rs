//! Evaluation protocol: ACC, LCC, SRCC and MSE at utterance and system level.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::GroupedPair;
use crate::error::{Error, Result};

/// Round half up, then clamp to the 1..=4 rating scale.
pub fn round_clip(score: f64) -> u8 {
    libm::floor(score + 0.5).clamp(1.0, 4.0) as u8
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample Pearson correlation. Undefined for constant inputs.
pub fn pearson_lcc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::WidthMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::Undefined("fewer than two samples"));
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("zero variance"));
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// 1-based fractional ranks; tied values share their average rank.
pub fn fractional_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation: Pearson over fractional ranks.
pub fn spearman_srcc(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::WidthMismatch { expected: x.len(), got: y.len() });
    }
    pearson_lcc(&fractional_ranks(x), &fractional_ranks(y))
}

pub fn mse(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Utterance,
    System,
}

/// Correlations that are undefined (zero variance, too few samples) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub level: Level,
    pub acc: Option<f64>,
    pub lcc: Option<f64>,
    pub srcc: Option<f64>,
    pub mse: f64,
    pub n: usize,
}

/// A prediction for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub pair_id: String,
    pub system_id: String,
    pub score: f64,
    /// Predicted class label for classification models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<u8>,
}

fn lookup<'a>(preds: &'a [Prediction], truths: &[GroupedPair]) -> Result<Vec<&'a Prediction>> {
    let by_id: BTreeMap<&str, &Prediction> = preds.iter().map(|p| (p.pair_id.as_str(), p)).collect();
    truths
        .iter()
        .map(|t| by_id.get(t.pair_id.as_str()).copied().ok_or_else(|| Error::MissingPrediction(t.pair_id.clone())))
        .collect()
}

/// Per-pair metrics against rating-averaged ground truth.
///
/// ACC compares `round_clip` of both sides for regression predictions; when a
/// prediction carries a class label it is compared with the pair's majority
/// rating instead.
pub fn evaluate_utterance(preds: &[Prediction], truths: &[GroupedPair]) -> Result<MetricReport> {
    if truths.is_empty() {
        return Err(Error::Empty("no pairs to evaluate"));
    }
    let matched = lookup(preds, truths)?;
    let p: Vec<f64> = matched.iter().map(|p| p.score).collect();
    let t: Vec<f64> = truths.iter().map(|t| t.mean_score).collect();
    let hits = matched
        .iter()
        .zip(truths)
        .filter(|(p, t)| match p.label {
            Some(label) => label == t.majority_rating(),
            None => round_clip(p.score) == round_clip(t.mean_score),
        })
        .count();
    Ok(MetricReport {
        level: Level::Utterance,
        acc: Some(hits as f64 / truths.len() as f64),
        lcc: pearson_lcc(&p, &t).ok(),
        srcc: spearman_srcc(&p, &t).ok(),
        mse: mse(&p, &t),
        n: truths.len(),
    })
}

/// Per-system means of predictions (over pairs) and ground truth (over all
/// ratings), then correlations and MSE across systems.
pub fn evaluate_system(preds: &[Prediction], truths: &[GroupedPair]) -> Result<MetricReport> {
    let matched = lookup(preds, truths)?;
    // system -> (prediction sum, pair count, rating sum, rating count)
    let mut systems: BTreeMap<&str, (f64, usize, f64, u32)> = BTreeMap::new();
    for (p, t) in matched.iter().zip(truths) {
        let e = systems.entry(t.system_id.as_str()).or_insert((0.0, 0, 0.0, 0));
        e.0 += p.score;
        e.1 += 1;
        e.2 += t.mean_score * t.rating_count as f64;
        e.3 += t.rating_count;
    }
    if systems.len() < 2 {
        return Err(Error::InvalidArgument("system-level evaluation needs at least two systems".into()));
    }
    let p: Vec<f64> = systems.values().map(|e| e.0 / e.1 as f64).collect();
    let t: Vec<f64> = systems.values().map(|e| e.2 / e.3 as f64).collect();
    Ok(MetricReport {
        level: Level::System,
        acc: None,
        lcc: pearson_lcc(&p, &t).ok(),
        srcc: spearman_srcc(&p, &t).ok(),
        mse: mse(&p, &t),
        n: systems.len(),
    })
}

/// Per-system ground-truth means, in system-id order.
pub fn system_truths(truths: &[GroupedPair]) -> Vec<(String, f64)> {
    let mut systems: BTreeMap<&str, (f64, u32)> = BTreeMap::new();
    for t in truths {
        let e = systems.entry(t.system_id.as_str()).or_insert((0.0, 0));
        e.0 += t.mean_score * t.rating_count as f64;
        e.1 += t.rating_count;
    }
    systems.into_iter().map(|(k, (s, n))| (String::from(k), s / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{group_by_pair, PairRecord, Split};
    use alloc::format;

    #[test]
    fn round_clip_rule() {
        assert_eq!(round_clip(4.7), 4);
        assert_eq!(round_clip(2.5), 3);
        assert_eq!(round_clip(0.2), 1);
        assert_eq!(round_clip(2.49), 2);
        assert_eq!(round_clip(-3.0), 1);
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        approx::assert_abs_diff_eq!(pearson_lcc(&x, &y).unwrap(), 1.0, epsilon = 1e-15);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        approx::assert_abs_diff_eq!(pearson_lcc(&x, &neg).unwrap(), -1.0, epsilon = 1e-15);
        // cov = 4, var_x = var_y = 5 (sums of squared deviations)
        approx::assert_abs_diff_eq!(pearson_lcc(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap(), 0.8, epsilon = 1e-15);
        assert!(matches!(pearson_lcc(&x, &[2.0; 4]), Err(Error::Undefined(_))));
        assert!(pearson_lcc(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_examples() {
        let x = [0.3, -1.0, 2.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| v.exp()).collect();
        assert_eq!(spearman_srcc(&x, &y).unwrap(), 1.0);
        let rev: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(spearman_srcc(&x, &rev).unwrap(), -1.0);
        // ranks x -> [1.5, 1.5, 3], y -> [1, 2, 3]: r = 1.5 / sqrt(1.5 * 2)
        let r = spearman_srcc(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        approx::assert_abs_diff_eq!(r, 1.5 / 3.0f64.sqrt(), epsilon = 1e-15);
        approx::assert_abs_diff_eq!(r, 0.866, epsilon = 1e-3);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(fractional_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    fn records(spec: &[(&str, &str, u8)]) -> Vec<PairRecord> {
        spec.iter()
            .map(|&(p, s, score)| PairRecord {
                pair_id: p.into(),
                system_id: s.into(),
                test_path: format!("{p}.wav"),
                ref_path: format!("{p}r.wav"),
                score,
                split: Split::Test,
            })
            .collect()
    }

    fn perfect(groups: &[GroupedPair], shift: f64) -> Vec<Prediction> {
        groups
            .iter()
            .map(|g| Prediction { pair_id: g.pair_id.clone(), system_id: g.system_id.clone(), score: g.mean_score + shift, label: None })
            .collect()
    }

    #[test]
    fn utterance_level() {
        let g = group_by_pair(&records(&[("a", "A", 1), ("a", "A", 2), ("b", "A", 3), ("c", "B", 4), ("d", "B", 2)]));
        let r = evaluate_utterance(&perfect(&g, 0.0), &g).unwrap();
        assert_eq!((r.acc, r.lcc, r.mse), (Some(1.0), Some(1.0), 0.0));
        let r = evaluate_utterance(&perfect(&g, 0.5), &g).unwrap();
        approx::assert_abs_diff_eq!(r.lcc.unwrap(), 1.0, epsilon = 1e-12);
        approx::assert_abs_diff_eq!(r.mse, 0.25, epsilon = 1e-12);
        let single = &g[..1];
        let r = evaluate_utterance(&perfect(single, 0.0), single).unwrap();
        assert_eq!(r.lcc, None);
        assert!(evaluate_utterance(&[], &g).is_err());
    }

    #[test]
    fn system_level() {
        let g = group_by_pair(&records(&[("a", "A", 2), ("b", "A", 4), ("c", "B", 1), ("d", "B", 2), ("e", "C", 4)]));
        let truths = system_truths(&g);
        assert_eq!(truths[0], ("A".into(), 3.0));
        let r = evaluate_system(&perfect(&g, 0.0), &g).unwrap();
        assert_eq!((r.lcc, r.mse, r.n), (Some(1.0), 0.0, 3));
        let mut shuffled = g.clone();
        shuffled.reverse();
        assert_eq!(evaluate_system(&perfect(&g, 0.1), &shuffled).unwrap(), evaluate_system(&perfect(&g, 0.1), &g).unwrap());
        let one = group_by_pair(&records(&[("a", "A", 2), ("b", "A", 3)]));
        assert!(evaluate_system(&perfect(&one, 0.0), &one).is_err());
    }
}
