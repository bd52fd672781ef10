//! Scoring prediction files against manifests.

use anyhow::ensure;
use svsnet_core::data::{group_by_pair, PairRecord, Split};
use svsnet_core::metrics::{evaluate_system, evaluate_utterance, Level, MetricReport, Prediction};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalFilter {
    pub split: Option<Split>,
    /// Restrict to these system ids (for example converted-target systems only).
    pub systems: Option<Vec<String>>,
}

impl EvalFilter {
    fn keep(&self, r: &PairRecord) -> bool {
        self.split.is_none_or(|s| r.split == s) && self.systems.as_ref().is_none_or(|ids| ids.contains(&r.system_id))
    }
}

/// Groups ratings by pair, then computes the report at `level`.
pub fn evaluate(
    preds: &[Prediction],
    records: &[PairRecord],
    level: Level,
    filter: &EvalFilter,
) -> anyhow::Result<MetricReport> {
    let kept: Vec<PairRecord> = records.iter().filter(|r| filter.keep(r)).cloned().collect();
    ensure!(!kept.is_empty(), "no manifest records left after filtering");
    let truths = group_by_pair(&kept);
    Ok(match level {
        Level::Utterance => evaluate_utterance(preds, &truths)?,
        Level::System => evaluate_system(preds, &truths)?,
    })
}

/// Human-readable report; undefined correlations print as `n/a`.
pub fn format_report(r: &MetricReport) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"));
    let level = match r.level {
        Level::Utterance => "utterance",
        Level::System => "system",
    };
    format!(
        "level: {level}\nn: {}\nacc: {}\nlcc: {}\nsrcc: {}\nmse: {:.4}\n",
        r.n,
        opt(r.acc),
        opt(r.lcc),
        opt(r.srcc),
        r.mse
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pair: &str, system: &str, score: u8, split: Split) -> PairRecord {
        PairRecord {
            pair_id: pair.into(),
            system_id: system.into(),
            test_path: "t.wav".into(),
            ref_path: "r.wav".into(),
            score,
            split,
        }
    }

    fn pred(pair: &str, system: &str, score: f64) -> Prediction {
        Prediction { pair_id: pair.into(), system_id: system.into(), score, label: None }
    }

    #[test]
    fn utterance_level_averages_ratings_first() {
        let records = vec![
            rec("a", "S", 1, Split::Test),
            rec("a", "S", 2, Split::Test),
            rec("b", "T", 4, Split::Test),
            rec("c", "T", 3, Split::Test),
        ];
        let preds = vec![pred("a", "S", 1.5), pred("b", "T", 4.0), pred("c", "T", 3.0)];
        let r = evaluate(&preds, &records, Level::Utterance, &EvalFilter::default()).unwrap();
        assert_eq!(r.n, 3);
        assert_eq!(r.mse, 0.0);
        assert!((r.lcc.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn system_level_perfect_predictions() {
        let records = vec![rec("a", "S", 1, Split::Test), rec("b", "T", 3, Split::Test), rec("c", "U", 4, Split::Val)];
        let preds = vec![pred("a", "S", 1.0), pred("b", "T", 3.0), pred("c", "U", 4.0)];
        let r = evaluate(&preds, &records, Level::System, &EvalFilter::default()).unwrap();
        assert!((r.lcc.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.acc, None);
        let only_test = EvalFilter { split: Some(Split::Test), systems: None };
        assert_eq!(evaluate(&preds, &records, Level::System, &only_test).unwrap().n, 2);
        let one = EvalFilter { split: None, systems: Some(vec!["S".into()]) };
        assert!(evaluate(&preds, &records, Level::System, &one).is_err());
    }

    #[test]
    fn undefined_correlation_prints_as_absent() {
        let records = vec![rec("a", "S", 2, Split::Test), rec("b", "S", 3, Split::Test)];
        let preds = vec![pred("a", "S", 2.5), pred("b", "S", 2.5)];
        let r = evaluate(&preds, &records, Level::Utterance, &EvalFilter::default()).unwrap();
        assert_eq!(r.lcc, None);
        assert!(format_report(&r).contains("lcc: n/a"));
    }
}
