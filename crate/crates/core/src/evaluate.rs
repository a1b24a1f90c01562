//! Per-observation scoring of a segmentation against a reference labeling.
//! LOH is the positive class.

use serde::{Deserialize, Serialize};

use crate::cusum::{Label, Segmentation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Tallies paired truth / predicted labels.
    pub fn from_labels(truth: &[Label], predicted: &[Label]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Validation(format!(
                "reference has {} observations, prediction covers {}",
                truth.len(),
                predicted.len()
            )));
        }
        let mut c = ConfusionCounts::default();
        for (t, p) in truth.iter().zip(predicted) {
            match (t.is_positive(), p.is_positive()) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts { tp: self.tp + o.tp, fp: self.fp + o.fp, tn: self.tn + o.tn, fn_: self.fn_ + o.fn_ }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = ConfusionCounts>>(iter: I) -> Self {
        iter.fold(ConfusionCounts::default(), |a, b| a + b)
    }
}

/// `None` marks an undefined ratio (empty class); it is serialized as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    Metrics { sensitivity: ratio(c.tp, c.tp + c.fn_), specificity: ratio(c.tn, c.tn + c.fp) }
}

/// Confusion counts of `predicted` against per-observation `truth`.
pub fn confusion(truth: &[Label], predicted: &Segmentation) -> Result<ConfusionCounts> {
    predicted.check(truth.len(), false)?;
    ConfusionCounts::from_labels(truth, &predicted.labels())
}

/// Metrics treating `gold` as truth.
pub fn compare_to_gold(gold: &[Label], predicted: &Segmentation) -> Result<Metrics> {
    Ok(metrics(&confusion(gold, predicted)?))
}

/// Result of scoring several inputs against their gold standards.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GoldComparison {
    pub per_input: Vec<InputScore>,
    /// Metrics of the summed counts.
    pub pooled: Metrics,
    pub pooled_counts: ConfusionCounts,
    /// Unweighted means of the per-input metrics over inputs where defined.
    pub mean_per_input: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputScore {
    pub name: String,
    pub counts: ConfusionCounts,
    pub metrics: Metrics,
}

/// Mean of the defined values, `None` if there are none.
pub fn mean_defined(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (sum, k) = values.into_iter().flatten().fold((0.0, 0usize), |(s, k), v| (s + v, k + 1));
    (k > 0).then(|| sum / k as f64)
}

pub fn compare_many(inputs: &[(String, Vec<Label>, Segmentation)]) -> Result<GoldComparison> {
    let per_input = inputs
        .iter()
        .map(|(name, gold, pred)| {
            let counts = confusion(gold, pred)?;
            Ok(InputScore { name: name.clone(), counts, metrics: metrics(&counts) })
        })
        .collect::<Result<Vec<_>>>()?;
    let pooled_counts: ConfusionCounts = per_input.iter().map(|s| s.counts).sum();
    let mean_per_input = Metrics {
        sensitivity: mean_defined(per_input.iter().map(|s| s.metrics.sensitivity)),
        specificity: mean_defined(per_input.iter().map(|s| s.metrics.specificity)),
    };
    Ok(GoldComparison { pooled: metrics(&pooled_counts), pooled_counts, per_input, mean_per_input })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cusum::Segment;
    use Label::*;

    fn block(n: usize, loh: std::ops::Range<usize>) -> Vec<Label> {
        (0..n).map(|i| if loh.contains(&i) { Loh } else { NonLoh }).collect()
    }

    fn segs(parts: &[(usize, usize, Label)]) -> Segmentation {
        Segmentation::from_segments(parts.iter().map(|&(start, end, label)| Segment { start, end, label }).collect())
    }

    #[test]
    fn all_negative() {
        let c = confusion(&[NonLoh; 40], &segs(&[(0, 39, NonLoh)])).unwrap();
        assert_eq!(c, ConfusionCounts { tn: 40, ..Default::default() });
        let m = metrics(&c);
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.specificity, Some(1.0));
    }

    #[test]
    fn perfect_agreement() {
        let truth = block(100, 30..60);
        let c = confusion(&truth, &Segmentation::from_labels(&truth)).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let m = compare_to_gold(&truth, &Segmentation::from_labels(&truth)).unwrap();
        assert_eq!(m, Metrics { sensitivity: Some(1.0), specificity: Some(1.0) });
    }

    #[test]
    fn shifted_block_hand_count() {
        // truth LOH on [500, 600), prediction LOH on [550, 650)
        let truth = block(1000, 500..600);
        let pred = segs(&[(0, 549, NonLoh), (550, 649, Loh), (650, 999, NonLoh)]);
        let c = confusion(&truth, &pred).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 50, fn_: 50, fp: 50, tn: 850 });
        assert_eq!(c.total(), 1000);
    }

    #[test]
    fn disjoint_calls() {
        let gold = block(1000, 100..200);
        let pred = segs(&[(0, 799, NonLoh), (800, 899, Loh), (900, 999, NonLoh)]);
        let m = compare_to_gold(&gold, &pred).unwrap();
        assert_eq!(m.sensitivity, Some(0.0));
        assert_eq!(m.specificity, Some(800.0 / 900.0));
    }

    #[test]
    fn metric_arithmetic() {
        let m = metrics(&ConfusionCounts { tp: 9, fn_: 1, tn: 90, fp: 0 });
        assert_eq!(m.sensitivity, Some(0.9));
        assert_eq!(m.specificity, Some(1.0));
        assert_eq!(metrics(&ConfusionCounts { tn: 5, fp: 5, ..Default::default() }).sensitivity, None);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(confusion(&[NonLoh; 10], &segs(&[(0, 8, NonLoh)])).is_err());
        assert!(confusion(&[NonLoh; 10], &segs(&[(0, 10, NonLoh)])).is_err());
    }

    #[test]
    fn undefined_serializes_as_null() {
        let m = Metrics { sensitivity: None, specificity: Some(0.5) };
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"sensitivity":null,"specificity":0.5}"#);
    }

    #[test]
    fn pooled_and_per_input() {
        let a = (String::from("a"), block(10, 0..5), Segmentation::from_labels(&block(10, 0..5)));
        let b = (String::from("b"), block(10, 0..5), segs(&[(0, 9, NonLoh)]));
        let g = compare_many(&[a, b]).unwrap();
        assert_eq!(g.pooled_counts, ConfusionCounts { tp: 5, fn_: 5, tn: 10, fp: 0 });
        assert_eq!(g.pooled.sensitivity, Some(0.5));
        assert_eq!(g.mean_per_input.sensitivity, Some(0.5));
        assert_eq!(g.per_input[1].metrics.sensitivity, Some(0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn labels() -> impl Strategy<Value = Vec<Label>> {
            proptest::collection::vec(prop_oneof![Just(NonLoh), Just(Loh)], 1..200)
        }

        proptest! {
            #[test]
            fn swap_duality(pairs in labels().prop_flat_map(|t| {
                let n = t.len();
                (Just(t), proptest::collection::vec(prop_oneof![Just(NonLoh), Just(Loh)], n))
            })) {
                let (truth, pred) = pairs;
                let m = compare_to_gold(&truth, &Segmentation::from_labels(&pred)).unwrap();
                let st: Vec<Label> = truth.iter().map(|l| l.flipped()).collect();
                let sp: Vec<Label> = pred.iter().map(|l| l.flipped()).collect();
                let ms = compare_to_gold(&st, &Segmentation::from_labels(&sp)).unwrap();
                prop_assert_eq!(m.sensitivity, ms.specificity);
                prop_assert_eq!(m.specificity, ms.sensitivity);
                for v in [m.sensitivity, m.specificity].into_iter().flatten() {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }

            #[test]
            fn split_invariance(pairs in labels().prop_flat_map(|t| {
                let n = t.len();
                (Just(t), proptest::collection::vec(prop_oneof![Just(NonLoh), Just(Loh)], n))
            })) {
                let (truth, pred) = pairs;
                let merged = Segmentation::from_labels(&pred);
                // one segment per observation: same labels, maximal splitting
                let split = Segmentation::from_segments(
                    pred.iter().enumerate().map(|(i, &label)| Segment { start: i, end: i, label }).collect());
                prop_assert_eq!(confusion(&truth, &merged).unwrap(), confusion(&truth, &split).unwrap());
            }
        }
    }
}
