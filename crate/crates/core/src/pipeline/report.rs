//! Confusion-matrix evaluation and report serialization.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activity::Activity;
use crate::classifier::{ConfusionMatrix, MulticlassModel, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub class: Activity,
    pub count: u64,
    /// Percent; `None` without test samples.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassAccuracy>,
    pub macro7: f64,
    /// Mean over the five volleyball-specific classes.
    pub macro5: f64,
    pub test_count: u64,
}

impl EvaluationReport {
    pub fn from_predictions(truth: &[Activity], pred: &[Activity]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        if truth.len() != pred.len() {
            return Err(Error::len(truth.len(), pred.len()));
        }
        Ok(Self::from_confusion(ConfusionMatrix::from_pairs(truth, pred)))
    }

    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        EvaluationReport {
            per_class: Activity::ALL
                .iter()
                .map(|&a| ClassAccuracy {
                    class: a,
                    count: confusion.row_total(a),
                    accuracy: confusion.class_accuracy(a),
                })
                .collect(),
            macro7: confusion.macro7(),
            macro5: confusion.macro5(),
            test_count: confusion.total(),
            confusion,
        }
    }

    pub fn class_accuracy(&self, a: Activity) -> Option<f64> {
        self.per_class[a.index()].accuracy
    }

    /// Rows are true classes, columns predictions.
    pub fn to_csv(&self) -> String {
        let names: Vec<&str> = Activity::ALL.iter().map(|a| a.name()).collect();
        let mut s = format!("truth,{}\n", names.join(","));
        for a in Activity::ALL {
            let row: Vec<String> = self.confusion.counts[a.index()].iter().map(u64::to_string).collect();
            let _ = writeln!(s, "{},{}", a.name(), row.join(","));
        }
        s
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-class accuracy bars.
    pub fn to_svg(&self) -> String {
        let (bar, gap, h) = (60.0, 20.0, 200.0);
        let width = Activity::COUNT as f64 * (bar + gap) + gap;
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{}\" font-family=\"sans-serif\" font-size=\"11\">\n",
            h + 60.0
        );
        for (i, c) in self.per_class.iter().enumerate() {
            let acc = c.accuracy.unwrap_or(0.0);
            let x = gap + i as f64 * (bar + gap);
            let bh = h * acc / 100.0;
            let _ = writeln!(
                s,
                "<rect x=\"{x}\" y=\"{:.2}\" width=\"{bar}\" height=\"{bh:.2}\" fill=\"#4a7ab5\"/>\n<text x=\"{:.1}\" y=\"{:.2}\" text-anchor=\"middle\">{acc:.1}</text>\n<text x=\"{:.1}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                20.0 + h - bh,
                x + bar / 2.0,
                16.0 + h - bh,
                x + bar / 2.0,
                h + 40.0,
                c.class
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

/// Predicts every sample with `model` (argmax of calibrated scores).
pub fn evaluate(model: &MulticlassModel, samples: &[Sample]) -> Result<EvaluationReport> {
    if samples.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let pred = samples
        .par_iter()
        .map(|s| model.predict_class(&s.blocks))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Activity> = samples.iter().map(|s| s.label).collect();
    EvaluationReport::from_predictions(&truth, &pred)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictor_is_diagonal() {
        let truth: Vec<Activity> = Activity::ALL.iter().flat_map(|&a| [a, a]).collect();
        let r = EvaluationReport::from_predictions(&truth, &truth).unwrap();
        for a in Activity::ALL {
            for b in Activity::ALL {
                assert_eq!(r.confusion.counts[a.index()][b.index()], if a == b { 2 } else { 0 });
            }
        }
        assert_eq!((r.macro7, r.macro5, r.test_count), (100.0, 100.0, 14));
    }

    #[test]
    fn constant_predictor_fills_one_column() {
        let truth: Vec<Activity> = Activity::ALL.to_vec();
        let pred = vec![Activity::Block; 7];
        let r = EvaluationReport::from_predictions(&truth, &pred).unwrap();
        for a in Activity::ALL {
            assert_eq!(r.confusion.row_total(a), 1);
            assert_eq!(r.confusion.counts[a.index()][Activity::Block.index()], 1);
        }
        assert!((r.macro7 - 100.0 / 7.0).abs() < 1e-12);
        assert!((r.macro5 - 20.0).abs() < 1e-12);
    }

    #[test]
    fn empty_test_set() {
        assert!(matches!(
            EvaluationReport::from_predictions(&[], &[]),
            Err(Error::EmptyTestSet)
        ));
    }

    #[test]
    fn csv_layout() {
        let r = EvaluationReport::from_predictions(&[Activity::Stand], &[Activity::Service]).unwrap();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next(),
            Some("truth,stand,service,reception,setting,attack,block,defense_move")
        );
        assert_eq!(lines.next(), Some("stand,0,1,0,0,0,0,0"));
        assert_eq!(csv.lines().count(), 8);
        assert!(r.to_svg().contains("defense_move"));
    }
}
