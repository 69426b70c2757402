use serde::{Deserialize, Serialize};

use crate::activity::Activity;

/// 7x7 confusion counts, rows = truth, columns = prediction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; Activity::COUNT]; Activity::COUNT],
}

impl ConfusionMatrix {
    pub fn from_pairs(truth: &[Activity], pred: &[Activity]) -> Self {
        let mut m = ConfusionMatrix::default();
        for (t, p) in truth.iter().zip(pred) {
            m.counts[t.index()][p.index()] += 1;
        }
        m
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_total(&self, a: Activity) -> u64 {
        self.counts[a.index()].iter().sum()
    }

    /// Percent correct for class `a`; `None` when it has no samples.
    pub fn class_accuracy(&self, a: Activity) -> Option<f64> {
        let n = self.row_total(a);
        (n > 0).then(|| 100.0 * self.counts[a.index()][a.index()] as f64 / n as f64)
    }

    /// Mean per-class accuracy over the classes of `set` that have samples.
    pub fn macro_accuracy(&self, set: &[Activity]) -> f64 {
        let accs: Vec<f64> = set.iter().filter_map(|&a| self.class_accuracy(a)).collect();
        if accs.is_empty() {
            0.0
        } else {
            accs.iter().sum::<f64>() / accs.len() as f64
        }
    }

    pub fn macro7(&self) -> f64 {
        self.macro_accuracy(&Activity::ALL)
    }

    pub fn macro5(&self) -> f64 {
        self.macro_accuracy(&Activity::SPECIFIC)
    }
}
