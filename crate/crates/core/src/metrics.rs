//! Evaluation metrics on a labeled test set.

use std::fmt::{self, Write as _};

use crate::learn::LabelSet;

/// Predictions are clamped to `[EPS, 1 - EPS]` before taking logarithms.
pub const EPS: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Share of objects with `pred >= 0.5` matching the label; binary labels only.
    pub accuracy: Option<f64>,
    /// Mean negative log-likelihood in bits; binary labels with predictions in [0,1] only.
    pub log_loss: Option<f64>,
    pub mse: f64,
    pub n: usize,
    /// Share of positive labels; binary labels only.
    pub class_balance: Option<f64>,
}

/// Metrics of `pred` (indexed by object) on the labeled objects.
pub fn evaluate(pred: &[f64], labels: &LabelSet) -> MetricsReport {
    let n = labels.len();
    let binary = n > 0 && labels.values.iter().all(|&y| y == 0.0 || y == 1.0);
    let probabilities = labels
        .objects
        .iter()
        .all(|&o| (0.0..=1.0).contains(&pred[o]));
    let (mut correct, mut ll, mut se, mut pos) = (0usize, 0.0, 0.0, 0usize);
    for (o, y) in labels.iter() {
        let p = pred[o];
        se += (p - y) * (p - y);
        if binary {
            correct += usize::from((p >= 0.5) == (y == 1.0));
            pos += usize::from(y == 1.0);
            let q = p.clamp(EPS, 1.0 - EPS);
            ll -= if y == 1.0 { q.log2() } else { (1.0 - q).log2() };
        }
    }
    let nf = n as f64;
    MetricsReport {
        accuracy: binary.then(|| correct as f64 / nf),
        log_loss: (binary && probabilities).then(|| ll / nf),
        mse: if n == 0 { f64::NAN } else { se / nf },
        n,
        class_balance: binary.then(|| pos as f64 / nf),
    }
}

/// The constant predictor that always outputs the mean training label.
pub fn mean_baseline(train: &LabelSet, test: &LabelSet, population: usize) -> MetricsReport {
    let mean = train.mean().unwrap_or(0.5);
    evaluate(&vec![mean; population], test)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"))
}

impl MetricsReport {
    /// `accuracy,logloss,mse,n,class_balance`.
    pub const CSV_HEADER: &'static str = "accuracy,logloss,mse,n,class_balance";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.4},{},{}",
            opt(self.accuracy),
            opt(self.log_loss),
            self.mse,
            self.n,
            opt(self.class_balance)
        )
    }
}

impl fmt::Display for MetricsReport {
    /// One `metric=value` line per metric, 4 decimals.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let _ = writeln!(s, "accuracy={}", opt(self.accuracy));
        let _ = writeln!(s, "logloss={}", opt(self.log_loss));
        let _ = writeln!(s, "mse={:.4}", self.mse);
        let _ = writeln!(s, "n={}", self.n);
        let _ = write!(s, "class_balance={}", opt(self.class_balance));
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_constant_predictor() {
        let labels = LabelSet::new(vec![0, 1, 2], vec![1.0; 3]);
        let m = evaluate(&[1.0; 3], &labels);
        assert_eq!(m.mse, 0.0);
        assert_eq!(m.accuracy, Some(1.0));
        assert!(m.log_loss.unwrap() < 1e-12);
        assert_eq!(m.class_balance, Some(1.0));
    }

    #[test]
    fn coin_flip_costs_one_bit() {
        let labels = LabelSet::new(vec![0, 1], vec![0.0, 1.0]);
        let m = evaluate(&[0.5, 0.5], &labels);
        assert!((m.log_loss.unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(m.mse, 0.25);
        assert_eq!(m.accuracy, Some(0.5));
    }

    #[test]
    fn regression_labels_have_no_classification_metrics() {
        let labels = LabelSet::new(vec![0, 1], vec![16.0, 60.0]);
        let m = evaluate(&[20.0, 50.0], &labels);
        assert_eq!(m.accuracy, None);
        assert_eq!(m.log_loss, None);
        assert_eq!(m.mse, 58.0);
        assert!(m.to_string().contains("accuracy=NA"));
    }

    #[test]
    fn mean_baseline_uses_training_mean() {
        let train = LabelSet::new(vec![0, 1, 2, 3], vec![1.0, 1.0, 1.0, 0.0]);
        let test = LabelSet::new(vec![4, 5], vec![1.0, 0.0]);
        let m = mean_baseline(&train, &test, 6);
        assert!((m.mse - (0.0625 + 0.5625) / 2.0).abs() < 1e-15);
        assert_eq!(m.accuracy, Some(0.5));
    }

    #[test]
    fn report_lines() {
        let labels = LabelSet::new(vec![0, 1], vec![0.0, 1.0]);
        let text = evaluate(&[0.2, 0.9], &labels).to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "accuracy=1.0000");
        assert!(lines[1].starts_with("logloss=0."));
        assert_eq!(lines[3], "n=2");
    }
}
