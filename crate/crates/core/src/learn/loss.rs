use super::LearnError;
use crate::relcore::Loss;

/// Labeled objects of the target population with their label values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelSet {
    pub objects: Vec<usize>,
    pub values: Vec<f64>,
}

impl LabelSet {
    pub fn new(objects: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(objects.len(), values.len());
        Self { objects, values }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn mean(&self) -> Option<f64> {
        if self.is_empty() {
            None
        } else {
            Some(self.values.iter().sum::<f64>() / self.len() as f64)
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.objects
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }
}

/// Mean loss over the labeled objects and its gradient with respect to every
/// prediction; unlabeled objects get a zero gradient. Log loss is in nats.
pub fn loss_and_dout(
    pred: &[f64],
    labels: &LabelSet,
    loss: Loss,
) -> Result<(f64, Vec<f64>), LearnError> {
    let mut dout = vec![0.0; pred.len()];
    if labels.is_empty() {
        return Ok((0.0, dout));
    }
    let n = labels.len() as f64;
    let mut total = 0.0;
    for (obj, y) in labels.iter() {
        let p = *pred.get(obj).ok_or(LearnError::LabelOutOfRange(obj))?;
        match loss {
            Loss::LogLoss => {
                if y != 0.0 && y != 1.0 {
                    return Err(LearnError::InvalidLabel(y));
                }
                if p <= 0.0 || p >= 1.0 {
                    return Err(LearnError::DegenerateProbability {
                        object: obj,
                        value: p,
                    });
                }
                total -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
                dout[obj] += (p - y) / (p * (1.0 - p)) / n;
            }
            Loss::Mse => {
                total += (p - y) * (p - y);
                dout[obj] += 2.0 * (p - y) / n;
            }
        }
    }
    Ok((total / n, dout))
}
