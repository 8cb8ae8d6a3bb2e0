//! Class-weighted categorical cross-entropy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Probabilities at the true class are clamped to this before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightProvenance {
    FromCounts,
    Explicit,
}

/// Per-class loss multipliers, index-aligned with class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    values: Vec<f64>,
    provenance: WeightProvenance,
}

impl ClassWeights {
    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|&w| !w.is_finite() || w <= 0.0) {
            return Err(Error::Contract(format!("class weights must be positive and finite: {values:?}")));
        }
        Ok(Self {
            values,
            provenance: WeightProvenance::Explicit,
        })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            values: vec![1.0; k],
            provenance: WeightProvenance::Explicit,
        }
    }

    /// `w_i = n / (k * n_i)` where `n` is the total count.
    pub fn from_counts(counts: &[usize]) -> Result<Self> {
        if counts.len() < 2 {
            return Err(Error::Contract(format!("need at least 2 classes, got {}", counts.len())));
        }
        if let Some(class) = counts.iter().position(|&c| c == 0) {
            return Err(Error::DegenerateClass { class });
        }
        let n: usize = counts.iter().sum();
        let k = counts.len();
        Ok(Self {
            values: counts.iter().map(|&c| n as f64 / (k * c) as f64).collect(),
            provenance: WeightProvenance::FromCounts,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> WeightProvenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::explicit(self.values.iter().map(|w| w * factor).collect())
    }
}

#[derive(Debug, Clone)]
pub struct LossOutput<T: Scalar = f32> {
    /// Mean weighted loss over the batch.
    pub loss: f64,
    /// Per-sample weighted losses.
    pub per_sample: Vec<f64>,
    /// Gradient of `loss` with respect to the pre-softmax logits.
    pub grad_logits: Tensor<T>,
    /// Number of samples whose true-class probability hit the log clamp.
    pub clamped: usize,
}

pub fn one_hot<T: Scalar>(labels: &[usize], k: usize) -> Result<Tensor<T>> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Contract(format!("label {bad} out of range for {k} classes")));
    }
    Tensor::from_fn(&[labels.len(), k], |i| {
        if labels[i / k] == i % k {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Labels of a one-hot target matrix; anything else is a contract error.
pub fn labels_of<T: Scalar>(targets: &Tensor<T>) -> Result<Vec<usize>> {
    if targets.rank() != 2 {
        return Err(Error::mismatch("labels_of", "(N, k) one-hot", targets.shape()));
    }
    (0..targets.rows())
        .map(|r| {
            let row = targets.row(r);
            let ones = row.iter().filter(|&&v| v == T::one()).count();
            let zeros = row.iter().filter(|&&v| v == T::zero()).count();
            if ones != 1 || zeros != row.len() - 1 {
                return Err(Error::Contract(format!("target row {r} is not one-hot")));
            }
            Ok(row.iter().position(|&v| v == T::one()).expect("one entry"))
        })
        .collect()
}

/// Loss `(1/N) sum_s w[c_s] * -ln p[s, c_s]` and the fused softmax+CCE
/// logit gradient `w[c_s] * (p_s - t_s) / N`.
pub fn weighted_cce_loss<T: Scalar>(probs: &Tensor<T>, targets: &Tensor<T>, weights: &ClassWeights) -> Result<LossOutput<T>> {
    if probs.shape() != targets.shape() {
        return Err(Error::mismatch("weighted_cce_loss", probs.shape(), targets.shape()));
    }
    let labels = labels_of(targets)?;
    let k = probs.last_dim();
    if weights.len() != k {
        return Err(Error::mismatch("weighted_cce_loss", format!("{k} class weights"), weights.len()));
    }
    let n = labels.len();
    let inv_n = T::from_f64_lossy(1.0 / n as f64);
    let mut per_sample = Vec::with_capacity(n);
    let mut clamped = 0;
    let mut grad = probs.clone();
    for (s, &label) in labels.iter().enumerate() {
        let w = weights.values()[label];
        let p = probs.row(s)[label].as_f64();
        if p.is_nan() || p <= LOG_CLAMP {
            clamped += 1;
        }
        per_sample.push(w * -p.max(LOG_CLAMP).ln());

        let wt = T::from_f64_lossy(w);
        let row = &mut grad.data_mut()[s * k..(s + 1) * k];
        for (j, g) in row.iter_mut().enumerate() {
            let t = if j == label { T::one() } else { T::zero() };
            *g = wt * (*g - t) * inv_n;
        }
    }
    let loss = per_sample.iter().sum::<f64>() / n as f64;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(LossOutput {
        loss,
        per_sample,
        grad_logits: grad,
        clamped,
    })
}

/// Unweighted categorical cross-entropy, mean over the batch.
pub fn cce_loss<T: Scalar>(probs: &Tensor<T>, targets: &Tensor<T>) -> Result<f64> {
    let labels = labels_of(targets)?;
    let n = labels.len();
    Ok(labels
        .iter()
        .enumerate()
        .map(|(s, &l)| -probs.row(s)[l].as_f64().max(LOG_CLAMP).ln())
        .sum::<f64>()
        / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_counts_give_unit_weights() {
        let w = ClassWeights::from_counts(&[100, 100, 100]).unwrap();
        assert_eq!(w.values(), &[1.0, 1.0, 1.0]);
        assert_eq!(w.provenance(), WeightProvenance::FromCounts);
    }

    #[test]
    fn covidx_training_counts() {
        // n = 13896, k = 3
        let w = ClassWeights::from_counts(&[7966, 5459, 471]).unwrap();
        let expected = [0.5815, 0.8485, 9.8344];
        for (got, want) in w.values().iter().zip(expected) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
        // The figures reported alongside the dataset (0.57, 0.83, 9.57) do
        // not follow from these counts; the formula is what we implement.
        let reported = [0.57, 0.83, 9.57];
        assert!(w.values().iter().zip(reported).any(|(g, r)| (g - r).abs() > 1e-2));
    }

    #[test]
    fn zero_count_is_degenerate() {
        assert!(matches!(
            ClassWeights::from_counts(&[3, 0, 2]),
            Err(Error::DegenerateClass { class: 1 })
        ));
        assert!(ClassWeights::from_counts(&[5]).is_err());
    }

    #[test]
    fn loss_examples() {
        let t = one_hot::<f64>(&[0], 3).unwrap();
        let perfect = weighted_cce_loss(&t, &t, &ClassWeights::uniform(3)).unwrap();
        assert_eq!(perfect.loss, 0.0);
        assert!(perfect.grad_logits.data().iter().all(|&g| g == 0.0));

        let p = Tensor::new(&[1, 3], vec![0.5, 0.25, 0.25]).unwrap();
        let out = weighted_cce_loss(&p, &t, &ClassWeights::uniform(3)).unwrap();
        assert!((out.loss - std::f64::consts::LN_2).abs() < 1e-12);

        let w = ClassWeights::explicit(vec![9.8344, 1.0, 1.0]).unwrap();
        let out = weighted_cce_loss(&p, &t, &w).unwrap();
        assert!((out.loss - 6.8173).abs() < 1e-3);
    }

    #[test]
    fn saturated_prediction_is_clamped() {
        let p = Tensor::new(&[1, 2], vec![1.0f32, 0.0]).unwrap();
        let t = one_hot::<f32>(&[1], 2).unwrap();
        let out = weighted_cce_loss(&p, &t, &ClassWeights::uniform(2)).unwrap();
        assert_eq!(out.clamped, 1);
        assert!((out.loss - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn non_one_hot_rejected() {
        let p = Tensor::new(&[1, 2], vec![0.5f32, 0.5]).unwrap();
        assert!(matches!(
            weighted_cce_loss(&p, &p, &ClassWeights::uniform(2)),
            Err(Error::Contract(_))
        ));
    }
}
