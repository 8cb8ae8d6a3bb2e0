use std::fmt;

use crate::error::{Error, Result};

/// A rate that may be 0/0. Undefined rates carry the reason instead of
/// silently reading as zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Value(f64),
    Undefined(&'static str),
}

impl Rate {
    fn ratio(num: u64, den: u64, reason: &'static str) -> Self {
        if den == 0 {
            Rate::Undefined(reason)
        } else {
            Rate::Value(num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Rate::Value(v) => Some(v),
            Rate::Undefined(_) => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, Rate::Value(_))
    }

    /// Mean over the defined entries; undefined when none are.
    pub fn mean(rates: impl IntoIterator<Item = Rate>) -> Rate {
        let defined: Vec<f64> = rates.into_iter().filter_map(Rate::value).collect();
        if defined.is_empty() {
            Rate::Undefined("undefined for every class")
        } else {
            Rate::Value(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Value(v) => match f.precision() {
                Some(p) => write!(f, "{v:.p$}"),
                None => write!(f, "{v}"),
            },
            Rate::Undefined(_) => f.pad("undefined"),
        }
    }
}

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BinaryCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassRates {
    pub precision: Rate,
    pub accuracy: Rate,
    pub sensitivity: Rate,
    pub specificity: Rate,
    pub f1: Rate,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn rates(&self) -> ClassRates {
        let precision = Rate::ratio(self.tp, self.tp + self.fp, "no positive predictions");
        let sensitivity = Rate::ratio(self.tp, self.tp + self.fn_, "no positive samples");
        let f1 = match (precision, sensitivity) {
            (Rate::Value(p), Rate::Value(r)) if p + r > 0.0 => Rate::Value(2.0 * p * r / (p + r)),
            (Rate::Value(_), Rate::Value(_)) => Rate::Undefined("precision and sensitivity are both zero"),
            _ => Rate::Undefined("precision or sensitivity undefined"),
        };
        ClassRates {
            precision,
            accuracy: Rate::ratio(self.tp + self.tn, self.total(), "no samples"),
            sensitivity,
            specificity: Rate::ratio(self.tn, self.tn + self.fp, "no negative samples"),
            f1,
        }
    }
}

impl ClassRates {
    pub fn macro_average(per_class: &[ClassRates]) -> ClassRates {
        ClassRates {
            precision: Rate::mean(per_class.iter().map(|r| r.precision)),
            accuracy: Rate::mean(per_class.iter().map(|r| r.accuracy)),
            sensitivity: Rate::mean(per_class.iter().map(|r| r.sensitivity)),
            specificity: Rate::mean(per_class.iter().map(|r| r.specificity)),
            f1: Rate::mean(per_class.iter().map(|r| r.f1)),
        }
    }
}

/// `k x k` counts; entry `(i, j)` is the number of samples of true class
/// `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(truth: &[usize], predicted: &[usize], k: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::mismatch("confusion", truth.len(), predicted.len()));
        }
        let mut counts = vec![0u64; k * k];
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= k || p >= k {
                return Err(Error::Contract(format!("label pair ({t}, {p}) out of range for {k} classes")));
            }
            counts[t * k + p] += 1;
        }
        Ok(Self { k, counts })
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::mismatch("ConfusionMatrix::from_counts", k * k, counts.len()));
        }
        Ok(Self { k, counts })
    }

    pub fn classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        (0..self.k).map(|j| self.get(class, j)).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.k).map(|i| self.get(i, i)).sum()
    }

    pub fn binary(&self, class: usize) -> BinaryCounts {
        let tp = self.get(class, class);
        let predicted: u64 = (0..self.k).map(|i| self.get(i, class)).sum();
        let actual = self.support(class);
        BinaryCounts {
            tp,
            fp: predicted - tp,
            fn_: actual - tp,
            // tp is counted in both predicted and actual; add it back first
            tn: self.total() + tp - predicted - actual,
        }
    }

    pub fn rates(&self, class: usize) -> ClassRates {
        self.binary(class).rates()
    }
}
