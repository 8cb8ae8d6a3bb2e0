use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::{argmax, Tensor};

use super::{roc_auc, ClassRates, ConfusionMatrix, Rate, Roc};

#[derive(Debug, Clone)]
pub struct MetricsReport {
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassRates>,
    pub macro_rates: ClassRates,
    /// One-vs-rest ROC per class; `Err` carries why it is undefined.
    pub roc: Vec<std::result::Result<Roc, &'static str>>,
    pub accuracy: f64,
    pub mean_loss: f64,
}

/// Builds the full report from an `(N, k)` probability matrix.
pub fn report(probs: &Tensor, truth: &[usize], losses: &[f64], class_names: &[String]) -> Result<MetricsReport> {
    let k = class_names.len();
    if probs.rank() != 2 || probs.shape()[1] != k {
        return Err(Error::mismatch("report", vec![truth.len(), k], probs.shape().to_vec()));
    }
    if probs.rows() != truth.len() || losses.len() != truth.len() {
        return Err(Error::mismatch("report", truth.len(), probs.rows()));
    }
    let predicted: Vec<usize> = (0..probs.rows()).map(|r| argmax(probs.row(r))).collect();
    let confusion = ConfusionMatrix::new(truth, &predicted, k)?;
    let per_class: Vec<ClassRates> = (0..k).map(|c| confusion.rates(c)).collect();
    let roc = (0..k)
        .map(|c| {
            let scores: Vec<f64> = (0..probs.rows()).map(|r| probs.row(r)[c] as f64).collect();
            let truths: Vec<bool> = truth.iter().map(|&t| t == c).collect();
            match roc_auc(&scores, &truths) {
                Ok(roc) => Ok(Ok(roc)),
                Err(Error::UndefinedAuc(why)) => Ok(Err(why)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport {
        class_names: class_names.to_vec(),
        macro_rates: ClassRates::macro_average(&per_class),
        accuracy: confusion.correct() as f64 / confusion.total().max(1) as f64,
        mean_loss: losses.iter().sum::<f64>() / losses.len().max(1) as f64,
        confusion,
        per_class,
        roc,
    })
}

fn csv_rate(r: Rate) -> String {
    match r {
        Rate::Value(v) => v.to_string(),
        Rate::Undefined(_) => "undefined".into(),
    }
}

impl MetricsReport {
    pub fn auc(&self, class: usize) -> Rate {
        match &self.roc[class] {
            Ok(roc) => Rate::Value(roc.auc),
            Err(why) => Rate::Undefined(why),
        }
    }

    pub fn to_text(&self) -> String {
        let width = self.class_names.iter().map(String::len).max().unwrap_or(0).max(5);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>11}  {:>11}  {:>9}  {:>9}  {:>7}",
            "class", "precision", "accuracy", "sensitivity", "specificity", "f1", "auc", "support"
        );
        let row = |out: &mut String, name: &str, r: &ClassRates, auc: Rate, support: String| {
            let _ = writeln!(
                out,
                "{name:<width$}  {:>9.4}  {:>9.4}  {:>11.4}  {:>11.4}  {:>9.4}  {:>9.4}  {support:>7}",
                r.precision, r.accuracy, r.sensitivity, r.specificity, r.f1, auc
            );
        };
        for (c, name) in self.class_names.iter().enumerate() {
            row(&mut out, name, &self.per_class[c], self.auc(c), self.confusion.support(c).to_string());
        }
        let macro_auc = Rate::mean((0..self.class_names.len()).map(|c| self.auc(c)));
        row(&mut out, "macro", &self.macro_rates, macro_auc, self.confusion.total().to_string());

        let _ = writeln!(out, "\noverall accuracy {:.4}  mean loss {:.4}", self.accuracy, self.mean_loss);
        let _ = writeln!(out, "\nconfusion (rows true, columns predicted)");
        for (i, name) in self.class_names.iter().enumerate() {
            let cells: Vec<String> = (0..self.class_names.len())
                .map(|j| format!("{:>6}", self.confusion.get(i, j)))
                .collect();
            let _ = writeln!(out, "{name:<width$}  {}", cells.join(""));
        }
        for (c, name) in self.class_names.iter().enumerate() {
            let rates = &self.per_class[c];
            for (metric, r) in [
                ("precision", rates.precision),
                ("sensitivity", rates.sensitivity),
                ("specificity", rates.specificity),
                ("f1", rates.f1),
                ("auc", self.auc(c)),
            ] {
                if let Rate::Undefined(why) = r {
                    let _ = writeln!(out, "note: {metric} undefined for {name}: {why}");
                }
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,precision,sensitivity,specificity,f1,support\n");
        for (c, name) in self.class_names.iter().enumerate() {
            let r = &self.per_class[c];
            let _ = writeln!(
                out,
                "{name},{},{},{},{},{}",
                csv_rate(r.precision),
                csv_rate(r.sensitivity),
                csv_rate(r.specificity),
                csv_rate(r.f1),
                self.confusion.support(c)
            );
        }
        let r = &self.macro_rates;
        let _ = writeln!(
            out,
            "macro,{},{},{},{},{}",
            csv_rate(r.precision),
            csv_rate(r.sensitivity),
            csv_rate(r.specificity),
            csv_rate(r.f1),
            self.confusion.total()
        );
        out
    }

    pub fn roc_csv(&self) -> String {
        let mut out = String::from("class,threshold,fpr,tpr\n");
        for (name, roc) in self.class_names.iter().zip(&self.roc) {
            if let Ok(roc) = roc {
                for p in &roc.points {
                    let _ = writeln!(out, "{name},{},{},{}", p.threshold, p.fpr, p.tpr);
                }
            }
        }
        out
    }
}
