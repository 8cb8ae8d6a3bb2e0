//! One-vs-rest ROC curves and AUC.
//!
//! The curve is swept over distinct scores in descending order, so tied
//! scores move diagonally. The trapezoid area is accumulated in integer
//! counts; it equals the pairwise concordance statistic (ties count 1/2)
//! exactly, which [`concordance_auc`] computes independently.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Scores `>= threshold` are predicted positive; `+inf` for the origin.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Roc {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn class_totals(scores: &[f64], truths: &[bool]) -> Result<(u64, u64)> {
    if scores.len() != truths.len() {
        return Err(Error::mismatch("roc_auc", scores.len(), truths.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Contract("NaN score".into()));
    }
    let pos = truths.iter().filter(|&&t| t).count() as u64;
    let neg = truths.len() as u64 - pos;
    if pos == 0 {
        return Err(Error::UndefinedAuc("no positive samples"));
    }
    if neg == 0 {
        return Err(Error::UndefinedAuc("no negative samples"));
    }
    Ok((pos, neg))
}

pub fn roc_auc(scores: &[f64], truths: &[bool]) -> Result<Roc> {
    let (pos, neg) = class_totals(scores, truths)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0u64, 0u64);
    // twice the area, in units of 1 / (pos * neg)
    let mut doubled_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (prev_tp, prev_fp) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if truths[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        doubled_area += (fp - prev_fp) as u128 * (tp + prev_tp) as u128;
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(Roc {
        points,
        auc: doubled_area as f64 / (2 * pos as u128 * neg as u128) as f64,
    })
}

/// Probability that a random positive outscores a random negative, ties 1/2.
pub fn concordance_auc(scores: &[f64], truths: &[bool]) -> Result<f64> {
    let (pos, neg) = class_totals(scores, truths)?;
    let mut doubled: u128 = 0;
    for (i, &si) in scores.iter().enumerate() {
        if !truths[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if truths[j] {
                continue;
            }
            doubled += match si.total_cmp(&sj) {
                std::cmp::Ordering::Greater => 2,
                std::cmp::Ordering::Equal => 1,
                std::cmp::Ordering::Less => 0,
            };
        }
    }
    Ok(doubled as f64 / (2 * pos as u128 * neg as u128) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_separation() {
        let roc = roc_auc(&[0.9, 0.8, 0.4, 0.3], &[true, true, false, false]).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(roc.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
    }

    #[test]
    fn one_discordant_pair() {
        let s = [0.9, 0.4, 0.8, 0.3];
        let t = [true, true, false, false];
        assert_eq!(roc_auc(&s, &t).unwrap().auc, 0.75);
        assert_eq!(concordance_auc(&s, &t).unwrap(), 0.75);
    }

    #[test]
    fn all_ties_is_half() {
        let s = [0.5; 6];
        let t = [true, false, true, false, false, true];
        let roc = roc_auc(&s, &t).unwrap();
        assert_eq!(roc.auc, 0.5);
        assert_eq!(roc.points.len(), 2);
    }

    #[test]
    fn single_class_is_undefined() {
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::UndefinedAuc(_))));
        assert!(matches!(concordance_auc(&[0.1, 0.2], &[false, false]), Err(Error::UndefinedAuc(_))));
    }
}
