//! Splits, cross-validation folds and predictive metrics.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Ratio;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, TAG_FOLDS, TAG_SPLIT};
use crate::{Error, Result};

fn check_pairs<S: PartialEq>(predictions: &[S], truths: &[S]) -> Result<()> {
    if predictions.len() != truths.len() {
        return Err(Error::Misaligned {
            expected: truths.len(),
            found: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::EmptyResult("predictions to score"));
    }
    Ok(())
}

/// Exact share of correct predictions.
pub fn accuracy_ratio<S: PartialEq>(predictions: &[S], truths: &[S]) -> Result<Ratio<u64>> {
    check_pairs(predictions, truths)?;
    let correct = predictions
        .iter()
        .zip(truths)
        .filter(|(p, t)| p == t)
        .count() as u64;
    Ok(Ratio::new(correct, truths.len() as u64))
}

pub fn accuracy<S: PartialEq>(predictions: &[S], truths: &[S]) -> Result<f64> {
    let r = accuracy_ratio(predictions, truths)?;
    Ok(*r.numer() as f64 / *r.denom() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> Option<Ratio<u64>> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<Ratio<u64>> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall, undefined when either is
    /// undefined or both are zero.
    pub fn f1(&self) -> Option<Ratio<u64>> {
        let (p, r) = (self.precision()?, self.recall()?);
        let s = p + r;
        if *s.numer() == 0 {
            return None;
        }
        Some(Ratio::from_integer(2) * p * r / s)
    }
}

fn ratio(num: u64, den: u64) -> Option<Ratio<u64>> {
    (den > 0).then(|| Ratio::new(num, den))
}

fn to_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Accuracy plus binary metrics. `None` marks an undefined metric (a zero
/// denominator), which is reported as such rather than as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    pub n: usize,
    pub confusion: Option<ConfusionCounts>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl MetricReport {
    pub fn accuracy_only<S: PartialEq>(predictions: &[S], truths: &[S]) -> Result<Self> {
        Ok(Self {
            accuracy: accuracy(predictions, truths)?,
            n: truths.len(),
            confusion: None,
            precision: None,
            recall: None,
            f1: None,
        })
    }
}

pub fn confusion_counts<S: PartialEq + Ord + Clone>(
    predictions: &[S],
    truths: &[S],
    positive: &S,
) -> Result<ConfusionCounts> {
    check_pairs(predictions, truths)?;
    let labels: BTreeSet<&S> = truths.iter().collect();
    if labels.len() > 2 {
        return Err(Error::NonBinaryLabels(labels.len()));
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in predictions.iter().zip(truths) {
        match (p == positive, t == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn binary_metrics<S: PartialEq + Ord + Clone>(
    predictions: &[S],
    truths: &[S],
    positive: &S,
) -> Result<MetricReport> {
    let c = confusion_counts(predictions, truths, positive)?;
    Ok(MetricReport {
        accuracy: to_f64(Ratio::new(c.tp + c.tn, c.total())),
        n: truths.len(),
        confusion: Some(c),
        precision: c.precision().map(to_f64),
        recall: c.recall().map(to_f64),
        f1: c.f1().map(to_f64),
    })
}

/// K×K counts with rows indexed by truth and columns by prediction, over the
/// sorted union of labels.
pub fn confusion_matrix<S: Ord + Clone>(
    predictions: &[S],
    truths: &[S],
) -> Result<(Vec<S>, Vec<Vec<u64>>)> {
    check_pairs(predictions, truths)?;
    let labels: Vec<S> = truths
        .iter()
        .chain(predictions)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&S, usize> = labels.iter().enumerate().map(|(i, l)| (l, i)).collect();
    let mut m = vec![vec![0u64; labels.len()]; labels.len()];
    for (p, t) in predictions.iter().zip(truths) {
        m[index[t]][index[p]] += 1;
    }
    Ok((labels, m))
}

/// Groups sample indices by label, in sorted label order.
fn strata(labels: &[String]) -> Vec<Vec<usize>> {
    let mut by: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by.entry(l.as_str()).or_default().push(i);
    }
    by.into_values().collect()
}

/// Seeded train/test split of `n` samples with `fraction` going to training.
///
/// With `strata`, each class contributes `round(fraction·n_class)` training
/// samples, so class proportions are kept within one sample per class.
/// Both index lists are returned sorted.
pub fn split(
    n: usize,
    strata_labels: Option<&[String]>,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "split fraction {fraction} must lie in (0, 1)"
        )));
    }
    let mut rng = stream(seed, &[TAG_SPLIT]);
    let groups = match strata_labels {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::Misaligned {
                    expected: n,
                    found: labels.len(),
                });
            }
            strata(labels)
        }
        None => vec![(0..n).collect()],
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut g in groups {
        let k = (fraction * g.len() as f64).round() as usize;
        if strata_labels.is_some() && (k == 0 || k == g.len()) {
            return Err(Error::EmptyClass(format!(
                "a class of {} samples cannot be split at fraction {fraction}",
                g.len()
            )));
        }
        g.shuffle(&mut rng);
        train.extend_from_slice(&g[..k]);
        test.extend_from_slice(&g[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "split of {n} samples at {fraction} leaves a side empty"
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Seeded assignment of `n` samples to `folds` folds; returns the fold of
/// each sample.
///
/// Without groups, samples (stratified by label when given) are shuffled and
/// dealt round-robin, so fold sizes differ by at most one. With groups, whole
/// groups are dealt in shuffled order to the currently smallest fold, which
/// keeps every group inside one fold at the cost of exact size balance.
pub fn kfold(
    n: usize,
    folds: usize,
    strata_labels: Option<&[String]>,
    groups: Option<&[String]>,
    seed: u64,
) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 folds, got {folds}"
        )));
    }
    if folds > n {
        return Err(Error::InvalidConfig(format!(
            "{folds} folds exceed {n} samples"
        )));
    }
    let mut rng = stream(seed, &[TAG_FOLDS]);
    let mut assignment = vec![0usize; n];
    if let Some(groups) = groups {
        if groups.len() != n {
            return Err(Error::Misaligned {
                expected: n,
                found: groups.len(),
            });
        }
        let mut units = strata(groups);
        if units.len() < folds {
            return Err(Error::InvalidConfig(format!(
                "{folds} folds exceed {} groups",
                units.len()
            )));
        }
        units.shuffle(&mut rng);
        let mut sizes = vec![0usize; folds];
        for unit in units {
            let f = (0..folds)
                .min_by_key(|&f| (sizes[f], f))
                .expect("folds >= 2");
            sizes[f] += unit.len();
            for i in unit {
                assignment[i] = f;
            }
        }
        return Ok(assignment);
    }
    let order: Vec<usize> = match strata_labels {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::Misaligned {
                    expected: n,
                    found: labels.len(),
                });
            }
            strata(labels)
                .into_iter()
                .flat_map(|mut g| {
                    g.shuffle(&mut rng);
                    g
                })
                .collect()
        }
        None => {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            all
        }
    };
    // A random fold offset keeps the larger folds from always being the first.
    let mut fold_order: Vec<usize> = (0..folds).collect();
    fold_order.shuffle(&mut rng);
    for (pos, i) in order.into_iter().enumerate() {
        assignment[i] = fold_order[pos % folds];
    }
    Ok(assignment)
}

/// Mean and sample standard deviation over replicates; the SD is absent for
/// a single replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
}

pub fn summarize(values: &[f64]) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::EmptyResult("replicate values to summarize"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n > 1)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    Ok(Summary { n, mean, sd })
}
