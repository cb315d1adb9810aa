//! Nearest-class-mean ("k-means") and k-nearest-neighbour classifiers.
//!
//! Samples are represented block-wise, one block per OTU: component weights
//! for the distribution metrics, a single relative abundance for the
//! baselines. Every metric is then a sum over OTUs of a per-block distance, so
//! both classifiers run unchanged for all four metrics.
//!
//! The nearest-mean classifier is supervised: class means come from the
//! training labels and no Lloyd iterations are run.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distances::{clip, DistanceRecord, GramMatrix};
use crate::evaluation::kfold;
use crate::{Error, Matrix, PMatrix, Result, Scalar};

pub use crate::distances::Metric;

/// One sample: a feature block per OTU.
pub type SampleFeatures<T> = Vec<Vec<T>>;

/// Distance between two blocks of the same OTU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum BlockKernel<T> {
    /// `dᵀKd` for the weight difference `d`.
    Quadratic(Matrix<T>),
    SquaredDifference,
    AbsoluteDifference,
}

impl<T: Scalar> BlockKernel<T> {
    fn width(&self) -> Option<usize> {
        match self {
            BlockKernel::Quadratic(k) => Some(k.rows()),
            _ => Some(1),
        }
    }

    fn eval(&self, a: &[T], b: &[T]) -> T {
        match self {
            BlockKernel::Quadratic(k) => {
                let d: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
                clip(k.quadratic_form(&d))
            }
            BlockKernel::SquaredDifference => {
                a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
            }
            BlockKernel::AbsoluteDifference => a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum(),
        }
    }
}

/// A metric together with its per-OTU block kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FeatureSpace<T> {
    metric: Metric,
    blocks: Vec<BlockKernel<T>>,
}

impl<T: Scalar> FeatureSpace<T> {
    /// L²-PDF: since a sample PDF is `wᵀP`, the kernel is `PPᵀ`.
    pub fn l2_pdf(p_matrices: &[PMatrix<T>]) -> Self {
        Self {
            metric: Metric::L2Pdf,
            blocks: p_matrices
                .iter()
                .map(|p| BlockKernel::Quadratic(p.matrix().outer_gram()))
                .collect(),
        }
    }

    pub fn l2_cdf(grams: &[GramMatrix<T>]) -> Self {
        Self {
            metric: Metric::L2Cdf,
            blocks: grams
                .iter()
                .map(|g| BlockKernel::Quadratic(g.matrix().clone()))
                .collect(),
        }
    }

    /// Euclidean or Manhattan over one abundance value per OTU.
    pub fn abundance(metric: Metric, n_otus: usize) -> Result<Self> {
        let kernel = match metric {
            Metric::Euclidean => BlockKernel::SquaredDifference,
            Metric::Manhattan => BlockKernel::AbsoluteDifference,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "{other} is not an abundance metric"
                )))
            }
        };
        Ok(Self {
            metric,
            blocks: vec![kernel; n_otus],
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn n_otus(&self) -> usize {
        self.blocks.len()
    }

    pub fn check(&self, sample: &[Vec<T>]) -> Result<()> {
        if sample.len() != self.blocks.len() {
            return Err(Error::OtuMismatch(format!(
                "sample has {} OTUs, model has {}",
                sample.len(),
                self.blocks.len()
            )));
        }
        for (j, (block, kernel)) in sample.iter().zip(&self.blocks).enumerate() {
            if kernel.width() != Some(block.len()) {
                return Err(Error::OtuMismatch(format!(
                    "OTU {j}: block of length {} does not match the model",
                    block.len()
                )));
            }
        }
        Ok(())
    }

    /// Sum of per-OTU contributions. For Euclidean this is the squared
    /// distance; [`Metric::finish`] turns it into the reported value.
    pub fn raw_distance(&self, a: &[Vec<T>], b: &[Vec<T>]) -> T {
        self.blocks
            .iter()
            .zip(a)
            .zip(b)
            .map(|((k, x), y)| k.eval(x, y))
            .sum()
    }

    pub fn distance(&self, a: &[Vec<T>], b: &[Vec<T>]) -> T {
        self.metric.finish(self.raw_distance(a, b))
    }

    pub fn record(&self, a: &[Vec<T>], b: &[Vec<T>]) -> Result<DistanceRecord<T>> {
        self.check(a)?;
        self.check(b)?;
        Ok(DistanceRecord::from_parts(
            self.blocks
                .iter()
                .zip(a)
                .zip(b)
                .map(|((k, x), y)| k.eval(x, y))
                .collect(),
        ))
    }
}

/// Sorted distinct labels and each sample's index into them.
fn encode_labels(labels: &[String]) -> (Vec<String>, Vec<usize>) {
    let classes: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, idx)
}

fn check_training<T: Scalar>(
    space: &FeatureSpace<T>,
    samples: &[SampleFeatures<T>],
    labels: &[String],
) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptyTable);
    }
    if samples.len() != labels.len() {
        return Err(Error::Misaligned {
            expected: samples.len(),
            found: labels.len(),
        });
    }
    samples.iter().try_for_each(|s| space.check(s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor<T> {
    pub index: usize,
    pub label: String,
    pub distance: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub enum PredictionDetail<T> {
    /// Total distance to every class mean, in class order.
    ClassDistances(Vec<(String, T)>),
    /// The k nearest training samples, nearest first.
    Neighbors(Vec<Neighbor<T>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Prediction<T> {
    pub sample_id: String,
    pub truth: Option<String>,
    pub predicted: String,
    pub detail: PredictionDetail<T>,
}

/// Writes predictions as delimited text with a header row.
pub fn write_predictions<T: Scalar, W: Write>(
    out: W,
    predictions: &[Prediction<T>],
    delimiter: u8,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(out);
    w.write_record(["sample_id", "truth", "predicted", "detail"])?;
    for p in predictions {
        let detail = match &p.detail {
            PredictionDetail::ClassDistances(d) => d
                .iter()
                .map(|(c, v)| format!("{c}:{v}"))
                .collect::<Vec<_>>()
                .join(";"),
            PredictionDetail::Neighbors(n) => n
                .iter()
                .map(|nb| format!("{}:{}:{}", nb.index, nb.label, nb.distance))
                .collect::<Vec<_>>()
                .join(";"),
        };
        w.write_record([
            p.sample_id.as_str(),
            p.truth.as_deref().unwrap_or(""),
            p.predicted.as_str(),
            detail.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn predict_all<T, F>(
    samples: &[SampleFeatures<T>],
    ids: &[String],
    truths: Option<&[String]>,
    f: F,
) -> Result<Vec<Prediction<T>>>
where
    T: Scalar,
    F: Fn(&[Vec<T>], &str) -> Result<Prediction<T>> + Sync,
{
    if ids.len() != samples.len() {
        return Err(Error::Misaligned {
            expected: samples.len(),
            found: ids.len(),
        });
    }
    if let Some(t) = truths {
        if t.len() != samples.len() {
            return Err(Error::Misaligned {
                expected: samples.len(),
                found: t.len(),
            });
        }
    }
    samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut p = f(s, &ids[i])?;
            p.truth = truths.map(|t| t[i].clone());
            Ok(p)
        })
        .collect()
}

/// Per-class mean feature blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KMeansModel<T> {
    pub space: FeatureSpace<T>,
    pub classes: Vec<String>,
    pub class_sizes: Vec<usize>,
    pub means: Vec<SampleFeatures<T>>,
}

impl<T: Scalar> KMeansModel<T> {
    /// Class means are arithmetic means of the training blocks per OTU.
    pub fn train(
        space: FeatureSpace<T>,
        samples: &[SampleFeatures<T>],
        labels: &[String],
    ) -> Result<Self> {
        check_training(&space, samples, labels)?;
        let (classes, idx) = encode_labels(labels);
        let mut sizes = vec![0usize; classes.len()];
        let mut means: Vec<SampleFeatures<T>> = vec![
            samples[0]
                .iter()
                .map(|b| vec![T::zero(); b.len()])
                .collect();
            classes.len()
        ];
        for (s, &c) in samples.iter().zip(&idx) {
            sizes[c] += 1;
            for (acc, block) in means[c].iter_mut().zip(s) {
                for (a, &v) in acc.iter_mut().zip(block) {
                    *a = *a + v;
                }
            }
        }
        for (mean, &n) in means.iter_mut().zip(&sizes) {
            let n = T::from_usize_lossy(n);
            mean.iter_mut().flatten().for_each(|v| *v = *v / n);
        }
        Ok(Self {
            space,
            classes,
            class_sizes: sizes,
            means,
        })
    }

    /// Assigns the class with the smallest total distance to its mean; ties
    /// go to the class that sorts first.
    pub fn predict(&self, sample: &[Vec<T>], sample_id: &str) -> Result<Prediction<T>> {
        self.space.check(sample)?;
        let raw: Vec<T> = self
            .means
            .iter()
            .map(|m| self.space.raw_distance(sample, m))
            .collect();
        let mut best = 0;
        for (c, &d) in raw.iter().enumerate().skip(1) {
            if d < raw[best] {
                best = c;
            }
        }
        Ok(Prediction {
            sample_id: sample_id.to_string(),
            truth: None,
            predicted: self.classes[best].clone(),
            detail: PredictionDetail::ClassDistances(
                self.classes
                    .iter()
                    .cloned()
                    .zip(raw.iter().map(|&d| self.space.metric().finish(d)))
                    .collect(),
            ),
        })
    }

    pub fn predict_many(
        &self,
        samples: &[SampleFeatures<T>],
        ids: &[String],
        truths: Option<&[String]>,
    ) -> Result<Vec<Prediction<T>>> {
        predict_all(samples, ids, truths, |s, id| self.predict(s, id))
    }
}

pub const DEFAULT_K_GRID: [usize; 8] = [1, 3, 5, 7, 9, 11, 15, 21];
pub const DEFAULT_CV_FOLDS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KSelection {
    Fixed(usize),
    CrossValidated {
        grid: Vec<usize>,
        folds: usize,
        seed: u64,
    },
}

impl KSelection {
    pub fn default_cv(seed: u64) -> Self {
        KSelection::CrossValidated {
            grid: DEFAULT_K_GRID.to_vec(),
            folds: DEFAULT_CV_FOLDS,
            seed,
        }
    }
}

/// Majority label among `neighbors` (reported distance, class index). Label
/// ties go to the smallest summed distance, then to the class sorting first.
fn vote<T: Scalar>(neighbors: impl Iterator<Item = (T, usize)>, n_classes: usize) -> usize {
    let mut count = vec![0usize; n_classes];
    let mut total = vec![T::zero(); n_classes];
    for (d, c) in neighbors {
        count[c] += 1;
        total[c] = total[c] + d;
    }
    let mut best = 0;
    for c in 1..n_classes {
        if count[c] > count[best] || (count[c] == count[best] && total[c] < total[best]) {
            best = c;
        }
    }
    best
}

/// Training indices ordered by distance, equal distances by index.
fn rank_neighbors<T: Scalar>(dist: &[T], keep: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dist.len()).filter(|&j| keep(j)).collect();
    order.sort_by(|&a, &b| {
        dist[a]
            .partial_cmp(&dist[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KnnModel<T> {
    pub space: FeatureSpace<T>,
    pub classes: Vec<String>,
    pub samples: Vec<SampleFeatures<T>>,
    pub labels: Vec<usize>,
    pub k: usize,
    /// Mean fold accuracy of every grid value, when `k` was cross-validated.
    pub cv_scores: Option<Vec<(usize, f64)>>,
}

impl<T: Scalar> KnnModel<T> {
    pub fn train(
        space: FeatureSpace<T>,
        samples: Vec<SampleFeatures<T>>,
        labels: &[String],
        selection: &KSelection,
    ) -> Result<Self> {
        check_training(&space, &samples, labels)?;
        let (classes, idx) = encode_labels(labels);
        let n = samples.len();
        let mut model = Self {
            space,
            classes,
            samples,
            labels: idx,
            k: 1,
            cv_scores: None,
        };
        match selection {
            KSelection::Fixed(k) => {
                if *k == 0 || *k > n {
                    return Err(Error::InvalidConfig(format!("k = {k} must lie in 1..={n}")));
                }
                model.k = *k;
            }
            KSelection::CrossValidated { grid, folds, seed } => {
                let mut grid: Vec<usize> =
                    grid.iter().copied().filter(|&k| k >= 1 && k <= n).collect();
                grid.sort_unstable();
                grid.dedup();
                if grid.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "no k in the grid fits {n} training samples"
                    )));
                }
                let scores = model.cross_validate(&grid, (*folds).min(n), *seed, labels)?;
                let mut best = 0;
                for (i, s) in scores.iter().enumerate() {
                    if s.1 > scores[best].1 {
                        best = i;
                    }
                }
                model.k = scores[best].0;
                model.cv_scores = Some(scores);
            }
        }
        Ok(model)
    }

    fn cross_validate(
        &self,
        grid: &[usize],
        folds: usize,
        seed: u64,
        labels: &[String],
    ) -> Result<Vec<(usize, f64)>> {
        let n = self.samples.len();
        let fold = kfold(n, folds, Some(labels), None, seed)?;
        let dist: Vec<Vec<T>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| self.space.distance(&self.samples[i], &self.samples[j]))
                    .collect()
            })
            .collect();
        // correct[g][f]: held-out hits in fold f for grid value g
        let mut correct = vec![vec![0usize; folds]; grid.len()];
        let mut fold_size = vec![0usize; folds];
        for i in 0..n {
            fold_size[fold[i]] += 1;
            let order = rank_neighbors(&dist[i], |j| fold[j] != fold[i]);
            for (g, &k) in grid.iter().enumerate() {
                let top = order.iter().take(k).map(|&j| (dist[i][j], self.labels[j]));
                if vote(top, self.classes.len()) == self.labels[i] {
                    correct[g][fold[i]] += 1;
                }
            }
        }
        Ok(grid
            .iter()
            .zip(&correct)
            .map(|(&k, hits)| {
                let acc: f64 = hits
                    .iter()
                    .zip(&fold_size)
                    .map(|(&h, &s)| h as f64 / s as f64)
                    .sum::<f64>()
                    / folds as f64;
                (k, acc)
            })
            .collect())
    }

    /// Majority label of the `k` nearest training samples. Equal distances at
    /// the k-th place prefer the lower training index.
    pub fn predict(&self, sample: &[Vec<T>], sample_id: &str) -> Result<Prediction<T>> {
        self.space.check(sample)?;
        let dist: Vec<T> = self
            .samples
            .iter()
            .map(|s| self.space.distance(sample, s))
            .collect();
        let order = rank_neighbors(&dist, |_| true);
        let top = &order[..self.k.min(order.len())];
        let c = vote(
            top.iter().map(|&j| (dist[j], self.labels[j])),
            self.classes.len(),
        );
        Ok(Prediction {
            sample_id: sample_id.to_string(),
            truth: None,
            predicted: self.classes[c].clone(),
            detail: PredictionDetail::Neighbors(
                top.iter()
                    .map(|&j| Neighbor {
                        index: j,
                        label: self.classes[self.labels[j]].clone(),
                        distance: dist[j],
                    })
                    .collect(),
            ),
        })
    }

    pub fn predict_many(
        &self,
        samples: &[SampleFeatures<T>],
        ids: &[String],
        truths: Option<&[String]>,
    ) -> Result<Vec<Prediction<T>>> {
        predict_all(samples, ids, truths, |s, id| self.predict(s, id))
    }
}
