//! Sample-specific distributions: posterior component memberships of an
//! observed count and the induced outcome PDF.

use serde::{Deserialize, Serialize};

use crate::mixture::{nb_log_pmf, nb_pmf_row, Component, ComponentSet, FittedMixture};
use crate::special::log_sum_exp;
use crate::{Error, Matrix, Result, Scalar};

/// Outcomes `z, 0, 1, …, C, C+`; `z` marks a structural zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeGrid {
    truncation: u64,
}

impl OutcomeGrid {
    pub fn new(truncation: u64) -> Self {
        Self { truncation }
    }

    pub fn truncation(&self) -> u64 {
        self.truncation
    }

    /// `C + 3`.
    pub fn len(&self) -> usize {
        self.truncation as usize + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn structural_zero(&self) -> usize {
        0
    }

    /// Column of an observed count `x ≤ C`.
    pub fn count(&self, x: u64) -> usize {
        debug_assert!(x <= self.truncation);
        x as usize + 1
    }

    pub fn high(&self) -> usize {
        self.truncation as usize + 2
    }

    pub fn labels(&self) -> Vec<String> {
        let mut out = vec!["z".to_string()];
        out.extend((0..=self.truncation).map(|x| x.to_string()));
        out.push(format!("{}+", self.truncation));
        out
    }
}

/// Outcome probabilities of each component at unit resolution; rows are
/// components, columns follow the [`OutcomeGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PMatrix<T> {
    grid: OutcomeGrid,
    rows: Matrix<T>,
}

impl<T: Scalar> PMatrix<T> {
    pub fn for_components(set: &ComponentSet<T>) -> Result<Self> {
        let grid = OutcomeGrid::new(set.truncation());
        let mut rows = Matrix::zeros(set.len(), grid.len());
        for (k, comp) in set.components().iter().enumerate() {
            match *comp {
                Component::StructuralZero => rows.set(k, grid.structural_zero(), T::one()),
                Component::HighCount => rows.set(k, grid.high(), T::one()),
                Component::Gamma { alpha, beta } => {
                    let pmf = nb_pmf_row(set.truncation(), alpha, beta, T::one())?;
                    rows.row_mut(k)[1..].copy_from_slice(&pmf);
                }
            }
        }
        Ok(Self { grid, rows })
    }

    pub fn grid(&self) -> OutcomeGrid {
        self.grid
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.rows
    }

    pub fn n_components(&self) -> usize {
        self.rows.rows()
    }
}

pub fn build_p_matrix<T: Scalar>(mixture: &FittedMixture<T>) -> Result<PMatrix<T>> {
    PMatrix::for_components(&mixture.component_set)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SampleDistribution<T> {
    pub sample_weights: Vec<T>,
    pub pdf: Vec<T>,
}

/// Posterior membership `wᵢ` of a count `n` observed at resolution `t`.
///
/// Gammas score `wₘ·NB(n | αₘ, βₘ/(t+βₘ))`, the zero mass scores `w_z`
/// when `n = 0`, and counts above `C` belong to the high-count mass outright.
/// If every admissible score underflows, the prior weights of the admissible
/// components are used instead.
pub fn component_posterior<T: Scalar>(n: u64, t: T, mixture: &FittedMixture<T>) -> Result<Vec<T>> {
    let set = &mixture.component_set;
    let m = set.len();
    if !(t > T::zero() && t.is_finite()) {
        return Err(Error::NonFinite("resolution"));
    }
    let mut out = vec![T::zero(); m];
    if n > set.truncation() {
        out[set.high_index()] = T::one();
        return Ok(out);
    }
    let mut log_scores = vec![T::neg_infinity(); m];
    let mut admissible = vec![false; m];
    for (k, comp) in set.components().iter().enumerate() {
        let w = mixture.weights[k];
        match *comp {
            Component::StructuralZero if n == 0 => {
                admissible[k] = true;
                if w > T::zero() {
                    log_scores[k] = w.ln();
                }
            }
            Component::Gamma { alpha, beta } => {
                admissible[k] = true;
                if w > T::zero() {
                    log_scores[k] = w.ln() + nb_log_pmf(n, alpha, beta, t)?;
                }
            }
            _ => {}
        }
    }
    let norm = log_sum_exp(&log_scores);
    if norm.is_finite() {
        for (o, &s) in out.iter_mut().zip(&log_scores) {
            *o = (s - norm).exp();
        }
        let total: T = out.iter().copied().sum();
        out.iter_mut().for_each(|v| *v = *v / total);
        return Ok(out);
    }
    let prior: T = (0..m)
        .filter(|&k| admissible[k])
        .map(|k| mixture.weights[k])
        .sum();
    if prior > T::zero() {
        log::warn!("posterior underflow for count {n}; using prior weights");
        for k in (0..m).filter(|&k| admissible[k]) {
            out[k] = mixture.weights[k] / prior;
        }
        return Ok(out);
    }
    Err(Error::DegeneratePosterior(n))
}

/// `Pᵢ = wᵢ′P`, with the `C+` cell absorbing rounding so the PDF sums to one.
pub fn sample_pdf<T: Scalar>(sample_weights: &[T], p: &PMatrix<T>) -> Result<Vec<T>> {
    if sample_weights.len() != p.n_components() {
        return Err(Error::Misaligned {
            expected: p.n_components(),
            found: sample_weights.len(),
        });
    }
    let mut pdf = p.matrix().left_mul(sample_weights);
    let high = p.grid().high();
    let rest: T = pdf[..high].iter().copied().sum();
    pdf[high] = (T::one() - rest).max(T::zero());
    Ok(pdf)
}

pub fn sample_distribution<T: Scalar>(
    n: u64,
    t: T,
    mixture: &FittedMixture<T>,
    p: &PMatrix<T>,
) -> Result<SampleDistribution<T>> {
    let sample_weights = component_posterior(n, t, mixture)?;
    let pdf = sample_pdf(&sample_weights, p)?;
    Ok(SampleDistribution {
        sample_weights,
        pdf,
    })
}
