//! Distances between sample distributions and between abundance profiles.
//!
//! The two distribution distances are squared L² norms (no square root):
//! `l2_pdf` on the discrete outcome grid and `l2_cdf` between rate CDFs on
//! `[0, C]`. Both depend on the samples only through their component weights,
//! so either can be written as `(wₐ − w_b)ᵀ K (wₐ − w_b)` for a per-OTU matrix
//! `K`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mixture::{Component, ComponentSet};
use crate::quadrature::integrate;
use crate::{Error, Matrix, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    L2Pdf,
    L2Cdf,
    Euclidean,
    Manhattan,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::L2Pdf,
        Metric::L2Cdf,
        Metric::Euclidean,
        Metric::Manhattan,
    ];

    /// Whether the metric works on fitted mixture distributions.
    pub fn is_distributional(self) -> bool {
        matches!(self, Metric::L2Pdf | Metric::L2Cdf)
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::L2Pdf => "l2pdf",
            Metric::L2Cdf => "l2cdf",
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
        }
    }

    /// Maps a summed per-OTU contribution to the reported distance.
    /// Euclidean totals are sums of squares, reported as their root.
    pub fn finish<T: Scalar>(self, total: T) -> T {
        match self {
            Metric::Euclidean => total.max(T::zero()).sqrt(),
            _ => total,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "l2pdf" | "pdf" => Ok(Metric::L2Pdf),
            "l2cdf" | "cdf" => Ok(Metric::L2Cdf),
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            other => Err(Error::InvalidConfig(format!("unknown metric `{other}`"))),
        }
    }
}

/// `∫₀^C G_{m₁}(x) G_{m₂}(x) dx` for every pair of component rate CDFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GramMatrix<T> {
    truncation: u64,
    entries: Matrix<T>,
}

impl<T: Scalar> GramMatrix<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.entries
    }

    pub fn truncation(&self) -> u64 {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.entries.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.rows() == 0
    }
}

/// Absolute quadrature error target per Gram entry.
pub const GRAM_TOLERANCE: f64 = 1e-9;

/// Builds the Gram matrix by adaptive quadrature of CDF products.
///
/// The zero mass has CDF 1 on `[0, C]`; the high-count mass has CDF 0 on
/// `[0, C)` (its jump at `C` has measure zero).
pub fn build_gram<T: Scalar>(set: &ComponentSet<T>) -> Result<GramMatrix<T>> {
    let c = T::lit(set.truncation() as f64);
    let comps = set.components();
    let m = comps.len();
    let tol = T::lit(GRAM_TOLERANCE).max(T::tolerance() * c);
    let mut entries = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = match (comps[i], comps[j]) {
                (Component::HighCount, _) | (_, Component::HighCount) => T::zero(),
                (Component::StructuralZero, Component::StructuralZero) => c,
                (a, b) => {
                    let breaks: Vec<T> = [a, b]
                        .iter()
                        .filter_map(|comp| match *comp {
                            Component::Gamma { alpha, beta } => Some(alpha / beta),
                            _ => None,
                        })
                        .collect();
                    integrate(
                        |x| a.rate_cdf(x) * b.rate_cdf(x),
                        T::zero(),
                        c,
                        tol,
                        &breaks,
                    )?
                }
            };
            entries.set(i, j, v);
            entries.set(j, i, v);
        }
    }
    Ok(GramMatrix {
        truncation: set.truncation(),
        entries,
    })
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Misaligned {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// `Σₓ (fₐ(x) − f_b(x))²` over the outcome grid.
pub fn l2_pdf<T: Scalar>(pdf_a: &[T], pdf_b: &[T]) -> Result<T> {
    check_len(pdf_a.len(), pdf_b.len())?;
    Ok(pdf_a
        .iter()
        .zip(pdf_b)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum())
}

/// `(wₐ − w_b) G (wₐ − w_b)′`, i.e. `∫₀^C (Fₐ − F_b)²`.
pub fn l2_cdf<T: Scalar>(weights_a: &[T], weights_b: &[T], gram: &GramMatrix<T>) -> Result<T> {
    check_len(gram.len(), weights_a.len())?;
    check_len(gram.len(), weights_b.len())?;
    let diff: Vec<T> = weights_a
        .iter()
        .zip(weights_b)
        .map(|(&a, &b)| a - b)
        .collect();
    Ok(clip(gram.matrix().quadratic_form(&diff)))
}

/// Quadratic-form values slightly below zero are rounding noise.
#[inline]
pub(crate) fn clip<T: Scalar>(v: T) -> T {
    if v < T::zero() {
        debug_assert!(v > -T::lit(1e-8), "quadratic form markedly negative: {v}");
        T::zero()
    } else {
        v
    }
}

pub fn euclidean<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    check_len(a.len(), b.len())?;
    Ok(a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt())
}

pub fn manhattan<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    check_len(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(&x, &y)| (x - y).abs()).sum())
}

/// Per-OTU contributions and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DistanceRecord<T> {
    pub per_otu: Vec<T>,
    pub total: T,
}

impl<T: Scalar> DistanceRecord<T> {
    pub fn from_parts(per_otu: Vec<T>) -> Self {
        let total = per_otu.iter().copied().sum();
        Self { per_otu, total }
    }
}

/// One side of a [`total_distance`] comparison.
#[derive(Debug, Clone, Copy)]
pub enum SampleView<'a, T> {
    /// Per-OTU component weights and outcome PDFs.
    Distributions(&'a [crate::SampleDistribution<T>]),
    /// Relative abundances, one per OTU.
    Abundance(&'a [T]),
}

/// Sums per-OTU distances. For Euclidean the per-OTU contributions are
/// squared differences, so the total is the squared distance
/// (see [`Metric::finish`]).
pub fn total_distance<T: Scalar>(
    a: SampleView<'_, T>,
    b: SampleView<'_, T>,
    metric: Metric,
    grams: Option<&[GramMatrix<T>]>,
) -> Result<DistanceRecord<T>> {
    let per_otu = match (a, b, metric) {
        (SampleView::Distributions(a), SampleView::Distributions(b), Metric::L2Pdf) => {
            if a.len() != b.len() {
                return Err(Error::OtuMismatch(format!(
                    "{} vs {} OTUs",
                    a.len(),
                    b.len()
                )));
            }
            a.iter()
                .zip(b)
                .map(|(x, y)| l2_pdf(&x.pdf, &y.pdf))
                .collect::<Result<Vec<_>>>()?
        }
        (SampleView::Distributions(a), SampleView::Distributions(b), Metric::L2Cdf) => {
            let grams = grams
                .ok_or_else(|| Error::InvalidConfig("L2-CDF needs per-OTU Gram matrices".into()))?;
            if a.len() != b.len() || a.len() != grams.len() {
                return Err(Error::OtuMismatch(format!(
                    "{} vs {} OTUs",
                    a.len(),
                    b.len()
                )));
            }
            a.iter()
                .zip(b)
                .zip(grams)
                .map(|((x, y), g)| l2_cdf(&x.sample_weights, &y.sample_weights, g))
                .collect::<Result<Vec<_>>>()?
        }
        (
            SampleView::Abundance(a),
            SampleView::Abundance(b),
            Metric::Euclidean | Metric::Manhattan,
        ) => {
            if a.len() != b.len() {
                return Err(Error::OtuMismatch(format!(
                    "{} vs {} OTUs",
                    a.len(),
                    b.len()
                )));
            }
            a.iter()
                .zip(b)
                .map(|(&x, &y)| {
                    if metric == Metric::Euclidean {
                        (x - y) * (x - y)
                    } else {
                        (x - y).abs()
                    }
                })
                .collect()
        }
        _ => {
            return Err(Error::InvalidConfig(format!(
                "metric {metric} does not apply to these inputs"
            )))
        }
    };
    Ok(DistanceRecord::from_parts(per_otu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SampleDistribution;
    use approx::assert_abs_diff_eq;

    #[test]
    fn l2_pdf_examples() {
        let a = [0.2, 0.3, 0.5];
        assert_eq!(l2_pdf(&a, &a).unwrap(), 0.0);
        assert_eq!(l2_pdf(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]).unwrap(), 2.0);
        assert_eq!(l2_pdf(&[0.5, 0.5, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 0.5);
        assert!(l2_pdf(&[1.0], &[0.5, 0.5]).is_err());
    }

    #[test]
    fn gram_point_mass_entries() {
        let set = ComponentSet::<f64>::from_gammas(&[(1.0, 1.0)], 16).unwrap();
        let g = build_gram(&set).unwrap();
        assert_eq!(g.matrix().get(0, 0), 16.0);
        assert_eq!(g.matrix().get(0, 2), 0.0);
        assert_eq!(g.matrix().get(2, 2), 0.0);
    }

    #[test]
    fn gram_exponential_entry() {
        let set = ComponentSet::<f64>::from_gammas(&[(1.0, 1.0)], 2).unwrap();
        let g = build_gram(&set).unwrap();
        assert_abs_diff_eq!(g.matrix().get(1, 0), 1.0 + (-2.0f64).exp(), epsilon = 1e-9);
        // ∫₀² (1 − e^{−x})² dx = 2 − 2(1 − e^{−2}) + (1 − e^{−4})/2
        let e2 = (-2.0f64).exp();
        let e4 = (-4.0f64).exp();
        assert_abs_diff_eq!(
            g.matrix().get(1, 1),
            2.0 - 2.0 * (1.0 - e2) + (1.0 - e4) / 2.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn l2_cdf_step_functions() {
        let set = ComponentSet::<f64>::from_gammas(&[(2.0, 1.0)], 4).unwrap();
        let g = build_gram(&set).unwrap();
        assert_eq!(l2_cdf(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0], &g).unwrap(), 4.0);
        assert_eq!(l2_cdf(&[0.3, 0.3, 0.4], &[0.3, 0.3, 0.4], &g).unwrap(), 0.0);
        assert!(l2_cdf(&[1.0], &[1.0], &g).is_err());
    }

    #[test]
    fn gram_is_symmetric_psd() {
        let set = ComponentSet::<f64>::from_gammas(
            &[(1.0, 2.0), (1.0, 1.0), (3.0, 1.0), (8.0, 1.0), (20.0, 1.0)],
            30,
        )
        .unwrap();
        let g = build_gram(&set).unwrap();
        assert!(g.matrix().is_symmetric(0.0));
        let tr = g.matrix().trace();
        assert!(g
            .matrix()
            .symmetric_eigenvalues()
            .iter()
            .all(|&e| e >= -1e-8 * tr));
    }

    #[test]
    fn baselines() {
        assert_eq!(euclidean(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(euclidean(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2f64.sqrt());
        assert_abs_diff_eq!(
            euclidean(&[0.3, 0.7], &[0.7, 0.3]).unwrap(),
            0.32f64.sqrt(),
            epsilon = 1e-15
        );
        assert_eq!(manhattan(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 2.0);
        assert_abs_diff_eq!(
            manhattan(&[0.3, 0.7], &[0.7, 0.3]).unwrap(),
            0.8,
            epsilon = 1e-15
        );
        assert!(manhattan(&[1.0], &[]).is_err());
    }

    fn dist(pdf: Vec<f64>) -> SampleDistribution<f64> {
        SampleDistribution {
            sample_weights: vec![1.0],
            pdf,
        }
    }

    #[test]
    fn totals_add_up() {
        let a = vec![dist(vec![0.5, 0.5, 0.0]), dist(vec![1.0, 0.0, 0.0])];
        let b = vec![dist(vec![0.0, 1.0, 0.0]), dist(vec![0.0, 0.0, 1.0])];
        let r = total_distance(
            SampleView::Distributions(&a),
            SampleView::Distributions(&b),
            Metric::L2Pdf,
            None,
        )
        .unwrap();
        assert_eq!(r.per_otu, vec![0.5, 2.0]);
        assert_eq!(r.total, 2.5);
        let (ra, rb): (Vec<_>, Vec<_>) = (
            a.iter().rev().cloned().collect(),
            b.iter().rev().cloned().collect(),
        );
        let swapped = total_distance(
            SampleView::Distributions(&ra),
            SampleView::Distributions(&rb),
            Metric::L2Pdf,
            None,
        )
        .unwrap();
        assert_eq!(swapped.total, r.total);
        let one = total_distance(
            SampleView::Distributions(&a[..1]),
            SampleView::Distributions(&b[..1]),
            Metric::L2Pdf,
            None,
        )
        .unwrap();
        assert_eq!(one.total, 0.5);
        assert!(total_distance(
            SampleView::Distributions(&a[..1]),
            SampleView::Distributions(&b),
            Metric::L2Pdf,
            None
        )
        .is_err());
    }

    #[test]
    fn abundance_totals() {
        let a = [0.3, 0.7];
        let b = [0.7, 0.3];
        let e = total_distance(
            SampleView::Abundance(&a),
            SampleView::Abundance(&b),
            Metric::Euclidean,
            None,
        )
        .unwrap();
        assert_abs_diff_eq!(
            Metric::Euclidean.finish(e.total),
            0.32f64.sqrt(),
            epsilon = 1e-15
        );
        let m = total_distance(
            SampleView::Abundance(&a),
            SampleView::Abundance(&b),
            Metric::Manhattan,
            None,
        )
        .unwrap();
        assert_abs_diff_eq!(m.total, 0.8, epsilon = 1e-15);
        assert!(total_distance(
            SampleView::Abundance(&a),
            SampleView::Abundance(&b),
            Metric::L2Pdf,
            None
        )
        .is_err());
    }

    #[test]
    fn metric_parsing() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert_eq!("L2-PDF".parse::<Metric>().unwrap(), Metric::L2Pdf);
        assert!("cosine".parse::<Metric>().is_err());
    }
}
