use serde::{Deserialize, Serialize};

use super::negbin::nb_pmf_row;
use super::{Component, ComponentSet};
use crate::{Error, Matrix, ResolutionVector, Result, Scalar};

/// Number of samples observing each count `x ∈ {0, …, C, C+}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregateCounts {
    y: Vec<u64>,
}

impl AggregateCounts {
    /// Tallies `counts` with everything above `c` pooled into the last cell.
    pub fn tally(counts: &[u64], c: u64) -> Self {
        let mut y = vec![0u64; c as usize + 2];
        for &n in counts {
            let cell = if n > c { c as usize + 1 } else { n as usize };
            y[cell] += 1;
        }
        Self { y }
    }

    /// Tally of a resample given per-sample multiplicities.
    pub fn tally_weighted(counts: &[u64], multiplicity: &[u32], c: u64) -> Self {
        let mut y = vec![0u64; c as usize + 2];
        for (&n, &k) in counts.iter().zip(multiplicity) {
            let cell = if n > c { c as usize + 1 } else { n as usize };
            y[cell] += u64::from(k);
        }
        Self { y }
    }

    pub fn values(&self) -> &[u64] {
        &self.y
    }

    pub fn truncation(&self) -> u64 {
        self.y.len() as u64 - 2
    }

    /// `I = Σ yₓ`.
    pub fn n_samples(&self) -> u64 {
        self.y.iter().sum()
    }
}

pub fn aggregate_counts(counts: &[u64], c: u64) -> Result<AggregateCounts> {
    if c < 1 {
        return Err(Error::InvalidConfig(
            "truncation point must be at least 1".into(),
        ));
    }
    Ok(AggregateCounts::tally(counts, c))
}

/// Outcome probabilities `p_{xmi}` of every component for every sample,
/// laid out sample-major so that resampled designs are weighted sums.
#[derive(Debug, Clone)]
pub(crate) struct SampleOutcomeTables<T> {
    n_components: usize,
    width: usize,
    /// `[sample][component][outcome]`, outcomes `0..=C, C+`.
    data: Vec<T>,
    zero_index: usize,
    high_index: usize,
}

impl<T: Scalar> SampleOutcomeTables<T> {
    pub fn new(set: &ComponentSet<T>, resolutions: &[T]) -> Result<Self> {
        let c = set.truncation();
        let width = c as usize + 2;
        let m = set.len();
        let mut data = vec![T::zero(); resolutions.len() * m * width];
        for (i, &t) in resolutions.iter().enumerate() {
            for (k, comp) in set.components().iter().enumerate() {
                let dst = &mut data[(i * m + k) * width..(i * m + k + 1) * width];
                match *comp {
                    Component::StructuralZero => dst[0] = T::one(),
                    Component::HighCount => dst[width - 1] = T::one(),
                    Component::Gamma { alpha, beta } => {
                        dst.copy_from_slice(&nb_pmf_row(c, alpha, beta, t)?)
                    }
                }
            }
        }
        Ok(Self {
            n_components: m,
            width,
            data,
            zero_index: set.zero_index(),
            high_index: set.high_index(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.data.len() / (self.n_components * self.width).max(1)
    }

    /// Expected-count design `B[x][m] = Σᵢ kᵢ p_{xmi}` (so `E[y] = B w`),
    /// where `kᵢ` are multiplicities (all ones when `None`).
    pub fn design(&self, multiplicity: Option<&[u32]>) -> Matrix<T> {
        let (m, w) = (self.n_components, self.width);
        let mut colmajor = vec![T::zero(); m * w];
        for i in 0..self.n_samples() {
            let k = multiplicity.map_or(1, |mult| mult[i]);
            if k == 0 {
                continue;
            }
            let kf = T::lit(f64::from(k));
            for comp in 0..m {
                if comp == self.zero_index || comp == self.high_index {
                    continue;
                }
                let src = &self.data[(i * m + comp) * w..(i * m + comp + 1) * w];
                let dst = &mut colmajor[comp * w..(comp + 1) * w];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d = *d + kf * s;
                }
            }
        }
        let total = T::lit(multiplicity.map_or(self.n_samples() as f64, |mult| {
            mult.iter().map(|&k| f64::from(k)).sum()
        }));
        colmajor[self.zero_index * w] = total;
        colmajor[self.high_index * w + w - 1] = total;
        let mut out = Matrix::zeros(w, m);
        for comp in 0..m {
            for x in 0..w {
                out.set(x, comp, colmajor[comp * w + x]);
            }
        }
        out
    }
}

/// Expected aggregate counts `I·Σₘ wₘ p_{xm}` over `x = 0..C, C+`.
pub fn expected_aggregate<T: Scalar>(
    set: &ComponentSet<T>,
    weights: &[T],
    resolutions: &ResolutionVector<T>,
) -> Result<Vec<T>> {
    if weights.len() != set.len() {
        return Err(Error::Misaligned {
            expected: set.len(),
            found: weights.len(),
        });
    }
    let design = SampleOutcomeTables::new(set, resolutions.values())?.design(None);
    Ok(design.mul_vec(weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn tally_example() {
        let y = aggregate_counts(&[0, 0, 1, 3, 9], 3).unwrap();
        assert_eq!(y.values(), &[2, 1, 0, 1, 1]);
        assert_eq!(y.n_samples(), 5);
        assert_eq!(y.truncation(), 3);
        let y = aggregate_counts(&[0, 1, 2], 5).unwrap();
        assert_eq!(*y.values().last().unwrap(), 0);
        assert_eq!(aggregate_counts(&[], 2).unwrap().n_samples(), 0);
        assert!(aggregate_counts(&[1], 0).is_err());
    }

    #[test]
    fn point_mass_expectations() {
        let set = ComponentSet::<f64>::from_gammas(&[(1.0, 1.0)], 3).unwrap();
        let t = ResolutionVector::from_values(vec![0.5, 1.0, 1.5]).unwrap();
        let e = expected_aggregate(&set, &[1.0, 0.0, 0.0], &t).unwrap();
        assert_eq!(e, vec![3.0, 0.0, 0.0, 0.0, 0.0]);
        let e = expected_aggregate(&set, &[0.0, 0.0, 1.0], &t).unwrap();
        assert_eq!(e, vec![0.0, 0.0, 0.0, 0.0, 3.0]);
        assert!(expected_aggregate(&set, &[1.0], &t).is_err());
    }

    #[test]
    fn single_geometric_component() {
        let set = ComponentSet::<f64>::from_gammas(&[(1.0, 1.0)], 1).unwrap();
        let t = ResolutionVector::from_values(vec![1.0]).unwrap();
        let e = expected_aggregate(&set, &[0.0, 1.0, 0.0], &t).unwrap();
        assert_relative_eq!(e[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(e[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(e[2], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn multiplicities_match_explicit_resample() {
        let set = ComponentSet::<f64>::from_gammas(&[(2.0, 1.0), (6.0, 1.0)], 6).unwrap();
        let t = [0.7, 1.1, 1.2];
        let tables = SampleOutcomeTables::new(&set, &t).unwrap();
        let weighted = tables.design(Some(&[2, 0, 1]));
        let explicit = SampleOutcomeTables::new(&set, &[0.7, 0.7, 1.2])
            .unwrap()
            .design(None);
        for x in 0..weighted.rows() {
            for m in 0..weighted.cols() {
                assert_relative_eq!(weighted.get(x, m), explicit.get(x, m), epsilon = 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn expected_counts_sum_to_sample_size(
            raw in prop::collection::vec(0.0f64..1.0, 5),
            ts in prop::collection::vec(0.2f64..3.0, 1..20),
        ) {
            let set = ComponentSet::<f64>::from_gammas(&[(1.0, 2.0), (3.0, 1.0), (9.0, 1.0)], 7).unwrap();
            let s: f64 = raw.iter().sum::<f64>() + 1e-9;
            let w: Vec<f64> = raw.iter().map(|v| (v + 1e-9 / 5.0) / s).collect();
            let i = ts.len() as f64;
            let t = ResolutionVector::from_values(ts).unwrap();
            let e = expected_aggregate(&set, &w, &t).unwrap();
            prop_assert!((e.iter().sum::<f64>() - i).abs() < 1e-8);
        }
    }
}
