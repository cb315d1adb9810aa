use serde::{Deserialize, Serialize};

use super::aggregate::SampleOutcomeTables;
use super::simplex::{SimplexLeastSquares, Solution, SolverOptions};
use super::{AggregateCounts, ComponentSet};
use crate::{Error, Matrix, ResolutionVector, Result, Scalar};

/// Mixture weights fitted to one OTU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FittedMixture<T> {
    pub component_set: ComponentSet<T>,
    pub weights: Vec<T>,
    /// Sum of squared differences between observed and expected aggregate counts.
    pub objective_value: T,
}

impl<T: Scalar> FittedMixture<T> {
    pub fn new(
        component_set: ComponentSet<T>,
        weights: Vec<T>,
        objective_value: T,
    ) -> Result<Self> {
        if weights.len() != component_set.len() {
            return Err(Error::Misaligned {
                expected: component_set.len(),
                found: weights.len(),
            });
        }
        Ok(Self {
            component_set,
            weights,
            objective_value,
        })
    }

    pub fn truncation(&self) -> u64 {
        self.component_set.truncation()
    }
}

/// Starting weights: each observed outcome puts its share of mass on the
/// component whose mode is closest to it.
pub(crate) fn frequency_start<T: Scalar>(
    set: &ComponentSet<T>,
    aggregate: &AggregateCounts,
) -> Vec<T> {
    let c = set.truncation();
    let modes: Vec<T> = set.components().iter().map(|comp| comp.mode(c)).collect();
    let mut w = vec![T::zero(); set.len()];
    for (x, &yx) in aggregate.values().iter().enumerate() {
        if yx == 0 {
            continue;
        }
        let target = if x as u64 > c {
            set.high_index()
        } else {
            let xf = T::from_usize_lossy(x);
            let mut best = 0usize;
            let mut best_d = T::infinity();
            for (k, &mode) in modes.iter().enumerate() {
                if k == set.high_index() {
                    continue;
                }
                let d = (mode - xf).abs();
                if d < best_d {
                    best = k;
                    best_d = d;
                }
            }
            best
        };
        w[target] = w[target] + T::lit(yx as f64);
    }
    let s: T = w.iter().copied().sum();
    if s > T::zero() {
        w.iter_mut().for_each(|v| *v = *v / s);
    }
    w
}

/// Multi-start solve of the aggregate-count least squares problem for a
/// prepared design. Returns the best solution, or a fit failure carrying it.
pub(crate) fn solve_design<T: Scalar>(
    set: &ComponentSet<T>,
    design: Matrix<T>,
    aggregate: &AggregateCounts,
    opts: &SolverOptions,
) -> Result<Solution<T>> {
    let target: Vec<T> = aggregate
        .values()
        .iter()
        .map(|&v| T::lit(v as f64))
        .collect();
    let lsq = SimplexLeastSquares::new(design, target);
    let m = set.len();
    let uniform = vec![T::one() / T::from_usize_lossy(m); m];
    let starts = [uniform, frequency_start(set, aggregate)];
    let best = lsq.solve(&starts, opts);
    if best.converged {
        return Ok(best);
    }
    // Accept a looser certificate before giving up.
    let loose = T::lit(1e-6) * best.objective.max(T::one());
    if best.gap <= loose {
        log::debug!(
            "weight fit stopped at gap {} (objective {})",
            best.gap,
            best.objective
        );
        return Ok(best);
    }
    Err(Error::FitFailure {
        objective: best.objective.to_f64_lossy(),
        best: best.weights.iter().map(|w| w.to_f64_lossy()).collect(),
    })
}

/// Fits simplex weights minimising `Σₓ [yₓ − I·Σₘ wₘ p_{xm}]²`.
pub fn fit_weights<T: Scalar>(
    set: &ComponentSet<T>,
    aggregate: &AggregateCounts,
    resolutions: &ResolutionVector<T>,
) -> Result<FittedMixture<T>> {
    fit_weights_with(set, aggregate, resolutions, &SolverOptions::default())
}

pub fn fit_weights_with<T: Scalar>(
    set: &ComponentSet<T>,
    aggregate: &AggregateCounts,
    resolutions: &ResolutionVector<T>,
    opts: &SolverOptions,
) -> Result<FittedMixture<T>> {
    check_aggregate(set, aggregate, resolutions.len())?;
    let design = SampleOutcomeTables::new(set, resolutions.values())?.design(None);
    let sol = solve_design(set, design, aggregate, opts)?;
    FittedMixture::new(set.clone(), sol.weights, sol.objective)
}

/// Objective of given weights, evaluated from scratch.
pub fn aggregate_objective<T: Scalar>(
    set: &ComponentSet<T>,
    weights: &[T],
    aggregate: &AggregateCounts,
    resolutions: &ResolutionVector<T>,
) -> Result<T> {
    let expected = super::expected_aggregate(set, weights, resolutions)?;
    Ok(aggregate
        .values()
        .iter()
        .zip(&expected)
        .map(|(&y, &e)| {
            let d = T::lit(y as f64) - e;
            d * d
        })
        .sum())
}

pub(crate) fn check_aggregate<T: Scalar>(
    set: &ComponentSet<T>,
    aggregate: &AggregateCounts,
    n: usize,
) -> Result<()> {
    if aggregate.truncation() != set.truncation() {
        return Err(Error::Misaligned {
            expected: set.truncation() as usize + 2,
            found: aggregate.values().len(),
        });
    }
    if aggregate.n_samples() == 0 {
        return Err(Error::EmptyTable);
    }
    if aggregate.n_samples() != n as u64 {
        return Err(Error::Misaligned {
            expected: n,
            found: aggregate.n_samples() as usize,
        });
    }
    Ok(())
}
