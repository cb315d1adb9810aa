//! Model averaging over the nested family by nonparametric bootstrap.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::SampleOutcomeTables;
use super::fit::{check_aggregate, solve_design};
use super::simplex::SolverOptions;
use super::{AggregateCounts, FittedMixture, NestedModelFamily};
use crate::rng::{stream, TAG_BOOTSTRAP};
use crate::{Error, Matrix, ResolutionVector, Result, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Stream key distinguishing OTUs that share a seed.
    pub stream_id: u64,
}

/// Outcome of bootstrap model averaging for one OTU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BootstrapFit<T> {
    /// Averaged weights on the union component set.
    pub mixture: FittedMixture<T>,
    /// Family with `v(l)` set to the selection proportions.
    pub family: NestedModelFamily<T>,
    /// Each model's fit on the original data, lifted to the union index.
    pub per_model: Vec<Vec<T>>,
    /// Replicates in which every model fitted successfully.
    pub usable_replicates: usize,
}

fn select_columns<T: Scalar>(design: &Matrix<T>, cols: &[usize]) -> Matrix<T> {
    let mut out = Matrix::zeros(design.rows(), cols.len());
    for r in 0..design.rows() {
        for (k, &c) in cols.iter().enumerate() {
            out.set(r, k, design.get(r, c));
        }
    }
    out
}

/// Sum of squared residuals of `union_weights` against `target`.
fn residual<T: Scalar>(design: &Matrix<T>, union_weights: &[T], target: &[u64]) -> T {
    design
        .mul_vec(union_weights)
        .iter()
        .zip(target)
        .map(|(&e, &y)| {
            let d = T::lit(y as f64) - e;
            d * d
        })
        .sum()
}

/// Bootstrap model averaging.
///
/// For every replicate the samples are resampled with replacement (count and
/// resolution jointly), every model is refitted on the resample, and the model
/// whose refitted weights best reproduce the *original* aggregate counts is
/// selected. Ties go to the smaller model. `v(l)` is the selection
/// proportion, and the final weights are `Σₗ v(l)·wₗ` where `wₗ` is model
/// `l` fitted on the original data.
pub fn bootstrap_average<T: Scalar>(
    family: &NestedModelFamily<T>,
    counts: &[u64],
    resolutions: &ResolutionVector<T>,
    config: &BootstrapConfig,
) -> Result<BootstrapFit<T>> {
    bootstrap_average_with(
        family,
        counts,
        resolutions,
        config,
        &SolverOptions::default(),
    )
}

pub fn bootstrap_average_with<T: Scalar>(
    family: &NestedModelFamily<T>,
    counts: &[u64],
    resolutions: &ResolutionVector<T>,
    config: &BootstrapConfig,
    opts: &SolverOptions,
) -> Result<BootstrapFit<T>> {
    if config.replicates == 0 {
        return Err(Error::InvalidConfig(
            "bootstrap needs at least one replicate".into(),
        ));
    }
    if counts.len() != resolutions.len() {
        return Err(Error::Misaligned {
            expected: counts.len(),
            found: resolutions.len(),
        });
    }
    let union = family.union();
    let c = union.truncation();
    let observed = AggregateCounts::tally(counts, c);
    check_aggregate(union, &observed, counts.len())?;
    let tables = SampleOutcomeTables::new(union, resolutions.values())?;
    let full_design = tables.design(None);
    let n_models = family.len();

    let per_model: Vec<Vec<T>> = (0..n_models)
        .map(|l| {
            let design = select_columns(&full_design, family.embedding(l));
            let sol = solve_design(&family.models()[l], design, &observed, opts)?;
            Ok(family.embed_weights(l, &sol.weights))
        })
        .collect::<Result<_>>()?;

    let selections: Vec<Option<usize>> = if n_models == 1 {
        vec![Some(0); config.replicates]
    } else {
        (0..config.replicates)
            .into_par_iter()
            .map(|b| {
                let mut rng = stream(config.seed, &[TAG_BOOTSTRAP, config.stream_id, b as u64]);
                let n = counts.len();
                let mut mult = vec![0u32; n];
                for _ in 0..n {
                    mult[rng.gen_range(0..n)] += 1;
                }
                let resampled = AggregateCounts::tally_weighted(counts, &mult, c);
                let design = tables.design(Some(&mult));
                let mut best: Option<(usize, T)> = None;
                for l in 0..n_models {
                    let sub = select_columns(&design, family.embedding(l));
                    let sol = match solve_design(&family.models()[l], sub, &resampled, opts) {
                        Ok(s) => s,
                        Err(_) => return Err(l),
                    };
                    let lifted = family.embed_weights(l, &sol.weights);
                    let score = residual(&full_design, &lifted, observed.values());
                    // later models are smaller; prefer them on ties
                    let take = match best {
                        None => true,
                        Some((_, s)) => score <= s + s.abs() * T::lit(1e-12),
                    };
                    if take {
                        best = Some((l, score));
                    }
                }
                Ok(best.map(|(l, _)| l))
            })
            .map(|r| match r {
                Ok(sel) => sel,
                Err(l) => {
                    log::debug!("bootstrap replicate dropped: model {} failed to fit", l + 1);
                    None
                }
            })
            .collect()
    };

    let usable = selections.iter().filter(|s| s.is_some()).count();
    if usable == 0 {
        return Err(Error::FitFailure {
            objective: f64::NAN,
            best: Vec::new(),
        });
    }
    let mut v = vec![T::zero(); n_models];
    for l in selections.into_iter().flatten() {
        v[l] = v[l] + T::one();
    }
    let denom = T::from_usize_lossy(usable);
    v.iter_mut().for_each(|x| *x = *x / denom);

    let mut weights = vec![T::zero(); union.len()];
    for (vl, wl) in v.iter().zip(&per_model) {
        for (acc, &w) in weights.iter_mut().zip(wl) {
            *acc = *acc + *vl * w;
        }
    }
    let s: T = weights.iter().copied().sum();
    weights.iter_mut().for_each(|w| *w = *w / s);
    let objective = residual(&full_design, &weights, observed.values());
    let mut fam = family.clone();
    fam.set_model_weights(v)?;
    Ok(BootstrapFit {
        mixture: FittedMixture::new(union.clone(), weights, objective)?,
        family: fam,
        per_model,
        usable_replicates: usable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{fit_weights, ComponentSet};

    fn data() -> (Vec<u64>, ResolutionVector<f64>) {
        let counts: Vec<u64> = (0..120u64)
            .map(|i| if i % 3 == 0 { 0 } else { (i * 7) % 23 })
            .collect();
        let t = ResolutionVector::from_values(
            (0..120)
                .map(|i| 0.8 + 0.4 * ((i % 5) as f64) / 4.0)
                .collect(),
        )
        .unwrap();
        (counts, t)
    }

    #[test]
    fn single_model_equals_direct_fit() {
        let (counts, t) = data();
        let set =
            ComponentSet::<f64>::from_gammas(&[(1.0, 1.0), (5.0, 1.0), (12.0, 1.0)], 15).unwrap();
        let fam = NestedModelFamily::new(vec![set.clone()]).unwrap();
        let cfg = BootstrapConfig {
            replicates: 7,
            seed: 3,
            stream_id: 0,
        };
        let fit = bootstrap_average(&fam, &counts, &t, &cfg).unwrap();
        assert_eq!(fit.family.model_weights(), &[1.0]);
        let direct = fit_weights(&set, &AggregateCounts::tally(&counts, 15), &t).unwrap();
        for (a, b) in fit.mixture.weights.iter().zip(&direct.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn one_replicate_gives_one_hot_selection() {
        let (counts, t) = data();
        let big = ComponentSet::<f64>::from_gammas(
            &[(1.0, 2.0), (1.0, 1.0), (5.0, 1.0), (12.0, 1.0)],
            15,
        )
        .unwrap();
        let small = ComponentSet::<f64>::from_gammas(&[(5.0, 1.0), (12.0, 1.0)], 15).unwrap();
        let fam = NestedModelFamily::new(vec![big, small]).unwrap();
        let cfg = BootstrapConfig {
            replicates: 1,
            seed: 11,
            stream_id: 2,
        };
        let fit = bootstrap_average(&fam, &counts, &t, &cfg).unwrap();
        let v = fit.family.model_weights();
        assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 1);
        assert_eq!(v.iter().filter(|&&x| x == 0.0).count(), 1);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (counts, t) = data();
        let big = ComponentSet::<f64>::from_gammas(
            &[(1.0, 2.0), (1.0, 1.0), (5.0, 1.0), (12.0, 1.0)],
            15,
        )
        .unwrap();
        let small =
            ComponentSet::<f64>::from_gammas(&[(1.0, 1.0), (5.0, 1.0), (12.0, 1.0)], 15).unwrap();
        let fam = NestedModelFamily::new(vec![big, small]).unwrap();
        let cfg = BootstrapConfig {
            replicates: 20,
            seed: 5,
            stream_id: 9,
        };
        let a = bootstrap_average(&fam, &counts, &t, &cfg).unwrap();
        let b = bootstrap_average(&fam, &counts, &t, &cfg).unwrap();
        assert_eq!(a, b);
        let sum: f64 = a.family.model_weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_replicates_rejected() {
        let (counts, t) = data();
        let set = ComponentSet::<f64>::from_gammas(&[(5.0, 1.0)], 15).unwrap();
        let fam = NestedModelFamily::new(vec![set]).unwrap();
        let cfg = BootstrapConfig {
            replicates: 0,
            seed: 0,
            stream_id: 0,
        };
        assert!(bootstrap_average(&fam, &counts, &t, &cfg).is_err());
    }
}
