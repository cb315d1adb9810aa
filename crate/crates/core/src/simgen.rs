//! Synthetic OTU tables with zero-inflated, class-dependent count distributions.
//!
//! For each OTU a `Beta(α_b, β_b)` draw per sample is binned into `M` equal
//! bins on `[0, 1]`. Samples in the first bin get a structural zero rate; the
//! others get the rate `range^u − 1` at their (optionally jittered) position
//! `u` inside the bin. Counts are `Poisson(rate · tᵢ)` with per-sample
//! resolutions `tᵢ` rescaled to mean one. Classes differ only in the interval
//! from which `α_b` is drawn.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::{stream, StreamRng, TAG_PERMUTE, TAG_SIMULATE};
use crate::{Error, OtuTable, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    /// `α_b` interval of each class.
    pub class_alpha: Vec<(f64, f64)>,
    pub beta_bounds: (f64, f64),
    pub class_size: usize,
    pub n_otus: usize,
    /// Inclusive bounds on the number of bins `M`.
    pub bins_bounds: (u32, u32),
    pub range_bounds: (f64, f64),
    pub resolution_bounds: (f64, f64),
    /// Permute class labels after generation.
    pub null: bool,
    /// Place rates uniformly within their bin instead of at its centre.
    pub jitter: bool,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            class_alpha: vec![(1.6, 2.0), (2.0, 2.4), (2.4, 2.8)],
            beta_bounds: (2.0, 6.5),
            class_size: 400,
            n_otus: 25,
            bins_bounds: (5, 15),
            range_bounds: (100.0, 300.0),
            resolution_bounds: (2.0 / 3.0, 4.0 / 5.0),
            null: false,
            jitter: true,
            seed: 0,
        }
    }
}

fn positive_interval(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(Error::InvalidConfig(format!(
            "{name} interval ({lo}, {hi}) must satisfy 0 < lower < upper"
        )));
    }
    Ok(())
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.class_alpha.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one class is required".into(),
            ));
        }
        for (k, &iv) in self.class_alpha.iter().enumerate() {
            positive_interval(&format!("class {} alpha", k + 1), iv)?;
        }
        positive_interval("beta", self.beta_bounds)?;
        positive_interval("range", self.range_bounds)?;
        positive_interval("resolution", self.resolution_bounds)?;
        if self.range_bounds.0 <= 1.0 {
            return Err(Error::InvalidConfig("data range must exceed 1".into()));
        }
        let (lo, hi) = self.bins_bounds;
        if lo < 2 || lo > hi {
            return Err(Error::InvalidConfig(format!(
                "bin bounds ({lo}, {hi}) must satisfy 2 <= lower <= upper"
            )));
        }
        if self.class_size == 0 || self.n_otus == 0 {
            return Err(Error::InvalidConfig(
                "class size and OTU count must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.class_alpha.len()
    }

    pub fn n_samples(&self) -> usize {
        self.class_alpha.len() * self.class_size
    }
}

pub const N_SCENARIOS: u32 = 6;

/// The six preset scenarios, numbered from 1. Scenario 6 repeats scenario 2
/// with permuted labels.
pub fn scenario_presets() -> Vec<ScenarioConfig> {
    (1..=N_SCENARIOS)
        .map(|s| scenario(s).expect("preset exists"))
        .collect()
}

pub fn scenario(id: u32) -> Result<ScenarioConfig> {
    let class_alpha = match id {
        1 => vec![(1.6, 2.0), (2.0, 2.4), (2.4, 2.8)],
        2 | 6 => vec![(1.2, 1.8), (2.0, 2.4), (2.6, 3.0)],
        3 => vec![(0.4, 0.8), (0.6, 1.0), (0.8, 1.2)],
        4 => vec![(0.2, 0.3), (0.6, 0.7), (1.0, 1.1)],
        5 => vec![(0.1, 0.2), (0.25, 0.35), (0.5, 0.6)],
        other => return Err(Error::UnknownScenario(other)),
    };
    Ok(ScenarioConfig {
        class_alpha,
        null: id == 6,
        ..ScenarioConfig::default()
    })
}

/// Generating parameters and latent rates of one OTU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtuTruth {
    pub beta: f64,
    pub bins: u32,
    pub range: f64,
    /// `α_b` drawn for each class.
    pub class_alpha: Vec<f64>,
    /// Bin of each sample, in generation order; bin 0 is the structural zero.
    pub bin: Vec<u32>,
    pub rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Resolutions after rescaling to mean one.
    pub resolutions: Vec<f64>,
    /// Class of each sample before any null permutation.
    pub generating_class: Vec<String>,
    pub otus: Vec<OtuTruth>,
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub table: OtuTable,
    pub truth: GroundTruth,
}

pub fn class_label(k: usize) -> String {
    format!("class{}", k + 1)
}

fn draw_resolutions(config: &ScenarioConfig, rng: &mut StreamRng) -> Vec<f64> {
    let (lo, hi) = config.resolution_bounds;
    let mut t: Vec<f64> = (0..config.n_samples())
        .map(|_| rng.gen_range(lo..hi))
        .collect();
    let mean = t.iter().sum::<f64>() / t.len() as f64;
    t.iter_mut().for_each(|v| *v /= mean);
    t
}

/// One OTU's counts for all samples (classes in order, `class_size` each),
/// together with its latent structure.
pub fn generate_otu(
    config: &ScenarioConfig,
    resolutions: &[f64],
    rng: &mut StreamRng,
) -> Result<(Vec<u64>, OtuTruth)> {
    let beta = rng.gen_range(config.beta_bounds.0..config.beta_bounds.1);
    let bins = rng.gen_range(config.bins_bounds.0..=config.bins_bounds.1);
    let range = rng.gen_range(config.range_bounds.0..config.range_bounds.1);
    let mf = bins as f64;
    let n = config.n_samples();
    if resolutions.len() != n {
        return Err(Error::Misaligned {
            expected: n,
            found: resolutions.len(),
        });
    }
    let mut counts = Vec::with_capacity(n);
    let mut bin_of = Vec::with_capacity(n);
    let mut rates = Vec::with_capacity(n);
    let mut class_alpha = Vec::with_capacity(config.n_classes());
    for (k, &(lo, hi)) in config.class_alpha.iter().enumerate() {
        let alpha = rng.gen_range(lo..hi);
        class_alpha.push(alpha);
        let dist = Beta::new(alpha, beta)
            .map_err(|e| Error::InvalidConfig(format!("beta distribution: {e}")))?;
        for i in 0..config.class_size {
            let u: f64 = dist.sample(rng);
            let b = ((u * mf) as u32).min(bins - 1);
            let offset = if config.jitter { rng.gen::<f64>() } else { 0.5 };
            let rate = if b == 0 {
                0.0
            } else {
                range.powf((b as f64 + offset) / mf) - 1.0
            };
            let lambda = rate * resolutions[k * config.class_size + i];
            let count = if lambda > 0.0 {
                Poisson::new(lambda)
                    .map_err(|e| Error::InvalidConfig(format!("poisson rate {lambda}: {e}")))?
                    .sample(rng) as u64
            } else {
                0
            };
            counts.push(count);
            bin_of.push(b);
            rates.push(rate);
        }
    }
    Ok((
        counts,
        OtuTruth {
            beta,
            bins,
            range,
            class_alpha,
            bin: bin_of,
            rate: rates,
        },
    ))
}

/// Generates a full dataset. Each OTU draws from its own stream, so the
/// result does not depend on thread scheduling.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<SimulatedDataset> {
    config.validate()?;
    let n = config.n_samples();
    let resolutions = draw_resolutions(config, &mut stream(config.seed, &[TAG_SIMULATE, 0]));
    let otus: Vec<(Vec<u64>, OtuTruth)> = (0..config.n_otus)
        .into_par_iter()
        .map(|j| {
            generate_otu(
                config,
                &resolutions,
                &mut stream(config.seed, &[TAG_SIMULATE, 1, j as u64]),
            )
        })
        .collect::<Result<_>>()?;
    let generating_class: Vec<String> =
        (0..n).map(|i| class_label(i / config.class_size)).collect();
    let mut labels = generating_class.clone();
    if config.null {
        labels.shuffle(&mut stream(config.seed, &[TAG_PERMUTE]));
    }
    let width = n.to_string().len();
    let sample_ids: Vec<String> = (0..n).map(|i| format!("s{:0width$}", i + 1)).collect();
    let otu_width = config.n_otus.to_string().len();
    let otu_ids: Vec<String> = (0..config.n_otus)
        .map(|j| format!("otu{:0otu_width$}", j + 1))
        .collect();
    let counts: Vec<Vec<u64>> = (0..n)
        .map(|i| otus.iter().map(|(c, _)| c[i]).collect())
        .collect();
    let table = OtuTable::new(counts, sample_ids, otu_ids, Some(labels))?;
    Ok(SimulatedDataset {
        table,
        truth: GroundTruth {
            resolutions,
            generating_class,
            otus: otus.into_iter().map(|(_, t)| t).collect(),
        },
    })
}

impl SimulatedDataset {
    /// Zero proportion per generating class, pooled over OTUs.
    pub fn class_zero_proportions(&self) -> Vec<(String, f64)> {
        self.class_summary(|c| (c == 0) as u64 as f64)
    }

    pub fn class_mean_counts(&self) -> Vec<(String, f64)> {
        self.class_summary(|c| c as f64)
    }

    fn class_summary(&self, f: impl Fn(u64) -> f64) -> Vec<(String, f64)> {
        let mut classes: Vec<String> = self.truth.generating_class.clone();
        classes.dedup();
        classes
            .into_iter()
            .map(|class| {
                let rows: Vec<usize> = (0..self.table.n_samples())
                    .filter(|&i| self.truth.generating_class[i] == class)
                    .collect();
                let total: f64 = rows
                    .iter()
                    .flat_map(|&i| self.table.counts()[i].iter())
                    .map(|&c| f(c))
                    .sum();
                (class, total / (rows.len() * self.table.n_otus()) as f64)
            })
            .collect()
    }

    /// Delimited sidecar with one row per (sample, OTU): generating class,
    /// resolution, bin and latent rate.
    pub fn write_truth<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(out);
        w.write_record(["sample_id", "otu_id", "class", "resolution", "bin", "rate"])?;
        for (i, sid) in self.table.sample_ids().iter().enumerate() {
            for (j, oid) in self.table.otu_ids().iter().enumerate() {
                let o = &self.truth.otus[j];
                w.write_record([
                    sid.as_str(),
                    oid.as_str(),
                    self.truth.generating_class[i].as_str(),
                    &self.truth.resolutions[i].to_string(),
                    &o.bin[i].to_string(),
                    &o.rate[i].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Delimited per-OTU generating parameters.
    pub fn write_parameters<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(out);
        let n_classes = self.truth.otus.first().map_or(0, |o| o.class_alpha.len());
        let mut header = vec![
            "otu_id".to_string(),
            "beta".into(),
            "bins".into(),
            "range".into(),
        ];
        header.extend((0..n_classes).map(|k| format!("alpha_{}", class_label(k))));
        w.write_record(&header)?;
        for (oid, o) in self.table.otu_ids().iter().zip(&self.truth.otus) {
            let mut row = vec![
                oid.clone(),
                o.beta.to_string(),
                o.bins.to_string(),
                o.range.to_string(),
            ];
            row.extend(o.class_alpha.iter().map(|a| a.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(id: u32, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            class_size: 60,
            n_otus: 6,
            seed,
            ..scenario(id).unwrap()
        }
    }

    #[test]
    fn presets() {
        let p = scenario_presets();
        assert_eq!(p.len(), 6);
        assert_eq!(p[3].class_alpha[0], (0.2, 0.3));
        assert_eq!(p[5].class_alpha, p[1].class_alpha);
        assert!(p[5].null && !p[1].null);
        assert!(matches!(scenario(9), Err(Error::UnknownScenario(9))));
    }

    #[test]
    fn default_sizes() {
        let d = generate_scenario(&ScenarioConfig {
            seed: 7,
            ..scenario(4).unwrap()
        })
        .unwrap();
        assert_eq!((d.table.n_samples(), d.table.n_otus()), (1200, 25));
        let mean = d.truth.resolutions.iter().sum::<f64>() / 1200.0;
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let a = generate_scenario(&small(2, 3)).unwrap();
        let b = generate_scenario(&small(2, 3)).unwrap();
        assert_eq!(a.table.counts(), b.table.counts());
        assert_eq!(a.table.labels(), b.table.labels());
        let c = generate_scenario(&small(2, 4)).unwrap();
        assert_ne!(a.table.counts(), c.table.counts());
    }

    #[test]
    fn structural_zeros_observe_zero() {
        let d = generate_scenario(&small(3, 1)).unwrap();
        for (j, o) in d.truth.otus.iter().enumerate() {
            for (i, &b) in o.bin.iter().enumerate() {
                if b == 0 {
                    assert_eq!(o.rate[i], 0.0);
                    assert_eq!(d.table.count(i, j), 0);
                }
            }
        }
    }

    #[test]
    fn symmetric_beta_centres_bins() {
        let cfg = ScenarioConfig {
            class_alpha: vec![(3.99, 4.01)],
            beta_bounds: (3.99, 4.01),
            bins_bounds: (10, 10),
            class_size: 4000,
            n_otus: 1,
            seed: 2,
            ..ScenarioConfig::default()
        };
        let d = generate_scenario(&cfg).unwrap();
        let bins = &d.truth.otus[0].bin;
        let mean = bins.iter().map(|&b| b as f64).sum::<f64>() / bins.len() as f64;
        // E[floor(10u)] = 10·E[u] − 1/2 for a symmetric Beta
        assert!((mean - 4.5).abs() < 0.15, "{mean}");
    }

    #[test]
    fn null_permutes_labels_only() {
        let d = generate_scenario(&small(6, 5)).unwrap();
        let plain = generate_scenario(&ScenarioConfig {
            null: false,
            ..small(6, 5)
        })
        .unwrap();
        assert_eq!(d.table.counts(), plain.table.counts());
        assert_ne!(d.table.labels(), plain.table.labels());
        let mut a = d.table.labels().unwrap().to_vec();
        let mut b = plain.table.labels().unwrap().to_vec();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn sparsity_and_means_ordered() {
        let d = generate_scenario(&ScenarioConfig {
            class_size: 200,
            seed: 11,
            ..scenario(4).unwrap()
        })
        .unwrap();
        let zp: Vec<f64> = d
            .class_zero_proportions()
            .into_iter()
            .map(|x| x.1)
            .collect();
        let mean: Vec<f64> = d.class_mean_counts().into_iter().map(|x| x.1).collect();
        assert!(zp[0] > zp[1] && zp[1] > zp[2], "{zp:?}");
        assert!(mean[0] < mean[1] && mean[1] < mean[2], "{mean:?}");
    }

    #[test]
    fn invalid_configs() {
        let bad_alpha = ScenarioConfig {
            class_alpha: vec![(0.5, 0.2)],
            ..ScenarioConfig::default()
        };
        assert!(generate_scenario(&bad_alpha).is_err());
        let bad_size = ScenarioConfig {
            class_size: 0,
            ..ScenarioConfig::default()
        };
        assert!(generate_scenario(&bad_size).is_err());
    }
}
