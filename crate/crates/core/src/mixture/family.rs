use serde::{Deserialize, Serialize};

use super::{Component, ComponentSet};
use crate::{Error, Result, Scalar};

/// Settings for the nested candidate mixtures of one OTU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    /// Droppable low-rate gammas `(shape, rate)`; model `l` keeps entries `l..`.
    pub low_rate_gammas: Vec<(f64, f64)>,
    /// Gammas present in every model.
    pub shared_gammas: Vec<(f64, f64)>,
    /// Lower end of the log-spaced shape grid.
    pub alpha_cutoff: f64,
    /// Quantile of the positive counts that sets the truncation point.
    pub quantile: f64,
    /// Ratio between consecutive shapes on the log grid.
    pub grid_ratio: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            low_rate_gammas: vec![(1.0, 2.0), (1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (4.0, 1.0)],
            shared_gammas: vec![(5.0, 1.0), (6.0, 1.0), (7.0, 1.0), (8.0, 1.0)],
            alpha_cutoff: 8.0,
            quantile: 0.85,
            grid_ratio: std::f64::consts::SQRT_2,
        }
    }
}

impl FamilyConfig {
    fn validate(&self) -> Result<()> {
        if !(self.quantile > 0.0 && self.quantile <= 1.0) {
            return Err(Error::InvalidConfig("quantile must lie in (0, 1]".into()));
        }
        if self.alpha_cutoff.is_nan() || self.alpha_cutoff <= 0.0 {
            return Err(Error::InvalidConfig("alpha cutoff must be positive".into()));
        }
        if self.grid_ratio.is_nan() || self.grid_ratio <= 1.0 {
            return Err(Error::InvalidConfig("grid ratio must exceed 1".into()));
        }
        if self.low_rate_gammas.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one low-rate gamma is needed".into(),
            ));
        }
        Ok(())
    }
}

/// Candidate models `Φ₁ ⊃ Φ₂ ⊃ … ⊃ Φ_L` and their selection weights `v(l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NestedModelFamily<T> {
    models: Vec<ComponentSet<T>>,
    embeddings: Vec<Vec<usize>>,
    model_weights: Vec<T>,
}

impl<T: Scalar> NestedModelFamily<T> {
    /// Wraps explicit models. The first must contain all others.
    pub fn new(models: Vec<ComponentSet<T>>) -> Result<Self> {
        let first = models
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty model family".into()))?;
        let embeddings = models
            .iter()
            .map(|m| m.embedding_into(first))
            .collect::<Result<Vec<_>>>()?;
        let l = models.len();
        Ok(Self {
            model_weights: vec![T::one() / T::from_usize_lossy(l); l],
            models,
            embeddings,
        })
    }

    pub fn models(&self) -> &[ComponentSet<T>] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// The largest model; every other model embeds into it.
    pub fn union(&self) -> &ComponentSet<T> {
        &self.models[0]
    }

    /// Union index of each component of model `l` (0-based).
    pub fn embedding(&self, l: usize) -> &[usize] {
        &self.embeddings[l]
    }

    pub fn model_weights(&self) -> &[T] {
        &self.model_weights
    }

    pub fn set_model_weights(&mut self, v: Vec<T>) -> Result<()> {
        if v.len() != self.models.len() {
            return Err(Error::Misaligned {
                expected: self.models.len(),
                found: v.len(),
            });
        }
        self.model_weights = v;
        Ok(())
    }

    /// Lifts model `l`'s weights to the union index, zeros elsewhere.
    pub fn embed_weights(&self, l: usize, weights: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.union().len()];
        for (&w, &i) in weights.iter().zip(&self.embeddings[l]) {
            out[i] = w;
        }
        out
    }

    /// Inverse of [`embed_weights`](Self::embed_weights).
    pub fn restrict_weights(&self, l: usize, union_weights: &[T]) -> Vec<T> {
        self.embeddings[l]
            .iter()
            .map(|&i| union_weights[i])
            .collect()
    }
}

/// R's default (type 7) sample quantile of sorted data.
fn quantile_sorted(sorted: &[u64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] as f64 + (h - lo as f64) * (sorted[hi] as f64 - sorted[lo] as f64)
}

/// Truncation point: ceiling of the configured quantile of the positive counts.
pub fn truncation_point(counts: &[u64], quantile: f64) -> Option<u64> {
    let mut positive: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
    if positive.is_empty() {
        return None;
    }
    positive.sort_unstable();
    Some(
        (quantile_sorted(&positive, quantile) - 1e-9)
            .ceil()
            .max(1.0) as u64,
    )
}

/// Integer shapes spaced evenly on a log scale from `cutoff` to `c`.
pub fn log_grid_shapes(cutoff: f64, c: f64, ratio: f64) -> Vec<f64> {
    if c <= cutoff {
        return Vec::new();
    }
    let steps = ((c / cutoff).ln() / ratio.ln()).round().max(1.0) as usize;
    let (lo, hi) = (cutoff.ln(), c.ln());
    let mut shapes: Vec<f64> = (0..=steps)
        .map(|k| (lo + (hi - lo) * k as f64 / steps as f64).exp().round())
        .collect();
    shapes.dedup();
    shapes
}

/// Builds the nested candidate models for one OTU's counts.
///
/// Model `l` (1-based) holds low-rate gammas `l..=L` of the configured list,
/// all shared gammas, the log-grid gammas between the shape cutoff and `C`
/// (rate 1), and the two point masses.
pub fn build_nested_family<T: Scalar>(
    counts: &[u64],
    config: &FamilyConfig,
) -> Result<NestedModelFamily<T>> {
    config.validate()?;
    let c = truncation_point(counts, config.quantile)
        .ok_or_else(|| Error::DegenerateOtu(String::new()))?;
    let mut fixed: Vec<(f64, f64)> = config.shared_gammas.clone();
    for a in log_grid_shapes(config.alpha_cutoff, c as f64, config.grid_ratio) {
        fixed.push((a, 1.0));
    }
    let to_t = |v: &[(f64, f64)]| {
        v.iter()
            .map(|&(a, b)| (T::lit(a), T::lit(b)))
            .collect::<Vec<_>>()
    };
    let models = (0..config.low_rate_gammas.len())
        .map(|l| {
            let mut g = to_t(&config.low_rate_gammas[l..]);
            g.extend(to_t(&fixed));
            ComponentSet::from_gammas(&g, c)
        })
        .collect::<Result<Vec<_>>>()?;
    NestedModelFamily::new(models)
}

impl<T: Scalar> NestedModelFamily<T> {
    /// Number of gamma components in model `l`.
    pub fn gamma_count(&self, l: usize) -> usize {
        self.models[l]
            .components()
            .iter()
            .filter(|c| c.is_gamma())
            .count()
    }

    pub fn contains(&self, l: usize, c: &Component<T>) -> bool {
        self.models[l].index_of(c).is_some()
    }
}
