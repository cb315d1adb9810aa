use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// One mixture component of the rate distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Component<T> {
    /// Point mass at rate zero (the taxon is absent).
    StructuralZero,
    /// Gamma rate distribution with shape `alpha` and rate `beta`.
    Gamma { alpha: T, beta: T },
    /// Point mass collecting every count above the truncation point.
    HighCount,
}

impl<T: Scalar> Component<T> {
    pub fn gamma(alpha: T, beta: T) -> Result<Self> {
        if !(alpha > T::zero() && beta > T::zero() && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "gamma parameters must be positive, got ({alpha}, {beta})"
            )));
        }
        Ok(Component::Gamma { alpha, beta })
    }

    pub fn is_gamma(&self) -> bool {
        matches!(self, Component::Gamma { .. })
    }

    /// Mode of the rate distribution; used to seed the weight solver.
    pub fn mode(&self, truncation: u64) -> T {
        match *self {
            Component::StructuralZero => T::zero(),
            Component::Gamma { alpha, beta } => ((alpha - T::one()) / beta).max(T::zero()),
            Component::HighCount => T::from_u64(truncation).unwrap_or_else(T::infinity) + T::one(),
        }
    }

    /// CDF of the rate distribution at `x` on `[0, C)`.
    pub fn rate_cdf(&self, x: T) -> T {
        match *self {
            Component::StructuralZero => T::one(),
            Component::Gamma { alpha, beta } => crate::special::gamma_p(alpha, beta * x),
            Component::HighCount => T::zero(),
        }
    }

    fn sort_key(&self) -> (u8, T, T) {
        match *self {
            Component::StructuralZero => (0, T::zero(), T::zero()),
            // equal shapes: larger rate parameter (smaller mean) first
            Component::Gamma { alpha, beta } => (1, alpha, -beta),
            Component::HighCount => (2, T::zero(), T::zero()),
        }
    }
}

impl<T: Scalar> std::fmt::Display for Component<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Component::StructuralZero => write!(f, "zero"),
            Component::Gamma { alpha, beta } => write!(f, "gamma({alpha},{beta})"),
            Component::HighCount => write!(f, "high"),
        }
    }
}

/// Ordered components of one OTU's mixture plus the truncation point `C`.
///
/// Order: structural zero, gammas by ascending shape, high-count mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ComponentSet<T> {
    components: Vec<Component<T>>,
    truncation: u64,
}

impl<T: Scalar> ComponentSet<T> {
    /// Builds a set from gamma parameters; the point masses are added here.
    /// Gammas are sorted into canonical order.
    pub fn from_gammas(gammas: &[(T, T)], truncation: u64) -> Result<Self> {
        let mut components = vec![Component::StructuralZero];
        for &(a, b) in gammas {
            components.push(Component::gamma(a, b)?);
        }
        components.push(Component::HighCount);
        Self::new(components, truncation)
    }

    pub fn new(mut components: Vec<Component<T>>, truncation: u64) -> Result<Self> {
        if truncation < 1 {
            return Err(Error::InvalidConfig(
                "truncation point must be at least 1".into(),
            ));
        }
        let zeros = components
            .iter()
            .filter(|c| matches!(c, Component::StructuralZero))
            .count();
        let highs = components
            .iter()
            .filter(|c| matches!(c, Component::HighCount))
            .count();
        if zeros != 1 || highs != 1 {
            return Err(Error::InvalidConfig(
                "a component set needs exactly one structural-zero and one high-count component"
                    .into(),
            ));
        }
        for c in &components {
            if let Component::Gamma { alpha, beta } = *c {
                Component::gamma(alpha, beta)?;
            }
        }
        components.sort_by(|a, b| {
            a.sort_key()
                .partial_cmp(&b.sort_key())
                .expect("finite parameters")
        });
        components.dedup();
        Ok(Self {
            components,
            truncation,
        })
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Truncation point `C`.
    pub fn truncation(&self) -> u64 {
        self.truncation
    }

    pub fn zero_index(&self) -> usize {
        0
    }

    pub fn high_index(&self) -> usize {
        self.components.len() - 1
    }

    pub fn index_of(&self, c: &Component<T>) -> Option<usize> {
        self.components.iter().position(|x| x == c)
    }

    /// Position of each of `self`'s components inside `superset`.
    pub fn embedding_into(&self, superset: &ComponentSet<T>) -> Result<Vec<usize>> {
        if self.truncation != superset.truncation {
            return Err(Error::InvalidConfig(
                "component sets have different truncation points".into(),
            ));
        }
        self.components
            .iter()
            .map(|c| {
                superset.index_of(c).ok_or_else(|| {
                    Error::InvalidConfig(format!("component {c} missing from superset"))
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order() {
        let set =
            ComponentSet::<f64>::from_gammas(&[(3.0, 1.0), (1.0, 1.0), (1.0, 2.0)], 5).unwrap();
        let shown: Vec<String> = set.components().iter().map(|c| c.to_string()).collect();
        assert_eq!(
            shown,
            ["zero", "gamma(1,2)", "gamma(1,1)", "gamma(3,1)", "high"]
        );
        assert_eq!(set.high_index(), 4);
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(ComponentSet::<f64>::from_gammas(&[(0.0, 1.0)], 5).is_err());
        assert!(ComponentSet::<f64>::from_gammas(&[(1.0, 1.0)], 0).is_err());
        assert!(ComponentSet::<f64>::new(vec![Component::StructuralZero], 3).is_err());
    }

    #[test]
    fn embedding_round_trip() {
        let big =
            ComponentSet::<f64>::from_gammas(&[(1.0, 2.0), (1.0, 1.0), (5.0, 1.0)], 9).unwrap();
        let small = ComponentSet::<f64>::from_gammas(&[(5.0, 1.0)], 9).unwrap();
        let idx = small.embedding_into(&big).unwrap();
        assert_eq!(idx, vec![0, 3, 4]);
        for (k, &i) in idx.iter().enumerate() {
            assert_eq!(small.components()[k], big.components()[i]);
        }
        assert!(big.embedding_into(&small).is_err());
    }
}
