//! Two-sample Mann-Whitney U test.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest smaller-group size for which the exact null distribution is used.
pub const DEFAULT_EXACT_CUTOFF: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MwuResult {
    /// `U` for the first group: pairs where `a > b`, ties counted one half.
    pub u: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`, plus the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    (ranks, ties)
}

/// Counts of each attainable `U` value under the null for group sizes
/// `(m, n)`: coefficients of the Gaussian binomial `[m+n choose m]_q`.
pub(crate) fn exact_u_distribution(m: usize, n: usize) -> Vec<f64> {
    let (m, n) = if m <= n { (m, n) } else { (n, m) };
    let len = m * n + 1;
    let mut poly = vec![0.0f64; len];
    poly[0] = 1.0;
    for i in 1..=m {
        // multiply by (1 - q^(n+i))
        let shift = n + i;
        for k in (shift..len).rev() {
            poly[k] -= poly[k - shift];
        }
        // divide by (1 - q^i)
        for k in i..len {
            poly[k] += poly[k - i];
        }
    }
    poly.iter().map(|&c| c.round().max(0.0)).collect()
}

fn exact_two_sided(u: f64, m: usize, n: usize) -> f64 {
    let dist = exact_u_distribution(m, n);
    let total: f64 = dist.iter().sum();
    let u = u.round() as usize;
    let lower: f64 = dist[..=u].iter().sum();
    let upper: f64 = dist[u..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

fn normal_two_sided(u: f64, m: usize, n: usize, ties: &[usize]) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let big_n = mf + nf;
    let tie_term: f64 = ties.iter().map(|&t| (t as f64).powi(3) - t as f64).sum();
    let var = mf * nf / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mf * nf / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Mann-Whitney U test with midrank ties.
///
/// The p-value is exact when the smaller group has at most `exact_cutoff`
/// members and there are no ties; otherwise it uses the tie-corrected normal
/// approximation with continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64], exact_cutoff: usize) -> Result<MwuResult> {
    if a.is_empty() {
        return Err(Error::EmptyGroup('a'));
    }
    if b.is_empty() {
        return Err(Error::EmptyGroup('b'));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank test input"));
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let (m, n) = (a.len(), b.len());
    let rank_sum_a: f64 = ranks[..m].iter().sum();
    let u = rank_sum_a - (m * (m + 1)) as f64 / 2.0;
    let exact = ties.is_empty() && m.min(n) <= exact_cutoff;
    let p_value = if exact {
        exact_two_sided(u, m, n)
    } else {
        normal_two_sided(u, m, n, &ties)
    };
    Ok(MwuResult { u, p_value, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Enumerates every placement of group `a` among the pooled ranks.
    fn enumeration_oracle(u_obs: f64, m: usize, n: usize) -> f64 {
        let total = m + n;
        let mut count = 0usize;
        let mut extreme_lo = 0usize;
        let mut extreme_hi = 0usize;
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != m {
                continue;
            }
            count += 1;
            let rank_sum: usize = (0..total)
                .filter(|&k| mask & (1 << k) != 0)
                .map(|k| k + 1)
                .sum();
            let u = rank_sum as f64 - (m * (m + 1)) as f64 / 2.0;
            if u <= u_obs {
                extreme_lo += 1;
            }
            if u >= u_obs {
                extreme_hi += 1;
            }
        }
        (2.0 * extreme_lo.min(extreme_hi) as f64 / count as f64).min(1.0)
    }

    #[test]
    fn worked_examples() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], 10).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.exact);
        assert_relative_eq!(r.p_value, 1.0 / 3.0, epsilon = 1e-15);

        let r = mann_whitney_u(&[1.0, 3.0], &[2.0, 4.0], 10).unwrap();
        assert_eq!(r.u, 1.0);
        assert_relative_eq!(r.p_value, 2.0 / 3.0, epsilon = 1e-15);

        let r = mann_whitney_u(&[5.0, 5.0], &[5.0, 5.0], 10).unwrap();
        assert!(!r.exact);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn empty_group_rejected() {
        assert!(matches!(
            mann_whitney_u(&[], &[1.0], 10),
            Err(Error::EmptyGroup('a'))
        ));
        assert!(matches!(
            mann_whitney_u(&[1.0], &[], 10),
            Err(Error::EmptyGroup('b'))
        ));
    }

    #[test]
    fn distribution_counts_are_binomial_total() {
        for m in 1..8 {
            for n in 1..8 {
                let d = exact_u_distribution(m, n);
                let total: f64 = d.iter().sum();
                let mut binom = 1.0f64;
                for k in 0..m {
                    binom = binom * (m + n - k) as f64 / (k + 1) as f64;
                }
                assert_relative_eq!(total, binom.round());
            }
        }
    }

    #[test]
    fn exact_matches_enumeration_up_to_seven() {
        let mut seed = 17u64;
        for m in 2..=7 {
            for n in 2..=7 {
                for _ in 0..5 {
                    seed = seed
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    let values: Vec<f64> = (0..m + n)
                        .map(|k| ((seed >> (k % 48)) % 1000) as f64 + k as f64 * 1e-3)
                        .collect();
                    let (a, b) = values.split_at(m);
                    let r = mann_whitney_u(a, b, 10).unwrap();
                    assert!(r.exact);
                    assert_relative_eq!(r.p_value, enumeration_oracle(r.u, m, n), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn separated_groups_are_significant_under_normal_approximation() {
        let a: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..40).map(|i| 100.0 + i as f64).collect();
        let r = mann_whitney_u(&a, &b, 10).unwrap();
        assert!(!r.exact);
        assert!(r.p_value < 1e-10);
    }

    proptest! {
        #[test]
        fn swapping_groups_is_antisymmetric(
            a in prop::collection::vec(0u8..20, 1..12),
            b in prop::collection::vec(0u8..20, 1..12),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            let ab = mann_whitney_u(&a, &b, 10).unwrap();
            let ba = mann_whitney_u(&b, &a, 10).unwrap();
            prop_assert!((ab.u + ba.u - (a.len() * b.len()) as f64).abs() < 1e-9);
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
    }
}
