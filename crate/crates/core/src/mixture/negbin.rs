//! Negative binomial probabilities of a Gamma-rate Poisson count.
//!
//! A Gamma(α, β) rate observed at resolution `t` gives
//! `NB(size = α, prob = β / (t + β))` counts.

use crate::special::ln_gamma;
use crate::{Error, Result, Scalar};

fn check<T: Scalar>(alpha: T, beta: T, t: T) -> Result<()> {
    if !(alpha.is_finite() && beta.is_finite() && t.is_finite()) {
        return Err(Error::NonFinite("negative binomial parameters"));
    }
    if !(alpha > T::zero() && beta > T::zero() && t > T::zero()) {
        return Err(Error::InvalidConfig(
            "negative binomial parameters must be positive".into(),
        ));
    }
    Ok(())
}

/// `(ln p, ln(1 - p))` with `p = β / (t + β)`.
#[inline]
fn log_probs<T: Scalar>(beta: T, t: T) -> (T, T) {
    let denom = (t + beta).ln();
    (beta.ln() - denom, t.ln() - denom)
}

/// `ln P(X = x)` for the Gamma(α, β)-Poisson count at resolution `t`.
pub fn nb_log_pmf<T: Scalar>(x: u64, alpha: T, beta: T, t: T) -> Result<T> {
    check(alpha, beta, t)?;
    let xf = T::lit(x as f64);
    let (lp, lq) = log_probs(beta, t);
    let tail = if x == 0 { T::zero() } else { xf * lq };
    Ok(ln_gamma(xf + alpha) - ln_gamma(xf + T::one()) - ln_gamma(alpha) + alpha * lp + tail)
}

/// `P(X = x)` for the Gamma(α, β)-Poisson count at resolution `t`.
pub fn nb_pmf<T: Scalar>(x: u64, alpha: T, beta: T, t: T) -> Result<T> {
    Ok(nb_log_pmf(x, alpha, beta, t)?.exp().min(T::one()))
}

/// Probabilities of `0..=c` followed by the survival mass `P(X > c)`.
///
/// Uses the ratio recurrence `P(x+1)/P(x) = (x+α)/(x+1)·(1-p)` in log space,
/// which avoids a log-gamma evaluation per outcome.
pub fn nb_pmf_row<T: Scalar>(c: u64, alpha: T, beta: T, t: T) -> Result<Vec<T>> {
    check(alpha, beta, t)?;
    let (lp, lq) = log_probs(beta, t);
    let mut out = Vec::with_capacity(c as usize + 2);
    let mut log_p = alpha * lp;
    let mut acc = T::zero();
    for x in 0..=c {
        if x > 0 {
            let xf = T::lit(x as f64);
            log_p = log_p + (xf - T::one() + alpha).ln() - xf.ln() + lq;
        }
        let p = log_p.exp();
        acc = acc + p;
        out.push(p);
    }
    out.push((T::one() - acc).max(T::zero()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pmf_at_zero_is_p_to_the_alpha() {
        assert_relative_eq!(nb_pmf(0, 1.0, 1.0, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(nb_pmf(0, 2.0, 1.0, 1.0).unwrap(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn geometric_row() {
        let row = nb_pmf_row(1, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(row[0], 0.5, epsilon = 1e-15);
        assert_relative_eq!(row[1], 0.25, epsilon = 1e-15);
        assert_relative_eq!(row[2], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn row_matches_direct_log_gamma_route() {
        for &(a, b, t) in &[
            (0.5, 1.0, 0.3),
            (3.0, 1.0, 0.8),
            (16.0, 1.0, 1.7),
            (1.0, 2.0, 1.0),
        ] {
            let row = nb_pmf_row(60, a, b, t).unwrap();
            for x in 0..=60u64 {
                assert_relative_eq!(
                    row[x as usize],
                    nb_pmf(x, a, b, t).unwrap(),
                    max_relative = 1e-11,
                    epsilon = 1e-300
                );
            }
        }
    }

    #[test]
    fn mass_conserved_against_analytic_survival() {
        for &(a, b, t) in &[
            (0.7, 1.0, 0.5),
            (3.0, 1.0, 0.8),
            (11.0, 1.0, 1.3),
            (1.0, 2.0, 2.0),
        ] {
            let xmax = 40u64;
            let row = nb_pmf_row(xmax, a, b, t).unwrap();
            let p = b / (t + b);
            // P(X > xmax) = I_{1-p}(xmax + 1, α)
            let tail = statrs::function::beta::beta_reg(xmax as f64 + 1.0, a, 1.0 - p);
            let body: f64 = row[..=xmax as usize].iter().sum();
            assert!(
                (body + tail - 1.0).abs() < 1e-10,
                "{a} {b} {t}: {}",
                body + tail - 1.0
            );
            assert!((row[xmax as usize + 1] - tail).abs() < 1e-10);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(nb_pmf(0, f64::NAN, 1.0, 1.0).is_err());
        assert!(nb_pmf(0, 1.0, 1.0, 0.0).is_err());
        assert!(nb_pmf(3, 1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn extreme_resolutions_stay_finite() {
        for &t in &[1e-3, 1e3] {
            let row = nb_pmf_row::<f64>(50, 5.0, 1.0, t).unwrap();
            assert!(row.iter().all(|p| p.is_finite() && *p >= 0.0));
        }
    }
}
