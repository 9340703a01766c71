//! Moment generating functions of a centred offspring sum.
//!
//! For a geometric(1/2) variable `xi` on `{0, 1, ...}`:
//!
//! ```text
//! E exp( theta (xi - 1)) = e^-theta / (2 - e^theta),      theta < ln 2
//! E exp(-theta (xi - 1)) = e^2theta / (2 e^theta - 1)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

/// `E exp(±theta (xi - 1))` for `theta >= 0` (and `theta < ln 2` for `Plus`).
pub fn offspring_mgf(theta: f64, sign: Sign) -> Result<f64> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("theta = {theta}")));
    }
    match sign {
        Sign::Plus => {
            if theta >= std::f64::consts::LN_2 {
                return Err(Error::Domain(format!("theta = {theta} >= ln 2")));
            }
            Ok((-theta).exp() / (2.0 - theta.exp()))
        }
        Sign::Minus => Ok((2.0 * theta).exp() / (2.0 * theta.exp() - 1.0)),
    }
}

/// Truncated series `sum_{k < terms} 2^-(k+1) exp(±theta (k - 1))`.
pub fn offspring_mgf_series(theta: f64, sign: Sign, terms: usize) -> f64 {
    let s = match sign {
        Sign::Plus => theta,
        Sign::Minus => -theta,
    };
    (0..terms)
        .map(|k| (-(k as f64 + 1.0) * std::f64::consts::LN_2 + s * (k as f64 - 1.0)).exp())
        .sum()
}

/// Largest `theta0` (up to `tol`) such that both generating functions stay
/// below `exp(2 theta^2)` on `(0, theta0]`, found by scanning a grid of step
/// `grid` and refining the first failure by bisection.
pub fn subgaussian_threshold(grid: f64, tol: f64) -> f64 {
    let ok = |t: f64| {
        let bound = (2.0 * t * t).exp();
        matches!(offspring_mgf(t, Sign::Plus), Ok(v) if v <= bound)
            && matches!(offspring_mgf(t, Sign::Minus), Ok(v) if v <= bound)
    };
    let mut t = grid;
    while t < std::f64::consts::LN_2 && ok(t) {
        t += grid;
    }
    let (mut lo, mut hi) = (t - grid, t.min(std::f64::consts::LN_2));
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_small_theta() {
        let v = offspring_mgf(0.1, Sign::Plus).unwrap();
        assert!((v - 1.011_184).abs() < 1e-6, "{v}");
        assert_eq!(offspring_mgf(0.0, Sign::Minus).unwrap(), 1.0);
    }

    #[test]
    fn closed_form_matches_series() {
        for &theta in &[0.01, 0.1, 0.3, 0.5] {
            for sign in [Sign::Plus, Sign::Minus] {
                let a = offspring_mgf(theta, sign).unwrap();
                let b = offspring_mgf_series(theta, sign, 4000);
                assert!((a - b).abs() < 1e-12, "{theta} {sign:?} {a} {b}");
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(offspring_mgf(0.7, Sign::Plus).is_err());
        assert!(offspring_mgf(-0.1, Sign::Minus).is_err());
        assert!(offspring_mgf(f64::NAN, Sign::Minus).is_err());
        assert!(offspring_mgf(0.7, Sign::Minus).is_ok());
    }

    #[test]
    fn threshold_is_positive() {
        let t = subgaussian_threshold(1e-3, 1e-10);
        assert!(t > 0.05 && t < std::f64::consts::LN_2, "{t}");
        assert!(offspring_mgf(t, Sign::Plus).unwrap() <= (2.0 * t * t).exp());
    }
}
