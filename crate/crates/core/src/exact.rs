//! Exact arithmetic: dyadic rationals, binomial tables, and exact comparisons
//! against irrational band thresholds `h^(1/2 + eps)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// A non-negative dyadic rational `num / 2^exp`, kept normalized
/// (odd numerator, or zero with exponent 0).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    num: BigUint,
    exp: u64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Self {
            num: BigUint::zero(),
            exp: 0,
        }
    }

    pub fn one() -> Self {
        Self {
            num: BigUint::one(),
            exp: 0,
        }
    }

    pub fn new(num: BigUint, exp: u64) -> Self {
        let mut d = Self { num, exp };
        d.normalize();
        d
    }

    pub fn from_u64(n: u64) -> Self {
        Self::new(BigUint::from(n), 0)
    }

    /// `2^-exp`.
    pub fn pow2_neg(exp: u64) -> Self {
        Self {
            num: BigUint::one(),
            exp,
        }
    }

    fn normalize(&mut self) {
        if self.num.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.num.trailing_zeros().unwrap_or(0).min(self.exp);
        if tz > 0 {
            self.num >>= tz as usize;
            self.exp -= tz;
        }
    }

    pub fn numerator(&self) -> &BigUint {
        &self.num
    }

    pub fn exponent(&self) -> u64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `self - other`, or `None` when the result would be negative.
    pub fn checked_sub(&self, other: &Dyadic) -> Option<Dyadic> {
        let e = self.exp.max(other.exp);
        let a = &self.num << (e - self.exp) as usize;
        let b = &other.num << (e - other.exp) as usize;
        if a < b {
            None
        } else {
            Some(Dyadic::new(a - b, e))
        }
    }

    pub fn mul_u64(&self, k: u64) -> Dyadic {
        Dyadic::new(&self.num * k, self.exp)
    }

    pub fn to_f64(&self) -> f64 {
        if self.num.is_zero() {
            return 0.0;
        }
        let bits = self.num.bits();
        // keep the top 64 bits of the numerator to avoid overflow in to_f64
        let shift = bits.saturating_sub(64);
        let top = (&self.num >> shift as usize).to_u64().unwrap_or(u64::MAX) as f64;
        let e = shift as i64 - self.exp as i64;
        top * 2f64.powi(e.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
    }

    pub fn to_ratio(&self) -> BigRational {
        let den = BigUint::one() << self.exp as usize;
        BigRational::new(self.num.clone().into(), den.into())
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Self::zero()
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/2^{}", self.num, self.exp)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.exp)
        }
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let e = self.exp.max(other.exp);
        let a = &self.num << (e - self.exp) as usize;
        let b = &other.num << (e - other.exp) as usize;
        a.cmp(&b)
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        let e = self.exp.max(rhs.exp);
        let a = &self.num << (e - self.exp) as usize;
        let b = &rhs.num << (e - rhs.exp) as usize;
        Dyadic::new(a + b, e)
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.num * &rhs.num, self.exp + rhs.exp)
    }
}

impl std::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Self {
        iter.fold(Dyadic::zero(), |acc, d| &acc + &d)
    }
}

/// Exact binomial coefficient `C(n, k)` by the multiplicative recurrence.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Rows of Pascal's triangle with prefix sums, built by additive recurrence
/// only. Used by the exact oracle as a route independent of the
/// multiplicative kernel formulas.
pub struct PascalTable {
    rows: Vec<Vec<BigUint>>,
    prefix: Vec<Vec<BigUint>>,
}

impl PascalTable {
    pub fn new(n_max: usize) -> Self {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n_max + 1);
        rows.push(vec![BigUint::one()]);
        for n in 1..=n_max {
            let prev = &rows[n - 1];
            let mut row = Vec::with_capacity(n + 1);
            row.push(BigUint::one());
            for k in 1..n {
                row.push(&prev[k - 1] + &prev[k]);
            }
            row.push(BigUint::one());
            rows.push(row);
        }
        let prefix = rows
            .iter()
            .map(|row| {
                let mut acc = BigUint::zero();
                row.iter()
                    .map(|c| {
                        acc += c;
                        acc.clone()
                    })
                    .collect()
            })
            .collect();
        Self { rows, prefix }
    }

    pub fn n_max(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn choose(&self, n: usize, k: usize) -> BigUint {
        if k > n {
            BigUint::zero()
        } else {
            self.rows[n][k].clone()
        }
    }

    pub fn choose_ref(&self, n: usize, k: usize) -> Option<&BigUint> {
        self.rows.get(n).and_then(|r| r.get(k))
    }

    /// `sum_{s <= k} C(n, s)`.
    pub fn prefix_sum(&self, n: usize, k: usize) -> &BigUint {
        let row = &self.prefix[n];
        &row[k.min(n)]
    }
}

/// The band half-width exponent `1/2 + eps` with `eps = num/den` rational,
/// so that `|h - 2k| <= h^(1/2+eps)` can be decided exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandExponent {
    num: u64,
    den: u64,
}

impl BandExponent {
    /// `eps` given as a reduced fraction. Negative offsets (the `1/2 - eps`
    /// reading) are built with [`BandExponent::minus`].
    pub fn plus(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num * 2 >= den * 3 {
            return Err(Error::InvalidParameter(format!(
                "band offset {num}/{den} out of range"
            )));
        }
        let g = num.gcd(&den);
        // exponent (den + 2 num) / (2 den)
        Ok(Self {
            num: (den + 2 * num) / g,
            den: 2 * den / g,
        })
    }

    /// Exponent `1/2 - eps`.
    pub fn minus(num: u64, den: u64) -> Result<Self> {
        if den == 0 || 2 * num >= den {
            return Err(Error::InvalidParameter(format!(
                "band offset -{num}/{den} must leave a positive exponent"
            )));
        }
        let g = num.gcd(&den);
        Ok(Self {
            num: (den - 2 * num) / g,
            den: 2 * den / g,
        })
    }

    /// Converts a decimal `eps` to a rational with denominator at most 10^6.
    pub fn from_eps(eps: f64) -> Result<Self> {
        let (n, d) = rationalize(eps)?;
        Self::plus(n, d)
    }

    pub fn from_eps_minus(eps: f64) -> Result<Self> {
        let (n, d) = rationalize(eps)?;
        Self::minus(n, d)
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Whether `d > h^exponent`, decided as `d^den > h^num`.
    pub fn exceeds(&self, d: u64, h: u64) -> bool {
        let lhs = num_traits::pow(BigUint::from(d), self.den as usize);
        let rhs = num_traits::pow(BigUint::from(h), self.num as usize);
        lhs > rhs
    }

    /// `|h - 2k| <= h^exponent`.
    pub fn in_band(&self, h: u64, k: u64) -> bool {
        let d = (h as i128 - 2 * k as i128).unsigned_abs() as u64;
        !self.exceeds(d, h)
    }

    /// All `k` in `[0, k_max]` with `|h - 2k| <= h^exponent`.
    pub fn band(&self, h: u64, k_max: u64) -> Vec<u64> {
        (0..=k_max).filter(|&k| self.in_band(h, k)).collect()
    }
}

fn rationalize(eps: f64) -> Result<(u64, u64)> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps}")));
    }
    for den in 1..=1_000_000u64 {
        let num = (eps * den as f64).round();
        if (num / den as f64 - eps).abs() < 1e-12 {
            return Ok((num as u64, den));
        }
    }
    Err(Error::InvalidParameter(format!(
        "eps = {eps} has no small rational form"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_normalizes_and_adds() {
        let half = Dyadic::pow2_neg(1);
        let quarter = Dyadic::pow2_neg(2);
        let s = &(&half + &quarter) + &quarter;
        assert_eq!(s, Dyadic::one());
        assert_eq!(Dyadic::new(BigUint::from(6u32), 3), Dyadic::new(BigUint::from(3u32), 2));
        assert_eq!(half.checked_sub(&quarter), Some(quarter.clone()));
        assert_eq!(quarter.checked_sub(&half), None);
        assert!(quarter < half);
    }

    #[test]
    fn dyadic_to_f64_handles_large_exponents() {
        let tiny = Dyadic::pow2_neg(1000);
        assert_eq!(tiny.to_f64(), 2f64.powi(-1000));
        let d = Dyadic::new(BigUint::from(3u32) << 500usize, 502);
        assert_eq!(d.to_f64(), 0.75);
    }

    #[test]
    fn pascal_matches_multiplicative_binomial() {
        let t = PascalTable::new(60);
        for n in 0..=60u64 {
            for k in 0..=n {
                assert_eq!(t.choose(n as usize, k as usize), binomial(n, k));
            }
            assert_eq!(t.prefix_sum(n as usize, n as usize), &(BigUint::one() << n as usize));
        }
    }

    #[test]
    fn band_membership_is_exact_at_integer_thresholds() {
        // eps = 1/4: 16^(3/4) = 8 exactly, so |16 - 2k| = 8 is in band
        let b = BandExponent::plus(1, 4).unwrap();
        assert!(b.in_band(16, 4));
        assert!(b.in_band(16, 12));
        assert!(!b.in_band(16, 3));
        assert_eq!(b.band(16, 16), (4..=12).collect::<Vec<_>>());
        let e = BandExponent::from_eps(0.05).unwrap();
        assert!((e.as_f64() - 0.55).abs() < 1e-15);
        let m = BandExponent::from_eps_minus(0.05).unwrap();
        assert!((m.as_f64() - 0.45).abs() < 1e-15);
    }
}
