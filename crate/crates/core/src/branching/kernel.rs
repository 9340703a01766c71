//! The two branching kernels.
//!
//! `pi(i, j)` is the transition law of a critical Galton-Watson chain with
//! geometric(1/2) offspring: the number of failures before the `i`-th success
//! in fair coin tossing, `2^-(i+j) C(i+j-1, j)` for `i > 0` and `[j = 0]` for
//! `i = 0`. `rho(i, j) = 2^-(i+j+1) C(i+j, j)` adds one immigrant per
//! generation, so `rho(i, ·) = pi(i + 1, ·)`.

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::exact::{binomial, Dyadic};

/// Probabilities with `i + j` up to this bound are returned as exact dyadic
/// rationals by [`kernel_pi`] / [`kernel_rho`]; larger ones in log space.
pub const EXACT_THRESHOLD: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Pi,
    Rho,
}

impl KernelKind {
    /// Number of geometric summands drawn from state `i`.
    #[inline]
    pub fn summands(self, i: u64) -> u64 {
        match self {
            KernelKind::Pi => i,
            KernelKind::Rho => i + 1,
        }
    }

    pub fn exact(self, i: u64, j: u64) -> Dyadic {
        match self {
            KernelKind::Pi => pi_exact(i, j),
            KernelKind::Rho => rho_exact(i, j),
        }
    }

    pub fn prob(self, i: u64, j: u64) -> f64 {
        match self {
            KernelKind::Pi => pi_f64(i, j),
            KernelKind::Rho => rho_f64(i, j),
        }
    }
}

/// A kernel probability in the representation chosen by the size policy.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelProb {
    Exact(Dyadic),
    /// Natural logarithm of the probability (`-inf` for zero).
    Log(f64),
}

impl KernelProb {
    pub fn to_f64(&self) -> f64 {
        match self {
            KernelProb::Exact(d) => d.to_f64(),
            KernelProb::Log(l) => l.exp(),
        }
    }

    pub fn exact(&self) -> Option<&Dyadic> {
        match self {
            KernelProb::Exact(d) => Some(d),
            KernelProb::Log(_) => None,
        }
    }
}

/// Negative-binomial mass: `n` summands, `j` failures.
fn nb_exact(n: u64, j: u64) -> Dyadic {
    if n == 0 {
        return if j == 0 { Dyadic::one() } else { Dyadic::zero() };
    }
    Dyadic::new(binomial(n + j - 1, j), n + j)
}

fn nb_ln(n: u64, j: u64) -> f64 {
    if n == 0 {
        return if j == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    ln_binomial(n + j - 1, j) - (n + j) as f64 * std::f64::consts::LN_2
}

pub fn pi_exact(i: u64, j: u64) -> Dyadic {
    nb_exact(i, j)
}

pub fn rho_exact(i: u64, j: u64) -> Dyadic {
    nb_exact(i + 1, j)
}

pub fn ln_pi(i: u64, j: u64) -> f64 {
    nb_ln(i, j)
}

pub fn ln_rho(i: u64, j: u64) -> f64 {
    nb_ln(i + 1, j)
}

pub fn pi_f64(i: u64, j: u64) -> f64 {
    if i + j <= EXACT_THRESHOLD {
        pi_exact(i, j).to_f64()
    } else {
        ln_pi(i, j).exp()
    }
}

pub fn rho_f64(i: u64, j: u64) -> f64 {
    pi_f64(i + 1, j)
}

/// `pi(i, j)`: exact for `i + j <= 64`, log space beyond.
pub fn kernel_pi(i: u64, j: u64) -> KernelProb {
    if i + j <= EXACT_THRESHOLD {
        KernelProb::Exact(pi_exact(i, j))
    } else {
        KernelProb::Log(ln_pi(i, j))
    }
}

/// `rho(i, j)`: same representation policy as [`kernel_pi`].
pub fn kernel_rho(i: u64, j: u64) -> KernelProb {
    if i + j <= EXACT_THRESHOLD {
        KernelProb::Exact(rho_exact(i, j))
    } else {
        KernelProb::Log(ln_rho(i, j))
    }
}

/// `P(NB(n) >= from)` exactly, via `P(Bin(n + from - 1, 1/2) <= n - 1)`.
fn nb_tail_exact(n: u64, from: u64) -> Dyadic {
    if from == 0 {
        return Dyadic::one();
    }
    if n == 0 {
        return Dyadic::zero();
    }
    let m = n + from - 1;
    let mut c = BigUint::one();
    let mut acc = BigUint::zero();
    for s in 0..n {
        acc += &c;
        c = c * (m - s) / (s + 1);
    }
    Dyadic::new(acc, m)
}

/// `sum_{j >= from} kernel(i, j)`, exact.
pub fn tail_exact(kind: KernelKind, i: u64, from: u64) -> Dyadic {
    nb_tail_exact(kind.summands(i), from)
}

/// `sum_{j >= from} j * kernel(i, j)`, exact, using `j pi(n, j) = n pi(n+1, j-1)`.
pub fn tail_first_moment_exact(kind: KernelKind, i: u64, from: u64) -> Dyadic {
    let n = kind.summands(i);
    if n == 0 {
        return Dyadic::zero();
    }
    nb_tail_exact(n + 1, from.saturating_sub(1)).mul_u64(n)
}

/// `sum_{j >= from} j^2 * kernel(i, j)`, exact, using
/// `j (j-1) pi(n, j) = n (n+1) pi(n+2, j-2)`.
pub fn tail_second_moment_exact(kind: KernelKind, i: u64, from: u64) -> Dyadic {
    let n = kind.summands(i);
    if n == 0 {
        return Dyadic::zero();
    }
    let factorial = nb_tail_exact(n + 2, from.saturating_sub(2)).mul_u64(n * (n + 1));
    &factorial + &tail_first_moment_exact(kind, i, from)
}

/// Tail mass and first two tail moments in floating point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TailMoments {
    pub mass: f64,
    pub first: f64,
    pub second: f64,
}

/// `sum_{j >= from}` of `kernel(i, j) * (1, j, j^2)` by direct summation from
/// `from` upwards with the ratio recurrence, stopping once terms are
/// negligible.
pub fn tail_moments_f64(kind: KernelKind, i: u64, from: u64) -> TailMoments {
    let n = kind.summands(i);
    if n == 0 {
        return if from == 0 {
            TailMoments {
                mass: 1.0,
                first: 0.0,
                second: 0.0,
            }
        } else {
            TailMoments::default()
        };
    }
    let mut p = nb_ln(n, from).exp();
    let mut out = TailMoments::default();
    let mut j = from;
    // past the mode the ratio is below 1, stop once the next term is negligible
    loop {
        let jf = j as f64;
        out.mass += p;
        out.first += p * jf;
        out.second += p * jf * jf;
        let ratio = (n + j) as f64 / (2 * (j + 1)) as f64;
        p *= ratio;
        j += 1;
        let jf = j as f64;
        if ratio < 1.0 && (p == 0.0 || (p <= 1e-18 * out.mass && p * jf * jf <= 1e-18 * out.second)) {
            break;
        }
    }
    out
}

pub fn tail_f64(kind: KernelKind, i: u64, from: u64) -> f64 {
    tail_moments_f64(kind, i, from).mass
}

/// A truncated row `j -> kernel(i, j)` for `j < truncation`, with the exact
/// residual mass of the omitted tail.
#[derive(Debug, Clone)]
pub struct KernelRow {
    pub kind: KernelKind,
    pub source: u64,
    pub probs: Vec<Dyadic>,
    pub truncation: u64,
    pub residual: Dyadic,
}

impl KernelRow {
    pub fn exact(kind: KernelKind, source: u64, truncation: u64) -> Self {
        let probs = (0..truncation).map(|j| kind.exact(source, j)).collect();
        Self {
            kind,
            source,
            probs,
            truncation,
            residual: tail_exact(kind, source, truncation),
        }
    }

    pub fn mass(&self) -> Dyadic {
        self.probs.iter().cloned().sum()
    }

    /// Row mass plus residual; exactly one for a correct kernel.
    pub fn total(&self) -> Dyadic {
        &self.mass() + &self.residual
    }

    /// Exact mean: truncated part plus the closed-form tail contribution.
    pub fn mean(&self) -> Dyadic {
        let head: Dyadic = self
            .probs
            .iter()
            .enumerate()
            .map(|(j, p)| p.mul_u64(j as u64))
            .sum();
        &head + &tail_first_moment_exact(self.kind, self.source, self.truncation)
    }

    /// Exact second moment.
    pub fn second_moment(&self) -> Dyadic {
        let head: Dyadic = self
            .probs
            .iter()
            .enumerate()
            .map(|(j, p)| p.mul_u64((j * j) as u64))
            .sum();
        &head + &tail_second_moment_exact(self.kind, self.source, self.truncation)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.probs.iter().map(Dyadic::to_f64).collect()
    }
}

/// Dense floating-point kernel table `p[i][j]` for `i < rows`, `j < cols`,
/// filled by the ratio recurrence `p(i, j+1) = p(i, j) (n + j) / (2 (j + 1))`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    pub kind: KernelKind,
    cols: usize,
    data: Vec<f64>,
}

impl KernelTable {
    pub fn new(kind: KernelKind, rows: usize, cols: usize) -> Self {
        let mut data = vec![0.0; rows * cols];
        for i in 0..rows {
            let n = kind.summands(i as u64);
            let row = &mut data[i * cols..(i + 1) * cols];
            if n == 0 {
                if cols > 0 {
                    row[0] = 1.0;
                }
                continue;
            }
            let mut p = nb_ln(n, 0).exp();
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = p;
                p *= (n + j as u64) as f64 / (2 * (j as u64 + 1)) as f64;
            }
        }
        Self { kind, cols, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j >= self.cols {
            return self.kind.prob(i as u64, j as u64);
        }
        self.data[i * self.cols + j]
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn dy(num: u32, exp: u64) -> Dyadic {
        Dyadic::new(BigUint::from(num), exp)
    }

    #[test]
    fn pi_values() {
        assert_eq!(kernel_pi(1, 0), KernelProb::Exact(dy(1, 1)));
        assert_eq!(kernel_pi(0, 0), KernelProb::Exact(Dyadic::one()));
        assert_eq!(kernel_pi(0, 3), KernelProb::Exact(Dyadic::zero()));
        // 2^-4 * 3!/(1! 2!) = 3/16
        assert_eq!(kernel_pi(2, 2), KernelProb::Exact(dy(3, 4)));
    }

    #[test]
    fn rho_values() {
        assert_eq!(kernel_rho(0, 0), KernelProb::Exact(dy(1, 1)));
        assert_eq!(kernel_rho(0, 2), KernelProb::Exact(dy(1, 3)));
        assert_eq!(kernel_rho(1, 1), KernelProb::Exact(dy(1, 2)));
    }

    #[test]
    fn representation_switches_to_log_space() {
        assert!(matches!(kernel_pi(40, 24), KernelProb::Exact(_)));
        let big = kernel_pi(40, 25);
        let KernelProb::Log(l) = big else { panic!("expected log space") };
        let exact = pi_exact(40, 25).to_f64();
        assert!((l.exp() - exact).abs() <= 1e-13 * exact);
    }

    #[test]
    fn exact_tails_match_head_sums() {
        for kind in [KernelKind::Pi, KernelKind::Rho] {
            for i in 0..12 {
                for from in 0..30 {
                    let head: Dyadic = (0..from).map(|j| kind.exact(i, j)).sum();
                    assert_eq!(&head + &tail_exact(kind, i, from), Dyadic::one(), "{kind:?} {i} {from}");
                }
            }
        }
    }

    #[test]
    fn row_moments_are_exact() {
        for i in 0..=20 {
            let row = KernelRow::exact(KernelKind::Pi, i, 7);
            assert_eq!(row.total(), Dyadic::one());
            assert_eq!(row.mean(), Dyadic::from_u64(i));
            // variance 2i
            assert_eq!(row.second_moment(), Dyadic::from_u64(i * i + 2 * i));
            let row = KernelRow::exact(KernelKind::Rho, i, 3);
            assert_eq!(row.mean(), Dyadic::from_u64(i + 1));
        }
        assert_eq!(KernelRow::exact(KernelKind::Pi, 0, 5).probs[0], Dyadic::one());
    }

    #[test]
    fn float_tail_moments_agree_with_exact() {
        for kind in [KernelKind::Pi, KernelKind::Rho] {
            for i in [1u64, 3, 10, 40] {
                for from in [0u64, 2, 10, 60] {
                    let t = tail_moments_f64(kind, i, from);
                    let m = tail_exact(kind, i, from).to_f64();
                    let m1 = tail_first_moment_exact(kind, i, from).to_f64();
                    let m2 = tail_second_moment_exact(kind, i, from).to_f64();
                    assert!((t.mass - m).abs() <= 1e-12 * m.max(1e-300), "{kind:?} {i} {from}");
                    assert!((t.first - m1).abs() <= 1e-12 * m1.max(1e-300));
                    assert!((t.second - m2).abs() <= 1e-12 * m2.max(1e-300));
                }
            }
        }
    }

    #[test]
    fn table_matches_direct_evaluation() {
        let t = KernelTable::new(KernelKind::Pi, 30, 120);
        for i in 0..30 {
            for j in 0..120 {
                let d = pi_f64(i as u64, j as u64);
                assert!((t.get(i, j) - d).abs() <= 1e-12 * d.max(1e-300));
            }
        }
    }
}
