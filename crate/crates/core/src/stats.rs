//! Goodness-of-fit tests and small estimation helpers.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::report::lossless_f64;

/// Smallest sample accepted by [`goodness_of_fit`].
pub const MIN_GOF_SAMPLES: u64 = 1000;
/// Cells are pooled until every expected count reaches this.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub observed: Vec<u64>,
    pub expected: Vec<f64>,
    /// First value of each pooled cell (the last cell is open-ended).
    pub cell_starts: Vec<u64>,
    #[serde(with = "lossless_f64")]
    pub statistic: f64,
    pub dof: u64,
    #[serde(with = "lossless_f64")]
    pub p_value: f64,
    pub pooling: String,
}

impl GofResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: u64) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    if !(statistic > 0.0) {
        return 1.0;
    }
    let d = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    d.sf(statistic)
}

/// Pool consecutive cells left to right until `weight(cell) >= threshold`;
/// a short trailing remainder is merged into the last pooled cell.
fn pool<F: Fn(usize) -> f64>(len: usize, weight: F, threshold: f64) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for i in 0..len {
        acc += weight(i);
        if acc >= threshold {
            cells.push((start, i + 1));
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < len {
        match cells.last_mut() {
            Some(last) => last.1 = len,
            None => cells.push((start, len)),
        }
    }
    cells
}

/// Chi-square test of integer samples against an exact law.
///
/// `observed[j]` counts samples equal to `j`, with the last entry counting
/// every value `>= observed.len() - 1`. `probs[j]` is the law on the same
/// cells (the last one again the whole upper tail); `probs` is padded or
/// folded to match `observed`.
pub fn goodness_of_fit(observed: &[u64], probs: &[f64]) -> Result<GofResult> {
    let n: u64 = observed.iter().sum();
    if n < MIN_GOF_SAMPLES {
        return Err(Error::GoodnessOfFit(format!("{n} samples, need at least {MIN_GOF_SAMPLES}")));
    }
    let total: f64 = probs.iter().sum();
    if probs.is_empty() || !(total > 0.0) {
        return Err(Error::GoodnessOfFit("empty support".into()));
    }
    let len = observed.len().max(probs.len());
    let mut obs = observed.to_vec();
    obs.resize(len, 0);
    let mut p = probs.to_vec();
    p.resize(len, 0.0);
    // the last cell is the open upper tail
    let tail: f64 = 1.0 - p[..len - 1].iter().sum::<f64>();
    p[len - 1] = tail.max(0.0);
    let nf = n as f64;
    let cells = pool(len, |i| p[i] * nf, MIN_EXPECTED);
    let mut observed_c = Vec::with_capacity(cells.len());
    let mut expected_c = Vec::with_capacity(cells.len());
    let mut starts = Vec::with_capacity(cells.len());
    let mut statistic = 0.0;
    for &(a, b) in &cells {
        let o: u64 = obs[a..b].iter().sum();
        let e: f64 = p[a..b].iter().sum::<f64>() * nf;
        if e > 0.0 {
            statistic += (o as f64 - e).powi(2) / e;
        } else if o > 0 {
            statistic = f64::INFINITY;
        }
        observed_c.push(o);
        expected_c.push(e);
        starts.push(a as u64);
    }
    let dof = cells.len().saturating_sub(1) as u64;
    let p_value = if statistic.is_infinite() { 0.0 } else { chi_square_sf(statistic, dof) };
    Ok(GofResult {
        observed: observed_c,
        expected: expected_c,
        cell_starts: starts,
        statistic,
        dof,
        p_value,
        pooling: format!("left-to-right until expected >= {MIN_EXPECTED}, remainder into last cell"),
    })
}

/// Two-sample chi-square homogeneity test of two histograms on `0..len`.
pub fn two_sample_chi_square(a: &[u64], b: &[u64]) -> Result<GofResult> {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na.min(nb) < MIN_GOF_SAMPLES {
        return Err(Error::GoodnessOfFit(format!("samples {na}/{nb}, need at least {MIN_GOF_SAMPLES} each")));
    }
    let len = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0);
    let (fa, fb) = (na as f64, nb as f64);
    let n = fa + fb;
    // pool on the smaller pooled expectation
    let cells = pool(
        len,
        |i| (get(a, i) + get(b, i)) as f64 * fa.min(fb) / n,
        MIN_EXPECTED,
    );
    let (ra, rb) = ((fb / fa).sqrt(), (fa / fb).sqrt());
    let mut statistic = 0.0;
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut starts = Vec::new();
    for &(s, e) in &cells {
        let oa: u64 = (s..e).map(|i| get(a, i)).sum();
        let ob: u64 = (s..e).map(|i| get(b, i)).sum();
        let m = (oa + ob) as f64;
        if m > 0.0 {
            statistic += (oa as f64 * ra - ob as f64 * rb).powi(2) / m;
        }
        observed.push(oa);
        expected.push(m * fa / n);
        starts.push(s as u64);
    }
    let dof = cells.len().saturating_sub(1) as u64;
    Ok(GofResult {
        observed,
        expected,
        cell_starts: starts,
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof),
        pooling: format!("left-to-right until pooled expectation >= {MIN_EXPECTED}"),
    })
}

/// Mean and standard error of a sample given its sum and sum of squares.
pub fn mean_se(n: u64, sum: f64, sum_sq: f64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, f64::INFINITY);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Binomial proportion and its standard error.
pub fn proportion_se(hits: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Two-sided normal p-value of a z-score.
pub fn normal_two_sided_p(z: f64) -> f64 {
    let d = Normal::standard();
    2.0 * d.sf(z.abs())
}

/// Least-squares fit of `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_coin_passes() {
        let g = goodness_of_fit(&[499_823, 500_177], &[0.5, 0.5]).unwrap();
        assert!((g.statistic - 0.125_316).abs() < 1e-5, "{}", g.statistic);
        assert!(g.p_value > 0.7 && g.p_value < 0.74, "{}", g.p_value);
        assert_eq!(g.dof, 1);
    }

    #[test]
    fn point_mass_trivially_passes() {
        let g = goodness_of_fit(&[5000], &[1.0]).unwrap();
        assert_eq!(g.dof, 0);
        assert_eq!(g.p_value, 1.0);
    }

    #[test]
    fn refuses_small_or_empty() {
        assert!(goodness_of_fit(&[10, 10], &[0.5, 0.5]).is_err());
        assert!(goodness_of_fit(&[1000, 1000], &[]).is_err());
        assert!(goodness_of_fit(&[1000, 1000], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn geometric_sample_fits_first_pi_row() {
        let mut bits = crate::rng::BitStream::for_replica(11, 0);
        let mut hist = vec![0u64; 40];
        for _ in 0..100_000 {
            let g = bits.geometric() as usize;
            hist[g.min(39)] += 1;
        }
        let probs: Vec<f64> = (0..40).map(|j| crate::branching::kernel::pi_f64(1, j)).collect();
        let g = goodness_of_fit(&hist, &probs).unwrap();
        assert!(g.passes(1e-3), "{g:?}");
        assert!(g.expected.iter().all(|&e| e >= MIN_EXPECTED));
    }

    #[test]
    fn two_sample_detects_shift() {
        let a = [5000u64, 3000, 2000];
        assert!(two_sample_chi_square(&a, &a).unwrap().p_value > 0.99);
        let b = [3000u64, 3000, 4000];
        assert!(two_sample_chi_square(&a, &b).unwrap().p_value < 1e-10);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0];
        let (a, b) = linear_fit(&xs, &ys);
        assert!((a + 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }
}
