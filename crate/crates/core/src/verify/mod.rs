//! Audits: exact and Monte Carlo checks of the quantitative statements
//! behind the favourite-site bounds.

pub mod bounds;
pub mod f4;
pub mod martingale;
pub mod prop1;
pub mod suite;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::linear_fit;

pub use bounds::bound_audit;
pub use f4::{f4_longrun_report, F4Config};
pub use martingale::{martingale_audit, MartingaleKind};
pub use prop1::{proposition1_audit, Prop1Config};

/// Default audit-level significance.
pub const SIGNIFICANCE: f64 = 1e-3;
/// Monte Carlo agreement, in standard errors.
pub const SE_AGREEMENT: f64 = 3.0;
/// A fitted constant is stable when the log-log slope of the per-`h`
/// requirement over the upper half of the scan is at most this.
pub const STABLE_SLOPE: f64 = 0.1;
/// Slack allowed for floating-point DP comparisons.
pub const DP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuditConfig {
    pub seed: u64,
    pub workers: usize,
    pub eps: f64,
    /// Largest level of the exact scans.
    pub h_max: u64,
    /// Monte Carlo sample size.
    pub samples: u64,
    pub significance: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            workers: 1,
            eps: 0.05,
            h_max: 256,
            samples: 100_000,
            significance: SIGNIFICANCE,
        }
    }
}

impl AuditConfig {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 || self.samples == 0 || self.h_max < 2 {
            return Err(Error::InvalidParameter("workers, samples must be >= 1 and h_max >= 2".into()));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::InvalidParameter(format!("eps = {} outside (0, 1/2)", self.eps)));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::InvalidParameter(format!("significance = {}", self.significance)));
        }
        Ok(())
    }
}

/// The statements audited by [`bound_audit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaId {
    #[serde(rename = "lemma-1")]
    Lemma1,
    #[serde(rename = "lemma-2")]
    Lemma2,
    #[serde(rename = "lemma-3")]
    Lemma3,
    #[serde(rename = "lemma-4")]
    Lemma4,
    #[serde(rename = "side-lemma-1")]
    SideLemma1,
    #[serde(rename = "side-lemma-2")]
    SideLemma2,
    #[serde(rename = "side-lemma-3")]
    SideLemma3,
    #[serde(rename = "side-lemma-4")]
    SideLemma4,
    #[serde(rename = "side-lemma-5")]
    SideLemma5,
    #[serde(rename = "side-lemma-6")]
    SideLemma6,
    #[serde(rename = "side-lemma-7")]
    SideLemma7,
    Overshoot,
    Corollary,
    Monotonicity,
}

impl LemmaId {
    pub const ALL: [LemmaId; 14] = [
        LemmaId::Lemma1,
        LemmaId::Lemma2,
        LemmaId::Lemma3,
        LemmaId::Lemma4,
        LemmaId::SideLemma1,
        LemmaId::SideLemma2,
        LemmaId::SideLemma3,
        LemmaId::SideLemma4,
        LemmaId::SideLemma5,
        LemmaId::SideLemma6,
        LemmaId::SideLemma7,
        LemmaId::Overshoot,
        LemmaId::Corollary,
        LemmaId::Monotonicity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LemmaId::Lemma1 => "lemma-1",
            LemmaId::Lemma2 => "lemma-2",
            LemmaId::Lemma3 => "lemma-3",
            LemmaId::Lemma4 => "lemma-4",
            LemmaId::SideLemma1 => "side-lemma-1",
            LemmaId::SideLemma2 => "side-lemma-2",
            LemmaId::SideLemma3 => "side-lemma-3",
            LemmaId::SideLemma4 => "side-lemma-4",
            LemmaId::SideLemma5 => "side-lemma-5",
            LemmaId::SideLemma6 => "side-lemma-6",
            LemmaId::SideLemma7 => "side-lemma-7",
            LemmaId::Overshoot => "overshoot",
            LemmaId::Corollary => "corollary",
            LemmaId::Monotonicity => "monotonicity",
        }
    }
}

impl std::str::FromStr for LemmaId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LemmaId::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown lemma id {s}")))
    }
}

/// `2, 4, 8, ...` up to `h_max`, with `h_max` itself appended.
pub fn h_grid(h_max: u64) -> Vec<u64> {
    let mut v: Vec<u64> = std::iter::successors(Some(2u64), |h| Some(h * 2)).take_while(|&h| h <= h_max).collect();
    if v.last() != Some(&h_max) && h_max >= 2 {
        v.push(h_max);
    }
    v
}

/// Minimal constant over a scan and whether it looks stable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantFit {
    pub c: f64,
    /// Log-log slope of the per-`h` requirement over the upper half.
    pub slope: f64,
    pub stable: bool,
}

/// `cs[i]` is the constant needed at `hs[i]`.
pub fn fit_constant(hs: &[u64], cs: &[f64]) -> ConstantFit {
    let c = cs.iter().cloned().fold(0.0, f64::max);
    let start = hs.len() / 2;
    let pts: Vec<(f64, f64)> = hs[start..]
        .iter()
        .zip(&cs[start..])
        .filter(|(_, &c)| c > 0.0)
        .map(|(&h, &c)| ((h as f64).ln(), c.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        linear_fit(&xs, &ys).1
    } else {
        0.0
    };
    ConstantFit {
        c,
        slope,
        stable: c.is_finite() && slope <= STABLE_SLOPE,
    }
}

/// Log-log slope of `ys` against `hs`.
pub fn loglog_slope(hs: &[f64], ys: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&xs, &ls).1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_and_ids() {
        assert_eq!(h_grid(16), vec![2, 4, 8, 16]);
        assert_eq!(h_grid(20), vec![2, 4, 8, 16, 20]);
        for id in LemmaId::ALL {
            assert_eq!(id.as_str().parse::<LemmaId>().unwrap(), id);
            assert_eq!(serde_json::to_value(id).unwrap(), id.as_str());
        }
        assert!("lemma-9".parse::<LemmaId>().is_err());
    }

    #[test]
    fn constant_fit_detects_growth() {
        let hs = [2, 4, 8, 16, 32, 64];
        let flat = [1.0, 1.2, 1.3, 1.31, 1.31, 1.31];
        assert!(fit_constant(&hs, &flat).stable);
        let growing: Vec<f64> = hs.iter().map(|&h| (h as f64).sqrt()).collect();
        let f = fit_constant(&hs, &growing);
        assert!(!f.stable);
        assert!((f.slope - 0.5).abs() < 1e-12);
    }
}
