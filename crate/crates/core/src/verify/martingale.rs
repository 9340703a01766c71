//! Optional stopping for the martingales of the two chains.

use serde::{Deserialize, Serialize};

use super::{AuditConfig, SE_AGREEMENT};
use crate::branching::chain::{run_chain_to_stop, ChainKind, ChainState, StopVariant};
use crate::branching::passage::first_passage_dp;
use crate::error::{Error, Result};
use crate::params;
use crate::parallel::{run_replicas, split_budget, DEFAULT_BATCH};
use crate::report::{AuditKind, AuditPoint, AuditReport, Method};
use crate::rng::{replica_rng, stream_seed, BitStream};

pub const Y_START: u64 = 5;
pub const Y_LEVEL: u64 = 10;
pub const Z_START: u64 = 0;
pub const Z_LEVEL: u64 = 10;
pub const Z_HORIZON: u64 = 100;
/// Generations after which a stopped run counts as censored.
pub const STEP_CAP: u64 = 1_000_000;
/// Tolerance of the DP identities.
pub const DP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MartingaleKind {
    /// `Y_t` stopped at `sigma_h ^ omega`.
    YMean,
    /// `Y_t^2 - 2 sum_{s<t} Y_s` stopped at `sigma_h ^ omega`.
    YQuadratic,
    /// `Z_t - t` at a fixed horizon.
    ZDrift,
    /// `t^2 - 2 t Z_t` stopped at `tau_h`, a supermartingale.
    ZSuper,
}

impl MartingaleKind {
    pub const ALL: [MartingaleKind; 4] = [
        MartingaleKind::YMean,
        MartingaleKind::YQuadratic,
        MartingaleKind::ZDrift,
        MartingaleKind::ZSuper,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MartingaleKind::YMean => "y-mean",
            MartingaleKind::YQuadratic => "y-quadratic",
            MartingaleKind::ZDrift => "z-drift",
            MartingaleKind::ZSuper => "z-super",
        }
    }

    fn stream(self) -> u64 {
        40 + self as u64
    }
}

impl std::str::FromStr for MartingaleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MartingaleKind::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown martingale {s}")))
    }
}

/// Exact integer sums of the sampled statistic.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Sums {
    n: u64,
    censored: u64,
    sum: i128,
    sum_sq: u128,
}

impl Sums {
    fn add(&mut self, x: i128) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += (x * x) as u128;
    }

    fn merge(mut self, o: Sums) -> Sums {
        self.n += o.n;
        self.censored += o.censored;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
        self
    }

    fn mean_se(&self) -> (f64, f64) {
        let n = self.n as f64;
        let mean = self.sum as f64 / n;
        let var = (self.sum_sq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

fn sample(kind: MartingaleKind, bits: &mut BitStream<rand_chacha::ChaCha8Rng>) -> Result<Option<i128>> {
    let (start, level, variant) = match kind {
        MartingaleKind::YMean | MartingaleKind::YQuadratic => (ChainState::y(Y_START), Y_LEVEL, StopVariant::Level),
        MartingaleKind::ZDrift => (ChainState::z(Z_START), u64::MAX, StopVariant::Horizon { steps: Z_HORIZON }),
        MartingaleKind::ZSuper => (ChainState::z(Z_START), Z_LEVEL, StopVariant::Level),
    };
    let rec = run_chain_to_stop(start, level, variant, bits, STEP_CAP)?;
    if rec.censored {
        return Ok(None);
    }
    let v = rec.final_value as i128;
    let t = rec.steps as i128;
    Ok(Some(match kind {
        MartingaleKind::YMean => v,
        MartingaleKind::YQuadratic => v * v - 2 * rec.occupation as i128,
        MartingaleKind::ZDrift => v - t,
        MartingaleKind::ZSuper => t * t - 2 * t * v,
    }))
}

/// `(value, target)` of the optional-stopping identity from the passage DP.
/// For the supermartingale the target is its initial value 0 and the value
/// is `-2 E sum_{s<tau} Z_s - E tau`.
pub fn exact_identity(kind: MartingaleKind) -> Result<(f64, f64)> {
    match kind {
        MartingaleKind::YMean | MartingaleKind::YQuadratic => {
            let s = first_passage_dp(ChainKind::Y, Y_LEVEL, None)?;
            let k = Y_START;
            let occupation: f64 = s.green[k as usize].iter().enumerate().map(|(l, g)| g * l as f64).sum();
            Ok(match kind {
                MartingaleKind::YMean => (s.crossing_moment(k, 1), k as f64),
                _ => (s.crossing_moment(k, 2) - 2.0 * occupation, (k * k) as f64),
            })
        }
        MartingaleKind::ZDrift => {
            let s = first_passage_dp(ChainKind::Z, Z_LEVEL, None)?;
            Ok((s.crossing_moment(Z_START, 1) - s.at(Z_START).mean_time, Z_START as f64))
        }
        MartingaleKind::ZSuper => {
            let s = first_passage_dp(ChainKind::Z, Z_LEVEL, None)?;
            let occupation: f64 = s.green[Z_START as usize].iter().enumerate().map(|(l, g)| g * l as f64).sum();
            Ok((-2.0 * occupation - s.at(Z_START).mean_time, 0.0))
        }
    }
}

pub fn martingale_audit(kind: MartingaleKind, cfg: &AuditConfig) -> Result<AuditReport> {
    cfg.validate()?;
    let mut report = AuditReport::new(format!("martingale-{}", kind.as_str()), Method::MonteCarlo, AuditKind::Hard)
        .with_params(params![samples = cfg.samples, seed = cfg.seed, se_agreement = SE_AGREEMENT]);
    let (dp, target) = exact_identity(kind)?;
    let exact_ok = match kind {
        MartingaleKind::ZSuper => dp <= 0.0,
        _ => (dp - target).abs() <= DP_TOLERANCE * target.abs().max(1.0),
    };
    report.push(AuditPoint::new(
        params![check = "optional stopping, exact DP", target = target],
        dp,
        Some(target - dp),
        exact_ok,
    ));
    // Monte Carlo: the sampled statistic against the DP value (the fixed
    // horizon drift against 0)
    let mc_target = match kind {
        MartingaleKind::ZSuper => dp,
        MartingaleKind::ZDrift => 0.0,
        _ => target,
    };
    let (replicas, size) = split_budget(cfg.samples, DEFAULT_BATCH);
    let seed = stream_seed(cfg.seed, kind.stream());
    let parts = run_replicas(replicas, cfg.workers, |r| -> Result<Sums> {
        let mut bits = BitStream::new(replica_rng(seed, r));
        let mut s = Sums::default();
        for _ in 0..size(r) {
            match sample(kind, &mut bits)? {
                Some(x) => s.add(x),
                None => s.censored += 1,
            }
        }
        Ok(s)
    })?;
    let sums = parts.into_iter().try_fold(Sums::default(), |a, b| b.map(|b| a.merge(b)))?;
    report.samples = Some(cfg.samples);
    report.count("n", sums.n);
    report.count("censored", sums.censored);
    report.count("sum_abs", sums.sum.unsigned_abs() as u64);
    report.count("sum_sq", u64::try_from(sums.sum_sq).unwrap_or(u64::MAX));
    report.censored_mass = Some(sums.censored as f64 / cfg.samples as f64);
    let (mean, se) = sums.mean_se();
    let z = if se > 0.0 { (mean - mc_target) / se } else { 0.0 };
    report.push(AuditPoint::new(
        params![check = "Monte Carlo mean", target = mc_target, se = se],
        mean,
        Some(z),
        z.abs() <= SE_AGREEMENT,
    ));
    if sums.censored > 0 {
        return Ok(report.inconclusive(format!("{} runs hit the step cap", sums.censored)).finish());
    }
    Ok(report.finish())
}
