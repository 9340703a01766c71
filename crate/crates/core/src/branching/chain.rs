//! Sampling the `Y` (critical, kernel `pi`) and `Z` (one immigrant per
//! generation, kernel `rho`) chains and running them to the stopping times
//! used by the audits.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::kernel::KernelKind;
use crate::error::{Error, Result};
use crate::rng::BitStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChainKind {
    Y,
    Z,
}

impl ChainKind {
    pub fn kernel(self) -> KernelKind {
        match self {
            ChainKind::Y => KernelKind::Pi,
            ChainKind::Z => KernelKind::Rho,
        }
    }

    /// Constant added to `value + prev` in the two-step sum: 0 for `Y`, 1 for `Z`.
    #[inline]
    pub fn tilde_offset(self) -> u64 {
        match self {
            ChainKind::Y => 0,
            ChainKind::Z => 1,
        }
    }
}

/// One draw from `kernel(i, ·)`: a sum of `i` (resp. `i + 1`) geometric(1/2)
/// variables.
#[inline]
pub fn sample_offspring_sum<R: RngCore>(kind: KernelKind, i: u64, bits: &mut BitStream<R>) -> u64 {
    bits.geometric_sum(kind.summands(i))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub kind: ChainKind,
    pub t: u64,
    pub value: u64,
    /// Value one generation earlier, if known.
    pub prev: Option<u64>,
}

impl ChainState {
    pub fn new(kind: ChainKind, value: u64) -> Self {
        Self {
            kind,
            t: 0,
            value,
            prev: None,
        }
    }

    pub fn y(value: u64) -> Self {
        Self::new(ChainKind::Y, value)
    }

    pub fn z(value: u64) -> Self {
        Self::new(ChainKind::Z, value)
    }

    /// Start with a known pre-initial value, so that the two-step sum is
    /// defined at time 0.
    pub fn with_prev(mut self, prev: u64) -> Self {
        self.prev = Some(prev);
        self
    }

    /// `value + prev` (+1 for `Z`), when `prev` is known.
    pub fn tilde(&self) -> Option<u64> {
        self.prev.map(|p| self.value + p + self.kind.tilde_offset())
    }

    #[inline]
    pub fn step<R: RngCore>(&mut self, bits: &mut BitStream<R>) -> u64 {
        let next = sample_offspring_sum(self.kind.kernel(), self.value, bits);
        self.prev = Some(self.value);
        self.value = next;
        self.t += 1;
        next
    }

    pub fn is_absorbed(&self) -> bool {
        self.kind == ChainKind::Y && self.value == 0
    }
}

/// When a chain run stops.
///
/// `Level` stops at the first time the chain is at or above `h`. A `Y` chain
/// at 0 stays there forever, so `Level` also stops at absorption: the plain
/// and the absorption-race stopping rules coincide as simulations and differ
/// only in which recorded time is read off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum StopVariant {
    Level,
    /// Stop after the given number of times `t >= 1` at which the two-step
    /// sum is at or above `h`, or once no further such time is possible.
    Tilde { crossings: usize },
    /// Run exactly `steps` generations (unless a `Y` chain dies first).
    Horizon { steps: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TildeCrossing {
    pub t: u64,
    pub pre: u64,
    pub value: u64,
    pub tilde: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopRecord {
    pub kind: ChainKind,
    pub level: u64,
    pub start: u64,
    /// Generations simulated.
    pub steps: u64,
    /// First `t >= 0` with value `>= level`.
    pub level_crossing: Option<u64>,
    /// First `t >= 0` with a `Y` chain at 0.
    pub absorption: Option<u64>,
    /// Largest `|X_t - X_{t-1}|` over `1 <= t <= min(level_crossing, absorption, steps)`.
    pub max_jump: u64,
    pub tilde: Vec<TildeCrossing>,
    pub final_value: u64,
    pub pre_final_value: Option<u64>,
    /// Sum of the values at times `0..steps`.
    pub occupation: u128,
    pub censored: bool,
}

impl StopRecord {
    pub fn crossing_value(&self) -> Option<u64> {
        self.level_crossing.map(|_| self.final_value)
    }
}

/// Run a chain from `start` until `variant` fires or `cap` generations have
/// been simulated (then `censored` is set).
pub fn run_chain_to_stop<R: RngCore>(
    start: ChainState,
    level: u64,
    variant: StopVariant,
    bits: &mut BitStream<R>,
    cap: u64,
) -> Result<StopRecord> {
    if level == 0 {
        return Err(Error::InvalidParameter("level must be positive".into()));
    }
    if let StopVariant::Tilde { crossings: 0 } = variant {
        return Err(Error::InvalidParameter("tilde stop needs at least one crossing".into()));
    }
    let mut state = start;
    let mut rec = StopRecord {
        kind: state.kind,
        level,
        start: state.value,
        steps: 0,
        level_crossing: (state.value >= level).then_some(0),
        absorption: state.is_absorbed().then_some(0),
        max_jump: 0,
        tilde: Vec::new(),
        final_value: state.value,
        pre_final_value: state.prev,
        occupation: 0,
        censored: false,
    };
    let offset = state.kind.tilde_offset();
    loop {
        let done = match variant {
            StopVariant::Level => rec.level_crossing.is_some() || rec.absorption.is_some(),
            StopVariant::Tilde { crossings } => {
                // the two-step sum ending at the absorption time was already
                // examined, every later one is 0
                rec.tilde.len() >= crossings || state.is_absorbed()
            }
            StopVariant::Horizon { steps } => state.t >= steps || state.is_absorbed(),
        };
        if done {
            break;
        }
        if state.t >= cap {
            rec.censored = true;
            break;
        }
        rec.occupation += state.value as u128;
        let before = state.value;
        let after = state.step(bits);
        let t = state.t;
        if rec.level_crossing.is_none() && rec.absorption.is_none() {
            rec.max_jump = rec.max_jump.max(after.abs_diff(before));
            if after >= level {
                rec.level_crossing = Some(t);
            }
        }
        if rec.absorption.is_none() && state.is_absorbed() {
            rec.absorption = Some(t);
        }
        let tilde = after + before + offset;
        if tilde >= level {
            rec.tilde.push(TildeCrossing {
                t,
                pre: before,
                value: after,
                tilde,
            });
        }
    }
    rec.steps = state.t;
    rec.final_value = state.value;
    rec.pre_final_value = state.prev;
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn y_chain_at_zero_is_absorbed() {
        let mut bits = BitStream::for_replica(1, 0);
        let rec = run_chain_to_stop(ChainState::y(0), 3, StopVariant::Level, &mut bits, 100).unwrap();
        assert_eq!(rec.absorption, Some(0));
        assert_eq!(rec.steps, 0);
        assert_eq!(rec.level_crossing, None);
    }

    #[test]
    fn start_above_level_stops_immediately() {
        let mut bits = BitStream::for_replica(1, 0);
        let rec = run_chain_to_stop(ChainState::z(5), 3, StopVariant::Level, &mut bits, 100).unwrap();
        assert_eq!(rec.level_crossing, Some(0));
        assert_eq!(rec.max_jump, 0);
        assert_eq!(rec.crossing_value(), Some(5));
    }

    #[test]
    fn zero_level_is_rejected() {
        let mut bits = BitStream::for_replica(1, 0);
        assert!(run_chain_to_stop(ChainState::z(0), 0, StopVariant::Level, &mut bits, 10).is_err());
    }

    #[test]
    fn tilde_crossings_are_consistent() {
        let mut bits = BitStream::for_replica(9, 2);
        for _ in 0..200 {
            let rec = run_chain_to_stop(
                ChainState::z(2),
                6,
                StopVariant::Tilde { crossings: 3 },
                &mut bits,
                100_000,
            )
            .unwrap();
            assert!(!rec.censored);
            assert_eq!(rec.tilde.len(), 3);
            for c in &rec.tilde {
                assert_eq!(c.tilde, c.pre + c.value + 1);
                assert!(c.tilde >= 6);
            }
            assert_eq!(rec.steps, rec.tilde[2].t);
        }
    }

    #[test]
    fn horizon_runs_fixed_steps() {
        let mut bits = BitStream::for_replica(3, 0);
        let rec = run_chain_to_stop(ChainState::z(0), 1_000_000, StopVariant::Horizon { steps: 50 }, &mut bits, 1000)
            .unwrap();
        assert_eq!(rec.steps, 50);
        assert!(!rec.censored);
    }

    #[test]
    fn censoring_is_reported() {
        let mut bits = BitStream::for_replica(3, 0);
        let rec = run_chain_to_stop(ChainState::z(0), 1_000_000, StopVariant::Level, &mut bits, 10).unwrap();
        assert!(rec.censored);
        assert_eq!(rec.steps, 10);
    }

    #[test]
    fn y_mean_is_preserved() {
        let mut bits = BitStream::for_replica(5, 0);
        let n = 100_000;
        let mut total = 0u64;
        for _ in 0..n {
            let mut s = ChainState::y(4);
            total += s.step(&mut bits);
        }
        // variance 2 * 4 = 8
        let mean = total as f64 / n as f64;
        assert!((mean - 4.0).abs() < 4.0 * (8.0 / n as f64).sqrt());
    }
}
