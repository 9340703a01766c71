//! Simple symmetric random walk on Z with streaming crossing ledgers and
//! favourite-site tracking.
//!
//! `U(t,x)`, `D(t,x)` and `L(t,x) = U + D` count arrivals at `x` from below,
//! from above, and in total, over times `0 < s <= t`. The favourite set is the
//! argmax of `L(t,·)`; at every step it either stays put, gains the current
//! site, or collapses onto it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::BitStream;

/// Default number of tracked favourite-count levels `f(1)..f(r_max)`.
pub const DEFAULT_R_MAX: usize = 6;

/// Default step cap for inverse-local-time runs.
pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WalkState {
    pub t: u64,
    pub pos: i64,
}

/// Per-site upcrossing/downcrossing counts.
///
/// The range of a nearest-neighbour walk is an interval containing the
/// origin, so counts are stored densely over that interval. Sites outside
/// read as zero.
#[derive(Debug, Clone)]
pub struct CrossingLedger {
    lo: i64,
    up: Vec<u64>,
    down: Vec<u64>,
}

impl Default for CrossingLedger {
    fn default() -> Self {
        Self::new()
    }
}

impl CrossingLedger {
    pub fn new() -> Self {
        Self {
            lo: 0,
            up: vec![0],
            down: vec![0],
        }
    }

    #[inline]
    fn index(&self, x: i64) -> Option<usize> {
        let i = x - self.lo;
        (i >= 0 && (i as usize) < self.up.len()).then_some(i as usize)
    }

    fn ensure(&mut self, x: i64) -> usize {
        if x < self.lo {
            let extra = (self.lo - x) as usize;
            let grow = extra.max(self.up.len() / 2 + 1);
            let mut up = vec![0; grow];
            up.extend_from_slice(&self.up);
            let mut down = vec![0; grow];
            down.extend_from_slice(&self.down);
            self.up = up;
            self.down = down;
            self.lo -= grow as i64;
        }
        let i = (x - self.lo) as usize;
        if i >= self.up.len() {
            let new_len = (i + 1).max(self.up.len() + self.up.len() / 2 + 1);
            self.up.resize(new_len, 0);
            self.down.resize(new_len, 0);
        }
        i
    }

    #[inline]
    pub fn up(&self, x: i64) -> u64 {
        self.index(x).map_or(0, |i| self.up[i])
    }

    #[inline]
    pub fn down(&self, x: i64) -> u64 {
        self.index(x).map_or(0, |i| self.down[i])
    }

    #[inline]
    pub fn local(&self, x: i64) -> u64 {
        self.index(x).map_or(0, |i| self.up[i] + self.down[i])
    }

    /// Records an arrival at `site`; `from_below` selects the upcrossing count.
    /// Returns the new local time at `site`.
    #[inline]
    pub fn record(&mut self, site: i64, from_below: bool) -> u64 {
        let i = self.ensure(site);
        if from_below {
            self.up[i] += 1;
        } else {
            self.down[i] += 1;
        }
        self.up[i] + self.down[i]
    }

    /// Overwrites the counts at a site. Only meant for fault-injection tests
    /// of the identity checker.
    pub fn set_raw(&mut self, site: i64, up: u64, down: u64) {
        let i = self.ensure(site);
        self.up[i] = up;
        self.down[i] = down;
    }

    /// Smallest and largest site with a non-zero count, if any.
    pub fn touched_range(&self) -> Option<(i64, i64)> {
        let first = (0..self.up.len()).find(|&i| self.up[i] + self.down[i] > 0)?;
        let last = (0..self.up.len())
            .rev()
            .find(|&i| self.up[i] + self.down[i] > 0)?;
        Some((self.lo + first as i64, self.lo + last as i64))
    }

    /// Iterates `(site, up, down)` over sites with a non-zero count.
    pub fn touched(&self) -> impl Iterator<Item = (i64, u64, u64)> + '_ {
        self.up
            .iter()
            .zip(&self.down)
            .enumerate()
            .filter(|(_, (u, d))| **u + **d > 0)
            .map(move |(i, (u, d))| (self.lo + i as i64, *u, *d))
    }

    /// Maximum local time and the sorted argmax, recomputed from scratch.
    pub fn favourites_from_scratch(&self) -> (u64, Vec<i64>) {
        let mut max = 0u64;
        let mut fav = Vec::new();
        for (x, u, d) in self.touched() {
            let l = u + d;
            if l > max {
                max = l;
                fav.clear();
                fav.push(x);
            } else if l == max {
                fav.push(x);
            }
        }
        (max, fav)
    }
}

/// Which branch of the favourite-set trichotomy a step took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrichotomyCase {
    /// The new site is not a favourite; the set is unchanged.
    Unchanged,
    /// The new site joins the previous favourites.
    Append,
    /// The new site, previously a favourite, becomes the only one.
    Reset,
}

/// Running maximum local time, favourite set, and `f(r)` counters.
#[derive(Debug, Clone)]
pub struct FavouriteTracker {
    max_local: u64,
    favourites: Vec<i64>,
    f: Vec<u64>,
    case_log: Option<Vec<TrichotomyCase>>,
}

impl FavouriteTracker {
    pub fn new(r_max: usize) -> Self {
        Self {
            max_local: 0,
            favourites: Vec::new(),
            f: vec![0; r_max],
            case_log: None,
        }
    }

    pub fn with_case_log(mut self) -> Self {
        self.case_log = Some(Vec::new());
        self
    }

    pub fn max_local(&self) -> u64 {
        self.max_local
    }

    /// Favourites in the order they joined the current set.
    pub fn favourites(&self) -> &[i64] {
        &self.favourites
    }

    pub fn count(&self) -> usize {
        self.favourites.len()
    }

    pub fn contains(&self, x: i64) -> bool {
        self.favourites.contains(&x)
    }

    pub fn r_max(&self) -> usize {
        self.f.len()
    }

    pub fn case_log(&self) -> Option<&[TrichotomyCase]> {
        self.case_log.as_deref()
    }

    #[inline]
    fn update(&mut self, site: i64, local: u64) -> TrichotomyCase {
        let case = if local > self.max_local {
            self.max_local = local;
            self.favourites.clear();
            self.favourites.push(site);
            TrichotomyCase::Reset
        } else if local == self.max_local {
            self.favourites.push(site);
            TrichotomyCase::Append
        } else {
            TrichotomyCase::Unchanged
        };
        if case != TrichotomyCase::Unchanged {
            let r = self.favourites.len();
            if r <= self.f.len() {
                self.f[r - 1] += 1;
            }
        }
        if let Some(log) = self.case_log.as_mut() {
            log.push(case);
        }
        case
    }
}

/// `f(1)..f(r_max)`: steps spent on a favourite while exactly `r` sites tie.
pub fn f_counters_snapshot(tracker: &FavouriteTracker) -> Vec<u64> {
    tracker.f.clone()
}

/// One step of the walk. `direction` must be +1 or -1.
#[inline]
pub fn advance_step(
    state: &mut WalkState,
    ledger: &mut CrossingLedger,
    tracker: &mut FavouriteTracker,
    direction: i8,
) -> TrichotomyCase {
    debug_assert!(direction == 1 || direction == -1);
    state.t += 1;
    state.pos += direction as i64;
    let local = ledger.record(state.pos, direction == 1);
    tracker.update(state.pos, local)
}

/// A walk trajectory in progress: state, ledger and tracker together.
#[derive(Debug, Clone)]
pub struct Walk {
    pub state: WalkState,
    pub ledger: CrossingLedger,
    pub tracker: FavouriteTracker,
}

impl Default for Walk {
    fn default() -> Self {
        Self::new(DEFAULT_R_MAX)
    }
}

impl Walk {
    pub fn new(r_max: usize) -> Self {
        Self {
            state: WalkState::default(),
            ledger: CrossingLedger::new(),
            tracker: FavouriteTracker::new(r_max),
        }
    }

    pub fn with_case_log(mut self) -> Self {
        self.tracker = self.tracker.with_case_log();
        self
    }

    #[inline]
    pub fn step(&mut self, direction: i8) -> TrichotomyCase {
        advance_step(
            &mut self.state,
            &mut self.ledger,
            &mut self.tracker,
            direction,
        )
    }

    /// Runs a fixed sequence of ±1 steps.
    pub fn from_steps(steps: &[i8], r_max: usize) -> Self {
        let mut w = Self::new(r_max);
        for &s in steps {
            w.step(s);
        }
        w
    }
}

/// Source of ±1 steps. `None` means the source is exhausted.
pub trait StepSource {
    fn next_step(&mut self) -> Option<i8>;
}

impl<R: rand::RngCore> StepSource for BitStream<R> {
    #[inline]
    fn next_step(&mut self) -> Option<i8> {
        Some(self.step())
    }
}

/// A finite, scripted step sequence.
#[derive(Debug, Clone)]
pub struct ScriptedSteps<'a> {
    steps: &'a [i8],
    at: usize,
}

impl<'a> ScriptedSteps<'a> {
    pub fn new(steps: &'a [i8]) -> Self {
        Self { steps, at: 0 }
    }
}

impl StepSource for ScriptedSteps<'_> {
    fn next_step(&mut self) -> Option<i8> {
        let s = self.steps.get(self.at).copied();
        self.at += 1;
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StopKind {
    FixedTime { t_max: u64 },
    /// `T_U(k, x)`: the time of the `k`-th arrival at `x` from `x - 1`.
    InverseUp { k: u64, x: i64 },
    /// `T_D(k, x)`: the time of the `k`-th arrival at `x` from `x + 1`.
    InverseDown { k: u64, x: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopSpec {
    pub kind: StopKind,
    pub cap: u64,
}

impl StopSpec {
    pub fn fixed_time(t_max: u64) -> Self {
        Self {
            kind: StopKind::FixedTime { t_max },
            cap: t_max.max(1),
        }
    }

    pub fn inverse_up(k: u64, x: i64) -> Self {
        Self {
            kind: StopKind::InverseUp { k, x },
            cap: DEFAULT_STEP_CAP,
        }
    }

    pub fn inverse_down(k: u64, x: i64) -> Self {
        Self {
            kind: StopKind::InverseDown { k, x },
            cap: DEFAULT_STEP_CAP,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.cap == 0 {
            return Err(Error::InvalidParameter("stop cap must be >= 1".into()));
        }
        match self.kind {
            StopKind::InverseUp { k, .. } | StopKind::InverseDown { k, .. } if k == 0 => {
                Err(Error::InvalidParameter("inverse local time needs k >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether the walk, having just arrived at `state.pos` with the ledger
    /// already updated, satisfies the stopping condition.
    #[inline]
    fn fired(&self, state: &WalkState, ledger: &CrossingLedger, direction: i8) -> bool {
        match self.kind {
            StopKind::FixedTime { t_max } => state.t >= t_max,
            StopKind::InverseUp { k, x } => {
                direction == 1 && state.pos == x && ledger.up(x) == k
            }
            StopKind::InverseDown { k, x } => {
                direction == -1 && state.pos == x && ledger.down(x) == k
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct StopOutcome {
    pub walk: Walk,
    /// The stopping time, `None` when censored.
    pub stop_time: Option<u64>,
    pub censored: bool,
}

/// Runs a walk from the origin until the stop condition fires or `cap` steps
/// have been taken (a censored outcome, with the partial state returned).
pub fn run_to_stop<S: StepSource>(spec: &StopSpec, source: &mut S, r_max: usize) -> Result<StopOutcome> {
    spec.validate()?;
    let mut walk = Walk::new(r_max);
    if let StopKind::FixedTime { t_max: 0 } = spec.kind {
        return Ok(StopOutcome {
            walk,
            stop_time: Some(0),
            censored: false,
        });
    }
    while walk.state.t < spec.cap {
        let Some(dir) = source.next_step() else { break };
        walk.step(dir);
        if spec.fired(&walk.state, &walk.ledger, dir) {
            let t = walk.state.t;
            return Ok(StopOutcome {
                walk,
                stop_time: Some(t),
                censored: false,
            });
        }
    }
    Ok(StopOutcome {
        walk,
        stop_time: None,
        censored: true,
    })
}

/// Like [`run_to_stop`] but every excursion that leaves `[lo, hi]` is
/// replaced by its shortest version (one step out, one step back).
///
/// Such an excursion returns to the boundary site almost surely and changes
/// no count at sites inside the window, so the window restriction of the
/// ledger at the stopping time has the same law as for the full walk, while
/// the run needs only finitely many steps in expectation. Counts outside the
/// window and the time index are not those of the full walk.
pub fn run_to_stop_collapsed<S: StepSource>(
    spec: &StopSpec,
    window: (i64, i64),
    source: &mut S,
    r_max: usize,
) -> Result<StopOutcome> {
    spec.validate()?;
    let (lo, hi) = window;
    if !(lo <= 0 && 0 <= hi) {
        return Err(Error::InvalidParameter(format!(
            "window [{lo}, {hi}] must contain the origin"
        )));
    }
    match spec.kind {
        StopKind::InverseUp { x, .. } if !(lo < x && x <= hi) => {
            return Err(Error::InvalidParameter(format!(
                "target {x} must lie in ({lo}, {hi}]"
            )))
        }
        StopKind::InverseDown { x, .. } if !(lo <= x && x < hi) => {
            return Err(Error::InvalidParameter(format!(
                "target {x} must lie in [{lo}, {hi})"
            )))
        }
        _ => {}
    }
    let mut walk = Walk::new(r_max);
    while walk.state.t < spec.cap {
        let Some(dir) = source.next_step() else { break };
        let pos = walk.state.pos;
        if (pos == hi && dir == 1) || (pos == lo && dir == -1) {
            walk.step(dir);
            walk.step(-dir);
            // the return step may be the stopping arrival at a boundary target
            if spec.fired(&walk.state, &walk.ledger, -dir) {
                let t = walk.state.t;
                return Ok(StopOutcome { walk, stop_time: Some(t), censored: false });
            }
            continue;
        }
        walk.step(dir);
        if spec.fired(&walk.state, &walk.ledger, dir) {
            let t = walk.state.t;
            return Ok(StopOutcome {
                walk,
                stop_time: Some(t),
                censored: false,
            });
        }
    }
    Ok(StopOutcome {
        walk,
        stop_time: None,
        censored: true,
    })
}

/// The three crossing identities tying `U`, `D`, `L` to the current position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CrossingIdentity {
    /// `U(x) - D(x-1) = [0 < x <= S] - [S < x <= 0]`
    UpDown,
    /// `D(x) - U(x+1) = [S <= x < 0] - [0 <= x < S]`
    DownUp,
    /// `L(x) = D(x) + D(x-1) + ... = U(x) + U(x+1) + ...`
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityViolation {
    pub identity: CrossingIdentity,
    pub site: i64,
}

#[inline]
fn ind(b: bool) -> i64 {
    b as i64
}

#[inline]
fn up_side(x: i64, pos: i64) -> i64 {
    ind(0 < x && x <= pos) - ind(pos < x && x <= 0)
}

#[inline]
fn down_side(x: i64, pos: i64) -> i64 {
    ind(pos <= x && x < 0) - ind(0 <= x && x < pos)
}

/// Whether `identity` holds at site `x`.
#[inline]
pub fn identity_holds(identity: CrossingIdentity, state: &WalkState, ledger: &CrossingLedger, x: i64) -> bool {
    let pos = state.pos;
    let (u, d) = (ledger.up(x) as i64, ledger.down(x) as i64);
    match identity {
        CrossingIdentity::UpDown => u - ledger.down(x - 1) as i64 == up_side(x, pos),
        CrossingIdentity::DownUp => d - ledger.up(x + 1) as i64 == down_side(x, pos),
        CrossingIdentity::Local => {
            let l = ledger.local(x) as i64;
            l == d + ledger.down(x - 1) as i64 + up_side(x, pos) && l == u + ledger.up(x + 1) as i64 + down_side(x, pos)
        }
    }
}

const IDENTITIES: [CrossingIdentity; 3] = [
    CrossingIdentity::UpDown,
    CrossingIdentity::DownUp,
    CrossingIdentity::Local,
];

/// Checks the three identities at one site.
#[inline]
pub fn check_identities_at(
    state: &WalkState,
    ledger: &CrossingLedger,
    x: i64,
) -> std::result::Result<(), IdentityViolation> {
    for identity in IDENTITIES {
        if !identity_holds(identity, state, ledger, x) {
            return Err(IdentityViolation { identity, site: x });
        }
    }
    Ok(())
}

/// Checks the crossing identities at every touched site, the current
/// position, the origin, and the sites just outside that range. Identities
/// are checked one at a time over the whole range, so the first violation
/// reported is the first failing identity at its leftmost failing site.
pub fn check_crossing_identities(
    state: &WalkState,
    ledger: &CrossingLedger,
) -> std::result::Result<(), IdentityViolation> {
    let (mut lo, mut hi) = ledger.touched_range().unwrap_or((0, 0));
    lo = lo.min(state.pos).min(0);
    hi = hi.max(state.pos).max(0);
    for identity in IDENTITIES {
        if let Some(site) = (lo - 1..=hi + 1).find(|&x| !identity_holds(identity, state, ledger, x)) {
            return Err(IdentityViolation { identity, site });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<i64>) -> Vec<i64> {
        v.sort_unstable();
        v
    }

    #[test]
    fn first_step_resets_to_singleton() {
        let mut w = Walk::new(DEFAULT_R_MAX);
        let case = w.step(1);
        assert_eq!(case, TrichotomyCase::Reset);
        assert_eq!(w.ledger.up(1), 1);
        assert_eq!(w.ledger.local(1), 1);
        assert_eq!(w.tracker.favourites(), &[1]);
    }

    #[test]
    fn two_step_path_appends() {
        let mut w = Walk::new(DEFAULT_R_MAX);
        w.step(1);
        let case = w.step(-1);
        assert_eq!(case, TrichotomyCase::Append);
        assert_eq!(w.ledger.local(0), 1);
        assert_eq!(w.ledger.local(1), 1);
        assert_eq!(sorted(w.tracker.favourites().to_vec()), vec![0, 1]);
        assert_eq!(f_counters_snapshot(&w.tracker)[1], 1);
    }

    #[test]
    fn three_step_path_resets() {
        let w = Walk::from_steps(&[1, -1], DEFAULT_R_MAX);
        let mut w = w;
        let case = w.step(1);
        assert_eq!(case, TrichotomyCase::Reset);
        assert_eq!(w.ledger.local(1), 2);
        assert_eq!(w.tracker.favourites(), &[1]);
    }

    #[test]
    fn every_two_step_path_has_two_favourites_including_position() {
        for steps in [[1i8, 1], [1, -1], [-1, 1], [-1, -1]] {
            let w = Walk::from_steps(&steps, DEFAULT_R_MAX);
            assert_eq!(w.tracker.count(), 2);
            assert!(w.tracker.contains(w.state.pos));
            assert!(f_counters_snapshot(&w.tracker)[1] >= 1);
        }
    }

    #[test]
    fn f_counters_after_one_step_and_at_start() {
        let w = Walk::new(DEFAULT_R_MAX);
        assert!(f_counters_snapshot(&w.tracker).iter().all(|&c| c == 0));
        let w = Walk::from_steps(&[1], DEFAULT_R_MAX);
        let f = f_counters_snapshot(&w.tracker);
        assert_eq!((f[0], f[1]), (1, 0));
    }

    #[test]
    fn inverse_up_first_hit_of_one() {
        let spec = StopSpec::inverse_up(1, 1);
        let out = run_to_stop(&spec, &mut ScriptedSteps::new(&[1, -1, -1]), 6).unwrap();
        assert_eq!(out.stop_time, Some(1));
        let out = run_to_stop(&spec, &mut ScriptedSteps::new(&[-1, 1, 1, 1]), 6).unwrap();
        assert_eq!(out.stop_time, Some(3));
        assert_eq!(out.walk.ledger.up(1), 1);
    }

    #[test]
    fn inverse_up_stops_exactly_at_kth_upcrossing() {
        // 0 1 0 1 2 1 0 1: upcrossings of 1 at t = 1, 3, 7
        let steps = [1, -1, 1, 1, -1, -1, 1, 1];
        let out = run_to_stop(&StopSpec::inverse_up(3, 1), &mut ScriptedSteps::new(&steps), 6).unwrap();
        assert_eq!(out.stop_time, Some(7));
        let out = run_to_stop(&StopSpec::inverse_down(1, 1), &mut ScriptedSteps::new(&steps), 6).unwrap();
        assert_eq!(out.stop_time, Some(5));
    }

    #[test]
    fn fixed_time_four_steps() {
        let out = run_to_stop(&StopSpec::fixed_time(4), &mut ScriptedSteps::new(&[1, 1, -1, -1]), 6).unwrap();
        let l = &out.walk.ledger;
        assert_eq!((l.local(0), l.local(1), l.local(2)), (1, 2, 1));
        assert_eq!(out.walk.tracker.favourites(), &[1]);
        assert_eq!(out.stop_time, Some(4));
    }

    #[test]
    fn censoring_is_reported_with_partial_state() {
        let spec = StopSpec::inverse_up(1, 5).with_cap(3);
        let out = run_to_stop(&spec, &mut ScriptedSteps::new(&[1, 1, -1, 1]), 6).unwrap();
        assert!(out.censored);
        assert_eq!(out.stop_time, None);
        assert_eq!(out.walk.state.t, 3);
        let out = run_to_stop(&StopSpec::inverse_up(1, 5), &mut ScriptedSteps::new(&[1]), 6).unwrap();
        assert!(out.censored);
    }

    #[test]
    fn invalid_stop_specs_are_rejected() {
        assert!(StopSpec::inverse_up(0, 1).validate().is_err());
        assert!(StopSpec::fixed_time(3).with_cap(0).validate().is_err());
    }

    #[test]
    fn identities_hold_on_small_paths() {
        let w = Walk::from_steps(&[1, 1, -1, -1], 6);
        assert_eq!(check_crossing_identities(&w.state, &w.ledger), Ok(()));
        let w = Walk::new(6);
        assert_eq!(check_crossing_identities(&w.state, &w.ledger), Ok(()));
    }

    #[test]
    fn injected_fault_is_located() {
        let mut w = Walk::from_steps(&[1], 6);
        w.ledger.set_raw(1, 2, 0);
        assert_eq!(
            check_crossing_identities(&w.state, &w.ledger),
            Err(IdentityViolation {
                identity: CrossingIdentity::UpDown,
                site: 1
            })
        );
    }

    #[test]
    fn incremental_favourites_match_recomputation() {
        let mut bits = BitStream::for_replica(11, 0);
        let mut w = Walk::new(6).with_case_log();
        for _ in 0..20_000 {
            w.step(bits.step());
            check_identities_at(&w.state, &w.ledger, w.state.pos).unwrap();
        }
        let (max, fav) = w.ledger.favourites_from_scratch();
        assert_eq!(max, w.tracker.max_local());
        assert_eq!(fav, sorted(w.tracker.favourites().to_vec()));
        assert_eq!(w.tracker.case_log().unwrap().len(), 20_000);
        let f = f_counters_snapshot(&w.tracker);
        assert!(f.windows(2).all(|p| p[1] <= p[0]));
        check_crossing_identities(&w.state, &w.ledger).unwrap();
    }

    #[test]
    fn collapsed_run_keeps_window_counts_consistent() {
        let spec = StopSpec::inverse_up(2, 2);
        let mut bits = BitStream::for_replica(5, 1);
        for _ in 0..200 {
            let out = run_to_stop_collapsed(&spec, (-2, 4), &mut bits, 6).unwrap();
            assert!(!out.censored);
            let w = &out.walk;
            assert_eq!(w.state.pos, 2);
            assert_eq!(w.ledger.up(2), 2);
            // nothing beyond one site outside the window is ever visited
            assert_eq!(w.ledger.local(-4), 0);
            assert_eq!(w.ledger.local(6), 0);
            check_crossing_identities(&w.state, &w.ledger).unwrap();
        }
        assert!(run_to_stop_collapsed(&spec, (-2, 1), &mut bits, 6).is_err());
    }
}
