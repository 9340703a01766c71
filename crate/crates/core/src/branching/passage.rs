//! Exact (floating-point) first-passage laws of the `Y` and `Z` chains.
//!
//! Before crossing level `h` a chain lives on the finite set `0..h`, so every
//! functional of the pre-crossing path is a finite linear system. With `Q` the
//! transition matrix restricted to the transient states and `G = (I - Q)^-1`
//! its Green function:
//!
//! ```text
//! P(cross from k)              = sum_l G(k,l) tail(l, h)
//! P(pre = l, crossing value v) = G(k,l) p(l, v)
//! E[T]                         = (G 1)(k),   E[T^2] = ((2G - I) G 1)(k)
//! ```
//!
//! The two-step-sum crossing uses the same construction with the transition
//! `a -> b` killed whenever `a + b (+1 for Z) >= h`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::chain::ChainKind;
use super::kernel::{tail_moments_f64, KernelTable};
use crate::error::{Error, Result};

/// Tolerance the solver is held to (row sums, residuals).
pub const DP_TOLERANCE: f64 = 1e-12;

fn invert(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(m);
    }
    m.lu()
        .try_inverse()
        .ok_or_else(|| Error::Solve(format!("singular {n}x{n} system")))
}

/// Truncation point for the explicit crossing-value law.
pub fn default_value_cap(h: u64) -> u64 {
    h + 200.max((10.0 * (h as f64).sqrt()).ceil() as u64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassageAtStart {
    pub start: u64,
    /// `P(Y hits 0 before level h)`; always 0 for `Z`.
    pub absorption: f64,
    pub crossing: f64,
    /// `pre_crossing[l] = P(cross, value just before crossing = l)`.
    pub pre_crossing: Vec<f64>,
    /// `crossing_value[v - h] = P(cross at value v)` for `h <= v < cap`.
    pub crossing_value: Vec<f64>,
    /// Crossing mass at values `>= cap`.
    pub overflow: f64,
    /// `E[T]`, `E[T^2]` for `T` the stopping time (crossing or absorption).
    pub mean_time: f64,
    pub second_moment_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PassageSolution {
    pub kind: ChainKind,
    pub level: u64,
    pub value_cap: u64,
    pub starts: Vec<PassageAtStart>,
    /// Green function over the transient states; row/column index is the state.
    pub green: Vec<Vec<f64>>,
    /// Largest `|row mass - 1|` over starts, with the overflow included.
    pub mass_defect: f64,
    /// Largest overflow mass; flagged when above [`DP_TOLERANCE`].
    pub truncation_bound: f64,
    pub truncation_flagged: bool,
}

impl PassageSolution {
    pub fn at(&self, start: u64) -> &PassageAtStart {
        &self.starts[start as usize]
    }

    /// `P(pre-crossing value = l, crossing value = v | start)`.
    pub fn joint(&self, start: u64, l: u64, v: u64) -> f64 {
        if v < self.level {
            return 0.0;
        }
        self.green[start as usize][l as usize] * self.kind.kernel().prob(l, v)
    }

    /// `P(crossing value >= u, crossing | start)`, with `u >= h`, using exact
    /// tails instead of the truncated value law.
    pub fn crossing_tail(&self, start: u64, u: u64) -> f64 {
        let kernel = self.kind.kernel();
        let u = u.max(self.level);
        (0..self.level)
            .map(|l| self.green[start as usize][l as usize] * tail_moments_f64(kernel, l, u).mass)
            .sum()
    }

    /// `E[(crossing value)^power ; crossing | start]` for `power` in 0..=2.
    pub fn crossing_moment(&self, start: u64, power: u32) -> f64 {
        let kernel = self.kind.kernel();
        (0..self.level)
            .map(|l| {
                let t = tail_moments_f64(kernel, l, self.level);
                let m = match power {
                    0 => t.mass,
                    1 => t.first,
                    2 => t.second,
                    _ => panic!("moment of order {power} not supported"),
                };
                self.green[start as usize][l as usize] * m
            })
            .sum()
    }
}

/// First passage of `kind` above level `h` from every start `0 <= k < h`.
pub fn first_passage_dp(kind: ChainKind, h: u64, value_cap: Option<u64>) -> Result<PassageSolution> {
    if h == 0 {
        return Err(Error::InvalidParameter("level must be positive".into()));
    }
    if h > 4000 {
        return Err(Error::Domain(format!("level {h} (dense solver limited to 4000)")));
    }
    let cap = value_cap.unwrap_or_else(|| default_value_cap(h)).max(h);
    let kernel = kind.kernel();
    let n = h as usize;
    let table = KernelTable::new(kernel, n, cap as usize);
    // transient states: 1..h for Y (0 absorbs), 0..h for Z
    let first = match kind {
        ChainKind::Y => 1,
        ChainKind::Z => 0,
    };
    let m = n - first;
    let mut a = DMatrix::<f64>::identity(m, m);
    for r in 0..m {
        for c in 0..m {
            a[(r, c)] -= table.get(r + first, c + first);
        }
    }
    let g_small = invert(a)?;
    let mut green = vec![vec![0.0; n]; n];
    for r in 0..m {
        for c in 0..m {
            green[r + first][c + first] = g_small[(r, c)];
        }
    }
    let tails: Vec<f64> = (0..n as u64).map(|l| tail_moments_f64(kernel, l, h).mass).collect();
    // expected time and second moment, over transient states
    let ones = nalgebra::DVector::<f64>::from_element(m, 1.0);
    let t1 = &g_small * &ones;
    let t2 = (&g_small * &t1) * 2.0 - &t1;

    let mut starts = Vec::with_capacity(n);
    let mut mass_defect: f64 = 0.0;
    let mut truncation: f64 = 0.0;
    for k in 0..n {
        if k < first {
            // Y started at 0
            starts.push(PassageAtStart {
                start: k as u64,
                absorption: 1.0,
                crossing: 0.0,
                pre_crossing: vec![0.0; n],
                crossing_value: vec![0.0; (cap - h) as usize],
                overflow: 0.0,
                mean_time: 0.0,
                second_moment_time: 0.0,
            });
            continue;
        }
        let row = &green[k];
        let pre: Vec<f64> = (0..n).map(|l| row[l] * tails[l]).collect();
        let crossing: f64 = pre.iter().sum();
        let absorption = if first == 1 {
            (1..n).map(|l| row[l] * table.get(l, 0)).sum()
        } else {
            0.0
        };
        let values: Vec<f64> = (h..cap)
            .map(|v| (first..n).map(|l| row[l] * table.get(l, v as usize)).sum())
            .collect();
        let explicit: f64 = values.iter().sum();
        let overflow = (crossing - explicit).max(0.0);
        mass_defect = mass_defect.max((absorption + crossing - 1.0).abs());
        truncation = truncation.max(overflow);
        starts.push(PassageAtStart {
            start: k as u64,
            absorption,
            crossing,
            pre_crossing: pre,
            crossing_value: values,
            overflow,
            mean_time: t1[k - first],
            second_moment_time: t2[k - first],
        });
    }
    Ok(PassageSolution {
        kind,
        level: h,
        value_cap: cap,
        starts,
        green,
        mass_defect,
        truncation_bound: truncation,
        truncation_flagged: truncation > DP_TOLERANCE,
    })
}

/// First crossing of the two-step sum `X_t + X_{t-1} (+1)` above `h`, `t >= 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TildePassage {
    pub kind: ChainKind,
    pub level: u64,
    /// `rows[k][l]`: expected visits to `l` at times `t` before the first
    /// crossing (time 0 included), started from `k`, for `0 <= k <= h`.
    pub rows: Vec<Vec<f64>>,
}

impl TildePassage {
    pub fn new(kind: ChainKind, h: u64) -> Result<Self> {
        if h == 0 {
            return Err(Error::InvalidParameter("level must be positive".into()));
        }
        if h > 4000 {
            return Err(Error::Domain(format!("level {h} (dense solver limited to 4000)")));
        }
        let c = kind.tilde_offset();
        let kernel = kind.kernel();
        let n = h as usize;
        let table = KernelTable::new(kernel, n + 1, n + 1);
        let allowed = |a: usize, b: usize| (a + b) as u64 + c < h;
        let first = match kind {
            ChainKind::Y => 1,
            ChainKind::Z => 0,
        };
        // surviving states after one step lie in 0..h; transient ones from `first`
        let m = n - first;
        let mut a = DMatrix::<f64>::identity(m, m);
        for r in 0..m {
            for col in 0..m {
                if allowed(r + first, col + first) {
                    a[(r, col)] -= table.get(r + first, col + first);
                }
            }
        }
        let g = invert(a)?;
        let mut rows = vec![vec![0.0; n + 1]; n + 1];
        for (k, row) in rows.iter_mut().enumerate() {
            row[k] += 1.0;
            if k < first {
                continue;
            }
            // first-step decomposition works for every start, transient or not
            for b in first..n {
                if !allowed(k, b) {
                    continue;
                }
                let p = table.get(k, b);
                if p == 0.0 {
                    continue;
                }
                for l in first..n {
                    row[l] += p * g[(b - first, l - first)];
                }
            }
        }
        Ok(Self { kind, level: h, rows })
    }

    fn p(&self, a: u64, b: u64) -> f64 {
        self.kind.kernel().prob(a, b)
    }

    fn killed(&self, a: u64, b: u64) -> bool {
        a + b + self.kind.tilde_offset() >= self.level
    }

    /// `P(no crossing ever | X_0 = k)`; only a `Y` chain can avoid crossing,
    /// by dying first.
    pub fn no_crossing(&self, k: u64) -> f64 {
        if self.kind == ChainKind::Z {
            return 0.0;
        }
        if k == 0 {
            return 1.0;
        }
        let row = &self.rows[k as usize];
        (1..=self.level)
            .filter(|&l| !self.killed(l, 0))
            .map(|l| row[l as usize] * self.p(l, 0))
            .sum()
    }

    /// `P(first crossing happens from pre = a to value = b | X_0 = k)`.
    pub fn crossing_joint(&self, k: u64, a: u64, b: u64) -> f64 {
        if !self.killed(a, b) || a > self.level {
            return 0.0;
        }
        self.rows[k as usize][a as usize] * self.p(a, b)
    }

    /// `P(first crossing lands exactly on h with value b | X_0 = k)`.
    pub fn exact_hit(&self, k: u64, b: u64) -> f64 {
        let c = self.kind.tilde_offset();
        if b + c > self.level {
            return 0.0;
        }
        let a = self.level - c - b;
        self.rows[k as usize][a as usize] * self.p(a, b)
    }

    /// `P(first crossing is an exact hit | X_0 = k)`.
    pub fn exact_hit_total(&self, k: u64) -> f64 {
        (0..=self.level).map(|b| self.exact_hit(k, b)).sum()
    }

    /// Expected first crossing time; infinite-horizon `Y` runs count their
    /// steps until death.
    pub fn mean_time(&self, k: u64) -> f64 {
        let first = match self.kind {
            ChainKind::Y => 1,
            ChainKind::Z => 0,
        };
        self.rows[k as usize][first..].iter().sum()
    }

    /// `P(p consecutive exact hits, then no crossing | Y_0 = k)` for
    /// `k <= h`, by the recursion over the value at each exact hit.
    pub fn repeated_exact_hits_then_survive(&self, p: usize) -> Vec<f64> {
        let h = self.level as usize;
        let mut cur: Vec<f64> = (0..=h as u64).map(|k| self.no_crossing(k)).collect();
        for _ in 0..p {
            cur = (0..=h as u64)
                .map(|k| (0..=h as u64).map(|b| self.exact_hit(k, b) * cur[b as usize]).sum())
                .collect();
        }
        cur
    }

    /// `E[number of t in [tilde_p, tilde_{p+1}) ; first p crossings exact | Z_0 = k]`.
    pub fn repeated_exact_hits_then_time(&self, p: usize) -> Vec<f64> {
        let h = self.level as usize;
        let mut cur: Vec<f64> = (0..=h as u64).map(|k| self.mean_time(k)).collect();
        for _ in 0..p {
            cur = (0..=h as u64)
                .map(|k| (0..=h as u64).map(|b| self.exact_hit(k, b) * cur[b as usize]).sum())
                .collect();
        }
        cur
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::kernel::tail_f64;

    #[test]
    fn y_level_two_from_one() {
        let s = first_passage_dp(ChainKind::Y, 2, None).unwrap();
        assert!((s.at(1).crossing - 1.0 / 3.0).abs() < 1e-12);
        assert!((s.at(1).absorption - 2.0 / 3.0).abs() < 1e-12);
        assert!(!s.truncation_flagged);
    }

    #[test]
    fn z_level_one_from_zero() {
        let s = first_passage_dp(ChainKind::Z, 1, None).unwrap();
        assert!((s.at(0).crossing - 1.0).abs() < 1e-12);
        assert!((s.at(0).mean_time - 2.0).abs() < 1e-12);
        // geometric number of trials with success 1/2: E T^2 = 6
        assert!((s.at(0).second_moment_time - 6.0).abs() < 1e-12);
    }

    #[test]
    fn y_crossing_is_optional_stopping() {
        // Y is a martingale: E[Y_T] = k
        let h = 12;
        let s = first_passage_dp(ChainKind::Y, h, None).unwrap();
        for k in 1..h {
            assert!((s.crossing_moment(k, 1) - k as f64).abs() < 1e-10, "{k}");
        }
        assert!(s.mass_defect < 1e-12);
    }

    #[test]
    fn explicit_values_agree_with_tails() {
        let s = first_passage_dp(ChainKind::Z, 8, None).unwrap();
        let a = s.at(3);
        let explicit: f64 = a.crossing_value[4..].iter().sum::<f64>() + a.overflow;
        assert!((explicit - s.crossing_tail(3, 12)).abs() < 1e-12);
        let joint: f64 = (0..8).flat_map(|l| (8..s.value_cap).map(move |v| (l, v))).map(|(l, v)| s.joint(3, l, v)).sum();
        assert!((joint + a.overflow - a.crossing).abs() < 1e-12);
    }

    #[test]
    fn z_level_one_tilde_crosses_at_once() {
        // Z_1 + Z_0 + 1 >= 1 always
        let t = TildePassage::new(ChainKind::Z, 1).unwrap();
        assert!((t.mean_time(0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn y_tilde_no_crossing_small_case() {
        // h = 1: Y_0 = k > 0 crosses at t = 1 for sure
        let t = TildePassage::new(ChainKind::Y, 1).unwrap();
        assert_eq!(t.no_crossing(0), 1.0);
        assert!(t.no_crossing(1).abs() < 1e-15);
        // h = 2, Y_0 = 1: survive iff Y_1 = 0
        let t = TildePassage::new(ChainKind::Y, 2).unwrap();
        assert!((t.no_crossing(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn tilde_laws_sum_to_one() {
        for kind in [ChainKind::Y, ChainKind::Z] {
            let h = 9;
            let t = TildePassage::new(kind, h).unwrap();
            for k in 0..=h {
                let mut total = t.no_crossing(k);
                for a in 0..=h {
                    let from = h.saturating_sub(a + kind.tilde_offset());
                    total += tail_f64(kind.kernel(), a, from) * t.rows[k as usize][a as usize];
                }
                assert!((total - 1.0).abs() < 1e-12, "{kind:?} {k} {total}");
            }
        }
    }
}
