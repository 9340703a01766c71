//! Long-run table of `f(3)` and `f(4)` events by dyadic time window.

use serde::{Deserialize, Serialize};

use super::SE_AGREEMENT;
use crate::error::{Error, Result};
use crate::params;
use crate::parallel::run_replicas;
use crate::report::{AuditKind, AuditPoint, AuditReport, Method};
use crate::rng::{stream_seed, BitStream};
use crate::walk::{f_counters_snapshot, TrichotomyCase, Walk};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct F4Config {
    pub replicas: u64,
    pub steps: u64,
    pub seed: u64,
    pub workers: usize,
    /// First window of the trend check.
    pub j_min: u32,
}

impl Default for F4Config {
    fn default() -> Self {
        Self {
            replicas: 100,
            steps: 10_000_000,
            seed: 1,
            workers: 1,
            j_min: 20,
        }
    }
}

impl F4Config {
    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 || self.workers == 0 || self.steps < 2 {
            return Err(Error::InvalidParameter("replicas, workers >= 1 and steps >= 2 required".into()));
        }
        Ok(())
    }
}

/// Times `t` in `[2^j, 2^(j+1))`, cut at the run length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F4Window {
    pub j: u32,
    pub start: u64,
    pub end: u64,
    pub complete: bool,
    pub f3_events: u64,
    pub f4_events: u64,
    pub replicas_with_f4: u64,
    pub f4_fraction: f64,
    pub f4_fraction_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F4Table {
    pub config: F4Config,
    pub windows: Vec<F4Window>,
    /// `f(1..=6)` summed over replicas at the end of the run.
    pub f_totals: Vec<u64>,
    /// Smallest per-replica `f(2)`.
    pub min_f2: u64,
}

struct Replica {
    f3: Vec<u64>,
    f4: Vec<u64>,
    f: Vec<u64>,
}

fn window_of(t: u64) -> usize {
    63 - t.leading_zeros() as usize
}

fn run_replica(cfg: &F4Config, r: u64) -> Replica {
    let n = window_of(cfg.steps) + 1;
    let (mut f3, mut f4) = (vec![0u64; n], vec![0u64; n]);
    let mut bits = BitStream::for_replica(stream_seed(cfg.seed, 70), r);
    let mut walk = Walk::new(6);
    for t in 1..=cfg.steps {
        if walk.step(bits.step()) != TrichotomyCase::Unchanged {
            match walk.tracker.count() {
                3 => f3[window_of(t)] += 1,
                4 => f4[window_of(t)] += 1,
                _ => {}
            }
        }
    }
    Replica {
        f3,
        f4,
        f: f_counters_snapshot(&walk.tracker),
    }
}

pub fn f4_longrun_report(cfg: &F4Config) -> Result<F4Table> {
    cfg.validate()?;
    let replicas = run_replicas(cfg.replicas, cfg.workers, |r| run_replica(cfg, r))?;
    let n = window_of(cfg.steps) + 1;
    let mut windows = Vec::with_capacity(n);
    for j in 0..n {
        let start = 1u64 << j;
        let end = (start << 1).min(cfg.steps + 1);
        let f3_events = replicas.iter().map(|x| x.f3[j]).sum();
        let f4_events = replicas.iter().map(|x| x.f4[j]).sum();
        let with = replicas.iter().filter(|x| x.f4[j] > 0).count() as u64;
        let frac = with as f64 / cfg.replicas as f64;
        windows.push(F4Window {
            j: j as u32,
            start,
            end,
            complete: end == start << 1,
            f3_events,
            f4_events,
            replicas_with_f4: with,
            f4_fraction: frac,
            f4_fraction_se: (frac * (1.0 - frac) / cfg.replicas as f64).sqrt(),
        });
    }
    let mut f_totals = vec![0u64; 6];
    for x in &replicas {
        for (a, b) in f_totals.iter_mut().zip(&x.f) {
            *a += b;
        }
    }
    let min_f2 = replicas.iter().map(|x| x.f[1]).min().unwrap_or(0);
    Ok(F4Table {
        config: *cfg,
        windows,
        f_totals,
        min_f2,
    })
}

/// Agresti-Coull standard error of a binomial fraction; positive even when
/// no replica (or every replica) has an event.
pub fn adjusted_se(hits: u64, n: u64) -> f64 {
    let nt = n as f64 + 4.0;
    let p = (hits as f64 + 2.0) / nt;
    (p * (1.0 - p) / nt).sqrt()
}

impl F4Table {
    /// Non-increasing `f(4)` fraction over complete windows from `j_min` on,
    /// up to binomial noise.
    pub fn trend_points(&self) -> Vec<AuditPoint> {
        let w: Vec<&F4Window> = self.windows.iter().filter(|w| w.complete && w.j >= self.config.j_min).collect();
        w.windows(2)
            .map(|p| {
                let n = self.config.replicas;
                let band = SE_AGREEMENT * (adjusted_se(p[0].replicas_with_f4, n).powi(2) + adjusted_se(p[1].replicas_with_f4, n).powi(2)).sqrt();
                let slack = p[0].f4_fraction + band - p[1].f4_fraction;
                AuditPoint::new(
                    params![j = p[0].j, next = p[1].j, band = band],
                    p[1].f4_fraction - p[0].f4_fraction,
                    Some(slack),
                    slack >= 0.0,
                )
            })
            .collect()
    }

    pub fn to_report(&self) -> AuditReport {
        let c = &self.config;
        let mut report = AuditReport::new("f4-longrun", Method::MonteCarlo, AuditKind::Diagnostic).with_params(params![
            replicas = c.replicas,
            steps = c.steps,
            seed = c.seed,
            j_min = c.j_min
        ]);
        report.samples = Some(c.replicas);
        for w in &self.windows {
            report.count(format!("window/{:02}/f3", w.j), w.f3_events);
            report.count(format!("window/{:02}/f4", w.j), w.f4_events);
            report.count(format!("window/{:02}/replicas_with_f4", w.j), w.replicas_with_f4);
        }
        for (r, v) in self.f_totals.iter().enumerate() {
            report.count(format!("f/{}", r + 1), *v);
        }
        report.push(AuditPoint::new(params![check = "every replica has f(2) >= 1"], self.min_f2 as f64, None, self.min_f2 >= 1));
        for p in self.trend_points() {
            report.push(p);
        }
        if !self.windows.iter().any(|w| w.complete && w.j > c.j_min) {
            report.note(format!("no two complete windows at or beyond j = {}; trend not assessed", c.j_min));
        }
        report.finish()
    }

    pub const CSV_HEADER: [&'static str; 9] = [
        "j",
        "start",
        "end",
        "complete",
        "f3_events",
        "f4_events",
        "replicas_with_f4",
        "f4_fraction",
        "f4_fraction_se",
    ];

    pub fn csv_rows(&self) -> Vec<[String; 9]> {
        self.windows
            .iter()
            .map(|w| {
                [
                    w.j.to_string(),
                    w.start.to_string(),
                    w.end.to_string(),
                    w.complete.to_string(),
                    w.f3_events.to_string(),
                    w.f4_events.to_string(),
                    w.replicas_with_f4.to_string(),
                    w.f4_fraction.to_string(),
                    w.f4_fraction_se.to_string(),
                ]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_cover_the_run() {
        let cfg = F4Config {
            replicas: 3,
            steps: 1000,
            j_min: 5,
            ..F4Config::default()
        };
        let t = f4_longrun_report(&cfg).unwrap();
        assert_eq!(t.windows.len(), 10);
        assert_eq!(t.windows.last().unwrap().end, 1001);
        assert!(!t.windows.last().unwrap().complete);
        assert!(t.min_f2 >= 1);
        // window counts add up to the final counters
        let f3: u64 = t.windows.iter().map(|w| w.f3_events).sum();
        let f4: u64 = t.windows.iter().map(|w| w.f4_events).sum();
        assert_eq!(f3, t.f_totals[2]);
        assert_eq!(f4, t.f_totals[3]);
    }

    #[test]
    fn worker_count_does_not_change_counts() {
        let one = F4Config {
            replicas: 8,
            steps: 5000,
            ..F4Config::default()
        };
        let four = F4Config { workers: 4, ..one };
        let a = f4_longrun_report(&one).unwrap().to_report();
        let b = f4_longrun_report(&four).unwrap().to_report();
        assert_eq!(a.counts, b.counts);
    }
}
