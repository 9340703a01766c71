//! Shape of the bounds on repeated exact hits of the two-step sums:
//! `A_{h,p}` for `Y` (exactly `p` hits of `h`, never above) and
//! `sum_x B_{x,h,p}` for `Z` (time spent after exactly `p` hits).

use serde::{Deserialize, Serialize};

use super::{loglog_slope, SE_AGREEMENT};
use crate::branching::chain::{run_chain_to_stop, ChainKind, ChainState, StopVariant};
use crate::branching::passage::TildePassage;
use crate::error::{Error, Result};
use crate::exact::BandExponent;
use crate::params;
use crate::parallel::{run_replicas, split_budget, DEFAULT_BATCH};
use crate::report::{AuditKind, AuditPoint, AuditReport, Method};
use crate::rng::{replica_rng, stream_seed, BitStream};
use crate::stats::{mean_se, proportion_se};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Prop1Config {
    pub hs: Vec<u64>,
    pub eps: f64,
    pub p_max: usize,
    /// Level and start of the Monte Carlo cross-checks.
    pub mc_h: u64,
    pub mc_k: u64,
    pub samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub step_cap: u64,
    /// Accepted range of the fitted `h`-exponent of `P(A_{h,0})` in band.
    pub a_exponent: (f64, f64),
    /// Accepted range of the fitted `h`-exponent of `E tilde tau_h` in band.
    pub b_exponent: (f64, f64),
}

impl Default for Prop1Config {
    fn default() -> Self {
        Self {
            hs: vec![16, 32, 64],
            eps: 0.25,
            p_max: 3,
            mc_h: 16,
            mc_k: 8,
            samples: 100_000,
            seed: 1,
            workers: 1,
            step_cap: 1_000_000,
            a_exponent: (-0.75, -0.25),
            b_exponent: (0.25, 0.75),
        }
    }
}

impl Prop1Config {
    pub fn validate(&self) -> Result<()> {
        if self.hs.len() < 2 || self.hs.iter().any(|&h| h < 2) {
            return Err(Error::InvalidParameter("need at least two levels h >= 2".into()));
        }
        if self.workers == 0 || self.samples < 2 || self.step_cap == 0 {
            return Err(Error::InvalidParameter("workers, samples and step_cap must be positive".into()));
        }
        if self.mc_k > self.mc_h {
            return Err(Error::InvalidParameter("Monte Carlo start must be at most the level".into()));
        }
        BandExponent::from_eps(self.eps)?;
        Ok(())
    }
}

/// `P(A_{h,p} | Y_0 = k)` and `sum_x P(B_{x,h,p} | Z_0 = k)` for `k <= h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedHits {
    pub h: u64,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

pub fn repeated_hits(h: u64, p_max: usize) -> Result<RepeatedHits> {
    let y = TildePassage::new(ChainKind::Y, h)?;
    let z = TildePassage::new(ChainKind::Z, h)?;
    Ok(RepeatedHits {
        h,
        a: (0..=p_max).map(|p| y.repeated_exact_hits_then_survive(p)).collect(),
        b: (0..=p_max).map(|p| z.repeated_exact_hits_then_time(p)).collect(),
    })
}

fn band_mean(values: &[f64], band: &[u64]) -> f64 {
    band.iter().map(|&k| values[k as usize]).sum::<f64>() / band.len() as f64
}

/// One Monte Carlo estimate of a `p`-hit quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
struct McEstimate {
    mean: f64,
    se: f64,
    censored: u64,
}

fn mc_estimate(cfg: &Prop1Config, kind: ChainKind, p: usize, stream: u64) -> Result<(McEstimate, u64, u64)> {
    let (h, k) = (cfg.mc_h, cfg.mc_k);
    let (replicas, size) = split_budget(cfg.samples, DEFAULT_BATCH);
    let seed = stream_seed(cfg.seed, stream);
    let parts = run_replicas(replicas, cfg.workers, |r| -> Result<(u64, u64, u64)> {
        let mut bits = BitStream::new(replica_rng(seed, r));
        let (mut sum, mut sum_sq, mut censored) = (0u64, 0u64, 0u64);
        for _ in 0..size(r) {
            let start = ChainState::new(kind, k);
            let rec = run_chain_to_stop(start, h, StopVariant::Tilde { crossings: p + 1 }, &mut bits, cfg.step_cap)?;
            if rec.censored {
                censored += 1;
                continue;
            }
            let exact_prefix = rec.tilde.iter().take(p).all(|c| c.tilde == h);
            let x = match kind {
                // exactly p crossings, all exact
                ChainKind::Y => (exact_prefix && rec.tilde.len() == p) as u64,
                // time between the p-th and the (p+1)-th crossing
                ChainKind::Z => {
                    if exact_prefix && rec.tilde.len() == p + 1 {
                        let from = if p == 0 { 0 } else { rec.tilde[p - 1].t };
                        rec.tilde[p].t - from
                    } else {
                        0
                    }
                }
            };
            sum += x;
            sum_sq += x * x;
        }
        Ok((sum, sum_sq, censored))
    })?;
    let (mut sum, mut sum_sq, mut censored) = (0u64, 0u64, 0u64);
    for part in parts {
        let (a, b, c) = part?;
        sum += a;
        sum_sq += b;
        censored += c;
    }
    let n = cfg.samples - censored;
    let (mean, se) = match kind {
        ChainKind::Y => proportion_se(sum, n),
        ChainKind::Z => mean_se(n, sum as f64, sum_sq as f64),
    };
    Ok((McEstimate { mean, se, censored }, sum, sum_sq))
}

pub fn proposition1_audit(cfg: &Prop1Config) -> Result<AuditReport> {
    cfg.validate()?;
    let band_exp = BandExponent::from_eps(cfg.eps)?;
    let mut report = AuditReport::new("proposition-1", Method::ExactDp, AuditKind::Diagnostic).with_params(params![
        hs = cfg.hs.clone(),
        eps = cfg.eps,
        p_max = cfg.p_max,
        band = "k in [(h - h^(1/2+eps))/2, (h + h^(1/2+eps))/2]",
        a_exponent = [cfg.a_exponent.0, cfg.a_exponent.1],
        b_exponent = [cfg.b_exponent.0, cfg.b_exponent.1],
        samples = cfg.samples,
        seed = cfg.seed
    ]);
    let mut a0 = Vec::new();
    let mut b0 = Vec::new();
    let mut hits_at_mc = None;
    for &h in &cfg.hs {
        let rh = repeated_hits(h, cfg.p_max)?;
        let band = band_exp.band(h, h);
        let a: Vec<f64> = rh.a.iter().map(|v| band_mean(v, &band)).collect();
        let b: Vec<f64> = rh.b.iter().map(|v| band_mean(v, &band)).collect();
        for p in 0..=cfg.p_max {
            report.fit(format!("h={h}/A/p={p}"), a[p]);
            report.fit(format!("h={h}/B/p={p}"), b[p]);
        }
        for (name, v) in [("band mean P(A_{h,p})", &a), ("band mean sum_x P(B_{x,h,p})", &b)] {
            let decays = v.windows(2).all(|w| w[1] < w[0]);
            let worst = v.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
            report.push(AuditPoint::new(
                params![h = h, quantity = name, check = "decreasing in p"],
                worst,
                Some(1.0 - worst),
                decays,
            ));
        }
        // the bound (4.18) without restriction on k: sum_x B <= C h
        let c418 = rh.b.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, &x| m.max(x)) / h as f64;
        report.fit(format!("h={h}/sup sum_x B / h"), c418);
        a0.push(a[0]);
        b0.push(b[0]);
        // the k >= h remark, at k = h
        report.fit(format!("h={h}/A/p=1/k=h"), rh.a[1.min(cfg.p_max)][h as usize]);
        report.fit(format!("h={h}/B/p=0/k=h"), rh.b[0][h as usize]);
        if h == cfg.mc_h {
            hits_at_mc = Some(rh);
        }
    }
    let hf: Vec<f64> = cfg.hs.iter().map(|&h| h as f64).collect();
    let sa = loglog_slope(&hf, &a0);
    let sb = loglog_slope(&hf, &b0);
    report.fit("exponent/A/p=0", sa);
    report.fit("exponent/B/p=0", sb);
    report.fit("exponent/B over h/p=0", sb - 1.0);
    report.push(AuditPoint::new(
        params![quantity = "band mean P(A_{h,0})", check = "fitted h-exponent", range = [cfg.a_exponent.0, cfg.a_exponent.1]],
        sa,
        None,
        sa >= cfg.a_exponent.0 && sa <= cfg.a_exponent.1,
    ));
    report.push(AuditPoint::new(
        params![quantity = "band mean E(tilde tau_h)", check = "fitted h-exponent", range = [cfg.b_exponent.0, cfg.b_exponent.1]],
        sb,
        None,
        sb >= cfg.b_exponent.0 && sb <= cfg.b_exponent.1,
    ));
    let rh = match hits_at_mc {
        Some(rh) => rh,
        None => repeated_hits(cfg.mc_h, cfg.p_max.max(1))?,
    };
    report.samples = Some(cfg.samples);
    let mut censored_total = 0;
    for (stream, kind, p) in [(60, ChainKind::Y, 0usize), (61, ChainKind::Y, 1), (62, ChainKind::Z, 0), (63, ChainKind::Z, 1)] {
        let (est, sum, sum_sq) = mc_estimate(cfg, kind, p, stream)?;
        let exact = match kind {
            ChainKind::Y => rh.a[p][cfg.mc_k as usize],
            ChainKind::Z => rh.b[p][cfg.mc_k as usize],
        };
        let tag = format!("{kind:?}/p={p}");
        report.count(format!("mc/{tag}/sum"), sum);
        report.count(format!("mc/{tag}/sum_sq"), sum_sq);
        report.count(format!("mc/{tag}/censored"), est.censored);
        censored_total += est.censored;
        let z = if est.se > 0.0 { (est.mean - exact) / est.se } else { 0.0 };
        report.push(AuditPoint::new(
            params![check = "Monte Carlo against the recursion", chain = format!("{kind:?}"), p = p, h = cfg.mc_h, k = cfg.mc_k, exact = exact, se = est.se],
            est.mean,
            Some(z),
            z.abs() <= SE_AGREEMENT,
        ));
    }
    report.censored_mass = Some(censored_total as f64 / (4 * cfg.samples) as f64);
    report.note("at k = h the exact-hit events do not vanish: one step to 0 from Y_0 = h is a single exact hit, and E tilde tau_h = 1 for every Z_0 >= h");
    if censored_total > 0 {
        return Ok(report.inconclusive(format!("{censored_total} runs hit the step cap")).finish());
    }
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remark_fails_at_k_equal_h() {
        let rh = repeated_hits(6, 1).unwrap();
        assert!((rh.a[1][6] - 2f64.powi(-6)).abs() < 1e-15);
        assert!((rh.b[0][6] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn p_zero_matches_lemma_quantities() {
        let rh = repeated_hits(8, 0).unwrap();
        let y = TildePassage::new(ChainKind::Y, 8).unwrap();
        for k in 0..=8 {
            assert_eq!(rh.a[0][k as usize], y.no_crossing(k));
        }
    }

    #[test]
    fn small_audit_runs() {
        let cfg = Prop1Config {
            hs: vec![8, 16],
            samples: 4_000,
            ..Prop1Config::default()
        };
        let r = proposition1_audit(&cfg).unwrap();
        let mc: Vec<_> = r.points.iter().filter(|p| p.params["check"] == "Monte Carlo against the recursion").collect();
        assert_eq!(mc.len(), 4);
        assert!(mc.iter().all(|p| p.pass), "{mc:?}");
    }
}
