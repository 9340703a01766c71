//! Executing an experiment.

use std::collections::BTreeSet;
use std::time::Instant;

use favsites::report::{overall_status, AuditKind, AuditReport, Status};
use favsites::verify::f4::F4Table;
use favsites::verify::suite::{first_passage_audit, identity_suite, kernel_audit, oracle_equivalence, ray_knight_audit};
use favsites::verify::{bound_audit, f4_longrun_report, martingale_audit, proposition1_audit};
use serde::{Deserialize, Serialize};

use crate::config::{AuditSpec, ExperimentConfig};
use crate::error::{exit, CliError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: AuditKind,
    pub status: Status,
    pub failed_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub version: String,
    pub wall_time_seconds: f64,
    /// Worst status over hard audits.
    pub status: Status,
    pub exit_code: i32,
    pub audits: Vec<ManifestEntry>,
    #[serde(default)]
    pub files: Vec<String>,
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Pass => exit::PASS,
        Status::Fail => exit::FAIL,
        Status::Inconclusive => exit::INCONCLUSIVE,
    }
}

/// Everything one audit produced.
pub struct AuditOutput {
    pub reports: Vec<AuditReport>,
    pub f4_table: Option<F4Table>,
}

pub fn run_audit(spec: &AuditSpec) -> Result<AuditOutput, CliError> {
    let one = |r: AuditReport| AuditOutput {
        reports: vec![r],
        f4_table: None,
    };
    Ok(match spec {
        AuditSpec::IdentitySuite(c) => one(identity_suite(c)?),
        AuditSpec::Kernels(c) => one(kernel_audit(c)?),
        AuditSpec::OracleEquivalence(c) => one(oracle_equivalence(c)?),
        AuditSpec::RayKnight(c) => AuditOutput {
            reports: ray_knight_audit(c)?,
            f4_table: None,
        },
        AuditSpec::FirstPassage(c) => one(first_passage_audit(c)?),
        AuditSpec::Lemma { lemma, params } => one(bound_audit(*lemma, params)?),
        AuditSpec::Martingale { kind, params } => one(martingale_audit(*kind, params)?),
        AuditSpec::Proposition1(c) => one(proposition1_audit(c)?),
        AuditSpec::F4Longrun(c) => {
            let table = f4_longrun_report(c)?;
            AuditOutput {
                reports: vec![table.to_report()],
                f4_table: Some(table),
            }
        }
    })
}

/// The outcome of [`run_experiment`].
pub struct RunResult {
    pub manifest: RunManifest,
    pub reports: Vec<AuditReport>,
    pub f4_tables: Vec<F4Table>,
}

/// Validates, applies the run-wide overrides, and runs every audit in order.
/// `progress` sees each finished report.
pub fn run_experiment(cfg: &ExperimentConfig, mut progress: impl FnMut(&AuditReport, f64)) -> Result<RunResult, CliError> {
    let mut cfg = cfg.clone();
    cfg.validate()?;
    cfg.apply_overrides();
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut f4_tables = Vec::new();
    for spec in &cfg.audits {
        let t0 = Instant::now();
        let out = run_audit(spec)?;
        for r in &out.reports {
            progress(r, t0.elapsed().as_secs_f64());
        }
        reports.extend(out.reports);
        f4_tables.extend(out.f4_table);
    }
    let mut seen = BTreeSet::new();
    for r in &reports {
        if !seen.insert(r.id.as_str()) {
            return Err(CliError::Config(format!("two audits produced the report id {}", r.id)));
        }
    }
    let status = overall_status(&reports);
    let manifest = RunManifest {
        experiment: cfg.experiment.clone(),
        config_hash: cfg.hash(),
        version: VERSION.to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        status,
        exit_code: exit_code(status),
        audits: reports
            .iter()
            .map(|r| ManifestEntry {
                id: r.id.clone(),
                kind: r.kind,
                status: r.status,
                failed_points: r.failed_points(),
            })
            .collect(),
        files: Vec::new(),
    };
    Ok(RunResult {
        manifest,
        reports,
        f4_tables,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use favsites::verify::suite::IdentitySuiteConfig;

    fn smoke(workers: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            "smoke",
            vec![AuditSpec::IdentitySuite(IdentitySuiteConfig {
                paths: 100,
                steps: 200,
                ..IdentitySuiteConfig::default()
            })],
        );
        cfg.workers = Some(workers);
        cfg
    }

    #[test]
    fn smoke_run_lists_one_audit() {
        let res = run_experiment(&smoke(1), |_, _| {}).unwrap();
        assert_eq!(res.manifest.audits.len(), 1);
        assert_eq!(res.manifest.exit_code, exit::PASS);
        assert_eq!(res.manifest.audits[0].id, "identity-suite");
    }

    #[test]
    fn worker_count_leaves_counts_unchanged() {
        let a = run_experiment(&smoke(1), |_, _| {}).unwrap();
        let b = run_experiment(&smoke(8), |_, _| {}).unwrap();
        assert_eq!(
            serde_json::to_string(&a.reports[0].counts).unwrap(),
            serde_json::to_string(&b.reports[0].counts).unwrap()
        );
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(exit_code(Status::Pass), 0);
        assert_eq!(exit_code(Status::Fail), 1);
        assert_eq!(exit_code(Status::Inconclusive), 2);
        let hard = |s: Status| {
            let mut r = AuditReport::new("h", favsites::report::Method::ExactDp, AuditKind::Hard);
            r.status = s;
            r
        };
        // a failure outranks an inconclusive audit
        let mixed = [hard(Status::Inconclusive), hard(Status::Fail)];
        assert_eq!(exit_code(overall_status(&mixed)), exit::FAIL);
        assert_eq!(exit_code(overall_status(&[hard(Status::Inconclusive)])), exit::INCONCLUSIVE);
    }

    #[test]
    fn diagnostics_do_not_set_the_exit_code() {
        let mut r = AuditReport::new("d", favsites::report::Method::ExactDp, AuditKind::Diagnostic);
        r.push(favsites::report::AuditPoint::new(Default::default(), 0.0, None, false));
        let r = r.finish();
        assert_eq!(r.status, Status::Fail);
        assert_eq!(exit_code(overall_status(&[r])), exit::PASS);
    }
}
