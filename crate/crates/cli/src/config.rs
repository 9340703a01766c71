//! Experiment configuration files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use favsites::verify::suite::{IdentitySuiteConfig, KernelAuditConfig, OracleEquivalenceConfig, RkAuditConfig};
use favsites::verify::{AuditConfig, F4Config, LemmaId, MartingaleKind, Prop1Config};
use serde::de::{self, DeserializeOwned};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// One audit to run, tagged by `"audit"`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "audit", rename_all = "kebab-case")]
pub enum AuditSpec {
    IdentitySuite(IdentitySuiteConfig),
    Kernels(KernelAuditConfig),
    OracleEquivalence(OracleEquivalenceConfig),
    RayKnight(RkAuditConfig),
    FirstPassage(AuditConfig),
    Lemma {
        lemma: LemmaId,
        #[serde(default)]
        params: AuditConfig,
    },
    Martingale {
        kind: MartingaleKind,
        #[serde(default)]
        params: AuditConfig,
    },
    Proposition1(Prop1Config),
    F4Longrun(F4Config),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LemmaBody {
    lemma: LemmaId,
    #[serde(default)]
    params: AuditConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MartingaleBody {
    kind: MartingaleKind,
    #[serde(default)]
    params: AuditConfig,
}

fn body<T: DeserializeOwned, E: de::Error>(v: Value) -> Result<T, E> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        E::custom(format!("`{path}`: {}", e.into_inner()))
    })
}

// Hand-written so that errors inside an entry name the offending field.
impl<'de> Deserialize<'de> for AuditSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut map = Map::deserialize(d)?;
        let tag = match map.remove("audit") {
            Some(Value::String(t)) => t,
            Some(other) => return Err(de::Error::custom(format!("`audit`: expected a string, got {other}"))),
            None => return Err(de::Error::missing_field("audit")),
        };
        let rest = Value::Object(map);
        Ok(match tag.as_str() {
            "identity-suite" => AuditSpec::IdentitySuite(body(rest)?),
            "kernels" => AuditSpec::Kernels(body(rest)?),
            "oracle-equivalence" => AuditSpec::OracleEquivalence(body(rest)?),
            "ray-knight" => AuditSpec::RayKnight(body(rest)?),
            "first-passage" => AuditSpec::FirstPassage(body(rest)?),
            "lemma" => {
                let b: LemmaBody = body(rest)?;
                AuditSpec::Lemma {
                    lemma: b.lemma,
                    params: b.params,
                }
            }
            "martingale" => {
                let b: MartingaleBody = body(rest)?;
                AuditSpec::Martingale {
                    kind: b.kind,
                    params: b.params,
                }
            }
            "proposition1" => AuditSpec::Proposition1(body(rest)?),
            "f4-longrun" => AuditSpec::F4Longrun(body(rest)?),
            other => return Err(de::Error::unknown_variant(other, AUDIT_TAGS)),
        })
    }
}

const AUDIT_TAGS: &[&str] = &[
    "identity-suite",
    "kernels",
    "oracle-equivalence",
    "ray-knight",
    "first-passage",
    "lemma",
    "martingale",
    "proposition1",
    "f4-longrun",
];

impl AuditSpec {
    /// The name used by `audit --lemma` and in duplicate detection.
    pub fn name(&self) -> String {
        match self {
            AuditSpec::IdentitySuite(_) => "identity-suite".into(),
            AuditSpec::Kernels(_) => "kernels".into(),
            AuditSpec::OracleEquivalence(_) => "oracle-equivalence".into(),
            AuditSpec::RayKnight(_) => "ray-knight".into(),
            AuditSpec::FirstPassage(_) => "first-passage".into(),
            AuditSpec::Lemma { lemma, .. } => lemma.as_str().into(),
            AuditSpec::Martingale { kind, .. } => format!("martingale-{}", kind.as_str()),
            AuditSpec::Proposition1(_) => "proposition-1".into(),
            AuditSpec::F4Longrun(_) => "f4-longrun".into(),
        }
    }

    /// Every known audit at its default parameters.
    pub fn catalog() -> Vec<AuditSpec> {
        let mut all = vec![
            AuditSpec::IdentitySuite(IdentitySuiteConfig::default()),
            AuditSpec::Kernels(KernelAuditConfig::default()),
            AuditSpec::OracleEquivalence(OracleEquivalenceConfig::default()),
            AuditSpec::RayKnight(RkAuditConfig::default()),
            AuditSpec::FirstPassage(AuditConfig::default()),
        ];
        all.extend(LemmaId::ALL.into_iter().map(|lemma| AuditSpec::Lemma {
            lemma,
            params: AuditConfig::default(),
        }));
        all.extend(MartingaleKind::ALL.into_iter().map(|kind| AuditSpec::Martingale {
            kind,
            params: AuditConfig::default(),
        }));
        all.push(AuditSpec::Proposition1(Prop1Config::default()));
        all.push(AuditSpec::F4Longrun(F4Config::default()));
        all
    }

    pub fn from_name(name: &str) -> Option<AuditSpec> {
        Self::catalog().into_iter().find(|a| a.name() == name)
    }

    pub fn known_names() -> Vec<String> {
        Self::catalog().iter().map(AuditSpec::name).collect()
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            AuditSpec::IdentitySuite(c) => c.seed = seed,
            AuditSpec::Kernels(c) => c.seed = seed,
            AuditSpec::OracleEquivalence(c) => c.seed = seed,
            AuditSpec::RayKnight(c) => c.seed = seed,
            AuditSpec::FirstPassage(c) | AuditSpec::Lemma { params: c, .. } | AuditSpec::Martingale { params: c, .. } => {
                c.seed = seed
            }
            AuditSpec::Proposition1(c) => c.seed = seed,
            AuditSpec::F4Longrun(c) => c.seed = seed,
        }
    }

    pub fn set_workers(&mut self, workers: usize) {
        match self {
            AuditSpec::IdentitySuite(c) => c.workers = workers,
            AuditSpec::Kernels(c) => c.workers = workers,
            AuditSpec::OracleEquivalence(c) => c.workers = workers,
            AuditSpec::RayKnight(c) => c.workers = workers,
            AuditSpec::FirstPassage(c) | AuditSpec::Lemma { params: c, .. } | AuditSpec::Martingale { params: c, .. } => {
                c.workers = workers
            }
            AuditSpec::Proposition1(c) => c.workers = workers,
            AuditSpec::F4Longrun(c) => c.workers = workers,
        }
    }

    /// Budget and range checks, run before anything is executed.
    pub fn validate(&self) -> Result<(), String> {
        let positive = |checks: &[(&str, u64)]| -> Result<(), String> {
            match checks.iter().find(|(_, v)| *v == 0) {
                Some((field, _)) => Err(format!("{field} must be positive")),
                None => Ok(()),
            }
        };
        let probability = |field: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(format!("{field} = {v} must lie in (0, 1)"))
            }
        };
        match self {
            AuditSpec::IdentitySuite(c) => positive(&[
                ("paths", c.paths),
                ("steps", c.steps),
                ("workers", c.workers as u64),
                ("checkpoint", c.checkpoint),
            ]),
            AuditSpec::Kernels(c) => {
                positive(&[("samples", c.samples), ("workers", c.workers as u64)])?;
                probability("significance", c.significance)
            }
            AuditSpec::OracleEquivalence(c) => {
                positive(&[
                    ("samples", c.samples),
                    ("workers", c.workers as u64),
                    ("t_max", c.t_max as u64),
                    ("r_max", c.r_max as u64),
                ])?;
                if c.z > 0.0 {
                    Ok(())
                } else {
                    Err("z must be positive".into())
                }
            }
            AuditSpec::RayKnight(c) => {
                positive(&[
                    ("samples", c.samples),
                    ("workers", c.workers as u64),
                    ("t_cap", c.t_cap as u64),
                    ("pairs", c.pairs.len() as u64),
                ])?;
                if let Some((x, _)) = c.pairs.iter().find(|(x, _)| *x < 1) {
                    return Err(format!("pairs: x = {x} must be at least 1"));
                }
                probability("significance", c.significance)?;
                probability("censor_limit", c.censor_limit)
            }
            AuditSpec::FirstPassage(c) | AuditSpec::Lemma { params: c, .. } | AuditSpec::Martingale { params: c, .. } => {
                c.validate().map_err(|e| e.to_string())
            }
            AuditSpec::Proposition1(c) => c.validate().map_err(|e| e.to_string()),
            AuditSpec::F4Longrun(c) => c.validate().map_err(|e| e.to_string()),
        }
    }
}

/// A named list of audits with run-wide overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// Master seed applied to every audit when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker count applied to every audit when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    pub audits: Vec<AuditSpec>,
}

impl ExperimentConfig {
    pub fn new(experiment: impl Into<String>, audits: Vec<AuditSpec>) -> Self {
        Self {
            experiment: experiment.into(),
            seed: None,
            workers: None,
            out: None,
            format: Format::Json,
            audits,
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::Config(format!(
                "{origin}:{}:{}: field `{path}`: {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Pushes the run-wide seed and worker count into every audit.
    pub fn apply_overrides(&mut self) {
        for a in &mut self.audits {
            if let Some(s) = self.seed {
                a.set_seed(s);
            }
            if let Some(w) = self.workers {
                a.set_workers(w);
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == Some(0) {
            return Err(CliError::Config("field `workers`: must be positive".into()));
        }
        let mut seen = BTreeSet::new();
        for (i, a) in self.audits.iter().enumerate() {
            if !seen.insert(a.name()) {
                return Err(CliError::Config(format!("field `audits[{i}]`: duplicate audit {}", a.name())));
            }
            a.validate()
                .map_err(|e| CliError::Config(format!("field `audits[{i}]` ({}): {e}", a.name())))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}
