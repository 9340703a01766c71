//! Audit results and their serialization.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub type Params = BTreeMap<String, serde_json::Value>;

/// Build a [`Params`] map: `params![h = 3, convention = "literal"]`.
#[macro_export]
macro_rules! params {
    () => { $crate::report::Params::new() };
    ($($key:ident = $value:expr),+ $(,)?) => {{
        let mut p = $crate::report::Params::new();
        $( p.insert(stringify!($key).to_string(), serde_json::json!($value)); )+
        p
    }};
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactDp,
    Enumeration,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::ExactDp => "exact-dp",
            Method::Enumeration => "enumeration",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

/// Hard audits decide the exit status; diagnostics are reported only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditKind {
    Hard,
    Diagnostic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Inconclusive,
    Fail,
}

/// Floats that may be non-finite are written as the strings `"inf"`,
/// `"-inf"` or `"nan"` so that reports stay valid JSON.
pub mod lossless_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "nan" => Ok(f64::NAN),
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("not a number: {other}"))),
            },
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            #[derive(Deserialize)]
            struct Wrap(#[serde(with = "super")] f64);
            Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
        }
    }
}

/// One evaluated parameter point of an audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPoint {
    pub params: Params,
    #[serde(with = "lossless_f64")]
    pub statistic: f64,
    /// p-value for statistical tests, bound slack (bound minus value) for
    /// exact checks.
    #[serde(with = "lossless_f64::option", default)]
    pub p_or_slack: Option<f64>,
    pub pass: bool,
}

impl AuditPoint {
    pub fn new(params: Params, statistic: f64, p_or_slack: Option<f64>, pass: bool) -> Self {
        Self {
            params,
            statistic,
            p_or_slack,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub id: String,
    pub method: Method,
    pub kind: AuditKind,
    pub params: Params,
    pub status: Status,
    #[serde(with = "lossless_f64::option", default)]
    pub statistic: Option<f64>,
    #[serde(with = "lossless_f64::option", default)]
    pub p_or_slack: Option<f64>,
    #[serde(default)]
    pub fitted: BTreeMap<String, f64>,
    #[serde(default)]
    pub samples: Option<u64>,
    #[serde(with = "lossless_f64::option", default)]
    pub censored_mass: Option<f64>,
    /// Exact integer aggregates; identical across worker counts.
    #[serde(default)]
    pub counts: BTreeMap<String, u64>,
    #[serde(default)]
    pub points: Vec<AuditPoint>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl AuditReport {
    pub fn new(id: impl Into<String>, method: Method, kind: AuditKind) -> Self {
        Self {
            id: id.into(),
            method,
            kind,
            params: Params::new(),
            status: Status::Pass,
            statistic: None,
            p_or_slack: None,
            fitted: BTreeMap::new(),
            samples: None,
            censored_mass: None,
            counts: BTreeMap::new(),
            points: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_params(mut self, params: Params) -> Self {
        self.params = params;
        self
    }

    pub fn push(&mut self, point: AuditPoint) {
        self.points.push(point);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn count(&mut self, key: impl Into<String>, value: u64) {
        *self.counts.entry(key.into()).or_default() += value;
    }

    pub fn fit(&mut self, key: impl Into<String>, value: f64) {
        self.fitted.insert(key.into(), value);
    }

    pub fn failed_points(&self) -> usize {
        self.points.iter().filter(|p| !p.pass).count()
    }

    /// Derive the status from the points unless it was already downgraded
    /// to inconclusive.
    pub fn finish(mut self) -> Self {
        if self.status != Status::Inconclusive {
            self.status = if self.failed_points() == 0 {
                Status::Pass
            } else {
                Status::Fail
            };
        }
        self
    }

    pub fn inconclusive(mut self, why: impl Into<String>) -> Self {
        self.status = Status::Inconclusive;
        self.notes.push(why.into());
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

/// Overall status of a set of reports: diagnostics never count.
pub fn overall_status(reports: &[AuditReport]) -> Status {
    reports
        .iter()
        .filter(|r| r.kind == AuditKind::Hard)
        .map(|r| r.status)
        .max()
        .unwrap_or(Status::Pass)
}

pub const CSV_HEADER: [&str; 6] = ["audit_id", "method", "params", "statistic", "p_or_slack", "pass"];

/// CSV rows, one per (audit, parameter point); an audit without points gets
/// one summary row.
pub fn csv_rows(reports: &[AuditReport]) -> Vec<[String; 6]> {
    let fmt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
    let mut rows = Vec::new();
    for r in reports {
        if r.points.is_empty() {
            rows.push([
                r.id.clone(),
                r.method.as_str().to_string(),
                serde_json::to_string(&r.params).unwrap_or_default(),
                fmt(r.statistic),
                fmt(r.p_or_slack),
                (r.status == Status::Pass).to_string(),
            ]);
        }
        for p in &r.points {
            rows.push([
                r.id.clone(),
                r.method.as_str().to_string(),
                serde_json::to_string(&p.params).unwrap_or_default(),
                fmt(Some(p.statistic)),
                fmt(p.p_or_slack),
                p.pass.to_string(),
            ]);
        }
    }
    rows
}
