//! Query files and their evaluation into JSON reports.
//!
//! A report is a plain `serde_json::Value` so the CLI and the C interface
//! emit the same bytes. Numbers in reports are finite; infinite values are
//! written as the strings `"+inf"` and `"-inf"`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::checks::{run_axiom_suite, run_oracle_suite, AxiomSuiteSize};
use crate::error::{Error, Result};
use crate::gambles::expr::{compile, parse_gamble};
use crate::gambles::{EventSpec, FinitaryGamble, LimitVariable, DEFAULT_TABLE_CAP};
use crate::game::{
    finitary_lower, finitary_upper, limit_lower, limit_upper, lower_probability, upper_probability, ApproxPolicy,
    ApproxResult, Probability,
};
use crate::io::{self, CertificateFile, ModelFile};
use crate::supermartingale::{certified_upper_bound, verify};
use crate::tree::{ImpreciseTree, Situation};

/// Default seed for the random suites.
pub const DEFAULT_SEED: u64 = 0;
/// Default bound on compatible trees enumerated by `oracle_check`.
pub const DEFAULT_ORACLE_CAP: u128 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Eval,
    Lower,
    HitProb,
    HitTime,
    VerifyCert,
    OracleCheck,
    AxiomSuite,
}

impl QueryKind {
    pub fn name(self) -> &'static str {
        match self {
            QueryKind::Eval => "eval",
            QueryKind::Lower => "lower",
            QueryKind::HitProb => "hit_prob",
            QueryKind::HitTime => "hit_time",
            QueryKind::VerifyCert => "verify_cert",
            QueryKind::OracleCheck => "oracle_check",
            QueryKind::AxiomSuite => "axiom_suite",
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyInput {
    pub tol: Option<f64>,
    pub max_horizon: Option<usize>,
    /// Largest dense gamble table, in entries.
    pub table_cap: Option<usize>,
    /// Largest number of compatible trees to enumerate.
    pub enumeration_cap: Option<u128>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventInput {
    Cylinder { at: String },
    Union { depth: usize, strings: Vec<String> },
    Hitting { targets: Vec<String> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySpec {
    #[serde(default)]
    pub id: Option<String>,
    pub kind: QueryKind,
    #[serde(default)]
    pub expr: Option<String>,
    /// Conditioning situation as comma-separated labels; the root by default.
    #[serde(default)]
    pub at: Option<String>,
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default)]
    pub targets: Option<Vec<String>>,
    #[serde(default)]
    pub event: Option<EventInput>,
    #[serde(default)]
    pub policy: PolicyInput,
    /// An inline certificate object, or a path relative to the query file.
    #[serde(default)]
    pub certificate: Option<Value>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Settings that apply to every query; command-line flags land here and
/// take precedence over per-query policies.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub tol: Option<f64>,
    pub max_horizon: Option<usize>,
    pub seed: Option<u64>,
    pub parallel: bool,
    pub timing: bool,
    /// Directory for resolving relative paths inside the query file.
    pub base_dir: Option<PathBuf>,
}

pub struct QueryFile {
    pub model: Option<ImpreciseTree>,
    /// Raw queries, echoed into the report.
    pub queries: Vec<Value>,
}

/// Parses a query file. `model` from the caller takes precedence over the
/// file's own `model` entry (a path or an inline model object).
pub fn parse_query_file(text: &str, base_dir: Option<&Path>, model: Option<ImpreciseTree>) -> Result<QueryFile> {
    let value = io::parse_json(text, "query file")?;
    let Value::Object(mut map) = value else {
        return Err(Error::json(".", "query file must be an object"));
    };
    match map.remove("schema") {
        Some(Value::Number(n)) if n.as_u64() == Some(io::SCHEMA_VERSION as u64) => {}
        Some(other) => {
            return Err(Error::json(
                "schema",
                format!("unsupported schema {other}, expected {}", io::SCHEMA_VERSION),
            ))
        }
        None => return Err(Error::json("schema", "missing field `schema`")),
    }
    let file_model = map.remove("model");
    let queries = match map.remove("queries") {
        Some(Value::Array(q)) => q,
        Some(_) => return Err(Error::json("queries", "expected an array")),
        None => return Err(Error::json("queries", "missing field `queries`")),
    };
    if let Some(extra) = map.keys().next() {
        return Err(Error::json(extra.as_str(), "unknown field"));
    }
    let model = match (model, file_model) {
        (Some(m), _) => Some(m),
        (None, None) => None,
        (None, Some(Value::String(path))) => Some(io::load_model(&resolve(base_dir, &path))?),
        (None, Some(inline)) => Some(ModelFile::from_json_value(inline, "model")?.to_tree("model.")?),
    };
    Ok(QueryFile { model, queries })
}

fn resolve(base: Option<&Path>, path: &str) -> PathBuf {
    match base {
        Some(dir) if Path::new(path).is_relative() => dir.join(path),
        _ => PathBuf::from(path),
    }
}

/// Runs every query and assembles the report. The second value is the
/// number of queries that failed.
pub fn run_queries(file: &QueryFile, options: &RunOptions) -> (Value, usize) {
    let run_one = |(i, raw): (usize, &Value)| {
        let start = Instant::now();
        let mut record = Map::new();
        record.insert("index".into(), json!(i));
        record.insert("input".into(), raw.clone());
        match run_query(file.model.as_ref(), raw, i, options) {
            Ok(result) => {
                record.insert("status".into(), json!("ok"));
                record.insert("result".into(), result);
            }
            Err(e) => {
                record.insert("status".into(), json!("error"));
                record.insert("error".into(), error_value(&e));
            }
        }
        if options.timing {
            record.insert("wall_ms".into(), json!(start.elapsed().as_secs_f64() * 1e3));
        }
        Value::Object(record)
    };
    let records: Vec<Value> = if options.parallel {
        file.queries.par_iter().enumerate().map(run_one).collect()
    } else {
        file.queries.iter().enumerate().map(run_one).collect()
    };
    let errors = records.iter().filter(|r| r["status"] == "error").count();
    let report = json!({
        "schema": io::SCHEMA_VERSION,
        "errors": errors,
        "results": records,
    });
    (report, errors)
}

pub fn error_value(e: &Error) -> Value {
    let kind = match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::ResourceLimit { .. } => "resource_limit",
        Error::Syntax { .. } => "syntax",
        Error::Json { .. } => "json",
        Error::Io { .. } => "io",
    };
    let mut v = json!({ "kind": kind, "message": e.to_string() });
    match e {
        Error::Json { path, .. } => v["path"] = json!(path),
        Error::Syntax { line, column, .. } => {
            v["line"] = json!(line);
            v["column"] = json!(column);
        }
        _ => {}
    }
    v
}

fn require_model(model: Option<&ImpreciseTree>, kind: QueryKind) -> Result<&ImpreciseTree> {
    model.ok_or_else(|| Error::invalid(format!("query kind {} needs a model", kind.name())))
}

fn approx_policy(input: &PolicyInput, options: &RunOptions, path: &str) -> Result<ApproxPolicy> {
    let mut policy = ApproxPolicy::default();
    if let Some(tol) = options.tol.or(input.tol) {
        policy.tol = tol;
    }
    if let Some(h) = options.max_horizon.or(input.max_horizon) {
        policy.max_horizon = h;
    }
    policy.validate().map_err(|e| Error::json(format!("{path}.policy"), e.to_string()))?;
    Ok(policy)
}

fn situation(q: &ImpreciseTree, at: Option<&str>, path: &str) -> Result<Situation> {
    Situation::parse(at.unwrap_or(""), q.space()).map_err(|e| Error::json(format!("{path}.at"), e.to_string()))
}

fn gamble(q: &ImpreciseTree, spec: &QuerySpec, cap: usize, path: &str) -> Result<FinitaryGamble> {
    let source = spec
        .expr
        .as_deref()
        .ok_or_else(|| Error::json(path, "missing field `expr`"))?;
    let parsed = parse_gamble(source, q.space())?;
    compile(&parsed, q.k(), spec.depth, cap)
}

fn targets(q: &ImpreciseTree, labels: &[String], path: &str) -> Result<Vec<usize>> {
    q.space()
        .indices_of(labels)
        .map_err(|e| Error::json(format!("{path}.targets"), e.to_string()))
}

fn approx_value(r: &ApproxResult) -> Value {
    json!({
        "value": r.value,
        "converged": r.converged,
        "converged_at": r.converged_at,
        "stop_reason": r.stop_reason,
        "iterates": r.iterates,
    })
}

fn probability_value(p: &Probability) -> Value {
    match p {
        Probability::Exact(v) => json!({ "value": v, "exact": true }),
        Probability::Approx(r) => {
            let mut v = approx_value(r);
            v["exact"] = json!(false);
            v
        }
    }
}

fn run_query(model: Option<&ImpreciseTree>, raw: &Value, index: usize, options: &RunOptions) -> Result<Value> {
    let path = format!("queries[{index}]");
    let spec: QuerySpec = io::from_value(raw.clone(), &path)?;
    let table_cap = spec.policy.table_cap.unwrap_or(DEFAULT_TABLE_CAP);
    match spec.kind {
        QueryKind::Eval | QueryKind::Lower => {
            let q = require_model(model, spec.kind)?;
            let s = situation(q, spec.at.as_deref(), &path)?;
            let f = gamble(q, &spec, table_cap, &path)?;
            let lower = finitary_lower(q, &f, &s)?;
            if spec.kind == QueryKind::Lower {
                return Ok(json!({ "lower": lower, "depth": f.depth() }));
            }
            let upper = finitary_upper(q, &f, &s)?;
            Ok(json!({ "upper": upper, "lower": lower, "depth": f.depth() }))
        }
        QueryKind::HitTime => {
            let q = require_model(model, spec.kind)?;
            let s = situation(q, spec.at.as_deref(), &path)?;
            let policy = approx_policy(&spec.policy, options, &path)?;
            let labels = spec
                .targets
                .as_deref()
                .ok_or_else(|| Error::json(&path, "missing field `targets`"))?;
            let v = LimitVariable::hitting_time(q.k(), &targets(q, labels, &path)?)?;
            let upper = limit_upper(q, &v, &s, &policy)?;
            let lower = limit_lower(q, &v, &s, &policy)?;
            Ok(json!({
                "upper": upper.value,
                "lower": lower.value,
                "converged": upper.converged && lower.converged,
                "upper_detail": approx_value(&upper),
                "lower_detail": approx_value(&lower),
            }))
        }
        QueryKind::HitProb => {
            let q = require_model(model, spec.kind)?;
            let s = situation(q, spec.at.as_deref(), &path)?;
            let policy = approx_policy(&spec.policy, options, &path)?;
            let event = match (&spec.event, &spec.targets) {
                (Some(e), None) => event_spec(q, e, &path)?,
                (None, Some(labels)) => EventSpec::Hitting(targets(q, labels, &path)?),
                _ => return Err(Error::json(&path, "give exactly one of `event` and `targets`")),
            };
            let upper = upper_probability(q, &event, &s, &policy, table_cap)?;
            let lower = lower_probability(q, &event, &s, &policy, table_cap)?;
            let converged = [&upper, &lower].iter().all(|p| match p {
                Probability::Exact(_) => true,
                Probability::Approx(r) => r.converged,
            });
            Ok(json!({
                "upper": upper.value(),
                "lower": lower.value(),
                "converged": converged,
                "upper_detail": probability_value(&upper),
                "lower_detail": probability_value(&lower),
            }))
        }
        QueryKind::VerifyCert => {
            let q = require_model(model, spec.kind)?;
            let raw_cert = spec
                .certificate
                .clone()
                .ok_or_else(|| Error::json(&path, "missing field `certificate`"))?;
            let cert_path = format!("{path}.certificate");
            let cert: CertificateFile = match raw_cert {
                Value::String(file) => {
                    let file = resolve(options.base_dir.as_deref(), &file);
                    let text = io::read_file(&file)?;
                    io::certificate_from_str(&text, &file.display().to_string()).map_err(|e| prefix_json(e, &file))?
                }
                inline => io::from_value(inline, &cert_path)?,
            };
            let m = cert.to_process(q.space(), &format!("{cert_path}."))?;
            let expr = spec.expr.clone().or(cert.expr.clone());
            let at = spec.at.clone().or(cert.at.clone());
            match expr {
                None => {
                    let report = verify(&m, q)?;
                    Ok(json!({ "passed": report.passed, "verify": report }))
                }
                Some(source) => {
                    let s = situation(q, at.as_deref(), &path)?;
                    let with_expr = QuerySpec {
                        expr: Some(source),
                        ..spec.clone()
                    };
                    let f = gamble(q, &with_expr, table_cap, &path)?;
                    let certificate = certified_upper_bound(&m, &f, q, &s)?;
                    Ok(json!({ "passed": certificate.valid, "certificate": certificate }))
                }
            }
        }
        QueryKind::OracleCheck => {
            let seed = options.seed.or(spec.seed).unwrap_or(DEFAULT_SEED);
            let trials = spec.trials.unwrap_or(50);
            let depth = spec.depth.unwrap_or(3);
            let cap = spec.policy.enumeration_cap.unwrap_or(DEFAULT_ORACLE_CAP);
            let report = run_oracle_suite(model, seed, trials, depth, cap)?;
            Ok(serde_json::to_value(report).expect("reports serialize"))
        }
        QueryKind::AxiomSuite => {
            let seed = options.seed.or(spec.seed).unwrap_or(DEFAULT_SEED);
            let mut size = AxiomSuiteSize::default();
            if let Some(t) = spec.trials {
                size.global_instances = t;
                size.fatou_sequences = t;
            }
            let report = run_axiom_suite(seed, size)?;
            Ok(serde_json::to_value(report).expect("reports serialize"))
        }
    }
}

fn prefix_json(e: Error, file: &Path) -> Error {
    match e {
        Error::Json { path, message } => Error::json(format!("{}: {path}", file.display()), message),
        other => other,
    }
}

fn event_spec(q: &ImpreciseTree, e: &EventInput, path: &str) -> Result<EventSpec> {
    let parse = |text: &str, p: String| Situation::parse(text, q.space()).map_err(|e| Error::json(p, e.to_string()));
    Ok(match e {
        EventInput::Cylinder { at } => EventSpec::Cylinder(parse(at, format!("{path}.event.at"))?),
        EventInput::Union { depth, strings } => EventSpec::UnionAtDepth {
            depth: *depth,
            strings: strings
                .iter()
                .enumerate()
                .map(|(i, s)| parse(s, format!("{path}.event.strings[{i}]")))
                .collect::<Result<_>>()?,
        },
        EventInput::Hitting { targets: labels } => EventSpec::Hitting(
            q.space()
                .indices_of(labels)
                .map_err(|e| Error::json(format!("{path}.event.targets"), e.to_string()))?,
        ),
    })
}

/// Parses and runs a query file given as text; used by the C interface.
pub fn eval_query_text(model: Option<ImpreciseTree>, text: &str, options: &RunOptions) -> Result<(Value, usize)> {
    let file = parse_query_file(text, options.base_dir.as_deref(), model)?;
    Ok(run_queries(&file, options))
}

#[cfg(test)]
mod tests {
    use super::*;

    const COIN: &str = r#"{"schema":1,"states":["H","T"],"model":{"kind":"homogeneous","credal":[[0.6,0.4],[0.4,0.6]]}}"#;

    fn run(queries: &str) -> (Value, usize) {
        let text = format!(r#"{{"schema":1,"model":{COIN},"queries":{queries}}}"#);
        eval_query_text(None, &text, &RunOptions::default()).unwrap()
    }

    #[test]
    fn eval_on_the_imprecise_coin() {
        let (report, errors) = run(r#"[{"kind":"eval","expr":"ind(X[1]==H)"}]"#);
        assert_eq!(errors, 0);
        let result = &report["results"][0]["result"];
        assert!((result["upper"].as_f64().unwrap() - 0.6).abs() < 1e-12);
        assert!((result["lower"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn hitting_time_reaches_the_closed_forms() {
        let (report, errors) = run(r#"[{"kind":"hit_time","targets":["T"],"policy":{"tol":1e-9,"max_horizon":60}}]"#);
        assert_eq!(errors, 0);
        let result = &report["results"][0]["result"];
        assert!((result["upper"].as_f64().unwrap() - 2.5).abs() < 1e-8);
        assert!((result["lower"].as_f64().unwrap() - 5.0 / 3.0).abs() < 1e-8);
        assert_eq!(result["converged"], true);
    }

    #[test]
    fn empty_query_list() {
        let (report, errors) = run("[]");
        assert_eq!(errors, 0);
        assert_eq!(report["results"], json!([]));
    }

    #[test]
    fn bad_label_is_a_query_error() {
        let (report, errors) = run(r#"[{"kind":"eval","expr":"ind(X[1]==Q)"},{"kind":"eval","expr":"ind(X[1]==H)"}]"#);
        assert_eq!(errors, 1);
        assert_eq!(report["results"][0]["status"], "error");
        assert_eq!(report["results"][1]["status"], "ok");
    }

    #[test]
    fn unknown_fields_report_a_path() {
        let (report, _) = run(r#"[{"kind":"eval","expr":"1","colour":1}]"#);
        let e = &report["results"][0]["error"];
        assert_eq!(e["kind"], "json");
        assert!(e["path"].as_str().unwrap().starts_with("queries[0]"), "{e}");
    }

    #[test]
    fn hitting_probability_of_a_cylinder_is_exact() {
        let (report, errors) = run(r#"[{"kind":"hit_prob","event":{"kind":"cylinder","at":"H,H"}}]"#);
        assert_eq!(errors, 0);
        let r = &report["results"][0]["result"];
        assert!((r["upper"].as_f64().unwrap() - 0.36).abs() < 1e-12);
        assert!((r["lower"].as_f64().unwrap() - 0.16).abs() < 1e-12);
    }
}
