//! JSON model and certificate files.
//!
//! Every file carries `"schema": 1`. Structural errors report the JSON path
//! of the offending value; semantic errors (bad labels, weights that do not
//! sum to one) report the path they were found at.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::local::{CredalSet, StateSpace};
use crate::supermartingale::TailConstantProcess;
use crate::tree::{Assignment, ImpreciseTree, Situation, Tree};

pub const SCHEMA_VERSION: u32 = 1;

/// Deserializes `value`, reporting failures with their path under `prefix`.
pub fn from_value<T: DeserializeOwned>(value: serde_json::Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix.is_empty(), inner.as_str()) {
            (true, _) => inner.clone(),
            (false, ".") => prefix.to_string(),
            (false, rest) if rest.starts_with('[') => format!("{prefix}{rest}"),
            (false, rest) => format!("{prefix}.{rest}"),
        };
        Error::json(path, e.into_inner().to_string())
    })
}

pub fn parse_json(text: &str, what: &str) -> Result<serde_json::Value> {
    serde_json::from_str(text).map_err(|e| Error::json(what, e.to_string()))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_schema(schema: u32, path: &str) -> Result<()> {
    if schema != SCHEMA_VERSION {
        return Err(Error::json(
            format!("{path}schema"),
            format!("unsupported schema {schema}, expected {SCHEMA_VERSION}"),
        ));
    }
    Ok(())
}

type RawCredal = Vec<Vec<f64>>;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: u32,
    pub states: Vec<String>,
    pub model: RawAssignment,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawAssignment {
    Homogeneous {
        credal: RawCredal,
    },
    Markov {
        initial: RawCredal,
        transitions: BTreeMap<String, RawCredal>,
    },
    /// Explicit entries keyed by comma-separated labels (`""` is the root).
    /// Situations not listed fall through to `base`, or to the homogeneous
    /// `default`.
    Table {
        depth: usize,
        entries: BTreeMap<String, RawCredal>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        default: Option<RawCredal>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<Box<RawAssignment>>,
    },
}

fn credal(raw: &RawCredal, k: usize, path: &str) -> Result<CredalSet> {
    if raw.is_empty() {
        return Err(Error::json(path, "credal set needs at least one mass function"));
    }
    if let Some(i) = raw.iter().position(|p| p.len() != k) {
        return Err(Error::json(
            format!("{path}[{i}]"),
            format!("expected {k} weights, got {}", raw[i].len()),
        ));
    }
    CredalSet::from_weights(raw.clone()).map_err(|e| Error::json(path, strip(e)))
}

fn strip(e: Error) -> String {
    match e {
        Error::InvalidInput(m) => m,
        other => other.to_string(),
    }
}

fn assignment(raw: &RawAssignment, space: &StateSpace, path: &str) -> Result<Assignment<CredalSet>> {
    let k = space.len();
    match raw {
        RawAssignment::Homogeneous { credal: c } => Ok(Assignment::Homogeneous(credal(c, k, &format!("{path}.credal"))?)),
        RawAssignment::Markov { initial, transitions } => {
            let initial = credal(initial, k, &format!("{path}.initial"))?;
            if let Some(extra) = transitions.keys().find(|l| space.index_of(l).is_none()) {
                return Err(Error::json(format!("{path}.transitions.{extra}"), "unknown state label"));
            }
            let transitions = space
                .labels()
                .iter()
                .map(|label| match transitions.get(label) {
                    Some(c) => credal(c, k, &format!("{path}.transitions.{label}")),
                    None => Err(Error::json(format!("{path}.transitions"), format!("missing state {label}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Assignment::Markov { initial, transitions })
        }
        RawAssignment::Table {
            depth,
            entries,
            default,
            base,
        } => {
            let base = match (default, base) {
                (Some(c), None) => Assignment::Homogeneous(credal(c, k, &format!("{path}.default"))?),
                (None, Some(b)) => {
                    if matches!(**b, RawAssignment::Table { .. }) {
                        return Err(Error::json(format!("{path}.base"), "a table base must be homogeneous or markov"));
                    }
                    assignment(b, space, &format!("{path}.base"))?
                }
                _ => return Err(Error::json(path, "a table needs exactly one of `default` and `base`")),
            };
            let mut parsed = BTreeMap::new();
            for (key, c) in entries {
                let entry_path = format!("{path}.entries.{key:?}");
                let s = Situation::parse(key, space).map_err(|e| Error::json(&entry_path, strip(e)))?;
                if s.len() > *depth {
                    return Err(Error::json(
                        entry_path,
                        format!("situation has length {}, above the table depth {depth}", s.len()),
                    ));
                }
                if parsed.insert(s, credal(c, k, &entry_path)?).is_some() {
                    return Err(Error::json(entry_path, "duplicate situation"));
                }
            }
            Ok(Assignment::Table {
                depth: *depth,
                entries: parsed,
                base: Box::new(base),
            })
        }
    }
}

impl ModelFile {
    pub fn from_json_value(value: serde_json::Value, prefix: &str) -> Result<Self> {
        from_value(value, prefix)
    }

    pub fn to_tree(&self, prefix: &str) -> Result<ImpreciseTree> {
        check_schema(self.schema, prefix)?;
        let space = StateSpace::new(self.states.iter().cloned()).map_err(|e| Error::json(format!("{prefix}states"), strip(e)))?;
        let a = assignment(&self.model, &space, &format!("{prefix}model"))?;
        Tree::new(space, a)
    }

    pub fn from_tree(tree: &ImpreciseTree) -> Self {
        ModelFile {
            schema: SCHEMA_VERSION,
            states: tree.space().labels().to_vec(),
            model: raw_assignment(tree.assignment(), tree.space()),
        }
    }
}

fn raw_credal(c: &CredalSet) -> RawCredal {
    c.points().iter().map(|p| p.weights().to_vec()).collect()
}

fn raw_assignment(a: &Assignment<CredalSet>, space: &StateSpace) -> RawAssignment {
    match a {
        Assignment::Homogeneous(c) => RawAssignment::Homogeneous { credal: raw_credal(c) },
        Assignment::Markov { initial, transitions } => RawAssignment::Markov {
            initial: raw_credal(initial),
            transitions: space.labels().iter().cloned().zip(transitions.iter().map(raw_credal)).collect(),
        },
        Assignment::Table { depth, entries, base } => RawAssignment::Table {
            depth: *depth,
            entries: entries.iter().map(|(s, c)| (label_key(s, space), raw_credal(c))).collect(),
            default: None,
            base: Some(Box::new(raw_assignment(base, space))),
        },
    }
}

/// Comma-separated labels; the root is `""`.
pub fn label_key(s: &Situation, space: &StateSpace) -> String {
    s.states().iter().map(|&x| space.label(x)).collect::<Vec<_>>().join(",")
}

pub fn model_from_str(text: &str) -> Result<ImpreciseTree> {
    let value = parse_json(text, "model")?;
    ModelFile::from_json_value(value, "")?.to_tree("")
}

pub fn load_model(path: &Path) -> Result<ImpreciseTree> {
    model_from_str(&read_file(path)?).map_err(|e| match e {
        Error::Json { path: p, message } => Error::json(format!("{}: {p}", path.display()), message),
        other => other,
    })
}

pub fn model_to_string(tree: &ImpreciseTree) -> String {
    serde_json::to_string_pretty(&ModelFile::from_tree(tree)).expect("models serialize")
}

/// A tail-constant process as a table over every situation of length
/// `≤ depth`, with an optional declared lower bound and the query it
/// certifies.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub schema: u32,
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<String>,
    pub table: BTreeMap<String, ExtendedReal>,
}

impl CertificateFile {
    pub fn from_process(m: &TailConstantProcess, space: &StateSpace) -> Self {
        let mut table = BTreeMap::new();
        for (level, values) in m.levels().iter().enumerate() {
            for (r, v) in values.iter().enumerate() {
                table.insert(label_key(&Situation::from_rank(r, level, m.k()), space), *v);
            }
        }
        CertificateFile {
            schema: SCHEMA_VERSION,
            depth: m.depth(),
            lower_bound: Some(m.lower_bound()),
            expr: None,
            at: None,
            table,
        }
    }

    pub fn to_process(&self, space: &StateSpace, prefix: &str) -> Result<TailConstantProcess> {
        check_schema(self.schema, prefix)?;
        let k = space.len();
        let mut levels: Vec<Vec<Option<ExtendedReal>>> = Vec::with_capacity(self.depth + 1);
        let mut width = 1usize;
        for _ in 0..=self.depth {
            levels.push(vec![None; width]);
            width = width
                .checked_mul(k)
                .ok_or_else(|| Error::json(format!("{prefix}depth"), "certificate depth is too large"))?;
        }
        for (key, v) in &self.table {
            let path = format!("{prefix}table.{key:?}");
            let s = Situation::parse(key, space).map_err(|e| Error::json(&path, strip(e)))?;
            if s.len() > self.depth {
                return Err(Error::json(path, format!("situation is deeper than depth {}", self.depth)));
            }
            if *v == ExtendedReal::NegInf {
                return Err(Error::json(path, "-inf is not allowed; the process must be bounded below"));
            }
            if let (Some(lb), ExtendedReal::Finite(x)) = (self.lower_bound, v) {
                if *x < lb {
                    return Err(Error::json(path, format!("value {x} is below the declared lower bound {lb}")));
                }
            }
            levels[s.len()][s.rank(k)] = Some(*v);
        }
        let mut complete = Vec::with_capacity(levels.len());
        for (level, values) in levels.into_iter().enumerate() {
            let mut row = Vec::with_capacity(values.len());
            for (r, v) in values.into_iter().enumerate() {
                match v {
                    Some(v) => row.push(v),
                    None => {
                        let s = Situation::from_rank(r, level, k);
                        return Err(Error::json(
                            format!("{prefix}table"),
                            format!("missing value for situation {:?}", label_key(&s, space)),
                        ));
                    }
                }
            }
            complete.push(row);
        }
        TailConstantProcess::new(k, complete).map_err(|e| Error::json(format!("{prefix}table"), strip(e)))
    }
}

pub fn certificate_from_str(text: &str, what: &str) -> Result<CertificateFile> {
    from_value(parse_json(text, what)?, "")
}
