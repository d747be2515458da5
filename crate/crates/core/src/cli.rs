//! Command-line front end.
//!
//! Every command produces one JSON report. `--pretty` renders a table from
//! that report. Exit codes: 0 on success, 1 when a check ran but failed,
//! 2 on any input or query error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gambles::expr::{compile, parse_gamble};
use crate::gambles::DEFAULT_TABLE_CAP;
use crate::io::{self, CertificateFile};
use crate::query::{self, error_value, QueryFile, RunOptions};
use crate::supermartingale::canonical_supermartingale;
use crate::tree::{ImpreciseTree, Situation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "iptree", version, about = "Upper and lower expectations in imprecise probability trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Compact JSON output (the default).
    #[arg(long, global = true, conflicts_with = "pretty")]
    pub json: bool,

    /// Human-readable table derived from the JSON report.
    #[arg(long, global = true, env = "IPTREE_PRETTY")]
    pub pretty: bool,

    /// Run independent queries concurrently.
    #[arg(long, global = true, env = "IPTREE_PARALLEL")]
    pub parallel: bool,

    /// Add per-query wall time to the report; makes reports non-reproducible.
    #[arg(long, global = true)]
    pub timing: bool,

    /// Stabilization tolerance for limit queries.
    #[arg(long, global = true, env = "IPTREE_TOL")]
    pub tol: Option<f64>,

    /// Largest horizon for limit queries.
    #[arg(long, global = true, env = "IPTREE_MAX_HORIZON")]
    pub max_horizon: Option<usize>,

    /// Seed for the random suites.
    #[arg(long, global = true, env = "IPTREE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a query file or a single inline query.
    Eval(EvalArgs),
    /// Run a property suite or verify a certificate.
    Check {
        #[command(subcommand)]
        what: CheckCommand,
    },
    /// Emit the canonical supermartingale certificate for a gamble.
    Cert(CertArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InlineKind {
    Eval,
    Lower,
    HitTime,
    HitProb,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file; overrides a model named in the query file.
    #[arg(long, env = "IPTREE_MODEL")]
    pub model: Option<PathBuf>,

    /// Query file.
    #[arg(long, env = "IPTREE_QUERY", conflicts_with_all = ["expr", "targets"])]
    pub query: Option<PathBuf>,

    /// Inline gamble expression.
    #[arg(long)]
    pub expr: Option<String>,

    /// Conditioning situation as comma-separated labels (root if omitted).
    #[arg(long)]
    pub at: Option<String>,

    /// Inline query kind.
    #[arg(long, value_enum, default_value = "eval")]
    pub kind: InlineKind,

    /// Target states for hitting queries, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<String>>,

    /// Tabulation depth override for the expression.
    #[arg(long)]
    pub depth: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    /// Local and global axiom suites on random instances.
    Axioms {
        /// Instances for the global and Fatou suites.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Compatible-tree enumeration against backward recursion.
    Oracle {
        /// Fixed model; random trees when omitted.
        #[arg(long, env = "IPTREE_MODEL")]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Verify a supermartingale certificate.
    Cert {
        certificate: PathBuf,
        #[arg(long, env = "IPTREE_MODEL")]
        model: PathBuf,
        /// Gamble to certify; defaults to the one recorded in the file.
        #[arg(long)]
        expr: Option<String>,
        #[arg(long)]
        at: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct CertArgs {
    #[arg(long, env = "IPTREE_MODEL")]
    pub model: PathBuf,
    #[arg(long)]
    pub expr: String,
    #[arg(long)]
    pub at: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
}

/// Parses `args` and runs the command, writing the report to `out` and
/// diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let (report, code) = match execute(&cli) {
        Ok(pair) => pair,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            (json!({ "schema": io::SCHEMA_VERSION, "error": error_value(&e) }), EXIT_ERROR)
        }
    };
    let text = if cli.output.pretty {
        render_table(&report)
    } else {
        serde_json::to_string(&report).expect("reports serialize") + "\n"
    };
    let _ = out.write_all(text.as_bytes());
    code
}

fn options(cli: &Cli, base_dir: Option<PathBuf>) -> RunOptions {
    RunOptions {
        tol: cli.output.tol,
        max_horizon: cli.output.max_horizon,
        seed: cli.output.seed,
        parallel: cli.output.parallel,
        timing: cli.output.timing,
        base_dir,
    }
}

fn single(model: Option<ImpreciseTree>, query: Value, options: &RunOptions) -> (Value, i32) {
    let file = QueryFile {
        model,
        queries: vec![query],
    };
    let (report, errors) = query::run_queries(&file, options);
    let code = if errors > 0 {
        EXIT_ERROR
    } else if report["results"][0]["result"]["passed"] == false {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    };
    (report, code)
}

fn parent(path: &Path) -> Option<PathBuf> {
    path.parent().map(Path::to_path_buf)
}

fn execute(cli: &Cli) -> Result<(Value, i32)> {
    match &cli.command {
        Command::Eval(args) => {
            let model = args.model.as_deref().map(io::load_model).transpose()?;
            if let Some(path) = &args.query {
                let text = io::read_file(path)?;
                let options = options(cli, parent(path));
                let file = query::parse_query_file(&text, options.base_dir.as_deref(), model).map_err(|e| match e {
                    Error::Json { path: p, message } => Error::json(format!("{}: {p}", path.display()), message),
                    other => other,
                })?;
                let (report, errors) = query::run_queries(&file, &options);
                return Ok((report, if errors > 0 { EXIT_ERROR } else { EXIT_OK }));
            }
            let kind = match args.kind {
                InlineKind::Eval => "eval",
                InlineKind::Lower => "lower",
                InlineKind::HitTime => "hit_time",
                InlineKind::HitProb => "hit_prob",
            };
            let mut q = json!({ "kind": kind });
            if let Some(e) = &args.expr {
                q["expr"] = json!(e);
            }
            if let Some(at) = &args.at {
                q["at"] = json!(at);
            }
            if let Some(t) = &args.targets {
                q["targets"] = json!(t);
            }
            if let Some(d) = args.depth {
                q["depth"] = json!(d);
            }
            Ok(single(model, q, &options(cli, None)))
        }
        Command::Check { what } => match what {
            CheckCommand::Axioms { trials } => {
                let mut q = json!({ "kind": "axiom_suite" });
                if let Some(t) = trials {
                    q["trials"] = json!(t);
                }
                Ok(single(None, q, &options(cli, None)))
            }
            CheckCommand::Oracle { model, depth, trials } => {
                let model = model.as_deref().map(io::load_model).transpose()?;
                let q = json!({ "kind": "oracle_check", "depth": depth, "trials": trials });
                Ok(single(model, q, &options(cli, None)))
            }
            CheckCommand::Cert {
                certificate,
                model,
                expr,
                at,
            } => {
                let model = io::load_model(model)?;
                let text = io::read_file(certificate)?;
                let value = io::parse_json(&text, &certificate.display().to_string())?;
                let mut q = json!({ "kind": "verify_cert", "certificate": value });
                if let Some(e) = expr {
                    q["expr"] = json!(e);
                }
                if let Some(a) = at {
                    q["at"] = json!(a);
                }
                Ok(single(Some(model), q, &options(cli, parent(certificate))))
            }
        },
        Command::Cert(args) => {
            let q = io::load_model(&args.model)?;
            let parsed = parse_gamble(&args.expr, q.space())?;
            let f = compile(&parsed, q.k(), args.depth, DEFAULT_TABLE_CAP)?;
            let base = Situation::parse(args.at.as_deref().unwrap_or(""), q.space())?;
            let m = canonical_supermartingale(&q, &f, &base)?;
            let mut file = CertificateFile::from_process(&m, q.space());
            file.expr = Some(args.expr.clone());
            file.at = args.at.clone();
            Ok((serde_json::to_value(file).expect("certificates serialize"), EXIT_OK))
        }
    }
}

/// Flattens a report into `path = value` lines.
pub fn render_table(report: &Value) -> String {
    fn walk(prefix: &str, v: &Value, depth: usize, lines: &mut Vec<(String, String)>) {
        match v {
            Value::Object(map) if depth < 4 => {
                for (k, child) in map {
                    let p = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&p, child, depth + 1, lines);
                }
            }
            Value::Array(items) if depth < 4 && items.iter().all(Value::is_object) => {
                for (i, child) in items.iter().enumerate() {
                    walk(&format!("{prefix}[{i}]"), child, depth + 1, lines);
                }
            }
            Value::Array(items) if items.len() > 6 => {
                lines.push((prefix.to_string(), format!("[{} items]", items.len())));
            }
            other => lines.push((prefix.to_string(), other.to_string())),
        }
    }
    let mut lines = Vec::new();
    walk("", report, 0, &mut lines);
    let width = lines.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    let mut text = String::new();
    for (k, v) in lines {
        text.push_str(&format!("{k:<width$}  {v}\n"));
    }
    text
}
