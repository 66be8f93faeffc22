//! The `rppm` command line.
//!
//! Exit status: 0 success, 1 denied (`eval` only), 2 usage or parse error,
//! 3 validation error.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rppm_core::audit::ChineseWallConfig;
use rppm_core::cache::PrecacheStrategy;
use rppm_core::constraints::{generate_chinese_wall, generate_sod, SodMode, SodSpec};
use rppm_core::formats::{
    parse_config, parse_policy, read_text, serialize_graph, serialize_policy, DocumentPaths,
    DocumentSet,
};
use rppm_core::path::SimplePath;
use rppm_core::{Decision, Engine, Error, EvalOutcome, Request};

pub const EXIT_DENIED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "rppm",
    version,
    about = "Relationship-based access control engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Docs {
    #[arg(long)]
    model: PathBuf,
    /// Graph document; rewritten with the new overlay edges unless --dry-run.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Docs {
    fn paths(&self) -> DocumentPaths {
        DocumentPaths {
            model: self.model.clone(),
            graph: self.graph.clone(),
            policy: self.policy.clone(),
            config: self.config.clone(),
        }
    }

    fn engine(&self, no_cache: bool) -> Result<Engine, Error> {
        let mut docs = DocumentSet::load(&self.paths())?;
        if no_cache {
            docs.config.cache.enabled = false;
        }
        docs.into_engine()
    }
}

#[derive(Debug, Args)]
struct EvalFlags {
    /// Neither read nor write caching edges.
    #[arg(long)]
    no_cache: bool,
    /// Append principal-matching cost `n=<nodes> e=<edges>`.
    #[arg(long)]
    metrics: bool,
    /// Leave the graph document untouched.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load and validate the documents.
    Check {
        #[command(flatten)]
        docs: Docs,
    },
    /// Evaluate one request.
    Eval {
        #[command(flatten)]
        docs: Docs,
        #[command(flatten)]
        flags: EvalFlags,
        /// List matched principal-matching rules and applicable authorization rules.
        #[arg(long)]
        explain: bool,
        #[arg(long, conflicts_with = "request")]
        subject: Option<String>,
        #[arg(long, conflicts_with = "request")]
        object: Option<String>,
        #[arg(long, conflicts_with = "request")]
        action: Option<String>,
        /// SUBJECT OBJECT ACTION
        #[arg(num_args = 3, value_names = ["SUBJECT", "OBJECT", "ACTION"])]
        request: Vec<String>,
    },
    /// Evaluate `subject object action` lines from a file or stdin.
    Batch {
        #[command(flatten)]
        docs: Docs,
        #[command(flatten)]
        flags: EvalFlags,
        /// Request file; `-` or absent reads stdin.
        input: Option<PathBuf>,
    },
    /// Insert caching edges ahead of requests.
    Precache {
        #[command(flatten)]
        docs: Docs,
        #[arg(long)]
        dry_run: bool,
        /// Maximum number of insertions.
        #[arg(long)]
        budget: Option<usize>,
        #[command(subcommand)]
        strategy: PrecacheCommand,
    },
    /// Remove caching edges.
    Purge {
        #[command(flatten)]
        docs: Docs,
        #[arg(long)]
        dry_run: bool,
        /// Only edges leaving this subject.
        #[arg(long)]
        subject: Option<String>,
    },
    /// Generate a constrained policy from a base policy.
    Gen {
        #[command(subcommand)]
        kind: GenCommand,
    },
    /// Print the graph document.
    Dump {
        #[command(flatten)]
        docs: Docs,
        /// Relationship edges only.
        #[arg(long)]
        no_overlay: bool,
    },
    /// Print decision audit edges as `seq subject object action decision`.
    AuditLog {
        #[command(flatten)]
        docs: Docs,
    },
}

#[derive(Debug, Subcommand)]
enum PrecacheCommand {
    /// The most recently active subjects against fixed targets.
    Subject {
        #[arg(long, default_value_t = 1)]
        recent: usize,
        #[arg(long = "target", required = true)]
        targets: Vec<String>,
    },
    /// Fixed objects against a list of subjects.
    Object {
        #[arg(long = "object", required = true)]
        objects: Vec<String>,
        #[arg(long = "subject", required = true)]
        subjects: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct GenOutput {
    /// Base policy document.
    #[arg(long)]
    policy: PathBuf,
    /// Write here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum GenCommand {
    /// Separation of duty on one object.
    Sod {
        #[command(flatten)]
        io: GenOutput,
        #[arg(long)]
        object: String,
        #[arg(long, value_delimiter = ',', required = true)]
        actions: Vec<String>,
        /// One principal for all actions, denying everything once any was performed.
        #[arg(long)]
        basic: bool,
        /// Principal names; `p1..pn` by default, `p_seen` with --basic.
        #[arg(long, value_delimiter = ',')]
        principals: Vec<String>,
    },
    /// Chinese Wall over the configured company paths.
    Cw {
        #[command(flatten)]
        io: GenOutput,
        /// Engine configuration supplying `cw.paths`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Company paths, overriding the configuration.
        #[arg(long, value_delimiter = ',')]
        paths: Vec<SimplePath>,
        #[arg(long, default_value = "p_cw")]
        principal: String,
    },
}

/// A failure carrying its exit status.
struct Failure {
    status: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            status: e.exit_status(),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self {
            status: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        status: EXIT_USAGE,
        message: message.into(),
    }
}

/// Runs the command line `args` (including the program name), writing
/// results to `out` and diagnostics to `err`. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    match execute(cli.command, out) {
        Ok(status) => status,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.status
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Check { docs } => {
            docs.engine(false)?;
            Ok(0)
        }
        Command::Eval {
            docs,
            flags,
            explain,
            subject,
            object,
            action,
            request,
        } => {
            let request = match (request.as_slice(), subject, object, action) {
                ([s, o, a], None, None, None) => Request::new(s, o, a),
                ([], Some(s), Some(o), Some(a)) => Request::new(s, o, a),
                _ => {
                    return Err(usage(
                        "eval needs SUBJECT OBJECT ACTION or --subject, --object and --action",
                    ))
                }
            };
            let mut engine = docs.engine(flags.no_cache)?;
            let before = engine.graph().revision();
            let outcome = engine.evaluate(&request)?;
            writeln!(out, "{}", result_line(&outcome, flags.metrics))?;
            if explain {
                write_explanation(out, &engine, &outcome)?;
            }
            save(&docs, &engine, before, flags.dry_run)?;
            Ok(match outcome.decision {
                Decision::Allow => 0,
                Decision::Deny => EXIT_DENIED,
            })
        }
        Command::Batch { docs, flags, input } => {
            let mut engine = docs.engine(flags.no_cache)?;
            let before = engine.graph().revision();
            let reader: Box<dyn BufRead> = match input.as_deref() {
                None => Box::new(BufReader::new(io::stdin())),
                Some(p) if p == Path::new("-") => Box::new(BufReader::new(io::stdin())),
                Some(p) => Box::new(BufReader::new(
                    fs::File::open(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
                )),
            };
            let status = batch(&mut engine, reader, out, flags.metrics)?;
            save(&docs, &engine, before, flags.dry_run)?;
            Ok(status)
        }
        Command::Precache {
            docs,
            dry_run,
            budget,
            strategy,
        } => {
            let mut engine = docs.engine(false)?;
            let before = engine.graph().revision();
            let strategy = match strategy {
                PrecacheCommand::Subject { recent, targets } => PrecacheStrategy::SubjectFocused {
                    recent_k: recent,
                    targets,
                },
                PrecacheCommand::Object { objects, subjects } => {
                    PrecacheStrategy::ObjectFocused { objects, subjects }
                }
            };
            let inserted = engine.precache(&strategy, budget.unwrap_or(usize::MAX))?;
            writeln!(out, "inserted={inserted}")?;
            save(&docs, &engine, before, dry_run)?;
            Ok(0)
        }
        Command::Purge {
            docs,
            dry_run,
            subject,
        } => {
            let mut engine = docs.engine(false)?;
            let before = engine.graph().revision();
            let purged = engine.purge_cache(subject.as_deref())?;
            writeln!(out, "purged={purged}")?;
            save(&docs, &engine, before, dry_run)?;
            Ok(0)
        }
        Command::Gen { kind } => generate(kind, out),
        Command::Dump { docs, no_overlay } => {
            let engine = docs.engine(false)?;
            write!(out, "{}", serialize_graph(engine.graph(), !no_overlay))?;
            Ok(0)
        }
        Command::AuditLog { docs } => {
            let engine = docs.engine(false)?;
            for record in engine.audit_log() {
                writeln!(out, "{record}")?;
            }
            Ok(0)
        }
    }
}

fn result_line(outcome: &EvalOutcome, metrics: bool) -> String {
    let mut line = format!(
        "{} mp=[{}] cached={}",
        outcome.decision.to_string().to_uppercase(),
        outcome.matched_principals.join(","),
        outcome.cache_hit
    );
    if metrics {
        line.push_str(&format!(
            " n={} e={}",
            outcome.metrics.nodes_visited, outcome.metrics.edges_considered
        ));
    }
    line
}

fn write_explanation(
    out: &mut dyn Write,
    engine: &Engine,
    outcome: &EvalOutcome,
) -> io::Result<()> {
    if outcome.cache_hit {
        writeln!(out, "  principals from caching edge")?;
    }
    let pm = engine.principal_matching().rules();
    for &i in &outcome.matched_rules {
        writeln!(out, "  matched {i}: {}", pm[i])?;
    }
    let auth = &engine.authorization().rules;
    for &i in &outcome.applicable_rules {
        writeln!(out, "  applicable {i}: {}", auth[i])?;
    }
    writeln!(
        out,
        "  decisions {} by {}",
        outcome.decision_set,
        engine.config().crs
    )
}

/// Streams one result line per request line. Blank and `#` lines are
/// skipped; malformed lines and unknown nodes produce an `ERROR` line and a
/// final status of 2.
fn batch(
    engine: &mut Engine,
    input: Box<dyn BufRead>,
    out: &mut dyn Write,
    metrics: bool,
) -> Result<i32, Failure> {
    let mut status = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let content = line.find('#').map_or(line.as_str(), |c| &line[..c]).trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        let result = match words.as_slice() {
            [s, o, a] => engine
                .evaluate(&Request::new(*s, *o, *a))
                .map(|outcome| result_line(&outcome, metrics))
                .map_err(|e| e.to_string()),
            _ => Err(format!("line {}: expected `subject object action`", i + 1)),
        };
        match result {
            Ok(l) => writeln!(out, "{l}")?,
            Err(message) => {
                status = EXIT_USAGE;
                writeln!(out, "ERROR {message}")?;
            }
        }
        out.flush()?;
    }
    Ok(status)
}

fn save(docs: &Docs, engine: &Engine, before: u64, dry_run: bool) -> Result<(), Failure> {
    if dry_run || engine.graph().revision() == before {
        return Ok(());
    }
    write_atomic(&docs.graph, &serialize_graph(engine.graph(), true))
}

/// Writes through a temporary file in the same directory and renames it
/// over `path`.
fn write_atomic(path: &Path, text: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: io::Error| usage(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(text.as_bytes()).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn load_policy(path: &Path) -> Result<rppm_core::policy::PolicySet, Failure> {
    read_text(path).and_then(|t| parse_policy(&t)).map_err(|e| {
        Failure::from(Error::InFile {
            path: path.display().to_string(),
            source: Box::new(e),
        })
    })
}

fn generate(kind: GenCommand, out: &mut dyn Write) -> Result<i32, Failure> {
    let (io, generated) = match kind {
        GenCommand::Sod {
            io,
            object,
            actions,
            basic,
            principals,
        } => {
            let base = load_policy(&io.policy)?;
            let refs: Vec<&str> = actions.iter().map(String::as_str).collect();
            let spec = match (basic, principals.as_slice()) {
                (true, []) => SodSpec::basic(&object, &refs, "p_seen"),
                (true, [seen]) => SodSpec::basic(&object, &refs, seen),
                (true, _) => return Err(usage("--basic takes a single principal")),
                (false, []) => SodSpec::general(&object, &refs),
                (false, names) => SodSpec {
                    object,
                    actions,
                    mode: SodMode::General {
                        principals: names.to_vec(),
                    },
                },
            };
            (io, generate_sod(&base, &spec)?)
        }
        GenCommand::Cw {
            io,
            config,
            paths,
            principal,
        } => {
            let base = load_policy(&io.policy)?;
            let mut cw = match &config {
                Some(p) => {
                    read_text(p)
                        .and_then(|t| parse_config(&t))
                        .map_err(|e| Error::InFile {
                            path: p.display().to_string(),
                            source: Box::new(e),
                        })?
                        .cw
                }
                None => ChineseWallConfig::default(),
            };
            if !paths.is_empty() {
                cw.paths = paths;
            }
            (io, generate_chinese_wall(&base, &cw, &principal)?)
        }
    };
    let text = serialize_policy(&generated);
    match io.output {
        Some(path) => write_atomic(&path, &text)?,
        None => write!(out, "{text}")?,
    }
    Ok(0)
}
