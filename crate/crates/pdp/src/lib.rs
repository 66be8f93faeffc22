//! A policy decision point speaking a line protocol.
//!
//! Each request line is a verb followed by space-separated arguments; each
//! gets exactly one response line, `OK ...` or `ERR <code> <message>`.
//!
//! | verb | arguments | success |
//! |------|-----------|---------|
//! | `EVAL` | `s o a` | `OK ALLOW\|DENY mp=[..] cached=0\|1 n=<int> e=<int>` |
//! | `ADD-EDGE`, `DEL-EDGE` | `src label dst` | `OK` |
//! | `PRECACHE` | `subject <k> <target>...` or `object <object> <subject>...` | `OK inserted=<k>` |
//! | `STATS` | | `OK size=.. hits=.. misses=.. evictions=.. purged=.. evaluations=..` |
//! | `RELOAD-POLICY` | `path` | `OK` |
//! | `SHUTDOWN` | | `OK`, then the server stops |
//!
//! Blank lines and lines starting with `#` are ignored without a response.
//! All verbs run on a single engine behind one lock, so requests from
//! concurrent connections are applied one at a time.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread;

use rppm_core::cache::PrecacheStrategy;
use rppm_core::formats::{parse_policy, read_text, DocumentPaths, DocumentSet};
use rppm_core::path::is_identifier;
use rppm_core::{Engine, Error, Request};

/// Error codes of `ERR` responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    UnknownNode,
    Parse,
    WellFormed,
    Unsupported,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::UnknownNode => "UNKNOWN-NODE",
            ErrorCode::Parse => "PARSE",
            ErrorCode::WellFormed => "WELLFORMED",
            ErrorCode::Unsupported => "UNSUPPORTED",
        }
    }

    fn of(err: &Error) -> Self {
        match err.root() {
            Error::UnknownNode(_) => ErrorCode::UnknownNode,
            Error::Parse(_) | Error::Io { .. } => ErrorCode::Parse,
            Error::Config(_) => ErrorCode::Unsupported,
            _ => ErrorCode::WellFormed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub line: String,
    /// Set after `SHUTDOWN`.
    pub close: bool,
}

impl Response {
    fn ok(line: impl Into<String>) -> Self {
        Self {
            line: line.into(),
            close: false,
        }
    }

    fn err(code: ErrorCode, message: impl std::fmt::Display) -> Self {
        Self::ok(format!("ERR {} {message}", code.as_str()))
    }
}

/// The state behind one decision point.
#[derive(Debug)]
pub struct Service {
    engine: Engine,
    policy_dir: PathBuf,
    stopped: bool,
}

impl Service {
    /// `policy_dir` anchors relative `RELOAD-POLICY` paths.
    pub fn new(engine: Engine, policy_dir: impl Into<PathBuf>) -> Self {
        Self {
            engine,
            policy_dir: policy_dir.into(),
            stopped: false,
        }
    }

    pub fn load(paths: &DocumentPaths) -> rppm_core::Result<Self> {
        let engine = DocumentSet::load(paths)?.into_engine()?;
        let dir = paths.policy.parent().unwrap_or(Path::new("")).to_path_buf();
        Ok(Self::new(engine, dir))
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn into_engine(self) -> Engine {
        self.engine
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    /// Handles one request line. Returns `None` for blank and comment lines.
    pub fn handle_line(&mut self, line: &str) -> Option<Response> {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        let mut words = line.split_whitespace();
        let verb = words.next()?;
        let args: Vec<&str> = words.collect();
        Some(match verb {
            "EVAL" => self.eval(&args),
            "ADD-EDGE" => self.mutate(&args, true),
            "DEL-EDGE" => self.mutate(&args, false),
            "PRECACHE" => self.precache(&args),
            "STATS" => self.stats(&args),
            "RELOAD-POLICY" => self.reload(&args),
            "SHUTDOWN" if args.is_empty() => {
                self.stopped = true;
                Response {
                    line: "OK".into(),
                    close: true,
                }
            }
            "SHUTDOWN" => arity("SHUTDOWN", 0),
            other => Response::err(ErrorCode::Unsupported, format!("unknown verb `{other}`")),
        })
    }

    fn eval(&mut self, args: &[&str]) -> Response {
        let [s, o, a] = args else {
            return arity("EVAL", 3);
        };
        match self.engine.evaluate(&Request::new(*s, *o, *a)) {
            Ok(out) => Response::ok(format!(
                "OK {} mp=[{}] cached={} n={} e={}",
                out.decision.to_string().to_uppercase(),
                out.matched_principals.join(","),
                u8::from(out.cache_hit),
                out.metrics.nodes_visited,
                out.metrics.edges_considered,
            )),
            Err(e) => error(&e),
        }
    }

    fn mutate(&mut self, args: &[&str], add: bool) -> Response {
        let verb = if add { "ADD-EDGE" } else { "DEL-EDGE" };
        let [src, label, dst] = args else {
            return arity(verb, 3);
        };
        if !is_identifier(label) {
            let overlay = label.starts_with('@')
                || label.starts_with('[')
                || label.starts_with("allow!")
                || label.starts_with("deny!");
            return if overlay {
                Response::err(
                    ErrorCode::Unsupported,
                    format!("`{label}` edges are written by the engine only"),
                )
            } else {
                Response::err(ErrorCode::Parse, format!("invalid label `{label}`"))
            };
        }
        let result = if add {
            self.engine.add_relationship(src, label, dst)
        } else {
            self.engine.remove_relationship(src, label, dst)
        };
        match result {
            Ok(_) => Response::ok("OK"),
            Err(e) => error(&e),
        }
    }

    fn precache(&mut self, args: &[&str]) -> Response {
        let strategy = match args {
            ["subject", k, targets @ ..] if !targets.is_empty() => match k.parse() {
                Ok(recent_k) => PrecacheStrategy::SubjectFocused {
                    recent_k,
                    targets: targets.iter().map(|t| t.to_string()).collect(),
                },
                Err(_) => {
                    return Response::err(ErrorCode::Parse, format!("invalid count `{k}`"));
                }
            },
            ["object", object, subjects @ ..] if !subjects.is_empty() => {
                PrecacheStrategy::ObjectFocused {
                    objects: vec![object.to_string()],
                    subjects: subjects.iter().map(|s| s.to_string()).collect(),
                }
            }
            _ => {
                return Response::err(
                    ErrorCode::Parse,
                    "usage: PRECACHE subject <k> <target>... | PRECACHE object <object> <subject>...",
                );
            }
        };
        match self.engine.precache(&strategy, usize::MAX) {
            Ok(k) => Response::ok(format!("OK inserted={k}")),
            Err(e) => error(&e),
        }
    }

    fn stats(&self, args: &[&str]) -> Response {
        if !args.is_empty() {
            return arity("STATS", 0);
        }
        let s = self.engine.cache_stats();
        Response::ok(format!(
            "OK size={} hits={} misses={} evictions={} purged={} evaluations={}",
            s.size,
            s.hits,
            s.misses,
            s.evictions,
            s.purged,
            self.engine.sequence()
        ))
    }

    fn reload(&mut self, args: &[&str]) -> Response {
        let [path] = args else {
            return arity("RELOAD-POLICY", 1);
        };
        let text = match read_text(&self.policy_dir.join(path)) {
            Ok(t) => t,
            Err(Error::Io { source, .. }) => {
                return Response::err(ErrorCode::Parse, format!("{path}: {source}"));
            }
            Err(e) => return error(&e),
        };
        match parse_policy(&text).and_then(|p| self.engine.reload_policy(p)) {
            Ok(_) => Response::ok("OK"),
            Err(e) => Response::err(ErrorCode::of(&e), format!("{path}: {e}")),
        }
    }
}

fn arity(verb: &str, n: usize) -> Response {
    Response::err(
        ErrorCode::Parse,
        format!("{verb} takes {n} argument{}", if n == 1 { "" } else { "s" }),
    )
}

fn error(err: &Error) -> Response {
    Response::err(ErrorCode::of(err), err)
}

/// Serves one request stream, e.g. stdin/stdout, until it ends or a
/// `SHUTDOWN` is handled.
pub fn serve_stream<R: BufRead, W: Write>(
    service: &mut Service,
    input: R,
    mut output: W,
) -> io::Result<()> {
    for line in input.lines() {
        let Some(response) = service.handle_line(&line?) else {
            continue;
        };
        writeln!(output, "{}", response.line)?;
        output.flush()?;
        if response.close {
            break;
        }
    }
    Ok(())
}

fn lock(service: &Mutex<Service>) -> MutexGuard<'_, Service> {
    service
        .lock()
        .unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn handle_connection(service: &Mutex<Service>, stream: TcpStream) -> io::Result<bool> {
    stream.set_nodelay(true)?;
    let reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    for line in reader.lines() {
        let line = line?;
        let response = {
            let mut guard = lock(service);
            if guard.is_stopped() {
                return Ok(false);
            }
            guard.handle_line(&line)
        };
        let Some(response) = response else { continue };
        writer.write_all(format!("{}\n", response.line).as_bytes())?;
        if response.close {
            writer.shutdown(Shutdown::Both).ok();
            return Ok(true);
        }
    }
    Ok(false)
}

/// Accepts connections on `listener` until a client sends `SHUTDOWN`, then
/// closes the remaining connections and returns the service.
pub fn serve(service: Service, listener: TcpListener) -> io::Result<Service> {
    let addr = listener.local_addr()?;
    let service = Arc::new(Mutex::new(service));
    let open: Arc<Mutex<Vec<TcpStream>>> = Arc::default();
    let mut workers = Vec::new();
    for stream in listener.incoming() {
        if lock(&service).is_stopped() {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(_) => continue,
        };
        open.lock().unwrap().push(stream.try_clone()?);
        let service = Arc::clone(&service);
        workers.push(thread::spawn(move || {
            if let Ok(true) = handle_connection(&service, stream) {
                // Unblock the accept loop so it notices the shutdown.
                let _ = TcpStream::connect(addr);
            }
        }));
    }
    for stream in open.lock().unwrap().iter() {
        let _ = stream.shutdown(Shutdown::Both);
    }
    for w in workers {
        let _ = w.join();
    }
    let service = Arc::try_unwrap(service)
        .map_err(|_| io::Error::other("connection handler still running"))?;
    Ok(service.into_inner().unwrap_or_else(|p| p.into_inner()))
}
