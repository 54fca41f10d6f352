//! Driving an external SMT-LIB solver over standard input and output.
//!
//! Models are read back with batched `(get-value ...)` queries for
//! `inhabitant` and `ty` at the script's query vertices. Enumeration blocks
//! each model on its occupied vertices only, so junk at unvisited vertices
//! never produces the same term twice.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::grammar::{delayout, member, Term, TreeGrammar, Vertex, VertexLayout};
use crate::smt::{Mode, SmtScript, Tables};

pub const SOLVER_ENV: &str = "CLSSMT_SOLVER";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverConfig {
    /// Executable followed by its arguments.
    pub command: Vec<String>,
    pub timeout: Duration,
    pub value_query_batch: usize,
    /// Keep one solver context and add blocking clauses to it, instead of
    /// resetting and re-sending the whole script for every solution.
    pub incremental: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: vec!["z3".into(), "-in".into()],
            timeout: Duration::from_secs(60),
            value_query_batch: 256,
            incremental: false,
        }
    }
}

impl SolverConfig {
    /// The default configuration, with the command taken from
    /// `CLSSMT_SOLVER` when it is set.
    pub fn from_env() -> Self {
        let mut cfg = SolverConfig::default();
        if let Ok(cmd) = std::env::var(SOLVER_ENV) {
            if let Some(parsed) = parse_command(&cmd) {
                cfg.command = parsed;
            }
        }
        cfg
    }
}

/// Splits a command line on whitespace; `None` when it is blank.
pub fn parse_command(text: &str) -> Option<Vec<String>> {
    let words: Vec<String> = text.split_whitespace().map(String::from).collect();
    (!words.is_empty()).then_some(words)
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("cannot start solver `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("solver command is empty")]
    EmptyCommand,
    #[error("enumeration needs a finitized script")]
    NotFinitized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    /// `inhabitant` at each query vertex.
    pub layout: VertexLayout,
    /// `ty` at each query vertex.
    pub ty: BTreeMap<Vertex, i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveOutcome {
    Sat(Model),
    Unsat,
    Unknown(String),
    SolverError(String),
}

// ---------------------------------------------------------------------------
// S-expressions

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

impl Sexp {
    pub fn parse(text: &str) -> Result<Sexp, String> {
        let mut items = Sexp::parse_all(text)?;
        match items.len() {
            1 => Ok(items.remove(0)),
            0 => Err("empty response".into()),
            n => Err(format!("expected one s-expression, found {n}")),
        }
    }

    pub fn parse_all(text: &str) -> Result<Vec<Sexp>, String> {
        let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
        let mut chars = text.chars().peekable();
        while let Some(ch) = chars.next() {
            match ch {
                '(' => stack.push(Vec::new()),
                ')' => {
                    let done = stack.pop().ok_or("unbalanced `)`")?;
                    stack.last_mut().ok_or("unbalanced `)`")?.push(Sexp::List(done));
                }
                '"' => {
                    let mut s = String::from('"');
                    loop {
                        match chars.next() {
                            None => return Err("unterminated string".into()),
                            Some('"') if chars.peek() == Some(&'"') => {
                                chars.next();
                                s.push_str("\"\"");
                            }
                            Some('"') => break,
                            Some(c) => s.push(c),
                        }
                    }
                    s.push('"');
                    stack.last_mut().ok_or("unbalanced `)`")?.push(Sexp::Atom(s));
                }
                ';' => {
                    for c in chars.by_ref() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                c if c.is_whitespace() => {}
                c => {
                    let mut s = String::from(c);
                    while let Some(&n) = chars.peek() {
                        if n.is_whitespace() || n == '(' || n == ')' || n == '"' || n == ';' {
                            break;
                        }
                        s.push(n);
                        chars.next();
                    }
                    stack.last_mut().ok_or("unbalanced `)`")?.push(Sexp::Atom(s));
                }
            }
        }
        if stack.len() != 1 {
            return Err("unbalanced `(`".into());
        }
        Ok(stack.pop().unwrap_or_default())
    }

    /// Integer value: a numeral or `(- numeral)`.
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Sexp::Atom(a) => a.parse().ok(),
            Sexp::List(items) => match items.as_slice() {
                [Sexp::Atom(minus), inner] if minus == "-" => inner.as_int().map(|v| -v),
                _ => None,
            },
        }
    }
}

/// Net parenthesis depth of a line, ignoring string contents.
fn paren_delta(line: &str, in_string: &mut bool) -> i64 {
    let mut d = 0;
    for ch in line.chars() {
        match ch {
            '"' => *in_string = !*in_string,
            '(' if !*in_string => d += 1,
            ')' if !*in_string => d -= 1,
            _ => {}
        }
    }
    d
}

// ---------------------------------------------------------------------------
// Sessions

enum Response {
    Sexp(Sexp),
    Timeout,
    Closed,
    Garbled(String),
}

/// One running solver process.
pub struct SolverSession {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
    stderr: Arc<Mutex<String>>,
    cfg: SolverConfig,
}

impl SolverSession {
    pub fn start(cfg: &SolverConfig) -> Result<SolverSession, SolverError> {
        let (program, args) = cfg.command.split_first().ok_or(SolverError::EmptyCommand)?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|source| SolverError::Spawn {
                command: cfg.command.join(" "),
                source,
            })?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        if let Some(mut err) = child.stderr.take() {
            let sink = Arc::clone(&stderr);
            thread::spawn(move || {
                let mut buf = String::new();
                let _ = err.read_to_string(&mut buf);
                if let Ok(mut s) = sink.lock() {
                    s.push_str(&buf);
                }
            });
        }
        let stdin = child.stdin.take();
        Ok(SolverSession {
            child,
            stdin,
            lines: rx,
            stderr,
            cfg: cfg.clone(),
        })
    }

    fn send(&mut self, text: &str) -> Result<(), String> {
        let stdin = self.stdin.as_mut().ok_or("solver input is closed")?;
        stdin
            .write_all(text.as_bytes())
            .and_then(|_| {
                if !text.ends_with('\n') {
                    stdin.write_all(b"\n")?;
                }
                stdin.flush()
            })
            .map_err(|e| format!("writing to solver failed: {e}{}", self.stderr_excerpt()))
    }

    fn stderr_excerpt(&self) -> String {
        // Give the stderr thread a moment to collect output of a dying process.
        thread::sleep(Duration::from_millis(20));
        let s = self.stderr.lock().map(|s| s.clone()).unwrap_or_default();
        let s = s.trim();
        if s.is_empty() {
            String::new()
        } else {
            format!(" (stderr: {})", s.chars().take(500).collect::<String>())
        }
    }

    fn read(&mut self, deadline: Instant) -> Response {
        let mut text = String::new();
        let mut depth = 0i64;
        let mut in_string = false;
        loop {
            let now = Instant::now();
            if now >= deadline {
                return Response::Timeout;
            }
            match self.lines.recv_timeout(deadline - now) {
                Ok(line) => {
                    if text.is_empty() && line.trim().is_empty() {
                        continue;
                    }
                    depth += paren_delta(&line, &mut in_string);
                    text.push_str(&line);
                    text.push('\n');
                    if depth <= 0 && !in_string {
                        return match Sexp::parse(&text) {
                            Ok(s) => Response::Sexp(s),
                            Err(e) => Response::Garbled(format!("{e}: {}", text.trim())),
                        };
                    }
                }
                Err(RecvTimeoutError::Timeout) => return Response::Timeout,
                Err(RecvTimeoutError::Disconnected) => return Response::Closed,
            }
        }
    }

    /// Sends `(check-sat)` and reads the verdict. Errors reported by the
    /// solver for earlier commands surface here.
    fn check_sat(&mut self) -> Result<&'static str, SolveOutcome> {
        let deadline = Instant::now() + self.cfg.timeout;
        self.send("(check-sat)").map_err(SolveOutcome::SolverError)?;
        let mut errors = Vec::new();
        loop {
            match self.read(deadline) {
                Response::Sexp(Sexp::Atom(a)) if a == "sat" || a == "unsat" || a == "unknown" => {
                    if !errors.is_empty() {
                        return Err(SolveOutcome::SolverError(errors.join("; ")));
                    }
                    return Ok(match a.as_str() {
                        "sat" => "sat",
                        "unsat" => "unsat",
                        _ => "unknown",
                    });
                }
                Response::Sexp(Sexp::List(items))
                    if matches!(items.first(), Some(Sexp::Atom(e)) if e == "error") =>
                {
                    errors.push(
                        items
                            .get(1)
                            .map(|m| match m {
                                Sexp::Atom(s) => s.trim_matches('"').to_string(),
                                other => format!("{other:?}"),
                            })
                            .unwrap_or_default(),
                    );
                }
                Response::Sexp(other) => {
                    return Err(SolveOutcome::SolverError(format!("unexpected response {other:?}")));
                }
                Response::Timeout => {
                    self.kill();
                    return Err(SolveOutcome::Unknown("timeout".into()));
                }
                Response::Closed => {
                    let mut msg = String::from("solver exited");
                    if !errors.is_empty() {
                        msg.push_str(": ");
                        msg.push_str(&errors.join("; "));
                    }
                    msg.push_str(&self.stderr_excerpt());
                    return Err(SolveOutcome::SolverError(msg));
                }
                Response::Garbled(e) => return Err(SolveOutcome::SolverError(e)),
            }
        }
    }

    fn reason_unknown(&mut self) -> String {
        let deadline = Instant::now() + Duration::from_secs(5).min(self.cfg.timeout);
        if self.send("(get-info :reason-unknown)").is_err() {
            return "unknown".into();
        }
        match self.read(deadline) {
            Response::Sexp(Sexp::List(items)) => match items.as_slice() {
                [_, Sexp::Atom(reason)] => reason.trim_matches('"').to_string(),
                _ => "unknown".into(),
            },
            _ => "unknown".into(),
        }
    }

    /// Values of `(f v)` for each vertex.
    fn values(&mut self, f: &str, vertices: &[Vertex]) -> Result<BTreeMap<Vertex, i64>, String> {
        let mut out = BTreeMap::new();
        for chunk in vertices.chunks(self.cfg.value_query_batch.max(1)) {
            let terms: Vec<String> = chunk.iter().map(|v| format!("({f} {v})")).collect();
            self.send(&format!("(get-value ({}))", terms.join(" ")))?;
            let deadline = Instant::now() + self.cfg.timeout;
            let pairs = match self.read(deadline) {
                Response::Sexp(Sexp::List(pairs)) => pairs,
                Response::Sexp(other) => return Err(format!("unexpected get-value response {other:?}")),
                Response::Timeout => return Err("timeout while reading values".into()),
                Response::Closed => return Err(format!("solver exited{}", self.stderr_excerpt())),
                Response::Garbled(e) => return Err(e),
            };
            if pairs.len() != chunk.len() {
                return Err(format!("expected {} values, got {}: {pairs:?}", chunk.len(), pairs.len()));
            }
            for (v, pair) in chunk.iter().zip(pairs) {
                let value = match &pair {
                    Sexp::List(kv) if kv.len() == 2 => kv[1].as_int(),
                    _ => None,
                }
                .ok_or_else(|| format!("cannot read value {pair:?}"))?;
                out.insert(*v, value);
            }
        }
        Ok(out)
    }

    /// Checks the current assertions and reads a model on `sat`.
    fn solve_current(&mut self, vertices: &[Vertex]) -> SolveOutcome {
        match self.check_sat() {
            Err(outcome) => outcome,
            Ok("unsat") => SolveOutcome::Unsat,
            Ok("unknown") => SolveOutcome::Unknown(self.reason_unknown()),
            Ok(_) => {
                let read = self
                    .values("inhabitant", vertices)
                    .and_then(|inh| Ok((inh, self.values("ty", vertices)?)));
                match read {
                    Ok((assignments, ty)) => SolveOutcome::Sat(Model {
                        layout: VertexLayout { assignments },
                        ty,
                    }),
                    Err(e) => SolveOutcome::SolverError(e),
                }
            }
        }
    }

    fn kill(&mut self) {
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for SolverSession {
    fn drop(&mut self) {
        if let Some(stdin) = self.stdin.as_mut() {
            let _ = stdin.write_all(b"(exit)\n");
            let _ = stdin.flush();
        }
        self.stdin = None;
        let deadline = Instant::now() + Duration::from_millis(200);
        while Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(5));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Runs the script once. In quantified mode no vertices are queried unless
/// the caller fills `script.query_vertices` with a probe range.
pub fn solve(script: &SmtScript, cfg: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    let mut session = SolverSession::start(cfg)?;
    if let Err(e) = session.send(&script.render_body()) {
        return Ok(SolveOutcome::SolverError(e));
    }
    Ok(session.solve_current(&script.query_vertices))
}

// ---------------------------------------------------------------------------
// Decoding

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub reason: String,
    /// The part of the model that was walked from the root.
    pub region: VertexLayout,
}

/// Reads the term rooted at vertex 1 and checks that it is a word of `goal`
/// within the depth bound.
pub fn decode_and_verify(
    model: &Model,
    g: &TreeGrammar,
    goal: &str,
    tables: &Tables,
    max_depth: Option<u32>,
) -> Result<Term, Rejection> {
    let region = match model.layout.occupied_region() {
        Ok(r) => r,
        Err((region, reason)) => return Err(Rejection { reason, region }),
    };
    let reject = |reason: String| Rejection {
        reason,
        region: region.clone(),
    };
    let term = delayout(&region, &tables.combinators).map_err(|e| reject(e.to_string()))?;
    if let Some(d) = max_depth {
        if term.layout_depth() > d {
            return Err(reject(format!("term {term} is deeper than {d}")));
        }
    }
    match member(g, goal, &term) {
        Ok(true) => Ok(term),
        Ok(false) => Err(reject(format!("term {term} is not a word of {goal}"))),
        Err(e) => Err(reject(e.to_string())),
    }
}

fn label(v: i64) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

/// `(assert (not (and (= (inhabitant v) l) ...)))` over the region.
pub fn blocking_clause(region: &VertexLayout) -> String {
    let eqs: Vec<String> = region
        .assignments
        .iter()
        .map(|(v, l)| format!("(= (inhabitant {v}) {})", label(*l)))
        .collect();
    match eqs.len() {
        0 => "(assert false)".into(),
        1 => format!("(assert (not {}))", eqs[0]),
        _ => format!("(assert (not (and {})))", eqs.join(" ")),
    }
}

// ---------------------------------------------------------------------------
// Enumeration

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StopReason {
    Limit,
    Unsat,
    Unknown(String),
    SolverError(String),
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enumeration {
    pub terms: Vec<Term>,
    pub rejected: Vec<Rejection>,
    pub stop: StopReason,
    pub iterations: usize,
    pub solver_time: Duration,
}

/// Collects up to `k` distinct verified terms, blocking every model (verified
/// or not) before asking for the next. At most `max_iterations` solver calls
/// are made.
pub fn enumerate_solutions(
    script: &SmtScript,
    g: &TreeGrammar,
    goal: &str,
    cfg: &SolverConfig,
    k: usize,
    max_iterations: usize,
) -> Result<Enumeration, SolverError> {
    let Mode::Finitized { depth } = script.mode else {
        return Err(SolverError::NotFinitized);
    };
    let mut out = Enumeration {
        terms: Vec::new(),
        rejected: Vec::new(),
        stop: StopReason::Limit,
        iterations: 0,
        solver_time: Duration::ZERO,
    };
    if k == 0 {
        return Ok(out);
    }
    let body = script.render_body();
    let mut blocking: Vec<String> = Vec::new();
    let mut session = SolverSession::start(cfg)?;
    if cfg.incremental {
        if let Err(e) = session.send(&body) {
            out.stop = StopReason::SolverError(e);
            return Ok(out);
        }
    }
    loop {
        if out.iterations >= max_iterations {
            out.stop = StopReason::MaxIterations;
            break;
        }
        out.iterations += 1;
        let started = Instant::now();
        if !cfg.incremental {
            let mut text = String::from("(reset)\n");
            text.push_str(&body);
            for b in &blocking {
                text.push_str(b);
                text.push('\n');
            }
            if let Err(e) = session.send(&text) {
                out.stop = StopReason::SolverError(e);
                break;
            }
        }
        let outcome = session.solve_current(&script.query_vertices);
        out.solver_time += started.elapsed();
        let model = match outcome {
            SolveOutcome::Sat(m) => m,
            SolveOutcome::Unsat => {
                out.stop = StopReason::Unsat;
                break;
            }
            SolveOutcome::Unknown(r) => {
                out.stop = StopReason::Unknown(r);
                break;
            }
            SolveOutcome::SolverError(e) => {
                out.stop = StopReason::SolverError(e);
                break;
            }
        };
        let region = match decode_and_verify(&model, g, goal, &script.tables, Some(depth)) {
            Ok(term) => {
                let region = crate::grammar::layout(&term, &script.tables.combinators)
                    .unwrap_or_else(|_| model.layout.clone());
                if !out.terms.contains(&term) {
                    out.terms.push(term);
                }
                region
            }
            Err(rejection) => {
                let region = rejection.region.clone();
                out.rejected.push(rejection);
                region
            }
        };
        if region.assignments.is_empty() {
            out.stop = StopReason::SolverError("model has no root label".into());
            break;
        }
        let clause = blocking_clause(&region);
        if cfg.incremental {
            if let Err(e) = session.send(&clause) {
                out.stop = StopReason::SolverError(e);
                break;
            }
        }
        blocking.push(clause);
        if out.terms.len() >= k {
            out.stop = StopReason::Limit;
            break;
        }
    }
    Ok(out)
}
