//! Labyrinth benchmark: inhabitation, translation and the first solution on
//! a generated maze, with wall-clock time per phase.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::grammar::{member, Term};
use crate::inhabitation::{inhabit, prune, InhabitationError, InhabitationRequest};
use crate::maze::Maze;
use crate::smt::{assign_tables, translate_grammar, SmtError, TranslateOptions};
use crate::solver::{enumerate_solutions, SolverConfig, SolverError, StopReason};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Inhabitation(#[from] InhabitationError),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseTimes {
    pub inhabit_ms: f64,
    pub prune_ms: f64,
    pub translate_ms: f64,
    pub solve_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub maze: String,
    pub nonterminals: usize,
    pub rules: usize,
    /// Finitization depth, the smallest depth of any word.
    pub depth: Option<u32>,
    pub assertions: usize,
    /// `solved`, `unsat` (no path exists), `unknown` or `error`.
    pub status: String,
    pub detail: Option<String>,
    pub solution: Option<String>,
    pub times: PhaseTimes,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

pub fn run_bench(maze: &Maze, cfg: &SolverConfig) -> Result<BenchReport, BenchError> {
    let repo = maze.repository();
    let goal = maze.goal_type();

    let t = Instant::now();
    let full = inhabit(&InhabitationRequest {
        repo: &repo,
        goal: goal.clone(),
    })?;
    let inhabit_time = t.elapsed();

    let t = Instant::now();
    let g = prune(&full);
    let prune_time = t.elapsed();

    let mut report = BenchReport {
        width: maze.width,
        height: maze.height,
        maze: maze.to_string(),
        nonterminals: g.rules.len(),
        rules: g.rule_count(),
        depth: None,
        assertions: 0,
        status: "unsat".into(),
        detail: None,
        solution: None,
        times: PhaseTimes {
            inhabit_ms: ms(inhabit_time),
            prune_ms: ms(prune_time),
            translate_ms: 0.0,
            solve_ms: 0.0,
        },
    };
    if g.is_empty() {
        report.detail = Some("the goal is unreachable".into());
        return Ok(report);
    }
    let depth = g
        .min_depth(&g.start)
        .ok()
        .flatten()
        .expect("a non-empty pruned grammar has a word");
    report.depth = Some(depth);

    let t = Instant::now();
    let tables = assign_tables(&g, None)?;
    let opts = TranslateOptions {
        sparse: true,
        ..TranslateOptions::finitized(depth.max(1))
    };
    let script = translate_grammar(&g, &g.start, &tables, &opts)?;
    report.times.translate_ms = ms(t.elapsed());
    report.assertions = script.assertions.len();

    let t = Instant::now();
    let found = enumerate_solutions(&script, &g, &g.start, cfg, 1, 64)?;
    report.times.solve_ms = ms(t.elapsed());
    match (found.terms.first(), found.stop) {
        (Some(term), _) => {
            debug_assert!(member(&g, &g.start, term).unwrap_or(false));
            report.status = "solved".into();
            report.solution = Some(term.to_string());
        }
        (None, StopReason::Unsat) => {
            report.status = "unsat".into();
            report.detail = Some("no word within the depth bound".into());
        }
        (None, StopReason::Unknown(r)) => {
            report.status = "unknown".into();
            report.detail = Some(r);
        }
        (None, other) => {
            report.status = "error".into();
            report.detail = Some(format!("{other:?}"));
        }
    }
    Ok(report)
}

/// Number of moves in a labyrinth solution term.
pub fn path_length(t: &Term) -> usize {
    t.size() - 1
}
