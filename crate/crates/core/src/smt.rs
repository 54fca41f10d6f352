//! Translation of a tree grammar into SMT-LIB constraints over the
//! uninterpreted functions `inhabitant` (vertex label) and `ty` (vertex
//! nonterminal).
//!
//! Every production rule becomes
//! `(ite (= (ty i) N) (xor alt₁ … altₘ) true)`, where an alternative
//! `c(β₁, …, βₙ)` forces `n` application nodes down the left spine from `i`,
//! the combinator index at the bottom, and `ty` of each right child to the
//! argument nonterminal. Quantified scripts wrap each rule in
//! `(forall ((i Int)) …)`; finitized scripts instantiate it at concrete heap
//! addresses up to a depth bound.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::grammar::{level, Nonterminal, Rule, TreeGrammar, Vertex};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SmtError {
    #[error("unknown combinator `{0}`")]
    UnknownCombinator(String),
    #[error("unknown nonterminal `{0}`")]
    UnknownNonterminal(String),
    #[error("nonterminal `{0}` has no alternatives")]
    EmptyAlternatives(String),
    #[error("index {index} is assigned to both `{first}` and `{second}`")]
    IndexCollision {
        index: u32,
        first: String,
        second: String,
    },
    #[error("indices are not contiguous from 1: {0}")]
    NonContiguous(String),
    #[error("index override names `{0}`, which does not occur in the grammar")]
    OverrideUnknown(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("use-count constraints need finitized mode")]
    UseCountQuantified,
    #[error("raw constraint contains a quantifier, which finitized mode forbids: {0}")]
    RawQuantifier(String),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("finitization depth {0} is out of range (1..=60)")]
    Depth(u32),
}

// ---------------------------------------------------------------------------
// Tables

/// Combinator names numbered `1..=n`; `0` labels application nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CombinatorTable {
    to_index: BTreeMap<String, u32>,
    to_name: Vec<String>,
}

impl CombinatorTable {
    /// Numbers the names in iteration order, skipping repeats.
    pub fn from_names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let mut t = CombinatorTable::default();
        for n in names {
            let n = n.into();
            if !t.to_index.contains_key(&n) {
                t.to_name.push(n.clone());
                t.to_index.insert(n, t.to_name.len() as u32);
            }
        }
        t
    }

    pub fn index(&self, name: &str) -> Option<u32> {
        self.to_index.get(name).copied()
    }

    pub fn name(&self, index: u32) -> Option<&str> {
        let i = usize::try_from(index).ok()?.checked_sub(1)?;
        self.to_name.get(i).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.to_name.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_name.is_empty()
    }

    /// `(index, name)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.to_name
            .iter()
            .enumerate()
            .map(|(i, n)| (i as u32 + 1, n.as_str()))
    }

    pub fn to_index(&self) -> &BTreeMap<String, u32> {
        &self.to_index
    }
}

/// Nonterminals numbered `1..=m`, the values of `ty`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NonterminalTable {
    to_id: BTreeMap<Nonterminal, u32>,
    to_nt: Vec<Nonterminal>,
}

impl NonterminalTable {
    pub fn from_names<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let t = CombinatorTable::from_names(names);
        NonterminalTable {
            to_id: t.to_index,
            to_nt: t.to_name,
        }
    }

    pub fn id(&self, nt: &str) -> Option<u32> {
        self.to_id.get(nt).copied()
    }

    pub fn nonterminal(&self, id: u32) -> Option<&str> {
        let i = usize::try_from(id).ok()?.checked_sub(1)?;
        self.to_nt.get(i).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.to_nt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.to_nt.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.to_nt
            .iter()
            .enumerate()
            .map(|(i, n)| (i as u32 + 1, n.as_str()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tables {
    pub combinators: CombinatorTable,
    pub nonterminals: NonterminalTable,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IndexOverrides {
    pub combinators: BTreeMap<String, u32>,
    pub nonterminals: BTreeMap<Nonterminal, u32>,
}

/// Reads overrides, one per line: `<combinator> <index>` or
/// `ty <nonterminal> <index>` (the nonterminal may contain spaces).
pub fn parse_index_overrides(text: &str) -> Result<IndexOverrides, SmtError> {
    let mut out = IndexOverrides::default();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: &str| SmtError::Syntax {
            line: no + 1,
            message: message.to_string(),
        };
        let (name, index) = line
            .rsplit_once(char::is_whitespace)
            .ok_or_else(|| syntax("expected `<name> <index>`"))?;
        let index: u32 = index
            .parse()
            .map_err(|_| syntax("index must be a positive integer"))?;
        if index == 0 {
            return Err(syntax("index 0 is reserved for application nodes"));
        }
        let name = name.trim();
        let (map, key) = match name.strip_prefix("ty ") {
            Some(nt) => (&mut out.nonterminals, nt.trim()),
            None => (&mut out.combinators, name),
        };
        if map.insert(key.to_string(), index).is_some() {
            return Err(syntax(&format!("`{key}` is assigned twice")));
        }
    }
    Ok(out)
}

/// Default numbering follows first appearance in the grammar (breadth-first
/// from the start symbol). Overridden names keep their index and the rest
/// fill the free indices in order.
pub fn assign_tables(g: &TreeGrammar, overrides: Option<&IndexOverrides>) -> Result<Tables, SmtError> {
    let combinators = g.combinators_in_order();
    let mut nonterminals = vec![g.start.clone()];
    for nt in g.nonterminals_in_order() {
        if nt != g.start {
            nonterminals.push(nt);
        }
    }
    let empty = IndexOverrides::default();
    let overrides = overrides.unwrap_or(&empty);
    let c = fill(&combinators, &overrides.combinators)?;
    let n = fill(&nonterminals, &overrides.nonterminals)?;
    Ok(Tables {
        combinators: c,
        nonterminals: NonterminalTable {
            to_id: n.to_index,
            to_nt: n.to_name,
        },
    })
}

fn fill(names: &[String], fixed: &BTreeMap<String, u32>) -> Result<CombinatorTable, SmtError> {
    let mut by_index: BTreeMap<u32, &str> = BTreeMap::new();
    for (name, &index) in fixed {
        if !names.contains(name) {
            return Err(SmtError::OverrideUnknown(name.clone()));
        }
        if let Some(first) = by_index.insert(index, name) {
            return Err(SmtError::IndexCollision {
                index,
                first: first.to_string(),
                second: name.clone(),
            });
        }
    }
    let mut next = 1;
    for name in names.iter().filter(|n| !fixed.contains_key(*n)) {
        while by_index.contains_key(&next) {
            next += 1;
        }
        by_index.insert(next, name);
    }
    let indices: Vec<u32> = by_index.keys().copied().collect();
    if indices.iter().enumerate().any(|(i, &x)| x != i as u32 + 1) {
        return Err(SmtError::NonContiguous(format!("{indices:?}")));
    }
    Ok(CombinatorTable::from_names(by_index.into_values()))
}

// ---------------------------------------------------------------------------
// Addresses

#[derive(Debug, Clone)]
enum Addr {
    Sym(String),
    Num(Vertex),
}

impl Addr {
    fn left(&self) -> Addr {
        match self {
            Addr::Sym(s) => Addr::Sym(format!("(leftChild {s})")),
            Addr::Num(v) => Addr::Num(2 * v),
        }
    }

    fn right(&self) -> Addr {
        match self {
            Addr::Sym(s) => Addr::Sym(format!("(rightChild {s})")),
            Addr::Num(v) => Addr::Num(2 * v + 1),
        }
    }
}

impl fmt::Display for Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Addr::Sym(s) => f.write_str(s),
            Addr::Num(v) => write!(f, "{v}"),
        }
    }
}

fn inhabitant_eq(a: &Addr, label: impl fmt::Display) -> String {
    format!("(= (inhabitant {a}) {label})")
}

// ---------------------------------------------------------------------------
// Rule translation

fn combinator_expr(c: &str, args: &[Nonterminal], tables: &Tables, root: &Addr) -> Result<String, SmtError> {
    let index = tables
        .combinators
        .index(c)
        .ok_or_else(|| SmtError::UnknownCombinator(c.to_string()))?;
    let mut constraints = Vec::new();
    let mut current = root.clone();
    for p in args.iter().rev() {
        let id = tables
            .nonterminals
            .id(p)
            .ok_or_else(|| SmtError::UnknownNonterminal(p.clone()))?;
        constraints.push(inhabitant_eq(&current, 0));
        constraints.push(format!("(= (ty {}) {id})", current.right()));
        current = current.left();
    }
    let head = inhabitant_eq(&current, index);
    if constraints.is_empty() {
        return Ok(head);
    }
    Ok(format!("(and {head} {})", constraints.join(" ")))
}

/// The conjunction forcing the tree at vertex `root` (an SMT term such as
/// `i`) to be `c` applied to arguments of the given nonterminals.
pub fn translate_combinator(c: &str, args: &[Nonterminal], tables: &Tables, root: &str) -> Result<String, SmtError> {
    combinator_expr(c, args, tables, &Addr::Sym(root.to_string()))
}

fn choice(exprs: Vec<String>, exactly_one: bool) -> String {
    if exprs.len() == 1 {
        return exprs.into_iter().next().unwrap_or_default();
    }
    if !exactly_one {
        return format!("(xor {})", exprs.join(" "));
    }
    let mut parts = vec![format!("(or {})", exprs.join(" "))];
    for (a, b) in (0..exprs.len()).flat_map(|a| (a + 1..exprs.len()).map(move |b| (a, b))) {
        parts.push(format!("(not (and {} {}))", exprs[a], exprs[b]));
    }
    format!("(and {})", parts.join(" "))
}

fn rule_expr(
    nt: &str,
    alternatives: &BTreeSet<Rule>,
    tables: &Tables,
    root: &Addr,
    exactly_one: bool,
) -> Result<String, SmtError> {
    let id = tables
        .nonterminals
        .id(nt)
        .ok_or_else(|| SmtError::UnknownNonterminal(nt.to_string()))?;
    if alternatives.is_empty() {
        return Err(SmtError::EmptyAlternatives(nt.to_string()));
    }
    let exprs = alternatives
        .iter()
        .map(|r| combinator_expr(&r.combinator, &r.args, tables, root))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(format!("(ite (= (ty {root}) {id}) {} true)", choice(exprs, exactly_one)))
}

/// `(ite (= (ty root) N) (xor …) true)` for the alternatives of `nt`.
pub fn translate_production_rule(
    nt: &str,
    alternatives: &BTreeSet<Rule>,
    tables: &Tables,
    root: &str,
) -> Result<String, SmtError> {
    rule_expr(nt, alternatives, tables, &Addr::Sym(root.to_string()), false)
}

// ---------------------------------------------------------------------------
// Scripts

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Quantified,
    Finitized { depth: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranslateOptions {
    pub mode: Mode,
    /// Replace `xor` by `or` plus pairwise exclusion.
    pub exactly_one: bool,
    /// In finitized mode, forbid application nodes at the deepest level so
    /// that no word reaches past the instantiated vertices.
    pub boundary_guard: bool,
    /// In finitized mode, instantiate each rule only at vertices where its
    /// nonterminal can occur, starting from the goal at the root.
    pub sparse: bool,
}

impl TranslateOptions {
    pub fn quantified() -> Self {
        TranslateOptions {
            mode: Mode::Quantified,
            exactly_one: false,
            boundary_guard: true,
            sparse: false,
        }
    }

    pub fn finitized(depth: u32) -> Self {
        TranslateOptions {
            mode: Mode::Finitized { depth },
            ..Self::quantified()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmtScript {
    pub logic: String,
    pub comments: Vec<String>,
    pub definitions: Vec<String>,
    pub declarations: Vec<String>,
    pub assertions: Vec<String>,
    pub root: String,
    pub constraints: Vec<String>,
    pub mode: Mode,
    pub goal: Nonterminal,
    pub tables: Tables,
    /// Vertices whose labels are read back from a model.
    pub query_vertices: Vec<Vertex>,
    /// Vertices at which structural constraints are instantiated.
    pub constraint_vertices: Vec<Vertex>,
    occupancy_declared: bool,
}

impl SmtScript {
    /// Everything except the final `(check-sat)`.
    pub fn render_body(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("; ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&format!("(set-logic {})\n", self.logic));
        for line in self
            .definitions
            .iter()
            .chain(&self.declarations)
            .chain(&self.assertions)
            .chain(std::iter::once(&self.root))
            .chain(&self.constraints)
        {
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = self.render_body();
        out.push_str("(check-sat)\n");
        out
    }

    pub fn depth(&self) -> Option<u32> {
        match self.mode {
            Mode::Quantified => None,
            Mode::Finitized { depth } => Some(depth),
        }
    }

    /// Compiles and appends structural constraints.
    pub fn add_constraints(&mut self, constraints: &[StructuralConstraint]) -> Result<(), SmtError> {
        let compiled = compile_constraints(constraints, self)?;
        if constraints
            .iter()
            .any(|c| matches!(c, StructuralConstraint::UseCount { .. }))
            && !self.occupancy_declared
        {
            self.declarations.push("(declare-fun occupied (Int) Bool)".into());
            self.constraints.extend(occupancy_definition(&self.constraint_vertices));
            self.occupancy_declared = true;
        }
        self.constraints.extend(compiled);
        Ok(())
    }
}

impl fmt::Display for SmtScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

fn occupancy_definition(vertices: &[Vertex]) -> Vec<String> {
    let mut out = vec!["(assert (occupied 1))".to_string()];
    for &v in vertices.iter().filter(|&&v| v > 1) {
        let p = v / 2;
        out.push(format!(
            "(assert (= (occupied {v}) (and (occupied {p}) (= (inhabitant {p}) 0))))"
        ));
    }
    out
}

/// Translates `g` with `goal` as the root nonterminal.
pub fn translate_grammar(
    g: &TreeGrammar,
    goal: &str,
    tables: &Tables,
    opts: &TranslateOptions,
) -> Result<SmtScript, SmtError> {
    let goal_id = tables
        .nonterminals
        .id(goal)
        .ok_or_else(|| SmtError::UnknownNonterminal(goal.to_string()))?;
    if goal != g.start && !g.rules.contains_key(goal) {
        return Err(SmtError::UnknownNonterminal(goal.to_string()));
    }
    if let Mode::Finitized { depth } = opts.mode {
        if !(1..=60).contains(&depth) {
            return Err(SmtError::Depth(depth));
        }
    }

    let mut comments = vec![format!("goal {goal_id}: {goal}")];
    for (i, name) in tables.combinators.iter() {
        comments.push(format!("combinator {i}: {name}"));
    }
    for (i, nt) in tables.nonterminals.iter() {
        comments.push(format!("nonterminal {i}: {nt}"));
    }

    let mut script = SmtScript {
        logic: match opts.mode {
            Mode::Quantified => "UFLIA".into(),
            Mode::Finitized { .. } => "QF_UFLIA".into(),
        },
        comments,
        definitions: vec![
            "(define-fun leftChild ((i Int)) Int (* 2 i))".into(),
            "(define-fun rightChild ((i Int)) Int (+ (* 2 i) 1))".into(),
        ],
        declarations: vec![
            "(declare-fun inhabitant (Int) Int)".into(),
            "(declare-fun ty (Int) Int)".into(),
        ],
        assertions: Vec::new(),
        root: format!("(assert (= (ty 1) {goal_id}))"),
        constraints: Vec::new(),
        mode: opts.mode,
        goal: goal.to_string(),
        tables: tables.clone(),
        query_vertices: Vec::new(),
        constraint_vertices: Vec::new(),
        occupancy_declared: false,
    };

    if g.rules.get(goal).is_none_or(BTreeSet::is_empty) {
        script.assertions.push("; the goal has no derivation".into());
        script.assertions.push("(assert false)".into());
    }

    let rules: Vec<(&Nonterminal, &BTreeSet<Rule>)> = tables
        .nonterminals
        .iter()
        .filter_map(|(_, nt)| g.rules.get_key_value(nt))
        .collect();

    match opts.mode {
        Mode::Quantified => {
            let i = Addr::Sym("i".into());
            for (nt, alts) in rules {
                let body = if alts.is_empty() {
                    format!("(not (= (ty i) {}))", id_of(tables, nt)?)
                } else {
                    rule_expr(nt, alts, tables, &i, opts.exactly_one)?
                };
                script.assertions.push(format!("(assert (forall ((i Int)) {body}))"));
            }
        }
        Mode::Finitized { depth } if opts.sparse => {
            let possible = possible_nonterminals(g, goal, depth);
            let mut mentioned: BTreeSet<Vertex> = BTreeSet::from([1]);
            for (&v, nts) in &possible {
                for nt in nts {
                    let alts = &g.rules[*nt];
                    if alts.is_empty() {
                        script
                            .assertions
                            .push(format!("(assert (not (= (ty {v}) {})))", id_of(tables, nt)?));
                        continue;
                    }
                    for r in alts {
                        let mut spine = v;
                        for _ in &r.args {
                            mentioned.insert(spine);
                            mentioned.insert(2 * spine + 1);
                            spine *= 2;
                        }
                        mentioned.insert(spine);
                    }
                    let body = rule_expr(nt, alts, tables, &Addr::Num(v), opts.exactly_one)?;
                    script.assertions.push(format!("(assert {body})"));
                }
            }
            if opts.boundary_guard {
                for &v in mentioned.iter().filter(|&&v| level(v) == depth) {
                    script.assertions.push(format!("(assert (not (= (inhabitant {v}) 0)))"));
                }
            }
            script.constraint_vertices = mentioned.iter().copied().filter(|&v| level(v) <= depth).collect();
            script.query_vertices = mentioned.into_iter().collect();
        }
        Mode::Finitized { depth } => {
            let last = (1u64 << (depth + 1)) - 1;
            for v in 1..=last {
                for (nt, alts) in &rules {
                    let body = if alts.is_empty() {
                        format!("(not (= (ty {v}) {}))", id_of(tables, nt)?)
                    } else {
                        rule_expr(nt, alts, tables, &Addr::Num(v), opts.exactly_one)?
                    };
                    script.assertions.push(format!("(assert {body})"));
                }
            }
            if opts.boundary_guard {
                for v in (1u64 << depth)..=last {
                    script.assertions.push(format!("(assert (not (= (inhabitant {v}) 0)))"));
                }
            }
            script.constraint_vertices = (1..=last).collect();
            script.query_vertices = (1..=(1u64 << (depth + 2)) - 1).collect();
        }
    }
    Ok(script)
}

fn id_of(tables: &Tables, nt: &str) -> Result<u32, SmtError> {
    tables
        .nonterminals
        .id(nt)
        .ok_or_else(|| SmtError::UnknownNonterminal(nt.to_string()))
}

/// For each vertex up to `depth`, the nonterminals that `ty` may take there
/// in a word rooted at `goal`.
fn possible_nonterminals<'g>(g: &'g TreeGrammar, goal: &str, depth: u32) -> BTreeMap<Vertex, BTreeSet<&'g Nonterminal>> {
    let mut possible: BTreeMap<Vertex, BTreeSet<&Nonterminal>> = BTreeMap::new();
    let Some((goal, _)) = g.rules.get_key_value(goal) else {
        return possible;
    };
    possible.entry(1).or_default().insert(goal);
    // Contributions only flow to larger addresses, so a vertex is final when
    // it is the smallest pending one.
    let mut pending: BTreeSet<Vertex> = BTreeSet::from([1]);
    while let Some(v) = pending.pop_first() {
        let nts: Vec<&Nonterminal> = possible[&v].iter().copied().collect();
        for nt in nts {
            for rule in &g.rules[nt] {
                let n = rule.args.len() as u32;
                if level(v) + n > depth {
                    continue;
                }
                let mut spine = v;
                for arg in rule.args.iter().rev() {
                    let at = 2 * spine + 1;
                    if let Some((key, _)) = g.rules.get_key_value(arg) {
                        possible.entry(at).or_default().insert(key);
                        pending.insert(at);
                    }
                    spine *= 2;
                }
            }
        }
    }
    possible
}

// ---------------------------------------------------------------------------
// Structural constraints

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructuralConstraint {
    /// The combinator does not occur at all.
    Forbid(String),
    /// The combinator only occurs unapplied.
    NeverApplied(String),
    /// The `position`-th argument (from 1) of the combinator is a leaf.
    LeafArgument { combinator: String, position: u32 },
    /// `outer` is never applied to a term headed by an applied `inner`.
    ForbidCompose { outer: String, inner: String },
    /// Occurrences of the combinator lie in `min..=max`.
    UseCount {
        combinator: String,
        min: u64,
        max: Option<u64>,
    },
    Raw(String),
}

impl fmt::Display for StructuralConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructuralConstraint::Forbid(c) => write!(f, "forbid {c}"),
            StructuralConstraint::NeverApplied(c) => write!(f, "never-applied {c}"),
            StructuralConstraint::LeafArgument { combinator, position } => {
                write!(f, "leaf-arg {combinator} {position}")
            }
            StructuralConstraint::ForbidCompose { outer, inner } => {
                write!(f, "forbid-compose {outer} {inner}")
            }
            StructuralConstraint::UseCount { combinator, min, max } => match max {
                Some(m) => write!(f, "use-count {combinator} {min} {m}"),
                None => write!(f, "use-count {combinator} {min} inf"),
            },
            StructuralConstraint::Raw(s) => write!(f, "raw {s}"),
        }
    }
}

pub fn parse_constraints(text: &str) -> Result<Vec<StructuralConstraint>, SmtError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| SmtError::Syntax { line: no + 1, message };
        let (directive, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        if directive == "raw" {
            if rest.is_empty() {
                return Err(err("`raw` needs an SMT-LIB command".into()));
            }
            check_balanced(rest).map_err(err)?;
            out.push(StructuralConstraint::Raw(rest.to_string()));
            continue;
        }
        let rest = rest.split('#').next().unwrap_or("");
        let words: Vec<&str> = rest.split_whitespace().collect();
        let expect = |n: usize, usage: &str| {
            if words.len() == n {
                Ok(())
            } else {
                Err(err(format!("usage: {usage}")))
            }
        };
        let number = |w: &str| {
            w.parse::<u64>()
                .map_err(|_| err(format!("`{w}` is not a natural number")))
        };
        let c = match directive {
            "forbid" => {
                expect(1, "forbid <combinator>")?;
                StructuralConstraint::Forbid(words[0].into())
            }
            "never-applied" => {
                expect(1, "never-applied <combinator>")?;
                StructuralConstraint::NeverApplied(words[0].into())
            }
            "leaf-arg" => {
                expect(2, "leaf-arg <combinator> <position>")?;
                let position = number(words[1])?;
                if position == 0 || position > u64::from(u32::MAX) {
                    return Err(err("argument positions start at 1".into()));
                }
                StructuralConstraint::LeafArgument {
                    combinator: words[0].into(),
                    position: position as u32,
                }
            }
            "forbid-compose" => {
                expect(2, "forbid-compose <outer> <inner>")?;
                StructuralConstraint::ForbidCompose {
                    outer: words[0].into(),
                    inner: words[1].into(),
                }
            }
            "use-count" => {
                expect(3, "use-count <combinator> <min> <max|inf>")?;
                let min = number(words[1])?;
                let max = match words[2] {
                    "inf" => None,
                    w => Some(number(w)?),
                };
                if max.is_some_and(|m| m < min) {
                    return Err(err("minimum exceeds maximum".into()));
                }
                StructuralConstraint::UseCount {
                    combinator: words[0].into(),
                    min,
                    max,
                }
            }
            other => return Err(err(format!("unknown directive `{other}`"))),
        };
        out.push(c);
    }
    Ok(out)
}

fn check_balanced(text: &str) -> Result<(), String> {
    let mut depth = 0i64;
    for ch in text.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err("unbalanced `)`".into());
        }
    }
    if depth != 0 {
        return Err("unbalanced `(`".into());
    }
    Ok(())
}

fn lookup(tables: &Tables, c: &str) -> Result<u32, SmtError> {
    tables
        .combinators
        .index(c)
        .ok_or_else(|| SmtError::UnknownCombinator(c.to_string()))
}

/// The constraint body at vertex `i`, for constraints that are local to one
/// vertex.
fn local_body(c: &StructuralConstraint, tables: &Tables, i: &Addr) -> Result<Option<String>, SmtError> {
    Ok(Some(match c {
        StructuralConstraint::Forbid(name) => {
            format!("(not {})", inhabitant_eq(i, lookup(tables, name)?))
        }
        StructuralConstraint::NeverApplied(name) => {
            format!("(not {})", inhabitant_eq(&i.left(), lookup(tables, name)?))
        }
        StructuralConstraint::LeafArgument { combinator, position } => {
            if *position == 0 {
                return Err(SmtError::InvalidConstraint("argument positions start at 1".into()));
            }
            let index = lookup(tables, combinator)?;
            let mut head = i.clone();
            for _ in 0..*position {
                head = head.left();
            }
            format!(
                "(ite {} (not {}) true)",
                inhabitant_eq(&head, index),
                inhabitant_eq(&i.right(), 0)
            )
        }
        StructuralConstraint::ForbidCompose { outer, inner } => format!(
            "(not (and {} {}))",
            inhabitant_eq(&i.left(), lookup(tables, outer)?),
            inhabitant_eq(&i.right().left(), lookup(tables, inner)?)
        ),
        _ => return Ok(None),
    }))
}

fn instantiate(body: impl Fn(&Addr) -> Result<String, SmtError>, script: &SmtScript) -> Result<Vec<String>, SmtError> {
    match script.mode {
        Mode::Quantified => Ok(vec![format!(
            "(assert (forall ((i Int)) {}))",
            body(&Addr::Sym("i".into()))?
        )]),
        Mode::Finitized { .. } => script
            .constraint_vertices
            .iter()
            .map(|&v| Ok(format!("(assert {})", body(&Addr::Num(v))?)))
            .collect(),
    }
}

/// Assertions for one constraint.
pub fn compile_constraint(c: &StructuralConstraint, script: &SmtScript) -> Result<Vec<String>, SmtError> {
    compile_constraints(std::slice::from_ref(c), script)
}

/// Assertions for a constraint list. All `ForbidCompose` pairs are merged
/// into one conjunction, placed where the first of them appears.
pub fn compile_constraints(constraints: &[StructuralConstraint], script: &SmtScript) -> Result<Vec<String>, SmtError> {
    let tables = &script.tables;
    let mut out = Vec::new();
    let mut composed_done = false;
    for c in constraints {
        match c {
            StructuralConstraint::ForbidCompose { .. } => {
                if composed_done {
                    continue;
                }
                composed_done = true;
                let pairs: Vec<&StructuralConstraint> = constraints
                    .iter()
                    .filter(|c| matches!(c, StructuralConstraint::ForbidCompose { .. }))
                    .collect();
                let body = |i: &Addr| -> Result<String, SmtError> {
                    let parts = pairs
                        .iter()
                        .map(|p| local_body(p, tables, i).map(Option::unwrap_or_default))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(if parts.len() == 1 {
                        parts.into_iter().next().unwrap_or_default()
                    } else {
                        format!("(and {})", parts.join(" "))
                    })
                };
                out.extend(instantiate(body, script)?);
            }
            StructuralConstraint::UseCount { combinator, min, max } => {
                if script.mode == Mode::Quantified {
                    return Err(SmtError::UseCountQuantified);
                }
                let index = lookup(tables, combinator)?;
                let terms: Vec<String> = script
                    .constraint_vertices
                    .iter()
                    .map(|v| format!("(ite (and (occupied {v}) (= (inhabitant {v}) {index})) 1 0)"))
                    .collect();
                let sum = match terms.len() {
                    0 => "0".to_string(),
                    1 => terms[0].clone(),
                    _ => format!("(+ {})", terms.join(" ")),
                };
                out.push(format!("(assert (<= {min} {sum}))"));
                if let Some(max) = max {
                    out.push(format!("(assert (<= {sum} {max}))"));
                }
            }
            StructuralConstraint::Raw(text) => {
                if script.mode != Mode::Quantified && has_quantifier(text) {
                    return Err(SmtError::RawQuantifier(text.clone()));
                }
                check_balanced(text).map_err(SmtError::InvalidConstraint)?;
                out.push(text.clone());
            }
            local => {
                out.extend(instantiate(
                    |i| local_body(local, tables, i).map(Option::unwrap_or_default),
                    script,
                )?);
            }
        }
    }
    Ok(out)
}

fn has_quantifier(text: &str) -> bool {
    text.split(|c: char| c.is_whitespace() || c == '(' || c == ')')
        .any(|w| w == "forall" || w == "exists")
}

/// Splits SMT-LIB text into parentheses and atoms, for comparisons that
/// ignore layout.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch == '(' || ch == ')' || ch.is_whitespace() {
            if !word.is_empty() {
                out.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                out.push(ch.to_string());
            }
        } else {
            word.push(ch);
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}
