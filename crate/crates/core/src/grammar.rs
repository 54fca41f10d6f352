//! Normalized regular tree grammars and applicative terms.
//!
//! A [`TreeGrammar`] maps each nonterminal (the printed canonical form of a
//! type) to its alternatives `c(β₁, …, βₙ)`. A terminal may occur with
//! different arities in different rules.
//!
//! Terms are also laid out as binary inhabitant trees: internal vertices are
//! application nodes labelled `0`, leaves carry combinator indices, and
//! vertices are heap addressed (root `1`, children `2i` and `2i + 1`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::smt::CombinatorTable;

pub type Nonterminal = String;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub combinator: String,
    pub args: Vec<Nonterminal>,
}

impl Rule {
    pub fn new(combinator: impl Into<String>, args: Vec<Nonterminal>) -> Self {
        Rule {
            combinator: combinator.into(),
            args,
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.combinator, self.args.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeGrammar {
    pub start: Nonterminal,
    pub rules: BTreeMap<Nonterminal, BTreeSet<Rule>>,
    pub display: BTreeMap<Nonterminal, String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("unknown nonterminal `{0}`")]
    UnknownNonterminal(String),
    #[error("unknown combinator `{0}`")]
    UnknownCombinator(String),
    #[error("unknown combinator index {0}")]
    UnknownIndex(i64),
    #[error("malformed inhabitant tree: {0}")]
    MalformedTree(String),
    #[error("grammar schema violation: {0}")]
    Schema(String),
    #[error("term syntax error at offset {offset}: {message}")]
    TermSyntax { offset: usize, message: String },
}

impl TreeGrammar {
    pub fn empty(start: impl Into<String>) -> Self {
        TreeGrammar {
            start: start.into(),
            rules: BTreeMap::new(),
            display: BTreeMap::new(),
        }
    }

    pub fn alternatives(&self, nt: &str) -> Result<&BTreeSet<Rule>, GrammarError> {
        self.rules
            .get(nt)
            .ok_or_else(|| GrammarError::UnknownNonterminal(nt.to_string()))
    }

    pub fn rule_count(&self) -> usize {
        self.rules.values().map(BTreeSet::len).sum()
    }

    /// True when the start symbol has no alternatives.
    pub fn is_empty(&self) -> bool {
        self.rules.get(&self.start).is_none_or(BTreeSet::is_empty)
    }

    pub fn add_rule(&mut self, nt: &str, rule: Rule) {
        self.rules.entry(nt.to_string()).or_default().insert(rule);
    }

    /// Combinator names in order of first appearance: breadth-first from the
    /// start symbol, then the remaining nonterminals in sorted order.
    pub fn combinators_in_order(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for nt in self.nonterminals_in_order() {
            for rule in self.rules.get(&nt).into_iter().flatten() {
                if seen.insert(rule.combinator.clone()) {
                    out.push(rule.combinator.clone());
                }
            }
        }
        out
    }

    /// Nonterminals breadth-first from the start symbol, then unreachable
    /// ones in sorted order.
    pub fn nonterminals_in_order(&self) -> Vec<Nonterminal> {
        let mut seen = BTreeSet::new();
        let mut order = Vec::new();
        let mut queue = std::collections::VecDeque::new();
        if self.rules.contains_key(&self.start) {
            seen.insert(self.start.clone());
            queue.push_back(self.start.clone());
        }
        while let Some(nt) = queue.pop_front() {
            for rule in self.rules.get(&nt).into_iter().flatten() {
                for arg in &rule.args {
                    if seen.insert(arg.clone()) {
                        queue.push_back(arg.clone());
                    }
                }
            }
            order.push(nt);
        }
        for nt in self.rules.keys() {
            if !seen.contains(nt) {
                order.push(nt.clone());
            }
        }
        order
    }

    /// Smallest layout depth of any word of `nt`, or `None` for an empty
    /// language.
    pub fn min_depth(&self, nt: &str) -> Result<Option<u32>, GrammarError> {
        self.alternatives(nt)?;
        let mut best: BTreeMap<&str, u32> = BTreeMap::new();
        loop {
            let mut changed = false;
            for (lhs, rules) in &self.rules {
                for rule in rules {
                    let n = rule.args.len() as u32;
                    let mut depth = Some(n);
                    for (k, arg) in rule.args.iter().enumerate() {
                        let offset = n - k as u32;
                        depth = match (depth, best.get(arg.as_str())) {
                            (Some(d), Some(&a)) => Some(d.max(a + offset)),
                            _ => None,
                        };
                    }
                    if let Some(d) = depth {
                        let entry = best.entry(lhs.as_str()).or_insert(u32::MAX);
                        if d < *entry {
                            *entry = d;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return Ok(best.get(nt).copied());
            }
        }
    }
}

impl fmt::Display for TreeGrammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "start: {}", self.start)?;
        for nt in self.nonterminals_in_order() {
            let alts: Vec<String> = self.rules.get(&nt).into_iter().flatten().map(ToString::to_string).collect();
            writeln!(f, "{nt} ↦ {{{}}}", alts.join(", "))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrammarJson {
    start: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    display: BTreeMap<String, String>,
    rules: BTreeMap<String, Vec<Rule>>,
}

impl TreeGrammar {
    /// Pretty JSON with sorted keys and sorted alternatives.
    pub fn to_json(&self) -> String {
        let doc = GrammarJson {
            start: self.start.clone(),
            display: self.display.clone(),
            rules: self
                .rules
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().cloned().collect()))
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("grammar serializes")
    }

    pub fn from_json(text: &str) -> Result<TreeGrammar, GrammarError> {
        let doc: GrammarJson =
            serde_json::from_str(text).map_err(|e| GrammarError::Schema(e.to_string()))?;
        let mut rules = BTreeMap::new();
        for (nt, alts) in doc.rules {
            let set: BTreeSet<Rule> = alts.into_iter().collect();
            rules.insert(nt, set);
        }
        for (nt, alts) in &rules {
            for rule in alts {
                if let Some(arg) = rule.args.iter().find(|a| !rules.contains_key(*a)) {
                    return Err(GrammarError::Schema(format!(
                        "rule `{nt} ↦ {rule}` mentions `{arg}`, which has no entry"
                    )));
                }
            }
        }
        if !rules.is_empty() && !rules.contains_key(&doc.start) {
            return Err(GrammarError::Schema(format!(
                "start symbol `{}` has no entry",
                doc.start
            )));
        }
        Ok(TreeGrammar {
            start: doc.start,
            rules,
            display: doc.display,
        })
    }
}

// ---------------------------------------------------------------------------
// Terms

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    pub combinator: String,
    pub args: Vec<Term>,
}

impl Term {
    pub fn leaf(name: impl Into<String>) -> Term {
        Term {
            combinator: name.into(),
            args: Vec::new(),
        }
    }

    pub fn apply(name: impl Into<String>, args: Vec<Term>) -> Term {
        Term {
            combinator: name.into(),
            args,
        }
    }

    /// Height of the binary layout (a lone combinator has depth 0).
    pub fn layout_depth(&self) -> u32 {
        let n = self.args.len() as u32;
        self.args
            .iter()
            .enumerate()
            .map(|(k, a)| n - k as u32 + a.layout_depth())
            .fold(n, u32::max)
    }

    /// Curried s-expression, e.g. `((min default) ((sortmap inv) values))`.
    pub fn to_sexpr(&self) -> String {
        let mut acc = self.combinator.clone();
        for a in &self.args {
            acc = format!("({acc} {})", a.to_sexpr());
        }
        acc
    }

    pub fn contains(&self, combinator: &str) -> bool {
        self.combinator == combinator || self.args.iter().any(|a| a.contains(combinator))
    }

    pub fn size(&self) -> usize {
        1 + self.args.iter().map(Term::size).sum::<usize>()
    }

    /// Parses both the sugared `f(a, g(b))` and the curried `((f a) (g b))`
    /// notation; they may be mixed.
    pub fn parse(text: &str) -> Result<Term, GrammarError> {
        let mut p = TermParser { text, pos: 0 };
        let t = p.term()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("trailing input"));
        }
        Ok(t)
    }
}

/// Sugared notation: `min(default, sortmap(inv, values))`.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.combinator)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

struct TermParser<'a> {
    text: &'a str,
    pos: usize,
}

impl TermParser<'_> {
    fn error(&self, message: &str) -> GrammarError {
        GrammarError::TermSyntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.text[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, GrammarError> {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len: usize = rest
            .chars()
            .take_while(|c| c.is_alphanumeric() || *c == '_')
            .map(char::len_utf8)
            .sum();
        if len == 0 {
            return Err(self.error("expected combinator name"));
        }
        self.pos += len;
        Ok(rest[..len].to_string())
    }

    fn term(&mut self) -> Result<Term, GrammarError> {
        if self.eat('(') {
            // Curried application `(M N1 ... Nk)`, or a parenthesized term.
            let mut head = self.term()?;
            while !self.eat(')') {
                if self.peek().is_none() {
                    return Err(self.error("unclosed `(`"));
                }
                let arg = self.term()?;
                head.args.push(arg);
            }
            return Ok(head);
        }
        let name = self.ident()?;
        let mut t = Term::leaf(name);
        // Sugared call only when `(` directly follows the name.
        if self.text[self.pos..].starts_with('(') {
            self.pos += 1;
            if !self.eat(')') {
                loop {
                    t.args.push(self.term()?);
                    if self.eat(')') {
                        break;
                    }
                    if !self.eat(',') {
                        return Err(self.error("expected `,` or `)`"));
                    }
                }
            }
        }
        Ok(t)
    }
}

// ---------------------------------------------------------------------------
// Membership and enumeration

/// Decides `t ∈ L_nt(g)`.
pub fn member(g: &TreeGrammar, nt: &str, t: &Term) -> Result<bool, GrammarError> {
    g.alternatives(nt)?;
    let mut memo = HashMap::new();
    Ok(member_rec(g, nt, t, &mut memo))
}

fn member_rec<'a>(
    g: &'a TreeGrammar,
    nt: &'a str,
    t: &'a Term,
    memo: &mut HashMap<(&'a str, *const Term), bool>,
) -> bool {
    let key = (nt, t as *const Term);
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let result = g.rules.get(nt).is_some_and(|alts| {
        alts.iter().any(|rule| {
            rule.combinator == t.combinator
                && rule.args.len() == t.args.len()
                && rule
                    .args
                    .iter()
                    .zip(&t.args)
                    .all(|(b, s)| member_rec(g, b, s, memo))
        })
    });
    memo.insert(key, result);
    result
}

/// Words of `L_nt(g)` with layout depth at most `max_depth`, ordered by depth
/// and then by their curried text, truncated to `limit`.
pub fn enumerate_words(
    g: &TreeGrammar,
    nt: &str,
    max_depth: u32,
    limit: usize,
) -> Result<Vec<Term>, GrammarError> {
    g.alternatives(nt)?;
    // words[h][N]: all words of N with layout depth <= h.
    let mut words: Vec<BTreeMap<&str, BTreeSet<Term>>> = Vec::new();
    for h in 0..=max_depth {
        let mut level: BTreeMap<&str, BTreeSet<Term>> = BTreeMap::new();
        for (lhs, alts) in &g.rules {
            let entry = level.entry(lhs.as_str()).or_default();
            for rule in alts {
                let n = rule.args.len() as u32;
                if n > h {
                    continue;
                }
                let mut partial: Vec<Vec<Term>> = vec![Vec::new()];
                for (k, arg) in rule.args.iter().enumerate() {
                    let budget = h - (n - k as u32);
                    let choices = words[budget as usize].get(arg.as_str());
                    let Some(choices) = choices.filter(|c| !c.is_empty()) else {
                        partial.clear();
                        break;
                    };
                    partial = partial
                        .into_iter()
                        .flat_map(|prefix| {
                            choices.iter().map(move |c| {
                                let mut p = prefix.clone();
                                p.push(c.clone());
                                p
                            })
                        })
                        .collect();
                }
                for args in partial {
                    entry.insert(Term::apply(rule.combinator.clone(), args));
                }
            }
        }
        words.push(level);
    }
    let mut out: Vec<(u32, String, Term)> = words
        .last()
        .and_then(|w| w.get(nt))
        .into_iter()
        .flatten()
        .map(|t| (t.layout_depth(), t.to_sexpr(), t.clone()))
        .collect();
    out.sort();
    Ok(out.into_iter().take(limit).map(|(_, _, t)| t).collect())
}

// ---------------------------------------------------------------------------
// Inhabitant trees

pub type Vertex = u64;

pub fn left_child(v: Vertex) -> Vertex {
    2 * v
}

pub fn right_child(v: Vertex) -> Vertex {
    2 * v + 1
}

/// Level of a heap address; the root is at level 0.
pub fn level(v: Vertex) -> u32 {
    63 - v.leading_zeros()
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VertexLayout {
    pub assignments: BTreeMap<Vertex, i64>,
}

impl VertexLayout {
    pub fn get(&self, v: Vertex) -> Option<i64> {
        self.assignments.get(&v).copied()
    }

    /// The application-connected region reachable from the root, ignoring
    /// every other vertex. Fails at the first application node whose child
    /// is missing, returning the part that was walked.
    pub fn occupied_region(&self) -> Result<VertexLayout, (VertexLayout, String)> {
        let mut region = VertexLayout::default();
        let mut stack = vec![1];
        let mut problem = None;
        while let Some(v) = stack.pop() {
            match self.get(v) {
                None => {
                    problem.get_or_insert_with(|| format!("vertex {v} has no label"));
                }
                Some(label) => {
                    region.assignments.insert(v, label);
                    if label == 0 {
                        if v > u64::MAX / 4 {
                            problem.get_or_insert_with(|| format!("vertex {v} is too deep"));
                            continue;
                        }
                        stack.push(right_child(v));
                        stack.push(left_child(v));
                    }
                }
            }
        }
        match problem {
            None => Ok(region),
            Some(p) => Err((region, p)),
        }
    }
}

/// Curried binary layout of a term, rooted at vertex 1.
pub fn layout(t: &Term, table: &CombinatorTable) -> Result<VertexLayout, GrammarError> {
    let mut out = VertexLayout::default();
    place(t, 1, table, &mut out)?;
    Ok(out)
}

fn place(
    t: &Term,
    at: Vertex,
    table: &CombinatorTable,
    out: &mut VertexLayout,
) -> Result<(), GrammarError> {
    let index = table
        .index(&t.combinator)
        .ok_or_else(|| GrammarError::UnknownCombinator(t.combinator.clone()))?;
    let mut current = at;
    for arg in t.args.iter().rev() {
        if current > u64::MAX / 4 {
            return Err(GrammarError::MalformedTree("term too deep for u64 addresses".into()));
        }
        out.assignments.insert(current, 0);
        place(arg, right_child(current), table, out)?;
        current = left_child(current);
    }
    out.assignments.insert(current, i64::from(index));
    Ok(())
}

/// Inverse of [`layout`]. The layout must contain exactly the vertices of
/// one tree.
pub fn delayout(v: &VertexLayout, table: &CombinatorTable) -> Result<Term, GrammarError> {
    let mut visited = 0usize;
    let t = read_vertex(v, 1, table, &mut visited)?;
    if visited != v.assignments.len() {
        let extra = v.assignments.len() - visited;
        return Err(GrammarError::MalformedTree(format!(
            "{extra} vertices are not part of the tree"
        )));
    }
    Ok(t)
}

fn read_vertex(
    v: &VertexLayout,
    at: Vertex,
    table: &CombinatorTable,
    visited: &mut usize,
) -> Result<Term, GrammarError> {
    let label = v
        .get(at)
        .ok_or_else(|| GrammarError::MalformedTree(format!("vertex {at} is missing")))?;
    *visited += 1;
    if label == 0 {
        if at > u64::MAX / 4 {
            return Err(GrammarError::MalformedTree("tree too deep".into()));
        }
        let mut head = read_vertex(v, left_child(at), table, visited)?;
        let arg = read_vertex(v, right_child(at), table, visited)?;
        head.args.push(arg);
        Ok(head)
    } else {
        let name = u32::try_from(label)
            .ok()
            .and_then(|i| table.name(i))
            .ok_or(GrammarError::UnknownIndex(label))?;
        Ok(Term::leaf(name))
    }
}

/// Graphviz rendering of the inhabitant tree; nodes are labelled
/// `name:(vertex,index)` and application nodes `@:(vertex,0)`.
pub fn tree_to_dot(t: &Term, table: &CombinatorTable) -> Result<String, GrammarError> {
    let l = layout(t, table)?;
    let mut out = String::from("digraph inhabitant {\n  node [shape=plaintext];\n");
    for (&v, &label) in &l.assignments {
        let name = if label == 0 {
            "@".to_string()
        } else {
            table.name(label as u32).unwrap_or("?").to_string()
        };
        out.push_str(&format!("  v{v} [label=\"{name}:({v},{label})\"];\n"));
    }
    for (&v, &label) in &l.assignments {
        if label == 0 {
            out.push_str(&format!("  v{v} -> v{};\n", left_child(v)));
            out.push_str(&format!("  v{v} -> v{};\n", right_child(v)));
        }
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sort_table() -> CombinatorTable {
        CombinatorTable::from_names(["default", "id", "min", "values", "inv", "sortmap"])
    }

    fn term(s: &str) -> Term {
        Term::parse(s).unwrap()
    }

    fn start_up_grammar() -> TreeGrammar {
        let mut g = TreeGrammar::empty("Pos(3,3)");
        g.add_rule("Pos(3,4)", Rule::new("start", vec![]));
        g.add_rule("Pos(3,3)", Rule::new("up", vec!["Pos(3,4)".into()]));
        g.add_rule("Pos(3,2)", Rule::new("up", vec!["Pos(3,3)".into()]));
        g
    }

    #[test]
    fn term_notations_agree() {
        let sugar = term("min(default, sortmap(inv, values))");
        let curried = term("((min default) ((sortmap inv) values))");
        assert_eq!(sugar, curried);
        assert_eq!(sugar.to_sexpr(), "((min default) ((sortmap inv) values))");
        assert_eq!(sugar.to_string(), "min(default, sortmap(inv, values))");
        assert_eq!(term("start()"), Term::leaf("start"));
        assert_eq!(term("(f a b)"), term("f(a, b)"));
        assert_eq!(term("(f (g x))"), term("f(g(x))"));
        assert!(Term::parse("f(a,").is_err());
        assert!(Term::parse("(f a").is_err());
        assert!(Term::parse("").is_err());
        assert!(Term::parse("f g").is_err());
    }

    #[test]
    fn layout_matches_reference_vertex_ids() {
        let l = layout(&term("min(default, sortmap(inv, values))"), &sort_table()).unwrap();
        let expected: BTreeMap<u64, i64> = [
            (1, 0),
            (2, 0),
            (3, 0),
            (4, 3),
            (5, 1),
            (6, 0),
            (7, 4),
            (12, 6),
            (13, 5),
        ]
        .into_iter()
        .collect();
        assert_eq!(l.assignments, expected);
        assert_eq!(delayout(&l, &sort_table()).unwrap(), term("min(default, sortmap(inv, values))"));
    }

    #[test]
    fn small_layouts() {
        let table = CombinatorTable::from_names(["c", "a"]);
        let l = layout(&term("c"), &table).unwrap();
        assert_eq!(l.assignments, [(1, 1)].into_iter().collect());
        let l = layout(&term("c(a)"), &table).unwrap();
        assert_eq!(l.assignments, [(1, 0), (2, 1), (3, 2)].into_iter().collect());
        assert_eq!(delayout(&l, &table).unwrap(), term("c(a)"));
        assert!(matches!(
            layout(&term("zzz"), &table),
            Err(GrammarError::UnknownCombinator(_))
        ));
    }

    #[test]
    fn malformed_layouts_are_rejected() {
        let table = CombinatorTable::from_names(["c", "a"]);
        let app_without_children = VertexLayout {
            assignments: [(1, 0), (2, 0)].into_iter().collect(),
        };
        assert!(matches!(
            delayout(&app_without_children, &table),
            Err(GrammarError::MalformedTree(_))
        ));
        let leaf_with_children = VertexLayout {
            assignments: [(1, 1), (2, 2), (3, 2)].into_iter().collect(),
        };
        assert!(matches!(
            delayout(&leaf_with_children, &table),
            Err(GrammarError::MalformedTree(_))
        ));
        let unknown = VertexLayout {
            assignments: [(1, 9)].into_iter().collect(),
        };
        assert_eq!(delayout(&unknown, &table), Err(GrammarError::UnknownIndex(9)));
    }

    #[test]
    fn occupied_region_ignores_junk() {
        let l = VertexLayout {
            assignments: [(1, 0), (2, 1), (3, 2), (4, 7), (6, 0), (7, -3)]
                .into_iter()
                .collect(),
        };
        let region = l.occupied_region().unwrap();
        assert_eq!(region.assignments.keys().copied().collect::<Vec<_>>(), [1, 2, 3]);
        let broken = VertexLayout {
            assignments: [(1, 0), (2, 1)].into_iter().collect(),
        };
        let (partial, _) = broken.occupied_region().unwrap_err();
        assert_eq!(partial.assignments.len(), 2);
    }

    #[test]
    fn layout_depth_matches_vertex_levels() {
        let t = term("min(default, sortmap(inv, values))");
        let l = layout(&t, &sort_table()).unwrap();
        let deepest = l.assignments.keys().map(|&v| level(v)).max().unwrap();
        assert_eq!(t.layout_depth(), deepest);
        assert_eq!(deepest, 3);
        assert_eq!(term("up(start)").layout_depth(), 1);
        assert_eq!(term("start").layout_depth(), 0);
    }

    #[test]
    fn membership_in_start_up_grammar() {
        let g = start_up_grammar();
        assert!(member(&g, "Pos(3,3)", &term("up(start)")).unwrap());
        assert!(!member(&g, "Pos(3,3)", &term("start")).unwrap());
        assert!(member(&g, "Pos(3,2)", &term("up(up(start))")).unwrap());
        assert!(member(&g, "nope", &term("start")).is_err());
    }

    #[test]
    fn enumeration_of_start_up_grammar() {
        let g = start_up_grammar();
        assert_eq!(enumerate_words(&g, "Pos(3,3)", 3, 10).unwrap(), vec![term("up(start)")]);
        let mut g = g;
        g.rules.insert("Void".into(), BTreeSet::new());
        assert!(enumerate_words(&g, "Void", 4, 10).unwrap().is_empty());
    }

    #[test]
    fn enumeration_is_ordered_by_depth() {
        let mut g = TreeGrammar::empty("N");
        g.add_rule("N", Rule::new("z", vec![]));
        g.add_rule("N", Rule::new("s", vec!["N".into()]));
        let words = enumerate_words(&g, "N", 3, 100).unwrap();
        let printed: Vec<String> = words.iter().map(ToString::to_string).collect();
        assert_eq!(printed, ["z", "s(z)", "s(s(z))", "s(s(s(z)))"]);
        assert_eq!(enumerate_words(&g, "N", 3, 2).unwrap().len(), 2);
    }

    #[test]
    fn min_depth_fixpoint() {
        let g = start_up_grammar();
        assert_eq!(g.min_depth("Pos(3,4)").unwrap(), Some(0));
        assert_eq!(g.min_depth("Pos(3,2)").unwrap(), Some(2));
        let mut g = TreeGrammar::empty("S");
        g.add_rule("S", Rule::new("c", vec!["A".into()]));
        g.add_rule("A", Rule::new("d", vec!["A".into()]));
        assert_eq!(g.min_depth("S").unwrap(), None);
    }

    #[test]
    fn json_shape_and_errors() {
        let g = TreeGrammar::empty("Pos(1,0)");
        assert_eq!(
            serde_json::from_str::<serde_json::Value>(&g.to_json()).unwrap(),
            serde_json::json!({"start": "Pos(1,0)", "rules": {}})
        );
        let g = start_up_grammar();
        assert_eq!(TreeGrammar::from_json(&g.to_json()).unwrap(), g);
        assert!(TreeGrammar::from_json("{not json").is_err());
        assert!(TreeGrammar::from_json(r#"{"start":"A","rules":{"A":[{"combinator":"c","args":["B"]}]}}"#).is_err());
        assert!(TreeGrammar::from_json(r#"{"start":"A","rules":{},"extra":1}"#).is_err());
    }

    #[test]
    fn dot_labels_follow_name_vertex_index() {
        let dot = tree_to_dot(&term("min(default, sortmap(inv, values))"), &sort_table()).unwrap();
        assert!(dot.contains("label=\"sortmap:(12,6)\""));
        assert!(dot.contains("label=\"@:(1,0)\""));
        assert!(dot.contains("v6 -> v13;"));
    }
}
