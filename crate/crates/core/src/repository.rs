//! Combinator repositories.
//!
//! Line-based text format, `#` starts a comment:
//!
//! ```text
//! var α in { double, List(double), minimal & double }
//! subtype int <: number
//! id : α -> α
//! up : (Pos(1,1) -> Pos(1,0))
//!    & (Pos(0,2) -> Pos(0,1))
//! ```
//!
//! Indented lines continue the previous declaration. Type variables range
//! over the finite set declared for them, which keeps inhabitation decidable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::types::{self, is_variable_name, parse_type, Substitution, Taxonomy, Type, TypeError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Combinator {
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Repository {
    pub combinators: Vec<Combinator>,
    pub variable_kinds: BTreeMap<String, Vec<Type>>,
    pub taxonomy: Taxonomy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinatorArity {
    pub name: String,
    pub max_arity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Diagnostic {
    DuplicateName(String),
    UnboundVariableKind { variable: String, combinator: String },
    EmptyKind(String),
    OpenKindMember { variable: String, member: String },
    ArityConflict { constructor: String, expected: usize, found: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DuplicateName(n) => write!(f, "combinator `{n}` is declared twice"),
            Diagnostic::UnboundVariableKind { variable, combinator } => write!(
                f,
                "variable `{variable}` in the type of `{combinator}` has no `var` declaration"
            ),
            Diagnostic::EmptyKind(v) => write!(f, "variable `{v}` ranges over an empty set"),
            Diagnostic::OpenKindMember { variable, member } => {
                write!(f, "kind of `{variable}` contains open type `{member}`")
            }
            Diagnostic::ArityConflict { constructor, expected, found } => write!(
                f,
                "constructor `{constructor}` used with arity {found}, first used with {expected}"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum RepositoryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Type {
        line: usize,
        #[source]
        source: TypeError,
    },
    #[error("invalid repository: {}", .0.iter().map(ToString::to_string).join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("unknown combinator `{0}`")]
    UnknownCombinator(String),
    #[error("cannot instantiate: {0}")]
    Instance(#[source] TypeError),
}

/// Parses and validates a repository.
pub fn parse_repository(text: &str) -> Result<Repository, RepositoryError> {
    let repo = parse_repository_unchecked(text)?;
    let diagnostics = validate(&repo);
    if diagnostics.is_empty() {
        Ok(repo)
    } else {
        Err(RepositoryError::Invalid(diagnostics))
    }
}

/// Parses without running [`validate`]; syntax errors are still reported.
pub fn parse_repository_unchecked(text: &str) -> Result<Repository, RepositoryError> {
    let mut statements: Vec<(usize, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let continues = line.starts_with(char::is_whitespace);
        match statements.last_mut() {
            Some((_, stmt)) if continues => {
                stmt.push(' ');
                stmt.push_str(line.trim());
            }
            _ if continues => {
                return Err(RepositoryError::Syntax {
                    line: idx + 1,
                    message: "continuation line without a preceding declaration".into(),
                })
            }
            _ => statements.push((idx + 1, line.trim().to_string())),
        }
    }

    let mut repo = Repository::default();
    let mut tax_pairs = Vec::new();
    for (line, stmt) in statements {
        let type_err = |source| RepositoryError::Type { line, source };
        let syntax = |message: &str| RepositoryError::Syntax {
            line,
            message: message.to_string(),
        };
        if let Some(rest) = keyword(&stmt, "var") {
            let (name, set) = rest
                .split_once(" in ")
                .ok_or_else(|| syntax("expected `var <name> in { ... }`"))?;
            let name = name.trim();
            if !is_variable_name(name) || name.chars().skip(1).any(|c| !c.is_alphanumeric() && c != '_') {
                return Err(syntax("variable names start with `'` or a Greek letter"));
            }
            let set = set.trim();
            let inner = set
                .strip_prefix('{')
                .and_then(|s| s.strip_suffix('}'))
                .ok_or_else(|| syntax("kind must be written `{ t1, t2, ... }`"))?;
            let mut members = Vec::new();
            for part in split_top_level(inner) {
                if part.trim().is_empty() {
                    continue;
                }
                members.push(parse_type(part).map_err(type_err)?);
            }
            if repo.variable_kinds.insert(name.to_string(), members).is_some() {
                return Err(syntax("variable declared twice"));
            }
        } else if let Some(rest) = keyword(&stmt, "subtype") {
            let (sub, sup) = rest
                .split_once("<:")
                .ok_or_else(|| syntax("expected `subtype <atom> <: <atom>`"))?;
            let (sub, sup) = (sub.trim(), sup.trim());
            for atom in [sub, sup] {
                if !matches!(parse_type(atom), Ok(Type::Constant(_))) {
                    return Err(syntax("taxonomy entries relate constant atoms"));
                }
            }
            tax_pairs.push((sub.to_string(), sup.to_string()));
        } else if let Some((name, ty)) = stmt.split_once(':') {
            let name = name.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(syntax("combinator names are identifiers"));
            }
            repo.combinators.push(Combinator {
                name: name.to_string(),
                ty: parse_type(ty).map_err(type_err)?,
            });
        } else {
            return Err(syntax("expected `var`, `subtype` or `<name> : <type>`"));
        }
    }
    repo.taxonomy = Taxonomy::new(tax_pairs);
    Ok(repo)
}

fn keyword<'a>(stmt: &'a str, kw: &str) -> Option<&'a str> {
    stmt.strip_prefix(kw)
        .filter(|rest| rest.starts_with(char::is_whitespace))
        .map(str::trim)
}

/// Splits on commas that are not nested inside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

/// One diagnostic per violated invariant; empty when the repository is valid.
pub fn validate(repo: &Repository) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut names = BTreeSet::new();
    for c in &repo.combinators {
        if !names.insert(c.name.as_str()) {
            out.push(Diagnostic::DuplicateName(c.name.clone()));
        }
    }

    for c in &repo.combinators {
        for v in c.ty.variables() {
            if !repo.variable_kinds.contains_key(&v) {
                out.push(Diagnostic::UnboundVariableKind {
                    variable: v,
                    combinator: c.name.clone(),
                });
            }
        }
    }

    for (v, members) in &repo.variable_kinds {
        if members.is_empty() {
            out.push(Diagnostic::EmptyKind(v.clone()));
        }
        for m in members {
            if !m.is_closed() {
                out.push(Diagnostic::OpenKindMember {
                    variable: v.clone(),
                    member: m.to_string(),
                });
            }
        }
    }

    let mut arities: BTreeMap<String, usize> = BTreeMap::new();
    let mut conflicts = BTreeSet::new();
    let all_types = repo
        .combinators
        .iter()
        .map(|c| &c.ty)
        .chain(repo.variable_kinds.values().flatten());
    for t in all_types {
        t.visit_constructors(&mut |name, arity| {
            let expected = *arities.entry(name.to_string()).or_insert(arity);
            if expected != arity {
                conflicts.insert(Diagnostic::ArityConflict {
                    constructor: name.to_string(),
                    expected,
                    found: arity,
                });
            }
        });
    }
    out.extend(conflicts);
    out
}

impl Repository {
    pub fn combinator(&self, name: &str) -> Option<&Combinator> {
        self.combinators.iter().find(|c| c.name == name)
    }

    /// Closed instances of a combinator's type, one per substitution.
    pub fn instances(&self, name: &str) -> Result<Vec<Type>, RepositoryError> {
        let c = self
            .combinator(name)
            .ok_or_else(|| RepositoryError::UnknownCombinator(name.to_string()))?;
        substitutions(self, name)?
            .iter()
            .map(|s| {
                types::apply_substitution(s, &c.ty).map_err(RepositoryError::Instance)
            })
            .collect()
    }

    pub fn arities(&self) -> Result<Vec<CombinatorArity>, RepositoryError> {
        self.combinators
            .iter()
            .map(|c| {
                let max_arity = self
                    .instances(&c.name)?
                    .iter()
                    .map(types::max_arity)
                    .max()
                    .unwrap_or(0);
                Ok(CombinatorArity {
                    name: c.name.clone(),
                    max_arity,
                })
            })
            .collect()
    }
}

/// Cartesian product of the kinds of the variables occurring in the
/// combinator's type; `[∅]` for a variable-free type.
pub fn substitutions(repo: &Repository, combinator: &str) -> Result<Vec<Substitution>, RepositoryError> {
    let c = repo
        .combinator(combinator)
        .ok_or_else(|| RepositoryError::UnknownCombinator(combinator.to_string()))?;
    let vars: Vec<String> = c.ty.variables().into_iter().collect();
    if vars.is_empty() {
        return Ok(vec![Substitution::new()]);
    }
    let mut kinds = Vec::with_capacity(vars.len());
    for v in &vars {
        let kind = repo.variable_kinds.get(v).ok_or_else(|| {
            RepositoryError::Invalid(vec![Diagnostic::UnboundVariableKind {
                variable: v.clone(),
                combinator: combinator.to_string(),
            }])
        })?;
        kinds.push(kind.iter());
    }
    kinds
        .into_iter()
        .multi_cartesian_product()
        .map(|choice| {
            Substitution::from_pairs(vars.iter().cloned().zip(choice.into_iter().cloned()))
                .map_err(RepositoryError::Instance)
        })
        .collect()
}

impl fmt::Display for Repository {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (v, members) in &self.variable_kinds {
            writeln!(f, "var {v} in {{ {} }}", members.iter().join(", "))?;
        }
        for (sub, sup) in self.taxonomy.pairs() {
            writeln!(f, "subtype {sub} <: {sup}")?;
        }
        for c in &self.combinators {
            writeln!(f, "{} : {}", c.name, c.ty)?;
        }
        Ok(())
    }
}
