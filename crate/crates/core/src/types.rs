//! Intersection types with constructors.
//!
//! Types are built from constants (`double`, `3`), variables (`'a`, `α`),
//! covariant constructors (`Pos(3,4)`), arrows and binary intersections.
//! The concrete syntax binds constructor arguments tighter than `&`, and `&`
//! tighter than the right-associative `->`:
//!
//! ```text
//! (Pos(0,3) -> Pos(0,2)) & (Pos(2,3) -> Pos(2,2))
//! double -> SortedList(double) -> minimal & double
//! ```
//!
//! An identifier is a variable when it starts with `'` or with a Greek letter;
//! everything else is a constant. The unicode operators `∩` and `→` are
//! accepted as aliases for `&` and `->`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("constructor `{name}` used with arity {found}, expected {expected}")]
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("unbound type variable `{0}`")]
    UnboundVariable(String),
    #[error("type variable `{0}` where a closed type is required")]
    OpenType(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    Constant(String),
    Variable(String),
    Constructor(String, Vec<Type>),
    Arrow(Box<Type>, Box<Type>),
    Intersection(Box<Type>, Box<Type>),
}

/// True when an identifier names a type variable rather than a constant.
pub fn is_variable_name(name: &str) -> bool {
    match name.chars().next() {
        Some('\'') => true,
        Some(c) => ('\u{0370}'..='\u{03FF}').contains(&c),
        None => false,
    }
}

impl Type {
    pub fn constant(name: impl Into<String>) -> Type {
        Type::Constant(name.into())
    }

    pub fn variable(name: impl Into<String>) -> Type {
        Type::Variable(name.into())
    }

    pub fn constructor(name: impl Into<String>, args: Vec<Type>) -> Type {
        Type::Constructor(name.into(), args)
    }

    pub fn arrow(source: Type, target: Type) -> Type {
        Type::Arrow(Box::new(source), Box::new(target))
    }

    pub fn intersection(left: Type, right: Type) -> Type {
        Type::Intersection(Box::new(left), Box::new(right))
    }

    /// Left-nested intersection of a non-empty list, the shape `a & b & c`
    /// parses to.
    ///
    /// Panics on an empty list: there is no top type.
    pub fn intersect_all(parts: Vec<Type>) -> Type {
        parts
            .into_iter()
            .reduce(Type::intersection)
            .expect("intersection of zero types")
    }

    pub fn is_closed(&self) -> bool {
        self.first_variable().is_none()
    }

    fn first_variable(&self) -> Option<&str> {
        match self {
            Type::Constant(_) => None,
            Type::Variable(v) => Some(v),
            Type::Constructor(_, args) => args.iter().find_map(Type::first_variable),
            Type::Arrow(a, b) | Type::Intersection(a, b) => {
                a.first_variable().or_else(|| b.first_variable())
            }
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<String>) {
        match self {
            Type::Constant(_) => {}
            Type::Variable(v) => {
                out.insert(v.clone());
            }
            Type::Constructor(_, args) => args.iter().for_each(|a| a.collect_variables(out)),
            Type::Arrow(a, b) | Type::Intersection(a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    /// Calls `f` for every constructor occurrence with its arity.
    pub fn visit_constructors(&self, f: &mut impl FnMut(&str, usize)) {
        match self {
            Type::Constant(_) | Type::Variable(_) => {}
            Type::Constructor(name, args) => {
                f(name, args.len());
                args.iter().for_each(|a| a.visit_constructors(f));
            }
            Type::Arrow(a, b) | Type::Intersection(a, b) => {
                a.visit_constructors(f);
                b.visit_constructors(f);
            }
        }
    }

    /// Canonical, non-intersection components: intersections flattened,
    /// every component canonical itself, duplicates removed, sorted by their
    /// printed form.
    pub fn components(&self) -> Vec<Type> {
        let mut raw = Vec::new();
        self.flatten_into(&mut raw);
        let mut keyed: Vec<(String, Type)> = raw
            .into_iter()
            .map(|t| {
                let c = t.canonical_component();
                (c.to_string(), c)
            })
            .collect();
        keyed.sort_by(|a, b| a.0.cmp(&b.0));
        keyed.dedup_by(|a, b| a.0 == b.0);
        keyed.into_iter().map(|(_, t)| t).collect()
    }

    fn flatten_into<'a>(&'a self, out: &mut Vec<&'a Type>) {
        match self {
            Type::Intersection(a, b) => {
                a.flatten_into(out);
                b.flatten_into(out);
            }
            other => out.push(other),
        }
    }

    fn canonical_component(&self) -> Type {
        match self {
            Type::Constant(_) | Type::Variable(_) => self.clone(),
            Type::Constructor(n, args) => {
                Type::Constructor(n.clone(), args.iter().map(Type::canonical).collect())
            }
            Type::Arrow(a, b) => Type::arrow(a.canonical(), b.canonical()),
            Type::Intersection(..) => unreachable!("flattened"),
        }
    }

    /// The canonical representative: sorted, duplicate-free intersection.
    pub fn canonical(&self) -> Type {
        Type::intersect_all(self.components())
    }

    /// Printed canonical form; used as the nonterminal identity.
    pub fn canonical_key(&self) -> String {
        self.canonical().to_string()
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        // 0: arrow position, 1: intersection operand.
        match self {
            Type::Constant(n) | Type::Variable(n) => f.write_str(n),
            Type::Constructor(n, args) => {
                write!(f, "{n}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    a.fmt_prec(f, 0)?;
                }
                f.write_str(")")
            }
            Type::Arrow(a, b) => {
                if prec > 0 {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, 1)?;
                f.write_str(" -> ")?;
                b.fmt_prec(f, 0)?;
                if prec > 0 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            Type::Intersection(a, b) => {
                a.fmt_prec(f, 1)?;
                f.write_str(" & ")?;
                // `&` parses left-associatively
                if matches!(**b, Type::Intersection(..)) {
                    f.write_str("(")?;
                    b.fmt_prec(f, 1)?;
                    f.write_str(")")
                } else {
                    b.fmt_prec(f, 1)
                }
            }
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl std::str::FromStr for Type {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_type(s)
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Amp,
    Arrow,
    End,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.char_indices().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> TypeError {
        TypeError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    /// Next token with its starting line and column.
    fn next_token(&mut self) -> Result<(Tok, usize, usize), TypeError> {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
        let (line, column) = (self.line, self.column);
        let Some(c) = self.peek() else {
            return Ok((Tok::End, line, column));
        };
        let tok = match c {
            '(' => {
                self.bump();
                Tok::LParen
            }
            ')' => {
                self.bump();
                Tok::RParen
            }
            ',' => {
                self.bump();
                Tok::Comma
            }
            '&' | '∩' => {
                self.bump();
                Tok::Amp
            }
            '→' => {
                self.bump();
                Tok::Arrow
            }
            '-' => {
                self.bump();
                if self.peek() == Some('>') {
                    self.bump();
                    Tok::Arrow
                } else {
                    return Err(self.error(line, column, "expected `->`"));
                }
            }
            c if c == '\'' || is_ident_char(c) => {
                let mut s = String::new();
                s.push(c);
                self.bump();
                while matches!(self.peek(), Some(c) if is_ident_char(c)) {
                    s.push(self.bump().unwrap());
                }
                if s == "'" {
                    return Err(self.error(line, column, "empty variable name"));
                }
                Tok::Ident(s)
            }
            other => {
                return Err(self.error(line, column, format!("unexpected character `{other}`")))
            }
        };
        Ok((tok, line, column))
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: (Tok, usize, usize),
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, TypeError> {
        let mut lexer = Lexer::new(text);
        let current = lexer.next_token()?;
        Ok(Parser { lexer, current })
    }

    fn advance(&mut self) -> Result<Tok, TypeError> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.current, next).0)
    }

    fn error(&self, message: impl Into<String>) -> TypeError {
        self.lexer.error(self.current.1, self.current.2, message)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), TypeError> {
        if self.current.0 == tok {
            self.advance()?;
            Ok(())
        } else {
            Err(self.error(format!("expected {what}")))
        }
    }

    fn arrow(&mut self) -> Result<Type, TypeError> {
        let source = self.intersection()?;
        if self.current.0 == Tok::Arrow {
            self.advance()?;
            let target = self.arrow()?;
            Ok(Type::arrow(source, target))
        } else {
            Ok(source)
        }
    }

    fn intersection(&mut self) -> Result<Type, TypeError> {
        let mut left = self.atom()?;
        while self.current.0 == Tok::Amp {
            self.advance()?;
            let right = self.atom()?;
            left = Type::intersection(left, right);
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<Type, TypeError> {
        match self.current.0.clone() {
            Tok::LParen => {
                self.advance()?;
                let inner = self.arrow()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.advance()?;
                if self.current.0 == Tok::LParen {
                    if is_variable_name(&name) {
                        return Err(self.error(format!("variable `{name}` cannot take arguments")));
                    }
                    self.advance()?;
                    if self.current.0 == Tok::RParen {
                        return Err(self.error("constructor needs at least one argument"));
                    }
                    let mut args = vec![self.arrow()?];
                    while self.current.0 == Tok::Comma {
                        self.advance()?;
                        args.push(self.arrow()?);
                    }
                    self.expect(Tok::RParen, "`,` or `)`")?;
                    Ok(Type::Constructor(name, args))
                } else if is_variable_name(&name) {
                    Ok(Type::Variable(name))
                } else {
                    Ok(Type::Constant(name))
                }
            }
            Tok::End => Err(self.error("unexpected end of type")),
            other => Err(self.error(format!("unexpected token {other:?}"))),
        }
    }
}

pub fn parse_type(text: &str) -> Result<Type, TypeError> {
    let mut p = Parser::new(text)?;
    let t = p.arrow()?;
    if p.current.0 != Tok::End {
        return Err(p.error("trailing input after type"));
    }
    Ok(t)
}

// ---------------------------------------------------------------------------
// Taxonomy

/// A subtype preorder on constant names, closed reflexively and transitively.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Taxonomy {
    pairs: BTreeSet<(String, String)>,
    supers: BTreeMap<String, BTreeSet<String>>,
}

impl Taxonomy {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Self {
        let pairs: BTreeSet<_> = pairs.into_iter().collect();
        let mut direct: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for (sub, sup) in &pairs {
            direct.entry(sub).or_default().push(sup);
        }
        let mut supers = BTreeMap::new();
        for start in direct.keys() {
            let mut seen = BTreeSet::new();
            let mut stack = vec![*start];
            while let Some(n) = stack.pop() {
                for &next in direct.get(n).map(Vec::as_slice).unwrap_or(&[]) {
                    if seen.insert(next.to_string()) {
                        stack.push(next);
                    }
                }
            }
            supers.insert(start.to_string(), seen);
        }
        Taxonomy { pairs, supers }
    }

    pub fn pairs(&self) -> impl Iterator<Item = &(String, String)> {
        self.pairs.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        sub == sup || self.supers.get(sub).is_some_and(|s| s.contains(sup))
    }
}

// ---------------------------------------------------------------------------
// Subtyping

/// Decides `lhs ≤ rhs` for closed types.
///
/// BCD subtyping without ω, extended with the taxonomy on constants and with
/// constructors that are covariant in every argument. Every component of
/// `rhs` must be covered by `lhs`: constants and constructors by a single
/// component of `lhs`, an arrow `s -> t` by the intersection of the targets
/// of all arrow components of `lhs` whose source is above `s`.
pub fn subtype(lhs: &Type, rhs: &Type, tax: &Taxonomy) -> Result<bool, TypeError> {
    let left = lhs.components();
    covers(&left, rhs, tax)
}

fn covers(left: &[Type], rhs: &Type, tax: &Taxonomy) -> Result<bool, TypeError> {
    for goal in rhs.components() {
        if !covers_component(left, &goal, tax)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn covers_component(left: &[Type], goal: &Type, tax: &Taxonomy) -> Result<bool, TypeError> {
    match goal {
        Type::Variable(v) => Err(TypeError::OpenType(v.clone())),
        Type::Constant(name) => {
            for l in left {
                match l {
                    Type::Constant(have) if tax.is_subtype(have, name) => return Ok(true),
                    Type::Variable(v) => return Err(TypeError::OpenType(v.clone())),
                    _ => {}
                }
            }
            Ok(false)
        }
        Type::Constructor(name, args) => {
            for l in left {
                match l {
                    Type::Constructor(have, have_args) if have == name => {
                        if have_args.len() != args.len() {
                            return Err(TypeError::ArityMismatch {
                                name: name.clone(),
                                expected: have_args.len(),
                                found: args.len(),
                            });
                        }
                        let mut all = true;
                        for (a, b) in have_args.iter().zip(args) {
                            if !subtype(a, b, tax)? {
                                all = false;
                                break;
                            }
                        }
                        if all {
                            return Ok(true);
                        }
                    }
                    Type::Variable(v) => return Err(TypeError::OpenType(v.clone())),
                    _ => {}
                }
            }
            Ok(false)
        }
        Type::Arrow(source, target) => {
            let mut targets = Vec::new();
            for l in left {
                match l {
                    Type::Arrow(have_source, have_target) => {
                        if subtype(source, have_source, tax)? {
                            targets.extend(have_target.components());
                        }
                    }
                    Type::Variable(v) => return Err(TypeError::OpenType(v.clone())),
                    _ => {}
                }
            }
            if targets.is_empty() {
                return Ok(false);
            }
            covers(&targets, target, tax)
        }
        Type::Intersection(..) => unreachable!("components are never intersections"),
    }
}

// ---------------------------------------------------------------------------
// Substitutions and paths

/// Maps type variables to closed types.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Substitution(BTreeMap<String, Type>);

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails when an image is not closed.
    pub fn from_pairs(
        pairs: impl IntoIterator<Item = (String, Type)>,
    ) -> Result<Self, TypeError> {
        let map: BTreeMap<_, _> = pairs.into_iter().collect();
        for t in map.values() {
            if let Some(v) = t.first_variable() {
                return Err(TypeError::OpenType(v.to_string()));
            }
        }
        Ok(Substitution(map))
    }

    pub fn get(&self, var: &str) -> Option<&Type> {
        self.0.get(var)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Type)> {
        self.0.iter()
    }
}

pub fn apply_substitution(s: &Substitution, t: &Type) -> Result<Type, TypeError> {
    Ok(match t {
        Type::Constant(_) => t.clone(),
        Type::Variable(v) => s
            .get(v)
            .cloned()
            .ok_or_else(|| TypeError::UnboundVariable(v.clone()))?,
        Type::Constructor(n, args) => Type::Constructor(
            n.clone(),
            args.iter()
                .map(|a| apply_substitution(s, a))
                .collect::<Result<_, _>>()?,
        ),
        Type::Arrow(a, b) => Type::arrow(apply_substitution(s, a)?, apply_substitution(s, b)?),
        Type::Intersection(a, b) => {
            Type::intersection(apply_substitution(s, a)?, apply_substitution(s, b)?)
        }
    })
}

/// `sources[0] -> ... -> sources[n-1] -> target`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiArrow {
    pub sources: Vec<Type>,
    pub target: Type,
}

impl fmt::Display for MultiArrow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, s) in self.sources.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, "] => {}", self.target)
    }
}

/// Every reading of `t` as an `arity`-ary multi-arrow, distributing over
/// intersections at each level. Targets are single canonical components.
pub fn paths(t: &Type, arity: usize) -> Vec<MultiArrow> {
    let mut out = Vec::new();
    collect_paths(t, arity, &mut Vec::new(), &mut out);
    let mut seen = BTreeSet::new();
    out.retain(|p| seen.insert(p.clone()));
    out
}

fn collect_paths(t: &Type, arity: usize, prefix: &mut Vec<Type>, out: &mut Vec<MultiArrow>) {
    for component in t.components() {
        if arity == 0 {
            out.push(MultiArrow {
                sources: prefix.clone(),
                target: component,
            });
        } else if let Type::Arrow(source, rest) = component {
            prefix.push(*source);
            collect_paths(&rest, arity - 1, prefix, out);
            prefix.pop();
        }
    }
}

/// Largest `n` such that some component of `t` has `n` nested arrows.
pub fn max_arity(t: &Type) -> usize {
    match t {
        Type::Arrow(_, rest) => 1 + max_arity(rest),
        Type::Intersection(a, b) => max_arity(a).max(max_arity(b)),
        _ => 0,
    }
}
