//! Structural constraints evaluated directly on terms, without SMT.
//!
//! Reading the vertex formulas back into term shapes: an applied combinator
//! `c` is a subterm `c(a₁, …, aₙ)` with `n ≥ 1`; the `k`-th argument of `c`
//! is `aₖ`; `outer ∘ inner` is `outer(inner(…), …)` with `inner` applied.

use crate::grammar::Term;
use crate::smt::StructuralConstraint;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleError {
    /// Raw SMT text has no term reading.
    Unsupported(String),
}

fn subterms<'a>(t: &'a Term, out: &mut Vec<&'a Term>) {
    out.push(t);
    for a in &t.args {
        subterms(a, out);
    }
}

fn count(t: &Term, c: &str) -> u64 {
    u64::from(t.combinator == c) + t.args.iter().map(|a| count(a, c)).sum::<u64>()
}

/// Whether `t` satisfies one constraint.
pub fn satisfies(t: &Term, c: &StructuralConstraint) -> Result<bool, OracleError> {
    let mut all = Vec::new();
    subterms(t, &mut all);
    Ok(match c {
        StructuralConstraint::Forbid(name) => !t.contains(name),
        StructuralConstraint::NeverApplied(name) => !all.iter().any(|s| s.combinator == *name && !s.args.is_empty()),
        StructuralConstraint::LeafArgument { combinator, position } => all.iter().all(|s| {
            s.combinator != *combinator
                || s.args
                    .get(*position as usize - 1)
                    .is_none_or(|a| a.args.is_empty())
        }),
        StructuralConstraint::ForbidCompose { outer, inner } => !all.iter().any(|s| {
            s.combinator == *outer
                && s.args
                    .first()
                    .is_some_and(|a| a.combinator == *inner && !a.args.is_empty())
        }),
        StructuralConstraint::UseCount { combinator, min, max } => {
            let n = count(t, combinator);
            n >= *min && max.is_none_or(|m| n <= m)
        }
        StructuralConstraint::Raw(text) => return Err(OracleError::Unsupported(text.clone())),
    })
}

pub fn satisfies_all(t: &Term, cs: &[StructuralConstraint]) -> Result<bool, OracleError> {
    for c in cs {
        if !satisfies(t, c)? {
            return Ok(false);
        }
    }
    Ok(true)
}
