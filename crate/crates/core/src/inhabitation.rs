//! Inhabitation: `Γ ⊢ ? : τ` answered by a tree grammar of all inhabitants.
//!
//! A combinator `c : σ` whose type has variables is used at the intersection
//! of all its instances `S(σ)`, so paths from different substitutions can be
//! combined. For a pending nonterminal `α` and arity `n`, every minimal set
//! `P` of `n`-ary paths with `⋂ targets(P) ≤ α` yields the rule
//! `α ↦ c(β₁, …, βₙ)` where `βᵢ` is the intersection of the `i`-th sources.
//! Larger sets only produce stronger (smaller) argument types, and a rule
//! whose arguments are pointwise below those of another rule for the same
//! combinator is dropped, as its words are already covered.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use itertools::Itertools;
use thiserror::Error;

use crate::grammar::{Rule, TreeGrammar};
use crate::repository::{validate, Repository, RepositoryError};
use crate::types::{paths, subtype, MultiArrow, Type, TypeError};

#[derive(Debug, Error)]
pub enum InhabitationError {
    #[error("goal type must be closed: {0}")]
    OpenGoal(String),
    #[error(transparent)]
    Repository(#[from] RepositoryError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(
        "combinator `{combinator}` offers {count} candidate paths of arity {arity} for `{target}` (limit {limit})"
    )]
    TooManyPaths {
        combinator: String,
        arity: usize,
        target: String,
        count: usize,
        limit: usize,
    },
    #[error("more than {0} nonterminals generated")]
    TooManyNonterminals(usize),
}

#[derive(Debug, Clone)]
pub struct InhabitationRequest<'a> {
    pub repo: &'a Repository,
    pub goal: Type,
}

#[derive(Debug, Clone, Copy)]
pub struct InhabitationOptions {
    /// Upper bound on relevant paths per (combinator, arity, target); subset
    /// enumeration is exponential in this number.
    pub max_candidate_paths: usize,
    pub max_nonterminals: usize,
}

impl Default for InhabitationOptions {
    fn default() -> Self {
        InhabitationOptions {
            max_candidate_paths: 16,
            max_nonterminals: 10_000,
        }
    }
}

/// Paths of one combinator, indexed by arity.
struct CombinatorPaths {
    name: String,
    by_arity: Vec<Vec<MultiArrow>>,
}

fn combinator_paths(repo: &Repository) -> Result<Vec<CombinatorPaths>, InhabitationError> {
    let mut out = Vec::new();
    for c in &repo.combinators {
        let instances = repo.instances(&c.name)?;
        let max = instances.iter().map(crate::types::max_arity).max().unwrap_or(0);
        let by_arity = (0..=max)
            .map(|n| {
                let mut all: Vec<MultiArrow> = instances.iter().flat_map(|t| paths(t, n)).collect();
                let mut seen = BTreeSet::new();
                all.retain(|p| seen.insert(p.clone()));
                all
            })
            .collect();
        out.push(CombinatorPaths {
            name: c.name.clone(),
            by_arity,
        });
    }
    Ok(out)
}

/// The complete, unpruned grammar for the request.
pub fn inhabit(req: &InhabitationRequest<'_>) -> Result<TreeGrammar, InhabitationError> {
    inhabit_with(req, InhabitationOptions::default())
}

pub fn inhabit_with(
    req: &InhabitationRequest<'_>,
    opts: InhabitationOptions,
) -> Result<TreeGrammar, InhabitationError> {
    if !req.goal.is_closed() {
        return Err(InhabitationError::OpenGoal(req.goal.to_string()));
    }
    let diagnostics = validate(req.repo);
    if !diagnostics.is_empty() {
        return Err(RepositoryError::Invalid(diagnostics).into());
    }
    let tax = &req.repo.taxonomy;
    let all_paths = combinator_paths(req.repo)?;

    let goal = req.goal.canonical();
    let mut grammar = TreeGrammar::empty(goal.to_string());
    let mut types: BTreeMap<String, Type> = BTreeMap::new();
    types.insert(goal.to_string(), goal.clone());
    let mut queue = VecDeque::from([goal]);

    while let Some(target) = queue.pop_front() {
        let key = target.to_string();
        let target_components = target.components();
        let mut found: Vec<(Rule, Vec<Type>)> = Vec::new();

        for cp in &all_paths {
            for (arity, arity_paths) in cp.by_arity.iter().enumerate() {
                let candidates = relevant_paths(arity_paths, &target_components, tax)?;
                if candidates.is_empty() {
                    continue;
                }
                if candidates.len() > opts.max_candidate_paths {
                    return Err(InhabitationError::TooManyPaths {
                        combinator: cp.name.clone(),
                        arity,
                        target: key.clone(),
                        count: candidates.len(),
                        limit: opts.max_candidate_paths,
                    });
                }
                for subset in minimal_covers(&candidates, &target, tax)? {
                    let args: Vec<Type> = (0..arity)
                        .map(|i| {
                            Type::intersect_all(subset.iter().map(|p| p.sources[i].clone()).collect())
                                .canonical()
                        })
                        .collect();
                    let rule = Rule::new(cp.name.clone(), args.iter().map(ToString::to_string).collect());
                    if !found.iter().any(|(r, _)| *r == rule) {
                        found.push((rule, args));
                    }
                }
            }
        }

        let kept = drop_subsumed(found, tax)?;
        let entry = grammar.rules.entry(key.clone()).or_default();
        for (rule, args) in kept {
            for arg in args {
                let name = arg.to_string();
                if !types.contains_key(&name) {
                    if types.len() >= opts.max_nonterminals {
                        return Err(InhabitationError::TooManyNonterminals(opts.max_nonterminals));
                    }
                    types.insert(name, arg.clone());
                    queue.push_back(arg);
                }
            }
            entry.insert(rule);
        }
    }

    grammar.display = types.keys().map(|k| (k.clone(), k.clone())).collect();
    Ok(grammar)
}

/// Paths that can contribute to covering some component of the target: a
/// constant or constructor component needs one target below it on its own,
/// an arrow component may need any arrow target.
fn relevant_paths<'a>(
    paths: &'a [MultiArrow],
    target_components: &[Type],
    tax: &crate::types::Taxonomy,
) -> Result<Vec<&'a MultiArrow>, TypeError> {
    let mut out = Vec::new();
    for p in paths {
        let mut relevant = false;
        for goal in target_components {
            relevant = match goal {
                Type::Arrow(..) => matches!(p.target, Type::Arrow(..)),
                _ => subtype(&p.target, goal, tax)?,
            };
            if relevant {
                break;
            }
        }
        if relevant {
            out.push(p);
        }
    }
    Ok(out)
}

/// Inclusion-minimal subsets whose targets intersect below `target`.
fn minimal_covers<'a>(
    candidates: &[&'a MultiArrow],
    target: &Type,
    tax: &crate::types::Taxonomy,
) -> Result<Vec<Vec<&'a MultiArrow>>, TypeError> {
    let mut covers: Vec<Vec<usize>> = Vec::new();
    for size in 1..=candidates.len() {
        for subset in (0..candidates.len()).combinations(size) {
            if covers.iter().any(|c| c.iter().all(|i| subset.contains(i))) {
                continue;
            }
            let meet = Type::intersect_all(subset.iter().map(|&i| candidates[i].target.clone()).collect());
            if subtype(&meet, target, tax)? {
                covers.push(subset);
            }
        }
    }
    Ok(covers
        .into_iter()
        .map(|c| c.into_iter().map(|i| candidates[i]).collect())
        .collect())
}

/// Removes rules whose arguments are pointwise subtypes of another rule's
/// arguments for the same combinator and arity. Among equivalent rules the
/// first one found is kept.
fn drop_subsumed(
    found: Vec<(Rule, Vec<Type>)>,
    tax: &crate::types::Taxonomy,
) -> Result<Vec<(Rule, Vec<Type>)>, TypeError> {
    let below = |a: &[Type], b: &[Type]| -> Result<bool, TypeError> {
        for (x, y) in a.iter().zip(b) {
            if !subtype(x, y, tax)? {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut kept = Vec::new();
    'outer: for (i, (rule, args)) in found.iter().enumerate() {
        for (j, (other, other_args)) in found.iter().enumerate() {
            if i == j || other.combinator != rule.combinator || other_args.len() != args.len() {
                continue;
            }
            if below(args, other_args)? {
                let equivalent = below(other_args, args)?;
                if !equivalent || j < i {
                    continue 'outer;
                }
            }
        }
        kept.push((rule.clone(), args.clone()));
    }
    Ok(kept)
}

/// Removes unproductive nonterminals (and every rule mentioning them), then
/// everything unreachable from the start symbol. The language of the start
/// symbol is unchanged.
pub fn prune(g: &TreeGrammar) -> TreeGrammar {
    let mut productive: BTreeSet<&str> = BTreeSet::new();
    loop {
        let mut changed = false;
        for (nt, alts) in &g.rules {
            if productive.contains(nt.as_str()) {
                continue;
            }
            if alts
                .iter()
                .any(|r| r.args.iter().all(|a| productive.contains(a.as_str())))
            {
                productive.insert(nt);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut out = TreeGrammar::empty(g.start.clone());
    if !productive.contains(g.start.as_str()) {
        return out;
    }
    let mut queue = VecDeque::from([g.start.as_str()]);
    let mut reached = BTreeSet::from([g.start.as_str()]);
    while let Some(nt) = queue.pop_front() {
        let alts: Vec<&Rule> = g.rules[nt]
            .iter()
            .filter(|r| r.args.iter().all(|a| productive.contains(a.as_str())))
            .collect();
        for r in &alts {
            for a in &r.args {
                if reached.insert(a) {
                    queue.push_back(a);
                }
            }
        }
        out.rules.insert(nt.to_string(), alts.into_iter().cloned().collect());
    }
    out.display = g
        .display
        .iter()
        .filter(|(k, _)| out.rules.contains_key(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    out
}

/// `inhabit` followed by `prune`.
pub fn inhabit_pruned(req: &InhabitationRequest<'_>) -> Result<TreeGrammar, InhabitationError> {
    Ok(prune(&inhabit(req)?))
}
