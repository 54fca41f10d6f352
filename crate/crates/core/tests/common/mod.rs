//! Fixtures, transcribed reference grammars and independent oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use clssmt::grammar::{Rule, Term, TreeGrammar};
use clssmt::repository::{parse_repository, Combinator, Repository};
use clssmt::smt::{parse_index_overrides, IndexOverrides, StructuralConstraint};
use clssmt::solver::{SolverConfig, SolverSession};
use clssmt::types::{max_arity, parse_type, paths, subtype, MultiArrow, Taxonomy, Type};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn repo(name: &str) -> Repository {
    parse_repository(&fixture(name)).unwrap()
}

pub fn indices(name: &str) -> IndexOverrides {
    parse_index_overrides(&fixture(name)).unwrap()
}

pub fn constraints(name: &str) -> Vec<StructuralConstraint> {
    clssmt::smt::parse_constraints(&fixture(name)).unwrap()
}

pub fn nt(text: &str) -> String {
    parse_type(text).unwrap().canonical().to_string()
}

pub fn term(text: &str) -> Term {
    Term::parse(text).unwrap()
}

/// Builds a grammar from `(lhs, [(combinator, [args])])` blocks written as
/// type text. Repeated left-hand sides are merged.
pub fn transcribe(start: &str, blocks: &[(&str, &[(&str, &[&str])])]) -> TreeGrammar {
    let mut g = TreeGrammar::empty(nt(start));
    for (lhs, alts) in blocks {
        let lhs = nt(lhs);
        g.rules.entry(lhs.clone()).or_default();
        for (c, args) in *alts {
            g.add_rule(&lhs, Rule::new(*c, args.iter().map(|a| nt(a)).collect()));
        }
    }
    g.display = g.rules.keys().map(|k| (k.clone(), k.clone())).collect();
    g
}

/// The expected sort grammar.
pub fn expected_sort_grammar() -> TreeGrammar {
    transcribe(
        "minimal & double",
        &[
            ("SortedList(double)", &[("sortmap", &["double -> double", "List(double)"])]),
            (
                "minimal & double",
                &[("id", &["minimal & double"]), ("min", &["double", "SortedList(double)"])],
            ),
            (
                "double",
                &[
                    ("id", &["double"]),
                    ("default", &[]),
                    ("inv", &["double"]),
                    ("min", &["double", "SortedList(double)"]),
                ],
            ),
            ("double -> double", &[("id", &[]), ("inv", &[])]),
            ("List(double)", &[("id", &["List(double)"]), ("values", &[])]),
        ],
    )
}

/// The expected labyrinth grammar. Its third block repeats the left-hand
/// side `Pos(1,1)` with exactly the alternatives of `Pos(0,1)`;
/// `duplicate_lhs` chooses which nonterminal that block is filed under.
pub fn expected_labyrinth_grammar_with(duplicate_lhs: &str) -> TreeGrammar {
    transcribe(
        "Pos(1,0)",
        &[
            ("Pos(1,0)", &[("up", &["Pos(1,1)"])]),
            (
                "Pos(1,1)",
                &[("right", &["Pos(0,1)"]), ("left", &["Pos(2,1)"]), ("down", &["Pos(1,0)"])],
            ),
            (duplicate_lhs, &[("up", &["Pos(0,2)"]), ("left", &["Pos(1,1)"])]),
            ("Pos(2,1)", &[("up", &["Pos(2,2)"]), ("right", &["Pos(1,1)"])]),
            ("Pos(2,2)", &[("down", &["Pos(2,1)"]), ("up", &["Pos(2,3)"])]),
            ("Pos(0,1)", &[("up", &["Pos(0,2)"]), ("left", &["Pos(1,1)"])]),
            ("Pos(0,3)", &[("down", &["Pos(0,2)"]), ("left", &["Pos(1,3)"])]),
            (
                "Pos(0,2)",
                &[("down", &["Pos(0,1)"]), ("up", &["Pos(0,3)"]), ("start", &[])],
            ),
            ("Pos(1,3)", &[("left", &["Pos(2,3)"]), ("right", &["Pos(0,3)"])]),
            ("Pos(2,3)", &[("down", &["Pos(2,2)"]), ("right", &["Pos(1,3)"])]),
        ],
    )
}

/// The labyrinth grammar with the repeated block read as `Pos(0,1)`.
pub fn expected_labyrinth_grammar() -> TreeGrammar {
    expected_labyrinth_grammar_with("Pos(0,1)")
}

pub fn rule_set(g: &TreeGrammar) -> BTreeSet<String> {
    g.rules
        .iter()
        .flat_map(|(lhs, alts)| alts.iter().map(move |r| format!("{lhs} ↦ {r}")))
        .collect()
}

pub fn solver_config() -> SolverConfig {
    SolverConfig::from_env()
}

pub fn solver_available() -> bool {
    SolverSession::start(&solver_config()).is_ok()
}

// ---------------------------------------------------------------------------
// Typing oracle

/// Decides `Γ ⊢ M : τ` directly: a combinator applied to `n` arguments is
/// typed by the intersection of the targets of every `n`-ary path (over all
/// substitution instances) whose sources the arguments have.
pub struct TypingOracle<'a> {
    repo: &'a Repository,
    paths: BTreeMap<String, Vec<Vec<MultiArrow>>>,
    memo: RefCell<HashMap<(String, String), bool>>,
}

impl<'a> TypingOracle<'a> {
    pub fn new(repo: &'a Repository) -> Self {
        let mut table = BTreeMap::new();
        for c in &repo.combinators {
            let instances = repo.instances(&c.name).unwrap();
            let max = instances.iter().map(max_arity).max().unwrap_or(0);
            let by_arity = (0..=max)
                .map(|n| {
                    let mut all: Vec<MultiArrow> = instances.iter().flat_map(|t| paths(t, n)).collect();
                    all.sort();
                    all.dedup();
                    all
                })
                .collect();
            table.insert(c.name.clone(), by_arity);
        }
        TypingOracle {
            repo,
            paths: table,
            memo: RefCell::new(HashMap::new()),
        }
    }

    fn applicable(&self, t: &Term) -> Vec<&MultiArrow> {
        let Some(ps) = self.paths.get(&t.combinator).and_then(|p| p.get(t.args.len())) else {
            return Vec::new();
        };
        ps.iter()
            .filter(|p| p.sources.iter().zip(&t.args).all(|(s, a)| self.has_type(a, s)))
            .collect()
    }

    pub fn typeable(&self, t: &Term) -> bool {
        !self.applicable(t).is_empty()
    }

    pub fn has_type(&self, t: &Term, goal: &Type) -> bool {
        let key = (t.to_sexpr(), goal.canonical_key());
        if let Some(&v) = self.memo.borrow().get(&key) {
            return v;
        }
        let applicable = self.applicable(t);
        let v = !applicable.is_empty() && {
            let meet = Type::intersect_all(applicable.iter().map(|p| p.target.clone()).collect());
            subtype(&meet, goal, &self.repo.taxonomy).unwrap()
        };
        self.memo.borrow_mut().insert(key, v);
        v
    }

    /// All typeable terms of layout depth at most `depth`, or `None` when
    /// there are more than `cap`.
    pub fn typeable_terms(&self, depth: u32, cap: usize) -> Option<Vec<Term>> {
        let mut levels: Vec<BTreeSet<Term>> = Vec::new();
        for h in 0..=depth {
            let mut level = BTreeSet::new();
            for (name, by_arity) in &self.paths {
                for (n, ps) in by_arity.iter().enumerate() {
                    let n32 = n as u32;
                    if ps.is_empty() || n32 > h {
                        continue;
                    }
                    let mut partial: Vec<Vec<Term>> = vec![Vec::new()];
                    for k in 0..n {
                        let budget = h - (n32 - k as u32);
                        let choices = &levels[budget as usize];
                        partial = partial
                            .into_iter()
                            .flat_map(|p| {
                                choices.iter().map(move |c| {
                                    let mut p = p.clone();
                                    p.push(c.clone());
                                    p
                                })
                            })
                            .collect();
                        if partial.len() > cap * 8 {
                            return None;
                        }
                    }
                    for args in partial {
                        let t = Term::apply(name.clone(), args);
                        if self.typeable(&t) {
                            level.insert(t);
                        }
                    }
                }
            }
            if level.len() > cap {
                return None;
            }
            levels.push(level);
        }
        levels.pop().map(|l| l.into_iter().collect())
    }
}

// ---------------------------------------------------------------------------
// Random repositories

#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub repo: Repository,
    pub goal: Type,
}

fn simple(rng: &mut ChaCha8Rng, atoms: &[&str], var: Option<&str>, ctor: bool) -> Type {
    let leaf = |rng: &mut ChaCha8Rng| match var {
        Some(v) if rng.gen_bool(0.3) => Type::variable(v),
        _ => Type::constant(*atoms.choose(rng).unwrap()),
    };
    match rng.gen_range(0..10) {
        0 | 1 if ctor => Type::constructor("L", vec![leaf(rng)]),
        2 => Type::intersection(
            Type::constant(*atoms.choose(rng).unwrap()),
            Type::constant(*atoms.choose(rng).unwrap()),
        ),
        _ => leaf(rng),
    }
}

fn closed_simple(rng: &mut ChaCha8Rng, atoms: &[&str], ctor: bool) -> Type {
    simple(rng, atoms, None, ctor)
}

/// A small repository over at most three atoms with at most
/// `max_combinators` combinators and kinds of at most two members. The first
/// combinator is nullary.
pub fn random_instance(seed: u64, max_combinators: usize) -> RandomInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let atoms: &[&str] = &["a", "b", "c"][..rng.gen_range(2..=3)];
    let ctor = rng.gen_bool(0.4);
    let var = rng.gen_bool(0.5).then_some("'x");
    let mut variable_kinds = BTreeMap::new();
    if let Some(v) = var {
        let size = rng.gen_range(1..=2);
        let mut kind: Vec<Type> = Vec::new();
        while kind.len() < size {
            let t = closed_simple(&mut rng, atoms, ctor).canonical();
            if !kind.contains(&t) {
                kind.push(t);
            }
        }
        variable_kinds.insert(v.to_string(), kind);
    }
    let count = rng.gen_range(2..=max_combinators.max(2));
    let mut combinators = Vec::new();
    for i in 0..count {
        let components = rng.gen_range(1..=2);
        let mut parts = Vec::new();
        for _ in 0..components {
            let arity = if i == 0 { 0 } else { rng.gen_range(0..=2) };
            let mut t = simple(&mut rng, atoms, var, ctor);
            for _ in 0..arity {
                t = Type::arrow(simple(&mut rng, atoms, var, ctor), t);
            }
            parts.push(t);
        }
        combinators.push(Combinator {
            name: format!("c{i}"),
            ty: Type::intersect_all(parts),
        });
    }
    let used_var = combinators.iter().any(|c| !c.ty.is_closed());
    if !used_var {
        variable_kinds.clear();
    }
    let mut taxonomy = Taxonomy::default();
    if rng.gen_bool(0.3) {
        taxonomy = Taxonomy::new([(atoms[0].to_string(), atoms[1].to_string())]);
    }
    let goal = closed_simple(&mut rng, atoms, ctor);
    RandomInstance {
        repo: Repository {
            combinators,
            variable_kinds,
            taxonomy,
        },
        goal,
    }
}

/// Up to two random structural constraints over the given combinators.
pub fn random_constraints(seed: u64, names: &[String]) -> Vec<StructuralConstraint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut out = Vec::new();
    if names.is_empty() {
        return out;
    }
    for _ in 0..rng.gen_range(0..=2) {
        let c = names.choose(&mut rng).unwrap().clone();
        out.push(match rng.gen_range(0..5) {
            0 => StructuralConstraint::Forbid(c),
            1 => StructuralConstraint::NeverApplied(c),
            2 => StructuralConstraint::LeafArgument {
                combinator: c,
                position: rng.gen_range(1..=2),
            },
            3 => StructuralConstraint::ForbidCompose {
                outer: c,
                inner: names.choose(&mut rng).unwrap().clone(),
            },
            _ => {
                let min = rng.gen_range(0..=1);
                StructuralConstraint::UseCount {
                    combinator: c,
                    min,
                    max: rng.gen_bool(0.5).then(|| min + rng.gen_range(0..=2)),
                }
            }
        });
    }
    out
}

// ---------------------------------------------------------------------------
// BCD saturation oracle

/// The subtype relation on a finite universe of types, obtained by closing
/// the BCD rules (with covariant constructors and an atom taxonomy) under
/// transitivity until nothing changes.
pub struct BcdOracle {
    pub universe: Vec<Type>,
    index: HashMap<String, usize>,
    rel: Vec<Vec<u64>>,
}

impl BcdOracle {
    /// Atoms `a`, `b`, `c`; arrows between intersections of atoms; a unary
    /// constructor `C` over intersections of atoms; and every intersection
    /// of at most two of these components.
    pub fn standard(tax: &Taxonomy) -> Self {
        let atoms = ["a", "b", "c"];
        let mut atom_sets = Vec::new();
        for mask in 1u32..8 {
            let parts: Vec<Type> = (0..3)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| Type::constant(atoms[i]))
                .collect();
            atom_sets.push(Type::intersect_all(parts).canonical());
        }
        let mut components: Vec<Type> = atoms.iter().map(|a| Type::constant(*a)).collect();
        for x in &atom_sets {
            for y in &atom_sets {
                components.push(Type::arrow(x.clone(), y.clone()));
            }
        }
        for x in &atom_sets {
            components.push(Type::constructor("C", vec![x.clone()]));
        }
        let mut universe: Vec<Type> = atom_sets.clone();
        for (i, a) in components.iter().enumerate() {
            universe.push(a.clone());
            for b in &components[i + 1..] {
                universe.push(Type::intersection(a.clone(), b.clone()));
            }
        }
        BcdOracle::saturate(universe, tax)
    }

    pub fn saturate(types: Vec<Type>, tax: &Taxonomy) -> Self {
        let mut universe = Vec::new();
        let mut index = HashMap::new();
        for t in types {
            let t = t.canonical();
            let key = t.canonical_key();
            if !index.contains_key(&key) {
                index.insert(key, universe.len());
                universe.push(t);
            }
        }
        let n = universe.len();
        let words = n.div_ceil(64);
        let mut o = BcdOracle {
            universe,
            index,
            rel: vec![vec![0; words]; n],
        };
        let id = |o: &BcdOracle, t: &Type| o.index.get(&t.canonical().canonical_key()).copied();
        let comps: Vec<Vec<usize>> = o
            .universe
            .iter()
            .map(|t| t.components().iter().filter_map(|c| id(&o, c)).collect())
            .collect();
        let multi: Vec<usize> = (0..n).filter(|&i| o.universe[i].components().len() > 1).collect();
        let arrows: Vec<(usize, usize, usize)> = (0..n)
            .filter_map(|i| match &o.universe[i] {
                Type::Arrow(s, t) => Some((i, id(&o, s)?, id(&o, t)?)),
                _ => None,
            })
            .collect();
        let ctors: Vec<(usize, String, usize)> = (0..n)
            .filter_map(|i| match &o.universe[i] {
                Type::Constructor(c, args) if args.len() == 1 => Some((i, c.clone(), id(&o, &args[0])?)),
                _ => None,
            })
            .collect();
        let mut distributions = Vec::new();
        for &w in &multi {
            if let [Type::Arrow(s1, t1), Type::Arrow(s2, t2)] = o.universe[w].components().as_slice() {
                if s1.canonical() == s2.canonical() {
                    let joined = Type::arrow((**s1).clone(), Type::intersection((**t1).clone(), (**t2).clone()));
                    if let Some(d) = id(&o, &joined) {
                        distributions.push((w, d));
                    }
                }
            }
        }
        let atom_ids: Vec<(usize, String)> = (0..n)
            .filter_map(|i| match &o.universe[i] {
                Type::Constant(a) => Some((i, a.clone())),
                _ => None,
            })
            .collect();

        for i in 0..n {
            o.set(i, i);
            for &c in &comps[i] {
                o.set(i, c);
            }
        }
        for (i, a) in &atom_ids {
            for (j, b) in &atom_ids {
                if tax.is_subtype(a, b) {
                    o.set(*i, *j);
                }
            }
        }
        for &(w, d) in &distributions {
            o.set(w, d);
        }
        loop {
            let mut changed = false;
            for &(p, s1, t1) in &arrows {
                for &(q, s2, t2) in &arrows {
                    if o.leq(s2, s1) && o.leq(t1, t2) {
                        changed |= o.set(p, q);
                    }
                }
            }
            for (p, c1, x) in &ctors {
                for (q, c2, y) in &ctors {
                    if c1 == c2 && o.leq(*x, *y) {
                        changed |= o.set(*p, *q);
                    }
                }
            }
            for u in 0..n {
                for &w in &multi {
                    if !o.leq(u, w) && comps[w].iter().all(|&c| o.leq(u, c)) {
                        changed |= o.set(u, w);
                    }
                }
            }
            // Transitive closure.
            for k in 0..n {
                let row_k = o.rel[k].clone();
                for i in 0..n {
                    if o.leq(i, k) {
                        for (wi, bits) in row_k.iter().enumerate() {
                            let before = o.rel[i][wi];
                            let after = before | bits;
                            if after != before {
                                o.rel[i][wi] = after;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        o
    }

    fn set(&mut self, i: usize, j: usize) -> bool {
        let (w, b) = (j / 64, 1u64 << (j % 64));
        let was = self.rel[i][w] & b != 0;
        self.rel[i][w] |= b;
        !was
    }

    pub fn leq(&self, i: usize, j: usize) -> bool {
        self.rel[i][j / 64] & (1u64 << (j % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.universe.len()
    }
}
