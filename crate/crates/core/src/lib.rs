//! Synthesis of applicative terms from intersection-typed combinators.
//!
//! The pipeline: [`inhabitation::inhabit`] computes a tree grammar of all
//! inhabitants of a goal type, [`smt::translate_grammar`] turns it into
//! SMT-LIB constraints over `inhabitant` and `ty`, structural constraints
//! filter unwanted shapes, and [`solver::enumerate_solutions`] reads terms
//! back from an external solver.

pub mod bench;
pub mod grammar;
pub mod inhabitation;
pub mod maze;
pub mod oracle;
pub mod repository;
pub mod smt;
pub mod solver;
pub mod types;

pub use grammar::{Rule, Term, TreeGrammar, VertexLayout};
pub use inhabitation::{inhabit, prune, InhabitationRequest};
pub use repository::{parse_repository, Repository};
pub use smt::{parse_constraints, CombinatorTable, SmtScript, StructuralConstraint, Tables, TranslateOptions};
pub use solver::{SolveOutcome, SolverConfig};
pub use types::{parse_type, subtype, Type};
