//! Given an existentially quantified query over finite-domain variables, a
//! property grammar, and executable semantics, this crate computes a best
//! conjunction of strongest consequences and a best disjunction of weakest
//! implicants, machine-checked against an exhaustive oracle at desk scale.

pub mod cegis;
pub mod grammar;
pub mod io;
pub mod lang;
pub mod model;
pub mod oracle;
pub mod pack;
pub mod search;
pub mod transform;

pub use cegis::{synth_strongest_conjunction, synth_weakest_disjunction, SynthesisReport};
pub use grammar::{enumerate_properties, Grammar, Property};
pub use model::{Domain, Example, HiddenInstance, LoudProblem, Mode, SearchConfig, Value, VarDecl, VarKind};
pub use search::Engine;
