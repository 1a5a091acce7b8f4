//! The property DSL: grammar representation, macro desugaring, canonical
//! enumeration, and example-driven synthesis.

mod enumerate;
mod synth;

pub use enumerate::{count_derivations, enumerate_properties};
pub use synth::{synthesize_vec, CandSet, SynthError, SynthExamples};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{BinOp, Expr, ExprKind, UnOp};
use crate::model::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrammarError {
    #[error("grammar references undefined nonterminal `{0}`")]
    UndefinedNonterminal(String),
    #[error("grammar enumeration exceeds the configured cap ({0} candidates)")]
    TooLarge(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MacroOp {
    Conj,
    Disj,
}

/// One right-hand-side template. Nonterminal references and conj/disj macros
/// may appear anywhere a subexpression can.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TNode {
    Lit(Value),
    Var(String),
    Un(UnOp, Box<TNode>),
    Bin(BinOp, Box<TNode>, Box<TNode>),
    Call(String, Vec<TNode>),
    Index(Box<TNode>, Box<TNode>),
    Nt(String),
    /// `conj(N, lo..hi)` / `disj(N, lo..hi)`; the 0-ary cases mean ⊤ and ⊥.
    Macro(MacroOp, String, u32, u32),
}

pub type Production = TNode;

/// A depth-bounded context-free grammar over expression templates.
///
/// Derivable sets are finite by construction: every derivation is cut off at
/// `depth_bound`, so infinite "best conjunctions" cannot arise here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    /// Ordered (name, productions) pairs; order fixes enumeration ties.
    pub nonterminals: Vec<(String, Vec<Production>)>,
    pub start: String,
    pub depth_bound: u32,
}

impl Grammar {
    pub fn productions(&self, nt: &str) -> Option<&[Production]> {
        self.nonterminals.iter().find(|(n, _)| n == nt).map(|(_, ps)| ps.as_slice())
    }

    pub fn validate(&self) -> Result<(), GrammarError> {
        fn walk(g: &Grammar, t: &TNode) -> Result<(), GrammarError> {
            match t {
                TNode::Nt(n) | TNode::Macro(_, n, _, _) => {
                    if g.productions(n).is_none() {
                        return Err(GrammarError::UndefinedNonterminal(n.clone()));
                    }
                }
                TNode::Un(_, a) => walk(g, a)?,
                TNode::Bin(_, a, b) | TNode::Index(a, b) => {
                    walk(g, a)?;
                    walk(g, b)?;
                }
                TNode::Call(_, args) => {
                    for a in args {
                        walk(g, a)?;
                    }
                }
                TNode::Lit(_) | TNode::Var(_) => {}
            }
            Ok(())
        }
        if self.productions(&self.start).is_none() {
            return Err(GrammarError::UndefinedNonterminal(self.start.clone()));
        }
        for (_, prods) in &self.nonterminals {
            for p in prods {
                walk(self, p)?;
            }
        }
        Ok(())
    }

    /// A grammar whose derivable set is exactly the negations of this one's:
    /// a fresh start symbol wrapping the old start in logical negation.
    pub fn negated(&self) -> Grammar {
        let mut fresh = "Neg".to_string();
        while self.productions(&fresh).is_some() {
            fresh.push('_');
        }
        let mut nonterminals = vec![(
            fresh.clone(),
            vec![TNode::Un(UnOp::Not, Box::new(TNode::Nt(self.start.clone())))],
        )];
        nonterminals.extend(self.nonterminals.iter().cloned());
        Grammar { nonterminals, start: fresh, depth_bound: self.depth_bound + 1 }
    }
}

/// A property drawn from a grammar: a normalized AST plus the canonical-order
/// metadata used to break ties deterministically.
///
/// Canonical order is the lexicographic triple
/// `(total macro arity, node count, printed form)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Property {
    pub ast: Expr,
    /// Summed arity of every conj/disj macro instance in the derivation.
    pub arity: u32,
    /// Node count of the normalized AST.
    pub size: u32,
    /// Normalized printed form; lexicographic tiebreaker.
    pub tokens: String,
    pub derivation_depth: u32,
    /// Position within a full canonical enumeration, when one produced this.
    pub canonical_index: Option<u64>,
}

impl Property {
    pub fn from_parts(ast: Expr, arity: u32, depth: u32) -> Self {
        let size = ast.node_count() as u32;
        let tokens = ast.to_string();
        Property { ast, arity, size, tokens, derivation_depth: depth, canonical_index: None }
    }

    /// The property `true` (empty conjunction).
    pub fn top() -> Self {
        Property::from_parts(Expr::bool_lit(true), 0, 0)
    }

    /// The property `false` (empty disjunction).
    pub fn bottom() -> Self {
        Property::from_parts(Expr::bool_lit(false), 0, 0)
    }

    pub fn is_top(&self) -> bool {
        self.ast.kind == ExprKind::Lit(Value::Bool(true))
    }

    pub fn is_bottom(&self) -> bool {
        self.ast.kind == ExprKind::Lit(Value::Bool(false))
    }

    /// Wrap an arbitrary boolean expression as a property.
    pub fn from_expr(ast: Expr) -> Self {
        Property::from_parts(ast, 0, 0)
    }

    pub fn key(&self) -> (u32, u32, &str) {
        (self.arity, self.size, &self.tokens)
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tokens)
    }
}

/// A commutative-idempotent normal form for macro-generated connectives:
/// a sorted, duplicate-free atom list under a connective tag. Permutations
/// and duplicates of atoms map to the same value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalizedConjunct {
    pub op: MacroOp,
    pub atoms: Vec<Expr>,
}

impl NormalizedConjunct {
    pub fn new(op: MacroOp, mut atoms: Vec<Expr>) -> Self {
        atoms.sort_by_key(|a| a.to_string());
        atoms.dedup();
        NormalizedConjunct { op, atoms }
    }

    /// Fold into a plain expression; the empty conjunction is ⊤ and the
    /// empty disjunction ⊥.
    pub fn into_expr(self) -> Expr {
        match self.op {
            MacroOp::Conj => Expr::and_all(self.atoms),
            MacroOp::Disj => Expr::or_all(self.atoms),
        }
    }
}

pub(crate) fn fold_macro(op: MacroOp, atoms: Vec<Expr>) -> Expr {
    NormalizedConjunct::new(op, atoms).into_expr()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negated_grammar_wraps_start() {
        let g = Grammar {
            nonterminals: vec![("S".into(), vec![TNode::Lit(Value::Bool(true))])],
            start: "S".into(),
            depth_bound: 2,
        };
        let n = g.negated();
        assert!(n.validate().is_ok());
        assert_ne!(n.start, "S");
        assert_eq!(n.depth_bound, 3);
    }

    #[test]
    fn validate_rejects_undefined_nonterminal() {
        let g = Grammar {
            nonterminals: vec![("S".into(), vec![TNode::Nt("Missing".into())])],
            start: "S".into(),
            depth_bound: 2,
        };
        assert_eq!(g.validate(), Err(GrammarError::UndefinedNonterminal("Missing".into())));
    }

    #[test]
    fn fold_macro_normalizes_permutations_and_duplicates() {
        let a = Expr::binary(BinOp::Lt, Expr::var("x"), Expr::var("y"));
        let b = Expr::binary(BinOp::Lt, Expr::var("y"), Expr::var("x"));
        let p1 = fold_macro(MacroOp::Disj, vec![a.clone(), b.clone()]);
        let p2 = fold_macro(MacroOp::Disj, vec![b.clone(), a.clone(), a.clone()]);
        assert_eq!(p1, p2);
        assert_eq!(fold_macro(MacroOp::Conj, vec![]), Expr::bool_lit(true));
        assert_eq!(fold_macro(MacroOp::Disj, vec![]), Expr::bool_lit(false));
    }
}
