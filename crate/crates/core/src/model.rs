//! Shared data model: values, domains, variables, queries, examples, and
//! problem descriptions.
//!
//! Everything here is immutable after construction and safe to share across
//! threads; enumeration cursors are single-owner.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::lang::{Expr, FuncDef};

/// A finite-domain scalar or fixed-length list value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Bool(bool),
    List(Vec<Value>),
}

impl Value {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::List(xs) => {
                write!(f, "[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
        }
    }
}

/// Whether a variable is a free ("visible") or existentially quantified
/// ("hidden") variable of the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Free,
    Hidden,
}

/// A finite, non-empty domain of values.
///
/// Explicit sets are sorted and deduplicated at construction so enumeration
/// order is always ascending. Each variable owns its domain object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Domain {
    IntRange { lo: i64, hi: i64 },
    Explicit(Vec<Value>),
    List { elem: Box<Domain>, len_lo: u32, len_hi: u32 },
}

impl Domain {
    pub fn explicit(mut values: Vec<Value>) -> Self {
        values.sort();
        values.dedup();
        Domain::Explicit(values)
    }

    pub fn bool() -> Self {
        Domain::Explicit(vec![Value::Bool(false), Value::Bool(true)])
    }

    /// Number of values in the domain.
    pub fn size(&self) -> u64 {
        match self {
            Domain::IntRange { lo, hi } => (hi - lo + 1) as u64,
            Domain::Explicit(vs) => vs.len() as u64,
            Domain::List { elem, len_lo, len_hi } => {
                let e = elem.size();
                (*len_lo..=*len_hi).map(|n| e.saturating_pow(n)).sum()
            }
        }
    }

    /// The `i`-th value in enumeration order: integers ascending, explicit
    /// sets in sorted order, lists in length-then-lexicographic order.
    pub fn value_at(&self, i: u64) -> Value {
        match self {
            Domain::IntRange { lo, .. } => Value::Int(lo + i as i64),
            Domain::Explicit(vs) => vs[i as usize].clone(),
            Domain::List { elem, len_lo, len_hi } => {
                let e = elem.size();
                let mut rest = i;
                for n in *len_lo..=*len_hi {
                    let count = e.saturating_pow(n);
                    if rest < count {
                        // mixed-radix decode, first element most significant
                        let mut items = vec![Value::Int(0); n as usize];
                        let mut r = rest;
                        for k in (0..n as usize).rev() {
                            items[k] = elem.value_at(r % e);
                            r /= e;
                        }
                        return Value::List(items);
                    }
                    rest -= count;
                }
                unreachable!("index out of domain")
            }
        }
    }

    pub fn contains(&self, v: &Value) -> bool {
        match (self, v) {
            (Domain::IntRange { lo, hi }, Value::Int(n)) => lo <= n && n <= hi,
            (Domain::Explicit(vs), v) => vs.contains(v),
            (Domain::List { elem, len_lo, len_hi }, Value::List(xs)) => {
                let n = xs.len() as u32;
                *len_lo <= n && n <= *len_hi && xs.iter().all(|x| elem.contains(x))
            }
            _ => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Value> + '_ {
        (0..self.size()).map(|i| self.value_at(i))
    }
}

/// A declared variable of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    pub domain: Domain,
}

/// A finite mapping from variable names to values.
pub type Valuation = BTreeMap<String, Value>;

/// A valuation of the free variables of a problem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Example {
    pub bindings: Valuation,
}

/// A valuation of the hidden (existentially quantified) variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HiddenInstance {
    pub bindings: Valuation,
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for HiddenInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, (k, v)) in self.bindings.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        write!(f, ")")
    }
}

/// Search bounds and run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub property_depth_bound: u32,
    pub loop_unroll_bound: u32,
    pub recursion_depth_bound: u32,
    /// 0 means no timeout.
    pub timeout_millis: u64,
    pub seed: u64,
    pub h_cache_enabled: bool,
    pub oracle_check_enabled: bool,
    /// Global integer magnitude bound; arithmetic past it is a fault.
    pub int_magnitude_bound: i64,
    /// Candidate cap for full grammar enumeration.
    pub enumeration_cap: u64,
    pub deterministic: bool,
    pub threads: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            property_depth_bound: 8,
            loop_unroll_bound: 64,
            recursion_depth_bound: 16,
            timeout_millis: 20 * 60 * 1000,
            seed: 0,
            h_cache_enabled: true,
            oracle_check_enabled: false,
            int_magnitude_bound: i32::MAX as i64,
            enumeration_cap: 100_000_000,
            deterministic: true,
            threads: 1,
        }
    }
}

/// Which approximation direction a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Strongest consequences (over-approximation).
    Over,
    /// Weakest implicants (under-approximation).
    Under,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Over => write!(f, "over"),
            Mode::Under => write!(f, "under"),
        }
    }
}

/// A full synthesis problem: query body, variable declarations, function
/// definitions, property grammars, and search bounds.
#[derive(Debug, Clone)]
pub struct LoudProblem {
    pub name: String,
    pub vars: Vec<VarDecl>,
    /// The quantifier-free query body psi(v, h).
    pub query: Expr,
    pub functions: Vec<FuncDef>,
    pub grammar_over: Option<crate::grammar::Grammar>,
    pub grammar_under: Option<crate::grammar::Grammar>,
    pub config: SearchConfig,
}

impl LoudProblem {
    pub fn free_vars(&self) -> impl Iterator<Item = &VarDecl> {
        self.vars.iter().filter(|v| v.kind == VarKind::Free)
    }

    pub fn hidden_vars(&self) -> impl Iterator<Item = &VarDecl> {
        self.vars.iter().filter(|v| v.kind == VarKind::Hidden)
    }

    pub fn example_domain_size(&self) -> u64 {
        self.free_vars().map(|v| v.domain.size()).product()
    }

    pub fn hidden_domain_size(&self) -> u64 {
        self.hidden_vars().map(|v| v.domain.size()).product()
    }

    /// Every valuation of the free variables, exactly once, in a fixed order:
    /// variables in declaration order with the first-declared most
    /// significant, values ascending within each domain.
    pub fn example_domain(&self) -> impl Iterator<Item = Example> + '_ {
        let decls: Vec<&VarDecl> = self.free_vars().collect();
        domain_product(decls).map(|bindings| Example { bindings })
    }

    /// As `example_domain`, over the hidden variables.
    pub fn hidden_domain(&self) -> impl Iterator<Item = HiddenInstance> + '_ {
        let decls: Vec<&VarDecl> = self.hidden_vars().collect();
        domain_product(decls).map(|bindings| HiddenInstance { bindings })
    }

    pub fn example_at(&self, i: u64) -> Example {
        let decls: Vec<&VarDecl> = self.free_vars().collect();
        Example { bindings: product_at(&decls, i) }
    }

    pub fn hidden_at(&self, i: u64) -> HiddenInstance {
        let decls: Vec<&VarDecl> = self.hidden_vars().collect();
        HiddenInstance { bindings: product_at(&decls, i) }
    }
}

fn product_at(decls: &[&VarDecl], mut i: u64) -> Valuation {
    let mut bindings = Valuation::new();
    for d in decls.iter().rev() {
        let n = d.domain.size();
        bindings.insert(d.name.clone(), d.domain.value_at(i % n));
        i /= n;
    }
    bindings
}

fn domain_product<'a>(decls: Vec<&'a VarDecl>) -> impl Iterator<Item = Valuation> + 'a {
    let total: u64 = decls.iter().map(|d| d.domain.size()).product();
    (0..total).map(move |i| product_at(&decls, i))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, kind: VarKind, domain: Domain) -> VarDecl {
        VarDecl { name: name.to_string(), kind, domain }
    }

    fn toy_problem(vars: Vec<VarDecl>) -> LoudProblem {
        LoudProblem {
            name: "toy".into(),
            vars,
            query: crate::lang::Expr::bool_lit(true),
            functions: vec![],
            grammar_over: None,
            grammar_under: None,
            config: SearchConfig::default(),
        }
    }

    #[test]
    fn product_of_singleton_and_pair() {
        let p = toy_problem(vec![
            var("a", VarKind::Free, Domain::explicit(vec![Value::Int(0), Value::Int(1)])),
            var("b", VarKind::Free, Domain::explicit(vec![Value::Int(0)])),
        ]);
        let got: Vec<Example> = p.example_domain().collect();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].bindings["a"], Value::Int(0));
        assert_eq!(got[0].bindings["b"], Value::Int(0));
        assert_eq!(got[1].bindings["a"], Value::Int(1));
        assert_eq!(got[1].bindings["b"], Value::Int(0));
    }

    #[test]
    fn modhash_example_domain_size() {
        // a, y in [-15,15], M in [1,16]: 31 * 31 * 16 = 15376
        let p = toy_problem(vec![
            var("y", VarKind::Free, Domain::IntRange { lo: -15, hi: 15 }),
            var("a", VarKind::Free, Domain::IntRange { lo: -15, hi: 15 }),
            var("M", VarKind::Free, Domain::IntRange { lo: 1, hi: 16 }),
            var("x", VarKind::Hidden, Domain::IntRange { lo: -15, hi: 15 }),
        ]);
        assert_eq!(p.example_domain_size(), 15376);
        assert_eq!(p.example_domain().count(), 15376);
        assert_eq!(p.hidden_domain_size(), 31);
        assert_eq!(p.hidden_domain().count(), 31);
    }

    #[test]
    fn zero_free_vars_yield_single_empty_example() {
        let p = toy_problem(vec![var(
            "x",
            VarKind::Hidden,
            Domain::IntRange { lo: 0, hi: 3 },
        )]);
        let got: Vec<Example> = p.example_domain().collect();
        assert_eq!(got.len(), 1);
        assert!(got[0].bindings.is_empty());
    }

    #[test]
    fn no_hidden_vars_yield_single_empty_instance() {
        let p = toy_problem(vec![var("x", VarKind::Free, Domain::IntRange { lo: 0, hi: 3 })]);
        let got: Vec<HiddenInstance> = p.hidden_domain().collect();
        assert_eq!(got.len(), 1);
        assert!(got[0].bindings.is_empty());
    }

    #[test]
    fn philosophers_schedule_domain_count() {
        // list length 6 over {1,2,3} -> 3^6 = 729
        let d = Domain::List {
            elem: Box::new(Domain::IntRange { lo: 1, hi: 3 }),
            len_lo: 6,
            len_hi: 6,
        };
        assert_eq!(d.size(), 729);
    }

    #[test]
    fn list_domain_length_then_lex_order() {
        let d = Domain::List {
            elem: Box::new(Domain::IntRange { lo: 0, hi: 1 }),
            len_lo: 0,
            len_hi: 2,
        };
        let got: Vec<Value> = d.iter().collect();
        assert_eq!(d.size(), 1 + 2 + 4);
        assert_eq!(got[0], Value::List(vec![]));
        assert_eq!(got[1], Value::List(vec![Value::Int(0)]));
        assert_eq!(got[2], Value::List(vec![Value::Int(1)]));
        assert_eq!(got[3], Value::List(vec![Value::Int(0), Value::Int(0)]));
        assert_eq!(got[4], Value::List(vec![Value::Int(0), Value::Int(1)]));
        assert_eq!(got[6], Value::List(vec![Value::Int(1), Value::Int(1)]));
    }

    #[test]
    fn enumeration_is_deterministic_and_duplicate_free() {
        let p = toy_problem(vec![
            var("a", VarKind::Free, Domain::IntRange { lo: -2, hi: 2 }),
            var("b", VarKind::Free, Domain::explicit(vec![Value::Bool(true), Value::Bool(false)])),
        ]);
        let a: Vec<Example> = p.example_domain().collect();
        let b: Vec<Example> = p.example_domain().collect();
        assert_eq!(a, b);
        let mut dedup = a.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), a.len());
        assert_eq!(a.len() as u64, p.example_domain_size());
    }
}
