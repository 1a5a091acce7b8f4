//! Brute-force reference implementation by exhaustive enumeration: ground
//! truth for tests and an optional post-run validator. The oracle never goes
//! through the CEGIS/CEGQI path; it is plain double loops over the domains
//! and truth-vector minimization over the enumerated grammar.

use crate::grammar::{enumerate_properties, Grammar, Property};
use crate::lang::{
    check_functions, eval_property_expr, eval_query_counted, EvalCtx, FuncTable,
};
use crate::model::{LoudProblem, Mode};
use crate::search::EngineError;

/// Default bound on example × hidden pairs the oracle will sweep.
pub const ORACLE_PAIR_BOUND: u64 = 100_000_000;

/// Bit-set truth vector over the canonical example ordering.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TruthVec {
    words: Vec<u64>,
    len: usize,
}

impl TruthVec {
    pub fn new(len: usize) -> Self {
        TruthVec { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = TruthVec::new(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.set(i);
            }
        }
        v
    }

    pub fn set(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_subset(&self, other: &TruthVec) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn is_strict_subset(&self, other: &TruthVec) -> bool {
        self.is_subset(other) && self.words != other.words
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }
}

fn funcs_of(problem: &LoudProblem) -> Result<FuncTable, EngineError> {
    let t = FuncTable::new(&problem.functions)?;
    check_functions(&t)?;
    Ok(t)
}

/// The set of positive examples, by double loop over the full example and
/// hidden domains.
pub fn oracle_positive_set(problem: &LoudProblem) -> Result<TruthVec, EngineError> {
    let pairs = problem.example_domain_size().saturating_mul(problem.hidden_domain_size());
    if pairs > ORACLE_PAIR_BOUND {
        return Err(EngineError::DomainTooLarge(pairs, ORACLE_PAIR_BOUND));
    }
    let funcs = funcs_of(problem)?;
    let ctx = EvalCtx::new(&funcs, &problem.config);
    let n = problem.example_domain_size() as usize;
    let mut out = TruthVec::new(n);
    let mut faults = 0u64;
    for (i, e) in problem.example_domain().enumerate() {
        for h in problem.hidden_domain() {
            if eval_query_counted(&problem.query, &e.bindings, &h.bindings, &ctx, &mut faults) {
                out.set(i);
                break;
            }
        }
    }
    Ok(out)
}

/// The set of examples a property accepts.
pub fn oracle_interp(prop: &Property, problem: &LoudProblem) -> Result<TruthVec, EngineError> {
    let funcs = funcs_of(problem)?;
    let ctx = EvalCtx::new(&funcs, &problem.config);
    let n = problem.example_domain_size() as usize;
    let mut out = TruthVec::new(n);
    for (i, e) in problem.example_domain().enumerate() {
        if eval_property_expr(&prop.ast, &e.bindings, &ctx)? {
            out.set(i);
        }
    }
    Ok(out)
}

fn interpretations(
    problem: &LoudProblem,
    grammar: &Grammar,
) -> Result<Vec<(Property, TruthVec)>, EngineError> {
    let props = enumerate_properties(grammar, problem.config.enumeration_cap)?;
    let funcs = funcs_of(problem)?;
    let ctx = EvalCtx::new(&funcs, &problem.config);
    let n = problem.example_domain_size() as usize;
    let examples: Vec<_> = problem.example_domain().collect();
    let mut out = Vec::with_capacity(props.len());
    for p in props {
        let mut v = TruthVec::new(n);
        for (i, e) in examples.iter().enumerate() {
            if eval_property_expr(&p.ast, &e.bindings, &ctx)? {
                v.set(i);
            }
        }
        out.push((p, v));
    }
    Ok(out)
}

/// All consequences with no strictly stronger consequence, one canonical
/// representative per distinct interpretation.
pub fn oracle_strongest_consequences(
    problem: &LoudProblem,
    grammar: &Grammar,
) -> Result<Vec<Property>, EngineError> {
    let positive = oracle_positive_set(problem)?;
    let all = interpretations(problem, grammar)?;
    let sound: Vec<(Property, TruthVec)> =
        all.into_iter().filter(|(_, v)| positive.is_subset(v)).collect();
    let mut out = Vec::new();
    let mut seen_vecs: Vec<TruthVec> = Vec::new();
    for (p, v) in &sound {
        if seen_vecs.contains(v) {
            continue;
        }
        if sound.iter().any(|(_, v2)| v2.is_strict_subset(v)) {
            continue;
        }
        seen_vecs.push(v.clone());
        out.push(p.clone());
    }
    Ok(out)
}

/// All implicants with no strictly weaker implicant; dual of the above.
pub fn oracle_weakest_implicants(
    problem: &LoudProblem,
    grammar: &Grammar,
) -> Result<Vec<Property>, EngineError> {
    let positive = oracle_positive_set(problem)?;
    let all = interpretations(problem, grammar)?;
    let sound: Vec<(Property, TruthVec)> =
        all.into_iter().filter(|(_, v)| v.is_subset(&positive)).collect();
    let mut out = Vec::new();
    let mut seen_vecs: Vec<TruthVec> = Vec::new();
    for (p, v) in &sound {
        if seen_vecs.contains(v) {
            continue;
        }
        if sound.iter().any(|(_, v2)| v.is_strict_subset(v2)) {
            continue;
        }
        seen_vecs.push(v.clone());
        out.push(p.clone());
    }
    Ok(out)
}

/// The intersection (over) or union (under) of the corresponding oracle set's
/// interpretations: the reference semantics any best result must match.
pub fn oracle_best_semantics(
    problem: &LoudProblem,
    grammar: &Grammar,
    mode: Mode,
) -> Result<TruthVec, EngineError> {
    let n = problem.example_domain_size() as usize;
    match mode {
        Mode::Over => {
            let set = oracle_strongest_consequences(problem, grammar)?;
            let mut acc = TruthVec::from_bools(&vec![true; n]);
            for p in &set {
                let v = oracle_interp(p, problem)?;
                for (a, b) in acc.words.iter_mut().zip(&v.words) {
                    *a &= b;
                }
            }
            Ok(acc)
        }
        Mode::Under => {
            let set = oracle_weakest_implicants(problem, grammar)?;
            let mut acc = TruthVec::new(n);
            for p in &set {
                let v = oracle_interp(p, problem)?;
                for (a, b) in acc.words.iter_mut().zip(&v.words) {
                    *a |= b;
                }
            }
            Ok(acc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_problem;

    fn tiny(query: &str, over_atoms: &str) -> LoudProblem {
        let src = format!(
            r#"problem tiny;
vars {{ int y in [-3, 3]; exist int x in [-3, 3]; }}
query {{ {query}; }}
grammar over {{ start D; D -> disj(AP, 0..2); AP -> {over_atoms}; }}
"#
        );
        parse_problem(&src).unwrap()
    }

    #[test]
    fn positive_set_of_false_query_is_empty() {
        let p = tiny("false", "y == 0");
        let v = oracle_positive_set(&p).unwrap();
        assert!(v.to_bools().iter().all(|&b| !b));
    }

    #[test]
    fn positive_set_of_true_query_is_everything() {
        let p = tiny("true", "y == 0");
        let v = oracle_positive_set(&p).unwrap();
        assert!(v.to_bools().iter().all(|&b| b));
    }

    #[test]
    fn interp_of_top_and_bottom() {
        let p = tiny("y == x", "y == 0");
        let top = oracle_interp(&Property::top(), &p).unwrap();
        assert!(top.to_bools().iter().all(|&b| b));
        let bot = oracle_interp(&Property::bottom(), &p).unwrap();
        assert!(bot.to_bools().iter().all(|&b| !b));
    }

    #[test]
    fn two_element_chain_keeps_the_stronger() {
        // query: exists x. y == abs(x)  ->  positives are 0..3
        let src = r#"problem chain;
vars { int y in [-3, 3]; exist int x in [-3, 3]; }
query { y == abs(x); }
grammar over { start D; D -> true | 0 <= y; }
"#;
        let p = parse_problem(src).unwrap();
        let g = p.grammar_over.clone().unwrap();
        let set = oracle_strongest_consequences(&p, &g).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set[0].tokens, "0 <= y");
    }

    #[test]
    fn unsat_query_over_approximated_by_minimal_interpretations() {
        let p = tiny("false", "y == 0 | y == 1");
        let g = p.grammar_over.clone().unwrap();
        // every property over-approximates the empty set; minimal is ⊥
        let set = oracle_strongest_consequences(&p, &g).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set[0].is_bottom());
        let best = oracle_best_semantics(&p, &g, Mode::Over).unwrap();
        assert!(best.to_bools().iter().all(|&b| !b));
    }

    #[test]
    fn weakest_implicants_of_bottom_grammar() {
        let src = r#"problem bot;
vars { int y in [0, 2]; exist int x in [0, 2]; }
query { y == x; }
grammar under { start D; D -> false; }
"#;
        let p = parse_problem(src).unwrap();
        let g = p.grammar_under.clone().unwrap();
        let best = oracle_best_semantics(&p, &g, Mode::Under).unwrap();
        assert!(best.to_bools().iter().all(|&b| !b));
    }
}
