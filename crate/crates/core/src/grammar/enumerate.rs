//! Full canonical enumeration of a grammar's derivable properties.
//!
//! Enumeration materializes every normalized candidate, so it is guarded by a
//! cap; the engine's synthesis path never calls this (it works on
//! observational-equivalence classes instead). The oracle and small tests do.

use std::collections::HashMap;
use std::rc::Rc;

use super::{fold_macro, Grammar, GrammarError, MacroOp, Property, TNode};
use crate::lang::{Expr, ExprKind};

#[derive(Debug, Clone)]
struct RawCand {
    expr: Expr,
    arity: u32,
    depth: u32,
}

struct Enumerator<'g> {
    grammar: &'g Grammar,
    cap: u64,
    produced: u64,
    memo: HashMap<(String, u32), Rc<Vec<RawCand>>>,
}

impl<'g> Enumerator<'g> {
    fn bump(&mut self, n: u64) -> Result<(), GrammarError> {
        self.produced = self.produced.saturating_add(n);
        if self.produced > self.cap {
            Err(GrammarError::TooLarge(self.cap))
        } else {
            Ok(())
        }
    }

    fn nt_cands(&mut self, nt: &str, depth: u32) -> Result<Rc<Vec<RawCand>>, GrammarError> {
        if depth == 0 {
            return Ok(Rc::new(Vec::new()));
        }
        let key = (nt.to_string(), depth);
        if let Some(c) = self.memo.get(&key) {
            return Ok(c.clone());
        }
        let prods = self
            .grammar
            .productions(nt)
            .ok_or_else(|| GrammarError::UndefinedNonterminal(nt.to_string()))?
            .to_vec();
        let mut out = Vec::new();
        for p in &prods {
            self.tmpl_cands(p, depth - 1, &mut out)?;
        }
        // same normalized ast via different derivations counts once
        let mut seen: HashMap<Expr, usize> = HashMap::new();
        let mut dedup: Vec<RawCand> = Vec::new();
        for c in out {
            match seen.get(&c.expr) {
                Some(&i) => {
                    if (c.arity, c.depth) < (dedup[i].arity, dedup[i].depth) {
                        dedup[i] = c;
                    }
                }
                None => {
                    seen.insert(c.expr.clone(), dedup.len());
                    dedup.push(c);
                }
            }
        }
        let rc = Rc::new(dedup);
        self.memo.insert(key, rc.clone());
        Ok(rc)
    }

    fn tmpl_cands(
        &mut self,
        t: &TNode,
        depth: u32,
        out: &mut Vec<RawCand>,
    ) -> Result<(), GrammarError> {
        match t {
            TNode::Lit(v) => {
                self.bump(1)?;
                out.push(RawCand { expr: Expr::synth(ExprKind::Lit(v.clone())), arity: 0, depth: 1 });
            }
            TNode::Var(name) => {
                self.bump(1)?;
                out.push(RawCand { expr: Expr::var(name.clone()), arity: 0, depth: 1 });
            }
            TNode::Un(op, a) => {
                let mut inner = Vec::new();
                self.tmpl_cands(a, depth, &mut inner)?;
                self.bump(inner.len() as u64)?;
                for c in inner {
                    out.push(RawCand {
                        expr: Expr::synth(ExprKind::Unary(*op, Box::new(c.expr))),
                        arity: c.arity,
                        depth: c.depth + 1,
                    });
                }
            }
            TNode::Bin(op, a, b) => {
                let mut la = Vec::new();
                let mut lb = Vec::new();
                self.tmpl_cands(a, depth, &mut la)?;
                self.tmpl_cands(b, depth, &mut lb)?;
                self.bump(la.len() as u64 * lb.len() as u64)?;
                for ca in &la {
                    for cb in &lb {
                        out.push(RawCand {
                            expr: Expr::synth(ExprKind::Binary(
                                *op,
                                Box::new(ca.expr.clone()),
                                Box::new(cb.expr.clone()),
                            )),
                            arity: ca.arity + cb.arity,
                            depth: 1 + ca.depth.max(cb.depth),
                        });
                    }
                }
            }
            TNode::Index(a, b) => {
                let mut la = Vec::new();
                let mut lb = Vec::new();
                self.tmpl_cands(a, depth, &mut la)?;
                self.tmpl_cands(b, depth, &mut lb)?;
                self.bump(la.len() as u64 * lb.len() as u64)?;
                for ca in &la {
                    for cb in &lb {
                        out.push(RawCand {
                            expr: Expr::synth(ExprKind::Index(
                                Box::new(ca.expr.clone()),
                                Box::new(cb.expr.clone()),
                            )),
                            arity: ca.arity + cb.arity,
                            depth: 1 + ca.depth.max(cb.depth),
                        });
                    }
                }
            }
            TNode::Call(name, args) => {
                let mut slots: Vec<Vec<RawCand>> = Vec::with_capacity(args.len());
                let mut total = 1u64;
                for a in args {
                    let mut s = Vec::new();
                    self.tmpl_cands(a, depth, &mut s)?;
                    total = total.saturating_mul(s.len() as u64);
                    slots.push(s);
                }
                self.bump(total)?;
                product(&slots, &mut |chosen| {
                    let exprs: Vec<Expr> = chosen.iter().map(|c| c.expr.clone()).collect();
                    out.push(RawCand {
                        expr: Expr::synth(ExprKind::Call(name.clone(), exprs)),
                        arity: chosen.iter().map(|c| c.arity).sum(),
                        depth: 1 + chosen.iter().map(|c| c.depth).max().unwrap_or(0),
                    });
                });
            }
            TNode::Nt(n) => {
                let cands = self.nt_cands(n, depth)?;
                self.bump(cands.len() as u64)?;
                out.extend(cands.iter().cloned());
            }
            TNode::Macro(op, n, lo, hi) => {
                let base = self.nt_cands(n, depth)?;
                // duplicate children normalize away, so the derivable set is
                // every distinct subset of size ≤ hi (plus ∅ only when lo = 0,
                // since padding with duplicates can reach lo but not 0)
                let k_min = if *lo == 0 { 0 } else { 1 };
                let k_max = (*hi).min(base.len() as u32);
                // cost check before expanding subsets
                let mut count = 0u64;
                for k in k_min..=k_max.max(k_min) {
                    count = count.saturating_add(binomial(base.len() as u64, k as u64));
                }
                self.bump(count)?;
                for k in k_min..=k_max {
                    let mut idx: Vec<usize> = (0..k as usize).collect();
                    loop {
                        let chosen: Vec<&RawCand> = idx.iter().map(|&i| &base[i]).collect();
                        let mut c = macro_cand(*op, &chosen);
                        c.arity = c.arity.max(*lo + chosen.iter().map(|x| x.arity).sum::<u32>());
                        out.push(c);
                        if !next_combination(&mut idx, base.len()) {
                            break;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn macro_cand(op: MacroOp, chosen: &[&RawCand]) -> RawCand {
    let atoms: Vec<Expr> = chosen.iter().map(|c| c.expr.clone()).collect();
    RawCand {
        expr: fold_macro(op, atoms),
        arity: chosen.len() as u32 + chosen.iter().map(|c| c.arity).sum::<u32>(),
        depth: 1 + chosen.iter().map(|c| c.depth).max().unwrap_or(0),
    }
}

fn product<'c, T>(slots: &'c [Vec<T>], f: &mut impl FnMut(&[&'c T])) {
    fn rec<'c, T>(slots: &'c [Vec<T>], acc: &mut Vec<&'c T>, f: &mut impl FnMut(&[&'c T])) {
        if acc.len() == slots.len() {
            f(acc);
            return;
        }
        for item in &slots[acc.len()] {
            acc.push(item);
            rec(slots, acc, f);
            acc.pop();
        }
    }
    if slots.iter().any(|s| s.is_empty()) {
        return;
    }
    rec(slots, &mut Vec::new(), f);
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Advance `idx` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    if idx.is_empty() {
        return false;
    }
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - (k - i) {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Upper bound on the enumeration work for this grammar (derivations before
/// normalization), used to reject oversized grammars before materializing.
pub fn count_derivations(grammar: &Grammar, cap: u64) -> Result<u64, GrammarError> {
    let mut e = Enumerator { grammar, cap, produced: 0, memo: HashMap::new() };
    let cands = e.nt_cands(&grammar.start, grammar.depth_bound)?;
    Ok(cands.len() as u64)
}

/// Every derivable property of depth ≤ the grammar bound, exactly once up to
/// conjunct normalization, ordered by the canonical key
/// (macro arity, node count, printed form).
pub fn enumerate_properties(grammar: &Grammar, cap: u64) -> Result<Vec<Property>, GrammarError> {
    grammar.validate()?;
    let mut e = Enumerator { grammar, cap, produced: 0, memo: HashMap::new() };
    let cands = e.nt_cands(&grammar.start, grammar.depth_bound)?;
    let mut props: Vec<Property> = cands
        .iter()
        .map(|c| Property::from_parts(c.expr.clone(), c.arity, c.depth))
        .collect();
    props.sort_by(|a, b| a.key().cmp(&b.key()));
    props.dedup_by(|a, b| a.ast == b.ast);
    for (i, p) in props.iter_mut().enumerate() {
        p.canonical_index = Some(i as u64);
    }
    Ok(props)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::BinOp;
    use crate::model::Value;

    fn atom(op: BinOp, a: &str, b: &str) -> TNode {
        TNode::Bin(op, Box::new(TNode::Var(a.into())), Box::new(TNode::Var(b.into())))
    }

    #[test]
    fn two_element_space() {
        // D := disj(AP, 0..1); AP := a == 0  ->  [⊥, a == 0]
        let g = Grammar {
            nonterminals: vec![
                ("D".into(), vec![TNode::Macro(MacroOp::Disj, "AP".into(), 0, 1)]),
                (
                    "AP".into(),
                    vec![TNode::Bin(
                        BinOp::Eq,
                        Box::new(TNode::Var("a".into())),
                        Box::new(TNode::Lit(Value::Int(0))),
                    )],
                ),
            ],
            start: "D".into(),
            depth_bound: 4,
        };
        let props = enumerate_properties(&g, 1000).unwrap();
        assert_eq!(props.len(), 2);
        assert!(props[0].is_bottom());
        assert_eq!(props[0].canonical_index, Some(0));
        assert_eq!(props[1].tokens, "a == 0");
    }

    #[test]
    fn disjunction_pairs_normalize() {
        // D := disj(AP,0..2); AP := x < y | y < x
        // -> 1 + 2 + 1 = 4 after normalization (⊥, two singletons, one pair)
        let g = Grammar {
            nonterminals: vec![
                ("D".into(), vec![TNode::Macro(MacroOp::Disj, "AP".into(), 0, 2)]),
                ("AP".into(), vec![atom(BinOp::Lt, "x", "y"), atom(BinOp::Lt, "y", "x")]),
            ],
            start: "D".into(),
            depth_bound: 4,
        };
        let props = enumerate_properties(&g, 1000).unwrap();
        let tokens: Vec<&str> = props.iter().map(|p| p.tokens.as_str()).collect();
        assert_eq!(tokens, vec!["false", "x < y", "y < x", "x < y || y < x"]);
    }


    #[test]
    fn recursive_nonterminal_is_cut_by_the_depth_bound() {
        // N -> 0 | N + 1: derivations nest one level per production
        let g = Grammar {
            nonterminals: vec![
                (
                    "S".into(),
                    vec![TNode::Bin(
                        BinOp::Eq,
                        Box::new(TNode::Var("x".into())),
                        Box::new(TNode::Nt("N".into())),
                    )],
                ),
                (
                    "N".into(),
                    vec![
                        TNode::Lit(Value::Int(0)),
                        TNode::Bin(
                            BinOp::Add,
                            Box::new(TNode::Nt("N".into())),
                            Box::new(TNode::Lit(Value::Int(1))),
                        ),
                    ],
                ),
            ],
            start: "S".into(),
            depth_bound: 5,
        };
        let props = enumerate_properties(&g, 10_000).unwrap();
        // N derives 0, 0+1, (0+1)+1, ... one deeper per remaining level
        let tokens: Vec<&str> = props.iter().map(|p| p.tokens.as_str()).collect();
        assert!(tokens.contains(&"x == 0"));
        assert!(tokens.contains(&"x == 0 + 1"));
        assert!(!tokens.iter().any(|t| t.matches('+').count() > 3));
        let deeper = Grammar { depth_bound: 6, ..g.clone() };
        assert!(enumerate_properties(&deeper, 10_000).unwrap().len() > props.len());
    }

    #[test]
    fn cap_is_enforced() {
        let g = Grammar {
            nonterminals: vec![
                ("D".into(), vec![TNode::Macro(MacroOp::Disj, "AP".into(), 0, 6)]),
                (
                    "AP".into(),
                    vec![TNode::Bin(
                        BinOp::Le,
                        Box::new(TNode::Nt("I".into())),
                        Box::new(TNode::Nt("I".into())),
                    )],
                ),
                (
                    "I".into(),
                    (0..40)
                        .map(|i| TNode::Lit(Value::Int(i)))
                        .collect(),
                ),
            ],
            start: "D".into(),
            depth_bound: 4,
        };
        // C(1600, 6) is astronomically past the cap
        assert!(matches!(enumerate_properties(&g, 100_000), Err(GrammarError::TooLarge(_))));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let g = Grammar {
            nonterminals: vec![
                ("D".into(), vec![TNode::Macro(MacroOp::Disj, "AP".into(), 0, 2)]),
                (
                    "AP".into(),
                    vec![atom(BinOp::Lt, "x", "y"), atom(BinOp::Eq, "x", "y"), atom(BinOp::Le, "x", "y")],
                ),
            ],
            start: "D".into(),
            depth_bound: 3,
        };
        let a = enumerate_properties(&g, 10_000).unwrap();
        let b = enumerate_properties(&g, 10_000).unwrap();
        assert_eq!(a, b);
    }
}
