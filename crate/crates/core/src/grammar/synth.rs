//! Example-driven synthesis over a grammar.
//!
//! Candidates are explored as observational-equivalence classes: two
//! subterms with identical value vectors on the current examples are
//! interchangeable, so only one representative (the canonically smaller) is
//! kept. Completeness of the NONE answer follows because acceptance and
//! rejection depend only on a candidate's truth vector.

use std::collections::HashMap;
use std::rc::Rc;

use thiserror::Error;

use super::{Grammar, GrammarError, MacroOp, Property, TNode};
use crate::lang::{eval_expr, BinOp, EvalCtx, Expr, ExprKind, Fault, PropertyFault, UnOp};
use crate::model::{Valuation, Value};

/// Hard limit on equivalence classes explored per synthesize call.
const STATE_CAP: usize = 2_000_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    PropertyFault(#[from] PropertyFault),
}

/// The fixed example sets one synthesize call runs against: positives first,
/// then negatives.
pub struct SynthExamples<'a> {
    pub envs: Vec<&'a Valuation>,
    pub n_pos: usize,
}

type Cell = Result<Value, Fault>;
type Vector = Rc<Vec<Cell>>;

#[derive(Clone)]
struct VecCand {
    vec: Vector,
    expr: Rc<Expr>,
    arity: u32,
    size: u32,
    depth: u32,
}

impl VecCand {
    fn key(&self) -> (u32, u32) {
        (self.arity, self.size)
    }
}

/// A deduplicated candidate set: at most one representative per value vector.
pub struct CandSet {
    cands: Vec<VecCand>,
}

struct Synth<'a, 'g> {
    grammar: &'g Grammar,
    ex: &'a SynthExamples<'a>,
    ctx: &'a EvalCtx<'a>,
    memo: HashMap<(String, u32), Rc<CandSet>>,
    states: usize,
}

fn pointwise_un(op: UnOp, a: &Cell) -> Cell {
    let v = a.clone()?;
    match (op, v) {
        (UnOp::Neg, Value::Int(n)) => match n.checked_neg() {
            Some(m) => Ok(Value::Int(m)),
            None => Err(Fault::Overflow),
        },
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        _ => unreachable!("type check"),
    }
}

fn pointwise_bin(op: BinOp, a: &Cell, b: &Cell, bound: i64) -> Cell {
    // mirror the evaluator's left-to-right short-circuiting so a built AST
    // and its vector agree on faults
    match op {
        BinOp::And => {
            return match a.clone()? {
                Value::Bool(false) => Ok(Value::Bool(false)),
                _ => b.clone(),
            }
        }
        BinOp::Or => {
            return match a.clone()? {
                Value::Bool(true) => Ok(Value::Bool(true)),
                _ => b.clone(),
            }
        }
        BinOp::Implies => {
            return match a.clone()? {
                Value::Bool(false) => Ok(Value::Bool(true)),
                _ => b.clone(),
            }
        }
        _ => {}
    }
    let va = a.clone()?;
    let vb = b.clone()?;
    match op {
        BinOp::Eq => return Ok(Value::Bool(va == vb)),
        BinOp::Ne => return Ok(Value::Bool(va != vb)),
        _ => {}
    }
    let (x, y) = match (va, vb) {
        (Value::Int(x), Value::Int(y)) => (x, y),
        _ => unreachable!("type check"),
    };
    let checked = |v: Option<i64>| match v {
        Some(n) if n.abs() <= bound => Ok(n),
        _ => Err(Fault::Overflow),
    };
    let n = match op {
        BinOp::Add => checked(x.checked_add(y))?,
        BinOp::Sub => checked(x.checked_sub(y))?,
        BinOp::Mul => checked(x.checked_mul(y))?,
        BinOp::Div => {
            if y == 0 {
                return Err(Fault::DivByZero);
            }
            x / y
        }
        BinOp::Rem => {
            if y == 0 {
                return Err(Fault::DivByZero);
            }
            x % y
        }
        BinOp::Mod => {
            if y <= 0 {
                return Err(Fault::DivByZero);
            }
            x.rem_euclid(y)
        }
        BinOp::Lt => return Ok(Value::Bool(x < y)),
        BinOp::Le => return Ok(Value::Bool(x <= y)),
        BinOp::Gt => return Ok(Value::Bool(x > y)),
        BinOp::Ge => return Ok(Value::Bool(x >= y)),
        _ => unreachable!(),
    };
    Ok(Value::Int(n))
}

impl<'a, 'g> Synth<'a, 'g> {
    fn bump(&mut self, n: usize) -> Result<(), SynthError> {
        self.states += n;
        if self.states > STATE_CAP {
            Err(GrammarError::TooLarge(STATE_CAP as u64).into())
        } else {
            Ok(())
        }
    }

    fn dedup(&mut self, raw: Vec<VecCand>) -> Result<CandSet, SynthError> {
        let mut seen: HashMap<Vector, usize> = HashMap::new();
        let mut out: Vec<VecCand> = Vec::new();
        for c in raw {
            match seen.get(&c.vec) {
                Some(&i) => {
                    if c.key() < out[i].key() {
                        out[i] = c;
                    }
                }
                None => {
                    seen.insert(c.vec.clone(), out.len());
                    out.push(c);
                }
            }
        }
        self.bump(out.len())?;
        Ok(CandSet { cands: out })
    }

    fn nt_cands(&mut self, nt: &str, depth: u32) -> Result<Rc<CandSet>, SynthError> {
        if depth == 0 {
            return Ok(Rc::new(CandSet { cands: Vec::new() }));
        }
        let key = (nt.to_string(), depth);
        if let Some(c) = self.memo.get(&key) {
            return Ok(c.clone());
        }
        let prods = self
            .grammar
            .productions(nt)
            .ok_or(GrammarError::UndefinedNonterminal(nt.to_string()))?
            .to_vec();
        let mut raw = Vec::new();
        for p in &prods {
            self.tmpl_cands(p, depth - 1, &mut raw)?;
        }
        let set = Rc::new(self.dedup(raw)?);
        self.memo.insert(key, set.clone());
        Ok(set)
    }

    fn leaf(&self, expr: Expr) -> Result<VecCand, SynthError> {
        let mut cells = Vec::with_capacity(self.ex.envs.len());
        for env in &self.ex.envs {
            cells.push(eval_expr(&expr, env, self.ctx));
        }
        let size = expr.node_count() as u32;
        Ok(VecCand { vec: Rc::new(cells), expr: Rc::new(expr), arity: 0, size, depth: 1 })
    }

    fn tmpl_cands(
        &mut self,
        t: &TNode,
        depth: u32,
        out: &mut Vec<VecCand>,
    ) -> Result<(), SynthError> {
        match t {
            TNode::Lit(v) => out.push(self.leaf(Expr::synth(ExprKind::Lit(v.clone())))?),
            TNode::Var(name) => out.push(self.leaf(Expr::var(name.clone()))?),
            TNode::Un(op, a) => {
                let mut inner = Vec::new();
                self.tmpl_cands(a, depth, &mut inner)?;
                self.bump(inner.len())?;
                for c in inner {
                    let cells: Vec<Cell> = c.vec.iter().map(|x| pointwise_un(*op, x)).collect();
                    out.push(VecCand {
                        vec: Rc::new(cells),
                        expr: Rc::new(Expr::synth(ExprKind::Unary(*op, Box::new((*c.expr).clone())))),
                        arity: c.arity,
                        size: c.size + 1,
                        depth: c.depth + 1,
                    });
                }
            }
            TNode::Bin(op, a, b) => {
                let (la, lb) = self.two_slots(a, b, depth)?;
                self.bump(la.len() * lb.len())?;
                let bound = self.ctx.int_magnitude_bound;
                for ca in &la {
                    for cb in &lb {
                        let cells: Vec<Cell> = ca
                            .vec
                            .iter()
                            .zip(cb.vec.iter())
                            .map(|(x, y)| pointwise_bin(*op, x, y, bound))
                            .collect();
                        out.push(VecCand {
                            vec: Rc::new(cells),
                            expr: Rc::new(Expr::synth(ExprKind::Binary(
                                *op,
                                Box::new((*ca.expr).clone()),
                                Box::new((*cb.expr).clone()),
                            ))),
                            arity: ca.arity + cb.arity,
                            size: ca.size + cb.size + 1,
                            depth: 1 + ca.depth.max(cb.depth),
                        });
                    }
                }
            }
            TNode::Index(a, b) => {
                let (la, lb) = self.two_slots(a, b, depth)?;
                self.bump(la.len() * lb.len())?;
                for ca in &la {
                    for cb in &lb {
                        let cells: Vec<Cell> = ca
                            .vec
                            .iter()
                            .zip(cb.vec.iter())
                            .map(|(x, y)| {
                                let l = x.clone()?;
                                let i = y.clone()?;
                                match (l, i) {
                                    (Value::List(xs), Value::Int(i)) => {
                                        if i < 0 || i as usize >= xs.len() {
                                            Err(Fault::IndexOutOfRange)
                                        } else {
                                            Ok(xs[i as usize].clone())
                                        }
                                    }
                                    _ => unreachable!("type check"),
                                }
                            })
                            .collect();
                        out.push(VecCand {
                            vec: Rc::new(cells),
                            expr: Rc::new(Expr::synth(ExprKind::Index(
                                Box::new((*ca.expr).clone()),
                                Box::new((*cb.expr).clone()),
                            ))),
                            arity: ca.arity + cb.arity,
                            size: ca.size + cb.size + 1,
                            depth: 1 + ca.depth.max(cb.depth),
                        });
                    }
                }
            }
            TNode::Call(name, args) => {
                let mut slots: Vec<Vec<VecCand>> = Vec::with_capacity(args.len());
                for a in args {
                    let mut s = Vec::new();
                    self.tmpl_cands(a, depth, &mut s)?;
                    slots.push(s);
                }
                let total: usize = slots.iter().map(|s| s.len()).product();
                self.bump(total)?;
                let mut acc: Vec<usize> = vec![0; slots.len()];
                if slots.iter().any(|s| s.is_empty()) {
                    return Ok(());
                }
                loop {
                    let chosen: Vec<&VecCand> = acc.iter().zip(&slots).map(|(&i, s)| &s[i]).collect();
                    let mut cells = Vec::with_capacity(self.ex.envs.len());
                    for row in 0..self.ex.envs.len() {
                        let mut argv = Vec::with_capacity(chosen.len());
                        let mut fault = None;
                        for c in &chosen {
                            match &c.vec[row] {
                                Ok(v) => argv.push(v.clone()),
                                Err(f) => {
                                    fault = Some(*f);
                                    break;
                                }
                            }
                        }
                        cells.push(match fault {
                            Some(f) => Err(f),
                            None => crate::lang::eval_expr(
                                &Expr::synth(ExprKind::Call(
                                    name.clone(),
                                    argv.into_iter().map(|v| Expr::synth(ExprKind::Lit(v))).collect(),
                                )),
                                &Valuation::new(),
                                self.ctx,
                            ),
                        });
                    }
                    let exprs: Vec<Expr> = chosen.iter().map(|c| (*c.expr).clone()).collect();
                    out.push(VecCand {
                        vec: Rc::new(cells),
                        expr: Rc::new(Expr::synth(ExprKind::Call(name.clone(), exprs))),
                        arity: chosen.iter().map(|c| c.arity).sum(),
                        size: 1 + chosen.iter().map(|c| c.size).sum::<u32>(),
                        depth: 1 + chosen.iter().map(|c| c.depth).max().unwrap_or(0),
                    });
                    // odometer
                    let mut i = slots.len();
                    loop {
                        if i == 0 {
                            return Ok(());
                        }
                        i -= 1;
                        acc[i] += 1;
                        if acc[i] < slots[i].len() {
                            break;
                        }
                        acc[i] = 0;
                    }
                }
            }
            TNode::Nt(n) => {
                let set = self.nt_cands(n, depth)?;
                out.extend(set.cands.iter().cloned());
            }
            TNode::Macro(op, n, lo, hi) => {
                let base = self.nt_cands(n, depth)?;
                let cands = self.macro_cands(*op, &base, *lo, *hi, None)?;
                out.extend(cands);
            }
        }
        Ok(())
    }

    fn two_slots(
        &mut self,
        a: &TNode,
        b: &TNode,
        depth: u32,
    ) -> Result<(Vec<VecCand>, Vec<VecCand>), SynthError> {
        let mut la = Vec::new();
        self.tmpl_cands(a, depth, &mut la)?;
        let mut lb = Vec::new();
        self.tmpl_cands(b, depth, &mut lb)?;
        Ok((la, lb))
    }

    /// Levelled subset search over the macro's atom set: level k holds the
    /// distinct vectors reachable with k atoms, each with its first (minimal)
    /// representative. `atom_filter` prunes atoms that can never appear in a
    /// consistent top-level conjunction/disjunction.
    fn macro_cands(
        &mut self,
        op: MacroOp,
        base: &CandSet,
        lo: u32,
        hi: u32,
        atom_filter: Option<&dyn Fn(&VecCand) -> bool>,
    ) -> Result<Vec<VecCand>, SynthError> {
        let mut atoms: Vec<&VecCand> = base
            .cands
            .iter()
            .filter(|c| atom_filter.is_none_or(|f| f(c)))
            .collect();
        atoms.sort_by(|a, b| a.key().cmp(&b.key()).then_with(|| a.expr.to_string().cmp(&b.expr.to_string())));

        let n_rows = self.ex.envs.len();
        let unit = match op {
            MacroOp::Conj => Value::Bool(true),
            MacroOp::Disj => Value::Bool(false),
        };
        let unit_vec: Vector = Rc::new(vec![Ok(unit); n_rows]);

        let combine = |acc: &Vector, atom: &Vector| -> Vector {
            let cells: Vec<Cell> = acc
                .iter()
                .zip(atom.iter())
                .map(|(x, y)| match op {
                    MacroOp::Conj => pointwise_bin(BinOp::And, x, y, i64::MAX),
                    MacroOp::Disj => pointwise_bin(BinOp::Or, x, y, i64::MAX),
                })
                .collect();
            Rc::new(cells)
        };

        // state: vector -> sorted atom indices of its first representative
        let mut seen: HashMap<Vector, ()> = HashMap::new();
        let mut level: Vec<(Vector, Vec<u32>)> = vec![(unit_vec.clone(), Vec::new())];
        let mut emitted: Vec<VecCand> = Vec::new();

        let k_min = if lo == 0 { 0 } else { 1 };
        let k_max = hi.min(atoms.len() as u32);

        // when lo > 0 the empty form is not derivable, so its vector must
        // stay claimable by a one-atom representative
        if k_min == 0 {
            seen.insert(unit_vec, ());
        }

        let emit = |sel: &[u32], vec: &Vector| -> VecCand {
            let chosen: Vec<&VecCand> = sel.iter().map(|&i| atoms[i as usize]).collect();
            let atom_exprs: Vec<Expr> = chosen.iter().map(|c| (*c.expr).clone()).collect();
            let expr = super::fold_macro(op, atom_exprs);
            let arity =
                (chosen.len() as u32).max(lo) + chosen.iter().map(|c| c.arity).sum::<u32>();
            let size = expr.node_count() as u32;
            let depth = 1 + chosen.iter().map(|c| c.depth).max().unwrap_or(0);
            VecCand { vec: vec.clone(), expr: Rc::new(expr), arity, size, depth }
        };

        if k_min == 0 {
            let (v, sel) = &level[0];
            emitted.push(emit(sel, v));
        }
        for _k in 1..=k_max {
            let mut next: Vec<(Vector, Vec<u32>)> = Vec::new();
            let mut next_seen: HashMap<Vector, usize> = HashMap::new();
            for (vec, sel) in &level {
                for (ai, atom) in atoms.iter().enumerate() {
                    let ai = ai as u32;
                    if sel.contains(&ai) {
                        continue;
                    }
                    let nv = combine(vec, &atom.vec);
                    if seen.contains_key(&nv) {
                        continue;
                    }
                    let mut nsel = sel.clone();
                    let pos = nsel.binary_search(&ai).unwrap_err();
                    nsel.insert(pos, ai);
                    match next_seen.get(&nv) {
                        Some(&i) => {
                            if nsel < next[i].1 {
                                next[i] = (nv, nsel);
                            }
                        }
                        None => {
                            next_seen.insert(nv.clone(), next.len());
                            next.push((nv, nsel));
                        }
                    }
                }
            }
            self.bump(next.len())?;
            for (v, _) in &next {
                seen.insert(v.clone(), ());
            }
            next.sort_by(|a, b| a.1.cmp(&b.1));
            for (v, sel) in &next {
                emitted.push(emit(sel, v));
            }
            level = next;
            if level.is_empty() {
                break;
            }
        }
        Ok(emitted)
    }
}

/// Target shape: accept every positive, reject every negative.
fn consistent(vec: &[Cell], n_pos: usize) -> Result<bool, PropertyFault> {
    for (i, cell) in vec.iter().enumerate() {
        match cell {
            Ok(Value::Bool(b)) => {
                if (i < n_pos) != *b {
                    return Ok(false);
                }
            }
            Ok(_) => unreachable!("property type check"),
            Err(f) => {
                return Err(PropertyFault { fault: *f, example: format!("example #{i}") })
            }
        }
    }
    Ok(true)
}

/// Returns the canonically first grammar property accepting every positive
/// and rejecting every negative, or None when no derivable property does
/// (witnessed by exhausting the reachable equivalence classes).
pub fn synthesize_vec(
    grammar: &Grammar,
    ex: &SynthExamples,
    ctx: &EvalCtx,
) -> Result<Option<Property>, SynthError> {
    grammar.validate().map_err(SynthError::Grammar)?;
    let mut s = Synth { grammar, ex, ctx, memo: HashMap::new(), states: 0 };

    let depth = grammar.depth_bound;
    if depth == 0 {
        return Ok(None);
    }
    let prods = grammar
        .productions(&grammar.start)
        .ok_or(GrammarError::UndefinedNonterminal(grammar.start.clone()))?
        .to_vec();

    let mut best: Option<VecCand> = None;
    let consider = |cand: &VecCand, best: &mut Option<VecCand>| -> Result<(), SynthError> {
        if consistent(&cand.vec, ex.n_pos)? {
            let better = match best {
                None => true,
                Some(b) => {
                    (cand.arity, cand.size, cand.expr.to_string())
                        < (b.arity, b.size, b.expr.to_string())
                }
            };
            if better {
                *best = Some(cand.clone());
            }
        }
        Ok(())
    };

    for p in &prods {
        // a bare top-level macro admits atom prefiltering: a conjunction must
        // accept every positive, so each atom must; dually for disjunctions
        if let TNode::Macro(op, n, lo, hi) = p {
            let base = s.nt_cands(n, depth - 1)?;
            let op = *op;
            let n_pos = ex.n_pos;
            let filter = move |c: &VecCand| -> bool {
                c.vec.iter().enumerate().all(|(i, cell)| match cell {
                    Ok(Value::Bool(b)) => match op {
                        MacroOp::Conj => i >= n_pos || *b,
                        MacroOp::Disj => i < n_pos || !*b,
                    },
                    _ => true,
                })
            };
            let cands = s.macro_cands(op, &base, *lo, *hi, Some(&filter))?;
            for c in &cands {
                consider(c, &mut best)?;
            }
        } else {
            let mut raw = Vec::new();
            s.tmpl_cands(p, depth - 1, &mut raw)?;
            for c in &raw {
                consider(c, &mut best)?;
            }
        }
    }

    Ok(best.map(|b| {
        let mut prop = Property::from_parts((*b.expr).clone(), b.arity, b.depth);
        prop.canonical_index = None;
        prop
    }))
}
