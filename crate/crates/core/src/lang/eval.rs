//! Bounded, total evaluation. Every loop is cut off by `loopUnrollBound`,
//! every call chain by `recursionDepthBound`, and integer magnitude by a
//! global bound, so evaluation always halts with a value or a fault.

use std::fmt;

use thiserror::Error;

use super::ast::{BinOp, Block, Expr, ExprKind, Stmt, UnOp};
use super::check::FuncTable;
use crate::model::{SearchConfig, Valuation, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Error)]
pub enum Fault {
    #[error("division by zero")]
    DivByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("loop or recursion bound exceeded")]
    BoundExceeded,
    #[error("list index out of range")]
    IndexOutOfRange,
}

/// Deterministic value or fault.
pub type EvalOutcome = Result<Value, Fault>;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("property is not total: {fault} at example {example}")]
pub struct PropertyFault {
    pub fault: Fault,
    pub example: String,
}

pub struct EvalCtx<'a> {
    pub funcs: &'a FuncTable,
    pub loop_unroll_bound: u32,
    pub recursion_depth_bound: u32,
    pub int_magnitude_bound: i64,
}

impl<'a> EvalCtx<'a> {
    pub fn new(funcs: &'a FuncTable, cfg: &SearchConfig) -> Self {
        EvalCtx {
            funcs,
            loop_unroll_bound: cfg.loop_unroll_bound,
            recursion_depth_bound: cfg.recursion_depth_bound,
            int_magnitude_bound: cfg.int_magnitude_bound,
        }
    }

    fn checked(&self, v: Option<i64>) -> Result<i64, Fault> {
        match v {
            Some(n) if n.abs() <= self.int_magnitude_bound => Ok(n),
            _ => Err(Fault::Overflow),
        }
    }
}

/// A function activation frame: locals with block scoping.
struct Frame {
    vars: Vec<(String, Value)>,
    scopes: Vec<usize>,
}

impl Frame {
    fn new() -> Self {
        Frame { vars: Vec::new(), scopes: Vec::new() }
    }

    fn push_scope(&mut self) {
        self.scopes.push(self.vars.len());
    }

    fn pop_scope(&mut self) {
        let mark = self.scopes.pop().unwrap();
        self.vars.truncate(mark);
    }

    fn declare(&mut self, name: &str, v: Value) {
        self.vars.push((name.to_string(), v));
    }

    fn get(&self, name: &str) -> Option<&Value> {
        self.vars.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    fn set(&mut self, name: &str, v: Value) -> bool {
        for (n, slot) in self.vars.iter_mut().rev() {
            if n == name {
                *slot = v;
                return true;
            }
        }
        false
    }
}

enum Flow {
    Normal,
    Return(Value),
}

/// Evaluate an expression under a valuation of its free identifiers.
pub fn eval_expr(expr: &Expr, env: &Valuation, ctx: &EvalCtx) -> EvalOutcome {
    let mut frame = Frame::new();
    eval(expr, env, &mut frame, ctx, 0)
}

fn trunc_div(a: i64, b: i64) -> Result<i64, Fault> {
    if b == 0 {
        Err(Fault::DivByZero)
    } else {
        Ok(a / b)
    }
}

fn trunc_rem(a: i64, b: i64) -> Result<i64, Fault> {
    if b == 0 {
        Err(Fault::DivByZero)
    } else {
        Ok(a % b)
    }
}

fn math_mod(a: i64, m: i64) -> Result<i64, Fault> {
    if m <= 0 {
        Err(Fault::DivByZero)
    } else {
        Ok(a.rem_euclid(m))
    }
}

fn eval(e: &Expr, g: &Valuation, f: &mut Frame, ctx: &EvalCtx, depth: u32) -> EvalOutcome {
    match &e.kind {
        ExprKind::Lit(v) => Ok(v.clone()),
        ExprKind::Var(name) => Ok(f
            .get(name)
            .or_else(|| g.get(name))
            .cloned()
            .unwrap_or_else(|| panic!("unbound identifier `{name}` after type check"))),
        ExprKind::Unary(op, a) => {
            let va = eval(a, g, f, ctx, depth)?;
            match (op, va) {
                (UnOp::Neg, Value::Int(n)) => Ok(Value::Int(ctx.checked(n.checked_neg())?)),
                (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                _ => unreachable!("type check"),
            }
        }
        ExprKind::Binary(op, a, b) => {
            // short-circuit forms first
            match op {
                BinOp::And => {
                    return match eval(a, g, f, ctx, depth)? {
                        Value::Bool(false) => Ok(Value::Bool(false)),
                        _ => eval(b, g, f, ctx, depth),
                    }
                }
                BinOp::Or => {
                    return match eval(a, g, f, ctx, depth)? {
                        Value::Bool(true) => Ok(Value::Bool(true)),
                        _ => eval(b, g, f, ctx, depth),
                    }
                }
                BinOp::Implies => {
                    return match eval(a, g, f, ctx, depth)? {
                        Value::Bool(false) => Ok(Value::Bool(true)),
                        _ => eval(b, g, f, ctx, depth),
                    }
                }
                _ => {}
            }
            let va = eval(a, g, f, ctx, depth)?;
            let vb = eval(b, g, f, ctx, depth)?;
            match op {
                BinOp::Eq => return Ok(Value::Bool(va == vb)),
                BinOp::Ne => return Ok(Value::Bool(va != vb)),
                _ => {}
            }
            let (x, y) = match (va, vb) {
                (Value::Int(x), Value::Int(y)) => (x, y),
                _ => unreachable!("type check"),
            };
            let n = match op {
                BinOp::Add => ctx.checked(x.checked_add(y))?,
                BinOp::Sub => ctx.checked(x.checked_sub(y))?,
                BinOp::Mul => ctx.checked(x.checked_mul(y))?,
                BinOp::Div => trunc_div(x, y)?,
                BinOp::Rem => trunc_rem(x, y)?,
                BinOp::Mod => math_mod(x, y)?,
                BinOp::Lt => return Ok(Value::Bool(x < y)),
                BinOp::Le => return Ok(Value::Bool(x <= y)),
                BinOp::Gt => return Ok(Value::Bool(x > y)),
                BinOp::Ge => return Ok(Value::Bool(x >= y)),
                _ => unreachable!(),
            };
            Ok(Value::Int(n))
        }
        ExprKind::If(c, t, els) => match eval(c, g, f, ctx, depth)? {
            Value::Bool(true) => eval(t, g, f, ctx, depth),
            Value::Bool(false) => eval(els, g, f, ctx, depth),
            _ => unreachable!("type check"),
        },
        ExprKind::Index(list, idx) => {
            let l = eval(list, g, f, ctx, depth)?;
            let i = eval(idx, g, f, ctx, depth)?;
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
        }
        ExprKind::ListLit(items) => {
            let mut xs = Vec::with_capacity(items.len());
            for item in items {
                xs.push(eval(item, g, f, ctx, depth)?);
            }
            Ok(Value::List(xs))
        }
        ExprKind::Call(name, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval(a, g, f, ctx, depth)?);
            }
            call(name, vals, ctx, depth)
        }
    }
}

fn call(name: &str, args: Vec<Value>, ctx: &EvalCtx, depth: u32) -> EvalOutcome {
    match name {
        "mod" => {
            let (a, m) = (args[0].as_int().unwrap(), args[1].as_int().unwrap());
            Ok(Value::Int(math_mod(a, m)?))
        }
        "abs" => {
            let a = args[0].as_int().unwrap();
            Ok(Value::Int(ctx.checked(a.checked_abs())?))
        }
        "min" => Ok(Value::Int(args[0].as_int().unwrap().min(args[1].as_int().unwrap()))),
        "max" => Ok(Value::Int(args[0].as_int().unwrap().max(args[1].as_int().unwrap()))),
        "len" => match &args[0] {
            Value::List(xs) => Ok(Value::Int(xs.len() as i64)),
            _ => unreachable!("type check"),
        },
        "sort" => match args.into_iter().next().unwrap() {
            Value::List(mut xs) => {
                xs.sort();
                Ok(Value::List(xs))
            }
            _ => unreachable!("type check"),
        },
        _ => {
            if depth >= ctx.recursion_depth_bound {
                return Err(Fault::BoundExceeded);
            }
            let def = ctx.funcs.get(name).expect("unknown function after type check");
            let mut frame = Frame::new();
            frame.push_scope();
            for (p, v) in def.params.iter().zip(args) {
                frame.declare(&p.name, v);
            }
            let empty = Valuation::new();
            match exec_block(&def.body, &empty, &mut frame, ctx, depth + 1)? {
                Flow::Return(v) => Ok(v),
                // type check proved every path returns, so a fall-through can
                // only happen when a bounded loop was cut short
                Flow::Normal => Err(Fault::BoundExceeded),
            }
        }
    }
}

fn exec_block(
    block: &Block,
    g: &Valuation,
    f: &mut Frame,
    ctx: &EvalCtx,
    depth: u32,
) -> Result<Flow, Fault> {
    f.push_scope();
    let flow = exec_stmts(block, g, f, ctx, depth);
    f.pop_scope();
    flow
}

fn exec_stmts(
    block: &Block,
    g: &Valuation,
    f: &mut Frame,
    ctx: &EvalCtx,
    depth: u32,
) -> Result<Flow, Fault> {
    for stmt in block {
        match stmt {
            Stmt::Let { name, init, .. } => {
                let v = eval(init, g, f, ctx, depth)?;
                f.declare(name, v);
            }
            Stmt::Assign { name, value } => {
                let v = eval(value, g, f, ctx, depth)?;
                assert!(f.set(name, v), "unbound assignment after type check");
            }
            Stmt::AssignIndex { name, index, value } => {
                let i = match eval(index, g, f, ctx, depth)? {
                    Value::Int(i) => i,
                    _ => unreachable!("type check"),
                };
                let v = eval(value, g, f, ctx, depth)?;
                let slot = f.get(name).cloned().expect("unbound list after type check");
                match slot {
                    Value::List(mut xs) => {
                        if i < 0 || i as usize >= xs.len() {
                            return Err(Fault::IndexOutOfRange);
                        }
                        xs[i as usize] = v;
                        f.set(name, Value::List(xs));
                    }
                    _ => unreachable!("type check"),
                }
            }
            Stmt::If { cond, then_block, else_block } => {
                let c = match eval(cond, g, f, ctx, depth)? {
                    Value::Bool(c) => c,
                    _ => unreachable!("type check"),
                };
                let flow = if c {
                    exec_block(then_block, g, f, ctx, depth)?
                } else if let Some(b) = else_block {
                    exec_block(b, g, f, ctx, depth)?
                } else {
                    Flow::Normal
                };
                if let Flow::Return(v) = flow {
                    return Ok(Flow::Return(v));
                }
            }
            Stmt::While { cond, body } => {
                let mut iters = 0u32;
                loop {
                    let c = match eval(cond, g, f, ctx, depth)? {
                        Value::Bool(c) => c,
                        _ => unreachable!("type check"),
                    };
                    if !c {
                        break;
                    }
                    if iters >= ctx.loop_unroll_bound {
                        return Err(Fault::BoundExceeded);
                    }
                    iters += 1;
                    if let Flow::Return(v) = exec_block(body, g, f, ctx, depth)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::For { var, lo, hi, body } => {
                let lo = match eval(lo, g, f, ctx, depth)? {
                    Value::Int(n) => n,
                    _ => unreachable!("type check"),
                };
                let hi = match eval(hi, g, f, ctx, depth)? {
                    Value::Int(n) => n,
                    _ => unreachable!("type check"),
                };
                for (iters, i) in (lo..hi).enumerate() {
                    if iters as u32 >= ctx.loop_unroll_bound {
                        return Err(Fault::BoundExceeded);
                    }
                    f.push_scope();
                    f.declare(var, Value::Int(i));
                    let flow = exec_stmts(body, g, f, ctx, depth);
                    f.pop_scope();
                    if let Flow::Return(v) = flow? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::Return(e) => {
                let v = eval(e, g, f, ctx, depth)?;
                return Ok(Flow::Return(v));
            }
        }
    }
    Ok(Flow::Normal)
}

/// Evaluate the query body under `e ∪ h`. Any fault is absorbed as `false`
/// (bounded semantics: a faulting pair does not witness the query); the
/// caller's fault counter is bumped for diagnostics.
pub fn eval_query_counted(
    query: &Expr,
    e: &Valuation,
    h: &Valuation,
    ctx: &EvalCtx,
    fault_count: &mut u64,
) -> bool {
    let mut env = e.clone();
    for (k, v) in h {
        env.insert(k.clone(), v.clone());
    }
    match eval_expr(query, &env, ctx) {
        Ok(Value::Bool(b)) => b,
        Ok(_) => unreachable!("query type check"),
        Err(_) => {
            *fault_count += 1;
            false
        }
    }
}

/// Evaluate a property atom or whole property on an example. Faults are hard
/// errors: properties must denote total predicates over the example domain.
pub fn eval_property_expr(
    prop: &Expr,
    e: &Valuation,
    ctx: &EvalCtx,
) -> Result<bool, PropertyFault> {
    match eval_expr(prop, e, ctx) {
        Ok(Value::Bool(b)) => Ok(b),
        Ok(_) => unreachable!("property type check"),
        Err(fault) => Err(PropertyFault {
            fault,
            example: format!("{:?}", e),
        }),
    }
}


/// Evaluate the query of a problem at one example and hidden instance:
/// true iff the body evaluates to true under their union, faults absorbed
/// as false.
pub fn eval_query(
    problem: &crate::model::LoudProblem,
    e: &crate::model::Example,
    h: &crate::model::HiddenInstance,
) -> Result<bool, super::check::TypeError> {
    let funcs = super::check::FuncTable::new(&problem.functions)?;
    let ctx = EvalCtx::new(&funcs, &problem.config);
    let mut faults = 0;
    Ok(eval_query_counted(&problem.query, &e.bindings, &h.bindings, &ctx, &mut faults))
}

/// Evaluate a property at one example under a problem's function table.
pub fn eval_property(
    prop: &crate::grammar::Property,
    e: &crate::model::Example,
    problem: &crate::model::LoudProblem,
) -> Result<bool, crate::search::EngineError> {
    let funcs = super::check::FuncTable::new(&problem.functions)?;
    let ctx = EvalCtx::new(&funcs, &problem.config);
    eval_property_expr(&prop.ast, &e.bindings, &ctx).map_err(Into::into)
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame").field("vars", &self.vars.len()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::ast::{FuncDef, Param, Ty};

    fn ctx_with(funcs: &FuncTable) -> EvalCtx<'_> {
        EvalCtx {
            funcs,
            loop_unroll_bound: 64,
            recursion_depth_bound: 16,
            int_magnitude_bound: i32::MAX as i64,
        }
    }

    fn int_env(pairs: &[(&str, i64)]) -> Valuation {
        pairs.iter().map(|(k, v)| (k.to_string(), Value::Int(*v))).collect()
    }

    #[test]
    fn mod_matches_positive_example() {
        // 1 = 6 * 1 mod 5
        let funcs = FuncTable::new(&[]).unwrap();
        let ctx = ctx_with(&funcs);
        let e = Expr::binary(
            BinOp::Mod,
            Expr::binary(BinOp::Mul, Expr::int_lit(6), Expr::int_lit(1)),
            Expr::int_lit(5),
        );
        assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Ok(Value::Int(1)));
    }

    #[test]
    fn truncated_remainder_agrees_with_loop_oracle() {
        // oracle: repeatedly add/subtract the divisor toward zero
        fn oracle(a: i64, m: i64) -> i64 {
            let mut r = a;
            while r.abs() >= m.abs() {
                r -= m.abs() * r.signum();
            }
            r
        }
        let funcs = FuncTable::new(&[]).unwrap();
        let ctx = ctx_with(&funcs);
        for a in -8..=8i64 {
            for m in 1..=8i64 {
                let e = Expr::binary(BinOp::Rem, Expr::int_lit(a), Expr::int_lit(m));
                assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Ok(Value::Int(oracle(a, m))));
                let e = Expr::binary(BinOp::Rem, Expr::int_lit(a), Expr::int_lit(-m));
                assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Ok(Value::Int(oracle(a, -m))));
            }
        }
        // (2 * -1) % 4 == -2: remhash can produce negative outputs
        let e = Expr::binary(
            BinOp::Rem,
            Expr::binary(BinOp::Mul, Expr::int_lit(2), Expr::int_lit(-1)),
            Expr::int_lit(4),
        );
        assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Ok(Value::Int(-2)));
    }

    #[test]
    fn mod_by_zero_faults() {
        let funcs = FuncTable::new(&[]).unwrap();
        let ctx = ctx_with(&funcs);
        let e = Expr::binary(BinOp::Mod, Expr::var("x"), Expr::int_lit(0));
        assert_eq!(eval_expr(&e, &int_env(&[("x", 7)]), &ctx), Err(Fault::DivByZero));
        // negative modulus also faults
        let e = Expr::binary(BinOp::Mod, Expr::var("x"), Expr::int_lit(-3));
        assert_eq!(eval_expr(&e, &int_env(&[("x", 7)]), &ctx), Err(Fault::DivByZero));
    }

    #[test]
    fn mod_algebra_over_domain() {
        // for all a, m > 0: 0 <= mod(a,m) < m and (a/m)*m + a%m == a
        let funcs = FuncTable::new(&[]).unwrap();
        let ctx = ctx_with(&funcs);
        for a in -20..=20i64 {
            for m in 1..=10i64 {
                let r = math_mod(a, m).unwrap();
                assert!((0..m).contains(&r));
                let q = trunc_div(a, m).unwrap();
                let rem = trunc_rem(a, m).unwrap();
                assert_eq!(q * m + rem, a);
                let _ = ctx;
            }
        }
    }

    #[test]
    fn implies_is_material() {
        let funcs = FuncTable::new(&[]).unwrap();
        let ctx = ctx_with(&funcs);
        for p in [false, true] {
            for q in [false, true] {
                let e = Expr::binary(BinOp::Implies, Expr::bool_lit(p), Expr::bool_lit(q));
                assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Ok(Value::Bool(!p || q)));
            }
        }
    }

    #[test]
    fn overflow_is_a_fault_not_wraparound() {
        let funcs = FuncTable::new(&[]).unwrap();
        let ctx = ctx_with(&funcs);
        let big = i32::MAX as i64;
        let e = Expr::binary(BinOp::Add, Expr::int_lit(big), Expr::int_lit(1));
        assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Err(Fault::Overflow));
        let e = Expr::binary(BinOp::Mul, Expr::int_lit(big), Expr::int_lit(big));
        assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Err(Fault::Overflow));
    }

    #[test]
    fn while_loop_cut_by_unroll_bound() {
        // fn spin() -> int { let i = 0; while (true) { i = i + 1; } return i; }
        let def = FuncDef {
            name: "spin".into(),
            params: vec![],
            ret: Ty::Int,
            body: vec![
                Stmt::Let { name: "i".into(), ty: Ty::Int, init: Expr::int_lit(0) },
                Stmt::While {
                    cond: Expr::bool_lit(true),
                    body: vec![Stmt::Assign {
                        name: "i".into(),
                        value: Expr::binary(BinOp::Add, Expr::var("i"), Expr::int_lit(1)),
                    }],
                },
                Stmt::Return(Expr::var("i")),
            ],
            span: Default::default(),
        };
        let funcs = FuncTable::new(&[def]).unwrap();
        let ctx = ctx_with(&funcs);
        let e = Expr::synth(ExprKind::Call("spin".into(), vec![]));
        assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Err(Fault::BoundExceeded));
    }

    #[test]
    fn recursion_cut_by_depth_bound() {
        // fn down(n: int) -> int { return down(n); }
        let def = FuncDef {
            name: "down".into(),
            params: vec![Param { name: "n".into(), ty: Ty::Int }],
            ret: Ty::Int,
            body: vec![Stmt::Return(Expr::synth(ExprKind::Call(
                "down".into(),
                vec![Expr::var("n")],
            )))],
            span: Default::default(),
        };
        let funcs = FuncTable::new(&[def]).unwrap();
        let ctx = ctx_with(&funcs);
        let e = Expr::synth(ExprKind::Call("down".into(), vec![Expr::int_lit(0)]));
        assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Err(Fault::BoundExceeded));
    }

    #[test]
    fn index_out_of_range_faults() {
        let funcs = FuncTable::new(&[]).unwrap();
        let ctx = ctx_with(&funcs);
        let e = Expr::synth(ExprKind::Index(
            Box::new(Expr::synth(ExprKind::ListLit(vec![Expr::int_lit(1), Expr::int_lit(2)]))),
            Box::new(Expr::int_lit(5)),
        ));
        assert_eq!(eval_expr(&e, &Valuation::new(), &ctx), Err(Fault::IndexOutOfRange));
    }

    #[test]
    fn sort_builtin_sorts_ascending() {
        let funcs = FuncTable::new(&[]).unwrap();
        let ctx = ctx_with(&funcs);
        let e = Expr::synth(ExprKind::Call(
            "sort".into(),
            vec![Expr::synth(ExprKind::ListLit(vec![
                Expr::int_lit(3),
                Expr::int_lit(1),
                Expr::int_lit(2),
            ]))],
        ));
        assert_eq!(
            eval_expr(&e, &Valuation::new(), &ctx),
            Ok(Value::List(vec![Value::Int(1), Value::Int(2), Value::Int(3)]))
        );
    }

    #[test]
    fn eval_is_deterministic() {
        let funcs = FuncTable::new(&[]).unwrap();
        let ctx = ctx_with(&funcs);
        let e = Expr::binary(
            BinOp::Mod,
            Expr::binary(BinOp::Mul, Expr::var("a"), Expr::var("x")),
            Expr::var("M"),
        );
        let env = int_env(&[("a", -7), ("x", 3), ("M", 5)]);
        let first = eval_expr(&e, &env, &ctx);
        for _ in 0..10 {
            assert_eq!(eval_expr(&e, &env, &ctx), first);
        }
    }
}
