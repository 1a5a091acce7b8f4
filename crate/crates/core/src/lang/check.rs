//! Load-time type discipline for expressions and function bodies.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::{BinOp, Block, Expr, ExprKind, FuncDef, Span, Stmt, Ty, UnOp};
use crate::model::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("{span}: unknown identifier `{name}`")]
    UnknownIdent { name: String, span: Span },
    #[error("{span}: unknown function `{name}`")]
    UnknownFunction { name: String, span: Span },
    #[error("{span}: `{name}` expects {expected} argument(s), got {got}")]
    Arity { name: String, expected: usize, got: usize, span: Span },
    #[error("{span}: expected {expected}, got {got}")]
    Mismatch { expected: String, got: String, span: Span },
    #[error("{span}: duplicate definition of `{name}`")]
    Duplicate { name: String, span: Span },
    #[error("{0}: not every control path returns a value")]
    MissingReturn(Span),
}

/// Resolved callables: user functions plus builtins.
#[derive(Debug, Clone, Default)]
pub struct FuncTable {
    funcs: HashMap<String, FuncDef>,
}

pub const BUILTINS: &[(&str, &[Ty], Ty)] = &[
    ("mod", &[Ty::Int, Ty::Int], Ty::Int),
    ("abs", &[Ty::Int], Ty::Int),
    ("min", &[Ty::Int, Ty::Int], Ty::Int),
    ("max", &[Ty::Int, Ty::Int], Ty::Int),
];

impl FuncTable {
    pub fn new(defs: &[FuncDef]) -> Result<Self, TypeError> {
        let mut funcs = HashMap::new();
        for def in defs {
            if funcs.insert(def.name.clone(), def.clone()).is_some()
                || BUILTINS.iter().any(|(n, _, _)| *n == def.name)
                || matches!(def.name.as_str(), "len" | "sort")
            {
                return Err(TypeError::Duplicate { name: def.name.clone(), span: def.span });
            }
        }
        Ok(FuncTable { funcs })
    }

    pub fn get(&self, name: &str) -> Option<&FuncDef> {
        self.funcs.get(name)
    }

    pub fn defs(&self) -> impl Iterator<Item = &FuncDef> {
        self.funcs.values()
    }
}

struct Scope<'a> {
    table: &'a FuncTable,
    frames: Vec<HashMap<String, Ty>>,
}

impl<'a> Scope<'a> {
    fn lookup(&self, name: &str) -> Option<&Ty> {
        self.frames.iter().rev().find_map(|f| f.get(name))
    }

    fn declare(&mut self, name: &str, ty: Ty) {
        self.frames.last_mut().unwrap().insert(name.to_string(), ty);
    }
}

fn value_ty(v: &Value) -> Result<Ty, String> {
    match v {
        Value::Int(_) => Ok(Ty::Int),
        Value::Bool(_) => Ok(Ty::Bool),
        Value::List(xs) => {
            let mut elem = None;
            for x in xs {
                let t = value_ty(x)?;
                match &elem {
                    None => elem = Some(t),
                    Some(e) if *e == t => {}
                    Some(e) => return Err(format!("mixed list element types {e} and {t}")),
                }
            }
            Ok(Ty::List(Box::new(elem.unwrap_or(Ty::Int))))
        }
    }
}

fn check_expr(e: &Expr, scope: &Scope) -> Result<Ty, TypeError> {
    match &e.kind {
        ExprKind::Lit(v) => value_ty(v).map_err(|got| TypeError::Mismatch {
            expected: "homogeneous list".into(),
            got,
            span: e.span,
        }),
        ExprKind::Var(name) => scope
            .lookup(name)
            .cloned()
            .ok_or_else(|| TypeError::UnknownIdent { name: name.clone(), span: e.span }),
        ExprKind::Unary(op, a) => {
            let ta = check_expr(a, scope)?;
            let (want, out) = match op {
                UnOp::Neg => (Ty::Int, Ty::Int),
                UnOp::Not => (Ty::Bool, Ty::Bool),
            };
            expect(&ta, &want, a.span)?;
            Ok(out)
        }
        ExprKind::Binary(op, a, b) => {
            let ta = check_expr(a, scope)?;
            let tb = check_expr(b, scope)?;
            match op {
                BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem | BinOp::Mod => {
                    expect(&ta, &Ty::Int, a.span)?;
                    expect(&tb, &Ty::Int, b.span)?;
                    Ok(Ty::Int)
                }
                BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                    expect(&ta, &Ty::Int, a.span)?;
                    expect(&tb, &Ty::Int, b.span)?;
                    Ok(Ty::Bool)
                }
                BinOp::Eq | BinOp::Ne => {
                    expect(&tb, &ta, b.span)?;
                    Ok(Ty::Bool)
                }
                BinOp::And | BinOp::Or | BinOp::Implies => {
                    expect(&ta, &Ty::Bool, a.span)?;
                    expect(&tb, &Ty::Bool, b.span)?;
                    Ok(Ty::Bool)
                }
            }
        }
        ExprKind::If(c, t, f) => {
            expect(&check_expr(c, scope)?, &Ty::Bool, c.span)?;
            let tt = check_expr(t, scope)?;
            let tf = check_expr(f, scope)?;
            expect(&tf, &tt, f.span)?;
            Ok(tt)
        }
        ExprKind::Call(name, args) => {
            let arg_tys: Vec<Ty> =
                args.iter().map(|a| check_expr(a, scope)).collect::<Result<_, _>>()?;
            // len/sort are polymorphic over the element type, handled apart
            match name.as_str() {
                "len" => {
                    arity(name, 1, args.len(), e.span)?;
                    match &arg_tys[0] {
                        Ty::List(_) => Ok(Ty::Int),
                        got => Err(TypeError::Mismatch {
                            expected: "list".into(),
                            got: got.to_string(),
                            span: args[0].span,
                        }),
                    }
                }
                "sort" => {
                    arity(name, 1, args.len(), e.span)?;
                    expect(&arg_tys[0], &Ty::List(Box::new(Ty::Int)), args[0].span)?;
                    Ok(Ty::List(Box::new(Ty::Int)))
                }
                _ => {
                    if let Some((_, params, ret)) =
                        BUILTINS.iter().find(|(n, _, _)| n == name)
                    {
                        arity(name, params.len(), args.len(), e.span)?;
                        for (t, (want, a)) in arg_tys.iter().zip(params.iter().zip(args)) {
                            expect(t, want, a.span)?;
                        }
                        return Ok(ret.clone());
                    }
                    let def = scope.table.get(name).ok_or_else(|| TypeError::UnknownFunction {
                        name: name.clone(),
                        span: e.span,
                    })?;
                    arity(name, def.params.len(), args.len(), e.span)?;
                    for (t, (p, a)) in arg_tys.iter().zip(def.params.iter().zip(args)) {
                        expect(t, &p.ty, a.span)?;
                    }
                    Ok(def.ret.clone())
                }
            }
        }
        ExprKind::Index(list, idx) => {
            let tl = check_expr(list, scope)?;
            expect(&check_expr(idx, scope)?, &Ty::Int, idx.span)?;
            match tl {
                Ty::List(elem) => Ok(*elem),
                got => Err(TypeError::Mismatch {
                    expected: "list".into(),
                    got: got.to_string(),
                    span: list.span,
                }),
            }
        }
        ExprKind::ListLit(items) => {
            let mut elem: Option<Ty> = None;
            for item in items {
                let t = check_expr(item, scope)?;
                match &elem {
                    None => elem = Some(t),
                    Some(e0) => expect(&t, e0, item.span)?,
                }
            }
            Ok(Ty::List(Box::new(elem.unwrap_or(Ty::Int))))
        }
    }
}

fn expect(got: &Ty, want: &Ty, span: Span) -> Result<(), TypeError> {
    if got == want {
        Ok(())
    } else {
        Err(TypeError::Mismatch { expected: want.to_string(), got: got.to_string(), span })
    }
}

fn arity(name: &str, expected: usize, got: usize, span: Span) -> Result<(), TypeError> {
    if expected == got {
        Ok(())
    } else {
        Err(TypeError::Arity { name: name.to_string(), expected, got, span })
    }
}

fn check_block(block: &Block, scope: &mut Scope, ret: &Ty) -> Result<bool, TypeError> {
    scope.frames.push(HashMap::new());
    let mut returns = false;
    for stmt in block {
        match stmt {
            Stmt::Let { name, ty, init } => {
                let t = check_expr(init, scope)?;
                expect(&t, ty, init.span)?;
                scope.declare(name, ty.clone());
            }
            Stmt::Assign { name, value } => {
                let want = scope
                    .lookup(name)
                    .cloned()
                    .ok_or_else(|| TypeError::UnknownIdent { name: name.clone(), span: value.span })?;
                let t = check_expr(value, scope)?;
                expect(&t, &want, value.span)?;
            }
            Stmt::AssignIndex { name, index, value } => {
                let want = scope
                    .lookup(name)
                    .cloned()
                    .ok_or_else(|| TypeError::UnknownIdent { name: name.clone(), span: value.span })?;
                let elem = match want {
                    Ty::List(e) => *e,
                    got => {
                        return Err(TypeError::Mismatch {
                            expected: "list".into(),
                            got: got.to_string(),
                            span: index.span,
                        })
                    }
                };
                expect(&check_expr(index, scope)?, &Ty::Int, index.span)?;
                expect(&check_expr(value, scope)?, &elem, value.span)?;
            }
            Stmt::If { cond, then_block, else_block } => {
                expect(&check_expr(cond, scope)?, &Ty::Bool, cond.span)?;
                let t = check_block(then_block, scope, ret)?;
                let e = match else_block {
                    Some(b) => check_block(b, scope, ret)?,
                    None => false,
                };
                returns |= t && e;
            }
            Stmt::While { cond, body } => {
                expect(&check_expr(cond, scope)?, &Ty::Bool, cond.span)?;
                check_block(body, scope, ret)?;
            }
            Stmt::For { var, lo, hi, body } => {
                expect(&check_expr(lo, scope)?, &Ty::Int, lo.span)?;
                expect(&check_expr(hi, scope)?, &Ty::Int, hi.span)?;
                scope.frames.push(HashMap::new());
                scope.declare(var, Ty::Int);
                check_block(body, scope, ret)?;
                scope.frames.pop();
            }
            Stmt::Return(e) => {
                expect(&check_expr(e, scope)?, ret, e.span)?;
                returns = true;
            }
        }
    }
    scope.frames.pop();
    Ok(returns)
}

/// Check every function body; every control path must reach a return.
pub fn check_functions(table: &FuncTable) -> Result<(), TypeError> {
    let mut names: Vec<&FuncDef> = table.defs().collect();
    names.sort_by(|a, b| a.name.cmp(&b.name));
    for def in names {
        let mut scope = Scope { table, frames: vec![HashMap::new()] };
        for p in &def.params {
            scope.declare(&p.name, p.ty.clone());
        }
        if !check_block(&def.body, &mut scope, &def.ret)? {
            return Err(TypeError::MissingReturn(def.span));
        }
    }
    Ok(())
}

/// Check a standalone expression against variable typings.
pub fn check_expr_in(
    e: &Expr,
    vars: &HashMap<String, Ty>,
    table: &FuncTable,
) -> Result<Ty, TypeError> {
    let mut scope = Scope { table, frames: vec![HashMap::new()] };
    for (name, ty) in vars {
        scope.declare(name, ty.clone());
    }
    check_expr(e, &scope)
}

/// The type a domain's values inhabit.
pub fn domain_ty(d: &crate::model::Domain) -> Ty {
    use crate::model::Domain;
    match d {
        Domain::IntRange { .. } => Ty::Int,
        Domain::Explicit(vs) => vs.first().map(|v| value_ty(v).unwrap_or(Ty::Int)).unwrap_or(Ty::Int),
        Domain::List { elem, .. } => Ty::List(Box::new(domain_ty(elem))),
    }
}
