//! Expression and statement AST for the executable semantics language.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Value;

/// Source location, byte offsets into the problem file. Zero for synthesized
/// nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    /// Truncated (round-toward-zero) division.
    Div,
    /// Truncated remainder, sign of the dividend; `remhash` relies on it.
    Rem,
    /// Mathematical modulus: `mod(a, m)` with m > 0 is the unique r in [0, m).
    Mod,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    /// `p => q`, same as `!p || q`.
    Implies,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Mod => "mod",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "=>",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ty {
    Int,
    Bool,
    List(Box<Ty>),
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ty::Int => write!(f, "int"),
            Ty::Bool => write!(f, "bool"),
            Ty::List(t) => write!(f, "list<{t}>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    #[serde(default, skip_serializing)]
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExprKind {
    Lit(Value),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    ListLit(Vec<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    pub fn synth(kind: ExprKind) -> Self {
        Expr { kind, span: Span::default() }
    }

    pub fn int_lit(n: i64) -> Self {
        Expr::synth(ExprKind::Lit(Value::Int(n)))
    }

    pub fn bool_lit(b: bool) -> Self {
        Expr::synth(ExprKind::Lit(Value::Bool(b)))
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::synth(ExprKind::Var(name.into()))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(e: Expr) -> Self {
        Expr::synth(ExprKind::Unary(UnOp::Not, Box::new(e)))
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Self {
        Expr::synth(ExprKind::Binary(op, Box::new(a), Box::new(b)))
    }

    /// n-ary conjunction; empty input is the literal `true`.
    pub fn and_all(mut es: Vec<Expr>) -> Self {
        match es.len() {
            0 => Expr::bool_lit(true),
            1 => es.pop().unwrap(),
            _ => {
                let mut it = es.into_iter();
                let first = it.next().unwrap();
                it.fold(first, |acc, e| Expr::binary(BinOp::And, acc, e))
            }
        }
    }

    /// n-ary disjunction; empty input is the literal `false`.
    pub fn or_all(mut es: Vec<Expr>) -> Self {
        match es.len() {
            0 => Expr::bool_lit(false),
            1 => es.pop().unwrap(),
            _ => {
                let mut it = es.into_iter();
                let first = it.next().unwrap();
                it.fold(first, |acc, e| Expr::binary(BinOp::Or, acc, e))
            }
        }
    }

    pub fn node_count(&self) -> usize {
        let mut n = 1;
        match &self.kind {
            ExprKind::Lit(_) | ExprKind::Var(_) => {}
            ExprKind::Unary(_, a) => n += a.node_count(),
            ExprKind::Binary(_, a, b) => n += a.node_count() + b.node_count(),
            ExprKind::If(c, t, e) => n += c.node_count() + t.node_count() + e.node_count(),
            ExprKind::Call(_, args) | ExprKind::ListLit(args) => {
                n += args.iter().map(|a| a.node_count()).sum::<usize>()
            }
            ExprKind::Index(a, b) => n += a.node_count() + b.node_count(),
        }
        n
    }
}

impl Expr {
    fn prec(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary(op, _, _) => match op {
                BinOp::Implies => 1,
                BinOp::Or => 2,
                BinOp::And => 3,
                BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
                BinOp::Add | BinOp::Sub => 5,
                BinOp::Mul | BinOp::Div | BinOp::Rem | BinOp::Mod => 6,
            },
            ExprKind::Unary(_, _) => 7,
            ExprKind::If(_, _, _) => 0,
            _ => 8,
        }
    }

    fn fmt_at(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        let prec = self.prec();
        let parens = prec < min_prec;
        if parens {
            write!(f, "(")?;
        }
        match &self.kind {
            ExprKind::Lit(v) => write!(f, "{v}")?,
            ExprKind::Var(name) => write!(f, "{name}")?,
            ExprKind::Unary(UnOp::Neg, a) => {
                write!(f, "-")?;
                a.fmt_at(f, prec + 1)?;
            }
            ExprKind::Unary(UnOp::Not, a) => {
                write!(f, "!")?;
                a.fmt_at(f, prec + 1)?;
            }
            ExprKind::Binary(op, a, b) => {
                a.fmt_at(f, prec)?;
                write!(f, " {} ", op.symbol())?;
                b.fmt_at(f, prec + 1)?;
            }
            ExprKind::If(c, t, e) => {
                write!(f, "if ")?;
                c.fmt_at(f, 1)?;
                write!(f, " then ")?;
                t.fmt_at(f, 1)?;
                write!(f, " else ")?;
                e.fmt_at(f, 1)?;
            }
            ExprKind::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    a.fmt_at(f, 0)?;
                }
                write!(f, ")")?;
            }
            ExprKind::Index(l, i) => {
                l.fmt_at(f, 8)?;
                write!(f, "[")?;
                i.fmt_at(f, 0)?;
                write!(f, "]")?;
            }
            ExprKind::ListLit(items) => {
                write!(f, "[")?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    a.fmt_at(f, 0)?;
                }
                write!(f, "]")?;
            }
        }
        if parens {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_at(f, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub ty: Ty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuncDef {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Ty,
    pub body: Block,
    #[serde(default, skip_serializing)]
    pub span: Span,
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Stmt {
    Let { name: String, ty: Ty, init: Expr },
    Assign { name: String, value: Expr },
    AssignIndex { name: String, index: Expr, value: Expr },
    If { cond: Expr, then_block: Block, else_block: Option<Block> },
    While { cond: Expr, body: Block },
    /// `for i in lo..hi` iterates over the half-open range.
    For { var: String, lo: Expr, hi: Expr, body: Block },
    Return(Expr),
}
