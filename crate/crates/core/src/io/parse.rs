//! Problem-file parser and load-time validation. The concrete grammar is
//! documented in `docs/problem-format.md`.

use std::collections::HashMap;

use thiserror::Error;

use super::lex::{lex, LexError, Tok};
use crate::grammar::{Grammar, MacroOp, TNode};
use crate::lang::{
    check_expr_in, check_functions, domain_ty, BinOp, Block, Expr, ExprKind, FuncDef, FuncTable,
    Param, Span, Stmt, Ty, TypeError, UnOp,
};
use crate::model::{Domain, LoudProblem, SearchConfig, Value, VarDecl, VarKind};
use crate::transform::{TransformerError, TransformerKind, TransformerSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{span}: expected {expected}, found {found}")]
    Expected { expected: String, found: String, span: Span },
    #[error("{span}: {msg}")]
    Invalid { msg: String, span: Span },
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Transformer(#[from] TransformerError),
    #[error("{0}")]
    Validation(String),
}

/// Either a plain synthesis problem or a predicate-transformer declaration.
#[derive(Debug, Clone)]
pub enum ProblemFile {
    Plain(LoudProblem),
    Transformer { name: String, spec: TransformerSpec },
}

struct Cursor {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, want: &Tok) -> Result<(), ParseError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(&want.to_string()))
        }
    }

    fn eat_kw(&mut self, word: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Ident(s) if s == word => {
                self.bump();
                Ok(())
            }
            _ => Err(self.expected(&format!("`{word}`"))),
        }
    }

    fn is_kw(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.expected("an identifier")),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let neg = if matches!(self.peek(), Tok::Minus) {
            self.bump();
            true
        } else {
            false
        };
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            _ => Err(self.expected("an integer")),
        }
    }

    fn expected(&self, what: &str) -> ParseError {
        ParseError::Expected {
            expected: what.to_string(),
            found: self.peek().to_string(),
            span: self.span(),
        }
    }
}

// ---------------------------------------------------------------------------
// expressions

fn parse_expr(c: &mut Cursor) -> Result<Expr, ParseError> {
    parse_implies(c)
}

fn parse_implies(c: &mut Cursor) -> Result<Expr, ParseError> {
    let lhs = parse_or(c)?;
    if matches!(c.peek(), Tok::FatArrow) {
        let span = c.span();
        c.bump();
        let rhs = parse_implies(c)?;
        return Ok(Expr::new(
            ExprKind::Binary(BinOp::Implies, Box::new(lhs), Box::new(rhs)),
            span,
        ));
    }
    Ok(lhs)
}

fn parse_or(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut lhs = parse_and(c)?;
    while matches!(c.peek(), Tok::OrOr) {
        let span = c.span();
        c.bump();
        let rhs = parse_and(c)?;
        lhs = Expr::new(ExprKind::Binary(BinOp::Or, Box::new(lhs), Box::new(rhs)), span);
    }
    Ok(lhs)
}

fn parse_and(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut lhs = parse_cmp(c)?;
    while matches!(c.peek(), Tok::AndAnd) {
        let span = c.span();
        c.bump();
        let rhs = parse_cmp(c)?;
        lhs = Expr::new(ExprKind::Binary(BinOp::And, Box::new(lhs), Box::new(rhs)), span);
    }
    Ok(lhs)
}

fn cmp_op(t: &Tok) -> Option<BinOp> {
    match t {
        Tok::EqEq => Some(BinOp::Eq),
        Tok::Ne => Some(BinOp::Ne),
        Tok::Lt => Some(BinOp::Lt),
        Tok::Le => Some(BinOp::Le),
        Tok::Gt => Some(BinOp::Gt),
        Tok::Ge => Some(BinOp::Ge),
        _ => None,
    }
}

fn parse_cmp(c: &mut Cursor) -> Result<Expr, ParseError> {
    let lhs = parse_add(c)?;
    if let Some(op) = cmp_op(c.peek()) {
        let span = c.span();
        c.bump();
        let rhs = parse_add(c)?;
        return Ok(Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span));
    }
    Ok(lhs)
}

fn parse_add(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut lhs = parse_mul(c)?;
    loop {
        let op = match c.peek() {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            _ => break,
        };
        let span = c.span();
        c.bump();
        let rhs = parse_mul(c)?;
        lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
    }
    Ok(lhs)
}

fn parse_mul(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut lhs = parse_unary(c)?;
    loop {
        let op = match c.peek() {
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            Tok::Ident(s) if s == "mod" => BinOp::Mod,
            _ => break,
        };
        let span = c.span();
        c.bump();
        let rhs = parse_unary(c)?;
        lhs = Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span);
    }
    Ok(lhs)
}

fn parse_unary(c: &mut Cursor) -> Result<Expr, ParseError> {
    match c.peek() {
        Tok::Minus => {
            let span = c.span();
            c.bump();
            let inner = parse_unary(c)?;
            Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(inner)), span))
        }
        Tok::Bang => {
            let span = c.span();
            c.bump();
            let inner = parse_unary(c)?;
            Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(inner)), span))
        }
        _ => parse_postfix(c),
    }
}

fn parse_postfix(c: &mut Cursor) -> Result<Expr, ParseError> {
    let mut e = parse_primary(c)?;
    while matches!(c.peek(), Tok::LBracket) {
        let span = c.span();
        c.bump();
        let idx = parse_expr(c)?;
        c.eat(&Tok::RBracket)?;
        e = Expr::new(ExprKind::Index(Box::new(e), Box::new(idx)), span);
    }
    Ok(e)
}

fn parse_primary(c: &mut Cursor) -> Result<Expr, ParseError> {
    let span = c.span();
    match c.peek().clone() {
        Tok::Int(n) => {
            c.bump();
            Ok(Expr::new(ExprKind::Lit(Value::Int(n)), span))
        }
        Tok::LParen => {
            c.bump();
            let e = parse_expr(c)?;
            c.eat(&Tok::RParen)?;
            Ok(e)
        }
        Tok::LBracket => {
            c.bump();
            let mut items = Vec::new();
            if !matches!(c.peek(), Tok::RBracket) {
                loop {
                    items.push(parse_expr(c)?);
                    if matches!(c.peek(), Tok::Comma) {
                        c.bump();
                    } else {
                        break;
                    }
                }
            }
            c.eat(&Tok::RBracket)?;
            Ok(Expr::new(ExprKind::ListLit(items), span))
        }
        Tok::Ident(name) => {
            c.bump();
            match name.as_str() {
                "true" => return Ok(Expr::new(ExprKind::Lit(Value::Bool(true)), span)),
                "false" => return Ok(Expr::new(ExprKind::Lit(Value::Bool(false)), span)),
                "if" => {
                    let cond = parse_expr(c)?;
                    c.eat_kw("then")?;
                    let t = parse_expr(c)?;
                    c.eat_kw("else")?;
                    let e = parse_expr(c)?;
                    return Ok(Expr::new(
                        ExprKind::If(Box::new(cond), Box::new(t), Box::new(e)),
                        span,
                    ));
                }
                _ => {}
            }
            if matches!(c.peek(), Tok::LParen) {
                c.bump();
                let mut args = Vec::new();
                if !matches!(c.peek(), Tok::RParen) {
                    loop {
                        args.push(parse_expr(c)?);
                        if matches!(c.peek(), Tok::Comma) {
                            c.bump();
                        } else {
                            break;
                        }
                    }
                }
                c.eat(&Tok::RParen)?;
                Ok(Expr::new(ExprKind::Call(name, args), span))
            } else {
                Ok(Expr::new(ExprKind::Var(name), span))
            }
        }
        _ => Err(c.expected("an expression")),
    }
}

// ---------------------------------------------------------------------------
// grammar templates

fn parse_template(c: &mut Cursor) -> Result<TNode, ParseError> {
    t_implies(c)
}

fn t_implies(c: &mut Cursor) -> Result<TNode, ParseError> {
    let lhs = t_or(c)?;
    if matches!(c.peek(), Tok::FatArrow) {
        c.bump();
        let rhs = t_implies(c)?;
        // grammar-level implication sugar: p => q is ¬p ∨ q
        return Ok(TNode::Bin(
            BinOp::Or,
            Box::new(TNode::Un(UnOp::Not, Box::new(lhs))),
            Box::new(rhs),
        ));
    }
    Ok(lhs)
}

fn t_or(c: &mut Cursor) -> Result<TNode, ParseError> {
    let mut lhs = t_and(c)?;
    while matches!(c.peek(), Tok::OrOr) {
        c.bump();
        let rhs = t_and(c)?;
        lhs = TNode::Bin(BinOp::Or, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn t_and(c: &mut Cursor) -> Result<TNode, ParseError> {
    let mut lhs = t_cmp(c)?;
    while matches!(c.peek(), Tok::AndAnd) {
        c.bump();
        let rhs = t_cmp(c)?;
        lhs = TNode::Bin(BinOp::And, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn t_cmp(c: &mut Cursor) -> Result<TNode, ParseError> {
    let lhs = t_add(c)?;
    if let Some(op) = cmp_op(c.peek()) {
        c.bump();
        let rhs = t_add(c)?;
        return Ok(TNode::Bin(op, Box::new(lhs), Box::new(rhs)));
    }
    Ok(lhs)
}

fn t_add(c: &mut Cursor) -> Result<TNode, ParseError> {
    let mut lhs = t_mul(c)?;
    loop {
        let op = match c.peek() {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            _ => break,
        };
        c.bump();
        let rhs = t_mul(c)?;
        lhs = TNode::Bin(op, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn t_mul(c: &mut Cursor) -> Result<TNode, ParseError> {
    let mut lhs = t_unary(c)?;
    loop {
        let op = match c.peek() {
            Tok::Star => BinOp::Mul,
            Tok::Slash => BinOp::Div,
            Tok::Percent => BinOp::Rem,
            Tok::Ident(s) if s == "mod" => BinOp::Mod,
            _ => break,
        };
        c.bump();
        let rhs = t_unary(c)?;
        lhs = TNode::Bin(op, Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn t_unary(c: &mut Cursor) -> Result<TNode, ParseError> {
    match c.peek() {
        Tok::Minus => {
            c.bump();
            Ok(TNode::Un(UnOp::Neg, Box::new(t_unary(c)?)))
        }
        Tok::Bang => {
            c.bump();
            Ok(TNode::Un(UnOp::Not, Box::new(t_unary(c)?)))
        }
        _ => t_postfix(c),
    }
}

fn t_postfix(c: &mut Cursor) -> Result<TNode, ParseError> {
    let mut e = t_primary(c)?;
    while matches!(c.peek(), Tok::LBracket) {
        c.bump();
        let idx = parse_template(c)?;
        c.eat(&Tok::RBracket)?;
        e = TNode::Index(Box::new(e), Box::new(idx));
    }
    Ok(e)
}

fn t_primary(c: &mut Cursor) -> Result<TNode, ParseError> {
    let span = c.span();
    match c.peek().clone() {
        Tok::Int(n) => {
            c.bump();
            Ok(TNode::Lit(Value::Int(n)))
        }
        Tok::LParen => {
            c.bump();
            let t = parse_template(c)?;
            c.eat(&Tok::RParen)?;
            Ok(t)
        }
        Tok::Ident(name) => {
            c.bump();
            match name.as_str() {
                "true" => return Ok(TNode::Lit(Value::Bool(true))),
                "false" => return Ok(TNode::Lit(Value::Bool(false))),
                "conj" | "disj" => {
                    let op = if name == "conj" { MacroOp::Conj } else { MacroOp::Disj };
                    c.eat(&Tok::LParen)?;
                    let nt = c.ident()?;
                    c.eat(&Tok::Comma)?;
                    let lo = c.int()?;
                    c.eat(&Tok::DotDot)?;
                    let hi = c.int()?;
                    c.eat(&Tok::RParen)?;
                    if lo < 0 || hi < lo {
                        return Err(ParseError::Invalid {
                            msg: format!("bad macro arity range {lo}..{hi}"),
                            span,
                        });
                    }
                    return Ok(TNode::Macro(op, nt, lo as u32, hi as u32));
                }
                _ => {}
            }
            if matches!(c.peek(), Tok::LParen) {
                c.bump();
                let mut args = Vec::new();
                if !matches!(c.peek(), Tok::RParen) {
                    loop {
                        args.push(parse_template(c)?);
                        if matches!(c.peek(), Tok::Comma) {
                            c.bump();
                        } else {
                            break;
                        }
                    }
                }
                c.eat(&Tok::RParen)?;
                Ok(TNode::Call(name, args))
            } else {
                // resolved to Nt or Var once the nonterminal set is known
                Ok(TNode::Var(name))
            }
        }
        _ => Err(c.expected("a production template")),
    }
}

fn resolve_template(t: TNode, nts: &HashMap<String, ()>) -> TNode {
    match t {
        TNode::Var(name) => {
            if nts.contains_key(&name) {
                TNode::Nt(name)
            } else {
                TNode::Var(name)
            }
        }
        TNode::Un(op, a) => TNode::Un(op, Box::new(resolve_template(*a, nts))),
        TNode::Bin(op, a, b) => TNode::Bin(
            op,
            Box::new(resolve_template(*a, nts)),
            Box::new(resolve_template(*b, nts)),
        ),
        TNode::Index(a, b) => TNode::Index(
            Box::new(resolve_template(*a, nts)),
            Box::new(resolve_template(*b, nts)),
        ),
        TNode::Call(name, args) => {
            TNode::Call(name, args.into_iter().map(|a| resolve_template(a, nts)).collect())
        }
        other => other,
    }
}

// ---------------------------------------------------------------------------
// declarations

fn parse_ty(c: &mut Cursor) -> Result<Ty, ParseError> {
    let name = c.ident()?;
    match name.as_str() {
        "int" => Ok(Ty::Int),
        "bool" => Ok(Ty::Bool),
        "list" => {
            c.eat(&Tok::Lt)?;
            let elem = parse_ty(c)?;
            c.eat(&Tok::Gt)?;
            Ok(Ty::List(Box::new(elem)))
        }
        other => Err(ParseError::Invalid { msg: format!("unknown type `{other}`"), span: c.span() }),
    }
}

fn parse_value(c: &mut Cursor) -> Result<Value, ParseError> {
    match c.peek().clone() {
        Tok::Minus | Tok::Int(_) => Ok(Value::Int(c.int()?)),
        Tok::Ident(s) if s == "true" => {
            c.bump();
            Ok(Value::Bool(true))
        }
        Tok::Ident(s) if s == "false" => {
            c.bump();
            Ok(Value::Bool(false))
        }
        _ => Err(c.expected("a value")),
    }
}

fn parse_scalar_domain(c: &mut Cursor) -> Result<Domain, ParseError> {
    let span = c.span();
    match c.peek() {
        Tok::LBracket => {
            c.bump();
            let lo = c.int()?;
            c.eat(&Tok::Comma)?;
            let hi = c.int()?;
            c.eat(&Tok::RBracket)?;
            if lo > hi {
                return Err(ParseError::Invalid {
                    msg: format!("empty range [{lo}, {hi}]"),
                    span,
                });
            }
            Ok(Domain::IntRange { lo, hi })
        }
        Tok::LBrace => {
            c.bump();
            let mut values = Vec::new();
            loop {
                values.push(parse_value(c)?);
                if matches!(c.peek(), Tok::Comma) {
                    c.bump();
                } else {
                    break;
                }
            }
            c.eat(&Tok::RBrace)?;
            Ok(Domain::explicit(values))
        }
        _ => Err(c.expected("a domain (`[lo, hi]` or `{v, ...}`)")),
    }
}

fn parse_var_decl(c: &mut Cursor, allow_exist: bool) -> Result<VarDecl, ParseError> {
    let span = c.span();
    let kind = if c.is_kw("exist") {
        c.bump();
        if !allow_exist {
            return Err(ParseError::Invalid {
                msg: "`exist` is not allowed in this block".into(),
                span,
            });
        }
        VarKind::Hidden
    } else {
        VarKind::Free
    };
    let ty = parse_ty(c)?;
    let name = c.ident()?;
    let domain = match &ty {
        Ty::Bool => {
            if c.is_kw("in") {
                c.bump();
                let d = parse_scalar_domain(c)?;
                check_domain_ty(&d, &Ty::Bool, span)?;
                d
            } else {
                Domain::bool()
            }
        }
        Ty::Int => {
            c.eat_kw("in")?;
            let d = parse_scalar_domain(c)?;
            check_domain_ty(&d, &Ty::Int, span)?;
            d
        }
        Ty::List(elem) => {
            c.eat_kw("in")?;
            let e = parse_scalar_domain(c)?;
            check_domain_ty(&e, elem, span)?;
            c.eat_kw("len")?;
            let (len_lo, len_hi) = match c.peek() {
                Tok::LBracket => {
                    c.bump();
                    let lo = c.int()?;
                    c.eat(&Tok::Comma)?;
                    let hi = c.int()?;
                    c.eat(&Tok::RBracket)?;
                    (lo, hi)
                }
                _ => {
                    let n = c.int()?;
                    (n, n)
                }
            };
            if len_lo < 0 || len_hi < len_lo {
                return Err(ParseError::Invalid {
                    msg: format!("bad length range {len_lo}..{len_hi}"),
                    span,
                });
            }
            Domain::List { elem: Box::new(e), len_lo: len_lo as u32, len_hi: len_hi as u32 }
        }
    };
    c.eat(&Tok::Semi)?;
    if domain.size() == 0 {
        return Err(ParseError::Invalid { msg: format!("variable `{name}` has an empty domain"), span });
    }
    Ok(VarDecl { name, kind, domain })
}

fn check_domain_ty(d: &Domain, want: &Ty, span: Span) -> Result<(), ParseError> {
    let got = domain_ty(d);
    if &got == want {
        Ok(())
    } else {
        Err(ParseError::Invalid { msg: format!("domain has type {got}, expected {want}"), span })
    }
}

// ---------------------------------------------------------------------------
// functions

fn parse_func(c: &mut Cursor) -> Result<FuncDef, ParseError> {
    let span = c.span();
    c.eat_kw("fn")?;
    let name = c.ident()?;
    c.eat(&Tok::LParen)?;
    let mut params = Vec::new();
    if !matches!(c.peek(), Tok::RParen) {
        loop {
            let pname = c.ident()?;
            c.eat(&Tok::Colon)?;
            let ty = parse_ty(c)?;
            params.push(Param { name: pname, ty });
            if matches!(c.peek(), Tok::Comma) {
                c.bump();
            } else {
                break;
            }
        }
    }
    c.eat(&Tok::RParen)?;
    c.eat(&Tok::Arrow)?;
    let ret = parse_ty(c)?;
    let body = parse_block(c)?;
    Ok(FuncDef { name, params, ret, body, span })
}

fn parse_block(c: &mut Cursor) -> Result<Block, ParseError> {
    c.eat(&Tok::LBrace)?;
    let mut stmts = Vec::new();
    while !matches!(c.peek(), Tok::RBrace) {
        stmts.push(parse_stmt(c)?);
    }
    c.eat(&Tok::RBrace)?;
    Ok(stmts)
}

fn parse_stmt(c: &mut Cursor) -> Result<Stmt, ParseError> {
    if c.is_kw("let") {
        c.bump();
        let name = c.ident()?;
        c.eat(&Tok::Colon)?;
        let ty = parse_ty(c)?;
        c.eat(&Tok::Assign)?;
        let init = parse_expr(c)?;
        c.eat(&Tok::Semi)?;
        return Ok(Stmt::Let { name, ty, init });
    }
    if c.is_kw("return") {
        c.bump();
        let e = parse_expr(c)?;
        c.eat(&Tok::Semi)?;
        return Ok(Stmt::Return(e));
    }
    if c.is_kw("if") {
        c.bump();
        let cond = parse_expr(c)?;
        let then_block = parse_block(c)?;
        let else_block = if c.is_kw("else") {
            c.bump();
            if c.is_kw("if") {
                Some(vec![parse_stmt(c)?])
            } else {
                Some(parse_block(c)?)
            }
        } else {
            None
        };
        return Ok(Stmt::If { cond, then_block, else_block });
    }
    if c.is_kw("while") {
        c.bump();
        let cond = parse_expr(c)?;
        let body = parse_block(c)?;
        return Ok(Stmt::While { cond, body });
    }
    if c.is_kw("for") {
        c.bump();
        let var = c.ident()?;
        c.eat_kw("in")?;
        let lo = parse_add(c)?;
        c.eat(&Tok::DotDot)?;
        let hi = parse_add(c)?;
        let body = parse_block(c)?;
        return Ok(Stmt::For { var, lo, hi, body });
    }
    // assignment: `name = e;` or `name[i] = e;`
    let name = c.ident()?;
    if matches!(c.peek(), Tok::LBracket) {
        c.bump();
        let index = parse_expr(c)?;
        c.eat(&Tok::RBracket)?;
        c.eat(&Tok::Assign)?;
        let value = parse_expr(c)?;
        c.eat(&Tok::Semi)?;
        return Ok(Stmt::AssignIndex { name, index, value });
    }
    c.eat(&Tok::Assign)?;
    let value = parse_expr(c)?;
    c.eat(&Tok::Semi)?;
    Ok(Stmt::Assign { name, value })
}

// ---------------------------------------------------------------------------
// grammar blocks

fn parse_grammar_body(c: &mut Cursor, depth_bound: u32) -> Result<Grammar, ParseError> {
    c.eat(&Tok::LBrace)?;
    let mut start = None;
    let mut rules: Vec<(String, Vec<TNode>)> = Vec::new();
    while !matches!(c.peek(), Tok::RBrace) {
        if c.is_kw("start") {
            c.bump();
            start = Some(c.ident()?);
            c.eat(&Tok::Semi)?;
            continue;
        }
        let nt = c.ident()?;
        c.eat(&Tok::Arrow)?;
        let mut alts = vec![parse_template(c)?];
        while matches!(c.peek(), Tok::Pipe) {
            c.bump();
            alts.push(parse_template(c)?);
        }
        c.eat(&Tok::Semi)?;
        match rules.iter_mut().find(|(n, _)| *n == nt) {
            Some((_, existing)) => existing.extend(alts),
            None => rules.push((nt, alts)),
        }
    }
    c.eat(&Tok::RBrace)?;
    let start = start
        .or_else(|| rules.first().map(|(n, _)| n.clone()))
        .ok_or_else(|| ParseError::Validation("grammar block has no productions".into()))?;
    let nts: HashMap<String, ()> = rules.iter().map(|(n, _)| (n.clone(), ())).collect();
    let nonterminals = rules
        .into_iter()
        .map(|(n, alts)| (n, alts.into_iter().map(|t| resolve_template(t, &nts)).collect()))
        .collect();
    Ok(Grammar { nonterminals, start, depth_bound })
}

// ---------------------------------------------------------------------------
// top level

#[derive(Default)]
struct RawFile {
    name: Option<String>,
    vars: Vec<VarDecl>,
    query: Vec<Expr>,
    functions: Vec<FuncDef>,
    grammar_over: Option<Grammar>,
    grammar_under: Option<Grammar>,
    grammar_dsl: Option<Grammar>,
    transformer: Option<RawTransformer>,
    config: SearchConfig,
}

struct RawTransformer {
    kind: TransformerKind,
    input_state: Vec<VarDecl>,
    output_state: Vec<VarDecl>,
    params: Vec<VarDecl>,
    rel: Vec<Expr>,
    pre: Option<Expr>,
    post: Option<Expr>,
}

fn parse_config(c: &mut Cursor, cfg: &mut SearchConfig) -> Result<(), ParseError> {
    c.eat(&Tok::LBrace)?;
    while !matches!(c.peek(), Tok::RBrace) {
        let span = c.span();
        let key = c.ident()?;
        let val = c.int()?;
        c.eat(&Tok::Semi)?;
        let positive = |v: i64| -> Result<u32, ParseError> {
            if v >= 1 {
                Ok(v as u32)
            } else {
                Err(ParseError::Invalid { msg: format!("`{key}` must be >= 1"), span })
            }
        };
        match key.as_str() {
            "depth" | "propertyDepthBound" => cfg.property_depth_bound = positive(val)?,
            "unroll" | "loopUnrollBound" => cfg.loop_unroll_bound = positive(val)?,
            "recursion" | "recursionDepthBound" => cfg.recursion_depth_bound = positive(val)?,
            "timeout" | "timeoutMillis" => {
                if val < 0 {
                    return Err(ParseError::Invalid {
                        msg: "`timeout` must be >= 0".into(),
                        span,
                    });
                }
                cfg.timeout_millis = val as u64;
            }
            "seed" => cfg.seed = val as u64,
            "magnitude" | "intMagnitudeBound" => {
                cfg.int_magnitude_bound = positive(val)? as i64;
            }
            "cap" | "enumerationCap" => cfg.enumeration_cap = positive(val)? as u64,
            other => {
                return Err(ParseError::Invalid {
                    msg: format!("unknown config key `{other}`"),
                    span,
                })
            }
        }
    }
    c.eat(&Tok::RBrace)?;
    Ok(())
}

fn parse_decl_block(c: &mut Cursor, allow_exist: bool) -> Result<Vec<VarDecl>, ParseError> {
    c.eat(&Tok::LBrace)?;
    let mut out = Vec::new();
    while !matches!(c.peek(), Tok::RBrace) {
        out.push(parse_var_decl(c, allow_exist)?);
    }
    c.eat(&Tok::RBrace)?;
    Ok(out)
}

fn parse_expr_block(c: &mut Cursor) -> Result<Vec<Expr>, ParseError> {
    c.eat(&Tok::LBrace)?;
    let mut out = Vec::new();
    while !matches!(c.peek(), Tok::RBrace) {
        out.push(parse_expr(c)?);
        c.eat(&Tok::Semi)?;
    }
    c.eat(&Tok::RBrace)?;
    Ok(out)
}

fn parse_transformer(c: &mut Cursor) -> Result<RawTransformer, ParseError> {
    c.eat(&Tok::LBrace)?;
    let span = c.span();
    let mut kind = None;
    let mut input_state = Vec::new();
    let mut output_state = Vec::new();
    let mut params = Vec::new();
    let mut rel = Vec::new();
    let mut pre = None;
    let mut post = None;
    while !matches!(c.peek(), Tok::RBrace) {
        let key = c.ident()?;
        match key.as_str() {
            "kind" => {
                let k = c.ident()?;
                kind = Some(TransformerKind::parse(&k).ok_or_else(|| ParseError::Invalid {
                    msg: format!("unknown transformer kind `{k}` (spo|wlp|wupo|wpp)"),
                    span,
                })?);
                c.eat(&Tok::Semi)?;
            }
            "in" => input_state = parse_decl_block(c, false)?,
            "out" => output_state = parse_decl_block(c, false)?,
            "params" => params = parse_decl_block(c, false)?,
            "rel" => rel = parse_expr_block(c)?,
            "pre" => {
                let mut es = parse_expr_block(c)?;
                pre = Some(match es.len() {
                    1 => es.pop().unwrap(),
                    _ => Expr::and_all(es),
                });
            }
            "post" => {
                let mut es = parse_expr_block(c)?;
                post = Some(match es.len() {
                    1 => es.pop().unwrap(),
                    _ => Expr::and_all(es),
                });
            }
            other => {
                return Err(ParseError::Invalid {
                    msg: format!("unknown transformer field `{other}`"),
                    span,
                })
            }
        }
    }
    c.eat(&Tok::RBrace)?;
    let kind = kind.ok_or(ParseError::Invalid { msg: "transformer block needs `kind`".into(), span })?;
    if rel.is_empty() {
        return Err(ParseError::Invalid { msg: "transformer block needs `rel`".into(), span });
    }
    Ok(RawTransformer { kind, input_state, output_state, params, rel, pre, post })
}

/// Parse and fully validate a problem file.
pub fn parse_problem_file(src: &str) -> Result<ProblemFile, ParseError> {
    let lexer = lex(src)?;
    let mut c = Cursor { toks: lexer.toks, pos: 0 };
    let mut raw = RawFile::default();

    c.eat_kw("problem")?;
    raw.name = Some(c.ident()?);
    c.eat(&Tok::Semi)?;

    while !matches!(c.peek(), Tok::Eof) {
        let span = c.span();
        let key = c.ident()?;
        match key.as_str() {
            "vars" => raw.vars = parse_decl_block(&mut c, true)?,
            "query" => raw.query = parse_expr_block(&mut c)?,
            "functions" => {
                c.eat(&Tok::LBrace)?;
                while !matches!(c.peek(), Tok::RBrace) {
                    raw.functions.push(parse_func(&mut c)?);
                }
                c.eat(&Tok::RBrace)?;
            }
            "grammar" => {
                let which = c.ident()?;
                let g = parse_grammar_body(&mut c, 0)?;
                match which.as_str() {
                    "over" => raw.grammar_over = Some(g),
                    "under" => raw.grammar_under = Some(g),
                    "dsl" => raw.grammar_dsl = Some(g),
                    other => {
                        return Err(ParseError::Invalid {
                            msg: format!("unknown grammar slot `{other}` (over|under|dsl)"),
                            span,
                        })
                    }
                }
            }
            "transformer" => raw.transformer = Some(parse_transformer(&mut c)?),
            "config" => parse_config(&mut c, &mut raw.config)?,
            other => {
                return Err(ParseError::Invalid {
                    msg: format!("unknown block `{other}`"),
                    span,
                })
            }
        }
    }
    build(raw)
}

fn build(mut raw: RawFile) -> Result<ProblemFile, ParseError> {
    let name = raw.name.clone().unwrap_or_default();
    let depth = raw.config.property_depth_bound;
    if let Some(g) = &mut raw.grammar_over {
        g.depth_bound = depth;
    }
    if let Some(g) = &mut raw.grammar_under {
        g.depth_bound = depth;
    }
    if let Some(g) = &mut raw.grammar_dsl {
        g.depth_bound = depth;
    }

    if let Some(t) = raw.transformer {
        if !raw.vars.is_empty() || !raw.query.is_empty() {
            return Err(ParseError::Validation(
                "transformer problems declare state in the transformer block, not vars/query".into(),
            ));
        }
        let dsl = raw
            .grammar_dsl
            .or(raw.grammar_over)
            .or(raw.grammar_under)
            .ok_or_else(|| ParseError::Validation("transformer problems need a `grammar dsl` block".into()))?;
        let spec = TransformerSpec {
            kind: t.kind,
            input_state: t.input_state,
            output_state: t.output_state,
            params: t.params,
            rel: Expr::and_all(t.rel),
            pre: t.pre,
            post: t.post,
            functions: raw.functions,
            dsl,
            config: raw.config,
        };
        spec.validate()?;
        // run the full validation pipeline on the encoded problem
        let (problem, _) = spec.encode(&name)?;
        validate_problem(&problem)?;
        return Ok(ProblemFile::Transformer { name, spec });
    }

    if raw.query.is_empty() {
        return Err(ParseError::Validation("missing `query` block".into()));
    }
    if raw.grammar_over.is_none() && raw.grammar_under.is_none() {
        return Err(ParseError::Validation(
            "at least one of `grammar over` / `grammar under` is required".into(),
        ));
    }
    let problem = LoudProblem {
        name,
        vars: raw.vars,
        query: Expr::and_all(raw.query),
        functions: raw.functions,
        grammar_over: raw.grammar_over,
        grammar_under: raw.grammar_under,
        config: raw.config,
    };
    validate_problem(&problem)?;
    Ok(ProblemFile::Plain(problem))
}

/// Full load-time validation: unique names, well-formed grammars, typed query
/// and grammar atoms.
pub fn validate_problem(p: &LoudProblem) -> Result<(), ParseError> {
    let mut seen = HashMap::new();
    for v in &p.vars {
        if seen.insert(v.name.clone(), ()).is_some() {
            return Err(ParseError::Validation(format!("duplicate variable `{}`", v.name)));
        }
        if v.domain.size() == 0 {
            return Err(ParseError::Validation(format!("variable `{}` has an empty domain", v.name)));
        }
    }
    let funcs = FuncTable::new(&p.functions)?;
    check_functions(&funcs)?;

    let all_vars: HashMap<String, Ty> =
        p.vars.iter().map(|v| (v.name.clone(), domain_ty(&v.domain))).collect();
    let ty = check_expr_in(&p.query, &all_vars, &funcs)?;
    if ty != Ty::Bool {
        return Err(ParseError::Validation(format!("query has type {ty}, expected bool")));
    }

    // properties range over the free variables only
    let free_vars: HashMap<String, Ty> = p
        .free_vars()
        .map(|v| (v.name.clone(), domain_ty(&v.domain)))
        .collect();
    for g in [&p.grammar_over, &p.grammar_under].into_iter().flatten() {
        g.validate().map_err(|e| ParseError::Validation(e.to_string()))?;
        infer_grammar_types(g, &free_vars, &funcs)?;
    }
    Ok(())
}

/// Infer a type for every nonterminal by fixpoint over the productions; the
/// start symbol must come out bool.
fn infer_grammar_types(
    g: &Grammar,
    vars: &HashMap<String, Ty>,
    funcs: &FuncTable,
) -> Result<(), ParseError> {
    let mut types: HashMap<String, Ty> = HashMap::new();
    for _ in 0..=g.nonterminals.len() {
        let mut changed = false;
        for (name, prods) in &g.nonterminals {
            if types.contains_key(name) {
                continue;
            }
            let mut ty: Option<Ty> = None;
            let mut all_known = true;
            for prod in prods {
                match template_ty(prod, vars, funcs, &types) {
                    Ok(Some(t)) => match &ty {
                        None => ty = Some(t),
                        Some(prev) if *prev == t => {}
                        Some(prev) => {
                            return Err(ParseError::Validation(format!(
                                "nonterminal `{name}` derives both {prev} and {t}"
                            )))
                        }
                    },
                    Ok(None) => all_known = false,
                    Err(e) => return Err(e),
                }
            }
            if let (true, Some(t)) = (all_known, ty) {
                types.insert(name.clone(), t);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    match types.get(&g.start) {
        Some(Ty::Bool) => Ok(()),
        Some(t) => Err(ParseError::Validation(format!(
            "grammar start `{}` derives {t}, expected bool",
            g.start
        ))),
        None => Err(ParseError::Validation(format!(
            "cannot infer a type for grammar start `{}` (unproductive or cyclic)",
            g.start
        ))),
    }
}

/// None means "depends on a nonterminal whose type is not known yet".
fn template_ty(
    t: &TNode,
    vars: &HashMap<String, Ty>,
    funcs: &FuncTable,
    nts: &HashMap<String, Ty>,
) -> Result<Option<Ty>, ParseError> {
    let span = Span::default();
    Ok(match t {
        TNode::Lit(Value::Int(_)) => Some(Ty::Int),
        TNode::Lit(Value::Bool(_)) => Some(Ty::Bool),
        TNode::Lit(Value::List(_)) => Some(Ty::List(Box::new(Ty::Int))),
        TNode::Var(name) => Some(
            vars.get(name)
                .cloned()
                .ok_or_else(|| ParseError::Validation(format!(
                    "grammar references unknown free variable `{name}`"
                )))?,
        ),
        TNode::Nt(name) => nts.get(name).cloned(),
        TNode::Un(op, a) => match template_ty(a, vars, funcs, nts)? {
            None => None,
            Some(ta) => {
                let (want, out) = match op {
                    UnOp::Neg => (Ty::Int, Ty::Int),
                    UnOp::Not => (Ty::Bool, Ty::Bool),
                };
                if ta != want {
                    return Err(ParseError::Validation(format!(
                        "grammar template applies `{op:?}` to {ta}"
                    )));
                }
                Some(out)
            }
        },
        TNode::Bin(op, a, b) => {
            let ta = template_ty(a, vars, funcs, nts)?;
            let tb = template_ty(b, vars, funcs, nts)?;
            match (ta, tb) {
                (Some(ta), Some(tb)) => {
                    use BinOp::*;
                    let out = match op {
                        Add | Sub | Mul | Div | Rem | Mod => {
                            expect_tmpl(&ta, &Ty::Int)?;
                            expect_tmpl(&tb, &Ty::Int)?;
                            Ty::Int
                        }
                        Lt | Le | Gt | Ge => {
                            expect_tmpl(&ta, &Ty::Int)?;
                            expect_tmpl(&tb, &Ty::Int)?;
                            Ty::Bool
                        }
                        Eq | Ne => {
                            expect_tmpl(&tb, &ta)?;
                            Ty::Bool
                        }
                        And | Or | Implies => {
                            expect_tmpl(&ta, &Ty::Bool)?;
                            expect_tmpl(&tb, &Ty::Bool)?;
                            Ty::Bool
                        }
                    };
                    Some(out)
                }
                _ => None,
            }
        }
        TNode::Index(a, b) => {
            let ta = template_ty(a, vars, funcs, nts)?;
            let tb = template_ty(b, vars, funcs, nts)?;
            match (ta, tb) {
                (Some(Ty::List(elem)), Some(Ty::Int)) => Some(*elem),
                (Some(other), Some(_)) => {
                    return Err(ParseError::Validation(format!(
                        "grammar template indexes into {other}"
                    )))
                }
                _ => None,
            }
        }
        TNode::Call(name, args) => {
            let mut tys = Vec::new();
            for a in args {
                match template_ty(a, vars, funcs, nts)? {
                    Some(t) => tys.push(t),
                    None => return Ok(None),
                }
            }
            // reuse the expression checker by building a dummy call over
            // typed placeholder variables
            let mut env = vars.clone();
            let mut arg_exprs = Vec::new();
            for (i, t) in tys.iter().enumerate() {
                let placeholder = format!("__arg{i}");
                env.insert(placeholder.clone(), t.clone());
                arg_exprs.push(Expr::var(placeholder));
            }
            let call = Expr::new(ExprKind::Call(name.clone(), arg_exprs), span);
            Some(check_expr_in(&call, &env, funcs)?)
        }
        TNode::Macro(_, n, _, _) => match nts.get(n) {
            Some(Ty::Bool) => Some(Ty::Bool),
            Some(t) => {
                return Err(ParseError::Validation(format!(
                    "macro over nonterminal `{n}` of type {t}, expected bool"
                )))
            }
            None => None,
        },
    })
}

fn expect_tmpl(got: &Ty, want: &Ty) -> Result<(), ParseError> {
    if got == want {
        Ok(())
    } else {
        Err(ParseError::Validation(format!(
            "grammar template type mismatch: expected {want}, got {got}"
        )))
    }
}

/// Parse a plain (non-transformer) problem.
pub fn parse_problem(src: &str) -> Result<LoudProblem, ParseError> {
    match parse_problem_file(src)? {
        ProblemFile::Plain(p) => Ok(p),
        ProblemFile::Transformer { .. } => Err(ParseError::Validation(
            "expected a plain problem, found a transformer declaration".into(),
        )),
    }
}

/// Parse a standalone expression (used by tests and ad-hoc property input).
pub fn parse_expr_str(src: &str) -> Result<Expr, ParseError> {
    let lexer = lex(src)?;
    let mut c = Cursor { toks: lexer.toks, pos: 0 };
    let e = parse_expr(&mut c)?;
    c.eat(&Tok::Eof)?;
    Ok(e)
}
