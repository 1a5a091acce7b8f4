//! Human-facing property rendering. Machine output always carries the
//! desugared AST; only the display form drops boolean units and re-sugars
//! implications.

use crate::lang::{BinOp, Expr, ExprKind, UnOp};
use crate::model::Value;

fn lit_bool(e: &Expr) -> Option<bool> {
    match &e.kind {
        ExprKind::Lit(Value::Bool(b)) => Some(*b),
        _ => None,
    }
}

/// Drop `true ∧ _` / `false ∨ _` units and double negations, display only.
fn simplify(e: &Expr) -> Expr {
    match &e.kind {
        ExprKind::Binary(BinOp::And, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (lit_bool(&a), lit_bool(&b)) {
                (Some(true), _) => b,
                (_, Some(true)) => a,
                (Some(false), _) | (_, Some(false)) => Expr::bool_lit(false),
                _ => Expr::binary(BinOp::And, a, b),
            }
        }
        ExprKind::Binary(BinOp::Or, a, b) => {
            let (a, b) = (simplify(a), simplify(b));
            match (lit_bool(&a), lit_bool(&b)) {
                (Some(false), _) => b,
                (_, Some(false)) => a,
                (Some(true), _) | (_, Some(true)) => Expr::bool_lit(true),
                _ => Expr::binary(BinOp::Or, a, b),
            }
        }
        ExprKind::Unary(UnOp::Not, a) => {
            let a = simplify(a);
            match (&a.kind, lit_bool(&a)) {
                (_, Some(b)) => Expr::bool_lit(!b),
                (ExprKind::Unary(UnOp::Not, inner), _) => (**inner).clone(),
                _ => Expr::not(a),
            }
        }
        _ => e.clone(),
    }
}

fn disjuncts(e: &Expr) -> Vec<&Expr> {
    match &e.kind {
        ExprKind::Binary(BinOp::Or, a, b) => {
            let mut out = disjuncts(a);
            out.extend(disjuncts(b));
            out
        }
        _ => vec![e],
    }
}

fn conjuncts(e: &Expr) -> Vec<&Expr> {
    match &e.kind {
        ExprKind::Binary(BinOp::And, a, b) => {
            let mut out = conjuncts(a);
            out.extend(conjuncts(b));
            out
        }
        _ => vec![e],
    }
}

/// The positive form of a negative-shaped atom: `a != b` gives `a == b`,
/// `!φ` gives `φ`. None when the expression is not negative-shaped.
fn positive_form(e: &Expr) -> Option<Expr> {
    match &e.kind {
        ExprKind::Unary(UnOp::Not, inner) => Some((**inner).clone()),
        ExprKind::Binary(BinOp::Ne, a, b) => {
            Some(Expr::binary(BinOp::Eq, (**a).clone(), (**b).clone()))
        }
        _ => None,
    }
}

fn is_atom(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Binary(BinOp::And | BinOp::Or | BinOp::Implies, _, _) => false,
        ExprKind::Unary(UnOp::Not, inner) => is_atom(inner),
        _ => true,
    }
}

fn implication(antecedent: &[&Expr], conclusion: &Expr) -> String {
    let lhs = antecedent.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" && ");
    if antecedent.len() == 1 {
        format!("{lhs} => {conclusion}")
    } else {
        format!("({lhs}) => {conclusion}")
    }
}

/// Render a property, re-sugaring `¬p ∨ q` to `p => q` when `p` is a
/// conjunction of atoms and `q` a single atom.
pub fn pretty_property(e: &Expr) -> String {
    let e = simplify(e);
    let ds = disjuncts(&e);

    // the grammar-sugar shape: ¬(a ∧ b ∧ …) ∨ q
    if ds.len() == 2 {
        for (i, d) in ds.iter().enumerate() {
            if let ExprKind::Unary(UnOp::Not, inner) = &d.kind {
                let cs = conjuncts(inner);
                let q = ds[1 - i];
                if cs.iter().all(|c| is_atom(c)) && is_atom(q) && cs.len() >= 2 {
                    return implication(&cs, q);
                }
            }
        }
    }

    // general form: all-but-one disjunct negative-shaped
    if ds.len() >= 2 {
        let mut antecedent: Vec<Expr> = Vec::new();
        let mut conclusion: Vec<&Expr> = Vec::new();
        for d in &ds {
            match positive_form(d) {
                Some(pos) if is_atom(&pos) && !matches!(pos.kind, ExprKind::Unary(UnOp::Not, _)) => {
                    antecedent.push(pos)
                }
                _ => conclusion.push(d),
            }
        }
        if conclusion.len() == 1 && !antecedent.is_empty() && is_atom(conclusion[0]) {
            let refs: Vec<&Expr> = antecedent.iter().collect();
            return implication(&refs, conclusion[0]);
        }
    }

    e.to_string()
}
