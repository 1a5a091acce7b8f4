//! A small, total-by-bounding expression/statement language. It gives
//! executable semantics to the query body, to user functions, and to
//! property atoms.

mod ast;
mod check;
mod eval;

pub use ast::{BinOp, Block, Expr, ExprKind, FuncDef, Param, Span, Stmt, Ty, UnOp};
pub use check::{check_expr_in, check_functions, domain_ty, FuncTable, TypeError, BUILTINS};
pub use eval::{
    eval_expr, eval_property, eval_property_expr, eval_query, eval_query_counted, EvalCtx,
    EvalOutcome, Fault, PropertyFault,
};

#[cfg(test)]
mod semantics_tests {
    //! Query and property semantics at the problem level.

    use crate::grammar::Property;
    use crate::io::{parse_expr_str, parse_problem};
    use crate::model::{Example, HiddenInstance, LoudProblem, Valuation, Value};

    fn modhash() -> LoudProblem {
        parse_problem(crate::pack::core_pack().iter().find(|(n, _)| *n == "modhash").unwrap().1)
            .unwrap()
    }

    fn example(pairs: &[(&str, i64)]) -> Example {
        Example {
            bindings: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), Value::Int(*v)))
                .collect::<Valuation>(),
        }
    }

    fn hidden(x: i64) -> HiddenInstance {
        HiddenInstance {
            bindings: [("x".to_string(), Value::Int(x))].into_iter().collect(),
        }
    }

    #[test]
    fn query_holds_at_the_positive_witness() {
        // psi at e = (y: 1, a: 6, M: 5) with x = 1: 1 == 6 mod 5
        let p = modhash();
        let e = example(&[("y", 1), ("a", 6), ("M", 5)]);
        assert!(super::eval_query(&p, &e, &hidden(1)).unwrap());
    }

    #[test]
    fn query_fails_at_a_negative_example_for_all_instances() {
        let p = modhash();
        let e = example(&[("y", 3), ("a", 2), ("M", 6)]);
        for h in p.hidden_domain() {
            assert!(!super::eval_query(&p, &e, &h).unwrap());
        }
    }

    #[test]
    fn literal_true_query_holds_everywhere() {
        let mut p = modhash();
        p.query = crate::lang::Expr::bool_lit(true);
        let e = example(&[("y", -9), ("a", 0), ("M", 1)]);
        assert!(super::eval_query(&p, &e, &hidden(-15)).unwrap());
    }

    #[test]
    fn property_semantics_examples() {
        let p = modhash();
        // 0 <= y at (1, 6, 5)
        let phi = Property::from_expr(parse_expr_str("0 <= y").unwrap());
        assert!(super::eval_property(&phi, &example(&[("y", 1), ("a", 6), ("M", 5)]), &p).unwrap());
        // vacuous implication: a == M => y == 0 at (3, 2, 6)
        let phi = Property::from_expr(parse_expr_str("a == M => y == 0").unwrap());
        assert!(super::eval_property(&phi, &example(&[("y", 3), ("a", 2), ("M", 6)]), &p).unwrap());
        // isPrime(M) against a trial-division oracle for every M in range
        let phi = Property::from_expr(parse_expr_str("isPrime(M)").unwrap());
        let trial_division = |n: i64| -> bool {
            if n < 2 {
                return false;
            }
            (2..n).all(|d| n % d != 0)
        };
        for m in 1..=16 {
            let got = super::eval_property(&phi, &example(&[("y", 0), ("a", 0), ("M", m)]), &p)
                .unwrap();
            assert_eq!(got, trial_division(m), "isPrime({m})");
        }
    }

    #[test]
    fn faulting_property_is_a_hard_error() {
        let p = modhash();
        let phi = Property::from_expr(parse_expr_str("y / a == 0").unwrap());
        let e = example(&[("y", 1), ("a", 0), ("M", 5)]);
        assert!(super::eval_property(&phi, &e, &p).is_err());
    }
}
