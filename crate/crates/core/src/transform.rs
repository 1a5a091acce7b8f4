//! Predicate-transformer encodings: given a program relation between an
//! input state and an output state plus a pre- or postcondition, build the
//! synthesis problem whose best conjunction/disjunction realizes the
//! strongest postcondition, weakest liberal precondition, weakest
//! under-approximate postcondition, or weakest possible precondition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::Grammar;
use crate::lang::{BinOp, Expr, FuncDef};
use crate::model::{LoudProblem, Mode, SearchConfig, VarDecl, VarKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformerKind {
    /// Strongest postcondition; over-mode on ∃σ. P(σ) ∧ rel(σ, σ').
    Spo,
    /// Weakest liberal precondition; over-mode on ∃σ'. ¬Q(σ') ∧ rel(σ, σ')
    /// with the negated grammar, results negated back.
    Wlp,
    /// Weakest under-approximate postcondition; under-mode on the spo query.
    Wupo,
    /// Weakest possible precondition; under-mode on ∃σ'. Q(σ') ∧ rel(σ, σ').
    Wpp,
}

impl TransformerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spo" => Some(TransformerKind::Spo),
            "wlp" => Some(TransformerKind::Wlp),
            "wupo" => Some(TransformerKind::Wupo),
            "wpp" => Some(TransformerKind::Wpp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformerKind::Spo => "spo",
            TransformerKind::Wlp => "wlp",
            TransformerKind::Wupo => "wupo",
            TransformerKind::Wpp => "wpp",
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            TransformerKind::Spo | TransformerKind::Wlp => Mode::Over,
            TransformerKind::Wupo | TransformerKind::Wpp => Mode::Under,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformerError {
    #[error("transformer kind `{0}` requires a `pre` predicate")]
    MissingPre(&'static str),
    #[error("transformer kind `{0}` requires a `post` predicate")]
    MissingPost(&'static str),
    #[error("input and output state variables must be disjoint: `{0}` appears in both")]
    StateClash(String),
}

/// A program relation between disjoint input and output state variables,
/// optional pre/post predicates, and the DSL the properties come from.
#[derive(Debug, Clone)]
pub struct TransformerSpec {
    pub kind: TransformerKind,
    pub input_state: Vec<VarDecl>,
    pub output_state: Vec<VarDecl>,
    /// Always-free parameters (not renamed, not hidden).
    pub params: Vec<VarDecl>,
    /// The relation body ⟦s⟧(σ, σ'), a conjunction of boolean expressions.
    pub rel: Expr,
    pub pre: Option<Expr>,
    pub post: Option<Expr>,
    pub functions: Vec<FuncDef>,
    pub dsl: Grammar,
    pub config: SearchConfig,
}

/// What the runner must do with the raw report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Encoding {
    pub mode: Mode,
    /// Negate every emitted property and present their disjunction (wlp).
    pub negate_results: bool,
}

fn with_kind(decls: &[VarDecl], kind: VarKind) -> impl Iterator<Item = VarDecl> + '_ {
    decls.iter().map(move |d| VarDecl { kind, ..d.clone() })
}

impl TransformerSpec {
    pub fn validate(&self) -> Result<(), TransformerError> {
        // output-state names are either fresh or primed input names; either
        // way they must be disjoint from the input state and the parameters
        for o in &self.output_state {
            if self.input_state.iter().any(|i| i.name == o.name)
                || self.params.iter().any(|p| p.name == o.name)
            {
                return Err(TransformerError::StateClash(o.name.clone()));
            }
        }
        match self.kind {
            TransformerKind::Spo | TransformerKind::Wupo if self.pre.is_none() => {
                Err(TransformerError::MissingPre(self.kind.name()))
            }
            TransformerKind::Wlp | TransformerKind::Wpp if self.post.is_none() => {
                Err(TransformerError::MissingPost(self.kind.name()))
            }
            _ => Ok(()),
        }
    }

    /// Build the synthesis problem for this transformer.
    pub fn encode(&self, name: &str) -> Result<(LoudProblem, Encoding), TransformerError> {
        self.validate()?;
        match self.kind {
            TransformerKind::Spo => Ok((self.forward_problem(name), Encoding {
                mode: Mode::Over,
                negate_results: false,
            })),
            TransformerKind::Wupo => Ok((self.forward_problem(name), Encoding {
                mode: Mode::Under,
                negate_results: false,
            })),
            TransformerKind::Wpp => {
                let query = Expr::binary(
                    BinOp::And,
                    self.post.clone().expect("validated"),
                    self.rel.clone(),
                );
                let mut vars: Vec<VarDecl> = with_kind(&self.input_state, VarKind::Free).collect();
                vars.extend(with_kind(&self.params, VarKind::Free));
                vars.extend(with_kind(&self.output_state, VarKind::Hidden));
                Ok((
                    self.problem(name, vars, query, Some(self.dsl.clone()), Mode::Under),
                    Encoding { mode: Mode::Under, negate_results: false },
                ))
            }
            TransformerKind::Wlp => {
                let query = Expr::binary(
                    BinOp::And,
                    Expr::not(self.post.clone().expect("validated")),
                    self.rel.clone(),
                );
                let mut vars: Vec<VarDecl> = with_kind(&self.input_state, VarKind::Free).collect();
                vars.extend(with_kind(&self.params, VarKind::Free));
                vars.extend(with_kind(&self.output_state, VarKind::Hidden));
                Ok((
                    self.problem(name, vars, query, Some(self.dsl.negated()), Mode::Over),
                    Encoding { mode: Mode::Over, negate_results: true },
                ))
            }
        }
    }

    /// spo and wupo share the identical problem modulo the mode flag:
    /// free = output state (plus params), hidden = input state,
    /// query = P(σ) ∧ rel(σ, σ').
    fn forward_problem(&self, name: &str) -> LoudProblem {
        let query = Expr::binary(
            BinOp::And,
            self.pre.clone().expect("validated"),
            self.rel.clone(),
        );
        let mut vars: Vec<VarDecl> = with_kind(&self.output_state, VarKind::Free).collect();
        vars.extend(with_kind(&self.params, VarKind::Free));
        vars.extend(with_kind(&self.input_state, VarKind::Hidden));
        self.problem(name, vars, query, Some(self.dsl.clone()), self.kind.mode())
    }

    fn problem(
        &self,
        name: &str,
        vars: Vec<VarDecl>,
        query: Expr,
        grammar: Option<Grammar>,
        mode: Mode,
    ) -> LoudProblem {
        let (grammar_over, grammar_under) = match mode {
            Mode::Over => (grammar, None),
            Mode::Under => (None, grammar),
        };
        LoudProblem {
            name: name.to_string(),
            vars,
            query,
            functions: self.functions.clone(),
            grammar_over,
            grammar_under,
            config: self.config.clone(),
        }
    }
}

/// Negation of a grammar's derivable set; re-exported here because the wlp
/// encoding is its main consumer.
pub fn negate_grammar(g: &Grammar) -> Grammar {
    g.negated()
}

fn encode_as(
    spec: &TransformerSpec,
    kind: TransformerKind,
    name: &str,
) -> Result<(LoudProblem, Encoding), TransformerError> {
    TransformerSpec { kind, ..spec.clone() }.encode(name)
}

/// Strongest-postcondition encoding: free = output state, hidden = input
/// state, query = P(σ) ∧ rel(σ, σ'), over-mode.
pub fn encode_spo(
    spec: &TransformerSpec,
    name: &str,
) -> Result<(LoudProblem, Encoding), TransformerError> {
    encode_as(spec, TransformerKind::Spo, name)
}

/// Weakest-liberal-precondition encoding: free = input state, hidden =
/// output state, query = ¬Q(σ') ∧ rel(σ, σ'), over-mode on the negated
/// grammar; results are negated back and presented as a disjunction.
pub fn encode_wlp(
    spec: &TransformerSpec,
    name: &str,
) -> Result<(LoudProblem, Encoding), TransformerError> {
    encode_as(spec, TransformerKind::Wlp, name)
}

/// Weakest-under-approximate-postcondition encoding: the spo problem run in
/// under-mode.
pub fn encode_wupo(
    spec: &TransformerSpec,
    name: &str,
) -> Result<(LoudProblem, Encoding), TransformerError> {
    encode_as(spec, TransformerKind::Wupo, name)
}

/// Weakest-possible-precondition encoding: free = input state, hidden =
/// output state, query = Q(σ') ∧ rel(σ, σ'), under-mode.
pub fn encode_wpp(
    spec: &TransformerSpec,
    name: &str,
) -> Result<(LoudProblem, Encoding), TransformerError> {
    encode_as(spec, TransformerKind::Wpp, name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cegis::{run_over, run_under, RunStatus};
    use crate::io::{parse_problem_file, ProblemFile};
    use crate::model::{Domain, VarKind};
    use crate::oracle;

    fn parse_spec(src: &str) -> (String, TransformerSpec) {
        match parse_problem_file(src).unwrap() {
            ProblemFile::Transformer { name, spec } => (name, spec),
            ProblemFile::Plain(_) => panic!("expected a transformer problem"),
        }
    }

    #[test]
    fn spo_successor_toy() {
        // s: x' = x + 1 over x in [0,3], P = (x <= 1), L = { x' <= k }:
        // the strongest consequence is x' <= 2
        let src = r#"problem inc;
transformer {
  kind spo;
  in { int x in [0, 3]; }
  out { int x' in [1, 4]; }
  rel { x' == x + 1; }
  pre { x <= 1; }
}
grammar dsl { start D; D -> x' <= K; K -> 0 | 1 | 2 | 3 | 4; }
"#;
        let (name, spec) = parse_spec(src);
        let (problem, enc) = spec.encode(&name).unwrap();
        assert_eq!(enc.mode, Mode::Over);
        assert!(!enc.negate_results);
        let report = run_over(&problem).unwrap();
        assert_eq!(report.status, RunStatus::Best);
        assert_eq!(report.properties.len(), 1);
        assert_eq!(report.properties[0].tokens, "x' <= 2");
    }

    #[test]
    fn wlp_successor_toy() {
        // Q = (x' <= 2): the weakest liberal precondition is x <= 1
        let src = r#"problem incwlp;
transformer {
  kind wlp;
  in { int x in [0, 3]; }
  out { int x' in [1, 4]; }
  rel { x' == x + 1; }
  post { x' <= 2; }
}
grammar dsl { start D; D -> x <= K; K -> 0 | 1 | 2 | 3; }
"#;
        let (name, spec) = parse_spec(src);
        let (problem, enc) = spec.encode(&name).unwrap();
        assert_eq!(enc.mode, Mode::Over);
        assert!(enc.negate_results);
        // the encoded problem runs over the negated grammar
        let report = run_over(&problem).unwrap();
        assert_eq!(report.status, RunStatus::Best);
        assert_eq!(report.properties.len(), 1);
        assert_eq!(report.properties[0].tokens, "!(x <= 1)");
        // hoare-validity round trip: for every state satisfying the negated
        // disjunct, every successor satisfies Q
        for x in 0..=3i64 {
            let p_holds = x <= 1;
            let successor_ok = x < 2;
            assert_eq!(p_holds, successor_ok, "wlp exactness at x = {x}");
        }
    }

    #[test]
    fn wupo_reaches_only_reachable_outputs() {
        // one nondeterministic doubling step from x = 1: outputs 1 + 2h
        let src = r#"problem oddstep;
transformer {
  kind wupo;
  in { int h in [0, 3]; }
  out { int x' in [0, 8]; }
  rel { x' == 1 + 2 * h; }
  pre { true; }
}
grammar dsl { start D; D -> mod(x', 2) == K | x' == K; K -> 0 | 1; }
"#;
        let (name, spec) = parse_spec(src);
        let (problem, enc) = spec.encode(&name).unwrap();
        assert_eq!(enc.mode, Mode::Under);
        let report = run_under(&problem).unwrap();
        assert_eq!(report.status, RunStatus::Best);
        // reachable outputs are 1,3,5,7: exactly the odd ones in range — but
        // x' ranges over [0,8] where 9 is odd-free, so mod(x',2) == 1 is NOT
        // an implicant unless every odd value is reachable; here it is
        assert_eq!(report.properties.len(), 1);
        assert_eq!(report.properties[0].tokens, "mod(x', 2) == 1");
    }

    #[test]
    fn wpp_sign_flip_toy() {
        // s: x' = x or x' = -x (one nondeterministic bit), Q = (1 <= x' <= 2):
        // implicants cover -2 <= x <= -1 and 1 <= x <= 2
        // the nondeterministic bit rides along in the output state, which a
        // backward encoding existentially quantifies
        let src = r#"problem flip;
transformer {
  kind wpp;
  in { int x in [-3, 3]; }
  out { int x' in [-3, 3]; int b in [0, 1]; }
  rel { x' == (if b == 1 then x else -x); }
  post { 1 <= x' && x' <= 2; }
}
grammar dsl {
  start C;
  C -> conj(AP, 0..2);
  AP -> K <= x | x <= K | -2 <= x | x <= -1;
  K -> 1 | 2;
}
"#;
        let (name, spec) = parse_spec(src);
        let (problem, enc) = spec.encode(&name).unwrap();
        assert_eq!(enc.mode, Mode::Under);
        let report = run_under(&problem).unwrap();
        assert_eq!(report.status, RunStatus::Best);
        // semantics: x reaches Q for some bit iff |x| in [1,2]
        let got = crate::io::combined_semantics(&problem, &report.properties, Mode::Under).unwrap();
        for (i, e) in problem.example_domain().enumerate() {
            let x = e.bindings["x"].as_int().unwrap();
            let want = (1..=2).contains(&x.abs());
            assert_eq!(got.get(i), want, "coverage at x = {x}");
        }
    }

    #[test]
    fn spo_and_wupo_encode_the_same_problem_modulo_mode() {
        let src = r#"problem same;
transformer {
  kind spo;
  in { int x in [0, 2]; }
  out { int x' in [0, 3]; }
  rel { x' == x + 1; }
  pre { true; }
}
grammar dsl { start D; D -> x' <= K; K -> 0 | 1 | 2 | 3; }
"#;
        let (name, spec) = parse_spec(src);
        let (p1, e1) = encode_spo(&spec, &name).unwrap();
        let (p2, e2) = encode_wupo(&spec, &name).unwrap();
        assert_eq!(e1.mode, Mode::Over);
        assert_eq!(e2.mode, Mode::Under);
        assert_eq!(p1.vars, p2.vars);
        assert_eq!(p1.query, p2.query);
        assert_eq!(p1.grammar_over, p2.grammar_under);
    }

    #[test]
    fn missing_predicates_are_errors() {
        let dsl = Grammar {
            nonterminals: vec![("D".into(), vec![crate::grammar::TNode::Lit(
                crate::model::Value::Bool(true),
            )])],
            start: "D".into(),
            depth_bound: 2,
        };
        let base = TransformerSpec {
            kind: TransformerKind::Spo,
            input_state: vec![VarDecl {
                name: "x".into(),
                kind: VarKind::Free,
                domain: Domain::IntRange { lo: 0, hi: 1 },
            }],
            output_state: vec![VarDecl {
                name: "x'".into(),
                kind: VarKind::Free,
                domain: Domain::IntRange { lo: 0, hi: 1 },
            }],
            params: vec![],
            rel: Expr::bool_lit(true),
            pre: None,
            post: None,
            functions: vec![],
            dsl,
            config: Default::default(),
        };
        assert!(matches!(base.validate(), Err(TransformerError::MissingPre(_))));
        let mut wlp = base.clone();
        wlp.kind = TransformerKind::Wlp;
        assert!(matches!(wlp.validate(), Err(TransformerError::MissingPost(_))));
        let mut clash = base.clone();
        clash.pre = Some(Expr::bool_lit(true));
        clash.output_state[0].name = "x".into();
        assert!(matches!(clash.validate(), Err(TransformerError::StateClash(_))));
    }

    #[test]
    fn negate_grammar_trivial_and_double_negation() {
        // L = {⊤} negates to a set deriving only ⊥-equivalents
        let src = r#"problem neg;
vars { int v in [-2, 2]; exist int h in [0, 1]; }
query { v == h; }
grammar over { start D; D -> disj(AP, 0..2); AP -> v <= 0 | v == 1 | 0 < v; }
"#;
        let p = crate::io::parse_problem(src).unwrap();
        let g = p.grammar_over.clone().unwrap();
        let once = negate_grammar(&g);
        let twice = negate_grammar(&once);

        let originals = crate::grammar::enumerate_properties(&g, 10_000).unwrap();
        let doubled = crate::grammar::enumerate_properties(&twice, 10_000).unwrap();
        // truth-vector comparison: double negation is semantically identity
        let vecs = |props: &[crate::grammar::Property]| -> Vec<Vec<bool>> {
            let mut out: Vec<Vec<bool>> = props
                .iter()
                .map(|pr| oracle::oracle_interp(pr, &p).unwrap().to_bools())
                .collect();
            out.sort();
            out.dedup();
            out
        };
        assert_eq!(vecs(&originals), vecs(&doubled));

        // the singleton case: {⊤} negates to {⊥}
        let top = Grammar {
            nonterminals: vec![("S".into(), vec![crate::grammar::TNode::Lit(
                crate::model::Value::Bool(true),
            )])],
            start: "S".into(),
            depth_bound: 2,
        };
        let neg = negate_grammar(&top);
        let props = crate::grammar::enumerate_properties(&neg, 100).unwrap();
        assert_eq!(props.len(), 1);
        let v = oracle::oracle_interp(&props[0], &p).unwrap();
        assert!(v.to_bools().iter().all(|&b| !b));
    }

    #[test]
    fn wupo_round_trip_soundness() {
        // for every emitted wupo disjunct Q and state y' with Q(y'), some
        // input reaches y' (checked exhaustively) — incorrectness validity
        let (name, spec) = parse_spec(
            crate::pack::core_pack().iter().find(|(n, _)| *n == "remhash_wupo").unwrap().1,
        );
        let (problem, _) = spec.encode(&name).unwrap();
        let report = run_under(&problem).unwrap();
        let positive = oracle::oracle_positive_set(&problem).unwrap();
        for prop in &report.properties {
            let v = oracle::oracle_interp(prop, &problem).unwrap();
            for i in 0..problem.example_domain_size() as usize {
                if v.get(i) {
                    assert!(positive.get(i), "unreachable state accepted by {prop}");
                }
            }
        }
    }
}
