//! Cross-checks of the engine against independent brute-force routes:
//! precision checks against direct evaluation of their defining formulas,
//! timeout partials, seed-permuted search, and the worked
//! weakest-liberal-precondition example.

use loud::cegis::{run_over, run_under, RunStatus};
use loud::grammar::{enumerate_properties, Property};
use loud::io::{combined_semantics, parse_expr_str, parse_problem, parse_problem_file, ProblemFile};
use loud::lang::{eval_property_expr, EvalCtx, FuncTable};
use loud::model::{LoudProblem, Mode};
use loud::oracle;
use loud::search::{Engine, GrammarCtx};

fn tiny_modhash() -> LoudProblem {
    parse_problem(
        r#"problem tiny;
vars {
  int y in [-3, 3];
  int a in [-3, 3];
  int M in [1, 4];
  exist int x in [-3, 3];
}
query { y == modhash(a, M, x); }
functions {
  fn modhash(a: int, M: int, x: int) -> int { return (a * x) mod M; }
}
grammar over {
  start D;
  D -> disj(AP, 0..2);
  AP -> I <= I | I < I | I == I;
  I -> 0 | a | y | M;
}
grammar under {
  start C;
  C -> conj(AP, 0..2);
  AP -> I <= I | I < I | I == I;
  I -> 0 | a | y | M;
}
"#,
    )
    .unwrap()
}

/// Direct evaluation of the strongest-precision formula: does there exist a
/// grammar property and a negative example inside the conjunction and the
/// candidate, rejected by the property, with the property consistent with
/// the example sets?
fn brute_force_strongest_witness(
    p: &LoudProblem,
    eng: &mut Engine,
    candidate: &Property,
    pos: &[usize],
    neg: &[usize],
) -> bool {
    let grammar = p.grammar_over.as_ref().unwrap();
    let props = enumerate_properties(grammar, 1_000_000).unwrap();
    let funcs = FuncTable::new(&p.functions).unwrap();
    let ctx = EvalCtx::new(&funcs, &p.config);
    for e in 0..eng.n_examples() {
        if pos.contains(&e) || neg.contains(&e) {
            continue;
        }
        if !eng.prop_on(candidate, e).unwrap() || eng.is_positive(e) {
            continue;
        }
        let env = &eng.example(e).bindings.clone();
        for phi2 in &props {
            let rejects_e = !eval_property_expr(&phi2.ast, env, &ctx).unwrap();
            let ok_pos = pos
                .iter()
                .all(|&i| eval_property_expr(&phi2.ast, &eng.example(i).bindings, &ctx).unwrap());
            let ok_neg = neg
                .iter()
                .all(|&i| !eval_property_expr(&phi2.ast, &eng.example(i).bindings, &ctx).unwrap());
            if rejects_e && ok_pos && ok_neg {
                return true;
            }
        }
    }
    false
}

fn brute_force_weakest_witness(
    p: &LoudProblem,
    eng: &mut Engine,
    candidate: &Property,
    pos: &[usize],
    neg: &[usize],
) -> bool {
    let grammar = p.grammar_under.as_ref().unwrap();
    let props = enumerate_properties(grammar, 1_000_000).unwrap();
    let funcs = FuncTable::new(&p.functions).unwrap();
    let ctx = EvalCtx::new(&funcs, &p.config);
    for e in 0..eng.n_examples() {
        if pos.contains(&e) || neg.contains(&e) {
            continue;
        }
        if eng.prop_on(candidate, e).unwrap() || !eng.is_positive(e) {
            continue;
        }
        let env = &eng.example(e).bindings.clone();
        for phi2 in &props {
            let accepts_e = eval_property_expr(&phi2.ast, env, &ctx).unwrap();
            let ok_pos = pos
                .iter()
                .all(|&i| eval_property_expr(&phi2.ast, &eng.example(i).bindings, &ctx).unwrap());
            let ok_neg = neg
                .iter()
                .all(|&i| !eval_property_expr(&phi2.ast, &eng.example(i).bindings, &ctx).unwrap());
            if accepts_e && ok_pos && ok_neg {
                return true;
            }
        }
    }
    false
}

#[test]
fn check_strongest_top_is_exact_against_brute_force() {
    let p = tiny_modhash();
    let grammar = p.grammar_over.clone().unwrap();
    let candidates = ["0 <= y", "y < M", "y <= a", "a == a"];
    for text in candidates {
        let candidate = Property::from_expr(parse_expr_str(text).unwrap());
        let mut eng = Engine::new(&p).unwrap();
        // example sets: consistent with the candidate by construction
        let pos: Vec<usize> = (0..eng.n_examples())
            .filter(|&e| eng.is_positive(e) && eng.prop_on(&candidate, e).unwrap())
            .take(3)
            .collect();
        let neg: Vec<usize> = (0..eng.n_examples())
            .filter(|&e| !eng.is_positive(e) && !eng.prop_on(&candidate, e).unwrap())
            .take(2)
            .collect();
        let mask = vec![true; eng.n_examples()];
        let mut gctx = GrammarCtx::new(&grammar);
        let got = eng
            .check_strongest(&mut gctx, &candidate, &mask, &pos, &neg)
            .unwrap();
        let want = brute_force_strongest_witness(&p, &mut eng, &candidate, &pos, &neg);
        assert_eq!(got.is_some(), want, "check_strongest exactness for `{text}`");
    }
}

#[test]
fn check_weakest_top_is_exact_against_brute_force() {
    let p = tiny_modhash();
    let grammar = p.grammar_under.clone().unwrap();
    let candidates = ["y == 0", "y == 0 && a == 0", "0 <= y && y < M"];
    for text in candidates {
        let candidate = Property::from_expr(parse_expr_str(text).unwrap());
        let mut eng = Engine::new(&p).unwrap();
        let pos: Vec<usize> = (0..eng.n_examples())
            .filter(|&e| eng.is_positive(e) && eng.prop_on(&candidate, e).unwrap())
            .take(2)
            .collect();
        let neg: Vec<usize> = (0..eng.n_examples())
            .filter(|&e| !eng.is_positive(e) && !eng.prop_on(&candidate, e).unwrap())
            .take(2)
            .collect();
        let mask = vec![false; eng.n_examples()];
        let mut gctx = GrammarCtx::new(&grammar);
        let got = eng.check_weakest(&mut gctx, &candidate, &mask, &pos, &neg).unwrap();
        let want = brute_force_weakest_witness(&p, &mut eng, &candidate, &pos, &neg);
        assert_eq!(got.is_some(), want, "check_weakest exactness for `{text}`");
    }
}

#[test]
fn timeout_partials_are_individually_sound() {
    // whatever a forced timeout leaves behind must re-check sound, and the
    // in-flight candidate goes to diagnostics, not the property list
    let mut p = parse_problem(
        loud::pack::core_pack().iter().find(|(n, _)| *n == "modhash").unwrap().1,
    )
    .unwrap();
    for budget in [1u64, 20, 150] {
        p.config.timeout_millis = budget;
        for mode in [Mode::Over, Mode::Under] {
            let report = match mode {
                Mode::Over => run_over(&p),
                Mode::Under => run_under(&p),
            }
            .unwrap();
            if report.status == RunStatus::Best {
                continue; // machine beat the clock; nothing to check here
            }
            let positive = oracle::oracle_positive_set(&p).unwrap();
            for prop in &report.properties {
                let v = oracle::oracle_interp(prop, &p).unwrap();
                match mode {
                    Mode::Over => assert!(
                        positive.is_subset(&v),
                        "partial over property {prop} must stay sound"
                    ),
                    Mode::Under => assert!(
                        v.is_subset(&positive),
                        "partial under property {prop} must stay sound"
                    ),
                }
            }
        }
    }
}

#[test]
fn seed_permuted_search_reaches_the_same_semantics() {
    // with determinism off, the seed permutes candidate scans; any run still
    // lands on the same best-conjunction semantics
    let base = tiny_modhash();
    let reference = run_over(&base).unwrap();
    let want = combined_semantics(&base, &reference.properties, Mode::Over).unwrap();
    for seed in [1u64, 7, 1234] {
        let mut p = base.clone();
        p.config.deterministic = false;
        p.config.seed = seed;
        let report = run_over(&p).unwrap();
        assert_eq!(report.status, RunStatus::Best);
        let got = combined_semantics(&p, &report.properties, Mode::Over).unwrap();
        assert_eq!(got, want, "seed {seed} diverged semantically");
    }
}

#[test]
fn wlp_of_modhash_zero_output() {
    // the weakest liberal precondition of Q = (y' == 0) for y' = modhash:
    // with atoms {a == 0, x == 0, a == M, x == M} the negated-grammar
    // conjuncts are their four disequalities and the presented precondition
    // is the four-way disjunction
    let src = r#"problem modhash_wlp;
transformer {
  kind wlp;
  in {
    int a in [-15, 15];
    int M in [1, 16];
    int x in [-15, 15];
  }
  out { int y' in [0, 15]; }
  rel { y' == modhash(a, M, x); }
  post { y' == 0; }
}
functions {
  fn modhash(a: int, M: int, x: int) -> int { return (a * x) mod M; }
}
grammar dsl {
  start W;
  W -> a == 0 | x == 0 | a == M | x == M;
}
"#;
    let (name, spec) = match parse_problem_file(src).unwrap() {
        ProblemFile::Transformer { name, spec } => (name, spec),
        _ => panic!("expected transformer"),
    };
    let (problem, enc) = spec.encode(&name).unwrap();
    assert_eq!(enc.mode, Mode::Over);
    assert!(enc.negate_results);
    let report = run_over(&problem).unwrap();
    assert_eq!(report.status, RunStatus::Best);
    let mut texts: Vec<String> = report.properties.iter().map(|p| p.tokens.clone()).collect();
    texts.sort();
    assert_eq!(
        texts,
        vec!["!(a == 0)", "!(a == M)", "!(x == 0)", "!(x == M)"],
        "negated-grammar conjuncts"
    );

    // hoare-validity round trip: every state satisfying a negated disjunct
    // maps to a Q-satisfying output, exhaustively
    let funcs = FuncTable::new(&problem.functions).unwrap();
    let ctx = EvalCtx::new(&funcs, &problem.config);
    for a in -15..=15i64 {
        for m in 1..=16i64 {
            for x in -15..=15i64 {
                let p_holds = a == 0 || x == 0 || a == m || x == m;
                if p_holds {
                    let call = parse_expr_str("modhash(a, M, x)").unwrap();
                    let env: loud::model::Valuation = [
                        ("a".to_string(), loud::model::Value::Int(a)),
                        ("M".to_string(), loud::model::Value::Int(m)),
                        ("x".to_string(), loud::model::Value::Int(x)),
                    ]
                    .into_iter()
                    .collect();
                    let out = loud::lang::eval_expr(&call, &env, &ctx).unwrap();
                    assert_eq!(out, loud::model::Value::Int(0), "wlp violated at ({a},{m},{x})");
                }
            }
        }
    }
}

#[test]
fn spo_p_false_gives_unreachable_everything() {
    // P ≡ false: no reachable state, so the best conjunction excludes
    // whatever the grammar can exclude (here: everything, via ⊥)
    let src = r#"problem dead;
transformer {
  kind spo;
  in { int x in [0, 3]; }
  out { int x' in [1, 4]; }
  rel { x' == x + 1; }
  pre { false; }
}
grammar dsl { start D; D -> disj(AP, 0..1); AP -> x' <= K; K -> 0 | 4; }
"#;
    let (name, spec) = match parse_problem_file(src).unwrap() {
        ProblemFile::Transformer { name, spec } => (name, spec),
        _ => panic!("expected transformer"),
    };
    let (problem, _) = spec.encode(&name).unwrap();
    let report = run_over(&problem).unwrap();
    assert_eq!(report.status, RunStatus::Best);
    let got = combined_semantics(&problem, &report.properties, Mode::Over).unwrap();
    assert!(got.to_bools().iter().all(|&b| !b), "best conjunction is ⊥-equivalent");

    // dually, wupo of P ≡ false is ⊥
    let mut spec2 = spec.clone();
    spec2.kind = loud::transform::TransformerKind::Wupo;
    let (problem2, _) = spec2.encode(&name).unwrap();
    let report2 = run_under(&problem2).unwrap();
    let got2 = combined_semantics(&problem2, &report2.properties, Mode::Under).unwrap();
    assert!(got2.to_bools().iter().all(|&b| !b), "best disjunction is ⊥");
}

#[test]
fn spo_of_modhash_matches_the_direct_query() {
    // forward-encoding the hash as a program relation (input x hidden,
    // parameters a and M free, output y' free) is the same problem as the
    // direct query, so the strongest conjunction has the same shape
    let src = r#"problem modhash_spo;
transformer {
  kind spo;
  in { int x in [-15, 15]; }
  out { int y' in [-15, 15]; }
  params {
    int a in [-15, 15];
    int M in [1, 16];
  }
  rel { y' == modhash(a, M, x); }
  pre { true; }
}
functions {
  fn modhash(a: int, M: int, x: int) -> int { return (a * x) mod M; }
  fn isPrime(n: int) -> bool {
    if n < 2 { return false; }
    let d: int = 2;
    while d * d <= n {
      if n mod d == 0 { return false; }
      d = d + 1;
    }
    return true;
  }
}
grammar dsl {
  start D;
  D -> disj(AP, 0..6);
  AP -> I <= I | I < I | I == I | I != I | isPrime(M) | !isPrime(M);
  I -> 0 | a | y' | M | -M;
}
"#;
    let (name, spec) = match parse_problem_file(src).unwrap() {
        ProblemFile::Transformer { name, spec } => (name, spec),
        _ => panic!("expected transformer"),
    };
    let (problem, enc) = loud::transform::encode_spo(&spec, &name).unwrap();
    assert_eq!(enc.mode, Mode::Over);
    let report = run_over(&problem).unwrap();
    assert_eq!(report.status, RunStatus::Best);
    let got = combined_semantics(&problem, &report.properties, Mode::Over).unwrap();
    let reference: Vec<Property> = [
        "0 <= y'",
        "y' < M",
        "a != 0 || y' == 0",
        "a != M || y' == 0",
        "a != -M || y' == 0",
    ]
    .iter()
    .map(|t| Property::from_expr(parse_expr_str(t).unwrap()))
    .collect();
    let want = combined_semantics(&problem, &reference, Mode::Over).unwrap();
    assert_eq!(got, want, "spo encoding reproduces the direct-query conjunction");
}
