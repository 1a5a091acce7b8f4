//! Acceptance assertions for the bundled pack: each problem's expected
//! semantics, verified by exhaustive truth-vector comparison.

use std::time::Instant;

use super::BenchLine;
use crate::cegis::{RunStatus, SynthesisReport};
use crate::grammar::Property;
use crate::io::{
    combined_semantics, parse_expr_str, parse_problem, parse_problem_file, run_mode,
    validate_report, ProblemFile,
};
use crate::model::{LoudProblem, Mode};
use crate::oracle;

pub fn expected_vec(
    problem: &LoudProblem,
    texts: &[&str],
    mode: Mode,
) -> Result<oracle::TruthVec, String> {
    let props: Vec<Property> = texts
        .iter()
        .map(|t| parse_expr_str(t).map(Property::from_expr))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    combined_semantics(problem, &props, mode).map_err(|e| e.to_string())
}

pub fn run_and_check(
    problem: &LoudProblem,
    mode: Mode,
) -> Result<SynthesisReport, String> {
    let (_, report) = run_mode(problem, mode).map_err(|e| e.to_string())?;
    if report.status != RunStatus::Best {
        return Err(format!("{mode} run did not reach Best"));
    }
    validate_report(problem, &report)?;
    Ok(report)
}

/// Engine output must be semantically equal to the given property texts.
pub fn check_semantics(
    problem: &LoudProblem,
    mode: Mode,
    expected: &[&str],
) -> Result<SynthesisReport, String> {
    let report = run_and_check(problem, mode)?;
    let got = combined_semantics(problem, &report.properties, mode).map_err(|e| e.to_string())?;
    let want = expected_vec(problem, expected, mode)?;
    if got != want {
        let got_texts: Vec<String> = report.properties.iter().map(|p| p.to_string()).collect();
        return Err(format!(
            "{mode} semantics differs from the reference set; got {got_texts:?}"
        ));
    }
    Ok(report)
}

pub fn load(src: &str) -> Result<LoudProblem, String> {
    match parse_problem_file(src).map_err(|e| e.to_string())? {
        ProblemFile::Plain(p) => Ok(p),
        ProblemFile::Transformer { name, spec } => {
            let (p, _) = spec.encode(&name).map_err(|e| e.to_string())?;
            Ok(p)
        }
    }
}

fn src_of(name: &str) -> &'static str {
    super::core_pack()
        .into_iter()
        .chain(super::reduced_pack())
        .find(|(n, _)| *n == name)
        .map(|(_, s)| s)
        .expect("bundled problem exists")
}

pub const MODHASH_OVER: [&str; 5] = [
    "0 <= y",
    "y < M",
    "a != 0 || y == 0",
    "a != M || y == 0",
    "a != -M || y == 0",
];

pub const MODHASH_UNDER: [&str; 3] = [
    "y == 0",
    "0 <= a && a < M && a == y",
    "0 <= y && y < M && -M < a && a < M && a != 0 && isPrime(M)",
];

pub const PHILO_OVER: [&str; 3] = [
    "!(o1 == 0 && o2 == 1) || !dl",
    "!(o2 == 0 && o3 == 1) || !dl",
    "!(o3 == 0 && o1 == 1) || !dl",
];

pub const PHILO_UNDER: [&str; 3] = [
    "o1 == 0 && o2 == 0 && o3 == 0 && dl",
    "o1 == 1 && o2 == 1 && o3 == 1 && dl",
    "!dl",
];

pub const MAX3_CONSEQUENCES: [&str; 5] = [
    "x2 < o || x1 < o || x2 == x1",
    "x3 <= o",
    "o == x2 || o == x1 || x1 < x3",
    "o == x2 || o == x3 || x3 < x1",
    "x2 < x3 || o == x2 || x2 < x1",
];

pub const MAX3_IMPLICANTS: [&str; 3] = [
    "x1 == o && x3 <= x1 && x2 <= x1",
    "x2 == o && x3 <= x2 && x1 <= x2",
    "x3 == o && x1 <= x3 && x2 <= x3",
];

pub const REMHASH_WPP: [&str; 2] = [
    "-M < x && x < 0 && 0 < a && a < M && isPrime(M)",
    "0 < x && x < M && -M < a && a < 0 && isPrime(M)",
];

pub const RG_OVER: [&str; 2] = ["!a0 || w", "!a1 || w"];
pub const RG_UNDER: [&str; 2] = ["!a0 && !a1 && !w", "w"];

pub fn check_modhash() -> Result<String, String> {
    let p = parse_problem(src_of("modhash")).map_err(|e| e.to_string())?;
    let over = check_semantics(&p, Mode::Over, &MODHASH_OVER)?;
    let under = check_semantics(&p, Mode::Under, &MODHASH_UNDER)?;
    Ok(format!(
        "over {} properties, under {} properties",
        over.properties.len(),
        under.properties.len()
    ))
}

pub fn check_remhash_wupo() -> Result<String, String> {
    let p = load(src_of("remhash_wupo"))?;
    let report = run_and_check(&p, Mode::Under)?;
    // some disjunct must admit a negative output
    for prop in &report.properties {
        let v = oracle::oracle_interp(prop, &p).map_err(|e| e.to_string())?;
        for (i, e) in p.example_domain().enumerate() {
            if v.get(i) && e.bindings["y'"].as_int().unwrap() < 0 {
                return Ok(format!(
                    "{} admits {} with negative output",
                    prop, e
                ));
            }
        }
    }
    Err("no emitted implicant admits a negative output".into())
}

pub fn check_remhash_wpp() -> Result<String, String> {
    let p = load(src_of("remhash_wpp"))?;
    let report = check_semantics(&p, Mode::Under, &REMHASH_WPP)?;
    Ok(format!("under {} properties", report.properties.len()))
}

pub fn check_philo3() -> Result<String, String> {
    let p = parse_problem(src_of("philo3")).map_err(|e| e.to_string())?;
    let over = check_semantics(&p, Mode::Over, &PHILO_OVER)?;
    let under = check_semantics(&p, Mode::Under, &PHILO_UNDER)?;

    // instance caching may only reduce full hidden-domain sweeps, and must
    // not change the result
    let mut without = p.clone();
    without.config.h_cache_enabled = false;
    let over2 = run_and_check(&without, Mode::Over)?;
    if over2.properties != over.properties {
        return Err("cache changed the over result".into());
    }
    if over.stats.full_hidden_scans > over2.stats.full_hidden_scans {
        return Err(format!(
            "cache increased hidden scans: {} > {}",
            over.stats.full_hidden_scans, over2.stats.full_hidden_scans
        ));
    }
    Ok(format!(
        "over {} / under {} properties; hidden scans {} (cached) vs {} (uncached)",
        over.properties.len(),
        under.properties.len(),
        over.stats.full_hidden_scans,
        over2.stats.full_hidden_scans
    ))
}

fn check_against_oracle(problem: &LoudProblem, mode: Mode) -> Result<SynthesisReport, String> {
    let report = run_and_check(problem, mode)?;
    let grammar = match mode {
        Mode::Over => problem.grammar_over.as_ref(),
        Mode::Under => problem.grammar_under.as_ref(),
    }
    .expect("grammar present");
    let want = oracle::oracle_best_semantics(problem, grammar, mode).map_err(|e| e.to_string())?;
    let got = combined_semantics(problem, &report.properties, mode).map_err(|e| e.to_string())?;
    if want != got {
        return Err(format!("{mode} output differs from oracle best semantics"));
    }
    Ok(report)
}

pub fn check_max2() -> Result<String, String> {
    let p = parse_problem(src_of("max2")).map_err(|e| e.to_string())?;
    let over = check_against_oracle(&p, Mode::Over)?;
    let under = check_against_oracle(&p, Mode::Under)?;
    Ok(format!("over {} / under {} properties", over.properties.len(), under.properties.len()))
}

pub fn check_max3() -> Result<String, String> {
    let p = parse_problem(src_of("max3")).map_err(|e| e.to_string())?;
    let over = check_against_oracle(&p, Mode::Over)?;
    let under = check_against_oracle(&p, Mode::Under)?;
    // the reference formulas re-check as sound consequences / implicants
    let positive = oracle::oracle_positive_set(&p).map_err(|e| e.to_string())?;
    for text in MAX3_CONSEQUENCES {
        let prop = Property::from_expr(parse_expr_str(text).map_err(|e| e.to_string())?);
        let v = oracle::oracle_interp(&prop, &p).map_err(|e| e.to_string())?;
        if !positive.is_subset(&v) {
            return Err(format!("`{text}` is not a consequence"));
        }
    }
    for text in MAX3_IMPLICANTS {
        let prop = Property::from_expr(parse_expr_str(text).map_err(|e| e.to_string())?);
        let v = oracle::oracle_interp(&prop, &p).map_err(|e| e.to_string())?;
        if !v.is_subset(&positive) {
            return Err(format!("`{text}` is not an implicant"));
        }
    }
    Ok(format!("over {} / under {} properties", over.properties.len(), under.properties.len()))
}

pub fn check_shuffle3() -> Result<String, String> {
    let p = parse_problem(src_of("shuffle3")).map_err(|e| e.to_string())?;
    let expected = ["sort(lin) == sort(lout)"];
    check_semantics(&p, Mode::Over, &expected)?;
    check_semantics(&p, Mode::Under, &expected)?;
    check_against_oracle(&p, Mode::Over)?;
    check_against_oracle(&p, Mode::Under)?;
    Ok("over and under both equal the permutation property".into())
}

pub fn check_rg() -> Result<String, String> {
    let p = parse_problem(src_of("rg")).map_err(|e| e.to_string())?;
    let over = check_semantics(&p, Mode::Over, &RG_OVER)?;
    let under = check_semantics(&p, Mode::Under, &RG_UNDER)?;
    check_against_oracle(&p, Mode::Over)?;
    check_against_oracle(&p, Mode::Under)?;
    Ok(format!("over {} / under {} properties", over.properties.len(), under.properties.len()))
}

/// Semantic optimality on the oracle-tractable reduced variants: the
/// emitted conjunction/disjunction must coincide with the intersection/union
/// of everything the oracle deems strongest/weakest.
pub fn check_reduced_oracle() -> Result<String, String> {
    let mut checked = 0;
    for (name, src) in super::reduced_pack() {
        let p = load(src)?;
        for mode in [Mode::Over, Mode::Under] {
            let has = match mode {
                Mode::Over => p.grammar_over.is_some(),
                Mode::Under => p.grammar_under.is_some(),
            };
            if has {
                check_against_oracle(&p, mode).map_err(|e| format!("{name}: {e}"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} reduced runs match the oracle"))
}

type Job = fn() -> Result<String, String>;

pub fn run_all(oracle_check: bool) -> Vec<BenchLine> {
    let jobs: Vec<(&str, Job)> = vec![
        ("modhash", check_modhash),
        ("remhash_wupo", check_remhash_wupo),
        ("remhash_wpp", check_remhash_wpp),
        ("philo3", check_philo3),
        ("max2", check_max2),
        ("max3", check_max3),
        ("shuffle3", check_shuffle3),
        ("rg", check_rg),
    ];
    let mut out = Vec::new();
    for (name, job) in jobs {
        let start = Instant::now();
        let (passed, detail) = match job() {
            Ok(d) => (true, d),
            Err(e) => (false, e),
        };
        out.push(BenchLine {
            name: name.to_string(),
            passed,
            detail,
            millis: start.elapsed().as_millis() as u64,
        });
    }
    if oracle_check {
        let start = Instant::now();
        let (passed, detail) = match check_reduced_oracle() {
            Ok(d) => (true, d),
            Err(e) => (false, e),
        };
        out.push(BenchLine {
            name: "oracle-reduced".to_string(),
            passed,
            detail,
            millis: start.elapsed().as_millis() as u64,
        });
    }
    out
}

