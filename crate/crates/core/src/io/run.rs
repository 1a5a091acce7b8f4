//! Run orchestration: dispatch a parsed problem file to the over/under
//! engines, apply CLI/environment overrides, postprocess transformer
//! results, and optionally validate everything against the oracle.

use thiserror::Error;

use super::parse::{parse_problem_file, ParseError, ProblemFile};
use super::pretty::pretty_property;
use super::report::{PreconditionSection, ReportDocument, ReportProperty};
use crate::cegis::{synth_strongest_conjunction, synth_weakest_disjunction, RunStatus, SynthesisReport};
use crate::grammar::Property;
use crate::lang::Expr;
use crate::model::{LoudProblem, Mode};
use crate::oracle;
use crate::search::{Engine, EngineError};
use crate::transform::Encoding;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("problem has no `grammar {0}` block but mode {0} was requested")]
    MissingGrammar(Mode),
    #[error("oracle check failed: {0}")]
    OracleCheck(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Over,
    Under,
    Both,
}

#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub mode: Option<RunMode>,
    pub timeout_ms: Option<u64>,
    pub seed: Option<u64>,
    pub h_cache: Option<bool>,
    pub oracle_check: bool,
    pub deterministic: Option<bool>,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub reports: Vec<(ReportDocument, SynthesisReport)>,
    pub any_partial: bool,
}

fn apply_overrides(p: &mut LoudProblem, ov: &RunOverrides) {
    if let Ok(ms) = std::env::var("LOUD_TIMEOUT_MS") {
        if let Ok(ms) = ms.parse::<u64>() {
            p.config.timeout_millis = ms;
        }
    }
    if let Some(ms) = ov.timeout_ms {
        p.config.timeout_millis = ms;
    }
    if let Some(seed) = ov.seed {
        p.config.seed = seed;
    }
    if let Some(on) = ov.h_cache {
        p.config.h_cache_enabled = on;
    }
    if let Some(d) = ov.deterministic {
        p.config.deterministic = d;
    }
    if let Some(t) = ov.threads {
        p.config.threads = t.max(1);
    }
    p.config.oracle_check_enabled |= ov.oracle_check;
}

/// Run one mode over one problem and build its report document.
pub fn run_mode(problem: &LoudProblem, mode: Mode) -> Result<(ReportDocument, SynthesisReport), CliError> {
    let grammar = match mode {
        Mode::Over => problem.grammar_over.as_ref(),
        Mode::Under => problem.grammar_under.as_ref(),
    }
    .ok_or(CliError::MissingGrammar(mode))?;
    let mut engine = Engine::new(problem)?;
    let report = match mode {
        Mode::Over => synth_strongest_conjunction(&mut engine, grammar)?,
        Mode::Under => synth_weakest_disjunction(&mut engine, grammar)?,
    };
    if problem.config.oracle_check_enabled {
        validate_report(problem, &report).map_err(CliError::OracleCheck)?;
    }
    let doc = ReportDocument::from_report(&problem.name, &report);
    Ok((doc, report))
}

/// Negate a wlp run's conjuncts into the user-facing precondition.
fn wlp_section(report: &SynthesisReport) -> PreconditionSection {
    let negs: Vec<Expr> = report
        .properties
        .iter()
        .map(|p| simplify_not(&p.ast))
        .collect();
    let text = negs
        .iter()
        .map(|e| {
            let s = pretty_property(e);
            if negs.len() > 1 && s.contains(' ') {
                format!("({s})")
            } else {
                s
            }
        })
        .collect::<Vec<_>>()
        .join(" || ");
    PreconditionSection {
        disjuncts: negs
            .into_iter()
            .map(|e| ReportProperty { text: pretty_property(&e), ast: e })
            .collect(),
        text,
    }
}

/// ¬φ with a double negation collapsed (negated-grammar conjuncts are ¬ψ
/// shapes, so their negation is ψ back).
fn simplify_not(e: &Expr) -> Expr {
    use crate::lang::{ExprKind, UnOp};
    match &e.kind {
        ExprKind::Unary(UnOp::Not, inner) => (**inner).clone(),
        _ => Expr::not(e.clone()),
    }
}

/// Parse, validate, and run a whole problem file.
pub fn run_file(src: &str, ov: &RunOverrides) -> Result<RunOutcome, CliError> {
    let parsed = parse_problem_file(src)?;
    let mut reports = Vec::new();
    match parsed {
        ProblemFile::Plain(mut problem) => {
            apply_overrides(&mut problem, ov);
            let modes: Vec<Mode> = match ov.mode {
                Some(RunMode::Over) => vec![Mode::Over],
                Some(RunMode::Under) => vec![Mode::Under],
                Some(RunMode::Both) => vec![Mode::Over, Mode::Under],
                None => {
                    let mut m = Vec::new();
                    if problem.grammar_over.is_some() {
                        m.push(Mode::Over);
                    }
                    if problem.grammar_under.is_some() {
                        m.push(Mode::Under);
                    }
                    m
                }
            };
            for mode in modes {
                reports.push(run_mode(&problem, mode)?);
            }
        }
        ProblemFile::Transformer { name, mut spec } => {
            apply_overrides_spec(&mut spec.config, ov);
            let (mut problem, encoding) = spec.encode(&name).map_err(ParseError::from)?;
            apply_overrides(&mut problem, ov);
            let (mut doc, report) = run_mode(&problem, encoding.mode)?;
            if let Encoding { negate_results: true, .. } = encoding {
                doc.precondition = Some(wlp_section(&report));
            }
            doc.mode = format!("{} ({})", doc.mode, spec.kind.name());
            reports.push((doc, report));
        }
    }
    let any_partial = reports.iter().any(|(_, r)| r.status == RunStatus::PartialTimeout);
    Ok(RunOutcome { reports, any_partial })
}

fn apply_overrides_spec(cfg: &mut crate::model::SearchConfig, ov: &RunOverrides) {
    if let Some(ms) = ov.timeout_ms {
        cfg.timeout_millis = ms;
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
}

/// Post-run validation: every property re-checks sound by exhaustive scan;
/// Best reports are pairwise- and set-incomparable; on tractable instances the
/// result's semantics equals the oracle's best semantics.
pub fn validate_report(problem: &LoudProblem, report: &SynthesisReport) -> Result<(), String> {
    let positive = oracle::oracle_positive_set(problem).map_err(|e| e.to_string())?;
    let mut interps = Vec::new();
    for p in &report.properties {
        let v = oracle::oracle_interp(p, problem).map_err(|e| e.to_string())?;
        // soundness
        match report.mode {
            Mode::Over => {
                if !positive.is_subset(&v) {
                    return Err(format!("{p} is not a consequence of the query"));
                }
            }
            Mode::Under => {
                if !v.is_subset(&positive) {
                    return Err(format!("{p} is not an implicant of the query"));
                }
            }
        }
        interps.push(v);
    }
    if report.status == RunStatus::Best && report.properties.len() > 1 {
        for i in 0..interps.len() {
            for j in 0..interps.len() {
                if i != j && interps[i].is_subset(&interps[j]) {
                    return Err(format!(
                        "{} and {} are comparable",
                        report.properties[i], report.properties[j]
                    ));
                }
            }
        }
        // set-level: no property may be implied by (over) / imply (under)
        // the combination of all the others
        let n = interps[0].len();
        for i in 0..interps.len() {
            let mut rest = match report.mode {
                Mode::Over => vec![true; n],
                Mode::Under => vec![false; n],
            };
            for (j, v) in interps.iter().enumerate() {
                if j == i {
                    continue;
                }
                for (slot, b) in rest.iter_mut().zip(v.to_bools()) {
                    match report.mode {
                        Mode::Over => *slot &= b,
                        Mode::Under => *slot |= b,
                    }
                }
            }
            let vi = interps[i].to_bools();
            let redundant = match report.mode {
                Mode::Over => rest.iter().zip(&vi).all(|(&r, &v)| !r || v),
                Mode::Under => vi.iter().zip(&rest).all(|(&v, &r)| !v || r),
            };
            if redundant {
                return Err(format!(
                    "{} is redundant against the rest of the set",
                    report.properties[i]
                ));
            }
        }
    }
    if report.status == RunStatus::Best {
        let grammar = match report.mode {
            Mode::Over => problem.grammar_over.as_ref(),
            Mode::Under => problem.grammar_under.as_ref(),
        };
        if let Some(g) = grammar {
            let tractable = crate::grammar::count_derivations(g, 200_000).is_ok()
                && problem.example_domain_size().saturating_mul(problem.hidden_domain_size())
                    <= oracle::ORACLE_PAIR_BOUND;
            if tractable {
                let want = oracle::oracle_best_semantics(problem, g, report.mode)
                    .map_err(|e| e.to_string())?;
                let got = combined_semantics(problem, &report.properties, report.mode)
                    .map_err(|e| e.to_string())?;
                if want != got {
                    return Err(format!(
                        "best {} semantics differs from the oracle's",
                        report.mode
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Conjunction (over) or disjunction (under) of the properties' truth vectors.
pub fn combined_semantics(
    problem: &LoudProblem,
    props: &[Property],
    mode: Mode,
) -> Result<oracle::TruthVec, EngineError> {
    let n = problem.example_domain_size() as usize;
    let mut acc = match mode {
        Mode::Over => oracle::TruthVec::from_bools(&vec![true; n]),
        Mode::Under => oracle::TruthVec::new(n),
    };
    for p in props {
        let v = oracle::oracle_interp(p, problem)?;
        let bits = v.to_bools();
        let acc_bits = acc.to_bools();
        let merged: Vec<bool> = acc_bits
            .iter()
            .zip(&bits)
            .map(|(&a, &b)| match mode {
                Mode::Over => a && b,
                Mode::Under => a || b,
            })
            .collect();
        acc = oracle::TruthVec::from_bools(&merged);
    }
    Ok(acc)
}
