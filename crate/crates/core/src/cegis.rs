//! The outer synthesis algorithms: single-property loops with delayed
//! example merging, whole-set loops, and incomparability postprocessing.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::grammar::{Grammar, Property};
use crate::model::Mode;
use crate::search::{Engine, EngineError, ExampleId, GrammarCtx, Stats};

/// The four evolving example sets plus the last-sound-property bookkeeping.
///
/// Invariants: `e_plus` and `e_minus` are disjoint ordered sets; the may-sets
/// hold at most one example; `phi_last` always accepts every `e_plus` member
/// and rejects every `e_minus` member.
#[derive(Debug, Clone)]
pub struct ExampleBank {
    pub e_plus: Vec<ExampleId>,
    pub e_minus: Vec<ExampleId>,
    pub e_minus_may: Option<ExampleId>,
    pub e_plus_may: Option<ExampleId>,
    pub phi_last: Property,
}

impl ExampleBank {
    pub fn new(e_plus: Vec<ExampleId>, e_minus: Vec<ExampleId>, phi_last: Property) -> Self {
        ExampleBank { e_plus, e_minus, e_minus_may: None, e_plus_may: None, phi_last }
    }

    fn push_plus(&mut self, e: ExampleId) {
        debug_assert!(!self.e_plus.contains(&e));
        debug_assert!(!self.e_minus.contains(&e));
        self.e_plus.push(e);
    }

    fn push_minus(&mut self, e: ExampleId) {
        debug_assert!(!self.e_minus.contains(&e));
        debug_assert!(!self.e_plus.contains(&e));
        self.e_minus.push(e);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Best,
    PartialTimeout,
}

/// Outcome of one whole-set synthesis run.
#[derive(Debug, Clone)]
pub struct SynthesisReport {
    pub mode: Mode,
    pub status: RunStatus,
    pub properties: Vec<Property>,
    pub stats: Stats,
    pub seed: u64,
    pub wall_millis: u64,
    pub diagnostics: Vec<String>,
}

/// One strongest consequence, incomparable to the accumulated conjunction
/// (given as a truth mask over the example domain).
///
/// Soundness failures append a positive example; precision failures park the
/// new negative example in the may-slot until the candidate that rejects it
/// is itself proven sound, at which point the example is merged for good.
/// When no candidate can reject the parked example, the property reverts to
/// the last sound one and the example is dropped.
pub fn synth_strongest_consequence(
    eng: &mut Engine,
    gctx: &mut GrammarCtx,
    conj_mask: &[bool],
    initial: Property,
    bank: &mut ExampleBank,
    in_flight: &mut Option<Property>,
) -> Result<Property, EngineError> {
    let mut candidate = initial.clone();
    bank.phi_last = initial;
    bank.e_minus_may = None;
    loop {
        eng.check_deadline()?;
        *in_flight = Some(candidate.clone());
        match eng.check_implication_over(&candidate)? {
            Some(e_pos) => {
                let n_plus = bank.e_plus.len();
                bank.push_plus(e_pos);
                debug_assert_eq!(bank.e_plus.len(), n_plus + 1, "soundness failure grows E+");
                let mut neg = bank.e_minus.clone();
                neg.extend(bank.e_minus_may);
                match eng.synthesize(gctx, &bank.e_plus, &neg)? {
                    Some(next) => candidate = next,
                    None => {
                        candidate = bank.phi_last.clone();
                        bank.e_minus_may = None;
                    }
                }
            }
            None => {
                if let Some(e) = bank.e_minus_may.take() {
                    bank.push_minus(e);
                }
                bank.phi_last = candidate.clone();
                match eng.check_strongest(gctx, &candidate, conj_mask, &bank.e_plus, &bank.e_minus)? {
                    Some(w) => {
                        bank.e_minus_may = Some(w.example);
                        candidate = w.property;
                    }
                    None => return Ok(candidate),
                }
            }
        }
    }
}

/// Dual of `synth_strongest_consequence`: the roles of positive and negative
/// examples are inverted, soundness goes through the CEGQI implication check,
/// and precision through the weakest check.
pub fn synth_weakest_implicant(
    eng: &mut Engine,
    gctx: &mut GrammarCtx,
    disj_mask: &[bool],
    initial: Property,
    bank: &mut ExampleBank,
    in_flight: &mut Option<Property>,
) -> Result<Property, EngineError> {
    let mut candidate = initial.clone();
    bank.phi_last = initial;
    bank.e_plus_may = None;
    loop {
        eng.check_deadline()?;
        *in_flight = Some(candidate.clone());
        match eng.check_implication_under(&candidate)? {
            Some(e_neg) => {
                bank.push_minus(e_neg);
                let mut pos = bank.e_plus.clone();
                pos.extend(bank.e_plus_may);
                match eng.synthesize(gctx, &pos, &bank.e_minus)? {
                    Some(next) => candidate = next,
                    None => {
                        candidate = bank.phi_last.clone();
                        bank.e_plus_may = None;
                    }
                }
            }
            None => {
                if let Some(e) = bank.e_plus_may.take() {
                    bank.push_plus(e);
                }
                bank.phi_last = candidate.clone();
                match eng.check_weakest(gctx, &candidate, disj_mask, &bank.e_plus, &bank.e_minus)? {
                    Some(w) => {
                        bank.e_plus_may = Some(w.example);
                        candidate = w.property;
                    }
                    None => return Ok(candidate),
                }
            }
        }
    }
}

fn finish(
    eng: &Engine,
    mode: Mode,
    status: RunStatus,
    properties: Vec<Property>,
    started: Instant,
    diagnostics: Vec<String>,
) -> SynthesisReport {
    SynthesisReport {
        mode,
        status,
        properties,
        stats: eng.stats.clone(),
        seed: eng.problem.config.seed,
        wall_millis: started.elapsed().as_millis() as u64,
        diagnostics,
    }
}

/// Iteratively synthesize incomparable strongest consequences until the
/// accumulated conjunction cannot be strengthened; each accepted property is
/// first re-strengthened against the full domain (mask reset to ⊤). Positive
/// examples persist across outer iterations, negative ones reset.
pub fn synth_strongest_conjunction(
    eng: &mut Engine,
    grammar: &Grammar,
) -> Result<SynthesisReport, EngineError> {
    let started = Instant::now();
    let n = eng.n_examples();
    let mut gctx = GrammarCtx::new(grammar);
    let mut mask = vec![true; n];
    let all = vec![true; n];
    let mut props: Vec<Property> = Vec::new();
    let mut e_plus: Vec<ExampleId> = Vec::new();
    let mut in_flight = None;

    let status = loop {
        let mut bank = ExampleBank::new(e_plus.clone(), Vec::new(), Property::top());
        let found = match synth_strongest_consequence(
            eng,
            &mut gctx,
            &mask,
            Property::top(),
            &mut bank,
            &mut in_flight,
        ) {
            Ok(p) => p,
            Err(EngineError::Timeout) => break RunStatus::PartialTimeout,
            Err(e) => return Err(e),
        };
        e_plus = bank.e_plus.clone();
        let mut neg = bank.e_minus.clone();
        if neg.is_empty() {
            match eng.is_sat_diff(&mask, &found)? {
                Some(e) => neg = vec![e],
                None => break RunStatus::Best,
            }
        }
        // strengthen the new property against the full domain, not just the
        // part still accepted by the accumulated conjunction
        let mut bank2 = ExampleBank::new(e_plus.clone(), neg, found.clone());
        let strengthened = match synth_strongest_consequence(
            eng,
            &mut gctx,
            &all,
            found,
            &mut bank2,
            &mut in_flight,
        ) {
            Ok(p) => p,
            Err(EngineError::Timeout) => break RunStatus::PartialTimeout,
            Err(e) => return Err(e),
        };
        e_plus = bank2.e_plus.clone();
        let v = eng.prop_vector(&strengthened)?;
        for i in 0..n {
            mask[i] &= v[i];
        }
        props.push(strengthened);
    };

    let mut props = prune_comparable(eng, props, Mode::Over)?;
    let mut diagnostics = Vec::new();
    if status == RunStatus::PartialTimeout {
        if let Some(p) = in_flight {
            diagnostics.push(format!("candidate in flight at timeout: {p}"));
        }
    } else if props.is_empty() {
        // the best conjunction is trivial; make it explicit
        props.push(Property::top());
    }
    Ok(finish(eng, Mode::Over, status, props, started, diagnostics))
}

/// Dual of `synth_strongest_conjunction`: maintains the disjunction of
/// synthesized weakest implicants, probes for a positive example it does not
/// cover yet, and re-weakens each property against the empty disjunction.
/// Negative examples persist across outer iterations, positive ones reset.
pub fn synth_weakest_disjunction(
    eng: &mut Engine,
    grammar: &Grammar,
) -> Result<SynthesisReport, EngineError> {
    let started = Instant::now();
    let n = eng.n_examples();
    let mut gctx = GrammarCtx::new(grammar);
    let mut mask = vec![false; n];
    let none = vec![false; n];
    let mut props: Vec<Property> = Vec::new();
    let mut e_minus: Vec<ExampleId> = Vec::new();
    let mut in_flight = None;

    let status = loop {
        let mut bank = ExampleBank::new(Vec::new(), e_minus.clone(), Property::bottom());
        let found = match synth_weakest_implicant(
            eng,
            &mut gctx,
            &mask,
            Property::bottom(),
            &mut bank,
            &mut in_flight,
        ) {
            Ok(p) => p,
            Err(EngineError::Timeout) => break RunStatus::PartialTimeout,
            Err(e) => return Err(e),
        };
        e_minus = bank.e_minus.clone();
        let mut pos = bank.e_plus.clone();
        if pos.is_empty() {
            match eng.first_uncovered_positive(&mask, &found) {
                Ok(Some(e)) => pos = vec![e],
                Ok(None) => break RunStatus::Best,
                Err(EngineError::Timeout) => break RunStatus::PartialTimeout,
                Err(e) => return Err(e),
            }
        }
        let mut bank2 = ExampleBank::new(pos, e_minus.clone(), found.clone());
        let weakened = match synth_weakest_implicant(
            eng,
            &mut gctx,
            &none,
            found,
            &mut bank2,
            &mut in_flight,
        ) {
            Ok(p) => p,
            Err(EngineError::Timeout) => break RunStatus::PartialTimeout,
            Err(e) => return Err(e),
        };
        e_minus = bank2.e_minus.clone();
        let v = eng.prop_vector(&weakened)?;
        for i in 0..n {
            mask[i] |= v[i];
        }
        props.push(weakened);
    };

    let mut props = prune_comparable(eng, props, Mode::Under)?;
    let mut diagnostics = Vec::new();
    if status == RunStatus::PartialTimeout {
        if let Some(p) = in_flight {
            diagnostics.push(format!("candidate in flight at timeout: {p}"));
        }
    } else if props.is_empty() {
        props.push(Property::bottom());
    }
    Ok(finish(eng, Mode::Under, status, props, started, diagnostics))
}

/// Run the whole over-mode pipeline for a problem, building the engine.
pub fn run_over(problem: &crate::model::LoudProblem) -> Result<SynthesisReport, EngineError> {
    let grammar = problem
        .grammar_over
        .clone()
        .ok_or(EngineError::Invalid("no over grammar".into()))?;
    let mut eng = Engine::new(problem)?;
    synth_strongest_conjunction(&mut eng, &grammar)
}

/// Run the whole under-mode pipeline for a problem, building the engine.
pub fn run_under(problem: &crate::model::LoudProblem) -> Result<SynthesisReport, EngineError> {
    let grammar = problem
        .grammar_under
        .clone()
        .ok_or(EngineError::Invalid("no under grammar".into()))?;
    let mut eng = Engine::new(problem)?;
    synth_weakest_disjunction(&mut eng, &grammar)
}

/// Remove any property implied by (over mode) or implying (under mode) the
/// combination of the others, checked by exhaustive example-domain scan. The
/// result is pairwise- and set-incomparable.
pub fn prune_comparable(
    eng: &mut Engine,
    props: Vec<Property>,
    mode: Mode,
) -> Result<Vec<Property>, EngineError> {
    let n = eng.n_examples();
    let mut kept = props;
    'outer: loop {
        for i in 0..kept.len() {
            let mut rest = match mode {
                Mode::Over => vec![true; n],
                Mode::Under => vec![false; n],
            };
            for (j, p) in kept.iter().enumerate() {
                if j == i {
                    continue;
                }
                let v = eng.prop_vector(p)?;
                for (slot, &b) in rest.iter_mut().zip(v.iter()) {
                    match mode {
                        Mode::Over => *slot &= b,
                        Mode::Under => *slot |= b,
                    }
                }
            }
            let vi = eng.prop_vector(&kept[i])?;
            let redundant = match mode {
                // the rest alone already imply kept[i]
                Mode::Over => rest.iter().zip(vi.iter()).all(|(&r, &v)| !r || v),
                // kept[i] already implies the rest's union
                Mode::Under => vi.iter().zip(rest.iter()).all(|(&v, &r)| !v || r),
            };
            if redundant {
                kept.remove(i);
                continue 'outer;
            }
        }
        break;
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{parse_expr_str, parse_problem};
    use crate::model::LoudProblem;

    fn prop(src: &str) -> Property {
        Property::from_expr(parse_expr_str(src).unwrap())
    }

    fn toy(query: &str, over_prods: &str, under_prods: &str) -> LoudProblem {
        let over = if over_prods.is_empty() {
            String::new()
        } else {
            format!("grammar over {{ start D; {over_prods} }}")
        };
        let under = if under_prods.is_empty() {
            String::new()
        } else {
            format!("grammar under {{ start C; {under_prods} }}")
        };
        let src = format!(
            r#"problem toy;
vars {{ int y in [-2, 2]; exist int x in [0, 2]; }}
query {{ {query}; }}
{over}
{under}
"#
        );
        parse_problem(&src).unwrap()
    }

    #[test]
    fn singleton_top_grammar_returns_top() {
        let p = toy("y == x", "D -> true;", "");
        let mut eng = Engine::new(&p).unwrap();
        let g = p.grammar_over.clone().unwrap();
        let mut gctx = GrammarCtx::new(&g);
        let mask = vec![true; eng.n_examples()];
        let mut bank = ExampleBank::new(vec![], vec![], Property::top());
        let mut diag = None;
        let phi = synth_strongest_consequence(
            &mut eng, &mut gctx, &mask, Property::top(), &mut bank, &mut diag,
        )
        .unwrap();
        assert!(phi.is_top());
    }

    #[test]
    fn singleton_bottom_grammar_returns_bottom() {
        let p = toy("y == x", "", "C -> false;");
        let mut eng = Engine::new(&p).unwrap();
        let g = p.grammar_under.clone().unwrap();
        let mut gctx = GrammarCtx::new(&g);
        let mask = vec![false; eng.n_examples()];
        let mut bank = ExampleBank::new(vec![], vec![], Property::bottom());
        let mut diag = None;
        let phi = synth_weakest_implicant(
            &mut eng, &mut gctx, &mask, Property::bottom(), &mut bank, &mut diag,
        )
        .unwrap();
        assert!(phi.is_bottom());
    }

    #[test]
    fn tautological_query_keeps_only_top() {
        // ψ ≡ true, grammar {⊤, 0 <= y} over a domain containing y < 0:
        // only ⊤ is sound, and the report makes the trivial conjunction
        // explicit as the single property ⊤
        let p = toy("true", "D -> true | 0 <= y;", "");
        let report = run_over(&p).unwrap();
        assert_eq!(report.status, RunStatus::Best);
        assert_eq!(report.properties.len(), 1);
        assert!(report.properties[0].is_top());
    }

    #[test]
    fn unsat_query_over_run_matches_oracle() {
        // first soundness check succeeds immediately; the loop must exclude
        // everything any grammar property can exclude
        let p = toy("false", "D -> disj(AP, 0..1); AP -> y == 0 | 0 < y;", "");
        let report = run_over(&p).unwrap();
        assert_eq!(report.status, RunStatus::Best);
        let g = p.grammar_over.clone().unwrap();
        let want = crate::oracle::oracle_best_semantics(&p, &g, Mode::Over).unwrap();
        let got = crate::io::combined_semantics(&p, &report.properties, Mode::Over).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn prune_comparable_drops_the_weaker_consequence() {
        // over mode: x >= 1 implies x >= 0, so x >= 0 is redundant
        let p = toy("y == x", "D -> true;", "");
        let mut eng = Engine::new(&p).unwrap();
        let kept = prune_comparable(
            &mut eng,
            vec![prop("y >= 0"), prop("y >= 1")],
            Mode::Over,
        )
        .unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].tokens, "y >= 1");
    }

    #[test]
    fn prune_comparable_drops_the_stronger_implicant() {
        let p = toy("y == x", "D -> true;", "");
        let mut eng = Engine::new(&p).unwrap();
        let kept = prune_comparable(
            &mut eng,
            vec![prop("y >= 0"), prop("y >= 1")],
            Mode::Under,
        )
        .unwrap();
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].tokens, "y >= 0");
    }

    #[test]
    fn prune_comparable_keeps_singletons_and_incomparable_sets() {
        let p = toy("y == x", "D -> true;", "");
        let mut eng = Engine::new(&p).unwrap();
        let single = prune_comparable(&mut eng, vec![prop("y >= 0")], Mode::Over).unwrap();
        assert_eq!(single.len(), 1);
        let pair = prune_comparable(
            &mut eng,
            vec![prop("y <= 1"), prop("y >= -1")],
            Mode::Over,
        )
        .unwrap();
        assert_eq!(pair.len(), 2);
    }

    #[test]
    fn fig1c_reference_set_survives_pruning() {
        let p = parse_problem(
            crate::pack::core_pack().iter().find(|(n, _)| *n == "modhash").unwrap().1,
        )
        .unwrap();
        let mut eng = Engine::new(&p).unwrap();
        let props: Vec<Property> = crate::pack::assertions::MODHASH_OVER
            .iter()
            .map(|t| prop(t))
            .collect();
        let kept = prune_comparable(&mut eng, props.clone(), Mode::Over).unwrap();
        assert_eq!(kept.len(), props.len(), "the five reference properties are incomparable");
    }

    #[test]
    fn bank_growth_is_lexicographic() {
        // every soundness failure grows E+, every merge grows E-; sizes never
        // shrink within one synthesis call
        let p = toy("y == x", "D -> disj(AP, 0..2); AP -> y <= 0 | 0 <= y | y <= 2;", "");
        let mut eng = Engine::new(&p).unwrap();
        let g = p.grammar_over.clone().unwrap();
        let mut gctx = GrammarCtx::new(&g);
        let mask = vec![true; eng.n_examples()];
        let mut bank = ExampleBank::new(vec![], vec![], Property::top());
        let mut diag = None;
        let _ = synth_strongest_consequence(
            &mut eng, &mut gctx, &mask, Property::top(), &mut bank, &mut diag,
        )
        .unwrap();
        // final banks are consistent: disjoint, and every member classified
        for &e in &bank.e_plus {
            assert!(eng.is_positive(e));
            assert!(!bank.e_minus.contains(&e));
        }
        for &e in &bank.e_minus {
            assert!(!eng.is_positive(e));
        }
    }
}
