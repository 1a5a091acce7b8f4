//! The verification/search primitives, including both
//! counterexample-guided quantifier-instantiation loops for the
//! quantifier-alternating checks.
//!
//! Where a solver-backed tool would discharge each primitive as a SAT or
//! synthesis query, everything here is a finite-domain scan with early exit;
//! domains are finite by construction, so the primitives' contracts hold
//! exactly.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;
use std::time::Instant;

use thiserror::Error;

use crate::grammar::{
    enumerate_properties, synthesize_vec, Grammar, GrammarError, Property, SynthError,
    SynthExamples, TNode,
};
use crate::lang::{
    check_expr_in, check_functions, domain_ty, eval_expr, eval_query_counted, EvalCtx, FuncTable,
    PropertyFault, Ty, TypeError,
};
use crate::model::{Example, HiddenInstance, LoudProblem, Valuation, Value};

/// Largest example or hidden domain the engine will materialize.
const MAX_DOMAIN: u64 = 2_000_000;
/// Largest example × hidden product for which query results are memoized.
const MAX_PSI_MEMO: u64 = 50_000_000;
/// Largest atom set for which example signatures are tracked.
const MAX_SIGNATURE_ATOMS: usize = 20_000;

pub type ExampleId = usize;
pub type HiddenId = usize;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("time budget exceeded")]
    Timeout,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    PropertyFault(#[from] PropertyFault),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error("domain too large: {0} values (bound {1})")]
    DomainTooLarge(u64, u64),
    #[error("{0}")]
    Invalid(String),
}

impl From<SynthError> for EngineError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Grammar(g) => EngineError::Grammar(g),
            SynthError::PropertyFault(p) => EngineError::PropertyFault(p),
        }
    }
}

/// Per-run primitive call counters and scan counts.
#[derive(Debug, Clone, Default, serde::Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct Stats {
    pub synthesize_calls: u64,
    pub check_implication_calls: u64,
    pub check_strongest_calls: u64,
    pub check_weakest_calls: u64,
    /// Hidden-variable witnesses added to CEGQI instance sets.
    pub cegqi_instances: u64,
    /// Exhaustive hidden-domain sweeps performed by CheckCandidateNegEx.
    pub full_hidden_scans: u64,
    pub cache_hits: u64,
    pub query_faults: u64,
}

/// Ordered, duplicate-free set of hidden instances reused across CEGQI calls
/// within one synthesis run.
#[derive(Debug, Clone, Default)]
pub struct HCache {
    pub instances: Vec<HiddenId>,
    pub enabled: bool,
    pub hits: u64,
    pub misses: u64,
}

impl HCache {
    fn push(&mut self, h: HiddenId) {
        if self.enabled && !self.instances.contains(&h) {
            self.instances.push(h);
        }
    }
}

/// An example the precision check pairs with the property that separates it.
#[derive(Debug, Clone)]
pub struct PrecisionWitness {
    pub example: ExampleId,
    pub property: Property,
}

/// Atom-level observational signatures for bare-macro grammars: two examples
/// with the same signature are indistinguishable by every derivable property,
/// so synthesize outcomes can be shared between them.
pub struct GrammarCtx<'g> {
    pub grammar: &'g Grammar,
    atoms: Option<Vec<crate::lang::Expr>>,
    atom_vals: HashMap<ExampleId, Rc<Vec<bool>>>,
}

impl<'g> GrammarCtx<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        GrammarCtx { grammar, atoms: None, atom_vals: HashMap::new() }
    }
}

pub struct Engine<'p> {
    pub problem: &'p LoudProblem,
    pub funcs: FuncTable,
    examples: Vec<Example>,
    hidden: Vec<HiddenInstance>,
    psi_memo: Option<Vec<u8>>,
    psi_plain: HashMap<(ExampleId, HiddenId), bool>,
    prop_vecs: HashMap<String, Rc<Vec<bool>>>,
    pub stats: Stats,
    pub cache: HCache,
    pub deadline: Option<Instant>,
    scan_order: Option<Vec<ExampleId>>,
}

impl<'p> Engine<'p> {
    pub fn new(problem: &'p LoudProblem) -> Result<Self, EngineError> {
        let funcs = FuncTable::new(&problem.functions)?;
        check_functions(&funcs)?;
        let n_ex = problem.example_domain_size();
        let n_h = problem.hidden_domain_size();
        if n_ex > MAX_DOMAIN {
            return Err(EngineError::DomainTooLarge(n_ex, MAX_DOMAIN));
        }
        if n_h > MAX_DOMAIN {
            return Err(EngineError::DomainTooLarge(n_h, MAX_DOMAIN));
        }
        let examples: Vec<Example> = problem.example_domain().collect();
        let hidden: Vec<HiddenInstance> = problem.hidden_domain().collect();
        let psi_memo = if n_ex.saturating_mul(n_h) <= MAX_PSI_MEMO {
            Some(vec![0u8; (n_ex * n_h) as usize])
        } else {
            None
        };
        let cfg = &problem.config;
        let deadline = if cfg.timeout_millis > 0 {
            Some(Instant::now() + std::time::Duration::from_millis(cfg.timeout_millis))
        } else {
            None
        };
        let scan_order = if cfg.deterministic {
            None
        } else {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut order: Vec<ExampleId> = (0..examples.len()).collect();
            order.shuffle(&mut rng);
            Some(order)
        };
        let engine = Engine {
            problem,
            funcs,
            examples,
            hidden,
            psi_memo,
            psi_plain: HashMap::new(),
            prop_vecs: HashMap::new(),
            stats: Stats::default(),
            cache: HCache { enabled: cfg.h_cache_enabled, ..Default::default() },
            deadline,
            scan_order,
        };
        engine.validate_query()?;
        Ok(engine)
    }

    fn validate_query(&self) -> Result<(), EngineError> {
        let mut vars = HashMap::new();
        for v in &self.problem.vars {
            vars.insert(v.name.clone(), domain_ty(&v.domain));
        }
        let ty = check_expr_in(&self.problem.query, &vars, &self.funcs)?;
        if ty != Ty::Bool {
            return Err(EngineError::Invalid(format!("query has type {ty}, expected bool")));
        }
        Ok(())
    }

    pub fn eval_ctx(&self) -> EvalCtx<'_> {
        EvalCtx::new(&self.funcs, &self.problem.config)
    }

    pub fn n_examples(&self) -> usize {
        self.examples.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden.len()
    }

    pub fn example(&self, e: ExampleId) -> &Example {
        &self.examples[e]
    }

    pub fn hidden_instance(&self, h: HiddenId) -> &HiddenInstance {
        &self.hidden[h]
    }

    pub fn check_deadline(&self) -> Result<(), EngineError> {
        match self.deadline {
            Some(d) if Instant::now() >= d => Err(EngineError::Timeout),
            _ => Ok(()),
        }
    }

    /// psi(e, h), memoized.
    pub fn psi(&mut self, e: ExampleId, h: HiddenId) -> bool {
        if let Some(memo) = &self.psi_memo {
            let idx = e * self.hidden.len() + h;
            match memo[idx] {
                1 => return false,
                2 => return true,
                _ => {}
            }
        } else if let Some(&b) = self.psi_plain.get(&(e, h)) {
            return b;
        }
        let ctx = EvalCtx::new(&self.funcs, &self.problem.config);
        let mut faults = 0;
        let b = eval_query_counted(
            &self.problem.query,
            &self.examples[e].bindings,
            &self.hidden[h].bindings,
            &ctx,
            &mut faults,
        );
        self.stats.query_faults += faults;
        if let Some(memo) = &mut self.psi_memo {
            memo[e * self.hidden.len() + h] = if b { 2 } else { 1 };
        } else {
            self.psi_plain.insert((e, h), b);
        }
        b
    }

    /// Evaluate a property on one example; faults are hard errors.
    pub fn prop_on(&self, prop: &Property, e: ExampleId) -> Result<bool, EngineError> {
        let ctx = self.eval_ctx();
        crate::lang::eval_property_expr(&prop.ast, &self.examples[e].bindings, &ctx)
            .map_err(EngineError::from)
    }

    /// The property's truth vector over the whole example domain, memoized by
    /// its printed form.
    pub fn prop_vector(&mut self, prop: &Property) -> Result<Rc<Vec<bool>>, EngineError> {
        if let Some(v) = self.prop_vecs.get(&prop.tokens) {
            return Ok(v.clone());
        }
        let ctx = EvalCtx::new(&self.funcs, &self.problem.config);
        let mut vec = Vec::with_capacity(self.examples.len());
        for e in &self.examples {
            vec.push(
                crate::lang::eval_property_expr(&prop.ast, &e.bindings, &ctx)
                    .map_err(EngineError::from)?,
            );
        }
        let rc = Rc::new(vec);
        self.prop_vecs.insert(prop.tokens.clone(), rc.clone());
        Ok(rc)
    }

    fn scan_ids(&self) -> Vec<ExampleId> {
        match &self.scan_order {
            Some(order) => order.clone(),
            None => (0..self.examples.len()).collect(),
        }
    }

    /// CheckCandidateNegEx: TOP (None) iff psi(e, h) fails for every h in the
    /// hidden domain; otherwise a witness h. With the cache enabled, cached
    /// instances are probed before the full scan and fresh witnesses are
    /// appended.
    pub fn check_candidate_neg_ex(&mut self, e: ExampleId) -> Option<HiddenId> {
        if self.cache.enabled {
            for i in 0..self.cache.instances.len() {
                let h = self.cache.instances[i];
                if self.psi(e, h) {
                    self.cache.hits += 1;
                    self.stats.cache_hits += 1;
                    return Some(h);
                }
            }
            self.cache.misses += 1;
        }
        self.stats.full_hidden_scans += 1;
        for h in 0..self.hidden.len() {
            if self.psi(e, h) {
                self.cache.push(h);
                return Some(h);
            }
        }
        None
    }

    /// Positive iff some hidden instance satisfies the query at `e`.
    pub fn is_positive(&mut self, e: ExampleId) -> bool {
        self.check_candidate_neg_ex(e).is_some()
    }

    /// CheckImplication(Ψ, φ): None (TOP) iff every positive example is
    /// accepted; otherwise the first positive example rejected by φ. A single
    /// existential scan over (e, h) pairs with early exit; no quantifier
    /// alternation arises.
    pub fn check_implication_over(
        &mut self,
        prop: &Property,
    ) -> Result<Option<ExampleId>, EngineError> {
        self.stats.check_implication_calls += 1;
        let vec = self.prop_vector(prop)?;
        if self.problem.config.threads > 1 {
            return self.check_implication_over_parallel(&vec);
        }
        for e in 0..self.examples.len() {
            if e % 1024 == 0 {
                self.check_deadline()?;
            }
            if vec[e] {
                continue;
            }
            if self.is_positive(e) {
                return Ok(Some(e));
            }
        }
        Ok(None)
    }

    /// Chunked scan over worker threads; reports the minimal-index hit so the
    /// observable result equals the sequential scan.
    fn check_implication_over_parallel(
        &mut self,
        vec: &[bool],
    ) -> Result<Option<ExampleId>, EngineError> {
        let rejected: Vec<ExampleId> =
            (0..self.examples.len()).filter(|&e| !vec[e]).collect();
        let threads = self.problem.config.threads.max(1);
        let chunk = rejected.len().div_ceil(threads).max(1);
        let cached: Vec<HiddenId> = if self.cache.enabled {
            self.cache.instances.clone()
        } else {
            Vec::new()
        };
        let funcs = &self.funcs;
        let problem = self.problem;
        let examples = &self.examples;
        let hidden = &self.hidden;
        type ChunkResult = (Option<(ExampleId, HiddenId)>, u64);
        let results: Vec<ChunkResult> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for part in rejected.chunks(chunk) {
                let cached = cached.clone();
                handles.push(scope.spawn(move || {
                    let ctx = EvalCtx::new(funcs, &problem.config);
                    let mut scans = 0u64;
                    for &e in part {
                        let probe = |h: HiddenId, faults: &mut u64| {
                            eval_query_counted(
                                &problem.query,
                                &examples[e].bindings,
                                &hidden[h].bindings,
                                &ctx,
                                faults,
                            )
                        };
                        let mut faults = 0u64;
                        if let Some(&h) = cached.iter().find(|&&h| probe(h, &mut faults)) {
                            return (Some((e, h)), scans);
                        }
                        scans += 1;
                        for h in 0..hidden.len() {
                            if probe(h, &mut faults) {
                                return (Some((e, h)), scans);
                            }
                        }
                    }
                    (None, scans)
                }));
            }
            handles.into_iter().map(|h| h.join().expect("scan worker panicked")).collect()
        });
        // first chunk with a hit holds the minimal index (chunks are ordered
        // by example index); scan counts accumulate from every chunk
        let mut first_hit = None;
        for (hit, scans) in results {
            self.stats.full_hidden_scans += scans;
            if first_hit.is_none() {
                first_hit = hit;
            }
        }
        if let Some((e, h)) = first_hit {
            self.cache.push(h);
            return Ok(Some(e));
        }
        Ok(None)
    }

    /// GenCandidateNegEx: first example accepted by the property vector and
    /// consistent with every instance in `h_set`.
    pub fn gen_candidate_neg_ex(
        &mut self,
        accept: &[bool],
        h_set: &[HiddenId],
    ) -> Result<Option<ExampleId>, EngineError> {
        let ids = self.scan_ids();
        for (i, &e) in ids.iter().enumerate() {
            if i % 1024 == 0 {
                self.check_deadline()?;
            }
            if !accept[e] {
                continue;
            }
            if h_set.iter().all(|&h| !self.psi(e, h)) {
                return Ok(Some(e));
            }
        }
        Ok(None)
    }

    /// CheckImplication(φ, Ψ) by CEGQI: None (TOP) iff φ implies the query;
    /// otherwise an example accepted by φ with no hidden witness, verified by
    /// a full scan. The local instance set is seeded from the shared cache.
    pub fn check_implication_under(
        &mut self,
        prop: &Property,
    ) -> Result<Option<ExampleId>, EngineError> {
        self.stats.check_implication_calls += 1;
        let vec = self.prop_vector(prop)?;
        let mut h_set: Vec<HiddenId> =
            if self.cache.enabled { self.cache.instances.clone() } else { Vec::new() };
        loop {
            self.check_deadline()?;
            let e = match self.gen_candidate_neg_ex(&vec, &h_set)? {
                Some(e) => e,
                None => return Ok(None),
            };
            match self.check_candidate_neg_ex(e) {
                None => return Ok(Some(e)),
                Some(h) => {
                    debug_assert!(!h_set.contains(&h));
                    h_set.push(h);
                    self.stats.cegqi_instances += 1;
                    debug_assert!(h_set.len() <= self.hidden.len());
                }
            }
        }
    }

    /// Synthesize: the canonically first grammar property accepting every
    /// example in `pos` and rejecting every example in `neg`, or None.
    pub fn synthesize(
        &mut self,
        gctx: &GrammarCtx,
        pos: &[ExampleId],
        neg: &[ExampleId],
    ) -> Result<Option<Property>, EngineError> {
        self.stats.synthesize_calls += 1;
        let envs: Vec<&Valuation> = pos
            .iter()
            .chain(neg.iter())
            .map(|&i| &self.examples[i].bindings)
            .collect();
        let ex = SynthExamples { envs, n_pos: pos.len() };
        let ctx = EvalCtx::new(&self.funcs, &self.problem.config);
        synthesize_vec(gctx.grammar, &ex, &ctx).map_err(EngineError::from)
    }

    /// The example's truth assignment over the grammar's atom set, usable as
    /// an observational-equivalence key. None when the grammar is not
    /// bare-macro-rooted or its atom set is too large.
    fn signature(
        &mut self,
        gctx: &mut GrammarCtx,
        e: ExampleId,
    ) -> Result<Option<Rc<Vec<bool>>>, EngineError> {
        if gctx.atoms.is_none() {
            let g = gctx.grammar;
            let all_macro = g
                .productions(&g.start)
                .map(|ps| {
                    !ps.is_empty() && ps.iter().all(|p| matches!(p, TNode::Macro(_, _, _, _)))
                })
                .unwrap_or(false);
            let atoms = if all_macro {
                let mut child = g.clone();
                let mut names: Vec<String> = Vec::new();
                for p in g.productions(&g.start).unwrap() {
                    if let TNode::Macro(_, n, _, _) = p {
                        names.push(n.clone());
                    }
                }
                names.sort();
                names.dedup();
                let mut atom_exprs = Vec::new();
                let mut ok = true;
                for n in names {
                    child.start = n;
                    child.depth_bound = g.depth_bound.saturating_sub(1);
                    match enumerate_properties(&child, MAX_SIGNATURE_ATOMS as u64) {
                        Ok(props) => atom_exprs.extend(props.into_iter().map(|p| p.ast)),
                        Err(_) => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok && atom_exprs.len() <= MAX_SIGNATURE_ATOMS {
                    atom_exprs
                } else {
                    Vec::new()
                }
            } else {
                Vec::new()
            };
            gctx.atoms = Some(atoms);
        }
        let atoms = gctx.atoms.as_ref().unwrap();
        if atoms.is_empty() {
            return Ok(None);
        }
        if let Some(v) = gctx.atom_vals.get(&e) {
            return Ok(Some(v.clone()));
        }
        let ctx = EvalCtx::new(&self.funcs, &self.problem.config);
        let env = &self.examples[e].bindings;
        let mut bits = Vec::with_capacity(atoms.len());
        for a in atoms {
            match eval_expr(a, env, &ctx) {
                Ok(Value::Bool(b)) => bits.push(b),
                // non-boolean or faulting atoms void the signature scheme
                _ => return Ok(None),
            }
        }
        let rc = Rc::new(bits);
        gctx.atom_vals.insert(e, rc.clone());
        Ok(Some(rc))
    }

    /// GenCandidateSpecNegEx: first (canonical) pair of an example and a
    /// property with the example inside the accumulated conjunction and the
    /// current property, consistent with the instance set, such that the
    /// returned property accepts all positives, rejects all negatives, and
    /// rejects the example.
    /// `failed_sigs` carries atom-signatures whose synthesize call already
    /// failed for these example sets; the caller keeps it across instance-set
    /// growth so NONE-proofs are not repeated.
    #[allow(clippy::too_many_arguments)]
    pub fn gen_candidate_spec_neg_ex(
        &mut self,
        gctx: &mut GrammarCtx,
        prop_vec: &[bool],
        conj_mask: &[bool],
        pos: &[ExampleId],
        neg: &[ExampleId],
        h_set: &[HiddenId],
        failed_sigs: &mut HashSet<Rc<Vec<bool>>>,
    ) -> Result<Option<(ExampleId, Property)>, EngineError> {
        let ids = self.scan_ids();
        let mut neg_plus = Vec::with_capacity(neg.len() + 1);
        neg_plus.extend_from_slice(neg);
        for (i, &e) in ids.iter().enumerate() {
            if i % 256 == 0 {
                self.check_deadline()?;
            }
            if !conj_mask[e] || !prop_vec[e] || pos.contains(&e) || neg.contains(&e) {
                continue;
            }
            if !h_set.iter().all(|&h| !self.psi(e, h)) {
                continue;
            }
            let sig = self.signature(gctx, e)?;
            if let Some(s) = &sig {
                if failed_sigs.contains(s) {
                    continue;
                }
            }
            neg_plus.truncate(neg.len());
            neg_plus.push(e);
            match self.synthesize(gctx, pos, &neg_plus)? {
                Some(p) => return Ok(Some((e, p))),
                None => {
                    if let Some(s) = sig {
                        failed_sigs.insert(s);
                    }
                }
            }
        }
        Ok(None)
    }

    /// CheckStrongest by CEGQI: None (TOP) iff no strictly-stronger candidate
    /// consistent with the examples rejects one more negative example inside
    /// the accumulated conjunction; otherwise that example and property.
    pub fn check_strongest(
        &mut self,
        gctx: &mut GrammarCtx,
        prop: &Property,
        conj_mask: &[bool],
        pos: &[ExampleId],
        neg: &[ExampleId],
    ) -> Result<Option<PrecisionWitness>, EngineError> {
        self.stats.check_strongest_calls += 1;
        let vec = self.prop_vector(prop)?;
        let mut h_set: Vec<HiddenId> =
            if self.cache.enabled { self.cache.instances.clone() } else { Vec::new() };
        let mut failed_sigs = HashSet::new();
        loop {
            self.check_deadline()?;
            let (e, cand) = match self.gen_candidate_spec_neg_ex(
                gctx,
                &vec,
                conj_mask,
                pos,
                neg,
                &h_set,
                &mut failed_sigs,
            )? {
                Some(pair) => pair,
                None => return Ok(None),
            };
            match self.check_candidate_neg_ex(e) {
                None => return Ok(Some(PrecisionWitness { example: e, property: cand })),
                Some(h) => {
                    debug_assert!(!h_set.contains(&h));
                    h_set.push(h);
                    self.stats.cegqi_instances += 1;
                }
            }
        }
    }

    /// CheckWeakest: None (TOP) iff no candidate consistent with the examples
    /// accepts one more positive example outside the accumulated disjunction;
    /// otherwise that example and property. The query occurs positively, so
    /// this is a single existential scan with no quantifier alternation.
    pub fn check_weakest(
        &mut self,
        gctx: &mut GrammarCtx,
        prop: &Property,
        disj_mask: &[bool],
        pos: &[ExampleId],
        neg: &[ExampleId],
    ) -> Result<Option<PrecisionWitness>, EngineError> {
        self.stats.check_weakest_calls += 1;
        let vec = self.prop_vector(prop)?;
        let ids = self.scan_ids();
        let mut failed_sigs: HashSet<Rc<Vec<bool>>> = HashSet::new();
        let mut pos_plus = Vec::with_capacity(pos.len() + 1);
        pos_plus.extend_from_slice(pos);
        for (i, &e) in ids.iter().enumerate() {
            if i % 256 == 0 {
                self.check_deadline()?;
            }
            if disj_mask[e] || vec[e] || pos.contains(&e) || neg.contains(&e) {
                continue;
            }
            if !self.is_positive(e) {
                continue;
            }
            let sig = self.signature(gctx, e)?;
            if let Some(s) = &sig {
                if failed_sigs.contains(s) {
                    continue;
                }
            }
            pos_plus.truncate(pos.len());
            pos_plus.push(e);
            match self.synthesize(gctx, &pos_plus, neg)? {
                Some(p) => return Ok(Some(PrecisionWitness { example: e, property: p })),
                None => {
                    if let Some(s) = sig {
                        failed_sigs.insert(s);
                    }
                }
            }
        }
        Ok(None)
    }

    /// IsSat(mask ∧ ¬φ): first example inside the mask rejected by the
    /// property, or None when the mask's set is contained in the property's.
    pub fn is_sat_diff(
        &mut self,
        mask: &[bool],
        prop: &Property,
    ) -> Result<Option<ExampleId>, EngineError> {
        let vec = self.prop_vector(prop)?;
        Ok((0..self.examples.len()).find(|&e| mask[e] && !vec[e]))
    }

    /// First positive example outside the disjunction mask accepted by the
    /// property (the weakening probe of the outer under-approximation loop).
    pub fn first_uncovered_positive(
        &mut self,
        mask: &[bool],
        prop: &Property,
    ) -> Result<Option<ExampleId>, EngineError> {
        let vec = self.prop_vector(prop)?;
        for e in 0..self.examples.len() {
            if e % 1024 == 0 {
                self.check_deadline()?;
            }
            if !mask[e] && vec[e] && self.is_positive(e) {
                return Ok(Some(e));
            }
        }
        Ok(None)
    }
}
