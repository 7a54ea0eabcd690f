//! The two-layer dialogue manager.
//!
//! Upper-layer states are tried in a fixed order each turn. An active
//! lower-layer sub-dialogue gets the first look at the utterance.

pub mod context;
pub mod informative;
pub mod template;

use std::cell::Cell;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use context::{DialogueContext, FieldBinding, LowerState, UpperState};
pub use informative::{expected_residual, select_informative_field};
pub use template::{InteractionTemplate, Record, SlotValue, TemplateAct};

use context::{AmbiguityKind, AmbiguityReport, BindingStatus, PendingAction, RelaxOffer};
use crate::interactor::help_text;
use crate::nlu::acts::Act;
use crate::nlu::extract::ExtractionResult;
use crate::nlu::merge::{merge, AppliedCorrection, MergeError};
use crate::query::{compile_constraints, QueryConstraint, QueryError, QueryResultSet, Querier, BASE_WINDOW};
use crate::schema::{DomainPack, Relation};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogConfig {
    /// Largest match count still enumerated to the user.
    pub few_threshold: usize,
}

impl Default for DialogConfig {
    fn default() -> Self {
        DialogConfig { few_threshold: 5 }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DialogError {
    #[error("querier unavailable: {0}")]
    QuerierUnavailable(String),
}

impl From<QueryError> for DialogError {
    fn from(e: QueryError) -> Self {
        DialogError::QuerierUnavailable(e.to_string())
    }
}

/// What the manager found this turn, before wording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum Finding {
    Greet,
    Goodbye,
    Help { state: String, expected_field: Option<String> },
    MetaAnswer { topic: String },
    OutOfScope { term: String, explanation: String },
    UnknownWord { word: String },
    Repeat { last: Option<InteractionTemplate> },
    NoNewInfo { cause: String, field: Option<String> },
    Clarify { report: AmbiguityReport },
    Inconsistent { rule: String },
    Correction { field: Option<String>, old: Option<Value>, new: Value, unmatched: bool, next_field: Option<String> },
    AskField { field: String, count: Option<usize> },
    AskQueryType { count: usize },
    Report { item: Record, query_type: String },
    Enumerate { rows: Vec<Record>, count: usize },
    Confirm { field: String },
    Relax { offer: RelaxOffer },
    Verify { action: String, retry: bool },
    SideEffect { stage: String, action: String, item: Record },
    NoMatch,
    Trouble { detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDecision {
    pub state: UpperState,
    pub sub_state: Option<LowerState>,
    /// Diagnostic tag such as `status_quo:dont_know`.
    pub cause: String,
    pub finding: Finding,
    pub template: InteractionTemplate,
    /// A classification query was issued this turn.
    pub queried: bool,
    pub match_count: Option<usize>,
    pub classification_queries: u32,
    /// Extra queries: relaxation probes and full-row fetches.
    pub probe_queries: u32,
    /// The turn continued a sub-dialogue without re-classifying.
    pub continuation: bool,
}

struct Counting<'a> {
    inner: &'a dyn Querier,
    classify: Cell<u32>,
    probe: Cell<u32>,
}

impl Counting<'_> {
    fn classify(&self, c: &[QueryConstraint]) -> Result<QueryResultSet, DialogError> {
        self.classify.set(self.classify.get() + 1);
        Ok(self.inner.execute(c)?)
    }

    fn probe(&self, c: &[QueryConstraint]) -> Result<QueryResultSet, DialogError> {
        self.probe.set(self.probe.get() + 1);
        Ok(self.inner.execute(c)?)
    }

    fn probe_all(&self, c: &[QueryConstraint]) -> Option<Result<QueryResultSet, DialogError>> {
        if !self.inner.row_access() {
            return None;
        }
        self.probe.set(self.probe.get() + 1);
        self.inner.all_rows(c).map(|r| r.map_err(DialogError::from))
    }
}

struct Turn {
    state: UpperState,
    sub_state: Option<LowerState>,
    cause: String,
    finding: Finding,
    match_count: Option<usize>,
    continuation: bool,
    /// The dialogue returns to INITIAL after this turn.
    resets: bool,
}

impl Turn {
    fn new(state: UpperState, cause: impl Into<String>, finding: Finding) -> Self {
        Turn {
            state,
            sub_state: None,
            cause: cause.into(),
            finding,
            match_count: None,
            continuation: false,
            resets: false,
        }
    }

    fn resting(mut self) -> Self {
        self.resets = true;
        self
    }

    fn sub(mut self, s: LowerState) -> Self {
        self.sub_state = Some(s);
        self
    }

    fn count(mut self, n: usize) -> Self {
        self.match_count = Some(n);
        self
    }

    fn continuing(mut self) -> Self {
        self.continuation = true;
        self
    }
}

enum Step {
    Handled(Turn),
    /// Let the upper layer decide; the sub-dialogue survives only a
    /// help, meta or status-quo turn.
    Defer,
    /// Re-run the query step with the updated context.
    ToQuery,
}

/// The greeting template for a fresh dialogue.
pub fn greeting(pack: &DomainPack) -> InteractionTemplate {
    build_template(&Finding::Greet, &DialogueContext::default(), pack)
}

/// Classify one turn. `context.turn_index` should already be advanced
/// for this utterance.
pub fn decide_state(
    context: &DialogueContext,
    extraction: &ExtractionResult,
    pack: &DomainPack,
    querier: &dyn Querier,
    cfg: &DialogConfig,
) -> Result<(StateDecision, DialogueContext), DialogError> {
    let q = Counting {
        inner: querier,
        classify: Cell::new(0),
        probe: Cell::new(0),
    };
    let mut ctx = context.clone();
    let prev_state = context.upper_state;
    let prev_sub = context.sub_state;

    // A query type carried over from a success lives for one more turn.
    let carried = match ctx.query_type_ttl {
        Some(0) => {
            ctx.query_type = None;
            ctx.query_type_ttl = None;
            ctx.last_success = None;
            false
        }
        Some(n) => {
            ctx.query_type_ttl = Some(n - 1);
            true
        }
        None => false,
    };

    let mut turn = None;
    let mut deferred = false;
    if ctx.sub_state.is_some() {
        match step_subdialogue(&mut ctx, extraction, pack, &q, cfg)? {
            Step::Handled(t) => turn = Some(t),
            Step::ToQuery => turn = Some(query_step(&mut ctx, pack, &q, cfg)?),
            Step::Defer => deferred = true,
        }
    }
    let turn = match turn {
        Some(t) => t,
        None => upper_layer(&mut ctx, extraction, pack, &q, cfg, prev_state, carried)?,
    };
    if deferred && turn.sub_state.is_none() {
        // The upper layer took over; the interrupted sub-dialogue ends.
        ctx.sub_state = None;
    }

    // Help, meta and status-quo turns leave the dialogue where it was.
    if matches!(turn.state, UpperState::MetaQuery | UpperState::StatusQuo) {
        ctx.upper_state = prev_state;
        ctx.sub_state = prev_sub;
    } else {
        if ctx.sub_state.is_none() {
            ctx.clear_subdialogue();
        }
        ctx.upper_state = match ctx.sub_state {
            Some(sub) => sub.owner(),
            None if turn.resets => UpperState::Initial,
            None => turn.state,
        };
    }

    let template = build_template(&turn.finding, &ctx, pack);
    ctx.last_template = Some(template.clone());
    let classification_queries = q.classify.get();
    let decision = StateDecision {
        state: turn.state,
        sub_state: turn.sub_state,
        cause: turn.cause,
        finding: turn.finding,
        template,
        queried: classification_queries > 0,
        match_count: turn.match_count,
        classification_queries,
        probe_queries: q.probe.get(),
        continuation: turn.continuation,
    };
    Ok((decision, ctx))
}

fn upper_layer(
    ctx: &mut DialogueContext,
    x: &ExtractionResult,
    pack: &DomainPack,
    q: &Counting<'_>,
    cfg: &DialogConfig,
    prev_state: UpperState,
    carried: bool,
) -> Result<Turn, DialogError> {
    let acts = &x.acts;

    if acts.quit() {
        ctx.reset_query();
        ctx.query_type = None;
        ctx.query_type_ttl = None;
        ctx.last_success = None;
        return Ok(Turn::new(UpperState::Quit, "quit", Finding::Goodbye));
    }

    if acts.help() {
        let state = ctx
            .sub_state
            .map(|s| s.name().to_string())
            .unwrap_or_else(|| prev_state.name().to_string());
        return Ok(Turn::new(
            UpperState::MetaQuery,
            "meta_query:help",
            Finding::Help {
                state,
                expected_field: ctx.expected_field.clone(),
            },
        ));
    }
    if let Some(topic) = acts.meta_topic() {
        return Ok(Turn::new(
            UpperState::MetaQuery,
            "meta_query:topic",
            Finding::MetaAnswer { topic: topic.to_string() },
        ));
    }

    if let Some((term, explanation)) = x.out_of_scope_hits.first() {
        ctx.reset_query();
        return Ok(Turn::new(
            UpperState::OutOfBounds,
            "out_of_bounds:out_of_scope",
            Finding::OutOfScope {
                term: term.clone(),
                explanation: explanation.clone(),
            },
        ));
    }
    if let Some(word) = x.unknown_terms.first() {
        return Ok(Turn::new(
            UpperState::OutOfBounds,
            "out_of_bounds:unknown_word",
            Finding::UnknownWord { word: word.clone() },
        ));
    }

    // Merge; an unplaceable correction is reported, not guessed.
    let mut unmatched = None;
    let outcome = match merge(ctx, x, pack) {
        Ok(o) => o,
        Err(MergeError::CorrectionTargetNotFound) => {
            let c = acts.correction().cloned();
            unmatched = c.as_ref().map(|c| (c.old_value.clone(), c.new_value.clone()));
            let mut stripped = x.clone();
            stripped.acts.acts.retain(|a| !matches!(a, Act::Correction(_)));
            merge(ctx, &stripped, pack).expect("merge without a correction cannot fail")
        }
    };
    let mut next = outcome.context;
    let mut changed = !outcome.changed.is_empty();

    // "when does it leave?" right after a success asks about the same item.
    if !changed && carried && x.query_type.is_some() && x.bindings.is_empty() && outcome.unresolved.is_empty() {
        if let (Some(item), Some(key)) = (ctx.last_success.clone(), pack.schema.key_field.clone()) {
            if let (Some(raw), Some(spec)) = (item.get(&key), pack.schema.field(&key)) {
                let class = spec.semantic_class.clone();
                let value = match raw.parse::<i64>() {
                    Ok(n) => Value::Number(n),
                    Err(_) => Value::text(raw.clone()),
                };
                next.bind(&key, &class, value);
                changed = true;
            }
        }
    }
    if changed && carried {
        // A new query keeps the carried query type.
        next.query_type_ttl = None;
    }

    let action_turn = x.action_request.is_some() && next.last_success.is_some();
    let info = changed
        || outcome.query_type_changed
        || outcome.correction.is_some()
        || unmatched.is_some()
        || !outcome.unresolved.is_empty()
        || outcome.clarified
        || action_turn
        || (acts.affirm() && prev_state == UpperState::Correction);
    *ctx = next;

    if !info {
        return Ok(status_quo(ctx, x, pack));
    }

    let mut unresolved = outcome.unresolved;
    unresolved.sort_by_key(|a| a.kind);
    if let Some(report) = unresolved.into_iter().next() {
        let cause = format!(
            "ambiguous:{}",
            match report.kind {
                AmbiguityKind::Lexical => "lexical",
                AmbiguityKind::Class => "class",
                AmbiguityKind::Field => "field",
            }
        );
        ctx.pending_ambiguity = Some(report.clone());
        return Ok(Turn::new(UpperState::Ambiguous, cause, Finding::Clarify { report }));
    }

    if let Some(rule) = violated_rule(ctx, pack) {
        let r = pack.schema.consistency_rules.iter().find(|r| r.id == rule).expect("rule exists");
        ctx.flagged_fields = vec![r.left_field.clone(), r.right_field.clone()];
        return Ok(Turn::new(UpperState::Inconsistent, "inconsistent", Finding::Inconsistent { rule }));
    }
    ctx.flagged_fields.clear();

    if outcome.correction.is_some() || unmatched.is_some() {
        let next_field = next_mandatory_field(ctx, pack);
        ctx.expected_field = next_field.clone();
        let finding = match (&outcome.correction, &unmatched) {
            (Some(AppliedCorrection { field, old, new }), _) => Finding::Correction {
                field: Some(field.clone()),
                old: old.clone(),
                new: new.clone(),
                unmatched: false,
                next_field,
            },
            (None, Some((old, new))) => Finding::Correction {
                field: None,
                old: old.clone(),
                new: new.clone(),
                unmatched: true,
                next_field,
            },
            (None, None) => unreachable!(),
        };
        let cause = if unmatched.is_some() { "correction:unmatched" } else { "correction" };
        return Ok(Turn::new(UpperState::Correction, cause, finding));
    }

    if action_turn {
        let name = x.action_request.clone().expect("checked above");
        ctx.pending_action = Some(PendingAction {
            action: name.clone(),
            item: ctx.last_success.clone().unwrap_or_default(),
            attempts: 0,
        });
        ctx.sub_state = Some(LowerState::VerifyUser);
        return Ok(Turn::new(UpperState::Success, "success:action", Finding::Verify { action: name, retry: false })
            .sub(LowerState::VerifyUser)
            .continuing());
    }

    if let Some(field) = next_mandatory_field(ctx, pack) {
        ctx.expected_field = Some(field.clone());
        return Ok(Turn::new(UpperState::MandatoryFields, "mandatory_fields", Finding::AskField { field, count: None }));
    }

    query_step(ctx, pack, q, cfg)
}

fn status_quo(ctx: &mut DialogueContext, x: &ExtractionResult, pack: &DomainPack) -> Turn {
    let acts = &x.acts;
    if acts.silence {
        return Turn::new(
            UpperState::StatusQuo,
            "status_quo:silence",
            Finding::NoNewInfo {
                cause: "silence".into(),
                field: ctx.expected_field.clone(),
            },
        );
    }
    if acts.repeat() {
        return Turn::new(
            UpperState::StatusQuo,
            "status_quo:repeat",
            Finding::Repeat {
                last: ctx.last_template.clone(),
            },
        );
    }
    if acts.dont_know() {
        if let Some(f) = ctx.expected_field.take() {
            if !ctx.declined_fields.contains(&f) {
                ctx.declined_fields.push(f);
            }
        }
        let field = next_mandatory_field(ctx, pack);
        ctx.expected_field = field.clone();
        return Turn::new(
            UpperState::StatusQuo,
            "status_quo:dont_know",
            Finding::NoNewInfo {
                cause: "dont_know".into(),
                field,
            },
        );
    }
    Turn::new(
        UpperState::StatusQuo,
        "status_quo:no_new_info",
        Finding::NoNewInfo {
            cause: "no_new_info".into(),
            field: ctx.expected_field.clone(),
        },
    )
}

/// First consistency rule the bindings violate, in file order.
pub fn violated_rule(ctx: &DialogueContext, pack: &DomainPack) -> Option<String> {
    pack.schema.consistency_rules.iter().find_map(|r| {
        let (a, b) = (ctx.binding(&r.left_field)?, ctx.binding(&r.right_field)?);
        let violated = match r.relation {
            Relation::NotEqual => a.value.same_as(&b.value),
            Relation::LessThan => a.value >= b.value,
            Relation::GreaterThan => a.value <= b.value,
        };
        violated.then(|| r.id.clone())
    })
}

/// Whether some mandatory set is fully bound.
pub fn mandatory_satisfied(ctx: &DialogueContext, pack: &DomainPack) -> bool {
    pack.schema
        .mandatory_sets
        .iter()
        .any(|set| !set.is_empty() && set.iter().all(|f| ctx.is_bound(f)))
}

/// First missing field of the mandatory set the user has said most
/// about (then the one with fewest gaps, then declaration order), or
/// `None` when a set is complete. Sets holding a declined field are
/// skipped while another set remains.
pub fn next_mandatory_field(ctx: &DialogueContext, pack: &DomainPack) -> Option<String> {
    if mandatory_satisfied(ctx, pack) {
        return None;
    }
    let sets: Vec<&Vec<String>> = pack.schema.mandatory_sets.iter().filter(|s| !s.is_empty()).collect();
    let open: Vec<&Vec<String>> = sets
        .iter()
        .copied()
        .filter(|s| !s.iter().any(|f| ctx.declined_fields.contains(f)))
        .collect();
    let pool = if open.is_empty() { sets } else { open };
    pool.into_iter()
        .min_by_key(|s| {
            let missing = s.iter().filter(|f| !ctx.is_bound(f)).count();
            (std::cmp::Reverse(s.len() - missing), missing)
        })
        .and_then(|s| s.iter().find(|f| !ctx.is_bound(f)).cloned())
}

/// Issue the classification query and pick a post-query state.
fn query_step(
    ctx: &mut DialogueContext,
    pack: &DomainPack,
    q: &Counting<'_>,
    cfg: &DialogConfig,
) -> Result<Turn, DialogError> {
    let constraints = compile_constraints(ctx, pack)?;
    let result = q.classify(&constraints)?;
    let count = result.count;
    ctx.candidate_rows_count = Some(count);
    tracing::debug!(count, constraints = constraints.len(), "classification query");

    if count == 1 && ctx.query_type.is_some() {
        let item = row_record(&result, 0, pack);
        let qt = ctx.query_type.clone().expect("checked");
        ctx.reset_query();
        ctx.query_type_ttl = Some(1);
        ctx.last_success = Some(item.clone());
        return Ok(Turn::new(UpperState::Success, "success", Finding::Report { item, query_type: qt })
            .count(1)
            .resting());
    }

    if count == 0 {
        return Ok(database_conflict(ctx, pack, q)?.count(0));
    }

    if ctx.query_type.is_none() {
        ctx.expected_field = None;
        return Ok(Turn::new(UpperState::UnknownQuery, "unknown_query", Finding::AskQueryType { count }).count(count));
    }

    if count <= cfg.few_threshold {
        return Ok(enumerate(ctx, &result, pack, UpperState::FewMatches, "few_matches", cfg.few_threshold).count(count));
    }

    // Many matches: ask for the most informative unbound field.
    let candidates: Vec<String> = askable_fields(ctx, pack);
    let field = if q.inner.row_access() && !candidates.is_empty() {
        let rows = if result.truncated {
            match q.probe_all(&constraints) {
                Some(r) => r?,
                None => result.clone(),
            }
        } else {
            result.clone()
        };
        let cols: Vec<(String, usize)> = candidates
            .iter()
            .filter_map(|f| Some((f.clone(), rows.column_index(pack.column_for(f)?)?)))
            .collect();
        select_informative_field(&rows.rows, &cols)
    } else {
        pack.schema
            .ask_order
            .iter()
            .find(|f| candidates.contains(f))
            .cloned()
    };
    match field {
        Some(field) => {
            ctx.expected_field = Some(field.clone());
            ctx.sub_state = Some(LowerState::GetConstraint);
            Ok(Turn::new(
                UpperState::ManyMatches,
                "many_matches",
                Finding::AskField {
                    field,
                    count: Some(count),
                },
            )
            .sub(LowerState::GetConstraint)
            .count(count))
        }
        None => Ok(enumerate(ctx, &result, pack, UpperState::ManyMatches, "many_matches:exhausted", cfg.few_threshold).count(count)),
    }
}

/// Unbound, undeclined, non-key fields in schema order.
fn askable_fields(ctx: &DialogueContext, pack: &DomainPack) -> Vec<String> {
    pack.schema
        .fields
        .iter()
        .map(|f| f.name.clone())
        .filter(|f| !ctx.is_bound(f) && !ctx.declined_fields.contains(f) && pack.schema.key_field.as_ref() != Some(f))
        .collect()
}

fn enumerate(
    ctx: &mut DialogueContext,
    result: &QueryResultSet,
    pack: &DomainPack,
    state: UpperState,
    cause: &str,
    limit: usize,
) -> Turn {
    let shown = result.rows.len().min(limit);
    let rows: Vec<Record> = (0..shown).map(|i| row_record(result, i, pack)).collect();
    ctx.enumerated = match pack.schema.key_field.as_deref().and_then(|k| pack.column_for(k)) {
        Some(col) => (0..shown).filter_map(|i| result.cell(i, col).cloned()).collect(),
        None => Vec::new(),
    };
    ctx.expected_field = pack.schema.key_field.clone();
    Turn::new(state, cause, Finding::Enumerate { rows, count: result.count })
}

fn database_conflict(ctx: &mut DialogueContext, pack: &DomainPack, q: &Counting<'_>) -> Result<Turn, DialogError> {
    let unconfirmed = pack
        .schema
        .fields
        .iter()
        .find(|f| ctx.binding(&f.name).is_some_and(|b| b.status == BindingStatus::New))
        .map(|f| f.name.clone());
    if let Some(field) = unconfirmed {
        let value = ctx.binding(&field).expect("bound").value.clone();
        ctx.pending_confirmation = Some((field.clone(), value));
        ctx.sub_state = Some(LowerState::ConfirmValue);
        ctx.expected_field = Some(field.clone());
        return Ok(Turn::new(UpperState::DatabaseConflict, "database_conflict:confirm", Finding::Confirm { field })
            .sub(LowerState::ConfirmValue));
    }
    relax_or_give_up(ctx, pack, q)
}

/// Propose the smallest widening of a relaxable time that yields a match.
fn relax_or_give_up(ctx: &mut DialogueContext, pack: &DomainPack, q: &Counting<'_>) -> Result<Turn, DialogError> {
    let mut tried = false;
    for policy in &pack.schema.relaxable_fields {
        let Some(b) = ctx.binding(&policy.field) else { continue };
        if b.value.as_minutes().is_none() {
            continue;
        }
        tried = true;
        let current = b.window.unwrap_or(if b.approx { BASE_WINDOW } else { 0 });
        for &step in policy.widen_steps.iter().filter(|s| **s > current) {
            let mut trial = ctx.clone();
            if let Some(tb) = trial.bindings.get_mut(&policy.field) {
                tb.window = Some(step);
                tb.approx = true;
            }
            let res = q.probe(&compile_constraints(&trial, pack)?)?;
            if res.count > 0 {
                let offer = RelaxOffer {
                    field: policy.field.clone(),
                    window: step,
                    count: res.count,
                };
                ctx.pending_relax = Some(offer.clone());
                ctx.pending_confirmation = None;
                ctx.sub_state = Some(LowerState::RelaxConstraint);
                return Ok(Turn::new(UpperState::DatabaseConflict, "database_conflict:relax", Finding::Relax { offer })
                    .sub(LowerState::RelaxConstraint));
            }
        }
    }
    ctx.reset_query();
    let turn = Turn::new(UpperState::DatabaseConflict, "database_conflict:no_match", Finding::NoMatch).resting();
    Ok(if tried { turn.sub(LowerState::RelaxConstraint) } else { turn })
}

fn step_subdialogue(
    ctx: &mut DialogueContext,
    x: &ExtractionResult,
    pack: &DomainPack,
    q: &Counting<'_>,
    _cfg: &DialogConfig,
) -> Result<Step, DialogError> {
    let acts = &x.acts;
    if acts.quit() || acts.help() || acts.meta_topic().is_some() || acts.repeat() || acts.silence {
        return Ok(Step::Defer);
    }
    let fresh = !x.bindings.is_empty() || !x.ambiguities.is_empty() || acts.correction().is_some();
    let Some(sub) = ctx.sub_state else {
        return Ok(Step::Defer);
    };
    match sub {
        LowerState::GetConstraint => {
            if acts.dont_know() && !fresh {
                if let Some(f) = ctx.expected_field.take() {
                    if !ctx.declined_fields.contains(&f) {
                        ctx.declined_fields.push(f);
                    }
                }
                ctx.sub_state = None;
                return Ok(Step::ToQuery);
            }
            Ok(Step::Defer)
        }
        LowerState::ConfirmValue => {
            let Some((field, _)) = ctx.pending_confirmation.clone() else {
                return Ok(Step::Defer);
            };
            if fresh {
                return Ok(Step::Defer);
            }
            if acts.affirm() {
                if let Some(b) = ctx.bindings.get_mut(&field) {
                    b.status = BindingStatus::Confirmed;
                }
                ctx.pending_confirmation = None;
                let t = database_conflict(ctx, pack, q)?;
                return Ok(Step::Handled(t.continuing()));
            }
            if acts.deny() {
                ctx.bindings.remove(&field);
                ctx.pending_confirmation = None;
                ctx.sub_state = None;
                ctx.expected_field = Some(field.clone());
                return Ok(Step::Handled(
                    Turn::new(UpperState::DatabaseConflict, "database_conflict:denied", Finding::AskField { field, count: None })
                        .sub(LowerState::ConfirmValue)
                        .continuing(),
                ));
            }
            Ok(Step::Defer)
        }
        LowerState::RelaxConstraint => {
            let Some(offer) = ctx.pending_relax.clone() else {
                return Ok(Step::Defer);
            };
            if fresh {
                return Ok(Step::Defer);
            }
            if acts.affirm() {
                if let Some(b) = ctx.bindings.get_mut(&offer.field) {
                    b.window = Some(offer.window);
                    b.approx = true;
                }
                ctx.clear_subdialogue();
                return Ok(Step::ToQuery);
            }
            if acts.deny() {
                ctx.reset_query();
                return Ok(Step::Handled(
                    Turn::new(UpperState::DatabaseConflict, "database_conflict:declined", Finding::NoMatch)
                        .sub(LowerState::RelaxConstraint)
                        .continuing()
                        .resting(),
                ));
            }
            Ok(Step::Defer)
        }
        LowerState::VerifyUser => {
            let Some(mut pending) = ctx.pending_action.clone() else {
                return Ok(Step::Defer);
            };
            let action = pending.action.clone();
            if let Some(pin) = x.pin {
                if pack.schema.demo_pins.iter().any(|p| p.parse::<i64>().ok() == Some(pin)) {
                    ctx.sub_state = Some(LowerState::SideEffects);
                    return Ok(Step::Handled(
                        Turn::new(
                            UpperState::Success,
                            "success:verified",
                            Finding::SideEffect {
                                stage: "confirm".into(),
                                action,
                                item: pending.item,
                            },
                        )
                        .sub(LowerState::SideEffects)
                        .continuing(),
                    ));
                }
                pending.attempts += 1;
                if pending.attempts >= 2 {
                    ctx.sub_state = None;
                    return Ok(Step::Handled(
                        Turn::new(
                            UpperState::Success,
                            "success:verify_failed",
                            Finding::SideEffect {
                                stage: "denied".into(),
                                action,
                                item: pending.item,
                            },
                        )
                        .sub(LowerState::VerifyUser)
                        .continuing()
                        .resting(),
                    ));
                }
                ctx.pending_action = Some(pending);
                return Ok(Step::Handled(
                    Turn::new(UpperState::Success, "success:verify_retry", Finding::Verify { action, retry: true })
                        .sub(LowerState::VerifyUser)
                        .continuing(),
                ));
            }
            if acts.deny() {
                return Ok(Step::Handled(cancel(ctx, action, pending.item, LowerState::VerifyUser)));
            }
            Ok(Step::Defer)
        }
        LowerState::SideEffects => {
            let Some(pending) = ctx.pending_action.clone() else {
                return Ok(Step::Defer);
            };
            if acts.affirm() {
                ctx.sub_state = None;
                tracing::info!(action = %pending.action, "side effect committed");
                return Ok(Step::Handled(
                    Turn::new(
                        UpperState::Success,
                        "success:committed",
                        Finding::SideEffect {
                            stage: "done".into(),
                            action: pending.action,
                            item: pending.item,
                        },
                    )
                    .sub(LowerState::SideEffects)
                    .continuing()
                    .resting(),
                ));
            }
            if acts.deny() {
                return Ok(Step::Handled(cancel(ctx, pending.action, pending.item, LowerState::SideEffects)));
            }
            Ok(Step::Defer)
        }
    }
}

fn cancel(ctx: &mut DialogueContext, action: String, item: Record, sub: LowerState) -> Turn {
    ctx.sub_state = None;
    Turn::new(
        UpperState::Success,
        "success:cancelled",
        Finding::SideEffect {
            stage: "cancelled".into(),
            action,
            item,
        },
    )
    .sub(sub)
    .continuing()
    .resting()
}

/// A result row keyed by field name (and display name for extra
/// columns), with values in spoken form.
pub fn row_record(result: &QueryResultSet, row: usize, pack: &DomainPack) -> Record {
    let mut rec = Record::new();
    for f in &pack.schema.fields {
        if let Some(v) = result.cell(row, &f.db_column) {
            rec.insert(f.name.clone(), v.spoken());
        }
    }
    for (name, col) in &pack.db_map.display_columns {
        if let Some(v) = result.cell(row, col) {
            rec.insert(name.clone(), v.spoken());
        }
    }
    rec
}

/// Replace `{key}` with entries of `rec`.
pub fn fill_record(text: &str, rec: &Record) -> String {
    let mut out = text.to_string();
    for (k, v) in rec {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}

fn window_text(minutes: u32) -> String {
    match (minutes / 60, minutes % 60) {
        (0, m) => format!("{m} minutes"),
        (1, 0) => "an hour".to_string(),
        (h, 0) => format!("{h} hours"),
        (h, m) => format!("{h} hours {m} minutes"),
    }
}

fn field_slots(t: InteractionTemplate, field: &str, pack: &DomainPack) -> InteractionTemplate {
    let spec = pack.schema.field(field);
    t.with("field", field)
        .with("label", pack.label_for(field))
        .with("prompt", spec.map(|f| f.prompt_text.clone()).unwrap_or_default())
}

/// Deterministic mapping from a finding to an interaction template.
pub fn build_template(finding: &Finding, ctx: &DialogueContext, pack: &DomainPack) -> InteractionTemplate {
    use TemplateAct as A;
    let schema = &pack.schema;
    let spoken = |field: &str| ctx.binding(field).map(|b| b.value.spoken()).unwrap_or_default();
    match finding {
        Finding::Greet => InteractionTemplate::new(A::Greet).with("domain", schema.domain_name.as_str()),
        Finding::Goodbye => InteractionTemplate::new(A::Goodbye),
        Finding::Help { state, expected_field } => {
            let mut t = InteractionTemplate::new(A::Help)
                .with("state", state.as_str())
                .with("text", help_text(state, expected_field.as_deref(), pack));
            if let Some(f) = expected_field {
                t.set("expected_field", f.as_str());
            }
            t
        }
        Finding::MetaAnswer { topic } => {
            let mut values = pack.lexicon.canonical_values(topic);
            let mut t = InteractionTemplate::new(A::MetaAnswer).with("topic", topic.replace('_', " "));
            if values.is_empty() {
                if let Some(c) = schema.numeric_classes.iter().find(|c| c.name == *topic) {
                    values.push(format!("numbers from {} to {}", c.min, c.max));
                }
            }
            if values.is_empty() {
                t.set("none", "true");
            }
            if values.len() > 10 {
                t.set("more", (values.len() - 10).to_string());
                values.truncate(10);
            }
            t.with("values", values)
        }
        Finding::OutOfScope { term, explanation } => InteractionTemplate::new(A::NotifyOob)
            .with("term", term.as_str())
            .with("explanation", explanation.as_str())
            .with("reentry_hint", help_text(UpperState::OutOfBounds.name(), None, pack)),
        Finding::UnknownWord { word } => InteractionTemplate::new(A::NotifyUnknownWord).with("word", word.as_str()),
        Finding::Repeat { last } => last
            .clone()
            .unwrap_or_else(|| build_template(&Finding::Greet, ctx, pack)),
        Finding::NoNewInfo { cause, field } => {
            let mut t = InteractionTemplate::new(A::NoNewInfo).with("cause", cause.as_str());
            if let Some(f) = field {
                t = field_slots(t, f, pack);
            }
            t
        }
        Finding::Clarify { report } => {
            let kind = match report.kind {
                AmbiguityKind::Lexical => "lexical",
                AmbiguityKind::Class => "class",
                AmbiguityKind::Field => "field",
            };
            let mut labels: Vec<String> = Vec::new();
            for o in &report.options {
                let l = pack.label_for(&o.field).to_string();
                if !labels.contains(&l) {
                    labels.push(l);
                }
            }
            InteractionTemplate::new(A::ClarifyAmbiguity)
                .with("kind", kind)
                .with("term", report.term.as_str())
                .with("candidates", report.candidates.clone())
                .with("labels", labels)
        }
        Finding::Inconsistent { rule } => {
            let r = schema.consistency_rules.iter().find(|r| r.id == *rule);
            let (left, right, message) = r
                .map(|r| (r.left_field.as_str(), r.right_field.as_str(), r.message.as_str()))
                .unwrap_or_default();
            InteractionTemplate::new(A::NotifyInconsistent)
                .with("rule", rule.as_str())
                .with("message", message)
                .with("left", pack.label_for(left))
                .with("right", pack.label_for(right))
                .with("left_value", spoken(left))
                .with("right_value", spoken(right))
        }
        Finding::Correction {
            field,
            old,
            new,
            unmatched,
            next_field,
        } => {
            let mut t = InteractionTemplate::new(A::AckCorrection).with("new", new.spoken());
            if let Some(f) = field {
                t.set("field", f.as_str());
                t.set("label", pack.label_for(f));
            }
            if let Some(o) = old {
                t.set(if *unmatched { "unmatched" } else { "old" }, o.spoken());
            }
            match next_field.as_deref().and_then(|f| schema.field(f)) {
                Some(f) => t.set("next", f.prompt_text.as_str()),
                None if !*unmatched => t.set("ready", "true"),
                None => {}
            }
            t
        }
        Finding::AskField { field, count } => {
            let mut t = field_slots(InteractionTemplate::new(A::AskField), field, pack);
            if let Some(n) = count {
                t.set("count", n.to_string());
            }
            t
        }
        Finding::AskQueryType { count } => InteractionTemplate::new(A::AskQueryType)
            .with("options", schema.query_types.iter().map(|q| q.label.clone()).collect::<Vec<_>>())
            .with("count", count.to_string()),
        Finding::Report { item, query_type } => {
            let qt = schema.query_type(query_type);
            let answer: Vec<Record> = qt
                .map(|q| q.answer_fields.as_slice())
                .unwrap_or_default()
                .iter()
                .map(|f| {
                    let label = schema
                        .field(f)
                        .map(|s| s.label.clone())
                        .unwrap_or_else(|| f.replace('_', " "));
                    [("label".to_string(), label), ("value".to_string(), item.get(f).cloned().unwrap_or_default())].into()
                })
                .collect();
            let mut t = InteractionTemplate::new(A::ReportAnswer)
                .with("item", item.clone())
                .with("answer", answer)
                .with("query_type", qt.map(|q| q.label.clone()).unwrap_or_default());
            if let Some(a) = schema.actions.first() {
                t.set("offer", fill_record(&a.offer, item));
            }
            t
        }
        Finding::Enumerate { rows, count } => InteractionTemplate::new(A::Enumerate)
            .with("rows", rows.clone())
            .with("count", count.to_string()),
        Finding::Confirm { field } => InteractionTemplate::new(A::ConfirmField)
            .with("field", field.as_str())
            .with("label", pack.label_for(field))
            .with("value", spoken(field)),
        Finding::Relax { offer } => InteractionTemplate::new(A::RelaxProposal)
            .with("field", offer.field.as_str())
            .with("label", pack.label_for(&offer.field))
            .with("value", spoken(&offer.field))
            .with("window", window_text(offer.window))
            .with("count", offer.count.to_string()),
        Finding::Verify { action, retry } => {
            let label = schema.actions.iter().find(|a| a.name == *action).map(|a| a.label.as_str()).unwrap_or(action);
            let mut t = InteractionTemplate::new(A::VerifyPrompt).with("action", label);
            if *retry {
                t.set("retry", "true");
            }
            t
        }
        Finding::SideEffect { stage, action, item } => {
            let spec = schema.actions.iter().find(|a| a.name == *action);
            let text = match (stage.as_str(), spec) {
                ("confirm", Some(a)) => fill_record(&a.side_effect, item),
                ("done", Some(a)) => fill_record(&a.done, item),
                _ => String::new(),
            };
            InteractionTemplate::new(A::SideEffectNotice)
                .with("stage", stage.as_str())
                .with("text", text)
        }
        Finding::NoMatch => InteractionTemplate::new(A::NoMatch),
        Finding::Trouble { detail } => InteractionTemplate::new(A::SystemTrouble).with("detail", detail.as_str()),
    }
}

/// Pending state the next utterance is interpreted against, for logs.
pub fn describe(ctx: &DialogueContext) -> BTreeMap<String, String> {
    ctx.bindings
        .values()
        .map(|b| {
            let mut v = b.value.to_string();
            if let Some(w) = b.window {
                v.push_str(&format!(" ±{w}"));
            }
            (b.field.clone(), v)
        })
        .collect()
}
