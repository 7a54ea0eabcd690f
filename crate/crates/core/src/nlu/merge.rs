//! Fold an extraction into the dialogue context.

use std::collections::BTreeSet;

use thiserror::Error;

use super::extract::{classify, to_binding, ExtractionResult, BASE_WINDOW};
use crate::dialog::context::{BindingStatus, Candidate, DialogueContext, FieldBinding};
use crate::schema::DomainPack;
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MergeError {
    #[error("no bound field holds the corrected value")]
    CorrectionTargetNotFound,
}

/// A correction as it was applied to the frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppliedCorrection {
    pub field: String,
    pub old: Option<Value>,
    pub new: Value,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergeOutcome {
    pub context: DialogueContext,
    pub changed: BTreeSet<String>,
    pub query_type_changed: bool,
    /// Ambiguities still open after merging.
    pub unresolved: Vec<crate::dialog::context::AmbiguityReport>,
    pub correction: Option<AppliedCorrection>,
    pub clarified: bool,
}

fn put(ctx: &mut DialogueContext, b: FieldBinding, changed: &mut BTreeSet<String>) {
    let same = ctx.bindings.get(&b.field).is_some_and(|old| old.same_constraint(&b));
    if !same {
        changed.insert(b.field.clone());
        ctx.flagged_fields.retain(|f| *f != b.field);
        ctx.declined_fields.retain(|f| *f != b.field);
        ctx.bindings.insert(b.field.clone(), b);
    }
}

pub fn merge(
    context: &DialogueContext,
    extraction: &ExtractionResult,
    pack: &DomainPack,
) -> Result<MergeOutcome, MergeError> {
    let mut ctx = context.clone();
    let mut changed = BTreeSet::new();
    let mut unresolved = Vec::new();
    let turn = ctx.turn_index;
    let schema = &pack.schema;

    let mut clarified = false;
    if let (Some(c), Some(p)) = (&extraction.clarification, &context.pending_ambiguity) {
        if c.kind == p.kind && c.term == p.term {
            match classify(&c.term, c.options.clone()) {
                Ok(cand) => {
                    put(&mut ctx, to_binding(cand, turn, BASE_WINDOW), &mut changed);
                    clarified = true;
                }
                Err(still) => {
                    // A narrower question is still progress.
                    clarified = still.options.len() < p.options.len();
                    unresolved.push(still);
                }
            }
        }
    }
    ctx.pending_ambiguity = None;

    // Within one utterance the last value named for a field wins.
    for (i, b) in extraction.bindings.iter().enumerate() {
        if extraction.bindings[i + 1..].iter().all(|later| later.field != b.field) {
            put(&mut ctx, b.clone(), &mut changed);
        }
    }

    for a in &extraction.ambiguities {
        let expected = ctx.expected_field.clone();
        let field_ambiguity = a.kind == crate::dialog::context::AmbiguityKind::Field;
        let pick: Option<&Candidate> = expected
            .as_deref()
            .filter(|_| field_ambiguity)
            .and_then(|f| a.options.iter().find(|o| o.field == f));
        match pick {
            Some(o) => put(&mut ctx, to_binding(o.clone(), turn, BASE_WINDOW), &mut changed),
            None => unresolved.push(a.clone()),
        }
    }

    if extraction.query_type.is_some() && extraction.query_type != ctx.query_type {
        ctx.query_type = extraction.query_type.clone();
        ctx.query_type_ttl = None;
    }
    let query_type_changed = ctx.query_type != context.query_type;

    let mut correction = None;
    if let Some(c) = extraction.acts.correction() {
        let target = match &c.old_value {
            Some(old) => {
                let mut holders: Vec<&FieldBinding> = ctx
                    .bindings
                    .values()
                    .filter(|b| b.value.same_as(old))
                    .filter(|b| c.semantic_class.as_ref().is_none_or(|cl| *cl == b.semantic_class))
                    .collect();
                holders.sort_by_key(|b| (std::cmp::Reverse(b.turn), schema.field_index(&b.field)));
                match holders.first() {
                    Some(b) => Some(b.field.clone()),
                    None => {
                        // Already corrected: the new value is bound somewhere.
                        let done = ctx.bindings.values().find(|b| b.value.same_as(&c.new_value));
                        match done {
                            Some(b) => Some(b.field.clone()),
                            None => return Err(MergeError::CorrectionTargetNotFound),
                        }
                    }
                }
            }
            None => correction_target(&ctx, extraction, pack, &c.new_value),
        };
        let Some(field) = target else {
            return Err(MergeError::CorrectionTargetNotFound);
        };
        let spec = schema.field(&field).ok_or(MergeError::CorrectionTargetNotFound)?;
        let old = ctx.bindings.get(&field).map(|b| b.value.clone());
        let prior = ctx.bindings.get(&field).cloned();
        let binding = FieldBinding {
            field: field.clone(),
            value: c.new_value.clone(),
            semantic_class: spec.semantic_class.clone(),
            status: BindingStatus::Corrected,
            turn,
            approx: prior.as_ref().is_some_and(|p| p.approx),
            window: prior.as_ref().and_then(|p| p.window),
        };
        if prior.as_ref().is_some_and(|p| p.value.same_as(&binding.value)) {
            // Idempotent repeat of an earlier correction.
            correction = Some(AppliedCorrection { field, old: None, new: c.new_value.clone() });
        } else {
            changed.insert(field.clone());
            ctx.flagged_fields.retain(|f| *f != field);
            ctx.bindings.insert(field.clone(), binding);
            correction = Some(AppliedCorrection { field, old, new: c.new_value.clone() });
        }
        if ctx.pending_confirmation.as_ref().is_some_and(|(f, _)| correction.as_ref().is_some_and(|a| a.field == *f)) {
            ctx.pending_confirmation = None;
        }
    }

    // Report net changes only; a field set twice in one merge may land
    // where it started.
    changed.retain(|f| match (context.bindings.get(f), ctx.bindings.get(f)) {
        (Some(a), Some(b)) => !a.same_constraint(b),
        (a, b) => a.is_some() != b.is_some(),
    });
    Ok(MergeOutcome {
        context: ctx,
        changed,
        query_type_changed,
        unresolved,
        correction,
        clarified,
    })
}

/// Field a bare "no, X" correction applies to.
fn correction_target(
    ctx: &DialogueContext,
    extraction: &ExtractionResult,
    pack: &DomainPack,
    new_value: &Value,
) -> Option<String> {
    let fields = &extraction.correction_fields;
    if fields.len() == 1 {
        return fields.first().cloned();
    }
    let fits = |f: &str| fields.is_empty() || fields.iter().any(|c| c == f);
    if let Some((f, _)) = &ctx.pending_confirmation {
        if fits(f) {
            return Some(f.clone());
        }
    }
    if let Some(f) = ctx.flagged_fields.iter().find(|f| fits(f)) {
        return Some(f.clone());
    }
    let bound: Vec<&String> = ctx.bindings.keys().filter(|f| fields.iter().any(|c| c == *f)).collect();
    if bound.len() == 1 {
        return Some(bound[0].clone());
    }
    if let Some(f) = &ctx.expected_field {
        if fits(f) {
            return Some(f.clone());
        }
    }
    let _ = (pack, new_value);
    None
}
