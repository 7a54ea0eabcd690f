//! Pragmatics: map tagged spans onto schema fields.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::acts::ActReport;
use super::chunk::{categorize, plural_of, Category, ChunkKind, PhraseChunk};
use super::tagger::SemanticTag;
use super::token::{normalize_phrase, Token};
use crate::dialog::context::{
    AmbiguityKind, AmbiguityReport, BindingStatus, Candidate, DialogueContext, FieldBinding, LowerState,
};
use crate::schema::DomainPack;
use crate::value::Value;

/// Tokens scanned backwards from a value when looking for a cue word.
const CUE_LOOKBACK: usize = 4;

/// The user's answer to a pending clarification question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clarification {
    pub kind: AmbiguityKind,
    pub term: String,
    pub options: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub bindings: Vec<FieldBinding>,
    pub ambiguities: Vec<AmbiguityReport>,
    pub acts: ActReport,
    pub unknown_terms: Vec<String>,
    pub out_of_scope_hits: Vec<(String, String)>,
    pub query_type: Option<String>,
    pub action_request: Option<String>,
    pub clarification: Option<Clarification>,
    /// Fields the corrected value may belong to (cue-filtered).
    pub correction_fields: Vec<String>,
    /// Digits spoken while the manager waits for a PIN.
    pub pin: Option<i64>,
}

impl ExtractionResult {
    /// Terms accounted for: one per binding, ambiguity, unknown word and
    /// out-of-scope hit.
    pub fn term_count(&self) -> usize {
        self.bindings.len() + self.ambiguities.len() + self.unknown_terms.len() + self.out_of_scope_hits.len()
    }
}

/// Decide between a binding and an ambiguity for one term's readings.
pub fn classify(term: &str, options: Vec<Candidate>) -> Result<Candidate, AmbiguityReport> {
    fn distinct<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
        let mut out: Vec<T> = Vec::new();
        for i in items {
            if !out.contains(&i) {
                out.push(i);
            }
        }
        out
    }
    let classes = distinct(options.iter().map(|o| o.semantic_class.clone()));
    let values = distinct(options.iter().map(|o| o.value.clone()));
    let fields = distinct(options.iter().map(|o| o.field.clone()));
    let report = |kind, candidates| AmbiguityReport {
        kind,
        term: term.to_string(),
        candidates,
        options: options.clone(),
    };
    if classes.len() > 1 {
        Err(report(AmbiguityKind::Class, classes))
    } else if values.len() > 1 {
        Err(report(AmbiguityKind::Lexical, values.iter().map(Value::to_string).collect()))
    } else if fields.len() > 1 {
        Err(report(AmbiguityKind::Field, fields))
    } else {
        match options.first() {
            Some(o) => Ok(o.clone()),
            None => Err(report(AmbiguityKind::Field, Vec::new())),
        }
    }
}

fn contains_seq(norms: &[&str], seq: &[String]) -> Option<usize> {
    if seq.is_empty() || seq.len() > norms.len() {
        return None;
    }
    norms
        .windows(seq.len())
        .position(|w| w.iter().zip(seq).all(|(a, b)| *a == b))
}

/// Nearest cue role governing the tag, scanning back a few tokens and
/// stopping at another tagged value.
fn governing_role<'p>(
    tag: &SemanticTag,
    norms: &[&str],
    tags: &[SemanticTag],
    pack: &'p DomainPack,
) -> Option<&'p str> {
    let floor = tag.start.saturating_sub(CUE_LOOKBACK);
    let mut end = tag.start;
    while end > floor {
        if tags.iter().any(|t| t.covers(end - 1)) {
            return None;
        }
        if let Some((role, _)) = pack.cues.roles_ending_at(norms, end).first() {
            return Some(role);
        }
        end -= 1;
    }
    None
}

/// All field readings for a tag, filtered by the governing cue when that
/// leaves at least one.
fn candidates_for(
    tag: &SemanticTag,
    norms: &[&str],
    tags: &[SemanticTag],
    pack: &DomainPack,
) -> Vec<Candidate> {
    let all: Vec<Candidate> = tag
        .readings
        .iter()
        .flat_map(|r| {
            pack.schema.fields_of_class(&r.semantic_class).map(move |f| Candidate {
                field: f.name.clone(),
                semantic_class: r.semantic_class.clone(),
                value: r.value.clone(),
                approx: tag.approx,
            })
        })
        .collect();
    if let Some(role) = governing_role(tag, norms, tags, pack) {
        let cued: Vec<Candidate> = all
            .iter()
            .filter(|c| pack.schema.field(&c.field).and_then(|f| f.role.as_deref()) == Some(role))
            .cloned()
            .collect();
        if !cued.is_empty() {
            return cued;
        }
    }
    all
}

/// "around 8" in answer to a time question: a bare hour from 1 to 12
/// read as the nearest daytime hour (6 to 11 morning, 12 to 5 afternoon).
fn bare_hour(tag: &SemanticTag, context: &DialogueContext, pack: &DomainPack) -> Option<Candidate> {
    let field = pack.schema.field(context.expected_field.as_deref()?)?;
    if field.semantic_class != "time_of_day" {
        return None;
    }
    let hour = tag.readings.iter().find_map(|r| match r.value {
        Value::Number(n) if (1..=12).contains(&n) => Some(n as u32),
        _ => None,
    })?;
    let hour = if hour < 6 { hour + 12 } else { hour };
    Some(Candidate {
        field: field.name.clone(),
        semantic_class: field.semantic_class.clone(),
        value: Value::Time(hour * 60),
        approx: true,
    })
}

pub fn to_binding(c: Candidate, turn: u32, base_window: u32) -> FieldBinding {
    FieldBinding {
        window: c.approx.then_some(base_window),
        field: c.field,
        value: c.value,
        semantic_class: c.semantic_class,
        status: BindingStatus::New,
        turn,
        approx: c.approx,
    }
}

/// Window half-width given to hedged times.
pub const BASE_WINDOW: u32 = 120;

pub fn extract(
    tokens: &[Token],
    tags: &[SemanticTag],
    chunks: &[PhraseChunk],
    acts: &ActReport,
    pack: &DomainPack,
    context: &DialogueContext,
) -> ExtractionResult {
    let norms: Vec<&str> = tokens.iter().map(|t| t.norm.as_str()).collect();
    let schema = &pack.schema;
    let mut consumed: BTreeSet<usize> = BTreeSet::new();
    let mut result = ExtractionResult {
        acts: acts.clone(),
        ..ExtractionResult::default()
    };

    // Out-of-scope terms, longest first.
    let mut i = 0;
    while i < tokens.len() {
        let hit = schema
            .out_of_scope_terms
            .iter()
            .filter_map(|(term, why)| {
                let len = term.split(' ').count();
                (i + len <= norms.len() && norms[i..i + len].join(" ") == *term).then_some((len, why))
            })
            .max_by_key(|(len, _)| *len);
        match hit {
            Some((len, why)) => {
                let surface = tokens[i..i + len].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
                if !result.out_of_scope_hits.iter().any(|(t, _)| t.eq_ignore_ascii_case(&surface)) {
                    result.out_of_scope_hits.push((surface, why.clone()));
                }
                consumed.extend(i..i + len);
                i += len;
            }
            None => i += 1,
        }
    }

    let consumed_tags = acts.consumed_tags();
    for &k in &consumed_tags {
        consumed.extend(tags[k].span());
    }
    if let Some(c) = acts.correction() {
        let tag = &tags[c.new_tag];
        result.correction_fields = candidates_for(tag, &norms, tags, pack)
            .into_iter()
            .filter(|cand| c.semantic_class.as_ref().is_none_or(|cl| *cl == cand.semantic_class))
            .map(|cand| cand.field)
            .fold(Vec::new(), |mut acc, f| {
                if !acc.contains(&f) {
                    acc.push(f);
                }
                acc
            });
    }

    // Answer to a clarification question.
    let mut ordinal_used = None;
    if let Some(pending) = &context.pending_ambiguity {
        let (chosen, used_tokens, used_ordinal) = clarify(pending, tokens, &norms, tags, pack);
        if !chosen.is_empty() {
            consumed.extend(used_tokens);
            ordinal_used = used_ordinal;
            result.clarification = Some(Clarification {
                kind: pending.kind,
                term: pending.term.clone(),
                options: chosen,
            });
        }
    }

    for (k, tag) in tags.iter().enumerate() {
        if consumed_tags.contains(&k) || Some(k) == ordinal_used || tag.span().any(|t| consumed.contains(&t)) {
            continue;
        }
        if context.sub_state == Some(LowerState::VerifyUser) {
            if let Value::Number(n) = tag.value() {
                result.pin = Some(*n);
                continue;
            }
        }
        if tag.semantic_class() == "ordinal" {
            let key = schema.key_field.as_deref().and_then(|f| schema.field(f));
            if let (Value::Number(n), Some(key)) = (tag.value(), key) {
                let picked = usize::try_from(*n - 1).ok().and_then(|i| context.enumerated.get(i));
                if let Some(v) = picked {
                    result.bindings.push(to_binding(
                        Candidate {
                            field: key.name.clone(),
                            semantic_class: key.semantic_class.clone(),
                            value: v.clone(),
                            approx: false,
                        },
                        context.turn_index,
                        BASE_WINDOW,
                    ));
                    continue;
                }
            }
        }
        let mut options = candidates_for(tag, &norms, tags, pack);
        if options.is_empty() {
            options.extend(bare_hour(tag, context, pack));
        }
        if options.is_empty() {
            result.unknown_terms.push(tag.surface.clone());
            continue;
        }
        match classify(&tag.surface, options) {
            Ok(c) => result.bindings.push(to_binding(c, context.turn_index, BASE_WINDOW)),
            Err(report) => result.ambiguities.push(report),
        }
    }

    // Unrecognized content words.
    let cats = categorize(tokens, tags, pack);
    for chunk in chunks.iter().filter(|c| c.kind == ChunkKind::Unknown) {
        for t in chunk.start..chunk.end {
            if consumed.contains(&t) || cats[t] != Category::Unknown {
                continue;
            }
            let word = tokens[t].text.clone();
            if !result.unknown_terms.iter().any(|w| w.eq_ignore_ascii_case(&word)) {
                result.unknown_terms.push(word);
            }
        }
    }

    result.query_type = schema
        .query_types
        .iter()
        .find(|q| q.trigger_patterns.iter().any(|p| contains_seq(&norms, p).is_some()))
        .map(|q| q.name.clone());
    result.action_request = schema
        .actions
        .iter()
        .find(|a| a.triggers.iter().any(|p| contains_seq(&norms, p).is_some()))
        .map(|a| a.name.clone());
    result
}

/// Narrow a pending ambiguity with the user's answer. Returns the chosen
/// options, the tokens used and the ordinal tag used, if any.
fn clarify(
    pending: &AmbiguityReport,
    tokens: &[Token],
    norms: &[&str],
    tags: &[SemanticTag],
    pack: &DomainPack,
) -> (Vec<Candidate>, Vec<usize>, Option<usize>) {
    // "the second one"
    for (k, tag) in tags.iter().enumerate() {
        if tag.semantic_class() != "ordinal" {
            continue;
        }
        if let Value::Number(n) = tag.value() {
            if let Some(picked) = usize::try_from(*n - 1).ok().and_then(|i| pending.candidates.get(i)) {
                let chosen = pending
                    .options
                    .iter()
                    .filter(|o| option_key(pending.kind, o) == *picked)
                    .cloned()
                    .collect();
                return (chosen, tag.span().collect(), Some(k));
            }
        }
    }

    let mut used = Vec::new();
    let chosen: Vec<Candidate> = match pending.kind {
        AmbiguityKind::Field => {
            let mut roles = Vec::new();
            for (role, cue) in pack.cues.iter() {
                if let Some(p) = contains_seq(norms, cue) {
                    roles.push(role);
                    used.extend(p..p + cue.len());
                }
            }
            pending
                .options
                .iter()
                .filter(|o| {
                    let f = pack.schema.field(&o.field);
                    f.and_then(|f| f.role.as_deref()).is_some_and(|r| roles.contains(&r))
                        || f.is_some_and(|f| mentions(norms, &f.label, &mut used))
                })
                .cloned()
                .collect()
        }
        AmbiguityKind::Class => pending
            .options
            .iter()
            .filter(|o| {
                let label = pack.schema.field(&o.field).map(|f| f.label.clone()).unwrap_or_default();
                mentions(norms, &o.semantic_class.replace('_', " "), &mut used) || mentions(norms, &label, &mut used)
            })
            .cloned()
            .collect(),
        AmbiguityKind::Lexical => {
            let term_words: Vec<String> = normalize_phrase(&pending.term).split(' ').map(str::to_string).collect();
            pending
                .options
                .iter()
                .filter(|o| {
                    normalize_phrase(&o.value.to_string())
                        .split(' ')
                        .filter(|w| !term_words.iter().any(|t| t == w))
                        .any(|w| match norms.iter().position(|n| *n == w) {
                            Some(p) => {
                                used.push(p);
                                true
                            }
                            None => false,
                        })
                })
                .cloned()
                .collect()
        }
    };
    // Values the user restated are handled as ordinary bindings.
    used.retain(|i| !tags.iter().any(|t| t.covers(*i)));
    let _ = tokens;
    (chosen, used, None)
}

fn option_key(kind: AmbiguityKind, o: &Candidate) -> String {
    match kind {
        AmbiguityKind::Lexical => o.value.to_string(),
        AmbiguityKind::Class => o.semantic_class.clone(),
        AmbiguityKind::Field => o.field.clone(),
    }
}

/// Whether the utterance contains the head word of `label`.
fn mentions(norms: &[&str], label: &str, used: &mut Vec<usize>) -> bool {
    let words: Vec<&str> = label.split(' ').filter(|w| !w.is_empty()).collect();
    let Some(head) = words.first() else {
        return false;
    };
    match norms.iter().position(|n| plural_of(head, n)) {
        Some(p) => {
            used.push(p);
            true
        }
        None => false,
    }
}
