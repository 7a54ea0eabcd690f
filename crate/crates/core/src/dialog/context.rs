use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::template::InteractionTemplate;
use crate::value::Value;

/// Domain-independent dialogue states, in the order they are tried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UpperState {
    Initial,
    Quit,
    MetaQuery,
    OutOfBounds,
    StatusQuo,
    Ambiguous,
    Inconsistent,
    Correction,
    MandatoryFields,
    Success,
    DatabaseConflict,
    UnknownQuery,
    FewMatches,
    ManyMatches,
}

impl UpperState {
    pub const ALL: [UpperState; 14] = [
        UpperState::Initial,
        UpperState::Quit,
        UpperState::MetaQuery,
        UpperState::OutOfBounds,
        UpperState::StatusQuo,
        UpperState::Ambiguous,
        UpperState::Inconsistent,
        UpperState::Correction,
        UpperState::MandatoryFields,
        UpperState::Success,
        UpperState::DatabaseConflict,
        UpperState::UnknownQuery,
        UpperState::FewMatches,
        UpperState::ManyMatches,
    ];

    /// The last five states are only reachable through a back-end query.
    pub fn is_post_query(self) -> bool {
        self >= UpperState::Success
    }

    pub fn name(self) -> &'static str {
        match self {
            UpperState::Initial => "INITIAL",
            UpperState::Quit => "QUIT",
            UpperState::MetaQuery => "META_QUERY",
            UpperState::OutOfBounds => "OUT_OF_BOUNDS",
            UpperState::StatusQuo => "STATUS_QUO",
            UpperState::Ambiguous => "AMBIGUOUS",
            UpperState::Inconsistent => "INCONSISTENT",
            UpperState::Correction => "CORRECTION",
            UpperState::MandatoryFields => "MANDATORY_FIELDS",
            UpperState::Success => "SUCCESS",
            UpperState::DatabaseConflict => "DATABASE_CONFLICT",
            UpperState::UnknownQuery => "UNKNOWN_QUERY",
            UpperState::FewMatches => "FEW_MATCHES",
            UpperState::ManyMatches => "MANY_MATCHES",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|u| u.name() == s)
    }
}

impl fmt::Display for UpperState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Domain-specific sub-dialogue states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LowerState {
    VerifyUser,
    SideEffects,
    RelaxConstraint,
    ConfirmValue,
    GetConstraint,
}

impl LowerState {
    pub fn owner(self) -> UpperState {
        match self {
            LowerState::VerifyUser | LowerState::SideEffects => UpperState::Success,
            LowerState::RelaxConstraint | LowerState::ConfirmValue => UpperState::DatabaseConflict,
            LowerState::GetConstraint => UpperState::ManyMatches,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LowerState::VerifyUser => "VERIFY_USER",
            LowerState::SideEffects => "SIDE_EFFECTS",
            LowerState::RelaxConstraint => "RELAX_CONSTRAINT",
            LowerState::ConfirmValue => "CONFIRM_VALUE",
            LowerState::GetConstraint => "GET_CONSTRAINT",
        }
    }
}

impl fmt::Display for LowerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BindingStatus {
    New,
    Confirmed,
    Corrected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldBinding {
    pub field: String,
    pub value: Value,
    pub semantic_class: String,
    pub status: BindingStatus,
    pub turn: u32,
    pub approx: bool,
    /// Half-width in minutes for windowed time constraints.
    pub window: Option<u32>,
}

impl FieldBinding {
    /// Same value and window, ignoring provenance.
    pub fn same_constraint(&self, other: &FieldBinding) -> bool {
        self.value.same_as(&other.value) && self.approx == other.approx && self.window == other.window
    }
}

/// One possible reading of an extracted term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub field: String,
    pub semantic_class: String,
    pub value: Value,
    pub approx: bool,
}

/// Listing order is also resolution priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmbiguityKind {
    Lexical,
    Class,
    Field,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguityReport {
    pub kind: AmbiguityKind,
    pub term: String,
    /// Canonical values, classes or field names, depending on `kind`.
    pub candidates: Vec<String>,
    pub options: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelaxOffer {
    pub field: String,
    pub window: u32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingAction {
    pub action: String,
    pub item: BTreeMap<String, String>,
    pub attempts: u32,
}

/// The frame plus everything the manager remembers between turns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueContext {
    pub bindings: BTreeMap<String, FieldBinding>,
    pub query_type: Option<String>,
    /// Turns left before a carried-over query type is dropped.
    pub query_type_ttl: Option<u8>,
    pub upper_state: UpperState,
    pub sub_state: Option<LowerState>,
    pub expected_field: Option<String>,
    pub last_template: Option<InteractionTemplate>,
    pub pending_confirmation: Option<(String, Value)>,
    pub pending_ambiguity: Option<AmbiguityReport>,
    pub pending_relax: Option<RelaxOffer>,
    pub pending_action: Option<PendingAction>,
    /// The matched item of the previous turn, open to follow-up actions.
    pub last_success: Option<BTreeMap<String, String>>,
    /// Fields the user said they do not know.
    pub declined_fields: Vec<String>,
    /// Fields named by the last consistency violation.
    pub flagged_fields: Vec<String>,
    /// Key values of the last enumerated matches.
    pub enumerated: Vec<Value>,
    pub turn_index: u32,
    pub candidate_rows_count: Option<usize>,
}

impl Default for DialogueContext {
    fn default() -> Self {
        DialogueContext {
            bindings: BTreeMap::new(),
            query_type: None,
            query_type_ttl: None,
            upper_state: UpperState::Initial,
            sub_state: None,
            expected_field: None,
            last_template: None,
            pending_confirmation: None,
            pending_ambiguity: None,
            pending_relax: None,
            pending_action: None,
            last_success: None,
            declined_fields: Vec::new(),
            flagged_fields: Vec::new(),
            enumerated: Vec::new(),
            turn_index: 0,
            candidate_rows_count: None,
        }
    }
}

impl DialogueContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advance the turn counter; call once per user utterance before
    /// analysis so new bindings carry the right turn.
    pub fn begin_turn(&mut self) {
        self.turn_index += 1;
    }

    pub fn binding(&self, field: &str) -> Option<&FieldBinding> {
        self.bindings.get(field)
    }

    pub fn is_bound(&self, field: &str) -> bool {
        self.bindings.contains_key(field)
    }

    /// Convenience for tests and examples: bind a field directly.
    pub fn bind(&mut self, field: &str, class: &str, value: Value) {
        self.bindings.insert(
            field.to_string(),
            FieldBinding {
                field: field.to_string(),
                value,
                semantic_class: class.to_string(),
                status: BindingStatus::New,
                turn: self.turn_index,
                approx: false,
                window: None,
            },
        );
    }

    /// Drop everything tied to the current query.
    pub fn reset_query(&mut self) {
        self.bindings.clear();
        self.sub_state = None;
        self.expected_field = None;
        self.pending_confirmation = None;
        self.pending_ambiguity = None;
        self.pending_relax = None;
        self.pending_action = None;
        self.declined_fields.clear();
        self.flagged_fields.clear();
        self.enumerated.clear();
        self.candidate_rows_count = None;
    }

    pub fn clear_subdialogue(&mut self) {
        self.sub_state = None;
        self.pending_confirmation = None;
        self.pending_relax = None;
        self.pending_action = None;
    }
}
