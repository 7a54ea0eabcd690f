//! Interaction templates: language-neutral feedback records.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TemplateAct {
    Greet,
    Goodbye,
    Help,
    MetaAnswer,
    NotifyOob,
    NotifyUnknownWord,
    RepeatLast,
    NoNewInfo,
    ClarifyAmbiguity,
    NotifyInconsistent,
    AckCorrection,
    AskField,
    AskQueryType,
    ReportAnswer,
    Enumerate,
    ConfirmField,
    RelaxProposal,
    VerifyPrompt,
    SideEffectNotice,
    NoMatch,
    SystemTrouble,
}

impl TemplateAct {
    pub const ALL: [TemplateAct; 21] = [
        TemplateAct::Greet,
        TemplateAct::Goodbye,
        TemplateAct::Help,
        TemplateAct::MetaAnswer,
        TemplateAct::NotifyOob,
        TemplateAct::NotifyUnknownWord,
        TemplateAct::RepeatLast,
        TemplateAct::NoNewInfo,
        TemplateAct::ClarifyAmbiguity,
        TemplateAct::NotifyInconsistent,
        TemplateAct::AckCorrection,
        TemplateAct::AskField,
        TemplateAct::AskQueryType,
        TemplateAct::ReportAnswer,
        TemplateAct::Enumerate,
        TemplateAct::ConfirmField,
        TemplateAct::RelaxProposal,
        TemplateAct::VerifyPrompt,
        TemplateAct::SideEffectNotice,
        TemplateAct::NoMatch,
        TemplateAct::SystemTrouble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateAct::Greet => "GREET",
            TemplateAct::Goodbye => "GOODBYE",
            TemplateAct::Help => "HELP",
            TemplateAct::MetaAnswer => "META_ANSWER",
            TemplateAct::NotifyOob => "NOTIFY_OOB",
            TemplateAct::NotifyUnknownWord => "NOTIFY_UNKNOWN_WORD",
            TemplateAct::RepeatLast => "REPEAT_LAST",
            TemplateAct::NoNewInfo => "NO_NEW_INFO",
            TemplateAct::ClarifyAmbiguity => "CLARIFY_AMBIGUITY",
            TemplateAct::NotifyInconsistent => "NOTIFY_INCONSISTENT",
            TemplateAct::AckCorrection => "ACK_CORRECTION",
            TemplateAct::AskField => "ASK_FIELD",
            TemplateAct::AskQueryType => "ASK_QUERY_TYPE",
            TemplateAct::ReportAnswer => "REPORT_ANSWER",
            TemplateAct::Enumerate => "ENUMERATE",
            TemplateAct::ConfirmField => "CONFIRM_FIELD",
            TemplateAct::RelaxProposal => "RELAX_PROPOSAL",
            TemplateAct::VerifyPrompt => "VERIFY_PROMPT",
            TemplateAct::SideEffectNotice => "SIDE_EFFECT_NOTICE",
            TemplateAct::NoMatch => "NO_MATCH",
            TemplateAct::SystemTrouble => "SYSTEM_TROUBLE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == s)
    }

    /// Slots every template of this act carries.
    pub fn required_slots(self) -> &'static [&'static str] {
        match self {
            TemplateAct::Greet => &["domain"],
            TemplateAct::Goodbye => &[],
            TemplateAct::Help => &["state", "text"],
            TemplateAct::MetaAnswer => &["topic", "values"],
            TemplateAct::NotifyOob => &["term", "explanation", "reentry_hint"],
            TemplateAct::NotifyUnknownWord => &["word"],
            TemplateAct::RepeatLast => &[],
            TemplateAct::NoNewInfo => &["cause"],
            TemplateAct::ClarifyAmbiguity => &["kind", "term", "candidates"],
            TemplateAct::NotifyInconsistent => &["rule", "message", "left", "right", "left_value", "right_value"],
            TemplateAct::AckCorrection => &["new"],
            TemplateAct::AskField => &["field", "label", "prompt"],
            TemplateAct::AskQueryType => &["options"],
            TemplateAct::ReportAnswer => &["item", "answer"],
            TemplateAct::Enumerate => &["rows", "count"],
            TemplateAct::ConfirmField => &["field", "label", "value"],
            TemplateAct::RelaxProposal => &["field", "label", "value", "window", "count"],
            TemplateAct::VerifyPrompt => &["action"],
            TemplateAct::SideEffectNotice => &["stage", "text"],
            TemplateAct::NoMatch => &[],
            TemplateAct::SystemTrouble => &["detail"],
        }
    }

    /// Slots that may additionally appear.
    pub fn optional_slots(self) -> &'static [&'static str] {
        match self {
            TemplateAct::Help => &["expected_field"],
            TemplateAct::MetaAnswer => &["more", "none"],
            TemplateAct::NoNewInfo => &["prompt", "field", "label"],
            TemplateAct::ClarifyAmbiguity => &["labels"],
            TemplateAct::AckCorrection => &["field", "label", "old", "unmatched", "next", "ready"],
            TemplateAct::AskField => &["count"],
            TemplateAct::AskQueryType => &["count"],
            TemplateAct::ReportAnswer => &["query_type", "offer"],
            TemplateAct::VerifyPrompt => &["retry"],
            TemplateAct::NoMatch => &["reason"],
            _ => &[],
        }
    }

    pub fn allows_slot(self, slot: &str) -> bool {
        self.required_slots().contains(&slot) || self.optional_slots().contains(&slot)
    }
}

impl fmt::Display for TemplateAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub type Record = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SlotValue {
    Text(String),
    List(Vec<String>),
    Record(Record),
    Records(Vec<Record>),
}

impl SlotValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            SlotValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl From<&str> for SlotValue {
    fn from(s: &str) -> Self {
        SlotValue::Text(s.to_string())
    }
}

impl From<String> for SlotValue {
    fn from(s: String) -> Self {
        SlotValue::Text(s)
    }
}

impl From<Vec<String>> for SlotValue {
    fn from(v: Vec<String>) -> Self {
        SlotValue::List(v)
    }
}

impl From<Record> for SlotValue {
    fn from(r: Record) -> Self {
        SlotValue::Record(r)
    }
}

impl From<Vec<Record>> for SlotValue {
    fn from(r: Vec<Record>) -> Self {
        SlotValue::Records(r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionTemplate {
    pub act: TemplateAct,
    pub slots: BTreeMap<String, SlotValue>,
}

impl InteractionTemplate {
    pub fn new(act: TemplateAct) -> Self {
        InteractionTemplate {
            act,
            slots: BTreeMap::new(),
        }
    }

    pub fn with(mut self, slot: &str, value: impl Into<SlotValue>) -> Self {
        self.slots.insert(slot.to_string(), value.into());
        self
    }

    pub fn set(&mut self, slot: &str, value: impl Into<SlotValue>) {
        self.slots.insert(slot.to_string(), value.into());
    }

    pub fn text(&self, slot: &str) -> Option<&str> {
        self.slots.get(slot).and_then(SlotValue::as_text)
    }

    /// Every required slot present and no undeclared slot.
    pub fn is_slot_complete(&self) -> bool {
        self.act.required_slots().iter().all(|s| self.slots.contains_key(*s))
            && self.slots.keys().all(|k| self.act.allows_slot(k))
    }
}
