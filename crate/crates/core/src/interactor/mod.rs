//! Template-to-text rendering through ordered rules, and context-sensitive
//! help.
//!
//! Rule lines look like `ACT [pred ...] => output`; following lines that
//! start with `|` are variants. Predicates are `slot`, `!slot` and
//! `slot=value`. Placeholders:
//!
//! - `{slot}` text slot, or a list joined as "a, b and c"
//! - `{list:slot:or}` list joined with "or"
//! - `{slot.key}` one entry of a record slot
//! - `{enum:slot}` records rendered one per line through the `ROW` rule,
//!   with `{n}` set to the 1-based position
//! - `{each:slot:NAME}` records rendered through rule `NAME` and joined
//!   as a list
//! - `{*}` every text slot of the current record, as `key value` pairs

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conf;
use crate::dialog::context::{LowerState, UpperState};
use crate::dialog::template::{InteractionTemplate, Record, SlotValue, TemplateAct};
use crate::schema::{ApplicationSchema, DomainPack, PackError, HELP_FILE, RENDER_FILE};

const DEFAULT_RULES: &str = include_str!("../../data/render-rules.conf");
const DEFAULT_HELP: &str = include_str!("../../data/help.conf");

pub const APOLOGY: &str = "Sorry, I am not sure how to put that. Could you try again?";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RenderError {
    #[error("no rule matched {0}")]
    NoRuleMatched(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Present(String),
    Absent(String),
    Equals(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleOrigin {
    Domain,
    Framework,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateRule {
    /// A template act name, or a helper name such as `ROW`.
    pub act: String,
    pub predicates: Vec<Predicate>,
    pub output: String,
    pub variants: Vec<String>,
    pub line: usize,
    pub origin: RuleOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    /// Domain rules first, then framework defaults.
    pub rules: Vec<TemplateRule>,
}

fn parse_rules(src: &str, origin: RuleOrigin) -> Result<Vec<TemplateRule>, (usize, String)> {
    let mut rules: Vec<TemplateRule> = Vec::new();
    for line in conf::lines(src) {
        if let Some(variant) = line.text.strip_prefix('|') {
            let last = rules
                .last_mut()
                .ok_or((line.number, "variant before any rule".to_string()))?;
            last.variants.push(variant.trim().replace("\\n", "\n"));
            continue;
        }
        let (head, output) = line
            .text
            .split_once("=>")
            .ok_or((line.number, "expected `ACT [predicates] => text`".to_string()))?;
        let mut words = head.split_whitespace();
        let act = words.next().ok_or((line.number, "missing act".to_string()))?;
        if !act.chars().all(|c| c.is_ascii_uppercase() || c == '_') {
            return Err((line.number, format!("bad act name `{act}`")));
        }
        let predicates = words
            .map(|w| {
                if let Some(s) = w.strip_prefix('!') {
                    Predicate::Absent(s.to_string())
                } else if let Some((k, v)) = w.split_once('=') {
                    Predicate::Equals(k.to_string(), v.to_string())
                } else {
                    Predicate::Present(w.to_string())
                }
            })
            .collect();
        rules.push(TemplateRule {
            act: act.to_string(),
            predicates,
            output: output.trim().replace("\\n", "\n"),
            variants: Vec::new(),
            line: line.number,
            origin,
        });
    }
    Ok(rules)
}

/// Slot names a placeholder refers to.
fn placeholder_slots(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else { break };
        let inner = &rest[open + 1..open + close];
        let slot = match inner.split(':').collect::<Vec<_>>()[..] {
            ["list", s, ..] | ["enum", s] | ["each", s, _] => s,
            [s] => s.split('.').next().unwrap_or(s),
            _ => inner,
        };
        if slot != "*" && slot != "n" {
            out.push(slot.to_string());
        }
        rest = &rest[open + close + 1..];
    }
    out
}

impl RuleSet {
    pub fn framework() -> Self {
        RuleSet {
            rules: parse_rules(DEFAULT_RULES, RuleOrigin::Framework).expect("bundled render rules parse"),
        }
    }

    pub fn with_domain_rules(src: &str) -> Result<Self, PackError> {
        let mut rules = parse_rules(src, RuleOrigin::Domain).map_err(|(line, reason)| PackError::ParseError {
            file: RENDER_FILE.to_string(),
            line,
            reason,
        })?;
        rules.extend(Self::framework().rules);
        Ok(RuleSet { rules })
    }

    /// Prepend rules, as a domain pack does.
    pub fn prepend(&mut self, src: &str) -> Result<(), (usize, String)> {
        let mut rules = parse_rules(src, RuleOrigin::Domain)?;
        rules.append(&mut self.rules);
        self.rules = rules;
        Ok(())
    }

    /// Placeholders and predicates of template-act rules must name slots the
    /// act declares. Reports domain-file line numbers.
    pub fn validate(&self) -> Result<(), (usize, String)> {
        for r in self.rules.iter().filter(|r| r.origin == RuleOrigin::Domain) {
            let Some(act) = TemplateAct::parse(&r.act) else {
                continue;
            };
            let pred_slots = r.predicates.iter().map(|p| match p {
                Predicate::Present(s) | Predicate::Absent(s) | Predicate::Equals(s, _) => s.clone(),
            });
            let texts = std::iter::once(&r.output).chain(&r.variants);
            for slot in pred_slots.chain(texts.flat_map(|t| placeholder_slots(t))) {
                if !act.allows_slot(&slot) {
                    return Err((r.line, format!("{} has no slot `{slot}`", act.name())));
                }
            }
        }
        Ok(())
    }

    fn find(&self, act: &str, slots: &Slots<'_>) -> Option<&TemplateRule> {
        self.rules.iter().find(|r| {
            r.act == act
                && r.predicates.iter().all(|p| match p {
                    Predicate::Present(s) => slots.has(s),
                    Predicate::Absent(s) => !slots.has(s),
                    Predicate::Equals(s, v) => slots.text(s).is_some_and(|t| t == *v),
                })
        })
    }
}

/// Variation source: `None` always picks the first output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variation {
    pub seed: u64,
    pub turn: u32,
}

enum Slots<'a> {
    Template(&'a InteractionTemplate),
    Record(&'a Record, usize),
}

impl Slots<'_> {
    fn get(&self, name: &str) -> Option<SlotValue> {
        match self {
            Slots::Template(t) => t.slots.get(name).cloned(),
            Slots::Record(r, n) if name == "n" => Some(SlotValue::Text(n.to_string())),
            Slots::Record(r, _) => r.get(name).cloned().map(SlotValue::Text),
        }
    }

    fn has(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    fn text(&self, name: &str) -> Option<String> {
        self.get(name).and_then(|v| match v {
            SlotValue::Text(t) => Some(t),
            _ => None,
        })
    }

    fn pairs(&self) -> Vec<(String, String)> {
        match self {
            Slots::Template(t) => t
                .slots
                .iter()
                .filter_map(|(k, v)| v.as_text().map(|s| (k.clone(), s.to_string())))
                .collect(),
            Slots::Record(r, _) => r.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        }
    }
}

pub fn join_list(items: &[String], conj: &str) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} {conj} {last}", init.join(", ")),
    }
}

struct Renderer<'a> {
    rules: &'a RuleSet,
    rng: Option<ChaCha8Rng>,
}

impl Renderer<'_> {
    fn rule(&mut self, act: &str, slots: &Slots<'_>) -> Result<String, RenderError> {
        let rule = self
            .rules
            .find(act, slots)
            .ok_or_else(|| RenderError::NoRuleMatched(act.to_string()))?;
        let pick = match (&mut self.rng, rule.variants.len()) {
            (Some(rng), n) if n > 0 => rng.random_range(0..=n),
            _ => 0,
        };
        let text = if pick == 0 { &rule.output } else { &rule.variants[pick - 1] };
        self.fill(text, slots)
    }

    fn fill(&mut self, text: &str, slots: &Slots<'_>) -> Result<String, RenderError> {
        let mut out = String::new();
        let mut rest = text;
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let Some(close) = rest[open..].find('}') else {
                out.push_str(&rest[open..]);
                rest = "";
                break;
            };
            let inner = &rest[open + 1..open + close];
            out.push_str(&self.placeholder(inner, slots)?);
            rest = &rest[open + close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }

    fn records(slots: &Slots<'_>, name: &str) -> Vec<Record> {
        match slots.get(name) {
            Some(SlotValue::Records(r)) => r,
            Some(SlotValue::Record(r)) => vec![r],
            _ => Vec::new(),
        }
    }

    fn placeholder(&mut self, inner: &str, slots: &Slots<'_>) -> Result<String, RenderError> {
        let parts: Vec<&str> = inner.split(':').collect();
        Ok(match parts[..] {
            ["*"] => slots
                .pairs()
                .into_iter()
                .map(|(k, v)| format!("{} {v}", k.replace('_', " ")))
                .collect::<Vec<_>>()
                .join(", "),
            ["list", s] | ["list", s, "and"] => list_text(slots.get(s), "and"),
            ["list", s, conj] => list_text(slots.get(s), conj),
            ["enum", s] => {
                let mut lines = Vec::new();
                for (i, r) in Self::records(slots, s).iter().enumerate() {
                    lines.push(self.rule("ROW", &Slots::Record(r, i + 1))?);
                }
                lines.join("\n")
            }
            ["each", s, helper] => {
                let mut items = Vec::new();
                for (i, r) in Self::records(slots, s).iter().enumerate() {
                    items.push(self.rule(helper, &Slots::Record(r, i + 1))?);
                }
                join_list(&items, "and")
            }
            [s] => match s.split_once('.') {
                Some((slot, key)) => match slots.get(slot) {
                    Some(SlotValue::Record(r)) => r.get(key).cloned().unwrap_or_default(),
                    _ => String::new(),
                },
                None => match slots.get(s) {
                    Some(SlotValue::Text(t)) => t,
                    Some(SlotValue::List(l)) => join_list(&l, "and"),
                    Some(SlotValue::Records(r)) => r.len().to_string(),
                    Some(SlotValue::Record(r)) => r.values().cloned().collect::<Vec<_>>().join(", "),
                    None => String::new(),
                },
            },
            _ => format!("{{{inner}}}"),
        })
    }
}

fn list_text(v: Option<SlotValue>, conj: &str) -> String {
    match v {
        Some(SlotValue::List(l)) => join_list(&l, conj),
        Some(SlotValue::Text(t)) => t,
        _ => String::new(),
    }
}

pub fn render(
    template: &InteractionTemplate,
    rules: &RuleSet,
    variation: Option<Variation>,
) -> Result<String, RenderError> {
    let rng = variation.map(|v| ChaCha8Rng::seed_from_u64(v.seed ^ (u64::from(v.turn)).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
    let mut r = Renderer { rules, rng };
    let text = r.rule(template.act.name(), &Slots::Template(template))?;
    Ok(tidy(&text))
}

/// Render, falling back to a generic apology when no rule matches.
pub fn render_or_apologize(template: &InteractionTemplate, rules: &RuleSet, variation: Option<Variation>) -> String {
    render(template, rules, variation).unwrap_or_else(|e| {
        tracing::warn!(error = %e, "render failed");
        APOLOGY.to_string()
    })
}

/// Collapse doubled spaces left by empty optional slots.
fn tidy(text: &str) -> String {
    text.lines()
        .map(|l| {
            let mut s = l.split(' ').filter(|w| !w.is_empty()).collect::<Vec<_>>().join(" ");
            for p in [" .", " ,", " ?"] {
                s = s.replace(p, &p[1..]);
            }
            s
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelpEntry {
    /// `None` for the global `*` entry.
    pub state: Option<String>,
    pub field: Option<String>,
    pub text: String,
    pub line: usize,
    pub origin: RuleOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelpTexts {
    pub entries: Vec<HelpEntry>,
}

fn parse_help(src: &str, origin: RuleOrigin) -> Result<Vec<HelpEntry>, (usize, String)> {
    let mut out = Vec::new();
    for line in conf::lines(src) {
        let (head, text) = line
            .text
            .split_once("=>")
            .ok_or((line.number, "expected `STATE [field] => text`".to_string()))?;
        let mut words = head.split_whitespace();
        let state = words.next().ok_or((line.number, "missing state".to_string()))?;
        let field = words.next().map(str::to_string);
        if words.next().is_some() {
            return Err((line.number, "too many keys".to_string()));
        }
        out.push(HelpEntry {
            state: (state != "*").then(|| state.to_string()),
            field,
            text: text.trim().to_string(),
            line: line.number,
            origin,
        });
    }
    Ok(out)
}

fn is_state_name(s: &str) -> bool {
    UpperState::parse(s).is_some()
        || [
            LowerState::VerifyUser,
            LowerState::SideEffects,
            LowerState::RelaxConstraint,
            LowerState::ConfirmValue,
            LowerState::GetConstraint,
        ]
        .iter()
        .any(|l| l.name() == s)
}

impl HelpTexts {
    pub fn framework() -> Self {
        HelpTexts {
            entries: parse_help(DEFAULT_HELP, RuleOrigin::Framework).expect("bundled help parses"),
        }
    }

    pub fn with_domain_help(src: &str) -> Result<Self, PackError> {
        let mut entries = parse_help(src, RuleOrigin::Domain).map_err(|(line, reason)| PackError::ParseError {
            file: HELP_FILE.to_string(),
            line,
            reason,
        })?;
        entries.extend(Self::framework().entries);
        Ok(HelpTexts { entries })
    }

    pub fn validate(&self, schema: &ApplicationSchema) -> Result<(), (usize, String)> {
        for e in self.entries.iter().filter(|e| e.origin == RuleOrigin::Domain) {
            if let Some(s) = &e.state {
                if !is_state_name(s) {
                    return Err((e.line, format!("unknown state `{s}`")));
                }
            }
            if let Some(f) = &e.field {
                if schema.field(f).is_none() {
                    return Err((e.line, format!("unknown field `{f}`")));
                }
            }
        }
        Ok(())
    }

    /// (state, field), then state alone, then the global entry.
    pub fn lookup(&self, state: &str, expected_field: Option<&str>) -> &str {
        let exact = expected_field.and_then(|f| {
            self.entries
                .iter()
                .find(|e| e.state.as_deref() == Some(state) && e.field.as_deref() == Some(f))
        });
        exact
            .or_else(|| self.entries.iter().find(|e| e.state.as_deref() == Some(state) && e.field.is_none()))
            .or_else(|| self.entries.iter().find(|e| e.state.is_none()))
            .map(|e| e.text.as_str())
            .unwrap_or("")
    }
}

pub fn help_text(state: &str, expected_field: Option<&str>, pack: &DomainPack) -> String {
    pack.help.lookup(state, expected_field).to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(act: TemplateAct) -> InteractionTemplate {
        InteractionTemplate::new(act)
    }

    #[test]
    fn first_match_and_predicates() {
        let mut rules = RuleSet::framework();
        rules
            .prepend("ASK_FIELD field=gate => Which gate?\nASK_FIELD count => {count} flights match. {prompt}")
            .unwrap();
        let ask = t(TemplateAct::AskField).with("field", "gate").with("label", "gate").with("prompt", "Gate?");
        assert_eq!(render(&ask, &rules, None).unwrap(), "Which gate?");
        let ask2 = ask.clone().with("field", "city").with("count", "14");
        assert_eq!(render(&ask2, &rules, None).unwrap(), "14 flights match. Gate?");
        let plain = ask.with("field", "city");
        assert_eq!(render(&plain, &rules, None).unwrap(), "Gate?");
    }

    #[test]
    fn lists_and_rows() {
        let mut rules = RuleSet::framework();
        rules.prepend("ROW => {n}. {a} / {b}").unwrap();
        let rows: Vec<Record> = (1..=3)
            .map(|i| [("a".to_string(), format!("x{i}")), ("b".to_string(), format!("y{i}"))].into())
            .collect();
        let e = t(TemplateAct::Enumerate).with("rows", rows).with("count", "3");
        let text = render(&e, &rules, None).unwrap();
        assert_eq!(text.lines().count(), 4, "{text}");
        assert!(text.ends_with("1. x1 / y1\n2. x2 / y2\n3. x3 / y3"));
        assert_eq!(join_list(&["a".into(), "b".into(), "c".into()], "or"), "a, b or c");
    }

    #[test]
    fn default_rules_cover_every_act() {
        let rules = RuleSet::framework();
        for act in TemplateAct::ALL {
            let mut tpl = t(act);
            for s in act.required_slots() {
                tpl.set(s, "x");
            }
            assert!(render(&tpl, &rules, None).is_ok(), "{act}");
        }
    }

    #[test]
    fn variants_are_seeded() {
        let mut rules = RuleSet::framework();
        rules.prepend("GOODBYE => a\n| b\n| c\n| d").unwrap();
        let g = t(TemplateAct::Goodbye);
        let pick = |seed, turn| render(&g, &rules, Some(Variation { seed, turn })).unwrap();
        assert_eq!(render(&g, &rules, None).unwrap(), "a");
        for turn in 0..20 {
            assert_eq!(pick(7, turn), pick(7, turn));
        }
        let seen: std::collections::BTreeSet<String> = (0..40).map(|turn| pick(7, turn)).collect();
        assert!(seen.len() > 1);
    }

    #[test]
    fn help_fallback_chain() {
        let mut h = HelpTexts::framework();
        h.entries.insert(
            0,
            HelpEntry {
                state: Some("MANDATORY_FIELDS".into()),
                field: Some("departure_city".into()),
                text: "Say a city".into(),
                line: 1,
                origin: RuleOrigin::Domain,
            },
        );
        assert_eq!(h.lookup("MANDATORY_FIELDS", Some("departure_city")), "Say a city");
        assert_ne!(h.lookup("MANDATORY_FIELDS", Some("gate")), "Say a city");
        let global = h.lookup("NO_SUCH_STATE", None);
        assert!(!global.is_empty());
    }
}
