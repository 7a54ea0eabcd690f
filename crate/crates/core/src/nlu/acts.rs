//! Pattern-driven dialogue act detection.

use serde::{Deserialize, Serialize};

use super::chunk::plural_of;
use super::tagger::SemanticTag;
use super::token::{Token, TokenCategory};
use crate::schema::DomainPack;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Correction {
    pub old_value: Option<Value>,
    pub new_value: Value,
    /// Shared class of both values; `None` when they share none or the
    /// old value was not stated.
    pub semantic_class: Option<String>,
    pub new_tag: usize,
    pub old_tag: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "act", rename_all = "snake_case")]
pub enum Act {
    Quit,
    Help,
    MetaQuery { topic: String },
    Repeat,
    DontKnow,
    Affirm,
    Deny,
    Correction(Correction),
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActReport {
    pub acts: Vec<Act>,
    pub silence: bool,
}

impl ActReport {
    pub fn has(&self, act: &Act) -> bool {
        self.acts.contains(act)
    }

    pub fn quit(&self) -> bool {
        self.has(&Act::Quit)
    }

    pub fn help(&self) -> bool {
        self.has(&Act::Help)
    }

    pub fn affirm(&self) -> bool {
        self.has(&Act::Affirm)
    }

    pub fn deny(&self) -> bool {
        self.has(&Act::Deny)
    }

    pub fn dont_know(&self) -> bool {
        self.has(&Act::DontKnow)
    }

    pub fn repeat(&self) -> bool {
        self.has(&Act::Repeat)
    }

    pub fn meta_topic(&self) -> Option<&str> {
        self.acts.iter().find_map(|a| match a {
            Act::MetaQuery { topic } => Some(topic.as_str()),
            _ => None,
        })
    }

    pub fn correction(&self) -> Option<&Correction> {
        self.acts.iter().find_map(|a| match a {
            Act::Correction(c) => Some(c),
            _ => None,
        })
    }

    /// Tag indices consumed by acts rather than by field extraction.
    pub fn consumed_tags(&self) -> Vec<usize> {
        self.correction()
            .map(|c| std::iter::once(c.new_tag).chain(c.old_tag).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Item<'a> {
    Tag(usize),
    Word(&'a str),
    Comma,
}

fn items<'a>(tokens: &'a [Token], tags: &[SemanticTag]) -> Vec<Item<'a>> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if let Some(k) = tags.iter().position(|t| t.start == i) {
            out.push(Item::Tag(k));
            i = tags[k].end;
            continue;
        }
        let t = &tokens[i];
        match t.category {
            TokenCategory::Punct if t.norm == "," => out.push(Item::Comma),
            TokenCategory::Punct => {}
            _ => out.push(Item::Word(&t.norm)),
        }
        i += 1;
    }
    out
}

fn contains_seq(words: &[&str], seq: &[&str]) -> bool {
    words.windows(seq.len()).any(|w| w == seq)
}

const QUIT_WORDS: &[&str] = &["bye", "goodbye", "quit", "exit", "stop"];
const AFFIRM_WORDS: &[&str] = &["yes", "yeah", "yep", "yup", "sure", "ok", "okay", "correct", "right", "alright", "fine"];
const DENY_WORDS: &[&str] = &["no", "nope", "wrong", "incorrect"];
/// Words allowed between "no" and the corrected value ("no, I said Dallas").
const CORRECTION_FILLER: &[&str] = &["i", "said", "meant", "it's", "it", "is", "was", "make", "that", "actually"];

pub fn detect_acts(tokens: &[Token], tags: &[SemanticTag], pack: &DomainPack) -> ActReport {
    let seq = items(tokens, tags);
    let words: Vec<&str> = seq
        .iter()
        .filter_map(|i| match i {
            Item::Word(w) => Some(*w),
            _ => None,
        })
        .collect();
    let mut report = ActReport {
        acts: Vec::new(),
        silence: seq.is_empty(),
    };
    let acts = &mut report.acts;
    let has = |w: &str| words.contains(&w);

    if QUIT_WORDS.iter().any(|w| has(w)) || contains_seq(&words, &["that's", "all"]) {
        acts.push(Act::Quit);
    }
    if has("help")
        || ["can", "do", "should"]
            .iter()
            .any(|aux| contains_seq(&words, &["what", aux, "i", "say"]))
    {
        acts.push(Act::Help);
    }
    if let Some(topic) = meta_topic(&words, pack) {
        acts.push(Act::MetaQuery { topic });
    }
    if has("repeat")
        || has("pardon")
        || contains_seq(&words, &["say", "that", "again"])
        || contains_seq(&words, &["come", "again"])
        || contains_seq(&words, &["what", "did", "you", "say"])
    {
        acts.push(Act::Repeat);
    }
    let dont_know = contains_seq(&words, &["don't", "know"])
        || contains_seq(&words, &["dont", "know"])
        || contains_seq(&words, &["do", "not", "know"])
        || contains_seq(&words, &["not", "sure"])
        || contains_seq(&words, &["no", "idea"])
        || contains_seq(&words, &["no", "clue"]);
    if dont_know {
        acts.push(Act::DontKnow);
    }

    let correction = correction(&seq, tags);
    let negated = |w: &str| contains_seq(&words, &["not", w]);
    if !dont_know
        && (AFFIRM_WORDS.iter().any(|w| has(w) && !negated(w)) || contains_seq(&words, &["go", "ahead"]))
    {
        acts.push(Act::Affirm);
    }
    let deny = DENY_WORDS.iter().any(|w| has(w)) || negated("right") || negated("correct");
    if deny && !dont_know && correction.is_none() {
        acts.push(Act::Deny);
    }
    if let Some(c) = correction {
        acts.push(Act::Correction(c));
    }
    report
}

/// "what cities do you know about" → class `city`.
fn meta_topic(words: &[&str], pack: &DomainPack) -> Option<String> {
    let asks_inventory = contains_seq(words, &["you", "know"])
        || contains_seq(words, &["you", "have"])
        || contains_seq(words, &["you", "cover"])
        || contains_seq(words, &["you", "serve"])
        || contains_seq(words, &["can", "i", "ask", "about"]);
    if !asks_inventory {
        return None;
    }
    let pos = words.iter().position(|w| *w == "what" || *w == "which")?;
    let topic = *words.get(pos + 1)?;
    if ["do", "can", "does", "is", "are"].contains(&topic) {
        return None;
    }
    let schema = &pack.schema;
    let by_class = schema
        .fields
        .iter()
        .map(|f| f.semantic_class.as_str())
        .find(|c| plural_of(c, topic) || c.split('_').next().is_some_and(|head| plural_of(head, topic)));
    let by_label = || {
        schema
            .fields
            .iter()
            .find(|f| f.label.split(' ').any(|l| plural_of(l, topic)))
            .map(|f| f.semantic_class.as_str())
    };
    Some(by_class.or_else(by_label).unwrap_or(topic).to_string())
}

fn correction(seq: &[Item<'_>], tags: &[SemanticTag]) -> Option<Correction> {
    let make = |new: usize, old: Option<usize>| {
        let new_tag = &tags[new];
        let class = match old {
            Some(o) => new_tag
                .readings
                .iter()
                .map(|r| r.semantic_class.as_str())
                .find(|c| tags[o].has_class(c))
                .map(str::to_string),
            None => {
                let first = new_tag.semantic_class();
                new_tag
                    .readings
                    .iter()
                    .all(|r| r.semantic_class == first)
                    .then(|| first.to_string())
            }
        };
        let pick = |tag: &SemanticTag| {
            class
                .as_deref()
                .and_then(|c| tag.readings.iter().find(|r| r.semantic_class == c))
                .map(|r| r.value.clone())
                .unwrap_or_else(|| tag.value().clone())
        };
        Correction {
            old_value: old.map(|o| pick(&tags[o])),
            new_value: pick(new_tag),
            semantic_class: class,
            new_tag: new,
            old_tag: old,
        }
    };
    let non_comma: Vec<(usize, Item<'_>)> = seq
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, i)| *i != Item::Comma)
        .collect();

    // X [,] not Y   and   X instead of Y
    for w in non_comma.windows(3) {
        if let [(_, Item::Tag(x)), (_, Item::Word("not")), (_, Item::Tag(y))] = w {
            return Some(make(*x, Some(*y)));
        }
    }
    for w in non_comma.windows(4) {
        if let [(_, Item::Tag(x)), (_, Item::Word("instead")), (_, Item::Word("of")), (_, Item::Tag(y))] = w {
            return Some(make(*x, Some(*y)));
        }
    }
    // not Y , X
    for w in seq.windows(4) {
        if let [Item::Word("not"), Item::Tag(y), Item::Comma, Item::Tag(x)] = w {
            return Some(make(*x, Some(*y)));
        }
    }
    // no , X   /   I said X
    if let Some(Item::Word("no" | "nope" | "actually")) = seq.first() {
        for item in seq.iter().skip(1).take(4) {
            match item {
                Item::Tag(x) => return Some(make(*x, None)),
                Item::Comma => {}
                Item::Word(w) if CORRECTION_FILLER.contains(w) || ["to", "from"].contains(w) => {}
                Item::Word(_) => break,
            }
        }
    }
    for w in seq.windows(3) {
        if let [Item::Word("i"), Item::Word("said" | "meant"), Item::Tag(x)] = w {
            return Some(make(*x, None));
        }
    }
    None
}
