//! Domain-independent semantic taggers (time of day, date, ordinal,
//! number) followed by longest-match lexicon lookup.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::token::{tokenize, Token, TokenCategory};
use crate::schema::DomainPack;
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagSource {
    DomainIndependent,
    DomainSpecific,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reading {
    pub semantic_class: String,
    pub value: Value,
}

/// A tagged span. Lexicon hits with several entries for one surface carry
/// one reading per entry, in lexicon order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticTag {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub readings: Vec<Reading>,
    pub source: TagSource,
    /// Set by "around", "about" and similar hedges before a time.
    pub approx: bool,
}

impl SemanticTag {
    pub fn span(&self) -> Range<usize> {
        self.start..self.end
    }

    pub fn semantic_class(&self) -> &str {
        &self.readings[0].semantic_class
    }

    pub fn value(&self) -> &Value {
        &self.readings[0].value
    }

    pub fn covers(&self, index: usize) -> bool {
        self.span().contains(&index)
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.readings.iter().any(|r| r.semantic_class == class)
    }
}

const UNITS: &[&str] = &["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine"];
const TEENS: &[&str] = &[
    "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen",
];
const TENS: &[&str] = &["twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"];
const ORDINALS: &[&str] = &[
    "first", "second", "third", "fourth", "fifth", "sixth", "seventh", "eighth", "ninth", "tenth",
];
const HEDGES: &[&str] = &["around", "about", "approximately", "roughly", "approx"];
const WEEKDAYS: &[&str] = &["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const MONTHS: &[&str] = &[
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october",
    "november", "december",
];
/// Words after which a spoken "hour minute" pair is read as a number.
const NUMBER_CONTEXT: &[&str] = &["flight", "number", "pin", "gate", "code"];

fn unit(w: &str) -> Option<u32> {
    UNITS.iter().position(|u| *u == w).map(|p| p as u32)
}
fn teen(w: &str) -> Option<u32> {
    TEENS.iter().position(|u| *u == w).map(|p| p as u32 + 10)
}
fn tens(w: &str) -> Option<u32> {
    TENS.iter().position(|u| *u == w).map(|p| p as u32 * 10 + 20)
}

/// Hour from a word or digit token, 1..=12.
fn hour(tok: &Token) -> Option<u32> {
    let h = match tok.category {
        TokenCategory::Number => tok.norm.parse().ok()?,
        _ => unit(&tok.norm).or_else(|| teen(&tok.norm))?,
    };
    (1..=12).contains(&h).then_some(h)
}

struct Span {
    start: usize,
    end: usize,
    priority: u8,
    readings: Vec<Reading>,
    source: TagSource,
    approx: bool,
}

/// Tokenize and tag an utterance.
pub fn annotate(utterance: &str, pack: &DomainPack) -> (Vec<Token>, Vec<SemanticTag>) {
    let tokens = tokenize(utterance);
    let tags = tag_tokens(&tokens, pack);
    (tokens, tags)
}

pub fn tag_tokens(tokens: &[Token], pack: &DomainPack) -> Vec<SemanticTag> {
    let norms: Vec<&str> = tokens.iter().map(|t| t.norm.as_str()).collect();
    let mut candidates: Vec<Span> = Vec::new();
    for i in 0..tokens.len() {
        if let Some((end, minutes)) = time_at(tokens, &norms, i) {
            let approx = i > 0 && HEDGES.contains(&norms[i - 1]);
            candidates.push(independent(i, end, 0, "time_of_day", Value::Time(minutes), approx));
        }
        if let Some((end, date)) = date_at(tokens, &norms, i) {
            candidates.push(independent(i, end, 1, "date", Value::Text(date), false));
        }
        if let Some((end, n)) = ordinal_at(tokens, &norms, i) {
            candidates.push(independent(i, end, 2, "ordinal", Value::Number(n), false));
        }
        if let Some((end, n)) = number_at(tokens, &norms, i) {
            let mut readings: Vec<Reading> = pack
                .schema
                .numeric_classes
                .iter()
                .filter(|c| (c.min..=c.max).contains(&n))
                .map(|c| Reading {
                    semantic_class: c.name.clone(),
                    value: Value::Number(n),
                })
                .collect();
            if readings.is_empty() {
                readings.push(Reading {
                    semantic_class: "number".into(),
                    value: Value::Number(n),
                });
            }
            candidates.push(Span {
                start: i,
                end,
                priority: 3,
                readings,
                source: TagSource::DomainIndependent,
                approx: false,
            });
        }
        if let Some(span) = lexicon_at(tokens, &norms, i, pack) {
            candidates.push(span);
        }
    }

    // Leftmost, then longest, then tagger priority.
    candidates.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then(b.end.cmp(&a.end))
            .then(a.priority.cmp(&b.priority))
    });
    let mut tags = Vec::new();
    let mut next_free = 0;
    for c in candidates {
        if c.start < next_free {
            continue;
        }
        next_free = c.end;
        let surface = tokens[c.start..c.end]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        tags.push(SemanticTag {
            start: c.start,
            end: c.end,
            surface,
            readings: c.readings,
            source: c.source,
            approx: c.approx,
        });
    }
    tags
}

fn independent(start: usize, end: usize, priority: u8, class: &str, value: Value, approx: bool) -> Span {
    Span {
        start,
        end,
        priority,
        readings: vec![Reading {
            semantic_class: class.into(),
            value,
        }],
        source: TagSource::DomainIndependent,
        approx,
    }
}

fn lexicon_at(tokens: &[Token], norms: &[&str], i: usize, pack: &DomainPack) -> Option<Span> {
    let max = pack.lexicon.max_tokens.min(tokens.len() - i);
    for len in (1..=max).rev() {
        let window = &tokens[i..i + len];
        if window.iter().any(|t| t.category == TokenCategory::Punct) {
            continue;
        }
        let key = norms[i..i + len].join(" ");
        let hits = pack.lexicon.lookup(&key);
        if !hits.is_empty() {
            return Some(Span {
                start: i,
                end: i + len,
                priority: 4,
                readings: hits
                    .into_iter()
                    .map(|e| Reading {
                        semantic_class: e.semantic_class.clone(),
                        value: Value::Text(e.canonical.clone()),
                    })
                    .collect(),
                source: TagSource::DomainSpecific,
                approx: false,
            });
        }
    }
    None
}

/// am/pm markers; returns (is_pm, tokens consumed).
fn meridiem(norms: &[&str], i: usize) -> Option<(bool, usize)> {
    let at = |k: usize| norms.get(i + k).copied();
    match at(0)? {
        "am" => Some((false, 1)),
        "pm" => Some((true, 1)),
        "a" if at(1) == Some("m") => Some((false, 2)),
        "p" if at(1) == Some("m") => Some((true, 2)),
        "a" if at(1) == Some(".") && at(2) == Some("m") => Some((false, 3 + usize::from(at(3) == Some(".")))),
        "p" if at(1) == Some(".") && at(2) == Some("m") => Some((true, 3 + usize::from(at(3) == Some(".")))),
        "in" if at(1) == Some("the") => match at(2)? {
            "morning" => Some((false, 3)),
            "afternoon" | "evening" => Some((true, 3)),
            _ => None,
        },
        "tonight" => Some((true, 1)),
        _ => None,
    }
}

/// Spoken minute group: "o'clock", "oh five", "fifteen", "thirty five".
fn minute_words(norms: &[&str], i: usize) -> Option<(u32, usize)> {
    let w = *norms.get(i)?;
    if w == "o'clock" {
        return Some((0, 1));
    }
    if w == "oh" {
        let u = unit(norms.get(i + 1)?)?;
        return (u > 0).then_some((u, 2));
    }
    if let Some(t) = teen(w) {
        return (t >= 10).then_some((t, 1));
    }
    let t = tens(w)?;
    if t > 50 {
        return None;
    }
    match norms.get(i + 1).and_then(|n| unit(n)) {
        Some(u) if u > 0 => Some((t + u, 2)),
        _ => Some((t, 1)),
    }
}

fn to_minutes(h12: u32, m: u32, pm: Option<bool>) -> u32 {
    let h = match pm {
        Some(true) if h12 < 12 => h12 + 12,
        Some(false) if h12 == 12 => 0,
        Some(_) => h12,
        // No marker: flights run 05:00-23:55, so 1-4 reads as afternoon.
        None if (1..=4).contains(&h12) => h12 + 12,
        None => h12,
    };
    let total = h * 60 + m;
    (((total + 2) / 5) * 5) % (24 * 60)
}

/// Recognize a time of day starting at `i`; returns (end, minutes).
pub(crate) fn time_at(tokens: &[Token], norms: &[&str], i: usize) -> Option<(usize, u32)> {
    let tok = &tokens[i];
    match norms[i] {
        "noon" => return Some((i + 1, 12 * 60)),
        "midnight" => return Some((i + 1, 0)),
        "half" | "quarter" if norms.get(i + 1) == Some(&"past") || norms.get(i + 1) == Some(&"to") => {
            let h = hour(tokens.get(i + 2)?)?;
            let mut end = i + 3;
            let pm = meridiem(norms, end).map(|(p, n)| {
                end += n;
                p
            });
            let (h, m) = match (norms[i], norms[i + 1]) {
                ("half", "past") => (h, 30),
                ("quarter", "past") => (h, 15),
                ("quarter", "to") => (if h == 1 { 12 } else { h - 1 }, 45),
                _ => return None,
            };
            return Some((end, to_minutes(h, m, pm)));
        }
        _ => {}
    }

    if tok.category == TokenCategory::Number && tok.norm.contains(':') {
        let (h, m) = tok.norm.split_once(':')?;
        let (h, m): (u32, u32) = (h.parse().ok()?, m.parse().ok()?);
        if h > 23 || m > 59 {
            return None;
        }
        return Some(match meridiem(norms, i + 1) {
            Some((pm, n)) if (1..=12).contains(&h) => (i + 1 + n, to_minutes(h, m, Some(pm))),
            _ if h > 12 || h == 0 || tok.norm.starts_with('0') => (i + 1, to_minutes(h, m, Some(h >= 12))),
            _ => (i + 1, to_minutes(h, m, None)),
        });
    }

    let h = hour(tok)?;
    let number_context = i > 0 && NUMBER_CONTEXT.contains(&norms[i - 1]);
    if tok.category == TokenCategory::Word && !number_context {
        if let Some((m, n)) = minute_words(norms, i + 1) {
            let mut end = i + 1 + n;
            let pm = meridiem(norms, end).map(|(p, k)| {
                end += k;
                p
            });
            return Some((end, to_minutes(h, m, pm)));
        }
    }
    if norms.get(i + 1) == Some(&"o'clock") && !number_context {
        let mut end = i + 2;
        let pm = meridiem(norms, end).map(|(p, k)| {
            end += k;
            p
        });
        return Some((end, to_minutes(h, 0, pm)));
    }
    let (pm, n) = meridiem(norms, i + 1)?;
    Some((i + 1 + n, to_minutes(h, 0, Some(pm))))
}

fn date_at(tokens: &[Token], norms: &[&str], i: usize) -> Option<(usize, String)> {
    match norms[i] {
        "today" => return Some((i + 1, "today".into())),
        "tomorrow" => return Some((i + 1, "tomorrow".into())),
        "yesterday" => return Some((i + 1, "yesterday".into())),
        w if WEEKDAYS.contains(&w) => return Some((i + 1, w.to_string())),
        _ => {}
    }
    let month = MONTHS.iter().position(|m| *m == norms[i])? as u32 + 1;
    let next = tokens.get(i + 1)?;
    let (day, len) = if next.category == TokenCategory::Number {
        let d: u32 = next.norm.parse().ok()?;
        let suffix = matches!(norms.get(i + 2), Some(&("st" | "nd" | "rd" | "th")));
        (d, 1 + usize::from(suffix))
    } else if let Some((_, n)) = ordinal_at(tokens, norms, i + 1) {
        (n as u32, 1)
    } else {
        return None;
    };
    (1..=31)
        .contains(&day)
        .then(|| (i + 1 + len, format!("{month:02}-{day:02}")))
}

fn ordinal_at(tokens: &[Token], norms: &[&str], i: usize) -> Option<(usize, i64)> {
    if let Some(p) = ORDINALS.iter().position(|o| *o == norms[i]) {
        return Some((i + 1, p as i64 + 1));
    }
    if tokens[i].category == TokenCategory::Number && !norms[i].contains(':') {
        if let Some(&("st" | "nd" | "rd" | "th")) = norms.get(i + 1) {
            let n: i64 = norms[i].parse().ok()?;
            return (1..=99).contains(&n).then_some((i + 2, n));
        }
    }
    None
}

/// Digits or spoken digit groups ("four seven two", "four seventy two",
/// "four hundred seventy two").
fn number_at(tokens: &[Token], norms: &[&str], i: usize) -> Option<(usize, i64)> {
    let tok = &tokens[i];
    if tok.category == TokenCategory::Number {
        if tok.norm.contains(':') || tok.norm.len() > 15 {
            return None;
        }
        return Some((i + 1, tok.norm.parse().ok()?));
    }
    let mut digits = String::new();
    let mut j = i;
    while let Some(&w) = norms.get(j) {
        if let Some(u) = unit(w).or_else(|| (w == "oh" && !digits.is_empty()).then_some(0)) {
            if norms.get(j + 1) == Some(&"hundred") && u > 0 {
                let mut value = u * 100;
                let mut k = j + 2;
                if norms.get(k) == Some(&"and") {
                    k += 1;
                }
                if let Some(t) = norms.get(k).and_then(|w| teen(w)) {
                    value += t;
                    k += 1;
                } else if let Some(t) = norms.get(k).and_then(|w| tens(w)) {
                    value += t;
                    k += 1;
                    if let Some(u) = norms.get(k).and_then(|w| unit(w)).filter(|u| *u > 0) {
                        value += u;
                        k += 1;
                    }
                } else if let Some(u) = norms.get(k).and_then(|w| unit(w)).filter(|u| *u > 0) {
                    value += u;
                    k += 1;
                }
                digits.push_str(&value.to_string());
                j = k;
                continue;
            }
            digits.push_str(&u.to_string());
            j += 1;
        } else if let Some(t) = teen(w) {
            digits.push_str(&t.to_string());
            j += 1;
        } else if let Some(t) = tens(w) {
            match norms.get(j + 1).and_then(|n| unit(n)).filter(|u| *u > 0) {
                Some(u) => {
                    digits.push_str(&(t + u).to_string());
                    j += 2;
                }
                None => {
                    digits.push_str(&t.to_string());
                    j += 1;
                }
            }
        } else {
            break;
        }
    }
    if digits.is_empty() || digits.len() > 15 {
        return None;
    }
    // A lone "one" is a pronoun ("the second one") unless a number is expected.
    if j == i + 1 && norms[i] == "one" && !(i > 0 && NUMBER_CONTEXT.contains(&norms[i - 1])) {
        return None;
    }
    Some((j, digits.parse().ok()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn times(s: &str) -> Vec<(u32, bool)> {
        let toks = tokenize(s);
        let norms: Vec<&str> = toks.iter().map(|t| t.norm.as_str()).collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < toks.len() {
            if let Some((end, m)) = time_at(&toks, &norms, i) {
                out.push((m, i > 0 && HEDGES.contains(&norms[i - 1])));
                i = end;
            } else {
                i += 1;
            }
        }
        out
    }

    fn number(s: &str) -> Option<i64> {
        let toks = tokenize(s);
        let norms: Vec<&str> = toks.iter().map(|t| t.norm.as_str()).collect();
        number_at(&toks, &norms, 0).map(|(_, n)| n)
    }

    #[test]
    fn ten_thirty_am_is_630_minutes() {
        assert_eq!(10 * 60 + 30, 630);
        assert_eq!(times("arriving around ten thirty a m"), vec![(630, true)]);
        assert_eq!(times("at 10:30 am"), vec![(630, false)]);
        assert_eq!(times("10:30"), vec![(630, false)]);
    }

    #[test]
    fn time_forms() {
        assert_eq!(times("two thirty pm"), vec![(14 * 60 + 30, false)]);
        assert_eq!(times("two thirty"), vec![(14 * 60 + 30, false)]);
        assert_eq!(times("seven o'clock in the evening"), vec![(19 * 60, false)]);
        assert_eq!(times("9 pm"), vec![(21 * 60, false)]);
        assert_eq!(times("noon"), vec![(720, false)]);
        assert_eq!(times("quarter to eight"), vec![(7 * 60 + 45, false)]);
        assert_eq!(times("half past six p m"), vec![(18 * 60 + 30, false)]);
        assert_eq!(times("ten oh five"), vec![(605, false)]);
        assert_eq!(times("17:45"), vec![(17 * 60 + 45, false)]);
        assert_eq!(times("twelve am"), vec![(0, false)]);
    }

    #[test]
    fn rounds_to_five_minute_grid() {
        assert_eq!(times("10:33"), vec![(635, false)]);
        assert_eq!(times("10:32"), vec![(630, false)]);
        assert_eq!(times("11:58 pm"), vec![(0, false)]);
    }

    #[test]
    fn digit_sequences_are_not_times() {
        assert_eq!(times("flight four seven two"), vec![]);
        assert_eq!(times("flight four fifteen"), vec![]);
        assert_eq!(times("472"), vec![]);
    }

    #[test]
    fn spoken_numbers() {
        assert_eq!(number("four seven two"), Some(472));
        assert_eq!(number("four seventy two"), Some(472));
        assert_eq!(number("four hundred seventy two"), Some(472));
        assert_eq!(number("four hundred and two"), Some(402));
        assert_eq!(number("four oh two"), Some(402));
        assert_eq!(number("one two three four"), Some(1234));
        assert_eq!(number("twelve"), Some(12));
        assert_eq!(number("472"), Some(472));
        assert_eq!(number("one"), None);
        assert_eq!(number("oh"), None);
    }
}
