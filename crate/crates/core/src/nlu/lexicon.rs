//! Framework word categories and cue-word tables, extendable per pack.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::conf::{self, ConfError};

const DEFAULT_WORDS: &str = include_str!("../../data/words.conf");
const DEFAULT_CUES: &str = include_str!("../../data/cues.conf");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WordClass {
    Wh,
    Aux,
    Prep,
    Det,
    Pron,
    Conj,
    Particle,
    Verb,
    Noun,
    Adj,
}

impl WordClass {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "wh" => WordClass::Wh,
            "aux" => WordClass::Aux,
            "prep" => WordClass::Prep,
            "det" => WordClass::Det,
            "pron" => WordClass::Pron,
            "conj" => WordClass::Conj,
            "particle" => WordClass::Particle,
            "verb" => WordClass::Verb,
            "noun" => WordClass::Noun,
            "adj" => WordClass::Adj,
            _ => return None,
        })
    }

    /// Closed-class words never count as unknown content words.
    pub fn is_function_word(self) -> bool {
        !matches!(self, WordClass::Verb | WordClass::Noun | WordClass::Adj)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WordTable {
    words: HashMap<String, WordClass>,
}

impl WordTable {
    pub fn parse(src: &str) -> Result<Self, ConfError> {
        let mut table = WordTable::default();
        table.extend(src)?;
        Ok(table)
    }

    /// Framework defaults, then pack additions; a pack entry overrides the
    /// framework category of the same word.
    pub fn with_overrides(pack_src: Option<&str>) -> Result<Self, ConfError> {
        let mut table = Self::parse(DEFAULT_WORDS).expect("bundled words.conf parses");
        if let Some(src) = pack_src {
            table.extend(src)?;
        }
        Ok(table)
    }

    fn extend(&mut self, src: &str) -> Result<(), ConfError> {
        for section in conf::parse(src, false)? {
            let class = WordClass::parse(&section.kind).ok_or_else(|| ConfError {
                line: section.line,
                reason: format!("unknown word category `{}`", section.kind),
            })?;
            for line in &section.raw {
                for w in line.text.split_whitespace() {
                    self.words.insert(w.to_lowercase(), class);
                }
            }
        }
        Ok(())
    }

    pub fn class_of(&self, word: &str) -> Option<WordClass> {
        self.words.get(word).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CueTable {
    /// (role, cue tokens), in file order.
    cues: Vec<(String, Vec<String>)>,
}

impl CueTable {
    pub fn parse(src: &str) -> Result<Self, ConfError> {
        let mut table = CueTable::default();
        table.extend(src)?;
        Ok(table)
    }

    pub fn with_overrides(pack_src: Option<&str>) -> Result<Self, ConfError> {
        let mut table = Self::parse(DEFAULT_CUES).expect("bundled cues.conf parses");
        if let Some(src) = pack_src {
            table.extend(src)?;
        }
        Ok(table)
    }

    fn extend(&mut self, src: &str) -> Result<(), ConfError> {
        for section in conf::parse(src, false)? {
            if section.kind.is_empty() {
                return Err(ConfError {
                    line: section.raw.first().map(|l| l.number).unwrap_or(1),
                    reason: "cue outside of a [role] section".into(),
                });
            }
            for line in &section.raw {
                let tokens = line.text.split_whitespace().map(str::to_lowercase).collect();
                self.cues.push((section.kind.clone(), tokens));
            }
        }
        Ok(())
    }

    pub fn has_role(&self, role: &str) -> bool {
        self.cues.iter().any(|(r, _)| r == role)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.cues.iter().map(|(r, t)| (r.as_str(), t.as_slice()))
    }

    /// Roles whose cue ends exactly at `end` (exclusive) in `norms`,
    /// longest cue first.
    pub fn roles_ending_at(&self, norms: &[&str], end: usize) -> Vec<(&str, usize)> {
        let mut hits: Vec<(&str, usize)> = self
            .cues
            .iter()
            .filter(|(_, cue)| cue.len() <= end && norms[end - cue.len()..end] == cue.iter().map(String::as_str).collect::<Vec<_>>()[..])
            .map(|(role, cue)| (role.as_str(), cue.len()))
            .collect();
        hits.sort_by_key(|h| std::cmp::Reverse(h.1));
        hits
    }

    /// Every cue word, for vocabulary checks.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.cues.iter().flat_map(|(_, t)| t.iter().map(String::as_str))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_load() {
        let w = WordTable::with_overrides(None).unwrap();
        assert_eq!(w.class_of("when"), Some(WordClass::Wh));
        assert_eq!(w.class_of("does"), Some(WordClass::Aux));
        assert_eq!(w.class_of("plane"), None);
        let c = CueTable::with_overrides(None).unwrap();
        assert!(c.has_role("departure"));
        assert!(c.has_role("arrival"));
    }

    #[test]
    fn pack_words_override() {
        let w = WordTable::with_overrides(Some("[noun]\nflight plane\n[verb]\nso\n")).unwrap();
        assert_eq!(w.class_of("plane"), Some(WordClass::Noun));
        assert_eq!(w.class_of("so"), Some(WordClass::Verb));
        assert!(WordTable::with_overrides(Some("[bogus]\nx\n")).is_err());
    }

    #[test]
    fn cue_lookup_prefers_longest() {
        let c = CueTable::with_overrides(Some("[departure]\ngoing out of\n")).unwrap();
        let norms = ["flights", "out", "of", "boston"];
        let roles = c.roles_ending_at(&norms, 3);
        assert_eq!(roles[0], ("departure", 2));
        assert!(c.roles_ending_at(&norms, 1).is_empty());
    }
}
