//! Finite-state phrase chunker over coarse word categories.
//!
//! | category run                              | chunk     |
//! |-------------------------------------------|-----------|
//! | wh word                                   | `WH`      |
//! | aux/verb run                              | `VP`      |
//! | prep run + following NP run               | `PP`      |
//! | det/pron/adj/noun/tagged run              | `NP`      |
//! | unrecognized content words                | `UNKNOWN` |
//! | conjunctions, particles, punctuation      | `PARTICLE`|
//!
//! Tagged spans act as NP heads and are never split.

use serde::{Deserialize, Serialize};

use super::lexicon::WordClass;
use super::tagger::SemanticTag;
use super::token::{Token, TokenCategory};
use crate::schema::DomainPack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ChunkKind {
    Np,
    Pp,
    Vp,
    Wh,
    Unknown,
    Particle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseChunk {
    pub kind: ChunkKind,
    pub start: usize,
    pub end: usize,
    /// Indices into the tag list of the tags inside this chunk.
    pub tags: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Tagged,
    Word(WordClass),
    Unknown,
    Punct,
}

impl Category {
    fn np_like(self) -> bool {
        matches!(
            self,
            Category::Tagged
                | Category::Word(WordClass::Det | WordClass::Pron | WordClass::Adj | WordClass::Noun)
        )
    }
}

/// Coarse category of each token. Words outside the word table that the
/// pack still knows (cue words, query triggers, class names, out-of-scope
/// terms) count as nouns.
pub fn categorize(tokens: &[Token], tags: &[SemanticTag], pack: &DomainPack) -> Vec<Category> {
    tokens
        .iter()
        .map(|t| {
            if tags.iter().any(|g| g.covers(t.index)) {
                return Category::Tagged;
            }
            match t.category {
                TokenCategory::Punct => Category::Punct,
                TokenCategory::Number => Category::Tagged,
                TokenCategory::Word => match pack.words.class_of(&t.norm) {
                    Some(c) => Category::Word(c),
                    None if is_pack_vocabulary(&t.norm, pack) => Category::Word(WordClass::Noun),
                    None => Category::Unknown,
                },
            }
        })
        .collect()
}

/// Whether the pack itself uses `word` somewhere outside the lexicon.
pub fn is_pack_vocabulary(word: &str, pack: &DomainPack) -> bool {
    let schema = &pack.schema;
    pack.cues.words().any(|w| w == word)
        || schema
            .query_types
            .iter()
            .flat_map(|q| q.trigger_patterns.iter().flatten())
            .chain(schema.actions.iter().flat_map(|a| a.triggers.iter().flatten()))
            .any(|w| w == word)
        || schema.fields.iter().any(|f| {
            f.label.split(' ').any(|l| plural_of(l, word))
                || f.semantic_class.split('_').any(|c| plural_of(c, word))
        })
        || schema
            .out_of_scope_terms
            .iter()
            .any(|(t, _)| t.split(' ').any(|w| w == word))
}

/// `word` is `base` or a plural of it.
pub fn plural_of(base: &str, word: &str) -> bool {
    word == base
        || word.strip_suffix('s') == Some(base)
        || (base.ends_with('y') && word.strip_suffix("ies") == Some(&base[..base.len() - 1]))
}

pub fn chunk(tokens: &[Token], tags: &[SemanticTag], pack: &DomainPack) -> Vec<PhraseChunk> {
    let cats = categorize(tokens, tags, pack);
    chunk_categories(&cats, tags)
}

pub fn chunk_categories(cats: &[Category], tags: &[SemanticTag]) -> Vec<PhraseChunk> {
    let n = cats.len();
    let run = |mut j: usize, pred: &dyn Fn(Category) -> bool| {
        while j < n && pred(cats[j]) {
            j += 1;
        }
        j
    };
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < n {
        let (kind, end) = match cats[i] {
            Category::Word(WordClass::Wh) => (ChunkKind::Wh, i + 1),
            Category::Word(WordClass::Aux | WordClass::Verb) => (
                ChunkKind::Vp,
                run(i, &|c| matches!(c, Category::Word(WordClass::Aux | WordClass::Verb))),
            ),
            Category::Word(WordClass::Prep) => {
                let preps = run(i, &|c| c == Category::Word(WordClass::Prep));
                (ChunkKind::Pp, run(preps, &|c| c.np_like()))
            }
            c if c.np_like() => (ChunkKind::Np, run(i, &|c| c.np_like())),
            Category::Unknown => (ChunkKind::Unknown, run(i, &|c| c == Category::Unknown)),
            _ => (ChunkKind::Particle, i + 1),
        };
        let tag_ids = tags
            .iter()
            .enumerate()
            .filter(|(_, t)| t.start >= i && t.end <= end)
            .map(|(k, _)| k)
            .collect();
        chunks.push(PhraseChunk {
            kind,
            start: i,
            end,
            tags: tag_ids,
        });
        i = end;
    }
    chunks
}
