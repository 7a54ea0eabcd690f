//! Three-layer understanding: syntax (tagging, chunking), semantics
//! (readings per span) and pragmatics (fields and acts in context).

pub mod acts;
pub mod chunk;
pub mod extract;
pub mod lexicon;
pub mod merge;
pub mod tagger;
pub mod token;

use serde::{Deserialize, Serialize};

pub use acts::{detect_acts, Act, ActReport, Correction};
pub use chunk::{ChunkKind, PhraseChunk};
pub use extract::{extract, Clarification, ExtractionResult};
pub use merge::{merge, MergeError, MergeOutcome};
pub use tagger::{annotate, SemanticTag};
pub use token::Token;

use crate::dialog::context::DialogueContext;
use crate::schema::DomainPack;

/// Context-free analysis of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analysis {
    pub tokens: Vec<Token>,
    pub tags: Vec<SemanticTag>,
    pub chunks: Vec<PhraseChunk>,
    pub acts: ActReport,
}

pub fn analyze(utterance: &str, pack: &DomainPack) -> Analysis {
    let (tokens, tags) = annotate(utterance, pack);
    let chunks = chunk::chunk(&tokens, &tags, pack);
    let acts = detect_acts(&tokens, &tags, pack);
    Analysis {
        tokens,
        tags,
        chunks,
        acts,
    }
}

/// Analyse and extract in one step.
pub fn understand(utterance: &str, pack: &DomainPack, context: &DialogueContext) -> (Analysis, ExtractionResult) {
    let a = analyze(utterance, pack);
    let x = extract(&a.tokens, &a.tags, &a.chunks, &a.acts, pack, context);
    (a, x)
}
