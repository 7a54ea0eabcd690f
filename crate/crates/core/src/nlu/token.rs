use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenCategory {
    Word,
    Number,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// Surface text as typed.
    pub text: String,
    /// Lowercased form used for all matching.
    pub norm: String,
    pub index: usize,
    pub category: TokenCategory,
}

impl Token {
    pub fn is_word(&self) -> bool {
        self.category == TokenCategory::Word
    }
}

const PUNCT: &[char] = &[',', '.', '?', '!', ';', '"', '(', ')', '[', ']'];

/// Split an utterance into word, number and punctuation tokens.
///
/// Apostrophes stay inside words (`don't`, `o'clock`), `10:30` stays one
/// number token, and digit/letter boundaries are split (`10am` → `10 am`).
pub fn tokenize(utterance: &str) -> Vec<Token> {
    let mut pieces: Vec<String> = Vec::new();
    for raw in utterance.split_whitespace() {
        let mut current = String::new();
        for ch in raw.chars() {
            if PUNCT.contains(&ch) || (ch == ':' && !current.chars().all(|c| c.is_ascii_digit())) {
                flush(&mut current, &mut pieces);
                pieces.push(ch.to_string());
                continue;
            }
            if let Some(prev) = current.chars().last() {
                let boundary = (prev.is_ascii_digit() && ch.is_alphabetic())
                    || (prev.is_alphabetic() && ch.is_ascii_digit());
                if boundary {
                    flush(&mut current, &mut pieces);
                }
            }
            current.push(ch);
        }
        flush(&mut current, &mut pieces);
    }

    pieces
        .into_iter()
        .enumerate()
        .map(|(index, text)| {
            let category = if text.chars().all(|c| PUNCT.contains(&c) || c == ':' || c == '\'') {
                TokenCategory::Punct
            } else if is_numeric(&text) {
                TokenCategory::Number
            } else {
                TokenCategory::Word
            };
            Token {
                norm: text.to_lowercase(),
                text,
                index,
                category,
            }
        })
        .collect()
}

fn flush(current: &mut String, pieces: &mut Vec<String>) {
    let trimmed = current.trim_matches(|c| c == '\'' || c == ':');
    if !trimmed.is_empty() {
        pieces.push(trimmed.to_string());
    }
    current.clear();
}

fn is_numeric(s: &str) -> bool {
    let mut parts = s.split(':');
    let ok = |p: Option<&str>| p.is_some_and(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()));
    match s.matches(':').count() {
        0 => ok(parts.next()),
        1 => ok(parts.next()) && ok(parts.next()),
        _ => false,
    }
}

/// Normalized key for a phrase: lowercase non-punctuation tokens joined by
/// single spaces.
pub fn normalize_phrase(phrase: &str) -> String {
    tokenize(phrase)
        .into_iter()
        .filter(|t| t.category != TokenCategory::Punct)
        .map(|t| t.norm)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norms(s: &str) -> Vec<String> {
        tokenize(s).into_iter().map(|t| t.norm).collect()
    }

    #[test]
    fn splits_punctuation_and_keeps_contractions() {
        assert_eq!(norms("I said Dallas, not Dulles."), ["i", "said", "dallas", ",", "not", "dulles", "."]);
        assert_eq!(norms("i don't know"), ["i", "don't", "know"]);
        assert_eq!(norms("ten o'clock?"), ["ten", "o'clock", "?"]);
    }

    #[test]
    fn numbers_and_clock_times() {
        let toks = tokenize("flight 472 at 10:30am");
        assert_eq!(toks[1].category, TokenCategory::Number);
        assert_eq!(toks[3].text, "10:30");
        assert_eq!(toks[3].category, TokenCategory::Number);
        assert_eq!(toks[4].norm, "am");
        assert!(toks.iter().enumerate().all(|(i, t)| t.index == i));
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
        assert_eq!(normalize_phrase("  Big   Apple "), "big apple");
        assert_eq!(normalize_phrase("Dickens, Charles"), "dickens charles");
    }
}
