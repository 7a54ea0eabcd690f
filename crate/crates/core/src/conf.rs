//! Reader for the line-oriented sectioned configuration files that make up
//! a domain pack.
//!
//! ```text
//! # comment
//! [kind name]
//! key = value
//! free-form line
//! ```
//!
//! Lines before the first header belong to an anonymous section. Lines
//! without `=` are kept as raw lines for formats that define their own
//! record syntax (lexicon, render rules, help).

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Line {
    pub number: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Section {
    pub kind: String,
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
    pub raw: Vec<Line>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a Entry> + 'a {
        self.entries.iter().filter(move |e| e.key == key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfError {
    pub line: usize,
    pub reason: String,
}

/// Meaningful lines: trimmed, with blanks and `#` comments dropped.
pub fn lines(src: &str) -> impl Iterator<Item = Line> + '_ {
    src.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim();
        (!t.is_empty() && !t.starts_with('#')).then(|| Line {
            number: i + 1,
            text: t.to_string(),
        })
    })
}

/// Parse sections; `split_entries` controls whether `key = value` lines are
/// split or kept raw.
pub fn parse(src: &str, split_entries: bool) -> Result<Vec<Section>, ConfError> {
    let mut sections = vec![Section::default()];
    for line in lines(src) {
        let text = &line.text;
        if text.starts_with('[') {
            let inner = text
                .strip_prefix('[')
                .and_then(|t| t.strip_suffix(']'))
                .ok_or_else(|| ConfError {
                    line: line.number,
                    reason: "unterminated section header".into(),
                })?;
            let mut parts = inner.split_whitespace();
            let kind = parts.next().ok_or_else(|| ConfError {
                line: line.number,
                reason: "empty section header".into(),
            })?;
            let name = parts.collect::<Vec<_>>().join(" ");
            sections.push(Section {
                kind: kind.to_string(),
                name,
                line: line.number,
                ..Section::default()
            });
            continue;
        }
        let current = sections.last_mut().expect("at least one section");
        match text.split_once('=') {
            Some((k, v)) if split_entries => {
                let key = k.trim();
                if key.is_empty() {
                    return Err(ConfError {
                        line: line.number,
                        reason: "missing key before '='".into(),
                    });
                }
                current.entries.push(Entry {
                    line: line.number,
                    key: key.to_string(),
                    value: v.trim().to_string(),
                });
            }
            _ => current.raw.push(line),
        }
    }
    if sections[0].entries.is_empty() && sections[0].raw.is_empty() {
        sections.remove(0);
    }
    Ok(sections)
}

/// Split a comma-separated list, dropping empty items.
pub fn list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
