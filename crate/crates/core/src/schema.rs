//! Domain packs: the per-domain files that port the engine to a new
//! information-access application.
//!
//! A pack directory holds `schema.conf`, `db-map.conf`, `lexicon.conf`,
//! `consistency.conf`, `render-rules.conf`, `help.conf` and `scrape.conf`,
//! plus optional `words.conf` / `cues.conf` extending the framework word
//! lists. See `docs/domain-pack-format.md` for the grammar of each file.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::conf::{self, Section};
use crate::interactor::{HelpTexts, RuleSet};
use crate::nlu::lexicon::{CueTable, WordTable};
use crate::nlu::token::normalize_phrase;
use crate::query::cgi::ScrapeSpec;

/// Classes produced by the built-in taggers, available to every pack.
pub const BUILTIN_CLASSES: &[&str] = &["time_of_day", "date", "number", "ordinal"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PackError {
    #[error("missing pack file `{0}`")]
    MissingFile(String),
    #[error("{file}:{line}: {reason}")]
    ParseError {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("{file}: reference to undefined `{symbol}`")]
    DanglingReference { file: String, symbol: String },
}

fn parse_err(file: &str, line: usize, reason: impl Into<String>) -> PackError {
    PackError::ParseError {
        file: file.to_string(),
        line,
        reason: reason.into(),
    }
}

fn dangling(file: &str, symbol: impl Into<String>) -> PackError {
    PackError::DanglingReference {
        file: file.to_string(),
        symbol: symbol.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldSpec {
    pub name: String,
    pub semantic_class: String,
    pub prompt_text: String,
    /// Short noun phrase used in generated replies ("arrival city").
    pub label: String,
    /// Cue role (see `cues.conf`) that selects this field when a class
    /// feeds several fields.
    pub role: Option<String>,
    pub db_column: String,
    pub cgi_param: Option<String>,
}

/// A domain-declared numeric class carved out of the generic number tagger.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumericClass {
    pub name: String,
    pub min: i64,
    pub max: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryTypeSpec {
    pub name: String,
    /// Each pattern is a normalized token sequence.
    pub trigger_patterns: Vec<Vec<String>>,
    /// Schema fields or display columns reported on success.
    pub answer_fields: Vec<String>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    NotEqual,
    LessThan,
    GreaterThan,
}

impl Relation {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "not_equal" => Some(Relation::NotEqual),
            "less_than" => Some(Relation::LessThan),
            "greater_than" => Some(Relation::GreaterThan),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyRule {
    pub id: String,
    pub relation: Relation,
    pub left_field: String,
    pub right_field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelaxPolicy {
    pub field: String,
    /// Half-widths in minutes, strictly increasing.
    pub widen_steps: Vec<u32>,
}

/// A post-success action guarded by the VERIFY_USER / SIDE_EFFECTS
/// sub-dialogue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpec {
    pub name: String,
    /// Verb phrase naming the action ("set up a landing notice").
    pub label: String,
    pub triggers: Vec<Vec<String>>,
    pub offer: String,
    pub side_effect: String,
    pub done: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApplicationSchema {
    pub domain_name: String,
    /// Field that identifies a row; enumerated matches are selected by it.
    pub key_field: Option<String>,
    /// Fallback question order when rows are not inspectable (CGI).
    pub ask_order: Vec<String>,
    pub fields: Vec<FieldSpec>,
    pub numeric_classes: Vec<NumericClass>,
    pub query_types: Vec<QueryTypeSpec>,
    pub mandatory_sets: Vec<Vec<String>>,
    pub consistency_rules: Vec<ConsistencyRule>,
    pub out_of_scope_terms: Vec<(String, String)>,
    pub relaxable_fields: Vec<RelaxPolicy>,
    pub actions: Vec<ActionSpec>,
    pub demo_pins: Vec<String>,
}

impl ApplicationSchema {
    pub fn field(&self, name: &str) -> Option<&FieldSpec> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    pub fn fields_of_class<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a FieldSpec> + 'a {
        self.fields.iter().filter(move |f| f.semantic_class == class)
    }

    pub fn query_type(&self, name: &str) -> Option<&QueryTypeSpec> {
        self.query_types.iter().find(|q| q.name == name)
    }

    pub fn relax_policy(&self, field: &str) -> Option<&RelaxPolicy> {
        self.relaxable_fields.iter().find(|r| r.field == field)
    }

    pub fn numeric_class_for(&self, n: i64) -> Option<&NumericClass> {
        self.numeric_classes.iter().find(|c| (c.min..=c.max).contains(&n))
    }

    pub fn out_of_scope(&self, term: &str) -> Option<&str> {
        self.out_of_scope_terms
            .iter()
            .find(|(t, _)| t == term)
            .map(|(_, e)| e.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconEntry {
    /// Normalized surface: lowercase tokens joined by single spaces.
    pub surface: String,
    pub canonical: String,
    pub semantic_class: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    pub entries: Vec<LexiconEntry>,
    /// Longest surface, in tokens.
    pub max_tokens: usize,
}

impl Lexicon {
    pub fn new(entries: Vec<LexiconEntry>) -> Self {
        let max_tokens = entries
            .iter()
            .map(|e| e.surface.split(' ').count())
            .max()
            .unwrap_or(0);
        Lexicon { entries, max_tokens }
    }

    /// Entries whose surface equals the normalized phrase, in file order.
    pub fn lookup(&self, normalized: &str) -> Vec<&LexiconEntry> {
        self.entries.iter().filter(|e| e.surface == normalized).collect()
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.entries.iter().any(|e| e.semantic_class == class)
    }

    /// Distinct canonical values of a class in file order.
    pub fn canonical_values(&self, class: &str) -> Vec<String> {
        let mut seen = HashSet::new();
        self.entries
            .iter()
            .filter(|e| e.semantic_class == class)
            .filter(|e| seen.insert(e.canonical.as_str()))
            .map(|e| e.canonical.clone())
            .collect()
    }
}

/// Map a user term to `(canonical, class)` pairs: case-insensitive exact
/// match over the whole surface, in lexicon order.
pub fn resolve_user_term(
    term: &str,
    class_filter: Option<&str>,
    lexicon: &Lexicon,
) -> Vec<(String, String)> {
    let key = normalize_phrase(term);
    lexicon
        .lookup(&key)
        .into_iter()
        .filter(|e| class_filter.is_none_or(|c| c == e.semantic_class))
        .map(|e| (e.canonical.clone(), e.semantic_class.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbMap {
    pub dataset_file: Option<String>,
    pub field_columns: BTreeMap<String, String>,
    pub cgi_params: BTreeMap<String, String>,
    /// Non-field columns that answers may report (name → column).
    pub display_columns: Vec<(String, String)>,
}

impl DbMap {
    pub fn display_column(&self, name: &str) -> Option<&str> {
        self.display_columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, c)| c.as_str())
    }
}

/// Everything the engine needs for one domain. Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainPack {
    pub schema: ApplicationSchema,
    pub lexicon: Lexicon,
    pub db_map: DbMap,
    pub rules: RuleSet,
    pub help: HelpTexts,
    pub scrape: Option<ScrapeSpec>,
    pub words: WordTable,
    pub cues: CueTable,
}

impl DomainPack {
    pub fn name(&self) -> &str {
        &self.schema.domain_name
    }

    /// Column backing a field or display name.
    pub fn column_for(&self, name: &str) -> Option<&str> {
        self.schema
            .field(name)
            .map(|f| f.db_column.as_str())
            .or_else(|| self.db_map.display_column(name))
    }

    /// Human label for a field or display name.
    pub fn label_for<'a>(&'a self, name: &'a str) -> &'a str {
        self.schema
            .field(name)
            .map(|f| f.label.as_str())
            .unwrap_or(name)
    }

    pub fn dataset_path(&self, root: &Path) -> Option<PathBuf> {
        self.db_map.dataset_file.as_ref().map(|f| root.join(f))
    }
}

pub const SCHEMA_FILE: &str = "schema.conf";
pub const DB_MAP_FILE: &str = "db-map.conf";
pub const LEXICON_FILE: &str = "lexicon.conf";
pub const CONSISTENCY_FILE: &str = "consistency.conf";
pub const RENDER_FILE: &str = "render-rules.conf";
pub const HELP_FILE: &str = "help.conf";
pub const SCRAPE_FILE: &str = "scrape.conf";
pub const WORDS_FILE: &str = "words.conf";
pub const CUES_FILE: &str = "cues.conf";

/// The raw text of each pack file. Lets packs be built from memory as
/// well as from a directory.
#[derive(Debug, Clone, Default)]
pub struct PackSources {
    pub schema: String,
    pub db_map: String,
    pub lexicon: String,
    pub consistency: String,
    pub render_rules: String,
    pub help: String,
    pub scrape: Option<String>,
    pub words: Option<String>,
    pub cues: Option<String>,
}

impl PackSources {
    pub fn read_dir(root: &Path) -> Result<Self, PackError> {
        let required = |name: &str| -> Result<String, PackError> {
            fs::read_to_string(root.join(name))
                .map_err(|_| PackError::MissingFile(name.trim_end_matches(".conf").to_string()))
        };
        let optional = |name: &str| fs::read_to_string(root.join(name)).ok();
        Ok(PackSources {
            schema: required(SCHEMA_FILE)?,
            db_map: required(DB_MAP_FILE)?,
            lexicon: required(LEXICON_FILE)?,
            consistency: required(CONSISTENCY_FILE)?,
            render_rules: required(RENDER_FILE)?,
            help: required(HELP_FILE)?,
            scrape: optional(SCRAPE_FILE),
            words: optional(WORDS_FILE),
            cues: optional(CUES_FILE),
        })
    }
}

/// Load and cross-validate the pack in `root`.
pub fn load_domain_pack(root: impl AsRef<Path>) -> Result<DomainPack, PackError> {
    let sources = PackSources::read_dir(root.as_ref())?;
    build_domain_pack(&sources)
}

pub fn build_domain_pack(src: &PackSources) -> Result<DomainPack, PackError> {
    let mut schema = parse_schema(&src.schema)?;
    let db_map = parse_db_map(&src.db_map)?;
    schema.consistency_rules = parse_consistency(&src.consistency)?;
    let lexicon = parse_lexicon(&src.lexicon)?;

    for field in &mut schema.fields {
        field.db_column = db_map
            .field_columns
            .get(&field.name)
            .cloned()
            .ok_or_else(|| dangling(DB_MAP_FILE, format!("column for field {}", field.name)))?;
        field.cgi_param = db_map.cgi_params.get(&field.name).cloned();
    }

    let words = WordTable::with_overrides(src.words.as_deref())
        .map_err(|e| parse_err(WORDS_FILE, e.line, e.reason))?;
    let cues = CueTable::with_overrides(src.cues.as_deref())
        .map_err(|e| parse_err(CUES_FILE, e.line, e.reason))?;
    let rules = RuleSet::with_domain_rules(&src.render_rules)?;
    let help = HelpTexts::with_domain_help(&src.help)?;
    let scrape = src
        .scrape
        .as_deref()
        .map(ScrapeSpec::parse)
        .transpose()?;

    let pack = DomainPack {
        schema,
        lexicon,
        db_map,
        rules,
        help,
        scrape,
        words,
        cues,
    };
    validate(&pack)?;
    Ok(pack)
}

fn parse_schema(src: &str) -> Result<ApplicationSchema, PackError> {
    let file = SCHEMA_FILE;
    let sections = conf::parse(src, true).map_err(|e| parse_err(file, e.line, e.reason))?;
    let mut schema = ApplicationSchema {
        domain_name: String::new(),
        key_field: None,
        ask_order: Vec::new(),
        fields: Vec::new(),
        numeric_classes: Vec::new(),
        query_types: Vec::new(),
        mandatory_sets: Vec::new(),
        consistency_rules: Vec::new(),
        out_of_scope_terms: Vec::new(),
        relaxable_fields: Vec::new(),
        actions: Vec::new(),
        demo_pins: Vec::new(),
    };
    let required = |s: &Section, key: &str| -> Result<String, PackError> {
        s.get(key)
            .map(|e| e.value.clone())
            .ok_or_else(|| parse_err(file, s.line, format!("[{} {}] needs `{key}`", s.kind, s.name)))
    };
    let patterns = |value: &str| -> Vec<Vec<String>> {
        value
            .split('|')
            .map(normalize_phrase)
            .filter(|p| !p.is_empty())
            .map(|p| p.split(' ').map(str::to_string).collect())
            .collect()
    };

    for s in &sections {
        if let Some(line) = s.raw.first() {
            return Err(parse_err(file, line.number, "expected `key = value`"));
        }
        match s.kind.as_str() {
            "domain" => {
                schema.domain_name = required(s, "name")?;
                schema.key_field = s.get("key_field").map(|e| e.value.clone());
                schema.ask_order = s.get("ask_order").map(|e| conf::list(&e.value)).unwrap_or_default();
            }
            "field" => {
                if schema.fields.iter().any(|f| f.name == s.name) {
                    return Err(parse_err(file, s.line, format!("duplicate field `{}`", s.name)));
                }
                schema.fields.push(FieldSpec {
                    name: s.name.clone(),
                    semantic_class: required(s, "class")?,
                    prompt_text: required(s, "prompt")?,
                    label: s
                        .get("label")
                        .map(|e| e.value.clone())
                        .unwrap_or_else(|| s.name.replace('_', " ")),
                    role: s.get("role").map(|e| e.value.clone()),
                    db_column: String::new(),
                    cgi_param: None,
                });
            }
            "class" => {
                let range = required(s, "numeric")?;
                let (lo, hi) = range
                    .split_once("..")
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                    .ok_or_else(|| parse_err(file, s.line, "numeric range must be `min..max`"))?;
                schema.numeric_classes.push(NumericClass {
                    name: s.name.clone(),
                    min: lo,
                    max: hi,
                });
            }
            "query" => schema.query_types.push(QueryTypeSpec {
                name: s.name.clone(),
                trigger_patterns: patterns(&required(s, "triggers")?),
                answer_fields: conf::list(&required(s, "answer")?),
                label: s
                    .get("label")
                    .map(|e| e.value.clone())
                    .unwrap_or_else(|| s.name.replace('_', " ")),
            }),
            "mandatory" => {
                for e in s.get_all("set") {
                    schema.mandatory_sets.push(conf::list(&e.value));
                }
            }
            "out_of_scope" => {
                for e in &s.entries {
                    schema
                        .out_of_scope_terms
                        .push((normalize_phrase(&e.key), e.value.clone()));
                }
            }
            "relax" => {
                let mut steps = Vec::new();
                for item in conf::list(&required(s, "steps")?) {
                    steps.push(
                        item.parse::<u32>()
                            .map_err(|_| parse_err(file, s.line, format!("bad relax step `{item}`")))?,
                    );
                }
                if steps.is_empty() || steps.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(parse_err(file, s.line, "relax steps must be strictly increasing"));
                }
                schema.relaxable_fields.push(RelaxPolicy {
                    field: s.name.clone(),
                    widen_steps: steps,
                });
            }
            "action" => schema.actions.push(ActionSpec {
                name: s.name.clone(),
                label: s
                    .get("label")
                    .map(|e| e.value.clone())
                    .unwrap_or_else(|| s.name.replace('_', " ")),
                triggers: patterns(&required(s, "triggers")?),
                offer: required(s, "offer")?,
                side_effect: required(s, "side_effect")?,
                done: required(s, "done")?,
            }),
            "accounts" => {
                for e in s.get_all("pin") {
                    schema.demo_pins.push(e.value.clone());
                }
            }
            "" => {
                if let Some(e) = s.entries.first() {
                    return Err(parse_err(file, e.line, "entry outside of any section"));
                }
            }
            other => {
                return Err(parse_err(file, s.line, format!("unknown section `{other}`")));
            }
        }
    }
    if schema.domain_name.is_empty() {
        return Err(parse_err(file, 1, "missing [domain] name"));
    }
    if schema.ask_order.is_empty() {
        schema.ask_order = schema.fields.iter().map(|f| f.name.clone()).collect();
    }
    Ok(schema)
}

fn parse_db_map(src: &str) -> Result<DbMap, PackError> {
    let file = DB_MAP_FILE;
    let sections = conf::parse(src, true).map_err(|e| parse_err(file, e.line, e.reason))?;
    let mut map = DbMap {
        dataset_file: None,
        field_columns: BTreeMap::new(),
        cgi_params: BTreeMap::new(),
        display_columns: Vec::new(),
    };
    for s in &sections {
        if let Some(line) = s.raw.first() {
            return Err(parse_err(file, line.number, "expected `key = value`"));
        }
        let target = match s.kind.as_str() {
            "dataset" => {
                map.dataset_file = s.get("file").map(|e| e.value.clone());
                continue;
            }
            "columns" => &mut map.field_columns,
            "cgi" => &mut map.cgi_params,
            "display" => {
                map.display_columns
                    .extend(s.entries.iter().map(|e| (e.key.clone(), e.value.clone())));
                continue;
            }
            other => return Err(parse_err(file, s.line, format!("unknown section `{other}`"))),
        };
        for e in &s.entries {
            if target.insert(e.key.clone(), e.value.clone()).is_some() {
                return Err(parse_err(file, e.line, format!("duplicate mapping for `{}`", e.key)));
            }
        }
    }
    Ok(map)
}

fn parse_consistency(src: &str) -> Result<Vec<ConsistencyRule>, PackError> {
    let file = CONSISTENCY_FILE;
    let sections = conf::parse(src, true).map_err(|e| parse_err(file, e.line, e.reason))?;
    let mut rules = Vec::new();
    for s in sections {
        if s.kind != "rule" {
            return Err(parse_err(file, s.line, "expected [rule <id>] sections"));
        }
        let get = |key: &str| {
            s.get(key)
                .map(|e| e.value.clone())
                .ok_or_else(|| parse_err(file, s.line, format!("rule `{}` needs `{key}`", s.name)))
        };
        let relation_text = get("relation")?;
        let relation = Relation::parse(&relation_text)
            .ok_or_else(|| parse_err(file, s.line, format!("unknown relation `{relation_text}`")))?;
        rules.push(ConsistencyRule {
            id: s.name.clone(),
            relation,
            left_field: get("left")?,
            right_field: get("right")?,
            message: get("message")?,
        });
    }
    Ok(rules)
}

fn parse_lexicon(src: &str) -> Result<Lexicon, PackError> {
    let file = LEXICON_FILE;
    let mut entries: Vec<LexiconEntry> = Vec::new();
    let mut seen = HashSet::new();
    for line in conf::lines(src) {
        let parts: Vec<&str> = line.text.split('|').map(str::trim).collect();
        let [surface, class, canonical] = parts[..] else {
            return Err(parse_err(file, line.number, "expected `surface | class | canonical`"));
        };
        let surface = normalize_phrase(surface);
        if surface.is_empty() || class.is_empty() || canonical.is_empty() {
            return Err(parse_err(file, line.number, "empty surface, class or canonical"));
        }
        if !seen.insert((surface.clone(), class.to_string(), canonical.to_string())) {
            return Err(parse_err(file, line.number, "duplicate lexicon entry"));
        }
        entries.push(LexiconEntry {
            surface,
            canonical: canonical.to_string(),
            semantic_class: class.to_string(),
        });
    }
    Ok(Lexicon::new(entries))
}

fn validate(pack: &DomainPack) -> Result<(), PackError> {
    let schema = &pack.schema;
    let has_field = |n: &str| schema.field(n).is_some();

    if let Some(key) = &schema.key_field {
        if !has_field(key) {
            return Err(dangling(SCHEMA_FILE, key));
        }
    }
    for f in &schema.ask_order {
        if !has_field(f) {
            return Err(dangling(SCHEMA_FILE, f));
        }
    }
    for q in &schema.query_types {
        for a in &q.answer_fields {
            if !has_field(a) && pack.db_map.display_column(a).is_none() {
                return Err(dangling(SCHEMA_FILE, a));
            }
        }
    }
    if !schema.mandatory_sets.iter().any(|s| !s.is_empty()) {
        return Err(parse_err(SCHEMA_FILE, 1, "at least one non-empty mandatory set is required"));
    }
    for f in schema.mandatory_sets.iter().flatten() {
        if !has_field(f) {
            return Err(dangling(SCHEMA_FILE, f));
        }
    }
    for r in &schema.relaxable_fields {
        let field = schema.field(&r.field).ok_or_else(|| dangling(SCHEMA_FILE, &r.field))?;
        if field.semantic_class != "time_of_day" {
            return Err(parse_err(
                SCHEMA_FILE,
                1,
                format!("relaxable field `{}` must be a time_of_day field", r.field),
            ));
        }
    }
    for rule in &schema.consistency_rules {
        let left = schema
            .field(&rule.left_field)
            .ok_or_else(|| dangling(CONSISTENCY_FILE, &rule.left_field))?;
        let right = schema
            .field(&rule.right_field)
            .ok_or_else(|| dangling(CONSISTENCY_FILE, &rule.right_field))?;
        if left.name == right.name {
            return Err(parse_err(CONSISTENCY_FILE, 1, format!("rule `{}` compares a field with itself", rule.id)));
        }
        if rule.relation != Relation::NotEqual && left.semantic_class != right.semantic_class {
            return Err(parse_err(
                CONSISTENCY_FILE,
                1,
                format!("rule `{}` orders fields of different classes", rule.id),
            ));
        }
    }
    for name in pack.db_map.field_columns.keys().chain(pack.db_map.cgi_params.keys()) {
        if !has_field(name) {
            return Err(dangling(DB_MAP_FILE, name));
        }
    }
    for f in &schema.fields {
        let class = f.semantic_class.as_str();
        let produced = BUILTIN_CLASSES.contains(&class)
            || schema.numeric_classes.iter().any(|c| c.name == class)
            || pack.lexicon.has_class(class);
        if !produced {
            return Err(dangling(SCHEMA_FILE, format!("class {class}")));
        }
        if let Some(role) = &f.role {
            if !pack.cues.has_role(role) {
                return Err(dangling(CUES_FILE, role));
            }
        }
    }
    if let Some(scrape) = &pack.scrape {
        for f in &schema.fields {
            if let Some(p) = &f.cgi_param {
                if !scrape.knows_param(p) {
                    return Err(dangling(SCRAPE_FILE, p));
                }
            }
        }
    }
    pack.rules.validate().map_err(|(line, reason)| parse_err(RENDER_FILE, line, reason))?;
    pack.help
        .validate(schema)
        .map_err(|(line, reason)| parse_err(HELP_FILE, line, reason))?;
    Ok(())
}
