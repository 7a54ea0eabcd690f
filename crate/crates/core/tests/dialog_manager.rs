mod common;

use std::sync::Arc;

use proptest::prelude::*;

use common::*;
use pure_dialog::dialog::template::TemplateAct;
use pure_dialog::dialog::{
    decide_state, select_informative_field, DialogConfig, DialogError, DialogueContext, LowerState, StateDecision, UpperState,
};
use pure_dialog::nlu::understand;
use pure_dialog::query::{LocalQuerier, Querier, QueryConstraint, QueryError, QueryResultSet, TableStore};
use pure_dialog::schema::DomainPack;
use pure_dialog::value::ColumnType;
use pure_dialog::Value;

/// One turn through the manager, returning the new context as well.
fn turn(pack: &DomainPack, q: &dyn Querier, ctx: &DialogueContext, u: &str) -> (StateDecision, DialogueContext) {
    let mut c = ctx.clone();
    c.begin_turn();
    let (_, x) = understand(u, pack, &c);
    decide_state(&c, &x, pack, &q, &DialogConfig::default()).expect("querier up")
}

fn run(pack: &DomainPack, q: &dyn Querier, script: &[&str]) -> Vec<(StateDecision, DialogueContext)> {
    let mut ctx = DialogueContext::default();
    script
        .iter()
        .map(|u| {
            let (d, next) = turn(pack, q, &ctx, u);
            ctx = next.clone();
            (d, next)
        })
        .collect()
}

#[test]
fn delta_query_is_out_of_bounds_without_querying() {
    let (p, s) = (pack("flights"), store("flights"));
    let d = decide(&p, &s, &DialogueContext::default(), "what time does Delta flight 472 reach Dallas?");
    assert_eq!(d.state, UpperState::OutOfBounds);
    assert!(!d.queried);
    assert_eq!(d.classification_queries, 0);
    assert_eq!(d.template.act, TemplateAct::NotifyOob);
    assert_eq!(d.template.text("term"), Some("Delta"));
    assert!(d.template.text("explanation").is_some_and(|e| !e.is_empty()));
    assert!(d.template.text("reentry_hint").is_some_and(|e| !e.is_empty()));
}

#[test]
fn unknown_word_asks_for_rephrase() {
    let (p, s) = (pack("flights"), store("flights"));
    let d = decide(&p, &s, &DialogueContext::default(), "what time does my plane leave");
    assert_eq!(d.state, UpperState::OutOfBounds);
    assert_eq!(d.template.act, TemplateAct::NotifyUnknownWord);
    assert_eq!(d.template.text("word"), Some("plane"));
}

#[test]
fn same_cities_are_inconsistent() {
    let (p, s) = (pack("flights"), store("flights"));
    let ctx = context(&p, &[("departure_city", city("Boston"), false)], None);
    let d = decide(&p, &s, &ctx, "to Boston");
    assert_eq!(d.state, UpperState::Inconsistent);
    assert_eq!(d.template.text("rule"), Some("distinct_cities"));
}

#[test]
fn unique_flight_number_succeeds() {
    let (p, s) = (pack("flights"), store("flights"));
    let d = decide(&p, &s, &context(&p, &[], Some("arrival_info")), "flight 472");
    assert_eq!(d.state, UpperState::Success);
    assert_eq!(d.match_count, Some(1));
    // Oracle: enumerate the store.
    let col = s.column_index("fltNumber").unwrap();
    let n = (0..200).filter(|&i| s.matching(&[]).unwrap()[i][col] == Value::Number(472)).count();
    assert_eq!(n, 1);
}

#[test]
fn repeat_copies_last_template() {
    let (p, s) = (pack("flights"), store("flights"));
    let q = LocalQuerier::new(Arc::clone(&s));
    let turns = run(&p, &q, &["from Newark", "repeat that"]);
    assert_eq!(turns[1].0.state, UpperState::StatusQuo);
    assert_eq!(turns[1].0.template, turns[0].0.template);
}

#[test]
fn success_resets_bindings_and_carries_query_type() {
    let (p, s) = (pack("flights"), store("flights"));
    let q = LocalQuerier::new(Arc::clone(&s));
    let turns = run(&p, &q, &["flight 472", "when does it arrive?", "flight 717", "help", "flight 597"]);
    let (d, ctx) = &turns[1];
    assert_eq!(d.state, UpperState::Success);
    assert!(ctx.bindings.is_empty());
    assert_eq!(ctx.query_type.as_deref(), Some("arrival_info"));
    // A new query right after a success adopts the query type.
    assert_eq!(turns[2].0.state, UpperState::Success);
    // After a turn with no new query it lapses.
    assert_eq!(turns[3].0.state, UpperState::MetaQuery);
    assert_eq!(turns[4].0.state, UpperState::UnknownQuery);
}

/// A flight table: 14 rows share cities and a departure hour, and differ
/// in gate, status and arrival time.
fn many_store() -> Arc<TableStore> {
    let base = store("flights");
    let cols: Vec<(String, ColumnType)> = base
        .column_names()
        .into_iter()
        .map(|c| {
            let t = match c.as_str() {
                "fltNumber" => ColumnType::Number,
                "depTime" | "arrTime" => ColumnType::Time,
                _ => ColumnType::Text,
            };
            (c, t)
        })
        .collect();
    let statuses = ["on time", "on time", "delayed", "landed"];
    let rows = (0..14)
        .map(|i| {
            cols.iter()
                .map(|(c, _)| match c.as_str() {
                    "fltNumber" => Value::Number(300 + i),
                    "depCity" => Value::text("Denver"),
                    "arrCity" => Value::text("Phoenix"),
                    "depTime" => Value::Time(600 + 5 * (i as u32 % 3)),
                    "arrTime" => Value::Time(700 + 5 * (i as u32 % 7)),
                    "gate" => Value::text(format!("B{}", i % 2)),
                    "status" => Value::text(statuses[i as usize % 4]),
                    other => panic!("unexpected column {other}"),
                })
                .collect()
        })
        .collect();
    Arc::new(TableStore::new(cols, rows).unwrap())
}

#[test]
fn get_constraint_asks_most_informative_field() {
    let p = pack("flights");
    let s = many_store();
    let q = LocalQuerier::new(Arc::clone(&s));
    let turns = run(&p, &q, &["from Denver to Phoenix leaving around 10 am"]);
    let d = &turns[0].0;
    assert_eq!(d.state, UpperState::ManyMatches);
    assert_eq!(d.sub_state, Some(LowerState::GetConstraint));
    assert_eq!(d.match_count, Some(14));
    // Oracle over the unbound non-key fields, in schema order.
    let rows = s.matching(&[]).unwrap();
    let mut best: Option<(u64, String)> = None;
    for f in &p.schema.fields {
        if turns[0].1.is_bound(&f.name) || Some(&f.name) == p.schema.key_field.as_ref() {
            continue;
        }
        let col = s.column_index(&f.db_column).unwrap();
        let mut vals: Vec<String> = rows.iter().map(|r| r[col].to_string().to_lowercase()).collect();
        vals.sort();
        let mut sq = 0u64;
        for g in vals.chunk_by(|a, b| a == b) {
            sq += (g.len() as u64).pow(2);
        }
        if best.as_ref().is_none_or(|(b, _)| sq < *b) {
            best = Some((sq, f.name.clone()));
        }
    }
    assert_eq!(d.template.text("field"), best.map(|(_, f)| f).as_deref());
}

#[test]
fn affirmed_relaxation_never_conflicts_again() {
    let (p, s) = (pack("flights"), store("flights"));
    let q = LocalQuerier::new(Arc::clone(&s));
    let turns = run(&p, &q, &["from Miami to Houston arriving at 6 pm", "yes", "yes", "yes"]);
    let (relax, ctx) = &turns[3];
    assert_eq!(relax.sub_state, Some(LowerState::RelaxConstraint));
    let offered = ctx.pending_relax.clone().expect("relax offer");
    assert!(offered.count >= 1);
    let (d, _) = turn(&p, &q, ctx, "yes");
    assert_ne!(d.state, UpperState::DatabaseConflict);
    assert_eq!(d.match_count, Some(offered.count));
}

#[test]
fn confirm_deny_clears_and_asks_again() {
    let (p, s) = (pack("flights"), store("flights"));
    let q = LocalQuerier::new(Arc::clone(&s));
    let turns = run(&p, &q, &["from Miami to Houston arriving at 6 pm", "no"]);
    let (first, ctx0) = &turns[0];
    assert_eq!(first.sub_state, Some(LowerState::ConfirmValue));
    let asked = first.template.text("field").unwrap().to_string();
    assert!(ctx0.is_bound(&asked));
    let (d, ctx) = &turns[1];
    assert!(!ctx.is_bound(&asked));
    assert_eq!(d.template.act, TemplateAct::AskField);
    assert_eq!(d.template.text("field"), Some(asked.as_str()));
}

struct Down;

impl Querier for Down {
    fn execute(&self, _: &[QueryConstraint]) -> Result<QueryResultSet, QueryError> {
        Err(QueryError::Unavailable("connection refused".into()))
    }
}

#[test]
fn unreachable_backend_is_an_error() {
    let p = pack("flights");
    let ctx = context(&p, &[], Some("arrival_info"));
    let mut c = ctx.clone();
    c.begin_turn();
    let (_, x) = understand("flight 472", &p, &c);
    let got = decide_state(&c, &x, &p, &Down, &DialogConfig::default());
    assert!(matches!(got, Err(DialogError::QuerierUnavailable(_))));
    // Pre-query states never touch the back-end.
    let (_, x) = understand("from Newark", &p, &c);
    assert!(decide_state(&c, &x, &p, &Down, &DialogConfig::default()).is_ok());
}

#[test]
fn few_threshold_is_configurable() {
    let (p, s) = (pack("flights"), store("flights"));
    let q = LocalQuerier::new(Arc::clone(&s));
    let mut c = context(&p, &[("departure_city", city("Newark"), false), ("arrival_city", city("Dallas"), false)], None);
    c.begin_turn();
    let (_, x) = understand("arriving around 10:30 am", &p, &c);
    let (d, _) = decide_state(&c, &x, &p, &q, &DialogConfig { few_threshold: 2 }).unwrap();
    assert_eq!(d.state, UpperState::ManyMatches);
    let (d, _) = decide_state(&c, &x, &p, &q, &DialogConfig { few_threshold: 3 }).unwrap();
    assert_eq!(d.state, UpperState::FewMatches);
}

const UTTERANCES: &[&str] = &[
    "from Newark", "to Dallas", "Newark", "the departure city", "the arrival city", "around 10:30 am", "leaving at 8 am",
    "flight 472", "when does it arrive", "what gate", "is it on time", "yes", "no", "I don't know", "repeat that", "help",
    "what cities do you know about", "I said Dallas, not Dulles", "to Dulles", "from Boston to Boston", "the first one",
    "the second one", "delta", "my plane", "", "notify me when it lands", "1234", "4321", "9999", "from Miami to Houston",
    "arriving at 6 pm", "from Boston to Chicago", "leaving around 8:30 am", "on time", "landed",
];

fn script() -> impl Strategy<Value = Vec<&'static str>> {
    proptest::collection::vec(proptest::sample::select(UTTERANCES), 1..14)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn every_turn_is_well_formed(s in script()) {
        let p = pack("flights");
        let q = LocalQuerier::new(store("flights"));
        let max_probes = p.schema.relaxable_fields.iter().map(|r| r.widen_steps.len() as u32).max().unwrap_or(0);
        for (d, ctx) in run(&p, &q, &s) {
            prop_assert!(d.template.is_slot_complete(), "{:?}", d.template);
            prop_assert_eq!(d.queried, d.state.is_post_query() && !d.continuation || d.classification_queries > 0);
            if !d.state.is_post_query() {
                prop_assert_eq!(d.classification_queries + d.probe_queries, 0);
            } else if !d.continuation {
                prop_assert_eq!(d.classification_queries, 1);
            }
            prop_assert!(d.probe_queries <= max_probes + 1);
            if let Some(sub) = d.sub_state {
                prop_assert_eq!(sub.owner(), d.state);
            }
            if let Some(sub) = ctx.sub_state {
                prop_assert_eq!(sub.owner(), ctx.upper_state);
            }
            if let Some(f) = &ctx.expected_field {
                prop_assert!(p.schema.field(f).is_some());
            }
        }
    }

    #[test]
    fn turns_are_deterministic(s in script()) {
        let p = pack("flights");
        let q = LocalQuerier::new(store("flights"));
        prop_assert_eq!(run(&p, &q, &s), run(&p, &q, &s));
    }

    #[test]
    fn informative_field_matches_oracle(
        n_rows in 2usize..1000,
        alphabets in proptest::collection::vec(1u8..10, 1..=8),
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<Value>> = (0..n_rows)
            .map(|_| alphabets.iter().map(|&a| Value::Number(i64::from(rng.random_range(0..a)))).collect())
            .collect();
        let names: Vec<(String, usize)> = (0..alphabets.len()).map(|i| (format!("f{i}"), i)).collect();
        // E(f) compared as integers: sum of squared counts over a shared N.
        let score = |f: usize| {
            let mut counts = std::collections::HashMap::new();
            for r in &rows {
                *counts.entry(r[f].clone()).or_insert(0u64) += 1;
            }
            counts.values().map(|c| c * c).sum::<u64>()
        };
        let want = (0..alphabets.len()).min_by_key(|&f| (score(f), f)).map(|f| format!("f{f}"));
        prop_assert_eq!(select_informative_field(&rows, &names), want);
    }
}
