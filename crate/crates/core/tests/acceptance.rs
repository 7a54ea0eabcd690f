//! Acceptance criteria 1 to 9. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use common::*;
use pure_dialog::dialog::{select_informative_field, DialogueContext, LowerState, UpperState};
use pure_dialog::flight::mock::MockSite;
use pure_dialog::flight::{check_guarantees, generate_dataset, to_store};
use pure_dialog::query::{build_cgi_request, exec_local, scrape_rows, QueryConstraint, TableStore};
use pure_dialog::schema::DomainPack;
use pure_dialog::service::{read_transcript, replay, Backend, SessionConfig, SessionManager, TurnResponse};
use pure_dialog::Value;

type Outcome = Result<String, String>;

use UpperState::*;

struct Scenario {
    name: &'static str,
    script: &'static [&'static str],
    states: &'static [UpperState],
    final_reply: &'static str,
}

const GREETING: &str = "Welcome to American Airlines flight information. How can I help you?";

fn flight_scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "initial",
            script: &[],
            states: &[Initial],
            final_reply: GREETING,
        },
        Scenario {
            name: "quit",
            script: &["bye"],
            states: &[Initial, Quit],
            final_reply: "Goodbye, and thanks for calling.",
        },
        Scenario {
            name: "meta query",
            script: &["what cities do you know about"],
            states: &[Initial, MetaQuery],
            final_reply: "I know about Atlanta, Boston, Charlotte, Chicago, Dallas, Denver, Detroit, Dulles, Houston and Las Vegas, and 10 more.",
        },
        Scenario {
            name: "out of bounds",
            script: &["what time does Delta flight 472 reach Dallas?", "what time does my plane leave?"],
            states: &[Initial, OutOfBounds, OutOfBounds],
            final_reply: "I don't know the word \"plane\". Could you say that another way?",
        },
        Scenario {
            name: "status quo",
            script: &["from Newark to Dallas", "I don't know"],
            states: &[Initial, MandatoryFields, StatusQuo],
            final_reply: "That's all right. About what time does the flight leave?",
        },
        Scenario {
            name: "ambiguous",
            script: &["Newark"],
            states: &[Initial, Ambiguous],
            final_reply: "Is Newark the departure city or arrival city?",
        },
        Scenario {
            name: "inconsistent",
            script: &["flights from Boston to Boston"],
            states: &[Initial, Inconsistent],
            final_reply: "The departure city and the arrival city can't be the same. Which would you like to change, the departure city or the arrival city?",
        },
        Scenario {
            name: "correction",
            script: &["from Newark to Dulles", "I said Dallas, not Dulles"],
            states: &[Initial, MandatoryFields, Correction],
            final_reply: "OK, the arrival city is Dallas, not Dulles. About what time does the flight arrive?",
        },
        Scenario {
            name: "mandatory fields",
            script: &["from Newark"],
            states: &[Initial, MandatoryFields],
            final_reply: "Which city is the flight going to?",
        },
        Scenario {
            name: "success",
            script: &["flight 472", "when does it arrive?"],
            states: &[Initial, UnknownQuery, Success],
            final_reply: "Here is what I found: the flight number is 472, the arrival city is Dallas and the arrival time is 10:30 AM. I can notify you when flight 472 lands.",
        },
        Scenario {
            name: "database conflict",
            script: &["from Miami to Houston arriving at 6 pm", "yes", "yes", "yes", "yes"],
            states: &[Initial, DatabaseConflict, DatabaseConflict, DatabaseConflict, DatabaseConflict, FewMatches],
            final_reply: "I found 2 matches. Which one do you mean?\n1. Flight 974 from Miami to Houston, leaving at 12:10 PM and arriving at 2:00 PM\n2. Flight 894 from Miami to Houston, leaving at 12:40 PM and arriving at 2:30 PM",
        },
        Scenario {
            name: "unknown query",
            script: &["flight 472"],
            states: &[Initial, UnknownQuery],
            final_reply: "What would you like to know: the gate, flight status, arrival time or departure time?",
        },
        Scenario {
            name: "few matches",
            script: &["flights from Newark to Dallas arriving around 10:30 am"],
            states: &[Initial, FewMatches],
            final_reply: "I found 3 matches. Which one do you mean?\n1. Flight 717 from Newark to Dallas, leaving at 6:55 AM and arriving at 9:45 AM\n2. Flight 472 from Newark to Dallas, leaving at 7:40 AM and arriving at 10:30 AM\n3. Flight 597 from Newark to Dallas, leaving at 8:50 AM and arriving at 11:40 AM",
        },
        Scenario {
            name: "many matches",
            script: &["flights from Boston to Chicago leaving around 8:30 am", "I don't know", "on time"],
            states: &[Initial, ManyMatches, ManyMatches, Success],
            final_reply: "Here is what I found: the flight number is 853, the departure city is Boston and the departure time is 8:25 AM. I can notify you when flight 853 lands.",
        },
    ]
}

/// Run a suite; returns every turn's response for later checks.
fn run_suite(m: &SessionManager, domain: &str, suite: &[Scenario]) -> Result<Vec<TurnResponse>, String> {
    let mut all = Vec::new();
    for sc in suite {
        let (id, greeting, responses) = run_script(m, domain, Backend::Local, sc.script);
        let states: Vec<UpperState> = std::iter::once(Initial).chain(responses.iter().map(|r| r.state)).collect();
        if states != sc.states {
            return Err(format!("{}: states {:?}, expected {:?}", sc.name, states, sc.states));
        }
        let last = responses.last().map(|r| r.reply.clone()).unwrap_or(greeting);
        if last != sc.final_reply {
            return Err(format!("{}: final reply {last:?}, expected {:?}", sc.name, sc.final_reply));
        }
        if m.transcript(&id).map_err(|e| e.to_string())?.len() != sc.script.len() + 1 {
            return Err(format!("{}: transcript length", sc.name));
        }
        all.extend(responses);
    }
    Ok(all)
}

fn criterion_1(m: &SessionManager) -> Outcome {
    let start = Instant::now();
    let suite = flight_scenarios();
    let mut covered: Vec<UpperState> = suite.iter().flat_map(|s| s.states.iter().copied()).collect();
    covered.sort();
    covered.dedup();
    if covered != UpperState::ALL {
        return Err(format!("states covered {covered:?}"));
    }
    run_suite(m, "flights", &suite)?;
    let took = start.elapsed();
    if took.as_secs_f64() >= 5.0 {
        return Err(format!("suite took {took:?}"));
    }
    Ok(format!("{} dialogues, all 14 states, {:.0?}", suite.len(), took))
}

// ---------------------------------------------------------------- 2

/// A context plus utterance that, alone, yields its state.
struct Trigger {
    state: UpperState,
    binds: Vec<(&'static str, Value, bool)>,
    query_type: Option<&'static str>,
    utterance: &'static str,
}

fn triggers() -> Vec<Trigger> {
    let t = |state, binds: Vec<(&'static str, Value, bool)>, query_type, utterance| Trigger {
        state,
        binds,
        query_type,
        utterance,
    };
    vec![
        t(StatusQuo, vec![("departure_city", city("Newark"), false), ("arrival_city", city("Dallas"), false)], None, "I don't know"),
        t(Ambiguous, vec![], None, "Newark"),
        t(Inconsistent, vec![("departure_city", city("Boston"), false)], None, "to Boston"),
        t(
            Correction,
            vec![("departure_city", city("Newark"), false), ("arrival_city", city("Dulles"), false)],
            None,
            "I said Dallas, not Dulles",
        ),
        t(MandatoryFields, vec![], None, "from Newark"),
        t(Success, vec![], Some("arrival_info"), "flight 472"),
        t(
            DatabaseConflict,
            vec![("departure_city", city("Miami"), false), ("arrival_city", city("Houston"), false)],
            None,
            "arriving at 6 pm",
        ),
        t(UnknownQuery, vec![], None, "flight 472"),
        t(
            FewMatches,
            vec![("departure_city", city("Newark"), false), ("arrival_city", city("Dallas"), false)],
            None,
            "arriving around 10:30 am",
        ),
        t(
            ManyMatches,
            vec![("departure_city", city("Boston"), false), ("arrival_city", city("Chicago"), false)],
            None,
            "leaving around 8:30 am",
        ),
    ]
}

struct Pair {
    first: UpperState,
    second: UpperState,
    ctx: DialogueContext,
    utterance: String,
}

fn order_pairs(pack: &DomainPack) -> Vec<Pair> {
    let mut pairs = Vec::new();
    let trig = triggers();
    let ctx_of = |t: &Trigger| context(pack, &t.binds, t.query_type);

    // Quit, help and an out-of-scope term combined with every later trigger.
    for (first, prefix) in [(Quit, "bye, "), (MetaQuery, "help, "), (OutOfBounds, "delta, ")] {
        let mut later: Vec<&Trigger> = trig.iter().filter(|t| t.state > first).collect();
        if first < OutOfBounds {
            pairs.push(Pair {
                first,
                second: OutOfBounds,
                ctx: DialogueContext::default(),
                utterance: format!("{prefix}what time does my plane leave"),
            });
        }
        if first == Quit {
            pairs.push(Pair {
                first,
                second: MetaQuery,
                ctx: DialogueContext::default(),
                utterance: "help me, goodbye".to_string(),
            });
        }
        later.sort_by_key(|t| t.state);
        for t in later {
            pairs.push(Pair {
                first,
                second: t.state,
                ctx: ctx_of(t),
                utterance: format!("{prefix}{}", t.utterance),
            });
        }
    }

    // No new information while a later state's condition already holds.
    let full = |binds: Vec<(&'static str, Value, bool)>, qt: Option<&str>| context(pack, &binds, qt);
    let nb = "departure_city";
    let ab = "arrival_city";
    let sq = [
        (MandatoryFields, full(vec![(nb, city("Newark"), false)], None)),
        (Success, full(vec![("flight_number", Value::Number(472), false)], Some("arrival_info"))),
        (
            DatabaseConflict,
            full(vec![(nb, city("Miami"), false), (ab, city("Houston"), false), ("arrival_time", clock(18, 0), false)], None),
        ),
        (UnknownQuery, full(vec![("flight_number", Value::Number(472), false)], None)),
        (
            FewMatches,
            full(vec![(nb, city("Newark"), false), (ab, city("Dallas"), false), ("arrival_time", clock(10, 30), true)], None),
        ),
        (
            ManyMatches,
            full(vec![(nb, city("Boston"), false), (ab, city("Chicago"), false), ("departure_time", clock(8, 30), true)], None),
        ),
    ];
    for (second, ctx) in sq {
        pairs.push(Pair {
            first: StatusQuo,
            second,
            ctx,
            utterance: "I don't know".to_string(),
        });
    }

    // An ambiguous term next to each later trigger.
    for t in trig.iter().filter(|t| t.state > Ambiguous) {
        let utterance = match t.state {
            Correction => "I said Dallas, not Dulles. Newark?".to_string(),
            _ => format!("{} Newark", t.utterance),
        };
        pairs.push(Pair {
            first: Ambiguous,
            second: t.state,
            ctx: ctx_of(t),
            utterance,
        });
    }

    // Inconsistency against correction, mandatory and query states.
    let p = |first, second, ctx, u: &str| Pair {
        first,
        second,
        ctx,
        utterance: u.to_string(),
    };
    pairs.push(p(
        Inconsistent,
        Correction,
        full(vec![(nb, city("Boston"), false), (ab, city("Chicago"), false)], None),
        "I said Boston, not Chicago",
    ));
    pairs.push(p(Inconsistent, MandatoryFields, DialogueContext::default(), "from Boston to Boston"));
    pairs.push(p(Inconsistent, Success, full(vec![], Some("arrival_info")), "flight 472 from Boston to Boston"));
    pairs.push(p(Inconsistent, UnknownQuery, DialogueContext::default(), "flight 472 from Boston to Boston"));

    // A correction whose result would satisfy a later state.
    pairs.push(p(
        Correction,
        MandatoryFields,
        full(vec![(nb, city("Newark"), false), (ab, city("Dulles"), false)], None),
        "I said Dallas, not Dulles",
    ));
    pairs.push(p(
        Correction,
        Success,
        full(vec![("flight_number", Value::Number(471), false)], Some("arrival_info")),
        "I said 472, not 471",
    ));
    pairs.push(p(
        Correction,
        UnknownQuery,
        full(vec![("flight_number", Value::Number(471), false)], None),
        "I said 472, not 471",
    ));
    pairs.push(p(
        Correction,
        DatabaseConflict,
        full(vec![(nb, city("Miami"), false), (ab, city("Dulles"), false), ("arrival_time", clock(18, 0), false)], None),
        "I said Houston, not Dulles",
    ));
    pairs.push(p(
        Correction,
        FewMatches,
        full(vec![(nb, city("Newark"), false), (ab, city("Dulles"), false), ("arrival_time", clock(10, 30), true)], None),
        "I said Dallas, not Dulles",
    ));
    pairs.push(p(
        Correction,
        ManyMatches,
        full(vec![(nb, city("Boston"), false), (ab, city("Dulles"), false), ("departure_time", clock(8, 30), true)], None),
        "I said Chicago, not Dulles",
    ));
    pairs
}

fn criterion_2(pack: &DomainPack, store: &Arc<TableStore>) -> Outcome {
    // Every trigger must produce its own state when alone.
    for t in triggers() {
        let got = state_of(pack, store, &context(pack, &t.binds, t.query_type), t.utterance);
        if got != t.state {
            return Err(format!("trigger {:?} alone gave {got}, expected {}", t.utterance, t.state));
        }
    }
    let pairs = order_pairs(pack);
    let mut failures = Vec::new();
    for p in &pairs {
        assert!(p.first < p.second);
        let got = state_of(pack, store, &p.ctx, &p.utterance);
        if got != p.first {
            failures.push(format!("({}, {}) {:?} gave {got}", p.first, p.second, p.utterance));
        }
    }
    if pairs.len() < 30 {
        return Err(format!("only {} pairs", pairs.len()));
    }
    if failures.is_empty() {
        Ok(format!("{}/{} ordered pairs", pairs.len(), pairs.len()))
    } else {
        Err(format!("{} of {} pairs failed: {}", failures.len(), pairs.len(), failures.join("; ")))
    }
}

// ---------------------------------------------------------------- 3

fn criterion_3(m: &SessionManager, pack: &DomainPack) -> Outcome {
    let turns = run_suite(m, "flights", &flight_scenarios())?;
    let max_probes = pack
        .schema
        .relaxable_fields
        .iter()
        .map(|r| r.widen_steps.len() as u32)
        .max()
        .unwrap_or(0);
    let (mut pre, mut post, mut cont) = (0, 0, 0);
    for (i, r) in turns.iter().enumerate() {
        let d = &r.debug;
        if !r.state.is_post_query() {
            pre += 1;
            if d.classification_queries != 0 || d.probe_queries != 0 {
                return Err(format!("turn {i} in {} queried {} times", r.state, d.classification_queries + d.probe_queries));
            }
        } else if d.continuation {
            // Lower-layer turns continue a sub-dialogue; at most one query
            // plus relaxation probes.
            cont += 1;
            if d.classification_queries > 1 || d.probe_queries > max_probes {
                return Err(format!("sub-dialogue turn {i} ({}) made {d:?}", r.state));
            }
        } else {
            post += 1;
            if d.classification_queries != 1 {
                return Err(format!("turn {i} in {} made {} classification queries", r.state, d.classification_queries));
            }
        }
    }
    Ok(format!("{pre} pre-query turns at 0, {post} post-query turns at 1, {cont} sub-dialogue turns bounded"))
}

// ---------------------------------------------------------------- 4

/// Brute force: tally each field's values with a sorted scan and compare
/// E(f) = sum(count^2) / N as exact fractions.
fn oracle_argmin(rows: &[Vec<Value>], fields: &[usize]) -> Option<usize> {
    let n = rows.len() as u128;
    let mut best: Option<(u128, usize)> = None;
    for (pos, &f) in fields.iter().enumerate() {
        let mut vals: Vec<String> = rows.iter().map(|r| r[f].to_string().to_lowercase()).collect();
        vals.sort();
        let mut sum_sq: u128 = 0;
        let mut i = 0;
        while i < vals.len() {
            let mut j = i;
            while j < vals.len() && vals[j] == vals[i] {
                j += 1;
            }
            sum_sq += ((j - i) as u128).pow(2);
            i = j;
        }
        // E(f) = sum_sq / n and n is shared, so compare a_sq * n with b_sq * n.
        let scaled = sum_sq * n;
        if best.is_none_or(|(b, _)| scaled < b) {
            best = Some((scaled, pos));
        }
    }
    best.map(|(_, pos)| pos)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..100 {
        let n_rows = rng.random_range(2..=1000);
        let n_fields = rng.random_range(1..=6);
        // Small alphabets make ties and near-ties common.
        let alphabets: Vec<u32> = (0..n_fields).map(|_| rng.random_range(1..=12)).collect();
        let rows: Vec<Vec<Value>> = (0..n_rows)
            .map(|_| {
                alphabets
                    .iter()
                    .map(|&a| match rng.random_range(0..3) {
                        0 => Value::Number(i64::from(rng.random_range(0..a))),
                        1 => Value::text(format!("v{}", rng.random_range(0..a))),
                        _ => Value::text(if rng.random_bool(0.5) { "X" } else { "x" }),
                    })
                    .collect()
            })
            .collect();
        let names: Vec<(String, usize)> = (0..n_fields).map(|i| (format!("f{i}"), i)).collect();
        let got = select_informative_field(&rows, &names);
        let want = oracle_argmin(&rows, &(0..n_fields).collect::<Vec<_>>()).map(|p| format!("f{p}"));
        if got != want {
            return Err(format!("trial {trial}: got {got:?}, oracle {want:?}"));
        }
    }
    Ok("100/100 slices agree with the exhaustive oracle".into())
}

// ---------------------------------------------------------------- 5

const WINDOWS: [u32; 4] = [0, 120, 240, 480];

/// A random constraint set that some airline form accepts.
pub fn random_constraints(rng: &mut ChaCha8Rng, rows: &[pure_dialog::flight::FlightRow]) -> Vec<QueryConstraint> {
    let pick = &rows[rng.random_range(0..rows.len())];
    let city = |rng: &mut ChaCha8Rng, own: &str| -> Value {
        if rng.random_bool(0.7) {
            Value::text(own)
        } else {
            Value::text(pure_dialog::flight::CITIES[rng.random_range(0..20)])
        }
    };
    let time = |rng: &mut ChaCha8Rng, own: u32| -> u32 {
        if rng.random_bool(0.6) {
            own
        } else {
            300 + 5 * rng.random_range(0..228)
        }
    };
    let time_c = |rng: &mut ChaCha8Rng, col: &str, own: u32| -> QueryConstraint {
        let w = WINDOWS[rng.random_range(0..4)];
        let t = time(rng, own);
        if w == 0 && rng.random_bool(0.5) {
            QueryConstraint::eq(col, Value::Time(t))
        } else {
            QueryConstraint::within(col, t, w)
        }
    };
    let mut out = Vec::new();
    match rng.random_range(0..3) {
        0 => {
            let n = if rng.random_bool(0.8) { i64::from(pick.flight_number) } else { rng.random_range(100..1000) };
            out.push(QueryConstraint::eq("fltNumber", Value::Number(n)));
        }
        1 => {
            out.push(QueryConstraint::eq("depCity", city(rng, &pick.departure_city)));
            out.push(QueryConstraint::eq("arrCity", city(rng, &pick.arrival_city)));
            out.push(time_c(rng, "arrTime", pick.arrival_time));
        }
        _ => {
            out.push(QueryConstraint::eq("depCity", city(rng, &pick.departure_city)));
            out.push(QueryConstraint::eq("arrCity", city(rng, &pick.arrival_city)));
            out.push(time_c(rng, "depTime", pick.departure_time));
        }
    }
    // Optional extras.
    if rng.random_bool(0.2) && !out.iter().any(|c| c.column == "depTime") {
        out.push(time_c(rng, "depTime", pick.departure_time));
    }
    if rng.random_bool(0.2) && !out.iter().any(|c| c.column == "arrTime") {
        out.push(time_c(rng, "arrTime", pick.arrival_time));
    }
    if rng.random_bool(0.2) {
        let s = if rng.random_bool(0.7) { pick.status.clone() } else { "delayed".to_string() };
        out.push(QueryConstraint::eq("status", Value::text(s)));
    }
    out
}

fn multiset(rows: &[Vec<Value>]) -> BTreeMap<Vec<Value>, usize> {
    let mut m = BTreeMap::new();
    for r in rows {
        *m.entry(r.clone()).or_insert(0) += 1;
    }
    m
}

fn criterion_5(pack: &DomainPack) -> Outcome {
    let rows = generate_dataset(7, 200);
    let store = to_store(&rows);
    let site = MockSite::new(rows.clone());
    let spec = pack.scrape.as_ref().ok_or("flights pack has no scrape spec")?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut nonempty = 0;
    for i in 0..200 {
        let c = random_constraints(&mut rng, &rows);
        let local = exec_local(&store, &c).map_err(|e| format!("set {i}: local {e}"))?;
        let req = build_cgi_request(&c, pack).map_err(|e| format!("set {i}: build {e}"))?;
        let (status, html) = site.handle_request(&req.path_and_query());
        if status != 200 {
            return Err(format!("set {i}: site answered {status} to {}", req.path_and_query()));
        }
        let scraped = scrape_rows(&html, spec).map_err(|e| format!("set {i}: scrape {e}"))?;
        if local.count != scraped.count || multiset(&local.rows) != multiset(&scraped.rows) {
            return Err(format!(
                "set {i} {}: local {} rows, scraped {}",
                req.path_and_query(),
                local.count,
                scraped.count
            ));
        }
        nonempty += usize::from(local.count > 0);
    }
    Ok(format!("200/200 constraint sets agree ({nonempty} non-empty)"))
}

// ---------------------------------------------------------------- 6

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let m = manager().with_persistence(dir.path()).map_err(|e| e.to_string())?;
    let mut scripts: Vec<(&str, Backend, bool, Vec<&str>)> = flight_scenarios()
        .into_iter()
        .filter(|s| !s.script.is_empty())
        .map(|s| ("flights", Backend::Local, false, s.script.to_vec()))
        .collect();
    scripts.push((
        "flights",
        Backend::Cgi { url: None },
        false,
        vec!["from Miami to Houston arriving at 6 pm", "yes", "yes", "yes", "yes", "the first one"],
    ));
    scripts.push((
        "flights",
        Backend::Local,
        true,
        vec!["flights from Boston to Chicago leaving around 8:30 am", "I don't know", "on time", "notify me", "1234", "yes"],
    ));
    scripts.push((
        "flights",
        Backend::Local,
        true,
        vec!["Newark", "the departure city", "to Dulles", "around 10:30 am", "I said Dallas, not Dulles", "yes", "the second one", "what gate"],
    ));
    scripts.push(("library", Backend::Local, false, vec!["Dickens", "the author", "Monica", "which branch", "the first one"]));
    let mut ids = Vec::new();
    for (domain, backend, vary, script) in &scripts {
        let mut cfg = SessionConfig::new(domain, backend.clone(), 11);
        cfg.vary_prompts = *vary;
        let (id, _) = m.create(cfg).map_err(|e| e.to_string())?;
        for u in script {
            m.step(&id, u).map_err(|e| e.to_string())?;
        }
        ids.push(id);
    }
    let mut sub_paths = (false, false);
    for id in &ids {
        let (_, config, entries) = read_transcript(&dir.path().join(format!("{id}.jsonl"))).map_err(|e| e.to_string())?;
        if entries != m.transcript(id).map_err(|e| e.to_string())? {
            return Err(format!("{id}: file differs from memory"));
        }
        let subs: Vec<Option<LowerState>> = entries.iter().map(|e| e.sub_state).collect();
        let states: Vec<UpperState> = entries.iter().map(|e| e.state).collect();
        if subs.contains(&Some(LowerState::ConfirmValue))
            && subs.contains(&Some(LowerState::RelaxConstraint))
            && states.contains(&FewMatches)
        {
            sub_paths.0 = true;
        }
        if subs.contains(&Some(LowerState::GetConstraint)) && states.contains(&Success) {
            sub_paths.1 = true;
        }
        let domain = domain(&config.domain);
        let mismatches = replay(domain, config, &entries).map_err(|e| e.to_string())?;
        if let Some(first) = mismatches.first() {
            return Err(format!("{id}: {} mismatches, first {first:?}", mismatches.len()));
        }
    }
    if !(sub_paths.0 && sub_paths.1) {
        return Err(format!("sub-dialogue paths covered: {sub_paths:?}"));
    }
    // Restarting the manager restores identical transcripts.
    let restarted = manager().with_persistence(dir.path()).map_err(|e| e.to_string())?;
    for id in &ids {
        if restarted.transcript(id).map_err(|e| e.to_string())? != m.transcript(id).map_err(|e| e.to_string())? {
            return Err(format!("{id}: transcript changed across restart"));
        }
    }
    Ok(format!("{} transcripts replay byte-for-byte", ids.len()))
}

// ---------------------------------------------------------------- 7

fn criterion_7(pack: &DomainPack) -> Outcome {
    let cases = [
        (
            vec![QueryConstraint::eq("fltNumber", Value::Number(472))],
            "/aa/flight?fltAns=byNumber&fltNumber=472",
        ),
        (
            vec![
                QueryConstraint::eq("depCity", Value::text("Newark")),
                QueryConstraint::eq("arrCity", Value::text("Dallas")),
                QueryConstraint::within("arrTime", 630, 120),
            ],
            "/aa/flight?fltAns=byArrival&depCity=Newark&arrCity=Dallas&arrTime=1030&arrWin=2",
        ),
        (
            vec![
                QueryConstraint::eq("depCity", Value::text("Boston")),
                QueryConstraint::eq("arrCity", Value::text("Chicago")),
                QueryConstraint::within("depTime", 480, 120),
            ],
            "/aa/flight?fltAns=byDeparture&depCity=Boston&arrCity=Chicago&depTime=0800&depWin=2",
        ),
    ];
    for (c, want) in cases {
        let got = build_cgi_request(&c, pack).map_err(|e| e.to_string())?.path_and_query();
        if got != want {
            return Err(format!("got {got}, expected {want}"));
        }
    }
    Ok("3/3 request strings exact".into())
}

// ---------------------------------------------------------------- 8

pub const SEED7_SHA256: &str = "f5ea33ac3cb539f212091324a8eefbf2c537cb292ce0b76d4d58a2e6cfebce5a";

fn criterion_8() -> Outcome {
    let rows = generate_dataset(7, 200);
    let csv = to_store(&rows).to_csv();
    let digest = format!("{:x}", Sha256::digest(csv.as_bytes()));
    if digest != SEED7_SHA256 {
        return Err(format!("digest {digest}"));
    }
    let shipped = std::fs::read_to_string(packs_dir().join("flights/flights.csv")).map_err(|e| e.to_string())?;
    if shipped != csv {
        return Err("packs/flights/flights.csv differs from generate_dataset(7, 200)".into());
    }
    let failed: Vec<String> = check_guarantees(&rows, 5)
        .into_iter()
        .filter(|g| !g.holds)
        .map(|g| g.clause.to_string())
        .collect();
    if !failed.is_empty() {
        return Err(format!("guarantees failed: {failed:?}"));
    }
    Ok("digest pinned, all guarantee clauses hold".into())
}

// ---------------------------------------------------------------- 9

fn library_scenarios() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "class then lexical ambiguity",
            script: &["Dickens", "the author", "Monica"],
            states: &[Initial, Ambiguous, Ambiguous, UnknownQuery],
            final_reply: "What would you like to know: the branch, call number or number of copies?",
        },
        Scenario {
            name: "cue resolves the class",
            script: &["books by Dickens", "Charles", "where are they", "the second one"],
            states: &[Initial, Ambiguous, UnknownQuery, FewMatches, Success],
            final_reply: "Here is what I found: the title is Bleak House and the branch is Central.",
        },
        Scenario {
            name: "title named directly",
            script: &["where is Great Expectations", "how many copies"],
            states: &[Initial, Success, Success],
            final_reply: "Here is what I found: the title is Great Expectations and the number of copies is 3.",
        },
        Scenario {
            name: "catalogue inventory",
            script: &["what authors do you know about", "help"],
            states: &[Initial, MetaQuery, MetaQuery],
            final_reply: "Ask for a book by title or by author, for example \"where is Great Expectations\" or \"books by Jane Austen\".",
        },
        Scenario {
            name: "wrong branch",
            script: &["is Emma at the Westside branch", "yes", "yes"],
            states: &[Initial, DatabaseConflict, DatabaseConflict, DatabaseConflict],
            final_reply: "Sorry, I couldn't find anything that matches. Let's start over.",
        },
    ]
}

fn criterion_9(m: &SessionManager) -> Outcome {
    let pack = pack("library");
    if pack.schema.fields.len() != 3 {
        return Err(format!("library pack has {} fields", pack.schema.fields.len()));
    }
    let suite = library_scenarios();
    run_suite(m, "library", &suite)?;
    Ok(format!("library pack loads, {}/{} dialogues pass", suite.len(), suite.len()))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() {
    let m = manager();
    let flights = pack("flights");
    let flight_store = store("flights");
    let criteria: Vec<Criterion> = vec![
        ("state coverage scenarios", Box::new(|| criterion_1(&m))),
        ("order soundness", Box::new(|| criterion_2(&flights, &flight_store))),
        ("query frugality", Box::new(|| criterion_3(&m, &flights))),
        ("GET_CONSTRAINT oracle", Box::new(criterion_4)),
        ("back-end equivalence", Box::new(|| criterion_5(&flights))),
        ("replay determinism", Box::new(criterion_6)),
        ("CGI byte-exactness", Box::new(|| criterion_7(&flights))),
        ("dataset fixture", Box::new(criterion_8)),
        ("porting smoke test", Box::new(|| criterion_9(&m))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                Err(format!("panicked: {msg}"))
            });
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
