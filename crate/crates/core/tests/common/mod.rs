#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use pure_dialog::dialog::context::FieldBinding;
use pure_dialog::dialog::{decide_state, DialogConfig, DialogueContext, StateDecision, UpperState};
use pure_dialog::nlu::understand;
use pure_dialog::query::{LocalQuerier, TableStore};
use pure_dialog::schema::{load_domain_pack, DomainPack};
use pure_dialog::service::{Backend, Domain, SessionManager, TurnResponse};
use pure_dialog::Value;

pub fn packs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../packs")
}

pub fn pack(name: &str) -> DomainPack {
    load_domain_pack(packs_dir().join(name)).expect("pack loads")
}

pub fn domain(name: &str) -> Domain {
    Domain::load(&packs_dir().join(name)).expect("domain loads")
}

pub fn store(name: &str) -> Arc<TableStore> {
    domain(name).store.expect("domain has a dataset")
}

pub fn manager() -> SessionManager {
    SessionManager::from_packs_dir(packs_dir()).expect("packs load")
}

/// Run a script in a fresh session; returns the greeting and one
/// response per utterance.
pub fn run_script(m: &SessionManager, domain: &str, backend: Backend, script: &[&str]) -> (String, String, Vec<TurnResponse>) {
    let (id, greeting) = m.create_session(domain, backend, 7).expect("session");
    let responses = script.iter().map(|u| m.step(&id, u).expect("turn")).collect();
    (id, greeting, responses)
}

/// A context with the given bindings. Times marked approximate get the
/// base window.
pub fn context(pack: &DomainPack, binds: &[(&str, Value, bool)], query_type: Option<&str>) -> DialogueContext {
    let mut ctx = DialogueContext::default();
    for (field, value, approx) in binds {
        let class = pack.schema.field(field).expect("field").semantic_class.clone();
        ctx.bind(field, &class, value.clone());
        if *approx {
            let b: &mut FieldBinding = ctx.bindings.get_mut(*field).unwrap();
            b.approx = true;
            b.window = Some(120);
        }
    }
    ctx.query_type = query_type.map(str::to_string);
    ctx
}

/// One turn against the local store, outside any session.
pub fn decide(pack: &DomainPack, store: &Arc<TableStore>, ctx: &DialogueContext, utterance: &str) -> StateDecision {
    let mut c = ctx.clone();
    c.begin_turn();
    let (_, x) = understand(utterance, pack, &c);
    decide_state(&c, &x, pack, &LocalQuerier::new(Arc::clone(store)), &DialogConfig::default())
        .expect("local querier never fails")
        .0
}

pub fn state_of(pack: &DomainPack, store: &Arc<TableStore>, ctx: &DialogueContext, utterance: &str) -> UpperState {
    decide(pack, store, ctx, utterance).state
}

pub fn city(s: &str) -> Value {
    Value::text(s)
}

pub fn clock(h: u32, m: u32) -> Value {
    Value::Time(h * 60 + m)
}
