//! A schema-driven, two-layer, mixed-initiative dialogue manager for
//! information-access tasks.
//!
//! A domain is described by a pack of plain-text files (fields, lexicon,
//! database mapping, consistency rules, rendering rules, help). The engine
//! turns each typed utterance into field bindings and dialogue acts,
//! classifies the turn into one of fourteen domain-independent states (or
//! a domain sub-dialogue), queries a local table or a web form when it has
//! enough constraints, and renders the reply through ordered rules.
//!
//! ```no_run
//! use pure_dialog::service::{Backend, SessionManager};
//!
//! let mgr = SessionManager::from_packs_dir("packs").unwrap();
//! let (id, greeting) = mgr.create_session("flights", Backend::Local, 7).unwrap();
//! println!("{greeting}");
//! let turn = mgr.step(&id, "when does flight four seven two arrive").unwrap();
//! println!("{} ({})", turn.reply, turn.state);
//! ```

pub mod conf;
pub mod dialog;
pub mod flight;
pub mod interactor;
pub mod nlu;
pub mod query;
pub mod schema;
pub mod service;
pub mod value;

pub use dialog::{decide_state, DialogConfig, StateDecision};
pub use schema::{load_domain_pack, DomainPack, PackError};
pub use value::Value;
