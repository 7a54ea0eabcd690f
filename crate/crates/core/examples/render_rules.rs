//! Render interaction templates through the framework rules, a domain
//! pack's rules, and a rule prepended at run time. Also prints the help
//! text for a state and expected field.
//!
//! ```bash
//! cargo run --example render_rules
//! ```

use pure_dialog::dialog::{InteractionTemplate, TemplateAct};
use pure_dialog::interactor::{help_text, render, RuleSet, Variation};
use pure_dialog::load_domain_pack;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pack = load_domain_pack(concat!(env!("CARGO_MANIFEST_DIR"), "/../../packs/flights"))?;
    let field = pack.schema.field("departure_city").expect("field");
    let ask = InteractionTemplate::new(TemplateAct::AskField)
        .with("field", field.name.as_str())
        .with("label", field.label.as_str())
        .with("prompt", field.prompt_text.as_str());

    println!("framework  {}", render(&ask, &RuleSet::framework(), None)?);
    println!("flights    {}", render(&ask, &pack.rules, None)?);

    let mut rules = pack.rules.clone();
    rules
        .prepend("ASK_FIELD field=departure_city => Where are you flying out of?")
        .map_err(|(line, why)| format!("rule line {line}: {why}"))?;
    println!("override   {}", render(&ask, &rules, None)?);

    // Lines starting with `|` are variants of the rule above them.
    let mut varied = pack.rules.clone();
    varied
        .prepend("GOODBYE => Goodbye.\n| Bye for now.\n| Have a good flight.")
        .map_err(|(line, why)| format!("rule line {line}: {why}"))?;
    let bye = InteractionTemplate::new(TemplateAct::Goodbye);
    for turn in 0..4 {
        println!("bye #{turn}     {}", render(&bye, &varied, Some(Variation { seed: 7, turn }))?);
    }

    let ambiguous = InteractionTemplate::new(TemplateAct::ClarifyAmbiguity)
        .with("kind", "field")
        .with("term", "Newark")
        .with("candidates", vec!["departure_city".to_string(), "arrival_city".to_string()])
        .with("labels", vec!["departure city".to_string(), "arrival city".to_string()]);
    println!("clarify    {}", render(&ambiguous, &pack.rules, None)?);

    println!("help       {}", help_text("MANDATORY_FIELDS", Some("departure_city"), &pack));
    Ok(())
}
