//! Yes/no probability probing against the offline mock backends, plus the
//! response cache.
//!
//! Run with: cargo run -p gef-lineup --example probe_yes_mock

use std::sync::Arc;

use gef_lineup::gateway::{
    digest16, render_prompt, Backend, Cache, Gateway, PromptKind, PromptSlots,
};
use gef_lineup::lineup::Rate;

fn main() {
    let cache = Arc::new(Cache::in_memory());
    let backend = Backend::from_spec("mock:calibrated", None, None).unwrap();
    let judge = Gateway::new(backend, "mock:calibrated", cache.clone());

    // The domain mocks recognize texts by digest. Register a small lineup so
    // the calibrated judge knows which rate each version sits at.
    let rates: Vec<Rate> = [0.0, 25.0, 50.0, 75.0, 100.0]
        .iter()
        .map(|&p| Rate::from_percent(p).unwrap())
        .collect();
    let versions: Vec<String> = rates
        .iter()
        .map(|r| format!("This is the lineup member at {} correction .", r.label()))
        .collect();
    let registry = judge.backend().registry().unwrap();
    for (rate, text) in rates.iter().zip(&versions) {
        registry.register_version("demo", *rate, text, &[]);
    }

    // Feedback "written for" the 50% member, identified by its digest tag.
    let feedback = format!("Dear learner, notes on your draft mock:{} follow.", digest16(&versions[2]));

    println!("p(yes) when probing that feedback against each member:");
    for (rate, text) in rates.iter().zip(&versions) {
        let prompt = render_prompt(
            PromptKind::EssayMatch,
            &PromptSlots {
                essay: Some(text),
                feedback: Some(&feedback),
                ..Default::default()
            },
        )
        .unwrap();
        let probe = judge.probe_yes(&prompt).unwrap();
        println!(
            "  {:>8}: p_yes {:.4} p_no {:.4} (answered {:?})",
            rate.label(),
            probe.p_yes,
            probe.p_no,
            probe.first_token
        );
    }

    // Every outcome is cached under a digest of the full request; replaying
    // a prompt does not touch the backend again.
    let calls_before = judge.backend_calls();
    let prompt = render_prompt(
        PromptKind::EssayMatch,
        &PromptSlots {
            essay: Some(&versions[2]),
            feedback: Some(&feedback),
            ..Default::default()
        },
    )
    .unwrap();
    let replay = judge.probe_yes(&prompt).unwrap();
    assert_eq!(judge.backend_calls(), calls_before);
    println!(
        "\nreplayed probe from cache ({} entries): p_yes {:.4}",
        cache.len(),
        replay.p_yes
    );
}
