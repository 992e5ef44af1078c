//! Render every prompt template with sample values.
//!
//! Run with: cargo run -p gef-lineup --example render_prompts

use gef_lineup::gateway::{render_prompt, PromptKind, PromptSlots};

fn main() {
    let slots = PromptSlots {
        essay: Some("Yesterday I go to the libary with my friend ."),
        corrected_essay: Some("Yesterday I went to the library with my friend ."),
        feedback: Some(
            "Dear learner, watch the past tense of \"go\" and the spelling of \"library\".",
        ),
        errant_file: Some(
            "A 2 3|||R:VERB:TENSE|||went|||REQUIRED|||-NONE-|||0\nA 6 7|||R:SPELL|||library|||REQUIRED|||-NONE-|||0",
        ),
    };

    for kind in PromptKind::ALL {
        let prompt = render_prompt(kind, &slots).expect("all slots provided");
        println!("=== {kind:?} (wants {:?}) ===", kind.slots());
        println!("{prompt}\n");
    }

    // Omitting a slot the template needs is an error, extra slots are ignored.
    let sparse = PromptSlots {
        essay: Some("Just the essay ."),
        ..Default::default()
    };
    assert!(render_prompt(PromptKind::Gec, &sparse).is_ok());
    assert!(render_prompt(PromptKind::EssayMatch, &sparse).is_err());
}
