//! Extract edits between token sequences and score them against a reference.
//!
//! Run with: cargo run -p gef-lineup --example score_edits

use gef_lineup::corpus::tokenize;
use gef_lineup::metrics::{edit_prf, extract_edits};

fn main() {
    let source = tokenize("I has a apple and she have two banana .");
    let reference_text = tokenize("I have an apple and she has two bananas .");
    let hypothesis_text = tokenize("I have a apple and she has two banana !");

    // The reference edit set is what a perfect system would have produced.
    let reference = extract_edits(&source, &reference_text);
    println!("reference edits:");
    for e in &reference {
        println!("  [{}, {}) {:?} -> {:?}", e.start, e.end, &source[e.start..e.end], e.replacement);
    }

    let hypothesis = extract_edits(&source, &hypothesis_text);
    println!("\nhypothesis edits:");
    for e in &hypothesis {
        println!("  [{}, {}) {:?} -> {:?}", e.start, e.end, &source[e.start..e.end], e.replacement);
    }

    // Matching is untyped: an edit counts if span and replacement agree.
    // F0.5 weighs precision twice as much as recall, the usual choice for
    // correction systems where a wrong change is worse than a missed one.
    let prf = edit_prf(&hypothesis, &reference, 0.5);
    println!(
        "\nP {:.4}  R {:.4}  F0.5 {:.4}",
        prf.precision, prf.recall, prf.f
    );

    let perfect = edit_prf(&reference, &reference, 0.5);
    assert_eq!((perfect.precision, perfect.recall, perfect.f), (1.0, 1.0, 1.0));

    // No hypothesis edits at all: vacuous precision, zero recall.
    let silent = edit_prf(&[], &reference, 0.5);
    println!("silent system: P {} R {} F0.5 {:.4}", silent.precision, silent.recall, silent.f);
}
