//! Fluency scoring with the source-aware n-gram metric.
//!
//! Run with: cargo run -p gef-lineup --example gleu_scoring

use gef_lineup::corpus::{tokenize, TokenSeq};
use gef_lineup::metrics::{gleu, DEFAULT_NMAX};

fn main() {
    let sources: Vec<TokenSeq> = [
        "He go to school every days .",
        "I has been to London last year .",
        "They is playing football now .",
    ]
    .iter()
    .map(|s| tokenize(s))
    .collect();

    let references: Vec<TokenSeq> = [
        "He goes to school every day .",
        "I went to London last year .",
        "They are playing football now .",
    ]
    .iter()
    .map(|s| tokenize(s))
    .collect();

    // A system that fixes some errors and leaves others.
    let hypotheses: Vec<TokenSeq> = [
        "He goes to school every days .",
        "I went to London last year .",
        "They is playing football now .",
    ]
    .iter()
    .map(|s| tokenize(s))
    .collect();

    let partial = gleu(&sources, &references, &hypotheses, DEFAULT_NMAX).unwrap();
    println!("partial fix : {:.4}", partial.score);
    println!("  precisions: {:?}", partial.per_n.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>());

    // Unlike plain n-gram overlap against the reference, an unchanged
    // hypothesis is penalized for every n-gram it shares with the source but
    // not the reference. Leaving the text alone scores worst, matching the
    // reference scores exactly 1.
    let unchanged = gleu(&sources, &references, &sources, DEFAULT_NMAX).unwrap();
    let perfect = gleu(&sources, &references, &references, DEFAULT_NMAX).unwrap();
    println!("unchanged   : {:.4}", unchanged.score);
    println!("perfect     : {:.4}", perfect.score);
    assert!(unchanged.score < partial.score && partial.score < perfect.score);
    assert_eq!(perfect.score, 1.0);
}
