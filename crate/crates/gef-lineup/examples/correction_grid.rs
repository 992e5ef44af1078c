//! Score a correction system against lineup versions at every rate pair.
//!
//! Run with: cargo run -p gef-lineup --example correction_grid

use std::path::Path;

use gef_lineup::lineup::default_rates;
use gef_lineup::pipeline::{score_gec, GecSource};

fn main() {
    let corpus = Path::new(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/corpus/essays.jsonl"
    ));
    let systems = vec![("manual".to_string(), GecSource::Manual)];
    let scores = score_gec(corpus, &default_rates(), 42, &systems, 0, None, None, None)
        .expect("fixture corpus scores");

    // Rows: which lineup version the system corrected. Columns: which
    // version's residual the edits are scored against. The diagonal is the
    // matched condition; off-diagonal cells show how much the grading drifts
    // when the reference assumes a different starting point.
    let system = &scores.systems[0];
    print!("{:>10}", "hyp \\ ref");
    for rate in &scores.rates {
        print!("{:>10}", rate.label());
    }
    println!();
    for (rate, row) in scores.rates.iter().zip(&system.grid) {
        print!("{:>10}", rate.label());
        for prf in row {
            print!("{:>10.2}", prf.f * 100.0);
        }
        println!();
    }

    // Fluency per rate, with the uncorrected lower bound for context.
    println!("\n{:>14} {}", "", scores.rates.iter().map(|r| format!("{:>8}", r.label())).collect::<String>());
    print!("{:>14} ", "no correction");
    for g in &scores.lower_bound {
        print!("{:>8.2}", g.score * 100.0);
    }
    println!();
    print!("{:>14} ", system.system);
    for g in &system.gleu {
        print!("{:>8.2}", g.score * 100.0);
    }
    println!();
}
