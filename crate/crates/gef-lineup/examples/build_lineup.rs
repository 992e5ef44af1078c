//! Build a lineup of partially corrected versions for one essay.
//!
//! Run with: cargo run -p gef-lineup --example build_lineup

use gef_lineup::corpus::{detokenize, ClcTypeMap};
use gef_lineup::lineup::{build_lineup, default_rates, essay_seed};
use gef_lineup::pipeline::resolve_record;

fn main() {
    let manifest = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus/essays.jsonl");
    let entries = gef_lineup::corpus::load_manifest(manifest).expect("fixture corpus");
    let entry = &entries[0];
    let record = resolve_record(entry, &ClcTypeMap::default(), 0).expect("annotations");

    let run_seed = 42;
    let lineup = build_lineup(
        &record,
        &default_rates(),
        essay_seed(run_seed, &entry.essay_id),
    )
    .expect("buildable");

    println!("{}: {} edits total\n", lineup.essay_id, record.edits.len());
    for v in &lineup.versions {
        println!(
            "rate {:>8}  applied {:2}  residual {:2}",
            v.rate.label(),
            v.applied_ids.len(),
            v.residual.edits.len()
        );
        println!("  {}\n", detokenize(&v.text));
    }

    // Subsets are nested: whatever a lower rate corrects, every higher rate
    // corrects too. Identity at 0, the full correction at 1.
    for pair in lineup.versions.windows(2) {
        assert!(pair[1].applied_ids.starts_with(&pair[0].applied_ids));
    }
    assert_eq!(lineup.versions[0].text, record.source);

    // The same run seed reproduces the same lineup, a different one picks
    // different subsets.
    let again = build_lineup(&record, &default_rates(), essay_seed(run_seed, &entry.essay_id)).unwrap();
    assert_eq!(lineup, again);
    let other = build_lineup(&record, &default_rates(), essay_seed(7, &entry.essay_id)).unwrap();
    println!(
        "seed 42 picks {:?}, seed 7 picks {:?}",
        lineup.versions[2].applied_ids, other.versions[2].applied_ids
    );
}
