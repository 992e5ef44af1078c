//! Convert inline <NS> error markup to M2 edits.
//!
//! Run with: cargo run -p gef-lineup --example clc_to_m2

use gef_lineup::corpus::{parse_clc_xml, serialize_m2, ClcTypeMap, M2Format};

fn main() {
    // Spans carry "wrong|correct"; either side may be empty.
    let marked = "I <NS type=\"RV\">goed|went</NS> to the market and <NS type=\"MD\">|the</NS> \
                  shop was <NS type=\"UD\">a|</NS> closed.";

    // Raw codes can be mapped to coarser categories; unmapped codes pass
    // through. The M:/R:/U: prefix comes from which sides the span has.
    let map = ClcTypeMap::from_json(r#"{"RV": "VERB", "MD": "DET", "UD": "DET"}"#).unwrap();
    let record = parse_clc_xml("demo", marked, &map).expect("balanced markup");

    println!("source: {}", record.source.join(" "));
    for edit in &record.edits {
        println!(
            "  [{}, {}) {:12} {:?}",
            edit.start, edit.end, edit.etype, edit.replacement
        );
    }

    print!("\n{}", serialize_m2(&record, M2Format::standard().with_source()));
}
