//! Parse an M2 file and print its three redacted serializations.
//!
//! Run with: cargo run -p gef-lineup --example parse_and_redact_m2

use gef_lineup::corpus::{parse_m2, serialize_m2, M2Format};

fn main() {
    let text = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/fixtures/m2/phone_essay.m2"
    ))
    .expect("fixture present");

    let records = parse_m2(&text).expect("well-formed m2");
    for record in &records {
        println!(
            "{} tokens, {} edits",
            record.source.len(),
            record.edits.len()
        );
        for edit in &record.edits {
            println!(
                "  {} {} {} -> {:?}",
                edit.start, edit.end, edit.etype, edit.replacement
            );
        }

        // Redactions strip information in stages: Standard keeps the edits as
        // annotated, ReplacedCorrected wipes the replacement strings, and
        // NoLexical additionally wipes the error types.
        for (name, format) in [
            ("standard", M2Format::standard()),
            ("replaced", M2Format::replaced_corrected()),
            ("nolex", M2Format::no_lexical()),
        ] {
            println!("\n--- {name} ---");
            print!("{}", serialize_m2(record, format));
        }

        // Discrimination probes never include the S line; with_source() is
        // for files meant to be read back.
        let full = serialize_m2(record, M2Format::standard().with_source());
        assert!(full.starts_with("S "));
        println!("\nwith source line: {} bytes", full.len());
    }
}
