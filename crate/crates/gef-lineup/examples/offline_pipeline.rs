//! The whole benchmark, offline: build lineups from the bundled corpus,
//! generate feedback with the oracle mock, probe with the oracle judge, and
//! write the report artifacts.
//!
//! Run with: cargo run -p gef-lineup --example offline_pipeline

use std::path::PathBuf;

use gef_lineup::corpus::M2Format;
use gef_lineup::lineup::default_rates;
use gef_lineup::pipeline::{execute_run, GecSource, RunSpec};

fn main() {
    let out_dir = std::env::temp_dir().join("gef-lineup-offline-demo");
    std::fs::create_dir_all(&out_dir).unwrap();

    let spec = RunSpec {
        corpus: PathBuf::from(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/fixtures/corpus/essays.jsonl"
        )),
        rates: default_rates(),
        seed: 42,
        gec: GecSource::Manual,
        generator_model: "mock:oracle".into(),
        judge_model: "mock:oracle".into(),
        method_name: "feedback".into(),
        format: M2Format::no_lexical(),
        cache: Some(out_dir.join("cache.jsonl")),
        out_dir: out_dir.clone(),
        endpoint: None,
        api_key: None,
        workers: 4,
        annotator: 0,
    };

    let output = execute_run(&spec).expect("offline run");
    let report = &output.report;

    println!("run id    : {}", output.run_id);
    println!("essays    : {}", report.n_essays);
    println!("accuracy  : {:.4}", report.accuracy);
    println!("tie rows  : {}", report.tie_rows);
    println!("artifacts : {}", output.dir.display());

    println!("\nconfusion (rows true, cols predicted):");
    for (label, row) in report.labels.iter().zip(&report.confusion) {
        println!("  {:>8}: {:?}", label.label(), row);
    }

    // The oracle judge recognizes the version each feedback was written for,
    // so the confusion matrix is diagonal and accuracy is 1.
    assert_eq!(report.accuracy, 1.0);

    // Same spec, same run id; the cache file absorbs every probe, so the
    // replay never reaches the backend.
    let replay = execute_run(&spec).expect("replay");
    assert_eq!(replay.run_id, output.run_id);
    assert_eq!(replay.probe_backend_calls, 0);
    println!("\nreplay used cache only (0 backend calls)");
}
