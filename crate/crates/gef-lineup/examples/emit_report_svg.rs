//! Render report tables to CSV and charts to SVG without running anything.
//!
//! Run with: cargo run -p gef-lineup --example emit_report_svg

use gef_lineup::lineup::Rate;
use gef_lineup::report::{emit_csv, emit_svg, render_csv, TableSpec};

fn main() {
    let labels: Vec<Rate> = [0.0, 25.0, 50.0, 75.0, 100.0]
        .iter()
        .map(|&p| Rate::from_percent(p).unwrap())
        .collect();

    // A plausible confusion matrix: strong diagonal, neighbors confused.
    let confusion = TableSpec::ConfusionMatrix {
        labels: labels.clone(),
        counts: vec![
            vec![17, 2, 1, 0, 0],
            vec![3, 12, 4, 1, 0],
            vec![0, 4, 11, 5, 0],
            vec![0, 1, 5, 12, 2],
            vec![0, 0, 1, 3, 16],
        ],
    };

    // Mean yes-probability per feedback row; a None row means no essay
    // contributed a usable probe there.
    let curves = TableSpec::MeanYesCurves {
        labels: labels.clone(),
        mean_yes: vec![
            Some(vec![0.82, 0.41, 0.15, 0.06, 0.02]),
            Some(vec![0.35, 0.74, 0.38, 0.12, 0.04]),
            Some(vec![0.12, 0.36, 0.69, 0.33, 0.10]),
            Some(vec![0.05, 0.13, 0.37, 0.66, 0.30]),
            None,
        ],
    };

    println!("{}", render_csv(&confusion));

    let dir = std::env::temp_dir().join("gef-lineup-report-demo");
    std::fs::create_dir_all(&dir).unwrap();
    for (spec, stem) in [(&confusion, "confusion"), (&curves, "mean_yes")] {
        emit_csv(spec, &dir.join(format!("{stem}.csv"))).unwrap();
        emit_svg(spec, &dir.join(format!("{stem}.svg"))).unwrap();
    }
    println!("wrote csv and svg pairs to {}", dir.display());

    // Value tables hold proportions and render as percentages. Tables
    // without a chart form refuse to render as SVG.
    let accuracy = TableSpec::AccuracyTable {
        labels: vec!["accuracy".into(), "tie share".into()],
        values: vec![0.68, 0.05],
    };
    assert!(gef_lineup::report::render_svg(&accuracy).is_err());
    println!("\n{}", render_csv(&accuracy));
}
