//! Tables and charts from evaluation results: CSV with fixed two-decimal
//! cells, plus SVG renderings of confusion matrices and mean-yes curves.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::lineup::Rate;
use crate::metrics::{GleuScore, Prf};
use crate::pipeline::{rate_stem, EvalReport};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no SVG rendering for {kind} tables")]
    Unsupported { kind: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type ReportResult<T> = Result<T, ReportError>;

/// One renderable table. Percent-scaled metrics (F, GLEU, accuracy) are
/// stored as fractions and formatted as percentages; probabilities and
/// counts keep their natural scale.
#[derive(Debug, Clone, PartialEq)]
pub enum TableSpec {
    /// Hypothesis-rate by reference-rate F grid for one system.
    GecF05Grid {
        system: String,
        rates: Vec<Rate>,
        grid: Vec<Vec<Prf>>,
    },
    /// One row per system (the first usually the uncorrected lower bound),
    /// one column per rate.
    GleuTable {
        rates: Vec<Rate>,
        rows: Vec<(String, Vec<GleuScore>)>,
    },
    /// A single labeled value row.
    AccuracyTable {
        labels: Vec<String>,
        values: Vec<f64>,
    },
    ConfusionMatrix {
        labels: Vec<Rate>,
        counts: Vec<Vec<u32>>,
    },
    /// Row: feedback rate; column: probed rate; None rows had no
    /// non-degenerate contributions.
    MeanYesCurves {
        labels: Vec<Rate>,
        mean_yes: Vec<Option<Vec<f64>>>,
    },
}

impl TableSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            TableSpec::GecF05Grid { .. } => "GecF05Grid",
            TableSpec::GleuTable { .. } => "GleuTable",
            TableSpec::AccuracyTable { .. } => "AccuracyTable",
            TableSpec::ConfusionMatrix { .. } => "ConfusionMatrix",
            TableSpec::MeanYesCurves { .. } => "MeanYesCurves",
        }
    }
}

fn csv_field(raw: &str) -> String {
    if raw.contains(',') || raw.contains('"') || raw.contains('\n') || raw.contains('\r') {
        format!("\"{}\"", raw.replace('"', "\"\""))
    } else {
        raw.to_string()
    }
}

fn csv_row(fields: &[String]) -> String {
    let quoted: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
    format!("{}\r\n", quoted.join(","))
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

fn prob(x: f64) -> String {
    format!("{x:.2}")
}

fn rate_header(rate: Rate) -> String {
    format!("{}%", rate_stem(rate))
}

/// Renders RFC-4180 CSV (CRLF rows; fields quoted when needed). An empty
/// payload yields the header row only.
pub fn render_csv(spec: &TableSpec) -> String {
    let mut out = String::new();
    match spec {
        TableSpec::GecF05Grid { rates, grid, .. } => {
            let mut header = vec!["HYP \\ REF".to_string()];
            header.extend(rates.iter().map(|r| rate_header(*r)));
            out.push_str(&csv_row(&header));
            for (rate, row) in rates.iter().zip(grid) {
                let mut fields = vec![rate_header(*rate)];
                fields.extend(row.iter().map(|prf| pct(prf.f)));
                out.push_str(&csv_row(&fields));
            }
        }
        TableSpec::GleuTable { rates, rows } => {
            let mut header = vec!["system".to_string()];
            header.extend(rates.iter().map(|r| rate_header(*r)));
            out.push_str(&csv_row(&header));
            for (system, scores) in rows {
                let mut fields = vec![system.clone()];
                fields.extend(scores.iter().map(|g| pct(g.score)));
                out.push_str(&csv_row(&fields));
            }
        }
        TableSpec::AccuracyTable { labels, values } => {
            out.push_str(&csv_row(labels));
            if !values.is_empty() {
                let fields: Vec<String> = values.iter().map(|v| pct(*v)).collect();
                out.push_str(&csv_row(&fields));
            }
        }
        TableSpec::ConfusionMatrix { labels, counts } => {
            let mut header = vec!["true \\ predicted".to_string()];
            header.extend(labels.iter().map(|r| rate_header(*r)));
            out.push_str(&csv_row(&header));
            for (rate, row) in labels.iter().zip(counts) {
                let mut fields = vec![rate_header(*rate)];
                fields.extend(row.iter().map(|c| c.to_string()));
                out.push_str(&csv_row(&fields));
            }
        }
        TableSpec::MeanYesCurves { labels, mean_yes } => {
            let mut header = vec!["feedback \\ probe".to_string()];
            header.extend(labels.iter().map(|r| rate_header(*r)));
            out.push_str(&csv_row(&header));
            for (rate, row) in labels.iter().zip(mean_yes) {
                let mut fields = vec![rate_header(*rate)];
                match row {
                    Some(values) => fields.extend(values.iter().map(|p| prob(*p))),
                    None => fields.extend(labels.iter().map(|_| String::new())),
                }
                out.push_str(&csv_row(&fields));
            }
        }
    }
    out
}

pub fn emit_csv(spec: &TableSpec, destination: &Path) -> ReportResult<()> {
    std::fs::write(destination, render_csv(spec))?;
    Ok(())
}

/// Splits CSV text back into rows of fields; used by round-trip checks.
pub fn parse_csv(text: &str) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for line in text.split("\r\n") {
        if line.is_empty() {
            continue;
        }
        let mut fields = Vec::new();
        let mut field = String::new();
        let mut chars = line.chars().peekable();
        let mut quoted = false;
        while let Some(c) = chars.next() {
            match c {
                '"' if field.is_empty() && !quoted => quoted = true,
                '"' if quoted => {
                    if chars.peek() == Some(&'"') {
                        chars.next();
                        field.push('"');
                    } else {
                        quoted = false;
                    }
                }
                ',' if !quoted => {
                    fields.push(std::mem::take(&mut field));
                }
                other => field.push(other),
            }
        }
        fields.push(field);
        rows.push(fields);
    }
    rows
}

const CURVE_COLORS: [&str; 9] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22",
];

fn heatmap_fill(count: u32, max: u32) -> String {
    // White at zero to a saturated blue at the maximum; integer arithmetic
    // keeps the bytes stable.
    let max = max.max(1) as u64;
    let c = count as u64;
    let r = 255 - 224 * c / max;
    let g = 255 - 136 * c / max;
    let b = 255 - 75 * c / max;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn svg_confusion(labels: &[Rate], counts: &[Vec<u32>]) -> String {
    let k = labels.len();
    let cell = 56usize;
    let left = 96usize;
    let top = 56usize;
    let width = left + k * cell + 24;
    let height = top + k * cell + 24;
    let max = counts.iter().flatten().copied().max().unwrap_or(0);
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"13\">\n"
    );
    let _ = write!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    );
    let _ = write!(
        s,
        "<text x=\"{}\" y=\"18\" text-anchor=\"middle\">predicted rate</text>\n",
        left + k * cell / 2
    );
    for (j, rate) in labels.iter().enumerate() {
        let _ = write!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            left + j * cell + cell / 2,
            top - 12,
            rate_header(*rate)
        );
    }
    for (i, row) in counts.iter().enumerate() {
        let _ = write!(
            s,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            left - 10,
            top + i * cell + cell / 2 + 4,
            rate_header(labels[i])
        );
        for (j, &count) in row.iter().enumerate() {
            let x = left + j * cell;
            let y = top + i * cell;
            let fill = heatmap_fill(count, max);
            let _ = write!(
                s,
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"{fill}\" stroke=\"#cccccc\"/>\n"
            );
            let dark = max > 0 && count * 2 > max;
            let _ = write!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" fill=\"{}\">{}</text>\n",
                x + cell / 2,
                y + cell / 2 + 4,
                if dark { "#ffffff" } else { "#000000" },
                count
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn svg_curves(labels: &[Rate], mean_yes: &[Option<Vec<f64>>]) -> String {
    let width = 560usize;
    let height = 360usize;
    let left = 64.0;
    let right = 120.0;
    let top = 32.0;
    let bottom = 48.0;
    let plot_w = width as f64 - left - right;
    let plot_h = height as f64 - top - bottom;
    let x_of = |rate: Rate| left + rate.as_f64() * plot_w;
    let y_of = |p: f64| top + (1.0 - p) * plot_h;
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"monospace\" font-size=\"12\">\n"
    );
    let _ = write!(
        s,
        "<rect x=\"0\" y=\"0\" width=\"{width}\" height=\"{height}\" fill=\"#ffffff\"/>\n"
    );
    // Axes and ticks.
    let _ = write!(
        s,
        "<line x1=\"{left:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#000000\"/>\n",
        top + plot_h,
        left + plot_w,
        top + plot_h
    );
    let _ = write!(
        s,
        "<line x1=\"{left:.1}\" y1=\"{top:.1}\" x2=\"{left:.1}\" y2=\"{:.1}\" stroke=\"#000000\"/>\n",
        top + plot_h
    );
    for rate in labels {
        let x = x_of(*rate);
        let _ = write!(
            s,
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#000000\"/>\n",
            top + plot_h,
            top + plot_h + 5.0
        );
        let _ = write!(
            s,
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            top + plot_h + 20.0,
            rate_header(*rate)
        );
    }
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = y_of(tick);
        let _ = write!(
            s,
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{left:.1}\" y2=\"{y:.1}\" stroke=\"#000000\"/>\n",
            left - 5.0
        );
        let _ = write!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{tick:.2}</text>\n",
            left - 9.0,
            y + 4.0
        );
    }
    let _ = write!(
        s,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">probed rate</text>\n",
        left + plot_w / 2.0,
        top + plot_h + 38.0
    );
    // One curve per feedback rate; rows without data are skipped.
    let mut legend_slot = 0usize;
    for (i, row) in mean_yes.iter().enumerate() {
        let Some(values) = row else { continue };
        let color = CURVE_COLORS[i % CURVE_COLORS.len()];
        let points: Vec<String> = labels
            .iter()
            .zip(values)
            .map(|(rate, p)| format!("{:.1},{:.1}", x_of(*rate), y_of(*p)))
            .collect();
        let _ = write!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            points.join(" ")
        );
        let mut peak = 0usize;
        for (j, &p) in values.iter().enumerate().skip(1) {
            if p > values[peak] {
                peak = j;
            }
        }
        let _ = write!(
            s,
            "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"5\" fill=\"{color}\"/>\n",
            x_of(labels[peak]),
            y_of(values[peak])
        );
        let ly = top + 16.0 * legend_slot as f64;
        let _ = write!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            left + plot_w + 16.0,
            ly
        );
        let _ = write!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\">feedback {}</text>\n",
            left + plot_w + 30.0,
            ly + 9.0,
            rate_header(labels[i])
        );
        legend_slot += 1;
    }
    s.push_str("</svg>\n");
    s
}

/// Renders the chartable kinds to a standalone SVG document. Tables other
/// than confusion matrices and mean-yes curves have no chart form.
pub fn render_svg(spec: &TableSpec) -> ReportResult<String> {
    match spec {
        TableSpec::ConfusionMatrix { labels, counts } => Ok(svg_confusion(labels, counts)),
        TableSpec::MeanYesCurves { labels, mean_yes } => Ok(svg_curves(labels, mean_yes)),
        other => Err(ReportError::Unsupported { kind: other.kind() }),
    }
}

pub fn emit_svg(spec: &TableSpec, destination: &Path) -> ReportResult<()> {
    std::fs::write(destination, render_svg(spec)?)?;
    Ok(())
}

/// The standard artifact set for one evaluation report: accuracy, confusion
/// and mean-yes CSV plus the two charts.
pub fn write_run_artifacts(dir: &Path, report: &EvalReport) -> ReportResult<()> {
    let accuracy = TableSpec::AccuracyTable {
        labels: vec!["accuracy".to_string()],
        values: vec![report.accuracy],
    };
    let confusion = TableSpec::ConfusionMatrix {
        labels: report.labels.clone(),
        counts: report.confusion.clone(),
    };
    let curves = TableSpec::MeanYesCurves {
        labels: report.labels.clone(),
        mean_yes: report.mean_yes.clone(),
    };
    emit_csv(&accuracy, &dir.join("accuracy.csv"))?;
    emit_csv(&confusion, &dir.join("confusion.csv"))?;
    emit_csv(&curves, &dir.join("mean_yes.csv"))?;
    emit_svg(&confusion, &dir.join("confusion.svg"))?;
    emit_svg(&curves, &dir.join("mean_yes.svg"))?;
    Ok(())
}
