//! Scoring: edit extraction by alignment, span-level precision/recall/F,
//! and corpus GLEU.

mod align;
mod gleu;

pub use align::extract_edits;
pub use gleu::{gleu, GleuScore, DEFAULT_NMAX};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Edit;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("corpus lists differ in length: {sources} sources, {references} references, {hypotheses} hypotheses")]
    LengthMismatch {
        sources: usize,
        references: usize,
        hypotheses: usize,
    },
}

pub type MetricsResult<T> = Result<T, MetricsError>;

/// Precision, recall and F at a given beta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub beta: f64,
}

/// Weighted F measure; 0 when precision and recall are both 0.
pub fn f_beta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denom = b2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / denom
    }
}

/// Multiset count of hypothesis edits that agree with a reference edit on
/// start, end and replacement. Each reference edit is consumed at most once.
pub fn edit_match_count(hyp: &[Edit], reference: &[Edit]) -> usize {
    let mut pool: Vec<&Edit> = reference.iter().collect();
    let mut tp = 0usize;
    for h in hyp {
        let found = pool.iter().position(|r| {
            r.start == h.start && r.end == h.end && r.replacement == h.replacement
        });
        if let Some(at) = found {
            pool.swap_remove(at);
            tp += 1;
        }
    }
    tp
}

/// Span-level comparison of hypothesis edits against reference edits.
/// Two edits match when start, end and replacement agree; types are ignored.
/// An empty side scores 1 on its own axis, so empty vs empty gives 1/1/1.
pub fn edit_prf(hyp: &[Edit], reference: &[Edit], beta: f64) -> Prf {
    let tp = edit_match_count(hyp, reference);
    let precision = if hyp.is_empty() { 1.0 } else { tp as f64 / hyp.len() as f64 };
    let recall = if reference.is_empty() { 1.0 } else { tp as f64 / reference.len() as f64 };
    Prf {
        precision,
        recall,
        f: f_beta(precision, recall, beta),
        beta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(start: usize, end: usize, repl: &[&str]) -> Edit {
        Edit {
            start,
            end,
            replacement: repl.iter().map(|s| s.to_string()).collect(),
            etype: "UNK".into(),
            annotator: 0,
            required: true,
        }
    }

    #[test]
    fn identical_sets_score_one() {
        let edits = vec![e(1, 2, &["a"]), e(4, 4, &["b"])];
        let prf = edit_prf(&edits, &edits, 0.5);
        assert_eq!((prf.precision, prf.recall, prf.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn disjoint_sets_score_zero() {
        let hyp = vec![e(1, 2, &["a"])];
        let rf = vec![e(3, 4, &["b"])];
        let prf = edit_prf(&hyp, &rf, 0.5);
        assert_eq!((prf.precision, prf.recall, prf.f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_against_empty_is_one() {
        let prf = edit_prf(&[], &[], 0.5);
        assert_eq!((prf.precision, prf.recall, prf.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_hypothesis_keeps_precision_one() {
        let rf = vec![e(1, 2, &["a"])];
        let prf = edit_prf(&[], &rf, 0.5);
        assert_eq!(prf.precision, 1.0);
        assert_eq!(prf.recall, 0.0);
        assert_eq!(prf.f, 0.0);
    }

    #[test]
    fn type_is_ignored_in_matching() {
        let mut hyp = vec![e(1, 2, &["a"])];
        hyp[0].etype = "UNK".into();
        let mut rf = vec![e(1, 2, &["a"])];
        rf[0].etype = "R:VERB".into();
        assert_eq!(edit_prf(&hyp, &rf, 0.5).f, 1.0);
    }

    #[test]
    fn duplicate_hypothesis_edits_count_once() {
        let hyp = vec![e(1, 2, &["a"]), e(1, 2, &["a"])];
        let rf = vec![e(1, 2, &["a"])];
        let prf = edit_prf(&hyp, &rf, 0.5);
        assert_eq!(prf.precision, 0.5);
        assert_eq!(prf.recall, 1.0);
    }

    #[test]
    fn f_beta_weighting() {
        let f = f_beta(0.4721, 0.3711, 0.5);
        assert!((f - 0.4477).abs() < 1e-4);
        assert_eq!(f_beta(0.0, 0.0, 0.5), 0.0);
        assert!((f_beta(0.5, 0.5, 1.0) - 0.5).abs() < 1e-12);
    }
}
