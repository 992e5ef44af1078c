//! Corpus GLEU for correction quality against a source and a reference.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSeq;

use super::{MetricsError, MetricsResult};

pub const DEFAULT_NMAX: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GleuScore {
    pub score: f64,
    pub n_max: usize,
    /// Corpus n-gram precisions for n = 1..=n_max.
    pub per_n: Vec<f64>,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], u64> {
    let mut counts = HashMap::new();
    if tokens.len() >= n && n > 0 {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus GLEU. Per sentence and per order n, the numerator is the clipped
/// hypothesis/reference overlap minus the overlap with source n-grams not
/// present in the reference (floored at zero); the denominator is the
/// hypothesis n-gram count. Sentence tallies are pooled, the geometric mean
/// over orders is taken, and a corpus brevity penalty is applied. An order
/// with an empty pooled denominator counts as precision 1; a zero precision
/// at any order gives score 0.
pub fn gleu(
    sources: &[TokenSeq],
    references: &[TokenSeq],
    hypotheses: &[TokenSeq],
    n_max: usize,
) -> MetricsResult<GleuScore> {
    if sources.len() != references.len() || sources.len() != hypotheses.len() {
        return Err(MetricsError::LengthMismatch {
            sources: sources.len(),
            references: references.len(),
            hypotheses: hypotheses.len(),
        });
    }
    if sources.is_empty() || n_max == 0 {
        return Err(MetricsError::EmptyCorpus);
    }
    let mut num = vec![0u64; n_max];
    let mut den = vec![0u64; n_max];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for ((src, rf), hyp) in sources.iter().zip(references).zip(hypotheses) {
        hyp_len += hyp.len() as u64;
        ref_len += rf.len() as u64;
        for n in 1..=n_max {
            let h = ngram_counts(hyp, n);
            let r = ngram_counts(rf, n);
            let mut s = ngram_counts(src, n);
            s.retain(|gram, _| !r.contains_key(gram));
            let mut hit = 0u64;
            let mut miss = 0u64;
            for (gram, &c) in &h {
                hit += c.min(r.get(gram).copied().unwrap_or(0));
                miss += c.min(s.get(gram).copied().unwrap_or(0));
            }
            num[n - 1] += hit.saturating_sub(miss);
            den[n - 1] += (hyp.len() + 1).saturating_sub(n) as u64;
        }
    }
    let mut per_n = Vec::with_capacity(n_max);
    let mut log_sum = 0.0;
    let mut zero = false;
    for n in 0..n_max {
        let p = if den[n] == 0 {
            1.0
        } else {
            num[n] as f64 / den[n] as f64
        };
        per_n.push(p);
        if p == 0.0 {
            zero = true;
        } else {
            log_sum += p.ln() / n_max as f64;
        }
    }
    let score = if zero || hyp_len == 0 {
        0.0
    } else {
        let bp = (1.0 - ref_len as f64 / hyp_len as f64).exp().min(1.0);
        bp * log_sum.exp()
    };
    Ok(GleuScore {
        score,
        n_max,
        per_n,
    })
}
