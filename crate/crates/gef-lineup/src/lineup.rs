//! Builds graded lineups: for each correction rate, a version of the essay
//! with that share of its edits applied and the rest re-spanned onto the new
//! text.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    detokenize, parse_m2, serialize_m2, CorpusError, Edit, M2Format, M2Record, TokenSeq,
};

#[derive(Debug, Error)]
pub enum LineupError {
    #[error("edit spans overlap: {a_start} {a_end} vs {b_start} {b_end}")]
    OverlapViolation {
        a_start: usize,
        a_end: usize,
        b_start: usize,
        b_end: usize,
    },
    #[error("edit span {start} {end} out of range for {len} tokens")]
    SpanOutOfRange { start: usize, end: usize, len: usize },
    #[error("rates must be distinct and include 0 and 1")]
    BadRates,
    #[error("bad lineup file: {0}")]
    BadFile(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type LineupResult<T> = Result<T, LineupError>;

/// A correction rate stored in basis points, so rate arithmetic is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rate(u32);

impl Rate {
    pub const ZERO: Rate = Rate(0);
    pub const FULL: Rate = Rate(10_000);

    /// From a percentage, e.g. `25.0` or `12.5`.
    pub fn from_percent(pct: f64) -> Option<Rate> {
        let bp = (pct * 100.0).round();
        if !(0.0..=10_000.0).contains(&bp) {
            return None;
        }
        Some(Rate(bp as u32))
    }

    /// From a fraction in [0, 1].
    pub fn from_fraction(frac: f64) -> Option<Rate> {
        Rate::from_percent(frac * 100.0)
    }

    pub fn basis_points(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 10_000.0
    }

    /// Row/column label: "Original" for rate 0, otherwise a percentage.
    pub fn label(self) -> String {
        if self.0 == 0 {
            return "Original".to_string();
        }
        if self.0 % 100 == 0 {
            format!("{}%", self.0 / 100)
        } else {
            format!("{}%", self.0 as f64 / 100.0)
        }
    }
}

impl Serialize for Rate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Rate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let frac = f64::deserialize(d)?;
        Rate::from_fraction(frac)
            .ok_or_else(|| serde::de::Error::custom(format!("rate {frac} out of [0, 1]")))
    }
}

/// The default five-rate lineup.
pub fn default_rates() -> Vec<Rate> {
    [0.0, 25.0, 50.0, 75.0, 100.0]
        .iter()
        .map(|&p| Rate::from_percent(p).unwrap())
        .collect()
}

/// The extended nine-rate lineup.
pub fn extended_rates() -> Vec<Rate> {
    [0.0, 15.0, 25.0, 40.0, 50.0, 60.0, 75.0, 85.0, 100.0]
        .iter()
        .map(|&p| Rate::from_percent(p).unwrap())
        .collect()
}

/// How many edits a rate selects out of `n`: round-half-up of `rate * n`,
/// computed in integer arithmetic.
pub fn chosen_count(n: usize, rate: Rate) -> usize {
    ((n as u64 * rate.basis_points() as u64 + 5_000) / 10_000) as usize
}

/// Seed-deterministic permutation of `0..n`.
pub fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

/// Per-essay seed derived from a run seed, so essays get independent
/// permutations while staying reproducible.
pub fn essay_seed(run_seed: u64, essay_id: &str) -> u64 {
    let digest = Sha256::digest(essay_id.as_bytes());
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    run_seed ^ u64::from_be_bytes(bytes)
}

/// Indices of the edits a rate selects: the first `chosen_count` entries of
/// the permutation, so subsets are nested across rates under one seed.
pub fn select_subset(edits: &[Edit], rate: Rate, seed: u64) -> BTreeSet<usize> {
    let perm = permutation(edits.len(), seed);
    perm[..chosen_count(edits.len(), rate)].iter().copied().collect()
}

fn check_disjoint(edits: &[&Edit], len: usize) -> LineupResult<()> {
    for e in edits {
        if e.start > e.end || e.end > len {
            return Err(LineupError::SpanOutOfRange {
                start: e.start,
                end: e.end,
                len,
            });
        }
    }
    for (i, a) in edits.iter().enumerate() {
        for b in &edits[i + 1..] {
            let proper = a.start < b.end && b.start < a.end;
            let twin_insert = a.is_insertion() && b.is_insertion() && a.start == b.start;
            if proper || twin_insert {
                return Err(LineupError::OverlapViolation {
                    a_start: a.start,
                    a_end: a.end,
                    b_start: b.start,
                    b_end: b.end,
                });
            }
        }
    }
    Ok(())
}

/// Applies all given edits to `source`, splicing right to left so earlier
/// spans stay valid. The set must be mutually non-overlapping.
pub fn apply_edits(source: &[String], edits: &[&Edit]) -> LineupResult<TokenSeq> {
    check_disjoint(edits, source.len())?;
    let mut order: Vec<&Edit> = edits.to_vec();
    order.sort_by(|a, b| (b.start, b.end).cmp(&(a.start, a.end)));
    let mut out: TokenSeq = source.to_vec();
    for e in order {
        out.splice(e.start..e.end, e.replacement.iter().cloned());
    }
    Ok(out)
}

/// Re-spans the unchosen edits onto the text produced by applying the chosen
/// ones: each span shifts by the token-count delta of every chosen edit
/// ending at or before its start. Returns `(original index, remapped edit)`.
pub fn remap_residual(edits: &[Edit], chosen: &BTreeSet<usize>) -> Vec<(usize, Edit)> {
    let mut out = Vec::new();
    for (i, e) in edits.iter().enumerate() {
        if chosen.contains(&i) {
            continue;
        }
        let shift: isize = chosen
            .iter()
            .map(|&j| &edits[j])
            .filter(|c| c.end <= e.start)
            .map(Edit::delta)
            .sum();
        let mut r = e.clone();
        r.start = (r.start as isize + shift) as usize;
        r.end = (r.end as isize + shift) as usize;
        out.push((i, r));
    }
    out
}

/// One member of a lineup.
#[derive(Debug, Clone, PartialEq)]
pub struct EssayVersion {
    pub essay_id: String,
    pub rate: Rate,
    pub text: TokenSeq,
    pub residual: M2Record,
    pub applied_ids: Vec<usize>,
    pub seed: u64,
}

/// All versions of one essay, rates strictly increasing from 0 to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Lineup {
    pub essay_id: String,
    pub seed: u64,
    pub versions: Vec<EssayVersion>,
}

impl Lineup {
    /// True when the underlying record had no edits, making every version
    /// textually identical.
    pub fn is_degenerate(&self) -> bool {
        self.versions.last().map_or(true, |v| v.applied_ids.is_empty())
    }

    pub fn rates(&self) -> Vec<Rate> {
        self.versions.iter().map(|v| v.rate).collect()
    }

    pub fn to_json(&self) -> String {
        let file = LineupFile {
            essay_id: self.essay_id.clone(),
            seed: self.seed,
            versions: self
                .versions
                .iter()
                .map(|v| VersionFile {
                    rate: v.rate,
                    text: detokenize(&v.text),
                    applied_ids: v.applied_ids.clone(),
                    m2: serialize_m2(&v.residual, M2Format::standard().with_source()),
                })
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&file).expect("lineup serializes");
        json.push('\n');
        json
    }

    pub fn from_json(text: &str) -> LineupResult<Lineup> {
        let file: LineupFile =
            serde_json::from_str(text).map_err(|e| LineupError::BadFile(e.to_string()))?;
        let mut versions = Vec::new();
        for v in file.versions {
            let mut records = parse_m2(&v.m2)?;
            if records.len() != 1 {
                return Err(LineupError::BadFile(format!(
                    "version {} carries {} records, expected 1",
                    v.rate.as_f64(),
                    records.len()
                )));
            }
            let mut residual = records.remove(0);
            residual.essay_id = file.essay_id.clone();
            versions.push(EssayVersion {
                essay_id: file.essay_id.clone(),
                rate: v.rate,
                text: v.text.split_whitespace().map(str::to_string).collect(),
                residual,
                applied_ids: v.applied_ids,
                seed: file.seed,
            });
        }
        Ok(Lineup {
            essay_id: file.essay_id,
            seed: file.seed,
            versions,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct LineupFile {
    essay_id: String,
    seed: u64,
    versions: Vec<VersionFile>,
}

#[derive(Serialize, Deserialize)]
struct VersionFile {
    rate: Rate,
    text: String,
    applied_ids: Vec<usize>,
    m2: String,
}

/// Builds the lineup for one record. Rates must be distinct and include
/// both 0 and 1; they are processed in increasing order.
pub fn build_lineup(record: &M2Record, rates: &[Rate], seed: u64) -> LineupResult<Lineup> {
    let mut sorted: Vec<Rate> = rates.to_vec();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != rates.len() || sorted.first() != Some(&Rate::ZERO) || sorted.last() != Some(&Rate::FULL) {
        return Err(LineupError::BadRates);
    }
    let mut versions = Vec::new();
    for &rate in &sorted {
        let chosen = select_subset(&record.edits, rate, seed);
        let picked: Vec<&Edit> = chosen.iter().map(|&i| &record.edits[i]).collect();
        let text = apply_edits(&record.source, &picked)?;
        let residual_edits: Vec<Edit> = remap_residual(&record.edits, &chosen)
            .into_iter()
            .map(|(_, e)| e)
            .collect();
        let residual = M2Record::new(record.essay_id.clone(), text.clone(), residual_edits)?;
        versions.push(EssayVersion {
            essay_id: record.essay_id.clone(),
            rate,
            text,
            residual,
            applied_ids: chosen.into_iter().collect(),
            seed,
        });
    }
    Ok(Lineup {
        essay_id: record.essay_id.clone(),
        seed,
        versions,
    })
}
