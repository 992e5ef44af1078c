//! Token alignment between a source and a corrected text, merged into
//! span edits.

use crate::corpus::Edit;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Match,
    Sub,
    Del,
    Ins,
    Swap,
}

/// Damerau-Levenshtein style alignment: unit cost for substitution,
/// insertion, deletion and adjacent transposition.
fn align(source: &[String], target: &[String]) -> Vec<Op> {
    let n = source.len();
    let m = target.len();
    let mut d = vec![vec![0u32; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i as u32;
    }
    for j in 0..=m {
        d[0][j] = j as u32;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + u32::from(source[i - 1] != target[j - 1]);
            let del = d[i - 1][j] + 1;
            let ins = d[i][j - 1] + 1;
            let mut best = sub.min(del).min(ins);
            if i >= 2 && j >= 2 && source[i - 1] == target[j - 2] && source[i - 2] == target[j - 1]
            {
                best = best.min(d[i - 2][j - 2] + 1);
            }
            d[i][j] = best;
        }
    }
    let mut ops = Vec::new();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && source[i - 1] == target[j - 1] && d[i][j] == d[i - 1][j - 1] {
            ops.push(Op::Match);
            i -= 1;
            j -= 1;
        } else if i >= 2
            && j >= 2
            && source[i - 1] == target[j - 2]
            && source[i - 2] == target[j - 1]
            && d[i][j] == d[i - 2][j - 2] + 1
        {
            ops.push(Op::Swap);
            i -= 2;
            j -= 2;
        } else if i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1 {
            ops.push(Op::Sub);
            i -= 1;
            j -= 1;
        } else if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            ops.push(Op::Del);
            i -= 1;
        } else {
            ops.push(Op::Ins);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Extracts span edits turning `source` into `target`: aligns the two token
/// sequences, then merges each maximal run of non-match operations into one
/// edit. Types come out as "UNK"; applying the result reproduces `target`.
pub fn extract_edits(source: &[String], target: &[String]) -> Vec<Edit> {
    let ops = align(source, target);
    let mut edits = Vec::new();
    let (mut si, mut ti) = (0usize, 0usize);
    let mut run: Option<(usize, usize)> = None;
    let mut flush = |run: &mut Option<(usize, usize)>, si: usize, ti: usize| {
        if let Some((s0, t0)) = run.take() {
            edits.push(Edit {
                start: s0,
                end: si,
                replacement: target[t0..ti].to_vec(),
                etype: "UNK".to_string(),
                annotator: 0,
                required: true,
            });
        }
    };
    for op in ops {
        match op {
            Op::Match => {
                flush(&mut run, si, ti);
                si += 1;
                ti += 1;
            }
            Op::Sub => {
                run.get_or_insert((si, ti));
                si += 1;
                ti += 1;
            }
            Op::Del => {
                run.get_or_insert((si, ti));
                si += 1;
            }
            Op::Ins => {
                run.get_or_insert((si, ti));
                ti += 1;
            }
            Op::Swap => {
                run.get_or_insert((si, ti));
                si += 2;
                ti += 2;
            }
        }
    }
    flush(&mut run, si, ti);
    edits
}
