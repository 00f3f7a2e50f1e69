//! Ranking metrics and report exports: tie-aware Kendall tau-b, Pearson
//! correlation, minimum ranking, power-law exponent estimation, and the
//! per-node rank-delta report.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pair bookkeeping behind tau-b. `tied_x` / `tied_y` count pairs tied in
/// exactly one of the two vectors; pairs tied in both count in neither.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauDetail {
    pub concordant_minus_discordant: i64,
    pub tied_x_only: u64,
    pub tied_y_only: u64,
    pub tau_b: f64,
}

/// Kendall tau-b between two score vectors:
/// `(C - D) / sqrt((C + D + T)(C + D + U))` with `T`/`U` the pairs tied only
/// in `x` / only in `y`.
///
/// O(n log n): sort by `(x, y)`, then count discordant exchanges with a merge
/// sort on `y` while tallying tie runs. Errors on length mismatch, fewer than
/// two entries, or a zero denominator (one side entirely tied).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(kendall_tau_b_detail(x, y)?.tau_b)
}

pub fn kendall_tau_b_detail(x: &[f64], y: &[f64]) -> Result<TauDetail> {
    if x.len() != y.len() {
        return Err(Error::Contract(format!(
            "tau-b requires equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Contract("tau-b requires at least 2 entries".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        x[a].partial_cmp(&x[b])
            .unwrap()
            .then_with(|| y[a].partial_cmp(&y[b]).unwrap())
    });

    let run_pairs = |count: u64| count * (count.saturating_sub(1)) / 2;

    // Tie mass in x and joint tie mass in (x, y) from the (x, y)-sorted order.
    let mut tied_x = 0u64;
    let mut tied_xy = 0u64;
    let mut x_run = 1u64;
    let mut xy_run = 1u64;
    for w in order.windows(2) {
        let (prev, cur) = (w[0], w[1]);
        if x[cur] == x[prev] {
            x_run += 1;
            if y[cur] == y[prev] {
                xy_run += 1;
            } else {
                tied_xy += run_pairs(xy_run);
                xy_run = 1;
            }
        } else {
            tied_x += run_pairs(x_run);
            x_run = 1;
            tied_xy += run_pairs(xy_run);
            xy_run = 1;
        }
    }
    tied_x += run_pairs(x_run);
    tied_xy += run_pairs(xy_run);

    // Merge sort order by y, counting exchanges (discordant pairs).
    let mut swaps = 0u64;
    let mut buffer = vec![0usize; n];
    let mut width = 1;
    while width < n {
        let mut start = 0;
        while start < n {
            let mid = (start + width).min(n);
            let end = (start + 2 * width).min(n);
            let (mut i, mut j, mut k) = (start, mid, start);
            while i < mid || j < end {
                if i < mid && (j >= end || y[order[i]] <= y[order[j]]) {
                    buffer[k] = order[i];
                    i += 1;
                } else {
                    swaps += (mid - i) as u64;
                    buffer[k] = order[j];
                    j += 1;
                }
                k += 1;
            }
            start = end;
        }
        order.copy_from_slice(&buffer);
        width *= 2;
    }

    let mut tied_y = 0u64;
    let mut y_run = 1u64;
    for w in order.windows(2) {
        if y[w[1]] == y[w[0]] {
            y_run += 1;
        } else {
            tied_y += run_pairs(y_run);
            y_run = 1;
        }
    }
    tied_y += run_pairs(y_run);

    let total = run_pairs(n as u64);
    if total == tied_x || total == tied_y {
        return Err(Error::Undefined(
            "tau-b denominator is zero: one input is entirely tied",
        ));
    }
    // C - D = n0 - n1 - n2 + n3 - 2*swaps with n1/n2 full tie masses.
    let concordant_minus_discordant =
        total as i64 - tied_x as i64 - tied_y as i64 + tied_xy as i64 - 2 * swaps as i64;
    let denom = ((total - tied_x) as f64 * (total - tied_y) as f64).sqrt();
    Ok(TauDetail {
        concordant_minus_discordant,
        tied_x_only: tied_x - tied_xy,
        tied_y_only: tied_y - tied_xy,
        tau_b: concordant_minus_discordant as f64 / denom,
    })
}

/// Sample Pearson correlation (two-pass). Errors on constant input.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Contract(
            "pearson requires two equal-length vectors with >= 2 entries".into(),
        ));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(Error::Undefined("pearson is undefined for constant input"));
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Minimum-ranking scheme: every member of a tied block receives the block's
/// first position, e.g. ascending `[10, 20, 20, 40] -> [1, 2, 2, 4]`.
/// With `descending = true` the highest score gets rank 1.
pub fn min_rank(scores: &[f64], descending: bool) -> Vec<usize> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let cmp = scores[a].partial_cmp(&scores[b]).unwrap();
        if descending {
            cmp.reverse()
        } else {
            cmp
        }
    });
    let mut ranks = vec![0usize; n];
    let mut block_rank = 1;
    for (position, &index) in order.iter().enumerate() {
        if position > 0 && scores[index] != scores[order[position - 1]] {
            block_rank = position + 1;
        }
        ranks[index] = block_rank;
    }
    ranks
}

const GAMMA_MIN_TAIL: usize = 50;

/// Continuous maximum-likelihood estimate of a power-law degree exponent with
/// the half-integer correction for discrete data:
/// `1 + n_tail / sum(ln(k_i / (k_min - 0.5)))` over degrees `k_i >= k_min`.
///
/// `k_min` defaults to `max(2, ceil(mean degree))`. Errors when the tail has
/// fewer than 50 samples or no variation at all (the estimate would be
/// meaningless).
pub fn estimate_gamma(degrees: &[usize], k_min: Option<usize>) -> Result<f64> {
    if degrees.is_empty() {
        return Err(Error::InsufficientTail {
            found: 0,
            k_min: k_min.unwrap_or(2),
            need: GAMMA_MIN_TAIL,
        });
    }
    let k_min = k_min.unwrap_or_else(|| {
        let mean = degrees.iter().sum::<usize>() as f64 / degrees.len() as f64;
        (mean.ceil() as usize).max(2)
    });
    let k_min = k_min.max(1);
    let mut tail: Vec<usize> = degrees.iter().copied().filter(|&k| k >= k_min).collect();
    // Fixed summation order makes the estimate exactly permutation-invariant.
    tail.sort_unstable();
    if tail.len() < GAMMA_MIN_TAIL {
        return Err(Error::InsufficientTail {
            found: tail.len(),
            k_min,
            need: GAMMA_MIN_TAIL,
        });
    }
    if tail.iter().all(|&k| k == tail[0]) {
        return Err(Error::DegenerateTail);
    }
    let shift = k_min as f64 - 0.5;
    let log_sum: f64 = tail.iter().map(|&k| (k as f64 / shift).ln()).sum();
    Ok(1.0 + tail.len() as f64 / log_sum)
}

/// One row of a ranking report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: u64,
    pub true_score: f64,
    pub pred_score: f64,
    pub true_rank: usize,
    pub pred_rank: usize,
    /// predicted rank - true rank
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    /// `None` when tau-b is undefined (one ranking entirely tied).
    pub tau_b: Option<f64>,
    pub n: usize,
    /// Pairs tied only in the predicted scores.
    pub ties_pred: u64,
    /// Pairs tied only in the true scores.
    pub ties_true: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub rows: Vec<NodeRecord>,
    pub summary: ReportSummary,
}

/// Build the ranking report in memory. Ranks use the minimum-ranking scheme
/// with rank 1 for the most central (highest-scoring) node.
pub fn ranking_report(ids: &[u64], true_scores: &[f64], pred_scores: &[f64]) -> Result<RankingReport> {
    if ids.len() != true_scores.len() || true_scores.len() != pred_scores.len() {
        return Err(Error::Contract("ranking report inputs must have equal lengths".into()));
    }
    let true_ranks = min_rank(true_scores, true);
    let pred_ranks = min_rank(pred_scores, true);
    let rows = ids
        .iter()
        .enumerate()
        .map(|(i, &node)| NodeRecord {
            node,
            true_score: true_scores[i],
            pred_score: pred_scores[i],
            true_rank: true_ranks[i],
            pred_rank: pred_ranks[i],
            delta: pred_ranks[i] as i64 - true_ranks[i] as i64,
        })
        .collect();
    let (tau_b, ties_pred, ties_true) = match kendall_tau_b_detail(pred_scores, true_scores) {
        Ok(detail) => (Some(detail.tau_b), detail.tied_x_only, detail.tied_y_only),
        Err(Error::Undefined(_)) => (None, 0, 0),
        Err(e) => return Err(e),
    };
    Ok(RankingReport {
        rows,
        summary: ReportSummary {
            tau_b,
            n: true_scores.len(),
            ties_pred,
            ties_true,
        },
    })
}

/// Write the report as CSV (`node,true_score,pred_score,true_rank,pred_rank,delta`
/// plus a trailing summary line) and return it in memory. Nodes are numbered
/// `0..n`; use [`export_ranking_report_with_ids`] to supply original ids.
pub fn export_ranking_report<P: AsRef<Path>>(
    true_scores: &[f64],
    pred_scores: &[f64],
    path: P,
) -> Result<RankingReport> {
    let ids: Vec<u64> = (0..true_scores.len() as u64).collect();
    export_ranking_report_with_ids(&ids, true_scores, pred_scores, path)
}

pub fn export_ranking_report_with_ids<P: AsRef<Path>>(
    ids: &[u64],
    true_scores: &[f64],
    pred_scores: &[f64],
    path: P,
) -> Result<RankingReport> {
    let report = ranking_report(ids, true_scores, pred_scores)?;
    let file = std::fs::File::create(path)?;
    let mut writer = BufWriter::new(file);
    writeln!(writer, "node,true_score,pred_score,true_rank,pred_rank,delta")?;
    for row in &report.rows {
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            row.node, row.true_score, row.pred_score, row.true_rank, row.pred_rank, row.delta
        )?;
    }
    let tau = match report.summary.tau_b {
        Some(v) => v.to_string(),
        None => "undefined".to_string(),
    };
    writeln!(
        writer,
        "# tau_b={} n={} ties_pred={} ties_true={}",
        tau, report.summary.n, report.summary.ties_pred, report.summary.ties_true
    )?;
    writer.flush()?;
    Ok(report)
}

/// Parse a CSV written by [`export_ranking_report_with_ids`].
pub fn load_ranking_report<P: AsRef<Path>>(path: P) -> Result<RankingReport> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut rows = Vec::new();
    let mut summary = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let parse_err = |msg: &str| Error::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        if idx == 0 {
            continue; // header
        }
        if let Some(rest) = line.strip_prefix("# ") {
            let mut fields = std::collections::HashMap::new();
            for part in rest.split_whitespace() {
                if let Some((k, v)) = part.split_once('=') {
                    fields.insert(k.to_string(), v.to_string());
                }
            }
            let tau_b = match fields.get("tau_b").map(String::as_str) {
                Some("undefined") => None,
                Some(v) => Some(v.parse::<f64>().map_err(|_| parse_err("bad tau_b"))?),
                None => return Err(parse_err("missing tau_b")),
            };
            summary = Some(ReportSummary {
                tau_b,
                n: fields
                    .get("n")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err("missing n"))?,
                ties_pred: fields
                    .get("ties_pred")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err("missing ties_pred"))?,
                ties_true: fields
                    .get("ties_true")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| parse_err("missing ties_true"))?,
            });
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(parse_err("expected 6 columns"));
        }
        rows.push(NodeRecord {
            node: cols[0].parse().map_err(|_| parse_err("bad node"))?,
            true_score: cols[1].parse().map_err(|_| parse_err("bad true_score"))?,
            pred_score: cols[2].parse().map_err(|_| parse_err("bad pred_score"))?,
            true_rank: cols[3].parse().map_err(|_| parse_err("bad true_rank"))?,
            pred_rank: cols[4].parse().map_err(|_| parse_err("bad pred_rank"))?,
            delta: cols[5].parse().map_err(|_| parse_err("bad delta"))?,
        });
    }
    let summary = summary.ok_or(Error::Parse {
        line: 0,
        msg: "missing summary line".into(),
    })?;
    Ok(RankingReport { rows, summary })
}
