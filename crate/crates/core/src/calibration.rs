//! Confidence and calibration of exported model outputs: attention
//! confidence, token-level accuracy labels and expected calibration error.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus_io::{AttentionRecord, TokenPredictionRecord};
use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub count: usize,
    pub mean_confidence: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub accuracy: f64,
    pub confidence: f64,
    pub ece: f64,
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationReport {
    /// ECE recomputed from the bin summaries alone.
    pub fn ece_from_bins(&self) -> f64 {
        ece_from_bins(&self.bins)
    }

    pub fn token_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

fn ece_from_bins(bins: &[CalibrationBin]) -> f64 {
    let n: usize = bins.iter().map(|b| b.count).sum();
    if n == 0 {
        return 0.0;
    }
    bins.iter()
        .filter(|b| b.count > 0)
        .map(|b| b.count as f64 / n as f64 * (b.mean_accuracy - b.mean_confidence).abs())
        .sum()
}

/// Mean over target rows of the largest attention weight in the row.
pub fn attention_confidence(record: &AttentionRecord) -> f64 {
    let sum: f64 = record
        .rows()
        .map(|row| row.iter().copied().fold(0.0, f64::max))
        .sum();
    sum / record.target_len as f64
}

/// Mean attention confidence per decoding iteration, pooling all
/// sentences and heads with equal weight.
pub fn confidence_by_iteration(records: &[AttentionRecord]) -> Result<BTreeMap<usize, f64>> {
    if records.is_empty() {
        return Err(Error::Empty("attention records"));
    }
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.iteration).or_insert((0.0, 0));
        e.0 += attention_confidence(r);
        e.1 += 1;
    }
    Ok(acc.into_iter().map(|(it, (s, n))| (it, s / n as f64)).collect())
}

/// Labels each hypothesis token correct iff a minimum-edit-distance
/// alignment to the reference matches it to an identical token.
///
/// Among optimal alignments the walk from the left prefers, in order:
/// a match, a substitution, skipping a reference token, skipping a
/// hypothesis token.
pub fn token_accuracy<S: AsRef<str>>(hypothesis: &[S], reference: &[S]) -> Vec<bool> {
    let (n, m) = (hypothesis.len(), reference.len());
    // dist[i][j] = edit distance between hypothesis[i..] and reference[j..]
    let w = m + 1;
    let mut dist = vec![0usize; (n + 1) * w];
    for i in (0..=n).rev() {
        for j in (0..=m).rev() {
            dist[i * w + j] = if i == n {
                m - j
            } else if j == m {
                n - i
            } else {
                let diag =
                    dist[(i + 1) * w + j + 1] + usize::from(hypothesis[i].as_ref() != reference[j].as_ref());
                diag.min(1 + dist[(i + 1) * w + j]).min(1 + dist[i * w + j + 1])
            };
        }
    }

    let mut labels = vec![false; n];
    let (mut i, mut j) = (0, 0);
    while i < n {
        let here = dist[i * w + j];
        if j < m {
            let same = hypothesis[i].as_ref() == reference[j].as_ref();
            let diag = dist[(i + 1) * w + j + 1];
            if same && diag == here {
                labels[i] = true;
                i += 1;
                j += 1;
                continue;
            }
            if !same && diag + 1 == here {
                i += 1;
                j += 1;
                continue;
            }
            if dist[i * w + j + 1] + 1 == here {
                j += 1;
                continue;
            }
        }
        i += 1;
    }
    labels
}

/// Unweighted mean token probability.
pub fn average_confidence(records: &[TokenPredictionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("token predictions"));
    }
    Ok(records.iter().map(|r| r.probability).sum::<f64>() / records.len() as f64)
}

/// Equal-width-bin expected calibration error.
///
/// A confidence `c` falls in bin `min(floor(c * n_bins), n_bins - 1)`.
pub fn expected_calibration_error(
    records: &[TokenPredictionRecord],
    n_bins: usize,
) -> Result<CalibrationReport> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be >= 1".into()));
    }
    if records.is_empty() {
        return Err(Error::Empty("token predictions"));
    }
    let mut counts = vec![0usize; n_bins];
    let mut conf_sum = vec![0.0f64; n_bins];
    let mut correct = vec![0usize; n_bins];
    for (index, r) in records.iter().enumerate() {
        let ok = r.correct.ok_or_else(|| Error::Record {
            index,
            message: format!(
                "missing correctness flag (sentence {}, position {})",
                r.sentence_id, r.position
            ),
        })?;
        let b = ((r.probability * n_bins as f64).floor() as usize).min(n_bins - 1);
        counts[b] += 1;
        conf_sum[b] += r.probability;
        correct[b] += usize::from(ok);
    }
    let bins: Vec<CalibrationBin> = (0..n_bins)
        .map(|b| {
            let n = counts[b];
            if n == 0 {
                CalibrationBin {
                    count: 0,
                    mean_confidence: 0.0,
                    mean_accuracy: 0.0,
                }
            } else {
                CalibrationBin {
                    count: n,
                    mean_confidence: conf_sum[b] / n as f64,
                    mean_accuracy: correct[b] as f64 / n as f64,
                }
            }
        })
        .collect();
    let total = records.len() as f64;
    Ok(CalibrationReport {
        accuracy: correct.iter().sum::<usize>() as f64 / total,
        confidence: conf_sum.iter().sum::<f64>() / total,
        ece: ece_from_bins(&bins),
        bins,
    })
}

/// Fills missing `correct` flags from hypothesis/reference token lines.
///
/// `sentence_id` indexes the lines and `position` the hypothesis tokens.
/// Records that already carry a flag are left alone.
pub fn fill_correctness<S: AsRef<str>>(
    records: &mut [TokenPredictionRecord],
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
) -> Result<()> {
    if hypotheses.len() != references.len() {
        return Err(Error::LengthMismatch {
            what: "hypothesis vs reference lines",
            left: hypotheses.len(),
            right: references.len(),
        });
    }
    let mut cache: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    for (index, r) in records.iter_mut().enumerate() {
        if r.correct.is_some() {
            continue;
        }
        let sid = r.sentence_id;
        if sid >= hypotheses.len() {
            return Err(Error::Record {
                index,
                message: format!("sentence {sid} has no hypothesis line"),
            });
        }
        let labels = cache
            .entry(sid)
            .or_insert_with(|| token_accuracy(&hypotheses[sid], &references[sid]));
        match labels.get(r.position) {
            Some(&ok) => r.correct = Some(ok),
            None => {
                return Err(Error::Record {
                    index,
                    message: format!(
                        "position {} beyond hypothesis length {} in sentence {sid}",
                        r.position,
                        labels.len()
                    ),
                })
            }
        }
    }
    Ok(())
}
