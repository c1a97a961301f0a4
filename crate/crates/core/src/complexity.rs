//! Corpus-level complexity measures: fuzzy reordering score, lexical
//! diversity and faithfulness. Entropies and divergences are in nats.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{Alignment, ParallelCorpus};
use crate::error::{Error, Result};

/// Default additive smoothing constant for [`faithfulness`].
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Link counts `c(x, y)` gathered from aligned sentence pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConditionalTable {
    counts: BTreeMap<String, BTreeMap<String, u64>>,
}

impl ConditionalTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, source: &str, target: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self
            .counts
            .entry(source.to_owned())
            .or_default()
            .entry(target.to_owned())
            .or_insert(0) += count;
    }

    /// Number of source types with at least one count (`|V_x|`).
    pub fn vocab_size(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.counts.keys().map(String::as_str)
    }

    pub fn counts(&self, source: &str) -> Option<&BTreeMap<String, u64>> {
        self.counts.get(source)
    }

    /// `p(·|x)` by count normalization, in target-word order.
    pub fn distribution(&self, source: &str) -> Option<BTreeMap<&str, f64>> {
        let row = self.counts.get(source)?;
        let total: u64 = row.values().sum();
        Some(
            row.iter()
                .map(|(y, &c)| (y.as_str(), c as f64 / total as f64))
                .collect(),
        )
    }

    fn merge(mut self, other: ConditionalTable) -> Self {
        for (x, row) in other.counts {
            let dst = self.counts.entry(x).or_default();
            for (y, c) in row {
                *dst.entry(y).or_insert(0) += c;
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub frs: f64,
    pub lexical_diversity: f64,
    /// `None` when no reference corpus was supplied.
    pub faithfulness: Option<f64>,
    pub sentence_count: usize,
}

/// Fuzzy reordering score of one sentence.
///
/// Each aligned target position is reduced to its leftmost source index;
/// a chunk ends whenever the next aligned position does not continue at
/// source index `+1`. With `C` chunks over `M` aligned positions the score
/// is `1 - (C-1)/(M-1)`, and `1.0` when `M <= 1`.
pub fn sentence_frs(alignment: &Alignment, target_len: usize) -> f64 {
    let reduced: Vec<usize> = alignment
        .leftmost_sources(target_len)
        .into_iter()
        .flatten()
        .collect();
    frs_of_map(&reduced)
}

/// FRS of an already-reduced map (aligned target positions in order).
pub fn frs_of_map(reduced: &[usize]) -> f64 {
    let m = reduced.len();
    if m <= 1 {
        return 1.0;
    }
    let chunks = 1 + reduced.windows(2).filter(|w| w[1] != w[0] + 1).count();
    1.0 - (chunks - 1) as f64 / (m - 1) as f64
}

/// Unweighted mean of [`sentence_frs`] over the corpus.
pub fn corpus_frs(corpus: &ParallelCorpus, alignments: &[Alignment]) -> Result<f64> {
    corpus.validate_alignments(alignments)?;
    if corpus.is_empty() {
        return Err(Error::Empty("corpus"));
    }
    let scores: Vec<f64> = corpus
        .pairs
        .par_iter()
        .zip(alignments)
        .map(|(p, a)| sentence_frs(a, p.target.len()))
        .collect();
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Counts one `(x_i, y_j)` event per alignment link.
pub fn conditional_distribution(
    corpus: &ParallelCorpus,
    alignments: &[Alignment],
) -> Result<ConditionalTable> {
    corpus.validate_alignments(alignments)?;
    // integer counts: the merge order cannot change the result
    Ok(corpus
        .pairs
        .par_iter()
        .zip(alignments)
        .fold(ConditionalTable::new, |mut t, (p, a)| {
            for &(i, j) in a.links() {
                t.add(&p.source[i], &p.target[j], 1);
            }
            t
        })
        .reduce(ConditionalTable::new, ConditionalTable::merge))
}

fn entropy<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .fold(0.0, |h, p| h - p * p.ln())
}

/// Mean conditional entropy `H(y|x)` over the source vocabulary.
pub fn lexical_diversity(table: &ConditionalTable) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::Empty("source vocabulary"));
    }
    let total: f64 = table
        .sources()
        .map(|x| entropy(table.distribution(x).unwrap().into_values()))
        .sum();
    Ok(total / table.vocab_size() as f64)
}

/// Mean `KL(p_r(·|x) ‖ p̃_d(·|x))` over the real table's source vocabulary.
///
/// `p̃_d` adds `alpha` to every distilled probability on the union of both
/// supports and renormalizes. A source word missing from the distilled
/// table is compared against the uniform distribution on the real support.
pub fn faithfulness(real: &ConditionalTable, distilled: &ConditionalTable, alpha: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    if real.is_empty() {
        return Err(Error::Empty("source vocabulary"));
    }
    let mut total = 0.0;
    for x in real.sources() {
        let p_r = real.distribution(x).unwrap();
        let kl = match distilled.distribution(x) {
            Some(p_d) => {
                let support = p_r
                    .keys()
                    .chain(p_d.keys())
                    .collect::<std::collections::BTreeSet<_>>()
                    .len();
                let z = 1.0 + alpha * support as f64;
                p_r.iter()
                    .map(|(y, &pr)| {
                        let q = (p_d.get(y).copied().unwrap_or(0.0) + alpha) / z;
                        pr * (pr / q).ln()
                    })
                    .sum::<f64>()
            }
            None => {
                let q = 1.0 / p_r.len() as f64;
                p_r.values().map(|&pr| pr * (pr / q).ln()).sum()
            }
        };
        total += kl;
    }
    Ok(total / real.vocab_size() as f64)
}

/// FRS, lexical diversity and (optionally) faithfulness of one corpus.
pub fn complexity_report(
    corpus: &ParallelCorpus,
    alignments: &[Alignment],
    reference: Option<(&ParallelCorpus, &[Alignment])>,
    alpha: f64,
) -> Result<ComplexityReport> {
    let frs = corpus_frs(corpus, alignments)?;
    let table = conditional_distribution(corpus, alignments)?;
    let lexical_diversity = lexical_diversity(&table)?;
    let faithfulness = match reference {
        Some((rc, ra)) => {
            let real = conditional_distribution(rc, ra)?;
            Some(faithfulness(&real, &table, alpha)?)
        }
        None => None,
    };
    Ok(ComplexityReport {
        frs,
        lexical_diversity,
        faithfulness,
        sentence_count: corpus.len(),
    })
}
