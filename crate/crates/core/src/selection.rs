//! Distilled-reference selection from teacher k-best lists.
//!
//! Every hypothesis gets `λ·sim + (1-λ)·cxty`, where `sim` is smoothed
//! sentence BLEU against the original reference and `cxty` one of three
//! complexity signals. Both components are min-max normalized within the
//! list before mixing.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aligner::{viterbi_align, word_alignment_score, TranslationTable};
use crate::complexity::sentence_frs;
use crate::corpus_io::{KBestEntry, KBestList, SentencePair};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityKind {
    /// Fuzzy reordering score of the Viterbi source↔hypothesis alignment.
    Frs,
    /// Word-alignment log-probability under the translation table.
    WordAlign,
    /// Teacher log-probability stored in the k-best list.
    Nmt,
}

impl ComplexityKind {
    pub fn needs_table(self) -> bool {
        !matches!(self, ComplexityKind::Nmt)
    }
}

impl FromStr for ComplexityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frs" => Ok(ComplexityKind::Frs),
            "walign" | "word_align" | "w-align" => Ok(ComplexityKind::WordAlign),
            "nmt" => Ok(ComplexityKind::Nmt),
            other => Err(Error::InvalidArgument(format!(
                "unknown complexity kind {other:?} (expected frs, walign or nmt)"
            ))),
        }
    }
}

impl fmt::Display for ComplexityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComplexityKind::Frs => "frs",
            ComplexityKind::WordAlign => "walign",
            ComplexityKind::Nmt => "nmt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    pub lambda: f64,
    pub complexity: ComplexityKind,
    pub max_ngram: usize,
}

impl SelectionConfig {
    pub fn new(lambda: f64, complexity: ComplexityKind) -> Result<Self> {
        let c = SelectionConfig {
            lambda,
            complexity,
            max_ngram: 4,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidArgument(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.max_ngram == 0 {
            return Err(Error::InvalidArgument("max_ngram must be >= 1".into()));
        }
        Ok(())
    }
}

/// What a complexity function may need besides the list itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct Resources<'a> {
    pub table: Option<&'a TranslationTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHypothesis {
    pub rank: usize,
    pub entry: KBestEntry,
    pub sim: f64,
    pub sim_norm: f64,
    pub cxty_raw: f64,
    pub cxty_norm: f64,
    pub total: f64,
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    m
}

/// Sentence-level BLEU with add-one smoothing on orders `n >= 2`.
///
/// Unigram precision is left unsmoothed, so a hypothesis sharing no word
/// with the reference scores 0. The brevity penalty is
/// `min(1, exp(1 - |ref|/|hyp|))`; an empty hypothesis scores 0.
pub fn smoothed_sentence_bleu<S: AsRef<str>>(hypothesis: &[S], reference: &[S], max_ngram: usize) -> f64 {
    if hypothesis.is_empty() || reference.is_empty() || max_ngram == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_ngram {
        let hyp = ngram_counts(hypothesis, n);
        let reference = ngram_counts(reference, n);
        let total = hypothesis.len().saturating_sub(n - 1) as f64;
        let matched: usize = hyp
            .iter()
            .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
            .sum();
        let p = if n == 1 {
            matched as f64 / total
        } else {
            (matched as f64 + 1.0) / (total + 1.0)
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let bp = (1.0 - reference.len() as f64 / hypothesis.len() as f64)
        .exp()
        .min(1.0);
    bp * (log_sum / max_ngram as f64).exp()
}

/// Rescales to [0, 1] within the slice; a constant slice maps to 0.5.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Raw complexity of one hypothesis under `kind`.
pub fn raw_complexity(
    entry: &KBestEntry,
    source: &[String],
    kind: ComplexityKind,
    resources: Resources<'_>,
) -> Result<f64> {
    let table = || {
        resources.table.ok_or_else(|| {
            Error::InvalidArgument(format!("complexity '{kind}' requires a translation table"))
        })
    };
    match kind {
        ComplexityKind::Nmt => Ok(entry.nmt_logprob),
        ComplexityKind::Frs | ComplexityKind::WordAlign => {
            let table = table()?;
            let pair = SentencePair::new(source.to_vec(), entry.hypothesis.clone())?;
            let alignment = viterbi_align(&pair, table);
            if kind == ComplexityKind::Frs {
                Ok(sentence_frs(&alignment, pair.target.len()))
            } else {
                word_alignment_score(&pair, &alignment, table)
            }
        }
    }
}

/// Scores every entry of `list` in rank order.
pub fn score_hypotheses(
    list: &KBestList,
    reference: &[String],
    source: &[String],
    config: &SelectionConfig,
    resources: Resources<'_>,
) -> Result<Vec<ScoredHypothesis>> {
    config.validate()?;
    if config.complexity.needs_table() && resources.table.is_none() {
        return Err(Error::InvalidArgument(format!(
            "complexity '{}' requires a translation table",
            config.complexity
        )));
    }
    let sims: Vec<f64> = list
        .entries
        .iter()
        .map(|e| smoothed_sentence_bleu(&e.hypothesis, reference, config.max_ngram))
        .collect();
    let raws = list
        .entries
        .iter()
        .map(|e| raw_complexity(e, source, config.complexity, resources))
        .collect::<Result<Vec<f64>>>()?;
    let sim_norm = min_max_normalize(&sims);
    let cxty_norm = min_max_normalize(&raws);
    let lambda = config.lambda;
    Ok(list
        .entries
        .iter()
        .enumerate()
        .map(|(rank, e)| ScoredHypothesis {
            rank,
            entry: e.clone(),
            sim: sims[rank],
            sim_norm: sim_norm[rank],
            cxty_raw: raws[rank],
            cxty_norm: cxty_norm[rank],
            total: lambda * sim_norm[rank] + (1.0 - lambda) * cxty_norm[rank],
        })
        .collect())
}

/// Index of the highest total; ties go to the lowest rank.
pub fn best_index(scored: &[ScoredHypothesis]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, s) in scored.iter().enumerate() {
        if best.is_none_or(|b| s.total > scored[b].total) {
            best = Some(k);
        }
    }
    best
}

/// The selected distilled reference for one source sentence.
pub fn select_reference(
    list: &KBestList,
    reference: &[String],
    source: &[String],
    config: &SelectionConfig,
    resources: Resources<'_>,
) -> Result<KBestEntry> {
    if list.entries.is_empty() {
        return Err(Error::Empty("k-best list"));
    }
    let scored = score_hypotheses(list, reference, source, config, resources)?;
    let k = best_index(&scored).expect("non-empty list");
    Ok(scored[k].entry.clone())
}
