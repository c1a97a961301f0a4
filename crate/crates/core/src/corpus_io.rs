//! Readers and writers for the on-disk formats: plain-text parallel corpora,
//! Pharaoh alignments, `id ||| tokens ||| logprob` k-best lists and the
//! JSON-lines exports of token probabilities and attention matrices.
//!
//! Every `read_*` function is a thin wrapper that loads the file and hands
//! its text to the matching `parse_*` function, so the parsers themselves are
//! pure and can be used on in-memory data.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums of attention matrices must be within this distance of 1.
pub const ATTENTION_ROW_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

impl SentencePair {
    /// Builds a pair, rejecting empty sides and tokens containing whitespace.
    pub fn new(source: Vec<String>, target: Vec<String>) -> Result<Self> {
        for (side, tokens) in [("source", &source), ("target", &target)] {
            if tokens.is_empty() {
                return Err(Error::InvalidArgument(format!("{side} sentence is empty")));
            }
            if let Some(t) = tokens
                .iter()
                .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
            {
                return Err(Error::InvalidArgument(format!(
                    "{side} token {t:?} is empty or contains whitespace"
                )));
            }
        }
        Ok(SentencePair { source, target })
    }

    /// Convenience constructor from whitespace-separated strings.
    pub fn from_text(source: &str, target: &str) -> Result<Self> {
        SentencePair::new(tokenize(source), tokenize(target))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub pairs: Vec<SentencePair>,
}

impl ParallelCorpus {
    pub fn new(pairs: Vec<SentencePair>) -> Self {
        ParallelCorpus { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SentencePair> {
        self.pairs.iter()
    }

    /// Checks every alignment against the lengths of its pair.
    pub fn validate_alignments(&self, alignments: &[Alignment]) -> Result<()> {
        if alignments.len() != self.pairs.len() {
            return Err(Error::LengthMismatch {
                what: "alignments vs sentence pairs",
                left: alignments.len(),
                right: self.pairs.len(),
            });
        }
        for (pair, alignment) in self.pairs.iter().zip(alignments) {
            alignment.validate(pair.source.len(), pair.target.len())?;
        }
        Ok(())
    }
}

/// Word alignment of one sentence pair as a set of `(source, target)` links.
///
/// Links are kept sorted and free of duplicates. Bounds are only checked by
/// [`Alignment::validate`], so alignment files can be parsed on their own.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Alignment {
    links: Vec<(usize, usize)>,
}

impl Alignment {
    pub fn new<I: IntoIterator<Item = (usize, usize)>>(links: I) -> Self {
        let set: BTreeSet<(usize, usize)> = links.into_iter().collect();
        Alignment {
            links: set.into_iter().collect(),
        }
    }

    /// Links in `(source, target)` lexicographic order.
    pub fn links(&self) -> &[(usize, usize)] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn validate(&self, source_len: usize, target_len: usize) -> Result<()> {
        match self
            .links
            .iter()
            .find(|&&(i, j)| i >= source_len || j >= target_len)
        {
            Some(&(i, j)) => Err(Error::LinkOutOfBounds {
                src: i,
                tgt: j,
                src_len: source_len,
                tgt_len: target_len,
            }),
            None => Ok(()),
        }
    }

    /// For each target position, the smallest source index linked to it.
    ///
    /// Links whose target index is `>= target_len` are ignored.
    pub fn leftmost_sources(&self, target_len: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; target_len];
        // links are sorted by source first, so the first hit per target wins
        for &(i, j) in &self.links {
            if j < target_len && out[j].is_none() {
                out[j] = Some(i);
            }
        }
        out
    }

    pub fn to_pharaoh(&self) -> String {
        let mut s = String::new();
        for (k, (i, j)) in self.links.iter().enumerate() {
            if k > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{i}-{j}");
        }
        s
    }
}

/// Splits on ASCII/Unicode whitespace. Input is expected to be pre-tokenized.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_owned).collect()
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn lines(text: &str) -> Vec<&str> {
    let mut v: Vec<&str> = text.split('\n').collect();
    if v.last() == Some(&"") {
        v.pop();
    }
    for l in &mut v {
        *l = l.strip_suffix('\r').unwrap_or(l);
    }
    v
}

/// Parses one whitespace-tokenized sentence per line, rejecting blank lines.
pub fn parse_tokenized(text: &str, path: &Path) -> Result<Vec<Vec<String>>> {
    lines(text)
        .into_iter()
        .enumerate()
        .map(|(n, line)| {
            let toks = tokenize(line);
            if toks.is_empty() {
                Err(Error::EmptyLine {
                    path: path.to_path_buf(),
                    line: n + 1,
                })
            } else {
                Ok(toks)
            }
        })
        .collect()
}

pub fn read_tokenized(path: impl AsRef<Path>) -> Result<Vec<Vec<String>>> {
    let path = path.as_ref();
    parse_tokenized(&read_text(path)?, path)
}

/// Builds a corpus from the text of a source and a target file.
pub fn parse_parallel_corpus(
    src_text: &str,
    src_path: &Path,
    tgt_text: &str,
    tgt_path: &Path,
) -> Result<ParallelCorpus> {
    let (src_lines, tgt_lines) = (lines(src_text).len(), lines(tgt_text).len());
    if src_lines != tgt_lines {
        return Err(Error::LineCountMismatch {
            src_path: src_path.to_path_buf(),
            src_lines,
            tgt_path: tgt_path.to_path_buf(),
            tgt_lines,
        });
    }
    let src = parse_tokenized(src_text, src_path)?;
    let tgt = parse_tokenized(tgt_text, tgt_path)?;
    let pairs = src
        .into_iter()
        .zip(tgt)
        .enumerate()
        .map(|(n, (s, t))| SentencePair::new(s, t).map_err(|e| Error::parse(src_path, n + 1, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    Ok(ParallelCorpus { pairs })
}

pub fn read_parallel_corpus(
    src_path: impl AsRef<Path>,
    tgt_path: impl AsRef<Path>,
) -> Result<ParallelCorpus> {
    let (src_path, tgt_path) = (src_path.as_ref(), tgt_path.as_ref());
    parse_parallel_corpus(&read_text(src_path)?, src_path, &read_text(tgt_path)?, tgt_path)
}

pub fn format_parallel_corpus(corpus: &ParallelCorpus) -> (String, String) {
    let mut src = String::new();
    let mut tgt = String::new();
    for pair in &corpus.pairs {
        src.push_str(&pair.source.join(" "));
        src.push('\n');
        tgt.push_str(&pair.target.join(" "));
        tgt.push('\n');
    }
    (src, tgt)
}

/// Parses a single Pharaoh line such as `0-0 1-2`.
///
/// Errors report the 1-based index of the offending token.
pub fn parse_pharaoh(line: &str) -> Result<Alignment> {
    let mut links = Vec::new();
    for (k, token) in line.split_whitespace().enumerate() {
        let err = |reason| Error::Pharaoh {
            index: k + 1,
            token: token.to_owned(),
            reason,
        };
        let (i, j) = token.split_once('-').ok_or_else(|| err("missing '-'"))?;
        let i = i
            .parse::<usize>()
            .map_err(|_| err("source index is not a number"))?;
        let j = j
            .parse::<usize>()
            .map_err(|_| err("target index is not a number"))?;
        links.push((i, j));
    }
    Ok(Alignment::new(links))
}

/// One Pharaoh line per sentence pair; blank lines are empty alignments.
pub fn parse_alignments(text: &str, path: &Path) -> Result<Vec<Alignment>> {
    lines(text)
        .into_iter()
        .enumerate()
        .map(|(n, line)| parse_pharaoh(line).map_err(|e| Error::parse(path, n + 1, e.to_string())))
        .collect()
}

pub fn read_alignments(path: impl AsRef<Path>) -> Result<Vec<Alignment>> {
    let path = path.as_ref();
    parse_alignments(&read_text(path)?, path)
}

pub fn format_alignments(alignments: &[Alignment]) -> String {
    let mut s = String::new();
    for a in alignments {
        s.push_str(&a.to_pharaoh());
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct KBestEntry {
    pub hypothesis: Vec<String>,
    /// Teacher log-probability in nats, always `<= 0`.
    pub nmt_logprob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KBestList {
    pub sentence_id: usize,
    /// Entries in teacher rank order (rank 0 first).
    pub entries: Vec<KBestEntry>,
}

/// Parses `id ||| tokens ||| logprob` lines into per-sentence lists.
///
/// Ids must be non-decreasing so each list is one contiguous block.
pub fn parse_kbest(text: &str, path: &Path) -> Result<BTreeMap<usize, KBestList>> {
    let mut out: BTreeMap<usize, KBestList> = BTreeMap::new();
    let mut last_id: Option<usize> = None;
    for (n, line) in lines(text).into_iter().enumerate() {
        let lineno = n + 1;
        let perr = |msg: String| Error::parse(path, lineno, msg);
        let fields: Vec<&str> = line.split("|||").map(str::trim).collect();
        if fields.len() != 3 {
            return Err(perr(format!(
                "expected 3 '|||'-separated fields, found {}",
                fields.len()
            )));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| perr(format!("unparsable sentence id {:?}", fields[0])))?;
        if let Some(prev) = last_id {
            if id < prev {
                return Err(perr(format!(
                    "sentence id {id} follows {prev}; ids must be non-decreasing"
                )));
            }
        }
        last_id = Some(id);
        let hypothesis = tokenize(fields[1]);
        if hypothesis.is_empty() {
            return Err(perr("empty hypothesis".into()));
        }
        let nmt_logprob: f64 = fields[2]
            .parse()
            .map_err(|_| perr(format!("unparsable log-probability {:?}", fields[2])))?;
        if nmt_logprob.is_nan() || nmt_logprob > 0.0 {
            return Err(perr(format!("log-probability {nmt_logprob} must be <= 0")));
        }
        out.entry(id)
            .or_insert_with(|| KBestList {
                sentence_id: id,
                entries: Vec::new(),
            })
            .entries
            .push(KBestEntry {
                hypothesis,
                nmt_logprob,
            });
    }
    Ok(out)
}

pub fn read_kbest(path: impl AsRef<Path>) -> Result<BTreeMap<usize, KBestList>> {
    let path = path.as_ref();
    parse_kbest(&read_text(path)?, path)
}

pub fn format_kbest<'a, I: IntoIterator<Item = &'a KBestList>>(lists: I) -> String {
    let mut s = String::new();
    for list in lists {
        for e in &list.entries {
            let _ = writeln!(
                s,
                "{} ||| {} ||| {}",
                list.sentence_id,
                e.hypothesis.join(" "),
                e.nmt_logprob
            );
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenPredictionRecord {
    pub sentence_id: usize,
    pub position: usize,
    pub token: String,
    pub probability: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

/// Parses JSON-lines token predictions. Blank lines are skipped; record
/// indices in errors are 0-based over non-blank lines.
pub fn parse_token_predictions(text: &str) -> Result<Vec<TokenPredictionRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (index, line) in lines(text)
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
    {
        let rerr = |message: String| Error::Record { index, message };
        let rec: TokenPredictionRecord = serde_json::from_str(line).map_err(|e| rerr(e.to_string()))?;
        if !(0.0..=1.0).contains(&rec.probability) {
            return Err(rerr(format!("probability {} outside [0, 1]", rec.probability)));
        }
        if !seen.insert((rec.sentence_id, rec.position)) {
            return Err(rerr(format!(
                "duplicate position {} in sentence {}",
                rec.position, rec.sentence_id
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_token_predictions(path: impl AsRef<Path>) -> Result<Vec<TokenPredictionRecord>> {
    let path = path.as_ref();
    parse_token_predictions(&read_text(path)?).map_err(|e| match e {
        Error::Record { index, message } => Error::parse(path, index + 1, message),
        e => e,
    })
}

/// Source-attention weights of one decoding iteration and head.
///
/// `weights` is row-major with `target_len` rows of `source_len` columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionRecord {
    pub sentence_id: usize,
    pub iteration: usize,
    pub head: usize,
    pub target_len: usize,
    pub source_len: usize,
    pub weights: Vec<f64>,
}

impl AttentionRecord {
    /// Validates shape, signs and row sums; rows within tolerance are
    /// rescaled to sum to exactly 1 (up to rounding).
    pub fn new(
        sentence_id: usize,
        iteration: usize,
        head: usize,
        target_len: usize,
        source_len: usize,
        mut weights: Vec<f64>,
    ) -> std::result::Result<Self, String> {
        if iteration < 1 {
            return Err("iteration must be >= 1".into());
        }
        if target_len == 0 || source_len == 0 {
            return Err("attention matrix must have at least one row and column".into());
        }
        if weights.len() != target_len * source_len {
            return Err(format!(
                "expected {}x{} = {} weights, found {}",
                target_len,
                source_len,
                target_len * source_len,
                weights.len()
            ));
        }
        for (r, row) in weights.chunks_mut(source_len).enumerate() {
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(format!("row {r} has a negative or non-finite weight"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ATTENTION_ROW_TOLERANCE {
                return Err(format!("row {r} sums to {sum}, not 1"));
            }
            row.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(AttentionRecord {
            sentence_id,
            iteration,
            head,
            target_len,
            source_len,
            weights,
        })
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.weights.chunks(self.source_len)
    }
}

pub fn parse_attention(text: &str) -> Result<Vec<AttentionRecord>> {
    lines(text)
        .into_iter()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(index, line)| {
            let raw: AttentionRecord = serde_json::from_str(line).map_err(|e| Error::Record {
                index,
                message: e.to_string(),
            })?;
            AttentionRecord::new(
                raw.sentence_id,
                raw.iteration,
                raw.head,
                raw.target_len,
                raw.source_len,
                raw.weights,
            )
            .map_err(|message| Error::Record { index, message })
        })
        .collect()
}

pub fn read_attention(path: impl AsRef<Path>) -> Result<Vec<AttentionRecord>> {
    let path = path.as_ref();
    parse_attention(&read_text(path)?).map_err(|e| match e {
        Error::Record { index, message } => Error::parse(path, index + 1, message),
        e => e,
    })
}
