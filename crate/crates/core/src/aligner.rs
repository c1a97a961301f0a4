//! IBM Model 1 word alignment: EM training of `p(y|x)`, Viterbi links and
//! the per-sentence word-alignment score.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::corpus_io::{Alignment, ParallelCorpus, SentencePair};
use crate::error::{Error, Result};

/// Source-side token standing for "aligned to nothing".
pub const NULL_WORD: &str = "<null>";

/// Probability substituted for zero or unseen `p(y|x)` at alignment and
/// scoring time.
pub const PROB_FLOOR: f64 = 1e-12;

// Sentences per E-step work unit and per sequential reduction batch.
const CHUNK: usize = 64;
const BATCH: usize = 64 * CHUNK;

/// Word translation probabilities `p(y|x)`, including the `NULL_WORD` row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TranslationTable {
    rows: BTreeMap<String, BTreeMap<String, f64>>,
}

impl TranslationTable {
    pub fn from_rows(rows: BTreeMap<String, BTreeMap<String, f64>>) -> Self {
        TranslationTable { rows }
    }

    /// `p(y|x)`, zero when the pair was never seen.
    pub fn prob(&self, source: &str, target: &str) -> f64 {
        self.rows
            .get(source)
            .and_then(|r| r.get(target))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn floored_prob(&self, source: &str, target: &str) -> f64 {
        self.prob(source, target).max(PROB_FLOOR)
    }

    pub fn row(&self, source: &str) -> Option<&BTreeMap<String, f64>> {
        self.rows.get(source)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, f64>)> {
        self.rows.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Serializes as `x \t y \t p` lines sorted by `x` then `y`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (x, row) in &self.rows {
            for (y, p) in row {
                let _ = writeln!(s, "{x}\t{y}\t{p}");
            }
        }
        s
    }

    pub fn parse_tsv(text: &str, path: &Path) -> Result<Self> {
        let mut rows: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(path, n + 1, "expected 3 tab-separated fields"));
            }
            let p: f64 = f[2]
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, n + 1, format!("bad probability {:?}", f[2])))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::parse(
                    path,
                    n + 1,
                    format!("probability {p} outside [0, 1]"),
                ));
            }
            rows.entry(f[0].to_owned())
                .or_default()
                .insert(f[1].to_owned(), p);
        }
        Ok(TranslationTable { rows })
    }

    pub fn read_tsv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text, path)
    }
}

/// Result of [`train_ibm1_with_history`].
#[derive(Debug, Clone)]
pub struct Ibm1Training {
    pub table: TranslationTable,
    /// Corpus log-likelihood (nats) under the initial table and after each
    /// iteration; `iterations + 1` values.
    pub log_likelihoods: Vec<f64>,
}

struct Interner {
    index: HashMap<String, u32>,
    words: Vec<String>,
}

impl Interner {
    fn new() -> Self {
        Interner {
            index: HashMap::new(),
            words: Vec::new(),
        }
    }

    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.index.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.index.insert(w.to_owned(), id);
        self.words.push(w.to_owned());
        id
    }
}

/// Dense-id model: for source id `x`, `targets[x]` is the sorted list of
/// co-occurring target ids and `probs[x]` the matching probabilities.
struct Model {
    targets: Vec<Vec<u32>>,
    probs: Vec<Vec<f64>>,
}

impl Model {
    #[inline]
    fn slot(&self, x: u32, y: u32) -> usize {
        // every (x, y) looked up during training co-occurs by construction
        self.targets[x as usize]
            .binary_search(&y)
            .expect("co-occurring pair")
    }
}

type Encoded = (Vec<u32>, Vec<u32>);

/// Expected counts of one chunk, in sentence then target-position then
/// source-position order, plus the per-sentence log-likelihoods.
fn e_step_chunk(model: &Model, chunk: &[Encoded], collect: bool) -> (Vec<(u32, u32, f64)>, Vec<f64>) {
    let mut contrib = Vec::new();
    let mut lls = Vec::with_capacity(chunk.len());
    let mut scratch: Vec<(usize, f64)> = Vec::new();
    for (src, tgt) in chunk {
        let norm = (src.len() as f64).ln();
        let mut ll = 0.0;
        for &y in tgt {
            scratch.clear();
            let mut denom = 0.0;
            for &x in src {
                let slot = model.slot(x, y);
                let p = model.probs[x as usize][slot];
                scratch.push((slot, p));
                denom += p;
            }
            ll += denom.ln() - norm;
            if collect {
                for (&x, &(slot, p)) in src.iter().zip(&scratch) {
                    contrib.push((x, slot as u32, p / denom));
                }
            }
        }
        lls.push(ll);
    }
    (contrib, lls)
}

/// One pass over the corpus. Returns the log-likelihood under `model` and,
/// if `counts` is given, accumulates expected counts into it.
///
/// Contributions are applied sequentially in corpus order, so the result is
/// bit-identical whatever the thread count.
fn e_step(model: &Model, corpus: &[Encoded], mut counts: Option<&mut Vec<Vec<f64>>>) -> f64 {
    let mut ll = 0.0;
    for batch in corpus.chunks(BATCH) {
        let collect = counts.is_some();
        let parts: Vec<_> = batch
            .par_chunks(CHUNK)
            .map(|c| e_step_chunk(model, c, collect))
            .collect();
        for (contrib, lls) in parts {
            for v in lls {
                ll += v;
            }
            if let Some(counts) = counts.as_deref_mut() {
                for (x, slot, c) in contrib {
                    counts[x as usize][slot as usize] += c;
                }
            }
        }
    }
    ll
}

/// Trains IBM Model 1 with `iterations` rounds of EM.
pub fn train_ibm1(corpus: &ParallelCorpus, iterations: usize) -> Result<TranslationTable> {
    train_ibm1_with_history(corpus, iterations).map(|t| t.table)
}

/// Like [`train_ibm1`], also returning the log-likelihood trajectory.
///
/// A `NULL_WORD` is prepended to every source sentence. Each source word
/// starts from a uniform distribution over the target words it co-occurs
/// with.
pub fn train_ibm1_with_history(corpus: &ParallelCorpus, iterations: usize) -> Result<Ibm1Training> {
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    if corpus.is_empty() {
        return Err(Error::Empty("training corpus"));
    }

    let mut src_vocab = Interner::new();
    let mut tgt_vocab = Interner::new();
    let null = src_vocab.intern(NULL_WORD);
    let encoded: Vec<Encoded> = corpus
        .iter()
        .map(|p| {
            let mut s = Vec::with_capacity(p.source.len() + 1);
            s.push(null);
            s.extend(p.source.iter().map(|w| src_vocab.intern(w)));
            let t = p.target.iter().map(|w| tgt_vocab.intern(w)).collect();
            (s, t)
        })
        .collect();

    let mut targets: Vec<Vec<u32>> = vec![Vec::new(); src_vocab.words.len()];
    for (s, t) in &encoded {
        for &x in s {
            targets[x as usize].extend_from_slice(t);
        }
    }
    for row in &mut targets {
        row.sort_unstable();
        row.dedup();
    }
    let probs = targets
        .iter()
        .map(|row| vec![1.0 / row.len() as f64; row.len()])
        .collect();
    let mut model = Model { targets, probs };

    let mut log_likelihoods = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let mut counts: Vec<Vec<f64>> = model.probs.iter().map(|r| vec![0.0; r.len()]).collect();
        log_likelihoods.push(e_step(&model, &encoded, Some(&mut counts)));
        for (p_row, c_row) in model.probs.iter_mut().zip(counts) {
            let total: f64 = c_row.iter().sum();
            if total > 0.0 {
                for (p, c) in p_row.iter_mut().zip(c_row) {
                    *p = c / total;
                }
            }
        }
    }
    log_likelihoods.push(e_step(&model, &encoded, None));

    let mut rows = BTreeMap::new();
    for (x, (ts, ps)) in model.targets.iter().zip(&model.probs).enumerate() {
        let row: BTreeMap<String, f64> = ts
            .iter()
            .zip(ps)
            .map(|(&y, &p)| (tgt_vocab.words[y as usize].clone(), p))
            .collect();
        rows.insert(src_vocab.words[x].clone(), row);
    }
    Ok(Ibm1Training {
        table: TranslationTable { rows },
        log_likelihoods,
    })
}

/// Posterior `P(a_j = i | x, y)` for every target position `j` (outer) and
/// source candidate `i` (inner; index 0 is NULL, then source positions).
pub fn link_posteriors(pair: &SentencePair, table: &TranslationTable) -> Vec<Vec<f64>> {
    pair.target
        .iter()
        .map(|y| {
            let ps: Vec<f64> = std::iter::once(NULL_WORD)
                .chain(pair.source.iter().map(String::as_str))
                .map(|x| table.floored_prob(x, y))
                .collect();
            let z: f64 = ps.iter().sum();
            ps.into_iter().map(|p| p / z).collect()
        })
        .collect()
}

/// Links each target word to its most probable source word.
///
/// Ties between source positions go to the smallest index; NULL wins only
/// when strictly more probable than every source word, and NULL links are
/// left out of the result. Unseen pairs score [`PROB_FLOOR`].
pub fn viterbi_align(pair: &SentencePair, table: &TranslationTable) -> Alignment {
    let mut links = Vec::with_capacity(pair.target.len());
    for (j, y) in pair.target.iter().enumerate() {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, x) in pair.source.iter().enumerate() {
            let p = table.floored_prob(x, y);
            if p > best.1 {
                best = (i, p);
            }
        }
        if table.floored_prob(NULL_WORD, y) <= best.1 {
            links.push((best.0, j));
        }
    }
    Alignment::new(links)
}

/// `Σ_j ln p(y_j | x_a(j))` in nats, where `a(j)` is the leftmost source
/// linked to `j`; unlinked targets are scored against NULL.
pub fn word_alignment_score(
    pair: &SentencePair,
    alignment: &Alignment,
    table: &TranslationTable,
) -> Result<f64> {
    alignment.validate(pair.source.len(), pair.target.len())?;
    let heads = alignment.leftmost_sources(pair.target.len());
    Ok(pair
        .target
        .iter()
        .zip(heads)
        .map(|(y, head)| {
            let x = head.map_or(NULL_WORD, |i| pair.source[i].as_str());
            table.floored_prob(x, y).ln()
        })
        .sum())
}
