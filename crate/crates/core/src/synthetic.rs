//! Seeded generators for small synthetic parallel corpora with known
//! alignments. Used by the bundled demo data, the browser demo and tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus_io::{
    Alignment, AttentionRecord, KBestEntry, KBestList, ParallelCorpus, SentencePair, TokenPredictionRecord,
};

/// A corpus together with its gold alignments.
#[derive(Debug, Clone)]
pub struct AlignedCorpus {
    pub corpus: ParallelCorpus,
    pub alignments: Vec<Alignment>,
}

fn src_word(i: usize) -> String {
    format!("s{i}")
}

fn tgt_word(i: usize, variant: usize) -> String {
    format!("t{i}{}", (b'a' + variant as u8) as char)
}

/// Sentences over a one-to-one lexicon `s{i} -> t{i}a`, with distinct
/// words per sentence and the target side shuffled.
pub fn bijective_corpus(seed: u64, pairs: usize, lexicon: usize) -> AlignedCorpus {
    assert!(lexicon >= 3, "lexicon too small");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab: Vec<usize> = (0..lexicon).collect();
    let mut out = AlignedCorpus {
        corpus: ParallelCorpus::default(),
        alignments: Vec::with_capacity(pairs),
    };
    for _ in 0..pairs {
        let len = rng.gen_range(2..=lexicon.min(8));
        let words: Vec<usize> = vocab.choose_multiple(&mut rng, len).copied().collect();
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut rng);
        // target position j carries source word perm[j]
        let source = words.iter().map(|&w| src_word(w)).collect();
        let target = perm.iter().map(|&i| tgt_word(words[i], 0)).collect();
        out.corpus
            .pairs
            .push(SentencePair::new(source, target).expect("non-empty"));
        out.alignments
            .push(Alignment::new(perm.iter().enumerate().map(|(j, &i)| (i, j))));
    }
    out
}

/// A "real" corpus and its "distilled" counterpart over the same sources.
#[derive(Debug, Clone)]
pub struct RealAndDistilled {
    pub real: AlignedCorpus,
    pub distilled: AlignedCorpus,
}

/// Builds a synonym-rich, locally reordered "real" corpus and a
/// deterministic monotone "distilled" corpus for the same source sentences.
///
/// Each source word `s{i}` has one to three target synonyms. The real
/// side picks a synonym at random and swaps adjacent target blocks with
/// probability `reorder_prob` per sentence; the distilled side always
/// picks the first synonym and keeps source order.
pub fn real_and_distilled(seed: u64, pairs: usize, vocab: usize, reorder_prob: f64) -> RealAndDistilled {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let synonyms: Vec<usize> = (0..vocab).map(|_| rng.gen_range(1..=3)).collect();
    let mut real = AlignedCorpus {
        corpus: ParallelCorpus::default(),
        alignments: Vec::with_capacity(pairs),
    };
    let mut distilled = real.clone();
    for _ in 0..pairs {
        let len = rng.gen_range(3..=9);
        let words: Vec<usize> = (0..len).map(|_| rng.gen_range(0..vocab)).collect();
        let source: Vec<String> = words.iter().map(|&w| src_word(w)).collect();

        let mut order: Vec<usize> = (0..len).collect();
        if rng.gen_bool(reorder_prob) {
            // swap two adjacent blocks [a, b) and [b, c)
            let a = rng.gen_range(0..len - 1);
            let b = rng.gen_range(a + 1..len);
            let c = rng.gen_range(b + 1..=len);
            order[a..c].rotate_left(b - a);
        }
        let real_target: Vec<String> = order
            .iter()
            .map(|&i| tgt_word(words[i], rng.gen_range(0..synonyms[words[i]])))
            .collect();
        real.corpus
            .pairs
            .push(SentencePair::new(source.clone(), real_target).expect("non-empty"));
        real.alignments
            .push(Alignment::new(order.iter().enumerate().map(|(j, &i)| (i, j))));

        let dist_target: Vec<String> = words.iter().map(|&w| tgt_word(w, 0)).collect();
        distilled
            .corpus
            .pairs
            .push(SentencePair::new(source, dist_target).expect("non-empty"));
        distilled
            .alignments
            .push(Alignment::new((0..len).map(|i| (i, i))));
    }
    RealAndDistilled { real, distilled }
}

/// Teacher-style k-best lists for the sources of `data`.
///
/// Rank 0 is the distilled target; lower ranks swap in random synonyms
/// and occasionally reorder, with log-probabilities that decrease with
/// the number of edits (plus noise), sorted best first.
pub fn kbest_lists(seed: u64, data: &RealAndDistilled, k: usize) -> Vec<KBestList> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    data.distilled
        .corpus
        .iter()
        .enumerate()
        .map(|(id, pair)| {
            let real = &data.real.corpus.pairs[id].target;
            let mut entries: Vec<KBestEntry> = (0..k)
                .map(|r| {
                    let mut hyp = pair.target.clone();
                    let mut edits = 0usize;
                    if r > 0 {
                        for tok in hyp.iter_mut() {
                            if rng.gen_bool(0.3) {
                                // borrow the real side's word choice when one lines up
                                if let Some(alt) =
                                    real.iter().find(|t| t[..t.len() - 1] == tok[..tok.len() - 1])
                                {
                                    if alt != tok {
                                        *tok = alt.clone();
                                        edits += 1;
                                    }
                                }
                            }
                        }
                        if hyp.len() >= 2 && rng.gen_bool(0.4) {
                            let a = rng.gen_range(0..hyp.len() - 1);
                            hyp.swap(a, a + 1);
                            edits += 1;
                        }
                    }
                    let base = 0.4 * hyp.len() as f64;
                    let nmt_logprob = -(base + 0.8 * edits as f64 + rng.gen_range(0.0..0.5));
                    KBestEntry {
                        hypothesis: hyp,
                        nmt_logprob,
                    }
                })
                .collect();
            entries.sort_by(|a, b| b.nmt_logprob.total_cmp(&a.nmt_logprob));
            KBestList {
                sentence_id: id,
                entries,
            }
        })
        .collect()
}

/// Overconfident token predictions: confidences skew high and a token is
/// correct with probability `confidence^1.5`.
pub fn token_predictions(seed: u64, sentences: usize) -> Vec<TokenPredictionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for sentence_id in 0..sentences {
        for position in 0..rng.gen_range(3..12) {
            let probability: f64 = rng.gen::<f64>().sqrt();
            let correct = rng.gen_bool(probability.powf(1.5));
            out.push(TokenPredictionRecord {
                sentence_id,
                position,
                token: format!("w{}", rng.gen_range(0..50)),
                probability,
                correct: Some(correct),
            });
        }
    }
    out
}

/// Attention maps that sharpen around a noisy diagonal as decoding
/// iterations progress.
pub fn attention_records(
    seed: u64,
    sentences: usize,
    iterations: usize,
    heads: usize,
) -> Vec<AttentionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for sentence_id in 0..sentences {
        let s = rng.gen_range(3..10);
        let t = rng.gen_range(3..10);
        let centres: Vec<f64> = (0..t)
            .map(|j| (j as f64 * s as f64 / t as f64 + rng.gen_range(-1.0..1.0)).clamp(0.0, (s - 1) as f64))
            .collect();
        for iteration in 1..=iterations {
            for head in 0..heads {
                let sharp = 0.5 + iteration as f64 * rng.gen_range(0.3..0.7);
                let mut w = Vec::with_capacity(t * s);
                for c in &centres {
                    let row: Vec<f64> = (0..s).map(|i| (-sharp * (i as f64 - c).powi(2)).exp()).collect();
                    let z: f64 = row.iter().sum();
                    w.extend(row.into_iter().map(|v| v / z));
                }
                out.push(
                    AttentionRecord::new(sentence_id, iteration, head, t, s, w).expect("normalized rows"),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seeded_and_valid() {
        let a = bijective_corpus(7, 50, 20);
        let b = bijective_corpus(7, 50, 20);
        assert_eq!(a.corpus, b.corpus);
        assert!(a.corpus.validate_alignments(&a.alignments).is_ok());

        let rd = real_and_distilled(3, 40, 30, 0.7);
        assert!(rd.real.corpus.validate_alignments(&rd.real.alignments).is_ok());
        assert!(rd
            .distilled
            .corpus
            .validate_alignments(&rd.distilled.alignments)
            .is_ok());
        for (r, d) in rd.real.corpus.iter().zip(rd.distilled.corpus.iter()) {
            assert_eq!(r.source, d.source);
        }
    }
}
