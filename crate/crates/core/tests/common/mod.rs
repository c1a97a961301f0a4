//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use distillens::corpus_io::{KBestEntry, KBestList};

/// Minimal number of chunks over all 2^(M-1) ways of cutting the map,
/// where a chunk is valid iff each step inside it advances the source
/// index by exactly one.
pub fn naive_chunks(map: &[usize]) -> usize {
    let m = map.len();
    if m == 0 {
        return 0;
    }
    let mut best = usize::MAX;
    for cuts in 0u32..(1 << (m - 1)) {
        let mut valid = true;
        for k in 0..m - 1 {
            let cut_here = cuts & (1 << k) != 0;
            if !cut_here && map[k + 1] != map[k] + 1 {
                valid = false;
                break;
            }
        }
        if valid {
            best = best.min(cuts.count_ones() as usize + 1);
        }
    }
    best
}

pub fn naive_frs(map: &[usize]) -> f64 {
    let m = map.len();
    if m <= 1 {
        return 1.0;
    }
    1.0 - (naive_chunks(map) as f64 - 1.0) / (m as f64 - 1.0)
}

/// Reduces raw links to the leftmost source per aligned target position.
pub fn naive_reduce(links: &[(usize, usize)], target_len: usize) -> Vec<usize> {
    (0..target_len)
        .filter_map(|j| links.iter().filter(|l| l.1 == j).map(|l| l.0).min())
        .collect()
}

/// Raw count tables as plain nested maps: source -> target -> count.
pub type Counts = BTreeMap<String, BTreeMap<String, u64>>;

pub fn random_counts<R: Rng>(rng: &mut R, sources: usize, targets: usize) -> Counts {
    let mut t = Counts::new();
    for x in 0..rng.gen_range(1..=sources) {
        let row = t.entry(format!("x{x}")).or_default();
        for _ in 0..rng.gen_range(1..=targets) {
            *row.entry(format!("y{}", rng.gen_range(0..targets))).or_insert(0) += rng.gen_range(1..5);
        }
    }
    t
}

pub fn to_table(c: &Counts) -> distillens::complexity::ConditionalTable {
    let mut t = distillens::complexity::ConditionalTable::new();
    for (x, row) in c {
        for (y, &n) in row {
            t.add(x, y, n);
        }
    }
    t
}

/// Direct summation of -Σ p ln p per source word, averaged.
pub fn oracle_ld(c: &Counts) -> f64 {
    let mut sum = 0.0;
    for row in c.values() {
        let total: f64 = row.values().map(|&v| v as f64).sum();
        let mut h = 0.0;
        for &v in row.values() {
            let p = v as f64 / total;
            h -= p * p.ln();
        }
        sum += h;
    }
    sum / c.len() as f64
}

/// Direct summation of smoothed KL, following the definition literally.
pub fn oracle_kl(real: &Counts, dist: &Counts, alpha: f64) -> f64 {
    let mut sum = 0.0;
    for (x, rrow) in real {
        let rt: f64 = rrow.values().map(|&v| v as f64).sum();
        let mut kl = 0.0;
        match dist.get(x) {
            Some(drow) => {
                let dt: f64 = drow.values().map(|&v| v as f64).sum();
                let mut support: Vec<&String> = rrow.keys().chain(drow.keys()).collect();
                support.sort();
                support.dedup();
                let z: f64 = support
                    .iter()
                    .map(|y| drow.get(*y).map_or(0.0, |&v| v as f64 / dt) + alpha)
                    .sum();
                for (y, &v) in rrow {
                    let p = v as f64 / rt;
                    let q = (drow.get(y).map_or(0.0, |&v| v as f64 / dt) + alpha) / z;
                    kl += p * (p.ln() - q.ln());
                }
            }
            None => {
                for &v in rrow.values() {
                    let p = v as f64 / rt;
                    kl += p * (p.ln() + (rrow.len() as f64).ln());
                }
            }
        }
        sum += kl;
    }
    sum / real.len() as f64
}

/// Random sentence over `vocab` with a length drawn from `len`.
pub fn words<R: Rng>(rng: &mut R, vocab: &[&str], len: std::ops::Range<usize>) -> Vec<String> {
    let len = rng.gen_range(len);
    (0..len).map(|_| vocab.choose(rng).unwrap().to_string()).collect()
}

/// A k-best list with random hypotheses over a small vocabulary.
pub fn random_kbest<R: Rng>(rng: &mut R, id: usize, k: usize) -> (KBestList, Vec<String>, Vec<String>) {
    let vocab = ["a", "b", "c", "d", "e", "f", "g"];
    let reference = words(rng, &vocab, 3..8);
    let source = words(rng, &vocab, 3..8);
    let entries = (0..k)
        .map(|_| KBestEntry {
            hypothesis: words(rng, &vocab, 2..9),
            nmt_logprob: -rng.gen_range(0.0..30.0),
        })
        .collect();
    (
        KBestList {
            sentence_id: id,
            entries,
        },
        reference,
        source,
    )
}
