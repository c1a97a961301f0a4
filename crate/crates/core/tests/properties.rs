mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distillens::aligner::train_ibm1_with_history;
use distillens::calibration::{attention_confidence, expected_calibration_error, token_accuracy};
use distillens::complexity::{faithfulness, frs_of_map, lexical_diversity, sentence_frs};
use distillens::corpus_io::{
    Alignment, AttentionRecord, KBestList, ParallelCorpus, SentencePair, TokenPredictionRecord,
};
use distillens::preorder::monotone_preorder;
use distillens::selection::{
    select_reference, smoothed_sentence_bleu, ComplexityKind, Resources, SelectionConfig,
};

use common::*;

fn alignment_strategy() -> impl Strategy<Value = (usize, usize, Vec<(usize, usize)>)> {
    (1usize..7, 1usize..7)
        .prop_flat_map(|(s, t)| (Just(s), Just(t), prop::collection::vec((0..s, 0..t), 0..10)))
}

proptest! {
    #[test]
    fn frs_matches_naive_oracle_on_raw_links((s, t, links) in alignment_strategy()) {
        let a = Alignment::new(links.iter().copied());
        prop_assert!(a.validate(s, t).is_ok());
        let reduced = naive_reduce(&links, t);
        prop_assert_eq!(sentence_frs(&a, t), naive_frs(&reduced));
        let f = sentence_frs(&a, t);
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn em_log_likelihood_never_decreases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sv = ["a", "b", "c", "d"];
        let tv = ["w", "x", "y", "z", "v"];
        let pairs: Vec<SentencePair> = (0..rng.gen_range(1..8))
            .map(|_| {
                let s = words(&mut rng, &sv, 1..5);
                let t = words(&mut rng, &tv, 1..5);
                SentencePair::new(s, t).unwrap()
            })
            .collect();
        let trained = train_ibm1_with_history(&ParallelCorpus::new(pairs), 6).unwrap();
        for w in trained.log_likelihoods.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "{:?}", trained.log_likelihoods);
        }
        for (_, row) in trained.table.rows() {
            let s: f64 = row.values().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn preorder_invariants((s, t, links) in alignment_strategy()) {
        let source: Vec<String> = (0..s).map(|i| format!("w{}", i % 3)).collect();
        let a = Alignment::new(links.iter().copied());
        let (once, a1) = monotone_preorder(&source, &a);
        let (twice, a2) = monotone_preorder(&once, &a1);
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(&a1, &a2);
        let mut x = source.clone();
        let mut y = once.clone();
        x.sort();
        y.sort();
        prop_assert_eq!(x, y);
        prop_assert_eq!(a1.len(), a.len());
        prop_assert!(a1.validate(s, t).is_ok());
    }

    #[test]
    fn preorder_makes_injective_full_alignments_monotone(
        perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle(),
        n in 1usize..=6,
    ) {
        // one-to-one alignment over the first n positions
        let perm: Vec<usize> = perm.into_iter().filter(|&p| p < n).collect();
        let source: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
        let a = Alignment::new(perm.iter().enumerate().map(|(i, &j)| (i, j)));
        let (_, na) = monotone_preorder(&source, &a);
        prop_assert_eq!(sentence_frs(&na, n), 1.0);
    }

    #[test]
    fn bleu_in_unit_interval(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = ["a", "b", "c"];
        let h = words(&mut rng, &v, 0..7);
        let r = words(&mut rng, &v, 1..7);
        let b = smoothed_sentence_bleu(&h, &r, 4);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&b));
    }

    #[test]
    fn ece_bounds_and_bin_consistency(
        preds in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..200),
        bins in 1usize..20,
    ) {
        let recs: Vec<TokenPredictionRecord> = preds
            .iter()
            .enumerate()
            .map(|(k, &(p, c))| TokenPredictionRecord {
                sentence_id: 0,
                position: k,
                token: "t".into(),
                probability: p,
                correct: Some(c),
            })
            .collect();
        let r = expected_calibration_error(&recs, bins).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.ece));
        prop_assert_eq!(r.token_count(), recs.len());
        prop_assert_eq!(r.ece, r.ece_from_bins());
    }

    #[test]
    fn attention_confidence_bounds(
        rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 4), 1..6),
    ) {
        let weights: Vec<f64> = rows
            .iter()
            .flat_map(|r| {
                let s: f64 = r.iter().sum();
                r.iter().map(move |w| w / s)
            })
            .collect();
        let rec = AttentionRecord::new(0, 1, 0, rows.len(), 4, weights).unwrap();
        let c = attention_confidence(&rec);
        prop_assert!((0.25 - 1e-12..=1.0 + 1e-12).contains(&c));
    }

    #[test]
    fn token_accuracy_matches_form_a_reference_subsequence(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = ["a", "b", "c", "d"];
        let h = words(&mut rng, &v, 0..8);
        let r = words(&mut rng, &v, 0..8);
        let labels = token_accuracy(&h, &r);
        prop_assert_eq!(labels.len(), h.len());
        prop_assert_eq!(&labels, &token_accuracy(&h, &r));
        let matched: Vec<&String> = h.iter().zip(&labels).filter(|(_, &l)| l).map(|(t, _)| t).collect();
        let mut it = r.iter();
        for m in matched {
            prop_assert!(it.any(|x| x == m));
        }
    }
}

#[test]
fn frs_exhaustive_small_maps() {
    for m in 0..=5usize {
        for s in 1..=5usize {
            let total = s.pow(m as u32);
            for code in 0..total {
                let mut c = code;
                let map: Vec<usize> = (0..m)
                    .map(|_| {
                        let v = c % s;
                        c /= s;
                        v
                    })
                    .collect();
                assert_eq!(frs_of_map(&map), naive_frs(&map), "{map:?}");
            }
        }
    }
}

#[test]
fn entropy_and_kl_match_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let r = random_counts(&mut rng, 5, 6);
        let d = random_counts(&mut rng, 5, 6);
        assert_abs_diff_eq!(
            lexical_diversity(&to_table(&r)).unwrap(),
            oracle_ld(&r),
            epsilon = 1e-9
        );
        let alpha = rng.gen_range(1e-4..0.5);
        assert_abs_diff_eq!(
            faithfulness(&to_table(&r), &to_table(&d), alpha).unwrap(),
            oracle_kl(&r, &d, alpha),
            epsilon = 1e-9
        );
    }
}

#[test]
fn selection_shift_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for id in 0..100 {
        let (list, reference, source) = random_kbest(&mut rng, id, 8);
        let shifted = KBestList {
            sentence_id: id,
            entries: list
                .entries
                .iter()
                .map(|e| distillens::corpus_io::KBestEntry {
                    hypothesis: e.hypothesis.clone(),
                    nmt_logprob: e.nmt_logprob - 7.25,
                })
                .collect(),
        };
        for lambda in [0.0, 0.3, 0.7] {
            let cfg = SelectionConfig::new(lambda, ComplexityKind::Nmt).unwrap();
            let a = select_reference(&list, &reference, &source, &cfg, Resources::default()).unwrap();
            let b = select_reference(&shifted, &reference, &source, &cfg, Resources::default()).unwrap();
            assert_eq!(a.hypothesis, b.hypothesis);
        }
    }
}
