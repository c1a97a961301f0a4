//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function takes plain text in the CLI file formats and
//! returns a JSON string. The `*_json` variants hold the logic and are
//! callable from native code.

use std::path::Path;

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use distillens::aligner::train_ibm1;
use distillens::calibration::{confidence_by_iteration, expected_calibration_error};
use distillens::complexity::sentence_frs;
use distillens::corpus_io::{
    format_kbest, parse_attention, parse_kbest, parse_pharaoh, parse_token_predictions, tokenize, Alignment,
    ParallelCorpus, SentencePair,
};
use distillens::preorder::monotone_preorder;
use distillens::selection::{best_index, score_hypotheses, ComplexityKind, Resources, SelectionConfig};
use distillens::synthetic;

fn err(e: impl ToString) -> String {
    e.to_string()
}

/// Chunk id per target position; unaligned positions get `None`.
fn chunk_ids(alignment: &Alignment, target_len: usize) -> Vec<Option<usize>> {
    let mut out = Vec::with_capacity(target_len);
    let mut prev: Option<usize> = None;
    let mut chunk = 0usize;
    let mut seen = false;
    for a in alignment.leftmost_sources(target_len) {
        match a {
            Some(i) => {
                if seen && prev.is_none_or(|p| i != p + 1) {
                    chunk += 1;
                }
                seen = true;
                prev = Some(i);
                out.push(Some(chunk));
            }
            None => out.push(None),
        }
    }
    out
}

fn alignment_view(source: &[String], target: &[String], alignment: &Alignment) -> Value {
    json!({
        "source": source,
        "target": target,
        "links": alignment.links(),
        "chunks": chunk_ids(alignment, target.len()),
        "frs": sentence_frs(alignment, target.len()),
    })
}

/// FRS of one aligned sentence pair, before and after source pre-ordering.
pub fn analyze_alignment_json(source: &str, target: &str, pharaoh: &str) -> Result<String, String> {
    let pair = SentencePair::from_text(source, target).map_err(err)?;
    let alignment = parse_pharaoh(pharaoh).map_err(err)?;
    alignment
        .validate(pair.source.len(), pair.target.len())
        .map_err(err)?;
    let (preordered, moved) = monotone_preorder(&pair.source, &alignment);
    Ok(json!({
        "original": alignment_view(&pair.source, &pair.target, &alignment),
        "preordered": alignment_view(&preordered, &pair.target, &moved),
    })
    .to_string())
}

/// Scores one k-best list at `lambda` and sweeps lambda over [0, 1].
///
/// `frs` and `walign` use an IBM Model 1 table trained on the list itself
/// (source paired with every hypothesis and the reference).
pub fn explore_selection_json(
    kbest: &str,
    reference: &str,
    source: &str,
    lambda: f64,
    complexity: &str,
) -> Result<String, String> {
    let kind: ComplexityKind = complexity.parse().map_err(err)?;
    let lists = parse_kbest(kbest, Path::new("k-best")).map_err(err)?;
    let list = lists.into_values().next().ok_or("no k-best entries")?;
    let reference = tokenize(reference);
    let source = tokenize(source);
    if reference.is_empty() || source.is_empty() {
        return Err("reference and source must be non-empty".into());
    }
    let table = if kind.needs_table() {
        let pairs = list
            .entries
            .iter()
            .map(|e| &e.hypothesis)
            .chain(std::iter::once(&reference))
            .map(|t| SentencePair::new(source.clone(), t.clone()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?;
        Some(train_ibm1(&ParallelCorpus::new(pairs), 5).map_err(err)?)
    } else {
        None
    };
    let res = Resources {
        table: table.as_ref(),
    };

    let score = |lambda: f64| {
        let cfg = SelectionConfig::new(lambda, kind).map_err(err)?;
        score_hypotheses(&list, &reference, &source, &cfg, res).map_err(err)
    };
    let scored = score(lambda)?;
    let best = best_index(&scored).ok_or("no k-best entries")?;
    let rows: Vec<Value> = scored
        .iter()
        .map(|h| {
            json!({
                "rank": h.rank,
                "hypothesis": h.entry.hypothesis.join(" "),
                "nmt_logprob": h.entry.nmt_logprob,
                "sim": h.sim,
                "sim_norm": h.sim_norm,
                "cxty_raw": h.cxty_raw,
                "cxty_norm": h.cxty_norm,
                "total": h.total,
            })
        })
        .collect();
    let mut sweep = Vec::new();
    for step in 0..=10 {
        let l = step as f64 / 10.0;
        let s = score(l)?;
        let k = best_index(&s).ok_or("no k-best entries")?;
        sweep.push(json!({ "lambda": l, "rank": s[k].rank, "sim": s[k].sim }));
    }
    Ok(json!({ "selected": scored[best].rank, "rows": rows, "sweep": sweep }).to_string())
}

/// Reliability bins and ECE for token predictions, plus the mean
/// attention confidence per iteration when attention records are given.
pub fn calibration_json(predictions: &str, bins: usize, attention: &str) -> Result<String, String> {
    let records = parse_token_predictions(predictions).map_err(err)?;
    let report = expected_calibration_error(&records, bins).map_err(err)?;
    let curve: Vec<Value> = if attention.trim().is_empty() {
        Vec::new()
    } else {
        let attn = parse_attention(attention).map_err(err)?;
        confidence_by_iteration(&attn)
            .map_err(err)?
            .into_iter()
            .map(|(iteration, c)| json!({ "iteration": iteration, "mean_confidence": c }))
            .collect()
    };
    Ok(json!({ "report": report, "attention": curve }).to_string())
}

fn jsonl<T: serde::Serialize>(items: &[T]) -> String {
    items
        .iter()
        .map(|r| serde_json::to_string(r).expect("serializable") + "\n")
        .collect()
}

/// Sample inputs for the page: one k-best list with its reference and
/// source, token predictions and attention records.
pub fn sample_inputs_json(seed: u64) -> String {
    let data = synthetic::real_and_distilled(seed, 1, 20, 0.8);
    let lists = synthetic::kbest_lists(seed, &data, 6);
    let pair = &data.real.corpus.pairs[0];
    json!({
        "kbest": format_kbest(&lists),
        "reference": pair.target.join(" "),
        "source": pair.source.join(" "),
        "alignment": data.real.alignments[0].to_pharaoh(),
        "predictions": jsonl(&synthetic::token_predictions(seed, 200)),
        "attention": jsonl(&synthetic::attention_records(seed, 5, 8, 2)),
    })
    .to_string()
}

fn to_js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = analyzeAlignment)]
pub fn analyze_alignment(source: &str, target: &str, pharaoh: &str) -> Result<String, JsError> {
    to_js(analyze_alignment_json(source, target, pharaoh))
}

#[wasm_bindgen(js_name = exploreSelection)]
pub fn explore_selection(
    kbest: &str,
    reference: &str,
    source: &str,
    lambda: f64,
    complexity: &str,
) -> Result<String, JsError> {
    to_js(explore_selection_json(
        kbest, reference, source, lambda, complexity,
    ))
}

#[wasm_bindgen(js_name = calibration)]
pub fn calibration(predictions: &str, bins: usize, attention: &str) -> Result<String, JsError> {
    to_js(calibration_json(predictions, bins, attention))
}

#[wasm_bindgen(js_name = sampleInputs)]
pub fn sample_inputs(seed: u32) -> String {
    sample_inputs_json(seed as u64)
}
