//! Writes the bundled synthetic data set used by the README walkthrough
//! and the acceptance suite.
//!
//!     cargo run -p distillens --example make_synthetic -- crates/core/data/synthetic

use std::fs;
use std::path::PathBuf;

use distillens::corpus_io::{format_alignments, format_kbest, format_parallel_corpus};
use distillens::synthetic;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/synthetic".into()));
    fs::create_dir_all(&dir)?;

    let data = synthetic::real_and_distilled(2021, 400, 60, 0.8);
    for (name, c) in [("real", &data.real), ("distilled", &data.distilled)] {
        let (src, tgt) = format_parallel_corpus(&c.corpus);
        fs::write(dir.join(format!("{name}.src")), src)?;
        fs::write(dir.join(format!("{name}.tgt")), tgt)?;
        fs::write(dir.join(format!("{name}.aln")), format_alignments(&c.alignments))?;
    }
    fs::write(
        dir.join("kbest.txt"),
        format_kbest(&synthetic::kbest_lists(7, &data, 8)),
    )?;

    let mut preds = String::new();
    for r in synthetic::token_predictions(3, 300) {
        preds.push_str(&serde_json::to_string(&r).unwrap());
        preds.push('\n');
    }
    fs::write(dir.join("preds.jsonl"), preds)?;

    let mut attn = String::new();
    for r in synthetic::attention_records(5, 20, 10, 2) {
        attn.push_str(&serde_json::to_string(&r).unwrap());
        attn.push('\n');
    }
    fs::write(dir.join("attn.jsonl"), attn)?;
    Ok(())
}
