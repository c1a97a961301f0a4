//! The `distillens` command line.
//!
//! Exit codes: 0 on success, 1 for data/domain errors, 2 for usage and
//! I/O errors. Every output file is written to a temporary file next to
//! its destination and renamed into place, and nothing is written until
//! all outputs of a subcommand have been computed.

use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::aligner::{train_ibm1_with_history, viterbi_align, TranslationTable};
use crate::calibration::{
    average_confidence, confidence_by_iteration, expected_calibration_error, fill_correctness,
    CalibrationReport,
};
use crate::complexity::{complexity_report, ComplexityReport, DEFAULT_ALPHA};
use crate::corpus_io::{
    format_alignments, read_alignments, read_attention, read_kbest, read_parallel_corpus,
    read_token_predictions, read_tokenized, Alignment, ParallelCorpus,
};
use crate::error::Error;
use crate::preorder::monotone_preorder;
use crate::selection::{best_index, score_hypotheses, ComplexityKind, Resources, SelectionConfig};

#[derive(Debug, Parser)]
#[command(
    name = "distillens",
    version,
    about = "Distilled-corpus complexity and calibration toolkit"
)]
struct Cli {
    /// Maximum worker threads (default: all available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Accepted for forward compatibility; no command is stochastic.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train IBM Model 1 and write Viterbi alignments in Pharaoh format.
    Align(AlignArgs),
    /// FRS, lexical diversity and faithfulness of one corpus.
    Metrics(MetricsArgs),
    /// Pick one distilled reference per source from a k-best list.
    Select(SelectArgs),
    /// Reorder source sentences to be monotone with their targets.
    Preorder(PreorderArgs),
    /// Token accuracy, confidence and expected calibration error.
    Calibrate(CalibrateArgs),
    /// Mean attention confidence per decoding iteration.
    Attn(AttnArgs),
    /// Side-by-side complexity metrics of a real and a distilled corpus.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write the translation table as `x \t y \t p`.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    align: PathBuf,
    #[arg(long, requires_all = ["real_tgt", "real_align"])]
    real_src: Option<PathBuf>,
    #[arg(long, requires_all = ["real_src", "real_align"])]
    real_tgt: Option<PathBuf>,
    #[arg(long, requires_all = ["real_src", "real_tgt"])]
    real_align: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the report as a one-row CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    kbest: PathBuf,
    /// Original references, one per source sentence.
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long)]
    src: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Complexity function: frs, walign or nmt.
    #[arg(long)]
    cxty: String,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    max_ngram: usize,
    #[arg(long)]
    out: PathBuf,
    /// Dump every scored hypothesis as CSV.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PreorderArgs {
    #[arg(long)]
    src: PathBuf,
    #[arg(long)]
    tgt: PathBuf,
    #[arg(long)]
    align: PathBuf,
    #[arg(long)]
    out_src: PathBuf,
    #[arg(long)]
    out_align: PathBuf,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    preds: PathBuf,
    #[arg(long, requires = "reference")]
    hyp: Option<PathBuf>,
    #[arg(long = "ref", requires = "hyp")]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = crate::calibration::DEFAULT_BINS)]
    bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AttnArgs {
    #[arg(long)]
    attn: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long)]
    real_src: PathBuf,
    #[arg(long)]
    real_tgt: PathBuf,
    #[arg(long)]
    real_align: PathBuf,
    #[arg(long)]
    dist_src: PathBuf,
    #[arg(long)]
    dist_tgt: PathBuf,
    #[arg(long)]
    dist_align: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// A command failure, classified by exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_io() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Domain(e)
        }
    }
}

type CmdResult = std::result::Result<Vec<(PathBuf, Vec<u8>)>, Failure>;

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 2;
        }
    };
    let outcome = pool
        .install(|| dispatch(cli.command))
        .and_then(|outputs| write_all(&outputs));
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cmd: Command) -> CmdResult {
    match cmd {
        Command::Align(a) => align(a),
        Command::Metrics(a) => metrics(a),
        Command::Select(a) => select(a),
        Command::Preorder(a) => preorder(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Attn(a) => attn(a),
        Command::Report(a) => report(a),
    }
}

fn write_all(outputs: &[(PathBuf, Vec<u8>)]) -> Result<(), Failure> {
    for (path, bytes) in outputs {
        write_atomic(path, bytes).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable report");
    v.push(b'\n');
    v
}

fn load_aligned(src: &Path, tgt: &Path, align: &Path) -> Result<(ParallelCorpus, Vec<Alignment>), Failure> {
    let corpus = read_parallel_corpus(src, tgt)?;
    let alignments = read_alignments(align)?;
    corpus.validate_alignments(&alignments)?;
    Ok((corpus, alignments))
}

fn align(a: AlignArgs) -> CmdResult {
    let corpus = read_parallel_corpus(&a.src, &a.tgt)?;
    let trained = train_ibm1_with_history(&corpus, a.iters)?;
    for (k, ll) in trained.log_likelihoods.iter().enumerate() {
        eprintln!("iteration {k}: log-likelihood {ll:.4}");
    }
    let alignments: Vec<Alignment> = {
        use rayon::prelude::*;
        corpus
            .pairs
            .par_iter()
            .map(|p| viterbi_align(p, &trained.table))
            .collect()
    };
    let mut out = vec![(a.out, format_alignments(&alignments).into_bytes())];
    if let Some(t) = a.table {
        out.push((t, trained.table.to_tsv().into_bytes()));
    }
    Ok(out)
}

fn report_csv(rows: &[(&str, &ComplexityReport)]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "corpus",
        "frs",
        "lexical_diversity",
        "faithfulness",
        "sentence_count",
    ])
    .expect("in-memory csv");
    for (name, r) in rows {
        w.write_record([
            name.to_string(),
            r.frs.to_string(),
            r.lexical_diversity.to_string(),
            r.faithfulness.map(|f| f.to_string()).unwrap_or_default(),
            r.sentence_count.to_string(),
        ])
        .expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

fn metrics(a: MetricsArgs) -> CmdResult {
    let (corpus, alignments) = load_aligned(&a.src, &a.tgt, &a.align)?;
    let reference = match (&a.real_src, &a.real_tgt, &a.real_align) {
        (Some(s), Some(t), Some(al)) => Some(load_aligned(s, t, al)?),
        _ => None,
    };
    let r = complexity_report(
        &corpus,
        &alignments,
        reference.as_ref().map(|(c, al)| (c, al.as_slice())),
        a.alpha,
    )?;
    let mut out = vec![(a.out, json_bytes(&r))];
    if let Some(csv) = a.csv {
        out.push((csv, report_csv(&[("corpus", &r)])));
    }
    Ok(out)
}

#[derive(Serialize)]
struct NamedReport<'a> {
    name: &'a str,
    #[serde(flatten)]
    report: &'a ComplexityReport,
}

#[derive(Serialize)]
struct Comparison<'a> {
    rows: Vec<NamedReport<'a>>,
    delta: Delta,
}

#[derive(Serialize)]
struct Delta {
    frs: f64,
    lexical_diversity: f64,
    faithfulness: f64,
}

fn report(a: ReportArgs) -> CmdResult {
    let (real, real_al) = load_aligned(&a.real_src, &a.real_tgt, &a.real_align)?;
    let (dist, dist_al) = load_aligned(&a.dist_src, &a.dist_tgt, &a.dist_align)?;
    let reference = Some((&real, real_al.as_slice()));
    let r = complexity_report(&real, &real_al, reference, a.alpha)?;
    let d = complexity_report(&dist, &dist_al, reference, a.alpha)?;
    let cmp = Comparison {
        delta: Delta {
            frs: d.frs - r.frs,
            lexical_diversity: d.lexical_diversity - r.lexical_diversity,
            faithfulness: d.faithfulness.unwrap_or(0.0) - r.faithfulness.unwrap_or(0.0),
        },
        rows: vec![
            NamedReport {
                name: "real",
                report: &r,
            },
            NamedReport {
                name: "distilled",
                report: &d,
            },
        ],
    };
    let mut out = vec![(a.out, json_bytes(&cmp))];
    if let Some(csv) = a.csv {
        out.push((csv, report_csv(&[("real", &r), ("distilled", &d)])));
    }
    Ok(out)
}

fn select(a: SelectArgs) -> CmdResult {
    let kind: ComplexityKind = a.cxty.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
    let config = SelectionConfig {
        lambda: a.lambda,
        complexity: kind,
        max_ngram: a.max_ngram,
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let table = match &a.table {
        Some(p) => Some(TranslationTable::read_tsv(p)?),
        None if kind.needs_table() => {
            return Err(Failure::Usage(format!("--cxty {kind} requires --table")));
        }
        None => None,
    };
    let lists = read_kbest(&a.kbest)?;
    let references = read_tokenized(&a.reference)?;
    let sources = read_tokenized(&a.src)?;
    if references.len() != sources.len() {
        return Err(Failure::Domain(Error::LengthMismatch {
            what: "reference vs source lines",
            left: references.len(),
            right: sources.len(),
        }));
    }
    if let Some(&id) = lists.keys().find(|&&id| id >= sources.len()) {
        return Err(Failure::Domain(Error::InvalidArgument(format!(
            "{}: sentence id {id} has no source line ({} lines)",
            a.kbest.display(),
            sources.len()
        ))));
    }
    if let Some(missing) = (0..sources.len()).find(|id| !lists.contains_key(id)) {
        return Err(Failure::Domain(Error::InvalidArgument(format!(
            "{}: no hypotheses for sentence {missing}",
            a.kbest.display()
        ))));
    }

    let resources = Resources {
        table: table.as_ref(),
    };
    let scored: Vec<_> = {
        use rayon::prelude::*;
        lists
            .values()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|list| {
                let id = list.sentence_id;
                score_hypotheses(list, &references[id], &sources[id], &config, resources)
            })
            .collect::<Result<Vec<_>, Error>>()?
    };

    let mut selected = String::new();
    for s in &scored {
        let k = best_index(s).expect("non-empty k-best list");
        selected.push_str(&s[k].entry.hypothesis.join(" "));
        selected.push('\n');
    }
    let mut out = vec![(a.out, selected.into_bytes())];
    if let Some(path) = a.scores {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "sentence_id",
            "rank",
            "hypothesis",
            "nmt_logprob",
            "sim",
            "sim_norm",
            "cxty_raw",
            "cxty_norm",
            "total",
            "selected",
        ])
        .expect("in-memory csv");
        for (list, s) in lists.values().zip(&scored) {
            let best = best_index(s);
            for h in s {
                w.write_record([
                    list.sentence_id.to_string(),
                    h.rank.to_string(),
                    h.entry.hypothesis.join(" "),
                    h.entry.nmt_logprob.to_string(),
                    h.sim.to_string(),
                    h.sim_norm.to_string(),
                    h.cxty_raw.to_string(),
                    h.cxty_norm.to_string(),
                    h.total.to_string(),
                    u8::from(best == Some(h.rank)).to_string(),
                ])
                .expect("in-memory csv");
            }
        }
        out.push((path, w.into_inner().expect("in-memory csv")));
    }
    Ok(out)
}

fn preorder(a: PreorderArgs) -> CmdResult {
    let (corpus, alignments) = load_aligned(&a.src, &a.tgt, &a.align)?;
    let mut src = String::new();
    let mut new_alignments = Vec::with_capacity(alignments.len());
    for (pair, al) in corpus.iter().zip(&alignments) {
        let (tokens, na) = monotone_preorder(&pair.source, al);
        src.push_str(&tokens.join(" "));
        src.push('\n');
        new_alignments.push(na);
    }
    Ok(vec![
        (a.out_src, src.into_bytes()),
        (a.out_align, format_alignments(&new_alignments).into_bytes()),
    ])
}

#[derive(Serialize)]
struct CalibrationOutput<'a> {
    tokens: usize,
    #[serde(flatten)]
    report: &'a CalibrationReport,
}

fn calibrate(a: CalibrateArgs) -> CmdResult {
    if a.bins == 0 {
        return Err(Failure::Usage("--bins must be >= 1".into()));
    }
    let mut records = read_token_predictions(&a.preds)?;
    if let (Some(h), Some(r)) = (&a.hyp, &a.reference) {
        let hyps = read_tokenized(h)?;
        let refs = read_tokenized(r)?;
        fill_correctness(&mut records, &hyps, &refs)?;
    }
    let report = expected_calibration_error(&records, a.bins)?;
    let conf = average_confidence(&records)?;
    eprintln!(
        "Acc {:.1}%  Conf {:.1}%  ECE {:.2}%",
        100.0 * report.accuracy,
        100.0 * conf,
        100.0 * report.ece
    );
    let out = CalibrationOutput {
        tokens: records.len(),
        report: &report,
    };
    Ok(vec![(a.out, json_bytes(&out))])
}

fn attn(a: AttnArgs) -> CmdResult {
    let records = read_attention(&a.attn)?;
    let curve = confidence_by_iteration(&records)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "mean_confidence"])
        .expect("in-memory csv");
    for (it, c) in curve {
        w.write_record([it.to_string(), c.to_string()])
            .expect("in-memory csv");
    }
    Ok(vec![(a.out, w.into_inner().expect("in-memory csv"))])
}
