//! Command-line surface. Each subcommand maps onto one library
//! operation; all file paths are resolved against --root.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use beamkit::corpus::{dump_pending, filter_corpus, load_titles, load_verdicts, FuzzyMatchParams};
use beamkit::decoder::{
    decode_ctc, decode_s2s, dump_nbest, load_nbest, DecodeMode, DecodeOptions, MergeRule,
    NBestEntry,
};
use beamkit::emissions::{read_emissions, ReplayScorer};
use beamkit::evalkit::{
    self, dump_probe_report, perplexity_probe, segment_shuffle, shuffle_transcript,
};
use beamkit::lexicon::{build_trie, parse_lexicon, Lexicon, LexiconTrie, TokenInventory};
use beamkit::lm::{load_arpa, save_arpa, train, LmUnit, NGramModel};
use beamkit::pipeline::{
    chunk_intervals, dump_labels, dump_manifest, load_manifest, merge_manifests, pseudo_label,
    ManifestRow, DEFAULT_MAX_CHUNK_S,
};
use beamkit::rescore::{attach_scores, load_score_column, rescore, RescoreWeights, ScoreSource};
use beamkit::tune::{
    builtin_space, dump_results, grid_search, load_space, random_search, SearchSpace,
};

#[derive(Parser)]
#[command(name = "beamkit", version, about = "Beam-search decoding and self-training tools")]
struct Cli {
    /// Directory against which relative paths are resolved.
    #[arg(long, default_value = ".", global = true)]
    root: PathBuf,
    /// Preset file of key=value pairs filling in unset decode flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a backoff n-gram LM from a sentence-per-line corpus.
    LmTrain {
        /// Corpus text, one sentence per line.
        corpus: PathBuf,
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Comma-separated per-order count-pruning thresholds.
        #[arg(long, default_value = "0")]
        prune: String,
        #[arg(long, default_value = "word", value_parser = ["word", "wordpiece"])]
        unit: String,
        /// Output ARPA path (stdout if omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Perplexity of a corpus under an ARPA model (OOV events excluded).
    LmPerplexity {
        arpa: PathBuf,
        corpus: PathBuf,
    },
    /// Beam-search decode a manifest of emission (or replay) files.
    Decode {
        /// Manifest TSV: utt_id, path[, reference, duration, source].
        manifest: PathBuf,
        /// Token inventory, one token per line.
        #[arg(long)]
        tokens: PathBuf,
        /// Lexicon TSV (required by CTC modes).
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// ARPA LM for shallow fusion.
        #[arg(long)]
        arpa: Option<PathBuf>,
        /// lexicon_ctc | lexfree_s2s | zerolm_ctc | zerolm_s2s | greedy
        #[arg(long, default_value = "lexicon_ctc")]
        mode: String,
        #[command(flatten)]
        decode: DecodeArgs,
        /// Output N-best TSV path (stdout if omitted).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Reorder an N-best list with two LM scores and a length bonus.
    Rescore {
        /// N-best TSV produced by decode.
        nbest: PathBuf,
        /// First LM: ARPA path...
        #[arg(long, conflicts_with = "scores1")]
        arpa1: Option<PathBuf>,
        /// ...or external score TSV (utt_id, rank, log_prob).
        #[arg(long)]
        scores1: Option<PathBuf>,
        #[arg(long, conflicts_with = "scores2")]
        arpa2: Option<PathBuf>,
        #[arg(long)]
        scores2: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        alpha1: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha2: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sweep decode hyperparameters against WER on a manifest.
    Tune {
        /// Built-in space name or a space file path.
        #[arg(long)]
        space: String,
        /// Print the planned evaluation count and exit.
        #[arg(long)]
        dry_run: bool,
        /// random | grid
        #[arg(long, default_value = "random", value_parser = ["random", "grid"])]
        strategy: String,
        #[arg(long, default_value_t = 64)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Manifest with reference transcripts (required unless --dry-run).
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        tokens: Option<PathBuf>,
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        arpa: Option<PathBuf>,
        #[arg(long, default_value = "lexicon_ctc")]
        mode: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Remove held-out books from a corpus title list.
    CorpusFilter {
        /// Corpus titles TSV: id, raw title.
        corpus: PathBuf,
        /// Held-out titles TSV.
        held_out: PathBuf,
        #[arg(long, default_value_t = 0.75)]
        len_ratio: f64,
        #[arg(long, default_value_t = 0.3)]
        dist_ratio: f64,
        /// Verdict TSV resolving fuzzy pairs: left_id, right_id, remove|keep.
        #[arg(long)]
        verdicts: Option<PathBuf>,
        /// Where to write pending fuzzy pairs (stdout if omitted).
        #[arg(long)]
        pending: Option<PathBuf>,
    },
    /// Word error rate between line-aligned reference and hypothesis files.
    Wer {
        reference: PathBuf,
        hypothesis: PathBuf,
    },
    /// Shuffle the words of each line with a seeded permutation.
    Shuffle {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Segment mode: treat input as an alignment TSV and shuffle
        /// silence-delimited segments instead of words.
        #[arg(long)]
        alignments: bool,
        #[arg(long, default_value_t = evalkit::DEFAULT_MIN_GAP)]
        min_gap: f64,
        #[arg(long, default_value_t = evalkit::DEFAULT_MAX_WORDS_PER_SEGMENT)]
        max_words: usize,
    },
    /// Compare corpus perplexity against shuffled counterparts.
    Probe {
        arpa: PathBuf,
        corpus: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of independent shuffles to average over.
        #[arg(long, default_value_t = 5)]
        trials: u64,
        /// Also dump per-sentence log-probabilities.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Pack speech intervals into chunks of bounded span.
    Chunk {
        /// Interval TSV: start_s, end_s per line, sorted.
        intervals: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_CHUNK_S)]
        max_chunk: f64,
    },
    /// Decode a manifest and write top-1 transcripts as labels.
    PseudoLabel {
        manifest: PathBuf,
        #[arg(long)]
        tokens: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long)]
        arpa: Option<PathBuf>,
        #[arg(long, default_value = "lexicon_ctc")]
        mode: String,
        #[command(flatten)]
        decode: DecodeArgs,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Labels output (stdout if omitted).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Failure report output (stderr if omitted).
        #[arg(long)]
        errors: Option<PathBuf>,
    },
    /// Concatenate manifests, tagging rows with a source name.
    Merge {
        /// name=path pairs.
        inputs: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Decode flags shared by `decode`, `tune`, and `pseudo-label`. Unset
/// flags fall back to the --config preset, then to defaults.
#[derive(Args, Clone)]
struct DecodeArgs {
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    token_beam: Option<usize>,
    #[arg(long)]
    beam_threshold: Option<f64>,
    #[arg(long)]
    lm_weight: Option<f64>,
    #[arg(long)]
    word_insertion: Option<f64>,
    #[arg(long)]
    eos_penalty: Option<f64>,
    #[arg(long)]
    blank_threshold: Option<f64>,
    #[arg(long)]
    nbest: Option<usize>,
    #[arg(long)]
    max_output_len: Option<usize>,
    /// Merge rule for CTC hypotheses: logadd | max.
    #[arg(long)]
    merge: Option<String>,
    /// Skip the LM end-of-sentence transition at utterance end.
    #[arg(long)]
    no_lm_eos: bool,
}

type CliError = Box<dyn std::error::Error>;

fn fail(msg: impl Into<String>) -> CliError {
    msg.into().into()
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| fail(format!("{}: {e}", path.display())))
}

/// Either a file or stdout.
fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| fail(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn load_config(path: &Option<PathBuf>) -> Result<HashMap<String, String>, CliError> {
    let mut map = HashMap::new();
    if let Some(path) = path {
        for (no, line) in open(path)?.lines().enumerate() {
            let line = line?;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("config line {}: expected key=value", no + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}

fn build_options(
    args: &DecodeArgs,
    mode: &str,
    config: &HashMap<String, String>,
) -> Result<DecodeOptions, CliError> {
    let mode = DecodeMode::parse(mode).ok_or_else(|| fail(format!("unknown mode {mode:?}")))?;
    let mut opts = DecodeOptions {
        mode,
        ..DecodeOptions::default()
    };
    fn pick<T: std::str::FromStr>(
        flag: Option<T>,
        config: &HashMap<String, String>,
        key: &str,
        default: T,
    ) -> Result<T, CliError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match config.get(key) {
            Some(s) => s
                .parse()
                .map_err(|_| fail(format!("config: bad value for {key}: {s:?}"))),
            None => Ok(default),
        }
    }
    opts.beam = pick(args.beam, config, "beam", opts.beam)?;
    opts.token_beam = pick(args.token_beam, config, "token-beam", opts.token_beam)?;
    opts.beam_threshold = pick(
        args.beam_threshold,
        config,
        "beam-threshold",
        opts.beam_threshold,
    )?;
    opts.lm_weight = pick(args.lm_weight, config, "lm-weight", opts.lm_weight)?;
    opts.word_insertion = pick(
        args.word_insertion,
        config,
        "word-insertion",
        opts.word_insertion,
    )?;
    opts.eos_penalty = pick(args.eos_penalty, config, "eos-penalty", opts.eos_penalty)?;
    opts.blank_threshold = pick(
        args.blank_threshold,
        config,
        "blank-threshold",
        opts.blank_threshold,
    )?;
    opts.nbest = pick(args.nbest, config, "nbest", opts.nbest)?;
    opts.max_output_len = pick(
        args.max_output_len,
        config,
        "max-output-len",
        opts.max_output_len,
    )?;
    let merge = pick(
        args.merge.clone(),
        config,
        "merge",
        "logadd".to_string(),
    )?;
    opts.merge_rule = match merge.as_str() {
        "logadd" => MergeRule::LogAdd,
        "max" => MergeRule::Max,
        other => return Err(fail(format!("unknown merge rule {other:?}"))),
    };
    opts.lm_eos = !args.no_lm_eos;
    if opts.beam < opts.nbest {
        opts.beam = opts.nbest;
    }
    opts.validate()?;
    Ok(opts)
}

fn read_sentences(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(line.split_whitespace().map(str::to_string).collect());
    }
    Ok(out)
}

fn load_lm(root: &Path, path: &Path) -> Result<NGramModel, CliError> {
    Ok(load_arpa(open(&root.join(path))?)?)
}

struct DecodeAssets {
    inventory: TokenInventory,
    lexicon: Lexicon,
    trie: LexiconTrie,
    lm: Option<NGramModel>,
}

fn load_assets(
    root: &Path,
    tokens: &Path,
    lexicon: Option<&PathBuf>,
    arpa: Option<&PathBuf>,
    mode: DecodeMode,
) -> Result<DecodeAssets, CliError> {
    let inventory = TokenInventory::from_reader(open(&root.join(tokens))?)?;
    let lexicon = match lexicon {
        Some(p) => parse_lexicon(open(&root.join(p))?, &inventory)?,
        None => {
            if matches!(mode, DecodeMode::LexiconCtc | DecodeMode::ZerolmCtc | DecodeMode::Greedy) {
                return Err(fail("--lexicon is required for CTC modes"));
            }
            Lexicon::default()
        }
    };
    let trie = build_trie(&lexicon);
    let lm = match arpa {
        Some(p) => Some(load_lm(root, p)?),
        None => None,
    };
    Ok(DecodeAssets {
        inventory,
        lexicon,
        trie,
        lm,
    })
}

fn decode_manifest_rows(
    rows: &[ManifestRow],
    root: &Path,
    assets: &DecodeAssets,
    opts: &DecodeOptions,
) -> Result<Vec<NBestEntry>, CliError> {
    let mut all = Vec::new();
    for row in rows {
        let path = root.join(&row.path);
        let entries = match opts.mode {
            DecodeMode::LexfreeS2s | DecodeMode::ZerolmS2s => {
                let scorer =
                    ReplayScorer::from_reader(open(&path)?, assets.inventory.len())?;
                let out = decode_s2s(
                    &row.utt_id,
                    &scorer,
                    &assets.inventory,
                    assets.lm.as_ref(),
                    opts,
                )?;
                if !out.finished {
                    eprintln!("warning: {}: no finished hypothesis", row.utt_id);
                }
                out.entries
            }
            _ => {
                let em = read_emissions(open(&path)?)?;
                decode_ctc(
                    &row.utt_id,
                    &em,
                    &assets.inventory,
                    &assets.lexicon,
                    &assets.trie,
                    assets.lm.as_ref(),
                    opts,
                )?
            }
        };
        all.extend(entries);
    }
    Ok(all)
}

fn tune_space(root: &Path, name: &str) -> Result<SearchSpace, CliError> {
    if let Some(space) = builtin_space(name) {
        return Ok(space);
    }
    let path = root.join(name);
    if path.exists() {
        return Ok(load_space(open(&path)?)?);
    }
    Err(fail(format!(
        "unknown space {name:?} (not a built-in, not a file)"
    )))
}

fn apply_point(opts: &DecodeOptions, point: &beamkit::tune::ParamPoint) -> DecodeOptions {
    let mut o = opts.clone();
    for (k, &v) in point {
        match k.as_str() {
            "beam" => o.beam = v as usize,
            "token_beam" => o.token_beam = v as usize,
            "beam_threshold" => o.beam_threshold = v,
            "lm_weight" => o.lm_weight = v,
            "word_insertion" => o.word_insertion = v,
            "eos_penalty" => o.eos_penalty = v,
            "blank_threshold" => o.blank_threshold = v,
            _ => {}
        }
    }
    if o.beam < o.nbest {
        o.beam = o.nbest;
    }
    o
}

/// Run and return the process exit code: 0 success, 1 partial failure.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let root = cli.root.as_path();
    let config = load_config(&cli.config)?;
    match &cli.command {
        Command::LmTrain {
            corpus,
            order,
            prune,
            unit,
            output,
        } => {
            let sentences = read_sentences(&root.join(corpus))?;
            let thresholds: Vec<u64> = prune
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| fail(format!("bad prune threshold {s:?}"))))
                .collect::<Result<_, _>>()?;
            let unit = match unit.as_str() {
                "wordpiece" => LmUnit::WordPiece,
                _ => LmUnit::Word,
            };
            let model = train(&sentences, *order, &thresholds, unit)?;
            let mut out = sink(&output.as_ref().map(|p| root.join(p)))?;
            save_arpa(&model, &mut out)?;
            Ok(0)
        }
        Command::LmPerplexity { arpa, corpus } => {
            let model = load_lm(root, arpa)?;
            let sentences = read_sentences(&root.join(corpus))?;
            println!("{}", model.perplexity(&sentences, true)?);
            Ok(0)
        }
        Command::Decode {
            manifest,
            tokens,
            lexicon,
            arpa,
            mode,
            decode,
            output,
        } => {
            let opts = build_options(decode, mode, &config)?;
            let assets = load_assets(root, tokens, lexicon.as_ref(), arpa.as_ref(), opts.mode)?;
            let rows = load_manifest(open(&root.join(manifest))?)?;
            let entries = decode_manifest_rows(&rows, root, &assets, &opts)?;
            let mut out = sink(&output.as_ref().map(|p| root.join(p)))?;
            dump_nbest(&entries, &mut out)?;
            Ok(0)
        }
        Command::Rescore {
            nbest,
            arpa1,
            scores1,
            arpa2,
            scores2,
            alpha1,
            alpha2,
            beta,
            output,
        } => {
            let entries = load_nbest(open(&root.join(nbest))?)?;
            let source = |arpa: &Option<PathBuf>,
                          scores: &Option<PathBuf>|
             -> Result<(Option<NGramModel>, Option<_>), CliError> {
                match (arpa, scores) {
                    (Some(a), _) => Ok((Some(load_lm(root, a)?), None)),
                    (None, Some(s)) => Ok((None, Some(load_score_column(open(&root.join(s))?)?))),
                    (None, None) => Ok((None, None)),
                }
            };
            let (m1, c1) = source(arpa1, scores1)?;
            let (m2, c2) = source(arpa2, scores2)?;
            let s1 = match (&m1, c1) {
                (Some(m), _) => ScoreSource::NGram(m),
                (None, Some(c)) => ScoreSource::Column(c),
                (None, None) => ScoreSource::Constant(0.0),
            };
            let s2 = match (&m2, c2) {
                (Some(m), _) => ScoreSource::NGram(m),
                (None, Some(c)) => ScoreSource::Column(c),
                (None, None) => ScoreSource::Constant(0.0),
            };
            let scored = attach_scores(&entries, &s1, &s2)?;
            let reordered = rescore(
                &scored,
                &RescoreWeights {
                    alpha1: *alpha1,
                    alpha2: *alpha2,
                    beta: *beta,
                },
            );
            let mut out = sink(&output.as_ref().map(|p| root.join(p)))?;
            dump_nbest(&reordered, &mut out)?;
            Ok(0)
        }
        Command::Tune {
            space,
            dry_run,
            strategy,
            trials,
            seed,
            manifest,
            tokens,
            lexicon,
            arpa,
            mode,
            workers,
            output,
        } => {
            let space = tune_space(root, space)?;
            let planned = if strategy == "grid" {
                space.grid_size()
            } else {
                *trials
            };
            if *dry_run {
                println!("{planned} planned evaluations");
                return Ok(0);
            }
            let manifest = manifest
                .as_ref()
                .ok_or_else(|| fail("--manifest is required without --dry-run"))?;
            let tokens = tokens
                .as_ref()
                .ok_or_else(|| fail("--tokens is required without --dry-run"))?;
            let base = build_options(&DecodeArgs::empty(), mode, &config)?;
            let assets = load_assets(root, tokens, lexicon.as_ref(), arpa.as_ref(), base.mode)?;
            let rows = load_manifest(open(&root.join(manifest))?)?;
            for row in &rows {
                if row.reference.is_none() {
                    return Err(fail(format!(
                        "manifest row {} has no reference transcript",
                        row.utt_id
                    )));
                }
            }
            let objective = |point: &beamkit::tune::ParamPoint| -> Result<f64, String> {
                let opts = apply_point(&base, point);
                let mut pairs = Vec::new();
                for row in &rows {
                    let entries = decode_manifest_rows(
                        std::slice::from_ref(row),
                        root,
                        &assets,
                        &opts,
                    )
                    .map_err(|e| e.to_string())?;
                    pairs.push((
                        row.reference.clone().unwrap(),
                        entries[0].transcript.clone(),
                    ));
                }
                Ok(evalkit::corpus_wer(&pairs).wer)
            };
            let _ = workers; // trials run sequentially; decoding dominates
            let results = if strategy == "grid" {
                grid_search(&space, objective)?
            } else {
                random_search(&space, *trials, *seed, objective)?
            };
            let mut out = sink(&output.as_ref().map(|p| root.join(p)))?;
            dump_results(&mut out, &results)?;
            Ok(0)
        }
        Command::CorpusFilter {
            corpus,
            held_out,
            len_ratio,
            dist_ratio,
            verdicts,
            pending,
        } => {
            let corpus = load_titles(open(&root.join(corpus))?)?;
            let held = load_titles(open(&root.join(held_out))?)?;
            let verdicts = match verdicts {
                Some(p) => load_verdicts(open(&root.join(p))?)?,
                None => HashMap::new(),
            };
            let params = FuzzyMatchParams {
                len_ratio: *len_ratio,
                dist_ratio: *dist_ratio,
            };
            let out = filter_corpus(&corpus, &held, &params, &verdicts)?;
            let stdout = io::stdout();
            let mut w = stdout.lock();
            for id in &out.kept {
                writeln!(w, "kept\t{id}")?;
            }
            for id in &out.removed {
                writeln!(w, "removed\t{id}")?;
            }
            drop(w);
            let mut pw = sink(&pending.as_ref().map(|p| root.join(p)))?;
            dump_pending(&mut pw, &out.pending)?;
            Ok(0)
        }
        Command::Wer {
            reference,
            hypothesis,
        } => {
            let refs = read_sentences(&root.join(reference))?;
            let hyps = read_sentences(&root.join(hypothesis))?;
            if refs.len() != hyps.len() {
                return Err(fail(format!(
                    "line counts differ: {} references, {} hypotheses",
                    refs.len(),
                    hyps.len()
                )));
            }
            let pairs: Vec<(Vec<String>, Vec<String>)> =
                refs.into_iter().zip(hyps).collect();
            let b = evalkit::corpus_wer(&pairs);
            if b.infinite {
                println!("inf");
            } else {
                println!(
                    "{:.2} (S={} D={} I={} N={})",
                    b.wer, b.substitutions, b.deletions, b.insertions, b.reference_len
                );
            }
            Ok(0)
        }
        Command::Shuffle {
            input,
            seed,
            alignments,
            min_gap,
            max_words,
        } => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            if *alignments {
                let utts = evalkit::load_alignments(open(&root.join(input))?)?;
                let mut kept = 0usize;
                for (i, (utt_id, segs)) in utts.iter().enumerate() {
                    match segment_shuffle(segs, *min_gap, *max_words, seed + i as u64)? {
                        Ok(out) => {
                            kept += 1;
                            let words: Vec<String> =
                                out.segments.iter().map(|s| s.join(" ")).collect();
                            writeln!(w, "{utt_id}\t{}", words.join(" "))?;
                        }
                        Err(reject) => {
                            eprintln!("rejected {utt_id}: {reject:?}");
                        }
                    }
                }
                eprintln!("kept {kept} of {} utterances", utts.len());
            } else {
                for (i, sentence) in read_sentences(&root.join(input))?.iter().enumerate() {
                    let shuffled = shuffle_transcript(sentence, seed + i as u64);
                    writeln!(w, "{}", shuffled.join(" "))?;
                }
            }
            Ok(0)
        }
        Command::Probe {
            arpa,
            corpus,
            seed,
            trials,
            report,
        } => {
            let model = load_lm(root, arpa)?;
            let sentences = read_sentences(&root.join(corpus))?;
            let mut shuffled_ppls = Vec::new();
            let mut original = 0.0;
            for t in 0..*trials {
                let (orig, shuf) =
                    perplexity_probe(&model, &sentences, seed.wrapping_add(t * 7919))?;
                original = orig;
                shuffled_ppls.push(shuf);
            }
            let mean = shuffled_ppls.iter().sum::<f64>() / shuffled_ppls.len().max(1) as f64;
            println!("ppl_original\t{original}");
            println!("ppl_shuffled_mean\t{mean}");
            for (t, p) in shuffled_ppls.iter().enumerate() {
                println!("ppl_shuffled_{t}\t{p}");
            }
            if let Some(path) = report {
                let mut out = sink(&Some(root.join(path)))?;
                dump_probe_report(&mut out, &model, &sentences, original, mean)?;
            }
            Ok(0)
        }
        Command::Chunk {
            intervals,
            max_chunk,
        } => {
            let mut ivals = Vec::new();
            for (no, line) in open(&root.join(intervals))?.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let mut f = line.split_whitespace();
                let parse = |s: Option<&str>| -> Result<f64, CliError> {
                    s.and_then(|v| v.parse().ok())
                        .ok_or_else(|| fail(format!("interval line {}: bad fields", no + 1)))
                };
                ivals.push((parse(f.next())?, parse(f.next())?));
            }
            for c in chunk_intervals(&ivals, *max_chunk)? {
                println!("{}\t{}", c.start, c.end);
            }
            Ok(0)
        }
        Command::PseudoLabel {
            manifest,
            tokens,
            lexicon,
            arpa,
            mode,
            decode,
            workers,
            output,
            errors,
        } => {
            let opts = build_options(decode, mode, &config)?;
            let assets = load_assets(root, tokens, Some(lexicon), arpa.as_ref(), opts.mode)?;
            let rows = load_manifest(open(&root.join(manifest))?)?;
            let out = pseudo_label(
                &rows,
                root,
                &assets.inventory,
                &assets.lexicon,
                &assets.trie,
                assets.lm.as_ref(),
                &opts,
                *workers,
            )?;
            let mut w = sink(&output.as_ref().map(|p| root.join(p)))?;
            dump_labels(&mut w, &out.labels)?;
            drop(w);
            if !out.failures.is_empty() {
                let mut ew: Box<dyn Write> = match errors {
                    Some(p) => sink(&Some(root.join(p)))?,
                    None => Box::new(io::stderr().lock()),
                };
                for (utt_id, msg) in &out.failures {
                    writeln!(ew, "{utt_id}\t{msg}")?;
                }
                eprintln!("{} of {} rows failed", out.failures.len(), rows.len());
                return Ok(1);
            }
            Ok(0)
        }
        Command::Merge { inputs, output } => {
            let mut sets = Vec::new();
            for spec in inputs {
                let (name, path) = spec
                    .split_once('=')
                    .ok_or_else(|| fail(format!("expected name=path, got {spec:?}")))?;
                sets.push((
                    name.to_string(),
                    load_manifest(open(&root.join(path))?)?,
                ));
            }
            let merged = merge_manifests(&sets)?;
            let mut out = sink(&output.as_ref().map(|p| root.join(p)))?;
            dump_manifest(&mut out, &merged)?;
            Ok(0)
        }
    }
}

impl DecodeArgs {
    fn empty() -> Self {
        DecodeArgs {
            beam: None,
            token_beam: None,
            beam_threshold: None,
            lm_weight: None,
            word_insertion: None,
            eos_penalty: None,
            blank_threshold: None,
            nbest: None,
            max_output_len: None,
            merge: None,
            no_lm_eos: false,
        }
    }
}
