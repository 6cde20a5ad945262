//! Self-training plumbing: manifests, pseudo-label generation over a
//! manifest of emission files, speech-interval chunking, and manifest
//! merging.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::decoder::{decode_ctc, DecodeError, DecodeOptions};
use crate::emissions::read_emissions;
use crate::lexicon::{Lexicon, LexiconTrie, TokenInventory};
use crate::lm::NGramModel;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate utt_id {0:?}")]
    DuplicateUtt(String),
    #[error("intervals not sorted and non-overlapping at index {0}")]
    UnsortedIntervals(usize),
    #[error("bad interval at index {0}: start must be < end, both finite")]
    BadInterval(usize),
    #[error("max_chunk must be positive")]
    BadChunk,
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One manifest row: where an utterance's emissions live, plus optional
/// reference transcript and audio duration.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub utt_id: String,
    pub path: PathBuf,
    pub reference: Option<Vec<String>>,
    pub duration_s: Option<f64>,
    /// Provenance tag set by `merge` (e.g. "labeled"/"pseudo").
    pub source: Option<String>,
}

/// Parse a manifest: TSV of utt_id, path, then optionally reference
/// transcript, duration seconds, and a source tag. Empty optional fields
/// are allowed. utt_ids must be unique.
pub fn load_manifest<R: BufRead>(source: R) -> Result<Vec<ManifestRow>, PipelineError> {
    let mut out: Vec<ManifestRow> = Vec::new();
    let mut seen = HashSet::new();
    for (no, line) in source.lines().enumerate() {
        let line = line?;
        let no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 2 || f.len() > 5 {
            return Err(PipelineError::Parse {
                line: no,
                msg: format!("expected 2-5 fields, found {}", f.len()),
            });
        }
        if !seen.insert(f[0].to_string()) {
            return Err(PipelineError::DuplicateUtt(f[0].to_string()));
        }
        let reference = match f.get(2) {
            None => None,
            Some(s) if s.is_empty() => None,
            Some(s) => Some(s.split(' ').map(str::to_string).collect()),
        };
        let duration_s = match f.get(3) {
            None => None,
            Some(s) if s.is_empty() => None,
            Some(s) => Some(s.parse().map_err(|_| PipelineError::Parse {
                line: no,
                msg: format!("bad duration {s:?}"),
            })?),
        };
        out.push(ManifestRow {
            utt_id: f[0].to_string(),
            path: PathBuf::from(f[1]),
            reference,
            duration_s,
            source: f.get(4).filter(|s| !s.is_empty()).map(|s| s.to_string()),
        });
    }
    Ok(out)
}

pub fn dump_manifest<W: Write>(sink: &mut W, rows: &[ManifestRow]) -> std::io::Result<()> {
    for r in rows {
        writeln!(
            sink,
            "{}\t{}\t{}\t{}\t{}",
            r.utt_id,
            r.path.display(),
            r.reference
                .as_ref()
                .map(|w| w.join(" "))
                .unwrap_or_default(),
            r.duration_s.map(|d| d.to_string()).unwrap_or_default(),
            r.source.clone().unwrap_or_default()
        )?;
    }
    Ok(())
}

/// Pseudo-labeling output: per-utterance top-1 transcripts plus the rows
/// that failed, with their error messages.
#[derive(Debug)]
pub struct PseudoLabels {
    /// (utt_id, transcript words), sorted by utt_id.
    pub labels: Vec<(String, Vec<String>)>,
    /// (utt_id, error message), sorted by utt_id.
    pub failures: Vec<(String, String)>,
}

/// Decode every manifest row and keep the best hypothesis as its label.
/// Rows run in parallel on `workers` threads; failures are collected,
/// not fatal. Output order is by utt_id regardless of scheduling. Paths
/// are resolved against `root`.
pub fn pseudo_label(
    rows: &[ManifestRow],
    root: &Path,
    inventory: &TokenInventory,
    lexicon: &Lexicon,
    trie: &LexiconTrie,
    lm: Option<&NGramModel>,
    opts: &DecodeOptions,
    workers: usize,
) -> Result<PseudoLabels, PipelineError> {
    opts.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))?;
    let mut one = opts.clone();
    one.nbest = 1;
    let results: Vec<(String, Result<Vec<String>, String>)> = pool.install(|| {
        rows.par_iter()
            .map(|row| {
                let outcome = decode_row(row, root, inventory, lexicon, trie, lm, &one);
                (row.utt_id.clone(), outcome)
            })
            .collect()
    });
    let mut labels = Vec::new();
    let mut failures = Vec::new();
    for (utt_id, outcome) in results {
        match outcome {
            Ok(words) => labels.push((utt_id, words)),
            Err(msg) => failures.push((utt_id, msg)),
        }
    }
    labels.sort();
    failures.sort();
    Ok(PseudoLabels { labels, failures })
}

fn decode_row(
    row: &ManifestRow,
    root: &Path,
    inventory: &TokenInventory,
    lexicon: &Lexicon,
    trie: &LexiconTrie,
    lm: Option<&NGramModel>,
    opts: &DecodeOptions,
) -> Result<Vec<String>, String> {
    let path = root.join(&row.path);
    let file = File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let emissions = read_emissions(BufReader::new(file))
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let entries = decode_ctc(&row.utt_id, &emissions, inventory, lexicon, trie, lm, opts)
        .map_err(|e| e.to_string())?;
    Ok(entries[0].transcript.clone())
}

/// Labels file: "utt_id<TAB>transcript" per row.
pub fn dump_labels<W: Write>(
    sink: &mut W,
    labels: &[(String, Vec<String>)],
) -> std::io::Result<()> {
    for (utt_id, words) in labels {
        writeln!(sink, "{}\t{}", utt_id, words.join(" "))?;
    }
    Ok(())
}

/// A chunk of consecutive speech intervals, at most `max_chunk` seconds
/// from first start to last end.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub start: f64,
    pub end: f64,
}

/// Pack sorted, non-overlapping speech intervals into chunks spanning at
/// most `max_chunk` seconds. Consecutive intervals are grouped greedily;
/// an interval longer than `max_chunk` is split at `max_chunk`
/// boundaries. The chunks cover exactly the input speech.
pub fn chunk_intervals(
    intervals: &[(f64, f64)],
    max_chunk: f64,
) -> Result<Vec<Chunk>, PipelineError> {
    if !(max_chunk > 0.0 && max_chunk.is_finite()) {
        return Err(PipelineError::BadChunk);
    }
    for (k, &(s, e)) in intervals.iter().enumerate() {
        if !(s.is_finite() && e.is_finite() && s < e) {
            return Err(PipelineError::BadInterval(k));
        }
        if k > 0 && s < intervals[k - 1].1 {
            return Err(PipelineError::UnsortedIntervals(k));
        }
    }
    let mut chunks: Vec<Chunk> = Vec::new();
    let mut current: Option<Chunk> = None;
    for &(s, e) in intervals {
        let mut s = s;
        // Long intervals: emit full-size pieces until the rest fits.
        while e - s > max_chunk {
            if let Some(c) = current.take() {
                chunks.push(c);
            }
            chunks.push(Chunk {
                start: s,
                end: s + max_chunk,
            });
            s += max_chunk;
        }
        match current.as_mut() {
            Some(c) if e - c.start <= max_chunk => c.end = e,
            _ => {
                if let Some(c) = current.take() {
                    chunks.push(c);
                }
                current = Some(Chunk { start: s, end: e });
            }
        }
    }
    if let Some(c) = current {
        chunks.push(c);
    }
    Ok(chunks)
}

pub const DEFAULT_MAX_CHUNK_S: f64 = 36.0;

/// Concatenate manifests, tagging every row with its source name.
/// Errors on utt_id collisions across inputs.
pub fn merge_manifests(
    inputs: &[(String, Vec<ManifestRow>)],
) -> Result<Vec<ManifestRow>, PipelineError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (source, rows) in inputs {
        for row in rows {
            if !seen.insert(row.utt_id.clone()) {
                return Err(PipelineError::DuplicateUtt(row.utt_id.clone()));
            }
            let mut row = row.clone();
            row.source = Some(source.clone());
            out.push(row);
        }
    }
    Ok(out)
}
