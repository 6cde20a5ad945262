//! Evaluation utilities: word error rate, transcript shuffling,
//! silence-gap segmentation of aligned utterances, and the
//! original-vs-shuffled perplexity probe.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;


use crate::lm::{LmError, NGramModel};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("alignment for {utt_id:?}: {msg}")]
    BadAlignment { utt_id: String, msg: String },
    #[error(transparent)]
    Lm(#[from] LmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One force-aligned word.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentSegment {
    pub word: String,
    pub start: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WerBreakdown {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_len: usize,
    /// (S+D+I)/N; meaningless when `infinite` is set (empty reference,
    /// nonempty hypothesis).
    pub wer: f64,
    pub infinite: bool,
}

impl WerBreakdown {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Minimum-edit-distance WER. Ties in the alignment are broken in favor
/// of substitutions over insert+delete pairs, so S+D+I always equals the
/// word-level Levenshtein distance and S is maximal among minimum-cost
/// alignments.
pub fn wer<S: AsRef<str>, T: AsRef<str>>(reference: &[S], hypothesis: &[T]) -> WerBreakdown {
    if reference.is_empty() {
        return WerBreakdown {
            substitutions: 0,
            deletions: 0,
            insertions: hypothesis.len(),
            reference_len: 0,
            wer: if hypothesis.is_empty() { 0.0 } else { f64::INFINITY },
            infinite: !hypothesis.is_empty(),
        };
    }
    let (n, m) = (reference.len(), hypothesis.len());
    // cost[i][j], and the op taken to reach it: 0 match, 1 sub, 2 del, 3 ins.
    let mut cost = vec![vec![0usize; m + 1]; n + 1];
    let mut op = vec![vec![0u8; m + 1]; n + 1];
    for i in 1..=n {
        cost[i][0] = i;
        op[i][0] = 2;
    }
    for j in 1..=m {
        cost[0][j] = j;
        op[0][j] = 3;
    }
    for i in 1..=n {
        for j in 1..=m {
            if reference[i - 1].as_ref() == hypothesis[j - 1].as_ref() {
                cost[i][j] = cost[i - 1][j - 1];
                op[i][j] = 0;
                continue;
            }
            // Prefer substitution on ties.
            let sub = cost[i - 1][j - 1] + 1;
            let del = cost[i - 1][j] + 1;
            let ins = cost[i][j - 1] + 1;
            let best = sub.min(del).min(ins);
            cost[i][j] = best;
            op[i][j] = if sub == best {
                1
            } else if del == best {
                2
            } else {
                3
            };
        }
    }
    let (mut s, mut d, mut ins) = (0, 0, 0);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        match op[i][j] {
            0 => {
                i -= 1;
                j -= 1;
            }
            1 => {
                s += 1;
                i -= 1;
                j -= 1;
            }
            2 => {
                d += 1;
                i -= 1;
            }
            _ => {
                ins += 1;
                j -= 1;
            }
        }
    }
    WerBreakdown {
        substitutions: s,
        deletions: d,
        insertions: ins,
        reference_len: n,
        wer: (s + d + ins) as f64 / n as f64,
        infinite: false,
    }
}

/// Corpus-level WER: pooled errors over pooled reference length.
pub fn corpus_wer(pairs: &[(Vec<String>, Vec<String>)]) -> WerBreakdown {
    let mut total = WerBreakdown {
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        reference_len: 0,
        wer: 0.0,
        infinite: false,
    };
    for (r, h) in pairs {
        let b = wer(r, h);
        total.substitutions += b.substitutions;
        total.deletions += b.deletions;
        total.insertions += b.insertions;
        total.reference_len += b.reference_len;
        total.infinite |= b.infinite;
    }
    total.wer = if total.infinite {
        f64::INFINITY
    } else if total.reference_len == 0 {
        0.0
    } else {
        total.errors() as f64 / total.reference_len as f64
    };
    total
}

/// Seeded Fisher–Yates permutation of a word sequence.
pub fn shuffle_transcript<S: AsRef<str>>(words: &[S], seed: u64) -> Vec<String> {
    let mut out: Vec<String> = words.iter().map(|w| w.as_ref().to_string()).collect();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

/// Why an utterance was dropped by [`segment_shuffle`].
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentReject {
    SingleSegment,
    /// A segment exceeded the word cap; carries its word count.
    LongSegment(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedUtterance {
    /// Word groups in shuffled order; within a group, original order.
    pub segments: Vec<Vec<String>>,
    /// Midpoints (seconds) of the silence gaps that were split on, in
    /// original time order.
    pub split_points: Vec<f64>,
}

/// Split an aligned utterance at silence gaps strictly longer than
/// `min_gap` (split timestamp at the gap midpoint), reject utterances
/// with a single segment or any segment of more than
/// `max_words_per_segment` words, and return the kept segments in a
/// seeded random order.
pub fn segment_shuffle(
    utterance: &[AlignmentSegment],
    min_gap: f64,
    max_words_per_segment: usize,
    seed: u64,
) -> Result<Result<SegmentedUtterance, SegmentReject>, EvalError> {
    validate_alignment("", utterance)?;
    let mut segments: Vec<Vec<String>> = vec![Vec::new()];
    let mut split_points = Vec::new();
    for (k, seg) in utterance.iter().enumerate() {
        if k > 0 {
            let prev = &utterance[k - 1];
            let prev_end = prev.start + prev.duration;
            let gap = seg.start - prev_end;
            if gap > min_gap {
                split_points.push(prev_end + gap / 2.0);
                segments.push(Vec::new());
            }
        }
        segments.last_mut().unwrap().push(seg.word.clone());
    }
    if segments.len() < 2 {
        return Ok(Err(SegmentReject::SingleSegment));
    }
    if let Some(long) = segments.iter().find(|s| s.len() > max_words_per_segment) {
        return Ok(Err(SegmentReject::LongSegment(long.len())));
    }
    segments.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Ok(SegmentedUtterance {
        segments,
        split_points,
    }))
}

pub const DEFAULT_MIN_GAP: f64 = 0.130;
pub const DEFAULT_MAX_WORDS_PER_SEGMENT: usize = 6;

fn validate_alignment(utt_id: &str, segments: &[AlignmentSegment]) -> Result<(), EvalError> {
    let bad = |msg: String| EvalError::BadAlignment {
        utt_id: utt_id.to_string(),
        msg,
    };
    for (k, s) in segments.iter().enumerate() {
        if !(s.start >= 0.0 && s.duration > 0.0) {
            return Err(bad(format!(
                "segment {k}: start {} duration {}",
                s.start, s.duration
            )));
        }
        if k > 0 {
            let prev = &segments[k - 1];
            if s.start < prev.start + prev.duration {
                return Err(bad(format!("segment {k} overlaps or is out of order")));
            }
        }
    }
    Ok(())
}

/// Histogram of words per segment across accepted utterances, indexed by
/// word count (index 0 unused).
pub fn segment_histogram(utterances: &[SegmentedUtterance]) -> Vec<usize> {
    let max = utterances
        .iter()
        .flat_map(|u| u.segments.iter().map(Vec::len))
        .max()
        .unwrap_or(0);
    let mut hist = vec![0usize; max + 1];
    for u in utterances {
        for s in &u.segments {
            hist[s.len()] += 1;
        }
    }
    hist
}

/// Perplexity of a corpus and of its word-shuffled counterpart (each
/// sentence shuffled independently; sentence i uses seed + i).
pub fn perplexity_probe(
    lm: &NGramModel,
    corpus: &[Vec<String>],
    seed: u64,
) -> Result<(f64, f64), EvalError> {
    let original = lm.perplexity(corpus, true)?;
    let shuffled: Vec<Vec<String>> = corpus
        .iter()
        .enumerate()
        .map(|(i, s)| shuffle_transcript(s, seed.wrapping_add(i as u64)))
        .collect();
    Ok((original, lm.perplexity(&shuffled, true)?))
}

/// Parse an alignment file: TSV of utt_id, word, start_s, duration_s.
/// Rows for one utterance must be contiguous and time-ordered. Returns
/// utterances in first-appearance order.
pub fn load_alignments<R: BufRead>(
    source: R,
) -> Result<Vec<(String, Vec<AlignmentSegment>)>, EvalError> {
    let mut order: Vec<String> = Vec::new();
    let mut map: HashMap<String, Vec<AlignmentSegment>> = HashMap::new();
    for (no, line) in source.lines().enumerate() {
        let line = line?;
        let no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 4 {
            return Err(EvalError::Parse {
                line: no,
                msg: format!("expected 4 fields, found {}", f.len()),
            });
        }
        let num = |s: &str| -> Result<f64, EvalError> {
            s.parse().map_err(|_| EvalError::Parse {
                line: no,
                msg: format!("bad number {s:?}"),
            })
        };
        if !map.contains_key(f[0]) {
            order.push(f[0].to_string());
        }
        map.entry(f[0].to_string()).or_default().push(AlignmentSegment {
            word: f[1].to_string(),
            start: num(f[2])?,
            duration: num(f[3])?,
        });
    }
    let mut out = Vec::with_capacity(order.len());
    for id in order {
        let segs = map.remove(&id).unwrap();
        validate_alignment(&id, &segs)?;
        out.push((id, segs));
    }
    Ok(out)
}

/// Write a probe report: overall perplexities plus per-sentence log10
/// probabilities for the original corpus.
pub fn dump_probe_report<W: Write>(
    sink: &mut W,
    lm: &NGramModel,
    corpus: &[Vec<String>],
    ppl_original: f64,
    ppl_shuffled: f64,
) -> std::io::Result<()> {
    writeln!(sink, "ppl_original\t{ppl_original}")?;
    writeln!(sink, "ppl_shuffled\t{ppl_shuffled}")?;
    for (i, sentence) in corpus.iter().enumerate() {
        let words: Vec<&str> = sentence.iter().map(String::as_str).collect();
        let (log10, events) = lm.score_sentence(&words, true);
        writeln!(sink, "{i}\t{log10}\t{events}")?;
    }
    Ok(())
}
