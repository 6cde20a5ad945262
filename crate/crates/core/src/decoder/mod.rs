//! One-pass beam-search decoding: lexicon-based CTC with a word-level
//! LM, lexicon-free Seq2Seq with a word-piece LM, plus ZeroLM and greedy
//! modes. Scores are natural-log internally; LM log10 scores are scaled
//! by ln(10) at the fusion boundary.

mod ctc;
mod s2s;
mod words;

pub use ctc::decode_ctc;
pub use s2s::{decode_s2s, S2sOutput};
pub(crate) use words::WordsList;

use std::io::{BufRead, Write};

use thiserror::Error;

use crate::emissions::EmissionMatrix;
use crate::lexicon::{TokenId, TokenInventory};

pub const LN_10: f64 = std::f64::consts::LN_10;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("emission matrix has {matrix} columns, inventory has {inventory}")]
    DimensionMismatch { matrix: usize, inventory: usize },
    #[error("emissions must be normalized per-frame log-posteriors")]
    NotNormalized,
    #[error("LM granularity mismatch: {needed} model required")]
    LmGranularity { needed: &'static str },
    #[error("mode {0:?} is not valid for this decoder")]
    BadMode(DecodeMode),
    #[error("invalid options: {0}")]
    BadOptions(String),
    #[error("decoder produced no hypotheses (impossible lexicon?)")]
    EmptyResult,
    #[error("scorer returned {got} values, expected {want}")]
    ScorerDimension { got: usize, want: usize },
    #[error("scorer row not normalized (log-sum-exp {0})")]
    ScorerNotNormalized(f64),
    #[error("line {line}: {msg}")]
    NBestParse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    LexiconCtc,
    LexfreeS2s,
    ZerolmCtc,
    ZerolmS2s,
    Greedy,
}

impl DecodeMode {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lexicon_ctc" => DecodeMode::LexiconCtc,
            "lexfree_s2s" => DecodeMode::LexfreeS2s,
            "zerolm_ctc" => DecodeMode::ZerolmCtc,
            "zerolm_s2s" => DecodeMode::ZerolmS2s,
            "greedy" => DecodeMode::Greedy,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeRule {
    LogAdd,
    Max,
}

#[derive(Debug, Clone)]
pub struct DecodeOptions {
    pub beam: usize,
    pub token_beam: usize,
    /// Natural-log score gap below the best candidate.
    pub beam_threshold: f64,
    /// LM weight alpha (applied to ln-domain LM scores).
    pub lm_weight: f64,
    /// Word insertion score beta, CTC/lexicon mode only.
    pub word_insertion: f64,
    /// EOS penalty gamma, Seq2Seq mode only; added unscaled on finish.
    pub eos_penalty: f64,
    /// Posterior above which a frame expands only blank extensions.
    pub blank_threshold: f64,
    pub mode: DecodeMode,
    pub max_output_len: usize,
    pub nbest: usize,
    pub merge_rule: MergeRule,
    /// Apply the LM end-of-sentence transition at utterance end.
    pub lm_eos: bool,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam: 50,
            token_beam: 50,
            beam_threshold: f64::INFINITY,
            lm_weight: 0.0,
            word_insertion: 0.0,
            eos_penalty: 0.0,
            blank_threshold: 0.95,
            mode: DecodeMode::ZerolmCtc,
            max_output_len: 512,
            nbest: 1,
            merge_rule: MergeRule::LogAdd,
            lm_eos: true,
        }
    }
}

impl DecodeOptions {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam < 1 {
            return Err(DecodeError::BadOptions("beam must be >= 1".into()));
        }
        if self.token_beam < 1 {
            return Err(DecodeError::BadOptions("token_beam must be >= 1".into()));
        }
        if !(self.blank_threshold > 0.0 && self.blank_threshold <= 1.0) {
            return Err(DecodeError::BadOptions(
                "blank_threshold must be in (0, 1]".into(),
            ));
        }
        if self.nbest < 1 || self.nbest > self.beam {
            return Err(DecodeError::BadOptions(
                "nbest must satisfy 1 <= nbest <= beam".into(),
            ));
        }
        Ok(())
    }
}

/// A finalized candidate with decomposed scores, ready for rescoring.
#[derive(Debug, Clone, PartialEq)]
pub struct NBestEntry {
    pub utt_id: String,
    /// Word sequence.
    pub transcript: Vec<String>,
    /// Natural-log acoustic score.
    pub am_score: f64,
    /// Unweighted log10 LM score.
    pub lm_score_raw: f64,
    /// Characters including inter-word spaces.
    pub char_len: usize,
    /// Weighted decode-time score (not serialized).
    pub combined: f64,
}

/// Character count of a transcript including the spaces between words.
pub fn transcript_char_len(words: &[String]) -> usize {
    if words.is_empty() {
        return 0;
    }
    words.iter().map(|w| w.chars().count()).sum::<usize>() + words.len() - 1
}

impl NBestEntry {
    pub fn new(
        utt_id: &str,
        transcript: Vec<String>,
        am_score: f64,
        lm_score_raw: f64,
        combined: f64,
    ) -> Self {
        let char_len = transcript_char_len(&transcript);
        NBestEntry {
            utt_id: utt_id.to_string(),
            transcript,
            am_score,
            lm_score_raw,
            char_len,
            combined,
        }
    }

    pub fn transcript_string(&self) -> String {
        self.transcript.join(" ")
    }
}

const NBEST_HEADER: &str = "utt_id\tam_score\tlm_score_raw\tchar_len\ttranscript";

/// Write an N-best list as TSV (one hypothesis per line, header first).
pub fn dump_nbest<W: Write>(entries: &[NBestEntry], mut sink: W) -> std::io::Result<()> {
    writeln!(sink, "{NBEST_HEADER}")?;
    for e in entries {
        writeln!(
            sink,
            "{}\t{}\t{}\t{}\t{}",
            e.utt_id,
            e.am_score,
            e.lm_score_raw,
            e.char_len,
            e.transcript_string()
        )?;
    }
    Ok(())
}

/// Parse the TSV written by [`dump_nbest`]. The loaded `combined` score
/// is seeded with the acoustic score; rescoring recomputes it.
pub fn load_nbest<R: BufRead>(source: R) -> Result<Vec<NBestEntry>, DecodeError> {
    let mut lines = source.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).transpose()?;
    if header.as_deref() != Some(NBEST_HEADER) {
        return Err(DecodeError::NBestParse {
            line: 1,
            msg: "missing header".into(),
        });
    }
    let mut out = Vec::new();
    for (no, line) in lines {
        let line = line?;
        let no = no + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(DecodeError::NBestParse {
                line: no,
                msg: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let parse_score = |f: &str| -> Result<f64, DecodeError> {
            let v: f64 = f.parse().map_err(|_| DecodeError::NBestParse {
                line: no,
                msg: format!("bad score {f:?}"),
            })?;
            if !v.is_finite() {
                return Err(DecodeError::NBestParse {
                    line: no,
                    msg: format!("non-finite score {f:?}"),
                });
            }
            Ok(v)
        };
        let am = parse_score(fields[1])?;
        let lm = parse_score(fields[2])?;
        let char_len: usize = fields[3].parse().map_err(|_| DecodeError::NBestParse {
            line: no,
            msg: format!("bad char_len {:?}", fields[3]),
        })?;
        let transcript: Vec<String> = if fields[4].is_empty() {
            Vec::new()
        } else {
            fields[4].split(' ').map(str::to_string).collect()
        };
        if char_len != transcript_char_len(&transcript) {
            return Err(DecodeError::NBestParse {
                line: no,
                msg: format!("char_len {char_len} does not match transcript"),
            });
        }
        out.push(NBestEntry {
            utt_id: fields[0].to_string(),
            transcript,
            am_score: am,
            lm_score_raw: lm,
            char_len,
            combined: am,
        });
    }
    Ok(out)
}

/// Greedy CTC decode: per-frame argmax, collapse adjacent repeats, drop
/// blanks.
pub fn greedy_ctc(
    emissions: &EmissionMatrix,
    inventory: &TokenInventory,
) -> Result<Vec<TokenId>, DecodeError> {
    if emissions.vocab() != inventory.len() {
        return Err(DecodeError::DimensionMismatch {
            matrix: emissions.vocab(),
            inventory: inventory.len(),
        });
    }
    let blank = inventory.blank_id();
    let mut out = Vec::new();
    let mut prev: Option<TokenId> = None;
    for t in 0..emissions.frames() {
        let row = emissions.row(t);
        let mut best = 0usize;
        for (i, v) in row.iter().enumerate() {
            if *v > row[best] {
                best = i;
            }
        }
        let tok = best as TokenId;
        if tok != blank && prev != Some(tok) {
            out.push(tok);
        }
        prev = Some(tok);
    }
    Ok(out)
}

/// Join word-piece token strings into words: a piece starting with the
/// `_` boundary marker begins a new word.
pub fn pieces_to_words(pieces: &[TokenId], inventory: &TokenInventory) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    for &p in pieces {
        let s = inventory.token(p);
        if let Some(rest) = s.strip_prefix('_') {
            words.push(rest.to_string());
        } else if let Some(last) = words.last_mut() {
            last.push_str(s);
        } else {
            words.push(s.to_string());
        }
    }
    words.retain(|w| !w.is_empty());
    words
}

/// Deterministic final ordering: best combined score first, ties broken
/// by the lexicographically smaller transcript.
pub(crate) fn sort_entries(entries: &mut [NBestEntry]) {
    entries.sort_by(|a, b| {
        b.combined
            .partial_cmp(&a.combined)
            .expect("scores are finite")
            .then_with(|| a.transcript.cmp(&b.transcript))
    });
}
