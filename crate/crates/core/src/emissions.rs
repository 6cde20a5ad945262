//! Acoustic-model emission matrices and the autoregressive scorer
//! interface used by the Seq2Seq decoder.
//!
//! EMAT binary format: magic `EMAT1\n`, one ASCII header line
//! `T V normalized\n`, then T*V little-endian f32 values row-major in
//! the natural-log domain. A text twin (header line then T rows of
//! whitespace-separated values) is accepted for hand-written fixtures.

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::lexicon::{TokenId, TokenInventory};

pub const EMAT_MAGIC: &[u8] = b"EMAT1\n";

#[derive(Debug, Error)]
pub enum EmissionError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("payload truncated: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("non-finite value at frame {frame}, token {token}")]
    NonFinite { frame: usize, token: usize },
    #[error("row {frame} is not normalized (log-sum-exp {lse})")]
    NotNormalized { frame: usize, lse: f64 },
    #[error("dimension mismatch: matrix has {matrix} columns, inventory has {inventory}")]
    DimensionMismatch { matrix: usize, inventory: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// T x V natural-log scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    frames: usize,
    vocab: usize,
    values: Vec<f32>,
    normalized: bool,
}

pub fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let vals: Vec<f64> = values.collect();
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl EmissionMatrix {
    pub fn new(
        frames: usize,
        vocab: usize,
        values: Vec<f32>,
        normalized: bool,
    ) -> Result<Self, EmissionError> {
        assert_eq!(values.len(), frames * vocab, "value count must be T*V");
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(EmissionError::NonFinite {
                    frame: i / vocab.max(1),
                    token: i % vocab.max(1),
                });
            }
        }
        let m = EmissionMatrix {
            frames,
            vocab,
            values,
            normalized,
        };
        if normalized {
            for t in 0..frames {
                let lse = log_sum_exp(m.row(t).iter().map(|&v| v as f64));
                if lse.abs() > 1e-3 {
                    return Err(EmissionError::NotNormalized { frame: t, lse });
                }
            }
        }
        Ok(m)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        &self.values[frame * self.vocab..(frame + 1) * self.vocab]
    }

    pub fn score(&self, frame: usize, token: TokenId) -> f64 {
        self.values[frame * self.vocab + token as usize] as f64
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Read the EMAT binary format.
pub fn read_emissions<R: Read>(mut source: R) -> Result<EmissionMatrix, EmissionError> {
    let mut magic = [0u8; 6];
    source.read_exact(&mut magic).map_err(|_| EmissionError::BadMagic)?;
    if magic != EMAT_MAGIC {
        return Err(EmissionError::BadMagic);
    }
    let mut header = Vec::new();
    loop {
        let mut b = [0u8; 1];
        source
            .read_exact(&mut b)
            .map_err(|_| EmissionError::BadHeader("unterminated".into()))?;
        if b[0] == b'\n' {
            break;
        }
        header.push(b[0]);
        if header.len() > 128 {
            return Err(EmissionError::BadHeader("header too long".into()));
        }
    }
    let header = String::from_utf8(header)
        .map_err(|_| EmissionError::BadHeader("non-utf8".into()))?;
    let (frames, vocab, normalized) = parse_header(&header)?;
    let expected = frames * vocab * 4;
    let mut payload = Vec::with_capacity(expected);
    source.read_to_end(&mut payload)?;
    if payload.len() < expected {
        return Err(EmissionError::Truncated {
            expected,
            got: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(EmissionError::BadHeader(format!(
            "{} trailing bytes",
            payload.len() - expected
        )));
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    EmissionMatrix::new(frames, vocab, values, normalized)
}

fn parse_header(header: &str) -> Result<(usize, usize, bool), EmissionError> {
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(EmissionError::BadHeader(header.to_string()));
    }
    let frames: usize = fields[0]
        .parse()
        .map_err(|_| EmissionError::BadHeader(header.to_string()))?;
    let vocab: usize = fields[1]
        .parse()
        .map_err(|_| EmissionError::BadHeader(header.to_string()))?;
    let normalized = match fields[2] {
        "0" => false,
        "1" => true,
        _ => return Err(EmissionError::BadHeader(header.to_string())),
    };
    Ok((frames, vocab, normalized))
}

/// Write the EMAT binary format; `read_emissions` inverts this bit-exactly.
pub fn write_emissions<W: Write>(
    matrix: &EmissionMatrix,
    mut sink: W,
) -> std::io::Result<()> {
    sink.write_all(EMAT_MAGIC)?;
    writeln!(
        sink,
        "{} {} {}",
        matrix.frames,
        matrix.vocab,
        u8::from(matrix.normalized)
    )?;
    for v in &matrix.values {
        sink.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read the `.emat.txt` text twin.
pub fn read_emissions_text<R: BufRead>(source: R) -> Result<EmissionMatrix, EmissionError> {
    let mut lines = source.lines();
    let header = lines
        .next()
        .ok_or_else(|| EmissionError::BadHeader("empty file".into()))??;
    let (frames, vocab, normalized) = parse_header(&header)?;
    let mut values = Vec::with_capacity(frames * vocab);
    for (t, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for field in line.split_whitespace() {
            let v: f32 = field.parse().map_err(|_| {
                EmissionError::BadHeader(format!("bad value {field:?} in row {t}"))
            })?;
            values.push(v);
        }
    }
    if values.len() != frames * vocab {
        return Err(EmissionError::Truncated {
            expected: frames * vocab * 4,
            got: values.len() * 4,
        });
    }
    EmissionMatrix::new(frames, vocab, values, normalized)
}

/// Synthesize emissions whose greedy CTC collapse is exactly `transcript`
/// when `noise` is 0. Each token occupies `frames_per_token` frames, the
/// last of which is a blank separator, so repeated tokens survive the
/// collapse.
pub fn synth_emissions(
    transcript: &[TokenId],
    inventory: &TokenInventory,
    noise: f64,
    frames_per_token: usize,
    seed: u64,
) -> EmissionMatrix {
    assert!((0.0..1.0).contains(&noise), "noise must be in [0, 1)");
    assert!(frames_per_token >= 2, "frames_per_token must be >= 2");
    let vocab = inventory.len();
    let blank = inventory.blank_id();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut targets: Vec<TokenId> = Vec::new();
    for &tok in transcript {
        for _ in 0..frames_per_token - 1 {
            targets.push(tok);
        }
        targets.push(blank);
    }
    if targets.is_empty() {
        targets.extend([blank, blank]);
    }
    let mut values = Vec::with_capacity(targets.len() * vocab);
    for &target in &targets {
        // Target weight 1, every other token strictly below it; noise
        // spreads mass but never moves the argmax.
        let mut weights: Vec<f64> = (0..vocab)
            .map(|v| {
                if v as TokenId == target {
                    1.0
                } else {
                    noise * rng.gen::<f64>() + 1e-9
                }
            })
            .collect();
        let sum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= sum;
        }
        values.extend(weights.iter().map(|w| w.ln() as f32));
    }
    EmissionMatrix::new(targets.len(), vocab, values, true)
        .expect("synthesized rows are normalized by construction")
}

/// Autoregressive next-token scorer: natural-log distribution over the
/// inventory (EOS included) given the emitted prefix.
pub trait SeqScorer {
    fn vocab_size(&self) -> usize;
    /// Must return `vocab_size()` natural-log values with log-sum-exp
    /// within 1e-3 of 0, deterministically for a fixed prefix.
    fn score_prefix(&self, prefix: &[TokenId]) -> Vec<f64>;
}

/// File-backed scorer: scripted rows per prefix, uniform elsewhere.
#[derive(Debug, Clone)]
pub struct ReplayScorer {
    vocab: usize,
    rows: HashMap<Vec<TokenId>, Vec<f64>>,
}

impl ReplayScorer {
    pub fn new(vocab: usize) -> Self {
        ReplayScorer {
            vocab,
            rows: HashMap::new(),
        }
    }

    pub fn insert(&mut self, prefix: Vec<TokenId>, row: Vec<f64>) -> Result<(), EmissionError> {
        assert_eq!(row.len(), self.vocab);
        let lse = log_sum_exp(row.iter().copied());
        if lse.abs() > 1e-3 {
            return Err(EmissionError::NotNormalized { frame: 0, lse });
        }
        self.rows.insert(prefix, row);
        Ok(())
    }

    /// One record per line: `prefix-ids|v1 v2 ...` with prefix ids
    /// space-separated (empty left side = the empty prefix).
    pub fn from_reader<R: BufRead>(reader: R, vocab: usize) -> Result<Self, EmissionError> {
        let mut scorer = ReplayScorer::new(vocab);
        for (no, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (prefix, row) = line
                .split_once('|')
                .ok_or_else(|| EmissionError::BadHeader(format!("line {}: missing '|'", no + 1)))?;
            let prefix: Vec<TokenId> = prefix
                .split_whitespace()
                .map(|f| {
                    f.parse().map_err(|_| {
                        EmissionError::BadHeader(format!("line {}: bad prefix id {f:?}", no + 1))
                    })
                })
                .collect::<Result<_, _>>()?;
            let row: Vec<f64> = row
                .split_whitespace()
                .map(|f| {
                    f.parse().map_err(|_| {
                        EmissionError::BadHeader(format!("line {}: bad value {f:?}", no + 1))
                    })
                })
                .collect::<Result<_, _>>()?;
            if row.len() != vocab {
                return Err(EmissionError::DimensionMismatch {
                    matrix: row.len(),
                    inventory: vocab,
                });
            }
            scorer.insert(prefix, row)?;
        }
        Ok(scorer)
    }
}

impl SeqScorer for ReplayScorer {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn score_prefix(&self, prefix: &[TokenId]) -> Vec<f64> {
        match self.rows.get(prefix) {
            Some(row) => row.clone(),
            None => vec![-(self.vocab as f64).ln(); self.vocab],
        }
    }
}
