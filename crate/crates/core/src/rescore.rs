//! N-best rescoring with two external LM scores and a character-length
//! term: am + a1*lm1 + a2*lm2 + b*char_len, evaluated per utterance.

use std::collections::HashMap;
use std::io::BufRead;

use thiserror::Error;

use crate::decoder::{NBestEntry, LN_10};
use crate::lm::NGramModel;

#[derive(Debug, Error)]
pub enum RescoreError {
    #[error("missing external score for utterance {utt_id:?} rank {rank}")]
    MissingScore { utt_id: String, rank: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RescoreWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
}

/// An N-best entry with both external natural-log LM scores attached.
#[derive(Debug, Clone)]
pub struct ScoredNBest {
    pub entry: NBestEntry,
    pub lm1_log: f64,
    pub lm2_log: f64,
}

impl ScoredNBest {
    pub fn rescored(&self, w: &RescoreWeights) -> f64 {
        self.entry.am_score
            + w.alpha1 * self.lm1_log
            + w.alpha2 * self.lm2_log
            + w.beta * self.entry.char_len as f64
    }
}

/// Where a hypothesis-level LM score comes from: an in-process n-gram
/// model, or a file-borne column keyed by (utt_id, rank).
pub enum ScoreSource<'a> {
    NGram(&'a NGramModel),
    Column(HashMap<(String, usize), f64>),
    /// Constant score for every hypothesis (a zero column disables a term).
    Constant(f64),
}

impl ScoreSource<'_> {
    /// Natural-log score for one entry. `rank` is the 0-based position of
    /// the hypothesis within its utterance's list.
    fn score(&self, entry: &NBestEntry, rank: usize) -> Result<f64, RescoreError> {
        match self {
            ScoreSource::NGram(model) => {
                let words: Vec<&str> = entry.transcript.iter().map(String::as_str).collect();
                let (log10, _) = model.score_sentence(&words, true);
                Ok(log10 * LN_10)
            }
            ScoreSource::Column(map) => map
                .get(&(entry.utt_id.clone(), rank))
                .copied()
                .ok_or_else(|| RescoreError::MissingScore {
                    utt_id: entry.utt_id.clone(),
                    rank,
                }),
            ScoreSource::Constant(v) => Ok(*v),
        }
    }
}

/// Parse an external score file: TSV of utt_id, rank, log_prob.
pub fn load_score_column<R: BufRead>(
    source: R,
) -> Result<HashMap<(String, usize), f64>, RescoreError> {
    let mut map = HashMap::new();
    for (no, line) in source.lines().enumerate() {
        let line = line?;
        let no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(RescoreError::Parse {
                line: no,
                msg: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let rank: usize = fields[1].parse().map_err(|_| RescoreError::Parse {
            line: no,
            msg: format!("bad rank {:?}", fields[1]),
        })?;
        let score: f64 = fields[2].parse().map_err(|_| RescoreError::Parse {
            line: no,
            msg: format!("bad score {:?}", fields[2]),
        })?;
        if !score.is_finite() {
            return Err(RescoreError::Parse {
                line: no,
                msg: format!("non-finite score {:?}", fields[2]),
            });
        }
        map.insert((fields[0].to_string(), rank), score);
    }
    Ok(map)
}

/// Attach both external scores to every entry. Ranks are assigned per
/// utterance in list order.
pub fn attach_scores(
    entries: &[NBestEntry],
    lm1: &ScoreSource,
    lm2: &ScoreSource,
) -> Result<Vec<ScoredNBest>, RescoreError> {
    let mut ranks: HashMap<&str, usize> = HashMap::new();
    entries
        .iter()
        .map(|entry| {
            let rank = ranks.entry(&entry.utt_id).or_insert(0);
            let r = *rank;
            *rank += 1;
            Ok(ScoredNBest {
                entry: entry.clone(),
                lm1_log: lm1.score(entry, r)?,
                lm2_log: lm2.score(entry, r)?,
            })
        })
        .collect()
}

/// Reorder each utterance's hypotheses by the rescoring formula,
/// descending, with the decoder's deterministic tie-break. The input
/// order of utterances is preserved; `combined` is overwritten with the
/// rescored value.
pub fn rescore(entries: &[ScoredNBest], w: &RescoreWeights) -> Vec<NBestEntry> {
    // Group by utterance, keeping first-seen utterance order.
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&ScoredNBest>> = HashMap::new();
    for e in entries {
        let id = e.entry.utt_id.as_str();
        if !groups.contains_key(id) {
            order.push(id);
        }
        groups.entry(id).or_default().push(e);
    }
    let mut out = Vec::with_capacity(entries.len());
    for id in order {
        let mut group: Vec<(f64, &ScoredNBest)> = groups[id]
            .iter()
            .map(|e| (e.rescored(w), *e))
            .collect();
        group.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("rescored values are finite")
                .then_with(|| a.1.entry.transcript.cmp(&b.1.entry.transcript))
        });
        for (score, e) in group {
            let mut entry = e.entry.clone();
            entry.combined = score;
            out.push(entry);
        }
    }
    out
}
