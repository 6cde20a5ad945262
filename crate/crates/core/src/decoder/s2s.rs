//! Step-synchronous beam search over an autoregressive scorer, with
//! word-piece LM fusion and an EOS penalty against early stopping.

use super::{pieces_to_words, sort_entries, DecodeError, DecodeMode, DecodeOptions, NBestEntry, LN_10};
use crate::emissions::{log_sum_exp, SeqScorer};
use crate::lexicon::{TokenId, TokenInventory};
use crate::lm::{LmState, LmUnit, NGramModel};

#[derive(Debug, Clone)]
struct S2sHyp {
    tokens: Vec<TokenId>,
    am: f64,
    /// Unweighted log10 LM score.
    lm_raw: f64,
    combined: f64,
    lm_state: LmState,
}

#[derive(Debug)]
pub struct S2sOutput {
    pub entries: Vec<NBestEntry>,
    /// False when no hypothesis emitted EOS within `max_output_len`; the
    /// entries are then the best unfinished prefixes.
    pub finished: bool,
}

/// Lexicon-free beam search for Seq2Seq scorers. Word pieces are joined
/// into words via the `_` boundary marker.
pub fn decode_s2s(
    utt_id: &str,
    scorer: &dyn SeqScorer,
    inventory: &TokenInventory,
    lm: Option<&NGramModel>,
    opts: &DecodeOptions,
) -> Result<S2sOutput, DecodeError> {
    opts.validate()?;
    if !matches!(opts.mode, DecodeMode::LexfreeS2s | DecodeMode::ZerolmS2s) {
        return Err(DecodeError::BadMode(opts.mode));
    }
    if scorer.vocab_size() != inventory.len() {
        return Err(DecodeError::ScorerDimension {
            got: scorer.vocab_size(),
            want: inventory.len(),
        });
    }
    let use_lm = opts.mode == DecodeMode::LexfreeS2s && opts.lm_weight != 0.0;
    let model = match (use_lm, lm) {
        (false, _) => None,
        (true, Some(m)) => {
            if m.unit() != LmUnit::WordPiece {
                return Err(DecodeError::LmGranularity {
                    needed: "word-piece",
                });
            }
            Some(m)
        }
        (true, None) => {
            return Err(DecodeError::LmGranularity {
                needed: "word-piece",
            })
        }
    };
    // Inventory id -> LM token id, resolved once.
    let lm_map: Vec<crate::lm::TokenId> = match model {
        Some(m) => (0..inventory.len())
            .map(|i| m.resolve(inventory.token(i as TokenId)).0)
            .collect(),
        None => Vec::new(),
    };
    let alpha = opts.lm_weight * LN_10;
    let gamma = opts.eos_penalty;
    let eos = inventory.eos_id();
    let vocab = inventory.len();

    let mut live: Vec<S2sHyp> = vec![S2sHyp {
        tokens: Vec::new(),
        am: 0.0,
        lm_raw: 0.0,
        combined: 0.0,
        lm_state: model.map_or_else(LmState::empty, |m| m.begin_state()),
    }];
    let mut finished: Vec<S2sHyp> = Vec::new();

    for _step in 0..opts.max_output_len {
        if live.is_empty() {
            break;
        }
        let mut candidates: Vec<(S2sHyp, bool)> = Vec::new();
        for hyp in &live {
            let row = scorer.score_prefix(&hyp.tokens);
            if row.len() != vocab {
                return Err(DecodeError::ScorerDimension {
                    got: row.len(),
                    want: vocab,
                });
            }
            let lse = log_sum_exp(row.iter().copied());
            if lse.abs() > 1e-3 {
                return Err(DecodeError::ScorerNotNormalized(lse));
            }
            // Top `token_beam` continuations of this hypothesis.
            let cmp = |a: &TokenId, b: &TokenId| {
                row[*b as usize]
                    .partial_cmp(&row[*a as usize])
                    .expect("finite scorer output")
                    .then(a.cmp(b))
            };
            let mut order: Vec<TokenId> = (0..vocab as TokenId).collect();
            if opts.token_beam < vocab {
                order.select_nth_unstable_by(opts.token_beam, cmp);
                order.truncate(opts.token_beam);
            }
            order.sort_unstable_by(cmp);
            for &tok in &order {
                let s = row[tok as usize];
                let mut cand = hyp.clone();
                cand.am += s;
                let is_eos = tok == eos;
                if is_eos {
                    if opts.lm_eos {
                        if let Some(m) = model {
                            cand.lm_raw += m.score_token(&cand.lm_state, m.eos_id()).0;
                        }
                    }
                    cand.combined = cand.am + alpha * cand.lm_raw + gamma;
                } else {
                    cand.tokens.push(tok);
                    if let Some(m) = model {
                        let (lp, next) = m.score_token(&cand.lm_state, lm_map[tok as usize]);
                        cand.lm_raw += lp;
                        cand.lm_state = next;
                    }
                    cand.combined = cand.am + alpha * cand.lm_raw;
                }
                candidates.push((cand, is_eos));
            }
        }
        let best = candidates
            .iter()
            .map(|(c, _)| c.combined)
            .fold(f64::NEG_INFINITY, f64::max);
        let cutoff = best - opts.beam_threshold;
        let mut next_live: Vec<S2sHyp> = Vec::new();
        for (cand, is_eos) in candidates {
            if cand.combined < cutoff {
                continue;
            }
            if is_eos {
                finished.push(cand);
            } else {
                next_live.push(cand);
            }
        }
        next_live.sort_unstable_by(|a, b| {
            b.combined
                .partial_cmp(&a.combined)
                .expect("finite scores")
                .then_with(|| a.tokens.cmp(&b.tokens))
        });
        next_live.truncate(opts.beam);
        live = next_live;

        // Finished scores only decay as prefixes grow, so once the
        // nbest-th finished hypothesis beats every live one, stop.
        if finished.len() >= opts.nbest {
            let mut top: Vec<f64> = finished.iter().map(|h| h.combined).collect();
            top.sort_by(|a, b| b.partial_cmp(a).expect("finite scores"));
            let bar = top[opts.nbest - 1];
            if live.iter().all(|h| h.combined < bar) {
                break;
            }
        }
    }

    let (pool, is_finished) = if finished.is_empty() {
        (live, false)
    } else {
        (finished, true)
    };
    if pool.is_empty() {
        return Err(DecodeError::EmptyResult);
    }
    let mut entries: Vec<NBestEntry> = pool
        .into_iter()
        .map(|h| {
            let transcript = pieces_to_words(&h.tokens, inventory);
            NBestEntry::new(utt_id, transcript, h.am, h.lm_raw, h.combined)
        })
        .collect();
    sort_entries(&mut entries);
    entries.dedup_by(|a, b| a.transcript == b.transcript);
    entries.truncate(opts.nbest);
    Ok(S2sOutput {
        entries,
        finished: is_finished,
    })
}
