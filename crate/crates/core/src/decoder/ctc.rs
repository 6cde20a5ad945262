//! Frame-synchronous lexicon-constrained beam search over CTC emissions.

use std::collections::HashMap;

use super::{sort_entries, DecodeError, DecodeMode, DecodeOptions, NBestEntry, WordsList, LN_10};
use crate::emissions::EmissionMatrix;
use crate::lexicon::{Lexicon, LexiconTrie, TokenId, TokenInventory, TRIE_ROOT};
use crate::lm::{LmState, LmUnit, NGramModel};

#[derive(Debug, Clone)]
struct CtcHyp {
    am: f64,
    /// Unweighted log10 LM score over completed words.
    lm_raw: f64,
    combined: f64,
    trie_node: u32,
    last_token: Option<TokenId>,
    words: WordsList,
    lm_state: LmState,
}

/// Merge key: hypotheses that agree here are CTC-equivalent and their
/// probability mass is combined. The LM state is a function of `words`,
/// so it is not part of the key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct MergeKey {
    trie_node: u32,
    last_token: Option<TokenId>,
    words: WordsList,
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

struct LmFusion<'a> {
    model: &'a NGramModel,
    /// Lexicon word id -> LM token id.
    word_map: Vec<crate::lm::TokenId>,
    /// Per-decode score cache keyed by (state, word); semantics must
    /// equal the uncached path exactly.
    cache: HashMap<(LmState, crate::lm::TokenId), (f64, LmState)>,
}

impl<'a> LmFusion<'a> {
    fn new(model: &'a NGramModel, lexicon: &Lexicon) -> Self {
        let word_map = lexicon
            .iter()
            .map(|(_, word, _)| model.resolve(word).0)
            .collect();
        LmFusion {
            model,
            word_map,
            cache: HashMap::new(),
        }
    }

    fn score_word(&mut self, state: &LmState, word: crate::lexicon::WordId) -> (f64, LmState) {
        let lm_word = self.word_map[word as usize];
        if let Some(hit) = self.cache.get(&(state.clone(), lm_word)) {
            return hit.clone();
        }
        let result = self.model.score_token(state, lm_word);
        self.cache
            .insert((state.clone(), lm_word), result.clone());
        result
    }

    fn score_eos(&mut self, state: &LmState) -> f64 {
        self.model.score_token(state, self.model.eos_id()).0
    }
}

/// Token ids of the top `k` scores in a frame, best first, ties broken
/// toward the lower id.
fn top_tokens(row: &[f32], k: usize) -> Vec<TokenId> {
    let cmp = |a: &TokenId, b: &TokenId| {
        row[*b as usize]
            .partial_cmp(&row[*a as usize])
            .expect("finite emissions")
            .then(a.cmp(b))
    };
    let mut idx: Vec<TokenId> = (0..row.len() as TokenId).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k, cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(cmp);
    idx
}

/// Lexicon-based CTC beam search. Returns the top `nbest` distinct
/// transcripts sorted by combined score.
pub fn decode_ctc(
    utt_id: &str,
    emissions: &EmissionMatrix,
    inventory: &TokenInventory,
    lexicon: &Lexicon,
    trie: &LexiconTrie,
    lm: Option<&NGramModel>,
    opts: &DecodeOptions,
) -> Result<Vec<NBestEntry>, DecodeError> {
    opts.validate()?;
    if !matches!(opts.mode, DecodeMode::LexiconCtc | DecodeMode::ZerolmCtc) {
        return Err(DecodeError::BadMode(opts.mode));
    }
    if emissions.vocab() != inventory.len() {
        return Err(DecodeError::DimensionMismatch {
            matrix: emissions.vocab(),
            inventory: inventory.len(),
        });
    }
    if !emissions.normalized() {
        return Err(DecodeError::NotNormalized);
    }
    // ZeroLM and zero-weight fusion take the same no-LM path, so their
    // outputs (LM column included) are identical.
    let use_lm = opts.mode == DecodeMode::LexiconCtc && opts.lm_weight != 0.0;
    let mut fusion = match (use_lm, lm) {
        (false, _) => None,
        (true, Some(model)) => {
            if model.unit() != LmUnit::Word {
                return Err(DecodeError::LmGranularity {
                    needed: "word-level",
                });
            }
            Some(LmFusion::new(model, lexicon))
        }
        (true, None) => {
            return Err(DecodeError::LmGranularity {
                needed: "word-level",
            })
        }
    };
    let alpha = opts.lm_weight * LN_10;
    let beta = opts.word_insertion;
    let blank = inventory.blank_id();

    let mut beam: Vec<CtcHyp> = vec![CtcHyp {
        am: 0.0,
        lm_raw: 0.0,
        combined: 0.0,
        trie_node: TRIE_ROOT,
        last_token: None,
        words: WordsList::empty(),
        lm_state: fusion
            .as_ref()
            .map_or_else(LmState::empty, |f| f.model.begin_state()),
    }];
    let mut candidates: Vec<CtcHyp> = Vec::new();

    for t in 0..emissions.frames() {
        let row = emissions.row(t);
        let blank_score = row[blank as usize] as f64;
        let blank_only = blank_score.exp() > opts.blank_threshold;
        let frame_tokens = if blank_only {
            Vec::new()
        } else {
            top_tokens(row, opts.token_beam)
        };

        candidates.clear();
        for hyp in &beam {
            // Blank extension is always available.
            let mut cand = hyp.clone();
            cand.am += blank_score;
            cand.combined += blank_score;
            cand.last_token = None;
            candidates.push(cand);
            if blank_only {
                continue;
            }
            // Collapsed repeat of the last emitted token.
            if let Some(tok) = hyp.last_token {
                let s = row[tok as usize] as f64;
                let mut cand = hyp.clone();
                cand.am += s;
                cand.combined += s;
                candidates.push(cand);
            }
            // New tokens along the trie, restricted to the frame's top
            // `token_beam` tokens.
            for &tok in &frame_tokens {
                if tok == blank || Some(tok) == hyp.last_token {
                    continue;
                }
                let Some(child) = trie.child(hyp.trie_node, tok) else {
                    continue;
                };
                let s = row[tok as usize] as f64;
                if trie.has_children(child) {
                    let mut cand = hyp.clone();
                    cand.am += s;
                    cand.combined += s;
                    cand.trie_node = child;
                    cand.last_token = Some(tok);
                    candidates.push(cand);
                }
                for &word in trie.words_at(child) {
                    let mut cand = hyp.clone();
                    cand.am += s;
                    cand.trie_node = TRIE_ROOT;
                    cand.last_token = Some(tok);
                    cand.words = hyp.words.push(word);
                    if let Some(f) = fusion.as_mut() {
                        let (lp, next) = f.score_word(&hyp.lm_state, word);
                        cand.lm_raw += lp;
                        cand.lm_state = next;
                    }
                    cand.combined =
                        cand.am + alpha * cand.lm_raw + beta * cand.words.len() as f64;
                    candidates.push(cand);
                }
            }
        }

        // Score-gap pruning relative to the best candidate.
        let best = candidates
            .iter()
            .map(|c| c.combined)
            .fold(f64::NEG_INFINITY, f64::max);
        let cutoff = best - opts.beam_threshold;
        // Merge CTC-equivalent hypotheses.
        let mut merged: Vec<CtcHyp> = Vec::with_capacity(candidates.len());
        let mut index: HashMap<MergeKey, usize> = HashMap::with_capacity(candidates.len());
        for cand in candidates.drain(..) {
            if cand.combined < cutoff {
                continue;
            }
            let key = MergeKey {
                trie_node: cand.trie_node,
                last_token: cand.last_token,
                words: cand.words.clone(),
            };
            match index.get(&key) {
                None => {
                    index.insert(key, merged.len());
                    merged.push(cand);
                }
                Some(&i) => {
                    let kept = &mut merged[i];
                    match opts.merge_rule {
                        super::MergeRule::LogAdd => {
                            kept.am = log_add_exp(kept.am, cand.am);
                            kept.combined =
                                kept.am + alpha * kept.lm_raw + beta * kept.words.len() as f64;
                        }
                        super::MergeRule::Max => {
                            if cand.combined > kept.combined {
                                *kept = cand;
                            }
                        }
                    }
                }
            }
        }
        merged.sort_unstable_by(|a, b| {
            b.combined
                .partial_cmp(&a.combined)
                .expect("finite scores")
                .then_with(|| a.words.cmp(&b.words))
                .then_with(|| a.trie_node.cmp(&b.trie_node))
                .then_with(|| a.last_token.cmp(&b.last_token))
        });
        merged.truncate(opts.beam);
        beam = merged;
    }

    // Finalize: drop pending partial words, apply the LM end-of-sentence
    // transition, then keep the best hypothesis per distinct transcript.
    let mut by_transcript: HashMap<WordsList, usize> = HashMap::new();
    let mut finals: Vec<CtcHyp> = Vec::new();
    for mut hyp in beam {
        hyp.trie_node = TRIE_ROOT;
        hyp.last_token = None;
        if opts.lm_eos {
            if let Some(f) = fusion.as_mut() {
                hyp.lm_raw += f.score_eos(&hyp.lm_state);
            }
        }
        hyp.combined = hyp.am + alpha * hyp.lm_raw + beta * hyp.words.len() as f64;
        match by_transcript.get(&hyp.words) {
            None => {
                by_transcript.insert(hyp.words.clone(), finals.len());
                finals.push(hyp);
            }
            Some(&i) => {
                if hyp.combined > finals[i].combined {
                    finals[i] = hyp;
                }
            }
        }
    }
    if finals.is_empty() {
        return Err(DecodeError::EmptyResult);
    }
    let mut entries: Vec<NBestEntry> = finals
        .into_iter()
        .map(|h| {
            let transcript: Vec<String> = h
                .words
                .to_vec()
                .into_iter()
                .map(|w| lexicon.word(w).to_string())
                .collect();
            NBestEntry::new(utt_id, transcript, h.am, h.lm_raw, h.combined)
        })
        .collect();
    sort_entries(&mut entries);
    entries.truncate(opts.nbest);
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::{build_trie, parse_lexicon, BLANK_TOKEN, EOS_TOKEN};

    fn inventory(extra: &[&str]) -> TokenInventory {
        let mut toks: Vec<String> = vec![BLANK_TOKEN.into(), EOS_TOKEN.into()];
        toks.extend(extra.iter().map(|s| s.to_string()));
        TokenInventory::new(toks, 0, 1).unwrap()
    }

    /// Normalized emissions where each frame puts `peak` mass on one token.
    fn peaked(frames: &[(TokenId, f64)], vocab: usize) -> EmissionMatrix {
        let mut values = Vec::new();
        for &(tok, peak) in frames {
            let rest = (1.0 - peak) / (vocab as f64 - 1.0);
            for v in 0..vocab {
                let p = if v as TokenId == tok { peak } else { rest };
                values.push(p.ln() as f32);
            }
        }
        EmissionMatrix::new(frames.len(), vocab, values, true).unwrap()
    }

    fn opts() -> DecodeOptions {
        DecodeOptions {
            beam: 64,
            token_beam: 64,
            mode: DecodeMode::ZerolmCtc,
            nbest: 1,
            ..DecodeOptions::default()
        }
    }

    #[test]
    fn all_blank_emissions_give_empty_transcript() {
        let inv = inventory(&["a"]);
        let lex = parse_lexicon("a\ta".as_bytes(), &inv).unwrap();
        let trie = build_trie(&lex);
        let blank = inv.blank_id();
        let m = peaked(&[(blank, 0.9), (blank, 0.9), (blank, 0.9)], inv.len());
        let out = decode_ctc("u", &m, &inv, &lex, &trie, None, &opts()).unwrap();
        assert!(out[0].transcript.is_empty());
        let expected: f64 = (0..3).map(|t| m.score(t, blank)).sum();
        assert!((out[0].am_score - expected).abs() < 1e-9);
    }

    #[test]
    fn blank_threshold_gates_expansion() {
        let inv = inventory(&["a"]);
        let lex = parse_lexicon("a\ta".as_bytes(), &inv).unwrap();
        let trie = build_trie(&lex);
        let blank = inv.blank_id();
        // One frame at 0.96 blank: only blank extensions, so the sole
        // transcript is empty even though "a" has 0.96-adjacent mass.
        let m = peaked(&[(blank, 0.96)], inv.len());
        let mut o = opts();
        o.nbest = 2;
        o.beam = 2;
        let out = decode_ctc("u", &m, &inv, &lex, &trie, None, &o).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].transcript.is_empty());

        // At 0.94 the non-blank extension survives as a second transcript.
        let m = peaked(&[(blank, 0.94)], inv.len());
        let out = decode_ctc("u", &m, &inv, &lex, &trie, None, &o).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn decodes_a_simple_word() {
        let inv = inventory(&["c", "a", "t"]);
        let lex = parse_lexicon("cat\tc a t".as_bytes(), &inv).unwrap();
        let trie = build_trie(&lex);
        let c = inv.token_id("c").unwrap();
        let a = inv.token_id("a").unwrap();
        let t = inv.token_id("t").unwrap();
        let m = peaked(&[(c, 0.9), (a, 0.9), (t, 0.9)], inv.len());
        let out = decode_ctc("u", &m, &inv, &lex, &trie, None, &opts()).unwrap();
        assert_eq!(out[0].transcript, vec!["cat"]);
    }

    #[test]
    fn unnormalized_emissions_are_rejected() {
        let inv = inventory(&["a"]);
        let lex = parse_lexicon("a\ta".as_bytes(), &inv).unwrap();
        let trie = build_trie(&lex);
        let m = EmissionMatrix::new(1, 3, vec![-1.0, -1.0, -1.0], false).unwrap();
        assert!(matches!(
            decode_ctc("u", &m, &inv, &lex, &trie, None, &opts()),
            Err(DecodeError::NotNormalized)
        ));
    }

    #[test]
    fn lexicon_mode_with_weight_requires_word_lm() {
        let inv = inventory(&["a"]);
        let lex = parse_lexicon("a\ta".as_bytes(), &inv).unwrap();
        let trie = build_trie(&lex);
        let m = peaked(&[(inv.blank_id(), 0.9)], inv.len());
        let mut o = opts();
        o.mode = DecodeMode::LexiconCtc;
        o.lm_weight = 1.0;
        assert!(matches!(
            decode_ctc("u", &m, &inv, &lex, &trie, None, &o),
            Err(DecodeError::LmGranularity { .. })
        ));
    }
}
