//! Shared fixtures for the integration suite: random decode instances and
//! exhaustive-enumeration oracles that recompute beam-search results from
//! first principles (path enumeration, not the decoder's own recursion).
#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use beamkit::decoder::{DecodeMode, DecodeOptions, MergeRule};
use beamkit::emissions::ReplayScorer;
use beamkit::lexicon::{TokenId, WordId, BLANK_TOKEN, EOS_TOKEN};
use beamkit::lm::{train, LmUnit};
use beamkit::{build_trie, EmissionMatrix, Lexicon, LexiconTrie, NGramModel, TokenInventory};

pub const LN_10: f64 = std::f64::consts::LN_10;

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// A random natural-log-normalized row of `vocab` scores.
pub fn random_log_row(rng: &mut ChaCha8Rng, vocab: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..vocab).map(|_| rng.gen::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| (w / total).ln()).collect()
}

pub fn random_emissions(rng: &mut ChaCha8Rng, frames: usize, vocab: usize) -> EmissionMatrix {
    let mut values = Vec::with_capacity(frames * vocab);
    for _ in 0..frames {
        values.extend(random_log_row(rng, vocab).into_iter().map(|v| v as f32));
    }
    EmissionMatrix::new(frames, vocab, values, true).expect("rows are normalized")
}

// ---------------------------------------------------------------------------
// CTC instances and oracle
// ---------------------------------------------------------------------------

pub struct CtcCase {
    pub inventory: TokenInventory,
    pub lexicon: Lexicon,
    pub trie: LexiconTrie,
    pub emissions: EmissionMatrix,
    pub lm: Option<NGramModel>,
    pub opts: DecodeOptions,
}

/// Small randomized lexicon-CTC decode problem. Vocabulary is
/// {blank, eos, a, b} (V=4); T <= 6 frames; at most 5 lexicon words with
/// spellings of length 1..=3, so homophones and shared prefixes occur
/// naturally. Half the cases fuse a trained word bigram.
pub fn random_ctc_case(seed: u64) -> CtcCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inventory = TokenInventory::new(
        vec![
            BLANK_TOKEN.to_string(),
            EOS_TOKEN.to_string(),
            "a".to_string(),
            "b".to_string(),
        ],
        0,
        1,
    )
    .unwrap();
    let letters: Vec<TokenId> = vec![
        inventory.token_id("a").unwrap(),
        inventory.token_id("b").unwrap(),
    ];

    let mut lexicon = Lexicon::default();
    let n_words = rng.gen_range(1..=5);
    for i in 0..n_words {
        let len = rng.gen_range(1..=3);
        let spelling: Vec<TokenId> = (0..len)
            .map(|_| letters[rng.gen_range(0..letters.len())])
            .collect();
        lexicon.add(&format!("w{i}"), spelling, i + 1).unwrap();
    }
    let trie = build_trie(&lexicon);

    let frames = rng.gen_range(1..=6);
    let emissions = random_emissions(&mut rng, frames, inventory.len());

    let with_lm = rng.gen_bool(0.5);
    let lm = if with_lm {
        let words: Vec<String> = lexicon.iter().map(|(_, w, _)| w.to_string()).collect();
        let corpus: Vec<Vec<String>> = (0..8)
            .map(|_| {
                (0..rng.gen_range(1..=4))
                    .map(|_| words[rng.gen_range(0..words.len())].clone())
                    .collect()
            })
            .collect();
        Some(train(&corpus, 2, &[0, 0], LmUnit::Word).unwrap())
    } else {
        None
    };

    let opts = DecodeOptions {
        mode: if with_lm {
            DecodeMode::LexiconCtc
        } else {
            DecodeMode::ZerolmCtc
        },
        beam: 100_000,
        token_beam: inventory.len(),
        beam_threshold: f64::INFINITY,
        blank_threshold: if rng.gen_bool(0.5) { 1.0 } else { 0.6 },
        lm_weight: if with_lm { rng.gen_range(0.1..1.5) } else { 0.0 },
        word_insertion: rng.gen_range(-0.5..0.5),
        eos_penalty: 0.0,
        lm_eos: rng.gen_bool(0.5),
        nbest: rng.gen_range(1..=3),
        max_output_len: 0,
        merge_rule: MergeRule::LogAdd,
    };

    CtcCase {
        inventory,
        lexicon,
        trie,
        emissions,
        lm,
        opts,
    }
}

/// Collapse a frame path to its label sequence: drop repeats, then blanks.
fn collapse(path: &[TokenId], blank: TokenId) -> Vec<TokenId> {
    let mut labels = Vec::new();
    let mut prev: Option<TokenId> = None;
    for &tok in path {
        if tok != blank && prev != Some(tok) {
            labels.push(tok);
        }
        prev = Some(tok);
    }
    labels
}

/// True when `rem` is a strict proper prefix of at least one spelling, or
/// empty: exactly the label suffixes a lexicon-constrained search may hold
/// as an unfinished word.
fn pending_valid(rem: &[TokenId], spellings: &[(WordId, Vec<TokenId>)]) -> bool {
    rem.is_empty()
        || spellings
            .iter()
            .any(|(_, sp)| sp.len() > rem.len() && sp[..rem.len()] == *rem)
}

/// All ways to read `labels` as completed words followed by a valid
/// pending suffix.
fn decompositions(
    labels: &[TokenId],
    spellings: &[(WordId, Vec<TokenId>)],
) -> Vec<(Vec<WordId>, Vec<TokenId>)> {
    let mut out = Vec::new();
    let mut stack: Vec<(usize, Vec<WordId>)> = vec![(0, Vec::new())];
    while let Some((at, words)) = stack.pop() {
        let rem = &labels[at..];
        if pending_valid(rem, spellings) {
            out.push((words.clone(), rem.to_vec()));
        }
        for (word, sp) in spellings {
            if rem.len() >= sp.len() && rem[..sp.len()] == **sp {
                let mut next = words.clone();
                next.push(*word);
                stack.push((at + sp.len(), next));
            }
        }
    }
    out
}

/// Exhaustive reference for lexicon-CTC decoding with pruning disabled
/// (log-add merging): enumerate every frame path and every word
/// decomposition of its collapsed labels, accumulate probability mass per
/// (words, pending, last-frame-token) state, then finalize exactly like
/// the decoder: drop pending, apply the LM end marker, keep the best
/// hypothesis per transcript. Returns (transcript, am, combined) in the
/// decoder's output order.
pub fn ctc_oracle(case: &CtcCase) -> Vec<(Vec<String>, f64, f64)> {
    let blank = case.inventory.blank_id();
    let vocab = case.inventory.len();
    let frames = case.emissions.frames();
    let spellings: Vec<(WordId, Vec<TokenId>)> = case
        .lexicon
        .iter()
        .flat_map(|(id, _, sps)| sps.iter().map(move |sp| (id, sp.clone())))
        .collect();

    let blank_only: Vec<bool> = (0..frames)
        .map(|t| (case.emissions.row(t)[blank as usize] as f64).exp() > case.opts.blank_threshold)
        .collect();

    type State = (Vec<WordId>, Vec<TokenId>, Option<TokenId>);
    let mut mass: HashMap<State, f64> = HashMap::new();

    // Mixed-radix walk over all paths, honouring blank-forced frames.
    let mut path = vec![0 as TokenId; frames];
    loop {
        let ok = path
            .iter()
            .enumerate()
            .all(|(t, &tok)| !blank_only[t] || tok == blank);
        if ok {
            let score: f64 = path
                .iter()
                .enumerate()
                .map(|(t, &tok)| case.emissions.row(t)[tok as usize] as f64)
                .sum();
            let labels = collapse(&path, blank);
            let last = match path.last() {
                Some(&tok) if tok != blank => Some(tok),
                _ => None,
            };
            for (words, pending) in decompositions(&labels, &spellings) {
                let entry = mass
                    .entry((words, pending, last))
                    .or_insert(f64::NEG_INFINITY);
                *entry = log_add_exp(*entry, score);
            }
        }
        // Advance.
        let mut t = 0;
        if frames == 0 {
            // A zero-frame decode has exactly one (empty) path.
            if mass.is_empty() {
                mass.insert((Vec::new(), Vec::new(), None), 0.0);
            }
            break;
        }
        loop {
            path[t] += 1;
            if (path[t] as usize) < vocab {
                break;
            }
            path[t] = 0;
            t += 1;
            if t == frames {
                break;
            }
        }
        if t == frames {
            break;
        }
    }

    // Best acoustic mass per transcript; the LM and insertion terms depend
    // only on the word sequence.
    let mut best_am: HashMap<Vec<WordId>, f64> = HashMap::new();
    for ((words, _pending, _last), am) in mass {
        let slot = best_am.entry(words).or_insert(f64::NEG_INFINITY);
        if am > *slot {
            *slot = am;
        }
    }

    let use_lm = case.opts.mode == DecodeMode::LexiconCtc && case.opts.lm_weight != 0.0;
    let alpha = case.opts.lm_weight * LN_10;
    let beta = case.opts.word_insertion;
    let mut finals: Vec<(Vec<String>, f64, f64)> = best_am
        .into_iter()
        .map(|(words, am)| {
            let lm_raw = match (&case.lm, use_lm) {
                (Some(m), true) => {
                    let mut state = m.begin_state();
                    let mut total = 0.0;
                    for &w in &words {
                        let (lp, next) = m.score_token(&state, m.resolve(case.lexicon.word(w)).0);
                        total += lp;
                        state = next;
                    }
                    if case.opts.lm_eos {
                        total += m.score_token(&state, m.eos_id()).0;
                    }
                    total
                }
                _ => 0.0,
            };
            let combined = am + alpha * lm_raw + beta * words.len() as f64;
            let transcript: Vec<String> = words
                .iter()
                .map(|&w| case.lexicon.word(w).to_string())
                .collect();
            (transcript, am, combined)
        })
        .collect();
    finals.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("finite scores")
            .then_with(|| a.0.cmp(&b.0))
    });
    finals.truncate(case.opts.nbest);
    finals
}

// ---------------------------------------------------------------------------
// Seq2Seq instances and oracle
// ---------------------------------------------------------------------------

pub struct S2sCase {
    pub inventory: TokenInventory,
    pub scorer: ReplayScorer,
    pub lm: Option<NGramModel>,
    pub opts: DecodeOptions,
}

/// Small randomized lexicon-free decode problem: four tokens (three
/// non-EOS continuations per step), output depth at most 4. Most prefixes
/// carry a scripted random row; the rest exercise the uniform fallback.
pub fn random_s2s_case(seed: u64) -> S2sCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inventory = TokenInventory::new(
        vec![
            BLANK_TOKEN.to_string(),
            EOS_TOKEN.to_string(),
            "_a".to_string(),
            "_b".to_string(),
        ],
        0,
        1,
    )
    .unwrap();
    let vocab = inventory.len();
    let eos = inventory.eos_id();
    let non_eos: Vec<TokenId> = (0..vocab as TokenId).filter(|&t| t != eos).collect();

    let max_output_len: usize = rng.gen_range(2..=5);
    let mut scorer = ReplayScorer::new(vocab);
    let mut prefixes: Vec<Vec<TokenId>> = vec![Vec::new()];
    let mut frontier = vec![Vec::<TokenId>::new()];
    for _ in 0..max_output_len.saturating_sub(2) {
        let mut next = Vec::new();
        for p in &frontier {
            for &tok in &non_eos {
                let mut q = p.clone();
                q.push(tok);
                prefixes.push(q.clone());
                next.push(q);
            }
        }
        frontier = next;
    }
    for p in prefixes {
        if rng.gen_bool(0.8) {
            scorer.insert(p, random_log_row(&mut rng, vocab)).unwrap();
        }
    }

    let with_lm = rng.gen_bool(0.5);
    let lm = if with_lm {
        let pieces = ["_a", "_b", BLANK_TOKEN];
        let corpus: Vec<Vec<String>> = (0..8)
            .map(|_| {
                (0..rng.gen_range(1..=4))
                    .map(|_| pieces[rng.gen_range(0..pieces.len())].to_string())
                    .collect()
            })
            .collect();
        Some(train(&corpus, 2, &[0, 0], LmUnit::WordPiece).unwrap())
    } else {
        None
    };

    let opts = DecodeOptions {
        mode: if with_lm {
            DecodeMode::LexfreeS2s
        } else {
            DecodeMode::ZerolmS2s
        },
        beam: 10_000,
        token_beam: vocab,
        beam_threshold: f64::INFINITY,
        blank_threshold: 0.95,
        lm_weight: if with_lm { rng.gen_range(0.1..1.5) } else { 0.0 },
        word_insertion: 0.0,
        eos_penalty: -rng.gen_range(0.0..2.0),
        lm_eos: rng.gen_bool(0.5),
        nbest: rng.gen_range(1..=3),
        max_output_len,
        merge_rule: MergeRule::LogAdd,
    };

    S2sCase {
        inventory,
        scorer,
        lm,
        opts,
    }
}

/// Independent piece-to-word joining: `_`-prefixed pieces open a word,
/// others append to the current one; empty words are dropped.
fn join_pieces(tokens: &[TokenId], inventory: &TokenInventory) -> Vec<String> {
    let mut words: Vec<String> = Vec::new();
    for &tok in tokens {
        let s = inventory.token(tok);
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

/// Exhaustive reference for Seq2Seq decoding with pruning disabled:
/// score every non-EOS token sequence of length <= max_output_len - 1
/// terminated by EOS, then rank like the decoder (best combined first,
/// ties to the smaller transcript, best entry per distinct transcript).
pub fn s2s_oracle(case: &S2sCase) -> Vec<(Vec<String>, f64, f64)> {
    let vocab = case.inventory.len();
    let eos = case.inventory.eos_id();
    let non_eos: Vec<TokenId> = (0..vocab as TokenId).filter(|&t| t != eos).collect();
    let use_lm = case.opts.mode == DecodeMode::LexfreeS2s && case.opts.lm_weight != 0.0;
    let alpha = case.opts.lm_weight * LN_10;
    let gamma = case.opts.eos_penalty;

    let lm_map: Vec<beamkit::lm::TokenId> = match (&case.lm, use_lm) {
        (Some(m), true) => (0..vocab)
            .map(|i| m.resolve(case.inventory.token(i as TokenId)).0)
            .collect(),
        _ => Vec::new(),
    };

    let mut sequences: Vec<Vec<TokenId>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<TokenId>> = vec![Vec::new()];
    for _ in 0..case.opts.max_output_len.saturating_sub(1) {
        let mut next = Vec::new();
        for p in &frontier {
            for &tok in &non_eos {
                let mut q = p.clone();
                q.push(tok);
                sequences.push(q.clone());
                next.push(q);
            }
        }
        frontier = next;
    }

    let mut scored: Vec<(Vec<String>, f64, f64)> = Vec::new();
    for seq in sequences {
        let mut am = 0.0;
        for k in 0..seq.len() {
            am += beamkit::emissions::SeqScorer::score_prefix(&case.scorer, &seq[..k])
                [seq[k] as usize];
        }
        am += beamkit::emissions::SeqScorer::score_prefix(&case.scorer, &seq)[eos as usize];
        let lm_raw = match (&case.lm, use_lm) {
            (Some(m), true) => {
                let mut state = m.begin_state();
                let mut total = 0.0;
                for &tok in &seq {
                    let (lp, next) = m.score_token(&state, lm_map[tok as usize]);
                    total += lp;
                    state = next;
                }
                if case.opts.lm_eos {
                    total += m.score_token(&state, m.eos_id()).0;
                }
                total
            }
            _ => 0.0,
        };
        let combined = am + alpha * lm_raw + gamma;
        scored.push((join_pieces(&seq, &case.inventory), am, combined));
    }

    scored.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("finite scores")
            .then_with(|| a.0.cmp(&b.0))
    });
    // Best entry per distinct transcript.
    let mut seen: Vec<Vec<String>> = Vec::new();
    scored.retain(|(t, _, _)| {
        if seen.contains(t) {
            false
        } else {
            seen.push(t.clone());
            true
        }
    });
    scored.truncate(case.opts.nbest);
    scored
}

// ---------------------------------------------------------------------------
// Independent edit distance (full DP matrix, no rolling-row optimisation)
// ---------------------------------------------------------------------------

pub fn reference_levenshtein(a: &[&str], b: &[&str]) -> usize {
    let (n, m) = (a.len(), b.len());
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in 0..=n {
        dp[i][0] = i;
    }
    for j in 0..=m {
        dp[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = dp[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            dp[i][j] = sub.min(dp[i - 1][j] + 1).min(dp[i][j - 1] + 1);
        }
    }
    dp[n][m]
}
