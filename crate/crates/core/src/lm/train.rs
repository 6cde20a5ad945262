//! Count-based n-gram estimation with interpolated absolute discounting
//! (discount 0.75) and per-order count pruning applied to raw counts.

use std::collections::HashMap;

use super::{LmError, LmState, LmUnit, NGramEntry, NGramModel, TokenId, BOS, EOS, UNK};

const DISCOUNT: f64 = 0.75;

/// Train a backoff model on a tokenized corpus.
///
/// `prune_thresholds[k-1]` is the minimum surviving raw count for order
/// k: n-grams with count <= threshold are dropped before estimation
/// (0 disables pruning for that order). Pruning cascades so the ARPA
/// prefix invariant always holds.
pub fn train<S: AsRef<str>>(
    corpus: &[Vec<S>],
    max_order: usize,
    prune_thresholds: &[u64],
    unit: LmUnit,
) -> Result<NGramModel, LmError> {
    assert!(max_order >= 1, "max_order must be >= 1");
    if prune_thresholds.len() != max_order {
        return Err(LmError::BadThresholds {
            got: prune_thresholds.len(),
            want: max_order,
        });
    }
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(LmError::EmptyCorpus);
    }

    let mut model = NGramModel::new(max_order, unit);

    // Count n-grams over marker-padded sentences. Windows ending on the
    // initial begin marker are skipped: <s> is a context, not an event.
    let mut counts: Vec<HashMap<Box<[TokenId]>, u64>> = vec![HashMap::new(); max_order];
    for sentence in corpus {
        if sentence.is_empty() {
            continue;
        }
        let mut padded: Vec<TokenId> = Vec::with_capacity(sentence.len() + 2);
        padded.push(model.bos_id());
        for tok in sentence {
            padded.push(model.intern(tok.as_ref()));
        }
        padded.push(model.eos_id());
        for end in 1..padded.len() {
            for k in 1..=max_order.min(end + 1) {
                let gram = &padded[end + 1 - k..=end];
                *counts[k - 1].entry(gram.into()).or_insert(0) += 1;
            }
        }
    }

    // Prune raw counts, then cascade: a surviving k-gram must have all
    // tokens in the surviving vocabulary and its prefix surviving.
    for (k, map) in counts.iter_mut().enumerate() {
        let threshold = prune_thresholds[k];
        if threshold > 0 {
            map.retain(|_, &mut c| c > threshold);
        }
    }
    let surviving: Vec<bool> = {
        let unigrams = &counts[0];
        model
            .vocab
            .iter()
            .enumerate()
            .map(|(id, tok)| {
                tok == BOS
                    || tok == EOS
                    || tok == UNK
                    || unigrams.contains_key([id as TokenId].as_slice())
            })
            .collect()
    };
    for k in 2..=max_order {
        let (lower, rest) = counts.split_at_mut(k - 1);
        let prev = &lower[k - 2];
        rest[0].retain(|gram, _| {
            gram.iter().all(|&t| surviving[t as usize])
                && (k == 2 || prev.contains_key(&gram[..k - 1]))
        });
    }
    // Bigrams may reference pruned unigram words via the first check
    // above; unigram contexts like <s> have no unigram count but always
    // survive as vocabulary.

    // Rebuild the vocabulary without pruned words, remapping counts.
    let (model, counts) = compact(model, counts, &surviving);
    let mut model = model;
    let vocab_size = model.vocab_size() as f64;

    // Order 1: interpolate with the uniform distribution so every
    // vocabulary word (markers and <unk> included) gets an entry.
    let total: u64 = counts[0].values().sum();
    let distinct = counts[0].len() as f64;
    if total == 0 {
        return Err(LmError::EmptyCorpus);
    }
    let lambda1 = DISCOUNT * distinct / total as f64;
    for id in 0..model.vocab_size() as TokenId {
        let c = counts[0].get([id].as_slice()).copied().unwrap_or(0) as f64;
        let p = (c - DISCOUNT).max(0.0) / total as f64 + lambda1 / vocab_size;
        model.insert_entry(
            Box::new([id]),
            NGramEntry {
                log10_prob: p.log10(),
                log10_backoff: None,
            },
        );
    }

    // Higher orders: p(w|ctx) = max(c - D, 0)/c(ctx) + bo(ctx) * p(w|ctx'),
    // where the lower-order term is evaluated through the backoff
    // recursion over the already-built orders.
    for k in 2..=max_order {
        // Context totals and distinct-extension counts from surviving grams.
        let mut ctx_total: HashMap<&[TokenId], u64> = HashMap::new();
        let mut ctx_types: HashMap<&[TokenId], u64> = HashMap::new();
        for (gram, &c) in &counts[k - 1] {
            *ctx_total.entry(&gram[..k - 1]).or_insert(0) += c;
            *ctx_types.entry(&gram[..k - 1]).or_insert(0) += 1;
        }
        // Backoff weights attach to the order-(k-1) entries acting as
        // contexts; contexts without extensions keep weight 1 (omitted).
        let mut backoffs: Vec<(Box<[TokenId]>, f64)> = Vec::new();
        for (&ctx, &total) in &ctx_total {
            let lambda = DISCOUNT * ctx_types[ctx] as f64 / total as f64;
            backoffs.push((ctx.into(), lambda.log10()));
        }
        let mut new_entries: Vec<(Box<[TokenId]>, f64)> = Vec::new();
        for (gram, &c) in &counts[k - 1] {
            let ctx = &gram[..k - 1];
            let total = ctx_total[ctx] as f64;
            let lambda = DISCOUNT * ctx_types[ctx] as f64 / total;
            let lower = lower_order_prob(&model, &gram[1..]);
            let p = (c as f64 - DISCOUNT) / total + lambda * lower;
            new_entries.push((gram.clone(), p.log10()));
        }
        for (ctx, bo) in backoffs {
            let entry = model.entries[k - 2]
                .get_mut(&ctx)
                .expect("context entry must exist");
            entry.log10_backoff = Some(bo);
        }
        for (gram, lp) in new_entries {
            model.insert_entry(
                gram,
                NGramEntry {
                    log10_prob: lp,
                    log10_backoff: None,
                },
            );
        }
    }
    Ok(model)
}

/// Probability (linear domain) of the last token of `gram` given the
/// preceding tokens, via the backoff recursion over built orders.
fn lower_order_prob(model: &NGramModel, gram: &[TokenId]) -> f64 {
    let state = LmState {
        context: gram[..gram.len() - 1].to_vec(),
    };
    let (log10, _) = model.score_token(&state, gram[gram.len() - 1]);
    10f64.powf(log10)
}

/// Drop pruned words from the vocabulary and remap all surviving counts.
fn compact(
    model: NGramModel,
    counts: Vec<HashMap<Box<[TokenId]>, u64>>,
    surviving: &[bool],
) -> (NGramModel, Vec<HashMap<Box<[TokenId]>, u64>>) {
    if surviving.iter().all(|&s| s) {
        return (model, counts);
    }
    let mut compacted = NGramModel::new(model.max_order, model.unit);
    let remap: Vec<Option<TokenId>> = model
        .vocab
        .iter()
        .zip(surviving)
        .map(|(tok, &keep)| keep.then(|| compacted.intern(tok)))
        .collect();
    let counts = counts
        .into_iter()
        .map(|map| {
            map.into_iter()
                .filter_map(|(gram, c)| {
                    let mapped: Option<Box<[TokenId]>> = gram
                        .iter()
                        .map(|&t| remap[t as usize])
                        .collect::<Option<Vec<_>>>()
                        .map(Vec::into_boxed_slice);
                    mapped.map(|g| (g, c))
                })
                .collect()
        })
        .collect();
    (compacted, counts)
}
