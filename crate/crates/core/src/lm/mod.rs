//! Backoff n-gram language models: ARPA I/O, incremental scoring,
//! perplexity, and count-based training with interpolated absolute
//! discounting.

mod arpa;
mod train;

pub use arpa::{load_arpa, save_arpa};
pub use train::train;

use std::collections::HashMap;

use thiserror::Error;

/// Sentence-begin marker.
pub const BOS: &str = "<s>";
/// Sentence-end marker.
pub const EOS: &str = "</s>";
/// Unknown-word marker.
pub const UNK: &str = "<unk>";

/// Default log10 probability for an unknown token when the model has no
/// `<unk>` unigram.
pub const DEFAULT_UNK_FLOOR: f64 = -10.0;

pub type TokenId = u32;

#[derive(Debug, Error)]
pub enum LmError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("order-{order} section declared {declared} entries but contains {found}")]
    CountMismatch {
        order: usize,
        declared: usize,
        found: usize,
    },
    #[error("n-gram of order {order} exceeds declared maximum {max_order}")]
    OrderTooHigh { order: usize, max_order: usize },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("corpus has no scorable (in-vocabulary) events")]
    NoScorableEvents,
    #[error("prune threshold list has length {got}, expected max_order {want}")]
    BadThresholds { got: usize, want: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Token granularity the model was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmUnit {
    Word,
    WordPiece,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NGramEntry {
    pub log10_prob: f64,
    /// Present only for orders below the maximum, and only when the
    /// n-gram acts as a context with a non-unit backoff weight.
    pub log10_backoff: Option<f64>,
}

/// Incremental scoring state: the (truncated) history fed to the model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LmState {
    context: Vec<TokenId>,
}

impl LmState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn context(&self) -> &[TokenId] {
        &self.context
    }
}

/// Immutable backoff n-gram model. Probabilities and backoff weights are
/// stored in log10 (the ARPA convention).
#[derive(Debug, Clone)]
pub struct NGramModel {
    max_order: usize,
    unit: LmUnit,
    vocab: Vec<String>,
    index: HashMap<String, TokenId>,
    /// One map per order, entries[k - 1] holds the order-k grams.
    entries: Vec<HashMap<Box<[TokenId]>, NGramEntry>>,
    unk_floor: f64,
}

impl NGramModel {
    pub(crate) fn new(max_order: usize, unit: LmUnit) -> Self {
        let mut model = NGramModel {
            max_order,
            unit,
            vocab: Vec::new(),
            index: HashMap::new(),
            entries: vec![HashMap::new(); max_order],
            unk_floor: DEFAULT_UNK_FLOOR,
        };
        // Markers are always resolvable, entries or not.
        for tok in [BOS, EOS, UNK] {
            model.intern(tok);
        }
        model
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn unit(&self) -> LmUnit {
        self.unit
    }

    pub fn set_unit(&mut self, unit: LmUnit) {
        self.unit = unit;
    }

    pub fn set_unk_floor(&mut self, log10_floor: f64) {
        self.unk_floor = log10_floor;
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.vocab[id as usize]
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn bos_id(&self) -> TokenId {
        self.index[BOS]
    }

    pub fn eos_id(&self) -> TokenId {
        self.index[EOS]
    }

    pub fn unk_id(&self) -> TokenId {
        self.index[UNK]
    }

    /// Map a surface token to its id, falling back to the unknown marker.
    /// The flag is true when the token was out of vocabulary.
    pub fn resolve(&self, token: &str) -> (TokenId, bool) {
        match self.index.get(token) {
            Some(&id) => (id, false),
            None => (self.unk_id(), true),
        }
    }

    pub fn entry(&self, ngram: &[TokenId]) -> Option<&NGramEntry> {
        self.entries.get(ngram.len() - 1)?.get(ngram)
    }

    pub fn entry_count(&self, order: usize) -> usize {
        self.entries[order - 1].len()
    }

    pub fn total_entries(&self) -> usize {
        self.entries.iter().map(|m| m.len()).sum()
    }

    pub(crate) fn intern(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.vocab.len() as TokenId;
        self.vocab.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub(crate) fn insert_entry(&mut self, ngram: Box<[TokenId]>, entry: NGramEntry) {
        let order = ngram.len();
        self.entries[order - 1].insert(ngram, entry);
    }

    /// Sorted view of one order's entries, for serialization and tests.
    pub fn entries_of_order(&self, order: usize) -> Vec<(&[TokenId], &NGramEntry)> {
        let mut out: Vec<_> = self.entries[order - 1]
            .iter()
            .map(|(k, v)| (k.as_ref(), v))
            .collect();
        out.sort_by(|a, b| a.0.cmp(b.0));
        out
    }

    /// Score one token given a state, via the standard backoff recursion:
    /// the longest stored (context, token) entry wins; otherwise the
    /// context's backoff weight is paid and the context shortened.
    pub fn score_token(&self, state: &LmState, token: TokenId) -> (f64, LmState) {
        let mut ctx: &[TokenId] = &state.context;
        if ctx.len() > self.max_order - 1 {
            ctx = &ctx[ctx.len() - (self.max_order - 1)..];
        }
        let mut backoff_sum = 0.0;
        let score = loop {
            let mut key: Vec<TokenId> = Vec::with_capacity(ctx.len() + 1);
            key.extend_from_slice(ctx);
            key.push(token);
            if let Some(e) = self.entry(&key) {
                break backoff_sum + e.log10_prob;
            }
            if ctx.is_empty() {
                // No unigram for this token: unknown-floor fallback.
                break backoff_sum + self.unk_floor;
            }
            if let Some(e) = self.entry(ctx) {
                backoff_sum += e.log10_backoff.unwrap_or(0.0);
            }
            ctx = &ctx[1..];
        };
        let mut next = Vec::with_capacity(self.max_order - 1);
        let keep = (self.max_order - 1).saturating_sub(1);
        let full = &state.context;
        let start = full.len().saturating_sub(keep);
        next.extend_from_slice(&full[start..]);
        if self.max_order > 1 {
            next.push(token);
        }
        (score, LmState { context: next })
    }

    /// State seeded with the sentence-begin marker.
    pub fn begin_state(&self) -> LmState {
        if self.max_order == 1 {
            return LmState::empty();
        }
        LmState {
            context: vec![self.bos_id()],
        }
    }

    /// Total log10 score of a token sequence plus the count of
    /// out-of-vocabulary tokens. With `add_sentence_markers`, the context
    /// is seeded with the begin marker and the end marker is scored last.
    pub fn score_sentence(&self, tokens: &[&str], add_sentence_markers: bool) -> (f64, usize) {
        let mut state = if add_sentence_markers {
            self.begin_state()
        } else {
            LmState::empty()
        };
        let mut total = 0.0;
        let mut oov = 0;
        for tok in tokens {
            let (id, is_oov) = self.resolve(tok);
            if is_oov {
                oov += 1;
            }
            let (s, next) = self.score_token(&state, id);
            total += s;
            state = next;
        }
        if add_sentence_markers {
            let (s, _) = self.score_token(&state, self.eos_id());
            total += s;
        }
        (total, oov)
    }

    /// Corpus perplexity, 10^(-avg log10 per event). Unknown-word events
    /// are excluded from both the total and the event count; sentence-end
    /// events are included when markers are on.
    pub fn perplexity<S: AsRef<str>>(
        &self,
        corpus: &[Vec<S>],
        add_sentence_markers: bool,
    ) -> Result<f64, LmError> {
        // Event scores are summed in sorted order so the result depends
        // only on the multiset of events, not on corpus order: reordering
        // an order-blind model's input then provably cannot change the
        // reported perplexity, not even in the last bit.
        let mut scores: Vec<f64> = Vec::new();
        for sentence in corpus {
            let mut state = if add_sentence_markers {
                self.begin_state()
            } else {
                LmState::empty()
            };
            for tok in sentence {
                let (id, is_oov) = self.resolve(tok.as_ref());
                let (s, next) = self.score_token(&state, id);
                if !is_oov {
                    scores.push(s);
                }
                state = next;
            }
            if add_sentence_markers {
                let (s, _) = self.score_token(&state, self.eos_id());
                scores.push(s);
            }
        }
        if scores.is_empty() {
            return Err(LmError::NoScorableEvents);
        }
        scores.sort_by(|a, b| a.partial_cmp(b).expect("finite log-probs"));
        let total: f64 = scores.iter().sum();
        Ok(10f64.powf(-total / scores.len() as f64))
    }
}
