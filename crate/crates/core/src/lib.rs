//! beamkit: beam-search decoding and self-training tools for speech
//! recognition at desk scale.
//!
//! The crate covers the text-side half of an ASR pipeline: backoff
//! n-gram language models (training, ARPA I/O, perplexity), lexicons
//! compiled into prefix tries, acoustic emissions as portable matrices,
//! lexicon-constrained CTC and lexicon-free sequence-to-sequence beam
//! search with shallow LM fusion, N-best rescoring, hyperparameter
//! sweeps, corpus-overlap filtering, WER/shuffle evaluation utilities,
//! and pseudo-label generation over file manifests. Acoustic models
//! themselves are out of scope — their outputs enter through emission
//! files and score columns.
//!
//! See the `examples/` directory for a runnable tour of each piece, or
//! the `beamkit` binary for the command-line surface.

pub mod corpus;
pub mod decoder;
pub mod emissions;
pub mod evalkit;
pub mod lexicon;
pub mod lm;
pub mod pipeline;
pub mod rescore;
pub mod tune;

pub use decoder::{decode_ctc, decode_s2s, DecodeMode, DecodeOptions, NBestEntry};
pub use emissions::{EmissionMatrix, ReplayScorer, SeqScorer};
pub use lexicon::{build_trie, parse_lexicon, Lexicon, LexiconTrie, TokenInventory};
pub use lm::NGramModel;
