//! Lexicon-constrained CTC beam search over synthetic emissions, with
//! and without shallow LM fusion.

use beamkit::decoder::{DecodeMode, DecodeOptions};
use beamkit::emissions::synth_emissions;
use beamkit::lexicon::{TokenId, BLANK_TOKEN, EOS_TOKEN};
use beamkit::lm::{train, LmUnit};
use beamkit::{build_trie, decode_ctc, Lexicon, TokenInventory};

fn main() {
    let inventory = TokenInventory::new(
        [BLANK_TOKEN, EOS_TOKEN, "h", "e", "l", "o", "w", "r", "d"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        0,
        1,
    )
    .unwrap();
    let tok = |s: &str| inventory.token_id(s).unwrap();

    let mut lexicon = Lexicon::default();
    lexicon
        .add("hello", vec![tok("h"), tok("e"), tok("l"), tok("l"), tok("o")], 1)
        .unwrap();
    lexicon
        .add("world", vec![tok("w"), tok("o"), tok("r"), tok("l"), tok("d")], 2)
        .unwrap();
    lexicon.add("hell", vec![tok("h"), tok("e"), tok("l"), tok("l")], 3).unwrap();
    let trie = build_trie(&lexicon);

    // Word bigram over the same vocabulary for fusion.
    let corpus: Vec<Vec<String>> = vec![
        vec!["hello".into(), "world".into()],
        vec!["hello".into(), "world".into()],
        vec!["hell".into()],
    ];
    let lm = train(&corpus, 2, &[0, 0], LmUnit::Word).unwrap();

    // Noisy emissions for "hello world".
    let spelling: Vec<TokenId> = "helloworld".chars().map(|c| tok(&c.to_string())).collect();
    let emissions = synth_emissions(&spelling, &inventory, 0.35, 3, 42);

    let mut opts = DecodeOptions {
        mode: DecodeMode::ZerolmCtc,
        beam: 64,
        token_beam: inventory.len(),
        nbest: 4,
        ..DecodeOptions::default()
    };
    println!("without LM:");
    for e in decode_ctc("ex", &emissions, &inventory, &lexicon, &trie, None, &opts).unwrap() {
        println!("  {:8.3}  {}", e.combined, e.transcript.join(" "));
    }

    opts.mode = DecodeMode::LexiconCtc;
    opts.lm_weight = 1.0;
    opts.word_insertion = 0.5;
    println!("with LM (weight 1.0):");
    for e in decode_ctc("ex", &emissions, &inventory, &lexicon, &trie, Some(&lm), &opts).unwrap() {
        println!("  {:8.3}  {}", e.combined, e.transcript.join(" "));
    }
}
