//! Self-training loop in miniature: synthesize emissions for unlabeled
//! audio, decode them into pseudo-labels, train an LM on the labels, and
//! chunk long recordings for the next pass.

use beamkit::decoder::{DecodeMode, DecodeOptions};
use beamkit::emissions::{synth_emissions, write_emissions};
use beamkit::lexicon::{TokenId, BLANK_TOKEN, EOS_TOKEN};
use beamkit::lm::{train, LmUnit};
use beamkit::pipeline::{chunk_intervals, pseudo_label, ManifestRow, DEFAULT_MAX_CHUNK_S};
use beamkit::{build_trie, Lexicon, TokenInventory};

fn main() {
    let inventory = TokenInventory::new(
        [BLANK_TOKEN, EOS_TOKEN, "a", "b", "c"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        0,
        1,
    )
    .unwrap();
    let mut lexicon = Lexicon::default();
    for (word, tok) in [("alpha", "a"), ("bravo", "b"), ("charlie", "c")] {
        lexicon
            .add(word, vec![inventory.token_id(tok).unwrap()], 1)
            .unwrap();
    }
    let trie = build_trie(&lexicon);

    // "Unlabeled audio": emission files on disk, listed in a manifest.
    let dir = tempfile::tempdir().unwrap();
    let sentences = [
        vec!["alpha", "bravo", "charlie"],
        vec!["charlie", "charlie", "alpha"],
        vec!["bravo", "alpha"],
    ];
    let mut rows = Vec::new();
    for (i, words) in sentences.iter().enumerate() {
        let tokens: Vec<TokenId> = words
            .iter()
            .map(|w| lexicon.spellings(lexicon.word_id(w).unwrap())[0][0])
            .collect();
        let emissions = synth_emissions(&tokens, &inventory, 0.2, 4, i as u64);
        let name = format!("utt{i}.emat");
        let mut f = std::fs::File::create(dir.path().join(&name)).unwrap();
        write_emissions(&emissions, &mut f).unwrap();
        rows.push(ManifestRow {
            utt_id: format!("utt{i}"),
            path: name.into(),
            reference: None,
            duration_s: None,
            source: None,
        });
    }

    let opts = DecodeOptions {
        mode: DecodeMode::ZerolmCtc,
        beam: 32,
        token_beam: inventory.len(),
        nbest: 1,
        ..DecodeOptions::default()
    };
    let out = pseudo_label(&rows, dir.path(), &inventory, &lexicon, &trie, None, &opts, 2)
        .unwrap();
    for (utt, words) in &out.labels {
        println!("{utt}: {}", words.join(" "));
    }
    for (utt, err) in &out.failures {
        eprintln!("{utt} failed: {err}");
    }

    // The labels become LM training data for the next pass.
    let corpus: Vec<Vec<String>> = out.labels.iter().map(|(_, w)| w.clone()).collect();
    let lm = train(&corpus, 2, &[0, 0], LmUnit::Word).unwrap();
    println!("pseudo-label LM vocabulary: {:?}", lm.vocab());

    // Chunk a long recording's speech intervals for decoding.
    let intervals = [(0.0, 20.0), (22.0, 41.0), (45.0, 50.0), (51.0, 90.0)];
    for chunk in chunk_intervals(&intervals, DEFAULT_MAX_CHUNK_S).unwrap() {
        println!("chunk {:.1}s..{:.1}s", chunk.start, chunk.end);
    }
}
