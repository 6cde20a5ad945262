//! Reorder an N-best list with a second-pass LM and a length bonus.

use beamkit::lm::{train, LmUnit};
use beamkit::rescore::{attach_scores, rescore, RescoreWeights, ScoreSource};
use beamkit::NBestEntry;

fn entry(words: &str, am: f64) -> NBestEntry {
    let transcript: Vec<String> = words.split_whitespace().map(str::to_string).collect();
    NBestEntry::new("utt1", transcript, am, 0.0, am)
}

fn main() {
    // First-pass output: the acoustically best hypothesis is ungrammatical.
    let nbest = vec![
        entry("the cat sat sat", -10.2),
        entry("the cat sat", -10.5),
        entry("a cat sat", -11.0),
    ];

    let corpus: Vec<Vec<String>> = [
        "the cat sat",
        "the dog sat",
        "a dog sat",
    ]
    .iter()
    .map(|s| s.split_whitespace().map(str::to_string).collect())
    .collect();
    let lm = train(&corpus, 3, &[0, 0, 0], LmUnit::Word).unwrap();

    let scored = attach_scores(
        &nbest,
        &ScoreSource::NGram(&lm),
        &ScoreSource::Constant(0.0),
    )
    .unwrap();

    let weights = RescoreWeights {
        alpha1: 0.8,
        alpha2: 0.0,
        beta: 0.1,
    };
    println!("{:>8}  {:>8}  transcript", "am", "rescored");
    for e in rescore(&scored, &weights) {
        println!("{:8.3}  {:8.3}  {}", e.am_score, e.combined, e.transcript.join(" "));
    }
}
