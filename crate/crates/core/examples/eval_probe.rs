//! Evaluation utilities: WER breakdowns, seeded shuffles, and the
//! perplexity probe that detects whether a model uses word order.

use beamkit::evalkit::{corpus_wer, perplexity_probe, shuffle_transcript, wer};
use beamkit::lm::{train, LmUnit};

fn w(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn main() {
    let b = wer(&w("the cat sat on the mat"), &w("the cat sat mat on a mat"));
    println!(
        "WER {:.3} (S={} D={} I={} N={})",
        b.wer, b.substitutions, b.deletions, b.insertions, b.reference_len
    );

    let pairs = vec![
        (w("hello world"), w("hello world")),
        (w("good morning"), w("good mourning")),
    ];
    println!("corpus WER {:.3}", corpus_wer(&pairs).wer);

    let line = w("order carries information");
    println!("shuffled(seed 1): {:?}", shuffle_transcript(&line, 1));
    println!("shuffled(seed 2): {:?}", shuffle_transcript(&line, 2));

    // The probe: a trigram is hurt by shuffling, a unigram cannot be.
    let corpus: Vec<Vec<String>> = (0..20)
        .map(|_| w("the quick brown fox jumps over the lazy dog"))
        .collect();
    let trigram = train(&corpus, 3, &[0, 0, 0], LmUnit::Word).unwrap();
    let unigram = train(&corpus, 1, &[0], LmUnit::Word).unwrap();
    let (orig, shuf) = perplexity_probe(&trigram, &corpus, 7).unwrap();
    println!("trigram: original ppl {orig:.2}, shuffled ppl {shuf:.2}");
    let (orig, shuf) = perplexity_probe(&unigram, &corpus, 7).unwrap();
    println!("unigram: original ppl {orig:.2}, shuffled ppl {shuf:.2}");
}
