//! Train a small backoff bigram, print its ARPA form, and score text.

use beamkit::lm::{save_arpa, train, LmUnit};

fn main() {
    let corpus: Vec<Vec<String>> = [
        "the cat sat on the mat",
        "the dog sat on the rug",
        "the cat saw the dog",
        "a dog and a cat",
    ]
    .iter()
    .map(|s| s.split_whitespace().map(str::to_string).collect())
    .collect();

    let model = train(&corpus, 2, &[0, 0], LmUnit::Word).unwrap();

    let mut arpa = Vec::new();
    save_arpa(&model, &mut arpa).unwrap();
    println!("{}", String::from_utf8(arpa).unwrap());

    for text in ["the cat sat", "dog the the saw"] {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let (log10, oov) = model.score_sentence(&tokens, true);
        println!("score(\"{text}\") = {log10:.4} log10 ({oov} OOV)");
    }

    let ppl = model.perplexity(&corpus, true).unwrap();
    println!("training-set perplexity: {ppl:.3}");
}
