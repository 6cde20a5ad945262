//! Lexicon-free Seq2Seq beam search over a scripted scorer, showing how
//! the EOS penalty trades transcript length against confidence.

use beamkit::decoder::{DecodeMode, DecodeOptions};
use beamkit::emissions::ReplayScorer;
use beamkit::lexicon::{BLANK_TOKEN, EOS_TOKEN};
use beamkit::{decode_s2s, TokenInventory};

fn row(vocab: usize, pairs: &[(usize, f64)]) -> Vec<f64> {
    let covered: f64 = pairs.iter().map(|(_, p)| p).sum();
    let rest = ((1.0 - covered) / (vocab - pairs.len()) as f64).ln();
    let mut out = vec![rest; vocab];
    for &(i, p) in pairs {
        out[i] = p.ln();
    }
    out
}

fn main() {
    let inventory = TokenInventory::new(
        [BLANK_TOKEN, EOS_TOKEN, "_the", "_cat", "_cats", "s"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        0,
        1,
    )
    .unwrap();
    let v = inventory.len();
    let t = |s: &str| inventory.token_id(s).unwrap();
    let (the, cat, s, eos) = (t("_the"), t("_cat"), t("s"), inventory.eos_id());

    // An autoregressive model that likes stopping early at "the cat".
    let mut scorer = ReplayScorer::new(v);
    scorer.insert(vec![], row(v, &[(the as usize, 0.9)])).unwrap();
    scorer
        .insert(vec![the], row(v, &[(cat as usize, 0.8)]))
        .unwrap();
    scorer
        .insert(
            vec![the, cat],
            row(v, &[(eos as usize, 0.55), (s as usize, 0.4)]),
        )
        .unwrap();
    scorer
        .insert(vec![the, cat, s], row(v, &[(eos as usize, 0.9)]))
        .unwrap();

    for gamma in [0.0, -1.0] {
        let opts = DecodeOptions {
            mode: DecodeMode::ZerolmS2s,
            beam: 16,
            token_beam: v,
            nbest: 3,
            max_output_len: 8,
            eos_penalty: gamma,
            ..DecodeOptions::default()
        };
        let out = decode_s2s("ex", &scorer, &inventory, None, &opts).unwrap();
        println!("gamma = {gamma}:");
        for e in &out.entries {
            println!("  {:8.3}  \"{}\"", e.combined, e.transcript.join(" "));
        }
    }
}
