//! Remove held-out books from a training corpus: id matches, exact
//! normalized titles, then fuzzy near-duplicates held for review.

use std::collections::HashMap;

use beamkit::corpus::{filter_corpus, FuzzyMatchParams, TitleRecord, Verdict};

fn main() {
    let corpus = vec![
        TitleRecord::new("c1", "The Posthumous Papers of the Pickwick Club"),
        TitleRecord::new("c2", "A Tale of Two Cities"),
        TitleRecord::new("c3", "THE POSTHUMOUS PAPERS OF THE PICKWICK CLUB!"),
        TitleRecord::new("c4", "The Posthumous Paper of the Pickwick Club"),
        TitleRecord::new("c5", "Moby Dick; or, The Whale"),
    ];
    let held_out = vec![
        TitleRecord::new("c2", "A Tale of Two Cities"),
        TitleRecord::new("h1", "the posthumous papers of the pickwick club"),
    ];

    let no_verdicts = HashMap::new();
    let out = filter_corpus(&corpus, &held_out, &FuzzyMatchParams::default(), &no_verdicts)
        .unwrap();
    println!("kept:    {:?}", out.kept);
    println!("removed: {:?}", out.removed);
    for p in &out.pending {
        println!(
            "pending: {} ~ {} (distance {}, ratio {:.2})",
            p.left_id, p.right_id, p.distance, p.dist_ratio
        );
    }

    // A reviewer resolves the near-duplicate; the filter applies it.
    let mut verdicts = HashMap::new();
    verdicts.insert(("c4".to_string(), "h1".to_string()), Verdict::Remove);
    let out = filter_corpus(&corpus, &held_out, &FuzzyMatchParams::default(), &verdicts).unwrap();
    println!("after verdict, kept: {:?}", out.kept);
}
