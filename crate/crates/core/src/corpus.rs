//! Corpus-overlap filtering between an LM training corpus and held-out
//! book lists: title normalization, exact dedup, and fuzzy matching over
//! word-level Levenshtein distance.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{BufRead, Write};

use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate book id {0:?}")]
    DuplicateId(String),
    #[error("verdict references unknown pair ({0:?}, {1:?})")]
    UnknownPair(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct TitleRecord {
    pub id: String,
    pub raw: String,
    pub normalized: Vec<String>,
}

impl TitleRecord {
    pub fn new(id: &str, raw: &str) -> Self {
        TitleRecord {
            id: id.to_string(),
            raw: raw.to_string(),
            normalized: normalize_title(raw),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FuzzyMatchParams {
    /// Length-ratio bound: |len(a) - len(b)| < len_ratio * min(len).
    pub len_ratio: f64,
    /// Distance-ratio bound: distance <= dist_ratio * max(len).
    pub dist_ratio: f64,
}

impl Default for FuzzyMatchParams {
    fn default() -> Self {
        FuzzyMatchParams {
            len_ratio: 0.75,
            dist_ratio: 0.3,
        }
    }
}

/// Lowercase, split on whitespace, strip non-alphanumeric characters
/// from each token, drop tokens that end up empty. Unicode-aware, with
/// NFC applied first so composed and decomposed input compare equal.
pub fn normalize_title(raw: &str) -> Vec<String> {
    raw.nfc()
        .collect::<String>()
        .split_whitespace()
        .filter_map(|tok| {
            let word: String = tok
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            if word.is_empty() {
                None
            } else {
                Some(word)
            }
        })
        .collect()
}

/// Minimum edit distance over words with unit insert/delete/substitute
/// costs, using the rolling single-row DP.
pub fn word_levenshtein<S: AsRef<str>, T: AsRef<str>>(a: &[S], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, wa) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, wb) in b.iter().enumerate() {
            let sub = diag + usize::from(wa.as_ref() != wb.as_ref());
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// A fuzzy title match between one record on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyPair {
    pub left_id: String,
    pub right_id: String,
    pub distance: usize,
    /// distance / max(len); the sort key for review priority.
    pub dist_ratio: f64,
}

/// Cross pairs with nonzero distance passing both bounds:
/// max−min < len_ratio·min (strict) and distance ≤ dist_ratio·max
/// (non-strict). Sorted by ascending distance ratio, ties by id pair.
pub fn fuzzy_candidates(
    left: &[TitleRecord],
    right: &[TitleRecord],
    p: &FuzzyMatchParams,
) -> Vec<FuzzyPair> {
    let mut out = Vec::new();
    for a in left {
        for b in right {
            let (la, lb) = (a.normalized.len(), b.normalized.len());
            let (min, max) = (la.min(lb), la.max(lb));
            if max == 0 || ((max - min) as f64) >= p.len_ratio * min as f64 {
                continue;
            }
            let d = word_levenshtein(&a.normalized, &b.normalized);
            if d == 0 || d as f64 > p.dist_ratio * max as f64 {
                continue;
            }
            out.push(FuzzyPair {
                left_id: a.id.clone(),
                right_id: b.id.clone(),
                distance: d,
                dist_ratio: d as f64 / max as f64,
            });
        }
    }
    out.sort_by(|x, y| {
        x.dist_ratio
            .partial_cmp(&y.dist_ratio)
            .expect("ratios are finite")
            .then_with(|| (&x.left_id, &x.right_id).cmp(&(&y.left_id, &y.right_id)))
    });
    out
}

/// A reviewed fuzzy pair: remove the corpus book or keep it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Remove,
    Keep,
}

#[derive(Debug)]
pub struct FilterOutcome {
    pub kept: Vec<String>,
    pub removed: Vec<String>,
    /// Fuzzy pairs with no verdict, awaiting manual review.
    pub pending: Vec<FuzzyPair>,
}

/// Remove held-out books from a corpus in three stages: shared ids,
/// zero-distance normalized titles, then fuzzy candidates — but a fuzzy
/// candidate only removes its book when a verdict file says so; without
/// one it is reported as pending. Output id lists are sorted.
pub fn filter_corpus(
    corpus: &[TitleRecord],
    held_out: &[TitleRecord],
    p: &FuzzyMatchParams,
    verdicts: &HashMap<(String, String), Verdict>,
) -> Result<FilterOutcome, CorpusError> {
    let mut seen = HashSet::new();
    for r in corpus {
        if !seen.insert(&r.id) {
            return Err(CorpusError::DuplicateId(r.id.clone()));
        }
    }
    let held_ids: HashSet<&str> = held_out.iter().map(|r| r.id.as_str()).collect();
    let held_titles: HashSet<&[String]> = held_out
        .iter()
        .filter(|r| !r.normalized.is_empty())
        .map(|r| r.normalized.as_slice())
        .collect();

    let mut removed: BTreeSet<String> = BTreeSet::new();
    for r in corpus {
        if held_ids.contains(r.id.as_str())
            || (!r.normalized.is_empty() && held_titles.contains(r.normalized.as_slice()))
        {
            removed.insert(r.id.clone());
        }
    }

    let survivors: Vec<TitleRecord> = corpus
        .iter()
        .filter(|r| !removed.contains(&r.id))
        .cloned()
        .collect();
    let candidates = fuzzy_candidates(&survivors, held_out, p);
    let candidate_keys: HashSet<(String, String)> = candidates
        .iter()
        .map(|c| (c.left_id.clone(), c.right_id.clone()))
        .collect();
    for key in verdicts.keys() {
        if !candidate_keys.contains(key) {
            return Err(CorpusError::UnknownPair(key.0.clone(), key.1.clone()));
        }
    }
    let mut pending = Vec::new();
    for c in candidates {
        match verdicts.get(&(c.left_id.clone(), c.right_id.clone())) {
            Some(Verdict::Remove) => {
                removed.insert(c.left_id.clone());
            }
            Some(Verdict::Keep) => {}
            None => pending.push(c),
        }
    }
    // A pair whose book was removed under another verdict is moot.
    pending.retain(|c| !removed.contains(&c.left_id));

    let kept: Vec<String> = corpus
        .iter()
        .map(|r| r.id.clone())
        .filter(|id| !removed.contains(id))
        .collect();
    let mut kept = kept;
    kept.sort();
    Ok(FilterOutcome {
        kept,
        removed: removed.into_iter().collect(),
        pending,
    })
}

/// Parse a title list: TSV of id, raw title.
pub fn load_titles<R: BufRead>(source: R) -> Result<Vec<TitleRecord>, CorpusError> {
    let mut out = Vec::new();
    for (no, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, raw) = line.split_once('\t').ok_or_else(|| CorpusError::Parse {
            line: no + 1,
            msg: "expected: id<TAB>title".into(),
        })?;
        out.push(TitleRecord::new(id, raw));
    }
    Ok(out)
}

/// Parse a verdict file: TSV of left_id, right_id, remove|keep.
pub fn load_verdicts<R: BufRead>(
    source: R,
) -> Result<HashMap<(String, String), Verdict>, CorpusError> {
    let mut out = HashMap::new();
    for (no, line) in source.lines().enumerate() {
        let line = line?;
        let no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(CorpusError::Parse {
                line: no,
                msg: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let verdict = match fields[2] {
            "remove" => Verdict::Remove,
            "keep" => Verdict::Keep,
            other => {
                return Err(CorpusError::Parse {
                    line: no,
                    msg: format!("bad verdict {other:?} (want remove|keep)"),
                })
            }
        };
        out.insert((fields[0].to_string(), fields[1].to_string()), verdict);
    }
    Ok(out)
}

/// Write pending pairs as TSV: left_id, right_id, distance, dist_ratio.
pub fn dump_pending<W: Write>(sink: &mut W, pending: &[FuzzyPair]) -> std::io::Result<()> {
    for p in pending {
        writeln!(
            sink,
            "{}\t{}\t{}\t{:.4}",
            p.left_id, p.right_id, p.distance, p.dist_ratio
        )?;
    }
    Ok(())
}
