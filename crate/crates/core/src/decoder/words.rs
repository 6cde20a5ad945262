//! Persistent word-history list shared across hypotheses. Push is O(1)
//! and the cached hash makes merge-key hashing independent of history
//! length.

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::lexicon::WordId;

#[derive(Debug)]
struct Node {
    word: WordId,
    parent: WordsList,
    len: u32,
    hash: u64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct WordsList(Option<Arc<Node>>);

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

impl WordsList {
    pub fn empty() -> Self {
        WordsList(None)
    }

    pub fn push(&self, word: WordId) -> Self {
        let (len, hash) = match &self.0 {
            Some(n) => (n.len, n.hash),
            None => (0, 0xcbf2_9ce4_8422_2325),
        };
        WordsList(Some(Arc::new(Node {
            word,
            parent: self.clone(),
            len: len + 1,
            hash: (hash ^ u64::from(word)).wrapping_mul(FNV_PRIME),
        })))
    }

    pub fn len(&self) -> usize {
        self.0.as_ref().map_or(0, |n| n.len as usize)
    }

    fn cached_hash(&self) -> u64 {
        self.0.as_ref().map_or(0, |n| n.hash)
    }

    /// Words in emission order.
    pub fn to_vec(&self) -> Vec<WordId> {
        let mut out = Vec::with_capacity(self.len());
        let mut cur = &self.0;
        while let Some(n) = cur {
            out.push(n.word);
            cur = &n.parent.0;
        }
        out.reverse();
        out
    }
}

impl PartialEq for WordsList {
    fn eq(&self, other: &Self) -> bool {
        let (mut a, mut b) = (&self.0, &other.0);
        loop {
            match (a, b) {
                (None, None) => return true,
                (Some(x), Some(y)) => {
                    if Arc::ptr_eq(x, y) {
                        return true;
                    }
                    if x.len != y.len || x.hash != y.hash || x.word != y.word {
                        return false;
                    }
                    a = &x.parent.0;
                    b = &y.parent.0;
                }
                _ => return false,
            }
        }
    }
}

impl Eq for WordsList {}

impl Hash for WordsList {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.cached_hash());
    }
}

impl PartialOrd for WordsList {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for WordsList {
    /// A fixed total order for deterministic tie-breaking; not the
    /// lexicographic transcript order (that applies only to final output).
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.cached_hash().cmp(&other.cached_hash()))
            .then_with(|| self.to_vec().cmp(&other.to_vec()))
    }
}
