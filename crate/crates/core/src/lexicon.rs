//! Word -> token-sequence lexicons and the prefix trie that constrains
//! lexicon-based decoding.

use std::collections::HashMap;
use std::io::BufRead;

use thiserror::Error;

pub type TokenId = u32;
pub type WordId = u32;

/// Conventional surface forms for the reserved tokens in inventory files.
pub const BLANK_TOKEN: &str = "<blank>";
pub const EOS_TOKEN: &str = "<eos>";

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: unknown token {token:?}")]
    UnknownToken { line: usize, token: String },
    #[error("line {line}: empty spelling for word {word:?}")]
    EmptySpelling { line: usize, word: String },
    #[error("line {line}: duplicate spelling for word {word:?}")]
    DuplicateSpelling { line: usize, word: String },
    #[error("line {line}: expected \"word<TAB>tok tok ...\"")]
    BadLine { line: usize },
    #[error("inventory has duplicate token {token:?}")]
    DuplicateToken { token: String },
    #[error("inventory is missing a {0:?} token")]
    MissingReserved(&'static str),
    #[error("reserved indices invalid: blank {blank}, eos {eos}, size {size}")]
    BadReserved { blank: usize, eos: usize, size: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered token strings with reserved blank (CTC) and end-of-sentence
/// (Seq2Seq) indices.
#[derive(Debug, Clone)]
pub struct TokenInventory {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    blank: TokenId,
    eos: TokenId,
}

impl TokenInventory {
    pub fn new(
        tokens: Vec<String>,
        blank: usize,
        eos: usize,
    ) -> Result<Self, LexiconError> {
        if blank >= tokens.len() || eos >= tokens.len() || blank == eos {
            return Err(LexiconError::BadReserved {
                blank,
                eos,
                size: tokens.len(),
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i as TokenId).is_some() {
                return Err(LexiconError::DuplicateToken { token: tok.clone() });
            }
        }
        Ok(TokenInventory {
            tokens,
            index,
            blank: blank as TokenId,
            eos: eos as TokenId,
        })
    }

    /// Read an inventory file: one token per line, line index = id. The
    /// reserved tokens are located by their `<blank>` / `<eos>` forms.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, LexiconError> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            tokens.push(line?.trim_end().to_string());
        }
        let blank = tokens
            .iter()
            .position(|t| t == BLANK_TOKEN)
            .ok_or(LexiconError::MissingReserved(BLANK_TOKEN))?;
        let eos = tokens
            .iter()
            .position(|t| t == EOS_TOKEN)
            .ok_or(LexiconError::MissingReserved(EOS_TOKEN))?;
        Self::new(tokens, blank, eos)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn blank_id(&self) -> TokenId {
        self.blank
    }

    pub fn eos_id(&self) -> TokenId {
        self.eos
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn token_id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }
}

/// Word spellings over an inventory. Words are unique; each may carry
/// several spellings.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    words: Vec<String>,
    word_index: HashMap<String, WordId>,
    /// Parallel to `words`.
    spellings: Vec<Vec<Vec<TokenId>>>,
}

impl Lexicon {
    pub fn word_count(&self) -> usize {
        self.words.len()
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id as usize]
    }

    pub fn word_id(&self, word: &str) -> Option<WordId> {
        self.word_index.get(word).copied()
    }

    pub fn spellings(&self, id: WordId) -> &[Vec<TokenId>] {
        &self.spellings[id as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (WordId, &str, &[Vec<TokenId>])> {
        self.words
            .iter()
            .enumerate()
            .map(|(i, w)| (i as WordId, w.as_str(), self.spellings[i].as_slice()))
    }

    pub fn add(
        &mut self,
        word: &str,
        spelling: Vec<TokenId>,
        line: usize,
    ) -> Result<(), LexiconError> {
        if spelling.is_empty() {
            return Err(LexiconError::EmptySpelling {
                line,
                word: word.to_string(),
            });
        }
        let id = match self.word_index.get(word) {
            Some(&id) => id,
            None => {
                let id = self.words.len() as WordId;
                self.words.push(word.to_string());
                self.word_index.insert(word.to_string(), id);
                self.spellings.push(Vec::new());
                id
            }
        };
        if self.spellings[id as usize].contains(&spelling) {
            return Err(LexiconError::DuplicateSpelling {
                line,
                word: word.to_string(),
            });
        }
        self.spellings[id as usize].push(spelling);
        Ok(())
    }

    /// Serialize as the same "word<TAB>tok tok" lines accepted by
    /// [`parse_lexicon`].
    pub fn serialize(&self, inventory: &TokenInventory) -> String {
        let mut out = String::new();
        for (_, word, spellings) in self.iter() {
            for spelling in spellings {
                let toks: Vec<&str> =
                    spelling.iter().map(|&t| inventory.token(t)).collect();
                out.push_str(word);
                out.push('\t');
                out.push_str(&toks.join(" "));
                out.push('\n');
            }
        }
        out
    }
}

/// Parse "word<TAB>tok tok tok" lines against an inventory.
pub fn parse_lexicon<R: BufRead>(
    source: R,
    inventory: &TokenInventory,
) -> Result<Lexicon, LexiconError> {
    let mut lexicon = Lexicon::default();
    for (no, line) in source.lines().enumerate() {
        let line = line?;
        let no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (word, toks) = line
            .split_once('\t')
            .ok_or(LexiconError::BadLine { line: no })?;
        let mut spelling = Vec::new();
        for tok in toks.split_whitespace() {
            let id = inventory
                .token_id(tok)
                .ok_or_else(|| LexiconError::UnknownToken {
                    line: no,
                    token: tok.to_string(),
                })?;
            spelling.push(id);
        }
        lexicon.add(word, spelling, no)?;
    }
    Ok(lexicon)
}

#[derive(Debug, Clone, Default)]
pub struct TrieNode {
    children: HashMap<TokenId, u32>,
    /// Words completed exactly at this node (homophones share it).
    words: Vec<WordId>,
}

/// Deterministic prefix trie over token ids; node 0 is the root.
#[derive(Debug, Clone)]
pub struct LexiconTrie {
    nodes: Vec<TrieNode>,
}

pub const TRIE_ROOT: u32 = 0;

impl LexiconTrie {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn child(&self, node: u32, token: TokenId) -> Option<u32> {
        self.nodes[node as usize].children.get(&token).copied()
    }

    pub fn children(&self, node: u32) -> &HashMap<TokenId, u32> {
        &self.nodes[node as usize].children
    }

    pub fn words_at(&self, node: u32) -> &[WordId] {
        &self.nodes[node as usize].words
    }

    pub fn has_children(&self, node: u32) -> bool {
        !self.nodes[node as usize].children.is_empty()
    }

    /// Walk a spelling from the root; None if the path leaves the trie.
    pub fn descend(&self, spelling: &[TokenId]) -> Option<u32> {
        let mut node = TRIE_ROOT;
        for &tok in spelling {
            node = self.child(node, tok)?;
        }
        Some(node)
    }

    /// All (token path, word) annotations, for set comparison in tests.
    pub fn annotations(&self) -> Vec<(Vec<TokenId>, WordId)> {
        let mut out = Vec::new();
        let mut stack: Vec<(u32, Vec<TokenId>)> = vec![(TRIE_ROOT, Vec::new())];
        while let Some((node, path)) = stack.pop() {
            for &w in self.words_at(node) {
                out.push((path.clone(), w));
            }
            for (&tok, &child) in self.children(node) {
                let mut p = path.clone();
                p.push(tok);
                stack.push((child, p));
            }
        }
        out.sort();
        out
    }
}

/// Build the prefix trie for a lexicon.
pub fn build_trie(lexicon: &Lexicon) -> LexiconTrie {
    let mut nodes = vec![TrieNode::default()];
    for (word_id, _, spellings) in lexicon.iter() {
        for spelling in spellings {
            let mut node = TRIE_ROOT;
            for &tok in spelling {
                let next = match nodes[node as usize].children.get(&tok) {
                    Some(&n) => n,
                    None => {
                        let n = nodes.len() as u32;
                        nodes.push(TrieNode::default());
                        nodes[node as usize].children.insert(tok, n);
                        n
                    }
                };
                node = next;
            }
            nodes[node as usize].words.push(word_id);
        }
    }
    for node in &mut nodes {
        node.words.sort_unstable();
    }
    LexiconTrie { nodes }
}
