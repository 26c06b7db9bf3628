//! Lowercasing whitespace/punctuation tokenizer and corpus vocabulary.
//!
//! Normalization: lowercase, split on whitespace, then peel leading and
//! trailing ASCII punctuation into one token per character. A whitespace
//! word of the form `<name>` is a special marker (`<mask>`, `<sep>`, ...) and
//! is kept whole.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::corpus::{Corpus, Sample};

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const BOS: u32 = 2;
pub const EOS: u32 = 3;
pub const MASK: u32 = 4;
/// Number of reserved ids; corpus tokens start here.
pub const RESERVED: usize = 5;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const BOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const MASK_TOKEN: &str = "<mask>";

const RESERVED_TOKENS: [&str; RESERVED] = [PAD_TOKEN, UNK_TOKEN, BOS_TOKEN, EOS_TOKEN, MASK_TOKEN];

/// A sequence of token ids.
pub type TokenSeq = Vec<u32>;

fn is_marker(word: &str) -> bool {
    word.len() > 2 && word.starts_with('<') && word.ends_with('>')
}

/// Splits `text` into normalized token strings.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        let word = word.to_lowercase();
        if is_marker(&word) {
            out.push(word);
            continue;
        }
        let start = word.find(|c: char| !c.is_ascii_punctuation()).unwrap_or(word.len());
        let end = word.rfind(|c: char| !c.is_ascii_punctuation()).map_or(start, |i| {
            i + word[i..].chars().next().map_or(0, char::len_utf8)
        });
        out.extend(word[..start].chars().map(|c| c.to_string()));
        if start < end {
            out.push(word[start..end].to_string());
        }
        out.extend(word[end.max(start)..].chars().map(|c| c.to_string()));
    }
    out
}

/// Token ↔ id mapping. Ids `0..5` are reserved (PAD, UNK, BOS, EOS, MASK).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    ids: BTreeMap<String, u32>,
    tokens: Vec<String>,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::from_tokens(core::iter::empty::<String>())
    }
}

impl Vocab {
    /// Builds a vocabulary from corpus tokens listed in id order (starting at
    /// id 5). Reserved spellings and duplicates are skipped.
    pub fn from_tokens<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let mut vocab = Self { ids: BTreeMap::new(), tokens: Vec::new() };
        for t in RESERVED_TOKENS {
            vocab.push(t.to_string());
        }
        for t in tokens {
            let t = t.into();
            if !vocab.ids.contains_key(&t) {
                vocab.push(t);
            }
        }
        vocab
    }

    fn push(&mut self, token: String) {
        self.ids.insert(token.clone(), self.tokens.len() as u32);
        self.tokens.push(token);
    }

    /// Vocabulary size `v`, reserved ids included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    /// Always false: the reserved ids are present.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Non-reserved tokens in id order.
    pub fn corpus_tokens(&self) -> &[String] {
        &self.tokens[RESERVED..]
    }

    /// Encodes text; unknown tokens become UNK.
    pub fn encode(&self, text: &str, add_bos_eos: bool) -> TokenSeq {
        let mut ids = Vec::new();
        if add_bos_eos {
            ids.push(BOS);
        }
        ids.extend(tokenize(text).iter().map(|t| self.id(t).filter(|&id| id != PAD).unwrap_or(UNK)));
        if add_bos_eos {
            ids.push(EOS);
        }
        ids
    }

    /// Whitespace-joins the tokens of `ids`, dropping PAD, BOS and EOS.
    pub fn decode(&self, ids: &[u32]) -> String {
        let mut out = String::new();
        for &id in ids {
            if matches!(id, PAD | BOS | EOS) {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(self.token(id).unwrap_or(UNK_TOKEN));
        }
        out
    }
}

/// Builds the vocabulary from train-split unit texts and summaries. Tokens
/// seen at least `min_freq` times are ordered by descending frequency, then
/// lexicographically.
pub fn build_vocab(corpus: &Corpus, min_freq: usize) -> Vocab {
    build_vocab_from(&corpus.train, min_freq)
}

/// [`build_vocab`] over an arbitrary sample list, e.g. train plus synthetic
/// samples derived from it.
pub fn build_vocab_from<'a>(samples: impl IntoIterator<Item = &'a Sample>, min_freq: usize) -> Vocab {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut add = |text: &str| {
        for t in tokenize(text) {
            *counts.entry(t).or_insert(0) += 1;
        }
    };
    for s in samples {
        for u in &s.document.units {
            add(u.text());
        }
        add(&s.summary);
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_freq.max(1) && !RESERVED_TOKENS.contains(&t.as_str()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocab::from_tokens(ranked.into_iter().map(|(t, _)| t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Sample};
    use alloc::vec;

    fn corpus_of(unit: &str, summary: &str) -> Corpus {
        let doc = Document::new("d", "g", [unit]).unwrap();
        Corpus::new(vec![Sample::new(doc, summary).unwrap()], vec![], vec![]).unwrap()
    }

    #[test]
    fn tokenize_peels_punctuation() {
        assert_eq!(tokenize("The cat."), ["the", "cat", "."]);
        assert_eq!(tokenize("(Hello), world!!"), ["(", "hello", ")", ",", "world", "!", "!"]);
        assert_eq!(tokenize("don't stop"), ["don't", "stop"]);
        assert_eq!(tokenize("..."), [".", ".", "."]);
        assert_eq!(tokenize("  "), Vec::<String>::new());
        assert_eq!(tokenize("<mask> <SEP>"), ["<mask>", "<sep>"]);
        assert_eq!(tokenize("Café!"), ["café", "!"]);
    }

    #[test]
    fn build_vocab_orders_by_frequency_then_lexicon() {
        let v = build_vocab(&corpus_of("a a", "b"), 1);
        assert_eq!(v.len(), 7);
        assert_eq!(v.id("a"), Some(5));
        assert_eq!(v.id("b"), Some(6));

        let v = build_vocab(&corpus_of("a", "a b"), 2);
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("b"), None);

        let v = build_vocab(&corpus_of("b", "a"), 1);
        assert_eq!(v.corpus_tokens(), ["a", "b"]);
    }

    #[test]
    fn identical_train_text_gives_identical_vocab() {
        assert_eq!(build_vocab(&corpus_of("x y", "z y"), 1), build_vocab(&corpus_of("x y", "z y"), 1));
    }

    #[test]
    fn only_train_split_contributes() {
        let mut c = corpus_of("a", "b");
        let held_out = Sample::new(Document::new("v", "g", ["zebra"]).unwrap(), "zebra").unwrap();
        c.val.push(held_out);
        assert_eq!(build_vocab(&c, 1).id("zebra"), None);
    }

    #[test]
    fn encode_handles_bos_eos_and_unknowns() {
        let v = Vocab::from_tokens(["the", "cat", "."]);
        assert_eq!(v.encode("The cat.", false), [5, 6, 7]);
        assert_eq!(v.encode("", true), [BOS, EOS]);
        assert_eq!(v.encode("the dog", false), [5, UNK]);
        assert_eq!(v.encode("<mask> <pad>", false), [MASK, UNK]);
    }

    #[test]
    fn decode_skips_control_tokens() {
        let v = Vocab::from_tokens(["the", "cat"]);
        assert_eq!(v.decode(&[BOS, 5, 6, EOS, PAD]), "the cat");
        assert_eq!(v.decode(&[5, 999]), "the <unk>");
    }

    proptest::proptest! {
        #[test]
        fn encode_decode_reproduces_token_stream(text in "[a-zA-Z.,!? ]{0,40}") {
            let vocab = Vocab::from_tokens(tokenize(&text));
            let ids = vocab.encode(&text, false);
            proptest::prop_assert!(ids.iter().all(|&i| (i as usize) < vocab.len() && i != PAD));
            let normalized = tokenize(&text).join(" ");
            proptest::prop_assert_eq!(vocab.decode(&ids), normalized);
        }
    }
}
