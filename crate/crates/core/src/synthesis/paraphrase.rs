//! Deterministic rule-based paraphraser: synonym substitution, sentence-order
//! rotation and filler-phrase insertion/deletion, composed per variant.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;

use super::{ParaphraseProvider, ProviderError};
use crate::rng::{self, StreamRng};
use crate::tokenizer::tokenize;

/// Interchangeable words. Lookup is by lowercase form.
const SYNONYMS: &[&[&str]] = &[
    &["liked", "enjoyed", "appreciated"],
    &["like", "enjoy", "appreciate"],
    &["lecture", "class", "lesson", "session"],
    &["lectures", "classes", "lessons", "sessions"],
    &["students", "learners", "classmates"],
    &["student", "learner"],
    &["good", "great", "nice", "solid"],
    &["excellent", "outstanding", "superb"],
    &["bad", "poor", "weak"],
    &["easy", "simple", "straightforward"],
    &["hard", "difficult", "tough", "challenging"],
    &["confusing", "unclear", "puzzling"],
    &["interesting", "engaging", "fascinating"],
    &["example", "illustration", "instance"],
    &["examples", "illustrations", "instances"],
    &["problem", "issue", "difficulty"],
    &["problems", "issues", "difficulties"],
    &["topic", "subject", "theme"],
    &["topics", "subjects", "themes"],
    &["concept", "idea", "notion"],
    &["concepts", "ideas", "notions"],
    &["understand", "grasp", "follow"],
    &["understood", "grasped", "followed"],
    &["helpful", "useful", "beneficial"],
    &["many", "several", "numerous"],
    &["most", "the majority of"],
    &["also", "additionally", "too"],
    &["very", "really", "quite"],
    &["important", "key", "essential"],
    &["found", "considered", "thought"],
    &["said", "mentioned", "noted", "stated"],
    &["wanted", "asked for", "requested"],
    &["more", "additional", "extra"],
    &["explanation", "description", "account"],
    &["product", "item"],
    &["price", "cost"],
    &["cheap", "inexpensive", "affordable"],
    &["expensive", "pricey", "costly"],
    &["food", "meal", "dishes"],
    &["staff", "employees", "team"],
    &["friendly", "welcoming", "kind"],
    &["fast", "quick", "speedy"],
    &["slow", "sluggish"],
    &["quality", "standard"],
    &["recommend", "suggest", "endorse"],
    &["reviewers", "customers", "buyers"],
    &["overall", "in general", "on the whole"],
];

/// Phrases inserted at, or removed from, the start of a sentence.
const FILLERS: &[&str] = &["overall,", "in general,", "basically,", "honestly,", "to be fair,", "generally,"];

fn synonyms_of(word: &str) -> Option<Vec<&'static str>> {
    SYNONYMS
        .iter()
        .find(|g| g.contains(&word))
        .map(|g| g.iter().copied().filter(|w| *w != word).collect())
}

/// A whitespace word split into leading punctuation, core and trailing punctuation.
#[derive(Debug, Clone, PartialEq)]
struct Word {
    lead: String,
    core: String,
    trail: String,
}

impl Word {
    fn parse(raw: &str) -> Self {
        let start = raw.find(|c: char| !c.is_ascii_punctuation()).unwrap_or(raw.len());
        let end = raw[start..]
            .rfind(|c: char| !c.is_ascii_punctuation())
            .map_or(start, |i| start + i + raw[start + i..].chars().next().map_or(0, char::len_utf8));
        Self { lead: raw[..start].into(), core: raw[start..end].into(), trail: raw[end..].into() }
    }

    fn render(&self) -> String {
        format!("{}{}{}", self.lead, self.core, self.trail)
    }

    fn ends_sentence(&self) -> bool {
        self.trail.contains(['.', '!', '?'])
    }

    fn is_capitalized(&self) -> bool {
        self.core.chars().next().is_some_and(char::is_uppercase)
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn decapitalize(s: &str) -> String {
    // leave "I" and acronyms alone
    let rest_lower = s.chars().skip(1).all(|c| !c.is_uppercase());
    if s == "I" || s.chars().count() < 2 || !rest_lower {
        return s.to_string();
    }
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

fn sentences(words: Vec<Word>) -> Vec<Vec<Word>> {
    let mut out: Vec<Vec<Word>> = Vec::new();
    let mut cur = Vec::new();
    for w in words {
        let end = w.ends_sentence();
        cur.push(w);
        if end {
            out.push(core::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Number of leading words of `sentence` that form a filler phrase.
fn leading_filler(sentence: &[Word]) -> Option<usize> {
    FILLERS.iter().find_map(|f| {
        let parts: Vec<&str> = f.split(' ').collect();
        let matches = parts.len() < sentence.len()
            && parts.iter().zip(sentence).all(|(p, w)| w.render().to_lowercase() == *p);
        matches.then_some(parts.len())
    })
}

fn variant(text: &str, rng: &mut StreamRng) -> String {
    let mut words: Vec<Word> = text.split_whitespace().map(Word::parse).collect();

    for w in &mut words {
        let lower = w.core.to_lowercase();
        if let Some(alts) = synonyms_of(&lower) {
            if rng.random_bool(0.5) {
                let pick = *alts.choose(rng).expect("synonym groups have at least two entries");
                w.core = if w.is_capitalized() { capitalize(pick) } else { pick.to_string() };
            }
        }
    }

    let mut sents = sentences(words);
    if sents.len() >= 2 && rng.random_bool(0.5) {
        let r = rng.random_range(1..sents.len());
        sents.rotate_left(r);
    }

    if !sents.is_empty() && rng.random_bool(0.5) {
        let target = rng.random_range(0..sents.len());
        let sentence = &mut sents[target];
        if let Some(n) = leading_filler(sentence) {
            let was_cap = sentence[0].is_capitalized();
            sentence.drain(..n);
            if was_cap {
                sentence[0].core = capitalize(&sentence[0].core);
            }
        } else {
            let filler = *FILLERS.choose(rng).expect("non-empty filler list");
            let cap = sentence[0].is_capitalized();
            let first = &mut sentence[0];
            if first.lead.is_empty() {
                first.core = decapitalize(&first.core);
            }
            let phrase = if cap { capitalize(filler) } else { filler.to_string() };
            let inserted: Vec<Word> = phrase.split(' ').map(Word::parse).collect();
            sentence.splice(0..0, inserted);
        }
    }

    let mut out = String::new();
    for w in sents.iter().flatten() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&w.render());
    }
    out
}

/// `n` pairwise-distinct paraphrase variants of `text`, each differing from
/// it in at least one token. Falls back to suffix-marked copies when the text
/// offers too few transformable sites.
pub fn rule_paraphrase(text: &str, n: usize, seed: u64) -> Vec<String> {
    let original = tokenize(text);
    let mut seen: BTreeSet<Vec<String>> = BTreeSet::new();
    seen.insert(original.clone());
    let mut out = Vec::with_capacity(n);
    let max_attempts = 64 * n as u64;
    let mut attempt = 0;
    while out.len() < n && attempt < max_attempts {
        let v = variant(text, &mut rng::stream(seed, "paraphrase", attempt));
        attempt += 1;
        if v.trim().is_empty() {
            continue;
        }
        if seen.insert(tokenize(&v)) {
            out.push(v);
        }
    }
    let mut marker = 1;
    while out.len() < n {
        let v = format!("{} [v{marker}]", text.trim());
        marker += 1;
        if seen.insert(tokenize(&v)) {
            out.push(v);
        }
    }
    out
}

/// The built-in [`ParaphraseProvider`]. Each request draws from a stream
/// keyed by its id, so results are independent of request order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleParaphraser {
    seed: u64,
}

impl RuleParaphraser {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl ParaphraseProvider for RuleParaphraser {
    fn paraphrase(&self, id: &str, text: &str, n: usize) -> Result<Vec<String>, ProviderError> {
        Ok(rule_paraphrase(text, n, rng::derive_seed(self.seed, id, 0)))
    }
}
