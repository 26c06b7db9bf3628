//! JSONL corpora and vocabulary files.
//!
//! One sample per line:
//!
//! ```text
//! {"id": "...", "group": "...", "units": ["...", ...], "summary": "...", "split": "train"}
//! ```
//!
//! `split` is optional. Synthetic samples additionally carry `origin` and
//! `parent`. A corpus path is either such a file or a directory holding
//! `train.jsonl`, `val.jsonl` and `test.jsonl` (missing files are empty).

use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sumaug_core::corpus::{split_corpus, SplitRatios, SplitWarning};
use sumaug_core::tokenizer::{Vocab, RESERVED};
use sumaug_core::{Corpus, CorpusError, Document, Origin, Sample, Split};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Json { path: PathBuf, line: usize, message: String },
    #[error("{path}:{line}: {source}")]
    Invalid { path: PathBuf, line: usize, source: CorpusError },
    #[error("{path}:{line}: sample is marked {found:?} but the file holds {expected:?}")]
    SplitMismatch { path: PathBuf, line: usize, expected: Split, found: Split },
    #[error("{path}: some lines name a split and others do not")]
    MixedSplits { path: PathBuf },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: CorpusError },
    #[error("{path}:{line}: bad vocabulary entry: {message}")]
    Vocab { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}

fn is_original(o: &Origin) -> bool {
    *o == Origin::Original
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    group: String,
    units: Vec<String>,
    summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
    #[serde(default = "original", skip_serializing_if = "is_original")]
    origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    parent: Option<String>,
}

fn original() -> Origin {
    Origin::Original
}

impl Record {
    fn from_sample(s: &Sample, split: Option<Split>) -> Self {
        Self {
            id: s.document.id.clone(),
            group: s.document.group.clone(),
            units: s.document.units.iter().map(|u| u.text().to_owned()).collect(),
            summary: s.summary.clone(),
            split,
            origin: s.origin,
            parent: s.parent.clone(),
        }
    }

    fn into_sample(self) -> Result<(Option<Split>, Sample), CorpusError> {
        let mut sample = Sample::new(Document::new(self.id, self.group, self.units)?, self.summary)?;
        sample.origin = self.origin;
        sample.parent = self.parent;
        Ok((self.split, sample))
    }
}

/// Every sample in one JSONL file with its optional split tag. Blank lines
/// are skipped; errors carry 1-based line numbers.
pub fn read_samples(path: &Path) -> Result<Vec<(Option<Split>, Sample)>, DataError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| DataError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let parsed = record
            .into_sample()
            .map_err(|source| DataError::Invalid { path: path.to_path_buf(), line: i + 1, source })?;
        out.push(parsed);
    }
    Ok(out)
}

/// A loaded corpus and how it was partitioned.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    /// `true` when split assignments came from the data itself.
    pub presplit: bool,
    pub warnings: Vec<SplitWarning>,
}

/// Loads a corpus file or directory.
///
/// If every line of a file names its split, those assignments are used.
/// If none does, the samples are split per group with `ratios` and `seed`.
pub fn load_corpus(path: &Path, ratios: SplitRatios, seed: u64) -> Result<LoadedCorpus, DataError> {
    if path.is_dir() {
        return load_dir(path);
    }
    let rows = read_samples(path)?;
    let tagged = rows.iter().filter(|(s, _)| s.is_some()).count();
    let corpus_err = |source| DataError::Corpus { path: path.to_path_buf(), source };
    if tagged == 0 {
        let samples = rows.into_iter().map(|(_, s)| s).collect();
        let split = split_corpus(samples, ratios, seed).map_err(corpus_err)?;
        return Ok(LoadedCorpus { corpus: split.corpus, presplit: false, warnings: split.warnings });
    }
    if tagged != rows.len() {
        return Err(DataError::MixedSplits { path: path.to_path_buf() });
    }
    let mut parts: [Vec<Sample>; 3] = Default::default();
    for (split, sample) in rows {
        let idx = Split::ALL.iter().position(|s| Some(*s) == split).expect("tagged");
        parts[idx].push(sample);
    }
    let [train, val, test] = parts;
    let corpus = Corpus::new(train, val, test).map_err(corpus_err)?;
    Ok(LoadedCorpus { corpus, presplit: true, warnings: Vec::new() })
}

fn load_dir(dir: &Path) -> Result<LoadedCorpus, DataError> {
    let mut parts: [Vec<Sample>; 3] = Default::default();
    for (slot, split) in parts.iter_mut().zip(Split::ALL) {
        let path = dir.join(format!("{}.jsonl", split.as_str()));
        if !path.exists() {
            continue;
        }
        for (line, (tag, sample)) in read_samples(&path)?.into_iter().enumerate() {
            if let Some(found) = tag.filter(|t| *t != split) {
                return Err(DataError::SplitMismatch { path, line: line + 1, expected: split, found });
            }
            slot.push(sample);
        }
    }
    let [train, val, test] = parts;
    let corpus = Corpus::new(train, val, test).map_err(|source| DataError::Corpus { path: dir.to_path_buf(), source })?;
    Ok(LoadedCorpus { corpus, presplit: true, warnings: Vec::new() })
}

fn create(path: &Path) -> Result<BufWriter<File>, DataError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn write_records<'a>(path: &Path, rows: impl Iterator<Item = (Option<Split>, &'a Sample)>) -> Result<(), DataError> {
    let mut w = create(path)?;
    for (split, sample) in rows {
        let line = serde_json::to_string(&Record::from_sample(sample, split)).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Writes samples as JSONL, tagging each with `split` when given.
pub fn write_samples(path: &Path, samples: &[Sample], split: Option<Split>) -> Result<(), DataError> {
    write_records(path, samples.iter().map(|s| (split, s)))
}

/// Writes a whole corpus to one file with split tags.
pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<(), DataError> {
    write_records(path, corpus.iter().map(|(split, s)| (Some(split), s)))
}

/// One corpus token per line, in id order starting at the first
/// non-reserved id.
pub fn write_vocab(path: &Path, vocab: &Vocab) -> Result<(), DataError> {
    let mut w = create(path)?;
    for t in vocab.corpus_tokens() {
        writeln!(w, "{t}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_vocab(path: &Path) -> Result<Vocab, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut tokens = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let bad = |message: &str| DataError::Vocab { path: path.to_path_buf(), line: i + 1, message: message.into() };
        if line.is_empty() || line.chars().any(char::is_whitespace) {
            return Err(bad("tokens must be non-empty and contain no whitespace"));
        }
        tokens.push(line.to_owned());
    }
    let vocab = Vocab::from_tokens(tokens.iter().cloned());
    if vocab.len() != tokens.len() + RESERVED {
        return Err(DataError::Vocab {
            path: path.to_path_buf(),
            line: 0,
            message: "duplicate or reserved tokens".into(),
        });
    }
    Ok(vocab)
}
