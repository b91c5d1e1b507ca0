//! Corpus ingestion: TSV parsing, tokenization, vocabulary and label tables,
//! phrase-level training instances, and pretrained-embedding files.
//!
//! File formats:
//! - corpus TSV: `label<TAB>text`, UTF-8, LF lines, blank lines skipped
//! - embedding file: `token v1 v2 ... vd` per line, space-separated decimals
//! - vocabulary dump: `id<TAB>token<TAB>count` per line

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dcnn_core::training::Example;

use crate::error::{usage, CliError, Result};

/// Reserved id for padding (never produced by encoding).
pub const PAD: usize = 0;
/// Reserved id that out-of-vocabulary tokens map to.
pub const UNK: usize = 1;

const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

// Emoticons in the distant-supervision sense: they carried the label, so
// they must not stay in the text. Matched after lowercasing.
const EMOTICONS: &[&str] = &[
    ":)", ":-)", ":d", ":-d", ":p", ":-p", "=)", "=d", ";)", ";-)", ":(", ":-(", "=(",
    ":'(", ":'-(",
];

/// Text normalization mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizeMode {
    Plain,
    Tweet,
}

/// Tweet-mode normalization rules, each individually toggleable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TweetRules {
    /// Replace @mentions with `<user>`.
    pub mark_user: bool,
    /// Replace URLs with `<url>`.
    pub mark_url: bool,
    /// Squeeze runs of more than three identical letters down to three.
    pub squeeze_repeats: bool,
    /// Drop emoticon tokens (they carried the distant labels).
    pub strip_emoticons: bool,
}

impl Default for TweetRules {
    fn default() -> TweetRules {
        TweetRules {
            mark_user: true,
            mark_url: true,
            squeeze_repeats: true,
            strip_emoticons: true,
        }
    }
}

/// Lowercasing word splitter with optional tweet normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tokenizer {
    pub mode: TokenizeMode,
    pub rules: TweetRules,
}

impl Tokenizer {
    pub fn plain() -> Tokenizer {
        Tokenizer {
            mode: TokenizeMode::Plain,
            rules: TweetRules::default(),
        }
    }

    pub fn tweet() -> Tokenizer {
        Tokenizer {
            mode: TokenizeMode::Tweet,
            rules: TweetRules::default(),
        }
    }

    /// Lowercases, separates punctuation into single-char tokens, splits on
    /// whitespace; tweet mode additionally maps mentions and URLs to
    /// placeholders, squeezes letter runs, and strips emoticons.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let lowered = text.to_lowercase();
        let tweet = self.mode == TokenizeMode::Tweet;
        let mut out = Vec::new();
        for word in lowered.split_whitespace() {
            if tweet {
                if self.rules.strip_emoticons && EMOTICONS.contains(&word) {
                    continue;
                }
                if self.rules.mark_url
                    && (word.starts_with("http://")
                        || word.starts_with("https://")
                        || word.starts_with("www."))
                {
                    out.push("<url>".to_string());
                    continue;
                }
                if self.rules.mark_user && is_mention(word) {
                    out.push("<user>".to_string());
                    continue;
                }
            }
            // Placeholder tokens survive re-tokenization unchanged.
            if word == "<user>" || word == "<url>" || word == PAD_TOKEN || word == UNK_TOKEN {
                out.push(word.to_string());
                continue;
            }
            self.split_word(word, tweet, &mut out);
        }
        out
    }

    // Maximal alphanumeric runs stay together; every other character is its
    // own token.
    fn split_word(&self, word: &str, tweet: bool, out: &mut Vec<String>) {
        let mut run = String::new();
        let mut flush = |run: &mut String, out: &mut Vec<String>| {
            if !run.is_empty() {
                let token = if tweet && self.rules.squeeze_repeats {
                    squeeze_letters(run)
                } else {
                    run.clone()
                };
                out.push(token);
                run.clear();
            }
        };
        for ch in word.chars() {
            if ch.is_alphanumeric() {
                run.push(ch);
            } else {
                flush(&mut run, out);
                out.push(ch.to_string());
            }
        }
        flush(&mut run, out);
    }
}

fn is_mention(word: &str) -> bool {
    let mut chars = word.chars();
    chars.next() == Some('@')
        && !word[1..].is_empty()
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

// "cooool" -> "coool": runs of more than three identical letters collapse to
// three. Digits are left alone ("2000" stays "2000").
fn squeeze_letters(token: &str) -> String {
    let mut out = String::with_capacity(token.len());
    let mut prev: Option<char> = None;
    let mut run = 0usize;
    for ch in token.chars() {
        if Some(ch) == prev && ch.is_alphabetic() {
            run += 1;
        } else {
            run = 1;
            prev = Some(ch);
        }
        if run <= 3 {
            out.push(ch);
        }
    }
    out
}

/// One raw corpus record, before tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawExample {
    pub label: String,
    pub text: String,
    /// 1-based source line, for error messages.
    pub line: usize,
}

/// Parses a `label<TAB>text` file. Blank lines are skipped; a missing tab is
/// an error naming the line.
pub fn load_tsv(path: &Path) -> Result<Vec<RawExample>> {
    let content = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((label, text)) = line.split_once('\t') else {
            return Err(usage(format!(
                "{}:{}: expected label<TAB>text",
                path.display(),
                i + 1
            )));
        };
        if label.is_empty() {
            return Err(usage(format!("{}:{}: empty label", path.display(), i + 1)));
        }
        out.push(RawExample {
            label: label.to_string(),
            text: text.to_string(),
            line: i + 1,
        });
    }
    if out.is_empty() {
        eprintln!("warning: {} contains no examples", path.display());
    }
    Ok(out)
}

/// Appends labelled phrases to the training records: each phrase is one
/// independent instance. Duplicate phrase strings are kept, whatever their
/// labels.
pub fn expand_phrases(train: &mut Vec<RawExample>, phrases: Vec<RawExample>) {
    train.extend(phrases);
}

/// Token/id bijection with reserved PAD and UNK entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Builds the vocabulary from tokenized training documents only. Tokens
    /// below `min_count` are left out and will encode to UNK. Ids are
    /// assigned in first-occurrence order, so builds are deterministic.
    pub fn build(docs: &[Vec<String>], min_count: usize) -> Vocabulary {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for doc in docs {
            for tok in doc {
                *counts.entry(tok.as_str()).or_insert(0) += 1;
            }
        }
        let mut vocab = Vocabulary::reserved();
        for doc in docs {
            for tok in doc {
                if vocab.token_to_id.contains_key(tok.as_str()) {
                    continue;
                }
                let count = counts[tok.as_str()];
                if count as usize >= min_count.max(1) {
                    let id = vocab.id_to_token.len();
                    vocab.token_to_id.insert(tok.clone(), id);
                    vocab.id_to_token.push(tok.clone());
                    vocab.counts.push(count);
                }
            }
        }
        vocab
    }

    fn reserved() -> Vocabulary {
        let mut token_to_id = HashMap::new();
        token_to_id.insert(PAD_TOKEN.to_string(), PAD);
        token_to_id.insert(UNK_TOKEN.to_string(), UNK);
        Vocabulary {
            token_to_id,
            id_to_token: vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()],
            counts: vec![0, 0],
        }
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn encode_token(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.encode_token(t)).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    /// FNV-1a over (id, token) pairs in id order; checkpoints store this so
    /// a mismatched vocabulary file is caught at load time.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut absorb = |bytes: &[u8], h: &mut u64| {
            for &b in bytes {
                *h ^= b as u64;
                *h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for (id, token) in self.id_to_token.iter().enumerate() {
            absorb(&(id as u64).to_le_bytes(), &mut h);
            absorb(token.as_bytes(), &mut h);
            absorb(&[0xff], &mut h);
        }
        h
    }

    /// Serializes as `id<TAB>token<TAB>count` lines.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, token) in self.id_to_token.iter().enumerate() {
            let _ = writeln!(out, "{id}\t{token}\t{}", self.counts[id]);
        }
        out
    }

    pub fn write_dump(&self, path: &Path) -> Result<()> {
        fs::write(path, self.dump())
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }

    pub fn read_dump(path: &Path) -> Result<Vocabulary> {
        let content = fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let mut id_to_token = Vec::new();
        let mut counts = Vec::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split('\t');
            let (Some(id), Some(token), Some(count)) =
                (parts.next(), parts.next(), parts.next())
            else {
                return Err(usage(format!(
                    "{}:{}: expected id<TAB>token<TAB>count",
                    path.display(),
                    i + 1
                )));
            };
            let id: usize = id
                .parse()
                .map_err(|_| usage(format!("{}:{}: bad id", path.display(), i + 1)))?;
            if id != id_to_token.len() {
                return Err(usage(format!(
                    "{}:{}: ids must be dense and in order",
                    path.display(),
                    i + 1
                )));
            }
            let count: u64 = count
                .parse()
                .map_err(|_| usage(format!("{}:{}: bad count", path.display(), i + 1)))?;
            id_to_token.push(token.to_string());
            counts.push(count);
        }
        if id_to_token.len() < 2 || id_to_token[PAD] != PAD_TOKEN || id_to_token[UNK] != UNK_TOKEN {
            return Err(usage(format!(
                "{}: not a vocabulary dump (reserved entries missing)",
                path.display()
            )));
        }
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            counts,
        })
    }
}

/// Label-name/id mapping, fixed by the training split (sorted label names).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelTable {
    names: Vec<String>,
}

impl LabelTable {
    pub fn from_train(raw: &[RawExample]) -> LabelTable {
        let mut names: Vec<String> = raw.iter().map(|r| r.label.clone()).collect();
        names.sort();
        names.dedup();
        LabelTable { names }
    }

    pub fn from_names(names: Vec<String>) -> LabelTable {
        LabelTable { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

/// Which split a corpus holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// Encoded, labelled examples of one split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub split: Split,
    pub examples: Vec<Example>,
}

/// Tokenizes and encodes raw records. Examples whose text tokenizes to
/// nothing are dropped with a warning; unknown labels are an error.
pub fn encode_corpus(
    raw: &[RawExample],
    tokenizer: &Tokenizer,
    vocab: &Vocabulary,
    labels: &LabelTable,
    split: Split,
) -> Result<Corpus> {
    let mut examples = Vec::with_capacity(raw.len());
    let mut dropped = 0usize;
    for record in raw {
        let Some(label) = labels.id(&record.label) else {
            return Err(usage(format!(
                "line {}: label {:?} not present in the training split",
                record.line, record.label
            )));
        };
        let tokens = tokenizer.tokenize(&record.text);
        if tokens.is_empty() {
            dropped += 1;
            continue;
        }
        examples.push(Example::new(vocab.encode(&tokens), label));
    }
    if dropped > 0 {
        eprintln!("warning: dropped {dropped} example(s) with empty text");
    }
    Ok(Corpus { split, examples })
}

/// Pretrained embeddings that matched the vocabulary, plus the coverage
/// fraction over non-reserved tokens.
pub struct LoadedEmbeddings {
    pub vectors: Vec<(usize, Vec<f64>)>,
    pub coverage: f64,
}

/// Parses `token v1 ... vd` lines and keeps the vectors of in-vocabulary
/// tokens. Every line must carry exactly `dim` values.
pub fn load_embeddings(path: &Path, vocab: &Vocabulary, dim: usize) -> Result<LoadedEmbeddings> {
    let content = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut vectors = Vec::new();
    let mut matched = 0usize;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-blank line");
        let values: std::result::Result<Vec<f64>, _> = parts.map(str::parse).collect();
        let values = values
            .map_err(|_| usage(format!("{}:{}: bad number", path.display(), i + 1)))?;
        if values.len() != dim {
            return Err(usage(format!(
                "{}:{}: expected {dim} values, found {}",
                path.display(),
                i + 1,
                values.len()
            )));
        }
        let id = vocab.encode_token(token);
        if id != UNK && id != PAD && vocab.token(id) == Some(token) {
            matched += 1;
            vectors.push((id, values));
        }
    }
    let non_reserved = vocab.size().saturating_sub(2);
    let coverage = if non_reserved == 0 {
        0.0
    } else {
        matched as f64 / non_reserved as f64
    };
    Ok(LoadedEmbeddings { vectors, coverage })
}
