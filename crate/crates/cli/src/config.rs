//! Run configuration: flat INI-style sections with `key = value` lines.
//!
//! Unknown sections or keys are rejected and missing required keys are
//! reported by name. Full-line comments start with `#` or `;`. Paths are
//! resolved relative to the config file's directory.
//!
//! ```text
//! [model]
//! kind = dcnn            # dcnn | maxtdnn | nbow
//! embed_dim = 48
//! widths = 7,5
//! maps = 6,14
//! folds = true,true
//! k_top = 4
//! dropout = 0.5
//!
//! [train]
//! learning_rate = 0.05
//! batch_size = 32
//!
//! [data]
//! train = train.tsv
//! dev = dev.tsv
//! tokenize = plain       # plain | tweet
//!
//! [output]
//! dir = out
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dcnn_core::network::{ConvLayerSpec, L2Coeffs, ModelKind, NetworkSpec};
use dcnn_core::training::TrainConfig;

use crate::data::{TokenizeMode, Tokenizer};
use crate::error::{usage, Result};

/// Architecture settings; the class count is supplied by the data and only
/// optionally pinned here.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub embed_dim: usize,
    pub widths: Vec<usize>,
    pub maps: Vec<usize>,
    pub folds: Vec<bool>,
    pub k_top: usize,
    pub dropout: f64,
    pub classes: Option<usize>,
}

impl ModelConfig {
    /// Builds the network spec for a discovered class count.
    pub fn to_spec(&self, classes: usize) -> Result<NetworkSpec> {
        if let Some(pinned) = self.classes {
            if pinned != classes {
                return Err(usage(format!(
                    "config pins classes = {pinned} but the data has {classes} labels"
                )));
            }
        }
        let spec = match self.kind {
            ModelKind::Dcnn => {
                let layers = self
                    .widths
                    .iter()
                    .zip(&self.maps)
                    .zip(&self.folds)
                    .map(|((&width, &maps), &fold)| ConvLayerSpec { width, maps, fold })
                    .collect();
                NetworkSpec::dcnn(self.embed_dim, layers, self.k_top, classes, self.dropout)
            }
            ModelKind::MaxTdnn => NetworkSpec::max_tdnn(self.embed_dim, self.widths[0], classes),
            ModelKind::Nbow => NetworkSpec::nbow(self.embed_dim, classes),
        };
        spec.validate().map_err(|e| usage(e.to_string()))?;
        Ok(spec)
    }
}

/// Corpus paths and preprocessing settings.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub train: PathBuf,
    pub train_phrases: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub tokenizer: Tokenizer,
    pub min_count: usize,
    pub embeddings: Option<PathBuf>,
}

/// Fully parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: Option<DataConfig>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_str_with_base(&text, base)
    }

    pub fn from_str_with_base(text: &str, base: &Path) -> Result<RunConfig> {
        let ini = Ini::parse(text)?;
        for section in ini.sections.keys() {
            if !["model", "train", "data", "output"].contains(&section.as_str()) {
                return Err(usage(format!("unknown section [{section}]")));
            }
        }

        let model = parse_model(ini.section("model").ok_or_else(|| usage("missing [model] section"))?)?;
        let train = match ini.section("train") {
            Some(s) => parse_train(s)?,
            None => TrainConfig::default(),
        };
        let data = match ini.section("data") {
            Some(s) => Some(parse_data(s, base)?),
            None => None,
        };
        let output_dir = match ini.section("output") {
            Some(s) => {
                s.check_keys(&["dir"])?;
                Some(base.join(s.require("dir")?))
            }
            None => None,
        };
        Ok(RunConfig {
            model,
            train,
            data,
            output_dir,
        })
    }

    /// The data section, or a usage error naming it.
    pub fn data_required(&self) -> Result<&DataConfig> {
        self.data
            .as_ref()
            .ok_or_else(|| usage("missing [data] section"))
    }

    pub fn output_required(&self) -> Result<&PathBuf> {
        self.output_dir
            .as_ref()
            .ok_or_else(|| usage("missing [output] section"))
    }
}

fn parse_model(s: &Section) -> Result<ModelConfig> {
    s.check_keys(&[
        "kind", "embed_dim", "widths", "maps", "folds", "k_top", "dropout", "classes",
    ])?;
    let kind = match s.require("kind")? {
        "dcnn" => ModelKind::Dcnn,
        "maxtdnn" => ModelKind::MaxTdnn,
        "nbow" => ModelKind::Nbow,
        other => return Err(usage(format!("unknown model kind {other:?}"))),
    };
    let embed_dim: usize = s.require_parsed("embed_dim")?;
    let classes = s.opt_parsed("classes")?;

    let widths: Vec<usize> = match kind {
        ModelKind::Nbow => {
            s.forbid("widths", "nbow")?;
            Vec::new()
        }
        _ => s.require_list("widths")?,
    };
    match kind {
        ModelKind::Dcnn => {
            let maps: Vec<usize> = s.require_list("maps")?;
            let folds: Vec<bool> = match s.get("folds") {
                Some(_) => s.require_list("folds")?,
                None => vec![false; widths.len()],
            };
            if maps.len() != widths.len() || folds.len() != widths.len() {
                return Err(usage(format!(
                    "widths, maps and folds must have equal lengths ({}, {}, {})",
                    widths.len(),
                    maps.len(),
                    folds.len()
                )));
            }
            Ok(ModelConfig {
                kind,
                embed_dim,
                widths,
                maps,
                folds,
                k_top: s.require_parsed("k_top")?,
                dropout: s.opt_parsed("dropout")?.unwrap_or(0.5),
                classes,
            })
        }
        ModelKind::MaxTdnn => {
            for key in ["maps", "folds", "k_top", "dropout"] {
                s.forbid(key, "maxtdnn")?;
            }
            if widths.len() != 1 {
                return Err(usage("maxtdnn takes a single filter width"));
            }
            Ok(ModelConfig {
                kind,
                embed_dim,
                widths,
                maps: vec![1],
                folds: vec![false],
                k_top: 1,
                dropout: 0.0,
                classes,
            })
        }
        ModelKind::Nbow => {
            for key in ["maps", "folds", "k_top", "dropout"] {
                s.forbid(key, "nbow")?;
            }
            Ok(ModelConfig {
                kind,
                embed_dim,
                widths: Vec::new(),
                maps: Vec::new(),
                folds: Vec::new(),
                k_top: 1,
                dropout: 0.0,
                classes,
            })
        }
    }
}

fn parse_train(s: &Section) -> Result<TrainConfig> {
    s.check_keys(&[
        "learning_rate",
        "adagrad_epsilon",
        "l2",
        "l2_embedding",
        "l2_filter",
        "l2_bias",
        "l2_dense",
        "batch_size",
        "max_epochs",
        "patience",
        "seed",
    ])?;
    let mut cfg = TrainConfig::default();
    if let Some(v) = s.opt_parsed("learning_rate")? {
        cfg.learning_rate = v;
    }
    if let Some(v) = s.opt_parsed("adagrad_epsilon")? {
        cfg.adagrad_epsilon = v;
    }
    if let Some(v) = s.opt_parsed("l2")? {
        cfg.l2 = L2Coeffs::uniform(v);
    }
    if let Some(v) = s.opt_parsed("l2_embedding")? {
        cfg.l2.embedding = v;
    }
    if let Some(v) = s.opt_parsed("l2_filter")? {
        cfg.l2.filter = v;
    }
    if let Some(v) = s.opt_parsed("l2_bias")? {
        cfg.l2.bias = v;
    }
    if let Some(v) = s.opt_parsed("l2_dense")? {
        cfg.l2.dense = v;
    }
    if let Some(v) = s.opt_parsed("batch_size")? {
        cfg.batch_size = v;
    }
    if let Some(v) = s.opt_parsed("max_epochs")? {
        cfg.max_epochs = v;
    }
    if let Some(v) = s.opt_parsed("patience")? {
        cfg.patience = v;
    }
    if let Some(v) = s.opt_parsed("seed")? {
        cfg.seed = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn parse_data(s: &Section, base: &Path) -> Result<DataConfig> {
    s.check_keys(&[
        "train",
        "train_phrases",
        "dev",
        "test",
        "tokenize",
        "min_count",
        "embeddings",
        "tweet_mark_user",
        "tweet_mark_url",
        "tweet_squeeze",
        "tweet_strip_emoticons",
    ])?;
    let mode = match s.get("tokenize").unwrap_or("plain") {
        "plain" => TokenizeMode::Plain,
        "tweet" => TokenizeMode::Tweet,
        other => return Err(usage(format!("unknown tokenize mode {other:?}"))),
    };
    let mut tokenizer = Tokenizer {
        mode,
        ..Tokenizer::plain()
    };
    if let Some(v) = s.opt_parsed("tweet_mark_user")? {
        tokenizer.rules.mark_user = v;
    }
    if let Some(v) = s.opt_parsed("tweet_mark_url")? {
        tokenizer.rules.mark_url = v;
    }
    if let Some(v) = s.opt_parsed("tweet_squeeze")? {
        tokenizer.rules.squeeze_repeats = v;
    }
    if let Some(v) = s.opt_parsed("tweet_strip_emoticons")? {
        tokenizer.rules.strip_emoticons = v;
    }
    Ok(DataConfig {
        train: base.join(s.require("train")?),
        train_phrases: s.get("train_phrases").map(|p| base.join(p)),
        dev: s.get("dev").map(|p| base.join(p)),
        test: s.get("test").map(|p| base.join(p)),
        tokenizer,
        min_count: s.opt_parsed("min_count")?.unwrap_or(1),
        embeddings: s.get("embeddings").map(|p| base.join(p)),
    })
}

// -- INI machinery --------------------------------------------------------

struct Section {
    name: String,
    entries: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| usage(format!("missing key '{key}' in [{}]", self.name)))
    }

    fn require_parsed<T: FromStr>(&self, key: &str) -> Result<T> {
        self.parse_value(key, self.require(key)?)
    }

    fn opt_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            Some(v) => Ok(Some(self.parse_value(key, v)?)),
            None => Ok(None),
        }
    }

    fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.require(key)?
            .split(',')
            .map(|part| self.parse_value(key, part.trim()))
            .collect()
    }

    fn parse_value<T: FromStr>(&self, key: &str, raw: &str) -> Result<T> {
        raw.parse().map_err(|_| {
            usage(format!(
                "key '{key}' in [{}] has invalid value {raw:?}",
                self.name
            ))
        })
    }

    fn forbid(&self, key: &str, kind: &str) -> Result<()> {
        if self.get(key).is_some() {
            return Err(usage(format!("key '{key}' does not apply to {kind} models")));
        }
        Ok(())
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(usage(format!(
                    "line {line}: unknown key '{key}' in [{}]",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

struct Ini {
    sections: BTreeMap<String, Section>,
}

impl Ini {
    fn parse(text: &str) -> Result<Ini> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let Some(name) = name.strip_suffix(']') else {
                    return Err(usage(format!("line {lineno}: unterminated section header")));
                };
                let name = name.trim().to_string();
                if sections.contains_key(&name) {
                    return Err(usage(format!("line {lineno}: duplicate section [{name}]")));
                }
                sections.insert(
                    name.clone(),
                    Section {
                        name: name.clone(),
                        entries: BTreeMap::new(),
                    },
                );
                current = Some(name);
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!("line {lineno}: expected key = value")));
            };
            let Some(section) = current.as_ref() else {
                return Err(usage(format!("line {lineno}: key outside any section")));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            let section = sections.get_mut(section).expect("just inserted");
            if section.entries.contains_key(&key) {
                return Err(usage(format!(
                    "line {lineno}: duplicate key '{key}' in [{}]",
                    section.name
                )));
            }
            section.entries.insert(key, (lineno, value));
        }
        Ok(Ini { sections })
    }

    fn section(&self, name: &str) -> Option<&Section> {
        self.sections.get(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "\
# toy setup
[model]
kind = dcnn
embed_dim = 8
widths = 3,2
maps = 2,2
folds = true,false
k_top = 2

[train]
learning_rate = 0.1
seed = 7

[data]
train = train.tsv
dev = dev.tsv
tokenize = plain

[output]
dir = out
";

    #[test]
    fn parses_a_full_config() {
        let cfg = RunConfig::from_str_with_base(TOY, Path::new("/cfg")).unwrap();
        assert_eq!(cfg.model.kind, ModelKind::Dcnn);
        assert_eq!(cfg.model.widths, vec![3, 2]);
        assert_eq!(cfg.model.folds, vec![true, false]);
        assert_eq!(cfg.model.dropout, 0.5); // default
        assert_eq!(cfg.train.learning_rate, 0.1);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.train.batch_size, 32); // default
        let data = cfg.data_required().unwrap();
        assert_eq!(data.train, Path::new("/cfg/train.tsv"));
        assert_eq!(data.dev.as_deref(), Some(Path::new("/cfg/dev.tsv")));
        assert_eq!(data.min_count, 1);
        assert_eq!(cfg.output_dir.as_deref(), Some(Path::new("/cfg/out")));
        let spec = cfg.model.to_spec(2).unwrap();
        assert_eq!(spec.classes, 2);
    }

    #[test]
    fn unknown_keys_and_sections_are_rejected() {
        let bad_key = TOY.replace("k_top = 2", "k_top = 2\nmystery = 9");
        let err = RunConfig::from_str_with_base(&bad_key, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("mystery"), "{err}");

        let bad_section = format!("{TOY}\n[extra]\nx = 1\n");
        let err = RunConfig::from_str_with_base(&bad_section, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn missing_required_keys_are_reported_by_name() {
        let missing = TOY.replace("k_top = 2\n", "");
        let err = RunConfig::from_str_with_base(&missing, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("k_top"), "{err}");

        let err = RunConfig::from_str_with_base("[model]\nkind = dcnn\n", Path::new("."))
            .unwrap_err();
        assert!(err.to_string().contains("embed_dim"), "{err}");
    }

    #[test]
    fn duplicate_keys_and_malformed_lines_error_with_line_numbers() {
        let dup = "[model]\nkind = nbow\nkind = dcnn\n";
        let err = RunConfig::from_str_with_base(dup, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");

        let startled = "[model\nkind = nbow\n";
        let err = RunConfig::from_str_with_base(startled, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
    }

    #[test]
    fn model_kind_gates_the_allowed_keys() {
        let tdnn = "[model]\nkind = maxtdnn\nembed_dim = 8\nwidths = 6\n";
        let cfg = RunConfig::from_str_with_base(tdnn, Path::new(".")).unwrap();
        let spec = cfg.model.to_spec(3).unwrap();
        assert_eq!(spec.kind, ModelKind::MaxTdnn);
        assert_eq!(spec.layers[0].width, 6);

        let bad = "[model]\nkind = maxtdnn\nembed_dim = 8\nwidths = 6\nmaps = 3\n";
        assert!(RunConfig::from_str_with_base(bad, Path::new(".")).is_err());

        let nbow = "[model]\nkind = nbow\nembed_dim = 12\n";
        let cfg = RunConfig::from_str_with_base(nbow, Path::new(".")).unwrap();
        assert_eq!(cfg.model.to_spec(2).unwrap().kind, ModelKind::Nbow);
    }

    #[test]
    fn pinned_class_count_must_match_the_data() {
        let pinned = "[model]\nkind = nbow\nembed_dim = 4\nclasses = 3\n";
        let cfg = RunConfig::from_str_with_base(pinned, Path::new(".")).unwrap();
        assert!(cfg.model.to_spec(3).is_ok());
        assert!(cfg.model.to_spec(2).is_err());
    }

    #[test]
    fn l2_overrides_apply_per_group() {
        let text = "[model]\nkind = nbow\nembed_dim = 4\n[train]\nl2 = 0.5\nl2_bias = 0.0\n";
        let cfg = RunConfig::from_str_with_base(text, Path::new(".")).unwrap();
        assert_eq!(cfg.train.l2.embedding, 0.5);
        assert_eq!(cfg.train.l2.dense, 0.5);
        assert_eq!(cfg.train.l2.bias, 0.0);
    }
}
