//! Checkpoint container.
//!
//! Binary, little-endian throughout:
//!
//! ```text
//! magic        8 bytes  "DCNNCKPT"
//! version      u32      currently 1
//! kind         u8       0 dcnn | 1 maxtdnn | 2 nbow
//! embed_dim    u32
//! k_top        u32
//! classes      u32
//! dropout      f64
//! layer_count  u32
//!   per layer: width u32, maps u32, fold u8
//! vocab_size   u64
//! vocab_hash   u64      FNV-1a of the vocabulary dump (id, token) pairs
//! tok_mode     u8       0 plain | 1 tweet
//! tweet_flags  u8       bit0 mark_user, bit1 mark_url, bit2 squeeze,
//!                       bit3 strip_emoticons
//! label_count  u32
//!   per label: len u32, UTF-8 bytes
//! param_count  u32
//!   per param: name_len u32, UTF-8 bytes, rows u32, cols u32,
//!              rows*cols f64 values
//! ```
//!
//! Parameters appear in layout order (embeddings, per layer filters then
//! biases, dense weights, dense bias); names and shapes are verified against
//! a freshly derived layout on load. The flattening order of pooled feature
//! maps (map-major, then row, then position) is part of this format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use dcnn_core::network::{ConvLayerSpec, ModelKind, Network, NetworkSpec, ParameterStore};
use dcnn_core::numerics::Rng;

use crate::data::{LabelTable, TokenizeMode, Tokenizer, TweetRules, Vocabulary};
use crate::error::{runtime, usage, CliError, Result};

const MAGIC: &[u8; 8] = b"DCNNCKPT";
const VERSION: u32 = 1;

/// Everything a checkpoint restores.
pub struct LoadedCheckpoint {
    pub net: Network,
    pub store: ParameterStore,
    pub vocab_size: usize,
    pub vocab_hash: u64,
    pub labels: LabelTable,
    pub tokenizer: Tokenizer,
}

impl LoadedCheckpoint {
    /// Verifies that a vocabulary file is the one this checkpoint was
    /// trained with.
    pub fn check_vocab(&self, vocab: &Vocabulary) -> Result<()> {
        if vocab.size() != self.vocab_size || vocab.hash() != self.vocab_hash {
            return Err(usage(
                "vocabulary file does not match the checkpoint (size or hash differs)",
            ));
        }
        Ok(())
    }
}

pub fn write_checkpoint(
    path: &Path,
    net: &Network,
    store: &ParameterStore,
    vocab: &Vocabulary,
    labels: &LabelTable,
    tokenizer: &Tokenizer,
) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| runtime(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let io_err = |e: std::io::Error| runtime(format!("write {}: {e}", path.display()));

    let spec = net.spec();
    w.write_all(MAGIC).map_err(io_err)?;
    w.write_all(&VERSION.to_le_bytes()).map_err(io_err)?;
    let kind = match spec.kind {
        ModelKind::Dcnn => 0u8,
        ModelKind::MaxTdnn => 1,
        ModelKind::Nbow => 2,
    };
    w.write_all(&[kind]).map_err(io_err)?;
    w.write_all(&(spec.embed_dim as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(spec.k_top as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(spec.classes as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&spec.dropout.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(spec.layers.len() as u32).to_le_bytes()).map_err(io_err)?;
    for layer in &spec.layers {
        w.write_all(&(layer.width as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(layer.maps as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(&[layer.fold as u8]).map_err(io_err)?;
    }
    w.write_all(&(vocab.size() as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&vocab.hash().to_le_bytes()).map_err(io_err)?;
    let mode = match tokenizer.mode {
        TokenizeMode::Plain => 0u8,
        TokenizeMode::Tweet => 1,
    };
    let rules = tokenizer.rules;
    let flags = (rules.mark_user as u8)
        | ((rules.mark_url as u8) << 1)
        | ((rules.squeeze_repeats as u8) << 2)
        | ((rules.strip_emoticons as u8) << 3);
    w.write_all(&[mode, flags]).map_err(io_err)?;
    w.write_all(&(labels.len() as u32).to_le_bytes()).map_err(io_err)?;
    for name in labels.names() {
        w.write_all(&(name.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(name.as_bytes()).map_err(io_err)?;
    }
    w.write_all(&(store.params().len() as u32).to_le_bytes()).map_err(io_err)?;
    for p in store.params() {
        w.write_all(&(p.name.len() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(p.name.as_bytes()).map_err(io_err)?;
        w.write_all(&(p.value.rows() as u32).to_le_bytes()).map_err(io_err)?;
        w.write_all(&(p.value.cols() as u32).to_le_bytes()).map_err(io_err)?;
        for v in p.value.as_slice() {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_checkpoint(path: &Path) -> Result<LoadedCheckpoint> {
    let file = File::open(path)
        .map_err(|e| usage(format!("cannot open {}: {e}", path.display())))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path: path.display().to_string(),
    };

    let magic = r.bytes::<8>()?;
    if &magic != MAGIC {
        return Err(usage(format!("{}: not a checkpoint file", r.path)));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(usage(format!(
            "{}: unsupported checkpoint version {version} (expected {VERSION})",
            r.path
        )));
    }
    let kind = match r.u8()? {
        0 => ModelKind::Dcnn,
        1 => ModelKind::MaxTdnn,
        2 => ModelKind::Nbow,
        other => return Err(usage(format!("{}: unknown model kind {other}", r.path))),
    };
    let embed_dim = r.u32()? as usize;
    let k_top = r.u32()? as usize;
    let classes = r.u32()? as usize;
    let dropout = r.f64()?;
    let layer_count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(layer_count);
    for _ in 0..layer_count {
        let width = r.u32()? as usize;
        let maps = r.u32()? as usize;
        let fold = r.u8()? != 0;
        layers.push(ConvLayerSpec { width, maps, fold });
    }
    let spec = NetworkSpec {
        kind,
        embed_dim,
        layers,
        k_top,
        classes,
        dropout,
    };
    let net = Network::new(spec).map_err(|e| usage(format!("{}: {e}", r.path)))?;

    let vocab_size = r.u64()? as usize;
    let vocab_hash = r.u64()?;
    let mode = match r.u8()? {
        0 => TokenizeMode::Plain,
        1 => TokenizeMode::Tweet,
        other => return Err(usage(format!("{}: unknown tokenize mode {other}", r.path))),
    };
    let flags = r.u8()?;
    let tokenizer = Tokenizer {
        mode,
        rules: TweetRules {
            mark_user: flags & 1 != 0,
            mark_url: flags & 2 != 0,
            squeeze_repeats: flags & 4 != 0,
            strip_emoticons: flags & 8 != 0,
        },
    };
    let label_count = r.u32()? as usize;
    let mut names = Vec::with_capacity(label_count);
    for _ in 0..label_count {
        names.push(r.string()?);
    }
    if names.len() != net.spec().classes {
        return Err(usage(format!(
            "{}: {} labels for {} classes",
            r.path,
            names.len(),
            net.spec().classes
        )));
    }
    let labels = LabelTable::from_names(names);

    // Materialize a store with the right layout, then overwrite the values.
    let mut store = net
        .init_params(vocab_size, &mut Rng::new(0))
        .map_err(|e| usage(format!("{}: {e}", r.path)))?;
    let param_count = r.u32()? as usize;
    if param_count != store.params().len() {
        return Err(usage(format!(
            "{}: {param_count} parameters, layout expects {}",
            r.path,
            store.params().len()
        )));
    }
    for idx in 0..param_count {
        let name = r.string()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let param = store.get_mut(idx);
        if param.name != name || param.value.rows() != rows || param.value.cols() != cols {
            return Err(usage(format!(
                "{}: parameter {idx} is {name} ({rows}x{cols}), layout expects {} ({}x{})",
                r.path,
                param.name,
                param.value.rows(),
                param.value.cols()
            )));
        }
        for slot in param.value.as_mut_slice() {
            *slot = r.f64()?;
        }
        if !param.value.all_finite() {
            return Err(usage(format!(
                "{}: parameter {name} contains non-finite values",
                r.path
            )));
        }
    }
    store.zero_grads();
    Ok(LoadedCheckpoint {
        net,
        store,
        vocab_size,
        vocab_hash,
        labels,
        tokenizer,
    })
}

struct Reader {
    inner: BufReader<File>,
    path: String,
}

impl Reader {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| usage(format!("{}: truncated checkpoint ({e})", self.path)))?;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        if len > 1 << 20 {
            return Err(usage(format!("{}: implausible string length {len}", self.path)));
        }
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| usage(format!("{}: truncated checkpoint ({e})", self.path)))?;
        String::from_utf8(buf)
            .map_err(|_| CliError::Usage(format!("{}: invalid UTF-8 in checkpoint", self.path)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dcnn_core::network::ConvLayerSpec;

    fn small_setup() -> (Network, ParameterStore, Vocabulary, LabelTable, Tokenizer) {
        let spec = NetworkSpec::dcnn(
            6,
            vec![ConvLayerSpec { width: 3, maps: 2, fold: true }],
            2,
            2,
            0.25,
        );
        let net = Network::new(spec).unwrap();
        let docs: Vec<Vec<String>> = vec![vec!["good".into(), "bad".into(), "film".into()]];
        let vocab = Vocabulary::build(&docs, 1);
        let store = net.init_params(vocab.size(), &mut Rng::new(3)).unwrap();
        let labels = LabelTable::from_names(vec!["neg".into(), "pos".into()]);
        (net, store, vocab, labels, Tokenizer::tweet())
    }

    #[test]
    fn round_trips_bit_exactly() {
        let (net, store, vocab, labels, tok) = small_setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        write_checkpoint(&path, &net, &store, &vocab, &labels, &tok).unwrap();
        let loaded = read_checkpoint(&path).unwrap();
        assert_eq!(loaded.net.spec(), net.spec());
        assert_eq!(loaded.store, store);
        assert_eq!(loaded.labels.names(), labels.names());
        assert_eq!(loaded.tokenizer, tok);
        assert_eq!(loaded.vocab_size, vocab.size());
        loaded.check_vocab(&vocab).unwrap();
    }

    #[test]
    fn rejects_garbage_and_mismatched_vocab() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.ckpt");
        std::fs::write(&path, b"not a checkpoint at all").unwrap();
        let err = read_checkpoint(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);

        let (net, store, vocab, labels, tok) = small_setup();
        let good = dir.path().join("model.ckpt");
        write_checkpoint(&good, &net, &store, &vocab, &labels, &tok).unwrap();
        let loaded = read_checkpoint(&good).unwrap();
        let other_vocab = Vocabulary::build(&[vec!["different".into()]], 1);
        assert!(loaded.check_vocab(&other_vocab).is_err());
    }

    #[test]
    fn rejects_truncated_files() {
        let (net, store, vocab, labels, tok) = small_setup();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        write_checkpoint(&path, &net, &store, &vocab, &labels, &tok).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ckpt");
        std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
        assert!(read_checkpoint(&cut).is_err());
    }
}
