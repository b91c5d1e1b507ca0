//! The three trainable sentence models and their forward/backward passes.
//!
//! A DCNN layer computes, per output map j:
//! `tanh(bias + pool_k(fold?(sum_k wide_conv(in_map_k, filter_jk))))`.
//! Stacked layers use the dynamic pooling schedule; the pooled top layer is
//! flattened (map-major, then row, then position), passed through dropout at
//! train time, and classified by a dense layer with log-softmax.
//!
//! Max-TDNN: narrow conv -> tanh -> max-over-time -> dense. Short sentences
//! are right-padded with zero columns up to the filter width.
//!
//! NBoW: summed word vectors -> tanh -> dense. The sum runs over sorted word
//! ids so any permutation of a sentence produces bit-identical output.

pub mod params;
pub mod spec;
pub mod trace;

pub use params::{L2Coeffs, Layout, LayerLayout, ModelLayout, Param, ParamGroup, ParameterStore};
pub use spec::{ConvLayerSpec, ModelKind, NetworkSpec};
pub use trace::{ForwardTrace, LayerTrace, Mode, TraceBody};

use alloc::vec;
use alloc::vec::Vec;

use crate::conv::{conv_rows, conv_rows_grad, ConvKind, FilterMat};
use crate::numerics::{math, tanh_map, Mat, Rng};
use crate::pooling::{dynamic_k, fold, fold_grad, kmax_grad, kmax_rows, DynamicKSchedule};
use crate::{invalid_arg, Error, Result};

/// Builds the sentence matrix: column i is the embedding of word i.
pub fn embed(words: &[usize], table: &Mat) -> Result<Mat> {
    if words.is_empty() {
        return Err(invalid_arg!("cannot embed an empty sentence"));
    }
    let dim = table.cols();
    let mut out = Mat::zeros(dim, words.len());
    for (c, &w) in words.iter().enumerate() {
        if w >= table.rows() {
            return Err(invalid_arg!(
                "word id {w} outside vocabulary of size {}",
                table.rows()
            ));
        }
        for (d, &v) in table.row(w).iter().enumerate() {
            out.set(d, c, v);
        }
    }
    Ok(out)
}

/// Borrowed view of one layer's filter tensor and per-map row biases.
///
/// `filters[j][k]` connects input map k to output map j; together the
/// matrices form the layer's order-4 weight tensor.
pub struct FilterBank<'a> {
    pub filters: Vec<Vec<&'a Mat>>,
    pub biases: Vec<&'a [f64]>,
}

/// Result of one DCNN layer: post-fold convolution responses, pooled
/// post-tanh maps, and the pooling selections.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerOutput {
    pub pre_pool: Vec<Mat>,
    pub outputs: Vec<Mat>,
    pub selections: Vec<crate::pooling::PoolSelection>,
}

/// One convolution + folding + k-max pooling + bias + tanh layer.
pub fn dcnn_layer(
    inputs: &[&Mat],
    bank: &FilterBank,
    k: usize,
    fold_rows: bool,
) -> Result<LayerOutput> {
    let first = inputs
        .first()
        .ok_or_else(|| invalid_arg!("layer needs at least one input map"))?;
    if inputs
        .iter()
        .any(|m| m.rows() != first.rows() || m.cols() != first.cols())
    {
        return Err(invalid_arg!("input maps must share one shape"));
    }
    if bank.filters.is_empty() || bank.biases.len() != bank.filters.len() {
        return Err(invalid_arg!("filter bank needs one filter row and bias per output map"));
    }
    let rows_out = if fold_rows {
        if first.rows() % 2 != 0 {
            return Err(invalid_arg!(
                "folding needs an even row count, got {}",
                first.rows()
            ));
        }
        first.rows() / 2
    } else {
        first.rows()
    };

    let mut pre_pool = Vec::with_capacity(bank.filters.len());
    let mut outputs = Vec::with_capacity(bank.filters.len());
    let mut selections = Vec::with_capacity(bank.filters.len());
    for (j, row_filters) in bank.filters.iter().enumerate() {
        if row_filters.len() != inputs.len() {
            return Err(invalid_arg!(
                "output map {j} has {} filters for {} input maps",
                row_filters.len(),
                inputs.len()
            ));
        }
        let bias = bank.biases[j];
        if bias.len() != rows_out {
            return Err(invalid_arg!(
                "output map {j} bias has {} entries for {rows_out} rows",
                bias.len()
            ));
        }
        let mut summed: Option<Mat> = None;
        for (input, weights) in inputs.iter().zip(row_filters) {
            let filter = FilterMat::new(weights)?;
            let conv = conv_rows(input, &filter, ConvKind::Wide)?;
            match &mut summed {
                None => summed = Some(conv),
                Some(acc) => acc.add_assign(&conv)?,
            }
        }
        let summed = summed.expect("at least one input map");
        let folded = if fold_rows { fold(&summed)? } else { summed };
        let (pooled, sel) = kmax_rows(&folded, k)?;
        let mut activated = Mat::zeros(rows_out, k);
        for r in 0..rows_out {
            let src = pooled.row(r);
            let dst = activated.row_mut(r);
            for (c, slot) in dst.iter_mut().enumerate() {
                *slot = math::tanh(src[c] + bias[r]);
            }
        }
        pre_pool.push(folded);
        outputs.push(activated);
        selections.push(sel);
    }
    Ok(LayerOutput {
        pre_pool,
        outputs,
        selections,
    })
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| math::exp(l - max)).sum();
    let log_sum = math::ln(sum);
    logits.iter().map(|&l| l - max - log_sum).collect()
}

/// A validated architecture plus its parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layout: Layout,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Network> {
        let layout = Layout::new(&spec)?;
        Ok(Network { spec, layout })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Freshly initialized parameters for a vocabulary of the given size.
    pub fn init_params(&self, vocab_size: usize, rng: &mut Rng) -> Result<ParameterStore> {
        self.layout.init_store(&self.spec, vocab_size, rng)
    }

    /// Runs one sentence through the model. `rng` is required only when
    /// training with a nonzero dropout rate.
    pub fn forward(
        &self,
        store: &ParameterStore,
        words: &[usize],
        mode: Mode,
        mut rng: Option<&mut Rng>,
    ) -> Result<ForwardTrace> {
        let table = &store.get(self.layout.embed).value;
        let sentence = embed(words, table)?;
        let (sentence, body, feature) = match (&self.layout.model, self.spec.kind) {
            (ModelLayout::Dcnn { conv }, ModelKind::Dcnn) => {
                let sched = DynamicKSchedule::new(self.spec.layers.len(), self.spec.k_top)?;
                let mut layers: Vec<LayerTrace> = Vec::with_capacity(conv.len());
                for (l, (layer_spec, ll)) in self.spec.layers.iter().zip(conv).enumerate() {
                    let inputs: Vec<&Mat> = if l == 0 {
                        vec![&sentence]
                    } else {
                        layers[l - 1].outputs.iter().collect()
                    };
                    let bank = FilterBank {
                        filters: ll
                            .filters
                            .iter()
                            .map(|row| row.iter().map(|&i| &store.get(i).value).collect())
                            .collect(),
                        biases: ll.biases.iter().map(|&i| store.get(i).value.row(0)).collect(),
                    };
                    let k = dynamic_k(&sched, l + 1, words.len())?;
                    let out = dcnn_layer(&inputs, &bank, k, layer_spec.fold)?;
                    layers.push(LayerTrace {
                        pre_pool: out.pre_pool,
                        selections: out.selections,
                        outputs: out.outputs,
                    });
                }
                let mut feature = Vec::with_capacity(self.layout.feature_len);
                for map in &layers.last().expect("L >= 1").outputs {
                    feature.extend_from_slice(map.as_slice());
                }
                (sentence, TraceBody::Dcnn { layers }, feature)
            }
            (ModelLayout::MaxTdnn { filter }, ModelKind::MaxTdnn) => {
                let width = self.spec.layers[0].width;
                let padded = if sentence.cols() < width {
                    let mut p = Mat::zeros(sentence.rows(), width);
                    for r in 0..sentence.rows() {
                        p.row_mut(r)[..sentence.cols()].copy_from_slice(sentence.row(r));
                    }
                    p
                } else {
                    sentence
                };
                let weights = FilterMat::new(&store.get(*filter).value)?;
                let conv = conv_rows(&padded, &weights, ConvKind::Narrow)?;
                let activated = tanh_map(&conv);
                let (pooled, selection) = kmax_rows(&activated, 1)?;
                let feature: Vec<f64> = (0..pooled.rows()).map(|r| pooled.get(r, 0)).collect();
                (padded, TraceBody::MaxTdnn { activated, selection }, feature)
            }
            (ModelLayout::Nbow, ModelKind::Nbow) => {
                // Summation order is fixed by sorting ids, so permutations of
                // a sentence produce bit-identical sums.
                let mut sorted = words.to_vec();
                sorted.sort_unstable();
                let mut summed = vec![0.0; self.spec.embed_dim];
                for &w in &sorted {
                    for (slot, &v) in summed.iter_mut().zip(table.row(w)) {
                        *slot += v;
                    }
                }
                let activated: Vec<f64> = summed.iter().map(|&v| math::tanh(v)).collect();
                (sentence, TraceBody::Nbow { activated: activated.clone() }, activated)
            }
            _ => return Err(invalid_arg!("layout does not match model kind")),
        };

        if feature.len() != self.layout.feature_len {
            return Err(invalid_arg!(
                "feature length {} does not match layout {}",
                feature.len(),
                self.layout.feature_len
            ));
        }

        let dropout_mask = if mode == Mode::Train && self.spec.dropout > 0.0 {
            let rate = self.spec.dropout;
            let scale = 1.0 / (1.0 - rate);
            let rng = rng
                .as_deref_mut()
                .ok_or_else(|| invalid_arg!("training with dropout needs an RNG"))?;
            Some(
                feature
                    .iter()
                    .map(|_| if rng.bernoulli(rate) { 0.0 } else { scale })
                    .collect::<Vec<f64>>(),
            )
        } else {
            None
        };
        let penultimate: Vec<f64> = match &dropout_mask {
            Some(mask) => feature.iter().zip(mask).map(|(f, m)| f * m).collect(),
            None => feature.clone(),
        };

        let dense_w = &store.get(self.layout.dense_w).value;
        let dense_b = &store.get(self.layout.dense_b).value;
        let logits: Vec<f64> = (0..self.spec.classes)
            .map(|c| {
                let row = dense_w.row(c);
                let mut acc = dense_b.get(0, c);
                for (w, p) in row.iter().zip(&penultimate) {
                    acc += w * p;
                }
                acc
            })
            .collect();
        let log_probs = log_softmax(&logits);

        Ok(ForwardTrace {
            words: words.to_vec(),
            sentence,
            body,
            feature,
            dropout_mask,
            penultimate,
            log_probs,
            mode,
        })
    }

    /// Accumulates the cross-entropy gradient of one example into every
    /// parameter's gradient buffer. L2 gradients are added separately via
    /// [`ParameterStore::add_l2_grads`], which keeps the per-example cost
    /// proportional to the sentence instead of the full embedding table.
    pub fn backward(
        &self,
        store: &mut ParameterStore,
        trace: &ForwardTrace,
        label: usize,
    ) -> Result<()> {
        if trace.mode != Mode::Train {
            return Err(invalid_arg!("backward needs a trace from a train-mode forward"));
        }
        if label >= self.spec.classes {
            return Err(invalid_arg!(
                "label {label} outside {} classes",
                self.spec.classes
            ));
        }
        if trace.penultimate.len() != self.layout.feature_len
            || trace.log_probs.len() != self.spec.classes
        {
            return Err(invalid_arg!("trace does not match this network"));
        }

        // Softmax + cross-entropy: d logits = p - onehot(label).
        let mut dlogits: Vec<f64> = trace.log_probs.iter().map(|&lp| math::exp(lp)).collect();
        dlogits[label] -= 1.0;

        let f_len = self.layout.feature_len;
        let mut dpen = vec![0.0; f_len];
        {
            let dense_w = &store.get(self.layout.dense_w).value;
            for (c, &dl) in dlogits.iter().enumerate() {
                for (slot, &w) in dpen.iter_mut().zip(dense_w.row(c)) {
                    *slot += dl * w;
                }
            }
        }
        {
            let gw = &mut store.get_mut(self.layout.dense_w).grad;
            for (c, &dl) in dlogits.iter().enumerate() {
                for (slot, &p) in gw.row_mut(c).iter_mut().zip(&trace.penultimate) {
                    *slot += dl * p;
                }
            }
        }
        {
            let gb = &mut store.get_mut(self.layout.dense_b).grad;
            for (c, &dl) in dlogits.iter().enumerate() {
                gb.row_mut(0)[c] += dl;
            }
        }

        let mut dfeature = dpen;
        if let Some(mask) = &trace.dropout_mask {
            for (d, m) in dfeature.iter_mut().zip(mask) {
                *d *= m;
            }
        }

        match (&self.layout.model, &trace.body) {
            (ModelLayout::Dcnn { conv }, TraceBody::Dcnn { layers }) => {
                self.backward_dcnn(store, trace, conv, layers, &dfeature)?;
            }
            (ModelLayout::MaxTdnn { filter }, TraceBody::MaxTdnn { activated, selection }) => {
                let mut d_pooled = Mat::zeros(activated.rows(), 1);
                for (r, &df) in dfeature.iter().enumerate() {
                    d_pooled.set(r, 0, df);
                }
                let d_act = kmax_grad(selection, &d_pooled)?;
                let mut d_conv = Mat::zeros(d_act.rows(), d_act.cols());
                for idx in 0..d_conv.len() {
                    let a = activated.as_slice()[idx];
                    d_conv.as_mut_slice()[idx] = d_act.as_slice()[idx] * (1.0 - a * a);
                }
                let (d_sent, d_fil) = {
                    let weights = FilterMat::new(&store.get(*filter).value)?;
                    conv_rows_grad(&trace.sentence, &weights, ConvKind::Narrow, &d_conv)?
                };
                store.get_mut(*filter).grad.add_assign(&d_fil)?;
                self.accumulate_embed_grad(store, &trace.words, &d_sent)?;
            }
            (ModelLayout::Nbow, TraceBody::Nbow { activated }) => {
                let dv: Vec<f64> = dfeature
                    .iter()
                    .zip(activated)
                    .map(|(df, &a)| df * (1.0 - a * a))
                    .collect();
                let table = &mut store.get_mut(self.layout.embed).grad;
                for &w in &trace.words {
                    for (slot, &g) in table.row_mut(w).iter_mut().zip(&dv) {
                        *slot += g;
                    }
                }
            }
            _ => return Err(invalid_arg!("trace body does not match this network")),
        }
        Ok(())
    }

    fn backward_dcnn(
        &self,
        store: &mut ParameterStore,
        trace: &ForwardTrace,
        conv: &[LayerLayout],
        layers: &[LayerTrace],
        dfeature: &[f64],
    ) -> Result<()> {
        if layers.len() != conv.len() {
            return Err(invalid_arg!("trace has {} layers, network {}", layers.len(), conv.len()));
        }
        // Unflatten the feature gradient into the last layer's output maps.
        let last_spec = self.spec.layers.last().expect("L >= 1");
        let last = conv.last().expect("L >= 1");
        let map_len = last.rows_out * self.spec.k_top;
        let mut d_out: Vec<Mat> = (0..last_spec.maps)
            .map(|j| {
                Mat::from_vec(
                    last.rows_out,
                    self.spec.k_top,
                    dfeature[j * map_len..(j + 1) * map_len].to_vec(),
                )
            })
            .collect::<Result<_>>()?;

        for l in (0..conv.len()).rev() {
            let lt = &layers[l];
            let ll = &conv[l];
            let fold_rows = self.spec.layers[l].fold;
            let inputs: Vec<&Mat> = if l == 0 {
                vec![&trace.sentence]
            } else {
                layers[l - 1].outputs.iter().collect()
            };
            let mut d_inputs: Vec<Mat> = inputs
                .iter()
                .map(|m| Mat::zeros(m.rows(), m.cols()))
                .collect();
            for (j, d_map) in d_out.iter().enumerate() {
                let out = &lt.outputs[j];
                if out.rows() != d_map.rows() || out.cols() != d_map.cols() {
                    return Err(invalid_arg!("trace shapes do not match this network"));
                }
                let mut d_pre = Mat::zeros(out.rows(), out.cols());
                for idx in 0..d_pre.len() {
                    let a = out.as_slice()[idx];
                    d_pre.as_mut_slice()[idx] = d_map.as_slice()[idx] * (1.0 - a * a);
                }
                {
                    let gb = &mut store.get_mut(ll.biases[j]).grad;
                    for r in 0..d_pre.rows() {
                        gb.row_mut(0)[r] += d_pre.row(r).iter().sum::<f64>();
                    }
                }
                let d_prepool = kmax_grad(&lt.selections[j], &d_pre)?;
                let d_conv = if fold_rows {
                    fold_grad(&d_prepool)
                } else {
                    d_prepool
                };
                for (k_in, input) in inputs.iter().enumerate() {
                    let (d_in, d_fil) = {
                        let weights = FilterMat::new(&store.get(ll.filters[j][k_in]).value)?;
                        conv_rows_grad(input, &weights, ConvKind::Wide, &d_conv)?
                    };
                    d_inputs[k_in].add_assign(&d_in)?;
                    store.get_mut(ll.filters[j][k_in]).grad.add_assign(&d_fil)?;
                }
            }
            d_out = d_inputs;
        }
        let d_sentence = &d_out[0];
        self.accumulate_embed_grad(store, &trace.words, d_sentence)
    }

    // Scatters a sentence-matrix gradient into embedding rows; columns beyond
    // the word count (Max-TDNN zero padding) carry no gradient.
    fn accumulate_embed_grad(
        &self,
        store: &mut ParameterStore,
        words: &[usize],
        d_sentence: &Mat,
    ) -> Result<()> {
        let table = &mut store.get_mut(self.layout.embed).grad;
        for (c, &w) in words.iter().enumerate() {
            if w >= table.rows() {
                return Err(invalid_arg!("word id {w} outside vocabulary"));
            }
            for (dim, slot) in table.row_mut(w).iter_mut().enumerate() {
                *slot += d_sentence.get(dim, c);
            }
        }
        Ok(())
    }
}

impl Error {
    /// True for precondition violations (as opposed to numeric failures).
    pub fn is_invalid_argument(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}
