//! Trainable parameter storage and the index layout derived from a spec.
//!
//! Every trainable array is one [`Param`]: a named value matrix with a
//! same-shaped gradient buffer. Parameters are created in a fixed order
//! (embeddings, then per layer all filters then all biases, then the dense
//! weights and bias), so a [`Layout`] can address them by plain indices and
//! checkpoints stay portable.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

use crate::network::spec::{ModelKind, NetworkSpec};
use crate::numerics::{math, Mat, Rng};
use crate::{invalid_arg, Result};

/// Regularization group a parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Embedding,
    Filter,
    Bias,
    Dense,
}

impl ParamGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            ParamGroup::Embedding => "embedding",
            ParamGroup::Filter => "filter",
            ParamGroup::Bias => "bias",
            ParamGroup::Dense => "dense",
        }
    }
}

/// Per-group L2 coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Coeffs {
    pub embedding: f64,
    pub filter: f64,
    pub bias: f64,
    pub dense: f64,
}

impl L2Coeffs {
    pub fn uniform(lambda: f64) -> L2Coeffs {
        L2Coeffs {
            embedding: lambda,
            filter: lambda,
            bias: lambda,
            dense: lambda,
        }
    }

    pub fn zero() -> L2Coeffs {
        L2Coeffs::uniform(0.0)
    }

    pub fn for_group(&self, group: ParamGroup) -> f64 {
        match group {
            ParamGroup::Embedding => self.embedding,
            ParamGroup::Filter => self.filter,
            ParamGroup::Bias => self.bias,
            ParamGroup::Dense => self.dense,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("embedding", self.embedding),
            ("filter", self.filter),
            ("bias", self.bias),
            ("dense", self.dense),
        ] {
            if !(v >= 0.0) {
                return Err(invalid_arg!("L2 coefficient for {name} must be >= 0, got {v}"));
            }
        }
        Ok(())
    }
}

/// One named trainable array with its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub group: ParamGroup,
    pub value: Mat,
    pub grad: Mat,
}

impl Param {
    fn new(name: String, group: ParamGroup, value: Mat) -> Param {
        let grad = Mat::zeros(value.rows(), value.cols());
        Param { name, group, value, grad }
    }
}

/// Flat registry of every trainable array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterStore {
    params: Vec<Param>,
}

impl ParameterStore {
    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    #[inline]
    pub fn get(&self, idx: usize) -> &Param {
        &self.params[idx]
    }

    #[inline]
    pub fn get_mut(&mut self, idx: usize) -> &mut Param {
        &mut self.params[idx]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// `sum_g (lambda_g / 2) * ||theta_g||^2`.
    pub fn l2_penalty(&self, coeffs: &L2Coeffs) -> f64 {
        let mut total = 0.0;
        for p in &self.params {
            let lambda = coeffs.for_group(p.group);
            if lambda > 0.0 {
                let sq: f64 = p.value.as_slice().iter().map(|v| v * v).sum();
                total += 0.5 * lambda * sq;
            }
        }
        total
    }

    /// Adds `scale * lambda_g * theta` into every gradient buffer, i.e. the
    /// L2 share of `scale` examples' losses in one pass.
    pub fn add_l2_grads(&mut self, coeffs: &L2Coeffs, scale: f64) {
        for p in &mut self.params {
            let lambda = coeffs.for_group(p.group) * scale;
            if lambda > 0.0 {
                for (g, v) in p.grad.as_mut_slice().iter_mut().zip(p.value.as_slice()) {
                    *g += lambda * v;
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.value.all_finite() && p.grad.all_finite())
    }
}

/// Parameter indices for one conv layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerLayout {
    /// `filters[out_map][in_map]` is a `rows_in x width` matrix.
    pub filters: Vec<Vec<usize>>,
    /// One per out-map, a `1 x rows_out` bias (one value per post-fold row).
    pub biases: Vec<usize>,
    pub rows_in: usize,
    pub rows_out: usize,
}

/// Model-specific part of the layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelLayout {
    Dcnn { conv: Vec<LayerLayout> },
    MaxTdnn { filter: usize },
    Nbow,
}

/// Index map from architectural roles to [`ParameterStore`] slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub embed: usize,
    pub model: ModelLayout,
    pub dense_w: usize,
    pub dense_b: usize,
    pub feature_len: usize,
    pub param_count: usize,
}

impl Layout {
    pub fn new(spec: &NetworkSpec) -> Result<Layout> {
        spec.validate()?;
        let mut next = 0usize;
        let mut bump = || {
            let idx = next;
            next += 1;
            idx
        };
        let embed = bump();
        let model = match spec.kind {
            ModelKind::Dcnn => {
                let rows = spec.rows_per_layer()?;
                let mut conv = Vec::with_capacity(spec.layers.len());
                let mut maps_in = 1;
                let mut rows_in = spec.embed_dim;
                for (l, layer) in spec.layers.iter().enumerate() {
                    let filters = (0..layer.maps)
                        .map(|_| (0..maps_in).map(|_| bump()).collect())
                        .collect();
                    let biases = (0..layer.maps).map(|_| bump()).collect();
                    conv.push(LayerLayout {
                        filters,
                        biases,
                        rows_in,
                        rows_out: rows[l],
                    });
                    maps_in = layer.maps;
                    rows_in = rows[l];
                }
                ModelLayout::Dcnn { conv }
            }
            ModelKind::MaxTdnn => ModelLayout::MaxTdnn { filter: bump() },
            ModelKind::Nbow => ModelLayout::Nbow,
        };
        let dense_w = bump();
        let dense_b = bump();
        Ok(Layout {
            embed,
            model,
            dense_w,
            dense_b,
            feature_len: spec.feature_len()?,
            param_count: next,
        })
    }

    /// Builds a freshly initialized store matching this layout.
    ///
    /// Embeddings start uniform in [-0.1, 0.1]; filter and dense weights use
    /// uniform [-r, r] with `r = sqrt(6 / (fan_in + fan_out))`; biases start
    /// at zero.
    pub fn init_store(&self, spec: &NetworkSpec, vocab_size: usize, rng: &mut Rng) -> Result<ParameterStore> {
        if vocab_size == 0 {
            return Err(invalid_arg!("vocabulary must be non-empty"));
        }
        let mut params = Vec::with_capacity(self.param_count);
        let uniform_mat = |rows: usize, cols: usize, r: f64, rng: &mut Rng| {
            let data = (0..rows * cols).map(|_| rng.uniform(-r, r)).collect();
            Mat::from_vec(rows, cols, data).expect("sized data")
        };

        params.push(Param::new(
            String::from("embed"),
            ParamGroup::Embedding,
            uniform_mat(vocab_size, spec.embed_dim, 0.1, rng),
        ));
        match &self.model {
            ModelLayout::Dcnn { conv } => {
                let mut maps_in = 1;
                for (l, (layer, ll)) in spec.layers.iter().zip(conv).enumerate() {
                    let fan_in = (maps_in * layer.width) as f64;
                    let fan_out = (layer.maps * layer.width) as f64;
                    let r = math::sqrt(6.0 / (fan_in + fan_out));
                    for j in 0..layer.maps {
                        for k in 0..maps_in {
                            debug_assert_eq!(ll.filters[j][k], params.len());
                            params.push(Param::new(
                                format!("conv{}.w{j}.{k}", l + 1),
                                ParamGroup::Filter,
                                uniform_mat(ll.rows_in, layer.width, r, rng),
                            ));
                        }
                    }
                    for j in 0..layer.maps {
                        debug_assert_eq!(ll.biases[j], params.len());
                        params.push(Param::new(
                            format!("conv{}.b{j}", l + 1),
                            ParamGroup::Bias,
                            Mat::zeros(1, ll.rows_out),
                        ));
                    }
                    maps_in = layer.maps;
                }
            }
            ModelLayout::MaxTdnn { filter } => {
                let width = spec.layers[0].width;
                let r = math::sqrt(6.0 / (2.0 * width as f64));
                debug_assert_eq!(*filter, params.len());
                params.push(Param::new(
                    String::from("conv1.w0.0"),
                    ParamGroup::Filter,
                    uniform_mat(spec.embed_dim, width, r, rng),
                ));
            }
            ModelLayout::Nbow => {}
        }
        let f = self.feature_len;
        let r = math::sqrt(6.0 / (f + spec.classes) as f64);
        debug_assert_eq!(self.dense_w, params.len());
        params.push(Param::new(
            String::from("dense.w"),
            ParamGroup::Dense,
            uniform_mat(spec.classes, f, r, rng),
        ));
        debug_assert_eq!(self.dense_b, params.len());
        params.push(Param::new(
            String::from("dense.b"),
            ParamGroup::Dense,
            Mat::zeros(1, spec.classes),
        ));
        Ok(ParameterStore { params })
    }
}
