//! Forward-pass record kept for backpropagation.

use alloc::vec::Vec;

use crate::numerics::Mat;
use crate::pooling::PoolSelection;

/// Whether a forward pass is part of training (dropout active) or inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Everything one DCNN layer memoizes: the post-fold pre-pool responses, the
/// pooling selections and the pooled post-tanh outputs, per feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub pre_pool: Vec<Mat>,
    pub selections: Vec<PoolSelection>,
    pub outputs: Vec<Mat>,
}

/// Model-specific intermediate activations.
#[derive(Debug, Clone, PartialEq)]
pub enum TraceBody {
    Dcnn {
        layers: Vec<LayerTrace>,
    },
    MaxTdnn {
        /// tanh of the narrow convolution, pre pooling.
        activated: Mat,
        /// Per-row argmax positions (k-max with k = 1).
        selection: PoolSelection,
    },
    Nbow {
        /// tanh of the summed word vectors.
        activated: Vec<f64>,
    },
}

/// Memoized forward pass of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub words: Vec<usize>,
    /// Embedded sentence matrix as fed to the model (Max-TDNN pads short
    /// sentences with zero columns).
    pub sentence: Mat,
    pub body: TraceBody,
    /// Penultimate feature vector before dropout.
    pub feature: Vec<f64>,
    /// Per-feature dropout scale (0 or 1/(1-rate)); `None` outside training
    /// or at rate 0.
    pub dropout_mask: Option<Vec<f64>>,
    /// Dense-layer input (feature after dropout).
    pub penultimate: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub mode: Mode,
}

impl ForwardTrace {
    /// Class with the highest log-probability; ties take the lowest id.
    pub fn predicted_class(&self) -> usize {
        let mut best = 0;
        for (i, &lp) in self.log_probs.iter().enumerate() {
            if lp > self.log_probs[best] {
                best = i;
            }
        }
        best
    }
}
