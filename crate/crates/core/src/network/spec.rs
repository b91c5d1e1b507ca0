//! Declarative architecture description.

use alloc::vec::Vec;

use crate::{invalid_arg, Result};

/// Which of the three sentence models to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Wide convolutions with dynamic k-max pooling and optional folding.
    Dcnn,
    /// Narrow convolution, tanh, max-over-time pooling.
    MaxTdnn,
    /// Neural bag of words: summed embeddings, tanh.
    Nbow,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Dcnn => "dcnn",
            ModelKind::MaxTdnn => "maxtdnn",
            ModelKind::Nbow => "nbow",
        }
    }
}

/// One convolutional layer: filter width, number of feature maps, and
/// whether adjacent rows are folded before pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvLayerSpec {
    pub width: usize,
    pub maps: usize,
    pub fold: bool,
}

/// Full architecture description for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub kind: ModelKind,
    pub embed_dim: usize,
    /// Convolutional layers; empty for NBoW, exactly one for Max-TDNN.
    pub layers: Vec<ConvLayerSpec>,
    /// Pool size of the topmost layer (DCNN only; 1 otherwise).
    pub k_top: usize,
    pub classes: usize,
    /// Dropout rate on the penultimate feature vector (DCNN only).
    pub dropout: f64,
}

impl NetworkSpec {
    pub fn dcnn(
        embed_dim: usize,
        layers: Vec<ConvLayerSpec>,
        k_top: usize,
        classes: usize,
        dropout: f64,
    ) -> NetworkSpec {
        NetworkSpec {
            kind: ModelKind::Dcnn,
            embed_dim,
            layers,
            k_top,
            classes,
            dropout,
        }
    }

    pub fn max_tdnn(embed_dim: usize, filter_width: usize, classes: usize) -> NetworkSpec {
        NetworkSpec {
            kind: ModelKind::MaxTdnn,
            embed_dim,
            layers: alloc::vec![ConvLayerSpec {
                width: filter_width,
                maps: 1,
                fold: false,
            }],
            k_top: 1,
            classes,
            dropout: 0.0,
        }
    }

    pub fn nbow(embed_dim: usize, classes: usize) -> NetworkSpec {
        NetworkSpec {
            kind: ModelKind::Nbow,
            embed_dim,
            layers: Vec::new(),
            k_top: 1,
            classes,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 {
            return Err(invalid_arg!("embedding dimension must be >= 1"));
        }
        if self.classes < 2 {
            return Err(invalid_arg!("need at least 2 classes, got {}", self.classes));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid_arg!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        match self.kind {
            ModelKind::Dcnn => {
                if self.layers.is_empty() {
                    return Err(invalid_arg!("a DCNN needs at least one conv layer"));
                }
                if self.k_top == 0 {
                    return Err(invalid_arg!("k_top must be >= 1"));
                }
                for (i, layer) in self.layers.iter().enumerate() {
                    if layer.width == 0 || layer.maps == 0 {
                        return Err(invalid_arg!(
                            "layer {}: width and map count must be >= 1",
                            i + 1
                        ));
                    }
                }
                self.rows_per_layer()?;
            }
            ModelKind::MaxTdnn => {
                if self.layers.len() != 1 || self.layers[0].maps != 1 || self.layers[0].fold {
                    return Err(invalid_arg!(
                        "Max-TDNN uses exactly one unfolded single-map conv layer"
                    ));
                }
                if self.layers[0].width == 0 {
                    return Err(invalid_arg!("filter width must be >= 1"));
                }
                if self.dropout != 0.0 {
                    return Err(invalid_arg!("dropout applies to the DCNN only"));
                }
            }
            ModelKind::Nbow => {
                if !self.layers.is_empty() {
                    return Err(invalid_arg!("NBoW has no conv layers"));
                }
                if self.dropout != 0.0 {
                    return Err(invalid_arg!("dropout applies to the DCNN only"));
                }
            }
        }
        Ok(())
    }

    /// Feature-map row count after each layer (folding halves rows).
    /// Errors when a fold would see an odd row count.
    pub fn rows_per_layer(&self) -> Result<Vec<usize>> {
        let mut rows = self.embed_dim;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.fold {
                if rows % 2 != 0 {
                    return Err(invalid_arg!(
                        "layer {}: folding needs an even row count, got {rows}",
                        i + 1
                    ));
                }
                rows /= 2;
            }
            out.push(rows);
        }
        Ok(out)
    }

    /// Length of the penultimate feature vector (the dense-layer input).
    /// Independent of sentence length by construction.
    pub fn feature_len(&self) -> Result<usize> {
        match self.kind {
            ModelKind::Dcnn => {
                let rows = self.rows_per_layer()?;
                let last = self.layers.last().expect("validated non-empty");
                Ok(rows[rows.len() - 1] * self.k_top * last.maps)
            }
            ModelKind::MaxTdnn | ModelKind::Nbow => Ok(self.embed_dim),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sst_binary() -> NetworkSpec {
        NetworkSpec::dcnn(
            48,
            vec![
                ConvLayerSpec { width: 7, maps: 6, fold: true },
                ConvLayerSpec { width: 5, maps: 14, fold: true },
            ],
            4,
            2,
            0.5,
        )
    }

    #[test]
    fn sst_binary_spec_feature_length() {
        let spec = sst_binary();
        spec.validate().unwrap();
        assert_eq!(spec.rows_per_layer().unwrap(), vec![24, 12]);
        assert_eq!(spec.feature_len().unwrap(), 672);
    }

    #[test]
    fn odd_fold_is_rejected() {
        let spec = NetworkSpec::dcnn(
            6,
            vec![
                ConvLayerSpec { width: 3, maps: 2, fold: true },
                ConvLayerSpec { width: 2, maps: 2, fold: true },
            ],
            2,
            3,
            0.0,
        );
        // 6 -> 3 rows, second fold would need an even count.
        assert!(spec.validate().is_err());
    }

    #[test]
    fn baseline_specs_validate() {
        NetworkSpec::max_tdnn(48, 6, 2).validate().unwrap();
        NetworkSpec::nbow(48, 5).validate().unwrap();
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        assert!(NetworkSpec::nbow(0, 2).validate().is_err());
        assert!(NetworkSpec::nbow(8, 1).validate().is_err());
        assert!(NetworkSpec::dcnn(8, vec![], 4, 2, 0.0).validate().is_err());
        let mut spec = sst_binary();
        spec.dropout = 1.0;
        assert!(spec.validate().is_err());
    }
}
