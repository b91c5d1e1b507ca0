//! k-max pooling, the dynamic-k schedule, max-over-time pooling and folding.
//!
//! k-max pooling keeps the k largest values of a sequence in their original
//! order. Ties at the k-th rank select the leftmost occurrences. Sequences
//! shorter than k keep all their values and are right-padded with zeros;
//! padded positions are not recorded in the selection and receive no
//! gradient, so downstream shapes depend only on (sentence length, schedule).

use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::Mat;
use crate::{invalid_arg, Result};

/// Source positions chosen by a pooling operation, for gradient routing.
///
/// One strictly increasing index list per row; a list is shorter than the
/// pooled width only when the input row was shorter than k.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolSelection {
    rows: Vec<Vec<usize>>,
    input_len: usize,
    k: usize,
}

impl PoolSelection {
    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    /// Length of the pre-pool sequences.
    pub fn input_len(&self) -> usize {
        self.input_len
    }

    /// Pooled width (the k that was requested).
    pub fn k(&self) -> usize {
        self.k
    }
}

/// Dynamic pooling schedule: total number of convolutional layers and the
/// fixed pool size of the topmost layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DynamicKSchedule {
    pub layers: usize,
    pub k_top: usize,
}

impl DynamicKSchedule {
    pub fn new(layers: usize, k_top: usize) -> Result<DynamicKSchedule> {
        if layers == 0 || k_top == 0 {
            return Err(invalid_arg!(
                "schedule needs layers >= 1 and k_top >= 1, got {layers} and {k_top}"
            ));
        }
        Ok(DynamicKSchedule { layers, k_top })
    }
}

/// Pool size for convolutional layer `layer` (1-based) on a sentence of
/// length `sentence_len`: `max(k_top, ceil((L - l) * s / L))`.
///
/// The ceiling is computed in integer arithmetic, so there is no float
/// rounding anywhere in the schedule.
pub fn dynamic_k(sched: &DynamicKSchedule, layer: usize, sentence_len: usize) -> Result<usize> {
    if layer == 0 || layer > sched.layers {
        return Err(invalid_arg!(
            "layer {layer} outside 1..={}",
            sched.layers
        ));
    }
    if sentence_len == 0 {
        return Err(invalid_arg!("sentence length must be >= 1"));
    }
    let remaining = sched.layers - layer;
    let scaled = (remaining * sentence_len + sched.layers - 1) / sched.layers;
    Ok(sched.k_top.max(scaled))
}

/// k-max pooling of one sequence. Returns the pooled values (length k,
/// zero-padded if the input is shorter) and the selected source indices.
pub fn kmax(seq: &[f64], k: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if k == 0 {
        return Err(invalid_arg!("pool size k must be >= 1"));
    }
    let take = k.min(seq.len());
    // Repeated leftmost-max scan; strict '>' keeps the leftmost of tied
    // values. Sequences are sentence-sized, so the quadratic scan is cheap
    // and stays an independent route from the sort-based test oracle.
    let mut taken = vec![false; seq.len()];
    for _ in 0..take {
        let mut best: Option<usize> = None;
        for (i, &v) in seq.iter().enumerate() {
            if taken[i] {
                continue;
            }
            match best {
                Some(b) if seq[b] >= v => {}
                _ => best = Some(i),
            }
        }
        taken[best.expect("take <= seq.len()")] = true;
    }
    let mut pooled = Vec::with_capacity(k);
    let mut sel = Vec::with_capacity(take);
    for (i, flag) in taken.iter().enumerate() {
        if *flag {
            pooled.push(seq[i]);
            sel.push(i);
        }
    }
    pooled.resize(k, 0.0);
    Ok((pooled, sel))
}

/// Applies [`kmax`] to every row of a matrix.
pub fn kmax_rows(input: &Mat, k: usize) -> Result<(Mat, PoolSelection)> {
    if k == 0 {
        return Err(invalid_arg!("pool size k must be >= 1"));
    }
    let mut pooled = Mat::zeros(input.rows(), k);
    let mut rows = Vec::with_capacity(input.rows());
    for r in 0..input.rows() {
        let (vals, sel) = kmax(input.row(r), k)?;
        pooled.row_mut(r).copy_from_slice(&vals);
        rows.push(sel);
    }
    Ok((
        pooled,
        PoolSelection {
            rows,
            input_len: input.cols(),
            k,
        },
    ))
}

/// Routes `upstream` back to the positions recorded in `sel`; every
/// non-selected position gets exactly zero.
pub fn kmax_grad(sel: &PoolSelection, upstream: &Mat) -> Result<Mat> {
    if upstream.rows() != sel.rows.len() || upstream.cols() != sel.k {
        return Err(invalid_arg!(
            "upstream shape {}x{} does not match pooled shape {}x{}",
            upstream.rows(),
            upstream.cols(),
            sel.rows.len(),
            sel.k
        ));
    }
    let mut grad = Mat::zeros(sel.rows.len(), sel.input_len);
    for (r, indices) in sel.rows.iter().enumerate() {
        let up = upstream.row(r);
        let out = grad.row_mut(r);
        for (j, &src) in indices.iter().enumerate() {
            out[src] += up[j];
        }
    }
    Ok(grad)
}

/// Maximum of each row.
pub fn max_over_time(input: &Mat) -> Result<Vec<f64>> {
    if input.rows() == 0 || input.cols() == 0 {
        return Err(invalid_arg!("max-over-time needs a non-empty matrix"));
    }
    Ok((0..input.rows())
        .map(|r| input.row(r).iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect())
}

/// Sums every two adjacent rows component-wise, halving the row count.
pub fn fold(input: &Mat) -> Result<Mat> {
    if input.rows() % 2 != 0 {
        return Err(invalid_arg!(
            "folding needs an even row count, got {}",
            input.rows()
        ));
    }
    let mut out = Mat::zeros(input.rows() / 2, input.cols());
    for r in 0..out.rows() {
        let (top, bottom) = (input.row(2 * r), input.row(2 * r + 1));
        for (c, slot) in out.row_mut(r).iter_mut().enumerate() {
            *slot = top[c] + bottom[c];
        }
    }
    Ok(out)
}

/// Backward of [`fold`]: each upstream row feeds both source rows unchanged.
pub fn fold_grad(upstream: &Mat) -> Mat {
    let mut grad = Mat::zeros(upstream.rows() * 2, upstream.cols());
    for r in 0..upstream.rows() {
        grad.row_mut(2 * r).copy_from_slice(upstream.row(r));
        grad.row_mut(2 * r + 1).copy_from_slice(upstream.row(r));
    }
    grad
}
