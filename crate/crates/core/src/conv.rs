//! Narrow and wide one-dimensional row-wise convolutions.
//!
//! `c_j = m . s_{j-m+1:j}`: the filter is dotted with each m-gram of the
//! signal in forward order. Narrow keeps only fully overlapping windows
//! (length `s-m+1`); wide treats out-of-range signal values as zero and always
//! yields length `s+m-1`. The narrow result is the interior slice of the wide
//! one, bit for bit.
//!
//! Two implementations are kept: a direct sliding-window path and an FFT path
//! (filter reversed, spectra multiplied). They agree to ~1e-12 and both stay
//! exported; [`conv_rows`] picks whichever is cheaper.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::numerics::{FftPlan, Mat};
use crate::{invalid_arg, Result};

/// Convolution variant: narrow requires `s >= m`, wide never fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvKind {
    Narrow,
    Wide,
}

impl ConvKind {
    /// Output length for signal length `s` and filter width `m`.
    pub fn output_len(self, s: usize, m: usize) -> Result<usize> {
        match self {
            ConvKind::Narrow => {
                if s < m {
                    Err(invalid_arg!(
                        "narrow convolution needs signal length {s} >= filter width {m}"
                    ))
                } else {
                    Ok(s - m + 1)
                }
            }
            ConvKind::Wide => Ok(s + m - 1),
        }
    }
}

/// Validated view of a `d x m` filter matrix: one width-`m` filter per
/// feature row.
#[derive(Debug, Clone, Copy)]
pub struct FilterMat<'a> {
    weights: &'a Mat,
}

impl<'a> FilterMat<'a> {
    pub fn new(weights: &'a Mat) -> Result<FilterMat<'a>> {
        if weights.rows() == 0 || weights.cols() == 0 {
            return Err(invalid_arg!(
                "filter must be at least 1x1, got {}x{}",
                weights.rows(),
                weights.cols()
            ));
        }
        Ok(FilterMat { weights })
    }

    /// Number of feature rows (`d`).
    #[inline]
    pub fn feature_dim(&self) -> usize {
        self.weights.rows()
    }

    /// Filter width (`m`).
    #[inline]
    pub fn width(&self) -> usize {
        self.weights.cols()
    }

    #[inline]
    pub fn weights(&self) -> &Mat {
        self.weights
    }
}

/// Direct-path cost `(s + m) * m` above which [`conv_rows`] switches to the
/// FFT path. Measured on this crate's scalar loops (see the `fft_crossover`
/// test in `tests/fft_crossover.rs`); sentence-sized inputs always take the
/// direct path.
pub const FFT_CROSSOVER: usize = 8192;

fn check_nonempty(signal: &[f64], filter: &[f64]) -> Result<()> {
    if signal.is_empty() || filter.is_empty() {
        return Err(invalid_arg!("convolution inputs must be non-empty"));
    }
    Ok(())
}

/// One-dimensional convolution of `signal` with `filter`.
pub fn conv1d(signal: &[f64], filter: &[f64], kind: ConvKind) -> Result<Vec<f64>> {
    check_nonempty(signal, filter)?;
    let out_len = kind.output_len(signal.len(), filter.len())?;
    let mut out = vec![0.0; out_len];
    conv1d_into(signal, filter, kind, &mut out);
    Ok(out)
}

// Core sliding-window loop. For wide output position `u` the window covers
// signal indices `u-m+1 ..= u`; taps falling outside the signal are skipped
// (zero contribution). Narrow iterates the same interior windows, in the same
// order, so it equals the wide interior slice exactly.
fn conv1d_into(signal: &[f64], filter: &[f64], kind: ConvKind, out: &mut [f64]) {
    let s = signal.len();
    let m = filter.len();
    match kind {
        ConvKind::Narrow => {
            for (q, slot) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (t, &w) in filter.iter().enumerate() {
                    acc += w * signal[q + t];
                }
                *slot = acc;
            }
        }
        ConvKind::Wide => {
            for (u, slot) in out.iter_mut().enumerate() {
                let t_lo = (m - 1).saturating_sub(u);
                let t_hi = m.min(s + m - 1 - u);
                let base = u + 1 + t_lo - m; // signal index of the first tap
                let mut acc = 0.0;
                for (t, &x) in signal[base..base + (t_hi - t_lo)].iter().enumerate() {
                    acc += filter[t_lo + t] * x;
                }
                *slot = acc;
            }
        }
    }
}

/// Convolves each row of `input` with the corresponding row of `filter`,
/// choosing the direct or FFT path by cost.
pub fn conv_rows(input: &Mat, filter: &FilterMat, kind: ConvKind) -> Result<Mat> {
    let s = input.cols();
    let m = filter.width();
    if (s + m) * m < FFT_CROSSOVER {
        conv_rows_direct(input, filter, kind)
    } else {
        conv_rows_fft(input, filter, kind)
    }
}

fn check_rows(input: &Mat, filter: &FilterMat) -> Result<()> {
    if input.rows() != filter.feature_dim() {
        return Err(invalid_arg!(
            "input has {} rows but filter has {}",
            input.rows(),
            filter.feature_dim()
        ));
    }
    if input.cols() == 0 {
        return Err(invalid_arg!("input has no columns"));
    }
    Ok(())
}

/// Row-wise convolution via sliding windows.
pub fn conv_rows_direct(input: &Mat, filter: &FilterMat, kind: ConvKind) -> Result<Mat> {
    check_rows(input, filter)?;
    let out_len = kind.output_len(input.cols(), filter.width())?;
    let mut out = Mat::zeros(input.rows(), out_len);
    for r in 0..input.rows() {
        conv1d_into(input.row(r), filter.weights().row(r), kind, out.row_mut(r));
    }
    Ok(out)
}

/// Row-wise convolution via the convolution theorem.
///
/// The filter row is reversed before the frequency-domain product so the
/// orientation matches the direct path.
pub fn conv_rows_fft(input: &Mat, filter: &FilterMat, kind: ConvKind) -> Result<Mat> {
    check_rows(input, filter)?;
    let s = input.cols();
    let m = filter.width();
    let out_len = kind.output_len(s, m)?;
    let wide_len = s + m - 1;
    let n = wide_len.next_power_of_two();
    let plan = FftPlan::new(n)?;

    let mut sig_buf = vec![Complex64::new(0.0, 0.0); n];
    let mut fil_buf = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Mat::zeros(input.rows(), out_len);
    // Wide output index u equals linear-convolution index u once the filter
    // is reversed; narrow is the interior slice starting at m-1.
    let offset = match kind {
        ConvKind::Wide => 0,
        ConvKind::Narrow => m - 1,
    };
    for r in 0..input.rows() {
        sig_buf.fill(Complex64::new(0.0, 0.0));
        for (slot, &v) in sig_buf.iter_mut().zip(input.row(r)) {
            slot.re = v;
        }
        fil_buf.fill(Complex64::new(0.0, 0.0));
        for (slot, &v) in fil_buf.iter_mut().zip(filter.weights().row(r).iter().rev()) {
            slot.re = v;
        }
        plan.forward(&mut sig_buf);
        plan.forward(&mut fil_buf);
        for (a, b) in sig_buf.iter_mut().zip(&fil_buf) {
            *a *= b;
        }
        plan.inverse(&mut sig_buf);
        for (c, slot) in out.row_mut(r).iter_mut().enumerate() {
            *slot = sig_buf[offset + c].re;
        }
    }
    Ok(out)
}

/// Exact gradients of `sum(upstream * conv_rows(input, filter, kind))` with
/// respect to the input and the filter.
pub fn conv_rows_grad(
    input: &Mat,
    filter: &FilterMat,
    kind: ConvKind,
    upstream: &Mat,
) -> Result<(Mat, Mat)> {
    check_rows(input, filter)?;
    let s = input.cols();
    let m = filter.width();
    let out_len = kind.output_len(s, m)?;
    if upstream.rows() != input.rows() || upstream.cols() != out_len {
        return Err(invalid_arg!(
            "upstream shape {}x{} does not match convolution output {}x{}",
            upstream.rows(),
            upstream.cols(),
            input.rows(),
            out_len
        ));
    }
    let mut grad_input = Mat::zeros(input.rows(), s);
    let mut grad_filter = Mat::zeros(filter.feature_dim(), m);
    for r in 0..input.rows() {
        let sig = input.row(r);
        let fil = filter.weights().row(r);
        let up = upstream.row(r);
        let gi = grad_input.row_mut(r);
        let gf = grad_filter.row_mut(r);
        // Mirror of the forward accumulation: each forward product
        // fil[t] * sig[i] contributing to out[u] yields the two partials.
        match kind {
            ConvKind::Narrow => {
                for (q, &u_val) in up.iter().enumerate() {
                    for t in 0..m {
                        gi[q + t] += u_val * fil[t];
                        gf[t] += u_val * sig[q + t];
                    }
                }
            }
            ConvKind::Wide => {
                for (u, &u_val) in up.iter().enumerate() {
                    let t_lo = (m - 1).saturating_sub(u);
                    let t_hi = m.min(s + m - 1 - u);
                    for t in t_lo..t_hi {
                        let i = u + 1 + t - m;
                        gi[i] += u_val * fil[t];
                        gf[t] += u_val * sig[i];
                    }
                }
            }
        }
    }
    Ok((grad_input, grad_filter))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn rand_mat(rng: &mut Rng, rows: usize, cols: usize) -> Mat {
        let data = (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Mat::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn width_one_identity_filter() {
        let s = [1.0, 2.0, 3.0];
        let f = [1.0];
        assert_eq!(conv1d(&s, &f, ConvKind::Narrow).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(conv1d(&s, &f, ConvKind::Wide).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn hand_computed_sliding_windows() {
        let s = [1.0, 2.0, 3.0];
        let f = [1.0, 1.0];
        assert_eq!(conv1d(&s, &f, ConvKind::Narrow).unwrap(), vec![3.0, 5.0]);
        assert_eq!(
            conv1d(&s, &f, ConvKind::Wide).unwrap(),
            vec![1.0, 3.0, 5.0, 3.0]
        );
    }

    #[test]
    fn narrow_rejects_short_signal() {
        assert!(conv1d(&[1.0, 2.0], &[1.0, 1.0, 1.0], ConvKind::Narrow).is_err());
        assert!(conv1d(&[1.0, 2.0], &[1.0, 1.0, 1.0], ConvKind::Wide).is_ok());
    }

    #[test]
    fn narrow_is_interior_slice_of_wide() {
        let mut rng = Rng::new(11);
        let s: Vec<f64> = (0..20).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let f: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let narrow = conv1d(&s, &f, ConvKind::Narrow).unwrap();
        let wide = conv1d(&s, &f, ConvKind::Wide).unwrap();
        // Bitwise equality: both paths sum the interior window in tap order.
        assert_eq!(narrow.as_slice(), &wide[4..20]);
    }

    #[test]
    fn single_row_matrix_reduces_to_conv1d() {
        let input = Mat::from_vec(1, 4, vec![1.0, -1.0, 2.0, 0.5]).unwrap();
        let weights = Mat::from_vec(1, 2, vec![0.5, -0.25]).unwrap();
        let filter = FilterMat::new(&weights).unwrap();
        let out = conv_rows_direct(&input, &filter, ConvKind::Wide).unwrap();
        let expected = conv1d(input.row(0), weights.row(0), ConvKind::Wide).unwrap();
        assert_eq!(out.row(0), expected.as_slice());
    }

    #[test]
    fn wide_output_shape_matches_formula() {
        let input = Mat::zeros(4, 7);
        let weights = Mat::zeros(4, 3);
        let filter = FilterMat::new(&weights).unwrap();
        let out = conv_rows_direct(&input, &filter, ConvKind::Wide).unwrap();
        assert_eq!((out.rows(), out.cols()), (4, 9));
    }

    #[test]
    fn row_count_mismatch_is_rejected() {
        let input = Mat::zeros(3, 7);
        let weights = Mat::zeros(4, 3);
        let filter = FilterMat::new(&weights).unwrap();
        assert!(conv_rows_direct(&input, &filter, ConvKind::Wide).is_err());
    }

    #[test]
    fn fft_path_matches_direct_path() {
        let mut rng = Rng::new(21);
        let input = rand_mat(&mut rng, 6, 12);
        let weights = rand_mat(&mut rng, 6, 4);
        let filter = FilterMat::new(&weights).unwrap();
        for kind in [ConvKind::Wide, ConvKind::Narrow] {
            let direct = conv_rows_direct(&input, &filter, kind).unwrap();
            let fast = conv_rows_fft(&input, &filter, kind).unwrap();
            let max_diff = direct
                .as_slice()
                .iter()
                .zip(fast.as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max_diff < 1e-8, "max diff {max_diff}");
        }
    }

    #[test]
    fn appended_zeros_extend_wide_output_with_zeros() {
        let mut rng = Rng::new(5);
        let s: Vec<f64> = (0..9).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let f: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let base = conv1d(&s, &f, ConvKind::Wide).unwrap();
        let mut padded = s.clone();
        padded.extend_from_slice(&[0.0; 3]);
        let extended = conv1d(&padded, &f, ConvKind::Wide).unwrap();
        assert_eq!(extended.len(), base.len() + 3);
        assert_eq!(&extended[..base.len()], base.as_slice());
        assert!(extended[base.len()..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let input = Mat::zeros(2, 5);
        let weights = Mat::zeros(2, 3);
        let filter = FilterMat::new(&weights).unwrap();
        let upstream = Mat::zeros(2, 7);
        let (gi, gf) = conv_rows_grad(&input, &filter, ConvKind::Wide, &upstream).unwrap();
        assert!(gi.as_slice().iter().all(|&v| v == 0.0));
        assert!(gf.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn identity_filter_routes_upstream_through() {
        let mut rng = Rng::new(2);
        let input = rand_mat(&mut rng, 3, 6);
        let weights = Mat::from_vec(3, 1, vec![1.0, 1.0, 1.0]).unwrap();
        let filter = FilterMat::new(&weights).unwrap();
        let upstream = rand_mat(&mut rng, 3, 6);
        let (gi, _) = conv_rows_grad(&input, &filter, ConvKind::Wide, &upstream).unwrap();
        assert_eq!(gi, upstream);
    }

    #[test]
    fn upstream_shape_mismatch_is_rejected() {
        let input = Mat::zeros(2, 5);
        let weights = Mat::zeros(2, 3);
        let filter = FilterMat::new(&weights).unwrap();
        let upstream = Mat::zeros(2, 5);
        assert!(conv_rows_grad(&input, &filter, ConvKind::Wide, &upstream).is_err());
    }

    // Central finite differences on sum(upstream * conv(input, filter)).
    fn fd_check(kind: ConvKind, d: usize, s: usize, m: usize, seed: u64) {
        let mut rng = Rng::new(seed);
        let input = rand_mat(&mut rng, d, s);
        let weights = rand_mat(&mut rng, d, m);
        let out_len = kind.output_len(s, m).unwrap();
        let upstream = rand_mat(&mut rng, d, out_len);
        let filter = FilterMat::new(&weights).unwrap();
        let (gi, gf) = conv_rows_grad(&input, &filter, kind, &upstream).unwrap();

        let loss = |inp: &Mat, wts: &Mat| -> f64 {
            let f = FilterMat::new(wts).unwrap();
            let out = conv_rows_direct(inp, &f, kind).unwrap();
            out.as_slice()
                .iter()
                .zip(upstream.as_slice())
                .map(|(o, u)| o * u)
                .sum()
        };
        let h = 1e-5;
        for idx in 0..input.len() {
            let mut plus = input.clone();
            let mut minus = input.clone();
            plus.as_mut_slice()[idx] += h;
            minus.as_mut_slice()[idx] -= h;
            let numeric = (loss(&plus, &weights) - loss(&minus, &weights)) / (2.0 * h);
            let analytic = gi.as_slice()[idx];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
            assert!(rel < 1e-6, "input grad {idx}: {analytic} vs {numeric}");
        }
        for idx in 0..weights.len() {
            let mut plus = weights.clone();
            let mut minus = weights.clone();
            plus.as_mut_slice()[idx] += h;
            minus.as_mut_slice()[idx] -= h;
            let numeric = (loss(&input, &plus) - loss(&input, &minus)) / (2.0 * h);
            let analytic = gf.as_slice()[idx];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
            assert!(rel < 1e-6, "filter grad {idx}: {analytic} vs {numeric}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        fd_check(ConvKind::Wide, 2, 5, 3, 31);
        fd_check(ConvKind::Narrow, 2, 5, 3, 32);
    }

    proptest! {
        #[test]
        fn shape_law_and_containment(
            s_len in 1usize..24,
            m_len in 1usize..10,
            seed in 0u64..1000,
        ) {
            let mut rng = Rng::new(seed);
            let s: Vec<f64> = (0..s_len).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let f: Vec<f64> = (0..m_len).map(|_| rng.uniform(-1.0, 1.0)).collect();
            // Wide never errors and has length s+m-1.
            let wide = conv1d(&s, &f, ConvKind::Wide).unwrap();
            prop_assert_eq!(wide.len(), s_len + m_len - 1);
            if s_len >= m_len {
                let narrow = conv1d(&s, &f, ConvKind::Narrow).unwrap();
                prop_assert_eq!(narrow.len(), s_len - m_len + 1);
                prop_assert_eq!(narrow.as_slice(), &wide[m_len - 1..s_len]);
            } else {
                prop_assert!(conv1d(&s, &f, ConvKind::Narrow).is_err());
            }
        }

        #[test]
        fn linear_in_the_filter(
            seed in 0u64..1000,
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let mut rng = Rng::new(seed);
            let s: Vec<f64> = (0..12).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let f1: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let f2: Vec<f64> = (0..4).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let combo: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
            let lhs = conv1d(&s, &combo, ConvKind::Wide).unwrap();
            let c1 = conv1d(&s, &f1, ConvKind::Wide).unwrap();
            let c2 = conv1d(&s, &f2, ConvKind::Wide).unwrap();
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * c1[i] + b * c2[i])).abs() < 1e-10);
            }
        }

        #[test]
        fn fft_and_direct_paths_agree(
            d in 1usize..6,
            s_len in 1usize..20,
            m_len in 1usize..8,
            seed in 0u64..1000,
        ) {
            let mut rng = Rng::new(seed);
            let input = rand_mat(&mut rng, d, s_len);
            let weights = rand_mat(&mut rng, d, m_len);
            let filter = FilterMat::new(&weights).unwrap();
            let direct = conv_rows_direct(&input, &filter, ConvKind::Wide).unwrap();
            let fast = conv_rows_fft(&input, &filter, ConvKind::Wide).unwrap();
            for (x, y) in direct.as_slice().iter().zip(fast.as_slice()) {
                prop_assert!((x - y).abs() < 1e-8);
            }
        }
    }
}
