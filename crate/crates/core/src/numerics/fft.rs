//! Iterative radix-2 FFT.
//!
//! Sized for the fast-convolution path: sequences are zero-padded to the next
//! power of two, which stays small for sentence-length inputs, so a plain
//! radix-2 decimation-in-time transform is enough. A [`FftPlan`] precomputes
//! the bit-reversal permutation and twiddle table once per length so that
//! per-row transforms of a matrix share them.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;

use crate::numerics::math;
use crate::{invalid_arg, Result};

/// Precomputed tables for transforms of one power-of-two length.
#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    rev: Vec<u32>,
    // twiddles[k] = exp(-2*pi*i*k/n) for k in 0..n/2
    twiddles: Vec<Complex64>,
}

impl FftPlan {
    /// Creates a plan for length `n`, which must be a power of two.
    pub fn new(n: usize) -> Result<FftPlan> {
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid_arg!("FFT length {n} is not a power of two"));
        }
        let bits = n.trailing_zeros().max(1);
        let rev = (0..n as u32)
            .map(|i| i.reverse_bits() >> (32 - bits))
            .collect::<Vec<_>>();
        let step = -2.0 * core::f64::consts::PI / n as f64;
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = step * k as f64;
                Complex64::new(math::cos(a), math::sin(a))
            })
            .collect();
        Ok(FftPlan { n, rev, twiddles })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// In-place forward transform; `buf.len()` must equal the plan length.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length does not match plan");
        for (i, &r) in self.rev.iter().enumerate() {
            let r = r as usize;
            if i < r {
                buf.swap(i, r);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for j in 0..half {
                    let w = self.twiddles[j * stride];
                    let a = buf[start + j];
                    let b = buf[start + j + half] * w;
                    buf[start + j] = a + b;
                    buf[start + j + half] = a - b;
                }
            }
            len *= 2;
        }
    }

    /// In-place inverse transform (includes the 1/n scale).
    pub fn inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.forward(buf);
        let scale = 1.0 / self.n as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

/// DFT of `x` zero-padded to length `n` (a power of two, `n >= x.len()`).
pub fn fft_real(x: &[f64], n: usize) -> Result<Vec<Complex64>> {
    if x.is_empty() {
        return Err(invalid_arg!("FFT input is empty"));
    }
    if n < x.len() {
        return Err(invalid_arg!(
            "FFT length {n} is shorter than the input ({})",
            x.len()
        ));
    }
    let plan = FftPlan::new(n)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (slot, &v) in buf.iter_mut().zip(x) {
        slot.re = v;
    }
    plan.forward(&mut buf);
    Ok(buf)
}

/// Inverse DFT; the length must be a power of two.
pub fn ifft(spectrum: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = FftPlan::new(spectrum.len())?;
    let mut buf = spectrum.to_vec();
    plan.inverse(&mut buf);
    Ok(buf)
}
