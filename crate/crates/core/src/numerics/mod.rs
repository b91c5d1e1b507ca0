//! Dense matrix storage, a seeded RNG and a radix-2 FFT.
//!
//! Everything here is `f64`; the finite-difference gradient checks need the
//! headroom. Transcendentals are routed through [`libm`] (see [`math`]) so a
//! given seed reproduces bit-identical runs on every platform.

pub mod fft;
pub mod mat;
pub mod math;
pub mod rng;

pub use fft::{fft_real, ifft, FftPlan};
pub use mat::{tanh_map, Mat};
pub use rng::Rng;
