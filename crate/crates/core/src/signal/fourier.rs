use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{stack_re_im, FrequencyBinSet};
use crate::error::{Error, Result};

/// Matrix-free realified partial DFT `[Re(F_S); Im(F_S)]` and its transpose.
///
/// The forward DFT uses the kernel `exp(-i 2π k n / M)` without
/// normalization. The transpose is evaluated by zero-filling a spectrum on
/// `S`, completing it Hermitian-symmetrically and applying the inverse FFT
/// scaled by `M/2`.
#[derive(Clone)]
pub struct PartialFourier {
    bins: FrequencyBinSet,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PartialFourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PartialFourier").field("bins", &self.bins).finish()
    }
}

impl PartialFourier {
    pub fn new(bins: FrequencyBinSet) -> Self {
        let mut planner = FftPlanner::new();
        let m = bins.dft_len();
        Self {
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
            bins,
        }
    }

    pub fn bins(&self) -> &FrequencyBinSet {
        &self.bins
    }

    pub fn dft_len(&self) -> usize {
        self.bins.dft_len()
    }

    /// Number of real rows, `2|S|`.
    pub fn rows(&self) -> usize {
        2 * self.bins.len()
    }

    fn check_len(&self, what: &'static str, expected: usize, found: usize) -> Result<()> {
        if expected != found {
            return Err(Error::DimensionMismatch { what, expected, found });
        }
        Ok(())
    }

    /// `(F h)` restricted to the rows in `S`.
    pub fn forward(&self, h: &[f64]) -> Result<Vec<Complex64>> {
        self.check_len("filter length", self.dft_len(), h.len())?;
        let mut buf: Vec<Complex64> = h.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        Ok(self.bins.indices().iter().map(|&k| buf[k]).collect())
    }

    pub fn realified_forward(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(stack_re_im(&self.forward(h)?))
    }

    /// `F_Sᵀ r` for a real vector `r` of length `2|S|`.
    pub fn realified_adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.check_len("adjoint input", self.rows(), r.len())?;
        let m = self.dft_len();
        let s = self.bins.len();
        let mut d = vec![Complex64::new(0.0, 0.0); m];
        for (j, &k) in self.bins.indices().iter().enumerate() {
            let z = Complex64::new(r[j], r[s + j]);
            d[k] = z;
            d[m - k] = z.conj();
        }
        self.inverse.process(&mut d);
        // ifft carries 1/M, the symmetric completion doubles: scale by M/2.
        let scale = (m as f64 / 2.0) / m as f64;
        Ok(d.iter().map(|z| z.re * scale).collect())
    }
}

pub fn partial_dft_forward(h: &[f64], bins: &FrequencyBinSet) -> Result<Vec<Complex64>> {
    PartialFourier::new(bins.clone()).forward(h)
}

pub fn realified_forward(h: &[f64], bins: &FrequencyBinSet) -> Result<Vec<f64>> {
    PartialFourier::new(bins.clone()).realified_forward(h)
}

pub fn realified_adjoint(r: &[f64], bins: &FrequencyBinSet) -> Result<Vec<f64>> {
    PartialFourier::new(bins.clone()).realified_adjoint(r)
}

/// Full unnormalized DFT of a real sequence.
pub fn full_spectrum(h: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = h.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(h.len()).process(&mut buf);
    buf
}

/// Real sequence of length `dft_len` whose DFT equals `half` on bins
/// `0..=M/2` and its conjugate mirror elsewhere. Imaginary parts of the DC
/// and Nyquist entries are ignored.
pub fn hermitian_inverse(half: &[Complex64], dft_len: usize) -> Result<Vec<f64>> {
    if dft_len % 2 != 0 || half.len() != dft_len / 2 + 1 {
        return Err(Error::DimensionMismatch {
            what: "half spectrum",
            expected: dft_len / 2 + 1,
            found: half.len(),
        });
    }
    let mut d = vec![Complex64::new(0.0, 0.0); dft_len];
    d[0] = Complex64::new(half[0].re, 0.0);
    d[dft_len / 2] = Complex64::new(half[dft_len / 2].re, 0.0);
    for k in 1..dft_len / 2 {
        d[k] = half[k];
        d[dft_len - k] = half[k].conj();
    }
    FftPlanner::new().plan_fft_inverse(dft_len).process(&mut d);
    let scale = 1.0 / dft_len as f64;
    Ok(d.iter().map(|z| z.re * scale).collect())
}
