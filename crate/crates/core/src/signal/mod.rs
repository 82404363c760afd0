//! Sampled signals, short-term spectra, and the partial-DFT measurement operator.

mod fourier;
pub mod wav;

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fourier::{
    full_spectrum, hermitian_inverse, partial_dft_forward, realified_adjoint, realified_forward,
    PartialFourier,
};

/// A real, uniformly sampled waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSignal {
    samples: Vec<f64>,
    rate: f64,
}

impl TimeSignal {
    pub fn new(samples: Vec<f64>, rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample rate {rate} must be positive")));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidSignal(format!("sample {i} is not finite")));
        }
        Ok(Self { samples, rate })
    }

    pub fn zeros(len: usize, rate: f64) -> Result<Self> {
        Self::new(vec![0.0; len], rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Copy of the samples in `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.start > range.end {
            return Err(Error::InvalidParameter(format!(
                "range {range:?} outside signal of length {}",
                self.len()
            )));
        }
        Ok(Self {
            samples: self.samples[range].to_vec(),
            rate: self.rate,
        })
    }
}

/// Left/right microphone pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoRecording {
    left: TimeSignal,
    right: TimeSignal,
}

impl StereoRecording {
    pub fn new(left: TimeSignal, right: TimeSignal) -> Result<Self> {
        if left.len() != right.len() {
            return Err(Error::DimensionMismatch {
                what: "right channel length",
                expected: left.len(),
                found: right.len(),
            });
        }
        if left.rate() != right.rate() {
            return Err(Error::InvalidSignal(format!(
                "channel rates differ: {} vs {}",
                left.rate(),
                right.rate()
            )));
        }
        Ok(Self { left, right })
    }

    pub fn left(&self) -> &TimeSignal {
        &self.left
    }

    pub fn right(&self) -> &TimeSignal {
        &self.right
    }

    pub fn len(&self) -> usize {
        self.left.len()
    }

    pub fn is_empty(&self) -> bool {
        self.left.is_empty()
    }

    pub fn rate(&self) -> f64 {
        self.left.rate()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self> {
        Ok(Self {
            left: self.left.slice(range.clone())?,
            right: self.right.slice(range)?,
        })
    }
}

/// Real FIR filter. `delay` records the integer lag (in samples) that was
/// folded into the taps, so a filter estimating the relative response
/// delayed by `delay` is compared against the right channel delayed by the
/// same amount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseResponse {
    taps: Vec<f64>,
    delay: usize,
}

impl ImpulseResponse {
    pub fn new(taps: Vec<f64>, delay: usize) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidParameter("impulse response has no taps".into()));
        }
        if let Some(i) = taps.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidSignal(format!("tap {i} is not finite")));
        }
        Ok(Self { taps, delay })
    }

    /// Unit impulse of length `len` at tap `at`.
    pub fn impulse(len: usize, at: usize) -> Result<Self> {
        if at >= len {
            return Err(Error::InvalidParameter(format!("impulse position {at} >= length {len}")));
        }
        let mut taps = vec![0.0; len];
        taps[at] = 1.0;
        Self::new(taps, 0)
    }

    pub fn zeros(len: usize, delay: usize) -> Result<Self> {
        Self::new(vec![0.0; len], delay)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn into_taps(self) -> Vec<f64> {
        self.taps
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn with_delay(mut self, delay: usize) -> Self {
        self.delay = delay;
        self
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Number of exactly nonzero taps.
    pub fn nnz(&self) -> usize {
        self.taps.iter().filter(|t| **t != 0.0).count()
    }
}

/// Analysis window applied to every STFT frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Window {
    Rectangular,
    Hann,
    #[default]
    SqrtHann,
}

impl Window {
    /// Periodic window coefficients of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        let hann = |n: usize| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos();
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len).map(hann).collect(),
            Window::SqrtHann => (0..len).map(|n| hann(n).sqrt()).collect(),
        }
    }
}

/// Complex short-term spectra, stored bin-major: `bin(k)` is the sequence of
/// coefficients of bin `k` across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    values: Vec<Complex64>,
    dft_len: usize,
    frames: usize,
    hop: usize,
    window: Window,
}

impl Spectrogram {
    /// Builds a spectrogram from bin-major rows (`rows[k][frame]`).
    pub fn from_bins(rows: Vec<Vec<Complex64>>, hop: usize, window: Window) -> Result<Self> {
        let dft_len = rows.len();
        if dft_len == 0 || dft_len % 2 != 0 {
            return Err(Error::InvalidParameter(format!("dft length {dft_len} must be even and positive")));
        }
        if hop == 0 {
            return Err(Error::InvalidParameter("hop must be at least 1".into()));
        }
        let frames = rows[0].len();
        let mut values = Vec::with_capacity(dft_len * frames);
        for row in rows {
            if row.len() != frames {
                return Err(Error::DimensionMismatch {
                    what: "spectrogram frames",
                    expected: frames,
                    found: row.len(),
                });
            }
            if row.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidSignal("spectrogram value not finite".into()));
            }
            values.extend(row);
        }
        Ok(Self {
            values,
            dft_len,
            frames,
            hop,
            window,
        })
    }

    pub fn dft_len(&self) -> usize {
        self.dft_len
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn bin(&self, k: usize) -> &[Complex64] {
        &self.values[k * self.frames..(k + 1) * self.frames]
    }

    pub fn get(&self, k: usize, frame: usize) -> Complex64 {
        self.values[k * self.frames + frame]
    }

    pub fn same_shape(&self, other: &Spectrogram) -> bool {
        self.dft_len == other.dft_len
            && self.frames == other.frames
            && self.hop == other.hop
            && self.window == other.window
    }
}

/// Number of frames `stft` produces for a signal of `len` samples.
pub fn frame_count(len: usize, dft_len: usize, hop: usize) -> usize {
    if len < dft_len {
        0
    } else {
        1 + (len - dft_len).div_ceil(hop)
    }
}

/// Short-term DFT. Frame `l` starts at sample `l * hop`; the last frame is
/// zero-padded past the end of the signal.
pub fn stft(sig: &TimeSignal, dft_len: usize, hop: usize, window: Window) -> Result<Spectrogram> {
    if dft_len == 0 || dft_len % 2 != 0 {
        return Err(Error::InvalidParameter(format!("dft length {dft_len} must be even and positive")));
    }
    if hop == 0 || hop > dft_len {
        return Err(Error::InvalidParameter(format!("hop {hop} must lie in 1..={dft_len}")));
    }
    if sig.len() < dft_len {
        return Err(Error::SignalTooShort {
            len: sig.len(),
            needed: dft_len,
        });
    }
    let frames = frame_count(sig.len(), dft_len, hop);
    let win = window.coefficients(dft_len);
    let fft = FftPlanner::new().plan_fft_forward(dft_len);
    let samples = sig.samples();

    let mut values = vec![Complex64::new(0.0, 0.0); dft_len * frames];
    let mut buf = vec![Complex64::new(0.0, 0.0); dft_len];
    for l in 0..frames {
        let start = l * hop;
        for (n, slot) in buf.iter_mut().enumerate() {
            let x = samples.get(start + n).copied().unwrap_or(0.0);
            *slot = Complex64::new(x * win[n], 0.0);
        }
        fft.process(&mut buf);
        for (k, z) in buf.iter().enumerate() {
            values[k * frames + l] = *z;
        }
    }
    Ok(Spectrogram {
        values,
        dft_len,
        frames,
        hop,
        window,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMode {
    /// `len(h) + len(x) - 1` output samples.
    Full,
    /// Full convolution truncated to `len(x)` samples.
    Truncated,
}

const DIRECT_CONVOLUTION_LIMIT: usize = 1 << 18;

/// Linear convolution `h * x`.
pub fn convolve(h: &ImpulseResponse, sig: &TimeSignal, mode: ConvolutionMode) -> Result<TimeSignal> {
    let mut out = convolve_slices(h.taps(), sig.samples());
    if mode == ConvolutionMode::Truncated {
        out.truncate(sig.len());
    }
    TimeSignal::new(out, sig.rate())
}

/// Full linear convolution of two real sequences. Falls back to an FFT
/// product once the direct sum gets expensive.
pub fn convolve_slices(h: &[f64], x: &[f64]) -> Vec<f64> {
    if h.is_empty() || x.is_empty() {
        return Vec::new();
    }
    let out_len = h.len() + x.len() - 1;
    if h.len().min(x.len()) <= 32 || h.len() * x.len() <= DIRECT_CONVOLUTION_LIMIT {
        let mut out = vec![0.0; out_len];
        for (i, &hi) in h.iter().enumerate() {
            if hi == 0.0 {
                continue;
            }
            for (o, &xj) in out[i..].iter_mut().zip(x) {
                *o += hi * xj;
            }
        }
        return out;
    }
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |v: &[f64]| {
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        for (slot, &s) in b.iter_mut().zip(v) {
            slot.re = s;
        }
        b
    };
    let mut a = pad(h);
    let mut b = pad(x);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (ai, bi) in a.iter_mut().zip(&b) {
        *ai *= bi;
    }
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..out_len].iter().map(|z| z.re * scale).collect()
}

/// Bin indices `k` with `1 <= k <= M/2 - 1`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyBinSet {
    dft_len: usize,
    indices: Vec<usize>,
}

impl FrequencyBinSet {
    pub fn new(dft_len: usize, mut indices: Vec<usize>) -> Result<Self> {
        if dft_len < 4 || dft_len % 2 != 0 {
            return Err(Error::InvalidBinSet(format!("dft length {dft_len} must be even and >= 4")));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidBinSet("duplicate bin index".into()));
        }
        if let Some(&k) = indices.iter().find(|&&k| k == 0 || k >= dft_len / 2) {
            return Err(Error::InvalidBinSet(format!(
                "bin {k} outside 1..={}",
                dft_len / 2 - 1
            )));
        }
        Ok(Self { dft_len, indices })
    }

    /// All admissible bins `1..M/2`.
    pub fn all(dft_len: usize) -> Result<Self> {
        Self::new(dft_len, (1..dft_len / 2).collect())
    }

    pub fn dft_len(&self) -> usize {
        self.dft_len
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    pub fn is_subset(&self, other: &FrequencyBinSet) -> bool {
        self.indices.iter().all(|&k| other.contains(k))
    }
}

/// RTF values known on a subset of bins.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompleteRtf {
    bins: FrequencyBinSet,
    values: Vec<Complex64>,
}

impl IncompleteRtf {
    pub fn new(bins: FrequencyBinSet, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != bins.len() {
            return Err(Error::DimensionMismatch {
                what: "incomplete RTF values",
                expected: bins.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidSignal("RTF value not finite".into()));
        }
        Ok(Self { bins, values })
    }

    pub fn bins(&self) -> &FrequencyBinSet {
        &self.bins
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn realify(&self) -> RealifiedSystem {
        RealifiedSystem {
            rhs: stack_re_im(&self.values),
            bins: self.bins.clone(),
        }
    }
}

/// Right-hand side `[Re(f); Im(f)]` of the real-valued measurement system.
#[derive(Debug, Clone, PartialEq)]
pub struct RealifiedSystem {
    rhs: Vec<f64>,
    bins: FrequencyBinSet,
}

impl RealifiedSystem {
    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn bins(&self) -> &FrequencyBinSet {
        &self.bins
    }
}

/// Stacks real parts followed by imaginary parts.
pub fn realify(f: &[Complex64], bins: &FrequencyBinSet) -> Result<RealifiedSystem> {
    if f.len() != bins.len() {
        return Err(Error::DimensionMismatch {
            what: "realify input",
            expected: bins.len(),
            found: f.len(),
        });
    }
    Ok(RealifiedSystem {
        rhs: stack_re_im(f),
        bins: bins.clone(),
    })
}

pub(crate) fn stack_re_im(f: &[Complex64]) -> Vec<f64> {
    f.iter().map(|z| z.re).chain(f.iter().map(|z| z.im)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn time_signal_rejects_bad_input() {
        assert!(TimeSignal::new(vec![0.0], 0.0).is_err());
        assert!(TimeSignal::new(vec![f64::NAN], 16000.0).is_err());
        assert!(TimeSignal::new(vec![1.0, f64::INFINITY], 16000.0).is_err());
    }

    #[test]
    fn stereo_needs_matching_channels() {
        let a = TimeSignal::zeros(4, 8000.0).unwrap();
        let b = TimeSignal::zeros(5, 8000.0).unwrap();
        let c = TimeSignal::zeros(4, 16000.0).unwrap();
        assert!(StereoRecording::new(a.clone(), b).is_err());
        assert!(StereoRecording::new(a, c).is_err());
    }

    #[test]
    fn stft_of_zero_signal_is_zero() {
        let sig = TimeSignal::zeros(100, 8000.0).unwrap();
        let spec = stft(&sig, 16, 4, Window::Hann).unwrap();
        assert!(spec.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn stft_of_impulse_is_flat() {
        let mut x = vec![0.0; 64];
        x[0] = 1.0;
        let sig = TimeSignal::new(x, 8000.0).unwrap();
        let spec = stft(&sig, 16, 8, Window::Rectangular).unwrap();
        for k in 0..16 {
            assert!((spec.get(k, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn stft_cosine_concentrates_in_its_bins() {
        let m = 32;
        let x: Vec<f64> = (0..m)
            .map(|n| (2.0 * PI * 3.0 * n as f64 / m as f64).cos())
            .collect();
        let sig = TimeSignal::new(x, 8000.0).unwrap();
        let spec = stft(&sig, m, m, Window::Rectangular).unwrap();
        assert_eq!(spec.frames(), 1);
        for k in 0..m {
            let v = spec.get(k, 0);
            if k == 3 || k == m - 3 {
                assert!((v - Complex64::new(m as f64 / 2.0, 0.0)).norm() < 1e-9);
            } else {
                assert!(v.norm() < 1e-9, "bin {k} leaked {v}");
            }
        }
    }

    #[test]
    fn stft_frame_count_and_tail_padding() {
        let sig = TimeSignal::new((0..70).map(|n| n as f64).collect(), 1.0).unwrap();
        let spec = stft(&sig, 16, 8, Window::Rectangular).unwrap();
        // starts 0, 8, ..., 56; frame at 56 covers 56..72 with two padded zeros
        assert_eq!(spec.frames(), 8);
        let expected_dc: f64 = (56..70).map(|n| n as f64).sum();
        assert!((spec.get(0, 7).re - expected_dc).abs() < 1e-9);
        assert!(stft(&TimeSignal::zeros(10, 1.0).unwrap(), 16, 8, Window::Hann).is_err());
        assert!(stft(&sig, 16, 17, Window::Hann).is_err());
    }

    fn direct_convolution(h: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; h.len() + x.len() - 1];
        for n in 0..out.len() {
            for (i, &hi) in h.iter().enumerate() {
                if n >= i && n - i < x.len() {
                    out[n] += hi * x[n - i];
                }
            }
        }
        out
    }

    #[test]
    fn convolve_identity_and_shift() {
        let sig = TimeSignal::new(vec![1.0, -2.0, 3.0, 0.5], 1.0).unwrap();
        let id = ImpulseResponse::impulse(1, 0).unwrap();
        assert_eq!(convolve(&id, &sig, ConvolutionMode::Full).unwrap(), sig);
        let shift = ImpulseResponse::impulse(3, 2).unwrap();
        let out = convolve(&shift, &sig, ConvolutionMode::Full).unwrap();
        assert_eq!(out.samples(), &[0.0, 0.0, 1.0, -2.0, 3.0, 0.5]);
        let trunc = convolve(&shift, &sig, ConvolutionMode::Truncated).unwrap();
        assert_eq!(trunc.samples(), &[0.0, 0.0, 1.0, -2.0]);
    }

    #[test]
    fn convolve_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = ImpulseResponse::new(vec![0.5, -0.25], 0).unwrap();
        let out = convolve(&h, &TimeSignal::new(x.clone(), 1.0).unwrap(), ConvolutionMode::Full).unwrap();
        let oracle = direct_convolution(&[0.5, -0.25], &x);
        let scale = oracle.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (a, b) in out.samples().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = convolve_slices(&h, &x);
        let oracle = direct_convolution(&h, &x);
        let scale = oracle.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in fast.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn bin_set_excludes_dc_and_nyquist() {
        assert!(FrequencyBinSet::new(8, vec![0]).is_err());
        assert!(FrequencyBinSet::new(8, vec![4]).is_err());
        assert!(FrequencyBinSet::new(8, vec![1, 1]).is_err());
        let s = FrequencyBinSet::new(8, vec![3, 1]).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert_eq!(FrequencyBinSet::all(8).unwrap().indices(), &[1, 2, 3]);
    }

    #[test]
    fn realify_stacks_parts() {
        let bins1 = FrequencyBinSet::new(8, vec![1]).unwrap();
        let bins2 = FrequencyBinSet::new(8, vec![1, 2]).unwrap();
        assert_eq!(realify(&[Complex64::new(1.0, 2.0)], &bins1).unwrap().rhs(), &[1.0, 2.0]);
        let f = [Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
        assert_eq!(realify(&f, &bins2).unwrap().rhs(), &[0.0, 0.0, 1.0, -1.0]);
        let real = [Complex64::new(3.0, 0.0), Complex64::new(-1.0, 0.0)];
        assert!(realify(&real, &bins2).unwrap().rhs()[2..].iter().all(|v| *v == 0.0));
        assert!(realify(&f, &bins1).is_err());
    }
}
