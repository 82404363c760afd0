//! Conventional RTF estimators: time-domain least squares, the plain
//! frequency-domain ratio, the nonstationarity-based estimator, and the
//! ratio read off an externally supplied demixing matrix.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{ImpulseResponse, Spectrogram, StereoRecording};

/// Condition number above which the LS correlation matrix is rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Ls,
    Fd,
    Nsfd,
    ExternalDemix,
    /// Exact spectrum of a known relative response.
    Truth,
}

impl EstimatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Ls => "ls",
            EstimatorKind::Fd => "fd",
            EstimatorKind::Nsfd => "nsfd",
            EstimatorKind::ExternalDemix => "external-demix",
            EstimatorKind::Truth => "truth",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ls" => Ok(Self::Ls),
            "fd" => Ok(Self::Fd),
            "nsfd" => Ok(Self::Nsfd),
            "external-demix" => Ok(Self::ExternalDemix),
            "truth" => Ok(Self::Truth),
            other => Err(Error::InvalidParameter(format!("unknown estimator `{other}`"))),
        }
    }
}

/// Per-bin RTF values over bins `0..=M/2`.
///
/// `delay` is the lag already contained in the values (nonzero when the
/// right channel was delayed before estimation, as with demixing matrices
/// computed on `x_R(n - D)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtfEstimate {
    dft_len: usize,
    values: Vec<Complex64>,
    valid: Vec<bool>,
    source: EstimatorKind,
    delay: usize,
}

impl RtfEstimate {
    pub fn new(
        dft_len: usize,
        values: Vec<Complex64>,
        valid: Vec<bool>,
        source: EstimatorKind,
        delay: usize,
    ) -> Result<Self> {
        if dft_len < 4 || dft_len % 2 != 0 {
            return Err(Error::InvalidParameter(format!("dft length {dft_len} must be even and >= 4")));
        }
        for (what, len) in [("estimate values", values.len()), ("validity flags", valid.len())] {
            if len != dft_len / 2 + 1 {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: dft_len / 2 + 1,
                    found: len,
                });
            }
        }
        let mut values = values;
        let mut valid = valid;
        for (z, ok) in values.iter_mut().zip(valid.iter_mut()) {
            if !(z.re.is_finite() && z.im.is_finite()) {
                *z = Complex64::new(0.0, 0.0);
                *ok = false;
            }
        }
        Ok(Self {
            dft_len,
            values,
            valid,
            source,
            delay,
        })
    }

    pub fn dft_len(&self) -> usize {
        self.dft_len
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn is_valid(&self, k: usize) -> bool {
        self.valid.get(k).copied().unwrap_or(false)
    }

    pub fn source(&self) -> EstimatorKind {
        self.source
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    /// Value at bin `k` re-referenced so that the corresponding impulse
    /// response is delayed by `target_delay` samples.
    pub fn delay_compensated(&self, k: usize, target_delay: usize) -> Complex64 {
        let shift = target_delay as f64 - self.delay as f64;
        let theta = 2.0 * PI * k as f64 / self.dft_len as f64;
        self.values[k] * Complex64::from_polar(1.0, -theta * shift)
    }

    /// Indices of valid bins in `1..M/2`.
    pub fn valid_interior_bins(&self) -> Vec<usize> {
        (1..self.dft_len / 2).filter(|&k| self.valid[k]).collect()
    }
}

/// Least-squares FIR estimate of the relative response from a noise-free
/// recording, using the tall zero-padded convolution matrix of the left
/// channel and the right channel delayed by `delay` samples.
///
/// The right-channel vector is zero-extended to the `N + L - 1` rows of the
/// convolution matrix.
pub fn estimate_ls_time(rec: &StereoRecording, filter_len: usize, delay: usize) -> Result<ImpulseResponse> {
    let n = rec.len();
    if filter_len == 0 {
        return Err(Error::InvalidParameter("filter length must be at least 1".into()));
    }
    if n < filter_len {
        return Err(Error::SignalTooShort { len: n, needed: filter_len });
    }
    if delay >= n {
        return Err(Error::InvalidParameter(format!("delay {delay} must be below {n}")));
    }
    let x = rec.left().samples();
    let y = rec.right().samples();
    let scale = 1.0 / n as f64;

    let autocorr: Vec<f64> = (0..filter_len)
        .map(|lag| x.iter().zip(&x[lag..]).map(|(a, b)| a * b).sum::<f64>() * scale)
        .collect();
    // p_j = (1/N) sum_m x(m) y(m + j - D)
    let cross: Vec<f64> = (0..filter_len)
        .map(|j| {
            x.iter()
                .enumerate()
                .filter_map(|(m, xm)| {
                    (m + j).checked_sub(delay).and_then(|idx| y.get(idx)).map(|yv| xm * yv)
                })
                .sum::<f64>()
                * scale
        })
        .collect();

    let r = DMatrix::from_fn(filter_len, filter_len, |i, j| autocorr[i.abs_diff(j)]);
    let eig = r.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::RankDeficient { condition });
    }
    let chol = r
        .cholesky()
        .ok_or(Error::RankDeficient { condition })?;
    let h = chol.solve(&DVector::from_vec(cross));
    ImpulseResponse::new(h.iter().copied().collect(), delay)
}

fn check_pair(spec_l: &Spectrogram, spec_r: &Spectrogram) -> Result<()> {
    if !spec_l.same_shape(spec_r) {
        return Err(Error::InvalidParameter(
            "left and right spectrograms differ in shape or analysis parameters".into(),
        ));
    }
    Ok(())
}

/// Ratio of averaged cross- and auto-spectra, per bin.
pub fn estimate_fd(spec_l: &Spectrogram, spec_r: &Spectrogram) -> Result<RtfEstimate> {
    check_pair(spec_l, spec_r)?;
    let m = spec_l.dft_len();
    let (values, valid) = (0..=m / 2)
        .map(|k| {
            let (num, den) = spec_l.bin(k).iter().zip(spec_r.bin(k)).fold(
                (Complex64::new(0.0, 0.0), 0.0),
                |(num, den), (l, r)| (num + l.conj() * r, den + l.norm_sqr()),
            );
            if den > 0.0 {
                (num / den, true)
            } else {
                (Complex64::new(0.0, 0.0), false)
            }
        })
        .unzip();
    RtfEstimate::new(m, values, valid, EstimatorKind::Fd, 0)
}

/// Block-wise sample PSDs: `cross[k][p]` is the mean of `conj(X_L) X_R` over
/// block `p`, `auto[k][p]` the mean of `|X_L|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdFrames {
    dft_len: usize,
    cross: Vec<Vec<Complex64>>,
    auto: Vec<Vec<f64>>,
}

impl PsdFrames {
    pub fn new(dft_len: usize, cross: Vec<Vec<Complex64>>, auto: Vec<Vec<f64>>) -> Result<Self> {
        if cross.len() != dft_len / 2 + 1 || auto.len() != cross.len() {
            return Err(Error::DimensionMismatch {
                what: "psd bins",
                expected: dft_len / 2 + 1,
                found: cross.len().min(auto.len()),
            });
        }
        let blocks = cross[0].len();
        if blocks < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 blocks, got {blocks}")));
        }
        if cross.iter().any(|c| c.len() != blocks)
            || auto.iter().any(|a| a.len() != blocks || a.iter().any(|v| *v < 0.0))
        {
            return Err(Error::InvalidParameter("ragged or negative psd blocks".into()));
        }
        Ok(Self { dft_len, cross, auto })
    }

    pub fn blocks(&self) -> usize {
        self.cross[0].len()
    }

    pub fn dft_len(&self) -> usize {
        self.dft_len
    }

    pub fn cross(&self, k: usize) -> &[Complex64] {
        &self.cross[k]
    }

    pub fn auto(&self, k: usize) -> &[f64] {
        &self.auto[k]
    }
}

/// Number of NSFD blocks for `frames` STFT frames when each block should
/// span about `block_samples` samples. Never below 2.
pub fn nsfd_block_count(frames: usize, hop: usize, block_samples: usize) -> usize {
    let frames_per_block = block_samples.div_ceil(hop).max(1);
    (frames / frames_per_block).max(2)
}

/// Splits the frames into `blocks` contiguous, near-equal blocks and
/// averages within each.
pub fn compute_psd_frames(spec_l: &Spectrogram, spec_r: &Spectrogram, blocks: usize) -> Result<PsdFrames> {
    check_pair(spec_l, spec_r)?;
    if blocks < 2 {
        return Err(Error::InvalidParameter(format!(
            "{blocks} block(s) leave the per-bin system underdetermined; need at least 2"
        )));
    }
    let frames = spec_l.frames();
    if blocks > frames {
        return Err(Error::InvalidParameter(format!("{blocks} blocks exceed {frames} frames")));
    }
    let bounds: Vec<usize> = (0..=blocks).map(|p| p * frames / blocks).collect();
    let m = spec_l.dft_len();
    let mut cross = Vec::with_capacity(m / 2 + 1);
    let mut auto = Vec::with_capacity(m / 2 + 1);
    for k in 0..=m / 2 {
        let (l, r) = (spec_l.bin(k), spec_r.bin(k));
        let (c, a) = bounds
            .windows(2)
            .map(|w| {
                let len = (w[1] - w[0]) as f64;
                let c: Complex64 = (w[0]..w[1]).map(|f| l[f].conj() * r[f]).sum();
                let a: f64 = (w[0]..w[1]).map(|f| l[f].norm_sqr()).sum();
                (c / len, a / len)
            })
            .unzip();
        cross.push(c);
        auto.push(a);
    }
    PsdFrames::new(m, cross, auto)
}

/// Per-bin least-squares fit of `cross_p = H * auto_p + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsfdFit {
    pub rtf: Complex64,
    pub nuisance: Complex64,
    pub residual: f64,
}

/// Solves the per-bin system `[auto_p, 1] [H; c] = cross_p` over the blocks
/// by least squares. Bins whose auto-PSD does not vary are flagged invalid.
pub fn estimate_nsfd(psd: &PsdFrames) -> Result<(RtfEstimate, Vec<Option<NsfdFit>>)> {
    let fits: Vec<Option<NsfdFit>> = (0..=psd.dft_len / 2)
        .map(|k| fit_bin(psd.auto(k), psd.cross(k)))
        .collect();
    let values = fits
        .iter()
        .map(|f| f.map_or(Complex64::new(0.0, 0.0), |f| f.rtf))
        .collect();
    let valid = fits.iter().map(Option::is_some).collect();
    let est = RtfEstimate::new(psd.dft_len, values, valid, EstimatorKind::Nsfd, 0)?;
    Ok((est, fits))
}

fn fit_bin(auto: &[f64], cross: &[Complex64]) -> Option<NsfdFit> {
    let p = auto.len() as f64;
    let hi = auto.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = auto.iter().copied().fold(f64::INFINITY, f64::min);
    if !(hi - lo > 1e-12 * hi.abs()) {
        return None;
    }
    // Normal equations of the P x 2 design [a_p, 1], solved in centered form.
    let mean_a = auto.iter().sum::<f64>() / p;
    let mean_b = cross.iter().sum::<Complex64>() / p;
    let saa: f64 = auto.iter().map(|a| (a - mean_a).powi(2)).sum();
    let sab: Complex64 = auto.iter().zip(cross).map(|(a, b)| (b - mean_b) * (a - mean_a)).sum();
    let rtf = sab / saa;
    let nuisance = mean_b - rtf * mean_a;
    let residual = auto
        .iter()
        .zip(cross)
        .map(|(a, b)| (b - rtf * a - nuisance).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (rtf.re.is_finite() && rtf.im.is_finite()).then_some(NsfdFit {
        rtf,
        nuisance,
        residual,
    })
}

/// 2x2 complex demixing matrix of one frequency bin, row-major.
pub type Demixing = [[Complex64; 2]; 2];

/// RTF read off externally computed demixing matrices over bins `0..=M/2`:
/// the first row nulls the target, so `H = -W11 / W12`. `delay` is the lag
/// applied to the right channel before separation.
pub fn rtf_from_demixing(w: &[Demixing], delay: usize) -> Result<RtfEstimate> {
    if w.len() < 3 {
        return Err(Error::InvalidParameter("need demixing matrices for bins 0..=M/2".into()));
    }
    let dft_len = 2 * (w.len() - 1);
    let (values, valid) = w
        .iter()
        .map(|m| {
            let (w11, w12) = (m[0][0], m[0][1]);
            if w12.norm_sqr() > 0.0 {
                (-w11 / w12, true)
            } else {
                (Complex64::new(0.0, 0.0), false)
            }
        })
        .unzip();
    RtfEstimate::new(dft_len, values, valid, EstimatorKind::ExternalDemix, delay)
}

/// Applies per-bin demixing matrices to the (delayed) mixture spectrograms,
/// returning the two separated outputs on bins `0..=M/2`.
pub fn apply_demixing(
    w: &[Demixing],
    spec_l: &Spectrogram,
    spec_r: &Spectrogram,
) -> Result<(Vec<Vec<Complex64>>, Vec<Vec<Complex64>>)> {
    check_pair(spec_l, spec_r)?;
    if w.len() != spec_l.dft_len() / 2 + 1 {
        return Err(Error::DimensionMismatch {
            what: "demixing bins",
            expected: spec_l.dft_len() / 2 + 1,
            found: w.len(),
        });
    }
    Ok(w.iter()
        .enumerate()
        .map(|(k, m)| {
            spec_l
                .bin(k)
                .iter()
                .zip(spec_r.bin(k))
                .map(|(l, r)| (m[0][0] * l + m[0][1] * r, m[1][0] * l + m[1][1] * r))
                .unzip::<_, _, Vec<_>, Vec<_>>()
        })
        .unzip())
}
