//! Estimation, scoring and filter construction for one stereo excerpt.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    apply_demixing, compute_psd_frames, estimate_fd, estimate_ls_time, estimate_nsfd, nsfd_block_count,
    rtf_from_demixing, Demixing, EstimatorKind, RtfEstimate,
};
use crate::reconstruction::{
    baseline_filter, reconstruct_rtf, SolverConfig, WeightProfileParams,
};
use crate::selection::{coherence_scores, kurtosis_scores, mask_invalid, oracle_snr, BinScore, Rule};
use crate::signal::{full_spectrum, stft, FrequencyBinSet, ImpulseResponse, Spectrogram, StereoRecording, TimeSignal, Window};

/// Shape parameters of the weight profile; its center and length come from
/// the pipeline's delay and DFT length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightShape {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for WeightShape {
    fn default() -> Self {
        Self {
            c1: 0.1,
            c2: 0.11,
            c3: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dft_len: usize,
    pub hop: usize,
    pub window: Window,
    /// Delay `D` of the reconstructed response, in samples.
    pub delay: usize,
    /// Samples per block for the nonstationarity-based estimator.
    pub nsfd_block_samples: usize,
    /// Taps of the time-domain least-squares estimate; the DFT length when
    /// absent.
    pub ls_filter_len: Option<usize>,
    pub weights: WeightShape,
    pub solver: SolverConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            dft_len: 2048,
            hop: 64,
            window: Window::default(),
            delay: 100,
            nsfd_block_samples: 1000,
            ls_filter_len: None,
            weights: WeightShape::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dft_len < 4 || self.dft_len % 2 != 0 {
            return Err(Error::config("pipeline.dft_len", format!("{} must be even and >= 4", self.dft_len)));
        }
        if self.hop == 0 || self.hop > self.dft_len {
            return Err(Error::config("pipeline.hop", format!("{} must be in 1..={}", self.hop, self.dft_len)));
        }
        if self.delay >= self.dft_len {
            return Err(Error::config("pipeline.delay", format!("{} must be below dft_len {}", self.delay, self.dft_len)));
        }
        if self.nsfd_block_samples == 0 {
            return Err(Error::config("pipeline.nsfd_block_samples", "must be positive"));
        }
        if let Some(l) = self.ls_filter_len {
            if l == 0 || l > self.dft_len {
                return Err(Error::config("pipeline.ls_filter_len", format!("{l} must be in 1..={}", self.dft_len)));
            }
        }
        self.solver
            .validate()
            .map_err(|e| Error::config("pipeline.solver", e.to_string()))?;
        crate::reconstruction::weight_profile(&self.weight_params())
            .map_err(|e| Error::config("pipeline.weights", e.to_string()))?;
        Ok(())
    }

    pub fn weight_params(&self) -> WeightProfileParams {
        WeightProfileParams {
            c1: self.weights.c1,
            c2: self.weights.c2,
            c3: self.weights.c3,
            center: self.delay,
            len: self.dft_len,
        }
    }

    pub fn spectrogram(&self, sig: &TimeSignal) -> Result<Spectrogram> {
        stft(sig, self.dft_len, self.hop, self.window)
    }
}

/// Inputs some estimators and rules need beyond the recording.
#[derive(Debug, Clone, Default)]
pub struct SideInfo<'a> {
    /// Per-bin demixing matrices computed on `x_L(n)`, `x_R(n - demix_delay)`.
    pub demixing: Option<&'a [Demixing]>,
    pub demix_delay: usize,
    /// Ground-truth relative response.
    pub truth: Option<&'a ImpulseResponse>,
    /// Target and noise images on the left channel.
    pub oracle: Option<(&'a TimeSignal, &'a TimeSignal)>,
}

/// RTF of an impulse response on the `dft_len`-point grid.
pub fn impulse_to_estimate(h: &ImpulseResponse, dft_len: usize, source: EstimatorKind) -> Result<RtfEstimate> {
    if h.len() > dft_len {
        return Err(Error::InvalidParameter(format!("{} taps exceed dft length {dft_len}", h.len())));
    }
    let mut taps = h.taps().to_vec();
    taps.resize(dft_len, 0.0);
    let spec = full_spectrum(&taps);
    RtfEstimate::new(dft_len, spec[..=dft_len / 2].to_vec(), vec![true; dft_len / 2 + 1], source, h.delay())
}

/// `x` delayed by `d` samples, keeping the length.
pub fn delayed(x: &TimeSignal, d: usize) -> Result<TimeSignal> {
    let n = x.len();
    let mut out = vec![0.0; n];
    if d < n {
        out[d..].copy_from_slice(&x.samples()[..n - d]);
    }
    TimeSignal::new(out, x.rate())
}

pub fn estimate_rtf(
    rec: &StereoRecording,
    kind: EstimatorKind,
    cfg: &PipelineConfig,
    side: &SideInfo<'_>,
) -> Result<RtfEstimate> {
    let m = cfg.dft_len;
    match kind {
        EstimatorKind::Ls => {
            let h = estimate_ls_time(rec, cfg.ls_filter_len.unwrap_or(m), cfg.delay)?;
            impulse_to_estimate(&h, m, EstimatorKind::Ls)
        }
        EstimatorKind::Fd => estimate_fd(&cfg.spectrogram(rec.left())?, &cfg.spectrogram(rec.right())?),
        EstimatorKind::Nsfd => {
            let (l, r) = (cfg.spectrogram(rec.left())?, cfg.spectrogram(rec.right())?);
            let blocks = nsfd_block_count(l.frames(), cfg.hop, cfg.nsfd_block_samples);
            Ok(estimate_nsfd(&compute_psd_frames(&l, &r, blocks)?)?.0)
        }
        EstimatorKind::ExternalDemix => {
            let w = side
                .demixing
                .ok_or_else(|| Error::InvalidParameter("external-demix estimation needs demixing matrices".into()))?;
            if w.len() != m / 2 + 1 {
                return Err(Error::DimensionMismatch {
                    what: "demixing bins",
                    expected: m / 2 + 1,
                    found: w.len(),
                });
            }
            rtf_from_demixing(w, side.demix_delay)
        }
        EstimatorKind::Truth => {
            let h = side
                .truth
                .ok_or_else(|| Error::InvalidParameter("truth estimate needs the true relative response".into()))?;
            impulse_to_estimate(h, m, EstimatorKind::Truth)
        }
    }
}

/// Per-bin scores for `rule` over bins `1..M/2`, with bins invalid in
/// `estimate` masked.
pub fn bin_scores(
    rule: Rule,
    rec: &StereoRecording,
    estimate: &RtfEstimate,
    cfg: &PipelineConfig,
    side: &SideInfo<'_>,
) -> Result<Vec<BinScore>> {
    let valid = estimate.valid();
    match rule {
        Rule::Oracle => {
            let (s, y) = side
                .oracle
                .ok_or_else(|| Error::InvalidParameter("oracle selection needs the target and noise components".into()))?;
            let mut scores = oracle_snr(&cfg.spectrogram(s)?, &cfg.spectrogram(y)?)?;
            mask_invalid(&mut scores, valid);
            Ok(scores)
        }
        Rule::Kurtosis => Ok(kurtosis_scores(&cfg.spectrogram(rec.left())?, Some(valid))),
        Rule::Coherence => {
            let w = side
                .demixing
                .ok_or_else(|| Error::InvalidParameter("coherence selection needs demixing matrices".into()))?;
            let l = cfg.spectrogram(rec.left())?;
            let r = cfg.spectrogram(&delayed(rec.right(), side.demix_delay)?)?;
            let (y1, y2) = apply_demixing(w, &l, &r)?;
            Ok(coherence_scores(&y1, &y2, Some(valid)))
        }
    }
}

/// Blocking filter from the full estimate, or from a sparse reconstruction
/// over `bins` when given.
pub fn build_filter(estimate: &RtfEstimate, bins: Option<&FrequencyBinSet>, cfg: &PipelineConfig) -> Result<ImpulseResponse> {
    match bins {
        None => baseline_filter(estimate, cfg.delay),
        Some(s) => reconstruct_rtf(estimate, s, &cfg.weight_params(), &cfg.solver),
    }
}
