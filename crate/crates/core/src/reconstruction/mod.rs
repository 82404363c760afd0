//! Sparse reconstruction of the relative impulse response from an
//! incomplete RTF, via a weighted LASSO solved by proximal gradient steps
//! with Barzilai-Borwein step lengths.

mod solver;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::RtfEstimate;
use crate::signal::{hermitian_inverse, FrequencyBinSet, ImpulseResponse, IncompleteRtf};

pub use solver::{
    bb_step, check_kkt, optimality_crit, sparsa_solve, write_trace_csv, Solution, SolverConfig,
    SolverState, StopReason, TraceRow, WeightedLasso,
};

/// Nonnegative per-tap penalty weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("weight {i} = {} is not a finite nonnegative value", w[i])));
        }
        Ok(Self(w))
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * c).collect())
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Parameters of `w_j = c1 * exp(c2 * |j - center|^c3)` for `j = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightProfileParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub center: usize,
    pub len: usize,
}

impl Default for WeightProfileParams {
    fn default() -> Self {
        Self {
            c1: 0.1,
            c2: 0.11,
            c3: 0.3,
            center: 100,
            len: 2048,
        }
    }
}

/// Weights smallest at the expected direct-path tap and growing with the
/// distance from it.
pub fn weight_profile(p: &WeightProfileParams) -> Result<WeightVector> {
    for (name, c) in [("c1", p.c1), ("c2", p.c2), ("c3", p.c3)] {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {c} must be positive")));
        }
    }
    if p.center >= p.len {
        return Err(Error::InvalidParameter(format!("center {} outside 0..{}", p.center, p.len)));
    }
    let w: Vec<f64> = (0..p.len)
        .map(|j| p.c1 * (p.c2 * (j.abs_diff(p.center) as f64).powf(p.c3)).exp())
        .collect();
    if let Some(j) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::WeightOverflow(format!(
            "c1={}, c2={}, c3={} overflow at tap {j} (distance {} from center {})",
            p.c1,
            p.c2,
            p.c3,
            j.abs_diff(p.center),
            p.center
        )));
    }
    WeightVector::new(w)
}

/// Elementwise `sign(u) * max(|u| - a, 0)`.
pub fn soft_threshold(u: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    if u.len() != a.len() {
        return Err(Error::DimensionMismatch {
            what: "threshold vector",
            expected: u.len(),
            found: a.len(),
        });
    }
    if a.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("thresholds must be nonnegative".into()));
    }
    let mut out = u.to_vec();
    soft_threshold_into(&mut out, a, 1.0);
    Ok(out)
}

pub(crate) fn soft_threshold_into(u: &mut [f64], a: &[f64], scale: f64) {
    for (x, a) in u.iter_mut().zip(a) {
        let mag = x.abs() - scale * a;
        *x = if mag > 0.0 { x.signum() * mag } else { 0.0 };
    }
}

fn check_selection(estimate: &RtfEstimate, bins: &FrequencyBinSet) -> Result<()> {
    if bins.is_empty() {
        return Err(Error::EmptySelection);
    }
    if bins.dft_len() != estimate.dft_len() {
        return Err(Error::DimensionMismatch {
            what: "bin set dft length",
            expected: estimate.dft_len(),
            found: bins.dft_len(),
        });
    }
    if let Some(&bin) = bins.indices().iter().find(|&&k| !estimate.is_valid(k)) {
        return Err(Error::InvalidBin { bin });
    }
    Ok(())
}

/// Incomplete RTF on `bins`, re-referenced to a response delayed by `delay`.
pub fn incomplete_rtf(estimate: &RtfEstimate, bins: &FrequencyBinSet, delay: usize) -> Result<IncompleteRtf> {
    check_selection(estimate, bins)?;
    let values = bins
        .indices()
        .iter()
        .map(|&k| estimate.delay_compensated(k, delay))
        .collect();
    IncompleteRtf::new(bins.clone(), values)
}

/// Full solver output for [`reconstruct_rtf`].
pub fn reconstruct_rtf_detailed(
    estimate: &RtfEstimate,
    bins: &FrequencyBinSet,
    params: &WeightProfileParams,
    cfg: &SolverConfig,
) -> Result<Solution> {
    if params.len != estimate.dft_len() {
        return Err(Error::DimensionMismatch {
            what: "weight profile length",
            expected: estimate.dft_len(),
            found: params.len,
        });
    }
    let rtf = incomplete_rtf(estimate, bins, params.center)?;
    let w = weight_profile(params)?;
    sparsa_solve(&rtf, &w, cfg, None)
}

/// Sparse approximation of the relative impulse response (delayed by
/// `params.center`) from the estimate restricted to `bins`.
pub fn reconstruct_rtf(
    estimate: &RtfEstimate,
    bins: &FrequencyBinSet,
    params: &WeightProfileParams,
    cfg: &SolverConfig,
) -> Result<ImpulseResponse> {
    let sol = reconstruct_rtf_detailed(estimate, bins, params, cfg)?;
    ImpulseResponse::new(sol.state.h, params.center)
}

/// Time-domain filter of a complete estimate: inverse DFT over all bins with
/// invalid bins zeroed.
pub fn baseline_filter(estimate: &RtfEstimate, delay: usize) -> Result<ImpulseResponse> {
    masked_filter(estimate, None, delay)
}

/// Like [`baseline_filter`], but interior bins outside `bins` are zeroed.
/// DC and Nyquist keep the estimate, so selecting every valid bin
/// reproduces the baseline.
pub fn masked_filter(estimate: &RtfEstimate, bins: Option<&FrequencyBinSet>, delay: usize) -> Result<ImpulseResponse> {
    let m = estimate.dft_len();
    let half: Vec<Complex64> = (0..=m / 2)
        .map(|k| {
            let kept = estimate.is_valid(k) && (k == 0 || k == m / 2 || bins.is_none_or(|b| b.contains(k)));
            if kept {
                estimate.delay_compensated(k, delay)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    ImpulseResponse::new(hermitian_inverse(&half, m)?, delay)
}
