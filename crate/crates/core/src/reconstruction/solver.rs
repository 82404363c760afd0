use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{soft_threshold_into, WeightVector};
use crate::error::{Error, Result};
use crate::signal::{IncompleteRtf, PartialFourier};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub alpha0: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha_min: 1e-7,
            alpha_max: 1e3,
            tol: 1e-3,
            max_iters: 5000,
            alpha0: 1.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max && self.alpha_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step bounds [{}, {}] must satisfy 0 < min <= max",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {} must be positive", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidParameter(format!("initial step {} must be positive", self.alpha0)));
        }
        Ok(())
    }

    pub fn clip(&self, alpha: f64) -> f64 {
        alpha.clamp(self.alpha_min, self.alpha_max)
    }
}

/// Iterate of the proximal-gradient method together with the quantities
/// the update maintains incrementally.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub h: Vec<f64>,
    /// `F_S h - f`
    pub residual: Vec<f64>,
    /// `F_Sᵀ residual`
    pub grad: Vec<f64>,
    pub alpha: f64,
    pub iter: usize,
    pub crit: f64,
}

impl SolverState {
    /// Indices of nonzero coefficients.
    pub fn active_set(&self) -> Vec<usize> {
        self.h.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect()
    }

    pub fn nnz(&self) -> usize {
        self.h.iter().filter(|v| **v != 0.0).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub objective: f64,
    pub crit: f64,
    pub alpha: f64,
    pub nnz: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// The update stopped moving before the criterion was met.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub state: SolverState,
    pub trace: Vec<TraceRow>,
    pub stop: StopReason,
}

impl Solution {
    pub fn taps(&self) -> &[f64] {
        &self.state.h
    }
}

/// Weighted LASSO `min ½‖F_S h - f‖² + ‖w ⊙ h‖₁` over real `h` of length M.
#[derive(Debug, Clone)]
pub struct WeightedLasso {
    op: PartialFourier,
    rhs: Vec<f64>,
    weights: WeightVector,
}

impl WeightedLasso {
    pub fn new(rtf: &IncompleteRtf, weights: WeightVector) -> Result<Self> {
        if rtf.bins().is_empty() {
            return Err(Error::EmptySelection);
        }
        let m = rtf.bins().dft_len();
        if weights.len() != m {
            return Err(Error::DimensionMismatch {
                what: "weight vector",
                expected: m,
                found: weights.len(),
            });
        }
        Ok(Self {
            op: PartialFourier::new(rtf.bins().clone()),
            rhs: rtf.realify().rhs().to_vec(),
            weights,
        })
    }

    pub fn operator(&self) -> &PartialFourier {
        &self.op
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn dft_len(&self) -> usize {
        self.op.dft_len()
    }

    pub fn residual(&self, h: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.op.realified_forward(h)?;
        for (ri, fi) in r.iter_mut().zip(&self.rhs) {
            *ri -= fi;
        }
        Ok(r)
    }

    pub fn objective(&self, h: &[f64]) -> Result<f64> {
        let r = self.residual(h)?;
        Ok(objective_from(&r, h, self.weights.as_slice()))
    }

    /// State at `h0` with `r` and the gradient evaluated from scratch.
    pub fn state_at(&self, h0: &[f64], alpha: f64) -> Result<SolverState> {
        let residual = self.residual(h0)?;
        let grad = self.op.realified_adjoint(&residual)?;
        let mut state = SolverState {
            h: h0.to_vec(),
            residual,
            grad,
            alpha,
            iter: 0,
            crit: 0.0,
        };
        state.crit = optimality_crit(&state, &self.weights);
        Ok(state)
    }

    /// One proximal-gradient step with the residual updated incrementally
    /// and the next step length from the Barzilai-Borwein ratio.
    pub fn iterate(&self, state: &SolverState, cfg: &SolverConfig) -> Result<SolverState> {
        let m = self.dft_len();
        let alpha = state.alpha;
        let mut u: Vec<f64> = state.h.iter().zip(&state.grad).map(|(h, g)| h - alpha * g).collect();
        soft_threshold_into(&mut u, self.weights.as_slice(), alpha);
        let h_next = u;
        let delta: Vec<f64> = h_next.iter().zip(&state.h).map(|(a, b)| a - b).collect();
        let b = self.op.realified_forward(&delta)?;
        let residual: Vec<f64> = state.residual.iter().zip(&b).map(|(r, bi)| r + bi).collect();
        let next_alpha = bb_ratio(&delta, &b).map_or(alpha, |ratio| cfg.clip(ratio));
        let grad = self.op.realified_adjoint(&residual)?;

        let iter = state.iter + 1;
        if h_next.iter().chain(&grad).chain(&residual).any(|v| !v.is_finite()) || !next_alpha.is_finite() {
            return Err(Error::NonFinite { iter });
        }
        debug_assert_eq!(h_next.len(), m);
        let mut next = SolverState {
            h: h_next,
            residual,
            grad,
            alpha: next_alpha,
            iter,
            crit: 0.0,
        };
        next.crit = optimality_crit(&next, &self.weights);
        Ok(next)
    }

    fn converged(&self, state: &SolverState, tol: f64) -> bool {
        if state.crit > tol {
            return false;
        }
        // The active-set criterion says nothing about taps outside Γ; require
        // dual feasibility there too.
        state
            .h
            .iter()
            .zip(&state.grad)
            .zip(self.weights.as_slice())
            .all(|((h, g), w)| *h != 0.0 || g.abs() <= w + tol)
    }

    pub fn solve(&self, cfg: &SolverConfig, h0: Option<&[f64]>) -> Result<Solution> {
        cfg.validate()?;
        let zeros;
        let h0 = match h0 {
            Some(h) => h,
            None => {
                zeros = vec![0.0; self.dft_len()];
                &zeros
            }
        };
        let mut state = self.state_at(h0, cfg.clip(cfg.alpha0))?;
        let mut trace = Vec::new();
        let stop = loop {
            trace.push(TraceRow {
                iter: state.iter,
                objective: objective_from(&state.residual, &state.h, self.weights.as_slice()),
                crit: state.crit,
                alpha: state.alpha,
                nnz: state.nnz(),
            });
            if self.converged(&state, cfg.tol) {
                break StopReason::Converged;
            }
            if state.iter >= cfg.max_iters {
                break StopReason::MaxIterations;
            }
            let next = self.iterate(&state, cfg)?;
            let moved = next.h != state.h;
            state = next;
            if !moved {
                break StopReason::Stalled;
            }
        };
        Ok(Solution { state, trace, stop })
    }
}

fn objective_from(residual: &[f64], h: &[f64], w: &[f64]) -> f64 {
    0.5 * residual.iter().map(|r| r * r).sum::<f64>() + h.iter().zip(w).map(|(h, w)| (w * h).abs()).sum::<f64>()
}

/// `‖Δh‖² / ‖F_S Δh‖²`, or `None` when `Δh = 0`.
fn bb_ratio(delta: &[f64], image: &[f64]) -> Option<f64> {
    let num: f64 = delta.iter().map(|d| d * d).sum();
    if num == 0.0 {
        return None;
    }
    let den: f64 = image.iter().map(|b| b * b).sum();
    Some(if den > 0.0 { num / den } else { f64::INFINITY })
}

/// Barzilai-Borwein step for the displacement `delta_h`, clipped to the
/// configured bounds. A zero displacement keeps `previous`.
pub fn bb_step(delta_h: &[f64], op: &PartialFourier, cfg: &SolverConfig, previous: f64) -> Result<f64> {
    let image = op.realified_forward(delta_h)?;
    Ok(bb_ratio(delta_h, &image).map_or(previous, |r| cfg.clip(r)))
}

/// Squared norm of `F_Sᵀ(F_S h - f) + w ⊙ sign(h)` restricted to the active set.
pub fn optimality_crit(state: &SolverState, w: &WeightVector) -> f64 {
    state
        .h
        .iter()
        .zip(&state.grad)
        .zip(w.as_slice())
        .filter(|((h, _), _)| **h != 0.0)
        .map(|((h, g), w)| (g + w * h.signum()).powi(2))
        .sum::<f64>()
        + 0.0
}

/// Optimality check with slack: on the active set the stationarity residual
/// is within `slack` in the max norm, off it the gradient magnitude is at
/// most `w + slack`.
pub fn check_kkt(problem: &WeightedLasso, h: &[f64], slack: f64) -> Result<bool> {
    if !(slack > 0.0) {
        return Err(Error::InvalidParameter(format!("slack {slack} must be positive")));
    }
    let grad = problem.op.realified_adjoint(&problem.residual(h)?)?;
    Ok(h.iter().zip(&grad).zip(problem.weights.as_slice()).all(|((h, g), w)| {
        if *h != 0.0 {
            (g + w * h.signum()).abs() <= slack
        } else {
            g.abs() <= w + slack
        }
    }))
}

pub fn sparsa_solve(
    rtf: &IncompleteRtf,
    w: &WeightVector,
    cfg: &SolverConfig,
    h0: Option<&[f64]>,
) -> Result<Solution> {
    WeightedLasso::new(rtf, w.clone())?.solve(cfg, h0)
}

/// Writes the iteration trace as CSV with columns
/// `iter,objective,crit,alpha,nnz`.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for row in trace {
        writer.serialize(row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv: {other:?}")),
    }
}
