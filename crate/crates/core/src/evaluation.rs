//! Blocking-filter metrics and the trial protocol.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::pipeline::{bin_scores, build_filter, estimate_rtf, PipelineConfig, SideInfo};
use crate::selection::{Rule, SelectionConfig, SelectionMode};
use crate::signal::{convolve_slices, ImpulseResponse, StereoRecording, TimeSignal};

/// Reported SNRs never go below this value.
pub const SNR_FLOOR_DB: f64 = -120.0;

/// Target and noise images on both microphones.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTruth {
    pub s_l: TimeSignal,
    pub s_r: TimeSignal,
    pub y_l: TimeSignal,
    pub y_r: TimeSignal,
    pub h_rel_true: Option<ImpulseResponse>,
}

impl ScenarioTruth {
    pub fn new(
        s_l: TimeSignal,
        s_r: TimeSignal,
        y_l: TimeSignal,
        y_r: TimeSignal,
        h_rel_true: Option<ImpulseResponse>,
    ) -> Result<Self> {
        let n = s_l.len();
        for (what, sig) in [("s_r", &s_r), ("y_l", &y_l), ("y_r", &y_r)] {
            if sig.len() != n {
                return Err(Error::DimensionMismatch { what, expected: n, found: sig.len() });
            }
            if sig.rate() != s_l.rate() {
                return Err(Error::InvalidSignal(format!("{what} rate {} differs from {}", sig.rate(), s_l.rate())));
            }
        }
        Ok(Self { s_l, s_r, y_l, y_r, h_rel_true })
    }

    pub fn len(&self) -> usize {
        self.s_l.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_l.is_empty()
    }

    /// `x = s + y` on both channels.
    pub fn mixture(&self) -> Result<StereoRecording> {
        let add = |a: &TimeSignal, b: &TimeSignal| {
            TimeSignal::new(a.samples().iter().zip(b.samples()).map(|(a, b)| a + b).collect(), a.rate())
        };
        StereoRecording::new(add(&self.s_l, &self.y_l)?, add(&self.s_r, &self.y_r)?)
    }

    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        Ok(Self {
            s_l: self.s_l.slice(range.clone())?,
            s_r: self.s_r.slice(range.clone())?,
            y_l: self.y_l.slice(range.clone())?,
            y_r: self.y_r.slice(range)?,
            h_rel_true: self.h_rel_true.clone(),
        })
    }

    /// All four components multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let sc = |x: &TimeSignal| TimeSignal::new(x.samples().iter().map(|v| v * c).collect(), x.rate());
        Ok(Self {
            s_l: sc(&self.s_l)?,
            s_r: sc(&self.s_r)?,
            y_l: sc(&self.y_l)?,
            y_r: sc(&self.y_r)?,
            h_rel_true: self.h_rel_true.clone(),
        })
    }
}

/// `(g * left)(n) - right(n - g.delay)` for `n` in `window`, where the
/// convolution runs over the whole signal.
fn leakage(g: &ImpulseResponse, left: &[f64], right: &[f64], window: Range<usize>) -> Vec<f64> {
    let start = window.start.saturating_sub(g.len().saturating_sub(1));
    let conv = convolve_slices(g.taps(), &left[start..window.end]);
    let d = g.delay();
    window
        .map(|n| {
            let r = if n >= d { right[n - d] } else { 0.0 };
            conv[n - start] - r
        })
        .collect()
}

/// Noise-reference output `z(n) = (g * x_L)(n) - x_R(n - D)` over the
/// recording length, with `D` the delay carried by `g`.
pub fn blocking_output(g: &ImpulseResponse, rec: &StereoRecording) -> Result<TimeSignal> {
    let z = leakage(g, rec.left().samples(), rec.right().samples(), 0..rec.len());
    TimeSignal::new(z, rec.rate())
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn ratio_db(num: f64, den: f64) -> Result<f64> {
    if den <= 0.0 {
        return Err(Error::Degenerate("zero noise energy in the SNR denominator".into()));
    }
    Ok(if num > 0.0 { 10.0 * (num / den).log10() } else { f64::NEG_INFINITY })
}

fn check_window(window: &Range<usize>, len: usize) -> Result<()> {
    if window.start >= window.end || window.end > len {
        return Err(Error::InvalidParameter(format!("window {window:?} outside 0..{len}")));
    }
    Ok(())
}

/// Input SNR over both microphones, in dB. Zero target energy gives `-inf`.
pub fn snr_in(truth: &ScenarioTruth) -> Result<f64> {
    snr_in_window(truth, 0..truth.len())
}

pub fn snr_in_window(truth: &ScenarioTruth, window: Range<usize>) -> Result<f64> {
    check_window(&window, truth.len())?;
    let w = |x: &TimeSignal| energy(&x.samples()[window.clone()]);
    ratio_db(w(&truth.s_l) + w(&truth.s_r), w(&truth.y_l) + w(&truth.y_r))
}

/// Output SNR of the blocking filter `g` over `window` (the whole signal if
/// `None`), floored at [`SNR_FLOOR_DB`].
pub fn snr_out(g: &ImpulseResponse, truth: &ScenarioTruth, window: Option<Range<usize>>) -> Result<f64> {
    let window = window.unwrap_or(0..truth.len());
    check_window(&window, truth.len())?;
    let num = energy(&leakage(g, truth.s_l.samples(), truth.s_r.samples(), window.clone()));
    let den = energy(&leakage(g, truth.y_l.samples(), truth.y_r.samples(), window));
    Ok(ratio_db(num, den)?.max(SNR_FLOOR_DB))
}

/// Start/end sample ranges of trials of `interval` samples starting every
/// `interval * (1 - overlap)` samples.
pub fn split_trials(len: usize, interval: usize, overlap: f64) -> Result<Vec<Range<usize>>> {
    if interval == 0 || interval > len {
        return Err(Error::InvalidParameter(format!("trial interval {interval} must be in 1..={len}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("overlap {overlap} outside [0, 1)")));
    }
    let step = ((interval as f64 * (1.0 - overlap)).round() as usize).max(1);
    let count = (len - interval) / step + 1;
    Ok((0..count).map(|i| i * step..i * step + interval).collect())
}

/// An estimator, optionally followed by bin selection and sparse
/// reconstruction. Without a rule the filter comes from the full estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Method {
    pub estimator: EstimatorKind,
    pub rule: Option<Rule>,
}

impl Method {
    pub fn baseline(estimator: EstimatorKind) -> Self {
        Self { estimator, rule: None }
    }

    pub fn sparse(estimator: EstimatorKind, rule: Rule) -> Self {
        Self { estimator, rule: Some(rule) }
    }

    pub fn tag(&self) -> String {
        match self.rule {
            None => self.estimator.as_str().to_string(),
            Some(r) => format!("{}+{}", self.estimator.as_str(), r.as_str()),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('+') {
            None => Ok(Self::baseline(s.parse()?)),
            Some((e, r)) => Ok(Self::sparse(e.parse()?, r.parse()?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub method: String,
    /// `None` for methods that do not select bins.
    pub percentage: Option<f64>,
    pub snr_in_db: f64,
    pub snr_out_db: f64,
    pub attenuation_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub trial: usize,
    pub method: String,
    pub percentage: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub percentage: Option<f64>,
    pub trials: usize,
    pub snr_in_db: f64,
    pub snr_out_db: f64,
    pub attenuation_db: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<TrialResult>,
    pub failures: Vec<FailedCell>,
}

fn cell_key(trial: usize, method: &str, percentage: Option<f64>) -> (usize, String, i64) {
    (trial, method.to_string(), percentage.map_or(-1, |p| (p * 1e6).round() as i64))
}

impl SweepTable {
    fn sort(&mut self) {
        self.rows.sort_by_key(|r| cell_key(r.trial, &r.method, r.percentage));
        self.failures.sort_by_key(|r| cell_key(r.trial, &r.method, r.percentage));
    }

    /// Per (method, percentage) means over successful trials, in dB.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut out: Vec<SummaryRow> = Vec::new();
        let mut rows: Vec<&TrialResult> = self.rows.iter().collect();
        rows.sort_by_key(|r| cell_key(0, &r.method, r.percentage));
        for r in rows {
            match out.last_mut() {
                Some(s) if s.method == r.method && s.percentage == r.percentage => {
                    s.trials += 1;
                    s.snr_in_db += r.snr_in_db;
                    s.snr_out_db += r.snr_out_db;
                    s.attenuation_db += r.attenuation_db;
                }
                _ => out.push(SummaryRow {
                    method: r.method.clone(),
                    percentage: r.percentage,
                    trials: 1,
                    snr_in_db: r.snr_in_db,
                    snr_out_db: r.snr_out_db,
                    attenuation_db: r.attenuation_db,
                }),
            }
        }
        for s in &mut out {
            let n = s.trials as f64;
            s.snr_in_db /= n;
            s.snr_out_db /= n;
            s.attenuation_db /= n;
        }
        out
    }

    /// Mean attenuation of one (method, percentage) cell across trials.
    pub fn mean_attenuation(&self, method: &str, percentage: Option<f64>) -> Option<f64> {
        self.summary()
            .into_iter()
            .find(|s| s.method == method && s.percentage == percentage)
            .map(|s| s.attenuation_db)
    }
}

/// Evaluates every method and percentage on one trial window. Failures
/// become [`FailedCell`]s.
pub fn run_trial(
    truth: &ScenarioTruth,
    trial: usize,
    window: Range<usize>,
    methods: &[Method],
    percentages: &[f64],
    cfg: &PipelineConfig,
) -> SweepTable {
    let mut table = SweepTable::default();
    let mut fail = |method: &Method, percentage: Option<f64>, e: Error| {
        table.failures.push(FailedCell { trial, method: method.tag(), percentage, error: e.to_string() });
    };
    let prepared = (|| {
        let part = truth.slice(window.clone())?;
        let rec = part.mixture()?;
        let snr_in = snr_in(&part)?;
        Ok::<_, Error>((part, rec, snr_in))
    })();
    let (part, rec, snr_in) = match prepared {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            for m in methods {
                let cells: Vec<Option<f64>> = if m.rule.is_some() { percentages.iter().map(|p| Some(*p)).collect() } else { vec![None] };
                for p in cells {
                    fail(m, p, Error::Degenerate(msg.clone()));
                }
            }
            return table;
        }
    };
    let side = SideInfo {
        truth: truth.h_rel_true.as_ref(),
        oracle: Some((&part.s_l, &part.y_l)),
        ..Default::default()
    };
    let mut rows = Vec::new();
    let mut evaluate = |method: &Method, percentage: Option<f64>, g: Result<ImpulseResponse>| {
        let result = g.and_then(|g| snr_out(&g, truth, Some(window.clone())));
        match result {
            Ok(snr_out_db) => rows.push(TrialResult {
                trial,
                method: method.tag(),
                percentage,
                snr_in_db: snr_in,
                snr_out_db,
                attenuation_db: snr_out_db - snr_in,
            }),
            Err(e) => fail(method, percentage, e),
        }
    };
    for method in methods {
        let estimate = estimate_rtf(&rec, method.estimator, cfg, &side);
        match method.rule {
            None => evaluate(method, None, estimate.and_then(|est| build_filter(&est, None, cfg))),
            Some(rule) => {
                let scored = estimate.and_then(|est| {
                    let scores = bin_scores(rule, &rec, &est, cfg, &side)?;
                    Ok((est, scores))
                });
                for &p in percentages {
                    let g = match &scored {
                        Ok((est, scores)) => SelectionConfig::new(rule, SelectionMode::Percentage(p))
                            .and_then(|sel| sel.select(scores, cfg.dft_len))
                            .and_then(|bins| build_filter(est, Some(&bins), cfg)),
                        Err(e) => Err(Error::Degenerate(e.to_string())),
                    };
                    evaluate(method, Some(p), g);
                }
            }
        }
    }
    table.rows = rows;
    table
}

/// Runs [`run_trial`] over all windows in parallel and merges the results in
/// a fixed order.
pub fn run_sweep(
    truth: &ScenarioTruth,
    trials: &[Range<usize>],
    methods: &[Method],
    percentages: &[f64],
    cfg: &PipelineConfig,
) -> SweepTable {
    let parts: Vec<SweepTable> = trials
        .par_iter()
        .enumerate()
        .map(|(i, w)| run_trial(truth, i, w.clone(), methods, percentages, cfg))
        .collect();
    let mut table = SweepTable::default();
    for p in parts {
        table.rows.extend(p.rows);
        table.failures.extend(p.failures);
    }
    table.sort();
    table
}
