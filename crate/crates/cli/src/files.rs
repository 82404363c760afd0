//! Versioned JSON documents exchanged between subcommands.

use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sparse_rtf::estimators::{EstimatorKind, RtfEstimate};
use sparse_rtf::reconstruction::StopReason;
use sparse_rtf::selection::{BinScore, SelectionMode};
use sparse_rtf::signal::{ImpulseResponse, Window};
use sparse_rtf::{Error, Result, Rule};

pub const ESTIMATE_SCHEMA: &str = "sparse-rtf/estimate/v1";
pub const TRUTH_SCHEMA: &str = "sparse-rtf/truth/v1";
pub const FILTER_SCHEMA: &str = "sparse-rtf/filter/v1";
pub const DEMIXING_SCHEMA: &str = "sparse-rtf/demixing/v1";

const DFT_SIGN: &str = "X[k] = sum_n x[n] exp(-i 2 pi k n / M)";
const DELAY_RULE: &str = "values carry `delay` samples of lag; filters delayed by D use value * exp(-i 2 pi k (D - delay) / M)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conventions {
    pub dft_sign: String,
    pub delay_compensation: String,
}

impl Default for Conventions {
    fn default() -> Self {
        Self {
            dft_sign: DFT_SIGN.into(),
            delay_compensation: DELAY_RULE.into(),
        }
    }
}

impl Conventions {
    fn check(&self) -> Result<()> {
        if *self != Self::default() {
            return Err(Error::config("conventions", "file was written with different DFT or delay conventions"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinValue {
    pub k: usize,
    pub re: f64,
    pub im: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedScores {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kurtosis: Option<Vec<BinScore>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherence: Option<Vec<BinScore>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub schema: String,
    pub dft_len: usize,
    pub delay: usize,
    pub source: EstimatorKind,
    pub conventions: Conventions,
    pub bins: Vec<BinValue>,
    #[serde(default)]
    pub scores: EmbeddedScores,
}

impl EstimateFile {
    pub fn new(est: &RtfEstimate, scores: EmbeddedScores) -> Self {
        Self {
            schema: ESTIMATE_SCHEMA.into(),
            dft_len: est.dft_len(),
            delay: est.delay(),
            source: est.source(),
            conventions: Conventions::default(),
            bins: est
                .values()
                .iter()
                .zip(est.valid())
                .enumerate()
                .map(|(k, (z, v))| BinValue { k, re: z.re, im: z.im, valid: *v })
                .collect(),
            scores,
        }
    }

    pub fn estimate(&self) -> Result<RtfEstimate> {
        check_schema(&self.schema, ESTIMATE_SCHEMA)?;
        self.conventions.check()?;
        if self.bins.iter().enumerate().any(|(i, b)| b.k != i) {
            return Err(Error::config("bins", "entries must list k = 0, 1, ... in order"));
        }
        RtfEstimate::new(
            self.dft_len,
            self.bins.iter().map(|b| Complex64::new(b.re, b.im)).collect(),
            self.bins.iter().map(|b| b.valid).collect(),
            self.source,
            self.delay,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Taps {
    pub delay: usize,
    pub taps: Vec<f64>,
}

impl From<&ImpulseResponse> for Taps {
    fn from(h: &ImpulseResponse) -> Self {
        Self {
            delay: h.delay(),
            taps: h.taps().to_vec(),
        }
    }
}

impl Taps {
    pub fn response(&self) -> Result<ImpulseResponse> {
        ImpulseResponse::new(self.taps.clone(), self.delay)
    }
}

/// Simulator-only side information for oracle selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema: String,
    pub dft_len: usize,
    pub hop: usize,
    pub window: Window,
    pub snr_in_db: f64,
    pub oracle_snr: Vec<BinScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_rel_true: Option<Taps>,
}

impl TruthFile {
    pub fn validate(&self) -> Result<()> {
        check_schema(&self.schema, TRUTH_SCHEMA)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub rule: Rule,
    #[serde(flatten)]
    pub mode: SelectionMode,
    pub bins: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverRecord {
    pub stop: StopReason,
    pub iterations: usize,
    pub crit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterFile {
    pub schema: String,
    pub dft_len: usize,
    pub conventions: Conventions,
    pub source: EstimatorKind,
    #[serde(flatten)]
    pub filter: Taps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverRecord>,
}

impl FilterFile {
    pub fn response(&self) -> Result<ImpulseResponse> {
        check_schema(&self.schema, FILTER_SCHEMA)?;
        self.conventions.check()?;
        self.filter.response()
    }
}

/// Per-bin 2x2 demixing matrices, rows `[[w11, w12], [w21, w22]]` as
/// `[re, im]` pairs, computed on `x_L(n)` and `x_R(n - delay)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemixingFile {
    pub schema: String,
    pub delay: usize,
    pub bins: Vec<[[[f64; 2]; 2]; 2]>,
}

impl DemixingFile {
    pub fn matrices(&self) -> Result<Vec<sparse_rtf::estimators::Demixing>> {
        check_schema(&self.schema, DEMIXING_SCHEMA)?;
        Ok(self
            .bins
            .iter()
            .map(|m| m.map(|row| row.map(|[re, im]| Complex64::new(re, im))))
            .collect())
    }
}

fn check_schema(found: &str, want: &str) -> Result<()> {
    if found != want {
        return Err(Error::config("schema", format!("expected `{want}`, found `{found}`")));
    }
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
