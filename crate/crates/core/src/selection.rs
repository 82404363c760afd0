//! Choosing the trusted subset of frequency bins.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{FrequencyBinSet, Spectrogram};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinScore {
    pub bin: usize,
    pub score: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Oracle,
    Kurtosis,
    Coherence,
}

impl Rule {
    /// Which side of the score is trusted.
    pub fn direction(self) -> Direction {
        match self {
            Rule::Oracle | Rule::Kurtosis => Direction::Greater,
            Rule::Coherence => Direction::Less,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Oracle => "oracle",
            Rule::Kurtosis => "kurtosis",
            Rule::Coherence => "coherence",
        }
    }
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(Rule::Oracle),
            "kurtosis" => Ok(Rule::Kurtosis),
            "coherence" => Ok(Rule::Coherence),
            other => Err(Error::InvalidParameter(format!("unknown selection rule `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Greater,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum SelectionMode {
    Threshold(f64),
    Percentage(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub rule: Rule,
    pub mode: SelectionMode,
}

impl SelectionConfig {
    pub fn new(rule: Rule, mode: SelectionMode) -> Result<Self> {
        if let SelectionMode::Percentage(p) = mode {
            check_percentage(p)?;
        }
        Ok(Self { rule, mode })
    }

    pub fn select(&self, scores: &[BinScore], dft_len: usize) -> Result<FrequencyBinSet> {
        let dir = self.rule.direction();
        match self.mode {
            SelectionMode::Threshold(beta) => select_by_threshold(scores, beta, dir, dft_len),
            SelectionMode::Percentage(p) => select_by_percentage(scores, p, dir, dft_len),
        }
    }
}

fn check_percentage(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 100.0) {
        return Err(Error::InvalidParameter(format!("percentage {p} outside (0, 100]")));
    }
    Ok(())
}

/// Per-bin ratio of target to noise energy on the left channel, over bins
/// `1..M/2`. A bin without noise energy scores `+inf`.
pub fn oracle_snr(spec_target: &Spectrogram, spec_noise: &Spectrogram) -> Result<Vec<BinScore>> {
    if !spec_target.same_shape(spec_noise) {
        return Err(Error::InvalidParameter("target and noise spectrograms differ in shape".into()));
    }
    let m = spec_target.dft_len();
    Ok((1..m / 2)
        .map(|k| {
            let s: f64 = spec_target.bin(k).iter().map(|z| z.norm_sqr()).sum();
            let y: f64 = spec_noise.bin(k).iter().map(|z| z.norm_sqr()).sum();
            let score = if y > 0.0 { s / y } else { f64::INFINITY };
            BinScore { bin: k, score, valid: true }
        })
        .collect())
}

/// Normalized kurtosis of a complex sequence with sample means in place of
/// expectations: `(E|X|^4 - |E X^2|^2) / (E|X|^2)^2 - 2`.
pub fn kurtosis(samples: &[Complex64]) -> Result<f64> {
    if samples.len() < 4 {
        return Err(Error::InvalidParameter(format!("kurtosis needs >= 4 samples, got {}", samples.len())));
    }
    let n = samples.len() as f64;
    let power = samples.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    if !(power > 0.0) {
        return Err(Error::Degenerate("kurtosis of a zero-power sequence".into()));
    }
    let fourth = samples.iter().map(|z| z.norm_sqr().powi(2)).sum::<f64>() / n;
    let pseudo = samples.iter().map(|z| z * z).sum::<Complex64>() / n;
    Ok((fourth - pseudo.norm_sqr()) / (power * power) - 2.0)
}

/// `|sum y1 conj(y2)| / (||y1|| ||y2||)`, in `[0, 1]`.
pub fn coherence(y1: &[Complex64], y2: &[Complex64]) -> Result<f64> {
    if y1.len() != y2.len() || y1.is_empty() {
        return Err(Error::DimensionMismatch {
            what: "coherence inputs",
            expected: y1.len(),
            found: y2.len(),
        });
    }
    let e1: f64 = y1.iter().map(|z| z.norm_sqr()).sum();
    let e2: f64 = y2.iter().map(|z| z.norm_sqr()).sum();
    if !(e1 > 0.0 && e2 > 0.0) {
        return Err(Error::Degenerate("coherence of a zero-energy sequence".into()));
    }
    let cross: Complex64 = y1.iter().zip(y2).map(|(a, b)| a * b.conj()).sum();
    let scale = match e1 * e2 {
        p if p.is_finite() && p > 0.0 => p.sqrt(),
        _ => e1.sqrt() * e2.sqrt(),
    };
    Ok((cross.norm() / scale).min(1.0))
}

/// Kurtosis of the left-channel coefficients of each bin `1..M/2` across
/// frames. Bins flagged in `valid` (indexed `0..=M/2`) as false, and bins
/// where kurtosis is undefined, are marked invalid.
pub fn kurtosis_scores(spec_left: &Spectrogram, valid: Option<&[bool]>) -> Vec<BinScore> {
    let m = spec_left.dft_len();
    (1..m / 2)
        .map(|k| {
            let flag = valid.is_none_or(|v| v.get(k).copied().unwrap_or(false));
            match kurtosis(spec_left.bin(k)) {
                Ok(score) => BinScore { bin: k, score, valid: flag },
                Err(_) => BinScore { bin: k, score: f64::NAN, valid: false },
            }
        })
        .collect()
}

/// Coherence of the separated outputs per bin `1..M/2`; inputs are indexed
/// by bin over `0..=M/2`.
pub fn coherence_scores(y1: &[Vec<Complex64>], y2: &[Vec<Complex64>], valid: Option<&[bool]>) -> Vec<BinScore> {
    let half = y1.len().min(y2.len()).saturating_sub(1);
    (1..half)
        .map(|k| {
            let flag = valid.is_none_or(|v| v.get(k).copied().unwrap_or(false));
            match coherence(&y1[k], &y2[k]) {
                Ok(score) => BinScore { bin: k, score, valid: flag },
                Err(_) => BinScore { bin: k, score: f64::NAN, valid: false },
            }
        })
        .collect()
}

/// Marks scores invalid wherever `valid[bin]` is false.
pub fn mask_invalid(scores: &mut [BinScore], valid: &[bool]) {
    for s in scores {
        if !valid.get(s.bin).copied().unwrap_or(false) {
            s.valid = false;
        }
    }
}

fn usable(s: &BinScore, dft_len: usize) -> bool {
    s.valid && !s.score.is_nan() && s.bin >= 1 && s.bin < dft_len / 2
}

fn passes(score: f64, beta: f64, dir: Direction) -> bool {
    match dir {
        Direction::Greater => score > beta,
        Direction::Less => score < beta,
    }
}

/// Bins whose score is strictly beyond `beta` in the given direction.
pub fn select_by_threshold(
    scores: &[BinScore],
    beta: f64,
    dir: Direction,
    dft_len: usize,
) -> Result<FrequencyBinSet> {
    let mut bins: Vec<usize> = scores
        .iter()
        .filter(|s| usable(s, dft_len) && passes(s.score, beta, dir))
        .map(|s| s.bin)
        .collect();
    bins.dedup();
    FrequencyBinSet::new(dft_len, bins)
}

/// The `ceil(p/100 * #valid)` best bins, ties going to the lower bin index.
pub fn select_by_percentage(
    scores: &[BinScore],
    percentage: f64,
    dir: Direction,
    dft_len: usize,
) -> Result<FrequencyBinSet> {
    check_percentage(percentage)?;
    let mut ranked: Vec<&BinScore> = scores.iter().filter(|s| usable(s, dft_len)).collect();
    if ranked.is_empty() {
        return Err(Error::NoValidBins);
    }
    ranked.sort_by(|a, b| {
        let by_score = match dir {
            Direction::Greater => b.score.total_cmp(&a.score),
            Direction::Less => a.score.total_cmp(&b.score),
        };
        by_score.then(a.bin.cmp(&b.bin))
    });
    let count = selection_count(percentage, ranked.len());
    FrequencyBinSet::new(dft_len, ranked[..count].iter().map(|s| s.bin).collect())
}

/// `ceil(p * n / 100)` with a guard against round-off just above an integer.
pub fn selection_count(percentage: f64, n: usize) -> usize {
    let exact = percentage * n as f64 / 100.0;
    let count = (exact - 1e-9 * exact.max(1.0)).ceil() as usize;
    count.clamp(1, n)
}
