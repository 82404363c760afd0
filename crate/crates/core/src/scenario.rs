//! Scenario construction: source signals, impulse response pairs, and
//! mixing at a prescribed input SNR with the components retained.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::ScenarioTruth;
use crate::pipeline::PipelineConfig;
use crate::signal::wav::{read_wav, WavAudio};
use crate::signal::{convolve_slices, full_spectrum, hermitian_inverse, ImpulseResponse, StereoRecording, TimeSignal};

/// Random sparse impulse response on an exponential envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticRirParams {
    pub length: usize,
    pub direct_delay: usize,
    /// Envelope decay per sample.
    pub decay_rate: f64,
    /// Fraction of taps after the direct path that are nonzero.
    pub density: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SyntheticRirParams {
    pub fn validate(&self) -> Result<()> {
        if self.direct_delay >= self.length {
            return Err(Error::InvalidParameter(format!(
                "direct delay {} outside 0..{}",
                self.direct_delay, self.length
            )));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!("decay rate {} must be positive", self.decay_rate)));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter(format!("density {} outside (0, 1]", self.density)));
        }
        Ok(())
    }
}

/// Unit tap at `direct_delay`, followed by `round(density * tail)` taps at
/// random positions with amplitudes uniform in `[-1, 1]` times
/// `exp(-decay_rate * (i - direct_delay))`.
pub fn synth_rir(params: &SyntheticRirParams) -> Result<ImpulseResponse> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.unwrap_or(0));
    let tail = params.length - params.direct_delay - 1;
    let count = ((params.density * tail as f64).round() as usize).min(tail);
    let mut taps = vec![0.0; params.length];
    taps[params.direct_delay] = 1.0;
    let mut positions = sample(&mut rng, tail, count).into_vec();
    positions.sort_unstable();
    for p in positions {
        let offset = p + 1;
        let u: f64 = rng.random_range(-1.0..=1.0);
        taps[params.direct_delay + offset] = u * (-params.decay_rate * offset as f64).exp();
    }
    ImpulseResponse::new(taps, 0)
}

/// Relative response `H_R / H_L` on the `dft_len`-point grid, delayed by
/// `delay` samples and returned as `dft_len` taps.
pub fn true_relative_ir(
    h_l: &ImpulseResponse,
    h_r: &ImpulseResponse,
    dft_len: usize,
    delay: usize,
) -> Result<ImpulseResponse> {
    if dft_len < 4 || dft_len % 2 != 0 {
        return Err(Error::InvalidParameter(format!("dft length {dft_len} must be even and >= 4")));
    }
    if delay >= dft_len {
        return Err(Error::InvalidParameter(format!("delay {delay} outside 0..{dft_len}")));
    }
    let grid = |h: &ImpulseResponse| -> Result<Vec<Complex64>> {
        if h.len() > dft_len {
            return Err(Error::InvalidParameter(format!("{} taps exceed dft length {dft_len}", h.len())));
        }
        let mut taps = h.taps().to_vec();
        taps.resize(dft_len, 0.0);
        Ok(full_spectrum(&taps))
    };
    let (hl, hr) = (grid(h_l)?, grid(h_r)?);
    let half = &hl[..=dft_len / 2];
    let peak = half.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if let Some((bin, z)) = half.iter().enumerate().find(|(_, z)| !(z.norm() >= 1e-9 * peak) || peak == 0.0) {
        return Err(Error::NearZeroBin { bin, magnitude: z.norm() });
    }
    let ratio: Vec<Complex64> = (0..=dft_len / 2)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / dft_len as f64;
            hr[k] / hl[k] * Complex64::from_polar(1.0, -theta * delay as f64)
        })
        .collect();
    ImpulseResponse::new(hermitian_inverse(&ratio, dft_len)?, delay)
}

/// A mono signal, read from a file or generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalSpec {
    Wav {
        path: PathBuf,
        #[serde(default)]
        channel: usize,
    },
    /// Stationary Gaussian noise through a one-pole lowpass with pole `color`.
    Noise {
        #[serde(default)]
        color: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// Like `noise`, with a random gain per block of `block` samples drawn
    /// uniformly in decibels from `[-spread_db, 0]`.
    Modulated {
        block: usize,
        spread_db: f64,
        #[serde(default)]
        color: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

/// Impulse responses from a source to the left and right microphones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RirSpec {
    /// Stereo WAV file, channel 0 left and channel 1 right.
    Wav { path: PathBuf },
    Synthetic {
        left: SyntheticRirParams,
        right: SyntheticRirParams,
    },
    /// Right response built as `relative * left`.
    Relative {
        left: SyntheticRirParams,
        relative: SyntheticRirParams,
    },
    Explicit { left: Vec<f64>, right: Vec<f64> },
}

/// How a source reaches the two microphones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EmitterSpec {
    /// A mono signal convolved with an impulse response pair.
    Convolved { signal: SignalSpec, rir: RirSpec },
    /// Stereo WAV file holding the microphone images directly.
    Images { path: PathBuf },
    /// Unrelated signals on the two channels.
    Independent { left: SignalSpec, right: SignalSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub source: EmitterSpec,
    /// Level relative to the other noise sources before the common scaling.
    #[serde(default)]
    pub gain_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialSpec {
    /// Trial length in samples; one second when absent.
    pub interval: Option<usize>,
    pub overlap: f64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            interval: None,
            overlap: 0.75,
        }
    }
}

fn default_rate() -> f64 {
    16_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    pub snr_in_db: f64,
    /// Length of generated signals and upper bound on the mixture length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    pub target: EmitterSpec,
    pub noise: Vec<NoiseSpec>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub trials: TrialSpec,
}

fn seed_for(base: u64, slot: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(slot);
    rng.next_u64()
}

fn absolutize(path: &mut PathBuf, base: &Path) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl SignalSpec {
    fn resolve(&mut self, base: &Path, seed: u64) {
        match self {
            SignalSpec::Wav { path, .. } => absolutize(path, base),
            SignalSpec::Noise { seed: s, .. } | SignalSpec::Modulated { seed: s, .. } => {
                s.get_or_insert(seed);
            }
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        match self {
            SignalSpec::Wav { .. } => Ok(()),
            SignalSpec::Noise { color, .. } => check_color(field, *color),
            SignalSpec::Modulated { block, spread_db, color, .. } => {
                if *block == 0 {
                    return Err(Error::config(format!("{field}.block"), "must be positive"));
                }
                if !(*spread_db >= 0.0 && spread_db.is_finite()) {
                    return Err(Error::config(format!("{field}.spread_db"), "must be a nonnegative number"));
                }
                check_color(field, *color)
            }
        }
    }

    pub fn generate(&self, length: Option<usize>, rate: f64) -> Result<TimeSignal> {
        match self {
            SignalSpec::Wav { path, channel } => {
                let sig = read_wav(path)?.channel(*channel)?;
                check_rate(path, sig.rate(), rate)?;
                Ok(sig)
            }
            SignalSpec::Noise { color, seed } => {
                let n = length.ok_or_else(|| Error::config("length", "generated signals need a length"))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
                TimeSignal::new(colored_noise(&mut rng, n, *color), rate)
            }
            SignalSpec::Modulated { block, spread_db, color, seed } => {
                let n = length.ok_or_else(|| Error::config("length", "generated signals need a length"))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
                let mut x = colored_noise(&mut rng, n, *color);
                for chunk in x.chunks_mut(*block) {
                    let gain_db: f64 = if *spread_db > 0.0 { rng.random_range(-spread_db..=0.0) } else { 0.0 };
                    let gain = 10f64.powf(gain_db / 20.0);
                    chunk.iter_mut().for_each(|v| *v *= gain);
                }
                TimeSignal::new(x, rate)
            }
        }
    }
}

fn check_color(field: &str, color: f64) -> Result<()> {
    if !(0.0..1.0).contains(&color) {
        return Err(Error::config(format!("{field}.color"), format!("{color} outside [0, 1)")));
    }
    Ok(())
}

fn check_rate(path: &Path, found: f64, want: f64) -> Result<()> {
    if found != want {
        return Err(Error::InvalidSignal(format!(
            "{} has rate {found}, scenario uses {want}",
            path.display()
        )));
    }
    Ok(())
}

fn colored_noise(rng: &mut ChaCha8Rng, n: usize, color: f64) -> Vec<f64> {
    let mut prev = 0.0;
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            prev = color * prev + e;
            prev
        })
        .collect()
}

impl RirSpec {
    fn resolve(&mut self, base: &Path, seed: u64) {
        match self {
            RirSpec::Wav { path } => absolutize(path, base),
            RirSpec::Synthetic { left, right } => {
                left.seed.get_or_insert(seed_for(seed, 0));
                right.seed.get_or_insert(seed_for(seed, 1));
            }
            RirSpec::Relative { left, relative } => {
                left.seed.get_or_insert(seed_for(seed, 0));
                relative.seed.get_or_insert(seed_for(seed, 1));
            }
            RirSpec::Explicit { .. } => {}
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let check = |name: &str, p: &SyntheticRirParams| {
            p.validate().map_err(|e| Error::config(format!("{field}.{name}"), e.to_string()))
        };
        match self {
            RirSpec::Wav { .. } => Ok(()),
            RirSpec::Synthetic { left, right } => {
                check("left", left)?;
                check("right", right)?;
                if left.length != right.length {
                    return Err(Error::config(
                        field,
                        format!("left and right lengths differ ({} vs {})", left.length, right.length),
                    ));
                }
                Ok(())
            }
            RirSpec::Relative { left, relative } => {
                check("left", left)?;
                check("relative", relative)
            }
            RirSpec::Explicit { left, right } => {
                if left.is_empty() || left.len() != right.len() {
                    return Err(Error::config(
                        field,
                        format!("responses must be nonempty and equally long ({} vs {})", left.len(), right.len()),
                    ));
                }
                Ok(())
            }
        }
    }

    /// The `(h_L, h_R)` pair, padded to a common length.
    pub fn build(&self, rate: f64) -> Result<(ImpulseResponse, ImpulseResponse)> {
        let (mut l, mut r) = match self {
            RirSpec::Wav { path } => match read_wav(path)? {
                WavAudio::Stereo(rec) => {
                    check_rate(path, rec.rate(), rate)?;
                    (rec.left().samples().to_vec(), rec.right().samples().to_vec())
                }
                WavAudio::Mono(_) => {
                    return Err(Error::InvalidSignal(format!("{} must be a stereo file", path.display())))
                }
            },
            RirSpec::Synthetic { left, right } => (synth_rir(left)?.into_taps(), synth_rir(right)?.into_taps()),
            RirSpec::Relative { left, relative } => {
                let l = synth_rir(left)?.into_taps();
                let r = convolve_slices(synth_rir(relative)?.taps(), &l);
                (l, r)
            }
            RirSpec::Explicit { left, right } => (left.clone(), right.clone()),
        };
        let len = l.len().max(r.len());
        l.resize(len, 0.0);
        r.resize(len, 0.0);
        Ok((ImpulseResponse::new(l, 0)?, ImpulseResponse::new(r, 0)?))
    }
}

impl EmitterSpec {
    fn resolve(&mut self, base: &Path, seed: u64) {
        match self {
            EmitterSpec::Convolved { signal, rir } => {
                signal.resolve(base, seed_for(seed, 0));
                rir.resolve(base, seed_for(seed, 1));
            }
            EmitterSpec::Images { path } => absolutize(path, base),
            EmitterSpec::Independent { left, right } => {
                left.resolve(base, seed_for(seed, 0));
                right.resolve(base, seed_for(seed, 1));
            }
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        match self {
            EmitterSpec::Convolved { signal, rir } => {
                signal.validate(&format!("{field}.signal"))?;
                rir.validate(&format!("{field}.rir"))
            }
            EmitterSpec::Images { .. } => Ok(()),
            EmitterSpec::Independent { left, right } => {
                left.validate(&format!("{field}.left"))?;
                right.validate(&format!("{field}.right"))
            }
        }
    }

    /// Left and right images, plus the impulse response pair when the
    /// source is convolved.
    pub fn images(
        &self,
        length: Option<usize>,
        rate: f64,
    ) -> Result<(TimeSignal, TimeSignal, Option<(ImpulseResponse, ImpulseResponse)>)> {
        match self {
            EmitterSpec::Convolved { signal, rir } => {
                let x = signal.generate(length, rate)?;
                let (hl, hr) = rir.build(rate)?;
                let image = |h: &ImpulseResponse| {
                    let mut y = convolve_slices(h.taps(), x.samples());
                    y.truncate(x.len());
                    TimeSignal::new(y, rate)
                };
                Ok((image(&hl)?, image(&hr)?, Some((hl, hr))))
            }
            EmitterSpec::Images { path } => match read_wav(path)? {
                WavAudio::Stereo(rec) => {
                    check_rate(path, rec.rate(), rate)?;
                    Ok((rec.left().clone(), rec.right().clone(), None))
                }
                WavAudio::Mono(_) => Err(Error::InvalidSignal(format!("{} must be a stereo file", path.display()))),
            },
            EmitterSpec::Independent { left, right } => {
                Ok((left.generate(length, rate)?, right.generate(length, rate)?, None))
            }
        }
    }
}

impl ScenarioSpec {
    /// Makes paths absolute against `base` and fills in per-component seeds
    /// and the trial interval. Idempotent.
    pub fn resolve(mut self, base: &Path) -> Result<Self> {
        let base = if base.is_absolute() { base.to_path_buf() } else { std::env::current_dir()?.join(base) };
        self.target.resolve(&base, seed_for(self.seed, 1000));
        for (i, n) in self.noise.iter_mut().enumerate() {
            n.source.resolve(&base, seed_for(self.seed, 2000 + i as u64));
        }
        self.trials.interval.get_or_insert(self.sample_rate.round() as usize);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::config("sample_rate", "must be positive"));
        }
        if !self.snr_in_db.is_finite() {
            return Err(Error::config("snr_in_db", "must be finite"));
        }
        if self.noise.is_empty() {
            return Err(Error::config("noise", "at least one noise source is required"));
        }
        self.target.validate("target")?;
        for (i, n) in self.noise.iter().enumerate() {
            n.source.validate(&format!("noise[{i}].source"))?;
            if !n.gain_db.is_finite() {
                return Err(Error::config(format!("noise[{i}].gain_db"), "must be finite"));
            }
        }
        if !(0.0..1.0).contains(&self.trials.overlap) {
            return Err(Error::config("trials.overlap", "must be in [0, 1)"));
        }
        if self.trials.interval == Some(0) {
            return Err(Error::config("trials.interval", "must be positive"));
        }
        self.pipeline.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads a TOML (or, with a `.json` extension, JSON) scenario file and
/// resolves it against the file's directory.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let spec = parse_scenario(&text, path.extension().is_some_and(|e| e == "json"))?;
    spec.resolve(path.parent().unwrap_or(Path::new(".")))
}

/// Parses a scenario without resolving it.
pub fn parse_scenario(text: &str, json: bool) -> Result<ScenarioSpec> {
    if json {
        serde_json::from_str(text).map_err(|e| Error::config("scenario", e.to_string()))
    } else {
        toml::from_str(text).map_err(|e| Error::config("scenario", e.message().to_string() + &span_hint(text, e.span())))
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    span.map_or(String::new(), |s| {
        let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
        format!(" (line {line})")
    })
}

/// A mixed recording with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedScenario {
    pub recording: StereoRecording,
    pub truth: ScenarioTruth,
    /// Scalar applied to the summed noise images.
    pub noise_scale: f64,
}

/// Scales the summed noise images by one scalar so that the input SNR over
/// both microphones equals `snr_in_db`, then adds them to the target images.
/// All images are truncated to the shortest one.
pub fn mix_components(
    target: (TimeSignal, TimeSignal),
    noises: &[(TimeSignal, TimeSignal)],
    snr_in_db: f64,
    h_rel_true: Option<ImpulseResponse>,
) -> Result<MixedScenario> {
    if noises.is_empty() {
        return Err(Error::InvalidParameter("at least one noise source is required".into()));
    }
    let rate = target.0.rate();
    let n = noises
        .iter()
        .flat_map(|(l, r)| [l.len(), r.len()])
        .chain([target.0.len(), target.1.len()])
        .min()
        .unwrap_or(0);
    if n == 0 {
        return Err(Error::InvalidSignal("empty source".into()));
    }
    let mut y_l = vec![0.0; n];
    let mut y_r = vec![0.0; n];
    for (l, r) in noises {
        if l.rate() != rate || r.rate() != rate {
            return Err(Error::InvalidSignal("sources have different sample rates".into()));
        }
        for i in 0..n {
            y_l[i] += l.samples()[i];
            y_r[i] += r.samples()[i];
        }
    }
    let s_l = &target.0.samples()[..n];
    let s_r = &target.1.samples()[..n];
    let energy = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    let es = energy(s_l) + energy(s_r);
    let en = energy(&y_l) + energy(&y_r);
    if es == 0.0 {
        return Err(Error::Degenerate("target images have zero energy".into()));
    }
    if en == 0.0 {
        return Err(Error::Degenerate("noise images have zero energy".into()));
    }
    let scale = (es / (en * 10f64.powf(snr_in_db / 10.0))).sqrt();
    y_l.iter_mut().chain(y_r.iter_mut()).for_each(|v| *v *= scale);
    let truth = ScenarioTruth::new(
        TimeSignal::new(s_l.to_vec(), rate)?,
        TimeSignal::new(s_r.to_vec(), rate)?,
        TimeSignal::new(y_l, rate)?,
        TimeSignal::new(y_r, rate)?,
        h_rel_true,
    )?;
    Ok(MixedScenario {
        recording: truth.mixture()?,
        truth,
        noise_scale: scale,
    })
}

/// Builds all images of a resolved scenario and mixes them.
pub fn mix_at_snr(spec: &ScenarioSpec) -> Result<MixedScenario> {
    spec.validate()?;
    let rate = spec.sample_rate;
    let (s_l, s_r, pair) = spec.target.images(spec.length, rate)?;
    let mut noises = Vec::with_capacity(spec.noise.len());
    for n in &spec.noise {
        let (l, r, _) = n.source.images(spec.length, rate)?;
        let g = 10f64.powf(n.gain_db / 20.0);
        let gain = |x: TimeSignal| TimeSignal::new(x.samples().iter().map(|v| v * g).collect(), rate);
        noises.push((gain(l)?, gain(r)?));
    }
    let h_rel = match pair {
        Some((hl, hr)) if hl.len() <= spec.pipeline.dft_len => {
            Some(true_relative_ir(&hl, &hr, spec.pipeline.dft_len, spec.pipeline.delay)?)
        }
        _ => None,
    };
    let (mut s_l, mut s_r) = (s_l, s_r);
    if let Some(len) = spec.length {
        if s_l.len() > len {
            s_l = s_l.slice(0..len)?;
            s_r = s_r.slice(0..len)?;
        }
    }
    mix_components((s_l, s_r), &noises, spec.snr_in_db, h_rel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::snr_in;
    use crate::signal::wav::{write_stereo, WavFormat};

    fn rir(seed: u64) -> SyntheticRirParams {
        SyntheticRirParams {
            length: 64,
            direct_delay: 4,
            decay_rate: 0.1,
            density: 0.3,
            seed: Some(seed),
        }
    }

    #[test]
    fn synthetic_rir_shape() {
        let p = rir(9);
        let h = synth_rir(&p).unwrap();
        assert_eq!(h, synth_rir(&p).unwrap());
        assert_ne!(h, synth_rir(&rir(10)).unwrap());
        assert_eq!(h.taps()[4], 1.0);
        assert!(h.taps()[..4].iter().all(|v| *v == 0.0));
        for (i, v) in h.taps().iter().enumerate().skip(4) {
            assert!(v.abs() <= (-0.1 * (i - 4) as f64).exp() + 1e-15);
        }
        assert_eq!(h.nnz(), 1 + (0.3f64 * 59.0).round() as usize);
        let sparse = SyntheticRirParams { density: 1e-3, ..p };
        assert_eq!(synth_rir(&sparse).unwrap(), ImpulseResponse::impulse(64, 4).unwrap());
        assert!(synth_rir(&SyntheticRirParams { density: 0.0, ..p }).is_err());
        assert!(synth_rir(&SyntheticRirParams { decay_rate: 0.0, ..p }).is_err());
    }

    #[test]
    fn relative_ir_examples() {
        let hl = synth_rir(&rir(1)).unwrap();
        let same = true_relative_ir(&hl, &hl, 128, 10).unwrap();
        for (i, v) in same.taps().iter().enumerate() {
            assert!((v - if i == 10 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
        let mut shifted = vec![0.0; 3];
        shifted.extend_from_slice(hl.taps());
        let hr = ImpulseResponse::new(shifted, 0).unwrap();
        let mut hl_pad = hl.taps().to_vec();
        hl_pad.resize(hr.len(), 0.0);
        let rel = true_relative_ir(&ImpulseResponse::new(hl_pad, 0).unwrap(), &hr, 128, 10).unwrap();
        for (i, v) in rel.taps().iter().enumerate() {
            assert!((v - if i == 13 { 1.0 } else { 0.0 }).abs() < 1e-12);
        }
    }

    #[test]
    fn relative_ir_spectral_identity() {
        let m = 256;
        let hl = synth_rir(&rir(2)).unwrap();
        let hr = synth_rir(&SyntheticRirParams { direct_delay: 9, ..rir(3) }).unwrap();
        let rel = true_relative_ir(&hl, &hr, m, 0).unwrap();
        let pad = |h: &[f64]| {
            let mut v = h.to_vec();
            v.resize(m, 0.0);
            full_spectrum(&v)
        };
        let (fl, fr, fx) = (pad(hl.taps()), pad(hr.taps()), pad(rel.taps()));
        for k in 0..m {
            let err = (fx[k] * fl[k] - fr[k]).norm() / fr[k].norm().max(1e-300);
            assert!(err <= 1e-8, "bin {k}: {err}");
        }
    }

    #[test]
    fn relative_ir_rejects_spectral_zero() {
        // 1 - z^-2 vanishes at DC and Nyquist
        let hl = ImpulseResponse::new(vec![1.0, 0.0, -1.0], 0).unwrap();
        let hr = ImpulseResponse::impulse(3, 0).unwrap();
        assert!(matches!(true_relative_ir(&hl, &hr, 16, 0), Err(Error::NearZeroBin { bin: 0, .. })));
    }

    fn sig(v: Vec<f64>) -> TimeSignal {
        TimeSignal::new(v, 8.0).unwrap()
    }

    #[test]
    fn mixing_scales_noise_with_one_scalar() {
        let t = (sig(vec![1.0, 0.0, 1.0, 0.0]), sig(vec![0.0, 1.0, 0.0, 1.0]));
        let n = (sig(vec![1.0, 1.0, 0.0, 0.0]), sig(vec![0.0, 0.0, 1.0, 1.0]));
        let mix = mix_components(t.clone(), std::slice::from_ref(&n), 0.0, None).unwrap();
        assert_eq!(mix.noise_scale, 1.0);
        let loud = mix_components(t.clone(), std::slice::from_ref(&n), 10.0, None).unwrap();
        assert!((loud.noise_scale - 10f64.powf(-0.5)).abs() < 1e-15);
        assert!((snr_in(&loud.truth).unwrap() - 10.0).abs() < 1e-9);

        let second = (sig(vec![0.5, 0.0, 0.0, 0.5]), sig(vec![0.0, 0.5, 0.5, 0.0]));
        let two = mix_components(t, &[n.clone(), second.clone()], -3.0, None).unwrap();
        let c = two.noise_scale;
        for i in 0..4 {
            assert_eq!(two.truth.y_l.samples()[i], (n.0.samples()[i] + second.0.samples()[i]) * c);
        }
        assert!((snr_in(&two.truth).unwrap() + 3.0).abs() < 1e-9);
        for i in 0..4 {
            let x = two.recording.left().samples()[i];
            assert_eq!(x - two.truth.s_l.samples()[i] - two.truth.y_l.samples()[i], 0.0);
        }
    }

    #[test]
    fn mixing_rejects_silent_sources() {
        let z = (sig(vec![0.0; 4]), sig(vec![0.0; 4]));
        let one = (sig(vec![1.0; 4]), sig(vec![1.0; 4]));
        assert!(mix_components(z.clone(), std::slice::from_ref(&one), 0.0, None).is_err());
        assert!(mix_components(one, &[z], 0.0, None).is_err());
    }

    const SYNTHETIC: &str = r#"
seed = 5
snr_in_db = 5.0
length = 4000

[target]
kind = "convolved"
signal = { kind = "modulated", block = 500, spread_db = 30.0 }
rir = { kind = "relative", left = { length = 48, direct_delay = 2, decay_rate = 0.2, density = 0.2 }, relative = { length = 16, direct_delay = 3, decay_rate = 0.3, density = 0.2 } }

[[noise]]
source = { kind = "independent", left = { kind = "noise", color = 0.5 }, right = { kind = "noise" } }

[pipeline]
dft_len = 128
hop = 32
delay = 10
"#;

    #[test]
    fn synthetic_scenario_is_exact_and_deterministic() {
        let spec = parse_scenario(SYNTHETIC, false).unwrap().resolve(Path::new("/")).unwrap();
        assert_eq!(spec.trials.interval, Some(16_000));
        let mix = mix_at_snr(&spec).unwrap();
        assert_eq!(mix.recording.len(), 4000);
        assert!((snr_in(&mix.truth).unwrap() - 5.0).abs() < 1e-9);
        assert_eq!(mix, mix_at_snr(&spec).unwrap());
        // the relative response of a `relative` pair is the generated one
        let EmitterSpec::Convolved { rir: RirSpec::Relative { relative, .. }, .. } = &spec.target else {
            panic!("unexpected target")
        };
        let want = synth_rir(relative).unwrap();
        let got = mix.truth.h_rel_true.as_ref().unwrap();
        for (i, v) in got.taps().iter().enumerate() {
            let w = if (10..26).contains(&i) { want.taps()[i - 10] } else { 0.0 };
            assert!((v - w).abs() < 1e-9, "tap {i}");
        }
    }

    #[test]
    fn resolved_spec_round_trips() {
        let spec = parse_scenario(SYNTHETIC, false).unwrap().resolve(Path::new("/tmp")).unwrap();
        let json = spec.to_json().unwrap();
        let back = parse_scenario(&json, true).unwrap().resolve(Path::new("/elsewhere")).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn minimal_wav_config_gets_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let tone = |f: f64| {
            let s: Vec<f64> = (0..3000).map(|n| (f * n as f64).sin() * 0.3).collect();
            TimeSignal::new(s, 16_000.0).unwrap()
        };
        write_stereo(dir.path().join("t.wav"), &StereoRecording::new(tone(0.1), tone(0.2)).unwrap(), WavFormat::Float32).unwrap();
        write_stereo(dir.path().join("n.wav"), &StereoRecording::new(tone(0.3), tone(0.7)).unwrap(), WavFormat::Float32).unwrap();
        let cfg = dir.path().join("s.toml");
        std::fs::write(
            &cfg,
            "snr_in_db = 0\ntarget = { kind = \"images\", path = \"t.wav\" }\n[[noise]]\nsource = { kind = \"images\", path = \"n.wav\" }\n",
        )
        .unwrap();
        let spec = load_scenario(&cfg).unwrap();
        assert_eq!((spec.pipeline.dft_len, spec.pipeline.delay, spec.pipeline.hop), (2048, 100, 64));
        let EmitterSpec::Images { path } = &spec.target else { panic!() };
        assert!(path.is_absolute());
        let mix = mix_at_snr(&spec).unwrap();
        assert!(snr_in(&mix.truth).unwrap().abs() < 1e-9);
        assert!(mix.truth.h_rel_true.is_none());
    }

    #[test]
    fn schema_errors_name_the_problem() {
        let missing = "snr_in_db = 0\ntarget = { kind = \"images\", path = \"t.wav\" }\n";
        let err = parse_scenario(missing, false).unwrap_err().to_string();
        assert!(err.contains("noise"), "{err}");
        let empty = "snr_in_db = 0\nnoise = []\ntarget = { kind = \"images\", path = \"t.wav\" }\n";
        let err = parse_scenario(empty, false).unwrap().resolve(Path::new("/")).unwrap_err().to_string();
        assert!(err.contains("noise"), "{err}");
        let typo = SYNTHETIC.replace("spread_db", "spread");
        assert!(parse_scenario(&typo, false).is_err());
    }
}
