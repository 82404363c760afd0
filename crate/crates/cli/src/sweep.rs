//! Sweeps over percentage, input SNR, trial length, and reverberation decay.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sparse_rtf::evaluation::{run_sweep, split_trials, Method, SweepTable};
use sparse_rtf::scenario::{mix_at_snr, EmitterSpec, RirSpec, ScenarioSpec, SyntheticRirParams};
use sparse_rtf::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Percentage,
    Snr,
    Length,
    Decay,
    Mixed,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Percentage => "percentage",
            Axis::Snr => "snr",
            Axis::Length => "length",
            Axis::Decay => "decay",
            Axis::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Setting {
    Percentage(f64),
    Snr(f64),
    /// Trial interval in samples.
    Length(usize),
    Decay(f64),
}

#[derive(Debug, Clone, PartialEq)]
struct GridPoint {
    label: String,
    settings: Vec<Setting>,
}

fn parse_setting(key: &str, value: &str) -> Result<Setting> {
    let bad = || Error::InvalidParameter(format!("grid value `{value}` for `{key}` is not a number"));
    let num: f64 = value.trim().parse().map_err(|_| bad())?;
    match key.trim() {
        "percentage" => Ok(Setting::Percentage(num)),
        "snr" => Ok(Setting::Snr(num)),
        "length" => {
            if num.fract() != 0.0 || num < 1.0 {
                return Err(Error::InvalidParameter(format!("length `{value}` must be a positive sample count")));
            }
            Ok(Setting::Length(num as usize))
        }
        "decay" => Ok(Setting::Decay(num)),
        other => Err(Error::InvalidParameter(format!("unknown grid key `{other}`"))),
    }
}

fn parse_grid(axis: Axis, grid: &[String]) -> Result<Vec<GridPoint>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("grid is empty".into()));
    }
    grid.iter()
        .map(|point| {
            let settings = match axis {
                Axis::Mixed => point
                    .split(';')
                    .map(|kv| {
                        let (k, v) = kv
                            .split_once('=')
                            .ok_or_else(|| Error::InvalidParameter(format!("mixed grid entry `{kv}` is not key=value")))?;
                        parse_setting(k, v)
                    })
                    .collect::<Result<Vec<_>>>()?,
                other => vec![parse_setting(other.as_str(), point)?],
            };
            Ok(GridPoint {
                label: point.trim().to_string(),
                settings,
            })
        })
        .collect()
}

fn set_decay(params: &mut SyntheticRirParams, decay: f64) {
    params.decay_rate = decay;
}

fn apply(spec: &ScenarioSpec, settings: &[Setting], percentages: &[f64]) -> Result<(ScenarioSpec, Vec<f64>)> {
    let mut spec = spec.clone();
    let mut percentages = percentages.to_vec();
    for s in settings {
        match *s {
            Setting::Percentage(p) => percentages = vec![p],
            Setting::Snr(v) => spec.snr_in_db = v,
            Setting::Length(n) => spec.trials.interval = Some(n),
            Setting::Decay(d) => match &mut spec.target {
                EmitterSpec::Convolved { rir: RirSpec::Synthetic { left, right }, .. } => {
                    set_decay(left, d);
                    set_decay(right, d);
                }
                EmitterSpec::Convolved { rir: RirSpec::Relative { left, relative }, .. } => {
                    set_decay(left, d);
                    set_decay(relative, d);
                }
                _ => {
                    return Err(Error::config(
                        "target.rir",
                        "decay sweeps need a synthetic or relative impulse response pair",
                    ))
                }
            },
        }
    }
    spec.validate()?;
    Ok((spec, percentages))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepParams {
    pub axis: Axis,
    pub grid: Vec<String>,
    pub methods: Vec<String>,
    pub percentages: Vec<f64>,
}

/// One CSV/JSON row. Failed cells have empty metrics and an error message;
/// summary rows use `trial = "mean"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub axis: String,
    pub grid_value: String,
    pub trial: String,
    pub method: String,
    pub percentage: Option<f64>,
    pub snr_in_db: Option<f64>,
    pub snr_out_db: Option<f64>,
    pub attenuation_db: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Default)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub failures: usize,
}

fn records_for(axis: Axis, label: &str, table: &SweepTable) -> Vec<SweepRecord> {
    let grid_value = |p: Option<f64>| match (axis, p) {
        (Axis::Percentage, Some(p)) => p.to_string(),
        _ => label.to_string(),
    };
    let mut out: Vec<(usize, SweepRecord)> = table
        .rows
        .iter()
        .map(|r| {
            (
                r.trial,
                SweepRecord {
                    axis: axis.as_str().into(),
                    grid_value: grid_value(r.percentage),
                    trial: r.trial.to_string(),
                    method: r.method.clone(),
                    percentage: r.percentage,
                    snr_in_db: Some(r.snr_in_db),
                    snr_out_db: Some(r.snr_out_db),
                    attenuation_db: Some(r.attenuation_db),
                    error: None,
                },
            )
        })
        .chain(table.failures.iter().map(|f| {
            (
                f.trial,
                SweepRecord {
                    axis: axis.as_str().into(),
                    grid_value: grid_value(f.percentage),
                    trial: f.trial.to_string(),
                    method: f.method.clone(),
                    percentage: f.percentage,
                    snr_in_db: None,
                    snr_out_db: None,
                    attenuation_db: None,
                    error: Some(f.error.clone()),
                },
            )
        }))
        .collect();
    out.sort_by(|a, b| {
        (a.0, &a.1.method)
            .cmp(&(b.0, &b.1.method))
            .then(a.1.percentage.unwrap_or(-1.0).total_cmp(&b.1.percentage.unwrap_or(-1.0)))
    });
    let mut records: Vec<SweepRecord> = out.into_iter().map(|(_, r)| r).collect();
    records.extend(table.summary().into_iter().map(|s| SweepRecord {
        axis: axis.as_str().into(),
        grid_value: grid_value(s.percentage),
        trial: "mean".into(),
        method: s.method,
        percentage: s.percentage,
        snr_in_db: Some(s.snr_in_db),
        snr_out_db: Some(s.snr_out_db),
        attenuation_db: Some(s.attenuation_db),
        error: None,
    }));
    records
}

pub fn run(spec: &ScenarioSpec, params: &SweepParams) -> Result<SweepOutput> {
    let methods: Vec<Method> = params.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::InvalidParameter("no methods given".into()));
    }
    let points = match params.axis {
        Axis::Percentage => {
            let mut all = Vec::new();
            for p in parse_grid(Axis::Percentage, &params.grid)? {
                all.extend(p.settings);
            }
            vec![GridPoint { label: String::new(), settings: all }]
        }
        axis => parse_grid(axis, &params.grid)?,
    };
    let mut output = SweepOutput::default();
    for point in &points {
        let (spec, percentages) = if params.axis == Axis::Percentage {
            let ps = point
                .settings
                .iter()
                .map(|s| match s {
                    Setting::Percentage(p) => *p,
                    _ => unreachable!("percentage grid holds only percentages"),
                })
                .collect();
            (spec.clone(), ps)
        } else {
            apply(spec, &point.settings, &params.percentages)?
        };
        let mix = mix_at_snr(&spec)?;
        let interval = spec.trials.interval.unwrap_or(spec.sample_rate.round() as usize);
        let trials = split_trials(mix.truth.len(), interval, spec.trials.overlap)?;
        let table = run_sweep(&mix.truth, &trials, &methods, &percentages, &spec.pipeline);
        output.failures += table.failures.len();
        output.records.extend(records_for(params.axis, &point.label, &table));
    }
    Ok(output)
}

pub fn write_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv: {other:?}")),
    }
}
