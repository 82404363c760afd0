mod files;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sparse_rtf::estimators::EstimatorKind;
use sparse_rtf::evaluation::{snr_in, snr_out};
use sparse_rtf::pipeline::{delayed, estimate_rtf, PipelineConfig, SideInfo};
use sparse_rtf::reconstruction::{reconstruct_rtf_detailed, write_trace_csv};
use sparse_rtf::scenario::{mix_at_snr, parse_scenario, MixedScenario, ScenarioSpec};
use sparse_rtf::selection::{coherence_scores, kurtosis_scores, mask_invalid, oracle_snr, SelectionConfig, SelectionMode};
use sparse_rtf::estimators::apply_demixing;
use sparse_rtf::signal::wav::{read_wav, write_stereo, WavAudio, WavFormat};
use sparse_rtf::{Error, ImpulseResponse, Result, Rule};

use files::{
    read_json, write_json, DemixingFile, EmbeddedScores, EstimateFile, FilterFile, SelectionRecord, SolverRecord,
    Taps, TruthFile, FILTER_SCHEMA, TRUTH_SCHEMA,
};
use sweep::{Axis, SweepParams};

#[derive(Parser)]
#[command(name = "sparse-rtf", version, about = "RTF estimation and sparse relative impulse response reconstruction")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "SPARSE_RTF_OUT", default_value = "sparse-rtf-out")]
    out: PathBuf,
    /// Worker threads for trial evaluation.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a scenario and write the mixture, its components and the truth sidecar.
    Scenario {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate the RTF of a mixture.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_estimator)]
        method: EstimatorKind,
        /// Stereo mixture WAV; the scenario is synthesized from the config when absent.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Demixing matrices for `external-demix` and coherence scores.
        #[arg(long)]
        demixing: Option<PathBuf>,
    },
    /// Select bins and reconstruct a sparse relative impulse response.
    Reconstruct {
        #[arg(long)]
        estimate: PathBuf,
        /// Scenario config supplying weights and solver settings.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_parser = parse_rule)]
        rule: Rule,
        #[arg(long, value_enum, default_value_t = ModeArg::Percentage)]
        mode: ModeArg,
        #[arg(long)]
        percentage: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Truth sidecar, required by the oracle rule.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Also write the iteration trace as CSV.
        #[arg(long)]
        trace: bool,
    },
    /// Measure target cancellation of a filter on the configured scenario.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        filter: PathBuf,
    },
    /// Evaluate methods over trials along one experiment axis.
    Sweep {
        #[arg(long, required_unless_present = "manifest")]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Axis::Percentage)]
        axis: Axis,
        /// Grid points, comma separated; mixed points look like `snr=0;length=8000`.
        #[arg(long, value_delimiter = ',')]
        grid: Vec<String>,
        /// Methods such as `fd`, `nsfd+kurtosis`, `fd+oracle`.
        #[arg(long, value_delimiter = ',', default_value = "fd,fd+oracle,fd+kurtosis")]
        method: Vec<String>,
        /// Percentages for axes other than `percentage`.
        #[arg(long, value_delimiter = ',', default_value = "50")]
        percentage: Vec<f64>,
        /// Rerun exactly what a previous sweep manifest describes.
        #[arg(long, conflicts_with_all = ["config", "seed", "grid"])]
        manifest: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Threshold,
    Percentage,
}

fn parse_estimator(s: &str) -> std::result::Result<EstimatorKind, String> {
    match s.parse::<EstimatorKind>() {
        Ok(EstimatorKind::Truth) | Err(_) => Err(format!("`{s}` is not one of ls, fd, nsfd, external-demix")),
        Ok(k) => Ok(k),
    }
}

fn parse_rule(s: &str) -> std::result::Result<Rule, String> {
    s.parse::<Rule>().map_err(|e| e.to_string())
}

#[derive(Debug, Serialize, Deserialize)]
struct RunManifest {
    artifact: String,
    version: String,
    command: String,
    config_path: Option<PathBuf>,
    seed: u64,
    scenario: Option<ScenarioSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<SweepParams>,
    #[serde(default)]
    parameters: serde_json::Value,
    outputs: Vec<PathBuf>,
    timing_ms: u128,
}

enum Failure {
    Usage(String),
    Core(Error),
    Partial(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidSignal(_)
        | Error::InvalidBinSet(_)
        | Error::DimensionMismatch { .. }
        | Error::SignalTooShort { .. } => 3,
        Error::Io(_) | Error::Wav(_) | Error::Json(_) => 5,
        _ => 4,
    }
}

fn load_spec(path: &Path, seed: Option<u64>) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut spec = parse_scenario(&text, path.extension().is_some_and(|e| e == "json"))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.resolve(path.parent().unwrap_or(Path::new(".")))
}

struct Run {
    out: PathBuf,
    command: &'static str,
    started: Instant,
    outputs: Vec<PathBuf>,
}

impl Run {
    fn new(out: &Path, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(out)?;
        Ok(Self {
            out: out.to_path_buf(),
            command,
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.out.join(name);
        self.outputs.push(p.clone());
        p
    }

    fn finish(
        self,
        config_path: Option<&Path>,
        scenario: Option<&ScenarioSpec>,
        sweep: Option<SweepParams>,
        parameters: serde_json::Value,
    ) -> Result<()> {
        let manifest = RunManifest {
            artifact: "sparse-rtf".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            config_path: config_path.map(Path::to_path_buf),
            seed: scenario.map_or(0, |s| s.seed),
            scenario: scenario.cloned(),
            sweep,
            parameters,
            outputs: self.outputs,
            timing_ms: self.started.elapsed().as_millis(),
        };
        write_json(&self.out.join(format!("{}.manifest.json", self.command)), &manifest)
    }
}

fn oracle_file(spec: &ScenarioSpec, mix: &MixedScenario) -> Result<TruthFile> {
    let cfg = &spec.pipeline;
    Ok(TruthFile {
        schema: TRUTH_SCHEMA.into(),
        dft_len: cfg.dft_len,
        hop: cfg.hop,
        window: cfg.window,
        snr_in_db: snr_in(&mix.truth)?,
        oracle_snr: oracle_snr(&cfg.spectrogram(&mix.truth.s_l)?, &cfg.spectrogram(&mix.truth.y_l)?)?,
        h_rel_true: mix.truth.h_rel_true.as_ref().map(Taps::from),
    })
}

fn cmd_scenario(cli: &Cli, config: &Path, seed: Option<u64>) -> Result<()> {
    let spec = load_spec(config, seed)?;
    let mix = mix_at_snr(&spec)?;
    let mut run = Run::new(&cli.out, "scenario")?;
    write_stereo(run.path("mixture.wav"), &mix.recording, WavFormat::Float32)?;
    let pair = |a: &sparse_rtf::TimeSignal, b: &sparse_rtf::TimeSignal| sparse_rtf::StereoRecording::new(a.clone(), b.clone());
    write_stereo(run.path("target.wav"), &pair(&mix.truth.s_l, &mix.truth.s_r)?, WavFormat::Float32)?;
    write_stereo(run.path("noise.wav"), &pair(&mix.truth.y_l, &mix.truth.y_r)?, WavFormat::Float32)?;
    write_json(&run.path("truth.json"), &oracle_file(&spec, &mix)?)?;
    std::fs::write(run.path("resolved.json"), spec.to_json()? + "\n")?;
    println!("scenario: {} samples, snr_in {:.3} dB, noise scale {:.6}", mix.recording.len(), spec.snr_in_db, mix.noise_scale);
    run.finish(Some(config), Some(&spec), None, serde_json::json!({}))
}

fn cmd_estimate(
    cli: &Cli,
    config: &Path,
    seed: Option<u64>,
    method: EstimatorKind,
    input: Option<&Path>,
    demixing: Option<&Path>,
) -> std::result::Result<(), Failure> {
    if method == EstimatorKind::ExternalDemix && demixing.is_none() {
        return Err(Failure::Usage("--method external-demix needs --demixing".into()));
    }
    let spec = load_spec(config, seed)?;
    let cfg = &spec.pipeline;
    let recording = match input {
        Some(path) => match read_wav(path)? {
            WavAudio::Stereo(r) => r,
            WavAudio::Mono(_) => return Err(Error::InvalidSignal(format!("{} must be stereo", path.display())).into()),
        },
        None => mix_at_snr(&spec)?.recording,
    };
    let demix = demixing.map(read_json::<DemixingFile>).transpose()?;
    let matrices = demix.as_ref().map(DemixingFile::matrices).transpose()?;
    let side = SideInfo {
        demixing: matrices.as_deref(),
        demix_delay: demix.as_ref().map_or(0, |d| d.delay),
        ..Default::default()
    };
    let est = estimate_rtf(&recording, method, cfg, &side)?;
    let mut scores = EmbeddedScores {
        kurtosis: Some(kurtosis_scores(&cfg.spectrogram(recording.left())?, Some(est.valid()))),
        coherence: None,
    };
    if let (Some(w), Some(d)) = (&matrices, &demix) {
        let l = cfg.spectrogram(recording.left())?;
        let r = cfg.spectrogram(&delayed(recording.right(), d.delay)?)?;
        let (y1, y2) = apply_demixing(w, &l, &r)?;
        scores.coherence = Some(coherence_scores(&y1, &y2, Some(est.valid())));
    }
    let mut run = Run::new(&cli.out, "estimate")?;
    write_json(&run.path("estimate.json"), &EstimateFile::new(&est, scores))?;
    let valid = est.valid_interior_bins().len();
    println!("estimate: {} with {valid} of {} interior bins valid", method.as_str(), est.dft_len() / 2 - 1);
    run.finish(
        Some(config),
        Some(&spec),
        None,
        serde_json::json!({ "method": method, "input": input, "demixing": demixing }),
    )?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_reconstruct(
    cli: &Cli,
    estimate: &Path,
    config: Option<&Path>,
    rule: Rule,
    mode: ModeArg,
    percentage: Option<f64>,
    beta: Option<f64>,
    truth: Option<&Path>,
    trace: bool,
) -> std::result::Result<(), Failure> {
    let mode = match (mode, percentage, beta) {
        (ModeArg::Percentage, p, None) => SelectionMode::Percentage(p.unwrap_or(100.0)),
        (ModeArg::Threshold, None, Some(b)) => SelectionMode::Threshold(b),
        (ModeArg::Threshold, _, None) => return Err(Failure::Usage("--mode threshold needs --beta".into())),
        _ => return Err(Failure::Usage("--percentage goes with percentage mode, --beta with threshold mode".into())),
    };
    if rule == Rule::Oracle && truth.is_none() {
        return Err(Failure::Usage("--rule oracle needs the --truth sidecar written by `scenario`".into()));
    }
    let file: EstimateFile = read_json(estimate)?;
    let est = file.estimate()?;
    let spec = config.map(|c| load_spec(c, None)).transpose()?;
    let cfg = match &spec {
        Some(s) => s.pipeline,
        None => PipelineConfig { dft_len: est.dft_len(), ..Default::default() },
    };
    if cfg.dft_len != est.dft_len() {
        return Err(Error::config("pipeline.dft_len", format!("{} differs from the estimate's {}", cfg.dft_len, est.dft_len())).into());
    }
    cfg.validate()?;
    let mut scores = match rule {
        Rule::Oracle => {
            let t: TruthFile = read_json(truth.expect("checked above"))?;
            t.validate()?;
            if t.dft_len != est.dft_len() {
                return Err(Error::config("truth.dft_len", "differs from the estimate").into());
            }
            t.oracle_snr
        }
        Rule::Kurtosis => file.scores.kurtosis.clone().ok_or_else(|| Error::config("scores.kurtosis", "missing from estimate file"))?,
        Rule::Coherence => file
            .scores
            .coherence
            .clone()
            .ok_or_else(|| Error::config("scores.coherence", "missing; estimate with --demixing"))?,
    };
    mask_invalid(&mut scores, est.valid());
    let bins = SelectionConfig::new(rule, mode)?.select(&scores, est.dft_len())?;
    if bins.is_empty() {
        return Err(Error::EmptySelection.into());
    }
    let sol = reconstruct_rtf_detailed(&est, &bins, &cfg.weight_params(), &cfg.solver)?;
    let g = ImpulseResponse::new(sol.state.h.clone(), cfg.delay)?;
    let mut run = Run::new(&cli.out, "reconstruct")?;
    let out = FilterFile {
        schema: FILTER_SCHEMA.into(),
        dft_len: est.dft_len(),
        conventions: Default::default(),
        source: est.source(),
        filter: Taps::from(&g),
        selection: Some(SelectionRecord { rule, mode, bins: bins.indices().to_vec() }),
        solver: Some(SolverRecord { stop: sol.stop, iterations: sol.state.iter, crit: sol.state.crit }),
    };
    write_json(&run.path("filter.json"), &out)?;
    if trace {
        write_trace_csv(&sol.trace, std::fs::File::create(run.path("trace.csv")).map_err(Error::Io)?)?;
    }
    println!(
        "reconstruct: {} bins, {} nonzero taps, {:?} after {} iterations",
        bins.len(),
        g.nnz(),
        sol.stop,
        sol.state.iter
    );
    run.finish(
        config,
        spec.as_ref(),
        None,
        serde_json::json!({ "estimate": estimate, "rule": rule, "selection": mode, "truth": truth }),
    )?;
    Ok(())
}

fn cmd_evaluate(cli: &Cli, config: &Path, seed: Option<u64>, filter: &Path) -> Result<()> {
    let spec = load_spec(config, seed)?;
    let g = read_json::<FilterFile>(filter)?.response()?;
    let mix = mix_at_snr(&spec)?;
    let snr_in_db = snr_in(&mix.truth)?;
    let snr_out_db = snr_out(&g, &mix.truth, None)?;
    let result = serde_json::json!({
        "snr_in_db": snr_in_db,
        "snr_out_db": snr_out_db,
        "attenuation_db": snr_out_db - snr_in_db,
    });
    let mut run = Run::new(&cli.out, "evaluate")?;
    write_json(&run.path("evaluation.json"), &result)?;
    println!("evaluate: snr_in {snr_in_db:.3} dB, snr_out {snr_out_db:.3} dB, attenuation {:.3} dB", snr_out_db - snr_in_db);
    run.finish(Some(config), Some(&spec), None, serde_json::json!({ "filter": filter }))
}

fn cmd_sweep(
    cli: &Cli,
    config: Option<&Path>,
    seed: Option<u64>,
    params: SweepParams,
    manifest: Option<&Path>,
) -> std::result::Result<(), Failure> {
    let (spec, params, config) = match manifest {
        Some(path) => {
            let m: RunManifest = read_json(path)?;
            if m.command != "sweep" {
                return Err(Error::config("command", format!("{} is a `{}` manifest", path.display(), m.command)).into());
            }
            let spec = m.scenario.ok_or_else(|| Error::config("scenario", "missing from manifest"))?;
            let params = m.sweep.ok_or_else(|| Error::config("sweep", "missing from manifest"))?;
            (spec, params, m.config_path)
        }
        None => {
            let config = config.expect("clap requires --config without --manifest");
            if params.axis != Axis::Percentage && params.grid.is_empty() {
                return Err(Failure::Usage("--grid is required".into()));
            }
            let mut params = params;
            if params.axis == Axis::Percentage && params.grid.is_empty() {
                params.grid = ["15", "25", "45", "70", "100"].map(String::from).to_vec();
            }
            (load_spec(config, seed)?, params, Some(config.to_path_buf()))
        }
    };
    spec.validate()?;
    let output = sweep::run(&spec, &params)?;
    let mut run = Run::new(&cli.out, "sweep")?;
    sweep::write_csv(&run.path("results.csv"), &output.records)?;
    write_json(&run.path("results.json"), &output.records)?;
    let rows = output.records.iter().filter(|r| r.trial != "mean").count();
    println!("sweep: {rows} rows over {} grid point(s), {} failed cell(s)", params.grid.len(), output.failures);
    let failures = output.failures;
    run.finish(config.as_deref(), Some(&spec), Some(params), serde_json::json!({}))?;
    if failures > 0 {
        return Err(Failure::Partial(failures));
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> std::result::Result<(), Failure> {
    match &cli.command {
        Command::Scenario { config, seed } => cmd_scenario(cli, config, *seed)?,
        Command::Estimate { config, seed, method, input, demixing } => {
            cmd_estimate(cli, config, *seed, *method, input.as_deref(), demixing.as_deref())?
        }
        Command::Reconstruct { estimate, config, rule, mode, percentage, beta, truth, trace } => cmd_reconstruct(
            cli,
            estimate,
            config.as_deref(),
            *rule,
            *mode,
            *percentage,
            *beta,
            truth.as_deref(),
            *trace,
        )?,
        Command::Evaluate { config, seed, filter } => cmd_evaluate(cli, config, *seed, filter)?,
        Command::Sweep { config, seed, axis, grid, method, percentage, manifest } => {
            let params = SweepParams {
                axis: *axis,
                grid: grid.clone(),
                methods: method.clone(),
                percentages: percentage.clone(),
            };
            cmd_sweep(cli, config.as_deref(), *seed, params, manifest.as_deref())?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.jobs {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| dispatch(&cli)),
            Err(e) => Err(Failure::Usage(format!("--jobs {n}: {e}"))),
        },
        None => dispatch(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
        Err(Failure::Partial(n)) => {
            eprintln!("warning: {n} cell(s) failed; see the error column");
            ExitCode::from(6)
        }
    }
}
