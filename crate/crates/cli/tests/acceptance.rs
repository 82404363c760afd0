//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`).

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparse_rtf::estimators::{compute_psd_frames, estimate_ls_time, estimate_nsfd};
use sparse_rtf::evaluation::{run_sweep, snr_in, snr_out, split_trials, Method};
use sparse_rtf::pipeline::estimate_rtf;
use sparse_rtf::pipeline::SideInfo;
use sparse_rtf::reconstruction::{
    check_kkt, reconstruct_rtf_detailed, sparsa_solve, weight_profile, Solution, StopReason, WeightedLasso,
};
use sparse_rtf::scenario::{mix_components, parse_scenario};
use sparse_rtf::selection::{coherence, kurtosis, oracle_snr, select_by_percentage, BinScore, Direction};
use sparse_rtf::signal::{
    convolve_slices, full_spectrum, stft, FrequencyBinSet, IncompleteRtf, PartialFourier,
};
use sparse_rtf::{
    EstimatorKind, ImpulseResponse, PipelineConfig, Rule, SolverConfig, StereoRecording, TimeSignal,
    WeightProfileParams, WeightVector, Window,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn sig(x: Vec<f64>) -> TimeSignal {
    TimeSignal::new(x, 16_000.0).expect("finite samples")
}

fn random_bins(rng: &mut ChaCha8Rng, m: usize, count: usize) -> FrequencyBinSet {
    let idx = index::sample(rng, m / 2 - 1, count).into_iter().map(|i| i + 1).collect();
    FrequencyBinSet::new(m, idx).expect("interior bins")
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn operator_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_entry = 0.0f64;
    for m in [4usize, 8, 16, 64] {
        let interior = m / 2 - 1;
        let sets = [
            FrequencyBinSet::all(m).map_err(|e| e.to_string())?,
            random_bins(&mut rng, m, interior.div_ceil(2)),
        ];
        for bins in sets {
            let op = PartialFourier::new(bins.clone());
            let s = bins.len();
            let explicit = |row: usize, n: usize| {
                let k = bins.indices()[row % s] as f64;
                let phase = 2.0 * std::f64::consts::PI * k * n as f64 / m as f64;
                if row < s {
                    phase.cos()
                } else {
                    -phase.sin()
                }
            };
            for n in 0..m {
                let mut e = vec![0.0; m];
                e[n] = 1.0;
                let col = op.realified_forward(&e).map_err(|e| e.to_string())?;
                for (row, v) in col.iter().enumerate() {
                    worst_entry = worst_entry.max((v - explicit(row, n)).abs());
                }
            }
            for row in 0..2 * s {
                let mut e = vec![0.0; 2 * s];
                e[row] = 1.0;
                let adj = op.realified_adjoint(&e).map_err(|e| e.to_string())?;
                for (n, v) in adj.iter().enumerate() {
                    worst_entry = worst_entry.max((v - explicit(row, n)).abs());
                }
            }
        }
    }
    ensure(worst_entry <= 1e-12, || format!("entry error {worst_entry:e} > 1e-12"))?;

    let mut worst_dot = 0.0f64;
    for pair in 0..100 {
        let m = [4usize, 8, 16, 64][pair % 4];
        let count = rng.random_range(1..=m / 2 - 1);
        let op = PartialFourier::new(random_bins(&mut rng, m, count));
        let h = gaussian(&mut rng, m);
        let r = gaussian(&mut rng, op.rows());
        let fh = op.realified_forward(&h).map_err(|e| e.to_string())?;
        let ftr = op.realified_adjoint(&r).map_err(|e| e.to_string())?;
        let rel = (dot(&fh, &r) - dot(&h, &ftr)).abs() / (norm(&fh) * norm(&r)).max(norm(&h) * norm(&ftr));
        worst_dot = worst_dot.max(rel);
    }
    ensure(worst_dot <= 1e-10, || format!("adjoint mismatch {worst_dot:e} > 1e-10"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!(
        "max entry error {worst_entry:.1e}, max adjoint mismatch {worst_dot:.1e}, {:.0?}",
        start.elapsed()
    ))
}

struct Planted {
    problem: WeightedLasso,
    rtf: IncompleteRtf,
    weights: WeightVector,
    h: Vec<f64>,
}

/// Problem `i` of the solver suite: M = 256, |S| alternating 16 / 64, and
/// `1 + (i / 2) % 8` planted taps with weights of the default shape.
fn planted_problem(i: u64) -> Planted {
    let m = 256;
    let s = if i % 2 == 0 { 16 } else { 64 };
    let k = 1 + (i as usize / 2) % 8;
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
    let mut h = vec![0.0; m];
    for n in index::sample(&mut rng, m, k) {
        h[n] = rng.random_range(-1.0..1.0);
    }
    let bins = random_bins(&mut rng, m, s);
    let spectrum = full_spectrum(&h);
    let rtf = IncompleteRtf::new(bins.clone(), bins.indices().iter().map(|&b| spectrum[b]).collect())
        .expect("planted data");
    let weights = weight_profile(&WeightProfileParams { len: m, ..Default::default() }).expect("default shape");
    let problem = WeightedLasso::new(&rtf, weights.clone()).expect("planted problem");
    Planted { problem, rtf, weights, h }
}

fn suite_solver_config() -> SolverConfig {
    SolverConfig { tol: 1e-10, ..Default::default() }
}

fn solver_kkt_suite() -> Outcome {
    let start = Instant::now();
    let cfg = suite_solver_config();
    let mut failures = Vec::new();
    let mut iterations = 0;
    for i in 0..50 {
        let p = planted_problem(i);
        let sol = sparsa_solve(&p.rtf, &p.weights, &cfg, None).map_err(|e| format!("problem {i}: {e}"))?;
        iterations += sol.state.iter;
        let kkt = check_kkt(&p.problem, sol.taps(), 1e-4).map_err(|e| e.to_string())?;
        let found = p.problem.objective(sol.taps()).map_err(|e| e.to_string())?;
        let planted = p.problem.objective(&p.h).map_err(|e| e.to_string())?;
        if !kkt || found > planted {
            failures.push(format!(
                "#{i} (stop {:?}, kkt {kkt}, objective {found:.6e} vs planted {planted:.6e})",
                sol.stop
            ));
        }
    }
    ensure(failures.is_empty(), || format!("{} of 50 failed: {}", failures.len(), failures.join("; ")))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("50/50 pass, {iterations} iterations total, {:.2?}", start.elapsed()))
}

fn fixed_point() -> Outcome {
    let cfg = SolverConfig { tol: 1e-24, max_iters: 50_000, ..Default::default() };
    let mut worst = 0.0f64;
    let mut checked = 0;
    for i in 0..50 {
        if checked == 10 {
            break;
        }
        let p = planted_problem(i);
        let sol: Solution = p.problem.solve(&cfg, None).map_err(|e| e.to_string())?;
        if sol.stop != StopReason::Converged || !check_kkt(&p.problem, sol.taps(), 1e-4).map_err(|e| e.to_string())? {
            continue;
        }
        let state = p.problem.state_at(sol.taps(), sol.state.alpha).map_err(|e| e.to_string())?;
        let next = p.problem.iterate(&state, &cfg).map_err(|e| e.to_string())?;
        let moved = next.h.iter().zip(sol.taps()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(moved);
        checked += 1;
    }
    ensure(checked == 10, || format!("only {checked} KKT-verified solutions to start from"))?;
    ensure(worst <= 1e-10, || format!("iterate moved by {worst:e} > 1e-10"))?;
    Ok(format!("max move {worst:.1e} over {checked} KKT-verified solutions"))
}

/// White left channel of `n` samples, zero outside `pad..n - pad`, and the
/// right channel `h * x_L` (no delay).
fn noise_free_pair(rng: &mut ChaCha8Rng, n: usize, pad: usize, h: &[f64]) -> StereoRecording {
    let mut x = gaussian(rng, n);
    for i in (0..pad).chain(n - pad..n) {
        x[i] = 0.0;
    }
    let mut y = convolve_slices(h, &x);
    y.truncate(n);
    StereoRecording::new(sig(x), sig(y)).expect("equal lengths")
}

fn sparse_taps(rng: &mut ChaCha8Rng, len: usize, k: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    for n in index::sample(rng, len, k) {
        h[n] = rng.random_range(0.2..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    }
    h
}

fn noise_free_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);

    let mut ls_err = 0.0f64;
    for (len, delay) in [(16usize, 0usize), (16, 5), (9, 3), (1, 0)] {
        let h = gaussian(&mut rng, len);
        // x_R(n) = sum_i g_i x_L(n + D - i), so the right channel is h shifted back by D.
        let rec = noise_free_pair(&mut rng, 4000, 32, &h);
        let shifted = StereoRecording::new(
            rec.left().clone(),
            sig(rec.right().samples()[delay..].iter().copied().chain(std::iter::repeat_n(0.0, delay)).collect()),
        )
        .map_err(|e| e.to_string())?;
        let est = estimate_ls_time(&shifted, len, delay).map_err(|e| e.to_string())?;
        ls_err = ls_err.max(est.taps().iter().zip(&h).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    ensure(ls_err <= 1e-8, || format!("LS tap error {ls_err:e} > 1e-8"))?;

    let m = 512;
    let delay = 100;
    let cfg = PipelineConfig { dft_len: m, hop: m, window: Window::Rectangular, delay, ..Default::default() };
    let mut fd_err = 0.0f64;
    let mut worst_att = f64::NEG_INFINITY;
    let mut per_scenario = Vec::new();
    for seed in 0..5 {
        let h = sparse_taps(&mut rng, 16, 1 + seed % 6);
        // periodic left channel: every analysis frame sees a circular convolution
        let period = gaussian(&mut rng, m);
        let frames = 40;
        let x: Vec<f64> = (0..frames * m).map(|n| period[n % m]).collect();
        let mut circular = vec![0.0; m];
        for (n, c) in circular.iter_mut().enumerate() {
            *c = h.iter().enumerate().map(|(i, hi)| hi * period[(n + m - i) % m]).sum();
        }
        let y: Vec<f64> = (0..frames * m).map(|n| circular[n % m]).collect();
        let rec = StereoRecording::new(sig(x.clone()), sig(y.clone())).map_err(|e| e.to_string())?;
        let est = estimate_rtf(&rec, EstimatorKind::Fd, &cfg, &SideInfo::default()).map_err(|e| e.to_string())?;

        let mut padded = h.clone();
        padded.resize(m, 0.0);
        let truth = full_spectrum(&padded);
        for k in (0..=m / 2).filter(|&k| est.is_valid(k)) {
            fd_err = fd_err.max((est.values()[k] - truth[k]).norm() / truth[k].norm());
        }

        let bins = FrequencyBinSet::new(m, est.valid_interior_bins()).map_err(|e| e.to_string())?;
        let sol = reconstruct_rtf_detailed(&est, &bins, &cfg.weight_params(), &cfg.solver).map_err(|e| e.to_string())?;
        let g = ImpulseResponse::new(sol.state.h.clone(), cfg.delay).map_err(|e| e.to_string())?;
        // noise only enters the metric; the estimate saw the clean recording
        let noise_l = gaussian(&mut rng, x.len());
        let noise_r = gaussian(&mut rng, x.len());
        let mixed = mix_components((sig(x), sig(y)), &[(sig(noise_l), sig(noise_r))], 0.0, None)
            .map_err(|e| e.to_string())?;
        let window = m..frames * m;
        let att = snr_out(&g, &mixed.truth, Some(window.clone())).map_err(|e| e.to_string())?
            - sparse_rtf::evaluation::snr_in_window(&mixed.truth, window).map_err(|e| e.to_string())?;
        worst_att = worst_att.max(att);
        per_scenario.push(format!("{att:.1} dB ({:?})", sol.stop));
    }
    ensure(fd_err <= 1e-6, || format!("FD relative error {fd_err:e} > 1e-6"))?;
    ensure(worst_att <= -60.0, || {
        format!("end-to-end attenuation above -60 dB; per scenario: {}", per_scenario.join(", "))
    })?;
    Ok(format!(
        "LS error {ls_err:.1e}, FD relative error {fd_err:.1e}, worst attenuation {worst_att:.1} dB over 5 scenarios"
    ))
}

fn lowpass(x: impl Iterator<Item = f64>, pole: f64) -> Vec<f64> {
    let mut state = 0.0;
    x.map(|v| {
        state = v + pole * state;
        state
    })
    .collect()
}

fn nsfd_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 512;
    let hop = m / 2;
    let blocks = 4;
    let frames_per_block: usize = 200;
    let frames = blocks * frames_per_block;
    let n = (frames - 1) * hop + m;
    let h = sparse_taps(&mut rng, 12, 4);
    let gains_db = [0.0, -8.0, -16.0, -24.0];
    let block_len = n.div_ceil(blocks);
    let s_l: Vec<f64> = gaussian(&mut rng, n)
        .into_iter()
        .enumerate()
        .map(|(i, v)| v * 10f64.powf(gains_db[i / block_len] / 20.0))
        .collect();
    let mut s_r = convolve_slices(&h, &s_l);
    s_r.truncate(n);
    // stationary lowpass noise, partly coherent across the channels
    let common = gaussian(&mut rng, n);
    let y_l = lowpass(gaussian(&mut rng, n).iter().zip(&common).map(|(a, c)| a + 0.5 * c), 0.9);
    let y_r = lowpass(gaussian(&mut rng, n).iter().zip(&common).map(|(a, c)| a + 0.5 * c), 0.9);
    let mixed = mix_components((sig(s_l), sig(s_r)), &[(sig(y_l), sig(y_r))], 0.0, None).map_err(|e| e.to_string())?;
    let sn = snr_in(&mixed.truth).map_err(|e| e.to_string())?;
    ensure((sn - 0.0).abs() < 1e-9, || format!("scenario SNR {sn}"))?;

    let window = Window::SqrtHann;
    let spec = |x: &TimeSignal| stft(x, m, hop, window).map_err(|e| e.to_string());
    let (l, r) = (spec(mixed.recording.left())?, spec(mixed.recording.right())?);
    ensure(l.frames() == frames, || format!("{} frames, expected {frames}", l.frames()))?;
    let (est, _) = estimate_nsfd(&compute_psd_frames(&l, &r, blocks).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let oracle = oracle_snr(&spec(&mixed.truth.s_l)?, &spec(&mixed.truth.y_l)?).map_err(|e| e.to_string())?;

    let mut padded = h.clone();
    padded.resize(m, 0.0);
    let truth = full_spectrum(&padded);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for s in oracle.iter().filter(|s| s.score >= 1.0) {
        let k = s.bin;
        ensure(est.is_valid(k), || format!("bin {k} has oracle SNR >= 0 dB but no estimate"))?;
        worst = worst.max((est.values()[k] - truth[k]).norm() / truth[k].norm());
        checked += 1;
    }
    ensure(checked > 0, || "no bin reaches 0 dB oracle SNR".into())?;
    ensure(worst <= 0.1, || format!("relative error {worst:.3} > 0.1 over {checked} bins"))?;
    Ok(format!("max relative error {worst:.3} over {checked} bins with oracle SNR >= 0 dB"))
}

const TREND_SCENARIO: &str = r#"
snr_in_db = 0.0
length = 32000

[target]
kind = "convolved"
signal = { kind = "modulated", block = 1600, spread_db = 30.0 }
rir = { kind = "relative", left = { length = 256, direct_delay = 4, decay_rate = 0.02, density = 0.3 }, relative = { length = 128, direct_delay = 2, decay_rate = 0.03, density = 0.3 } }

[[noise]]
source = { kind = "independent", left = { kind = "noise", color = 0.3 }, right = { kind = "noise", color = 0.3 } }

[pipeline]
dft_len = 512
hop = 64
delay = 100

[trials]
interval = 16000
overlap = 0.75
"#;

fn percentage_trend() -> Outcome {
    let start = Instant::now();
    let methods = [Method::baseline(EstimatorKind::Fd), Method::sparse(EstimatorKind::Fd, Rule::Oracle)];
    let percentages = [5.0, 50.0, 100.0];
    let (mut p5, mut p50, mut p100, mut base) = (0.0, 0.0, 0.0, 0.0);
    let seeds = 20;
    for seed in 0..seeds {
        let mut spec = parse_scenario(TREND_SCENARIO, false).map_err(|e| e.to_string())?;
        spec.seed = seed;
        let spec = spec.resolve(Path::new("/")).map_err(|e| e.to_string())?;
        let mix = sparse_rtf::mix_at_snr(&spec).map_err(|e| e.to_string())?;
        let trials = split_trials(mix.truth.len(), 16_000, 0.75).map_err(|e| e.to_string())?;
        let table = run_sweep(&mix.truth, &trials, &methods, &percentages, &spec.pipeline);
        ensure(table.failures.is_empty(), || format!("seed {seed}: {:?}", table.failures))?;
        let mean = |tag: &str, p: Option<f64>| {
            table.mean_attenuation(tag, p).ok_or_else(|| format!("seed {seed}: no rows for {tag} {p:?}"))
        };
        p5 += mean("fd+oracle", Some(5.0))? / seeds as f64;
        p50 += mean("fd+oracle", Some(50.0))? / seeds as f64;
        p100 += mean("fd+oracle", Some(100.0))? / seeds as f64;
        base += mean("fd", None)? / seeds as f64;
    }
    let detail = format!(
        "oracle 5% {p5:.2} dB, 50% {p50:.2} dB, 100% {p100:.2} dB, baseline {base:.2} dB, {:.1?}",
        start.elapsed()
    );
    ensure(p50 <= p5 - 2.0, || format!("50% not 2 dB better than 5%: {detail}"))?;
    ensure((p100 - base).abs() <= 3.0, || format!("100% not within 3 dB of baseline: {detail}"))?;
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(detail)
}

fn selection_rules() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for round in 0..50 {
        let m = [16usize, 64, 512][round % 3];
        let scores: Vec<BinScore> = (1..m / 2)
            .map(|bin| BinScore {
                bin,
                score: (rng.random_range(0..20) as f64) / 4.0,
                valid: rng.random_bool(0.9),
            })
            .collect();
        for dir in [Direction::Greater, Direction::Less] {
            let mut previous: Option<FrequencyBinSet> = None;
            for p in [1.0, 5.0, 15.0, 25.0, 33.3, 45.0, 50.0, 70.0, 99.0, 100.0] {
                let Ok(set) = select_by_percentage(&scores, p, dir, m) else {
                    return Err(format!("selection at {p}% failed"));
                };
                if let Some(prev) = &previous {
                    ensure(prev.is_subset(&set), || format!("M={m}: selection at {p}% drops earlier bins"))?;
                }
                previous = Some(set);
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let z: Vec<Complex64> = (0..10_000)
        .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let kurt = kurtosis(&z).map_err(|e| e.to_string())?;
    ensure(kurt.abs() <= 0.1, || format!("kurtosis of complex Gaussian {kurt:.4}"))?;

    // exactly proportional pairs: scalars whose products with the samples round-trip
    let scalars = [
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(4.0, 0.0),
        Complex64::new(-0.125, 0.0),
        Complex64::new(0.0, 2.0),
        Complex64::new(0.0, -0.5),
    ];
    for c in scalars {
        let y1: Vec<Complex64> = (0..257)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let y2: Vec<Complex64> = y1.iter().map(|v| v * c).collect();
        let coh = coherence(&y1, &y2).map_err(|e| e.to_string())?;
        ensure(coh == 1.0, || format!("coherence of y and {c} y is {coh:.17}"))?;
    }
    Ok(format!("nesting holds over 50 score sets, kurtosis {kurt:.4}, coherence exactly 1"))
}

fn protocol_arithmetic() -> Outcome {
    let trials = split_trials(160_000, 16_000, 0.75).map_err(|e| e.to_string())?;
    ensure(trials.len() == 37, || format!("{} trials", trials.len()))?;
    ensure(trials.last().map(|t| t.end) == Some(160_000), || "last trial does not end at 10 s".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let n = 16_000;
        let target = (sig(gaussian(&mut rng, n)), sig(gaussian(&mut rng, n)));
        let noise = (sig(gaussian(&mut rng, n).iter().map(|v| 7.0 * v).collect()), sig(gaussian(&mut rng, n)));
        let mix = mix_components(target, &[noise], 0.0, None).map_err(|e| e.to_string())?;
        worst = worst.max(snr_in(&mix.truth).map_err(|e| e.to_string())?.abs());
    }
    ensure(worst <= 1e-9, || format!("0 dB mixture measured {worst:e} dB off"))?;
    Ok(format!("37 trials, 0 dB mixture within {worst:.1e} dB"))
}

fn sweep_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("scenario.toml");
    let small = TREND_SCENARIO
        .replace("length = 32000", "length = 12000")
        .replace("interval = 16000", "interval = 8000");
    std::fs::write(&config, format!("seed = 3\n{small}")).map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_sparse-rtf");
    let run = |out: &Path, args: &[&str]| -> Result<(), String> {
        let status = Command::new(bin)
            .arg("--out")
            .arg(out)
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            format!("{args:?} exited with {}: {}", status.status, String::from_utf8_lossy(&status.stderr))
        })
    };
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let config_arg = config.to_string_lossy().into_owned();
    run(
        &first,
        &["sweep", "--config", &config_arg, "--method", "fd,fd+oracle,fd+kurtosis,nsfd", "--grid", "10,50,100"],
    )?;
    let manifest = first.join("sweep.manifest.json").to_string_lossy().into_owned();
    run(&second, &["sweep", "--manifest", &manifest, "--jobs", "1"])?;
    let a = std::fs::read(first.join("results.csv")).map_err(|e| e.to_string())?;
    let b = std::fs::read(second.join("results.csv")).map_err(|e| e.to_string())?;
    ensure(a.len() > 100, || "results.csv is nearly empty".into())?;
    ensure(a == b, || "CSV differs between the run and its manifest rerun".into())?;
    Ok(format!("{} bytes identical across run and manifest rerun", a.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("operator correctness", operator_correctness),
        ("solver KKT suite", solver_kkt_suite),
        ("fixed point", fixed_point),
        ("noise-free exactness", noise_free_exactness),
        ("NSFD consistency", nsfd_consistency),
        ("percentage trend", percentage_trend),
        ("selection rules", selection_rules),
        ("protocol arithmetic", protocol_arithmetic),
        ("sweep determinism", sweep_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {}. {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
