//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::path::Path;
use std::time::Instant;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use afcmap::detection::{simulate_trials, write_events, DetectorSpec, Origin, RunLayout, SourceSpec};
use afcmap::mapping::{self, decode, encode, roundtrip_check, SchemeConfig};
use afcmap::planner::{check_plan, creation_time_bound, max_modes, min_comb_spacing, PlanViolation, PlatformLimits};
use afcmap::propagation::{extract_echoes, propagate, PulseSpec, TemporalTrace};
use afcmap::spectral::{build_comb, causal_phase, compose, to_transfer_function, CombSpec, FrequencyGrid, ToothShape};
use afcmap_cli::config::{Range, RunConfig};
use afcmap_cli::pipeline::{self, interpolate_depth, SweepRow};

type Q = Ratio<i64>;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn reference_config() -> RunConfig {
    RunConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/three_mode.toml")).unwrap()
}

/// 1. First-echo peaks at 652 / 1087 / 1522 ns within ±5 ns.
fn echo_timing() -> Outcome {
    let cfg = reference_config();
    let medium = pipeline::build_medium(&cfg).unwrap();
    let traces = pipeline::mode_traces(&cfg, &medium).unwrap();
    let expected = [652e-9, 1087e-9, 1522e-9];
    let mut peaks = Vec::new();
    let mut pass = true;
    for ((trace, comb), want) in traces.iter().zip(&medium.combs).zip(expected) {
        let peak = extract_echoes(trace, comb.spacing, 1).unwrap().windows[1].peak_time;
        pass &= (peak - want).abs() <= 5e-9;
        peaks.push(format!("{:.1}", peak * 1e9));
    }
    outcome(pass, format!("peaks {} ns vs 652/1087/1522 ns (±5 ns)", peaks.join("/")))
}

/// 2. Exhaustive round trip over valid configs, plus a collision for an
///    invalid one.
fn decoder_correctness() -> Outcome {
    let ratios = [Q::from_integer(1), Q::new(3, 2), Q::from_integer(2)];
    let (mut valid, mut checked, mut failures) = (0usize, 0u64, Vec::new());
    for n_freq in 1..=8 {
        for n_spatial in 1..=8 {
            for &ratio in &ratios {
                let cfg = SchemeConfig::uniform(n_freq, n_spatial, Q::from_integer(1), ratio, Q::from_integer(1));
                if mapping::validate(&cfg).is_err() {
                    continue;
                }
                valid += 1;
                let j_max = 10 * n_spatial as u64;
                checked += (j_max + 1) * n_freq as u64;
                if let Err(c) = roundtrip_check(&cfg, j_max) {
                    failures.push(format!("N_F={n_freq} N_S={n_spatial} r={ratio}: {c:?}"));
                    continue;
                }
                // The validating entry point agrees with the raw decoder.
                for j in 0..=j_max {
                    for k in 1..=n_freq {
                        let e = encode(&cfg, j, k).unwrap();
                        if decode(&cfg, e.channel, e.time).unwrap().echo() != Some((j, k)) {
                            failures.push(format!("N_F={n_freq} N_S={n_spatial} r={ratio}: decode({j},{k})"));
                        }
                    }
                }
            }
        }
    }
    // Three frequency modes on one channel: frames overlap.
    let broken = SchemeConfig::uniform(3, 1, Q::from_integer(1), Q::from_integer(1), Q::from_integer(1));
    let collision = mapping::validate(&broken).is_err() && roundtrip_check(&broken, 10).is_err();
    outcome(
        failures.is_empty() && collision && valid > 0,
        format!(
            "{valid} valid configs, {checked} (j, k) pairs, {} failures; invalid N_F=3 N_S=1 config collides: {collision}",
            failures.len()
        ),
    )
}

/// 3. Calibrate via sweep, then reproduce 21/14/11% with a full Monte Carlo.
fn efficiency_reproduction() -> Outcome {
    let targets = [0.21, 0.14, 0.11];
    let mut cfg = reference_config();
    let background = cfg.total_background();
    let mut depths = Vec::new();
    for (i, &target) in targets.iter().enumerate() {
        let mut sweep_cfg = cfg.clone();
        sweep_cfg.sweep.comb = i + 1;
        sweep_cfg.sweep.peak_depth = Range { start: 1.0, stop: 5.0, count: 161 };
        sweep_cfg.sweep.finesse = Range::single(cfg.combs[i].finesse);
        sweep_cfg.sweep.background_depth = Range::single(background);
        let rows: Vec<SweepRow> = pipeline::sweep(&sweep_cfg).unwrap();
        let Some(d) = interpolate_depth(&rows, target, |r| r.eta_analytic) else {
            return outcome(false, format!("no sweep point reaches {target} for comb {}", i + 1));
        };
        depths.push(d);
        cfg.combs[i].peak_depth = Some(d);
    }
    cfg.source.pulses_per_mode = 750_000;
    cfg.source.mean_photon_number = 0.12;
    cfg.detector.coupling_efficiency = 0.59;
    cfg.detector.detection_efficiency = 0.59;
    cfg.detector.dark_rate_hz = 150.0;
    let run = pipeline::run_simulation(&cfg).unwrap();
    let report = &run.analysis.report;
    let eta: Vec<f64> = report.modes.iter().map(|m| m.eta_echo).collect();
    let within = eta.iter().zip(targets).all(|(e, t)| (e - t).abs() <= 0.03);
    let ordered = eta[0] > eta[1] && eta[1] > eta[2];

    let floor = report.dark_floor.map_or(f64::NAN, |f| f.eta_error);
    let floor_ok = (floor - 0.003).abs() <= 0.0005;

    // Signal photons of mode 1 near its second echo at 2/Δ₁.
    let second_echo = 2.0 / cfg.comb_specs().unwrap()[0].spacing;
    let n_in = cfg.source.pulses_per_mode;
    let near_second = run
        .records
        .iter()
        .filter(|r| r.trial < n_in && r.origin == Some(Origin::Signal))
        .filter(|r| (r.timestamp - second_echo).abs() < 50e-9)
        .count();
    let m1 = &report.modes[0];
    let excess = m1.eta_error - floor;
    let cross_ok = near_second > 0 && excess > 3.0 * m1.eta_error_sigma;

    outcome(
        within && ordered && floor_ok && cross_ok,
        format!(
            "calibrated d = {:.3}/{:.3}/{:.3}; eta_echo = {:.2}/{:.2}/{:.2}% (target 21/14/11 ±3 pp, ordered: {ordered}); \
             eta_error = {:.2}/{:.2}/{:.2}%; dark floor {:.3}%; AFC1 second echo at {:.1} ns: {near_second} signal counts, \
             excess over floor {:.3}% ({:.1} sigma)",
            depths[0],
            depths[1],
            depths[2],
            eta[0] * 100.0,
            eta[1] * 100.0,
            eta[2] * 100.0,
            report.modes[0].eta_error * 100.0,
            report.modes[1].eta_error * 100.0,
            report.modes[2].eta_error * 100.0,
            floor * 100.0,
            second_echo * 1e9,
            excess * 100.0,
            excess / m1.eta_error_sigma,
        ),
    )
}

/// 4. Analytic vs numeric first echo over a 5x5x5 grid, within 15%.
fn analytic_oracle() -> Outcome {
    let mut cfg = reference_config();
    cfg.sweep.comb = 1;
    cfg.sweep.peak_depth = Range { start: 1.0, stop: 4.0, count: 5 };
    cfg.sweep.finesse = Range { start: 2.0, stop: 6.0, count: 5 };
    cfg.sweep.background_depth = Range { start: 0.0, stop: 0.5, count: 5 };
    let rows = pipeline::sweep(&cfg).unwrap();
    let worst = rows
        .iter()
        .map(|r| (r.eta_numeric - r.eta_analytic).abs() / r.eta_analytic)
        .fold(0.0, f64::max);
    outcome(
        rows.len() == 125 && worst < 0.15,
        format!("{} grid points, worst relative deviation {:.2}% (limit 15%)", rows.len(), worst * 100.0),
    )
}

/// 5. Planner figures in exact arithmetic.
fn planner_figures() -> Outcome {
    let limits = PlatformLimits::<Q>::pr_yso();
    let modes = max_modes(&limits).unwrap();
    let window = Q::new(435, 1_000_000_000);
    let spacing = min_comb_spacing(100, window).unwrap();
    let spacing_khz = *spacing.numer() as f64 / *spacing.denom() as f64 / 1e3;
    let rounded = (spacing_khz * 10.0).round() / 10.0;
    let plan = check_plan(100, 100, window, window, &limits).unwrap();
    let flagged = plan
        .violations
        .iter()
        .any(|v| matches!(v, PlanViolation::CombSpacingBelowStableLimit { limit, .. } if *limit == Q::from_integer(500_000)));
    let linear = (1..=100usize).all(|n| creation_time_bound(n, &limits).unwrap() == Q::new(60 * n as i64, 1000));
    outcome(
        modes == 100 && rounded == 22.9 && flagged && linear,
        format!(
            "max_modes = {modes}; min_comb_spacing(100, 435 ns) = {spacing} Hz = {spacing_khz:.3} kHz, flagged below 500 kHz: {flagged}; \
             creation_time_bound(N) = 60N ms for N = 1..100: {linear}"
        ),
    )
}

/// 6. Thinning, dark rate and determinism over 2×10⁵ trials.
fn detection_statistics() -> Outcome {
    let trials = 200_000u64;
    let gate = 1.74e-6;
    let energy = 0.6;
    let trace = TemporalTrace {
        dt: 1e-9,
        start: -10e-9,
        intensity: (0..2000)
            .map(|i| if (10..510).contains(&i) { energy / 500e-9 } else { 0.0 })
            .collect(),
    };
    let source = |mu: f64| SourceSpec {
        mean_photon_number: mu,
        pulses_per_mode: trials,
        pulse: PulseSpec::gaussian(5e6, 0.0),
    };
    let detector = |dark: f64| DetectorSpec {
        coupling_efficiency: 0.59,
        detection_efficiency: 0.59,
        dark_rate: dark,
        bin_width: 4.096e-9,
        timing_jitter_sigma: 0.0,
    };
    let layout = RunLayout {
        gate,
        first_trial: 0,
        trials,
        spatial_modes: 3,
        stream_family: 0,
    };

    let mu = 0.5;
    let sim = simulate_trials(&source(mu), &detector(0.0), &trace, &layout, 1).unwrap();
    let p = 0.59 * 0.59 * energy;
    let expected = mu * p * trials as f64;
    let thin_z = (sim.records.len() as f64 - expected) / expected.sqrt();

    let rate = 1e5;
    let darks = simulate_trials(&source(0.0), &detector(rate), &trace, &layout, 2).unwrap();
    let expected_dark = rate * gate * trials as f64;
    let dark_z = (darks.records.len() as f64 - expected_dark) / expected_dark.sqrt();

    let bytes = |seed: u64| {
        let mut s = source(0.12);
        s.pulses_per_mode = 100_000;
        let l = RunLayout { trials: 100_000, ..layout };
        let sim = simulate_trials(&s, &detector(150.0), &trace, &l, seed).unwrap();
        let mut out = Vec::new();
        write_events(&sim.records, &mut out).unwrap();
        out
    };
    let identical = bytes(9) == bytes(9) && bytes(9) != bytes(10);

    let mut cfg = reference_config();
    cfg.source.pulses_per_mode = 100_000;
    let end_to_end = pipeline::run_simulation(&cfg).unwrap().events == pipeline::run_simulation(&cfg).unwrap().events;

    outcome(
        thin_z.abs() <= 3.0 && dark_z.abs() <= 3.0 && identical && end_to_end,
        format!(
            "thinning z = {thin_z:+.2}, dark-rate z = {dark_z:+.2} (|z| <= 3 over {trials} trials); \
             identical seeds give identical bytes: {identical}; full pipeline: {end_to_end}"
        ),
    )
}

/// 7. Causality, passivity, parity and additivity on 128 random combs.
fn physics_invariants() -> Outcome {
    let grid = FrequencyGrid::with_resolution(5e3, 1 << 15).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut random_comb = |centre: Option<f64>| {
        CombSpec::new(
            centre.unwrap_or_else(|| rng.random_range(-20e6..20e6)),
            rng.random_range(0.5e6..3e6),
            rng.random_range(2.0..6.0),
            rng.random_range(0.0..5.0),
            rng.random_range(0.0..0.5),
            ToothShape::Gaussian,
            rng.random_range(10e6..40e6),
        )
        .unwrap()
    };
    let cases = 128;
    let (mut worst_leak, mut worst_energy, mut worst_parity, mut worst_add) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cases {
        let a = random_comb(None);
        let b = random_comb(None);
        let pa = build_comb(&a, &grid).unwrap();
        let pb = build_comb(&b, &grid).unwrap();
        let ta = to_transfer_function(&pa);
        worst_leak = worst_leak.max(ta.negative_time_energy_fraction());
        let out = propagate(&PulseSpec::gaussian(5e6, a.center_offset), &ta).unwrap();
        worst_energy = worst_energy.max(out.energy());

        let both = to_transfer_function(&compose(&[pa.clone(), pb.clone()]).unwrap());
        let tb = to_transfer_function(&pb);
        for k in 0..grid.len() {
            worst_add = worst_add.max((both.response()[k] - ta.response()[k] * tb.response()[k]).norm());
        }

        let sym = build_comb(&random_comb(Some(0.0)), &grid).unwrap();
        let phase = causal_phase(&sym);
        let n = grid.len();
        for k in 1..n {
            worst_parity = worst_parity.max((phase[k] + phase[n - k]).abs());
        }
    }
    outcome(
        worst_leak < 1e-6 && worst_energy <= 1.0 && worst_parity < 1e-9 && worst_add < 1e-9,
        format!(
            "{cases} random combs: max negative-time energy {worst_leak:.2e} (< 1e-6), max output energy {worst_energy:.4} (<= 1), \
             parity residual {worst_parity:.1e}, additivity residual {worst_add:.1e}"
        ),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("echo timing", echo_timing),
        ("decoder correctness", decoder_correctness),
        ("efficiency reproduction", efficiency_reproduction),
        ("numeric vs analytic", analytic_oracle),
        ("planner figures", planner_figures),
        ("detection statistics", detection_statistics),
        ("physics invariants", physics_invariants),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let status = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failed += 1;
        }
        println!(
            "{status} [{}] {name}: {} ({:.1} s)",
            i + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
