//! Statistical properties of the photon-counting Monte Carlo.

use afcmap::detection::{simulate_trials, write_events, DetectorSpec, Origin, RunLayout, SourceSpec};
use afcmap::propagation::{PulseSpec, TemporalTrace};

const GATE: f64 = 1.74e-6;
const TRIALS: u64 = 200_000;

/// Flat output of total energy `energy` spread over [0, 500 ns).
fn boxcar(energy: f64) -> TemporalTrace<f64> {
    let dt = 1e-9;
    let lead = 10;
    let intensity = (0..2000)
        .map(|i| if (lead..lead + 500).contains(&i) { energy / 500e-9 } else { 0.0 })
        .collect();
    TemporalTrace { dt, start: -(lead as f64) * dt, intensity }
}

fn source(mu: f64) -> SourceSpec {
    SourceSpec {
        mean_photon_number: mu,
        pulses_per_mode: TRIALS,
        pulse: PulseSpec::gaussian(5e6, 0.0),
    }
}

fn detector(dark_rate: f64) -> DetectorSpec {
    DetectorSpec {
        coupling_efficiency: 0.59,
        detection_efficiency: 0.59,
        dark_rate,
        bin_width: 4.096e-9,
        timing_jitter_sigma: 0.0,
    }
}

fn layout(first_trial: u64, trials: u64) -> RunLayout {
    RunLayout {
        gate: GATE,
        first_trial,
        trials,
        spatial_modes: 3,
        stream_family: 1,
    }
}

fn within_3_sigma(observed: f64, expected: f64, sigma: f64) -> bool {
    (observed - expected).abs() <= 3.0 * sigma
}

#[test]
fn efficiency_thinning_matches_expected_rate() {
    let (mu, energy) = (0.5, 0.6);
    let sim = simulate_trials(&source(mu), &detector(0.0), &boxcar(energy), &layout(0, TRIALS), 7).unwrap();
    let n = TRIALS as f64;

    let emitted = sim.emitted_photons as f64;
    assert!(within_3_sigma(emitted, mu * n, (mu * n).sqrt()), "emitted {emitted}");

    let eta = 0.59 * 0.59;
    let survive = sim.surviving_photons as f64;
    assert!(
        within_3_sigma(survive, eta * emitted, (emitted * eta * (1.0 - eta)).sqrt()),
        "surviving {survive}"
    );

    let p = energy;
    let detected = sim.records.len() as f64;
    assert!(
        within_3_sigma(detected, p * survive, (survive * p * (1.0 - p)).sqrt()),
        "detected {detected}"
    );
    assert!(sim.records.iter().all(|r| r.origin == Some(Origin::Signal)));
    assert!(sim.records.iter().all(|r| r.timestamp >= 0.0 && r.timestamp < 500e-9 + 1e-12));
}

#[test]
fn detected_counts_per_trial_are_poissonian() {
    // Thinning a Poisson source leaves a Poisson count: P(no click) = e^{-m}.
    let (mu, energy) = (2.0, 0.8);
    let sim = simulate_trials(&source(mu), &detector(0.0), &boxcar(energy), &layout(0, TRIALS), 11).unwrap();
    let m = mu * 0.59 * 0.59 * energy;
    let mut per_trial = std::collections::HashMap::<u64, u64>::new();
    for r in &sim.records {
        *per_trial.entry(r.trial).or_default() += 1;
    }
    let n = TRIALS as f64;
    let p0 = (-m).exp();
    let zero = n - per_trial.len() as f64;
    assert!(within_3_sigma(zero, n * p0, (n * p0 * (1.0 - p0)).sqrt()), "zero-click trials {zero}");
    let p1 = m * p0;
    let one = per_trial.values().filter(|&&c| c == 1).count() as f64;
    assert!(within_3_sigma(one, n * p1, (n * p1 * (1.0 - p1)).sqrt()), "one-click trials {one}");
}

#[test]
fn dark_counts_follow_rate_and_are_uniform() {
    let rate = 1e5;
    let sim = simulate_trials(&source(0.0), &detector(rate), &boxcar(0.5), &layout(0, TRIALS), 3).unwrap();
    assert_eq!(sim.emitted_photons, 0);
    let expected = rate * GATE * TRIALS as f64;
    let observed = sim.dark_events as f64;
    assert!(within_3_sigma(observed, expected, expected.sqrt()), "darks {observed} vs {expected}");
    assert_eq!(sim.records.len() as u64, sim.dark_events);
    assert!(sim.records.iter().all(|r| r.origin == Some(Origin::Dark)));

    // Kolmogorov-Smirnov against U(0, gate); 1.63/sqrt(n) is the 1% level.
    let mut u: Vec<f64> = sim.records.iter().map(|r| r.timestamp / GATE).collect();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    let d = u
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max);
    assert!(d < 1.63 / n.sqrt(), "KS statistic {d}");
}

#[test]
fn channels_cycle_with_trial_id() {
    let sim = simulate_trials(&source(1.0), &detector(1e4), &boxcar(0.9), &layout(5, 3000), 1).unwrap();
    assert!(sim.records.iter().all(|r| r.channel == (r.trial % 3) as usize));
    assert!(sim.records.iter().all(|r| (5..3005).contains(&r.trial)));
    assert!(sim
        .records
        .windows(2)
        .all(|w| (w[0].trial, w[0].timestamp) <= (w[1].trial, w[1].timestamp)));
}

fn events_bytes(seed: u64, parts: &[(u64, u64)]) -> Vec<u8> {
    let mut records = Vec::new();
    for &(first, trials) in parts {
        records.extend(
            simulate_trials(&source(0.12), &detector(150.0), &boxcar(0.4), &layout(first, trials), seed)
                .unwrap()
                .records,
        );
    }
    let mut out = Vec::new();
    write_events(&records, &mut out).unwrap();
    out
}

#[test]
fn identical_seeds_give_identical_files() {
    let a = events_bytes(42, &[(0, 100_000)]);
    let b = events_bytes(42, &[(0, 100_000)]);
    assert_eq!(a, b);
    // Splitting the run does not change any trial.
    let c = events_bytes(42, &[(0, 37_000), (37_000, 63_000)]);
    assert_eq!(a, c);
    assert_ne!(a, events_bytes(43, &[(0, 100_000)]));
}

#[test]
fn timing_jitter_broadens_without_biasing() {
    let mut det = detector(0.0);
    let trace = boxcar(0.9);
    let plain = simulate_trials(&source(1.0), &det, &trace, &layout(0, 50_000), 9).unwrap();
    det.timing_jitter_sigma = 20e-9;
    let jittered = simulate_trials(&source(1.0), &det, &trace, &layout(0, 50_000), 9).unwrap();
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var, n)
    };
    let t0: Vec<f64> = plain.records.iter().map(|r| r.timestamp).collect();
    // Drop events jittered across the gate start so the comparison is fair.
    let t1: Vec<f64> = jittered
        .records
        .iter()
        .map(|r| r.timestamp)
        .filter(|&t| (100e-9..400e-9).contains(&t))
        .collect();
    let t0c: Vec<f64> = t0.iter().copied().filter(|&t| (100e-9..400e-9).contains(&t)).collect();
    let (m0, _, n0) = stats(&t0c);
    let (m1, _, n1) = stats(&t1);
    let sd = (300e-9f64.powi(2) / 12.0).sqrt();
    assert!((m0 - m1).abs() < 3.0 * sd * (1.0 / n0 + 1.0 / n1).sqrt() + 1e-9);
    // Jitter spreads events past the trailing edge of the boxcar.
    assert!(plain.records.iter().all(|r| r.timestamp < 500e-9 + 1e-12));
    assert!(jittered.records.iter().any(|r| r.timestamp > 520e-9));
}
