//! Config-to-results orchestration shared by the subcommands.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use afcmap::analysis::{summarize, EfficiencyReport, Normalization, WindowSet};
use afcmap::detection::{histogram, read_events, simulate_trials, write_events, DetectionRecord, Histogram, RunLayout};
use afcmap::propagation::{analytic_echo_efficiency, extract_echoes, propagate, TemporalTrace};
use afcmap::spectral::{build_comb, compose, to_transfer_function, AbsorptionProfile, CombSpec, FrequencyGrid, TransferFunction};

use crate::config::RunConfig;

pub struct Medium {
    pub grid: FrequencyGrid<f64>,
    pub combs: Vec<CombSpec<f64>>,
    pub profile: AbsorptionProfile<f64>,
    pub transfer: TransferFunction<f64>,
}

pub fn build_medium(cfg: &RunConfig) -> Result<Medium> {
    let grid = cfg.grid()?;
    let combs = cfg.comb_specs()?;
    let profiles = combs
        .iter()
        .enumerate()
        .map(|(i, c)| build_comb(c, &grid).with_context(|| format!("comb {}", i + 1)))
        .collect::<Result<Vec<_>>>()?;
    let profile = compose(&profiles)?;
    let transfer = to_transfer_function(&profile);
    Ok(Medium {
        grid,
        combs,
        profile,
        transfer,
    })
}

/// Output trace for a pulse in each frequency mode.
pub fn mode_traces(cfg: &RunConfig, medium: &Medium) -> Result<Vec<TemporalTrace<f64>>> {
    cfg.mode_offsets()?
        .par_iter()
        .enumerate()
        .map(|(i, &offset)| propagate(&cfg.pulse(offset), &medium.transfer).with_context(|| format!("frequency mode {}", i + 1)))
        .collect()
}

/// Trial ids of frequency mode `k` (1-based) occupy
/// `[(k-1) N_in, k N_in)`.
pub fn split_by_mode(records: &[DetectionRecord], pulses_per_mode: u64, n_freq: usize) -> Result<Vec<Vec<DetectionRecord>>> {
    if pulses_per_mode == 0 {
        bail!("pulses_per_mode must be positive");
    }
    let mut per_mode = vec![Vec::new(); n_freq];
    for r in records {
        let i = r.trial / pulses_per_mode;
        if i >= n_freq as u64 {
            bail!(
                "trial {} lies beyond the {} x {} trials of the configured scheme",
                r.trial,
                n_freq,
                pulses_per_mode
            );
        }
        per_mode[i as usize].push(*r);
    }
    Ok(per_mode)
}

pub struct Analysis {
    pub report: EfficiencyReport,
    pub histograms: Vec<Histogram>,
}

pub fn analyze_records(cfg: &RunConfig, records: &[DetectionRecord]) -> Result<Analysis> {
    let scheme = cfg.scheme_config()?;
    let per_mode = split_by_mode(records, cfg.source.pulses_per_mode, scheme.n_freq)?;
    let windows = WindowSet::from_scheme(&scheme);
    let d = &cfg.detector;
    let norm = Normalization {
        pulses_per_mode: cfg.source.pulses_per_mode,
        mean_photon_number: cfg.source.mean_photon_number,
        coupling_efficiency: d.coupling_efficiency,
        detection_efficiency: d.detection_efficiency,
    };
    let report = summarize(&per_mode, &windows, &norm, Some(d.dark_rate_hz))?;
    let histograms = per_mode
        .iter()
        .map(|r| histogram(r, d.bin_width_s, cfg.gate()))
        .collect::<afcmap::Result<Vec<_>>>()?;
    Ok(Analysis { report, histograms })
}

pub struct SimulationOutput {
    pub medium: Medium,
    pub traces: Vec<TemporalTrace<f64>>,
    /// Contents of the events file.
    pub events: Vec<u8>,
    /// Records as read back from `events`.
    pub records: Vec<DetectionRecord>,
    pub analysis: Analysis,
}

/// Runs the full pipeline. The report is computed from the serialized events
/// so that re-analysing the file reproduces it exactly.
pub fn run_simulation(cfg: &RunConfig) -> Result<SimulationOutput> {
    let medium = build_medium(cfg)?;
    let traces = mode_traces(cfg, &medium)?;
    let source = cfg.source_spec();
    let detector = cfg.detector_spec();
    let n_in = cfg.source.pulses_per_mode;
    let mut records = Vec::new();
    for (i, trace) in traces.iter().enumerate() {
        let layout = RunLayout {
            gate: cfg.gate(),
            first_trial: i as u64 * n_in,
            trials: n_in,
            spatial_modes: cfg.scheme.n_spatial,
            stream_family: 0,
        };
        let sim = simulate_trials(&source, &detector, trace, &layout, cfg.seed)
            .with_context(|| format!("simulating frequency mode {}", i + 1))?;
        records.extend(sim.records);
    }
    let mut events = Vec::new();
    write_events(&records, &mut events)?;
    let records = read_events(events.as_slice())?;
    let analysis = analyze_records(cfg, &records)?;
    Ok(SimulationOutput {
        medium,
        traces,
        events,
        records,
        analysis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub peak_depth: f64,
    pub finesse: f64,
    pub background_depth: f64,
    pub eta_numeric: f64,
    pub eta_analytic: f64,
}

/// First-echo efficiency of the selected comb alone over the configured
/// (d, F, d0) grid, numerically and from the analytic approximation.
pub fn sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    let s = &cfg.sweep;
    let combs = cfg.comb_specs()?;
    let Some(base) = s.comb.checked_sub(1).and_then(|i| combs.get(i)) else {
        bail!("sweep comb {} does not exist (N_F = {})", s.comb, combs.len());
    };
    let grid = cfg.grid()?;
    let pulse = cfg.pulse(base.center_offset);
    let mut points = Vec::new();
    for d in s.peak_depth.points()? {
        for f in s.finesse.points()? {
            for d0 in s.background_depth.points()? {
                points.push((d, f, d0));
            }
        }
    }
    points
        .par_iter()
        .map(|&(d, f, d0)| {
            let spec = CombSpec::new(base.center_offset, base.spacing, f, d, d0, base.tooth_shape, base.bandwidth)
                .with_context(|| format!("sweep point d={d}, F={f}, d0={d0}"))?;
            grid.check_resolves(&spec)
                .with_context(|| format!("sweep point d={d}, F={f}, d0={d0}"))?;
            let tf = to_transfer_function(&build_comb(&spec, &grid)?);
            let trace = propagate(&pulse, &tf)?;
            Ok(SweepRow {
                peak_depth: d,
                finesse: f,
                background_depth: d0,
                eta_numeric: extract_echoes(&trace, spec.spacing, 1)?.energy(1),
                eta_analytic: analytic_echo_efficiency(d, f, d0)?,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "d,finesse,d0,eta_numeric,eta_analytic";

pub fn write_sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.8},{:.8}\n",
            r.peak_depth, r.finesse, r.background_depth, r.eta_numeric, r.eta_analytic
        ));
    }
    s
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SWEEP_HEADER) {
        bail!("expected header `{SWEEP_HEADER}`");
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let v: Vec<f64> = l
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("line {}: bad number", i + 2))?;
            let [peak_depth, finesse, background_depth, eta_numeric, eta_analytic] = v[..] else {
                bail!("line {}: expected 5 fields", i + 2);
            };
            Ok(SweepRow {
                peak_depth,
                finesse,
                background_depth,
                eta_numeric,
                eta_analytic,
            })
        })
        .collect()
}

/// Peak depth where `eta` (sampled along increasing depth) first reaches
/// `target`, by linear interpolation.
pub fn interpolate_depth(rows: &[SweepRow], target: f64, eta: impl Fn(&SweepRow) -> f64) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let (a, b) = (eta(&w[0]), eta(&w[1]));
        ((a - target) * (b - target) <= 0.0 && a != b)
            .then(|| w[0].peak_depth + (target - a) / (b - a) * (w[1].peak_depth - w[0].peak_depth))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use afcmap::detection::Origin;

    fn rec(trial: u64, ns: f64) -> DetectionRecord {
        DetectionRecord {
            trial,
            channel: (trial % 3) as usize,
            timestamp: ns * 1e-9,
            origin: Some(Origin::Signal),
        }
    }

    #[test]
    fn trials_split_into_mode_blocks() {
        let recs = [rec(0, 1.0), rec(9, 2.0), rec(10, 3.0), rec(29, 4.0)];
        let split = split_by_mode(&recs, 10, 3).unwrap();
        assert_eq!(split.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1, 1]);
        assert!(split_by_mode(&[rec(30, 1.0)], 10, 3).is_err());
    }

    #[test]
    fn interpolation_finds_crossing() {
        let row = |d: f64, e: f64| SweepRow {
            peak_depth: d,
            finesse: 4.0,
            background_depth: 0.0,
            eta_numeric: e,
            eta_analytic: e,
        };
        let rows = [row(1.0, 0.1), row(2.0, 0.2), row(3.0, 0.25)];
        assert!((interpolate_depth(&rows, 0.15, |r| r.eta_analytic).unwrap() - 1.5).abs() < 1e-12);
        assert!(interpolate_depth(&rows, 0.3, |r| r.eta_analytic).is_none());
    }

    #[test]
    fn sweep_csv_roundtrip() {
        let rows = vec![SweepRow {
            peak_depth: 2.5,
            finesse: 4.0,
            background_depth: 0.15,
            eta_numeric: 0.123,
            eta_analytic: 0.125,
        }];
        assert_eq!(read_sweep_csv(&write_sweep_csv(&rows)).unwrap(), rows);
    }
}
