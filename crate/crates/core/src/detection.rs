//! Monte Carlo photon counting.
//!
//! Each trial is one weak coherent pulse. The photon number is Poisson(μ);
//! every photon is kept with probability η_c·η_d and, if kept, either leaves
//! the medium at a time drawn from the output trace or is lost (with
//! probability one minus the trace energy). Dark counts are Poisson over the
//! detection gate and uniform within it. Photons outside the gate
//! `[0, gate)` are not recorded.
//!
//! Trial `i` draws from its own ChaCha stream, so results do not depend on how
//! trials are split across threads.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::{PulseSpec, TemporalTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Fibre coupling efficiency η_c.
    pub coupling_efficiency: f64,
    /// Detector quantum efficiency η_d.
    pub detection_efficiency: f64,
    /// Dark count rate (1/s).
    pub dark_rate: f64,
    /// Histogram bin width (s).
    pub bin_width: f64,
    /// Standard deviation of gaussian timing jitter (s).
    #[serde(default)]
    pub timing_jitter_sigma: f64,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {p}")))
            }
        };
        prob("coupling efficiency", self.coupling_efficiency)?;
        prob("detection efficiency", self.detection_efficiency)?;
        if !(self.dark_rate >= 0.0) || !self.dark_rate.is_finite() {
            return Err(Error::InvalidParameter(format!("dark rate must be non-negative, got {}", self.dark_rate)));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::InvalidParameter(format!("bin width must be positive, got {}", self.bin_width)));
        }
        if !(self.timing_jitter_sigma >= 0.0) {
            return Err(Error::InvalidParameter("timing jitter must be non-negative".into()));
        }
        Ok(())
    }

    /// Overall probability that an emitted photon is counted, η_c·η_d.
    pub fn efficiency(&self) -> f64 {
        self.coupling_efficiency * self.detection_efficiency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    /// Mean photon number per pulse μ.
    pub mean_photon_number: f64,
    /// Pulses per frequency mode N_in.
    pub pulses_per_mode: u64,
    pub pulse: PulseSpec<f64>,
}

impl SourceSpec {
    /// μ = 0 is accepted and produces no signal photons.
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_photon_number >= 0.0) || !self.mean_photon_number.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mean photon number must be non-negative, got {}",
                self.mean_photon_number
            )));
        }
        if self.pulses_per_mode == 0 {
            return Err(Error::InvalidParameter("at least one pulse per mode is required".into()));
        }
        self.pulse.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Signal,
    Dark,
}

impl Origin {
    fn as_str(self) -> &'static str {
        match self {
            Origin::Signal => "signal",
            Origin::Dark => "dark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub trial: u64,
    pub channel: usize,
    /// Time since the start of the trial's temporal mode (s).
    pub timestamp: f64,
    /// Known for simulated data only.
    pub origin: Option<Origin>,
}

/// How trials map onto ids and channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunLayout {
    /// Detection gate length (s); events are kept in `[0, gate)`.
    pub gate: f64,
    /// Id of the first trial; trial `i` occupies temporal mode `i`.
    pub first_trial: u64,
    pub trials: u64,
    /// Number of spatial channels; trial `i` lands on channel `i mod N_S`.
    pub spatial_modes: usize,
    /// Selects an independent family of random streams, e.g. one per
    /// frequency mode.
    pub stream_family: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Simulation {
    /// Sorted by (trial, timestamp).
    pub records: Vec<DetectionRecord>,
    pub emitted_photons: u64,
    /// Photons that passed the coupling and detection efficiency draw.
    pub surviving_photons: u64,
    pub dark_events: u64,
}

/// Inverse-CDF sampler over a trace.
struct TraceSampler<'a> {
    trace: &'a TemporalTrace<f64>,
    cumulative: Vec<f64>,
}

impl<'a> TraceSampler<'a> {
    fn new(trace: &'a TemporalTrace<f64>) -> Result<Self> {
        if trace.intensity.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter("trace intensity must be finite and non-negative".into()));
        }
        let mut acc = 0.0;
        let cumulative: Vec<f64> = trace
            .intensity
            .iter()
            .map(|v| {
                acc += v * trace.dt;
                acc
            })
            .collect();
        if acc > 1.0 + 1e-9 {
            return Err(Error::UnnormalizedTrace(acc));
        }
        Ok(Self { trace, cumulative })
    }

    /// Arrival time of a photon that reaches the detector, or `None` when
    /// the photon is absorbed.
    fn sample<R: Rng>(&self, rng: &mut R) -> Option<f64> {
        let u: f64 = rng.random();
        let total = *self.cumulative.last()?;
        if u >= total {
            return None;
        }
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1);
        let within: f64 = rng.random();
        Some(self.trace.time(i) + (within - 0.5) * self.trace.dt)
    }
}

fn trial_rng(seed: u64, family: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ family.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(trial);
    rng
}

#[derive(Default)]
struct TrialOutcome {
    records: Vec<DetectionRecord>,
    emitted: u64,
    surviving: u64,
    dark: u64,
}

/// Runs `layout.trials` independent trials.
pub fn simulate_trials(
    source: &SourceSpec,
    detector: &DetectorSpec,
    trace: &TemporalTrace<f64>,
    layout: &RunLayout,
    seed: u64,
) -> Result<Simulation> {
    source.validate()?;
    detector.validate()?;
    if !(layout.gate > 0.0) {
        return Err(Error::InvalidParameter(format!("gate must be positive, got {}", layout.gate)));
    }
    if layout.spatial_modes == 0 {
        return Err(Error::InvalidParameter("at least one spatial channel is required".into()));
    }
    if trace.start > 0.0 || trace.end() < layout.gate {
        return Err(Error::WindowOutsideTrace {
            start_s: 0.0,
            end_s: layout.gate,
            trace_start_s: trace.start,
            trace_end_s: trace.end(),
        });
    }
    let sampler = TraceSampler::new(trace)?;
    let photons = (source.mean_photon_number > 0.0)
        .then(|| Poisson::new(source.mean_photon_number))
        .transpose()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let dark_mean = detector.dark_rate * layout.gate;
    let darks = (dark_mean > 0.0)
        .then(|| Poisson::new(dark_mean))
        .transpose()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let jitter = (detector.timing_jitter_sigma > 0.0)
        .then(|| Normal::new(0.0, detector.timing_jitter_sigma))
        .transpose()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let keep = detector.efficiency();

    let run_trial = |trial: u64| -> TrialOutcome {
        let mut out = TrialOutcome::default();
        let mut rng = trial_rng(seed, layout.stream_family, trial);
        let channel = (trial % layout.spatial_modes as u64) as usize;
        let n = photons.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
        out.emitted = n;
        for _ in 0..n {
            if !rng.random_bool(keep) {
                continue;
            }
            out.surviving += 1;
            let Some(mut t) = sampler.sample(&mut rng) else {
                continue;
            };
            if let Some(j) = &jitter {
                t += j.sample(&mut rng);
            }
            if (0.0..layout.gate).contains(&t) {
                out.records.push(DetectionRecord {
                    trial,
                    channel,
                    timestamp: t,
                    origin: Some(Origin::Signal),
                });
            }
        }
        let n_dark = darks.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
        out.dark = n_dark;
        for _ in 0..n_dark {
            let t = rng.random::<f64>() * layout.gate;
            out.records.push(DetectionRecord {
                trial,
                channel,
                timestamp: t,
                origin: Some(Origin::Dark),
            });
        }
        out.records.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        out
    };

    let first = layout.first_trial;
    let outcomes: Vec<TrialOutcome> = (first..first + layout.trials)
        .into_par_iter()
        .map(run_trial)
        .filter(|o| o.emitted > 0 || o.dark > 0)
        .collect();

    let mut sim = Simulation::default();
    for o in outcomes {
        sim.emitted_photons += o.emitted;
        sim.surviving_photons += o.surviving;
        sim.dark_events += o.dark;
        sim.records.extend(o.records);
    }
    Ok(sim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn bin_start(&self, i: usize) -> f64 {
        i as f64 * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Counts in bins whose start lies in `[from, to)`.
    pub fn sum_between(&self, from: f64, to: f64) -> u64 {
        self.counts
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let t = self.bin_start(*i);
                t >= from && t < to
            })
            .map(|(_, c)| c)
            .sum()
    }
}

/// Bins timestamps in `[0, span)` into bins `[i w, (i+1) w)`.
pub fn histogram(records: &[DetectionRecord], bin_width: f64, span: f64) -> Result<Histogram> {
    if !(bin_width > 0.0) || !(span >= 0.0) {
        return Err(Error::InvalidParameter("histogram needs a positive bin width and span".into()));
    }
    let bins = (span / bin_width).ceil() as usize;
    let mut counts = vec![0u64; bins];
    for r in records {
        if r.timestamp >= 0.0 && r.timestamp < span {
            let i = ((r.timestamp / bin_width).floor() as usize).min(bins.saturating_sub(1));
            counts[i] += 1;
        }
    }
    Ok(Histogram { bin_width, counts })
}

pub const EVENTS_HEADER: &str = "# events v1";

/// Writes `trial_id,channel,timestamp_ns[,origin]` lines.
pub fn write_events<W: Write>(records: &[DetectionRecord], mut out: W) -> Result<()> {
    writeln!(out, "{EVENTS_HEADER}")?;
    for r in records {
        write!(out, "{},{},{:.3}", r.trial, r.channel, r.timestamp * 1e9)?;
        if let Some(o) = r.origin {
            write!(out, ",{}", o.as_str())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parses an events file. Blank lines and `#` comments after the header are
/// ignored; malformed lines report their 1-based line number.
pub fn read_events<R: BufRead>(input: R) -> Result<Vec<DetectionRecord>> {
    let mut records = Vec::new();
    let mut saw_header = false;
    for (i, line) in input.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim();
        if !saw_header {
            if line.is_empty() {
                continue;
            }
            if line != EVENTS_HEADER {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected header `{EVENTS_HEADER}`"),
                });
            }
            saw_header = true;
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |what: &str| Error::Parse {
            line: line_no,
            message: format!("{what} in `{line}`"),
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(err("expected 3 or 4 comma-separated fields"));
        }
        let trial = fields[0].parse().map_err(|_| err("bad trial id"))?;
        let channel = fields[1].parse().map_err(|_| err("bad channel"))?;
        let ns: f64 = fields[2].parse().map_err(|_| err("bad timestamp"))?;
        if !(ns >= 0.0) || !ns.is_finite() {
            return Err(err("timestamp must be finite and non-negative"));
        }
        let origin = match fields.get(3) {
            None => None,
            Some(&"signal") => Some(Origin::Signal),
            Some(&"dark") => Some(Origin::Dark),
            Some(_) => return Err(err("origin must be `signal` or `dark`")),
        };
        records.push(DetectionRecord {
            trial,
            channel,
            timestamp: ns * 1e-9,
            origin,
        });
    }
    Ok(records)
}
