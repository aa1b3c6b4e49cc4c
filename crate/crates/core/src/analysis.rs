//! Echo efficiency and cross-talk estimates from detection records.
//!
//! Counts are corrected for coupling and detection efficiency and divided by
//! the number of input photons `N_in · μ`. Dark counts are not subtracted;
//! the expected dark floor is reported separately.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::detection::{DetectionRecord, Histogram};
use crate::error::{Error, Result};
use crate::mapping::SchemeConfig;

/// Expected arrival window of each frequency mode, relative to the start of
/// the temporal mode. Entry `k - 1` belongs to mode `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    windows: Vec<(f64, f64)>,
}

impl WindowSet {
    /// Windows `[k Δt′, (k+1) Δt′)` for k = 1..=N_F.
    pub fn from_scheme(config: &SchemeConfig<f64>) -> Self {
        let windows = (1..=config.n_freq)
            .map(|k| config.window(0, k))
            .collect();
        Self { windows }
    }

    /// Arbitrary absolute windows, e.g. for external data.
    pub fn custom(windows: Vec<(f64, f64)>) -> Result<Self> {
        if windows.iter().any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidParameter("every window needs start < end".into()));
        }
        let mut sorted = windows.clone();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if sorted.windows(2).any(|w| w[0].1 > w[1].0) {
            return Err(Error::InvalidParameter("windows must be pairwise disjoint".into()));
        }
        Ok(Self { windows })
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn window(&self, k: usize) -> Option<(f64, f64)> {
        k.checked_sub(1).and_then(|i| self.windows.get(i)).copied()
    }

    pub fn duration(&self, k: usize) -> Option<f64> {
        self.window(k).map(|(a, b)| b - a)
    }

    pub fn count(&self, records: &[DetectionRecord], k: usize) -> u64 {
        let Some((a, b)) = self.window(k) else {
            return 0;
        };
        records.iter().filter(|r| r.timestamp >= a && r.timestamp < b).count() as u64
    }
}

/// Inputs needed to turn counts into efficiencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub pulses_per_mode: u64,
    pub mean_photon_number: f64,
    pub coupling_efficiency: f64,
    pub detection_efficiency: f64,
}

impl Normalization {
    pub fn input_photons(&self) -> f64 {
        self.pulses_per_mode as f64 * self.mean_photon_number
    }

    pub fn correction(&self) -> f64 {
        self.coupling_efficiency * self.detection_efficiency
    }

    fn denominator(&self) -> Result<f64> {
        let d = self.correction() * self.input_photons();
        if d > 0.0 && d.is_finite() {
            Ok(d)
        } else {
            Err(Error::InvalidParameter(
                "N_in · μ · η_c · η_d must be positive to normalise counts".into(),
            ))
        }
    }
}

/// Value with its Poisson counting uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

impl Estimate {
    fn from_counts(counts: u64, denominator: f64) -> Self {
        Self {
            value: counts as f64 / denominator,
            sigma: (counts as f64).sqrt() / denominator,
        }
    }
}

fn check_mode(windows: &WindowSet, k: usize) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::InvalidParameter("window set is empty".into()));
    }
    if k == 0 || k > windows.len() {
        return Err(Error::ModeOutOfRange { k, n_freq: windows.len() });
    }
    Ok(())
}

/// η_echo: corrected counts inside mode `k`'s window over `N_in · μ`.
pub fn echo_efficiency(records: &[DetectionRecord], windows: &WindowSet, k: usize, norm: &Normalization) -> Result<Estimate> {
    check_mode(windows, k)?;
    Ok(Estimate::from_counts(windows.count(records, k), norm.denominator()?))
}

/// η_error: corrected counts inside every other mode's window over
/// `N_in · μ`, for records of trials where mode `k` was sent.
pub fn error_rate(records: &[DetectionRecord], windows: &WindowSet, k: usize, norm: &Normalization) -> Result<Estimate> {
    check_mode(windows, k)?;
    if windows.len() < 2 {
        return Err(Error::TooFewModes { need: 2, have: windows.len() });
    }
    Ok(Estimate::from_counts(error_counts(records, windows, k), norm.denominator()?))
}

fn error_counts(records: &[DetectionRecord], windows: &WindowSet, k: usize) -> u64 {
    (1..=windows.len()).filter(|&m| m != k).map(|m| windows.count(records, m)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeEfficiency {
    pub mode: usize,
    pub eta_echo: f64,
    pub eta_echo_sigma: f64,
    pub eta_error: f64,
    pub eta_error_sigma: f64,
    pub raw_counts: u64,
    pub corrected_counts: f64,
    pub raw_error_counts: u64,
    pub corrected_error_counts: f64,
}

/// Efficiencies that dark counts alone would produce.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DarkFloor {
    pub eta_echo: f64,
    pub eta_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyReport {
    pub modes: Vec<ModeEfficiency>,
    pub coupling_efficiency: f64,
    pub detection_efficiency: f64,
    pub pulses_per_mode: u64,
    pub mean_photon_number: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dark_floor: Option<DarkFloor>,
}

impl EfficiencyReport {
    pub fn mode(&self, k: usize) -> Option<&ModeEfficiency> {
        self.modes.iter().find(|m| m.mode == k)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Expected dark-count contribution per window, `dark_rate · duration`
/// per trial, in efficiency units.
pub fn dark_floor(windows: &WindowSet, k: usize, norm: &Normalization, dark_rate: f64) -> Result<DarkFloor> {
    check_mode(windows, k)?;
    let denom = norm.denominator()? / norm.pulses_per_mode as f64;
    let per_window = |m: usize| dark_rate * windows.duration(m).unwrap_or(0.0) / denom;
    Ok(DarkFloor {
        eta_echo: per_window(k),
        eta_error: (1..=windows.len()).filter(|&m| m != k).map(per_window).sum(),
    })
}

/// Builds the report. `per_mode[i]` holds the records of trials where mode
/// `i + 1` was sent. With no input photons (μ = 0) every efficiency is zero.
pub fn summarize(
    per_mode: &[Vec<DetectionRecord>],
    windows: &WindowSet,
    norm: &Normalization,
    dark_rate: Option<f64>,
) -> Result<EfficiencyReport> {
    if windows.is_empty() {
        return Err(Error::InvalidParameter("window set is empty".into()));
    }
    if per_mode.len() > windows.len() {
        return Err(Error::ModeOutOfRange {
            k: per_mode.len(),
            n_freq: windows.len(),
        });
    }
    let denom = norm.denominator().ok();
    let correction = norm.correction();
    let corrected = |c: u64| if correction > 0.0 { c as f64 / correction } else { 0.0 };
    let modes = per_mode
        .iter()
        .enumerate()
        .map(|(i, records)| {
            let k = i + 1;
            let raw = windows.count(records, k);
            let raw_err = error_counts(records, windows, k);
            let (echo, err) = match denom {
                Some(d) => (Estimate::from_counts(raw, d), Estimate::from_counts(raw_err, d)),
                None => (Estimate { value: 0.0, sigma: 0.0 }, Estimate { value: 0.0, sigma: 0.0 }),
            };
            ModeEfficiency {
                mode: k,
                eta_echo: echo.value,
                eta_echo_sigma: echo.sigma,
                eta_error: err.value,
                eta_error_sigma: err.sigma,
                raw_counts: raw,
                corrected_counts: corrected(raw),
                raw_error_counts: raw_err,
                corrected_error_counts: corrected(raw_err),
            }
        })
        .collect();
    let dark_floor = match (dark_rate, denom) {
        (Some(rate), Some(_)) => Some(dark_floor(windows, 1, norm, rate)?),
        _ => None,
    };
    Ok(EfficiencyReport {
        modes,
        coupling_efficiency: norm.coupling_efficiency,
        detection_efficiency: norm.detection_efficiency,
        pulses_per_mode: norm.pulses_per_mode,
        mean_photon_number: norm.mean_photon_number,
        dark_floor,
    })
}

pub const HISTOGRAM_HEADER: &str = "bin_start_ns,counts";

pub fn write_histogram_csv<W: Write>(h: &Histogram, mut out: W) -> Result<()> {
    writeln!(out, "{HISTOGRAM_HEADER}")?;
    for (i, c) in h.counts.iter().enumerate() {
        writeln!(out, "{:.3},{}", h.bin_start(i) * 1e9, c)?;
    }
    Ok(())
}

pub fn read_histogram_csv<R: BufRead>(input: R) -> Result<Histogram> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == HISTOGRAM_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{HISTOGRAM_HEADER}`"),
            })
        }
    }
    let mut starts = Vec::new();
    let mut counts = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let err = || Error::Parse {
            line: i + 2,
            message: format!("malformed histogram row `{line}`"),
        };
        let (a, b) = line.split_once(',').ok_or_else(err)?;
        starts.push(a.trim().parse::<f64>().map_err(|_| err())?);
        counts.push(b.trim().parse::<u64>().map_err(|_| err())?);
    }
    let bin_width = if starts.len() >= 2 { (starts[1] - starts[0]) * 1e-9 } else { 0.0 };
    Ok(Histogram { bin_width, counts })
}
