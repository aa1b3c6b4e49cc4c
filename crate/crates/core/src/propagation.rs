//! Pulse propagation through a comb and echo bookkeeping.
//!
//! Propagation multiplies the input spectrum by the medium response and
//! returns to the time domain. Traces are reported on a time axis where the
//! input pulse peaks at `emission_time`; the periodic FFT window is rotated
//! so that it begins one eighth of a window before that instant.

use std::io::{BufRead, Write};

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{to_fft_order, FrequencyGrid, TransferFunction};

/// Largest tolerated input amplitude at the band edges, relative to the peak.
pub const MAX_EDGE_AMPLITUDE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PulseShape {
    #[default]
    Gaussian,
}

/// Transform-limited input pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec<T> {
    #[serde(default)]
    pub shape: PulseShape,
    /// FWHM of the power spectrum (Hz).
    pub spectral_fwhm: T,
    /// Centre frequency relative to the band centre (Hz).
    pub carrier_offset: T,
    /// Peak time of the input pulse within its temporal mode (s).
    pub emission_time: T,
}

impl<T: Real> PulseSpec<T> {
    pub fn gaussian(spectral_fwhm: T, carrier_offset: T) -> Self {
        Self {
            shape: PulseShape::Gaussian,
            spectral_fwhm,
            carrier_offset,
            emission_time: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spectral_fwhm > T::zero()) || !self.spectral_fwhm.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "pulse spectral FWHM must be positive, got {:?}",
                self.spectral_fwhm
            )));
        }
        if !self.carrier_offset.is_finite() || !self.emission_time.is_finite() {
            return Err(Error::InvalidParameter("pulse carrier and emission time must be finite".into()));
        }
        Ok(())
    }

    /// Rejects pulses wide enough to overlap a neighbouring frequency mode.
    pub fn check_mode_spacing(&self, mode_spacing: T) -> Result<()> {
        if self.spectral_fwhm < mode_spacing {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "pulse FWHM {:?} Hz is not below the mode spacing {:?} Hz",
                self.spectral_fwhm, mode_spacing
            )))
        }
    }

    /// Field amplitude spectrum at `nu`; its square has FWHM `spectral_fwhm`.
    pub fn amplitude(&self, nu: T) -> T {
        let x = (nu - self.carrier_offset) / self.spectral_fwhm;
        (-T::lit(2.0) * T::LN_2() * x * x).exp()
    }

    /// FWHM of the temporal intensity, 4 ln2 / (π FWHM_ν).
    pub fn temporal_fwhm(&self) -> T {
        T::lit(2.0) * T::LN_2() / (T::PI() * self.spectral_fwhm)
    }

    /// Samples the input spectrum on `grid`, rejecting clipped pulses.
    pub fn spectrum(&self, grid: &FrequencyGrid<T>) -> Result<Vec<Complex<T>>> {
        self.validate()?;
        let half = grid.span() / T::lit(2.0);
        if self.carrier_offset.abs() >= half {
            return Err(Error::InvalidParameter(format!(
                "carrier offset {:?} Hz outside the grid (±{:?} Hz)",
                self.carrier_offset, half
            )));
        }
        let edge = self
            .amplitude(grid.frequency(0))
            .max(self.amplitude(grid.frequency(grid.len() - 1)));
        if edge > T::lit(MAX_EDGE_AMPLITUDE) {
            return Err(Error::PulseClipped {
                edge_amplitude: edge.as_f64(),
            });
        }
        Ok(grid
            .frequencies()
            .map(|nu| Complex::new(self.amplitude(nu), T::zero()))
            .collect())
    }
}

/// Sampled intensity, normalised so that the input pulse carries energy 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalTrace<T> {
    pub dt: T,
    /// Time of the first sample (s).
    pub start: T,
    /// Power (1/s); energy is `sum(intensity) * dt`.
    pub intensity: Vec<T>,
}

impl<T: Real> TemporalTrace<T> {
    pub fn time(&self, i: usize) -> T {
        self.start + T::from_usize_lossy(i) * self.dt
    }

    /// Exclusive end of the covered time range.
    pub fn end(&self) -> T {
        self.time(self.intensity.len())
    }

    pub fn energy(&self) -> T {
        self.intensity.iter().fold(T::zero(), |a, &b| a + b) * self.dt
    }

    /// Energy of samples whose time lies in `[from, to)`.
    pub fn energy_between(&self, from: T, to: T) -> T {
        let mut acc = T::zero();
        for (i, &v) in self.intensity.iter().enumerate() {
            let t = self.time(i);
            if t >= from && t < to {
                acc = acc + v;
            }
        }
        acc * self.dt
    }

    /// Time of the largest sample in `[from, to)`.
    pub fn argmax_between(&self, from: T, to: T) -> Option<T> {
        let mut best: Option<(T, T)> = None;
        for (i, &v) in self.intensity.iter().enumerate() {
            let t = self.time(i);
            if t >= from && t < to && best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, t));
            }
        }
        best.map(|(_, t)| t)
    }

    pub fn shifted(mut self, by: T) -> Self {
        self.start = self.start + by;
        self
    }

    /// Samples whose time lies in `[from, to)`.
    pub fn cropped(&self, from: T, to: T) -> Self {
        let keep: Vec<usize> = (0..self.intensity.len())
            .filter(|&i| self.time(i) >= from && self.time(i) < to)
            .collect();
        let first = keep.first().copied().unwrap_or(0);
        Self {
            dt: self.dt,
            start: self.time(first),
            intensity: keep.iter().map(|&i| self.intensity[i]).collect(),
        }
    }
}

/// Inverse transform of a natural-order spectrum to the field on samples
/// `t_n = n / span`, without normalisation.
pub fn propagate_spectrum<T: Real>(spectrum: &[Complex<T>], tf: &TransferFunction<T>) -> Result<Vec<Complex<T>>> {
    if spectrum.len() != tf.grid().len() {
        return Err(Error::GridMismatch);
    }
    let filtered: Vec<Complex<T>> = spectrum.iter().zip(tf.response()).map(|(a, h)| a * h).collect();
    Ok(to_time_domain(&filtered))
}

fn to_time_domain<T: Real>(spectrum: &[Complex<T>]) -> Vec<Complex<T>> {
    let mut buf = to_fft_order(spectrum);
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf
}

fn lead_samples(n: usize) -> usize {
    n / 8
}

fn trace_from_field<T: Real>(field: &[Complex<T>], grid: &FrequencyGrid<T>, norm: T, emission_time: T) -> TemporalTrace<T> {
    let n = field.len();
    let lead = lead_samples(n);
    let dt = grid.time_step();
    let intensity = (0..n).map(|i| field[(i + n - lead) % n].norm_sqr() / norm).collect();
    TemporalTrace {
        dt,
        start: emission_time - T::from_usize_lossy(lead) * dt,
        intensity,
    }
}

fn field_energy<T: Real>(field: &[Complex<T>], dt: T) -> T {
    field.iter().fold(T::zero(), |a, v| a + v.norm_sqr()) * dt
}

/// Intensity of the unfiltered input pulse on the trace time axis.
pub fn input_trace<T: Real>(pulse: &PulseSpec<T>, grid: &FrequencyGrid<T>) -> Result<TemporalTrace<T>> {
    let field = to_time_domain(&pulse.spectrum(grid)?);
    let norm = field_energy(&field, grid.time_step());
    Ok(trace_from_field(&field, grid, norm, pulse.emission_time))
}

/// Propagates `pulse` through the medium described by `tf`.
pub fn propagate<T: Real>(pulse: &PulseSpec<T>, tf: &TransferFunction<T>) -> Result<TemporalTrace<T>> {
    let grid = tf.grid();
    let spectrum = pulse.spectrum(grid)?;
    let input = to_time_domain(&spectrum);
    let norm = field_energy(&input, grid.time_step());
    let output = propagate_spectrum(&spectrum, tf)?;
    Ok(trace_from_field(&output, grid, norm, pulse.emission_time))
}

/// Energy collected around one echo order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EchoWindow<T> {
    pub order: usize,
    /// Window centre n/Δ (s).
    pub center: T,
    pub start: T,
    pub end: T,
    pub energy: T,
    /// Time of the largest trace sample in the window.
    pub peak_time: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EchoSummary<T> {
    pub spacing: T,
    /// Order 0 (transmitted light) first.
    pub windows: Vec<EchoWindow<T>>,
}

impl<T: Real> EchoSummary<T> {
    pub fn energy(&self, order: usize) -> T {
        self.windows.get(order).map_or(T::zero(), |w| w.energy)
    }

    pub fn transmitted(&self) -> T {
        self.energy(0)
    }

    pub fn total(&self) -> T {
        self.windows.iter().fold(T::zero(), |a, w| a + w.energy)
    }
}

/// Integrates the trace over windows of width 1/(2Δ) centred on n/Δ for
/// n = 0..=orders.
pub fn extract_echoes<T: Real>(trace: &TemporalTrace<T>, spacing: T, orders: usize) -> Result<EchoSummary<T>> {
    if !(spacing > T::zero()) {
        return Err(Error::InvalidParameter(format!("comb spacing must be positive, got {spacing:?}")));
    }
    let period = spacing.recip();
    let half_width = period / T::lit(4.0);
    let mut windows = Vec::with_capacity(orders + 1);
    for order in 0..=orders {
        let center = T::from_usize_lossy(order) * period;
        let (start, end) = (center - half_width, center + half_width);
        if start < trace.start || end > trace.end() {
            return Err(Error::WindowOutsideTrace {
                start_s: start.as_f64(),
                end_s: end.as_f64(),
                trace_start_s: trace.start.as_f64(),
                trace_end_s: trace.end().as_f64(),
            });
        }
        windows.push(EchoWindow {
            order,
            center,
            start,
            end,
            energy: trace.energy_between(start, end),
            peak_time: trace.argmax_between(start, end).unwrap_or(center),
        });
    }
    Ok(EchoSummary { spacing, windows })
}

/// First-echo efficiency approximation for gaussian teeth,
/// `d̃² e^{-d̃} e^{-7/F²} e^{-d0}` with `d̃ = (d/F) sqrt(π / (4 ln 2))`.
///
/// Numeric propagation is the reference; this is a cross-check only and does
/// not apply to square teeth.
pub fn analytic_echo_efficiency<T: Real>(peak_depth: T, finesse: T, background_depth: T) -> Result<T> {
    if !(finesse > T::one()) {
        return Err(Error::InvalidParameter(format!("finesse must exceed 1, got {finesse:?}")));
    }
    if !(peak_depth >= T::zero()) || !(background_depth >= T::zero()) {
        return Err(Error::InvalidParameter("optical depths must be non-negative".into()));
    }
    let effective = effective_depth(peak_depth, finesse);
    Ok(effective * effective
        * (-effective).exp()
        * (-T::lit(7.0) / (finesse * finesse)).exp()
        * (-background_depth).exp())
}

/// Comb-averaged optical depth of gaussian teeth.
pub fn effective_depth<T: Real>(peak_depth: T, finesse: T) -> T {
    peak_depth / finesse * (T::PI() / (T::lit(4.0) * T::LN_2())).sqrt()
}

/// Peak depth on the low-absorption branch (d̃ ≤ 2) whose analytic first-echo
/// efficiency equals `target`.
pub fn depth_for_efficiency<T: Real>(target: T, finesse: T, background_depth: T) -> Result<T> {
    let at = |d: T| analytic_echo_efficiency(d, finesse, background_depth);
    let d_max = T::lit(2.0) * finesse / (T::PI() / (T::lit(4.0) * T::LN_2())).sqrt();
    let best = at(d_max)?;
    if !(target >= T::zero()) || target > best {
        return Err(Error::InvalidParameter(format!(
            "target efficiency {target:?} outside [0, {best:?}] for finesse {finesse:?}, background {background_depth:?}"
        )));
    }
    let (mut lo, mut hi) = (T::zero(), d_max);
    for _ in 0..200 {
        let mid = (lo + hi) / T::lit(2.0);
        if at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / T::lit(2.0))
}

pub const TRACE_HEADER: &str = "# trace v1";

/// Writes `time_ns,intensity` rows.
pub fn write_trace<T: Real, W: Write>(trace: &TemporalTrace<T>, mut out: W) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for (i, v) in trace.intensity.iter().enumerate() {
        writeln!(out, "{:.4},{:.6e}", trace.time(i).as_f64() * 1e9, v.as_f64())?;
    }
    Ok(())
}

/// Reads a trace written by [`write_trace`]. The time step is taken from the
/// first two rows.
pub fn read_trace<R: BufRead>(input: R) -> Result<TemporalTrace<f64>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_header {
            if line != TRACE_HEADER {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected header `{TRACE_HEADER}`"),
                });
            }
            saw_header = true;
            continue;
        }
        let bad = || Error::Parse {
            line: i + 1,
            message: format!("expected `time_ns,intensity`, got `{line}`"),
        };
        let (t, v) = line.split_once(',').ok_or_else(bad)?;
        let t: f64 = t.trim().parse().map_err(|_| bad())?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        rows.push((t * 1e-9, v));
    }
    if rows.len() < 2 {
        return Err(Error::Parse {
            line: 0,
            message: "a trace needs at least two samples".into(),
        });
    }
    Ok(TemporalTrace {
        dt: rows[1].0 - rows[0].0,
        start: rows[0].0,
        intensity: rows.into_iter().map(|(_, v)| v).collect(),
    })
}
