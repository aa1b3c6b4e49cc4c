//! Atomic frequency comb absorption profiles and the complex response of the
//! medium.
//!
//! Frequencies are offsets (Hz) from the centre of the simulation band. A
//! [`FrequencyGrid`] samples `sample_count` points at `(k - N/2) * df`, so the
//! band centre sits on sample `N/2`. The medium is treated as a linear,
//! time-invariant filter whose amplitude response is `exp(-d/2)` and whose
//! phase is fixed by causality (minimum phase).

use std::io::{BufRead, Write};

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fraction of the band, at each edge, blended towards the edge depth before
/// the phase is computed.
pub const TAPER_FRACTION: f64 = 0.05;

/// Minimum number of grid samples across one tooth FWHM.
pub const SAMPLES_PER_TOOTH: f64 = 10.0;

/// Minimum number of first-echo delays that must fit in the time window.
pub const ECHO_DELAYS_PER_WINDOW: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ToothShape {
    #[default]
    Gaussian,
    Square,
}

/// Parametric description of one comb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombSpec<T> {
    /// Centre of the comb relative to the band centre (Hz).
    pub center_offset: T,
    /// Tooth period Δ (Hz).
    pub spacing: T,
    /// Δ divided by the tooth FWHM.
    pub finesse: T,
    /// Optical depth added at each tooth centre.
    pub peak_depth: T,
    /// Uniform residual optical depth.
    pub background_depth: T,
    pub tooth_shape: ToothShape,
    /// Width (Hz) of the region holding teeth, centred on `center_offset`.
    pub bandwidth: T,
}

impl<T: Real> CombSpec<T> {
    pub fn new(
        center_offset: T,
        spacing: T,
        finesse: T,
        peak_depth: T,
        background_depth: T,
        tooth_shape: ToothShape,
        bandwidth: T,
    ) -> Result<Self> {
        let spec = Self {
            center_offset,
            spacing,
            finesse,
            peak_depth,
            background_depth,
            tooth_shape,
            bandwidth,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.spacing > T::zero()) || !self.spacing.is_finite() {
            return bad(format!("comb spacing must be positive, got {:?}", self.spacing));
        }
        if !(self.finesse > T::one()) {
            return bad(format!("finesse must exceed 1, got {:?}", self.finesse));
        }
        if !(self.peak_depth >= T::zero()) {
            return bad(format!("peak depth must be non-negative, got {:?}", self.peak_depth));
        }
        if !(self.background_depth >= T::zero()) {
            return bad(format!(
                "background depth must be non-negative, got {:?}",
                self.background_depth
            ));
        }
        if !(self.bandwidth >= T::lit(2.0) * self.spacing) {
            return bad(format!(
                "comb bandwidth {:?} must be at least twice the spacing {:?}",
                self.bandwidth, self.spacing
            ));
        }
        if !self.center_offset.is_finite() {
            return bad("comb centre must be finite".into());
        }
        Ok(())
    }

    pub fn tooth_fwhm(&self) -> T {
        self.spacing / self.finesse
    }

    /// First-echo delay 1/Δ (s).
    pub fn echo_delay(&self) -> T {
        self.spacing.recip()
    }

    /// Tooth indices `n` with `|n Δ| <= bandwidth / 2`.
    fn tooth_range(&self) -> std::ops::RangeInclusive<i64> {
        let half = (self.bandwidth / (T::lit(2.0) * self.spacing)).floor();
        let m = half.to_i64().unwrap_or(0);
        -m..=m
    }

    fn tooth(&self, detuning: T) -> T {
        let fwhm = self.tooth_fwhm();
        match self.tooth_shape {
            ToothShape::Gaussian => {
                let x = detuning / fwhm;
                self.peak_depth * (-T::lit(4.0) * T::LN_2() * x * x).exp()
            }
            ToothShape::Square => {
                if detuning.abs() <= fwhm / T::lit(2.0) {
                    self.peak_depth
                } else {
                    T::zero()
                }
            }
        }
    }

    /// Optical depth at frequency `nu`, evaluated directly from the tooth
    /// formula.
    pub fn depth_at(&self, nu: T) -> T {
        let mut d = self.background_depth;
        for n in self.tooth_range() {
            let center = self.center_offset + T::lit(n as f64) * self.spacing;
            d = d + self.tooth(nu - center);
        }
        d.max(T::zero())
    }
}

/// Uniform frequency sampling of the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid<T> {
    span: T,
    sample_count: usize,
}

impl<T: Real> FrequencyGrid<T> {
    pub fn new(span: T, sample_count: usize) -> Result<Self> {
        if sample_count < 4 || !sample_count.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(sample_count));
        }
        if !(span > T::zero()) || !span.is_finite() {
            return Err(Error::InvalidParameter(format!("grid span must be positive, got {span:?}")));
        }
        Ok(Self { span, sample_count })
    }

    /// Grid with resolution `df` and `sample_count` points.
    pub fn with_resolution(df: T, sample_count: usize) -> Result<Self> {
        Self::new(df * T::from_usize_lossy(sample_count), sample_count)
    }

    pub fn span(&self) -> T {
        self.span
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn len(&self) -> usize {
        self.sample_count
    }

    pub fn is_empty(&self) -> bool {
        self.sample_count == 0
    }

    pub fn resolution(&self) -> T {
        self.span / T::from_usize_lossy(self.sample_count)
    }

    /// Sampling interval of the conjugate time axis, 1/span.
    pub fn time_step(&self) -> T {
        self.span.recip()
    }

    /// Length of the periodic time window, 1/df.
    pub fn time_window(&self) -> T {
        self.resolution().recip()
    }

    pub fn frequency(&self, k: usize) -> T {
        let offset = k as f64 - (self.sample_count / 2) as f64;
        T::lit(offset) * self.resolution()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.sample_count).map(move |k| self.frequency(k))
    }

    /// Checks that teeth are resolved and that the time window holds the
    /// analysed echoes of `spec`.
    pub fn check_resolves(&self, spec: &CombSpec<T>) -> Result<()> {
        let limit = spec.tooth_fwhm() / T::lit(SAMPLES_PER_TOOTH);
        let df = self.resolution();
        // Relative slack so that grids built as exactly tooth/10 pass.
        if df > limit * T::lit(1.0 + 1e-9) {
            return Err(Error::GridTooCoarse {
                resolution_hz: df.as_f64(),
                limit_hz: limit.as_f64(),
            });
        }
        let required = T::lit(ECHO_DELAYS_PER_WINDOW) * spec.echo_delay();
        if self.time_window() < required * T::lit(1.0 - 1e-9) {
            return Err(Error::TimeWindowTooShort {
                window_s: self.time_window().as_f64(),
                required_s: required.as_f64(),
            });
        }
        Ok(())
    }
}

/// Sampled optical depth d(ν).
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionProfile<T> {
    grid: FrequencyGrid<T>,
    depth: Vec<T>,
}

impl<T: Real> AbsorptionProfile<T> {
    pub fn new(grid: FrequencyGrid<T>, depth: Vec<T>) -> Result<Self> {
        if depth.len() != grid.sample_count() {
            return Err(Error::InvalidParameter(format!(
                "profile has {} samples, grid has {}",
                depth.len(),
                grid.sample_count()
            )));
        }
        if let Some(bad) = depth.iter().find(|d| !(**d >= T::zero()) || !d.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "optical depth must be finite and non-negative, got {bad:?}"
            )));
        }
        Ok(Self { grid, depth })
    }

    /// Profile holding `value` everywhere.
    pub fn flat(grid: FrequencyGrid<T>, value: T) -> Result<Self> {
        Self::new(grid, vec![value; grid.sample_count()])
    }

    /// Samples an arbitrary depth function on the grid.
    pub fn from_fn(grid: FrequencyGrid<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let depth = grid.frequencies().map(f).collect();
        Self::new(grid, depth)
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn depth(&self) -> &[T] {
        &self.depth
    }

    pub fn max_depth(&self) -> T {
        self.depth.iter().copied().fold(T::zero(), T::max)
    }
}

/// Complex response H(ν) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction<T> {
    grid: FrequencyGrid<T>,
    response: Vec<Complex<T>>,
}

impl<T: Real> TransferFunction<T> {
    /// Response of an empty medium, H ≡ 1.
    pub fn identity(grid: FrequencyGrid<T>) -> Self {
        Self {
            grid,
            response: vec![Complex::new(T::one(), T::zero()); grid.sample_count()],
        }
    }

    pub fn grid(&self) -> &FrequencyGrid<T> {
        &self.grid
    }

    pub fn response(&self) -> &[Complex<T>] {
        &self.response
    }

    /// Impulse response h(t_n), n = 0..N, with t_n = n / span. Samples with
    /// n >= N/2 stand for negative times on the periodic window.
    pub fn impulse_response(&self) -> Vec<Complex<T>> {
        let n = self.grid.sample_count();
        let mut buf = to_fft_order(&self.response);
        let mut planner = FftPlanner::new();
        planner.plan_fft_inverse(n).process(&mut buf);
        let scale = T::from_usize_lossy(n).recip();
        buf.iter_mut().for_each(|v| *v = *v * scale);
        buf
    }

    /// Fraction of impulse-response energy found at negative times.
    pub fn negative_time_energy_fraction(&self) -> T {
        let h = self.impulse_response();
        let half = h.len() / 2;
        let total: T = h.iter().map(|v| v.norm_sqr()).fold(T::zero(), |a, b| a + b);
        let negative: T = h[half..].iter().map(|v| v.norm_sqr()).fold(T::zero(), |a, b| a + b);
        negative / total
    }
}

/// Rotates a natural-order spectrum (band centre at N/2) into FFT bin order.
pub(crate) fn to_fft_order<V: Copy>(natural: &[V]) -> Vec<V> {
    let mut v = natural.to_vec();
    v.rotate_left(natural.len() / 2);
    v
}

pub(crate) fn from_fft_order<V: Copy>(fft: &[V]) -> Vec<V> {
    let mut v = fft.to_vec();
    v.rotate_right(fft.len() / 2);
    v
}

/// Samples one comb on `grid`.
pub fn build_comb<T: Real>(spec: &CombSpec<T>, grid: &FrequencyGrid<T>) -> Result<AbsorptionProfile<T>> {
    spec.validate()?;
    grid.check_resolves(spec)?;

    let n = grid.sample_count();
    let df = grid.resolution();
    let mut depth = vec![spec.background_depth; n];
    // Gaussian teeth are negligible (< e^-50) beyond 4.3 FWHM.
    let reach = match spec.tooth_shape {
        ToothShape::Gaussian => spec.tooth_fwhm() * T::lit(4.3),
        ToothShape::Square => spec.tooth_fwhm(),
    };
    let to_index = |nu: T| (nu / df + T::from_usize_lossy(n / 2)).to_f64().unwrap_or(0.0);
    for m in spec.tooth_range() {
        let center = spec.center_offset + T::lit(m as f64) * spec.spacing;
        let lo = to_index(center - reach).floor().max(0.0) as usize;
        let hi = (to_index(center + reach).ceil().max(0.0) as usize).min(n.saturating_sub(1));
        for (k, d) in depth.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *d = *d + spec.tooth(grid.frequency(k) - center);
        }
    }
    depth.iter_mut().for_each(|d| *d = d.max(T::zero()));
    AbsorptionProfile::new(*grid, depth)
}

/// Pointwise sum of optical depths.
pub fn compose<T: Real>(profiles: &[AbsorptionProfile<T>]) -> Result<AbsorptionProfile<T>> {
    let first = profiles
        .first()
        .ok_or_else(|| Error::InvalidParameter("compose needs at least one profile".into()))?;
    if profiles.iter().any(|p| p.grid != first.grid) {
        return Err(Error::GridMismatch);
    }
    let mut depth = first.depth.clone();
    for p in &profiles[1..] {
        depth.iter_mut().zip(&p.depth).for_each(|(a, b)| *a = *a + *b);
    }
    AbsorptionProfile::new(first.grid, depth)
}

/// Raised-cosine weight: 1 in the central band, falling to 0 at the edges.
fn edge_taper<T: Real>(grid: &FrequencyGrid<T>, nu: T) -> T {
    let half = grid.span() / T::lit(2.0);
    let ramp = grid.span() * T::lit(TAPER_FRACTION);
    let inner = half - ramp;
    let a = nu.abs();
    if a <= inner {
        T::one()
    } else if a >= half {
        T::zero()
    } else {
        let x = (a - inner) / ramp;
        T::lit(0.5) * (T::one() + (T::PI() * x).cos())
    }
}

/// Phase φ(ν) of the minimum-phase response whose log-amplitude is −d(ν)/2.
///
/// Computed through the folded real cepstrum, which on a periodic grid is the
/// discrete Hilbert transform of d/2. The profile is blended towards its edge
/// value over the outer [`TAPER_FRACTION`] of the band first.
pub fn causal_phase<T: Real>(profile: &AbsorptionProfile<T>) -> Vec<T> {
    let grid = profile.grid();
    let n = grid.sample_count();
    let depth = profile.depth();
    let edge = (depth[0] + depth[n - 1]) / T::lit(2.0);
    let log_amplitude: Vec<Complex<T>> = depth
        .iter()
        .zip(grid.frequencies())
        .map(|(&d, nu)| {
            let tapered = edge + edge_taper(grid, nu) * (d - edge);
            Complex::new(-tapered / T::lit(2.0), T::zero())
        })
        .collect();

    let mut planner = FftPlanner::new();
    let mut cepstrum = to_fft_order(&log_amplitude);
    planner.plan_fft_inverse(n).process(&mut cepstrum);
    let scale = T::from_usize_lossy(n).recip();
    let two = T::lit(2.0);
    let zero = Complex::new(T::zero(), T::zero());
    for (i, c) in cepstrum.iter_mut().enumerate() {
        *c = match i {
            0 => *c * scale,
            i if i == n / 2 => *c * scale,
            i if i < n / 2 => *c * (two * scale),
            _ => zero,
        };
    }
    planner.plan_fft_forward(n).process(&mut cepstrum);
    from_fft_order(&cepstrum).into_iter().map(|c| c.im).collect()
}

/// H(ν) = exp(−d(ν)/2 + iφ(ν)).
pub fn to_transfer_function<T: Real>(profile: &AbsorptionProfile<T>) -> TransferFunction<T> {
    let phase = causal_phase(profile);
    let response = profile
        .depth()
        .iter()
        .zip(&phase)
        .map(|(&d, &phi)| Complex::from_polar((-d / T::lit(2.0)).exp(), phi))
        .collect();
    TransferFunction {
        grid: *profile.grid(),
        response,
    }
}

pub const PROFILE_HEADER: &str = "# afc-profile v1";

/// Writes `frequency_hz,optical_depth` rows.
pub fn write_profile<T: Real, W: Write>(profile: &AbsorptionProfile<T>, mut out: W) -> Result<()> {
    writeln!(out, "{PROFILE_HEADER}")?;
    for (nu, d) in profile.grid().frequencies().zip(profile.depth()) {
        writeln!(out, "{:.3},{:.9}", nu.as_f64(), d.as_f64())?;
    }
    Ok(())
}

/// Reads a profile written by [`write_profile`]. The grid is reconstructed
/// from the first two frequencies and the row count.
pub fn read_profile<R: BufRead>(input: R) -> Result<AbsorptionProfile<f64>> {
    let mut rows = Vec::new();
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == PROFILE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{PROFILE_HEADER}`"),
            })
        }
    }
    for (i, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.trim().parse().ok()).ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("malformed row `{line}`"),
            })
        };
        let mut it = line.split(',');
        rows.push((parse(it.next())?, parse(it.next())?));
    }
    if rows.len() < 2 {
        return Err(Error::Parse {
            line: rows.len() + 1,
            message: "profile needs at least two rows".into(),
        });
    }
    let df = rows[1].0 - rows[0].0;
    let grid = FrequencyGrid::with_resolution(df, rows.len())?;
    AbsorptionProfile::new(grid, rows.into_iter().map(|r| r.1).collect())
}
