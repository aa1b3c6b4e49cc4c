//! Run configuration loaded from TOML.
//!
//! Keys carry their unit as a suffix (`_hz`, `_s`). Missing sections fall
//! back to the three-mode defaults in [`RunConfig::default`].

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use afcmap::detection::{DetectorSpec, SourceSpec};
use afcmap::mapping::{self, SchemeConfig};
use afcmap::planner::PlatformLimits;
use afcmap::propagation::{depth_for_efficiency, PulseSpec};
use afcmap::spectral::{CombSpec, FrequencyGrid, ToothShape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridSection,
    pub scheme: SchemeSection,
    pub combs: Vec<CombSection>,
    pub source: SourceSection,
    pub detector: DetectorSection,
    pub limits: LimitsSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub span_hz: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub n_freq: usize,
    pub n_spatial: usize,
    pub mode_duration_s: f64,
    pub mapped_spacing_s: f64,
    /// Spacing of the frequency modes, centred on zero. Ignored when
    /// `mode_offsets_hz` is given.
    pub mode_spacing_hz: f64,
    pub mode_offsets_hz: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CombSection {
    /// Defaults to the offset of the frequency mode with the same index.
    pub center_offset_hz: Option<f64>,
    /// Defaults to the spacing that centres the echo in its mapped window.
    pub spacing_hz: Option<f64>,
    pub finesse: f64,
    pub peak_depth: Option<f64>,
    /// Analytic first-echo efficiency to calibrate `peak_depth` against,
    /// using the summed background of all combs.
    pub target_efficiency: Option<f64>,
    pub background_depth: f64,
    pub tooth_shape: ToothShape,
    pub bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub mean_photon_number: f64,
    pub pulses_per_mode: u64,
    pub spectral_fwhm_hz: f64,
    pub emission_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub coupling_efficiency: f64,
    pub detection_efficiency: f64,
    pub dark_rate_hz: f64,
    pub bin_width_s: f64,
    pub timing_jitter_s: f64,
    /// Defaults to (N_F + 1) Δt′.
    pub gate_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitsSection {
    pub modulation_range_hz: f64,
    pub inhomogeneous_broadening_hz: f64,
    pub min_mode_spacing_hz: f64,
    pub min_stable_comb_spacing_hz: f64,
    pub per_afc_creation_time_s: f64,
    pub per_mode_modulation_time_s: f64,
    pub relaxation_budget_s: Option<f64>,
}

/// `[start, stop, count]` with `count` evenly spaced points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Range {
    pub fn single(v: f64) -> Self {
        Self { start: v, stop: v, count: 1 }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            bail!("sweep range needs at least one point");
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            bail!("sweep bounds must be finite");
        }
        if self.count == 1 {
            if self.start != self.stop {
                bail!("a one-point range needs start == stop");
            }
            return Ok(vec![self.start]);
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        Ok((0..self.count).map(|i| self.start + step * i as f64).collect())
    }
}

impl std::str::FromStr for Range {
    type Err = anyhow::Error;

    /// `X` or `START:STOP:COUNT`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [v] => Ok(Range::single(v.trim().parse().with_context(|| format!("bad value `{s}`"))?)),
            [a, b, n] => Ok(Range {
                start: a.trim().parse().with_context(|| format!("bad start in `{s}`"))?,
                stop: b.trim().parse().with_context(|| format!("bad stop in `{s}`"))?,
                count: n.trim().parse().with_context(|| format!("bad count in `{s}`"))?,
            }),
            _ => bail!("expected X or START:STOP:COUNT, got `{s}`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// 1-based index of the comb whose spacing, shape and bandwidth are used.
    pub comb: usize,
    pub peak_depth: Range,
    pub finesse: Range,
    pub background_depth: Range,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            grid: GridSection::default(),
            scheme: SchemeSection::default(),
            combs: vec![CombSection::default(); 3],
            source: SourceSection::default(),
            detector: DetectorSection::default(),
            limits: LimitsSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            span_hz: 655.36e6,
            sample_count: 1 << 16,
        }
    }
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            n_freq: 3,
            n_spatial: 3,
            mode_duration_s: 435e-9,
            mapped_spacing_s: 435e-9,
            mode_spacing_hz: 100e6,
            mode_offsets_hz: None,
        }
    }
}

impl Default for CombSection {
    fn default() -> Self {
        Self {
            center_offset_hz: None,
            spacing_hz: None,
            finesse: 4.0,
            peak_depth: Some(3.0),
            target_efficiency: None,
            background_depth: 0.05,
            tooth_shape: ToothShape::Gaussian,
            bandwidth_hz: 40e6,
        }
    }
}

impl Default for SourceSection {
    fn default() -> Self {
        Self {
            mean_photon_number: 0.12,
            pulses_per_mode: 750_000,
            spectral_fwhm_hz: 5e6,
            emission_time_s: 0.0,
        }
    }
}

impl Default for DetectorSection {
    fn default() -> Self {
        Self {
            coupling_efficiency: 0.59,
            detection_efficiency: 0.59,
            dark_rate_hz: 150.0,
            bin_width_s: 4.096e-9,
            timing_jitter_s: 0.0,
            gate_s: None,
        }
    }
}

impl Default for LimitsSection {
    fn default() -> Self {
        let l = PlatformLimits::<f64>::pr_yso();
        Self {
            modulation_range_hz: l.modulation_range,
            inhomogeneous_broadening_hz: l.inhomogeneous_broadening,
            min_mode_spacing_hz: l.min_mode_spacing,
            min_stable_comb_spacing_hz: l.min_stable_comb_spacing,
            per_afc_creation_time_s: l.per_afc_creation_time,
            per_mode_modulation_time_s: l.per_mode_modulation_time,
            relaxation_budget_s: l.relaxation_budget,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            comb: 1,
            peak_depth: Range { start: 1.0, stop: 4.0, count: 5 },
            finesse: Range { start: 2.0, stop: 6.0, count: 5 },
            background_depth: Range { start: 0.0, stop: 0.5, count: 5 },
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).context("malformed config")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).context("serializing config")
    }

    pub fn grid(&self) -> Result<FrequencyGrid<f64>> {
        Ok(FrequencyGrid::new(self.grid.span_hz, self.grid.sample_count)?)
    }

    pub fn mode_offsets(&self) -> Result<Vec<f64>> {
        let s = &self.scheme;
        match &s.mode_offsets_hz {
            Some(v) => {
                if v.len() != s.n_freq {
                    bail!("mode_offsets_hz has {} entries, expected N_F = {}", v.len(), s.n_freq);
                }
                Ok(v.clone())
            }
            None => {
                let centre = s.n_freq.saturating_sub(1) as f64 / 2.0;
                Ok((0..s.n_freq).map(|i| (i as f64 - centre) * s.mode_spacing_hz).collect())
            }
        }
    }

    /// Smallest distance between two frequency modes, if there are two.
    pub fn min_mode_separation(&self) -> Result<Option<f64>> {
        let mut offsets = self.mode_offsets()?;
        offsets.sort_by(f64::total_cmp);
        Ok(offsets.windows(2).map(|w| w[1] - w[0]).reduce(f64::min))
    }

    pub fn total_background(&self) -> f64 {
        self.combs.iter().map(|c| c.background_depth).sum()
    }

    /// Fully resolved comb specs, one per frequency mode.
    pub fn comb_specs(&self) -> Result<Vec<CombSpec<f64>>> {
        let s = &self.scheme;
        if self.combs.len() != s.n_freq {
            bail!("{} [[combs]] entries given, expected N_F = {}", self.combs.len(), s.n_freq);
        }
        let offsets = self.mode_offsets()?;
        let background = self.total_background();
        self.combs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = i + 1;
                let depth = match (c.peak_depth, c.target_efficiency) {
                    (Some(_), Some(_)) => bail!("comb {k}: give peak_depth or target_efficiency, not both"),
                    (Some(d), None) => d,
                    (None, Some(eta)) => depth_for_efficiency(eta, c.finesse, background)
                        .with_context(|| format!("comb {k}: calibrating peak depth"))?,
                    (None, None) => bail!("comb {k}: peak_depth or target_efficiency is required"),
                };
                let spacing = c
                    .spacing_hz
                    .unwrap_or_else(|| mapping::window_center_spacing(k, s.mapped_spacing_s));
                CombSpec::new(
                    c.center_offset_hz.unwrap_or(offsets[i]),
                    spacing,
                    c.finesse,
                    depth,
                    c.background_depth,
                    c.tooth_shape,
                    c.bandwidth_hz,
                )
                .with_context(|| format!("comb {k}"))
            })
            .collect()
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig<f64>> {
        let s = &self.scheme;
        let combs = self.comb_specs()?;
        Ok(SchemeConfig {
            n_freq: s.n_freq,
            n_spatial: s.n_spatial,
            mode_duration: s.mode_duration_s,
            mapped_spacing: s.mapped_spacing_s,
            mode_offsets: self.mode_offsets()?,
            comb_spacings: combs.iter().map(|c| c.spacing).collect(),
        })
    }

    pub fn pulse(&self, carrier_offset: f64) -> PulseSpec<f64> {
        PulseSpec {
            emission_time: self.source.emission_time_s,
            ..PulseSpec::gaussian(self.source.spectral_fwhm_hz, carrier_offset)
        }
    }

    pub fn source_spec(&self) -> SourceSpec {
        SourceSpec {
            mean_photon_number: self.source.mean_photon_number,
            pulses_per_mode: self.source.pulses_per_mode,
            pulse: self.pulse(0.0),
        }
    }

    pub fn detector_spec(&self) -> DetectorSpec {
        let d = &self.detector;
        DetectorSpec {
            coupling_efficiency: d.coupling_efficiency,
            detection_efficiency: d.detection_efficiency,
            dark_rate: d.dark_rate_hz,
            bin_width: d.bin_width_s,
            timing_jitter_sigma: d.timing_jitter_s,
        }
    }

    pub fn gate(&self) -> f64 {
        self.detector
            .gate_s
            .unwrap_or((self.scheme.n_freq + 1) as f64 * self.scheme.mapped_spacing_s)
    }

    pub fn limits(&self) -> PlatformLimits<f64> {
        let l = &self.limits;
        PlatformLimits {
            modulation_range: l.modulation_range_hz,
            inhomogeneous_broadening: l.inhomogeneous_broadening_hz,
            min_mode_spacing: l.min_mode_spacing_hz,
            min_stable_comb_spacing: l.min_stable_comb_spacing_hz,
            per_afc_creation_time: l.per_afc_creation_time_s,
            per_mode_modulation_time: l.per_mode_modulation_time_s,
            relaxation_budget: l.relaxation_budget_s,
        }
    }

    /// Checks everything needed to run a simulation. Scheme violations are
    /// returned separately so the caller can decide whether to force.
    pub fn validate(&self) -> Result<Vec<String>> {
        let grid = self.grid()?;
        let combs = self.comb_specs()?;
        for (i, c) in combs.iter().enumerate() {
            grid.check_resolves(c).with_context(|| format!("comb {}", i + 1))?;
        }
        self.source_spec().validate()?;
        self.detector_spec().validate()?;
        if let Some(sep) = self.min_mode_separation()? {
            self.pulse(0.0).check_mode_spacing(sep)?;
        }
        for (i, &offset) in self.mode_offsets()?.iter().enumerate() {
            self.pulse(offset)
                .spectrum(&grid)
                .with_context(|| format!("pulse of frequency mode {}", i + 1))?;
        }
        if !(self.gate() > 0.0) {
            bail!("detection gate must be positive");
        }
        // Traces cover [e - T/8, e + 7T/8) for emission time e and window T.
        let (window, emission) = (grid.time_window(), self.source.emission_time_s);
        if emission - window / 8.0 > 0.0 || self.gate() > emission + window * 7.0 / 8.0 {
            bail!("detection gate [0, {:e}) s does not fit in the simulated time window", self.gate());
        }
        Ok(match mapping::validate(&self.scheme_config()?) {
            Ok(()) => Vec::new(),
            Err(vs) => vs.iter().map(ToString::to_string).collect(),
        })
    }
}
