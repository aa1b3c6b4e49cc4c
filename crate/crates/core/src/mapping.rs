//! Frequency-mode identification by combined time-to-space and
//! frequency-to-time mapping.
//!
//! Photons arrive in temporal modes of duration Δt. Temporal mode `j` is
//! routed to spatial channel `j mod N_S`. Each channel delays frequency mode
//! `k` into mapped window `k` of width Δt′, i.e. `[j Δt + k Δt′, j Δt + (k+1) Δt′)`.
//! Window 0 holds light that passed the comb unabsorbed. Temporal modes are
//! 0-based, frequency modes 1-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Exact;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig<T> {
    /// Number of frequency modes N_F.
    pub n_freq: usize,
    /// Number of spatial channels N_S.
    pub n_spatial: usize,
    /// Temporal-mode duration Δt (s).
    pub mode_duration: T,
    /// Mapped window spacing Δt′ (s).
    pub mapped_spacing: T,
    /// Carrier offset of each frequency mode (Hz).
    pub mode_offsets: Vec<T>,
    /// Comb spacing Δ_k of each frequency mode (Hz).
    pub comb_spacings: Vec<T>,
}

impl<T: Exact> SchemeConfig<T> {
    /// Scheme with offsets `mode_spacing` apart, centred on zero, and comb
    /// spacings from [`window_center_spacing`].
    pub fn uniform(n_freq: usize, n_spatial: usize, mode_duration: T, mapped_spacing: T, mode_spacing: T) -> Self {
        let centre = T::from_count(n_freq.saturating_sub(1)) * T::half();
        let mode_offsets = (0..n_freq).map(|i| (T::from_count(i) - centre) * mode_spacing).collect();
        let comb_spacings = (1..=n_freq).map(|k| window_center_spacing(k, mapped_spacing)).collect();
        Self {
            n_freq,
            n_spatial,
            mode_duration,
            mapped_spacing,
            mode_offsets,
            comb_spacings,
        }
    }

    /// Mapped window `k` (0 = transmitted light) of temporal mode `j`.
    pub fn window(&self, j: u64, k: usize) -> (T, T) {
        let base = T::from_u64(j).expect("temporal index fits in scalar") * self.mode_duration;
        let start = base + T::from_count(k) * self.mapped_spacing;
        (start, start + self.mapped_spacing)
    }

    pub fn channel(&self, j: u64) -> usize {
        (j % self.n_spatial as u64) as usize
    }
}

/// Comb spacing that places the first echo at the centre of mapped window
/// `k`: Δ_k = 1 / ((k + ½) Δt′).
pub fn window_center_spacing<T: Exact>(k: usize, mapped_spacing: T) -> T {
    T::one() / ((T::from_count(k) + T::half()) * mapped_spacing)
}

/// A violated scheme constraint. `slack` is the signed margin of the
/// inequality (negative when violated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation<T> {
    /// Δt ≤ Δt′ fails; slack = Δt′ − Δt.
    DurationExceedsMappedSpacing { slack: T },
    /// N_F Δt′ ≤ N_S Δt fails; slack = N_S Δt − N_F Δt′.
    FrameOverflow { slack: T },
    NoFrequencyModes,
    NoSpatialModes,
    NonPositiveDuration,
    /// Per-mode lists do not have N_F entries.
    ModeListLength { offsets: usize, spacings: usize, expected: usize },
}

impl<T: Exact> std::fmt::Display for Violation<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::DurationExceedsMappedSpacing { slack } => {
                write!(f, "Δt ≤ Δt′ violated (slack {:.6e} s)", slack.approx())
            }
            Violation::FrameOverflow { slack } => {
                write!(f, "N_F·Δt′ ≤ N_S·Δt violated (slack {:.6e} s)", slack.approx())
            }
            Violation::NoFrequencyModes => write!(f, "N_F must be at least 1"),
            Violation::NoSpatialModes => write!(f, "N_S must be at least 1"),
            Violation::NonPositiveDuration => write!(f, "Δt and Δt′ must be positive"),
            Violation::ModeListLength { offsets, spacings, expected } => write!(
                f,
                "expected {expected} mode offsets and comb spacings, got {offsets} and {spacings}"
            ),
        }
    }
}

/// Lists every violated constraint of `config`.
pub fn validate<T: Exact>(config: &SchemeConfig<T>) -> std::result::Result<(), Vec<Violation<T>>> {
    let mut out = Vec::new();
    if config.n_freq == 0 {
        out.push(Violation::NoFrequencyModes);
    }
    if config.n_spatial == 0 {
        out.push(Violation::NoSpatialModes);
    }
    if !(config.mode_duration > T::zero()) || !(config.mapped_spacing > T::zero()) {
        out.push(Violation::NonPositiveDuration);
    }
    if config.mode_offsets.len() != config.n_freq || config.comb_spacings.len() != config.n_freq {
        out.push(Violation::ModeListLength {
            offsets: config.mode_offsets.len(),
            spacings: config.comb_spacings.len(),
            expected: config.n_freq,
        });
    }
    let slack = config.mapped_spacing - config.mode_duration;
    if slack < T::zero() {
        out.push(Violation::DurationExceedsMappedSpacing { slack });
    }
    let slack = T::from_count(config.n_spatial) * config.mode_duration - T::from_count(config.n_freq) * config.mapped_spacing;
    if slack < T::zero() {
        out.push(Violation::FrameOverflow { slack });
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn ensure_valid<T: Exact>(config: &SchemeConfig<T>) -> Result<()> {
    validate(config).map_err(|v| {
        Error::InfeasibleScheme(v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeAssignment<T> {
    pub temporal_mode: u64,
    pub channel: usize,
    pub frequency_mode: usize,
    /// Nominal detection time, the centre of the mapped window (s).
    pub time: T,
}

/// Channel and nominal detection time of frequency mode `k` emitted in
/// temporal mode `j`.
pub fn encode<T: Exact>(config: &SchemeConfig<T>, j: u64, k: usize) -> Result<ModeAssignment<T>> {
    if k == 0 || k > config.n_freq {
        return Err(Error::ModeOutOfRange { k, n_freq: config.n_freq });
    }
    if config.n_spatial == 0 {
        return Err(Error::InfeasibleScheme("N_S must be at least 1".into()));
    }
    let (start, _) = config.window(j, k);
    Ok(ModeAssignment {
        temporal_mode: j,
        channel: config.channel(j),
        frequency_mode: k,
        time: start + config.mapped_spacing * T::half(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Unique echo window; frequency mode identified.
    Identified,
    /// Window 0 of a temporal mode: unabsorbed light.
    Transmitted,
    /// Unique echo window that also overlaps window 0 of a later temporal
    /// mode on the same channel. The echo interpretation is reported.
    AmbiguousWindow0,
    OutOfRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodedResult {
    pub classification: Classification,
    pub frequency_mode: Option<usize>,
    pub temporal_mode: Option<u64>,
}

impl DecodedResult {
    fn out_of_range() -> Self {
        Self {
            classification: Classification::OutOfRange,
            frequency_mode: None,
            temporal_mode: None,
        }
    }

    /// `(j, k)` when the result carries an echo interpretation.
    pub fn echo(&self) -> Option<(u64, usize)> {
        match self.classification {
            Classification::Identified | Classification::AmbiguousWindow0 => {
                Some((self.temporal_mode?, self.frequency_mode?))
            }
            _ => None,
        }
    }
}

/// Decodes a detection on channel `s` at time `t`. The config must pass
/// [`validate`].
pub fn decode<T: Exact>(config: &SchemeConfig<T>, s: usize, t: T) -> Result<DecodedResult> {
    ensure_valid(config)?;
    Ok(decode_unvalidated(config, s, t))
}

/// Window index `w` with `w Δt′ ≤ offset < (w+1) Δt′`.
fn window_index<T: Exact>(offset: T, spacing: T) -> i64 {
    let mut w = (offset.approx() / spacing.approx()).floor() as i64;
    let at = |w: i64| T::from_i64(w).expect("window index fits in scalar") * spacing;
    while w > 0 && at(w) > offset {
        w -= 1;
    }
    while at(w + 1) <= offset {
        w += 1;
    }
    w
}

/// Decoding without the feasibility check. When several echo windows match
/// (infeasible schemes only), the earliest temporal mode wins.
pub fn decode_unvalidated<T: Exact>(config: &SchemeConfig<T>, s: usize, t: T) -> DecodedResult {
    if config.n_spatial == 0 || s >= config.n_spatial || t < T::zero() || !(config.mode_duration > T::zero()) {
        return DecodedResult::out_of_range();
    }
    let n_s = config.n_spatial as u64;
    let frame = T::from_count(config.n_freq + 1) * config.mapped_spacing;
    let earliest = ((t - frame).approx() / config.mode_duration.approx()).floor() - 1.0;
    let mut j = if earliest > 0.0 { earliest as u64 } else { 0 };
    j += (s as u64 + n_s - j % n_s) % n_s;

    let mut echo: Option<(u64, usize)> = None;
    let mut transmitted: Option<u64> = None;
    loop {
        let start = T::from_u64(j).expect("temporal index fits in scalar") * config.mode_duration;
        if start > t {
            break;
        }
        let offset = t - start;
        if offset < frame {
            let w = window_index(offset, config.mapped_spacing);
            if w == 0 {
                transmitted.get_or_insert(j);
            } else if (1..=config.n_freq as i64).contains(&w) {
                echo.get_or_insert((j, w as usize));
            }
        }
        j += n_s;
    }

    match (echo, transmitted) {
        (Some((j, k)), tx) => DecodedResult {
            classification: if tx.is_some() {
                Classification::AmbiguousWindow0
            } else {
                Classification::Identified
            },
            frequency_mode: Some(k),
            temporal_mode: Some(j),
        },
        (None, Some(j)) => DecodedResult {
            classification: Classification::Transmitted,
            frequency_mode: None,
            temporal_mode: Some(j),
        },
        (None, None) => DecodedResult::out_of_range(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample<T> {
    pub temporal_mode: u64,
    pub frequency_mode: usize,
    pub channel: usize,
    pub time: T,
    pub decoded: DecodedResult,
}

/// Exhaustively checks `decode(encode(j, k)) = (j, k)` for `j ≤ j_max` and
/// every frequency mode. Feasibility is not checked first, so broken configs
/// can be probed for collisions.
pub fn roundtrip_check<T: Exact>(config: &SchemeConfig<T>, j_max: u64) -> std::result::Result<(), Counterexample<T>> {
    for j in 0..=j_max {
        for k in 1..=config.n_freq {
            let Ok(enc) = encode(config, j, k) else {
                continue;
            };
            let decoded = decode_unvalidated(config, enc.channel, enc.time);
            if decoded.echo() != Some((j, k)) {
                return Err(Counterexample {
                    temporal_mode: j,
                    frequency_mode: k,
                    channel: enc.channel,
                    time: enc.time,
                    decoded,
                });
            }
        }
    }
    Ok(())
}
