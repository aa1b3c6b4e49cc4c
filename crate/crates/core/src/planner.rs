//! Multiplexing capacity of a comb-based frequency-to-time mapper.
//!
//! Written against [`Exact`] so the figures can be evaluated in exact
//! rational arithmetic as well as in floating point.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mapping::{self, SchemeConfig, Violation};
use crate::scalar::Exact;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformLimits<T> {
    /// Mode-hop-free tuning range of the pump laser (Hz).
    pub modulation_range: T,
    /// Inhomogeneous linewidth of the crystal (Hz).
    pub inhomogeneous_broadening: T,
    /// Smallest usable spacing between frequency modes (Hz).
    pub min_mode_spacing: T,
    /// Smallest comb spacing the pump laser can burn reliably (Hz).
    pub min_stable_comb_spacing: T,
    /// Time to burn one comb (s).
    pub per_afc_creation_time: T,
    /// Time to retune to the next frequency mode (s).
    pub per_mode_modulation_time: T,
    /// Optional ceiling on total creation time, e.g. from hyperfine
    /// relaxation (s). No default.
    #[serde(default)]
    pub relaxation_budget: Option<T>,
}

impl<T: Exact> PlatformLimits<T> {
    /// 15 GHz tuning, 10 GHz inhomogeneous width, 100 MHz mode spacing,
    /// 500 kHz stable comb spacing, 50 ms per comb and 10 ms per retune.
    pub fn pr_yso() -> Self {
        let int = |v: u64| T::from_u64(v).expect("limit fits in scalar");
        Self {
            modulation_range: int(15_000_000_000),
            inhomogeneous_broadening: int(10_000_000_000),
            min_mode_spacing: int(100_000_000),
            min_stable_comb_spacing: int(500_000),
            per_afc_creation_time: int(50) / int(1000),
            per_mode_modulation_time: int(10) / int(1000),
            relaxation_budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("modulation_range", self.modulation_range),
            ("inhomogeneous_broadening", self.inhomogeneous_broadening),
            ("min_mode_spacing", self.min_mode_spacing),
            ("min_stable_comb_spacing", self.min_stable_comb_spacing),
            ("per_afc_creation_time", self.per_afc_creation_time),
            ("per_mode_modulation_time", self.per_mode_modulation_time),
        ];
        for (name, v) in fields {
            if !(v > T::zero()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v:?}")));
            }
        }
        if let Some(b) = self.relaxation_budget {
            if !(b > T::zero()) {
                return Err(Error::InvalidParameter("relaxation budget must be positive".into()));
            }
        }
        Ok(())
    }

    /// min(modulation range, inhomogeneous broadening).
    pub fn usable_band(&self) -> T {
        if self.modulation_range < self.inhomogeneous_broadening {
            self.modulation_range
        } else {
            self.inhomogeneous_broadening
        }
    }
}

/// floor(usable band / mode spacing).
pub fn max_modes<T: Exact>(limits: &PlatformLimits<T>) -> Result<u64> {
    limits.validate()?;
    let ratio = limits.usable_band() / limits.min_mode_spacing;
    // Truncation toward zero equals floor for a positive ratio.
    Ok(ratio.to_u64().unwrap_or(0))
}

/// Spacing of the slowest comb, 1 / ((N_F + ½) Δt′).
pub fn min_comb_spacing<T: Exact>(n_freq: usize, mapped_spacing: T) -> Result<T> {
    if n_freq == 0 {
        return Err(Error::InvalidParameter("N_F must be at least 1".into()));
    }
    if !(mapped_spacing > T::zero()) {
        return Err(Error::InvalidParameter("Δt′ must be positive".into()));
    }
    Ok(mapping::window_center_spacing(n_freq, mapped_spacing))
}

/// N · (per-comb creation time + per-mode retune time).
pub fn creation_time_bound<T: Exact>(n: usize, limits: &PlatformLimits<T>) -> Result<T> {
    if n == 0 {
        return Err(Error::InvalidParameter("at least one comb is required".into()));
    }
    limits.validate()?;
    Ok(T::from_count(n) * (limits.per_afc_creation_time + limits.per_mode_modulation_time))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanViolation<T> {
    TooManyModes { requested: usize, max: u64 },
    CombSpacingBelowStableLimit { required: T, limit: T },
    CreationTimeExceedsBudget { bound: T, budget: T },
    Scheme { violation: Violation<T> },
}

impl<T: Exact> std::fmt::Display for PlanViolation<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlanViolation::TooManyModes { requested, max } => {
                write!(f, "{requested} frequency modes exceed the platform limit of {max}")
            }
            PlanViolation::CombSpacingBelowStableLimit { required, limit } => write!(
                f,
                "smallest comb spacing {:.1} kHz is below the stable limit {:.1} kHz",
                required.approx() / 1e3,
                limit.approx() / 1e3
            ),
            PlanViolation::CreationTimeExceedsBudget { bound, budget } => write!(
                f,
                "creation time {:.3} s exceeds the budget {:.3} s",
                bound.approx(),
                budget.approx()
            ),
            PlanViolation::Scheme { violation } => write!(f, "{violation}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport<T> {
    pub n_freq: usize,
    pub n_spatial: usize,
    pub max_modes: u64,
    pub min_required_comb_spacing: T,
    pub total_creation_time_bound: T,
    pub violations: Vec<PlanViolation<T>>,
}

impl<T: Exact> PlanReport<T> {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<32} {:>16}", "frequency modes N_F", self.n_freq);
        let _ = writeln!(s, "{:<32} {:>16}", "spatial modes N_S", self.n_spatial);
        let _ = writeln!(s, "{:<32} {:>16}", "max modes", self.max_modes);
        let _ = writeln!(
            s,
            "{:<32} {:>12.3} kHz",
            "min comb spacing",
            self.min_required_comb_spacing.approx() / 1e3
        );
        let _ = writeln!(
            s,
            "{:<32} {:>14.3} s",
            "creation time bound",
            self.total_creation_time_bound.approx()
        );
        if self.violations.is_empty() {
            let _ = writeln!(s, "no violations");
        } else {
            for v in &self.violations {
                let _ = writeln!(s, "VIOLATION: {v}");
            }
        }
        s
    }
}

/// Aggregates every capacity check for a proposed configuration.
pub fn check_plan<T: Exact>(
    n_freq: usize,
    n_spatial: usize,
    mode_duration: T,
    mapped_spacing: T,
    limits: &PlatformLimits<T>,
) -> Result<PlanReport<T>> {
    if n_freq == 0 || n_spatial == 0 {
        return Err(Error::InvalidParameter("N_F and N_S must be at least 1".into()));
    }
    if !(mode_duration > T::zero()) || !(mapped_spacing > T::zero()) {
        return Err(Error::InvalidParameter("Δt and Δt′ must be positive".into()));
    }
    let max = max_modes(limits)?;
    let min_spacing = min_comb_spacing(n_freq, mapped_spacing)?;
    let creation = creation_time_bound(n_freq, limits)?;

    let mut violations = Vec::new();
    if n_freq as u64 > max {
        violations.push(PlanViolation::TooManyModes { requested: n_freq, max });
    }
    if min_spacing < limits.min_stable_comb_spacing {
        violations.push(PlanViolation::CombSpacingBelowStableLimit {
            required: min_spacing,
            limit: limits.min_stable_comb_spacing,
        });
    }
    if let Some(budget) = limits.relaxation_budget {
        if creation > budget {
            violations.push(PlanViolation::CreationTimeExceedsBudget { bound: creation, budget });
        }
    }
    let scheme = SchemeConfig::uniform(n_freq, n_spatial, mode_duration, mapped_spacing, limits.min_mode_spacing);
    if let Err(vs) = mapping::validate(&scheme) {
        violations.extend(vs.into_iter().map(|violation| PlanViolation::Scheme { violation }));
    }
    Ok(PlanReport {
        n_freq,
        n_spatial,
        max_modes: max,
        min_required_comb_spacing: min_spacing,
        total_creation_time_bound: creation,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    fn ns(v: i64) -> Q {
        Q::new(v, 1_000_000_000)
    }

    #[test]
    fn mode_count_limits() {
        assert_eq!(max_modes(&PlatformLimits::<Q>::pr_yso()).unwrap(), 100);
        assert_eq!(max_modes(&PlatformLimits::<f64>::pr_yso()).unwrap(), 100);
        let narrow = PlatformLimits {
            modulation_range: 1e9,
            ..PlatformLimits::<f64>::pr_yso()
        };
        assert_eq!(max_modes(&narrow).unwrap(), 10);
        let wide = PlatformLimits {
            min_mode_spacing: 250e6,
            ..PlatformLimits::<f64>::pr_yso()
        };
        assert_eq!(max_modes(&wide).unwrap(), 40);
    }

    #[test]
    fn smallest_comb_spacing() {
        let s = min_comb_spacing(100, ns(435)).unwrap();
        assert_eq!(s, Q::new(1_000_000_000 * 2, 201 * 435));
        assert!((s.approx() - 22.874e3).abs() < 1.0);
        let s3 = min_comb_spacing::<f64>(3, 435e-9).unwrap();
        assert!((s3 - 656.8e3).abs() < 0.1e3);
        let s1 = min_comb_spacing::<f64>(1, 1.0).unwrap();
        assert!((s1 - 0.6667).abs() < 1e-4);
        assert!(min_comb_spacing::<f64>(0, 1.0).is_err());
        assert!(min_comb_spacing::<f64>(1, 0.0).is_err());
    }

    #[test]
    fn creation_time() {
        let l = PlatformLimits::<Q>::pr_yso();
        assert_eq!(creation_time_bound(1, &l).unwrap(), Q::new(60, 1000));
        assert_eq!(creation_time_bound(3, &l).unwrap(), Q::new(180, 1000));
        assert_eq!(creation_time_bound(100, &l).unwrap(), Q::from_integer(6));
        assert!(creation_time_bound(0, &l).is_err());
    }

    #[test]
    fn three_mode_configuration_is_clean() {
        let r = check_plan(3, 3, ns(435), ns(435), &PlatformLimits::pr_yso()).unwrap();
        assert!(r.is_feasible(), "{:?}", r.violations);
        assert_eq!(r.max_modes, 100);
    }

    #[test]
    fn hundred_modes_need_a_narrower_laser() {
        let l = PlatformLimits::<Q>::pr_yso();
        let r = check_plan(100, 100, ns(435), ns(435), &l).unwrap();
        assert_eq!(
            r.violations,
            vec![PlanViolation::CombSpacingBelowStableLimit {
                required: min_comb_spacing(100, ns(435)).unwrap(),
                limit: Q::from_integer(500_000),
            }]
        );
        assert!(r.to_table().contains("VIOLATION"));
    }

    #[test]
    fn degenerate_plans_rejected() {
        let l = PlatformLimits::<f64>::pr_yso();
        assert!(check_plan(0, 3, 435e-9, 435e-9, &l).is_err());
        assert!(check_plan(3, 3, 0.0, 435e-9, &l).is_err());
    }

    #[test]
    fn components_reported_independently() {
        let l = PlatformLimits {
            relaxation_budget: Some(0.1),
            ..PlatformLimits::<f64>::pr_yso()
        };
        let r = check_plan(101, 3, 435e-9, 435e-9, &l).unwrap();
        let kinds: Vec<_> = r
            .violations
            .iter()
            .map(std::mem::discriminant)
            .collect();
        assert_eq!(kinds.len(), 4);
        assert!(matches!(r.violations[0], PlanViolation::TooManyModes { requested: 101, max: 100 }));
        assert!(matches!(r.violations[2], PlanViolation::CreationTimeExceedsBudget { .. }));
        assert!(matches!(r.violations[3], PlanViolation::Scheme { .. }));
    }

    #[test]
    fn monotone_spacing_and_linear_time() {
        let l = PlatformLimits::<Q>::pr_yso();
        for n in 1..50 {
            assert!(min_comb_spacing(n + 1, ns(435)).unwrap() < min_comb_spacing(n, ns(435)).unwrap());
            assert!(min_comb_spacing(n, ns(436)).unwrap() < min_comb_spacing(n, ns(435)).unwrap());
            assert_eq!(
                creation_time_bound(n + 1, &l).unwrap() - creation_time_bound(n, &l).unwrap(),
                creation_time_bound(1, &l).unwrap()
            );
        }
    }
}
