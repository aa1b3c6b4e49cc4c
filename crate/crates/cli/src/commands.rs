use std::io::BufReader;

use anyhow::{bail, Context, Result};

use afcmap::analysis::write_histogram_csv;
use afcmap::detection::read_events;
use afcmap::planner::check_plan;
use afcmap::propagation::write_trace;
use afcmap::spectral::write_profile;

use crate::config::RunConfig;
use crate::output::{unix_now, Manifest, OutputDir, MANIFEST_FILE};
use crate::pipeline::{self, Analysis};
use crate::{AnalyzeArgs, Common, PlanArgs, SimulateArgs, SweepArgs};

pub const EVENTS_FILE: &str = "events.csv";
pub const REPORT_FILE: &str = "report.json";
pub const PROFILE_FILE: &str = "profile.txt";
pub const PLAN_FILE: &str = "plan.json";
pub const SWEEP_FILE: &str = "sweep.csv";

pub fn histogram_file(k: usize) -> String {
    format!("histogram_mode{k}.csv")
}

pub fn trace_file(k: usize) -> String {
    format!("trace_mode{k}.txt")
}

fn load(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn check_scheme(violations: &[String], force: bool) -> Result<()> {
    if violations.is_empty() {
        return Ok(());
    }
    let list = violations.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n");
    if force {
        eprintln!("warning: scheme violates the mapping constraints (continuing because of --force):\n{list}");
        Ok(())
    } else {
        bail!("scheme violates the mapping constraints (pass --force to run anyway):\n{list}")
    }
}

fn write_analysis(out: &mut OutputDir, analysis: &Analysis) -> Result<()> {
    for (i, h) in analysis.histograms.iter().enumerate() {
        let mut buf = Vec::new();
        write_histogram_csv(h, &mut buf)?;
        out.write(&histogram_file(i + 1), &buf)?;
    }
    out.write(REPORT_FILE, analysis.report.to_json()?.as_bytes())?;
    Ok(())
}

fn print_report(analysis: &Analysis) {
    println!("{:>4} {:>10} {:>10} {:>10} {:>10}", "mode", "eta_echo", "sigma", "eta_error", "sigma");
    for m in &analysis.report.modes {
        println!(
            "{:>4} {:>9.3}% {:>9.3}% {:>9.3}% {:>9.3}%",
            m.mode,
            m.eta_echo * 100.0,
            m.eta_echo_sigma * 100.0,
            m.eta_error * 100.0,
            m.eta_error_sigma * 100.0
        );
    }
    if let Some(floor) = analysis.report.dark_floor {
        println!(
            "dark floor: eta_echo {:.3}%, eta_error {:.3}%",
            floor.eta_echo * 100.0,
            floor.eta_error * 100.0
        );
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let started = unix_now();
    let mut cfg = load(&args.common)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.source.pulses_per_mode = trials;
    }
    if let Some(mu) = args.mu {
        cfg.source.mean_photon_number = mu;
    }
    let violations = cfg.validate()?;
    check_scheme(&violations, args.force)?;

    let n = cfg.scheme.n_freq;
    let mut names = vec![
        EVENTS_FILE.to_string(),
        REPORT_FILE.to_string(),
        PROFILE_FILE.to_string(),
        MANIFEST_FILE.to_string(),
    ];
    names.extend((1..=n).map(histogram_file));
    names.extend((1..=n).map(trace_file));
    let mut out = OutputDir::prepare(&args.common.out, args.common.overwrite, &names)?;

    let result = pipeline::run_simulation(&cfg)?;
    out.write(EVENTS_FILE, &result.events)?;
    write_analysis(&mut out, &result.analysis)?;
    let mut buf = Vec::new();
    write_profile(&result.medium.profile, &mut buf)?;
    out.write(PROFILE_FILE, &buf)?;
    for (i, trace) in result.traces.iter().enumerate() {
        let mut buf = Vec::new();
        write_trace(&trace.cropped(0.0, cfg.gate()), &mut buf)?;
        out.write(&trace_file(i + 1), &buf)?;
    }
    let manifest = Manifest::new("simulate", &cfg, started, out.written())?;
    out.write(MANIFEST_FILE, serde_json::to_string_pretty(&manifest)?.as_bytes())?;

    println!("{} events written to {}", result.records.len(), out.path(EVENTS_FILE).display());
    print_report(&result.analysis);
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let mut cfg = load(&args.common)?;
    if let Some(trials) = args.trials {
        cfg.source.pulses_per_mode = trials;
    }
    if let Some(mu) = args.mu {
        cfg.source.mean_photon_number = mu;
    }
    let violations = match afcmap::mapping::validate(&cfg.scheme_config()?) {
        Ok(()) => Vec::new(),
        Err(vs) => vs.iter().map(ToString::to_string).collect(),
    };
    check_scheme(&violations, args.force)?;

    let file = std::fs::File::open(&args.events).with_context(|| format!("opening {}", args.events.display()))?;
    let records = read_events(BufReader::new(file)).with_context(|| format!("in {}", args.events.display()))?;
    let analysis = pipeline::analyze_records(&cfg, &records)?;

    let n = cfg.scheme.n_freq;
    let mut names = vec![REPORT_FILE.to_string()];
    names.extend((1..=n).map(histogram_file));
    let mut out = OutputDir::prepare(&args.common.out, args.common.overwrite, &names)?;
    write_analysis(&mut out, &analysis)?;
    println!("{} events analyzed", records.len());
    print_report(&analysis);
    Ok(())
}

pub fn plan(args: &PlanArgs) -> Result<()> {
    let cfg = load(&args.common)?;
    let s = &cfg.scheme;
    let report = check_plan(
        args.n_freq.unwrap_or(s.n_freq),
        args.n_spatial.unwrap_or(s.n_spatial),
        s.mode_duration_s,
        s.mapped_spacing_s,
        &cfg.limits(),
    )?;
    let mut out = OutputDir::prepare(&args.common.out, args.common.overwrite, &[PLAN_FILE.to_string()])?;
    out.write(PLAN_FILE, serde_json::to_string_pretty(&report)?.as_bytes())?;
    print!("{}", report.to_table());
    Ok(())
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = load(&args.common)?;
    if let Some(k) = args.comb {
        cfg.sweep.comb = k;
    }
    if let Some(r) = args.peak_depth {
        cfg.sweep.peak_depth = r;
    }
    if let Some(r) = args.finesse {
        cfg.sweep.finesse = r;
    }
    if let Some(r) = args.background_depth {
        cfg.sweep.background_depth = r;
    }
    let mut out = OutputDir::prepare(&args.common.out, args.common.overwrite, &[SWEEP_FILE.to_string()])?;
    let rows = pipeline::sweep(&cfg)?;
    let path = out.write(SWEEP_FILE, pipeline::write_sweep_csv(&rows).as_bytes())?;
    println!("{} rows written to {}", rows.len(), path.display());
    Ok(())
}
