//! Orchestration of runs and their on-disk artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beamline::{
    compare_samples, convergence_check, ensemble_pattern, pattern_metrics, ConvergenceReport,
    DiffractionPattern, PatternComparison, CONVERGENCE_LIMIT,
};
use crate::config::{ConvergencePolicy, Simulation, SimulationConfig};
use crate::distributions::{vertical_phi_scales, QuadratureRule};
use crate::error::{Error, Result};
use crate::grating::{
    compute_phi, raman_nath_diagnostic, truncation_order, ComplexPhase, RamanNath,
};
use crate::spectrum::{absorbed_fraction, incoherent_order_intensities, OrderSpectrum};

/// Exit status for a rejected configuration.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for numerical or convergence failures.
pub const EXIT_NUMERICAL: i32 = 3;
/// Exit status for unreadable or malformed input and output files.
pub const EXIT_IO: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::Domain { .. } => EXIT_CONFIG,
        Error::Numerical(_) | Error::Aliasing { .. } | Error::Grid(_) => EXIT_NUMERICAL,
        Error::Io(_) | Error::Data { .. } => EXIT_IO,
        Error::Pattern(_) => 1,
    }
}

pub const CSV_HEADER: &str = "position_um,intensity";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_digest: String,
    pub species: String,
    pub power_w: f64,
    pub v_peak: f64,
    /// Complex phase at the peak velocity, beam centre.
    pub phi: ComplexPhase,
    pub mean_photon_number: f64,
    /// Probability of absorbing `n` photons, averaged over beam heights.
    pub absorbed_fractions: Vec<f64>,
    /// Same on the beam axis.
    pub absorbed_fractions_on_axis: Vec<f64>,
    /// Order spectrum at the peak velocity on the beam axis.
    pub order_spectrum: OrderSpectrum,
    pub order_spacing_um: f64,
    /// `(j, efficiency)` for windows centred on `j` order spacings.
    pub order_efficiencies: Vec<(i64, f64)>,
    pub visibility: f64,
    pub raman_nath: RamanNath,
    pub captured_probability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceReport>,
    pub warnings: Vec<String>,
}

fn fractions(phi: ComplexPhase, rule: &QuadratureRule, tail_eps: f64) -> Vec<f64> {
    let top = truncation_order(
        phi.scaled(rule.nodes.iter().cloned().fold(0.0, f64::max)),
        tail_eps,
    );
    (0..=top).map(|n| absorbed_fraction(phi, n, rule)).collect()
}

/// Summary quantities that need no pattern: phase, absorption and orders at
/// the peak velocity.
struct PhaseSummary {
    phi: ComplexPhase,
    averaged: Vec<f64>,
    on_axis: Vec<f64>,
    spectrum: OrderSpectrum,
    raman_nath: RamanNath,
}

fn phase_summary(sim: &Simulation) -> Result<PhaseSummary> {
    let v = sim.velocity.v_peak;
    let phi = compute_phi(&sim.species, &sim.beam, v)?;
    let vertical = vertical_phi_scales(&sim.vertical, sim.vertical_nodes)?;
    let averaged = fractions(phi, &vertical, sim.tail_eps);
    let on_axis = fractions(phi, &QuadratureRule::single(1.0), sim.tail_eps);
    let mut spectrum = incoherent_order_intensities(phi, sim.m_max, sim.tail_eps)?;
    spectrum.per_channel = None;
    let rn = raman_nath_diagnostic(&sim.species, &sim.beam, v, phi)?;
    Ok(PhaseSummary {
        phi,
        averaged,
        on_axis,
        spectrum,
        raman_nath: rn,
    })
}

fn summarize(
    sim: &Simulation,
    pattern: &DiffractionPattern,
    convergence: Option<ConvergenceReport>,
) -> Result<RunSummary> {
    let PhaseSummary {
        phi,
        averaged,
        on_axis,
        spectrum,
        raman_nath,
    } = phase_summary(sim)?;
    let spacing = pattern.metadata.order_spacing;
    let metrics = pattern_metrics(pattern, spacing)?;
    let mut warnings = Vec::new();
    if raman_nath.warning {
        warnings.push(format!(
            "transverse walk-off in the grating is {:.2} periods; the thin-grating model may not hold",
            raman_nath.ratio
        ));
    }
    if let Some(c) = &convergence {
        if !c.converged {
            warnings.push(format!(
                "quadrature not converged: doubling changed the pattern by source {:.2e}, velocity {:.2e}, vertical {:.2e}, grid {:.2e} (limit {CONVERGENCE_LIMIT})",
                c.source, c.velocity, c.vertical, c.grid
            ));
        }
    }
    Ok(RunSummary {
        config_digest: sim.digest.clone(),
        species: sim.species.name.clone(),
        power_w: sim.beam.power_per_wave,
        v_peak: sim.velocity.v_peak,
        phi,
        mean_photon_number: phi.mean_photon_number(),
        absorbed_fractions: averaged,
        absorbed_fractions_on_axis: on_axis,
        order_spectrum: spectrum,
        order_spacing_um: spacing * 1e6,
        order_efficiencies: metrics.efficiencies,
        visibility: metrics.visibility,
        raman_nath,
        captured_probability: pattern.metadata.captured_probability,
        convergence,
        warnings,
    })
}

/// Renders a pattern in the `position_um,intensity` CSV schema.
pub fn pattern_csv(positions: &[f64], intensity: &[f64]) -> String {
    let mut out = String::with_capacity(48 * positions.len() + 32);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (x, v) in positions.iter().zip(intensity) {
        let _ = writeln!(out, "{:.6},{:.30}", x * 1e6, v);
    }
    out
}

/// Parses the pattern CSV schema into positions (m) and intensities.
pub fn read_pattern_csv(text: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Data {
                line: 1,
                message: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut positions = Vec::new();
    let mut intensity = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Data {
            line: i + 1,
            message,
        };
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| bad("expected two comma-separated fields".into()))?;
        let x: f64 = a
            .trim()
            .parse()
            .map_err(|e| bad(format!("position: {e}")))?;
        let v: f64 = b
            .trim()
            .parse()
            .map_err(|e| bad(format!("intensity: {e}")))?;
        if !x.is_finite() || !v.is_finite() {
            return Err(bad("non-finite value".into()));
        }
        positions.push(x / 1e6);
        intensity.push(v);
    }
    if positions.is_empty() {
        return Err(Error::Data {
            line: 1,
            message: "no data rows".into(),
        });
    }
    Ok((positions, intensity))
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Numerical(format!("json: {e}")))?;
    text.push('\n');
    Ok(text.into_bytes())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub pattern_csv: PathBuf,
    pub summary_json: PathBuf,
}

fn simulate_resolved(
    cfg: &SimulationConfig,
    sim: &Simulation,
) -> Result<(DiffractionPattern, RunSummary)> {
    let pattern = ensemble_pattern(sim)?;
    let convergence = match cfg.run.convergence {
        ConvergencePolicy::Off => None,
        _ => Some(convergence_check(sim)?),
    };
    let summary = summarize(sim, &pattern, convergence)?;
    Ok((pattern, summary))
}

/// Computes the ensemble pattern and its summary without touching disk.
pub fn simulate(cfg: &SimulationConfig) -> Result<(DiffractionPattern, RunSummary)> {
    simulate_resolved(cfg, &cfg.resolve()?)
}

/// Runs the simulation and writes the pattern CSV and JSON summary into the
/// output directory. A strict convergence policy turns an unconverged
/// study into an error after the files are written.
pub fn run_simulate(
    cfg: &SimulationConfig,
) -> Result<(DiffractionPattern, RunSummary, RunArtifacts)> {
    let (pattern, summary) = simulate(cfg)?;
    let dir = cfg.output_dir();
    let artifacts = RunArtifacts {
        pattern_csv: dir.join(&cfg.run.pattern_csv),
        summary_json: dir.join(&cfg.run.summary_json),
    };
    write_atomic(
        &artifacts.pattern_csv,
        pattern_csv(&pattern.positions, &pattern.intensity).as_bytes(),
    )?;
    write_atomic(&artifacts.summary_json, &to_json(&summary)?)?;
    if cfg.run.convergence == ConvergencePolicy::Strict {
        if let Some(c) = summary.convergence.filter(|c| !c.converged) {
            return Err(Error::Numerical(format!(
                "quadrature not converged (source {:.2e}, velocity {:.2e}, vertical {:.2e}, grid {:.2e})",
                c.source, c.velocity, c.vertical, c.grid
            )));
        }
    }
    Ok((pattern, summary, artifacts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdersReport {
    pub config_digest: String,
    pub species: String,
    pub power_w: f64,
    pub v_peak: f64,
    pub phi: ComplexPhase,
    pub mean_photon_number: f64,
    pub absorbed_fractions: Vec<f64>,
    pub absorbed_fractions_on_axis: Vec<f64>,
    pub order_spectrum: OrderSpectrum,
    pub raman_nath: RamanNath,
}

/// Order spectrum and absorption statistics at the peak velocity; no
/// propagation. Written to `orders.json`.
pub fn run_orders(cfg: &SimulationConfig) -> Result<(OrdersReport, PathBuf)> {
    let sim = cfg.resolve()?;
    let PhaseSummary {
        phi,
        averaged,
        on_axis,
        mut spectrum,
        raman_nath,
    } = phase_summary(&sim)?;
    spectrum.per_channel = incoherent_order_intensities(phi, sim.m_max, sim.tail_eps)?.per_channel;
    let report = OrdersReport {
        config_digest: sim.digest.clone(),
        species: sim.species.name.clone(),
        power_w: sim.beam.power_per_wave,
        v_peak: sim.velocity.v_peak,
        phi,
        mean_photon_number: phi.mean_photon_number(),
        absorbed_fractions: averaged,
        absorbed_fractions_on_axis: on_axis,
        order_spectrum: spectrum,
        raman_nath,
    };
    let path = cfg.output_dir().join("orders.json");
    write_atomic(&path, &to_json(&report)?)?;
    Ok((report, path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub power_w: f64,
    pub pattern: DiffractionPattern,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerScan {
    pub points: Vec<ScanPoint>,
    pub pattern_csv: PathBuf,
    pub table_csv: PathBuf,
    pub summary_json: PathBuf,
}

/// One ensemble run per power. Writes a combined
/// `power_w,position_um,intensity` CSV, a per-power table of phase and
/// central/first-order efficiencies, and the list of summaries.
pub fn run_power_scan(cfg: &SimulationConfig, powers: &[f64]) -> Result<PowerScan> {
    if powers.is_empty() {
        return Err(Error::config("powers", "need at least one power"));
    }
    if let Some(p) = powers.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::config(
            "powers",
            format!("powers must be nonnegative, got {p}"),
        ));
    }
    let mut points = Vec::with_capacity(powers.len());
    for &power in powers {
        let mut c = cfg.clone();
        c.grating.power_w = power;
        let sim = c.resolve()?;
        let (pattern, summary) = simulate_resolved(&c, &sim)?;
        points.push(ScanPoint {
            power_w: power,
            pattern,
            summary,
        });
    }

    let mut combined = String::from("power_w,");
    combined.push_str(CSV_HEADER);
    combined.push('\n');
    let mut table =
        String::from("power_w,phi_re,phi_im,mean_photon_number,efficiency_0,efficiency_1\n");
    for p in &points {
        for (x, v) in p.pattern.positions.iter().zip(&p.pattern.intensity) {
            let _ = writeln!(combined, "{:.6},{:.6},{:.30}", p.power_w, x * 1e6, v);
        }
        let eff = |j: i64| {
            p.summary
                .order_efficiencies
                .iter()
                .find(|e| e.0 == j)
                .map(|e| e.1)
                .unwrap_or(0.0)
        };
        let _ = writeln!(
            table,
            "{:.6},{:.15},{:.15},{:.15},{:.15},{:.15}",
            p.power_w,
            p.summary.phi.re,
            p.summary.phi.im,
            p.summary.mean_photon_number,
            eff(0),
            0.5 * (eff(1) + eff(-1))
        );
    }
    let dir = cfg.output_dir();
    let scan = PowerScan {
        pattern_csv: dir.join("scan.csv"),
        table_csv: dir.join("scan_table.csv"),
        summary_json: dir.join("scan_summary.json"),
        points,
    };
    let summaries: Vec<&RunSummary> = scan.points.iter().map(|p| &p.summary).collect();
    write_atomic(&scan.pattern_csv, combined.as_bytes())?;
    write_atomic(&scan.table_csv, table.as_bytes())?;
    write_atomic(&scan.summary_json, &to_json(&summaries)?)?;
    Ok(scan)
}

/// Aligns two pattern CSV files and reports the shift and residual.
pub fn run_compare(a: &Path, b: &Path) -> Result<PatternComparison> {
    let (pa, ia) = read_pattern_csv(&fs::read_to_string(a)?)?;
    let (pb, ib) = read_pattern_csv(&fs::read_to_string(b)?)?;
    compare_samples(&pa, &ia, &pb, &ib)
}
