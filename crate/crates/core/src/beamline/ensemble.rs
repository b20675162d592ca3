use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{geometric_envelope, order_spacing, ApertureWave, BeamlineGeometry};
use crate::config::Simulation;
use crate::distributions::{
    detector_kernel, velocity_quadrature, vertical_phi_scales, QuadratureRule,
};
use crate::error::{Error, Result};
use crate::grating::{compute_phi, truncation_order, ComplexPhase, GridSpec};
use crate::spectrum::channel_amplitudes;
use crate::units::de_broglie_wavelength;

/// Order coefficients below this magnitude are not propagated.
const COEFFICIENT_FLOOR: f64 = 1e-12;
/// Convergence threshold for doubling a quadrature axis.
pub const CONVERGENCE_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternMode {
    /// Point-source waves propagated through the slit with Fresnel optics.
    Wave,
    /// Incoherent order intensities painted onto the geometric slit shadow.
    Orders,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    UnitSum,
    Peak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityPhase {
    pub velocity: f64,
    pub weight: f64,
    pub phi: ComplexPhase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMetadata {
    pub config_digest: String,
    pub mode: PatternMode,
    pub normalization: Normalization,
    pub velocity_nodes: Vec<VelocityPhase>,
    /// Probability reaching the detector window before normalization.
    pub captured_probability: f64,
    /// Scale that was divided out by the normalization.
    pub normalization_factor: f64,
    pub detector_width: f64,
    pub detector_step: f64,
    /// `2 hbar k_L` order spacing at the peak velocity.
    pub order_spacing: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffractionPattern {
    /// Detector positions in m.
    pub positions: Vec<f64>,
    pub intensity: Vec<f64>,
    pub metadata: PatternMetadata,
}

impl DiffractionPattern {
    pub fn step(&self) -> Option<f64> {
        match self.positions.as_slice() {
            [a, b, ..] => Some(b - a),
            _ => None,
        }
    }
}

/// Fine simulation grid and its decimation onto the scan grid. Both are
/// symmetric about zero and the scan points are a subset of the fine ones.
struct DetectorGrid {
    fine: Vec<f64>,
    fine_step: f64,
    stride: usize,
}

impl DetectorGrid {
    fn new(geom: &BeamlineGeometry, scan_step: f64) -> Result<Self> {
        let ratio = scan_step / geom.fine_step;
        let stride = ratio.round();
        if stride < 1.0 || (ratio - stride).abs() > 1e-9 * ratio {
            return Err(Error::Grid(format!(
                "scan step {scan_step:e} m is not a whole multiple of the fine step {:e} m",
                geom.fine_step
            )));
        }
        let stride = stride as usize;
        let half_scan = (0.5 * geom.detector_span / scan_step).round() as i64;
        if half_scan < 1 {
            return Err(Error::Grid(
                "detector span holds fewer than three scan points".into(),
            ));
        }
        let half = half_scan * stride as i64;
        let fine = (-half..=half).map(|i| i as f64 * geom.fine_step).collect();
        Ok(Self {
            fine,
            fine_step: geom.fine_step,
            stride,
        })
    }

    fn scan_positions(&self) -> Vec<f64> {
        self.fine.iter().step_by(self.stride).copied().collect()
    }

    fn decimate(&self, values: &[f64]) -> Vec<f64> {
        values.iter().step_by(self.stride).copied().collect()
    }
}

fn convolve_same(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let half = (kernel.len() / 2) as i64;
    let n = signal.len() as i64;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(k, w)| {
                    let j = i + k as i64 - half;
                    (0..n).contains(&j).then(|| w * signal[j as usize])
                })
                .sum()
        })
        .collect()
}

fn source_rule(geom: &BeamlineGeometry, nodes: usize) -> QuadratureRule {
    let n = nodes.max(1);
    let cell = geom.slit1_width / n as f64;
    QuadratureRule {
        nodes: (0..n)
            .map(|i| -0.5 * geom.slit1_width + (i as f64 + 0.5) * cell)
            .collect(),
        weights: vec![1.0 / n as f64; n],
    }
}

/// Photon-channel Fourier amplitudes for one velocity at every vertical
/// node: `[vertical][n][m + m_max]`.
type ChannelTable = Vec<Vec<Vec<Complex64>>>;

struct Prepared {
    velocities: QuadratureRule,
    vertical: QuadratureRule,
    phis: Vec<ComplexPhase>,
    tables: Vec<ChannelTable>,
}

fn prepare(sim: &Simulation) -> Result<Prepared> {
    let velocities = velocity_quadrature(&sim.velocity, sim.velocity_nodes)?;
    let vertical = vertical_phi_scales(&sim.vertical, sim.vertical_nodes)?;
    let phis = velocities
        .nodes
        .iter()
        .map(|&v| compute_phi(&sim.species, &sim.beam, v))
        .collect::<Result<Vec<_>>>()?;
    let grid = GridSpec::one_period(sim.beam.wavelength, sim.samples_per_period)?;
    let tables = phis
        .par_iter()
        .map(|phi| {
            vertical
                .nodes
                .iter()
                .map(|&scale| {
                    let local = phi.scaled(scale);
                    channel_amplitudes(
                        local,
                        truncation_order(local, sim.tail_eps),
                        sim.m_max,
                        &grid,
                    )
                })
                .collect::<Result<ChannelTable>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        velocities,
        vertical,
        phis,
        tables,
    })
}

/// Raw probability density on the fine grid, wave mode.
fn wave_density(sim: &Simulation, prep: &Prepared, grid: &DetectorGrid) -> Result<Vec<f64>> {
    let sources = source_rule(&sim.geometry, sim.source_nodes);
    let k_l = sim.beam.k_l();
    let m_max = sim.m_max as i64;
    let tasks: Vec<(usize, usize)> = (0..prep.velocities.len())
        .flat_map(|vi| (0..sources.len()).map(move |si| (vi, si)))
        .collect();

    let partials = tasks
        .par_iter()
        .map(|&(vi, si)| -> Result<Vec<f64>> {
            let v = prep.velocities.nodes[vi];
            let weight = prep.velocities.weights[vi] * sources.weights[si];
            let lambda = de_broglie_wavelength(&sim.species, v)?;
            let wave = ApertureWave::new(sources.nodes[si], &sim.geometry, lambda)?;
            let table = &prep.tables[vi];

            let width = (2 * m_max + 1) as usize;
            let active: Vec<usize> = (0..width)
                .filter(|&m| {
                    table
                        .iter()
                        .any(|channels| channels.iter().any(|c| c[m].norm() > COEFFICIENT_FLOOR))
                })
                .collect();
            let mut slot = vec![usize::MAX; width];
            let fields: Vec<Vec<Complex64>> = active
                .iter()
                .enumerate()
                .map(|(a, &m)| {
                    slot[m] = a;
                    let q = (m as i64 - m_max) as f64 * k_l;
                    grid.fine.iter().map(|&x| wave.amplitude(x, q)).collect()
                })
                .collect();

            let mut out = vec![0.0; grid.fine.len()];
            for (channels, &w_vertical) in table.iter().zip(&prep.vertical.weights) {
                for c in channels {
                    let terms: Vec<(usize, Complex64)> = c
                        .iter()
                        .enumerate()
                        .filter(|(_, a)| a.norm() > COEFFICIENT_FLOOR)
                        .map(|(m, a)| (slot[m], *a))
                        .collect();
                    if terms.is_empty() {
                        continue;
                    }
                    let w = weight * w_vertical;
                    for (i, acc) in out.iter_mut().enumerate() {
                        let psi: Complex64 =
                            terms.iter().map(|&(a, coef)| coef * fields[a][i]).sum();
                        *acc += w * psi.norm_sqr();
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut total = vec![0.0; grid.fine.len()];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(total)
}

/// Per-order densities on the fine grid, orders mode, keyed by `m`.
fn order_densities(
    sim: &Simulation,
    prep: &Prepared,
    grid: &DetectorGrid,
) -> Result<Vec<(i64, Vec<f64>)>> {
    let envelope = geometric_envelope(&sim.geometry);
    let m_max = sim.m_max as i64;
    let h = grid.fine_step;
    let x0 = grid.fine[0];
    let mut rows: Vec<(i64, Vec<f64>)> = (-m_max..=m_max)
        .map(|m| (m, vec![0.0; grid.fine.len()]))
        .collect();
    for (vi, (&v, &wv)) in prep
        .velocities
        .nodes
        .iter()
        .zip(&prep.velocities.weights)
        .enumerate()
    {
        let half_spacing = 0.5 * order_spacing(&sim.species, v, &sim.beam, &sim.geometry)?;
        for (channels, &ws) in prep.tables[vi].iter().zip(&prep.vertical.weights) {
            for (row, (m, density)) in rows.iter_mut().enumerate() {
                let weight: f64 = channels.iter().map(|c| c[row].norm_sqr()).sum::<f64>() * wv * ws;
                if weight == 0.0 {
                    continue;
                }
                let centre = *m as f64 * half_spacing;
                let reach = 0.5 * envelope.penumbra + h;
                let lo = (((centre - reach - x0) / h).floor().max(0.0)) as usize;
                let hi = ((((centre + reach - x0) / h).ceil()) as usize).min(grid.fine.len() - 1);
                if lo > hi {
                    continue;
                }
                for (d, &x) in density[lo..=hi].iter_mut().zip(&grid.fine[lo..=hi]) {
                    *d += weight * envelope.cell_average(x - centre, h);
                }
            }
        }
    }
    Ok(rows)
}

fn raw_density(sim: &Simulation, prep: &Prepared, grid: &DetectorGrid) -> Result<Vec<f64>> {
    match sim.mode {
        PatternMode::Wave => wave_density(sim, prep, grid),
        PatternMode::Orders => {
            let mut total = vec![0.0; grid.fine.len()];
            for (_, row) in order_densities(sim, prep, grid)? {
                for (t, r) in total.iter_mut().zip(row) {
                    *t += r;
                }
            }
            Ok(total)
        }
    }
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Detector-plane pattern averaged over source points, velocities and beam
/// heights, blurred by the detector response and sampled on the scan grid.
///
/// Work is spread over (velocity, source) tuples; partial results are added
/// in tuple order so the output does not depend on the number of workers.
pub fn ensemble_pattern(sim: &Simulation) -> Result<DiffractionPattern> {
    with_pool(sim.threads, || ensemble_pattern_inner(sim))?
}

fn ensemble_pattern_inner(sim: &Simulation) -> Result<DiffractionPattern> {
    sim.geometry.validate()?;
    let grid = DetectorGrid::new(&sim.geometry, sim.detector.step)?;
    let prep = prepare(sim)?;
    let density = raw_density(sim, &prep, &grid)?;
    if density.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite intensity".into()));
    }
    let captured = density.iter().sum::<f64>() * grid.fine_step;
    let kernel = detector_kernel(&sim.detector, grid.fine_step)?;
    let blurred = convolve_same(&density, &kernel);
    let mut intensity = grid.decimate(&blurred);
    let factor = match sim.normalization {
        Normalization::UnitSum => intensity.iter().sum::<f64>(),
        Normalization::Peak => intensity.iter().cloned().fold(0.0, f64::max),
    };
    if !(factor > 0.0) {
        return Err(Error::Numerical(
            "pattern has no intensity inside the detector span".into(),
        ));
    }
    for v in &mut intensity {
        *v /= factor;
    }

    let velocity_nodes = prep
        .velocities
        .iter()
        .zip(&prep.phis)
        .map(|((velocity, weight), phi)| VelocityPhase {
            velocity,
            weight,
            phi: *phi,
        })
        .collect();
    Ok(DiffractionPattern {
        positions: grid.scan_positions(),
        intensity,
        metadata: PatternMetadata {
            config_digest: sim.digest.clone(),
            mode: sim.mode,
            normalization: sim.normalization,
            velocity_nodes,
            captured_probability: captured,
            normalization_factor: factor,
            detector_width: sim.detector.width,
            detector_step: sim.detector.step,
            order_spacing: order_spacing(
                &sim.species,
                sim.velocity.v_peak,
                &sim.beam,
                &sim.geometry,
            )?,
        },
    })
}

/// Orders-mode contribution of every `hbar k_L` order, blurred and on the
/// scan grid, in raw probability units. Orders with no weight are omitted.
pub fn order_components(sim: &Simulation) -> Result<Vec<(i64, Vec<f64>)>> {
    with_pool(sim.threads, || -> Result<Vec<(i64, Vec<f64>)>> {
        let grid = DetectorGrid::new(&sim.geometry, sim.detector.step)?;
        let prep = prepare(sim)?;
        let kernel = detector_kernel(&sim.detector, grid.fine_step)?;
        Ok(order_densities(sim, &prep, &grid)?
            .into_iter()
            .filter(|(_, row)| row.iter().any(|&v| v > 0.0))
            .map(|(m, row)| (m, grid.decimate(&convolve_same(&row, &kernel))))
            .collect())
    })?
}

/// RMS difference between two unit-sum patterns on a shared grid, relative
/// to the peak of the first.
pub fn relative_rms(a: &[f64], b: &[f64]) -> f64 {
    let sa: f64 = a.iter().sum();
    let sb: f64 = b.iter().sum();
    let peak = a.iter().cloned().fold(0.0, f64::max) / sa;
    let ms = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x / sa - y / sb).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    ms.sqrt() / peak
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub source: f64,
    pub velocity: f64,
    pub vertical: f64,
    pub grid: f64,
    pub converged: bool,
}

/// Re-runs the ensemble with each quadrature axis doubled (and once with a
/// twice finer detector grid and grating sampling) and reports the relative
/// RMS change of each.
pub fn convergence_check(sim: &Simulation) -> Result<ConvergenceReport> {
    let base = ensemble_pattern(sim)?;
    let change = |alt: Simulation| -> Result<f64> {
        let p = ensemble_pattern(&alt)?;
        Ok(relative_rms(&base.intensity, &p.intensity))
    };
    let mut s = sim.clone();
    s.source_nodes *= 2;
    let source = change(s)?;
    let mut s = sim.clone();
    s.velocity_nodes *= 2;
    let velocity = change(s)?;
    let mut s = sim.clone();
    s.vertical_nodes *= 2;
    let vertical = change(s)?;
    let mut s = sim.clone();
    s.geometry.fine_step *= 0.5;
    s.samples_per_period *= 2;
    let grid = change(s)?;
    Ok(ConvergenceReport {
        source,
        velocity,
        vertical,
        grid,
        converged: [source, velocity, vertical, grid]
            .iter()
            .all(|&c| c <= CONVERGENCE_LIMIT),
    })
}
