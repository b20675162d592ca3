//! Velocity, vertical-overlap and detector-resolution models, reduced to
//! deterministic quadrature rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// FWHM of a unit-variance Gaussian.
pub const GAUSSIAN_FWHM: f64 = 2.354_820_045_030_949_3;

/// Nodes and normalized weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn single(node: f64) -> Self {
        Self {
            nodes: vec![node],
            weights: vec![1.0],
        }
    }

    fn normalized(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Numerical(
                "quadrature weights must be nonnegative with positive sum".into(),
            ));
        }
        Ok(Self {
            nodes,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(x, w)| x * w).sum()
    }

    pub fn std_dev(&self) -> f64 {
        let mean = self.mean();
        self.iter()
            .map(|(x, w)| w * (x - mean).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityShape {
    Gaussian,
    /// Tabulated `(v, relative weight)` pairs, used as nodes directly.
    Histogram {
        table: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityDistribution {
    pub v_peak: f64,
    pub fwhm_ratio: f64,
    pub shape: VelocityShape,
}

impl VelocityDistribution {
    pub fn gaussian(v_peak: f64, fwhm_ratio: f64) -> Result<Self> {
        if !(v_peak > 0.0) || !v_peak.is_finite() {
            return Err(Error::domain("v_peak", v_peak, "must be positive"));
        }
        if !(fwhm_ratio > 0.0 && fwhm_ratio < 1.0) {
            return Err(Error::domain(
                "fwhm_ratio",
                fwhm_ratio,
                "must lie in (0, 1)",
            ));
        }
        Ok(Self {
            v_peak,
            fwhm_ratio,
            shape: VelocityShape::Gaussian,
        })
    }

    pub fn histogram(table: Vec<(f64, f64)>) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::Data {
                line: 0,
                message: "velocity histogram is empty".into(),
            });
        }
        for (i, &(v, w)) in table.iter().enumerate() {
            if !(v > 0.0) || !(w >= 0.0) || !v.is_finite() || !w.is_finite() {
                return Err(Error::Data {
                    line: i + 1,
                    message: format!("need v > 0 and weight >= 0, got ({v}, {w})"),
                });
            }
        }
        let rule = QuadratureRule::normalized(
            table.iter().map(|p| p.0).collect(),
            table.iter().map(|p| p.1).collect(),
        )?;
        let v_peak = table
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|p| p.0)
            .unwrap_or(rule.mean());
        let fwhm_ratio = (GAUSSIAN_FWHM * rule.std_dev() / v_peak).clamp(1e-9, 1.0 - 1e-9);
        Ok(Self {
            v_peak,
            fwhm_ratio,
            shape: VelocityShape::Histogram { table },
        })
    }

    pub fn fwhm(&self) -> f64 {
        self.fwhm_ratio * self.v_peak
    }
}

/// Parses a two-column `v weight` table (whitespace or comma separated,
/// `#` starts a comment).
pub fn parse_velocity_histogram(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut table = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|e| Error::Data {
                line: i + 1,
                message: format!("`{s}`: {e}"),
            })
        };
        match fields.as_slice() {
            [v, w] => table.push((parse(v)?, parse(w)?)),
            _ => {
                return Err(Error::Data {
                    line: i + 1,
                    message: format!("expected two columns, found {}", fields.len()),
                })
            }
        }
    }
    Ok(table)
}

/// Velocity nodes and weights.
///
/// Gaussian shape: midpoints of `n_nodes` equal cells spanning
/// `v_peak +- 2.5 FWHM`, weighted by the density, nodes at `v <= 0` dropped.
/// Histogram shape: the table itself.
pub fn velocity_quadrature(dist: &VelocityDistribution, n_nodes: usize) -> Result<QuadratureRule> {
    if n_nodes == 0 {
        return Err(Error::config("velocity.nodes", "need at least one node"));
    }
    match &dist.shape {
        VelocityShape::Histogram { table } => QuadratureRule::normalized(
            table.iter().map(|p| p.0).collect(),
            table.iter().map(|p| p.1).collect(),
        ),
        VelocityShape::Gaussian => {
            if n_nodes == 1 {
                return Ok(QuadratureRule::single(dist.v_peak));
            }
            let fwhm = dist.fwhm();
            let sigma = fwhm / GAUSSIAN_FWHM;
            let lo = dist.v_peak - 2.5 * fwhm;
            let cell = 5.0 * fwhm / n_nodes as f64;
            let (nodes, weights): (Vec<f64>, Vec<f64>) = (0..n_nodes)
                .map(|i| lo + (i as f64 + 0.5) * cell)
                .filter(|&v| v > 0.0)
                .map(|v| (v, (-0.5 * ((v - dist.v_peak) / sigma).powi(2)).exp()))
                .unzip();
            QuadratureRule::normalized(nodes, weights)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalProfile {
    /// FWHM of the molecular beam height at the grating, m.
    pub beam_fwhm: f64,
    /// Vertical 1/e^2 radius of the laser, m.
    pub waist_y: f64,
}

impl VerticalProfile {
    pub fn new(beam_fwhm: f64, waist_y: f64) -> Result<Self> {
        if !(beam_fwhm > 0.0) {
            return Err(Error::domain("beam_fwhm", beam_fwhm, "must be positive"));
        }
        if !(waist_y > 0.0) {
            return Err(Error::domain("waist_y", waist_y, "must be positive"));
        }
        Ok(Self { beam_fwhm, waist_y })
    }
}

/// Gauss-Hermite nodes and weights for `int f(t) exp(-t^2) dt`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PI_M4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z = 0.0_f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut derivative = 0.0;
        for _ in 0..100 {
            let mut p1 = PI_M4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            derivative = (2.0 * nf).sqrt() * p2;
            let step = p1 / derivative;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (derivative * derivative);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Multiplicative scales `exp(-2 y^2 / w_y^2)` applied to the complex phase
/// at Gauss-Hermite heights `y` over the molecular beam's Gaussian profile.
/// Mirror nodes share a scale and are merged.
pub fn vertical_phi_scales(profile: &VerticalProfile, n_nodes: usize) -> Result<QuadratureRule> {
    if n_nodes == 0 {
        return Err(Error::config("vertical.nodes", "need at least one node"));
    }
    let sigma = profile.beam_fwhm / GAUSSIAN_FWHM;
    let (t, w) = gauss_hermite(n_nodes);
    let mut nodes: Vec<f64> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (ti, wi) in t.iter().zip(&w) {
        if *ti < 0.0 {
            continue;
        }
        let y = std::f64::consts::SQRT_2 * sigma * ti;
        let scale = (-2.0 * y * y / (profile.waist_y * profile.waist_y)).exp();
        nodes.push(scale);
        weights.push(if *ti == 0.0 { *wi } else { 2.0 * wi });
    }
    QuadratureRule::normalized(nodes, weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelShape {
    Gaussian,
    Tophat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Resolution FWHM (Gaussian) or full width (top-hat), m.
    pub width: f64,
    /// Scan step, m.
    pub step: f64,
    pub kernel: KernelShape,
}

impl DetectorModel {
    pub fn new(width: f64, step: f64, kernel: KernelShape) -> Result<Self> {
        if !(width >= 0.0) {
            return Err(Error::domain(
                "detector width",
                width,
                "must be nonnegative",
            ));
        }
        if !(step > 0.0) {
            return Err(Error::domain("detector step", step, "must be positive"));
        }
        Ok(Self {
            width,
            step,
            kernel,
        })
    }
}

/// Centered, odd-length convolution kernel with unit sum.
pub fn detector_kernel(model: &DetectorModel, grid_step: f64) -> Result<Vec<f64>> {
    if !(grid_step > 0.0) {
        return Err(Error::domain("grid step", grid_step, "must be positive"));
    }
    if model.width < grid_step {
        return Ok(vec![1.0]);
    }
    let taps: Vec<f64> = match model.kernel {
        KernelShape::Gaussian => {
            let sigma = model.width / GAUSSIAN_FWHM;
            let half = (5.0 * sigma / grid_step).ceil() as i64;
            (-half..=half)
                .map(|k| (-0.5 * (k as f64 * grid_step / sigma).powi(2)).exp())
                .collect()
        }
        KernelShape::Tophat => {
            let hw = 0.5 * model.width;
            let half = (hw / grid_step + 0.5).ceil() as i64;
            (-half..=half)
                .map(|k| {
                    let lo = (k as f64 - 0.5) * grid_step;
                    let hi = (k as f64 + 0.5) * grid_step;
                    (hi.min(hw) - lo.max(-hw)).max(0.0)
                })
                .collect()
        }
    };
    let total: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / total).collect())
}
