//! Source slit, collimating slit and grating, free flight to the detector.
//!
//! Slit 2 and the light grating share a plane. Each point of slit 1 emits an
//! independent cylindrical wave; the ensemble is an incoherent sum over
//! source points, velocities, heights in the beam and photon channels.

mod ensemble;
mod metrics;
mod propagate;

pub use ensemble::{
    convergence_check, ensemble_pattern, order_components, relative_rms, ConvergenceReport,
    DiffractionPattern, Normalization, PatternMetadata, PatternMode, VelocityPhase,
    CONVERGENCE_LIMIT,
};
pub use metrics::{
    compare_patterns, compare_samples, fit_order_weights, pattern_metrics, PatternComparison,
    PatternMetrics,
};
pub use propagate::{
    fresnel_propagate, grating_window, point_source_pattern, point_source_pattern_direct,
    ApertureWave,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grating::GratingBeam;
use crate::units::{MoleculeSpecies, HBAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamlineGeometry {
    pub slit1_width: f64,
    pub slit2_width: f64,
    /// Slit 1 to slit 2 (and grating), m.
    pub l12: f64,
    /// Grating to detector, m.
    pub l2d: f64,
    /// Full width of the simulated detector window, m.
    pub detector_span: f64,
    /// Internal sampling step at the detector before resolution and
    /// resampling to the scan grid, m.
    pub fine_step: f64,
}

impl BeamlineGeometry {
    /// 7 um and 5 um slits 1.13 m apart, detector 1.2 m behind the grating.
    pub fn paper() -> Self {
        Self {
            slit1_width: 7e-6,
            slit2_width: 5e-6,
            l12: 1.13,
            l2d: 1.2,
            detector_span: 240e-6,
            fine_step: 0.25e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (what, v) in [
            ("slit1_width", self.slit1_width),
            ("slit2_width", self.slit2_width),
            ("l12", self.l12),
            ("detector_span", self.detector_span),
            ("fine_step", self.fine_step),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(what, v, "must be positive"));
            }
        }
        if !(self.l2d >= 0.0) {
            return Err(Error::domain("l2d", self.l2d, "must be nonnegative"));
        }
        Ok(())
    }
}

/// Detector spacing of adjacent `2 hbar k_L` orders.
pub fn order_spacing(
    species: &MoleculeSpecies,
    v: f64,
    beam: &GratingBeam,
    geom: &BeamlineGeometry,
) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::domain("velocity", v, "must be positive"));
    }
    Ok(2.0 * HBAR * beam.k_l() * geom.l2d / (species.mass_kg() * v))
}

/// `x_m = m (2 hbar k_L / M v) L2D` for `-m_max..=m_max`.
pub fn farfield_peak_positions(
    species: &MoleculeSpecies,
    v: f64,
    beam: &GratingBeam,
    geom: &BeamlineGeometry,
    m_max: usize,
) -> Result<Vec<f64>> {
    let spacing = order_spacing(species, v, beam, geom)?;
    let m_max = m_max as i32;
    Ok((-m_max..=m_max).map(|m| f64::from(m) * spacing).collect())
}

/// Ray-optics shadow of slit 2 lit by the incoherent slit 1: the convolution
/// of two boxes, a trapezoid of unit area.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trapezoid {
    /// Full width of the flat top (umbra).
    pub umbra: f64,
    /// Full width at the base (penumbra).
    pub penumbra: f64,
}

pub fn geometric_envelope(geom: &BeamlineGeometry) -> Trapezoid {
    let r = geom.l2d / geom.l12;
    let a = geom.slit2_width * (1.0 + r);
    let b = geom.slit1_width * r;
    Trapezoid {
        umbra: (a - b).abs(),
        penumbra: a + b,
    }
}

impl Trapezoid {
    fn height(&self) -> f64 {
        2.0 / (self.umbra + self.penumbra)
    }

    pub fn density(&self, x: f64) -> f64 {
        let x = x.abs();
        let (lo, hi) = (0.5 * self.umbra, 0.5 * self.penumbra);
        if x <= lo {
            self.height()
        } else if x >= hi {
            0.0
        } else {
            self.height() * (hi - x) / (hi - lo)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = (0.5 * self.umbra, 0.5 * self.penumbra);
        let h = self.height();
        let right = |u: f64| -> f64 {
            // mass in [0, u] for u >= 0
            if u <= lo {
                h * u
            } else if u >= hi {
                0.5
            } else {
                let ramp = hi - lo;
                h * lo + h * ((u - lo) - 0.5 * (u - lo).powi(2) / ramp)
            }
        };
        if x >= 0.0 {
            0.5 + right(x)
        } else {
            0.5 - right(-x)
        }
    }

    /// Mean density over `[x - h/2, x + h/2]`.
    pub fn cell_average(&self, x: f64, h: f64) -> f64 {
        (self.cdf(x + 0.5 * h) - self.cdf(x - 0.5 * h)) / h
    }
}
