use num_complex::Complex64;

use super::BeamlineGeometry;
use crate::error::{Error, Result};
use crate::grating::{GridSpec, TransmissionChannel};
use crate::special::fresnel_integrals;
use crate::spectrum::fourier_order_amplitudes;

/// Paraxial Fresnel propagation of a sampled 1-D field over `distance`.
///
/// Sample `j` stands for the cell `x0 + j dx +- dx/2`. Within a cell the
/// field is held constant and the kernel phase is linearized, so each cell
/// contributes `f_j exp(i phi_j) dx sinc(phi'_j dx / 2)`. Fails when the
/// kernel phase advances more than `pi` per sample anywhere on the target
/// set.
pub fn fresnel_propagate(
    field: &[Complex64],
    x0: f64,
    dx: f64,
    wavelength: f64,
    distance: f64,
    targets: &[f64],
) -> Result<Vec<Complex64>> {
    if !(distance > 0.0) {
        return Err(Error::domain(
            "propagation distance",
            distance,
            "must be positive",
        ));
    }
    if !(wavelength > 0.0) {
        return Err(Error::domain("wavelength", wavelength, "must be positive"));
    }
    if field.is_empty() {
        return Ok(vec![Complex64::new(0.0, 0.0); targets.len()]);
    }
    let lambda_l = wavelength * distance;
    let x_last = x0 + (field.len() - 1) as f64 * dx;
    let max_offset = targets
        .iter()
        .map(|&x| (x - x0).abs().max((x - x_last).abs()))
        .fold(0.0, f64::max);
    let phase_step = 2.0 * std::f64::consts::PI * max_offset * dx / lambda_l;
    if phase_step > std::f64::consts::PI {
        return Err(Error::Aliasing {
            phase_step,
            grid_step: dx,
            max_offset,
        });
    }

    let live: Vec<(f64, Complex64)> = field
        .iter()
        .enumerate()
        .filter(|(_, f)| f.norm_sqr() > 0.0)
        .map(|(j, f)| (x0 + j as f64 * dx, *f))
        .collect();
    let pre = Complex64::from_polar(dx / lambda_l.sqrt(), -std::f64::consts::FRAC_PI_4);
    let curvature = std::f64::consts::PI / lambda_l;
    Ok(targets
        .iter()
        .map(|&x| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(xs, f) in &live {
                let d = x - xs;
                let half_step = curvature * d * dx;
                let sinc = if half_step == 0.0 {
                    1.0
                } else {
                    half_step.sin() / half_step
                };
                acc += f * Complex64::from_polar(sinc, curvature * d * d);
            }
            acc * pre
        })
        .collect())
}

/// Cylindrical wave from a point in slit 1, cut by slit 2, optionally tilted
/// by a transverse wavenumber `q`, at the detector plane.
///
/// The slit field is normalized to unit probability. The exponent is
/// quadratic across the slit, so the aperture integral reduces to a
/// difference of Fresnel integrals. Phases common to every tilt at a given
/// detector point are dropped; amplitudes with different `q` can still be
/// summed coherently.
#[derive(Debug, Clone, Copy)]
pub struct ApertureWave {
    source_x: f64,
    inv_l1: f64,
    inv_l2: f64,
    half_width: f64,
    k: f64,
    alpha: f64,
    scale: f64,
    magnitude: f64,
}

impl ApertureWave {
    pub fn new(source_x: f64, geom: &BeamlineGeometry, de_broglie: f64) -> Result<Self> {
        if !(geom.l2d > 0.0) {
            return Err(Error::domain(
                "l2d",
                geom.l2d,
                "wave propagation needs a positive distance",
            ));
        }
        if !(de_broglie > 0.0) {
            return Err(Error::domain(
                "de Broglie wavelength",
                de_broglie,
                "must be positive",
            ));
        }
        let k = 2.0 * std::f64::consts::PI / de_broglie;
        let inv_l1 = 1.0 / geom.l12;
        let inv_l2 = 1.0 / geom.l2d;
        let alpha = 0.5 * k * (inv_l1 + inv_l2);
        let root = (std::f64::consts::PI / (2.0 * alpha)).sqrt();
        Ok(Self {
            source_x,
            inv_l1,
            inv_l2,
            half_width: 0.5 * geom.slit2_width,
            k,
            alpha,
            scale: 1.0 / root,
            magnitude: root / (geom.slit2_width * de_broglie * geom.l2d).sqrt(),
        })
    }

    pub fn amplitude(&self, x: f64, q: f64) -> Complex64 {
        let beta0 = self.k * (self.source_x * self.inv_l1 + x * self.inv_l2);
        let centre = (beta0 - q) / (2.0 * self.alpha);
        let lo = fresnel_integrals(self.scale * (-self.half_width - centre));
        let hi = fresnel_integrals(self.scale * (self.half_width - centre));
        let phase = (beta0 * q) / (2.0 * self.alpha) - q * q / (4.0 * self.alpha);
        (hi - lo) * Complex64::from_polar(self.magnitude, phase)
    }
}

/// Intensity at `positions` from one source point, summed incoherently over
/// the photon channels. Spectral route: each channel is expanded in
/// `hbar k_L` orders up to `m_max` and the orders are added coherently.
pub fn point_source_pattern(
    source_x: f64,
    channels: &[TransmissionChannel],
    geom: &BeamlineGeometry,
    de_broglie: f64,
    positions: &[f64],
    m_max: usize,
) -> Result<Vec<f64>> {
    check_source(source_x, geom)?;
    let wave = ApertureWave::new(source_x, geom, de_broglie)?;
    let mut intensity = vec![0.0; positions.len()];
    for channel in channels {
        let k_l = 2.0 * std::f64::consts::PI / channel.grid.wavelength;
        let coefficients = fourier_order_amplitudes(channel, m_max)?;
        let orders: Vec<(f64, Complex64)> = coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 1e-12)
            .map(|(i, c)| ((i as f64 - m_max as f64) * k_l, *c))
            .collect();
        for (acc, &x) in intensity.iter_mut().zip(positions) {
            let psi: Complex64 = orders.iter().map(|&(q, c)| c * wave.amplitude(x, q)).sum();
            *acc += psi.norm_sqr();
        }
    }
    Ok(intensity)
}

/// Grating-plane window covering slit 2 plus a margin of four optical
/// periods, rounded up to an even number of periods.
pub fn grating_window(
    laser_wavelength: f64,
    geom: &BeamlineGeometry,
    samples_per_period: usize,
) -> Result<GridSpec> {
    let periods = (geom.slit2_width / laser_wavelength).ceil() as usize + 4;
    GridSpec::new(laser_wavelength, periods + periods % 2, samples_per_period)
}

/// Direct route: the slit field times each sampled channel, propagated by
/// quadrature. Channels must share a grid that covers slit 2 with samples
/// finer than an eighth of the optical period.
pub fn point_source_pattern_direct(
    source_x: f64,
    channels: &[TransmissionChannel],
    geom: &BeamlineGeometry,
    de_broglie: f64,
    positions: &[f64],
) -> Result<Vec<f64>> {
    check_source(source_x, geom)?;
    let mut intensity = vec![0.0; positions.len()];
    let Some(first) = channels.first() else {
        return Ok(intensity);
    };
    let grid = first.grid;
    if channels.iter().any(|c| c.grid != grid) {
        return Err(Error::Grid("channels must share one grid".into()));
    }
    if grid.samples_per_period < 8 {
        return Err(Error::Grid(
            "grating-plane step must be below an eighth of the period".into(),
        ));
    }
    if grid.extent() < geom.slit2_width {
        return Err(Error::Grid("grating window narrower than slit 2".into()));
    }
    let k = 2.0 * std::f64::consts::PI / de_broglie;
    let dx = grid.step();
    let hw = 0.5 * geom.slit2_width;
    let norm = 1.0 / geom.slit2_width.sqrt();
    let slit_field: Vec<Complex64> = grid
        .positions()
        .into_iter()
        .map(|x| {
            let cover = ((x + 0.5 * dx).min(hw) - (x - 0.5 * dx).max(-hw)).max(0.0) / dx;
            let d = x - source_x;
            Complex64::from_polar(norm * cover, 0.5 * k * d * d / geom.l12)
        })
        .collect();
    let x0 = grid.position(0);
    for channel in channels {
        let field: Vec<Complex64> = slit_field
            .iter()
            .zip(&channel.samples)
            .map(|(a, t)| a * t)
            .collect();
        let out = fresnel_propagate(&field, x0, dx, de_broglie, geom.l2d, positions)?;
        for (acc, psi) in intensity.iter_mut().zip(out) {
            *acc += psi.norm_sqr();
        }
    }
    Ok(intensity)
}

fn check_source(source_x: f64, geom: &BeamlineGeometry) -> Result<()> {
    if !(source_x.abs() <= 0.5 * geom.slit1_width * (1.0 + 1e-12)) {
        return Err(Error::domain(
            "source_x",
            source_x,
            "must lie inside slit 1",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamline::farfield_peak_positions;
    use crate::distributions::{detector_kernel, DetectorModel, KernelShape};
    use crate::grating::{channel_transmission, ComplexPhase, GratingBeam};
    use crate::units::{de_broglie_wavelength, MoleculeSpecies};
    use std::f64::consts::PI;

    fn lambda_c60() -> f64 {
        de_broglie_wavelength(&MoleculeSpecies::c60(), 120.0).unwrap()
    }

    fn slit_field(width: f64, dx: f64) -> (Vec<Complex64>, f64) {
        let n = (width / dx).round() as usize;
        let amp = 1.0 / width.sqrt();
        (vec![Complex64::new(amp, 0.0); n], -0.5 * width + 0.5 * dx)
    }

    /// Brute-force oracle: the Fresnel integral of a plane-wave slit by
    /// composite Simpson on a fine grid, no closed forms involved.
    fn slit_oracle(width: f64, lambda: f64, distance: f64, x: f64) -> Complex64 {
        let n = 20_000;
        let h = width / n as f64;
        let lz = lambda * distance;
        let f = |s: f64| Complex64::from_polar(1.0, PI * (x - s).powi(2) / lz);
        let mut acc = f(-0.5 * width) + f(0.5 * width);
        for i in 1..n {
            let s = -0.5 * width + i as f64 * h;
            acc += f(s) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0 / width.sqrt() * Complex64::from_polar(1.0 / lz.sqrt(), -PI / 4.0)
    }

    #[test]
    fn direct_quadrature_matches_simpson_oracle() {
        let lambda = lambda_c60();
        let (field, x0) = slit_field(5e-6, 1e-9);
        let xs: Vec<f64> = (-60..=60).map(|i| i as f64 * 0.25e-6).collect();
        let got = fresnel_propagate(&field, x0, 1e-9, lambda, 1.2, &xs).unwrap();
        let want: Vec<f64> = xs
            .iter()
            .map(|&x| slit_oracle(5e-6, lambda, 1.2, x).norm_sqr())
            .collect();
        let peak = want.iter().cloned().fold(0.0, f64::max);
        let rms = (got
            .iter()
            .zip(&want)
            .map(|(g, w)| (g.norm_sqr() - w).powi(2))
            .sum::<f64>()
            / xs.len() as f64)
            .sqrt();
        assert!(rms / peak < 1e-6, "{}", rms / peak);
    }

    #[test]
    fn closed_form_matches_direct_quadrature() {
        // large slit-1 distance turns the point source into a plane wave
        let mut geom = BeamlineGeometry::paper();
        geom.l12 = 1e12;
        let lambda = lambda_c60();
        let wave = ApertureWave::new(0.0, &geom, lambda).unwrap();
        let (field, x0) = slit_field(5e-6, 1e-9);
        let xs: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.5e-6).collect();
        let direct = fresnel_propagate(&field, x0, 1e-9, lambda, 1.2, &xs).unwrap();
        for (x, d) in xs.iter().zip(&direct) {
            let a = wave.amplitude(*x, 0.0);
            assert!((a.norm_sqr() - d.norm_sqr()).abs() < 1e-6 / 5e-6, "x={x}");
        }
    }

    #[test]
    fn propagation_conserves_norm() {
        let lambda = lambda_c60();
        let (field, x0) = slit_field(5e-6, 1e-9);
        let step = 0.25e-6;
        let xs: Vec<f64> = (-6000..=6000).map(|i| i as f64 * step).collect();
        let out = fresnel_propagate(&field, x0, 1e-9, lambda, 1.2, &xs).unwrap();
        let power: f64 = out.iter().map(|p| p.norm_sqr()).sum::<f64>() * step;
        // the sinc tail beyond +-1.5 mm carries lambda L / (pi^2 a X) ~ 7e-5
        let tail = lambda * 1.2 / (PI * PI * 5e-6 * 1.5e-3);
        assert!(
            (1.0 - power - tail).abs() < 1e-5,
            "power={power} tail={tail}"
        );
    }

    #[test]
    fn aliasing_guard_trips() {
        let lambda = lambda_c60();
        let (field, x0) = slit_field(5e-6, 50e-9);
        assert!(matches!(
            fresnel_propagate(&field, x0, 50e-9, lambda, 1.2, &[200e-6]),
            Err(Error::Aliasing { .. })
        ));
        assert!(fresnel_propagate(&field, x0, 50e-9, lambda, 1.2, &[20e-6]).is_ok());
        assert!(fresnel_propagate(&field, x0, 50e-9, lambda, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn closed_form_is_unitary_for_point_sources() {
        let geom = BeamlineGeometry::paper();
        let step = 0.25e-6;
        let xs: Vec<f64> = (-8000..=8000).map(|i| i as f64 * step).collect();
        for source in [0.0, 2.1e-6, -3.5e-6] {
            let wave = ApertureWave::new(source, &geom, lambda_c60()).unwrap();
            let p: f64 = xs
                .iter()
                .map(|&x| wave.amplitude(x, 0.0).norm_sqr())
                .sum::<f64>()
                * step;
            assert!((1.0 - p) < 1e-4 && p <= 1.0 + 1e-9, "source={source} p={p}");
        }
    }

    fn pure_phase_channels(phi: f64, grid: &GridSpec) -> Vec<TransmissionChannel> {
        vec![channel_transmission(ComplexPhase::new(phi, 0.0), 0, grid)]
    }

    #[test]
    fn grating_orders_land_on_farfield_positions() {
        let geom = BeamlineGeometry::paper();
        let beam = GratingBeam::argon_green(1.0);
        let grid = GridSpec::one_period(beam.wavelength, 1024).unwrap();
        // Phi at the J_0 zero: the first orders dominate
        let channels = pure_phase_channels(2.40483, &grid);
        let step = 0.25e-6;
        let xs: Vec<f64> = (-200..=400).map(|i| i as f64 * step).collect();
        let intensity = point_source_pattern(0.0, &channels, &geom, lambda_c60(), &xs, 20).unwrap();
        // each order is a near-field slit image with a shallow central dip;
        // its maximum is located through the 6 um detector response
        let model = DetectorModel::new(6e-6, 2e-6, KernelShape::Gaussian).unwrap();
        let kernel = detector_kernel(&model, step).unwrap();
        let half = kernel.len() / 2;
        let blurred: Vec<(f64, f64)> = (half..xs.len() - half)
            .map(|i| {
                (
                    xs[i],
                    kernel
                        .iter()
                        .enumerate()
                        .map(|(k, w)| w * intensity[i + k - half])
                        .sum(),
                )
            })
            .filter(|(x, _)| *x > 5e-6)
            .collect();
        let peak = blurred.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0;
        let expect =
            farfield_peak_positions(&MoleculeSpecies::c60(), 120.0, &beam, &geom, 1).unwrap()[2];
        assert!((peak - expect).abs() <= step * 1.01, "{peak} vs {expect}");
    }

    #[test]
    fn spectral_and_direct_routes_agree() {
        let geom = BeamlineGeometry::paper();
        let beam = GratingBeam::argon_green(1.0);
        let grid = grating_window(beam.wavelength, &geom, 512).unwrap();
        let phi = ComplexPhase::new(1.9, 0.3);
        let channels: Vec<_> = (0..6)
            .map(|n| channel_transmission(phi, n, &grid))
            .collect();
        let xs: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.5e-6).collect();
        let spectral =
            point_source_pattern(1.5e-6, &channels, &geom, lambda_c60(), &xs, 20).unwrap();
        let direct =
            point_source_pattern_direct(1.5e-6, &channels, &geom, lambda_c60(), &xs).unwrap();
        let peak = direct.iter().cloned().fold(0.0, f64::max);
        let rms = (spectral
            .iter()
            .zip(&direct)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / xs.len() as f64)
            .sqrt();
        assert!(rms / peak < 1e-4, "{}", rms / peak);
    }

    #[test]
    fn laser_off_is_single_slit_and_even() {
        let geom = BeamlineGeometry::paper();
        let grid = GridSpec::one_period(514.5e-9, 64).unwrap();
        let channels = pure_phase_channels(0.0, &grid);
        let xs: Vec<f64> = (-100..=100).map(|i| i as f64 * 0.3e-6).collect();
        let got = point_source_pattern(0.0, &channels, &geom, lambda_c60(), &xs, 4).unwrap();
        let wave = ApertureWave::new(0.0, &geom, lambda_c60()).unwrap();
        for (i, (&x, g)) in xs.iter().zip(&got).enumerate() {
            assert!(*g >= 0.0);
            assert!((g - wave.amplitude(x, 0.0).norm_sqr()).abs() < 1e-9 * g.max(1.0));
            let mirror = got[xs.len() - 1 - i];
            assert!((g - mirror).abs() <= 1e-9 * g.max(mirror));
        }
        assert!(point_source_pattern(4e-6, &channels, &geom, lambda_c60(), &xs, 4).is_err());
    }
}
