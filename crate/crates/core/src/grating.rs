//! Standing-light-wave grating: complex phase, absorption statistics and
//! the per-channel transmission functions.
//!
//! The standing wave has its intensity antinode at `x = 0`, so every
//! transmission function is even in `x` and periodic in the optical
//! wavelength.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{polarizability_si, MoleculeSpecies, C, EPS0, HBAR};

/// Samples per optical period used unless configured otherwise.
pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 1024;
/// Hard cap on the number of absorbed-photon channels kept.
pub const MAX_PHOTON_CHANNELS: usize = 24;
pub const DEFAULT_TAIL_EPS: f64 = 1e-10;
/// Above this displacement-to-period ratio the thin-grating model is suspect.
pub const RAMAN_NATH_WARN_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GratingBeam {
    /// Laser wavelength in m.
    pub wavelength: f64,
    /// Power of each of the two counter-propagating running waves, W.
    pub power_per_wave: f64,
    /// Vertical 1/e^2 radius, m.
    pub waist_y: f64,
    /// 1/e^2 radius along the molecular beam, m.
    pub waist_z: f64,
}

impl GratingBeam {
    pub fn new(wavelength: f64, power_per_wave: f64, waist_y: f64, waist_z: f64) -> Result<Self> {
        for (what, v) in [
            ("wavelength", wavelength),
            ("waist_y", waist_y),
            ("waist_z", waist_z),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(what, v, "must be positive"));
            }
        }
        if !(power_per_wave >= 0.0) || !power_per_wave.is_finite() {
            return Err(Error::domain(
                "power_per_wave",
                power_per_wave,
                "must be nonnegative",
            ));
        }
        Ok(Self {
            wavelength,
            power_per_wave,
            waist_y,
            waist_z,
        })
    }

    /// The 514.5 nm setup: 50 um x 1.3 mm focus.
    pub fn argon_green(power_per_wave: f64) -> Self {
        Self {
            wavelength: 514.5e-9,
            power_per_wave,
            waist_y: 1.3e-3,
            waist_z: 50e-6,
        }
    }

    pub fn with_power(mut self, power_per_wave: f64) -> Self {
        self.power_per_wave = power_per_wave;
        self
    }

    pub fn k_l(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    /// Intensity period of the standing wave.
    pub fn period(&self) -> f64 {
        self.wavelength / 2.0
    }

    pub fn omega(&self) -> f64 {
        C * self.k_l()
    }
}

/// Complex grating phase. The real part is the mean dipole phase, twice the
/// imaginary part is the mean number of absorbed photons.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexPhase {
    pub re: f64,
    pub im: f64,
}

impl ComplexPhase {
    pub const ZERO: ComplexPhase = ComplexPhase { re: 0.0, im: 0.0 };

    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn scaled(self, factor: f64) -> Self {
        Self {
            re: self.re * factor,
            im: self.im * factor,
        }
    }

    pub fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }

    /// Photons absorbed on average over one grating period.
    pub fn mean_photon_number(self) -> f64 {
        2.0 * self.im
    }

    /// Photon number at the intensity antinode.
    pub fn peak_photon_number(self) -> f64 {
        4.0 * self.im
    }
}

/// `Phi = sqrt(2/pi) P0 alpha / (w_y v hbar c eps0)` for passage through the
/// centre of the elliptical focus.
pub fn compute_phi(species: &MoleculeSpecies, beam: &GratingBeam, v: f64) -> Result<ComplexPhase> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain("velocity", v, "must be positive"));
    }
    if !(beam.waist_y > 0.0) {
        return Err(Error::domain("waist_y", beam.waist_y, "must be positive"));
    }
    let alpha = polarizability_si(species.polarizability);
    let pre = (2.0 / std::f64::consts::PI).sqrt() * beam.power_per_wave
        / (beam.waist_y * v * HBAR * C * EPS0);
    Ok(ComplexPhase::new(pre * alpha.re, pre * alpha.im))
}

/// Running-wave power that puts `Re(Phi)` at `target` for the given velocity.
pub fn power_for_phase(
    species: &MoleculeSpecies,
    beam: &GratingBeam,
    v: f64,
    target: f64,
) -> Result<f64> {
    let unit = compute_phi(species, &beam.with_power(1.0), v)?;
    if unit.re == 0.0 {
        return Err(Error::domain(
            "real polarizability",
            0.0,
            "phase cannot be reached",
        ));
    }
    Ok(target / unit.re)
}

/// `nbar(x) = 4 Im(Phi) cos^2(k_L x)`.
pub fn mean_photon_number(phi: ComplexPhase, x: f64, k_l: f64) -> f64 {
    let c = (k_l * x).cos();
    phi.peak_photon_number() * c * c
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Poisson probability of exactly `n` events at mean `nbar`.
pub fn poisson_weight(nbar: f64, n: usize) -> f64 {
    debug_assert!(nbar >= 0.0);
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * nbar.ln() - nbar - ln_factorial(n)).exp()
}

/// Regular sampling of whole optical periods. Sample `j` sits at
/// `(j - N/2) * dx`, so `x = 0` (an antinode) is always on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub wavelength: f64,
    pub periods: usize,
    pub samples_per_period: usize,
}

impl GridSpec {
    pub fn new(wavelength: f64, periods: usize, samples_per_period: usize) -> Result<Self> {
        if !(wavelength > 0.0) {
            return Err(Error::domain("wavelength", wavelength, "must be positive"));
        }
        if periods == 0 {
            return Err(Error::Grid("window must span at least one period".into()));
        }
        if samples_per_period < 4 || !samples_per_period.is_multiple_of(2) {
            return Err(Error::Grid(format!(
                "samples per period must be even and at least 4, got {samples_per_period}"
            )));
        }
        Ok(Self {
            wavelength,
            periods,
            samples_per_period,
        })
    }

    /// Builds a grid from a window extent and total sample count, rejecting
    /// windows that do not hold a whole number of periods.
    pub fn from_extent(wavelength: f64, extent: f64, samples: usize) -> Result<Self> {
        let p = extent / wavelength;
        let periods = p.round();
        if periods < 1.0 || (p - periods).abs() > 1e-9 * p.max(1.0) {
            return Err(Error::Grid(format!(
                "window of {extent:e} m is {p} periods, not an integer"
            )));
        }
        let periods = periods as usize;
        if !samples.is_multiple_of(periods) {
            return Err(Error::Grid(format!(
                "{samples} samples do not divide evenly over {periods} periods"
            )));
        }
        Self::new(wavelength, periods, samples / periods)
    }

    pub fn one_period(wavelength: f64, samples_per_period: usize) -> Result<Self> {
        Self::new(wavelength, 1, samples_per_period)
    }

    pub fn len(&self) -> usize {
        self.periods * self.samples_per_period
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> f64 {
        self.wavelength / self.samples_per_period as f64
    }

    pub fn extent(&self) -> f64 {
        self.wavelength * self.periods as f64
    }

    pub fn position(&self, j: usize) -> f64 {
        (j as f64 - (self.len() / 2) as f64) * self.step()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.position(j)).collect()
    }

    /// `cos(k_L x_j)` from a one-period table, so values repeat bit for bit
    /// from period to period and are mirror symmetric about `x = 0`.
    pub(crate) fn cosines(&self) -> Vec<f64> {
        let spp = self.samples_per_period as i64;
        let table: Vec<f64> = (0..spp)
            .map(|r| {
                let folded = if r <= spp / 2 { r } else { spp - r };
                (2.0 * std::f64::consts::PI * folded as f64 / spp as f64).cos()
            })
            .collect();
        let half = (self.len() / 2) as i64;
        (0..self.len() as i64)
            .map(|j| table[(j - half).rem_euclid(spp) as usize])
            .collect()
    }
}

/// Transmission function for molecules that absorbed exactly `n` photons.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionChannel {
    pub photon_count: usize,
    pub samples: Vec<Complex64>,
    pub grid: GridSpec,
}

/// `t_n(x) = exp(2i Re(Phi) cos^2) sqrt(p_nbar(x)(n)) sign(cos)^n`.
///
/// The last factor is the phase of the standing-wave field, which every
/// absorbed photon imprints on the molecule.
pub fn channel_transmission(phi: ComplexPhase, n: usize, grid: &GridSpec) -> TransmissionChannel {
    let samples = grid
        .cosines()
        .into_iter()
        .map(|c| channel_value(phi, n, c))
        .collect();
    TransmissionChannel {
        photon_count: n,
        samples,
        grid: *grid,
    }
}

fn channel_value(phi: ComplexPhase, n: usize, cos_kx: f64) -> Complex64 {
    let c2 = cos_kx * cos_kx;
    let nbar = phi.peak_photon_number() * c2;
    let amplitude = poisson_weight(nbar, n).sqrt();
    let sign = if n % 2 == 1 && cos_kx < 0.0 {
        -1.0
    } else {
        1.0
    };
    Complex64::from_polar(sign * amplitude, 2.0 * phi.re * c2)
}

/// Smallest `N` whose Poisson tail beyond `N` at the antinode is below
/// `tail_eps`, capped at [`MAX_PHOTON_CHANNELS`].
pub fn truncation_order(phi: ComplexPhase, tail_eps: f64) -> usize {
    let nbar = phi.peak_photon_number();
    if nbar <= 0.0 {
        return 0;
    }
    (0..MAX_PHOTON_CHANNELS)
        .find(|&n| poisson_tail(nbar, n) < tail_eps)
        .unwrap_or(MAX_PHOTON_CHANNELS)
}

/// `P(k > n)` summed forward so small tails keep full relative precision.
fn poisson_tail(nbar: f64, n: usize) -> f64 {
    let mut total = 0.0;
    let mut k = n + 1;
    loop {
        let p = poisson_weight(nbar, k);
        total += p;
        if k as f64 > nbar && p < 1e-20 * total.max(f64::MIN_POSITIVE) {
            return total;
        }
        k += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanNath {
    /// Transverse displacement accumulated inside the light field, m.
    pub displacement: f64,
    /// Displacement in units of the grating period.
    pub ratio: f64,
    pub warning: bool,
}

/// Checks the thin-grating assumption: the transverse walk-off during the
/// transit `2 w_z / v`, driven by a momentum kick `2 hbar k_L max(1, |Phi|)`,
/// must stay well below one grating period.
pub fn raman_nath_diagnostic(
    species: &MoleculeSpecies,
    beam: &GratingBeam,
    v: f64,
    phi: ComplexPhase,
) -> Result<RamanNath> {
    if !(v > 0.0) {
        return Err(Error::domain("velocity", v, "must be positive"));
    }
    let kick = 2.0 * HBAR * beam.k_l() * phi.abs().max(1.0);
    let transit = 2.0 * beam.waist_z / v;
    let displacement = kick * transit / (2.0 * species.mass_kg());
    let ratio = displacement / beam.period();
    Ok(RamanNath {
        displacement,
        ratio,
        warning: ratio > RAMAN_NATH_WARN_RATIO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c60_phi(power: f64, v: f64) -> ComplexPhase {
        compute_phi(&MoleculeSpecies::c60(), &GratingBeam::argon_green(power), v).unwrap()
    }

    #[test]
    fn phi_values() {
        let p = c60_phi(1.0, 120.0);
        assert!((p.re - 0.205).abs() < 5e-4, "{p:?}");
        assert!((p.im - 0.0163).abs() < 5e-5, "{p:?}");
        assert_eq!(c60_phi(0.0, 120.0), ComplexPhase::ZERO);
        let c70 = compute_phi(
            &MoleculeSpecies::c70(),
            &GratingBeam::argon_green(9.5),
            120.0,
        )
        .unwrap();
        assert!((c70.re - 2.28).abs() < 5e-3, "{c70:?}");
        assert!((c70.im - 0.386).abs() < 1e-3, "{c70:?}");
    }

    #[test]
    fn phi_rejects_bad_inputs() {
        let s = MoleculeSpecies::c60();
        assert!(compute_phi(&s, &GratingBeam::argon_green(1.0), 0.0).is_err());
        let mut beam = GratingBeam::argon_green(1.0);
        beam.waist_y = 0.0;
        assert!(compute_phi(&s, &beam, 100.0).is_err());
        assert!(GratingBeam::new(514.5e-9, -1.0, 1e-3, 5e-5).is_err());
    }

    #[test]
    fn photon_number_profile() {
        let phi = ComplexPhase::new(1.0, 0.3);
        let k = GratingBeam::argon_green(1.0).k_l();
        assert!((mean_photon_number(phi, 0.0, k) - 1.2).abs() < 1e-15);
        assert!(mean_photon_number(phi, std::f64::consts::FRAC_PI_2 / k, k) < 1e-30);
        let n = 4096;
        let avg: f64 = (0..n)
            .map(|j| mean_photon_number(phi, (j as f64 + 0.5) / n as f64 * 514.5e-9, k))
            .sum::<f64>()
            / n as f64;
        assert!((avg - 2.0 * phi.im).abs() < 1e-12);
    }

    #[test]
    fn poisson() {
        assert_eq!(poisson_weight(0.0, 0), 1.0);
        assert_eq!(poisson_weight(0.0, 2), 0.0);
        assert!((poisson_weight(0.618, 2) - 0.103).abs() < 5e-4);
        for nbar in [0.01, 0.7, 3.0, 11.0] {
            let s: f64 = (0..80).map(|n| poisson_weight(nbar, n)).sum();
            assert!((s - 1.0).abs() < 1e-13, "{nbar} {s}");
        }
    }

    #[test]
    fn grid_validation() {
        let l = 514.5e-9;
        assert!(GridSpec::from_extent(l, 4.0 * l, 4096).is_ok());
        assert!(GridSpec::from_extent(l, 3.5 * l, 4096).is_err());
        assert!(GridSpec::from_extent(l, 3.0 * l, 4096).is_err());
        assert!(GridSpec::new(l, 2, 7).is_err());
        let g = GridSpec::new(l, 2, 8).unwrap();
        assert_eq!(g.position(8), 0.0);
        assert_eq!(g.len(), 16);
    }

    #[test]
    fn antinode_value() {
        let grid = GridSpec::one_period(514.5e-9, 1024).unwrap();
        let t = channel_transmission(ComplexPhase::new(0.205, 0.0163), 0, &grid);
        let centre = t.samples[grid.len() / 2];
        assert!((centre.norm() - (-0.0326_f64).exp()).abs() < 1e-12);
        assert!((centre.norm() - 0.968).abs() < 5e-4);
        assert!((centre.arg() - 0.410).abs() < 1e-12);
    }

    #[test]
    fn pure_phase_limit() {
        let grid = GridSpec::new(514.5e-9, 2, 256).unwrap();
        let phi = ComplexPhase::new(1.7, 0.0);
        let t0 = channel_transmission(phi, 0, &grid);
        let cos = grid.cosines();
        for (t, c) in t0.samples.iter().zip(&cos) {
            assert!((t.norm() - 1.0).abs() < 1e-15);
            assert!((t - Complex64::from_polar(1.0, 2.0 * 1.7 * c * c)).norm() < 1e-12);
        }
        for n in 1..4 {
            assert!(channel_transmission(phi, n, &grid)
                .samples
                .iter()
                .all(|t| t.norm() == 0.0));
        }
    }

    #[test]
    fn single_photon_channel_vanishes_at_node() {
        let grid = GridSpec::one_period(514.5e-9, 1024).unwrap();
        let t = channel_transmission(ComplexPhase::new(2.0, 0.4), 1, &grid);
        // k_L x = pi/2 is sample N/2 + N/4
        assert!(t.samples[512 + 256].norm() < 1e-7);
        assert!(t.samples[512 - 256].norm() < 1e-7);
    }

    #[test]
    fn truncation() {
        assert_eq!(truncation_order(ComplexPhase::new(3.0, 0.0), 1e-8), 0);
        let c70 = compute_phi(
            &MoleculeSpecies::c70(),
            &GratingBeam::argon_green(9.5),
            120.0,
        )
        .unwrap();
        // cumulative brute force at the antinode
        let nbar = 4.0 * c70.im;
        let mut cumulative = 0.0;
        let mut expect = 0;
        for n in 0..=MAX_PHOTON_CHANNELS {
            cumulative +=
                (-nbar).exp() * nbar.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
            if 1.0 - cumulative < 1e-8 {
                expect = n;
                break;
            }
        }
        assert_eq!(expect, 13);
        assert_eq!(truncation_order(c70, 1e-8), expect);
        assert_eq!(
            truncation_order(ComplexPhase::new(0.0, 10.0), 1e-10),
            MAX_PHOTON_CHANNELS
        );
        let mut last = 0;
        for i in 0..200 {
            let n = truncation_order(ComplexPhase::new(1.0, i as f64 * 0.01), 1e-8);
            assert!(n >= last);
            last = n;
        }
    }

    #[test]
    fn raman_nath() {
        let s = MoleculeSpecies::c60();
        let beam = GratingBeam::argon_green(9.5);
        let d = raman_nath_diagnostic(&s, &beam, 120.0, ComplexPhase::new(2.0, 0.0)).unwrap();
        assert!((d.displacement - 1.8e-9).abs() < 0.05e-9, "{d:?}");
        assert!((d.ratio - 0.007).abs() < 5e-4, "{d:?}");
        assert!(!d.warning);
        // |Phi| > 1 and Phi ~ 1/v at fixed power gives 1/v^2
        let r = |v: f64| {
            let phi = compute_phi(&s, &beam, v).unwrap();
            raman_nath_diagnostic(&s, &beam, v, phi).unwrap().ratio
        };
        assert!((r(60.0) / r(120.0) - 4.0).abs() < 1e-12);
        assert!(r(1e9) < 1e-6 * r(120.0));
    }

    fn dense_grid() -> GridSpec {
        GridSpec::new(514.5e-9, 2, 128).unwrap()
    }

    proptest! {
        #[test]
        fn channels_conserve_probability(re in 0.0..5.0f64, im in 0.0..1.0f64) {
            let phi = ComplexPhase::new(re, im);
            let n_max = truncation_order(phi, DEFAULT_TAIL_EPS);
            let grid = dense_grid();
            let mut total = vec![0.0; grid.len()];
            for n in 0..=n_max {
                for (acc, t) in total.iter_mut().zip(channel_transmission(phi, n, &grid).samples) {
                    *acc += t.norm_sqr();
                }
            }
            for s in total {
                prop_assert!((1.0 - s).abs() < DEFAULT_TAIL_EPS + 1e-12);
            }
        }

        #[test]
        fn channels_are_periodic_and_even(re in 0.0..5.0f64, im in 0.0..1.0f64, n in 0usize..5) {
            let grid = dense_grid();
            let spp = grid.samples_per_period;
            let t = channel_transmission(ComplexPhase::new(re, im), n, &grid).samples;
            let len = t.len();
            for j in 0..spp {
                prop_assert_eq!(t[j], t[j + spp]);
                if n % 2 == 0 {
                    prop_assert!((t[j] - t[j + spp / 2]).norm() < 1e-14);
                }
                // x_j and x_{N-j} mirror about 0
                let mirror = (len - j) % len;
                prop_assert_eq!(t[j], t[mirror]);
            }
        }
    }
}
