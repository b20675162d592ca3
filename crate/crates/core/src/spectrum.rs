//! Diffraction-order spectra of the grating.
//!
//! Order index `m` counts momentum in units of `hbar k_L`; the coherent dipole
//! grating alone fills only even slots, absorbed photons add odd ones.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::distributions::QuadratureRule;
use crate::error::{Error, Result};
use crate::grating::{
    channel_transmission, poisson_weight, truncation_order, ComplexPhase, GridSpec,
    TransmissionChannel, DEFAULT_SAMPLES_PER_PERIOD,
};
pub use crate::special::bessel_j;

pub const DEFAULT_M_MAX: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSpectrum {
    pub m_max: usize,
    /// `intensities[m + m_max]` is the probability of a kick of `m hbar k_L`.
    pub intensities: Vec<f64>,
    /// Same layout, one row per absorbed photon number.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_channel: Option<Vec<Vec<f64>>>,
}

impl OrderSpectrum {
    fn zeros(m_max: usize) -> Self {
        Self {
            m_max,
            intensities: vec![0.0; 2 * m_max + 1],
            per_channel: None,
        }
    }

    pub fn orders(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        let m_max = self.m_max as i32;
        self.intensities
            .iter()
            .enumerate()
            .map(move |(i, &v)| (i as i32 - m_max, v))
    }

    pub fn intensity(&self, m: i32) -> f64 {
        let idx = m + self.m_max as i32;
        if idx < 0 {
            return 0.0;
        }
        self.intensities.get(idx as usize).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.intensities.iter().sum()
    }

    /// Weight in odd momentum slots.
    pub fn odd_total(&self) -> f64 {
        self.orders()
            .filter(|(m, _)| m % 2 != 0)
            .map(|(_, v)| v)
            .sum()
    }
}

/// `I_{2j} = J_j(Phi)^2`, odd slots empty.
pub fn pure_phase_orders(phi_re: f64, m_max: usize) -> Result<OrderSpectrum> {
    let mut spectrum = OrderSpectrum::zeros(m_max);
    for j in 0..=(m_max / 2) {
        let weight = bessel_j(j as u32, phi_re)?.powi(2);
        spectrum.intensities[m_max + 2 * j] = weight;
        spectrum.intensities[m_max - 2 * j] = weight;
    }
    Ok(spectrum)
}

/// `c_m = (1/L) int t(x) exp(-i m k_L x) dx` over the channel's window, for
/// `|m| <= m_max`, returned at index `m + m_max`.
///
/// The window holds whole optical periods and the integrand is periodic, so
/// the rectangle rule converges spectrally.
pub fn fourier_order_amplitudes(
    channel: &TransmissionChannel,
    m_max: usize,
) -> Result<Vec<Complex64>> {
    let grid = &channel.grid;
    if channel.samples.len() != grid.len() {
        return Err(Error::Grid(format!(
            "channel has {} samples for a grid of {}",
            channel.samples.len(),
            grid.len()
        )));
    }
    let spp = grid.samples_per_period as i64;
    let twiddle: Vec<Complex64> = (0..spp)
        .map(|r| Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * r as f64 / spp as f64))
        .collect();
    let half = (grid.len() / 2) as i64;
    let norm = 1.0 / grid.len() as f64;
    let m_max = m_max as i64;
    Ok((-m_max..=m_max)
        .map(|m| {
            channel
                .samples
                .iter()
                .enumerate()
                .map(|(j, t)| t * twiddle[(m * (j as i64 - half)).rem_euclid(spp) as usize])
                .sum::<Complex64>()
                * norm
        })
        .collect())
}

/// Per-channel Fourier amplitudes for photon numbers `0..=n_max`.
pub fn channel_amplitudes(
    phi: ComplexPhase,
    n_max: usize,
    m_max: usize,
    grid: &GridSpec,
) -> Result<Vec<Vec<Complex64>>> {
    (0..=n_max)
        .map(|n| fourier_order_amplitudes(&channel_transmission(phi, n, grid), m_max))
        .collect()
}

/// Incoherent sum of `|c_m^(n)|^2` over photon channels up to the
/// truncation order.
pub fn incoherent_order_intensities(
    phi: ComplexPhase,
    m_max: usize,
    tail_eps: f64,
) -> Result<OrderSpectrum> {
    // intensities depend only on k_L x, so any wavelength will do
    let grid = GridSpec::one_period(1.0, DEFAULT_SAMPLES_PER_PERIOD)?;
    incoherent_order_intensities_on(phi, m_max, tail_eps, &grid)
}

pub fn incoherent_order_intensities_on(
    phi: ComplexPhase,
    m_max: usize,
    tail_eps: f64,
    grid: &GridSpec,
) -> Result<OrderSpectrum> {
    let n_max = truncation_order(phi, tail_eps);
    let per_channel: Vec<Vec<f64>> = channel_amplitudes(phi, n_max, m_max, grid)?
        .into_iter()
        .map(|c| c.into_iter().map(|a| a.norm_sqr()).collect())
        .collect();
    let mut spectrum = OrderSpectrum::zeros(m_max);
    for row in &per_channel {
        for (acc, v) in spectrum.intensities.iter_mut().zip(row) {
            *acc += v;
        }
    }
    spectrum.per_channel = Some(per_channel);
    Ok(spectrum)
}

/// First zero of `J_0`, bracketed in `[2, 3]` and bisected.
pub fn zero_order_null() -> f64 {
    let j0 = |x: f64| bessel_j(0, x).expect("bracket lies inside the Bessel domain");
    let (mut lo, mut hi) = (2.0_f64, 3.0_f64);
    let f_lo = j0(lo);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let f_mid = j0(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fraction of molecules absorbing exactly `n` photons: the Poisson
/// weight at `nbar(x)` averaged over one period in `x` and over the vertical
/// phase-scale rule. Pass [`QuadratureRule::single`]`(1.0)` for no vertical
/// averaging.
pub fn absorbed_fraction(phi: ComplexPhase, n: usize, vertical: &QuadratureRule) -> f64 {
    let grid = GridSpec::one_period(1.0, DEFAULT_SAMPLES_PER_PERIOD).expect("valid default grid");
    let cos2: Vec<f64> = grid.cosines().into_iter().map(|c| c * c).collect();
    vertical
        .iter()
        .map(|(scale, weight)| {
            let peak = phi.scaled(scale).peak_photon_number();
            let avg = cos2
                .iter()
                .map(|c2| poisson_weight(peak * c2, n))
                .sum::<f64>()
                / cos2.len() as f64;
            weight * avg
        })
        .sum()
}
