use serde::{Deserialize, Serialize};

use super::DiffractionPattern;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMetrics {
    pub spacing: f64,
    /// `(j, efficiency)` for the window centred on `j * spacing`.
    pub efficiencies: Vec<(i64, f64)>,
    pub visibility: f64,
}

impl PatternMetrics {
    pub fn efficiency(&self, j: i64) -> f64 {
        self.efficiencies
            .iter()
            .find(|(k, _)| *k == j)
            .map(|(_, e)| *e)
            .unwrap_or(0.0)
    }
}

/// Integral of the piecewise-linear interpolant from the first sample to `x`.
struct Cumulative<'a> {
    positions: &'a [f64],
    values: &'a [f64],
    prefix: Vec<f64>,
}

impl<'a> Cumulative<'a> {
    fn new(positions: &'a [f64], values: &'a [f64]) -> Self {
        let mut prefix = Vec::with_capacity(positions.len());
        let mut acc = 0.0;
        prefix.push(0.0);
        for k in 1..positions.len() {
            acc += 0.5 * (values[k] + values[k - 1]) * (positions[k] - positions[k - 1]);
            prefix.push(acc);
        }
        Self {
            positions,
            values,
            prefix,
        }
    }

    fn total(&self) -> f64 {
        *self.prefix.last().unwrap_or(&0.0)
    }

    fn at(&self, x: f64) -> f64 {
        let p = self.positions;
        if x <= p[0] {
            return 0.0;
        }
        if x >= p[p.len() - 1] {
            return self.total();
        }
        let k = p.partition_point(|&q| q <= x) - 1;
        let t = (x - p[k]) / (p[k + 1] - p[k]);
        let vx = self.values[k] + t * (self.values[k + 1] - self.values[k]);
        self.prefix[k] + 0.5 * (self.values[k] + vx) * (x - p[k])
    }
}

/// Order efficiencies from windows of width `spacing` centred on multiples
/// of `spacing`, and the visibility within one spacing of the centre.
pub fn pattern_metrics(p: &DiffractionPattern, spacing: f64) -> Result<PatternMetrics> {
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::domain("spacing", spacing, "must be positive"));
    }
    if spacing < p.metadata.detector_width {
        return Err(Error::Pattern(format!(
            "windows of {spacing:e} m overlap through the {:e} m detector response",
            p.metadata.detector_width
        )));
    }
    if p.positions.len() < 2 || p.positions.len() != p.intensity.len() {
        return Err(Error::Pattern("pattern needs at least two samples".into()));
    }
    let cum = Cumulative::new(&p.positions, &p.intensity);
    let total = cum.total();
    if !(total > 0.0) {
        return Err(Error::Pattern("pattern carries no intensity".into()));
    }
    let lo = p.positions[0];
    let hi = p.positions[p.positions.len() - 1];
    let j_lo = (lo / spacing).ceil() as i64;
    let j_hi = (hi / spacing).floor() as i64;
    let efficiencies = (j_lo..=j_hi)
        .map(|j| {
            let c = j as f64 * spacing;
            (
                j,
                (cum.at(c + 0.5 * spacing) - cum.at(c - 0.5 * spacing)) / total,
            )
        })
        .collect();

    let central: Vec<f64> = p
        .positions
        .iter()
        .zip(&p.intensity)
        .filter(|(x, _)| x.abs() <= spacing * (1.0 + 1e-12))
        .map(|(_, v)| *v)
        .collect();
    let max = central.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = central.iter().cloned().fold(f64::INFINITY, f64::min);
    let visibility = if max + min > 0.0 {
        (max - min) / (max + min)
    } else {
        0.0
    };
    Ok(PatternMetrics {
        spacing,
        efficiencies,
        visibility,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternComparison {
    /// Displacement of `b` relative to `a`: `b(x) ~ a(x - shift)`.
    pub shift: f64,
    /// RMS difference of the peak-normalized, aligned overlap.
    pub nrmse: f64,
}

pub fn compare_patterns(
    a: &DiffractionPattern,
    b: &DiffractionPattern,
) -> Result<PatternComparison> {
    compare_samples(&a.positions, &a.intensity, &b.positions, &b.intensity)
}

fn uniform_step(positions: &[f64]) -> Result<f64> {
    if positions.len() < 2 {
        return Err(Error::Pattern(
            "pattern is empty or has a single sample".into(),
        ));
    }
    let step = positions[1] - positions[0];
    let span = positions[positions.len() - 1] - positions[0];
    let expected = step * (positions.len() - 1) as f64;
    if !(step > 0.0) || (span - expected).abs() > 1e-6 * step {
        return Err(Error::Pattern(
            "positions are not on a uniform ascending grid".into(),
        ));
    }
    Ok(step)
}

/// [`compare_patterns`] on raw sample arrays.
pub fn compare_samples(
    pos_a: &[f64],
    a: &[f64],
    pos_b: &[f64],
    b: &[f64],
) -> Result<PatternComparison> {
    if pos_a.len() != a.len() || pos_b.len() != b.len() {
        return Err(Error::Pattern(
            "positions and intensities differ in length".into(),
        ));
    }
    let step = uniform_step(pos_a)?;
    let step_b = uniform_step(pos_b)?;
    if (step - step_b).abs() > 1e-9 * step {
        return Err(Error::Pattern(format!(
            "grid steps differ: {step:e} m vs {step_b:e} m"
        )));
    }
    let origin = (pos_b[0] - pos_a[0]) / step;
    let offset = origin.round();
    if (origin - offset).abs() > 1e-6 {
        return Err(Error::Pattern(
            "grids are not aligned to a common lattice".into(),
        ));
    }
    let offset = offset as i64;
    let peak = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let (pa, pb) = (peak(a), peak(b));
    if !(pa > 0.0) || !(pb > 0.0) {
        return Err(Error::Pattern("pattern has no positive intensity".into()));
    }
    let na: Vec<f64> = a.iter().map(|v| v / pa).collect();
    let nb: Vec<f64> = b.iter().map(|v| v / pb).collect();

    // b[i] is compared with a[i + offset - lag]
    let (len_a, len_b) = (na.len() as i64, nb.len() as i64);
    let overlap = |lag: i64| {
        (0..len_b).filter_map(move |i| {
            let j = i + offset - lag;
            (0..len_a).contains(&j).then_some((j as usize, i as usize))
        })
    };
    let reach = (na.len().min(nb.len()) / 2) as i64;
    let mut best = (f64::NEG_INFINITY, 0i64);
    for lag in -reach..=reach {
        let score: f64 = overlap(lag).map(|(j, i)| na[j] * nb[i]).sum();
        // ties resolve to the smallest |lag|
        if score > best.0 || (score == best.0 && lag.abs() < best.1.abs()) {
            best = (score, lag);
        }
    }
    let lag = best.1;
    let (sum, count) = overlap(lag).fold((0.0, 0usize), |(s, c), (j, i)| {
        (s + (na[j] - nb[i]).powi(2), c + 1)
    });
    if count == 0 {
        return Err(Error::Pattern("patterns do not overlap".into()));
    }
    Ok(PatternComparison {
        shift: lag as f64 * step,
        nrmse: (sum / count as f64).sqrt(),
    })
}

/// Least-squares weights `w` minimizing `|pattern - sum_k w_k components[k]|`,
/// by a modified Gram-Schmidt QR factorization.
pub fn fit_order_weights(pattern: &[f64], components: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = pattern.len();
    let k = components.len();
    if k == 0 || components.iter().any(|c| c.len() != n) {
        return Err(Error::Pattern(
            "components must be nonempty and match the pattern length".into(),
        ));
    }
    let mut q: Vec<Vec<f64>> = components.to_vec();
    let mut r = vec![vec![0.0; k]; k];
    for j in 0..k {
        for i in 0..j {
            let d: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
            r[i][j] = d;
            let qi = q[i].clone();
            for (x, y) in q[j].iter_mut().zip(&qi) {
                *x -= d * y;
            }
        }
        let norm = q[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        let scale = components[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(norm > 1e-10 * scale) {
            return Err(Error::Numerical(format!(
                "component {j} is linearly dependent on the others"
            )));
        }
        r[j][j] = norm;
        for x in &mut q[j] {
            *x /= norm;
        }
    }
    let rhs: Vec<f64> = q
        .iter()
        .map(|qi| qi.iter().zip(pattern).map(|(a, b)| a * b).sum())
        .collect();
    let mut w = vec![0.0; k];
    for j in (0..k).rev() {
        let s: f64 = (j + 1..k).map(|l| r[j][l] * w[l]).sum();
        w[j] = (rhs[j] - s) / r[j][j];
    }
    Ok(w)
}
