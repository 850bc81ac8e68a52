//! Relative energy content and relative amplitude of scale bands.
//!
//! For a band `[s1, s2]` (trading days)
//!
//! ```text
//! E = 1/t  int_0^t int_s1^s2 |W(a,b)|^2 / a^2 da db
//! A = 1/t  1/(s2 - s1)  int_0^t int_s1^s2 |W(a,b)| / a^2 da db
//! ```
//!
//! and the relative values divide by the same integrals over the whole grid.
//! Time uses the trapezoid rule with unit step (`t = N - 1`). Along scale each
//! grid point owns the cell between the geometric midpoints to its
//! neighbours; a band collects the overlapping length of every cell, which
//! makes the integral exactly additive over disjoint bands.

use serde::{Deserialize, Serialize};

use crate::cwt::WaveletField;
use crate::peaks::CycleInterval;
use crate::{Error, Result};

/// What is integrated for the amplitude measure.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeMode {
    /// `|W|`.
    #[default]
    Abs,
    /// `Re W`; signed and largely self-cancelling.
    Real,
    /// `|W|^2`.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandMetric {
    pub interval: usize,
    pub e_w: f64,
    pub a_w: f64,
    pub e_band: f64,
    pub a_band: f64,
    pub e_total: f64,
    pub a_total: f64,
}

/// Per-scale time averages of `|W|^2` and of the amplitude integrand.
struct TimeAverages {
    power: Vec<f64>,
    amplitude: Vec<f64>,
}

fn trapezoid_mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n < 2 {
        return values.sum();
    }
    let mut acc = 0.0;
    for (i, v) in values.enumerate() {
        acc += if i == 0 || i == n - 1 { 0.5 * v } else { v };
    }
    acc / (n - 1) as f64
}

fn time_averages(field: &WaveletField, mode: AmplitudeMode) -> TimeAverages {
    let power = field
        .coefficients
        .iter()
        .map(|row| trapezoid_mean(row.iter().map(|w| w.norm_sqr())))
        .collect();
    let amplitude = field
        .coefficients
        .iter()
        .map(|row| match mode {
            AmplitudeMode::Abs => trapezoid_mean(row.iter().map(|w| w.norm())),
            AmplitudeMode::Real => trapezoid_mean(row.iter().map(|w| w.re)),
            AmplitudeMode::Power => trapezoid_mean(row.iter().map(|w| w.norm_sqr())),
        })
        .collect();
    TimeAverages { power, amplitude }
}

/// Overlap of each scale cell with `[lo, hi]`.
fn cell_overlaps(field: &WaveletField, lo: f64, hi: f64) -> Vec<f64> {
    let edges = field.grid.cell_edges();
    edges
        .windows(2)
        .map(|e| (hi.min(e[1]) - lo.max(e[0])).max(0.0))
        .collect()
}

/// `sum_j integrand_j / a_j^2 * overlap_j` and the total overlap.
fn scale_integral(field: &WaveletField, per_scale: &[f64], lo: f64, hi: f64) -> Result<(f64, f64)> {
    let overlaps = cell_overlaps(field, lo, hi);
    let measure: f64 = overlaps.iter().sum();
    if !(measure > 0.0) {
        return Err(Error::EmptyBand { lo, hi });
    }
    let integral = per_scale
        .iter()
        .zip(&field.grid.scales)
        .zip(&overlaps)
        .map(|((v, a), w)| v / (a * a) * w)
        .sum();
    Ok((integral, measure))
}

/// Band energy over trading-day scales `[lo, hi]`.
pub fn band_energy(field: &WaveletField, lo: f64, hi: f64) -> Result<f64> {
    let avg = time_averages(field, AmplitudeMode::Abs);
    Ok(scale_integral(field, &avg.power, lo, hi)?.0)
}

/// Band amplitude over trading-day scales `[lo, hi]`; the bandwidth
/// normalizer is the part of the band covered by the grid.
pub fn band_amplitude(field: &WaveletField, lo: f64, hi: f64, mode: AmplitudeMode) -> Result<f64> {
    let avg = time_averages(field, mode);
    let (integral, measure) = scale_integral(field, &avg.amplitude, lo, hi)?;
    Ok(integral / measure)
}

pub fn total_energy(field: &WaveletField) -> Result<f64> {
    band_energy(field, field.grid.a_min(), field.grid.a_max())
}

pub fn relative_energy(field: &WaveletField, lo: f64, hi: f64) -> Result<f64> {
    let e = band_energy(field, lo, hi)?;
    let total = total_energy(field)?;
    Ok(if total > 0.0 { e / total } else { 0.0 })
}

pub fn relative_amplitude(field: &WaveletField, lo: f64, hi: f64, mode: AmplitudeMode) -> Result<f64> {
    let a = band_amplitude(field, lo, hi, mode)?;
    let total = band_amplitude(field, field.grid.a_min(), field.grid.a_max(), mode)?;
    Ok(if total != 0.0 { a / total } else { 0.0 })
}

/// Energy and amplitude metrics of one cycle interval (real-day bounds are
/// converted to trading days).
pub fn band_metrics(field: &WaveletField, interval: &CycleInterval, mode: AmplitudeMode) -> Result<BandMetric> {
    let avg = time_averages(field, mode);
    let (lo, hi) = interval.trading_bounds();
    let (e_band, _) = scale_integral(field, &avg.power, lo, hi)?;
    let (a_int, a_measure) = scale_integral(field, &avg.amplitude, lo, hi)?;
    let (e_total, _) = scale_integral(field, &avg.power, field.grid.a_min(), field.grid.a_max())?;
    let (t_int, t_measure) = scale_integral(field, &avg.amplitude, field.grid.a_min(), field.grid.a_max())?;
    let a_band = a_int / a_measure;
    let a_total = t_int / t_measure;
    Ok(BandMetric {
        interval: interval.index,
        e_w: if e_total > 0.0 { e_band / e_total } else { 0.0 },
        a_w: if a_total != 0.0 { a_band / a_total } else { 0.0 },
        e_band,
        a_band,
        e_total,
        a_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cwt::{cwt, ScaleGrid};
    use crate::peaks::CYCLE_INTERVALS;
    use rustfft::num_complex::Complex64;

    fn synthetic_field(grid: ScaleGrid, n: usize, f: impl Fn(f64) -> f64) -> WaveletField {
        let coefficients = grid
            .scales
            .iter()
            .map(|&a| vec![Complex64::new(f(a), 0.0); n])
            .collect();
        WaveletField {
            coi: vec![grid.a_max(); n],
            grid,
            n_times: n,
            coefficients,
        }
    }

    #[test]
    fn zero_field() {
        let g = ScaleGrid::for_length(200, 8).unwrap();
        let w = synthetic_field(g, 200, |_| 0.0);
        assert_eq!(band_energy(&w, 3.0, 10.0).unwrap(), 0.0);
        assert_eq!(relative_energy(&w, 3.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn weight_cancelling_integrand_gives_measure_fraction() {
        // |W|^2 = a^2 makes the integrand 1, so E is the scale measure.
        let g = ScaleGrid::for_length(2000, 8).unwrap();
        let (a0, a1) = (g.a_min(), g.a_max());
        let w = synthetic_field(g, 100, |a| a);
        for (lo, hi) in [(5.0, 17.0), (a0, 50.0), (33.3, 34.1), (100.0, a1)] {
            let f = (hi - lo) / (a1 - a0);
            assert!((relative_energy(&w, lo, hi).unwrap() - f).abs() < 1e-9);
        }
    }

    #[test]
    fn amplitude_independent_of_bandwidth() {
        // |W| = a^2 cancels the weight; the 1/(s2 - s1) normalizer removes width.
        let g = ScaleGrid::for_length(3000, 8).unwrap();
        let w = synthetic_field(g, 64, |a| a * a);
        for (lo, hi) in [(2.0, 3.0), (10.0, 100.0), (4.0, 500.0)] {
            assert!((relative_amplitude(&w, lo, hi, AmplitudeMode::Abs).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_band() {
        let g = ScaleGrid::for_length(100, 8).unwrap();
        let w = synthetic_field(g, 100, |_| 1.0);
        assert!(matches!(band_energy(&w, 500.0, 600.0), Err(Error::EmptyBand { .. })));
        assert!(matches!(band_energy(&w, 1.0, 1.5), Err(Error::EmptyBand { .. })));
    }

    #[test]
    fn intervals_and_complement_sum_to_one() {
        let n = 5000;
        let x: Vec<f64> = (0..n).map(|t| ((t * 7919 + 13) % 1009) as f64 / 504.0 - 1.0).collect();
        let g = ScaleGrid::for_length(n, 8).unwrap();
        let w = cwt(&x, &g).unwrap();
        let mut cuts: Vec<f64> = vec![g.a_min()];
        for c in CYCLE_INTERVALS.iter() {
            let (lo, hi) = c.trading_bounds();
            for v in [lo, hi] {
                if v > g.a_min() && v < g.a_max() {
                    cuts.push(v);
                }
            }
        }
        cuts.push(g.a_max());
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let total: f64 = cuts.windows(2).map(|c| relative_energy(&w, c[0], c[1]).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn harmonic_energy_concentrates_in_its_band() {
        let n = 4096;
        let period = 30.0;
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * t as f64 / period).cos())
            .collect();
        let g = ScaleGrid::for_length(n, 8).unwrap();
        let w = cwt(&x, &g).unwrap();
        let centre = crate::cwt::scale_for_period(period);
        let (lo, hi) = (centre / 1.3, centre * 1.3);
        let inside = band_energy(&w, lo, hi).unwrap();
        let off = band_energy(&w, lo * 4.0, hi * 4.0).unwrap();
        let off_low = band_energy(&w, 2.0, 2.0 + (hi - lo) / 4.0).unwrap();
        assert!(inside > 10.0 * off);
        assert!(inside > 10.0 * off_low);
    }

    #[test]
    fn metrics_for_interval() {
        let n = 3000;
        let x: Vec<f64> = (0..n).map(|t| ((t * 31) % 17) as f64 - 8.0).collect();
        let g = ScaleGrid::for_length(n, 8).unwrap();
        let w = cwt(&x, &g).unwrap();
        let m = band_metrics(&w, &CYCLE_INTERVALS[3], AmplitudeMode::Abs).unwrap();
        assert!(m.e_w >= 0.0 && m.e_w <= 1.0);
        assert_eq!(m.e_w, m.e_band / m.e_total);
        let (lo, hi) = CYCLE_INTERVALS[3].trading_bounds();
        assert!((m.e_w - relative_energy(&w, lo, hi).unwrap()).abs() < 1e-12);
        assert!((m.a_w - relative_amplitude(&w, lo, hi, AmplitudeMode::Abs).unwrap()).abs() < 1e-12);
    }
}
