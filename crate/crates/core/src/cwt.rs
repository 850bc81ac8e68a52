//! Morlet continuous wavelet transform, scalegram and significance testing.
//!
//! The daughter wavelets are `psi((k - b) / a) / sqrt(a)` with the Morlet
//! mother `pi^(-1/4) exp(i w0 t) exp(-t^2 / 2)`, `w0 = 6`. With this
//! normalization white noise of unit variance has expected power 1 at every
//! scale, and a power-law spectrum `f^(-beta)` gives a scalegram `a^beta`.
//!
//! Scales are in trading days. The Fourier period of scale `a` is
//! `a * 4 pi / (w0 + sqrt(2 + w0^2))`, about `1.033 a`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::fit::{loglog_fit, LineFit};
use crate::{Error, Result};

pub const MORLET_OMEGA0: f64 = 6.0;
/// Smallest analysed scale in trading days.
pub const DEFAULT_MIN_SCALE: f64 = 2.0;
pub const DEFAULT_VOICES_PER_OCTAVE: usize = 8;
/// Largest scale is `N / MAX_SCALE_DIVISOR`.
pub const MAX_SCALE_DIVISOR: f64 = 5.0;
/// Series at most this long are convolved directly, longer ones via FFT.
pub const DIRECT_MAX_LEN: usize = 512;
/// Morlet decorrelation factor for time-averaged spectra.
pub const MORLET_DECORRELATION: f64 = 2.32;
/// Kernel truncation in units of scale; the envelope there is below 1e-13.
const KERNEL_HALF_WIDTH: f64 = 8.0;

/// Ratio of Fourier period to wavelet scale for a Morlet wavelet.
pub fn fourier_factor(omega0: f64) -> f64 {
    4.0 * PI / (omega0 + (2.0 + omega0 * omega0).sqrt())
}

/// Scale at which a pure harmonic of the given period has maximal power.
pub fn scale_for_period(period: f64) -> f64 {
    period / fourier_factor(MORLET_OMEGA0)
}

pub fn period_for_scale(scale: f64) -> f64 {
    scale * fourier_factor(MORLET_OMEGA0)
}

fn morlet(t: f64) -> Complex64 {
    let env = PI.powf(-0.25) * (-0.5 * t * t).exp();
    Complex64::from_polar(env, MORLET_OMEGA0 * t)
}

/// Log-spaced wavelet scales in trading days.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleGrid {
    pub scales: Vec<f64>,
    pub voices_per_octave: usize,
}

impl ScaleGrid {
    /// Scales `2 * 2^(j / voices)` up to `n / 5`.
    pub fn for_length(n: usize, voices_per_octave: usize) -> Result<Self> {
        if n < 10 {
            return Err(Error::SeriesTooShort { len: n, needed: 10 });
        }
        if voices_per_octave == 0 {
            return Err(Error::InvalidArgument("voices_per_octave must be positive".into()));
        }
        let limit = n as f64 / MAX_SCALE_DIVISOR;
        let scales: Vec<f64> = (0..)
            .map(|j| DEFAULT_MIN_SCALE * 2f64.powf(j as f64 / voices_per_octave as f64))
            .take_while(|&a| a <= limit * (1.0 + 1e-12))
            .collect();
        Ok(Self {
            scales,
            voices_per_octave,
        })
    }

    /// Arbitrary increasing positive scales.
    pub fn from_scales(scales: Vec<f64>) -> Result<Self> {
        if scales.is_empty() || scales[0] <= 0.0 || scales.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "scales must be positive and strictly increasing".into(),
            ));
        }
        Ok(Self {
            scales,
            voices_per_octave: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn a_min(&self) -> f64 {
        self.scales[0]
    }

    pub fn a_max(&self) -> f64 {
        self.scales[self.scales.len() - 1]
    }

    /// Index of the grid scale closest to `a` in log distance.
    pub fn nearest(&self, a: f64) -> usize {
        let la = a.ln();
        self.scales
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| (x.ln() - la).abs().total_cmp(&(y.ln() - la).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Cell boundaries for quadrature along the scale axis: geometric
    /// midpoints between neighbours, clipped to `[a_min, a_max]`.
    pub fn cell_edges(&self) -> Vec<f64> {
        let s = &self.scales;
        let mut edges = Vec::with_capacity(s.len() + 1);
        edges.push(s[0]);
        edges.extend(s.windows(2).map(|w| (w[0] * w[1]).sqrt()));
        edges.push(s[s.len() - 1]);
        edges
    }
}

/// Convolution strategy for [`cwt_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Direct for short series, FFT otherwise.
    Auto,
    Direct,
    Fft,
}

/// Complex coefficients `W(a, b)`, one row per scale.
#[derive(Debug, Clone)]
pub struct WaveletField {
    pub grid: ScaleGrid,
    pub n_times: usize,
    pub coefficients: Vec<Vec<Complex64>>,
    /// Largest trustworthy scale at each time: the e-folding time `sqrt(2) a`
    /// must fit between the cell and the nearest edge.
    pub coi: Vec<f64>,
}

impl WaveletField {
    pub fn power(&self, scale_idx: usize, t: usize) -> f64 {
        self.coefficients[scale_idx][t].norm_sqr()
    }

    pub fn inside_coi(&self, scale_idx: usize, t: usize) -> bool {
        self.grid.scales[scale_idx] <= self.coi[t]
    }
}

fn cone_of_influence(n: usize, a_max: f64) -> Vec<f64> {
    (0..n)
        .map(|b| ((b + 1).min(n - b) as f64 / 2f64.sqrt()).min(a_max))
        .collect()
}

fn kernel_half_width(a: f64, n: usize) -> usize {
    ((KERNEL_HALF_WIDTH * a).ceil() as usize).min(n.saturating_sub(1))
}

/// `conj(psi(d / a)) / sqrt(a)` for `d` in `-half..=half`.
fn conj_kernel(a: f64, half: usize) -> Vec<Complex64> {
    let norm = a.sqrt().recip();
    (-(half as isize)..=half as isize)
        .map(|d| morlet(d as f64 / a).conj() * norm)
        .collect()
}

pub fn cwt(values: &[f64], grid: &ScaleGrid) -> Result<WaveletField> {
    cwt_with(values, grid, Method::Auto)
}

/// `W(a, b) = sum_k R(k) conj(psi_{a,b}(k))` with zero padding outside the
/// series.
pub fn cwt_with(values: &[f64], grid: &ScaleGrid, method: Method) -> Result<WaveletField> {
    let n = values.len();
    if n < 10 {
        return Err(Error::SeriesTooShort { len: n, needed: 10 });
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty scale grid".into()));
    }
    let use_fft = match method {
        Method::Auto => n > DIRECT_MAX_LEN,
        Method::Direct => false,
        Method::Fft => true,
    };
    let coefficients = if use_fft {
        cwt_fft(values, grid)
    } else {
        grid.scales.par_iter().map(|&a| cwt_row_direct(values, a)).collect()
    };
    Ok(WaveletField {
        grid: grid.clone(),
        n_times: n,
        coefficients,
        coi: cone_of_influence(n, grid.a_max()),
    })
}

fn cwt_row_direct(values: &[f64], a: f64) -> Vec<Complex64> {
    let n = values.len();
    let half = kernel_half_width(a, n);
    let kern = conj_kernel(a, half);
    (0..n)
        .map(|b| {
            let lo = b.saturating_sub(half);
            let hi = (b + half).min(n - 1);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &x) in values.iter().enumerate().take(hi + 1).skip(lo) {
                acc += kern[k + half - b] * x;
            }
            acc
        })
        .collect()
}

fn cwt_fft(values: &[f64], grid: &ScaleGrid) -> Vec<Vec<Complex64>> {
    let n = values.len();
    let max_half = kernel_half_width(grid.a_max(), n);
    // No wrap-around as long as the padded length covers n + half.
    let m = (n + max_half).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let forward: Arc<dyn Fft<f64>> = planner.plan_fft_forward(m);
    let inverse: Arc<dyn Fft<f64>> = planner.plan_fft_inverse(m);

    let mut signal: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    signal.resize(m, Complex64::new(0.0, 0.0));
    forward.process(&mut signal);
    let scale = 1.0 / m as f64;

    grid.scales
        .par_iter()
        .map(|&a| {
            let half = kernel_half_width(a, n);
            let kern = conj_kernel(a, half);
            // W(b) = sum_k R(k) g(k - b) = (R * h)(b) with h(d) = g(-d).
            let mut h = vec![Complex64::new(0.0, 0.0); m];
            for (i, &g) in kern.iter().enumerate() {
                let d = i as isize - half as isize;
                h[(-d).rem_euclid(m as isize) as usize] = g;
            }
            forward.process(&mut h);
            for (hv, sv) in h.iter_mut().zip(&signal) {
                *hv *= sv;
            }
            inverse.process(&mut h);
            h.truncate(n);
            h.iter_mut().for_each(|v| *v *= scale);
            h
        })
        .collect()
}

/// Energy per scale, `E_W(a) = sum_b |W(a, b)|^2` with unit time step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scalegram {
    pub scales: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Scalegram {
    pub fn argmax(&self) -> Option<usize> {
        self.energy
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }
}

/// Scalegram of a field; with `inside_coi_only` cells outside the cone of
/// influence are dropped.
pub fn scalegram(field: &WaveletField, inside_coi_only: bool) -> Scalegram {
    let energy = field
        .coefficients
        .iter()
        .enumerate()
        .map(|(j, row)| {
            row.iter()
                .enumerate()
                .filter(|(t, _)| !inside_coi_only || field.inside_coi(j, *t))
                .map(|(_, w)| w.norm_sqr())
                .sum()
        })
        .collect();
    Scalegram {
        scales: field.grid.scales.clone(),
        energy,
    }
}

/// Significance of local wavelet power and of the global spectrum.
///
/// A cell is significant when `|W(a,b)|^2` exceeds `global[a] * q` with `q`
/// the `1 - level` quantile of chi-square(2) divided by 2. A scale is
/// significant when its global power exceeds a power-law background fitted
/// to the global spectrum, scaled by the chi-square quantile for the
/// time-averaged degrees of freedom `2 sqrt(1 + (N / (2.32 a))^2)`.
#[derive(Debug, Clone)]
pub struct SignificanceResult {
    pub level: f64,
    pub scales: Vec<f64>,
    /// Time mean of `|W|^2` per scale.
    pub global_spectrum: Vec<f64>,
    /// Per-cell power threshold per scale.
    pub threshold: Vec<f64>,
    /// Power-law background fitted to the global spectrum.
    pub background: Vec<f64>,
    /// Threshold the global spectrum must exceed for the scale to count.
    pub scale_threshold: Vec<f64>,
    pub dof: Vec<f64>,
    pub significant: Vec<bool>,
    /// Row-major `scales x n_times` mask of significant cells.
    pub cells: Vec<bool>,
    pub n_times: usize,
}

impl SignificanceResult {
    pub fn cell(&self, scale_idx: usize, t: usize) -> bool {
        self.cells[scale_idx * self.n_times + t]
    }

    pub fn significant_cell_fraction(&self) -> f64 {
        self.cells.iter().filter(|&&c| c).count() as f64 / self.cells.len() as f64
    }
}

/// `chi2_2(1 - level) / 2`, equal to `-ln(level)`.
pub fn cell_multiplier(level: f64) -> f64 {
    -level.ln()
}

/// `chi2_dof(1 - level) / dof`.
pub fn chi_square_multiplier(dof: f64, level: f64) -> Result<f64> {
    let dist = ChiSquared::new(dof).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - level) / dof)
}

pub fn significance(field: &WaveletField, level: f64) -> Result<SignificanceResult> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "significance level {level} not in (0, 1)"
        )));
    }
    let n = field.n_times;
    let scales = field.grid.scales.clone();
    let global_spectrum: Vec<f64> = field
        .coefficients
        .iter()
        .map(|row| row.iter().map(|w| w.norm_sqr()).sum::<f64>() / n as f64)
        .collect();
    let mult = cell_multiplier(level);
    let threshold: Vec<f64> = global_spectrum.iter().map(|g| g * mult).collect();

    let mut cells = Vec::with_capacity(scales.len() * n);
    for (row, &thr) in field.coefficients.iter().zip(&threshold) {
        cells.extend(row.iter().map(|w| w.norm_sqr() > thr));
    }

    let background = power_law_background(&scales, &global_spectrum);
    let dof: Vec<f64> = scales
        .iter()
        .map(|&a| 2.0 * (1.0 + (n as f64 / (MORLET_DECORRELATION * a)).powi(2)).sqrt())
        .collect();
    let scale_threshold = background
        .iter()
        .zip(&dof)
        .map(|(&bg, &nu)| chi_square_multiplier(nu, level).map(|q| bg * q))
        .collect::<Result<Vec<f64>>>()?;
    let significant = global_spectrum
        .iter()
        .zip(&scale_threshold)
        .map(|(g, t)| *g > 0.0 && g > t)
        .collect();

    Ok(SignificanceResult {
        level,
        scales,
        global_spectrum,
        threshold,
        background,
        scale_threshold,
        dof,
        significant,
        cells,
        n_times: n,
    })
}

fn power_law_background(scales: &[f64], global: &[f64]) -> Vec<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = scales
        .iter()
        .zip(global)
        .filter(|(_, &g)| g > 0.0)
        .map(|(&a, &g)| (a, g))
        .unzip();
    match loglog_fit(&xs, &ys, 2) {
        Ok(f) => scales.iter().map(|a| (f.intercept + f.slope * a.ln()).exp()).collect(),
        Err(_) => global.to_vec(),
    }
}

/// Power-law exponent of a scalegram over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralExponent {
    pub beta: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

impl SpectralExponent {
    /// Hurst exponent implied by `H = (beta + 1) / 2`.
    pub fn hurst(&self) -> f64 {
        (self.beta + 1.0) / 2.0
    }
}

pub const MIN_SPECTRAL_FIT_POINTS: usize = 5;

pub fn spectral_exponent(s: &Scalegram, lo: f64, hi: f64) -> Result<SpectralExponent> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = s
        .scales
        .iter()
        .zip(&s.energy)
        .filter(|(&a, _)| a >= lo && a <= hi)
        .map(|(&a, &e)| (a, e))
        .unzip();
    if xs.len() < MIN_SPECTRAL_FIT_POINTS {
        return Err(Error::RangeTooNarrow {
            points: xs.len(),
            needed: MIN_SPECTRAL_FIT_POINTS,
        });
    }
    if let Some((a, _)) = xs.iter().zip(&ys).find(|(_, &e)| e <= 0.0 || !e.is_finite()) {
        return Err(Error::NonPositiveEnergy { scale: *a });
    }
    let LineFit {
        slope,
        intercept,
        r_squared,
        points,
        ..
    } = loglog_fit(&xs, &ys, MIN_SPECTRAL_FIT_POINTS)?;
    Ok(SpectralExponent {
        beta: slope,
        intercept,
        r_squared,
        points,
    })
}
