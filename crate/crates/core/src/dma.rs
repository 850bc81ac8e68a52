//! Centered detrended moving average (cDMA) and Hurst exponents.
//!
//! All routines take the profile (cumulative sum) of a return series. For a
//! window size `n` (even) the moving average at `i` covers the `n + 1` points
//! `i - n/2 ..= i + n/2`, so any affine profile is removed exactly, and
//!
//! ```text
//! sigma(n) = sqrt( sum_{i = n/2}^{N - 1 - n/2} (x(i) - xbar_n(i))^2 / (N - n) )
//! ```
//!
//! The Hurst exponent is the least-squares slope of `ln sigma` on `ln n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::fit::loglog_fit;
use crate::peaks::{CycleInterval, CYCLE_INTERVALS};
use crate::{Error, Result};

pub const MIN_WINDOW: usize = 4;
pub const POINTS_PER_DECADE: f64 = 20.0;
pub const MIN_FIT_POINTS: usize = 6;
/// Default sliding-window size for tdDMA.
pub const DEFAULT_WINDOW: usize = 1000;
pub const DEFAULT_STEP: usize = 1;
pub const DEFAULT_MIN_WINDOW: usize = 200;
/// Local fits below this goodness of fit are flagged.
pub const R_SQUARED_GATE: f64 = 0.95;
/// Below this size every even window is used for per-interval fits.
const DENSE_GRID_LIMIT: usize = 64;

fn even_up(n: usize) -> usize {
    n + (n % 2)
}

/// Even, log-spaced window sizes in `[lo, hi]`, about 20 per decade.
pub fn window_grid_between(lo: usize, hi: usize) -> Vec<usize> {
    let lo = even_up(lo.max(2));
    if hi < lo {
        return Vec::new();
    }
    let decades = (hi as f64 / lo as f64).log10();
    let steps = (decades * POINTS_PER_DECADE).ceil() as usize;
    let mut out: Vec<usize> = (0..=steps)
        .map(|k| {
            let v = lo as f64 * 10f64.powf(k as f64 / POINTS_PER_DECADE);
            2 * (v / 2.0).round() as usize
        })
        .filter(|&n| n >= lo && n <= hi)
        .collect();
    out.dedup();
    out
}

/// Default grid `[4, N/4]` for a series of length `len`.
pub fn window_grid(len: usize) -> Vec<usize> {
    window_grid_between(MIN_WINDOW, len / 4)
}

/// Grid for per-interval fits: every even size up to 64, log-spaced above.
pub fn interval_window_grid(max_n: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=DENSE_GRID_LIMIT / 2)
        .map(|k| 2 * k)
        .filter(|&n| n <= max_n)
        .collect();
    out.extend(window_grid_between(DENSE_GRID_LIMIT + 2, max_n));
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FluctuationCurve {
    pub n_values: Vec<usize>,
    pub sigma: Vec<f64>,
    pub n_max: usize,
}

pub fn cdma_fluctuation(profile: &[f64], n_values: &[usize]) -> Result<FluctuationCurve> {
    let len = profile.len();
    let mut ns: Vec<usize> = n_values.iter().map(|&n| even_up(n.max(2))).collect();
    ns.sort_unstable();
    ns.dedup();
    let Some(&largest) = ns.last() else {
        return Err(Error::InvalidArgument("no window sizes".into()));
    };
    if len < 4 * largest {
        return Err(Error::SeriesTooShort {
            len,
            needed: 4 * largest,
        });
    }
    // Centering keeps prefix sums small and makes affine profiles exact.
    let mean = profile.iter().sum::<f64>() / len as f64;
    let mut prefix = Vec::with_capacity(len + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &x in profile {
        acc += x - mean;
        prefix.push(acc);
    }
    let sigma = ns
        .iter()
        .map(|&n| {
            let h = n / 2;
            let width = (n + 1) as f64;
            let ss: f64 = (h..len - h)
                .map(|i| {
                    let avg = (prefix[i + h + 1] - prefix[i - h]) / width;
                    let y = (profile[i] - mean) - avg;
                    y * y
                })
                .sum();
            (ss / (len - n) as f64).sqrt()
        })
        .collect();
    Ok(FluctuationCurve {
        n_values: ns,
        sigma,
        n_max: len,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurstEstimate {
    pub h: f64,
    pub fit_range: (usize, usize),
    pub r_squared: f64,
    pub stderr: f64,
    pub points: usize,
    /// Set when `h` falls outside `[0, 1]`.
    pub warn: bool,
}

/// Fit over the curve points with `lo <= n <= hi`.
pub fn hurst_from_curve(curve: &FluctuationCurve, lo: usize, hi: usize) -> Result<HurstEstimate> {
    let (ns, sig): (Vec<f64>, Vec<f64>) = curve
        .n_values
        .iter()
        .zip(&curve.sigma)
        .filter(|(&n, _)| n >= lo && n <= hi)
        .map(|(&n, &s)| (n as f64, s))
        .unzip();
    fit_points(&ns, &sig)
}

fn fit_points(ns: &[f64], sig: &[f64]) -> Result<HurstEstimate> {
    if ns.len() < MIN_FIT_POINTS {
        return Err(Error::RangeTooNarrow {
            points: ns.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    if let Some((n, _)) = ns.iter().zip(sig).find(|(_, &s)| !(s > 0.0)) {
        return Err(Error::ZeroFluctuation { n: *n as usize });
    }
    let f = loglog_fit(ns, sig, MIN_FIT_POINTS)?;
    Ok(HurstEstimate {
        h: f.slope,
        fit_range: (ns[0] as usize, ns[ns.len() - 1] as usize),
        r_squared: f.r_squared,
        stderr: f.stderr,
        points: f.points,
        warn: !(0.0..=1.0).contains(&f.slope),
    })
}

/// Global Hurst exponent of a profile over the default grid restricted to
/// `fit_range` (inclusive window sizes).
pub fn hurst_global(profile: &[f64], fit_range: (usize, usize)) -> Result<HurstEstimate> {
    let ns: Vec<usize> = window_grid(profile.len())
        .into_iter()
        .filter(|&n| n >= fit_range.0 && n <= fit_range.1)
        .collect();
    if ns.len() < MIN_FIT_POINTS {
        return Err(Error::RangeTooNarrow {
            points: ns.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let curve = cdma_fluctuation(profile, &ns)?;
    hurst_from_curve(&curve, fit_range.0, fit_range.1)
}

/// Global Hurst exponent over the full default grid `[4, N/4]`.
pub fn hurst_default(profile: &[f64]) -> Result<HurstEstimate> {
    hurst_global(profile, (MIN_WINDOW, profile.len() / 4))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalHurstSeries {
    pub window_size: usize,
    pub step: usize,
    pub min_window: usize,
    /// Center index of each window in the input series.
    pub centers: Vec<usize>,
    /// NaN where the window fit failed outright.
    pub h_local: Vec<f64>,
    pub r_squared: Vec<f64>,
    /// False when the fit failed or fell below [`R_SQUARED_GATE`].
    pub accepted: Vec<bool>,
}

impl LocalHurstSeries {
    pub fn len(&self) -> usize {
        self.h_local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h_local.is_empty()
    }
}

/// Time-dependent DMA: a global fit inside each window of `window_size`
/// points, moved by `step`.
pub fn tddma(profile: &[f64], window_size: usize, step: usize, min_window: usize) -> Result<LocalHurstSeries> {
    if step == 0 {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    if window_size < min_window {
        return Err(Error::SeriesTooShort {
            len: window_size,
            needed: min_window,
        });
    }
    if profile.len() < window_size {
        return Err(Error::SeriesTooShort {
            len: profile.len(),
            needed: window_size,
        });
    }
    let ns = window_grid(window_size);
    if ns.len() < MIN_FIT_POINTS {
        return Err(Error::RangeTooNarrow {
            points: ns.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let count = (profile.len() - window_size) / step + 1;
    let fits: Vec<(f64, f64, bool)> = (0..count)
        .into_par_iter()
        .map(|w| {
            let start = w * step;
            let slice = &profile[start..start + window_size];
            match cdma_fluctuation(slice, &ns).and_then(|c| hurst_from_curve(&c, 0, usize::MAX)) {
                Ok(est) => (est.h, est.r_squared, est.r_squared >= R_SQUARED_GATE),
                Err(_) => (f64::NAN, 0.0, false),
            }
        })
        .collect();
    let mut out = LocalHurstSeries {
        window_size,
        step,
        min_window,
        centers: (0..count).map(|w| w * step + window_size / 2).collect(),
        h_local: Vec::with_capacity(count),
        r_squared: Vec::with_capacity(count),
        accepted: Vec::with_capacity(count),
    };
    for (h, r2, ok) in fits {
        out.h_local.push(h);
        out.r_squared.push(r2);
        out.accepted.push(ok);
    }
    Ok(out)
}

/// One coordinate of a Hurst vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HurstComponent {
    pub interval: usize,
    /// None when the interval is unavailable for this series.
    pub h: Option<f64>,
    pub n_lo: usize,
    pub n_hi: usize,
    pub r_squared: f64,
    /// The interval held fewer than six window sizes and was widened around
    /// its geometric centre.
    pub expanded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurstVector {
    pub market_id: String,
    pub components: Vec<HurstComponent>,
}

impl HurstVector {
    /// Components in interval order; None for unavailable ones.
    pub fn values(&self) -> Vec<Option<f64>> {
        self.components.iter().map(|c| c.h).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.components.len() == CYCLE_INTERVALS.len() && self.components.iter().all(|c| c.h.is_some())
    }

    /// All nine values, or `IncompleteVector`.
    pub fn complete(&self) -> Result<[f64; 9]> {
        if !self.is_complete() {
            return Err(Error::IncompleteVector {
                market: self.market_id.clone(),
            });
        }
        let mut out = [0.0; 9];
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.h.unwrap_or(f64::NAN);
        }
        Ok(out)
    }

    pub fn from_values(market_id: impl Into<String>, values: [f64; 9]) -> Self {
        Self {
            market_id: market_id.into(),
            components: values
                .iter()
                .enumerate()
                .map(|(i, &h)| HurstComponent {
                    interval: i + 1,
                    h: Some(h),
                    n_lo: 0,
                    n_hi: 0,
                    r_squared: 1.0,
                    expanded: false,
                })
                .collect(),
        }
    }
}

/// How per-interval Hurst values are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HurstVectorMode {
    /// One fit of the full-series curve restricted to the interval's scales.
    ScaleRestricted,
    /// Mean over tdDMA windows of the scale-restricted fit in each window.
    TddmaAverage { window_size: usize, step: usize },
}

/// Window sizes used for an interval: those inside its trading-day bounds,
/// widened to the six nearest (in log distance to the geometric centre)
/// when fewer fall inside.
pub fn interval_windows(interval: &CycleInterval, grid: &[usize]) -> (Vec<usize>, bool) {
    let (lo, hi) = interval.trading_bounds();
    let inside: Vec<usize> = grid
        .iter()
        .copied()
        .filter(|&n| n as f64 >= lo && n as f64 <= hi)
        .collect();
    if inside.len() >= MIN_FIT_POINTS || grid.len() < MIN_FIT_POINTS {
        return (inside, false);
    }
    let centre = (lo * hi).sqrt().ln();
    let mut ranked: Vec<usize> = grid.to_vec();
    ranked.sort_by(|a, b| {
        let da = ((*a as f64).ln() - centre).abs();
        let db = ((*b as f64).ln() - centre).abs();
        da.total_cmp(&db).then(a.cmp(b))
    });
    let mut chosen: Vec<usize> = ranked.into_iter().take(MIN_FIT_POINTS).collect();
    chosen.sort_unstable();
    (chosen, true)
}

fn interval_fit(curve: &FluctuationCurve, windows: &[usize]) -> Option<HurstEstimate> {
    let (ns, sig): (Vec<f64>, Vec<f64>) = curve
        .n_values
        .iter()
        .zip(&curve.sigma)
        .filter(|(n, _)| windows.contains(n))
        .map(|(&n, &s)| (n as f64, s))
        .unzip();
    fit_points(&ns, &sig).ok()
}

fn unavailable(i: usize, windows: &[usize], expanded: bool) -> HurstComponent {
    HurstComponent {
        interval: i + 1,
        h: None,
        n_lo: windows.first().copied().unwrap_or(0),
        n_hi: windows.last().copied().unwrap_or(0),
        r_squared: 0.0,
        expanded,
    }
}

/// Per-interval exponents from an already computed curve. `series_len` is
/// the length the curve came from; intervals whose upper trading-day bound
/// exceeds `series_len / 4` are unavailable.
pub fn hurst_vector_from_curve(market_id: &str, curve: &FluctuationCurve, series_len: usize) -> HurstVector {
    let limit = series_len as f64 / 4.0;
    let components = CYCLE_INTERVALS
        .iter()
        .enumerate()
        .map(|(i, iv)| {
            let (windows, expanded) = interval_windows(iv, &curve.n_values);
            if iv.trading_bounds().1 > limit {
                return unavailable(i, &windows, expanded);
            }
            match interval_fit(curve, &windows) {
                Some(est) => HurstComponent {
                    interval: i + 1,
                    h: Some(est.h),
                    n_lo: est.fit_range.0,
                    n_hi: est.fit_range.1,
                    r_squared: est.r_squared,
                    expanded,
                },
                None => unavailable(i, &windows, expanded),
            }
        })
        .collect();
    HurstVector {
        market_id: market_id.to_string(),
        components,
    }
}

pub fn hurst_vector(market_id: &str, profile: &[f64], mode: HurstVectorMode) -> Result<HurstVector> {
    match mode {
        HurstVectorMode::ScaleRestricted => {
            let grid = interval_window_grid(profile.len() / 4);
            if grid.is_empty() {
                return Err(Error::SeriesTooShort {
                    len: profile.len(),
                    needed: 8,
                });
            }
            let curve = cdma_fluctuation(profile, &grid)?;
            Ok(hurst_vector_from_curve(market_id, &curve, profile.len()))
        }
        HurstVectorMode::TddmaAverage { window_size, step } => {
            if step == 0 {
                return Err(Error::InvalidArgument("step must be positive".into()));
            }
            if profile.len() < window_size || window_size < 8 {
                return Err(Error::SeriesTooShort {
                    len: profile.len(),
                    needed: window_size.max(8),
                });
            }
            let grid = interval_window_grid(window_size / 4);
            let count = (profile.len() - window_size) / step + 1;
            let per_window: Vec<HurstVector> = (0..count)
                .into_par_iter()
                .map(|w| {
                    let slice = &profile[w * step..w * step + window_size];
                    cdma_fluctuation(slice, &grid).map(|c| hurst_vector_from_curve(market_id, &c, window_size))
                })
                .collect::<Result<_>>()?;
            let components = (0..CYCLE_INTERVALS.len())
                .map(|i| {
                    let vals: Vec<(f64, f64)> = per_window
                        .iter()
                        .filter_map(|v| v.components[i].h.map(|h| (h, v.components[i].r_squared)))
                        .collect();
                    let first = per_window[0].components[i];
                    if vals.is_empty() {
                        return HurstComponent { h: None, ..first };
                    }
                    let k = vals.len() as f64;
                    HurstComponent {
                        h: Some(vals.iter().map(|v| v.0).sum::<f64>() / k),
                        r_squared: vals.iter().map(|v| v.1).sum::<f64>() / k,
                        ..first
                    }
                })
                .collect();
            Ok(HurstVector {
                market_id: market_id.to_string(),
                components,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};

    fn profile_of(spec: &SynthSpec) -> Vec<f64> {
        generate(spec).unwrap().profile()
    }

    #[test]
    fn grid_is_even_and_bounded() {
        let g = window_grid(8192);
        assert_eq!(g[0], 4);
        assert!(*g.last().unwrap() <= 2048);
        assert!(g.iter().all(|n| n % 2 == 0));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        // ~20 points per decade over log10(512) ~ 2.7 decades.
        assert!(g.len() > 40 && g.len() < 56, "{}", g.len());
        let dense = interval_window_grid(300);
        assert_eq!(&dense[..4], &[2, 4, 6, 8]);
        assert!(dense.contains(&64));
    }

    #[test]
    fn odd_windows_round_up() {
        let x: Vec<f64> = (0..100).map(|i| ((i * 17) % 5) as f64).collect();
        let c = cdma_fluctuation(&x, &[3, 4, 5]).unwrap();
        assert_eq!(c.n_values, vec![4, 6]);
    }

    #[test]
    fn constant_and_linear_profiles_vanish() {
        let constant = vec![3.25; 400];
        let c = cdma_fluctuation(&constant, &[4, 10, 50, 100]).unwrap();
        assert!(c.sigma.iter().all(|&s| s == 0.0));
        let line: Vec<f64> = (0..400).map(|i| i as f64).collect();
        let c = cdma_fluctuation(&line, &[4, 10, 50, 100]).unwrap();
        assert!(c.sigma.iter().all(|&s| s == 0.0), "{:?}", c.sigma);
        assert!(matches!(hurst_default(&line), Err(Error::ZeroFluctuation { .. })));
    }

    #[test]
    fn brute_force_sigma() {
        let x: Vec<f64> = (0..120)
            .map(|i| ((i * 37) % 23) as f64 * 0.1 + (i as f64 * 0.05).sin())
            .collect();
        let n = 10;
        let h = n / 2;
        let mut ss = 0.0;
        for i in h..x.len() - h {
            let avg: f64 = x[i - h..=i + h].iter().sum::<f64>() / (n + 1) as f64;
            ss += (x[i] - avg).powi(2);
        }
        let expect = (ss / (x.len() - n) as f64).sqrt();
        let got = cdma_fluctuation(&x, &[n]).unwrap().sigma[0];
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            cdma_fluctuation(&[0.0; 30], &[8]),
            Err(Error::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn exact_power_law_curve() {
        let ns: Vec<usize> = window_grid(10000);
        let curve = FluctuationCurve {
            sigma: ns.iter().map(|&n| 0.3 * (n as f64).powf(0.7)).collect(),
            n_values: ns,
            n_max: 10000,
        };
        let est = hurst_from_curve(&curve, 0, usize::MAX).unwrap();
        assert!((est.h - 0.7).abs() < 1e-9);
        assert!((est.r_squared - 1.0).abs() < 1e-12);
        assert!(!est.warn);
        assert!(matches!(
            hurst_from_curve(&curve, 4, 6),
            Err(Error::RangeTooNarrow { .. })
        ));
    }

    #[test]
    fn offset_and_scale_invariance() {
        let p = profile_of(&SynthSpec::fgn(2048, 0.6, 4));
        let base = hurst_default(&p).unwrap();
        let shifted: Vec<f64> = p.iter().map(|v| v + 123.0).collect();
        let scaled: Vec<f64> = p.iter().map(|v| v * 7.5).collect();
        assert!((hurst_default(&shifted).unwrap().h - base.h).abs() < 1e-9);
        assert!((hurst_default(&scaled).unwrap().h - base.h).abs() < 1e-9);
        let c1 = cdma_fluctuation(&p, &[8, 32]).unwrap();
        let c2 = cdma_fluctuation(&scaled, &[8, 32]).unwrap();
        for (a, b) in c1.sigma.iter().zip(&c2.sigma) {
            assert!((b - 7.5 * a).abs() < 1e-9 * b);
        }
    }

    #[test]
    fn white_noise_slope_ensemble() {
        let hs: Vec<f64> = (0..100)
            .map(|s| hurst_default(&profile_of(&SynthSpec::white(4096, 1000 + s))).unwrap().h)
            .collect();
        let mean = hs.iter().sum::<f64>() / hs.len() as f64;
        assert!((mean - 0.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn window_count_non_overlapping() {
        let p = profile_of(&SynthSpec::white(4500, 2));
        let l = tddma(&p, 1000, 1000, 200).unwrap();
        assert_eq!(l.len(), 4);
        assert_eq!(l.centers, vec![500, 1500, 2500, 3500]);
        let l = tddma(&p, 1000, 7, 200).unwrap();
        assert_eq!(l.len(), (4500 - 1000) / 7 + 1);
        assert!(tddma(&p, 100, 1, 200).is_err());
        assert!(tddma(&p[..500], 1000, 1, 200).is_err());
    }

    #[test]
    fn piecewise_curve_vector() {
        let len = 8192;
        let ns = interval_window_grid(len / 4);
        let sigma = ns
            .iter()
            .map(|&n| {
                let n = n as f64;
                if n < 50.0 {
                    n.powf(0.4)
                } else {
                    50f64.powf(0.4) * (n / 50.0).powf(0.8)
                }
            })
            .collect();
        let curve = FluctuationCurve {
            n_values: ns,
            sigma,
            n_max: len,
        };
        let v = hurst_vector_from_curve("piecewise", &curve, len);
        let h = v.complete().unwrap();
        for (i, value) in h.iter().enumerate().take(4) {
            assert!((value - 0.4).abs() < 1e-9, "interval {} -> {value}", i + 1);
        }
        for (i, value) in h.iter().enumerate().skip(5) {
            assert!((value - 0.8).abs() < 1e-9, "interval {} -> {value}", i + 1);
        }
        assert!(h[4] > 0.4 && h[4] < 0.8);
    }

    #[test]
    fn vector_always_has_nine_components() {
        let p = profile_of(&SynthSpec::white(1200, 5));
        let v = hurst_vector("short", &p, HurstVectorMode::ScaleRestricted).unwrap();
        assert_eq!(v.components.len(), 9);
        // N/4 = 300 trading days: intervals VIII and IX do not fit.
        assert!(v.components[8].h.is_none());
        assert!(v.components[7].h.is_none());
        assert!(v.components[0].h.is_some());
        assert!(v.complete().is_err());
        assert!(v.components[0].expanded);
    }

    #[test]
    fn interval_windows_expand_to_six() {
        let grid = interval_window_grid(2048);
        let (w, expanded) = interval_windows(&CYCLE_INTERVALS[0], &grid);
        assert!(expanded);
        assert_eq!(w.len(), 6);
        let (w, expanded) = interval_windows(&CYCLE_INTERVALS[8], &grid);
        assert!(!expanded);
        assert!(w.iter().all(|&n| (321..=643).contains(&n)));
    }
}
