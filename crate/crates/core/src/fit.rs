//! Ordinary least squares on (x, y) pairs, used for every log-log slope.

use serde::Serialize;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope; zero for exact fits or two points.
    pub stderr: f64,
    pub points: usize,
}

/// Least-squares line through `(x, y)`. Needs at least `min_points` pairs.
pub fn linear_fit(x: &[f64], y: &[f64], min_points: usize) -> Result<LineFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    let needed = min_points.max(2);
    if n < needed {
        return Err(Error::RangeTooNarrow { points: n, needed });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mx;
        let dy = yi - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 {
        return Err(Error::RangeTooNarrow { points: 1, needed });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = (syy - slope * sxy).max(0.0);
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let stderr = if n > 2 { (sse / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
        stderr,
        points: n,
    })
}

/// Fit `ln y = slope * ln x + c`. All inputs must be positive.
pub fn loglog_fit(x: &[f64], y: &[f64], min_points: usize) -> Result<LineFit> {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly, min_points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let f = linear_fit(&x, &y, 2).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-12);
        assert!((f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(f.stderr < 1e-7);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            linear_fit(&[1.0, 2.0], &[1.0, 2.0], 5),
            Err(Error::RangeTooNarrow { points: 2, needed: 5 })
        ));
    }

    #[test]
    fn noisy_line_has_positive_stderr() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.1, 1.9, 3.2, 3.9, 5.1];
        let f = linear_fit(&x, &y, 2).unwrap();
        assert!(f.stderr > 0.0);
        assert!(f.r_squared > 0.98 && f.r_squared < 1.0);
    }
}
