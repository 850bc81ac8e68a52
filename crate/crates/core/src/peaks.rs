//! Scalegram maxima and the nine canonical cycle intervals.

use serde::Serialize;

use crate::cwt::{Scalegram, SignificanceResult};
use crate::{Error, Result, REAL_DAYS_PER_WEEK, TRADING_DAYS_PER_WEEK};

/// Default minimum prominence as a fraction of the scalegram maximum.
pub const DEFAULT_MIN_PROMINENCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CycleInterval {
    /// 1-based interval number (I..IX).
    pub index: usize,
    pub nominal_peak_days: f64,
    /// Bounds in real (calendar) days.
    pub lo: f64,
    pub hi: f64,
}

impl CycleInterval {
    pub fn roman(&self) -> &'static str {
        ROMAN[self.index - 1]
    }

    /// Bounds converted to trading days.
    pub fn trading_bounds(&self) -> (f64, f64) {
        (real_to_trading_days(self.lo), real_to_trading_days(self.hi))
    }

    pub fn contains_real(&self, days: f64) -> bool {
        days >= self.lo && days <= self.hi
    }
}

const ROMAN: [&str; 9] = ["I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX"];

const fn interval(index: usize, nominal_peak_days: f64, lo: f64, hi: f64) -> CycleInterval {
    CycleInterval {
        index,
        nominal_peak_days,
        lo,
        hi,
    }
}

/// Working week, week, two weeks, month, quarter, 4-5 months, half year,
/// year and two years, in real days.
pub const CYCLE_INTERVALS: [CycleInterval; 9] = [
    interval(1, 5.0, 2.0, 6.0),
    interval(2, 7.0, 6.0, 10.0),
    interval(3, 14.0, 10.0, 25.0),
    interval(4, 30.0, 25.0, 60.0),
    interval(5, 90.0, 60.0, 110.0),
    interval(6, 150.0, 110.0, 190.0),
    interval(7, 210.0, 190.0, 250.0),
    interval(8, 360.0, 250.0, 450.0),
    interval(9, 600.0, 450.0, 900.0),
];

pub fn trading_to_real_days(trading: f64) -> Result<f64> {
    if !(trading > 0.0) {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {trading}")));
    }
    Ok(trading * REAL_DAYS_PER_WEEK / TRADING_DAYS_PER_WEEK)
}

pub fn real_to_trading_days(real: f64) -> f64 {
    real * TRADING_DAYS_PER_WEEK / REAL_DAYS_PER_WEEK
}

/// Zero-based position in [`CYCLE_INTERVALS`]; shared endpoints go to the
/// lower interval.
pub fn interval_for_real_days(days: f64) -> Option<usize> {
    CYCLE_INTERVALS.iter().position(|c| c.contains_real(days))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub grid_index: usize,
    pub scale_trading: f64,
    pub scale_real: f64,
    pub energy: f64,
    pub prominence: f64,
    pub significant: bool,
}

impl Peak {
    pub fn interval(&self) -> Option<usize> {
        interval_for_real_days(self.scale_real)
    }
}

/// Strict interior maxima of the scalegram whose prominence reaches
/// `min_prominence * max(E)`.
pub fn detect_peaks(s: &Scalegram, sig: &SignificanceResult, min_prominence: f64) -> Result<Vec<Peak>> {
    if s.scales != sig.scales {
        return Err(Error::InvalidArgument(
            "scalegram and significance use different grids".into(),
        ));
    }
    let e = &s.energy;
    let max = e.iter().copied().fold(0.0, f64::max);
    if e.len() < 3 || max <= 0.0 {
        return Ok(Vec::new());
    }
    let mut peaks = Vec::new();
    for j in 1..e.len() - 1 {
        if !(e[j] > e[j - 1] && e[j] > e[j + 1]) {
            continue;
        }
        let prominence = prominence(e, j);
        if prominence < min_prominence * max {
            continue;
        }
        peaks.push(Peak {
            grid_index: j,
            scale_trading: s.scales[j],
            scale_real: trading_to_real_days(s.scales[j])?,
            energy: e[j],
            prominence,
            significant: sig.significant[j],
        });
    }
    Ok(peaks)
}

/// Height above the higher of the two flanking minima, each taken up to the
/// next strictly higher point (or the end of the curve).
fn prominence(e: &[f64], j: usize) -> f64 {
    let h = e[j];
    let mut left_min = h;
    for &v in e[..j].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &e[j + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Representative significant peak per cycle interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PeakIntervalMap {
    pub entries: [Option<Peak>; 9],
    /// Significant peaks outside `[2, 900]` real days.
    pub unassigned: Vec<Peak>,
}

impl PeakIntervalMap {
    pub fn present(&self) -> [bool; 9] {
        self.entries.map(|e| e.is_some())
    }
}

pub fn assign_intervals(peaks: &[Peak]) -> PeakIntervalMap {
    let mut map = PeakIntervalMap::default();
    for p in peaks.iter().filter(|p| p.significant) {
        match p.interval() {
            Some(i) => {
                let slot = &mut map.entries[i];
                if slot.is_none_or(|q| p.energy > q.energy) {
                    *slot = Some(*p);
                }
            }
            None => map.unassigned.push(*p),
        }
    }
    map
}
