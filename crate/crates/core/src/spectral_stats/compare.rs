//! Cross-group comparison of band metrics.
//!
//! For every cycle interval and metric the groups are first checked for
//! normality. If every group passes, a one-way ANOVA is run with Bonferroni
//! post-hoc tests; otherwise Kruskal-Wallis with pairwise Mann-Whitney tests.
//! Post-hoc tests only run when the omnibus test rejects at `alpha`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bands::BandMetric;
use super::hypothesis::{anova_oneway, bonferroni_pairwise, kruskal_wallis, mann_whitney, shapiro_wilk};
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarketGroup {
    Underdeveloped,
    Emerging,
    Developed,
}

impl MarketGroup {
    pub const ALL: [MarketGroup; 3] = [
        MarketGroup::Underdeveloped,
        MarketGroup::Emerging,
        MarketGroup::Developed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MarketGroup::Underdeveloped => "underdeveloped",
            MarketGroup::Emerging => "emerging",
            MarketGroup::Developed => "developed",
        }
    }
}

impl fmt::Display for MarketGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MarketGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "underdeveloped" | "transitional" => Ok(MarketGroup::Underdeveloped),
            "emerging" => Ok(MarketGroup::Emerging),
            "developed" => Ok(MarketGroup::Developed),
            other => Err(Error::InvalidArgument(format!("unknown market group '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    /// Relative energy content.
    #[serde(rename = "e_w")]
    EnergyContent,
    /// Relative amplitude.
    #[serde(rename = "a_w")]
    Amplitude,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::EnergyContent => "e_w",
            Metric::Amplitude => "a_w",
        }
    }

    fn value(self, m: &BandMetric) -> f64 {
        match self {
            Metric::EnergyContent => m.e_w,
            Metric::Amplitude => m.a_w,
        }
    }
}

/// Band metrics of one market; `None` where the market has no peak in the
/// interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketMetrics {
    pub market_id: String,
    pub group: MarketGroup,
    pub bands: [Option<BandMetric>; 9],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OmnibusTest {
    Anova,
    KruskalWallis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PosthocTest {
    Bonferroni,
    MannWhitney,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub group: MarketGroup,
    pub n: usize,
    pub mean: f64,
    pub shapiro_w: Option<f64>,
    pub shapiro_p: Option<f64>,
    /// Normality accepted; groups with fewer than three values never are.
    pub normal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub first: MarketGroup,
    pub second: MarketGroup,
    pub test: PosthocTest,
    pub statistic: f64,
    pub p_value: f64,
    /// Bonferroni-adjusted for the t path; equal to `p_value` for Mann-Whitney.
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricComparison {
    /// 1-based cycle interval.
    pub interval: usize,
    pub metric: Metric,
    pub groups: Vec<GroupSummary>,
    pub omnibus: OmnibusTest,
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Empty unless the omnibus test is significant.
    pub pairwise: Vec<PairComparison>,
}

impl MetricComparison {
    /// Groups that differ significantly from every other group present.
    pub fn distinct_groups(&self) -> Vec<MarketGroup> {
        self.groups
            .iter()
            .map(|g| g.group)
            .filter(|&g| {
                let involved: Vec<&PairComparison> =
                    self.pairwise.iter().filter(|p| p.first == g || p.second == g).collect();
                !involved.is_empty()
                    && involved.len() + 1 == self.groups.len()
                    && involved.iter().all(|p| p.significant)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedComparison {
    pub interval: usize,
    pub metric: Metric,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupComparisonReport {
    pub alpha: f64,
    pub entries: Vec<MetricComparison>,
    pub skipped: Vec<SkippedComparison>,
}

impl GroupComparisonReport {
    pub fn entry(&self, interval: usize, metric: Metric) -> Option<&MetricComparison> {
        self.entries
            .iter()
            .find(|e| e.interval == interval && e.metric == metric)
    }

    /// Flat CSV mirror: one row per omnibus test and one per pairwise test.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::InvalidArgument(format!("writing CSV: {e}"));
        w.write_record([
            "interval",
            "metric",
            "test",
            "first",
            "second",
            "statistic",
            "p_value",
            "p_adjusted",
            "significant",
        ])
        .map_err(io)?;
        for e in &self.entries {
            let omnibus = match e.omnibus {
                OmnibusTest::Anova => "anova",
                OmnibusTest::KruskalWallis => "kruskal_wallis",
            };
            w.write_record([
                e.interval.to_string(),
                e.metric.as_str().to_string(),
                omnibus.to_string(),
                String::new(),
                String::new(),
                e.statistic.to_string(),
                e.p_value.to_string(),
                e.p_value.to_string(),
                e.significant.to_string(),
            ])
            .map_err(io)?;
            for p in &e.pairwise {
                let test = match p.test {
                    PosthocTest::Bonferroni => "bonferroni",
                    PosthocTest::MannWhitney => "mann_whitney",
                };
                w.write_record([
                    e.interval.to_string(),
                    e.metric.as_str().to_string(),
                    test.to_string(),
                    p.first.to_string(),
                    p.second.to_string(),
                    p.statistic.to_string(),
                    p.p_value.to_string(),
                    p.p_adjusted.to_string(),
                    p.significant.to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush()
            .map_err(|e| Error::InvalidArgument(format!("writing CSV: {e}")))?;
        Ok(())
    }
}

fn collect_groups(markets: &[MarketMetrics], interval: usize, metric: Metric) -> Vec<(MarketGroup, Vec<f64>)> {
    MarketGroup::ALL
        .iter()
        .map(|&g| {
            let values = markets
                .iter()
                .filter(|m| m.group == g)
                .filter_map(|m| m.bands[interval - 1].as_ref().map(|b| metric.value(b)))
                .filter(|v| v.is_finite())
                .collect();
            (g, values)
        })
        .filter(|(_, v): &(MarketGroup, Vec<f64>)| v.len() >= 2)
        .collect()
}

fn compare_one(
    markets: &[MarketMetrics],
    interval: usize,
    metric: Metric,
    alpha: f64,
) -> std::result::Result<MetricComparison, String> {
    let groups = collect_groups(markets, interval, metric);
    if groups.len() < 2 {
        return Err(format!("{} group(s) with at least two values", groups.len()));
    }
    let mut summaries = Vec::with_capacity(groups.len());
    for (g, v) in &groups {
        let sw = if v.len() >= 3 { shapiro_wilk(v).ok() } else { None };
        summaries.push(GroupSummary {
            group: *g,
            n: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            shapiro_w: sw.map(|r| r.statistic),
            shapiro_p: sw.map(|r| r.p_value),
            normal: sw.is_some_and(|r| r.p_value >= alpha),
        });
    }
    let slices: Vec<&[f64]> = groups.iter().map(|(_, v)| v.as_slice()).collect();
    let all_normal = summaries.iter().all(|s| s.normal);
    let err = |e: Error| e.to_string();

    let (omnibus, statistic, p_value) = if all_normal {
        let r = anova_oneway(&slices).map_err(err)?;
        (OmnibusTest::Anova, r.f, r.p_value)
    } else {
        let r = kruskal_wallis(&slices).map_err(err)?;
        (OmnibusTest::KruskalWallis, r.statistic, r.p_value)
    };
    let significant = p_value < alpha;
    let mut pairwise = Vec::new();
    if significant {
        if all_normal {
            for r in bonferroni_pairwise(&slices).map_err(err)? {
                pairwise.push(PairComparison {
                    first: groups[r.first].0,
                    second: groups[r.second].0,
                    test: PosthocTest::Bonferroni,
                    statistic: r.statistic,
                    p_value: r.p_value,
                    p_adjusted: r.p_adjusted,
                    significant: r.p_adjusted < alpha,
                });
            }
        } else {
            for i in 0..groups.len() {
                for j in i + 1..groups.len() {
                    let r = mann_whitney(&groups[i].1, &groups[j].1).map_err(err)?;
                    pairwise.push(PairComparison {
                        first: groups[i].0,
                        second: groups[j].0,
                        test: PosthocTest::MannWhitney,
                        statistic: r.statistic,
                        p_value: r.p_value,
                        p_adjusted: r.p_value,
                        significant: r.p_value < alpha,
                    });
                }
            }
        }
    }
    Ok(MetricComparison {
        interval,
        metric,
        groups: summaries,
        omnibus,
        statistic,
        p_value,
        significant,
        pairwise,
    })
}

/// Runs the comparison for all nine intervals and both metrics.
///
/// Markets without a peak in an interval do not contribute to it. Entries
/// with fewer than two usable groups are listed in `skipped`.
pub fn group_compare(markets: &[MarketMetrics], alpha: f64) -> Result<GroupComparisonReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} not in (0, 1)")));
    }
    if markets.len() < 2 {
        return Err(Error::SampleTooSmall {
            len: markets.len(),
            needed: 2,
        });
    }
    let jobs: Vec<(usize, Metric)> = (1..=9)
        .flat_map(|i| [(i, Metric::EnergyContent), (i, Metric::Amplitude)])
        .collect();
    let results: Vec<_> = jobs
        .par_iter()
        .map(|&(interval, metric)| (interval, metric, compare_one(markets, interval, metric, alpha)))
        .collect();
    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (interval, metric, r) in results {
        match r {
            Ok(e) => entries.push(e),
            Err(reason) => skipped.push(SkippedComparison {
                interval,
                metric,
                reason,
            }),
        }
    }
    Ok(GroupComparisonReport {
        alpha,
        entries,
        skipped,
    })
}
