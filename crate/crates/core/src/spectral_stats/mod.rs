//! Band energy and amplitude metrics and their statistical comparison
//! between market groups.

pub mod bands;
pub mod compare;
pub mod hypothesis;

pub use bands::{
    band_amplitude, band_energy, band_metrics, relative_amplitude, relative_energy, total_energy, AmplitudeMode,
    BandMetric,
};
pub use compare::{
    group_compare, GroupComparisonReport, GroupSummary, MarketGroup, MarketMetrics, Metric, MetricComparison,
    OmnibusTest, PairComparison, PosthocTest, SkippedComparison, DEFAULT_ALPHA,
};
pub use hypothesis::{
    anova_oneway, bonferroni_pairwise, kruskal_wallis, mann_whitney, mann_whitney_null_counts, shapiro_wilk,
    AnovaResult, PairwiseResult, TestResult,
};
