//! Per-market and cohort pipelines behind the `cyclescan` binary.
//!
//! A market run goes from a price file to returns, wavelet field, scalegram,
//! significance, peaks, band metrics, global and windowed DMA, and a Hurst
//! vector, and writes plot-ready CSV and JSON files into `<output>/<market>/`.
//! A cohort run processes several markets concurrently and then compares the
//! band metrics between groups and classifies the markets by Development Index.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cyclescan::cwt::{self, ScaleGrid, Scalegram, SignificanceResult, SpectralExponent};
use cyclescan::devindex::{self, DevelopmentReport, DirectionMode};
use cyclescan::dma::{self, HurstEstimate, HurstVector, HurstVectorMode, LocalHurstSeries};
use cyclescan::ingest::{self, ReturnSeries};
use cyclescan::peaks::{self, Peak, PeakIntervalMap, CYCLE_INTERVALS};
use cyclescan::spectral_stats::{self, AmplitudeMode, BandMetric, GroupComparisonReport, MarketGroup, MarketMetrics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Pipeline stage, used to tag errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Wavelet,
    Significance,
    Peaks,
    Bands,
    Dma,
    Tddma,
    HurstVector,
    GroupStats,
    DevIndex,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Wavelet => "wavelet",
            Stage::Significance => "significance",
            Stage::Peaks => "peaks",
            Stage::Bands => "bands",
            Stage::Dma => "dma",
            Stage::Tddma => "tddma",
            Stage::HurstVector => "hurst-vector",
            Stage::GroupStats => "group-stats",
            Stage::DevIndex => "devindex",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{market}: stage {stage}: {source}")]
    Analysis {
        market: String,
        stage: Stage,
        #[source]
        source: cyclescan::Error,
    },
    #[error("{market}: stage output: {path}: {source}")]
    Output {
        market: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("configuration: {0}")]
    Config(String),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Analysis { stage, .. } => *stage,
            PipelineError::Output { .. } => Stage::Output,
            PipelineError::Config(_) => Stage::Config,
        }
    }
}

type PResult<T> = std::result::Result<T, PipelineError>;

trait Tag<T> {
    fn tag(self, market: &str, stage: Stage) -> PResult<T>;
}

impl<T> Tag<T> for cyclescan::Result<T> {
    fn tag(self, market: &str, stage: Stage) -> PResult<T> {
        self.map_err(|source| PipelineError::Analysis {
            market: market.to_string(),
            stage,
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketInput {
    pub path: PathBuf,
    pub market_id: String,
    pub group: MarketGroup,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HurstMode {
    #[default]
    ScaleRestricted,
    TddmaAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<MarketInput>,
    /// Return lag in trading days.
    pub lag: usize,
    pub voices_per_octave: usize,
    /// Significance level of the wavelet test.
    pub level: f64,
    /// Minimum peak prominence as a fraction of the scalegram maximum.
    pub min_prominence: f64,
    pub tddma_window: usize,
    pub tddma_step: usize,
    pub tddma_min_window: usize,
    pub hurst_mode: HurstMode,
    pub amplitude: AmplitudeMode,
    /// Significance level of the group comparison.
    pub alpha: f64,
    pub direction: DirectionMode,
    pub output: PathBuf,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            lag: 1,
            voices_per_octave: cwt::DEFAULT_VOICES_PER_OCTAVE,
            level: 0.10,
            min_prominence: peaks::DEFAULT_MIN_PROMINENCE,
            tddma_window: dma::DEFAULT_WINDOW,
            tddma_step: dma::DEFAULT_STEP,
            tddma_min_window: dma::DEFAULT_MIN_WINDOW,
            hurst_mode: HurstMode::ScaleRestricted,
            amplitude: AmplitudeMode::Abs,
            alpha: spectral_stats::DEFAULT_ALPHA,
            direction: DirectionMode::Canonical,
            output: PathBuf::from("out"),
            jobs: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> PResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config. Relative input paths are resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> PResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            for input in &mut cfg.inputs {
                if input.path.is_relative() {
                    input.path = dir.join(&input.path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> PResult<()> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad(format!("level {} not in (0, 1)", self.level));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} not in (0, 1)", self.alpha));
        }
        if self.lag == 0 {
            return bad("lag must be at least 1".into());
        }
        if self.voices_per_octave == 0 {
            return bad("voices_per_octave must be positive".into());
        }
        if self.tddma_step == 0 || self.tddma_window < self.tddma_min_window {
            return bad("tddma_step must be positive and tddma_window >= tddma_min_window".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be positive".into());
        }
        let mut ids: Vec<&str> = self.inputs.iter().map(|i| i.market_id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return bad(format!("duplicate market id '{}'", w[0]));
        }
        if let Some(i) = self.inputs.iter().find(|i| !valid_id(&i.market_id)) {
            return bad(format!("market id '{}' is not usable as a directory name", i.market_id));
        }
        Ok(())
    }

    fn hurst_vector_mode(&self) -> HurstVectorMode {
        match self.hurst_mode {
            HurstMode::ScaleRestricted => HurstVectorMode::ScaleRestricted,
            HurstMode::TddmaAverage => HurstVectorMode::TddmaAverage {
                window_size: self.tddma_window,
                step: self.tddma_step,
            },
        }
    }

    fn thread_pool(&self) -> PResult<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            b = b.num_threads(j);
        }
        b.build().map_err(|e| PipelineError::Config(e.to_string()))
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && id != "cohort" && !id.contains(['/', '\\'])
}

#[derive(Debug, Clone, Serialize)]
pub struct MarketReport {
    pub market_id: String,
    pub group: Option<MarketGroup>,
    pub n_returns: usize,
    pub lag: usize,
    #[serde(skip)]
    pub scalegram: Scalegram,
    #[serde(skip)]
    pub significance: SignificanceResult,
    pub significant_cell_fraction: f64,
    pub peaks: Vec<Peak>,
    pub intervals: PeakIntervalMap,
    /// Band metrics for intervals holding a significant peak.
    pub bands: [Option<BandMetric>; 9],
    pub spectral_exponent: Option<SpectralExponent>,
    pub global_hurst: HurstEstimate,
    #[serde(skip)]
    pub tddma: Option<LocalHurstSeries>,
    pub hurst_vector: HurstVector,
}

/// Runs the single-market pipeline on a return series.
pub fn analyze_returns(cfg: &RunConfig, returns: &ReturnSeries, group: Option<MarketGroup>) -> PResult<MarketReport> {
    let id = returns.market_id.as_str();
    let grid = ScaleGrid::for_length(returns.len(), cfg.voices_per_octave).tag(id, Stage::Wavelet)?;
    let field = cwt::cwt(&returns.values, &grid).tag(id, Stage::Wavelet)?;
    let scalegram = cwt::scalegram(&field, false);
    let significance = cwt::significance(&field, cfg.level).tag(id, Stage::Significance)?;
    let peaks = peaks::detect_peaks(&scalegram, &significance, cfg.min_prominence).tag(id, Stage::Peaks)?;
    let intervals = peaks::assign_intervals(&peaks);

    let mut bands: [Option<BandMetric>; 9] = [None; 9];
    for (slot, (entry, interval)) in bands
        .iter_mut()
        .zip(intervals.entries.iter().zip(CYCLE_INTERVALS.iter()))
    {
        if entry.is_some() {
            *slot = Some(spectral_stats::band_metrics(&field, interval, cfg.amplitude).tag(id, Stage::Bands)?);
        }
    }
    let spectral_exponent = cwt::spectral_exponent(&scalegram, grid.a_min(), grid.a_max()).ok();

    let profile = returns.profile();
    let global_hurst = dma::hurst_default(&profile).tag(id, Stage::Dma)?;
    let tddma = if profile.len() >= cfg.tddma_window {
        Some(dma::tddma(&profile, cfg.tddma_window, cfg.tddma_step, cfg.tddma_min_window).tag(id, Stage::Tddma)?)
    } else {
        None
    };
    let hurst_vector = dma::hurst_vector(id, &profile, cfg.hurst_vector_mode()).tag(id, Stage::HurstVector)?;

    Ok(MarketReport {
        market_id: id.to_string(),
        group,
        n_returns: returns.len(),
        lag: returns.lag,
        significant_cell_fraction: significance.significant_cell_fraction(),
        scalegram,
        significance,
        peaks,
        intervals,
        bands,
        spectral_exponent,
        global_hurst,
        tddma,
        hurst_vector,
    })
}

/// Loads the input, runs the pipeline and writes the per-market files.
pub fn run_market(cfg: &RunConfig, input: &MarketInput) -> PResult<MarketReport> {
    let id = input.market_id.as_str();
    let prices = ingest::load_prices(&input.path, id).tag(id, Stage::Ingest)?;
    let returns = ingest::log_returns(&prices, cfg.lag).tag(id, Stage::Ingest)?;
    let report = analyze_returns(cfg, &returns, Some(input.group))?;
    write_market(&cfg.output, &report)?;
    Ok(report)
}

fn output_err(market: &str, path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError {
    let market = market.to_string();
    let path = path.to_path_buf();
    move |source| PipelineError::Output { market, path, source }
}

fn write_file(
    market: &str,
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>,
) -> PResult<()> {
    let file = fs::File::create(path).map_err(output_err(market, path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(output_err(market, path))
}

fn write_json<T: Serialize>(market: &str, path: &Path, value: &T) -> PResult<()> {
    write_file(market, path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

/// Writes `scalegram.csv`, `peaks.csv`, `tddma.csv`, `hurst_vector.json` and
/// `summary.json` into `<root>/<market>/`.
pub fn write_market(root: &Path, report: &MarketReport) -> PResult<()> {
    let id = report.market_id.as_str();
    let dir = root.join(id);
    fs::create_dir_all(&dir).map_err(output_err(id, &dir))?;

    write_file(id, &dir.join("scalegram.csv"), |w| {
        writeln!(
            w,
            "scale_trading_days,scale_real_days,energy,global,threshold,significant"
        )?;
        let sig = &report.significance;
        for (j, (&a, &e)) in report.scalegram.scales.iter().zip(&report.scalegram.energy).enumerate() {
            let real = a * cyclescan::REAL_DAYS_PER_WEEK / cyclescan::TRADING_DAYS_PER_WEEK;
            writeln!(
                w,
                "{a},{real},{e},{},{},{}",
                sig.global_spectrum[j], sig.scale_threshold[j], sig.significant[j]
            )?;
        }
        Ok(())
    })?;

    write_file(id, &dir.join("peaks.csv"), |w| {
        writeln!(w, "interval,nominal_days,scale_real_days,energy,significant")?;
        for p in &report.peaks {
            let (roman, nominal) = match p.interval() {
                Some(i) => (
                    CYCLE_INTERVALS[i].roman(),
                    CYCLE_INTERVALS[i].nominal_peak_days.to_string(),
                ),
                None => ("", String::new()),
            };
            writeln!(w, "{roman},{nominal},{},{},{}", p.scale_real, p.energy, p.significant)?;
        }
        Ok(())
    })?;

    write_file(id, &dir.join("tddma.csv"), |w| {
        writeln!(w, "center,h_local,r_squared,accepted")?;
        if let Some(t) = &report.tddma {
            for k in 0..t.len() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    t.centers[k], t.h_local[k], t.r_squared[k], t.accepted[k]
                )?;
            }
        }
        Ok(())
    })?;

    write_json(id, &dir.join("hurst_vector.json"), &report.hurst_vector)?;
    write_json(id, &dir.join("summary.json"), report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedMarket {
    pub market_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortReport {
    pub group_stats: GroupComparisonReport,
    pub devindex: Option<DevelopmentReport>,
    /// Markets left out of the Development Index (incomplete Hurst vector).
    pub excluded: Vec<ExcludedMarket>,
}

/// Runs every market (in parallel, bounded by `jobs`), then the group
/// comparison and the Development Index.
pub fn run_cohort(cfg: &RunConfig) -> PResult<CohortReport> {
    cfg.validate()?;
    if cfg.inputs.len() < 2 {
        return Err(PipelineError::Config(format!(
            "cohort needs at least two markets, got {}",
            cfg.inputs.len()
        )));
    }
    let pool = cfg.thread_pool()?;
    let reports: Vec<MarketReport> = pool.install(|| {
        cfg.inputs
            .par_iter()
            .map(|input| run_market(cfg, input))
            .collect::<PResult<Vec<_>>>()
    })?;
    let report = cohort_from_reports(cfg, &reports)?;
    write_cohort(&cfg.output, &report)?;
    Ok(report)
}

/// Cohort statistics from already analysed markets.
pub fn cohort_from_reports(cfg: &RunConfig, reports: &[MarketReport]) -> PResult<CohortReport> {
    let metrics: Vec<MarketMetrics> = reports
        .iter()
        .map(|r| {
            let group = r
                .group
                .ok_or_else(|| PipelineError::Config(format!("market '{}' has no group label", r.market_id)))?;
            Ok(MarketMetrics {
                market_id: r.market_id.clone(),
                group,
                bands: r.bands,
            })
        })
        .collect::<PResult<_>>()?;
    let group_stats = spectral_stats::group_compare(&metrics, cfg.alpha).tag("cohort", Stage::GroupStats)?;

    let mut vectors = Vec::new();
    let mut excluded = Vec::new();
    for r in reports {
        match r.hurst_vector.complete() {
            Ok(h) => vectors.push((r.market_id.clone(), h)),
            Err(e) => excluded.push(ExcludedMarket {
                market_id: r.market_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let devindex = if vectors.len() >= 2 {
        Some(devindex::development_report(&vectors, None, cfg.direction).tag("cohort", Stage::DevIndex)?)
    } else {
        None
    };
    Ok(CohortReport {
        group_stats,
        devindex,
        excluded,
    })
}

/// Writes `cohort/groupstats.json`, `cohort/groupstats.csv` and
/// `cohort/devindex.json`.
pub fn write_cohort(root: &Path, report: &CohortReport) -> PResult<()> {
    let dir = root.join("cohort");
    fs::create_dir_all(&dir).map_err(output_err("cohort", &dir))?;
    write_json("cohort", &dir.join("groupstats.json"), &report.group_stats)?;
    let csv_path = dir.join("groupstats.csv");
    let file = fs::File::create(&csv_path).map_err(output_err("cohort", &csv_path))?;
    report
        .group_stats
        .write_csv(BufWriter::new(file))
        .tag("cohort", Stage::Output)?;
    #[derive(Serialize)]
    struct DevIndexFile<'a> {
        report: &'a Option<DevelopmentReport>,
        excluded: &'a [ExcludedMarket],
    }
    write_json(
        "cohort",
        &dir.join("devindex.json"),
        &DevIndexFile {
            report: &report.devindex,
            excluded: &report.excluded,
        },
    )
}

/// Which reference vector a fixture run projects against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceChoice {
    /// The reference row shipped with the fixture.
    #[default]
    Printed,
    /// The mean of the fixture's vectors.
    Computed,
}

/// Per-market comparison of a fixture run with the published values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureComparison {
    pub market_id: String,
    pub a_priori_group: MarketGroup,
    pub index: f64,
    pub published_index: f64,
    pub class: MarketGroup,
    pub published_class: MarketGroup,
    pub borderline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixtureRun {
    pub reference_choice: ReferenceChoice,
    pub report: DevelopmentReport,
    pub comparison: Vec<FixtureComparison>,
    pub max_index_error: f64,
    pub classes_match: bool,
}

/// Development Index from the bundled 18-market Hurst fixture.
pub fn devindex_from_fixture(mode: DirectionMode, reference: ReferenceChoice) -> PResult<FixtureRun> {
    let fixture = devindex::table4_fixture().tag("fixture", Stage::DevIndex)?;
    let fixed = match reference {
        ReferenceChoice::Printed => Some(fixture.printed_reference),
        ReferenceChoice::Computed => None,
    };
    let report = devindex::development_report(&fixture.vectors(), fixed, mode).tag("fixture", Stage::DevIndex)?;
    let mut comparison = Vec::new();
    for (m, r) in fixture.markets.iter().zip(&report.markets) {
        let published = fixture
            .published(&m.market_id)
            .ok_or_else(|| PipelineError::Config(format!("fixture has no published index for {}", m.market_id)))?;
        comparison.push(FixtureComparison {
            market_id: m.market_id.clone(),
            a_priori_group: m.group,
            index: r.index,
            published_index: published.index,
            class: r.class,
            published_class: published.class,
            borderline: r.borderline,
        });
    }
    let max_index_error = comparison
        .iter()
        .map(|c| (c.index - c.published_index).abs())
        .fold(0.0, f64::max);
    let classes_match = comparison.iter().all(|c| c.class == c.published_class);
    Ok(FixtureRun {
        reference_choice: reference,
        report,
        comparison,
        max_index_error,
        classes_match,
    })
}

/// Runs [`devindex_from_fixture`] and writes `cohort/devindex.json`.
pub fn run_fixture(root: &Path, mode: DirectionMode, reference: ReferenceChoice) -> PResult<FixtureRun> {
    let run = devindex_from_fixture(mode, reference)?;
    let dir = root.join("cohort");
    fs::create_dir_all(&dir).map_err(output_err("cohort", &dir))?;
    write_json("cohort", &dir.join("devindex.json"), &run)?;
    Ok(run)
}

/// Development Index from `hurst_vector.json` files written by earlier runs.
pub fn devindex_from_files(paths: &[PathBuf], mode: DirectionMode) -> anyhow::Result<DevelopmentReport> {
    #[derive(Deserialize)]
    struct Component {
        h: Option<f64>,
    }
    #[derive(Deserialize)]
    struct VectorFile {
        market_id: String,
        components: Vec<Component>,
    }
    let mut vectors = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
        let v: VectorFile = serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
        let values: Vec<f64> = v.components.iter().filter_map(|c| c.h).collect();
        let h: [f64; 9] = values.try_into().map_err(|_| cyclescan::Error::IncompleteVector {
            market: v.market_id.clone(),
        })?;
        vectors.push((v.market_id, h));
    }
    Ok(devindex::development_report(&vectors, None, mode)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = RunConfig::from_toml_str(
            r#"
            level = 0.05
            direction = "formula"
            [[inputs]]
            path = "a.csv"
            market_id = "A"
            group = "developed"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.level, 0.05);
        assert_eq!(cfg.direction, DirectionMode::Formula);
        assert_eq!(cfg.tddma_window, 1000);
        assert_eq!(cfg.inputs[0].group, MarketGroup::Developed);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(RunConfig::from_toml_str("level = 1.5").is_err());
        assert!(RunConfig::from_toml_str("unknown_key = 3").is_err());
        let dup = r#"
            [[inputs]]
            path = "a.csv"
            market_id = "A"
            group = "emerging"
            [[inputs]]
            path = "b.csv"
            market_id = "A"
            group = "emerging"
        "#;
        assert!(RunConfig::from_toml_str(dup).is_err());
        let bad_group = r#"
            [[inputs]]
            path = "a.csv"
            market_id = "A"
            group = "frontier"
        "#;
        assert!(RunConfig::from_toml_str(bad_group).is_err());
    }

    #[test]
    fn fixture_run_classes() {
        let run = devindex_from_fixture(DirectionMode::Canonical, ReferenceChoice::Printed).unwrap();
        assert_eq!(run.comparison.len(), 18);
        assert!(run.classes_match);
        let egx = run.comparison.iter().find(|c| c.market_id == "EGX30").unwrap();
        assert_eq!(egx.class, MarketGroup::Emerging);
        assert_eq!(egx.a_priori_group, MarketGroup::Underdeveloped);
    }
}
