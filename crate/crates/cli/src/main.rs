use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclescan::devindex::DirectionMode;
use cyclescan::ingest;
use cyclescan::spectral_stats::{AmplitudeMode, MarketGroup};
use cyclescan::synth::{self, Harmonic, SynthKind, SynthSpec};
use cyclescan_cli::{HurstMode, MarketInput, ReferenceChoice, RunConfig};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "cyclescan",
    version,
    about = "Wavelet cycles, DMA Hurst exponents and Development Index of market index returns"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a price file into log returns.
    Ingest {
        /// CSV with `date` and `close` columns.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1)]
        lag: usize,
        /// Output CSV (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analyse a single market.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        /// Market id (defaults to the file stem).
        #[arg(long)]
        market: Option<String>,
        #[arg(long, value_enum)]
        group: Option<GroupArg>,
        #[command(flatten)]
        opts: PipelineOpts,
    },
    /// Analyse several markets and compare them.
    Cohort {
        #[command(flatten)]
        opts: PipelineOpts,
        /// Extra market as `path:market_id:group` (repeatable).
        #[arg(long = "market")]
        markets: Vec<String>,
        /// Skip estimation and use a bundled Hurst-vector fixture.
        #[arg(long, value_enum)]
        fixtures: Option<FixtureArg>,
        #[arg(long, value_enum, default_value_t = ReferenceArg::Printed)]
        reference: ReferenceArg,
    },
    /// Development Index from Hurst-vector files or a bundled fixture.
    Devindex {
        /// `hurst_vector.json` files from earlier runs.
        vectors: Vec<PathBuf>,
        #[arg(long, value_enum)]
        fixtures: Option<FixtureArg>,
        #[arg(long, value_enum, default_value_t = DirectionArg::Canonical)]
        direction: DirectionArg,
        #[arg(long, value_enum, default_value_t = ReferenceArg::Printed)]
        reference: ReferenceArg,
        #[arg(long, default_value = "out")]
        output: PathBuf,
    },
    /// Write a synthetic price series in the ingest CSV format.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PipelineOpts {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    voices: Option<usize>,
    /// Wavelet significance level.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    tddma_window: Option<usize>,
    #[arg(long)]
    tddma_step: Option<usize>,
    #[arg(long, value_enum)]
    hurst_mode: Option<HurstModeArg>,
    #[arg(long, value_enum)]
    amplitude: Option<AmplitudeArg>,
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Fgn)]
    kind: KindArg,
    #[arg(long = "N", default_value_t = 8192)]
    n: usize,
    #[arg(long = "H", default_value_t = 0.5)]
    hurst: f64,
    /// Harmonic periods in trading days.
    #[arg(long = "period", value_delimiter = ',')]
    periods: Vec<f64>,
    /// One amplitude per period (default 1).
    #[arg(long = "amplitude", value_delimiter = ',')]
    amplitudes: Vec<f64>,
    /// One phase per period in radians (default 0).
    #[arg(long = "phase", value_delimiter = ',')]
    phases: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    noise_sigma: f64,
    /// Scale applied to the returns before they are turned into prices.
    #[arg(long, default_value_t = 0.01)]
    return_scale: f64,
    #[arg(long, env = "CYCLESCAN_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    Underdeveloped,
    Emerging,
    Developed,
}

impl From<GroupArg> for MarketGroup {
    fn from(g: GroupArg) -> Self {
        match g {
            GroupArg::Underdeveloped => MarketGroup::Underdeveloped,
            GroupArg::Emerging => MarketGroup::Emerging,
            GroupArg::Developed => MarketGroup::Developed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureArg {
    Table4,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ReferenceArg {
    Printed,
    Computed,
}

impl From<ReferenceArg> for ReferenceChoice {
    fn from(r: ReferenceArg) -> Self {
        match r {
            ReferenceArg::Printed => ReferenceChoice::Printed,
            ReferenceArg::Computed => ReferenceChoice::Computed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Canonical,
    Formula,
}

impl From<DirectionArg> for DirectionMode {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Canonical => DirectionMode::Canonical,
            DirectionArg::Formula => DirectionMode::Formula,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum HurstModeArg {
    ScaleRestricted,
    TddmaAverage,
}

#[derive(Clone, Copy, ValueEnum)]
enum AmplitudeArg {
    Abs,
    Real,
    Power,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    White,
    Fgn,
    Harmonic,
    Composite,
}

fn build_config(opts: &PipelineOpts, markets: &[String], jobs: Option<usize>) -> Result<RunConfig> {
    let mut cfg = match &opts.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = &opts.output {
        cfg.output = v.clone();
    }
    if let Some(v) = opts.lag {
        cfg.lag = v;
    }
    if let Some(v) = opts.voices {
        cfg.voices_per_octave = v;
    }
    if let Some(v) = opts.level {
        cfg.level = v;
    }
    if let Some(v) = opts.tddma_window {
        cfg.tddma_window = v;
    }
    if let Some(v) = opts.tddma_step {
        cfg.tddma_step = v;
    }
    if let Some(v) = opts.hurst_mode {
        cfg.hurst_mode = match v {
            HurstModeArg::ScaleRestricted => HurstMode::ScaleRestricted,
            HurstModeArg::TddmaAverage => HurstMode::TddmaAverage,
        };
    }
    if let Some(v) = opts.amplitude {
        cfg.amplitude = match v {
            AmplitudeArg::Abs => AmplitudeMode::Abs,
            AmplitudeArg::Real => AmplitudeMode::Real,
            AmplitudeArg::Power => AmplitudeMode::Power,
        };
    }
    if let Some(v) = opts.direction {
        cfg.direction = v.into();
    }
    if jobs.is_some() {
        cfg.jobs = jobs;
    }
    for spec in markets {
        let parts: Vec<&str> = spec.rsplitn(3, ':').collect();
        let [group, id, path] = parts[..] else {
            bail!("--market expects path:market_id:group, got '{spec}'");
        };
        cfg.inputs.push(MarketInput {
            path: PathBuf::from(path),
            market_id: id.to_string(),
            group: group.parse()?,
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn market_id_from(path: &std::path::Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "market".into())
}

fn open_out(out: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn synth_command(args: &SynthArgs) -> Result<()> {
    let harmonics: Vec<Harmonic> = args
        .periods
        .iter()
        .enumerate()
        .map(|(i, &period)| Harmonic {
            period,
            amplitude: args.amplitudes.get(i).copied().unwrap_or(1.0),
            phase: args.phases.get(i).copied().unwrap_or(0.0),
        })
        .collect();
    let kind = match args.kind {
        KindArg::White => SynthKind::White,
        KindArg::Fgn => SynthKind::Fgn,
        KindArg::Harmonic => SynthKind::Harmonic,
        KindArg::Composite => SynthKind::Composite,
    };
    let spec = SynthSpec {
        kind,
        n: args.n,
        hurst: args.hurst,
        harmonics,
        noise_sigma: args.noise_sigma,
        seed: args.seed,
    };
    let mut returns = synth::generate(&spec)?;
    returns.values.iter_mut().for_each(|v| *v *= args.return_scale);
    let start = chrono_start();
    let prices = ingest::prices_from_returns(&returns, start, 100.0);
    let mut w = open_out(&args.out)?;
    ingest::write_prices(&prices, &mut w)?;
    w.flush()?;
    Ok(())
}

fn chrono_start() -> cyclescan::ingest::NaiveDate {
    cyclescan::ingest::NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { input, lag, out } => {
            let prices = ingest::load_prices(&input, &market_id_from(&input))?;
            let returns = ingest::log_returns(&prices, lag)?;
            let mut w = open_out(&out)?;
            writeln!(w, "date,log_return")?;
            for (d, r) in prices.dates[lag..].iter().zip(&returns.values) {
                writeln!(w, "{d},{r}")?;
            }
            w.flush()?;
        }
        Command::Analyze {
            input,
            market,
            group,
            opts,
        } => {
            let cfg = build_config(&opts, &[], cli.jobs)?;
            let market_id = market.unwrap_or_else(|| market_id_from(&input));
            let input = MarketInput {
                path: input,
                market_id,
                group: group.map(Into::into).unwrap_or(MarketGroup::Emerging),
            };
            let report = match &cfg.jobs {
                Some(j) => rayon::ThreadPoolBuilder::new()
                    .num_threads(*j)
                    .build()?
                    .install(|| cyclescan_cli::run_market(&cfg, &input))?,
                None => cyclescan_cli::run_market(&cfg, &input)?,
            };
            println!(
                "{}: N={} H={:.3} peaks={} significant intervals={:?}",
                report.market_id,
                report.n_returns,
                report.global_hurst.h,
                report.peaks.len(),
                report
                    .intervals
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.is_some())
                    .map(|(i, _)| cyclescan::peaks::CYCLE_INTERVALS[i].roman())
                    .collect::<Vec<_>>()
            );
            println!("wrote {}", cfg.output.join(&report.market_id).display());
        }
        Command::Cohort {
            opts,
            markets,
            fixtures,
            reference,
        } => {
            let cfg = build_config(&opts, &markets, cli.jobs)?;
            if fixtures.is_some() {
                let run = cyclescan_cli::run_fixture(&cfg.output, cfg.direction, reference.into())?;
                print_fixture(&run);
            } else {
                let report = cyclescan_cli::run_cohort(&cfg)?;
                println!(
                    "group comparisons: {} run, {} skipped",
                    report.group_stats.entries.len(),
                    report.group_stats.skipped.len()
                );
                if let Some(d) = &report.devindex {
                    for m in &d.markets {
                        println!("{:<16} {:>7.3}  {}", m.market_id, m.index, m.class);
                    }
                }
                println!("wrote {}", cfg.output.join("cohort").display());
            }
        }
        Command::Devindex {
            vectors,
            fixtures,
            direction,
            reference,
            output,
        } => {
            if fixtures.is_some() {
                let run = cyclescan_cli::run_fixture(&output, direction.into(), reference.into())?;
                print_fixture(&run);
            } else {
                if vectors.len() < 2 {
                    bail!("devindex needs at least two hurst_vector.json files or --fixtures");
                }
                let report = cyclescan_cli::devindex_from_files(&vectors, direction.into())?;
                for m in &report.markets {
                    println!("{:<16} {:>7.3}  {}", m.market_id, m.index, m.class);
                }
                let dir = output.join("cohort");
                fs::create_dir_all(&dir)?;
                let path = dir.join("devindex.json");
                fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
                println!("wrote {}", path.display());
            }
        }
        Command::Synth(args) => synth_command(&args)?,
    }
    Ok(())
}

fn print_fixture(run: &cyclescan_cli::FixtureRun) {
    println!(
        "{:<12} {:>8} {:>10}  {:<15} {:<15}",
        "market", "index", "published", "class", "published"
    );
    for c in &run.comparison {
        println!(
            "{:<12} {:>8.3} {:>10.2}  {:<15} {:<15}{}",
            c.market_id,
            c.index,
            c.published_index,
            c.class.as_str(),
            c.published_class.as_str(),
            if c.borderline { " (borderline)" } else { "" }
        );
    }
    let b = &run.report.borders;
    println!("|Pi|max = {:.3}, borders = {:+.3} / {:+.3}", b.pi_max, b.lower, b.upper);
    println!(
        "max |index - published| = {:.3}, classes match: {}",
        run.max_index_error, run.classes_match
    );
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        let broken_pipe = e.chain().any(|c| {
            c.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
        });
        if broken_pipe {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
