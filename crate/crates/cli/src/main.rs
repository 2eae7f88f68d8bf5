use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mobility_core::borders::SamplingOptions;
use mobility_core::distributions::RegionAttribution;
use mobility_core::ingest::StudyWindow;
use mobility_core::pipeline::{
    self, Artifact, BorderOptions, CommunityOptions, ModelKind, RunConfig, SchemeSpec, StatsKind,
    StatsOptions,
};
use mobility_core::synth::SocietySpec;
use mobility_core::ErrorKind;

#[derive(Parser)]
#[command(name = "mobility", version, about = "Mobility statistics, flux models and border strength from CDR streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Antenna registry CSV (antenna_id,lon,lat).
    #[arg(long)]
    antennas: PathBuf,
    /// Population raster CSV with its JSON sidecar.
    #[arg(long)]
    population: Option<PathBuf>,
    /// Call records CSV (timestamp,user_id,antenna_id).
    #[arg(long)]
    cdr: Option<PathBuf>,
    /// Region scheme as name=path; repeatable.
    #[arg(long = "partition", value_name = "NAME=PATH")]
    partitions: Vec<String>,
    /// Study window as start:end unix seconds, end exclusive.
    #[arg(long, value_name = "START:END")]
    window: Option<String>,
    /// Seed for community detection; recorded in every report.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Local time offset in hours for time-of-day profiles.
    #[arg(long = "utc-offset", default_value_t = 0.0, allow_negative_numbers = true)]
    utc_offset: f64,
    /// Antennas closer than this many metres are merged.
    #[arg(long = "colocation-tol", default_value_t = pipeline::DEFAULT_COLOCATION_TOL_M)]
    colocation_tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Voronoi cells and population-assigned registry.
    Tessellate {
        #[command(flatten)]
        common: Common,
    },
    /// Jump, gyration and time-of-day statistics.
    Stats {
        #[command(flatten)]
        common: Common,
        #[arg(value_enum)]
        which: Which,
        /// Per-region jump fits under this scheme.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long, value_enum, default_value = "origin")]
        attribution: Attribution,
        #[arg(long, default_value_t = 10)]
        bins_per_decade: usize,
        #[arg(long, default_value_t = 40)]
        window_min: u32,
        #[arg(long, default_value_t = 10)]
        step_min: u32,
        /// Include weekend days in profiles.
        #[arg(long)]
        all_days: bool,
    },
    /// Community detection and comparison with supplied schemes.
    Communities {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        /// Find sub-communities inside each region of this scheme.
        #[arg(long)]
        within: Option<String>,
        /// Schemes to compare against; defaults to every supplied partition.
        #[arg(long)]
        compare: Vec<String>,
    },
    /// Gravity or radiation flux model per scheme.
    Model {
        #[command(flatten)]
        common: Common,
        #[arg(value_enum)]
        model: Model,
        /// Scheme as name or name:level1; repeatable.
        #[arg(long = "scheme", required = true)]
        schemes: Vec<String>,
        #[arg(long, default_value_t = 5)]
        bins_per_decade: usize,
    },
    /// Intra versus inter level-1 bias of both flux models.
    Affinity {
        #[command(flatten)]
        common: Common,
        /// Scheme as name:level1; repeatable.
        #[arg(long = "scheme", required = true)]
        schemes: Vec<String>,
    },
    /// Node strength field and its profile along region borders.
    Borders {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scheme: String,
        /// Regions whose borders are sampled as the capital group; repeatable.
        #[arg(long = "capital")]
        capital: Vec<String>,
        #[arg(long, default_value_t = 5.0)]
        spacing_km: f64,
        #[arg(long, default_value_t = 8)]
        neighbors: usize,
        #[arg(long, default_value_t = 0.05)]
        bin_width: f64,
    },
    /// Generate a synthetic society with ground truth.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// JSON society spec; fields left out take their defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Jumps,
    Gyration,
    Profiles,
    BinnedProfiles,
}

#[derive(Clone, Copy, ValueEnum)]
enum Attribution {
    Origin,
    Destination,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Gravity,
    Radiation,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Gravity => ModelKind::Gravity,
            Model::Radiation => ModelKind::Radiation,
        }
    }
}

fn parse_window(s: &str) -> anyhow::Result<StudyWindow> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("window {s:?} must be start:end"))?;
    let start = a.trim().parse().with_context(|| format!("window start {a:?}"))?;
    let end = b.trim().parse().with_context(|| format!("window end {b:?}"))?;
    Ok(StudyWindow::new(start, end)?)
}

fn run_config(c: &Common) -> anyhow::Result<RunConfig> {
    let mut partitions = Vec::new();
    for p in &c.partitions {
        let (name, path) = p
            .split_once('=')
            .ok_or_else(|| anyhow!("partition {p:?} must be name=path"))?;
        if name.is_empty() || path.is_empty() {
            bail!("partition {p:?} must be name=path");
        }
        partitions.push((name.to_owned(), PathBuf::from(path)));
    }
    let window = c.window.as_deref().map(parse_window).transpose()?;
    let cfg = RunConfig {
        antennas: c.antennas.clone(),
        population: c.population.clone(),
        cdr: c.cdr.clone(),
        partitions,
        window,
        seed: c.seed,
        utc_offset_hours: c.utc_offset,
        colocation_tol_m: c.colocation_tol,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn schemes(raw: &[String]) -> anyhow::Result<Vec<SchemeSpec>> {
    Ok(raw.iter().map(|s| SchemeSpec::parse(s)).collect::<Result<_, _>>()?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (out, artifacts): (PathBuf, Vec<Artifact>) = match cli.command {
        Command::Tessellate { common } => (common.out.clone(), pipeline::tessellate(&run_config(&common)?)?),
        Command::Stats {
            common,
            which,
            scheme,
            attribution,
            bins_per_decade,
            window_min,
            step_min,
            all_days,
        } => {
            let which = match which {
                Which::Jumps => StatsKind::Jumps,
                Which::Gyration => StatsKind::Gyration,
                Which::Profiles => StatsKind::Profiles,
                Which::BinnedProfiles => StatsKind::BinnedProfiles,
            };
            let opts = StatsOptions {
                bins_per_decade,
                scheme,
                attribution: match attribution {
                    Attribution::Origin => RegionAttribution::Origin,
                    Attribution::Destination => RegionAttribution::Destination,
                    Attribution::Both => RegionAttribution::Both,
                },
                window_min,
                step_min,
                weekdays_only: !all_days,
                ..StatsOptions::default()
            };
            (common.out.clone(), pipeline::stats(&run_config(&common)?, which, &opts)?)
        }
        Command::Communities {
            common,
            restarts,
            within,
            compare,
        } => {
            let cfg = run_config(&common)?;
            let compare = if compare.is_empty() {
                cfg.partitions.iter().map(|(n, _)| n.clone()).collect()
            } else {
                compare
            };
            let opts = CommunityOptions {
                restarts,
                within,
                compare,
            };
            (common.out.clone(), pipeline::communities(&cfg, &opts)?)
        }
        Command::Model {
            common,
            model,
            schemes: raw,
            bins_per_decade,
        } => {
            let cfg = run_config(&common)?;
            (common.out.clone(), pipeline::model(&cfg, model.into(), &schemes(&raw)?, bins_per_decade)?)
        }
        Command::Affinity { common, schemes: raw } => {
            let cfg = run_config(&common)?;
            (common.out.clone(), pipeline::affinity(&cfg, &schemes(&raw)?)?)
        }
        Command::Borders {
            common,
            scheme,
            capital,
            spacing_km,
            neighbors,
            bin_width,
        } => {
            let cfg = run_config(&common)?;
            let opts = BorderOptions {
                scheme,
                capital_regions: capital,
                sampling: SamplingOptions {
                    spacing_km,
                    k_neighbors: neighbors,
                },
                bin_width,
            };
            (common.out.clone(), pipeline::borders(&cfg, &opts)?)
        }
        Command::Synth {
            seed,
            out,
            spec,
            users,
            days,
            rho,
        } => {
            let mut s = match spec {
                Some(p) => pipeline::load_society_spec(&p)?,
                None => SocietySpec::default(),
            };
            s.seed = seed;
            if let Some(u) = users {
                s.n_users = u;
            }
            if let Some(d) = days {
                s.days = d;
            }
            if let Some(r) = rho {
                s.rho = r;
            }
            (out, pipeline::synth(&s)?)
        }
    };
    pipeline::write_artifacts(&out, &artifacts)?;
    for a in &artifacts {
        println!("{}", out.join(&a.name).display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<mobility_core::Error>().map(|e| e.kind()) {
        Some(ErrorKind::Parse) => 3,
        Some(ErrorKind::Numerical) => 4,
        _ => 2,
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MOBILITY_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!("MOBILITY_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
