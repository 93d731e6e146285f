use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use stigmergy::io::pipeline::{
    levels_file, parse_range, DateRange, DetectOutcome, EI_REPORT_CSV, HOTSPOTS_CSV,
};
use stigmergy::io::{generate_synthetic, Pipeline, PipelineConfig, SyntheticSpec};
use stigmergy::srf::ArchetypeKind;
use stigmergy::{Error, Result};

#[derive(Parser)]
#[command(
    name = "stigmergy",
    version,
    about = "Stigmergic hotspot discovery and unexpected-day detection"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (TOML with sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Find hotspots in trip records.
    Hotspots {
        /// Trip records (TLC columns), overriding the configuration.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Slots a cell must be relevant in (1 to 4).
        #[arg(long)]
        min_slots: Option<usize>,
        /// Trail intensity quantile a cell must reach to be relevant.
        #[arg(long)]
        quantile: Option<f64>,
    },
    /// Train the stigmergic perceptron, or one of its fields.
    Train {
        /// Retrain only this field, keeping the others.
        #[arg(long)]
        archetype: Option<ArchetypeKind>,
        /// Labeled windows (target, then samples) for the named field.
        #[arg(long, requires = "archetype")]
        data: Option<PathBuf>,
    },
    /// Turn each hotspot's days into activity-level series.
    Characterize {
        /// Hotspot id; all hotspots when absent.
        #[arg(long)]
        hotspot: Option<String>,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Cluster training days and flag unexpected evaluation days.
    Detect {
        /// Training days, FROM..TO.
        #[arg(long, value_parser = range)]
        train: Option<DateRange>,
        /// Evaluation days, FROM..TO.
        #[arg(long, value_parser = range)]
        eval: Option<DateRange>,
        /// Hotspot id, overriding the configuration.
        #[arg(long)]
        hotspot: Option<String>,
    },
    /// Generate synthetic trip records with known ground truth.
    Synth {
        /// Scene description (TOML); a two-hotspot default otherwise.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        days: Option<usize>,
        /// Defaults to trips.csv in the output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// All stages: hotspots, train, characterize, detect.
    Run {
        /// Trip records (TLC columns), overriding the configuration.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn range(s: &str) -> std::result::Result<DateRange, String> {
    parse_range(s).map_err(|e| e.to_string())
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_report(o: &DetectOutcome) {
    println!(
        "threshold (max training EI) {:.4}; {} training days; clusters {}",
        o.threshold,
        o.training_days,
        o.cluster_classes
            .iter()
            .map(|c| c.name())
            .collect::<Vec<_>>()
            .join("/")
    );
    println!(
        "{:>4}  {:<10}  {:>6}  {:<13}  flagged",
        "rank", "date", "EI", "expected"
    );
    for (i, r) in o.reports.iter().enumerate() {
        println!(
            "{:>4}  {}  {:>6.4}  {:<13}  {}",
            i + 1,
            r.date,
            r.ei,
            r.expected_class.name(),
            if r.flagged { "yes" } else { "" }
        );
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.common).map_err(|e| e.in_stage("config"))?;
    match cli.command {
        Command::Synth { spec, days, output } => {
            let mut s = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::Io {
                        path: p.clone(),
                        source: e,
                    });
                    text.and_then(|t| SyntheticSpec::from_toml(&t))
                        .map_err(|e| e.in_stage("synth"))?
                }
                None => SyntheticSpec::default(),
            };
            if let Some(d) = days {
                s.days = d;
            }
            let out = output.unwrap_or_else(|| cfg.output.dir.join("trips.csv"));
            let manifest_path = out.with_extension("manifest.txt");
            let write = || -> Result<()> {
                let mut rows = 0;
                stigmergy::io::write_file(&out, |w| {
                    let m = generate_synthetic(&s, cfg.seed, w).map_err(std::io::Error::other)?;
                    rows = m.rows;
                    let text = m.to_text();
                    std::fs::write(&manifest_path, text)
                })?;
                println!(
                    "wrote {rows} trips to {} ({})",
                    out.display(),
                    manifest_path.display()
                );
                Ok(())
            };
            write().map_err(|e| e.in_stage("synth"))
        }
        Command::Hotspots {
            input,
            min_slots,
            quantile,
        } => {
            if let Some(i) = input {
                cfg.input.events = Some(i);
            }
            if let Some(m) = min_slots {
                cfg.hotspots.min_slots = m;
            }
            if let Some(q) = quantile {
                cfg.hotspots.relevance_quantile = q;
            }
            cfg.validate().map_err(|e| e.in_stage("config"))?;
            let mut p = Pipeline::new(cfg).map_err(|e| e.in_stage("hotspots"))?;
            let o = p.hotspots()?;
            println!(
                "{} rows, {} dropped, {} events outside the area",
                o.ingest.rows, o.ingest.dropped, o.bins.out_of_bounds
            );
            let proj = p.projection();
            for h in &o.hotspots {
                let (lon, lat) = proj.unproject(h.centroid.0, h.centroid.1);
                println!(
                    "hotspot {}: {} cells around ({lon:.5}, {lat:.5})",
                    h.id,
                    h.cells.len()
                );
            }
            println!("wrote {}", p.path(HOTSPOTS_CSV).display());
            p.write_manifest()
        }
        Command::Train { archetype, data } => {
            let mut p = Pipeline::new(cfg).map_err(|e| e.in_stage("train"))?;
            let file = p.train(archetype, data.as_deref())?;
            println!(
                "trained {} fields into {}",
                file.fields.len(),
                p.out_dir().display()
            );
            p.write_manifest()
        }
        Command::Characterize { hotspot, from, to } => {
            let mut p = Pipeline::new(cfg).map_err(|e| e.in_stage("characterize"))?;
            for (id, series) in p.characterize(hotspot.as_deref(), from, to)? {
                println!(
                    "hotspot {id}: {} days -> {}",
                    series.len(),
                    p.path(&levels_file(&id)).display()
                );
            }
            p.write_manifest()
        }
        Command::Detect {
            train,
            eval,
            hotspot,
        } => {
            if let Some(h) = hotspot {
                cfg.detect.hotspot = h;
            }
            let mut p = Pipeline::new(cfg).map_err(|e| e.in_stage("detect"))?;
            let o = p.detect(train, eval)?;
            print_report(&o);
            println!("wrote {}", p.path(EI_REPORT_CSV).display());
            p.write_manifest()
        }
        Command::Run { input } => {
            if let Some(i) = input {
                cfg.input.events = Some(i);
            }
            let mut p = Pipeline::new(cfg).map_err(|e| e.in_stage("run"))?;
            let o = p.run()?;
            print_report(&o);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                log::debug!("caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
