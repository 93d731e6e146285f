//! The staged pipeline: hotspots → train → characterize → detect.
//!
//! Stages communicate through files in the output directory, so each can be
//! rerun alone. Failures carry the stage name.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::PipelineConfig;
use super::ingest::{IngestStats, TripReader};
use super::{
    read_hotspots_csv, read_labeled_windows, read_levels_csv, write_file, write_hotspots_csv,
    write_levels_csv, PerceptronFile,
};
use crate::clustering::{
    sort_reports, write_ei_csv, write_membership_csv, write_membership_pgm, AnomalyDetector,
    AnomalyReport, DayClass,
};
use crate::de::DeConfig;
use crate::error::{Error, Result};
use crate::hotspot::{
    extract_hotspots, slot_trails, BinStats, Bins, Hotspot, HotspotSeries, Projection,
};
use crate::perceptron::{train_day_similarity, ActivityLevelSeries, DaySimilaritySrf, LabeledPair};
use crate::srf::{ArchetypeKind, Srf};
use crate::trail::Grid2D;
use crate::training::{
    global_training, local_training, mix_seed, synthesize_training_set, train_perceptron,
    training_manifest, FieldReport,
};

pub const HOTSPOTS_CSV: &str = "hotspots.csv";
pub const PERCEPTRON_TOML: &str = "perceptron.toml";
pub const TRAINING_MANIFEST: &str = "training_manifest.txt";
pub const DAY_SIMILARITY_TOML: &str = "day_similarity.toml";
pub const MEMBERSHIP_CSV: &str = "membership.csv";
pub const MEMBERSHIP_PGM: &str = "membership.pgm";
pub const EI_REPORT_CSV: &str = "ei_report.csv";
pub const RUN_MANIFEST: &str = "run_manifest.txt";

pub fn levels_file(hotspot: &str) -> String {
    format!("activity_levels_{hotspot}.csv")
}

/// Inclusive date range.
pub type DateRange = (NaiveDate, NaiveDate);

/// Parses `YYYY-MM-DD..YYYY-MM-DD` (inclusive).
pub fn parse_range(s: &str) -> Result<DateRange> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::Config(format!("range '{s}' is not of the form FROM..TO")))?;
    let parse = |t: &str| {
        t.trim()
            .parse::<NaiveDate>()
            .map_err(|e| Error::Config(format!("bad date '{t}': {e}")))
    };
    let (a, b) = (parse(a)?, parse(b)?);
    if a > b {
        return Err(Error::Config(format!("range '{s}' ends before it starts")));
    }
    Ok((a, b))
}

#[derive(Debug, Clone)]
pub struct HotspotOutcome {
    pub hotspots: Vec<Hotspot>,
    pub ingest: IngestStats,
    pub bins: BinStats,
}

#[derive(Debug, Clone)]
pub struct DetectOutcome {
    /// Evaluation days, highest EI first.
    pub reports: Vec<AnomalyReport>,
    pub threshold: f64,
    pub dsrf: DaySimilaritySrf,
    pub dsrf_fitness: f64,
    pub cluster_classes: Vec<DayClass>,
    pub training_days: usize,
}

impl DetectOutcome {
    pub fn flagged(&self) -> impl Iterator<Item = &AnomalyReport> {
        self.reports.iter().filter(|r| r.flagged)
    }
}

pub struct Pipeline {
    pub config: PipelineConfig,
    out: PathBuf,
    timings: Vec<(&'static str, f64)>,
    notes: Vec<(String, String)>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let out = config.output.dir.clone();
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        Ok(Self {
            config,
            out,
            timings: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn projection(&self) -> Projection {
        self.config.area.bbox().projection()
    }

    pub fn grid(&self) -> Result<Grid2D> {
        self.config
            .area
            .bbox()
            .grid(self.config.area.nx, self.config.area.ny)
    }

    fn note(&mut self, key: impl Into<String>, value: impl ToString) {
        self.notes.push((key.into(), value.to_string()));
    }

    fn timed<T>(
        &mut self,
        stage: &'static str,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> Result<T> {
        let t0 = Instant::now();
        let r = f(self).map_err(|e| e.in_stage(stage));
        self.timings.push((stage, t0.elapsed().as_secs_f64()));
        r
    }

    fn events_path(&self) -> Result<PathBuf> {
        self.config
            .input
            .events
            .clone()
            .ok_or_else(|| Error::Config("no input events file configured".into()))
    }

    /// Discovers hotspots and writes `hotspots.csv` and one PGM per slot trail.
    pub fn hotspots(&mut self) -> Result<HotspotOutcome> {
        self.timed("hotspots", |p| p.hotspots_inner())
    }

    fn hotspots_inner(&mut self) -> Result<HotspotOutcome> {
        let path = self.events_path()?;
        let grid = self.grid()?;
        let proj = self.projection();
        let mut bins = Bins::new(grid, self.config.bins.step_minutes);
        let ingest = TripReader::from_path(&path)?.for_each_event(&proj, |e| bins.add(e))?;
        log::info!(
            "ingested {} rows ({} dropped), {} events",
            ingest.rows,
            ingest.dropped,
            ingest.events
        );
        let cell =
            ((grid.x1 - grid.x0) / grid.nx as f64 * (grid.y1 - grid.y0) / grid.ny as f64).sqrt();
        let params = self.config.hotspots.trail_params(cell);
        let trails = slot_trails(&bins, &params)?;
        for (slot, trail) in &trails {
            write_file(&self.path(&format!("trail_{slot}.pgm")), |w| {
                trail.write_pgm(w)
            })?;
            if self.config.output.trail_csv {
                write_file(&self.path(&format!("trail_{slot}.csv")), |w| {
                    trail.write_csv(w)
                })?;
            }
        }
        let only: Vec<_> = trails.into_iter().map(|(_, t)| t).collect();
        let hotspots = extract_hotspots(&only, &self.config.hotspots.extract_params())?;
        log::info!("found {} hotspots", hotspots.len());
        write_file(&self.path(HOTSPOTS_CSV), |w| {
            write_hotspots_csv(w, &hotspots, &proj)
        })?;
        let stats = bins.stats();
        self.note("rows", ingest.rows);
        self.note("rows_dropped", ingest.dropped);
        self.note("events", ingest.events);
        self.note("events_out_of_bounds", stats.out_of_bounds);
        self.note("hotspots", hotspots.len());
        Ok(HotspotOutcome {
            hotspots,
            ingest,
            bins: stats,
        })
    }

    /// Trains the perceptron. With `archetype`, only that field is trained
    /// and merged into an existing `perceptron.toml`; with `data`, labeled
    /// windows are read from that CSV instead of being synthesized.
    pub fn train(
        &mut self,
        archetype: Option<ArchetypeKind>,
        data: Option<&Path>,
    ) -> Result<PerceptronFile> {
        self.timed("train", |p| p.train_inner(archetype, data))
    }

    fn train_inner(
        &mut self,
        only: Option<ArchetypeKind>,
        data: Option<&Path>,
    ) -> Result<PerceptronFile> {
        let archetypes = self.config.archetypes()?;
        let cfg = self.config.training.training_config(self.config.seed);
        let synth = self.config.training.synth_options();
        let hop = self.config.perceptron.hop;
        if data.is_some() && only.is_none() {
            return Err(Error::Config(
                "labeled data trains a single field; name its archetype".into(),
            ));
        }
        let (file, reports) = if only.is_none() && data.is_none() {
            let (sp, reports) = train_perceptron(&archetypes, synth, &cfg, hop)?;
            (PerceptronFile::from_perceptron(&sp), reports)
        } else {
            let kinds: Vec<ArchetypeKind> = only.into_iter().collect();
            let existing = self.path(PERCEPTRON_TOML);
            let mut file = if existing.exists() {
                PerceptronFile::load(&existing)?
            } else {
                PerceptronFile {
                    window: self.config.perceptron.window,
                    hop,
                    fields: Vec::new(),
                }
            };
            let external = data.map(read_labeled_windows).transpose()?;
            let mut reports = Vec::new();
            for kind in kinds {
                let a = &archetypes[kind.rank() - 1];
                let stream = kind.rank() as u64;
                let dataset = match &external {
                    Some(d) => d.clone(),
                    None => synthesize_training_set(
                        &archetypes,
                        kind,
                        synth,
                        mix_seed(cfg.seed, stream),
                    )?,
                };
                let field_cfg = crate::training::TrainingConfig {
                    seed: mix_seed(cfg.seed, 100 + stream),
                    ..cfg.clone()
                };
                let sweep = global_training(a, &dataset, &field_cfg)?;
                let local = local_training(a, &dataset, sweep.interval, &field_cfg)?;
                file.upsert(&Srf::new(local.params, a.clone())?);
                reports.push(FieldReport {
                    kind,
                    interval: sweep.interval,
                    params: local.params,
                    fitness: local.fitness,
                });
            }
            (file, reports)
        };
        file.save(&self.path(PERCEPTRON_TOML))?;
        let mut manifest = training_manifest(&cfg, &synth, &reports);
        if let Some(d) = data {
            let _ = writeln!(manifest, "data={}", d.display());
        }
        write_file(&self.path(TRAINING_MANIFEST), |w| {
            w.write_all(manifest.as_bytes())
        })?;
        for r in &reports {
            self.note(format!("train.{}.fitness", r.kind.name()), r.fitness);
        }
        Ok(file)
    }

    /// Activity-level series per hotspot and day, written to
    /// `activity_levels_<id>.csv`. Needs `hotspots.csv` and `perceptron.toml`.
    pub fn characterize(
        &mut self,
        hotspot: Option<&str>,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Result<Vec<(String, Vec<ActivityLevelSeries>)>> {
        self.timed("characterize", |p| p.characterize_inner(hotspot, from, to))
    }

    fn characterize_inner(
        &mut self,
        hotspot: Option<&str>,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Result<Vec<(String, Vec<ActivityLevelSeries>)>> {
        let proj = self.projection();
        let mut hotspots = read_hotspots_csv(&self.path(HOTSPOTS_CSV), &proj)?;
        if let Some(id) = hotspot {
            hotspots.retain(|h| h.id == id);
            if hotspots.is_empty() {
                return Err(Error::Config(format!(
                    "no hotspot '{id}' in {HOTSPOTS_CSV}"
                )));
            }
        }
        if hotspots.is_empty() {
            return Err(Error::EmptyInput("hotspots"));
        }
        let sp = PerceptronFile::load(&self.path(PERCEPTRON_TOML))?.perceptron()?;
        let mut series = HotspotSeries::new(self.grid()?, self.config.bins.step_minutes, &hotspots);
        let ingest = TripReader::from_path(&self.events_path()?)?
            .for_each_event(&proj, |e| series.add(e))?;
        log::info!(
            "characterizing {} hotspots from {} rows",
            hotspots.len(),
            ingest.rows
        );
        let mut out = Vec::new();
        for (k, h) in hotspots.iter().enumerate() {
            let days = series.normalized(k, from, to);
            let empty = days.iter().filter(|d| d.empty).count();
            let levels = days
                .iter()
                .map(|d| sp.characterize_day(d.day, &d.samples))
                .collect::<Result<Vec<_>>>()?;
            write_file(&self.path(&levels_file(&h.id)), |w| {
                write_levels_csv(w, &levels)
            })?;
            self.note(format!("characterize.{}.days", h.id), levels.len());
            self.note(format!("characterize.{}.empty_days", h.id), empty);
            out.push((h.id.clone(), levels));
        }
        Ok(out)
    }

    /// Clusters training days of the configured hotspot and scores the
    /// evaluation days. Ranges fall back to the config, then to a split after
    /// `detect.train_days` days.
    pub fn detect(
        &mut self,
        train: Option<DateRange>,
        eval: Option<DateRange>,
    ) -> Result<DetectOutcome> {
        self.timed("detect", |p| p.detect_inner(train, eval))
    }

    fn detect_inner(
        &mut self,
        train: Option<DateRange>,
        eval: Option<DateRange>,
    ) -> Result<DetectOutcome> {
        let d = self.config.detect.clone();
        let all = read_levels_csv(&self.path(&levels_file(&d.hotspot)))?;
        if all.is_empty() {
            return Err(Error::EmptyInput("activity levels"));
        }
        let first = all[0].day;
        let split = first + chrono::Duration::days(d.train_days as i64);
        let last = all[all.len() - 1].day;
        let train = train
            .or(d.train_from.zip(d.train_to))
            .unwrap_or((first, split - chrono::Duration::days(1)));
        let eval = eval.or(d.eval_from.zip(d.eval_to)).unwrap_or((split, last));
        let within = |r: DateRange| -> Vec<ActivityLevelSeries> {
            all.iter()
                .filter(|s| s.day >= r.0 && s.day <= r.1)
                .cloned()
                .collect()
        };
        let training = within(train);
        let evaluation = within(eval);
        if training.len() < d.clusters {
            return Err(Error::Config(format!(
                "{} training days cannot form {} clusters",
                training.len(),
                d.clusters
            )));
        }

        let pairs = self.labeled_pairs(&training);
        let ds = &self.config.day_similarity;
        let mut de = DeConfig::new(Vec::new(), ds.seed.unwrap_or(mix_seed(self.config.seed, 7)));
        de.population = ds.population;
        de.generations = ds.generations;
        let (dsrf, dsrf_fitness) = train_day_similarity(&pairs, ds.bounds, de)?;
        log::info!(
            "day-similarity fitness {dsrf_fitness:.5} over {} pairs",
            pairs.len()
        );
        let text = toml::to_string(&dsrf).map_err(|e| Error::Config(e.to_string()))?;
        write_file(&self.path(DAY_SIMILARITY_TOML), |w| {
            w.write_all(text.as_bytes())
        })?;

        let detector = AnomalyDetector::fit(training, dsrf, &d.fcm(self.config.seed))?;
        let mut reports = detector.evaluate_all(&evaluation)?;
        // membership matrix over every day, in date order
        let mut all_days = detector.evaluate_all(&detector.training)?;
        all_days.extend(reports.iter().cloned());
        write_file(&self.path(MEMBERSHIP_CSV), |w| {
            write_membership_csv(w, &all_days, &detector.cluster_classes)
        })?;
        write_file(&self.path(MEMBERSHIP_PGM), |w| {
            write_membership_pgm(w, &all_days, detector.model.clusters())
        })?;
        sort_reports(&mut reports);
        write_file(&self.path(EI_REPORT_CSV), |w| write_ei_csv(w, &reports))?;
        let outcome = DetectOutcome {
            threshold: detector.threshold,
            dsrf,
            dsrf_fitness,
            cluster_classes: detector.cluster_classes.clone(),
            training_days: detector.training.len(),
            reports,
        };
        self.note("detect.hotspot", &d.hotspot);
        self.note("detect.train", format!("{}..{}", train.0, train.1));
        self.note("detect.eval", format!("{}..{}", eval.0, eval.1));
        self.note("detect.threshold", outcome.threshold);
        self.note("detect.flagged", outcome.flagged().count());
        Ok(outcome)
    }

    /// Every pair of training days, target 1 when the calendar puts both in
    /// the same class; subsampled deterministically above `max_pairs`.
    fn labeled_pairs(&self, training: &[ActivityLevelSeries]) -> Vec<LabeledPair> {
        let mut pairs = Vec::new();
        for (i, a) in training.iter().enumerate() {
            for b in &training[i + 1..] {
                let same = DayClass::of_date(a.day) == DayClass::of_date(b.day);
                pairs.push(LabeledPair {
                    a: a.levels.clone(),
                    b: b.levels.clone(),
                    target: if same { 1.0 } else { 0.0 },
                });
            }
        }
        let cap = self.config.day_similarity.max_pairs;
        if pairs.len() > cap {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.config.seed, 11));
            pairs.shuffle(&mut rng);
            pairs.truncate(cap);
        }
        pairs
    }

    /// All four stages in order.
    pub fn run(&mut self) -> Result<DetectOutcome> {
        let found = self.hotspots()?;
        if found.hotspots.is_empty() {
            return Err(Error::EmptyInput("hotspots").in_stage("hotspots"));
        }
        if !found
            .hotspots
            .iter()
            .any(|h| h.id == self.config.detect.hotspot)
        {
            return Err(Error::Config(format!(
                "detect.hotspot '{}' was not found",
                self.config.detect.hotspot
            ))
            .in_stage("detect"));
        }
        self.train(None, None)?;
        self.characterize(None, None, None)?;
        let outcome = self.detect(None, None)?;
        self.write_manifest()?;
        Ok(outcome)
    }

    /// `run_manifest.txt`: version, seeds, counts and stage timings.
    pub fn write_manifest(&self) -> Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "version={}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "seed={}", self.config.seed);
        if let Some(p) = &self.config.input.events {
            let _ = writeln!(s, "input={}", p.display());
        }
        for (k, v) in &self.notes {
            let _ = writeln!(s, "{k}={v}");
        }
        for (stage, secs) in &self.timings {
            let _ = writeln!(s, "time.{stage}={secs:.3}");
        }
        let path = self.path(RUN_MANIFEST);
        write_file(&path, |w| w.write_all(s.as_bytes()))
    }
}
