//! Pipeline configuration, read from a sectioned `key = value` file (TOML).
//! Every key has a default, so an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::clustering::FcmConfig;
use crate::error::{Error, Result};
use crate::hotspot::{BoundingBox, ExtractParams, TrailParams};
use crate::perceptron::DaySimilarityBounds;
use crate::srf::{Archetype, DEFAULT_WINDOW};
use crate::training::{ParamBounds, SynthOptions, TrainingConfig};
use crate::transforms::SigmoidParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; stage seeds are derived from it unless set explicitly.
    pub seed: u64,
    pub input: InputConfig,
    pub area: AreaConfig,
    pub bins: BinsConfig,
    pub hotspots: HotspotsConfig,
    pub perceptron: PerceptronConfig,
    pub training: TrainingSection,
    pub day_similarity: DaySimilaritySection,
    pub detect: DetectConfig,
    pub output: OutputConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            input: InputConfig::default(),
            area: AreaConfig::default(),
            bins: BinsConfig::default(),
            hotspots: HotspotsConfig::default(),
            perceptron: PerceptronConfig::default(),
            training: TrainingSection::default(),
            day_similarity: DaySimilaritySection::default(),
            detect: DetectConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Trip records in TLC column layout.
    pub events: Option<PathBuf>,
    /// Archetype template CSV; the built-in ramps are used when absent.
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for AreaConfig {
    /// Manhattan, south tip to Harlem.
    fn default() -> Self {
        Self {
            lon_min: -74.02,
            lon_max: -73.93,
            lat_min: 40.70,
            lat_max: 40.82,
            nx: 200,
            ny: 200,
        }
    }
}

impl AreaConfig {
    pub fn bbox(&self) -> BoundingBox {
        BoundingBox {
            lon_min: self.lon_min,
            lon_max: self.lon_max,
            lat_min: self.lat_min,
            lat_max: self.lat_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinsConfig {
    pub step_minutes: u32,
}

impl Default for BinsConfig {
    fn default() -> Self {
        Self { step_minutes: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HotspotsConfig {
    pub smooth_steepness: f64,
    pub smooth_threshold: f64,
    /// Cone base radius, in grid cells.
    pub mark_radius_cells: f64,
    pub evaporation: f64,
    pub relevance_quantile: f64,
    pub min_slots: usize,
    pub min_area: usize,
}

impl Default for HotspotsConfig {
    fn default() -> Self {
        Self {
            smooth_steepness: 10.0,
            smooth_threshold: 0.1,
            mark_radius_cells: 2.0,
            evaporation: 0.05,
            relevance_quantile: 0.9,
            min_slots: 4,
            min_area: 4,
        }
    }
}

impl HotspotsConfig {
    pub fn trail_params(&self, cell_size: f64) -> TrailParams {
        TrailParams {
            smooth: SigmoidParams::new(self.smooth_steepness, self.smooth_threshold),
            mark_radius: self.mark_radius_cells * cell_size,
            evaporation: self.evaporation,
        }
    }

    pub fn extract_params(&self) -> ExtractParams {
        ExtractParams {
            relevance_quantile: self.relevance_quantile,
            min_slots: self.min_slots,
            min_area: self.min_area,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptronConfig {
    pub window: usize,
    pub hop: usize,
}

impl Default for PerceptronConfig {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            hop: DEFAULT_WINDOW / 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub seed: Option<u64>,
    pub sweep_points: usize,
    pub sweep_population: usize,
    pub sweep_generations: usize,
    pub population: usize,
    pub differential_weight: f64,
    pub crossover: f64,
    pub generations: usize,
    pub windows_per_class: usize,
    pub noise_amp: f64,
    pub max_shift: usize,
    pub bounds: ParamBounds,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        let s = SynthOptions::default();
        Self {
            seed: None,
            sweep_points: t.sweep_points,
            sweep_population: t.sweep_population,
            sweep_generations: t.sweep_generations,
            population: t.population,
            differential_weight: t.differential_weight,
            crossover: t.crossover,
            generations: t.generations,
            windows_per_class: s.count,
            noise_amp: s.noise_amp,
            max_shift: s.max_shift,
            bounds: t.bounds,
        }
    }
}

impl TrainingSection {
    pub fn training_config(&self, root_seed: u64) -> TrainingConfig {
        TrainingConfig {
            bounds: self.bounds,
            sweep_points: self.sweep_points,
            sweep_population: self.sweep_population,
            sweep_generations: self.sweep_generations,
            population: self.population,
            differential_weight: self.differential_weight,
            crossover: self.crossover,
            generations: self.generations,
            seed: self.seed.unwrap_or(root_seed),
        }
    }

    pub fn synth_options(&self) -> SynthOptions {
        SynthOptions {
            count: self.windows_per_class,
            noise_amp: self.noise_amp,
            max_shift: self.max_shift,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaySimilaritySection {
    pub seed: Option<u64>,
    pub population: usize,
    pub generations: usize,
    /// Upper limit on labeled training pairs; larger sets are subsampled.
    pub max_pairs: usize,
    pub bounds: DaySimilarityBounds,
}

impl Default for DaySimilaritySection {
    fn default() -> Self {
        Self {
            seed: None,
            population: 20,
            generations: 100,
            max_pairs: 1296,
            bounds: DaySimilarityBounds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectConfig {
    /// Hotspot whose days are clustered.
    pub hotspot: String,
    #[serde(with = "super::toml_date::opt")]
    pub train_from: Option<NaiveDate>,
    #[serde(with = "super::toml_date::opt")]
    pub train_to: Option<NaiveDate>,
    #[serde(with = "super::toml_date::opt")]
    pub eval_from: Option<NaiveDate>,
    #[serde(with = "super::toml_date::opt")]
    pub eval_to: Option<NaiveDate>,
    /// When no ranges are given, this many leading days form the training set.
    pub train_days: usize,
    pub clusters: usize,
    pub fuzzifier: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: Option<u64>,
}

impl Default for DetectConfig {
    fn default() -> Self {
        let f = FcmConfig::default();
        Self {
            hotspot: "A".into(),
            train_from: None,
            train_to: None,
            eval_from: None,
            eval_to: None,
            train_days: 28,
            clusters: f.clusters,
            fuzzifier: f.fuzzifier,
            tol: f.tol,
            max_iter: f.max_iter,
            seed: None,
        }
    }
}

impl DetectConfig {
    pub fn fcm(&self, root_seed: u64) -> FcmConfig {
        FcmConfig {
            clusters: self.clusters,
            fuzzifier: self.fuzzifier,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed.unwrap_or(root_seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Also write each slot trail as a dense CSV matrix.
    pub trail_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trail_csv: false,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative input paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input.events, &mut cfg.input.templates]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        self.area.bbox().validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.area.nx < 2 || self.area.ny < 2 {
            return bad(format!(
                "grid {}x{} is too small",
                self.area.nx, self.area.ny
            ));
        }
        if self.bins.step_minutes == 0 || 1440 % self.bins.step_minutes != 0 {
            return bad(format!(
                "step of {} minutes does not divide a day",
                self.bins.step_minutes
            ));
        }
        let h = &self.hotspots;
        if !(h.mark_radius_cells > 0.0) || !(h.evaporation >= 0.0) {
            return bad("hotspot mark radius must be positive and evaporation non-negative".into());
        }
        if !(0.0..=1.0).contains(&h.relevance_quantile) || !(1..=4).contains(&h.min_slots) {
            return bad("relevance_quantile must lie in [0, 1] and min_slots in 1..=4".into());
        }
        let p = &self.perceptron;
        if p.window < 2 || p.hop == 0 || p.window > 1440 / self.bins.step_minutes as usize {
            return bad(format!(
                "window {} / hop {} do not fit a day",
                p.window, p.hop
            ));
        }
        if self.detect.clusters < 2 || !(self.detect.fuzzifier > 1.0) {
            return bad("clustering needs at least 2 clusters and fuzzifier > 1".into());
        }
        if self.day_similarity.max_pairs == 0 {
            return bad("max_pairs must be positive".into());
        }
        Ok(())
    }

    pub fn archetypes(&self) -> Result<Vec<Archetype>> {
        let set = match &self.input.templates {
            Some(p) => crate::srf::load_templates(p)?,
            None => Archetype::standard_set(self.perceptron.window),
        };
        if set[0].len() != self.perceptron.window {
            return Err(Error::Config(format!(
                "templates have {} samples but the window is {}",
                set[0].len(),
                self.perceptron.window
            )));
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(
            PipelineConfig::from_toml("").unwrap(),
            PipelineConfig::default()
        );
    }

    #[test]
    fn round_trip() {
        let mut cfg = PipelineConfig {
            seed: 42,
            ..PipelineConfig::default()
        };
        cfg.detect.train_from = NaiveDate::from_ymd_opt(2015, 2, 1);
        cfg.input.events = Some("trips.csv".into());
        assert_eq!(PipelineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = PipelineConfig::from_toml(
            "seed = 9\n[area]\nnx = 50\n[hotspots]\nmin_slots = 2\n[detect]\ntrain_from = 2015-02-01\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.area.nx, 50);
        assert_eq!(cfg.area.ny, 200);
        assert_eq!(cfg.hotspots.min_slots, 2);
        assert_eq!(cfg.detect.train_from, NaiveDate::from_ymd_opt(2015, 2, 1));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(PipelineConfig::from_toml("[area]\nnxx = 3\n").is_err());
        assert!(PipelineConfig::from_toml("[area]\nlon_min = 10.0\nlon_max = 5.0\n").is_err());
        assert!(PipelineConfig::from_toml("[bins]\nstep_minutes = 7\n").is_err());
        assert!(PipelineConfig::from_toml("[hotspots]\nmin_slots = 5\n").is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[input]\nevents = \"trips.csv\"\n").unwrap();
        let cfg = PipelineConfig::load(&path).unwrap();
        assert_eq!(cfg.input.events.unwrap(), dir.path().join("trips.csv"));
    }
}
