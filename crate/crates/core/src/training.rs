//! Adapting receptive-field parameters to labeled windows.
//!
//! Training a perceptron is done in two phases per field. The global phase
//! sweeps the evaporation rate (the most sensitive parameter) with the other
//! parameters optimized briefly at each sweep point, and keeps the narrowest
//! interval covering the sweep points whose quality lies at or above the 90th
//! percentile. The local phase then runs differential evolution over all
//! eight parameters with evaporation confined to that interval.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::de::{differential_evolution, DeConfig};
use crate::error::{Error, Result};
use crate::perceptron::StigmergicPerceptron;
use crate::srf::{Archetype, ArchetypeKind, Srf, SrfParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledWindow {
    pub window: Vec<f64>,
    /// 1 when the window exhibits the archetype, 0 otherwise.
    pub target: f64,
    /// Archetype the window was generated from, when known.
    #[serde(default)]
    pub source: Option<ArchetypeKind>,
}

/// Mean squared error between computed and target similarities.
pub fn mse<I>(pairs: I) -> Result<f64>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let (mut sum, mut n) = (0.0, 0usize);
    for (s, t) in pairs {
        sum += (s - t).powi(2);
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyInput("dataset"));
    }
    Ok(sum / n as f64)
}

/// Training error of `params` on `dataset` for the given archetype.
pub fn fitness(
    params: &SrfParams,
    archetype: &Archetype,
    dataset: &[LabeledWindow],
) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let srf = Srf::new(*params, archetype.clone())?;
    let scores = dataset
        .iter()
        .map(|lw| Ok((srf.similarity(&lw.window)?, lw.target)))
        .collect::<Result<Vec<_>>>()?;
    mse(scores)
}

/// Static search box for the seven non-evaporation parameters and the
/// evaporation sweep range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub clump_steepness: (f64, f64),
    pub clump_threshold: (f64, f64),
    pub mark_width: (f64, f64),
    pub evaporation: (f64, f64),
    pub activation_steepness: (f64, f64),
    pub activation_threshold: (f64, f64),
}

impl Default for ParamBounds {
    fn default() -> Self {
        Self {
            clump_steepness: (1.0, 100.0),
            clump_threshold: (0.0, 1.0),
            mark_width: (0.01, 0.5),
            evaporation: (0.001, 1.0),
            activation_steepness: (1.0, 100.0),
            activation_threshold: (0.0, 1.0),
        }
    }
}

impl ParamBounds {
    /// Box in [`SrfParams::to_vector`] order with evaporation fixed to `delta`.
    fn with_evaporation(&self, delta: (f64, f64)) -> Vec<(f64, f64)> {
        vec![
            self.clump_steepness,
            self.clump_threshold,
            self.clump_steepness,
            self.clump_threshold,
            self.mark_width,
            delta,
            self.activation_steepness,
            self.activation_threshold,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.clump_steepness,
            self.clump_threshold,
            self.mark_width,
            self.evaporation,
            self.activation_steepness,
            self.activation_threshold,
        ];
        if all
            .iter()
            .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(Error::InvalidParameter("malformed parameter bounds".into()));
        }
        if self.mark_width.0 <= 0.0 || self.evaporation.0 < 0.0 || self.clump_steepness.0 <= 0.0 {
            return Err(Error::InvalidParameter(
                "mark width and clump steepness must be positive, evaporation >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaporationInterval {
    pub delta_min: f64,
    pub delta_max: f64,
}

impl EvaporationInterval {
    pub fn new(delta_min: f64, delta_max: f64) -> Result<Self> {
        if !(0.0 <= delta_min && delta_min <= delta_max && delta_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "evaporation interval [{delta_min}, {delta_max}]"
            )));
        }
        Ok(Self {
            delta_min,
            delta_max,
        })
    }

    pub fn contains(&self, delta: f64) -> bool {
        (self.delta_min..=self.delta_max).contains(&delta)
    }
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Narrowest interval of `deltas` covering every sweep point whose quality is
/// at or above the 90th percentile of `quality`. Needs at least 10 points.
pub fn evaporation_interval(deltas: &[f64], quality: &[f64]) -> Result<EvaporationInterval> {
    if deltas.len() != quality.len() {
        return Err(Error::LengthMismatch {
            expected: deltas.len(),
            actual: quality.len(),
        });
    }
    if deltas.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "evaporation sweep needs >= 10 points, got {}",
            deltas.len()
        )));
    }
    let cut = percentile(quality, 0.9);
    let selected = deltas
        .iter()
        .zip(quality)
        .filter(|(_, &q)| q >= cut)
        .map(|(&d, _)| d);
    let (lo, hi) = selected.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
        (lo.min(d), hi.max(d))
    });
    EvaporationInterval::new(lo, hi)
}

/// `n` log-spaced points spanning `[lo, hi]`; falls back to linear spacing
/// when `lo` is zero.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let t = |i: usize| i as f64 / (n - 1) as f64;
    if lo > 0.0 {
        let (a, b) = (lo.ln(), hi.ln());
        (0..n).map(|i| (a + (b - a) * t(i)).exp()).collect()
    } else {
        (0..n).map(|i| lo + (hi - lo) * t(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub bounds: ParamBounds,
    pub sweep_points: usize,
    /// Short search over the other parameters at each sweep point.
    pub sweep_population: usize,
    pub sweep_generations: usize,
    pub population: usize,
    pub differential_weight: f64,
    pub crossover: f64,
    pub generations: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            bounds: ParamBounds::default(),
            sweep_points: 50,
            sweep_population: 8,
            sweep_generations: 6,
            population: 20,
            differential_weight: 0.5,
            crossover: 0.9,
            generations: 100,
            seed: 1,
        }
    }
}

impl TrainingConfig {
    fn de(&self, bounds: Vec<(f64, f64)>, seed: u64) -> DeConfig {
        DeConfig {
            population: self.population,
            differential_weight: self.differential_weight,
            crossover: self.crossover,
            generations: self.generations,
            bounds,
            seed,
        }
    }
}

/// Per-sweep-point record from the global phase.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaporationSweep {
    pub deltas: Vec<f64>,
    /// Negated best fitness at each delta.
    pub quality: Vec<f64>,
    pub interval: EvaporationInterval,
}

/// Global phase for one field: evaporation sweep and interval selection.
pub fn global_training(
    archetype: &Archetype,
    dataset: &[LabeledWindow],
    config: &TrainingConfig,
) -> Result<EvaporationSweep> {
    config.bounds.validate()?;
    let (lo, hi) = config.bounds.evaporation;
    let deltas = log_space(lo, hi, config.sweep_points);
    let quality = deltas
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let de = DeConfig {
                population: config.sweep_population,
                generations: config.sweep_generations,
                ..config.de(
                    config.bounds.with_evaporation((d, d)),
                    mix_seed(config.seed, i as u64),
                )
            };
            let r = differential_evolution(|v| objective(v, archetype, dataset), &de)?;
            Ok(-r.best_fitness)
        })
        .collect::<Result<Vec<_>>>()?;
    let interval = evaporation_interval(&deltas, &quality)?;
    Ok(EvaporationSweep {
        deltas,
        quality,
        interval,
    })
}

fn objective(v: &[f64], archetype: &Archetype, dataset: &[LabeledWindow]) -> f64 {
    fitness(&SrfParams::from_vector(v), archetype, dataset).unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalResult {
    pub params: SrfParams,
    pub fitness: f64,
    pub history: Vec<f64>,
}

/// Local phase: differential evolution over all eight parameters, with
/// evaporation bounded by `interval`.
pub fn local_training(
    archetype: &Archetype,
    dataset: &[LabeledWindow],
    interval: EvaporationInterval,
    config: &TrainingConfig,
) -> Result<LocalResult> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    config.bounds.validate()?;
    let bounds = config
        .bounds
        .with_evaporation((interval.delta_min, interval.delta_max));
    let de = config.de(bounds, config.seed);
    let r = differential_evolution(|v| objective(v, archetype, dataset), &de)?;
    Ok(LocalResult {
        params: SrfParams::from_vector(&r.best),
        fitness: r.best_fitness,
        history: r.history,
    })
}

/// Perturbation applied to archetype seeds when synthesizing training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthOptions {
    /// Windows per class (positives, and again negatives).
    pub count: usize,
    pub noise_amp: f64,
    pub max_shift: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            count: 30,
            noise_amp: 0.05,
            max_shift: 6,
        }
    }
}

/// One perturbed copy of `template`: uniform noise in `[-amp, amp]` clamped
/// to `[0, 1]`, then a circular shift by `shift` samples (positive = later).
pub fn perturb(template: &[f64], amp: f64, shift: isize, rng: &mut impl Rng) -> Vec<f64> {
    let noisy: Vec<f64> = template
        .iter()
        .map(|&x| {
            let n = if amp > 0.0 {
                rng.gen_range(-amp..=amp)
            } else {
                0.0
            };
            (x + n).clamp(0.0, 1.0)
        })
        .collect();
    circular_shift(&noisy, shift)
}

pub fn circular_shift(v: &[f64], shift: isize) -> Vec<f64> {
    let n = v.len() as isize;
    if n == 0 {
        return Vec::new();
    }
    (0..n)
        .map(|i| v[(i - shift).rem_euclid(n) as usize])
        .collect()
}

/// Labeled windows for the field receptive to `target`: `count` perturbed
/// copies of its template (label 1), and `count` perturbed copies of the
/// other archetypes taken in turn (label 0).
pub fn synthesize_training_set(
    archetypes: &[Archetype],
    target: ArchetypeKind,
    opts: SynthOptions,
    seed: u64,
) -> Result<Vec<LabeledWindow>> {
    if !(opts.noise_amp >= 0.0 && opts.noise_amp.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "noise amplitude {}",
            opts.noise_amp
        )));
    }
    let own = archetypes
        .iter()
        .find(|a| a.kind == target)
        .ok_or_else(|| Error::InvalidParameter(format!("no template for {target}")))?;
    if opts.max_shift >= own.len() {
        return Err(Error::InvalidParameter(format!(
            "shift {} must be shorter than the window ({})",
            opts.max_shift,
            own.len()
        )));
    }
    let others: Vec<&Archetype> = archetypes.iter().filter(|a| a.kind != target).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(2 * opts.count);
    let m = opts.max_shift as isize;
    for _ in 0..opts.count {
        let shift = rng.gen_range(-m..=m);
        out.push(LabeledWindow {
            window: perturb(&own.template, opts.noise_amp, shift, &mut rng),
            target: 1.0,
            source: Some(target),
        });
    }
    for i in 0..opts.count {
        if others.is_empty() {
            break;
        }
        let a = others[i % others.len()];
        let shift = rng.gen_range(-m..=m);
        out.push(LabeledWindow {
            window: perturb(&a.template, opts.noise_amp, shift, &mut rng),
            target: 0.0,
            source: Some(a.kind),
        });
    }
    Ok(out)
}

/// `count` perturbed windows of every archetype, shuffled, each labeled with
/// its source; used to evaluate activity-level detection.
pub fn synthesize_evaluation_set(
    archetypes: &[Archetype],
    opts: SynthOptions,
    seed: u64,
) -> Vec<LabeledWindow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = opts
        .max_shift
        .min(archetypes.first().map_or(0, |a| a.len().saturating_sub(1))) as isize;
    let mut out = Vec::new();
    for a in archetypes {
        for _ in 0..opts.count {
            let shift = rng.gen_range(-m..=m);
            out.push(LabeledWindow {
                window: perturb(&a.template, opts.noise_amp, shift, &mut rng),
                target: a.rank() as f64,
                source: Some(a.kind),
            });
        }
    }
    out.shuffle(&mut rng);
    out
}

pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Outcome of training one field of the perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldReport {
    pub kind: ArchetypeKind,
    pub interval: EvaporationInterval,
    pub params: SrfParams,
    pub fitness: f64,
}

/// Trains all seven fields (global then local phase) on synthesized data.
pub fn train_perceptron(
    archetypes: &[Archetype],
    synth: SynthOptions,
    config: &TrainingConfig,
    window_hop: usize,
) -> Result<(StigmergicPerceptron, Vec<FieldReport>)> {
    let mut srfs = Vec::with_capacity(archetypes.len());
    let mut reports = Vec::with_capacity(archetypes.len());
    for a in archetypes {
        let stream = a.rank() as u64;
        let data =
            synthesize_training_set(archetypes, a.kind, synth, mix_seed(config.seed, stream))?;
        let cfg = TrainingConfig {
            seed: mix_seed(config.seed, 100 + stream),
            ..config.clone()
        };
        let sweep = global_training(a, &data, &cfg)?;
        let local = local_training(a, &data, sweep.interval, &cfg)?;
        log::info!(
            "trained {}: delta in [{:.4}, {:.4}], fitness {:.5}",
            a.kind,
            sweep.interval.delta_min,
            sweep.interval.delta_max,
            local.fitness
        );
        srfs.push(Srf::new(local.params, a.clone())?);
        reports.push(FieldReport {
            kind: a.kind,
            interval: sweep.interval,
            params: local.params,
            fitness: local.fitness,
        });
    }
    Ok((StigmergicPerceptron::new(srfs, window_hop)?, reports))
}

/// Text record of a training run, one `key=value` per line.
pub fn training_manifest(
    config: &TrainingConfig,
    synth: &SynthOptions,
    reports: &[FieldReport],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "seed={}", config.seed);
    let _ = writeln!(s, "population={}", config.population);
    let _ = writeln!(s, "differential_weight={}", config.differential_weight);
    let _ = writeln!(s, "crossover={}", config.crossover);
    let _ = writeln!(s, "generations={}", config.generations);
    let _ = writeln!(s, "sweep_points={}", config.sweep_points);
    let _ = writeln!(s, "synth_count={}", synth.count);
    let _ = writeln!(s, "synth_noise_amp={}", synth.noise_amp);
    let _ = writeln!(s, "synth_max_shift={}", synth.max_shift);
    for r in reports {
        let k = r.kind.name();
        let v = r.params.to_vector();
        let _ = writeln!(
            s,
            "{k}.delta_interval={},{}",
            r.interval.delta_min, r.interval.delta_max
        );
        let _ = writeln!(
            s,
            "{k}.params={}",
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        );
        let _ = writeln!(s, "{k}.fitness={}", r.fitness);
    }
    s
}
