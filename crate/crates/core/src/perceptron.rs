//! The stigmergic perceptron and the day-similarity receptive field.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::de::{differential_evolution, DeConfig};
use crate::error::{Error, Result};
use crate::srf::{ArchetypeKind, Srf, SrfParams};
use crate::trail::{jaccard_or_zero, trail_of_series, Grid1D, TrailSpec};
use crate::training::mse;
use crate::transforms::{sigmoid, SigmoidParams};

/// Number of archetypes in a perceptron; activity levels live in `[1, N]`.
pub const N_ARCHETYPES: usize = 7;

/// Level used when no field responds to the first window of a series.
pub const FALLBACK_LEVEL: f64 = 4.0;

/// Similarity-weighted mean of the ranks `1..=n`.
pub fn activity_level(similarities: &[f64]) -> Result<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &s) in similarities.iter().enumerate() {
        num += s * (i + 1) as f64;
        den += s;
    }
    if !(den > 0.0) {
        return Err(Error::NoActivation);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityLevelSeries {
    pub day: NaiveDate,
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StigmergicPerceptron {
    srfs: Vec<Srf>,
    window_hop: usize,
}

impl StigmergicPerceptron {
    /// Fields are sorted by archetype rank; all must share one window length.
    pub fn new(mut srfs: Vec<Srf>, window_hop: usize) -> Result<Self> {
        if srfs.is_empty() {
            return Err(Error::EmptyInput("receptive fields"));
        }
        if window_hop == 0 {
            return Err(Error::InvalidParameter(
                "window hop must be positive".into(),
            ));
        }
        srfs.sort_by_key(|s| s.archetype().rank());
        let len = srfs[0].window_len();
        if let Some(bad) = srfs.iter().find(|s| s.window_len() != len) {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: bad.window_len(),
            });
        }
        Ok(Self { srfs, window_hop })
    }

    pub fn srfs(&self) -> &[Srf] {
        &self.srfs
    }

    pub fn window_len(&self) -> usize {
        self.srfs[0].window_len()
    }

    pub fn window_hop(&self) -> usize {
        self.window_hop
    }

    /// One activated similarity per field, in rank order.
    pub fn similarities(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.srfs.iter().map(|s| s.similarity(window)).collect()
    }

    pub fn level(&self, window: &[f64]) -> Result<f64> {
        activity_level(&self.similarities(window)?)
    }

    /// Activity level of every window slid over `samples` with the
    /// configured hop. A window where no field responds repeats the previous
    /// level, or [`FALLBACK_LEVEL`] at the start.
    pub fn levels(&self, samples: &[f64]) -> Result<Vec<f64>> {
        let w = self.window_len();
        if samples.len() < w {
            return Err(Error::LengthMismatch {
                expected: w,
                actual: samples.len(),
            });
        }
        let count = (samples.len() - w) / self.window_hop + 1;
        let mut out: Vec<f64> = Vec::with_capacity(count);
        for k in 0..count {
            let start = k * self.window_hop;
            let level = match self.level(&samples[start..start + w]) {
                Ok(l) => l,
                Err(Error::NoActivation) => out.last().copied().unwrap_or(FALLBACK_LEVEL),
                Err(e) => return Err(e),
            };
            out.push(level);
        }
        Ok(out)
    }

    pub fn characterize_day(&self, day: NaiveDate, samples: &[f64]) -> Result<ActivityLevelSeries> {
        Ok(ActivityLevelSeries {
            day,
            levels: self.levels(samples)?,
        })
    }

    /// Parameters per archetype, for persisting a trained perceptron.
    pub fn params(&self) -> Vec<(ArchetypeKind, SrfParams)> {
        self.srfs
            .iter()
            .map(|s| (s.archetype().kind, *s.params()))
            .collect()
    }
}

/// Receptive field comparing two activity-level series; it has no clumping
/// stage, and levels are divided by [`N_ARCHETYPES`] before marking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaySimilaritySrf {
    pub mark_width: f64,
    pub evaporation: f64,
    pub activation: SigmoidParams,
}

impl Default for DaySimilaritySrf {
    fn default() -> Self {
        Self {
            mark_width: 0.1,
            evaporation: 0.1,
            activation: SigmoidParams::new(10.0, 0.5),
        }
    }
}

impl DaySimilaritySrf {
    pub const DIM: usize = 4;

    pub fn to_vector(&self) -> [f64; Self::DIM] {
        [
            self.mark_width,
            self.evaporation,
            self.activation.steepness,
            self.activation.threshold,
        ]
    }

    pub fn from_vector(v: &[f64]) -> Self {
        Self {
            mark_width: v[0],
            evaporation: v[1],
            activation: SigmoidParams::new(v[2], v[3]),
        }
    }

    fn spec(&self) -> TrailSpec {
        TrailSpec {
            mark_width: self.mark_width,
            evaporation: self.evaporation,
            height: 1.0,
            grid: Grid1D::unit(),
        }
    }

    /// Jaccard of the two level trails, before activation.
    pub fn raw(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        if a.len() != b.len() {
            return Err(Error::LengthMismatch {
                expected: a.len(),
                actual: b.len(),
            });
        }
        let spec = self.spec();
        let scale = |s: &[f64]| -> Vec<f64> {
            s.iter()
                .map(|&l| (l / N_ARCHETYPES as f64).clamp(0.0, 1.0))
                .collect()
        };
        let ta = trail_of_series(&scale(a), &spec)?;
        let tb = trail_of_series(&scale(b), &spec)?;
        jaccard_or_zero(&ta, &tb)
    }

    pub fn similarity(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.raw(a, b)?, self.activation))
    }

    pub fn day_similarity(&self, a: &ActivityLevelSeries, b: &ActivityLevelSeries) -> Result<f64> {
        self.similarity(&a.levels, &b.levels)
    }
}

/// A pair of level series with target 1 (same behavioral class) or 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub target: f64,
}

pub fn pair_fitness(dsrf: &DaySimilaritySrf, pairs: &[LabeledPair]) -> Result<f64> {
    let scores = pairs
        .iter()
        .map(|p| Ok((dsrf.similarity(&p.a, &p.b)?, p.target)))
        .collect::<Result<Vec<_>>>()?;
    mse(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaySimilarityBounds {
    pub mark_width: (f64, f64),
    pub evaporation: (f64, f64),
    pub activation_steepness: (f64, f64),
    pub activation_threshold: (f64, f64),
}

impl Default for DaySimilarityBounds {
    fn default() -> Self {
        Self {
            mark_width: (0.01, 0.5),
            evaporation: (0.0, 1.0),
            activation_steepness: (1.0, 100.0),
            activation_threshold: (0.0, 1.0),
        }
    }
}

/// Fits the day-similarity field to labeled pairs by differential evolution
/// over its four parameters. Returns the parameters and their fitness.
pub fn train_day_similarity(
    pairs: &[LabeledPair],
    bounds: DaySimilarityBounds,
    mut de: DeConfig,
) -> Result<(DaySimilaritySrf, f64)> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("labeled pairs"));
    }
    de.bounds = vec![
        bounds.mark_width,
        bounds.evaporation,
        bounds.activation_steepness,
        bounds.activation_threshold,
    ];
    let r = differential_evolution(
        |v| pair_fitness(&DaySimilaritySrf::from_vector(v), pairs).unwrap_or(f64::INFINITY),
        &de,
    )?;
    Ok((DaySimilaritySrf::from_vector(&r.best), r.best_fitness))
}
