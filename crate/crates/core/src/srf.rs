//! Stigmergic receptive fields.
//!
//! An [`Srf`] scores how closely a window of normalized activity samples
//! follows one archetype. Both the window and the archetype template go
//! through the same stages:
//!
//! 1. clumping: each sample is softly discretized by a double sigmoid,
//! 2. marking: a unit-height trapezoid of width `mark_width` is dropped on
//!    the value axis at the clumped sample,
//! 3. trailing: marks accumulate while the trail evaporates by `evaporation`
//!    per sample.
//!
//! The two final trails are compared with the fuzzy Jaccard coefficient and
//! the result is passed through the activation sigmoid.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trail::{jaccard_or_zero, trail_of_series, Grid1D, Trail1D, TrailSpec};
use crate::transforms::{clump, sigmoid, ClumpParams, SigmoidParams};

/// 72 samples at 5-minute sampling: six hours.
pub const DEFAULT_WINDOW: usize = 72;

/// Height of every mark released on the value axis.
pub const MARK_HEIGHT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchetypeKind {
    Asleep,
    Falling,
    Awakening,
    Flow,
    Chill,
    Rise,
    RushHour,
}

impl ArchetypeKind {
    /// All archetypes in order of increasing activity.
    pub const ALL: [ArchetypeKind; 7] = [
        ArchetypeKind::Asleep,
        ArchetypeKind::Falling,
        ArchetypeKind::Awakening,
        ArchetypeKind::Flow,
        ArchetypeKind::Chill,
        ArchetypeKind::Rise,
        ArchetypeKind::RushHour,
    ];

    /// Position in the activity ordering, 1 (Asleep) to 7 (RushHour).
    pub fn rank(self) -> usize {
        self as usize + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            ArchetypeKind::Asleep => "asleep",
            ArchetypeKind::Falling => "falling",
            ArchetypeKind::Awakening => "awakening",
            ArchetypeKind::Flow => "flow",
            ArchetypeKind::Chill => "chill",
            ArchetypeKind::Rise => "rise",
            ArchetypeKind::RushHour => "rush-hour",
        }
    }

    /// Start and end level of the ideal segment; constant archetypes have
    /// equal endpoints.
    pub fn endpoints(self) -> (f64, f64) {
        match self {
            ArchetypeKind::Asleep => (0.1, 0.1),
            ArchetypeKind::Falling => (0.5, 0.1),
            ArchetypeKind::Awakening => (0.1, 0.5),
            ArchetypeKind::Flow => (0.5, 0.5),
            ArchetypeKind::Chill => (0.9, 0.5),
            ArchetypeKind::Rise => (0.5, 0.9),
            ArchetypeKind::RushHour => (0.9, 0.9),
        }
    }

    /// Linear segment between [`endpoints`](Self::endpoints) sampled at `len` points.
    pub fn template(self, len: usize) -> Vec<f64> {
        let (a, b) = self.endpoints();
        ramp(a, b, len)
    }
}

pub(crate) fn ramp(a: f64, b: f64, len: usize) -> Vec<f64> {
    match len {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..len)
            .map(|i| a + (b - a) * i as f64 / (len - 1) as f64)
            .collect(),
    }
}

impl fmt::Display for ArchetypeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchetypeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        ArchetypeKind::ALL
            .into_iter()
            .find(|k| k.name().replace('-', "") == key)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown archetype '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Archetype {
    pub kind: ArchetypeKind,
    pub template: Vec<f64>,
}

impl Archetype {
    pub fn new(kind: ArchetypeKind, template: Vec<f64>) -> Result<Self> {
        if template.is_empty() {
            return Err(Error::EmptyInput("archetype template"));
        }
        if template.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter(format!(
                "{kind} template has samples outside [0, 1]"
            )));
        }
        Ok(Self { kind, template })
    }

    pub fn standard(kind: ArchetypeKind, len: usize) -> Self {
        Self {
            kind,
            template: kind.template(len),
        }
    }

    /// The seven parametric archetypes, ordered by rank.
    pub fn standard_set(len: usize) -> Vec<Archetype> {
        ArchetypeKind::ALL
            .into_iter()
            .map(|k| Self::standard(k, len))
            .collect()
    }

    pub fn rank(&self) -> usize {
        self.kind.rank()
    }

    pub fn len(&self) -> usize {
        self.template.len()
    }

    pub fn is_empty(&self) -> bool {
        self.template.is_empty()
    }
}

/// Reads archetype templates from a CSV file with one column per archetype,
/// headed by the archetype name. Missing archetypes fall back to the
/// parametric defaults at the same window length; the result is rank-ordered.
pub fn load_templates(path: &Path) -> Result<Vec<Archetype>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let kinds = headers
        .iter()
        .map(str::parse::<ArchetypeKind>)
        .collect::<Result<Vec<_>>>()?;
    let mut columns = vec![Vec::new(); kinds.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        for (col, field) in columns.iter_mut().zip(rec.iter()) {
            let v: f64 = field.trim().parse().map_err(|_| Error::Format {
                path: path.into(),
                message: format!("bad template value '{field}'"),
            })?;
            col.push(v);
        }
    }
    let len = columns.first().map_or(0, Vec::len);
    if len == 0 {
        return Err(Error::Format {
            path: path.into(),
            message: "no template rows".into(),
        });
    }
    let mut set = Archetype::standard_set(len);
    for (kind, col) in kinds.into_iter().zip(columns) {
        set[kind.rank() - 1] = Archetype::new(kind, col)?;
    }
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrfParams {
    pub clump: ClumpParams,
    pub mark_width: f64,
    pub evaporation: f64,
    pub activation: SigmoidParams,
}

impl SrfParams {
    /// Number of tunable parameters, in [`to_vector`](Self::to_vector) order.
    pub const DIM: usize = 8;

    pub fn validate(&self) -> Result<()> {
        self.clump.validate()?;
        if !(self.mark_width > 0.0 && self.mark_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mark width {}",
                self.mark_width
            )));
        }
        if !(self.evaporation >= 0.0 && self.evaporation.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "evaporation {}",
                self.evaporation
            )));
        }
        if !(self.activation.steepness.is_finite() && self.activation.threshold.is_finite()) {
            return Err(Error::InvalidParameter("activation must be finite".into()));
        }
        Ok(())
    }

    /// `[alpha, beta, gamma, lambda, mark_width, evaporation, alpha_a, beta_a]`
    pub fn to_vector(&self) -> [f64; Self::DIM] {
        [
            self.clump.alpha,
            self.clump.beta,
            self.clump.gamma,
            self.clump.lambda,
            self.mark_width,
            self.evaporation,
            self.activation.steepness,
            self.activation.threshold,
        ]
    }

    /// Inverse of [`to_vector`](Self::to_vector); clump thresholds are sorted.
    pub fn from_vector(v: &[f64]) -> Self {
        Self {
            clump: ClumpParams::sorted(v[0], v[1], v[2], v[3]),
            mark_width: v[4],
            evaporation: v[5],
            activation: SigmoidParams::new(v[6], v[7]),
        }
    }

    pub(crate) fn trail_spec(&self) -> TrailSpec {
        TrailSpec {
            mark_width: self.mark_width,
            evaporation: self.evaporation,
            height: MARK_HEIGHT,
            grid: Grid1D::unit(),
        }
    }
}

impl Default for SrfParams {
    fn default() -> Self {
        Self {
            clump: ClumpParams::default(),
            mark_width: 0.1,
            evaporation: 0.05,
            activation: SigmoidParams::new(10.0, 0.5),
        }
    }
}

/// Intermediate products of scoring one window.
#[derive(Debug, Clone)]
pub struct SrfTrace {
    pub clumped: Vec<f64>,
    pub trail: Trail1D,
    pub jaccard: f64,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct Srf {
    params: SrfParams,
    archetype: Archetype,
    archetype_trail: Trail1D,
}

impl Srf {
    pub fn new(params: SrfParams, archetype: Archetype) -> Result<Self> {
        params.validate()?;
        let archetype_trail = build_trail(&archetype.template, &params)?;
        Ok(Self {
            params,
            archetype,
            archetype_trail,
        })
    }

    pub fn params(&self) -> &SrfParams {
        &self.params
    }

    pub fn archetype(&self) -> &Archetype {
        &self.archetype
    }

    pub fn archetype_trail(&self) -> &Trail1D {
        &self.archetype_trail
    }

    pub fn window_len(&self) -> usize {
        self.archetype.len()
    }

    /// Same archetype with new parameters; the archetype trail is rebuilt.
    pub fn with_params(&self, params: SrfParams) -> Result<Self> {
        Self::new(params, self.archetype.clone())
    }

    /// Recomputes the archetype trail from the template and current params.
    pub fn rebuild_archetype_trail(self) -> Result<Self> {
        Self::new(self.params, self.archetype)
    }

    /// Activated similarity of `window` to the archetype, in `(0, 1)`.
    pub fn similarity(&self, window: &[f64]) -> Result<f64> {
        Ok(self.trace(window)?.score)
    }

    pub fn trace(&self, window: &[f64]) -> Result<SrfTrace> {
        if window.len() != self.window_len() {
            return Err(Error::LengthMismatch {
                expected: self.window_len(),
                actual: window.len(),
            });
        }
        let clumped = clump_series(window, &self.params)?;
        let trail = trail_of_series(&clumped, &self.params.trail_spec())?;
        let jaccard = jaccard_or_zero(&trail, &self.archetype_trail)?;
        let score = sigmoid(jaccard, self.params.activation);
        Ok(SrfTrace {
            clumped,
            trail,
            jaccard,
            score,
        })
    }
}

fn clump_series(samples: &[f64], params: &SrfParams) -> Result<Vec<f64>> {
    samples
        .iter()
        .map(|&x| {
            if (0.0..=1.0).contains(&x) {
                Ok(clump(x, params.clump))
            } else {
                Err(Error::InvalidParameter(format!(
                    "sample {x} outside [0, 1]"
                )))
            }
        })
        .collect()
}

fn build_trail(samples: &[f64], params: &SrfParams) -> Result<Trail1D> {
    trail_of_series(&clump_series(samples, params)?, &params.trail_spec())
}
