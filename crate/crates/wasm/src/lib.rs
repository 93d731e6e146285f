//! Browser bindings: single-field traces, the seven-field activity level and
//! an interactive 2-D trail with hotspot extraction.

use stigmergy::hotspot::{extract_hotspots, ExtractParams};
use stigmergy::perceptron::StigmergicPerceptron;
use stigmergy::srf::{Archetype, ArchetypeKind, Srf, SrfParams};
use stigmergy::trail::{Grid2D, Mark2D, Trail2D};
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub fn archetype_names() -> Vec<String> {
    ArchetypeKind::ALL
        .iter()
        .map(|k| k.name().to_string())
        .collect()
}

#[wasm_bindgen]
pub fn archetype_template(name: &str, len: usize) -> Result<Vec<f64>, JsError> {
    Ok(name.parse::<ArchetypeKind>()?.template(len))
}

/// `[alpha, beta, gamma, lambda, mark_width, evaporation, steepness, threshold]`
#[wasm_bindgen]
pub fn default_params() -> Vec<f64> {
    SrfParams::default().to_vector().to_vec()
}

#[wasm_bindgen]
pub struct SrfView {
    clumped: Vec<f64>,
    trail: Vec<f64>,
    archetype_trail: Vec<f64>,
    jaccard: f64,
    score: f64,
}

#[wasm_bindgen]
impl SrfView {
    #[wasm_bindgen(getter)]
    pub fn clumped(&self) -> Vec<f64> {
        self.clumped.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn trail(&self) -> Vec<f64> {
        self.trail.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn archetype_trail(&self) -> Vec<f64> {
        self.archetype_trail.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn jaccard(&self) -> f64 {
        self.jaccard
    }

    #[wasm_bindgen(getter)]
    pub fn score(&self) -> f64 {
        self.score
    }
}

pub fn trace(name: &str, window: &[f64], params: &[f64]) -> stigmergy::Result<SrfView> {
    if params.len() != SrfParams::DIM {
        return Err(stigmergy::Error::LengthMismatch {
            expected: SrfParams::DIM,
            actual: params.len(),
        });
    }
    let kind: ArchetypeKind = name.parse()?;
    let srf = Srf::new(
        SrfParams::from_vector(params),
        Archetype::standard(kind, window.len()),
    )?;
    let t = srf.trace(window)?;
    Ok(SrfView {
        clumped: t.clumped,
        trail: t.trail.intensity().to_vec(),
        archetype_trail: srf.archetype_trail().intensity().to_vec(),
        jaccard: t.jaccard,
        score: t.score,
    })
}

/// Scores `window` against one archetype's receptive field.
#[wasm_bindgen]
pub fn srf_trace(name: &str, window: &[f64], params: &[f64]) -> Result<SrfView, JsError> {
    Ok(trace(name, window, params)?)
}

pub fn similarities(window: &[f64]) -> stigmergy::Result<Vec<f64>> {
    let srfs = ArchetypeKind::ALL
        .iter()
        .map(|&k| Srf::new(SrfParams::default(), Archetype::standard(k, window.len())))
        .collect::<stigmergy::Result<Vec<_>>>()?;
    StigmergicPerceptron::new(srfs, window.len())?.similarities(window)
}

/// Similarities to all seven archetypes, by rank, followed by the activity
/// level (NaN when nothing activates).
#[wasm_bindgen]
pub fn activity(window: &[f64]) -> Result<Vec<f64>, JsError> {
    let mut s = similarities(window)?;
    let level = stigmergy::perceptron::activity_level(&s).unwrap_or(f64::NAN);
    s.push(level);
    Ok(s)
}

/// A grid of unit cells where each stamp deposits a cone and each tick
/// evaporates a fixed amount.
#[wasm_bindgen]
pub struct TrailPainter {
    trail: Trail2D,
    radius: f64,
    evaporation: f64,
}

#[wasm_bindgen]
impl TrailPainter {
    #[wasm_bindgen(constructor)]
    pub fn new(
        nx: usize,
        ny: usize,
        radius: f64,
        evaporation: f64,
    ) -> Result<TrailPainter, JsError> {
        Ok(Self::build(nx, ny, radius, evaporation)?)
    }

    pub fn stamp(&mut self, x: f64, y: f64) -> Result<(), JsError> {
        Ok(self.deposit(x, y)?)
    }

    pub fn tick(&mut self) {
        self.trail_tick();
    }

    pub fn clear(&mut self) {
        self.trail = Trail2D::new(*self.trail.grid());
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.trail.intensity().to_vec()
    }

    /// Per-cell hotspot number (1 for the most intense, 0 outside any).
    pub fn hotspots(&self, quantile: f64, min_area: usize) -> Result<Vec<u32>, JsError> {
        Ok(self.labels(quantile, min_area)?)
    }
}

impl TrailPainter {
    pub fn build(nx: usize, ny: usize, radius: f64, evaporation: f64) -> stigmergy::Result<Self> {
        let grid = Grid2D::new(0.0, nx as f64, 0.0, ny as f64, nx, ny)?;
        Mark2D::new(0.0, 0.0, radius, 1.0)?;
        if !(evaporation.is_finite() && evaporation >= 0.0) {
            return Err(stigmergy::Error::InvalidParameter(format!(
                "evaporation {evaporation}"
            )));
        }
        Ok(Self {
            trail: Trail2D::new(grid),
            radius,
            evaporation,
        })
    }

    pub fn trail_tick(&mut self) {
        self.trail
            .evaporate(self.evaporation)
            .expect("evaporation is validated at construction");
    }

    pub fn deposit(&mut self, x: f64, y: f64) -> stigmergy::Result<()> {
        self.trail.deposit(&Mark2D::new(x, y, self.radius, 1.0)?);
        Ok(())
    }

    pub fn labels(&self, quantile: f64, min_area: usize) -> stigmergy::Result<Vec<u32>> {
        let mut out = vec![0; self.trail.grid().len()];
        if self.trail.is_empty() {
            return Ok(out);
        }
        let params = ExtractParams {
            relevance_quantile: quantile,
            min_slots: 1,
            min_area,
        };
        let found = extract_hotspots(std::slice::from_ref(&self.trail), &params)?;
        for (k, h) in found.iter().enumerate() {
            for &(ix, iy) in &h.cells {
                out[self.trail.grid().index(ix, iy)] = k as u32 + 1;
            }
        }
        Ok(out)
    }
}
