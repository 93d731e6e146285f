//! Stigmergic discovery of urban activity hotspots and unexpected activity days.
//!
//! Positioning events deposit pheromone marks that aggregate and evaporate on
//! a spatial grid; cells that stay relevant across the four daily time slots
//! become hotspots. Each hotspot's activity series is read by a bank of
//! stigmergic receptive fields, one per activity archetype, whose weighted
//! vote gives an activity level per window. Days are then compared through
//! their activity-level trails, clustered with fuzzy c-means, and scored by
//! an extraneousness index against the cluster the calendar expects.
//!
//! ```text
//! events ─▶ hotspot ─▶ series ─▶ perceptron (7 × srf) ─▶ levels ─▶ clustering ─▶ report
//!              │                      ▲
//!            trail                 training (differential evolution)
//! ```

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod de;
pub mod error;
pub mod export;
pub mod hotspot;
pub mod io;
pub mod perceptron;
pub mod srf;
pub mod trail;
pub mod training;
pub mod transforms;

pub use error::{Error, Result};
