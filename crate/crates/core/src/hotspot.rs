//! Spatial hotspot discovery.
//!
//! Positioning events are summed into spatiotemporal bins (grid cell × 5
//! minutes) and min-max normalized. For each of the four daily time slots
//! the bins are replayed in time order: at every step the slot trail
//! evaporates, then each active bin releases a truncated cone whose height is
//! the sigmoid-smoothed bin value. Cells that rank among the most intense in
//! enough slots are grouped into 8-connected regions; large enough regions
//! are hotspots.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trail::{Grid2D, Mark2D, Trail2D};
use crate::training::percentile;
use crate::transforms::{sigmoid, SigmoidParams};

/// Mean Earth radius in feet.
const EARTH_RADIUS_FT: f64 = 20_902_231.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Pickup,
    Dropoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositioningEvent {
    pub timestamp: NaiveDateTime,
    /// Projected easting in feet.
    pub x: f64,
    /// Projected northing in feet.
    pub y: f64,
    pub passengers: u32,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
}

impl BoundingBox {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lon_min < self.lon_max
            && self.lat_min < self.lat_max
            && (-180.0..=180.0).contains(&self.lon_min)
            && (-180.0..=180.0).contains(&self.lon_max)
            && (-90.0..=90.0).contains(&self.lat_min)
            && (-90.0..=90.0).contains(&self.lat_max);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid bounding box {self:?}")))
        }
    }

    pub fn projection(&self) -> Projection {
        Projection {
            lon0: (self.lon_min + self.lon_max) / 2.0,
            lat0: (self.lat_min + self.lat_max) / 2.0,
        }
    }

    /// Projected extent `(x0, x1, y0, y1)` in feet.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let p = self.projection();
        let (x0, y0) = p.project(self.lon_min, self.lat_min);
        let (x1, y1) = p.project(self.lon_max, self.lat_max);
        (x0, x1, y0, y1)
    }

    /// Grid covering the box with `nx × ny` cells.
    pub fn grid(&self, nx: usize, ny: usize) -> Result<Grid2D> {
        let (x0, x1, y0, y1) = self.extent();
        Grid2D::new(x0, x1, y0, y1, nx, ny)
    }

    /// Grid covering the box with square cells of roughly `cell_ft` feet.
    pub fn grid_with_cell_size(&self, cell_ft: f64) -> Result<Grid2D> {
        if !(cell_ft > 0.0) {
            return Err(Error::Config(format!("cell size {cell_ft}")));
        }
        let (x0, x1, y0, y1) = self.extent();
        let nx = ((x1 - x0) / cell_ft).ceil().max(2.0) as usize;
        let ny = ((y1 - y0) / cell_ft).ceil().max(2.0) as usize;
        Grid2D::new(x0, x1, y0, y1, nx, ny)
    }
}

/// Equirectangular projection about a reference point, in feet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub lon0: f64,
    pub lat0: f64,
}

impl Projection {
    pub fn project(&self, lon: f64, lat: f64) -> (f64, f64) {
        let k = self.lat0.to_radians().cos();
        (
            EARTH_RADIUS_FT * (lon - self.lon0).to_radians() * k,
            EARTH_RADIUS_FT * (lat - self.lat0).to_radians(),
        )
    }

    pub fn unproject(&self, x: f64, y: f64) -> (f64, f64) {
        let k = self.lat0.to_radians().cos();
        (
            self.lon0 + (x / (EARTH_RADIUS_FT * k)).to_degrees(),
            self.lat0 + (y / EARTH_RADIUS_FT).to_degrees(),
        )
    }
}

/// The four daily time slots, by hour of day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeSlot {
    /// 03:00 to 08:59
    EarlyMorning,
    /// 09:00 to 14:59
    Morning,
    /// 15:00 to 20:59
    AfternoonEvening,
    /// 21:00 to 02:59
    Night,
}

impl TimeSlot {
    pub const ALL: [TimeSlot; 4] = [
        TimeSlot::EarlyMorning,
        TimeSlot::Morning,
        TimeSlot::AfternoonEvening,
        TimeSlot::Night,
    ];

    pub fn of_hour(hour: u32) -> Self {
        match hour % 24 {
            3..=8 => TimeSlot::EarlyMorning,
            9..=14 => TimeSlot::Morning,
            15..=20 => TimeSlot::AfternoonEvening,
            _ => TimeSlot::Night,
        }
    }

    pub fn contains(self, hour: u32) -> bool {
        Self::of_hour(hour) == self
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeSlot::EarlyMorning => "early-morning",
            TimeSlot::Morning => "morning",
            TimeSlot::AfternoonEvening => "afternoon-evening",
            TimeSlot::Night => "night",
        }
    }
}

impl fmt::Display for TimeSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TimeSlot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TimeSlot::ALL
            .into_iter()
            .find(|t| t.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParameter(format!("unknown time slot '{s}'")))
    }
}

/// Index of the `step_minutes`-long interval containing `ts`, counted from
/// the Unix epoch in local time.
pub fn step_index(ts: NaiveDateTime, step_minutes: u32) -> i64 {
    ts.and_utc()
        .timestamp()
        .div_euclid(60 * step_minutes as i64)
}

pub fn step_start(step: i64, step_minutes: u32) -> NaiveDateTime {
    chrono::DateTime::from_timestamp(step * 60 * step_minutes as i64, 0)
        .expect("step within chrono range")
        .naive_utc()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatioTemporalBin {
    pub cell: (usize, usize),
    pub step: i64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BinStats {
    pub binned: usize,
    pub out_of_bounds: usize,
    pub malformed: usize,
}

/// Passenger sums per (step, cell).
#[derive(Debug, Clone)]
pub struct Bins {
    grid: Grid2D,
    step_minutes: u32,
    raw: HashMap<(i64, usize), f64>,
    stats: BinStats,
}

impl Bins {
    pub fn new(grid: Grid2D, step_minutes: u32) -> Self {
        Self {
            grid,
            step_minutes: step_minutes.max(1),
            raw: HashMap::new(),
            stats: BinStats::default(),
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    pub fn stats(&self) -> BinStats {
        self.stats
    }

    pub fn add(&mut self, e: &PositioningEvent) {
        if !(e.x.is_finite() && e.y.is_finite()) || e.passengers == 0 {
            self.stats.malformed += 1;
            log::trace!("skipping malformed event {e:?}");
            return;
        }
        let Some((ix, iy)) = self.grid.locate(e.x, e.y) else {
            self.stats.out_of_bounds += 1;
            return;
        };
        let key = (
            step_index(e.timestamp, self.step_minutes),
            self.grid.index(ix, iy),
        );
        *self.raw.entry(key).or_insert(0.0) += e.passengers as f64;
        self.stats.binned += 1;
    }

    pub fn raw_value(&self, cell: (usize, usize), step: i64) -> f64 {
        self.raw
            .get(&(step, self.grid.index(cell.0, cell.1)))
            .copied()
            .unwrap_or(0.0)
    }

    /// Occupied bins with min-max normalized values, ordered by step then cell.
    /// Unoccupied bins count as zeros when taking the minimum.
    pub fn normalized(&self) -> Vec<SpatioTemporalBin> {
        let mut keys: Vec<&(i64, usize)> = self.raw.keys().collect();
        keys.sort_unstable();
        let Some((&(first, _), &(last, _))) = keys.first().zip(keys.last()) else {
            return Vec::new();
        };
        let capacity = (last - first + 1) as u128 * self.grid.len() as u128;
        let max = self.raw.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = if (self.raw.len() as u128) < capacity {
            0.0
        } else {
            self.raw.values().cloned().fold(f64::INFINITY, f64::min)
        };
        let range = max - min;
        keys.into_iter()
            .map(|&(step, idx)| {
                let v = self.raw[&(step, idx)];
                SpatioTemporalBin {
                    cell: self.grid.coords(idx),
                    step,
                    value: if range > 0.0 { (v - min) / range } else { 0.0 },
                }
            })
            .collect()
    }
}

pub fn bin_events<I>(events: I, grid: Grid2D, step_minutes: u32) -> Bins
where
    I: IntoIterator<Item = PositioningEvent>,
{
    let mut bins = Bins::new(grid, step_minutes);
    for e in events {
        bins.add(&e);
    }
    if bins.stats.out_of_bounds > 0 || bins.stats.malformed > 0 {
        log::info!(
            "binning dropped {} out-of-bounds and {} malformed events",
            bins.stats.out_of_bounds,
            bins.stats.malformed
        );
    }
    bins
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrailParams {
    pub smooth: SigmoidParams,
    /// Cone base radius in feet.
    pub mark_radius: f64,
    pub evaporation: f64,
}

/// Replays the slot's steps in time order: evaporate, then deposit one cone
/// per active bin with height `sigmoid(value)`. Steps between the first and
/// last occupied bin are all visited so evaporation also runs on idle steps.
pub fn slot_trail(
    bins: &[SpatioTemporalBin],
    grid: Grid2D,
    step_minutes: u32,
    slot: TimeSlot,
    params: &TrailParams,
) -> Result<Trail2D> {
    let mut trail = Trail2D::new(grid);
    let mut by_step: BTreeMap<i64, Vec<&SpatioTemporalBin>> = BTreeMap::new();
    for b in bins {
        by_step.entry(b.step).or_default().push(b);
    }
    let (Some(&first), Some(&last)) = (by_step.keys().next(), by_step.keys().next_back()) else {
        return Ok(trail);
    };
    for step in first..=last {
        if !slot.contains(step_start(step, step_minutes).hour()) {
            continue;
        }
        trail.evaporate(params.evaporation)?;
        if let Some(active) = by_step.get(&step) {
            for b in active {
                let (x, y) = grid.center(b.cell.0, b.cell.1);
                let h = sigmoid(b.value, params.smooth);
                trail.deposit(&Mark2D::new(x, y, params.mark_radius, h)?);
            }
        }
    }
    Ok(trail)
}

pub fn slot_trails(bins: &Bins, params: &TrailParams) -> Result<Vec<(TimeSlot, Trail2D)>> {
    let normalized = bins.normalized();
    TimeSlot::ALL
        .into_iter()
        .map(|slot| {
            slot_trail(&normalized, *bins.grid(), bins.step_minutes(), slot, params)
                .map(|t| (slot, t))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractParams {
    pub relevance_quantile: f64,
    pub min_slots: usize,
    pub min_area: usize,
}

impl Default for ExtractParams {
    fn default() -> Self {
        Self {
            relevance_quantile: 0.9,
            min_slots: 4,
            min_area: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hotspot {
    pub id: String,
    pub cells: Vec<(usize, usize)>,
    /// Intensity-weighted center, projected feet.
    pub centroid: (f64, f64),
    /// Summed intensity over all slot trails.
    pub intensity: f64,
}

impl Hotspot {
    pub fn contains(&self, cell: (usize, usize)) -> bool {
        self.cells.contains(&cell)
    }
}

/// Spreadsheet-style labels: A..Z, AA, AB, ...
pub fn label(mut i: usize) -> String {
    let mut s = Vec::new();
    loop {
        s.push(b'A' + (i % 26) as u8);
        if i < 26 {
            break;
        }
        i = i / 26 - 1;
    }
    s.reverse();
    String::from_utf8(s).expect("ascii")
}

/// Cells relevant in at least `min_slots` trails, grouped into 8-connected
/// regions of at least `min_area` cells, labeled by descending intensity.
pub fn extract_hotspots(trails: &[Trail2D], params: &ExtractParams) -> Result<Vec<Hotspot>> {
    let Some(first) = trails.first() else {
        return Err(Error::EmptyInput("slot trails"));
    };
    let grid = *first.grid();
    if trails.iter().any(|t| *t.grid() != grid) {
        return Err(Error::IncompatibleGrids);
    }
    if !(0.0..=1.0).contains(&params.relevance_quantile) {
        return Err(Error::InvalidParameter(format!(
            "relevance quantile {}",
            params.relevance_quantile
        )));
    }
    let mut votes = vec![0usize; grid.len()];
    for t in trails {
        let nonzero: Vec<f64> = t.intensity().iter().cloned().filter(|&v| v > 0.0).collect();
        if nonzero.is_empty() {
            continue;
        }
        let cut = percentile(&nonzero, params.relevance_quantile);
        for (v, &x) in votes.iter_mut().zip(t.intensity()) {
            if x > 0.0 && x >= cut {
                *v += 1;
            }
        }
    }
    let keep: Vec<bool> = votes
        .iter()
        .map(|&v| v >= params.min_slots.max(1))
        .collect();
    let strength: Vec<f64> = (0..grid.len())
        .map(|i| trails.iter().map(|t| t.intensity()[i]).sum())
        .collect();

    let mut seen = vec![false; grid.len()];
    let mut regions: Vec<Hotspot> = Vec::new();
    for start in 0..grid.len() {
        if !keep[start] || seen[start] {
            continue;
        }
        let mut cells = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(idx) = queue.pop_front() {
            cells.push(idx);
            let (ix, iy) = grid.coords(idx);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
                    if (dx, dy) == (0, 0)
                        || nx < 0
                        || ny < 0
                        || nx >= grid.nx as i64
                        || ny >= grid.ny as i64
                    {
                        continue;
                    }
                    let n = grid.index(nx as usize, ny as usize);
                    if keep[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        if cells.len() < params.min_area {
            continue;
        }
        cells.sort_unstable();
        let intensity: f64 = cells.iter().map(|&i| strength[i]).sum();
        let (mut cx, mut cy) = (0.0, 0.0);
        for &i in &cells {
            let (x, y) = grid.center(grid.coords(i).0, grid.coords(i).1);
            let w = if intensity > 0.0 {
                strength[i] / intensity
            } else {
                1.0 / cells.len() as f64
            };
            cx += w * x;
            cy += w * y;
        }
        regions.push(Hotspot {
            id: String::new(),
            cells: cells.iter().map(|&i| grid.coords(i)).collect(),
            centroid: (cx, cy),
            intensity,
        });
    }
    regions.sort_by(|a, b| {
        b.intensity
            .total_cmp(&a.intensity)
            .then(a.cells.cmp(&b.cells))
    });
    for (i, h) in regions.iter_mut().enumerate() {
        h.id = label(i);
    }
    Ok(regions)
}

/// Per-day activity inside each hotspot, one sample per step.
#[derive(Debug, Clone)]
pub struct HotspotSeries {
    grid: Grid2D,
    step_minutes: u32,
    /// Hotspot index per grid cell.
    owner: Vec<Option<usize>>,
    ids: Vec<String>,
    raw: Vec<BTreeMap<NaiveDate, Vec<f64>>>,
    first_day: Option<NaiveDate>,
    last_day: Option<NaiveDate>,
}

/// One day's series for one hotspot.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySeries {
    pub day: NaiveDate,
    pub samples: Vec<f64>,
    /// No event fell inside the hotspot on this day.
    pub empty: bool,
}

impl HotspotSeries {
    pub fn new(grid: Grid2D, step_minutes: u32, hotspots: &[Hotspot]) -> Self {
        let mut owner = vec![None; grid.len()];
        for (k, h) in hotspots.iter().enumerate() {
            for &(ix, iy) in &h.cells {
                if ix < grid.nx && iy < grid.ny {
                    owner[grid.index(ix, iy)] = Some(k);
                }
            }
        }
        Self {
            grid,
            step_minutes: step_minutes.max(1),
            owner,
            ids: hotspots.iter().map(|h| h.id.clone()).collect(),
            raw: vec![BTreeMap::new(); hotspots.len()],
            first_day: None,
            last_day: None,
        }
    }

    pub fn steps_per_day(&self) -> usize {
        (24 * 60 / self.step_minutes) as usize
    }

    pub fn add(&mut self, e: &PositioningEvent) {
        let day = e.timestamp.date();
        // the observed range follows pickups; dropoffs spill past midnight
        if e.kind == EventKind::Pickup {
            self.first_day = Some(self.first_day.map_or(day, |d| d.min(day)));
            self.last_day = Some(self.last_day.map_or(day, |d| d.max(day)));
        }
        let Some((ix, iy)) = self.grid.locate(e.x, e.y) else {
            return;
        };
        let Some(k) = self.owner[self.grid.index(ix, iy)] else {
            return;
        };
        let minute = e.timestamp.hour() * 60 + e.timestamp.minute();
        let slot = (minute / self.step_minutes) as usize;
        let n = self.steps_per_day();
        let day_series = self.raw[k].entry(day).or_insert_with(|| vec![0.0; n]);
        day_series[slot.min(n - 1)] += e.passengers as f64;
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|h| h == id)
    }

    /// Raw passenger counts for one day; all zeros if nothing was recorded.
    pub fn raw(&self, hotspot: usize, day: NaiveDate) -> Vec<f64> {
        self.raw[hotspot]
            .get(&day)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.steps_per_day()])
    }

    /// Every day in `[from, to]` (defaults: the observed date range),
    /// min-max normalized jointly over the whole period.
    pub fn normalized(
        &self,
        hotspot: usize,
        from: Option<NaiveDate>,
        to: Option<NaiveDate>,
    ) -> Vec<DaySeries> {
        let (Some(from), Some(to)) = (from.or(self.first_day), to.or(self.last_day)) else {
            return Vec::new();
        };
        let mut days = Vec::new();
        let mut d = from;
        while d <= to {
            days.push(d);
            d += Duration::days(1);
        }
        let raws: Vec<Vec<f64>> = days.iter().map(|&d| self.raw(hotspot, d)).collect();
        let (lo, hi) = raws
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = hi - lo;
        days.into_iter()
            .zip(raws)
            .map(|(day, r)| {
                let empty = r.iter().all(|&v| v == 0.0);
                if empty {
                    log::warn!("hotspot {} has no events on {day}", self.ids[hotspot]);
                }
                let samples = if range > 0.0 {
                    r.iter().map(|&v| (v - lo) / range).collect()
                } else {
                    vec![0.0; r.len()]
                };
                DaySeries {
                    day,
                    samples,
                    empty,
                }
            })
            .collect()
    }
}
