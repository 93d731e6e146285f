//! Synthetic trip records with known hotspots, day classes and anomalies.
//!
//! Each hotspot emits pickups around its center following the archetype
//! schedule of the day's class. Dropoffs and background trips are spread
//! uniformly over the area.

use std::fmt::Write as _;
use std::io::Write;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::clustering::DayClass;
use crate::error::{Error, Result};
use crate::hotspot::{BoundingBox, TimeSlot};
use crate::srf::{ramp, ArchetypeKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleBlock {
    pub archetype: ArchetypeKind,
    pub from_hour: u32,
    pub to_hour: u32,
}

const fn block(archetype: ArchetypeKind, from_hour: u32, to_hour: u32) -> ScheduleBlock {
    ScheduleBlock {
        archetype,
        from_hour,
        to_hour,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedules {
    pub working: Vec<ScheduleBlock>,
    pub entertainment: Vec<ScheduleBlock>,
    pub leisure: Vec<ScheduleBlock>,
}

impl Default for Schedules {
    fn default() -> Self {
        use ArchetypeKind::*;
        Self {
            working: vec![
                block(Asleep, 0, 5),
                block(Awakening, 5, 7),
                block(Rise, 7, 8),
                block(RushHour, 8, 10),
                block(Chill, 10, 11),
                block(Flow, 11, 16),
                block(Rise, 16, 17),
                block(RushHour, 17, 19),
                block(Chill, 19, 20),
                block(Falling, 20, 23),
                block(Asleep, 23, 24),
            ],
            entertainment: vec![
                block(Falling, 0, 3),
                block(Asleep, 3, 7),
                block(Awakening, 7, 10),
                block(Flow, 10, 17),
                block(Rise, 17, 19),
                block(RushHour, 19, 24),
            ],
            leisure: vec![
                block(Asleep, 0, 9),
                block(Awakening, 9, 13),
                block(Flow, 13, 19),
                block(Falling, 19, 23),
                block(Asleep, 23, 24),
            ],
        }
    }
}

impl Schedules {
    pub fn of(&self, class: DayClass) -> &[ScheduleBlock] {
        match class {
            DayClass::Working => &self.working,
            DayClass::Entertainment => &self.entertainment,
            DayClass::Leisure => &self.leisure,
        }
    }
}

/// Activity profile in `[0, 1]` with one sample per step; each block ramps
/// between its archetype's endpoints.
pub fn schedule_profile(blocks: &[ScheduleBlock], step_minutes: u32) -> Result<Vec<f64>> {
    let mut hour = 0;
    for b in blocks {
        if b.from_hour != hour || b.to_hour <= b.from_hour {
            return Err(Error::Config(format!(
                "schedule block {}..{} does not continue from hour {hour}",
                b.from_hour, b.to_hour
            )));
        }
        hour = b.to_hour;
    }
    if hour != 24 {
        return Err(Error::Config(format!("schedule covers {hour} of 24 hours")));
    }
    if step_minutes == 0 || 60 % step_minutes != 0 {
        return Err(Error::Config(format!(
            "step of {step_minutes} minutes does not divide an hour"
        )));
    }
    let per_hour = (60 / step_minutes) as usize;
    let mut out = Vec::with_capacity(24 * per_hour);
    for b in blocks {
        let (lo, hi) = b.archetype.endpoints();
        out.extend(ramp(lo, hi, (b.to_hour - b.from_hour) as usize * per_hour));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticHotspot {
    pub lon: f64,
    pub lat: f64,
    /// Standard deviation of pickup positions, feet.
    pub sigma_ft: f64,
    /// Trips per step at full activity.
    pub peak_trips: f64,
    /// Restricts activity to these slots; all day when absent.
    #[serde(default)]
    pub slots: Option<Vec<TimeSlot>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anomaly {
    #[serde(with = "super::toml_date")]
    pub date: NaiveDate,
    /// Class whose schedule replaces the calendar's on that date.
    pub class: DayClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(with = "super::toml_date")]
    pub start: NaiveDate,
    pub days: usize,
    pub area: BoundingBox,
    pub step_minutes: u32,
    /// Uniform perturbation of the profile, `±noise_amp`.
    pub noise_amp: f64,
    /// Uniformly placed trips per hour over the whole area.
    pub background_per_hour: f64,
    pub hotspots: Vec<SyntheticHotspot>,
    pub schedules: Schedules,
    pub anomalies: Vec<Anomaly>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2015, 2, 2).expect("valid date"),
            days: 28,
            area: BoundingBox {
                lon_min: -74.02,
                lon_max: -73.93,
                lat_min: 40.70,
                lat_max: 40.82,
            },
            step_minutes: 5,
            noise_amp: 0.05,
            background_per_hour: 60.0,
            hotspots: vec![
                SyntheticHotspot {
                    lon: -73.985,
                    lat: 40.758,
                    sigma_ft: 250.0,
                    peak_trips: 8.0,
                    slots: None,
                },
                SyntheticHotspot {
                    lon: -74.008,
                    lat: 40.712,
                    sigma_ft: 250.0,
                    peak_trips: 5.0,
                    slots: None,
                },
            ],
            schedules: Schedules::default(),
            anomalies: Vec::new(),
        }
    }
}

impl SyntheticSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.area.validate()?;
        for class in DayClass::ALL {
            schedule_profile(self.schedules.of(class), self.step_minutes)?;
        }
        if !(self.noise_amp >= 0.0 && self.background_per_hour >= 0.0) {
            return Err(Error::Config(
                "noise and background rate must be non-negative".into(),
            ));
        }
        for h in &self.hotspots {
            let inside = (self.area.lon_min..=self.area.lon_max).contains(&h.lon)
                && (self.area.lat_min..=self.area.lat_max).contains(&h.lat);
            if !inside || !(h.sigma_ft >= 0.0) || !(h.peak_trips >= 0.0) {
                return Err(Error::Config(format!(
                    "infeasible hotspot at ({}, {})",
                    h.lon, h.lat
                )));
            }
        }
        let end = self.end();
        if let Some(a) = self
            .anomalies
            .iter()
            .find(|a| a.date < self.start || a.date >= end)
        {
            return Err(Error::Config(format!(
                "anomaly date {} outside the generated range",
                a.date
            )));
        }
        Ok(())
    }

    /// First date after the generated range.
    pub fn end(&self) -> NaiveDate {
        self.start + Duration::days(self.days as i64)
    }

    pub fn class_of(&self, date: NaiveDate) -> DayClass {
        self.anomalies
            .iter()
            .find(|a| a.date == date)
            .map_or_else(|| DayClass::of_date(date), |a| a.class)
    }
}

/// Ground truth of a generated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthManifest {
    pub seed: u64,
    pub rows: u64,
    pub hotspot_centers: Vec<(f64, f64)>,
    pub day_classes: Vec<(NaiveDate, DayClass)>,
    pub anomalies: Vec<Anomaly>,
}

impl SynthManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "rows={}", self.rows);
        for (i, (lon, lat)) in self.hotspot_centers.iter().enumerate() {
            let _ = writeln!(s, "hotspot.{i}.center={lon:.6},{lat:.6}");
        }
        for (d, c) in &self.day_classes {
            let _ = writeln!(s, "day.{d}={c}");
        }
        for a in &self.anomalies {
            let _ = writeln!(s, "anomaly.{}={}", a.date, a.class);
        }
        s
    }
}

const HEADER: &str =
    "pickup_datetime,dropoff_datetime,pickup_longitude,pickup_latitude,dropoff_longitude,dropoff_latitude,passenger_count";

fn uniform_point(area: &BoundingBox, rng: &mut ChaCha8Rng) -> (f64, f64) {
    (
        rng.gen_range(area.lon_min..area.lon_max),
        rng.gen_range(area.lat_min..area.lat_max),
    )
}

fn write_trip<W: Write>(
    w: &mut W,
    t: NaiveDateTime,
    pickup: (f64, f64),
    dropoff: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> std::io::Result<()> {
    let ride = Duration::seconds(rng.gen_range(300..1200));
    writeln!(
        w,
        "{},{},{:.6},{:.6},{:.6},{:.6},1",
        t.format("%Y-%m-%d %H:%M:%S"),
        (t + ride).format("%Y-%m-%d %H:%M:%S"),
        pickup.0,
        pickup.1,
        dropoff.0,
        dropoff.1
    )
}

/// Writes trip records in TLC column layout, in pickup-step order.
pub fn generate_synthetic<W: Write>(
    spec: &SyntheticSpec,
    seed: u64,
    mut w: W,
) -> Result<SynthManifest> {
    spec.validate()?;
    let io_err = |e| Error::io("<synthetic output>", e);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let proj = spec.area.projection();
    let step_secs = spec.step_minutes as i64 * 60;
    let steps = (1440 / spec.step_minutes) as usize;
    let profiles: Vec<Vec<f64>> = DayClass::ALL
        .iter()
        .map(|&c| schedule_profile(spec.schedules.of(c), spec.step_minutes))
        .collect::<Result<_>>()?;
    let spreads: Vec<(Normal<f64>, (f64, f64))> = spec
        .hotspots
        .iter()
        .map(|h| {
            let normal = Normal::new(0.0, h.sigma_ft).map_err(|e| Error::Config(e.to_string()))?;
            Ok((normal, proj.project(h.lon, h.lat)))
        })
        .collect::<Result<_>>()?;
    let background = spec.background_per_hour * spec.step_minutes as f64 / 60.0;

    writeln!(w, "{HEADER}").map_err(io_err)?;
    let mut rows = 0u64;
    let mut day_classes = Vec::with_capacity(spec.days);
    for d in 0..spec.days {
        let date = spec.start + Duration::days(d as i64);
        let class = spec.class_of(date);
        day_classes.push((date, class));
        let profile = &profiles[DayClass::ALL
            .iter()
            .position(|&c| c == class)
            .expect("known class")];
        let midnight = date.and_hms_opt(0, 0, 0).expect("midnight");
        for (s, &p) in profile.iter().enumerate().take(steps) {
            let step_start = midnight + Duration::seconds(s as i64 * step_secs);
            let hour = (s as i64 * step_secs / 3600) as u32;
            for (h, (normal, (cx, cy))) in spec.hotspots.iter().zip(&spreads) {
                if h.slots
                    .as_ref()
                    .is_some_and(|sl| !sl.iter().any(|t| t.contains(hour)))
                {
                    continue;
                }
                let noise = if spec.noise_amp > 0.0 {
                    rng.gen_range(-spec.noise_amp..=spec.noise_amp)
                } else {
                    0.0
                };
                let n = (h.peak_trips * (p + noise).clamp(0.0, 1.0)).round() as usize;
                for _ in 0..n {
                    let t = step_start + Duration::seconds(rng.gen_range(0..step_secs));
                    let pick =
                        proj.unproject(cx + normal.sample(&mut rng), cy + normal.sample(&mut rng));
                    let drop = uniform_point(&spec.area, &mut rng);
                    write_trip(&mut w, t, pick, drop, &mut rng).map_err(io_err)?;
                    rows += 1;
                }
            }
            let mut n = background.floor() as usize;
            if rng.gen::<f64>() < background.fract() {
                n += 1;
            }
            for _ in 0..n {
                let t = step_start + Duration::seconds(rng.gen_range(0..step_secs));
                let pick = uniform_point(&spec.area, &mut rng);
                let drop = uniform_point(&spec.area, &mut rng);
                write_trip(&mut w, t, pick, drop, &mut rng).map_err(io_err)?;
                rows += 1;
            }
        }
    }
    w.flush().map_err(io_err)?;
    Ok(SynthManifest {
        seed,
        rows,
        hotspot_centers: spec.hotspots.iter().map(|h| (h.lon, h.lat)).collect(),
        day_classes,
        anomalies: spec.anomalies.clone(),
    })
}
