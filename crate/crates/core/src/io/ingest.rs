//! Streaming reader for taxi trip records.
//!
//! Each trip row yields a pickup and a dropoff event. Rows with a missing or
//! unparsable field, a zero coordinate, or no passengers are dropped whole,
//! so `dropped + events / 2 == rows` always holds.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::hotspot::{EventKind, PositioningEvent, Projection};

const COLUMNS: [&str; 7] = [
    "pickup_datetime",
    "dropoff_datetime",
    "pickup_longitude",
    "pickup_latitude",
    "dropoff_longitude",
    "dropoff_latitude",
    "passenger_count",
];

const TIME_FORMATS: [&str; 3] = [
    "%Y-%m-%d %H:%M:%S",
    "%m/%d/%Y %I:%M:%S %p",
    "%Y-%m-%dT%H:%M:%S",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub rows: u64,
    pub dropped: u64,
    pub events: u64,
}

/// Raw trip in geographic coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trip {
    pub pickup_time: NaiveDateTime,
    pub dropoff_time: NaiveDateTime,
    pub pickup: (f64, f64),
    pub dropoff: (f64, f64),
    pub passengers: u32,
}

impl Trip {
    pub fn events(&self, proj: &Projection) -> [PositioningEvent; 2] {
        let (px, py) = proj.project(self.pickup.0, self.pickup.1);
        let (dx, dy) = proj.project(self.dropoff.0, self.dropoff.1);
        [
            PositioningEvent {
                timestamp: self.pickup_time,
                x: px,
                y: py,
                passengers: self.passengers,
                kind: EventKind::Pickup,
            },
            PositioningEvent {
                timestamp: self.dropoff_time,
                x: dx,
                y: dy,
                passengers: self.passengers,
                kind: EventKind::Dropoff,
            },
        ]
    }
}

fn column_index(headers: &csv::ByteRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| {
        let h = String::from_utf8_lossy(h).trim().to_ascii_lowercase();
        let h = h.trim_start_matches('\u{feff}');
        h == name || h.strip_prefix("tpep_").or_else(|| h.strip_prefix("lpep_")) == Some(name)
    })
}

fn parse_time(field: &[u8]) -> Option<NaiveDateTime> {
    let s = std::str::from_utf8(field).ok()?.trim();
    TIME_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
}

fn parse_f64(field: &[u8]) -> Option<f64> {
    let v: f64 = std::str::from_utf8(field).ok()?.trim().parse().ok()?;
    (v.is_finite() && v != 0.0).then_some(v)
}

fn parse_passengers(field: &[u8]) -> Option<u32> {
    let s = std::str::from_utf8(field).ok()?.trim();
    // some exports write counts as floats
    let v: f64 = s.parse().ok()?;
    (v >= 1.0 && v.fract() == 0.0 && v < u32::MAX as f64).then_some(v as u32)
}

pub struct TripReader<R: Read> {
    path: PathBuf,
    reader: csv::Reader<R>,
    record: csv::ByteRecord,
    index: [usize; 7],
    stats: IngestStats,
}

impl TripReader<BufReader<File>> {
    pub fn from_path(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::new(BufReader::with_capacity(1 << 16, file), path)
    }
}

impl<R: Read> TripReader<R> {
    /// `path` is used only in diagnostics.
    pub fn new(source: R, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
        let headers = reader
            .byte_headers()
            .map_err(|e| Error::csv(&path, e))?
            .clone();
        let mut index = [0; 7];
        for (slot, name) in index.iter_mut().zip(COLUMNS) {
            *slot = column_index(&headers, name).ok_or_else(|| Error::Format {
                path: path.clone(),
                message: format!("header has no '{name}' column"),
            })?;
        }
        Ok(Self {
            path,
            reader,
            record: csv::ByteRecord::new(),
            index,
            stats: IngestStats::default(),
        })
    }

    pub fn stats(&self) -> IngestStats {
        self.stats
    }

    fn parse(&self) -> Option<Trip> {
        let f = |k: usize| self.record.get(self.index[k]);
        Some(Trip {
            pickup_time: parse_time(f(0)?)?,
            dropoff_time: parse_time(f(1)?)?,
            pickup: (parse_f64(f(2)?)?, parse_f64(f(3)?)?),
            dropoff: (parse_f64(f(4)?)?, parse_f64(f(5)?)?),
            passengers: parse_passengers(f(6)?)?,
        })
    }

    /// Next well-formed trip; `None` at end of file.
    pub fn next_trip(&mut self) -> Result<Option<Trip>> {
        loop {
            let more = self
                .reader
                .read_byte_record(&mut self.record)
                .map_err(|e| Error::csv(&self.path, e))?;
            if !more {
                return Ok(None);
            }
            self.stats.rows += 1;
            match self.parse() {
                Some(t) => {
                    self.stats.events += 2;
                    return Ok(Some(t));
                }
                None => {
                    self.stats.dropped += 1;
                    log::debug!(
                        "{}: dropping row {}",
                        self.path.display(),
                        self.stats.rows + 1
                    );
                }
            }
        }
    }

    /// Calls `f` on every event in file order, then returns the counters.
    pub fn for_each_event(
        mut self,
        proj: &Projection,
        mut f: impl FnMut(&PositioningEvent),
    ) -> Result<IngestStats> {
        while let Some(trip) = self.next_trip()? {
            for e in trip.events(proj) {
                f(&e);
            }
        }
        Ok(self.stats)
    }
}

impl<R: Read> Iterator for TripReader<R> {
    type Item = Result<Trip>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_trip().transpose()
    }
}
