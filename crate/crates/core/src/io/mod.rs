//! Files and orchestration: configuration, trip ingestion, synthetic data,
//! the staged pipeline and the file formats shared between stages.

pub mod config;
pub mod ingest;
pub mod pipeline;
pub mod synth;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hotspot::{Hotspot, Projection};
use crate::perceptron::{ActivityLevelSeries, StigmergicPerceptron};
use crate::srf::{Archetype, ArchetypeKind, Srf, SrfParams};
use crate::training::LabeledWindow;

pub use config::PipelineConfig;
pub use ingest::{IngestStats, TripReader};
pub use pipeline::Pipeline;
pub use synth::{generate_synthetic, SyntheticSpec};

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Creates `path` and hands a buffered writer to `f`.
pub fn write_file(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Dates in config files may be bare TOML dates or quoted strings.
pub(crate) mod toml_date {
    use chrono::NaiveDate;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Toml(toml::value::Datetime),
        Text(String),
    }

    fn parse<E: serde::de::Error>(r: Repr) -> Result<NaiveDate, E> {
        let s = match r {
            Repr::Toml(d) => d.to_string(),
            Repr::Text(s) => s,
        };
        s.trim()
            .parse()
            .map_err(|e| E::custom(format!("bad date '{s}': {e}")))
    }

    pub fn serialize<S: Serializer>(d: &NaiveDate, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(d)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
        parse(Repr::deserialize(d)?)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(d: &Option<NaiveDate>, s: S) -> Result<S::Ok, S::Error> {
            match d {
                Some(d) => s.collect_str(d),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<NaiveDate>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(parse).transpose()
        }
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.into(),
        message: message.into(),
    }
}

/// `id,cells,centroid_lon,centroid_lat,intensity`; cells are `ix:iy`
/// pairs separated by spaces.
pub fn write_hotspots_csv<W: Write>(
    mut w: W,
    hotspots: &[Hotspot],
    proj: &Projection,
) -> std::io::Result<()> {
    writeln!(w, "id,cells,centroid_lon,centroid_lat,intensity")?;
    for h in hotspots {
        let cells: Vec<String> = h.cells.iter().map(|(x, y)| format!("{x}:{y}")).collect();
        let (lon, lat) = proj.unproject(h.centroid.0, h.centroid.1);
        writeln!(
            w,
            "{},{},{lon:.6},{lat:.6},{:.6}",
            h.id,
            cells.join(" "),
            h.intensity
        )?;
    }
    Ok(())
}

pub fn read_hotspots_csv(path: &Path, proj: &Projection) -> Result<Vec<Hotspot>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let field = |i: usize| {
            rec.get(i)
                .ok_or_else(|| format_err(path, "short hotspot row"))
        };
        let num = |i: usize| -> Result<f64> {
            field(i)?
                .trim()
                .parse()
                .map_err(|_| format_err(path, format!("bad number in column {i}")))
        };
        let cells = field(1)?
            .split_whitespace()
            .map(|c| {
                let (x, y) = c.split_once(':')?;
                Some((x.parse().ok()?, y.parse().ok()?))
            })
            .collect::<Option<Vec<(usize, usize)>>>()
            .ok_or_else(|| format_err(path, "bad cell list"))?;
        out.push(Hotspot {
            id: field(0)?.to_string(),
            cells,
            centroid: proj.project(num(2)?, num(3)?),
            intensity: num(4)?,
        });
    }
    Ok(out)
}

/// `date,window_index,level`
pub fn write_levels_csv<W: Write>(mut w: W, series: &[ActivityLevelSeries]) -> std::io::Result<()> {
    writeln!(w, "date,window_index,level")?;
    for s in series {
        for (i, l) in s.levels.iter().enumerate() {
            writeln!(w, "{},{i},{l:.6}", s.day)?;
        }
    }
    Ok(())
}

pub fn read_levels_csv(path: &Path) -> Result<Vec<ActivityLevelSeries>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out: Vec<ActivityLevelSeries> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = || format_err(path, format!("bad activity-level row {:?}", rec.as_slice()));
        let day: NaiveDate = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(bad)?;
        let idx: usize = rec
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(bad)?;
        let level: f64 = rec
            .get(2)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(bad)?;
        match out.last_mut() {
            Some(s) if s.day == day && s.levels.len() == idx => s.levels.push(level),
            _ if idx == 0 => out.push(ActivityLevelSeries {
                day,
                levels: vec![level],
            }),
            _ => return Err(bad()),
        }
    }
    Ok(out)
}

/// One window per row: the target, then the samples.
pub fn read_labeled_windows(path: &Path) -> Result<Vec<LabeledWindow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let values: Option<Vec<f64>> = rec.iter().map(|s| s.trim().parse().ok()).collect();
        match values {
            Some(v) if v.len() >= 3 => out.push(LabeledWindow {
                target: v[0],
                window: v[1..].to_vec(),
                source: None,
            }),
            // a header line is tolerated
            None if line == 0 => continue,
            _ => {
                return Err(format_err(
                    path,
                    format!("bad labeled window on line {}", line + 1),
                ))
            }
        }
    }
    if out.is_empty() {
        return Err(format_err(path, "no labeled windows"));
    }
    Ok(out)
}

pub fn write_labeled_windows<W: Write>(mut w: W, data: &[LabeledWindow]) -> std::io::Result<()> {
    for d in data {
        let vals: Vec<String> = d.window.iter().map(|v| format!("{v:.6}")).collect();
        writeln!(w, "{},{}", d.target, vals.join(","))?;
    }
    Ok(())
}

/// Stored form of a (possibly partly) trained perceptron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptronFile {
    pub window: usize,
    pub hop: usize,
    #[serde(default, rename = "field")]
    pub fields: Vec<FieldEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub archetype: ArchetypeKind,
    pub params: SrfParams,
    pub template: Vec<f64>,
}

impl PerceptronFile {
    pub fn from_perceptron(sp: &StigmergicPerceptron) -> Self {
        Self {
            window: sp.window_len(),
            hop: sp.window_hop(),
            fields: sp.srfs().iter().map(FieldEntry::of).collect(),
        }
    }

    /// Adds or replaces the field for `srf`'s archetype, keeping rank order.
    pub fn upsert(&mut self, srf: &Srf) {
        self.fields.retain(|f| f.archetype != srf.archetype().kind);
        self.fields.push(FieldEntry::of(srf));
        self.fields.sort_by_key(|f| f.archetype.rank());
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| format_err(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| format_err(path, e.to_string()))?;
        write_file(path, |w| w.write_all(text.as_bytes()))
    }

    /// Requires every archetype to be present.
    pub fn perceptron(&self) -> Result<StigmergicPerceptron> {
        let missing: Vec<&str> = ArchetypeKind::ALL
            .iter()
            .filter(|k| !self.fields.iter().any(|f| f.archetype == **k))
            .map(|k| k.name())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!(
                "perceptron lacks fields: {}",
                missing.join(", ")
            )));
        }
        let srfs = self
            .fields
            .iter()
            .map(|f| Srf::new(f.params, Archetype::new(f.archetype, f.template.clone())?))
            .collect::<Result<Vec<_>>>()?;
        StigmergicPerceptron::new(srfs, self.hop)
    }
}

impl FieldEntry {
    fn of(srf: &Srf) -> Self {
        Self {
            archetype: srf.archetype().kind,
            params: *srf.params(),
            template: srf.archetype().template.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::srf::SrfParams;

    #[test]
    fn hotspots_csv_round_trip() {
        let proj = Projection {
            lon0: -73.97,
            lat0: 40.76,
        };
        let hs = vec![Hotspot {
            id: "A".into(),
            cells: vec![(3, 4), (4, 4)],
            centroid: (120.0, -40.0),
            intensity: 12.5,
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hotspots.csv");
        write_file(&path, |w| write_hotspots_csv(w, &hs, &proj)).unwrap();
        let back = read_hotspots_csv(&path, &proj).unwrap();
        assert_eq!(back[0].id, "A");
        assert_eq!(back[0].cells, hs[0].cells);
        assert!((back[0].centroid.0 - 120.0).abs() < 0.5);
        assert!((back[0].centroid.1 + 40.0).abs() < 0.5);
    }

    #[test]
    fn levels_csv_round_trip() {
        let series = vec![
            ActivityLevelSeries {
                day: NaiveDate::from_ymd_opt(2015, 2, 1).unwrap(),
                levels: vec![1.0, 2.5],
            },
            ActivityLevelSeries {
                day: NaiveDate::from_ymd_opt(2015, 2, 2).unwrap(),
                levels: vec![7.0, 4.0],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("levels.csv");
        write_file(&path, |w| write_levels_csv(w, &series)).unwrap();
        assert_eq!(read_levels_csv(&path).unwrap(), series);
    }

    #[test]
    fn labeled_windows_round_trip() {
        let data = vec![
            LabeledWindow {
                window: vec![0.1, 0.2, 0.3],
                target: 1.0,
                source: None,
            },
            LabeledWindow {
                window: vec![0.9, 0.9, 0.9],
                target: 0.0,
                source: None,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("windows.csv");
        write_file(&path, |w| write_labeled_windows(w, &data)).unwrap();
        assert_eq!(read_labeled_windows(&path).unwrap(), data);
    }

    #[test]
    fn perceptron_file_round_trip_and_completeness() {
        let srfs: Vec<Srf> = Archetype::standard_set(12)
            .into_iter()
            .map(|a| Srf::new(SrfParams::default(), a).unwrap())
            .collect();
        let sp = StigmergicPerceptron::new(srfs.clone(), 6).unwrap();
        let file = PerceptronFile::from_perceptron(&sp);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("perceptron.toml");
        file.save(&path).unwrap();
        let back = PerceptronFile::load(&path).unwrap();
        assert_eq!(back, file);
        let w = vec![0.4; 12];
        assert_eq!(
            back.perceptron().unwrap().level(&w).unwrap(),
            sp.level(&w).unwrap()
        );

        let mut partial = PerceptronFile {
            window: 12,
            hop: 6,
            fields: Vec::new(),
        };
        partial.upsert(&srfs[3]);
        partial.upsert(&srfs[0]);
        partial.upsert(&srfs[3]);
        assert_eq!(partial.fields.len(), 2);
        assert_eq!(partial.fields[0].archetype, ArchetypeKind::Asleep);
        let err = partial.perceptron().unwrap_err().to_string();
        assert!(err.contains("falling") && !err.contains("asleep"));
    }
}
