use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ContinuousSignal, NeuralDataset, SpikeEvent};
use crate::error::{Error, Result};

/// File names making up a dataset directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSchema {
    pub spikes: String,
    pub continuous: String,
    pub kinematics: String,
    pub meta: String,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        Self {
            spikes: "spikes.csv".into(),
            continuous: "continuous.csv".into(),
            kinematics: "kinematics.csv".into(),
            meta: "meta.json".into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    duration_s: f64,
    continuous_rate_hz: Option<f64>,
    kin_rate_hz: f64,
}

/// Loads and validates a dataset directory.
///
/// `spikes.csv` and `continuous.csv` are optional; a spikes file with no rows
/// counts as absent. `kinematics.csv` and `meta.json` are required.
pub fn load_dataset(dir: &Path, schema: &DatasetSchema) -> Result<NeuralDataset> {
    let meta_path = dir.join(&schema.meta);
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|source| Error::Load {
        path: meta_path.clone(),
        source,
    })?;
    let meta: Meta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        file: schema.meta.clone(),
        line: e.line() as u64,
        message: e.to_string(),
    })?;

    let kin_path = dir.join(&schema.kinematics);
    let (_, kin_rows) = read_table(&kin_path, &schema.kinematics, Some("t_s"))?;
    let kinematics = rows_to_matrix(&kin_rows, 1)?;

    let spikes_path = dir.join(&schema.spikes);
    let (spike_events, n_units) = if spikes_path.exists() {
        let (_, rows) = read_table(&spikes_path, &schema.spikes, Some("unit"))?;
        if rows.is_empty() {
            (None, 0)
        } else {
            let mut events = Vec::with_capacity(rows.len());
            for (line, fields) in &rows {
                if fields.len() != 2 {
                    return Err(Error::Parse {
                        file: schema.spikes.clone(),
                        line: *line,
                        message: format!("expected 2 fields, found {}", fields.len()),
                    });
                }
                if fields[0] < 0.0 || fields[0].fract() != 0.0 {
                    return Err(Error::Parse {
                        file: schema.spikes.clone(),
                        line: *line,
                        message: format!("unit index {} is not a non-negative integer", fields[0]),
                    });
                }
                events.push(SpikeEvent {
                    unit: fields[0] as usize,
                    time: fields[1],
                });
            }
            let n_units = contiguous_units(&events)?;
            (Some(events), n_units)
        }
    } else {
        (None, 0)
    };

    let cont_path = dir.join(&schema.continuous);
    let continuous = if cont_path.exists() {
        let (_, rows) = read_table(&cont_path, &schema.continuous, Some("t_s"))?;
        if rows.is_empty() {
            None
        } else {
            let rate_hz = meta.continuous_rate_hz.ok_or_else(|| {
                Error::Validation("continuous.csv present but continuous_rate_hz is null".into())
            })?;
            let samples = rows_to_matrix(&rows, 1)?.reversed_axes().as_standard_layout().to_owned();
            Some(ContinuousSignal { samples, rate_hz })
        }
    } else {
        None
    };

    let ds = NeuralDataset {
        spike_events,
        n_units,
        continuous,
        kinematics,
        kin_rate_hz: meta.kin_rate_hz,
        duration: meta.duration_s,
        metadata: BTreeMap::new(),
    };
    ds.validate()?;
    Ok(ds)
}

fn contiguous_units(events: &[SpikeEvent]) -> Result<usize> {
    let n = events.iter().map(|e| e.unit + 1).max().unwrap_or(0);
    let mut seen = vec![false; n];
    for e in events {
        seen[e.unit] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Validation(format!(
            "unit indices are not contiguous from 0: unit {missing} has no spikes"
        )));
    }
    Ok(n)
}

type Rows = Vec<(u64, Vec<f64>)>;

fn read_table(path: &Path, name: &str, first_header: Option<&str>) -> Result<(Vec<String>, Rows)> {
    let file = File::open(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let parse_err = |line: u64, message: String| Error::Parse {
        file: name.to_string(),
        line,
        message,
    };
    let headers: Vec<String> = match reader.headers() {
        Ok(h) => h.iter().map(str::to_string).collect(),
        Err(e) => return Err(parse_err(1, e.to_string())),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        // zero-byte file
        return Ok((headers, Vec::new()));
    }
    if let Some(expected) = first_header {
        if headers.first().map(String::as_str) != Some(expected) {
            return Err(parse_err(1, format!("header must start with `{expected}`")));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != headers.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let values = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("invalid number `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok((headers, rows))
}

fn rows_to_matrix(rows: &Rows, skip: usize) -> Result<Array2<f64>> {
    let ncols = rows.first().map(|(_, r)| r.len().saturating_sub(skip)).unwrap_or(0);
    let mut data = Vec::with_capacity(rows.len() * ncols);
    for (_, r) in rows {
        data.extend_from_slice(&r[skip..]);
    }
    Array2::from_shape_vec((rows.len(), ncols), data)
        .map_err(|e| Error::Validation(e.to_string()))
}

/// Writes a dataset directory readable by [`load_dataset`].
pub fn save_dataset(ds: &NeuralDataset, dir: &Path, schema: &DatasetSchema) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let meta = Meta {
        duration_s: ds.duration,
        continuous_rate_hz: ds.continuous.as_ref().map(|c| c.rate_hz),
        kin_rate_hz: ds.kin_rate_hz,
    };
    std::fs::write(dir.join(&schema.meta), serde_json::to_string_pretty(&meta)?)?;

    let mut w = writer(dir.join(&schema.kinematics))?;
    let header: Vec<String> = (0..ds.kinematics.ncols()).map(|j| format!("y{j}")).collect();
    writeln!(w, "t_s,{}", header.join(","))?;
    for (i, row) in ds.kinematics.rows().into_iter().enumerate() {
        write!(w, "{}", i as f64 / ds.kin_rate_hz)?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;

    if let Some(spikes) = &ds.spike_events {
        let mut w = writer(dir.join(&schema.spikes))?;
        writeln!(w, "unit,time_s")?;
        for s in spikes {
            writeln!(w, "{},{}", s.unit, s.time)?;
        }
        w.flush()?;
    }

    if let Some(c) = &ds.continuous {
        let mut w = writer(dir.join(&schema.continuous))?;
        let header: Vec<String> = (0..c.n_channels()).map(|j| format!("ch{j}")).collect();
        writeln!(w, "t_s,{}", header.join(","))?;
        for s in 0..c.samples.ncols() {
            write!(w, "{}", s as f64 / c.rate_hz)?;
            for ch in 0..c.n_channels() {
                write!(w, ",{}", c.samples[[ch, s]])?;
            }
            writeln!(w)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn writer(path: PathBuf) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}
