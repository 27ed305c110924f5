//! Trajectory CSV: `vehicle_id,frame,x,y,lane,v,a` in metres, seconds
//! and 10 Hz frames. `t` is accepted for `frame` and `v_x` for `v`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FEET: f64 = 0.3048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub vehicle_id: u64,
    pub frame: u64,
    pub x: f64,
    pub y: f64,
    pub lane: usize,
    pub v: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// First malformed row aborts the parse.
    #[default]
    Strict,
    /// Malformed rows are skipped and counted; unordered frames re-sorted.
    Lenient,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub mode: ParseMode,
    /// Number of lanes; rows outside `[0, lanes)` are integrity errors.
    pub lanes: Option<usize>,
}

/// Parsed records grouped by vehicle, each sorted by frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectorySet {
    pub vehicles: BTreeMap<u64, Vec<TrajectoryRecord>>,
    pub skipped_rows: usize,
    pub warnings: Vec<String>,
}

impl TrajectorySet {
    pub fn from_records(records: impl IntoIterator<Item = TrajectoryRecord>) -> Self {
        let mut vehicles: BTreeMap<u64, Vec<TrajectoryRecord>> = BTreeMap::new();
        for r in records {
            vehicles.entry(r.vehicle_id).or_default().push(r);
        }
        for recs in vehicles.values_mut() {
            recs.sort_by_key(|r| r.frame);
        }
        Self {
            vehicles,
            ..Default::default()
        }
    }

    pub fn num_records(&self) -> usize {
        self.vehicles.values().map(Vec::len).sum()
    }

    /// All records ordered by vehicle, then frame.
    pub fn records(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.vehicles.values().flatten()
    }
}

const COLUMNS: [(&str, &[&str]); 7] = [
    ("vehicle_id", &["vehicle_id"]),
    ("frame", &["frame", "t"]),
    ("x", &["x"]),
    ("y", &["y"]),
    ("lane", &["lane"]),
    ("v", &["v", "v_x"]),
    ("a", &["a"]),
];

pub fn parse_trajectories(path: &Path, opts: ParseOptions) -> Result<TrajectorySet> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_trajectories_from(file, opts).map_err(|e| match e {
        Error::Schema { message, .. } => Error::Schema {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_trajectories_from<R: Read>(reader: R, opts: ParseOptions) -> Result<TrajectorySet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut index = [0usize; 7];
    for (k, (name, aliases)) in COLUMNS.iter().enumerate() {
        index[k] = headers
            .iter()
            .position(|h| aliases.contains(&h))
            .ok_or_else(|| Error::Schema {
                path: "<input>".into(),
                message: format!("missing column `{name}`"),
            })?;
    }

    let mut set = TrajectorySet::default();
    let mut last_frame: BTreeMap<u64, u64> = BTreeMap::new();
    let mut unordered = false;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let parsed = parse_row(&row, &index, line).and_then(|rec| {
            if let Some(lanes) = opts.lanes {
                if rec.lane >= lanes {
                    return Err(Error::Integrity {
                        row: line,
                        message: format!("lane {} outside [0, {lanes})", rec.lane),
                    });
                }
            }
            if let Some(prev) = last_frame.get(&rec.vehicle_id) {
                if rec.frame <= *prev && opts.mode == ParseMode::Strict {
                    return Err(Error::Integrity {
                        row: line,
                        message: format!(
                            "vehicle {} frame {} does not follow frame {prev}",
                            rec.vehicle_id, rec.frame
                        ),
                    });
                }
            }
            Ok(rec)
        });
        match parsed {
            Ok(rec) => {
                let prev = last_frame.entry(rec.vehicle_id).or_insert(rec.frame);
                if rec.frame < *prev {
                    unordered = true;
                }
                *prev = (*prev).max(rec.frame);
                set.vehicles.entry(rec.vehicle_id).or_default().push(rec);
            }
            Err(e) if opts.mode == ParseMode::Lenient => {
                set.skipped_rows += 1;
                set.warnings.push(e.to_string());
            }
            Err(e) => return Err(e),
        }
    }

    if unordered {
        set.warnings
            .push("frames out of order; records re-sorted per vehicle".into());
    }
    for (id, recs) in set.vehicles.iter_mut() {
        recs.sort_by_key(|r| r.frame);
        let before = recs.len();
        recs.dedup_by_key(|r| r.frame);
        if recs.len() != before {
            set.skipped_rows += before - recs.len();
            set.warnings
                .push(format!("vehicle {id}: dropped {} duplicate frames", before - recs.len()));
        }
    }
    Ok(set)
}

fn parse_row(row: &csv::StringRecord, index: &[usize; 7], line: usize) -> Result<TrajectoryRecord> {
    let field = |k: usize| -> Result<&str> {
        row.get(index[k]).ok_or(Error::Parse {
            line,
            message: format!("missing field `{}`", COLUMNS[k].0),
        })
    };
    let int = |k: usize| -> Result<u64> {
        let s = field(k)?;
        s.parse::<u64>().or_else(|_| {
            // integral values written as floats, e.g. `12.0`
            match s.parse::<f64>() {
                Ok(f) if f >= 0.0 && f.fract() == 0.0 && f < 2f64.powi(53) => Ok(f as u64),
                _ => Err(Error::Parse {
                    line,
                    message: format!("`{}`: expected a nonnegative integer, got `{s}`", COLUMNS[k].0),
                }),
            }
        })
    };
    let real = |k: usize| -> Result<f64> {
        let s = field(k)?;
        match s.parse::<f64>() {
            Ok(f) if f.is_finite() => Ok(f),
            _ => Err(Error::Parse {
                line,
                message: format!("`{}`: expected a number, got `{s}`", COLUMNS[k].0),
            }),
        }
    };
    Ok(TrajectoryRecord {
        vehicle_id: int(0)?,
        frame: int(1)?,
        x: real(2)?,
        y: real(3)?,
        lane: int(4)? as usize,
        v: real(5)?,
        a: real(6)?,
    })
}

pub fn write_trajectories_to<W: Write>(writer: W, set: &TrajectorySet) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COLUMNS.iter().map(|(name, _)| *name))?;
    for r in set.records() {
        w.write_record(&[
            r.vehicle_id.to_string(),
            r.frame.to_string(),
            format_real(r.x),
            format_real(r.y),
            r.lane.to_string(),
            format_real(r.v),
            format_real(r.a),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

pub fn write_trajectories(path: &Path, set: &TrajectorySet) -> Result<()> {
    let mut buf = Vec::new();
    write_trajectories_to(&mut buf, set)?;
    super::write_file(path, &buf)
}

/// Shortest representation that parses back to the same `f64`.
fn format_real(x: f64) -> String {
    format!("{x:?}")
}

/// Convert an NGSIM-style file (`Vehicle_ID, Frame_ID, Local_X, Local_Y,
/// v_Vel, v_Acc, Lane_ID`, feet, lanes from 1) to the canonical schema:
/// longitudinal `x` from `Local_Y`, lateral `y` from `Local_X`, metres,
/// lanes from 0. Returns the number of rows written.
pub fn convert_ngsim(input: &Path, output: &Path) -> Result<usize> {
    let file = std::fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr.headers()?.clone();
    let names = ["Vehicle_ID", "Frame_ID", "Local_X", "Local_Y", "v_Vel", "v_Acc", "Lane_ID"];
    let mut idx = [0usize; 7];
    for (k, name) in names.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::Schema {
                path: input.to_path_buf(),
                message: format!("missing NGSIM column `{name}`"),
            })?;
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let num = |k: usize| -> Result<f64> {
            row.get(idx[k])
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or(Error::Parse {
                    line,
                    message: format!("bad `{}`", names[k]),
                })
        };
        let lane_id = num(6)?;
        if lane_id < 1.0 {
            return Err(Error::Integrity {
                row: line,
                message: format!("Lane_ID {lane_id} below 1"),
            });
        }
        records.push(TrajectoryRecord {
            vehicle_id: num(0)? as u64,
            frame: num(1)? as u64,
            x: num(3)? * FEET,
            y: num(2)? * FEET,
            lane: lane_id as usize - 1,
            v: num(4)? * FEET,
            a: num(5)? * FEET,
        });
    }
    let n = records.len();
    write_trajectories(output, &TrajectorySet::from_records(records))?;
    Ok(n)
}
