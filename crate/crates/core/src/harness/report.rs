use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_file;

use super::{CellSummary, EpisodeMetrics};

pub const REPORT_HEADER: &str = "distance_horizon,time_horizon,mean_violations,se_violations,\
mean_manned_dev,se_manned_dev,mean_uas_dev,se_uas_dev,mean_flight_time,se_flight_time,\
mean_collisions,se_collisions,mean_manned_violations,se_manned_violations,runs";

/// One row per cell.
pub fn format_report(cells: &[CellSummary]) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for c in cells {
        let (m, s) = (&c.mean, &c.se);
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            c.distance_horizon,
            c.time_horizon,
            m.separation_violations,
            s.separation_violations,
            m.manned_trajectory_deviation,
            s.manned_trajectory_deviation,
            m.uas_trajectory_deviation,
            s.uas_trajectory_deviation,
            m.uas_flight_time,
            s.uas_flight_time,
            m.collisions,
            s.collisions,
            m.manned_violations,
            s.manned_violations,
            c.runs
        );
    }
    out
}

pub fn write_report(path: &Path, cells: &[CellSummary]) -> Result<()> {
    write_file(path, format_report(cells).as_bytes())
}

/// Long-format series for external plotting, one file per metric:
/// `violations.csv`, `manned_deviation.csv`, `uas_deviation.csv` and
/// `flight_time.csv`, each `distance_horizon,time_horizon,mean,se`.
pub fn write_plot_data(dir: &Path, cells: &[CellSummary]) -> Result<()> {
    let series: [(&str, fn(&super::EpisodeMetrics) -> f64); 4] = [
        ("violations", |m| m.separation_violations),
        ("manned_deviation", |m| m.manned_trajectory_deviation),
        ("uas_deviation", |m| m.uas_trajectory_deviation),
        ("flight_time", |m| m.uas_flight_time),
    ];
    for (name, get) in series {
        let mut out = String::from("distance_horizon,time_horizon,mean,se\n");
        for c in cells {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6}",
                c.distance_horizon,
                c.time_horizon,
                get(&c.mean),
                get(&c.se)
            );
        }
        write_file(&dir.join(format!("{name}.csv")), out.as_bytes())?;
    }
    Ok(())
}

/// Read back a report written by [`format_report`]. Per-run metrics are
/// not stored, so `episodes` comes back empty.
pub fn parse_report(text: &str) -> Result<Vec<CellSummary>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(REPORT_HEADER) {
        return Err(Error::Parse {
            line: 1,
            message: "not a sweep report".into(),
        });
    }
    let mut cells = Vec::new();
    for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = |message: String| Error::Parse { line: k + 2, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 15 {
            return Err(bad(format!("expected 15 fields, found {}", fields.len())));
        }
        let v: Vec<f64> = fields[..14]
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("`{f}`: {e}"))))
            .collect::<Result<_>>()?;
        let runs = fields[14].trim().parse::<usize>().map_err(|e| bad(e.to_string()))?;
        // Report order: violations, manned dev, uas dev, flight time,
        // collisions, manned violations.
        let metric = |off: usize| EpisodeMetrics::from_values([v[off], v[off + 10], v[off + 8], v[off + 2], v[off + 4], v[off + 6]]);
        cells.push(CellSummary {
            distance_horizon: v[0],
            time_horizon: v[1],
            runs,
            mean: metric(2),
            se: metric(3),
            episodes: Vec::new(),
        });
    }
    Ok(cells)
}

pub fn read_report(path: &Path) -> Result<Vec<CellSummary>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text)
}
