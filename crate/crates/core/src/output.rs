//! Artifact writers. Column layouts are fixed; floats use 17 significant
//! digits so they round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::engine::{EventRecord, Trajectory};
use crate::error::Result;
use crate::geometry::Point;
use crate::grid::Grid;
use crate::state::{LesionType, SystemState};

pub const TRAJECTORY_HEADER: &str = "replicate_id,t,n_x,n_y";
pub const EVENTS_HEADER: &str = "replicate_id,t,channel,n_removed,n_created,removed,created";
pub const SNAPSHOT_HEADER: &str = "replicate_id,t,type,x,y,z";
pub const SURVIVAL_HEADER: &str = "t,s,se,n";
pub const FIELD_HEADER: &str = "replicate_id,t,cell,x,y,z,name,value";

#[inline]
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_point(q: &Point) -> String {
    q.coords().iter().map(|c| fmt_f(*c)).collect::<Vec<_>>().join(":")
}

/// `x,y,z` columns; `z` is empty in two dimensions.
fn xyz(q: &Point) -> String {
    let z = if q.coords().len() > 2 { fmt_f(q.get(2)) } else { String::new() };
    format!("{},{},{}", fmt_f(q.get(0)), fmt_f(q.get(1)), z)
}

/// Buffered CSV file with a fixed header.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{header}")?;
        Ok(Self { out })
    }

    pub fn line(&mut self, row: &str) -> Result<()> {
        writeln!(self.out, "{row}")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_counts(w: &mut CsvWriter, replicate: u64, counts: &[(f64, usize, usize)]) -> Result<()> {
    for (t, nx, ny) in counts {
        w.line(&format!("{replicate},{},{nx},{ny}", fmt_f(*t)))?;
    }
    Ok(())
}

pub fn event_row(ev: &EventRecord) -> String {
    let removed = ev.removed.iter().map(fmt_point).collect::<Vec<_>>().join(";");
    let created = ev
        .created
        .iter()
        .map(|(ty, q)| format!("{ty}@{}", fmt_point(q)))
        .collect::<Vec<_>>()
        .join(";");
    format!(
        "{},{},{},{},{},{removed},{created}",
        ev.replicate,
        fmt_f(ev.time),
        ev.channel,
        ev.removed.len(),
        ev.created.len()
    )
}

pub fn write_events(w: &mut CsvWriter, events: &[EventRecord]) -> Result<()> {
    for ev in events {
        w.line(&event_row(ev))?;
    }
    Ok(())
}

pub fn write_snapshot(w: &mut CsvWriter, replicate: u64, state: &SystemState) -> Result<()> {
    let t = fmt_f(state.time());
    for (ty, list) in [(LesionType::X, state.xs()), (LesionType::Y, state.ys())] {
        for q in list {
            w.line(&format!("{replicate},{t},{ty},{}", xyz(q)))?;
        }
    }
    Ok(())
}

pub fn write_trajectory(
    traj: &Trajectory,
    counts: Option<&mut CsvWriter>,
    events: Option<&mut CsvWriter>,
    snapshots: Option<&mut CsvWriter>,
) -> Result<()> {
    if let Some(w) = counts {
        write_counts(w, traj.replicate, &traj.counts)?;
    }
    if let Some(w) = events {
        write_events(w, &traj.events)?;
    }
    if let Some(w) = snapshots {
        for s in &traj.snapshots {
            write_snapshot(w, traj.replicate, s)?;
        }
    }
    Ok(())
}

/// Rows of [`FIELD_HEADER`] for named fields on `grid`.
pub fn write_fields(w: &mut CsvWriter, replicate: u64, t: f64, grid: &Grid, fields: &[(&str, &[f64])]) -> Result<()> {
    let t = fmt_f(t);
    for (cell, c) in grid.centers().iter().enumerate() {
        let pos = xyz(c);
        for (name, values) in fields {
            w.line(&format!("{replicate},{t},{cell},{pos},{name},{}", fmt_f(values[cell])))?;
        }
    }
    Ok(())
}

/// Writes `columns` (header) and rows of floats.
pub fn write_table(path: &Path, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = CsvWriter::create(path, &columns.join(","))?;
    for row in rows {
        w.line(&row.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(","))?;
    }
    w.finish()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Numerical(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Channel;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.5735e-300, -7.0, 1e17 + 1.0] {
            let s = fmt_f(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn event_row_layout() {
        let ev = EventRecord {
            replicate: 3,
            time: 0.5,
            channel: Channel::PairLethal,
            removed: vec![Point::xy(0.0, 0.0), Point::xy(1.0, 0.0)],
            created: vec![(LesionType::Y, Point::xy(0.5, 0.0))],
        };
        let row = event_row(&ev);
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), EVENTS_HEADER.split(',').count());
        assert_eq!(cols[0], "3");
        assert_eq!(cols[3], "2");
        assert_eq!(cols[4], "1");
        assert_eq!(cols[5].split(';').count(), 2);
        assert!(cols[6].starts_with("Y@"));
    }

    #[test]
    fn table_and_snapshot_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        write_table(&p, &["a", "b"], &[vec![1.0, 2.0]]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 2);
        let s = SystemState::new(1.0, vec![Point::xy(0.2, 0.3)], vec![Point::xy(0.4, 0.5)]).unwrap();
        let p = dir.path().join("s.csv");
        let mut w = CsvWriter::create(&p, SNAPSHOT_HEADER).unwrap();
        write_snapshot(&mut w, 0, &s).unwrap();
        w.finish().unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains(",X,") && lines[1].ends_with(','));
    }
}
