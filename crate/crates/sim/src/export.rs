//! Long-format trajectory CSV: one row per (τ, population, bundle).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use std::path::PathBuf;

use crate::error::{Result, SimError};
use crate::plot::{export_svg, PlotKind};
use crate::simulate::{Simulation, TrajectoryRecord};

pub const CSV_HEADER: [&str; 12] = [
    "tau",
    "gamma",
    "pop",
    "bundle",
    "mu",
    "loss",
    "potential",
    "nash_gap",
    "regret",
    "regret_norm",
    "cesaro_mu",
    "cesaro_potential",
];

/// 17 significant digits: enough for an exact round trip.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(records: &[TrajectoryRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in records {
        for (k, mu) in r.mu.iter().enumerate() {
            for (p, x) in mu.iter().enumerate() {
                w.write_record([
                    r.tau.to_string(),
                    format_float(r.gamma),
                    k.to_string(),
                    p.to_string(),
                    format_float(*x),
                    format_float(r.losses[k][p]),
                    format_float(r.potential),
                    format_float(r.nash_gap),
                    format_float(r.regret[k]),
                    format_float(r.regret_norm[k]),
                    format_float(r.cesaro_mu[k][p]),
                    format_float(r.cesaro_potential),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(records: &[TrajectoryRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(SimError::io(path))?;
    write_csv(records, file).map_err(SimError::csv(path))
}

fn bad(path: &Path, reason: impl Into<String>) -> SimError {
    SimError::CsvFormat {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Parses a CSV produced by [`write_csv`]. `path` is only used in errors.
pub fn read_csv<R: Read>(reader: R, path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers().map_err(SimError::csv(path))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(path, format!("unexpected header {header:?}")));
    }
    let mut records: Vec<TrajectoryRecord> = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(SimError::csv(path))?;
        let float = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|_| bad(path, format!("row {}: bad number {:?}", line + 1, &row[i])))
        };
        let int = |i: usize| -> Result<usize> {
            row[i]
                .parse()
                .map_err(|_| bad(path, format!("row {}: bad index {:?}", line + 1, &row[i])))
        };
        let (tau, k, p) = (int(0)?, int(2)?, int(3)?);
        let fresh = records.last().is_none_or(|r| r.tau != tau);
        if fresh {
            if k != 0 || p != 0 {
                return Err(bad(
                    path,
                    format!("row {}: iteration {tau} starts mid-block", line + 1),
                ));
            }
            records.push(TrajectoryRecord {
                tau,
                gamma: float(1)?,
                mu: Vec::new(),
                losses: Vec::new(),
                potential: float(6)?,
                nash_gap: float(7)?,
                regret: Vec::new(),
                regret_norm: Vec::new(),
                cesaro_mu: Vec::new(),
                cesaro_potential: float(11)?,
            });
        }
        let r = records.last_mut().expect("pushed above");
        if p == 0 {
            if k != r.mu.len() {
                return Err(bad(
                    path,
                    format!("row {}: population {k} out of order", line + 1),
                ));
            }
            r.mu.push(Vec::new());
            r.losses.push(Vec::new());
            r.cesaro_mu.push(Vec::new());
            r.regret.push(float(8)?);
            r.regret_norm.push(float(9)?);
        } else if k + 1 != r.mu.len() || p != r.mu[k].len() {
            return Err(bad(
                path,
                format!("row {}: bundle {p} out of order", line + 1),
            ));
        }
        r.mu[k].push(float(4)?);
        r.losses[k].push(float(5)?);
        r.cesaro_mu[k].push(float(10)?);
    }
    Ok(records)
}

pub fn import_csv(path: &Path) -> Result<Vec<TrajectoryRecord>> {
    let file = File::open(path).map_err(SimError::io(path))?;
    read_csv(file, path)
}

/// Writes `trajectory.csv`, `metadata.json` and, optionally, one SVG per
/// plot kind into `dir`. Returns the written paths.
pub fn write_run(sim: &Simulation, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(SimError::io(dir))?;
    let csv_path = dir.join("trajectory.csv");
    export_csv(&sim.records, &csv_path)?;
    let meta_path = dir.join("metadata.json");
    let meta = serde_json::to_string_pretty(&sim.metadata).expect("metadata serializes");
    std::fs::write(&meta_path, meta + "\n").map_err(SimError::io(&meta_path))?;
    let mut written = vec![csv_path, meta_path];
    if svg {
        let labels = &sim.metadata.bundle_labels;
        let mut kinds = vec![
            ("losses", PlotKind::Losses),
            ("regret", PlotKind::Regret),
            ("potential", PlotKind::Potential),
        ];
        let triples: Vec<usize> = (0..labels.len())
            .filter(|&k| labels[k].len() == 3)
            .collect();
        let names: Vec<String> = triples.iter().map(|k| format!("simplex_pop{k}")).collect();
        for (k, name) in triples.iter().zip(&names) {
            kinds.push((name.as_str(), PlotKind::Simplex { population: *k }));
        }
        for (name, kind) in kinds {
            let path = dir.join(format!("{name}.svg"));
            export_svg(&sim.records, &path, kind, labels)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TrajectoryRecord {
        TrajectoryRecord {
            tau: 3,
            gamma: 0.1,
            mu: vec![vec![0.1, 0.9], vec![1.0]],
            losses: vec![vec![1.0 / 3.0, 2.0], vec![0.5]],
            potential: 1.25,
            nash_gap: 1e-17,
            regret: vec![-0.5, 0.0],
            regret_norm: vec![-0.25, 0.0],
            cesaro_mu: vec![vec![0.2, 0.8], vec![1.0]],
            cesaro_potential: std::f64::consts::PI,
        }
    }

    #[test]
    fn empty_export_is_header_only() {
        let mut out = Vec::new();
        write_csv(&[], &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), CSV_HEADER.join(",") + "\n");
    }

    #[test]
    fn one_record_gives_one_row_per_bundle() {
        let mut out = Vec::new();
        write_csv(&[sample()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1..]
            .iter()
            .all(|l| l.split(',').count() == 12 && !l.contains(",,")));
    }

    #[test]
    fn round_trip_is_exact() {
        let mut second = sample();
        second.tau = 4;
        second.gamma = 1.0 / 7.0;
        let records = vec![sample(), second];
        let mut out = Vec::new();
        write_csv(&records, &mut out).unwrap();
        let back = read_csv(out.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn malformed_input_is_reported() {
        let text = "tau,gamma\n1,2\n";
        assert!(read_csv(text.as_bytes(), Path::new("mem")).is_err());
        let mut out = Vec::new();
        write_csv(&[sample()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap().replacen("e-1", "x-1", 1);
        assert!(read_csv(text.as_bytes(), Path::new("mem")).is_err());
    }
}
