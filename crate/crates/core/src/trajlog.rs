//! JSON Lines trajectory logs.
//!
//! The first line is `{"provenance": {...}}`; every following line is one
//! [`TrajectoryRecord`]. Floats are written in shortest round-trip form, so a
//! log read back reproduces the simulated values bit for bit.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Provenance;
use crate::env::TrajectoryRecord;

#[derive(Debug, Error)]
pub enum TrajLogError {
    #[error("trajectory log I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("trajectory log line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

#[derive(Serialize, Deserialize)]
struct Header {
    provenance: Provenance,
}

pub fn write_trajectory<W: Write>(
    mut out: W,
    provenance: &Provenance,
    records: &[TrajectoryRecord],
) -> Result<(), TrajLogError> {
    let json = |e| TrajLogError::Json { line: 0, source: e };
    serde_json::to_writer(&mut out, &Header { provenance: provenance.clone() }).map_err(json)?;
    out.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(json)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a log; the provenance line is optional and blank lines are skipped.
pub fn read_trajectory<R: BufRead>(input: R) -> Result<(Option<Provenance>, Vec<TrajectoryRecord>), TrajLogError> {
    let mut provenance = None;
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 && line.starts_with("{\"provenance\"") {
            let h: Header = serde_json::from_str(&line).map_err(|e| TrajLogError::Json { line: 1, source: e })?;
            provenance = Some(h.provenance);
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| TrajLogError::Json { line: i + 1, source: e })?);
    }
    Ok((provenance, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::BehaviorClass;
    use crate::env::Maneuver;

    fn rec(t: f64, maneuver: Option<Maneuver>) -> TrajectoryRecord {
        TrajectoryRecord {
            t,
            id: 3,
            lane: 1,
            x: 0.1 + 0.2,
            y: 6.0,
            vx: 1.0 / 3.0,
            vy: 0.0,
            behavior: BehaviorClass::Conservative,
            maneuver,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let records = vec![rec(0.0, None), rec(0.1, Some(Maneuver::LaneChangeLeft))];
        let p = Provenance::new("", 4);
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &p, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(!text.lines().nth(1).unwrap().contains("maneuver"));
        let (back_p, back) = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back_p, Some(p));
        assert_eq!(back, records);
    }

    #[test]
    fn bad_line_number_reported() {
        let err = read_trajectory(&b"{\"t\":0}\n"[..]).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }
}
