//! Sweep dataset CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::structural::MorphState;

use super::{SensingError, SensorReading, SweepRow, SENSOR_COUNT};

pub const DATASET_HEADER: &str = "twist_deg,camber_deg,extension_mm,s1,s2,s3,s4,s5,s6";

pub fn write_dataset_string(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{}",
            r.state.twist_deg, r.state.camber_deg, r.state.extension_mm
        );
        for a in r.reading.amplitudes {
            let _ = write!(out, ",{a}");
        }
        out.push('\n');
    }
    out
}

pub fn write_dataset_csv(path: &Path, rows: &[SweepRow]) -> Result<(), SensingError> {
    fs::write(path, write_dataset_string(rows))?;
    Ok(())
}

pub fn read_dataset_string(text: &str, origin: &str) -> Result<Vec<SweepRow>, SensingError> {
    let schema = |line: usize, msg: String| SensingError::Schema {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == DATASET_HEADER => {}
        Some((_, h)) => {
            return Err(schema(1, format!("expected header `{DATASET_HEADER}`, got `{h}`")))
        }
        None => return Err(schema(1, "empty dataset".into())),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 + SENSOR_COUNT {
            return Err(schema(
                line_no,
                format!("expected {} fields, got {}", 3 + SENSOR_COUNT, fields.len()),
            ));
        }
        let mut vals = [0.0f64; 9];
        for (i, f) in fields.iter().enumerate() {
            vals[i] = f
                .trim()
                .parse()
                .map_err(|_| schema(line_no, format!("bad number `{f}` in column {}", i + 1)))?;
        }
        let reading = SensorReading {
            amplitudes: [vals[3], vals[4], vals[5], vals[6], vals[7], vals[8]],
        };
        reading
            .validate()
            .map_err(|e| schema(line_no, e.to_string()))?;
        rows.push(SweepRow {
            state: MorphState {
                twist_deg: vals[0],
                camber_deg: vals[1],
                extension_mm: vals[2],
            },
            reading,
            flagged: false,
        });
    }
    Ok(rows)
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<SweepRow>, SensingError> {
    let text = fs::read_to_string(path)?;
    read_dataset_string(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<SweepRow> {
        vec![
            SweepRow {
                state: MorphState {
                    twist_deg: -10.0,
                    camber_deg: 15.0,
                    extension_mm: 0.5,
                },
                reading: SensorReading {
                    amplitudes: [1.0, 0.9, 0.8, 0.7, 0.6, 0.5],
                },
                flagged: false,
            },
            SweepRow {
                state: MorphState::default(),
                reading: SensorReading {
                    amplitudes: [1.0; 6],
                },
                flagged: false,
            },
        ]
    }

    #[test]
    fn roundtrip_byte_stable() {
        let text = write_dataset_string(&rows());
        assert!(text.starts_with(DATASET_HEADER));
        let back = read_dataset_string(&text, "t").unwrap();
        assert_eq!(back, rows());
        assert_eq!(write_dataset_string(&back), text);
    }

    #[test]
    fn bad_row_named_by_line() {
        let mut text = write_dataset_string(&rows());
        text.push_str("1,2\n");
        match read_dataset_string(&text, "d.csv") {
            Err(SensingError::Schema { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_amplitude_rejected() {
        let text = format!("{DATASET_HEADER}\n0,0,0,1.0,1.0,1.0,1.0,1.0,1.5\n");
        assert!(matches!(
            read_dataset_string(&text, "d.csv"),
            Err(SensingError::Schema { line: 2, .. })
        ));
    }
}
