//! Ridge-regularized polynomial regression from six sensor amplitudes to
//! the three morph values, with a versioned text model format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::structural::MorphState;

use super::{clamp_to_ranges, SensingError, SensorReading, SweepRow, SENSOR_COUNT};
use crate::structural::DenseMatrix;

pub const FEATURES_DEG1: usize = 1 + SENSOR_COUNT;
pub const FEATURES_DEG2: usize = FEATURES_DEG1 + SENSOR_COUNT * (SENSOR_COUNT + 1) / 2;

const MODEL_VERSION: u32 = 1;

/// Fitted estimator: per-output weight vector over polynomial features of
/// the amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorModel {
    pub degree: usize,
    pub ridge_lambda: f64,
    /// weights[output][feature]; outputs are twist, camber, extension.
    pub weights: [Vec<f64>; 3],
    /// Seed of the sweep this was trained on, for provenance.
    pub trained_seed: u64,
    pub trained_rows: usize,
}

pub fn feature_count(degree: usize) -> Result<usize, SensingError> {
    match degree {
        1 => Ok(FEATURES_DEG1),
        2 => Ok(FEATURES_DEG2),
        d => Err(SensingError::BadDegree(d)),
    }
}

/// [1, s1..s6] plus, at degree 2, all products s_i*s_j with i <= j.
pub fn features(reading: &SensorReading, degree: usize) -> Vec<f64> {
    let s = &reading.amplitudes;
    let mut x = Vec::with_capacity(if degree == 1 { FEATURES_DEG1 } else { FEATURES_DEG2 });
    x.push(1.0);
    x.extend_from_slice(s);
    if degree >= 2 {
        for i in 0..SENSOR_COUNT {
            for j in i..SENSOR_COUNT {
                x.push(s[i] * s[j]);
            }
        }
    }
    x
}

/// Ridge least squares on the normal equations; the intercept feature is
/// left unpenalized so the infinite-lambda limit predicts the label mean.
pub fn fit_estimator(
    rows: &[SweepRow],
    degree: usize,
    ridge_lambda: f64,
    trained_seed: u64,
) -> Result<EstimatorModel, SensingError> {
    let m = feature_count(degree)?;
    if rows.len() < m {
        return Err(SensingError::TooFewRows {
            need: m,
            got: rows.len(),
        });
    }
    if !(ridge_lambda >= 0.0) {
        return Err(SensingError::InvalidModel(format!(
            "ridge lambda must be >= 0, got {ridge_lambda}"
        )));
    }

    let mut xtx = DenseMatrix::zeros(m);
    let mut xty = vec![[0.0f64; 3]; m];
    for row in rows {
        let x = features(&row.reading, degree);
        let y = [
            row.state.twist_deg,
            row.state.camber_deg,
            row.state.extension_mm,
        ];
        for i in 0..m {
            for j in 0..m {
                xtx.add(i, j, x[i] * x[j]);
            }
            for (o, &yo) in y.iter().enumerate() {
                xty[i][o] += x[i] * yo;
            }
        }
    }
    for i in 1..m {
        xtx.add(i, i, ridge_lambda);
    }

    xtx.cholesky_in_place().map_err(|_| SensingError::RankDeficient)?;
    let mut weights: [Vec<f64>; 3] = Default::default();
    for o in 0..3 {
        let mut b: Vec<f64> = xty.iter().map(|r| r[o]).collect();
        xtx.cholesky_solve(&mut b);
        weights[o] = b;
    }
    Ok(EstimatorModel {
        degree,
        ridge_lambda,
        weights,
        trained_seed,
        trained_rows: rows.len(),
    })
}

impl EstimatorModel {
    /// Predict, clamped to the rated morph ranges.
    pub fn estimate(&self, reading: &SensorReading) -> Result<MorphState, SensingError> {
        reading.validate()?;
        Ok(clamp_to_ranges(self.estimate_unclamped(reading)))
    }

    pub fn estimate_unclamped(&self, reading: &SensorReading) -> MorphState {
        let x = features(reading, self.degree);
        let dot = |w: &[f64]| w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        MorphState {
            twist_deg: dot(&self.weights[0]),
            camber_deg: dot(&self.weights[1]),
            extension_mm: dot(&self.weights[2]),
        }
    }

    /// Per-output RMSE against labeled rows (unclamped predictions).
    pub fn rmse(&self, rows: &[SweepRow]) -> [f64; 3] {
        let mut sq = [0.0f64; 3];
        for row in rows {
            let p = self.estimate_unclamped(&row.reading);
            sq[0] += (p.twist_deg - row.state.twist_deg).powi(2);
            sq[1] += (p.camber_deg - row.state.camber_deg).powi(2);
            sq[2] += (p.extension_mm - row.state.extension_mm).powi(2);
        }
        let n = rows.len().max(1) as f64;
        sq.map(|s| (s / n).sqrt())
    }
}

/// Deterministic train/holdout split: every `every`-th row held out.
pub fn holdout_split(rows: &[SweepRow], every: usize) -> (Vec<SweepRow>, Vec<SweepRow>) {
    let mut train = Vec::new();
    let mut held = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if every > 0 && i % every == every - 1 {
            held.push(*r);
        } else {
            train.push(*r);
        }
    }
    (train, held)
}

pub fn write_model_string(model: &EstimatorModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# morphwing estimator {MODEL_VERSION}");
    let _ = writeln!(
        out,
        "degree {} lambda {} seed {} rows {}",
        model.degree, model.ridge_lambda, model.trained_seed, model.trained_rows
    );
    for (name, w) in ["twist", "camber", "extension"].iter().zip(&model.weights) {
        let _ = write!(out, "{name}");
        for v in w {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_model_file(path: &Path, model: &EstimatorModel) -> Result<(), SensingError> {
    fs::write(path, write_model_string(model))?;
    Ok(())
}

pub fn read_model_string(text: &str, origin: &str) -> Result<EstimatorModel, SensingError> {
    let schema = |line: usize, msg: String| SensingError::Schema {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| schema(1, "empty model file".into()))?;
    if header.trim() != format!("# morphwing estimator {MODEL_VERSION}") {
        return Err(schema(1, format!("unsupported model header `{header}`")));
    }
    let (ln, meta) = lines
        .next()
        .ok_or_else(|| schema(2, "missing metadata line".into()))?;
    let toks: Vec<&str> = meta.split_whitespace().collect();
    if toks.len() != 8 || toks[0] != "degree" || toks[2] != "lambda" || toks[4] != "seed" {
        return Err(schema(ln + 1, "bad metadata line".into()));
    }
    let degree: usize = toks[1]
        .parse()
        .map_err(|_| schema(ln + 1, "bad degree".into()))?;
    let m = feature_count(degree)?;
    let ridge_lambda: f64 = toks[3]
        .parse()
        .map_err(|_| schema(ln + 1, "bad lambda".into()))?;
    let trained_seed: u64 = toks[5]
        .parse()
        .map_err(|_| schema(ln + 1, "bad seed".into()))?;
    let trained_rows: usize = toks[7]
        .parse()
        .map_err(|_| schema(ln + 1, "bad row count".into()))?;

    let mut weights: [Vec<f64>; 3] = Default::default();
    for (o, name) in ["twist", "camber", "extension"].iter().enumerate() {
        let (ln, line) = lines
            .next()
            .ok_or_else(|| schema(0, format!("missing {name} weights")))?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.first() != Some(name) || toks.len() != m + 1 {
            return Err(schema(
                ln + 1,
                format!("expected `{name}` with {m} weights"),
            ));
        }
        weights[o] = toks[1..]
            .iter()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| schema(ln + 1, "bad weight".into()))?;
    }
    Ok(EstimatorModel {
        degree,
        ridge_lambda,
        weights,
        trained_seed,
        trained_rows,
    })
}

pub fn read_model_file(path: &Path) -> Result<EstimatorModel, SensingError> {
    let text = fs::read_to_string(path)?;
    read_model_string(&text, &path.display().to_string())
}
