//! Demonstration CSV and model JSON formats.
//!
//! Position demos have the header `t,y1,...,yn`; orientation demos
//! `t,qw,qx,qy,qz` (scalar first). Models are stored as JSON with the
//! weights as `K` rows of `n` values.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use dmpp_core::model::{Demonstration, DmpModel, Gains, Space};
use dmpp_core::{BasisModel, UnitQuaternion};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn read_demo(path: &Path) -> Result<Demonstration> {
    let file = File::open(path).with_context(|| format!("cannot open demo {}", path.display()))?;
    parse_demo(file).with_context(|| format!("invalid demo file {}", path.display()))
}

pub fn parse_demo<R: Read>(reader: R) -> Result<Demonstration> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.len() < 2 || header[0] != "t" {
        bail!(
            "expected a header `t,y1,...` or `t,qw,qx,qy,qz`, found `{}`",
            header.join(",")
        );
    }
    let orientation = header[1..] == ["qw", "qx", "qy", "qz"];
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            bail!(
                "row {} has {} fields, expected {}",
                line + 2,
                rec.len(),
                header.len()
            );
        }
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| anyhow!("row {}, column `{}`: {e}", line + 2, header[i]))
        };
        times.push(parse(0)?);
        for i in 1..header.len() {
            values.push(parse(i)?);
        }
    }
    let cols = header.len() - 1;
    if orientation {
        let qs: Vec<UnitQuaternion> = values
            .chunks(4)
            .map(|c| UnitQuaternion::new(c[0], c[1], c[2], c[3]))
            .collect();
        Ok(Demonstration::from_orientations(times, &qs)?)
    } else {
        let samples = times.len();
        let pos = DMatrix::from_fn(cols, samples, |r, j| values[j * cols + r]);
        Ok(Demonstration::new(times, pos)?)
    }
}

/// Writes a position demo; orientation demos are written as quaternions.
pub fn write_demo<W: Write>(demo: &Demonstration, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let n = demo.dofs();
    match demo.space() {
        Space::Position => {
            let mut header = vec!["t".to_owned()];
            header.extend((1..=n).map(|i| format!("y{i}")));
            w.write_record(&header)?;
            for (j, t) in demo.times().iter().enumerate() {
                let mut row = vec![t.to_string()];
                row.extend(demo.positions().column(j).iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        Space::Orientation => {
            w.write_record(["t", "qw", "qx", "qy", "qz"])?;
            for (j, t) in demo.times().iter().enumerate() {
                let eta =
                    nalgebra::Vector3::from_iterator(demo.positions().column(j).iter().copied());
                let q = dmpp_core::quaternion::quat_exp(&eta);
                let mut row = vec![t.to_string()];
                row.extend(q.coords().iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    Position,
    Orientation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub space: SpaceTag,
    pub kernels: usize,
    pub width_factor: f64,
    pub duration: f64,
    pub accel_samples: usize,
    pub ridge: f64,
    /// `kernels` rows of `dofs` values.
    pub weights: Vec<Vec<f64>>,
    pub stiffness: Vec<Vec<f64>>,
    pub damping: Vec<Vec<f64>>,
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(name: &str, rows: &[Vec<f64>], ncols: Option<usize>) -> Result<DMatrix<f64>> {
    let c = ncols.or_else(|| rows.first().map(Vec::len)).unwrap_or(0);
    if rows.is_empty() || c == 0 || rows.iter().any(|r| r.len() != c) {
        bail!("`{name}` must be a non-empty rectangular matrix");
    }
    Ok(DMatrix::from_fn(rows.len(), c, |i, j| rows[i][j]))
}

impl ModelFile {
    pub fn from_model(model: &DmpModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            space: match model.space() {
                Space::Position => SpaceTag::Position,
                Space::Orientation => SpaceTag::Orientation,
            },
            kernels: model.kernels(),
            width_factor: model.basis().width_factor(),
            duration: model.duration(),
            accel_samples: model.accel_samples(),
            ridge: model.ridge(),
            weights: rows(model.weights()),
            stiffness: rows(&model.gains().stiffness),
            damping: rows(&model.gains().damping),
        }
    }

    pub fn into_model(self) -> Result<DmpModel> {
        if self.format_version != MODEL_FORMAT_VERSION {
            bail!(
                "unsupported model format version {} (expected {MODEL_FORMAT_VERSION})",
                self.format_version
            );
        }
        let weights = matrix("weights", &self.weights, None)?;
        if weights.nrows() != self.kernels {
            bail!(
                "`weights` has {} rows but `kernels` is {}",
                weights.nrows(),
                self.kernels
            );
        }
        let n = weights.ncols();
        let gains = Gains::new(
            matrix("stiffness", &self.stiffness, Some(n))?,
            matrix("damping", &self.damping, Some(n))?,
        )?;
        let basis = BasisModel::new(self.kernels, self.width_factor)?;
        let space = match self.space {
            SpaceTag::Position => Space::Position,
            SpaceTag::Orientation => Space::Orientation,
        };
        Ok(DmpModel::from_parts(
            basis,
            weights,
            self.duration,
            gains,
            space,
            self.accel_samples,
            self.ridge,
        )?)
    }
}

pub fn write_model(model: &DmpModel, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&ModelFile::from_model(model))?;
    std::fs::write(path, json).with_context(|| format!("cannot write model {}", path.display()))
}

pub fn read_model(path: &Path) -> Result<DmpModel> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read model {}", path.display()))?;
    let file: ModelFile = serde_json::from_str(&text)
        .with_context(|| format!("invalid model file {}", path.display()))?;
    file.into_model()
}

#[cfg(test)]
mod tests {
    use super::*;
    use dmpp_core::model::TrainingOptions;

    #[test]
    fn position_demo_round_trips() {
        let text = "t,y1,y2\n0,0,1\n0.5,0.25,1.5\n1,1,2\n";
        let d = parse_demo(text.as_bytes()).unwrap();
        assert_eq!(d.dofs(), 2);
        assert_eq!(d.len(), 3);
        assert_eq!(d.positions()[(1, 1)], 1.5);
        let mut out = Vec::new();
        write_demo(&d, &mut out).unwrap();
        let again = parse_demo(out.as_slice()).unwrap();
        assert_eq!(again.positions(), d.positions());
    }

    #[test]
    fn orientation_demo_is_detected() {
        let text = "t,qw,qx,qy,qz\n0,1,0,0,0\n1,0.7071067811865476,0,0,0.7071067811865476\n";
        let d = parse_demo(text.as_bytes()).unwrap();
        assert_eq!(d.space(), Space::Orientation);
        assert!((d.positions()[(2, 1)] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn malformed_demos_are_rejected() {
        assert!(parse_demo("x,y\n0,1\n".as_bytes()).is_err());
        assert!(parse_demo("t,y1\n0,1\n1,abc\n".as_bytes()).is_err());
        assert!(parse_demo("t,y1\n0,1\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn model_round_trips_through_json() {
        let demo = crate::generators::Generator::MinJerk {
            start: vec![0.0, 1.0],
            goal: vec![1.0, -1.0],
        }
        .generate(1.5, 300)
        .unwrap();
        let opts = TrainingOptions {
            kernels: 15,
            ..TrainingOptions::default()
        };
        let (model, _) =
            DmpModel::train(&demo, &opts, Gains::critically_damped(2, 300.0).unwrap()).unwrap();
        let json = serde_json::to_string(&ModelFile::from_model(&model)).unwrap();
        let back: ModelFile = serde_json::from_str(&json).unwrap();
        let m2 = back.into_model().unwrap();
        assert_eq!(m2.weights(), model.weights());
        assert_eq!(m2.duration(), model.duration());
        assert!((m2.prior_covariance() - model.prior_covariance()).norm() < 1e-9);
    }
}
