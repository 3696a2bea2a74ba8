//! Line-delimited JSON trajectory files.
//!
//! Line 1 is a header object carrying the schema tag and provenance; every
//! following line holds one trajectory. Numbers are written as the shortest
//! decimal that round-trips the `f32` value.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{DatasetHeader, LatentPoint, Trajectory, TrajectoryDataset};

pub const DATASET_SCHEMA: &str = "latent-reach/trajectories/v1";

#[derive(Debug, Serialize, Deserialize)]
struct HeaderRecord {
    schema: String,
    dim: usize,
    source: String,
    layer_index: i64,
    target_name: String,
    pooling: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryRecord {
    states: Vec<Vec<f32>>,
    ell: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prompt_embedding: Option<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    response_embedding: Option<Vec<f32>>,
}

fn narrow(p: &LatentPoint) -> Vec<f32> {
    p.iter().map(|&c| c as f32).collect()
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&c| c as f64).collect()
}

impl TrajectoryRecord {
    fn from_trajectory(t: &Trajectory) -> Self {
        Self {
            states: t.states().iter().map(narrow).collect(),
            ell: t.ell().iter().map(|&l| l as f32).collect(),
            tokens: t.tokens().map(<[String]>::to_vec),
            prompt_embedding: t.prompt_embedding().map(narrow),
            response_embedding: t.response_embedding().map(narrow),
        }
    }

    fn into_trajectory(self, dim: usize, line: usize) -> Result<Trajectory> {
        let err = |message: String| Error::Parse { line, message };
        if self.states.is_empty() {
            return Err(err("trajectory has no states".into()));
        }
        if self.states.len() != self.ell.len() {
            return Err(err(format!(
                "{} states but {} ell values",
                self.states.len(),
                self.ell.len()
            )));
        }
        let check_row = |what: &str, row: &[f32]| {
            if row.len() == dim {
                Ok(())
            } else {
                Err(err(format!("{what} has length {}, expected dim {dim}", row.len())))
            }
        };
        let mut states = Vec::with_capacity(self.states.len());
        for (i, row) in self.states.iter().enumerate() {
            check_row(&format!("state {i}"), row)?;
            states.push(LatentPoint::new(widen(row)).map_err(|e| err(e.to_string()))?);
        }
        let embed = |what: &str, v: Option<Vec<f32>>| -> Result<Option<LatentPoint>> {
            v.map(|row| {
                check_row(what, &row)?;
                LatentPoint::new(widen(&row)).map_err(|e| err(e.to_string()))
            })
            .transpose()
        };
        let prompt = embed("prompt_embedding", self.prompt_embedding)?;
        let response = embed("response_embedding", self.response_embedding)?;
        let mut traj = Trajectory::new(states, widen(&self.ell)).map_err(|e| err(e.to_string()))?;
        if let Some(tokens) = self.tokens {
            traj = traj.with_tokens(tokens);
        }
        traj.with_embeddings(prompt, response)
            .map_err(|e| err(e.to_string()))
    }
}

pub fn write_dataset_to<W: Write>(dataset: &TrajectoryDataset, mut out: W) -> Result<()> {
    let h = dataset.header();
    let header = HeaderRecord {
        schema: DATASET_SCHEMA.to_string(),
        dim: h.dim,
        source: h.source.clone(),
        layer_index: h.layer_index,
        target_name: h.target_name.clone(),
        pooling: h.pooling.clone(),
    };
    serde_json::to_writer(&mut out, &header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for t in dataset.trajectories() {
        serde_json::to_writer(&mut out, &TrajectoryRecord::from_trajectory(t))
            .map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `dataset`; coordinates and targets are stored as `f32`.
pub fn write_dataset(path: impl AsRef<Path>, dataset: &TrajectoryDataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    write_dataset_to(dataset, BufWriter::new(file))
}

pub fn read_dataset_from<R: BufRead>(input: R) -> Result<TrajectoryDataset> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing header line".into(),
    })?;
    let first = first?;
    let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| Error::Parse {
        line: 1,
        message: format!("invalid header: {e}"),
    })?;
    let schema = raw.get("schema").and_then(|s| s.as_str()).unwrap_or("");
    if schema != DATASET_SCHEMA {
        return Err(Error::Schema {
            expected: DATASET_SCHEMA.into(),
            found: schema.into(),
        });
    }
    let header: HeaderRecord = serde_json::from_value(raw).map_err(|e| Error::Parse {
        line: 1,
        message: format!("invalid header: {e}"),
    })?;
    if header.dim == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "dim must be positive".into(),
        });
    }
    let mut trajectories = Vec::new();
    for (line, text) in lines {
        let text = text?;
        if text.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryRecord = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        trajectories.push(rec.into_trajectory(header.dim, line)?);
    }
    TrajectoryDataset::new(
        DatasetHeader {
            dim: header.dim,
            source: header.source,
            layer_index: header.layer_index,
            target_name: header.target_name,
            pooling: header.pooling,
        },
        trajectories,
    )
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    read_dataset_from(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{generate_toy_dataset, ToyDatasetConfig, TwoAttractorSystem};
    use proptest::prelude::*;

    fn toy(count: usize) -> TrajectoryDataset {
        let cfg = ToyDatasetConfig {
            count,
            horizon: 6,
            seed: 1,
            ..Default::default()
        };
        generate_toy_dataset(&TwoAttractorSystem::default(), &cfg).unwrap()
    }

    fn roundtrip(ds: &TrajectoryDataset) -> TrajectoryDataset {
        let mut buf = Vec::new();
        write_dataset_to(ds, &mut buf).unwrap();
        read_dataset_from(buf.as_slice()).unwrap()
    }

    #[test]
    fn toy_dataset_round_trips() {
        let ds = toy(3);
        assert_eq!(roundtrip(&ds), ds);
    }

    #[test]
    fn optional_fields_are_omitted() {
        let header = toy(1).header().clone();
        let t = Trajectory::new(vec![LatentPoint::zeros(2)], vec![0.5]).unwrap();
        let ds = TrajectoryDataset::new(header, vec![t]).unwrap();
        let mut buf = Vec::new();
        write_dataset_to(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), r#"{"states":[[0.0,0.0]],"ell":[0.5]}"#);
        assert_eq!(roundtrip(&ds), ds);
    }

    fn with_line(text: &str, line: usize, replacement: &str) -> String {
        text.lines()
            .enumerate()
            .map(|(i, l)| if i + 1 == line { replacement } else { l })
            .collect::<Vec<_>>()
            .join("\n")
    }

    fn encoded(ds: &TrajectoryDataset) -> String {
        let mut buf = Vec::new();
        write_dataset_to(ds, &mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn wrong_schema_names_the_expected_one() {
        let text = encoded(&toy(2)).replace(DATASET_SCHEMA, "other/v9");
        let err = read_dataset_from(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
        assert!(err.to_string().contains(DATASET_SCHEMA));
    }

    #[test]
    fn short_state_row_reports_line() {
        let text = with_line(
            &encoded(&toy(3)),
            3,
            r#"{"states":[[0.1,0.2],[0.3]],"ell":[0.1,0.2]}"#,
        );
        match read_dataset_from(text.as_bytes()).unwrap_err() {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("expected dim 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn truncated_line_reports_line() {
        let text = encoded(&toy(3));
        let third = text.lines().nth(2).unwrap();
        let text = with_line(&text, 3, &third[..third.len() / 2]);
        assert!(matches!(
            read_dataset_from(text.as_bytes()),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn length_mismatch_and_missing_header() {
        let text = with_line(&encoded(&toy(2)), 2, r#"{"states":[[0.1,0.2]],"ell":[0.1,0.2]}"#);
        assert!(matches!(
            read_dataset_from(text.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(read_dataset_from("".as_bytes()).is_err());
        assert!(read_dataset_from("not json\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn any_f32_values_survive(
            bits in prop::collection::vec(any::<u32>(), 6),
            ell_bits in prop::collection::vec(any::<u32>(), 3),
        ) {
            let vals: Vec<f64> = bits
                .iter()
                .map(|&b| f32::from_bits(b))
                .map(|f| if f.is_finite() { f as f64 } else { 1.5 })
                .collect();
            let ell: Vec<f64> = ell_bits
                .iter()
                .map(|&b| f32::from_bits(b))
                .map(|f| if f.is_finite() { f as f64 } else { -0.25 })
                .collect();
            let states = vals.chunks(2).map(|c| LatentPoint::new(c.to_vec()).unwrap()).collect();
            let t = Trajectory::new(states, ell).unwrap();
            let ds = TrajectoryDataset::new(toy(1).header().clone(), vec![t]).unwrap();
            let back = roundtrip(&ds);
            for (a, b) in back.trajectories()[0].states().iter().zip(ds.trajectories()[0].states()) {
                for (x, y) in a.iter().zip(b.iter()) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            prop_assert_eq!(back, ds);
        }
    }
}
