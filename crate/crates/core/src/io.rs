//! File formats.
//!
//! Sample files are JSON lines, one point per line:
//! `{"t": 3, "x": [0.5, -1.2], "y": 1}` with `y` optional. Points are grouped into
//! sample sets by `t` and returned in increasing `t`. Predictions are a single
//! JSON object holding `β`, the target time index and the weighted atoms.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{Block, ModelRecord, SourceRef};
use crate::embedding::WeightedEmbedding;
use crate::error::{Error, Result};
use crate::sample::{PointCloud, SampleSet};

#[derive(Serialize, Deserialize)]
struct Line {
    t: i64,
    x: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<i64>,
}

/// Parses JSON-lines sample data. Blank lines are skipped; every other line must
/// be a point record, and a time index must not mix labeled and unlabeled points.
pub fn parse_samples(text: &str) -> Result<Vec<SampleSet>> {
    read_samples_from(text.as_bytes())
}

pub fn read_samples(path: impl AsRef<Path>) -> Result<Vec<SampleSet>> {
    read_samples_from(BufReader::new(fs::File::open(path)?))
}

fn read_samples_from(reader: impl BufRead) -> Result<Vec<SampleSet>> {
    let mut groups: BTreeMap<i64, (Vec<Vec<f64>>, Vec<Option<i64>>, usize)> = BTreeMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Line = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        let g = groups
            .entry(rec.t)
            .or_insert_with(|| (Vec::new(), Vec::new(), i + 1));
        g.0.push(rec.x);
        g.1.push(rec.y);
    }
    if groups.is_empty() {
        return Err(Error::Empty("sample file"));
    }
    groups
        .into_iter()
        .map(|(t, (xs, ys, first_line))| {
            let labels = match ys.iter().filter(|y| y.is_some()).count() {
                0 => None,
                k if k == ys.len() => Some(ys.into_iter().map(Option::unwrap).collect()),
                _ => {
                    return Err(Error::Parse {
                        line: first_line,
                        msg: format!("time index {t} mixes labeled and unlabeled points"),
                    })
                }
            };
            SampleSet::new(t, xs, labels)
        })
        .collect()
}

/// Writes sets as JSON lines, in the given order.
pub fn write_samples(path: impl AsRef<Path>, sets: &[SampleSet]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    write_samples_to(&mut w, sets)?;
    w.flush()?;
    Ok(())
}

pub fn write_samples_to(mut w: impl Write, sets: &[SampleSet]) -> Result<()> {
    for s in sets {
        for p in s.points().iter() {
            let rec = Line {
                t: s.time_index(),
                x: p.x.to_vec(),
                y: p.y,
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Every point of a sample file as one cloud (e.g. a herding candidate pool).
pub fn read_pool(path: impl AsRef<Path>) -> Result<PointCloud> {
    let sets = read_samples(path)?;
    PointCloud::concat(sets.iter().map(SampleSet::points))
}

/// Output of a one-step prediction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PredictionFile {
    /// Time index the prediction is for.
    pub t: i64,
    /// `β_2, …, β_T`.
    pub beta: Vec<f64>,
    pub blocks: Vec<Block>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelRecord>,
    #[serde(flatten)]
    pub embedding: WeightedEmbedding,
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Either a prediction object or a sample file.
#[derive(Clone, Debug)]
pub enum PredictionInput {
    Weighted(PredictionFile),
    Samples(Vec<SampleSet>),
}

/// Reads a prediction JSON object if the file is one (it has an `atoms` key),
/// otherwise a JSON-lines sample file.
pub fn read_prediction_or_samples(path: impl AsRef<Path>) -> Result<PredictionInput> {
    let text = fs::read_to_string(path)?;
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) {
        if v.get("atoms").is_some() {
            return Ok(PredictionInput::Weighted(serde_json::from_value(v)?));
        }
    }
    parse_samples(&text).map(PredictionInput::Samples)
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn source_ref(path: impl AsRef<Path>) -> Result<SourceRef> {
    let p = path.as_ref();
    Ok(SourceRef {
        path: p.display().to_string(),
        sha256: sha256_file(p)?,
    })
}

/// Fails with [`Error::HashMismatch`] if a referenced file changed.
pub fn verify_source(src: &SourceRef) -> Result<()> {
    if sha256_file(&src.path)? != src.sha256 {
        return Err(Error::HashMismatch {
            path: src.path.clone(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_by_time_index() {
        let text =
            "{\"t\": 2, \"x\": [1.0]}\n\n{\"t\": 1, \"x\": [0.5]}\n{\"t\": 2, \"x\": [3.0]}\n";
        let sets = parse_samples(text).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].time_index(), 1);
        assert_eq!(sets[1].points().flat(), &[1.0, 3.0]);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "{\"t\": 1, \"x\": [0.5]}\n{\"t\": 1, \"x\": oops}\n";
        assert!(matches!(
            parse_samples(text),
            Err(Error::Parse { line: 2, .. })
        ));
        let mixed = "{\"t\": 1, \"x\": [0.5], \"y\": 1}\n{\"t\": 1, \"x\": [0.7]}\n";
        assert!(matches!(parse_samples(mixed), Err(Error::Parse { .. })));
        let ragged = "{\"t\": 1, \"x\": [0.5]}\n{\"t\": 1, \"x\": [0.7, 1.0]}\n";
        assert!(parse_samples(ragged).is_err());
    }

    #[test]
    fn samples_round_trip() {
        let sets = vec![
            SampleSet::new(
                0,
                vec![vec![0.1, 0.2], vec![1.0 / 3.0, -2.5]],
                Some(vec![1, -1]),
            )
            .unwrap(),
            SampleSet::new(4, vec![vec![1e-300, 7.0]], Some(vec![1])).unwrap(),
        ];
        let mut buf = Vec::new();
        write_samples_to(&mut buf, &sets).unwrap();
        let back = parse_samples(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, sets);
    }

    #[test]
    fn hashing_detects_changes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.jsonl");
        fs::write(&p, "{\"t\": 1, \"x\": [0.5]}\n").unwrap();
        let src = source_ref(&p).unwrap();
        assert_eq!(src.sha256.len(), 64);
        verify_source(&src).unwrap();
        fs::write(&p, "{\"t\": 1, \"x\": [0.6]}\n").unwrap();
        assert!(matches!(
            verify_source(&src),
            Err(Error::HashMismatch { .. })
        ));
    }
}
