//! Dataset loading and generation, and share checkpoints.
//!
//! Binary tensor format: `ndim: u8`, `ndim` dims as `u64` LE, then the
//! elements as `f64` LE in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ring::RingElement;
use crate::runtime::wire::{decode_tensors, encode_tensor};
use crate::sharing::SharedTensor;

/// Row-major features with one label column per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub rows: usize,
    pub dim: usize,
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, rows: usize, dim: usize) -> Result<Self> {
        if x.len() != rows * dim {
            return Err(Error::LengthMismatch(rows * dim, x.len()));
        }
        if y.len() != rows {
            return Err(Error::LengthMismatch(rows, y.len()));
        }
        Ok(Self { x, y, rows, dim })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    /// First `train` rows and the rest.
    pub fn split_at(&self, train: usize) -> (Dataset, Dataset) {
        let t = train.min(self.rows);
        let a = Dataset { x: self.x[..t * self.dim].to_vec(), y: self.y[..t].to_vec(), rows: t, dim: self.dim };
        let b = Dataset { x: self.x[t * self.dim..].to_vec(), y: self.y[t..].to_vec(), rows: self.rows - t, dim: self.dim };
        (a, b)
    }
}

/// Reads a CSV with a header row. Every column is a float feature except
/// the label column, chosen by name or defaulting to the last one.
pub fn load_csv(path: &Path, label: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| Error::Data(e.to_string()))?.clone();
    if headers.len() < 2 {
        return Err(Error::Data("need at least one feature and one label column".into()));
    }
    let label_idx = match label {
        Some(name) => headers.iter().position(|h| h == name).ok_or_else(|| Error::Data(format!("no column named {name:?}")))?,
        None => headers.len() - 1,
    };
    let (mut x, mut y, mut rows) = (Vec::new(), Vec::new(), 0);
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(Error::Data(format!("row {} has {} fields, expected {}", line + 1, rec.len(), headers.len())));
        }
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Data(format!("row {}: {field:?} is not a number", line + 1)))?;
            if i == label_idx {
                y.push(v);
            } else {
                x.push(v);
            }
        }
        rows += 1;
    }
    Dataset::new(x, y, rows, headers.len() - 1)
}

pub fn write_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    let mut header: Vec<String> = (0..ds.dim).map(|i| format!("x{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
    for r in 0..ds.rows {
        let mut rec: Vec<String> = ds.row(r).iter().map(|v| v.to_string()).collect();
        rec.push(ds.y[r].to_string());
        w.write_record(&rec).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tensor(path: &Path, shape: &[usize], data: &[f64]) -> Result<()> {
    if shape.iter().product::<usize>() != data.len() || shape.len() > u8::MAX as usize {
        return Err(Error::ShapeMismatch { expected: shape.to_vec(), found: vec![data.len()] });
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&[shape.len() as u8])?;
    for &d in shape {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut buf = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut buf)?;
    let ndim = *buf.first().ok_or_else(|| Error::Data("empty tensor file".into()))? as usize;
    let head = 1 + 8 * ndim;
    if buf.len() < head {
        return Err(Error::Data("truncated tensor header".into()));
    }
    let shape: Vec<usize> = (0..ndim).map(|i| u64::from_le_bytes(buf[1 + 8 * i..9 + 8 * i].try_into().unwrap()) as usize).collect();
    let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| Error::Data("tensor too large".into()))?;
    if buf.len() != head + 8 * n {
        return Err(Error::Data(format!("expected {n} elements, file holds {} bytes of data", buf.len() - head)));
    }
    let data = buf[head..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((shape, data))
}

/// Two isotropic unit-variance Gaussian classes in `dim` dimensions whose
/// means are `separation` apart along the diagonal. Labels are 0 and 1,
/// rows are shuffled.
pub fn two_gaussians(rows: usize, dim: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = separation / 2.0 / (dim as f64).sqrt();
    let mut x = Vec::with_capacity(rows * dim);
    let mut y = Vec::with_capacity(rows);
    for _ in 0..rows {
        let label = rng.random_bool(0.5);
        let s = if label { shift } else { -shift };
        for _ in 0..dim {
            let e: f64 = rng.sample(StandardNormal);
            x.push(e + s);
        }
        y.push(if label { 1.0 } else { 0.0 });
    }
    Dataset { x, y, rows, dim }
}

/// Writes one party's shares in the wire tensor format, back to back.
pub fn save_shares(path: &Path, tensors: &[&SharedTensor]) -> Result<()> {
    let mut buf = Vec::new();
    for t in tensors {
        if t.is_pending() {
            return Err(Error::Protocol(format!("tensor {} is pending; settle it before saving", t.id())));
        }
        encode_tensor(t.shape(), t.data(), &mut buf);
    }
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_shares(path: &Path) -> Result<Vec<(Vec<usize>, Vec<RingElement>)>> {
    decode_tensors(&std::fs::read(path)?)
}
