//! Observed right-censored samples `(x, u, δ)` and their CSV form.
//!
//! CSV layout: header `x1,...,xd,u,delta`, `delta` written as `0`/`1`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{validation, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSample {
    pub x: Vec<f64>,
    /// Observed time `U = min(T, C)`.
    pub u: f64,
    /// Event indicator `Δ = 1(C >= T)`.
    pub delta: bool,
}

/// Column-oriented dataset with row-major covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    x: Vec<f64>,
    u: Vec<f64>,
    delta: Vec<bool>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self { dim, x: Vec::new(), u: Vec::new(), delta: Vec::new() }
    }

    pub fn from_columns(rows: &[Vec<f64>], u: Vec<f64>, delta: Vec<bool>) -> Result<Self> {
        if rows.len() != u.len() || u.len() != delta.len() {
            return Err(validation("dataset columns have different lengths"));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut ds = Dataset::new(dim);
        for ((x, u), d) in rows.iter().zip(u).zip(delta) {
            ds.push(x, u, d)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, x: &[f64], u: f64, delta: bool) -> Result<()> {
        if x.len() != self.dim {
            return Err(validation(format!("row has {} covariates, expected {}", x.len(), self.dim)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(validation("covariates must be finite"));
        }
        if !(u > 0.0 && u.is_finite()) {
            return Err(validation(format!("observed time must be finite and > 0, got {u}")));
        }
        self.x.extend_from_slice(x);
        self.u.push(u);
        self.delta.push(delta);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn delta(&self) -> &[bool] {
        &self.delta
    }

    pub fn sample(&self, i: usize) -> ObservedSample {
        ObservedSample { x: self.row(i).to_vec(), u: self.u[i], delta: self.delta[i] }
    }

    pub fn n_events(&self) -> usize {
        self.delta.iter().filter(|&&d| d).count()
    }

    pub fn censored_fraction(&self) -> f64 {
        1.0 - self.n_events() as f64 / self.len() as f64
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("x{j}")).collect();
        header.push("u".into());
        header.push("delta".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.u[i].to_string());
            rec.push(if self.delta[i] { "1".into() } else { "0".into() });
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let n_cols = header.len();
        if n_cols < 3 {
            return Err(validation("dataset CSV needs at least x1,u,delta"));
        }
        let dim = n_cols - 2;
        for (j, name) in header.iter().enumerate() {
            let expected = match j {
                j if j < dim => format!("x{}", j + 1),
                j if j == dim => "u".to_string(),
                _ => "delta".to_string(),
            };
            if name.trim() != expected {
                return Err(validation(format!("column {j}: expected header `{expected}`, found `{name}`")));
            }
        }
        let mut ds = Dataset::new(dim);
        let mut x = vec![0.0; dim];
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |j: usize| -> Result<f64> {
                rec[j].trim().parse::<f64>().map_err(|e| {
                    validation(format!("row {}: column {}: {e}", line + 1, &header[j]))
                })
            };
            for (j, slot) in x.iter_mut().enumerate() {
                *slot = parse(j)?;
            }
            let u = parse(dim)?;
            let delta = match rec[dim + 1].trim() {
                "1" => true,
                "0" => false,
                other => return Err(validation(format!("row {}: delta must be 0 or 1, got `{other}`", line + 1))),
            };
            ds.push(&x, u, delta)?;
        }
        Ok(ds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(Error::Io)?;
        Self::read_csv(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}
