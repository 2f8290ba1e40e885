//! Scenario matrices: the data model, the factor-model generator and CSV I/O.
//!
//! A [`ScenarioMatrix`] holds `J` equally likely simulated outcomes (rows) for
//! `n` instruments (columns). Storage is dense and row-major so that outcome
//! and cut computations stream over scenarios.

use std::collections::HashSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Stream of the seeded generator that feeds the factor matrix `F`.
pub const FACTOR_STREAM: u64 = 0;
/// Stream of the seeded generator that feeds the loading matrix `L`.
pub const LOADING_STREAM: u64 = 1;

/// `J x n` matrix of simulated instrument values plus instrument labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioMatrix {
    values: Array2<f64>,
    names: Vec<String>,
}

impl ScenarioMatrix {
    pub fn new(values: Array2<f64>, names: Vec<String>) -> Result<Self> {
        let (j, n) = values.dim();
        if j == 0 || n == 0 {
            return Err(Error::dim(format!(
                "scenario matrix must be at least 1x1, got {j}x{n}"
            )));
        }
        if names.len() != n {
            return Err(Error::dim(format!(
                "{} instrument names for {n} columns",
                names.len()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::invalid(format!("duplicate instrument name {name:?}")));
            }
        }
        if let Some(((row, col), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry {v} at scenario {row}, instrument {col}"
            )));
        }
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().into_owned()
        };
        Ok(Self { values, names })
    }

    /// Builds a matrix with generated instrument names `instrument_1..n`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let names = default_names(values.ncols());
        Self::new(values, names)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::dim("rows of unequal length"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), n), flat)
            .map_err(|e| Error::dim(e.to_string()))?;
        Self::from_values(values)
    }

    /// Scenario count `J`.
    pub fn scenarios(&self) -> usize {
        self.values.nrows()
    }

    /// Instrument count `n`.
    pub fn instruments(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn row(&self, scenario: usize) -> ArrayView1<'_, f64> {
        self.values.row(scenario)
    }

    /// Mean over all entries.
    pub fn mean_entry(&self) -> f64 {
        self.values.mean().unwrap_or(0.0)
    }

    /// Per-instrument expected value, `p_i = (1/J) sum_j Y[j,i]`.
    pub fn column_means(&self) -> ProfitVector {
        let j = self.scenarios() as f64;
        let sums = self.values.sum_axis(ndarray::Axis(0));
        ProfitVector(sums.iter().map(|s| s / j).collect())
    }

    /// The outcome vector `Yx`: portfolio value per scenario for position `x`.
    pub fn outcome_vector(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.instruments() {
            return Err(Error::dim(format!(
                "position has {} entries, matrix has {} instruments",
                x.len(),
                self.instruments()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("position contains non-finite entries"));
        }
        let x = ArrayView1::from(x);
        Ok(self.values.dot(&x).to_vec())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::read_csv(file, path)
    }

    /// Parses the CSV layout: one header row of instrument names followed by
    /// `J` records of `n` numeric fields. Row numbers in errors are file
    /// lines, so the first data row is row 2.
    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<Self> {
        let parse_err = |row: usize, message: String| Error::Parse {
            path: origin.to_owned(),
            row,
            message,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if names.is_empty() || names.iter().all(String::is_empty) {
            return Err(parse_err(1, "missing header row".into()));
        }
        let n = names.len();
        let mut flat = Vec::new();
        let mut rows = 0usize;
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(rows + 2, |p| p.line() as usize);
            if record.len() != n {
                return Err(parse_err(
                    line,
                    format!("expected {n} fields, found {}", record.len()),
                ));
            }
            for (col, field) in record.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    parse_err(
                        line,
                        format!("column {} ({}): not a number: {field:?}", col + 1, names[col]),
                    )
                })?;
                if !v.is_finite() {
                    return Err(parse_err(
                        line,
                        format!("column {} ({}): non-finite value", col + 1, names[col]),
                    ));
                }
                flat.push(v);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(parse_err(2, "no scenario rows".into()));
        }
        let values =
            Array2::from_shape_vec((rows, n), flat).map_err(|e| Error::dim(e.to_string()))?;
        Self::new(values, names)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut out = std::io::BufWriter::new(file);
        self.write_csv(&mut out)
            .and_then(|_| out.flush())
            .map_err(|source| Error::Io {
                path: path.to_owned(),
                source,
            })
    }

    /// Writes values in Rust's shortest round-trip decimal form, so a
    /// load after save reproduces every entry bit for bit.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", self.names.join(","))?;
        let mut line = String::new();
        for row in self.values.rows() {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

pub(crate) fn default_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("instrument_{i}")).collect()
}

/// Expected per-unit instrument values `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitVector(Vec<f64>);

impl ProfitVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::dim("profit vector is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("profit vector contains non-finite entries"));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(p, x)| p * x).sum()
    }
}

/// Parameters of the factor-model generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorSpec {
    pub scenarios: usize,
    pub instruments: usize,
    pub factors: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub const DEFAULT_FACTORS: usize = 100;

    pub fn new(scenarios: usize, instruments: usize, seed: u64) -> Self {
        Self {
            scenarios,
            instruments,
            factors: Self::DEFAULT_FACTORS,
            seed,
        }
    }

    pub fn with_factors(mut self, factors: usize) -> Self {
        self.factors = factors;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.scenarios == 0 || self.instruments == 0 || self.factors == 0 {
            return Err(Error::dim(format!(
                "generator needs positive dimensions, got J={} n={} f={}",
                self.scenarios, self.instruments, self.factors
            )));
        }
        Ok(())
    }
}

/// Uniform draw on the open interval (0, 1) from the top 53 bits of a word.
fn open_unit(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw on [0, 1).
fn half_open_unit(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn stream(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Factor matrix `F` (`J x f`) with entries `2 - exp(N)`, `N` standard normal.
///
/// Normals are produced by inverting the standard normal CDF at an open-unit
/// uniform taken from ChaCha20 stream [`FACTOR_STREAM`], filled row by row.
pub fn factor_matrix(spec: &GeneratorSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut rng = stream(spec.seed, FACTOR_STREAM);
    Ok(Array2::from_shape_simple_fn(
        (spec.scenarios, spec.factors),
        || 2.0 - normal.inverse_cdf(open_unit(&mut rng)).exp(),
    ))
}

/// Loading matrix `L` (`f x n`) with entries uniform on [0, 1), drawn from
/// ChaCha20 stream [`LOADING_STREAM`] row by row.
pub fn loading_matrix(spec: &GeneratorSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let mut rng = stream(spec.seed, LOADING_STREAM);
    Ok(Array2::from_shape_simple_fn(
        (spec.factors, spec.instruments),
        || half_open_unit(&mut rng),
    ))
}

/// Synthetic reinsurance-style scenarios `Y = F L`: every instrument is a
/// random linear combination of the same `f` heavy-left-tailed factors.
pub fn generate_synthetic(spec: &GeneratorSpec) -> Result<ScenarioMatrix> {
    let f = factor_matrix(spec)?;
    let l = loading_matrix(spec)?;
    ScenarioMatrix::from_values(f.dot(&l))
}
