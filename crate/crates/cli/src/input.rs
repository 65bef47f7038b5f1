use std::fs;
use std::path::{Path, PathBuf};

use ransom_core::demand::{DemandPoint, Polynomial};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Raw bytes of an input file together with their SHA-256 digest.
pub struct InputFile {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
    pub sha256: String,
}

impl InputFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        let sha256 = hex::encode(Sha256::digest(&bytes));
        Ok(InputFile { path: path.to_owned(), bytes, sha256 })
    }

    pub fn text(&self) -> Result<&str, CliError> {
        std::str::from_utf8(&self.bytes).map_err(|_| self.invalid("not valid UTF-8"))
    }

    pub fn invalid(&self, message: impl std::fmt::Display) -> CliError {
        CliError::Input { path: self.path.clone(), message: message.to_string() }
    }
}

/// Inverse demand named on the command line: the built-in curve or a JSON file.
pub enum PolySource {
    Builtin,
    File(InputFile),
}

impl PolySource {
    pub fn resolve(arg: &str) -> Result<(Polynomial, PolySource), CliError> {
        if arg == "paper" {
            return Ok((Polynomial::reference_wta(), PolySource::Builtin));
        }
        let file = InputFile::read(Path::new(arg))?;
        let poly = parse_polynomial(&file)?;
        Ok((poly, PolySource::File(file)))
    }

    pub fn digest(&self) -> Option<&str> {
        match self {
            PolySource::Builtin => None,
            PolySource::File(f) => Some(&f.sha256),
        }
    }
}

pub fn parse_polynomial(file: &InputFile) -> Result<Polynomial, CliError> {
    let poly: Polynomial = serde_json::from_slice(&file.bytes).map_err(|e| file.invalid(e))?;
    if poly.coefficients.is_empty() || poly.coefficients.iter().any(|c| !c.is_finite()) {
        return Err(file.invalid("coefficients must be a non-empty list of finite numbers"));
    }
    Ok(poly)
}

/// `quantity,price` rows.
pub fn parse_points(file: &InputFile) -> Result<Vec<DemandPoint>, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file.bytes.as_slice());
    let header = reader.headers().map_err(|e| file.invalid(e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["quantity", "price"] {
        return Err(file.invalid("expected header `quantity,price`"));
    }
    reader
        .deserialize::<DemandPoint>()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| file.invalid(format!("row {}: {e}", i + 1))))
        .collect()
}

/// One valuation per row, in pounds, under a `valuation` header.
pub fn parse_valuations(file: &InputFile) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file.bytes.as_slice());
    let header = reader.headers().map_err(|e| file.invalid(e))?.clone();
    let column =
        header.iter().position(|h| h == "valuation").ok_or_else(|| file.invalid("expected a `valuation` column"))?;
    let mut values = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| file.invalid(e))?;
        let cell = row.get(column).unwrap_or("");
        let v: f64 = cell.parse().map_err(|_| file.invalid(format!("row {}: `{cell}` is not a number", i + 1)))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(file.invalid(format!("row {}: valuation must be finite and non-negative", i + 1)));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(file.invalid("no valuations"));
    }
    Ok(values)
}
