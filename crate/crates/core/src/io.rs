//! CSV panels: header row of variable names, then one row per time point.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::estimators::ObservationMatrix;

pub fn read_csv_from(reader: impl Read) -> Result<ObservationMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let p = names.len();
    let mut flat = Vec::new();
    let mut q = 0;
    for (t, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != p {
            return Err(Error::Parse(format!("row {} has {} fields, expected {p}", t + 1, rec.len())));
        }
        for (i, field) in rec.iter().enumerate() {
            if field.is_empty() {
                return Err(Error::InvalidInput(format!("missing value at row {}, column {}", t + 1, names[i])));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}, column {}: cannot parse {field:?}", t + 1, names[i])))?;
            flat.push(v);
        }
        q += 1;
    }
    let data = Array2::from_shape_vec((q, p), flat).map_err(|e| Error::Parse(e.to_string()))?;
    ObservationMatrix::new(names, data)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<ObservationMatrix> {
    read_csv_from(File::open(path)?)
}

pub fn write_csv_to(mut w: impl Write, names: &[String], data: &Array2<f64>) -> Result<()> {
    writeln!(w, "{}", names.join(","))?;
    for row in data.rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_csv(path: impl AsRef<Path>, obs: &ObservationMatrix) -> Result<()> {
    let f = std::io::BufWriter::new(File::create(path)?);
    write_csv_to(f, obs.names(), obs.data())
}
