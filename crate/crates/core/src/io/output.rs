use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::dynamics::{PhiTrajectory, PsiTrajectory};
use crate::error::{Error, Result};
use crate::experiments::StudyTable;
use crate::stochastic::RecordedPath;

/// Bumped whenever a CSV layout or a JSON field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    finish(w, path)
}

/// `t,k,phi`
pub fn write_phi_csv(path: &Path, tr: &PhiTrajectory) -> Result<()> {
    write_rows(
        path,
        &["t", "k", "phi"],
        tr.samples.iter().flat_map(|p| {
            p.values
                .iter()
                .enumerate()
                .map(move |(i, v)| vec![fmt_f64(p.t), (i + 1).to_string(), fmt_f64(*v)])
        }),
    )
}

/// `s,t,k,psi`
pub fn write_psi_csv(path: &Path, tr: &PsiTrajectory) -> Result<()> {
    write_rows(
        path,
        &["s", "t", "k", "psi"],
        tr.samples.iter().flat_map(|p| {
            p.psi.iter().enumerate().map(move |(i, v)| {
                vec![fmt_f64(p.s), fmt_f64(p.t), (i + 1).to_string(), fmt_f64(*v)]
            })
        }),
    )
}

/// `replica,t,k,x`
pub fn write_paths_csv(path: &Path, paths: &[RecordedPath]) -> Result<()> {
    write_rows(
        path,
        &["replica", "t", "k", "x"],
        paths.iter().enumerate().flat_map(|(r, p)| {
            p.times.iter().zip(&p.x).flat_map(move |(t, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(i, v)| vec![r.to_string(), fmt_f64(*t), (i + 1).to_string(), fmt_f64(*v)])
            })
        }),
    )
}

/// `n,k,deviation`: replica mean of `sup_t |X^n_k − φ_k|`.
pub fn write_study_csv(path: &Path, table: &StudyTable) -> Result<()> {
    write_rows(
        path,
        &["n", "k", "deviation"],
        table.rows.iter().flat_map(|row| {
            row.report
                .per_k_mean
                .iter()
                .enumerate()
                .map(move |(i, v)| vec![row.n.to_string(), (i + 1).to_string(), fmt_f64(*v)])
        }),
    )
}

/// `k,a`
pub fn write_sequence_csv(path: &Path, column: &str, values: &[f64]) -> Result<()> {
    write_rows(
        path,
        &["k", column],
        values
            .iter()
            .enumerate()
            .map(|(i, v)| vec![(i + 1).to_string(), fmt_f64(*v)]),
    )
}

/// Initial data as `k,c`.
pub fn write_init_csv(path: &Path, c: &[f64]) -> Result<()> {
    write_sequence_csv(path, "c", c)
}

pub fn read_init_csv(path: &Path) -> Result<Vec<f64>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "k" || &headers[1] != "c" {
        return Err(Error::Input(format!(
            "{}: expected header `k,c`",
            path.display()
        )));
    }
    let mut c: Vec<Option<f64>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |what: &str| {
            Error::Input(format!("{}: row {}: {what}", path.display(), line + 2))
        };
        let k: usize = rec[0].trim().parse().map_err(|_| bad("k is not a positive integer"))?;
        let v: f64 = rec[1].trim().parse().map_err(|_| bad("c is not a number"))?;
        if k == 0 {
            return Err(bad("k starts at 1"));
        }
        if c.len() < k {
            c.resize(k, None);
        }
        if c[k - 1].replace(v).is_some() {
            return Err(bad("duplicate k"));
        }
    }
    Ok(c.into_iter().map(|v| v.unwrap_or(0.0)).collect())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
