//! CSV import and export. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::cluster::ClusteringResult;
use crate::error::{Error, Result};
use crate::extremal::ExtremalSample;
use crate::graph::WeightedGraph;
use crate::matrix::Matrix;
use crate::variates::SampleMatrix;

fn write_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<writer>", io),
        other => Error::invalid(format!("csv write failed: {other:?}")),
    }
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn header(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::io("<writer>", e))
}

/// Columns `x1..xd` followed by `z1..zp` when latent factors are present.
pub fn write_sample<W: Write>(out: W, sample: &SampleMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = sample.z.as_ref().map_or(0, Matrix::ncols);
    let head: Vec<String> = header("x", sample.dim()).chain(header("z", p)).collect();
    w.write_record(&head).map_err(write_err)?;
    for i in 0..sample.n() {
        let mut rec: Vec<String> = sample.x.row(i).iter().copied().map(fmt).collect();
        if let Some(z) = &sample.z {
            rec.extend(z.row(i).iter().copied().map(fmt));
        }
        w.write_record(&rec).map_err(write_err)?;
    }
    finish(w)
}

/// Reads a sample CSV. Columns named `z…` become latent factors; every other
/// column is an observed coordinate.
pub fn read_sample<R: Read>(input: R) -> Result<SampleMatrix> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let head = r
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let is_latent: Vec<bool> = head.iter().map(|h| h.starts_with('z')).collect();
    let d = is_latent.iter().filter(|l| !**l).count();
    let p = head.len() - d;
    if d == 0 {
        return Err(Error::Parse {
            line: 1,
            message: "no observed columns".into(),
        });
    }
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != head.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", head.len(), rec.len()),
            });
        }
        for (field, latent) in rec.iter().zip(&is_latent) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("not a number: '{field}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite value '{field}'"),
                });
            }
            if *latent {
                zs.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = xs.len() / d;
    let x = Matrix::from_vec(n, d, xs)?;
    let z = if p > 0 { Some(Matrix::from_vec(n, p, zs)?) } else { None };
    Ok(SampleMatrix {
        x,
        z,
        eta: None,
        noise: None,
    })
}

/// `index,radius,a1..ad`.
pub fn write_extremes<W: Write>(out: W, e: &ExtremalSample) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let head: Vec<String> = ["index".to_string(), "radius".to_string()]
        .into_iter()
        .chain(header("a", e.dim()))
        .collect();
    w.write_record(&head).map_err(write_err)?;
    for (pos, (&idx, &r)) in e.indices.iter().zip(&e.radii).enumerate() {
        let mut rec = vec![idx.to_string(), fmt(r)];
        rec.extend(e.angles.row(pos).iter().copied().map(fmt));
        w.write_record(&rec).map_err(write_err)?;
    }
    finish(w)
}

/// `i,j,weight` for every edge with `i < j`.
pub fn write_edges<W: Write>(out: W, g: &WeightedGraph) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "j", "weight"]).map_err(write_err)?;
    for (i, j, wt) in g.edges() {
        w.write_record([i.to_string(), j.to_string(), fmt(wt)]).map_err(write_err)?;
    }
    finish(w)
}

/// Dense matrix, one row per line, no header.
pub fn write_dense<W: Write>(out: W, m: &Matrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for row in m.rows() {
        w.write_record(row.iter().copied().map(fmt)).map_err(write_err)?;
    }
    finish(w)
}

/// `index,label` with the original sample index; stripped singletons get `-1`.
pub fn write_labels<W: Write>(out: W, e: &ExtremalSample, res: &ClusteringResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "label"]).map_err(write_err)?;
    for (&idx, l) in e.indices.iter().zip(&res.labels) {
        let label = l.map_or("-1".to_string(), |v| v.to_string());
        w.write_record([idx.to_string(), label]).map_err(write_err)?;
    }
    finish(w)
}

/// `label,c1..cd,mass`.
pub fn write_atoms<W: Write>(out: W, atoms: &Matrix, masses: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let head: Vec<String> = std::iter::once("label".to_string())
        .chain(header("c", atoms.ncols()))
        .chain(std::iter::once("mass".to_string()))
        .collect();
    w.write_record(&head).map_err(write_err)?;
    for (j, mass) in masses.iter().enumerate() {
        let mut rec = vec![j.to_string()];
        rec.extend(atoms.row(j).iter().copied().map(fmt));
        rec.push(fmt(*mass));
        w.write_record(&rec).map_err(write_err)?;
    }
    finish(w)
}

/// `rank,eigenvalue`, rank starting at 1.
pub fn write_scree<W: Write>(out: W, eigenvalues: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "eigenvalue"]).map_err(write_err)?;
    for (i, v) in eigenvalues.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt(*v)]).map_err(write_err)?;
    }
    finish(w)
}

/// Hex SHA-256 of a canonical configuration string.
pub fn config_hash(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Path of the metadata sidecar: same basename with a `.meta` suffix.
pub fn meta_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

/// Writes `key=value` lines next to an output file.
pub fn write_meta(path: &Path, entries: &[(&str, String)]) -> Result<()> {
    let target = meta_path(path);
    let mut text = String::new();
    for (k, v) in entries {
        text.push_str(k);
        text.push('=');
        text.push_str(v);
        text.push('\n');
    }
    std::fs::write(&target, text).map_err(|e| Error::io(&target, e))
}

/// Opens `path` for buffered writing and runs `f` on it, tagging I/O
/// errors with the path.
pub fn write_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sample_file(path: &Path) -> Result<SampleMatrix> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sample(BufReader::new(file))
}
