//! Plain-text artifacts: point clouds, sample sets and result tables.
//!
//! A point cloud is a CSV with header `x0,...,x{N-1}` and one row per point,
//! plus a sibling `<file>.meta` of `key = value` lines (`dim`, `p`,
//! `resolution`, `label`, `convex`, `seed`). Sample sets are two CSVs sharing
//! an `index` column. Result tables start with `#` comment lines.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::spaces::{ClassLabel, Exponent, FiniteNormedSpace, ModelClassSurrogate};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Shortest round-trip decimal, with `inf`/`-inf`/`nan` spelled out.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

impl FromStr for Exponent {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" => Ok(Exponent::Infinity),
            t => Exponent::new(parse_f64(t)?),
        }
    }
}

impl FromStr for ClassLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = s
            .strip_suffix(')')
            .and_then(|t| t.split_once('('))
            .ok_or_else(|| Error::Parse(format!("class label {s:?} is not of the form name(arg)")))?;
        let value = |key: &str| {
            arg.strip_prefix(key)
                .and_then(|t| t.strip_prefix('='))
                .ok_or_else(|| Error::Parse(format!("class label {s:?} needs {key}=...")))
        };
        match head {
            "Kq" => Ok(ClassLabel::Kq { q: value("q")?.parse()? }),
            "diag" => Ok(ClassLabel::Diag { r: parse_f64(value("r")?)? }),
            "sparse" => Ok(ClassLabel::Sparse {
                k: value("k")?.parse().map_err(|_| Error::Parse(format!("bad sparsity in {s:?}")))?,
            }),
            "custom" => Ok(ClassLabel::Custom(arg.to_string())),
            _ => Err(Error::Parse(format!("unknown class label {head:?}"))),
        }
    }
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn coordinate_header(dim: usize) -> Vec<String> {
    (0..dim).map(|i| format!("x{i}")).collect()
}

pub fn write_point_cloud(class: &ModelClassSurrogate, path: &Path) -> Result<()> {
    let dim = class.space().dim();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(coordinate_header(dim))?;
    for x in class.points() {
        w.write_record(x.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    let mut meta = String::new();
    writeln!(meta, "dim = {dim}").unwrap();
    writeln!(meta, "p = {}", class.space().p()).unwrap();
    writeln!(meta, "resolution = {}", fmt_f64(class.resolution())).unwrap();
    writeln!(meta, "label = {}", class.label()).unwrap();
    writeln!(meta, "convex = {}", class.is_convex()).unwrap();
    if let Some(seed) = class.seed() {
        writeln!(meta, "seed = {seed}").unwrap();
    }
    fs::write(meta_path(path), meta)?;
    Ok(())
}

fn parse_meta(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse(format!("metadata line {l:?} is not key = value")))
        })
        .collect()
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(parse_f64).collect::<Result<Vec<_>>>()?);
    }
    Ok((header, rows))
}

/// Reads a cloud written by [`write_point_cloud`]. Without a `.meta` file the
/// cloud is taken as exact points of ℓ₂ labelled by the file stem.
pub fn read_point_cloud(path: &Path) -> Result<ModelClassSurrogate> {
    let meta_file = meta_path(path);
    if !meta_file.exists() {
        // bare cloud: ℓ₂, exact, labelled by the file stem
        let (header, points) = read_rows(path)?;
        if header != coordinate_header(header.len()) {
            return Err(Error::Parse(format!("header {header:?} is not x0,x1,...")));
        }
        let space = FiniteNormedSpace::l2(header.len())?;
        let name = path.file_stem().map_or("cloud".into(), |s| s.to_string_lossy().into_owned());
        return ModelClassSurrogate::new(space, points, 0.0, ClassLabel::Custom(name));
    }
    let meta = parse_meta(&fs::read_to_string(meta_file)?)?;
    let get = |key: &str| {
        meta.iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Parse(format!("metadata lacks {key}")))
    };
    let (header, points) = read_rows(path)?;
    let dim: usize = get("dim")?.parse().map_err(|_| Error::Parse("bad dim".into()))?;
    if header != coordinate_header(dim) {
        return Err(Error::Parse(format!("header {header:?} does not match dim {dim}")));
    }
    let space = FiniteNormedSpace::new(dim, get("p")?.parse()?)?;
    let mut class = ModelClassSurrogate::new(space, points, parse_f64(get("resolution")?)?, get("label")?.parse()?)?;
    if let Ok(c) = get("convex") {
        class = class.tagged_convex(c == "true");
    }
    if let Ok(seed) = get("seed") {
        class = class.with_seed(seed.parse().map_err(|_| Error::Parse("bad seed".into()))?);
    }
    Ok(class)
}

fn write_indexed(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["index".to_string()];
    header.extend(coordinate_header(dim));
    w.write_record(&header)?;
    for (i, x) in rows.iter().enumerate() {
        if x.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: x.len() });
        }
        let mut rec = vec![i.to_string()];
        rec.extend(x.iter().map(|v| fmt_f64(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Stores `(x_i, f_i)` pairs as two CSVs joined by their `index` column.
pub fn write_samples(domain: &Path, target: &Path, inputs: &[Vec<f64>], values: &[Vec<f64>]) -> Result<()> {
    if inputs.len() != values.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: values.len(),
        });
    }
    write_indexed(domain, inputs)?;
    write_indexed(target, values)
}

fn read_indexed(path: &Path) -> Result<Vec<(u64, Vec<f64>)>> {
    let (header, rows) = read_rows(path)?;
    if header.first().map(String::as_str) != Some("index") {
        return Err(Error::Parse(format!("{} lacks an index column", path.display())));
    }
    Ok(rows.into_iter().map(|r| (r[0] as u64, r[1..].to_vec())).collect())
}

/// Reads a sample set written by [`write_samples`], pairing rows by index.
pub fn read_samples(domain: &Path, target: &Path) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let mut xs = read_indexed(domain)?;
    let mut fs_ = read_indexed(target)?;
    xs.sort_by_key(|r| r.0);
    fs_.sort_by_key(|r| r.0);
    if xs.len() != fs_.len() || xs.iter().zip(&fs_).any(|(a, b)| a.0 != b.0) {
        return Err(Error::Parse("domain and target indices differ".into()));
    }
    Ok(xs.into_iter().zip(fs_).map(|(a, b)| (a.1, b.1)).collect())
}

/// A CSV table preceded by `#` comment lines.
#[derive(Debug, Clone, Default)]
pub struct ResultTable {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            comments: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::new();
        for c in &self.comments {
            for line in c.lines() {
                writeln!(out, "# {line}").unwrap();
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Parse(e.to_string()))?);
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }
}

/// Reads a table written by [`ResultTable::write`], skipping comments.
pub fn read_table(path: &Path) -> Result<ResultTable> {
    let text = fs::read_to_string(path)?;
    let mut table = ResultTable::default();
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix('#') {
            Some(c) => table.comments.push(c.trim_start().to_string()),
            None => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    table.columns = r.headers()?.iter().map(String::from).collect();
    for rec in r.records() {
        table.rows.push(rec?.iter().map(String::from).collect());
    }
    Ok(table)
}
