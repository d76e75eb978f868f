//! File formats.
//!
//! Point sets are JSONL: a header object on the first line, then one JSON
//! array of real coordinates per point (complex points interleave `re, im`).
//! Floats are written with 17 significant digits so files round-trip exactly.
//! CSV files start with one `#` comment line echoing the run, then a header
//! row.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::{Error, Result};
use crate::generators::PairedPointSet;
use crate::point::{FieldTag, PointSet, Vector};

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSetHeader {
    pub field: FieldTag,
    pub n: usize,
    pub count: usize,
    pub provenance: String,
    pub truncation_radius: Option<f64>,
}

pub fn write_point_set<W: Write>(ps: &PointSet, mut w: W) -> Result<()> {
    let header = PointSetHeader {
        field: ps.field(),
        n: ps.dim(),
        count: ps.len(),
        provenance: ps.provenance().to_string(),
        truncation_radius: ps.truncation_radius(),
    };
    w.write_all(&to_json_compact(&header)?)?;
    w.write_all(b"\n")?;
    let mut line = String::new();
    for p in ps.points() {
        line.clear();
        line.push('[');
        for (i, x) in p.coords().iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(*x));
        }
        line.push_str("]\n");
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_point_set<R: BufRead>(r: R) -> Result<PointSet> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty point-set file".into()))??;
    let header: PointSetHeader =
        serde_json::from_str(&first).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let mut points = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let coords: Vec<f64> = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?;
        let v = Vector::new(header.field, header.n, coords)
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 2)))?;
        points.push(v);
    }
    if points.len() != header.count {
        return Err(Error::Format(format!(
            "header declares {} points, file has {}",
            header.count,
            points.len()
        )));
    }
    PointSet::new(
        header.field,
        header.n,
        points,
        header.provenance,
        header.truncation_radius,
    )
}

pub fn save_point_set(ps: &PointSet, path: &Path) -> Result<()> {
    write_point_set(ps, BufWriter::new(File::create(path)?))
}

pub fn load_point_set(path: &Path) -> Result<PointSet> {
    read_point_set(BufReader::new(File::open(path)?))
}

/// Writes `<stem>_source.jsonl`, `<stem>_target.jsonl` and `<stem>_pairing.csv`
/// into `dir` and returns the three paths.
pub fn save_paired(pp: &PairedPointSet, dir: &Path, stem: &str, comment: &str) -> Result<[PathBuf; 3]> {
    let source = dir.join(format!("{stem}_source.jsonl"));
    let target = dir.join(format!("{stem}_target.jsonl"));
    let pairing = dir.join(format!("{stem}_pairing.csv"));
    save_point_set(&pp.source, &source)?;
    save_point_set(&pp.target, &target)?;
    let mut csv = CsvTable::new(comment, &["source_index", "target_index"]);
    for (i, &t) in pp.pairing.iter().enumerate() {
        csv.row(vec![i.to_string(), t.to_string()]);
    }
    csv.save(&pairing)?;
    Ok([source, target, pairing])
}

pub fn load_paired(source: &Path, target: &Path, pairing: &Path) -> Result<PairedPointSet> {
    let src = load_point_set(source)?;
    let tgt = load_point_set(target)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(pairing)
        .map_err(csv_err)?;
    let mut perm = vec![usize::MAX; src.len()];
    for rec in reader.deserialize::<(usize, usize)>() {
        let (s, t) = rec.map_err(csv_err)?;
        if s >= perm.len() {
            return Err(Error::Format(format!("source index {s} out of range")));
        }
        perm[s] = t;
    }
    PairedPointSet::new(src, tgt, perm)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// An in-memory CSV table with a leading comment line.
#[derive(Clone, Debug)]
pub struct CsvTable {
    comment: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(comment: &str, header: &[&str]) -> Self {
        Self {
            comment: comment.replace(['\n', '\r'], " "),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.header.len(), "row width must match header");
        self.rows.push(cells);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        if !self.comment.is_empty() {
            writeln!(out, "# {}", self.comment)?;
        }
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }
}

/// JSON formatter writing floats with 17 significant digits.
struct Sci17<F>(F);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*)),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, writer: &mut W $(, $arg: $ty)*) -> std::io::Result<()> {
                self.0.$name(writer $(, $arg)*)
            }
        )*
    };
}

impl<F: Formatter> Formatter for Sci17<F> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    forward!(
        begin_array(),
        end_array(),
        begin_array_value(first: bool),
        end_array_value(),
        begin_object(),
        end_object(),
        begin_object_key(first: bool),
        end_object_key(),
        begin_object_value(),
        end_object_value(),
    );
}

pub fn to_json_compact<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sci17(serde_json::ser::CompactFormatter));
    value.serialize(&mut ser)?;
    Ok(out)
}

pub fn to_json_pretty<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sci17(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

pub fn save_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, to_json_pretty(value)?)?;
    Ok(())
}
