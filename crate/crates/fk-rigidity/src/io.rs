//! CSV input/output.
//!
//! Fields are written as `k1,k2,value` rows over the stored sites, with the
//! window geometry in a `key=value` sidecar next to the file (`<path>.meta`).
//! Every real number is written with 17 significant digits (`{:.16e}`) so that
//! values round-trip exactly and identical runs give byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::angular::AngularData;
use crate::error::{Error, Result};
use crate::lattice::{LatticeWindow, ScalarField, SiteIndex};

/// Fixed-precision formatting used for every real number in CSV output.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

/// Path of the geometry sidecar for a field CSV.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn window_meta(w: &LatticeWindow) -> String {
    format!(
        "h={}\ni1_min={}\ni1_max={}\ni2_min={}\ni2_max={}\nhalo={}\n",
        fmt_real(w.h),
        w.i1_min,
        w.i1_max,
        w.i2_min,
        w.i2_max,
        w.halo
    )
}

/// Parse `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn meta_value<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    let raw = map.get(key).ok_or_else(|| Error::Parse(format!("metadata is missing {key:?}")))?;
    raw.parse().map_err(|_| Error::Parse(format!("metadata {key}={raw:?} is not valid")))
}

/// Write `k1,k2,value` rows (stored sites, storage order) to any writer.
pub fn write_field<W: Write>(out: W, u: &ScalarField) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["k1", "k2", "value"])?;
    let w = u.window();
    for (idx, &v) in u.values().iter().enumerate() {
        let s = w.stored_site(idx);
        wtr.write_record([s.k1.to_string(), s.k2.to_string(), fmt_real(v)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Write a field CSV and its geometry sidecar.
pub fn write_field_csv(path: &Path, u: &ScalarField) -> Result<()> {
    write_field(fs::File::create(path)?, u)?;
    fs::write(meta_path(path), window_meta(u.window()))?;
    Ok(())
}

/// Read a field CSV.
///
/// The geometry comes from the sidecar when present. Without one, `h` must be
/// given and the window is the bounding box of the rows with no halo.
/// Every site of the window must appear exactly once.
pub fn read_field_csv(path: &Path, h: Option<f64>) -> Result<ScalarField> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|c| c.trim() == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column {name:?}", path.display())))
    };
    let (c1, c2, cv) = (col("k1")?, col("k2")?, col("value")?);
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| rec.get(c).map(str::trim).unwrap_or("");
        let bad = |what: &str| Error::Parse(format!("{}: row {}: invalid {what}", path.display(), n + 2));
        let k1: i64 = field(c1).parse().map_err(|_| bad("k1"))?;
        let k2: i64 = field(c2).parse().map_err(|_| bad("k2"))?;
        let v: f64 = field(cv).parse().map_err(|_| bad("value"))?;
        rows.push((SiteIndex::new(k1, k2), v));
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let meta = meta_path(path);
    let window = if meta.exists() {
        let map = parse_key_values(&fs::read_to_string(&meta)?)?;
        LatticeWindow::new(
            meta_value(&map, "h")?,
            meta_value(&map, "i1_min")?,
            meta_value(&map, "i1_max")?,
            meta_value(&map, "i2_min")?,
            meta_value(&map, "i2_max")?,
            meta_value(&map, "halo")?,
        )?
    } else {
        let h = h.ok_or_else(|| {
            Error::Parse(format!("{}: no metadata sidecar; the lattice spacing must be supplied", path.display()))
        })?;
        let (mut a1, mut b1, mut a2, mut b2) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
        for (s, _) in &rows {
            a1 = a1.min(s.k1);
            b1 = b1.max(s.k1);
            a2 = a2.min(s.k2);
            b2 = b2.max(s.k2);
        }
        LatticeWindow::new(h, a1, b1, a2, b2, 0)?
    };
    let mut values = vec![f64::NAN; window.stored_len()];
    let mut seen = vec![false; window.stored_len()];
    for (s, v) in rows {
        let idx = window
            .stored_index(s)
            .ok_or_else(|| Error::Parse(format!("site ({}, {}) lies outside the declared window", s.k1, s.k2)))?;
        if seen[idx] {
            return Err(Error::Parse(format!("site ({}, {}) appears twice", s.k1, s.k2)));
        }
        seen[idx] = true;
        values[idx] = v;
    }
    if let Some(idx) = seen.iter().position(|&b| !b) {
        let s = window.stored_site(idx);
        return Err(Error::Parse(format!("site ({}, {}) is missing", s.k1, s.k2)));
    }
    ScalarField::from_values(window, values)
}

/// Write `k1,k2,rho_plus,theta_plus,rho_minus,theta_minus` over the stored
/// sites of the angular window.
pub fn write_angular<W: Write>(out: W, ang: &AngularData) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["k1", "k2", "rho_plus", "theta_plus", "rho_minus", "theta_minus"])?;
    let w = *ang.window();
    for idx in 0..w.stored_len() {
        let s = w.stored_site(idx);
        let mut rec = vec![s.k1.to_string(), s.k2.to_string()];
        for f in [&ang.rho_plus, &ang.theta_plus, &ang.rho_minus, &ang.theta_minus] {
            rec.push(fmt_real(f.values()[idx]));
        }
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// A header plus rows of already formatted cells.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    /// Append a row; it must have as many cells as the header.
    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} cells but the header has {}",
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(&self.header)?;
        for r in &self.rows {
            wtr.write_record(r)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_to_path(&self, path: &Path) -> Result<()> {
        self.write(fs::File::create(path)?)
    }
}
