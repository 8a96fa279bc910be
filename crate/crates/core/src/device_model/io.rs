//! Text LUT files.
//!
//! ```text
//! acam-lut v1 <kind> <lb|hb|pulldown>
//! <n_x> <n_y>
//! <x axis values>
//! <y axis values>
//! <n_x lines of n_y values, row-major>
//! ```
//!
//! A LUT set is a directory with `lb.lut`, `hb.lut` and `pulldown.lut`, plus an
//! optional `luts.meta` of `key = value` metadata lines.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::lut::{ArchKind, Grid2, LutSet, Polarity, PulldownLut, TransferLut};
use super::DeviceError;

const MAGIC: &str = "acam-lut";
const VERSION: &str = "v1";

pub const LB_FILE: &str = "lb.lut";
pub const HB_FILE: &str = "hb.lut";
pub const PULLDOWN_FILE: &str = "pulldown.lut";
pub const META_FILE: &str = "luts.meta";

fn fmt_row(out: &mut String, values: &[f64]) {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        // 17 significant digits round-trip every f64.
        write!(out, "{v:.16e}").unwrap();
    }
    out.push('\n');
}

/// Serializes one table.
pub fn format_table(kind: ArchKind, role: &str, grid: &Grid2) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC} {VERSION} {} {role}", kind.tag()).unwrap();
    writeln!(out, "{} {}", grid.x_axis().len(), grid.y_axis().len()).unwrap();
    fmt_row(&mut out, grid.x_axis());
    fmt_row(&mut out, grid.y_axis());
    for row in grid.values().chunks(grid.y_axis().len()) {
        fmt_row(&mut out, row);
    }
    out
}

/// A parsed table before its role-specific validation.
pub struct RawTable {
    pub kind: ArchKind,
    pub role: String,
    pub grid: Grid2,
}

fn parse_err(line: usize, msg: impl Into<String>) -> DeviceError {
    DeviceError::Parse {
        line,
        msg: msg.into(),
    }
}

fn parse_values(line_no: usize, line: &str, expected: usize) -> Result<Vec<f64>, DeviceError> {
    let values = line
        .split_whitespace()
        .enumerate()
        .map(|(k, tok)| {
            tok.parse::<f64>()
                .map_err(|_| parse_err(line_no, format!("value {k}: cannot parse {tok:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(parse_err(
            line_no,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

pub fn parse_table(text: &str) -> Result<RawTable, DeviceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| parse_err(0, format!("unexpected end of file, missing {what}")))
    };

    let (ln, header) = next("header")?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != MAGIC || fields[1] != VERSION {
        return Err(parse_err(
            ln,
            format!("expected `{MAGIC} {VERSION} <kind> <role>`, found {header:?}"),
        ));
    }
    let kind: ArchKind = fields[2].parse().map_err(|_| parse_err(ln, "unknown kind"))?;
    let role = fields[3].to_string();

    let (ln, dims) = next("dimensions")?;
    let dims = parse_values(ln, dims, 2)?;
    let (nx, ny) = (dims[0], dims[1]);
    if nx.fract() != 0.0 || ny.fract() != 0.0 || nx < 0.0 || ny < 0.0 {
        return Err(parse_err(ln, "dimensions must be non-negative integers"));
    }
    let (nx, ny) = (nx as usize, ny as usize);

    let (ln, x) = next("x axis")?;
    let x_axis = parse_values(ln, x, nx)?;
    let (ln, y) = next("y axis")?;
    let y_axis = parse_values(ln, y, ny)?;
    let mut values = Vec::with_capacity(nx * ny);
    for _ in 0..nx {
        let (ln, row) = next("grid row")?;
        values.extend(parse_values(ln, row, ny)?);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing data after grid"));
    }
    let (xn, yn) = if role == "pulldown" {
        ("v_ml", "v_x")
    } else {
        ("v_dl", "g_mem")
    };
    let grid = Grid2::new(xn, x_axis, yn, y_axis, values)?;
    Ok(RawTable { kind, role, grid })
}

fn read(path: &Path) -> Result<String, DeviceError> {
    std::fs::read_to_string(path).map_err(|source| DeviceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), DeviceError> {
    std::fs::write(path, text).map_err(|source| DeviceError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_table(path: &Path, role: &str) -> Result<RawTable, DeviceError> {
    let raw = parse_table(&read(path)?).map_err(|e| e.in_file(path))?;
    if raw.role != role {
        return Err(DeviceError::Inconsistent(format!(
            "{} holds a `{}` table, expected `{role}`",
            path.display(),
            raw.role
        )));
    }
    Ok(raw)
}

pub fn save_luts(set: &LutSet, dir: &Path) -> Result<(), DeviceError> {
    std::fs::create_dir_all(dir).map_err(|source| DeviceError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    write(
        &dir.join(LB_FILE),
        &format_table(set.arch_kind, Polarity::LowerBound.tag(), set.lb.grid()),
    )?;
    write(
        &dir.join(HB_FILE),
        &format_table(set.arch_kind, Polarity::UpperBound.tag(), set.hb.grid()),
    )?;
    write(
        &dir.join(PULLDOWN_FILE),
        &format_table(set.arch_kind, "pulldown", set.pulldown.grid()),
    )?;
    let mut meta = String::new();
    for (k, v) in &set.metadata {
        writeln!(meta, "{k} = {v}").unwrap();
    }
    write(&dir.join(META_FILE), &meta)
}

pub fn load_luts(dir: &Path) -> Result<LutSet, DeviceError> {
    let lb = load_table(&dir.join(LB_FILE), Polarity::LowerBound.tag())?;
    let hb = load_table(&dir.join(HB_FILE), Polarity::UpperBound.tag())?;
    let pd = load_table(&dir.join(PULLDOWN_FILE), "pulldown")?;
    if lb.kind != hb.kind || lb.kind != pd.kind {
        return Err(DeviceError::Inconsistent(format!(
            "tables disagree on cell kind: lb={}, hb={}, pulldown={}",
            lb.kind, hb.kind, pd.kind
        )));
    }
    let kind = lb.kind;
    let lb = TransferLut::new(lb.grid, Polarity::LowerBound).map_err(|e| e.in_file(&dir.join(LB_FILE)))?;
    let hb = TransferLut::new(hb.grid, Polarity::UpperBound).map_err(|e| e.in_file(&dir.join(HB_FILE)))?;
    let pulldown = PulldownLut::new(pd.grid).map_err(|e| e.in_file(&dir.join(PULLDOWN_FILE)))?;

    let mut metadata = BTreeMap::new();
    let meta_path = dir.join(META_FILE);
    if meta_path.exists() {
        for line in read(&meta_path)?.lines() {
            if let Some((k, v)) = line.split_once('=') {
                metadata.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
    }
    LutSet::new(lb, hb, pulldown, kind, metadata)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_reports_line() {
        let text = "acam-lut v1 salm lb\n2 2\n0 1\n1 2\n0.5 0.5\n0.5 nope\n";
        match parse_table(text) {
            Err(DeviceError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {:?}", other.err()),
        }
    }

    #[test]
    fn decreasing_axis_is_named() {
        let text = "acam-lut v1 salm lb\n3 2\n0 0.5 0.4\n1 2\n0 0\n0 0\n0 0\n";
        let err = parse_table(text).err().unwrap();
        assert!(err.to_string().contains("v_dl"), "{err}");
    }

    #[test]
    fn bad_header() {
        assert!(parse_table("lut v2 salm lb\n").is_err());
        assert!(parse_table("acam-lut v1 nope lb\n2 2\n").is_err());
    }

    #[test]
    fn trailing_rows_rejected() {
        let text = "acam-lut v1 salm lb\n2 2\n0 1\n1 2\n0 0\n0 0\n0 0\n";
        assert!(parse_table(text).is_err());
    }
}
