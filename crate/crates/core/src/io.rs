//! CSV and PGM writers for grid fields.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::grid::BallGrid;

const COORDS: [&str; 4] = ["x1", "y1", "x2", "y2"];

/// `index,x1,y1[,x2,y2],value` rows, one per interior point.
pub fn field_csv(grid: &BallGrid, values: &[f64]) -> String {
    let dim = grid.real_dim();
    let mut s = String::from("index");
    for c in &COORDS[..dim] {
        s.push(',');
        s.push_str(c);
    }
    s.push_str(",value\n");
    for (i, v) in values.iter().enumerate() {
        let _ = write!(s, "{i}");
        for x in &grid.point(i)[..dim] {
            let _ = write!(s, ",{x}");
        }
        let _ = writeln!(s, ",{v}");
    }
    s
}

/// Rows of serializable records under a fixed header.
pub fn records_csv<T: Serialize>(header: &[&str], rows: &[T]) -> Result<String> {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let v = serde_json::to_value(row)?;
        let cells: Vec<String> = header
            .iter()
            .map(|h| match &v[*h] {
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Null => String::from("nan"),
                serde_json::Value::String(t) => t.clone(),
                other => other.to_string(),
            })
            .collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    Ok(s)
}

#[derive(Clone, Debug, Serialize)]
pub struct PgmSidecar {
    pub field: String,
    /// Coordinates spanning the image (horizontal, vertical); the others are zero.
    pub plane: [String; 2],
    pub width: usize,
    pub height: usize,
    pub h: f64,
    /// Value mapped to gray level 1.
    pub min: f64,
    /// Value mapped to gray level 255.
    pub max: f64,
    /// Gray level of pixels outside the grid.
    pub fill: u8,
}

/// 8-bit P5 image of the slice through the origin spanned by the first and
/// last lattice axes (`x1, y1` for `n = 1`, `x1, x2` for `n = 2`).
pub fn pgm_slice(grid: &BallGrid, values: &[f64], field: &str) -> (Vec<u8>, PgmSidecar) {
    let n = grid.divisions() as i32;
    let side = (2 * n - 1) as usize;
    let (ax, ay) = if grid.n() == 1 { (0, 1) } else { (0, 2) };
    let mut cells = vec![None; side * side];
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in 0..side {
        for col in 0..side {
            let mut k = [0i32; 4];
            k[ax] = col as i32 - (n - 1);
            k[ay] = (n - 1) - row as i32;
            if let Some(i) = grid.index_of(&k[..grid.real_dim()]) {
                let v = values[i];
                lo = lo.min(v);
                hi = hi.max(v);
                cells[row * side + col] = Some(v);
            }
        }
    }
    let span = hi - lo;
    let mut bytes = format!("P5\n{side} {side}\n255\n").into_bytes();
    bytes.extend(cells.iter().map(|c| match c {
        None => 0u8,
        Some(v) if span > 0.0 => 1 + ((v - lo) / span * 254.0).round() as u8,
        Some(_) => 128,
    }));
    let sidecar = PgmSidecar {
        field: field.to_string(),
        plane: [COORDS[ax].to_string(), COORDS[ay].to_string()],
        width: side,
        height: side,
        h: grid.h(),
        min: lo,
        max: hi,
        fill: 0,
    };
    (bytes, sidecar)
}

/// Writes `<name>.csv`, `<name>.pgm` and `<name>.pgm.json`; returns the file names.
pub fn write_field(dir: &Path, name: &str, grid: &BallGrid, values: &[f64]) -> Result<Vec<String>> {
    let csv = format!("{name}.csv");
    fs::write(dir.join(&csv), field_csv(grid, values))?;
    let (img, side) = pgm_slice(grid, values, name);
    let pgm = format!("{name}.pgm");
    fs::write(dir.join(&pgm), img)?;
    let meta = format!("{name}.pgm.json");
    fs::write(dir.join(&meta), serde_json::to_string_pretty(&side)?)?;
    Ok(vec![csv, pgm, meta])
}
