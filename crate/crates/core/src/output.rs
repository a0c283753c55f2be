//! CSV grids, provenance sidecars and heatmaps.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::sweep::{SweepResult, SweepRow};
use crate::thermo::{ObservablesRecord, COLUMNS};

/// Placeholder written in every observable column of a failed point.
pub const ERR_MARKER: &str = "ERR";

/// Shortest decimal that parses back to the same double.
fn fmt(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        match row {
            SweepRow::Ok(r) => w.write_record(r.values().iter().map(|v| fmt(*v)))?,
            SweepRow::Failed { gamma_d, kdt, .. } => {
                let mut fields = vec![fmt(*gamma_d), fmt(*kdt)];
                fields.extend(std::iter::repeat_n(ERR_MARKER.to_string(), COLUMNS.len() - 2));
                w.write_record(&fields)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(&result.rows, BufWriter::new(file)).map_err(Error::Csv)
}

/// Parses a grid written by [`write_csv`]. Failed rows come back with an
/// empty message.
pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(Error::Csv)?.clone();
    if header.iter().ne(COLUMNS.iter().copied()) {
        return Err(Error::UnknownColumn(header.iter().collect::<Vec<_>>().join(",")));
    }
    let bad = |s: &str| Error::Csv(csv::Error::from(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("bad value {s:?}"))));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(Error::Csv)?;
        if rec.len() != COLUMNS.len() {
            return Err(bad(&rec.iter().collect::<Vec<_>>().join(",")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
        if rec.iter().skip(2).all(|f| f == ERR_MARKER) {
            rows.push(SweepRow::Failed { gamma_d: num(&rec[0])?, kdt: num(&rec[1])?, message: String::new() });
            continue;
        }
        let mut v = [0.0; 14];
        for (slot, field) in v.iter_mut().zip(rec.iter()) {
            *slot = num(field)?;
        }
        rows.push(SweepRow::Ok(ObservablesRecord::from_values(v)));
    }
    Ok(rows)
}

/// Sidecar path holding provenance, so the CSV itself stays reproducible.
pub fn provenance_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// `key = value` lines: provenance, grid axes, calibration and failures.
pub fn emit_provenance(result: &SweepResult, path: &Path) -> Result<()> {
    let mut text = String::new();
    let p = &result.provenance;
    text.push_str(&format!("config_sha256 = {}\nversion = {}\ntimestamp_unix = {}\n", p.config_hash, p.version, p.timestamp));
    text.push_str(&format!("gamma_points = {}\nkdT_points = {}\n", result.grid.gamma_values.len(), result.grid.kdt_values.len()));
    if let Some(site) = result.grid.observer_site {
        text.push_str(&format!("observer_site = {site}\n"));
    }
    if let Some(c) = result.calibration {
        text.push_str(&format!("slowest_rate = {:e}\ngamma_max = {:e}\n", c.slowest_rate, c.gamma_max));
    }
    for row in &result.rows {
        if let SweepRow::Failed { gamma_d, kdt, message } = row {
            text.push_str(&format!("failed = gamma_D {gamma_d:e}, kdT {kdt:e}: {message}\n"));
        }
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Summary of a rendered column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatmapSummary {
    pub min: f64,
    pub max: f64,
    /// Largest magnitude, mapped to the ends of the colour scale.
    pub scale: f64,
    pub has_sign_change: bool,
}

const CELL: u32 = 12;
const MISSING: Rgb<u8> = Rgb([128, 128, 128]);

/// Blue for negative, white at zero, red for positive.
pub fn diverging_color(value: f64, scale: f64) -> Rgb<u8> {
    if !value.is_finite() {
        return MISSING;
    }
    let t = if scale > 0.0 { (value / scale).clamp(-1.0, 1.0) } else { 0.0 };
    let fade = |c: f64| (255.0 * (1.0 - t.abs()) + c * t.abs()).round() as u8;
    if t >= 0.0 {
        Rgb([fade(178.0), fade(24.0), fade(43.0)])
    } else {
        Rgb([fade(33.0), fade(102.0), fade(172.0)])
    }
}

/// Grid of one column: `values[k][g]` at `kdT_values[k]`, `gamma_values[g]`,
/// NaN where the point failed.
pub fn column_grid(result: &SweepResult, column: &str) -> Result<Vec<Vec<f64>>> {
    let idx = ObservablesRecord::column_index(column)?;
    let ng = result.grid.gamma_values.len();
    let values: Vec<f64> = result.rows.iter().map(|r| r.record().map_or(f64::NAN, |r| r.values()[idx])).collect();
    Ok(values.chunks(ng).map(|c| c.to_vec()).collect())
}

/// Path of the plot-data grid written next to an image.
pub fn grid_data_path(image_path: &Path) -> PathBuf {
    image_path.with_extension("grid.csv")
}

/// Writes the column as a PNG (gamma_D to the right, kdT upwards) and as a
/// plot-data grid beside it.
pub fn emit_heatmap(result: &SweepResult, column: &str, path: &Path) -> Result<HeatmapSummary> {
    let grid = column_grid(result, column)?;
    let finite = grid.iter().flatten().copied().filter(|v| v.is_finite());
    let (min, max) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let scale = if min.is_finite() { min.abs().max(max.abs()) } else { 0.0 };
    let summary = HeatmapSummary { min, max, scale, has_sign_change: min < 0.0 && max > 0.0 };

    let ng = result.grid.gamma_values.len() as u32;
    let nk = result.grid.kdt_values.len() as u32;
    let img = RgbImage::from_fn(ng * CELL, nk * CELL, |x, y| {
        let g = (x / CELL) as usize;
        let k = (nk - 1 - y / CELL) as usize;
        diverging_color(grid[k][g], scale)
    });
    img.save_with_format(path, image::ImageFormat::Png)?;

    let data_path = grid_data_path(path);
    let file = File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec![format!("kdT \\ gamma_D ({column}, a.u.)")];
    header.extend(result.grid.gamma_values.iter().map(|g| fmt(*g)));
    w.write_record(&header).map_err(Error::Csv)?;
    for (k, row) in grid.iter().enumerate() {
        let mut fields = vec![fmt(result.grid.kdt_values[k])];
        fields.extend(row.iter().map(|v| if v.is_finite() { fmt(*v) } else { ERR_MARKER.to_string() }));
        w.write_record(&fields).map_err(Error::Csv)?;
    }
    w.flush().map_err(|e| Error::io(&data_path, e))?;
    Ok(summary)
}
