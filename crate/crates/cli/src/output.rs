use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use mfg_crowd::fields::total_mass;
use mfg_crowd::{ConvergenceRecord, DensityField, Grid};

/// One frame file: a `# t=... mass=...` comment, then `n2` rows of `n1`
/// values, row `j = 0` first. Values use the shortest exact decimal form.
pub fn density_csv(slice: &DensityField, grid: &Grid, time: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# t={time} mass={}", total_mass(slice, grid));
    for row in slice.values.chunks(slice.n1) {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_density_csv(slice: &DensityField, grid: &Grid, time: f64, path: &Path) -> io::Result<()> {
    fs::write(path, density_csv(slice, grid, time))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityFrame {
    pub time: f64,
    pub mass: f64,
    pub n1: usize,
    pub n2: usize,
    pub values: Vec<f64>,
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

pub fn read_density_csv(path: &Path) -> io::Result<DensityFrame> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut lines = reader.lines();
    let header = lines.next().ok_or_else(|| bad("empty frame file"))??;
    let mut time = None;
    let mut mass = None;
    for field in header.trim_start_matches('#').split_whitespace() {
        match field.split_once('=') {
            Some(("t", v)) => time = v.parse().ok(),
            Some(("mass", v)) => mass = v.parse().ok(),
            _ => {}
        }
    }
    let (time, mass) = time.zip(mass).ok_or_else(|| bad(format!("malformed header `{header}`")))?;

    let mut values = Vec::new();
    let mut n1 = None;
    let mut n2 = 0;
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| bad(format!("row {n2}: {e}"))))
            .collect::<io::Result<_>>()?;
        match n1 {
            None => n1 = Some(row.len()),
            Some(n) if n != row.len() => return Err(bad(format!("row {n2} has {} values, expected {n}", row.len()))),
            _ => {}
        }
        values.extend(row);
        n2 += 1;
    }
    Ok(DensityFrame {
        time,
        mass,
        n1: n1.unwrap_or(0),
        n2,
        values,
    })
}

/// Binary 8-bit PGM. Image rows run top to bottom, so row `j = n2 - 1` comes first.
pub fn pgm_bytes(slice: &DensityField, scale: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", slice.n1, slice.n2).into_bytes();
    for row in slice.values.chunks(slice.n1).rev() {
        out.extend(row.iter().map(|&v| (255.0 * (v / scale).clamp(0.0, 1.0)).round() as u8));
    }
    out
}

pub fn write_pgm(slice: &DensityField, path: &Path, scale: f64) -> io::Result<()> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, format!("pgm scale must be > 0, got {scale}")));
    }
    fs::write(path, pgm_bytes(slice, scale))
}

pub fn write_convergence_log(records: &[ConvergenceRecord], path: &Path) -> io::Result<()> {
    let mut f = io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "outer_step,k,E_k,verdict")?;
    for r in records {
        for (k, e) in r.iterates.iter().enumerate() {
            writeln!(f, "{},{},{e:e},{}", r.outer_step, k + 1, r.verdict)?;
        }
    }
    f.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_frame() {
        let g = Grid::new([1.0, 1.0], 1, 1, 1.0, 1).unwrap();
        let d = DensityField::from_values(&g, vec![3.5]).unwrap();
        let text = density_csv(&d, &g, 0.0);
        assert_eq!(text.lines().nth(1), Some("3.5"));
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn pgm_rows_and_clamping() {
        let g = Grid::new([1.0, 1.0], 2, 2, 1.0, 1).unwrap();
        let d = DensityField::from_values(&g, vec![0.0, 1.0, 2.0, 0.5]).unwrap();
        let bytes = pgm_bytes(&d, 1.0);
        let pixels = &bytes[bytes.len() - 4..];
        assert_eq!(pixels, &[255, 128, 0, 255]);
    }
}
