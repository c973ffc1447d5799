//! Field serialization. Both layouts carry the header `(n_x, n_y, n_t)` followed
//! by the values in x-major, y-middle, t-minor order.
//!
//! Binary: three little-endian `u64` sizes, then little-endian `f64` values.
//! CSV: a `n_x,n_y,n_t` header row, the sizes row, then one value per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Grid3, GridError, ScalarField3};

pub fn write_field_binary(f: &ScalarField3, path: &Path) -> Result<(), GridError> {
    let mut w = BufWriter::new(File::create(path)?);
    for d in f.grid().dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for v in f.values() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_binary(path: &Path) -> Result<ScalarField3, GridError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 24 {
        return Err(GridError::Format("truncated header".into()));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().unwrap());
    let grid = Grid3::new(word(0) as usize, word(1) as usize, word(2) as usize)?;
    let body = &bytes[24..];
    if body.len() != 8 * grid.len() {
        return Err(GridError::Format(format!(
            "expected {} values, found {} bytes",
            grid.len(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ScalarField3::new(grid, values)
}

pub fn write_field_csv(f: &ScalarField3, path: &Path) -> Result<(), GridError> {
    let mut w = BufWriter::new(File::create(path)?);
    let [nx, ny, nt] = f.grid().dims();
    writeln!(w, "n_x,n_y,n_t")?;
    writeln!(w, "{nx},{ny},{nt}")?;
    for v in f.values() {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field_csv(path: &Path) -> Result<ScalarField3, GridError> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = reader.lines();
    let bad = |m: &str| GridError::Format(m.to_string());
    let header = lines.next().ok_or_else(|| bad("empty file"))??;
    if header.trim() != "n_x,n_y,n_t" {
        return Err(bad("missing n_x,n_y,n_t header"));
    }
    let sizes = lines.next().ok_or_else(|| bad("missing sizes row"))??;
    let dims: Vec<usize> = sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad(&format!("sizes row: {e}")))?;
    if dims.len() != 3 {
        return Err(bad("sizes row needs three entries"));
    }
    let grid = Grid3::new(dims[0], dims[1], dims[2])?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        values.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| bad(&format!("value {}: {e}", values.len())))?,
        );
    }
    ScalarField3::new(grid, values)
}

/// Reads CSV when the extension is `.csv`, the binary layout otherwise.
pub fn read_field(path: &Path) -> Result<ScalarField3, GridError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_field_csv(path),
        _ => read_field_binary(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn both_layouts_round_trip_exactly(seed in any::<u64>()) {
            let g = Grid3::new(8, 8, 10).unwrap();
            let f = ScalarField3::from_fn(g, |x, y, t| ((seed % 1000) as f64 * 1e-3 + x * 7.1 - y * 3.3 + t).sin() / 3.0);
            let dir = tempfile::tempdir().unwrap();
            let bin = dir.path().join("f.bin");
            let csv = dir.path().join("f.csv");
            write_field_binary(&f, &bin).unwrap();
            write_field_csv(&f, &csv).unwrap();
            prop_assert_eq!(read_field(&bin).unwrap(), f.clone());
            prop_assert_eq!(read_field(&csv).unwrap(), f);
        }
    }

    #[test]
    fn binary_layout_is_x_major() {
        let g = Grid3::cube(8).unwrap();
        let f = ScalarField3::from_fn(g, |x, y, t| 100.0 * x + 10.0 * y + t);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_field_binary(&f, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(u64::from_le_bytes(bytes[0..8].try_into().unwrap()), 8);
        let second = f64::from_le_bytes(bytes[32..40].try_into().unwrap());
        assert_eq!(second, 1.0 / 8.0); // t advances fastest
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        std::fs::write(&p, [0u8; 10]).unwrap();
        assert!(matches!(read_field_binary(&p), Err(GridError::Format(_))));
    }
}
