//! Field file formats.
//!
//! Binary layout (all little-endian): `dim: u64`, `points_per_axis: u64`,
//! `side_length: f64`, then `points_per_axis^dim` values as `f64` in row-major
//! order. CSV layout: one index column per axis (`i0`, `i1`, ...) then `value`.

use std::io::{BufRead, Read, Write};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub fn write_field_binary<W: Write>(f: &Field, mut out: W) -> Result<()> {
    let g = f.grid();
    out.write_all(&(g.dim() as u64).to_le_bytes())?;
    out.write_all(&(g.points_per_axis() as u64).to_le_bytes())?;
    out.write_all(&g.side_length().to_le_bytes())?;
    for v in f.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_binary<R: Read>(mut input: R) -> Result<Field> {
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input
            .read_exact(&mut word)
            .map_err(|e| Error::Format(format!("truncated input: {e}")))?;
        Ok(word)
    };
    let dim = u64::from_le_bytes(next(&mut input)?) as usize;
    let n = u64::from_le_bytes(next(&mut input)?) as usize;
    let side = f64::from_le_bytes(next(&mut input)?);
    let grid = Grid::new(dim, n, side)?;
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        values.push(f64::from_le_bytes(next(&mut input)?));
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes", rest.len())));
    }
    Field::new(&grid, values)
}

pub fn write_field_csv<W: Write>(f: &Field, mut out: W) -> Result<()> {
    let g = f.grid();
    let header: Vec<String> = (0..g.dim()).map(|a| format!("i{a}")).collect();
    writeln!(out, "{},value", header.join(","))?;
    for (flat, v) in f.values().iter().enumerate() {
        let idx = g.multi_index(flat);
        for i in &idx[..g.dim()] {
            write!(out, "{i},")?;
        }
        writeln!(out, "{v}")?;
    }
    Ok(())
}

/// Reads the CSV layout back onto a known grid.
pub fn read_field_csv<R: BufRead>(grid: &Grid, input: R) -> Result<Field> {
    let mut values = vec![f64::NAN; grid.len()];
    let mut lines = input.lines();
    lines
        .next()
        .ok_or_else(|| Error::Format("missing header".into()))??;
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != grid.dim() + 1 {
            return Err(Error::Format(format!("bad row `{line}`")));
        }
        let mut idx = [0usize; 3];
        for a in 0..grid.dim() {
            idx[a] = cols[a]
                .parse()
                .map_err(|_| Error::Format(format!("bad index in `{line}`")))?;
            if idx[a] >= grid.points_per_axis() {
                return Err(Error::Format(format!("index out of range in `{line}`")));
            }
        }
        let v: f64 = cols[grid.dim()]
            .parse()
            .map_err(|_| Error::Format(format!("bad value in `{line}`")))?;
        values[grid.flat_index(&idx[..grid.dim()])] = v;
        seen += 1;
    }
    if seen != grid.len() {
        return Err(Error::SizeMismatch {
            expected: grid.len(),
            actual: seen,
        });
    }
    Field::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_header_layout() {
        let g = Grid::new(2, 4, 3.5).unwrap();
        let f = Field::from_fn(&g, |x| x[0] - 2.0 * x[1]);
        let mut buf = Vec::new();
        write_field_binary(&f, &mut buf).unwrap();
        assert_eq!(buf.len(), 24 + 16 * 8);
        assert_eq!(&buf[0..8], &2u64.to_le_bytes());
        assert_eq!(&buf[8..16], &4u64.to_le_bytes());
        assert_eq!(&buf[16..24], &3.5f64.to_le_bytes());
        assert_eq!(&buf[24 + 8 * 5..24 + 8 * 6], &f.values()[5].to_le_bytes());
        let back = read_field_binary(&buf[..]).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn binary_rejects_truncation_and_garbage() {
        let g = Grid::periodic(1, 8).unwrap();
        let mut buf = Vec::new();
        write_field_binary(&Field::constant(&g, 1.0), &mut buf).unwrap();
        assert!(read_field_binary(&buf[..buf.len() - 1]).is_err());
        buf.push(0);
        assert!(read_field_binary(&buf[..]).is_err());
    }

    #[test]
    fn csv_layout() {
        let g = Grid::periodic(2, 2).unwrap();
        let f = Field::new(&g, vec![1.0, 2.0, 3.0, 4.5]).unwrap();
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "i0,i1,value\n0,0,1\n0,1,2\n1,0,3\n1,1,4.5\n");
        assert_eq!(read_field_csv(&g, &buf[..]).unwrap(), f);
    }
}
