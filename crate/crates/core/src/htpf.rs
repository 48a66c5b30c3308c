//! Binary field files.
//!
//! Layout (little endian): magic `HTPF`, `u16` version (= 1), `u8` rank
//! (= d + 1), `rank` `u64` sizes (time first), `rank` `f64` periods, then
//! the samples as row-major `f64`. Several records may follow each other in
//! one stream (coefficient matrices are stored that way).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

pub const MAGIC: &[u8; 4] = b"HTPF";
pub const VERSION: u16 = 1;

pub fn write_field<W: Write>(mut w: W, field: &Field) -> Result<()> {
    let g = field.grid();
    let shape = g.shape();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[shape.len() as u8])?;
    for n in &shape {
        w.write_all(&(*n as u64).to_le_bytes())?;
    }
    for l in g.periods() {
        w.write_all(&l.to_le_bytes())?;
    }
    let mut bytes = Vec::with_capacity(8 * field.data().len());
    for v in field.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn read_exact<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated header".into()),
        _ => Error::Io(e),
    })?;
    Ok(buf)
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let magic: [u8; 4] = read_exact(&mut r)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_exact(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [rank] = read_exact::<_, 1>(&mut r)?;
    if !(2..=4).contains(&rank) {
        return Err(Error::Format(format!("unsupported rank {rank}")));
    }
    let rank = rank as usize;
    let mut sizes = Vec::with_capacity(rank);
    for _ in 0..rank {
        let n = u64::from_le_bytes(read_exact(&mut r)?);
        sizes.push(usize::try_from(n).map_err(|_| Error::Format("size overflow".into()))?);
    }
    let mut periods = Vec::with_capacity(rank);
    for _ in 0..rank {
        periods.push(f64::from_le_bytes(read_exact(&mut r)?));
    }
    let grid = Grid::new(rank - 1, sizes[0], &sizes[1..], periods[0], &periods[1..])
        .map_err(|e| Error::Format(e.to_string()))?;
    let mut bytes = vec![0u8; 8 * grid.len()];
    r.read_exact(&mut bytes)
        .map_err(|_| Error::Format("sample count does not match header sizes".into()))?;
    let data = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::from_vec(&grid, data)
}

/// Reads one field and rejects trailing bytes.
pub fn read_single<R: Read>(mut r: R) -> Result<Field> {
    let f = read_field(&mut r)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("sample count does not match header sizes".into()));
    }
    Ok(f)
}

pub fn save(path: &std::path::Path, field: &Field) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_field(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &std::path::Path) -> Result<Field> {
    read_single(std::io::BufReader::new(std::fs::File::open(path)?))
}
