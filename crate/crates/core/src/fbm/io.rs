//! Path serialization.
//!
//! CSV: header `t,x1,...,xm`, one row per grid point.
//!
//! Binary (`FBMP`): 4 magic bytes, a little-endian `u16` version, then a
//! little-endian `f64` payload
//! `[t_max, n_steps, m, hurst, generator, seed_hi32, seed_lo32, values...]`
//! with `values` in row-major order. The seed is split into two 32-bit
//! halves so both fit exactly in an `f64`.

use std::io::{BufRead, BufReader, Read, Write};

use ndarray::Array2;

use super::{FbmPath, Generator, HurstParam, TimeGrid};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FBMP";
pub const VERSION: u16 = 1;

fn bad(msg: impl Into<String>) -> Error {
    Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, msg.into()))
}

/// Write grid times and an `(n+1) × m` value table as CSV.
pub fn write_csv<W: Write>(grid: &TimeGrid, values: &Array2<f64>, out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    let m = values.ncols();
    let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=m).map(|j| format!("x{j}"))).collect();
    writeln!(out, "{}", header.join(","))?;
    for (i, t) in grid.points().iter().enumerate() {
        write!(out, "{t:e}")?;
        for j in 0..m {
            write!(out, ",{:e}", values[(i, j)])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Read a CSV written by [`write_csv`]; returns the time column and values.
/// Lines starting with `#` are comments.
pub fn read_csv<R: Read>(input: R) -> Result<(Vec<f64>, Array2<f64>)> {
    let mut lines = BufReader::new(input).lines().filter(|l| !matches!(l, Ok(s) if s.starts_with('#')));
    let header = lines.next().ok_or_else(|| bad("empty CSV"))??;
    let m = header.split(',').count() - 1;
    let mut times = Vec::new();
    let mut flat = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>().map_err(|e| bad(format!("bad number {f:?}: {e}"))))
            .collect::<Result<_>>()?;
        if fields.len() != m + 1 {
            return Err(bad(format!("row has {} fields, header has {}", fields.len(), m + 1)));
        }
        times.push(fields[0]);
        flat.extend_from_slice(&fields[1..]);
    }
    let values = Array2::from_shape_vec((times.len(), m), flat).map_err(|e| bad(e.to_string()))?;
    Ok((times, values))
}

pub fn write_binary<W: Write>(path: &FbmPath, out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let head = [
        path.grid.t_max(),
        path.grid.n_steps() as f64,
        path.dim() as f64,
        path.hurst.value(),
        path.generator.code() as f64,
        (path.seed >> 32) as f64,
        (path.seed & 0xFFFF_FFFF) as f64,
    ];
    for x in head.iter().chain(path.values.iter()) {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_binary<R: Read>(mut input: R) -> Result<FbmPath> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("missing FBMP magic"));
    }
    let mut ver = [0u8; 2];
    input.read_exact(&mut ver)?;
    let version = u16::from_le_bytes(ver);
    if version != VERSION {
        return Err(bad(format!("unsupported FBMP version {version}")));
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if rest.len() % 8 != 0 || rest.len() < 7 * 8 {
        return Err(bad("truncated FBMP payload"));
    }
    let nums: Vec<f64> = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let (n, m) = (nums[1] as usize, nums[2] as usize);
    if nums.len() != 7 + (n + 1) * m {
        return Err(bad("FBMP payload length does not match its header"));
    }
    let grid = TimeGrid::new(nums[0], n)?;
    let hurst = HurstParam::new(nums[3])?;
    let generator = Generator::from_code(nums[4] as u8).ok_or_else(|| bad("unknown generator code"))?;
    let seed = ((nums[5] as u64) << 32) | nums[6] as u64;
    let values = Array2::from_shape_vec((n + 1, m), nums[7..].to_vec()).map_err(|e| bad(e.to_string()))?;
    Ok(FbmPath { grid, values, hurst, generator, seed, path_index: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::sample_fbm_circulant;

    fn path() -> FbmPath {
        let grid = TimeGrid::new(0.5, 20).unwrap();
        sample_fbm_circulant(&grid, HurstParam::new(0.7).unwrap(), 3, u64::MAX - 5).unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let p = path();
        let mut buf = Vec::new();
        write_binary(&p, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"FBMP");
        assert_eq!(buf.len(), 6 + 8 * (7 + 21 * 3));
        let q = read_binary(&buf[..]).unwrap();
        assert_eq!(q.values, p.values);
        assert_eq!(q.seed, p.seed);
        assert_eq!(q.generator, p.generator);
        assert!(q.grid.same_as(&p.grid));
    }

    #[test]
    fn binary_rejects_garbage() {
        assert!(read_binary(&b"FBMQ\x01\x00"[..]).is_err());
        let mut buf = Vec::new();
        write_binary(&path(), &mut buf).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(read_binary(&buf[..]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = path();
        let mut buf = Vec::new();
        write_csv(&p.grid, &p.values, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,x1,x2,x3\n"));
        let (t, v) = read_csv(&buf[..]).unwrap();
        assert_eq!(t, p.grid.points());
        assert_eq!(v, p.values);
    }

    #[test]
    fn csv_comment_lines_are_skipped() {
        let p = path();
        let mut buf = b"# config_hash=abc seed=3\n".to_vec();
        write_csv(&p.grid, &p.values, &mut buf).unwrap();
        let (_, v) = read_csv(&buf[..]).unwrap();
        assert_eq!(v, p.values);
    }
}
