//! Little-endian raw ensemble format.
//!
//! ```text
//! magic      4 bytes  "CCEN"
//! version    u32      1
//! X Y Z E V  5 × u32
//! V × { name_len u16, name utf-8, units_len u16, units utf-8,
//!       has_sentinel u8, sentinel f32 }
//! values     f32 × (V·E·Z·Y·X) in (variable, member, z, y, x) order
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Dims, EnsembleError, EnsembleGrid, VariableMeta};

pub const FORMAT_MAGIC: [u8; 4] = *b"CCEN";
pub const FORMAT_VERSION: u32 = 1;

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<EnsembleGrid, EnsembleError> {
    let file = File::open(path)?;
    read_ensemble(BufReader::new(file))
}

pub fn save_ensemble(grid: &EnsembleGrid, path: impl AsRef<Path>) -> Result<(), EnsembleError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_ensemble(grid, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_ensemble<W: Write>(grid: &EnsembleGrid, w: &mut W) -> Result<(), EnsembleError> {
    w.write_all(&FORMAT_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let d = grid.dims();
    for v in [d.x, d.y, d.z, grid.members(), grid.variables().len()] {
        w.write_all(&(v as u32).to_le_bytes())?;
    }
    for meta in grid.variables() {
        write_str(w, &meta.name)?;
        write_str(w, &meta.units)?;
        w.write_all(&[meta.missing_sentinel.is_some() as u8])?;
        w.write_all(&meta.missing_sentinel.unwrap_or(0.0).to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(1 << 16);
    for chunk in grid.values().chunks(1 << 14) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<(), EnsembleError> {
    let len = u16::try_from(s.len()).map_err(|_| EnsembleError::InvalidGrid(format!("name too long: {s}")))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn exact(&mut self, buf: &mut [u8], what: &str) -> Result<(), EnsembleError> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                EnsembleError::MalformedHeader(format!("truncated while reading {what} at byte {}", self.offset))
            } else {
                EnsembleError::Io(e)
            }
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u32(&mut self, what: &str) -> Result<u32, EnsembleError> {
        let mut b = [0u8; 4];
        self.exact(&mut b, what)?;
        Ok(u32::from_le_bytes(b))
    }

    fn string(&mut self, what: &str) -> Result<String, EnsembleError> {
        let mut b = [0u8; 2];
        self.exact(&mut b, what)?;
        let mut s = vec![0u8; u16::from_le_bytes(b) as usize];
        self.exact(&mut s, what)?;
        String::from_utf8(s).map_err(|_| EnsembleError::MalformedHeader(format!("{what} is not valid utf-8")))
    }
}

pub fn read_ensemble<R: Read>(reader: R) -> Result<EnsembleGrid, EnsembleError> {
    let mut c = Cursor { inner: reader, offset: 0 };
    let mut magic = [0u8; 4];
    c.exact(&mut magic, "magic")?;
    if magic != FORMAT_MAGIC {
        return Err(EnsembleError::MalformedHeader(format!("bad magic {magic:?}")));
    }
    let version = c.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(EnsembleError::MalformedHeader(format!("unsupported version {version}")));
    }
    let x = c.u32("X")? as usize;
    let y = c.u32("Y")? as usize;
    let z = c.u32("Z")? as usize;
    let e = c.u32("E")? as usize;
    let nv = c.u32("V")? as usize;
    if x == 0 || y == 0 || z == 0 || nv == 0 {
        return Err(EnsembleError::MalformedHeader(format!("zero extent in header: X={x} Y={y} Z={z} V={nv}")));
    }
    if e < 2 {
        return Err(EnsembleError::MalformedHeader(format!("member count {e} < 2")));
    }
    let mut variables = Vec::with_capacity(nv);
    for i in 0..nv {
        let name = c.string(&format!("variable {i} name"))?;
        let units = c.string(&format!("variable {i} units"))?;
        let mut flag = [0u8; 1];
        c.exact(&mut flag, "sentinel flag")?;
        let mut s = [0u8; 4];
        c.exact(&mut s, "sentinel")?;
        let sentinel = f32::from_le_bytes(s);
        variables.push(VariableMeta {
            name,
            units,
            value_range: (0.0, 0.0),
            missing_sentinel: (flag[0] != 0).then_some(sentinel),
        });
    }
    let expected = (x as u64) * (y as u64) * (z as u64) * (e as u64) * (nv as u64);
    let header_len = c.offset;
    let mut payload = Vec::new();
    c.inner.read_to_end(&mut payload)?;
    if payload.len() as u64 != expected * 4 {
        return Err(EnsembleError::SizeMismatch { expected, actual: payload.len() as u64 / 4 });
    }
    let values: Vec<f32> =
        payload.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    EnsembleGrid::new(Dims::new(x, y, z), e, variables, values).map_err(|err| match err {
        EnsembleError::NonFinite { offset, variable, member, voxel, value } => EnsembleError::NonFinite {
            offset: offset + header_len,
            variable,
            member,
            voxel,
            value,
        },
        other => other,
    })
}
