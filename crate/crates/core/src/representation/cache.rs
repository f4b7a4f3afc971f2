//! Binary pyramid cache.
//!
//! All integers are little-endian.
//!
//! ```text
//! file    := magic "SQPC" | version u16 | count u32 | record*count
//! record  := id_len u32 | id (UTF-8) | point_count u64 | kind u8
//!            | level_count u32 | resolution u32 * level_count
//!            | level values, row-major, r*r 32-bit values per level
//! ```
//!
//! Counts levels store `u32`, density levels store `f32`.

use super::{HeatmapKind, HeatmapLevel, HeatmapPyramid};
use crate::error::{Error, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"SQPC";
pub const CACHE_VERSION: u16 = 1;

pub fn encode_pyramids(pyramids: &[HeatmapPyramid]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&len_u32(pyramids.len())?.to_le_bytes());
    for p in pyramids {
        out.extend_from_slice(&len_u32(p.spec_id.len())?.to_le_bytes());
        out.extend_from_slice(p.spec_id.as_bytes());
        out.extend_from_slice(&(p.point_count as u64).to_le_bytes());
        out.push(match p.kind {
            HeatmapKind::Counts => 0,
            HeatmapKind::Density => 1,
        });
        out.extend_from_slice(&len_u32(p.levels.len())?.to_le_bytes());
        for l in &p.levels {
            out.extend_from_slice(&len_u32(l.resolution())?.to_le_bytes());
        }
        for l in &p.levels {
            for &c in l.cells() {
                let word = match p.kind {
                    HeatmapKind::Counts => {
                        if c > u32::MAX as f64 || c.fract() != 0.0 {
                            return Err(Error::CacheFormat(format!(
                                "count {c} does not fit a u32"
                            )));
                        }
                        (c as u32).to_le_bytes()
                    }
                    HeatmapKind::Density => (c as f32).to_le_bytes(),
                };
                out.extend_from_slice(&word);
            }
        }
    }
    Ok(out)
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::CacheFormat(format!("length {n} exceeds u32")))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.buf.len())
            .ok_or_else(|| Error::CacheFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
}

pub fn decode_pyramids(bytes: &[u8]) -> Result<Vec<HeatmapPyramid>> {
    let mut rd = Reader { buf: bytes, pos: 0 };
    if rd.take(4)? != CACHE_MAGIC {
        return Err(Error::CacheFormat("bad magic".into()));
    }
    let version = u16::from_le_bytes(rd.array()?);
    if version != CACHE_VERSION {
        return Err(Error::CacheFormat(format!("unsupported version {version}")));
    }
    let count = rd.u32()? as usize;
    let mut pyramids = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let id_len = rd.u32()? as usize;
        let spec_id = std::str::from_utf8(rd.take(id_len)?)
            .map_err(|e| Error::CacheFormat(e.to_string()))?
            .to_string();
        let point_count = u64::from_le_bytes(rd.array()?) as usize;
        let kind = match rd.array::<1>()?[0] {
            0 => HeatmapKind::Counts,
            1 => HeatmapKind::Density,
            k => return Err(Error::CacheFormat(format!("unknown kind {k}"))),
        };
        let level_count = rd.u32()? as usize;
        let resolutions = (0..level_count)
            .map(|_| rd.u32().map(|r| r as usize))
            .collect::<Result<Vec<_>>>()?;
        let mut levels = Vec::with_capacity(level_count);
        for r in resolutions {
            let n = r
                .checked_mul(r)
                .ok_or_else(|| Error::CacheFormat(format!("resolution {r} overflows")))?;
            let raw = rd.take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::CacheFormat(format!("resolution {r} overflows")))?,
            )?;
            let cells = raw
                .chunks_exact(4)
                .map(|w| {
                    let w: [u8; 4] = w.try_into().expect("chunk of 4");
                    match kind {
                        HeatmapKind::Counts => u32::from_le_bytes(w) as f64,
                        HeatmapKind::Density => f32::from_le_bytes(w) as f64,
                    }
                })
                .collect();
            levels.push(
                HeatmapLevel::from_cells(r, kind, cells)
                    .map_err(|e| Error::CacheFormat(e.to_string()))?,
            );
        }
        pyramids.push(
            HeatmapPyramid::new(spec_id, point_count, kind, levels)
                .map_err(|e| Error::CacheFormat(e.to_string()))?,
        );
    }
    if rd.pos != bytes.len() {
        return Err(Error::CacheFormat("trailing bytes".into()));
    }
    Ok(pyramids)
}
