//! Little-endian container: a stream header followed by frame records until
//! end of file.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

use super::{EncodedFrame, FrameKind, Macroblock, MbMode, PacketRange, MB_VALUES};

const MAGIC: &[u8; 4] = b"SCV1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub width: usize,
    pub height: usize,
    pub gop: usize,
    pub q: i32,
}

fn put_u32(w: &mut impl Write, v: usize) -> io::Result<()> {
    w.write_all(&(v as u32).to_le_bytes())
}

pub fn write_stream(mut w: impl Write, header: &StreamHeader, frames: &[EncodedFrame]) -> Result<()> {
    w.write_all(MAGIC)?;
    for v in [header.width, header.height, header.gop, header.q as usize] {
        put_u32(&mut w, v)?;
    }
    let mut buf = Vec::new();
    for ef in frames {
        buf.clear();
        buf.push(match ef.kind {
            FrameKind::I => 0u8,
            FrameKind::P => 1u8,
        });
        buf.extend_from_slice(&(ef.frame_index as u32).to_le_bytes());
        buf.extend_from_slice(&(ef.macroblocks.len() as u32).to_le_bytes());
        for mb in &ef.macroblocks {
            buf.extend_from_slice(&(mb.bx as u16).to_le_bytes());
            buf.extend_from_slice(&(mb.by as u16).to_le_bytes());
            buf.push(match mb.mode {
                MbMode::Intra => 0,
                MbMode::Inter => 1,
                MbMode::Skip => 2,
            });
            buf.push(mb.motion_vector.0 as i8 as u8);
            buf.push(mb.motion_vector.1 as i8 as u8);
            if mb.mode != MbMode::Skip {
                for r in &mb.residual {
                    buf.extend_from_slice(&r.to_le_bytes());
                }
            }
        }
        buf.extend_from_slice(&(ef.packet_map.len() as u32).to_le_bytes());
        for p in &ef.packet_map {
            for v in [p.packet_id as usize, p.start, p.end] {
                buf.extend_from_slice(&(v as u32).to_le_bytes());
            }
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.data.len() {
            return Err(Error::format("bitstream", format!("truncated at byte {}", self.pos)));
        }
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }
}

pub fn read_stream(mut r: impl Read) -> Result<(StreamHeader, Vec<EncodedFrame>)> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    let mut c = Cursor { data: &data, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::format("bitstream", "missing SCV1 magic"));
    }
    let header = StreamHeader {
        width: c.u32()?,
        height: c.u32()?,
        gop: c.u32()?,
        q: c.u32()? as i32,
    };
    let mut frames = Vec::new();
    while c.pos < data.len() {
        let kind = match c.u8()? {
            0 => FrameKind::I,
            1 => FrameKind::P,
            k => return Err(Error::format("bitstream", format!("unknown frame kind {k}"))),
        };
        let frame_index = c.u32()?;
        let count = c.u32()?;
        let mut macroblocks = Vec::with_capacity(count);
        for _ in 0..count {
            let bx = c.u16()? as usize;
            let by = c.u16()? as usize;
            let mode = match c.u8()? {
                0 => MbMode::Intra,
                1 => MbMode::Inter,
                2 => MbMode::Skip,
                m => return Err(Error::format("bitstream", format!("unknown macroblock mode {m}"))),
            };
            let dx = c.u8()? as i8 as i32;
            let dy = c.u8()? as i8 as i32;
            let residual = if mode == MbMode::Skip {
                Vec::new()
            } else {
                c.take(MB_VALUES * 2)?
                    .chunks_exact(2)
                    .map(|b| i16::from_le_bytes([b[0], b[1]]))
                    .collect()
            };
            macroblocks.push(Macroblock {
                bx,
                by,
                mode,
                motion_vector: (dx, dy),
                residual,
            });
        }
        let packets = c.u32()?;
        let mut packet_map = Vec::with_capacity(packets);
        for _ in 0..packets {
            packet_map.push(PacketRange {
                packet_id: c.u32()? as u32,
                start: c.u32()?,
                end: c.u32()?,
            });
        }
        frames.push(EncodedFrame {
            frame_index,
            kind,
            q: header.q,
            width: header.width,
            height: header.height,
            macroblocks,
            packet_map,
        });
    }
    Ok((header, frames))
}
