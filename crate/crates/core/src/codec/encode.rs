use crate::error::{Error, Result};
use crate::image::RgbFrame;

use super::{
    check_frame_dims, CodecConfig, EncodedFrame, FrameKind, Macroblock, MbMode, Packet, PacketRange, MB_SIZE,
    MB_VALUES,
};

/// Modeled payload size of one macroblock in bytes.
pub fn macroblock_cost(mb: &Macroblock) -> usize {
    4 + 2 * mb.nonzero_residuals() + if mb.mode == MbMode::Inter { 2 } else { 0 }
}

/// Greedily packs consecutive macroblocks into packets of at most `mtu`
/// bytes, recording the ranges in the frame's packet map.
pub fn packetize(ef: &mut EncodedFrame, mtu: usize) -> Result<Vec<Packet>> {
    if mtu < 64 {
        return Err(Error::Config("mtu must be at least 64 bytes".into()));
    }
    let mut map = Vec::new();
    let mut start = 0;
    let mut bytes = 0;
    for (i, mb) in ef.macroblocks.iter().enumerate() {
        let cost = macroblock_cost(mb);
        if cost > mtu {
            return Err(Error::MacroblockTooLarge { index: i, bytes: cost, mtu });
        }
        if bytes + cost > mtu {
            map.push(PacketRange {
                packet_id: map.len() as u32,
                start,
                end: i,
            });
            start = i;
            bytes = 0;
        }
        bytes += cost;
    }
    if start < ef.macroblocks.len() {
        map.push(PacketRange {
            packet_id: map.len() as u32,
            start,
            end: ef.macroblocks.len(),
        });
    }
    ef.packet_map = map;
    Ok(ef.packets())
}

#[inline]
fn quantize(v: i32, q: i32) -> i32 {
    // Round half toward zero, so requantizing a reconstruction error (at most
    // q/2) yields zero.
    let m = (v.abs() + (q - 1) / 2) / q;
    if v < 0 {
        -m
    } else {
        m
    }
}

/// Closed-loop DPCM inside one macroblock: each sample is predicted from its
/// reconstructed left neighbour, the first column from the one above and the
/// top-left sample from mid-gray.
pub(crate) fn intra_predictor(recon: &[u8; MB_VALUES], x: usize, y: usize, c: usize) -> i32 {
    if x > 0 {
        recon[(y * MB_SIZE + x - 1) * 3 + c] as i32
    } else if y > 0 {
        recon[((y - 1) * MB_SIZE) * 3 + c] as i32
    } else {
        128
    }
}

fn intra_code(src: &RgbFrame, bx: usize, by: usize, q: i32) -> (Vec<i16>, [u8; MB_VALUES]) {
    let mut residual = vec![0i16; MB_VALUES];
    let mut recon = [0u8; MB_VALUES];
    for y in 0..MB_SIZE {
        for x in 0..MB_SIZE {
            let px = src.get(bx * MB_SIZE + x, by * MB_SIZE + y);
            for c in 0..3 {
                let pred = intra_predictor(&recon, x, y, c);
                let r = quantize(px[c] as i32 - pred, q);
                let i = (y * MB_SIZE + x) * 3 + c;
                residual[i] = r as i16;
                recon[i] = (pred + r * q).clamp(0, 255) as u8;
            }
        }
    }
    (residual, recon)
}

/// Sum of absolute differences between the source block at `(x0, y0)` and the
/// reference block at `(rx, ry)`, abandoning once it exceeds `limit`.
fn sad(src: &RgbFrame, reference: &RgbFrame, x0: usize, y0: usize, rx: usize, ry: usize, limit: u32) -> u32 {
    let stride = src.width() * 3;
    let (s, r) = (src.as_raw(), reference.as_raw());
    let mut total = 0u32;
    for row in 0..MB_SIZE {
        let so = (y0 + row) * stride + x0 * 3;
        let ro = (ry + row) * stride + rx * 3;
        total += s[so..so + MB_SIZE * 3]
            .iter()
            .zip(&r[ro..ro + MB_SIZE * 3])
            .map(|(&a, &b)| a.abs_diff(b) as u32)
            .sum::<u32>();
        if total > limit {
            return total;
        }
    }
    total
}

/// True when the zero-motion residual quantizes to all zeros.
fn residual_vanishes(src: &RgbFrame, reference: &RgbFrame, x0: usize, y0: usize, q: i32) -> bool {
    let limit = (q - 1) / 2;
    let stride = src.width() * 3;
    let (s, r) = (src.as_raw(), reference.as_raw());
    (0..MB_SIZE).all(|row| {
        let o = (y0 + row) * stride + x0 * 3;
        s[o..o + MB_SIZE * 3]
            .iter()
            .zip(&r[o..o + MB_SIZE * 3])
            .all(|(&a, &b)| (a.abs_diff(b) as i32) + limit < q)
    })
}

/// Candidate motion vectors ordered so that the first minimum found is the
/// shortest one.
fn search_order(range: i32) -> Vec<(i32, i32)> {
    let mut v: Vec<(i32, i32)> = (-range..=range)
        .flat_map(|dy| (-range..=range).map(move |dx| (dx, dy)))
        .collect();
    v.sort_by_key(|&(dx, dy)| (dx.abs() + dy.abs(), dy, dx));
    v
}

/// Stateful encoder that keeps the reconstructed reference frame.
#[derive(Debug, Clone)]
pub struct Encoder {
    config: CodecConfig,
    width: usize,
    height: usize,
    next_index: usize,
    reference: Option<RgbFrame>,
    order: Vec<(i32, i32)>,
}

impl Encoder {
    pub fn new(config: CodecConfig, width: usize, height: usize) -> Result<Self> {
        config.validate()?;
        check_frame_dims(width, height)?;
        Ok(Self {
            config,
            width,
            height,
            next_index: 0,
            reference: None,
            order: search_order(config.search_range),
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    /// Reconstruction of the most recently encoded frame, as a lossless
    /// decoder would produce it.
    pub fn reconstruction(&self) -> Option<&RgbFrame> {
        self.reference.as_ref()
    }

    pub fn encode_next(&mut self, frame: &RgbFrame) -> Result<EncodedFrame> {
        if frame.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                left: (self.width, self.height),
                right: frame.dims(),
            });
        }
        let index = self.next_index;
        let kind = if index % self.config.gop == 0 { FrameKind::I } else { FrameKind::P };
        let mut recon = RgbFrame::filled(self.width, self.height, [0, 0, 0]);
        let (cols, rows) = (self.width / MB_SIZE, self.height / MB_SIZE);
        let mut macroblocks = Vec::with_capacity(cols * rows);
        for by in 0..rows {
            for bx in 0..cols {
                let mb = match (kind, &self.reference) {
                    (FrameKind::P, Some(reference)) => self.code_inter(frame, reference, bx, by, &mut recon),
                    _ => {
                        let (residual, block) = intra_code(frame, bx, by, self.config.q);
                        write_block(&mut recon, bx, by, &block);
                        Macroblock {
                            bx,
                            by,
                            mode: MbMode::Intra,
                            motion_vector: (0, 0),
                            residual,
                        }
                    }
                };
                macroblocks.push(mb);
            }
        }
        let mut ef = EncodedFrame {
            frame_index: index,
            kind,
            q: self.config.q,
            width: self.width,
            height: self.height,
            macroblocks,
            packet_map: Vec::new(),
        };
        packetize(&mut ef, self.config.mtu)?;
        self.reference = Some(recon);
        self.next_index += 1;
        Ok(ef)
    }

    fn code_inter(&self, src: &RgbFrame, reference: &RgbFrame, bx: usize, by: usize, recon: &mut RgbFrame) -> Macroblock {
        let (x0, y0) = (bx * MB_SIZE, by * MB_SIZE);
        let q = self.config.q;
        let zero_sad = sad(src, reference, x0, y0, x0, y0, u32::MAX);
        if zero_sad <= self.config.skip_threshold || residual_vanishes(src, reference, x0, y0, q) {
            let block = read_block(reference, x0, y0);
            write_block(recon, bx, by, &block);
            return Macroblock {
                bx,
                by,
                mode: MbMode::Skip,
                motion_vector: (0, 0),
                residual: Vec::new(),
            };
        }
        let mut best = ((0, 0), zero_sad);
        for &(dx, dy) in &self.order[1..] {
            let (rx, ry) = (x0 as i32 - dx, y0 as i32 - dy);
            if rx < 0 || ry < 0 || rx as usize + MB_SIZE > self.width || ry as usize + MB_SIZE > self.height {
                continue;
            }
            let s = sad(src, reference, x0, y0, rx as usize, ry as usize, best.1);
            if s < best.1 {
                best = ((dx, dy), s);
            }
        }
        let (dx, dy) = best.0;
        let pred = read_block(reference, (x0 as i32 - dx) as usize, (y0 as i32 - dy) as usize);
        let source = read_block(src, x0, y0);
        let mut residual = vec![0i16; MB_VALUES];
        let mut block = [0u8; MB_VALUES];
        for i in 0..MB_VALUES {
            let r = quantize(source[i] as i32 - pred[i] as i32, q);
            residual[i] = r as i16;
            block[i] = (pred[i] as i32 + r * q).clamp(0, 255) as u8;
        }
        let inter = Macroblock {
            bx,
            by,
            mode: MbMode::Inter,
            motion_vector: (dx, dy),
            residual,
        };
        let (intra_residual, intra_block) = intra_code(src, bx, by, q);
        let intra = Macroblock {
            bx,
            by,
            mode: MbMode::Intra,
            motion_vector: (0, 0),
            residual: intra_residual,
        };
        if macroblock_cost(&intra) < macroblock_cost(&inter) {
            write_block(recon, bx, by, &intra_block);
            intra
        } else {
            write_block(recon, bx, by, &block);
            inter
        }
    }
}

pub(crate) fn read_block(frame: &RgbFrame, x0: usize, y0: usize) -> [u8; MB_VALUES] {
    let stride = frame.width() * 3;
    let raw = frame.as_raw();
    let mut out = [0u8; MB_VALUES];
    for row in 0..MB_SIZE {
        let o = (y0 + row) * stride + x0 * 3;
        out[row * MB_SIZE * 3..(row + 1) * MB_SIZE * 3].copy_from_slice(&raw[o..o + MB_SIZE * 3]);
    }
    out
}

pub(crate) fn write_block(frame: &mut RgbFrame, bx: usize, by: usize, block: &[u8; MB_VALUES]) {
    let stride = frame.width() * 3;
    let raw = frame.as_raw_mut();
    for row in 0..MB_SIZE {
        let o = (by * MB_SIZE + row) * stride + bx * MB_SIZE * 3;
        raw[o..o + MB_SIZE * 3].copy_from_slice(&block[row * MB_SIZE * 3..(row + 1) * MB_SIZE * 3]);
    }
}

/// Encodes a whole sequence, returning the coded frames and the encoder's
/// reconstructions.
pub fn encode(frames: &[RgbFrame], config: &CodecConfig) -> Result<(Vec<EncodedFrame>, Vec<RgbFrame>)> {
    let Some(first) = frames.first() else {
        return Ok((Vec::new(), Vec::new()));
    };
    let mut enc = Encoder::new(*config, first.width(), first.height())?;
    let mut coded = Vec::with_capacity(frames.len());
    let mut recons = Vec::with_capacity(frames.len());
    for f in frames {
        coded.push(enc.encode_next(f)?);
        recons.push(enc.reconstruction().expect("just encoded").clone());
    }
    Ok((coded, recons))
}
