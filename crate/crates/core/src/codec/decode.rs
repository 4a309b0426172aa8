use crate::error::{Error, Result};
use crate::image::{RgbFrame, GRAY};

use super::encode::{intra_predictor, read_block, write_block};
use super::{
    check_frame_dims, CorruptionMask, EncodedFrame, FrameKind, MaskCache, MbMode, Packet, MB_SIZE,
    MB_VALUES, SUB_SIZE,
};

/// Whether the 16x16 region at `(rx, ry)` of the reference frame touches a
/// CORRUPT sub-block.
pub fn reference_region_corrupt(mask: &CorruptionMask, rx: usize, ry: usize) -> bool {
    let (cx0, cx1) = (rx / SUB_SIZE, (rx + MB_SIZE - 1) / SUB_SIZE);
    let (cy0, cy1) = (ry / SUB_SIZE, (ry + MB_SIZE - 1) / SUB_SIZE);
    (cy0..=cy1).any(|cy| (cx0..=cx1).any(|cx| mask.is_corrupt(cx, cy)))
}

/// Decodes one frame given which of its packets arrived.
///
/// A macroblock is CORRUPT when its packet is missing, or when it predicts
/// from a reference region that overlaps a CORRUPT sub-block. CORRUPT
/// macroblocks are filled with the co-located reference pixels (mid-gray
/// without a reference). Packets not listed in `packets` count as lost.
pub fn decode_with_mask(
    ef: &EncodedFrame,
    packets: &[Packet],
    reference: Option<(&RgbFrame, &CorruptionMask)>,
    cache: &mut MaskCache,
) -> Result<(RgbFrame, CorruptionMask)> {
    check_frame_dims(ef.width, ef.height)?;
    if ef.kind == FrameKind::P && reference.is_none() {
        return Err(Error::MissingReference(ef.frame_index));
    }
    if let Some((frame, mask)) = reference {
        if frame.dims() != (ef.width, ef.height) {
            return Err(Error::DimensionMismatch {
                left: (ef.width, ef.height),
                right: frame.dims(),
            });
        }
        if (mask.width, mask.height) != (ef.width / SUB_SIZE, ef.height / SUB_SIZE) {
            return Err(Error::DimensionMismatch {
                left: (ef.width / SUB_SIZE, ef.height / SUB_SIZE),
                right: (mask.width, mask.height),
            });
        }
    }

    let mut received = vec![false; ef.macroblocks.len()];
    for range in &ef.packet_map {
        let arrived = packets.iter().any(|p| p.packet_id == range.packet_id && !p.lost);
        if arrived {
            received[range.start..range.end].fill(true);
        }
    }

    let q = ef.q.max(1);
    let mut out = RgbFrame::filled(ef.width, ef.height, GRAY);
    let mut mask = CorruptionMask::all_valid(ef.width, ef.height, ef.frame_index);
    for (i, mb) in ef.macroblocks.iter().enumerate() {
        let (x0, y0) = (mb.bx * MB_SIZE, mb.by * MB_SIZE);
        let (rx, ry) = (x0 as i32 - mb.motion_vector.0, y0 as i32 - mb.motion_vector.1);
        let broken = !received[i]
            || match (mb.mode, reference) {
                (MbMode::Intra, _) => false,
                (_, None) => true,
                (_, Some((_, ref_mask))) => reference_region_corrupt(ref_mask, rx as usize, ry as usize),
            };
        if broken {
            mask.mark_macroblock(mb.bx, mb.by);
            if let Some((ref_frame, _)) = reference {
                write_block(&mut out, mb.bx, mb.by, &read_block(ref_frame, x0, y0));
            }
            continue;
        }
        let block = match mb.mode {
            MbMode::Intra => {
                let mut block = [0u8; MB_VALUES];
                for y in 0..MB_SIZE {
                    for x in 0..MB_SIZE {
                        for c in 0..3 {
                            let i = (y * MB_SIZE + x) * 3 + c;
                            let pred = intra_predictor(&block, x, y, c);
                            block[i] = (pred + mb.residual[i] as i32 * q).clamp(0, 255) as u8;
                        }
                    }
                }
                block
            }
            MbMode::Skip => read_block(reference.expect("checked").0, x0, y0),
            MbMode::Inter => {
                let pred = read_block(reference.expect("checked").0, rx as usize, ry as usize);
                let mut block = [0u8; MB_VALUES];
                for i in 0..MB_VALUES {
                    block[i] = (pred[i] as i32 + mb.residual[i] as i32 * q).clamp(0, 255) as u8;
                }
                block
            }
        };
        write_block(&mut out, mb.bx, mb.by, &block);
    }
    cache.push(mask.clone());
    Ok((out, mask))
}

/// Sequential decoder holding the previous output and its mask.
#[derive(Debug, Clone, Default)]
pub struct Decoder {
    reference: Option<(RgbFrame, CorruptionMask)>,
    cache: MaskCache,
}

impl Decoder {
    pub fn new() -> Self {
        Self {
            reference: None,
            cache: MaskCache::default(),
        }
    }

    pub fn cache(&self) -> &MaskCache {
        &self.cache
    }

    pub fn decode(&mut self, ef: &EncodedFrame, packets: &[Packet]) -> Result<(RgbFrame, CorruptionMask)> {
        let reference = match ef.kind {
            FrameKind::I => None,
            FrameKind::P => self.reference.as_ref().map(|(f, m)| (f, m)),
        };
        let out = decode_with_mask(ef, packets, reference, &mut self.cache)?;
        self.reference = Some(out.clone());
        Ok(out)
    }
}
