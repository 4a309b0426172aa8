//! A small motion-compensated block codec whose decoder reports, per 4x4
//! sub-block, whether the reconstruction can be trusted.
//!
//! Frames are split into 16x16 macroblocks. I-frames code every macroblock
//! on its own; P-frames predict from the previous reconstruction with integer
//! motion vectors. Consecutive macroblocks are packed into MTU-sized packets
//! that decode independently, so losing a packet damages exactly its
//! macroblocks, plus anything that later references them.

mod bitstream;
mod decode;
mod encode;

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub use bitstream::{read_stream, write_stream, StreamHeader};
pub use decode::{decode_with_mask, reference_region_corrupt, Decoder};
pub use encode::{encode, macroblock_cost, packetize, Encoder};

pub const MB_SIZE: usize = 16;
pub const SUB_SIZE: usize = 4;
/// Sub-blocks along one side of a macroblock.
pub const SUBS_PER_MB: usize = MB_SIZE / SUB_SIZE;
pub const MB_VALUES: usize = MB_SIZE * MB_SIZE * 3;
pub const MASK_CACHE_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodecConfig {
    pub gop: usize,
    pub q: i32,
    pub mtu: usize,
    pub search_range: i32,
    pub skip_threshold: u32,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            gop: 30,
            q: 8,
            mtu: 1200,
            search_range: 8,
            skip_threshold: 64,
        }
    }
}

impl CodecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gop == 0 {
            return Err(Error::Config("gop must be at least 1".into()));
        }
        if self.q < 1 {
            return Err(Error::Config("quantizer step must be at least 1".into()));
        }
        if self.mtu < 64 {
            return Err(Error::Config("mtu must be at least 64 bytes".into()));
        }
        if !(0..=127).contains(&self.search_range) {
            return Err(Error::Config("search range must be within 0..=127".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    I,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MbMode {
    Intra,
    Inter,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Macroblock {
    pub bx: usize,
    pub by: usize,
    pub mode: MbMode,
    /// `pred(x, y) = ref(x - dx, y - dy)`; zero unless INTER.
    pub motion_vector: (i32, i32),
    /// 768 quantized values in row-major RGB order, empty for SKIP. INTRA
    /// blocks store DPCM residuals against the already reconstructed
    /// neighbouring pixel inside the same block.
    pub residual: Vec<i16>,
}

impl Macroblock {
    pub fn nonzero_residuals(&self) -> usize {
        self.residual.iter().filter(|&&r| r != 0).count()
    }
}

/// Macroblocks `start..end` travel in packet `packet_id`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRange {
    pub packet_id: u32,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedFrame {
    pub frame_index: usize,
    pub kind: FrameKind,
    pub q: i32,
    pub width: usize,
    pub height: usize,
    pub macroblocks: Vec<Macroblock>,
    pub packet_map: Vec<PacketRange>,
}

impl EncodedFrame {
    pub fn mb_cols(&self) -> usize {
        self.width / MB_SIZE
    }

    pub fn mb_rows(&self) -> usize {
        self.height / MB_SIZE
    }

    pub fn total_bytes(&self) -> usize {
        self.macroblocks.iter().map(macroblock_cost).sum()
    }

    /// Packet ranges as carriers, all marked received.
    pub fn packets(&self) -> Vec<Packet> {
        self.packet_map
            .iter()
            .map(|r| Packet {
                packet_id: r.packet_id,
                frame_index: self.frame_index,
                payload_bytes: self.macroblocks[r.start..r.end].iter().map(macroblock_cost).sum(),
                lost: false,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub packet_id: u32,
    pub frame_index: usize,
    pub payload_bytes: usize,
    pub lost: bool,
}

/// Validity of every 4x4 sub-block of a decoded frame.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CorruptionMask {
    pub width: usize,
    pub height: usize,
    pub frame_index: usize,
    corrupt: Vec<bool>,
}

impl CorruptionMask {
    /// An all-VALID mask for a `frame_width x frame_height` frame.
    pub fn all_valid(frame_width: usize, frame_height: usize, frame_index: usize) -> Self {
        let (width, height) = (frame_width / SUB_SIZE, frame_height / SUB_SIZE);
        Self {
            width,
            height,
            frame_index,
            corrupt: vec![false; width * height],
        }
    }

    pub fn all_corrupt(frame_width: usize, frame_height: usize, frame_index: usize) -> Self {
        let mut m = Self::all_valid(frame_width, frame_height, frame_index);
        m.corrupt.fill(true);
        m
    }

    #[inline]
    pub fn is_corrupt(&self, cx: usize, cy: usize) -> bool {
        self.corrupt[cy * self.width + cx]
    }

    #[inline]
    pub fn is_valid(&self, cx: usize, cy: usize) -> bool {
        !self.is_corrupt(cx, cy)
    }

    /// Validity of the sub-block containing pixel `(x, y)`.
    #[inline]
    pub fn pixel_valid(&self, x: usize, y: usize) -> bool {
        self.is_valid(x / SUB_SIZE, y / SUB_SIZE)
    }

    pub fn set_corrupt(&mut self, cx: usize, cy: usize, corrupt: bool) {
        self.corrupt[cy * self.width + cx] = corrupt;
    }

    pub fn mark_macroblock(&mut self, bx: usize, by: usize) {
        for cy in by * SUBS_PER_MB..(by + 1) * SUBS_PER_MB {
            for cx in bx * SUBS_PER_MB..(bx + 1) * SUBS_PER_MB {
                self.set_corrupt(cx, cy, true);
            }
        }
    }

    pub fn corrupt_count(&self) -> usize {
        self.corrupt.iter().filter(|&&c| c).count()
    }

    pub fn cell_count(&self) -> usize {
        self.corrupt.len()
    }

    pub fn all_valid_cells(&self) -> bool {
        self.corrupt_count() == 0
    }

    pub fn corrupt_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.corrupt
            .iter()
            .enumerate()
            .filter(|(_, &c)| c)
            .map(|(i, _)| (i % self.width, i / self.width))
    }

    pub fn to_pgm(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            maxval: 255,
            data: self.corrupt.iter().map(|&c| if c { 0 } else { 255 }).collect(),
        }
    }

    pub fn from_pgm(img: &GrayImage, frame_index: usize) -> Self {
        Self {
            width: img.width,
            height: img.height,
            frame_index,
            corrupt: img.data.iter().map(|&v| v == 0).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_pgm().save(path)
    }
}

/// Fraction of sub-blocks marked CORRUPT.
pub fn pixel_loss_rate(mask: &CorruptionMask) -> f64 {
    if mask.cell_count() == 0 {
        return 0.0;
    }
    mask.corrupt_count() as f64 / mask.cell_count() as f64
}

/// The most recent decoded masks, oldest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskCache {
    capacity: usize,
    masks: VecDeque<CorruptionMask>,
}

impl Default for MaskCache {
    fn default() -> Self {
        Self::new(MASK_CACHE_LEN)
    }
}

impl MaskCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            masks: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn push(&mut self, mask: CorruptionMask) {
        if self.masks.len() == self.capacity {
            self.masks.pop_front();
        }
        self.masks.push_back(mask);
    }

    pub fn get(&self, frame_index: usize) -> Option<&CorruptionMask> {
        self.masks.iter().find(|m| m.frame_index == frame_index)
    }

    pub fn latest(&self) -> Option<&CorruptionMask> {
        self.masks.back()
    }

    pub fn frame_indices(&self) -> Vec<usize> {
        self.masks.iter().map(|m| m.frame_index).collect()
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }
}

pub(crate) fn check_frame_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 || width % MB_SIZE != 0 || height % MB_SIZE != 0 {
        return Err(Error::InvalidResolution {
            width,
            height,
            reason: "codec frames must be a non-zero multiple of 16 in both dimensions",
        });
    }
    Ok(())
}
