use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::session::{FrameOutcome, FrameStatus, Scheme};
use crate::error::{Error, Result};
use crate::metrics::{mean, FrameScore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub outcome: FrameOutcome,
    pub score: FrameScore,
    /// PSNR the loss-free decode reaches on this frame.
    pub baseline_psnr: f64,
}

/// One CSV row per frame.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    frame_index: usize,
    scheme: String,
    status: FrameStatus,
    arrival_ms: f64,
    display_ms: f64,
    late: bool,
    extraction_triggered: bool,
    packets_sent: usize,
    packets_lost: usize,
    bytes_sent: usize,
    extra_bytes: usize,
    pixel_loss: f64,
    psnr_db: f64,
    ssim: f64,
    baseline_psnr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub scheme: String,
    pub trace: String,
    pub seed: u64,
    pub frames: usize,
    pub mean_psnr_db: f64,
    pub mean_ssim: f64,
    pub mean_baseline_psnr_db: f64,
    pub pixel_loss_rate: f64,
    pub delivered: usize,
    pub partial_recovered: usize,
    pub predicted: usize,
    pub late_discarded: usize,
    pub mean_run_length: f64,
    pub max_run_length: usize,
    /// P(frame lost | previous frame lost); absent when nothing was lost.
    pub conditional_loss: Option<f64>,
    pub total_bytes: usize,
    pub extra_bytes: usize,
}

impl SessionSummary {
    pub fn from_records(scheme: &str, trace: &str, seed: u64, records: &[FrameRecord]) -> Self {
        let count = |s: FrameStatus| records.iter().filter(|r| r.outcome.status == s).count();
        let runs = run_lengths(records);
        Self {
            scheme: scheme.to_string(),
            trace: trace.to_string(),
            seed,
            frames: records.len(),
            mean_psnr_db: mean(records.iter().map(|r| r.score.psnr)),
            mean_ssim: mean(records.iter().map(|r| r.score.ssim)),
            mean_baseline_psnr_db: mean(records.iter().map(|r| r.baseline_psnr)),
            pixel_loss_rate: mean(records.iter().map(|r| r.outcome.pixel_loss)),
            delivered: count(FrameStatus::Delivered),
            partial_recovered: count(FrameStatus::PartialRecovered),
            predicted: count(FrameStatus::Predicted),
            late_discarded: count(FrameStatus::DeliveredLateDiscarded),
            mean_run_length: mean(runs.iter().map(|&r| r as f64)),
            max_run_length: runs.iter().copied().max().unwrap_or(0),
            conditional_loss: conditional_loss(records),
            total_bytes: records.iter().map(|r| r.outcome.bytes_sent).sum(),
            extra_bytes: records.iter().map(|r| r.outcome.extra_bytes).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionReport {
    pub scheme: Scheme,
    pub frames: Vec<FrameRecord>,
    pub summary: SessionSummary,
}

impl SessionReport {
    pub fn new(scheme: Scheme, trace: &str, seed: u64, frames: Vec<FrameRecord>) -> Self {
        let summary = SessionSummary::from_records(&scheme.to_string(), trace, seed, &frames);
        Self { scheme, frames, summary }
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let scheme = self.scheme.to_string();
        for r in &self.frames {
            let o = &r.outcome;
            wr.serialize(CsvRow {
                frame_index: o.frame_index,
                scheme: scheme.clone(),
                status: o.status,
                arrival_ms: o.arrival_ms,
                display_ms: o.display_ms,
                late: o.late,
                extraction_triggered: o.extraction_triggered,
                packets_sent: o.packets_sent,
                packets_lost: o.packets_lost,
                bytes_sent: o.bytes_sent,
                extra_bytes: o.extra_bytes,
                pixel_loss: o.pixel_loss,
                psnr_db: r.score.psnr,
                ssim: r.score.ssim,
                baseline_psnr_db: r.baseline_psnr,
            })?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Rebuilds a report from its CSV rows; the summary is recomputed.
    pub fn read_csv(r: impl Read, trace: &str, seed: u64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut frames = Vec::new();
        let mut scheme = None;
        for row in rd.deserialize::<CsvRow>() {
            let row = row?;
            let s: Scheme = row.scheme.parse()?;
            if scheme.is_some_and(|prev| prev != s) {
                return Err(Error::format("report", "rows mix several schemes"));
            }
            scheme = Some(s);
            frames.push(FrameRecord {
                outcome: FrameOutcome {
                    frame_index: row.frame_index,
                    status: row.status,
                    arrival_ms: row.arrival_ms,
                    display_ms: row.display_ms,
                    late: row.late,
                    pixel_loss: row.pixel_loss,
                    extraction_triggered: row.extraction_triggered,
                    packets_sent: row.packets_sent,
                    packets_lost: row.packets_lost,
                    bytes_sent: row.bytes_sent,
                    extra_bytes: row.extra_bytes,
                },
                score: FrameScore {
                    frame_index: row.frame_index,
                    psnr: row.psnr_db,
                    ssim: row.ssim,
                    pixel_loss: row.pixel_loss,
                },
                baseline_psnr: row.baseline_psnr_db,
            });
        }
        let scheme = scheme.ok_or_else(|| Error::format("report", "no rows"))?;
        Ok(Self::new(scheme, trace, seed, frames))
    }

    pub fn write_json(&self, mut w: impl Write) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, &self.summary)?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::format("report", e.to_string()))
    }
}

/// Lengths of maximal runs of frames that were not delivered intact.
pub fn run_lengths(records: &[FrameRecord]) -> Vec<usize> {
    let mut runs = Vec::new();
    let mut current = 0;
    for r in records {
        if r.outcome.status.is_lost() {
            current += 1;
        } else if current > 0 {
            runs.push(current);
            current = 0;
        }
    }
    if current > 0 {
        runs.push(current);
    }
    runs
}

pub fn conditional_loss(records: &[FrameRecord]) -> Option<f64> {
    let (mut after_loss, mut both) = (0usize, 0usize);
    for w in records.windows(2) {
        if w[0].outcome.status.is_lost() {
            after_loss += 1;
            if w[1].outcome.status.is_lost() {
                both += 1;
            }
        }
    }
    (after_loss > 0).then(|| both as f64 / after_loss as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstBin {
    pub runs: usize,
    /// Mean of `baseline - psnr` over every frame inside runs of this length.
    pub mean_psnr_reduction_db: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BurstHistogram {
    pub bins: BTreeMap<usize, BurstBin>,
}

impl BurstHistogram {
    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn mean_run_length(&self) -> f64 {
        let runs: usize = self.bins.values().map(|b| b.runs).sum();
        if runs == 0 {
            return 0.0;
        }
        self.bins.iter().map(|(len, b)| len * b.runs).sum::<usize>() as f64 / runs as f64
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["run_length", "runs", "mean_psnr_reduction_db"])?;
        for (len, b) in &self.bins {
            wr.write_record([len.to_string(), b.runs.to_string(), b.mean_psnr_reduction_db.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn burst_report(report: &SessionReport) -> BurstHistogram {
    let mut acc: BTreeMap<usize, (usize, f64, usize)> = BTreeMap::new();
    let frames = &report.frames;
    let mut i = 0;
    while i < frames.len() {
        if !frames[i].outcome.status.is_lost() {
            i += 1;
            continue;
        }
        let start = i;
        while i < frames.len() && frames[i].outcome.status.is_lost() {
            i += 1;
        }
        let e = acc.entry(i - start).or_default();
        e.0 += 1;
        for r in &frames[start..i] {
            e.1 += r.baseline_psnr - r.score.psnr;
            e.2 += 1;
        }
    }
    BurstHistogram {
        bins: acc
            .into_iter()
            .map(|(len, (runs, sum, n))| {
                (
                    len,
                    BurstBin {
                        runs,
                        mean_psnr_reduction_db: sum / n as f64,
                    },
                )
            })
            .collect(),
    }
}
