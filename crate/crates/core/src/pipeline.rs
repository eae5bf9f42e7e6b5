//! Sequence preprocessing: gap repair, temporal split, majority downsampling
//! and center cropping.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{cadence, format_timestamp, LabelGrid, LabelSequence};

/// Holes of this many frames or more (six hours) are left unrepaired.
pub const MAX_REPAIR_FRAMES: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapRun {
    /// First missing timestamp.
    pub start: DateTime<Utc>,
    /// Last missing timestamp.
    pub end: DateTime<Utc>,
    pub frame_count: usize,
    pub repaired: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapReport {
    pub runs: Vec<GapRun>,
}

impl GapReport {
    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn repaired_frames(&self) -> usize {
        self.runs.iter().filter(|r| r.repaired).map(|r| r.frame_count).sum()
    }
}

/// Fills holes shorter than [`MAX_REPAIR_FRAMES`].
///
/// Class codes cannot be blended, so each inserted frame copies the nearer of
/// its two neighbours in time; the midpoint goes to the earlier one.
pub fn repair_gaps(seq: &LabelSequence) -> Result<(LabelSequence, GapReport)> {
    if seq.len() < 2 {
        return Err(Error::InsufficientFrames {
            needed: 2,
            available: seq.len(),
        });
    }
    let step = cadence();
    let frames = seq.frames();
    let mut out = Vec::with_capacity(frames.len());
    let mut report = GapReport::default();
    out.push(frames[0].clone());
    for pair in frames.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.timestamp() - a.timestamp();
        if dt.num_seconds() % step.num_seconds() != 0 {
            return Err(Error::Timestamps(format!(
                "{} to {} is not a whole number of {}-minute steps",
                format_timestamp(&a.timestamp()),
                format_timestamp(&b.timestamp()),
                step.num_minutes()
            )));
        }
        let missing = (dt.num_seconds() / step.num_seconds()) as usize - 1;
        if missing > 0 {
            let repaired = missing < MAX_REPAIR_FRAMES;
            report.runs.push(GapRun {
                start: a.timestamp() + step,
                end: b.timestamp() - step,
                frame_count: missing,
                repaired,
            });
            if repaired {
                for j in 1..=missing {
                    let alpha = j as f64 / (missing + 1) as f64;
                    let source = if alpha <= 0.5 { a } else { b };
                    out.push(source.with_timestamp(a.timestamp() + step * j as i32)?);
                }
            }
        }
        out.push(b.clone());
    }
    Ok((LabelSequence::new(out)?, report))
}

/// Single temporal cut: frames before the boundary train, the rest test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    /// When set, overrides the fraction: frames strictly before it go to training.
    pub boundary: Option<DateTime<Utc>>,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.75,
            boundary: None,
        }
    }
}

impl SplitSpec {
    pub fn with_fraction(train_fraction: f64) -> Self {
        SplitSpec {
            train_fraction,
            boundary: None,
        }
    }

    /// Index of the first test frame.
    pub fn boundary_index(&self, seq: &LabelSequence) -> Result<usize> {
        let idx = match self.boundary {
            Some(t) => seq.frames().partition_point(|f| f.timestamp() < t),
            None => {
                if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
                    return Err(Error::invalid(format!(
                        "train fraction {} must lie strictly between 0 and 1",
                        self.train_fraction
                    )));
                }
                (seq.len() as f64 * self.train_fraction).round() as usize
            }
        };
        if idx == 0 || idx >= seq.len() {
            return Err(Error::invalid(format!(
                "split of {} frames at index {idx} leaves one side empty",
                seq.len()
            )));
        }
        Ok(idx)
    }
}

/// Returns (train, test) and the timestamp of the first test frame.
pub fn split(seq: &LabelSequence, spec: &SplitSpec) -> Result<(LabelSequence, LabelSequence, DateTime<Utc>)> {
    let idx = spec.boundary_index(seq)?;
    let frames = seq.frames();
    let train = LabelSequence::new(frames[..idx].to_vec())?;
    let test = LabelSequence::new(frames[idx..].to_vec())?;
    Ok((train, test, frames[idx].timestamp()))
}

/// Modal class per `factor` x `factor` block; ties go to the smallest code.
pub fn downsample_frame(grid: &LabelGrid, factor: usize) -> Result<LabelGrid> {
    let (h, w) = grid.dims();
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::shape(format!("{h}x{w} is not divisible by factor {factor}")));
    }
    if factor == 1 {
        return Ok(grid.clone());
    }
    let (oh, ow) = (h / factor, w / factor);
    let k = grid.taxonomy().cardinality();
    let mut counts = vec![0usize; k];
    let mut labels = Vec::with_capacity(oh * ow);
    for by in 0..oh {
        for bx in 0..ow {
            counts.iter_mut().for_each(|c| *c = 0);
            for y in by * factor..(by + 1) * factor {
                for &l in &grid.labels()[y * w + bx * factor..y * w + (bx + 1) * factor] {
                    counts[l as usize] += 1;
                }
            }
            // max_by_key keeps the last maximum, so scan codes in reverse.
            let mode = (0..k).rev().max_by_key(|&c| counts[c]).unwrap_or(0);
            labels.push(mode as u8);
        }
    }
    LabelGrid::new(oh, ow, labels, grid.taxonomy(), grid.timestamp())
}

pub fn downsample_majority(seq: &LabelSequence, factor: usize) -> Result<LabelSequence> {
    seq.try_map_frames(|g| downsample_frame(g, factor))
}

/// Window of `out_h` x `out_w` at offsets floor((in - out) / 2).
pub fn crop_frame(grid: &LabelGrid, out_h: usize, out_w: usize) -> Result<LabelGrid> {
    let (h, w) = grid.dims();
    if out_h == 0 || out_w == 0 || out_h > h || out_w > w {
        return Err(Error::shape(format!("cannot crop {h}x{w} to {out_h}x{out_w}")));
    }
    let (oy, ox) = ((h - out_h) / 2, (w - out_w) / 2);
    let labels = (oy..oy + out_h)
        .flat_map(|y| grid.labels()[y * w + ox..y * w + ox + out_w].iter().copied())
        .collect();
    LabelGrid::new(out_h, out_w, labels, grid.taxonomy(), grid.timestamp())
}

pub fn crop_center(seq: &LabelSequence, out_h: usize, out_w: usize) -> Result<LabelSequence> {
    seq.try_map_frames(|g| crop_frame(g, out_h, out_w))
}
