use std::f64::consts::TAU;
use std::str::FromStr;

use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{cadence, LabelGrid, LabelSequence, Taxonomy};
use crate::nowcast::FlowField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// Sum of random plane waves with wavelengths between a sixth and a half
    /// of the shorter grid side.
    BandlimitedNoise,
    /// Sum of isotropic Gaussian bumps.
    GaussianBlobs,
}

impl FromStr for FieldKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandlimited" | "bandlimited_noise" | "noise" => Ok(FieldKind::BandlimitedNoise),
            "blobs" | "gaussian_blobs" => Ok(FieldKind::GaussianBlobs),
            _ => Err(Error::invalid(format!("unknown field type {s:?}"))),
        }
    }
}

/// Analytic motion, in pixels (or radians) per frame. Coordinates are
/// (column, row) with the origin at the centre of the top-left pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowKind {
    Translation { vx: f64, vy: f64 },
    Rotation { cx: f64, cy: f64, omega: f64 },
}

impl FromStr for FlowKind {
    type Err = Error;

    /// `translation:vx,vy` or `rotation:cx,cy,omega`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("cannot parse flow {s:?}; expected translation:vx,vy or rotation:cx,cy,omega"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|a| a.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        match (kind, nums.as_slice()) {
            ("translation", &[vx, vy]) => Ok(FlowKind::Translation { vx, vy }),
            ("rotation", &[cx, cy, omega]) => Ok(FlowKind::Rotation { cx, cy, omega }),
            _ => Err(bad()),
        }
    }
}

impl FlowKind {
    /// Where the content at (x, y) came from `k` frames earlier.
    fn back_trace(&self, x: f64, y: f64, k: f64) -> (f64, f64) {
        match *self {
            FlowKind::Translation { vx, vy } => (x - vx * k, y - vy * k),
            FlowKind::Rotation { cx, cy, omega } => {
                let (s, c) = (-omega * k).sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                (cx + c * dx - s * dy, cy + s * dx + c * dy)
            }
        }
    }

    /// One-frame displacement at (x, y).
    fn displacement(&self, x: f64, y: f64) -> (f64, f64) {
        match *self {
            FlowKind::Translation { vx, vy } => (vx, vy),
            FlowKind::Rotation { cx, cy, omega } => {
                let (s, c) = omega.sin_cos();
                let (dx, dy) = (x - cx, y - cy);
                (c * dx - s * dy - dx, s * dx + c * dy - dy)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub field: FieldKind,
    pub flow: FlowKind,
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    /// Quantiles of the first frame separating the four classes.
    pub breakpoints: [f64; 3],
    pub seed: u64,
    pub start: DateTime<Utc>,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            field: FieldKind::BandlimitedNoise,
            flow: FlowKind::Translation { vx: 2.0, vy: 0.0 },
            height: 128,
            width: 128,
            frames: 32,
            breakpoints: [0.25, 0.5, 0.75],
            seed: 0,
            start: Utc.with_ymd_and_hms(2017, 1, 1, 0, 0, 0).unwrap(),
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 || self.frames == 0 {
            return Err(Error::invalid("synthetic grid and frame count must be positive"));
        }
        let b = self.breakpoints;
        if !(b[0] > 0.0 && b[0] < b[1] && b[1] < b[2] && b[2] < 1.0) {
            return Err(Error::invalid(format!("breakpoints {b:?} must increase strictly inside (0, 1)")));
        }
        let bound = self.height.min(self.width) as f64 / 8.0;
        let fastest = self.max_displacement();
        if !(fastest < bound) {
            return Err(Error::invalid(format!(
                "flow moves up to {fastest:.3} px per frame; the bound for this grid is < {bound}"
            )));
        }
        Ok(())
    }

    fn corners(&self) -> [(f64, f64); 4] {
        let (r, c) = ((self.height - 1) as f64, (self.width - 1) as f64);
        [(0.0, 0.0), (c, 0.0), (0.0, r), (c, r)]
    }

    fn max_displacement(&self) -> f64 {
        self.corners()
            .iter()
            .map(|&(x, y)| {
                let (u, v) = self.flow.displacement(x, y);
                u.hypot(v)
            })
            .fold(0.0, f64::max)
    }

    /// Bounding box (x0, x1, y0, y1) of every point that reaches the grid
    /// during the sequence.
    fn source_region(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        if let FlowKind::Rotation { cx, cy, .. } = self.flow {
            let r = self.corners().iter().map(|&(x, y)| (x - cx).hypot(y - cy)).fold(0.0, f64::max);
            return (cx - r, cx + r, cy - r, cy + r);
        }
        for k in 0..self.frames {
            for &(x, y) in &self.corners() {
                let (sx, sy) = self.flow.back_trace(x, y, k as f64);
                b = (b.0.min(sx), b.1.max(sx), b.2.min(sy), b.3.max(sy));
            }
        }
        b
    }
}

enum Field {
    Waves(Vec<(f64, f64, f64, f64)>),
    Blobs(Vec<(f64, f64, f64, f64)>),
}

impl Field {
    fn build(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Self {
        let side = spec.height.min(spec.width) as f64;
        match spec.field {
            FieldKind::BandlimitedNoise => {
                let (short, long) = ((side / 6.0).max(4.0), (side / 2.0).max(8.0));
                Field::Waves(
                    (0..16)
                        .map(|_| {
                            let wavelength = rng.gen_range(short..=long);
                            let angle = rng.gen_range(0.0..TAU);
                            let (s, c) = angle.sin_cos();
                            let amplitude = rng.gen_range(0.5..1.0);
                            (TAU * c / wavelength, TAU * s / wavelength, rng.gen_range(0.0..TAU), amplitude)
                        })
                        .collect(),
                )
            }
            FieldKind::GaussianBlobs => {
                let (x0, x1, y0, y1) = spec.source_region();
                let pad = side / 4.0;
                let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
                let density = 12.0 / (side * side);
                let count = ((x1 - x0) * (y1 - y0) * density).ceil().max(4.0) as usize;
                Field::Blobs(
                    (0..count)
                        .map(|_| {
                            let sigma = rng.gen_range((side / 16.0).max(1.5)..=(side / 6.0).max(2.0));
                            (rng.gen_range(x0..=x1), rng.gen_range(y0..=y1), sigma, rng.gen_range(0.5..1.0))
                        })
                        .collect(),
                )
            }
        }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        match self {
            Field::Waves(w) => w.iter().map(|&(kx, ky, phase, a)| a * (kx * x + ky * y + phase).cos()).sum(),
            Field::Blobs(b) => b
                .iter()
                .map(|&(cx, cy, s, a)| a * (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp())
                .sum(),
        }
    }
}

/// Seeded smooth field advected by the analytic flow and quantised into the
/// reduced classes at quantiles of the first frame. Also returns the
/// one-frame displacement field.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(LabelSequence, FlowField)> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let field = Field::build(spec, &mut rng);

    let sample = |k: usize| -> Vec<f64> {
        let mut out = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = spec.flow.back_trace(x as f64, y as f64, k as f64);
                out.push(field.at(sx, sy));
            }
        }
        out
    };

    let first = sample(0);
    let mut sorted = first.clone();
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    let thresholds = spec.breakpoints.map(|q| sorted[(last * q).round() as usize]);
    let quantise = |values: Vec<f64>| -> Vec<u8> {
        values
            .into_iter()
            .map(|v| thresholds.iter().filter(|&&t| v >= t).count() as u8)
            .collect()
    };

    let mut frames = Vec::with_capacity(spec.frames);
    frames.push(LabelGrid::new(h, w, quantise(first), Taxonomy::Reduced4, spec.start)?);
    for k in 1..spec.frames {
        let ts = spec.start + cadence() * k as i32;
        frames.push(LabelGrid::new(h, w, quantise(sample(k)), Taxonomy::Reduced4, ts)?);
    }

    let (mut u, mut v) = (Vec::with_capacity(h * w), Vec::with_capacity(h * w));
    for y in 0..h {
        for x in 0..w {
            let (a, b) = spec.flow.displacement(x as f64, y as f64);
            u.push(a);
            v.push(b);
        }
    }
    Ok((LabelSequence::new(frames)?, FlowField::new(h, w, u, v)?))
}
