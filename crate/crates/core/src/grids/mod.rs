//! Raster types shared by every stage of the toolkit: class grids, time-ordered
//! sequences of them, the multispectral inputs to segmentation, and the on-disk
//! interchange format (u8 NPY array plus a JSON timestamp sidecar).

pub mod npy;
mod render;
mod sidecar;

use std::fs;
use std::path::Path;

use chrono::{DateTime, Duration, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use render::{palette, render_frame, PALETTE_VERSION};
pub use sidecar::{format_timestamp, parse_timestamp, Sidecar};

/// Minutes between consecutive observations.
pub const CADENCE_MINUTES: i64 = 15;

pub fn cadence() -> Duration {
    Duration::minutes(CADENCE_MINUTES)
}

/// Which class alphabet a grid uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Taxonomy {
    /// Codes 0..=10: no cloud plus the ten cloud types.
    Full11,
    /// Codes 0..=3: no cloud, low, medium, high.
    Reduced4,
}

impl Taxonomy {
    pub const fn cardinality(self) -> usize {
        match self {
            Taxonomy::Full11 => 11,
            Taxonomy::Reduced4 => 4,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            Taxonomy::Full11 => "full11",
            Taxonomy::Reduced4 => "reduced4",
        }
    }

    pub fn contains(self, label: u8) -> bool {
        (label as usize) < self.cardinality()
    }
}

/// True when `t` sits on the quarter-hour grid.
pub fn is_cadence_aligned(t: &DateTime<Utc>) -> bool {
    t.minute() % CADENCE_MINUTES as u32 == 0 && t.second() == 0 && t.nanosecond() == 0
}

/// A single time-stamped raster of class codes in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    height: usize,
    width: usize,
    labels: Vec<u8>,
    taxonomy: Taxonomy,
    timestamp: DateTime<Utc>,
}

impl LabelGrid {
    pub fn new(
        height: usize,
        width: usize,
        labels: Vec<u8>,
        taxonomy: Taxonomy,
        timestamp: DateTime<Utc>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape(format!("empty grid {height}x{width}")));
        }
        if labels.len() != height * width {
            return Err(Error::shape(format!(
                "{} labels for a {height}x{width} grid",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| !taxonomy.contains(l)) {
            return Err(Error::InvalidLabel {
                label: bad,
                taxonomy: taxonomy.name(),
            });
        }
        if !is_cadence_aligned(&timestamp) {
            return Err(Error::Timestamps(format!(
                "{} is not on a {CADENCE_MINUTES}-minute boundary",
                format_timestamp(&timestamp)
            )));
        }
        Ok(LabelGrid {
            height,
            width,
            labels,
            taxonomy,
            timestamp,
        })
    }

    /// A grid filled with a single class.
    pub fn filled(
        height: usize,
        width: usize,
        label: u8,
        taxonomy: Taxonomy,
        timestamp: DateTime<Utc>,
    ) -> Result<Self> {
        Self::new(height, width, vec![label; height * width], taxonomy, timestamp)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u8> {
        self.labels
    }

    pub fn taxonomy(&self) -> Taxonomy {
        self.taxonomy
    }

    pub fn timestamp(&self) -> DateTime<Utc> {
        self.timestamp
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.labels[row * self.width + col]
    }

    /// Same labels, new timestamp.
    pub fn with_timestamp(&self, timestamp: DateTime<Utc>) -> Result<Self> {
        Self::new(
            self.height,
            self.width,
            self.labels.clone(),
            self.taxonomy,
            timestamp,
        )
    }

    /// Per-class pixel counts, indexed by class code.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.taxonomy.cardinality()];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    pub(crate) fn same_shape(&self, other: &LabelGrid) -> bool {
        self.dims() == other.dims() && self.taxonomy == other.taxonomy
    }
}

/// Frames of one region ordered in time. Timestamps are strictly increasing and
/// quarter-hour aligned; holes are allowed until gap repair removes them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSequence {
    frames: Vec<LabelGrid>,
}

impl LabelSequence {
    pub fn new(frames: Vec<LabelGrid>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::invalid("a sequence needs at least one frame"))?;
        for (i, f) in frames.iter().enumerate().skip(1) {
            if !f.same_shape(first) {
                return Err(Error::shape(format!(
                    "frame {i} is {}x{} {} but frame 0 is {}x{} {}",
                    f.height,
                    f.width,
                    f.taxonomy.name(),
                    first.height,
                    first.width,
                    first.taxonomy.name()
                )));
            }
            if f.timestamp <= frames[i - 1].timestamp {
                return Err(Error::Timestamps(format!(
                    "frame {i} at {} does not follow {}",
                    format_timestamp(&f.timestamp),
                    format_timestamp(&frames[i - 1].timestamp)
                )));
            }
        }
        Ok(LabelSequence { frames })
    }

    /// Builds a sequence from a T*H*W label buffer.
    pub fn from_raw(
        height: usize,
        width: usize,
        labels: &[u8],
        taxonomy: Taxonomy,
        timestamps: &[DateTime<Utc>],
    ) -> Result<Self> {
        let n = height * width;
        if n == 0 || labels.len() != n * timestamps.len() {
            return Err(Error::shape(format!(
                "{} labels do not form {} frames of {height}x{width}",
                labels.len(),
                timestamps.len()
            )));
        }
        let frames = labels
            .chunks_exact(n)
            .zip(timestamps)
            .map(|(chunk, &ts)| LabelGrid::new(height, width, chunk.to_vec(), taxonomy, ts))
            .collect::<Result<Vec<_>>>()?;
        Self::new(frames)
    }

    pub fn frames(&self) -> &[LabelGrid] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<LabelGrid> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn taxonomy(&self) -> Taxonomy {
        self.frames[0].taxonomy
    }

    pub fn cadence(&self) -> Duration {
        cadence()
    }

    pub fn timestamps(&self) -> Vec<DateTime<Utc>> {
        self.frames.iter().map(|f| f.timestamp).collect()
    }

    /// True when every step between frames is exactly one cadence.
    pub fn is_regular(&self) -> bool {
        self.frames
            .windows(2)
            .all(|w| w[1].timestamp - w[0].timestamp == cadence())
    }

    /// Index of the frame observed at `t`, if any.
    pub fn position(&self, t: DateTime<Utc>) -> Option<usize> {
        self.frames.binary_search_by_key(&t, |f| f.timestamp).ok()
    }

    /// Contiguous T*H*W label buffer.
    pub fn to_raw(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.frames.len() * self.height() * self.width());
        for f in &self.frames {
            out.extend_from_slice(&f.labels);
        }
        out
    }

    /// Appends `other` after `self`.
    pub fn concat(&self, other: &LabelSequence) -> Result<Self> {
        let mut frames = self.frames.clone();
        frames.extend(other.frames.iter().cloned());
        Self::new(frames)
    }

    /// Applies a frame-wise transform, keeping timestamps.
    pub(crate) fn try_map_frames<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&LabelGrid) -> Result<LabelGrid> + Sync + Send,
    {
        use rayon::prelude::*;
        let frames = self.frames.par_iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(frames)
    }
}

/// Reads a T*H*W u8 NPY array and its timestamp sidecar.
///
/// Labels above 3 force the full taxonomy; otherwise the sidecar's taxonomy is
/// used when present, falling back to `declared`.
pub fn load_sequence(
    path: impl AsRef<Path>,
    meta_path: impl AsRef<Path>,
    declared: Taxonomy,
) -> Result<LabelSequence> {
    let path = path.as_ref();
    let meta_path = meta_path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let array = npy::NpyArray::parse(&bytes)?;
    if array.shape.len() != 3 {
        return Err(Error::Npy(format!(
            "expected a 3-D T x H x W array, found shape {:?}",
            array.shape
        )));
    }
    let labels = match array.data {
        npy::NpyData::U8(v) => v,
        other => {
            return Err(Error::Npy(format!(
                "expected unsigned 8-bit labels, found {}",
                other.descr()
            )))
        }
    };
    let sidecar = Sidecar::read(meta_path)?;
    let timestamps = sidecar.parsed_timestamps()?;
    let (t, h, w) = (array.shape[0], array.shape[1], array.shape[2]);
    if timestamps.len() != t {
        return Err(Error::Timestamps(format!(
            "{} timestamps for {t} frames",
            timestamps.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= 11) {
        return Err(Error::InvalidLabel {
            label: bad,
            taxonomy: Taxonomy::Full11.name(),
        });
    }
    let taxonomy = if labels.iter().any(|&l| l > 3) {
        Taxonomy::Full11
    } else {
        sidecar.taxonomy.unwrap_or(declared)
    };
    LabelSequence::from_raw(h, w, &labels, taxonomy, &timestamps)
}

/// Writes `seq` as an NPY array plus sidecar. Output is byte-deterministic.
pub fn save_sequence(
    seq: &LabelSequence,
    path: impl AsRef<Path>,
    meta_path: impl AsRef<Path>,
) -> Result<()> {
    write_sequence(seq, path.as_ref(), meta_path.as_ref(), None)
}

pub(crate) fn write_sequence(
    seq: &LabelSequence,
    path: &Path,
    meta_path: &Path,
    origin: Option<DateTime<Utc>>,
) -> Result<()> {
    let shape = [seq.len(), seq.height(), seq.width()];
    let bytes = npy::encode_u8(&shape, &seq.to_raw());
    write_file(path, &bytes)?;
    let mut sidecar = Sidecar::new(&seq.timestamps(), Some(seq.taxonomy()));
    sidecar.origin = origin.map(|o| format_timestamp(&o));
    sidecar.write(meta_path)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One of the five sampled wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// 0.6 um visible reflectance.
    Vis06,
    /// 7.3 um water vapour.
    Wv73,
    Ir87,
    Ir108,
    Ir120,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Vis06,
        Channel::Wv73,
        Channel::Ir87,
        Channel::Ir108,
        Channel::Ir120,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn is_thermal(self) -> bool {
        self != Channel::Vis06
    }

    pub fn file_stem(self) -> &'static str {
        match self {
            Channel::Vis06 => "vis06",
            Channel::Wv73 => "wv73",
            Channel::Ir87 => "ir87",
            Channel::Ir108 => "ir108",
            Channel::Ir120 => "ir120",
        }
    }
}

/// Brightness temperatures (K) and visible reflectance for one observation.
/// A channel that was not delivered is simply absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    height: usize,
    width: usize,
    timestamp: DateTime<Utc>,
    planes: [Option<Vec<f64>>; 5],
}

/// Valid brightness temperature range in kelvin.
pub const TEMPERATURE_RANGE: (f64, f64) = (150.0, 350.0);

impl ChannelStack {
    pub fn new(height: usize, width: usize, timestamp: DateTime<Utc>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::shape("empty channel stack"));
        }
        if !is_cadence_aligned(&timestamp) {
            return Err(Error::Timestamps(format!(
                "{} is not quarter-hour aligned",
                format_timestamp(&timestamp)
            )));
        }
        Ok(ChannelStack {
            height,
            width,
            timestamp,
            planes: Default::default(),
        })
    }

    pub fn with_channel(mut self, channel: Channel, plane: Vec<f64>) -> Result<Self> {
        if plane.len() != self.height * self.width {
            return Err(Error::shape(format!(
                "{:?} plane has {} values, expected {}",
                channel,
                plane.len(),
                self.height * self.width
            )));
        }
        let (lo, hi) = if channel.is_thermal() {
            TEMPERATURE_RANGE
        } else {
            (0.0, 1.0)
        };
        if let Some(v) = plane.iter().find(|v| !(lo..=hi).contains(*v)) {
            return Err(Error::invalid(format!(
                "{channel:?} value {v} outside [{lo}, {hi}]"
            )));
        }
        self.planes[channel.index()] = Some(plane);
        Ok(self)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn timestamp(&self) -> DateTime<Utc> {
        self.timestamp
    }

    pub fn is_available(&self, channel: Channel) -> bool {
        self.planes[channel.index()].is_some()
    }

    pub fn plane(&self, channel: Channel) -> Option<&[f64]> {
        self.planes[channel.index()].as_deref()
    }

    pub fn value(&self, channel: Channel, idx: usize) -> Option<f64> {
        self.planes[channel.index()].as_ref().map(|p| p[idx])
    }
}

/// Solar zenith angles below this are daytime.
pub const DAY_MAX_SOLAR_ZENITH: f64 = 80.0;
/// Solar zenith angles at or above this are night.
pub const NIGHT_MIN_SOLAR_ZENITH: f64 = 95.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Illumination {
    Day,
    Twilight,
    Night,
}

impl Illumination {
    pub fn from_solar_zenith(deg: f64) -> Self {
        if deg < DAY_MAX_SOLAR_ZENITH {
            Illumination::Day
        } else if deg < NIGHT_MIN_SOLAR_ZENITH {
            Illumination::Twilight
        } else {
            Illumination::Night
        }
    }
}

/// Viewing and illumination geometry per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoContext {
    height: usize,
    width: usize,
    solar_zenith: Vec<f64>,
    satellite_zenith: Vec<f64>,
    land_sea: Option<Vec<bool>>,
}

impl GeoContext {
    pub fn new(
        height: usize,
        width: usize,
        solar_zenith: Vec<f64>,
        satellite_zenith: Vec<f64>,
        land_sea: Option<Vec<bool>>,
    ) -> Result<Self> {
        let n = height * width;
        if n == 0
            || solar_zenith.len() != n
            || satellite_zenith.len() != n
            || land_sea.as_ref().is_some_and(|m| m.len() != n)
        {
            return Err(Error::shape(format!(
                "geometry planes do not match a {height}x{width} grid"
            )));
        }
        let in_range = |v: &f64| (0.0..=180.0).contains(v);
        if !solar_zenith.iter().all(in_range) || !satellite_zenith.iter().all(in_range) {
            return Err(Error::invalid("zenith angles must lie in [0, 180] degrees"));
        }
        Ok(GeoContext {
            height,
            width,
            solar_zenith,
            satellite_zenith,
            land_sea,
        })
    }

    /// Uniform geometry, handy for synthetic scenes.
    pub fn uniform(height: usize, width: usize, solar_zenith: f64, satellite_zenith: f64) -> Result<Self> {
        let n = height * width;
        Self::new(
            height,
            width,
            vec![solar_zenith; n],
            vec![satellite_zenith; n],
            None,
        )
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn solar_zenith(&self, idx: usize) -> f64 {
        self.solar_zenith[idx]
    }

    pub fn satellite_zenith(&self, idx: usize) -> f64 {
        self.satellite_zenith[idx]
    }

    pub fn is_land(&self, idx: usize) -> Option<bool> {
        self.land_sea.as_ref().map(|m| m[idx])
    }

    pub fn illumination(&self, idx: usize) -> Illumination {
        Illumination::from_solar_zenith(self.solar_zenith[idx])
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use chrono::TimeZone;

    pub(crate) fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2017, 4, 1, 13, 0, 0).unwrap()
    }

    #[test]
    fn grid_rejects_out_of_taxonomy_labels() {
        let err = LabelGrid::new(1, 2, vec![0, 4], Taxonomy::Reduced4, t0()).unwrap_err();
        assert!(matches!(err, Error::InvalidLabel { label: 4, .. }));
        assert!(LabelGrid::new(1, 2, vec![0, 10], Taxonomy::Full11, t0()).is_ok());
    }

    #[test]
    fn grid_rejects_unaligned_timestamp() {
        let t = Utc.with_ymd_and_hms(2017, 4, 1, 13, 7, 0).unwrap();
        assert!(LabelGrid::new(1, 1, vec![0], Taxonomy::Full11, t).is_err());
    }

    #[test]
    fn grid_rejects_zero_dims() {
        assert!(LabelGrid::new(0, 3, vec![], Taxonomy::Full11, t0()).is_err());
    }

    #[test]
    fn sequence_requires_increasing_time() {
        let a = LabelGrid::filled(2, 2, 0, Taxonomy::Reduced4, t0()).unwrap();
        let b = a.clone();
        assert!(LabelSequence::new(vec![a.clone(), b]).is_err());
        let c = a.with_timestamp(t0() + cadence()).unwrap();
        let seq = LabelSequence::new(vec![a, c]).unwrap();
        assert!(seq.is_regular());
    }

    #[test]
    fn sequence_rejects_mixed_taxonomy() {
        let a = LabelGrid::filled(2, 2, 0, Taxonomy::Reduced4, t0()).unwrap();
        let b = LabelGrid::filled(2, 2, 0, Taxonomy::Full11, t0() + cadence()).unwrap();
        assert!(LabelSequence::new(vec![a, b]).is_err());
    }

    #[test]
    fn illumination_regimes() {
        assert_eq!(Illumination::from_solar_zenith(30.0), Illumination::Day);
        assert_eq!(Illumination::from_solar_zenith(85.0), Illumination::Twilight);
        assert_eq!(Illumination::from_solar_zenith(120.0), Illumination::Night);
    }

    #[test]
    fn channel_stack_validates_ranges() {
        let s = ChannelStack::new(1, 1, t0()).unwrap();
        assert!(s.clone().with_channel(Channel::Ir108, vec![100.0]).is_err());
        assert!(s.clone().with_channel(Channel::Vis06, vec![1.5]).is_err());
        let s = s.with_channel(Channel::Ir108, vec![250.0]).unwrap();
        assert!(s.is_available(Channel::Ir108));
        assert!(!s.is_available(Channel::Ir120));
    }
}
