//! Per-pixel cloud-type annotation.
//!
//! Cloudy pixels are first tested for semitransparency with split-window
//! brightness temperature differences (plus a visible reflectance test by day).
//! Pixels that stay opaque are binned by their 10.8 um brightness temperature
//! against four NWP-derived height thresholds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{Channel, ChannelStack, GeoContext, Illumination, LabelGrid, LabelSequence, Taxonomy, TEMPERATURE_RANGE};

/// NWP air temperatures (K) on the satellite grid, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NwpFields {
    pub height: usize,
    pub width: usize,
    pub t_sfc: Vec<f64>,
    pub t950: Vec<f64>,
    pub t850: Vec<f64>,
    pub t700: Vec<f64>,
    pub t500: Vec<f64>,
    pub t_tropo: Vec<f64>,
    /// Total column water vapour (kg/m^2). Carried along, not used by the thresholds.
    pub tcwv: Vec<f64>,
}

impl NwpFields {
    /// Horizontally uniform profile.
    pub fn uniform(height: usize, width: usize, t_sfc: f64, t950: f64, t850: f64, t700: f64, t500: f64, t_tropo: f64) -> Self {
        let n = height * width;
        NwpFields {
            height,
            width,
            t_sfc: vec![t_sfc; n],
            t950: vec![t950; n],
            t850: vec![t850; n],
            t700: vec![t700; n],
            t500: vec![t500; n],
            t_tropo: vec![t_tropo; n],
            tcwv: vec![0.0; n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.height * self.width;
        if n == 0 {
            return Err(Error::shape("empty NWP grid"));
        }
        let temps = [
            ("t_sfc", &self.t_sfc),
            ("t950", &self.t950),
            ("t850", &self.t850),
            ("t700", &self.t700),
            ("t500", &self.t500),
            ("t_tropo", &self.t_tropo),
        ];
        for (name, plane) in temps {
            if plane.len() != n {
                return Err(Error::shape(format!("NWP plane {name} has {} values, expected {n}", plane.len())));
            }
            let (lo, hi) = TEMPERATURE_RANGE;
            if let Some(v) = plane.iter().find(|v| !(lo..=hi).contains(*v)) {
                return Err(Error::invalid(format!("NWP {name} value {v} K outside [{lo}, {hi}]")));
            }
        }
        if self.tcwv.len() != n {
            return Err(Error::shape("NWP plane tcwv does not match the grid"));
        }
        Ok(())
    }
}

/// The four brightness-temperature thresholds (K) separating the five opaque
/// height classes at one pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelThresholds {
    pub vh: f64,
    pub hi: f64,
    pub me: f64,
    pub lo: f64,
}

impl PixelThresholds {
    /// Raw thresholds from the air temperature profile, before any reordering.
    pub fn from_temperatures(t500: f64, t700: f64, t850: f64, t_tropo: f64) -> Self {
        PixelThresholds {
            vh: 0.4 * t500 + 0.6 * t_tropo - 5.0,
            hi: 0.5 * t500 - 0.2 * t700 + 178.0,
            me: 0.8 * t850 + 0.2 * t700 - 8.0,
            lo: 1.2 * t850 - 0.2 * t700 - 5.0,
        }
    }

    pub fn is_ordered(&self) -> bool {
        self.vh <= self.hi && self.hi <= self.me && self.me <= self.lo
    }

    /// Sorts the thresholds ascending. The flag is set when the input was out
    /// of order (thermal inversions can produce that).
    pub fn canonicalize(self) -> (Self, bool) {
        if self.is_ordered() {
            return (self, false);
        }
        let mut v = [self.vh, self.hi, self.me, self.lo];
        v.sort_by(f64::total_cmp);
        (
            PixelThresholds {
                vh: v[0],
                hi: v[1],
                me: v[2],
                lo: v[3],
            },
            true,
        )
    }
}

/// Canonical per-pixel thresholds plus the inversion flags.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightThresholds {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<PixelThresholds>,
    pub inverted: Vec<bool>,
}

impl HeightThresholds {
    pub fn inverted_count(&self) -> usize {
        self.inverted.iter().filter(|&&b| b).count()
    }
}

pub fn compute_height_thresholds(nwp: &NwpFields) -> Result<HeightThresholds> {
    nwp.validate()?;
    let (pixels, inverted) = (0..nwp.height * nwp.width)
        .map(|i| PixelThresholds::from_temperatures(nwp.t500[i], nwp.t700[i], nwp.t850[i], nwp.t_tropo[i]).canonicalize())
        .unzip();
    Ok(HeightThresholds {
        height: nwp.height,
        width: nwp.width,
        pixels,
        inverted,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HeightClass {
    VeryLow,
    Low,
    Medium,
    High,
    VeryHigh,
}

impl HeightClass {
    /// Class code in the full taxonomy.
    pub fn code(self) -> u8 {
        match self {
            HeightClass::VeryLow => 1,
            HeightClass::Low => 2,
            HeightClass::Medium => 3,
            HeightClass::High => 4,
            HeightClass::VeryHigh => 5,
        }
    }
}

/// Bins an opaque pixel by its 10.8 um brightness temperature. Intervals are
/// half-open, closed on the colder bound: a temperature exactly at `vh` is High.
pub fn classify_height(t108: f64, thr: &PixelThresholds) -> HeightClass {
    if t108 < thr.vh {
        HeightClass::VeryHigh
    } else if t108 < thr.hi {
        HeightClass::High
    } else if t108 < thr.me {
        HeightClass::Medium
    } else if t108 < thr.lo {
        HeightClass::Low
    } else {
        HeightClass::VeryLow
    }
}

/// Tunable thresholds of the semitransparency tests. Defaults are stand-ins;
/// the operational tables are not public.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpacityConfig {
    /// K; BTD(8.7 - 10.8) at or above this marks a pixel semitransparent.
    pub btd_87_108_min: f64,
    /// K; BTD(10.8 - 12.0) at or above this marks a pixel semitransparent.
    pub btd_108_120_min: f64,
    /// Daytime: semitransparent only if 0.6 um reflectance is below this.
    pub day_reflectance_max: f64,
    /// K; BTDs this close below the semitransparent bounds are fractional.
    pub fractional_btd_margin: f64,
    /// K; upper edges of the thin / moderate / thick BTD(10.8 - 12.0) bands.
    pub subtype_breakpoints: [f64; 3],
    /// K per unit of (sec(satellite zenith) - 1) removed from BTD(10.8 - 7.3).
    pub secant_coefficient: f64,
    /// K; corrected BTD(10.8 - 7.3) at or above this puts a lower cloud layer
    /// beneath a semitransparent pixel.
    pub btd_108_73_min: f64,
}

impl Default for OpacityConfig {
    fn default() -> Self {
        OpacityConfig {
            btd_87_108_min: 1.0,
            btd_108_120_min: 1.5,
            day_reflectance_max: 0.4,
            fractional_btd_margin: 0.5,
            subtype_breakpoints: [1.5, 3.5, 6.0],
            secant_coefficient: 2.0,
            btd_108_73_min: 25.0,
        }
    }
}

impl OpacityConfig {
    pub fn validate(&self) -> Result<()> {
        let [a, b, c] = self.subtype_breakpoints;
        if !(a < b && b < c) {
            return Err(Error::invalid("subtype_breakpoints must be strictly increasing"));
        }
        if self.fractional_btd_margin < 0.0 || self.secant_coefficient < 0.0 {
            return Err(Error::invalid("margins must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.day_reflectance_max) {
            return Err(Error::invalid("day_reflectance_max must lie in [0, 1]"));
        }
        let all = [
            self.btd_87_108_min,
            self.btd_108_120_min,
            self.day_reflectance_max,
            self.fractional_btd_margin,
            a,
            b,
            c,
            self.secant_coefficient,
            self.btd_108_73_min,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("opacity thresholds must be finite"));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Opacity {
    Opaque,
    Fractional,
    SemiThin,
    SemiModerate,
    SemiThick,
    SemiAboveLow,
}

impl Opacity {
    /// Full-taxonomy code for non-opaque classes.
    pub fn code(self) -> Option<u8> {
        match self {
            Opacity::Opaque => None,
            Opacity::Fractional => Some(6),
            Opacity::SemiThin => Some(7),
            Opacity::SemiModerate => Some(8),
            Opacity::SemiThick => Some(9),
            Opacity::SemiAboveLow => Some(10),
        }
    }
}

/// A pixel lacking a channel its illumination regime needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Unclassifiable {
    pub missing: Channel,
}

/// Satellite zenith angles are clamped here before taking the secant.
const MAX_SECANT_ZENITH_DEG: f64 = 85.0;

/// Opacity of a pixel already known to be cloudy. Twilight uses the night rules.
pub fn classify_opacity(
    stack: &ChannelStack,
    geo: &GeoContext,
    cfg: &OpacityConfig,
    idx: usize,
) -> Result<Opacity, Unclassifiable> {
    let get = |c: Channel| stack.value(c, idx).ok_or(Unclassifiable { missing: c });
    let t87 = get(Channel::Ir87)?;
    let t108 = get(Channel::Ir108)?;
    let t120 = get(Channel::Ir120)?;
    let reflectance = match geo.illumination(idx) {
        Illumination::Day => Some(get(Channel::Vis06)?),
        Illumination::Twilight | Illumination::Night => None,
    };

    let btd_87_108 = t87 - t108;
    let btd_108_120 = t108 - t120;
    let btd_met = btd_87_108 >= cfg.btd_87_108_min || btd_108_120 >= cfg.btd_108_120_min;
    let dim_enough = reflectance.is_none_or(|r| r < cfg.day_reflectance_max);

    if btd_met && dim_enough {
        if let Some(t73) = stack.value(Channel::Wv73, idx) {
            let zenith = geo.satellite_zenith(idx).min(MAX_SECANT_ZENITH_DEG).to_radians();
            let corrected = (t108 - t73) - cfg.secant_coefficient * (1.0 / zenith.cos() - 1.0);
            if corrected >= cfg.btd_108_73_min {
                return Ok(Opacity::SemiAboveLow);
            }
        }
        let [thin, moderate, _thick] = cfg.subtype_breakpoints;
        return Ok(if btd_108_120 < thin {
            Opacity::SemiThin
        } else if btd_108_120 < moderate {
            Opacity::SemiModerate
        } else {
            Opacity::SemiThick
        });
    }

    let near = btd_87_108 >= cfg.btd_87_108_min - cfg.fractional_btd_margin
        || btd_108_120 >= cfg.btd_108_120_min - cfg.fractional_btd_margin;
    if !btd_met && near {
        Ok(Opacity::Fractional)
    } else {
        Ok(Opacity::Opaque)
    }
}

/// Labels one observation in the full taxonomy. `cloud_mask` marks the pixels
/// an upstream detector found cloudy; everything else is class 0.
pub fn segment_frame(
    stack: &ChannelStack,
    nwp: &NwpFields,
    geo: &GeoContext,
    cfg: &OpacityConfig,
    cloud_mask: &[bool],
) -> Result<LabelGrid> {
    let (h, w) = stack.dims();
    if geo.dims() != (h, w) || (nwp.height, nwp.width) != (h, w) || cloud_mask.len() != h * w {
        return Err(Error::shape(format!(
            "segmentation inputs disagree: stack {h}x{w}, geometry {:?}, NWP {}x{}, mask {}",
            geo.dims(),
            nwp.height,
            nwp.width,
            cloud_mask.len()
        )));
    }
    cfg.validate()?;
    let thresholds = compute_height_thresholds(nwp)?;
    let labels = (0..h * w)
        .map(|i| {
            if !cloud_mask[i] {
                return 0;
            }
            match classify_opacity(stack, geo, cfg, i) {
                Err(_) => 0,
                Ok(Opacity::Opaque) => {
                    // ir108 presence was checked by classify_opacity.
                    let t108 = stack.value(Channel::Ir108, i).unwrap_or(f64::NAN);
                    classify_height(t108, &thresholds.pixels[i]).code()
                }
                Ok(other) => other.code().unwrap_or(0),
            }
        })
        .collect();
    LabelGrid::new(h, w, labels, Taxonomy::Full11, stack.timestamp())
}

/// Full-taxonomy code to reduced code: low = {1, 2, 6}, medium = {3},
/// high = {4, 5, 7, 8, 9, 10}.
pub const REDUCTION: [u8; 11] = [0, 1, 1, 2, 3, 3, 1, 3, 3, 3, 3];

pub fn reduce_to_four(grid: &LabelGrid) -> Result<LabelGrid> {
    if grid.taxonomy() != Taxonomy::Full11 {
        return Err(Error::invalid("reduce_to_four expects a full-taxonomy grid"));
    }
    let labels = grid.labels().iter().map(|&l| REDUCTION[l as usize]).collect();
    LabelGrid::new(grid.height(), grid.width(), labels, Taxonomy::Reduced4, grid.timestamp())
}

pub fn reduce_sequence(seq: &LabelSequence) -> Result<LabelSequence> {
    seq.try_map_frames(reduce_to_four)
}
