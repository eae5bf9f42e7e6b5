//! Forecasters: optical-flow extrapolation and persistence, plus the
//! hyperparameter search for the flow solver.

mod forecast;
mod tune;
mod tvl1;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{LabelGrid, Taxonomy};
use crate::raster::Plane;

pub use forecast::{invert_and_extrapolate, invert_and_extrapolate_with, persistence_forecast, ForecastSet, HORIZON};
pub use tune::{tune_tvl1, CombinationScore, ParamGrid, TuneConfig, TuningReport, REFERENCE_LATTICE_SIZE};
pub use tvl1::{estimate_flow, TvL1Params, MIN_PYRAMID_SIDE};

/// Per-pixel displacement in pixels per frame; `u` along columns, `v` along rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowField {
    height: usize,
    width: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn new(height: usize, width: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        let n = height * width;
        if n == 0 || u.len() != n || v.len() != n {
            return Err(Error::shape(format!("flow planes do not match {height}x{width}")));
        }
        if u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::invalid("flow contains non-finite values"));
        }
        Ok(FlowField { height, width, u, v })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        FlowField {
            height,
            width,
            u: vec![0.0; height * width],
            v: vec![0.0; height * width],
        }
    }

    /// The same displacement everywhere.
    pub fn uniform(height: usize, width: usize, u: f64, v: f64) -> Self {
        FlowField {
            height,
            width,
            u: vec![u; height * width],
            v: vec![v; height * width],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn max_magnitude(&self) -> f64 {
        self.u.iter().zip(&self.v).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> (f64, f64) {
        let n = self.u.len() as f64;
        (self.u.iter().sum::<f64>() / n, self.v.iter().sum::<f64>() / n)
    }
}

/// Maps reduced classes onto [0, 1] (code / 3) and optionally smooths.
pub fn to_intensity(grid: &LabelGrid, sigma: f64) -> Result<Plane> {
    if grid.taxonomy() != Taxonomy::Reduced4 {
        return Err(Error::invalid("flow intensities need the reduced taxonomy"));
    }
    let plane = Plane::new(
        grid.height(),
        grid.width(),
        grid.labels().iter().map(|&l| l as f64 / 3.0).collect(),
    )?;
    Ok(plane.gaussian_blur(sigma))
}

/// Nearest reduced class for an intensity, clamped to 0..=3.
pub fn round_to_class(intensity: f64) -> u8 {
    (intensity * 3.0).round().clamp(0.0, 3.0) as u8
}
