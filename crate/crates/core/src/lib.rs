//! Cloud-type nowcasting from geostationary imagery: threshold segmentation
//! into layered cloud types, TV-L1 optical-flow extrapolation with a
//! persistence baseline, and categorical forecast verification.

pub mod cli;
pub mod error;
pub mod grids;
pub mod nowcast;
pub mod pipeline;
pub mod raster;
pub mod segmentation;
pub mod verify;

pub use error::{Error, Result};
pub use grids::{LabelGrid, LabelSequence, Taxonomy};
pub use nowcast::{FlowField, ForecastSet, TvL1Params};
