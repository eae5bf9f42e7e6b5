use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{invert_and_extrapolate, TvL1Params, HORIZON};
use crate::error::{Error, Result};
use crate::grids::{cadence, format_timestamp, LabelSequence, Taxonomy};
use crate::verify::accuracy_report;

/// Size of the reference hyperparameter search.
pub const REFERENCE_LATTICE_SIZE: usize = 360;

/// Cartesian grid over five of the solver parameters; the rest come from `base`.
/// Enumeration order is lambda (outermost), theta, warps, nscales,
/// median_filter_radius (innermost).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamGrid {
    pub base: TvL1Params,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub warps: Vec<usize>,
    pub nscales: Vec<usize>,
    pub median_filter_radius: Vec<usize>,
}

impl Default for ParamGrid {
    /// 5 x 4 x 3 x 3 x 2 = 360 points around the defaults.
    fn default() -> Self {
        ParamGrid {
            base: TvL1Params::default(),
            lambda: vec![0.05, 0.10, 0.15, 0.20, 0.25],
            theta: vec![0.2, 0.3, 0.4, 0.5],
            warps: vec![3, 5, 7],
            nscales: vec![3, 4, 5],
            median_filter_radius: vec![0, 2],
        }
    }
}

impl ParamGrid {
    pub fn len(&self) -> usize {
        self.lambda.len() * self.theta.len() * self.warps.len() * self.nscales.len() * self.median_filter_radius.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn combinations(&self) -> Vec<TvL1Params> {
        let mut out = Vec::with_capacity(self.len());
        for &lambda in &self.lambda {
            for &theta in &self.theta {
                for &warps in &self.warps {
                    for &nscales in &self.nscales {
                        for &median_filter_radius in &self.median_filter_radius {
                            out.push(TvL1Params {
                                lambda,
                                theta,
                                warps,
                                nscales,
                                median_filter_radius,
                                ..self.base
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneConfig {
    /// Origin times drawn from the training sequence.
    pub origins: usize,
    pub seed: u64,
    pub steps: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            origins: 20,
            seed: 0,
            steps: HORIZON,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationScore {
    pub index: usize,
    pub params: TvL1Params,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub objective: String,
    pub lattice_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub seed: u64,
    pub steps: usize,
    pub origins: Vec<String>,
    pub best_index: usize,
    pub best_mean_accuracy: f64,
    pub best_params: TvL1Params,
    pub scores: Vec<CombinationScore>,
}

/// Indices whose previous frame and full forecast window are present and contiguous.
fn usable_origins(seq: &LabelSequence, steps: usize) -> Vec<usize> {
    let ts = seq.timestamps();
    (1..seq.len().saturating_sub(steps))
        .filter(|&t| ts[t - 1..=t + steps].windows(2).all(|w| w[1] - w[0] == cadence()))
        .collect()
}

/// Scores every combination by mean forecast accuracy over origins sampled
/// (deterministically, from `cfg.seed`) from `train` and returns the best.
/// Ties go to the lower combination index.
pub fn tune_tvl1(train: &LabelSequence, combinations: &[TvL1Params], cfg: &TuneConfig) -> Result<(TvL1Params, TuningReport)> {
    if combinations.is_empty() {
        return Err(Error::invalid("empty parameter lattice"));
    }
    if train.taxonomy() != Taxonomy::Reduced4 {
        return Err(Error::invalid("tuning runs on reduced-taxonomy sequences"));
    }
    if cfg.origins == 0 {
        return Err(Error::invalid("at least one origin is required"));
    }
    for p in combinations {
        p.validate()?;
    }
    let warning = (combinations.len() != REFERENCE_LATTICE_SIZE).then(|| {
        let msg = format!(
            "lattice has {} combinations, the reference search uses {REFERENCE_LATTICE_SIZE}",
            combinations.len()
        );
        log::warn!("{msg}");
        msg
    });

    let candidates = usable_origins(train, cfg.steps);
    if candidates.len() < cfg.origins {
        return Err(Error::InsufficientFrames {
            needed: cfg.origins,
            available: candidates.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), cfg.origins)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort_unstable();

    let frames = train.frames();
    let scores = combinations
        .par_iter()
        .enumerate()
        .map(|(index, params)| {
            let mut total = 0.0;
            for &t in &picked {
                let forecast = invert_and_extrapolate(&frames[t], &frames[t - 1], params, cfg.steps)?;
                let truth = &frames[t + 1..=t + cfg.steps];
                total += accuracy_report(&forecast, truth)?.mean;
            }
            Ok(CombinationScore {
                index,
                params: *params,
                mean_accuracy: total / picked.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut best = 0;
    for s in &scores {
        if s.mean_accuracy > scores[best].mean_accuracy {
            best = s.index;
        }
    }
    let report = TuningReport {
        objective: "mean_accuracy".into(),
        lattice_size: combinations.len(),
        warning,
        seed: cfg.seed,
        steps: cfg.steps,
        origins: picked.iter().map(|&t| format_timestamp(&frames[t].timestamp())).collect(),
        best_index: best,
        best_mean_accuracy: scores[best].mean_accuracy,
        best_params: scores[best].params,
        scores,
    };
    Ok((report.best_params, report))
}
