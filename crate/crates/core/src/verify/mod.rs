//! Forecast verification: categorical accuracy breakdowns, frequency bias,
//! multi-class Brier score and skill score, SSIM/PSNR, plus the synthetic
//! scene generator and flow endpoint error used as ground-truth oracles.

mod quality;
mod report;
mod synthetic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{format_timestamp, LabelGrid};
use crate::nowcast::{FlowField, ForecastSet};

pub use quality::{frame_intensity, psnr, psnr_frames, ssim, ssim_frames, PSNR_CAP_DB, SSIM_SIGMA, SSIM_WINDOW};
pub use report::{evaluate, MetricsAccumulator, MetricsReport, HOURLY_STEPS};
pub use synthetic::{generate_synthetic, FieldKind, FlowKind, SyntheticSpec};

/// Accuracy fractions; `per_class[k]` is `None` when class `k` never occurs in the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub mean: f64,
    pub per_class: Vec<Option<f64>>,
    pub per_step: Vec<f64>,
}

pub(crate) fn check_pair(pred: &[LabelGrid], truth: &[LabelGrid]) -> Result<()> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::shape(format!(
            "{} predicted frames against {} observed",
            pred.len(),
            truth.len()
        )));
    }
    for (k, (p, t)) in pred.iter().zip(truth).enumerate() {
        if !p.same_shape(t) {
            return Err(Error::shape(format!(
                "step {k}: prediction {:?} {} vs truth {:?} {}",
                p.dims(),
                p.taxonomy().name(),
                t.dims(),
                t.taxonomy().name()
            )));
        }
        if p.timestamp() != t.timestamp() {
            return Err(Error::Timestamps(format!(
                "step {k}: prediction valid at {}, truth observed at {}",
                format_timestamp(&p.timestamp()),
                format_timestamp(&t.timestamp())
            )));
        }
        if !p.same_shape(&pred[0]) {
            return Err(Error::shape("prediction frames differ in shape"));
        }
    }
    Ok(())
}

pub fn accuracy_report(pred: &ForecastSet, truth: &[LabelGrid]) -> Result<AccuracyReport> {
    accuracy_of_frames(pred.frames(), truth)
}

pub fn accuracy_of_frames(pred: &[LabelGrid], truth: &[LabelGrid]) -> Result<AccuracyReport> {
    check_pair(pred, truth)?;
    let classes = pred[0].taxonomy().cardinality();
    let mut hits = vec![0usize; classes];
    let mut seen = vec![0usize; classes];
    let mut per_step = Vec::with_capacity(pred.len());
    let mut total_hits = 0usize;
    let mut total = 0usize;
    for (p, t) in pred.iter().zip(truth) {
        let mut step_hits = 0usize;
        for (&a, &b) in p.labels().iter().zip(t.labels()) {
            seen[b as usize] += 1;
            if a == b {
                hits[b as usize] += 1;
                step_hits += 1;
            }
        }
        per_step.push(step_hits as f64 / t.len() as f64);
        total_hits += step_hits;
        total += t.len();
    }
    Ok(AccuracyReport {
        mean: total_hits as f64 / total as f64,
        per_class: hits
            .iter()
            .zip(&seen)
            .map(|(&h, &s)| (s > 0).then(|| h as f64 / s as f64))
            .collect(),
        per_step,
    })
}

/// Predicted over observed count for every class; `None` where the class is
/// never observed.
pub fn per_class_frequency_bias(pred: &[LabelGrid], truth: &[LabelGrid]) -> Result<Vec<Option<f64>>> {
    check_pair(pred, truth)?;
    let classes = pred[0].taxonomy().cardinality();
    let mut predicted = vec![0usize; classes];
    let mut observed = vec![0usize; classes];
    for (p, t) in pred.iter().zip(truth) {
        for (&a, &b) in p.labels().iter().zip(t.labels()) {
            predicted[a as usize] += 1;
            observed[b as usize] += 1;
        }
    }
    Ok(ratio_per_class(&predicted, &observed))
}

pub(crate) fn ratio_per_class(predicted: &[usize], observed: &[usize]) -> Vec<Option<f64>> {
    predicted
        .iter()
        .zip(observed)
        .map(|(&p, &o)| (o > 0).then(|| p as f64 / o as f64))
        .collect()
}

pub(crate) fn macro_average(per_class: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = per_class.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

/// Indicator tensor laid out as frames x classes x pixels.
pub(crate) fn one_hot(frames: &[LabelGrid]) -> Vec<f64> {
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let (m, n) = (first.taxonomy().cardinality(), first.len());
    let mut y = vec![0.0; frames.len() * m * n];
    for (t, frame) in frames.iter().enumerate() {
        for (i, &l) in frame.labels().iter().enumerate() {
            y[t * m * n + l as usize * n + i] = 1.0;
        }
    }
    y
}

/// Macro average of the per-class bias over the classes present in the truth.
/// Above 1 means the model over-forecasts.
pub fn frequency_bias(pred: &[LabelGrid], truth: &[LabelGrid]) -> Result<f64> {
    macro_average(&per_class_frequency_bias(pred, truth)?).ok_or_else(|| Error::invalid("no class present in the truth"))
}

/// Probabilistic forecast `f` and one-hot outcomes `y`, both laid out as
/// steps x classes x pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbForecast {
    steps: usize,
    classes: usize,
    pixels: usize,
    f: Vec<f64>,
    y: Vec<f64>,
}

const NORMALIZATION_TOLERANCE: f64 = 1e-9;

impl ProbForecast {
    pub fn new(steps: usize, classes: usize, pixels: usize, f: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = steps * classes * pixels;
        if n == 0 || f.len() != n || y.len() != n {
            return Err(Error::shape(format!(
                "tensors of {} and {} values for {steps} x {classes} x {pixels}",
                f.len(),
                y.len()
            )));
        }
        for t in 0..steps {
            for i in 0..pixels {
                let at = |k: usize| t * classes * pixels + k * pixels + i;
                let sum: f64 = (0..classes).map(|k| f[at(k)]).sum();
                if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE || (0..classes).any(|k| !(0.0..=1.0).contains(&f[at(k)])) {
                    return Err(Error::invalid(format!(
                        "forecast probabilities at step {t}, pixel {i} do not form a distribution (sum {sum})"
                    )));
                }
                let ones = (0..classes).filter(|&k| y[at(k)] == 1.0).count();
                let zeros = (0..classes).filter(|&k| y[at(k)] == 0.0).count();
                if ones != 1 || zeros != classes - 1 {
                    return Err(Error::invalid(format!("outcome at step {t}, pixel {i} is not one-hot")));
                }
            }
        }
        Ok(ProbForecast {
            steps,
            classes,
            pixels,
            f,
            y,
        })
    }

    /// Pairs a forecast's probability tensor with the one-hot truth.
    pub fn from_forecast(pred: &ForecastSet, truth: &[LabelGrid]) -> Result<Self> {
        Self::from_tensor(pred.probability_tensor(), pred.frames(), truth)
    }

    pub(crate) fn from_tensor(f: Vec<f64>, pred: &[LabelGrid], truth: &[LabelGrid]) -> Result<Self> {
        check_pair(pred, truth)?;
        Self::new(truth.len(), truth[0].taxonomy().cardinality(), truth[0].len(), f, one_hot(truth))
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Sum over all entries of (f - y)^2.
    pub(crate) fn squared_error_sum(&self) -> f64 {
        self.f.iter().zip(&self.y).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Squared error summed over classes, scaled by 1/M and 1/N, then averaged
/// over pixels.
pub fn brier_score(pf: &ProbForecast) -> f64 {
    pf.squared_error_sum() / (pf.classes * pf.steps * pf.pixels) as f64
}

/// `1 - model / reference`; `None` when the reference score is not positive.
pub fn brier_skill_score(bs_model: f64, bs_reference: f64) -> Option<f64> {
    (bs_reference > 0.0 && bs_reference.is_finite()).then(|| 1.0 - bs_model / bs_reference)
}

/// Mean Euclidean distance between two flow fields.
pub fn endpoint_error(estimated: &FlowField, truth: &FlowField) -> Result<f64> {
    if estimated.dims() != truth.dims() {
        return Err(Error::shape(format!(
            "flow fields differ: {:?} vs {:?}",
            estimated.dims(),
            truth.dims()
        )));
    }
    let n = estimated.u().len() as f64;
    let sum: f64 = (0..estimated.u().len())
        .map(|i| (estimated.u()[i] - truth.u()[i]).hypot(estimated.v()[i] - truth.v()[i]))
        .sum();
    Ok(sum / n)
}
