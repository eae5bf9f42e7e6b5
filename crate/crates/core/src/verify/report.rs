use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quality::{psnr_frames, ssim_frames};
use super::{brier_skill_score, macro_average, one_hot, ratio_per_class, ProbForecast};
use crate::error::{Error, Result};
use crate::grids::{LabelGrid, Taxonomy};
use crate::nowcast::ForecastSet;

/// Steps (1-based) at the one- to four-hour lead times.
pub const HOURLY_STEPS: [usize; 4] = [4, 8, 12, 16];

/// Scores of one model over one or more forecast origins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mean_accuracy: f64,
    pub per_class_accuracy: Vec<Option<f64>>,
    pub per_step_accuracy: Vec<f64>,
    /// Accuracy at the 1/2/3/4-hour leads, absent past the forecast length.
    pub hourly_accuracy: Vec<Option<f64>>,
    pub frequency_bias: f64,
    pub brier_score: f64,
    pub brier_skill_score: Option<f64>,
    pub ssim: f64,
    pub psnr: f64,
    pub forecasts: usize,
}

impl MetricsReport {
    /// `step,accuracy` rows with a header line.
    pub fn per_step_csv(&self) -> String {
        let mut out = String::from("step,accuracy\r\n");
        for (k, a) in self.per_step_accuracy.iter().enumerate() {
            out.push_str(&format!("{},{a}\r\n", k + 1));
        }
        out
    }
}

/// Pools counts and squared errors over many (forecast, truth) pairs so that
/// every pixel-step carries the same weight in the final report.
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    taxonomy: Option<Taxonomy>,
    steps: usize,
    step_hits: Vec<usize>,
    step_total: Vec<usize>,
    class_hits: Vec<usize>,
    predicted: Vec<usize>,
    observed: Vec<usize>,
    squared_error: f64,
    reference_squared_error: Option<f64>,
    cells: f64,
    ssim_sum: f64,
    psnr_sum: f64,
    frames: usize,
    forecasts: usize,
}

impl MetricsAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one forecast. `reference`, when given, must cover the same truth;
    /// skill is reported only if every added forecast had one.
    pub fn add(&mut self, pred: &ForecastSet, truth: &[LabelGrid], reference: Option<&ForecastSet>) -> Result<()> {
        let model = ProbForecast::from_tensor(pred.probability_tensor(), pred.frames(), truth)?;
        let reference = match reference {
            Some(r) => Some(ProbForecast::from_tensor(r.probability_tensor(), r.frames(), truth)?),
            None => None,
        };
        self.add_scored(pred.frames(), truth, &model, reference.as_ref())
    }

    /// Adds deterministic predictions given as bare frames, scored as one-hot.
    pub fn add_frames(&mut self, pred: &[LabelGrid], truth: &[LabelGrid], reference: Option<&[LabelGrid]>) -> Result<()> {
        let model = ProbForecast::from_tensor(one_hot(pred), pred, truth)?;
        let reference = match reference {
            Some(r) => Some(ProbForecast::from_tensor(one_hot(r), r, truth)?),
            None => None,
        };
        self.add_scored(pred, truth, &model, reference.as_ref())
    }

    fn add_scored(
        &mut self,
        pred: &[LabelGrid],
        truth: &[LabelGrid],
        model: &ProbForecast,
        reference: Option<&ProbForecast>,
    ) -> Result<()> {
        let taxonomy = pred[0].taxonomy();
        match self.taxonomy {
            None => {
                let m = taxonomy.cardinality();
                self.taxonomy = Some(taxonomy);
                self.steps = pred.len();
                self.step_hits = vec![0; self.steps];
                self.step_total = vec![0; self.steps];
                self.class_hits = vec![0; m];
                self.predicted = vec![0; m];
                self.observed = vec![0; m];
                self.reference_squared_error = Some(0.0);
            }
            Some(t) if t != taxonomy || self.steps != pred.len() => {
                return Err(Error::shape("forecasts differ in taxonomy or length"));
            }
            Some(_) => {}
        }

        for (t, (p, o)) in pred.iter().zip(truth).enumerate() {
            for (&a, &b) in p.labels().iter().zip(o.labels()) {
                self.predicted[a as usize] += 1;
                self.observed[b as usize] += 1;
                if a == b {
                    self.class_hits[b as usize] += 1;
                    self.step_hits[t] += 1;
                }
            }
            self.step_total[t] += o.len();
        }
        let m = taxonomy.cardinality() as f64;
        self.squared_error += model.squared_error_sum() / m;
        self.reference_squared_error = match (self.reference_squared_error, reference) {
            (Some(acc), Some(r)) => Some(acc + r.squared_error_sum() / m),
            _ => None,
        };
        self.cells += (model.steps() * model.pixels()) as f64;

        let quality = pred
            .par_iter()
            .zip(truth)
            .map(|(p, o)| Ok((ssim_frames(p, o)?, psnr_frames(p, o)?)))
            .collect::<Result<Vec<_>>>()?;
        for (s, q) in quality {
            self.ssim_sum += s;
            self.psnr_sum += q;
        }
        self.frames += truth.len();
        self.forecasts += 1;
        Ok(())
    }

    pub fn finish(&self) -> Result<MetricsReport> {
        if self.forecasts == 0 {
            return Err(Error::invalid("no forecasts to score"));
        }
        let per_step_accuracy: Vec<f64> = self
            .step_hits
            .iter()
            .zip(&self.step_total)
            .map(|(&h, &n)| h as f64 / n as f64)
            .collect();
        let total: usize = self.step_total.iter().sum();
        let brier_score = self.squared_error / self.cells;
        Ok(MetricsReport {
            mean_accuracy: self.step_hits.iter().sum::<usize>() as f64 / total as f64,
            per_class_accuracy: ratio_per_class(&self.class_hits, &self.observed),
            hourly_accuracy: HOURLY_STEPS
                .iter()
                .map(|&s| per_step_accuracy.get(s - 1).copied())
                .collect(),
            per_step_accuracy,
            frequency_bias: macro_average(&ratio_per_class(&self.predicted, &self.observed))
                .expect("every pixel observes some class"),
            brier_score,
            brier_skill_score: self
                .reference_squared_error
                .and_then(|r| brier_skill_score(brier_score, r / self.cells)),
            ssim: self.ssim_sum / self.frames as f64,
            psnr: self.psnr_sum / self.frames as f64,
            forecasts: self.forecasts,
        })
    }
}

/// Full report for a single forecast.
pub fn evaluate(pred: &ForecastSet, truth: &[LabelGrid], reference: Option<&ForecastSet>) -> Result<MetricsReport> {
    let mut acc = MetricsAccumulator::new();
    acc.add(pred, truth, reference)?;
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grids::{cadence, tests::t0};
    use crate::nowcast::persistence_forecast;
    use crate::verify::{accuracy_report, brier_score, frequency_bias};

    fn frame(labels: &[u8], step: i32) -> LabelGrid {
        LabelGrid::new(4, 4, labels.to_vec(), Taxonomy::Reduced4, t0() + cadence() * step).unwrap()
    }

    fn pattern(seed: u8) -> Vec<u8> {
        (0..16u8).map(|i| (i.wrapping_mul(7).wrapping_add(seed) / 3) % 4).collect()
    }

    #[test]
    fn single_forecast_matches_component_metrics() {
        let last = frame(&pattern(0), 0);
        let truth: Vec<LabelGrid> = (1..=16).map(|k| frame(&pattern(k as u8), k)).collect();
        let pred = persistence_forecast(&last, 16).unwrap();
        let r = evaluate(&pred, &truth, Some(&pred)).unwrap();
        let acc = accuracy_report(&pred, &truth).unwrap();
        assert_eq!(r.mean_accuracy, acc.mean);
        assert_eq!(r.per_step_accuracy, acc.per_step);
        assert_eq!(r.per_class_accuracy, acc.per_class);
        assert_eq!(r.frequency_bias, frequency_bias(pred.frames(), &truth).unwrap());
        let bs = brier_score(&ProbForecast::from_forecast(&pred, &truth).unwrap());
        assert!((r.brier_score - bs).abs() < 1e-15);
        assert!((r.brier_score - (1.0 - r.mean_accuracy) / 2.0).abs() < 1e-12);
        assert_eq!(r.brier_skill_score, Some(0.0));
        assert_eq!(r.hourly_accuracy.len(), 4);
        assert_eq!(r.hourly_accuracy[0], Some(r.per_step_accuracy[3]));
    }

    #[test]
    fn skill_absent_without_reference_or_with_perfect_reference() {
        let g = frame(&pattern(1), 0);
        let truth: Vec<LabelGrid> = (1..=2).map(|k| g.with_timestamp(t0() + cadence() * k).unwrap()).collect();
        let pred = persistence_forecast(&g, 2).unwrap();
        assert_eq!(evaluate(&pred, &truth, None).unwrap().brier_skill_score, None);
        assert_eq!(evaluate(&pred, &truth, Some(&pred)).unwrap().brier_skill_score, None);
        assert_eq!(evaluate(&pred, &truth, None).unwrap().hourly_accuracy, vec![None; 4]);
    }

    #[test]
    fn csv_layout() {
        let g = frame(&pattern(2), 0);
        let truth = vec![g.with_timestamp(t0() + cadence()).unwrap()];
        let r = evaluate(&persistence_forecast(&g, 1).unwrap(), &truth, None).unwrap();
        assert_eq!(r.per_step_csv(), "step,accuracy\r\n1,1\r\n");
    }
}
