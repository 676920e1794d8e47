//! Detection and background-quality metrics.

use log::info;
use serde::Serialize;

use crate::engine::BackgroundFrame;
use crate::error::{Error, Result};
use crate::io::to_gray;
use crate::mrf::ForegroundMask;
use crate::pipeline::{extract_selected, PipelineConfig};
use crate::selection::select;
use crate::tensor::DenseTensor;

/// Pixel counts with foreground as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub true_neg: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            true_pos: self.true_pos + o.true_pos,
            false_pos: self.false_pos + o.false_pos,
            true_neg: self.true_neg + o.true_neg,
            false_neg: self.false_neg + o.false_neg,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FMeasure {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

pub fn confusion(pred: &ForegroundMask, truth: &ForegroundMask) -> Result<ConfusionCounts> {
    if !pred.same_shape(truth) {
        return Err(Error::invalid(format!(
            "prediction is {}x{} but truth is {}x{}",
            pred.height(),
            pred.width(),
            truth.height(),
            truth.width()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        match (p, t) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Precision, recall and their harmonic mean; every `0/0` is taken as 0.
pub fn f_measure(c: &ConfusionCounts) -> FMeasure {
    let tp = c.true_pos as f64;
    let precision = ratio_or_zero(tp, tp + c.false_pos as f64);
    let recall = ratio_or_zero(tp, tp + c.false_neg as f64);
    let f = ratio_or_zero(2.0 * precision * recall, precision + recall);
    FMeasure {
        precision,
        recall,
        f,
    }
}

/// `‖result − standard‖_F / ‖standard‖_F`.
pub fn distance_ratio(result: &BackgroundFrame, standard: &BackgroundFrame) -> Result<f64> {
    if result.tensor().shape() != standard.tensor().shape() {
        return Err(Error::invalid(format!(
            "background shapes differ: {:?} vs {:?}",
            result.tensor().shape(),
            standard.tensor().shape()
        )));
    }
    let norm = standard.tensor().norms().frobenius;
    if norm == 0.0 {
        return Err(Error::invalid("standard background has zero norm"));
    }
    let diff: f64 = result
        .data()
        .iter()
        .zip(standard.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(diff / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceRatioPoint {
    pub n_frames: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub standard_n: usize,
    /// Frames actually used for the standard background.
    pub standard_indices: Vec<usize>,
    pub points: Vec<DistanceRatioPoint>,
}

/// Distance ratio of the background extracted from `n` selected frames
/// against the one from `standard_n` frames, for each `n`.
///
/// Selection ranks frames independently of how many are kept, so it runs
/// once and each `n` takes the leading `n` of the ranking.
pub fn sweep_n_frames(
    frames: &DenseTensor,
    n_values: &[usize],
    standard_n: usize,
    cfg: &PipelineConfig,
) -> Result<SweepReport> {
    cfg.validate()?;
    if n_values.is_empty() {
        return Err(Error::invalid("no frame counts to sweep"));
    }
    if n_values.contains(&0) {
        return Err(Error::invalid("frame counts must be positive"));
    }
    let max_n = n_values.iter().copied().max().unwrap_or(0);
    if standard_n < max_n {
        return Err(Error::invalid(format!(
            "standard_n ({standard_n}) must be at least the largest swept count ({max_n})"
        )));
    }
    let mut sel_cfg = cfg.selection;
    sel_cfg.n_select = standard_n;
    let ranking = select(&to_gray(frames)?, &sel_cfg)?.selected_indices;
    if ranking.len() < standard_n {
        return Err(Error::Data(format!(
            "only {} frames are selectable, the standard needs {standard_n}",
            ranking.len()
        )));
    }
    let (standard, _) = extract_selected(frames, &ranking, &cfg.engine)?;
    let points = n_values
        .iter()
        .map(|&n| {
            let (bg, _) = extract_selected(frames, &ranking[..n], &cfg.engine)?;
            let ratio = distance_ratio(&bg, &standard)?;
            info!("n = {n}: distance ratio {ratio:.6}");
            Ok(DistanceRatioPoint { n_frames: n, ratio })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        standard_n,
        standard_indices: ranking,
        points,
    })
}
