//! End-to-end driver: grayscale conversion, frame selection, background
//! extraction on the selected frames, and per-frame segmentation.

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{extract_background, BackgroundFrame, BackgroundResult, EngineConfig};
use crate::error::{Error, Result};
use crate::io::{frame_slice, gather_frames, to_gray};
use crate::mrf::{detect, ForegroundMask, MrfSettings};
use crate::selection::{select, SelectionConfig, SelectionResult};
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub selection: SelectionConfig,
    pub engine: EngineConfig,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.selection.validate()?;
        self.engine.validate()
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub grayscale: f64,
    pub selection: f64,
    pub extraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Extraction {
    pub selection: SelectionResult,
    #[serde(skip)]
    pub background: BackgroundFrame,
    /// Engine diagnostics; `None` when fewer than two frames were selected
    /// and the background is a selected frame verbatim.
    pub engine: Option<BackgroundResult>,
    pub timings: StageTimings,
}

/// Runs selection on `frames` (`(h, w, c, n)`) and extracts the background
/// from the selected frames.
pub fn extract(frames: &DenseTensor, cfg: &PipelineConfig) -> Result<Extraction> {
    cfg.validate()?;
    let n = check_sequence(frames)?;

    let t0 = Instant::now();
    if n == 1 {
        warn!("single-frame input; the background is that frame");
        let background = BackgroundFrame::new(frame_slice(frames, 0)?)?;
        return Ok(Extraction {
            selection: SelectionResult {
                useful_indices: vec![0],
                selected_indices: vec![0],
                scores: vec![0.0],
            },
            background,
            engine: None,
            timings: StageTimings::default(),
        });
    }
    let gray = to_gray(frames)?;
    let grayscale = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let mut selection = select(&gray, &cfg.selection)?;
    if selection.selected_indices.is_empty() {
        warn!("no useful frames found; falling back to the whole sequence");
        selection.selected_indices = (0..n).take(cfg.selection.n_select).collect();
    }
    let selection_secs = t1.elapsed().as_secs_f64();
    info!(
        "selected {} of {} frames ({} useful)",
        selection.selected_indices.len(),
        n,
        selection.useful_indices.len()
    );

    let t2 = Instant::now();
    let (background, engine) = extract_selected(frames, &selection.selected_indices, &cfg.engine)?;
    let extraction = t2.elapsed().as_secs_f64();

    Ok(Extraction {
        selection,
        background,
        engine,
        timings: StageTimings {
            grayscale,
            selection: selection_secs,
            extraction,
        },
    })
}

/// Background from an explicit frame subset. A single index yields that
/// frame unchanged.
pub fn extract_selected(
    frames: &DenseTensor,
    indices: &[usize],
    cfg: &EngineConfig,
) -> Result<(BackgroundFrame, Option<BackgroundResult>)> {
    match indices {
        [] => Err(Error::invalid("no frames selected")),
        [k] => Ok((BackgroundFrame::new(frame_slice(frames, *k)?)?, None)),
        _ => {
            let subset = gather_frames(frames, indices)?;
            let result = extract_background(&subset, cfg)?;
            Ok((result.background.clone(), Some(result)))
        }
    }
}

/// Segments every frame against `background`, in parallel. The output is
/// ordered like the input frames.
pub fn detect_all(
    frames: &DenseTensor,
    background: &BackgroundFrame,
    settings: &MrfSettings,
) -> Result<Vec<ForegroundMask>> {
    settings.validate()?;
    let n = check_sequence(frames)?;
    let s = frames.shape();
    if (s[0], s[1], s[2]) != (background.height(), background.width(), background.channels()) {
        return Err(Error::invalid(format!(
            "frames are {}x{}x{} but the background is {}x{}x{}",
            s[0],
            s[1],
            s[2],
            background.height(),
            background.width(),
            background.channels()
        )));
    }
    (0..n)
        .into_par_iter()
        .map(|k| detect(&frame_slice(frames, k)?, background, settings))
        .collect()
}

fn check_sequence(frames: &DenseTensor) -> Result<usize> {
    if frames.order() != 4 {
        return Err(Error::invalid(format!(
            "expected a (height, width, channel, frame) tensor, got order {}",
            frames.order()
        )));
    }
    let n = frames.shape()[3];
    if n == 0 {
        return Err(Error::invalid("empty frame sequence"));
    }
    Ok(n)
}
