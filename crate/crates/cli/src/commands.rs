use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use backdrop::engine::{AdmMode, Projection};
use backdrop::eval::{sweep_n_frames, FMeasure, SweepReport};
use backdrop::io::{
    frame_slice, gather_frames, list_images, load_background, load_mask, load_sequence, read_tensor, save_frame,
    write_tensor, FrameSequenceSpec, TENSOR_MAGIC,
};
use backdrop::pipeline::StageTimings;
use backdrop::selection::Direction;
use backdrop::synth::{generate, max_occlusion_fraction, SynthConfig};
use backdrop::{
    confusion, detect_all, extract, f_measure, BackgroundFrame, ConfusionCounts, DenseTensor, EngineConfig,
    ForegroundMask, MrfSettings, PipelineConfig, SelectionConfig,
};
use log::{info, warn};
use serde::Serialize;

use crate::args::{
    AdmModeArg, DetectArgs, DirectionArg, EngineArgs, EvalArgs, ExtractArgs, InputArgs, MrfArgs, ProjectionArg,
    SelectionArgs, SweepArgs, SynthArgs,
};
use crate::config::{AutoOr, ConfigFile, CountList};
use crate::error::{CliError, CliResult, ExitCode};
use crate::output::{write_json_atomic, Staging};

/// What a successful run reports back to `main`.
pub enum Outcome {
    Done,
    /// Outputs were written but the background iteration did not converge.
    NotConverged,
}

fn selection_config(a: &SelectionArgs, cfg: &ConfigFile) -> CliResult<SelectionConfig> {
    let d = SelectionConfig::default();
    let default_dir = match d.direction {
        Direction::MostDistinct => DirectionArg::MostDistinct,
        Direction::LeastDistinct => DirectionArg::LeastDistinct,
    };
    let direction = match cfg.pick_enum(a.direction, "direction", default_dir)? {
        DirectionArg::MostDistinct => Direction::MostDistinct,
        DirectionArg::LeastDistinct => Direction::LeastDistinct,
    };
    Ok(SelectionConfig {
        n_select: cfg.pick(a.n_select, "n-select", d.n_select)?,
        lambda_rel: cfg.pick(a.lambda_rel, "lambda-rel", d.lambda_rel)?,
        tau_rel: cfg.pick(a.tau_rel, "tau-rel", d.tau_rel)?,
        direction,
        lasso: d.lasso,
    })
}

fn engine_config(a: &EngineArgs, cfg: &ConfigFile) -> CliResult<EngineConfig> {
    let d = EngineConfig::default();
    let adm_mode = match cfg.pick_enum(a.adm_mode, "adm-mode", AdmModeArg::Solve)? {
        AdmModeArg::Solve => AdmMode::Solve,
        AdmModeArg::SingleStep => AdmMode::SingleStep,
    };
    let projection = match cfg.pick_enum(a.projection, "projection", ProjectionArg::Mean)? {
        ProjectionArg::Mean => Projection::Mean,
        ProjectionArg::Median => Projection::Median,
    };
    Ok(EngineConfig {
        mu: cfg.pick(a.mu, "mu", AutoOr(d.mu))?.0,
        inner_tol: cfg.pick(a.inner_tol, "inner-tol", d.inner_tol)?,
        inner_max_iter: cfg.pick(a.inner_max_iter, "inner-max-iter", d.inner_max_iter)?,
        outer_tol: cfg.pick(a.outer_tol, "outer-tol", d.outer_tol)?,
        outer_max_iter: cfg.pick(a.outer_max_iter, "outer-max-iter", d.outer_max_iter)?,
        adm_mode,
        warm_start_lambda: cfg.pick(a.warm_start_lambda, "warm-start-lambda", d.warm_start_lambda)?,
        projection,
    })
}

fn pipeline_config(s: &SelectionArgs, e: &EngineArgs, cfg: &ConfigFile) -> CliResult<PipelineConfig> {
    let p = PipelineConfig {
        selection: selection_config(s, cfg)?,
        engine: engine_config(e, cfg)?,
    };
    p.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(p)
}

fn mrf_settings(a: &MrfArgs, cfg: &ConfigFile) -> CliResult<MrfSettings> {
    let s = MrfSettings {
        lambda_a: cfg.pick(a.lambda_a, "lambda-a", AutoOr(None))?.0,
        lambda_b: cfg.pick(a.lambda_b, "lambda-b", AutoOr(None))?.0,
    };
    s.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(s)
}

fn has_tensor_magic(path: &Path) -> bool {
    let mut head = [0u8; 8];
    path.is_file()
        && File::open(path)
            .and_then(|mut f| f.read_exact(&mut head))
            .is_ok()
        && &head == TENSOR_MAGIC
}

fn load_input(a: &InputArgs, cfg: &ConfigFile) -> CliResult<DenseTensor> {
    let max_frames: Option<usize> = match a.max_frames {
        Some(m) => Some(m),
        None => cfg.get("max-frames")?,
    };
    if max_frames == Some(0) {
        return Err(CliError::usage("--max-frames must be at least 1"));
    }
    let frames = if has_tensor_magic(&a.input) {
        let t = read_tensor(&a.input)?;
        if t.order() != 4 {
            return Err(CliError::new(
                ExitCode::Input,
                format!("{}: expected a 4-way frame tensor, got order {}", a.input.display(), t.order()),
            ));
        }
        match max_frames {
            Some(m) if m < t.shape()[3] => gather_frames(&t, &(0..m).collect::<Vec<_>>())?,
            _ => t,
        }
    } else {
        load_sequence(&FrameSequenceSpec::from_path(&a.input).with_max_frames(max_frames))?
    };
    let s = frames.shape();
    info!("loaded {} frames of {}x{} from {}", s[3], s[1], s[0], a.input.display());
    Ok(frames)
}

fn load_background_file(path: &Path) -> CliResult<BackgroundFrame> {
    if !path.exists() {
        return Err(CliError::new(
            ExitCode::MissingBackground,
            format!("background {} does not exist", path.display()),
        ));
    }
    if has_tensor_magic(path) {
        let bg = BackgroundFrame::new(read_tensor(path)?).map_err(|e| {
            CliError::new(ExitCode::Input, format!("{}: {e}", path.display()))
        })?;
        Ok(bg)
    } else {
        Ok(load_background(path)?)
    }
}

fn frame_name(prefix: &str, k: usize) -> String {
    format!("{prefix}_{k:04}.png")
}

#[derive(Serialize)]
struct InputInfo {
    path: PathBuf,
    height: usize,
    width: usize,
    channels: usize,
    frames: usize,
}

impl InputInfo {
    fn new(path: &Path, t: &DenseTensor) -> Self {
        let s = t.shape();
        Self {
            path: path.to_path_buf(),
            height: s[0],
            width: s[1],
            channels: s[2],
            frames: s[3],
        }
    }
}

#[derive(Serialize)]
struct ConvergenceReport {
    converged: bool,
    outer_iterations: usize,
    final_rel_change: f64,
    mu: Option<f64>,
    history: Vec<f64>,
    inner_iterations: Vec<usize>,
    /// Set when fewer than two frames were selected and no iteration ran.
    note: Option<&'static str>,
}

#[derive(Serialize)]
struct ExtractReport<'a> {
    input: InputInfo,
    config: &'a PipelineConfig,
    threads: usize,
    timings: StageTimings,
    selected_indices: &'a [usize],
    converged: bool,
    artifacts: &'static [&'static str],
}

struct Extracted {
    background: BackgroundFrame,
    converged: bool,
}

/// Runs extraction and stages its artifacts under `out` (when given).
fn run_extraction(
    frames: &DenseTensor,
    input: &Path,
    cfg: &PipelineConfig,
    staging: Option<&mut Staging>,
) -> CliResult<Extracted> {
    let ex = extract(frames, cfg)?;
    let converged = ex.engine.as_ref().is_none_or(|e| e.converged);
    if !converged {
        warn!("background iteration stopped at its cap without converging");
    }
    if let Some(st) = staging {
        save_frame(&ex.background, &st.path("background.png")?)?;
        write_tensor(ex.background.tensor(), &st.path("background.tensor")?)?;
        st.write_json("selection.json", &ex.selection)?;
        let conv = match &ex.engine {
            Some(e) => ConvergenceReport {
                converged: e.converged,
                outer_iterations: e.outer_iters,
                final_rel_change: e.final_rel_change,
                mu: Some(e.mu),
                history: e.history.clone(),
                inner_iterations: e.inner_iterations.clone(),
                note: None,
            },
            None => ConvergenceReport {
                converged: true,
                outer_iterations: 0,
                final_rel_change: 0.0,
                mu: None,
                history: Vec::new(),
                inner_iterations: Vec::new(),
                note: Some("single frame selected; background is that frame"),
            },
        };
        st.write_json("convergence.json", &conv)?;
        st.write_json(
            "report.json",
            &ExtractReport {
                input: InputInfo::new(input, frames),
                config: cfg,
                threads: rayon::current_num_threads(),
                timings: ex.timings,
                selected_indices: &ex.selection.selected_indices,
                converged,
                artifacts: &[
                    "background.png",
                    "background.tensor",
                    "selection.json",
                    "convergence.json",
                    "report.json",
                ],
            },
        )?;
    }
    Ok(Extracted {
        background: ex.background,
        converged,
    })
}

fn outcome(converged: bool) -> Outcome {
    if converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    }
}

pub fn run_extract(a: &ExtractArgs, cfg: &ConfigFile) -> CliResult<Outcome> {
    let pipeline = pipeline_config(&a.selection, &a.engine, cfg)?;
    let frames = load_input(&a.input, cfg)?;
    let mut staging = Staging::new(&a.out)?;
    let ex = run_extraction(&frames, &a.input.input, &pipeline, Some(&mut staging))?;
    staging.commit()?;
    info!("wrote background to {}", a.out.display());
    Ok(outcome(ex.converged))
}

#[derive(Serialize)]
struct FrameScore {
    frame: usize,
    #[serde(flatten)]
    counts: ConfusionCounts,
    #[serde(flatten)]
    score: FMeasure,
}

#[derive(Serialize)]
struct Scores {
    frames: Vec<FrameScore>,
    overall: FMeasure,
    overall_counts: ConfusionCounts,
    min_f: f64,
    mean_f: f64,
}

fn score_masks(pred: &[ForegroundMask], truth: &[ForegroundMask]) -> CliResult<Scores> {
    let frames = pred
        .iter()
        .zip(truth)
        .enumerate()
        .map(|(frame, (p, t))| {
            let counts = confusion(p, t)?;
            Ok(FrameScore {
                frame,
                counts,
                score: f_measure(&counts),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let overall_counts: ConfusionCounts = frames.iter().map(|s| s.counts).sum();
    let fs: Vec<f64> = frames.iter().map(|s| s.score.f).collect();
    let min_f = fs.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_f = fs.iter().sum::<f64>() / fs.len().max(1) as f64;
    Ok(Scores {
        overall: f_measure(&overall_counts),
        overall_counts,
        min_f: if fs.is_empty() { 0.0 } else { min_f },
        mean_f,
        frames,
    })
}

/// Loads every image in `dir` as a mask, requiring `count` of them at
/// `height x width`.
fn load_mask_dir(dir: &Path, count: usize, height: usize, width: usize) -> CliResult<Vec<ForegroundMask>> {
    let paths = list_images(dir)?;
    if paths.len() != count {
        return Err(CliError::shape(format!(
            "{} holds {} masks but there are {count} frames",
            dir.display(),
            paths.len()
        )));
    }
    paths
        .iter()
        .map(|p| {
            let m = load_mask(p)?;
            if (m.height(), m.width()) != (height, width) {
                return Err(CliError::shape(format!(
                    "{} is {}x{} but frames are {width}x{height}",
                    p.display(),
                    m.width(),
                    m.height()
                )));
            }
            Ok(m)
        })
        .collect()
}

#[derive(Serialize)]
struct DetectReport<'a> {
    input: InputInfo,
    background: Option<&'a Path>,
    mrf: MrfSettings,
    extraction: Option<&'a PipelineConfig>,
    foreground_pixels: Vec<usize>,
    scores: Option<Scores>,
}

pub fn run_detect(a: &DetectArgs, cfg: &ConfigFile) -> CliResult<Outcome> {
    let settings = mrf_settings(&a.mrf, cfg)?;
    let pipeline = if a.extract_first {
        Some(pipeline_config(&a.selection, &a.engine, cfg)?)
    } else {
        None
    };
    let bg_path = match (&a.background, a.extract_first) {
        (Some(p), _) => Some(p.as_path()),
        (None, true) => None,
        (None, false) => {
            return Err(CliError::new(
                ExitCode::MissingBackground,
                "no background given; pass --background FILE or --extract-first",
            ))
        }
    };
    let background_file = bg_path.map(load_background_file).transpose()?;
    let frames = load_input(&a.input, cfg)?;

    let (background, converged) = match (background_file, &pipeline) {
        (Some(bg), _) => (bg, true),
        (None, Some(p)) => {
            let ex = run_extraction(&frames, &a.input.input, p, None)?;
            (ex.background, ex.converged)
        }
        (None, None) => unreachable!("handled above"),
    };
    let s = frames.shape();
    if (background.height(), background.width(), background.channels()) != (s[0], s[1], s[2]) {
        return Err(CliError::shape(format!(
            "background {} is {}x{}x{} but frames are {}x{}x{}",
            bg_path.map(|p| p.display().to_string()).unwrap_or_default(),
            background.width(),
            background.height(),
            background.channels(),
            s[1],
            s[0],
            s[2]
        )));
    }

    let truth = a
        .truth_dir
        .as_deref()
        .map(|d| load_mask_dir(d, s[3], s[0], s[1]))
        .transpose()?;
    let masks = detect_all(&frames, &background, &settings)?;
    let scores = truth.as_deref().map(|t| score_masks(&masks, t)).transpose()?;
    if let Some(sc) = &scores {
        info!("F-measure: overall {:.4}, min {:.4}", sc.overall.f, sc.min_f);
    }

    if let Some(dir) = &a.mask_out {
        let mut staging = Staging::new(dir)?;
        for (k, m) in masks.iter().enumerate() {
            save_frame(m, &staging.path(frame_name("mask", k))?)?;
        }
        staging.commit()?;
    }
    if let Some(path) = &a.report {
        let report = DetectReport {
            input: InputInfo::new(&a.input.input, &frames),
            background: bg_path,
            mrf: settings,
            extraction: pipeline.as_ref(),
            foreground_pixels: masks.iter().map(ForegroundMask::count_foreground).collect(),
            scores,
        };
        write_json_atomic(path, &report)?;
    }
    Ok(outcome(converged))
}

#[derive(Serialize)]
struct EvalReport<'a> {
    pred_dir: &'a Path,
    truth_dir: &'a Path,
    #[serde(flatten)]
    scores: Scores,
}

pub fn run_eval(a: &EvalArgs) -> CliResult<Outcome> {
    let pred_paths = list_images(&a.pred_dir)?;
    let first = pred_paths
        .first()
        .ok_or_else(|| CliError::new(ExitCode::Input, format!("{} holds no masks", a.pred_dir.display())))?;
    let probe = load_mask(first)?;
    let pred = load_mask_dir(&a.pred_dir, pred_paths.len(), probe.height(), probe.width())?;
    let truth = load_mask_dir(&a.truth_dir, pred.len(), probe.height(), probe.width())?;
    let scores = score_masks(&pred, &truth)?;
    println!(
        "frames {}  precision {:.4}  recall {:.4}  F {:.4}  min F {:.4}",
        pred.len(),
        scores.overall.precision,
        scores.overall.recall,
        scores.overall.f,
        scores.min_f
    );
    if let Some(path) = &a.report {
        write_json_atomic(
            path,
            &EvalReport {
                pred_dir: &a.pred_dir,
                truth_dir: &a.truth_dir,
                scores,
            },
        )?;
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    input: InputInfo,
    config: &'a PipelineConfig,
    #[serde(flatten)]
    sweep: SweepReport,
}

pub fn run_sweep(a: &SweepArgs, cfg: &ConfigFile) -> CliResult<Outcome> {
    let pipeline = pipeline_config(&a.selection, &a.engine, cfg)?;
    let counts = cfg.pick(a.n.clone(), "n", CountList((1..=30).collect()))?;
    let standard_n = cfg.pick(a.standard_n, "standard-n", 40)?;
    if counts.0.contains(&0) || standard_n == 0 {
        return Err(CliError::usage("frame counts must be positive"));
    }
    if counts.0.iter().any(|&n| n > standard_n) {
        return Err(CliError::usage("every swept count must be at most --standard-n"));
    }
    let frames = load_input(&a.input, cfg)?;
    let sweep = sweep_n_frames(&frames, &counts.0, standard_n, &pipeline)?;
    for p in &sweep.points {
        println!("{:>4}  {:.6}", p.n_frames, p.ratio);
    }
    if let Some(path) = &a.report {
        write_json_atomic(
            path,
            &SweepOutput {
                input: InputInfo::new(&a.input.input, &frames),
                config: &pipeline,
                sweep,
            },
        )?;
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct SynthReport {
    height: usize,
    width: usize,
    frames: usize,
    square: usize,
    speed: f64,
    noise_sigma: f64,
    seed: u64,
    square_color: [f64; 3],
    moving_object: bool,
    max_occlusion_fraction: f64,
}

pub fn run_synth(a: &SynthArgs, cfg: &ConfigFile) -> CliResult<Outcome> {
    let d = SynthConfig::default();
    let synth = SynthConfig {
        height: cfg.pick(a.height, "height", d.height)?,
        width: cfg.pick(a.width, "width", d.width)?,
        frames: cfg.pick(a.frames, "frames", d.frames)?,
        square: cfg.pick(a.square, "square", d.square)?,
        speed: cfg.pick(a.speed, "speed", d.speed)?,
        noise_sigma: cfg.pick(a.noise_sigma, "noise-sigma", d.noise_sigma)?,
        seed: cfg.pick(a.seed, "seed", d.seed)?,
        square_color: d.square_color,
        moving_object: !a.still,
    };
    synth.validate().map_err(|e| CliError::usage(e.to_string()))?;
    let scene = generate(&synth)?;

    let mut st = Staging::new(&a.out)?;
    for k in 0..synth.frames {
        let frame = BackgroundFrame::new(frame_slice(&scene.frames, k)?)?;
        save_frame(&frame, &st.path(Path::new("frames").join(frame_name("frame", k)))?)?;
        save_frame(&scene.masks[k], &st.path(Path::new("truth").join(frame_name("mask", k)))?)?;
    }
    write_tensor(&scene.frames, &st.path("frames.tensor")?)?;
    save_frame(&scene.background, &st.path("background.png")?)?;
    write_tensor(scene.background.tensor(), &st.path("background.tensor")?)?;
    st.write_json(
        "synth.json",
        &SynthReport {
            height: synth.height,
            width: synth.width,
            frames: synth.frames,
            square: synth.square,
            speed: synth.speed,
            noise_sigma: synth.noise_sigma,
            seed: synth.seed,
            square_color: synth.square_color,
            moving_object: synth.moving_object,
            max_occlusion_fraction: max_occlusion_fraction(&scene.masks),
        },
    )?;
    st.commit()?;
    info!("wrote {} frames to {}", synth.frames, a.out.display());
    Ok(Outcome::Done)
}
