//! Background extraction from a small set of frames.
//!
//! The static background is modeled as a frame repeated along the frame
//! mode (every frame slice identical). An alternating-direction multiplier
//! scheme splits the selected frames into that repeated background plus an
//! ℓ1-sparse remainder, projecting the background onto the repeated-frame
//! set after every update. Its output, the purified mean, then drives a
//! per-pixel replacement of the worst outlier, and the two steps alternate
//! until the purified mean settles.
//!
//! Frames are stored as `(height, width, channels, frames)` tensors so that
//! each pixel-channel's samples are contiguous; every step below is
//! independent per pixel-channel except the global convergence norms.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::{shrink, DenseTensor, Matrix};

/// Pixel-channels per parallel work unit. Fixed, so partial sums are
/// combined in the same order whatever the thread count.
const PIXEL_CHUNK: usize = 2048;

/// Guard for relative-change denominators.
const NORM_EPS: f64 = 1e-12;

/// A single `(height, width, channels)` frame, the collapsed form of a
/// background that is identical in every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundFrame(DenseTensor);

impl BackgroundFrame {
    pub fn new(tensor: DenseTensor) -> Result<Self> {
        if tensor.order() != 3 {
            return Err(Error::invalid(format!(
                "background frame must be 3-order, got shape {:?}",
                tensor.shape()
            )));
        }
        Ok(Self(tensor))
    }

    pub fn tensor(&self) -> &DenseTensor {
        &self.0
    }

    pub fn into_tensor(self) -> DenseTensor {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.0.shape()[1]
    }

    pub fn channels(&self) -> usize {
        self.0.shape()[2]
    }

    pub fn data(&self) -> &[f64] {
        self.0.data()
    }

    pub fn to_gray(&self) -> Result<Matrix> {
        crate::io::frame_to_gray(&self.0)
    }

    /// Repeats the frame `frames` times along a new last mode.
    pub fn broadcast(&self, frames: usize) -> Result<DenseTensor> {
        let ones = DenseTensor::filled(vec![frames], 1.0)?;
        DenseTensor::contract(&self.0, &ones, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdmMode {
    /// Run the multiplier scheme to its own convergence every outer cycle.
    #[default]
    Solve,
    /// One S/B/Λ update per outer cycle, state carried across cycles.
    SingleStep,
}

/// How the background update collapses `D − S` onto a single frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    /// Frame-wise mean, the least-squares projection.
    #[default]
    Mean,
    /// Frame-wise median, the least-absolute-deviation projection.
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EngineConfig {
    /// Penalty parameter; `None` derives it from the data spread.
    pub mu: Option<f64>,
    pub inner_tol: f64,
    pub inner_max_iter: usize,
    pub outer_tol: f64,
    pub outer_max_iter: usize,
    pub adm_mode: AdmMode,
    pub warm_start_lambda: bool,
    pub projection: Projection,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            mu: None,
            inner_tol: 1e-4,
            inner_max_iter: 100,
            outer_tol: 1e-3,
            outer_max_iter: 200,
            adm_mode: AdmMode::Solve,
            warm_start_lambda: false,
            projection: Projection::Mean,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(mu) = self.mu {
            if !(mu > 0.0 && mu.is_finite()) {
                return Err(Error::invalid(format!("mu must be positive, got {mu}")));
            }
        }
        if self.inner_tol.is_nan() || self.inner_tol <= 0.0 || self.outer_tol.is_nan() || self.outer_tol <= 0.0 {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.inner_max_iter == 0 || self.outer_max_iter == 0 {
            return Err(Error::invalid("iteration caps must be at least 1"));
        }
        Ok(())
    }
}

/// Penalty derived from the data: `1 / std(entries)`, kept in `[1e-3, 1e3]`.
pub fn auto_mu(d: &DenseTensor) -> f64 {
    let n = d.len() as f64;
    let mean = d.data().iter().sum::<f64>() / n;
    let var = d.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (1.0 / var.sqrt()).clamp(1e-3, 1e3)
}

fn check_frames(t: &DenseTensor) -> Result<(usize, usize)> {
    if t.order() != 4 {
        return Err(Error::invalid(format!(
            "expected (height, width, channels, frames) tensor, got shape {:?}",
            t.shape()
        )));
    }
    let n = t.shape()[3];
    Ok((t.len() / n, n))
}

fn collapsed_shape(t: &DenseTensor) -> Vec<usize> {
    t.shape()[..3].to_vec()
}

/// Projection onto the repeated-frame set: the frame-wise mean.
pub fn project_r4(t: &DenseTensor) -> Result<BackgroundFrame> {
    let (_, n) = check_frames(t)?;
    let data = t
        .data()
        .par_chunks(n * PIXEL_CHUNK)
        .flat_map_iter(|chunk| {
            chunk
                .chunks_exact(n)
                .map(move |px| px.iter().sum::<f64>() / n as f64)
        })
        .collect();
    BackgroundFrame::new(DenseTensor::new(collapsed_shape(t), data)?)
}

/// Frame-wise median, the ℓ1 counterpart of [`project_r4`].
pub fn project_r4_median(t: &DenseTensor) -> Result<BackgroundFrame> {
    let (_, n) = check_frames(t)?;
    let data = t
        .data()
        .par_chunks(n * PIXEL_CHUNK)
        .flat_map_iter(|chunk| {
            let mut buf = vec![0.0; n];
            chunk
                .chunks_exact(n)
                .map(|px| {
                    buf.copy_from_slice(px);
                    median_in_place(&mut buf)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    BackgroundFrame::new(DenseTensor::new(collapsed_shape(t), data)?)
}

fn median_in_place(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Mutable iterate of the multiplier scheme, collapsed background included.
#[derive(Debug, Clone)]
struct AdmState {
    background: Vec<f64>,
    sparse: Vec<f64>,
    multiplier: Vec<f64>,
}

impl AdmState {
    fn start(d: &DenseTensor, projection: Projection) -> Result<Self> {
        let background = match projection {
            Projection::Mean => project_r4(d)?,
            Projection::Median => project_r4_median(d)?,
        }
        .into_tensor()
        .into_data();
        Ok(Self {
            background,
            sparse: vec![0.0; d.len()],
            multiplier: vec![0.0; d.len()],
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct StepStats {
    diff_sq: f64,
    prev_sq: f64,
    residual_sq: f64,
    finite: bool,
}

/// One S, B, Λ update over every pixel-channel.
fn adm_step(d: &[f64], n: usize, st: &mut AdmState, mu: f64, projection: Projection) -> StepStats {
    let tau = 1.0 / mu;
    let partials: Vec<StepStats> = st
        .background
        .par_chunks_mut(PIXEL_CHUNK)
        .zip(st.sparse.par_chunks_mut(PIXEL_CHUNK * n))
        .zip(st.multiplier.par_chunks_mut(PIXEL_CHUNK * n))
        .zip(d.par_chunks(PIXEL_CHUNK * n))
        .map(|(((bg, sp), lm), dd)| {
            let mut stats = StepStats {
                finite: true,
                ..Default::default()
            };
            let mut scratch = vec![0.0; n];
            for (p, b) in bg.iter_mut().enumerate() {
                let range = p * n..(p + 1) * n;
                let (dp, sp, lm) = (&dd[range.clone()], &mut sp[range.clone()], &mut lm[range]);
                for i in 0..n {
                    sp[i] = shrink(dp[i] + lm[i] / mu - *b, tau);
                }
                let b_new = match projection {
                    Projection::Mean => {
                        dp.iter().zip(sp.iter()).map(|(x, s)| x - s).sum::<f64>() / n as f64
                    }
                    Projection::Median => {
                        for i in 0..n {
                            scratch[i] = dp[i] - sp[i];
                        }
                        median_in_place(&mut scratch)
                    }
                };
                for i in 0..n {
                    let r = dp[i] - b_new - sp[i];
                    lm[i] += mu * r;
                    stats.residual_sq += r * r;
                }
                stats.diff_sq += (b_new - *b) * (b_new - *b);
                stats.prev_sq += *b * *b;
                stats.finite &= b_new.is_finite();
                *b = b_new;
            }
            stats
        })
        .collect();
    partials.iter().fold(
        StepStats {
            finite: true,
            ..Default::default()
        },
        |acc, s| StepStats {
            diff_sq: acc.diff_sq + s.diff_sq,
            prev_sq: acc.prev_sq + s.prev_sq,
            residual_sq: acc.residual_sq + s.residual_sq,
            finite: acc.finite && s.finite && s.residual_sq.is_finite(),
        },
    )
}

fn relative_change(diff_sq: f64, prev_sq: f64) -> f64 {
    let prev = prev_sq.sqrt();
    if prev < NORM_EPS {
        diff_sq.sqrt()
    } else {
        diff_sq.sqrt() / prev
    }
}

#[derive(Debug, Clone, Copy)]
struct RunSummary {
    iterations: usize,
    converged: bool,
    rel_change: f64,
    residual: f64,
}

fn adm_run(
    d: &DenseTensor,
    st: &mut AdmState,
    mu: f64,
    tol: f64,
    max_iter: usize,
    projection: Projection,
    first_iteration: usize,
) -> Result<RunSummary> {
    let (_, n) = check_frames(d)?;
    let d_norm = d.norms().frobenius.max(NORM_EPS);
    let mut summary = RunSummary {
        iterations: 0,
        converged: false,
        rel_change: f64::INFINITY,
        residual: f64::INFINITY,
    };
    for k in 1..=max_iter {
        let stats = adm_step(d.data(), n, st, mu, projection);
        if !stats.finite {
            return Err(Error::Divergence {
                iteration: first_iteration + k - 1,
            });
        }
        summary.iterations = k;
        summary.rel_change = relative_change(stats.diff_sq, stats.prev_sq);
        summary.residual = stats.residual_sq.sqrt() / d_norm;
        if summary.rel_change <= tol && summary.residual <= tol {
            summary.converged = true;
            break;
        }
    }
    Ok(summary)
}

/// Output of [`adm_solve`].
#[derive(Debug, Clone)]
pub struct AdmOutput {
    pub background: BackgroundFrame,
    pub sparse: DenseTensor,
    pub multiplier: DenseTensor,
    pub iterations: usize,
    pub converged: bool,
    /// Relative background change of the last iteration.
    pub rel_change: f64,
    /// `‖D − B − S‖_F / ‖D‖_F` after the last iteration.
    pub residual: f64,
}

/// Splits `d` into a repeated background and an ℓ1-sparse remainder.
///
/// Starts from the frame mean with `S = Λ = 0` and iterates
/// `S ← T_{1/μ}(D + Λ/μ − B)`, `B ← mean(D − S)`, `Λ ← Λ + μ(D − B − S)`
/// until both the relative background change and the relative primal
/// residual drop to `tol`, or `max_iter` is reached.
pub fn adm_solve(d: &DenseTensor, mu: f64, tol: f64, max_iter: usize) -> Result<AdmOutput> {
    adm_solve_with(d, mu, tol, max_iter, Projection::Mean)
}

pub fn adm_solve_with(
    d: &DenseTensor,
    mu: f64,
    tol: f64,
    max_iter: usize,
    projection: Projection,
) -> Result<AdmOutput> {
    check_frames(d)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::invalid(format!("mu must be positive, got {mu}")));
    }
    if !d.is_finite() {
        return Err(Error::Data("frames contain non-finite values".into()));
    }
    let mut st = AdmState::start(d, projection)?;
    let run = adm_run(d, &mut st, mu, tol, max_iter, projection, 1)?;
    finish(d, st, run)
}

fn finish(d: &DenseTensor, st: AdmState, run: RunSummary) -> Result<AdmOutput> {
    Ok(AdmOutput {
        background: BackgroundFrame::new(DenseTensor::new(collapsed_shape(d), st.background)?)?,
        sparse: DenseTensor::new(d.shape().to_vec(), st.sparse)?,
        multiplier: DenseTensor::new(d.shape().to_vec(), st.multiplier)?,
        iterations: run.iterations,
        converged: run.converged,
        rel_change: run.rel_change,
        residual: run.residual,
    })
}

/// For every pixel-channel, overwrites the sample farthest from the
/// purified mean (lowest frame index on ties) with the mean itself.
pub fn remove_worst_outliers(
    frames: &DenseTensor,
    purified_mean: &BackgroundFrame,
) -> Result<DenseTensor> {
    let (p, n) = check_frames(frames)?;
    if purified_mean.tensor().shape() != &frames.shape()[..3] {
        return Err(Error::invalid(format!(
            "mean of shape {:?} does not match frames {:?}",
            purified_mean.tensor().shape(),
            frames.shape()
        )));
    }
    debug_assert_eq!(p, purified_mean.data().len());
    let mut data = frames.data().to_vec();
    replace_worst(&mut data, n, purified_mean.data());
    DenseTensor::new(frames.shape().to_vec(), data)
}

fn replace_worst(data: &mut [f64], n: usize, mean: &[f64]) {
    data.par_chunks_mut(n * PIXEL_CHUNK)
        .zip(mean.par_chunks(PIXEL_CHUNK))
        .for_each(|(chunk, m)| {
            for (px, &b) in chunk.chunks_exact_mut(n).zip(m) {
                let mut worst = 0;
                let mut worst_dev = -1.0;
                for (i, &v) in px.iter().enumerate() {
                    let dev = (v - b).abs();
                    if dev > worst_dev {
                        worst_dev = dev;
                        worst = i;
                    }
                }
                if worst_dev > 0.0 {
                    px[worst] = b;
                }
            }
        });
}

/// Clamps each pixel-channel of `mean` into the range of its samples.
fn clamp_to_samples(mean: &mut [f64], frames: &[f64], n: usize) {
    mean.par_chunks_mut(PIXEL_CHUNK)
        .zip(frames.par_chunks(n * PIXEL_CHUNK))
        .for_each(|(m, chunk)| {
            for (b, px) in m.iter_mut().zip(chunk.chunks_exact(n)) {
                let (lo, hi) = px
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                *b = b.clamp(lo, hi);
            }
        });
}

#[derive(Debug, Clone, Serialize)]
pub struct BackgroundResult {
    #[serde(skip)]
    pub background: BackgroundFrame,
    pub outer_iters: usize,
    pub final_rel_change: f64,
    pub converged: bool,
    pub mu: f64,
    /// Relative change of the purified mean at each outer iteration.
    pub history: Vec<f64>,
    /// Multiplier iterations spent in each outer iteration.
    pub inner_iterations: Vec<usize>,
}

/// What an observer sees after each outer iteration.
pub struct OuterStep<'a> {
    pub iteration: usize,
    pub rel_change: f64,
    pub inner_iterations: usize,
    pub frames: usize,
    /// Purified mean, `(h, w, c)` flattened.
    pub purified_mean: &'a [f64],
    /// Working frames the mean was computed from.
    pub frames_before: &'a [f64],
    /// Working frames after outlier replacement; `None` on the final,
    /// converged iteration where no replacement happens.
    pub frames_after: Option<&'a [f64]>,
}

/// Alternates purified-mean computation and worst-outlier replacement until
/// the relative change of the purified mean drops to `outer_tol`.
pub fn extract_background(d_selected: &DenseTensor, cfg: &EngineConfig) -> Result<BackgroundResult> {
    extract_background_observed(d_selected, cfg, |_| {})
}

pub fn extract_background_observed(
    d_selected: &DenseTensor,
    cfg: &EngineConfig,
    mut observer: impl FnMut(&OuterStep<'_>),
) -> Result<BackgroundResult> {
    cfg.validate()?;
    let (_, n) = check_frames(d_selected)?;
    if n < 2 {
        return Err(Error::invalid(format!(
            "background extraction needs at least 2 frames, got {n}"
        )));
    }
    if !d_selected.is_finite() {
        return Err(Error::Data("frames contain non-finite values".into()));
    }
    let mu = cfg.mu.unwrap_or_else(|| auto_mu(d_selected));
    let shape = d_selected.shape().to_vec();
    let mut work = d_selected.clone();
    let mut previous = project_r4(&work)?.into_tensor().into_data();
    let mut history = Vec::new();
    let mut inner_iterations = Vec::new();
    let mut carried: Option<AdmState> = None;
    let mut converged = false;
    let mut adm_iterations_so_far = 0;

    for outer in 1..=cfg.outer_max_iter {
        let mut st = match (cfg.adm_mode, carried.take()) {
            (AdmMode::SingleStep, Some(st)) => st,
            (AdmMode::Solve, Some(prev)) if cfg.warm_start_lambda => {
                let mut st = AdmState::start(&work, cfg.projection)?;
                st.multiplier = prev.multiplier;
                st
            }
            _ => AdmState::start(&work, cfg.projection)?,
        };
        let (tol, cap) = match cfg.adm_mode {
            AdmMode::Solve => (cfg.inner_tol, cfg.inner_max_iter),
            AdmMode::SingleStep => (0.0, 1),
        };
        let run = adm_run(
            &work,
            &mut st,
            mu,
            tol,
            cap,
            cfg.projection,
            adm_iterations_so_far + 1,
        )?;
        adm_iterations_so_far += run.iterations;
        inner_iterations.push(run.iterations);

        let mut mean = st.background.clone();
        clamp_to_samples(&mut mean, work.data(), n);
        let diff_sq: f64 = mean.iter().zip(&previous).map(|(a, b)| (a - b) * (a - b)).sum();
        let prev_sq: f64 = previous.iter().map(|v| v * v).sum();
        let rel = relative_change(diff_sq, prev_sq);
        history.push(rel);

        if rel <= cfg.outer_tol {
            observer(&OuterStep {
                iteration: outer,
                rel_change: rel,
                inner_iterations: run.iterations,
                frames: n,
                purified_mean: &mean,
                frames_before: work.data(),
                frames_after: None,
            });
            previous = mean;
            converged = true;
            break;
        }

        let mut next = work.data().to_vec();
        replace_worst(&mut next, n, &mean);
        observer(&OuterStep {
            iteration: outer,
            rel_change: rel,
            inner_iterations: run.iterations,
            frames: n,
            purified_mean: &mean,
            frames_before: work.data(),
            frames_after: Some(&next),
        });
        work = DenseTensor::new(shape.clone(), next)?;
        if cfg.adm_mode == AdmMode::SingleStep {
            st.background = mean.clone();
        }
        carried = Some(st);
        previous = mean;
    }

    let background = BackgroundFrame::new(DenseTensor::new(shape[..3].to_vec(), previous)?)?;
    Ok(BackgroundResult {
        background,
        outer_iters: history.len(),
        final_rel_change: *history.last().expect("at least one outer iteration"),
        converged,
        mu,
        history,
        inner_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixel_series(values: &[f64]) -> DenseTensor {
        DenseTensor::new(vec![1, 1, 1, values.len()], values.to_vec()).unwrap()
    }

    fn frame_of(values: &[f64]) -> BackgroundFrame {
        BackgroundFrame::new(DenseTensor::new(vec![1, 1, values.len()], values.to_vec()).unwrap())
            .unwrap()
    }

    #[test]
    fn mean_of_identical_frames_is_the_frame() {
        let f = DenseTensor::from_fn(vec![2, 3, 3], |i| (i[0] * 9 + i[1] * 3 + i[2]) as f64 / 17.0).unwrap();
        let b = BackgroundFrame::new(f.clone()).unwrap();
        let stack = b.broadcast(4).unwrap();
        let p = project_r4(&stack).unwrap();
        for (a, e) in p.data().iter().zip(f.data()) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_of_two_values() {
        let p = project_r4(&pixel_series(&[0.0, 2.0])).unwrap();
        assert_eq!(p.data(), &[1.0]);
        assert!(project_r4(&DenseTensor::zeros(vec![2, 2, 3]).unwrap()).is_err());
    }

    #[test]
    fn median_projection() {
        let p = project_r4_median(&pixel_series(&[0.0, 5.0, 1.0])).unwrap();
        assert_eq!(p.data(), &[1.0]);
        let p = project_r4_median(&pixel_series(&[0.0, 5.0, 1.0, 3.0])).unwrap();
        assert_eq!(p.data(), &[2.0]);
    }

    #[test]
    fn outlier_replacement_cases() {
        let out = remove_worst_outliers(&pixel_series(&[1.0, 1.0, 1.0, 10.0]), &frame_of(&[3.25])).unwrap();
        assert_eq!(out.data(), &[1.0, 1.0, 1.0, 3.25]);
        let flat = pixel_series(&[0.5, 0.5, 0.5]);
        assert_eq!(remove_worst_outliers(&flat, &frame_of(&[0.5])).unwrap(), flat);
        let out = remove_worst_outliers(&pixel_series(&[0.0, 2.0]), &frame_of(&[1.0])).unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn outlier_replacement_shape_mismatch() {
        let frames = DenseTensor::zeros(vec![2, 2, 3, 4]).unwrap();
        let mean = BackgroundFrame::new(DenseTensor::zeros(vec![2, 2, 1]).unwrap()).unwrap();
        assert!(remove_worst_outliers(&frames, &mean).is_err());
    }

    #[test]
    fn adm_static_fixed_point() {
        let f = DenseTensor::from_fn(vec![3, 2, 3], |i| 0.1 + (i[0] + 2 * i[1] + i[2]) as f64 / 10.0).unwrap();
        let d = BackgroundFrame::new(f.clone()).unwrap().broadcast(5).unwrap();
        for mu in [0.3, 1.0, 7.0] {
            let out = adm_solve(&d, mu, 1e-4, 100).unwrap();
            assert!(out.iterations <= 2);
            assert!(out.converged);
            assert!(out.sparse.norms().max_abs == 0.0);
            for (a, e) in out.background.data().iter().zip(f.data()) {
                assert!((a - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adm_rejects_bad_input() {
        let d = pixel_series(&[0.0, 1.0]);
        assert!(adm_solve(&d, 0.0, 1e-4, 10).is_err());
        assert!(adm_solve(&pixel_series(&[0.0, f64::NAN]), 1.0, 1e-4, 10).is_err());
    }

    #[test]
    fn adm_divergence_is_reported() {
        // An overflowing sample turns the first multiplier update non-finite.
        let d = pixel_series(&[f64::MAX, -f64::MAX, f64::MAX]);
        match adm_solve(&d, 1e-300, 1e-4, 10) {
            Err(Error::Divergence { iteration }) => assert_eq!(iteration, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn extraction_requires_two_frames() {
        let d = pixel_series(&[0.3]);
        assert!(extract_background(&d, &EngineConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = EngineConfig {
            mu: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EngineConfig {
            outer_max_iter: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(EngineConfig::default().validate().is_ok());
    }

    #[test]
    fn auto_mu_is_bounded() {
        assert_eq!(auto_mu(&pixel_series(&[0.5, 0.5])), 1e3);
        let mu = auto_mu(&pixel_series(&[0.0, 1.0]));
        assert!((mu - 2.0).abs() < 1e-15);
    }
}
