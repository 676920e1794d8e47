//! Foreground segmentation: background subtraction followed by exact
//! minimization of a binary Ising energy with a graph cut.
//!
//! For a residual `r = frame − background` (grayscale) and labels
//! `O ∈ {0, 1}` the energy is
//!
//! ```text
//! E(O) = Σ_{O_ij = 0} ½ r_ij²  +  λ_a Σ O_ij  +  λ_b Σ_{4-neighbours} |O_ij − O_xy|
//! ```
//!
//! Dropping the constant `Σ ½ r²` leaves unary weights `w = λ_a − ½ r²` on
//! label 1. Pixels with `w > 0` get a source edge of capacity `w`, pixels
//! with `w < 0` a sink edge of capacity `−w`, and each neighbour pair an
//! undirected edge of capacity `λ_b`. The sink side of the minimum cut is
//! the foreground.

use serde::Serialize;

use crate::engine::BackgroundFrame;
use crate::error::{Error, Result};
use crate::io::frame_to_gray;
use crate::maxflow::FlowGraph;
use crate::tensor::{DenseTensor, Matrix};

/// Scale factor turning a median absolute deviation into a Gaussian σ.
const MAD_TO_SIGMA: f64 = 1.4826;
/// Noise multiples at which automatic parameters flag an isolated pixel.
pub const AUTO_THRESHOLD_SIGMAS: f64 = 3.0;

/// Binary foreground labels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForegroundMask {
    height: usize,
    width: usize,
    labels: Vec<bool>,
}

impl ForegroundMask {
    pub fn new(height: usize, width: usize, labels: Vec<bool>) -> Result<Self> {
        if height * width != labels.len() || height == 0 || width == 0 {
            return Err(Error::invalid(format!(
                "{height}x{width} mask needs {} labels, got {}",
                height * width,
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            labels: vec![false; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let labels = (0..height * width).map(|k| f(k / width, k % width)).collect();
        Self {
            height,
            width,
            labels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.labels[r * self.width + c]
    }

    pub fn count_foreground(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub fn same_shape(&self, other: &ForegroundMask) -> bool {
        self.height == other.height && self.width == other.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MrfParams {
    /// Cost of labeling one pixel foreground.
    pub lambda_a: f64,
    /// Cost of each disagreeing 4-neighbour pair.
    pub lambda_b: f64,
}

impl MrfParams {
    pub fn new(lambda_a: f64, lambda_b: f64) -> Result<Self> {
        let p = Self { lambda_a, lambda_b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_a >= 0.0 && self.lambda_a.is_finite())
            || !(self.lambda_b >= 0.0 && self.lambda_b.is_finite())
        {
            return Err(Error::invalid(format!(
                "MRF parameters must be finite and non-negative, got λa={} λb={}",
                self.lambda_a, self.lambda_b
            )));
        }
        Ok(())
    }

    /// Derives parameters from the residual's robust noise level
    /// `σ̂ = 1.4826 · MAD`: `λ_a = ½(3σ̂)²` so that, without smoothing,
    /// pixels switch at `|r| > 3σ̂`, and `λ_b = λ_a / 2`.
    pub fn auto(residual: &Matrix) -> Self {
        let sigma = MAD_TO_SIGMA * median_abs_deviation(residual.data());
        let lambda_a = 0.5 * (AUTO_THRESHOLD_SIGMAS * sigma).powi(2);
        Self {
            lambda_a,
            lambda_b: lambda_a / 2.0,
        }
    }
}

/// Segmentation weights where either one may be left to the automatic
/// rule. A fixed `λ_a` with automatic `λ_b` uses `λ_b = λ_a / 2`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MrfSettings {
    pub lambda_a: Option<f64>,
    pub lambda_b: Option<f64>,
}

impl MrfSettings {
    pub fn fixed(params: MrfParams) -> Self {
        Self {
            lambda_a: Some(params.lambda_a),
            lambda_b: Some(params.lambda_b),
        }
    }

    pub fn validate(&self) -> Result<()> {
        MrfParams {
            lambda_a: self.lambda_a.unwrap_or(0.0),
            lambda_b: self.lambda_b.unwrap_or(0.0),
        }
        .validate()
    }

    /// Concrete parameters for one residual image.
    pub fn resolve(&self, residual: &Matrix) -> Result<MrfParams> {
        let (lambda_a, lambda_b) = match (self.lambda_a, self.lambda_b) {
            (Some(a), Some(b)) => (a, b),
            (Some(a), None) => (a, a / 2.0),
            (None, b) => {
                let auto = MrfParams::auto(residual);
                (auto.lambda_a, b.unwrap_or(auto.lambda_b))
            }
        };
        MrfParams::new(lambda_a, lambda_b)
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn median_abs_deviation(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    median(&mut dev)
}

/// Signed residual `frame − background`.
pub fn subtract(frame_gray: &Matrix, background_gray: &Matrix) -> Result<Matrix> {
    if !frame_gray.same_shape(background_gray) {
        return Err(Error::invalid(format!(
            "frame is {}x{} but background is {}x{}",
            frame_gray.rows(),
            frame_gray.cols(),
            background_gray.rows(),
            background_gray.cols()
        )));
    }
    let data = frame_gray
        .data()
        .iter()
        .zip(background_gray.data())
        .map(|(a, b)| a - b)
        .collect();
    Matrix::new(frame_gray.rows(), frame_gray.cols(), data)
}

/// Ising energy of a labeling, each unordered 4-neighbour pair counted once.
pub fn mrf_energy(mask: &ForegroundMask, residual: &Matrix, params: &MrfParams) -> f64 {
    assert!(
        mask.height == residual.rows() && mask.width == residual.cols(),
        "mask and residual shapes differ"
    );
    let (h, w) = (mask.height, mask.width);
    let mut data = 0.0;
    let mut count = 0usize;
    let mut disagreements = 0usize;
    for r in 0..h {
        for c in 0..w {
            let on = mask.get(r, c);
            if on {
                count += 1;
            } else {
                let v = residual.get(r, c);
                data += 0.5 * v * v;
            }
            if c + 1 < w && on != mask.get(r, c + 1) {
                disagreements += 1;
            }
            if r + 1 < h && on != mask.get(r + 1, c) {
                disagreements += 1;
            }
        }
    }
    data + params.lambda_a * count as f64 + params.lambda_b * disagreements as f64
}

/// Terminal and pairwise capacities of the segmentation graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGraph {
    pub height: usize,
    pub width: usize,
    /// Capacity from the source (background terminal) to each pixel.
    pub source_caps: Vec<f64>,
    /// Capacity from each pixel to the sink (foreground terminal).
    pub sink_caps: Vec<f64>,
    /// Capacity of every 4-neighbour edge.
    pub pairwise: f64,
}

impl GridGraph {
    pub fn build(residual: &Matrix, params: &MrfParams) -> Result<Self> {
        params.validate()?;
        let n = residual.rows() * residual.cols();
        let mut source_caps = vec![0.0; n];
        let mut sink_caps = vec![0.0; n];
        for (k, &r) in residual.data().iter().enumerate() {
            let w = params.lambda_a - 0.5 * r * r;
            if w > 0.0 {
                source_caps[k] = w;
            } else if w < 0.0 {
                sink_caps[k] = -w;
            }
        }
        Ok(Self {
            height: residual.rows(),
            width: residual.cols(),
            source_caps,
            sink_caps,
            pairwise: params.lambda_b,
        })
    }

    /// Minimum cut. Returns the labeling and the max-flow value; ties
    /// between minimum cuts resolve to the smallest foreground.
    pub fn solve(&self) -> (ForegroundMask, f64) {
        let (h, w) = (self.height, self.width);
        let n = h * w;
        let (s, t) = (n, n + 1);
        let mut g = FlowGraph::new(n + 2);
        for k in 0..n {
            if self.source_caps[k] > 0.0 {
                g.add_edge(s, k, self.source_caps[k]);
            }
            if self.sink_caps[k] > 0.0 {
                g.add_edge(k, t, self.sink_caps[k]);
            }
        }
        if self.pairwise > 0.0 {
            for r in 0..h {
                for c in 0..w {
                    let k = r * w + c;
                    if c + 1 < w {
                        g.add_undirected(k, k + 1, self.pairwise);
                    }
                    if r + 1 < h {
                        g.add_undirected(k, k + w, self.pairwise);
                    }
                }
            }
        }
        let flow = g.max_flow(s, t);
        let mut labels = g.reaches_sink(t);
        labels.truncate(n);
        (
            ForegroundMask {
                height: h,
                width: w,
                labels,
            },
            flow,
        )
    }
}

/// Globally minimal labeling of the Ising energy.
pub fn segment(residual: &Matrix, params: &MrfParams) -> Result<ForegroundMask> {
    Ok(segment_with_flow(residual, params)?.0)
}

/// [`segment`] plus the max-flow value, which equals the minimum energy
/// minus `Σ ½ r²` plus `Σ_{w<0} |w|`.
pub fn segment_with_flow(residual: &Matrix, params: &MrfParams) -> Result<(ForegroundMask, f64)> {
    Ok(GridGraph::build(residual, params)?.solve())
}

/// Constant separating the max-flow value from the minimum energy:
/// `min E = flow + Σ ½ r² − Σ_{w<0} |w|`.
pub fn energy_offset(residual: &Matrix, params: &MrfParams) -> f64 {
    residual
        .data()
        .iter()
        .map(|&r| {
            let half_sq = 0.5 * r * r;
            let w = params.lambda_a - half_sq;
            half_sq + w.min(0.0)
        })
        .sum()
}

/// Grayscale both images, subtract, resolve the weights against the
/// residual and segment.
pub fn detect(
    frame: &DenseTensor,
    background: &BackgroundFrame,
    settings: &MrfSettings,
) -> Result<ForegroundMask> {
    let residual = subtract(&frame_to_gray(frame)?, &background.to_gray()?)?;
    segment(&residual, &settings.resolve(&residual)?)
}
