//! Discriminative frame selection.
//!
//! Every grayscale frame is coded as a sparse combination of the *other*
//! frames (lasso with a zero diagonal). Frames that take part in some other
//! frame's code form the useful set; among those, the frames farthest (or
//! nearest) from the rest in Euclidean distance are kept.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::GrayStack;
use crate::tensor::{shrink, Matrix};

pub const DEFAULT_N_SELECT: usize = 25;
pub const DEFAULT_LAMBDA_REL: f64 = 0.1;
pub const DEFAULT_TAU_REL: f64 = 1e-3;

/// Inner solver settings for the per-column lasso problems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LassoOptions {
    /// KKT violation tolerance, relative to the column's largest correlation.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_sweeps: 500,
        }
    }
}

/// Self-representation coefficients. Column `j` codes frame `j`; the
/// diagonal is structurally zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix(Matrix);

impl CoefficientMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::invalid("coefficient matrix must be square"));
        }
        if (0..m.rows()).any(|i| m.get(i, i) != 0.0) {
            return Err(Error::invalid("coefficient matrix diagonal must be zero"));
        }
        if m.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite coefficient".into()));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    MostDistinct,
    LeastDistinct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionConfig {
    pub n_select: usize,
    pub lambda_rel: f64,
    pub tau_rel: f64,
    pub direction: Direction,
    pub lasso: LassoOptions,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            n_select: DEFAULT_N_SELECT,
            lambda_rel: DEFAULT_LAMBDA_REL,
            tau_rel: DEFAULT_TAU_REL,
            direction: Direction::MostDistinct,
            lasso: LassoOptions::default(),
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_select == 0 {
            return Err(Error::invalid("n_select must be at least 1"));
        }
        if !(self.lambda_rel > 0.0 && self.lambda_rel.is_finite()) {
            return Err(Error::invalid("lambda_rel must be positive"));
        }
        if !(self.tau_rel > 0.0 && self.tau_rel.is_finite()) {
            return Err(Error::invalid("tau_rel must be positive"));
        }
        if self.lasso.tol.is_nan() || self.lasso.tol <= 0.0 || self.lasso.max_sweeps == 0 {
            return Err(Error::invalid("lasso tolerance and sweep cap must be positive"));
        }
        Ok(())
    }
}

/// Frame indices are 0-based positions in the input sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub useful_indices: Vec<usize>,
    pub selected_indices: Vec<usize>,
    /// Distance score of each useful frame, aligned with `useful_indices`.
    pub scores: Vec<f64>,
}

/// Gram matrix of the vectorized frames, `frames × frames`.
pub fn gram_matrix(vectors: &[Vec<f64>]) -> Matrix {
    let n = vectors.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j < i {
                        0.0
                    } else {
                        dot(&vectors[i], &vectors[j])
                    }
                })
                .collect()
        })
        .collect();
    Matrix::from_fn(n, n, |i, j| if j >= i { rows[i][j] } else { rows[j][i] })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of one column's lasso solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSolution {
    pub coeffs: Vec<f64>,
    pub lambda: f64,
    pub sweeps: usize,
    pub kkt_violation: f64,
    /// Objective after each sweep, when tracing was requested.
    pub objective_trace: Vec<f64>,
}

/// `½‖x_j − X c‖² + λ‖c‖₁` expressed through the Gram matrix.
pub fn column_objective(gram: &Matrix, j: usize, coeffs: &[f64], lambda: f64) -> f64 {
    let n = gram.rows();
    let mut quad = 0.0;
    let mut lin = 0.0;
    let mut l1 = 0.0;
    for a in 0..n {
        if coeffs[a] == 0.0 {
            continue;
        }
        l1 += coeffs[a].abs();
        lin += coeffs[a] * gram.get(a, j);
        for b in 0..n {
            quad += coeffs[a] * gram.get(a, b) * coeffs[b];
        }
    }
    0.5 * gram.get(j, j) - lin + 0.5 * quad + lambda * l1
}

/// Solves column `j` of the self-representation by cyclic coordinate
/// descent on the Gram matrix, with `λ = lambda_rel · max_{i≠j} |G_ij|`.
pub fn solve_column(
    gram: &Matrix,
    j: usize,
    lambda_rel: f64,
    opts: LassoOptions,
    trace: bool,
) -> ColumnSolution {
    let n = gram.rows();
    let scale = (0..n)
        .filter(|&i| i != j)
        .map(|i| gram.get(i, j).abs())
        .fold(0.0, f64::max);
    let lambda = lambda_rel * scale;
    let mut coeffs = vec![0.0; n];
    let mut objective_trace = Vec::new();
    if scale == 0.0 {
        // Orthogonal to every other frame (or blank): zero is optimal.
        return ColumnSolution {
            coeffs,
            lambda,
            sweeps: 0,
            kkt_violation: 0.0,
            objective_trace,
        };
    }
    // grad = G c − G[:, j]
    let mut grad: Vec<f64> = (0..n).map(|i| -gram.get(i, j)).collect();
    let mut sweeps = 0;
    let mut violation = f64::INFINITY;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        for i in 0..n {
            let gii = gram.get(i, i);
            if i == j || gii <= 0.0 {
                continue;
            }
            let old = coeffs[i];
            let new = shrink(gii * old - grad[i], lambda) / gii;
            if new != old {
                let delta = new - old;
                // G is symmetric, so row i doubles as column i.
                for (g, &gki) in grad.iter_mut().zip(gram.row(i)) {
                    *g += gki * delta;
                }
                coeffs[i] = new;
            }
        }
        if trace {
            objective_trace.push(column_objective(gram, j, &coeffs, lambda));
        }
        violation = kkt_violation(&grad, &coeffs, lambda, j);
        if violation <= opts.tol * scale {
            break;
        }
    }
    ColumnSolution {
        coeffs,
        lambda,
        sweeps,
        kkt_violation: violation,
        objective_trace,
    }
}

fn kkt_violation(grad: &[f64], coeffs: &[f64], lambda: f64, j: usize) -> f64 {
    grad.iter()
        .zip(coeffs)
        .enumerate()
        .filter(|(i, _)| *i != j)
        .map(|(_, (&g, &c))| {
            if c > 0.0 {
                (g + lambda).abs()
            } else if c < 0.0 {
                (g - lambda).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Sparse self-representation of the gray stack.
pub fn sparse_code(gray: &GrayStack, lambda_rel: f64) -> Result<CoefficientMatrix> {
    sparse_code_with(gray, lambda_rel, LassoOptions::default())
}

pub fn sparse_code_with(
    gray: &GrayStack,
    lambda_rel: f64,
    opts: LassoOptions,
) -> Result<CoefficientMatrix> {
    let n = gray.frames();
    if n < 2 {
        return Err(Error::invalid(format!(
            "sparse coding needs at least 2 frames, got {n}"
        )));
    }
    if !(lambda_rel > 0.0 && lambda_rel.is_finite()) {
        return Err(Error::invalid("lambda_rel must be positive"));
    }
    if !gray.tensor().is_finite() {
        return Err(Error::Data("gray stack contains non-finite values".into()));
    }
    let gram = gram_matrix(&gray.frame_vectors());
    Ok(sparse_code_gram(&gram, lambda_rel, opts))
}

/// Column-parallel solve against a precomputed Gram matrix.
pub fn sparse_code_gram(gram: &Matrix, lambda_rel: f64, opts: LassoOptions) -> CoefficientMatrix {
    let n = gram.rows();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| solve_column(gram, j, lambda_rel, opts, false).coeffs)
        .collect();
    CoefficientMatrix(Matrix::from_fn(n, n, |i, j| columns[j][i]))
}

/// Frames whose row of `C` carries an entry above `tau_rel · max|C|`.
/// When `C` vanishes every frame is returned.
pub fn useful_frames(c: &CoefficientMatrix, tau_rel: f64) -> Vec<usize> {
    let m = c.matrix();
    let peak = m.max_abs();
    if peak == 0.0 {
        return (0..m.rows()).collect();
    }
    let cut = tau_rel * peak;
    (0..m.rows())
        .filter(|&i| m.row(i).iter().any(|v| v.abs() > cut))
        .collect()
}

/// `d(I_i) = sqrt(Σ_{j≠i} ‖I_i − I_j‖²)` over the candidate frames; scores
/// are aligned with `candidates`.
pub fn distance_scores(gray: &GrayStack, candidates: &[usize]) -> Result<Vec<f64>> {
    if candidates.len() < 2 {
        return Err(Error::invalid(
            "distance scores need at least 2 candidate frames",
        ));
    }
    if let Some(&bad) = candidates.iter().find(|&&i| i >= gray.frames()) {
        return Err(Error::invalid(format!("frame index {bad} out of range")));
    }
    let vectors: Vec<Vec<f64>> = candidates.iter().map(|&k| gray.frame_vector(k)).collect();
    let m = vectors.len();
    let pair: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|a| {
            (0..m)
                .map(|b| {
                    if b <= a {
                        0.0
                    } else {
                        vectors[a]
                            .iter()
                            .zip(&vectors[b])
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum()
                    }
                })
                .collect()
        })
        .collect();
    Ok((0..m)
        .map(|a| {
            (0..m)
                .filter(|&b| b != a)
                .map(|b| if b > a { pair[a][b] } else { pair[b][a] })
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

/// Runs sparse coding, useful-frame extraction and distance ranking.
pub fn select(gray: &GrayStack, cfg: &SelectionConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    let c = sparse_code_with(gray, cfg.lambda_rel, cfg.lasso)?;
    let useful = useful_frames(&c, cfg.tau_rel);
    let scores = if useful.len() >= 2 {
        distance_scores(gray, &useful)?
    } else {
        vec![0.0; useful.len()]
    };
    let mut n = cfg.n_select;
    if n > useful.len() {
        warn!(
            "requested {} frames but only {} are useful; selecting {}",
            n,
            useful.len(),
            useful.len()
        );
        n = useful.len();
    }
    let mut order: Vec<usize> = (0..useful.len()).collect();
    order.sort_by(|&a, &b| {
        let by_score = match cfg.direction {
            Direction::MostDistinct => scores[b].total_cmp(&scores[a]),
            Direction::LeastDistinct => scores[a].total_cmp(&scores[b]),
        };
        by_score.then(useful[a].cmp(&useful[b]))
    });
    let selected_indices = order[..n].iter().map(|&k| useful[k]).collect();
    Ok(SelectionResult {
        useful_indices: useful,
        selected_indices,
        scores,
    })
}
