//! Library results checked against independent reference computations.

use backdrop::engine::{adm_solve, extract_background, BackgroundFrame, EngineConfig};
use backdrop::eval::{confusion, distance_ratio, sweep_n_frames};
use backdrop::io::GrayStack;
use backdrop::mrf::{energy_offset, mrf_energy, segment_with_flow, ForegroundMask, MrfParams};
use backdrop::pipeline::PipelineConfig;
use backdrop::selection::{distance_scores, select, sparse_code, useful_frames, SelectionConfig};
use backdrop::synth::{generate, max_occlusion_fraction, SynthConfig};
use backdrop::tensor::{DenseTensor, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn stack(frames: &[Vec<f64>], h: usize, w: usize) -> GrayStack {
    GrayStack::new(DenseTensor::from_fn(vec![h, w, frames.len()], |i| frames[i[2]][i[0] * w + i[1]]).unwrap())
        .unwrap()
}

#[test]
fn energy_matches_hand_expansion_on_2x2() {
    let mut g = rng(1);
    for _ in 0..50 {
        let r: Vec<f64> = (0..4).map(|_| g.random_range(-1.0..1.0)).collect();
        let (a, b) = (g.random_range(0.0..1.0), g.random_range(0.0..1.0));
        let residual = Matrix::new(2, 2, r.clone()).unwrap();
        let params = MrfParams::new(a, b).unwrap();
        for bits in 0u8..16 {
            let o: Vec<bool> = (0..4).map(|k| bits >> k & 1 == 1).collect();
            let m = ForegroundMask::new(2, 2, o.clone()).unwrap();
            // pixels 0 1 / 2 3; pairs (0,1) (2,3) (0,2) (1,3)
            let mut e = 0.0;
            for k in 0..4 {
                e += if o[k] { a } else { 0.5 * r[k] * r[k] };
            }
            for (p, q) in [(0, 1), (2, 3), (0, 2), (1, 3)] {
                if o[p] != o[q] {
                    e += b;
                }
            }
            assert!((mrf_energy(&m, &residual, &params) - e).abs() < 1e-14);
        }
    }
}

#[test]
fn flow_plus_offset_is_the_minimum_energy() {
    let mut g = rng(2);
    for _ in 0..40 {
        let residual = Matrix::from_fn(3, 4, |_, _| g.random_range(-1.0..1.0));
        let params = MrfParams::new(g.random_range(0.0..0.4), g.random_range(0.0..0.4)).unwrap();
        let (m, flow) = segment_with_flow(&residual, &params).unwrap();
        let best = (0u32..1 << 12)
            .map(|bits| {
                let o = ForegroundMask::from_fn(3, 4, |r, c| bits >> (r * 4 + c) & 1 == 1);
                mrf_energy(&o, &residual, &params)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((flow + energy_offset(&residual, &params) - best).abs() < 1e-12);
        assert!((mrf_energy(&m, &residual, &params) - best).abs() < 1e-12);
    }
}

#[test]
fn distance_scores_match_pairwise_sums() {
    let mut g = rng(3);
    let frames: Vec<Vec<f64>> = (0..3).map(|_| (0..20).map(|_| g.random::<f64>()).collect()).collect();
    let scores = distance_scores(&stack(&frames, 4, 5), &[0, 1, 2]).unwrap();
    for i in 0..3 {
        let mut sum = 0.0;
        for j in 0..3 {
            if j != i {
                sum += frames[i].iter().zip(&frames[j]).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
        }
        assert!((scores[i] - sum.sqrt()).abs() < 1e-10);
    }

    let zero_one = [vec![0.0; 12], vec![1.0; 12]];
    let s = distance_scores(&stack(&zero_one, 3, 4), &[0, 1]).unwrap();
    assert_eq!(s, vec![12f64.sqrt(), 12f64.sqrt()]);
    assert!(distance_scores(&stack(&zero_one, 3, 4), &[0]).is_err());
}

#[test]
fn confusion_matches_brute_force() {
    let mut g = rng(4);
    let p = ForegroundMask::from_fn(8, 8, |_, _| g.random_bool(0.4));
    let t = ForegroundMask::from_fn(8, 8, |_, _| g.random_bool(0.3));
    let c = confusion(&p, &t).unwrap();
    let mut counts = [0u64; 4];
    for r in 0..8 {
        for col in 0..8 {
            let k = match (p.get(r, col), t.get(r, col)) {
                (true, true) => 0,
                (true, false) => 1,
                (false, false) => 2,
                (false, true) => 3,
            };
            counts[k] += 1;
        }
    }
    assert_eq!([c.true_pos, c.false_pos, c.true_neg, c.false_neg], counts);
}

#[test]
fn distance_ratio_matches_direct_norms() {
    let mut g = rng(5);
    let a: Vec<f64> = (0..24).map(|_| g.random::<f64>()).collect();
    let b: Vec<f64> = (0..24).map(|_| g.random::<f64>()).collect();
    let frame = |v: &[f64]| BackgroundFrame::new(DenseTensor::new(vec![2, 4, 3], v.to_vec()).unwrap()).unwrap();
    let num: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    assert!((distance_ratio(&frame(&a), &frame(&b)).unwrap() - num / den).abs() < 1e-12);
    let doubled: Vec<f64> = b.iter().map(|v| 2.0 * v).collect();
    assert!((distance_ratio(&frame(&doubled), &frame(&b)).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn scalar_adm_absorbs_the_outlier() {
    let d = DenseTensor::new(vec![1, 1, 1, 3], vec![0.0, 0.0, 3.0]).unwrap();
    let out = adm_solve(&d, 1.0, 1e-10, 10_000).unwrap();
    let b = out.background.data()[0];
    assert!(out.converged);
    assert!((-1e-9..=1.0).contains(&b), "background {b}");
    assert!(b < 1.0, "not pulled below the plain mean: {b}");
    // The ℓ1 solution of three samples is their median.
    assert!(b.abs() < 1e-6, "background {b}");
    assert!(out.sparse.data()[2] > 2.9);
}

#[test]
fn adm_reaches_feasibility_on_random_inputs() {
    let mut g = rng(6);
    for _ in 0..5 {
        let d = DenseTensor::from_fn(vec![8, 8, 3, 5], |_| g.random::<f64>()).unwrap();
        let out = adm_solve(&d, 5.0, 1e-4, 1000).unwrap();
        assert!(out.converged);
        assert!(out.residual <= 1e-3, "residual {}", out.residual);
        let mut recon = 0.0;
        let mut norm = 0.0;
        for (k, (&dv, &sv)) in d.data().iter().zip(out.sparse.data()).enumerate() {
            let bv = out.background.data()[k / 5];
            recon += (dv - bv - sv).powi(2);
            norm += dv * dv;
        }
        assert!((recon / norm).sqrt() <= 1e-3);
    }
}

#[test]
fn identical_frames_plus_one_outlier() {
    let mut g = rng(7);
    let base: Vec<f64> = (0..64).map(|_| g.random_range(0.2..0.5)).collect();
    let mut outlier = base.clone();
    for r in 2..6 {
        for c in 2..6 {
            outlier[r * 8 + c] = 0.95;
        }
    }
    let mut frames = vec![base; 30];
    frames.insert(17, outlier);
    let gray = stack(&frames, 8, 8);
    let cfg = SelectionConfig {
        n_select: 1,
        ..SelectionConfig::default()
    };
    let result = select(&gray, &cfg).unwrap();
    assert!(result.useful_indices.contains(&17));
    assert_eq!(result.selected_indices, vec![17]);
}

#[test]
fn duplicated_frames_are_useful_and_convex_combination_is_used() {
    let mut g = rng(8);
    let x: Vec<f64> = (0..36).map(|_| g.random::<f64>()).collect();
    let c = sparse_code(&stack(&[x.clone(), x], 6, 6), 0.1).unwrap();
    assert_eq!(useful_frames(&c, 1e-3), vec![0, 1]);
    // One Gram entry per frame: c = (G − λ)/G with λ = 0.1 G.
    assert!((c.get(0, 1) - 0.9).abs() < 1e-9);

    let f1: Vec<f64> = (0..36).map(|_| g.random::<f64>()).collect();
    let f2: Vec<f64> = (0..36).map(|_| g.random::<f64>()).collect();
    let f3: Vec<f64> = f1.iter().zip(&f2).map(|(a, b)| 0.5 * (a + b)).collect();
    let c = sparse_code(&stack(&[f1, f2, f3], 6, 6), 0.01).unwrap();
    assert!(c.get(0, 2) > 0.0 && c.get(1, 2) > 0.0);
    for j in 0..3 {
        assert_eq!(c.get(j, j), 0.0);
    }
}

#[test]
fn static_scene_with_noise_has_a_decreasing_distance_ratio() {
    let scene = generate(&SynthConfig {
        height: 48,
        width: 48,
        frames: 80,
        moving_object: false,
        seed: 21,
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = PipelineConfig::default();
    let report = sweep_n_frames(&scene.frames, &[5, 25, 30], 30, &cfg).unwrap();
    let ratio = |n| report.points.iter().find(|p| p.n_frames == n).unwrap().ratio;
    assert_eq!(ratio(30), 0.0);
    assert!(ratio(25) <= ratio(5), "{} vs {}", ratio(25), ratio(5));
}

#[test]
fn benchmark_distance_ratio_plateaus() {
    let scene = generate(&SynthConfig::default()).unwrap();
    let report = sweep_n_frames(&scene.frames, &[5, 25, 30, 40], 40, &PipelineConfig::default()).unwrap();
    let ratio = |n| report.points.iter().find(|p| p.n_frames == n).unwrap().ratio;
    assert_eq!(ratio(40), 0.0);
    assert!(ratio(25) <= ratio(5));
    assert!((ratio(25) - ratio(30)).abs() <= 0.2 * ratio(5), "{} {} {}", ratio(5), ratio(25), ratio(30));
    assert_eq!(report.standard_indices.len(), 40);
}

#[test]
fn benchmark_trajectory_keeps_pixels_visible() {
    let cfg = SynthConfig::default();
    let scene = generate(&cfg).unwrap();
    let occ = max_occlusion_fraction(&scene.masks);
    assert!(occ <= 0.30, "{occ}");
    // Same bound from the trajectory alone: a pixel is covered while the
    // square's origin lies within `square` of it on both axes.
    let worst = (0..cfg.height)
        .step_by(3)
        .flat_map(|r| (0..cfg.width).step_by(3).map(move |c| (r, c)))
        .map(|(r, c)| {
            (0..cfg.frames)
                .filter(|&t| {
                    let (r0, c0) = cfg.square_origin(t);
                    r0 <= r && r < r0 + cfg.square && c0 <= c && c < c0 + cfg.square
                })
                .count()
        })
        .max()
        .unwrap();
    assert!(worst as f64 / cfg.frames as f64 <= 0.30);
}

#[test]
fn engine_result_stays_in_the_sample_range() {
    let scene = generate(&SynthConfig {
        height: 32,
        width: 32,
        frames: 20,
        square: 8,
        seed: 12,
        ..SynthConfig::default()
    })
    .unwrap();
    let result = extract_background(&scene.frames, &EngineConfig::default()).unwrap();
    let n = 20;
    for (k, &b) in result.background.data().iter().enumerate() {
        let s = &scene.frames.data()[k * n..(k + 1) * n];
        let lo = s.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= b && b <= hi);
    }
    assert!(result.converged);
    assert_eq!(result.history.len(), result.outer_iters);
}
