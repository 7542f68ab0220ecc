//! Confidence maximization by gradient ascent on the layout parameters.

use crate::error::{Error, Result};
use crate::geometry::FaceMap;
use crate::hough::{fractional_bin, HoughVectors, LineFamily};

use super::project::{param_segments, project_segment};
use super::LayoutParams;

pub const DEFAULT_LR: f64 = 0.01;
pub const DEFAULT_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub steps: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            steps: DEFAULT_STEPS,
        }
    }
}

/// Linear interpolation of `v` at fractional index `f` and its slope.
/// Center vectors wrap; the others hold their end values.
fn sample(v: &[f64], f: f64, cyclic: bool) -> (f64, f64) {
    let n = v.len();
    if cyclic {
        let f = f.rem_euclid(n as f64);
        let i0 = (f.floor() as usize).min(n - 1);
        let i1 = (i0 + 1) % n;
        let t = f - i0 as f64;
        let slope = v[i1] - v[i0];
        (v[i0] + t * slope, slope)
    } else if f <= 0.0 {
        (v[0], 0.0)
    } else if f >= (n - 1) as f64 {
        (v[n - 1], 0.0)
    } else {
        let i0 = f.floor() as usize;
        let t = f - i0 as f64;
        let slope = v[i0 + 1] - v[i0];
        (v[i0] + t * slope, slope)
    }
}

fn map_size(s: &FaceMap<HoughVectors>) -> (usize, usize) {
    let v = &s.0[0];
    (v.map_h(), v.bin_scale)
}

/// Sum over the visible projected lines of the interpolated confidence, and
/// its gradient with respect to `[walls..., room_height]`.
pub fn score_and_gradient(t: &LayoutParams, s: &FaceMap<HoughVectors>) -> (f64, Vec<f64>) {
    let (size, bin_scale) = map_size(s);
    let k = bin_scale as f64;
    let segs = param_segments(t);
    let mut total = 0.0;
    let mut grad = vec![0.0; t.n_params()];
    for (face, vectors) in s.iter() {
        for seg in &segs {
            let Some(line) = project_segment(seg, face, size) else {
                continue;
            };
            let family = line.kind.family();
            let f = fractional_bin(&line.kind, size, size, bin_scale);
            let (value, slope) = sample(
                vectors.vector(family),
                f,
                family == LineFamily::Center,
            );
            total += value;
            for (p, d) in line.grad {
                grad[p] += slope * d / k;
            }
        }
    }
    (total, grad)
}

pub fn score(t: &LayoutParams, s: &FaceMap<HoughVectors>) -> f64 {
    score_and_gradient(t, s).0
}

#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub params: LayoutParams,
    pub score: f64,
    pub initial_score: f64,
    /// Step at which the returned iterate was reached (0 = initial).
    pub best_step: usize,
    /// Set when an iterate left the valid parameter space and the initial
    /// layout was returned.
    pub aborted: bool,
}

/// Plain gradient ascent on the score (descent on its negative). Returns the
/// best iterate; if any iterate is an invalid layout the initial parameters
/// are returned unchanged.
pub fn sgd_optimize(
    t0: &LayoutParams,
    s: &FaceMap<HoughVectors>,
    cfg: SgdConfig,
) -> Result<OptimizeResult> {
    t0.validate()?;
    let (initial_score, mut grad) = score_and_gradient(t0, s);
    if !initial_score.is_finite() {
        return Err(Error::InvalidArgument("score of the initial layout is not finite".into()));
    }
    let mut best = OptimizeResult {
        params: t0.clone(),
        score: initial_score,
        initial_score,
        best_step: 0,
        aborted: false,
    };
    let mut x = t0.to_vector();
    for step in 1..=cfg.steps {
        for (xi, g) in x.iter_mut().zip(&grad) {
            *xi += cfg.lr * g;
        }
        let t = LayoutParams::from_vector(&x, t0.camera_height);
        if !t.is_valid() {
            best.params = t0.clone();
            best.score = initial_score;
            best.best_step = 0;
            best.aborted = true;
            return Ok(best);
        }
        let (value, g) = score_and_gradient(&t, s);
        grad = g;
        if value > best.score {
            best.params = t;
            best.score = value;
            best.best_step = step;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{layout_targets, params_to_tile_lines};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    #[test]
    fn zero_vectors_score_zero() {
        let t = LayoutParams::cuboid(2.0, 3.0, 2.5, 1.8, 2.9);
        let s = FaceMap::from_fn(|_| HoughVectors::zeros(128, 128, 1));
        let (v, g) = score_and_gradient(&t, &s);
        assert_eq!(v, 0.0);
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn own_targets_score_near_line_count() {
        let t = LayoutParams::cuboid(2.0, 3.0, 2.5, 1.8, 2.9);
        let s = layout_targets(&t, 256, 1, LN_2);
        let n: usize = params_to_tile_lines(&t, 256).0.iter().map(Vec::len).sum();
        let v = score(&t, &s);
        // Each line sits within half a bin of its peak.
        assert!(v <= n as f64 + 1e-12);
        assert!(v >= n as f64 * 2f64.powf(-0.5) - 1e-12);
    }

    #[test]
    fn wall_shift_lowers_score_by_half_per_line() {
        // Walls chosen so the front-face floor line sits exactly on a bin
        // center: rho = 128 * 1.6 / d = 63.5 + m.
        let size = 256;
        let d = 128.0 * 1.6 / 64.5;
        let t = LayoutParams::cuboid(d, 3.0, 2.5, 1.8, 2.9);
        let s = layout_targets(&t, size, 1, LN_2);
        let front_h = |t: &LayoutParams| -> f64 {
            let sf = FaceMap::from_fn(|f| {
                if f == crate::geometry::Face::Front {
                    s[f].clone()
                } else {
                    HoughVectors::zeros(size, size, 1)
                }
            });
            let mut only_h = sf.clone();
            for v in only_h.0.iter_mut() {
                v.v.iter_mut().for_each(|x| *x = 0.0);
                v.c.iter_mut().for_each(|x| *x = 0.0);
            }
            score(t, &only_h)
        };
        let before = front_h(&t);
        let mut moved = t.clone();
        // One bin further down the tile: rho = 65.5.
        moved.walls[0] = 128.0 * 1.6 / 65.5;
        let after = front_h(&moved);
        // The floor line moves one bin; the ceiling line moves a fraction.
        let ceil_before = 128.0 * 1.3 / d;
        let ceil_after = 128.0 * 1.3 / moved.walls[0];
        assert!(ceil_after - ceil_before < 1.0);
        assert!(before - after >= 0.5 - 1e-9);
        assert!(before > after);
    }

    fn random_targets(rng: &mut ChaCha8Rng, size: usize) -> FaceMap<HoughVectors> {
        FaceMap::from_fn(|_| {
            let mut v = HoughVectors::zeros(size, size, 1);
            for f in LineFamily::ALL {
                for x in v.vector_mut(f).iter_mut() {
                    *x = rng.gen_range(0.0..1.0);
                }
            }
            v
        })
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let size = 128;
        let mut checked = 0;
        while checked < 20 {
            let t = LayoutParams::cuboid(
                rng.gen_range(1.5..4.0),
                rng.gen_range(1.5..4.0),
                rng.gen_range(1.5..4.0),
                rng.gen_range(1.5..4.0),
                rng.gen_range(2.4..3.4),
            );
            let s = random_targets(&mut rng, size);
            let (_, g) = score_and_gradient(&t, &s);
            let x = t.to_vector();
            let h = 1e-6;
            for p in 0..x.len() {
                let mut xp = x.clone();
                xp[p] += h;
                let mut xm = x.clone();
                xm[p] -= h;
                let fd = (score(&LayoutParams::from_vector(&xp, 1.6), &s)
                    - score(&LayoutParams::from_vector(&xm, 1.6), &s))
                    / (2.0 * h);
                assert!(
                    (fd - g[p]).abs() <= 1e-3 * g[p].abs().max(1.0),
                    "param {p}: finite difference {fd}, analytic {}",
                    g[p]
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn ground_truth_is_a_fixed_point() {
        let t = LayoutParams::cuboid(2.0, 3.0, 2.5, 1.8, 2.9);
        let s = layout_targets(&t, 256, 1, LN_2);
        let r = sgd_optimize(&t, &s, SgdConfig::default()).unwrap();
        assert!(r.score >= r.initial_score);
        assert_eq!(r.best_step, 0);
        assert_eq!(r.params, t);
    }

    #[test]
    fn never_worse_than_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let t = LayoutParams::cuboid(2.0, 3.0, 2.5, 1.8, 2.9);
            let s = random_targets(&mut rng, 64);
            let r = sgd_optimize(&t, &s, SgdConfig { lr: 0.01, steps: 20 }).unwrap();
            assert!(r.score >= score(&t, &s));
        }
    }
}
