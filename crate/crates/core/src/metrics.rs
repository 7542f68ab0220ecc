//! Layout evaluation metrics.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{lonlat_to_uv, uv_to_lonlat};
use crate::layout::{layout_to_corners, LayoutParams, RoomLayout, DEFAULT_CAMERA_HEIGHT};
use crate::polygon::{self, Point2};

pub const EVAL_WIDTH: usize = 1024;
pub const EVAL_HEIGHT: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou3d: f64,
    pub iou2d: f64,
    /// Percent of the panorama diagonal.
    pub corner_error: f64,
    /// Percent of mislabeled pixels.
    pub pixel_error: f64,
    pub delta_1: f64,
}

/// Areas of `a`, `b` and their intersection, accumulated over the same
/// compressed grid so identical polygons give bitwise identical values.
fn overlap_areas(a: &[Point2], b: &[Point2]) -> (f64, f64, f64) {
    let mut xs: Vec<f64> = a.iter().chain(b).map(|p| p[0]).collect();
    let mut ys: Vec<f64> = a.iter().chain(b).map(|p| p[1]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let (mut area_a, mut area_b, mut inter) = (0.0, 0.0, 0.0);
    for yw in ys.windows(2) {
        for xw in xs.windows(2) {
            let c = [(xw[0] + xw[1]) / 2.0, (yw[0] + yw[1]) / 2.0];
            let cell = (xw[1] - xw[0]) * (yw[1] - yw[0]);
            let (ia, ib) = (polygon::contains(a, c), polygon::contains(b, c));
            if ia {
                area_a += cell;
            }
            if ib {
                area_b += cell;
            }
            if ia && ib {
                inter += cell;
            }
        }
    }
    (area_a, area_b, inter)
}

fn ratio(inter: f64, a: f64, b: f64) -> f64 {
    let union = a + b - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Floor-plan intersection over union.
pub fn iou2d(a: &LayoutParams, b: &LayoutParams) -> f64 {
    let (aa, ab, inter) = overlap_areas(&a.floor_polygon(), &b.floor_polygon());
    ratio(inter, aa, ab)
}

/// Volumetric intersection over union of the room prisms.
pub fn iou3d(a: &LayoutParams, b: &LayoutParams) -> f64 {
    let (aa, ab, inter) = overlap_areas(&a.floor_polygon(), &b.floor_polygon());
    let span = |t: &LayoutParams| (t.floor_z(), t.ceiling_z());
    let ((a0, a1), (b0, b1)) = (span(a), span(b));
    let overlap = (a1.min(b1) - a0.max(b0)).max(0.0);
    ratio(inter * overlap, aa * (a1 - a0), ab * (b1 - b0))
}

fn pixel_distance(p: [f64; 2], q: [f64; 2], width: usize, height: usize) -> f64 {
    let (pu, pv) = lonlat_to_uv(p[0], p[1], width, height);
    let (qu, qv) = lonlat_to_uv(q[0], q[1], width, height);
    let du = (pu - qu).abs();
    let du = du.min(width as f64 - du);
    du.hypot(pv - qv)
}

/// Mean distance between matched panorama corners in percent of the image
/// diagonal. Wall-wall edges are paired greedily by nearest longitude; each
/// corner of an unmatched edge costs an eighth of the diagonal.
pub fn corner_error(a: &RoomLayout, b: &RoomLayout, width: usize, height: usize) -> f64 {
    let diag = (width as f64).hypot(height as f64);
    let (na, nb) = (a.n_walls(), b.n_walls());
    let lon_gap = |i: usize, j: usize| {
        let d = (a.floor(i)[0] - b.floor(j)[0]).rem_euclid(2.0 * PI);
        d.min(2.0 * PI - d)
    };
    let mut pairs: Vec<(usize, usize)> = (0..na).flat_map(|i| (0..nb).map(move |j| (i, j))).collect();
    pairs.sort_by(|p, q| {
        lon_gap(p.0, p.1)
            .total_cmp(&lon_gap(q.0, q.1))
            .then(p.cmp(q))
    });
    let (mut used_a, mut used_b) = (vec![false; na], vec![false; nb]);
    let mut total = 0.0;
    let mut matched = 0;
    for (i, j) in pairs {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        matched += 1;
        total += pixel_distance(a.ceiling(i), b.ceiling(j), width, height);
        total += pixel_distance(a.floor(i), b.floor(j), width, height);
    }
    let unmatched = na.max(nb) - matched;
    total += 2.0 * unmatched as f64 * diag / 8.0;
    let count = 2 * na.max(nb);
    if count == 0 {
        return 0.0;
    }
    total / count as f64 / diag * 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceClass {
    Ceiling,
    Wall,
    Floor,
}

/// Horizontal distance to the walls along every column's azimuth.
fn column_distances(t: &LayoutParams, width: usize, height: usize) -> Vec<f64> {
    let poly = t.floor_polygon();
    (0..width)
        .map(|i| {
            let (lon, _) = uv_to_lonlat(i as f64 + 0.5, 0.0, width, height);
            polygon::ray_cast(&poly, [0.0, 0.0], [lon.sin(), lon.cos()]).unwrap_or(f64::INFINITY)
        })
        .collect()
}

fn row_latitudes(width: usize, height: usize) -> Vec<f64> {
    (0..height)
        .map(|j| uv_to_lonlat(0.0, j as f64 + 0.5, width, height).1)
        .collect()
}

/// Ceiling/wall/floor label of every panorama pixel, row-major.
pub fn classify_pixels(t: &LayoutParams, width: usize, height: usize) -> Vec<SurfaceClass> {
    let dist = column_distances(t, width, height);
    let lats = row_latitudes(width, height);
    let mut out = Vec::with_capacity(width * height);
    for lat in &lats {
        for d in &dist {
            let up = t.ceiling_z().atan2(*d);
            let down = t.floor_z().atan2(*d);
            out.push(if *lat > up {
                SurfaceClass::Ceiling
            } else if *lat < down {
                SurfaceClass::Floor
            } else {
                SurfaceClass::Wall
            });
        }
    }
    out
}

/// Percent of pixels whose surface class differs. Classes depend only on
/// the corner directions, so the layouts are lifted with a nominal camera
/// height.
pub fn pixel_error(a: &RoomLayout, b: &RoomLayout, width: usize, height: usize) -> Result<f64> {
    let ta = a.to_params(DEFAULT_CAMERA_HEIGHT)?;
    let tb = b.to_params(DEFAULT_CAMERA_HEIGHT)?;
    Ok(pixel_error_params(&ta, &tb, width, height))
}

pub fn pixel_error_params(a: &LayoutParams, b: &LayoutParams, width: usize, height: usize) -> f64 {
    let ca = classify_pixels(a, width, height);
    let cb = classify_pixels(b, width, height);
    let wrong = ca
        .par_iter()
        .zip(cb.par_iter())
        .filter(|(x, y)| x != y)
        .count();
    wrong as f64 / (width * height) as f64 * 100.0
}

/// Distance along every pixel ray to the layout surface, row-major.
pub fn layout_depth(t: &LayoutParams, width: usize, height: usize) -> Vec<f64> {
    let dist = column_distances(t, width, height);
    let lats = row_latitudes(width, height);
    let mut out = Vec::with_capacity(width * height);
    for lat in &lats {
        let (s, c) = lat.sin_cos();
        for d in &dist {
            let wall = d / c;
            let cap = if s > 0.0 {
                t.ceiling_z() / s
            } else if s < 0.0 {
                t.floor_z() / s
            } else {
                f64::INFINITY
            };
            out.push(wall.min(cap));
        }
    }
    out
}

/// Fraction of pixels whose depth ratio is within `1.25^i`.
pub fn delta_i(a: &LayoutParams, b: &LayoutParams, width: usize, height: usize, i: i32) -> f64 {
    let da = layout_depth(a, width, height);
    let db = layout_depth(b, width, height);
    let limit = 1.25f64.powi(i);
    let good = da
        .par_iter()
        .zip(db.par_iter())
        .filter(|(x, y)| (*x / *y).max(*y / *x) <= limit)
        .count();
    good as f64 / (width * height) as f64
}

/// All metrics of a prediction against the ground truth at the standard
/// 512 x 1024 evaluation resolution.
pub fn evaluate(pred: &LayoutParams, gt: &LayoutParams) -> Result<MetricsReport> {
    let (w, h) = (EVAL_WIDTH, EVAL_HEIGHT);
    let lp = layout_to_corners(pred)?;
    let lg = layout_to_corners(gt)?;
    Ok(MetricsReport {
        iou3d: iou3d(pred, gt),
        iou2d: iou2d(pred, gt),
        corner_error: corner_error(&lp, &lg, w, h),
        pixel_error: pixel_error_params(pred, gt, w, h),
        delta_1: delta_i(pred, gt, w, h, 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn l_room() -> LayoutParams {
        LayoutParams::new(vec![2.0, -3.0, -2.5, 1.5, -1.2, 4.0], 2.8, 1.6)
    }

    #[test]
    fn identity_metrics_are_exact() {
        let t = l_room();
        let r = evaluate(&t, &t).unwrap();
        assert_eq!(
            (r.iou3d, r.iou2d, r.corner_error, r.pixel_error, r.delta_1),
            (1.0, 1.0, 0.0, 0.0, 1.0)
        );
    }

    #[test]
    fn shifted_unit_cube() {
        // Unit cube [-0.5, 0.5]^2 x [-0.5, 0.5] against a copy shifted by 0.5.
        let a = LayoutParams::new(vec![0.5, -0.5, -0.5, 0.5], 1.0, 0.5);
        let b = LayoutParams::new(vec![0.5, 0.0, -0.5, 1.0], 1.0, 0.5);
        assert_abs_diff_eq!(iou3d(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(iou2d(&a, &b), 1.0 / 3.0, epsilon = 1e-12);
        let far = LayoutParams::new(vec![0.5, 2.0, -0.5, 3.0], 1.0, 0.5);
        assert_eq!(iou2d(&a, &far), 0.0);
    }

    #[test]
    fn corner_error_of_one_moved_corner() {
        let t = LayoutParams::cuboid(2.0, 2.0, 2.0, 2.0, 3.0);
        let a = layout_to_corners(&t).unwrap();
        let mut b = a.clone();
        // Ten pixels down on the 512-row panorama.
        b.corners[1][1] -= 10.0 * PI / 512.0;
        let e = corner_error(&a, &b, 1024, 512);
        let want = 10.0 / (8.0 * (512f64 * 512.0 + 1024.0 * 1024.0).sqrt()) * 100.0;
        assert_abs_diff_eq!(e, want, epsilon = 1e-9);
        assert_abs_diff_eq!(corner_error(&b, &a, 1024, 512), e, epsilon = 1e-12);
    }

    #[test]
    fn corner_error_penalizes_missing_corners() {
        let a = layout_to_corners(&l_room()).unwrap();
        let b = layout_to_corners(&LayoutParams::new(vec![2.0, -3.0, -2.5, 4.0], 2.8, 1.6)).unwrap();
        let e = corner_error(&a, &b, 1024, 512);
        assert!(e > 100.0 / 8.0 * 2.0 / 12.0);
    }

    #[test]
    fn pixel_error_counts_shifted_ceiling() {
        let a = LayoutParams::cuboid(2.0, 2.0, 2.0, 2.0, 3.0);
        let b = LayoutParams::cuboid(2.0, 2.0, 2.0, 2.0, 3.3);
        let (w, h) = (256, 128);
        let ca = classify_pixels(&a, w, h);
        let cb = classify_pixels(&b, w, h);
        let diff = ca.iter().zip(&cb).filter(|(x, y)| x != y).count();
        assert!(diff > 0);
        assert!(ca
            .iter()
            .zip(&cb)
            .filter(|(x, y)| x != y)
            .all(|(x, y)| *x == SurfaceClass::Ceiling && *y == SurfaceClass::Wall));
        let la = layout_to_corners(&a).unwrap();
        let lb = layout_to_corners(&b).unwrap();
        let e = pixel_error(&la, &lb, w, h).unwrap();
        assert_abs_diff_eq!(e, diff as f64 / (w * h) as f64 * 100.0, epsilon = 1e-12);
    }

    #[test]
    fn delta_under_uniform_scaling() {
        let t = l_room();
        assert_eq!(delta_i(&t, &t.scaled(1.3), 256, 128, 1), 0.0);
        assert_eq!(delta_i(&t, &t.scaled(1.2), 256, 128, 1), 1.0);
    }
}
