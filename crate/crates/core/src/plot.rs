//! Figures: confidence heatmaps and layout overlays.

use crate::geometry::{direction_to_equirect_uv, Face, FaceMap};
use crate::hough::{HoughVectors, LineFamily};
use crate::layout::LayoutParams;
use crate::raster::Raster;

const STRIP_H: usize = 12;
const GAP: usize = 4;

/// Black-red-yellow-white ramp.
pub fn heat_color(v: f64) -> [f32; 3] {
    let v = v.clamp(0.0, 1.0);
    [
        (3.0 * v).min(1.0) as f32,
        (3.0 * v - 1.0).clamp(0.0, 1.0) as f32,
        (3.0 * v - 2.0).clamp(0.0, 1.0) as f32,
    ]
}

/// One strip per face and family (H, V, C top to bottom, faces in
/// [`Face::ALL`] order), each vector drawn at one pixel per bin.
pub fn heatmap(vectors: &FaceMap<HoughVectors>) -> Raster {
    let width = vectors
        .iter()
        .flat_map(|(_, v)| LineFamily::ALL.map(|f| v.vector(f).len()))
        .max()
        .unwrap_or(1)
        .max(1);
    let rows = 6 * 3;
    let height = rows * STRIP_H + (rows - 1) * GAP;
    let mut out = Raster::new(width, height, 3);
    for (fi, face) in Face::ALL.into_iter().enumerate() {
        for (k, family) in LineFamily::ALL.into_iter().enumerate() {
            let y0 = (fi * 3 + k) * (STRIP_H + GAP);
            for (x, &v) in vectors[face].vector(family).iter().enumerate() {
                let c = heat_color(v);
                for y in y0..y0 + STRIP_H {
                    for (ch, &val) in c.iter().enumerate() {
                        out.set(x, y, ch, val);
                    }
                }
            }
        }
    }
    out
}

/// The layout wireframe drawn over a panorama: floor and ceiling edges in
/// red, wall-wall edges in green.
pub fn overlay(pano: &Raster, t: &LayoutParams) -> Raster {
    let (w, h) = (pano.width, pano.height);
    let mut out = if pano.channels == 3 {
        pano.clone()
    } else {
        let gray = pano.to_gray();
        Raster::from_fn(w, h, 3, |x, y, _| gray.get(x, y, 0))
    };
    let (floor, ceiling) = t.corner_rings();
    let n = floor.len();
    let mut edges = Vec::with_capacity(3 * n);
    for k in 0..n {
        let prev = (k + n - 1) % n;
        edges.push((floor[prev], floor[k], [1.0, 0.0, 0.0]));
        edges.push((ceiling[prev], ceiling[k], [1.0, 0.0, 0.0]));
        edges.push((floor[k], ceiling[k], [0.0, 1.0, 0.0]));
    }
    let samples = 4 * w;
    for (a, b, color) in edges {
        for i in 0..=samples {
            let p = a + (b - a) * (i as f64 / samples as f64);
            let (u, v) = direction_to_equirect_uv(&p, w, h);
            let (x, y) = (u.floor() as isize, v.floor() as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let xx = (x + dx).rem_euclid(w as isize) as usize;
                    let yy = y + dy;
                    if yy < 0 || yy >= h as isize {
                        continue;
                    }
                    for (ch, &val) in color.iter().enumerate() {
                        out.set(xx, yy as usize, ch, val);
                    }
                }
            }
        }
    }
    out
}
