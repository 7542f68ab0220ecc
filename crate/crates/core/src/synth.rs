//! Synthetic Manhattan rooms and a ray-cast panorama renderer.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{lonlat_to_direction, uv_to_lonlat, EquirectImage, Vec3};
use crate::layout::{
    corners_to_tile_lines, layout_to_corners, line_targets, LayoutParams, LineTargets, RoomLayout,
    DEFAULT_CAMERA_HEIGHT,
};
use crate::polygon::{self, Point2};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RenderStyle {
    /// Dark wireframe edges on light surfaces.
    Wireframe,
    /// Flat colors per surface class.
    Shaded,
    /// Shaded surfaces with value noise and wireframe edges.
    TexturedNoise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomSpec {
    pub layout: LayoutParams,
    pub style: RenderStyle,
    /// Wireframe line width in panorama pixels.
    pub line_width: f64,
    pub seed: u64,
    /// Render with 2 x 2 samples per pixel.
    pub supersample: bool,
}

pub const DEFAULT_LINE_WIDTH: f64 = 2.0;

impl RoomSpec {
    /// Spec with the default line width, seed 0 and no supersampling.
    pub fn new(layout: LayoutParams, style: RenderStyle) -> Self {
        Self {
            layout,
            style,
            line_width: DEFAULT_LINE_WIDTH,
            seed: 0,
            supersample: false,
        }
    }
}

const HALF_EXTENT: (f64, f64) = (2.0, 5.0);
const CUT_FRACTION: (f64, f64) = (0.25, 0.55);
const ROOM_HEIGHT: (f64, f64) = (2.4, 3.5);

/// Random rectilinear room with `n_walls` walls around the camera: a box
/// with `(n_walls - 4) / 2` of its corners cut away by rectangular notches.
/// Notches stay inside their quadrant, so every wall is visible from the
/// camera.
pub fn random_room(seed: u64, n_walls: usize) -> Result<RoomSpec> {
    if n_walls < 4 || n_walls > 10 || n_walls % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "n_walls must be one of 4, 6, 8, 10, got {n_walls}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ext = || rng.gen_range(HALF_EXTENT.0..HALF_EXTENT.1);
    let (front, left, back, right) = (ext(), ext(), ext(), ext());
    // Counterclockwise from the front-left corner.
    let mut poly: Vec<Point2> = vec![[-left, front], [-left, -back], [right, -back], [right, front]];
    let cuts = (n_walls - 4) / 2;
    let mut corners = [0usize, 1, 2, 3];
    for i in (1..4).rev() {
        corners.swap(i, rng.gen_range(0..=i));
    }
    let mut chosen: Vec<usize> = corners[..cuts].to_vec();
    // Replace from the highest index so earlier indices stay put.
    chosen.sort_unstable_by(|a, b| b.cmp(a));
    for c in chosen {
        let v = poly[c];
        let fx = rng.gen_range(CUT_FRACTION.0..CUT_FRACTION.1);
        let fy = rng.gen_range(CUT_FRACTION.0..CUT_FRACTION.1);
        let inner = [v[0] * (1.0 - fx), v[1] * (1.0 - fy)];
        // The edge into the corner is horizontal for even box corners.
        let (a, b) = if c % 2 == 0 {
            ([inner[0], v[1]], [v[0], inner[1]])
        } else {
            ([v[0], inner[1]], [inner[0], v[1]])
        };
        poly.splice(c..=c, [a, inner, b]);
    }
    let room_height = rng.gen_range(ROOM_HEIGHT.0..ROOM_HEIGHT.1);
    let layout = LayoutParams::from_polygon(&poly, room_height, DEFAULT_CAMERA_HEIGHT)?;
    Ok(RoomSpec {
        layout,
        style: RenderStyle::Wireframe,
        line_width: DEFAULT_LINE_WIDTH,
        seed,
        supersample: false,
    })
}

/// The surface a panorama ray hits first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hit {
    Ceiling,
    Floor,
    Wall(usize),
}

/// Ray cast against the room prism; returns the surface and hit point.
pub fn cast_ray(t: &LayoutParams, poly: &[Point2], d: &Vec3) -> (Hit, Vec3) {
    let horiz = d.x.hypot(d.y);
    let mut best = (f64::INFINITY, Hit::Floor);
    if horiz > 0.0 {
        let dir = [d.x / horiz, d.y / horiz];
        let n = poly.len();
        for k in 0..n {
            // Wall k runs from corner k - 1 to corner k.
            let a = poly[(k + n - 1) % n];
            let b = poly[k];
            let edge = [a, b];
            if let Some(s) = polygon::ray_cast(&edge, [0.0, 0.0], dir) {
                let dist = s / horiz;
                if dist < best.0 {
                    best = (dist, Hit::Wall(k));
                }
            }
        }
    }
    if d.z > 0.0 {
        let dist = t.ceiling_z() / d.z;
        if dist < best.0 {
            best = (dist, Hit::Ceiling);
        }
    } else if d.z < 0.0 {
        let dist = t.floor_z() / d.z;
        if dist < best.0 {
            best = (dist, Hit::Floor);
        }
    }
    (best.1, d * best.0)
}

/// Angle between `d` and the nearest point of segment `a -> b`.
fn angle_to_segment(d: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let (ua, ub) = (a.normalize(), b.normalize());
    let end = d.angle(&ua).min(d.angle(&ub));
    let n = ua.cross(&ub);
    let nn = n.norm();
    if nn < 1e-12 {
        return end;
    }
    let n = n / nn;
    // Foot of d on the great circle through a and b.
    let foot = d - n * d.dot(&n);
    if foot.norm() < 1e-12 {
        return end;
    }
    let foot = foot.normalize();
    let inside = ua.cross(&foot).dot(&n) >= 0.0 && foot.cross(&ub).dot(&n) >= 0.0;
    if inside {
        d.dot(&n).abs().min(1.0).asin().min(end)
    } else {
        end
    }
}

/// Wireframe edges bounding a surface.
fn surface_edges(t: &LayoutParams, hit: Hit) -> Vec<(Vec3, Vec3)> {
    let (floor, ceiling) = t.corner_rings();
    let n = floor.len();
    match hit {
        Hit::Floor => (0..n).map(|k| (floor[(k + n - 1) % n], floor[k])).collect(),
        Hit::Ceiling => (0..n).map(|k| (ceiling[(k + n - 1) % n], ceiling[k])).collect(),
        Hit::Wall(k) => {
            let p = (k + n - 1) % n;
            vec![
                (floor[p], floor[k]),
                (ceiling[p], ceiling[k]),
                (floor[p], ceiling[p]),
                (floor[k], ceiling[k]),
            ]
        }
    }
}

fn surface_color(t: &LayoutParams, hit: Hit, style: RenderStyle) -> [f32; 3] {
    match style {
        RenderStyle::Wireframe => [0.85; 3],
        _ => match hit {
            Hit::Ceiling => [0.92, 0.9, 0.84],
            Hit::Floor => [0.38, 0.27, 0.2],
            Hit::Wall(k) if k % 2 == 0 => [0.58, 0.66, 0.72],
            Hit::Wall(_) => {
                let _ = t;
                [0.72, 0.62, 0.5]
            }
        },
    }
}

fn hash_noise(p: &Vec3, seed: u64) -> f32 {
    // Value noise on a 10 cm lattice.
    let q = (p * 10.0).map(|c| c.floor() as i64);
    let mut h = seed ^ 0x9e37_79b9_7f4a_7c15;
    for c in [q.x, q.y, q.z] {
        h ^= c as u64;
        h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h ^= h >> 31;
    }
    (h >> 40) as f32 / (1u64 << 24) as f32 - 0.5
}

const LINE_COLOR: f32 = 0.1;

fn shade(spec: &RoomSpec, poly: &[Point2], d: &Vec3, half_width: f64) -> [f32; 3] {
    let t = &spec.layout;
    let (hit, p) = cast_ray(t, poly, d);
    let mut c = surface_color(t, hit, spec.style);
    if spec.style == RenderStyle::TexturedNoise {
        let n = 0.12 * hash_noise(&p, spec.seed);
        c = c.map(|v| (v + n).clamp(0.0, 1.0));
    }
    if spec.style != RenderStyle::Shaded {
        let near = surface_edges(t, hit)
            .iter()
            .any(|(a, b)| angle_to_segment(d, a, b) <= half_width);
        if near {
            c = [LINE_COLOR; 3];
        }
    }
    c
}

/// Renders the room and returns the panorama with its corner ground truth.
pub fn render_equirect(spec: &RoomSpec, width: usize, height: usize) -> Result<(EquirectImage, RoomLayout)> {
    if width != 2 * height {
        return Err(Error::BadAspect { width, height });
    }
    let corners = layout_to_corners(&spec.layout)?;
    let poly = spec.layout.floor_polygon();
    let half_width = spec.line_width / 2.0 * PI / height as f64;
    let offsets: &[(f64, f64)] = if spec.supersample {
        &[(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)]
    } else {
        &[(0.5, 0.5)]
    };
    let rows: Vec<Vec<f32>> = (0..height)
        .into_par_iter()
        .map(|j| {
            let mut row = Vec::with_capacity(width * 3);
            for i in 0..width {
                let mut acc = [0.0f32; 3];
                for (ox, oy) in offsets {
                    let (lon, lat) = uv_to_lonlat(i as f64 + ox, j as f64 + oy, width, height);
                    let c = shade(spec, &poly, &lonlat_to_direction(lon, lat), half_width);
                    for (a, v) in acc.iter_mut().zip(c) {
                        *a += v;
                    }
                }
                row.extend(acc.map(|v| v / offsets.len() as f32));
            }
            row
        })
        .collect();
    let raster = Raster {
        width,
        height,
        channels: 3,
        data: rows.concat(),
    };
    Ok((EquirectImage::new(raster)?, corners))
}

/// Smoothed line targets of the ground-truth wireframe on every face.
pub fn oracle_targets(spec: &RoomSpec, size: usize, bin_scale: usize, decay: f64) -> Result<LineTargets> {
    let corners = layout_to_corners(&spec.layout)?;
    let lines = corners_to_tile_lines(&corners, size, spec.layout.camera_height)?;
    Ok(line_targets(&lines, size, bin_scale, decay))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lonlat_to_uv;
    use crate::metrics::{classify_pixels, SurfaceClass};

    #[test]
    fn deterministic_and_valid() {
        for n in [4, 6, 8, 10] {
            assert_eq!(random_room(7, n).unwrap(), random_room(7, n).unwrap());
        }
        for seed in 0..1000u64 {
            let n = 4 + 2 * (seed as usize % 4);
            let spec = random_room(seed, n).unwrap();
            let t = &spec.layout;
            assert_eq!(t.n_walls(), n);
            t.validate().unwrap();
            for c in &t.walls {
                assert!(c.abs() >= 0.5 * t.camera_height && c.abs() <= 40.0 * t.camera_height);
            }
        }
        assert!(random_room(1, 5).is_err());
    }

    #[test]
    fn four_walls_is_a_box() {
        let t = random_room(3, 4).unwrap().layout;
        assert!(t.walls[0] > 0.0 && t.walls[1] < 0.0 && t.walls[2] < 0.0 && t.walls[3] > 0.0);
    }

    #[test]
    fn corners_are_drawn_dark() {
        let spec = random_room(11, 4).unwrap();
        let (img, gt) = render_equirect(&spec, 512, 256).unwrap();
        let r = img.raster();
        for c in &gt.corners {
            let (u, v) = lonlat_to_uv(c[0], c[1], 512, 256);
            let (i, j) = ((u.floor() as usize).min(511), (v.floor() as usize).min(255));
            assert!(r.get(i, j, 0) < 0.5, "corner at ({i}, {j}) is not dark");
        }
    }

    #[test]
    fn shaded_classes_match_metrics_raster() {
        let mut spec = random_room(5, 8).unwrap();
        spec.style = RenderStyle::Shaded;
        let (w, h) = (256, 128);
        let (img, _) = render_equirect(&spec, w, h).unwrap();
        let classes = classify_pixels(&spec.layout, w, h);
        let r = img.raster();
        let mut mismatch = 0;
        for j in 0..h {
            for i in 0..w {
                let p = r.pixel(i, j);
                let class = if p[0] > 0.9 {
                    SurfaceClass::Ceiling
                } else if p[0] < 0.4 {
                    SurfaceClass::Floor
                } else {
                    SurfaceClass::Wall
                };
                if class != classes[j * w + i] {
                    mismatch += 1;
                }
            }
        }
        assert_eq!(mismatch, 0);
    }

    #[test]
    fn segment_angle() {
        let a = Vec3::new(-1.0, 1.0, 0.0);
        let b = Vec3::new(1.0, 1.0, 0.0);
        let d = Vec3::new(0.0, 1.0, 0.1).normalize();
        assert!((angle_to_segment(&d, &a, &b) - 0.1f64.atan()).abs() < 1e-12);
        let beyond = Vec3::new(3.0, 1.0, 0.0).normalize();
        assert!((angle_to_segment(&beyond, &a, &b) - beyond.angle(&b)).abs() < 1e-12);
    }
}
