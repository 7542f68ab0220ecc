//! Parametric Manhattan layouts.
//!
//! A layout with `n` walls is described by `n` signed wall coordinates and
//! the room height. Walls alternate between `y = c` (even index) and `x = c`
//! (odd index) planes and are ordered counterclockwise in the floor plan,
//! starting with the wall in front of the camera (`c_0 > 0`). Wall `k` runs
//! from corner `k - 1` to corner `k`. The camera sits at the origin, the
//! floor at `z = -camera_height` and the ceiling at
//! `z = room_height - camera_height`.

mod init;
mod optimize;
mod project;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{direction_to_lonlat, lonlat_to_direction, FaceMap, Vec3};
use crate::hough::{fractional_bin, HoughVectors, LineFamily, ManhattanLine};
use crate::polygon::{self, Point2};

pub use init::{
    init_distances, init_height, init_layout, observe_lines, CornerObservation, Observations,
    Surface, WallObservation, DEFAULT_MAX_DISTANCE_FACTOR,
};
pub use optimize::{
    score, score_and_gradient, sgd_optimize, OptimizeResult, SgdConfig, DEFAULT_LR, DEFAULT_STEPS,
};
pub use project::{
    corners_to_tile_lines, params_to_tile_lines, project_layout, project_params, ProjectedBin,
    ProjectedLine, MIN_VISIBLE_PX,
};

/// Fixed distance from the camera to the floor, in world units.
pub const DEFAULT_CAMERA_HEIGHT: f64 = 1.6;

/// Default target smoothing rate per bin. Small enough that the summed
/// score stays smooth over several centimetres at 512-pixel tiles, so the
/// default learning rate takes stable steps.
pub const DEFAULT_DECAY: f64 = 0.005;

/// Smoothed per-face ground-truth vectors.
pub type LineTargets = FaceMap<HoughVectors>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WallAxis {
    /// Wall in an `x = c` plane.
    X,
    /// Wall in a `y = c` plane.
    Y,
}

impl WallAxis {
    pub fn of_wall(k: usize) -> WallAxis {
        if k % 2 == 0 {
            WallAxis::Y
        } else {
            WallAxis::X
        }
    }

    /// Index of the fixed coordinate (`0` for x, `1` for y).
    pub fn coord(self) -> usize {
        match self {
            WallAxis::X => 0,
            WallAxis::Y => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutParams {
    /// Signed wall coordinates, alternating y and x planes.
    pub walls: Vec<f64>,
    pub room_height: f64,
    pub camera_height: f64,
}

impl LayoutParams {
    pub fn new(walls: Vec<f64>, room_height: f64, camera_height: f64) -> Self {
        Self {
            walls,
            room_height,
            camera_height,
        }
    }

    /// Axis-aligned box room with distances to the front, left, back and
    /// right walls.
    pub fn cuboid(front: f64, left: f64, back: f64, right: f64, room_height: f64) -> Self {
        Self::new(
            vec![front, -left, -back, right],
            room_height,
            DEFAULT_CAMERA_HEIGHT,
        )
    }

    /// Layout from a counterclockwise rectilinear floor polygon, in
    /// canonical wall order.
    pub fn from_polygon(poly: &[Point2], room_height: f64, camera_height: f64) -> Result<Self> {
        let n = poly.len();
        if !polygon::is_simple_rectilinear(poly) {
            return Err(Error::InvalidLayout("floor polygon is not simple".into()));
        }
        // Edge i runs from vertex i to vertex i + 1.
        let mut walls: Vec<(WallAxis, f64)> = (0..n)
            .map(|i| {
                let (a, b) = (poly[i], poly[(i + 1) % n]);
                if a[1] == b[1] {
                    (WallAxis::Y, a[1])
                } else {
                    (WallAxis::X, a[0])
                }
            })
            .collect();
        if walls[0].0 == WallAxis::X {
            walls.rotate_left(1);
        }
        let mut t = Self::new(walls.into_iter().map(|w| w.1).collect(), room_height, camera_height);
        canonicalize(&mut t);
        t.validate()?;
        Ok(t)
    }

    pub fn n_walls(&self) -> usize {
        self.walls.len()
    }

    /// Number of optimized parameters: the walls and the room height.
    pub fn n_params(&self) -> usize {
        self.walls.len() + 1
    }

    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = self.walls.clone();
        v.push(self.room_height);
        v
    }

    pub fn from_vector(v: &[f64], camera_height: f64) -> Self {
        let (walls, h) = v.split_at(v.len() - 1);
        Self::new(walls.to_vec(), h[0], camera_height)
    }

    pub fn floor_z(&self) -> f64 {
        -self.camera_height
    }

    pub fn ceiling_z(&self) -> f64 {
        self.room_height - self.camera_height
    }

    /// Floor-plan corner `k`, shared by walls `k` and `k + 1`.
    pub fn corner(&self, k: usize) -> Point2 {
        let n = self.walls.len();
        let (a, b) = (self.walls[k % n], self.walls[(k + 1) % n]);
        if k % 2 == 0 {
            [b, a]
        } else {
            [a, b]
        }
    }

    pub fn floor_polygon(&self) -> Vec<Point2> {
        (0..self.walls.len()).map(|k| self.corner(k)).collect()
    }

    pub fn area(&self) -> f64 {
        polygon::area(&self.floor_polygon())
    }

    /// Multiplies every length, including the camera height.
    pub fn scaled(&self, s: f64) -> Self {
        Self::new(
            self.walls.iter().map(|c| c * s).collect(),
            self.room_height * s,
            self.camera_height * s,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.walls.len();
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidLayout(format!(
                "wall count must be even and at least 4, got {n}"
            )));
        }
        if !self.walls.iter().all(|c| c.is_finite()) || !self.room_height.is_finite() {
            return Err(Error::InvalidLayout("non-finite parameter".into()));
        }
        if !(self.camera_height > 0.0 && self.room_height > self.camera_height) {
            return Err(Error::InvalidLayout(format!(
                "need room_height > camera_height > 0, got {} and {}",
                self.room_height, self.camera_height
            )));
        }
        let poly = self.floor_polygon();
        if !polygon::is_simple_rectilinear(&poly) {
            return Err(Error::InvalidLayout("floor polygon is not simple".into()));
        }
        if polygon::signed_area(&poly) <= 0.0 {
            return Err(Error::InvalidLayout("walls are not counterclockwise".into()));
        }
        if !polygon::contains(&poly, [0.0, 0.0]) || polygon::boundary_distance(&poly, [0.0, 0.0]) < 1e-9 {
            return Err(Error::InvalidLayout("camera is outside the room".into()));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    /// Floor and ceiling corner rings in world coordinates.
    pub fn corner_rings(&self) -> (Vec<Vec3>, Vec<Vec3>) {
        let poly = self.floor_polygon();
        let ring = |z: f64| poly.iter().map(|p| Vec3::new(p[0], p[1], z)).collect();
        (ring(self.floor_z()), ring(self.ceiling_z()))
    }
}

/// Corner positions of a layout on the panorama.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomLayout {
    /// `(longitude, latitude)` in radians, alternating ceiling and floor
    /// corner of each wall-wall edge.
    pub corners: Vec<[f64; 2]>,
}

impl RoomLayout {
    pub fn n_walls(&self) -> usize {
        self.corners.len() / 2
    }

    pub fn ceiling(&self, k: usize) -> [f64; 2] {
        self.corners[2 * k]
    }

    pub fn floor(&self, k: usize) -> [f64; 2] {
        self.corners[2 * k + 1]
    }

    /// Lifts the corners back to 3D using the known camera height.
    pub fn corner_rings(&self, camera_height: f64) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
        let n = self.n_walls();
        if n < 4 || self.corners.len() % 2 != 0 {
            return Err(Error::InvalidLayout(format!(
                "need an even number of corner pairs, got {} corners",
                self.corners.len()
            )));
        }
        let mut floor = Vec::with_capacity(n);
        let mut ceiling = Vec::with_capacity(n);
        for k in 0..n {
            let [lon, lat] = self.floor(k);
            if lat >= 0.0 {
                return Err(Error::InvalidLayout(format!(
                    "floor corner {k} is above the horizon"
                )));
            }
            let dist = camera_height / (-lat).tan();
            let d = lonlat_to_direction(lon, 0.0);
            floor.push(Vec3::new(d.x * dist, d.y * dist, -camera_height));
            let [_, clat] = self.ceiling(k);
            ceiling.push(Vec3::new(d.x * dist, d.y * dist, dist * clat.tan()));
        }
        Ok((floor, ceiling))
    }

    /// Recovers layout parameters by averaging the corner coordinates that
    /// share each wall.
    pub fn to_params(&self, camera_height: f64) -> Result<LayoutParams> {
        let (floor, ceiling) = self.corner_rings(camera_height)?;
        let n = floor.len();
        // Wall k joins corner k-1 and corner k.
        let edge = |k: usize| (floor[(k + n - 1) % n], floor[k]);
        let (a, b) = edge(0);
        let start = if (b.x - a.x).abs() >= (b.y - a.y).abs() { 0 } else { 1 };
        let mut walls = Vec::with_capacity(n);
        for i in 0..n {
            let k = (i + start) % n;
            let (a, b) = edge(k);
            let axis = WallAxis::of_wall(i).coord();
            walls.push((a[axis] + b[axis]) / 2.0);
        }
        let up = ceiling.iter().map(|c| c.z).sum::<f64>() / n as f64;
        let mut t = LayoutParams::new(walls, up + camera_height, camera_height);
        canonicalize(&mut t);
        t.validate()?;
        Ok(t)
    }
}

/// Rotates the wall list so that wall 0 is the wall hit by the `+y` ray.
pub fn canonicalize(t: &mut LayoutParams) {
    let poly = t.floor_polygon();
    let n = t.walls.len();
    let Some(hit) = polygon::ray_cast(&poly, [0.0, 0.0], [0.0, 1.0]) else {
        return;
    };
    let best = (0..n / 2)
        .map(|i| 2 * i)
        .filter(|&k| t.walls[k] > 0.0)
        .min_by(|&a, &b| {
            (t.walls[a] - hit)
                .abs()
                .total_cmp(&(t.walls[b] - hit).abs())
        });
    if let Some(k) = best {
        t.walls.rotate_left(k);
    }
}

/// Panorama corners of a layout.
pub fn layout_to_corners(t: &LayoutParams) -> Result<RoomLayout> {
    t.validate()?;
    let (floor, ceiling) = t.corner_rings();
    let mut corners = Vec::with_capacity(2 * floor.len());
    for (f, c) in floor.iter().zip(&ceiling) {
        let (lon, lat) = direction_to_lonlat(c);
        corners.push([lon, lat]);
        let (lon, lat) = direction_to_lonlat(f);
        corners.push([lon, lat]);
    }
    Ok(RoomLayout { corners })
}

fn smooth(positions: &[usize], length: usize, decay: f64, cyclic: bool) -> Vec<f64> {
    let mut v = vec![0.0; length];
    for (i, out) in v.iter_mut().enumerate() {
        let nearest = positions
            .iter()
            .map(|&p| {
                let d = i.abs_diff(p);
                if cyclic {
                    d.min(length - d)
                } else {
                    d
                }
            })
            .min();
        if let Some(d) = nearest {
            *out = (-decay * d as f64).exp();
        }
    }
    v
}

/// `exp(-decay * distance to the nearest position)` for every bin.
pub fn smooth_target(positions: &[usize], length: usize, decay: f64) -> Vec<f64> {
    smooth(positions, length, decay, false)
}

/// Like [`smooth_target`] with distances measured around a circle.
pub fn smooth_target_cyclic(positions: &[usize], length: usize, decay: f64) -> Vec<f64> {
    smooth(positions, length, decay, true)
}

pub const BCE_EPS: f64 = 1e-7;

/// Binary cross entropy summed over entries; predictions are clamped to
/// `[ε, 1 - ε]`.
pub fn bce_loss(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len(), "bce_loss length mismatch");
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum()
}

/// `L(H) + L(V) + L(C)`.
pub fn total_bce(pred: &HoughVectors, target: &HoughVectors) -> f64 {
    LineFamily::ALL
        .iter()
        .map(|&f| bce_loss(pred.vector(f), target.vector(f)))
        .sum()
}

/// Smoothed target vectors with a peak at the nearest bin of every line.
pub fn line_targets(
    lines: &FaceMap<Vec<ManhattanLine>>,
    size: usize,
    bin_scale: usize,
    decay: f64,
) -> LineTargets {
    lines.map(|_, lines| {
        let mut out = HoughVectors::zeros(size, size, bin_scale);
        for family in LineFamily::ALL {
            let len = out.vector(family).len();
            let mut bins: Vec<usize> = lines
                .iter()
                .filter(|l| l.kind.family() == family)
                .map(|l| {
                    let f = fractional_bin(&l.kind, size, size, bin_scale).round();
                    match family {
                        LineFamily::Center => (f as usize) % len,
                        _ => (f.max(0.0) as usize).min(len - 1),
                    }
                })
                .collect();
            bins.sort_unstable();
            bins.dedup();
            *out.vector_mut(family) = match family {
                LineFamily::Center => smooth_target_cyclic(&bins, len, decay),
                _ => smooth_target(&bins, len, decay),
            };
        }
        out
    })
}

/// Targets of the lines a layout projects to.
pub fn layout_targets(t: &LayoutParams, size: usize, bin_scale: usize, decay: f64) -> LineTargets {
    line_targets(&params_to_tile_lines(t, size), size, bin_scale, decay)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WallJson {
    pub axis: WallAxis,
    pub dist: f64,
}

/// On-disk layout representation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutJson {
    pub camera_height: f64,
    pub room_height: f64,
    pub walls: Vec<WallJson>,
    #[serde(default)]
    pub corners: Vec<[f64; 2]>,
}

impl LayoutJson {
    pub fn from_params(t: &LayoutParams) -> Result<Self> {
        let corners = layout_to_corners(t)?.corners;
        Ok(Self {
            camera_height: t.camera_height,
            room_height: t.room_height,
            walls: t
                .walls
                .iter()
                .enumerate()
                .map(|(k, &dist)| WallJson {
                    axis: WallAxis::of_wall(k),
                    dist,
                })
                .collect(),
            corners,
        })
    }

    pub fn to_params(&self) -> Result<LayoutParams> {
        if self.walls.is_empty() {
            return RoomLayout {
                corners: self.corners.clone(),
            }
            .to_params(self.camera_height);
        }
        let mut walls: Vec<f64> = self.walls.iter().map(|w| w.dist).collect();
        if self.walls[0].axis == WallAxis::X {
            walls.rotate_left(1);
        }
        for (k, w) in self.walls.iter().enumerate() {
            let expected = if self.walls[0].axis == WallAxis::X {
                WallAxis::of_wall(k + 1)
            } else {
                WallAxis::of_wall(k)
            };
            if w.axis != expected {
                return Err(Error::InvalidLayout("wall axes must alternate".into()));
            }
        }
        let mut t = LayoutParams::new(walls, self.room_height, self.camera_height);
        t.validate()?;
        canonicalize(&mut t);
        Ok(t)
    }

    pub fn read(path: &Path) -> Result<LayoutParams> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let json: LayoutJson = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        json.to_params()
    }

    pub fn write(t: &LayoutParams, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&Self::from_params(t)?).expect("serializable");
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_4, LN_2, PI};

    fn l_room() -> LayoutParams {
        // Box with its back right corner cut away.
        LayoutParams::new(vec![2.0, -3.0, -2.5, 1.5, -1.2, 4.0], 2.8, 1.6)
    }

    #[test]
    fn cuboid_corners_sit_on_diagonals() {
        let t = LayoutParams::cuboid(3.0, 3.0, 3.0, 3.0, 3.0);
        let l = layout_to_corners(&t).unwrap();
        assert_eq!(l.n_walls(), 4);
        let lons: Vec<f64> = (0..4).map(|k| l.floor(k)[0].to_degrees()).collect();
        for (got, want) in lons.iter().zip([-45.0, -135.0, 135.0, 45.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
        for k in 0..4 {
            assert_eq!(l.floor(k)[0], l.ceiling(k)[0]);
        }
    }

    #[test]
    fn floor_corner_latitude_matches_hand_projection() {
        let t = LayoutParams::cuboid(2.0, 2.0, 2.0, 2.0, 3.0);
        let l = layout_to_corners(&t).unwrap();
        // Corner at (-2, 2, -1.6): horizontal distance 2*sqrt(2).
        let want = -(1.6f64).atan2(2.0 * 2f64.sqrt());
        assert_abs_diff_eq!(l.floor(0)[1], want, epsilon = 1e-12);
        let up = (3.0f64 - 1.6).atan2(2.0 * 2f64.sqrt());
        assert_abs_diff_eq!(l.ceiling(0)[1], up, epsilon = 1e-12);
    }

    #[test]
    fn corners_are_scale_invariant() {
        let t = l_room();
        let a = layout_to_corners(&t).unwrap();
        let b = layout_to_corners(&t.scaled(2.0)).unwrap();
        for (p, q) in a.corners.iter().zip(&b.corners) {
            assert_abs_diff_eq!(p[0], q[0], epsilon = 1e-12);
            assert_abs_diff_eq!(p[1], q[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn validation() {
        assert!(l_room().is_valid());
        let mut bad = l_room();
        bad.walls[3] = -4.0; // notch crosses the left wall
        assert!(layout_to_corners(&bad).is_err());
        let low = LayoutParams::cuboid(2.0, 2.0, 2.0, 2.0, 1.0);
        assert!(low.validate().is_err());
        let outside = LayoutParams::new(vec![-1.0, -2.0, -3.0, 2.0], 3.0, 1.6);
        assert!(outside.validate().is_err());
    }

    #[test]
    fn corners_round_trip_to_params() {
        for t in [l_room(), LayoutParams::cuboid(2.0, 3.0, 4.0, 5.0, 2.7)] {
            let back = layout_to_corners(&t).unwrap().to_params(1.6).unwrap();
            for (a, b) in t.walls.iter().zip(&back.walls) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-9);
            }
            assert_abs_diff_eq!(t.room_height, back.room_height, epsilon = 1e-9);
        }
    }

    #[test]
    fn from_polygon_matches_params() {
        let t = l_room();
        let mut poly = t.floor_polygon();
        poly.rotate_left(3);
        assert_eq!(LayoutParams::from_polygon(&poly, 2.8, 1.6).unwrap(), t);
    }

    #[test]
    fn canonical_front_wall() {
        let mut t = l_room();
        t.walls.rotate_left(2);
        canonicalize(&mut t);
        assert_eq!(t.walls, l_room().walls);
    }

    #[test]
    fn smoothing_values() {
        assert_eq!(smooth_target(&[], 8, LN_2), vec![0.0; 8]);
        let v = smooth_target(&[3], 8, LN_2);
        for (i, want) in [(1, 0.25), (2, 0.5), (3, 1.0), (4, 0.5), (5, 0.25)] {
            assert_abs_diff_eq!(v[i], want, epsilon = 1e-15);
        }
        let a = smooth_target(&[1], 10, 0.3);
        let b = smooth_target(&[7], 10, 0.3);
        let both = smooth_target(&[1, 7], 10, 0.3);
        for i in 0..10 {
            assert_eq!(both[i], a[i].max(b[i]));
        }
        let c = smooth_target_cyclic(&[0], 8, LN_2);
        assert_abs_diff_eq!(c[7], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bce_values() {
        assert_abs_diff_eq!(bce_loss(&[0.5], &[0.5]), LN_2, epsilon = 1e-12);
        assert!(bce_loss(&[1.0, 0.0], &[1.0, 0.0]) < 1e-6);
        let p = HoughVectors {
            h: vec![0.2, 0.7],
            v: vec![0.4],
            c: vec![0.9],
            bin_scale: 1,
        };
        let t = HoughVectors {
            h: vec![0.0, 1.0],
            v: vec![0.5],
            c: vec![1.0],
            bin_scale: 1,
        };
        let sum = bce_loss(&p.h, &t.h) + bce_loss(&p.v, &t.v) + bce_loss(&p.c, &t.c);
        assert_abs_diff_eq!(total_bce(&p, &t), sum, epsilon = 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("layout.json");
        let t = l_room();
        LayoutJson::write(&t, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"axis\": \"y\""));
        let back = LayoutJson::read(&path).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn layout_from_corners_only() {
        let t = LayoutParams::cuboid(2.0, 2.0, 2.0, 2.0, 3.2);
        let corners = layout_to_corners(&t).unwrap().corners;
        let json = LayoutJson {
            camera_height: 1.6,
            room_height: 0.0,
            walls: vec![],
            corners,
        };
        let back = json.to_params().unwrap();
        assert_abs_diff_eq!(back.room_height, 3.2, epsilon = 1e-9);
        assert_abs_diff_eq!(back.walls[0], 2.0, epsilon = 1e-9);
        assert!(FRAC_PI_4 < PI);
    }
}
