//! Initial layout parameters from detected tile lines.
//!
//! Every line is back-projected through two of its points. Lines whose rays
//! share an azimuth are vertical wall-wall edges; the others are intersected
//! with the floor plane (`z = -camera_height`) or with a ceiling plane at unit
//! height above the camera, giving a wall axis and coordinate.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{tile_to_world_ray, Face, FaceMap, ImagePoint};
use crate::hough::{border_direction, LineKind, ManhattanLine};
use crate::polygon::{self, Point2};

use super::{canonicalize, LayoutParams, WallAxis};

/// Floor walls farther than this many camera heights are ignored.
pub const DEFAULT_MAX_DISTANCE_FACTOR: f64 = 40.0;

/// Corner azimuths closer than this are merged.
const CORNER_MERGE_RAD: f64 = 3.0 * PI / 180.0;

const HEIGHT_RATIO_RANGE: (f64, f64) = (0.25, 4.0);
const GOLDEN_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Floor,
    Ceiling,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallObservation {
    pub face: Face,
    pub surface: Surface,
    pub axis: WallAxis,
    /// World coordinate for floor lines; coordinate per unit of ceiling
    /// height above the camera for ceiling lines.
    pub coord: f64,
    /// Azimuth of the observed part of the wall.
    pub azimuth: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerObservation {
    pub face: Face,
    pub azimuth: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Observations {
    pub walls: Vec<WallObservation>,
    /// Merged wall-wall corners sorted by azimuth.
    pub corners: Vec<CornerObservation>,
}

impl Observations {
    fn floor(&self) -> impl Iterator<Item = &WallObservation> {
        self.walls.iter().filter(|w| w.surface == Surface::Floor)
    }

    fn ceiling(&self) -> impl Iterator<Item = &WallObservation> {
        self.walls.iter().filter(|w| w.surface == Surface::Ceiling)
    }
}

fn azimuth(x: f64, y: f64) -> f64 {
    x.atan2(y)
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn line_points(kind: &LineKind, size: usize) -> [ImagePoint; 2] {
    let half = size as f64 / 2.0;
    match *kind {
        LineKind::Horizontal { rho } => [ImagePoint::new(-half / 2.0, rho), ImagePoint::new(half / 2.0, rho)],
        LineKind::Vertical { rho } => [ImagePoint::new(rho, -half / 2.0), ImagePoint::new(rho, half / 2.0)],
        LineKind::Center { border_index } => {
            let (a, b) = border_direction(border_index, size, size);
            [
                ImagePoint::new(0.3 * half * a, 0.3 * half * b),
                ImagePoint::new(0.9 * half * a, 0.9 * half * b),
            ]
        }
    }
}

/// Back-projects detected lines into wall and corner observations.
pub fn observe_lines(
    lines: &FaceMap<Vec<ManhattanLine>>,
    size: usize,
    camera_height: f64,
    max_distance_factor: f64,
) -> Observations {
    let mut walls = Vec::new();
    let mut corners = Vec::new();
    for (face, face_lines) in lines.iter() {
        for line in face_lines {
            let [q1, q2] = line_points(&line.kind, size);
            let d1 = tile_to_world_ray(q1, face, size);
            let d2 = tile_to_world_ray(q2, face, size);
            let (h1, h2) = (d1.x.hypot(d1.y), d2.x.hypot(d2.y));
            if h1 < 1e-9 && h2 < 1e-9 {
                continue;
            }
            let (a1, a2) = (azimuth(d1.x, d1.y), azimuth(d2.x, d2.y));
            if h1 < 1e-9 || h2 < 1e-9 || angle_diff(a1, a2) < 1e-6 {
                corners.push(CornerObservation {
                    face,
                    azimuth: if h1 >= h2 { a1 } else { a2 },
                    confidence: line.confidence,
                });
                continue;
            }
            let (surface, plane, limit) = if d1.z < 0.0 && d2.z < 0.0 {
                (Surface::Floor, -camera_height, max_distance_factor * camera_height)
            } else if d1.z > 0.0 && d2.z > 0.0 {
                (Surface::Ceiling, 1.0, max_distance_factor)
            } else {
                continue;
            };
            let p1 = d1 * (plane / d1.z);
            let p2 = d2 * (plane / d2.z);
            let (axis, coord) = if (p2.x - p1.x).abs() >= (p2.y - p1.y).abs() {
                (WallAxis::Y, (p1.y + p2.y) / 2.0)
            } else {
                (WallAxis::X, (p1.x + p2.x) / 2.0)
            };
            if !coord.is_finite() || coord.abs() > limit || coord.abs() < 1e-9 {
                continue;
            }
            walls.push(WallObservation {
                face,
                surface,
                axis,
                coord,
                azimuth: azimuth((p1.x + p2.x) / 2.0, (p1.y + p2.y) / 2.0),
                confidence: line.confidence,
            });
        }
    }
    let face_weight = lines.map(|_, v| v.iter().map(|l| l.confidence).sum::<f64>());
    Observations {
        walls,
        corners: merge_corners(corners, &face_weight),
    }
}

/// Clusters nearby corner azimuths. Within a cluster the observation from
/// the face with the highest summed line confidence wins.
fn merge_corners(mut obs: Vec<CornerObservation>, face_weight: &FaceMap<f64>) -> Vec<CornerObservation> {
    if obs.is_empty() {
        return obs;
    }
    obs.sort_by(|a, b| a.azimuth.total_cmp(&b.azimuth));
    let mut clusters: Vec<Vec<CornerObservation>> = Vec::new();
    for o in obs {
        match clusters.last_mut() {
            Some(c) if angle_diff(c[c.len() - 1].azimuth, o.azimuth) < CORNER_MERGE_RAD => c.push(o),
            _ => clusters.push(vec![o]),
        }
    }
    // The first and last clusters may meet across the +-pi seam.
    if clusters.len() > 1 {
        let first = clusters[0][0].azimuth;
        let last = clusters[clusters.len() - 1].last().unwrap().azimuth;
        if angle_diff(first, last) < CORNER_MERGE_RAD {
            let tail = clusters.pop().unwrap();
            clusters[0].extend(tail);
        }
    }
    let mut out: Vec<CornerObservation> = clusters
        .into_iter()
        .map(|c| {
            *c.iter()
                .max_by(|a, b| {
                    face_weight[a.face]
                        .total_cmp(&face_weight[b.face])
                        .then(a.confidence.total_cmp(&b.confidence))
                })
                .unwrap()
        })
        .collect();
    out.sort_by(|a, b| a.azimuth.total_cmp(&b.azimuth));
    out
}

fn weighted_median(mut items: Vec<(f64, f64)>) -> Option<f64> {
    if items.is_empty() {
        return None;
    }
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = items.iter().map(|i| i.1.max(1e-12)).sum();
    let mut acc = 0.0;
    for (v, w) in &items {
        acc += w.max(1e-12);
        if acc >= total / 2.0 {
            return Some(*v);
        }
    }
    items.last().map(|i| i.0)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    weighted_median(v.drain(..).map(|x| (x, 1.0)).collect())
}

/// Whether azimuth `a` lies in the clockwise sweep from `from` to `to`
/// (azimuths decrease counterclockwise).
fn in_sweep(a: f64, from: f64, to: f64) -> bool {
    let span = (from - to).rem_euclid(2.0 * PI);
    let off = (from - a).rem_euclid(2.0 * PI);
    off <= span
}

/// Azimuth of every floor-plan corner.
fn corner_azimuths(walls: &[f64]) -> Vec<f64> {
    let t = LayoutParams::new(walls.to_vec(), 2.0, 1.0);
    t.floor_polygon().iter().map(|p| azimuth(p[0], p[1])).collect()
}

/// Index of the wall whose angular span contains `a`.
fn wall_at(corner_az: &[f64], a: f64) -> usize {
    let n = corner_az.len();
    (0..n)
        .find(|&k| in_sweep(a, corner_az[(k + n - 1) % n], corner_az[k]))
        .unwrap_or(0)
}

fn cuboid_distances(floor: &[&WallObservation]) -> Result<Vec<f64>> {
    let class = |axis: WallAxis, positive: bool| {
        weighted_median(
            floor
                .iter()
                .filter(|w| w.axis == axis && (w.coord > 0.0) == positive)
                .map(|w| (w.coord, w.confidence))
                .collect(),
        )
    };
    match (
        class(WallAxis::Y, true),
        class(WallAxis::X, false),
        class(WallAxis::Y, false),
        class(WallAxis::X, true),
    ) {
        (Some(f), Some(l), Some(b), Some(r)) => Ok(vec![f, l, b, r]),
        _ => Err(Error::Initialization(
            "floor lines do not cover all four sides of the room".into(),
        )),
    }
}

/// Walls of a unit-scale polygon through the corner azimuths, with wall 0 at
/// `y = 1`. Corners are listed in decreasing azimuth starting right after
/// the `+y` direction.
fn propagate_unit(corners: &[f64]) -> Option<Vec<f64>> {
    let n = corners.len();
    let mut walls = vec![1.0; n];
    for k in 0..n - 1 {
        let (s, c) = corners[k].sin_cos();
        let (t, next) = if k % 2 == 0 {
            (walls[k] / c, walls[k] / c * s)
        } else {
            (walls[k] / s, walls[k] / s * c)
        };
        if !(t.is_finite() && t > 0.0) {
            return None;
        }
        walls[k + 1] = next;
    }
    Some(walls)
}

fn general_distances(corners: &[f64], floor: &[&WallObservation]) -> Option<Vec<f64>> {
    let n = corners.len();
    if n < 6 || n % 2 != 0 {
        return None;
    }
    let mut sorted = corners.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // First corner clockwise from the +y direction.
    let start = sorted.iter().position(|&a| a <= 0.0)?;
    sorted.rotate_left(start);
    if sorted[n - 1] <= 0.0 {
        return None;
    }
    let unit = propagate_unit(&sorted)?;
    if !LayoutParams::new(unit.clone(), 2.0, 1.0).is_valid() {
        return None;
    }
    let matches: Vec<(usize, &WallObservation)> = floor
        .iter()
        .map(|w| (wall_at(&sorted, w.azimuth), *w))
        .filter(|(k, w)| WallAxis::of_wall(*k) == w.axis && (unit[*k] > 0.0) == (w.coord > 0.0))
        .collect();
    let scale = weighted_median(
        matches
            .iter()
            .map(|(k, w)| (w.coord / unit[*k], w.confidence))
            .collect(),
    )?;
    let scaled: Vec<f64> = unit.iter().map(|c| c * scale).collect();
    let mut refined = scaled.clone();
    for (k, wall) in refined.iter_mut().enumerate() {
        let close: Vec<(f64, f64)> = matches
            .iter()
            .filter(|(j, w)| *j == k && (w.coord / scaled[k] - 1.0).abs() < 0.25)
            .map(|(_, w)| (w.coord, w.confidence))
            .collect();
        if let Some(c) = weighted_median(close) {
            *wall = c;
        }
    }
    if LayoutParams::new(refined.clone(), 2.0, 1.0).is_valid() {
        Some(refined)
    } else {
        Some(scaled)
    }
}

/// Signed wall coordinates from floor observations. Rooms with at least six
/// detected corners are built from the corner azimuths; otherwise, or if
/// that fails, a box room is fitted.
pub fn init_distances(obs: &Observations) -> Result<Vec<f64>> {
    let floor: Vec<&WallObservation> = obs.floor().collect();
    if floor.len() < 4 {
        return Err(Error::Initialization(format!(
            "need at least 4 wall-floor lines, found {}",
            floor.len()
        )));
    }
    let corners: Vec<f64> = obs.corners.iter().map(|c| c.azimuth).collect();
    if let Some(walls) = general_distances(&corners, &floor) {
        return Ok(walls);
    }
    cuboid_distances(&floor)
}

fn iou2d(a: &[Point2], b: &[Point2]) -> f64 {
    let inter = polygon::intersection_area(a, b);
    let union = polygon::area(a) + polygon::area(b) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..iters {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo + hi) / 2.0
}

/// Room height from ceiling observations: the ceiling frame, scaled by the
/// ceiling-to-floor distance ratio, should coincide with the floor frame.
pub fn init_height(obs: &Observations, walls: &[f64], camera_height: f64) -> Result<f64> {
    let corner_az = corner_azimuths(walls);
    let matched: Vec<(usize, &WallObservation)> = obs
        .ceiling()
        .map(|w| (wall_at(&corner_az, w.azimuth), w))
        .filter(|(k, w)| WallAxis::of_wall(*k) == w.axis && walls[*k] * w.coord > 0.0)
        .collect();
    let ratios: Vec<f64> = matched
        .iter()
        .map(|(k, w)| walls[*k] / (camera_height * w.coord))
        .collect();
    let fallback = median(ratios)
        .ok_or_else(|| Error::Initialization("no usable ceiling lines".into()))?;
    let mut unit: Vec<Option<f64>> = vec![None; walls.len()];
    for (k, slot) in unit.iter_mut().enumerate() {
        *slot = weighted_median(
            matched
                .iter()
                .filter(|(j, _)| *j == k)
                .map(|(_, w)| (w.coord, w.confidence))
                .collect(),
        );
    }
    if unit.iter().filter(|u| u.is_some()).count() < 2 {
        return Ok(camera_height * (1.0 + fallback));
    }
    let floor = LayoutParams::new(walls.to_vec(), 2.0, 1.0).floor_polygon();
    let objective = |r: f64| {
        let ceiling: Vec<f64> = unit
            .iter()
            .zip(walls)
            .map(|(u, &c)| u.map_or(c, |u| u * camera_height * r))
            .collect();
        let t = LayoutParams::new(ceiling, 2.0, 1.0);
        if polygon::is_simple_rectilinear(&t.floor_polygon()) {
            iou2d(&t.floor_polygon(), &floor)
        } else {
            0.0
        }
    };
    let (lo, hi) = HEIGHT_RATIO_RANGE;
    let r = golden_max(objective, lo, hi, GOLDEN_ITERS);
    Ok(camera_height * (1.0 + r))
}

/// Initial layout from detected lines.
pub fn init_layout(
    lines: &FaceMap<Vec<ManhattanLine>>,
    size: usize,
    camera_height: f64,
) -> Result<LayoutParams> {
    let obs = observe_lines(lines, size, camera_height, DEFAULT_MAX_DISTANCE_FACTOR);
    let walls = init_distances(&obs)?;
    let room_height = init_height(&obs, &walls, camera_height)?;
    let mut t = LayoutParams::new(walls, room_height, camera_height);
    canonicalize(&mut t);
    t.validate()
        .map_err(|e| Error::Initialization(format!("initial layout is invalid: {e}")))?;
    Ok(t)
}
