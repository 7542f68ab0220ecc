//! Non-learned line detection on cubemap tiles: Canny edges, the standard
//! and probabilistic Hough transforms, Manhattan filtering, grouping and
//! peak extraction from confidence vectors.
//!
//! Image lines use centered tile coordinates (`y` down) and the normal form
//! `-x sin θ + y cos θ = ρ`, so `θ = 0` is a horizontal line at row offset
//! `ρ`, like [`crate::hough::hough_classic`].

use std::collections::VecDeque;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Face, FaceMap, ImagePoint};
use crate::hough::{
    bin_to_value, border_direction, border_position, line_to_bin, HoughVectors, LineFamily, LineKind,
    ManhattanLine,
};
use crate::layout::smooth_target;
use crate::raster::Raster;

/// Canny thresholds as fractions of the maximum gradient magnitude.
pub const CANNY_LOW: f64 = 0.1;
pub const CANNY_HIGH: f64 = 0.2;

pub const HTS_THRESHOLD: usize = 100;
pub const HTP_THRESHOLD: usize = 50;
pub const HTP_MIN_LEN: usize = 30;
pub const HTP_MAX_GAP: usize = 5;

/// `|tan θ|` (horizontal) and `|cot θ|` (vertical) tolerance.
pub const SLOPE_TOL: f64 = 0.05;
/// Largest `|ρ|` of a line taken as passing through the tile center.
pub const CENTER_TOL_PX: f64 = 5.0;

/// Gradient magnitudes (Sobel, intensities in `[0, 1]`) below this are
/// treated as flat, so uniform tiles stay empty.
pub const MIN_GRADIENT: f64 = 0.02;

/// Same-family lines closer than this are merged by [`merge_parallel`].
pub const MERGE_TOL_PX: f64 = 6.0;

/// Number of line groups kept per tile by [`group_and_select`].
pub const N_GROUPS: usize = 8;

/// Binary edge grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    data: Vec<bool>,
}

impl EdgeMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Edge pixels in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % w, i / w))
    }

    /// Edge pixels as a 0/1 grayscale raster.
    pub fn to_raster(&self) -> Raster {
        Raster::from_fn(self.width, self.height, 1, |x, y, _| if self.get(x, y) { 1.0 } else { 0.0 })
    }

    fn center(&self, x: usize, y: usize) -> (f64, f64) {
        (
            x as f64 + 0.5 - self.width as f64 / 2.0,
            y as f64 + 0.5 - self.height as f64 / 2.0,
        )
    }
}

/// Canny edge map of a tile. Color tiles are converted to gray; `low` and
/// `high` are fractions of the largest gradient magnitude.
pub fn canny(tile: &Raster, low: f64, high: f64) -> Result<EdgeMap> {
    if !(low > 0.0 && high >= low) {
        return Err(Error::InvalidArgument(format!(
            "canny thresholds need high >= low > 0, got low {low}, high {high}"
        )));
    }
    let gray = tile.to_gray();
    let (w, h) = (gray.width, gray.height);
    let mut out = EdgeMap::new(w, h);
    if w < 3 || h < 3 {
        return Ok(out);
    }
    let px = |x: isize, y: isize| -> f64 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        gray.get(x, y, 0) as f64
    };
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let mut mag = vec![0.0; w * h];
    let mut max_mag = 0.0f64;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let dx = (px(x + 1, y - 1) + 2.0 * px(x + 1, y) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x - 1, y) + px(x - 1, y + 1));
            let dy = (px(x - 1, y + 1) + 2.0 * px(x, y + 1) + px(x + 1, y + 1))
                - (px(x - 1, y - 1) + 2.0 * px(x, y - 1) + px(x + 1, y - 1));
            let i = y as usize * w + x as usize;
            gx[i] = dx;
            gy[i] = dy;
            mag[i] = dx.hypot(dy);
            max_mag = max_mag.max(mag[i]);
        }
    }
    if max_mag < MIN_GRADIENT {
        return Ok(out);
    }

    // Non-maximum suppression along the quantized gradient direction.
    let tan22 = (PI / 8.0).tan();
    let tan67 = (3.0 * PI / 8.0).tan();
    let m_at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut thin = vec![0.0; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            let m = mag[i];
            if m < (low * max_mag).max(MIN_GRADIENT) {
                continue;
            }
            let (ax, ay) = (gx[i].abs(), gy[i].abs());
            let (a, b) = if ay <= ax * tan22 {
                (m_at(x - 1, y), m_at(x + 1, y))
            } else if ay >= ax * tan67 {
                (m_at(x, y - 1), m_at(x, y + 1))
            } else if gx[i] * gy[i] > 0.0 {
                (m_at(x - 1, y - 1), m_at(x + 1, y + 1))
            } else {
                (m_at(x + 1, y - 1), m_at(x - 1, y + 1))
            };
            if m > a && m >= b {
                thin[i] = m;
            }
        }
    }

    // Hysteresis: grow strong pixels through 8-connected weak ones.
    let (lo, hi) = ((low * max_mag).max(MIN_GRADIENT), high * max_mag);
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= hi {
            out.data[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !out.data[j] && thin[j] >= lo {
                    out.data[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(out)
}

/// An accumulator peak of the standard Hough transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoughLine {
    pub rho: f64,
    pub theta: f64,
    pub votes: f64,
}

/// A line segment from the probabilistic transform, in centered tile
/// coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSegment {
    pub a: ImagePoint,
    pub b: ImagePoint,
}

impl LineSegment {
    pub fn length(&self) -> f64 {
        (self.b.qx - self.a.qx).hypot(self.b.qy - self.a.qy)
    }
}

/// Accumulator over 1° angle bins in `[-90°, 90°)` and 1-px `ρ` bins.
struct Accumulator {
    trig: Vec<(f64, f64)>,
    n_rho: usize,
    offset: f64,
    votes: Vec<u32>,
}

impl Accumulator {
    const N_THETA: usize = 180;

    fn new(w: usize, h: usize) -> Self {
        let r = ((w as f64).hypot(h as f64) / 2.0).ceil() + 1.0;
        let n_rho = 2 * r as usize + 1;
        let trig = (0..Self::N_THETA)
            .map(|n| Self::theta(n).sin_cos())
            .collect();
        Self {
            trig,
            n_rho,
            offset: r,
            votes: vec![0; Self::N_THETA * n_rho],
        }
    }

    fn theta(n: usize) -> f64 {
        (n as f64 - 90.0).to_radians()
    }

    #[inline]
    fn rho_bin(&self, n: usize, qx: f64, qy: f64) -> usize {
        let (s, c) = self.trig[n];
        (-qx * s + qy * c + self.offset).round() as usize
    }

    fn rho(&self, r: usize) -> f64 {
        r as f64 - self.offset
    }

    /// Adds `delta` to every cell the point votes for; returns the best
    /// `(votes, angle bin)` after the update.
    fn vote(&mut self, qx: f64, qy: f64, delta: i32) -> (u32, usize) {
        let mut best = (0, 0);
        for n in 0..Self::N_THETA {
            let i = n * self.n_rho + self.rho_bin(n, qx, qy);
            self.votes[i] = self.votes[i].saturating_add_signed(delta);
            if self.votes[i] > best.0 {
                best = (self.votes[i], n);
            }
        }
        best
    }
}

/// Standard Hough transform: accumulator cells with at least `threshold`
/// votes that are local maxima over their four neighbors, strongest first.
pub fn ht_standard(edges: &EdgeMap, threshold: usize) -> Vec<HoughLine> {
    let mut acc = Accumulator::new(edges.width, edges.height);
    for (x, y) in edges.points() {
        let (qx, qy) = edges.center(x, y);
        acc.vote(qx, qy, 1);
    }
    let nr = acc.n_rho;
    let at = |n: isize, r: isize| -> u32 {
        if n < 0 || r < 0 || n >= Accumulator::N_THETA as isize || r >= nr as isize {
            0
        } else {
            acc.votes[n as usize * nr + r as usize]
        }
    };
    let mut out = Vec::new();
    for n in 0..Accumulator::N_THETA as isize {
        for r in 0..nr as isize {
            let v = at(n, r);
            if (v as usize) < threshold.max(1) {
                continue;
            }
            if v > at(n, r - 1) && v >= at(n, r + 1) && v > at(n - 1, r) && v >= at(n + 1, r) {
                out.push(HoughLine {
                    rho: acc.rho(r as usize),
                    theta: Accumulator::theta(n as usize),
                    votes: v as f64,
                });
            }
        }
    }
    out.sort_by(|a, b| b.votes.total_cmp(&a.votes));
    out
}

/// Progressive probabilistic Hough transform. Edge pixels are visited in
/// random order; once a pixel's best accumulator cell reaches `threshold`,
/// the line through it is walked in both directions allowing gaps of up to
/// `max_gap` pixels, and kept if it spans at least `min_len` pixels.
pub fn ht_probabilistic<R: Rng>(
    edges: &EdgeMap,
    threshold: usize,
    min_len: usize,
    max_gap: usize,
    rng: &mut R,
) -> Vec<LineSegment> {
    let (w, h) = (edges.width, edges.height);
    let mut acc = Accumulator::new(w, h);
    let mut mask = edges.data.clone();
    let mut voted = vec![false; w * h];
    let mut order: Vec<(usize, usize)> = edges.points().collect();
    order.shuffle(rng);
    let mut out = Vec::new();

    let inside = |x: f64, y: f64| x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64;
    for (x, y) in order {
        if !mask[y * w + x] {
            continue;
        }
        let (qx, qy) = edges.center(x, y);
        let (best, n) = acc.vote(qx, qy, 1);
        voted[y * w + x] = true;
        if (best as usize) < threshold.max(1) {
            continue;
        }
        // Unit step along the dominant axis of the line direction.
        let (s, c) = acc.trig[n];
        let step = if c.abs() >= s.abs() {
            (c.signum(), s / c.abs())
        } else {
            (c / s.abs(), s.signum())
        };
        let mut ends = [(x, y, 0usize); 2];
        for (k, end) in ends.iter_mut().enumerate() {
            let sign = if k == 0 { 1.0 } else { -1.0 };
            let (mut fx, mut fy) = (x as f64, y as f64);
            let mut gap = 0;
            let mut steps = 0;
            loop {
                fx += sign * step.0;
                fy += sign * step.1;
                steps += 1;
                let (rx, ry) = (fx.round(), fy.round());
                if !inside(rx, ry) {
                    break;
                }
                if mask[ry as usize * w + rx as usize] {
                    gap = 0;
                    *end = (rx as usize, ry as usize, steps);
                } else {
                    gap += 1;
                    if gap > max_gap {
                        break;
                    }
                }
            }
        }
        let good = ends[0].0.abs_diff(ends[1].0) >= min_len || ends[0].1.abs_diff(ends[1].1) >= min_len;
        // Remove the walked pixels; give back their votes if the line is kept.
        for (k, end) in ends.iter().enumerate() {
            let sign = if k == 0 { 1.0 } else { -1.0 };
            for i in 0..=end.2 {
                let fx = (x as f64 + sign * step.0 * i as f64).round();
                let fy = (y as f64 + sign * step.1 * i as f64).round();
                let j = fy as usize * w + fx as usize;
                if mask[j] {
                    if good && voted[j] {
                        let (px, py) = edges.center(fx as usize, fy as usize);
                        acc.vote(px, py, -1);
                    }
                    mask[j] = false;
                }
            }
        }
        if good {
            let p = |e: (usize, usize, usize)| {
                let (qx, qy) = edges.center(e.0, e.1);
                ImagePoint::new(qx, qy)
            };
            out.push(LineSegment {
                a: p(ends[1]),
                b: p(ends[0]),
            });
        }
    }
    out
}

/// RNG stream for probabilistic detection on one face.
pub fn face_rng(seed: u64, face: Face) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(face.index() as u64);
    rng
}

enum Class {
    Horizontal(f64),
    Vertical(f64),
    /// Unit direction of the line.
    Center(f64, f64),
}

fn classify(rho: f64, theta: f64) -> Option<Class> {
    let (s, c) = theta.sin_cos();
    if s.abs() < SLOPE_TOL * c.abs() {
        Some(Class::Horizontal(rho / c))
    } else if c.abs() < SLOPE_TOL * s.abs() {
        Some(Class::Vertical(-rho / s))
    } else if rho.abs() < CENTER_TOL_PX {
        Some(Class::Center(c, s))
    } else {
        None
    }
}

fn normalize(mut lines: Vec<ManhattanLine>) -> Vec<ManhattanLine> {
    let max = lines.iter().map(|l| l.confidence).fold(0.0, f64::max);
    if max > 0.0 {
        for l in &mut lines {
            l.confidence /= max;
        }
    }
    lines
}

fn filter_with(
    lines: &[HoughLine],
    w: usize,
    h: usize,
    mut half_votes: impl FnMut(&HoughLine) -> [f64; 2],
) -> Vec<ManhattanLine> {
    let mut out = Vec::new();
    for l in lines {
        match classify(l.rho, l.theta) {
            Some(Class::Horizontal(rho)) => out.push(ManhattanLine::new(LineKind::Horizontal { rho }, l.votes)),
            Some(Class::Vertical(rho)) => out.push(ManhattanLine::new(LineKind::Vertical { rho }, l.votes)),
            Some(Class::Center(c, s)) => {
                let votes = half_votes(l);
                for (sign, v) in [(1.0, votes[0]), (-1.0, votes[1])] {
                    if v > 0.0 {
                        let idx = border_position(sign * c, sign * s, h, w);
                        out.push(ManhattanLine::new(LineKind::Center { border_index: idx }, v));
                    }
                }
            }
            None => {}
        }
    }
    normalize(out)
}

/// Keeps horizontal, vertical and center-passing lines. A center-passing
/// line yields both of its half-lines from the center. Confidences are the
/// votes divided by the largest kept vote count.
pub fn filter_manhattan(lines: &[HoughLine], w: usize, h: usize) -> Vec<ManhattanLine> {
    filter_with(lines, w, h, |l| [l.votes; 2])
}

/// Like [`filter_manhattan`], but a center-passing line's votes are shared
/// between its half-lines by the edge pixels lying within 1 px of each.
pub fn filter_manhattan_supported(lines: &[HoughLine], edges: &EdgeMap) -> Vec<ManhattanLine> {
    let pts: Vec<(f64, f64)> = edges.points().map(|(x, y)| edges.center(x, y)).collect();
    filter_with(lines, edges.width, edges.height, |l| {
        let (s, c) = l.theta.sin_cos();
        let mut count = [0usize; 2];
        for &(qx, qy) in &pts {
            if (-qx * s + qy * c - l.rho).abs() <= 1.0 {
                count[usize::from(qx * c + qy * s < 0.0)] += 1;
            }
        }
        let total = (count[0] + count[1]).max(1) as f64;
        [l.votes * count[0] as f64 / total, l.votes * count[1] as f64 / total]
    })
}

/// Manhattan lines from probabilistic segments. A center-passing segment
/// yields the half-line on its side of the center; votes are lengths.
pub fn filter_segments(segments: &[LineSegment], w: usize, h: usize) -> Vec<ManhattanLine> {
    let mut out = Vec::new();
    for seg in segments {
        let (dx, dy) = (seg.b.qx - seg.a.qx, seg.b.qy - seg.a.qy);
        let len = dx.hypot(dy);
        if len == 0.0 {
            continue;
        }
        let theta = dy.atan2(dx);
        let rho = -seg.a.qx * theta.sin() + seg.a.qy * theta.cos();
        match classify(rho, theta) {
            Some(Class::Horizontal(rho)) => out.push(ManhattanLine::new(LineKind::Horizontal { rho }, len)),
            Some(Class::Vertical(rho)) => out.push(ManhattanLine::new(LineKind::Vertical { rho }, len)),
            Some(Class::Center(c, s)) => {
                let (mx, my) = ((seg.a.qx + seg.b.qx) / 2.0, (seg.a.qy + seg.b.qy) / 2.0);
                let sign = if mx * c + my * s >= 0.0 { 1.0 } else { -1.0 };
                let idx = border_position(sign * c, sign * s, h, w);
                out.push(ManhattanLine::new(LineKind::Center { border_index: idx }, len));
            }
            None => {}
        }
    }
    normalize(out)
}

/// Normal form of a Manhattan line; a center half-line maps to its full
/// line.
pub fn hough_form(line: &ManhattanLine, w: usize, h: usize) -> HoughLine {
    let (rho, theta) = match line.kind {
        LineKind::Horizontal { rho } => (rho, 0.0),
        LineKind::Vertical { rho } => (-rho, PI / 2.0),
        LineKind::Center { border_index } => {
            let (a, b) = border_direction(border_index, h, w);
            (0.0, b.atan2(a))
        }
    };
    HoughLine {
        rho,
        theta,
        votes: line.confidence,
    }
}

/// Merges same-family lines within `tol` pixels (border positions for
/// center lines) of a stronger one. The merged line sits at the
/// confidence-weighted mean position and keeps the strongest confidence,
/// so the two edges of a drawn line collapse onto its middle.
pub fn merge_parallel(lines: &[ManhattanLine], w: usize, h: usize, tol: f64) -> Vec<ManhattanLine> {
    let period = 2.0 * (w + h) as f64;
    let offset = |a: &ManhattanLine, b: &ManhattanLine| -> f64 {
        let d = b.kind.value() - a.kind.value();
        match a.kind.family() {
            LineFamily::Center => (d + period / 2.0).rem_euclid(period) - period / 2.0,
            _ => d,
        }
    };
    let mut order: Vec<&ManhattanLine> = lines.iter().collect();
    order.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    // (seed, weighted offset sum, weight sum)
    let mut clusters: Vec<(ManhattanLine, f64, f64)> = Vec::new();
    for l in order {
        match clusters
            .iter_mut()
            .find(|c| c.0.kind.family() == l.kind.family() && offset(&c.0, l).abs() <= tol)
        {
            Some(c) => {
                c.1 += l.confidence * offset(&c.0, l);
                c.2 += l.confidence;
            }
            None => clusters.push((*l, 0.0, l.confidence)),
        }
    }
    clusters
        .into_iter()
        .map(|(seed, sum, weight)| {
            let family = seed.kind.family();
            let mut value = seed.kind.value() + if weight > 0.0 { sum / weight } else { 0.0 };
            if family == LineFamily::Center {
                value = value.rem_euclid(period);
            }
            ManhattanLine::new(LineKind::with_value(family, value), seed.confidence)
        })
        .collect()
}

/// Group of a line: above/below center for horizontal lines, left/right for
/// vertical ones, and the quadrant for center half-lines.
pub fn line_group(line: &ManhattanLine, w: usize, h: usize) -> usize {
    match line.kind {
        LineKind::Horizontal { rho } => usize::from(rho >= 0.0),
        LineKind::Vertical { rho } => 2 + usize::from(rho >= 0.0),
        LineKind::Center { border_index } => {
            let (a, b) = border_direction(border_index, h, w);
            4 + usize::from(a >= 0.0) + 2 * usize::from(b >= 0.0)
        }
    }
}

/// Keeps the most confident line of each of the [`N_GROUPS`] groups.
pub fn group_and_select(lines: &[ManhattanLine], w: usize, h: usize) -> Vec<ManhattanLine> {
    let mut best: [Option<ManhattanLine>; N_GROUPS] = [None; N_GROUPS];
    for l in lines {
        let g = line_group(l, w, h);
        if best[g].map_or(true, |b| l.confidence > b.confidence) {
            best[g] = Some(*l);
        }
    }
    best.into_iter().flatten().collect()
}

/// Confidence vectors from detected lines: each line adds a smoothed peak
/// of height equal to its confidence; overlapping peaks take the maximum.
pub fn vectors_from_lines(
    lines: &[ManhattanLine],
    h: usize,
    w: usize,
    bin_scale: usize,
    decay: f64,
) -> HoughVectors {
    let mut out = HoughVectors::zeros(h, w, bin_scale);
    for l in lines {
        let bin = line_to_bin(l, h, w, bin_scale);
        let family = l.kind.family();
        let v = out.vector_mut(family);
        let peak = match family {
            LineFamily::Center => crate::layout::smooth_target_cyclic(&[bin], v.len(), decay),
            _ => smooth_target(&[bin], v.len(), decay),
        };
        for (x, p) in v.iter_mut().zip(peak) {
            *x = x.max(l.confidence * p);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakConfig {
    pub min_prominence: f64,
    /// Minimum distance between kept peaks, in bins.
    pub min_separation: usize,
    pub max_peaks: usize,
}

impl Default for PeakConfig {
    fn default() -> Self {
        Self {
            min_prominence: 0.1,
            min_separation: 8,
            max_peaks: 16,
        }
    }
}

impl PeakConfig {
    /// Defaults with the separation given for 512-bin vectors rescaled to
    /// `bin_scale`.
    pub fn for_bin_scale(bin_scale: usize) -> Self {
        let d = Self::default();
        Self {
            min_separation: (d.min_separation / bin_scale.max(1)).max(1),
            ..d
        }
    }
}

/// Index distance, around the circle when `cyclic`.
fn bin_distance(a: usize, b: usize, n: usize, cyclic: bool) -> usize {
    let d = a.abs_diff(b);
    if cyclic {
        d.min(n - d)
    } else {
        d
    }
}

/// Local maxima of `v`. A flat top counts once, at its middle, when both
/// of its outer neighbors are strictly lower; the ends of a non-cyclic
/// vector are never maxima.
fn local_maxima(v: &[f64], cyclic: bool) -> Vec<usize> {
    let n = v.len();
    let mut out = Vec::new();
    if n < 3 {
        return out;
    }
    let range = if cyclic { 0..n } else { 1..n - 1 };
    for i in range {
        let prev = (i + n - 1) % n;
        if v[i] <= v[prev] {
            continue;
        }
        let mut j = i;
        loop {
            let next = j + 1;
            if !cyclic && next >= n - 1 {
                // A plateau running into the end is not a maximum.
                if next == n - 1 && v[next] < v[i] {
                    out.push(i + (j - i) / 2);
                }
                break;
            }
            let next = next % n;
            if next == i {
                break;
            }
            if v[next] == v[i] {
                j += 1;
                continue;
            }
            if v[next] < v[i] {
                out.push((i + (j - i) / 2) % n);
            }
            break;
        }
    }
    out
}

/// Height of a peak over the higher of the two lowest points met walking
/// each way until a strictly higher value (or the end of the vector).
fn prominence(v: &[f64], p: usize, cyclic: bool) -> f64 {
    let n = v.len();
    let top = v[p];
    let walk = |dir: isize| -> f64 {
        let mut lowest = top;
        let mut i = p as isize;
        for _ in 1..n {
            i += dir;
            if !cyclic && (i < 0 || i >= n as isize) {
                break;
            }
            let x = v[i.rem_euclid(n as isize) as usize];
            if x > top {
                break;
            }
            lowest = lowest.min(x);
        }
        lowest
    };
    top - walk(-1).max(walk(1))
}

/// Prominent peaks of a confidence vector as `(bin, value)`, strongest
/// first. Peaks closer than `min_separation` to a stronger kept peak are
/// dropped.
pub fn find_peaks(v: &[f64], cfg: &PeakConfig, cyclic: bool) -> Vec<(usize, f64)> {
    let mut cand: Vec<(usize, f64)> = local_maxima(v, cyclic)
        .into_iter()
        .filter(|&p| prominence(v, p, cyclic) >= cfg.min_prominence)
        .map(|p| (p, v[p]))
        .collect();
    cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut kept: Vec<(usize, f64)> = Vec::new();
    for c in cand {
        if kept.len() >= cfg.max_peaks {
            break;
        }
        if kept
            .iter()
            .all(|k| bin_distance(k.0, c.0, v.len(), cyclic) >= cfg.min_separation)
        {
            kept.push(c);
        }
    }
    kept
}

/// Lines at the prominent peaks of each vector.
pub fn peaks_to_lines(vectors: &HoughVectors, cfg: &PeakConfig) -> Vec<ManhattanLine> {
    let (h, w, k) = (vectors.map_h(), vectors.map_w(), vectors.bin_scale);
    let mut out = Vec::new();
    for family in LineFamily::ALL {
        let cyclic = family == LineFamily::Center;
        for (bin, conf) in find_peaks(vectors.vector(family), cfg, cyclic) {
            let value = bin_to_value(family, bin as f64, h, w, k);
            out.push(ManhattanLine::new(LineKind::with_value(family, value), conf));
        }
    }
    out
}

/// HT-S detection on one tile: Canny, standard transform, Manhattan filter
/// and one line per group.
pub fn detect_hts(tile: &Raster, threshold: usize) -> Result<Vec<ManhattanLine>> {
    let edges = canny(tile, CANNY_LOW, CANNY_HIGH)?;
    let lines = ht_standard(&edges, threshold);
    let kept = filter_manhattan_supported(&lines, &edges);
    let merged = merge_parallel(&kept, edges.width, edges.height, MERGE_TOL_PX);
    Ok(group_and_select(&merged, edges.width, edges.height))
}

/// HT-P detection on one tile.
pub fn detect_htp<R: Rng>(
    tile: &Raster,
    threshold: usize,
    min_len: usize,
    max_gap: usize,
    rng: &mut R,
) -> Result<Vec<ManhattanLine>> {
    let edges = canny(tile, CANNY_LOW, CANNY_HIGH)?;
    let segs = ht_probabilistic(&edges, threshold, min_len, max_gap, rng);
    let kept = filter_segments(&segs, edges.width, edges.height);
    let merged = merge_parallel(&kept, edges.width, edges.height, MERGE_TOL_PX);
    Ok(group_and_select(&merged, edges.width, edges.height))
}

/// Detected lines of one tile, as stored in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileLines {
    pub face: Face,
    pub lines: Vec<ManhattanLine>,
}

pub fn lines_to_json(lines: &FaceMap<Vec<ManhattanLine>>) -> Vec<TileLines> {
    lines
        .iter()
        .map(|(face, l)| TileLines {
            face,
            lines: l.clone(),
        })
        .collect()
}

pub fn lines_from_json(tiles: &[TileLines]) -> FaceMap<Vec<ManhattanLine>> {
    let mut out: FaceMap<Vec<ManhattanLine>> = FaceMap::default();
    for t in tiles {
        out[t.face].extend_from_slice(&t.lines);
    }
    out
}
