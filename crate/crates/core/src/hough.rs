//! Classical Hough sampling and the Manhattan Hough transform.
//!
//! A feature map of `h x w` bins is addressed with centered coordinates like
//! a tile: bin `(i, j)` sits at `(i + 0.5 - w/2, j + 0.5 - h/2)`, `y` down.
//!
//! The Manhattan transform keeps only the three line families a Manhattan
//! room can produce in an aligned cubemap tile:
//!
//! * `H[ρ]` – horizontal lines, one bin per row,
//! * `V[ρ]` – vertical lines, one bin per column,
//! * `C[θ]` – half-lines from the tile center to a border position with an
//!   integer coordinate; there are `2(h + w)` of them, enumerated clockwise
//!   starting at `(w/2, -h/2 + 1)`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImagePoint;

/// Single-channel real grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(h: usize, w: usize) -> Self {
        Self {
            h,
            w,
            data: vec![0.0; h * w],
        }
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for row in 0..h {
            for col in 0..w {
                data.push(f(col, row));
            }
        }
        Self { h, w, data }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.data[row * self.w + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: f64) {
        self.data[row * self.w + col] = v;
    }

    /// Linear interpolation between the two rows straddling `row`.
    #[inline]
    fn lerp_rows(&self, col: usize, row: f64) -> f64 {
        let lo = row.floor();
        let f = row - lo;
        let lo = lo as usize;
        if f == 0.0 {
            self.get(col, lo)
        } else {
            self.get(col, lo) * (1.0 - f) + self.get(col, lo + 1) * f
        }
    }

    #[inline]
    fn lerp_cols(&self, col: f64, row: usize) -> f64 {
        let lo = col.floor();
        let f = col - lo;
        let lo = lo as usize;
        if f == 0.0 {
            self.get(lo, row)
        } else {
            self.get(lo, row) * (1.0 - f) + self.get(lo + 1, row) * f
        }
    }
}

/// The three Manhattan vote vectors of one map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoughVectors {
    #[serde(rename = "H")]
    pub h: Vec<f64>,
    #[serde(rename = "V")]
    pub v: Vec<f64>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    pub bin_scale: usize,
}

impl HoughVectors {
    /// All-zero vectors for an `h x w` map at the given bin scale.
    pub fn zeros(h: usize, w: usize, bin_scale: usize) -> Self {
        Self {
            h: vec![0.0; h / bin_scale],
            v: vec![0.0; w / bin_scale],
            c: vec![0.0; center_bin_count(h, w) / bin_scale],
            bin_scale,
        }
    }

    /// Map height in pixels.
    pub fn map_h(&self) -> usize {
        self.h.len() * self.bin_scale
    }

    /// Map width in pixels.
    pub fn map_w(&self) -> usize {
        self.v.len() * self.bin_scale
    }

    pub fn vector(&self, family: LineFamily) -> &[f64] {
        match family {
            LineFamily::Horizontal => &self.h,
            LineFamily::Vertical => &self.v,
            LineFamily::Center => &self.c,
        }
    }

    pub fn vector_mut(&mut self, family: LineFamily) -> &mut Vec<f64> {
        match family {
            LineFamily::Horizontal => &mut self.h,
            LineFamily::Vertical => &mut self.v,
            LineFamily::Center => &mut self.c,
        }
    }

    /// Averages `factor` adjacent bins of every vector.
    pub fn coarsen(&self, factor: usize) -> Result<HoughVectors> {
        let agg = |v: &[f64]| -> Result<Vec<f64>> {
            if factor == 0 || v.len() % factor != 0 {
                return Err(Error::BinScale {
                    bin_scale: factor,
                    h: self.map_h(),
                    w: self.map_w(),
                });
            }
            Ok(average_bins(v, factor))
        };
        Ok(HoughVectors {
            h: agg(&self.h)?,
            v: agg(&self.v)?,
            c: agg(&self.c)?,
            bin_scale: self.bin_scale * factor,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineFamily {
    Horizontal,
    Vertical,
    Center,
}

impl LineFamily {
    pub const ALL: [LineFamily; 3] = [
        LineFamily::Horizontal,
        LineFamily::Vertical,
        LineFamily::Center,
    ];
}

/// Position of a Manhattan line in a tile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LineKind {
    /// Row offset `ρ = qy` from the tile center.
    Horizontal { rho: f64 },
    /// Column offset `ρ = qx` from the tile center.
    Vertical { rho: f64 },
    /// Half-line from the center; continuous border index in `[0, 2(h+w))`.
    Center {
        #[serde(rename = "rho")]
        border_index: f64,
    },
}

impl LineKind {
    pub fn family(&self) -> LineFamily {
        match self {
            LineKind::Horizontal { .. } => LineFamily::Horizontal,
            LineKind::Vertical { .. } => LineFamily::Vertical,
            LineKind::Center { .. } => LineFamily::Center,
        }
    }

    /// `ρ` for horizontal/vertical lines, the border index for center lines.
    pub fn value(&self) -> f64 {
        match *self {
            LineKind::Horizontal { rho } | LineKind::Vertical { rho } => rho,
            LineKind::Center { border_index } => border_index,
        }
    }

    pub fn with_value(family: LineFamily, value: f64) -> LineKind {
        match family {
            LineFamily::Horizontal => LineKind::Horizontal { rho: value },
            LineFamily::Vertical => LineKind::Vertical { rho: value },
            LineFamily::Center => LineKind::Center {
                border_index: value,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManhattanLine {
    #[serde(flatten)]
    pub kind: LineKind,
    #[serde(rename = "conf")]
    pub confidence: f64,
}

impl ManhattanLine {
    pub fn new(kind: LineKind, confidence: f64) -> Self {
        Self { kind, confidence }
    }
}

/// Sum of the map along the line of orientation `theta` whose signed distance
/// from the center is `rho` (normal `(-sin θ, cos θ)`), so `θ = 0` is a
/// horizontal line at row offset `ρ`.
///
/// One sample is taken per column when the line is closer to horizontal and
/// per row otherwise; off-grid samples interpolate linearly between the two
/// straddling bins. Samples outside the map are skipped.
pub fn hough_classic(x: &FeatureMap, rho: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (hh, hw) = (x.h as f64 / 2.0, x.w as f64 / 2.0);
    let mut sum = 0.0;
    if c.abs() >= s.abs() {
        let max_row = (x.h - 1) as f64;
        for col in 0..x.w {
            let qx = col as f64 + 0.5 - hw;
            let row = (rho + qx * s) / c + hh - 0.5;
            if (0.0..=max_row).contains(&row) {
                sum += x.lerp_rows(col, row);
            }
        }
    } else {
        let max_col = (x.w - 1) as f64;
        for row in 0..x.h {
            let qy = row as f64 + 0.5 - hh;
            let col = (qy * c - rho) / s + hw - 0.5;
            if (0.0..=max_col).contains(&col) {
                sum += x.lerp_cols(col, row);
            }
        }
    }
    sum
}

pub fn center_bin_count(h: usize, w: usize) -> usize {
    2 * (h + w)
}

/// Border endpoint of center bin `idx`.
pub fn center_bin_to_endpoint(idx: usize, h: usize, w: usize) -> Result<ImagePoint> {
    let count = center_bin_count(h, w);
    if idx >= count {
        return Err(Error::BorderIndex { idx, count });
    }
    let (hh, hw) = ((h / 2) as f64, (w / 2) as f64);
    let i = idx as f64;
    let (h_, w_) = (h as f64, w as f64);
    let p = if idx < h {
        ImagePoint::new(hw, -hh + 1.0 + i)
    } else if idx < h + w {
        ImagePoint::new(hw - 1.0 - (i - h_), hh)
    } else if idx < 2 * h + w {
        ImagePoint::new(-hw, hh - 1.0 - (i - h_ - w_))
    } else {
        ImagePoint::new(-hw + 1.0 + (i - 2.0 * h_ - w_), -hh)
    };
    Ok(p)
}

/// Continuous border index of the half-line from the center in direction
/// `(a, b)` (image coordinates, `y` down), together with its partial
/// derivatives with respect to `a` and `b`. Integer border points map to the
/// index of [`center_bin_to_endpoint`].
pub fn border_position_with_grad(a: f64, b: f64, h: usize, w: usize) -> (f64, f64, f64) {
    let (hh, hw) = (h as f64 / 2.0, w as f64 / 2.0);
    let (h_, w_) = (h as f64, w as f64);
    let count = 2.0 * (h_ + w_);
    let (idx, da, db) = if a.abs() * hh >= b.abs() * hw {
        if a > 0.0 {
            let by = hw * b / a;
            (by + hh - 1.0, -hw * b / (a * a), hw / a)
        } else {
            let by = -hw * b / a;
            (h_ + w_ + hh - 1.0 - by, -(hw * b / (a * a)), hw / a)
        }
    } else if b > 0.0 {
        let bx = hh * a / b;
        (h_ + hw - 1.0 - bx, -hh / b, hh * a / (b * b))
    } else {
        let bx = -hh * a / b;
        (2.0 * h_ + w_ + bx + hw - 1.0, -hh / b, hh * a / (b * b))
    };
    (idx.rem_euclid(count), da, db)
}

pub fn border_position(a: f64, b: f64, h: usize, w: usize) -> f64 {
    border_position_with_grad(a, b, h, w).0
}

/// Unit direction of a continuous border index.
pub fn border_direction(border_index: f64, h: usize, w: usize) -> (f64, f64) {
    let (hh, hw) = (h as f64 / 2.0, w as f64 / 2.0);
    let (h_, w_) = (h as f64, w as f64);
    // Continuous sides start one index before their first integer point.
    let j = (border_index + 1.0).rem_euclid(2.0 * (h_ + w_));
    let (x, y) = if j < h_ {
        (hw, -hh + j)
    } else if j < h_ + w_ {
        (hw - (j - h_), hh)
    } else if j < 2.0 * h_ + w_ {
        (-hw, hh - (j - h_ - w_))
    } else {
        (-hw + (j - 2.0 * h_ - w_), -hh)
    };
    let n = x.hypot(y);
    (x / n, y / n)
}

/// Sparse vote table for the center bins: for each bin, the `(bin index into
/// the map, weight)` pairs of its interpolated samples.
struct CenterTable {
    offsets: Vec<usize>,
    entries: Vec<(usize, f64)>,
}

impl CenterTable {
    fn build(h: usize, w: usize) -> Self {
        let count = center_bin_count(h, w);
        let mut offsets = Vec::with_capacity(count + 1);
        let mut entries = Vec::new();
        let (hh, hw) = (h as f64 / 2.0, w as f64 / 2.0);
        offsets.push(0);
        for idx in 0..count {
            let end = center_bin_to_endpoint(idx, h, w).expect("index in range");
            let (x0, y0) = (end.qx, end.qy);
            if y0.abs() <= x0.abs() {
                let steps = x0.abs() as usize;
                let sign = x0.signum();
                let slope = y0 / x0;
                for m in 0..steps {
                    let qx = sign * (m as f64 + 0.5);
                    let col = (qx + hw - 0.5) as usize;
                    let row = qx * slope + hh - 0.5;
                    push_split(&mut entries, row, h, |r| r * w + col);
                }
            } else {
                let steps = y0.abs() as usize;
                let sign = y0.signum();
                let slope = x0 / y0;
                for m in 0..steps {
                    let qy = sign * (m as f64 + 0.5);
                    let row = (qy + hh - 0.5) as usize;
                    let col = qy * slope + hw - 0.5;
                    push_split(&mut entries, col, w, |c| row * w + c);
                }
            }
            offsets.push(entries.len());
        }
        Self { offsets, entries }
    }
}

/// Splits a unit vote at fractional position `pos` between its two
/// neighbouring bins; positions outside `[0, len - 1]` are dropped.
fn push_split(entries: &mut Vec<(usize, f64)>, pos: f64, len: usize, index: impl Fn(usize) -> usize) {
    if !(0.0..=(len - 1) as f64).contains(&pos) {
        return;
    }
    let lo = pos.floor();
    let f = pos - lo;
    let lo = lo as usize;
    if f == 0.0 {
        entries.push((index(lo), 1.0));
    } else {
        entries.push((index(lo), 1.0 - f));
        entries.push((index(lo + 1), f));
    }
}

thread_local! {
    static CENTER_TABLES: RefCell<HashMap<(usize, usize), Rc<CenterTable>>> =
        RefCell::new(HashMap::new());
}

fn center_table(h: usize, w: usize) -> Rc<CenterTable> {
    CENTER_TABLES.with(|cache| {
        cache
            .borrow_mut()
            .entry((h, w))
            .or_insert_with(|| Rc::new(CenterTable::build(h, w)))
            .clone()
    })
}

/// Averages every `k` consecutive entries.
pub fn average_bins(v: &[f64], k: usize) -> Vec<f64> {
    v.chunks_exact(k)
        .map(|c| c.iter().sum::<f64>() / k as f64)
        .collect()
}

/// Manhattan Hough transform of one channel.
///
/// `bin_scale` groups adjacent bins by averaging; it must divide both map
/// dimensions, which must be even.
pub fn dmht(x: &FeatureMap, bin_scale: usize) -> Result<HoughVectors> {
    if bin_scale == 0 || x.h % bin_scale != 0 || x.w % bin_scale != 0 || x.h % 2 != 0 || x.w % 2 != 0
    {
        return Err(Error::BinScale {
            bin_scale,
            h: x.h,
            w: x.w,
        });
    }
    let h: Vec<f64> = x.data.chunks_exact(x.w).map(|row| row.iter().sum()).collect();
    let mut v = vec![0.0; x.w];
    for row in x.data.chunks_exact(x.w) {
        for (acc, val) in v.iter_mut().zip(row) {
            *acc += val;
        }
    }
    let table = center_table(x.h, x.w);
    let c: Vec<f64> = table
        .offsets
        .windows(2)
        .map(|r| {
            table.entries[r[0]..r[1]]
                .iter()
                .map(|&(i, wgt)| x.data[i] * wgt)
                .sum()
        })
        .collect();
    let full = HoughVectors {
        h,
        v,
        c,
        bin_scale: 1,
    };
    if bin_scale == 1 {
        Ok(full)
    } else {
        full.coarsen(bin_scale)
    }
}

/// Fractional bin position of a line; integer values are bin centers.
/// Center-line positions wrap into `[0, len)`.
pub fn fractional_bin(kind: &LineKind, h: usize, w: usize, bin_scale: usize) -> f64 {
    let k = bin_scale as f64;
    match *kind {
        LineKind::Horizontal { rho } => (rho + h as f64 / 2.0) / k - 0.5,
        LineKind::Vertical { rho } => (rho + w as f64 / 2.0) / k - 0.5,
        LineKind::Center { border_index } => {
            let n = (center_bin_count(h, w) / bin_scale) as f64;
            ((border_index - (k - 1.0) / 2.0) / k).rem_euclid(n)
        }
    }
}

/// Nearest bin of a line.
pub fn line_to_bin(line: &ManhattanLine, h: usize, w: usize, bin_scale: usize) -> usize {
    let f = fractional_bin(&line.kind, h, w, bin_scale);
    match line.kind {
        LineKind::Horizontal { .. } => (f.round().max(0.0) as usize).min(h / bin_scale - 1),
        LineKind::Vertical { .. } => (f.round().max(0.0) as usize).min(w / bin_scale - 1),
        LineKind::Center { .. } => {
            let n = center_bin_count(h, w) / bin_scale;
            (f.round() as usize) % n
        }
    }
}

/// Line value (`ρ` or border index) at the center of `bin`.
pub fn bin_to_value(family: LineFamily, bin: f64, h: usize, w: usize, bin_scale: usize) -> f64 {
    let k = bin_scale as f64;
    match family {
        LineFamily::Horizontal => (bin + 0.5) * k - h as f64 / 2.0,
        LineFamily::Vertical => (bin + 0.5) * k - w as f64 / 2.0,
        LineFamily::Center => bin * k + (k - 1.0) / 2.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize) -> FeatureMap {
        FeatureMap::from_fn(h, w, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn classic_row_sum_and_zeros() {
        let ones = FeatureMap::from_fn(4, 4, |_, _| 1.0);
        assert_eq!(hough_classic(&ones, 0.0, 0.0), 4.0);
        let zeros = FeatureMap::zeros(9, 9);
        assert_eq!(hough_classic(&zeros, 1.3, 0.7), 0.0);
    }

    /// Scatter oracle: each pixel is weighted by its tent distance to the
    /// line along the sampling axis.
    fn classic_oracle(x: &FeatureMap, rho: f64, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        let mut total = 0.0;
        for row in 0..x.h {
            for col in 0..x.w {
                let qx = col as f64 + 0.5 - x.w as f64 / 2.0;
                let qy = row as f64 + 0.5 - x.h as f64 / 2.0;
                let weight = if c.abs() >= s.abs() {
                    let y_line = (rho + qx * s) / c;
                    let edge = x.h as f64 / 2.0 - 0.5;
                    if y_line.abs() > edge { 0.0 } else { (1.0 - (qy - y_line).abs()).max(0.0) }
                } else {
                    let x_line = (qy * c - rho) / s;
                    let edge = x.w as f64 / 2.0 - 0.5;
                    if x_line.abs() > edge { 0.0 } else { (1.0 - (qx - x_line).abs()).max(0.0) }
                };
                total += weight * x.get(col, row);
            }
        }
        total
    }

    #[test]
    fn classic_matches_scatter_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_map(&mut rng, 16, 16);
        for _ in 0..50 {
            let rho = rng.gen_range(-9.0..9.0);
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            let a = hough_classic(&x, rho, theta);
            let b = classic_oracle(&x, rho, theta);
            assert!((a - b).abs() < 1e-6, "rho {rho} theta {theta}: {a} vs {b}");
        }
    }

    #[test]
    fn uniform_map_votes() {
        let ones = FeatureMap::from_fn(512, 512, |_, _| 1.0);
        let hv = dmht(&ones, 1).unwrap();
        assert!(hv.h.iter().all(|&v| v == 512.0));
        assert!(hv.v.iter().all(|&v| v == 512.0));
        assert_eq!(hv.c.len(), 2048);
        // Every center bin collects w/2 unit samples.
        assert!(hv.c.iter().all(|&v| (v - 256.0).abs() < 1e-9));
    }

    #[test]
    fn single_row_votes_one_h_bin() {
        let x = FeatureMap::from_fn(32, 32, |_, row| if row == 5 { 1.0 } else { 0.0 });
        let hv = dmht(&x, 1).unwrap();
        for (i, &v) in hv.h.iter().enumerate() {
            assert_eq!(v, if i == 5 { 32.0 } else { 0.0 });
        }
    }

    #[test]
    fn rejects_bad_bin_scale() {
        let x = FeatureMap::zeros(12, 12);
        assert!(dmht(&x, 5).is_err());
        assert!(dmht(&x, 0).is_err());
        assert!(dmht(&FeatureMap::zeros(9, 9), 1).is_err());
    }

    #[test]
    fn h_row_matches_classic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_map(&mut rng, 20, 20);
        let hv = dmht(&x, 1).unwrap();
        for (row, &v) in hv.h.iter().enumerate() {
            let rho = row as f64 + 0.5 - 10.0;
            assert!((v - hough_classic(&x, rho, 0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn endpoint_enumeration_is_a_bijection() {
        let (h, w) = (512, 512);
        assert_eq!(
            center_bin_to_endpoint(0, h, w).unwrap(),
            ImagePoint::new(256.0, -255.0)
        );
        let mut seen = std::collections::HashSet::new();
        for idx in 0..center_bin_count(h, w) {
            let p = center_bin_to_endpoint(idx, h, w).unwrap();
            let on_border = p.qx.abs() == 256.0 || p.qy.abs() == 256.0;
            assert!(on_border && p.qx.fract() == 0.0 && p.qy.fract() == 0.0);
            assert!(seen.insert((p.qx as i64, p.qy as i64)));
            assert_eq!(border_position(p.qx, p.qy, h, w), idx as f64);
            let line = ManhattanLine::new(LineKind::Center { border_index: idx as f64 }, 1.0);
            assert_eq!(line_to_bin(&line, h, w, 1), idx);
        }
        assert!(center_bin_to_endpoint(2048, h, w).is_err());
    }

    #[test]
    fn line_to_bin_examples() {
        let l = |kind| ManhattanLine::new(kind, 1.0);
        assert_eq!(line_to_bin(&l(LineKind::Horizontal { rho: 0.0 }), 512, 512, 1), 256);
        assert_eq!(line_to_bin(&l(LineKind::Vertical { rho: -256.0 + 0.4 }), 512, 512, 1), 0);
        let idx = border_position(256.0, 0.0, 512, 512);
        assert_eq!(idx, 255.0);
        assert_eq!(
            line_to_bin(&l(LineKind::Center { border_index: idx }), 512, 512, 1),
            255
        );
    }

    #[test]
    fn border_direction_inverts_position() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..500 {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let idx = border_position(a, b, 64, 48);
            let (da, db) = border_direction(idx, 64, 48);
            let n = a.hypot(b);
            assert!((da - a / n).abs() < 1e-9 && (db - b / n).abs() < 1e-9);
        }
    }

    #[test]
    fn border_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (i0, da, db) = border_position_with_grad(a, b, 64, 64);
            let e = 1e-7;
            let fa = border_position(a + e, b, 64, 64) - border_position(a - e, b, 64, 64);
            let fb = border_position(a, b + e, 64, 64) - border_position(a, b - e, 64, 64);
            // Skip samples straddling a side change or the wrap point.
            if fa.abs() > 1.0 || fb.abs() > 1.0 || i0 < 1.0 {
                continue;
            }
            assert!((fa / (2.0 * e) - da).abs() < 1e-4 * (1.0 + da.abs()));
            assert!((fb / (2.0 * e) - db).abs() < 1e-4 * (1.0 + db.abs()));
        }
    }

    #[test]
    fn value_and_bin_round_trip() {
        for family in LineFamily::ALL {
            for k in [1, 2, 4] {
                for bin in [0.0, 3.0, 17.5] {
                    let value = bin_to_value(family, bin, 64, 64, k);
                    let kind = LineKind::with_value(family, value);
                    assert!((fractional_bin(&kind, 64, 64, k) - bin).abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn dmht_is_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_map(&mut rng, 24, 24);
            let y = random_map(&mut rng, 24, 24);
            let mix = FeatureMap {
                h: 24,
                w: 24,
                data: x.data.iter().zip(&y.data).map(|(p, q)| a * p + b * q).collect(),
            };
            let (hx, hy, hm) = (dmht(&x, 1).unwrap(), dmht(&y, 1).unwrap(), dmht(&mix, 1).unwrap());
            for f in LineFamily::ALL {
                for ((p, q), m) in hx.vector(f).iter().zip(hy.vector(f)).zip(hm.vector(f)) {
                    prop_assert!((a * p + b * q - m).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn h_and_v_conserve_mass(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_map(&mut rng, 16, 32);
            let hv = dmht(&x, 1).unwrap();
            let total: f64 = x.data.iter().sum();
            prop_assert!((hv.h.iter().sum::<f64>() - total).abs() < 1e-6);
            prop_assert!((hv.v.iter().sum::<f64>() - total).abs() < 1e-6);
        }

        #[test]
        fn coarse_bins_average_fine_bins(seed in 0u64..1000, k in prop::sample::select(vec![2usize, 4])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_map(&mut rng, 32, 32);
            let fine = dmht(&x, 1).unwrap();
            let coarse = dmht(&x, k).unwrap();
            prop_assert_eq!(coarse.bin_scale, k);
            for f in LineFamily::ALL {
                let expect = average_bins(fine.vector(f), k);
                for (p, q) in expect.iter().zip(coarse.vector(f)) {
                    prop_assert!((p - q).abs() < 1e-9);
                }
            }
        }
    }
}
