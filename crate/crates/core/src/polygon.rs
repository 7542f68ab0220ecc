//! Floor-plan polygon helpers for rectilinear (axis-aligned) polygons.

pub type Point2 = [f64; 2];

/// Signed area, positive for counterclockwise vertex order.
pub fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    acc / 2.0
}

pub fn area(poly: &[Point2]) -> f64 {
    signed_area(poly).abs()
}

/// Even-odd point in polygon test.
pub fn contains(poly: &[Point2], p: Point2) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > p[1]) != (yj > p[1]) {
            let x = xj + (p[1] - yj) / (yi - yj) * (xi - xj);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the polygon boundary.
pub fn boundary_distance(poly: &[Point2], p: Point2) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| point_segment_distance(p, poly[i], poly[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    (p[0] - cx).hypot(p[1] - cy)
}

fn ranges_overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> bool {
    a0.min(a1) <= b0.max(b1) && b0.min(b1) <= a0.max(a1)
}

/// Closed-segment intersection test for axis-aligned segments.
fn axis_segments_touch(a: (Point2, Point2), b: (Point2, Point2)) -> bool {
    let a_horizontal = a.0[1] == a.1[1];
    let b_horizontal = b.0[1] == b.1[1];
    match (a_horizontal, b_horizontal) {
        (true, true) => a.0[1] == b.0[1] && ranges_overlap(a.0[0], a.1[0], b.0[0], b.1[0]),
        (false, false) => a.0[0] == b.0[0] && ranges_overlap(a.0[1], a.1[1], b.0[1], b.1[1]),
        (true, false) => {
            ranges_overlap(a.0[0], a.1[0], b.0[0], b.0[0])
                && ranges_overlap(b.0[1], b.1[1], a.0[1], a.0[1])
        }
        (false, true) => axis_segments_touch(b, a),
    }
}

/// Whether a rectilinear polygon is simple: edges alternate between
/// horizontal and vertical, have nonzero length, and only adjacent edges meet.
pub fn is_simple_rectilinear(poly: &[Point2]) -> bool {
    let n = poly.len();
    if n < 4 || n % 2 != 0 {
        return false;
    }
    let edge = |i: usize| (poly[i], poly[(i + 1) % n]);
    for i in 0..n {
        let (a, b) = edge(i);
        let horizontal = a[1] == b[1];
        let vertical = a[0] == b[0];
        if horizontal == vertical {
            // Zero length or diagonal.
            return false;
        }
        let (c, d) = edge((i + 1) % n);
        if (c[1] == d[1]) == horizontal {
            return false;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if !adjacent && axis_segments_touch(edge(i), edge(j)) {
                return false;
            }
        }
    }
    true
}

/// Nearest positive hit of the ray `origin + t * dir` with the boundary.
pub fn ray_cast(poly: &[Point2], origin: Point2, dir: Point2) -> Option<f64> {
    let n = poly.len();
    let mut best: Option<f64> = None;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let denom = dir[0] * ey - dir[1] * ex;
        if denom == 0.0 {
            continue;
        }
        let (wx, wy) = (a[0] - origin[0], a[1] - origin[1]);
        let t = (wx * ey - wy * ex) / denom;
        let s = (wx * dir[1] - wy * dir[0]) / denom;
        if t > 0.0 && (0.0..=1.0).contains(&s) && best.map_or(true, |bt| t < bt) {
            best = Some(t);
        }
    }
    best
}

/// Area of the intersection of two rectilinear polygons, exact up to
/// rounding: the plane is cut into the grid of all vertex coordinates and
/// every cell lies either fully inside or fully outside each polygon.
pub fn intersection_area(a: &[Point2], b: &[Point2]) -> f64 {
    let mut xs: Vec<f64> = a.iter().chain(b).map(|p| p[0]).collect();
    let mut ys: Vec<f64> = a.iter().chain(b).map(|p| p[1]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut total = 0.0;
    for yw in ys.windows(2) {
        for xw in xs.windows(2) {
            let center = [(xw[0] + xw[1]) / 2.0, (yw[0] + yw[1]) / 2.0];
            if contains(a, center) && contains(b, center) {
                total += (xw[1] - xw[0]) * (yw[1] - yw[0]);
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
        vec![[x1, y1], [x0, y1], [x0, y0], [x1, y0]]
    }

    fn l_shape() -> Vec<Point2> {
        vec![[2.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [1.0, 0.0], [2.0, 0.0]]
    }

    #[test]
    fn areas() {
        assert_eq!(signed_area(&square(-1.0, -1.0, 1.0, 1.0)), 4.0);
        assert_eq!(area(&l_shape()), 5.0);
    }

    #[test]
    fn containment_and_ray_cast() {
        let l = l_shape();
        assert!(contains(&l, [0.0, 0.0]));
        assert!(!contains(&l, [1.5, -0.5]));
        assert_eq!(ray_cast(&l, [0.0, 0.0], [1.0, 0.0]), Some(1.0));
        assert_eq!(ray_cast(&l, [0.0, 0.5], [1.0, 0.0]), Some(2.0));
        assert_eq!(boundary_distance(&l, [0.0, 0.0]), 1.0);
    }

    #[test]
    fn simplicity() {
        assert!(is_simple_rectilinear(&square(-1.0, -1.0, 1.0, 1.0)));
        assert!(is_simple_rectilinear(&l_shape()));
        let bow = vec![[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [2.0, -1.0], [2.0, 0.5], [1.0, 0.5], [1.0, 2.0], [0.5, 2.0]];
        assert!(!is_simple_rectilinear(&bow));
        let degenerate = vec![[1.0, 1.0], [1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
        assert!(!is_simple_rectilinear(&degenerate));
    }

    #[test]
    fn intersections() {
        let a = square(-0.5, -0.5, 0.5, 0.5);
        let b = square(0.0, -0.5, 1.0, 0.5);
        assert!((intersection_area(&a, &b) - 0.5).abs() < 1e-12);
        let far = square(3.0, 3.0, 4.0, 4.0);
        assert_eq!(intersection_area(&a, &far), 0.0);
        assert!((intersection_area(&l_shape(), &l_shape()) - 5.0).abs() < 1e-12);
    }
}
