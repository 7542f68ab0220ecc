//! Projection of a layout wireframe onto the cubemap tiles.

use crate::geometry::{camera_to_tile, Face, FaceMap, ImagePoint, Vec3};
use crate::hough::{border_position_with_grad, fractional_bin, LineFamily, LineKind, ManhattanLine};

use super::{LayoutParams, RoomLayout};

/// Clipped segments shorter than this many pixels count as invisible.
pub const MIN_VISIBLE_PX: f64 = 1.0;

/// A wireframe edge; `params[i]` names the parameter equal to coordinate `i`
/// where the coordinate is fixed along the edge.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Segment {
    pub a: Vec3,
    pub b: Vec3,
    pub params: [Option<usize>; 3],
}

fn ring_segments(
    floor: &[Vec3],
    ceiling: &[Vec3],
    wall_param: impl Fn(usize) -> Option<usize>,
    height_param: Option<usize>,
) -> Vec<Segment> {
    let n = floor.len();
    let mut out = Vec::with_capacity(3 * n);
    for k in 0..n {
        let prev = (k + n - 1) % n;
        // Wall k: y-wall for even k, x-wall for odd k.
        let axis = if k % 2 == 0 { 1 } else { 0 };
        let mut params = [None; 3];
        params[axis] = wall_param(k);
        out.push(Segment {
            a: floor[prev],
            b: floor[k],
            params,
        });
        params[2] = height_param;
        out.push(Segment {
            a: ceiling[prev],
            b: ceiling[k],
            params,
        });
        // Vertical edge at corner k between walls k and k+1.
        let next = (k + 1) % n;
        let mut params = [None; 3];
        params[axis] = wall_param(k);
        params[1 - axis] = wall_param(next);
        out.push(Segment {
            a: floor[k],
            b: ceiling[k],
            params,
        });
    }
    out
}

pub(crate) fn param_segments(t: &LayoutParams) -> Vec<Segment> {
    let (floor, ceiling) = t.corner_rings();
    ring_segments(&floor, &ceiling, Some, Some(t.n_walls()))
}

/// A wireframe edge as seen on one tile, with the derivative of its line
/// value with respect to each parameter it depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedLine {
    pub face: Face,
    pub kind: LineKind,
    pub grad: Vec<(usize, f64)>,
    /// Visible end points on the tile.
    pub ends: [ImagePoint; 2],
}

/// Clips the camera-frame segment `ra -> rb` to the tile frustum.
fn clip_to_frustum(ra: &Vec3, rb: &Vec3) -> Option<(f64, f64)> {
    let g = |r: &Vec3| [r.y - r.x, r.y + r.x, r.y - r.z, r.y + r.z];
    let (ga, gb) = (g(ra), g(rb));
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for (g0, g1) in ga.into_iter().zip(gb) {
        if g0 < 0.0 && g1 < 0.0 {
            return None;
        }
        if g0 < 0.0 {
            t0 = t0.max(g0 / (g0 - g1));
        } else if g1 < 0.0 {
            t1 = t1.min(g0 / (g0 - g1));
        }
    }
    (t0 < t1).then_some((t0, t1))
}

pub(crate) fn project_segment(seg: &Segment, face: Face, size: usize) -> Option<ProjectedLine> {
    let rot = face.rotation();
    let rt = rot.transpose();
    let ra = rt * seg.a;
    let rb = rt * seg.b;
    let (t0, t1) = clip_to_frustum(&ra, &rb)?;
    let d = rb - ra;
    let pa = ra + d * t0;
    let pb = ra + d * t1;
    if pa.y <= 0.0 || pb.y <= 0.0 {
        return None;
    }
    let qa = camera_to_tile(&pa, size)?;
    let qb = camera_to_tile(&pb, size)?;
    if (qa.qx - qb.qx).hypot(qa.qy - qb.qy) < MIN_VISIBLE_PX {
        return None;
    }
    let half = size as f64 / 2.0;
    let r = (pa + pb) / 2.0;
    let (ax, ay, az) = (d.x.abs(), d.y.abs(), d.z.abs());
    let (kind, grad_r) = if ax >= ay && ax >= az {
        let rho = -half * r.z / r.y;
        (
            LineKind::Horizontal { rho },
            Vec3::new(0.0, half * r.z / (r.y * r.y), -half / r.y),
        )
    } else if az >= ay {
        let rho = half * r.x / r.y;
        (
            LineKind::Vertical { rho },
            Vec3::new(half / r.y, -half * r.x / (r.y * r.y), 0.0),
        )
    } else {
        let (a, b) = (r.x, -r.z);
        if a.hypot(b) <= 1e-12 * r.norm() {
            return None;
        }
        let (idx, da, db) = border_position_with_grad(a, b, size, size);
        (
            LineKind::Center { border_index: idx },
            Vec3::new(da, 0.0, -db),
        )
    };
    let gw = rot * grad_r;
    let grad = (0..3)
        .filter_map(|i| seg.params[i].map(|p| (p, gw[i])))
        .collect();
    Some(ProjectedLine {
        face,
        kind,
        grad,
        ends: [qa, qb],
    })
}

fn project_segments(segs: &[Segment], size: usize) -> FaceMap<Vec<ProjectedLine>> {
    FaceMap::from_fn(|face| {
        segs.iter()
            .filter_map(|s| project_segment(s, face, size))
            .collect()
    })
}

/// Every visible wireframe line of a layout, per face.
pub fn project_params(t: &LayoutParams, size: usize) -> FaceMap<Vec<ProjectedLine>> {
    project_segments(&param_segments(t), size)
}

/// Visible wireframe lines of a layout with unit confidence.
pub fn params_to_tile_lines(t: &LayoutParams, size: usize) -> FaceMap<Vec<ManhattanLine>> {
    project_params(t, size).map(|_, v| v.iter().map(|p| ManhattanLine::new(p.kind, 1.0)).collect())
}

/// Visible wireframe lines of a panorama corner layout. The corners are
/// lifted to 3D with the given camera height.
pub fn corners_to_tile_lines(
    layout: &RoomLayout,
    size: usize,
    camera_height: f64,
) -> crate::Result<FaceMap<Vec<ManhattanLine>>> {
    let (floor, ceiling) = layout.corner_rings(camera_height)?;
    let segs = ring_segments(&floor, &ceiling, |_| None, None);
    Ok(project_segments(&segs, size)
        .map(|_, v| v.iter().map(|p| ManhattanLine::new(p.kind, 1.0)).collect()))
}

/// A projected line located in a vote vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedBin {
    pub family: LineFamily,
    /// Bin at or below the line position.
    pub bin: usize,
    /// Offset in `[0, 1)` towards the next bin.
    pub frac: f64,
}

pub fn project_layout(t: &LayoutParams, size: usize, bin_scale: usize) -> FaceMap<Vec<ProjectedBin>> {
    project_params(t, size).map(|_, lines| {
        lines
            .iter()
            .map(|l| {
                let f = fractional_bin(&l.kind, size, size, bin_scale);
                let bin = f.floor();
                ProjectedBin {
                    family: l.kind.family(),
                    bin: bin.max(0.0) as usize,
                    frac: f - bin,
                }
            })
            .collect()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::world_to_tile;
    use crate::hough::{border_position, line_to_bin};
    use crate::layout::layout_to_corners;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cuboid_floor_on_down_face() {
        let t = LayoutParams::cuboid(1.2, 1.4, 1.0, 1.1, 3.0);
        let lines = params_to_tile_lines(&t, 256);
        let down: Vec<_> = lines[Face::Down]
            .iter()
            .filter(|l| l.kind.family() != LineFamily::Center)
            .collect();
        assert_eq!(down.len(), 4);
        // Front wall at y = 1.2 appears at qy = -128 * 1.2 / 1.6.
        assert!(down
            .iter()
            .any(|l| l.kind == LineKind::Horizontal { rho: -128.0 * 1.2 / 1.6 }));
    }

    #[test]
    fn vertical_edge_on_front_face() {
        let t = LayoutParams::cuboid(3.0, 1.0, 3.0, 1.5, 3.0);
        let lines = params_to_tile_lines(&t, 512);
        let verticals: Vec<f64> = lines[Face::Front]
            .iter()
            .filter(|l| l.kind.family() == LineFamily::Vertical)
            .map(|l| l.kind.value())
            .collect();
        // Corners at x = -1 and x = 1.5 on the plane y = 3.
        let oracle_left = 256.0 * -1.0 / 3.0;
        let oracle_right = 256.0 * 1.5 / 3.0;
        assert_eq!(verticals.len(), 2);
        assert!(verticals.iter().any(|v| (v - oracle_left).abs() < 1e-9));
        assert!(verticals.iter().any(|v| (v - oracle_right).abs() < 1e-9));
    }

    #[test]
    fn lines_pass_through_projected_points() {
        let t = LayoutParams::new(vec![2.0, -3.0, -2.5, 1.5, -1.2, 4.0], 2.8, 1.6);
        let size = 128;
        let (floor, ceiling) = t.corner_rings();
        let segs = param_segments(&t);
        for face in Face::ALL {
            for s in &segs {
                let Some(p) = project_segment(s, face, size) else { continue };
                for q in p.ends {
                    match p.kind {
                        LineKind::Horizontal { rho } => assert_abs_diff_eq!(q.qy, rho, epsilon = 1e-6),
                        LineKind::Vertical { rho } => assert_abs_diff_eq!(q.qx, rho, epsilon = 1e-6),
                        LineKind::Center { border_index } => {
                            let idx = border_position(q.qx, q.qy, size, size);
                            let d = (idx - border_index).abs();
                            assert!(d.min(4.0 * size as f64 - d) < 1e-6);
                        }
                    }
                }
            }
        }
        // The floor corner at (4, 2, -1.6) lies on a Right-face vertical line.
        let q = world_to_tile(&floor[5], Face::Right, size).unwrap();
        let front = project_params(&t, size);
        assert!(front[Face::Right]
            .iter()
            .any(|l| l.kind == LineKind::Vertical { rho: q.qx }));
        assert_eq!(ceiling.len(), floor.len());
    }

    #[test]
    fn corner_path_matches_param_path() {
        let t = LayoutParams::new(vec![2.0, -3.0, -2.5, 1.5, -1.2, 4.0], 2.8, 1.6);
        let a = params_to_tile_lines(&t, 256);
        let b = corners_to_tile_lines(&layout_to_corners(&t).unwrap(), 256, 1.6).unwrap();
        for face in Face::ALL {
            assert_eq!(a[face].len(), b[face].len());
            for (x, y) in a[face].iter().zip(&b[face]) {
                assert_eq!(x.kind.family(), y.kind.family());
                assert_abs_diff_eq!(x.kind.value(), y.kind.value(), epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn binned_projection_composes() {
        let t = LayoutParams::cuboid(2.2, 2.9, 3.1, 1.7, 2.9);
        for bin_scale in [1, 2, 4] {
            let bins = project_layout(&t, 256, bin_scale);
            let lines = params_to_tile_lines(&t, 256);
            for face in Face::ALL {
                assert_eq!(bins[face].len(), lines[face].len());
                for (b, l) in bins[face].iter().zip(&lines[face]) {
                    assert_eq!(b.family, l.kind.family());
                    let nearest = if b.frac < 0.5 { b.bin } else { b.bin + 1 };
                    let expect = line_to_bin(l, 256, 256, bin_scale);
                    let len = match b.family {
                        LineFamily::Center => 4 * 256 / bin_scale,
                        _ => 256 / bin_scale,
                    };
                    assert_eq!(nearest % len, expect);
                }
            }
        }
    }
}
