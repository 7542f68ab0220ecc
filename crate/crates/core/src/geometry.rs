//! Camera model, coordinate conventions and cubemap projection.
//!
//! World frame: the panorama camera sits at the origin, `y` points along the
//! front optical axis, `z` points up to the ceiling and `x` to the right.
//! Longitude is `atan2(x, y)` (clockwise seen from above, 0 at the front
//! axis) and latitude is the elevation above the horizon.
//!
//! Tile image frame: origin at the tile center, `x` to the right, `y` down.
//! Pixel `(i, j)` of an `N x N` tile has its center at
//! `(i + 0.5 - N/2, j + 0.5 - N/2)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Index, IndexMut};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Field of view of every cubemap tile, both directions.
pub const TILE_FOV_DEG: f64 = 90.0;

/// Rotation about the `z` axis by `u` radians.
pub fn rotation_z(u: f64) -> Mat3 {
    let (s, c) = u.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Rotation about the `x` axis by `v` radians.
pub fn rotation_x(v: f64) -> Mat3 {
    let (s, c) = v.sin_cos();
    Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Front,
    Right,
    Back,
    Left,
    Up,
    Down,
}

impl Face {
    pub const ALL: [Face; 6] = [
        Face::Front,
        Face::Right,
        Face::Back,
        Face::Left,
        Face::Up,
        Face::Down,
    ];

    /// The four faces looking at the walls.
    pub const SIDES: [Face; 4] = [Face::Front, Face::Right, Face::Back, Face::Left];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Face::Front => "front",
            Face::Right => "right",
            Face::Back => "back",
            Face::Left => "left",
            Face::Up => "up",
            Face::Down => "down",
        }
    }

    pub fn from_name(name: &str) -> Option<Face> {
        Face::ALL.into_iter().find(|f| f.name() == name)
    }

    /// `(azimuth, elevation)` of the optical axis in degrees. Azimuth follows
    /// the longitude convention, so `Right` looks along `+x`.
    pub fn angles_deg(self) -> (f64, f64) {
        match self {
            Face::Front => (0.0, 0.0),
            Face::Right => (90.0, 0.0),
            Face::Back => (180.0, 0.0),
            Face::Left => (-90.0, 0.0),
            Face::Up => (0.0, 90.0),
            Face::Down => (0.0, -90.0),
        }
    }

    /// Camera-to-world rotation computed from the face angles.
    pub fn rotation_from_angles(self) -> Mat3 {
        let (u, v) = self.angles_deg();
        rotation_z(-u.to_radians()) * rotation_x(v.to_radians())
    }

    /// Camera-to-world rotation with exact `0/±1` entries. Columns are the
    /// world directions of the camera `x` (image right), `y` (optical axis)
    /// and `z` (image up) axes.
    pub fn rotation(self) -> Mat3 {
        let col = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
        let up = col(0.0, 0.0, 1.0);
        let (right, axis, top) = match self {
            Face::Front => (col(1.0, 0.0, 0.0), col(0.0, 1.0, 0.0), up),
            Face::Right => (col(0.0, -1.0, 0.0), col(1.0, 0.0, 0.0), up),
            Face::Back => (col(-1.0, 0.0, 0.0), col(0.0, -1.0, 0.0), up),
            Face::Left => (col(0.0, 1.0, 0.0), col(-1.0, 0.0, 0.0), up),
            Face::Up => (col(1.0, 0.0, 0.0), up, col(0.0, -1.0, 0.0)),
            Face::Down => (col(1.0, 0.0, 0.0), -up, col(0.0, 1.0, 0.0)),
        };
        Mat3::from_columns(&[right, axis, top])
    }
}

/// A value per cubemap face, indexable by [`Face`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceMap<T>(pub [T; 6]);

impl<T> FaceMap<T> {
    pub fn from_fn(mut f: impl FnMut(Face) -> T) -> Self {
        FaceMap(Face::ALL.map(&mut f))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Face, &T)> {
        Face::ALL.into_iter().zip(self.0.iter())
    }

    pub fn map<U>(&self, mut f: impl FnMut(Face, &T) -> U) -> FaceMap<U> {
        FaceMap::from_fn(|face| f(face, &self[face]))
    }
}

impl<T: Default> Default for FaceMap<T> {
    fn default() -> Self {
        FaceMap::from_fn(|_| T::default())
    }
}

impl<T> Index<Face> for FaceMap<T> {
    type Output = T;
    fn index(&self, face: Face) -> &T {
        &self.0[face.index()]
    }
}

impl<T> IndexMut<Face> for FaceMap<T> {
    fn index_mut(&mut self, face: Face) -> &mut T {
        &mut self.0[face.index()]
    }
}

/// Centered tile coordinate in pixels (`x` right, `y` down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub qx: f64,
    pub qy: f64,
}

impl ImagePoint {
    pub fn new(qx: f64, qy: f64) -> Self {
        Self { qx, qy }
    }
}

/// Coordinates of a world point in the camera frame of `face`.
#[inline]
pub fn world_to_camera(p: &Vec3, face: Face) -> Vec3 {
    face.rotation().transpose() * p
}

/// Projects a world point onto a tile; `None` when the point is behind the
/// tile camera.
pub fn world_to_tile(p: &Vec3, face: Face, size: usize) -> Option<ImagePoint> {
    let r = world_to_camera(p, face);
    camera_to_tile(&r, size)
}

#[inline]
pub(crate) fn camera_to_tile(r: &Vec3, size: usize) -> Option<ImagePoint> {
    if r.y <= 0.0 {
        return None;
    }
    let half = size as f64 / 2.0;
    Some(ImagePoint::new(half * r.x / r.y, half * -r.z / r.y))
}

/// Unit world direction of the ray through a centered tile coordinate.
pub fn tile_to_world_ray(q: ImagePoint, face: Face, size: usize) -> Vec3 {
    let half = size as f64 / 2.0;
    let r = Vec3::new(q.qx / half, 1.0, -q.qy / half);
    (face.rotation() * r).normalize()
}

/// Centered coordinate of the center of tile pixel `(i, j)`.
#[inline]
pub fn pixel_center(i: usize, j: usize, size: usize) -> ImagePoint {
    let off = size as f64 / 2.0 - 0.5;
    ImagePoint::new(i as f64 - off, j as f64 - off)
}

/// `(longitude, latitude)` of a direction in radians.
pub fn direction_to_lonlat(d: &Vec3) -> (f64, f64) {
    let lon = d.x.atan2(d.y);
    let lat = (d.z / d.norm()).clamp(-1.0, 1.0).asin();
    (lon, lat)
}

pub fn lonlat_to_direction(lon: f64, lat: f64) -> Vec3 {
    let (sl, cl) = lon.sin_cos();
    let (sp, cp) = lat.sin_cos();
    Vec3::new(cp * sl, cp * cl, sp)
}

/// Continuous panorama coordinates of a longitude/latitude pair. Longitude
/// `-π` maps to column 0, latitude `π/2` to row 0.
pub fn lonlat_to_uv(lon: f64, lat: f64, width: usize, height: usize) -> (f64, f64) {
    let u = (lon + PI) / (2.0 * PI) * width as f64;
    let v = (FRAC_PI_2 - lat) / PI * height as f64;
    (u, v)
}

pub fn uv_to_lonlat(u: f64, v: f64, width: usize, height: usize) -> (f64, f64) {
    let lon = u / width as f64 * 2.0 * PI - PI;
    let lat = FRAC_PI_2 - v / height as f64 * PI;
    (lon, lat)
}

/// Continuous panorama coordinates of a view direction.
pub fn direction_to_equirect_uv(d: &Vec3, width: usize, height: usize) -> (f64, f64) {
    let (lon, lat) = direction_to_lonlat(d);
    lonlat_to_uv(lon, lat, width, height)
}

/// Equirectangular panorama: `width = 2 * height`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectImage {
    raster: Raster,
}

impl EquirectImage {
    pub fn new(raster: Raster) -> Result<Self> {
        if raster.width != 2 * raster.height || raster.height == 0 {
            return Err(Error::BadAspect {
                width: raster.width,
                height: raster.height,
            });
        }
        Ok(Self { raster })
    }

    pub fn width(&self) -> usize {
        self.raster.width
    }

    pub fn height(&self) -> usize {
        self.raster.height
    }

    pub fn channels(&self) -> usize {
        self.raster.channels
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn into_raster(self) -> Raster {
        self.raster
    }

    /// Bilinear sample along a direction; longitude wraps, latitude clamps.
    pub fn sample(&self, d: &Vec3, out: &mut [f32]) {
        let (u, v) = direction_to_equirect_uv(d, self.width(), self.height());
        self.raster.sample_bilinear(u, v, true, out);
    }
}

/// One 90°-FoV perspective view.
#[derive(Debug, Clone, PartialEq)]
pub struct CubemapTile {
    pub face: Face,
    pub raster: Raster,
}

impl CubemapTile {
    pub fn size(&self) -> usize {
        self.raster.width
    }

    pub fn fov_deg(&self) -> f64 {
        TILE_FOV_DEG
    }
}

pub type Cubemap = FaceMap<CubemapTile>;

/// Resamples the panorama into the perspective tile of `face`.
pub fn e2p(img: &EquirectImage, face: Face, size: usize) -> CubemapTile {
    assert!(size > 0, "tile size must be positive");
    let channels = img.channels();
    let mut data = vec![0.0f32; size * size * channels];
    data.par_chunks_mut(size * channels)
        .enumerate()
        .for_each(|(j, row)| {
            for i in 0..size {
                let d = tile_to_world_ray(pixel_center(i, j, size), face, size);
                img.sample(&d, &mut row[i * channels..(i + 1) * channels]);
            }
        });
    CubemapTile {
        face,
        raster: Raster {
            width: size,
            height: size,
            channels,
            data,
        },
    }
}

pub fn make_cubemap(img: &EquirectImage, size: usize) -> Cubemap {
    let tiles: Vec<CubemapTile> = Face::ALL
        .par_iter()
        .map(|&face| e2p(img, face, size))
        .collect();
    let mut it = tiles.into_iter();
    FaceMap::from_fn(|_| it.next().expect("six tiles"))
}

/// Face whose view contains the direction (largest optical-axis component).
pub fn face_for_direction(d: &Vec3) -> Face {
    let mut best = Face::Front;
    let mut best_dot = f64::NEG_INFINITY;
    for face in Face::ALL {
        let axis = face.rotation().column(1).into_owned();
        let dot = axis.dot(d);
        if dot > best_dot {
            best_dot = dot;
            best = face;
        }
    }
    best
}

/// Inverse of [`make_cubemap`]: resamples the six tiles back to a panorama.
pub fn cubemap_to_equirect(cube: &Cubemap, width: usize) -> Result<EquirectImage> {
    let height = width / 2;
    let channels = cube[Face::Front].raster.channels;
    let mut data = vec![0.0f32; width * height * channels];
    data.par_chunks_mut(width * channels)
        .enumerate()
        .for_each(|(j, row)| {
            for i in 0..width {
                let (lon, lat) = uv_to_lonlat(i as f64 + 0.5, j as f64 + 0.5, width, height);
                let d = lonlat_to_direction(lon, lat);
                let face = face_for_direction(&d);
                let tile = &cube[face];
                let size = tile.size();
                let q = world_to_tile(&d, face, size).expect("direction in front of its face");
                let half = size as f64 / 2.0;
                tile.raster.sample_bilinear(
                    q.qx + half,
                    q.qy + half,
                    false,
                    &mut row[i * channels..(i + 1) * channels],
                );
            }
        });
    EquirectImage::new(Raster {
        width,
        height,
        channels,
        data,
    })
}
