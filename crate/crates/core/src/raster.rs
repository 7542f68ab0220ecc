//! Floating point rasters and PNG input/output.
//!
//! Pixel `(0, 0)` is the top-left pixel. Continuous coordinates place the
//! center of pixel `(i, j)` at `(i + 0.5, j + 0.5)`.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};

/// Row-major, channel-interleaved `f32` raster. Values are nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Luma with Rec. 601 weights for three channels, identity for one.
    pub fn to_gray(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|p| match p.len() {
                3 | 4 => 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2],
                n => p.iter().sum::<f32>() / n as f32,
            })
            .collect();
        Raster {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Bilinear sample at continuous coordinates (pixel centers at `+0.5`).
    /// Columns wrap around when `wrap_x` is set, otherwise they clamp; rows
    /// always clamp.
    pub fn sample_bilinear(&self, u: f64, v: f64, wrap_x: bool, out: &mut [f32]) {
        let x = u - 0.5;
        let y = v - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let w = self.width as i64;
        let h = self.height as i64;
        let col = |i: i64| -> usize {
            if wrap_x {
                i.rem_euclid(w) as usize
            } else {
                i.clamp(0, w - 1) as usize
            }
        };
        let row = |j: i64| -> usize { j.clamp(0, h - 1) as usize };
        let (xa, xb) = (col(x0 as i64), col(x0 as i64 + 1));
        let (ya, yb) = (row(y0 as i64), row(y0 as i64 + 1));
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let top = self.get(xa, ya, c) * (1.0 - fx) + self.get(xb, ya, c) * fx;
            let bottom = self.get(xa, yb, c) * (1.0 - fx) + self.get(xb, yb, c) * fx;
            *o = top * (1.0 - fy) + bottom * fy;
        }
    }

    pub fn read_png(path: &Path) -> Result<Raster> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(Self::from_dynamic(img))
    }

    fn from_dynamic(img: DynamicImage) -> Raster {
        let (width, height) = (img.width() as usize, img.height() as usize);
        let gray = matches!(
            img,
            DynamicImage::ImageLuma8(_)
                | DynamicImage::ImageLuma16(_)
                | DynamicImage::ImageLumaA8(_)
                | DynamicImage::ImageLumaA16(_)
        );
        if gray {
            let buf = img.to_luma16();
            Raster {
                width,
                height,
                channels: 1,
                data: buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
            }
        } else {
            let buf = img.to_rgb16();
            Raster {
                width,
                height,
                channels: 3,
                data: buf.into_raw().into_iter().map(|v| v as f32 / 65535.0).collect(),
            }
        }
    }

    /// Writes an 8-bit (or 16-bit when `sixteen_bit`) grayscale or RGB PNG.
    pub fn write_png(&self, path: &Path, sixteen_bit: bool) -> Result<()> {
        let (w, h) = (self.width as u32, self.height as u32);
        let img = match (self.channels, sixteen_bit) {
            (1, false) => DynamicImage::ImageLuma8(
                ImageBuffer::<Luma<u8>, _>::from_raw(w, h, self.quantize8()).expect("buffer size"),
            ),
            (1, true) => DynamicImage::ImageLuma16(
                ImageBuffer::<Luma<u16>, _>::from_raw(w, h, self.quantize16()).expect("buffer size"),
            ),
            (3, false) => DynamicImage::ImageRgb8(
                ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, self.quantize8()).expect("buffer size"),
            ),
            (3, true) => DynamicImage::ImageRgb16(
                ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, self.quantize16()).expect("buffer size"),
            ),
            (c, _) => {
                return Err(Error::InvalidArgument(format!(
                    "cannot write a {c}-channel raster as PNG"
                )))
            }
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        img.save(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
    }

    fn quantize8(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    fn quantize16(&self) -> Vec<u16> {
        self.data
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect()
    }
}

/// Peak signal-to-noise ratio in dB for rasters with unit peak value.
pub fn psnr(a: &Raster, b: &Raster) -> f64 {
    assert_eq!(a.data.len(), b.data.len());
    let mse = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| {
            let d = (*x - *y) as f64;
            d * d
        })
        .sum::<f64>()
        / a.data.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (1.0 / mse).log10()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_hits_pixel_centers_exactly() {
        let r = Raster::from_fn(4, 3, 1, |x, y, _| (x + 10 * y) as f32);
        let mut out = [0.0];
        r.sample_bilinear(2.5, 1.5, false, &mut out);
        assert_eq!(out[0], 12.0);
        r.sample_bilinear(2.0, 1.5, false, &mut out);
        assert_eq!(out[0], 11.5);
    }

    #[test]
    fn bilinear_wraps_columns() {
        let r = Raster::from_fn(4, 1, 1, |x, _, _| x as f32);
        let mut out = [0.0];
        // Halfway between the last and the first column.
        r.sample_bilinear(4.0, 0.5, true, &mut out);
        assert_eq!(out[0], 1.5);
        r.sample_bilinear(4.0, 0.5, false, &mut out);
        assert_eq!(out[0], 3.0);
    }

    #[test]
    fn png_round_trip_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.png");
        let r = Raster::from_fn(5, 4, 1, |x, y, _| (x * 4 + y) as f32 / 20.0);
        r.write_png(&path, true).unwrap();
        let back = Raster::read_png(&path).unwrap();
        assert_eq!(back.channels, 1);
        for (a, b) in r.data.iter().zip(&back.data) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn png_rgb_8_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        let r = Raster::from_fn(3, 2, 3, |x, _, c| if c == x % 3 { 1.0 } else { 0.0 });
        r.write_png(&path, false).unwrap();
        let back = Raster::read_png(&path).unwrap();
        assert_eq!(back, r);
    }
}
