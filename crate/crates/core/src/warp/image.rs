use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use super::WarpField;
use crate::geometry::ImageSize;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image must have 1 or 3 channels, got {0}")]
    Channels(usize),
    #[error("plane {plane} has {got} samples, expected {expected}")]
    Shape { plane: usize, expected: usize, got: usize },
    #[error("intensity {0} outside [0, 1]")]
    Intensity(f32),
    #[error(transparent)]
    Size(#[from] crate::geometry::GeometryError),
    #[error("png: {0}")]
    Codec(#[from] ::image::ImageError),
}

/// Planar float image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    size: ImageSize,
    planes: Vec<Vec<f32>>,
}

impl Image {
    pub fn new(size: ImageSize, planes: Vec<Vec<f32>>) -> Result<Self, ImageError> {
        if planes.len() != 1 && planes.len() != 3 {
            return Err(ImageError::Channels(planes.len()));
        }
        let expected = size.w() as usize * size.h() as usize;
        for (plane, p) in planes.iter().enumerate() {
            if p.len() != expected {
                return Err(ImageError::Shape {
                    plane,
                    expected,
                    got: p.len(),
                });
            }
            if let Some(&v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(ImageError::Intensity(v));
            }
        }
        Ok(Self { size, planes })
    }

    pub fn filled(size: ImageSize, channels: usize, value: f32) -> Result<Self, ImageError> {
        let n = size.w() as usize * size.h() as usize;
        Self::new(size, vec![vec![value; n]; channels])
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn channels(&self) -> usize {
        self.planes.len()
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        &self.planes[c]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f32 {
        self.planes[c][y * self.size.w() as usize + x]
    }

    /// Decodes an 8-bit PNG; gray stays single-channel, anything else becomes
    /// RGB (alpha is dropped).
    pub fn read_png(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let img = ::image::ImageReader::open(path.as_ref())
            .map_err(::image::ImageError::IoError)?
            .with_guessed_format()
            .map_err(::image::ImageError::IoError)?
            .decode()?;
        Self::from_dynamic(&img)
    }

    pub fn from_dynamic(img: &::image::DynamicImage) -> Result<Self, ImageError> {
        use ::image::DynamicImage;
        let size = ImageSize::new(img.width(), img.height())?;
        let to_f = |v: u8| f32::from(v) / 255.0;
        let planes = match img {
            DynamicImage::ImageLuma8(g) => vec![g.as_raw().iter().copied().map(to_f).collect()],
            DynamicImage::ImageLumaA8(_) => vec![img.to_luma8().as_raw().iter().copied().map(to_f).collect()],
            _ => {
                let rgb = img.to_rgb8();
                (0..3)
                    .map(|c| rgb.as_raw().iter().skip(c).step_by(3).copied().map(to_f).collect())
                    .collect()
            }
        };
        Self::new(size, planes)
    }

    /// 8-bit encoding with round-half-up quantization.
    pub fn to_dynamic(&self) -> ::image::DynamicImage {
        let to_u8 = |v: f32| (v * 255.0 + 0.5).floor().clamp(0.0, 255.0) as u8;
        let (w, h) = (self.size.w(), self.size.h());
        if self.channels() == 1 {
            let raw = self.planes[0].iter().copied().map(to_u8).collect();
            ::image::DynamicImage::ImageLuma8(::image::GrayImage::from_raw(w, h, raw).expect("sized buffer"))
        } else {
            let n = w as usize * h as usize;
            let mut raw = Vec::with_capacity(3 * n);
            for k in 0..n {
                raw.extend(self.planes.iter().map(|p| to_u8(p[k])));
            }
            ::image::DynamicImage::ImageRgb8(::image::RgbImage::from_raw(w, h, raw).expect("sized buffer"))
        }
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        self.to_dynamic()
            .save_with_format(path, ::image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>, ImageError> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_dynamic().write_to(&mut out, ::image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }
}

/// Per-axis sample positions: lower neighbour index and blend weight.
fn taps(values: &[f64], len: usize) -> Vec<(usize, usize, f32)> {
    values
        .iter()
        .map(|&t| {
            let i0 = (t.floor() as usize).min(len - 1);
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, (t - i0 as f64) as f32)
        })
        .collect()
}

/// Resamples `img` through `wf`: `out[x, y] = bilinear(img, tx[x], ty[y])`.
///
/// Rows are processed in parallel; every output value depends only on its
/// own row and column taps, so the result does not depend on thread count.
pub fn warp_image(img: &Image, wf: &WarpField) -> Image {
    let (in_w, in_h) = (img.size.w() as usize, img.size.h() as usize);
    let out_size = wf.out_size();
    let (out_w, out_h) = (out_size.w() as usize, out_size.h() as usize);
    let xt = taps(wf.tx().values(), in_w);
    let yt = taps(wf.ty().values(), in_h);

    let planes = img
        .planes
        .iter()
        .map(|src| {
            let mut dst = vec![0.0f32; out_w * out_h];
            dst.par_chunks_mut(out_w).zip(yt.par_iter()).for_each(|(row, &(y0, y1, fy))| {
                let r0 = &src[y0 * in_w..(y0 + 1) * in_w];
                let r1 = &src[y1 * in_w..(y1 + 1) * in_w];
                for (out, &(x0, x1, fx)) in row.iter_mut().zip(&xt) {
                    let top = r0[x0] + fx * (r0[x1] - r0[x0]);
                    let bottom = r1[x0] + fx * (r1[x1] - r1[x0]);
                    *out = (top + fy * (bottom - top)).clamp(0.0, 1.0);
                }
            });
            dst
        })
        .collect();
    Image {
        size: out_size,
        planes,
    }
}
