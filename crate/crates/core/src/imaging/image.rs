use std::path::Path;

use image::{ImageReader, ImageFormat};

use crate::error::{Error, Result};

/// Row-major floating-point raster with samples in `[0, 1]`.
///
/// Channels are interleaved: the sample for `(row, col, ch)` lives at
/// `(row * width + col) * channels + ch`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument(format!(
                "zero-dimension image {height}x{width}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "unsupported channel count {channels}"
            )));
        }
        if data.len() != height * width * channels {
            return Err(Error::Dimension(format!(
                "{} samples for a {height}x{width}x{channels} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!(
                "sample {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Builds an image from arbitrary samples, clamping each into `[0, 1]`.
    pub fn from_clamped(height: usize, width: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(height, width, channels, data)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.width + col) * self.channels + ch]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub(crate) fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.height, self.width, self.channels, other.height, other.width, other.channels
            )))
        }
    }

    /// One channel as a dense `height * width` plane.
    pub fn plane(&self, ch: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(ch)
            .step_by(self.channels)
            .copied()
            .collect()
    }

    /// Copies the `h x w` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, h: usize, w: usize) -> Result<Image> {
        if h == 0 || w == 0 || row + h > self.height || col + w > self.width {
            return Err(Error::TooSmall(format!(
                "crop {h}x{w} at ({row}, {col}) outside {}x{}",
                self.height, self.width
            )));
        }
        let c = self.channels;
        let mut data = Vec::with_capacity(h * w * c);
        for r in row..row + h {
            let start = (r * self.width + col) * c;
            data.extend_from_slice(&self.data[start..start + w * c]);
        }
        Ok(Image {
            height: h,
            width: w,
            channels: c,
            data,
        })
    }

    pub fn center_crop(&self, h: usize, w: usize) -> Result<Image> {
        if h > self.height || w > self.width {
            return Err(Error::TooSmall(format!(
                "center crop {h}x{w} from {}x{}",
                self.height, self.width
            )));
        }
        self.crop((self.height - h) / 2, (self.width - w) / 2, h, w)
    }

    /// Replicates a single channel into three; 3-channel images are returned as-is.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        Image {
            height: self.height,
            width: self.width,
            channels: 3,
            data,
        }
    }

    /// Bilinear resampling with half-pixel centers.
    pub fn resize_bilinear(&self, new_h: usize, new_w: usize) -> Result<Image> {
        if new_h == 0 || new_w == 0 {
            return Err(Error::InvalidArgument("resize to zero size".into()));
        }
        let c = self.channels;
        let sy = self.height as f64 / new_h as f64;
        let sx = self.width as f64 / new_w as f64;
        let axis = |i: usize, scale: f64, len: usize| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (pos.floor() as usize).min(len - 1);
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, pos - i0 as f64)
        };
        let cols: Vec<_> = (0..new_w).map(|x| axis(x, sx, self.width)).collect();
        let mut data = Vec::with_capacity(new_h * new_w * c);
        for y in 0..new_h {
            let (y0, y1, fy) = axis(y, sy, self.height);
            for &(x0, x1, fx) in &cols {
                for ch in 0..c {
                    let top = self.get(y0, x0, ch) * (1.0 - fx) + self.get(y0, x1, ch) * fx;
                    let bot = self.get(y1, x0, ch) * (1.0 - fx) + self.get(y1, x1, ch) * fx;
                    data.push((top * (1.0 - fy) + bot * fy).clamp(0.0, 1.0));
                }
            }
        }
        Image::new(new_h, new_w, c, data)
    }

    /// Upscales (preserving aspect ratio) until both sides are at least `min_side`.
    pub fn ensure_min_side(&self, min_side: usize) -> Result<Image> {
        let short = self.height.min(self.width);
        if short >= min_side {
            return Ok(self.clone());
        }
        let scale = min_side as f64 / short as f64;
        let h = ((self.height as f64 * scale).ceil() as usize).max(min_side);
        let w = ((self.width as f64 * scale).ceil() as usize).max(min_side);
        self.resize_bilinear(h, w)
    }

    /// Writes an 8-bit PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        let color = if self.channels == 3 {
            image::ExtendedColorType::Rgb8
        } else {
            image::ExtendedColorType::L8
        };
        image::save_buffer_with_format(
            path,
            &bytes,
            self.width as u32,
            self.height as u32,
            color,
            ImageFormat::Png,
        )
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Decode {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })
    }
}

/// Reads a PNG, JPEG or BMP file; 8-bit value `v` maps to `v / 255`.
///
/// Grayscale sources yield 1-channel images, everything else is converted to
/// RGB (alpha is dropped). 16-bit sources are scaled by `1 / 65535`.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Jpeg | ImageFormat::Bmp) => {}
        Some(other) => return Err(Error::UnsupportedFormat(format!("{other:?} ({})", path.display()))),
        None => return Err(Error::UnsupportedFormat(path.display().to_string())),
    }
    let decoded = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::Decode {
            path: path.to_path_buf(),
            message: "zero-dimension image".into(),
        });
    }
    let gray = !decoded.color().has_color();
    let sixteen = decoded.color().bytes_per_pixel() / decoded.color().channel_count() > 1;
    let (channels, data): (usize, Vec<f64>) = match (gray, sixteen) {
        (true, false) => (1, decoded.to_luma8().into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect()),
        (true, true) => (1, decoded.to_luma16().into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect()),
        (false, false) => (3, decoded.to_rgb8().into_raw().into_iter().map(|v| f64::from(v) / 255.0).collect()),
        (false, true) => (3, decoded.to_rgb16().into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect()),
    };
    Image::new(h, w, channels, data)
}

/// ITU-R BT.601 luma weights.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Converts to a single luminance channel, `Y = 0.299 R + 0.587 G + 0.114 B`.
pub fn to_luma(img: &Image) -> Result<Image> {
    match img.channels() {
        1 => Ok(img.clone()),
        3 => {
            let data = img
                .data()
                .chunks_exact(3)
                .map(|p| (LUMA_WEIGHTS[0] * p[0] + LUMA_WEIGHTS[1] * p[1] + LUMA_WEIGHTS[2] * p[2]).clamp(0.0, 1.0))
                .collect();
            Image::new(img.height(), img.width(), 1, data)
        }
        c => Err(Error::InvalidArgument(format!("unsupported channel count {c}"))),
    }
}
