//! Gradient magnitude similarity deviation.

use crate::error::{Error, Result};
use crate::filter;
use crate::imaging::{to_luma, Image};

/// Stabilizing constant for unit-range intensities (170 on the 8-bit scale).
pub const GMSD_C: f64 = 0.0026;

const PREWITT_X: [[f64; 3]; 3] = [
    [1.0 / 3.0, 0.0, -1.0 / 3.0],
    [1.0 / 3.0, 0.0, -1.0 / 3.0],
    [1.0 / 3.0, 0.0, -1.0 / 3.0],
];
const PREWITT_Y: [[f64; 3]; 3] = [
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [0.0, 0.0, 0.0],
    [-1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0],
];

fn gradient_magnitude(plane: &[f64], h: usize, w: usize) -> Vec<f64> {
    let gx = filter::correlate3_same_zero(plane, h, w, &PREWITT_X);
    let gy = filter::correlate3_same_zero(plane, h, w, &PREWITT_Y);
    gx.iter().zip(&gy).map(|(x, y)| (x * x + y * y).sqrt()).collect()
}

/// Population standard deviation of the gradient-magnitude similarity map.
/// Gradients use zero padding at the border. Zero means identical gradient
/// structure.
pub fn gmsd(a: &Image, b: &Image) -> Result<f64> {
    gmsd_with(a, b, GMSD_C)
}

pub fn gmsd_with(a: &Image, b: &Image, c: f64) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::Dimension(format!(
            "{}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    let (h, w) = (a.height(), a.width());
    let ga = gradient_magnitude(to_luma(a)?.data(), h, w);
    let gb = gradient_magnitude(to_luma(b)?.data(), h, w);
    let gms: Vec<f64> = ga
        .iter()
        .zip(&gb)
        .map(|(x, y)| (2.0 * x * y + c) / (x * x + y * y + c))
        .collect();
    let n = gms.len() as f64;
    let mean = gms.iter().sum::<f64>() / n;
    let var = gms.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
    Ok(var.sqrt())
}
