//! Phase congruency from a log-Gabor filter bank applied in the frequency
//! domain (4 scales x 4 orientations by default), following Kovesi's
//! formulation with per-orientation noise compensation.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{to_luma, Image};

pub const MIN_SIDE: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseCongruencyConfig {
    pub scales: usize,
    pub orientations: usize,
    pub min_wavelength: f64,
    pub mult: f64,
    pub sigma_on_f: f64,
    pub d_theta_on_sigma: f64,
    /// Noise threshold in standard deviations above the estimated noise energy mean.
    pub noise_k: f64,
    pub epsilon: f64,
}

impl Default for PhaseCongruencyConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            orientations: 4,
            min_wavelength: 6.0,
            mult: 2.0,
            sigma_on_f: 0.55,
            d_theta_on_sigma: 1.2,
            noise_k: 2.0,
            epsilon: 1e-4,
        }
    }
}

impl PhaseCongruencyConfig {
    fn key(&self) -> [u64; 8] {
        [
            self.scales as u64,
            self.orientations as u64,
            self.min_wavelength.to_bits(),
            self.mult.to_bits(),
            self.sigma_on_f.to_bits(),
            self.d_theta_on_sigma.to_bits(),
            self.noise_k.to_bits(),
            self.epsilon.to_bits(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCongruencyMap {
    pub values: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub scales: usize,
    pub orientations: usize,
}

struct Orientation {
    /// Frequency-domain filters, one per scale, in unshifted FFT layout.
    filters: Vec<Vec<f64>>,
    /// Squared-norm of the finest-scale filter.
    em_n: f64,
    sum_an2: f64,
    sum_aiaj: f64,
}

/// Filter bank for one image size; shared read-only between workers.
pub struct LogGaborBank {
    orientations: Vec<Orientation>,
    fft: Fft2d,
}

struct Fft2d {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    /// Unnormalized 2-D transform in place.
    fn process(&self, buf: &mut Vec<Complex64>, inverse: bool) {
        let (r, c) = (self.rows, self.cols);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(buf);
        let mut t = vec![Complex64::new(0.0, 0.0); r * c];
        for y in 0..r {
            for x in 0..c {
                t[x * r + y] = buf[y * c + x];
            }
        }
        col.process(&mut t);
        for x in 0..c {
            for y in 0..r {
                buf[y * c + x] = t[x * r + y];
            }
        }
    }
}

/// MATLAB-style normalized frequency coordinate for index `i` of an `n`-point axis,
/// already in unshifted (ifftshift-ed) order.
fn freq_axis(n: usize) -> Vec<f64> {
    let centered: Vec<f64> = if n % 2 == 1 {
        let half = (n - 1) as f64 / 2.0;
        (0..n).map(|i| (i as f64 - half) / (n - 1) as f64).collect()
    } else {
        (0..n).map(|i| (i as f64 - (n / 2) as f64) / n as f64).collect()
    };
    // ifftshift
    let shift = n / 2;
    (0..n).map(|i| centered[(i + shift) % n]).collect()
}

impl LogGaborBank {
    pub fn new(rows: usize, cols: usize, cfg: &PhaseCongruencyConfig) -> Self {
        let fx = freq_axis(cols);
        let fy = freq_axis(rows);
        let n = rows * cols;
        let mut radius = vec![0.0; n];
        let mut sin_t = vec![0.0; n];
        let mut cos_t = vec![0.0; n];
        for y in 0..rows {
            for x in 0..cols {
                let i = y * cols + x;
                radius[i] = (fx[x] * fx[x] + fy[y] * fy[y]).sqrt();
                let theta = (-fy[y]).atan2(fx[x]);
                sin_t[i] = theta.sin();
                cos_t[i] = theta.cos();
            }
        }
        radius[0] = 1.0;
        // Butterworth low-pass, cutoff 0.45, order 15.
        let lowpass: Vec<f64> = radius
            .iter()
            .map(|r| 1.0 / (1.0 + (r / 0.45).powi(30)))
            .collect();
        let log_sigma2 = 2.0 * cfg.sigma_on_f.ln().powi(2);
        let radial: Vec<Vec<f64>> = (0..cfg.scales)
            .map(|s| {
                let fo = 1.0 / (cfg.min_wavelength * cfg.mult.powi(s as i32));
                let mut g: Vec<f64> = radius
                    .iter()
                    .zip(&lowpass)
                    .map(|(r, lp)| (-(r / fo).ln().powi(2) / log_sigma2).exp() * lp)
                    .collect();
                g[0] = 0.0;
                g
            })
            .collect();
        let theta_sigma = PI / cfg.orientations as f64 / cfg.d_theta_on_sigma;
        let fft = Fft2d::new(rows, cols);
        let norm = 1.0 / (n as f64).sqrt();
        let orientations = (0..cfg.orientations)
            .map(|o| {
                let angle = o as f64 * PI / cfg.orientations as f64;
                let (sa, ca) = angle.sin_cos();
                let spread: Vec<f64> = sin_t
                    .iter()
                    .zip(&cos_t)
                    .map(|(st, ct)| {
                        let ds = st * ca - ct * sa;
                        let dc = ct * ca + st * sa;
                        let dtheta = ds.atan2(dc).abs();
                        (-dtheta * dtheta / (2.0 * theta_sigma * theta_sigma)).exp()
                    })
                    .collect();
                let filters: Vec<Vec<f64>> = radial
                    .iter()
                    .map(|g| g.iter().zip(&spread).map(|(a, b)| a * b).collect())
                    .collect();
                let em_n = filters[0].iter().map(|v| v * v).sum();
                // Spatial-domain filters for the noise energy estimate.
                let spatial: Vec<Vec<f64>> = filters
                    .iter()
                    .map(|f| {
                        let mut buf: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
                        fft.process(&mut buf, true);
                        buf.iter().map(|c| c.re * norm).collect()
                    })
                    .collect();
                let sum_an2 = spatial.iter().flatten().map(|v| v * v).sum();
                let mut sum_aiaj = 0.0;
                for i in 0..spatial.len() {
                    for j in i + 1..spatial.len() {
                        sum_aiaj += spatial[i].iter().zip(&spatial[j]).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                Orientation {
                    filters,
                    em_n,
                    sum_an2,
                    sum_aiaj,
                }
            })
            .collect();
        Self {
            orientations,
            fft,
        }
    }

    /// Returns the cached bank for `(rows, cols, cfg)`, building it on first use.
    pub fn shared(rows: usize, cols: usize, cfg: &PhaseCongruencyConfig) -> Arc<LogGaborBank> {
        type Cache = Mutex<HashMap<(usize, usize, [u64; 8]), Arc<LogGaborBank>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let key = (rows, cols, cfg.key());
        if let Some(bank) = cache.lock().expect("filter bank cache poisoned").get(&key) {
            return Arc::clone(bank);
        }
        let bank = Arc::new(LogGaborBank::new(rows, cols, cfg));
        cache
            .lock()
            .expect("filter bank cache poisoned")
            .entry(key)
            .or_insert(bank)
            .clone()
    }
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, &mut hi, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

/// Phase congruency of a luminance plane given on a 0..255 amplitude scale.
pub(crate) fn phase_congruency_plane(
    plane: &[f64],
    rows: usize,
    cols: usize,
    cfg: &PhaseCongruencyConfig,
) -> Vec<f64> {
    let bank = LogGaborBank::shared(rows, cols, cfg);
    let n = rows * cols;
    let mut spectrum: Vec<Complex64> = plane.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    bank.fft.process(&mut spectrum, false);
    let inv_n = 1.0 / n as f64;

    let mut energy_all = vec![0.0; n];
    let mut an_all = vec![0.0; n];
    let mut responses: Vec<Vec<Complex64>> = Vec::with_capacity(cfg.scales);
    for orient in &bank.orientations {
        responses.clear();
        let mut sum_e = vec![0.0; n];
        let mut sum_o = vec![0.0; n];
        for f in &orient.filters {
            let mut eo: Vec<Complex64> = spectrum.iter().zip(f).map(|(s, g)| s * *g).collect();
            bank.fft.process(&mut eo, true);
            for (i, v) in eo.iter_mut().enumerate() {
                *v *= inv_n;
                sum_e[i] += v.re;
                sum_o[i] += v.im;
                an_all[i] += v.norm();
            }
            responses.push(eo);
        }
        let mut energy = vec![0.0; n];
        for i in 0..n {
            let x_energy = (sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]).sqrt() + cfg.epsilon;
            let (mean_e, mean_o) = (sum_e[i] / x_energy, sum_o[i] / x_energy);
            for eo in &responses {
                let (e, o) = (eo[i].re, eo[i].im);
                energy[i] += e * mean_e + o * mean_o - (e * mean_o - o * mean_e).abs();
            }
        }
        let mut e2n: Vec<f64> = responses[0].iter().map(|v| v.norm_sqr()).collect();
        let median_e2n = median(&mut e2n);
        let mean_e2n = -median_e2n / 0.5f64.ln();
        let noise_power = if orient.em_n > 0.0 { mean_e2n / orient.em_n } else { 0.0 };
        let est_noise_energy2 = 2.0 * noise_power * orient.sum_an2 + 4.0 * noise_power * orient.sum_aiaj;
        let tau = (est_noise_energy2 / 2.0).max(0.0).sqrt();
        let est_noise_energy = tau * (PI / 2.0).sqrt();
        let est_noise_sigma = ((2.0 - PI / 2.0) * tau * tau).sqrt();
        let threshold = (est_noise_energy + cfg.noise_k * est_noise_sigma) / 1.7;
        for (acc, e) in energy_all.iter_mut().zip(&energy) {
            *acc += (e - threshold).max(0.0);
        }
    }
    energy_all
        .iter()
        .zip(&an_all)
        .map(|(e, a)| e / (a + cfg.epsilon))
        .collect()
}

/// Phase-congruency map of an image's luminance.
pub fn phase_congruency(img: &Image) -> Result<PhaseCongruencyMap> {
    phase_congruency_with(img, &PhaseCongruencyConfig::default())
}

pub fn phase_congruency_with(img: &Image, cfg: &PhaseCongruencyConfig) -> Result<PhaseCongruencyMap> {
    check_size(img.height(), img.width())?;
    let luma = to_luma(img)?;
    let plane: Vec<f64> = luma.data().iter().map(|v| v * 255.0).collect();
    let values = phase_congruency_plane(&plane, img.height(), img.width(), cfg);
    Ok(PhaseCongruencyMap {
        values,
        height: img.height(),
        width: img.width(),
        scales: cfg.scales,
        orientations: cfg.orientations,
    })
}

pub(crate) fn check_size(h: usize, w: usize) -> Result<()> {
    if h < MIN_SIDE || w < MIN_SIDE {
        return Err(Error::TooSmall(format!(
            "{h}x{w} image is below the {MIN_SIDE}-pixel minimum of the log-Gabor bank"
        )));
    }
    Ok(())
}
