//! Procedural RGB scenes (gradients, gratings, value noise and flat shapes)
//! used as a self-contained image corpus.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::imaging::Image;
use crate::rng;

fn random_color(r: &mut ChaCha8Rng) -> [f64; 3] {
    [r.random(), r.random(), r.random()]
}

/// Bilinearly interpolated lattice noise with `cells` lattice cells across the short side.
fn value_noise(h: usize, w: usize, cells: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let gh = cells + 2;
    let gw = cells * w / h.min(w) + 2;
    let lattice: Vec<f64> = (0..gh * gw).map(|_| r.random::<f64>() - 0.5).collect();
    let step = h.min(w) as f64 / cells as f64;
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        let fy = y as f64 / step;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        let ty = ty * ty * (3.0 - 2.0 * ty);
        for x in 0..w {
            let fx = x as f64 / step;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let tx = tx * tx * (3.0 - 2.0 * tx);
            let v = |yy: usize, xx: usize| lattice[yy.min(gh - 1) * gw + xx.min(gw - 1)];
            let top = v(y0, x0) * (1.0 - tx) + v(y0, x0 + 1) * tx;
            let bot = v(y0 + 1, x0) * (1.0 - tx) + v(y0 + 1, x0 + 1) * tx;
            out.push(top * (1.0 - ty) + bot * ty);
        }
    }
    out
}

/// A colorful procedural scene, deterministic in `seed`.
pub fn scene(h: usize, w: usize, seed: u64) -> Image {
    let mut r = rng::stream(seed, 0, "synth-scene");
    let (c0, c1) = (random_color(&mut r), random_color(&mut r));
    let angle = r.random::<f64>() * PI;
    let (sa, ca) = angle.sin_cos();
    let diag = (h * h + w * w) as f64;
    let diag = diag.sqrt();

    let gratings: Vec<(f64, f64, f64, f64, [f64; 3])> = (0..2)
        .map(|_| {
            let theta = r.random::<f64>() * PI;
            let period = 6.0 + r.random::<f64>() * 26.0;
            let phase = r.random::<f64>() * 2.0 * PI;
            let amp = 0.05 + 0.1 * r.random::<f64>();
            (theta, period, phase, amp, random_color(&mut r))
        })
        .collect();
    let octaves: Vec<(Vec<f64>, f64)> = [3usize, 8, 24]
        .iter()
        .map(|&cells| (value_noise(h, w, cells, &mut r), 0.15 + 0.2 * r.random::<f64>()))
        .collect();
    let tint = random_color(&mut r);
    let shapes: Vec<(f64, f64, f64, [f64; 3], bool)> = (0..4)
        .map(|_| {
            let cy = r.random::<f64>() * h as f64;
            let cx = r.random::<f64>() * w as f64;
            let rad = (0.08 + 0.2 * r.random::<f64>()) * h.min(w) as f64;
            (cy, cx, rad, random_color(&mut r), r.random::<bool>())
        })
        .collect();

    let mut data = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let t = ((x as f64 * ca + y as f64 * sa) / diag).clamp(-1.0, 1.0) * 0.5 + 0.5;
            let mut px = [0.0; 3];
            for (c, v) in px.iter_mut().enumerate() {
                *v = c0[c] * (1.0 - t) + c1[c] * t;
            }
            for (theta, period, phase, amp, col) in &gratings {
                let u = x as f64 * theta.cos() + y as f64 * theta.sin();
                let s = (2.0 * PI * u / period + phase).sin() * amp;
                for (c, v) in px.iter_mut().enumerate() {
                    *v += s * (0.5 + col[c]);
                }
            }
            for (noise, amp) in &octaves {
                let n = noise[y * w + x] * amp;
                for (c, v) in px.iter_mut().enumerate() {
                    *v += n * (0.6 + 0.8 * tint[c]);
                }
            }
            for (cy, cx, rad, col, square) in &shapes {
                let (dy, dx) = (y as f64 - cy, x as f64 - cx);
                let inside = if *square {
                    dy.abs() < *rad && dx.abs() < *rad
                } else {
                    dy * dy + dx * dx < rad * rad
                };
                if inside {
                    for (c, v) in px.iter_mut().enumerate() {
                        *v = 0.35 * *v + 0.65 * col[c];
                    }
                }
            }
            data.extend(px.iter().map(|v| v.clamp(0.0, 1.0)));
        }
    }
    Image::new(h, w, 3, data).expect("procedural scene is well-formed")
}

/// `n` scenes with seeds derived from `seed`.
pub fn corpus(n: usize, h: usize, w: usize, seed: u64) -> Vec<Image> {
    (0..n)
        .map(|i| scene(h, w, rng::derive_seed(seed, i as u64, "synth-corpus")))
        .collect()
}

/// The fixed 10-image 256x256 test corpus.
pub fn test_corpus() -> Vec<Image> {
    corpus(10, 256, 256, 0x7E57)
}
