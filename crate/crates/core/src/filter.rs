//! Small dense filtering kernels shared by the distortion bank and the
//! full-reference metrics. Planes are row-major `h * w` slices.

/// Normalized 1-D Gaussian taps over `[-radius, radius]`.
pub fn gaussian_taps(sigma: f64, radius: usize) -> Vec<f64> {
    let r = radius as isize;
    let mut taps: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable filtering with replicated borders; output has the input size.
pub fn separable_same_replicate(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[clamp(x as isize + k as isize - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for (k, t) in taps.iter().enumerate() {
            let src = clamp(y as isize + k as isize - r, h);
            let src_row = &tmp[src * w..(src + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += t * s;
            }
        }
    }
    out
}

/// Separable filtering keeping only fully-supported positions
/// (`(h - n + 1) x (w - n + 1)` output for an `n`-tap kernel).
pub fn separable_valid(plane: &[f64], h: usize, w: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = taps.len();
    let (oh, ow) = (h + 1 - n, w + 1 - n);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..ow {
            tmp[y * ow + x] = taps.iter().zip(&row[x..x + n]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        let dst = &mut out[y * ow..(y + 1) * ow];
        for (k, t) in taps.iter().enumerate() {
            let src = &tmp[(y + k) * ow..(y + k + 1) * ow];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
    (out, oh, ow)
}

/// 2-D correlation with a 3x3 kernel, zero padding, same-size output.
pub fn correlate3_same_zero(plane: &[f64], h: usize, w: usize, k: &[[f64; 3]; 3]) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (dy, krow) in k.iter().enumerate() {
                let yy = y as isize + dy as isize - 1;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for (dx, kv) in krow.iter().enumerate() {
                    let xx = x as isize + dx as isize - 1;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    acc += kv * plane[yy as usize * w + xx as usize];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// 2x2 box average followed by decimation by two (odd trailing row/column dropped).
pub fn downsample2(plane: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            let a = plane[2 * y * w + 2 * x];
            let b = plane[2 * y * w + 2 * x + 1];
            let c = plane[(2 * y + 1) * w + 2 * x];
            let d = plane[(2 * y + 1) * w + 2 * x + 1];
            out.push(0.25 * (a + b + c + d));
        }
    }
    (out, oh, ow)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_taps_normalized_and_symmetric() {
        let t = gaussian_taps(1.5, 5);
        assert_eq!(t.len(), 11);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for i in 0..5 {
            assert_eq!(t[i], t[10 - i]);
        }
    }

    #[test]
    fn filters_preserve_constants() {
        let p = vec![0.3; 20 * 15];
        let taps = gaussian_taps(2.0, 4);
        assert!(separable_same_replicate(&p, 20, 15, &taps).iter().all(|v| (v - 0.3).abs() < 1e-12));
        let (v, oh, ow) = separable_valid(&p, 20, 15, &taps);
        assert_eq!((oh, ow), (12, 7));
        assert!(v.iter().all(|v| (v - 0.3).abs() < 1e-12));
        let (d, dh, dw) = downsample2(&p, 20, 15);
        assert_eq!((dh, dw), (10, 7));
        assert!(d.iter().all(|v| (v - 0.3).abs() < 1e-12));
    }
}
