//! Helpers and independent reference implementations shared by the
//! integration tests.

#![allow(dead_code)]

use nriqa::imaging::Image;
use nriqa::nnet::{EncoderParams, ParamGrads};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn unit_vec(r: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(r)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

pub fn unit_vecs(r: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| unit_vec(r, dim)).collect()
}

pub fn random_image(r: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Image {
    Image::new(h, w, c, (0..h * w * c).map(|_| r.random::<f64>()).collect()).unwrap()
}

/// Symmetric weight matrix with unit diagonal.
pub fn random_weights(r: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut w = vec![vec![1.0; d]; d];
    for j in 0..d {
        for k in j + 1..d {
            let s = r.random::<f64>();
            w[j][k] = s;
            w[k][j] = s;
        }
    }
    w
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-anchor weighted contrastive terms written straight from the formula.
pub fn qacl_reference(anchors: &[Vec<f64>], positives: &[Vec<f64>], s: &[Vec<f64>], tau: f64) -> Vec<f64> {
    let p = |a: &[f64], b: &[f64]| (dot(a, b) / tau).exp();
    (0..anchors.len())
        .map(|j| {
            let mut num = p(&anchors[j], &positives[j]);
            let mut den = num;
            for k in 0..anchors.len() {
                if k != j {
                    num += s[j][k] * p(&anchors[j], &anchors[k]);
                    den += p(&anchors[j], &anchors[k]);
                }
            }
            -(num / den).ln()
        })
        .collect()
}

/// Classic InfoNCE: the augmentation is the positive, the other versions are negatives.
pub fn info_nce(anchors: &[Vec<f64>], positives: &[Vec<f64>], tau: f64) -> Vec<f64> {
    (0..anchors.len())
        .map(|j| {
            let logits: Vec<f64> = std::iter::once(dot(&anchors[j], &positives[j]) / tau)
                .chain((0..anchors.len()).filter(|&k| k != j).map(|k| dot(&anchors[j], &anchors[k]) / tau))
                .collect();
            let lse = logits.iter().map(|l| l.exp()).sum::<f64>().ln();
            lse - logits[0]
        })
        .collect()
}

/// Group-contrastive loss written straight from the formula.
pub fn gcl_reference(good: &[usize], bad: &[usize], z: &[Vec<f64>], tau: f64) -> f64 {
    let p = |a: usize, b: usize| (dot(&z[a], &z[b]) / tau).exp();
    let side = |own: &[usize], other: &[usize]| -> f64 {
        own.iter()
            .map(|&i| {
                let num: f64 = own.iter().filter(|&&j| j != i).map(|&j| p(i, j)).sum();
                let den = num + other.iter().map(|&j| p(i, j)).sum::<f64>();
                -(num / den).ln()
            })
            .sum()
    };
    side(good, bad) + side(bad, good)
}

/// Ranks by counting, averaging over ties.
pub fn brute_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&u| u < v).count() as f64;
            let equal = x.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn brute_pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    let sab = dot(a, b);
    let saa = dot(a, a);
    let sbb = dot(b, b);
    (n * sab - sa * sb) / ((n * saa - sa * sa).sqrt() * (n * sbb - sb * sb).sqrt())
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// A random direction shaped like the parameters.
pub fn random_direction(params: &EncoderParams, r: &mut ChaCha8Rng) -> ParamGrads {
    let mut d = params.zero_grads();
    for s in d.slices_mut() {
        s.iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
    }
    d
}

pub fn perturbed(params: &EncoderParams, dir: &ParamGrads, t: f64) -> EncoderParams {
    let mut q = params.clone();
    for (a, d) in q.slices_mut().into_iter().zip(dir.slices()) {
        a.iter_mut().zip(d).for_each(|(x, y)| *x += t * y);
    }
    q
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Central difference of `f` at zero along a scalar parameter.
pub fn central_diff(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(h) - f(-h)) / (2.0 * h)
}

pub fn tiny_encoder(seed: u64) -> nriqa::nnet::EncoderConfig {
    use nriqa::nnet::{ConvSpec, EncoderConfig, Pooling};
    EncoderConfig {
        in_channels: 3,
        conv_blocks: vec![
            ConvSpec {
                out_channels: 4,
                kernel: 3,
                stride: 2,
            },
            ConvSpec {
                out_channels: 6,
                kernel: 3,
                stride: 1,
            },
        ],
        pooling: Pooling::Mean,
        projection_dim: 8,
        seed,
    }
}
