//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use nriqa::experiment::{run_desk_experiment, DeskConfig};
use nriqa::frmetrics::{fsim, gmsd, ms_ssim, ssim, MeasureKind, SimilarityMeasure, SsimConfig};
use nriqa::harness::{fit_regressor, plcc, srcc, RegressorConfig};
use nriqa::highlevel::{anchor_margin, form_groups, gcl_loss, q_high, AnchorPair, GroupSplit};
use nriqa::imaging::{distort, DistortionKind, DistortionSpec, Image};
use nriqa::lowlevel::{
    mahalanobis, q_low, qacl_loss, train_lowlevel, train_lowlevel_with, QaclConfig, QaclScene, SceneGrads,
    SceneObjective,
};
use nriqa::nnet::{backward, forward, init_encoder, OptimizerConfig, Pooling};
use nriqa::{rng as seeds, synth};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed <= limit
}

// 1. ------------------------------------------------------------------------

fn random_batch(r: &mut rand_chacha::ChaCha8Rng) -> Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let scenes = r.random_range(1..=4);
    let d = r.random_range(2..=8);
    let dim = r.random_range(4..=32);
    (0..scenes)
        .map(|_| (unit_vecs(r, d, dim), unit_vecs(r, d, dim)))
        .collect()
}

struct InfoNce;

impl SceneObjective for InfoNce {
    fn evaluate(&self, scene: &QaclScene<'_>, tau: f64) -> nriqa::Result<(Vec<f64>, SceneGrads)> {
        let z = scene.anchors;
        let pos = scene.positives;
        let d = z.len();
        let dim = z[0].len();
        let mut g = SceneGrads {
            anchors: vec![vec![0.0; dim]; d],
            positives: vec![vec![0.0; dim]; d],
        };
        let mut losses = Vec::with_capacity(d);
        for j in 0..d {
            // Candidate 0 is the positive, the rest are the other versions.
            let cands: Vec<(bool, usize)> = std::iter::once((true, j))
                .chain((0..d).filter(|&k| k != j).map(|k| (false, k)))
                .collect();
            let vec_of = |c: &(bool, usize)| if c.0 { &pos[c.1] } else { &z[c.1] };
            let logits: Vec<f64> = cands.iter().map(|c| dot(&z[j], vec_of(c)) / tau).collect();
            let mx = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - mx).exp()).collect();
            let sum: f64 = e.iter().sum();
            losses.push(sum.ln() + mx - logits[0]);
            for (ci, c) in cands.iter().enumerate() {
                let coef = (e[ci] / sum - if ci == 0 { 1.0 } else { 0.0 }) / tau;
                let y = vec_of(c).clone();
                for t in 0..dim {
                    g.anchors[j][t] += coef * y[t];
                }
                let target = if c.0 { &mut g.positives[c.1] } else { &mut g.anchors[c.1] };
                for t in 0..dim {
                    target[t] += coef * z[j][t];
                }
            }
        }
        Ok((losses, g))
    }
}

type Scene = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>);

fn view(s: &[Scene]) -> Vec<QaclScene<'_>> {
    s.iter()
        .map(|(a, p, w)| QaclScene {
            anchors: a,
            positives: p,
            weights: w,
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut r = rng(101);
    let mut worst_one = 0.0f64;
    let mut worst_zero = 0.0f64;
    for _ in 0..100 {
        let batch = random_batch(&mut r);
        let d = batch[0].0.len();
        let ones = vec![vec![1.0; d]; d];
        let zeros: Vec<Vec<f64>> = (0..d)
            .map(|j| (0..d).map(|k| if j == k { 1.0 } else { 0.0 }).collect())
            .collect();
        let scenes = |w: &Vec<Vec<f64>>| -> Vec<Scene> {
            batch.iter().map(|(a, p)| (a.clone(), p.clone(), w.clone())).collect()
        };
        let s1 = scenes(&ones);
        worst_one = worst_one.max(qacl_loss(&view(&s1), 0.5).unwrap().loss.abs());
        let s0 = scenes(&zeros);
        let ours = qacl_loss(&view(&s0), 0.5).unwrap().loss;
        let oracle: f64 = batch.iter().map(|(a, p)| info_nce(a, p, 0.5).iter().sum::<f64>()).sum();
        worst_zero = worst_zero.max((ours - oracle).abs());
    }

    // Step-for-step training against the independent objective.
    let corpus = synth::corpus(4, 48, 48, 17);
    let mut cfg = QaclConfig {
        epochs: 2,
        batch_scenes: 2,
        grid_n: 4,
        minipatch: 8,
        encoder: tiny_encoder(3),
        optimizer: OptimizerConfig {
            lr: 1e-2,
            ..OptimizerConfig::default()
        },
        seed: 5,
        ..QaclConfig::default()
    };
    cfg.measure = SimilarityMeasure::new(MeasureKind::None);
    let a = train_lowlevel(&corpus, &cfg).unwrap();
    let b = train_lowlevel_with(&corpus, &cfg, &InfoNce).unwrap();
    let step_gap = a
        .step_losses
        .iter()
        .zip(&b.step_losses)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let param_gap = a
        .params
        .slices()
        .iter()
        .zip(b.params.slices())
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    let same_len = a.step_losses.len() == b.step_losses.len() && !a.step_losses.is_empty();
    let pass = worst_one <= 1e-9 && worst_zero <= 1e-9 && step_gap <= 1e-9 && param_gap <= 1e-9 && same_len;
    Outcome::new(
        pass,
        format!(
            "s=1 max |L| {worst_one:.2e}; s=0 max InfoNCE gap {worst_zero:.2e}; \
             {} training steps, max loss gap {step_gap:.2e}, max param gap {param_gap:.2e}",
            a.step_losses.len()
        ),
    )
}

// 2. ------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    // Two identical points per group, opposite groups antipodal, tau = 1:
    // every term is ln(1 + 2 e^-2).
    let z = vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0], vec![-1.0, 0.0]];
    let split = GroupSplit {
        bad: vec![2, 3],
        good: vec![0, 1],
        order: vec![2, 3, 0, 1],
    };
    let hand = 4.0 * (1.0 + 2.0 * (-2.0f64).exp()).ln();
    let hand_gap = (gcl_loss(&split, &z, 1.0).unwrap().loss - hand).abs();

    let mut r = rng(202);
    let (mut swap_gap, mut perm_gap, mut ref_gap) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = r.random_range(4..=24);
        let m = r.random_range(2..=n / 2);
        let dim = r.random_range(2..=12);
        let z = unit_vecs(&mut r, n, dim);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            idx.swap(i, r.random_range(0..=i));
        }
        let good = idx[..m].to_vec();
        let bad = idx[m..2 * m].to_vec();
        let mk = |g: &[usize], b: &[usize]| GroupSplit {
            bad: b.to_vec(),
            good: g.to_vec(),
            order: idx.clone(),
        };
        let base = gcl_loss(&mk(&good, &bad), &z, 0.1).unwrap().loss;
        swap_gap = swap_gap.max((gcl_loss(&mk(&bad, &good), &z, 0.1).unwrap().loss - base).abs());
        let mut g2 = good.clone();
        let mut b2 = bad.clone();
        g2.rotate_left(1);
        b2.reverse();
        perm_gap = perm_gap.max((gcl_loss(&mk(&g2, &b2), &z, 0.1).unwrap().loss - base).abs());
        ref_gap = ref_gap.max(rel_err(base, gcl_reference(&good, &bad, &z, 0.1), 1.0));
    }
    let pass = hand_gap <= 1e-9 && swap_gap <= 1e-9 && perm_gap <= 1e-9 && ref_gap <= 1e-9;
    Outcome::new(
        pass,
        format!(
            "hand gap {hand_gap:.2e}; over 1000 splits: swap {swap_gap:.2e}, permutation {perm_gap:.2e}, \
             reference {ref_gap:.2e}"
        ),
    )
}

// 3. ------------------------------------------------------------------------

const FD_H: f64 = 1e-5;
const FD_FLOOR: f64 = 1e-6;

fn qacl_fd_worst(r: &mut rand_chacha::ChaCha8Rng, dirs: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..dirs {
        let d = r.random_range(2..=6);
        let dim = r.random_range(3..=10);
        let a = unit_vecs(r, d, dim);
        let p = unit_vecs(r, d, dim);
        let w = random_weights(r, d);
        let da = unit_vecs(r, d, dim);
        let dp = unit_vecs(r, d, dim);
        let eval = |t: f64| {
            let shift = |v: &[Vec<f64>], dv: &[Vec<f64>]| -> Vec<Vec<f64>> {
                v.iter().zip(dv).map(|(x, y)| x.iter().zip(y).map(|(u, e)| u + t * e).collect()).collect()
            };
            let (aa, pp) = (shift(&a, &da), shift(&p, &dp));
            let scene = QaclScene {
                anchors: &aa,
                positives: &pp,
                weights: &w,
            };
            qacl_loss(&[scene], 0.5).unwrap()
        };
        let g = &eval(0.0).grads[0];
        let an: f64 = g.anchors.iter().zip(&da).map(|(x, y)| dot(x, y)).sum::<f64>()
            + g.positives.iter().zip(&dp).map(|(x, y)| dot(x, y)).sum::<f64>();
        let fd = central_diff(|t| eval(t).loss, FD_H);
        worst = worst.max(rel_err(an, fd, FD_FLOOR));
    }
    worst
}

fn gcl_fd_worst(r: &mut rand_chacha::ChaCha8Rng, dirs: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..dirs {
        let n = r.random_range(6..=16);
        let dim = r.random_range(3..=10);
        let z = unit_vecs(r, n, dim);
        let anchors = AnchorPair::new(unit_vec(r, dim), unit_vec(r, dim), "test").unwrap();
        let split = form_groups(&z, &anchors, r.random_range(3..=4)).unwrap();
        let dz = unit_vecs(r, n, dim);
        let eval = |t: f64| {
            let zz: Vec<Vec<f64>> = z
                .iter()
                .zip(&dz)
                .map(|(x, y)| x.iter().zip(y).map(|(u, e)| u + t * e).collect())
                .collect();
            gcl_loss(&split, &zz, 0.1).unwrap()
        };
        let an: f64 = eval(0.0).grads.iter().zip(&dz).map(|(x, y)| dot(x, y)).sum();
        let fd = central_diff(|t| eval(t).loss, FD_H);
        worst = worst.max(rel_err(an, fd, FD_FLOOR));
    }
    worst
}

fn encoder_fd_worst(r: &mut rand_chacha::ChaCha8Rng, dirs: usize, pooling: Pooling) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..dirs {
        let mut cfg = tiny_encoder(i as u64);
        cfg.pooling = pooling;
        let params = init_encoder(&cfg).unwrap();
        let (h, w) = (r.random_range(9..=20), r.random_range(9..=20));
        let img = random_image(r, h, w, 3);
        let up: Vec<f64> = (0..cfg.projection_dim).map(|_| r.random_range(-1.0..1.0)).collect();
        let d = random_direction(&params, r);
        let an = backward(&params, &img, &up).unwrap().dot(&d);
        let fd = central_diff(
            |t| dot(&forward(&perturbed(&params, &d, t), &img).unwrap().projected, &up),
            FD_H,
        );
        worst = worst.max(rel_err(an, fd, FD_FLOOR));
    }
    worst
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut r = rng(303);
    let q = qacl_fd_worst(&mut r, 32);
    let g = gcl_fd_worst(&mut r, 32);
    let em = encoder_fd_worst(&mut r, 24, Pooling::Mean);
    let es = encoder_fd_worst(&mut r, 24, Pooling::MeanStd);
    let t = start.elapsed();
    let pass = q <= 1e-4 && g <= 1e-4 && em <= 1e-4 && es <= 1e-4 && within(Duration::from_secs(120), t);
    Outcome::new(
        pass,
        format!(
            "max rel err: qacl {q:.2e} (32 dirs), gcl {g:.2e} (32 dirs), encoder mean-pool {em:.2e} (24 dirs), \
             encoder mean+std-pool {es:.2e} (24 dirs); {:.1}s",
            t.as_secs_f64()
        ),
    )
}

// 4. ------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut r = rng(404);
    let specs = DistortionSpec::all();
    let (mut id_err, mut sym_err, mut gmsd_id) = (0.0f64, 0.0f64, 0.0f64);
    let mut out_of_range = 0usize;
    let measures: Vec<SimilarityMeasure> = [MeasureKind::Ssim, MeasureKind::MsSsim, MeasureKind::Fsim, MeasureKind::Gmsd]
        .into_iter()
        .map(SimilarityMeasure::new)
        .collect();
    for i in 0..200 {
        let side = 176;
        let a = if i % 2 == 0 {
            synth::scene(side, side, 1000 + i)
        } else {
            random_image(&mut r, side, side, 3)
        };
        let b = match i % 4 {
            0 | 1 => distort(&a, specs[(i as usize / 4) % specs.len()], i).unwrap(),
            2 => synth::scene(side, side, 5000 + i),
            _ => random_image(&mut r, side, side, 3),
        };
        id_err = id_err.max((ssim(&a, &a).unwrap() - 1.0).abs());
        id_err = id_err.max((ms_ssim(&a, &a).unwrap() - 1.0).abs());
        id_err = id_err.max((fsim(&a, &a).unwrap() - 1.0).abs());
        gmsd_id = gmsd_id.max(gmsd(&a, &a).unwrap().abs());
        for m in &measures {
            let ab = m.score(&a, &b).unwrap();
            let ba = m.score(&b, &a).unwrap();
            sym_err = sym_err.max((ab - ba).abs());
            let w = m.to_weight(ab);
            if !(0.0..=1.0).contains(&w) {
                out_of_range += 1;
            }
        }
    }
    // Constant images: SSIM reduces to the luminance term.
    let cfg = SsimConfig::default();
    let mut const_err = 0.0f64;
    for (u, v) in [(0.2, 0.7), (0.5, 0.5), (0.0, 1.0), (0.9, 0.85)] {
        let a = Image::filled(32, 32, 1, u).unwrap();
        let b = Image::filled(32, 32, 1, v).unwrap();
        let expect = (2.0 * u * v + cfg.c1()) / (u * u + v * v + cfg.c1());
        const_err = const_err.max((ssim(&a, &b).unwrap() - expect).abs());
    }
    let t = start.elapsed();
    let pass = id_err <= 1e-6
        && sym_err <= 1e-6
        && gmsd_id <= 1e-9
        && out_of_range == 0
        && const_err <= 1e-9
        && within(Duration::from_secs(120), t);
    Outcome::new(
        pass,
        format!(
            "200 pairs: identity err {id_err:.2e}, symmetry err {sym_err:.2e}, gmsd(x,x) {gmsd_id:.2e}, \
             {out_of_range} weights out of [0,1]; constant-image SSIM err {const_err:.2e}; {:.1}s",
            t.as_secs_f64()
        ),
    )
}

// 5. ------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let corpus = synth::test_corpus();
    let mut detail = Vec::new();
    let mut pass = true;
    for kind in DistortionKind::ALL {
        let ok = corpus
            .iter()
            .enumerate()
            .filter(|(i, img)| {
                let s = |level| {
                    let d = distort(img, DistortionSpec::new(kind, level).unwrap(), seeds::derive_seed(0, *i as u64, "ordering"))
                        .unwrap();
                    fsim(img, &d).unwrap()
                };
                s(1) > s(2)
            })
            .count();
        pass &= ok >= 9;
        detail.push(format!("{kind} {ok}/10"));
    }
    let t = start.elapsed();
    pass &= within(Duration::from_secs(60), t);
    Outcome::new(pass, format!("{}; {:.1}s", detail.join(", "), t.as_secs_f64()))
}

// 6. ------------------------------------------------------------------------

fn round_half_even(n: usize, k: usize) -> usize {
    let (q, rem) = (n / k, n % k);
    match (2 * rem).cmp(&k) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Equal => q + q % 2,
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut r = rng(606);
    let mut failures = Vec::new();
    let mut cases = 0;
    while cases < 1000 {
        let n = r.random_range(2..=160);
        let k = r.random_range(2..=20);
        let m = round_half_even(n, k);
        if m == 0 || n < 2 * m {
            continue;
        }
        cases += 1;
        let dim = r.random_range(2..=16);
        let z = unit_vecs(&mut r, n, dim);
        let anchors = AnchorPair::new(unit_vec(&mut r, dim), unit_vec(&mut r, dim), "test").unwrap();
        let s = form_groups(&z, &anchors, k).unwrap();
        let mut seen = vec![0u8; n];
        s.good.iter().chain(&s.bad).for_each(|&i| seen[i] += 1);
        if s.good.len() != m || s.bad.len() != m || seen.iter().any(|&c| c > 1) {
            failures.push(format!("sizes/disjointness at N={n}, k={k}"));
            continue;
        }
        for k2 in [1.0, 10.0, 100.0] {
            let q: Vec<f64> = z.iter().map(|v| q_high(v, &anchors, k2).unwrap()).collect();
            let max_bad = s.bad.iter().map(|&i| q[i]).fold(f64::NEG_INFINITY, f64::max);
            let min_good = s.good.iter().map(|&i| q[i]).fold(f64::INFINITY, f64::min);
            let rest: Vec<f64> = (0..n).filter(|&i| seen[i] == 0).map(|i| q[i]).collect();
            let dominated = max_bad <= min_good && rest.iter().all(|&v| max_bad <= v && v <= min_good);
            if !dominated {
                failures.push(format!("dominance at N={n}, k={k}, k2={k2}"));
            }
        }
        // Reference split from ascending Q_H at k2 = 1 (no saturation), ties by index.
        let q: Vec<f64> = z.iter().map(|v| q_high(v, &anchors, 1.0).unwrap()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| q[a].total_cmp(&q[b]).then(a.cmp(&b)));
        let mut bad_ref = order[..m].to_vec();
        let mut good_ref = order[n - m..].to_vec();
        let (mut bad, mut good) = (s.bad.clone(), s.good.clone());
        for v in [&mut bad_ref, &mut good_ref, &mut bad, &mut good] {
            v.sort_unstable();
        }
        if bad != bad_ref || good != good_ref {
            failures.push(format!("reference split differs at N={n}, k={k}"));
        }
    }
    let reference_point = nriqa::highlevel::group_size(128, 8);
    let t = start.elapsed();
    let pass = failures.is_empty() && reference_point == 16 && within(Duration::from_secs(10), t);
    Outcome::new(
        pass,
        format!(
            "1000 (N, k) cases, {} failures{}; N=128, k=8 gives M={reference_point}; {:.1}s",
            failures.len(),
            failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default(),
            t.as_secs_f64()
        ),
    )
}

// 7. ------------------------------------------------------------------------

fn random_spd(r: &mut rand_chacha::ChaCha8Rng, dim: usize) -> Vec<f64> {
    let b: Vec<f64> = (0..dim * dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let mut s = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            s[i * dim + j] = (0..dim).map(|t| b[i * dim + t] * b[j * dim + t]).sum::<f64>();
        }
        s[i * dim + i] += 0.5;
    }
    s
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut r = rng(707);
    let (mut ident, mut eucl, mut solve_gap) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let dim = r.random_range(1..=8);
        let mu_p: Vec<f64> = (0..dim).map(|_| r.random_range(-3.0..3.0)).collect();
        let mu_d: Vec<f64> = (0..dim).map(|_| r.random_range(-3.0..3.0)).collect();
        let sp = random_spd(&mut r, dim);
        let sd = random_spd(&mut r, dim);
        ident = ident.max(mahalanobis(&mu_p, &sp, &mu_p, &sd).unwrap());
        let eye: Vec<f64> = (0..dim * dim).map(|i| if i % (dim + 1) == 0 { 1.0 } else { 0.0 }).collect();
        let diff: Vec<f64> = mu_p.iter().zip(&mu_d).map(|(a, b)| a - b).collect();
        let norm = dot(&diff, &diff).sqrt();
        eucl = eucl.max((mahalanobis(&mu_p, &eye, &mu_d, &eye).unwrap() - norm).abs());
        let avg: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| 0.5 * (sp[i * dim + j] + sd[i * dim + j])).collect())
            .collect();
        let x = solve(avg, diff.clone());
        let oracle = dot(&diff, &x).sqrt();
        solve_gap = solve_gap.max((mahalanobis(&mu_p, &sp, &mu_d, &sd).unwrap() - oracle).abs());
    }
    let a = AnchorPair::new(vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], "test").unwrap();
    let boundary = q_low(0.0, 0.01) == 0.5 && q_high(&[0.0, 0.0, 1.0], &a, 10.0).unwrap() == 0.5;

    let mut rank_failures = 0;
    for _ in 0..100 {
        let n = r.random_range(5..=60);
        let d: Vec<f64> = (0..n).map(|_| r.random_range(0.0..200.0)).collect();
        let base = argsort(&d.iter().map(|&v| q_low(v, 0.01)).collect::<Vec<_>>());
        for k1 in [0.001, 0.05, 0.1] {
            if argsort(&d.iter().map(|&v| q_low(v, k1)).collect::<Vec<_>>()) != base {
                rank_failures += 1;
            }
        }
        let dim = r.random_range(2..=16);
        let anchors = AnchorPair::new(unit_vec(&mut r, dim), unit_vec(&mut r, dim), "test").unwrap();
        let z = unit_vecs(&mut r, n, dim);
        let qh = |k2| argsort(&z.iter().map(|v| q_high(v, &anchors, k2).unwrap()).collect::<Vec<_>>());
        let margin_order = argsort(&z.iter().map(|v| -anchor_margin(v, &anchors).unwrap()).collect::<Vec<_>>());
        for k2 in [1.0, 2.0, 10.0] {
            if qh(k2) != margin_order {
                rank_failures += 1;
            }
        }
    }
    let t = start.elapsed();
    let pass = ident == 0.0
        && eucl <= 1e-9
        && solve_gap <= 1e-9
        && boundary
        && rank_failures == 0
        && within(Duration::from_secs(10), t);
    Outcome::new(
        pass,
        format!(
            "identity d {ident:.2e}; Euclidean err {eucl:.2e}; linear-solve err {solve_gap:.2e}; \
             boundaries exact: {boundary}; {rank_failures} ranking failures over 100 sets; {:.1}s",
            t.as_secs_f64()
        ),
    )
}

// 8. ------------------------------------------------------------------------

fn ridge_by_descent(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let n = x.len() as f64;
    let dim = x[0].len();
    let mean: Vec<f64> = (0..dim).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..dim)
        .map(|j| (x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| (v - mean[j]) / sd[j]).collect())
        .collect();
    let (mut w, mut b) = (vec![0.0; dim], 0.0);
    // Standardized columns have unit mean square, so the Hessian norm is at most 2 (dim + 1 + lambda).
    let step = 1.0 / (2.0 * (dim as f64 + 1.0 + lambda));
    for _ in 0..200_000 {
        let mut gw: Vec<f64> = w.iter().map(|v| 2.0 * lambda * v).collect();
        let mut gb = 0.0;
        for (row, t) in z.iter().zip(y) {
            let res = t - b - dot(row, &w);
            for j in 0..dim {
                gw[j] -= 2.0 * res * row[j] / n;
            }
            gb -= 2.0 * res / n;
        }
        if dot(&gw, &gw) + gb * gb < 1e-26 {
            break;
        }
        w.iter_mut().zip(&gw).for_each(|(a, g)| *a -= step * g);
        b -= step * gb;
    }
    z.iter().map(|row| b + dot(row, &w)).collect()
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut r = rng(808);
    let (mut s_err, mut p_err) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let n = r.random_range(3..=80);
        let draw = |r: &mut rand_chacha::ChaCha8Rng| -> f64 {
            if i % 2 == 0 {
                r.random_range(0..4) as f64
            } else {
                r.random_range(-5.0..5.0)
            }
        };
        let a: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let b: Vec<f64> = (0..n).map(|_| draw(&mut r)).collect();
        let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
        if constant(&a) || constant(&b) {
            continue;
        }
        s_err = s_err.max((srcc(&a, &b).unwrap() - brute_pearson(&brute_ranks(&a), &brute_ranks(&b))).abs());
        p_err = p_err.max((plcc(&a, &b).unwrap() - brute_pearson(&a, &b)).abs());
    }
    let mut ridge_err = 0.0f64;
    for _ in 0..5 {
        let n = r.random_range(20..=50);
        let dim = r.random_range(2..=6);
        let scales: Vec<f64> = (0..dim).map(|_| 10f64.powf(r.random_range(-2.0..2.0))).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| scales.iter().map(|s| s * r.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = x.iter().map(|row| row.iter().sum::<f64>() + r.random_range(-0.5..0.5)).collect();
        for lambda in [0.01, 1.0] {
            let model = fit_regressor(
                &x,
                &y,
                &RegressorConfig {
                    lambda,
                    ..RegressorConfig::default()
                },
            )
            .unwrap();
            let gd = ridge_by_descent(&x, &y, lambda);
            for (row, g) in x.iter().zip(&gd) {
                ridge_err = ridge_err.max((model.predict(row).unwrap() - g).abs());
            }
        }
    }
    let t = start.elapsed();
    let pass = s_err <= 1e-12 && p_err <= 1e-12 && ridge_err <= 1e-6 && within(Duration::from_secs(30), t);
    Outcome::new(
        pass,
        format!(
            "SRCC err {s_err:.2e}, PLCC err {p_err:.2e} (100 vectors, half tie-heavy); \
             ridge closed-form vs descent {ridge_err:.2e}; {:.1}s",
            t.as_secs_f64()
        ),
    )
}

// 9. ------------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let out = match run_desk_experiment(&DeskConfig::default()) {
        Ok(o) => o,
        Err(e) => return Outcome::new(false, format!("experiment failed: {e}")),
    };
    let de = out.report.budget(50).map(|b| b.median_srcc).unwrap_or(f64::NAN);
    let pass = out.zero_shot_srcc >= 0.5 && de >= 0.6 && out.seconds < 900.0;
    Outcome::new(
        pass,
        format!(
            "zero-shot SRCC {:.4} (floor 0.5; Q_L alone {:.4}, Q_H alone {:.4}); \
             50-label median SRCC {de:.4} (floor 0.6); {:.1}s",
            out.zero_shot_srcc, out.q_low_srcc, out.q_high_srcc, out.seconds
        ),
    )
}

// 10. -----------------------------------------------------------------------

fn write_manifest(path: &Path, rows: &[(String, Option<f64>)]) {
    let mut text = String::from("path,mos\n");
    for (p, m) in rows {
        text.push_str(&format!("{p},{}\n", m.map(|v| v.to_string()).unwrap_or_default()));
    }
    fs::write(path, text).unwrap();
}

fn cli_workspace(dir: &Path) {
    use nriqa::config::Config;
    fs::create_dir_all(dir.join("img")).unwrap();
    let scenes = synth::corpus(8, 64, 64, 99);
    let mut train = Vec::new();
    let mut bad = Vec::new();
    let mut eval = Vec::new();
    let measure = SimilarityMeasure::default();
    for (i, s) in scenes.iter().enumerate() {
        let name = format!("img/scene{i}.png");
        s.save_png(dir.join(&name)).unwrap();
        train.push((name, None));
        let strong = distort(s, DistortionSpec::new(DistortionKind::Noise, 2).unwrap(), i as u64).unwrap();
        let bname = format!("img/bad{i}.png");
        strong.save_png(dir.join(&bname)).unwrap();
        bad.push((bname, None));
        for (j, spec) in DistortionSpec::all().into_iter().enumerate().filter(|(j, _)| j % 2 == i % 2) {
            let d = distort(s, spec, (10 * i + j) as u64).unwrap();
            let ename = format!("img/eval{i}_{j}.png");
            d.save_png(dir.join(&ename)).unwrap();
            eval.push((ename, Some(measure.weight(s, &d).unwrap())));
        }
    }
    write_manifest(&dir.join("train.csv"), &train);
    write_manifest(&dir.join("bad.csv"), &bad);
    write_manifest(&dir.join("eval.csv"), &eval);

    let mut cfg = Config::default();
    cfg.low.encoder = tiny_encoder(0);
    cfg.low.grid_n = 4;
    cfg.low.minipatch = 8;
    cfg.low.batch_scenes = 4;
    cfg.high.encoder = tiny_encoder(0);
    cfg.high.crop = 32;
    cfg.zero_shot.patch_side = 16;
    cfg.eval.budgets = vec![10];
    cfg.eval.splits = 3;
    fs::write(dir.join("run.toml"), cfg.to_toml()).unwrap();
}

fn cli_pipeline() -> Vec<Vec<&'static str>> {
    vec![
        vec!["distort", "--input", "img/scene0.png", "--kind", "blur", "--level", "2", "--output", "out/blurred.png"],
        vec!["simcheck", "--measure", "fsim", "--ref", "img/scene0.png", "--test", "out/blurred.png"],
        vec!["train-low", "--corpus", "train.csv", "--epochs", "2", "--out", "out/low.nrqp", "--losses", "out/low_losses.csv"],
        vec!["pristine-stats", "--params", "out/low.nrqp", "--pristine", "train.csv", "--out", "out/stats.nrqs"],
        vec![
            "train-high",
            "--corpus",
            "train.csv",
            "--bootstrap-good",
            "train.csv",
            "--bootstrap-bad",
            "bad.csv",
            "--anchors-out",
            "out/anchors.txt",
            "--init",
            "out/low.nrqp",
            "--batch",
            "8",
            "--k",
            "4",
            "--epochs",
            "2",
            "--out",
            "out/high.nrqp",
        ],
        vec!["features", "--manifest", "eval.csv", "--low", "out/low.nrqp", "--high", "out/high.nrqp", "--out", "out/features.csv"],
        vec![
            "fit",
            "--features",
            "out/features.csv",
            "--out",
            "out/model.json",
            "--predict",
            "out/features.csv",
            "--scores",
            "out/predictions.csv",
        ],
        vec!["eval", "--features", "out/features.csv", "--out", "out/eval.csv"],
        vec![
            "score-zs",
            "--manifest",
            "eval.csv",
            "--low",
            "out/low.nrqp",
            "--stats",
            "out/stats.nrqs",
            "--high",
            "out/high.nrqp",
            "--anchors",
            "out/anchors.txt",
            "--out",
            "out/zero_shot.csv",
        ],
    ]
}

/// Runs the pipeline in `dir` and returns every output (files and stdout) by name.
fn run_cli_once(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let out_dir = dir.join("out");
    let _ = fs::remove_dir_all(&out_dir);
    fs::create_dir_all(&out_dir).unwrap();
    let mut outputs = BTreeMap::new();
    for args in cli_pipeline() {
        let res = Command::new(env!("CARGO_BIN_EXE_nriqa"))
            .current_dir(dir)
            .args(["--seed", "7", "--workers", "2", "--config", "run.toml"])
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        if !res.status.success() {
            return Err(format!("`{}` failed: {}", args[0], String::from_utf8_lossy(&res.stderr)));
        }
        outputs.insert(format!("stdout:{}", args[0]), res.stdout);
    }
    for entry in fs::read_dir(&out_dir).unwrap() {
        let p = entry.unwrap().path();
        outputs.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap());
    }
    Ok(outputs)
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    cli_workspace(tmp.path());
    let first = match run_cli_once(tmp.path()) {
        Ok(o) => o,
        Err(e) => return Outcome::new(false, e),
    };
    let second = match run_cli_once(tmp.path()) {
        Ok(o) => o,
        Err(e) => return Outcome::new(false, e),
    };
    let csvs: Vec<&String> = first.keys().filter(|k| k.ends_with(".csv")).collect();
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    let pass = differing.is_empty() && first.len() == second.len() && csvs.len() >= 5;
    Outcome::new(
        pass,
        format!(
            "{} commands, {} outputs compared ({} CSV files), {} differ{}; {:.1}s",
            cli_pipeline().len(),
            first.len(),
            csvs.len(),
            differing.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(" ({})", differing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", "))
            },
            start.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("contrastive loss exactness", criterion_1),
        ("group-contrastive loss exactness", criterion_2),
        ("gradient suites", criterion_3),
        ("full-reference metric contracts", criterion_4),
        ("distortion ordering", criterion_5),
        ("group formation", criterion_6),
        ("zero-shot math", criterion_7),
        ("statistics oracles", criterion_8),
        ("desk-scale end-to-end", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let o = f();
        println!("{} criterion {} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
