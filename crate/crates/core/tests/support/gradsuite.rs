//! Randomized finite-difference checks for every differentiable tape op.
#![allow(dead_code)]

use dlr::tensor::{BnMode, BnStats, Tensor};
use rand::Rng;

use super::{bce_oracle, cross_entropy_oracle, grad_check, grad_check_loss, random_tensor, rng, GradCheck};

pub const FD_STEP: f32 = 1e-3;

/// Worst relative error observed for one op family.
#[derive(Debug)]
pub struct OpReport {
    pub op: String,
    pub cases: usize,
    pub worst_rel_err: f64,
    pub skipped_kinks: usize,
    pub checked: usize,
}

fn fold(op: impl Into<String>, runs: Vec<GradCheck>) -> OpReport {
    let mut r = OpReport { op: op.into(), cases: runs.len(), worst_rel_err: 0.0, skipped_kinks: 0, checked: 0 };
    for g in runs {
        r.worst_rel_err = r.worst_rel_err.max(g.rel_err);
        r.skipped_kinks += g.skipped_kinks;
        r.checked += g.checked;
    }
    r
}

/// Values bounded away from zero so ReLU kinks stay outside `±h`.
fn away_from_zero(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let mut t = random_tensor(shape, rng);
    for v in t.data_mut() {
        *v = v.signum() * (0.05 + v.abs());
    }
    t
}

pub fn conv1d(dilation: usize, cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|_| {
            let n = r.gen_range(1..=2);
            let ci = r.gen_range(1..=2);
            let co = r.gen_range(1..=3);
            let k = r.gen_range(1..=4);
            let t = r.gen_range(((k - 1) * dilation + 2).min(300)..=((k - 1) * dilation + 8).min(340));
            let x = random_tensor(&[n, ci, t], &mut r);
            let w = random_tensor(&[co, ci, k], &mut r);
            grad_check(&[x, w], &[true, true], |tp, v| tp.conv1d_dilated(v[0], v[1], dilation).unwrap(), FD_STEP, r.gen())
        })
        .collect();
    fold(format!("conv1d_dilated(d={dilation})"), runs)
}

pub fn conv2d(cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|_| {
            let (n, ci, co) = (r.gen_range(1..=2), r.gen_range(1..=2), r.gen_range(1..=2));
            let (h, w) = (r.gen_range(2..=5), r.gen_range(2..=6));
            let (kh, kw) = if r.gen_bool(0.3) { (4, 8) } else { (r.gen_range(1..=3), r.gen_range(1..=3)) };
            let x = random_tensor(&[n, ci, h, w], &mut r);
            let k = random_tensor(&[co, ci, kh, kw], &mut r);
            grad_check(&[x, k], &[true, true], |tp, v| tp.conv2d(v[0], v[1]).unwrap(), FD_STEP, r.gen())
        })
        .collect();
    fold("conv2d", runs)
}

pub fn batch_norm(mode: BnMode, cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|_| {
            let (n, c, s) = (r.gen_range(2..=3), r.gen_range(1..=3), r.gen_range(3..=6));
            let x = random_tensor(&[n, c, s], &mut r);
            let gamma = random_tensor(&[c], &mut r);
            let beta = random_tensor(&[c], &mut r);
            let mut stats = BnStats::new(c);
            for (m, v) in stats.running_mean.iter_mut().zip(stats.running_var.iter_mut()) {
                *m = r.gen_range(-0.5..0.5);
                *v = r.gen_range(0.5..2.0);
            }
            grad_check(
                &[x, gamma, beta],
                &[true, true, true],
                |tp, v| {
                    let mut st = stats.clone();
                    tp.batch_norm(v[0], v[1], v[2], &mut st, mode).unwrap()
                },
                FD_STEP,
                r.gen(),
            )
        })
        .collect();
    fold(format!("batch_norm({mode:?})"), runs)
}

pub fn avg_pool1d(cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|_| {
            let size = r.gen_range(1..=4);
            let stride = r.gen_range(1..=4);
            let t = r.gen_range(size..=size + 10);
            let x = random_tensor(&[r.gen_range(1..=2), r.gen_range(1..=3), t], &mut r);
            grad_check(&[x], &[true], |tp, v| tp.avg_pool1d(v[0], size, stride).unwrap(), FD_STEP, r.gen())
        })
        .collect();
    fold("avg_pool1d", runs)
}

pub fn max_pool2d(cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|_| {
            let (ph, pw) = (r.gen_range(1..=4), r.gen_range(1..=4));
            let (h, w) = (r.gen_range(ph..=ph * 2 + 1), r.gen_range(pw..=pw * 2 + 1));
            let shape = [1, r.gen_range(1..=2), h, w];
            // distinct values 0.01 apart: no window has a tie within ±h
            let n: usize = shape.iter().product();
            let mut vals: Vec<f32> = (0..n).map(|i| i as f32 * 0.01 - 0.5).collect();
            for i in (1..n).rev() {
                vals.swap(i, r.gen_range(0..=i));
            }
            let x = Tensor::new(&shape, vals).unwrap();
            grad_check(&[x], &[true], |tp, v| tp.max_pool2d(v[0], ph, pw).unwrap(), FD_STEP, r.gen())
        })
        .collect();
    fold("max_pool2d", runs)
}

pub fn global_pools(cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|i| {
            let x = random_tensor(&[r.gen_range(1..=2), r.gen_range(1..=3), r.gen_range(1..=4), r.gen_range(1..=5)], &mut r);
            if i % 2 == 0 {
                grad_check(&[x], &[true], |tp, v| tp.global_avg_pool_time(v[0]).unwrap(), FD_STEP, r.gen())
            } else {
                grad_check(&[x], &[true], |tp, v| tp.global_avg_pool(v[0]).unwrap(), FD_STEP, r.gen())
            }
        })
        .collect();
    fold("global_avg_pool", runs)
}

pub fn dense(cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|_| {
            let (n, f, o) = (r.gen_range(1..=4), r.gen_range(1..=6), r.gen_range(1..=5));
            let x = random_tensor(&[n, f], &mut r);
            let w = random_tensor(&[o, f], &mut r);
            let b = random_tensor(&[o], &mut r);
            grad_check(&[x, w, b], &[true, true, true], |tp, v| tp.dense(v[0], v[1], v[2]).unwrap(), FD_STEP, r.gen())
        })
        .collect();
    fold("dense", runs)
}

pub fn elementwise(cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|i| {
            let shape = [r.gen_range(1..=2), r.gen_range(1..=3), r.gen_range(1..=6)];
            match i % 3 {
                0 => {
                    let x = away_from_zero(&shape, &mut r);
                    grad_check(&[x], &[true], |tp, v| tp.relu(v[0]), FD_STEP, r.gen())
                }
                1 => {
                    let x = random_tensor(&shape, &mut r);
                    grad_check(&[x], &[true], |tp, v| tp.sigmoid(v[0]), FD_STEP, r.gen())
                }
                _ => {
                    let a = random_tensor(&shape, &mut r);
                    let mut s2 = shape;
                    s2[1] = r.gen_range(1..=3);
                    let b = random_tensor(&s2, &mut r);
                    grad_check(&[a, b], &[true, true], |tp, v| tp.concat_channels(&[v[0], v[1]]).unwrap(), FD_STEP, r.gen())
                }
            }
        })
        .collect();
    fold("relu/sigmoid/concat", runs)
}

pub fn softmax_cross_entropy(cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|_| {
            let (n, c) = (r.gen_range(1..=4), r.gen_range(2..=9));
            let mut logits = random_tensor(&[n, c], &mut r);
            for v in logits.data_mut() {
                *v *= 3.0;
            }
            let labels: Vec<usize> = (0..n).map(|_| r.gen_range(0..c)).collect();
            let l2 = labels.clone();
            grad_check_loss(
                &[logits],
                &[true],
                |tp, v| tp.softmax_cross_entropy(v[0], &labels).unwrap(),
                move |ins| cross_entropy_oracle(&ins[0], &l2),
                FD_STEP,
            )
        })
        .collect();
    fold("softmax_cross_entropy", runs)
}

pub fn bce(cases: usize, seed: u64) -> OpReport {
    let mut r = rng(seed);
    let runs = (0..cases)
        .map(|_| {
            let shape = [r.gen_range(1..=4), r.gen_range(1..=6)];
            let n: usize = shape.iter().product();
            let pred = Tensor::new(&shape, (0..n).map(|_| r.gen_range(0.1f32..0.9)).collect()).unwrap();
            let targets = Tensor::new(&shape, (0..n).map(|_| if r.gen_bool(0.5) { 1.0 } else { 0.0 }).collect()).unwrap();
            let t2 = targets.clone();
            grad_check_loss(
                &[pred],
                &[true],
                |tp, v| tp.bce(v[0], &targets).unwrap(),
                move |ins| bce_oracle(&ins[0], &t2),
                FD_STEP,
            )
        })
        .collect();
    fold("bce", runs)
}

/// Every op family, `cases` random shapes each.
pub fn all(cases: usize, seed: u64) -> Vec<OpReport> {
    let mut out = Vec::new();
    for (i, d) in [1usize, 5, 13, 169].into_iter().enumerate() {
        out.push(conv1d(d, cases, seed + i as u64));
    }
    out.push(conv2d(cases, seed + 10));
    out.push(batch_norm(BnMode::Train, cases, seed + 11));
    out.push(batch_norm(BnMode::Infer, cases, seed + 12));
    out.push(avg_pool1d(cases, seed + 13));
    out.push(max_pool2d(cases, seed + 14));
    out.push(global_pools(cases, seed + 15));
    out.push(dense(cases, seed + 16));
    out.push(elementwise(cases, seed + 17));
    out.push(softmax_cross_entropy(cases, seed + 18));
    out.push(bce(cases, seed + 19));
    out
}
