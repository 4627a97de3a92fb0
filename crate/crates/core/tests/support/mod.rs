//! Independent oracles shared by the integration and acceptance tests.
//! Everything here is deliberately naive: plain loops, f64 arithmetic, and
//! no calls into the code paths under test other than building tapes.
#![allow(dead_code)]

pub mod convsuite;
pub mod gradsuite;

use dlr::tensor::{Tape, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

/// `out[n,c,t] = Σ w[c,i,j]·x[n,i,t+j·d]`, zero beyond the end.
pub fn conv1d_oracle(x: &Tensor, w: &Tensor, d: usize) -> Vec<f64> {
    let (n, ci, t) = (x.shape()[0], x.shape()[1], x.shape()[2]);
    let (co, k) = (w.shape()[0], w.shape()[2]);
    let (xd, wd) = (x.data(), w.data());
    let mut out = vec![0.0; n * co * t];
    for b in 0..n {
        for c in 0..co {
            for tt in 0..t {
                let mut acc = 0.0f64;
                for i in 0..ci {
                    for j in 0..k {
                        let src = tt + j * d;
                        if src < t {
                            acc += wd[(c * ci + i) * k + j] as f64 * xd[(b * ci + i) * t + src] as f64;
                        }
                    }
                }
                out[(b * co + c) * t + tt] = acc;
            }
        }
    }
    out
}

/// Inserts `d - 1` zeros between taps: `[C_out, C_in, K]` -> `[C_out, C_in, (K-1)d+1]`.
pub fn dilate_kernel(w: &Tensor, d: usize) -> Tensor {
    let (co, ci, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
    let k2 = (k - 1) * d + 1;
    let mut data = vec![0.0f32; co * ci * k2];
    for a in 0..co * ci {
        for j in 0..k {
            data[a * k2 + j * d] = w.data()[a * k + j];
        }
    }
    Tensor::new(&[co, ci, k2], data).unwrap()
}

/// Same-padded 2-D cross-correlation; top/left padding is `(K-1)/2`.
pub fn conv2d_oracle(x: &Tensor, w: &Tensor) -> Vec<f64> {
    let s = x.shape();
    let (n, ci, h, wd_) = (s[0], s[1], s[2], s[3]);
    let (co, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let (pt, pl) = ((kh - 1) / 2, (kw - 1) / 2);
    let mut out = vec![0.0; n * co * h * wd_];
    for b in 0..n {
        for c in 0..co {
            for oh in 0..h {
                for ow in 0..wd_ {
                    let mut acc = 0.0f64;
                    for i in 0..ci {
                        for a in 0..kh {
                            for bb in 0..kw {
                                let ih = oh as isize + a as isize - pt as isize;
                                let iw = ow as isize + bb as isize - pl as isize;
                                if ih < 0 || iw < 0 || ih >= h as isize || iw >= wd_ as isize {
                                    continue;
                                }
                                let xv = x.data()[((b * ci + i) * h + ih as usize) * wd_ + iw as usize];
                                let wv = w.data()[((c * ci + i) * kh + a) * kw + bb];
                                acc += xv as f64 * wv as f64;
                            }
                        }
                    }
                    out[((b * co + c) * h + oh) * wd_ + ow] = acc;
                }
            }
        }
    }
    out
}

pub fn max_abs_diff(a: &[f32], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y).abs()).fold(0.0, f64::max)
}

/// Mean `-log softmax(row)[label]` in f64.
pub fn cross_entropy_oracle(logits: &Tensor, labels: &[usize]) -> f64 {
    let c = logits.shape()[1];
    let mut total = 0.0;
    for (b, &l) in labels.iter().enumerate() {
        let row: Vec<f64> = logits.data()[b * c..(b + 1) * c].iter().map(|&v| v as f64).collect();
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[l];
    }
    total / labels.len() as f64
}

pub fn bce_oracle(pred: &Tensor, targets: &Tensor) -> f64 {
    let s: f64 = pred
        .data()
        .iter()
        .zip(targets.data())
        .map(|(&p, &y)| {
            let (p, y) = (p as f64, y as f64);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    s / pred.len() as f64
}

/// Outcome of a finite-difference comparison for one input tensor.
#[derive(Debug)]
pub struct GradCheck {
    pub rel_err: f64,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// Compares tape gradients against central differences with step `h`.
///
/// `forward` records the computation on a fresh tape and returns its output
/// node. `scalar` maps the inputs to the f64 value whose gradient is
/// checked; by default that is the readout `Σ coeffs·output`, evaluated in
/// f64 so that unaffected outputs cancel exactly. Coordinates where the
/// one-sided slopes disagree (a ReLU or max-pool switch inside `±h`) are
/// skipped and counted.
///
/// The relative error is `‖g_tape − g_fd‖ / max(‖g_tape‖, ‖g_fd‖)` over the
/// concatenated gradient of every differentiable input, restricted to the
/// checked coordinates.
pub fn grad_check<F>(inputs: &[Tensor], requires: &[bool], forward: F, h: f32, seed: u64) -> GradCheck
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut r = rng(seed);
    let out_shape = {
        let mut tape = Tape::new();
        let vars: Vec<Var> = inputs.iter().zip(requires).map(|(t, &q)| tape.leaf(t.clone(), q)).collect();
        let out = forward(&mut tape, &vars);
        tape.value(out).shape().to_vec()
    };
    let coeffs = random_tensor(&out_shape, &mut r);
    let readout = |ins: &[Tensor]| -> f64 {
        let mut tape = Tape::new();
        let vars: Vec<Var> = ins.iter().map(|t| tape.leaf(t.clone(), false)).collect();
        let out = forward(&mut tape, &vars);
        tape.value(out).data().iter().zip(coeffs.data()).map(|(&a, &b)| a as f64 * b as f64).sum()
    };
    grad_check_with(inputs, requires, &forward, &coeffs, readout, h)
}

/// As [`grad_check`] for ops whose output is already the scalar loss; `oracle`
/// evaluates that loss independently in f64.
pub fn grad_check_loss<F, O>(inputs: &[Tensor], requires: &[bool], forward: F, oracle: O, h: f32) -> GradCheck
where
    F: Fn(&mut Tape, &[Var]) -> Var,
    O: Fn(&[Tensor]) -> f64,
{
    grad_check_with(inputs, requires, &forward, &Tensor::scalar(1.0), oracle, h)
}

fn grad_check_with<F, O>(inputs: &[Tensor], requires: &[bool], forward: &F, coeffs: &Tensor, value: O, h: f32) -> GradCheck
where
    F: Fn(&mut Tape, &[Var]) -> Var,
    O: Fn(&[Tensor]) -> f64,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().zip(requires).map(|(t, &q)| tape.leaf(t.clone(), q)).collect();
    let out = forward(&mut tape, &vars);
    let loss = tape.dot(out, coeffs).unwrap();
    let grads = tape.backward(loss).unwrap();

    let mut num = 0.0f64;
    let mut den_a = 0.0f64;
    let mut den_n = 0.0f64;
    let mut checked = 0;
    let mut skipped = 0;
    let base = value(inputs);
    for (k, inp) in inputs.iter().enumerate() {
        if !requires[k] {
            continue;
        }
        let analytic = grads.get(vars[k]);
        for e in 0..inp.len() {
            let x0 = inp.data()[e];
            let xp = x0 + h;
            let xm = x0 - h;
            let mut ins = inputs.to_vec();
            ins[k].data_mut()[e] = xp;
            let fp = value(&ins);
            ins[k].data_mut()[e] = xm;
            let fm = value(&ins);
            let (hp, hm) = ((xp - x0) as f64, (x0 - xm) as f64);
            let fd = (fp - fm) / (hp + hm);
            let right = (fp - base) / hp;
            let left = (base - fm) / hm;
            let scale = right.abs().max(left.abs()).max(1e-3);
            if (right - left).abs() > 0.01 * scale + 5e-4 {
                skipped += 1;
                continue;
            }
            let a = analytic.data()[e] as f64;
            num += (a - fd).powi(2);
            den_a += a * a;
            den_n += fd * fd;
            checked += 1;
        }
    }
    let den = den_a.sqrt().max(den_n.sqrt());
    let rel_err = if den == 0.0 { 0.0 } else { num.sqrt() / den };
    GradCheck { rel_err, checked, skipped_kinks: skipped }
}

/// O(P·N) AUC: fraction of (positive, negative) pairs ranked correctly, ties half.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0f64;
    let mut pairs = 0.0f64;
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            if scores[i] > scores[j] {
                wins += 1.0;
            } else if scores[i] == scores[j] {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}
