//! Randomized comparison of the convolution kernels against loop oracles.
#![allow(dead_code)]

use dlr::tensor::{Tape, Tensor};
use rand::Rng;

use super::{conv1d_oracle, conv2d_oracle, dilate_kernel, max_abs_diff, random_tensor, rng};

#[derive(Debug, Default)]
pub struct ConvReport {
    pub cases: usize,
    pub worst_conv1d: f64,
    pub worst_dilation_equivalence: f64,
    pub worst_conv2d: f64,
}

/// `cases` random instances of each check; dilations cycle through the
/// rates used by the dilated branches.
pub fn run(cases: usize, seed: u64) -> ConvReport {
    let mut r = rng(seed);
    let mut rep = ConvReport { cases, ..Default::default() };
    let rates = [1usize, 2, 3, 5, 13, 169];
    for i in 0..cases {
        let d = rates[i % rates.len()];
        let (n, ci, co) = (r.gen_range(1..=2), r.gen_range(1..=3), r.gen_range(1..=4));
        let k = r.gen_range(1..=5);
        let t = r.gen_range(1..=((k - 1) * d + 40).min(700));
        let x = random_tensor(&[n, ci, t], &mut r);
        let w = random_tensor(&[co, ci, k], &mut r);

        let mut tape = Tape::new();
        let (xv, wv) = (tape.leaf(x.clone(), false), tape.leaf(w.clone(), false));
        let y = tape.conv1d_dilated(xv, wv, d).unwrap();
        rep.worst_conv1d = rep.worst_conv1d.max(max_abs_diff(tape.value(y).data(), &conv1d_oracle(&x, &w, d)));

        // rate-d kernel == rate-1 kernel with d-1 zeros between taps
        let wd = tape.leaf(dilate_kernel(&w, d), false);
        let y1 = tape.conv1d_dilated(xv, wd, 1).unwrap();
        let diff = tape
            .value(y)
            .data()
            .iter()
            .zip(tape.value(y1).data())
            .map(|(a, b)| (a - b).abs() as f64)
            .fold(0.0, f64::max);
        rep.worst_dilation_equivalence = rep.worst_dilation_equivalence.max(diff);

        let (h, wd_) = (r.gen_range(1..=9), r.gen_range(1..=12));
        let (kh, kw) = match i % 3 {
            0 => (3, 3),
            1 => (4, 8),
            _ => (r.gen_range(1..=5), r.gen_range(1..=5)),
        };
        let x2 = random_tensor(&[n, ci, h, wd_], &mut r);
        let w2 = random_tensor(&[co, ci, kh, kw], &mut r);
        let (a, b) = (tape.leaf(x2.clone(), false), tape.leaf(w2.clone(), false));
        let y2 = tape.conv2d(a, b).unwrap();
        rep.worst_conv2d = rep.worst_conv2d.max(max_abs_diff(tape.value(y2).data(), &conv2d_oracle(&x2, &w2)));
    }
    rep
}

pub fn linearity_gap(cases: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let d = [1usize, 5, 13][r.gen_range(0..3)];
        let t = r.gen_range(10..200);
        let x1 = random_tensor(&[1, 2, t], &mut r);
        let x2 = random_tensor(&[1, 2, t], &mut r);
        let w = random_tensor(&[3, 2, 4], &mut r);
        let mut sum = x1.clone();
        for (a, b) in sum.data_mut().iter_mut().zip(x2.data()) {
            *a += *b;
        }
        let mut tape = Tape::new();
        let wv = tape.leaf(w, false);
        let outs: Vec<Tensor> = [x1, x2, sum]
            .into_iter()
            .map(|x| {
                let xv = tape.leaf(x, false);
                let y = tape.conv1d_dilated(xv, wv, d).unwrap();
                tape.value(y).clone()
            })
            .collect();
        for ((a, b), s) in outs[0].data().iter().zip(outs[1].data()).zip(outs[2].data()) {
            worst = worst.max((a + b - s).abs() as f64);
        }
    }
    worst
}
