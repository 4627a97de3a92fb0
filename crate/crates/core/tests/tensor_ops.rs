mod support;

use dlr::tensor::{BnMode, BnStats, Tape, Tensor, TensorError};
use support::{convsuite, random_tensor, rng};

fn t(shape: &[usize], data: &[f32]) -> Tensor {
    Tensor::new(shape, data.to_vec()).unwrap()
}

#[test]
fn dilated_conv_hand_example() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[1, 1, 6], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]), false);
    let w = tape.leaf(t(&[1, 1, 3], &[1.0, 1.0, 1.0]), false);
    let y = tape.conv1d_dilated(x, w, 2).unwrap();
    // tail positions read zero padding
    assert_eq!(tape.value(y).data(), &[9.0, 12.0, 8.0, 10.0, 5.0, 6.0]);
}

#[test]
fn single_tap_identity_kernels() {
    let mut r = rng(1);
    let xin = random_tensor(&[2, 1, 17], &mut r);
    let mut tape = Tape::new();
    let x = tape.leaf(xin.clone(), false);
    let w = tape.leaf(t(&[1, 1, 1], &[1.0]), false);
    let y = tape.conv1d_dilated(x, w, 7).unwrap();
    assert_eq!(tape.value(y), &xin);

    let img = random_tensor(&[1, 1, 4, 5], &mut r);
    let x2 = tape.leaf(img.clone(), false);
    let one = tape.leaf(t(&[1, 1, 1, 1], &[1.0]), false);
    let y2 = tape.conv2d(x2, one).unwrap();
    assert_eq!(tape.value(y2), &img);

    let zero = tape.leaf(Tensor::zeros(&[2, 1, 3, 3]), false);
    let y3 = tape.conv2d(x2, zero).unwrap();
    assert!(tape.value(y3).data().iter().all(|&v| v == 0.0));
}

#[test]
fn convolution_shape_errors() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::zeros(&[1, 2, 8]), false);
    let w = tape.leaf(Tensor::zeros(&[1, 3, 2]), false);
    assert!(matches!(tape.conv1d_dilated(x, w, 1), Err(TensorError::Shape { .. })));
    let w1 = tape.leaf(Tensor::zeros(&[1, 2, 2]), false);
    assert!(tape.conv1d_dilated(x, w1, 0).is_err());
    assert!(matches!(tape.conv2d(x, w1), Err(TensorError::Shape { .. })));
}

#[test]
fn convolutions_match_loop_oracles() {
    let rep = convsuite::run(100, 3);
    assert!(rep.worst_conv1d < 1e-5, "{rep:?}");
    assert!(rep.worst_dilation_equivalence < 1e-5, "{rep:?}");
    assert!(rep.worst_conv2d < 1e-5, "{rep:?}");
}

#[test]
fn convolution_is_linear() {
    assert!(convsuite::linearity_gap(30, 4) < 1e-5);
}

#[test]
fn batch_norm_train_standardizes() {
    let mut r = rng(2);
    let mut x = random_tensor(&[4, 3, 50], &mut r);
    for v in x.data_mut() {
        *v = *v * 5.0 + 2.0;
    }
    let mut tape = Tape::new();
    let xv = tape.leaf(x, false);
    let g = tape.leaf(Tensor::full(&[3], 1.0), false);
    let b = tape.leaf(Tensor::zeros(&[3]), false);
    let mut st = BnStats::new(3);
    let y = tape.batch_norm(xv, g, b, &mut st, BnMode::Train).unwrap();
    let yd = tape.value(y).data();
    for c in 0..3 {
        let vals: Vec<f64> = (0..4).flat_map(|n| yd[(n * 3 + c) * 50..(n * 3 + c + 1) * 50].iter().map(|&v| v as f64)).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mean.abs() < 1e-6, "mean {mean}");
        assert!((var - 1.0).abs() < 1e-4, "var {var}");
    }
    // running stats moved 1% of the way toward the batch statistics
    assert!(st.running_mean.iter().all(|&m| m > 0.0 && m < 0.1));
}

#[test]
fn batch_norm_constant_channel_is_zero() {
    let mut tape = Tape::new();
    let xv = tape.leaf(Tensor::full(&[2, 1, 10], 3.5), false);
    let g = tape.leaf(Tensor::full(&[1], 1.0), false);
    let b = tape.leaf(Tensor::zeros(&[1]), false);
    let y = tape.batch_norm(xv, g, b, &mut BnStats::new(1), BnMode::Train).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.0));
}

#[test]
fn batch_norm_infer_with_unit_stats_is_affine() {
    let mut r = rng(3);
    let x = random_tensor(&[1, 2, 6], &mut r);
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone(), false);
    let g = tape.leaf(t(&[2], &[2.0, -0.5]), false);
    let b = tape.leaf(t(&[2], &[0.25, 1.0]), false);
    let mut st = BnStats::new(2);
    let before = st.clone();
    let y = tape.batch_norm(xv, g, b, &mut st, BnMode::Infer).unwrap();
    assert_eq!(st, before);
    for (i, (&yv, &xv)) in tape.value(y).data().iter().zip(x.data()).enumerate() {
        let (gg, bb) = if i < 6 { (2.0, 0.25) } else { (-0.5, 1.0) };
        assert!((yv - (gg * xv + bb)).abs() < 1e-4);
    }
}

#[test]
fn pooling_examples() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[1, 1, 4], &[1.0, 2.0, 3.0, 4.0]), false);
    let y = tape.avg_pool1d(x, 2, 2).unwrap();
    assert_eq!(tape.value(y).data(), &[1.5, 3.5]);

    let long = tape.leaf(Tensor::zeros(&[1, 2, 70_125]), false);
    let p = tape.avg_pool1d(long, 256, 256).unwrap();
    assert_eq!(tape.value(p).shape(), &[1, 2, 273]);

    let c = tape.leaf(Tensor::full(&[1, 2, 6, 8], 0.7), false);
    let m = tape.max_pool2d(c, 2, 4).unwrap();
    assert_eq!(tape.value(m).shape(), &[1, 2, 3, 2]);
    assert!(tape.value(m).data().iter().all(|&v| v == 0.7));

    assert!(matches!(tape.avg_pool1d(x, 5, 1), Err(TensorError::WindowTooLarge { .. })));
    assert!(matches!(tape.max_pool2d(c, 7, 1), Err(TensorError::WindowTooLarge { .. })));
}

#[test]
fn relu_examples() {
    let mut tape = Tape::new();
    let x = tape.leaf(t(&[2], &[-1.0, 2.0]), false);
    let y = tape.relu(x);
    assert_eq!(tape.value(y).data(), &[0.0, 2.0]);
}

#[test]
fn cross_entropy_values() {
    let mut tape = Tape::new();
    let u = tape.leaf(Tensor::zeros(&[1, 9]), false);
    let l = tape.softmax_cross_entropy(u, &[4]).unwrap();
    assert!((tape.value(l).item() as f64 - 9f64.ln()).abs() < 1e-6);

    let big = tape.leaf(t(&[1, 2], &[1000.0, 0.0]), false);
    let l2 = tape.softmax_cross_entropy(big, &[0]).unwrap();
    assert!(tape.value(l2).item().abs() < 1e-6);
    let l3 = tape.softmax_cross_entropy(big, &[1]).unwrap();
    assert!((tape.value(l3).item() - 1000.0).abs() < 1e-3);

    assert!(matches!(
        tape.softmax_cross_entropy(big, &[2]),
        Err(TensorError::LabelOutOfRange { label: 2, classes: 2 })
    ));
}

#[test]
fn bce_values() {
    let mut tape = Tape::new();
    let targets = t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]);
    let exact = tape.leaf(targets.clone(), false);
    let l = tape.bce(exact, &targets).unwrap();
    assert!(tape.value(l).item() <= 1e-6);
    let half = tape.leaf(Tensor::full(&[2, 2], 0.5), false);
    let l2 = tape.bce(half, &targets).unwrap();
    assert!((tape.value(l2).item() as f64 - 2f64.ln()).abs() < 1e-6);
    let bad = tape.leaf(t(&[2, 2], &[1.5, 0.0, 0.0, 1.0]), false);
    assert!(matches!(tape.bce(bad, &targets), Err(TensorError::PredictionOutOfRange(_))));
}

#[test]
fn backward_of_sum_is_ones() {
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::full(&[3, 4], 2.0), true);
    let s = tape.sum(x);
    let g = tape.backward(s).unwrap();
    assert!(g.get(x).data().iter().all(|&v| v == 1.0));
}

#[test]
fn disconnected_graph_gets_zero_gradient() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::full(&[2], 1.0), true);
    let b = tape.leaf(Tensor::full(&[3], 1.0), true);
    let sa = tape.sum(a);
    let rb = tape.relu(b);
    let _sb = tape.sum(rb);
    let g = tape.backward(sa).unwrap();
    assert_eq!(g.get(b), Tensor::zeros(&[3]));
    assert_eq!(g.get(a), Tensor::full(&[2], 1.0));
}

#[test]
fn non_scalar_loss_rejected() {
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::full(&[2], 1.0), true);
    assert!(matches!(tape.backward(a), Err(TensorError::NonScalarLoss(_))));
}

#[test]
fn composite_network_gradients() {
    // conv -> relu -> pool -> dense, tensors of <= 64 elements
    let mut r = rng(11);
    for case in 0..10 {
        let x = random_tensor(&[1, 1, 24], &mut r);
        let w = random_tensor(&[2, 1, 3], &mut r);
        let dw = random_tensor(&[3, 12], &mut r);
        let db = random_tensor(&[3], &mut r);
        let res = support::grad_check(
            &[x, w, dw, db],
            &[false, true, true, true],
            |tp, v| {
                let c = tp.conv1d_dilated(v[0], v[1], 2).unwrap();
                let a = tp.relu(c);
                let p = tp.avg_pool1d(a, 4, 4).unwrap();
                let f = tp.reshape(p, &[1, 12]).unwrap();
                tp.dense(f, v[2], v[3]).unwrap()
            },
            1e-3,
            case,
        );
        assert!(res.rel_err < 1e-3, "case {case}: {res:?}");
    }
}
