use rand::Rng;
use rand_distr::{Distribution, Normal};
use tsclass::neural::layers::*;
use tsclass::neural::*;
use tsclass::seed;

fn t(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

fn randn(shape: &[usize], s: u64) -> Tensor {
    let mut rng = seed::rng(s);
    let n: usize = shape.iter().product();
    let normal = Normal::new(0.0, 1.0).unwrap();
    t(shape, &(0..n).map(|_| normal.sample(&mut rng)).collect::<Vec<_>>())
}

#[test]
fn conv_delta_kernel_is_identity() {
    let x = randn(&[2, 1, 7], 1);
    let y = conv1d(&x, &t(&[1, 1, 3], &[0.0, 1.0, 0.0]), &t(&[1], &[0.0])).unwrap();
    assert_eq!(y, x);
}

#[test]
fn conv_box_kernel_zero_pads() {
    let y = conv1d(&t(&[1, 1, 3], &[1.0, 2.0, 3.0]), &t(&[1, 1, 3], &[1.0; 3]), &t(&[1], &[0.0])).unwrap();
    assert_eq!(y.data(), &[3.0, 6.0, 5.0]);
}

#[test]
fn conv_bias_only_is_constant() {
    let x = randn(&[3, 2, 5], 2);
    let y = conv1d(&x, &Tensor::zeros(&[4, 2, 3]), &t(&[4], &[0.7; 4])).unwrap();
    assert_eq!(y.shape(), &[3, 4, 5]);
    assert!(y.data().iter().all(|&v| v == 0.7));
}

#[test]
fn conv_rejects_bad_shapes() {
    let x = randn(&[1, 2, 4], 3);
    assert!(matches!(conv1d(&x, &Tensor::zeros(&[1, 3, 3]), &Tensor::zeros(&[1])), Err(NeuralError::ShapeMismatch(_))));
    assert!(matches!(conv1d(&x, &Tensor::zeros(&[1, 2, 5]), &Tensor::zeros(&[1])), Err(NeuralError::ShapeMismatch(_))));
}

#[test]
fn batchnorm_standardised_input_passes_through() {
    // one channel, values with mean 0 and population variance 1
    let x = t(&[2, 1, 2], &[1.0, -1.0, 1.0, -1.0]);
    let mut p = BatchNormParams::new(1);
    let (y, _) = batchnorm1d(&x, &mut p, true, true).unwrap();
    for (a, b) in y.data().iter().zip(x.data()) {
        assert!((a - b).abs() <= 1e-5);
    }
}

#[test]
fn batchnorm_zero_gamma_gives_beta() {
    let x = randn(&[4, 3, 5], 4);
    let mut p = BatchNormParams::new(3);
    p.gamma = Tensor::zeros(&[3]);
    p.beta = t(&[3], &[0.5, -1.0, 2.0]);
    let (y, _) = batchnorm1d(&x, &mut p, true, false).unwrap();
    for (i, v) in y.data().iter().enumerate() {
        assert_eq!(*v, p.beta.data()[(i / 5) % 3]);
    }
}

#[test]
fn batchnorm_two_values() {
    let mut p = BatchNormParams::new(1);
    let (y, _) = batchnorm1d(&t(&[2, 1, 1], &[1.0, 3.0]), &mut p, true, true).unwrap();
    let expect = 1.0 / (1.0f64 + BN_EPS).sqrt();
    assert!((y.data()[0] + expect).abs() < 1e-15 && (y.data()[1] - expect).abs() < 1e-15);
    // running stats: mean 2, unbiased var 2
    assert!((p.running_mean.data()[0] - 0.2).abs() < 1e-15);
    assert!((p.running_var.data()[0] - (0.9 + 0.2)).abs() < 1e-15);
}

#[test]
fn batchnorm_single_element_rejected_in_train_mode() {
    let mut p = BatchNormParams::new(2);
    let x = randn(&[1, 2, 1], 5);
    assert_eq!(batchnorm1d(&x, &mut p, true, true).unwrap_err(), NeuralError::DegenerateBatch);
    assert!(batchnorm1d(&x, &mut p, false, false).is_ok());
}

#[test]
fn pool_examples() {
    let x = randn(&[2, 3, 1], 6);
    assert_eq!(adaptive_avg_pool_to_1(&x).unwrap(), x);
    assert_eq!(adaptive_avg_pool_to_1(&t(&[1, 1, 3], &[1.0, 2.0, 3.0])).unwrap().data(), &[2.0]);
    assert_eq!(adaptive_avg_pool_to_1(&t(&[1, 1, 4], &[0.3; 4])).unwrap().data(), &[0.3]);
}

#[test]
fn dropout_examples() {
    let x = randn(&[3, 4, 5], 7);
    let mut rng = seed::rng(1);
    assert_eq!(dropout(&x, 0.0, true, &mut rng).unwrap().0, x);
    assert_eq!(dropout(&x, 0.9, false, &mut rng).unwrap().0, x);
    assert_eq!(dropout(&x, 1.0, true, &mut rng).unwrap_err(), NeuralError::InvalidP(1.0));
    let ones = Tensor::filled(&[1, 1, 1_000_000], 1.0);
    let (y, _) = dropout(&ones, 0.5, true, &mut rng).unwrap();
    let mean = y.data().iter().sum::<f64>() / 1e6;
    assert!((0.99..=1.01).contains(&mean), "mean {mean}");
}

#[test]
fn log_softmax_examples() {
    let u = log_softmax(&t(&[1, 3], &[0.0; 3])).unwrap();
    for v in u.data() {
        assert!((v - (1.0f64 / 3.0).ln()).abs() < 1e-15);
    }
    let big = log_softmax(&t(&[1, 3], &[1000.0, 0.0, 0.0])).unwrap();
    assert!(big.data()[0].abs() < 1e-12);
    assert!((big.data()[1] + 1000.0).abs() < 1e-9);

    let x = randn(&[5, 4], 8);
    let ls = log_softmax(&x).unwrap();
    let shifted: Vec<f64> = x.data().iter().map(|v| v + 17.25).collect();
    let ls2 = log_softmax(&t(&[5, 4], &shifted)).unwrap();
    for (row, row2) in ls.data().chunks(4).zip(ls2.data().chunks(4)) {
        assert!((row.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs() <= 1e-12);
        for (a, b) in row.iter().zip(row2) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn cross_entropy_examples() {
    let (l, _) = cross_entropy(&t(&[1, 3], &[0.0; 3]), &[2]).unwrap();
    assert!((l - 3f64.ln()).abs() < 1e-15);
    let (l, _) = cross_entropy(&t(&[1, 3], &[0.0, 800.0, 0.0]), &[1]).unwrap();
    assert!(l.abs() < 1e-300);
    let logits = t(&[2, 3], &[0.5, -1.0, 2.0, 0.0, 0.3, -0.2]);
    let row = |r: &[f64], k: usize| {
        let z: f64 = r.iter().map(|v| v.exp()).sum();
        -(r[k].exp() / z).ln()
    };
    let expect = (row(&logits.data()[..3], 0) + row(&logits.data()[3..], 2)) / 2.0;
    let (l, _) = cross_entropy(&logits, &[0, 2]).unwrap();
    assert!((l - expect).abs() < 1e-14);
    assert_eq!(cross_entropy(&logits, &[0, 3]).unwrap_err(), NeuralError::BadTargetIndex(3));
}

#[test]
fn convnet_forward_contracts() {
    let net = ConvTimeNetLite::new(5, 3, 0.5, 1).unwrap();
    let x = randn(&[4, 5, 1], 9);
    let out = net.forward_eval(&x).unwrap();
    assert_eq!(out.shape(), &[4, 3]);
    assert_eq!(net.forward_eval(&x).unwrap(), out);

    let mut dup = x.data().to_vec();
    dup.extend_from_slice(&x.data()[..5]);
    let out2 = net.forward_eval(&t(&[5, 5, 1], &dup)).unwrap();
    assert_eq!(&out2.data()[12..15], &out.data()[..3]);

    assert!(matches!(net.forward_eval(&randn(&[1, 4, 1], 1)), Err(NeuralError::ShapeMismatch(_))));
}

#[test]
fn convnet_zero_input_zero_biases_ties() {
    let mut net = ConvTimeNetLite::new(3, 3, 0.0, 2).unwrap();
    for (name, p) in net.trainable_mut() {
        if name.ends_with("bias") {
            p.data_mut().fill(0.0);
        }
    }
    let out = net.forward_eval(&Tensor::zeros(&[2, 3, 4])).unwrap();
    assert!(out.data().iter().all(|&v| v == 0.0));
    let ls = log_softmax(&out).unwrap();
    assert!(ls.data().iter().all(|&v| (v - (1.0f64 / 3.0).ln()).abs() < 1e-15));
}

#[test]
fn convnet_saturated_target_has_zero_gradients() {
    let mut net = ConvTimeNetLite::new(3, 3, 0.0, 3).unwrap();
    net.fc_w.data_mut().fill(0.0);
    net.fc_b = t(&[3], &[1000.0, 0.0, 0.0]);
    let mut rng = seed::rng(0);
    let (loss, grads, dx) = net.loss_and_grads(&randn(&[2, 3, 4], 10), &[0, 0], false, &mut rng).unwrap();
    assert_eq!(loss, 0.0);
    assert!(grads.iter().chain([&dx]).all(|g| g.data().iter().all(|&v| v == 0.0)));
}

#[test]
fn convnet_untargeted_class_gradient_bounded_by_softmax_tail() {
    let mut net = ConvTimeNetLite::new(3, 3, 0.0, 4).unwrap();
    net.fc_b = t(&[3], &[0.0, 12.0, 0.0]);
    let x = randn(&[1, 3, 6], 11);
    let mut rng = seed::rng(0);
    let (logits, _) = net.forward_train(&x, false, &mut rng).unwrap();
    let p0 = log_softmax(&logits).unwrap().data()[0].exp();
    let (_, grads, _) = net.loss_and_grads(&x, &[1], false, &mut rng).unwrap();
    let names: Vec<String> = net.trainable().into_iter().map(|(n, _)| n).collect();
    let fc_w = &grads[names.iter().position(|n| n == "fc.weight").unwrap()];
    let fc_b = &grads[names.iter().position(|n| n == "fc.bias").unwrap()];
    // d loss / d fc_b[0] = p0 exactly; the weight row is p0 times pooled features
    assert!((fc_b.data()[0] - p0).abs() <= 1e-15);
    let row0 = &fc_w.data()[..CONV2_CHANNELS];
    assert!(row0.iter().any(|&v| v != 0.0));
    let (_, cache) = net.forward_train(&x, false, &mut rng).unwrap();
    let pooled = cache.pooled.data();
    for (g, a) in row0.iter().zip(pooled) {
        assert!((g - p0 * a).abs() <= 1e-15 * (1.0 + a.abs()));
    }
}

#[test]
fn convnet_and_lstm_gradients_match_finite_differences() {
    for s in 0..2 {
        let r = gradcheck_convnet(s, 3, 4, 6, Some(64)).unwrap();
        assert!(r.max_rel_error <= 1e-4, "conv seed {s}: {r:?}");
        let r = gradcheck_lstm(s, 4, 3, 5).unwrap();
        assert!(r.max_rel_error <= 1e-4, "lstm seed {s}: {r:?}");
    }
}

#[test]
fn adam_zero_lr_is_identity() {
    let mut p = randn(&[3, 2], 12);
    let before = p.clone();
    let mut opt = Adam::new(0.0);
    for _ in 0..3 {
        opt.step(&mut [&mut p], &[randn(&[3, 2], 13)], &[]).unwrap();
    }
    assert_eq!(p, before);
}

fn zeroed_lstm(input: usize, hidden: usize) -> LstmClassifier {
    let mut net = LstmClassifier::new(input, hidden, 3, 0);
    for (_, p) in net.trainable_mut() {
        p.data_mut().fill(0.0);
    }
    net
}

#[test]
fn lstm_zero_weights_examples() {
    let mut net = zeroed_lstm(2, 3);
    net.b_y = t(&[3], &[0.1, 0.2, 0.3]);
    let x = randn(&[4, 2], 14);
    let tr = net.forward(&x, &[0.0; 3], &[0.0; 3]).unwrap();
    for step in 0..4 {
        assert!(tr.f[step].iter().chain(&tr.i[step]).chain(&tr.o[step]).all(|&v| v == 0.5));
        assert!(tr.c[step + 1].iter().chain(&tr.h[step + 1]).all(|&v| v == 0.0));
    }
    assert_eq!(tr.logits, vec![0.1, 0.2, 0.3]);

    let c = 1.3;
    let tr = net.forward(&x, &[0.0; 3], &[c; 3]).unwrap();
    assert!((tr.c[1][0] - 0.5 * c).abs() < 1e-15);
    assert!((tr.h[1][0] - 0.5 * (0.5 * c).tanh()).abs() < 1e-15);
}

#[test]
fn lstm_empty_sequence_applies_head_to_initial_state() {
    let net = LstmClassifier::new(2, 3, 3, 5);
    let h0 = [0.2, -0.4, 0.9];
    let tr = net.forward(&Tensor::zeros(&[0, 2]), &h0, &[0.5; 3]).unwrap();
    assert_eq!(tr.h, vec![h0.to_vec()]);
    assert_eq!(tr.c, vec![vec![0.5; 3]]);
    let expect: Vec<f64> = (0..3)
        .map(|k| (0..3).map(|j| net.w_y.data()[k * 3 + j] * h0[j]).sum::<f64>() + net.b_y.data()[k])
        .collect();
    for (a, b) in tr.logits.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn lstm_freeze_zeroes_gate_gradients_only() {
    let mut net = LstmClassifier::new(3, 4, 3, 6);
    let x = randn(&[5, 3], 15);
    let (_, free) = net.loss_and_grads(&x, 2).unwrap();
    net.freeze_gate_weights();
    let (_, frozen) = net.loss_and_grads(&x, 2).unwrap();
    for ((name, _), (g0, g1)) in net.trainable().iter().zip(free.iter().zip(&frozen)) {
        if GATE_WEIGHTS.contains(&name.as_str()) {
            assert!(g1.data().iter().all(|&v| v == 0.0), "{name}");
            assert!(g0.data().iter().any(|&v| v != 0.0), "{name}");
        } else {
            assert_eq!(g0, g1, "{name}");
        }
    }
}

#[test]
fn lstm_bptt_sees_every_step() {
    let net = LstmClassifier::new(3, 4, 3, 7);
    let x = randn(&[5, 3], 16);
    let mut twice = x.data().to_vec();
    twice.extend_from_slice(x.data());
    let (_, g1) = net.loss_and_grads(&x, 1).unwrap();
    let (_, g2) = net.loss_and_grads(&t(&[10, 3], &twice), 1).unwrap();
    assert_ne!(g1, g2);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut net = ConvTimeNetLite::new(4, 3, 0.5, 8).unwrap();
    let x = randn(&[16, 4, 3], 17);
    let y: Vec<usize> = (0..16).map(|i| i % 3).collect();
    train_convnet(&mut net, &x, &y, &NetConfig { epochs: 3, batch_size: 8, lr: 1e-3, ..Default::default() }, 1).unwrap();
    let path = save_checkpoint(&net, dir.path(), "conv").unwrap();
    let back: ConvTimeNetLite = load_checkpoint(&path).unwrap();
    assert_eq!(back, net);
    let (a, b) = (net.forward_eval(&x).unwrap(), back.forward_eval(&x).unwrap());
    assert!(a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits()));

    let mut lstm = LstmClassifier::new(3, 5, 3, 9);
    lstm.freeze_gate_weights();
    let path = save_checkpoint(&lstm, dir.path(), "lstm").unwrap();
    let back: LstmClassifier = load_checkpoint(&path).unwrap();
    assert_eq!(back, lstm);

    let raw = [0.1, -0.0, f64::MIN_POSITIVE, 1e308, -3.5];
    let dec = decode_f64_le(&encode_f64_le(&raw)).unwrap();
    assert!(raw.iter().zip(&dec).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(decode_f64_le(&[0u8; 7]).is_err());
}

#[test]
fn checkpoint_rejects_wrong_version() {
    let dir = tempfile::tempdir().unwrap();
    let lstm = LstmClassifier::new(2, 2, 3, 1);
    let path = save_checkpoint(&lstm, dir.path(), "m").unwrap();
    let text = std::fs::read_to_string(&path).unwrap().replace("\"format_version\": 1", "\"format_version\": 99");
    std::fs::write(&path, text).unwrap();
    assert!(matches!(load_checkpoint::<LstmClassifier>(&path), Err(NeuralError::Checkpoint(_))));
}

/// Three well separated Gaussian clusters in `c` dimensions.
fn separable(n: usize, c: usize, s: u64) -> (Tensor, Vec<usize>) {
    let mut rng = seed::rng(s);
    let normal = Normal::new(0.0, 0.5).unwrap();
    let mut data = Vec::with_capacity(n * c);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..3usize);
        for j in 0..c {
            let centre = if j % 3 == k { 3.0 } else { 0.0 };
            data.push(centre + normal.sample(&mut rng));
        }
        y.push(k);
    }
    (t(&[n, c, 1], &data), y)
}

#[test]
fn convnet_learns_separable_data() {
    let (x, y) = separable(3000, 6, 21);
    let mut net = ConvTimeNetLite::new(6, 3, 0.5, 21).unwrap();
    let cfg = NetConfig { lr: 1e-3, ..Default::default() };
    let mut trainer = ConvTrainer::new(&cfg, 21);
    let mut best = 0.0;
    for _ in 0..cfg.epochs {
        trainer.epoch(&mut net, &x, &y).unwrap();
        let pred = predict_convnet(&net, &x).unwrap();
        best = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
        if best >= 0.95 {
            break;
        }
    }
    assert!(best >= 0.95, "training accuracy {best}");
}

#[test]
fn label_encoding_round_trips() {
    for l in -1..=1i8 {
        assert_eq!(decode_label(encode_label(l).unwrap()), l);
    }
    assert!(encode_label(2).is_err());
}

#[test]
fn windows_front_pad_with_first_row() {
    let x = tsclass::Matrix::from_rows(&[vec![1.0, 10.0], vec![2.0, 20.0], vec![3.0, 30.0]]);
    let w = windows_to_tensor(&x, 2);
    assert_eq!(w.shape(), &[3, 2, 2]);
    assert_eq!(&w.data()[..4], &[1.0, 1.0, 10.0, 10.0]);
    assert_eq!(&w.data()[8..], &[2.0, 3.0, 20.0, 30.0]);
    let s = windows_to_sequences(&x, 2);
    assert_eq!(s[2].data(), &[2.0, 20.0, 3.0, 30.0]);
}
