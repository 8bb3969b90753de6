mod common;

use common::*;
use tcner::nn::ops::{self, Mode};
use tcner::nn::{Adam, AdamConfig, BiLstm, CharCnn, Linear, LstmCell, ParamSet, Tensor};
use tcner::truecaser::{CharVocab, TruecaserDims, TruecaserModel};

fn close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol, "{x} vs {y}");
    }
}

#[test]
fn linear_matches_loop() {
    let mut r = rng(1);
    let mut p = ParamSet::new();
    let lin = Linear::new(&mut p, "l", 5, 3, &mut r).unwrap();
    let b = random_vec(3, &mut r);
    p.get_mut(lin.b).values_mut().copy_from_slice(&b);
    let x = random_vec(5, &mut r);
    let y = ops::linear_forward(&Tensor::vector(x.clone()), p.get(lin.w), p.get(lin.b)).unwrap();
    close(y.values(), &linear_oracle(p.get(lin.w).values(), &b, &x), 1e-12);
}

#[test]
fn linear_known_values() {
    let w = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let b = Tensor::vector(vec![0.5, -0.5]);
    let y = ops::linear_forward(&Tensor::vector(vec![1.0, -1.0]), &w, &b).unwrap();
    assert_eq!(y.values(), &[-0.5, -1.5]);
    assert!(ops::linear_forward(&Tensor::vector(vec![1.0]), &w, &b).is_err());
}

#[test]
fn lstm_step_matches_loop() {
    let mut r = rng(2);
    let mut p = ParamSet::new();
    let cell = LstmCell::new(&mut p, "c", 3, 4, &mut r).unwrap();
    let bias = random_vec(16, &mut r);
    p.get_mut(cell.b).values_mut().copy_from_slice(&bias);
    let (x, h, c) = (random_vec(3, &mut r), random_vec(4, &mut r), random_vec(4, &mut r));
    let (h1, c1) = ops::lstm_cell_step(
        &Tensor::vector(x.clone()),
        &Tensor::vector(h.clone()),
        &Tensor::vector(c.clone()),
        &p,
        &cell,
    )
    .unwrap();
    let (eh, ec) = lstm_step_oracle(p.get(cell.w).values(), &bias, &x, &h, &c);
    close(h1.values(), &eh, 1e-12);
    close(c1.values(), &ec, 1e-12);
}

#[test]
fn lstm_forget_bias_starts_at_one() {
    let mut p = ParamSet::new();
    let cell = LstmCell::new(&mut p, "c", 2, 3, &mut rng(3)).unwrap();
    let b = p.get(cell.b).values();
    assert_eq!(&b[3..6], &[1.0, 1.0, 1.0]);
    assert!(b[..3].iter().chain(&b[6..]).all(|&v| v == 0.0));
}

#[test]
fn bilstm_matches_loop() {
    let mut r = rng(4);
    let mut p = ParamSet::new();
    let bi = BiLstm::new(&mut p, "b", 2, 3, &mut r).unwrap();
    let seq: Vec<Vec<f64>> = (0..5).map(|_| random_vec(2, &mut r)).collect();
    let tensors: Vec<Tensor> = seq.iter().map(|v| Tensor::vector(v.clone())).collect();
    let out = ops::bilstm_forward(&tensors, &p, &bi).unwrap();
    let expected = bilstm_oracle(&p, &bi, &seq);
    assert_eq!(out.len(), 5);
    for (o, e) in out.iter().zip(&expected) {
        assert_eq!(o.len(), 6);
        close(o.values(), e, 1e-12);
    }
}

#[test]
fn char_cnn_matches_loop() {
    let mut r = rng(5);
    for width in [1, 2, 3, 4] {
        let mut p = ParamSet::new();
        let cnn = CharCnn::new(&mut p, "cnn", 3, 4, width, &mut r).unwrap();
        let b = random_vec(4, &mut r);
        p.get_mut(cnn.b).values_mut().copy_from_slice(&b);
        for n in [1, 2, 6] {
            let chars: Vec<Vec<f64>> = (0..n).map(|_| random_vec(3, &mut r)).collect();
            let ts: Vec<Tensor> = chars.iter().map(|v| Tensor::vector(v.clone())).collect();
            let y = ops::char_cnn_forward(&ts, &p, &cnn).unwrap();
            close(y.values(), &char_cnn_oracle(p.get(cnn.w).values(), &b, width, &chars), 1e-12);
        }
    }
}

#[test]
fn softmax_is_stable_and_normalised() {
    let s = ops::softmax(&Tensor::vector(vec![1000.0, 1000.0])).unwrap();
    assert_eq!(s.values(), &[0.5, 0.5]);
    let s = ops::softmax(&Tensor::vector(vec![0.0, 2f64.ln()])).unwrap();
    close(s.values(), &[1.0 / 3.0, 2.0 / 3.0], 1e-15);
    assert!(ops::softmax(&Tensor::vector(vec![f64::NAN, 0.0])).is_err());
}

#[test]
fn dropout_statistics() {
    let n = 1_000_000;
    let x = Tensor::vector(vec![1.0; n]);
    let y = ops::dropout(&x, 0.25, Mode::Train, &mut rng(1)).unwrap();
    let zeros = y.values().iter().filter(|&&v| v == 0.0).count();
    let frac = zeros as f64 / n as f64;
    // five standard deviations of a Bernoulli(0.25) mean over 10^6 draws
    let sd = (0.25f64 * 0.75 / n as f64).sqrt();
    assert!((frac - 0.25).abs() < 5.0 * sd, "dropped fraction {frac}");
    assert!(y.values().iter().all(|&v| v == 0.0 || v == 1.0 / 0.75));
    let mean = y.values().iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 5.0 * sd / 0.75, "mean {mean}");
    let e = ops::dropout(&x, 0.25, Mode::Eval, &mut rng(1)).unwrap();
    assert_eq!(e, x);
    assert!(ops::dropout(&x, 1.0, Mode::Train, &mut rng(1)).is_err());
}

#[test]
fn adam_two_step_trace() {
    let mut p = ParamSet::new();
    let id = p.add("w", Tensor::vector(vec![1.0, -2.0])).unwrap();
    let cfg = AdamConfig::default();
    let mut adam = Adam::new(cfg, &p);
    let grads = [[0.5, -1.0], [-0.25, 3.0]];
    let (b1, b2, lr, eps) = (0.9f64, 0.999f64, 1e-3, 1e-8);
    let mut theta = [1.0f64, -2.0];
    let mut m = [0.0f64; 2];
    let mut v = [0.0f64; 2];
    for (t, g) in grads.iter().enumerate() {
        p.get_mut(id).set_grad(Some(g.to_vec()));
        adam.step(&mut p).unwrap();
        let t = t as i32 + 1;
        for j in 0..2 {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            let mh = m[j] / (1.0 - b1.powi(t));
            let vh = v[j] / (1.0 - b2.powi(t));
            theta[j] -= lr * mh / (vh.sqrt() + eps);
        }
        close(p.get(id).values(), &theta, 1e-15);
        close(adam.first_moment(0), &m, 1e-15);
        close(adam.second_moment(0), &v, 1e-15);
    }
}

#[test]
fn adam_first_step_is_lr_sized() {
    let mut p = ParamSet::new();
    let id = p.add("w", Tensor::vector(vec![1.0])).unwrap();
    let mut adam = Adam::new(AdamConfig::default(), &p);
    p.get_mut(id).set_grad(Some(vec![0.5]));
    adam.step(&mut p).unwrap();
    // m̂ = 0.5, v̂ = 0.25, so the step is 1e-3 * 0.5 / (0.5 + 1e-8)
    let expected = 1.0 - 1e-3 * 0.5 / (0.5 + 1e-8);
    assert_eq!(p.get(id).values()[0], expected);
}

/// A one-unit truecaser over the vocabulary {a} with every weight set by
/// hand, checked against the closed-form chain of sigmoids and tanh.
#[test]
fn hand_set_truecaser_forward() {
    let dims = TruecaserDims { char_dim: 1, hidden: 1, dropout: 0.0 };
    let mut tc = TruecaserModel::new(CharVocab::from_chars(['a']), dims, &mut rng(1)).unwrap();
    let set = |tc: &mut TruecaserModel, name: &str, v: &[f64]| {
        let id = tc.params.id(name).unwrap();
        tc.params.get_mut(id).values_mut().copy_from_slice(v);
    };
    let e = 0.7;
    set(&mut tc, "char_embedding.table", &[-0.3, e]);
    // rows: i, f, g, o; columns: x, h
    let fw = [0.5, -0.2, 0.3, 0.1, -0.4, 0.6, 0.8, 0.2];
    let fb = [0.1, 1.0, -0.1, 0.05];
    let bw = [-0.6, 0.3, 0.2, 0.4, 0.9, -0.5, 0.3, 0.7];
    let bb = [0.0, 1.0, 0.2, -0.3];
    set(&mut tc, "encoder.fwd.weight", &fw);
    set(&mut tc, "encoder.fwd.bias", &fb);
    set(&mut tc, "encoder.bwd.weight", &bw);
    set(&mut tc, "encoder.bwd.bias", &bb);
    let wo = [1.5, -0.5, -1.0, 0.25];
    let bo = [0.2, -0.1];
    set(&mut tc, "output.weight", &wo);
    set(&mut tc, "output.bias", &bo);

    let step = |w: &[f64], b: &[f64], x: f64, h: f64, c: f64| {
        let z = |k: usize| w[2 * k] * x + w[2 * k + 1] * h + b[k];
        let c2 = sigmoid(z(1)) * c + sigmoid(z(0)) * z(2).tanh();
        (sigmoid(z(3)) * c2.tanh(), c2)
    };
    let dist = |hf: f64, hb: f64| {
        let l0 = wo[0] * hf + wo[1] * hb + bo[0];
        let l1 = wo[2] * hf + wo[3] * hb + bo[1];
        1.0 / (1.0 + (l1 - l0).exp())
    };

    let (hf, _) = step(&fw, &fb, e, 0.0, 0.0);
    let (hb, _) = step(&bw, &bb, e, 0.0, 0.0);
    let d = tc.predict("a").unwrap();
    assert_eq!(d.len(), 1);
    assert!((d[0].p_upper - dist(hf, hb)).abs() < 1e-10);
    assert!((d[0].p_upper + d[0].p_lower - 1.0).abs() < 1e-12);

    // two characters: the forward cell carries state left to right and the
    // backward cell right to left
    let (hf1, cf1) = step(&fw, &fb, e, 0.0, 0.0);
    let (hf2, _) = step(&fw, &fb, e, hf1, cf1);
    let (hb2, cb2) = step(&bw, &bb, e, 0.0, 0.0);
    let (hb1, _) = step(&bw, &bb, e, hb2, cb2);
    let d = tc.predict("aa").unwrap();
    assert!((d[0].p_upper - dist(hf1, hb1)).abs() < 1e-10);
    assert!((d[1].p_upper - dist(hf2, hb2)).abs() < 1e-10);
}

#[test]
fn gradient_suite_passes() {
    for entry in gradient_suite().unwrap() {
        assert!(
            entry.passed(),
            "{}: max relative error {:e} (worst {:?})",
            entry.name,
            entry.report.max_rel_error(),
            entry.report.worst()
        );
    }
}
