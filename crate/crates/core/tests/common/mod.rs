//! Shared oracles and the finite-difference gradient suite.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tcner::crf::{CrfParams, Emissions};
use tcner::ner::model::{char_vocab_for, tag_inventory, WordVocab};
use tcner::ner::{CaseVectorMode, NerDims, NerExample, NerModel, Scenario};
use tcner::nn::{
    gradient_check, BiLstm, CharCnn, Dropout, Embedding, GradCheckReport, Graph, Linear, LstmCell, ParamSet,
    Tensor, Var,
};
use tcner::truecaser::{CharVocab, TruecaserDims, TruecaserExample, TruecaserModel};
use tcner::Result;

pub const STEP: f64 = 1e-5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `y = W x + b` with plain loops.
pub fn linear_oracle(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let cols = x.len();
    (0..b.len())
        .map(|o| b[o] + (0..cols).map(|i| w[o * cols + i] * x[i]).sum::<f64>())
        .collect()
}

/// One LSTM step with gates `[i; f; g; o]` over `[x; h]`.
pub fn lstm_step_oracle(w: &[f64], b: &[f64], x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let hs = h.len();
    let xh: Vec<f64> = x.iter().chain(h).copied().collect();
    let z = linear_oracle(w, b, &xh);
    let mut h_new = vec![0.0; hs];
    let mut c_new = vec![0.0; hs];
    for k in 0..hs {
        let i = sigmoid(z[k]);
        let f = sigmoid(z[hs + k]);
        let g = z[2 * hs + k].tanh();
        let o = sigmoid(z[3 * hs + k]);
        c_new[k] = f * c[k] + i * g;
        h_new[k] = o * c_new[k].tanh();
    }
    (h_new, c_new)
}

pub fn lstm_run_oracle(w: &[f64], b: &[f64], hidden: usize, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut h = vec![0.0; hidden];
    let mut c = vec![0.0; hidden];
    seq.iter()
        .map(|x| {
            (h, c) = lstm_step_oracle(w, b, x, &h, &c);
            h.clone()
        })
        .collect()
}

/// Forward and time-reversed backward runs, concatenated per position.
pub fn bilstm_oracle(params: &ParamSet, layer: &BiLstm, seq: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let vals = |cell: &LstmCell| (params.get(cell.w).values().to_vec(), params.get(cell.b).values().to_vec());
    let (fw, fb) = vals(&layer.forward);
    let (bw, bb) = vals(&layer.backward);
    let fwd = lstm_run_oracle(&fw, &fb, layer.forward.hidden, seq);
    let rev: Vec<Vec<f64>> = seq.iter().rev().cloned().collect();
    let mut bwd = lstm_run_oracle(&bw, &bb, layer.backward.hidden, &rev);
    bwd.reverse();
    fwd.into_iter().zip(bwd).map(|(a, b)| a.into_iter().chain(b).collect()).collect()
}

/// Zero-padded windows centred with `(width - 1) / 2` positions on the
/// left, an affine map per window, max over positions, then ReLU.
pub fn char_cnn_oracle(w: &[f64], b: &[f64], width: usize, chars: &[Vec<f64>]) -> Vec<f64> {
    let d = chars[0].len();
    let left = (width - 1) / 2;
    let n = chars.len();
    let mut best = vec![f64::NEG_INFINITY; b.len()];
    for pos in 0..n {
        let mut window = Vec::with_capacity(width * d);
        for k in 0..width {
            let j = pos as isize + k as isize - left as isize;
            if j >= 0 && (j as usize) < n {
                window.extend_from_slice(&chars[j as usize]);
            } else {
                window.extend(std::iter::repeat_n(0.0, d));
            }
        }
        for (o, y) in linear_oracle(w, b, &window).into_iter().enumerate() {
            best[o] = best[o].max(y);
        }
    }
    best.into_iter().map(|v| v.max(0.0)).collect()
}

/// Projects `y` on a fixed random direction so every output entry carries
/// a distinct weight in the loss.
pub fn probe(g: &mut Graph, y: Var, seed: u64) -> Result<Var> {
    let r = random_vec(g.len(y), &mut rng(seed));
    let r = g.constant(r);
    let p = g.mul(y, r)?;
    Ok(g.sum(p))
}

pub struct SuiteEntry {
    pub name: &'static str,
    pub tolerance: f64,
    pub report: GradCheckReport,
}

impl SuiteEntry {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error() <= self.tolerance
    }
}

fn check(
    name: &'static str,
    tolerance: f64,
    params: &mut ParamSet,
    build: impl FnMut(&mut Graph, tcner::nn::SetHandle) -> Result<Var>,
) -> Result<SuiteEntry> {
    check_with_step(name, tolerance, STEP, params, build)
}

fn check_with_step(
    name: &'static str,
    tolerance: f64,
    step: f64,
    params: &mut ParamSet,
    mut build: impl FnMut(&mut Graph, tcner::nn::SetHandle) -> Result<Var>,
) -> Result<SuiteEntry> {
    let report = gradient_check(params, step, |p| {
        let mut g = Graph::new();
        let h = g.register(p);
        let loss = build(&mut g, h)?;
        Ok((g.scalar(loss), g.backward(loss)?, h))
    })?;
    Ok(SuiteEntry { name, tolerance, report })
}

fn inputs(g: &mut Graph, n: usize, dim: usize, seed: u64) -> Vec<Var> {
    let mut r = rng(seed);
    (0..n).map(|_| g.constant(random_vec(dim, &mut r))).collect()
}

pub fn tiny_truecaser(seed: u64, dropout: f64) -> TruecaserModel {
    let dims = TruecaserDims { char_dim: 3, hidden: 3, dropout };
    TruecaserModel::new(CharVocab::from_chars("abn lw".chars()), dims, &mut rng(seed)).unwrap()
}

pub fn tiny_ner_data() -> Vec<NerExample> {
    let mk = |t: &[&str], g: &[&str]| {
        NerExample::new(t.iter().map(|s| s.to_string()).collect(), g.iter().map(|s| s.to_string()).collect())
            .unwrap()
    };
    vec![
        mk(&["Alan", "met", "Bo", "Lee"], &["B-PER", "O", "B-PER", "I-PER"]),
        mk(&["in", "Oslo"], &["O", "B-LOC"]),
    ]
}

pub fn tiny_ner(mode: CaseVectorMode, dropout: f64) -> NerModel {
    let data = tiny_ner_data();
    let dims = NerDims { word_dim: 3, char_dim: 2, cnn_filters: 3, cnn_width: 3, hidden: 2, dropout };
    let tc = (mode == CaseVectorMode::Predicted).then(|| tiny_truecaser(8, 0.0));
    NerModel::new(
        tag_inventory(&data),
        WordVocab::from_examples(&data, 1),
        char_vocab_for(&data, Scenario::Cased),
        dims,
        mode,
        Scenario::Cased,
        None,
        tc,
        &mut rng(9),
    )
    .unwrap()
}

/// Every layer and both model stacks against central differences. Affine
/// maps must agree to 1e-6, everything else to 1e-4.
pub fn gradient_suite() -> Result<Vec<SuiteEntry>> {
    let mut out = Vec::new();
    let mut r = rng(42);

    let mut p = ParamSet::new();
    let lin = Linear::new(&mut p, "lin", 4, 3, &mut r)?;
    out.push(check("affine", 1e-6, &mut p, |g, h| {
        let x = inputs(g, 1, 4, 1)[0];
        let y = lin.forward(g, h, x)?;
        probe(g, y, 2)
    })?);

    let mut p = ParamSet::new();
    let emb = Embedding::new(&mut p, "emb", 5, 3, &mut r)?;
    let lin = Linear::new(&mut p, "lin", 3, 2, &mut r)?;
    out.push(check("embedding", 1e-4, &mut p, |g, h| {
        let a = emb.forward(g, h, 1)?;
        let b = emb.forward(g, h, 3)?;
        let s = g.add(a, b)?;
        let t = g.tanh(s);
        let y = lin.forward(g, h, t)?;
        probe(g, y, 3)
    })?);

    let mut p = ParamSet::new();
    let cell = LstmCell::new(&mut p, "cell", 3, 4, &mut r)?;
    out.push(check("lstm", 1e-4, &mut p, |g, h| {
        let xs = inputs(g, 3, 3, 4);
        let hs = cell.run(g, h, &xs)?;
        let all = g.concat(&hs);
        probe(g, all, 5)
    })?);

    let mut p = ParamSet::new();
    let bi = BiLstm::new(&mut p, "bi", 2, 3, &mut r)?;
    out.push(check("bilstm", 1e-4, &mut p, |g, h| {
        let xs = inputs(g, 4, 2, 6);
        let hs = bi.forward(g, h, &xs)?;
        let all = g.concat(&hs);
        probe(g, all, 7)
    })?);

    let mut p = ParamSet::new();
    let emb = Embedding::new(&mut p, "emb", 4, 3, &mut r)?;
    let cnn = CharCnn::new(&mut p, "cnn", 3, 5, 3, &mut r)?;
    out.push(check("char_cnn", 1e-4, &mut p, |g, h| {
        let cs = [0, 2, 1, 3, 2]
            .iter()
            .map(|&i| emb.forward(g, h, i))
            .collect::<Result<Vec<_>>>()?;
        let y = cnn.forward(g, h, &cs)?;
        probe(g, y, 8)
    })?);

    let mut p = ParamSet::new();
    let lin = Linear::new(&mut p, "lin", 3, 4, &mut r)?;
    let drop = Dropout::new(0.5)?;
    out.push(check("softmax_cross_entropy_dropout", 1e-4, &mut p, |g, h| {
        let x = inputs(g, 1, 3, 9)[0];
        let x = drop.apply(g, x, Some(&mut rng(10)))?;
        let y = lin.forward(g, h, x)?;
        let ce = g.cross_entropy(y, 2)?;
        let s = g.softmax(y)?;
        let ps = probe(g, s, 11)?;
        g.add(ce, ps)
    })?);

    let mut p = ParamSet::new();
    let lin = Linear::new(&mut p, "emit", 3, 4, &mut r)?;
    let t = p.add("crf.transitions", Tensor::matrix(4, 4, random_vec(16, &mut r))?)?;
    let s = p.add("crf.start", Tensor::vector(random_vec(4, &mut r)))?;
    let e = p.add("crf.end", Tensor::vector(random_vec(4, &mut r)))?;
    out.push(check("crf", 1e-4, &mut p, |g, h| {
        let xs = inputs(g, 5, 3, 12);
        let em = xs.iter().map(|&x| lin.forward(g, h, x)).collect::<Result<Vec<_>>>()?;
        g.crf_nll(&em, &[0, 2, 3, 3, 1], h.param(t), h.param(s), h.param(e))
    })?);

    let tc = tiny_truecaser(13, 0.25);
    let mut p = tc.params.clone();
    let example = TruecaserExample {
        chars: "alan  bw".chars().collect(),
        labels: "ULLLLLUL"
            .chars()
            .map(|c| if c == 'U' { tcner::truecaser::CaseLabel::Upper } else { tcner::truecaser::CaseLabel::Lower })
            .collect(),
    };
    out.push(check("truecaser_stack", 1e-4, &mut p, |g, h| tc.loss(g, h, &example, Some(&mut rng(14))))?);

    let short = TruecaserExample {
        chars: "abn".chars().collect(),
        labels: vec![
            tcner::truecaser::CaseLabel::Upper,
            tcner::truecaser::CaseLabel::Lower,
            tcner::truecaser::CaseLabel::Upper,
        ],
    };
    let mut p = tc.params.clone();
    out.push(check_with_step("truecaser_3char", 1e-4, 1e-4, &mut p, |g, h| {
        tc.loss(g, h, &short, Some(&mut rng(16)))
    })?);

    for (name, mode) in [("ner_stack", CaseVectorMode::None), ("ner_stack_gold", CaseVectorMode::Gold)] {
        let model = tiny_ner(mode, 0.25);
        let mut p = model.params.clone();
        let ex = &tiny_ner_data()[0];
        let gold: Vec<usize> = ex.tags.iter().map(|t| model.tag_id(t).unwrap()).collect();
        let case = model.case_vectors(&ex.tokens)?;
        out.push(check(name, 1e-4, &mut p, |g, h| {
            let case_vars = case.as_ref().map(|c| {
                c.iter()
                    .map(|tok| tok.iter().map(|d| g.constant(d.as_array().to_vec())).collect::<Vec<_>>())
                    .collect::<Vec<_>>()
            });
            let em = model.emissions(g, h, &ex.tokens, case_vars.as_deref(), Some(&mut rng(15)))?;
            model.crf_nll(g, h, &em, &gold)
        })?);
    }
    Ok(out)
}

/// Random emissions and CRF parameters with values in [-2, 2].
pub fn random_crf(len: usize, tags: usize, rng: &mut impl Rng) -> (Emissions, CrfParams) {
    let mut v = |n| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect::<Vec<f64>>();
    let em = Emissions::new(len, tags, v(len * tags)).unwrap();
    let params = CrfParams::new(tags, v(tags * tags), v(tags), v(tags)).unwrap();
    (em, params)
}

/// Log partition and best path score by walking every tag sequence.
pub fn enumerate_crf(em: &Emissions, params: &CrfParams) -> (f64, f64) {
    let (l, t) = (em.len(), em.num_tags());
    let mut scores = Vec::with_capacity(t.pow(l as u32));
    let mut path = vec![0usize; l];
    loop {
        let mut s = params.start[path[0]] + params.end[path[l - 1]];
        for i in 0..l {
            s += em.row(i)[path[i]];
            if i > 0 {
                s += params.transitions[path[i - 1] * t + path[i]];
            }
        }
        scores.push(s);
        let mut k = l;
        loop {
            if k == 0 {
                let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
                return (z, m);
            }
            k -= 1;
            path[k] += 1;
            if path[k] < t {
                break;
            }
            path[k] = 0;
        }
    }
}
