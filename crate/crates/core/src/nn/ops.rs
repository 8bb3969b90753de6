//! Tensor-level entry points for the layers, evaluated without keeping a
//! tape. Useful for inference and for checking layers in isolation.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::graph::{self, Graph};
use crate::nn::layers::{dropout_mask, BiLstm, CharCnn, LstmCell};
use crate::nn::tensor::{ParamSet, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// `y = W x + b`.
pub fn linear_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (rows, cols) = match w.shape() {
        [r, c] => (*r, *c),
        s => return Err(Error::Shape(format!("weight must be 2-D, got {s:?}"))),
    };
    if x.len() != cols || b.len() != rows {
        return Err(Error::Shape(format!(
            "weight {:?} with input {:?} and bias {:?}",
            w.shape(),
            x.shape(),
            b.shape()
        )));
    }
    let wv = w.values();
    let y = (0..rows)
        .map(|o| b.values()[o] + graph::dot(&wv[o * cols..(o + 1) * cols], x.values()))
        .collect();
    Ok(Tensor::vector(y))
}

pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    graph::softmax_values(logits.values()).map(Tensor::vector)
}

pub fn lstm_cell_step(
    x: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    params: &ParamSet,
    cell: &LstmCell,
) -> Result<(Tensor, Tensor)> {
    let mut g = Graph::new();
    let s = g.register(params);
    let x = g.constant(x.values().to_vec());
    let hp = g.constant(h_prev.values().to_vec());
    let cp = g.constant(c_prev.values().to_vec());
    let (h, c) = cell.step(&mut g, s, x, hp, cp)?;
    Ok((
        Tensor::vector(g.value(h).to_vec()),
        Tensor::vector(g.value(c).to_vec()),
    ))
}

pub fn bilstm_forward(seq: &[Tensor], params: &ParamSet, layer: &BiLstm) -> Result<Vec<Tensor>> {
    let mut g = Graph::new();
    let s = g.register(params);
    let inputs: Vec<_> = seq.iter().map(|t| g.constant(t.values().to_vec())).collect();
    let out = layer.forward(&mut g, s, &inputs)?;
    Ok(out.into_iter().map(|v| Tensor::vector(g.value(v).to_vec())).collect())
}

pub fn char_cnn_forward(chars: &[Tensor], params: &ParamSet, cnn: &CharCnn) -> Result<Tensor> {
    let mut g = Graph::new();
    let s = g.register(params);
    let inputs: Vec<_> = chars.iter().map(|t| g.constant(t.values().to_vec())).collect();
    let out = cnn.forward(&mut g, s, &inputs)?;
    Ok(Tensor::vector(g.value(out).to_vec()))
}

/// Inverted dropout: in training, zero each element with probability `rate`
/// and scale survivors by `1 / (1 - rate)`.
pub fn dropout(x: &Tensor, rate: f64, mode: Mode, rng: &mut impl Rng) -> Result<Tensor> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.len(), rate, rng);
    let values = x.values().iter().zip(mask).map(|(v, m)| v * m).collect();
    Tensor::new(x.shape().to_vec(), values)
}
