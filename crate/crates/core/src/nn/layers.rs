//! Parameterised layers. Each layer owns [`ParamId`]s into a model's
//! [`ParamSet`] and records its forward computation on a [`Graph`].

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::graph::{Graph, SetHandle, Var};
use crate::nn::tensor::{ParamId, ParamSet, Tensor};

/// Uniform Glorot initialisation for a `[rows, cols]` matrix.
pub fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Tensor::new(vec![rows, cols], values).expect("xavier shape")
}

fn lookup(params: &ParamSet, name: &str) -> Result<ParamId> {
    params
        .id(name)
        .ok_or_else(|| Error::Format(format!("missing parameter {name:?}")))
}

fn matrix_dims(params: &ParamSet, id: ParamId) -> Result<(usize, usize)> {
    match params.get(id).shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::Format(format!(
            "parameter {:?} must be 2-D, got {s:?}",
            params.name(id)
        ))),
    }
}

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let w = params.add(format!("{name}.weight"), xavier(out_dim, in_dim, rng))?;
        let b = params.add(format!("{name}.bias"), Tensor::zeros(vec![out_dim]))?;
        Ok(Linear {
            w,
            b,
            in_dim,
            out_dim,
        })
    }

    pub fn bind(params: &ParamSet, name: &str) -> Result<Self> {
        let w = lookup(params, &format!("{name}.weight"))?;
        let b = lookup(params, &format!("{name}.bias"))?;
        let (out_dim, in_dim) = matrix_dims(params, w)?;
        Ok(Linear {
            w,
            b,
            in_dim,
            out_dim,
        })
    }

    pub fn forward(&self, g: &mut Graph, h: SetHandle, x: Var) -> Result<Var> {
        g.affine(x, h.param(self.w), Some(h.param(self.b)))
    }
}

#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub rows: usize,
    pub dim: usize,
}

impl Embedding {
    /// Rows drawn uniformly from `±sqrt(3 / dim)` (unit total variance).
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        rows: usize,
        dim: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let limit = (3.0 / dim as f64).sqrt();
        let values = (0..rows * dim).map(|_| rng.gen_range(-limit..limit)).collect();
        Self::from_values(params, name, rows, dim, values)
    }

    pub fn from_values(
        params: &mut ParamSet,
        name: &str,
        rows: usize,
        dim: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let table = params.add(format!("{name}.table"), Tensor::new(vec![rows, dim], values)?)?;
        Ok(Embedding { table, rows, dim })
    }

    pub fn bind(params: &ParamSet, name: &str) -> Result<Self> {
        let table = lookup(params, &format!("{name}.table"))?;
        let (rows, dim) = matrix_dims(params, table)?;
        Ok(Embedding { table, rows, dim })
    }

    pub fn forward(&self, g: &mut Graph, h: SetHandle, row: usize) -> Result<Var> {
        g.gather(h.param(self.table), row)
    }
}

/// LSTM cell with gates stacked as `[input; forget; candidate; output]`,
/// weight `[4H, I + H]` applied to `[x; h_prev]`.
#[derive(Debug, Clone)]
pub struct LstmCell {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let w = params.add(format!("{name}.weight"), xavier(4 * hidden, input + hidden, rng))?;
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let b = params.add(format!("{name}.bias"), Tensor::vector(bias))?;
        Ok(LstmCell {
            w,
            b,
            input,
            hidden,
        })
    }

    pub fn bind(params: &ParamSet, name: &str) -> Result<Self> {
        let w = lookup(params, &format!("{name}.weight"))?;
        let b = lookup(params, &format!("{name}.bias"))?;
        let (rows, cols) = matrix_dims(params, w)?;
        if rows % 4 != 0 || cols < rows / 4 {
            return Err(Error::Format(format!("bad LSTM weight shape [{rows}, {cols}]")));
        }
        let hidden = rows / 4;
        Ok(LstmCell {
            w,
            b,
            input: cols - hidden,
            hidden,
        })
    }

    /// One step; returns `(h, c)`.
    pub fn step(
        &self,
        g: &mut Graph,
        h: SetHandle,
        x: Var,
        h_prev: Var,
        c_prev: Var,
    ) -> Result<(Var, Var)> {
        if g.len(x) != self.input || g.len(h_prev) != self.hidden || g.len(c_prev) != self.hidden {
            return Err(Error::Shape(format!(
                "LSTM cell (input {}, hidden {}) given x {}, h {}, c {}",
                self.input,
                self.hidden,
                g.len(x),
                g.len(h_prev),
                g.len(c_prev)
            )));
        }
        let hs = self.hidden;
        let xh = g.concat(&[x, h_prev]);
        let gates = g.affine(xh, h.param(self.w), Some(h.param(self.b)))?;
        let i = g.slice(gates, 0, hs)?;
        let f = g.slice(gates, hs, hs)?;
        let c_hat = g.slice(gates, 2 * hs, hs)?;
        let o = g.slice(gates, 3 * hs, hs)?;
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let c_hat = g.tanh(c_hat);
        let o = g.sigmoid(o);
        let keep = g.mul(f, c_prev)?;
        let write = g.mul(i, c_hat)?;
        let c = g.add(keep, write)?;
        let c_squashed = g.tanh(c);
        let h_new = g.mul(o, c_squashed)?;
        Ok((h_new, c))
    }

    /// Runs the cell over `seq` in order from zero state; returns the hidden
    /// states.
    pub fn run(&self, g: &mut Graph, h: SetHandle, seq: &[Var]) -> Result<Vec<Var>> {
        let mut hp = g.constant(vec![0.0; self.hidden]);
        let mut cp = g.constant(vec![0.0; self.hidden]);
        let mut out = Vec::with_capacity(seq.len());
        for &x in seq {
            let (hn, cn) = self.step(g, h, x, hp, cp)?;
            out.push(hn);
            hp = hn;
            cp = cn;
        }
        Ok(out)
    }
}

/// Bidirectional LSTM; output `t` is `[forward_t; backward_t]`.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub forward: LstmCell,
    pub backward: LstmCell,
}

impl BiLstm {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(BiLstm {
            forward: LstmCell::new(params, &format!("{name}.fwd"), input, hidden, rng)?,
            backward: LstmCell::new(params, &format!("{name}.bwd"), input, hidden, rng)?,
        })
    }

    pub fn bind(params: &ParamSet, name: &str) -> Result<Self> {
        Ok(BiLstm {
            forward: LstmCell::bind(params, &format!("{name}.fwd"))?,
            backward: LstmCell::bind(params, &format!("{name}.bwd"))?,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden + self.backward.hidden
    }

    pub fn forward(&self, g: &mut Graph, h: SetHandle, seq: &[Var]) -> Result<Vec<Var>> {
        if seq.is_empty() {
            return Err(Error::Input("BiLSTM over an empty sequence".into()));
        }
        let fwd = self.forward.run(g, h, seq)?;
        let rev: Vec<Var> = seq.iter().rev().copied().collect();
        let mut bwd = self.backward.run(g, h, &rev)?;
        bwd.reverse();
        Ok(fwd
            .into_iter()
            .zip(bwd)
            .map(|(f, b)| g.concat(&[f, b]))
            .collect())
    }
}

/// Width-`w` 1-D convolution over character vectors, zero padded so every
/// position yields a window, followed by max-pooling over positions and a
/// ReLU.
#[derive(Debug, Clone)]
pub struct CharCnn {
    pub w: ParamId,
    pub b: ParamId,
    pub in_dim: usize,
    pub filters: usize,
    pub width: usize,
}

impl CharCnn {
    pub fn new(
        params: &mut ParamSet,
        name: &str,
        in_dim: usize,
        filters: usize,
        width: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if width == 0 {
            return Err(Error::Config("convolution width must be positive".into()));
        }
        let w = params.add(format!("{name}.weight"), xavier(filters, width * in_dim, rng))?;
        let b = params.add(format!("{name}.bias"), Tensor::zeros(vec![filters]))?;
        Ok(CharCnn {
            w,
            b,
            in_dim,
            filters,
            width,
        })
    }

    pub fn bind(params: &ParamSet, name: &str, width: usize) -> Result<Self> {
        let w = lookup(params, &format!("{name}.weight"))?;
        let b = lookup(params, &format!("{name}.bias"))?;
        let (filters, cols) = matrix_dims(params, w)?;
        if width == 0 || cols % width != 0 {
            return Err(Error::Format(format!(
                "convolution weight with {cols} columns is not a multiple of width {width}"
            )));
        }
        Ok(CharCnn {
            w,
            b,
            in_dim: cols / width,
            filters,
            width,
        })
    }

    pub fn forward(&self, g: &mut Graph, h: SetHandle, chars: &[Var]) -> Result<Var> {
        if chars.is_empty() {
            return Err(Error::Input("character CNN over an empty token".into()));
        }
        if let Some(bad) = chars.iter().find(|&&c| g.len(c) != self.in_dim) {
            return Err(Error::Shape(format!(
                "character vector of length {} for CNN input width {}",
                g.len(*bad),
                self.in_dim
            )));
        }
        let left = (self.width - 1) / 2;
        let pad = g.constant(vec![0.0; self.in_dim]);
        let n = chars.len();
        let mut windows = Vec::with_capacity(n);
        for pos in 0..n {
            let parts: Vec<Var> = (0..self.width)
                .map(|k| {
                    (pos + k)
                        .checked_sub(left)
                        .filter(|&j| j < n)
                        .map_or(pad, |j| chars[j])
                })
                .collect();
            let window = g.concat(&parts);
            windows.push(g.affine(window, h.param(self.w), Some(h.param(self.b)))?);
        }
        let pooled = g.max_pool(&windows)?;
        Ok(g.relu(pooled))
    }
}

/// Inverted dropout.
#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Dropout { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Identity when `rng` is `None` (evaluation) or the rate is zero.
    pub fn apply<R: Rng>(&self, g: &mut Graph, x: Var, rng: Option<&mut R>) -> Result<Var> {
        match rng {
            Some(rng) if self.rate > 0.0 => {
                let mask = dropout_mask(g.len(x), self.rate, rng);
                g.mask_scale(x, mask)
            }
            _ => Ok(x),
        }
    }
}

pub(crate) fn dropout_mask(n: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}
