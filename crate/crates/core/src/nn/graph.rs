//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation of one forward computation. Parameters
//! are not copied onto the tape: operations reference them through the
//! [`ParamSet`]s registered with the graph, and [`Graph::backward`] returns a
//! [`Gradients`] value that is then accumulated into those sets.
//!
//! Constants (inputs and [`Graph::detach`]ed values) never receive gradient,
//! and nothing upstream of a detached value is reached by backward.

use crate::crf::{self, CrfParams, Emissions};
use crate::error::{Error, Result};
use crate::nn::tensor::{ParamId, ParamSet};

/// Handle to a value recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// A [`ParamSet`] registered with a graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SetHandle(usize);

impl SetHandle {
    pub fn param(self, id: ParamId) -> PRef {
        PRef { set: self.0, id }
    }
}

/// A parameter of a registered set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PRef {
    set: usize,
    id: ParamId,
}

#[derive(Debug)]
enum Op {
    Constant,
    Affine { x: usize, w: PRef, b: Option<PRef> },
    Gather { table: PRef, row: usize },
    Concat(Vec<usize>),
    Slice { x: usize, start: usize },
    Add(usize, usize),
    Mul(usize, usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    MaskScale { x: usize, mask: Vec<f64> },
    Scale { x: usize, k: f64 },
    MaxPool { inputs: Vec<usize>, argmax: Vec<usize> },
    Softmax(usize),
    CrossEntropy { logits: usize, target: usize, probs: Vec<f64> },
    Sum(usize),
    AddN(Vec<usize>),
    Crf {
        emissions: Vec<usize>,
        transitions: PRef,
        start: PRef,
        end: PRef,
        grads: crf::CrfGrads,
    },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

/// Per-parameter gradients produced by [`Graph::backward`], one slot list per
/// registered set (in registration order).
#[derive(Debug, Clone, Default)]
pub struct Gradients {
    sets: Vec<Vec<Option<Vec<f64>>>>,
}

impl Gradients {
    pub fn get(&self, handle: SetHandle, id: ParamId) -> Option<&[f64]> {
        self.sets
            .get(handle.0)
            .and_then(|s| s.get(id.0))
            .and_then(|g| g.as_deref())
    }

    /// Adds this handle's gradients into the `grad` buffers of `params`.
    pub fn accumulate_into(&self, handle: SetHandle, params: &mut ParamSet) -> Result<()> {
        let Some(slots) = self.sets.get(handle.0) else {
            return Ok(());
        };
        if slots.len() != params.len() {
            return Err(Error::Usage(
                "gradients were computed for a different parameter set".into(),
            ));
        }
        for (i, g) in slots.iter().enumerate() {
            if let Some(g) = g {
                params.get_mut(ParamId(i)).accumulate_grad(g)?;
            }
        }
        Ok(())
    }

    /// Whether any parameter of `handle` received a gradient.
    pub fn touches(&self, handle: SetHandle) -> bool {
        self.sets
            .get(handle.0)
            .is_some_and(|s| s.iter().any(Option::is_some))
    }

    fn slot(&mut self, p: PRef, len: usize) -> &mut [f64] {
        self.sets[p.set][p.id.0].get_or_insert_with(|| vec![0.0; len])
    }
}

pub struct Graph<'p> {
    sets: Vec<&'p ParamSet>,
    nodes: Vec<Node>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Graph {
            sets: Vec::new(),
            nodes: Vec::new(),
        }
    }

    pub fn register(&mut self, params: &'p ParamSet) -> SetHandle {
        self.sets.push(params);
        SetHandle(self.sets.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub fn len(&self, v: Var) -> usize {
        self.nodes[v.0].value.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn param(&self, p: PRef) -> &'p crate::nn::Tensor {
        self.sets[p.set].get(p.id)
    }

    fn push(&mut self, value: Vec<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, i: usize) -> bool {
        self.nodes[i].needs_grad
    }

    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// Copies `v` into a new constant. Backward stops here.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    /// `W x + b` with `W` of shape `[out, in]`.
    pub fn affine(&mut self, x: Var, w: PRef, b: Option<PRef>) -> Result<Var> {
        let wt = self.param(w);
        let (rows, cols) = match wt.shape() {
            [r, c] => (*r, *c),
            s => return Err(Error::Shape(format!("affine weight must be 2-D, got {s:?}"))),
        };
        let xv = &self.nodes[x.0].value;
        if xv.len() != cols {
            return Err(Error::Shape(format!(
                "affine weight [{rows}, {cols}] applied to input of length {}",
                xv.len()
            )));
        }
        let mut out = match b {
            Some(b) => {
                let bt = self.param(b);
                if bt.len() != rows {
                    return Err(Error::Shape(format!(
                        "bias of length {} for affine output {rows}",
                        bt.len()
                    )));
                }
                bt.values().to_vec()
            }
            None => vec![0.0; rows],
        };
        let wv = wt.values();
        for (o, y) in out.iter_mut().enumerate() {
            *y += dot(&wv[o * cols..(o + 1) * cols], xv);
        }
        Ok(self.push(out, Op::Affine { x: x.0, w, b }, true))
    }

    /// Row `row` of an embedding matrix `[rows, dim]`.
    pub fn gather(&mut self, table: PRef, row: usize) -> Result<Var> {
        let t = self.param(table);
        let (rows, dim) = match t.shape() {
            [r, d] => (*r, *d),
            s => return Err(Error::Shape(format!("embedding table must be 2-D, got {s:?}"))),
        };
        if row >= rows {
            return Err(Error::Input(format!("embedding row {row} out of range {rows}")));
        }
        let value = t.values()[row * dim..(row + 1) * dim].to_vec();
        Ok(self.push(value, Op::Gather { table, row }, true))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let total = parts.iter().map(|v| self.nodes[v.0].value.len()).sum();
        let mut value = Vec::with_capacity(total);
        for v in parts {
            value.extend_from_slice(&self.nodes[v.0].value);
        }
        let needs = parts.iter().any(|v| self.ng(v.0));
        self.push(value, Op::Concat(parts.iter().map(|v| v.0).collect()), needs)
    }

    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = &self.nodes[x.0].value;
        if start + len > xv.len() {
            return Err(Error::Shape(format!(
                "slice {start}..{} of length {}",
                start + len,
                xv.len()
            )));
        }
        let value = xv[start..start + len].to_vec();
        let needs = self.ng(x.0);
        Ok(self.push(value, Op::Slice { x: x.0, start }, needs))
    }

    fn check_same(&self, a: Var, b: Var, what: &str) -> Result<()> {
        let (la, lb) = (self.len(a), self.len(b));
        if la != lb {
            return Err(Error::Shape(format!("{what} of lengths {la} and {lb}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "add")?;
        let value = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x + y);
        let needs = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(value, Op::Add(a.0, b.0), needs))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "mul")?;
        let value = zip_map(&self.nodes[a.0].value, &self.nodes[b.0].value, |x, y| x * y);
        let needs = self.ng(a.0) || self.ng(b.0);
        Ok(self.push(value, Op::Mul(a.0, b.0), needs))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.iter().map(|&v| sigmoid(v)).collect();
        let needs = self.ng(x.0);
        self.push(value, Op::Sigmoid(x.0), needs)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.iter().map(|v| v.tanh()).collect();
        let needs = self.ng(x.0);
        self.push(value, Op::Tanh(x.0), needs)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.nodes[x.0].value.iter().map(|&v| v.max(0.0)).collect();
        let needs = self.ng(x.0);
        self.push(value, Op::Relu(x.0), needs)
    }

    /// Elementwise product with a constant mask (used by dropout).
    pub fn mask_scale(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        if mask.len() != self.len(x) {
            return Err(Error::Shape(format!(
                "mask of length {} for value of length {}",
                mask.len(),
                self.len(x)
            )));
        }
        let value = zip_map(&self.nodes[x.0].value, &mask, |a, m| a * m);
        let needs = self.ng(x.0);
        Ok(self.push(value, Op::MaskScale { x: x.0, mask }, needs))
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let value = self.nodes[x.0].value.iter().map(|v| v * k).collect();
        let needs = self.ng(x.0);
        self.push(value, Op::Scale { x: x.0, k }, needs)
    }

    /// Elementwise maximum over equally sized inputs. Ties go to the earliest
    /// input.
    pub fn max_pool(&mut self, inputs: &[Var]) -> Result<Var> {
        let first = *inputs
            .first()
            .ok_or_else(|| Error::Input("max_pool over no inputs".into()))?;
        let n = self.len(first);
        let mut value = self.nodes[first.0].value.clone();
        let mut argmax = vec![0usize; n];
        for (k, v) in inputs.iter().enumerate().skip(1) {
            self.check_same(first, *v, "max_pool")?;
            for (j, x) in self.nodes[v.0].value.iter().enumerate() {
                if *x > value[j] {
                    value[j] = *x;
                    argmax[j] = k;
                }
            }
        }
        let needs = inputs.iter().any(|v| self.ng(v.0));
        let inputs = inputs.iter().map(|v| v.0).collect();
        Ok(self.push(value, Op::MaxPool { inputs, argmax }, needs))
    }

    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let value = softmax_values(&self.nodes[x.0].value)?;
        let needs = self.ng(x.0);
        Ok(self.push(value, Op::Softmax(x.0), needs))
    }

    /// `-log softmax(logits)[target]` as a scalar.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let lv = &self.nodes[logits.0].value;
        if target >= lv.len() {
            return Err(Error::Input(format!(
                "target class {target} out of range {}",
                lv.len()
            )));
        }
        let probs = softmax_values(lv)?;
        let m = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + lv.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let loss = lse - lv[target];
        let needs = self.ng(logits.0);
        Ok(self.push(
            vec![loss],
            Op::CrossEntropy {
                logits: logits.0,
                target,
                probs,
            },
            needs,
        ))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.iter().sum();
        let needs = self.ng(x.0);
        self.push(vec![s], Op::Sum(x.0), needs)
    }

    /// Elementwise sum of equally sized values.
    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs
            .first()
            .ok_or_else(|| Error::Input("add_n over no inputs".into()))?;
        let mut value = self.nodes[first.0].value.clone();
        for v in &xs[1..] {
            self.check_same(first, *v, "add_n")?;
            value
                .iter_mut()
                .zip(&self.nodes[v.0].value)
                .for_each(|(a, b)| *a += b);
        }
        let needs = xs.iter().any(|v| self.ng(v.0));
        Ok(self.push(value, Op::AddN(xs.iter().map(|v| v.0).collect()), needs))
    }

    /// Linear-chain CRF negative log-likelihood of `gold` given one emission
    /// vector per position and the transition/start/end parameters.
    pub fn crf_nll(
        &mut self,
        emissions: &[Var],
        gold: &[usize],
        transitions: PRef,
        start: PRef,
        end: PRef,
    ) -> Result<Var> {
        let num_tags = self.param(start).len();
        let mut scores = Vec::with_capacity(emissions.len() * num_tags);
        for e in emissions {
            let ev = &self.nodes[e.0].value;
            if ev.len() != num_tags {
                return Err(Error::Shape(format!(
                    "emission row of length {} for {num_tags} tags",
                    ev.len()
                )));
            }
            scores.extend_from_slice(ev);
        }
        let em = Emissions::new(emissions.len(), num_tags, scores)?;
        let params = CrfParams::new(
            num_tags,
            self.param(transitions).values().to_vec(),
            self.param(start).values().to_vec(),
            self.param(end).values().to_vec(),
        )?;
        let (loss, grads) = crf::nll_with_grads(&em, gold, &params)?;
        Ok(self.push(
            vec![loss],
            Op::Crf {
                emissions: emissions.iter().map(|v| v.0).collect(),
                transitions,
                start,
                end,
                grads,
            },
            true,
        ))
    }

    /// Reverse-mode pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got {} values",
                self.nodes[loss.0].value.len()
            )));
        }
        let mut grads = Gradients {
            sets: self.sets.iter().map(|s| vec![None; s.len()]).collect(),
        };
        let mut node_grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        node_grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = node_grads[i].take() else {
                continue;
            };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Affine { x, w, b } => {
                    let wt = self.param(*w);
                    let cols = wt.shape()[1];
                    let xv = &self.nodes[*x].value;
                    if self.nodes[*x].needs_grad {
                        let gx = acc(&mut node_grads, *x, cols);
                        let wv = wt.values();
                        for (o, &go) in g.iter().enumerate() {
                            if go != 0.0 {
                                axpy(gx, go, &wv[o * cols..(o + 1) * cols]);
                            }
                        }
                    }
                    let gw = grads.slot(*w, wt.len());
                    for (o, &go) in g.iter().enumerate() {
                        if go != 0.0 {
                            axpy(&mut gw[o * cols..(o + 1) * cols], go, xv);
                        }
                    }
                    if let Some(b) = b {
                        let gb = grads.slot(*b, g.len());
                        axpy(gb, 1.0, &g);
                    }
                }
                Op::Gather { table, row } => {
                    let t = self.param(*table);
                    let dim = t.shape()[1];
                    let gt = grads.slot(*table, t.len());
                    axpy(&mut gt[row * dim..(row + 1) * dim], 1.0, &g);
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.nodes[p].value.len();
                        if self.nodes[p].needs_grad {
                            axpy(acc(&mut node_grads, p, n), 1.0, &g[off..off + n]);
                        }
                        off += n;
                    }
                }
                Op::Slice { x, start } => {
                    let n = self.nodes[*x].value.len();
                    let gx = acc(&mut node_grads, *x, n);
                    axpy(&mut gx[*start..start + g.len()], 1.0, &g);
                }
                Op::Add(a, b) => {
                    for &p in [a, b].into_iter() {
                        if self.nodes[p].needs_grad {
                            axpy(acc(&mut node_grads, p, g.len()), 1.0, &g);
                        }
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[*a].value, &self.nodes[*b].value);
                    if self.nodes[*a].needs_grad {
                        let ga = acc(&mut node_grads, *a, g.len());
                        for j in 0..g.len() {
                            ga[j] += g[j] * bv[j];
                        }
                    }
                    if self.nodes[*b].needs_grad {
                        let gb = acc(&mut node_grads, *b, g.len());
                        for j in 0..g.len() {
                            gb[j] += g[j] * av[j];
                        }
                    }
                }
                Op::Sigmoid(x) => {
                    let y = &node.value;
                    let gx = acc(&mut node_grads, *x, g.len());
                    for j in 0..g.len() {
                        gx[j] += g[j] * y[j] * (1.0 - y[j]);
                    }
                }
                Op::Tanh(x) => {
                    let y = &node.value;
                    let gx = acc(&mut node_grads, *x, g.len());
                    for j in 0..g.len() {
                        gx[j] += g[j] * (1.0 - y[j] * y[j]);
                    }
                }
                Op::Relu(x) => {
                    let xv = &self.nodes[*x].value;
                    let gx = acc(&mut node_grads, *x, g.len());
                    for j in 0..g.len() {
                        if xv[j] > 0.0 {
                            gx[j] += g[j];
                        }
                    }
                }
                Op::MaskScale { x, mask } => {
                    let gx = acc(&mut node_grads, *x, g.len());
                    for j in 0..g.len() {
                        gx[j] += g[j] * mask[j];
                    }
                }
                Op::Scale { x, k } => {
                    axpy(acc(&mut node_grads, *x, g.len()), *k, &g);
                }
                Op::MaxPool { inputs, argmax } => {
                    for (j, &k) in argmax.iter().enumerate() {
                        let p = inputs[k];
                        if self.nodes[p].needs_grad {
                            acc(&mut node_grads, p, g.len())[j] += g[j];
                        }
                    }
                }
                Op::Softmax(x) => {
                    let y = &node.value;
                    let dotp: f64 = g.iter().zip(y).map(|(a, b)| a * b).sum();
                    let gx = acc(&mut node_grads, *x, g.len());
                    for j in 0..g.len() {
                        gx[j] += y[j] * (g[j] - dotp);
                    }
                }
                Op::CrossEntropy {
                    logits,
                    target,
                    probs,
                } => {
                    let gx = acc(&mut node_grads, *logits, probs.len());
                    for (j, p) in probs.iter().enumerate() {
                        let ind = if j == *target { 1.0 } else { 0.0 };
                        gx[j] += g[0] * (p - ind);
                    }
                }
                Op::Sum(x) => {
                    let n = self.nodes[*x].value.len();
                    acc(&mut node_grads, *x, n).iter_mut().for_each(|v| *v += g[0]);
                }
                Op::AddN(xs) => {
                    for &p in xs {
                        if self.nodes[p].needs_grad {
                            axpy(acc(&mut node_grads, p, g.len()), 1.0, &g);
                        }
                    }
                }
                Op::Crf {
                    emissions,
                    transitions,
                    start,
                    end,
                    grads: cg,
                } => {
                    let t = cg.num_tags;
                    for (pos, &e) in emissions.iter().enumerate() {
                        if self.nodes[e].needs_grad {
                            axpy(
                                acc(&mut node_grads, e, t),
                                g[0],
                                &cg.emissions[pos * t..(pos + 1) * t],
                            );
                        }
                    }
                    axpy(grads.slot(*transitions, t * t), g[0], &cg.transitions);
                    axpy(grads.slot(*start, t), g[0], &cg.start);
                    axpy(grads.slot(*end, t), g[0], &cg.end);
                }
            }
        }
        Ok(grads)
    }
}

fn acc(node_grads: &mut [Option<Vec<f64>>], i: usize, n: usize) -> &mut [f64] {
    node_grads[i].get_or_insert_with(|| vec![0.0; n])
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are reproducible bit-for-bit.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let mut s = [0.0f64; 4];
    for c in 0..chunks {
        let i = c * 4;
        s[0] += a[i] * b[i];
        s[1] += a[i + 1] * b[i + 1];
        s[2] += a[i + 2] * b[i + 2];
        s[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in chunks * 4..n {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

#[inline]
pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax (max-subtracted).
pub(crate) fn softmax_values(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::Input("softmax of an empty vector".into()));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite logits {logits:?}")));
    }
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    #[test]
    fn linear_loss_gradient_is_input() {
        let mut ps = ParamSet::new();
        let w = ps
            .add("w", Tensor::matrix(2, 3, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap())
            .unwrap();
        let mut g = Graph::new();
        let h = g.register(&ps);
        let x = g.constant(vec![1.5, -2.0, 0.25]);
        let y = g.affine(x, h.param(w), None).unwrap();
        let loss = g.sum(y);
        let grads = g.backward(loss).unwrap();
        let gw = grads.get(h, w).unwrap();
        assert_eq!(gw, &[1.5, -2.0, 0.25, 1.5, -2.0, 0.25]);
    }

    #[test]
    fn detach_blocks_gradient() {
        let mut ps = ParamSet::new();
        let w = ps.add("w", Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let v = ps.add("v", Tensor::matrix(1, 2, vec![0.5, -1.0]).unwrap()).unwrap();
        let mut g = Graph::new();
        let h = g.register(&ps);
        let x = g.constant(vec![1.0, 1.0]);
        let y = g.affine(x, h.param(w), None).unwrap();
        let p = g.softmax(y).unwrap();
        let d = g.detach(p);
        let z = g.affine(d, h.param(v), None).unwrap();
        let loss = g.sum(z);
        let grads = g.backward(loss).unwrap();
        assert!(grads.get(h, w).is_none());
        assert!(grads.get(h, v).is_some());
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::new();
        let x = g.constant(vec![1.0, 2.0]);
        let y = g.scale(x, 2.0);
        assert!(matches!(g.backward(y), Err(Error::Usage(_))));
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_values(&[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        let p = softmax_values(&[2f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = softmax_values(&[1000.0, 0.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
        assert!(matches!(softmax_values(&[f64::NAN]), Err(Error::Numeric(_))));
    }

    #[test]
    fn dot_matches_naive_sum_closely() {
        let a: Vec<f64> = (0..13).map(|i| i as f64 * 0.37 - 2.0).collect();
        let b: Vec<f64> = (0..13).map(|i| (i as f64).sin()).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-12);
    }
}
