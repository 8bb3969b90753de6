//! Linear-chain conditional random field.
//!
//! A path `y` over `L` positions scores
//! `start[y_0] + sum_t emit[t, y_t] + sum_t trans[y_t, y_{t+1}] + end[y_{L-1}]`.
//! The partition function is computed with the forward algorithm in log
//! space; gradients of the negative log-likelihood come from forward-backward
//! marginals.

use crate::error::{Error, Result};

/// Transition (`trans[i * T + j]` scores tag `j` following tag `i`), start and
/// end scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    num_tags: usize,
    pub transitions: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

impl CrfParams {
    pub fn new(num_tags: usize, transitions: Vec<f64>, start: Vec<f64>, end: Vec<f64>) -> Result<Self> {
        if num_tags == 0 {
            return Err(Error::Input("CRF needs at least one tag".into()));
        }
        if transitions.len() != num_tags * num_tags || start.len() != num_tags || end.len() != num_tags {
            return Err(Error::Shape(format!(
                "CRF with {num_tags} tags given {} transitions, {} start, {} end scores",
                transitions.len(),
                start.len(),
                end.len()
            )));
        }
        let p = CrfParams {
            num_tags,
            transitions,
            start,
            end,
        };
        if !p.all_finite() {
            return Err(Error::Numeric("non-finite CRF score".into()));
        }
        Ok(p)
    }

    pub fn zeros(num_tags: usize) -> Self {
        CrfParams {
            num_tags,
            transitions: vec![0.0; num_tags * num_tags],
            start: vec![0.0; num_tags],
            end: vec![0.0; num_tags],
        }
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    #[inline]
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transitions[from * self.num_tags + to]
    }

    fn all_finite(&self) -> bool {
        self.transitions
            .iter()
            .chain(&self.start)
            .chain(&self.end)
            .all(|v| v.is_finite())
    }
}

/// `L x T` per-position tag scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Emissions {
    len: usize,
    num_tags: usize,
    scores: Vec<f64>,
}

impl Emissions {
    pub fn new(len: usize, num_tags: usize, scores: Vec<f64>) -> Result<Self> {
        if len == 0 {
            return Err(Error::Input("empty emission matrix".into()));
        }
        if scores.len() != len * num_tags {
            return Err(Error::Shape(format!(
                "{len}x{num_tags} emissions given {} scores",
                scores.len()
            )));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite emission score".into()));
        }
        Ok(Emissions {
            len,
            num_tags,
            scores,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let num_tags = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != num_tags) {
            return Err(Error::Shape("ragged emission rows".into()));
        }
        Self::new(rows.len(), num_tags, rows.concat())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn num_tags(&self) -> usize {
        self.num_tags
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.scores[t * self.num_tags..(t + 1) * self.num_tags]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.scores[t * self.num_tags..(t + 1) * self.num_tags]
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

fn check(em: &Emissions, params: &CrfParams) -> Result<()> {
    if em.num_tags != params.num_tags {
        return Err(Error::Shape(format!(
            "emissions over {} tags for a CRF with {} tags",
            em.num_tags, params.num_tags
        )));
    }
    Ok(())
}

fn check_tags(tags: &[usize], em: &Emissions) -> Result<()> {
    if tags.len() != em.len {
        return Err(Error::Input(format!(
            "tag sequence of length {} for {} positions",
            tags.len(),
            em.len
        )));
    }
    if let Some(bad) = tags.iter().find(|&&t| t >= em.num_tags) {
        return Err(Error::Input(format!("tag {bad} out of range {}", em.num_tags)));
    }
    Ok(())
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Score of one tag path.
pub fn path_score(em: &Emissions, tags: &[usize], params: &CrfParams) -> Result<f64> {
    check(em, params)?;
    check_tags(tags, em)?;
    let mut s = params.start[tags[0]] + params.end[tags[em.len - 1]];
    for (t, &y) in tags.iter().enumerate() {
        s += em.row(t)[y];
        if t > 0 {
            s += params.transition(tags[t - 1], y);
        }
    }
    Ok(s)
}

/// Forward log-scores `alpha[t][j]`: log-sum over paths of positions `0..=t`
/// ending in `j`, excluding the end score.
fn forward(em: &Emissions, params: &CrfParams) -> Vec<f64> {
    let n = em.num_tags;
    let mut alpha = vec![0.0; em.len * n];
    for j in 0..n {
        alpha[j] = params.start[j] + em.row(0)[j];
    }
    let mut buf = vec![0.0; n];
    for t in 1..em.len {
        for j in 0..n {
            for i in 0..n {
                buf[i] = alpha[(t - 1) * n + i] + params.transition(i, j);
            }
            alpha[t * n + j] = log_sum_exp(&buf) + em.row(t)[j];
        }
    }
    alpha
}

/// Backward log-scores `beta[t][i]`: log-sum over continuations after `t`
/// given tag `i` at `t`, including the end score.
fn backward(em: &Emissions, params: &CrfParams) -> Vec<f64> {
    let n = em.num_tags;
    let l = em.len;
    let mut beta = vec![0.0; l * n];
    beta[(l - 1) * n..].copy_from_slice(&params.end);
    let mut buf = vec![0.0; n];
    for t in (0..l - 1).rev() {
        for i in 0..n {
            for j in 0..n {
                buf[j] = params.transition(i, j) + em.row(t + 1)[j] + beta[(t + 1) * n + j];
            }
            beta[t * n + i] = log_sum_exp(&buf);
        }
    }
    beta
}

/// Log of the sum of `exp(path_score)` over all `T^L` paths.
pub fn log_partition(em: &Emissions, params: &CrfParams) -> Result<f64> {
    check(em, params)?;
    let n = em.num_tags;
    let alpha = forward(em, params);
    let last: Vec<f64> = (0..n)
        .map(|j| alpha[(em.len - 1) * n + j] + params.end[j])
        .collect();
    Ok(log_sum_exp(&last))
}

/// Negative log-likelihood `log Z - score(gold)`.
pub fn nll(em: &Emissions, gold: &[usize], params: &CrfParams) -> Result<f64> {
    let score = path_score(em, gold, params)?;
    Ok((log_partition(em, params)? - score).max(0.0))
}

/// Gradients of [`nll`] with respect to every input.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfGrads {
    pub num_tags: usize,
    pub emissions: Vec<f64>,
    pub transitions: Vec<f64>,
    pub start: Vec<f64>,
    pub end: Vec<f64>,
}

/// NLL plus its gradients: expected feature counts under the model minus the
/// gold path's counts.
pub fn nll_with_grads(em: &Emissions, gold: &[usize], params: &CrfParams) -> Result<(f64, CrfGrads)> {
    check(em, params)?;
    check_tags(gold, em)?;
    let n = em.num_tags;
    let l = em.len;
    let alpha = forward(em, params);
    let beta = backward(em, params);
    let last: Vec<f64> = (0..n).map(|j| alpha[(l - 1) * n + j] + params.end[j]).collect();
    let log_z = log_sum_exp(&last);
    let gold_score = path_score(em, gold, params)?;

    let mut g = CrfGrads {
        num_tags: n,
        emissions: vec![0.0; l * n],
        transitions: vec![0.0; n * n],
        start: vec![0.0; n],
        end: vec![0.0; n],
    };
    for t in 0..l {
        for j in 0..n {
            g.emissions[t * n + j] = (alpha[t * n + j] + beta[t * n + j] - log_z).exp();
        }
    }
    g.start.copy_from_slice(&g.emissions[..n]);
    g.end.copy_from_slice(&g.emissions[(l - 1) * n..]);
    for t in 0..l.saturating_sub(1) {
        for i in 0..n {
            for j in 0..n {
                let lp = alpha[t * n + i]
                    + params.transition(i, j)
                    + em.row(t + 1)[j]
                    + beta[(t + 1) * n + j]
                    - log_z;
                g.transitions[i * n + j] += lp.exp();
            }
        }
    }
    for (t, &y) in gold.iter().enumerate() {
        g.emissions[t * n + y] -= 1.0;
        if t > 0 {
            g.transitions[gold[t - 1] * n + y] -= 1.0;
        }
    }
    g.start[gold[0]] -= 1.0;
    g.end[gold[l - 1]] -= 1.0;
    Ok(((log_z - gold_score).max(0.0), g))
}

/// Highest-scoring path. Ties resolve to the lowest tag index, both for the
/// final tag and at every back-pointer.
pub fn viterbi_decode(em: &Emissions, params: &CrfParams) -> Result<Vec<usize>> {
    Ok(viterbi(em, params)?.0)
}

/// Best path and its score.
pub fn viterbi(em: &Emissions, params: &CrfParams) -> Result<(Vec<usize>, f64)> {
    check(em, params)?;
    let n = em.num_tags;
    let l = em.len;
    let mut delta: Vec<f64> = (0..n).map(|j| params.start[j] + em.row(0)[j]).collect();
    let mut back = vec![0usize; l * n];
    let mut next = vec![0.0; n];
    for t in 1..l {
        for j in 0..n {
            let mut best_i = 0;
            let mut best = delta[0] + params.transition(0, j);
            for i in 1..n {
                let s = delta[i] + params.transition(i, j);
                if s > best {
                    best = s;
                    best_i = i;
                }
            }
            back[t * n + j] = best_i;
            next[j] = best + em.row(t)[j];
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut best_j = 0;
    let mut best = delta[0] + params.end[0];
    for j in 1..n {
        let s = delta[j] + params.end[j];
        if s > best {
            best = s;
            best_j = j;
        }
    }
    let mut path = vec![0usize; l];
    path[l - 1] = best_j;
    for t in (1..l).rev() {
        path[t - 1] = back[t * n + path[t]];
    }
    Ok((path, best))
}

/// Largest instance the enumeration oracles accept.
pub const BRUTE_FORCE_LIMIT: usize = 1_000_000;

fn enumerate_paths(em: &Emissions, params: &CrfParams, mut visit: impl FnMut(&[usize], f64)) -> Result<u64> {
    check(em, params)?;
    let n = em.num_tags;
    let count = (n as u128).checked_pow(em.len as u32).filter(|&c| c <= BRUTE_FORCE_LIMIT as u128);
    let Some(count) = count else {
        return Err(Error::Usage(format!(
            "{n}^{} paths exceeds the enumeration limit {BRUTE_FORCE_LIMIT}",
            em.len
        )));
    };
    let mut tags = vec![0usize; em.len];
    for _ in 0..count {
        visit(&tags, path_score(em, &tags, params)?);
        for t in (0..em.len).rev() {
            tags[t] += 1;
            if tags[t] < n {
                break;
            }
            tags[t] = 0;
        }
    }
    Ok(count as u64)
}

/// Exhaustive log-partition; also returns the number of paths visited.
pub fn brute_force_partition(em: &Emissions, params: &CrfParams) -> Result<(f64, u64)> {
    let mut scores = Vec::new();
    let count = enumerate_paths(em, params, |_, s| scores.push(s))?;
    Ok((log_sum_exp(&scores), count))
}

/// Exhaustive argmax; the lexicographically smallest path wins ties.
pub fn brute_force_best(em: &Emissions, params: &CrfParams) -> Result<(Vec<usize>, f64)> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    enumerate_paths(em, params, |tags, s| {
        if best.as_ref().is_none_or(|(_, b)| s > *b) {
            best = Some((tags.to_vec(), s));
        }
    })?;
    Ok(best.expect("at least one path"))
}
