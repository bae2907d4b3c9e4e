//! Minimal reverse-mode autodiff for the crate's trainable components.
//!
//! The models here are deliberately small (word embeddings, mean pooling,
//! one hidden layer, linear heads), so the tape carries exactly the
//! operations they need and nothing more. Everything runs in `f64` on a
//! single thread: fixed seeds reproduce loss trajectories bit-for-bit.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = Array2<f64>;

/// Handle to one named parameter matrix in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

struct ParamEntry {
    name: String,
    value: Matrix,
    // Adam state
    m: Matrix,
    v: Matrix,
}

/// Owns all trainable parameters of one model.
#[derive(Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Matrix) -> ParamId {
        let (r, c) = value.dim();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            m: Array2::zeros((r, c)),
            v: Array2::zeros((r, c)),
            value,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn zeros(&mut self, name: &str, rows: usize, cols: usize) -> ParamId {
        self.add(name, Array2::zeros((rows, cols)))
    }

    /// Uniform init in `[-scale, scale]`, drawn deterministically from `rng`.
    pub fn uniform(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        scale: f64,
        rng: &mut ChaCha8Rng,
    ) -> ParamId {
        let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-scale..scale)).collect();
        self.add(name, Array2::from_shape_vec((rows, cols), data).expect("shape"))
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.entries[id.0].value
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn id_by_name(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Stored<'a> {
            name: &'a str,
            rows: usize,
            cols: usize,
            data: Vec<f64>,
        }
        let stored: Vec<Stored> = self
            .entries
            .iter()
            .map(|e| Stored {
                name: &e.name,
                rows: e.value.nrows(),
                cols: e.value.ncols(),
                data: e.value.iter().copied().collect(),
            })
            .collect();
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(BufWriter::new(file), &stored)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Stored {
            name: String,
            rows: usize,
            cols: usize,
            data: Vec<f64>,
        }
        let file = std::fs::File::open(path)?;
        let stored: Vec<Stored> = serde_json::from_reader(BufReader::new(file))?;
        let mut store = ParamStore::new();
        for s in stored {
            if s.data.len() != s.rows * s.cols {
                return Err(Error::data(format!(
                    "parameter {} has {} values for shape {}x{}",
                    s.name,
                    s.data.len(),
                    s.rows,
                    s.cols
                )));
            }
            let value = Array2::from_shape_vec((s.rows, s.cols), s.data).expect("shape");
            store.add(&s.name, value);
        }
        Ok(store)
    }
}

/// Gradients keyed by parameter, produced by [`Tape::backward`].
pub struct ParamGrads {
    grads: Vec<Option<Matrix>>,
}

impl ParamGrads {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }
}

/// Adam with standard bias correction.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0 }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &ParamGrads) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (idx, entry) in store.entries.iter_mut().enumerate() {
            let Some(grad) = grads.grads.get(idx).and_then(|g| g.as_ref()) else {
                continue;
            };
            entry.m.zip_mut_with(grad, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            entry.v.zip_mut_with(grad, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let lr = self.lr;
            let eps = self.eps;
            ndarray::Zip::from(&mut entry.value)
                .and(&entry.m)
                .and(&entry.v)
                .for_each(|w, &m, &v| {
                    *w -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
                });
        }
    }
}

/// Handle to one value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    Param(ParamId),
    Gather { param: ParamId, rows: Vec<usize> },
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    SelectRows { src: Var, rows: Vec<usize> },
    MeanRowsSegments { src: Var, segments: Vec<(usize, usize)> },
    SoftmaxCrossEntropySum { logits: Var, targets: Vec<usize>, probs: Matrix },
    BceWithLogitsMean { logits: Var, labels: Vec<f64>, probs: Matrix },
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Forward tape: values are computed eagerly, gradients on demand.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

/// Numerically stable row-wise softmax; shared by training and inference.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum: f64 = row.sum();
        row.mapv_inplace(|e| e / sum);
    }
    out
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Tape { store, nodes: Vec::new() }
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.0].value[[0, 0]]
    }

    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.push(self.store.value(id).clone(), Op::Param(id))
    }

    /// Embedding lookup: output row `i` is parameter row `rows[i]`.
    pub fn gather(&mut self, param: ParamId, rows: &[usize]) -> Var {
        let table = self.store.value(param);
        let mut out = Array2::zeros((rows.len(), table.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).assign(&table.row(r));
        }
        self.push(out, Op::Gather { param, rows: rows.to_vec() })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        self.push(value, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(value, Op::Add(a, b))
    }

    /// Adds a `(1, d)` row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = &self.nodes[a.0].value + &self.nodes[row.0].value;
        self.push(value, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.nodes[a.0].value.mapv(|x| x * c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.mapv(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.nodes[a.0].value.t().to_owned();
        self.push(value, Op::Transpose(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.nodes[parts[0].0].value.nrows();
        let cols: usize = parts.iter().map(|v| self.nodes[v.0].value.ncols()).sum();
        let mut out = Array2::zeros((rows, cols));
        let mut offset = 0;
        for v in parts {
            let val = &self.nodes[v.0].value;
            out.slice_mut(ndarray::s![.., offset..offset + val.ncols()]).assign(val);
            offset += val.ncols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Output row `i` is source row `rows[i]`; rows may repeat.
    pub fn select_rows(&mut self, src: Var, rows: &[usize]) -> Var {
        let value = &self.nodes[src.0].value;
        let mut out = Array2::zeros((rows.len(), value.ncols()));
        for (i, &r) in rows.iter().enumerate() {
            out.row_mut(i).assign(&value.row(r));
        }
        self.push(out, Op::SelectRows { src, rows: rows.to_vec() })
    }

    /// Output row `i` is the mean of source rows `segments[i].0..segments[i].1`.
    pub fn mean_rows(&mut self, src: Var, segments: &[(usize, usize)]) -> Var {
        let value = &self.nodes[src.0].value;
        let mut out = Array2::zeros((segments.len(), value.ncols()));
        for (i, &(s, e)) in segments.iter().enumerate() {
            assert!(s < e && e <= value.nrows(), "empty or out-of-range segment");
            let mut acc = out.row_mut(i);
            for r in s..e {
                acc += &value.row(r);
            }
            acc /= (e - s) as f64;
        }
        self.push(out, Op::MeanRowsSegments { src, segments: segments.to_vec() })
    }

    /// Summed softmax cross-entropy: row `i` of `logits` against class
    /// `targets[i]`. Returns a `(1, 1)` scalar.
    pub fn softmax_ce_sum(&mut self, logits: Var, targets: &[usize]) -> Var {
        let z = &self.nodes[logits.0].value;
        assert_eq!(z.nrows(), targets.len(), "one target per logit row");
        let probs = softmax_rows(z);
        let mut total = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = z.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_sum_exp: f64 = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln() + max;
            total += log_sum_exp - row[t];
        }
        let value = Array2::from_elem((1, 1), total);
        self.push(value, Op::SoftmaxCrossEntropySum { logits, targets: targets.to_vec(), probs })
    }

    /// Mean binary cross-entropy over a `(n, 1)` logit column. Uses the
    /// stable log-sum-exp form.
    pub fn bce_with_logits_mean(&mut self, logits: Var, labels: &[f64]) -> Var {
        let z = &self.nodes[logits.0].value;
        assert_eq!(z.nrows(), labels.len(), "one label per logit row");
        assert_eq!(z.ncols(), 1, "bce expects a single logit column");
        let n = labels.len() as f64;
        let mut total = 0.0;
        let mut probs = Array2::zeros((labels.len(), 1));
        for (i, &y) in labels.iter().enumerate() {
            let zi = z[[i, 0]];
            total += zi.max(0.0) - zi * y + (1.0 + (-zi.abs()).exp()).ln();
            probs[[i, 0]] = sigmoid(zi);
        }
        let value = Array2::from_elem((1, 1), total / n);
        self.push(value, Op::BceWithLogitsMean { logits, labels: labels.to_vec(), probs })
    }

    /// Reverse sweep from `loss` (must be `(1, 1)`); returns parameter
    /// gradients and drops the tape.
    pub fn backward(self, loss: Var) -> ParamGrads {
        let mut node_grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        let mut param_grads: Vec<Option<Matrix>> = vec![None; self.store.len()];
        node_grads[loss.0] = Some(Array2::from_elem((1, 1), 1.0));

        fn accumulate(slot: &mut Option<Matrix>, delta: &Matrix) {
            match slot {
                Some(g) => *g += delta,
                None => *slot = Some(delta.clone()),
            }
        }

        for idx in (0..self.nodes.len()).rev() {
            let Some(grad) = node_grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    accumulate(&mut param_grads[id.0], &grad);
                }
                Op::Gather { param, rows } => {
                    let table = self.store.value(*param);
                    let slot = param_grads[param.0]
                        .get_or_insert_with(|| Array2::zeros(table.dim()));
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dst = slot.row_mut(r);
                        dst += &grad.row(i);
                    }
                }
                Op::MatMul(a, b) => {
                    let da = grad.dot(&self.nodes[b.0].value.t());
                    let db = self.nodes[a.0].value.t().dot(&grad);
                    accumulate(&mut node_grads[a.0], &da);
                    accumulate(&mut node_grads[b.0], &db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut node_grads[a.0], &grad);
                    accumulate(&mut node_grads[b.0], &grad);
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut node_grads[a.0], &grad);
                    let row_grad = grad.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut node_grads[row.0], &row_grad);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut node_grads[a.0], &grad.mapv(|g| g * c));
                }
                Op::Tanh(a) => {
                    let da = ndarray::Zip::from(&grad)
                        .and(&node.value)
                        .map_collect(|&g, &y| g * (1.0 - y * y));
                    accumulate(&mut node_grads[a.0], &da);
                }
                Op::Transpose(a) => {
                    accumulate(&mut node_grads[a.0], &grad.t().to_owned());
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for v in parts {
                        let cols = self.nodes[v.0].value.ncols();
                        let part = grad.slice(ndarray::s![.., offset..offset + cols]).to_owned();
                        accumulate(&mut node_grads[v.0], &part);
                        offset += cols;
                    }
                }
                Op::SelectRows { src, rows } => {
                    let src_val = &self.nodes[src.0].value;
                    let mut dsrc = Array2::zeros(src_val.dim());
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dst = dsrc.row_mut(r);
                        dst += &grad.row(i);
                    }
                    accumulate(&mut node_grads[src.0], &dsrc);
                }
                Op::MeanRowsSegments { src, segments } => {
                    let src_val = &self.nodes[src.0].value;
                    let mut dsrc = Array2::zeros(src_val.dim());
                    for (i, &(s, e)) in segments.iter().enumerate() {
                        let share = grad.row(i).mapv(|g| g / (e - s) as f64);
                        for r in s..e {
                            let mut dst = dsrc.row_mut(r);
                            dst += &share;
                        }
                    }
                    accumulate(&mut node_grads[src.0], &dsrc);
                }
                Op::SoftmaxCrossEntropySum { logits, targets, probs } => {
                    let g = grad[[0, 0]];
                    let mut dz = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        dz[[i, t]] -= 1.0;
                    }
                    dz.mapv_inplace(|v| v * g);
                    accumulate(&mut node_grads[logits.0], &dz);
                }
                Op::BceWithLogitsMean { logits, labels, probs } => {
                    let g = grad[[0, 0]] / labels.len() as f64;
                    let mut dz = probs.clone();
                    for (i, &y) in labels.iter().enumerate() {
                        dz[[i, 0]] -= y;
                    }
                    dz.mapv_inplace(|v| v * g);
                    accumulate(&mut node_grads[logits.0], &dz);
                }
            }
        }
        ParamGrads { grads: param_grads }
    }
}

/// Mean of the first and last `window` entries of a loss trajectory;
/// training-improvement checks compare these.
pub fn windowed_means(losses: &[f64], window: usize) -> (f64, f64) {
    let w = window.min(losses.len()).max(1);
    let head: f64 = losses[..w].iter().sum::<f64>() / w as f64;
    let tail: f64 = losses[losses.len() - w..].iter().sum::<f64>() / w as f64;
    (head, tail)
}

/// Named-parameter view used by checkpoints.
pub fn param_map(store: &ParamStore) -> HashMap<String, ParamId> {
    store
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name.clone(), ParamId(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn num_grad(
        store: &mut ParamStore,
        id: ParamId,
        r: usize,
        c: usize,
        mut loss_of: impl FnMut(&ParamStore) -> f64,
    ) -> f64 {
        let eps = 1e-5;
        let orig = store.entries[id.0].value[[r, c]];
        store.entries[id.0].value[[r, c]] = orig + eps;
        let hi = loss_of(store);
        store.entries[id.0].value[[r, c]] = orig - eps;
        let lo = loss_of(store);
        store.entries[id.0].value[[r, c]] = orig;
        (hi - lo) / (2.0 * eps)
    }

    /// Analytic gradients must match central finite differences on a
    /// network that exercises every op.
    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        let emb = store.uniform("emb", 6, 4, 0.8, &mut rng);
        let pos = store.uniform("pos", 5, 3, 0.8, &mut rng);
        let w1 = store.uniform("w1", 7, 5, 0.8, &mut rng);
        let b1 = store.uniform("b1", 1, 5, 0.8, &mut rng);
        let w2 = store.uniform("w2", 5, 3, 0.8, &mut rng);
        let w3 = store.uniform("w3", 5, 1, 0.8, &mut rng);

        let tokens = [1usize, 3, 5, 0, 2, 2, 4];
        let segments = [(0usize, 3usize), (3, 5), (5, 7)];
        let positions = [0usize, 2, 4];
        let targets = [2usize, 0, 1];
        let labels = [1.0, 0.0, 1.0];

        let forward = |store: &ParamStore| -> (f64, Option<ParamGrads>) {
            let mut tape = Tape::new(store);
            let x = tape.gather(emb, &tokens);
            let pooled = tape.mean_rows(x, &segments);
            let p = tape.gather(pos, &positions);
            let joined = tape.concat_cols(&[pooled, p]);
            let w1v = tape.param(w1);
            let b1v = tape.param(b1);
            let pre = tape.matmul(joined, w1v);
            let pre = tape.add_row(pre, b1v);
            let h = tape.tanh(pre);
            let picked = tape.select_rows(h, &[0, 1, 2, 1]);
            let picked = tape.mean_rows(picked, &[(0, 2), (2, 3), (3, 4)]);
            let w2v = tape.param(w2);
            let logits = tape.matmul(picked, w2v);
            let ce = tape.softmax_ce_sum(logits, &targets);
            let w3v = tape.param(w3);
            let bin_logits = tape.matmul(h, w3v);
            let bce = tape.bce_with_logits_mean(bin_logits, &labels);
            let bce_t = tape.transpose(bce);
            let both = tape.add(ce, bce_t);
            let loss = tape.scale(both, 0.5);
            let value = tape.scalar(loss);
            (value, Some(tape.backward(loss)))
        };

        let (_, grads) = forward(&store);
        let grads = grads.unwrap();

        for (id, name) in [(emb, "emb"), (pos, "pos"), (w1, "w1"), (b1, "b1"), (w2, "w2"), (w3, "w3")]
        {
            let analytic = grads.get(id).cloned().unwrap_or_else(|| {
                Array2::zeros(store.value(id).dim())
            });
            for r in 0..analytic.nrows() {
                for c in 0..analytic.ncols() {
                    let numeric = num_grad(&mut store, id, r, c, |s| forward(s).0);
                    let a = analytic[[r, c]];
                    let denom = 1.0f64.max(a.abs()).max(numeric.abs());
                    assert!(
                        (a - numeric).abs() / denom < 1e-6,
                        "grad mismatch at {name}[{r},{c}]: analytic {a}, numeric {numeric}"
                    );
                }
            }
        }
    }

    #[test]
    fn softmax_rows_are_normalized() {
        let logits = ndarray::array![[0.0, 0.0], [3.0, 1.0]];
        let p = softmax_rows(&logits);
        assert!((p[[0, 0]] - 0.5).abs() < 1e-12);
        assert!((p.row(1).sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adam_reduces_a_quadratic() {
        // minimize ||w||^2 via its gradient 2w
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = store.uniform("w", 2, 2, 1.0, &mut rng);
        let mut adam = Adam::new(0.1);
        let start: f64 = store.value(w).iter().map(|x| x * x).sum();
        for _ in 0..100 {
            let grad = store.value(w).mapv(|x| 2.0 * x);
            let grads = ParamGrads { grads: vec![Some(grad)] };
            adam.step(&mut store, &grads);
        }
        let end: f64 = store.value(w).iter().map(|x| x * x).sum();
        assert!(end < start * 0.01, "start {start}, end {end}");
    }

    #[test]
    fn store_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.json");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut store = ParamStore::new();
        store.uniform("a", 3, 4, 0.5, &mut rng);
        store.zeros("b", 2, 2);
        store.save(&path).unwrap();
        let loaded = ParamStore::load(&path).unwrap();
        let a = loaded.id_by_name("a").unwrap();
        assert_eq!(loaded.value(a), store.value(store.id_by_name("a").unwrap()));
        assert_eq!(loaded.len(), 2);
    }

    #[test]
    fn windowed_means_cover_short_series() {
        let (head, tail) = windowed_means(&[4.0, 2.0], 10);
        assert_eq!(head, 3.0);
        assert_eq!(tail, 3.0);
        let (head, tail) = windowed_means(&[10.0, 0.0, 2.0, 4.0], 2);
        assert_eq!(head, 5.0);
        assert_eq!(tail, 3.0);
    }
}
