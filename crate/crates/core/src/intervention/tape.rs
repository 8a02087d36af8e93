//! A small reverse-mode autodiff tape over row-major f64 matrices.
//!
//! Rows are tokens. Several sequences are stacked into one matrix and
//! attention is restricted to each sequence's row range.

use ndarray::{s, Array2, ArrayView2, Axis};

pub type Mat = Array2<f64>;

/// Named trainable matrices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
}

impl ParamStore {
    pub fn push(&mut self, name: impl Into<String>, value: Mat) -> usize {
        self.names.push(name.into());
        self.values.push(value);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Mat] {
        &mut self.values
    }

    pub fn get(&self, i: usize) -> &Mat {
        &self.values[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Mat::len).sum()
    }

    pub fn zeros_like(&self) -> Vec<Mat> {
        self.values.iter().map(|v| Mat::zeros(v.raw_dim())).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Row range of one sequence inside a stacked matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Seg {
    pub start: usize,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Const,
    Param(usize),
    Linear { x: Var, w: Var, b: Var },
    Add(Var, Var),
    Gather { table: Var, idx: Vec<usize> },
    Gelu(Var),
    LayerNorm { x: Var, g: Var, b: Var, xhat: Mat, inv_std: Vec<f64> },
    Attention { q: Var, k: Var, v: Var, heads: usize, pairs: Vec<(Seg, Seg)>, probs: Vec<Mat> },
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Mat },
    Scale(Var, f64),
}

struct Node {
    /// `None` for parameters, whose value lives in the store.
    value: Option<Mat>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.7978845608028654; // sqrt(2 / pi)
const GELU_A: f64 = 0.044715;

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape { params, nodes: Vec::new() }
    }

    fn push(&mut self, value: Option<Mat>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> ArrayView2<'_, f64> {
        match (&self.nodes[v.0].value, &self.nodes[v.0].op) {
            (Some(m), _) => m.view(),
            (None, Op::Param(i)) => self.params.get(*i).view(),
            _ => unreachable!("node without value"),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn param(&mut self, i: usize) -> Var {
        self.push(None, Op::Param(i))
    }

    pub fn constant(&mut self, m: Mat) -> Var {
        self.push(Some(m), Op::Const)
    }

    /// `x · w + b` with `w: (in, out)` and `b: (1, out)`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let mut y = self.value(x).dot(&self.value(w));
        y += &self.value(b);
        self.push(Some(y), Op::Linear { x, w, b })
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let y = &self.value(a) + &self.value(b);
        self.push(Some(y), Op::Add(a, b))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let y = &self.value(x) * c;
        self.push(Some(y), Op::Scale(x, c))
    }

    /// Rows `idx` of `table`.
    pub fn gather(&mut self, table: Var, idx: Vec<usize>) -> Var {
        let t = self.value(table);
        let mut y = Mat::zeros((idx.len(), t.ncols()));
        for (r, &i) in idx.iter().enumerate() {
            y.row_mut(r).assign(&t.row(i));
        }
        self.push(Some(y), Op::Gather { table, idx })
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        let y = self.value(x).mapv(|x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()));
        self.push(Some(y), Op::Gelu(x))
    }

    /// Row-wise layer normalization with gain and bias of shape `(1, d)`.
    pub fn layer_norm(&mut self, x: Var, g: Var, b: Var) -> Var {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut xhat = xv.to_owned();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in xhat.rows_mut() {
            let mean = row.sum() / d;
            row -= mean;
            let var = row.dot(&row) / d;
            let is = 1.0 / (var + LN_EPS).sqrt();
            row *= is;
            inv_std.push(is);
        }
        let mut y = &xhat * &self.value(g);
        y += &self.value(b);
        self.push(Some(y), Op::LayerNorm { x, g, b, xhat, inv_std })
    }

    /// Multi-head scaled dot-product attention. Each `(q_seg, kv_seg)` pair
    /// attends only within its ranges; `causal` hides later key positions.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, pairs: Vec<(Seg, Seg)>, causal: bool) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let d = qv.ncols();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Mat::zeros((qv.nrows(), d));
        let mut probs = Vec::with_capacity(pairs.len() * heads);
        for &(qs, ks) in &pairs {
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                let qh = qv.slice(s![qs.start..qs.start + qs.len, cols.clone()]);
                let kh = kv.slice(s![ks.start..ks.start + ks.len, cols.clone()]);
                let vh = vv.slice(s![ks.start..ks.start + ks.len, cols.clone()]);
                let mut p = qh.dot(&kh.t()) * scale;
                for (i, mut row) in p.rows_mut().into_iter().enumerate() {
                    if causal {
                        row.slice_mut(s![i + 1..]).fill(f64::NEG_INFINITY);
                    }
                    let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    row.mapv_inplace(|x| (x - m).exp());
                    let z = row.sum();
                    row /= z;
                }
                out.slice_mut(s![qs.start..qs.start + qs.len, cols]).assign(&p.dot(&vh));
                probs.push(p);
            }
        }
        self.push(Some(out), Op::Attention { q, k, v, heads, pairs, probs })
    }

    /// Summed negative log-likelihood of `targets` under row-wise softmax of
    /// `logits`, as a 1×1 matrix.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<usize>) -> Var {
        let lv = self.value(logits);
        let mut probs = lv.to_owned();
        let mut loss = 0.0;
        for ((mut row, &t), logits) in probs.rows_mut().into_iter().zip(&targets).zip(lv.rows()) {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|x| (x - m).exp());
            let z = row.sum();
            loss += m + z.ln() - logits[t];
            row /= z;
        }
        self.push(Some(Mat::from_elem((1, 1), loss)), Op::CrossEntropy { logits, targets, probs })
    }

    /// Gradients of the scalar `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Vec<Mat> {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::ones((1, 1)));
        let mut out = self.params.zeros_like();

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for i in (0..self.nodes.len()).rev() {
            let Some(dy) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Const => {}
                Op::Param(p) => out[*p] += &dy,
                Op::Linear { x, w, b } => {
                    acc(&mut grads, *x, dy.dot(&self.value(*w).t()));
                    acc(&mut grads, *w, self.value(*x).t().dot(&dy));
                    acc(&mut grads, *b, dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
                Op::Add(a, b) => {
                    let ga = reduce_to(&dy, self.value(*a).dim());
                    let gb = reduce_to(&dy, self.value(*b).dim());
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(x, c) => acc(&mut grads, *x, dy * *c),
                Op::Gather { table, idx } => {
                    let mut g = Mat::zeros(self.value(*table).raw_dim());
                    for (r, &j) in idx.iter().enumerate() {
                        let mut row = g.row_mut(j);
                        row += &dy.row(r);
                    }
                    acc(&mut grads, *table, g);
                }
                Op::Gelu(x) => {
                    let mut g = self.value(*x).mapv(|x| {
                        let t = (GELU_C * (x + GELU_A * x * x * x)).tanh();
                        0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
                    });
                    g *= &dy;
                    acc(&mut grads, *x, g);
                }
                Op::LayerNorm { x, g, b, xhat, inv_std } => {
                    acc(&mut grads, *b, dy.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *g, (&dy * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let mut dxhat = &dy * &self.value(*g);
                    let d = dxhat.ncols() as f64;
                    for ((mut row, xh), is) in dxhat.rows_mut().into_iter().zip(xhat.rows()).zip(inv_std) {
                        let m1 = row.sum() / d;
                        let m2 = row.dot(&xh) / d;
                        row.zip_mut_with(&xh, |r, &xh| *r = is * (*r - m1 - xh * m2));
                    }
                    acc(&mut grads, *x, dxhat);
                }
                Op::Attention { q, k, v, heads, pairs, probs } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let d = qv.ncols();
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut dq = Mat::zeros(qv.raw_dim());
                    let mut dk = Mat::zeros(kv.raw_dim());
                    let mut dv = Mat::zeros(vv.raw_dim());
                    let mut pi = 0;
                    for &(qs, ks) in pairs {
                        let qr = qs.start..qs.start + qs.len;
                        let kr = ks.start..ks.start + ks.len;
                        for h in 0..*heads {
                            let cols = h * dh..(h + 1) * dh;
                            let p = &probs[pi];
                            pi += 1;
                            let qh = qv.slice(s![qr.clone(), cols.clone()]);
                            let kh = kv.slice(s![kr.clone(), cols.clone()]);
                            let vh = vv.slice(s![kr.clone(), cols.clone()]);
                            let doh = dy.slice(s![qr.clone(), cols.clone()]);
                            let mut dvs = dv.slice_mut(s![kr.clone(), cols.clone()]);
                            dvs += &p.t().dot(&doh);
                            let mut ds = doh.dot(&vh.t());
                            for (mut row, prow) in ds.rows_mut().into_iter().zip(p.rows()) {
                                let dot = row.dot(&prow);
                                row.zip_mut_with(&prow, |r, &pp| *r = pp * (*r - dot) * scale);
                            }
                            let mut dqs = dq.slice_mut(s![qr.clone(), cols.clone()]);
                            dqs += &ds.dot(&kh);
                            let mut dks = dk.slice_mut(s![kr.clone(), cols.clone()]);
                            dks += &ds.t().dot(&qh);
                        }
                    }
                    acc(&mut grads, *q, dq);
                    acc(&mut grads, *k, dk);
                    acc(&mut grads, *v, dv);
                }
                Op::CrossEntropy { logits, targets, probs } => {
                    let mut g = probs.clone();
                    for (r, &t) in targets.iter().enumerate() {
                        g[[r, t]] -= 1.0;
                    }
                    g *= dy[[0, 0]];
                    acc(&mut grads, *logits, g);
                }
            }
        }
        out
    }
}

/// Sums broadcast rows back to `dim`.
fn reduce_to(dy: &Mat, dim: (usize, usize)) -> Mat {
    if dy.dim() == dim {
        dy.clone()
    } else {
        assert_eq!(dim.0, 1, "only row broadcasting is supported");
        dy.sum_axis(Axis(0)).insert_axis(Axis(0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
    }

    /// Central-difference check of every parameter entry.
    fn check(store: &mut ParamStore, f: impl Fn(&mut Tape) -> Var) {
        let analytic = {
            let mut t = Tape::new(store);
            let l = f(&mut t);
            t.backward(l)
        };
        let h = 1e-5;
        for p in 0..store.len() {
            for idx in 0..store.get(p).len() {
                let (r, c) = (idx / store.get(p).ncols(), idx % store.get(p).ncols());
                let orig = store.values[p][[r, c]];
                store.values[p][[r, c]] = orig + h;
                let up = {
                    let mut t = Tape::new(store);
                    let l = f(&mut t);
                    t.scalar(l)
                };
                store.values[p][[r, c]] = orig - h;
                let down = {
                    let mut t = Tape::new(store);
                    let l = f(&mut t);
                    t.scalar(l)
                };
                store.values[p][[r, c]] = orig;
                let num = (up - down) / (2.0 * h);
                let a = analytic[p][[r, c]];
                let rel = (a - num).abs() / (a.abs() + num.abs()).max(1e-6);
                assert!(rel < 1e-5, "param {} [{r},{c}]: analytic {a} numeric {num}", store.names[p]);
            }
        }
    }

    #[test]
    fn op_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut st = ParamStore::default();
        let x = st.push("x", random(&mut rng, 5, 8));
        let w = st.push("w", random(&mut rng, 8, 8));
        let b = st.push("b", random(&mut rng, 1, 8));
        let g = st.push("g", random(&mut rng, 1, 8));
        let wk = st.push("wk", random(&mut rng, 8, 8));
        let emb = st.push("emb", random(&mut rng, 4, 8));
        let wo = st.push("wo", random(&mut rng, 8, 6));
        let bo = st.push("bo", random(&mut rng, 1, 6));
        check(&mut st, |t| {
            let (x, w, b, g, wk, emb, wo, bo) =
                (t.param(x), t.param(w), t.param(b), t.param(g), t.param(wk), t.param(emb), t.param(wo), t.param(bo));
            let e = t.gather(emb, vec![0, 2, 2, 3, 1]);
            let x = t.add(x, e);
            let n = t.layer_norm(x, g, b);
            let q = t.linear(n, w, b);
            let k = t.linear(n, wk, b);
            let segs = vec![
                (Seg { start: 0, len: 3 }, Seg { start: 0, len: 3 }),
                (Seg { start: 3, len: 2 }, Seg { start: 3, len: 2 }),
            ];
            let a = t.attention(q, k, n, 2, segs, true);
            let cross = vec![(Seg { start: 0, len: 5 }, Seg { start: 1, len: 3 })];
            let c = t.attention(a, k, q, 4, cross, false);
            let h = t.gelu(c);
            let hb = t.add(h, b);
            let logits = t.linear(hb, wo, bo);
            let l = t.cross_entropy(logits, vec![0, 5, 2, 2, 1]);
            t.scale(l, 0.3)
        });
    }

    #[test]
    fn attention_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let st = ParamStore::default();
        let mut t = Tape::new(&st);
        let q = t.constant(random(&mut rng, 4, 4));
        let seg = Seg { start: 0, len: 4 };
        let v = t.constant(Mat::eye(4));
        let a = t.attention(q, q, v, 1, vec![(seg, seg)], true);
        let out = t.value(a);
        // with identity values the output rows are the attention weights
        for (i, row) in out.rows().into_iter().enumerate() {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().skip(i + 1).all(|&p| p == 0.0));
        }
    }

    #[test]
    fn uniform_logits_give_log_vocab() {
        let st = ParamStore::default();
        let mut t = Tape::new(&st);
        let l = t.constant(Mat::zeros((3, 7)));
        let ce = t.cross_entropy(l, vec![0, 1, 6]);
        assert!((t.scalar(ce) - 3.0 * 7f64.ln()).abs() < 1e-12);
    }
}
