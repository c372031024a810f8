//! Vector operations the network is written against. [`Eval`] computes
//! values only; [`Tape`] also records every operation so gradients with
//! respect to the parameter tensors can be pulled back afterwards.

use super::tensor::Tensor2;

pub(crate) trait Backend {
    type V: Clone;

    fn value<'a>(&'a self, v: &'a Self::V) -> &'a [f64];

    fn constant(&mut self, v: Vec<f64>) -> Self::V;
    /// Row `row` of parameter tensor `pid`.
    fn row(&mut self, pid: usize, row: usize) -> Self::V;
    /// `W x + b` for parameter tensors `w` and `b`.
    fn affine(&mut self, w: usize, b: usize, x: &Self::V) -> Self::V;
    fn add(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn mul(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    /// Sum of equally sized vectors; the zero vector of `width` when empty.
    fn sum(&mut self, xs: &[Self::V], width: usize) -> Self::V;
    fn scale(&mut self, a: &Self::V, s: f64) -> Self::V;
    fn concat(&mut self, a: &Self::V, b: &Self::V) -> Self::V;
    fn tanh(&mut self, a: &Self::V) -> Self::V;
    fn sigmoid(&mut self, a: &Self::V) -> Self::V;
    /// `1 - a`.
    fn one_minus(&mut self, a: &Self::V) -> Self::V;
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn affine_value(w: &Tensor2, b: &Tensor2, x: &[f64]) -> Vec<f64> {
    let mut y = w.matvec(x);
    for (y, b) in y.iter_mut().zip(&b.data) {
        *y += b;
    }
    y
}

pub(crate) struct Eval<'a> {
    params: &'a [Tensor2],
}

impl<'a> Eval<'a> {
    pub fn new(params: &'a [Tensor2]) -> Self {
        Eval { params }
    }
}

impl Backend for Eval<'_> {
    type V = Vec<f64>;

    fn value<'a>(&'a self, v: &'a Vec<f64>) -> &'a [f64] {
        v
    }

    fn constant(&mut self, v: Vec<f64>) -> Vec<f64> {
        v
    }

    fn row(&mut self, pid: usize, row: usize) -> Vec<f64> {
        self.params[pid].row(row).to_vec()
    }

    fn affine(&mut self, w: usize, b: usize, x: &Vec<f64>) -> Vec<f64> {
        affine_value(&self.params[w], &self.params[b], x)
    }

    fn add(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + y).collect()
    }

    fn mul(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x * y).collect()
    }

    fn sum(&mut self, xs: &[Vec<f64>], width: usize) -> Vec<f64> {
        let mut out = vec![0.0; width];
        for x in xs {
            for (o, v) in out.iter_mut().zip(x) {
                *o += v;
            }
        }
        out
    }

    fn scale(&mut self, a: &Vec<f64>, s: f64) -> Vec<f64> {
        a.iter().map(|x| x * s).collect()
    }

    fn concat(&mut self, a: &Vec<f64>, b: &Vec<f64>) -> Vec<f64> {
        let mut out = a.clone();
        out.extend_from_slice(b);
        out
    }

    fn tanh(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|x| x.tanh()).collect()
    }

    fn sigmoid(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|&x| sigmoid(x)).collect()
    }

    fn one_minus(&mut self, a: &Vec<f64>) -> Vec<f64> {
        a.iter().map(|x| 1.0 - x).collect()
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Row { pid: usize, row: usize },
    Affine { w: usize, b: usize, x: usize },
    Add(usize, usize),
    Mul(usize, usize),
    Sum(Vec<usize>),
    Scale(usize, f64),
    Concat(usize, usize),
    Tanh(usize),
    Sigmoid(usize),
    OneMinus(usize),
}

/// Reverse-mode recorder. Values are tape indices.
pub(crate) struct Tape<'a> {
    params: &'a [Tensor2],
    values: Vec<Vec<f64>>,
    ops: Vec<Op>,
}

impl<'a> Tape<'a> {
    pub fn new(params: &'a [Tensor2]) -> Self {
        Tape {
            params,
            values: Vec::new(),
            ops: Vec::new(),
        }
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> usize {
        self.values.push(value);
        self.ops.push(op);
        self.values.len() - 1
    }

    /// Gradients of `Σ seed · value(output)` with respect to every
    /// parameter tensor. Tensors that the computation never read get `None`.
    pub fn backward(&self, output: usize, seed: &[f64]) -> Vec<Option<Vec<f64>>> {
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.values.len()];
        grads[output] = Some(seed.to_vec());
        let mut param_grads: Vec<Option<Vec<f64>>> = vec![None; self.params.len()];

        fn acc(slot: &mut Option<Vec<f64>>, len: usize) -> &mut Vec<f64> {
            slot.get_or_insert_with(|| vec![0.0; len])
        }

        for node in (0..=output).rev() {
            let Some(g) = grads[node].take() else { continue };
            match &self.ops[node] {
                Op::Leaf => {}
                Op::Row { pid, row } => {
                    let t = &self.params[*pid];
                    let pg = acc(&mut param_grads[*pid], t.len());
                    for (dst, v) in pg[row * t.cols..(row + 1) * t.cols].iter_mut().zip(&g) {
                        *dst += v;
                    }
                }
                Op::Affine { w, b, x } => {
                    let wt = &self.params[*w];
                    let xv = &self.values[*x];
                    let wg = acc(&mut param_grads[*w], wt.len());
                    for (r, &gr) in g.iter().enumerate() {
                        if gr != 0.0 {
                            for (dst, xc) in wg[r * wt.cols..(r + 1) * wt.cols].iter_mut().zip(xv) {
                                *dst += gr * xc;
                            }
                        }
                    }
                    let bg = acc(&mut param_grads[*b], self.params[*b].len());
                    for (dst, v) in bg.iter_mut().zip(&g) {
                        *dst += v;
                    }
                    let xg = wt.matvec_t(&g);
                    add_into(acc(&mut grads[*x], xg.len()), &xg);
                }
                Op::Add(a, b) => {
                    add_into(acc(&mut grads[*a], g.len()), &g);
                    add_into(acc(&mut grads[*b], g.len()), &g);
                }
                Op::Mul(a, b) => {
                    let ga: Vec<f64> = g.iter().zip(&self.values[*b]).map(|(g, v)| g * v).collect();
                    let gb: Vec<f64> = g.iter().zip(&self.values[*a]).map(|(g, v)| g * v).collect();
                    add_into(acc(&mut grads[*a], g.len()), &ga);
                    add_into(acc(&mut grads[*b], g.len()), &gb);
                }
                Op::Sum(xs) => {
                    for x in xs {
                        add_into(acc(&mut grads[*x], g.len()), &g);
                    }
                }
                Op::Scale(a, s) => {
                    let ga: Vec<f64> = g.iter().map(|v| v * s).collect();
                    add_into(acc(&mut grads[*a], g.len()), &ga);
                }
                Op::Concat(a, b) => {
                    let na = self.values[*a].len();
                    add_into(acc(&mut grads[*a], na), &g[..na]);
                    let nb = g.len() - na;
                    add_into(acc(&mut grads[*b], nb), &g[na..]);
                }
                Op::Tanh(a) => {
                    let y = &self.values[node];
                    let ga: Vec<f64> = g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
                    add_into(acc(&mut grads[*a], g.len()), &ga);
                }
                Op::Sigmoid(a) => {
                    let y = &self.values[node];
                    let ga: Vec<f64> = g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                    add_into(acc(&mut grads[*a], g.len()), &ga);
                }
                Op::OneMinus(a) => {
                    let ga: Vec<f64> = g.iter().map(|v| -v).collect();
                    add_into(acc(&mut grads[*a], g.len()), &ga);
                }
            }
        }
        param_grads
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

impl Backend for Tape<'_> {
    type V = usize;

    fn value<'a>(&'a self, v: &'a usize) -> &'a [f64] {
        &self.values[*v]
    }

    fn constant(&mut self, v: Vec<f64>) -> usize {
        self.push(v, Op::Leaf)
    }

    fn row(&mut self, pid: usize, row: usize) -> usize {
        let v = self.params[pid].row(row).to_vec();
        self.push(v, Op::Row { pid, row })
    }

    fn affine(&mut self, w: usize, b: usize, x: &usize) -> usize {
        let v = affine_value(&self.params[w], &self.params[b], &self.values[*x]);
        self.push(v, Op::Affine { w, b, x: *x })
    }

    fn add(&mut self, a: &usize, b: &usize) -> usize {
        let v = Eval::new(self.params).add(&self.values[*a], &self.values[*b]);
        self.push(v, Op::Add(*a, *b))
    }

    fn mul(&mut self, a: &usize, b: &usize) -> usize {
        let v = Eval::new(self.params).mul(&self.values[*a], &self.values[*b]);
        self.push(v, Op::Mul(*a, *b))
    }

    fn sum(&mut self, xs: &[usize], width: usize) -> usize {
        let mut out = vec![0.0; width];
        for x in xs {
            add_into(&mut out, &self.values[*x]);
        }
        self.push(out, Op::Sum(xs.to_vec()))
    }

    fn scale(&mut self, a: &usize, s: f64) -> usize {
        let v = self.values[*a].iter().map(|x| x * s).collect();
        self.push(v, Op::Scale(*a, s))
    }

    fn concat(&mut self, a: &usize, b: &usize) -> usize {
        let mut v = self.values[*a].clone();
        v.extend_from_slice(&self.values[*b]);
        self.push(v, Op::Concat(*a, *b))
    }

    fn tanh(&mut self, a: &usize) -> usize {
        let v = self.values[*a].iter().map(|x| x.tanh()).collect();
        self.push(v, Op::Tanh(*a))
    }

    fn sigmoid(&mut self, a: &usize) -> usize {
        let v = self.values[*a].iter().map(|&x| sigmoid(x)).collect();
        self.push(v, Op::Sigmoid(*a))
    }

    fn one_minus(&mut self, a: &usize) -> usize {
        let v = self.values[*a].iter().map(|x| 1.0 - x).collect();
        self.push(v, Op::OneMinus(*a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_gradient() {
        let params = vec![
            Tensor2::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            Tensor2::from_vec(1, 2, vec![0.5, -0.5]).unwrap(),
        ];
        let mut t = Tape::new(&params);
        let x = t.constant(vec![1.0, -1.0]);
        let y = t.affine(0, 1, &x);
        assert_eq!(t.value(&y), [-0.5, -1.5]);
        let g = t.backward(y, &[1.0, 2.0]);
        assert_eq!(g[0].as_ref().unwrap(), &[1.0, -1.0, 2.0, -2.0]);
        assert_eq!(g[1].as_ref().unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn sigmoid_is_stable() {
        let v = Eval::new(&[]).sigmoid(&vec![-1000.0, 0.0, 1000.0]);
        assert_eq!(v, [0.0, 0.5, 1.0]);
    }
}
