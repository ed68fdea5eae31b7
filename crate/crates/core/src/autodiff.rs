//! Minimal reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation of one forward pass. Calling
//! [`Tape::backward`] on a scalar node walks the tape in reverse and returns
//! the gradient of that scalar with respect to every node. Everything is a
//! 2-D matrix; scalars are `1x1`, vectors are `1xn` rows.

use ndarray::{concatenate, s, Array2, Axis, Zip};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Relu(Var),
    Square(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    SliceRows(Var, usize, usize),
    Row(Var, usize),
    Sum(Var),
    /// Mean squared error against a constant target.
    Mse(Var, Array2<f64>),
    /// Biased MMD^2 with per-row signed weights. `width` lists the pairs
    /// `(a, b, c)` with `sigma^2 = sum c * |x_a - x_b|^2`; empty for a fixed width.
    Mmd2 { x: Var, weights: Vec<f64>, sigma: f64, width: Vec<(usize, usize, f64)> },
    /// Forward value is fixed, gradient flows to the source unchanged.
    StraightThrough(Var),
    /// `x * keep + offset` with constant `keep`.
    Gate(Var, Array2<f64>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2<f64>,
    op: Op,
}

/// Records one forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Stable logistic that saturates to exactly 0 and 1.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    /// A leaf: parameters and constants alike.
    pub fn leaf(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// Adds a `1xn` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    /// Multiplies every row of `a` elementwise by a `1xn` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) * self.value(row);
        self.push(v, Op::MulRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(v, Op::AddScalar(a))
    }

    /// `1 - a`.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let n = self.scale(a, -1.0);
        self.add_scalar(n, 1.0)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x * x);
        self.push(v, Op::Square(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = concatenate(Axis(1), &views).expect("row counts must agree");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start, end))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start, end))
    }

    /// Row `i` of `a` as a `1xn` matrix.
    pub fn row(&mut self, a: Var, i: usize) -> Var {
        let v = self.value(a).slice(s![i..i + 1, ..]).to_owned();
        self.push(v, Op::Row(a, i))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Mean over all entries of `(a - target)^2`.
    pub fn mse(&mut self, a: Var, target: Array2<f64>) -> Var {
        let va = self.value(a);
        assert_eq!(va.shape(), target.shape(), "mse shape mismatch");
        let n = va.len().max(1) as f64;
        let v = Zip::from(va)
            .and(&target)
            .fold(0.0, |acc, &p, &t| acc + (p - t) * (p - t))
            / n;
        self.push(Array2::from_elem((1, 1), v), Op::Mse(a, target))
    }

    /// `sum_ij w_i w_j k(x_i, x_j)` with an RBF kernel of width `sigma`.
    ///
    /// With `w_i = 1/|P|` on one group and `-1/|Q|` on the other this is the
    /// biased (V-statistic) MMD^2 between the groups.
    pub fn mmd2_weighted(&mut self, x: Var, weights: Vec<f64>, sigma: f64) -> Var {
        self.mmd2_adaptive(x, weights, sigma, Vec::new())
    }

    /// As [`Tape::mmd2_weighted`], but `sigma` is itself a function of `x`:
    /// `sigma^2 = sum c * |x_a - x_b|^2` over `width`, and the gradient
    /// includes that dependence.
    pub fn mmd2_adaptive(&mut self, x: Var, weights: Vec<f64>, sigma: f64, width: Vec<(usize, usize, f64)>) -> Var {
        let xv = self.value(x);
        assert_eq!(xv.nrows(), weights.len(), "one weight per row");
        let k = rbf_gram(xv, sigma);
        let mut total = 0.0;
        for i in 0..weights.len() {
            for j in 0..weights.len() {
                total += weights[i] * weights[j] * k[[i, j]];
            }
        }
        self.push(Array2::from_elem((1, 1), total), Op::Mmd2 { x, weights, sigma, width })
    }

    /// Node whose value is `forward` but whose gradient is routed to `source`.
    pub fn straight_through(&mut self, source: Var, forward: Array2<f64>) -> Var {
        assert_eq!(self.value(source).shape(), forward.shape());
        self.push(forward, Op::StraightThrough(source))
    }

    /// `a * keep + offset` with constant matrices; zero `keep` blocks gradient.
    pub fn gate(&mut self, a: Var, keep: Array2<f64>, offset: &Array2<f64>) -> Var {
        let v = self.value(a) * &keep + offset;
        self.push(v, Op::Gate(a, keep))
    }

    /// Gradients of the scalar `root` with respect to every node. Entries for
    /// nodes that do not influence `root` are `None`.
    pub fn backward(&self, root: Var) -> Vec<Option<Array2<f64>>> {
        assert_eq!(self.value(root).len(), 1, "backward needs a scalar root");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[root.0] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g.clone());
                }
                Op::AddRow(a, r) => {
                    let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *r, gr);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, -&g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MulRow(a, r) => {
                    let ga = &g * self.value(*r);
                    let gr = (&g * self.value(*a)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *r, gr);
                }
                Op::Scale(a, c) => acc(&mut grads, *a, &g * *c),
                Op::AddScalar(a) => acc(&mut grads, *a, g.clone()),
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = Zip::from(&g).and(y).map_collect(|&g, &y| g * y * (1.0 - y));
                    acc(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = Zip::from(&g).and(y).map_collect(|&g, &y| g * (1.0 - y * y));
                    acc(&mut grads, *a, ga);
                }
                Op::Exp(a) => acc(&mut grads, *a, &g * &node.value),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let ga = Zip::from(&g)
                        .and(x)
                        .map_collect(|&g, &x| if x > 0.0 { g } else { 0.0 });
                    acc(&mut grads, *a, ga);
                }
                Op::Square(a) => acc(&mut grads, *a, &g * self.value(*a) * 2.0),
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        acc(&mut grads, *p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::SliceCols(a, start, end) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![.., *start..*end]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::SliceRows(a, start, end) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![*start..*end, ..]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::Row(a, i) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    ga.slice_mut(s![*i..*i + 1, ..]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let ga = Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]]);
                    acc(&mut grads, *a, ga);
                }
                Op::Mse(a, target) => {
                    let va = self.value(*a);
                    let c = 2.0 * g[[0, 0]] / va.len().max(1) as f64;
                    let ga = Zip::from(va).and(target).map_collect(|&p, &t| c * (p - t));
                    acc(&mut grads, *a, ga);
                }
                Op::Mmd2 { x, weights, sigma, width } => {
                    let ga = mmd2_adaptive_grad(self.value(*x), weights, *sigma, width) * g[[0, 0]];
                    acc(&mut grads, *x, ga);
                }
                Op::StraightThrough(src) => acc(&mut grads, *src, g.clone()),
                Op::Gate(a, keep) => acc(&mut grads, *a, &g * keep),
            }
            grads[idx] = Some(g);
        }
        grads
    }
}

/// RBF Gram matrix `exp(-|x_i - x_j|^2 / (2 sigma^2))` over the rows of `x`.
pub fn rbf_gram(x: &Array2<f64>, sigma: f64) -> Array2<f64> {
    let n = x.nrows();
    let denom = 2.0 * sigma * sigma;
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        k[[i, i]] = 1.0;
        for j in 0..i {
            let d2: f64 = x
                .row(i)
                .iter()
                .zip(x.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let v = (-d2 / denom).exp();
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Analytic gradient of `sum_ij w_i w_j k(x_i, x_j)` with respect to `x`.
pub fn mmd2_weighted_grad(x: &Array2<f64>, weights: &[f64], sigma: f64) -> Array2<f64> {
    let k = rbf_gram(x, sigma);
    let s2 = sigma * sigma;
    let mut g = Array2::zeros(x.raw_dim());
    for i in 0..x.nrows() {
        for j in 0..x.nrows() {
            if i == j {
                continue;
            }
            // d/dx_i of k(x_i, x_j) = -k (x_i - x_j) / sigma^2, counted for (i,j) and (j,i)
            let c = -2.0 * weights[i] * weights[j] * k[[i, j]] / s2;
            if c == 0.0 {
                continue;
            }
            for d in 0..x.ncols() {
                g[[i, d]] += c * (x[[i, d]] - x[[j, d]]);
            }
        }
    }
    g
}

/// Gradient of [`Tape::mmd2_adaptive`] with respect to `x`.
pub fn mmd2_adaptive_grad(x: &Array2<f64>, weights: &[f64], sigma: f64, width: &[(usize, usize, f64)]) -> Array2<f64> {
    let mut g = mmd2_weighted_grad(x, weights, sigma);
    if width.is_empty() {
        return g;
    }
    let k = rbf_gram(x, sigma);
    let s2 = sigma * sigma;
    // d/d(sigma^2) of k_ij = k_ij d_ij^2 / (2 sigma^4)
    let mut ds2 = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.nrows() {
            if i != j {
                let d2: f64 = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                ds2 += weights[i] * weights[j] * k[[i, j]] * d2;
            }
        }
    }
    ds2 /= 2.0 * s2 * s2;
    for &(a, b, c) in width {
        for d in 0..x.ncols() {
            let diff = 2.0 * c * ds2 * (x[[a, d]] - x[[b, d]]);
            g[[a, d]] += diff;
            g[[b, d]] -= diff;
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn numeric_grad(f: impl Fn(&Array2<f64>) -> f64, x: &Array2<f64>) -> Array2<f64> {
        let h = 1e-6;
        let mut g = Array2::zeros(x.raw_dim());
        for idx in 0..x.len() {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp.as_slice_mut().unwrap()[idx] += h;
            xm.as_slice_mut().unwrap()[idx] -= h;
            g.as_slice_mut().unwrap()[idx] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g
    }

    fn assert_close(a: &Array2<f64>, b: &Array2<f64>, tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    /// Composite exercising every elementwise and structural op.
    fn composite(t: &mut Tape, x: Var, w: Var, r: Var) -> Var {
        let m = t.matmul(x, w);
        let a = t.add_row(m, r);
        let s = t.sigmoid(a);
        let th = t.tanh(a);
        let p = t.mul(s, th);
        let e = t.exp(p);
        let q = t.square(e);
        let om = t.one_minus(q);
        let rl = t.relu(om);
        let c = t.concat_cols(&[rl, p]);
        let sc = t.slice_cols(c, 1, 3);
        let sr = t.slice_rows(sc, 0, 2);
        let row = t.row(w, 1);
        let mr = t.mul_row(x, row);
        let ts = t_scale(t, mr);
        let sub = t.sub(sr, ts);
        let sum = t.sum(sub);
        let sq = t.square(sum);
        let mse = t.mse(p, Array2::from_elem((3, 2), 0.3));
        t.add(sq, mse)
    }

    fn t_scale(t: &mut Tape, v: Var) -> Var {
        let s = t.slice_rows(v, 1, 3);
        t.scale(s, 0.7)
    }

    #[test]
    fn composite_matches_finite_differences() {
        let x0 = array![[0.1, -0.3], [0.5, 0.2], [-0.4, 0.9]];
        let w0 = array![[0.3, -0.2], [0.8, 0.1]];
        let r0 = array![[0.05, -0.1]];
        let eval = |x: &Array2<f64>, w: &Array2<f64>, r: &Array2<f64>| {
            let mut t = Tape::new();
            let (xv, wv, rv) = (t.leaf(x.clone()), t.leaf(w.clone()), t.leaf(r.clone()));
            let out = composite(&mut t, xv, wv, rv);
            (t, xv, wv, rv, out)
        };
        let (t, xv, wv, rv, out) = eval(&x0, &w0, &r0);
        let grads = t.backward(out);
        let gx = numeric_grad(|x| { let (t, .., o) = eval(x, &w0, &r0); t.scalar(o) }, &x0);
        let gw = numeric_grad(|w| { let (t, .., o) = eval(&x0, w, &r0); t.scalar(o) }, &w0);
        let gr = numeric_grad(|r| { let (t, .., o) = eval(&x0, &w0, r); t.scalar(o) }, &r0);
        assert_close(grads[xv.index()].as_ref().unwrap(), &gx, 1e-6);
        assert_close(grads[wv.index()].as_ref().unwrap(), &gw, 1e-6);
        assert_close(grads[rv.index()].as_ref().unwrap(), &gr, 1e-6);
    }

    #[test]
    fn mmd_gradient_matches_finite_differences() {
        let x0 = array![[0.1, -0.3], [0.5, 0.2], [-0.4, 0.9], [0.0, 0.4]];
        let w = vec![0.5, 0.5, -0.5, -0.5];
        let f = |x: &Array2<f64>| {
            let mut t = Tape::new();
            let v = t.leaf(x.clone());
            let m = t.mmd2_weighted(v, w.clone(), 0.8);
            t.scalar(m)
        };
        let mut t = Tape::new();
        let v = t.leaf(x0.clone());
        let m = t.mmd2_weighted(v, w.clone(), 0.8);
        let g = t.backward(m);
        assert_close(g[v.index()].as_ref().unwrap(), &numeric_grad(f, &x0), 1e-7);
    }

    #[test]
    fn adaptive_width_gradient_matches_finite_differences() {
        let x0 = array![[0.1, -0.3], [0.5, 0.2], [-0.4, 0.9], [0.0, 0.4], [0.3, 0.3]];
        let w = vec![0.5, 0.5, -1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0];
        // sigma^2 = half the squared distance between rows 1 and 3
        let sig = |x: &Array2<f64>| (0.5 * ((x[[1, 0]] - x[[3, 0]]).powi(2) + (x[[1, 1]] - x[[3, 1]]).powi(2))).sqrt();
        let f = |x: &Array2<f64>| {
            let mut t = Tape::new();
            let v = t.leaf(x.clone());
            let m = t.mmd2_adaptive(v, w.clone(), sig(x), vec![(1, 3, 0.5)]);
            t.scalar(m)
        };
        let mut t = Tape::new();
        let v = t.leaf(x0.clone());
        let m = t.mmd2_adaptive(v, w.clone(), sig(&x0), vec![(1, 3, 0.5)]);
        let g = t.backward(m);
        assert_close(g[v.index()].as_ref().unwrap(), &numeric_grad(f, &x0), 1e-7);
    }

    #[test]
    fn straight_through_and_gate() {
        let mut t = Tape::new();
        let a = t.leaf(array![[0.2, 0.7]]);
        let hard = t.straight_through(a, array![[0.0, 1.0]]);
        let gated = t.gate(hard, array![[1.0, 0.0]], &array![[0.0, 1.0]]);
        assert_eq!(t.value(gated), &array![[0.0, 1.0]]);
        let s = t.sum(gated);
        let g = t.backward(s);
        assert_eq!(g[a.index()].as_ref().unwrap(), &array![[1.0, 0.0]]);
    }

    #[test]
    fn unused_nodes_have_no_gradient() {
        let mut t = Tape::new();
        let a = t.leaf(array![[1.0]]);
        let b = t.leaf(array![[2.0]]);
        let c = t.scale(a, 3.0);
        let g = t.backward(c);
        assert_eq!(g[a.index()].as_ref().unwrap()[[0, 0]], 3.0);
        assert!(g[b.index()].is_none());
    }
}
