//! Parameter storage, recurrent and dense layers, and the Adam optimizer.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamId(pub usize);

/// Named parameter matrices, in creation order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
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

    pub fn values(&self) -> &[Array2<f64>] {
        &self.values
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Array2<f64>> {
        self.names.iter().position(|n| n == name).map(|i| &self.values[i])
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    /// Puts every parameter on `tape` as a leaf.
    pub fn bind(&self, tape: &mut Tape) -> Bound {
        Bound(self.values.iter().map(|v| tape.leaf(v.clone())).collect())
    }

    /// Concatenation of all parameters in creation order (row-major).
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| v.iter().copied()).collect()
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_scalars());
        let mut it = flat.iter();
        for v in &mut self.values {
            for x in v.iter_mut() {
                *x = *it.next().unwrap();
            }
        }
    }

    /// Gradients of each parameter, zeros where the parameter was unused.
    pub fn collect_grads(&self, bound: &Bound, grads: &[Option<Array2<f64>>]) -> Vec<Array2<f64>> {
        self.values
            .iter()
            .zip(&bound.0)
            .map(|(v, var)| {
                grads[var.index()]
                    .clone()
                    .unwrap_or_else(|| Array2::zeros(v.raw_dim()))
            })
            .collect()
    }
}

/// Tape handles for every parameter of a store.
#[derive(Debug, Clone)]
pub struct Bound(Vec<Var>);

impl Bound {
    pub fn var(&self, id: ParamId) -> Var {
        self.0[id.0]
    }
}

/// Seeded initializer: weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
pub struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        Array2::from_shape_fn((rows, cols), |_| self.rng.random_range(-bound..bound))
    }
}

/// Dense layer `x W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, init: &mut Init, name: &str, fan_in: usize, fan_out: usize) -> Self {
        let w = store.add(format!("{name}.w"), init.uniform(fan_in, fan_out, fan_in));
        let b = store.add(format!("{name}.b"), Array2::zeros((1, fan_out)));
        Self { w, b, fan_in, fan_out }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Var {
        let m = tape.matmul(x, p.var(self.w));
        tape.add_row(m, p.var(self.b))
    }
}

/// Gated recurrent unit with gate order (reset, update, candidate):
///
/// ```text
/// r  = sigmoid(x W_r + b_ir + h U_r + b_hr)
/// u  = sigmoid(x W_u + b_iu + h U_u + b_hu)
/// n  = tanh(x W_n + b_in + r * (h U_n + b_hn))
/// h' = (1 - u) * n + u * h
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b_ih: ParamId,
    pub b_hh: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl GruCell {
    pub fn new(store: &mut ParamStore, init: &mut Init, name: &str, input: usize, hidden: usize) -> Self {
        let g = 3 * hidden;
        let w_ih = store.add(format!("{name}.w_ih"), init.uniform(input, g, input));
        let w_hh = store.add(format!("{name}.w_hh"), init.uniform(hidden, g, hidden));
        let b_ih = store.add(format!("{name}.b_ih"), Array2::zeros((1, g)));
        let b_hh = store.add(format!("{name}.b_hh"), Array2::zeros((1, g)));
        Self { w_ih, w_hh, b_ih, b_hh, input, hidden }
    }

    pub fn num_params(input: usize, hidden: usize) -> usize {
        3 * hidden * (input + hidden + 2)
    }

    pub fn step(&self, tape: &mut Tape, p: &Bound, x: Var, h: Var) -> Var {
        let hs = self.hidden;
        let gx = tape.matmul(x, p.var(self.w_ih));
        let gx = tape.add_row(gx, p.var(self.b_ih));
        let gh = tape.matmul(h, p.var(self.w_hh));
        let gh = tape.add_row(gh, p.var(self.b_hh));

        let gx_ru = tape.slice_cols(gx, 0, 2 * hs);
        let gh_ru = tape.slice_cols(gh, 0, 2 * hs);
        let ru_pre = tape.add(gx_ru, gh_ru);
        let ru = tape.sigmoid(ru_pre);
        let r = tape.slice_cols(ru, 0, hs);
        let u = tape.slice_cols(ru, hs, 2 * hs);

        let gx_n = tape.slice_cols(gx, 2 * hs, 3 * hs);
        let gh_n = tape.slice_cols(gh, 2 * hs, 3 * hs);
        let rn = tape.mul(r, gh_n);
        let n_pre = tape.add(gx_n, rn);
        let n = tape.tanh(n_pre);

        let keep_new = tape.one_minus(u);
        let a = tape.mul(keep_new, n);
        let b = tape.mul(u, h);
        tape.add(a, b)
    }
}

/// Single-layer bidirectional GRU returning `[h_fwd_final, h_bwd_final]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiGru {
    pub fwd: GruCell,
    pub bwd: GruCell,
}

impl BiGru {
    pub fn new(store: &mut ParamStore, init: &mut Init, name: &str, input: usize, hidden: usize) -> Self {
        let fwd = GruCell::new(store, init, &format!("{name}.fwd"), input, hidden);
        let bwd = GruCell::new(store, init, &format!("{name}.bwd"), input, hidden);
        Self { fwd, bwd }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.fwd.hidden
    }

    /// `steps[k]` is the `B x input` slice at time `k` (oldest first).
    pub fn forward(&self, tape: &mut Tape, p: &Bound, steps: &[Var]) -> Var {
        let batch = tape.value(steps[0]).nrows();
        let h0 = tape.leaf(Array2::zeros((batch, self.fwd.hidden)));
        let mut hf = h0;
        for &x in steps {
            hf = self.fwd.step(tape, p, x, hf);
        }
        let mut hb = h0;
        for &x in steps.iter().rev() {
            hb = self.bwd.step(tape, p, x, hb);
        }
        tape.concat_cols(&[hf, hb])
    }
}

/// Adam with global gradient-norm clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    step: u64,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(store: &ParamStore, lr: f64, clip_norm: Option<f64>) -> Self {
        let zeros: Vec<_> = store.values().iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Applies one update; returns the gradient norm before clipping.
    pub fn update(&mut self, store: &mut ParamStore, grads: &mut [Array2<f64>]) -> f64 {
        let norm = grads.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
        if let Some(c) = self.clip_norm {
            if norm > c {
                let s = c / norm;
                grads.iter_mut().for_each(|g| *g *= s);
            }
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, g) in grads.iter().enumerate() {
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            let p = &mut store.values[i];
            ndarray::Zip::from(p)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                    *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                    *p -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
                });
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gru_parameter_count() {
        let mut s = ParamStore::new();
        let mut init = Init::new(0);
        GruCell::new(&mut s, &mut init, "g", 3, 2);
        // w_ih 3x6, w_hh 2x6, two 1x6 biases
        assert_eq!(s.num_scalars(), 18 + 12 + 12);
        assert_eq!(GruCell::num_params(3, 2), 42);
    }

    #[test]
    fn gru_step_matches_scalar_reference() {
        let mut s = ParamStore::new();
        let mut init = Init::new(3);
        let cell = GruCell::new(&mut s, &mut init, "g", 1, 1);
        *s.get_mut(cell.b_ih) = array![[0.1, -0.2, 0.3]];
        *s.get_mut(cell.b_hh) = array![[0.05, 0.0, -0.1]];
        let (wi, wh) = (s.get(cell.w_ih).clone(), s.get(cell.w_hh).clone());
        let (x, h) = (0.7, -0.4);
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let r = sig(x * wi[[0, 0]] + 0.1 + h * wh[[0, 0]] + 0.05);
        let u = sig(x * wi[[0, 1]] - 0.2 + h * wh[[0, 1]]);
        let n = (x * wi[[0, 2]] + 0.3 + r * (h * wh[[0, 2]] - 0.1)).tanh();
        let expect = (1.0 - u) * n + u * h;

        let mut t = Tape::new();
        let p = s.bind(&mut t);
        let xv = t.leaf(array![[x]]);
        let hv = t.leaf(array![[h]]);
        let out = cell.step(&mut t, &p, xv, hv);
        assert!((t.scalar(out) - expect).abs() < 1e-14);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut s = ParamStore::new();
        let id = s.add("x", array![[3.0, -2.0]]);
        let mut opt = Adam::new(&s, 0.1, Some(5.0));
        for _ in 0..500 {
            let mut g = vec![s.get(id) * 2.0];
            opt.update(&mut s, &mut g);
        }
        assert!(s.get(id).iter().all(|v| v.abs() < 1e-2));
    }

    #[test]
    fn flatten_roundtrip() {
        let mut s = ParamStore::new();
        s.add("a", array![[1.0, 2.0]]);
        s.add("b", array![[3.0], [4.0]]);
        let f = s.flatten();
        assert_eq!(f, vec![1.0, 2.0, 3.0, 4.0]);
        s.unflatten(&[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(s.by_name("b").unwrap(), &array![[7.0], [8.0]]);
    }
}
