//! One LSTM layer followed by two tanh dense layers and a linear output.
//!
//! Selected temporal features are arranged as a sequence of `steps` time
//! steps (oldest first) with one channel per series; unselected
//! (series, lag) cells are zero. Selected static features skip the
//! recurrent layer and are concatenated with the final hidden state.
//!
//! Flat parameter layout: `Wx (C×4H), Wh (H×4H), b (4H), W1 ((H+S)×d1), b1,
//! W2 (d1×d2), b2, w3 (d2), b3`, gates ordered input, forget, cell, output.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::mlp::glorot;
use crate::models::train::Differentiable;
use crate::samples::FeatureDescriptor;
use crate::scalar::Scalar;

/// Where one input column goes in the LSTM's input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputSlot {
    Sequence { step: usize, channel: usize },
    Static(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceLayout {
    pub steps: usize,
    pub channels: usize,
    pub n_static: usize,
    pub slots: Vec<InputSlot>,
}

impl SequenceLayout {
    /// Layout for columns described by `descriptors`, with a sequence of
    /// `window` steps over the three temporal series.
    pub fn from_descriptors(window: usize, descriptors: &[FeatureDescriptor]) -> Self {
        let mut n_static = 0;
        let slots = descriptors
            .iter()
            .map(|d| match d {
                FeatureDescriptor::Temporal { series, lag } => InputSlot::Sequence {
                    step: window - 1 - lag,
                    channel: series.channel(),
                },
                FeatureDescriptor::Static { .. } => {
                    n_static += 1;
                    InputSlot::Static(n_static - 1)
                }
            })
            .collect();
        Self {
            steps: window,
            channels: 3,
            n_static,
            slots,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.slots.len()
    }

    /// Splits a flat batch into per-step `B×C` matrices and a `B×S` static
    /// block.
    pub fn shape_inputs<T: Scalar>(&self, x: ArrayView2<T>) -> Result<(Vec<Array2<T>>, Array2<T>)> {
        if x.ncols() != self.slots.len() {
            return Err(Error::MaskMismatch {
                expected: self.slots.len(),
                got: x.ncols(),
            });
        }
        let b = x.nrows();
        let mut seq = vec![Array2::<T>::zeros((b, self.channels)); self.steps];
        let mut statics = Array2::<T>::zeros((b, self.n_static));
        for (col, slot) in self.slots.iter().enumerate() {
            let src = x.column(col);
            match *slot {
                InputSlot::Sequence { step, channel } => seq[step].column_mut(channel).assign(&src),
                InputSlot::Static(p) => statics.column_mut(p).assign(&src),
            }
        }
        Ok((seq, statics))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LstmShape {
    pub steps: usize,
    pub channels: usize,
    pub n_static: usize,
    pub hidden: usize,
    pub dense1: usize,
    pub dense2: usize,
}

struct Offsets {
    wx: usize,
    wh: usize,
    b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

impl LstmShape {
    fn offsets(&self) -> Offsets {
        let g = 4 * self.hidden;
        let wx = 0;
        let wh = wx + self.channels * g;
        let b = wh + self.hidden * g;
        let w1 = b + g;
        let b1 = w1 + (self.hidden + self.n_static) * self.dense1;
        let w2 = b1 + self.dense1;
        let b2 = w2 + self.dense1 * self.dense2;
        let w3 = b2 + self.dense2;
        let b3 = w3 + self.dense2;
        Offsets {
            wx,
            wh,
            b,
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            end: b3 + 1,
        }
    }

    pub fn n_params(&self) -> usize {
        self.offsets().end
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lstm<T> {
    pub shape: LstmShape,
    pub layout: SequenceLayout,
    pub params: Vec<T>,
}

/// Forward-pass state kept for backpropagation through time.
#[derive(Clone, Debug)]
pub struct LstmCache<T> {
    /// Activated gates per step, `B×4H`.
    pub gates: Vec<Array2<T>>,
    /// Cell states `c_0 = 0, c_1, …, c_steps`.
    pub cells: Vec<Array2<T>>,
    /// `tanh(c_t)` for `t = 1..=steps`.
    pub cell_tanh: Vec<Array2<T>>,
    /// Hidden states `h_0 = 0, h_1, …, h_steps`.
    pub hidden: Vec<Array2<T>>,
    /// Dense-head input `[h_steps | statics]`.
    pub head_input: Array2<T>,
    pub a1: Array2<T>,
    pub a2: Array2<T>,
    pub output: Array1<T>,
}

fn mat<T>(p: &[T], rows: usize, cols: usize) -> ArrayView2<'_, T> {
    ArrayView2::from_shape((rows, cols), p).expect("parameter block shape")
}

fn mat_mut<T>(p: &mut [T], rows: usize, cols: usize) -> ArrayViewMut2<'_, T> {
    ArrayViewMut2::from_shape((rows, cols), p).expect("parameter block shape")
}

fn sigmoid<T: Scalar>(z: T) -> T {
    T::one() / (T::one() + (-z).exp())
}

pub fn lstm_forward<T: Scalar>(shape: &LstmShape, params: &[T], seq: &[Array2<T>], statics: ArrayView2<T>) -> LstmCache<T> {
    let o = shape.offsets();
    let h = shape.hidden;
    let batch = statics.nrows();
    let wx = mat(&params[o.wx..o.wh], shape.channels, 4 * h);
    let wh = mat(&params[o.wh..o.b], h, 4 * h);
    let bias = &params[o.b..o.w1];
    let mut gates = Vec::with_capacity(shape.steps);
    let mut cells = vec![Array2::<T>::zeros((batch, h))];
    let mut cell_tanh = Vec::with_capacity(shape.steps);
    let mut hidden = vec![Array2::<T>::zeros((batch, h))];
    for x_t in seq.iter().take(shape.steps) {
        let mut z = x_t.dot(&wx);
        general_mat_mul(T::one(), &hidden[hidden.len() - 1], &wh, T::one(), &mut z);
        let c_prev = &cells[cells.len() - 1];
        let mut c = Array2::<T>::zeros((batch, h));
        let mut tc = Array2::<T>::zeros((batch, h));
        let mut h_new = Array2::<T>::zeros((batch, h));
        for b in 0..batch {
            let zr = z.row_mut(b).into_slice().expect("standard layout");
            for (k, v) in zr.iter_mut().enumerate() {
                let pre = *v + bias[k];
                *v = if (2 * h..3 * h).contains(&k) { pre.tanh() } else { sigmoid(pre) };
            }
            for j in 0..h {
                let (i, f, g, og) = (zr[j], zr[h + j], zr[2 * h + j], zr[3 * h + j]);
                let cv = f * c_prev[[b, j]] + i * g;
                let t = cv.tanh();
                c[[b, j]] = cv;
                tc[[b, j]] = t;
                h_new[[b, j]] = og * t;
            }
        }
        gates.push(z);
        cells.push(c);
        cell_tanh.push(tc);
        hidden.push(h_new);
    }
    let mut head_input = Array2::<T>::zeros((batch, h + shape.n_static));
    head_input.slice_mut(s![.., ..h]).assign(&hidden[hidden.len() - 1]);
    head_input.slice_mut(s![.., h..]).assign(&statics);
    let dense = |x: ArrayView2<T>, w: ArrayView2<T>, b: &[T]| {
        let mut z = x.dot(&w);
        for mut row in z.rows_mut() {
            for (v, &bb) in row.iter_mut().zip(b) {
                *v = (*v + bb).tanh();
            }
        }
        z
    };
    let a1 = dense(
        head_input.view(),
        mat(&params[o.w1..o.b1], h + shape.n_static, shape.dense1),
        &params[o.b1..o.w2],
    );
    let a2 = dense(a1.view(), mat(&params[o.w2..o.b2], shape.dense1, shape.dense2), &params[o.b2..o.w3]);
    let output = a2.dot(&ArrayView1::from(&params[o.w3..o.b3])) + params[o.b3];
    LstmCache {
        gates,
        cells,
        cell_tanh,
        hidden,
        head_input,
        a1,
        a2,
        output,
    }
}

/// Batch MSE and its exact gradient by backpropagation through time.
pub fn lstm_backward<T: Scalar>(
    shape: &LstmShape,
    params: &[T],
    seq: &[Array2<T>],
    cache: &LstmCache<T>,
    y: ArrayView1<T>,
    grad: &mut [T],
) -> T {
    let o = shape.offsets();
    let h = shape.hidden;
    let head_in = h + shape.n_static;
    let batch = y.len();
    let bn = T::from_usize_lossy(batch);
    let resid = &cache.output - &y;
    let loss = resid.iter().map(|&r| r * r).sum::<T>() / bn;
    let dout = resid.mapv(|r| T::of(2.0) * r / bn);

    ArrayViewMut1::from(&mut grad[o.w3..o.b3]).assign(&cache.a2.t().dot(&dout));
    grad[o.b3] = dout.sum();

    let w3 = &params[o.w3..o.b3];
    let mut dz2 = Array2::<T>::zeros((batch, shape.dense2));
    for b in 0..batch {
        for j in 0..shape.dense2 {
            let a = cache.a2[[b, j]];
            dz2[[b, j]] = dout[b] * w3[j] * (T::one() - a * a);
        }
    }
    general_mat_mul(
        T::one(),
        &cache.a1.t(),
        &dz2,
        T::zero(),
        &mut mat_mut(&mut grad[o.w2..o.b2], shape.dense1, shape.dense2),
    );
    ArrayViewMut1::from(&mut grad[o.b2..o.w3]).assign(&dz2.sum_axis(Axis(0)));

    let mut dz1 = dz2.dot(&mat(&params[o.w2..o.b2], shape.dense1, shape.dense2).t());
    dz1.zip_mut_with(&cache.a1, |d, &a| *d *= T::one() - a * a);
    general_mat_mul(
        T::one(),
        &cache.head_input.t(),
        &dz1,
        T::zero(),
        &mut mat_mut(&mut grad[o.w1..o.b1], head_in, shape.dense1),
    );
    ArrayViewMut1::from(&mut grad[o.b1..o.w2]).assign(&dz1.sum_axis(Axis(0)));

    let du = dz1.dot(&mat(&params[o.w1..o.b1], head_in, shape.dense1).t());
    let mut dh = du.slice(s![.., ..h]).to_owned();
    let mut dc = Array2::<T>::zeros((batch, h));

    grad[o.wx..o.w1].iter_mut().for_each(|g| *g = T::zero());
    let wh = mat(&params[o.wh..o.b], h, 4 * h);
    let mut dz = Array2::<T>::zeros((batch, 4 * h));
    for t in (0..cache.gates.len()).rev() {
        let gates = &cache.gates[t];
        let tc = &cache.cell_tanh[t];
        let c_prev = &cache.cells[t];
        for b in 0..batch {
            for j in 0..h {
                let (i, f, g, og) = (gates[[b, j]], gates[[b, h + j]], gates[[b, 2 * h + j]], gates[[b, 3 * h + j]]);
                let tcv = tc[[b, j]];
                let dhv = dh[[b, j]];
                let dcv = dc[[b, j]] + dhv * og * (T::one() - tcv * tcv);
                dz[[b, j]] = dcv * g * i * (T::one() - i);
                dz[[b, h + j]] = dcv * c_prev[[b, j]] * f * (T::one() - f);
                dz[[b, 2 * h + j]] = dcv * i * (T::one() - g * g);
                dz[[b, 3 * h + j]] = dhv * tcv * og * (T::one() - og);
                dc[[b, j]] = dcv * f;
            }
        }
        general_mat_mul(
            T::one(),
            &seq[t].t(),
            &dz,
            T::one(),
            &mut mat_mut(&mut grad[o.wx..o.wh], shape.channels, 4 * h),
        );
        general_mat_mul(
            T::one(),
            &cache.hidden[t].t(),
            &dz,
            T::one(),
            &mut mat_mut(&mut grad[o.wh..o.b], h, 4 * h),
        );
        let mut gb = ArrayViewMut1::from(&mut grad[o.b..o.w1]);
        gb += &dz.sum_axis(Axis(0));
        if t > 0 {
            dh = dz.dot(&wh.t());
        }
    }
    loss
}

/// Columns of a `rows × cols` (rows ≥ cols) matrix orthonormalized by
/// modified Gram–Schmidt with one reorthogonalization pass.
fn orthonormal_columns(mut a: Array2<f64>) -> Array2<f64> {
    let cols = a.ncols();
    for j in 0..cols {
        for _ in 0..2 {
            for k in 0..j {
                let proj = a.column(j).dot(&a.column(k));
                let qk = a.column(k).to_owned();
                a.column_mut(j).scaled_add(-proj, &qk);
            }
        }
        let norm = a.column(j).dot(&a.column(j)).sqrt();
        if norm > 0.0 {
            a.column_mut(j).mapv_inplace(|v| v / norm);
        }
    }
    a
}

impl<T: Scalar> Lstm<T> {
    pub fn zeros(layout: SequenceLayout, hidden: usize, dense1: usize, dense2: usize) -> Self {
        let shape = LstmShape {
            steps: layout.steps,
            channels: layout.channels,
            n_static: layout.n_static,
            hidden,
            dense1,
            dense2,
        };
        Self {
            params: vec![T::zero(); shape.n_params()],
            shape,
            layout,
        }
    }

    /// Glorot-uniform input and dense weights, orthogonal recurrent weights,
    /// zero biases except a forget-gate bias of 1.
    pub fn init<R: Rng>(layout: SequenceLayout, hidden: usize, dense1: usize, dense2: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(layout, hidden, dense1, dense2);
        let sh = m.shape;
        let o = sh.offsets();
        let g = 4 * hidden;
        glorot(rng, sh.channels, g, &mut m.params[o.wx..o.wh]);
        let normal = Array2::<f64>::from_shape_fn((g, hidden), |_| rng.sample(StandardNormal));
        let q = orthonormal_columns(normal);
        // Wh = Qᵀ (H × 4H), orthonormal rows
        for r in 0..hidden {
            for c in 0..g {
                m.params[o.wh + r * g + c] = T::of(q[[c, r]]);
            }
        }
        for v in &mut m.params[o.b + hidden..o.b + 2 * hidden] {
            *v = T::one();
        }
        glorot(rng, hidden + sh.n_static, sh.dense1, &mut m.params[o.w1..o.b1]);
        glorot(rng, sh.dense1, sh.dense2, &mut m.params[o.w2..o.b2]);
        glorot(rng, sh.dense2, 1, &mut m.params[o.w3..o.b3]);
        m
    }

    pub fn recurrent_weights(&self) -> ArrayView2<'_, T> {
        let o = self.shape.offsets();
        mat(&self.params[o.wh..o.b], self.shape.hidden, 4 * self.shape.hidden)
    }

    pub fn recurrent_weights_mut(&mut self) -> ArrayViewMut2<'_, T> {
        let o = self.shape.offsets();
        let h = self.shape.hidden;
        mat_mut(&mut self.params[o.wh..o.b], h, 4 * h)
    }

    pub fn input_weights(&self) -> ArrayView2<'_, T> {
        let o = self.shape.offsets();
        mat(&self.params[o.wx..o.wh], self.shape.channels, 4 * self.shape.hidden)
    }

    pub fn gate_bias(&self) -> &[T] {
        let o = self.shape.offsets();
        &self.params[o.b..o.w1]
    }

    pub fn forward(&self, x: ArrayView2<T>) -> Result<(Vec<Array2<T>>, LstmCache<T>)> {
        let (seq, statics) = self.layout.shape_inputs(x)?;
        let cache = lstm_forward(&self.shape, &self.params, &seq, statics.view());
        Ok((seq, cache))
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        Ok(self.forward(x)?.1.output)
    }

    /// Final hidden state for every row.
    pub fn final_hidden(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        let (_, cache) = self.forward(x)?;
        Ok(cache.hidden[cache.hidden.len() - 1].clone())
    }
}

impl<T: Scalar> Differentiable<T> for Lstm<T> {
    fn params(&self) -> &[T] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn loss_and_grad(&self, x: ArrayView2<T>, y: ArrayView1<T>, grad: &mut [T]) -> T {
        let (seq, cache) = self.forward(x).expect("layout validated before training");
        lstm_backward(&self.shape, &self.params, &seq, &cache, y, grad)
    }

    fn loss(&self, x: ArrayView2<T>, y: ArrayView1<T>) -> T {
        let out = self.predict(x).expect("layout validated before training");
        let n = T::from_usize_lossy(y.len());
        out.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n
    }
}
