//! Two-hidden-layer tanh perceptron with a linear output.
//!
//! Parameters live in one flat vector laid out as
//! `W1 (in×n1), b1, W2 (n1×n2), b2, w3 (n2), b3`, all row-major.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::train::Differentiable;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpShape {
    pub inputs: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

impl MlpShape {
    fn offsets(&self) -> Offsets {
        let w1 = 0;
        let b1 = w1 + self.inputs * self.hidden1;
        let w2 = b1 + self.hidden1;
        let b2 = w2 + self.hidden1 * self.hidden2;
        let w3 = b2 + self.hidden2;
        let b3 = w3 + self.hidden2;
        Offsets {
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
pub struct Mlp<T> {
    pub shape: MlpShape,
    pub params: Vec<T>,
}

/// Activations kept from the forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache<T> {
    pub a1: Array2<T>,
    pub a2: Array2<T>,
    pub output: Array1<T>,
}

pub(crate) fn glorot<T: Scalar, R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, out: &mut [T]) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in out {
        *v = T::of(rng.random_range(-limit..limit));
    }
}

fn mat<T>(p: &[T], rows: usize, cols: usize) -> ArrayView2<'_, T> {
    ArrayView2::from_shape((rows, cols), p).expect("parameter block shape")
}

fn mat_mut<T>(p: &mut [T], rows: usize, cols: usize) -> ArrayViewMut2<'_, T> {
    ArrayViewMut2::from_shape((rows, cols), p).expect("parameter block shape")
}

/// `tanh(x W + b)`
fn dense_tanh<T: Scalar>(x: ArrayView2<T>, w: ArrayView2<T>, b: &[T]) -> Array2<T> {
    let mut z = x.dot(&w);
    for mut row in z.rows_mut() {
        for (v, &bb) in row.iter_mut().zip(b) {
            *v = (*v + bb).tanh();
        }
    }
    z
}

pub fn mlp_forward<T: Scalar>(shape: &MlpShape, params: &[T], x: ArrayView2<T>) -> MlpCache<T> {
    let o = shape.offsets();
    let (n_in, h1, h2) = (shape.inputs, shape.hidden1, shape.hidden2);
    let a1 = dense_tanh(x, mat(&params[o.w1..o.b1], n_in, h1), &params[o.b1..o.w2]);
    let a2 = dense_tanh(a1.view(), mat(&params[o.w2..o.b2], h1, h2), &params[o.b2..o.w3]);
    let output = a2.dot(&ArrayView1::from(&params[o.w3..o.b3])) + params[o.b3];
    MlpCache { a1, a2, output }
}

/// Mean-squared-error loss over the batch and its exact gradient, written
/// into `grad` (same layout as the parameters).
pub fn mlp_backward<T: Scalar>(
    shape: &MlpShape,
    params: &[T],
    x: ArrayView2<T>,
    cache: &MlpCache<T>,
    y: ArrayView1<T>,
    grad: &mut [T],
) -> T {
    let o = shape.offsets();
    let (n_in, h1, h2) = (shape.inputs, shape.hidden1, shape.hidden2);
    let batch = T::from_usize_lossy(y.len());
    let resid = &cache.output - &y;
    let loss = resid.iter().map(|&r| r * r).sum::<T>() / batch;
    let dout = resid.mapv(|r| T::of(2.0) * r / batch);

    // output layer
    {
        let mut gw3 = ArrayViewMut1::from(&mut grad[o.w3..o.b3]);
        gw3.assign(&cache.a2.t().dot(&dout));
    }
    grad[o.b3] = dout.sum();

    let w3 = ArrayView1::from(&params[o.w3..o.b3]);
    let mut dz2 = Array2::<T>::zeros((y.len(), h2));
    for ((mut row, &d), a_row) in dz2.rows_mut().into_iter().zip(dout.iter()).zip(cache.a2.rows()) {
        for ((v, &w), &a) in row.iter_mut().zip(w3.iter()).zip(a_row.iter()) {
            *v = d * w * (T::one() - a * a);
        }
    }
    general_mat_mul(T::one(), &cache.a1.t(), &dz2, T::zero(), &mut mat_mut(&mut grad[o.w2..o.b2], h1, h2));
    ArrayViewMut1::from(&mut grad[o.b2..o.w3]).assign(&dz2.sum_axis(Axis(0)));

    let mut dz1 = dz2.dot(&mat(&params[o.w2..o.b2], h1, h2).t());
    dz1.zip_mut_with(&cache.a1, |d, &a| *d *= T::one() - a * a);
    general_mat_mul(T::one(), &x.t(), &dz1, T::zero(), &mut mat_mut(&mut grad[o.w1..o.b1], n_in, h1));
    ArrayViewMut1::from(&mut grad[o.b1..o.w2]).assign(&dz1.sum_axis(Axis(0)));
    loss
}

impl<T: Scalar> Mlp<T> {
    pub fn zeros(shape: MlpShape) -> Self {
        Self {
            shape,
            params: vec![T::zero(); shape.n_params()],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(shape: MlpShape, rng: &mut R) -> Self {
        let mut m = Self::zeros(shape);
        let o = shape.offsets();
        glorot(rng, shape.inputs, shape.hidden1, &mut m.params[o.w1..o.b1]);
        glorot(rng, shape.hidden1, shape.hidden2, &mut m.params[o.w2..o.b2]);
        glorot(rng, shape.hidden2, 1, &mut m.params[o.w3..o.b3]);
        m
    }

    pub fn output_bias(&self) -> T {
        self.params[self.shape.offsets().b3]
    }

    pub fn forward(&self, x: ArrayView2<T>) -> MlpCache<T> {
        mlp_forward(&self.shape, &self.params, x)
    }

    pub fn predict(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        if x.ncols() != self.shape.inputs {
            return Err(Error::MaskMismatch {
                expected: self.shape.inputs,
                got: x.ncols(),
            });
        }
        Ok(self.forward(x).output)
    }
}

impl<T: Scalar> Differentiable<T> for Mlp<T> {
    fn params(&self) -> &[T] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    fn loss_and_grad(&self, x: ArrayView2<T>, y: ArrayView1<T>, grad: &mut [T]) -> T {
        let cache = self.forward(x);
        mlp_backward(&self.shape, &self.params, x, &cache, y, grad)
    }

    fn loss(&self, x: ArrayView2<T>, y: ArrayView1<T>) -> T {
        let out = self.forward(x).output;
        let n = T::from_usize_lossy(y.len());
        out.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, GRAD_CHECK_STEP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> (Array2<f64>, Array1<f64>) {
        let x = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(rows, |_| rng.random_range(-1.0..1.0));
        (x, y)
    }

    #[test]
    fn zero_weights_output_bias() {
        let shape = MlpShape {
            inputs: 3,
            hidden1: 4,
            hidden2: 4,
        };
        let mut m = Mlp::<f64>::zeros(shape);
        let n = m.params.len();
        m.params[n - 1] = 0.75;
        let x = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 - 4.0);
        assert!(m.predict(x.view()).unwrap().iter().all(|&v| v == 0.75));
        assert_eq!(m.output_bias(), 0.75);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = MlpShape {
            inputs: 5,
            hidden1: 8,
            hidden2: 4,
        };
        let m = Mlp::<f64>::init(shape, &mut rng);
        let (x, y) = random_batch(&mut rng, 7, 5);
        let mut g = vec![0.0; shape.n_params()];
        m.loss_and_grad(x.view(), y.view(), &mut g);
        let err = grad_check(
            |p: &[f64]| {
                let out = mlp_forward(&shape, p, x.view()).output;
                out.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 7.0
            },
            &g,
            &m.params,
            GRAD_CHECK_STEP,
        );
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn rejects_wrong_width() {
        let m = Mlp::<f64>::zeros(MlpShape {
            inputs: 3,
            hidden1: 4,
            hidden2: 4,
        });
        assert!(matches!(
            m.predict(Array2::zeros((2, 4)).view()),
            Err(Error::MaskMismatch { expected: 3, got: 4 })
        ));
    }
}
