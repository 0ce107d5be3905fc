use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Affine least-squares fit `y ≈ X w + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeastSquares<T> {
    pub weights: Vec<T>,
    pub intercept: T,
    /// Numerical rank of the centered design matrix.
    pub rank: usize,
}

impl<T: Scalar> LeastSquares<T> {
    pub fn predict(&self, x: ArrayView2<T>) -> Result<Array1<T>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::MaskMismatch {
                expected: self.weights.len(),
                got: x.ncols(),
            });
        }
        let w = ndarray::ArrayView1::from(&self.weights[..]);
        Ok(x.dot(&w) + self.intercept)
    }
}

/// Minimizes `‖y − X w − b‖²` over `(w, b)`; rank-deficient designs resolve
/// to the minimum-norm `w`. The intercept is unpenalized (handled by
/// centering).
pub fn least_squares<T: Scalar>(x: ArrayView2<T>, y: &[T]) -> Result<LeastSquares<T>> {
    let (rows, cols) = x.dim();
    if rows != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "design has {rows} rows, target has {}",
            y.len()
        )));
    }
    if rows == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let n = T::from_usize_lossy(rows);
    let x_mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(cols));
    let y_mean = y.iter().copied().sum::<T>() / n;

    // column-major copy of the centered design: one Vec per column
    let columns: Vec<Vec<T>> = (0..cols)
        .map(|j| x.column(j).iter().map(|&v| v - x_mean[j]).collect())
        .collect();
    let yc: Vec<T> = y.iter().map(|&v| v - y_mean).collect();
    let (weights, rank) = min_norm_solve(columns, yc);
    let intercept = y_mean
        - weights
            .iter()
            .zip(x_mean.iter())
            .map(|(&w, &m)| w * m)
            .sum::<T>();
    Ok(LeastSquares {
        weights,
        intercept,
        rank,
    })
}

/// Reflects `x` onto `alpha e1`. On return `x` holds the Householder vector
/// `v` and the result is `(alpha, beta)` with `H = I − beta v vᵀ`.
fn householder<T: Scalar>(x: &mut [T]) -> Option<(T, T)> {
    let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if norm == T::zero() {
        return None;
    }
    let alpha = if x[0] >= T::zero() { -norm } else { norm };
    x[0] -= alpha;
    let vnorm2 = x.iter().map(|&v| v * v).sum::<T>();
    if vnorm2 == T::zero() {
        return None;
    }
    Some((alpha, T::of(2.0) / vnorm2))
}

fn reflect<T: Scalar>(v: &[T], beta: T, z: &mut [T]) {
    let s = v.iter().zip(z.iter()).map(|(&a, &b)| a * b).sum::<T>() * beta;
    for (zi, &vi) in z.iter_mut().zip(v) {
        *zi -= s * vi;
    }
}

/// Minimum-norm least-squares solution of `A z = y` where `columns[j]` is
/// column `j` of `A`. Returns the solution and the numerical rank.
///
/// Uses Householder QR with column pivoting to find the rank, then a second
/// QR of the leading trapezoid's transpose (complete orthogonal
/// decomposition) when the rank is deficient.
pub fn min_norm_solve<T: Scalar>(mut columns: Vec<Vec<T>>, mut y: Vec<T>) -> (Vec<T>, usize) {
    let n = columns.len();
    let m = y.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let kmax = m.min(n);
    let tol = T::epsilon() * T::from_usize_lossy(m.max(n));
    let mut alphas: Vec<T> = Vec::with_capacity(kmax);
    let mut leading = T::zero();
    for k in 0..kmax {
        let mut best = k;
        let mut best_norm = T::neg_infinity();
        for (j, col) in columns.iter().enumerate().skip(k) {
            let s = col[k..].iter().map(|&v| v * v).sum::<T>();
            if s > best_norm {
                best_norm = s;
                best = j;
            }
        }
        columns.swap(k, best);
        perm.swap(k, best);
        let norm = best_norm.sqrt();
        if k == 0 {
            leading = norm;
        }
        if norm == T::zero() || norm <= tol * leading {
            break;
        }
        let (head, tail) = columns.split_at_mut(k + 1);
        let v = &mut head[k][k..];
        let Some((alpha, beta)) = householder(v) else {
            break;
        };
        for col in tail.iter_mut() {
            reflect(v, beta, &mut col[k..]);
        }
        reflect(v, beta, &mut y[k..]);
        alphas.push(alpha);
    }
    let rank = alphas.len();
    let mut solution = vec![T::zero(); n];
    if rank == 0 {
        return (solution, 0);
    }
    // R1 is rank × n upper trapezoidal: R1[i][i] = alphas[i], R1[i][j] = columns[j][i] for j > i.
    let r1 = |i: usize, j: usize| -> T {
        if j < i {
            T::zero()
        } else if j == i {
            alphas[i]
        } else {
            columns[j][i]
        }
    };
    let c = &y[..rank];
    let z: Vec<T> = if rank == n {
        let mut z = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = c[i];
            for (j, &zj) in z.iter().enumerate().skip(i + 1) {
                s -= r1(i, j) * zj;
            }
            z[i] = s / alphas[i];
        }
        z
    } else {
        // QR of R1ᵀ (n × rank): its columns are the rows of R1.
        let mut bt: Vec<Vec<T>> = (0..rank).map(|i| (0..n).map(|j| r1(i, j)).collect()).collect();
        let mut reflectors: Vec<(Vec<T>, T)> = Vec::with_capacity(rank);
        let mut diag = Vec::with_capacity(rank);
        for k in 0..rank {
            let (head, tail) = bt.split_at_mut(k + 1);
            let v = &mut head[k][k..];
            let (alpha, beta) = householder(v).unwrap_or((T::zero(), T::zero()));
            for col in tail.iter_mut() {
                reflect(v, beta, &mut col[k..]);
            }
            reflectors.push((v.to_vec(), beta));
            diag.push(alpha);
        }
        // R1 = R2ᵀ Q2ᵀ; solve R2ᵀ u = c (lower triangular), then z = Q2 [u; 0].
        let mut u = vec![T::zero(); n];
        for i in 0..rank {
            let mut s = c[i];
            for l in 0..i {
                // R2[l][i] = bt[i][l] for l < i
                s -= bt[i][l] * u[l];
            }
            u[i] = if diag[i] == T::zero() { T::zero() } else { s / diag[i] };
        }
        for k in (0..rank).rev() {
            let (v, beta) = &reflectors[k];
            reflect(v, *beta, &mut u[k..]);
        }
        u
    };
    for (i, &p) in perm.iter().enumerate() {
        solution[p] = z[i];
    }
    (solution, rank)
}
