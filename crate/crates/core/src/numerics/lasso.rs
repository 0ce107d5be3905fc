use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const LASSO_TOL: f64 = 1e-6;
pub const LASSO_MAX_ITER: usize = 10_000;
pub const LAMBDA_PATH_LEN: usize = 100;
pub const LAMBDA_PATH_RATIO: f64 = 1e-3;

/// `min_w (1/(2L)) ‖y − X w‖² + λ ‖w‖₁` over a centered design and target.
#[derive(Clone, Copy, Debug)]
pub struct LassoProblem<'a, T> {
    pub x: ArrayView2<'a, T>,
    pub y: &'a [T],
    pub lambda: T,
}

impl<'a, T: Scalar> LassoProblem<'a, T> {
    pub fn new(x: ArrayView2<'a, T>, y: &'a [T], lambda: T) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::ShapeMismatch(format!(
                "lasso design has {} rows, target has {}",
                x.nrows(),
                y.len()
            )));
        }
        if x.nrows() == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if !(lambda >= T::zero()) {
            return Err(Error::Config(format!("lasso lambda must be >= 0, got {lambda}")));
        }
        Ok(Self { x, y, lambda })
    }

    pub fn objective(&self, w: &[T]) -> T {
        let l = T::from_usize_lossy(self.y.len());
        let mut rss = T::zero();
        for (row, &target) in self.x.rows().into_iter().zip(self.y) {
            let pred: T = row.iter().zip(w).map(|(&a, &b)| a * b).sum();
            rss += (target - pred) * (target - pred);
        }
        rss / (T::of(2.0) * l) + self.lambda * w.iter().map(|v| v.abs()).sum::<T>()
    }
}

#[derive(Clone, Debug)]
pub struct LassoFit<T> {
    pub weights: Vec<T>,
    pub sweeps: usize,
    /// `false` when `max_iter` sweeps ran out before the tolerance was met.
    pub converged: bool,
    /// Objective value before the first sweep and after every sweep.
    pub objective: Vec<T>,
    pub kkt_residual: T,
}

impl<T: Scalar> LassoFit<T> {
    pub fn nonzero(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != T::zero())
            .map(|(j, _)| j)
            .collect()
    }
}

pub fn soft_threshold<T: Scalar>(z: T, lambda: T) -> T {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        T::zero()
    }
}

fn transposed<T: Scalar>(x: ArrayView2<T>) -> Vec<Vec<T>> {
    (0..x.ncols()).map(|j| x.column(j).to_vec()).collect()
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&u, &v)| u * v).sum()
}

/// Smallest `λ` at which the solution is identically zero: `max_j |x_jᵀ y| / L`.
pub fn lambda_max<T: Scalar>(x: ArrayView2<T>, y: &[T]) -> T {
    let l = T::from_usize_lossy(y.len().max(1));
    (0..x.ncols())
        .map(|j| x.column(j).iter().zip(y).map(|(&a, &b)| a * b).sum::<T>().abs() / l)
        .fold(T::zero(), T::max)
}

/// 100 geometrically spaced values from `λ_max` down to `1e-3 λ_max`.
pub fn lambda_path<T: Scalar>(x: ArrayView2<T>, y: &[T]) -> Vec<T> {
    let top = lambda_max(x, y);
    let ratio = T::of(LAMBDA_PATH_RATIO);
    let last = T::from_usize_lossy(LAMBDA_PATH_LEN - 1);
    (0..LAMBDA_PATH_LEN)
        .map(|i| {
            if i == 0 {
                top
            } else if i == LAMBDA_PATH_LEN - 1 {
                top * ratio
            } else {
                top * ratio.powf(T::from_usize_lossy(i) / last)
            }
        })
        .collect()
}

/// Largest violation of the Lasso optimality conditions at `w`:
/// `|g_j − λ sign(w_j)|` on the support and `max(0, |g_j| − λ)` off it,
/// with `g = Xᵀ(y − X w) / L`.
pub fn kkt_residual<T: Scalar>(problem: &LassoProblem<T>, w: &[T]) -> T {
    let l = T::from_usize_lossy(problem.y.len());
    let resid: Vec<T> = problem
        .x
        .rows()
        .into_iter()
        .zip(problem.y)
        .map(|(row, &t)| t - row.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>())
        .collect();
    let mut worst = T::zero();
    for (j, &wj) in w.iter().enumerate() {
        let g = problem
            .x
            .column(j)
            .iter()
            .zip(&resid)
            .map(|(&a, &b)| a * b)
            .sum::<T>()
            / l;
        let v = if wj == T::zero() {
            (g.abs() - problem.lambda).max(T::zero())
        } else {
            (g - problem.lambda * wj.signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Cyclic coordinate descent from `w = 0`.
pub fn lasso_cd<T: Scalar>(problem: &LassoProblem<T>, tol: T, max_iter: usize) -> LassoFit<T> {
    lasso_cd_from(problem, vec![T::zero(); problem.x.ncols()], tol, max_iter)
}

/// Cyclic coordinate descent from a warm start.
///
/// Stops once a full sweep changes no coefficient by more than `tol` and the
/// KKT residual is at most `tol`, or after `max_iter` sweeps.
pub fn lasso_cd_from<T: Scalar>(
    problem: &LassoProblem<T>,
    mut w: Vec<T>,
    tol: T,
    max_iter: usize,
) -> LassoFit<T> {
    let cols = transposed(problem.x);
    let l = T::from_usize_lossy(problem.y.len());
    let sq: Vec<T> = cols.iter().map(|c| dot(c, c) / l).collect();
    let mut resid: Vec<T> = problem.y.to_vec();
    for (c, &wj) in cols.iter().zip(&w) {
        if wj != T::zero() {
            for (r, &v) in resid.iter_mut().zip(c) {
                *r -= v * wj;
            }
        }
    }
    let objective_of = |resid: &[T], w: &[T]| -> T {
        dot(resid, resid) / (T::of(2.0) * l)
            + problem.lambda * w.iter().map(|v| v.abs()).sum::<T>()
    };
    let mut objective = vec![objective_of(&resid, &w)];
    let mut converged = false;
    let mut sweeps = 0;
    let mut kkt = T::infinity();
    while sweeps < max_iter {
        sweeps += 1;
        let mut max_change = T::zero();
        for (j, c) in cols.iter().enumerate() {
            if sq[j] == T::zero() {
                w[j] = T::zero();
                continue;
            }
            let old = w[j];
            let rho = dot(c, &resid) / l + old * sq[j];
            let new = soft_threshold(rho, problem.lambda) / sq[j];
            let delta = new - old;
            if delta != T::zero() {
                for (r, &v) in resid.iter_mut().zip(c) {
                    *r -= v * delta;
                }
                w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        objective.push(objective_of(&resid, &w));
        if max_change < tol {
            kkt = kkt_residual(problem, &w);
            if kkt <= tol {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        kkt = kkt_residual(problem, &w);
        log::warn!("lasso coordinate descent stopped after {sweeps} sweeps, kkt residual {kkt}");
    }
    LassoFit {
        weights: w,
        sweeps,
        converged,
        objective,
        kkt_residual: kkt,
    }
}
