use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::{is_negligible_spread, Scalar};

/// Pearson correlation with a flag for zero-variance inputs.
///
/// A zero-variance input has no defined correlation; `rho` is then `0` and
/// `zero_variance` is set so callers can keep such pairs out of any
/// threshold-based elimination.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pearson<T> {
    pub rho: T,
    pub zero_variance: bool,
}

fn mean<T: Scalar>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::from_usize_lossy(x.len())
}

fn max_abs<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// Sample correlation `cov(x, y) / (sd(x) sd(y))` with `L - 1` denominators
/// (which cancel).
pub fn pearson<T: Scalar>(x: &[T], y: &[T]) -> Result<Pearson<T>> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch(format!(
            "pearson inputs have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: x.len(),
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    let n = x.len();
    let (nx, ny) = (sxx.sqrt(), syy.sqrt());
    let root_n = T::from_usize_lossy(n).sqrt();
    if is_negligible_spread(nx, root_n * max_abs(x), n)
        || is_negligible_spread(ny, root_n * max_abs(y), n)
    {
        return Ok(Pearson {
            rho: T::zero(),
            zero_variance: true,
        });
    }
    let rho = sxy / (nx * ny);
    Ok(Pearson {
        rho: rho.max(-T::one()).min(T::one()),
        zero_variance: false,
    })
}

/// Pairwise Pearson correlations of the columns of a sample matrix.
#[derive(Clone, Debug)]
pub struct CorrelationMatrix<T> {
    pub values: Array2<T>,
    /// Columns with zero variance; their off-diagonal entries are `0`.
    pub zero_variance: Vec<bool>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

pub fn correlation_matrix<T: Scalar>(x: ArrayView2<T>) -> Result<CorrelationMatrix<T>> {
    let (rows, cols) = x.dim();
    if rows < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: rows,
        });
    }
    let means = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &means.view().insert_axis(Axis(0));
    let root_n = T::from_usize_lossy(rows).sqrt();
    let mut norms = Vec::with_capacity(cols);
    let mut zero_variance = Vec::with_capacity(cols);
    for j in 0..cols {
        let c = centered.column(j);
        let norm = c.iter().map(|&v| v * v).sum::<T>().sqrt();
        let scale = x.column(j).iter().fold(T::zero(), |m, v| m.max(v.abs())) * root_n;
        zero_variance.push(is_negligible_spread(norm, scale, rows));
        norms.push(norm);
    }
    let gram = centered.t().dot(&centered);
    let mut values = Array2::<T>::zeros((cols, cols));
    for i in 0..cols {
        values[[i, i]] = T::one();
        for j in (i + 1)..cols {
            let rho = if zero_variance[i] || zero_variance[j] {
                T::zero()
            } else {
                (gram[[i, j]] / (norms[i] * norms[j]))
                    .max(-T::one())
                    .min(T::one())
            };
            values[[i, j]] = rho;
            values[[j, i]] = rho;
        }
    }
    Ok(CorrelationMatrix {
        values,
        zero_variance,
    })
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
pub fn r2_score<T: Scalar>(y_true: &[T], y_pred: &[T]) -> Result<T> {
    if y_true.len() != y_pred.len() {
        return Err(Error::ShapeMismatch(format!(
            "r2 inputs have lengths {} and {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: y_true.len(),
        });
    }
    let m = mean(y_true);
    let mut ss_tot = T::zero();
    let mut ss_res = T::zero();
    for (&y, &p) in y_true.iter().zip(y_pred) {
        ss_tot += (y - m) * (y - m);
        ss_res += (y - p) * (y - p);
    }
    let n = y_true.len();
    let scale = T::from_usize_lossy(n).sqrt() * max_abs(y_true);
    if is_negligible_spread(ss_tot.sqrt(), scale, n) {
        return Err(Error::ZeroVariance("r2 target"));
    }
    Ok(T::one() - ss_res / ss_tot)
}
