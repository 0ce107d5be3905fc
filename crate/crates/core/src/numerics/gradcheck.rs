use crate::scalar::Scalar;

/// Central-difference step used by the gradient checks.
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Largest per-coordinate relative error between `analytic` and a central
/// finite-difference gradient of `f` at `theta0`, measured as
/// `|g_fd − g_an| / max(1, |g_fd| + |g_an|)`.
pub fn grad_check<T, F>(mut f: F, analytic: &[T], theta0: &[T], step: T) -> T
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    assert_eq!(analytic.len(), theta0.len(), "grad_check: length mismatch");
    let mut theta = theta0.to_vec();
    let mut worst = T::zero();
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + step;
        let up = f(&theta);
        theta[i] = orig - step;
        let down = f(&theta);
        theta[i] = orig;
        let fd = (up - down) / (T::of(2.0) * step);
        let err = (fd - analytic[i]).abs() / T::one().max(fd.abs() + analytic[i].abs());
        worst = worst.max(err);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let theta = [0.5, -1.25, 3.0, 10.0];
        let analytic: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
        let err = grad_check(|t: &[f64]| t.iter().map(|v| v * v).sum(), &analytic, &theta, GRAD_CHECK_STEP);
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn detects_wrong_gradient() {
        let theta = [1.0, 2.0];
        let err = grad_check(|t: &[f64]| t[0] * t[1], &[2.0, 2.0], &theta, GRAD_CHECK_STEP);
        assert!(err > 0.1);
    }
}
