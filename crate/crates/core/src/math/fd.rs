use super::Mat;
use crate::error::{Error, Result};

/// Central-difference gradient of a scalar function of one matrix.
pub fn finite_diff_grad<F>(mut f: F, x: &Mat, h: f64) -> Result<Mat>
where
    F: FnMut(&Mat) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid(format!(
            "finite-difference step must be > 0, got {h}"
        )));
    }
    let mut probe = x.clone();
    let mut grad = Mat::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let orig = x[(i, j)];
            probe[(i, j)] = orig + h;
            let up = f(&probe);
            probe[(i, j)] = orig - h;
            let down = f(&probe);
            probe[(i, j)] = orig;
            if !(up.is_finite() && down.is_finite()) {
                return Err(Error::Numeric(format!(
                    "objective not finite near entry ({i}, {j})"
                )));
            }
            grad[(i, j)] = (up - down) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// `||a - b|| / max(||a||, ||b||)`, or the absolute gap when both are tiny.
pub fn relative_error(a: &Mat, b: &Mat) -> f64 {
    let diff = (a - b).norm();
    let scale = a.norm().max(b.norm());
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::from_rows;

    #[test]
    fn quadratic_gradient() {
        let x = from_rows(&[vec![1.0, 2.0]]).unwrap();
        let g = finite_diff_grad(|m| m.iter().map(|v| v * v).sum(), &x, 1e-5).unwrap();
        assert!((g[(0, 0)] - 2.0).abs() < 1e-6);
        assert!((g[(0, 1)] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let x = Mat::from_element(3, 2, 0.7);
        let g = finite_diff_grad(|_| 42.0, &x, 1e-5).unwrap();
        assert_eq!(g, Mat::zeros(3, 2));
    }

    #[test]
    fn rejects_bad_step() {
        let x = Mat::zeros(1, 1);
        assert!(matches!(
            finite_diff_grad(|_| 0.0, &x, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            finite_diff_grad(|_| 0.0, &x, -1.0),
            Err(Error::InvalidArgument(_))
        ));
    }
}
