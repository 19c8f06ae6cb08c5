//! Central finite differences, used to check analytic gradients.

use alloc::vec::Vec;

use crate::matrix::Matrix;

/// Step used for the central differences throughout the test suites.
pub const FD_STEP: f64 = 1e-5;

/// Numerical gradient of a scalar function of several matrices.
///
/// `f` is evaluated at `inputs` with one entry shifted by `±h` at a time.
pub fn central_difference<F>(mut f: F, inputs: &[Matrix], h: f64) -> Vec<Matrix>
where
    F: FnMut(&[Matrix]) -> f64,
{
    let mut work: Vec<Matrix> = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for k in 0..inputs.len() {
        let (r, c) = inputs[k].shape();
        let mut g = Matrix::zeros(r, c);
        for j in 0..inputs[k].len() {
            let orig = work[k].as_slice()[j];
            work[k].as_mut_slice()[j] = orig + h;
            let plus = f(&work);
            work[k].as_mut_slice()[j] = orig - h;
            let minus = f(&work);
            work[k].as_mut_slice()[j] = orig;
            g.as_mut_slice()[j] = (plus - minus) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

/// Central difference of `f` along the listed coordinates only.
/// `coords` holds `(input index, flat entry index)` pairs.
pub fn central_difference_at<F>(mut f: F, inputs: &[Matrix], coords: &[(usize, usize)], h: f64) -> Vec<f64>
where
    F: FnMut(&[Matrix]) -> f64,
{
    let mut work: Vec<Matrix> = inputs.to_vec();
    coords
        .iter()
        .map(|&(k, j)| {
            let orig = work[k].as_slice()[j];
            work[k].as_mut_slice()[j] = orig + h;
            let plus = f(&work);
            work[k].as_mut_slice()[j] = orig - h;
            let minus = f(&work);
            work[k].as_mut_slice()[j] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)` over flattened values; 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}
