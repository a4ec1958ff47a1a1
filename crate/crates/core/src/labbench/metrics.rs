//! Error measures and fits used by the experiments.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Angle in degrees between the lines spanned by `p` and `q`, in `[0, 90]`.
///
/// Computed as `2 atan2(|a - b|, |a + b|)` on the unit vectors with `b`
/// sign-aligned to `a`, which stays accurate for tiny angles where
/// `acos` of the cosine does not.
pub fn eigvec_angle(p: &DVector<f64>, q: &DVector<f64>) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    let np = p.norm();
    let nq = q.norm();
    if np == 0.0 || nq == 0.0 {
        return Err(Error::ZeroVector);
    }
    let a = p / np;
    let mut b = q / nq;
    if a.dot(&b) < 0.0 {
        b = -b;
    }
    let theta = 2.0 * (&a - &b).norm().atan2((&a + &b).norm());
    Ok(theta.to_degrees().clamp(0.0, 90.0))
}

/// Largest column-wise angle between two blocks with the same shape.
pub fn max_angle(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::DimensionMismatch {
            expected: p.ncols(),
            found: q.ncols(),
        });
    }
    let mut worst = 0.0f64;
    for j in 0..p.ncols() {
        let a = eigvec_angle(&p.column(j).into_owned(), &q.column(j).into_owned())?;
        worst = worst.max(a);
    }
    Ok(worst)
}

/// `max_i |a_i - b_i|`.
pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `|p - s q|` with the sign `s` that maximizes `<p, q>`.
pub fn aligned_distance(p: &DVector<f64>, q: &DVector<f64>) -> f64 {
    if p.dot(q) >= 0.0 {
        (p - q).norm()
    } else {
        (p + q).norm()
    }
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Slope of `log2 y` against `log2 x`.
pub fn log2_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log2()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log2()).collect();
    slope(&lx, &ly)
}

/// Median of a non-empty slice (mean of the two middle values for even
/// lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_vec(x.to_vec())
    }

    #[test]
    fn angles() {
        assert_eq!(eigvec_angle(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap(), 0.0);
        assert!((eigvec_angle(&v(&[1.0, 0.0]), &v(&[0.0, 3.0])).unwrap() - 90.0).abs() < 1e-12);
        let a = eigvec_angle(&v(&[1.0, 0.0]), &v(&[1.0, 1.0])).unwrap();
        assert!((a - 45.0).abs() < 1e-12);
        let b = eigvec_angle(&v(&[1.0, 0.0]), &v(&[-1.0, -1.0])).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            eigvec_angle(&v(&[0.0, 0.0]), &v(&[1.0, 0.0])),
            Err(Error::ZeroVector)
        );
    }

    #[test]
    fn tiny_angles_resolve() {
        let a = eigvec_angle(&v(&[1.0, 0.0]), &v(&[1.0, 1e-12])).unwrap();
        assert!((a - 1e-12f64.to_degrees()).abs() < 1e-20);
    }

    #[test]
    fn slopes_and_medians() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|t| 3.0 / t).collect();
        assert!((log2_slope(&x, &y) + 1.0).abs() < 1e-12);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
