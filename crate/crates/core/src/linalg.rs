//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! `vec` is column-major everywhere: `vec(M)` stacks the columns of `M`, which
//! is also nalgebra's storage order.

use nalgebra::{Matrix3, Vector3};
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::{Error, Matrix, Result, Vector};

/// Relative singular-value cutoff used for ranks and pseudo-inverses.
pub const RANK_TOL: f64 = 1e-10;

/// Projects `v` onto the Euclidean (Frobenius for matrices) ball of the given radius.
///
/// A point on the boundary is left untouched. An infinite radius is a no-op.
pub fn project_ball(v: &mut [f64], radius: f64) {
    if !radius.is_finite() {
        return;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > radius {
        let s = radius / norm;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn rank(m: &Matrix) -> usize {
    if m.is_empty() {
        return 0;
    }
    m.clone().svd(false, false).rank(RANK_TOL * spectral_norm(m).max(1.0))
}

/// Moore-Penrose pseudo-inverse.
pub fn pinv(m: &Matrix) -> Matrix {
    if m.is_empty() {
        return Matrix::zeros(m.ncols(), m.nrows());
    }
    let eps = RANK_TOL * spectral_norm(m).max(1.0);
    m.clone()
        .svd(true, true)
        .pseudo_inverse(eps)
        .expect("svd computed with both factors")
}

/// Column-major vectorisation.
pub fn vec_of(m: &Matrix) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &[f64], rows: usize, cols: usize) -> Result<Matrix> {
    crate::error::check_dim("unvec", rows * cols, v.len())?;
    Ok(Matrix::from_column_slice(rows, cols, v))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
            }
        }
    }
    out
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(a: &Matrix) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension {
            context: "spectral radius",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.complex_eigenvalues()
        .iter()
        .map(|z| z.re.hypot(z.im))
        .fold(0.0, f64::max))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn lambda_min_sym(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().symmetric_eigen().eigenvalues.min()
}

/// Skew-symmetric matrix `S(v)` with `S(v) u = v × u`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the skew-symmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Gram-Schmidt re-orthonormalisation of the columns of a near-rotation.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = r.column(0).normalize();
    let c1 = r.column(1) - c0 * c0.dot(&r.column(1));
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    Matrix3::from_columns(&[c0, c1, c2])
}

/// `max |RᵀR − I|` entrywise.
pub fn orthogonality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).amax()
}

/// Median of a slice (mean of the two middle values for even lengths).
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_projection_scales_only_outside() {
        let mut v = [3.0, 4.0];
        project_ball(&mut v, 10.0);
        assert_eq!(v, [3.0, 4.0]);
        project_ball(&mut v, 5.0);
        assert_eq!(v, [3.0, 4.0]);
        project_ball(&mut v, 1.0);
        assert!((norm(&v) - 1.0).abs() < 1e-15);
        assert!((v[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn kron_matches_definition() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = Matrix::from_row_slice(1, 2, &[0.5, -1.0]);
        let k = kron(&a, &b);
        let expected =
            Matrix::from_row_slice(2, 4, &[0.5, -1.0, 1.0, -2.0, 1.5, -3.0, 2.0, -4.0]);
        assert_eq!(k, expected);
    }

    #[test]
    fn vec_is_column_major() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec_of(&m).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
        assert_eq!(unvec(vec_of(&m).as_slice(), 2, 2).unwrap(), m);
    }

    #[test]
    fn skew_and_vee_invert() {
        let v = Vector3::new(0.3, -1.2, 2.0);
        assert_eq!(vee(&skew(&v)), v);
        let u = Vector3::new(1.0, 2.0, 3.0);
        assert!((skew(&v) * u - v.cross(&u)).norm() < 1e-15);
    }

    #[test]
    fn spectral_radius_of_rotation_scaled() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
        assert!((spectral_radius(&a).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn slope_of_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        assert!((ls_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
