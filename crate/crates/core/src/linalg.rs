//! Small closed-form helpers for 2x2 matrices.

use crate::Mat2;

/// Eigenvalues `(min, max)` of the symmetric part of `m`.
pub fn sym_eigen2(m: &Mat2) -> (f64, f64) {
    let a = m[(0, 0)];
    let d = m[(1, 1)];
    let b = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean - radius, mean + radius)
}

/// Largest singular value.
pub fn spectral_norm2(m: &Mat2) -> f64 {
    sym_eigen2(&(m.transpose() * m)).1.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_of_diagonal_and_rotation() {
        assert_eq!(sym_eigen2(&Mat2::new(3.0, 0.0, 0.0, 1.0)), (1.0, 3.0));
        let (lo, hi) = sym_eigen2(&Mat2::new(2.0, 1.0, 1.0, 2.0));
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
        let rot = Mat2::new(0.0, -2.0, 2.0, 0.0);
        assert!((spectral_norm2(&rot) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_norm_matches_svd() {
        let m = Mat2::new(0.3, -1.2, 0.7, 0.05);
        let svd = m.svd(false, false);
        let expect = svd.singular_values.max();
        assert!((spectral_norm2(&m) - expect).abs() < 1e-13);
    }
}
