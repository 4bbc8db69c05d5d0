//! Small dense linear algebra: 2-vectors, symmetric eigenvalues, hashing.
//!
//! The matrices in this crate are tiny (a planar wrench space is
//! 3-dimensional), so a cyclic Jacobi sweep is both simple and accurate
//! enough; no external solver is pulled in for the production path.

use crate::scalar::Real;

// ---------------------------------------------------------------------------
// 2-vectors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vec2<R> {
    pub x: R,
    pub y: R,
}

impl<R: Real> Vec2<R> {
    pub fn new(x: R, y: R) -> Self {
        Vec2 { x, y }
    }

    pub fn zero() -> Self {
        Vec2 { x: R::zero(), y: R::zero() }
    }

    pub fn from_angle(theta: R) -> Self {
        Vec2 { x: theta.cos(), y: theta.sin() }
    }

    pub fn dot(self, other: Self) -> R {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product of two in-plane vectors.
    pub fn cross_z(self, other: Self) -> R {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> R {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: R) -> Self {
        Vec2 { x: self.x * s, y: self.y * s }
    }

    pub fn add(self, other: Self) -> Self {
        Vec2 { x: self.x + other.x, y: self.y + other.y }
    }

    pub fn sub(self, other: Self) -> Self {
        Vec2 { x: self.x - other.x, y: self.y - other.y }
    }

    /// Counter-clockwise rotation by 90 degrees.
    pub fn rot90(self) -> Self {
        Vec2 { x: -self.y, y: self.x }
    }
}

// ---------------------------------------------------------------------------
// Symmetric eigenvalues (cyclic Jacobi)
// ---------------------------------------------------------------------------

/// Eigenvalues of a symmetric `n x n` matrix stored row-major, ascending.
///
/// Cyclic Jacobi rotations; converges quadratically for the small matrices
/// used here. Off-diagonal mass below `1e-14 * frobenius` stops the sweep.
pub fn symmetric_eigenvalues<R: Real>(a: &[R], n: usize) -> Vec<R> {
    assert_eq!(a.len(), n * n, "matrix storage must be n*n");
    let mut m: Vec<R> = a.to_vec();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![m[0]];
    }

    let frob: R = m.iter().map(|v| *v * *v).sum::<R>().sqrt();
    let tol = R::from_f64_lossy(1e-14) * (frob + R::one());

    for _sweep in 0..64 {
        let mut off = R::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[p * n + q] * m[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == R::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (R::two() * apq);
                // Stable tangent of the rotation angle.
                let t = {
                    let sign = if theta >= R::zero() { R::one() } else { -R::one() };
                    sign / (theta.abs() + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }

    let mut eig: Vec<R> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("eigenvalues are finite"));
    eig
}

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit hash, used to fingerprint configs inside checkpoints.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn vec2_cross_and_rot90_agree() {
        let a = Vec2::new(0.3, -0.7);
        let b = Vec2::new(1.1, 0.2);
        // cross_z(a, b) == dot(rot90(a), b)
        assert_relative_eq!(a.cross_z(b), a.rot90().dot(b), epsilon = 1e-15);
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix() {
        let a = [3.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 2.0];
        let eig = symmetric_eigenvalues(&a, 3);
        assert_relative_eq!(eig[0], -1.0, epsilon = 1e-12);
        assert_relative_eq!(eig[1], 2.0, epsilon = 1e-12);
        assert_relative_eq!(eig[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_of_two_by_two() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let a = [2.0, 1.0, 1.0, 2.0];
        let eig = symmetric_eigenvalues(&a, 2);
        assert_relative_eq!(eig[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(eig[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_match_trace_and_determinant() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 1.5];
        let eig = symmetric_eigenvalues(&a, 3);
        let trace: f64 = eig.iter().sum();
        assert_relative_eq!(trace, 8.5, epsilon = 1e-10);
        let det: f64 = eig.iter().product();
        // det by cofactor expansion of the matrix above.
        let expected = 4.0 * (3.0 * 1.5 - 0.04) - 1.0 * (1.5 - (-0.1)) + 0.5 * (-0.2 - 1.5);
        assert_relative_eq!(det, expected, epsilon = 1e-10);
    }

    #[test]
    fn fnv_matches_published_vectors() {
        assert_eq!(fnv1a_64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a_64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a_64(b"foobar"), 0x85944171f73967e8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn random_symmetric_eigen_sum_matches_trace(
            vals in proptest::collection::vec(-10.0f64..10.0, 6)
        ) {
            // Build symmetric 3x3 from 6 free entries.
            let a = [
                vals[0], vals[1], vals[2],
                vals[1], vals[3], vals[4],
                vals[2], vals[4], vals[5],
            ];
            let eig = symmetric_eigenvalues(&a, 3);
            let trace: f64 = eig.iter().sum();
            prop_assert!((trace - (vals[0] + vals[3] + vals[5])).abs() < 1e-8);
        }

        #[test]
        fn gram_matrix_eigenvalues_nonnegative(
            vals in proptest::collection::vec(-5.0f64..5.0, 12)
        ) {
            // G is 3x4; G * G^T is positive semidefinite.
            let g = &vals;
            let mut gram = [0.0f64; 9];
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..4 {
                        gram[i * 3 + j] += g[i * 4 + k] * g[j * 4 + k];
                    }
                }
            }
            let eig = symmetric_eigenvalues(&gram, 3);
            for e in eig {
                prop_assert!(e > -1e-9);
            }
        }
    }
}
