//! Dense complex linear algebra used by the dynamics and state modules.

use nalgebra::{DMatrix, DVector, SMatrix};

use crate::C64;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<C64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm: matrix must be square");
    let norm = norm1(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * C64::from(2f64.powi(-s));
    let id = DMatrix::<C64>::identity(n, n);
    let b = |k: usize| C64::from(PADE13[k]);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("expm: singular Padé denominator");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Column-stacking vectorisation of an `N×N` matrix.
pub fn vectorize<const N: usize>(m: &SMatrix<C64, N, N>) -> DVector<C64> {
    DVector::from_iterator(N * N, m.iter().copied())
}

pub fn unvectorize<const N: usize>(v: &DVector<C64>) -> SMatrix<C64, N, N> {
    SMatrix::<C64, N, N>::from_iterator(v.iter().copied())
}

/// Kronecker product of two square matrices of the same size.
pub fn kron<const N: usize>(a: &SMatrix<C64, N, N>, b: &SMatrix<C64, N, N>) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(N * N, N * N);
    for i in 0..N {
        for j in 0..N {
            let aij = a[(i, j)];
            if aij == C64::from(0.0) {
                continue;
            }
            for k in 0..N {
                for l in 0..N {
                    out[(i * N + k, j * N + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn hermiticity_defect<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn herm_eigen<const N: usize>(m: &SMatrix<C64, N, N>) -> (Vec<f64>, SMatrix<C64, N, N>) {
    let sym = (m + m.adjoint()) * C64::from(0.5);
    let eig = DMatrix::from_fn(N, N, |r, c| sym[(r, c)]).symmetric_eigen();
    let mut order: Vec<usize> = (0..N).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = SMatrix::<C64, N, N>::from_fn(|r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn min_eigenvalue<const N: usize>(m: &SMatrix<C64, N, N>) -> f64 {
    herm_eigen(m).0[0]
}

/// Square root of a positive semidefinite Hermitian matrix. Small negative
/// eigenvalues from round-off are clipped to zero.
pub fn sqrtm_psd<const N: usize>(m: &SMatrix<C64, N, N>) -> SMatrix<C64, N, N> {
    let (vals, vecs) = herm_eigen(m);
    let d = SMatrix::<C64, N, N>::from_diagonal(&nalgebra::SVector::<C64, N>::from_iterator(
        vals.iter().map(|&v| C64::from(v.max(0.0).sqrt())),
    ));
    vecs * d * vecs.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;

    #[test]
    fn expm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(-3.0, 0.0),
            C64::new(0.0, 2.0),
            C64::new(12.0, -1.0),
        ]));
        let e = expm(&a);
        for i in 0..3 {
            let want = a[(i, i)].exp();
            assert!((e[(i, i)] - want).norm() < 1e-12 * want.norm().max(1.0));
        }
    }

    #[test]
    fn expm_of_nilpotent_and_rotation() {
        // exp([[0, t], [0, 0]]) = [[1, t], [0, 1]]
        let a = DMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(7.5), C64::from(0.0), C64::from(0.0)]);
        let e = expm(&a);
        assert!((e[(0, 1)] - C64::from(7.5)).norm() < 1e-12);
        assert!((e[(0, 0)] - C64::from(1.0)).norm() < 1e-14);

        // exp(θ [[0, -1], [1, 0]]) is a rotation
        let th = 40.0;
        let a = DMatrix::from_row_slice(2, 2, &[C64::from(0.0), C64::from(-th), C64::from(th), C64::from(0.0)]);
        let e = expm(&a);
        assert!((e[(0, 0)].re - th.cos()).abs() < 1e-11);
        assert!((e[(1, 0)].re - th.sin()).abs() < 1e-11);
    }

    #[test]
    fn kron_matches_vec_identity() {
        // vec(A X B) = (B^T ⊗ A) vec(X)
        let a = Matrix2::new(C64::new(1.0, 2.0), C64::new(0.5, 0.0), C64::new(-1.0, 1.0), C64::new(3.0, 0.0));
        let b = Matrix2::new(C64::new(0.0, 1.0), C64::new(2.0, 0.0), C64::new(1.0, -1.0), C64::new(0.0, 0.0));
        let x = Matrix2::new(C64::new(1.0, 0.0), C64::new(2.0, 1.0), C64::new(0.0, 3.0), C64::new(-1.0, 0.0));
        let lhs = vectorize(&(a * x * b));
        let rhs = kron(&b.transpose(), &a) * vectorize(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn psd_square_root() {
        let m = Matrix2::new(C64::new(2.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, -1.0), C64::new(2.0, 0.0));
        let r = sqrtm_psd(&m);
        assert!((r * r - m).norm() < 1e-12);
        assert!(hermiticity_defect(&r) < 1e-12);
    }
}
