//! One-sided Jacobi SVD and the cutoff pseudo-inverse built on it.
//!
//! One-sided Jacobi computes small singular values to high relative
//! accuracy, which matters here because the center matrices being inverted
//! have spectra spanning many orders of magnitude.

use crate::{real, Scalar};

use super::matrix::dot;
use super::{DenseMatrix, NumericsError, NumericsResult};

const MAX_SWEEPS: usize = 60;

/// Thin SVD `M = U diag(s) V^T` with singular values sorted descending.
struct Svd<S> {
    u: DenseMatrix<S>,
    s: Vec<S>,
    v: DenseMatrix<S>,
}

fn one_sided_jacobi<S: Scalar>(m: &DenseMatrix<S>) -> Svd<S> {
    if m.rows() < m.cols() {
        let t = one_sided_jacobi(&m.transpose());
        return Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        };
    }
    let rows = m.rows();
    let cols = m.cols();
    // Work on columns of W; V accumulates the right rotations.
    let mut w = m.transpose(); // rows of w are columns of m
    let mut v = DenseMatrix::identity(cols);
    let tol = real::<S>(1e-14);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols.saturating_sub(1) {
            for q in (p + 1)..cols {
                let (wp, wq) = w.two_rows_mut(p, q);
                let alpha = dot(wp, wp);
                let beta = dot(wq, wq);
                let gamma = dot(wp, wq);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = {
                    let denom = zeta.abs() + (S::one() + zeta * zeta).sqrt();
                    let t = S::one() / denom;
                    if zeta < S::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = c * t;
                for k in 0..rows {
                    let a = wp[k];
                    let b = wq[k];
                    wp[k] = c * a - s * b;
                    wq[k] = s * a + c * b;
                }
                for k in 0..cols {
                    let a = v[(k, p)];
                    let b = v[(k, q)];
                    v[(k, p)] = c * a - s * b;
                    v[(k, q)] = s * a + c * b;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<S> = (0..cols).map(|j| dot(w.row(j), w.row(j)).sqrt()).collect();
    order.sort_by(|&i, &j| {
        norms[j]
            .partial_cmp(&norms[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });

    let mut u = DenseMatrix::zeros(rows, cols);
    let mut s = Vec::with_capacity(cols);
    let mut vs = DenseMatrix::zeros(cols, cols);
    for (new_j, &old_j) in order.iter().enumerate() {
        let sigma = norms[old_j];
        s.push(sigma);
        if sigma > S::zero() {
            for i in 0..rows {
                u[(i, new_j)] = w[(old_j, i)] / sigma;
            }
        }
        for i in 0..cols {
            vs[(i, new_j)] = v[(i, old_j)];
        }
    }
    Svd { u, s, v: vs }
}

/// Singular values of `m`, sorted descending.
pub fn singular_values<S: Scalar>(m: &DenseMatrix<S>) -> Vec<S> {
    one_sided_jacobi(m).s
}

/// Moore–Penrose pseudo-inverse with singular values below
/// `eps_rel * s_max` treated as exactly zero.
pub fn pinv_cutoff<S: Scalar>(m: &DenseMatrix<S>, eps_rel: S) -> NumericsResult<DenseMatrix<S>> {
    assert!(eps_rel > S::zero(), "eps_rel must be positive");
    m.check_finite()?;
    let svd = one_sided_jacobi(m);
    let s_max = svd.s.first().copied().unwrap_or_else(S::zero);
    let cutoff = eps_rel * s_max;
    let kept = svd
        .s
        .iter()
        .take_while(|&&s| s >= cutoff && s > S::zero())
        .count();
    if kept == 0 {
        return Err(NumericsError::AllSingularValuesCut);
    }
    // M+ = V_k diag(1/s_k) U_k^T
    let mut out = DenseMatrix::zeros(m.cols(), m.rows());
    for k in 0..kept {
        let inv = S::one() / svd.s[k];
        for i in 0..m.cols() {
            let vik = svd.v[(i, k)] * inv;
            if vik == S::zero() {
                continue;
            }
            for j in 0..m.rows() {
                out[(i, j)] += vik * svd.u[(j, k)];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn diagonal_inverse() {
        let m = DenseMatrix::from_rows(2, 2, &[2.0f64, 0.0, 0.0, 1.0]);
        let p = pinv_cutoff(&m, 1e-8).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((p[(1, 1)] - 1.0).abs() < 1e-14);
        assert!(p[(0, 1)].abs() < 1e-15 && p[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn cutoff_forces_zero() {
        let m = DenseMatrix::from_rows(2, 2, &[1.0f64, 0.0, 0.0, 1e-15]);
        let p = pinv_cutoff(&m, 1e-8).unwrap();
        assert!((p[(0, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(p[(1, 1)], 0.0);
    }

    #[test]
    fn left_inverse_of_full_column_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = DenseMatrix::from_fn(6, 4, |_, _| rng.gen_range(-1.0..1.0));
        let p = pinv_cutoff(&m, 1e-8).unwrap();
        let pm = p.matmul(&m);
        let mut diff = DenseMatrix::<f64>::identity(4);
        diff.add_scaled(-1.0, &pm);
        assert!(diff.frobenius_norm() < 1e-10);
    }

    #[test]
    fn penrose_identity_on_retained_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = DenseMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0f64..1.0));
        let p = pinv_cutoff(&m, 1e-8).unwrap();
        let mpm = m.matmul(&p).matmul(&m);
        let mut diff = m.clone();
        diff.add_scaled(-1.0, &mpm);
        assert!(diff.frobenius_norm() < 1e-8 * m.frobenius_norm().max(1.0));
    }

    #[test]
    fn double_application_is_identity_on_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..5 {
            let m = DenseMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
            let p = pinv_cutoff(&m, 1e-8).unwrap();
            let pp = pinv_cutoff(&p, 1e-8).unwrap();
            let mut diff = m.clone();
            diff.add_scaled(-1.0, &pp);
            assert!(diff.frobenius_norm() < 1e-8 * m.frobenius_norm());
        }
    }

    #[test]
    fn zero_matrix_is_rank_zero() {
        let m = DenseMatrix::<f64>::zeros(3, 3);
        assert!(matches!(
            pinv_cutoff(&m, 1e-8),
            Err(NumericsError::AllSingularValuesCut)
        ));
    }

    #[test]
    fn singular_values_of_known_matrix() {
        let m = DenseMatrix::from_rows(2, 2, &[3.0, 0.0, 4.0, 5.0]);
        let s = singular_values(&m);
        // Known singular values of [[3,0],[4,5]]: sqrt(45) and sqrt(5).
        assert!((s[0] - 45.0f64.sqrt()).abs() < 1e-12);
        assert!((s[1] - 5.0f64.sqrt()).abs() < 1e-12);
    }
}
