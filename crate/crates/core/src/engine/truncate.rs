//! Density matrices, basis truncation, and center-matrix extraction.

use crate::numerics::{sym_eig_desc, DenseMatrix};
use crate::{real, Scalar};

use super::superblock::CenterTensor;
use super::{EngineError, EngineResult};

/// Result of truncating one side's density matrix.
#[derive(Clone, Debug)]
pub struct Truncation<S: Scalar> {
    /// Column-orthonormal map from the enlarged basis to the kept one.
    pub isometry: DenseMatrix<S>,
    /// Weights of the kept states, descending.
    pub kept_weights: Vec<S>,
    /// The full spectrum, descending.
    pub spectrum: Vec<S>,
    /// Discarded weight `1 - sum(kept)`.
    pub trunc_error: S,
}

/// Reduced density matrices of the two enlarged blocks.
///
/// The left one traces out `(sbar, right block)`, the right one traces out
/// `(left block, s)`; both come back over the block-major composite
/// `(block, site)`.
pub fn density_matrices<S: Scalar>(
    psi: &CenterTensor<S>,
) -> EngineResult<(DenseMatrix<S>, DenseMatrix<S>)> {
    let deviation = (psi.norm() - S::one()).abs();
    if deviation > real::<S>(1e-8).max(S::epsilon() * real(100.0)) {
        return Err(EngineError::NotNormalized {
            deviation: deviation.to_f64().unwrap_or(f64::NAN),
        });
    }
    let (_, dr) = psi.dims();
    let m = psi.as_matrix();
    let mut rho_l = m.matmul(&m.transpose());
    rho_l.symmetrize();

    // Gram matrix over the storage columns (sbar, xibar), permuted into the
    // block-major composite (xibar, sbar).
    let gram = m.matmul_transa(&m);
    let map = |c: usize| -> usize {
        let xibar = c / 2;
        let sbar = c % 2;
        sbar * dr + xibar
    };
    let mut rho_r = DenseMatrix::from_fn(2 * dr, 2 * dr, |i, j| gram[(map(i), map(j))]);
    rho_r.symmetrize();
    Ok((rho_l, rho_r))
}

const TRACE_TOL: f64 = 1e-8;
const NEGATIVE_EIG_TOL: f64 = -1e-10;

/// Keeps at most `m` leading density-matrix eigenvectors without ever
/// splitting a degenerate multiplet: when the boundary falls inside a
/// cluster of weights equal within `degeneracy_tol`, the whole cluster is
/// dropped.
pub fn truncation_operator<S: Scalar>(
    rho: &DenseMatrix<S>,
    m: usize,
    degeneracy_tol: S,
) -> EngineResult<Truncation<S>> {
    assert!(m >= 1);
    // Guards calibrated for f64; scaled up when the scalar is coarser.
    let eps_scale = S::epsilon() / real(f64::EPSILON);
    let trace: S = (0..rho.rows()).map(|i| rho[(i, i)]).sum();
    if (trace - S::one()).abs() > real::<S>(TRACE_TOL).max(eps_scale * real(TRACE_TOL)) {
        return Err(EngineError::InvalidDensityMatrix {
            reason: format!("trace {} deviates from 1", trace),
        });
    }
    let mut eig = sym_eig_desc(rho).map_err(EngineError::Numerics)?;
    if let Some(&low) = eig.values.last() {
        if low < real::<S>(NEGATIVE_EIG_TOL).min(eps_scale * real(NEGATIVE_EIG_TOL)) {
            return Err(EngineError::InvalidDensityMatrix {
                reason: format!("negative eigenvalue {low}"),
            });
        }
    }
    stabilize_clusters(&mut eig, degeneracy_tol);

    let dim = eig.values.len();
    let mut keep = dim.min(m);
    if keep < dim {
        // Walk the cut below any multiplet it would split.
        while keep > 0 && (eig.values[keep - 1] - eig.values[keep]).abs() <= degeneracy_tol {
            keep -= 1;
        }
        if keep == 0 {
            return Err(EngineError::AllWeightsDegenerate { m });
        }
    }

    let kept_weights: Vec<S> = eig.values[..keep].to_vec();
    let kept_sum: S = kept_weights.iter().copied().sum();
    let trunc_error = (S::one() - kept_sum).max(S::zero());
    let isometry = DenseMatrix::from_fn(dim, keep, |i, j| eig.vectors[(i, j)]);
    Ok(Truncation {
        isometry,
        kept_weights,
        spectrum: eig.values,
        trunc_error,
    })
}

/// Orders eigenvectors inside each weight multiplet by the diagonal
/// position they came from rather than by their noise-level value
/// differences. Consecutive growth steps diagonalize near-identical density
/// matrices, so position is the ordering that stays coherent from step to
/// step; value-order within a multiplet is decided by rounding noise and
/// would scramble the basis pairing the shift-matrix recursion depends on.
fn stabilize_clusters<S: Scalar>(
    eig: &mut crate::numerics::SpectralDecomposition<S>,
    degeneracy_tol: S,
) {
    let dim = eig.values.len();
    let mut start = 0;
    while start < dim {
        let mut end = start + 1;
        while end < dim && (eig.values[end - 1] - eig.values[end]).abs() <= degeneracy_tol {
            end += 1;
        }
        if end - start > 1 {
            let mut idx: Vec<usize> = (start..end).collect();
            idx.sort_by_key(|&k| eig.positions[k]);
            let values: Vec<S> = idx.iter().map(|&k| eig.values[k]).collect();
            let positions: Vec<usize> = idx.iter().map(|&k| eig.positions[k]).collect();
            let cols: Vec<Vec<S>> = idx.iter().map(|&k| eig.vectors.column(k)).collect();
            for (offset, ((value, position), col)) in values
                .into_iter()
                .zip(positions)
                .zip(cols)
                .enumerate()
            {
                let k = start + offset;
                eig.values[k] = value;
                eig.positions[k] = position;
                for (i, &entry) in col.iter().enumerate() {
                    eig.vectors[(i, k)] = entry;
                }
            }
        }
        start = end;
    }
}

/// Center matrix `Lambda = A^T psi B` coupling the two kept bases. Not
/// normalized here; under truncation its Frobenius norm falls short of 1 by
/// the discarded weight.
pub fn center_matrix<S: Scalar>(
    psi: &CenterTensor<S>,
    a: &DenseMatrix<S>,
    b: &DenseMatrix<S>,
) -> EngineResult<DenseMatrix<S>> {
    let (dl, dr) = psi.dims();
    if a.rows() != 2 * dl || b.rows() != 2 * dr {
        return Err(EngineError::DimensionMismatch {
            context: format!(
                "isometries ({}, {}) rows do not match center dims ({}, 2, 2, {})",
                a.rows(),
                b.rows(),
                dl,
                dr
            ),
        });
    }
    // psi as a matrix over [ (xi,s) x (xibar,sbar) ]: permute the storage
    // columns (sbar, xibar) into block-major order.
    let m = psi.as_matrix();
    let permuted = DenseMatrix::from_fn(2 * dl, 2 * dr, |i, c| {
        let xibar = c / 2;
        let sbar = c % 2;
        m[(i, sbar * dr + xibar)]
    });
    Ok(a.matmul_transa(&permuted.matmul(b)))
}
