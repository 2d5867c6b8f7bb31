//! Trial wave-function prediction for the next growth step.
//!
//! Growing the chain by two sites leaves the center bond strength unchanged,
//! so the converged wave function from two steps back, padded with a free
//! spin pair at each end, is already a usable variational guess for the next
//! superblock. In the renormalized bases that padding turns into a pair of
//! basis-adjustment matrices `L_N`, `R_N` obeying a cheap recursion; applying
//! them to the stored center wave function is the 2-site-shift prediction.
//! The alternative construction threads the current step's isometries through
//! the pseudo-inverse of the previous center matrix, which keeps working when
//! the spectrum is gapless.

use thiserror::Error;

use crate::engine::CenterTensor;
use crate::numerics::{pinv_cutoff, DenseMatrix, NumericsError};
use crate::{real, Scalar};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },

    /// The trial was annihilated (typically by a truncation mismatch);
    /// callers fall back to a random start.
    #[error("predicted trial wave function has zero norm")]
    ZeroNorm,

    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type PredictorResult<T> = Result<T, PredictorError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    Pwfrg,
    Mcculloch,
}

/// Basis-adjustment matrices mapping the block bases from two steps back
/// into the current ones.
#[derive(Clone, Debug)]
pub struct ShiftMatrices<S: Scalar> {
    l: DenseMatrix<S>,
    r: DenseMatrix<S>,
    step: usize,
}

impl<S: Scalar> ShiftMatrices<S> {
    pub fn l(&self) -> &DenseMatrix<S> {
        &self.l
    }

    pub fn r(&self) -> &DenseMatrix<S> {
        &self.r
    }

    /// The step label `N`: `l` maps the `N-2` left basis into the `N` one.
    pub fn step(&self) -> usize {
        self.step
    }
}

/// A predicted superblock wave function with its provenance.
#[derive(Clone, Debug)]
pub struct TrialWaveFunction<S: Scalar> {
    pub tensor: CenterTensor<S>,
    pub kind: PredictorKind,
    /// Size of the system the prediction was built from, when known.
    pub source_two_n: Option<usize>,
    /// Size of the system the trial targets, when known.
    pub target_two_n: Option<usize>,
}

/// Sub-matrix of an isometry at fixed raw-site spin: rows `k` of the result
/// are rows `2k + sigma` of `a`.
fn sigma_rows<S: Scalar>(a: &DenseMatrix<S>, sigma: usize) -> DenseMatrix<S> {
    debug_assert!(a.rows().is_multiple_of(2));
    DenseMatrix::from_fn(a.rows() / 2, a.cols(), |k, j| a[(2 * k + sigma, j)])
}

/// Initial shift matrices at step 3, built from the first two isometry
/// pairs. The boundary matrix pinning the innermost padded spin is a
/// Kronecker delta, and the dummy pair at each end carries the staggered
/// `1/sqrt(2)` pad state used by [`crate::oracle::raw_predict`]; the pad is
/// a unit vector, so the shift matrices compose isometrically (`L^T L = I`
/// without truncation).
pub fn init_shift<S: Scalar>(
    a2: &DenseMatrix<S>,
    a3: &DenseMatrix<S>,
    b2: &DenseMatrix<S>,
    b3: &DenseMatrix<S>,
) -> PredictorResult<ShiftMatrices<S>> {
    for (name, first, second) in [("A", a2, a3), ("B", b2, b3)] {
        if first.rows() != 4 {
            return Err(PredictorError::DimensionMismatch {
                context: format!("{name}2 must have 4 rows, has {}", first.rows()),
            });
        }
        if second.rows() != 2 * first.cols() {
            return Err(PredictorError::DimensionMismatch {
                context: format!(
                    "{name}3 has {} rows, expected {}",
                    second.rows(),
                    2 * first.cols()
                ),
            });
        }
    }
    // The first isometry's row composite on the left reads (site 1, site 2),
    // with the odd site on the high bit; on the right it reads the outermost
    // (even) site first, so the staggered minus lands on the low bit there.
    // Both tables follow the raw-space pad convention so the two
    // construction routes agree including the overall sign.
    let half = real::<S>(0.5);
    let pad_left = [half, half, -half, -half];
    let pad_right = [half, -half, half, -half];
    Ok(ShiftMatrices {
        l: init_side(a2, a3, &pad_left),
        r: init_side(b2, b3, &pad_right),
        step: 3,
    })
}

fn init_side<S: Scalar>(
    a2: &DenseMatrix<S>,
    a3: &DenseMatrix<S>,
    pad: &[S; 4],
) -> DenseMatrix<S> {
    // Contraction of the pad pair with both raw-spin rows of the first
    // isometry.
    let u: Vec<S> = (0..a2.cols())
        .map(|xi2| (0..4).map(|row| pad[row] * a2[(row, xi2)]).sum::<S>())
        .collect();
    // l[xi3, s] = sum_xi2 u[xi2] a3[(xi2, s), xi3]
    DenseMatrix::from_fn(a3.cols(), 2, |xi3, s| {
        u.iter()
            .enumerate()
            .map(|(xi2, &w)| w * a3[(2 * xi2 + s, xi3)])
            .sum()
    })
}

/// One recursion step: folds the newest isometry pair and the pair from two
/// steps back around the current shift matrices.
pub fn update_shift<S: Scalar>(
    s: &ShiftMatrices<S>,
    a_next: &DenseMatrix<S>,
    a_prev_small: &DenseMatrix<S>,
    b_next: &DenseMatrix<S>,
    b_prev_small: &DenseMatrix<S>,
) -> PredictorResult<ShiftMatrices<S>> {
    let check = |name: &str, next: &DenseMatrix<S>, prev: &DenseMatrix<S>, cur: &DenseMatrix<S>| {
        if next.rows() != 2 * cur.rows() {
            return Err(PredictorError::DimensionMismatch {
                context: format!(
                    "{name}_next has {} rows, expected {}",
                    next.rows(),
                    2 * cur.rows()
                ),
            });
        }
        if prev.rows() != 2 * cur.cols() {
            return Err(PredictorError::DimensionMismatch {
                context: format!(
                    "{name}_prev has {} rows, expected {}",
                    prev.rows(),
                    2 * cur.cols()
                ),
            });
        }
        Ok(())
    };
    check("A", a_next, a_prev_small, &s.l)?;
    check("B", b_next, b_prev_small, &s.r)?;
    Ok(ShiftMatrices {
        l: update_side(&s.l, a_next, a_prev_small),
        r: update_side(&s.r, b_next, b_prev_small),
        step: s.step + 1,
    })
}

fn update_side<S: Scalar>(
    l: &DenseMatrix<S>,
    a_next: &DenseMatrix<S>,
    a_prev: &DenseMatrix<S>,
) -> DenseMatrix<S> {
    let mut out = DenseMatrix::zeros(a_next.cols(), a_prev.cols());
    for sigma in 0..2 {
        let next_s = sigma_rows(a_next, sigma);
        let prev_s = sigma_rows(a_prev, sigma);
        let t = next_s.matmul_transa(l); // (cols_next x rows_l)^T ... = A_next_s^T * L
        out.matmul_acc(&t, &prev_s);
    }
    out
}

/// The 2-site-shift prediction: the converged center wave function from two
/// steps back, carried into the current bases by the shift matrices and
/// normalized.
pub fn pwfrg_predict<S: Scalar>(
    s: &ShiftMatrices<S>,
    psi_small: &CenterTensor<S>,
) -> PredictorResult<TrialWaveFunction<S>> {
    let (dl_small, dr_small) = psi_small.dims();
    if s.l.cols() != dl_small || s.r.cols() != dr_small {
        return Err(PredictorError::DimensionMismatch {
            context: format!(
                "shift matrices map ({}, {}) but the source tensor is ({}, 2, 2, {})",
                s.l.cols(),
                s.r.cols(),
                dl_small,
                dr_small
            ),
        });
    }
    let (dl, dr) = (s.l.rows(), s.r.rows());
    let mut out = CenterTensor::zeros(dl, dr);
    for sigma in 0..2 {
        for sbar in 0..2 {
            let x = DenseMatrix::from_fn(dl_small, dr_small, |p, q| {
                psi_small.get(p, sigma, sbar, q)
            });
            let y = s.l.matmul(&x.matmul(&s.r.transpose()));
            for xi in 0..dl {
                for xibar in 0..dr {
                    let idx = out.index(xi, sigma, sbar, xibar);
                    out.data_mut()[idx] = y[(xi, xibar)];
                }
            }
        }
    }
    let norm = out.normalize();
    if norm <= real(1e-12) {
        return Err(PredictorError::ZeroNorm);
    }
    Ok(TrialWaveFunction {
        tensor: out,
        kind: PredictorKind::Pwfrg,
        source_two_n: Some(2 * s.step - 2),
        target_two_n: Some(2 * s.step + 2),
    })
}

/// Fidelity error `1 - |<trial, converged>|` between unit-norm states.
///
/// Evaluated as `min_s ||t - s c||^2 / 2`, which is the same quantity but
/// does not lose the small-error regime to cancellation.
pub fn fidelity_error<S: Scalar>(
    trial: &TrialWaveFunction<S>,
    converged: &CenterTensor<S>,
) -> PredictorResult<S> {
    let t = &trial.tensor;
    if t.dims() != converged.dims() {
        return Err(PredictorError::DimensionMismatch {
            context: format!(
                "trial dims {:?} vs converged dims {:?}",
                t.dims(),
                converged.dims()
            ),
        });
    }
    let overlap = t.dot(converged);
    let sign = if overlap < S::zero() { -S::one() } else { S::one() };
    let half = real::<S>(0.5);
    let err = t
        .data()
        .iter()
        .zip(converged.data())
        .map(|(&a, &b)| {
            let d = a - sign * b;
            d * d
        })
        .sum::<S>()
        * half;
    Ok(err.max(S::zero()).min(S::one()))
}

/// Center-matrix-inverse prediction from the current step's factors.
///
/// `psi(xi, s, sbar, xibar) = sum Lambda_now(xi|ab) B_now(bb s|ab)
/// Lambda_prev^+(bb|a) A_now(a sbar|al) Lambda_now(al|xibar)`, normalized.
/// The optional `basis_match` pair generalizes to independently optimized
/// wave functions whose block bases differ; it defaults to the identity,
/// which is exact when both states come from the same infinite-system run.
pub fn mcculloch_predict<S: Scalar>(
    lambda_now: &DenseMatrix<S>,
    a_now: &DenseMatrix<S>,
    b_now: &DenseMatrix<S>,
    lambda_prev: &DenseMatrix<S>,
    eps_rel: S,
    basis_match: Option<(&DenseMatrix<S>, &DenseMatrix<S>)>,
) -> PredictorResult<TrialWaveFunction<S>> {
    if a_now.rows() != 2 * lambda_prev.rows()
        || a_now.cols() != lambda_now.rows()
        || b_now.rows() != 2 * lambda_prev.cols()
        || b_now.cols() != lambda_now.cols()
    {
        return Err(PredictorError::DimensionMismatch {
            context: format!(
                "A {}x{}, B {}x{}, Lambda_now {}x{}, Lambda_prev {}x{}",
                a_now.rows(),
                a_now.cols(),
                b_now.rows(),
                b_now.cols(),
                lambda_now.rows(),
                lambda_now.cols(),
                lambda_prev.rows(),
                lambda_prev.cols()
            ),
        });
    }
    let pinv = pinv_cutoff(lambda_prev, eps_rel)?;
    let middle = match basis_match {
        None => pinv,
        Some((l_match, r_match)) => {
            if l_match.rows() != lambda_prev.rows() || r_match.rows() != lambda_prev.cols() {
                return Err(PredictorError::DimensionMismatch {
                    context: "basis-match matrices must map from the previous step's bases"
                        .to_string(),
                });
            }
            r_match.matmul_transa(&pinv).matmul(l_match)
        }
    };

    let (dl, dr) = (lambda_now.rows(), lambda_now.cols());
    let mut t2 = Vec::with_capacity(2);
    let mut t3 = Vec::with_capacity(2);
    for sigma in 0..2 {
        let b_s = sigma_rows(b_now, sigma);
        // T1 = Lambda_now B_s^T : (dl x d_prev_bar)
        let t1 = lambda_now.matmul(&b_s.transpose());
        t2.push(t1.matmul(&middle));
        let a_s = sigma_rows(a_now, sigma);
        t3.push(a_s.matmul(lambda_now));
    }

    let mut out = CenterTensor::zeros(dl, dr);
    let mut scale = S::zero();
    for t in t2.iter().chain(t3.iter()) {
        scale = scale.max(t.frobenius_norm());
    }
    for (sigma, left_part) in t2.iter().enumerate() {
        for (sbar, right_part) in t3.iter().enumerate() {
            let y = left_part.matmul(right_part);
            for xi in 0..dl {
                for xibar in 0..dr {
                    let idx = out.index(xi, sigma, sbar, xibar);
                    out.data_mut()[idx] = y[(xi, xibar)];
                }
            }
        }
    }
    let norm = out.normalize();
    if norm <= real::<S>(1e-12) * scale.max(S::one()) * scale.max(S::one()) {
        return Err(PredictorError::ZeroNorm);
    }
    Ok(TrialWaveFunction {
        tensor: out,
        kind: PredictorKind::Mcculloch,
        source_two_n: None,
        target_two_n: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_of_the_recursion_is_identity() {
        // If the isometry repeats and L is the identity, the recursion
        // returns the identity.
        let d = 3;
        let mut a = DenseMatrix::<f64>::zeros(2 * d, d);
        // A column-orthonormal matrix whose sigma-slices sum as required:
        // a[(2k + sigma, j)] = delta(k, j) * w(sigma) with w a unit vector.
        let w = [0.6, 0.8];
        for k in 0..d {
            for sigma in 0..2 {
                a[(2 * k + sigma, k)] = w[sigma];
            }
        }
        let s = ShiftMatrices {
            l: DenseMatrix::identity(d),
            r: DenseMatrix::identity(d),
            step: 7,
        };
        let next = update_shift(&s, &a, &a, &a, &a).unwrap();
        let mut diff = next.l.clone();
        diff.add_scaled(-1.0, &DenseMatrix::identity(d));
        assert!(diff.max_abs() < 1e-14);
        assert_eq!(next.step(), 8);
    }

    #[test]
    fn fidelity_trivial_values() {
        let mut t = CenterTensor::<f64>::zeros(1, 1);
        t.data_mut()[0] = 1.0;
        let trial = TrialWaveFunction {
            tensor: t.clone(),
            kind: PredictorKind::Pwfrg,
            source_two_n: None,
            target_two_n: None,
        };
        assert_eq!(fidelity_error(&trial, &t).unwrap(), 0.0);

        let mut orth = CenterTensor::<f64>::zeros(1, 1);
        orth.data_mut()[1] = 1.0;
        assert!((fidelity_error(&trial, &orth).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fidelity_uses_absolute_overlap() {
        // overlap -0.6 must give 0.4.
        let mut a = CenterTensor::<f64>::zeros(1, 1);
        let mut b = CenterTensor::<f64>::zeros(1, 1);
        a.data_mut()[0] = 1.0;
        b.data_mut()[0] = -0.6;
        b.data_mut()[1] = 0.8;
        let trial = TrialWaveFunction {
            tensor: a,
            kind: PredictorKind::Pwfrg,
            source_two_n: None,
            target_two_n: None,
        };
        assert!((fidelity_error(&trial, &b).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn fidelity_dimension_check() {
        let a = CenterTensor::<f64>::zeros(1, 1);
        let b = CenterTensor::<f64>::zeros(2, 1);
        let trial = TrialWaveFunction {
            tensor: a,
            kind: PredictorKind::Pwfrg,
            source_two_n: None,
            target_two_n: None,
        };
        assert!(matches!(
            fidelity_error(&trial, &b),
            Err(PredictorError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn init_shift_shape() {
        let a2 = DenseMatrix::<f64>::identity(4);
        let a3 = DenseMatrix::<f64>::identity(8);
        let s = init_shift(&a2, &a3, &a2, &a3).unwrap();
        assert_eq!((s.l().rows(), s.l().cols()), (8, 2));
        assert_eq!(s.step(), 3);
    }

    #[test]
    fn zero_trial_reported() {
        let s = ShiftMatrices {
            l: DenseMatrix::<f64>::zeros(3, 2),
            r: DenseMatrix::<f64>::zeros(3, 2),
            step: 4,
        };
        let mut psi = CenterTensor::<f64>::zeros(2, 2);
        psi.data_mut()[0] = 1.0;
        assert!(matches!(
            pwfrg_predict(&s, &psi),
            Err(PredictorError::ZeroNorm)
        ));
    }
}
