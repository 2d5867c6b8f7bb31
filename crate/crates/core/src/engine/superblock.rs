//! The superblock wave function and the implicit Hamiltonian acting on it.

use crate::numerics::DenseMatrix;
use crate::Scalar;

use super::block::Block;
use super::{EngineError, EngineResult};

/// Renormalized superblock wave function over
/// `(left block, site, site, right block)`; entries are stored row-major in
/// exactly that index order.
#[derive(Clone, Debug)]
pub struct CenterTensor<S> {
    dl: usize,
    dr: usize,
    data: Vec<S>,
}

impl<S: Scalar> CenterTensor<S> {
    pub fn new(dl: usize, dr: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), dl * 4 * dr, "center tensor size mismatch");
        Self { dl, dr, data }
    }

    pub fn zeros(dl: usize, dr: usize) -> Self {
        Self::new(dl, dr, vec![S::zero(); dl * 4 * dr])
    }

    /// Block dimensions `(left, right)`; the full shape is
    /// `(left, 2, 2, right)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.dl, self.dr)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, xi: usize, s: usize, sbar: usize, xibar: usize) -> usize {
        ((xi * 2 + s) * 2 + sbar) * self.dr + xibar
    }

    #[inline]
    pub fn get(&self, xi: usize, s: usize, sbar: usize, xibar: usize) -> S {
        self.data[self.index(xi, s, sbar, xibar)]
    }

    pub fn norm(&self) -> S {
        self.data.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn normalize(&mut self) -> S {
        let n = self.norm();
        if n > S::zero() {
            for x in &mut self.data {
                *x /= n;
            }
        }
        n
    }

    pub fn dot(&self, other: &Self) -> S {
        assert_eq!(self.dims(), other.dims());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    /// View as a `(2 dl) x (2 dr)` matrix with rows `(xi, s)` and columns
    /// `(sbar, xibar)` — the storage order itself.
    pub fn as_matrix(&self) -> DenseMatrix<S> {
        DenseMatrix::from_rows(2 * self.dl, 2 * self.dr, &self.data)
    }

    pub fn from_matrix(dl: usize, dr: usize, m: &DenseMatrix<S>) -> Self {
        assert_eq!((m.rows(), m.cols()), (2 * dl, 2 * dr));
        Self::new(dl, dr, m.data().to_vec())
    }
}

/// Rewrites an operator over the right-block composite `(xibar, sbar)` into
/// the column composite `(sbar, xibar)` used by the tensor storage.
fn permute_right_operator<S: Scalar>(op: &DenseMatrix<S>, dr: usize) -> DenseMatrix<S> {
    let n = 2 * dr;
    assert_eq!((op.rows(), op.cols()), (n, n));
    let map = |c: usize| -> usize {
        let sbar = c / dr;
        let xibar = c % dr;
        xibar * 2 + sbar
    };
    DenseMatrix::from_fn(n, n, |i, j| op[(map(i), map(j))])
}

/// The superblock Hamiltonian `H_L + H_R + center bond`, prepared once per
/// step and applied through tensor contractions; the full matrix is never
/// materialized.
pub struct SuperblockOp<S> {
    dl: usize,
    dr: usize,
    h_left: DenseMatrix<S>,
    sz_left: DenseMatrix<S>,
    sp_left: DenseMatrix<S>,
    sm_left: DenseMatrix<S>,
    // Right-side operators, permuted into column-composite order and
    // transposed so application is a plain right-multiplication.
    h_right_t: DenseMatrix<S>,
    sz_right_t: DenseMatrix<S>,
    sm_right_t: DenseMatrix<S>,
    sp_right_t: DenseMatrix<S>,
    coupling: S,
    /// Half-integer total-Sz label per superblock basis state, when both
    /// blocks are sector-pure.
    sz_labels: Option<Vec<S>>,
}

impl<S: Scalar> SuperblockOp<S> {
    /// Builds the operator for `left (+site) x (site+) right` with the given
    /// center-bond coupling. Both blocks must already contain their raw edge
    /// site (dimension `2 d`).
    pub fn new(left: &Block<S>, right: &Block<S>, coupling: S) -> Self {
        let dl = left.dim() / 2;
        let dr = right.dim() / 2;
        assert_eq!(left.dim(), 2 * dl, "left block dimension must be even");
        assert_eq!(right.dim(), 2 * dr, "right block dimension must be even");

        // Storage order is (xi, s, sbar, xibar); the left label vector
        // already runs over the (xi, s) composite, the right one over
        // (xibar, sbar).
        let sz_labels = match (left.sz_labels(), right.sz_labels()) {
            (Some(ql), Some(qr)) => {
                let mut labels = Vec::with_capacity(left.dim() * right.dim());
                for &a in ql {
                    for sbar in 0..2 {
                        for xibar in 0..dr {
                            labels.push(a + qr[xibar * 2 + sbar]);
                        }
                    }
                }
                Some(labels)
            }
            _ => None,
        };

        Self {
            dl,
            dr,
            h_left: left.hamiltonian().clone(),
            sz_left: left.edge_sz().clone(),
            sp_left: left.edge_sp().clone(),
            sm_left: left.edge_sm().clone(),
            h_right_t: permute_right_operator(right.hamiltonian(), dr).transpose(),
            sz_right_t: permute_right_operator(right.edge_sz(), dr).transpose(),
            sm_right_t: permute_right_operator(right.edge_sm(), dr).transpose(),
            sp_right_t: permute_right_operator(right.edge_sp(), dr).transpose(),
            coupling,
            sz_labels,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.dl, self.dr)
    }

    pub fn dim(&self) -> usize {
        self.dl * 4 * self.dr
    }

    pub fn sz_labels(&self) -> Option<&[S]> {
        self.sz_labels.as_deref()
    }

    /// `y = H x` through six block-matrix products.
    pub fn apply(&self, x: &[S], y: &mut [S]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let rows = 2 * self.dl;
        let cols = 2 * self.dr;
        let xm = DenseMatrix::from_rows(rows, cols, x);
        let mut ym = DenseMatrix::zeros(rows, cols);

        ym.matmul_acc(&self.h_left, &xm);
        ym.matmul_acc(&xm, &self.h_right_t);

        let half_c = self.coupling * crate::real::<S>(0.5);
        let mut t = DenseMatrix::zeros(rows, cols);
        t.matmul_acc(&self.sz_left, &xm);
        let mut bond = DenseMatrix::zeros(rows, cols);
        bond.matmul_acc(&t, &self.sz_right_t);
        bond.scale(self.coupling);

        let mut t2 = DenseMatrix::zeros(rows, cols);
        t2.matmul_acc(&self.sp_left, &xm);
        let mut flip = DenseMatrix::zeros(rows, cols);
        flip.matmul_acc(&t2, &self.sm_right_t);

        let mut t3 = DenseMatrix::zeros(rows, cols);
        t3.matmul_acc(&self.sm_left, &xm);
        flip.matmul_acc(&t3, &self.sp_right_t);
        flip.scale(half_c);

        bond.add_scaled(S::one(), &flip);
        ym.add_scaled(S::one(), &bond);
        y.copy_from_slice(ym.data());
    }

    /// Materializes the full matrix; only sensible for the small dense
    /// steps and for tests.
    pub fn dense(&self) -> DenseMatrix<S> {
        let rows = 2 * self.dl;
        let cols = 2 * self.dr;
        let il = DenseMatrix::identity(rows);
        let ir = DenseMatrix::identity(cols);
        let half_c = self.coupling * crate::real::<S>(0.5);

        let h_right = self.h_right_t.transpose();
        let sz_right = self.sz_right_t.transpose();
        let sm_right = self.sm_right_t.transpose();
        let sp_right = self.sp_right_t.transpose();

        let mut h = self.h_left.kron(&ir);
        h.add_scaled(S::one(), &il.kron(&h_right));
        h.add_scaled(self.coupling, &self.sz_left.kron(&sz_right));
        h.add_scaled(half_c, &self.sp_left.kron(&sm_right));
        h.add_scaled(half_c, &self.sm_left.kron(&sp_right));
        h.symmetrize();
        h
    }
}

/// One-shot application `(H_L + H_R + bond) x`, shape-checked.
pub fn superblock_apply<S: Scalar>(
    left: &Block<S>,
    right: &Block<S>,
    center_coupling: S,
    x: &CenterTensor<S>,
) -> EngineResult<CenterTensor<S>> {
    let (dl, dr) = x.dims();
    if left.dim() != 2 * dl || right.dim() != 2 * dr {
        return Err(EngineError::DimensionMismatch {
            context: format!(
                "center tensor is ({dl}, 2, 2, {dr}) but blocks have dimensions {} and {}",
                left.dim(),
                right.dim()
            ),
        });
    }
    let op = SuperblockOp::new(left, right, center_coupling);
    let mut out = CenterTensor::zeros(dl, dr);
    let mut y = vec![S::zero(); op.dim()];
    op.apply(x.data(), &mut y);
    out.data_mut().copy_from_slice(&y);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::block::Side;
    use crate::model::ModelSpec;
    use crate::numerics::sym_eig_desc;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn four_site_op(delta: f64) -> SuperblockOp<f64> {
        let spec = ModelSpec::new(1.0, delta).unwrap();
        let left = Block::<f64>::single_site(Side::Left)
            .enlarge(2, &spec)
            .unwrap();
        let right = Block::<f64>::single_site(Side::Right)
            .enlarge(2, &spec)
            .unwrap();
        let c = spec.bond_coupling(ModelSpec::<f64>::center_bond_index(4).unwrap());
        SuperblockOp::new(&left, &right, c)
    }

    #[test]
    fn apply_matches_dense() {
        let op = four_site_op(0.23);
        let dense = op.dense();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..3 {
            let x: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y = vec![0.0; op.dim()];
            op.apply(&x, &mut y);
            let yd = dense.matvec(&x);
            for (a, b) in y.iter().zip(&yd) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn operator_is_symmetric() {
        let op = four_site_op(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..4 {
            let x: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut hx = vec![0.0; op.dim()];
            let mut hz = vec![0.0; op.dim()];
            op.apply(&x, &mut hx);
            op.apply(&z, &mut hz);
            let zhx: f64 = z.iter().zip(&hx).map(|(a, b)| a * b).sum();
            let xhz: f64 = x.iter().zip(&hz).map(|(a, b)| a * b).sum();
            assert!((zhx - xhz).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenvector_relation() {
        let op = four_site_op(0.0);
        let dense = op.dense();
        let eig = sym_eig_desc(&dense).unwrap();
        let ground = eig.vectors.column(op.dim() - 1);
        let e = eig.values[op.dim() - 1];
        let mut y = vec![0.0; op.dim()];
        op.apply(&ground, &mut y);
        for (a, &g) in y.iter().zip(&ground) {
            assert!((a - e * g).abs() < 1e-12);
        }
        // Uniform 4-site chain ground energy.
        assert!((e - (-1.6160254)).abs() < 1e-7);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let spec = ModelSpec::new(1.0, 0.0).unwrap();
        let left = Block::<f64>::single_site(Side::Left)
            .enlarge(2, &spec)
            .unwrap();
        let right = Block::<f64>::single_site(Side::Right)
            .enlarge(2, &spec)
            .unwrap();
        let x = CenterTensor::<f64>::zeros(3, 2);
        assert!(matches!(
            superblock_apply(&left, &right, 1.0, &x),
            Err(EngineError::DimensionMismatch { .. })
        ));
    }
}
