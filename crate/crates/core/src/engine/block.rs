//! Renormalized chain segments.
//!
//! A block is one half-chain in the truncated basis: its Hamiltonian plus
//! the spin operators of its innermost (edge) site, which are all the later
//! steps ever need. Site positions are counted from the block's own end of
//! the chain; because the total size stays even and the coupling pattern has
//! period 2, a right block counted from the right edge sees exactly the
//! absolute couplings of the corresponding mirror bond, so the modulation
//! never desynchronizes as the system grows.

use crate::model::{LocalOperators, ModelSpec};
use crate::numerics::DenseMatrix;
use crate::{real, Scalar};

use super::{EngineError, EngineResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A renormalized chain segment.
#[derive(Clone, Debug)]
pub struct Block<S: Scalar> {
    side: Side,
    n_sites: usize,
    dim: usize,
    h: DenseMatrix<S>,
    edge_sz: DenseMatrix<S>,
    edge_sp: DenseMatrix<S>,
    edge_sm: DenseMatrix<S>,
    /// Total-Sz quantum number per basis state, when the basis is
    /// sector-pure. Lost (set to `None`) if a truncation mixes sectors.
    sz_labels: Option<Vec<S>>,
}

impl<S: Scalar> Block<S> {
    /// The zero-site block: one trivial state, no operators to speak of.
    pub fn empty(side: Side) -> Self {
        Self {
            side,
            n_sites: 0,
            dim: 1,
            h: DenseMatrix::zeros(1, 1),
            edge_sz: DenseMatrix::zeros(1, 1),
            edge_sp: DenseMatrix::zeros(1, 1),
            edge_sm: DenseMatrix::zeros(1, 1),
            sz_labels: Some(vec![S::zero()]),
        }
    }

    /// A single bare spin at the chain end.
    pub fn single_site(side: Side) -> Self {
        let ops = LocalOperators::new();
        let half = real::<S>(0.5);
        Self {
            side,
            n_sites: 1,
            dim: 2,
            h: DenseMatrix::zeros(2, 2),
            edge_sz: ops.sz,
            edge_sp: ops.sp,
            edge_sm: ops.sm,
            sz_labels: Some(vec![half, -half]),
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sites covered, counted from this block's end of the chain.
    pub fn site_range(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_sites
    }

    pub fn hamiltonian(&self) -> &DenseMatrix<S> {
        &self.h
    }

    pub fn edge_sz(&self) -> &DenseMatrix<S> {
        &self.edge_sz
    }

    pub fn edge_sp(&self) -> &DenseMatrix<S> {
        &self.edge_sp
    }

    pub fn edge_sm(&self) -> &DenseMatrix<S> {
        &self.edge_sm
    }

    pub fn sz_labels(&self) -> Option<&[S]> {
        self.sz_labels.as_deref()
    }

    /// Absorbs the next raw site. The composite basis index is
    /// `block * 2 + site`, the new edge operators act on the raw site, and
    /// the connecting bond (index `n_sites`, counted from this block's edge)
    /// couples the old edge spin to the new one.
    pub fn enlarge(&self, new_site: usize, spec: &ModelSpec<S>) -> EngineResult<Block<S>> {
        if new_site != self.n_sites + 1 {
            return Err(EngineError::SiteNotAdjacent {
                site: new_site,
                side: self.side,
                n_sites: self.n_sites,
            });
        }
        let ops = LocalOperators::<S>::new();
        let id_block = DenseMatrix::identity(self.dim);
        let id_site = DenseMatrix::identity(2);
        let half = real::<S>(0.5);

        let mut h = self.h.kron(&id_site);
        if self.n_sites > 0 {
            let c = spec.bond_coupling(self.n_sites);
            let mut bond = self.edge_sz.kron(&ops.sz);
            let mut flip = self.edge_sp.kron(&ops.sm);
            flip.add_scaled(S::one(), &self.edge_sm.kron(&ops.sp));
            flip.scale(half);
            bond.add_scaled(S::one(), &flip);
            h.add_scaled(c, &bond);
        }
        h.symmetrize();

        let sz_labels = self.sz_labels.as_ref().map(|labels| {
            let mut out = Vec::with_capacity(self.dim * 2);
            for &q in labels {
                out.push(q + half);
                out.push(q - half);
            }
            out
        });

        Ok(Block {
            side: self.side,
            n_sites: self.n_sites + 1,
            dim: self.dim * 2,
            h,
            edge_sz: id_block.kron(&ops.sz),
            edge_sp: id_block.kron(&ops.sp),
            edge_sm: id_block.kron(&ops.sm),
            sz_labels,
        })
    }

    /// Rotates the block into the truncated basis spanned by the columns of
    /// `isometry` (rows index this block's basis).
    pub fn project(&self, isometry: &DenseMatrix<S>) -> EngineResult<Block<S>> {
        if isometry.rows() != self.dim {
            return Err(EngineError::DimensionMismatch {
                context: format!(
                    "isometry has {} rows, block dimension is {}",
                    isometry.rows(),
                    self.dim
                ),
            });
        }
        let rotate = |op: &DenseMatrix<S>| isometry.matmul_transa(&op.matmul(isometry));
        let mut h = rotate(&self.h);
        h.symmetrize();
        let sz_labels = self
            .sz_labels
            .as_ref()
            .and_then(|labels| project_labels(labels, isometry));
        Ok(Block {
            side: self.side,
            n_sites: self.n_sites,
            dim: isometry.cols(),
            h,
            edge_sz: rotate(&self.edge_sz),
            edge_sp: rotate(&self.edge_sp),
            edge_sm: rotate(&self.edge_sm),
            sz_labels,
        })
    }
}

/// Weighted quantum numbers of the rotated basis states; `None` when any
/// column is not sector-pure to within rounding.
fn project_labels<S: Scalar>(labels: &[S], isometry: &DenseMatrix<S>) -> Option<Vec<S>> {
    let tol = real::<S>(1e-6);
    let two = real::<S>(2.0);
    let mut out = Vec::with_capacity(isometry.cols());
    for col in 0..isometry.cols() {
        let mut q = S::zero();
        for (i, &qi) in labels.iter().enumerate() {
            let a = isometry[(i, col)];
            q += a * a * qi;
        }
        let snapped = (q * two).round() / two;
        if (q - snapped).abs() > tol {
            return None;
        }
        out.push(snapped);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::bond_hamiltonian;
    use crate::numerics::sym_eig_desc;

    #[test]
    fn empty_block_plus_site_is_free_spin() {
        let spec = ModelSpec::new(1.0, 0.1).unwrap();
        let b = Block::<f64>::empty(Side::Left).enlarge(1, &spec).unwrap();
        assert_eq!(b.dim(), 2);
        assert_eq!(b.n_sites(), 1);
        assert_eq!(b.hamiltonian().max_abs(), 0.0);
        // Identical to the dedicated constructor.
        let s = Block::<f64>::single_site(Side::Left);
        assert_eq!(b.edge_sz().data(), s.edge_sz().data());
    }

    #[test]
    fn one_site_block_plus_site_is_first_bond() {
        for (delta, c) in [(0.0, 1.0), (0.1, 0.9)] {
            let spec = ModelSpec::new(1.0, delta).unwrap();
            let b = Block::<f64>::single_site(Side::Left)
                .enlarge(2, &spec)
                .unwrap();
            let expected = bond_hamiltonian(c);
            let mut diff = b.hamiltonian().clone();
            diff.add_scaled(-1.0, &expected);
            assert!(diff.max_abs() < 1e-15, "delta={delta}");
        }
    }

    #[test]
    fn enlarged_h_symmetric_and_sz_conserving() {
        let spec = ModelSpec::new(1.0, 0.3).unwrap();
        let b = Block::<f64>::single_site(Side::Right)
            .enlarge(2, &spec)
            .unwrap()
            .enlarge(3, &spec)
            .unwrap();
        assert!(b.hamiltonian().is_symmetric_within(1e-12));
        // Total-Sz operator from labels must commute with h.
        let labels = b.sz_labels().unwrap();
        let h = b.hamiltonian();
        for i in 0..b.dim() {
            for j in 0..b.dim() {
                if (labels[i] - labels[j]).abs() > 1e-9 {
                    assert!(
                        h[(i, j)].abs() < 1e-14,
                        "sector-violating matrix element at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn non_adjacent_site_rejected() {
        let spec = ModelSpec::new(1.0, 0.0).unwrap();
        let b = Block::<f64>::single_site(Side::Left);
        assert!(matches!(
            b.enlarge(3, &spec),
            Err(EngineError::SiteNotAdjacent { site: 3, .. })
        ));
    }

    #[test]
    fn projection_preserves_structure() {
        let spec = ModelSpec::new(1.0, 0.0).unwrap();
        let enlarged = Block::<f64>::single_site(Side::Left)
            .enlarge(2, &spec)
            .unwrap();
        // Rotate into the bond eigenbasis; a full-rank orthogonal projection
        // keeps the spectrum.
        let eig = sym_eig_desc(enlarged.hamiltonian()).unwrap();
        let projected = enlarged.project(&eig.vectors).unwrap();
        let diag = projected.hamiltonian();
        for (k, &v) in eig.values.iter().enumerate() {
            assert!((diag[(k, k)] - v).abs() < 1e-12);
        }
        assert!(projected.hamiltonian().is_symmetric_within(1e-12));
        // Singlet/triplet basis states have definite Sz.
        assert!(projected.sz_labels().is_some());
    }
}
