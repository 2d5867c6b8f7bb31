//! Brute-force ground truth: exact diagonalization of the full chain in a
//! bit-coded basis, raw-space trial constructions, and the transformations
//! between raw and renormalized representations.
//!
//! Site `i` (1-based from the left) maps to bit `two_n - i`, so the leading
//! half of the index reads the left spins and the trailing half the right
//! spins in mirrored order; a spin-up site is bit value 0. All constructions
//! here are deliberately simple and independent of the engine's contraction
//! paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::engine::CenterTensor;
use crate::model::ModelSpec;
use crate::numerics::{
    lanczos_ground, pinv_cutoff, sym_eig_desc, DenseMatrix, LanczosOptions, NumericsError,
};
use crate::{real, Scalar};

/// Hard cap on exact-diagonalization sizes.
pub const MAX_ED_SITES: usize = 20;
/// Hard cap on the inverse-based raw construction (it pseudo-inverts a
/// `2^(N-1)`-dimensional matrix).
pub const MAX_RAW_INVERSE_TARGET_SITES: usize = 16;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("system of {sites} sites exceeds the cap of {cap}")]
    SizeTooLarge { sites: usize, cap: usize },

    #[error("raw construction produced a zero vector")]
    ZeroNorm,

    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type OracleResult<T> = Result<T, OracleError>;

/// A wave function over the full `2^two_n`-dimensional chain basis.
#[derive(Clone, Debug)]
pub struct FullStateVector<S> {
    pub two_n: usize,
    pub entries: Vec<S>,
}

impl<S: Scalar> FullStateVector<S> {
    pub fn new(two_n: usize, entries: Vec<S>) -> Self {
        assert_eq!(entries.len(), 1 << two_n);
        Self { two_n, entries }
    }

    pub fn norm(&self) -> S {
        self.entries.iter().map(|&x| x * x).sum::<S>().sqrt()
    }

    pub fn normalize(&mut self) -> S {
        let n = self.norm();
        if n > S::zero() {
            for x in &mut self.entries {
                *x /= n;
            }
        }
        n
    }

    pub fn dot(&self, other: &Self) -> S {
        assert_eq!(self.two_n, other.two_n);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    /// Total-Sz expectation value.
    pub fn total_sz(&self) -> S {
        let half = real::<S>(0.5);
        let mut acc = S::zero();
        for (idx, &amp) in self.entries.iter().enumerate() {
            // bit value 0 encodes spin up, so set bits count down spins
            let down = (idx as u64).count_ones() as usize;
            let up = self.two_n - down;
            let q = (real::<S>(up as f64) - real::<S>(down as f64)) * half;
            acc += amp * amp * q;
        }
        acc
    }
}

fn check_size(sites: usize, cap: usize) -> OracleResult<()> {
    if sites > cap || sites < 2 || !sites.is_multiple_of(2) {
        return Err(OracleError::SizeTooLarge { sites, cap });
    }
    Ok(())
}

/// `y = H x` for the full chain, all bonds applied by bit arithmetic.
pub fn full_apply<S: Scalar>(
    spec: &ModelSpec<S>,
    two_n: usize,
    x: &[S],
    y: &mut [S],
) -> OracleResult<()> {
    check_size(two_n, MAX_ED_SITES)?;
    let dim = 1usize << two_n;
    assert_eq!(x.len(), dim);
    assert_eq!(y.len(), dim);
    for v in y.iter_mut() {
        *v = S::zero();
    }
    let quarter = real::<S>(0.25);
    let half = real::<S>(0.5);
    for bond in 1..two_n {
        let c = spec.bond_coupling(bond);
        if c == S::zero() {
            continue;
        }
        let b1 = two_n - bond;
        let b0 = b1 - 1;
        let mask = (1usize << b1) | (1usize << b0);
        let diag = c * quarter;
        let flip = c * half;
        for idx in 0..dim {
            let s1 = (idx >> b1) & 1;
            let s0 = (idx >> b0) & 1;
            let xi = x[idx];
            if s1 == s0 {
                y[idx] += diag * xi;
            } else {
                y[idx] -= diag * xi;
                y[idx ^ mask] += flip * xi;
            }
        }
    }
    Ok(())
}

/// Lowest eigenpair of the full chain, deterministic sign gauge (largest
/// component positive). Dense diagonalization up to 8 sites, seeded Lanczos
/// above.
pub fn ed_ground<S: Scalar>(
    spec: &ModelSpec<S>,
    two_n: usize,
) -> OracleResult<(S, FullStateVector<S>)> {
    check_size(two_n, MAX_ED_SITES)?;
    let dim = 1usize << two_n;
    if two_n <= 8 {
        let mut h = DenseMatrix::zeros(dim, dim);
        let mut unit = vec![S::zero(); dim];
        let mut col = vec![S::zero(); dim];
        for j in 0..dim {
            unit[j] = S::one();
            full_apply(spec, two_n, &unit, &mut col)?;
            unit[j] = S::zero();
            for i in 0..dim {
                h[(i, j)] = col[i];
            }
        }
        h.symmetrize();
        let eig = sym_eig_desc(&h)?;
        let energy = eig.values[dim - 1];
        let vector = eig.vectors.column(dim - 1);
        return Ok((energy, FullStateVector::new(two_n, vector)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(0x00ed_5eed);
    let start: Vec<S> = (0..dim)
        .map(|_| real::<S>(rng.gen_range(-1.0..1.0f64)))
        .collect();
    // Memory-bounded restart length for the largest systems.
    let budget = ((192usize << 20) / (8 * dim)).clamp(24, 250);
    let opts = LanczosOptions {
        max_iter: 20_000,
        restart_len: budget,
        ..LanczosOptions::default()
    };
    let mut buf = vec![S::zero(); dim];
    let outcome = lanczos_ground(
        dim,
        |x: &[S], y: &mut [S]| {
            full_apply(spec, two_n, x, &mut buf).expect("size already checked");
            y.copy_from_slice(&buf);
        },
        &start,
        &opts,
    )?;
    let mut vector = outcome.vector;
    gauge_sign(&mut vector);
    Ok((outcome.energy, FullStateVector::new(two_n, vector)))
}

fn gauge_sign<S: Scalar>(v: &mut [S]) {
    let mut best = 0usize;
    let mut mag = S::zero();
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > mag {
            mag = x.abs();
            best = i;
        }
    }
    if v[best] < S::zero() {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Pads two free spins at each end: the trial for the `two_n + 4`-site
/// chain, unit-normalized. Each padded spin carries uniform magnitude
/// `1/sqrt(2)` with the staggered sublattice sign (a down spin on an odd
/// site picks up a minus).
///
/// The sign structure matters: with all-plus amplitudes the four padded
/// spins form a pure total-spin-2 state, exactly orthogonal to the singlet
/// ground state being targeted. The staggered signs are the unit-magnitude
/// pad whose spin-zero content matches the environment (its zero-Sz part is
/// a singlet on each pad pair plus the cross-polarized combinations).
pub fn raw_predict<S: Scalar>(psi_small: &FullStateVector<S>) -> OracleResult<FullStateVector<S>> {
    let small_n = psi_small.two_n;
    let out_n = small_n + 4;
    check_size(out_n, MAX_ED_SITES)?;
    let quarter = real::<S>(0.25);
    let mid_mask = (1usize << small_n) - 1;
    let dim = 1usize << out_n;
    let mut entries = vec![S::zero(); dim];
    for (idx, e) in entries.iter_mut().enumerate() {
        // Odd pad sites: 1 (bit out_n - 1) and out_n - 1 (bit 1).
        let minus = ((idx >> (out_n - 1)) & 1) ^ ((idx >> 1) & 1);
        let amp = psi_small.entries[(idx >> 2) & mid_mask] * quarter;
        *e = if minus == 1 { -amp } else { amp };
    }
    Ok(FullStateVector::new(out_n, entries))
}

/// The inverse-based raw construction: shifts the left-right division of the
/// current wave function by one site each way and contracts through the
/// cutoff pseudo-inverse of the smaller system's wave-function matrix.
pub fn raw_mcculloch<S: Scalar>(
    psi_small: &FullStateVector<S>,
    psi_now: &FullStateVector<S>,
    eps_rel: S,
) -> OracleResult<FullStateVector<S>> {
    let out_n = psi_now.two_n + 2;
    if out_n > MAX_RAW_INVERSE_TARGET_SITES {
        return Err(OracleError::SizeTooLarge {
            sites: out_n,
            cap: MAX_RAW_INVERSE_TARGET_SITES,
        });
    }
    check_size(out_n, MAX_ED_SITES)?;
    assert_eq!(psi_small.two_n + 2, psi_now.two_n, "sizes must differ by 2");
    let n = psi_now.two_n / 2;
    let half_dim = 1usize << (n - 1);

    let small = DenseMatrix::from_rows(half_dim, half_dim, &psi_small.entries);
    let pinv = pinv_cutoff(&small, eps_rel)?;

    let phi_l = DenseMatrix::from_rows(half_dim * 4, half_dim, &psi_now.entries);
    let phi_r = DenseMatrix::from_rows(half_dim, half_dim * 4, &psi_now.entries);

    let trial = phi_l.matmul(&pinv).matmul(&phi_r);
    let mut out = FullStateVector::new(out_n, trial.data().to_vec());
    if out.normalize() == S::zero() {
        return Err(OracleError::ZeroNorm);
    }
    Ok(out)
}

/// `x` with its lowest `bits` bits reversed.
fn rev_bits(x: usize, bits: usize) -> usize {
    let mut out = 0usize;
    for b in 0..bits {
        out |= ((x >> b) & 1) << (bits - 1 - b);
    }
    out
}

/// Unrolls the top row index of `t` through a block-transform chain
/// (innermost isometry first in application order), producing raw-spin rows
/// in most-significant-first order.
fn unroll_rows<S: Scalar>(mut t: DenseMatrix<S>, chain: &[&DenseMatrix<S>]) -> DenseMatrix<S> {
    let mut rest = 1usize;
    for a in chain.iter().rev() {
        let d_in = a.rows();
        let d_out = a.cols();
        assert_eq!(t.rows(), d_out * rest, "chain does not match tensor");
        let mut t2 = DenseMatrix::zeros(d_in * rest, t.cols());
        for row_in in 0..d_in {
            for xi in 0..d_out {
                let w = a[(row_in, xi)];
                if w == S::zero() {
                    continue;
                }
                for r in 0..rest {
                    let src = t.row(xi * rest + r).to_vec();
                    let dst = t2.row_mut(row_in * rest + r);
                    for (d, s) in dst.iter_mut().zip(&src) {
                        *d += w * *s;
                    }
                }
            }
        }
        t = t2;
        rest *= 2;
    }
    t
}

/// Inverse of [`unroll_rows`]: contracts raw-spin rows back into the block
/// basis.
fn fold_rows<S: Scalar>(mut t: DenseMatrix<S>, chain: &[&DenseMatrix<S>]) -> DenseMatrix<S> {
    let first = chain.first().expect("chain must not be empty");
    let mut rest = t.rows() / first.rows();
    for a in chain {
        let d_in = a.rows();
        let d_out = a.cols();
        assert_eq!(t.rows(), d_in * rest, "chain does not match tensor");
        let mut t2 = DenseMatrix::zeros(d_out * rest, t.cols());
        for row_in in 0..d_in {
            for xi in 0..d_out {
                let w = a[(row_in, xi)];
                if w == S::zero() {
                    continue;
                }
                for r in 0..rest {
                    let src = t.row(row_in * rest + r).to_vec();
                    let dst = t2.row_mut(xi * rest + r);
                    for (d, s) in dst.iter_mut().zip(&src) {
                        *d += w * *s;
                    }
                }
            }
        }
        t = t2;
        rest /= 2;
    }
    t
}

/// Expands a renormalized center wave function into the raw chain basis.
/// `a_chain`/`b_chain` hold the isometries from step 2 up to step `N-1`
/// (the boundary identification of the first site needs no matrix).
pub fn expand_center<S: Scalar>(
    center: &CenterTensor<S>,
    a_chain: &[&DenseMatrix<S>],
    b_chain: &[&DenseMatrix<S>],
) -> OracleResult<FullStateVector<S>> {
    let n = a_chain.len() + 2;
    let two_n = 2 * n;
    check_size(two_n, MAX_ED_SITES)?;
    let (dl, dr) = center.dims();
    let half_raw = 1usize << (n - 1);

    // Rows xi, columns (s, sbar, xibar).
    let m0 = DenseMatrix::from_rows(dl, 4 * dr, center.data());
    let left = unroll_rows(m0, a_chain);
    debug_assert_eq!(left.rows(), half_raw);

    // Rows xibar, columns (left raw, s, sbar).
    let m1 = DenseMatrix::from_fn(dr, half_raw * 4, |xibar, c| {
        let l = c / 4;
        let ss = c % 4;
        left[(l, ss * dr + xibar)]
    });
    let right = unroll_rows(m1, b_chain);

    let mut entries = vec![S::zero(); 1 << two_n];
    for rbar in 0..half_raw {
        let trailing = rev_bits(rbar, n - 1);
        let row = right.row(rbar);
        for l in 0..half_raw {
            for s in 0..2 {
                for sbar in 0..2 {
                    let idx = (l << (n + 1)) | (s << n) | (sbar << (n - 1)) | trailing;
                    entries[idx] = row[l * 4 + s * 2 + sbar];
                }
            }
        }
    }
    let mut out = FullStateVector::new(two_n, entries);
    // Without truncation this is unitary; normalize away rounding anyway.
    if out.normalize() == S::zero() {
        return Err(OracleError::ZeroNorm);
    }
    Ok(out)
}

/// Applies the block-transform chains to a raw wave function, producing its
/// renormalized center representation (normalized).
pub fn renormalize_center<S: Scalar>(
    full: &FullStateVector<S>,
    a_chain: &[&DenseMatrix<S>],
    b_chain: &[&DenseMatrix<S>],
) -> OracleResult<CenterTensor<S>> {
    let n = a_chain.len() + 2;
    let two_n = 2 * n;
    assert_eq!(full.two_n, two_n, "chain length does not match state size");
    check_size(two_n, MAX_ED_SITES)?;
    let half_raw = 1usize << (n - 1);

    // Rows: left raw; columns (s, sbar, right raw composite).
    let m0 = DenseMatrix::from_fn(half_raw, 4 * half_raw, |l, c| {
        let s = c / (2 * half_raw);
        let rem = c % (2 * half_raw);
        let sbar = rem / half_raw;
        let rbar = rem % half_raw;
        let idx = (l << (n + 1)) | (s << n) | (sbar << (n - 1)) | rev_bits(rbar, n - 1);
        full.entries[idx]
    });
    let folded_left = fold_rows(m0, a_chain);
    let dl = folded_left.rows();

    // Rows: right raw; columns (xi, s, sbar).
    let m1 = DenseMatrix::from_fn(half_raw, dl * 4, |rbar, c| {
        let xi = c / 4;
        let ss = c % 4;
        let s = ss / 2;
        let sbar = ss % 2;
        folded_left[(xi, (s * 2 + sbar) * half_raw + rbar)]
    });
    let folded_right = fold_rows(m1, b_chain);
    let dr = folded_right.rows();

    let mut out = CenterTensor::zeros(dl, dr);
    for xibar in 0..dr {
        let row = folded_right.row(xibar);
        for xi in 0..dl {
            for s in 0..2 {
                for sbar in 0..2 {
                    let idx = out.index(xi, s, sbar, xibar);
                    out.data_mut()[idx] = row[xi * 4 + s * 2 + sbar];
                }
            }
        }
    }
    out.normalize();
    Ok(out)
}
