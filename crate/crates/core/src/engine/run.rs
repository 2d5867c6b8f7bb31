//! The growth loop: from the 4-site chain to the requested size, two sites
//! per step, with optional wave-function prediction warm-starting each
//! diagonalization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::ModelSpec;
use crate::numerics::{
    lanczos_ground, sym_eig_desc, DenseMatrix, LanczosMode, LanczosOptions, NumericsError,
    DEFAULT_LANCZOS_MAX_ITER, DEFAULT_LANCZOS_TOL, DEFAULT_PINV_EPS,
};
use crate::predictor::{
    fidelity_error, init_shift, mcculloch_predict, pwfrg_predict, update_shift, PredictorError,
    ShiftMatrices, TrialWaveFunction,
};
use crate::{real, Scalar};

use super::block::{Block, Side};
use super::superblock::{CenterTensor, SuperblockOp};
use super::truncate::{center_matrix, density_matrices, truncation_operator};
use super::{EngineError, EngineResult};

/// Default tolerance for treating density-matrix weights as a degenerate
/// multiplet.
pub const DEFAULT_DEGENERACY_TOL: f64 = 1e-12;

/// Relative gap below which two lowest eigenvalues count as degenerate.
const GROUND_DEGENERACY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorChoice {
    None,
    Pwfrg,
    Mcculloch,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LanczosModeConfig {
    Converge,
    SingleStep,
}

/// Parameters of one growth run.
#[derive(Clone, Debug)]
pub struct RunConfig<S> {
    pub j: S,
    pub delta: S,
    pub m_max: usize,
    pub two_n_max: usize,
    pub predictor: PredictorChoice,
    pub lanczos_tol: S,
    pub lanczos_max_iter: usize,
    pub lanczos_mode: LanczosModeConfig,
    pub pinv_eps: S,
    pub degeneracy_tol: S,
    pub seed: u64,
    pub sz_sector_restriction: bool,
}

impl<S: Scalar> RunConfig<S> {
    pub fn new(delta: S, m_max: usize, two_n_max: usize) -> Self {
        Self {
            j: S::one(),
            delta,
            m_max,
            two_n_max,
            predictor: PredictorChoice::None,
            lanczos_tol: real(DEFAULT_LANCZOS_TOL),
            lanczos_max_iter: DEFAULT_LANCZOS_MAX_ITER,
            lanczos_mode: LanczosModeConfig::Converge,
            pinv_eps: real(DEFAULT_PINV_EPS),
            degeneracy_tol: real(DEFAULT_DEGENERACY_TOL),
            seed: 0,
            sz_sector_restriction: false,
        }
    }

    pub fn validate(&self) -> EngineResult<()> {
        if self.two_n_max < 8 || !self.two_n_max.is_multiple_of(2) {
            return Err(EngineError::InvalidConfig {
                field: "two_n_max",
                reason: format!("{} (must be even and >= 8)", self.two_n_max),
            });
        }
        if self.m_max < 4 {
            return Err(EngineError::InvalidConfig {
                field: "m_max",
                reason: format!("{} (must be >= 4)", self.m_max),
            });
        }
        for (field, value) in [
            ("lanczos_tol", self.lanczos_tol),
            ("pinv_eps", self.pinv_eps),
            ("degeneracy_tol", self.degeneracy_tol),
        ] {
            if !(value.is_finite() && value > S::zero()) {
                return Err(EngineError::InvalidConfig {
                    field,
                    reason: format!("{value} (must be a positive number)"),
                });
            }
        }
        if self.lanczos_max_iter == 0 {
            return Err(EngineError::InvalidConfig {
                field: "lanczos_max_iter",
                reason: "0 (must be positive)".to_string(),
            });
        }
        ModelSpec::new(self.j, self.delta)?;
        Ok(())
    }
}

/// One CSV row of a run.
#[derive(Clone, Debug)]
pub struct StepRecord<S> {
    pub two_n: usize,
    pub energy: S,
    pub energy_per_site_est: S,
    pub trunc_err_left: S,
    pub trunc_err_right: S,
    /// Absent on the dense start-up steps, in single-step mode, and when the
    /// predictor fell back to a random start.
    pub fidelity_error: Option<S>,
    pub lanczos_iterations: usize,
    pub m_kept_left: usize,
    pub m_kept_right: usize,
    pub degeneracy_flag: bool,
    pub predictor_fallback_flag: bool,
}

/// Everything recorded about one step's factorization.
#[derive(Clone, Debug)]
pub struct MpsStep<S: Scalar> {
    /// Step label `N` (superblock size `2N`).
    pub step: usize,
    pub a: DenseMatrix<S>,
    pub b: DenseMatrix<S>,
    /// Center matrix, normalized to unit Frobenius norm.
    pub lambda: DenseMatrix<S>,
    /// Weight lost by representing the state through the kept bases,
    /// `1 - ||A^T psi B||_F^2`.
    pub lambda_discarded: S,
    pub spectrum_left: Vec<S>,
    pub spectrum_right: Vec<S>,
    pub trunc_err_left: S,
    pub trunc_err_right: S,
    pub energy: S,
}

/// Per-step history of the factorizations along a run.
#[derive(Clone, Debug, Default)]
pub struct MpsRecord<S: Scalar> {
    steps: Vec<MpsStep<S>>,
}

impl<S: Scalar> MpsRecord<S> {
    /// The record of step `n` (superblock `2n`); steps start at 2.
    pub fn get(&self, n: usize) -> Option<&MpsStep<S>> {
        if n < 2 {
            return None;
        }
        self.steps.get(n - 2)
    }

    pub fn last(&self) -> Option<&MpsStep<S>> {
        self.steps.last()
    }

    pub fn steps(&self) -> &[MpsStep<S>] {
        &self.steps
    }
}

/// The growth loop, exposed stepwise so callers can interleave diagnostics.
pub struct IdmrgRun<S: Scalar> {
    config: RunConfig<S>,
    spec: ModelSpec<S>,
    left: Block<S>,
    right: Block<S>,
    /// Upcoming step index `N` (the next superblock has `2N` sites).
    n: usize,
    mps: MpsRecord<S>,
    shift: Option<ShiftMatrices<S>>,
    /// Converged center states of the previous step and of the one before.
    psi_prev: Option<CenterTensor<S>>,
    psi_prev2: Option<CenterTensor<S>>,
    records: Vec<StepRecord<S>>,
}

impl<S: Scalar> IdmrgRun<S> {
    pub fn new(config: RunConfig<S>) -> EngineResult<Self> {
        config.validate()?;
        let spec = ModelSpec::new(config.j, config.delta)?;
        Ok(Self {
            config,
            spec,
            left: Block::single_site(Side::Left),
            right: Block::single_site(Side::Right),
            n: 2,
            mps: MpsRecord::default(),
            shift: None,
            psi_prev: None,
            psi_prev2: None,
            records: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunConfig<S> {
        &self.config
    }

    pub fn spec(&self) -> &ModelSpec<S> {
        &self.spec
    }

    pub fn mps(&self) -> &MpsRecord<S> {
        &self.mps
    }

    pub fn records(&self) -> &[StepRecord<S>] {
        &self.records
    }

    /// The current basis-adjustment matrices, once initialized (step 3).
    pub fn shift_matrices(&self) -> Option<&ShiftMatrices<S>> {
        self.shift.as_ref()
    }

    /// Superblock size of the upcoming step.
    pub fn next_two_n(&self) -> usize {
        2 * self.n
    }

    pub fn is_done(&self) -> bool {
        self.next_two_n() > self.config.two_n_max
    }

    /// The enlarged block pair and center coupling of the upcoming step.
    pub fn next_superblock(&self) -> EngineResult<(Block<S>, Block<S>, S)> {
        let left = self.left.enlarge(self.left.n_sites() + 1, &self.spec)?;
        let right = self.right.enlarge(self.right.n_sites() + 1, &self.spec)?;
        let coupling = self.spec.bond_coupling(self.n);
        Ok((left, right, coupling))
    }

    /// Builds the trial wave function the configured predictor would hand
    /// the upcoming step, or `Ok(None)` before prediction can start.
    /// `ZeroNorm` and a rank-zero pseudo-inverse surface as errors so the
    /// caller can decide on a fallback.
    pub fn predict(&self, kind: PredictorChoice) -> Result<Option<TrialWaveFunction<S>>, PredictorError> {
        if self.n < 4 {
            return Ok(None);
        }
        match kind {
            PredictorChoice::None => Ok(None),
            PredictorChoice::Pwfrg => {
                let (shift, psi_small) = match (&self.shift, &self.psi_prev2) {
                    (Some(s), Some(p)) => (s, p),
                    _ => return Ok(None),
                };
                pwfrg_predict(shift, psi_small).map(Some)
            }
            PredictorChoice::Mcculloch => {
                let now = match self.mps.get(self.n - 1) {
                    Some(s) => s,
                    None => return Ok(None),
                };
                let prev = match self.mps.get(self.n - 2) {
                    Some(s) => s,
                    None => return Ok(None),
                };
                mcculloch_predict(
                    &now.lambda,
                    &now.a,
                    &now.b,
                    &prev.lambda,
                    self.config.pinv_eps,
                    None,
                )
                .map(|mut t| {
                    t.source_two_n = Some(2 * (self.n - 1));
                    t.target_two_n = Some(2 * self.n);
                    Some(t)
                })
            }
        }
    }

    /// Deterministic per-step start vector: seeded uniform noise projected
    /// onto the zero total-Sz sector whenever the block labels allow it.
    fn random_start(&self, op: &SuperblockOp<S>) -> Vec<S> {
        let two_n = self.next_two_n();
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.config.seed ^ (two_n as u64).wrapping_mul(0x9E3779B97F4A7C15));
        let mut v: Vec<S> = (0..op.dim())
            .map(|_| real::<S>(rng.gen_range(-1.0..1.0f64)))
            .collect();
        if let Some(labels) = op.sz_labels() {
            let tol = real::<S>(1e-9);
            let masked: Vec<S> = v
                .iter()
                .zip(labels)
                .map(|(&x, &q)| if q.abs() <= tol { x } else { S::zero() })
                .collect();
            if masked.iter().any(|&x| x != S::zero()) {
                v = masked;
            }
        }
        let norm = v.iter().map(|&x| x * x).sum::<S>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        v
    }

    /// Runs one growth step and appends its record.
    pub fn step(&mut self) -> EngineResult<StepRecord<S>> {
        let n = self.n;
        let two_n = 2 * n;
        let (enl_left, enl_right, coupling) = self.next_superblock()?;
        let op = SuperblockOp::new(&enl_left, &enl_right, coupling);

        // Trial construction (steps >= 4 when a predictor is configured).
        let mut fallback = false;
        let trial = if self.config.predictor != PredictorChoice::None && n >= 4 {
            match self.predict(self.config.predictor) {
                Ok(t) => t,
                Err(PredictorError::ZeroNorm)
                | Err(PredictorError::Numerics(NumericsError::AllSingularValuesCut)) => {
                    fallback = true;
                    None
                }
                Err(e) => return Err(EngineError::Predictor(e)),
            }
        } else {
            None
        };

        // The ground state lives in the zero total-Sz sector; the padded
        // construction behind the trial injects other sectors, which can
        // never overlap the converged state. Project them out when the
        // block labels allow it; a trial annihilated by the projection
        // counts as a predictor failure.
        let mut trial = trial;
        if let Some(t) = &mut trial {
            if let Some(labels) = op.sz_labels() {
                let tol = real::<S>(1e-9);
                let mut kept = S::zero();
                for (x, &q) in t.tensor.data_mut().iter_mut().zip(labels) {
                    if q.abs() > tol {
                        *x = S::zero();
                    } else {
                        kept += *x * *x;
                    }
                }
                if kept.sqrt() > real(1e-12) {
                    t.tensor.normalize();
                } else {
                    trial = None;
                    fallback = true;
                }
            }
        }

        let dense_step = n <= 3;
        let (energy, psi_vec, iterations, degeneracy) = if dense_step {
            let (e, v, deg) = self.dense_ground(&op)?;
            (e, v, 0usize, deg)
        } else {
            let start = match &trial {
                Some(t) => t.tensor.data().to_vec(),
                None => self.random_start(&op),
            };
            self.lanczos_ground_step(&op, &start, two_n)?
        };

        let psi = CenterTensor::new(self.left.dim(), self.right.dim(), psi_vec);

        let fidelity = match (&trial, self.config.lanczos_mode) {
            (Some(t), LanczosModeConfig::Converge) if !dense_step => {
                Some(fidelity_error(t, &psi)?)
            }
            _ => None,
        };

        let (rho_l, rho_r) = density_matrices(&psi)?;
        let trunc_l = truncation_operator(&rho_l, self.config.m_max, self.config.degeneracy_tol)?;
        let trunc_r = truncation_operator(&rho_r, self.config.m_max, self.config.degeneracy_tol)?;

        let mut lambda = center_matrix(&psi, &trunc_l.isometry, &trunc_r.isometry)?;
        let lambda_norm = lambda.frobenius_norm();
        let lambda_discarded = (S::one() - lambda_norm * lambda_norm).max(S::zero());
        if lambda_norm > S::zero() {
            lambda.scale(S::one() / lambda_norm);
        }

        let new_left = enl_left.project(&trunc_l.isometry)?;
        let new_right = enl_right.project(&trunc_r.isometry)?;

        // Shift-matrix bookkeeping for the 2-site-shift prediction.
        if n == 3 {
            let prev = self.mps.get(2).expect("step 2 recorded");
            self.shift = Some(init_shift(
                &prev.a,
                &trunc_l.isometry,
                &prev.b,
                &trunc_r.isometry,
            )?);
        } else if n >= 4 {
            let prev_small = self.mps.get(n - 2).expect("step n-2 recorded");
            let shift = self.shift.as_ref().expect("shift initialized at step 3");
            self.shift = Some(update_shift(
                shift,
                &trunc_l.isometry,
                &prev_small.a,
                &trunc_r.isometry,
                &prev_small.b,
            )?);
        }

        let prev_energy = match self.mps.last() {
            Some(step) => step.energy,
            // Ground energy of the bare 2-site chain: a singlet on bond 1.
            None => -real::<S>(0.75) * self.spec.bond_coupling(1),
        };
        let energy_per_site_est = (energy - prev_energy) * real::<S>(0.5);

        let record = StepRecord {
            two_n,
            energy,
            energy_per_site_est,
            trunc_err_left: trunc_l.trunc_error,
            trunc_err_right: trunc_r.trunc_error,
            fidelity_error: fidelity,
            lanczos_iterations: iterations,
            m_kept_left: trunc_l.isometry.cols(),
            m_kept_right: trunc_r.isometry.cols(),
            degeneracy_flag: degeneracy,
            predictor_fallback_flag: fallback,
        };

        self.mps.steps.push(MpsStep {
            step: n,
            a: trunc_l.isometry,
            b: trunc_r.isometry,
            lambda,
            lambda_discarded,
            spectrum_left: trunc_l.spectrum,
            spectrum_right: trunc_r.spectrum,
            trunc_err_left: trunc_l.trunc_error,
            trunc_err_right: trunc_r.trunc_error,
            energy,
        });
        self.left = new_left;
        self.right = new_right;
        self.psi_prev2 = self.psi_prev.take();
        self.psi_prev = Some(psi);
        self.records.push(record.clone());
        self.n += 1;
        Ok(record)
    }

    /// Dense diagonalization for the small start-up superblocks. Under
    /// ground-state degeneracy the deterministic seeded start vector is
    /// projected onto the degenerate cluster so the outcome never depends on
    /// eigensolver internals.
    fn dense_ground(&self, op: &SuperblockOp<S>) -> EngineResult<(S, Vec<S>, bool)> {
        let h = op.dense();
        let eig = sym_eig_desc(&h).map_err(|e| EngineError::StepFailed {
            two_n: self.next_two_n(),
            source: e,
        })?;
        let dim = op.dim();
        let e0 = eig.values[dim - 1];
        let tol = real::<S>(GROUND_DEGENERACY_TOL) * e0.abs().max(S::one());
        let mut cluster = Vec::new();
        for k in (0..dim).rev() {
            if (eig.values[k] - e0).abs() <= tol {
                cluster.push(k);
            } else {
                break;
            }
        }
        if cluster.len() == 1 {
            return Ok((e0, eig.vectors.column(dim - 1), false));
        }
        let start = self.random_start(op);
        let mut psi = vec![S::zero(); dim];
        for &k in &cluster {
            let col = eig.vectors.column(k);
            let overlap: S = col.iter().zip(&start).map(|(&a, &b)| a * b).sum();
            for (p, &c) in psi.iter_mut().zip(&col) {
                *p += overlap * c;
            }
        }
        let norm = psi.iter().map(|&x| x * x).sum::<S>().sqrt();
        if norm <= real(1e-12) {
            return Ok((e0, eig.vectors.column(dim - 1), true));
        }
        for x in &mut psi {
            *x /= norm;
        }
        crate::numerics::fix_sign(&mut psi);
        Ok((e0, psi, true))
    }

    /// Iterative path for the large superblocks, with a deterministic
    /// restart when the two lowest Ritz values collide.
    fn lanczos_ground_step(
        &self,
        op: &SuperblockOp<S>,
        start: &[S],
        two_n: usize,
    ) -> EngineResult<(S, Vec<S>, usize, bool)> {
        let mode = match self.config.lanczos_mode {
            LanczosModeConfig::Converge => LanczosMode::Converge,
            LanczosModeConfig::SingleStep => LanczosMode::SingleStep,
        };
        let opts = LanczosOptions {
            tol: self.config.lanczos_tol,
            max_iter: self.config.lanczos_max_iter,
            mode,
            restart_len: 250,
        };
        let mask: Option<Vec<bool>> = if self.config.sz_sector_restriction {
            op.sz_labels().map(|labels| {
                let tol = real::<S>(1e-9);
                labels.iter().map(|&q| q.abs() <= tol).collect()
            })
        } else {
            None
        };
        let mut masked_start;
        let start_ref: &[S] = match &mask {
            Some(m) => {
                masked_start = start.to_vec();
                for (x, keep) in masked_start.iter_mut().zip(m) {
                    if !keep {
                        *x = S::zero();
                    }
                }
                if masked_start.iter().all(|&x| x == S::zero()) {
                    masked_start = start.to_vec();
                }
                &masked_start
            }
            None => start,
        };
        let apply = |x: &[S], y: &mut [S]| {
            op.apply(x, y);
            if let Some(m) = &mask {
                for (v, keep) in y.iter_mut().zip(m) {
                    if !keep {
                        *v = S::zero();
                    }
                }
            }
        };

        let outcome = lanczos_ground(op.dim(), apply, start_ref, &opts).map_err(|e| {
            EngineError::StepFailed { two_n, source: e }
        })?;

        let mut degenerate = false;
        if mode == LanczosMode::Converge {
            if let Some(gap) = outcome.ritz_gap {
                if gap.abs() <= real::<S>(GROUND_DEGENERACY_TOL) * outcome.energy.abs().max(S::one())
                {
                    degenerate = true;
                }
            }
        }
        if !degenerate {
            return Ok((outcome.energy, outcome.vector, outcome.iterations, false));
        }

        // Deterministic failover: mix the step's start vector back into the
        // converged one and re-solve, so the degenerate subspace is resolved
        // by the start vector, not by iteration noise.
        let half = real::<S>(0.5);
        let mut restart: Vec<S> = outcome
            .vector
            .iter()
            .zip(start_ref)
            .map(|(&v, &s)| half * (v + s))
            .collect();
        let norm = restart.iter().map(|&x| x * x).sum::<S>().sqrt();
        if norm > S::zero() {
            for x in &mut restart {
                *x /= norm;
            }
        } else {
            restart = outcome.vector.clone();
        }
        let apply2 = |x: &[S], y: &mut [S]| {
            op.apply(x, y);
            if let Some(m) = &mask {
                for (v, keep) in y.iter_mut().zip(m) {
                    if !keep {
                        *v = S::zero();
                    }
                }
            }
        };
        let second = lanczos_ground(op.dim(), apply2, &restart, &opts).map_err(|e| {
            EngineError::StepFailed { two_n, source: e }
        })?;
        Ok((
            second.energy,
            second.vector,
            outcome.iterations + second.iterations,
            true,
        ))
    }
}

/// Runs the whole loop, invoking `on_step` after every step.
pub fn idmrg_run_with<S: Scalar>(
    config: RunConfig<S>,
    mut on_step: impl FnMut(&StepRecord<S>),
) -> EngineResult<(Vec<StepRecord<S>>, MpsRecord<S>)> {
    let mut run = IdmrgRun::new(config)?;
    while !run.is_done() {
        let record = run.step()?;
        on_step(&record);
    }
    Ok((run.records, run.mps))
}

/// Runs the whole loop and returns the per-step records plus the
/// factorization history.
pub fn idmrg_run<S: Scalar>(config: RunConfig<S>) -> EngineResult<(Vec<StepRecord<S>>, MpsRecord<S>)> {
    idmrg_run_with(config, |_| {})
}
