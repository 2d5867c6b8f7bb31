//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! (visible with `cargo test --test acceptance -- --nocapture`).

use idmrg_core::engine::{
    idmrg_run, superblock_apply, CenterTensor, IdmrgRun, LanczosModeConfig, MpsRecord,
    PredictorChoice, RunConfig,
};
use idmrg_core::model::ModelSpec;
use idmrg_core::numerics::DenseMatrix;
use idmrg_core::oracle::{ed_ground, expand_center, raw_mcculloch, raw_predict, renormalize_center};

fn base_config(delta: f64, m: usize, two_n_max: usize, predictor: PredictorChoice) -> RunConfig<f64> {
    let mut cfg = RunConfig::new(delta, m, two_n_max);
    cfg.predictor = predictor;
    cfg
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_oracle_agreement() {
    let mut worst: f64 = 0.0;
    for delta in [0.0, 0.1] {
        let spec = ModelSpec::new(1.0, delta).unwrap();
        let (records, _) = idmrg_run(base_config(delta, 64, 12, PredictorChoice::Pwfrg)).unwrap();
        for rec in &records {
            let (exact, _) = ed_ground(&spec, rec.two_n).unwrap();
            worst = worst.max((rec.energy - exact).abs());
        }
    }
    report(
        "1 (oracle agreement)",
        worst <= 1e-9,
        &format!("max |E_idmrg - E_ed| = {worst:.3e} over 2N=4..12, delta in {{0, 0.1}} (tol 1e-9)"),
    );
}

fn center_of_step(mps: &MpsRecord<f64>, n: usize) -> CenterTensor<f64> {
    let step = mps.get(n).unwrap();
    let (dl, dr) = if n == 2 {
        (2, 2)
    } else {
        let prev = mps.get(n - 1).unwrap();
        (prev.a.cols(), prev.b.cols())
    };
    let ab = step.a.matmul(&step.lambda.matmul(&step.b.transpose()));
    let mut data = vec![0.0; dl * 4 * dr];
    for xi in 0..dl {
        for s in 0..2 {
            for sbar in 0..2 {
                for xibar in 0..dr {
                    data[((xi * 2 + s) * 2 + sbar) * dr + xibar] =
                        ab[(xi * 2 + s, xibar * 2 + sbar)];
                }
            }
        }
    }
    let mut center = CenterTensor::new(dl, dr, data);
    center.normalize();
    center
}

fn chains(mps: &MpsRecord<f64>, up_to: usize) -> (Vec<&DenseMatrix<f64>>, Vec<&DenseMatrix<f64>>) {
    let a = (2..up_to).map(|k| &mps.get(k).unwrap().a).collect();
    let b = (2..up_to).map(|k| &mps.get(k).unwrap().b).collect();
    (a, b)
}

#[test]
fn criterion_2_raw_space_predictor_equivalence() {
    let mut worst_pwfrg: f64 = 1.0;
    let mut worst_mcc: f64 = 1.0;
    for delta in [0.0, 0.1] {
        let mut run = IdmrgRun::new(base_config(delta, 64, 10, PredictorChoice::Pwfrg)).unwrap();
        while !run.is_done() {
            let n = run.next_two_n() / 2;
            if n >= 4 {
                let mps = run.mps();
                let (a_small, b_small) = chains(mps, n - 2);
                let small = center_of_step(mps, n - 2);
                let full_small = expand_center(&small, &a_small, &b_small).unwrap();
                let (a_now, b_now) = chains(mps, n);

                let pw = run.predict(PredictorChoice::Pwfrg).unwrap().unwrap();
                let padded = raw_predict(&full_small).unwrap();
                let pw_raw = renormalize_center(&padded, &a_now, &b_now).unwrap();
                worst_pwfrg = worst_pwfrg.min(pw.tensor.dot(&pw_raw));

                let mc = run.predict(PredictorChoice::Mcculloch).unwrap().unwrap();
                let (a_prev, b_prev) = chains(mps, n - 1);
                let now = center_of_step(mps, n - 1);
                let full_now = expand_center(&now, &a_prev, &b_prev).unwrap();
                let mc_full = raw_mcculloch(&full_small, &full_now, 1e-8).unwrap();
                let mc_raw = renormalize_center(&mc_full, &a_now, &b_now).unwrap();
                worst_mcc = worst_mcc.min(mc.tensor.dot(&mc_raw).abs());
            }
            run.step().unwrap();
        }
    }
    report(
        "2 (raw-space predictor equivalence)",
        worst_pwfrg >= 1.0 - 1e-12 && worst_mcc >= 1.0 - 1e-10,
        &format!(
            "min overlaps over 2N+2 <= 12: shift-based {worst_pwfrg:.15} (>= 1-1e-12), inverse-based {worst_mcc:.15} (>= 1-1e-10)"
        ),
    );
}

#[test]
fn criterion_3_fidelity_decay_by_dimerization() {
    let (uniform, _) = idmrg_run(base_config(0.0, 64, 200, PredictorChoice::Pwfrg)).unwrap();
    let (dimerized, _) = idmrg_run(base_config(0.1, 64, 200, PredictorChoice::Pwfrg)).unwrap();

    let first_below = dimerized
        .iter()
        .find(|r| r.fidelity_error.map(|f| f < 1e-8).unwrap_or(false))
        .map(|r| r.two_n);
    let clause_i = first_below.map(|n| n < 200).unwrap_or(false);

    let mut clause_ii = true;
    let mut ii_detail = String::new();
    for (u, d) in uniform.iter().zip(&dimerized) {
        if u.two_n >= 60 {
            let (fu, fd) = (u.fidelity_error.unwrap(), d.fidelity_error.unwrap());
            if fd > fu {
                clause_ii = false;
                ii_detail = format!("delta=0.1 error {fd:.3e} > delta=0 error {fu:.3e} at 2N={}", u.two_n);
                break;
            }
        }
    }

    let window_ok = |recs: &[idmrg_core::engine::StepRecord<f64>]| -> Option<usize> {
        for r in recs {
            if r.two_n >= 60 {
                let earlier = recs
                    .iter()
                    .find(|p| p.two_n == r.two_n - 20)
                    .and_then(|p| p.fidelity_error)
                    .unwrap();
                if r.fidelity_error.unwrap() > earlier {
                    return Some(r.two_n);
                }
            }
        }
        None
    };
    let iii_uniform = window_ok(&uniform);
    let iii_dimerized = window_ok(&dimerized);
    let clause_iii = iii_uniform.is_none() && iii_dimerized.is_none();

    report(
        "3 (fidelity decay, dimerized vs uniform)",
        clause_i && clause_ii && clause_iii,
        &format!(
            "delta=0.1 first < 1e-8 at 2N={first_below:?} (< 200: {clause_i}); \
             delta=0.1 <= delta=0 for all 2N >= 60: {clause_ii}{}{}; \
             20-site windows non-increasing for 2N >= 60: {clause_iii} (violations at {iii_uniform:?}/{iii_dimerized:?})",
            if ii_detail.is_empty() { "" } else { " [" },
            if ii_detail.is_empty() { String::new() } else { format!("{ii_detail}]") },
        ),
    );
}

#[test]
fn criterion_4_bulk_energy_of_the_gapless_chain() {
    let (records, _) = idmrg_run(base_config(0.0, 64, 400, PredictorChoice::Pwfrg)).unwrap();
    let last = records.last().unwrap();
    assert_eq!(last.two_n, 400);
    let bethe = 0.25 - std::f64::consts::LN_2;
    let diff = (last.energy_per_site_est - bethe).abs();
    report(
        "4 (bulk energy, gapless chain)",
        diff <= 1e-3,
        &format!(
            "energy_per_site_est(2N=400) = {:.7} vs 1/4 - ln 2 = {bethe:.7}, |diff| = {diff:.2e} (tol 1e-3)",
            last.energy_per_site_est
        ),
    );
}

#[test]
fn criterion_5_exactly_solvable_limit() {
    // The criterion pins delta=1 and m=16 but not the predictor; the
    // inverse-based one extends the run's own environment and is exact here.
    let (records, _) = idmrg_run(base_config(1.0, 16, 40, PredictorChoice::Mcculloch)).unwrap();
    let mut worst_trunc: f64 = 0.0;
    let mut worst_fid: f64 = 0.0;
    let mut fid_count = 0usize;
    for r in &records {
        worst_trunc = worst_trunc.max(r.trunc_err_left.max(r.trunc_err_right));
        if let Some(f) = r.fidelity_error {
            worst_fid = worst_fid.max(f);
            fid_count += 1;
        }
        let n = r.two_n as f64 / 2.0;
        assert!((r.energy - (-1.5 * (n - 1.0))).abs() < 1e-9, "dimer energy at 2N={}", r.two_n);
    }
    // Supplementary: the shift-based predictor in the same limit. Its first
    // two predictions happen before any truncation, where the trial equals
    // the raw padded construction, whose projection onto the 4-fold
    // degenerate dimer ground space is bounded near 0.25; from the first
    // truncated step on it is exact too.
    let (shift_records, _) = idmrg_run(base_config(1.0, 16, 40, PredictorChoice::Pwfrg)).unwrap();
    let shift_exceptions: Vec<(usize, f64)> = shift_records
        .iter()
        .filter_map(|r| r.fidelity_error.map(|f| (r.two_n, f)))
        .filter(|&(_, f)| f > 1e-10)
        .collect();
    report(
        "5 (exactly solvable dimer limit)",
        worst_trunc <= 1e-12 && worst_fid <= 1e-10 && fid_count > 0,
        &format!(
            "inverse predictor: max fidelity error {worst_fid:.2e} over {fid_count} predicted steps \
             (tol 1e-10), max truncation error {worst_trunc:.2e} (tol 1e-12); \
             shift predictor exceeds the bound only at its pre-truncation steps {shift_exceptions:?}"
        ),
    );
}

#[test]
fn criterion_6_warm_start_payoff() {
    let warm_cfg = base_config(0.1, 64, 200, PredictorChoice::Pwfrg);
    let mut cold_cfg = warm_cfg.clone();
    cold_cfg.predictor = PredictorChoice::None;
    let (warm, _) = idmrg_run(warm_cfg).unwrap();
    let (cold, _) = idmrg_run(cold_cfg).unwrap();
    let mut warm_total = 0usize;
    let mut cold_total = 0usize;
    let mut per_step_ok = true;
    let mut detail = String::new();
    for (w, c) in warm.iter().zip(&cold) {
        if w.two_n >= 20 {
            warm_total += w.lanczos_iterations;
            cold_total += c.lanczos_iterations;
            if w.lanczos_iterations > c.lanczos_iterations {
                per_step_ok = false;
                detail = format!(
                    " [first violation at 2N={}: {} vs {}]",
                    w.two_n, w.lanczos_iterations, c.lanczos_iterations
                );
            }
        }
    }
    let ratio = cold_total as f64 / warm_total as f64;
    report(
        "6 (warm-start payoff)",
        per_step_ok && ratio >= 2.0,
        &format!(
            "per-step warm <= cold for all 2N >= 20: {per_step_ok}{detail}; \
             total iterations {cold_total} cold vs {warm_total} warm, ratio {ratio:.2} (>= 2 required)"
        ),
    );
}

#[test]
fn criterion_7_invariant_suite() {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE97);
    let mut checked = 0usize;
    for _ in 0..5 {
        let delta: f64 = rng.gen_range(0.0..0.9);
        let m = *[8usize, 21, 64].get(rng.gen_range(0..3)).unwrap();
        let predictor = if rng.gen_bool(0.5) {
            PredictorChoice::Pwfrg
        } else {
            PredictorChoice::Mcculloch
        };
        let mut run = IdmrgRun::new(base_config(delta, m, 36, predictor)).unwrap();
        while !run.is_done() {
            // Superblock symmetry on random vectors at this step.
            let (left, right, c) = run.next_superblock().unwrap();
            let (dl, dr) = (left.dim() / 2, right.dim() / 2);
            let mut x = CenterTensor::zeros(dl, dr);
            let mut y = CenterTensor::zeros(dl, dr);
            for v in x.data_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            for v in y.data_mut() {
                *v = rng.gen_range(-1.0..1.0);
            }
            let hx = superblock_apply(&left, &right, c, &x).unwrap();
            let hy = superblock_apply(&left, &right, c, &y).unwrap();
            let scale = hx.norm().max(hy.norm()).max(1.0);
            assert!(
                (y.dot(&hx) - x.dot(&hy)).abs() <= 1e-12 * scale,
                "superblock asymmetry at delta={delta} m={m}"
            );

            let rec = run.step().unwrap();
            let step = run.mps().last().unwrap();
            assert!(step.a.orthonormality_defect() <= 1e-12);
            assert!(step.b.orthonormality_defect() <= 1e-12);
            // Density-matrix trace: the full spectrum must sum to 1.
            let tl: f64 = step.spectrum_left.iter().sum();
            let tr: f64 = step.spectrum_right.iter().sum();
            assert!((tl - 1.0).abs() <= 1e-10 && (tr - 1.0).abs() <= 1e-10);
            // Truncation bookkeeping identity.
            let kept_l: f64 = step.spectrum_left[..rec.m_kept_left].iter().sum();
            assert!((rec.trunc_err_left - (1.0 - kept_l).max(0.0)).abs() <= 1e-15);
            let kept_r: f64 = step.spectrum_right[..rec.m_kept_right].iter().sum();
            assert!((rec.trunc_err_right - (1.0 - kept_r).max(0.0)).abs() <= 1e-15);
            if let Some(f) = rec.fidelity_error {
                assert!((0.0..=1.0).contains(&f));
            }
            checked += 1;
        }
    }
    report(
        "7 (invariant suite)",
        true,
        &format!("isometry, trace, bookkeeping, fidelity-range, symmetry checks green over {checked} steps"),
    );
}

#[test]
fn criterion_8_single_step_variant() {
    let mut single_cfg = base_config(0.1, 64, 400, PredictorChoice::Pwfrg);
    single_cfg.lanczos_mode = LanczosModeConfig::SingleStep;
    let (single, _) = idmrg_run(single_cfg).unwrap();
    let (converged, _) = idmrg_run(base_config(0.1, 64, 400, PredictorChoice::Pwfrg)).unwrap();
    let last_single = single.last().unwrap();
    let last_converged = converged.last().unwrap();
    let reached = last_single.two_n == 400;
    let diff = (last_single.energy_per_site_est - last_converged.energy_per_site_est).abs();
    report(
        "8 (single Lanczos step variant)",
        reached && diff <= 1e-4,
        &format!(
            "run reached 2N={}; energy_per_site_est {:.8} vs converge-mode {:.8}, |diff| = {diff:.2e} (tol 1e-4)",
            last_single.two_n,
            last_single.energy_per_site_est,
            last_converged.energy_per_site_est
        ),
    );
}
