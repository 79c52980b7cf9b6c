//! Least-squares estimation of all five channel families.
//!
//! Stage 1 correlates the received sub-frames against the orthogonal pilots:
//! `Ā = mean_c (Y_c·X†)ᴴ`, `b̄_k = mean_c Y_c·z_k†`, `d̄_j = mean_c (r_{j,c}·X†)ᴴ`.
//! Stage 2 first cancels the direct-channel contributions using the stage-1
//! estimates, separates per-user columns with `z_k†`, stacks one column per
//! IRS phase vector, and divides out the phase schedule:
//! `B̄_k = Ȳ_k·V†`, `D̄_j = R̄_jᴴ·V†`.
//!
//! These estimators are both the classical baseline the learned models are
//! compared against and the source of the estimate-based model inputs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::airlink::RxRecord;
use crate::error::{SimError, SimResult};
use crate::pilotplan::PilotPlan;

/// The full set of channel estimates for one realization. The least-squares
/// chain below fills it, and so does the learned chain at evaluation time —
/// downstream input builders accept either source.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEstimates {
    /// Sensing channel estimate, M×M.
    pub a_bar: DMatrix<Complex64>,
    /// Uplink direct channels, K vectors of length M.
    pub b_bar: Vec<DVector<Complex64>>,
    /// Downlink direct channels, J vectors of length M.
    pub d_bar: Vec<DVector<Complex64>>,
    /// Uplink reflected cascades, K matrices of M×L.
    pub b_casc_bar: Vec<DMatrix<Complex64>>,
    /// Downlink reflected cascades, J matrices of M×L.
    pub d_casc_bar: Vec<DMatrix<Complex64>>,
}

/// Moore–Penrose pseudoinverse by singular value decomposition; singular
/// values at or below `max(rows, cols)·ε·σ_max` are treated as zero. For a
/// full-row-rank wide matrix this equals `Xᴴ·(X·Xᴴ)⁻¹`, but the SVD route is
/// also well behaved on rank-deficient input.
pub fn pinv(mat: &DMatrix<Complex64>) -> SimResult<DMatrix<Complex64>> {
    let max_abs = mat.iter().map(|e| e.norm()).fold(0.0f64, f64::max);
    if max_abs == 0.0 {
        return Err(SimError::DegenerateInput(
            "pseudoinverse of an all-zero matrix".into(),
        ));
    }
    let (rows, cols) = mat.shape();
    let svd = mat.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.max();
    let tol = rows.max(cols) as f64 * f64::EPSILON * sigma_max;
    // pinv = V·Σ⁺·Uᴴ, dropping directions below the noise floor of the
    // decomposition itself.
    let r = svd.singular_values.len();
    let mut sigma_pinv = DMatrix::<Complex64>::zeros(r, r);
    for i in 0..r {
        let s = svd.singular_values[i];
        if s > tol {
            sigma_pinv[(i, i)] = Complex64::new(1.0 / s, 0.0);
        }
    }
    Ok(v_t.adjoint() * sigma_pinv * u.adjoint())
}

/// Stage-1 estimates at the BS: the sensing channel and every uplink direct
/// channel, averaged over the stage-1 sub-frames.
pub fn ls_stage1_bs(
    rx: &RxRecord,
    plan: &PilotPlan,
) -> (DMatrix<Complex64>, Vec<DVector<Complex64>>) {
    let c_count = rx.y_s1.len() as f64;
    let m = plan.x_s1.nrows();
    let mut a_bar = DMatrix::<Complex64>::zeros(m, m);
    for y in &rx.y_s1 {
        a_bar += (y * &plan.x_s1_pinv).adjoint();
    }
    a_bar /= Complex64::new(c_count, 0.0);

    let b_bar = plan
        .z_s1_pinv
        .iter()
        .map(|zp| {
            let mut b = DVector::<Complex64>::zeros(m);
            for y in &rx.y_s1 {
                b += y * zp;
            }
            b / Complex64::new(c_count, 0.0)
        })
        .collect();
    (a_bar, b_bar)
}

/// Stage-1 estimate at downlink user `j`: its direct channel from the BS,
/// averaged over the stage-1 sub-frames.
pub fn ls_stage1_ue(rx: &RxRecord, plan: &PilotPlan, j: usize) -> DVector<Complex64> {
    let c_count = rx.r_s1[j].len() as f64;
    let m = plan.x_s1.nrows();
    let mut d_bar = DVector::<Complex64>::zeros(m);
    for r in &rx.r_s1[j] {
        d_bar += (r * &plan.x_s1_pinv).adjoint();
    }
    d_bar / Complex64::new(c_count, 0.0)
}

/// Subtract the direct-channel contributions from every stage-2 BS sub-frame
/// and separate per-user columns: returns `y_bar[k][c]`, the length-M response
/// of user `k`'s cascade to the `c`-th IRS phase vector (plus residual noise
/// and any stage-1 estimation error).
pub fn cancel_and_separate_bs(
    rx: &RxRecord,
    plan: &PilotPlan,
    a_hat: &DMatrix<Complex64>,
    b_hat: &[DVector<Complex64>],
) -> Vec<Vec<DVector<Complex64>>> {
    let k_count = plan.z_s2.len();
    let bs_direct = {
        let mut d = a_hat.adjoint() * &plan.x_s2;
        for k in 0..k_count {
            d += &b_hat[k] * &plan.z_s2[k];
        }
        d
    };
    let mut y_bar: Vec<Vec<DVector<Complex64>>> = vec![Vec::with_capacity(rx.y_s2.len()); k_count];
    for y in &rx.y_s2 {
        let cleaned = y - &bs_direct;
        for (k, zp) in plan.z_s2_pinv.iter().enumerate() {
            y_bar[k].push(&cleaned * zp);
        }
    }
    y_bar
}

/// Stage-2 estimate of every uplink reflected cascade: stack the separated
/// responses as columns and divide out the IRS phase schedule.
pub fn ls_stage2_bs(
    y_bar: &[Vec<DVector<Complex64>>],
    plan: &PilotPlan,
) -> SimResult<Vec<DMatrix<Complex64>>> {
    let l = plan.v_s2.nrows();
    y_bar
        .iter()
        .map(|cols| {
            if cols.len() < l {
                return Err(SimError::DegenerateInput(format!(
                    "stage-2 window has {} sub-frames but the phase schedule needs at least {l}",
                    cols.len()
                )));
            }
            let m = cols[0].len();
            let mut stacked = DMatrix::<Complex64>::zeros(m, cols.len());
            for (c, col) in cols.iter().enumerate() {
                stacked.set_column(c, col);
            }
            Ok(stacked * &plan.v_s2_pinv)
        })
        .collect()
}

/// Stage-2 estimate of downlink user `j`'s reflected cascade: cancel the
/// direct path, divide out the BS pilot per sub-frame, stack one row per IRS
/// phase vector, and divide out the phase schedule.
pub fn ls_stage2_ue(
    rx: &RxRecord,
    plan: &PilotPlan,
    d_hat: &DVector<Complex64>,
    j: usize,
) -> SimResult<DMatrix<Complex64>> {
    let c_count = rx.r_s2[j].len();
    let l = plan.v_s2.nrows();
    if c_count < l {
        return Err(SimError::DegenerateInput(format!(
            "stage-2 window has {c_count} sub-frames but the phase schedule needs at least {l}"
        )));
    }
    let direct = d_hat.adjoint() * &plan.x_s2;
    let m = plan.x_s2.nrows();
    let mut stacked = DMatrix::<Complex64>::zeros(c_count, m);
    for (c, r) in rx.r_s2[j].iter().enumerate() {
        let cleaned = r - &direct;
        let row = cleaned * &plan.x_s2_pinv;
        stacked.set_row(c, &row);
    }
    Ok(stacked.adjoint() * &plan.v_s2_pinv)
}

/// Run the complete two-stage LS chain on one received frame.
pub fn ls_full_chain(rx: &RxRecord, plan: &PilotPlan) -> SimResult<ChannelEstimates> {
    let (a_bar, b_bar) = ls_stage1_bs(rx, plan);
    let d_bar: Vec<DVector<Complex64>> =
        (0..rx.r_s1.len()).map(|j| ls_stage1_ue(rx, plan, j)).collect();
    let y_bar = cancel_and_separate_bs(rx, plan, &a_bar, &b_bar);
    let b_casc_bar = ls_stage2_bs(&y_bar, plan)?;
    let d_casc_bar = d_bar
        .iter()
        .enumerate()
        .map(|(j, d_hat)| ls_stage2_ue(rx, plan, d_hat, j))
        .collect::<SimResult<Vec<_>>>()?;
    Ok(ChannelEstimates {
        a_bar,
        b_bar,
        d_bar,
        b_casc_bar,
        d_casc_bar,
    })
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::airlink::transmit;
    use crate::pilotplan::build_pilot_plan;
    use crate::rng::{stream, Purpose};
    use crate::sysmodel::{gen_channel_set, ChannelSet, SystemConfig, SystemConfigPatch};
    use approx::assert_relative_eq;
    use nalgebra::RowDVector;

    fn rel_err(est: &DMatrix<Complex64>, act: &DMatrix<Complex64>) -> f64 {
        (est - act).norm() / act.norm()
    }

    #[test]
    fn pinv_of_identity_is_identity() {
        let id = DMatrix::<Complex64>::identity(4, 4);
        let p = pinv(&id).unwrap();
        assert!((p - DMatrix::<Complex64>::identity(4, 4)).norm() < 1e-14);
    }

    #[test]
    fn pinv_of_orthogonal_rows_is_scaled_adjoint() {
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let closed = plan.x_s1.adjoint() * Complex64::new(cfg.m as f64 / cfg.p_s1 as f64, 0.0);
        let svd_path = pinv(&plan.x_s1).unwrap();
        assert!((svd_path - closed).norm() < 1e-13);
    }

    #[test]
    fn pinv_satisfies_penrose_conditions_on_random_matrices() {
        let mut r = stream(0, Purpose::ChannelTrain, 77);
        for trial in 0..100 {
            let (rows, cols) = ((trial % 5) + 2, (trial % 7) + 2);
            let x = DMatrix::from_fn(rows, cols, |_, _| crate::sysmodel::cnormal(&mut r));
            let xp = pinv(&x).unwrap();
            assert!((&x * &xp * &x - &x).norm() <= 1e-10 * x.norm().max(1.0));
            assert!((&xp * &x * &xp - &xp).norm() <= 1e-10 * xp.norm().max(1.0));
        }
    }

    #[test]
    fn pinv_rejects_zero_matrix() {
        let z = DMatrix::<Complex64>::zeros(3, 2);
        assert!(matches!(pinv(&z), Err(SimError::DegenerateInput(_))));
    }

    #[test]
    fn pinv_handles_rank_deficiency() {
        // Two identical rows: rank 1 of a 2×3; Penrose conditions still hold.
        let row = [
            Complex64::new(1.0, 0.5),
            Complex64::new(-0.3, 0.2),
            Complex64::new(0.8, -1.1),
        ];
        let x = DMatrix::from_fn(2, 3, |_, c| row[c]);
        let xp = pinv(&x).unwrap();
        assert!((&x * &xp * &x - &x).norm() <= 1e-12 * x.norm());
        assert!((&xp * &x * &xp - &xp).norm() <= 1e-12 * xp.norm());
    }

    #[test]
    fn zero_noise_stage1_recovers_direct_channels() {
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let ch = gen_channel_set(&cfg, &mut stream(1, Purpose::ChannelTrain, 0));
        let rx = transmit(&cfg, &plan, &ch, 0.0, 0.0, &mut stream(1, Purpose::NoiseTrain, 0))
            .unwrap();
        let (a_bar, b_bar) = ls_stage1_bs(&rx, &plan);
        assert!(rel_err(&a_bar, &ch.a) < 1e-10);
        for k in 0..cfg.k {
            assert!((&b_bar[k] - &ch.b[k]).norm() < 1e-10 * ch.b[k].norm());
        }
        for j in 0..cfg.j {
            let d_bar = ls_stage1_ue(&rx, &plan, j);
            assert!((&d_bar - &ch.d[j]).norm() < 1e-10 * ch.d[j].norm());
        }
    }

    #[test]
    fn stage1_noise_variance_matches_analytic_floor() {
        // With zero channels the estimate IS the filtered noise, whose
        // per-entry variance is σ²/P^{S1}.
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let zeros = ChannelSet::zeros(&cfg);
        let var = 2.3e-2;
        let trials = 10_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let rx = transmit(&cfg, &plan, &zeros, var, var, &mut stream(2, Purpose::NoiseTrain, t))
                .unwrap();
            let (_, b_bar) = ls_stage1_bs(&rx, &plan);
            acc += b_bar[0].norm_squared();
        }
        let per_entry = acc / (trials as f64 * cfg.m as f64);
        assert_relative_eq!(per_entry, var / cfg.p_s1 as f64, max_relative = 0.05);
    }

    #[test]
    fn extra_stage1_subframes_halve_the_noise_floor() {
        let patch: SystemConfigPatch = serde_json::from_str(r#"{"c_s1": 2}"#).unwrap();
        let cfg2 = SystemConfig::desk_default().with_patch(&patch).unwrap();
        let cfg1 = SystemConfig::desk_default();
        let plan1 = build_pilot_plan(&cfg1).unwrap();
        let plan2 = build_pilot_plan(&cfg2).unwrap();
        let var = 1e-2;
        let trials = 4000;
        let measure = |cfg: &SystemConfig, plan: &PilotPlan, salt: u64| {
            let zeros = ChannelSet::zeros(cfg);
            let mut acc = 0.0;
            for t in 0..trials {
                let rx = transmit(cfg, plan, &zeros, var, var,
                    &mut stream(salt, Purpose::NoiseTrain, t)).unwrap();
                let (_, b_bar) = ls_stage1_bs(&rx, plan);
                acc += b_bar[0].norm_squared();
            }
            acc / trials as f64
        };
        let ratio = measure(&cfg1, &plan1, 30) / measure(&cfg2, &plan2, 31);
        assert!((ratio - 2.0).abs() < 0.2, "averaging gain ratio {ratio} not near 2");
    }

    #[test]
    fn stage1_ue_error_energy_matches_covariance_oracle() {
        // E‖d̄ − d‖² = ζ²·trace((X·Xᴴ)⁻¹) = ζ²·M²/P^{S1}.
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let zeros = ChannelSet::zeros(&cfg);
        let var = 4.1e-3;
        let trials = 10_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let rx = transmit(&cfg, &plan, &zeros, var, var, &mut stream(3, Purpose::NoiseTrain, t))
                .unwrap();
            acc += ls_stage1_ue(&rx, &plan, 0).norm_squared();
        }
        let want = var * (cfg.m * cfg.m) as f64 / cfg.p_s1 as f64;
        assert_relative_eq!(acc / trials as f64, want, max_relative = 0.05);
    }

    #[test]
    fn cancellation_with_perfect_estimates_isolates_the_cascade() {
        let patch: SystemConfigPatch = serde_json::from_str(r#"{"k": 1, "j": 1}"#).unwrap();
        let cfg = SystemConfig::desk_default().with_patch(&patch).unwrap();
        let plan = build_pilot_plan(&cfg).unwrap();
        let ch = gen_channel_set(&cfg, &mut stream(4, Purpose::ChannelTrain, 0));
        let rx = transmit(&cfg, &plan, &ch, 0.0, 0.0, &mut stream(4, Purpose::NoiseTrain, 0))
            .unwrap();
        let y_bar = cancel_and_separate_bs(&rx, &plan, &ch.a, &ch.b);
        for c in 0..cfg.stage2_subframes() {
            let want = &ch.b_casc[0] * plan.v_s2.column(c);
            assert!((&y_bar[0][c] - &want).norm() < 1e-10 * want.norm());
        }
    }

    #[test]
    fn cancellation_with_equal_user_and_antenna_count_separates_users() {
        // K = M makes the stage-2 user rows a full orthogonal set, so the
        // cross terms z_k'·z_k† vanish and each user separates cleanly.
        let patch: SystemConfigPatch = serde_json::from_str(r#"{"m": 2, "k": 2, "j": 1, "l": 4}"#)
            .unwrap();
        let cfg = SystemConfig::desk_default().with_patch(&patch).unwrap();
        let plan = build_pilot_plan(&cfg).unwrap();
        let cross = (&plan.z_s2[1] * &plan.z_s2_pinv[0])[(0, 0)];
        assert!(cross.norm() < 1e-12);
        let ch = gen_channel_set(&cfg, &mut stream(5, Purpose::ChannelTrain, 0));
        let rx = transmit(&cfg, &plan, &ch, 0.0, 0.0, &mut stream(5, Purpose::NoiseTrain, 0))
            .unwrap();
        let y_bar = cancel_and_separate_bs(&rx, &plan, &ch.a, &ch.b);
        for k in 0..cfg.k {
            for c in 0..cfg.stage2_subframes() {
                let want = &ch.b_casc[k] * plan.v_s2.column(c);
                assert!((&y_bar[k][c] - &want).norm() < 1e-9 * want.norm());
            }
        }
    }

    #[test]
    fn stage1_bias_passes_through_cancellation_verbatim() {
        // Overestimating b by δ leaves exactly −δ in every separated column.
        let patch: SystemConfigPatch = serde_json::from_str(r#"{"k": 1, "j": 1}"#).unwrap();
        let cfg = SystemConfig::desk_default().with_patch(&patch).unwrap();
        let plan = build_pilot_plan(&cfg).unwrap();
        let ch = gen_channel_set(&cfg, &mut stream(6, Purpose::ChannelTrain, 0));
        let rx = transmit(&cfg, &plan, &ch, 0.0, 0.0, &mut stream(6, Purpose::NoiseTrain, 0))
            .unwrap();
        let delta = DVector::from_fn(cfg.m, |i, _| Complex64::new(0.1 * (i as f64 + 1.0), -0.05));
        let biased = vec![&ch.b[0] + &delta];
        let y_bar = cancel_and_separate_bs(&rx, &plan, &ch.a, &biased);
        for c in 0..cfg.stage2_subframes() {
            let residual = &y_bar[0][c] - &ch.b_casc[0] * plan.v_s2.column(c);
            assert!((residual + &delta).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_noise_stage2_recovers_cascades() {
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let ch = gen_channel_set(&cfg, &mut stream(7, Purpose::ChannelTrain, 0));
        let rx = transmit(&cfg, &plan, &ch, 0.0, 0.0, &mut stream(7, Purpose::NoiseTrain, 0))
            .unwrap();
        let y_bar = cancel_and_separate_bs(&rx, &plan, &ch.a, &ch.b);
        let b_casc_bar = ls_stage2_bs(&y_bar, &plan).unwrap();
        for k in 0..cfg.k {
            assert!(rel_err(&b_casc_bar[k], &ch.b_casc[k]) < 1e-9);
        }
        for j in 0..cfg.j {
            let d_casc_bar = ls_stage2_ue(&rx, &plan, &ch.d[j], j).unwrap();
            assert_eq!(d_casc_bar.shape(), (cfg.m, cfg.l));
            assert!(rel_err(&d_casc_bar, &ch.d_casc[j]) < 1e-9);
        }
    }

    #[test]
    fn stage1_error_lands_on_first_schedule_column_only() {
        // The DFT schedule's rows sum to zero except the first, so a constant
        // per-column bias folds entirely into the estimate's first column.
        let patch: SystemConfigPatch = serde_json::from_str(r#"{"k": 1, "j": 1}"#).unwrap();
        let cfg = SystemConfig::desk_default().with_patch(&patch).unwrap();
        let plan = build_pilot_plan(&cfg).unwrap();
        let ch = gen_channel_set(&cfg, &mut stream(8, Purpose::ChannelTrain, 0));
        let rx = transmit(&cfg, &plan, &ch, 0.0, 0.0, &mut stream(8, Purpose::NoiseTrain, 0))
            .unwrap();
        let delta = DVector::from_fn(cfg.m, |i, _| Complex64::new(0.02, 0.03 * i as f64));
        let biased = vec![&ch.b[0] + &delta];
        let y_bar = cancel_and_separate_bs(&rx, &plan, &ch.a, &biased);
        let b_casc_bar = ls_stage2_bs(&y_bar, &plan).unwrap();
        let err = &b_casc_bar[0] - &ch.b_casc[0];
        let first_col = err.column(0).into_owned();
        assert!((first_col + &delta).norm() < 1e-10);
        for c in 1..cfg.l {
            assert!(err.column(c).norm() < 1e-10);
        }
    }

    #[test]
    fn stage2_noise_energy_matches_covariance_oracle() {
        // Perfect stage-1 estimates (zeros for zero channels), noise only:
        // E‖B̄‖² = σ²·M·L/(P^{S2}·ΔC) and E‖D̄‖² = ζ²·M²·L/(P^{S2}·ΔC).
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let zeros = ChannelSet::zeros(&cfg);
        let var = 6.4e-3;
        let trials = 4000;
        let (mut acc_b, mut acc_d) = (0.0, 0.0);
        let zero_a = DMatrix::zeros(cfg.m, cfg.m);
        let zero_b = vec![DVector::zeros(cfg.m); cfg.k];
        let zero_d = DVector::zeros(cfg.m);
        for t in 0..trials {
            let rx = transmit(&cfg, &plan, &zeros, var, var, &mut stream(9, Purpose::NoiseTrain, t))
                .unwrap();
            let y_bar = cancel_and_separate_bs(&rx, &plan, &zero_a, &zero_b);
            acc_b += ls_stage2_bs(&y_bar, &plan).unwrap()[0].norm_squared();
            acc_d += ls_stage2_ue(&rx, &plan, &zero_d, 0).unwrap().norm_squared();
        }
        let dc = cfg.stage2_subframes() as f64;
        let want_b = var * (cfg.m * cfg.l) as f64 / (cfg.p_s2 as f64 * dc);
        let want_d = var * (cfg.m * cfg.m * cfg.l) as f64 / (cfg.p_s2 as f64 * dc);
        assert_relative_eq!(acc_b / trials as f64, want_b, max_relative = 0.05);
        assert_relative_eq!(acc_d / trials as f64, want_d, max_relative = 0.05);
    }

    #[test]
    fn doubling_the_schedule_halves_stage2_noise() {
        let cfg1 = SystemConfig::desk_default();
        let patch: SystemConfigPatch = serde_json::from_str(r#"{"c_s2": 17}"#).unwrap();
        let cfg2 = SystemConfig::desk_default().with_patch(&patch).unwrap();
        assert_eq!(cfg2.stage2_subframes(), 2 * cfg1.stage2_subframes());
        let var = 1e-2;
        let trials = 3000;
        let measure = |cfg: &SystemConfig, salt: u64| {
            let plan = build_pilot_plan(cfg).unwrap();
            let zeros = ChannelSet::zeros(cfg);
            let zero_a = DMatrix::zeros(cfg.m, cfg.m);
            let zero_b = vec![DVector::zeros(cfg.m); cfg.k];
            let mut acc = 0.0;
            for t in 0..trials {
                let rx = transmit(cfg, &plan, &zeros, var, var,
                    &mut stream(salt, Purpose::NoiseTrain, t)).unwrap();
                let y_bar = cancel_and_separate_bs(&rx, &plan, &zero_a, &zero_b);
                acc += ls_stage2_bs(&y_bar, &plan).unwrap()[0].norm_squared();
            }
            acc / trials as f64
        };
        let ratio = measure(&cfg1, 40) / measure(&cfg2, 41);
        assert!((ratio - 2.0).abs() < 0.2, "schedule-length gain ratio {ratio} not near 2");
    }

    #[test]
    fn full_chain_is_exact_at_zero_noise_across_sizes() {
        for (m, k, l) in [(2usize, 2usize, 4usize), (4, 4, 8), (6, 6, 4)] {
            let patch: SystemConfigPatch = serde_json::from_str(&format!(
                r#"{{"m": {m}, "k": {k}, "j": 2, "l": {l}}}"#
            ))
            .unwrap();
            let cfg = SystemConfig::desk_default().with_patch(&patch).unwrap();
            let plan = build_pilot_plan(&cfg).unwrap();
            for t in 0..5 {
                let ch = gen_channel_set(&cfg, &mut stream(t, Purpose::ChannelEval, 0));
                let rx = transmit(&cfg, &plan, &ch, 0.0, 0.0,
                    &mut stream(t, Purpose::NoiseEval, 0)).unwrap();
                let est = ls_full_chain(&rx, &plan).unwrap();
                assert!(rel_err(&est.a_bar, &ch.a) < 1e-9);
                for k in 0..cfg.k {
                    assert!((&est.b_bar[k] - &ch.b[k]).norm() < 1e-9 * ch.b[k].norm());
                    assert!(rel_err(&est.b_casc_bar[k], &ch.b_casc[k]) < 1e-9);
                }
                for j in 0..cfg.j {
                    assert!((&est.d_bar[j] - &ch.d[j]).norm() < 1e-9 * ch.d[j].norm());
                    assert!(rel_err(&est.d_casc_bar[j], &ch.d_casc[j]) < 1e-9);
                }
            }
        }
    }

    #[test]
    fn row_times_its_pinv_is_one() {
        let z = RowDVector::from_fn(6, |_, c| Complex64::from_polar(1.0, 0.7 * c as f64));
        let plan_free_pinv = z.adjoint() / Complex64::new(6.0, 0.0);
        let prod = (&z * &plan_free_pinv)[(0, 0)];
        assert_relative_eq!(prod.re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(prod.im, 0.0, epsilon = 1e-12);
    }
}
