//! Noisy received-signal synthesis and SNR bookkeeping.
//!
//! Stage 1 (IRS off): the BS hears its own sensing echo plus every uplink
//! pilot, `Y_c = Aᴴ·X^{S1} + Σ_k b_k·z_k^{S1} + N_c`; downlink user j hears
//! `r_{j,c} = d_jᴴ·X^{S1} + w_{j,c}`. Stage 2 (IRS on, phase vector `v_c` per
//! sub-frame): the uplink pilots additionally arrive through the surface,
//! `Y_c = Σ_k (b_k + B_k·v_c)·z_k^{S2} + Aᴴ·X^{S2} + N_c`, and the downlink
//! hears `r_{j,c} = (d_jᴴ + v_cᴴ·D_jᴴ)·X^{S2} + w_{j,c}`.
//!
//! Self-interference is assumed compensated upstream and propagation is
//! treated as synchronized (slot duration exceeds every path delay), so the
//! models above are exact up to the additive thermal noise.

use nalgebra::{DMatrix, RowDVector};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{SimError, SimResult};
use crate::pilotplan::PilotPlan;
use crate::sysmodel::{cnormal, ChannelSet, SystemConfig};

/// Estimation stage selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    One,
    Two,
}

/// Receiving side. All downlink users share the same geometry, so no index is
/// needed to evaluate link budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Receiver {
    Bs,
    Downlink,
}

/// Received sub-frame signals for one channel realization: BS matrices and
/// per-downlink-user rows for both stages, plus the noise variances used.
#[derive(Debug, Clone, PartialEq)]
pub struct RxRecord {
    /// Stage-1 BS sub-frames, `c_s1` matrices of M×P^{S1}.
    pub y_s1: Vec<DMatrix<Complex64>>,
    /// Stage-2 BS sub-frames, `c_s2 − c_s1` matrices of M×P^{S2}.
    pub y_s2: Vec<DMatrix<Complex64>>,
    /// Stage-1 downlink rows, indexed `[j][c]`, each 1×P^{S1}.
    pub r_s1: Vec<Vec<RowDVector<Complex64>>>,
    /// Stage-2 downlink rows, indexed `[j][c]`, each 1×P^{S2}.
    pub r_s2: Vec<Vec<RowDVector<Complex64>>>,
    /// BS-side noise variance σ² (watts).
    pub noise_var_bs: f64,
    /// Downlink-side noise variance ζ² (watts).
    pub noise_var_ue: f64,
}

/// Average received signal power for the given stage and receiver, combining
/// transmit powers with the link budgets: the BS collects the sensing echo and
/// one representative uplink user's direct (stage 1) plus reflected (stage 2)
/// paths; a downlink user collects the BS direct path plus, in stage 2, the
/// BS→IRS→user path.
pub fn received_power(cfg: &SystemConfig, stage: Stage, receiver: Receiver) -> f64 {
    let (pb, pu) = (cfg.tx_power_bs, cfg.tx_power_ue);
    match (stage, receiver) {
        (Stage::One, Receiver::Bs) => pb * cfg.xi_s() + pu * cfg.xi_ukb(),
        (Stage::Two, Receiver::Bs) => {
            pb * cfg.xi_s() + pu * (cfg.xi_ukb() + cfg.xi_uki() * cfg.xi_ib())
        }
        (Stage::One, Receiver::Downlink) => pb * cfg.xi_bdj(),
        (Stage::Two, Receiver::Downlink) => {
            pb * (cfg.xi_bdj() + cfg.xi_idj() * cfg.xi_ib())
        }
    }
}

/// Noise variance that realizes `snr_db` at the given receiver and stage:
/// `R/10^(snr_db/10)`. An infinite SNR is the noiseless sentinel and maps to
/// exactly zero variance.
pub fn noise_var_for_snr(cfg: &SystemConfig, stage: Stage, receiver: Receiver, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        return 0.0;
    }
    received_power(cfg, stage, receiver) / 10f64.powf(snr_db / 10.0)
}

/// Synthesize every received sub-frame of one estimation frame.
///
/// Noise is i.i.d. circular complex Gaussian, drawn freshly per sub-frame in a
/// fixed order — per stage-1 sub-frame the BS matrix (column-major) then each
/// downlink user's row, then the same pattern for stage 2 — so a given rng
/// stream always yields the same noise realization regardless of channel
/// content (the draw count depends only on shapes). Zero variance scales the
/// draws to exactly zero rather than skipping them.
pub fn transmit(
    cfg: &SystemConfig,
    plan: &PilotPlan,
    ch: &ChannelSet,
    noise_var_bs: f64,
    noise_var_ue: f64,
    rng: &mut ChaCha8Rng,
) -> SimResult<RxRecord> {
    if ch.a.nrows() != cfg.m
        || ch.h.shape() != (cfg.m, cfg.l)
        || ch.b.len() != cfg.k
        || ch.d.len() != cfg.j
        || plan.x_s1.shape() != (cfg.m, cfg.p_s1)
        || plan.x_s2.shape() != (cfg.m, cfg.p_s2)
        || plan.v_s2.shape() != (cfg.l, cfg.stage2_subframes())
    {
        return Err(SimError::DimensionMismatch(
            "channel set or pilot plan does not match the configuration".into(),
        ));
    }
    let sigma = noise_var_bs.sqrt();
    let zeta = noise_var_ue.sqrt();

    // Direct-path contributions are identical in every sub-frame of a stage;
    // compute them once.
    let bs_direct_s1 = {
        let mut y = ch.a.adjoint() * &plan.x_s1;
        for k in 0..cfg.k {
            y += &ch.b[k] * &plan.z_s1[k];
        }
        y
    };
    let ue_direct_s1: Vec<RowDVector<Complex64>> =
        (0..cfg.j).map(|j| ch.d[j].adjoint() * &plan.x_s1).collect();

    let mut y_s1 = Vec::with_capacity(cfg.c_s1);
    let mut r_s1: Vec<Vec<RowDVector<Complex64>>> = vec![Vec::with_capacity(cfg.c_s1); cfg.j];
    for _c in 0..cfg.c_s1 {
        let mut y = bs_direct_s1.clone();
        for e in y.iter_mut() {
            *e += sigma * cnormal(rng);
        }
        y_s1.push(y);
        for j in 0..cfg.j {
            let mut r = ue_direct_s1[j].clone();
            for e in r.iter_mut() {
                *e += zeta * cnormal(rng);
            }
            r_s1[j].push(r);
        }
    }

    let bs_sensing_s2 = ch.a.adjoint() * &plan.x_s2;
    let mut y_s2 = Vec::with_capacity(cfg.stage2_subframes());
    let mut r_s2: Vec<Vec<RowDVector<Complex64>>> =
        vec![Vec::with_capacity(cfg.stage2_subframes()); cfg.j];
    for c in 0..cfg.stage2_subframes() {
        let v_c = plan.v_s2.column(c);
        let mut y = bs_sensing_s2.clone();
        for k in 0..cfg.k {
            let effective = &ch.b[k] + &ch.b_casc[k] * v_c;
            y += effective * &plan.z_s2[k];
        }
        for e in y.iter_mut() {
            *e += sigma * cnormal(rng);
        }
        y_s2.push(y);
        for j in 0..cfg.j {
            let effective = ch.d[j].adjoint() + (v_c.adjoint() * ch.d_casc[j].adjoint());
            let mut r = effective * &plan.x_s2;
            for e in r.iter_mut() {
                *e += zeta * cnormal(rng);
            }
            r_s2[j].push(r);
        }
    }

    Ok(RxRecord {
        y_s1,
        y_s2,
        r_s1,
        r_s2,
        noise_var_bs,
        noise_var_ue,
    })
}
