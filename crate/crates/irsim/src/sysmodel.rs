//! System configuration and stochastic channel synthesis.
//!
//! The scene: a full-duplex ISAC base station (BS) with `M` transmit and `M`
//! receive antennas, a passive IRS with `L` reflecting elements, `K` uplink and
//! `J` downlink single-antenna users, and one sensing target. One channel
//! realization consists of
//!
//! - `A`   (M×M): BS → target → BS sensing channel, rank one;
//! - `b_k` (M):   uplink user k → BS;
//! - `g_k` (L):   uplink user k → IRS;
//! - `H`   (M×L): IRS → BS;
//! - `d_j` (M):   BS → downlink user j;
//! - `f_j` (L):   IRS → downlink user j;
//!
//! plus the cascaded reflected channels `B_k = H·diag(g_k)` and
//! `D_j = H·diag(f_j)` that are all a passive IRS lets a receiver identify.
//!
//! Communication channels are Rician: a deterministic steering-vector
//! line-of-sight component blended with i.i.d. complex Gaussian scatter, the
//! whole channel scaled by the square root of a distance power-law path gain.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{SimError, SimResult};

/// Propagation speed used to convert carrier frequency to wavelength (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Link distances in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distances {
    /// BS → target → BS round-trip reference distance.
    pub d_s: f64,
    /// IRS → BS.
    pub d_ib: f64,
    /// Uplink user → BS.
    pub d_ukb: f64,
    /// BS → downlink user.
    pub d_bdj: f64,
    /// Uplink user → IRS.
    pub d_uki: f64,
    /// IRS → downlink user.
    pub d_idj: f64,
}

/// Path-loss exponents per link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathlossExps {
    pub beta_s: f64,
    pub beta_ib: f64,
    pub beta_ukb: f64,
    pub beta_bdj: f64,
    pub beta_uki: f64,
    pub beta_idj: f64,
}

/// Rician K-factors per communication link (ratio of line-of-sight power to
/// scattered power; larger means more deterministic).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RicianFactors {
    pub k_ib: f64,
    pub k_ukb: f64,
    pub k_uki: f64,
    pub k_bdj: f64,
    pub k_idj: f64,
}

/// Full experiment configuration: array sizes, frame structure, radio
/// constants, geometry, and the master seed from which every random stream is
/// derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// BS antennas per array (transmit count = receive count).
    pub m: usize,
    /// IRS elements.
    pub l: usize,
    /// Uplink users.
    pub k: usize,
    /// Downlink users.
    pub j: usize,
    /// Sub-frames in stage 1 (IRS off).
    pub c_s1: usize,
    /// Index of the last stage-2 sub-frame; stage 2 spans `c_s1+1 ..= c_s2`.
    pub c_s2: usize,
    /// Time slots per stage-1 sub-frame.
    pub p_s1: usize,
    /// Time slots per stage-2 sub-frame.
    pub p_s2: usize,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Pilot symbol (time slot) duration in seconds.
    pub slot_duration: f64,
    /// Channel coherence time in seconds; the whole estimation frame must fit.
    pub coherence_time: f64,
    /// BS transmit power in watts.
    pub tx_power_bs: f64,
    /// Uplink user transmit power in watts.
    pub tx_power_ue: f64,
    /// Path gain at the reference distance (linear).
    pub ref_pathloss: f64,
    /// Reference distance in meters.
    pub ref_distance: f64,
    /// Target azimuth angle in radians.
    pub target_angle: f64,
    pub distances: Distances,
    pub pathloss_exps: PathlossExps,
    pub rician_factors: RicianFactors,
    /// Root of every random stream in the experiment.
    pub master_seed: u64,
}

/// Partial override applied on top of a profile; any field left out keeps the
/// profile value. Unknown keys are rejected so config typos fail loudly.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfigPatch {
    pub m: Option<usize>,
    pub l: Option<usize>,
    pub k: Option<usize>,
    pub j: Option<usize>,
    pub c_s1: Option<usize>,
    pub c_s2: Option<usize>,
    pub p_s1: Option<usize>,
    pub p_s2: Option<usize>,
    pub carrier_freq: Option<f64>,
    pub slot_duration: Option<f64>,
    pub coherence_time: Option<f64>,
    pub tx_power_bs: Option<f64>,
    pub tx_power_ue: Option<f64>,
    pub ref_pathloss: Option<f64>,
    pub ref_distance: Option<f64>,
    pub target_angle: Option<f64>,
    pub distances: Option<DistancesPatch>,
    pub pathloss_exps: Option<PathlossExpsPatch>,
    pub rician_factors: Option<RicianFactorsPatch>,
    pub master_seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistancesPatch {
    pub d_s: Option<f64>,
    pub d_ib: Option<f64>,
    pub d_ukb: Option<f64>,
    pub d_bdj: Option<f64>,
    pub d_uki: Option<f64>,
    pub d_idj: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossExpsPatch {
    pub beta_s: Option<f64>,
    pub beta_ib: Option<f64>,
    pub beta_ukb: Option<f64>,
    pub beta_bdj: Option<f64>,
    pub beta_uki: Option<f64>,
    pub beta_idj: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RicianFactorsPatch {
    pub k_ib: Option<f64>,
    pub k_ukb: Option<f64>,
    pub k_uki: Option<f64>,
    pub k_bdj: Option<f64>,
    pub k_idj: Option<f64>,
}

impl SystemConfig {
    /// Full-scale defaults: M=6 antennas, L=30 IRS elements, K=J=6 users,
    /// 3.5 GHz carrier, 0.52 µs slots, 20 dBm BS / 15 dBm UE transmit power,
    /// −30 dB reference path loss at 1 m.
    pub fn paper_default() -> Self {
        let (m, l, k, j) = (6, 30, 6, 6);
        SystemConfig {
            m,
            l,
            k,
            j,
            c_s1: 1,
            c_s2: 1 + l,
            p_s1: m + k,
            p_s2: m.max(k),
            carrier_freq: 3.5e9,
            slot_duration: 0.52e-6,
            coherence_time: 1e-3,
            tx_power_bs: 0.1,                   // 20 dBm
            tx_power_ue: 10f64.powf(1.5) / 1e3, // 15 dBm
            ref_pathloss: 1e-3,
            ref_distance: 1.0,
            target_angle: -PI,
            distances: Distances {
                d_s: 150.0,
                d_ib: 50.0,
                d_ukb: 50.0,
                d_bdj: 50.0,
                d_uki: 2.0,
                d_idj: 2.0,
            },
            pathloss_exps: PathlossExps {
                beta_s: 3.0,
                beta_ib: 2.3,
                beta_ukb: 3.5,
                beta_bdj: 3.5,
                beta_uki: 2.0,
                beta_idj: 2.0,
            },
            rician_factors: RicianFactors {
                k_ib: 10.0,
                k_ukb: 10.0,
                k_uki: 10.0,
                k_bdj: 10.0,
                k_idj: 10.0,
            },
            master_seed: 0,
        }
    }

    /// Reduced-scale defaults for fast runs: M=4, L=8, K=J=2; radio and
    /// geometry constants unchanged.
    pub fn desk_default() -> Self {
        let mut cfg = SystemConfig::paper_default();
        cfg.m = 4;
        cfg.l = 8;
        cfg.k = 2;
        cfg.j = 2;
        cfg.rederive_frame();
        cfg
    }

    /// Recompute the derived frame-structure fields from the current array
    /// sizes: `p_s1 = M+K`, `p_s2 = max(M,K)`, `c_s2 = c_s1 + L`.
    pub fn rederive_frame(&mut self) {
        self.p_s1 = self.m + self.k;
        self.p_s2 = self.m.max(self.k);
        self.c_s2 = self.c_s1 + self.l;
    }

    /// Apply a partial override, re-deriving `p_s1`, `p_s2`, and `c_s2` from
    /// the patched sizes unless the patch pins them explicitly, then validate.
    pub fn with_patch(mut self, patch: &SystemConfigPatch) -> SimResult<Self> {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = patch.$f { self.$f = v; } )* };
        }
        take!(
            m,
            l,
            k,
            j,
            c_s1,
            carrier_freq,
            slot_duration,
            coherence_time,
            tx_power_bs,
            tx_power_ue,
            ref_pathloss,
            ref_distance,
            target_angle,
            master_seed
        );
        if let Some(d) = &patch.distances {
            macro_rules! taked {
                ($($f:ident),*) => { $( if let Some(v) = d.$f { self.distances.$f = v; } )* };
            }
            taked!(d_s, d_ib, d_ukb, d_bdj, d_uki, d_idj);
        }
        if let Some(p) = &patch.pathloss_exps {
            macro_rules! takep {
                ($($f:ident),*) => { $( if let Some(v) = p.$f { self.pathloss_exps.$f = v; } )* };
            }
            takep!(beta_s, beta_ib, beta_ukb, beta_bdj, beta_uki, beta_idj);
        }
        if let Some(r) = &patch.rician_factors {
            macro_rules! taker {
                ($($f:ident),*) => { $( if let Some(v) = r.$f { self.rician_factors.$f = v; } )* };
            }
            taker!(k_ib, k_ukb, k_uki, k_bdj, k_idj);
        }
        self.rederive_frame();
        macro_rules! pin {
            ($($f:ident),*) => { $( if let Some(v) = patch.$f { self.$f = v; } )* };
        }
        pin!(p_s1, p_s2, c_s2);
        self.validate()?;
        Ok(self)
    }

    /// Check every construction-time invariant; returns a config error naming
    /// the first violation.
    pub fn validate(&self) -> SimResult<()> {
        let fail = |msg: String| Err(SimError::Config(msg));
        if self.m == 0 || self.l == 0 || self.k == 0 || self.j == 0 {
            return fail(format!(
                "array/user counts must be positive (m={}, l={}, k={}, j={})",
                self.m, self.l, self.k, self.j
            ));
        }
        if self.c_s1 == 0 {
            return fail("c_s1 must be at least 1".into());
        }
        if self.p_s1 < self.m + self.k {
            return fail(format!(
                "p_s1 = {} is below the minimum m + k = {}",
                self.p_s1,
                self.m + self.k
            ));
        }
        if self.p_s2 < self.m.max(self.k) {
            return fail(format!(
                "p_s2 = {} is below the minimum max(m, k) = {}",
                self.p_s2,
                self.m.max(self.k)
            ));
        }
        if self.c_s2 < self.c_s1 + self.l {
            return fail(format!(
                "stage 2 needs at least l = {} sub-frames (c_s2 = {}, c_s1 = {})",
                self.l, self.c_s2, self.c_s1
            ));
        }
        if self.estimation_time() >= self.coherence_time {
            return fail(format!(
                "estimation frame {:.3e} s does not fit the coherence time {:.3e} s",
                self.estimation_time(),
                self.coherence_time
            ));
        }
        let positives = [
            ("carrier_freq", self.carrier_freq),
            ("slot_duration", self.slot_duration),
            ("coherence_time", self.coherence_time),
            ("tx_power_bs", self.tx_power_bs),
            ("tx_power_ue", self.tx_power_ue),
            ("ref_pathloss", self.ref_pathloss),
            ("ref_distance", self.ref_distance),
            ("d_s", self.distances.d_s),
            ("d_ib", self.distances.d_ib),
            ("d_ukb", self.distances.d_ukb),
            ("d_bdj", self.distances.d_bdj),
            ("d_uki", self.distances.d_uki),
            ("d_idj", self.distances.d_idj),
            ("beta_s", self.pathloss_exps.beta_s),
            ("beta_ib", self.pathloss_exps.beta_ib),
            ("beta_ukb", self.pathloss_exps.beta_ukb),
            ("beta_bdj", self.pathloss_exps.beta_bdj),
            ("beta_uki", self.pathloss_exps.beta_uki),
            ("beta_idj", self.pathloss_exps.beta_idj),
        ];
        for (name, v) in positives {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be strictly positive and finite, got {v}"));
            }
        }
        if !self.target_angle.is_finite() {
            return fail(format!("target_angle must be finite, got {}", self.target_angle));
        }
        Ok(())
    }

    /// Signal wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// Antenna / IRS element spacing: half a wavelength for both arrays.
    pub fn element_spacing(&self) -> f64 {
        self.wavelength() / 2.0
    }

    /// Number of stage-2 sub-frames (`c_s1+1 ..= c_s2`).
    pub fn stage2_subframes(&self) -> usize {
        self.c_s2 - self.c_s1
    }

    /// Total duration of both estimation stages in seconds.
    pub fn estimation_time(&self) -> f64 {
        self.slot_duration
            * (self.c_s1 as f64 * self.p_s1 as f64
                + self.stage2_subframes() as f64 * self.p_s2 as f64)
    }

    // Per-link path gains (linear).
    pub fn xi_s(&self) -> f64 {
        path_loss(self.distances.d_s, self.pathloss_exps.beta_s, self).expect("validated config")
    }
    pub fn xi_ib(&self) -> f64 {
        path_loss(self.distances.d_ib, self.pathloss_exps.beta_ib, self).expect("validated config")
    }
    pub fn xi_ukb(&self) -> f64 {
        path_loss(self.distances.d_ukb, self.pathloss_exps.beta_ukb, self)
            .expect("validated config")
    }
    pub fn xi_bdj(&self) -> f64 {
        path_loss(self.distances.d_bdj, self.pathloss_exps.beta_bdj, self)
            .expect("validated config")
    }
    pub fn xi_uki(&self) -> f64 {
        path_loss(self.distances.d_uki, self.pathloss_exps.beta_uki, self)
            .expect("validated config")
    }
    pub fn xi_idj(&self) -> f64 {
        path_loss(self.distances.d_idj, self.pathloss_exps.beta_idj, self)
            .expect("validated config")
    }

    /// Azimuth angles of every link, derived from the geometry.
    pub fn link_angles(&self) -> LinkAngles {
        // Each two-hop angle comes from the half-baseline ratio d_IB/(2·d).
        // When the adjacent link is much shorter than the IRS–BS baseline the
        // ratio exceeds 1 (the default geometry has d_IB/(2·d_UkI) = 12.5);
        // clamp into the arcsin domain, which lands the user at endfire.
        let half_ratio = |d: f64| (self.distances.d_ib / (2.0 * d)).min(1.0);
        LinkAngles {
            theta_b: -FRAC_PI_2,
            theta_i: -FRAC_PI_2,
            theta_ukb: half_ratio(self.distances.d_ukb).asin() - PI,
            theta_uki: PI - half_ratio(self.distances.d_uki).asin(),
            theta_bdj: half_ratio(self.distances.d_bdj).asin(),
            theta_idj: -half_ratio(self.distances.d_idj).asin(),
        }
    }
}

/// Line-of-sight azimuths: `theta_b`/`theta_i` are the arrival/departure
/// angles of the IRS–BS link at the BS and IRS; the rest are user-link angles
/// at the array named by the second subscript.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkAngles {
    pub theta_b: f64,
    pub theta_i: f64,
    pub theta_ukb: f64,
    pub theta_uki: f64,
    pub theta_bdj: f64,
    pub theta_idj: f64,
}

/// One realization of every channel in the scene plus the cascaded products.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Sensing channel, M×M rank one.
    pub a: DMatrix<Complex64>,
    /// Uplink user → BS direct channels, K vectors of length M.
    pub b: Vec<DVector<Complex64>>,
    /// Uplink user → IRS channels, K vectors of length L.
    pub g: Vec<DVector<Complex64>>,
    /// IRS → BS channel, M×L.
    pub h: DMatrix<Complex64>,
    /// BS → downlink user direct channels, J vectors of length M.
    pub d: Vec<DVector<Complex64>>,
    /// IRS → downlink user channels, J vectors of length L.
    pub f: Vec<DVector<Complex64>>,
    /// Cascaded uplink reflected channels `B_k = H·diag(g_k)`, K matrices M×L.
    pub b_casc: Vec<DMatrix<Complex64>>,
    /// Cascaded downlink reflected channels `D_j = H·diag(f_j)`, J matrices M×L.
    pub d_casc: Vec<DMatrix<Complex64>>,
}

impl ChannelSet {
    /// All-zero channels with the shapes implied by `cfg`; useful for
    /// isolating single terms of the received-signal models in tests.
    pub fn zeros(cfg: &SystemConfig) -> Self {
        let (m, l) = (cfg.m, cfg.l);
        ChannelSet {
            a: DMatrix::zeros(m, m),
            b: vec![DVector::zeros(m); cfg.k],
            g: vec![DVector::zeros(l); cfg.k],
            h: DMatrix::zeros(m, l),
            d: vec![DVector::zeros(m); cfg.j],
            f: vec![DVector::zeros(l); cfg.j],
            b_casc: vec![DMatrix::zeros(m, l); cfg.k],
            d_casc: vec![DMatrix::zeros(m, l); cfg.j],
        }
    }

    /// Recompute `B_k` and `D_j` from the current `h`, `g`, `f` (after a
    /// caller has perturbed the constituent channels).
    pub fn refresh_cascades(&mut self) {
        self.b_casc = self.g.iter().map(|g| cascade(&self.h, g)).collect();
        self.d_casc = self.f.iter().map(|f| cascade(&self.h, f)).collect();
    }
}

/// `H·diag(v)`: column `l` of the result is column `l` of `H` scaled by `v[l]`.
fn cascade(h: &DMatrix<Complex64>, v: &DVector<Complex64>) -> DMatrix<Complex64> {
    let mut out = h.clone();
    for (l, mut col) in out.column_iter_mut().enumerate() {
        col *= v[l];
    }
    out
}

/// Uniform-linear-array phase response toward `angle`: element `m` (0-based)
/// is `exp(j·2π·spacing/wavelength·m·sin(angle))`, so element 0 is 1.
pub fn steering_vector(
    angle: f64,
    spacing: f64,
    wavelength: f64,
    n_elems: usize,
) -> SimResult<DVector<Complex64>> {
    if !angle.is_finite() {
        return Err(SimError::InvalidArgument(format!(
            "steering angle must be finite, got {angle}"
        )));
    }
    if n_elems == 0 || !(wavelength > 0.0) {
        return Err(SimError::InvalidArgument(format!(
            "need n_elems >= 1 and wavelength > 0 (n_elems={n_elems}, wavelength={wavelength})"
        )));
    }
    let step = TAU * spacing / wavelength * angle.sin();
    Ok(DVector::from_fn(n_elems, |m, _| {
        Complex64::from_polar(1.0, step * m as f64)
    }))
}

/// Distance power-law path gain `ref_pathloss·(distance/ref_distance)^(−exponent)`.
pub fn path_loss(distance: f64, exponent: f64, cfg: &SystemConfig) -> SimResult<f64> {
    if distance < cfg.ref_distance {
        return Err(SimError::InvalidArgument(format!(
            "distance {distance} m is below the reference distance {} m",
            cfg.ref_distance
        )));
    }
    Ok(cfg.ref_pathloss * (distance / cfg.ref_distance).powf(-exponent))
}

/// One standard circular complex Gaussian draw: `(x + jy)/√2` with `x`, `y`
/// standard normal, so the complex variance is 1.
pub(crate) fn cnormal(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / 2f64.sqrt()
}

/// A unit-modulus factor with phase uniform on `[0, 2π)`.
fn random_phase(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(1.0, TAU * rng.random::<f64>())
}

/// Draw the sensing channel `A = √ξ_S·α_S·a(ϑ_S)a(ϑ_S)ᵀ`: a rank-one
/// symmetric outer product with `|α_S| = 1` and uniformly random phase (the
/// round-trip path length is unknowable to sub-wavelength precision).
pub fn gen_sensing_channel(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    let alpha = random_phase(rng);
    let a = steering_vector(cfg.target_angle, cfg.element_spacing(), cfg.wavelength(), cfg.m)
        .expect("validated config angle");
    let scale = alpha * cfg.xi_s().sqrt();
    // Plain transpose, not conjugate: the round trip sees the same array
    // response on departure and arrival, making A symmetric.
    let mut out = &a * a.transpose();
    out *= scale;
    out
}

/// Blend a deterministic line-of-sight component with i.i.d. unit-variance
/// complex Gaussian scatter at the given Rician factor, then apply the
/// amplitude path gain:
/// `√path_gain·(√(k/(k+1))·los + √(1/(k+1))·nlos)`.
///
/// NLoS entries are drawn in column-major order.
pub fn gen_rician_channel(
    los: &DMatrix<Complex64>,
    rician_k: f64,
    path_gain: f64,
    rng: &mut ChaCha8Rng,
) -> DMatrix<Complex64> {
    let w_los = (rician_k / (rician_k + 1.0)).sqrt();
    let w_nlos = (1.0 / (rician_k + 1.0)).sqrt();
    let amp = path_gain.sqrt();
    let (rows, cols) = los.shape();
    let mut out = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            out[(r, c)] = amp * (w_los * los[(r, c)] + w_nlos * cnormal(rng));
        }
    }
    out
}

/// Vector convenience wrapper over [`gen_rician_channel`].
pub fn gen_rician_vector(
    los: &DVector<Complex64>,
    rician_k: f64,
    path_gain: f64,
    rng: &mut ChaCha8Rng,
) -> DVector<Complex64> {
    let mat = gen_rician_channel(&DMatrix::from_column_slice(los.len(), 1, los.as_slice()),
        rician_k, path_gain, rng);
    DVector::from_column_slice(mat.as_slice())
}

/// Draw one full channel realization.
///
/// Each communication channel's line-of-sight component is rotated by an
/// independent uniform phase before blending: absolute carrier phase is not
/// predictable at these scales, and the rotation is also what statistically
/// distinguishes users that share the same geometry.
///
/// Draw order (fixed; tests rely on reproducibility, not on this exact order,
/// but it must never change silently): sensing phase, then H (phase, NLoS),
/// then per uplink user `b_k` and `g_k`, then per downlink user `d_j` and
/// `f_j` — each channel drawing its phase first and its column-major NLoS
/// entries second.
pub fn gen_channel_set(cfg: &SystemConfig, rng: &mut ChaCha8Rng) -> ChannelSet {
    let angles = cfg.link_angles();
    let lam = cfg.wavelength();
    let sp = cfg.element_spacing();
    let sv = |angle: f64, n: usize| {
        steering_vector(angle, sp, lam, n).expect("validated config angle")
    };

    let a = gen_sensing_channel(cfg, rng);

    // IRS→BS: M×L with line-of-sight a(ϑ_B)·a(ϑ_I)ᴴ.
    let h = {
        let at_bs = sv(angles.theta_b, cfg.m);
        let at_irs = sv(angles.theta_i, cfg.l);
        let mut los = &at_bs * at_irs.adjoint();
        los *= random_phase(rng);
        gen_rician_channel(&los, cfg.rician_factors.k_ib, cfg.xi_ib(), rng)
    };

    let mut b = Vec::with_capacity(cfg.k);
    let mut g = Vec::with_capacity(cfg.k);
    for _ in 0..cfg.k {
        let mut los_b = sv(angles.theta_ukb, cfg.m);
        los_b *= random_phase(rng);
        b.push(gen_rician_vector(&los_b, cfg.rician_factors.k_ukb, cfg.xi_ukb(), rng));
        let mut los_g = sv(angles.theta_uki, cfg.l);
        los_g *= random_phase(rng);
        g.push(gen_rician_vector(&los_g, cfg.rician_factors.k_uki, cfg.xi_uki(), rng));
    }

    let mut d = Vec::with_capacity(cfg.j);
    let mut f = Vec::with_capacity(cfg.j);
    for _ in 0..cfg.j {
        let mut los_d = sv(angles.theta_bdj, cfg.m);
        los_d *= random_phase(rng);
        d.push(gen_rician_vector(&los_d, cfg.rician_factors.k_bdj, cfg.xi_bdj(), rng));
        let mut los_f = sv(angles.theta_idj, cfg.l);
        los_f *= random_phase(rng);
        f.push(gen_rician_vector(&los_f, cfg.rician_factors.k_idj, cfg.xi_idj(), rng));
    }

    let b_casc = g.iter().map(|gk| cascade(&h, gk)).collect();
    let d_casc = f.iter().map(|fj| cascade(&h, fj)).collect();
    ChannelSet { a, b, g, h, d, f, b_casc, d_casc }
}
