//! Model input/target construction, data augmentation, and dataset assembly.
//!
//! Every learned estimator consumes a flat real vector built from complex
//! blocks by stacking all real parts before all imaginary parts. Four input
//! families exist per receiver: stage 1 or stage 2, each fed either the raw
//! received signals (type 1) or the least-squares estimates (type 2). Targets
//! are always the true channels of the pairing realization, so augmented
//! copies teach the model to undo both perturbation and receiver noise.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::airlink::{noise_var_for_snr, transmit, Receiver, RxRecord, Stage};
use crate::error::{SimError, SimResult};
use crate::lsbase::{ls_full_chain, ls_stage1_bs, ls_stage1_ue, ChannelEstimates};
use crate::pilotplan::PilotPlan;
use crate::rng::{stream, Purpose};
use crate::sysmodel::{cnormal, gen_channel_set, ChannelSet, SystemConfig};

/// What a model input is built from: the raw received sub-frames (type 1) or
/// the least-squares channel estimates (type 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InputType {
    Raw,
    Estimates,
}

/// One input/output family: which stage it serves, what it is built from, and
/// which receiver consumes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Family {
    pub stage: Stage,
    pub input_type: InputType,
    pub receiver: Receiver,
}

impl Family {
    pub fn new(stage: Stage, input_type: InputType, receiver: Receiver) -> Self {
        Self { stage, input_type, receiver }
    }

    /// All eight families in canonical order: stage 1 before stage 2, BS
    /// before downlink, raw before estimate inputs.
    pub fn all() -> [Family; 8] {
        let mut out = [Family::new(Stage::One, InputType::Raw, Receiver::Bs); 8];
        let mut i = 0;
        for stage in [Stage::One, Stage::Two] {
            for receiver in [Receiver::Bs, Receiver::Downlink] {
                for input_type in [InputType::Raw, InputType::Estimates] {
                    out[i] = Family::new(stage, input_type, receiver);
                    i += 1;
                }
            }
        }
        out
    }

    /// Compact label used in file names and CSV rows, e.g. `s1_bs_type2`.
    pub fn label(&self) -> String {
        let stage = match self.stage {
            Stage::One => "s1",
            Stage::Two => "s2",
        };
        let rx = match self.receiver {
            Receiver::Bs => "bs",
            Receiver::Downlink => "dl",
        };
        let ty = match self.input_type {
            InputType::Raw => "type1",
            InputType::Estimates => "type2",
        };
        format!("{stage}_{rx}_{ty}")
    }
}

/// Flatten complex blocks (each already laid out in its storage order, which
/// for matrices is column-major) into one real vector: all real parts in block
/// order, then all imaginary parts in the same order.
pub fn realify(blocks: &[&[Complex64]]) -> DVector<f64> {
    let n: usize = blocks.iter().map(|b| b.len()).sum();
    let mut out = DVector::zeros(2 * n);
    let mut i = 0;
    for block in blocks {
        for e in *block {
            out[i] = e.re;
            out[n + i] = e.im;
            i += 1;
        }
    }
    out
}

/// Reassemble complex entries from a real vector laid out as
/// `[all real parts, all imaginary parts]`.
pub fn complexify(reals: &[f64]) -> SimResult<Vec<Complex64>> {
    if reals.len() % 2 != 0 {
        return Err(SimError::InvalidArgument(format!(
            "complexify needs an even-length vector, got {}",
            reals.len()
        )));
    }
    let n = reals.len() / 2;
    Ok((0..n).map(|i| Complex64::new(reals[i], reals[n + i])).collect())
}

/// Input vector length of a family under a given configuration.
pub fn input_len(family: Family, cfg: &SystemConfig) -> usize {
    let dc = cfg.stage2_subframes();
    match (family.stage, family.input_type, family.receiver) {
        (Stage::One, InputType::Raw, Receiver::Bs) => 2 * cfg.m * cfg.p_s1 * cfg.c_s1,
        (Stage::One, InputType::Raw, Receiver::Downlink) => 2 * cfg.p_s1 * cfg.c_s1,
        (Stage::One, InputType::Estimates, Receiver::Bs) => 2 * cfg.m * (cfg.m + cfg.k),
        (Stage::One, InputType::Estimates, Receiver::Downlink) => 2 * cfg.m,
        (Stage::Two, InputType::Raw, Receiver::Bs) => {
            2 * cfg.m * (cfg.p_s2 * dc + cfg.m + cfg.k)
        }
        (Stage::Two, InputType::Raw, Receiver::Downlink) => 2 * (cfg.p_s2 * dc + cfg.m),
        (Stage::Two, InputType::Estimates, Receiver::Bs) => 2 * cfg.m * cfg.l * cfg.k,
        (Stage::Two, InputType::Estimates, Receiver::Downlink) => 2 * cfg.m * cfg.l,
    }
}

/// Target vector length of a family under a given configuration. Both input
/// types of a (stage, receiver) pair share one target layout.
pub fn target_len(family: Family, cfg: &SystemConfig) -> usize {
    match (family.stage, family.receiver) {
        (Stage::One, Receiver::Bs) => 2 * cfg.m * (cfg.m + cfg.k),
        (Stage::One, Receiver::Downlink) => 2 * cfg.m,
        (Stage::Two, Receiver::Bs) => 2 * cfg.m * cfg.l * cfg.k,
        (Stage::Two, Receiver::Downlink) => 2 * cfg.m * cfg.l,
    }
}

/// Build one model input vector.
///
/// `est` carries the direct-channel and cascade estimates required by
/// estimate-based inputs and by stage-2 raw inputs (which append the
/// stage-1 estimates to the received signals). Any estimator may fill it —
/// the least-squares chain during dataset generation, or a stage-1 model's
/// own predictions at evaluation time. `j` selects the downlink user and is
/// ignored for BS families.
pub fn build_input(
    family: Family,
    rx: &RxRecord,
    est: Option<&ChannelEstimates>,
    j: usize,
) -> SimResult<DVector<f64>> {
    let need_est = || {
        est.ok_or_else(|| {
            SimError::InvalidArgument(format!(
                "family {} requires channel estimates but none were supplied",
                family.label()
            ))
        })
    };
    let mut blocks: Vec<&[Complex64]> = Vec::new();
    match (family.stage, family.input_type, family.receiver) {
        (Stage::One, InputType::Raw, Receiver::Bs) => {
            for y in &rx.y_s1 {
                blocks.push(y.as_slice());
            }
        }
        (Stage::One, InputType::Raw, Receiver::Downlink) => {
            for r in &rx.r_s1[j] {
                blocks.push(r.as_slice());
            }
        }
        (Stage::One, InputType::Estimates, Receiver::Bs) => {
            let e = need_est()?;
            blocks.push(e.a_bar.as_slice());
            for b in &e.b_bar {
                blocks.push(b.as_slice());
            }
        }
        (Stage::One, InputType::Estimates, Receiver::Downlink) => {
            blocks.push(need_est()?.d_bar[j].as_slice());
        }
        (Stage::Two, InputType::Raw, Receiver::Bs) => {
            let e = need_est()?;
            for y in &rx.y_s2 {
                blocks.push(y.as_slice());
            }
            blocks.push(e.a_bar.as_slice());
            for b in &e.b_bar {
                blocks.push(b.as_slice());
            }
        }
        (Stage::Two, InputType::Raw, Receiver::Downlink) => {
            let e = need_est()?;
            for r in &rx.r_s2[j] {
                blocks.push(r.as_slice());
            }
            blocks.push(e.d_bar[j].as_slice());
        }
        (Stage::Two, InputType::Estimates, Receiver::Bs) => {
            let e = need_est()?;
            for bc in &e.b_casc_bar {
                blocks.push(bc.as_slice());
            }
        }
        (Stage::Two, InputType::Estimates, Receiver::Downlink) => {
            blocks.push(need_est()?.d_casc_bar[j].as_slice());
        }
    }
    Ok(realify(&blocks))
}

/// Build the target vector of a family: the true channels of `ch` in the
/// family's block order. `j` selects the downlink user for downlink families.
pub fn build_target(family: Family, ch: &ChannelSet, j: usize) -> DVector<f64> {
    let mut blocks: Vec<&[Complex64]> = Vec::new();
    match (family.stage, family.receiver) {
        (Stage::One, Receiver::Bs) => {
            blocks.push(ch.a.as_slice());
            for b in &ch.b {
                blocks.push(b.as_slice());
            }
        }
        (Stage::One, Receiver::Downlink) => blocks.push(ch.d[j].as_slice()),
        (Stage::Two, Receiver::Bs) => {
            for bc in &ch.b_casc {
                blocks.push(bc.as_slice());
            }
        }
        (Stage::Two, Receiver::Downlink) => blocks.push(ch.d_casc[j].as_slice()),
    }
    realify(&blocks)
}

/// Add independent circular complex Gaussian perturbations to every primitive
/// channel block and rebuild the cascades from the perturbed pieces.
///
/// The per-entry perturbation variance of a block X is
/// `P_ch / 10^(aug_snr_db/10)` with `P_ch = ‖X‖_F² / #entries(X)` computed on
/// that block of that realization, so the perturbation level tracks each
/// sample's own scale. Draws happen block by block in the fixed order
/// A, H, then (b_k, g_k) per uplink user, then (d_j, f_j) per downlink user,
/// column-major within a block, with one draw per entry regardless of scale.
pub fn augment(ch: &ChannelSet, aug_snr_db: f64, rng: &mut ChaCha8Rng) -> ChannelSet {
    assert!(aug_snr_db.is_finite(), "augmentation SNR must be finite");
    let snr_lin = 10f64.powf(aug_snr_db / 10.0);
    let mut perturb = |entries: &mut [Complex64]| {
        let n = entries.len() as f64;
        let p_ch = entries.iter().map(|e| e.norm_sqr()).sum::<f64>() / n;
        let sigma = (p_ch / snr_lin).sqrt();
        for e in entries.iter_mut() {
            *e += cnormal(rng) * sigma;
        }
    };
    let mut out = ch.clone();
    perturb(out.a.as_mut_slice());
    perturb(out.h.as_mut_slice());
    for k in 0..out.b.len() {
        perturb(out.b[k].as_mut_slice());
        perturb(out.g[k].as_mut_slice());
    }
    for j in 0..out.d.len() {
        perturb(out.d[j].as_mut_slice());
        perturb(out.f[j].as_mut_slice());
    }
    out.refresh_cascades();
    out
}

/// One training or testing example: a flat real input, its flat real target,
/// and where in the generation grid it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: DVector<f64>,
    pub target: DVector<f64>,
    pub snr_db: f64,
    /// Zero-based channel-realization index within its SNR point.
    pub realization_index: usize,
    /// Zero-based copy index; copy 0 is the unaugmented realization.
    pub copy_index: usize,
}

/// A generated dataset for one family, in canonical (snr, realization, copy)
/// order so the contents are independent of worker scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub family: Family,
    pub samples: Vec<Sample>,
    pub v_count: usize,
    pub q_count: usize,
    pub snr_grid_db: Vec<f64>,
    pub aug_snr_db: f64,
    pub input_len: usize,
    pub target_len: usize,
    pub master_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct DatasetHeader {
    family: Family,
    input_len: usize,
    target_len: usize,
    sample_count: usize,
    v_count: usize,
    q_count: usize,
    snr_grid_db: Vec<f64>,
    aug_snr_db: f64,
    master_seed: u64,
}

impl Dataset {
    /// Stack all samples into an inputs matrix and a targets matrix, one row
    /// per sample in canonical order.
    pub fn stacked(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.samples.len();
        let inputs = DMatrix::from_fn(n, self.input_len, |r, c| self.samples[r].input[c]);
        let targets = DMatrix::from_fn(n, self.target_len, |r, c| self.samples[r].target[c]);
        (inputs, targets)
    }

    /// Write the dataset to a flat binary file: a little-endian `u64` header
    /// length, a JSON header, then each sample's input and target as
    /// little-endian 64-bit floats.
    pub fn save(&self, path: &Path) -> SimResult<()> {
        if !self.snr_grid_db.iter().all(|s| s.is_finite()) || !self.aug_snr_db.is_finite() {
            return Err(SimError::Config(
                "cannot serialize a dataset with non-finite SNR values".into(),
            ));
        }
        let header = serde_json::to_vec(&DatasetHeader {
            family: self.family,
            input_len: self.input_len,
            target_len: self.target_len,
            sample_count: self.samples.len(),
            v_count: self.v_count,
            q_count: self.q_count,
            snr_grid_db: self.snr_grid_db.clone(),
            aug_snr_db: self.aug_snr_db,
            master_seed: self.master_seed,
        })?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for s in &self.samples {
            for x in s.input.iter().chain(s.target.iter()) {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Read a dataset written by [`Dataset::save`], restoring per-sample
    /// metadata from the canonical ordering.
    pub fn load(path: &Path) -> SimResult<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut len_bytes = [0u8; 8];
        r.read_exact(&mut len_bytes)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)?;
        let h: DatasetHeader = serde_json::from_slice(&header_bytes)?;
        if h.sample_count != h.v_count * h.q_count * h.snr_grid_db.len() {
            return Err(SimError::Config(format!(
                "dataset header inconsistent: {} samples for {} SNR points × {} realizations × {} copies",
                h.sample_count, h.snr_grid_db.len(), h.v_count, h.q_count
            )));
        }
        let mut samples = Vec::with_capacity(h.sample_count);
        let mut buf = vec![0u8; 8 * (h.input_len + h.target_len)];
        for i in 0..h.sample_count {
            r.read_exact(&mut buf)?;
            let vals: Vec<f64> = buf
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let q_idx = i % h.q_count;
            let v_idx = (i / h.q_count) % h.v_count;
            let snr_idx = i / (h.q_count * h.v_count);
            samples.push(Sample {
                input: DVector::from_row_slice(&vals[..h.input_len]),
                target: DVector::from_row_slice(&vals[h.input_len..]),
                snr_db: h.snr_grid_db[snr_idx],
                realization_index: v_idx,
                copy_index: q_idx,
            });
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(SimError::Config("dataset file has trailing bytes".into()));
        }
        Ok(Dataset {
            family: h.family,
            samples,
            v_count: h.v_count,
            q_count: h.q_count,
            snr_grid_db: h.snr_grid_db,
            aug_snr_db: h.aug_snr_db,
            input_len: h.input_len,
            target_len: h.target_len,
            master_seed: h.master_seed,
        })
    }
}

/// Which estimates a family's inputs require from the least-squares chain.
enum EstimateNeed {
    None,
    Stage1,
    Full,
}

/// Generate a dataset for one family.
///
/// For every grid SNR and realization index, a fresh channel set is drawn;
/// copy 0 transmits it directly and each further copy transmits an augmented
/// version with fresh receiver noise. Targets always come from the original
/// channel set, so every copy of a realization shares one target. Estimate
/// inputs chain on the least-squares path, the only estimator that exists
/// before any model is trained. Receiver noise is set from the stage-2 link
/// budgets of both receivers at the sample's grid SNR. Work items are
/// independent per (snr, realization) with their own derived random streams,
/// so the result does not depend on thread scheduling.
#[allow(clippy::too_many_arguments)]
pub fn build_dataset(
    cfg: &SystemConfig,
    plan: &PilotPlan,
    family: Family,
    snr_grid_db: &[f64],
    v_count: usize,
    q_count: usize,
    aug_snr_db: f64,
    master_seed: u64,
) -> SimResult<Dataset> {
    if snr_grid_db.is_empty() || v_count == 0 || q_count == 0 {
        return Err(SimError::Config(
            "dataset generation needs a nonempty SNR grid and positive counts".into(),
        ));
    }
    let need = match (family.stage, family.input_type) {
        (Stage::One, InputType::Raw) => EstimateNeed::None,
        (Stage::One, InputType::Estimates) | (Stage::Two, InputType::Raw) => EstimateNeed::Stage1,
        (Stage::Two, InputType::Estimates) => EstimateNeed::Full,
    };
    let items: Vec<(usize, usize)> = (0..snr_grid_db.len())
        .flat_map(|s| (0..v_count).map(move |v| (s, v)))
        .collect();
    let per_item: Vec<Vec<Sample>> = items
        .par_iter()
        .map(|&(snr_idx, v)| {
            let snr_db = snr_grid_db[snr_idx];
            let idx = (snr_idx * v_count + v) as u64;
            let mut ch_rng = stream(master_seed, Purpose::ChannelTrain, idx);
            let mut aug_rng = stream(master_seed, Purpose::AugmentTrain, idx);
            let mut noise_rng = stream(master_seed, Purpose::NoiseTrain, idx);
            let nv_bs = noise_var_for_snr(cfg, Stage::Two, Receiver::Bs, snr_db);
            let nv_ue = noise_var_for_snr(cfg, Stage::Two, Receiver::Downlink, snr_db);
            let ch = gen_channel_set(cfg, &mut ch_rng);
            let target = build_target(family, &ch, 0);
            let mut out = Vec::with_capacity(q_count);
            for q in 0..q_count {
                let rx = if q == 0 {
                    transmit(cfg, plan, &ch, nv_bs, nv_ue, &mut noise_rng)?
                } else {
                    let ch_aug = augment(&ch, aug_snr_db, &mut aug_rng);
                    transmit(cfg, plan, &ch_aug, nv_bs, nv_ue, &mut noise_rng)?
                };
                let est = match need {
                    EstimateNeed::None => None,
                    EstimateNeed::Stage1 => {
                        let (a_bar, b_bar) = ls_stage1_bs(&rx, plan);
                        let d_bar = (0..cfg.j).map(|j| ls_stage1_ue(&rx, plan, j)).collect();
                        Some(ChannelEstimates {
                            a_bar,
                            b_bar,
                            d_bar,
                            b_casc_bar: Vec::new(),
                            d_casc_bar: Vec::new(),
                        })
                    }
                    EstimateNeed::Full => Some(ls_full_chain(&rx, plan)?),
                };
                out.push(Sample {
                    input: build_input(family, &rx, est.as_ref(), 0)?,
                    target: target.clone(),
                    snr_db,
                    realization_index: v,
                    copy_index: q,
                });
            }
            Ok(out)
        })
        .collect::<SimResult<Vec<_>>>()?;
    let samples: Vec<Sample> = per_item.into_iter().flatten().collect();
    debug_assert!(samples
        .iter()
        .all(|s| s.input.len() == input_len(family, cfg)
            && s.target.len() == target_len(family, cfg)));
    Ok(Dataset {
        family,
        samples,
        v_count,
        q_count,
        snr_grid_db: snr_grid_db.to_vec(),
        aug_snr_db,
        input_len: input_len(family, cfg),
        target_len: target_len(family, cfg),
        master_seed,
    })
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::pilotplan::build_pilot_plan;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn all_cfgs() -> Vec<SystemConfig> {
        let mut cfgs = vec![SystemConfig::desk_default(), SystemConfig::paper_default()];
        for (m, k, l) in [(2usize, 1usize, 4usize), (3, 2, 5), (5, 6, 7)] {
            let patch = serde_json::from_str(&format!(
                r#"{{"m": {m}, "k": {k}, "j": 2, "l": {l}}}"#
            ))
            .unwrap();
            cfgs.push(SystemConfig::desk_default().with_patch(&patch).unwrap());
        }
        cfgs
    }

    #[test]
    fn realify_scalar_splits_parts() {
        let v = realify(&[&[Complex64::new(3.0, 4.0)]]);
        assert_eq!(v.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn realify_matrix_is_column_major_then_parts() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 0.0),
            ],
        );
        let v = realify(&[m.as_slice()]);
        assert_eq!(v.as_slice(), &[1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn complexify_inverts_realify() {
        let entries = vec![
            Complex64::new(1.5, -2.0),
            Complex64::new(0.0, 3.25),
            Complex64::new(-4.0, 0.5),
        ];
        let round = complexify(realify(&[&entries]).as_slice()).unwrap();
        assert_eq!(round, entries);
    }

    #[test]
    fn complexify_rejects_odd_length() {
        assert!(matches!(
            complexify(&[1.0, 2.0, 3.0]),
            Err(SimError::InvalidArgument(_))
        ));
    }

    proptest! {
        #[test]
        fn realify_complexify_round_trip(res in proptest::collection::vec(-1e6f64..1e6, 1..40),
                                          ims in proptest::collection::vec(-1e6f64..1e6, 1..40)) {
            let n = res.len().min(ims.len());
            let entries: Vec<Complex64> =
                (0..n).map(|i| Complex64::new(res[i], ims[i])).collect();
            let round = complexify(realify(&[&entries]).as_slice()).unwrap();
            prop_assert_eq!(round, entries);
        }
    }

    #[test]
    fn lengths_match_closed_forms_on_paper_scale() {
        let cfg = SystemConfig::paper_default();
        let f = |s, t, r| Family::new(s, t, r);
        assert_eq!(input_len(f(Stage::One, InputType::Raw, Receiver::Bs), &cfg), 144);
        assert_eq!(input_len(f(Stage::One, InputType::Estimates, Receiver::Bs), &cfg), 144);
        assert_eq!(input_len(f(Stage::Two, InputType::Estimates, Receiver::Bs), &cfg), 2160);
        assert_eq!(input_len(f(Stage::One, InputType::Raw, Receiver::Downlink), &cfg), 24);
        assert_eq!(input_len(f(Stage::One, InputType::Estimates, Receiver::Downlink), &cfg), 12);
        assert_eq!(
            input_len(f(Stage::Two, InputType::Raw, Receiver::Bs), &cfg),
            2 * 6 * (6 * 30 + 6 + 6)
        );
        assert_eq!(
            input_len(f(Stage::Two, InputType::Raw, Receiver::Downlink), &cfg),
            2 * (6 * 30 + 6)
        );
        assert_eq!(input_len(f(Stage::Two, InputType::Estimates, Receiver::Downlink), &cfg), 360);
        assert_eq!(target_len(f(Stage::One, InputType::Raw, Receiver::Bs), &cfg), 144);
        assert_eq!(target_len(f(Stage::Two, InputType::Raw, Receiver::Bs), &cfg), 2160);
        assert_eq!(target_len(f(Stage::One, InputType::Raw, Receiver::Downlink), &cfg), 12);
        assert_eq!(target_len(f(Stage::Two, InputType::Raw, Receiver::Downlink), &cfg), 360);
    }

    #[test]
    fn built_vectors_have_declared_lengths_everywhere() {
        for cfg in all_cfgs() {
            let plan = build_pilot_plan(&cfg).unwrap();
            let ch = gen_channel_set(&cfg, &mut stream(11, Purpose::ChannelTrain, 0));
            let rx = transmit(&cfg, &plan, &ch, 1e-9, 1e-9,
                &mut stream(11, Purpose::NoiseTrain, 0)).unwrap();
            let est = ls_full_chain(&rx, &plan).unwrap();
            for family in Family::all() {
                let input = build_input(family, &rx, Some(&est), 0).unwrap();
                assert_eq!(input.len(), input_len(family, &cfg), "family {}", family.label());
                let target = build_target(family, &ch, 0);
                assert_eq!(target.len(), target_len(family, &cfg), "family {}", family.label());
            }
        }
    }

    #[test]
    fn target_round_trips_the_true_channels_bit_exactly() {
        let cfg = SystemConfig::desk_default();
        let ch = gen_channel_set(&cfg, &mut stream(12, Purpose::ChannelTrain, 0));
        let t = build_target(Family::new(Stage::One, InputType::Raw, Receiver::Bs), &ch, 0);
        let entries = complexify(t.as_slice()).unwrap();
        let m2 = cfg.m * cfg.m;
        assert_eq!(&entries[..m2], ch.a.as_slice());
        for k in 0..cfg.k {
            let off = m2 + k * cfg.m;
            assert_eq!(&entries[off..off + cfg.m], ch.b[k].as_slice());
        }
        let t2 = build_target(Family::new(Stage::Two, InputType::Raw, Receiver::Downlink), &ch, 1);
        assert_eq!(complexify(t2.as_slice()).unwrap(), ch.d_casc[1].as_slice());
    }

    #[test]
    fn stage2_raw_input_embeds_stage1_estimates() {
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let ch = gen_channel_set(&cfg, &mut stream(13, Purpose::ChannelTrain, 0));
        let rx = transmit(&cfg, &plan, &ch, 0.0, 0.0, &mut stream(13, Purpose::NoiseTrain, 0))
            .unwrap();
        let est = ls_full_chain(&rx, &plan).unwrap();
        let family = Family::new(Stage::Two, InputType::Raw, Receiver::Bs);
        let input = build_input(family, &rx, Some(&est), 0).unwrap();
        let entries = complexify(input.as_slice()).unwrap();
        let raw_len = cfg.m * cfg.p_s2 * cfg.stage2_subframes();
        // With noiseless stage-1, the appended estimate block is the true
        // sensing channel up to solver tolerance.
        let a_block = &entries[raw_len..raw_len + cfg.m * cfg.m];
        for (got, want) in a_block.iter().zip(ch.a.as_slice()) {
            assert!((got - want).norm() < 1e-9);
        }
    }

    #[test]
    fn missing_estimates_are_rejected() {
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let ch = gen_channel_set(&cfg, &mut stream(14, Purpose::ChannelTrain, 0));
        let rx = transmit(&cfg, &plan, &ch, 0.0, 0.0, &mut stream(14, Purpose::NoiseTrain, 0))
            .unwrap();
        let family = Family::new(Stage::One, InputType::Estimates, Receiver::Bs);
        assert!(matches!(
            build_input(family, &rx, None, 0),
            Err(SimError::InvalidArgument(_))
        ));
    }

    #[test]
    fn augment_at_huge_snr_is_a_no_op() {
        let cfg = SystemConfig::desk_default();
        let ch = gen_channel_set(&cfg, &mut stream(15, Purpose::ChannelTrain, 0));
        let aug = augment(&ch, 120.0, &mut stream(15, Purpose::AugmentTrain, 0));
        assert!((&aug.h - &ch.h).norm() / ch.h.norm() < 1e-5);
        assert!((&aug.a - &ch.a).norm() / ch.a.norm() < 1e-5);
        assert!((&aug.b_casc[0] - &ch.b_casc[0]).norm() / ch.b_casc[0].norm() < 1e-4);
    }

    #[test]
    fn augment_perturbation_energy_tracks_the_requested_level() {
        let cfg = SystemConfig::desk_default();
        let ch = gen_channel_set(&cfg, &mut stream(16, Purpose::ChannelTrain, 0));
        for (snr_db, want) in [(0.0, 1.0), (30.0, 1e-3)] {
            let trials = 10_000;
            let mut ratio_h = 0.0;
            let mut ratio_b = 0.0;
            let mut rng = stream(17, Purpose::AugmentTrain, snr_db as u64);
            for _ in 0..trials {
                let aug = augment(&ch, snr_db, &mut rng);
                ratio_h += (&aug.h - &ch.h).norm_squared() / ch.h.norm_squared();
                ratio_b += (&aug.b[0] - &ch.b[0]).norm_squared() / ch.b[0].norm_squared();
            }
            assert_relative_eq!(ratio_h / trials as f64, want, max_relative = 0.05);
            assert_relative_eq!(ratio_b / trials as f64, want, max_relative = 0.05);
        }
    }

    #[test]
    fn augment_rebuilds_cascades_from_perturbed_pieces() {
        let cfg = SystemConfig::desk_default();
        let ch = gen_channel_set(&cfg, &mut stream(18, Purpose::ChannelTrain, 0));
        let aug = augment(&ch, 10.0, &mut stream(18, Purpose::AugmentTrain, 0));
        for k in 0..cfg.k {
            let want = &aug.h * DMatrix::from_diagonal(&aug.g[k]);
            assert!((&aug.b_casc[k] - want).norm() < 1e-12);
        }
        for j in 0..cfg.j {
            let want = &aug.h * DMatrix::from_diagonal(&aug.f[j]);
            assert!((&aug.d_casc[j] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn dataset_counts_and_target_sharing() {
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let family = Family::new(Stage::One, InputType::Estimates, Receiver::Bs);
        let ds = build_dataset(&cfg, &plan, family, &[15.0, 20.0], 3, 2, 30.0, 5).unwrap();
        assert_eq!(ds.samples.len(), 12);
        for chunk in ds.samples.chunks(2) {
            assert_eq!(chunk[0].target, chunk[1].target);
            assert_ne!(chunk[0].input, chunk[1].input);
            assert_eq!(chunk[0].copy_index, 0);
            assert_eq!(chunk[1].copy_index, 1);
        }
        // Canonical ordering: SNR-major, then realization, then copy.
        assert_eq!(ds.samples[0].snr_db, 15.0);
        assert_eq!(ds.samples[6].snr_db, 20.0);
        assert_eq!(ds.samples[4].realization_index, 2);
    }

    #[test]
    fn dataset_generation_is_deterministic() {
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let family = Family::new(Stage::Two, InputType::Estimates, Receiver::Downlink);
        let a = build_dataset(&cfg, &plan, family, &[10.0], 4, 3, 30.0, 9).unwrap();
        let b = build_dataset(&cfg, &plan, family, &[10.0], 4, 3, 30.0, 9).unwrap();
        assert_eq!(a, b);
        let c = build_dataset(&cfg, &plan, family, &[10.0], 4, 3, 30.0, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_estimate_dataset_matches_targets() {
        // At infinite SNR the least-squares inputs equal the true channels,
        // so estimate-type samples carry their own target as input.
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let family = Family::new(Stage::Two, InputType::Estimates, Receiver::Bs);
        let ds = build_dataset(&cfg, &plan, family, &[f64::INFINITY], 3, 1, 30.0, 6).unwrap();
        for s in &ds.samples {
            assert!((&s.input - &s.target).norm() < 1e-6 * s.target.norm());
        }
    }

    #[test]
    fn dataset_file_round_trip_is_bit_exact() {
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let family = Family::new(Stage::One, InputType::Raw, Receiver::Downlink);
        let ds = build_dataset(&cfg, &plan, family, &[0.0, 5.0], 2, 2, 30.0, 7).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn stacked_matrices_mirror_sample_rows() {
        let cfg = SystemConfig::desk_default();
        let plan = build_pilot_plan(&cfg).unwrap();
        let family = Family::new(Stage::One, InputType::Estimates, Receiver::Downlink);
        let ds = build_dataset(&cfg, &plan, family, &[12.0], 3, 2, 30.0, 8).unwrap();
        let (inputs, targets) = ds.stacked();
        assert_eq!(inputs.shape(), (6, ds.input_len));
        assert_eq!(targets.shape(), (6, ds.target_len));
        for (r, s) in ds.samples.iter().enumerate() {
            assert_eq!(inputs.row(r).transpose(), s.input);
            assert_eq!(targets.row(r).transpose(), s.target);
        }
    }

    #[test]
    fn family_labels_are_distinct() {
        let labels: std::collections::HashSet<String> =
            Family::all().iter().map(|f| f.label()).collect();
        assert_eq!(labels.len(), 8);
        assert!(labels.contains("s1_bs_type1"));
        assert!(labels.contains("s2_dl_type2"));
    }
}
