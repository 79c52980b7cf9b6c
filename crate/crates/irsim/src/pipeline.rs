//! End-to-end experiment orchestration: dataset generation, model training,
//! two-stage evaluation chains, NMSE aggregation, sweeps, and CSV output.
//!
//! The offline phase builds one pooled dataset per family over the training
//! SNR grid and solves one network per family. The online phase draws fresh
//! test realizations per SNR point and runs both estimator chains: the
//! least-squares chain stands alone, while the learned chain feeds its own
//! stage-1 estimates into stage-2 cancellation, matching how the system
//! would run without ground truth. Evaluation is parallel over realizations
//! with derived random streams and a fixed-order reduction, so results do
//! not depend on the worker count.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use crate::airlink::{noise_var_for_snr, transmit, Receiver, Stage};
use crate::elmcore::{train, ElmModel, ElmSpec};
use crate::error::{SimError, SimResult};
use crate::featurize::{build_dataset, build_input, complexify, Family, InputType};
use crate::lsbase::{
    cancel_and_separate_bs, ls_full_chain, ls_stage2_bs, ls_stage2_ue, ChannelEstimates,
};
use crate::pilotplan::{build_pilot_plan, PilotPlan};
use crate::rng::{stream, Purpose};
use crate::sysmodel::{gen_channel_set, SystemConfig, SystemConfigPatch};

/// Which estimator produced a result row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "LS")]
    Ls,
    #[serde(rename = "ELM")]
    Elm,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Ls => "LS",
            Estimator::Elm => "ELM",
        })
    }
}

/// The five estimated channel families reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Sensing,
    UplinkDirect,
    DownlinkDirect,
    UplinkCascade,
    DownlinkCascade,
}

impl ChannelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelKind::Sensing => "A",
            ChannelKind::UplinkDirect => "b_k",
            ChannelKind::DownlinkDirect => "d_j",
            ChannelKind::UplinkCascade => "B_k",
            ChannelKind::DownlinkCascade => "D_j",
        }
    }

    /// Channels a family's estimates cover.
    fn of_family(family: Family) -> &'static [ChannelKind] {
        match (family.stage, family.receiver) {
            (Stage::One, Receiver::Bs) => &[ChannelKind::Sensing, ChannelKind::UplinkDirect],
            (Stage::One, Receiver::Downlink) => &[ChannelKind::DownlinkDirect],
            (Stage::Two, Receiver::Bs) => &[ChannelKind::UplinkCascade],
            (Stage::Two, Receiver::Downlink) => &[ChannelKind::DownlinkCascade],
        }
    }
}

/// One aggregated measurement: a (family, estimator, channel, SNR) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub estimator: Estimator,
    pub family: Family,
    pub channel: ChannelKind,
    pub snr_db: f64,
    pub nmse: f64,
    pub n_test: usize,
    pub seed: u64,
}

/// Everything one experiment needs. Build one from a profile default and a
/// JSON patch; the embedded `cfg.master_seed` seeds every random stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub cfg: SystemConfig,
    pub families: Vec<Family>,
    #[serde(with = "snr_grid_serde")]
    pub train_snr_grid_db: Vec<f64>,
    #[serde(with = "snr_grid_serde")]
    pub test_snr_grid_db: Vec<f64>,
    pub v_count: usize,
    pub q_count: usize,
    pub aug_snr_db: f64,
    pub n_test: usize,
    pub estimators: Vec<Estimator>,
    pub output_path: Option<PathBuf>,
    pub n_hidden_stage1: usize,
    pub n_hidden_stage2: usize,
}

/// SNR grids accept JSON numbers or the string `"inf"` (noise variance 0,
/// used by exactness tests), and non-finite values serialize back as `"inf"`.
mod snr_grid_serde {
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum SnrToken {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(grid: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        let tokens: Vec<SnrToken> = grid
            .iter()
            .map(|&v| {
                if v.is_finite() {
                    SnrToken::Num(v)
                } else {
                    SnrToken::Text("inf".into())
                }
            })
            .collect();
        tokens.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let tokens = Vec::<SnrToken>::deserialize(de)?;
        tokens
            .into_iter()
            .map(|t| match t {
                SnrToken::Num(v) => Ok(v),
                SnrToken::Text(s) if s.eq_ignore_ascii_case("inf") => Ok(f64::INFINITY),
                SnrToken::Text(s) => Err(D::Error::custom(format!(
                    "SNR grid entries must be numbers or \"inf\", got {s:?}"
                ))),
            })
            .collect()
    }
}

/// All-optional overlay for [`ExperimentSpec`], applied on a profile default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpecPatch {
    pub cfg: Option<SystemConfigPatch>,
    pub families: Option<Vec<Family>>,
    #[serde(default, with = "snr_grid_opt_serde")]
    pub train_snr_grid_db: Option<Vec<f64>>,
    #[serde(default, with = "snr_grid_opt_serde")]
    pub test_snr_grid_db: Option<Vec<f64>>,
    pub v_count: Option<usize>,
    pub q_count: Option<usize>,
    pub aug_snr_db: Option<f64>,
    pub n_test: Option<usize>,
    pub estimators: Option<Vec<Estimator>>,
    pub output_path: Option<PathBuf>,
    pub n_hidden_stage1: Option<usize>,
    pub n_hidden_stage2: Option<usize>,
}

mod snr_grid_opt_serde {
    use serde::{Deserialize, Deserializer};

    #[derive(Deserialize)]
    struct Wrapper(#[serde(with = "super::snr_grid_serde")] Vec<f64>);

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Option<Vec<f64>>, D::Error> {
        Option::<Wrapper>::deserialize(de).map(|o| o.map(|w| w.0))
    }
}

/// The standard test grid: −10 to 20 dB in 2.5 dB steps.
pub fn default_test_grid() -> Vec<f64> {
    (0..13).map(|i| -10.0 + 2.5 * i as f64).collect()
}

impl ExperimentSpec {
    /// Reduced-scale profile sized for quick runs: a small array and surface,
    /// short datasets, narrow networks.
    pub fn desk_default() -> Self {
        Self {
            cfg: SystemConfig::desk_default(),
            families: Family::all().to_vec(),
            train_snr_grid_db: vec![15.0, 20.0],
            test_snr_grid_db: default_test_grid(),
            v_count: 200,
            q_count: 5,
            aug_snr_db: 30.0,
            n_test: 200,
            estimators: vec![Estimator::Ls, Estimator::Elm],
            output_path: None,
            n_hidden_stage1: 200,
            n_hidden_stage2: 400,
        }
    }

    /// Full-scale profile matching the reference evaluation setup.
    pub fn paper_default() -> Self {
        Self {
            cfg: SystemConfig::paper_default(),
            v_count: 1000,
            q_count: 10,
            n_test: 1000,
            n_hidden_stage1: 700,
            n_hidden_stage2: 1300,
            ..Self::desk_default()
        }
    }

    /// Apply a patch; unset fields keep their current values.
    pub fn with_patch(mut self, patch: &ExperimentSpecPatch) -> SimResult<Self> {
        if let Some(cfg_patch) = &patch.cfg {
            self.cfg = self.cfg.with_patch(cfg_patch)?;
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &patch.$field { self.$field = v.clone(); })*
            };
        }
        take!(
            families,
            train_snr_grid_db,
            test_snr_grid_db,
            v_count,
            q_count,
            aug_snr_db,
            n_test,
            estimators
        );
        if let Some(v) = &patch.output_path {
            self.output_path = Some(v.clone());
        }
        if let Some(v) = patch.n_hidden_stage1 {
            self.n_hidden_stage1 = v;
        }
        if let Some(v) = patch.n_hidden_stage2 {
            self.n_hidden_stage2 = v;
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> SimResult<()> {
        self.cfg.validate()?;
        if self.families.is_empty() {
            return Err(SimError::Config("experiment needs at least one family".into()));
        }
        if self.estimators.is_empty() {
            return Err(SimError::Config("experiment needs at least one estimator".into()));
        }
        if self.train_snr_grid_db.is_empty() || self.test_snr_grid_db.is_empty() {
            return Err(SimError::Config("SNR grids must be nonempty".into()));
        }
        if self.n_test == 0 || self.v_count == 0 || self.q_count == 0 {
            return Err(SimError::Config("all sample counts must be positive".into()));
        }
        if self.n_hidden_stage1 == 0 || self.n_hidden_stage2 == 0 {
            return Err(SimError::Config("network widths must be positive".into()));
        }
        Ok(())
    }

    fn n_hidden_for(&self, stage: Stage) -> usize {
        match stage {
            Stage::One => self.n_hidden_stage1,
            Stage::Two => self.n_hidden_stage2,
        }
    }
}

/// One normalized squared error: ‖est − act‖_F² / ‖act‖_F². The entries are
/// compared in storage order, so pass matching layouts.
pub fn nmse(est: &[Complex64], act: &[Complex64]) -> SimResult<f64> {
    if est.len() != act.len() {
        return Err(SimError::DimensionMismatch(format!(
            "NMSE over mismatched blocks: {} vs {} entries",
            est.len(),
            act.len()
        )));
    }
    let act_energy: f64 = act.iter().map(|e| e.norm_sqr()).sum();
    if act_energy == 0.0 {
        return Err(SimError::DegenerateInput(
            "NMSE against an all-zero actual channel".into(),
        ));
    }
    let err_energy: f64 = est
        .iter()
        .zip(act)
        .map(|(e, a)| (e - a).norm_sqr())
        .sum();
    Ok(err_energy / act_energy)
}

/// Deterministic per-family network seed, independent of training order.
fn family_init_seed(master_seed: u64, family: Family) -> u64 {
    let idx = Family::all()
        .iter()
        .position(|f| *f == family)
        .expect("every family is canonical") as u64;
    master_seed.wrapping_add(idx)
}

/// Train the networks an experiment needs: every configured learned family
/// plus, for stage-2 families, the same-type stage-1 family whose estimates
/// feed their evaluation chain.
fn train_models(spec: &ExperimentSpec, plan: &PilotPlan) -> SimResult<HashMap<Family, ElmModel>> {
    let mut wanted: Vec<Family> = Vec::new();
    let push = |f: Family, wanted: &mut Vec<Family>| {
        if !wanted.contains(&f) {
            wanted.push(f);
        }
    };
    for &family in &spec.families {
        if family.stage == Stage::Two {
            push(
                Family::new(Stage::One, family.input_type, family.receiver),
                &mut wanted,
            );
        }
        push(family, &mut wanted);
    }
    let mut models = HashMap::new();
    for family in wanted {
        let ds = build_dataset(
            &spec.cfg,
            plan,
            family,
            &spec.train_snr_grid_db,
            spec.v_count,
            spec.q_count,
            spec.aug_snr_db,
            spec.cfg.master_seed,
        )?;
        let (inputs, targets) = ds.stacked();
        drop(ds);
        let base = ElmSpec::de_elm(
            inputs.ncols(),
            targets.ncols(),
            spec.n_hidden_for(family.stage),
            family_init_seed(spec.cfg.master_seed, family),
        );
        let elm_spec = match family.stage {
            Stage::One => base,
            Stage::Two => ElmSpec::re_elm(base.n_input, base.n_output, base.n_hidden, base.init_seed),
        };
        let (model, _report) = train(&elm_spec, &inputs, &targets)?;
        models.insert(family, model);
    }
    Ok(models)
}

/// Decode a stage-1 BS prediction back into a sensing matrix and per-user
/// direct channels.
fn decode_stage1_bs(
    cfg: &SystemConfig,
    values: &DVector<f64>,
) -> SimResult<(DMatrix<Complex64>, Vec<DVector<Complex64>>)> {
    let entries = complexify(values.as_slice())?;
    let m2 = cfg.m * cfg.m;
    let a = DMatrix::from_column_slice(cfg.m, cfg.m, &entries[..m2]);
    let b = (0..cfg.k)
        .map(|k| DVector::from_column_slice(&entries[m2 + k * cfg.m..m2 + (k + 1) * cfg.m]))
        .collect();
    Ok((a, b))
}

/// Decode a stage-2 BS prediction into per-user cascade matrices.
fn decode_stage2_bs(cfg: &SystemConfig, values: &DVector<f64>) -> SimResult<Vec<DMatrix<Complex64>>> {
    let entries = complexify(values.as_slice())?;
    let ml = cfg.m * cfg.l;
    Ok((0..cfg.k)
        .map(|k| DMatrix::from_column_slice(cfg.m, cfg.l, &entries[k * ml..(k + 1) * ml]))
        .collect())
}

/// Per-realization estimates of the learned chain for one input type.
struct ElmStage1 {
    bs: Option<(DMatrix<Complex64>, Vec<DVector<Complex64>>)>,
    dl: Option<Vec<DVector<Complex64>>>,
}

/// Everything eval_one needs besides the realization index.
struct EvalContext<'a> {
    spec: &'a ExperimentSpec,
    plan: &'a PilotPlan,
    models: &'a HashMap<Family, ElmModel>,
    slots: &'a [(Family, Estimator, ChannelKind)],
    nv_bs: f64,
    nv_ue: f64,
}

fn mean_over<T>(items: &[T], mut f: impl FnMut(&T) -> SimResult<f64>) -> SimResult<f64> {
    let mut acc = 0.0;
    for item in items {
        acc += f(item)?;
    }
    Ok(acc / items.len() as f64)
}

/// Evaluate every slot on one fresh realization; returns one NMSE
/// contribution per slot in slot order.
fn eval_one(ctx: &EvalContext<'_>, idx: u64) -> SimResult<Vec<f64>> {
    let cfg = &ctx.spec.cfg;
    let seed = cfg.master_seed;
    let ch = gen_channel_set(cfg, &mut stream(seed, Purpose::ChannelEval, idx));
    let rx = transmit(
        cfg,
        ctx.plan,
        &ch,
        ctx.nv_bs,
        ctx.nv_ue,
        &mut stream(seed, Purpose::NoiseEval, idx),
    )?;
    let ls = ls_full_chain(&rx, ctx.plan)?;

    // The learned chain's stage-1 estimates, one bundle per input type that
    // any evaluated family needs.
    let mut elm_s1: HashMap<InputType, ElmStage1> = HashMap::new();
    let needs_elm = |f: &Family| {
        ctx.slots
            .iter()
            .any(|(fam, est, _)| fam == f && *est == Estimator::Elm)
            || ctx.slots.iter().any(|(fam, est, _)| {
                *est == Estimator::Elm
                    && fam.stage == Stage::Two
                    && fam.input_type == f.input_type
                    && fam.receiver == f.receiver
            })
    };
    for input_type in [InputType::Raw, InputType::Estimates] {
        let bs_family = Family::new(Stage::One, input_type, Receiver::Bs);
        let dl_family = Family::new(Stage::One, input_type, Receiver::Downlink);
        let mut bundle = ElmStage1 { bs: None, dl: None };
        if needs_elm(&bs_family) {
            let model = &ctx.models[&bs_family];
            let input = build_input(bs_family, &rx, Some(&ls), 0)?;
            bundle.bs = Some(decode_stage1_bs(cfg, &model.predict(&input)?)?);
        }
        if needs_elm(&dl_family) {
            let model = &ctx.models[&dl_family];
            let mut per_user = Vec::with_capacity(cfg.j);
            for j in 0..cfg.j {
                let input = build_input(dl_family, &rx, Some(&ls), j)?;
                per_user.push(DVector::from_column_slice(&complexify(
                    model.predict(&input)?.as_slice(),
                )?));
            }
            bundle.dl = Some(per_user);
        }
        elm_s1.insert(input_type, bundle);
    }

    let mut out = Vec::with_capacity(ctx.slots.len());
    for &(family, estimator, channel) in ctx.slots {
        let value = match estimator {
            Estimator::Ls => match channel {
                ChannelKind::Sensing => nmse(ls.a_bar.as_slice(), ch.a.as_slice())?,
                ChannelKind::UplinkDirect => mean_over(&(0..cfg.k).collect::<Vec<_>>(), |&k| {
                    nmse(ls.b_bar[k].as_slice(), ch.b[k].as_slice())
                })?,
                ChannelKind::DownlinkDirect => mean_over(&(0..cfg.j).collect::<Vec<_>>(), |&j| {
                    nmse(ls.d_bar[j].as_slice(), ch.d[j].as_slice())
                })?,
                ChannelKind::UplinkCascade => mean_over(&(0..cfg.k).collect::<Vec<_>>(), |&k| {
                    nmse(ls.b_casc_bar[k].as_slice(), ch.b_casc[k].as_slice())
                })?,
                ChannelKind::DownlinkCascade => mean_over(&(0..cfg.j).collect::<Vec<_>>(), |&j| {
                    nmse(ls.d_casc_bar[j].as_slice(), ch.d_casc[j].as_slice())
                })?,
            },
            Estimator::Elm => {
                let bundle = &elm_s1[&family.input_type];
                match (family.stage, family.receiver) {
                    (Stage::One, Receiver::Bs) => {
                        let (a_hat, b_hat) = bundle.bs.as_ref().expect("trained stage-1 BS model");
                        match channel {
                            ChannelKind::Sensing => nmse(a_hat.as_slice(), ch.a.as_slice())?,
                            _ => mean_over(&(0..cfg.k).collect::<Vec<_>>(), |&k| {
                                nmse(b_hat[k].as_slice(), ch.b[k].as_slice())
                            })?,
                        }
                    }
                    (Stage::One, Receiver::Downlink) => {
                        let d_hat = bundle.dl.as_ref().expect("trained stage-1 DL model");
                        mean_over(&(0..cfg.j).collect::<Vec<_>>(), |&j| {
                            nmse(d_hat[j].as_slice(), ch.d[j].as_slice())
                        })?
                    }
                    (Stage::Two, Receiver::Bs) => {
                        let (a_hat, b_hat) = bundle.bs.as_ref().expect("trained stage-1 BS model");
                        let model = &ctx.models[&family];
                        let prediction = match family.input_type {
                            InputType::Raw => {
                                let carrier = ChannelEstimates {
                                    a_bar: a_hat.clone(),
                                    b_bar: b_hat.clone(),
                                    d_bar: Vec::new(),
                                    b_casc_bar: Vec::new(),
                                    d_casc_bar: Vec::new(),
                                };
                                let input = build_input(family, &rx, Some(&carrier), 0)?;
                                model.predict(&input)?
                            }
                            InputType::Estimates => {
                                let y_bar = cancel_and_separate_bs(&rx, ctx.plan, a_hat, b_hat);
                                let chained = ls_stage2_bs(&y_bar, ctx.plan)?;
                                let carrier = ChannelEstimates {
                                    a_bar: a_hat.clone(),
                                    b_bar: b_hat.clone(),
                                    d_bar: Vec::new(),
                                    b_casc_bar: chained,
                                    d_casc_bar: Vec::new(),
                                };
                                let input = build_input(family, &rx, Some(&carrier), 0)?;
                                model.predict(&input)?
                            }
                        };
                        let b_casc_hat = decode_stage2_bs(cfg, &prediction)?;
                        mean_over(&(0..cfg.k).collect::<Vec<_>>(), |&k| {
                            nmse(b_casc_hat[k].as_slice(), ch.b_casc[k].as_slice())
                        })?
                    }
                    (Stage::Two, Receiver::Downlink) => {
                        let d_hat = bundle.dl.as_ref().expect("trained stage-1 DL model");
                        let model = &ctx.models[&family];
                        mean_over(&(0..cfg.j).collect::<Vec<_>>(), |&j| {
                            let prediction = match family.input_type {
                                InputType::Raw => {
                                    let mut carrier_d = vec![DVector::zeros(cfg.m); cfg.j];
                                    carrier_d[j] = d_hat[j].clone();
                                    let carrier = ChannelEstimates {
                                        a_bar: DMatrix::zeros(cfg.m, cfg.m),
                                        b_bar: Vec::new(),
                                        d_bar: carrier_d,
                                        b_casc_bar: Vec::new(),
                                        d_casc_bar: Vec::new(),
                                    };
                                    let input = build_input(family, &rx, Some(&carrier), j)?;
                                    model.predict(&input)?
                                }
                                InputType::Estimates => {
                                    let chained = ls_stage2_ue(&rx, ctx.plan, &d_hat[j], j)?;
                                    let mut carrier_dc = vec![DMatrix::zeros(cfg.m, cfg.l); cfg.j];
                                    carrier_dc[j] = chained;
                                    let carrier = ChannelEstimates {
                                        a_bar: DMatrix::zeros(cfg.m, cfg.m),
                                        b_bar: Vec::new(),
                                        d_bar: Vec::new(),
                                        b_casc_bar: Vec::new(),
                                        d_casc_bar: carrier_dc,
                                    };
                                    let input = build_input(family, &rx, Some(&carrier), j)?;
                                    model.predict(&input)?
                                }
                            };
                            let entries = complexify(prediction.as_slice())?;
                            nmse(&entries, ch.d_casc[j].as_slice())
                        })?
                    }
                }
            }
        };
        out.push(value);
    }
    Ok(out)
}

/// Run the full experiment: train what the experiment calls for, then
/// evaluate every (family, estimator, channel) cell on every test SNR point.
pub fn run_pipeline(spec: &ExperimentSpec) -> SimResult<Vec<ResultRow>> {
    spec.validate()?;
    let plan = build_pilot_plan(&spec.cfg)?;
    let models = if spec.estimators.contains(&Estimator::Elm) {
        train_models(spec, &plan)?
    } else {
        HashMap::new()
    };
    let mut slots: Vec<(Family, Estimator, ChannelKind)> = Vec::new();
    for &family in &spec.families {
        for &estimator in &spec.estimators {
            for &channel in ChannelKind::of_family(family) {
                slots.push((family, estimator, channel));
            }
        }
    }
    let mut rows = Vec::with_capacity(slots.len() * spec.test_snr_grid_db.len());
    for (snr_idx, &snr_db) in spec.test_snr_grid_db.iter().enumerate() {
        let ctx = EvalContext {
            spec,
            plan: &plan,
            models: &models,
            slots: &slots,
            nv_bs: noise_var_for_snr(&spec.cfg, Stage::Two, Receiver::Bs, snr_db),
            nv_ue: noise_var_for_snr(&spec.cfg, Stage::Two, Receiver::Downlink, snr_db),
        };
        let contributions: Vec<Vec<f64>> = (0..spec.n_test)
            .into_par_iter()
            .map(|t| eval_one(&ctx, (snr_idx * spec.n_test + t) as u64))
            .collect::<SimResult<Vec<_>>>()?;
        // Sum in realization order regardless of which worker produced what.
        let mut sums = vec![0.0f64; slots.len()];
        for contribution in &contributions {
            for (s, v) in sums.iter_mut().zip(contribution) {
                *s += v;
            }
        }
        for (&(family, estimator, channel), &sum) in slots.iter().zip(&sums) {
            rows.push(ResultRow {
                estimator,
                family,
                channel,
                snr_db,
                nmse: sum / spec.n_test as f64,
                n_test: spec.n_test,
                seed: spec.cfg.master_seed,
            });
        }
    }
    Ok(rows)
}

/// Write result rows as CSV with the fixed header.
pub fn write_results_csv<W: Write + ?Sized>(rows: &[ResultRow], out: &mut W) -> SimResult<()> {
    writeln!(out, "estimator,stage,input_type,receiver,channel,snr_db,nmse,n_test,seed")?;
    for row in rows {
        let stage = match row.family.stage {
            Stage::One => 1,
            Stage::Two => 2,
        };
        let input_type = match row.family.input_type {
            InputType::Raw => 1,
            InputType::Estimates => 2,
        };
        let receiver = match row.family.receiver {
            Receiver::Bs => "BS",
            Receiver::Downlink => "DL",
        };
        writeln!(
            out,
            "{},{stage},{input_type},{receiver},{},{},{},{},{}",
            row.estimator,
            row.channel.label(),
            row.snr_db,
            row.nmse,
            row.n_test,
            row.seed,
        )?;
    }
    Ok(())
}

/// Sweep axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Snr,
    L,
    M,
}

impl std::str::FromStr for SweepAxis {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "snr" => Ok(SweepAxis::Snr),
            "l" => Ok(SweepAxis::L),
            "m" => Ok(SweepAxis::M),
            other => Err(SimError::InvalidArgument(format!(
                "unknown sweep axis {other:?}; expected snr, L, or M"
            ))),
        }
    }
}

/// Run a sweep. The SNR axis reuses the test grid mechanism in one labeled
/// batch; dimension axes re-instantiate the configuration per value (which
/// re-derives the pilot lengths and frame split) and produce one labeled
/// batch each.
pub fn sweep(
    spec: &ExperimentSpec,
    axis: SweepAxis,
    values: &[f64],
) -> SimResult<Vec<(String, Vec<ResultRow>)>> {
    if values.is_empty() {
        return Err(SimError::InvalidArgument("sweep needs at least one value".into()));
    }
    match axis {
        SweepAxis::Snr => {
            let mut snr_spec = spec.clone();
            snr_spec.test_snr_grid_db = values.to_vec();
            Ok(vec![("snr".into(), run_pipeline(&snr_spec)?)])
        }
        SweepAxis::L | SweepAxis::M => {
            let mut out = Vec::with_capacity(values.len());
            for &value in values {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(SimError::InvalidArgument(format!(
                        "dimension sweep values must be positive integers, got {value}"
                    )));
                }
                let mut patch = SystemConfigPatch::default();
                let label = if axis == SweepAxis::L {
                    patch.l = Some(value as usize);
                    format!("L{value}")
                } else {
                    patch.m = Some(value as usize);
                    format!("M{value}")
                };
                let mut value_spec = spec.clone();
                value_spec.cfg = spec.cfg.clone().with_patch(&patch)?;
                out.push((label, run_pipeline(&value_spec)?));
            }
            Ok(out)
        }
    }
}
