//! Link-level Monte-Carlo simulator for two-stage channel estimation in an
//! IRS-assisted integrated sensing and communication (ISAC) system.
//!
//! A full-duplex ISAC base station with `M` antennas serves `K` uplink and `J`
//! downlink single-antenna users while sensing a target, assisted by a passive
//! `L`-element intelligent reflecting surface (IRS). Channel estimation runs in
//! two pilot stages: stage 1 (IRS off) estimates the direct channels — the
//! sensing channel `A`, the uplink channels `b_k`, and the downlink channels
//! `d_j` — and stage 2 (IRS on, DFT phase schedule) estimates the cascaded
//! reflected channels `B_k` and `D_j`.
//!
//! The crate provides:
//!
//! - [`sysmodel`]: system configuration and stochastic channel synthesis
//!   (Rician fading with steering-vector line-of-sight components);
//! - [`pilotplan`]: DFT pilot matrices and the IRS phase-shift schedule;
//! - [`airlink`]: noisy received-signal synthesis and SNR bookkeeping;
//! - [`lsbase`]: the least-squares estimator chain for all five channel
//!   families (also the feature source for estimate-based learning inputs);
//! - [`featurize`]: input/target vector construction, data augmentation, and
//!   dataset assembly;
//! - [`elmcore`]: extreme learning machine regression (random frozen hidden
//!   layer, closed-form least-squares output solve);
//! - [`costmodel`]: closed-form operation-count accounting in exact rational
//!   arithmetic;
//! - [`pipeline`]: end-to-end train/evaluate orchestration, NMSE sweeps, and
//!   CSV emission (backing the `irsim` CLI binary).
//!
//! Everything downstream of a seed is deterministic: channel draws, noise,
//! hidden-layer initialization, and parallel Monte-Carlo reductions are all
//! derived from named ChaCha streams so results do not depend on worker count.

pub mod airlink;
pub mod costmodel;
pub mod elmcore;
pub mod error;
pub mod featurize;
pub mod lsbase;
pub mod pilotplan;
pub mod pipeline;
pub mod rng;
pub mod sysmodel;

pub use error::{SimError, SimResult};
