//! Closed-form operation counts (real additions and multiplications) for
//! input construction and network inference.
//!
//! The counts follow the accounting conventions of the analytical complexity
//! model this simulator is benchmarked against: one complex multiplication
//! is four real multiplications and two real additions, matrix inversion is
//! charged at its classical dense cost, and raw-signal inputs (type 1) cost
//! nothing to build. Several of the closed forms are not integer-valued at
//! small arguments — they are asymptotic accountings — so everything is
//! evaluated in exact rational arithmetic and only rounded at the reporting
//! boundary rather than silently truncated.

use num_rational::Ratio;
use num_traits::Zero;
use std::io::Write;
use std::ops::Add;

use crate::airlink::Stage;
use crate::error::SimResult;
use crate::featurize::{input_len, target_len, Family, InputType};
use crate::sysmodel::SystemConfig;

/// Exact rational operation count.
pub type Count = Ratio<i128>;

fn r(n: i128) -> Count {
    Ratio::from_integer(n)
}

/// Real additions and multiplications of one computation, kept exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCount {
    pub adds: Count,
    pub mults: Count,
}

impl OpCount {
    pub fn zero() -> Self {
        Self { adds: Count::zero(), mults: Count::zero() }
    }

    pub fn is_integer(&self) -> bool {
        self.adds.is_integer() && self.mults.is_integer()
    }

    /// Nearest-integer report of both components.
    pub fn rounded(&self) -> (i128, i128) {
        (self.adds.round().to_integer(), self.mults.round().to_integer())
    }
}

impl Add for OpCount {
    type Output = OpCount;
    fn add(self, rhs: OpCount) -> OpCount {
        OpCount { adds: self.adds + rhs.adds, mults: self.mults + rhs.mults }
    }
}

/// Cost of inverting an m×m complex matrix.
pub fn inv_cost(m: usize) -> OpCount {
    let m = m as i128;
    OpCount {
        adds: r(2) / r(3) * r(m) * r(3 * m * m + 3 * m - 1),
        mults: r(1) / r(3) * r(m) * r(4 * m * m + 15 * m - 1),
    }
}

/// Cost of pseudo-inverting an a×b complex matrix through its normal
/// equations.
pub fn pinv_cost(a: usize, b: usize) -> OpCount {
    let inv = inv_cost(a);
    let (a, b) = (a as i128, b as i128);
    OpCount {
        adds: r(8 * a * a * b - 2 * a * (a + b)) + inv.adds,
        mults: r(8 * a * a * b) + inv.mults,
    }
}

/// Cost of constructing one input vector of a family. Raw-signal inputs are
/// free; estimate inputs are charged the full least-squares work that
/// produces them.
pub fn input_gen_cost(family: Family, cfg: &SystemConfig) -> OpCount {
    if family.input_type == InputType::Raw {
        return OpCount::zero();
    }
    let m = cfg.m as i128;
    let k = cfg.k as i128;
    let l = cfg.l as i128;
    let c1 = cfg.c_s1 as i128;
    let p1 = cfg.p_s1 as i128;
    let p2 = cfg.p_s2 as i128;
    let dc = cfg.stage2_subframes() as i128;
    match (family.stage, family.receiver) {
        (Stage::One, crate::airlink::Receiver::Bs) => OpCount {
            adds: r(2) / r(3) * r(m * c1) * r(18 * m * p1 + 3 * m * m - 3 * p1 + 3 * m - 1)
                + r(2) / r(3) * r(k * c1) * r(6 * m * p1 + 9 * p1 - 3 * m + 2)
                - r(2 * m * (k + m)),
            mults: r(1) / r(3) * r(m * c1) * r(36 * m * p1 + 4 * m * m + 15 * m - 1)
                + r(2 * k * c1) * r(2 * m * p1 + 4 * p1 + 3)
                + r(2 * m * (k + m) + k + 1),
        },
        (Stage::One, crate::airlink::Receiver::Downlink) => OpCount {
            adds: r(2) / r(3) * r(m * c1) * r(12 * m * p1 + 3 * m * m + 3 * p1 - 1) - r(2 * m),
            mults: r(1) / r(3) * r(m * c1) * r(24 * m * p1 + 4 * m * m + 12 * p1 + 15 * m - 1)
                + r(2 * m + 1),
        },
        (Stage::Two, crate::airlink::Receiver::Bs) => OpCount {
            adds: r(2) / r(3) * r(k * dc) * r(6 * m * l + 12 * l * l - 3 * l - 3 * m + 2)
                + r(2 * p2 * dc) * r(3 * m * k + m + 3 * k)
                + r(2) / r(3) * r(k * l) * r(3 * l * l - 3 * m - 1),
            mults: r(2 * p2 * dc) * r(2 * m * m + 4 * k * m + 8 * k)
                + r(2 * k * dc) * r(4 * l * l + 2 * m * l + 3)
                + r(1) / r(3) * r(k * l) * r(4 * l * l + 15 * l - 1),
        },
        (Stage::Two, crate::airlink::Receiver::Downlink) => OpCount {
            adds: r(2) / r(3) * r(m * dc) * r(12 * m * p2 + 3 * m * m + 6 * p2 - 4)
                + r(2 * l * dc) * r(2 * m + 4 * l - 1)
                + r(2) / r(3) * r(l) * r(3 * l * l - 3 * m - 1),
            mults: r(1) / r(3) * r(m * dc) * r(24 * m * p2 + 24 * p2 + 4 * m * m + 15 * m - 1)
                + r(4 * l * dc) * r(m + 2 * l)
                + r(1) / r(3) * r(l) * r(4 * l * l + 15 * l - 1),
        },
    }
}

/// Cost of one forward pass through a trained network.
pub fn elm_test_cost(n_hidden: usize, n_input: usize, n_output: usize) -> OpCount {
    let (h, zi, go) = (n_hidden as i128, n_input as i128, n_output as i128);
    OpCount {
        adds: r(h * (zi + go + 1) - go),
        mults: r(h * (zi + go)),
    }
}

/// Total online cost of a family: input construction plus one forward pass
/// through a network of `n_hidden` neurons sized for the family.
pub fn total_cost(family: Family, cfg: &SystemConfig, n_hidden: usize) -> OpCount {
    input_gen_cost(family, cfg)
        + elm_test_cost(n_hidden, input_len(family, cfg), target_len(family, cfg))
}

/// Emit one CSV row per family with the rounded total online cost.
/// `n_hidden_by_stage` supplies the network width for (stage 1, stage 2).
pub fn write_complexity_csv<W: Write + ?Sized>(
    cfg: &SystemConfig,
    n_hidden_by_stage: (usize, usize),
    out: &mut W,
) -> SimResult<()> {
    writeln!(out, "family,M,K,L,C1,C2,P1,P2,adds,mults")?;
    for family in Family::all() {
        let n_hidden = match family.stage {
            Stage::One => n_hidden_by_stage.0,
            Stage::Two => n_hidden_by_stage.1,
        };
        let (adds, mults) = total_cost(family, cfg, n_hidden).rounded();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{adds},{mults}",
            family.label(),
            cfg.m,
            cfg.k,
            cfg.l,
            cfg.c_s1,
            cfg.c_s2,
            cfg.p_s1,
            cfg.p_s2,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod test {
    use super::*;
    use crate::airlink::Receiver;
    use crate::sysmodel::SystemConfigPatch;

    fn frac(num: i128, den: i128) -> Count {
        Ratio::new(num, den)
    }

    fn cfg_with(m: usize, k: usize, l: usize, c_s1: usize, p_s1: usize, p_s2: usize, dc: usize) -> SystemConfig {
        let patch: SystemConfigPatch = serde_json::from_str(&format!(
            r#"{{"m": {m}, "k": {k}, "j": 1, "l": {l}, "c_s1": {c_s1}, "p_s1": {p_s1}, "p_s2": {p_s2}, "c_s2": {}}}"#,
            c_s1 + dc
        ))
        .unwrap();
        SystemConfig::paper_default().with_patch(&patch).unwrap()
    }

    #[test]
    fn inversion_cost_oracles() {
        assert_eq!(inv_cost(1).adds, frac(10, 3));
        assert_eq!(inv_cost(1).mults, r(6));
        assert!(!inv_cost(1).is_integer());
        assert_eq!(inv_cost(2).adds, frac(68, 3));
        assert_eq!(inv_cost(2).mults, r(30));
        assert_eq!(inv_cost(3).adds, r(70));
        assert_eq!(inv_cost(3).mults, r(80));
        assert!(inv_cost(3).is_integer());
        assert_eq!(inv_cost(4).adds, frac(472, 3));
        assert_eq!(inv_cost(4).mults, r(164));
    }

    #[test]
    fn pseudo_inversion_cost_oracles() {
        assert_eq!(pinv_cost(3, 6).adds, r(448));
        assert_eq!(pinv_cost(3, 6).mults, r(512));
        assert_eq!(pinv_cost(1, 4).adds, frac(76, 3));
        assert_eq!(pinv_cost(1, 4).mults, r(38));
        assert_eq!(pinv_cost(2, 2).adds, frac(212, 3));
        assert_eq!(pinv_cost(2, 2).mults, r(94));
    }

    #[test]
    fn raw_input_families_cost_nothing() {
        let cfg = SystemConfig::paper_default();
        for family in Family::all() {
            if family.input_type == InputType::Raw {
                assert_eq!(input_gen_cost(family, &cfg), OpCount::zero());
            } else {
                assert_ne!(input_gen_cost(family, &cfg), OpCount::zero());
            }
        }
    }

    #[test]
    fn stage1_bs_estimate_cost_oracles() {
        let fam = Family::new(Stage::One, InputType::Estimates, Receiver::Bs);
        let got = input_gen_cost(fam, &cfg_with(2, 1, 30, 1, 3, 2, 30));
        assert_eq!((got.adds, got.mults), (r(182), r(242)));
        let got = input_gen_cost(fam, &cfg_with(3, 2, 30, 1, 5, 3, 30));
        assert_eq!((got.adds, got.mults), (frac(2162, 3), r(865)));
        let got = input_gen_cost(fam, &cfg_with(6, 6, 30, 1, 12, 6, 30));
        assert_eq!((got.adds, got.mults), (r(7492), r(8141)));
    }

    #[test]
    fn stage1_downlink_estimate_cost_oracles() {
        let fam = Family::new(Stage::One, InputType::Estimates, Receiver::Downlink);
        let got = input_gen_cost(fam, &cfg_with(2, 1, 30, 1, 3, 2, 30));
        assert_eq!((got.adds, got.mults), (frac(356, 3), r(155)));
        let got = input_gen_cost(fam, &cfg_with(3, 2, 30, 1, 5, 3, 30));
        assert_eq!((got.adds, got.mults), (r(436), r(507)));
        let got = input_gen_cost(fam, &cfg_with(6, 6, 30, 1, 12, 6, 30));
        assert_eq!((got.adds, got.mults), (r(4016), r(4223)));
    }

    #[test]
    fn stage2_bs_estimate_cost_oracles() {
        let fam = Family::new(Stage::Two, InputType::Estimates, Receiver::Bs);
        let got = input_gen_cost(fam, &cfg_with(2, 1, 2, 1, 3, 2, 2));
        assert_eq!((got.adds, got.mults), (frac(532, 3), r(330)));
        let got = input_gen_cost(fam, &cfg_with(3, 2, 4, 1, 5, 3, 4));
        assert_eq!((got.adds, got.mults), (frac(6472, 3), r(3176)));
        let got = input_gen_cost(fam, &cfg_with(6, 6, 30, 1, 12, 6, 30));
        assert_eq!((got.adds, got.mults), (r(1782120), r(1764660)));
    }

    #[test]
    fn stage2_downlink_estimate_cost_oracles() {
        let fam = Family::new(Stage::Two, InputType::Estimates, Receiver::Downlink);
        let got = input_gen_cost(fam, &cfg_with(2, 1, 2, 1, 3, 2, 2));
        assert_eq!((got.adds, got.mults), (r(276), r(378)));
        let got = input_gen_cost(fam, &cfg_with(3, 2, 4, 1, 5, 3, 4));
        assert_eq!((got.adds, got.mults), (frac(5896, 3), r(2340)));
        let got = input_gen_cost(fam, &cfg_with(6, 6, 30, 1, 12, 6, 30));
        assert_eq!((got.adds, got.mults), (r(358060), r(352550)));
    }

    #[test]
    fn inference_cost_oracles() {
        let got = elm_test_cost(700, 144, 144);
        assert_eq!((got.adds, got.mults), (r(202156), r(201600)));
        assert!(got.is_integer());
        let got = elm_test_cost(1, 1, 1);
        assert_eq!((got.adds, got.mults), (r(2), r(2)));
    }

    #[test]
    fn inference_cost_is_monotone_in_each_argument() {
        let base = elm_test_cost(10, 20, 5);
        assert!(elm_test_cost(11, 20, 5).adds > base.adds);
        assert!(elm_test_cost(10, 21, 5).adds > base.adds);
        assert!(elm_test_cost(10, 20, 6).adds > base.adds);
        assert!(elm_test_cost(11, 20, 5).mults > base.mults);
        assert!(elm_test_cost(10, 21, 5).mults > base.mults);
        assert!(elm_test_cost(10, 20, 6).mults > base.mults);
    }

    #[test]
    fn opcount_addition_is_componentwise() {
        let a = OpCount { adds: frac(1, 3), mults: r(2) };
        let b = OpCount { adds: frac(2, 3), mults: r(5) };
        let s = a + b;
        assert_eq!((s.adds, s.mults), (r(1), r(7)));
    }

    #[test]
    fn costs_are_pure() {
        let cfg = SystemConfig::paper_default();
        for family in Family::all() {
            assert_eq!(input_gen_cost(family, &cfg), input_gen_cost(family, &cfg));
        }
    }

    fn n_h(stage: Stage) -> usize {
        match stage {
            Stage::One => 700,
            Stage::Two => 1300,
        }
    }

    #[test]
    fn total_cost_is_monotone_in_surface_size() {
        for family in Family::all() {
            let mut last = OpCount::zero();
            for l in 5..=30 {
                let patch: SystemConfigPatch =
                    serde_json::from_str(&format!(r#"{{"l": {l}}}"#)).unwrap();
                let cfg = SystemConfig::paper_default().with_patch(&patch).unwrap();
                let total = total_cost(family, &cfg, n_h(family.stage));
                assert!(
                    total.adds >= last.adds && total.mults >= last.mults,
                    "family {} total fell between L={} and L={l}",
                    family.label(),
                    l - 1
                );
                last = total;
            }
        }
    }

    #[test]
    fn total_cost_is_monotone_in_antenna_count() {
        for family in Family::all() {
            let mut last = OpCount::zero();
            for m in 2..=8 {
                let patch: SystemConfigPatch = serde_json::from_str(&format!(
                    r#"{{"m": {m}, "l": 15}}"#
                ))
                .unwrap();
                let cfg = SystemConfig::paper_default().with_patch(&patch).unwrap();
                let total = total_cost(family, &cfg, n_h(family.stage));
                assert!(
                    total.adds >= last.adds && total.mults >= last.mults,
                    "family {} total fell between M={} and M={m}",
                    family.label(),
                    m - 1
                );
                last = total;
            }
        }
    }

    #[test]
    fn stage2_bs_estimate_input_is_cheaper_than_raw_at_large_m() {
        let patch: SystemConfigPatch = serde_json::from_str(r#"{"m": 12}"#).unwrap();
        let cfg = SystemConfig::paper_default().with_patch(&patch).unwrap();
        let raw = total_cost(Family::new(Stage::Two, InputType::Raw, Receiver::Bs), &cfg, 1300);
        let est = total_cost(
            Family::new(Stage::Two, InputType::Estimates, Receiver::Bs),
            &cfg,
            1300,
        );
        assert_eq!((raw.adds, raw.mults), (r(17406580), r(17409600)));
        assert_eq!((est.adds, est.mults), (r(13265980), r(13480500)));
        assert!(est.adds < raw.adds && est.mults < raw.mults);
    }

    #[test]
    fn complexity_csv_has_one_row_per_family() {
        let mut buf = Vec::new();
        write_complexity_csv(&SystemConfig::paper_default(), (700, 1300), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.trim_end().lines().collect();
        assert_eq!(lines[0], "family,M,K,L,C1,C2,P1,P2,adds,mults");
        assert_eq!(lines.len(), 9);
        assert!(lines.iter().any(|l| l.starts_with("s2_bs_type2,6,6,30,1,31,12,6,")));
    }
}
