//! Two-stage pilot frame construction.
//!
//! Both stages draw their pilots from rows of a DFT matrix. Stage 1 (IRS off)
//! uses an `(M+K)`-row DFT over `P^{S1} ≥ M+K` slots: the BS transmits the
//! first `M` rows scaled by `1/√M`, uplink user `k` transmits row `M+k`, so
//! every pilot is orthogonal to every other and the direct channels separate
//! by correlation alone. Stage 2 (IRS on) shortens the sub-frame to
//! `P^{S2} ≥ max(M,K)` slots: the BS again takes the first `M` rows of a
//! `max(M,K)`-row DFT and user `k` takes row `k`, which deliberately is NOT
//! orthogonal to the BS rows — stage-2 separation subtracts the already
//! estimated direct-channel contributions instead of relying on orthogonality.
//! Across the stage-2 sub-frames the IRS steps through the columns of an
//! `L×(C^{S2}−C^{S1})` DFT phase schedule, every element at full reflection.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use std::f64::consts::TAU;
use std::io::Write;

use crate::error::{SimError, SimResult};
use crate::lsbase::pinv;
use crate::sysmodel::SystemConfig;

/// Pilot matrices, per-user pilot rows, and the IRS phase schedule for one
/// estimation frame, with the pseudoinverses every estimator applies cached at
/// construction (they depend only on the frame, not on data).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPlan {
    /// BS stage-1 pilot block, M×P^{S1}, entries of modulus 1/√M.
    pub x_s1: DMatrix<Complex64>,
    /// BS stage-2 pilot block, M×P^{S2}.
    pub x_s2: DMatrix<Complex64>,
    /// Uplink pilot rows in stage 1, length P^{S1}, mutually orthogonal and
    /// orthogonal to the BS block.
    pub z_s1: Vec<RowDVector<Complex64>>,
    /// Uplink pilot rows in stage 2, length P^{S2}.
    pub z_s2: Vec<RowDVector<Complex64>>,
    /// IRS phase schedule, L×(C^{S2}−C^{S1}); column `c` is the phase vector
    /// held for the whole (C^{S1}+1+c)-th sub-frame. Unit-modulus entries.
    pub v_s2: DMatrix<Complex64>,
    /// The IRS stays dark during stage 1.
    pub irs_on_s1: bool,
    /// Cached Moore–Penrose pseudoinverses.
    pub x_s1_pinv: DMatrix<Complex64>,
    pub x_s2_pinv: DMatrix<Complex64>,
    pub z_s1_pinv: Vec<DVector<Complex64>>,
    pub z_s2_pinv: Vec<DVector<Complex64>>,
    pub v_s2_pinv: DMatrix<Complex64>,
}

/// DFT matrix with `rows ≤ cols`: entry `(n, u)` (0-based) is
/// `exp(j·2π·n·u/cols)`. Any two distinct rows are orthogonal.
pub fn dft_matrix(rows: usize, cols: usize) -> SimResult<DMatrix<Complex64>> {
    if rows > cols {
        return Err(SimError::InvalidArgument(format!(
            "DFT pilot block needs rows <= cols for row orthogonality, got {rows}x{cols}"
        )));
    }
    if rows == 0 || cols == 0 {
        return Err(SimError::InvalidArgument(format!(
            "DFT matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    let step = TAU / cols as f64;
    Ok(DMatrix::from_fn(rows, cols, |n, u| {
        Complex64::from_polar(1.0, step * (n as f64) * (u as f64))
    }))
}

/// Build the full two-stage pilot plan for a validated configuration.
pub fn build_pilot_plan(cfg: &SystemConfig) -> SimResult<PilotPlan> {
    let scale = Complex64::new(1.0 / (cfg.m as f64).sqrt(), 0.0);

    // Stage 1: M+K orthogonal rows over P^{S1} slots.
    let q_s1 = dft_matrix(cfg.m + cfg.k, cfg.p_s1)?;
    let x_s1 = q_s1.rows(0, cfg.m).into_owned() * scale;
    let z_s1: Vec<RowDVector<Complex64>> = (0..cfg.k)
        .map(|k| q_s1.row(cfg.m + k).into_owned())
        .collect();

    // Stage 2: max(M,K) rows over P^{S2} slots; user rows reuse the leading
    // rows, overlapping the BS block when K < M — accepted, because stage-2
    // separation cancels the direct-channel terms rather than projecting them
    // out.
    let q_s2 = dft_matrix(cfg.m.max(cfg.k), cfg.p_s2)?;
    let x_s2 = q_s2.rows(0, cfg.m).into_owned() * scale;
    let z_s2: Vec<RowDVector<Complex64>> =
        (0..cfg.k).map(|k| q_s2.row(k).into_owned()).collect();

    // IRS phase schedule: one DFT column per stage-2 sub-frame.
    let v_s2 = dft_matrix(cfg.l, cfg.stage2_subframes())?;

    let x_s1_pinv = pinv(&x_s1)?;
    let x_s2_pinv = pinv(&x_s2)?;
    let z_s1_pinv = z_s1.iter().map(row_pinv).collect();
    let z_s2_pinv = z_s2.iter().map(row_pinv).collect();
    let v_s2_pinv = pinv(&v_s2)?;

    Ok(PilotPlan {
        x_s1,
        x_s2,
        z_s1,
        z_s2,
        v_s2,
        irs_on_s1: false,
        x_s1_pinv,
        x_s2_pinv,
        z_s1_pinv,
        z_s2_pinv,
        v_s2_pinv,
    })
}

/// Pseudoinverse of a nonzero row vector: `zᴴ/(z·zᴴ)`.
fn row_pinv(z: &RowDVector<Complex64>) -> DVector<Complex64> {
    let energy: f64 = z.iter().map(|e| e.norm_sqr()).sum();
    DVector::from_iterator(z.len(), z.iter().map(|e| e.conj() / energy))
}

impl PilotPlan {
    /// Debug dump of every pilot block as `block,row,col,re,im` lines.
    pub fn dump_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        fn dump<W: Write>(
            w: &mut W,
            name: &str,
            m: &DMatrix<Complex64>,
        ) -> std::io::Result<()> {
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let e = m[(r, c)];
                    writeln!(w, "{name},{r},{c},{:.17e},{:.17e}", e.re, e.im)?;
                }
            }
            Ok(())
        }
        writeln!(w, "block,row,col,re,im")?;
        dump(w, "x_s1", &self.x_s1)?;
        dump(w, "x_s2", &self.x_s2)?;
        for (k, z) in self.z_s1.iter().enumerate() {
            for c in 0..z.len() {
                writeln!(w, "z_s1[{k}],0,{c},{:.17e},{:.17e}", z[c].re, z[c].im)?;
            }
        }
        for (k, z) in self.z_s2.iter().enumerate() {
            for c in 0..z.len() {
                writeln!(w, "z_s2[{k}],0,{c},{:.17e},{:.17e}", z[c].re, z[c].im)?;
            }
        }
        dump(w, "v_s2", &self.v_s2)
    }
}
