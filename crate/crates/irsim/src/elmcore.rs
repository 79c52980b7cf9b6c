//! Single-hidden-layer networks with frozen random input weights whose output
//! weights are solved in closed form by least squares.
//!
//! Two configurations are used: a direct-channel network (linear activation,
//! no pre-activation standardization) and a reflected-channel network
//! (sigmoid activation with per-sample standardization before the
//! activation). Input weights and biases are drawn once per neuron from its
//! own random stream, so a wider network extends a narrower one with the same
//! seed instead of reshuffling it.
//!
//! The output solve routes by problem shape: tall feature matrices go through
//! the normal equations (Gram matrix plus symmetric eigendecomposition),
//! which is far cheaper than a full SVD at the row counts used here; short
//! ones take the SVD pseudoinverse directly. Both yield the minimum-norm
//! least-squares solution, including on rank-deficient features.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{SimError, SimResult};
use crate::rng::{stream, Purpose};
use rand::Rng;

/// Hidden-layer activation function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Linear,
    Sigmoid,
}

/// What the standardization operator divides by after centering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StdDivisor {
    /// Population standard deviation (z-score); the production default.
    Std,
    /// Population variance; provided because the defining notation is
    /// ambiguous between the two.
    Var,
}

impl Default for StdDivisor {
    fn default() -> Self {
        StdDivisor::Std
    }
}

fn default_ridge() -> f64 {
    0.0
}

/// Architecture and training hyperparameters of one network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElmSpec {
    pub n_input: usize,
    pub n_hidden: usize,
    pub n_output: usize,
    pub activation: Activation,
    pub pre_activation_standardize: bool,
    pub init_seed: u64,
    #[serde(default)]
    pub standardize_divisor: StdDivisor,
    /// Ridge regularization weight for the output solve; 0 (the default)
    /// gives the plain minimum-norm least-squares solution.
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

impl ElmSpec {
    /// Direct-channel configuration: linear activation, no pre-activation
    /// standardization.
    pub fn de_elm(n_input: usize, n_output: usize, n_hidden: usize, init_seed: u64) -> Self {
        Self {
            n_input,
            n_hidden,
            n_output,
            activation: Activation::Linear,
            pre_activation_standardize: false,
            init_seed,
            standardize_divisor: StdDivisor::Std,
            ridge: 0.0,
        }
    }

    /// Reflected-channel configuration: sigmoid activation with per-sample
    /// standardization before the activation.
    pub fn re_elm(n_input: usize, n_output: usize, n_hidden: usize, init_seed: u64) -> Self {
        Self {
            activation: Activation::Sigmoid,
            pre_activation_standardize: true,
            ..Self::de_elm(n_input, n_output, n_hidden, init_seed)
        }
    }
}

/// Center a vector and divide by its own population statistic. A spread below
/// 1e−12 yields the zero vector instead of amplified noise.
pub fn standardize(x: &DVector<f64>, divisor: StdDivisor) -> DVector<f64> {
    let n = x.len() as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std < 1e-12 {
        return DVector::zeros(x.len());
    }
    let denom = match divisor {
        StdDivisor::Std => std,
        StdDivisor::Var => var,
    };
    x.map(|v| (v - mean) / denom)
}

/// In-place row-wise standardization of a sample matrix (one sample per row).
fn standardize_rows(mat: &mut DMatrix<f64>, divisor: StdDivisor) {
    let d = mat.ncols() as f64;
    for r in 0..mat.nrows() {
        let mean = mat.row(r).sum() / d;
        let var = mat.row(r).iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let std = var.sqrt();
        if std < 1e-12 {
            mat.row_mut(r).fill(0.0);
            continue;
        }
        let denom = match divisor {
            StdDivisor::Std => std,
            StdDivisor::Var => var,
        };
        for v in mat.row_mut(r).iter_mut() {
            *v = (*v - mean) / denom;
        }
    }
}

/// A trained network: frozen input weights and bias, solved output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel {
    pub spec: ElmSpec,
    /// Input weights, one neuron per row (N_h×N_ζ).
    pub w_in: DMatrix<f64>,
    /// Hidden biases (N_h).
    pub bias: DVector<f64>,
    /// Output weights (N_h×N_γ).
    pub w_out: DMatrix<f64>,
}

/// Diagnostics of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Which output solver ran: `"gram-eigen"` or `"svd"`.
    pub solver: &'static str,
    /// max |F̄ᵀ(F̄·Θ̂ − Υ)| — the first-order optimality residual.
    pub normal_eq_residual: f64,
    /// max |F̄ᵀΥ| — the natural scale of the residual above.
    pub normal_eq_scale: f64,
    /// ‖F̄·Θ̂ − Υ‖_F.
    pub fit_residual: f64,
    /// ‖Υ‖_F.
    pub target_norm: f64,
}

/// Draw the frozen hidden layer: per-neuron streams so that widening the
/// network appends neurons without changing existing ones.
fn draw_hidden_layer(spec: &ElmSpec) -> (DMatrix<f64>, DVector<f64>) {
    let mut w_in = DMatrix::zeros(spec.n_hidden, spec.n_input);
    let mut bias = DVector::zeros(spec.n_hidden);
    for h in 0..spec.n_hidden {
        let mut rng = stream(spec.init_seed, Purpose::ElmInit, h as u64);
        for c in 0..spec.n_input {
            w_in[(h, c)] = rng.random_range(-1.0..1.0);
        }
        bias[h] = rng.random_range(-1.0..1.0);
    }
    (w_in, bias)
}

/// Hidden features of pre-standardized samples (one per row): affine map,
/// optional per-sample standardization, then the activation.
fn hidden_matrix(
    spec: &ElmSpec,
    w_in: &DMatrix<f64>,
    bias: &DVector<f64>,
    std_inputs: &DMatrix<f64>,
) -> DMatrix<f64> {
    let mut features = std_inputs * w_in.transpose();
    for r in 0..features.nrows() {
        for (c, v) in features.row_mut(r).iter_mut().enumerate() {
            *v += bias[c];
        }
    }
    if spec.pre_activation_standardize {
        standardize_rows(&mut features, spec.standardize_divisor);
    }
    if spec.activation == Activation::Sigmoid {
        for v in features.iter_mut() {
            *v = 1.0 / (1.0 + (-*v).exp());
        }
    }
    features
}

/// Minimum-norm least-squares solve of `F·W = T` through the normal
/// equations: eigendecompose `FᵀF`, invert eigenvalues above threshold. With
/// a positive ridge the inversion is of `λ + ridge` and needs no threshold.
fn solve_gram(f: &DMatrix<f64>, t: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let gram = f.transpose() * f;
    let c = f.transpose() * t;
    let eig = gram.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    // Eigenvalues of FᵀF are squared singular values of F, so this threshold
    // corresponds to dropping singular values below √(dim·ε)·σ_max — the
    // appropriate floor for a solve that squares the condition number.
    let tol = f.nrows().max(f.ncols()) as f64 * f64::EPSILON * lambda_max;
    let mut projected = eig.eigenvectors.transpose() * c;
    for i in 0..eig.eigenvalues.len() {
        let lambda = eig.eigenvalues[i];
        let filter = if ridge > 0.0 {
            1.0 / (lambda.max(0.0) + ridge)
        } else if lambda > tol {
            1.0 / lambda
        } else {
            0.0
        };
        for v in projected.row_mut(i).iter_mut() {
            *v *= filter;
        }
    }
    &eig.eigenvectors * projected
}

/// One-sided Jacobi SVD: returns `(U, σ, V)` with `A = U·diag(σ)·Vᵀ`, U the
/// normalized rotated columns and σ unsorted. Plane rotations orthogonalize
/// column pairs until every pair is numerically orthogonal, which converges
/// unconditionally and stays accurate for tiny and repeated singular values
/// where iterative bidiagonal solvers can drift.
fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let n_cols = a.ncols();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n_cols, n_cols);
    let tol = 1e-15f64;
    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..n_cols {
            for q in (p + 1)..n_cols {
                let wp = w.column(p);
                let wq = w.column(q);
                let app = wp.norm_squared();
                let aqq = wq.norm_squared();
                let apq = wp.dot(&wq);
                if apq * apq <= tol * tol * app * aqq || apq == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for r in 0..w.nrows() {
                    let (wrp, wrq) = (w[(r, p)], w[(r, q)]);
                    w[(r, p)] = cs * wrp - sn * wrq;
                    w[(r, q)] = sn * wrp + cs * wrq;
                }
                for r in 0..n_cols {
                    let (vrp, vrq) = (v[(r, p)], v[(r, q)]);
                    v[(r, p)] = cs * vrp - sn * vrq;
                    v[(r, q)] = sn * vrp + cs * vrq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = DVector::from_iterator(n_cols, w.column_iter().map(|c| c.norm()));
    let mut u = w;
    for (i, mut col) in u.column_iter_mut().enumerate() {
        if sigma[i] > 0.0 {
            col /= sigma[i];
        } else {
            col.fill(0.0);
        }
    }
    (u, sigma, v)
}

/// Minimum-norm least-squares solve of `F·W = T` by direct SVD. With a
/// positive ridge the singular-value filter becomes σ/(σ² + ridge).
///
/// A Householder QR pass first reduces the problem to the square triangular
/// factor, then a Jacobi SVD factors it; both steps are free of the
/// convergence failures the stock iterative SVD shows on rank-deficient
/// feature matrices.
fn solve_svd(f: &DMatrix<f64>, t: &DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    let qr = f.clone().qr();
    let reduced_t = qr.q().transpose() * t;
    let (u, sigma, v) = jacobi_svd(&qr.r());
    let sigma_max = sigma.max();
    let tol = f.nrows().max(f.ncols()) as f64 * f64::EPSILON * sigma_max;
    let mut projected = u.transpose() * reduced_t;
    for i in 0..sigma.len() {
        let s = sigma[i];
        let filter = if ridge > 0.0 {
            s / (s * s + ridge)
        } else if s > tol {
            1.0 / s
        } else {
            0.0
        };
        for entry in projected.row_mut(i).iter_mut() {
            *entry *= filter;
        }
    }
    v * projected
}

/// Train a network: draw the frozen hidden layer, build the feature matrix,
/// and solve the output weights by least squares.
///
/// `inputs` and `targets` hold one sample per row. Inputs are standardized
/// per sample internally; feeding already-standardized rows is harmless
/// because the operator is idempotent. Targets are used as given.
pub fn train(
    spec: &ElmSpec,
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
) -> SimResult<(ElmModel, TrainReport)> {
    if spec.n_hidden == 0 {
        return Err(SimError::InvalidArgument("network needs at least one hidden neuron".into()));
    }
    if inputs.nrows() == 0 || inputs.nrows() != targets.nrows() {
        return Err(SimError::InvalidArgument(format!(
            "training needs matching nonempty sample counts, got {} inputs and {} targets",
            inputs.nrows(),
            targets.nrows()
        )));
    }
    if inputs.ncols() != spec.n_input || targets.ncols() != spec.n_output {
        return Err(SimError::InvalidArgument(format!(
            "sample widths ({}, {}) do not match the architecture ({}, {})",
            inputs.ncols(),
            targets.ncols(),
            spec.n_input,
            spec.n_output
        )));
    }
    let (w_in, bias) = draw_hidden_layer(spec);
    let mut std_inputs = inputs.clone();
    standardize_rows(&mut std_inputs, spec.standardize_divisor);
    let features = hidden_matrix(spec, &w_in, &bias, &std_inputs);
    if features.iter().any(|v| !v.is_finite()) {
        return Err(SimError::Numeric(
            "non-finite hidden features; check the training inputs".into(),
        ));
    }
    // The Gram route costs ~N·N_h² versus the SVD's ~N²·N_h; take it once
    // the feature matrix is tall enough that squaring the conditioning is a
    // good trade.
    let (w_out, solver) = if inputs.nrows() >= 4 * spec.n_hidden {
        (solve_gram(&features, targets, spec.ridge), "gram-eigen")
    } else {
        (solve_svd(&features, targets, spec.ridge), "svd")
    };
    let residual = &features * &w_out - targets;
    let normal_eq = features.transpose() * &residual;
    let scale = features.transpose() * targets;
    let report = TrainReport {
        solver,
        normal_eq_residual: normal_eq.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        normal_eq_scale: scale.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        fit_residual: residual.norm(),
        target_norm: targets.norm(),
    };
    Ok((
        ElmModel {
            spec: *spec,
            w_in,
            bias,
            w_out,
        },
        report,
    ))
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    spec: ElmSpec,
    n_hidden: usize,
    n_input: usize,
    n_output: usize,
}

impl ElmModel {
    /// Hidden features of one already-standardized input vector.
    pub fn hidden_features(&self, input: &DVector<f64>) -> SimResult<DVector<f64>> {
        if input.len() != self.spec.n_input {
            return Err(SimError::InvalidArgument(format!(
                "input length {} does not match the architecture's {}",
                input.len(),
                self.spec.n_input
            )));
        }
        let mut u = &self.w_in * input + &self.bias;
        if self.spec.pre_activation_standardize {
            u = standardize(&u, self.spec.standardize_divisor);
        }
        if self.spec.activation == Activation::Sigmoid {
            for v in u.iter_mut() {
                *v = 1.0 / (1.0 + (-*v).exp());
            }
        }
        Ok(u)
    }

    /// Run one raw input through the network: standardize, featurize, apply
    /// the output weights.
    pub fn predict(&self, input: &DVector<f64>) -> SimResult<DVector<f64>> {
        let std_input = standardize(input, self.spec.standardize_divisor);
        let features = self.hidden_features(&std_input)?;
        Ok(self.w_out.transpose() * features)
    }

    /// Batched prediction, one raw sample per row in, one output per row out.
    pub fn predict_batch(&self, inputs: &DMatrix<f64>) -> SimResult<DMatrix<f64>> {
        if inputs.ncols() != self.spec.n_input {
            return Err(SimError::InvalidArgument(format!(
                "input width {} does not match the architecture's {}",
                inputs.ncols(),
                self.spec.n_input
            )));
        }
        let mut std_inputs = inputs.clone();
        standardize_rows(&mut std_inputs, self.spec.standardize_divisor);
        let features = hidden_matrix(&self.spec, &self.w_in, &self.bias, &std_inputs);
        Ok(features * &self.w_out)
    }

    /// Write the model to a flat binary file: a little-endian `u64` header
    /// length, a JSON header, then the weight arrays as little-endian 64-bit
    /// floats in storage order. Round-trips are bit-exact.
    pub fn save(&self, path: &Path) -> SimResult<()> {
        let header = serde_json::to_vec(&ModelHeader {
            spec: self.spec,
            n_hidden: self.spec.n_hidden,
            n_input: self.spec.n_input,
            n_output: self.spec.n_output,
        })?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for x in self
            .w_in
            .iter()
            .chain(self.bias.iter())
            .chain(self.w_out.iter())
        {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a model written by [`ElmModel::save`].
    pub fn load(path: &Path) -> SimResult<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut len_bytes = [0u8; 8];
        r.read_exact(&mut len_bytes)?;
        let header_len = u64::from_le_bytes(len_bytes) as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes)?;
        let h: ModelHeader = serde_json::from_slice(&header_bytes)?;
        let count = h.n_hidden * h.n_input + h.n_hidden + h.n_hidden * h.n_output;
        let mut vals = Vec::with_capacity(count);
        let mut buf = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            vals.push(f64::from_le_bytes(buf));
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(SimError::Config("model file has trailing bytes".into()));
        }
        let wi_end = h.n_hidden * h.n_input;
        let b_end = wi_end + h.n_hidden;
        Ok(ElmModel {
            spec: h.spec,
            w_in: DMatrix::from_column_slice(h.n_hidden, h.n_input, &vals[..wi_end]),
            bias: DVector::from_column_slice(&vals[wi_end..b_end]),
            w_out: DMatrix::from_column_slice(h.n_hidden, h.n_output, &vals[b_end..]),
        })
    }
}
