//! Coding rate of a feature matrix and kernel coding rate of a sample set.
//!
//! ```text
//! coding rate         R(Z, ε)  = ½ log det(I_d + d/(ε² n) · Z Zᵀ)
//! kernel coding rate  Rᴷ(M, ε) = ½ log det(I_n + n/(ε² d) · K)
//! ```
//!
//! Greedy growth works on `A_S = I + c·K_S` at a frozen coefficient `c`. The
//! gain of adding `x` is `½ log(1 + c·k_xx − ‖L⁻¹ (c·k_Sx)‖²)` where
//! `L Lᵀ = A_S`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernels::GramMatrix;
use crate::linalg::{dot, logdet_eye_plus, CholeskyFactor, DenseMatrix};

/// Distortion used when none is configured.
pub const DEFAULT_EPSILON: f64 = 0.5;

/// Schur terms in `[-SCHUR_CLAMP·max(1, c·k_xx), 0)` are treated as zero.
pub const SCHUR_CLAMP: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodingRateParams {
    pub epsilon: f64,
    pub feature_dim: usize,
    pub coeff_n: usize,
}

impl CodingRateParams {
    pub fn new(epsilon: f64, feature_dim: usize, coeff_n: usize) -> Result<Self> {
        let params = Self {
            epsilon,
            feature_dim,
            coeff_n,
        };
        let c = params.coefficient();
        if epsilon <= 0.0 || c <= 0.0 || !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "coding-rate coefficient n/(ε²d) must be finite and positive (ε = {epsilon}, d = {feature_dim}, n = {coeff_n})"
            )));
        }
        Ok(params)
    }

    /// `n / (ε² d)`.
    pub fn coefficient(&self) -> f64 {
        self.coeff_n as f64 / (self.epsilon * self.epsilon * self.feature_dim as f64)
    }
}

/// `½ log det(I_d + d/(ε² n) Z Zᵀ)` for a `d × n` feature matrix, evaluated in
/// whichever of the `d × d` or `n × n` forms is smaller.
pub fn coding_rate_features(z: &DenseMatrix, epsilon: f64) -> Result<f64> {
    let (d, n) = (z.rows(), z.cols());
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument(
            "coding rate needs a non-empty feature matrix".into(),
        ));
    }
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let alpha = d as f64 / (epsilon * epsilon * n as f64);
    let gram = if n <= d {
        z.gram_columns()
    } else {
        z.gram_rows()
    };
    Ok(0.5 * logdet_eye_plus(alpha, &gram)?)
}

/// `½ log det(I + c K)` with `c = coeff_n / (ε² d)`.
pub fn kernel_coding_rate(k: &GramMatrix, params: &CodingRateParams) -> Result<f64> {
    kernel_coding_rate_matrix(&k.matrix, params)
}

pub fn kernel_coding_rate_matrix(k: &DenseMatrix, params: &CodingRateParams) -> Result<f64> {
    Ok(0.5 * logdet_eye_plus(params.coefficient(), k)?)
}

fn clamp_schur(term: f64, scale: f64, pivot: usize) -> Result<f64> {
    if term >= 0.0 {
        Ok(term)
    } else if term >= -SCHUR_CLAMP * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::NotPositiveDefinite { pivot, value: term })
    }
}

/// Gain of adding a candidate to the set whose `I + c K_S` is factored by
/// `factor`. `k_col` holds `K(x, s)` for the members `s` in factor order.
pub fn marginal_gain(factor: &CholeskyFactor, k_col: &[f64], k_xx: f64, c: f64) -> Result<f64> {
    check_len(factor.dim(), k_col.len())?;
    let scaled: Vec<f64> = k_col.iter().map(|k| c * k).collect();
    let v = factor.solve_lower(&scaled)?;
    let term = clamp_schur(c * k_xx - dot(&v, &v), c * k_xx, factor.dim())?;
    Ok(0.5 * term.ln_1p())
}

/// Incremental greedy bookkeeping over a candidate pool.
///
/// For each candidate `x` it keeps `v_x = L⁻¹ (c·k_Sx)` and the Schur term
/// `c·k_xx − ‖v_x‖²`, so adding a member costs `O(|pool| · |S|)` instead of a
/// fresh triangular solve per candidate.
#[derive(Clone, Debug)]
pub struct GreedyState {
    coefficient: f64,
    factor: CholeskyFactor,
    members: Vec<usize>,
    diag: Vec<f64>,
    solved: Vec<Vec<f64>>,
    schur: Vec<f64>,
}

impl GreedyState {
    /// `diag[x]` is `K(x, x)` for every candidate position.
    pub fn new(coefficient: f64, diag: Vec<f64>) -> Self {
        let schur = diag.iter().map(|k| coefficient * k).collect();
        Self {
            coefficient,
            factor: CholeskyFactor::empty(),
            members: Vec::new(),
            solved: vec![Vec::new(); diag.len()],
            diag,
            schur,
        }
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// `½ log det(I + c K_S)` of the current members.
    pub fn value(&self) -> f64 {
        0.5 * self.factor.logdet()
    }

    /// Gain of adding candidate position `x`.
    pub fn gain(&self, x: usize) -> Result<f64> {
        let term = clamp_schur(
            self.schur[x],
            self.coefficient * self.diag[x],
            self.members.len(),
        )?;
        Ok(0.5 * term.ln_1p())
    }

    /// Adds position `x`; `k_col[y]` must be `K(y, x)` for every candidate `y`.
    pub fn push(&mut self, x: usize, k_col: &[f64]) -> Result<()> {
        check_len(self.diag.len(), k_col.len())?;
        let term = clamp_schur(
            self.schur[x],
            self.coefficient * self.diag[x],
            self.members.len(),
        )?;
        let pivot = (1.0 + term).sqrt();
        let row = std::mem::take(&mut self.solved[x]);
        self.factor.push_row(&row, pivot)?;
        let c = self.coefficient;
        for y in 0..self.diag.len() {
            if y == x {
                continue;
            }
            let e = (c * k_col[y] - dot(&row, &self.solved[y])) / pivot;
            self.solved[y].push(e);
            self.schur[y] -= e * e;
        }
        let mut own = row;
        own.push(pivot);
        self.solved[x] = own;
        self.schur[x] = 0.0;
        self.members.push(x);
        Ok(())
    }
}
