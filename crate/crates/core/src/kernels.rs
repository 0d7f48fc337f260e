//! Pairwise kernels over latent features and Gram-matrix assembly.
//!
//! Gradient kernels (`last`, `ntk`) evaluate through a frozen proxy snapshot:
//! one [`LayerTrace`] is computed per sample and every pair reuses it, so an
//! `n × n` Gram matrix costs `n` forward passes.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, squared_distance, DenseMatrix};
use crate::proxy::{LayerTrace, ProxySnapshot};

/// `d × N` feature store, one column per sample.
pub type FeatureMatrix = DenseMatrix;

/// Laplace kernel width used when none is configured.
pub const DEFAULT_RBF_SIGMA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Rbf,
    Last,
    Ntk,
}

impl KernelKind {
    pub fn needs_proxy(self) -> bool {
        matches!(self, KernelKind::Last | KernelKind::Ntk)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Linear => "linear",
            KernelKind::Rbf => "rbf",
            KernelKind::Last => "last",
            KernelKind::Ntk => "ntk",
        }
    }

    pub const ALL: [KernelKind; 4] = [
        KernelKind::Linear,
        KernelKind::Rbf,
        KernelKind::Last,
        KernelKind::Ntk,
    ];
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelKind::Linear),
            "rbf" => Ok(KernelKind::Rbf),
            "last" => Ok(KernelKind::Last),
            "ntk" => Ok(KernelKind::Ntk),
            other => Err(Error::ConfigInvalid(format!(
                "unknown kernel kind `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub rbf_sigma: f64,
    pub normalize: bool,
    pub proxy: Option<ProxySnapshot>,
}

impl KernelSpec {
    pub fn linear() -> Self {
        Self {
            kind: KernelKind::Linear,
            rbf_sigma: DEFAULT_RBF_SIGMA,
            normalize: false,
            proxy: None,
        }
    }

    pub fn rbf(sigma: f64) -> Self {
        Self {
            kind: KernelKind::Rbf,
            rbf_sigma: sigma,
            ..Self::linear()
        }
    }

    pub fn last(proxy: ProxySnapshot) -> Self {
        Self {
            kind: KernelKind::Last,
            proxy: Some(proxy),
            ..Self::linear()
        }
    }

    pub fn ntk(proxy: ProxySnapshot) -> Self {
        Self {
            kind: KernelKind::Ntk,
            proxy: Some(proxy),
            ..Self::linear()
        }
    }

    pub fn normalized(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match (self.kind.needs_proxy(), self.proxy.is_some()) {
            (true, false) => {
                return Err(Error::ConfigInvalid(format!(
                    "kernel `{}` requires a proxy network",
                    self.kind
                )));
            }
            (false, true) => {
                return Err(Error::ConfigInvalid(format!(
                    "kernel `{}` does not take a proxy network",
                    self.kind
                )));
            }
            _ => {}
        }
        if self.kind == KernelKind::Rbf && !(self.rbf_sigma > 0.0 && self.rbf_sigma.is_finite()) {
            return Err(Error::ConfigInvalid(format!(
                "rbf_sigma must be positive, got {}",
                self.rbf_sigma
            )));
        }
        Ok(())
    }
}

/// `⟨mi, mj⟩`.
pub fn kernel_linear(mi: &[f64], mj: &[f64]) -> Result<f64> {
    check_len(mi.len(), mj.len())?;
    Ok(dot(mi, mj))
}

/// Laplace kernel `exp(−‖mi − mj‖₂ / σ)`.
pub fn kernel_rbf(mi: &[f64], mj: &[f64], sigma: f64) -> Result<f64> {
    check_len(mi.len(), mj.len())?;
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rbf sigma must be positive, got {sigma}"
        )));
    }
    Ok((-squared_distance(mi, mj).sqrt() / sigma).exp())
}

fn check_traces(ti: &LayerTrace, tj: &LayerTrace) -> Result<()> {
    if ti.version != tj.version {
        return Err(Error::SnapshotMismatch(ti.version, tj.version));
    }
    check_len(ti.num_layers(), tj.num_layers())
}

fn layer_term(ti: &LayerTrace, tj: &LayerTrace, l: usize) -> f64 {
    dot(&ti.augmented_inputs[l], &tj.augmented_inputs[l])
        * dot(ti.output_jacobians[l].data(), tj.output_jacobians[l].data())
}

/// Empirical NTK: `Σ_l ⟨ã_i, ã_j⟩ · ⟨J_i, J_j⟩_F` over all layers, where `J`
/// is the output Jacobian with respect to that layer's pre-activation.
pub fn kernel_ntk(ti: &LayerTrace, tj: &LayerTrace) -> Result<f64> {
    check_traces(ti, tj)?;
    Ok(ntk_unchecked(ti, tj))
}

fn ntk_unchecked(ti: &LayerTrace, tj: &LayerTrace) -> f64 {
    (0..ti.num_layers()).map(|l| layer_term(ti, tj, l)).sum()
}

/// Last-layer gradient kernel: the output-layer term of [`kernel_ntk`].
pub fn kernel_last(ti: &LayerTrace, tj: &LayerTrace) -> Result<f64> {
    check_traces(ti, tj)?;
    Ok(last_unchecked(ti, tj))
}

fn last_unchecked(ti: &LayerTrace, tj: &LayerTrace) -> f64 {
    layer_term(ti, tj, ti.num_layers() - 1)
}

/// Per-sample state for evaluating a kernel over a fixed list of samples.
///
/// Positions `0..len()` refer to `indices()` in order.
pub struct PreparedKernel<'a> {
    spec: KernelSpec,
    features: &'a FeatureMatrix,
    indices: Vec<usize>,
    traces: Vec<LayerTrace>,
    raw_diag: Option<Vec<f64>>,
}

impl<'a> PreparedKernel<'a> {
    pub fn new(spec: &KernelSpec, features: &'a FeatureMatrix, indices: &[usize]) -> Result<Self> {
        spec.validate()?;
        for &i in indices {
            if i >= features.cols() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: features.cols(),
                });
            }
        }
        let traces = match &spec.proxy {
            Some(proxy) if spec.kind.needs_proxy() => {
                check_len(proxy.input_dim(), features.rows())?;
                indices
                    .par_iter()
                    .map(|&i| proxy.forward(features.column(i)).map(|(_, t)| t))
                    .collect::<Result<Vec<_>>>()?
            }
            _ => Vec::new(),
        };
        let mut prepared = Self {
            spec: spec.clone(),
            features,
            indices: indices.to_vec(),
            traces,
            raw_diag: None,
        };
        if spec.normalize {
            let diag = (0..prepared.len()).map(|a| prepared.raw(a, a)).collect();
            prepared.raw_diag = Some(diag);
        }
        Ok(prepared)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    fn raw(&self, a: usize, b: usize) -> f64 {
        match self.spec.kind {
            KernelKind::Linear => dot(
                self.features.column(self.indices[a]),
                self.features.column(self.indices[b]),
            ),
            KernelKind::Rbf => {
                let d2 = squared_distance(
                    self.features.column(self.indices[a]),
                    self.features.column(self.indices[b]),
                );
                (-d2.sqrt() / self.spec.rbf_sigma).exp()
            }
            KernelKind::Last => last_unchecked(&self.traces[a], &self.traces[b]),
            KernelKind::Ntk => ntk_unchecked(&self.traces[a], &self.traces[b]),
        }
    }

    /// Kernel value between positions `a` and `b` (normalized if requested).
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        match &self.raw_diag {
            None => self.raw(a, b),
            Some(diag) => {
                if a == b {
                    1.0
                } else if diag[a] > 0.0 && diag[b] > 0.0 {
                    self.raw(a, b) / (diag[a] * diag[b]).sqrt()
                } else {
                    0.0
                }
            }
        }
    }

    /// Kernel values between every prepared sample and position `b`.
    pub fn column(&self, b: usize) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|a| self.entry(a, b))
            .collect()
    }

    /// Full symmetric Gram matrix over the prepared samples.
    pub fn gram(&self) -> GramMatrix {
        let n = self.len();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| (0..=j).map(|i| self.entry(i, j)).collect())
            .collect();
        let mut data = vec![0.0; n * n];
        for (j, col) in upper.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[j * n + i] = v;
                data[i * n + j] = v;
            }
        }
        GramMatrix {
            indices: self.indices.clone(),
            matrix: DenseMatrix::new(n, n, data).expect("kernel values are finite"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    pub indices: Vec<usize>,
    pub matrix: DenseMatrix,
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Gram matrix `[K(m_i, m_j)]` over `indices`.
pub fn gram(spec: &KernelSpec, features: &FeatureMatrix, indices: &[usize]) -> Result<GramMatrix> {
    Ok(PreparedKernel::new(spec, features, indices)?.gram())
}
