//! In-memory entry points shared by the CLI and by foreign-language bindings.
//!
//! Every function takes borrowed inputs and never mutates them. Matrices
//! passed as slices are column-major.

use crate::acquisition::{self, LogitsMatrix, PoolState, SelectionResult, Strategy};
use crate::coding_rate::{kernel_coding_rate, CodingRateParams};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::kernels::{self, GramMatrix};
use crate::linalg::DenseMatrix;
use crate::proxy::ProxyNetwork;

/// Copies a column-major `rows × cols` slice into a matrix.
pub fn matrix_from_slice(data: &[f64], rows: usize, cols: usize) -> Result<DenseMatrix> {
    DenseMatrix::new(rows, cols, data.to_vec())
}

/// Trains a fresh proxy on the given columns of `features` against the
/// matching columns of `targets`, seeded by the config seed.
pub fn train_proxy(
    cfg: &RunConfig,
    features: &DenseMatrix,
    targets: &DenseMatrix,
    train: &[usize],
) -> Result<(ProxyNetwork, Vec<f64>)> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("proxy training set is empty".into()));
    }
    let inputs = features.select_columns(train)?;
    let outputs = targets.select_columns(train)?;
    let mut net = cfg.proxy.init(features.rows(), targets.rows(), cfg.seed)?;
    let curve = net.train_mse(&inputs, &outputs, cfg.proxy.epochs, cfg.proxy.lr)?;
    Ok((net, curve))
}

/// Proxy used by gradient kernels when no checkpoint or targets are available:
/// the freshly initialized network.
pub fn untrained_proxy(cfg: &RunConfig, input_dim: usize) -> Result<ProxyNetwork> {
    cfg.proxy.init(input_dim, cfg.proxy.output_dim, cfg.seed)
}

fn needs_logits(cfg: &RunConfig) -> bool {
    match cfg.strategy {
        Strategy::Entropy => true,
        Strategy::Kecor => cfg.sigma_ent() > 0.0,
        Strategy::Random | Strategy::Coreset => false,
    }
}

/// Runs the configured strategy over every sample not in `labeled`.
///
/// `logits` may be omitted when the strategy ignores entropy; `proxy` is
/// required for the gradient kernels.
pub fn select(
    cfg: &RunConfig,
    features: &DenseMatrix,
    logits: Option<&LogitsMatrix>,
    labeled: &[usize],
    proxy: Option<&ProxyNetwork>,
) -> Result<SelectionResult> {
    cfg.validate()?;
    let pool = PoolState::new(features.cols(), labeled)?;
    let placeholder;
    let logits = match logits {
        Some(l) => l,
        None if needs_logits(cfg) => {
            return Err(Error::ConfigInvalid(format!(
                "strategy `{}` with sigma_ent {} needs logits",
                cfg.strategy,
                cfg.sigma_ent()
            )))
        }
        None => {
            placeholder = LogitsMatrix::new(DenseMatrix::zeros(1, features.cols()));
            &placeholder
        }
    };
    let acq = cfg.acquisition(proxy.map(ProxyNetwork::snapshot))?;
    acquisition::select(cfg.strategy, features, logits, &pool, &acq)
}

/// Gram matrix of the configured kernel over `indices`.
pub fn gram(
    cfg: &RunConfig,
    features: &DenseMatrix,
    indices: &[usize],
    proxy: Option<&ProxyNetwork>,
) -> Result<GramMatrix> {
    cfg.validate()?;
    let spec = cfg.kernel.to_spec(proxy.map(ProxyNetwork::snapshot))?;
    kernels::gram(&spec, features, indices)
}

/// Kernel coding rate of `indices` with coefficient `|indices| / (ε² d)`.
pub fn coding_rate(
    cfg: &RunConfig,
    features: &DenseMatrix,
    indices: &[usize],
    proxy: Option<&ProxyNetwork>,
) -> Result<f64> {
    let k = gram(cfg, features, indices, proxy)?;
    let params = CodingRateParams::new(cfg.epsilon, features.rows(), indices.len())?;
    kernel_coding_rate(&k, &params)
}

/// Slice form of [`select`]: features are `dim × samples`, logits
/// `classes × samples`.
pub fn select_slices(
    cfg: &RunConfig,
    features: &[f64],
    dim: usize,
    samples: usize,
    logits: Option<(&[f64], usize)>,
    labeled: &[usize],
    proxy: Option<&ProxyNetwork>,
) -> Result<SelectionResult> {
    let features = matrix_from_slice(features, dim, samples)?;
    let logits = logits
        .map(|(data, classes)| matrix_from_slice(data, classes, samples).map(LogitsMatrix::new))
        .transpose()?;
    select(cfg, &features, logits.as_ref(), labeled, proxy)
}

/// Slice form of [`gram`]; returns the column-major `|indices|²` entries.
pub fn gram_slices(
    cfg: &RunConfig,
    features: &[f64],
    dim: usize,
    samples: usize,
    indices: &[usize],
    proxy: Option<&ProxyNetwork>,
) -> Result<Vec<f64>> {
    let features = matrix_from_slice(features, dim, samples)?;
    Ok(gram(cfg, &features, indices, proxy)?.matrix.into_data())
}

/// Slice form of [`coding_rate`].
pub fn coding_rate_slices(
    cfg: &RunConfig,
    features: &[f64],
    dim: usize,
    samples: usize,
    indices: &[usize],
    proxy: Option<&ProxyNetwork>,
) -> Result<f64> {
    let features = matrix_from_slice(features, dim, samples)?;
    coding_rate(cfg, &features, indices, proxy)
}
