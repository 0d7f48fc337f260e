//! Active-learning loop on synthetic surrogate tasks.
//!
//! Each round trains a regression proxy and a linear softmax classifier on
//! the labeled set, freezes the proxy, runs the configured strategy over the
//! unlabeled pool, moves the chosen samples into the labeled set, and reports
//! test metrics of the retrained models.

use std::io::Write;
use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::acquisition::{select, LogitsMatrix, PoolState, Strategy};
use crate::config::{KernelConfig, ProxyConfig, RunConfig, TaskConfig};
use crate::error::{check_len, Error, Result};
use crate::io::format_significant;
use crate::linalg::DenseMatrix;
use crate::proxy::{Activation, ProxyNetwork};

/// Per-purpose seed streams derived from one base seed.
const STREAM_INITIAL: u64 = 1;
const STREAM_PROXY: u64 = 2;
const STREAM_SELECT: u64 = 3;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn derive_seed(base: u64, stream: u64, round: usize) -> u64 {
    splitmix(splitmix(base ^ splitmix(stream)) ^ round as u64)
}

/// Gaussian-mixture features with regression targets from a fixed random
/// two-layer network and Poisson box counts.
#[derive(Clone, Debug)]
pub struct SyntheticTask {
    pub config: TaskConfig,
    /// `d × N`.
    pub pool_features: DenseMatrix,
    /// `target_dim × N`.
    pub pool_targets: DenseMatrix,
    pub pool_labels: Vec<usize>,
    pub box_counts: Vec<u64>,
    pub test_features: DenseMatrix,
    pub test_targets: DenseMatrix,
    pub test_labels: Vec<usize>,
}

impl SyntheticTask {
    pub fn generate(config: &TaskConfig) -> Result<Self> {
        let TaskConfig {
            seed,
            dim,
            pool_size,
            classes,
            test_fraction,
            box_rate,
            target_dim,
            noise_std,
            class_decay,
            mean_scale,
            teacher_width,
        } = *config;
        if dim == 0 || pool_size == 0 || classes == 0 || target_dim == 0 || teacher_width == 0 {
            return Err(Error::ConfigInvalid("task sizes must be positive".into()));
        }
        let test_size = ((pool_size as f64 * test_fraction).round() as usize).max(1);
        let total = pool_size + test_size;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let means: Vec<Vec<f64>> = (0..classes)
            .map(|_| {
                (0..dim)
                    .map(|_| mean_scale * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let weights: Vec<f64> = (0..classes).map(|c| class_decay.powi(c as i32)).collect();
        let class_dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::ConfigInvalid(format!("class prior: {e}")))?;
        let labels: Vec<usize> = (0..total).map(|_| class_dist.sample(&mut rng)).collect();
        let features = DenseMatrix::from_fn(dim, total, |i, j| {
            means[labels[j]][i] + rng.sample::<f64, _>(StandardNormal)
        })?;

        let teacher = ProxyNetwork::init(
            dim,
            &[teacher_width],
            target_dim,
            0.1,
            Activation::Relu,
            rng.next_u64(),
        )?;
        let mut raw = Vec::with_capacity(total);
        for j in 0..total {
            raw.push(teacher.predict(features.column(j))?);
        }
        // standardize each target coordinate over pool and test together
        let mut stats = Vec::with_capacity(target_dim);
        for k in 0..target_dim {
            let mean = raw.iter().map(|r| r[k]).sum::<f64>() / total as f64;
            let var = raw.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / total as f64;
            stats.push((mean, if var > 0.0 { var.sqrt() } else { 1.0 }));
        }
        let targets = DenseMatrix::from_fn(target_dim, total, |k, j| {
            let (mean, std) = stats[k];
            (raw[j][k] - mean) / std + noise_std * rng.sample::<f64, _>(StandardNormal)
        })?;

        let box_counts: Vec<u64> = if box_rate > 0.0 {
            let poisson = Poisson::new(box_rate)
                .map_err(|e| Error::ConfigInvalid(format!("box_rate: {e}")))?;
            (0..pool_size)
                .map(|_| 1 + poisson.sample(&mut rng) as u64)
                .collect()
        } else {
            vec![1; pool_size]
        };

        let pool: Vec<usize> = (0..pool_size).collect();
        let test: Vec<usize> = (pool_size..total).collect();
        Ok(Self {
            config: config.clone(),
            pool_features: features.select_columns(&pool)?,
            pool_targets: targets.select_columns(&pool)?,
            pool_labels: labels[..pool_size].to_vec(),
            box_counts,
            test_features: features.select_columns(&test)?,
            test_targets: targets.select_columns(&test)?,
            test_labels: labels[pool_size..].to_vec(),
        })
    }

    pub fn pool_size(&self) -> usize {
        self.pool_features.cols()
    }

    pub fn dim(&self) -> usize {
        self.pool_features.rows()
    }

    pub fn classes(&self) -> usize {
        self.config.classes
    }
}

/// Multinomial logistic regression: `logits = W m + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxClassifier {
    /// `C × d`.
    pub weight: DenseMatrix,
    pub bias: Vec<f64>,
}

impl SoftmaxClassifier {
    pub fn zeros(classes: usize, dim: usize) -> Self {
        Self {
            weight: DenseMatrix::zeros(classes, dim),
            bias: vec![0.0; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn logits(&self, m: &[f64]) -> Vec<f64> {
        let mut z = self.bias.clone();
        for (j, &x) in m.iter().enumerate() {
            for (zc, w) in z.iter_mut().zip(self.weight.column(j)) {
                *zc += w * x;
            }
        }
        z
    }

    /// `C × N` logits of the columns of `features`.
    pub fn logits_matrix(&self, features: &DenseMatrix) -> Result<DenseMatrix> {
        check_len(self.weight.cols(), features.rows())?;
        let cols: Vec<Vec<f64>> = features.columns().map(|m| self.logits(m)).collect();
        if cols.is_empty() {
            return Ok(DenseMatrix::zeros(self.classes(), 0));
        }
        DenseMatrix::from_columns(&cols)
    }

    /// Argmax class; ties resolve to the lowest class index.
    pub fn predict(&self, m: &[f64]) -> usize {
        let z = self.logits(m);
        let mut best = 0;
        for (c, &v) in z.iter().enumerate() {
            if v > z[best] {
                best = c;
            }
        }
        best
    }

    /// Full-batch gradient descent on mean cross-entropy.
    pub fn train(
        &mut self,
        features: &DenseMatrix,
        labels: &[usize],
        epochs: usize,
        lr: f64,
    ) -> Result<()> {
        check_len(features.cols(), labels.len())?;
        check_len(self.weight.cols(), features.rows())?;
        let (classes, dim, n) = (self.classes(), features.rows(), labels.len());
        if n == 0 {
            return Ok(());
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: classes,
            });
        }
        let mut w = self.weight.data().to_vec();
        for _ in 0..epochs {
            let mut gw = vec![0.0; classes * dim];
            let mut gb = vec![0.0; classes];
            for (j, &y) in labels.iter().enumerate() {
                let m = features.column(j);
                let mut p = self.logits(m);
                let top = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in p.iter_mut() {
                    *v = (*v - top).exp();
                    total += *v;
                }
                for (c, v) in p.iter_mut().enumerate() {
                    *v /= total;
                    if c == y {
                        *v -= 1.0;
                    }
                    gb[c] += *v;
                    for (i, &x) in m.iter().enumerate() {
                        gw[i * classes + c] += *v * x;
                    }
                }
            }
            let step = lr / n as f64;
            for (wv, g) in w.iter_mut().zip(&gw) {
                *wv -= step * g;
            }
            for (b, g) in self.bias.iter_mut().zip(&gb) {
                *b -= step * g;
            }
            self.weight = DenseMatrix::new(classes, dim, w.clone())?;
        }
        Ok(())
    }
}

/// Models trained on one labeled set.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub proxy: ProxyNetwork,
    pub classifier: SoftmaxClassifier,
}

/// `(proxy MSE over targets, classifier accuracy)` on the given split.
pub fn evaluate(
    model: &TrainedModel,
    features: &DenseMatrix,
    targets: &DenseMatrix,
    labels: &[usize],
) -> Result<(f64, f64)> {
    check_len(features.cols(), labels.len())?;
    let mse = model.proxy.mse(features, targets)?;
    let correct = features
        .columns()
        .zip(labels)
        .filter(|(m, &y)| model.classifier.predict(m) == y)
        .count();
    let accuracy = if labels.is_empty() {
        0.0
    } else {
        correct as f64 / labels.len() as f64
    };
    Ok((mse, accuracy))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub initial_labeled: usize,
    pub batch_size: usize,
    pub rounds: usize,
    pub budget: usize,
    pub strategy: Strategy,
    pub kernel: KernelConfig,
    pub sigma_ent: f64,
    pub epsilon: f64,
    pub proxy: ProxyConfig,
    pub classifier_epochs: usize,
    pub classifier_lr: f64,
    pub seed: u64,
    pub timing: bool,
}

impl LoopConfig {
    pub fn from_run_config(cfg: &RunConfig) -> Self {
        Self {
            initial_labeled: cfg.initial_labeled(),
            batch_size: cfg.batch_size(),
            rounds: cfg.rounds(),
            budget: cfg.budget(),
            strategy: cfg.strategy,
            kernel: cfg.kernel.clone(),
            sigma_ent: cfg.sigma_ent(),
            epsilon: cfg.epsilon,
            proxy: cfg.proxy.clone(),
            classifier_epochs: cfg.simulation.classifier_epochs,
            classifier_lr: cfg.simulation.classifier_lr,
            seed: cfg.seed,
            timing: cfg.simulation.timing,
        }
    }

    fn validate(&self, task: &SyntheticTask) -> Result<()> {
        if self.initial_labeled == 0 {
            return Err(Error::ConfigInvalid(
                "initial_labeled must be at least 1".into(),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::ConfigInvalid("batch_size must be at least 1".into()));
        }
        let needed = self.initial_labeled + self.rounds * self.batch_size;
        if needed > task.pool_size() {
            return Err(Error::ConfigInvalid(format!(
                "m + R·n = {needed} exceeds pool size {}",
                task.pool_size()
            )));
        }
        Ok(())
    }

    /// Samples acquired over the whole loop: `min(B, R·n)`.
    pub fn total_selected(&self) -> usize {
        self.budget.min(self.rounds * self.batch_size)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub labeled: usize,
    pub boxes: u64,
    pub mse: f64,
    pub accuracy: f64,
    pub seconds: f64,
}

/// Outcome of a full loop: the per-round reports and the final pool state.
#[derive(Clone, Debug)]
pub struct LoopOutcome {
    pub reports: Vec<RoundReport>,
    pub pool: PoolState,
    /// Indices chosen in each round, in selection order.
    pub selections: Vec<Vec<usize>>,
}

fn train_models(
    task: &SyntheticTask,
    cfg: &LoopConfig,
    labeled: &[usize],
    round: usize,
) -> Result<TrainedModel> {
    let inputs = task.pool_features.select_columns(labeled)?;
    let targets = task.pool_targets.select_columns(labeled)?;
    let labels: Vec<usize> = labeled.iter().map(|&i| task.pool_labels[i]).collect();
    let seed = derive_seed(cfg.seed, STREAM_PROXY, round);
    let mut proxy = cfg.proxy.init(task.dim(), task.pool_targets.rows(), seed)?;
    proxy.train_mse(&inputs, &targets, cfg.proxy.epochs, cfg.proxy.lr)?;
    let mut classifier = SoftmaxClassifier::zeros(task.classes(), task.dim());
    classifier.train(&inputs, &labels, cfg.classifier_epochs, cfg.classifier_lr)?;
    Ok(TrainedModel { proxy, classifier })
}

fn report(
    task: &SyntheticTask,
    model: &TrainedModel,
    pool: &PoolState,
    round: usize,
    seconds: f64,
) -> Result<RoundReport> {
    let (mse, accuracy) = evaluate(
        model,
        &task.test_features,
        &task.test_targets,
        &task.test_labels,
    )?;
    Ok(RoundReport {
        round,
        labeled: pool.labeled().len(),
        boxes: pool.spent_budget(),
        mse,
        accuracy,
        seconds,
    })
}

/// Runs round 0 (pretraining on the initial labeled set) and then up to `R`
/// acquisition rounds, stopping once the budget is used.
pub fn run_loop(task: &SyntheticTask, cfg: &LoopConfig) -> Result<LoopOutcome> {
    cfg.validate(task)?;
    let n_pool = task.pool_size();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_INITIAL, 0));
    let initial: Vec<usize> = index::sample(&mut rng, n_pool, cfg.initial_labeled).into_vec();
    let mut pool = PoolState::with_costs(&initial, task.box_counts.clone())?;

    let mut model = train_models(task, cfg, pool.labeled(), 0)?;
    let mut reports = vec![report(task, &model, &pool, 0, 0.0)?];
    let mut selections = Vec::new();
    let mut acquired = 0;
    for round in 1..=cfg.rounds {
        let batch = cfg.batch_size.min(cfg.budget - acquired);
        if batch == 0 {
            break;
        }
        let logits = LogitsMatrix::new(model.classifier.logits_matrix(&task.pool_features)?);
        let snapshot = model.proxy.snapshot();
        let kernel = cfg
            .kernel
            .to_spec(cfg.kernel.kind.needs_proxy().then_some(snapshot))?;
        let acq = crate::acquisition::AcquisitionConfig::new(batch, kernel)
            .with_sigma_ent(cfg.sigma_ent)
            .with_epsilon(cfg.epsilon)
            .with_seed(derive_seed(cfg.seed, STREAM_SELECT, round));

        let start = Instant::now();
        let result = select(cfg.strategy, &task.pool_features, &logits, &pool, &acq)?;
        let seconds = if cfg.timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        log::debug!("round {round}: selected {} samples", result.chosen.len());

        pool.label(&result.chosen)?;
        acquired += result.chosen.len();
        selections.push(result.chosen);
        model = train_models(task, cfg, pool.labeled(), round)?;
        reports.push(report(task, &model, &pool, round, seconds)?);
    }
    Ok(LoopOutcome {
        reports,
        pool,
        selections,
    })
}

pub const REPORT_HEADER: [&str; 6] = ["round", "labeled", "boxes", "mse", "accuracy", "seconds"];

/// Writes the report CSV; floats carry 9 significant digits.
pub fn write_report_csv<W: Write>(reports: &[RoundReport], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let to_io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    writer.write_record(REPORT_HEADER).map_err(to_io)?;
    for r in reports {
        writer
            .write_record([
                r.round.to_string(),
                r.labeled.to_string(),
                r.boxes.to_string(),
                format_significant(r.mse, 9),
                format_significant(r.accuracy, 9),
                format_significant(r.seconds, 9),
            ])
            .map_err(to_io)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn report_csv_string(reports: &[RoundReport]) -> Result<String> {
    let mut buf = Vec::new();
    write_report_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is ascii"))
}
