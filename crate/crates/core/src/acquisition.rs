//! Batch acquisition strategies.
//!
//! `kecor` greedily maximizes the kernel coding rate of the batch plus
//! `σ_ent` times its mean classification entropy. Each greedy step credits a
//! candidate `gain(x | S) + σ_ent · H(x) / n`, so the step gains of a full
//! batch sum to the set objective. The baselines are uniform random sampling,
//! top-entropy, and k-center greedy (farthest-first) coreset selection.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coding_rate::{CodingRateParams, GreedyState, DEFAULT_EPSILON};
use crate::error::{check_len, Error, Result};
use crate::kernels::{FeatureMatrix, KernelSpec, PreparedKernel};
use crate::linalg::{squared_distance, DenseMatrix};

/// Entropy weight used when none is configured.
pub const DEFAULT_SIGMA_ENT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Kecor,
    Random,
    Entropy,
    Coreset,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Kecor => "kecor",
            Strategy::Random => "random",
            Strategy::Entropy => "entropy",
            Strategy::Coreset => "coreset",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kecor" => Ok(Strategy::Kecor),
            "random" => Ok(Strategy::Random),
            "entropy" => Ok(Strategy::Entropy),
            "coreset" => Ok(Strategy::Coreset),
            other => Err(Error::ConfigInvalid(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
}

#[derive(Clone, Debug)]
pub struct AcquisitionConfig {
    pub batch_size: usize,
    pub sigma_ent: f64,
    pub epsilon: f64,
    pub kernel: KernelSpec,
    pub tie_break: TieBreak,
    pub seed: u64,
}

impl AcquisitionConfig {
    pub fn new(batch_size: usize, kernel: KernelSpec) -> Self {
        Self {
            batch_size,
            sigma_ent: DEFAULT_SIGMA_ENT,
            epsilon: DEFAULT_EPSILON,
            kernel,
            tie_break: TieBreak::LowestIndex,
            seed: 0,
        }
    }

    pub fn with_sigma_ent(mut self, sigma_ent: f64) -> Self {
        self.sigma_ent = sigma_ent;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::ConfigInvalid("batch_size must be at least 1".into()));
        }
        if self.sigma_ent < 0.0 || !self.sigma_ent.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "sigma_ent must be nonnegative, got {}",
                self.sigma_ent
            )));
        }
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        self.kernel.validate()
    }
}

/// Labeled / unlabeled split of a sample store, with per-sample annotation
/// cost (e.g. box counts) and the cost spent so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    annotation_cost: Vec<u64>,
    spent_budget: u64,
}

impl PoolState {
    /// Every index in `0..total` not in `labeled` is unlabeled. Costs default to 1.
    pub fn new(total: usize, labeled: &[usize]) -> Result<Self> {
        Self::with_costs(labeled, vec![1; total])
    }

    pub fn with_costs(labeled: &[usize], annotation_cost: Vec<u64>) -> Result<Self> {
        let total = annotation_cost.len();
        let mut seen = HashSet::with_capacity(labeled.len());
        for &i in labeled {
            if i >= total {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: total,
                });
            }
            if !seen.insert(i) {
                return Err(Error::InvalidArgument(format!("index {i} labeled twice")));
            }
        }
        let unlabeled = (0..total).filter(|i| !seen.contains(i)).collect();
        Ok(Self {
            labeled: labeled.to_vec(),
            unlabeled,
            annotation_cost,
            spent_budget: 0,
        })
    }

    /// Explicit split; the two sets must be disjoint and in range.
    pub fn from_sets(
        labeled: Vec<usize>,
        mut unlabeled: Vec<usize>,
        annotation_cost: Vec<u64>,
    ) -> Result<Self> {
        let total = annotation_cost.len();
        let mut seen = HashSet::new();
        for &i in labeled.iter().chain(&unlabeled) {
            if i >= total {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: total,
                });
            }
            if !seen.insert(i) {
                return Err(Error::InvalidArgument(format!(
                    "index {i} appears twice in the pool"
                )));
            }
        }
        unlabeled.sort_unstable();
        Ok(Self {
            labeled,
            unlabeled,
            annotation_cost,
            spent_budget: 0,
        })
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    /// Sorted ascending.
    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn total(&self) -> usize {
        self.annotation_cost.len()
    }

    pub fn annotation_cost(&self) -> &[u64] {
        &self.annotation_cost
    }

    pub fn spent_budget(&self) -> u64 {
        self.spent_budget
    }

    /// Moves `chosen` from the unlabeled to the labeled set and charges their cost.
    pub fn label(&mut self, chosen: &[usize]) -> Result<()> {
        let pick: HashSet<usize> = chosen.iter().copied().collect();
        if pick.len() != chosen.len() {
            return Err(Error::InvalidArgument(
                "duplicate index in selection".into(),
            ));
        }
        for &i in chosen {
            if self.unlabeled.binary_search(&i).is_err() {
                return Err(Error::InvalidArgument(format!(
                    "index {i} is not unlabeled"
                )));
            }
        }
        self.unlabeled.retain(|i| !pick.contains(i));
        for &i in chosen {
            self.labeled.push(i);
            self.spent_budget += self.annotation_cost[i];
        }
        Ok(())
    }

    fn require(&self, n: usize) -> Result<()> {
        if n > self.unlabeled.len() {
            return Err(Error::InsufficientPool {
                requested: n,
                available: self.unlabeled.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Pool indices in selection order.
    pub chosen: Vec<usize>,
    /// Score credited at each step.
    pub gains: Vec<f64>,
    pub objective: f64,
    pub entropy_term: f64,
}

/// Class logits, `C` rows. Each sample owns one or more consecutive columns
/// (one per predicted box).
#[derive(Clone, Debug, PartialEq)]
pub struct LogitsMatrix {
    values: DenseMatrix,
    offsets: Vec<usize>,
}

impl LogitsMatrix {
    /// One logit column per sample.
    pub fn new(values: DenseMatrix) -> Self {
        let offsets = (0..=values.cols()).collect();
        Self { values, offsets }
    }

    /// `counts[i]` consecutive columns belong to sample `i`.
    pub fn grouped(values: DenseMatrix, counts: &[usize]) -> Result<Self> {
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        offsets.push(0);
        for &c in counts {
            offsets.push(offsets[offsets.len() - 1] + c);
        }
        check_len(values.cols(), offsets[counts.len()])?;
        Ok(Self { values, offsets })
    }

    pub fn classes(&self) -> usize {
        self.values.rows()
    }

    pub fn samples(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn values(&self) -> &DenseMatrix {
        &self.values
    }

    pub fn vectors(&self, idx: usize) -> impl Iterator<Item = &[f64]> {
        (self.offsets[idx]..self.offsets[idx + 1]).map(move |j| self.values.column(j))
    }
}

/// Shannon entropy (nats) of `softmax(z)`.
pub fn softmax_entropy(z: &[f64]) -> f64 {
    if z.is_empty() {
        return 0.0;
    }
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_norm = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    let mut h = 0.0;
    for &v in z {
        let logp = v - max - log_norm;
        let p = logp.exp();
        if p > 0.0 {
            h -= p * logp;
        }
    }
    h.max(0.0)
}

/// Mean softmax entropy over the logit vectors of sample `idx` (0 if it has none).
pub fn mean_entropy(logits: &LogitsMatrix, idx: usize) -> Result<f64> {
    if idx >= logits.samples() {
        return Err(Error::IndexOutOfRange {
            index: idx,
            len: logits.samples(),
        });
    }
    let count = logits.offsets[idx + 1] - logits.offsets[idx];
    if count == 0 {
        return Ok(0.0);
    }
    Ok(logits.vectors(idx).map(softmax_entropy).sum::<f64>() / count as f64)
}

fn argmax_lowest(scores: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (pos, s) in scores.iter().enumerate() {
        if let Some(s) = *s {
            match best {
                Some((_, b)) if s <= b => {}
                _ => best = Some((pos, s)),
            }
        }
    }
    best.map(|(pos, _)| pos)
}

/// Entropy-regularized greedy kernel coding rate selection.
pub fn select_kecor(
    features: &FeatureMatrix,
    logits: &LogitsMatrix,
    pool: &PoolState,
    cfg: &AcquisitionConfig,
) -> Result<SelectionResult> {
    cfg.validate()?;
    check_len(features.cols(), logits.samples())?;
    check_len(features.cols(), pool.total())?;
    let n = cfg.batch_size;
    pool.require(n)?;

    let candidates = pool.unlabeled();
    let params = CodingRateParams::new(cfg.epsilon, features.rows(), n)?;
    let kernel = PreparedKernel::new(&cfg.kernel, features, candidates)?;
    let entropy: Vec<f64> = candidates
        .iter()
        .map(|&i| mean_entropy(logits, i))
        .collect::<Result<_>>()?;
    let diag: Vec<f64> = (0..kernel.len()).map(|a| kernel.entry(a, a)).collect();
    let mut state = GreedyState::new(params.coefficient(), diag);
    let mut taken = vec![false; candidates.len()];
    let entropy_weight = cfg.sigma_ent / n as f64;

    let mut chosen = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    for _ in 0..n {
        let scores: Vec<Option<f64>> = (0..candidates.len())
            .into_par_iter()
            .map(|x| {
                if taken[x] {
                    Ok(None)
                } else {
                    Ok(Some(state.gain(x)? + entropy_weight * entropy[x]))
                }
            })
            .collect::<Result<_>>()?;
        let best = argmax_lowest(&scores).expect("pool size checked above");
        let col = kernel.column(best);
        state.push(best, &col)?;
        taken[best] = true;
        chosen.push(candidates[best]);
        gains.push(scores[best].unwrap_or_default());
    }

    let mean_h = state.members().iter().map(|&x| entropy[x]).sum::<f64>() / n as f64;
    let entropy_term = cfg.sigma_ent * mean_h;
    Ok(SelectionResult {
        chosen,
        gains,
        objective: state.value() + entropy_term,
        entropy_term,
    })
}

/// Uniform sampling without replacement.
pub fn select_random(pool: &PoolState, n: usize, seed: u64) -> Result<SelectionResult> {
    pool.require(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, pool.unlabeled().len(), n);
    Ok(SelectionResult {
        chosen: picks.iter().map(|p| pool.unlabeled()[p]).collect(),
        gains: vec![0.0; n],
        objective: 0.0,
        entropy_term: 0.0,
    })
}

/// Top-`n` unlabeled samples by mean entropy, ties to the lowest index.
pub fn select_entropy(
    logits: &LogitsMatrix,
    pool: &PoolState,
    n: usize,
) -> Result<SelectionResult> {
    pool.require(n)?;
    let mut scored: Vec<(usize, f64)> = pool
        .unlabeled()
        .iter()
        .map(|&i| mean_entropy(logits, i).map(|h| (i, h)))
        .collect::<Result<_>>()?;
    // stable sort keeps ascending index order among equal entropies
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(n);
    let mean = if n == 0 {
        0.0
    } else {
        scored.iter().map(|s| s.1).sum::<f64>() / n as f64
    };
    Ok(SelectionResult {
        chosen: scored.iter().map(|s| s.0).collect(),
        gains: scored.iter().map(|s| s.1).collect(),
        objective: mean,
        entropy_term: mean,
    })
}

/// k-center greedy: repeatedly take the unlabeled point farthest from its
/// nearest labeled-or-chosen point. With no labeled points the first center is
/// the lowest unlabeled index; `_seed` is reserved.
///
/// Gains are the distances at pick time; the objective is the covering radius
/// of the remaining unlabeled points afterwards.
pub fn select_coreset(
    features: &FeatureMatrix,
    pool: &PoolState,
    n: usize,
    _seed: u64,
) -> Result<SelectionResult> {
    check_len(features.cols(), pool.total())?;
    pool.require(n)?;
    let candidates = pool.unlabeled();
    let nearest = |x: usize, centers: &[usize]| -> f64 {
        centers
            .iter()
            .map(|&c| squared_distance(features.column(x), features.column(c)))
            .fold(f64::INFINITY, f64::min)
    };
    let mut dist: Vec<f64> = candidates
        .par_iter()
        .map(|&x| nearest(x, pool.labeled()))
        .collect();
    let mut taken = vec![false; candidates.len()];
    let mut chosen = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    for _ in 0..n {
        let scores: Vec<Option<f64>> = dist
            .iter()
            .zip(&taken)
            .map(|(&d, &t)| if t { None } else { Some(d) })
            .collect();
        let best = argmax_lowest(&scores).expect("pool size checked above");
        taken[best] = true;
        let picked = candidates[best];
        chosen.push(picked);
        gains.push(if dist[best].is_finite() {
            dist[best].sqrt()
        } else {
            0.0
        });
        dist.par_iter_mut().enumerate().for_each(|(pos, d)| {
            let nd = squared_distance(features.column(candidates[pos]), features.column(picked));
            if nd < *d {
                *d = nd;
            }
        });
    }
    let radius = dist
        .iter()
        .zip(&taken)
        .filter(|(_, &t)| !t)
        .map(|(&d, _)| d)
        .fold(0.0, f64::max)
        .sqrt();
    Ok(SelectionResult {
        chosen,
        gains,
        objective: radius,
        entropy_term: 0.0,
    })
}

/// Dispatches on `strategy`; `cfg.batch_size` and `cfg.seed` apply to all of them.
pub fn select(
    strategy: Strategy,
    features: &FeatureMatrix,
    logits: &LogitsMatrix,
    pool: &PoolState,
    cfg: &AcquisitionConfig,
) -> Result<SelectionResult> {
    match strategy {
        Strategy::Kecor => select_kecor(features, logits, pool, cfg),
        Strategy::Random => select_random(pool, cfg.batch_size, cfg.seed),
        Strategy::Entropy => {
            check_len(pool.total(), logits.samples())?;
            select_entropy(logits, pool, cfg.batch_size)
        }
        Strategy::Coreset => select_coreset(features, pool, cfg.batch_size, cfg.seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn logits_from(cols: &[Vec<f64>]) -> LogitsMatrix {
        LogitsMatrix::new(DenseMatrix::from_columns(cols).unwrap())
    }

    #[test]
    fn entropy_extremes() {
        let uniform = logits_from(&[vec![0.3; 4]]);
        assert!((mean_entropy(&uniform, 0).unwrap() - 4f64.ln()).abs() < 1e-15);
        let peaked = logits_from(&[vec![50.0, 0.0, 0.0]]);
        let h = mean_entropy(&peaked, 0).unwrap();
        // exact value is ≈ 2·50·e⁻⁵⁰
        assert!((0.0..=1e-19).contains(&h), "{h}");
        assert!((h - 100.0 * (-50f64).exp()).abs() < 1e-21);
        assert!(mean_entropy(&peaked, 1).is_err());
    }

    #[test]
    fn entropy_matches_direct_formula() {
        let z = [0.2, -1.4, 2.2, 0.9, -0.1];
        let norm: f64 = z.iter().map(|v: &f64| v.exp()).sum();
        let direct: f64 = -z
            .iter()
            .map(|v| (v.exp() / norm) * (v.exp() / norm).ln())
            .sum::<f64>();
        let h = mean_entropy(&logits_from(&[z.to_vec()]), 0).unwrap();
        assert!((h - direct).abs() <= 1e-12);
        assert!(h <= 5f64.ln());
    }

    #[test]
    fn grouped_logits_average_over_boxes() {
        let values = DenseMatrix::from_columns(&[[0.0, 0.0], [9.0, -9.0], [1.0, 2.0]]).unwrap();
        let logits = LogitsMatrix::grouped(values, &[2, 0, 1]).unwrap();
        assert_eq!(logits.samples(), 3);
        let expect = (2f64.ln() + softmax_entropy(&[9.0, -9.0])) / 2.0;
        assert!((mean_entropy(&logits, 0).unwrap() - expect).abs() < 1e-15);
        assert_eq!(mean_entropy(&logits, 1).unwrap(), 0.0);
        assert!(LogitsMatrix::grouped(DenseMatrix::zeros(2, 3), &[1, 1]).is_err());
    }

    #[test]
    fn pool_state_bookkeeping() {
        let mut pool = PoolState::with_costs(&[3], vec![2, 5, 1, 7]).unwrap();
        assert_eq!(pool.unlabeled(), &[0, 1, 2]);
        pool.label(&[2, 0]).unwrap();
        assert_eq!(pool.unlabeled(), &[1]);
        assert_eq!(pool.labeled(), &[3, 2, 0]);
        assert_eq!(pool.spent_budget(), 3);
        assert!(pool.label(&[0]).is_err());
        assert!(PoolState::new(3, &[3]).is_err());
        assert!(PoolState::new(3, &[1, 1]).is_err());
        assert!(PoolState::from_sets(vec![0], vec![0, 1], vec![1, 1]).is_err());
    }

    #[test]
    fn kecor_single_sample_pool() {
        let f = DenseMatrix::from_columns(&[[1.0, 2.0]]).unwrap();
        let logits = logits_from(&[vec![0.0, 1.0]]);
        let pool = PoolState::new(1, &[]).unwrap();
        let r = select_kecor(
            &f,
            &logits,
            &pool,
            &AcquisitionConfig::new(1, KernelSpec::linear()),
        )
        .unwrap();
        assert_eq!(r.chosen, vec![0]);
    }

    #[test]
    fn kecor_prefers_larger_norm() {
        let f = DenseMatrix::from_columns(&[[1.0, 0.0], [2.0, 0.0]]).unwrap();
        let logits = logits_from(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let pool = PoolState::new(2, &[]).unwrap();
        let cfg = AcquisitionConfig::new(1, KernelSpec::linear()).with_sigma_ent(0.0);
        let r = select_kecor(&f, &logits, &pool, &cfg).unwrap();
        assert_eq!(r.chosen, vec![1]);
        let c = 1.0 / (0.25 * 2.0);
        assert!((r.objective - 0.5 * (1.0 + c * 4.0f64).ln()).abs() < 1e-14);
        assert_eq!(r.gains.len(), 1);
    }

    #[test]
    fn kecor_rejects_bad_inputs() {
        let f = DenseMatrix::from_columns(&[[1.0], [2.0]]).unwrap();
        let logits = logits_from(&[vec![0.0, 0.0], vec![0.0, 0.0]]);
        let pool = PoolState::new(2, &[0]).unwrap();
        let err = select_kecor(
            &f,
            &logits,
            &pool,
            &AcquisitionConfig::new(2, KernelSpec::linear()),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientPool {
                requested: 2,
                available: 1
            }
        ));
        let err = select_kecor(
            &f,
            &logits,
            &pool,
            &AcquisitionConfig::new(0, KernelSpec::linear()),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ConfigInvalid(_)));
        let short = logits_from(&[vec![0.0, 0.0]]);
        let err = select_kecor(
            &f,
            &short,
            &pool,
            &AcquisitionConfig::new(1, KernelSpec::linear()),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn kecor_skips_duplicates_of_selected() {
        // 0 and 2 are identical; with σ_ent = 0 the second pick must be 1.
        let f = DenseMatrix::from_columns(&[[3.0, 0.0], [0.0, 1.0], [3.0, 0.0]]).unwrap();
        let logits = logits_from(&[vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]]);
        let pool = PoolState::new(3, &[]).unwrap();
        let cfg = AcquisitionConfig::new(2, KernelSpec::linear()).with_sigma_ent(0.0);
        let r = select_kecor(&f, &logits, &pool, &cfg).unwrap();
        assert_eq!(r.chosen, vec![0, 1]);
    }

    #[test]
    fn random_is_seeded_and_exhaustive() {
        let pool = PoolState::new(10, &[2, 5]).unwrap();
        let a = select_random(&pool, 3, 42).unwrap();
        assert_eq!(a, select_random(&pool, 3, 42).unwrap());
        assert!(a.chosen.iter().all(|i| pool.unlabeled().contains(i)));
        let mut all = select_random(&pool, 8, 1).unwrap().chosen;
        all.sort_unstable();
        assert_eq!(all, pool.unlabeled());
        assert!(select_random(&pool, 9, 1).is_err());
    }

    #[test]
    fn entropy_baseline_picks_uniform_and_breaks_ties_low() {
        let logits = logits_from(&[
            vec![9.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![0.0, 8.0, 0.0],
        ]);
        let pool = PoolState::new(3, &[]).unwrap();
        assert_eq!(select_entropy(&logits, &pool, 1).unwrap().chosen, vec![1]);
        let flat = logits_from(&vec![vec![0.5, 0.1]; 5]);
        let pool = PoolState::new(5, &[]).unwrap();
        assert_eq!(
            select_entropy(&flat, &pool, 3).unwrap().chosen,
            vec![0, 1, 2]
        );
    }

    #[test]
    fn coreset_farthest_first() {
        let f = DenseMatrix::from_columns(&[[0.0], [1.0], [10.0]]).unwrap();
        let pool = PoolState::new(3, &[]).unwrap();
        let r = select_coreset(&f, &pool, 2, 0).unwrap();
        assert_eq!(r.chosen, vec![0, 2]);
        assert_eq!(r.gains, vec![0.0, 10.0]);
        assert_eq!(r.objective, 1.0);
    }

    #[test]
    fn coreset_never_prefers_labeled_duplicates() {
        let f =
            DenseMatrix::from_columns(&[[0.0, 0.0], [0.0, 0.0], [0.1, 0.0], [0.0, 0.05]]).unwrap();
        let pool = PoolState::new(4, &[0]).unwrap();
        let r = select_coreset(&f, &pool, 2, 0).unwrap();
        assert_eq!(r.chosen, vec![2, 3]);
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [
            Strategy::Kecor,
            Strategy::Random,
            Strategy::Entropy,
            Strategy::Coreset,
        ] {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("badge".parse::<Strategy>().is_err());
    }
}
