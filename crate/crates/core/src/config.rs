//! JSON run configuration shared by the CLI, the simulator, and in-memory callers.
//!
//! Absent keys take defaults; unknown keys are rejected. A `profile` fills in
//! the dataset-specific defaults (`kitti`, `waymo`) before explicit keys apply.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionConfig, Strategy, DEFAULT_SIGMA_ENT};
use crate::coding_rate::DEFAULT_EPSILON;
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec, DEFAULT_RBF_SIGMA};
use crate::proxy::{Activation, ProxyNetwork, ProxySnapshot, DEFAULT_BETA, DEFAULT_HIDDEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Kitti,
    Waymo,
}

/// Values a profile supplies when the corresponding keys are absent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileDefaults {
    pub sigma_ent: f64,
    pub initial_labeled: usize,
    pub batch_size: usize,
    pub rounds: usize,
}

impl Profile {
    pub fn defaults(self) -> ProfileDefaults {
        match self {
            Profile::Kitti => ProfileDefaults {
                sigma_ent: 0.1,
                initial_labeled: 100,
                batch_size: 100,
                rounds: 6,
            },
            Profile::Waymo => ProfileDefaults {
                sigma_ent: 0.5,
                initial_labeled: 400,
                batch_size: 400,
                rounds: 5,
            },
        }
    }
}

/// Desk-scale defaults used without a profile.
const GENERIC: ProfileDefaults = ProfileDefaults {
    sigma_ent: DEFAULT_SIGMA_ENT,
    initial_labeled: 20,
    batch_size: 20,
    rounds: 4,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub rbf_sigma: f64,
    pub normalize: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            kind: KernelKind::Ntk,
            rbf_sigma: DEFAULT_RBF_SIGMA,
            normalize: false,
        }
    }
}

impl KernelConfig {
    /// Binds the configuration to a proxy snapshot (ignored by feature kernels).
    pub fn to_spec(&self, proxy: Option<ProxySnapshot>) -> Result<KernelSpec> {
        let proxy = if self.kind.needs_proxy() {
            Some(proxy.ok_or_else(|| {
                Error::ConfigInvalid(format!("kernel `{}` requires a proxy network", self.kind))
            })?)
        } else {
            None
        };
        let spec = KernelSpec {
            kind: self.kind,
            rbf_sigma: self.rbf_sigma,
            normalize: self.normalize,
            proxy,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProxyConfig {
    /// Hidden layer widths.
    pub layers: Vec<usize>,
    pub beta: f64,
    pub activation: Activation,
    pub epochs: usize,
    pub lr: f64,
    /// Output width when no regression targets are supplied.
    pub output_dim: usize,
}

impl Default for ProxyConfig {
    fn default() -> Self {
        Self {
            layers: DEFAULT_HIDDEN.to_vec(),
            beta: DEFAULT_BETA,
            activation: Activation::Relu,
            epochs: 200,
            lr: 0.05,
            output_dim: 1,
        }
    }
}

impl ProxyConfig {
    pub fn init(&self, input_dim: usize, output_dim: usize, seed: u64) -> Result<ProxyNetwork> {
        ProxyNetwork::init(
            input_dim,
            &self.layers,
            output_dim,
            self.beta,
            self.activation,
            seed,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.layers.contains(&0) {
            return Err(Error::ConfigInvalid(
                "proxy layer widths must be positive".into(),
            ));
        }
        if self.beta < 0.0 || !self.beta.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "proxy beta must be nonnegative, got {}",
                self.beta
            )));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "proxy lr must be positive, got {}",
                self.lr
            )));
        }
        if self.output_dim == 0 {
            return Err(Error::ConfigInvalid(
                "proxy output_dim must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    /// `d × N` feature tensor.
    pub features: Option<PathBuf>,
    /// `C × N` logit tensor.
    pub logits: Option<PathBuf>,
    /// Text file, one 0-based index per line.
    pub labeled_indices: Option<PathBuf>,
    /// `d_L × N` regression targets for proxy training.
    pub targets: Option<PathBuf>,
    /// Proxy checkpoint, read by `select`/`kernel` and written by `proxy-train`.
    pub proxy: Option<PathBuf>,
    /// Primary output of the command.
    pub output: Option<PathBuf>,
    /// JSON summary written by `select`; defaults to `<output>.summary.json`.
    pub summary: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskConfig {
    pub seed: u64,
    pub dim: usize,
    pub pool_size: usize,
    pub classes: usize,
    /// Test set size as a fraction of the pool size.
    pub test_fraction: f64,
    /// Poisson rate of the per-sample box count (count = 1 + Poisson).
    pub box_rate: f64,
    pub target_dim: usize,
    pub noise_std: f64,
    /// Class prior ratio: `P(class c) ∝ class_decay^c`.
    pub class_decay: f64,
    /// Scale of the per-class means.
    pub mean_scale: f64,
    /// Hidden width of the random target network.
    pub teacher_width: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dim: 16,
            pool_size: 400,
            classes: 4,
            test_fraction: 0.5,
            box_rate: 5.0,
            target_dim: 2,
            noise_std: 0.05,
            class_decay: 0.5,
            mean_scale: 2.0,
            teacher_width: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub task: TaskConfig,
    pub initial_labeled: Option<usize>,
    pub rounds: Option<usize>,
    /// Total number of actively selected samples; defaults to `rounds · batch_size`.
    pub budget: Option<usize>,
    pub classifier_epochs: usize,
    pub classifier_lr: f64,
    /// Record selection wall time in the report. Off by default so reports are
    /// byte-reproducible.
    pub timing: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            task: TaskConfig::default(),
            initial_labeled: None,
            rounds: None,
            budget: None,
            classifier_epochs: 200,
            classifier_lr: 0.1,
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub profile: Option<Profile>,
    pub strategy: Strategy,
    pub kernel: KernelConfig,
    pub epsilon: f64,
    pub sigma_ent: Option<f64>,
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub proxy: ProxyConfig,
    pub paths: PathsConfig,
    pub simulation: SimulationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: None,
            strategy: Strategy::Kecor,
            kernel: KernelConfig::default(),
            epsilon: DEFAULT_EPSILON,
            sigma_ent: None,
            batch_size: None,
            seed: 0,
            proxy: ProxyConfig::default(),
            paths: PathsConfig::default(),
            simulation: SimulationConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ConfigInvalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn profile_defaults(&self) -> ProfileDefaults {
        self.profile.map_or(GENERIC, Profile::defaults)
    }

    pub fn sigma_ent(&self) -> f64 {
        self.sigma_ent.unwrap_or(self.profile_defaults().sigma_ent)
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
            .unwrap_or(self.profile_defaults().batch_size)
    }

    pub fn initial_labeled(&self) -> usize {
        self.simulation
            .initial_labeled
            .unwrap_or(self.profile_defaults().initial_labeled)
    }

    pub fn rounds(&self) -> usize {
        self.simulation
            .rounds
            .unwrap_or(self.profile_defaults().rounds)
    }

    pub fn budget(&self) -> usize {
        self.simulation
            .budget
            .unwrap_or(self.rounds() * self.batch_size())
    }

    /// Copy with every profile-dependent value written out explicitly.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.sigma_ent = Some(self.sigma_ent());
        out.batch_size = Some(self.batch_size());
        out.simulation.initial_labeled = Some(self.initial_labeled());
        out.simulation.rounds = Some(self.rounds());
        out.simulation.budget = Some(self.budget());
        out
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        let sigma = self.sigma_ent();
        if sigma < 0.0 || !sigma.is_finite() {
            return Err(Error::ConfigInvalid(format!(
                "sigma_ent must be nonnegative, got {sigma}"
            )));
        }
        if self.batch_size() == 0 {
            return Err(Error::ConfigInvalid("batch_size must be at least 1".into()));
        }
        if self.kernel.kind == KernelKind::Rbf
            && !(self.kernel.rbf_sigma > 0.0 && self.kernel.rbf_sigma.is_finite())
        {
            return Err(Error::ConfigInvalid(format!(
                "rbf_sigma must be positive, got {}",
                self.kernel.rbf_sigma
            )));
        }
        self.proxy.validate()?;
        let sim = &self.simulation;
        if sim.classifier_lr <= 0.0 || !sim.classifier_lr.is_finite() {
            return Err(Error::ConfigInvalid(
                "classifier_lr must be positive".into(),
            ));
        }
        let t = &sim.task;
        if t.dim == 0 || t.classes == 0 || t.target_dim == 0 || t.teacher_width == 0 {
            return Err(Error::ConfigInvalid(
                "task dimensions must be positive".into(),
            ));
        }
        if !(t.test_fraction > 0.0 && t.test_fraction.is_finite()) {
            return Err(Error::ConfigInvalid(
                "test_fraction must be positive".into(),
            ));
        }
        if !(t.box_rate >= 0.0 && t.box_rate.is_finite())
            || !(t.noise_std >= 0.0 && t.noise_std.is_finite())
        {
            return Err(Error::ConfigInvalid(
                "box_rate and noise_std must be nonnegative".into(),
            ));
        }
        if !(t.class_decay > 0.0 && t.class_decay.is_finite()) || !t.mean_scale.is_finite() {
            return Err(Error::ConfigInvalid(
                "class_decay must be positive and mean_scale finite".into(),
            ));
        }
        Ok(())
    }

    /// Acquisition settings bound to an optional proxy snapshot.
    pub fn acquisition(&self, proxy: Option<ProxySnapshot>) -> Result<AcquisitionConfig> {
        let kernel = if self.strategy == Strategy::Kecor {
            self.kernel.to_spec(proxy)?
        } else {
            // baselines ignore the kernel
            KernelSpec::linear()
        };
        Ok(AcquisitionConfig::new(self.batch_size(), kernel)
            .with_sigma_ent(self.sigma_ent())
            .with_epsilon(self.epsilon)
            .with_seed(self.seed))
    }
}
