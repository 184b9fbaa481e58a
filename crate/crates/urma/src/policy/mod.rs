//! Policy architectures behind one uniform interface: the
//! morphology-agnostic network plus the multi-head and padding
//! baselines. Parameters are plain tensors; every evaluation binds them
//! onto a fresh tape, so rollout workers can share a `PolicyParams`
//! read-only while updates build gradients on their own tapes.

mod batch;
mod checkpoint;
mod config;
mod mlp;
mod multihead;
mod padding;
mod urma_net;

pub use batch::BatchObs;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use config::{ArchConfig, SharedDescMode};
pub use mlp::{random_direction, Act, LnParams, Mlp};
pub use multihead::{head_group, HeadGroup, MultiheadParams};
pub use padding::PaddingParams;
pub use urma_net::{UrmaParams, MEAN_CLIP, STD_MAX, STD_MIN};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use tensorgrad::{Tape, Tensor, TensorError, Var};
use thiserror::Error;

use crate::morphology::{MorphologyClass, RobotSpec};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("no head registered for morphology class {0:?}")]
    UnregisteredClass(MorphologyClass),
    #[error("robot {0:?} has no task ID in this policy")]
    UnregisteredTask(String),
    #[error("robot {robot:?} has {joints} joints but the head provides {slots} slots")]
    SlotOverflow {
        robot: String,
        joints: usize,
        slots: usize,
    },
    #[error(transparent)]
    Tensor(TensorError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Urma,
    Multihead,
    Padding,
}

impl std::str::FromStr for Architecture {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "urma" => Ok(Self::Urma),
            "multihead" => Ok(Self::Multihead),
            "padding" => Ok(Self::Padding),
            other => Err(format!("unknown architecture {other:?}")),
        }
    }
}

/// All learnable weights of one policy variant.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyParams {
    Urma(UrmaParams),
    Multihead(MultiheadParams),
    Padding(PaddingParams),
}

impl PolicyParams {
    /// Construct fresh parameters for the chosen architecture. The
    /// baselines need the training fleet to lay out their heads and
    /// task IDs; the morphology-agnostic network ignores it.
    pub fn new(
        arch: Architecture,
        config: ArchConfig,
        robots: &[&RobotSpec],
        seed: u64,
    ) -> Self {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match arch {
            Architecture::Urma => Self::Urma(UrmaParams::new(&mut rng, config)),
            Architecture::Multihead => {
                Self::Multihead(MultiheadParams::new(&mut rng, config, robots))
            }
            Architecture::Padding => Self::Padding(PaddingParams::new(&mut rng, config, robots)),
        }
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Self::Urma(_) => Architecture::Urma,
            Self::Multihead(_) => Architecture::Multihead,
            Self::Padding(_) => Architecture::Padding,
        }
    }

    pub fn config(&self) -> &ArchConfig {
        match self {
            Self::Urma(p) => &p.config,
            Self::Multihead(p) => &p.config,
            Self::Padding(p) => &p.config,
        }
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a Tensor)) {
        match self {
            Self::Urma(p) => p.visit(f),
            Self::Multihead(p) => p.visit(f),
            Self::Padding(p) => p.visit(f),
        }
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Tensor)) {
        match self {
            Self::Urma(p) => p.visit_mut(f),
            Self::Multihead(p) => p.visit_mut(f),
            Self::Padding(p) => p.visit_mut(f),
        }
    }

    /// Named parameter blocks in a stable order.
    pub fn blocks(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        self.visit(&mut |name, t| out.push((name, t)));
        out
    }

    /// Exact learnable scalar counts, per sub-network prefix and total.
    pub fn count_parameters(&self) -> ParamCount {
        let mut per_subnet: Vec<(String, usize)> = Vec::new();
        let mut total = 0;
        self.visit(&mut |name, t| {
            total += t.len();
            let subnet = name.split('.').take(2).collect::<Vec<_>>().join(".");
            match per_subnet.iter_mut().find(|(s, _)| *s == subnet) {
                Some((_, n)) => *n += t.len(),
                None => per_subnet.push((subnet, t.len())),
            }
        });
        ParamCount { per_subnet, total }
    }

    pub fn all_finite(&self) -> bool {
        let mut ok = true;
        self.visit(&mut |_, t| ok &= t.all_finite());
        ok
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundPolicy {
        match self {
            Self::Urma(p) => BoundPolicy::Urma(p.bind(tape)),
            Self::Multihead(p) => BoundPolicy::Multihead(p.bind(tape)),
            Self::Padding(p) => BoundPolicy::Padding(p.bind(tape)),
        }
    }

    /// Numeric actor evaluation (no gradients kept): per-sample action
    /// distributions for one robot batch.
    pub fn action_distributions(
        &self,
        robot: &RobotSpec,
        obs: &BatchObs,
    ) -> Result<Vec<ActionDistribution>, PolicyError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let (mean, std) = bound.actor(&mut tape, robot, obs)?;
        let mean = tape.value(mean);
        let std = tape.value(std);
        Ok((0..obs.batch)
            .map(|b| ActionDistribution {
                mean: mean.row_slice(b).to_vec(),
                std: std.row_slice(b).to_vec(),
            })
            .collect())
    }

    /// Numeric critic evaluation: one value per sample.
    pub fn values(&self, robot: &RobotSpec, obs: &BatchObs) -> Result<Vec<f64>, PolicyError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let v = bound.value(&mut tape, robot, obs)?;
        Ok(tape.value(v).data().to_vec())
    }

    /// Actor distributions and critic values in one pass (one binding).
    pub fn act_and_value(
        &self,
        robot: &RobotSpec,
        obs: &BatchObs,
    ) -> Result<(Vec<ActionDistribution>, Vec<f64>), PolicyError> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let (mean, std) = bound.actor(&mut tape, robot, obs)?;
        let v = bound.value(&mut tape, robot, obs)?;
        let mean = tape.value(mean);
        let std = tape.value(std);
        let dists = (0..obs.batch)
            .map(|b| ActionDistribution {
                mean: mean.row_slice(b).to_vec(),
                std: std.row_slice(b).to_vec(),
            })
            .collect();
        Ok((dists, tape.value(v).data().to_vec()))
    }
}

#[derive(Debug, Clone)]
pub struct ParamCount {
    pub per_subnet: Vec<(String, usize)>,
    pub total: usize,
}

pub enum BoundPolicy {
    Urma(urma_net::BoundUrma),
    Multihead(multihead::BoundMultihead),
    Padding(padding::BoundPadding),
}

impl BoundPolicy {
    /// Action mean and std as `[B x J]` vars on the tape.
    pub fn actor(
        &self,
        tape: &mut Tape,
        robot: &RobotSpec,
        obs: &BatchObs,
    ) -> Result<(Var, Var), PolicyError> {
        match self {
            Self::Urma(b) => b.actor(tape, obs).map_err(PolicyError::Tensor),
            Self::Multihead(b) => b.actor(tape, robot, obs),
            Self::Padding(b) => b.actor(tape, robot, obs),
        }
    }

    pub fn value(
        &self,
        tape: &mut Tape,
        robot: &RobotSpec,
        obs: &BatchObs,
    ) -> Result<Var, PolicyError> {
        match self {
            Self::Urma(b) => b.value(tape, obs).map_err(PolicyError::Tensor),
            Self::Multihead(b) => b.value(tape, robot, obs),
            Self::Padding(b) => b.value(tape, robot, obs),
        }
    }

    /// Parameter vars in the same order as `PolicyParams::blocks`.
    pub fn param_vars(&self) -> &[Var] {
        match self {
            Self::Urma(b) => &b.vars,
            Self::Multihead(b) => &b.vars,
            Self::Padding(b) => &b.vars,
        }
    }
}

/// Per-joint diagonal Gaussian over actions for a single state.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ActionDistribution {
    /// Draw an action and its log density.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        let action: Vec<f64> = self
            .mean
            .iter()
            .zip(self.std.iter())
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let lp = self.log_prob(&action);
        (action, lp)
    }

    /// Closed-form diagonal Gaussian log density.
    pub fn log_prob(&self, action: &[f64]) -> f64 {
        const HALF_LN_2PI: f64 = 0.918_938_533_204_672_78;
        self.mean
            .iter()
            .zip(self.std.iter())
            .zip(action.iter())
            .map(|((m, s), a)| {
                let z = (a - m) / s;
                -0.5 * z * z - s.ln() - HALF_LN_2PI
            })
            .sum()
    }
}

/// Draw an action and its log-probability from a distribution.
pub fn sample_and_logprob(
    dist: &ActionDistribution,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64) {
    dist.sample(rng)
}
