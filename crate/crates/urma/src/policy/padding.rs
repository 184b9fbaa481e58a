//! Padding baseline: observations zero-padded to a fleet-wide maximum
//! length, a one-hot task ID appended, one MLP for everything, action
//! vector truncated to the robot's joint count.

use rand_chacha::ChaCha8Rng;
use tensorgrad::{Tape, Tensor, Var};

use crate::morphology::RobotSpec;
use crate::policy::batch::BatchObs;
use crate::policy::config::ArchConfig;
use crate::policy::mlp::{Act, BoundMlp, Mlp};
use crate::policy::urma_net::{MEAN_CLIP, STD_MAX, STD_MIN};
use crate::policy::PolicyError;

#[derive(Debug, Clone, PartialEq)]
pub struct PaddingParams {
    pub config: ArchConfig,
    /// Registered robot names; the index is the task ID.
    pub tasks: Vec<String>,
    pub max_joints: usize,
    pub max_feet: usize,
    pub net: Mlp,
    pub critic: Mlp,
}

impl PaddingParams {
    pub fn new(rng: &mut ChaCha8Rng, config: ArchConfig, robots: &[&RobotSpec]) -> Self {
        let tasks: Vec<String> = robots.iter().map(|r| r.name.clone()).collect();
        let max_joints = robots.iter().map(|r| r.joint_count()).max().unwrap_or(1);
        let max_feet = robots.iter().map(|r| r.foot_count()).max().unwrap_or(1);
        let obs_width = 3 * max_joints + 2 * max_feet + config.general_width() + tasks.len();
        let priv_width =
            3 * max_joints + 2 * max_feet + config.general_priv_width() + tasks.len();
        let hidden: Vec<usize> = config.core_hidden.clone();
        let net = Mlp::new(
            rng,
            obs_width,
            &hidden,
            2 * max_joints,
            config.layer_norm,
            Act::Identity,
            0.01,
        );
        let critic = Mlp::new(
            rng,
            priv_width,
            &hidden,
            1,
            config.layer_norm,
            Act::Identity,
            1.0,
        );
        Self {
            config,
            tasks,
            max_joints,
            max_feet,
            net,
            critic,
        }
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a Tensor)) {
        self.net.visit("net", f);
        self.critic.visit("critic", f);
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Tensor)) {
        self.net.visit_mut("net", f);
        self.critic.visit_mut("critic", f);
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundPadding {
        let mut vars = Vec::new();
        let net = self.net.bind(tape, &mut vars);
        let critic = self.critic.bind(tape, &mut vars);
        BoundPadding {
            tasks: self.tasks.clone(),
            max_joints: self.max_joints,
            max_feet: self.max_feet,
            net,
            critic,
            vars,
        }
    }
}

pub struct BoundPadding {
    tasks: Vec<String>,
    max_joints: usize,
    max_feet: usize,
    net: BoundMlp,
    critic: BoundMlp,
    pub vars: Vec<Var>,
}

impl BoundPadding {
    fn task_index(&self, robot: &RobotSpec) -> Result<usize, PolicyError> {
        let task = self
            .tasks
            .iter()
            .position(|t| t == &robot.name)
            .ok_or_else(|| PolicyError::UnregisteredTask(robot.name.clone()))?;
        if robot.joint_count() > self.max_joints || robot.foot_count() > self.max_feet {
            return Err(PolicyError::SlotOverflow {
                robot: robot.name.clone(),
                joints: robot.joint_count(),
                slots: self.max_joints,
            });
        }
        Ok(task)
    }

    /// Flat observation: padded joint obs, padded foot obs, general
    /// obs, one-hot task ID.
    fn flat_input(&self, obs: &BatchObs, task: usize, privileged: bool) -> Tensor {
        let b = obs.batch;
        let general = if privileged {
            &obs.general_priv
        } else {
            &obs.general
        };
        let width = 3 * self.max_joints + 2 * self.max_feet + general.cols() + self.tasks.len();
        let mut data = vec![0.0; b * width];
        for s in 0..b {
            let row = &mut data[s * width..(s + 1) * width];
            for j in 0..obs.joints {
                for k in 0..3 {
                    row[3 * j + k] = obs.joint_obs.get(s * obs.joints + j, k);
                }
            }
            let feet_base = 3 * self.max_joints;
            for ft in 0..obs.feet {
                for k in 0..2 {
                    row[feet_base + 2 * ft + k] = obs.foot_obs.get(s * obs.feet + ft, k);
                }
            }
            let gen_base = feet_base + 2 * self.max_feet;
            for (k, v) in general.row_slice(s).iter().enumerate() {
                row[gen_base + k] = *v;
            }
            row[gen_base + general.cols() + task] = 1.0;
        }
        Tensor::new(b, width, data).expect("shape")
    }

    pub fn actor(
        &self,
        tape: &mut Tape,
        robot: &RobotSpec,
        obs: &BatchObs,
    ) -> Result<(Var, Var), PolicyError> {
        let task = self.task_index(robot)?;
        let x = tape.input(self.flat_input(obs, task, false));
        let out = self.net.apply(tape, x)?;
        let mean = tape.slice_cols(out, 0, obs.joints)?;
        let mean = tape.clamp(mean, -MEAN_CLIP, MEAN_CLIP);
        let log_std = tape.slice_cols(out, self.max_joints, self.max_joints + obs.joints)?;
        let std = tape.exp(log_std);
        let std = tape.clamp(std, STD_MIN, STD_MAX);
        Ok((mean, std))
    }

    pub fn value(
        &self,
        tape: &mut Tape,
        robot: &RobotSpec,
        obs: &BatchObs,
    ) -> Result<Var, PolicyError> {
        let task = self.task_index(robot)?;
        let x = tape.input(self.flat_input(obs, task, true));
        Ok(self.critic.apply(tape, x)?)
    }
}
