//! Multi-head baseline: one encoder and one decoder head per
//! morphology group (all quadrupeds share a head, bipeds and humanoids
//! share one, the hexapod gets its own), around a shared core. Robots
//! are mapped into a canonical slot layout per group; missing slots
//! read zeros and their action outputs are discarded. Introducing a new
//! morphology class requires a new head, which is this baseline's
//! documented weakness.

use rand_chacha::ChaCha8Rng;
use tensorgrad::{Tape, Tensor, TensorError, Var};

use crate::morphology::{MorphologyClass, RobotSpec};
use crate::policy::batch::BatchObs;
use crate::policy::config::ArchConfig;
use crate::policy::mlp::{Act, BoundMlp, Mlp};
use crate::policy::urma_net::{MEAN_CLIP, STD_MAX, STD_MIN};
use crate::policy::PolicyError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum HeadGroup {
    Quadruped,
    BipedHumanoid,
    Hexapod,
    Other,
}

pub fn head_group(class: MorphologyClass) -> HeadGroup {
    match class {
        MorphologyClass::Quadruped => HeadGroup::Quadruped,
        MorphologyClass::Biped | MorphologyClass::Humanoid => HeadGroup::BipedHumanoid,
        MorphologyClass::Hexapod => HeadGroup::Hexapod,
        MorphologyClass::Other => HeadGroup::Other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupHead {
    pub group: HeadGroup,
    pub joint_slots: usize,
    pub feet_slots: usize,
    pub enc: Mlp,
    pub dec: Mlp,
    pub critic_enc: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiheadParams {
    pub config: ArchConfig,
    pub heads: Vec<GroupHead>,
    pub core: Mlp,
    pub critic_core: Mlp,
    pub critic_head: Mlp,
}

impl MultiheadParams {
    /// Register heads for exactly the morphology groups present in
    /// `robots`; slot layouts are the group-wide maxima.
    pub fn new(rng: &mut ChaCha8Rng, config: ArchConfig, robots: &[&RobotSpec]) -> Self {
        let latent = 2 * config.latent_dim;
        let mut groups: Vec<(HeadGroup, usize, usize)> = Vec::new();
        for robot in robots {
            let g = head_group(robot.class);
            match groups.iter_mut().find(|(gg, _, _)| *gg == g) {
                Some((_, j, f)) => {
                    *j = (*j).max(robot.joint_count());
                    *f = (*f).max(robot.foot_count());
                }
                None => groups.push((g, robot.joint_count(), robot.foot_count())),
            }
        }
        groups.sort_by_key(|(g, _, _)| *g);

        let heads = groups
            .into_iter()
            .map(|(group, joint_slots, feet_slots)| {
                let in_width = 3 * joint_slots + 2 * feet_slots;
                GroupHead {
                    group,
                    joint_slots,
                    feet_slots,
                    enc: Mlp::new(
                        rng,
                        in_width,
                        &config.obs_hidden,
                        latent,
                        config.layer_norm,
                        Act::Tanh,
                        std::f64::consts::SQRT_2,
                    ),
                    dec: Mlp::new(
                        rng,
                        config.core_out(),
                        &config.mean_hidden,
                        2 * joint_slots,
                        false,
                        Act::Identity,
                        0.01,
                    ),
                    critic_enc: Mlp::new(
                        rng,
                        in_width,
                        &config.obs_hidden,
                        latent,
                        config.layer_norm,
                        Act::Tanh,
                        std::f64::consts::SQRT_2,
                    ),
                }
            })
            .collect();
        let core = Mlp::new(
            rng,
            config.general_width() + latent,
            &config.core_hidden[..config.core_hidden.len() - 1],
            config.core_out(),
            config.layer_norm,
            Act::Tanh,
            std::f64::consts::SQRT_2,
        );
        let critic_core = Mlp::new(
            rng,
            config.general_priv_width() + latent,
            &config.core_hidden[..config.core_hidden.len() - 1],
            config.core_out(),
            config.layer_norm,
            Act::Tanh,
            std::f64::consts::SQRT_2,
        );
        let critic_head = Mlp::new(rng, config.core_out(), &[], 1, false, Act::Identity, 1.0);
        Self {
            config,
            heads,
            core,
            critic_core,
            critic_head,
        }
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a Tensor)) {
        for head in &self.heads {
            let p = format!("head.{:?}", head.group).to_lowercase();
            head.enc.visit(&format!("{p}.enc"), f);
            head.dec.visit(&format!("{p}.dec"), f);
            head.critic_enc.visit(&format!("{p}.critic_enc"), f);
        }
        self.core.visit("core", f);
        self.critic_core.visit("critic_core", f);
        self.critic_head.visit("critic_head", f);
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Tensor)) {
        for head in &mut self.heads {
            let p = format!("head.{:?}", head.group).to_lowercase();
            head.enc.visit_mut(&format!("{p}.enc"), f);
            head.dec.visit_mut(&format!("{p}.dec"), f);
            head.critic_enc.visit_mut(&format!("{p}.critic_enc"), f);
        }
        self.core.visit_mut("core", f);
        self.critic_core.visit_mut("critic_core", f);
        self.critic_head.visit_mut("critic_head", f);
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundMultihead {
        let mut vars = Vec::new();
        let heads = self
            .heads
            .iter()
            .map(|h| BoundGroupHead {
                group: h.group,
                joint_slots: h.joint_slots,
                feet_slots: h.feet_slots,
                enc: h.enc.bind(tape, &mut vars),
                dec: h.dec.bind(tape, &mut vars),
                critic_enc: h.critic_enc.bind(tape, &mut vars),
            })
            .collect();
        let core = self.core.bind(tape, &mut vars);
        let critic_core = self.critic_core.bind(tape, &mut vars);
        let critic_head = self.critic_head.bind(tape, &mut vars);
        BoundMultihead {
            heads,
            core,
            critic_core,
            critic_head,
            vars,
        }
    }
}

pub struct BoundGroupHead {
    group: HeadGroup,
    joint_slots: usize,
    feet_slots: usize,
    enc: BoundMlp,
    dec: BoundMlp,
    critic_enc: BoundMlp,
}

pub struct BoundMultihead {
    heads: Vec<BoundGroupHead>,
    core: BoundMlp,
    critic_core: BoundMlp,
    critic_head: BoundMlp,
    pub vars: Vec<Var>,
}

/// Rearrange a robot's per-element observations into the head's
/// canonical slot layout, zero-filling absent slots.
fn slotted_input(obs: &BatchObs, joint_slots: usize, feet_slots: usize) -> Tensor {
    let b = obs.batch;
    let width = 3 * joint_slots + 2 * feet_slots;
    let mut data = vec![0.0; b * width];
    for s in 0..b {
        let row = &mut data[s * width..(s + 1) * width];
        for j in 0..obs.joints {
            for k in 0..3 {
                row[3 * j + k] = obs.joint_obs.get(s * obs.joints + j, k);
            }
        }
        for ft in 0..obs.feet {
            for k in 0..2 {
                row[3 * joint_slots + 2 * ft + k] = obs.foot_obs.get(s * obs.feet + ft, k);
            }
        }
    }
    Tensor::new(b, width, data).expect("shape")
}

impl BoundMultihead {
    fn head_for(&self, robot: &RobotSpec) -> Result<&BoundGroupHead, PolicyError> {
        let group = head_group(robot.class);
        let head = self
            .heads
            .iter()
            .find(|h| h.group == group)
            .ok_or(PolicyError::UnregisteredClass(robot.class))?;
        if robot.joint_count() > head.joint_slots || robot.foot_count() > head.feet_slots {
            return Err(PolicyError::SlotOverflow {
                robot: robot.name.clone(),
                joints: robot.joint_count(),
                slots: head.joint_slots,
            });
        }
        Ok(head)
    }

    pub fn actor(
        &self,
        tape: &mut Tape,
        robot: &RobotSpec,
        obs: &BatchObs,
    ) -> Result<(Var, Var), PolicyError> {
        let head = self.head_for(robot)?;
        let slots = slotted_input(obs, head.joint_slots, head.feet_slots);
        let x = tape.input(slots);
        let latent = head.enc.apply(tape, x)?;
        let general = tape.input(obs.general.clone());
        let core_in = tape.concat_cols(general, latent)?;
        let core_out = self.core.apply(tape, core_in)?;
        let dec_out = head.dec.apply(tape, core_out)?;
        // slots 0..joint_slots hold means, the rest log stds; unused
        // slots are simply never sliced out
        let mean = tape.slice_cols(dec_out, 0, obs.joints)?;
        let mean = tape.clamp(mean, -MEAN_CLIP, MEAN_CLIP);
        let log_std = tape.slice_cols(dec_out, head.joint_slots, head.joint_slots + obs.joints)?;
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
        let head = self.head_for(robot)?;
        let slots = slotted_input(obs, head.joint_slots, head.feet_slots);
        let x = tape.input(slots);
        let latent = head.critic_enc.apply(tape, x)?;
        let general = tape.input(obs.general_priv.clone());
        let core_in = tape.concat_cols(general, latent)?;
        let core_out = self.critic_core.apply(tape, core_in)?;
        Ok(self.critic_head.apply(tape, core_out)?)
    }
}

impl From<TensorError> for PolicyError {
    fn from(e: TensorError) -> Self {
        PolicyError::Tensor(e)
    }
}
