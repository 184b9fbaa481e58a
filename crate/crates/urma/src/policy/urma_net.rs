//! The morphology-agnostic architecture.
//!
//! Per element set (joints, feet): the description vector is encoded by
//! one MLP and turned into attention weights by a tempered softmax over
//! the latent axis; the observation encoding is multiplied elementwise
//! by those weights and the products are summed over the set. The core
//! MLP maps (general obs, joint latent, feet latent) to an action
//! latent. The universal decoder then produces, per joint, an action
//! mean from (encoded description, action latent, that joint's latent)
//! and a standard deviation from the encoded description alone, so the
//! output arity is the joint count rather than a network dimension.
//!
//! The critic mirrors the encoder/core trunk with its own parameters,
//! sees the privileged observations, and ends in a scalar head.

use rand_chacha::ChaCha8Rng;
use tensorgrad::{Tape, Tensor, TensorError, Var};

use crate::policy::batch::BatchObs;
use crate::policy::config::{ArchConfig, SharedDescMode};
use crate::policy::mlp::{Act, BoundMlp, LnParams, Mlp};

/// Pre-scale action mean clip range.
pub const MEAN_CLIP: f64 = 10.0;
/// Action standard deviation clip range.
pub const STD_MIN: f64 = 1e-8;
pub const STD_MAX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SetEncoder {
    pub desc: Mlp,
    pub obs: Mlp,
    pub tau: Tensor,
}

impl SetEncoder {
    fn new(rng: &mut ChaCha8Rng, desc_width: usize, obs_width: usize, cfg: &ArchConfig) -> Self {
        Self {
            desc: Mlp::new(
                rng,
                desc_width,
                &cfg.desc_hidden,
                cfg.latent_dim,
                cfg.layer_norm,
                Act::Tanh,
                std::f64::consts::SQRT_2,
            ),
            obs: Mlp::new(
                rng,
                obs_width,
                &cfg.obs_hidden,
                cfg.latent_dim,
                cfg.layer_norm,
                Act::Tanh,
                std::f64::consts::SQRT_2,
            ),
            tau: Tensor::scalar(cfg.tau_init),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, f: &mut impl FnMut(String, &'a Tensor)) {
        self.desc.visit(&format!("{prefix}.desc"), f);
        self.obs.visit(&format!("{prefix}.obs"), f);
        f(format!("{prefix}.tau"), &self.tau);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut impl FnMut(String, &mut Tensor)) {
        self.desc.visit_mut(&format!("{prefix}.desc"), f);
        self.obs.visit_mut(&format!("{prefix}.obs"), f);
        f(format!("{prefix}.tau"), &mut self.tau);
    }

    fn bind(&self, tape: &mut Tape, sink: &mut Vec<Var>) -> BoundSetEncoder {
        let desc = self.desc.bind(tape, sink);
        let obs = self.obs.bind(tape, sink);
        let tau = tape.input(self.tau.clone());
        sink.push(tau);
        BoundSetEncoder { desc, obs, tau }
    }
}

pub struct BoundSetEncoder {
    desc: BoundMlp,
    obs: BoundMlp,
    tau: Var,
}

/// Everything the encoder pass produces that later stages consume.
pub struct SetEncoding {
    /// Per-element latents `z_j`, `[B*N x L]`.
    pub per_element: Var,
    /// Set latent `z_bar`, `[B x L]`.
    pub pooled: Var,
    /// Description encoding before the softmax, `[B*N x L]`.
    pub desc_pre_softmax: Var,
    /// Attention weights (softmax output), `[B*N x L]`.
    pub attention: Var,
}

impl BoundSetEncoder {
    /// Eq.-style set encoding: `z_j = softmax(f_desc(d_j)/(tau+eps)) *
    /// f_obs(o_j)`, pooled by an order-invariant sum over the set.
    pub fn encode(
        &self,
        tape: &mut Tape,
        desc_rows: Var,
        obs_rows: Var,
        group: usize,
        eps: f64,
    ) -> Result<SetEncoding, TensorError> {
        let desc_pre_softmax = self.desc.apply(tape, desc_rows)?;
        let attention = tape.softmax_temp(desc_pre_softmax, self.tau, eps)?;
        let obs_enc = self.obs.apply(tape, obs_rows)?;
        let per_element = tape.mul(attention, obs_enc)?;
        let pooled = tape.segment_sum(per_element, group)?;
        Ok(SetEncoding {
            per_element,
            pooled,
            desc_pre_softmax,
            attention,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrmaActor {
    pub joint_enc: SetEncoder,
    pub foot_enc: SetEncoder,
    pub core: Mlp,
    /// Decoder description encoder; absent in the shared-encoder
    /// ablations, which reuse the joint encoder's description path.
    pub dec_desc: Option<Mlp>,
    /// The extra LayerNorm inside the action mean network, applied to
    /// its concatenated input.
    pub mean_input_ln: Option<LnParams>,
    pub mean: Mlp,
    pub std: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrmaCritic {
    pub joint_enc: SetEncoder,
    pub foot_enc: SetEncoder,
    pub core: Mlp,
    pub head: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrmaParams {
    pub config: ArchConfig,
    pub actor: UrmaActor,
    pub critic: UrmaCritic,
}

impl UrmaParams {
    pub fn new(rng: &mut ChaCha8Rng, config: ArchConfig) -> Self {
        let cfg = &config;
        let core_in = cfg.general_width() + 2 * cfg.latent_dim;
        let mean_in = 2 * cfg.latent_dim + cfg.core_out();
        let actor = UrmaActor {
            joint_enc: SetEncoder::new(rng, cfg.joint_desc_width(), cfg.joint_obs_width(), cfg),
            foot_enc: SetEncoder::new(rng, cfg.foot_desc_width(), cfg.foot_obs_width(), cfg),
            core: Mlp::new(
                rng,
                core_in,
                &cfg.core_hidden[..cfg.core_hidden.len() - 1],
                cfg.core_out(),
                cfg.layer_norm,
                Act::Tanh,
                std::f64::consts::SQRT_2,
            ),
            dec_desc: (cfg.shared_desc == SharedDescMode::Separate).then(|| {
                Mlp::new(
                    rng,
                    cfg.joint_desc_width(),
                    &cfg.dec_desc_hidden,
                    cfg.latent_dim,
                    cfg.layer_norm,
                    Act::Tanh,
                    std::f64::consts::SQRT_2,
                )
            }),
            mean_input_ln: cfg.layer_norm.then(|| LnParams::new(mean_in)),
            // near-zero initial actions around the nominal pose
            mean: Mlp::new(rng, mean_in, &cfg.mean_hidden, 1, false, Act::Identity, 0.01),
            // small output weights put the initial std at exp(0) = 1
            std: Mlp::new(
                rng,
                cfg.latent_dim,
                &cfg.std_hidden,
                1,
                false,
                Act::Identity,
                0.01,
            ),
        };
        let critic_core_in = cfg.general_priv_width() + 2 * cfg.latent_dim;
        let critic = UrmaCritic {
            joint_enc: SetEncoder::new(rng, cfg.joint_desc_width(), cfg.joint_obs_width(), cfg),
            foot_enc: SetEncoder::new(rng, cfg.foot_desc_width(), cfg.foot_obs_width(), cfg),
            core: Mlp::new(
                rng,
                critic_core_in,
                &cfg.core_hidden[..cfg.core_hidden.len() - 1],
                cfg.core_out(),
                cfg.layer_norm,
                Act::Tanh,
                std::f64::consts::SQRT_2,
            ),
            head: Mlp::new(rng, cfg.core_out(), &[], 1, false, Act::Identity, 1.0),
        };
        Self {
            config,
            actor,
            critic,
        }
    }

    /// Numeric set encoding with the actor's joint encoder: returns
    /// `(z_bar [B x L], z_j [B*J x L])` for row sets grouped by `group`.
    pub fn encode_set(
        &self,
        desc_rows: &Tensor,
        obs_rows: &Tensor,
        group: usize,
    ) -> Result<(Tensor, Tensor), TensorError> {
        let mut tape = Tape::new();
        let mut sink = Vec::new();
        let enc = self.actor.joint_enc.bind(&mut tape, &mut sink);
        let d = tape.input(desc_rows.clone());
        let o = tape.input(obs_rows.clone());
        let encoding = enc.encode(&mut tape, d, o, group, self.config.softmax_eps)?;
        Ok((
            tape.value(encoding.pooled).clone(),
            tape.value(encoding.per_element).clone(),
        ))
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(String, &'a Tensor)) {
        let a = &self.actor;
        a.joint_enc.visit("actor.joint_enc", f);
        a.foot_enc.visit("actor.foot_enc", f);
        a.core.visit("actor.core", f);
        if let Some(dec) = &a.dec_desc {
            dec.visit("actor.dec_desc", f);
        }
        if let Some(ln) = &a.mean_input_ln {
            f("actor.mean_input_ln.gain".into(), &ln.gain);
            f("actor.mean_input_ln.bias".into(), &ln.bias);
        }
        a.mean.visit("actor.mean", f);
        a.std.visit("actor.std", f);
        let c = &self.critic;
        c.joint_enc.visit("critic.joint_enc", f);
        c.foot_enc.visit("critic.foot_enc", f);
        c.core.visit("critic.core", f);
        c.head.visit("critic.head", f);
    }

    pub fn visit_mut(&mut self, f: &mut impl FnMut(String, &mut Tensor)) {
        let a = &mut self.actor;
        a.joint_enc.visit_mut("actor.joint_enc", f);
        a.foot_enc.visit_mut("actor.foot_enc", f);
        a.core.visit_mut("actor.core", f);
        if let Some(dec) = &mut a.dec_desc {
            dec.visit_mut("actor.dec_desc", f);
        }
        if let Some(ln) = &mut a.mean_input_ln {
            f("actor.mean_input_ln.gain".into(), &mut ln.gain);
            f("actor.mean_input_ln.bias".into(), &mut ln.bias);
        }
        a.mean.visit_mut("actor.mean", f);
        a.std.visit_mut("actor.std", f);
        let c = &mut self.critic;
        c.joint_enc.visit_mut("critic.joint_enc", f);
        c.foot_enc.visit_mut("critic.foot_enc", f);
        c.core.visit_mut("critic.core", f);
        c.head.visit_mut("critic.head", f);
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundUrma {
        let mut vars = Vec::new();
        let a = &self.actor;
        let joint_enc = a.joint_enc.bind(tape, &mut vars);
        let foot_enc = a.foot_enc.bind(tape, &mut vars);
        let core = a.core.bind(tape, &mut vars);
        let dec_desc = a.dec_desc.as_ref().map(|d| d.bind(tape, &mut vars));
        let mean_input_ln = a.mean_input_ln.as_ref().map(|ln| {
            let gain = tape.input(ln.gain.clone());
            let bias = tape.input(ln.bias.clone());
            vars.push(gain);
            vars.push(bias);
            (gain, bias)
        });
        let mean = a.mean.bind(tape, &mut vars);
        let std = a.std.bind(tape, &mut vars);
        let c = &self.critic;
        let critic_joint_enc = c.joint_enc.bind(tape, &mut vars);
        let critic_foot_enc = c.foot_enc.bind(tape, &mut vars);
        let critic_core = c.core.bind(tape, &mut vars);
        let critic_head = c.head.bind(tape, &mut vars);
        BoundUrma {
            config: self.config.clone(),
            joint_enc,
            foot_enc,
            core,
            dec_desc,
            mean_input_ln,
            mean,
            std,
            critic_joint_enc,
            critic_foot_enc,
            critic_core,
            critic_head,
            vars,
        }
    }
}

pub struct BoundUrma {
    config: ArchConfig,
    joint_enc: BoundSetEncoder,
    foot_enc: BoundSetEncoder,
    core: BoundMlp,
    dec_desc: Option<BoundMlp>,
    mean_input_ln: Option<(Var, Var)>,
    mean: BoundMlp,
    std: BoundMlp,
    critic_joint_enc: BoundSetEncoder,
    critic_foot_enc: BoundSetEncoder,
    critic_core: BoundMlp,
    critic_head: BoundMlp,
    /// Every parameter var in `visit` order.
    pub vars: Vec<Var>,
}

impl BoundUrma {
    /// Actor pass: action mean and std, each `[B x J]`.
    pub fn actor(&self, tape: &mut Tape, obs: &BatchObs) -> Result<(Var, Var), TensorError> {
        let eps = self.config.softmax_eps;
        let joint_desc = tape.input(obs.joint_desc.clone());
        let joint_obs = tape.input(obs.joint_obs.clone());
        let foot_desc = tape.input(obs.foot_desc.clone());
        let foot_obs = tape.input(obs.foot_obs.clone());
        let general = tape.input(obs.general.clone());

        let joints = self
            .joint_enc
            .encode(tape, joint_desc, joint_obs, obs.joints, eps)?;
        let feet = self
            .foot_enc
            .encode(tape, foot_desc, foot_obs, obs.feet, eps)?;

        let core_in = tape.concat_cols3(general, joints.pooled, feet.pooled)?;
        let action_latent = self.core.apply(tape, core_in)?;

        let dec_desc = match (&self.dec_desc, self.config.shared_desc) {
            (Some(dec), _) => dec.apply(tape, joint_desc)?,
            (None, SharedDescMode::Full) => joints.attention,
            (None, _) => joints.desc_pre_softmax,
        };
        let latent_rep = tape.repeat_rows(action_latent, obs.joints)?;
        let mean_in = tape.concat_cols3(dec_desc, latent_rep, joints.per_element)?;
        let mean_in = match self.mean_input_ln {
            Some((gain, bias)) => tape.layer_norm(mean_in, gain, bias)?,
            None => mean_in,
        };
        let mean_col = self.mean.apply(tape, mean_in)?;
        let mean = tape.reshape(mean_col, obs.batch, obs.joints)?;
        let mean = tape.clamp(mean, -MEAN_CLIP, MEAN_CLIP);

        let std_col = self.std.apply(tape, dec_desc)?;
        let std_col = tape.exp(std_col);
        let std = tape.reshape(std_col, obs.batch, obs.joints)?;
        let std = tape.clamp(std, STD_MIN, STD_MAX);
        Ok((mean, std))
    }

    /// Critic pass: state values `[B x 1]` from the privileged bundle.
    pub fn value(&self, tape: &mut Tape, obs: &BatchObs) -> Result<Var, TensorError> {
        let eps = self.config.softmax_eps;
        let joint_desc = tape.input(obs.joint_desc.clone());
        let joint_obs = tape.input(obs.joint_obs.clone());
        let foot_desc = tape.input(obs.foot_desc.clone());
        let foot_obs = tape.input(obs.foot_obs.clone());
        let general = tape.input(obs.general_priv.clone());

        let joints = self
            .critic_joint_enc
            .encode(tape, joint_desc, joint_obs, obs.joints, eps)?;
        let feet = self
            .critic_foot_enc
            .encode(tape, foot_desc, foot_obs, obs.feet, eps)?;
        let core_in = tape.concat_cols3(general, joints.pooled, feet.pooled)?;
        let latent = self.critic_core.apply(tape, core_in)?;
        self.critic_head.apply(tape, latent)
    }
}
