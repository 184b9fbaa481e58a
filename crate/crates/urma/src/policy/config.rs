//! Architecture configuration and presets.

use serde::{Deserialize, Serialize};

use crate::env::{FOOT_OBS_LEN, GENERAL_OBS_LEN, JOINT_OBS_LEN, PRIVILEGED_OBS_LEN};
use crate::morphology::{FOOT_DESC_LEN, JOINT_DESC_LEN};

/// How the decoder's description encoding is obtained: its own network,
/// or reusing the joint encoder's description path (after the softmax
/// for `Full`, before it for `Partial`), with gradients flowing to both
/// uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharedDescMode {
    Separate,
    Full,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArchConfig {
    /// Width of the per-element latents the attention routes into.
    pub latent_dim: usize,
    pub desc_hidden: Vec<usize>,
    pub obs_hidden: Vec<usize>,
    /// Core widths; the last entry is the action latent width.
    pub core_hidden: Vec<usize>,
    pub dec_desc_hidden: Vec<usize>,
    pub mean_hidden: Vec<usize>,
    pub std_hidden: Vec<usize>,
    /// LayerNorm after every input layer plus one inside the action
    /// mean network; `false` removes every LayerNorm.
    pub layer_norm: bool,
    pub shared_desc: SharedDescMode,
    /// Keep mass and body dimensions in observations and descriptions.
    pub include_mass_dims: bool,
    /// Temperature floor added to the learnable softmax temperature.
    pub softmax_eps: f64,
    pub tau_init: f64,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            latent_dim: 32,
            desc_hidden: vec![64, 64],
            obs_hidden: vec![64, 64],
            core_hidden: vec![256, 256],
            dec_desc_hidden: vec![64, 64],
            mean_hidden: vec![128, 128],
            std_hidden: vec![64],
            layer_norm: true,
            shared_desc: SharedDescMode::Separate,
            include_mass_dims: true,
            softmax_eps: 0.015,
            tau_init: 1.0,
        }
    }
}

impl ArchConfig {
    /// Sizes tuned so a full actor+critic pair lands at the published
    /// parameter count (430k +- 10k).
    pub fn paper_scale() -> Self {
        Self {
            latent_dim: 32,
            desc_hidden: vec![96, 64],
            obs_hidden: vec![96, 96],
            core_hidden: vec![384, 256],
            dec_desc_hidden: vec![96, 64],
            mean_hidden: vec![128, 128],
            std_hidden: vec![64],
            ..Self::default()
        }
    }

    /// Small preset for fast desk-scale training runs.
    pub fn tiny() -> Self {
        Self {
            latent_dim: 10,
            desc_hidden: vec![20],
            obs_hidden: vec![20],
            core_hidden: vec![40],
            dec_desc_hidden: vec![20],
            mean_hidden: vec![40],
            std_hidden: vec![20],
            ..Self::default()
        }
    }

    /// Entries removed from the tail of descriptions and general
    /// observations when mass/dims are ablated away.
    pub fn dropped_tail(&self) -> usize {
        if self.include_mass_dims {
            0
        } else {
            4
        }
    }

    pub fn joint_desc_width(&self) -> usize {
        JOINT_DESC_LEN - self.dropped_tail()
    }

    pub fn foot_desc_width(&self) -> usize {
        FOOT_DESC_LEN - self.dropped_tail()
    }

    pub fn joint_obs_width(&self) -> usize {
        JOINT_OBS_LEN
    }

    pub fn foot_obs_width(&self) -> usize {
        FOOT_OBS_LEN
    }

    pub fn general_width(&self) -> usize {
        GENERAL_OBS_LEN - self.dropped_tail()
    }

    pub fn general_priv_width(&self) -> usize {
        self.general_width() + PRIVILEGED_OBS_LEN
    }

    pub fn core_out(&self) -> usize {
        *self.core_hidden.last().expect("core has at least one layer")
    }
}
