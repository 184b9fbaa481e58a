//! Multi-embodiment locomotion at desk scale: morphology-agnostic
//! policy architectures (attention set encoders plus a universal action
//! decoder, alongside multi-head and padding baselines), a surrogate
//! legged-dynamics environment, a 14-term shaped reward with a penalty
//! curriculum, multi-task PPO with GAE, and the normalized-loss /
//! complexity-bound diagnostics that go with the PPO objective.

pub mod env;
pub mod morphology;
pub mod policy;
pub mod reward;
pub mod scales;
pub mod theory;
pub mod trainer;
