//! Stacking per-step observation bundles of one robot into the batched
//! tensors the networks consume.

use tensorgrad::Tensor;

use crate::env::ObservationBundle;
use crate::morphology::{FOOT_DESC_LEN, JOINT_DESC_LEN};

/// A batch of B timesteps for a single robot (fixed J and F). Joint and
/// foot blocks are `[B*J x width]` with samples contiguous; general
/// blocks are `[B x width]`.
#[derive(Debug, Clone)]
pub struct BatchObs {
    pub batch: usize,
    pub joints: usize,
    pub feet: usize,
    pub joint_obs: Tensor,
    pub joint_desc: Tensor,
    pub foot_obs: Tensor,
    pub foot_desc: Tensor,
    pub general: Tensor,
    /// General observations with the privileged extras appended.
    pub general_priv: Tensor,
}

/// Copy rows, optionally dropping the last `drop_tail` columns of each
/// row (the mass/dims ablation).
fn stack_rows(
    out: &mut Vec<f64>,
    flat: &[f64],
    rows: usize,
    width: usize,
    drop_tail: usize,
) {
    for r in 0..rows {
        let row = &flat[r * width..(r + 1) * width];
        out.extend_from_slice(&row[..width - drop_tail]);
    }
}

impl BatchObs {
    pub fn stack(bundles: &[&ObservationBundle], include_mass_dims: bool) -> Self {
        assert!(!bundles.is_empty());
        let joints = bundles[0].joints;
        let feet = bundles[0].feet;
        let batch = bundles.len();
        let drop = if include_mass_dims { 0 } else { 4 };

        let jd = JOINT_DESC_LEN;
        let fd = FOOT_DESC_LEN;
        let jo = bundles[0].joint_obs.len() / joints;
        let fo = bundles[0].foot_obs.len() / feet;
        let gw = bundles[0].general.len();

        let mut joint_obs = Vec::with_capacity(batch * joints * jo);
        let mut joint_desc = Vec::with_capacity(batch * joints * (jd - drop));
        let mut foot_obs = Vec::with_capacity(batch * feet * fo);
        let mut foot_desc = Vec::with_capacity(batch * feet * (fd - drop));
        let mut general = Vec::with_capacity(batch * (gw - drop));
        let mut general_priv = Vec::with_capacity(batch * (gw - drop + 4));
        for b in bundles {
            assert_eq!(b.joints, joints, "batch mixes joint counts");
            assert_eq!(b.feet, feet, "batch mixes feet counts");
            joint_obs.extend_from_slice(&b.joint_obs);
            foot_obs.extend_from_slice(&b.foot_obs);
            stack_rows(&mut joint_desc, &b.joint_desc, joints, jd, drop);
            stack_rows(&mut foot_desc, &b.foot_desc, feet, fd, drop);
            general.extend_from_slice(&b.general[..gw - drop]);
            general_priv.extend_from_slice(&b.general[..gw - drop]);
            general_priv.extend_from_slice(&b.privileged);
        }

        Self {
            batch,
            joints,
            feet,
            joint_obs: Tensor::new(batch * joints, jo, joint_obs).expect("shape"),
            joint_desc: Tensor::new(batch * joints, jd - drop, joint_desc).expect("shape"),
            foot_obs: Tensor::new(batch * feet, fo, foot_obs).expect("shape"),
            foot_desc: Tensor::new(batch * feet, fd - drop, foot_desc).expect("shape"),
            general: Tensor::new(batch, gw - drop, general).expect("shape"),
            general_priv: Tensor::new(batch, gw - drop + 4, general_priv).expect("shape"),
        }
    }

    pub fn single(bundle: &ObservationBundle, include_mass_dims: bool) -> Self {
        Self::stack(&[bundle], include_mass_dims)
    }
}
