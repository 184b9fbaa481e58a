//! Optional per-episode trajectory dumps: one CSV per episode with a
//! header row, consumed by offline analysis and the test oracles.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::env::EnvState;
use crate::reward::RewardBreakdown;

pub struct TrajectoryWriter {
    out: BufWriter<File>,
    joints: usize,
    feet: usize,
}

impl TrajectoryWriter {
    pub fn create(path: impl AsRef<Path>, joints: usize, feet: usize) -> std::io::Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        let mut header = vec![
            "step".to_string(),
            "vx".into(),
            "vy".into(),
            "vz".into(),
            "pitch".into(),
            "roll".into(),
            "wx".into(),
            "wy".into(),
            "wyaw".into(),
            "height".into(),
            "cmd_x".into(),
            "cmd_y".into(),
            "cmd_yaw".into(),
        ];
        for j in 0..joints {
            header.push(format!("q{j}"));
            header.push(format!("qd{j}"));
            header.push(format!("a{j}"));
        }
        for f in 0..feet {
            header.push(format!("contact{f}"));
            header.push(format!("air{f}"));
        }
        for t in 1..=14 {
            header.push(format!("t{t}"));
        }
        header.push("reward".into());
        writeln!(out, "{}", header.join(","))?;
        Ok(Self { out, joints, feet })
    }

    pub fn record(
        &mut self,
        state: &EnvState,
        action: &[f64],
        reward: &RewardBreakdown,
    ) -> std::io::Result<()> {
        let mut row = Vec::with_capacity(13 + 3 * self.joints + 2 * self.feet + 15);
        row.push(state.step_index.to_string());
        for v in state.v {
            row.push(format!("{v:.9}"));
        }
        row.push(format!("{:.9}", state.pitch));
        row.push(format!("{:.9}", state.roll));
        for w in state.omega {
            row.push(format!("{w:.9}"));
        }
        row.push(format!("{:.9}", state.height));
        for c in state.command {
            row.push(format!("{c:.9}"));
        }
        for j in 0..self.joints {
            row.push(format!("{:.9}", state.q[j]));
            row.push(format!("{:.9}", state.qd[j]));
            row.push(format!("{:.9}", action[j]));
        }
        for f in 0..self.feet {
            row.push(if state.contact[f] { "1".into() } else { "0".into() });
            row.push(format!("{:.9}", state.air_time[f]));
        }
        for t in reward.weighted {
            row.push(format!("{t:.9}"));
        }
        row.push(format!("{:.9}", reward.total));
        writeln!(self.out, "{}", row.join(","))
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}
