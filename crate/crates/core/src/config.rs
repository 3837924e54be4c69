//! Task parameters shared by the simulator, the controllers and the harness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ArmSpec, Obstacle, Point};

/// Which of the two arms. Arm one owns keypoint 0, arm two owns keypoint M-1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Arm {
    One,
    Two,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::One, Arm::Two];

    pub fn other(self) -> Arm {
        match self {
            Arm::One => Arm::Two,
            Arm::Two => Arm::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Arm::One => 0,
            Arm::Two => 1,
        }
    }
}

impl TryFrom<u8> for Arm {
    type Error = String;
    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Arm::One),
            2 => Ok(Arm::Two),
            _ => Err(format!("arm id must be 1 or 2, got {v}")),
        }
    }
}

impl From<Arm> for u8 {
    fn from(a: Arm) -> u8 {
        match a {
            Arm::One => 1,
            Arm::Two => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub workspace_width: f64,
    pub workspace_height: f64,
    /// Number of keypoints along the rope.
    pub keypoints: usize,
    /// Rope length is drawn uniformly from this range for every environment.
    pub dlo_length_min: f64,
    pub dlo_length_max: f64,
    /// Maximum bend at any interior joint, radians.
    pub joint_limit: f64,
    pub obstacle_radius: f64,
    pub obstacle_count: usize,
    pub reach_min: f64,
    pub reach_max: f64,
    /// Gripper clearance from obstacle centers.
    pub clearance: f64,
    /// Largest displacement of a single pick-and-place.
    pub max_step: f64,
    /// Minimum separation between leader and follower pick points.
    pub min_pick_sep: f64,
    pub arm_bases: [Point; 2],
    pub horizon_max: usize,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            workspace_width: 1.0,
            workspace_height: 0.6,
            keypoints: 16,
            dlo_length_min: 0.5,
            dlo_length_max: 0.7,
            joint_limit: 1.0,
            obstacle_radius: 0.04,
            obstacle_count: 2,
            reach_min: 0.15,
            reach_max: 0.45,
            clearance: 0.1,
            max_step: 0.10,
            min_pick_sep: 0.15,
            arm_bases: [Point::new(0.2, 0.3), Point::new(0.8, 0.3)],
            horizon_max: 20,
        }
    }
}

impl TaskConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        let positive = [
            ("workspace_width", self.workspace_width),
            ("workspace_height", self.workspace_height),
            ("dlo_length_min", self.dlo_length_min),
            ("joint_limit", self.joint_limit),
            ("obstacle_radius", self.obstacle_radius),
            ("reach_min", self.reach_min),
            ("clearance", self.clearance),
            ("max_step", self.max_step),
            ("min_pick_sep", self.min_pick_sep),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive and finite"
                )));
            }
        }
        if self.keypoints < 3 {
            return bad("keypoints must be at least 3");
        }
        if self.dlo_length_max < self.dlo_length_min {
            return bad("dlo_length_max must be >= dlo_length_min");
        }
        if self.reach_max <= self.reach_min {
            return bad("reach_max must exceed reach_min");
        }
        if self.clearance < self.obstacle_radius {
            return bad("clearance must be >= obstacle_radius");
        }
        if self.joint_limit >= std::f64::consts::PI {
            return bad("joint_limit must be below pi");
        }
        if self.horizon_max == 0 {
            return bad("horizon_max must be positive");
        }
        if self.arm_bases[0].dist(self.arm_bases[1]) >= 2.0 * self.reach_max {
            return bad("arm workspaces do not overlap");
        }
        if !self.arm_bases.iter().all(|b| b.is_finite()) {
            return bad("arm bases must be finite");
        }
        Ok(())
    }

    pub fn arm_spec(&self, arm: Arm) -> ArmSpec {
        ArmSpec {
            base: self.arm_bases[arm.index()],
            reach_min: self.reach_min,
            reach_max: self.reach_max,
        }
    }

    pub fn obstacles(&self, centers: &[Point]) -> Vec<Obstacle> {
        centers
            .iter()
            .map(|&center| Obstacle {
                center,
                radius: self.obstacle_radius,
                clearance: self.clearance,
            })
            .collect()
    }

    pub fn in_workspace(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x <= self.workspace_width && p.y >= 0.0 && p.y <= self.workspace_height
    }

    /// Length of the flat encoder input, `(M + B) * 2`.
    pub fn state_dim(&self) -> usize {
        (self.keypoints + self.obstacle_count) * 2
    }
}

/// The JSON file read by the command-line tool. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub task: TaskConfig,
    pub train: crate::encoder::TrainConfig,
    pub collect: crate::explore::CollectParams,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.line(), e))?;
        cfg.task.validate()?;
        cfg.train.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        TaskConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_disjoint_arms() {
        let cfg = TaskConfig {
            reach_max: 0.29,
            ..TaskConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_small_chain() {
        let cfg = TaskConfig {
            keypoints: 2,
            ..TaskConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn arm_ids_round_trip() {
        let s = serde_json::to_string(&[Arm::One, Arm::Two]).unwrap();
        assert_eq!(s, "[1,2]");
        assert!(serde_json::from_str::<Arm>("3").is_err());
    }
}
