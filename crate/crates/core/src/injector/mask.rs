use std::ops::Range;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::InjectError;
use crate::rng::StreamRng;

/// Kinematic channels a perturbation acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Channel {
    Sog,
    Cog,
    Both,
}

impl Channel {
    pub fn has_sog(self) -> bool {
        matches!(self, Channel::Sog | Channel::Both)
    }

    pub fn has_cog(self) -> bool {
        matches!(self, Channel::Cog | Channel::Both)
    }
}

/// Per-node binary mask over one trajectory window plus block metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyMask {
    pub z: Vec<u8>,
    pub s: usize,
    pub m: usize,
    pub y_traj: u8,
    /// σ multiplier; absent for edits that are not σ-scaled.
    pub k_sigma: Option<f64>,
    pub channel: Channel,
}

impl AnomalyMask {
    pub fn clean(w: usize) -> Self {
        AnomalyMask {
            z: vec![0; w],
            s: 0,
            m: 0,
            y_traj: 0,
            k_sigma: None,
            channel: Channel::Both,
        }
    }

    /// Mask with ones on `[s, s + m)`.
    pub fn block(w: usize, s: usize, m: usize, k_sigma: Option<f64>, channel: Channel) -> Self {
        assert!(s + m <= w, "block [{s}, {}) exceeds window {w}", s + m);
        let mut z = vec![0; w];
        z[s..s + m].fill(1);
        let mut mask = AnomalyMask {
            z,
            s,
            m,
            y_traj: 0,
            k_sigma,
            channel,
        };
        mask.y_traj = label_trajectory(&mask);
        mask
    }

    pub fn w(&self) -> usize {
        self.z.len()
    }

    pub fn range(&self) -> Range<usize> {
        self.s..self.s + self.m
    }

    pub fn is_set(&self, t: usize) -> bool {
        self.z.get(t) == Some(&1)
    }

    /// Binary z, ones exactly on one run `[s, s + m)`, and `y_traj` = OR z.
    pub fn check(&self) -> Result<(), String> {
        if self.s + self.m > self.w() {
            return Err(format!("block [{}, {}) exceeds window {}", self.s, self.s + self.m, self.w()));
        }
        if self.m == 0 && self.s != 0 {
            return Err("empty block must start at 0".into());
        }
        for (t, &z) in self.z.iter().enumerate() {
            let want = u8::from(self.range().contains(&t));
            if z != want {
                return Err(format!("z[{t}] = {z}, block [{}, {})", self.s, self.s + self.m));
            }
        }
        if self.y_traj != label_trajectory(self) {
            return Err(format!("y_traj {} disagrees with z", self.y_traj));
        }
        Ok(())
    }
}

/// Trajectory label: 1 iff at least one node is masked.
pub fn label_trajectory(mask: &AnomalyMask) -> u8 {
    u8::from(mask.z.contains(&1))
}

/// Block length `max(1, round(r_node * w))`, capped at `w`.
pub fn block_len(w: usize, r_node: f64) -> usize {
    ((r_node * w as f64).round() as usize).clamp(1, w.max(1))
}

/// Contiguous block of `block_len(w, r_node)` nodes with a uniform start in
/// `[0, w - m]`.
pub fn sample_anomaly_block(w: usize, r_node: f64, rng: &mut StreamRng) -> (usize, usize, Vec<u8>) {
    assert!(w >= 1, "window must hold at least one node");
    let m = block_len(w, r_node);
    let s = rng.gen_range(0..=w - m);
    let mut z = vec![0u8; w];
    z[s..s + m].fill(1);
    (s, m, z)
}

/// `round(n * r_traj)`, halves rounding up, at most `n`.
pub fn selection_count(n: usize, r_traj: f64) -> usize {
    ((n as f64 * r_traj).round() as usize).min(n)
}

/// Exactly `selection_count(ids.len(), r_traj)` ids drawn uniformly without
/// replacement, returned in their input order.
pub fn select_anomalous_trajectories<T: Clone>(ids: &[T], r_traj: f64, rng: &mut StreamRng) -> Vec<T> {
    select_exact(ids, selection_count(ids.len(), r_traj), rng)
}

/// `count` ids drawn uniformly without replacement, in input order.
pub fn select_exact<T: Clone>(ids: &[T], count: usize, rng: &mut StreamRng) -> Vec<T> {
    assert!(count <= ids.len(), "cannot pick {count} of {}", ids.len());
    let mut picked = index::sample(rng, ids.len(), count).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| ids[i].clone()).collect()
}

/// The two ratios governing injection density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioConfig {
    pub r_node: f64,
    pub r_traj: f64,
}

impl Default for RatioConfig {
    fn default() -> Self {
        RatioConfig {
            r_node: 0.5,
            r_traj: 0.1,
        }
    }
}

impl RatioConfig {
    pub fn new(r_node: f64, r_traj: f64) -> Result<Self, InjectError> {
        let c = RatioConfig { r_node, r_traj };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), InjectError> {
        for (name, v) in [("r_node", self.r_node), ("r_traj", self.r_traj)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(InjectError::InvalidRatio(format!("{name} = {v} is outside (0, 1]")));
            }
        }
        Ok(())
    }
}
