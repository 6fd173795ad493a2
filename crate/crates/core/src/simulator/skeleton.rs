//! Refinement-consistent noise realizations.
//!
//! Each mode stores its compound-Poisson jumps above `ε` and, on a base grid
//! of `M` cells, Gaussian surrogate increments for the jumps below `ε`. Finer
//! cells come from Brownian-bridge midpoint splits drawn from streams keyed
//! by (mode, level, parent cell), so every level sees the same noise. The
//! increments are held in fixed point so children sum to their parent exactly.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::rng::StreamKey;
use crate::stable::JumpDecomposition;

/// Fixed-point quantum `2^-44`.
pub const QUANTUM_BITS: i32 = 44;

/// Default expected number of big jumps per mode over the horizon.
pub const DEFAULT_JUMP_BUDGET: f64 = 100.0;

#[inline]
pub fn to_fixed(x: f64) -> i64 {
    (x * 2f64.powi(QUANTUM_BITS)).round() as i64
}

#[inline]
pub fn from_fixed(q: i64) -> f64 {
    q as f64 * 2f64.powi(-QUANTUM_BITS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSkeleton {
    horizon: f64,
    alpha: f64,
    epsilon: f64,
    base_cells: usize,
    /// Variance rate of the small-jump surrogate for the standard law.
    small_variance_rate: f64,
    /// Per mode: `(time, size)` of standard-law jumps above `ε`, sorted.
    jumps: Vec<Vec<(f64, f64)>>,
    /// Per mode: fixed-point Gaussian increments on the base cells.
    base: Vec<Vec<i64>>,
    key: StreamKey,
}

impl NoiseSkeleton {
    /// `epsilon = None` picks the threshold giving [`DEFAULT_JUMP_BUDGET`]
    /// expected jumps per mode.
    pub fn new(
        modes: usize,
        alpha: f64,
        horizon: f64,
        epsilon: Option<f64>,
        base_cells: usize,
        key: StreamKey,
    ) -> Result<Self, SimError> {
        if modes == 0 || base_cells == 0 {
            return Err(SimError::Config("skeleton needs at least one mode and one cell".into()));
        }
        let dec = match epsilon {
            Some(e) => JumpDecomposition::new(alpha, e)?,
            None => JumpDecomposition::with_jump_budget(alpha, horizon, DEFAULT_JUMP_BUDGET)?,
        };
        if !(horizon > 0.0) {
            return Err(SimError::Config(format!("horizon must be positive, got {horizon}")));
        }
        let sd = (dec.small_jump_variance_rate() * horizon / base_cells as f64).sqrt();
        let mut jumps = Vec::with_capacity(modes);
        let mut base = Vec::with_capacity(modes);
        for k in 0..modes {
            let mode_key = key.child(k as u64);
            jumps.push(dec.sample_big_jumps(horizon, &mut mode_key.named("jumps").rng()));
            let mut rng = mode_key.named("base").rng();
            base.push(
                (0..base_cells)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        to_fixed(sd * z)
                    })
                    .collect(),
            );
        }
        Ok(Self {
            horizon,
            alpha,
            epsilon: dec.threshold(),
            base_cells,
            small_variance_rate: dec.small_jump_variance_rate(),
            jumps,
            base,
            key,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn base_cells(&self) -> usize {
        self.base_cells
    }

    pub fn modes(&self) -> usize {
        self.jumps.len()
    }

    pub fn small_variance_rate(&self) -> f64 {
        self.small_variance_rate
    }

    pub fn jumps(&self, mode: usize) -> &[(f64, f64)] {
        &self.jumps[mode]
    }

    /// Fixed-point increments on the `M 2^level` cells of `mode`.
    pub fn cells(&self, mode: usize, level: u32) -> Vec<i64> {
        let mut cur = self.base[mode].clone();
        let mut width = self.horizon / self.base_cells as f64;
        for l in 1..=level {
            // bridge midpoint of a cell of width w: conditional sd √(σ² w)/2
            let sd = (self.small_variance_rate * width).sqrt() / 2.0;
            let level_key = self.key.child(mode as u64).named("bridge").child(l as u64);
            let mut next = Vec::with_capacity(2 * cur.len());
            for (i, parent) in cur.iter().enumerate() {
                let z: f64 = StandardNormal.sample(&mut level_key.child(i as u64).rng());
                let left = parent / 2 + to_fixed(sd * z);
                next.push(left);
                next.push(parent - left);
            }
            cur = next;
            width /= 2.0;
        }
        cur
    }

    /// Gaussian increments for a uniform step count: `M 2^l` steps use level
    /// `l`; divisors of `M` sum groups of base cells.
    pub fn step_increments(&self, mode: usize, steps: usize) -> Result<Vec<f64>, SimError> {
        let m = self.base_cells;
        if steps >= m && steps.is_multiple_of(m) && (steps / m).is_power_of_two() {
            let level = (steps / m).trailing_zeros();
            return Ok(self.cells(mode, level).into_iter().map(from_fixed).collect());
        }
        if steps > 0 && steps < m && m.is_multiple_of(steps) {
            let group = m / steps;
            return Ok(self.base[mode].chunks(group).map(|c| from_fixed(c.iter().sum())).collect());
        }
        Err(SimError::IncompatibleGrid { steps, base_cells: m })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skeleton() -> NoiseSkeleton {
        NoiseSkeleton::new(2, 1.6, 1.0, None, 8, StreamKey::new(42)).unwrap()
    }

    #[test]
    fn children_sum_to_parents_exactly() {
        let s = skeleton();
        for mode in 0..2 {
            for level in 0..6 {
                let parent = s.cells(mode, level);
                let child = s.cells(mode, level + 1);
                for (i, p) in parent.iter().enumerate() {
                    assert_eq!(child[2 * i] + child[2 * i + 1], *p);
                }
            }
        }
    }

    #[test]
    fn coarse_steps_sum_base_cells() {
        let s = skeleton();
        let base: f64 = s.step_increments(0, 8).unwrap().iter().sum();
        let coarse: f64 = s.step_increments(0, 2).unwrap().iter().sum();
        let fine: f64 = s.step_increments(0, 64).unwrap().iter().sum();
        assert_eq!(base, coarse);
        assert!((base - fine).abs() < 1e-12);
        assert!(s.step_increments(0, 12).is_err());
        assert!(s.step_increments(0, 3).is_err());
    }

    #[test]
    fn events_inside_horizon_and_sorted() {
        let s = skeleton();
        for mode in 0..2 {
            let j = s.jumps(mode);
            assert!(j.iter().all(|&(t, z)| t > 0.0 && t <= 1.0 && z.abs() > s.epsilon()));
            assert!(j.windows(2).all(|w| w[0].0 < w[1].0));
        }
    }

    #[test]
    fn default_threshold_targets_jump_budget() {
        let s = NoiseSkeleton::new(1, 1.5, 2.0, None, 4, StreamKey::new(1)).unwrap();
        let d = JumpDecomposition::new(1.5, s.epsilon()).unwrap();
        assert!((d.big_jump_rate() * 2.0 - DEFAULT_JUMP_BUDGET).abs() < 1e-9);
    }

    #[test]
    fn fine_increment_variance_matches_rate() {
        let s = NoiseSkeleton::new(1, 1.5, 1.0, Some(0.2), 16, StreamKey::new(9)).unwrap();
        let inc = s.step_increments(0, 16 * 256).unwrap();
        let dt = 1.0 / inc.len() as f64;
        let var = inc.iter().map(|v| v * v).sum::<f64>() / inc.len() as f64;
        let expect = s.small_variance_rate() * dt;
        assert!((var / expect - 1.0).abs() < 0.1, "{var} vs {expect}");
    }
}
