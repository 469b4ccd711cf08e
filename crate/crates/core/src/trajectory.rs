//! Recorded simulation output: scalar time series plus optional field
//! snapshots.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    /// Cluster position in the lab frame.
    pub x_c: f64,
    /// Instantaneous velocity `-η ∂ₓs(t, x_c)`.
    pub v_c: f64,
    /// Total deformation `∫ s dx`.
    pub s_tot: f64,
    pub norm_inf: f64,
    /// `‖∂ₓs‖_∞`; the W^{1,∞} norm reported in CSV output is `norm_inf + grad_inf`.
    pub grad_inf: f64,
}

impl TrajectorySample {
    pub fn norm_w1(&self) -> f64 {
        self.norm_inf + self.grad_inf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    /// Lab-frame sample positions.
    pub x: Vec<f64>,
    pub s: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub snapshots: Vec<Snapshot>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.x_c).collect()
    }

    pub fn last(&self) -> Option<&TrajectorySample> {
        self.samples.last()
    }

    /// Least-squares slope of `x_c` against `t` over samples with `t ∈ [t0, t1]`.
    pub fn position_slope(&self, t0: f64, t1: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .samples
            .iter()
            .filter(|s| s.t >= t0 && s.t <= t1)
            .map(|s| (s.t, s.x_c))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - mx)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}
