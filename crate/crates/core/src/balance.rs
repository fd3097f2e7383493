//! Load metrics and the material-particle center displacement law.
//!
//! Each worker reports four times per step. From them:
//!
//! * `P = t_md / t_emd` is the share of elapsed MD time that was spent on
//!   our own computation (1 on a dedicated CPU);
//! * `W = t_work / (P * t_elapsed)` is the weighting factor. Workers in
//!   balance have equal `W`.
//!
//! Centers then move by
//! `dR(i) = a L(i) / N_n(i) * sum_j (W(i) - W(j)) (R(i) - R(j)) / |R(i) - R(j)|`
//! over the neighbors `j` of `i`, which pushes busy subdomains away from
//! their less loaded neighbors so those neighbors take over particles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Decomposition, MpId, Point2};

#[derive(Debug, Error, PartialEq)]
pub enum BalanceError {
    #[error("degenerate timing sample: {0}")]
    DegenerateTiming(&'static str),
    #[error("material particles {a} and {b} share the same center")]
    CoincidentCenters { a: MpId, b: MpId },
    #[error("invalid balance configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Per-worker, per-step times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TimingSample {
    /// CPU time spent in MD computation.
    pub t_md: f64,
    /// Elapsed time of the MD computation.
    pub t_emd: f64,
    /// CPU time of MD plus communication.
    pub t_work: f64,
    /// Elapsed time of the whole step.
    pub t_elapsed: f64,
}

impl TimingSample {
    /// Checks `0 < t_md <= t_emd <= t_elapsed` and `t_md <= t_work <= t_elapsed`,
    /// allowing `tol` seconds of measurement slack.
    pub fn check(&self, tol: f64) -> Result<(), &'static str> {
        let all = [self.t_md, self.t_emd, self.t_work, self.t_elapsed];
        if all.iter().any(|t| !t.is_finite()) {
            return Err("non-finite time");
        }
        if self.t_md <= 0.0 {
            return Err("t_md must be positive");
        }
        if self.t_md > self.t_emd + tol {
            return Err("t_md exceeds t_emd");
        }
        if self.t_emd > self.t_elapsed + tol {
            return Err("t_emd exceeds t_elapsed");
        }
        if self.t_md > self.t_work + tol {
            return Err("t_md exceeds t_work");
        }
        if self.t_work > self.t_elapsed + tol {
            return Err("t_work exceeds t_elapsed");
        }
        Ok(())
    }
}

/// `P` and `W` for one worker and step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadMetrics {
    pub p: f64,
    pub w: f64,
}

/// Weighting factor after clamping into (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weight {
    pub value: f64,
    /// The raw value fell outside (0, 1] and was clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceConfig {
    /// Gain `a` of the displacement law, in [0, 1].
    pub gain: f64,
    /// Exponential smoothing factor applied to `W` before the law, in (0, 1].
    pub smoothing_alpha: f64,
    /// Largest `max W - min W` regarded as balanced.
    pub imbalance_tolerance: f64,
}

impl Default for BalanceConfig {
    fn default() -> Self {
        BalanceConfig { gain: 0.5, smoothing_alpha: 0.3, imbalance_tolerance: 0.10 }
    }
}

impl BalanceConfig {
    pub fn validate(&self) -> Result<(), BalanceError> {
        if !(0.0..=1.0).contains(&self.gain) {
            return Err(BalanceError::InvalidConfig("gain must lie in [0, 1]"));
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha <= 1.0) {
            return Err(BalanceError::InvalidConfig("smoothing_alpha must lie in (0, 1]"));
        }
        if !(self.imbalance_tolerance >= 0.0) {
            return Err(BalanceError::InvalidConfig("imbalance_tolerance must be non-negative"));
        }
        Ok(())
    }
}

/// `P = t_md / t_emd`.
pub fn normalized_md_time(s: &TimingSample) -> Result<f64, BalanceError> {
    if !(s.t_emd > 0.0) {
        return Err(BalanceError::DegenerateTiming("t_emd is zero"));
    }
    if !(s.t_md > 0.0) {
        return Err(BalanceError::DegenerateTiming("t_md is zero"));
    }
    Ok((s.t_md / s.t_emd).min(1.0))
}

/// `W = t_work / (P t_elapsed)`, clamped into (0, 1].
pub fn weighting_factor(s: &TimingSample) -> Result<Weight, BalanceError> {
    let p = normalized_md_time(s)?;
    if !(s.t_elapsed > 0.0) {
        return Err(BalanceError::DegenerateTiming("t_elapsed is zero"));
    }
    let raw = s.t_work / (p * s.t_elapsed);
    if !raw.is_finite() {
        return Err(BalanceError::DegenerateTiming("non-finite weighting factor"));
    }
    if raw > 1.0 {
        Ok(Weight { value: 1.0, clamped: true })
    } else if raw <= 0.0 {
        Ok(Weight { value: f64::MIN_POSITIVE, clamped: true })
    } else {
        Ok(Weight { value: raw, clamped: false })
    }
}

/// Both metrics of one sample.
pub fn load_metrics(s: &TimingSample) -> Result<LoadMetrics, BalanceError> {
    Ok(LoadMetrics { p: normalized_md_time(s)?, w: weighting_factor(s)?.value })
}

/// Displacement of MP `i`'s center. `w` is indexed by MP id; only `i` and
/// its neighbors are read. Returns zero for an MP without neighbors.
pub fn displacement(i: MpId, decomp: &Decomposition, w: &[f64], cfg: &BalanceConfig) -> Result<Point2, BalanceError> {
    let nbrs = decomp.neighbors.neighbors(i);
    if nbrs.is_empty() {
        return Ok(Point2::ZERO);
    }
    let ri = decomp.mps[i].center;
    let mut sum = Point2::ZERO;
    for &j in nbrs {
        let rij = ri - decomp.mps[j].center;
        let len = rij.norm();
        if len == 0.0 {
            return Err(BalanceError::CoincidentCenters { a: i.min(j), b: i.max(j) });
        }
        sum += rij * ((w[i] - w[j]) / len);
    }
    let scale = cfg.gain * decomp.mps[i].linear_size / nbrs.len() as f64;
    Ok(sum * scale)
}

/// `R(n+1) = R(n) + dR(n)`, clamped to the domain; advances the step counter.
pub fn apply_displacement(mut decomp: Decomposition, displacements: &[Point2]) -> Decomposition {
    assert_eq!(displacements.len(), decomp.mps.len(), "one displacement per MP");
    let bounds = decomp.bounds;
    for (mp, &d) in decomp.mps.iter_mut().zip(displacements) {
        mp.center = bounds.clamp(mp.center + d);
    }
    decomp.step += 1;
    decomp
}

/// `max W - min W`.
pub fn imbalance(w: &[f64]) -> f64 {
    let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if w.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

/// Axes along which centers may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionConstraint {
    #[default]
    #[serde(rename = "free_2d")]
    Free2d,
    /// Realizes a 1D decomposition inside a 2D domain.
    CentersMoveXOnly,
}

impl MotionConstraint {
    pub fn apply(self, d: Point2) -> Point2 {
        match self {
            MotionConstraint::Free2d => d,
            MotionConstraint::CentersMoveXOnly => Point2::new(d.x, 0.0),
        }
    }
}

/// Exponential moving average of each MP's `W`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSmoother {
    alpha: f64,
    state: Vec<Option<f64>>,
}

impl WeightSmoother {
    pub fn new(n: usize, alpha: f64) -> Self {
        WeightSmoother { alpha, state: vec![None; n] }
    }

    /// Folds in one step's values and returns the smoothed vector.
    pub fn update(&mut self, w: &[f64]) -> Vec<f64> {
        self.state
            .iter_mut()
            .zip(w)
            .map(|(s, &x)| {
                let next = match *s {
                    Some(prev) => prev + self.alpha * (x - prev),
                    None => x,
                };
                *s = Some(next);
                next
            })
            .collect()
    }

    pub fn current(&self) -> Option<Vec<f64>> {
        self.state.iter().copied().collect()
    }
}
