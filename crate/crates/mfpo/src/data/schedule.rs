//! Forward-diffusion noise schedules.
//!
//! A schedule is a list of per-step factors `beta_j`, each strictly inside
//! (0, 1). The cumulative signal level at step `t` is the running product
//! `alpha_bar(t) = prod_{j=0..t} beta_j`, which is strictly decreasing.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    // Cumulative products, precomputed in index order at construction.
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Build a schedule from raw factors, validating each lies in (0, 1).
    pub fn new(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidSchedule("empty schedule".to_string()));
        }
        for (j, &b) in betas.iter().enumerate() {
            if !b.is_finite() || b <= 0.0 || b >= 1.0 {
                return Err(Error::InvalidSchedule(format!(
                    "beta[{j}] = {b} not strictly inside (0, 1)"
                )));
            }
        }
        let mut alpha_bars = Vec::with_capacity(betas.len());
        let mut prod = 1.0;
        for &b in &betas {
            prod *= b;
            alpha_bars.push(prod);
        }
        Ok(Self { betas, alpha_bars })
    }

    /// Linear ramp `beta_j = 1 - strength * (j + 1) / T^2` over `T` steps.
    ///
    /// The default strength 24 puts the mid-schedule signal level near 0.05
    /// (alpha_bar(T/2) ~ 0.05 for any T), so the half-way step is heavily
    /// corrupted but not yet pure noise, and the final step is near zero.
    pub fn linear(steps: usize) -> Result<Self> {
        Self::linear_with_strength(steps, 24.0)
    }

    pub fn linear_with_strength(steps: usize, strength: f64) -> Result<Self> {
        Self::polynomial(steps, strength, 1.0)
    }

    /// Ramp `beta_j = 1 - strength * ((j + 1) / T)^power / T`. Power 1 is
    /// the linear ramp; higher powers keep early steps nearly noise-free
    /// and concentrate corruption late.
    pub fn polynomial(steps: usize, strength: f64, power: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidSchedule("zero-length schedule".to_string()));
        }
        if !strength.is_finite() || strength <= 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "strength {strength} must be positive"
            )));
        }
        if !power.is_finite() || power <= 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "power {power} must be positive"
            )));
        }
        let t = steps as f64;
        let betas: Vec<f64> = (0..steps)
            .map(|j| 1.0 - strength * ((j as f64 + 1.0) / t).powf(power) / t)
            .collect();
        Self::new(betas)
    }

    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// Cumulative product `prod_{j=0..t} beta_j`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bars
            .get(t)
            .copied()
            .ok_or(Error::StepOutOfRange {
                t,
                len: self.betas.len(),
            })
    }
}
