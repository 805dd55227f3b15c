//! Sampled memory kernels on uniform time grids.

use crate::error::{Error, Result};

/// A memory kernel sampled on the uniform grid `t_j = j * dt`, `j = 0..=n`,
/// optionally carrying an exponential-mode representation
/// `K(t) = Σ weight_j * exp(rate_j * t)` with nonpositive rates.
///
/// When modes are present the reconstruction error against the stored
/// samples is recorded in `fit_residual`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeKernel {
    dt: f64,
    samples: Vec<f64>,
    modes: Option<Vec<(f64, f64)>>,
    fit_residual: f64,
}

impl TimeKernel {
    pub fn from_samples(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        if samples.is_empty() {
            return Err(Error::Domain("kernel needs at least the t=0 sample".into()));
        }
        Ok(Self { dt, samples, modes: None, fit_residual: 0.0 })
    }

    /// Build from exponential modes `(rate, weight)`, sampling on
    /// `[0, horizon]` with step `dt`. Rates must be nonpositive.
    pub fn from_modes(dt: f64, horizon: f64, modes: Vec<(f64, f64)>) -> Result<Self> {
        if !(dt > 0.0) || !(horizon >= 0.0) {
            return Err(Error::Domain(format!(
                "need dt > 0 and horizon >= 0, got dt={dt}, horizon={horizon}"
            )));
        }
        for &(rate, _) in &modes {
            if rate > 0.0 || !rate.is_finite() {
                return Err(Error::Domain(format!("mode rate {rate} must be nonpositive")));
            }
        }
        let n = (horizon / dt).round() as usize;
        let samples = (0..=n)
            .map(|j| {
                let t = j as f64 * dt;
                modes.iter().map(|&(rate, w)| w * (rate * t).exp()).sum()
            })
            .collect();
        Ok(Self { dt, samples, modes: Some(modes), fit_residual: 0.0 })
    }

    /// Attach an exponential-mode representation to sampled data, storing
    /// the max reconstruction error as the fit residual.
    pub fn with_modes(mut self, modes: Vec<(f64, f64)>) -> Result<Self> {
        for &(rate, _) in &modes {
            if rate > 0.0 || !rate.is_finite() {
                return Err(Error::Domain(format!("mode rate {rate} must be nonpositive")));
            }
        }
        let mut residual = 0.0f64;
        for (j, &s) in self.samples.iter().enumerate() {
            let t = j as f64 * self.dt;
            let rec: f64 = modes.iter().map(|&(rate, w)| w * (rate * t).exp()).sum();
            residual = residual.max((rec - s).abs());
        }
        self.modes = Some(modes);
        self.fit_residual = residual;
        Ok(self)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn modes(&self) -> Option<&[(f64, f64)]> {
        self.modes.as_deref()
    }

    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    /// Resample onto step `dt` over `[0, horizon]`; exact when modes are
    /// present, otherwise requires `dt` to be a multiple of the stored step
    /// within the stored range.
    pub fn resample(&self, dt: f64, horizon: f64) -> Result<Self> {
        if let Some(modes) = &self.modes {
            return Self::from_modes(dt, horizon, modes.clone());
        }
        let ratio = dt / self.dt;
        let stride = ratio.round() as usize;
        if stride == 0 || (ratio - stride as f64).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "requested step {dt} is not a multiple of the stored step {}",
                self.dt
            )));
        }
        let n = (horizon / dt).round() as usize;
        if n * stride >= self.samples.len() {
            return Err(Error::Config(format!(
                "requested horizon {horizon} beyond stored range {}",
                self.horizon()
            )));
        }
        let samples = (0..=n).map(|j| self.samples[j * stride]).collect();
        Self::from_samples(dt, samples)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_reconstruct_samples() {
        let k = TimeKernel::from_modes(0.1, 2.0, vec![(-1.5, -0.25)]).unwrap();
        assert_eq!(k.len(), 21);
        assert!((k.samples()[10] - (-0.25 * (-1.5f64).exp())).abs() < 1e-15);
        assert_eq!(k.fit_residual(), 0.0);
    }

    #[test]
    fn positive_rate_rejected() {
        assert!(TimeKernel::from_modes(0.1, 1.0, vec![(0.5, 1.0)]).is_err());
    }

    #[test]
    fn with_modes_records_residual() {
        let samples = vec![1.0, 0.5, 0.25];
        let k = TimeKernel::from_samples(1.0, samples)
            .unwrap()
            .with_modes(vec![(-std::f64::consts::LN_2, 1.0)])
            .unwrap();
        assert!(k.fit_residual() < 1e-15);
    }

    #[test]
    fn resample_by_stride() {
        let k = TimeKernel::from_samples(0.5, vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let r = k.resample(1.0, 1.0).unwrap();
        assert_eq!(r.samples(), &[0.0, 2.0]);
        assert!(k.resample(0.75, 1.0).is_err());
    }
}
