//! Atomic probability measures.

use crate::error::{Error, Result};
use crate::profile::{PeriodicProfile, ProfileRepr};

/// A finite atomic probability measure: atoms `(weight, value)` with
/// nonnegative weights summing to 1 (within 1e-14).
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Domain("measure needs at least one atom".into()));
        }
        let mut total = 0.0;
        for &(w, v) in &atoms {
            if !(w >= 0.0) {
                return Err(Error::Domain(format!("negative weight {w}")));
            }
            if !v.is_finite() {
                return Err(Error::Domain(format!("non-finite atom value {v}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-14 {
            return Err(Error::Domain(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms })
    }

    /// The value distribution of a piecewise-constant profile over one
    /// period: each distinct value weighted by its Lebesgue fraction.
    pub fn from_profile(profile: &PeriodicProfile) -> Result<Self> {
        match profile.repr() {
            ProfileRepr::PiecewiseConstant { breakpoints, values } => {
                let mut atoms: Vec<(f64, f64)> = Vec::new();
                for i in 0..values.len() {
                    let right =
                        if i + 1 < breakpoints.len() { breakpoints[i + 1] } else { 1.0 };
                    let w = right - breakpoints[i];
                    match atoms.iter_mut().find(|(_, v)| *v == values[i]) {
                        Some((wa, _)) => *wa += w,
                        None => atoms.push((w, values[i])),
                    }
                }
                // Weights are interval lengths partitioning [0,1]; renormalize
                // the roundoff so the constructor invariant holds exactly.
                let total: f64 = atoms.iter().map(|(w, _)| w).sum();
                for (w, _) in &mut atoms {
                    *w /= total;
                }
                Self::new(atoms)
            }
            ProfileRepr::Sampled { samples } => {
                let w = 1.0 / samples.len() as f64;
                let mut atoms: Vec<(f64, f64)> = Vec::new();
                for &v in samples {
                    match atoms.iter_mut().find(|(_, av)| *av == v) {
                        Some((wa, _)) => *wa += w,
                        None => atoms.push((w, v)),
                    }
                }
                let total: f64 = atoms.iter().map(|(w, _)| w).sum();
                for (w, _) in &mut atoms {
                    *w /= total;
                }
                Self::new(atoms)
            }
        }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|&(w, _)| w).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.atoms.iter().map(|&(_, v)| v).collect()
    }

    /// Expectation of a function of the atom values.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|&(w, v)| w * f(v)).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|v| v)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.expect(|v| (v - m) * (v - m))
    }
}
