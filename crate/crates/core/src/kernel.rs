//! Even discrete interaction kernels on symmetric offset grids.

use crate::error::{Error, Result};

/// An even, real interaction kernel sampled on the symmetric offset grid
/// `s_i = i * spacing`, `i = -m..=m`.
///
/// The horizon is the largest `|offset|` whose value exceeds the drop
/// tolerance; values beyond it are retained but are numerically
/// negligible by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    spacing: f64,
    /// `values[m + i]` is the kernel at offset `i * spacing`.
    values: Vec<f64>,
    drop_tolerance: f64,
    horizon: f64,
}

impl DiscreteKernel {
    /// Build from values on the symmetric grid (odd length `2m + 1`,
    /// center entry at offset 0). Evenness must hold to 1e-14 relative.
    pub fn new(spacing: f64, values: Vec<f64>, drop_tolerance: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::Domain(format!("kernel spacing must be positive, got {spacing}")));
        }
        if values.len() % 2 != 1 {
            return Err(Error::Domain(format!(
                "kernel needs an odd sample count (symmetric grid), got {}",
                values.len()
            )));
        }
        let m = values.len() / 2;
        let scale = values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for i in 1..=m {
            let diff = (values[m + i] - values[m - i]).abs();
            if diff > 1e-14 * scale.max(1e-300) {
                return Err(Error::Domain(format!(
                    "kernel not even at offset {} * spacing: {} vs {}",
                    i,
                    values[m + i],
                    values[m - i]
                )));
            }
        }
        let mut horizon = 0.0;
        for i in (0..=m).rev() {
            if values[m + i].abs() > drop_tolerance {
                horizon = i as f64 * spacing;
                break;
            }
        }
        Ok(Self { spacing, values, drop_tolerance, horizon })
    }

    /// Build from one-sided values `half[i]`, `i = 0..=m`, mirrored so
    /// evenness holds exactly.
    pub fn from_half(spacing: f64, half: &[f64], drop_tolerance: f64) -> Result<Self> {
        if half.is_empty() {
            return Err(Error::Domain("kernel needs at least the offset-0 sample".into()));
        }
        let m = half.len() - 1;
        let mut values = vec![0.0; 2 * m + 1];
        for i in 0..=m {
            values[m + i] = half[i];
            values[m - i] = half[i];
        }
        Self::new(spacing, values, drop_tolerance)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Half-width `m` of the offset grid: offsets run `-m..=m`.
    pub fn half_width(&self) -> usize {
        self.values.len() / 2
    }

    /// Value at signed offset index `i` (0 outside the stored grid).
    pub fn value_at(&self, i: i64) -> f64 {
        let m = self.half_width() as i64;
        if i < -m || i > m {
            0.0
        } else {
            self.values[(i + m) as usize]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Signed offsets `i * spacing` aligned with [`Self::values`].
    pub fn offsets(&self) -> Vec<f64> {
        let m = self.half_width() as i64;
        (-m..=m).map(|i| i as f64 * self.spacing).collect()
    }

    pub fn drop_tolerance(&self) -> f64 {
        self.drop_tolerance
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Trapezoid mass `∫ γ ds` on the offset grid. On a symmetric grid with
    /// negligible endpoint values this equals `spacing * Σ values`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing
    }

    /// Second moment `∫ γ(s) s² ds` on the offset grid.
    pub fn second_moment(&self) -> f64 {
        let m = self.half_width() as i64;
        (-m..=m)
            .map(|i| {
                let s = i as f64 * self.spacing;
                self.value_at(i) * s * s
            })
            .sum::<f64>()
            * self.spacing
    }

    /// Cosine transform `∫ γ(s) cos(k s) ds` on the offset grid.
    pub fn cosine_transform(&self, k: f64) -> f64 {
        let m = self.half_width() as i64;
        let mut acc = self.value_at(0);
        for i in 1..=m {
            acc += 2.0 * self.value_at(i) * (k * i as f64 * self.spacing).cos();
        }
        acc * self.spacing
    }
}
