//! Synthesis of an even nonlocal interaction kernel from a dispersion
//! relation.
//!
//! A kernel `γ` with `∫γ = 1` satisfies
//! `∫ γ(s)(1 - cos(k s)) ds = 1 - γ̂(k)` with `γ̂` its cosine transform,
//! so prescribing the lowest band `λ₀(k)` on the zone amounts to setting
//! `γ̂(k) = 1 - λ̃₀(k)` there, where `λ̃₀ = α λ₀` is rescaled so its values
//! stay inside a unit window (the inverse scale is recorded for callers
//! that need the physical amplitude back). Outside the zone the transform
//! is extended to 0 by a quintic Hermite blend over a transition band and
//! the kernel is recovered on the conjugate displacement grid of a
//! symmetric DFT pair, which makes evenness, unit mass, and the transform
//! round trip exact by construction.

use crate::bloch::bands::BlochSpectrum;
use crate::error::{Error, Result};
use crate::kernel::DiscreteKernel;

/// Transition-band configuration for the smooth extension of the
/// prescribed transform to zero.
#[derive(Debug, Clone, Copy)]
pub struct BlendParameters {
    /// End of the resolved band data (at most the zone edge).
    pub k_edge: f64,
    /// Wavenumber beyond which the transform is identically zero.
    pub k_cut: f64,
    /// Target maximum of the rescaled band inside the window `(0, 1)`;
    /// no rescaling is applied when the band already stays below 1.
    pub window: f64,
}

impl BlendParameters {
    pub fn new(k_edge: f64, k_cut: f64) -> Self {
        Self { k_edge, k_cut, window: 0.9 }
    }
}

/// A synthesized kernel with its construction record.
#[derive(Debug, Clone)]
pub struct DispersionKernel {
    pub kernel: DiscreteKernel,
    /// Amplitude scale α applied to the band before synthesis; divide the
    /// kernel relation by α to recover the physical dispersion.
    pub amplitude_scale: f64,
    pub blend: BlendParameters,
    /// Mass deviation of the raw inverse transform before the unit-mass
    /// enforcement rescale (roundoff-level by construction).
    pub raw_mass_defect: f64,
    /// Max over the resolved band grid of
    /// `|∫γ(s)(1 - cos ks) ds - α λ₀(k)|`.
    pub dispersion_residual: f64,
    /// Value of the (rescaled) transform at the band edge before blending.
    pub edge_value: f64,
}

/// Quintic Hermite on `[0, 1]` with prescribed value/slope/curvature at 0
/// and all three zero at 1.
fn quintic_decay(t: f64, p0: f64, m0: f64, c0: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    p0 * (1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5)
        + m0 * (t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5)
        + 0.5 * c0 * (t2 - 3.0 * t3 + 3.0 * t4 - t5)
}

/// Build the kernel from a spectrum's lowest band.
///
/// `dk` is the transform-grid spacing; the displacement grid is its DFT
/// conjugate (spacing `2π/(N dk)` with `N` samples over `[-k_cut, k_cut]`).
pub fn kernel_from_dispersion(
    spectrum: &BlochSpectrum,
    blend: BlendParameters,
    dk: f64,
) -> Result<DispersionKernel> {
    if !(blend.k_cut > blend.k_edge) {
        return Err(Error::Config(format!(
            "transition band is empty: k_cut = {} <= k_edge = {}",
            blend.k_cut, blend.k_edge
        )));
    }
    if !(blend.window > 0.0 && blend.window < 1.0) {
        return Err(Error::Config(format!(
            "window must lie in (0, 1), got {}",
            blend.window
        )));
    }
    if blend.k_edge > spectrum.zone_edge() * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "k_edge = {} beyond the resolved band range {}",
            blend.k_edge,
            spectrum.zone_edge()
        )));
    }
    if !(dk > 0.0) || dk > blend.k_edge / 8.0 {
        return Err(Error::Config(format!(
            "transform grid spacing {dk} too coarse for k_edge {}",
            blend.k_edge
        )));
    }

    let interp = spectrum.lowest_interp()?;

    // Amplitude window: rescale only when the band exceeds 1 somewhere.
    let band_max = spectrum
        .lowest()
        .iter()
        .zip(spectrum.k_grid())
        .filter(|(_, &k)| k <= blend.k_edge * (1.0 + 1e-12))
        .fold(0.0f64, |m, (&v, _)| m.max(v));
    let alpha = if band_max <= 1.0 { 1.0 } else { blend.window / band_max };

    // Hermite data at the band edge: value, slope, and a second-difference
    // curvature estimate from the stored band samples.
    let edge_lambda = interp.eval(blend.k_edge)?;
    let edge_slope = interp.eval_derivative(blend.k_edge)?;
    let grid_dk = spectrum.k_grid()[1] - spectrum.k_grid()[0];
    let band = spectrum.lowest();
    let n_band = band.len();
    let edge_curv = if n_band >= 3 {
        (band[n_band - 1] - 2.0 * band[n_band - 2] + band[n_band - 3]) / (grid_dk * grid_dk)
    } else {
        0.0
    };
    let edge_value = 1.0 - alpha * edge_lambda;

    let transform = |k: f64| -> Result<f64> {
        let k = k.abs();
        if k <= blend.k_edge {
            Ok(1.0 - alpha * interp.eval(k)?)
        } else if k < blend.k_cut {
            let t = (k - blend.k_edge) / (blend.k_cut - blend.k_edge);
            let len = blend.k_cut - blend.k_edge;
            Ok(quintic_decay(
                t,
                edge_value,
                -alpha * edge_slope * len,
                -alpha * edge_curv * len * len,
            ))
        } else {
            Ok(0.0)
        }
    };

    // Symmetric DFT pair: k_j = j dk, j = -m..=m, and the conjugate
    // displacement grid ds = 2π/(N dk).
    let m = (blend.k_cut / dk).round() as usize;
    let n = 2 * m + 1;
    let ds = 2.0 * std::f64::consts::PI / (n as f64 * dk);
    let ghat: Vec<f64> = (0..=m).map(|j| transform(j as f64 * dk)).collect::<Result<_>>()?;

    let two_pi = 2.0 * std::f64::consts::PI;
    let half: Vec<f64> = (0..=m)
        .map(|i| {
            let mut acc = ghat[0];
            for j in 1..=m {
                // Angle reduced by exact index arithmetic: k_j s_i = 2π i j / N.
                let ang = two_pi * ((i * j) % n) as f64 / n as f64;
                acc += 2.0 * ghat[j] * ang.cos();
            }
            acc * dk / two_pi
        })
        .collect();

    let raw_mass: f64 = ds * (half[0] + 2.0 * half[1..].iter().sum::<f64>());
    let raw_mass_defect = (raw_mass - 1.0).abs();
    if raw_mass_defect > 1e-6 {
        return Err(Error::Config(format!(
            "raw kernel mass {raw_mass} far from 1; the band data does not vanish at k = 0"
        )));
    }
    let scaled: Vec<f64> = half.iter().map(|v| v / raw_mass).collect();
    let kernel = DiscreteKernel::from_half(ds, &scaled, 1e-13)?;

    // Residual of the defining relation on the resolved band grid.
    let mut residual = 0.0f64;
    for (&k, &lam) in spectrum.k_grid().iter().zip(spectrum.lowest()) {
        if k > blend.k_edge * (1.0 + 1e-12) {
            continue;
        }
        let lhs = 1.0 - kernel.cosine_transform(k);
        residual = residual.max((lhs - alpha * lam).abs());
    }

    Ok(DispersionKernel {
        kernel,
        amplitude_scale: alpha,
        blend,
        raw_mass_defect,
        dispersion_residual: residual,
        edge_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::PeriodicProfile;

    fn gaussian_spectrum() -> BlochSpectrum {
        let k: Vec<f64> = (0..=400).map(|i| 8.0 * i as f64 / 400.0).collect();
        let lam: Vec<f64> = k.iter().map(|&k| 1.0 - (-k * k / 2.0).exp()).collect();
        BlochSpectrum::synthetic(k, lam).unwrap()
    }

    #[test]
    fn gaussian_dispersion_recovers_gaussian_kernel() {
        let spec = gaussian_spectrum();
        let blend = BlendParameters::new(8.0, 16.0);
        let dk = 0.0125;
        let out = kernel_from_dispersion(&spec, blend, dk).unwrap();
        assert_eq!(out.amplitude_scale, 1.0);
        let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let m = out.kernel.half_width() as i64;
        let mut worst = 0.0f64;
        for i in -m..=m {
            let s = i as f64 * out.kernel.spacing();
            if s.abs() <= 10.0 {
                let expect = norm * (-s * s / 2.0).exp();
                worst = worst.max((out.kernel.value_at(i) - expect).abs());
            }
        }
        assert!(worst <= 1e-8, "max pointwise error {worst}");
        assert!(out.dispersion_residual <= 1e-6, "residual {}", out.dispersion_residual);
    }

    #[test]
    fn unit_mass_and_evenness_exact() {
        let spec = gaussian_spectrum();
        let out = kernel_from_dispersion(&spec, BlendParameters::new(8.0, 16.0), 0.05).unwrap();
        assert!((out.kernel.mass() - 1.0).abs() <= 1e-10);
        let m = out.kernel.half_width() as i64;
        for i in 1..=m {
            assert_eq!(out.kernel.value_at(i), out.kernel.value_at(-i));
        }
    }

    #[test]
    fn transform_round_trip_on_conjugate_grid() {
        let spec = gaussian_spectrum();
        let dk = 0.05;
        let out = kernel_from_dispersion(&spec, BlendParameters::new(8.0, 16.0), dk).unwrap();
        // Forward transform at the construction wavenumbers reproduces the
        // prescribed data (up to the unit-mass rescale).
        for j in (0..=(16.0 / dk) as usize).step_by(40) {
            let k = j as f64 * dk;
            let expect = if k <= 8.0 {
                1.0 - (1.0 - (-k * k / 2.0).exp())
            } else {
                // Inside the blend: just check the round trip against the
                // kernel's own transform continuity, skip.
                continue;
            };
            let got = out.kernel.cosine_transform(k);
            assert!(
                (got - expect).abs() <= 1e-10 + expect.abs() * 1e-10,
                "k = {k}: {got} vs {expect}"
            );
        }
    }

    #[test]
    fn laminate_band_kernel_reports_residual() {
        let p = PeriodicProfile::two_valued(1.0, 2.0, 0.5).unwrap();
        let spec = crate::bloch::bands::bloch_bands(&p, 65, 1, 64).unwrap();
        let edge = spec.zone_edge();
        let out =
            kernel_from_dispersion(&spec, BlendParameters::new(edge, 2.0 * edge), 0.02).unwrap();
        // The band exceeds 1 at the zone edge, so an amplitude window is
        // engaged and the mass is still exactly 1.
        assert!(out.amplitude_scale < 1.0);
        assert!((out.kernel.mass() - 1.0).abs() <= 1e-10);
        // The residual is reported, not asserted small; it reflects the
        // non-uniqueness of the smooth extension.
        assert!(out.dispersion_residual.is_finite());
    }

    #[test]
    fn misordered_blend_band_rejected() {
        let spec = gaussian_spectrum();
        let blend = BlendParameters::new(8.0, 6.0);
        assert!(matches!(
            kernel_from_dispersion(&spec, blend, 0.05),
            Err(Error::Config(_))
        ));
    }
}
