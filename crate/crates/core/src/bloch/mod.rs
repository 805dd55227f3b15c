//! Band structure of 1D periodic media, nonlocal kernels synthesized from
//! the dispersion relation, and wave-model comparisons.
//!
//! Convention: quasi-periodic modes are written `e^{ikx} φ(x)` with unit
//! cell `[0, 1]` and zone `Z = (-π, π)`; all band data is stored on the
//! nonnegative half `[0, π]` and extended by evenness.

mod bands;
mod synth;
mod wave;

pub use bands::{
    bloch_bands, bloch_bands_converged, rescale_spectrum, BlochSpectrum, RescaledBand,
};
pub use synth::{kernel_from_dispersion, BlendParameters, DispersionKernel};
pub use wave::{
    band_limited_pulse, fine_wave_solve, l2_distance, model_comparison,
    surrogate_error_sweep, surrogate_wave_solve, ComparisonRow, FineWave, ModelComparison,
    SurrogateDispersion, SurrogateSweep, WaveComparisonConfig,
};
