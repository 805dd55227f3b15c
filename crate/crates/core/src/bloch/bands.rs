//! Quasi-periodic eigenvalue computation for `-(a(x) u')'` on the unit
//! cell.
//!
//! For each wavenumber `k` the shifted operator acting on periodic `φ` is
//! discretized in factored form `(D + ik S)^H diag(a) (D + ik S)` with `D`
//! the periodic forward difference and `S` the midpoint average, so the
//! matrix is Hermitian positive semidefinite by construction, annihilates
//! constants at `k = 0` exactly, and reproduces `λ₀(k) = k²` exactly for
//! constant coefficients.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::CubicInterp;
use crate::profile::PeriodicProfile;

/// Band table over the nonnegative half of the zone.
#[derive(Debug, Clone)]
pub struct BlochSpectrum {
    /// Wavenumbers `k_i`, uniform on `[0, zone_edge]`.
    k_grid: Vec<f64>,
    /// `bands[m][i]` is the m-th eigenvalue at `k_i`, ascending in `m`.
    bands: Vec<Vec<f64>>,
    /// Cell samples of the first eigenvector per `k` (unit norm).
    first_modes: Vec<Vec<Complex64>>,
    cell_mesh: usize,
    zone_edge: f64,
}

impl BlochSpectrum {
    /// Wrap an externally supplied lowest band (synthetic dispersion data)
    /// on a uniform nonnegative grid.
    pub fn synthetic(k_grid: Vec<f64>, lowest: Vec<f64>) -> Result<Self> {
        if k_grid.len() != lowest.len() || k_grid.len() < 4 {
            return Err(Error::Config("synthetic band needs >= 4 matching samples".into()));
        }
        if k_grid[0] != 0.0 {
            return Err(Error::Config("band grid must start at k = 0".into()));
        }
        let zone_edge = *k_grid.last().unwrap();
        Ok(Self {
            k_grid,
            bands: vec![lowest],
            first_modes: Vec::new(),
            cell_mesh: 0,
            zone_edge,
        })
    }

    pub fn k_grid(&self) -> &[f64] {
        &self.k_grid
    }

    pub fn zone_edge(&self) -> f64 {
        self.zone_edge
    }

    pub fn cell_mesh(&self) -> usize {
        self.cell_mesh
    }

    pub fn n_modes(&self) -> usize {
        self.bands.len()
    }

    pub fn band(&self, m: usize) -> &[f64] {
        &self.bands[m]
    }

    pub fn lowest(&self) -> &[f64] {
        &self.bands[0]
    }

    pub fn first_mode(&self, ki: usize) -> Option<&[Complex64]> {
        self.first_modes.get(ki).map(|v| v.as_slice())
    }

    /// Cubic interpolant of the lowest band on `[0, zone_edge]` with the
    /// even-symmetry slope 0 at `k = 0` and the band-edge slope 0.
    pub fn lowest_interp(&self) -> Result<CubicInterp> {
        let dk = self.k_grid[1] - self.k_grid[0];
        CubicInterp::uniform(0.0, dk, self.bands[0].clone(), Some((0.0, 0.0)))
    }

    /// Quadratic small-k coefficient of the lowest band by Richardson
    /// extrapolation on the two smallest nonzero wavenumbers (the k⁴ term
    /// cancels, leaving an O(k⁴) defect).
    pub fn effective_slope(&self) -> Result<f64> {
        if self.k_grid.len() < 3 {
            return Err(Error::Config("need at least 3 wavenumbers".into()));
        }
        let k1 = self.k_grid[1];
        let k2 = self.k_grid[2];
        let r1 = self.bands[0][1] / (k1 * k1);
        let r2 = self.bands[0][2] / (k2 * k2);
        Ok((4.0 * r1 - r2) / 3.0)
    }
}

/// Assemble the Hermitian cell operator at wavenumber `k` and return its
/// lowest `n_modes` eigenpairs.
fn cell_eigen(
    a_mid: &[f64],
    k: f64,
    n_modes: usize,
) -> (Vec<f64>, Vec<Complex64>) {
    let m = a_mid.len();
    let h = 1.0 / m as f64;
    // Factor M = D + ik S with D forward difference, S midpoint average.
    let mut factor = DMatrix::<Complex64>::zeros(m, m);
    for j in 0..m {
        let next = (j + 1) % m;
        factor[(j, j)] += Complex64::new(-1.0 / h, 0.5 * k);
        factor[(j, next)] += Complex64::new(1.0 / h, 0.5 * k);
    }
    // Strong-form eigenvalue: the h weights of the quadratic form and of
    // the l2 inner product cancel, leaving M^H diag(a) M.
    let mut weighted = factor.clone();
    for j in 0..m {
        for c in 0..m {
            weighted[(j, c)] *= Complex64::new(a_mid[j], 0.0);
        }
    }
    let op = factor.adjoint() * weighted;
    let eig = op.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().take(n_modes).map(|&i| eig.eigenvalues[i]).collect();
    let first: Vec<Complex64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
    (values, first)
}

/// Compute the lowest `n_modes` bands on a uniform `k`-grid of
/// `k_count >= 4` points over `[0, π]`, discretizing the cell on
/// `cell_mesh` nodes.
pub fn bloch_bands(
    profile: &PeriodicProfile,
    k_count: usize,
    n_modes: usize,
    cell_mesh: usize,
) -> Result<BlochSpectrum> {
    if !profile.is_strictly_positive() {
        return Err(Error::Ellipticity(format!(
            "coefficient must be strictly positive, min is {}",
            profile.bounds().0
        )));
    }
    if k_count < 4 || n_modes == 0 {
        return Err(Error::Config("need k_count >= 4 and n_modes >= 1".into()));
    }
    if cell_mesh < 2 * n_modes + 2 || cell_mesh < 8 {
        return Err(Error::Config(format!(
            "cell mesh of {cell_mesh} nodes cannot resolve {n_modes} modes"
        )));
    }
    let h = 1.0 / cell_mesh as f64;
    let a_mid: Vec<f64> =
        (0..cell_mesh).map(|j| profile.eval((j as f64 + 0.5) * h)).collect();

    let zone_edge = std::f64::consts::PI;
    let ks: Vec<f64> =
        (0..k_count).map(|i| zone_edge * i as f64 / (k_count - 1) as f64).collect();
    let results = crate::par::map_items(&ks, |&k| cell_eigen(&a_mid, k, n_modes));

    let mut bands = vec![vec![0.0; k_count]; n_modes];
    let mut first_modes = Vec::with_capacity(k_count);
    for (i, (values, first)) in results.into_iter().enumerate() {
        for (m, &v) in values.iter().enumerate() {
            // The operator is PSD; tiny negative eigensolver roundoff at
            // the bottom of the spectrum is clamped.
            let scale = 4.0 / (h * h) * profile.bounds().1;
            if v < -1e-9 * scale {
                return Err(Error::Domain(format!(
                    "negative eigenvalue {v} beyond roundoff at k = {}",
                    ks[i]
                )));
            }
            bands[m][i] = v.max(0.0);
        }
        first_modes.push(first);
    }
    if bands[0][0].abs() > 1e-10 {
        return Err(Error::Domain(format!(
            "lowest band does not vanish at k = 0: {}",
            bands[0][0]
        )));
    }
    Ok(BlochSpectrum { k_grid: ks, bands, first_modes, cell_mesh, zone_edge })
}

/// Double the cell mesh until the lowest band changes by less than `tol`
/// (max over the grid, relative to the band-edge value).
pub fn bloch_bands_converged(
    profile: &PeriodicProfile,
    k_count: usize,
    n_modes: usize,
    start_mesh: usize,
    tol: f64,
    max_mesh: usize,
) -> Result<BlochSpectrum> {
    let mut mesh = start_mesh;
    let mut current = bloch_bands(profile, k_count, n_modes, mesh)?;
    while 2 * mesh <= max_mesh {
        mesh *= 2;
        let next = bloch_bands(profile, k_count, n_modes, mesh)?;
        let scale = next.lowest().last().copied().unwrap_or(1.0).max(1e-30);
        let change = current
            .lowest()
            .iter()
            .zip(next.lowest())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        current = next;
        if change <= tol * scale {
            break;
        }
    }
    Ok(current)
}

/// The lowest band rescaled to the oscillation scale ε:
/// `λ₀^ε(k) = ε^{-2} λ₀(ε k)`, valid for `|ε k| <= zone_edge`.
#[derive(Debug, Clone)]
pub struct RescaledBand {
    interp: CubicInterp,
    epsilon: f64,
    zone_edge: f64,
}

impl RescaledBand {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Largest resolvable `|k|`, i.e. `zone_edge / ε`.
    pub fn max_wavenumber(&self) -> f64 {
        self.zone_edge / self.epsilon
    }

    pub fn eval(&self, k: f64) -> Result<f64> {
        let cell_k = (self.epsilon * k).abs();
        if cell_k > self.zone_edge * (1.0 + 1e-12) {
            return Err(Error::Range(format!(
                "wavenumber {k} outside the rescaled zone (max {})",
                self.max_wavenumber()
            )));
        }
        let v = self.interp.eval(cell_k.min(self.zone_edge))?;
        Ok(v.max(0.0) / (self.epsilon * self.epsilon))
    }
}

/// Rescale a spectrum's lowest band by ε (cubic interpolation between the
/// stored wavenumbers).
pub fn rescale_spectrum(spectrum: &BlochSpectrum, epsilon: f64) -> Result<RescaledBand> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(RescaledBand {
        interp: spectrum.lowest_interp()?,
        epsilon,
        zone_edge: spectrum.zone_edge(),
    })
}
