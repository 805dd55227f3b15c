//! Trapezoidal solver for linear Volterra integro-differential equations
//!
//! ```text
//!     u'(t) = B u(t) - ∫₀ᵗ K(s) u(t-s) ds + g(t),    u(0) = u₀,
//! ```
//!
//! with a square Markov matrix `B`, a scalar- or matrix-valued memory
//! kernel `K`, and an optional sampled forcing `g`. The convolution uses
//! trapezoidal quadrature on the step grid; each step is implicit in the
//! Markov term and applies one corrector pass for the kernel endpoint,
//! giving global O(dt²) accuracy on smooth data. The full history is
//! retained (problem sizes here are desk scale).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::time_kernel::TimeKernel;

/// Kernel samples on the solver's step grid: `samples[j] ~ K(j dt)`.
#[derive(Debug, Clone)]
pub enum KernelSamples {
    /// Scalar kernel acting on the state by scaling.
    Scalar(Vec<f64>),
    /// Matrix kernel; every sample must match the state dimension.
    Matrix(Vec<DMatrix<f64>>),
}

impl KernelSamples {
    /// Sample a scalar [`TimeKernel`] onto `steps + 1` points of step `dt`.
    /// The kernel grid must match `dt` and cover `[0, steps * dt]`.
    pub fn from_time_kernel(kernel: &TimeKernel, dt: f64, steps: usize) -> Result<Self> {
        if (kernel.dt() - dt).abs() > 1e-12 * dt.max(kernel.dt()) {
            // Exact resampling is available for kernels in mode form.
            if kernel.modes().is_some() {
                let k = kernel.resample(dt, steps as f64 * dt)?;
                return Ok(Self::Scalar(k.samples().to_vec()));
            }
            return Err(Error::Config(format!(
                "kernel sampled at step {} but solver uses step {dt}",
                kernel.dt()
            )));
        }
        if kernel.len() < steps + 1 {
            return Err(Error::Config(format!(
                "kernel covers {} steps but {} are required",
                kernel.len() - 1,
                steps
            )));
        }
        Ok(Self::Scalar(kernel.samples()[..=steps].to_vec()))
    }

    fn len(&self) -> usize {
        match self {
            Self::Scalar(v) => v.len(),
            Self::Matrix(v) => v.len(),
        }
    }

    fn apply(&self, j: usize, u: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::Scalar(v) => u * v[j],
            Self::Matrix(v) => &v[j] * u,
        }
    }

    fn is_zero(&self) -> bool {
        match self {
            Self::Scalar(v) => v.iter().all(|&x| x == 0.0),
            Self::Matrix(v) => v.iter().all(|m| m.iter().all(|&x| x == 0.0)),
        }
    }
}

/// A solved trajectory on the uniform grid `t_j = j dt`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        (0..self.states.len()).map(|j| j as f64 * self.dt).collect()
    }

    /// Component `i` of the state across all times.
    pub fn component(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|u| u[i]).collect()
    }

    /// Max-over-grid norm of the state.
    pub fn scale(&self) -> f64 {
        self.states.iter().map(|u| u.amax()).fold(0.0, f64::max)
    }

    /// Max-over-grid error of component 0 against a reference function.
    pub fn max_error_against<F: Fn(f64) -> f64>(&self, reference: F) -> f64 {
        self.states
            .iter()
            .enumerate()
            .map(|(j, u)| (u[0] - reference(j as f64 * self.dt)).abs())
            .fold(0.0, f64::max)
    }
}

/// Integrate the Volterra equation to time `t_final` with step `dt`.
///
/// `forcing`, when given, must supply `g(t_j)` for every grid point.
pub fn volterra_solve(
    markov: &DMatrix<f64>,
    kernel: &KernelSamples,
    forcing: Option<&[DVector<f64>]>,
    u0: DVector<f64>,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::Config(format!("need dt > 0 and t_final >= 0, got {dt}, {t_final}")));
    }
    let n = u0.len();
    if markov.nrows() != n || markov.ncols() != n {
        return Err(Error::Config(format!(
            "Markov matrix is {}x{} but the state has dimension {n}",
            markov.nrows(),
            markov.ncols()
        )));
    }
    let steps = (t_final / dt).round().max(0.0) as usize;
    if kernel.len() < steps + 1 {
        return Err(Error::Config(format!(
            "kernel provides {} samples but {} steps need {}",
            kernel.len(),
            steps,
            steps + 1
        )));
    }
    if let Some(g) = forcing {
        if g.len() < steps + 1 {
            return Err(Error::Config(format!(
                "forcing provides {} samples but {} steps need {}",
                g.len(),
                steps,
                steps + 1
            )));
        }
    }

    let id = DMatrix::identity(n, n);
    let implicit = (&id - markov * (0.5 * dt)).lu();
    let kernel_zero = kernel.is_zero();

    let g_at = |j: usize| -> DVector<f64> {
        forcing.map_or_else(|| DVector::zeros(n), |g| g[j].clone())
    };

    let mut states: Vec<DVector<f64>> = Vec::with_capacity(steps + 1);
    states.push(u0);
    // Trapezoidal convolution at the current endpoint, built from final
    // state values only.
    let mut conv_prev = DVector::zeros(n);

    for m in 0..steps {
        let u_m = states[m].clone();
        let rate_m = markov * &u_m - &conv_prev + g_at(m);

        // History part of the convolution at t_{m+1}: everything except
        // the 0.5*dt*K(0)*u_{m+1} endpoint term.
        let mut hist = DVector::zeros(n);
        if !kernel_zero {
            for j in 1..=m {
                hist += kernel.apply(j, &states[m + 1 - j]);
            }
            hist += 0.5 * kernel.apply(m + 1, &states[0]);
            hist *= dt;
        }

        // Predictor, then one corrector pass through the implicit solve.
        let mut u_next = &u_m + dt * &rate_m;
        for _pass in 0..2 {
            let conv_next = if kernel_zero {
                DVector::zeros(n)
            } else {
                &hist + kernel.apply(0, &u_next) * (0.5 * dt)
            };
            let rhs = &u_m + 0.5 * dt * (&rate_m - &conv_next + g_at(m + 1));
            u_next = implicit
                .solve(&rhs)
                .ok_or_else(|| Error::Singular("implicit Markov step matrix".into()))?;
        }

        conv_prev = if kernel_zero {
            DVector::zeros(n)
        } else {
            &hist + kernel.apply(0, &u_next) * (0.5 * dt)
        };
        states.push(u_next);
    }

    Ok(Trajectory { dt, states })
}

/// Scalar convenience wrapper around [`volterra_solve`].
pub fn volterra_solve_scalar(
    markov: f64,
    kernel: &TimeKernel,
    forcing: Option<&[f64]>,
    u0: f64,
    t_final: f64,
    dt: f64,
) -> Result<Vec<f64>> {
    let steps = (t_final / dt).round().max(0.0) as usize;
    let samples = KernelSamples::from_time_kernel(kernel, dt, steps)?;
    let g: Option<Vec<DVector<f64>>> =
        forcing.map(|g| g.iter().map(|&v| DVector::from_element(1, v)).collect());
    let traj = volterra_solve(
        &DMatrix::from_element(1, 1, markov),
        &samples,
        g.as_deref(),
        DVector::from_element(1, u0),
        t_final,
        dt,
    )?;
    Ok(traj.component(0))
}
