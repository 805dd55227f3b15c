//! Exact reduction of linear autonomous systems `x' = L x` to a closed
//! equation for a projected quantity of interest:
//!
//! ```text
//!     u'(t) = G u(t) - ∫₀ᵗ Γ(s) u(t-s) ds + f(t),
//! ```
//!
//! with Markov term `G`, memory kernel `Γ`, and fluctuation forcing `f`.
//! Two projections are provided: onto an explicit subspace (matrix-valued
//! kernel) and the rank-one projection onto an observable direction in a
//! weighted inner product (scalar kernel). Matrix exponentials use
//! scaling-and-squaring ([`crate::linalg::expm`]) on the complement block.
//!
//! Sign convention: the kernel enters with a minus sign as written above.
//! An equation written as `u' + b u + ∫ K(t-s) u(s) ds = 0` maps onto this
//! form with `G = -b` and `Γ = K`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{complement_basis, expm, orthonormalize, weighted_dot};
use crate::time_kernel::TimeKernel;
use crate::volterra::{volterra_solve, KernelSamples, Trajectory};

/// A linear autonomous system `x' = L x`, `x(0) = x0`, with optional
/// validated structure flags.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    generator: DMatrix<f64>,
    x0: DVector<f64>,
    skew_symmetric: bool,
    symmetric_negative: bool,
}

impl LinearSystem {
    pub fn new(generator: DMatrix<f64>, x0: DVector<f64>) -> Result<Self> {
        if generator.nrows() != generator.ncols() {
            return Err(Error::Config("generator must be square".into()));
        }
        if generator.nrows() != x0.len() {
            return Err(Error::Config(format!(
                "generator is {}x{} but the state has dimension {}",
                generator.nrows(),
                generator.ncols(),
                x0.len()
            )));
        }
        if generator.iter().any(|v| !v.is_finite()) || x0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("generator and state must be finite".into()));
        }
        Ok(Self { generator, x0, skew_symmetric: false, symmetric_negative: false })
    }

    /// Validate and record skew-symmetry: `||L + L^T|| <= 1e-12 ||L||`.
    pub fn flagged_skew_symmetric(mut self) -> Result<Self> {
        let res = (&self.generator + self.generator.transpose()).norm();
        let scale = self.generator.norm().max(f64::MIN_POSITIVE);
        if res > 1e-12 * scale {
            return Err(Error::Domain(format!(
                "skew-symmetry residual {res:.3e} exceeds 1e-12 relative"
            )));
        }
        self.skew_symmetric = true;
        Ok(self)
    }

    /// Validate and record symmetric negative semidefiniteness.
    pub fn flagged_symmetric_negative(mut self) -> Result<Self> {
        let res = (&self.generator - self.generator.transpose()).norm();
        let scale = self.generator.norm().max(f64::MIN_POSITIVE);
        if res > 1e-12 * scale {
            return Err(Error::Domain(format!(
                "symmetry residual {res:.3e} exceeds 1e-12 relative"
            )));
        }
        let eig = self.generator.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l > 1e-12 * scale) {
            return Err(Error::Domain("generator has a positive eigenvalue".into()));
        }
        self.symmetric_negative = true;
        Ok(self)
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn is_skew_symmetric(&self) -> bool {
        self.skew_symmetric
    }

    /// Exact trajectory `x(t_j) = exp(j dt L) x0` on the step grid,
    /// evaluated by repeated application of one exact step.
    pub fn exact_trajectory(&self, t_final: f64, dt: f64) -> Vec<DVector<f64>> {
        let steps = (t_final / dt).round().max(0.0) as usize;
        let step = expm(&(&self.generator * dt));
        let mut xs = Vec::with_capacity(steps + 1);
        xs.push(self.x0.clone());
        for j in 0..steps {
            let next = &step * &xs[j];
            xs.push(next);
        }
        xs
    }
}

/// Rank-one projection onto an observable direction `a` in the weighted
/// inner product `<u, v> = Σ w_i u_i v_i` (Euclidean when `weights` is
/// `None`): `P v = <v, a> <a, a>^{-1} a`.
#[derive(Debug, Clone)]
pub struct MoriProjection {
    observable: DVector<f64>,
    weights: Option<DVector<f64>>,
}

impl MoriProjection {
    pub fn new(observable: DVector<f64>, weights: Option<DVector<f64>>) -> Result<Self> {
        if let Some(w) = &weights {
            if w.len() != observable.len() {
                return Err(Error::Config("weights must match the observable length".into()));
            }
            if w.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Domain("inner-product weights must be positive".into()));
            }
        }
        let p = Self { observable, weights };
        if !(p.norm_sq() > 0.0) {
            return Err(Error::Domain("observable must have positive norm".into()));
        }
        Ok(p)
    }

    pub fn observable(&self) -> &DVector<f64> {
        &self.observable
    }

    pub fn dot(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        weighted_dot(u, v, self.weights.as_ref())
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(&self.observable, &self.observable)
    }

    /// Apply `Q = I - P`.
    pub fn complement(&self, v: &DVector<f64>) -> DVector<f64> {
        let c = self.dot(v, &self.observable) / self.norm_sq();
        v - c * &self.observable
    }

    /// The matrix of `Q L` in the standard basis.
    fn ql_matrix(&self, l: &DMatrix<f64>) -> DMatrix<f64> {
        let n = l.nrows();
        let mut out = DMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.complement(&l.column(j).clone_owned());
            out.set_column(j, &col);
        }
        out
    }
}

/// Provenance of a reduced model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Projection onto an explicit subspace of dimension `dim`.
    Subspace { dim: usize },
    /// Rank-one observable projection.
    Mori,
}

/// Kernel of a reduced model, scalar or matrix-valued, sampled on the
/// same grid as the fluctuation.
#[derive(Debug, Clone)]
pub enum ReducedKernel {
    Scalar(TimeKernel),
    Matrix { dt: f64, samples: Vec<DMatrix<f64>> },
}

impl ReducedKernel {
    pub fn to_samples(&self, dt: f64, steps: usize) -> Result<KernelSamples> {
        match self {
            Self::Scalar(k) => KernelSamples::from_time_kernel(k, dt, steps),
            Self::Matrix { dt: kdt, samples } => {
                if (kdt - dt).abs() > 1e-12 * dt.max(*kdt) {
                    return Err(Error::Config(format!(
                        "kernel sampled at step {kdt} but solver uses step {dt}"
                    )));
                }
                if samples.len() < steps + 1 {
                    return Err(Error::Config("kernel range too short".into()));
                }
                Ok(KernelSamples::Matrix(samples[..=steps].to_vec()))
            }
        }
    }

    pub fn scalar(&self) -> Option<&TimeKernel> {
        match self {
            Self::Scalar(k) => Some(k),
            Self::Matrix { .. } => None,
        }
    }
}

/// Reduced model `u' = G u - ∫ Γ u + f` with sampled kernel and
/// fluctuation.
#[derive(Debug, Clone)]
pub struct ReducedModel {
    pub markov: DMatrix<f64>,
    pub kernel: ReducedKernel,
    /// Sampled fluctuation. For subspace reductions this is the forcing of
    /// the reduced equation in coarse coordinates; for Mori reductions it
    /// is the full-space orthogonal fluctuation `exp(t QL) Q L a`, which
    /// never forces the correlation equation.
    pub fluctuation: Vec<DVector<f64>>,
    pub dt: f64,
    pub provenance: Provenance,
    /// Reduced initial state in the model's own coordinates.
    pub u0: DVector<f64>,
}

impl ReducedModel {
    /// Integrate the reduced equation with its own fluctuation forcing.
    pub fn solve(&self, t_final: f64) -> Result<Trajectory> {
        let steps = (t_final / self.dt).round().max(0.0) as usize;
        let kernel = self.kernel.to_samples(self.dt, steps)?;
        let forcing: Option<&[DVector<f64>]> = match self.provenance {
            Provenance::Subspace { .. } => Some(&self.fluctuation),
            Provenance::Mori => None,
        };
        if let Some(f) = forcing {
            if f.len() < steps + 1 {
                return Err(Error::Config("fluctuation range too short".into()));
            }
        }
        volterra_solve(&self.markov, &kernel, forcing, self.u0.clone(), t_final, self.dt)
    }
}

/// Reduce onto the span of `basis` (orthonormalized internally): returns
/// the matrix-valued model with
/// `G = P L P`, `Γ(t) = -P L Q exp(t QLQ) Q L P`, `f(t) = P L Q exp(t QLQ) Q x0`,
/// all expressed in coarse coordinates and sampled on the grid
/// `t_j = j dt`, `j = 0 ..= round(t_final/dt)`.
pub fn subspace_reduce(
    system: &LinearSystem,
    basis: &DMatrix<f64>,
    t_final: f64,
    dt: f64,
) -> Result<ReducedModel> {
    if basis.nrows() != system.dim() || basis.ncols() == 0 {
        return Err(Error::Basis(format!(
            "basis is {}x{} but the system has dimension {}",
            basis.nrows(),
            basis.ncols(),
            system.dim()
        )));
    }
    let steps = (t_final / dt).round().max(0.0) as usize;
    let l = system.generator();
    let v_c = orthonormalize(basis, None)?;
    let v_w = complement_basis(&v_c, None)?;
    let r = v_c.ncols();
    let q_dim = v_w.ncols();

    let markov = v_c.transpose() * l * &v_c;
    let u0 = v_c.transpose() * system.x0();

    let mut kernel_samples = Vec::with_capacity(steps + 1);
    let mut fluct = Vec::with_capacity(steps + 1);
    if q_dim == 0 {
        for _ in 0..=steps {
            kernel_samples.push(DMatrix::zeros(r, r));
            fluct.push(DVector::zeros(r));
        }
    } else {
        let a_block = v_w.transpose() * l * &v_w;
        let into_w = v_w.transpose() * l * &v_c; // (q_dim x r)
        let out_of_w = v_c.transpose() * l * &v_w; // (r x q_dim)
        let step = expm(&(&a_block * dt));
        let mut y = into_w.clone(); // exp(t QLQ) Q L P
        let mut z = v_w.transpose() * system.x0(); // exp(t QLQ) Q x0
        for j in 0..=steps {
            kernel_samples.push(-(&out_of_w * &y));
            fluct.push(&out_of_w * &z);
            if j < steps {
                y = &step * y;
                z = &step * z;
            }
        }
    }

    Ok(ReducedModel {
        markov,
        kernel: ReducedKernel::Matrix { dt, samples: kernel_samples },
        fluctuation: fluct,
        dt,
        provenance: Provenance::Subspace { dim: r },
        u0,
    })
}

/// Rank-one Mori reduction: scalar `G = <La, a>/<a, a>`, scalar kernel
/// `Γ(t) = -<L exp(t QL) Q L a, a>/<a, a>`, and the full-space fluctuation
/// `f(t) = exp(t QL) Q L a`.
pub fn mori_reduce(
    system: &LinearSystem,
    projection: &MoriProjection,
    t_final: f64,
    dt: f64,
) -> Result<ReducedModel> {
    if projection.observable().len() != system.dim() {
        return Err(Error::Config("observable must match the system dimension".into()));
    }
    let steps = (t_final / dt).round().max(0.0) as usize;
    let l = system.generator();
    let a = projection.observable();
    let na = projection.norm_sq();
    let g = projection.dot(&(l * a), a) / na;

    let ql = projection.ql_matrix(l);
    let step = expm(&(&ql * dt));
    let mut f = projection.complement(&(l * a));
    let mut gamma = Vec::with_capacity(steps + 1);
    let mut fluct = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        gamma.push(-projection.dot(&(l * &f), a) / na);
        fluct.push(f.clone());
        if j < steps {
            f = &step * &f;
        }
    }

    let u0 = projection.dot(system.x0(), a) / na;
    Ok(ReducedModel {
        markov: DMatrix::from_element(1, 1, g),
        kernel: ReducedKernel::Scalar(TimeKernel::from_samples(dt, gamma)?),
        fluctuation: fluct,
        dt,
        provenance: Provenance::Mori,
        u0: DVector::from_element(1, u0),
    })
}

/// Max pointwise residual of the skew-generator identity
/// `Γ(t) = <f(t), f(0)> <a, a>^{-1}` for a Mori-reduced model.
///
/// Refuses systems not flagged (and validated) skew-symmetric; for
/// weighted projections the skewness must also hold in the weighted inner
/// product, which is re-verified here.
pub fn fluctuation_dissipation_check(
    system: &LinearSystem,
    projection: &MoriProjection,
    reduced: &ReducedModel,
) -> Result<f64> {
    if !system.is_skew_symmetric() {
        return Err(Error::Domain(
            "fluctuation-dissipation relation is only asserted for systems flagged \
             skew-symmetric"
                .into(),
        ));
    }
    if reduced.provenance != Provenance::Mori {
        return Err(Error::Config("check applies to Mori-reduced models".into()));
    }
    // Weighted skewness <Lu, v> = -<u, Lv>: residual of W L + L^T W.
    let l = system.generator();
    let n = l.nrows();
    let wl = match &projection.weights {
        Some(w) => {
            let mut m = l.clone();
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] *= w[i];
                }
            }
            m
        }
        None => l.clone(),
    };
    let res = (&wl + wl.transpose()).norm();
    if res > 1e-12 * wl.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(
            "generator is not skew-symmetric in the projection's inner product".into(),
        ));
    }

    let gamma = reduced
        .kernel
        .scalar()
        .ok_or_else(|| Error::Config("expected a scalar kernel".into()))?;
    let na = projection.norm_sq();
    let f0 = &reduced.fluctuation[0];
    let mut worst = 0.0f64;
    for (j, f) in reduced.fluctuation.iter().enumerate() {
        let rhs = projection.dot(f, f0) / na;
        worst = worst.max((gamma.samples()[j] - rhs).abs());
    }
    Ok(worst)
}

/// Time-correlation report for a Mori reduction.
#[derive(Debug, Clone)]
pub struct CorrelationReport {
    pub dt: f64,
    /// Normalized correlation `C(t) = <x(t), a> / <a, a>` of the full
    /// system started at `x(0) = a`.
    pub correlation: Vec<f64>,
    /// Max interior residual of `C' = G C - ∫ Γ C` with centered
    /// differences and trapezoidal convolution.
    pub defect: f64,
    /// Max `|<f(t), a>|` over the grid, scaled by `<a,a>`.
    pub orthogonality: f64,
}

/// Evolve the full system from `x(0) = a` and test that its normalized
/// correlation satisfies the reduced equation without any forcing term.
pub fn correlation_evolution(
    system: &LinearSystem,
    projection: &MoriProjection,
    reduced: &ReducedModel,
) -> Result<CorrelationReport> {
    if reduced.provenance != Provenance::Mori {
        return Err(Error::Config("correlation evolution applies to Mori reductions".into()));
    }
    let gamma = reduced
        .kernel
        .scalar()
        .ok_or_else(|| Error::Config("expected a scalar kernel".into()))?;
    let dt = reduced.dt;
    let steps = reduced.fluctuation.len() - 1;
    let a = projection.observable();
    let na = projection.norm_sq();

    let step = expm(&(system.generator() * dt));
    let mut x = a.clone();
    let mut c = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        c.push(projection.dot(&x, a) / na);
        if j < steps {
            x = &step * &x;
        }
    }

    let g = reduced.markov[(0, 0)];
    let k = gamma.samples();
    let mut defect = 0.0f64;
    for j in 1..steps {
        let cdot = (c[j + 1] - c[j - 1]) / (2.0 * dt);
        let mut conv = 0.5 * (k[0] * c[j] + k[j] * c[0]);
        for i in 1..j {
            conv += k[i] * c[j - i];
        }
        conv *= dt;
        defect = defect.max((cdot - (g * c[j] - conv)).abs());
    }

    let mut ortho = 0.0f64;
    for f in &reduced.fluctuation {
        ortho = ortho.max(projection.dot(f, a).abs() / na);
    }

    Ok(CorrelationReport { dt, correlation: c, defect, orthogonality: ortho })
}

/// Result of localizing a sampled kernel into exponential modes plus the
/// augmented first-order system that realizes the memory term with extra
/// state variables.
#[derive(Debug, Clone)]
pub struct LocalizedKernel {
    /// Fitted `(rate, weight)` pairs with nonpositive rates.
    pub modes: Vec<(f64, f64)>,
    /// Max pointwise error of the mode reconstruction on the sample grid.
    pub kernel_residual: f64,
    /// Generator of the augmented `(u, v_1 .. v_m)` system: `u' = G u - Σ v_j`,
    /// `v_j' = w_j u + ρ_j v_j`, so that `v_j(t) = ∫ w_j e^{ρ_j (t-s)} u(s) ds`.
    pub augmented_generator: DMatrix<f64>,
    /// Max deviation of the augmented system's `u` from the Volterra
    /// reference with the original sampled kernel.
    pub trajectory_error: f64,
}

/// Fit `Γ(t) ≈ Σ_j w_j exp(ρ_j t)` with `ρ_j <= 0` by linear prediction on
/// the uniform samples (roots via a companion eigenproblem), clamp rates to
/// the stable half-line, and refit the weights by least squares.
pub fn fit_exponential_modes(
    kernel: &TimeKernel,
    mode_count: usize,
) -> Result<(Vec<(f64, f64)>, f64)> {
    if mode_count == 0 {
        return Err(Error::Config("mode count must be at least 1".into()));
    }
    let s = kernel.samples();
    let dt = kernel.dt();
    let n = s.len();
    if n < 2 * mode_count + 1 {
        return Err(Error::Config(format!(
            "{n} samples cannot determine {mode_count} exponential modes"
        )));
    }
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok((vec![(0.0, 0.0); mode_count], 0.0));
    }

    // Linear prediction on a decimated lag q: s[k + m q] = Σ_j c_j s[k + j q].
    // With lag-1 prediction the roots exp(ρ dt) cluster at 1 for small dt
    // and the root extraction loses accuracy; a lag of a fraction of the
    // sample window separates them.
    let m = mode_count;
    let q = ((n - 1) / (8 * m)).max(1);
    let rows = n - m * q;
    let mut design = DMatrix::zeros(rows, m);
    let mut rhs = DVector::zeros(rows);
    for k in 0..rows {
        for j in 0..m {
            design[(k, j)] = s[k + j * q];
        }
        rhs[k] = s[k + m * q];
    }
    let coeff = design
        .svd(true, true)
        .solve(&rhs, 1e-13 * scale)
        .map_err(|e| Error::Fit(e.to_string()))?;

    // Companion matrix of z^m - c_{m-1} z^{m-1} - ... - c_0.
    let mut comp = DMatrix::zeros(m, m);
    for j in 1..m {
        comp[(j, j - 1)] = 1.0;
    }
    for j in 0..m {
        comp[(j, m - 1)] = coeff[j];
    }
    let roots = comp.complex_eigenvalues();

    let lag = q as f64 * dt;
    let mut rates = Vec::with_capacity(m);
    for z in roots.iter() {
        if z.norm() < 1e-300 {
            return Err(Error::Fit(format!("prediction root {z} too close to zero")));
        }
        let log = z.ln();
        if log.im.abs() > 1e-6 * (1.0 + log.re.abs()) {
            return Err(Error::Fit(format!(
                "fitted rate {} is substantially complex; only decaying real modes are \
                 representable",
                log / lag
            )));
        }
        // Stability projection onto the nonpositive half-line.
        rates.push((log.re / lag).min(0.0));
    }
    rates.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Least-squares refinement of the weights on the full sample set.
    let mut basis = DMatrix::zeros(n, m);
    for k in 0..n {
        let t = k as f64 * dt;
        for (j, &rate) in rates.iter().enumerate() {
            basis[(k, j)] = (rate * t).exp();
        }
    }
    let sample_vec = DVector::from_column_slice(s);
    let weights = basis
        .clone()
        .svd(true, true)
        .solve(&sample_vec, 1e-13 * scale)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let residual = (basis * &weights - &sample_vec).amax();

    let modes: Vec<(f64, f64)> = rates.into_iter().zip(weights.iter().copied()).collect();
    Ok((modes, residual))
}

/// Localize a scalar memory kernel: fit exponential modes, build the
/// augmented local system, and measure both the kernel fit error and the
/// trajectory discrepancy against the Volterra reference for
/// `u' = markov·u - ∫ Γ u`, `u(0) = u0`.
pub fn localize_kernel(
    markov: f64,
    kernel: &TimeKernel,
    mode_count: usize,
    u0: f64,
    t_final: f64,
) -> Result<LocalizedKernel> {
    let (modes, kernel_residual) = fit_exponential_modes(kernel, mode_count)?;
    let m = modes.len();
    let dt = kernel.dt();
    let steps = (t_final / dt).round().max(0.0) as usize;

    let mut gen = DMatrix::zeros(m + 1, m + 1);
    gen[(0, 0)] = markov;
    for (j, &(rate, weight)) in modes.iter().enumerate() {
        gen[(0, j + 1)] = -1.0;
        gen[(j + 1, 0)] = weight;
        gen[(j + 1, j + 1)] = rate;
    }

    // Augmented trajectory by exact stepping of the local linear system.
    let step = expm(&(&gen * dt));
    let mut state = DVector::zeros(m + 1);
    state[0] = u0;
    let mut u_aug = Vec::with_capacity(steps + 1);
    for j in 0..=steps {
        u_aug.push(state[0]);
        if j < steps {
            state = &step * &state;
        }
    }

    let reference = crate::volterra::volterra_solve_scalar(markov, kernel, None, u0, t_final, dt)?;
    let trajectory_error = u_aug
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    Ok(LocalizedKernel { modes, kernel_residual, augmented_generator: gen, trajectory_error })
}
