//! Weak limits of oscillatory exponential decay and the memory equations
//! they satisfy.
//!
//! The fine model is `∂u/∂t + a(x/ε) u = 0`, `u(x, 0) = v(x)`, whose
//! solution `v(x) exp(-t a(x/ε))` converges weakly (as ε → 0, for a
//! 1-periodic rate) to a mixture of exponentials weighted by the value
//! distribution of the rate over one period. That limit is not a single
//! exponential; it solves an evolution equation with a memory kernel,
//!
//! ```text
//!     u⁰'(t) + b u⁰(t) + ∫₀ᵗ K(t-s) u⁰(s) ds = 0,
//! ```
//!
//! which this module extracts exactly from the diagonal realization of the
//! mixture via the rank-one reduction machinery of [`crate::mz`] (with
//! `b = -G` and `K = Γ` in that module's sign convention).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{complement_basis, golden_min, orthonormalize};
use crate::measure::AtomicMeasure;
use crate::profile::PeriodicProfile;
use crate::time_kernel::TimeKernel;
use crate::volterra::{volterra_solve, KernelSamples};

/// The fine-scale decay problem with an oscillatory rate.
#[derive(Debug, Clone)]
pub struct OscillatoryDecayProblem {
    profile: PeriodicProfile,
    initial: Vec<f64>,
}

impl OscillatoryDecayProblem {
    /// Requires a strictly positive rate profile (decay, not growth).
    pub fn new(profile: PeriodicProfile, initial: Vec<f64>) -> Result<Self> {
        if !profile.is_strictly_positive() {
            return Err(Error::Ellipticity(format!(
                "rate profile must be strictly positive, min is {}",
                profile.bounds().0
            )));
        }
        Ok(Self { profile, initial })
    }

    pub fn profile(&self) -> &PeriodicProfile {
        &self.profile
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Value distribution of the rate over one period.
    pub fn rate_measure(&self) -> Result<AtomicMeasure> {
        AtomicMeasure::from_profile(&self.profile)
    }

    /// Pointwise fine solution `v(x_i) exp(-t a(x_i/ε))` on a spatial grid.
    pub fn fine_solution(&self, x: &[f64], epsilon: f64, times: &[f64]) -> Vec<Vec<f64>> {
        x.iter()
            .zip(self.initial.iter())
            .map(|(&xi, &vi)| {
                let rate = self.profile.eval_scaled(xi, epsilon);
                times.iter().map(|&t| vi * (-rate * t).exp()).collect()
            })
            .collect()
    }
}

/// Memory equation `u' + b u + ∫ K u = 0` with coefficient `b` and kernel
/// `K` in exponential-mode form.
#[derive(Debug, Clone)]
pub struct MemoryEquation {
    pub coefficient: f64,
    pub kernel: TimeKernel,
}

impl MemoryEquation {
    /// Integrate the memory equation from `u(0) = u0` with the Volterra
    /// stepper; returns the trajectory on the step grid.
    pub fn solve(&self, u0: f64, t_final: f64, dt: f64) -> Result<Vec<f64>> {
        crate::volterra::volterra_solve_scalar(
            -self.coefficient,
            &self.kernel,
            None,
            u0,
            t_final,
            dt,
        )
    }
}

/// Measure-averaged decay `u⁰(x_i, t_j) = v_i Σ w_k exp(-λ_k t_j)`,
/// returned as one trajectory row per spatial point.
pub fn weak_limit_solution(
    measure: &AtomicMeasure,
    v: &[f64],
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    if measure.is_empty() {
        return Err(Error::Domain("empty measure".into()));
    }
    if measure.values().iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Domain("atom values must be positive decay rates".into()));
    }
    let decay: Vec<f64> = times.iter().map(|&t| measure.expect(|l| (-l * t).exp())).collect();
    Ok(v.iter().map(|&vi| decay.iter().map(|&d| vi * d).collect()).collect())
}

/// Scalar weak limit with unit initial datum.
pub fn weak_limit_scalar(measure: &AtomicMeasure, times: &[f64]) -> Result<Vec<f64>> {
    Ok(weak_limit_solution(measure, &[1.0], times)?.remove(0))
}

/// Extract the memory equation `(b, K)` whose solution reproduces the
/// weak limit of the given measure.
///
/// The construction reduces the diagonal system `x_k' = -λ_k x_k` under
/// the weight-averaged rank-one projection. Because the weighted generator
/// is symmetric, the complement block diagonalizes exactly and the kernel
/// comes out as `n - 1` exponential modes (for `n` atoms), stored in mode
/// form on the requested grid.
pub fn memory_equation_from_measure(
    measure: &AtomicMeasure,
    dt: f64,
    horizon: f64,
) -> Result<MemoryEquation> {
    if measure.is_empty() {
        return Err(Error::Domain("empty measure".into()));
    }
    let n = measure.len();
    let weights = DVector::from_vec(measure.weights());
    let lambda = measure.values();
    let b = measure.mean();

    if n == 1 {
        // Already Markovian: K = 0.
        let kernel = TimeKernel::from_modes(dt, horizon, vec![])?;
        return Ok(MemoryEquation { coefficient: b, kernel });
    }

    // Weighted-orthonormal complement of the observable a = (1, ..., 1).
    let a = DMatrix::from_element(n, 1, 1.0);
    let q = orthonormalize(&a, Some(&weights))?;
    let v_w = complement_basis(&q, Some(&weights))?;

    // Blocks of the generator L = diag(-λ) in the weighted geometry. With
    // W L symmetric the complement block is symmetric and diagonalizes.
    let apply_l = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut out = m.clone();
        for i in 0..n {
            for j in 0..out.ncols() {
                out[(i, j)] *= -lambda[i];
            }
        }
        out
    };
    let wdot = |u: &DVector<f64>, v: &DVector<f64>| -> f64 {
        u.iter().zip(v.iter()).zip(weights.iter()).map(|((a, b), w)| a * b * w).sum()
    };

    let la = apply_l(&a);
    let lv = apply_l(&v_w);
    let m = n - 1;
    let mut a_block = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a_block[(i, j)] = wdot(&v_w.column(i).clone_owned(), &lv.column(j).clone_owned());
        }
    }
    // y = V^T W L a   (into the complement),  r_j = <L V e_j, a> (out of it).
    let mut y = DVector::zeros(m);
    let mut r = DVector::zeros(m);
    let a0 = a.column(0).clone_owned();
    for j in 0..m {
        y[j] = wdot(&v_w.column(j).clone_owned(), &la.column(0).clone_owned());
        r[j] = wdot(&lv.column(j).clone_owned(), &a0);
    }

    let eig = a_block.symmetric_eigen();
    let mut modes = Vec::with_capacity(m);
    for k in 0..m {
        let u_k = eig.eigenvectors.column(k).clone_owned();
        let rate = eig.eigenvalues[k].min(0.0);
        // K = Γ = -(r·u_k)(u_k·y) e^{rate t}.
        let weight = -(r.dot(&u_k)) * (u_k.dot(&y));
        modes.push((rate, weight));
    }
    modes.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let kernel = TimeKernel::from_modes(dt, horizon, modes)?;
    Ok(MemoryEquation { coefficient: b, kernel })
}

/// Trajectories of the augmented local system equivalent to the two-rate
/// `{1/2 @ 1, 1/2 @ 2}` memory equation:
///
/// ```text
///     u⁰' = -3/2 u⁰ + 1/4 v⁰,     v⁰' = u⁰ - 3/2 v⁰,
/// ```
///
/// with `u⁰(0) = v`, `v⁰(0) = 0`, integrated by the second-order
/// trapezoidal step. The configuration variable satisfies
/// `v⁰(t) = ∫₀ᵗ exp(-3(t-s)/2) u⁰(s) ds`.
pub fn localized_system_solve(v: f64, t_final: f64, dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let markov = DMatrix::from_row_slice(2, 2, &[-1.5, 0.25, 1.0, -1.5]);
    let steps = (t_final / dt).round().max(0.0) as usize;
    let kernel = KernelSamples::Scalar(vec![0.0; steps + 1]);
    let traj = volterra_solve(
        &markov,
        &kernel,
        None,
        DVector::from_vec(vec![v, 0.0]),
        t_final,
        dt,
    )?;
    Ok((traj.component(0), traj.component(1)))
}

/// One row of an averaging study: the sup-norm distance between the slow
/// component of the stiff two-variable system and the enslaved local
/// model, plus where in time that distance peaks.
#[derive(Debug, Clone)]
pub struct AveragingRow {
    pub epsilon: f64,
    /// `max_t |u_ε(t) - u_avg(t)|`.
    pub u_error: f64,
    /// `argmax_t` of the fast-variable error (initial-layer witness).
    pub fast_error_peak_time: f64,
    /// Max fast-variable error over `t > 10 ε`.
    pub fast_error_tail: f64,
}

/// Result table of [`averaging_limit_study`].
#[derive(Debug, Clone)]
pub struct AveragingStudy {
    pub rows: Vec<AveragingRow>,
    /// Least-squares slope of `log u_error` against `log ε`.
    pub fitted_order: f64,
}

/// Integrate the stiffened two-variable system
///
/// ```text
///     u' = -3/2 u + 1/4 w,     w' = (u - 3/2 w) / ε,
/// ```
///
/// for each ε and compare `u` with the enslaved local model
/// `u_avg' = -4/3 u_avg` (obtained by setting `w = (2/3) u`).
pub fn averaging_limit_study(
    epsilons: &[f64],
    v: f64,
    t_final: f64,
    dt: f64,
) -> Result<AveragingStudy> {
    if epsilons.is_empty() {
        return Err(Error::Study("need at least one epsilon".into()));
    }
    let rows_res: Vec<Result<AveragingRow>> = crate::par::map_items(epsilons, |&eps| {
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
        }
        if dt > eps / 10.0 {
            return Err(Error::Stability(format!(
                "dt = {dt} does not resolve the fast scale; need dt <= eps/10 = {}",
                eps / 10.0
            )));
        }
        let markov =
            DMatrix::from_row_slice(2, 2, &[-1.5, 0.25, 1.0 / eps, -1.5 / eps]);
        let steps = (t_final / dt).round().max(0.0) as usize;
        let kernel = KernelSamples::Scalar(vec![0.0; steps + 1]);
        let traj = volterra_solve(
            &markov,
            &kernel,
            None,
            DVector::from_vec(vec![v, 0.0]),
            t_final,
            dt,
        )?;
        let mut u_error = 0.0f64;
        let mut fast_peak = (0.0f64, 0.0f64); // (error, time)
        let mut fast_tail = 0.0f64;
        for (j, state) in traj.states.iter().enumerate() {
            let t = j as f64 * dt;
            let u_avg = v * (-4.0 * t / 3.0).exp();
            u_error = u_error.max((state[0] - u_avg).abs());
            let w_err = (state[1] - 2.0 / 3.0 * u_avg).abs();
            if w_err > fast_peak.0 {
                fast_peak = (w_err, t);
            }
            if t > 10.0 * eps {
                fast_tail = fast_tail.max(w_err);
            }
        }
        Ok(AveragingRow {
            epsilon: eps,
            u_error,
            fast_error_peak_time: fast_peak.1,
            fast_error_tail: fast_tail,
        })
    });
    let rows: Vec<AveragingRow> = rows_res.into_iter().collect::<Result<_>>()?;

    let fitted_order = if rows.len() >= 2 && rows.iter().all(|r| r.u_error > 0.0) {
        let xs: Vec<f64> = rows.iter().map(|r| r.epsilon.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.u_error.ln()).collect();
        crate::linalg::line_fit(&xs, &ys)?.0
    } else {
        0.0
    };
    Ok(AveragingStudy { rows, fitted_order })
}

/// Relative residual of the best single-exponential approximation
/// `u(0) e^{-bt}` to a sampled trajectory (L² over the grid), minimizing
/// over the rate `b` in a bracketing interval.
pub fn best_single_exponential_residual(times: &[f64], u: &[f64]) -> f64 {
    let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let u0 = u[0];
    let objective = |b: f64| -> f64 {
        u.iter()
            .zip(times)
            .map(|(&v, &t)| {
                let d = v - u0 * (-b * t).exp();
                d * d
            })
            .sum::<f64>()
            .sqrt()
    };
    let (_, value) = golden_min(objective, 1e-3, 50.0, 1e-10);
    value / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn half_half() -> AtomicMeasure {
        AtomicMeasure::new(vec![(0.5, 1.0), (0.5, 2.0)]).unwrap()
    }

    #[test]
    fn weak_limit_of_two_rates() {
        let times: Vec<f64> = (0..=50).map(|j| 0.1 * j as f64).collect();
        let u = weak_limit_scalar(&half_half(), &times).unwrap();
        for (j, &v) in u.iter().enumerate() {
            let t = times[j];
            let expect = 0.5 * ((-t).exp() + (-2.0 * t).exp());
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn single_atom_is_plain_decay_and_t0_is_normalized() {
        let m = AtomicMeasure::new(vec![(1.0, 0.7)]).unwrap();
        let times = [0.0, 1.0, 2.0];
        let u = weak_limit_solution(&m, &[3.0], &times).unwrap();
        assert_eq!(u[0][0], 3.0);
        assert!((u[0][1] - 3.0 * (-0.7f64).exp()).abs() < 1e-15);
        // Any measure is normalized at t = 0.
        let u2 = weak_limit_scalar(&half_half(), &[0.0]).unwrap();
        assert_eq!(u2[0], 1.0);
    }

    #[test]
    fn memory_equation_of_half_half() {
        let eq = memory_equation_from_measure(&half_half(), 1e-3, 5.0).unwrap();
        assert!((eq.coefficient - 1.5).abs() <= 1e-12);
        let modes = eq.kernel.modes().unwrap();
        assert_eq!(modes.len(), 1);
        assert!((modes[0].0 + 1.5).abs() <= 1e-12, "rate {}", modes[0].0);
        assert!((modes[0].1 + 0.25).abs() <= 1e-12, "weight {}", modes[0].1);
    }

    #[test]
    fn memory_equation_of_one_three() {
        let m = AtomicMeasure::new(vec![(0.5, 1.0), (0.5, 3.0)]).unwrap();
        let eq = memory_equation_from_measure(&m, 1e-3, 5.0).unwrap();
        assert!((eq.coefficient - 2.0).abs() <= 1e-12);
        let modes = eq.kernel.modes().unwrap();
        assert_eq!(modes.len(), 1);
        assert!((modes[0].0 + 2.0).abs() <= 1e-12);
        assert!((modes[0].1 + 1.0).abs() <= 1e-12);
    }

    #[test]
    fn single_atom_is_markovian() {
        let m = AtomicMeasure::new(vec![(1.0, 0.9)]).unwrap();
        let eq = memory_equation_from_measure(&m, 1e-2, 1.0).unwrap();
        assert_eq!(eq.coefficient, 0.9);
        assert!(eq.kernel.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn memory_equation_reproduces_weak_limit_for_random_measures() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dt = 1e-3;
        let t_final = 5.0;
        for _ in 0..6 {
            let n = rng.random_range(2..=4);
            let mut raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter_mut().for_each(|w| *w /= total);
            let atoms: Vec<(f64, f64)> =
                raw.into_iter().map(|w| (w, rng.random_range(0.3..2.5))).collect();
            let m = AtomicMeasure::new(atoms).unwrap();

            let eq = memory_equation_from_measure(&m, dt, t_final).unwrap();
            assert_eq!(eq.kernel.modes().unwrap().len(), m.len() - 1);
            let u = eq.solve(1.0, t_final, dt).unwrap();
            let times: Vec<f64> = (0..u.len()).map(|j| j as f64 * dt).collect();
            let reference = weak_limit_scalar(&m, &times).unwrap();
            let err = u
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err <= 5.0 * dt * dt, "reproduction error {err}");
        }
    }

    #[test]
    fn weak_limit_is_completely_monotone_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..4 {
            let n = rng.random_range(2..=4);
            let mut raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter_mut().for_each(|w| *w /= total);
            let atoms: Vec<(f64, f64)> =
                raw.into_iter().map(|w| (w, rng.random_range(0.3..2.5))).collect();
            let m = AtomicMeasure::new(atoms).unwrap();
            let times: Vec<f64> = (0..=400).map(|j| 0.01 * j as f64).collect();
            let u = weak_limit_scalar(&m, &times).unwrap();
            for w in u.windows(3) {
                assert!(w[0] >= 0.0);
                assert!(w[1] <= w[0] + 1e-15);
                // Discrete convexity.
                assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-12);
            }
        }
    }

    #[test]
    fn two_rate_limit_is_not_a_single_exponential() {
        let times: Vec<f64> = (0..=500).map(|j| 0.01 * j as f64).collect();
        let u = weak_limit_scalar(&half_half(), &times).unwrap();
        let residual = best_single_exponential_residual(&times, &u);
        assert!(residual >= 1e-3, "single-exponential residual {residual}");
        // Sanity: a true single exponential fits to near machine accuracy.
        let m = AtomicMeasure::new(vec![(1.0, 1.3)]).unwrap();
        let u1 = weak_limit_scalar(&m, &times).unwrap();
        assert!(best_single_exponential_residual(&times, &u1) < 1e-7);
    }

    #[test]
    fn localized_system_matches_weak_limit() {
        let dt = 1e-3;
        let (u, v0) = localized_system_solve(1.0, 5.0, dt).unwrap();
        let times: Vec<f64> = (0..u.len()).map(|j| j as f64 * dt).collect();
        let reference = weak_limit_scalar(&half_half(), &times).unwrap();
        let err = u
            .iter()
            .zip(&reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 5.0 * dt * dt, "u error {err}");
        assert_eq!(v0[0], 0.0);

        // v0(t) = ∫ exp(-3(t-s)/2) u(s) ds by direct trapezoidal quadrature.
        let mut worst = 0.0f64;
        for j in (0..times.len()).step_by(500) {
            if j == 0 {
                continue;
            }
            let t = times[j];
            let mut q = 0.5 * ((-1.5 * t).exp() * u[0] + u[j]);
            for i in 1..j {
                q += (-1.5 * (t - times[i])).exp() * u[i];
            }
            q *= dt;
            worst = worst.max((v0[j] - q).abs());
        }
        assert!(worst <= 1e-6, "configuration-variable defect {worst}");
    }

    #[test]
    fn zero_initial_datum_stays_zero() {
        let (u, v0) = localized_system_solve(0.0, 2.0, 1e-2).unwrap();
        assert!(u.iter().chain(v0.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn averaging_errors_decrease_with_epsilon() {
        let eps = [1e-1, 1e-2, 1e-3];
        let study = averaging_limit_study(&eps, 1.0, 3.0, 1e-4).unwrap();
        assert!(study.rows[0].u_error > study.rows[1].u_error);
        assert!(study.rows[1].u_error > study.rows[2].u_error);
        // The fast-variable mismatch peaks inside the initial layer and is
        // much smaller afterwards.
        for row in &study.rows {
            assert!(
                row.fast_error_peak_time <= 10.0 * row.epsilon,
                "peak at {} for eps {}",
                row.fast_error_peak_time,
                row.epsilon
            );
            assert!(row.fast_error_tail < 0.5 * 2.0 / 3.0);
        }
        assert!(study.fitted_order > 0.5, "order {}", study.fitted_order);
    }

    #[test]
    fn averaging_with_zero_datum_is_exact() {
        let study = averaging_limit_study(&[1e-2], 0.0, 1.0, 1e-4).unwrap();
        assert_eq!(study.rows[0].u_error, 0.0);
    }

    #[test]
    fn unresolved_fast_scale_rejected() {
        let err = averaging_limit_study(&[1e-3], 1.0, 1.0, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Stability(_)));
    }

    #[test]
    fn oscillatory_problem_requires_positive_rates() {
        let p = PeriodicProfile::two_valued(-1.0, 2.0, 0.5).unwrap();
        assert!(OscillatoryDecayProblem::new(p, vec![1.0]).is_err());
        let p = PeriodicProfile::two_valued(1.0, 2.0, 0.5).unwrap();
        let prob = OscillatoryDecayProblem::new(p, vec![1.0, 2.0]).unwrap();
        let m = prob.rate_measure().unwrap();
        assert_eq!(m.atoms(), &[(0.5, 1.0), (0.5, 2.0)]);
        let fine = prob.fine_solution(&[0.1, 0.3], 0.25, &[0.0, 1.0]);
        assert_eq!(fine[0][0], 1.0);
        assert!((fine[1][1] - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
    }
}
