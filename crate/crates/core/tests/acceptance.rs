//! Acceptance suite: one test per numbered criterion, each printing a
//! pass/fail line (run with `--nocapture` to see them). Criterion 18
//! (byte-identical reruns of the command-line tool) lives in the CLI
//! crate's own acceptance target.

use homnl_core::bloch::{
    bloch_bands, bloch_bands_converged, kernel_from_dispersion, model_comparison,
    surrogate_error_sweep, BlendParameters, BlochSpectrum, WaveComparisonConfig,
};
use homnl_core::classical::{
    effective_coefficient_1d, epsilon_convergence_study, solve_cell_problem,
    solve_cell_problem_at, CellCoefficient,
};
use homnl_core::lattice::{coarse_grain, kernel_diagnostics, LatticeModel};
use homnl_core::measure::AtomicMeasure;
use homnl_core::memory::memory_equation_from_measure;
use homnl_core::mz::{localize_kernel, mori_reduce, LinearSystem, MoriProjection};
use homnl_core::schur::equivalence_trials;
use homnl_core::symbol::{
    homogenized_symbol, nonpolynomiality_certificate, symbol_at, symbol_series,
};
use homnl_core::volterra::volterra_solve_scalar;
use homnl_core::{PeriodicProfile, TimeKernel, UniformGrid};

use nalgebra::{DMatrix, DVector};

fn report(number: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {number:02} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number:02} {name} failed: {detail}");
}

#[test]
fn criterion_01_memory_equation_closed_form_trajectory() {
    let dt = 1e-3;
    let t_final = 5.0;
    let kernel = TimeKernel::from_modes(dt, t_final, vec![(-1.5, -0.25)]).unwrap();
    let u = volterra_solve_scalar(-1.5, &kernel, None, 1.0, t_final, dt).unwrap();
    let err = u
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let t = j as f64 * dt;
            (v - 0.5 * ((-t).exp() + (-2.0 * t).exp())).abs()
        })
        .fold(0.0, f64::max);
    report(1, "two-rate closed form", err <= 1e-5, &format!("max error {err:.3e}"));
}

#[test]
fn criterion_02_memory_kernel_extraction() {
    let measure = AtomicMeasure::new(vec![(0.5, 1.0), (0.5, 2.0)]).unwrap();
    let eq = memory_equation_from_measure(&measure, 1e-3, 5.0).unwrap();
    let modes = eq.kernel.modes().unwrap();
    let b_err = (eq.coefficient - 1.5).abs();
    let ok = b_err <= 1e-12
        && modes.len() == 1
        && (modes[0].0 + 1.5).abs() <= 1e-12
        && (modes[0].1 + 0.25).abs() <= 1e-12;
    report(
        2,
        "memory-kernel extraction",
        ok,
        &format!("b = {}, modes = {modes:?}", eq.coefficient),
    );
}

#[test]
fn criterion_03_cross_module_consistency() {
    let dt = 1e-3;
    let horizon = 5.0;
    let measure = AtomicMeasure::new(vec![(0.5, 1.0), (0.5, 2.0)]).unwrap();
    let eq = memory_equation_from_measure(&measure, dt, horizon).unwrap();

    let sys = LinearSystem::new(
        DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])),
        DVector::from_vec(vec![1.0, 1.0]),
    )
    .unwrap();
    let proj = MoriProjection::new(
        DVector::from_vec(vec![1.0, 1.0]),
        Some(DVector::from_vec(vec![0.5, 0.5])),
    )
    .unwrap();
    let reduced = mori_reduce(&sys, &proj, horizon, dt).unwrap();

    // Sign conversion between the two forms: b = -G and K = Γ.
    let g = reduced.markov[(0, 0)];
    let b_err = (eq.coefficient + g).abs();
    let gamma = reduced.kernel.scalar().unwrap();
    let mut k_err = 0.0f64;
    for (j, &gv) in gamma.samples().iter().enumerate() {
        k_err = k_err.max((gv - eq.kernel.samples()[j]).abs());
    }
    report(
        3,
        "rank-one reduction matches measure extraction",
        b_err <= 1e-12 && k_err <= 1e-12,
        &format!("b defect {b_err:.3e}, kernel defect {k_err:.3e}"),
    );
}

#[test]
fn criterion_04_elimination_corrector_equivalence() {
    let trials = equivalence_trials(64, 8, 100, 0).unwrap();
    let ok = trials.max_operator_diff <= 1e-10 && trials.max_solution_diff <= 1e-10;
    report(
        4,
        "elimination vs corrector coarse problems",
        ok,
        &format!(
            "operator {:.3e}, solution {:.3e} over {} trials",
            trials.max_operator_diff, trials.max_solution_diff, trials.trials
        ),
    );
}

#[test]
fn criterion_05_block_elimination_exactness() {
    let trials = equivalence_trials(64, 8, 100, 0).unwrap();
    report(
        5,
        "coarse solve equals projected fine solve",
        trials.max_projection_diff <= 1e-10,
        &format!("max projection defect {:.3e}", trials.max_projection_diff),
    );
}

#[test]
fn criterion_06_lattice_second_moment_identity() {
    let mut worst = 0.0f64;
    for &k2 in &[-0.2, 0.0, 0.1, 0.5] {
        for &m in &[2usize, 4, 8, 16] {
            let model = LatticeModel::new(1.0, k2, 1.0, 4096).unwrap();
            let cg = coarse_grain(&model, m).unwrap();
            let diag = kernel_diagnostics(&cg.kernel);
            worst = worst.max(diag.moment_residual);
        }
    }
    report(
        6,
        "coarse-kernel second-moment identity",
        worst <= 1e-8,
        &format!("max relative residual {worst:.3e} over the (K2, M) grid"),
    );
}

#[test]
fn criterion_07_lattice_kernel_structure() {
    let model = LatticeModel::new(1.0, 0.1, 1.0, 4096).unwrap();
    let cg = coarse_grain(&model, 4).unwrap();
    let theta0 = cg.kernel.value(0);
    let diag = kernel_diagnostics(&cg.kernel);
    let ok = diag.evenness_residual <= 1e-14 * theta0.abs().max(1.0)
        && diag.zero_sum_residual <= 1e-10
        && theta0 > 0.0
        && diag.sign_pattern_ok == Some(true)
        && diag.decay_correlation.abs() >= 0.99;
    report(
        7,
        "coarse-kernel sign and decay structure",
        ok,
        &format!(
            "even {:.2e}, zero-sum {:.2e}, corr {:.4}, slope {:.3}",
            diag.evenness_residual,
            diag.zero_sum_residual,
            diag.decay_correlation,
            diag.decay_slope
        ),
    );
}

#[test]
fn criterion_08_nearest_neighbor_reduction_closed_form() {
    let mut worst = 0.0f64;
    for &m in &[2usize, 4, 8] {
        let model = LatticeModel::new(1.0, 0.0, 1.0, 4096).unwrap();
        let cg = coarse_grain(&model, m).unwrap();
        let expect = -1.0 / m as f64;
        worst = worst.max((cg.kernel.value(1) - expect).abs());
        worst = worst.max((cg.kernel.value(-1) - expect).abs());
        for n in 2..=(cg.kernel.coarse_count() as i64 / 2) {
            worst = worst.max(cg.kernel.value(n).abs());
        }
    }
    report(
        8,
        "series-spring reduction closed form",
        worst <= 1e-12,
        &format!("max deviation {worst:.3e} over M in {{2,4,8}}"),
    );
}

#[test]
fn criterion_09_harmonic_mean_and_epsilon_order() {
    let laminate = PeriodicProfile::two_valued(1.0, 2.0, 0.5).unwrap();
    let a_bar = effective_coefficient_1d(&laminate).unwrap();
    let exact = (a_bar - 4.0 / 3.0).abs() <= 1e-14;

    let grid = UniformGrid::closed(0.0, 1.0, 2049).unwrap();
    let eps: Vec<f64> = (3..=7).map(|k| 1.0 / (1u32 << k) as f64).collect();
    let study = epsilon_convergence_study(&laminate, &|_| 1.0, &eps, &grid).unwrap();
    report(
        9,
        "1d effective coefficient and convergence order",
        exact && study.fitted_order >= 0.9,
        &format!("a_bar = {a_bar}, fitted order {:.3}", study.fitted_order),
    );
}

#[test]
fn criterion_10_cell_problems() {
    let identity = |_: f64, _: f64| [1.0, 0.0, 1.0];
    let (_, tensor_id) = solve_cell_problem_at(&CellCoefficient::TwoD(&identity), 16).unwrap();
    let id_err = (tensor_id.matrix() - DMatrix::identity(2, 2)).norm();

    let laminate = PeriodicProfile::two_valued(1.0, 2.0, 0.5).unwrap();
    let field = {
        let p = laminate.clone();
        move |x: f64, _y: f64| {
            let a = p.eval(x);
            [a, 0.0, a]
        }
    };
    let (correctors, tensor) =
        solve_cell_problem(&CellCoefficient::TwoD(&field), 16, 1e-6).unwrap();
    let m = tensor.matrix();
    let lam_err =
        (m[(0, 0)] - 4.0 / 3.0).abs().max((m[(1, 1)] - 1.5).abs()).max(m[(0, 1)].abs());
    let ok = id_err <= 1e-10 && lam_err <= 1e-3 && correctors.mean_residual() <= 1e-12;
    report(
        10,
        "cell problems and effective tensors",
        ok,
        &format!("identity defect {id_err:.3e}, laminate defect {lam_err:.3e}"),
    );
}

#[test]
fn criterion_11_symbol_closed_form_series_and_certificate() {
    let profile = PeriodicProfile::two_valued(0.5, -0.5, 0.5).unwrap();
    let ks: Vec<f64> = (0..=200).map(|i| i as f64 / 20.0).collect();
    let table = homogenized_symbol(&profile, &ks).unwrap();
    let mut closed_form_err = 0.0f64;
    for (i, &k) in ks.iter().enumerate() {
        let shift = 1.0 + k * k;
        closed_form_err =
            closed_form_err.max((table.values()[i] - (shift - 0.25 / shift)).abs());
    }

    let certificate = nonpolynomiality_certificate(&table, 6).unwrap();
    let floor_ok = certificate.relative_residuals.iter().all(|&r| r >= 1e-8);

    let mut series_ok = true;
    for &j in &[4usize, 8, 12] {
        for &k in &[0.0, 1.0, 4.0, 10.0] {
            let direct = symbol_at(&profile, k).unwrap();
            let (value, bound) = symbol_series(&profile, k, j).unwrap();
            // The analytic tail bound holds in exact arithmetic; at large
            // k and J it drops below evaluation roundoff, hence the
            // explicit machine floor.
            if (value - direct).abs() > bound + 1e-13 * direct.abs() {
                series_ok = false;
            }
        }
    }
    report(
        11,
        "homogenized symbol analysis",
        closed_form_err <= 1e-12 && floor_ok && series_ok && certificate.certified_nonlocal,
        &format!(
            "closed form {closed_form_err:.3e}, min fit residual {:.3e}",
            certificate
                .relative_residuals
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        ),
    );
}

#[test]
fn criterion_12_band_structure() {
    let constant = PeriodicProfile::constant(1.0);
    let spec = bloch_bands_converged(&constant, 17, 1, 32, 1e-9, 128).unwrap();
    let mut quad_err = 0.0f64;
    for (i, &k) in spec.k_grid().iter().enumerate() {
        quad_err = quad_err.max((spec.lowest()[i] - k * k).abs() / (1.0 + k * k));
    }

    let laminate = PeriodicProfile::two_valued(1.0, 2.0, 0.5).unwrap();
    let lam_spec = bloch_bands(&laminate, 33, 1, 128).unwrap();
    let slope = lam_spec.effective_slope().unwrap();
    let slope_err = (slope - 4.0 / 3.0).abs() / (4.0 / 3.0);
    report(
        12,
        "band structure",
        quad_err <= 1e-8 && slope_err <= 0.01,
        &format!("free-band defect {quad_err:.3e}, small-k slope error {slope_err:.3e}"),
    );
}

#[test]
fn criterion_13_kernel_synthesis_round_trip() {
    let k: Vec<f64> = (0..=400).map(|i| 8.0 * i as f64 / 400.0).collect();
    let lam: Vec<f64> = k.iter().map(|&k| 1.0 - (-k * k / 2.0).exp()).collect();
    let spec = BlochSpectrum::synthetic(k, lam).unwrap();
    let out = kernel_from_dispersion(&spec, BlendParameters::new(8.0, 16.0), 0.0125).unwrap();

    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let m = out.kernel.half_width() as i64;
    let mut pointwise = 0.0f64;
    for i in -m..=m {
        let s = i as f64 * out.kernel.spacing();
        if s.abs() <= 10.0 {
            pointwise = pointwise.max((out.kernel.value_at(i) - norm * (-s * s / 2.0).exp()).abs());
        }
    }
    let mass_defect = (out.kernel.mass() - 1.0).abs();
    let mut evenness = 0.0f64;
    for i in 1..=m {
        evenness = evenness.max((out.kernel.value_at(i) - out.kernel.value_at(-i)).abs());
    }
    let ok = pointwise <= 1e-8 && mass_defect <= 1e-10 && evenness == 0.0;
    report(
        13,
        "dispersion-to-kernel synthesis",
        ok,
        &format!("pointwise {pointwise:.3e}, mass defect {mass_defect:.3e}"),
    );
}

#[test]
fn criterion_14_wave_model_comparison() {
    let laminate = PeriodicProfile::two_valued(1.0, 2.0, 0.5).unwrap();
    let config = WaveComparisonConfig::default();
    let comparison = model_comparison(&laminate, 0.1, &[100.0], &config).unwrap();
    let row = &comparison.rows[0];
    let long_time_ok = row.err_nonlocal <= 0.5 * row.err_local;

    let sweep =
        surrogate_error_sweep(&laminate, &[0.1, 0.05, 0.025], 10.0, &config).unwrap();
    let order_ok = sweep.fitted_order >= 0.8;
    report(
        14,
        "dispersive wave comparison",
        long_time_ok && order_ok,
        &format!(
            "T=100: nonlocal {:.3e} vs local {:.3e}; sweep order {:.3}",
            row.err_nonlocal, row.err_local, sweep.fitted_order
        ),
    );
}

#[test]
fn criterion_15_reduction_master_property() {
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    let dt = 1e-3;
    let t_final = 5.0;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_ratio = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(4..=20);
        let r = rng.random_range(1..n);
        let mut l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let norm = l.norm();
        l = l / norm - DMatrix::identity(n, n) * 0.1;
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let basis = DMatrix::from_fn(n, r, |_, _| rng.random_range(-1.0..1.0));
        let sys = LinearSystem::new(l, x0).unwrap();
        let reduced = homnl_core::mz::subspace_reduce(&sys, &basis, t_final, dt).unwrap();
        let traj = reduced.solve(t_final).unwrap();
        let v_c = homnl_core::linalg::orthonormalize(&basis, None).unwrap();
        let exact = sys.exact_trajectory(t_final, dt);
        let mut scale = 0.0f64;
        let mut err = 0.0f64;
        for (u, x) in traj.states.iter().zip(exact.iter()) {
            let proj = v_c.transpose() * x;
            scale = scale.max(proj.amax());
            err = err.max((u - proj).amax());
        }
        worst_ratio = worst_ratio.max(err / (5.0 * dt * dt * scale.max(1e-8)));
    }
    let master_ok = worst_ratio <= 1.0;

    // Fluctuation-dissipation residual on seeded skew generators.
    let mut fd_worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..3 {
        let n = 6;
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..i {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = -v;
            }
        }
        let a = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let sys = LinearSystem::new(m, DVector::zeros(n))
            .unwrap()
            .flagged_skew_symmetric()
            .unwrap();
        let proj = MoriProjection::new(a, None).unwrap();
        let reduced = mori_reduce(&sys, &proj, t_final, dt).unwrap();
        fd_worst = fd_worst.max(
            homnl_core::mz::fluctuation_dissipation_check(&sys, &proj, &reduced).unwrap(),
        );
    }

    // Harmonic-oscillator reduction reproduces cos t.
    let sys = LinearSystem::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
        DVector::from_vec(vec![1.0, 0.0]),
    )
    .unwrap();
    let basis = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let reduced = homnl_core::mz::subspace_reduce(&sys, &basis, t_final, dt).unwrap();
    let traj = reduced.solve(t_final).unwrap();
    let cos_err = traj.max_error_against(|t| t.cos());

    report(
        15,
        "reduction master property",
        master_ok && fd_worst <= 1e-8 && cos_err <= 1e-4,
        &format!(
            "error/bound {worst_ratio:.3}, fd residual {fd_worst:.3e}, oscillator {cos_err:.3e}"
        ),
    );
}

#[test]
fn criterion_16_kernel_localization() {
    let dt = 1e-3;
    let kernel = TimeKernel::from_modes(dt, 5.0, vec![(-1.5, -0.25)]).unwrap();
    let loc = localize_kernel(-1.5, &kernel, 1, 1.0, 5.0).unwrap();
    let ok = loc.kernel_residual <= 1e-10 && loc.trajectory_error <= 5.0 * dt * dt;
    report(
        16,
        "exponential-mode localization",
        ok,
        &format!(
            "fit residual {:.3e}, trajectory defect {:.3e}",
            loc.kernel_residual, loc.trajectory_error
        ),
    );
}

#[test]
fn criterion_17_joint_limit_diagram() {
    use homnl_core::ac::{
        assemble_nonlocal, convergence_diagram, KernelShape, NonlocalDiffusionProblem,
    };
    use std::f64::consts::PI;

    let source = |x: f64| 0.5 * PI * PI * (PI * x).sin();
    let data = |x: f64| (PI * x).sin();
    let reference = |x: f64| (PI * x).sin();
    let make = |eps: f64| NonlocalDiffusionProblem {
        kernel: KernelShape::gaussian(1.0).unwrap(),
        epsilon: eps,
        source: &source,
        volume_data: &data,
    };

    // Quadratic exactness on every tested (eps, h) pair.
    let mut quad_worst = 0.0f64;
    for &eps in &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        for &ratio in &[4.0, 8.0] {
            let problem = make(eps);
            let op = assemble_nonlocal(&problem, eps / ratio).unwrap();
            let u: Vec<f64> = op.nodes.iter().map(|&x| x * x).collect();
            let lu = op.apply_nonlocal(&u);
            for j in op.interior.clone() {
                quad_worst = quad_worst.max((lu[j] - op.discrete_second_moment).abs());
            }
        }
    }

    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let diagram = convergence_diagram(&make, &eps, &reference).unwrap();
    let ok = quad_worst <= 1e-10 && diagram.verdict_pass;
    let sim: Vec<f64> = diagram.paths[2].points.iter().map(|p| p.2).collect();
    report(
        17,
        "joint mesh/horizon compatibility",
        ok,
        &format!("quadratic residual {quad_worst:.3e}, simultaneous errors {sim:?}"),
    );
}
