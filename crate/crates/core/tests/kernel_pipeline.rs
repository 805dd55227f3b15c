//! Cross-module pipeline: a kernel synthesized from a dispersion relation
//! feeds the volume-constrained nonlocal diffusion solver as a tabulated
//! shape, and behaves like its analytic counterpart.

use homnl_core::ac::{solve_and_compare, KernelShape, NonlocalDiffusionProblem};
use homnl_core::bloch::{kernel_from_dispersion, BlendParameters, BlochSpectrum};
use std::f64::consts::PI;

#[test]
fn synthesized_kernel_drives_the_diffusion_solver() {
    // Gaussian dispersion: the synthesized kernel is the standard normal
    // density, so sigma^2 = 1 and the local limit matches gaussian:1.
    let k: Vec<f64> = (0..=400).map(|i| 8.0 * i as f64 / 400.0).collect();
    let lam: Vec<f64> = k.iter().map(|&k| 1.0 - (-k * k / 2.0).exp()).collect();
    let spec = BlochSpectrum::synthetic(k, lam).unwrap();
    let synth = kernel_from_dispersion(&spec, BlendParameters::new(8.0, 16.0), 0.05).unwrap();

    // The discrete second moment carries the band-interpolation accuracy
    // of the synthesis (about 1e-5 here), not machine precision.
    let tabulated = KernelShape::tabulated(synth.kernel.clone()).unwrap();
    assert!((tabulated.second_moment() - 1.0).abs() <= 1e-4);
    let radius = tabulated.truncation_radius().unwrap();
    assert!(radius > 5.0 && radius < 12.0, "numerical horizon {radius}");

    let sigma2 = tabulated.second_moment();
    let source = move |x: f64| 0.5 * sigma2 * PI * PI * (PI * x).sin();
    let data = |x: f64| (PI * x).sin();
    let reference = |x: f64| (PI * x).sin();

    let eps = 0.125;
    let h = eps / 8.0;
    let tab_problem = NonlocalDiffusionProblem {
        kernel: tabulated,
        epsilon: eps,
        source: &source,
        volume_data: &data,
    };
    let tab = solve_and_compare(&tab_problem, h, &reference).unwrap();

    let gauss_problem = NonlocalDiffusionProblem {
        kernel: KernelShape::gaussian(1.0).unwrap(),
        epsilon: eps,
        source: &source,
        volume_data: &data,
    };
    let gauss = solve_and_compare(&gauss_problem, h, &reference).unwrap();

    // Both solve essentially the same problem: errors against the local
    // limit agree far better than their own size.
    assert!(
        (tab.sup - gauss.sup).abs() <= 0.05 * gauss.sup,
        "tabulated {} vs analytic {}",
        tab.sup,
        gauss.sup
    );
    assert!(tab.sup <= 0.05, "limit error {}", tab.sup);
}
