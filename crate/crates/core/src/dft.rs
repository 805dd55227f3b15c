//! Direct discrete Fourier transforms.
//!
//! All transforms here are O(n²) evaluations of the defining sums. Problem
//! sizes in this crate stay at desk scale (n up to a few thousand), where
//! the direct sums are fast enough and keep results bit-deterministic with
//! no dependency on a transform library. Twiddle angles are reduced by
//! exact index arithmetic `(i*j) mod n` before calling `cos`/`sin`.

use num_complex::Complex64;

/// Forward DFT: `X_j = Σ_i x_i exp(-2πi i j / n)`.
pub fn forward(x: &[Complex64]) -> Vec<Complex64> {
    transform(x, -1.0)
}

/// Inverse DFT: `x_i = (1/n) Σ_j X_j exp(+2πi i j / n)`.
pub fn inverse(x: &[Complex64]) -> Vec<Complex64> {
    let n = x.len() as f64;
    transform(x, 1.0).into_iter().map(|v| v / n).collect()
}

fn transform(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    // Table of exp(sign * 2πi k / n) for k = 0..n.
    let table: Vec<Complex64> = (0..n)
        .map(|k| {
            let ang = sign * 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            Complex64::new(ang.cos(), ang.sin())
        })
        .collect();
    (0..n)
        .map(|j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, &xi) in x.iter().enumerate() {
                acc += xi * table[(i * j) % n];
            }
            acc
        })
        .collect()
}

/// Forward DFT of real data.
pub fn forward_real(x: &[f64]) -> Vec<Complex64> {
    let cx: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    forward(&cx)
}

/// Signed frequency index of DFT bin `j` for length `n`: `0, 1, ...,
/// n/2(-ish), -(n-1)/2, ..., -1` in bin order.
pub fn signed_index(j: usize, n: usize) -> i64 {
    let j = j as i64;
    let n = n as i64;
    if j <= n / 2 {
        j
    } else {
        j - n
    }
}
