//! Small dense linear-algebra helpers shared across the subsystems:
//! matrix exponential, weighted orthonormalization, deflated conjugate
//! gradients, polynomial least squares, cubic interpolation, line fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Matrix exponential by scaling-and-squaring with a degree-13 Padé core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Padé-13 coefficients.
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    const THETA13: f64 = 5.371920351148152;

    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let a = a / 2f64.powi(s);

    let id = DMatrix::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;

    let u_inner = &a6 * (B[13] * &a6 + B[11] * &a4 + B[9] * &a2)
        + B[7] * &a6
        + B[5] * &a4
        + B[3] * &a2
        + B[1] * &id;
    let u = &a * u_inner;
    let v = &a6 * (B[12] * &a6 + B[10] * &a4 + B[8] * &a2)
        + B[6] * &a6
        + B[4] * &a4
        + B[2] * &a2
        + B[0] * &id;

    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut x = lhs
        .lu()
        .solve(&rhs)
        .expect("Pade denominator is nonsingular for the scaled matrix");
    for _ in 0..s {
        x = &x * &x;
    }
    x
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Weighted inner product `Σ w_i u_i v_i` (Euclidean when `w` is `None`).
pub fn weighted_dot(u: &DVector<f64>, v: &DVector<f64>, w: Option<&DVector<f64>>) -> f64 {
    match w {
        Some(w) => u.iter().zip(v.iter()).zip(w.iter()).map(|((a, b), c)| a * b * c).sum(),
        None => u.dot(v),
    }
}

/// Orthonormalize the columns of `basis` in the (optionally weighted) inner
/// product by modified Gram–Schmidt with one reorthogonalization pass.
/// Fails when the columns are numerically rank-deficient.
pub fn orthonormalize(
    basis: &DMatrix<f64>,
    weights: Option<&DVector<f64>>,
) -> Result<DMatrix<f64>> {
    let mut q = basis.clone();
    let n = q.ncols();
    for j in 0..n {
        let mut col = q.column(j).clone_owned();
        let initial = weighted_dot(&col, &col, weights).sqrt();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i).clone_owned();
                let proj = weighted_dot(&qi, &col, weights);
                col -= proj * &qi;
            }
        }
        let norm = weighted_dot(&col, &col, weights).sqrt();
        if norm <= 1e-12 * initial.max(1.0) {
            return Err(Error::Basis(format!(
                "column {j} is numerically dependent on the previous columns"
            )));
        }
        col /= norm;
        q.set_column(j, &col);
    }
    Ok(q)
}

/// Extend the orthonormal columns of `q` to a full orthonormal basis,
/// returning the `n - q.ncols()` complement columns. Candidate directions
/// are the coordinate axes, taken in index order for determinism.
pub fn complement_basis(
    q: &DMatrix<f64>,
    weights: Option<&DVector<f64>>,
) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    let r = q.ncols();
    if r == n {
        return Ok(DMatrix::zeros(n, 0));
    }
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(n - r);
    for axis in 0..n {
        if cols.len() == n - r {
            break;
        }
        let mut v = DVector::zeros(n);
        v[axis] = 1.0;
        for _pass in 0..2 {
            for j in 0..r {
                let qj = q.column(j).clone_owned();
                let proj = weighted_dot(&qj, &v, weights);
                v -= proj * &qj;
            }
            for c in &cols {
                let proj = weighted_dot(c, &v, weights);
                v -= proj * c;
            }
        }
        let norm = weighted_dot(&v, &v, weights).sqrt();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
    }
    if cols.len() != n - r {
        return Err(Error::Basis(format!(
            "could not complete the basis: found {} of {} complement directions",
            cols.len(),
            n - r
        )));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Conjugate gradients for a symmetric positive-semidefinite operator whose
/// only null direction is the constant vector. Right-hand side and iterates
/// are kept mean-free, which makes the system definite on the working
/// subspace. Returns the mean-free solution.
pub fn cg_mean_free<A>(apply: A, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let project = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
    };
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();

    let mut r = b.to_vec();
    project(&mut r);
    let b_norm = dot(&r, &r).sqrt();
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    for _ in 0..max_iter {
        let mut ap = apply(&p);
        project(&mut ap);
        let denom = dot(&p, &ap);
        if denom <= 0.0 {
            return Err(Error::Singular(
                "operator not positive definite on the mean-free subspace".into(),
            ));
        }
        let alpha = rs / denom;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= tol * b_norm {
            project(&mut x);
            return Ok(x);
        }
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    Err(Error::Singular(format!(
        "conjugate gradients did not reach tolerance {tol} in {max_iter} iterations"
    )))
}

/// Least-squares polynomial fit in a Chebyshev basis on the data's own
/// range. Returns the fitted values and the absolute residual norm
/// `||y - fit||_2`.
pub fn chebyshev_fit(x: &[f64], y: &[f64], degree: usize) -> Result<(Vec<f64>, f64)> {
    if x.len() != y.len() || x.len() < degree + 1 {
        return Err(Error::Config(format!(
            "fit of degree {degree} needs more than {degree} points, got {}",
            x.len()
        )));
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let scaled: Vec<f64> = x.iter().map(|&v| 2.0 * (v - lo) / span - 1.0).collect();
    let m = x.len();
    let mut design = DMatrix::zeros(m, degree + 1);
    for (i, &t) in scaled.iter().enumerate() {
        let mut t_prev = 1.0;
        let mut t_cur = t;
        design[(i, 0)] = 1.0;
        for d in 1..=degree {
            design[(i, d)] = t_cur;
            let t_next = 2.0 * t * t_cur - t_prev;
            t_prev = t_cur;
            t_cur = t_next;
        }
    }
    let rhs = DVector::from_column_slice(y);
    let coeffs = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Fit(e.to_string()))?;
    let fit = design * &coeffs;
    let residual = (&fit - &rhs).norm();
    Ok((fit.iter().copied().collect(), residual))
}

/// Least-squares line through `(x, y)`: returns `(slope, intercept,
/// correlation)` where correlation is the Pearson coefficient.
pub fn line_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Config("line fit needs at least two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 {
        return Err(Error::Config("line fit needs distinct abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let corr = if syy == 0.0 { 1.0 } else { sxy / (sxx * syy).sqrt() };
    Ok((slope, intercept, corr))
}

/// Cubic Hermite interpolant on a uniform grid with centered-difference
/// interior slopes and prescribed end slopes.
#[derive(Debug, Clone)]
pub struct CubicInterp {
    x0: f64,
    dx: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl CubicInterp {
    /// `end_slopes = Some((s0, s1))` clamps the derivative at the two ends;
    /// `None` uses one-sided second-order differences.
    pub fn uniform(
        x0: f64,
        dx: f64,
        values: Vec<f64>,
        end_slopes: Option<(f64, f64)>,
    ) -> Result<Self> {
        let n = values.len();
        if n < 2 || !(dx > 0.0) {
            return Err(Error::Config("cubic interpolation needs >= 2 nodes and dx > 0".into()));
        }
        let mut slopes = vec![0.0; n];
        for i in 1..n - 1 {
            slopes[i] = (values[i + 1] - values[i - 1]) / (2.0 * dx);
        }
        match end_slopes {
            Some((s0, s1)) => {
                slopes[0] = s0;
                slopes[n - 1] = s1;
            }
            None => {
                if n == 2 {
                    let s = (values[1] - values[0]) / dx;
                    slopes[0] = s;
                    slopes[1] = s;
                } else {
                    slopes[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
                    slopes[n - 1] =
                        (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dx);
                }
            }
        }
        Ok(Self { x0, dx, values, slopes })
    }

    pub fn range(&self) -> (f64, f64) {
        (self.x0, self.x0 + self.dx * (self.values.len() - 1) as f64)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        let eps = 1e-12 * self.dx;
        if x < lo - eps || x > hi + eps {
            return Err(Error::Range(format!("{x} outside interpolation range [{lo}, {hi}]")));
        }
        let x = x.clamp(lo, hi);
        let cell = (((x - self.x0) / self.dx).floor() as usize).min(self.values.len() - 2);
        let t = (x - (self.x0 + cell as f64 * self.dx)) / self.dx;
        let (v0, v1) = (self.values[cell], self.values[cell + 1]);
        let (m0, m1) = (self.slopes[cell] * self.dx, self.slopes[cell + 1] * self.dx);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        Ok(h00 * v0 + h10 * m0 + h01 * v1 + h11 * m1)
    }

    /// First derivative of the interpolant.
    pub fn eval_derivative(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        let eps = 1e-12 * self.dx;
        if x < lo - eps || x > hi + eps {
            return Err(Error::Range(format!("{x} outside interpolation range [{lo}, {hi}]")));
        }
        let x = x.clamp(lo, hi);
        let cell = (((x - self.x0) / self.dx).floor() as usize).min(self.values.len() - 2);
        let t = (x - (self.x0 + cell as f64 * self.dx)) / self.dx;
        let (v0, v1) = (self.values[cell], self.values[cell + 1]);
        let (m0, m1) = (self.slopes[cell] * self.dx, self.slopes[cell + 1] * self.dx);
        let d = (6.0 * t * t - 6.0 * t) * v0
            + (3.0 * t * t - 4.0 * t + 1.0) * m0
            + (6.0 * t - 6.0 * t * t) * v1
            + (3.0 * t * t - 2.0 * t) * m1;
        Ok(d / self.dx)
    }
}

/// Golden-section minimization of a unimodal function on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (a, b);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
