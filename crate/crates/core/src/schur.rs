//! Coarse operators for symmetric positive-definite systems through an
//! orthogonal subspace splitting: block elimination (Schur complement) and
//! the corrector-based coarse problem, which agree to machine precision.
//!
//! The fine space is split as `V = V_H ⊕ W` with an orthogonal projection
//! in a chosen (Euclidean or diagonally weighted) inner product. All block
//! algebra is carried out in orthonormal coordinates, where the splitting
//! reads
//!
//! ```text
//!     [ A  B ] [u_w]   [g_w]          A = V_wᵀ L V_w,  B = V_wᵀ L V_c,
//!     [ Bᵀ D ] [u_c] = [g_c],         D = V_cᵀ L V_c,
//! ```
//!
//! the Schur route eliminates `u_w` directly, and the corrector route
//! solves `A C = B` for the corrector columns and assembles the coarse
//! form with corrected trial functions. Both produce the same coarse
//! operator; the equivalence check runs the two distinct computations and
//! reports their difference.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{complement_basis, line_fit, orthonormalize};
use crate::profile::PeriodicProfile;

/// An orthogonal splitting of a fine SPD operator.
#[derive(Debug, Clone)]
pub struct SubspaceDecomposition {
    operator: DMatrix<f64>,
    weights: Option<DVector<f64>>,
    v_coarse: DMatrix<f64>,
    v_fine: DMatrix<f64>,
    a_block: DMatrix<f64>,
    b_block: DMatrix<f64>,
    d_block: DMatrix<f64>,
    /// Coordinates of the original (pre-orthonormalization) basis columns
    /// in the orthonormal coarse basis.
    basis_coords: DMatrix<f64>,
}

impl SubspaceDecomposition {
    pub fn dim(&self) -> usize {
        self.operator.nrows()
    }

    pub fn coarse_dim(&self) -> usize {
        self.v_coarse.ncols()
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// Orthonormalized coarse basis (columns).
    pub fn coarse_basis(&self) -> &DMatrix<f64> {
        &self.v_coarse
    }

    /// Complement basis (columns).
    pub fn complement(&self) -> &DMatrix<f64> {
        &self.v_fine
    }

    /// Coarse coordinates of a fine vector: `V_cᵀ W u`.
    pub fn coarse_coords(&self, u: &DVector<f64>) -> DVector<f64> {
        match &self.weights {
            Some(w) => {
                let wu = DVector::from_fn(u.len(), |i, _| u[i] * w[i]);
                self.v_coarse.transpose() * wu
            }
            None => self.v_coarse.transpose() * u,
        }
    }

    /// Materialized projector `P = V_c V_cᵀ W` onto the coarse space.
    pub fn projector(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut vtw = self.v_coarse.transpose();
        if let Some(w) = &self.weights {
            for j in 0..n {
                for r in 0..vtw.nrows() {
                    vtw[(r, j)] *= w[j];
                }
            }
        }
        &self.v_coarse * vtw
    }

    /// A coarse operator expressed against the original basis columns:
    /// `Rᵀ L̄ R` with `R` the basis coordinates. Structural properties of
    /// the physical basis (e.g. row sums of flux-form stiffness against
    /// partition-of-unity hats) live in this frame.
    pub fn physical_operator(&self, coarse: &CoarseProblem) -> DMatrix<f64> {
        self.basis_coords.transpose() * &coarse.operator * &self.basis_coords
    }

    /// Residuals of the structural invariants: idempotency `P² = P`,
    /// self-adjointness of `P` in the inner product, and `C = Bᵀ`.
    pub fn invariant_residuals(&self) -> (f64, f64, f64) {
        let p = self.projector();
        let idem = (&p * &p - &p).norm() / p.norm().max(1e-300);
        let wp = match &self.weights {
            Some(w) => {
                let mut m = p.clone();
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        m[(i, j)] *= w[i];
                    }
                }
                m
            }
            None => p.clone(),
        };
        let selfadj = (&wp - wp.transpose()).norm() / wp.norm().max(1e-300);
        // C = PLQ vs Bᵀ = (QLP)ᵀ in coordinates: V_cᵀ L V_w vs (V_wᵀ L V_c)ᵀ.
        let c_block = self.v_coarse.transpose() * &self.operator * &self.v_fine;
        let bt = self.b_block.transpose();
        let cb = (&c_block - &bt).norm() / bt.norm().max(1e-300);
        (idem, selfadj, cb)
    }
}

/// Split an SPD operator along the span of `basis`, orthonormalized in
/// the Euclidean or diagonally weighted inner product.
pub fn decompose(
    operator: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    weights: Option<DVector<f64>>,
) -> Result<SubspaceDecomposition> {
    let n = operator.nrows();
    if operator.ncols() != n {
        return Err(Error::Config("operator must be square".into()));
    }
    if basis.nrows() != n || basis.ncols() == 0 || basis.ncols() > n {
        return Err(Error::Basis(format!(
            "basis is {}x{} against an operator of size {n}",
            basis.nrows(),
            basis.ncols()
        )));
    }
    let asym = (operator - operator.transpose()).norm();
    if asym > 1e-12 * operator.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Domain(format!(
            "operator asymmetry {asym:.3e} exceeds 1e-12 relative"
        )));
    }
    if operator.clone().cholesky().is_none() {
        return Err(Error::Domain("operator is not positive definite".into()));
    }
    if let Some(w) = &weights {
        if w.len() != n || w.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::Domain("weights must be positive and match the size".into()));
        }
    }

    let v_coarse = orthonormalize(basis, weights.as_ref())?;
    let v_fine = complement_basis(&v_coarse, weights.as_ref())?;
    let a_block = v_fine.transpose() * operator * &v_fine;
    let b_block = v_fine.transpose() * operator * &v_coarse;
    let d_block = v_coarse.transpose() * operator * &v_coarse;
    let basis_coords = match &weights {
        Some(w) => {
            let weighted = DMatrix::from_fn(n, basis.ncols(), |i, j| basis[(i, j)] * w[i]);
            v_coarse.transpose() * weighted
        }
        None => v_coarse.transpose() * basis,
    };
    Ok(SubspaceDecomposition {
        operator: operator.clone(),
        weights,
        v_coarse,
        v_fine,
        a_block,
        b_block,
        d_block,
        basis_coords,
    })
}

/// Provenance of a coarse problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoarseProvenance {
    Schur,
    Corrector,
}

/// Coarse operator and load in coarse coordinates.
#[derive(Debug, Clone)]
pub struct CoarseProblem {
    pub operator: DMatrix<f64>,
    pub load: DVector<f64>,
    pub provenance: CoarseProvenance,
}

impl CoarseProblem {
    pub fn solve(&self) -> Result<DVector<f64>> {
        self.operator
            .clone()
            .cholesky()
            .map(|ch| ch.solve(&self.load))
            .ok_or_else(|| Error::Singular("coarse operator lost definiteness".into()))
    }

    /// Residuals of the SPD invariants: `(asymmetry, smallest eigenvalue)`.
    pub fn spd_residuals(&self) -> (f64, f64) {
        let asym =
            (&self.operator - self.operator.transpose()).norm() / self.operator.norm();
        let sym = (&self.operator + self.operator.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        (asym, lmin)
    }
}

/// Coarse problem by block elimination: `L̄ = D - Bᵀ A⁻¹ B`,
/// `f̄ = g_c - Bᵀ A⁻¹ g_w`. Solving it returns exactly the coarse
/// coordinates of the fine solution.
pub fn schur_homogenize(dec: &SubspaceDecomposition, f: &DVector<f64>) -> Result<CoarseProblem> {
    let g_w = dec.v_fine.transpose() * f;
    let g_c = dec.v_coarse.transpose() * f;
    if dec.v_fine.ncols() == 0 {
        return Ok(CoarseProblem {
            operator: dec.d_block.clone(),
            load: g_c,
            provenance: CoarseProvenance::Schur,
        });
    }
    let chol = dec
        .a_block
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("complement block is not positive definite".into()))?;
    let a_inv_b = chol.solve(&dec.b_block);
    let a_inv_gw = chol.solve(&g_w);
    let operator = &dec.d_block - dec.b_block.transpose() * a_inv_b;
    let load = g_c - dec.b_block.transpose() * a_inv_gw;
    Ok(CoarseProblem { operator, load, provenance: CoarseProvenance::Schur })
}

/// Corrector columns `C = A⁻¹ B` in complement coordinates; column `j` is
/// the corrector of the j-th coarse basis vector.
pub fn corrector_columns(dec: &SubspaceDecomposition) -> Result<DMatrix<f64>> {
    if dec.v_fine.ncols() == 0 {
        return Ok(DMatrix::zeros(0, dec.coarse_dim()));
    }
    let chol = dec
        .a_block
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("complement block is not positive definite".into()))?;
    Ok(chol.solve(&dec.b_block))
}

/// Coarse problem through corrected trial functions: assemble
/// `a((1-C) φ_j, φ_i)` and `(f, (1-C) φ_i)` with the corrector applied in
/// the fine space.
pub fn lod_homogenize(dec: &SubspaceDecomposition, f: &DVector<f64>) -> Result<CoarseProblem> {
    let c = corrector_columns(dec)?;
    // Corrected basis in fine coordinates: T = V_c - V_w C.
    let corrected = &dec.v_coarse - &dec.v_fine * &c;
    let operator = dec.v_coarse.transpose() * (&dec.operator * &corrected);
    let load = corrected.transpose() * f;
    Ok(CoarseProblem { operator, load, provenance: CoarseProvenance::Corrector })
}

/// Difference report between the elimination and corrector routes.
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// Relative Frobenius distance of the two coarse operators.
    pub operator_diff: f64,
    /// Relative distance of the two coarse solutions.
    pub solution_diff: f64,
    /// Relative distance of the Schur solution from the coarse
    /// coordinates of the direct fine solve.
    pub projection_diff: f64,
}

pub fn equivalence_check(
    dec: &SubspaceDecomposition,
    f: &DVector<f64>,
) -> Result<EquivalenceReport> {
    let schur = schur_homogenize(dec, f)?;
    let lod = lod_homogenize(dec, f)?;
    let op_scale = schur.operator.norm().max(1e-300);
    let operator_diff = (&schur.operator - &lod.operator).norm() / op_scale;
    let u_schur = schur.solve()?;
    let u_lod = lod.solve()?;
    let sol_scale = u_schur.norm().max(1e-300);
    let solution_diff = (&u_schur - &u_lod).norm() / sol_scale;

    let fine = dec
        .operator
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("fine operator lost definiteness".into()))?
        .solve(f);
    let projected = dec.coarse_coords(&fine);
    let projection_diff = (&u_schur - &projected).norm() / projected.norm().max(1e-300);
    Ok(EquivalenceReport { operator_diff, solution_diff, projection_diff })
}

/// Max over seeded random SPD instances of the equivalence residuals.
#[derive(Debug, Clone)]
pub struct TrialsReport {
    pub trials: usize,
    pub max_operator_diff: f64,
    pub max_solution_diff: f64,
    pub max_projection_diff: f64,
}

/// Random SPD operator, full-rank basis, and load for one trial.
pub fn random_instance(
    n: usize,
    rank: usize,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let spd = &m * m.transpose() + DMatrix::identity(n, n) * (0.5 * n as f64);
    let basis = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    (spd, basis, f)
}

/// Run `count` seeded random trials of [`equivalence_check`]; trial `t`
/// uses seed `seed + t`, so the sweep is reproducible and order-free.
pub fn equivalence_trials(
    n: usize,
    rank: usize,
    count: usize,
    seed: u64,
) -> Result<TrialsReport> {
    if rank == 0 || rank > n {
        return Err(Error::Basis(format!("rank {rank} invalid for size {n}")));
    }
    let idx: Vec<u64> = (0..count as u64).collect();
    let reports: Vec<Result<EquivalenceReport>> = crate::par::map_items(&idx, |&t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));
        let (l, basis, f) = random_instance(n, rank, &mut rng);
        let dec = decompose(&l, &basis, None)?;
        equivalence_check(&dec, &f)
    });
    let mut out = TrialsReport {
        trials: count,
        max_operator_diff: 0.0,
        max_solution_diff: 0.0,
        max_projection_diff: 0.0,
    };
    for r in reports {
        let r = r?;
        out.max_operator_diff = out.max_operator_diff.max(r.operator_diff);
        out.max_solution_diff = out.max_solution_diff.max(r.solution_diff);
        out.max_projection_diff = out.max_projection_diff.max(r.projection_diff);
    }
    Ok(out)
}

/// Band-magnitude profile of a coarse operator whose degrees of freedom
/// carry 1D positions: `m(d) = max |L̄_ij|` over pairs at coarse-grid
/// distance `d`, plus a line fit of `log m(d)`.
#[derive(Debug, Clone)]
pub struct DecayProfile {
    pub distances: Vec<usize>,
    pub magnitudes: Vec<f64>,
    /// Fit of `log m(d)` over magnitudes above the noise floor;
    /// `None` when fewer than two usable points remain.
    pub slope: Option<f64>,
    pub correlation: Option<f64>,
    pub floor: f64,
}

pub fn decay_profile(coarse: &CoarseProblem, positions: &[f64]) -> Result<DecayProfile> {
    let n = coarse.operator.nrows();
    if positions.len() != n {
        return Err(Error::Config("one position per coarse degree of freedom".into()));
    }
    // Coarse spacing: smallest positive gap.
    let mut spacing = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let g = (positions[i] - positions[j]).abs();
            if g > 0.0 {
                spacing = spacing.min(g);
            }
        }
    }
    if !spacing.is_finite() {
        return Err(Error::Config("positions are all identical".into()));
    }
    let mut by_distance: std::collections::BTreeMap<usize, f64> = Default::default();
    for i in 0..n {
        for j in 0..n {
            let d = ((positions[i] - positions[j]).abs() / spacing).round() as usize;
            let entry = by_distance.entry(d).or_insert(0.0);
            *entry = entry.max(coarse.operator[(i, j)].abs());
        }
    }
    if by_distance.len() < 4 {
        return Err(Error::Config(format!(
            "decay profile needs at least 4 distinct distances, got {}",
            by_distance.len()
        )));
    }
    let distances: Vec<usize> = by_distance.keys().copied().collect();
    let magnitudes: Vec<f64> = by_distance.values().copied().collect();
    let scale = magnitudes.iter().copied().fold(0.0, f64::max);
    let floor = 1e-13 * scale;

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&d, &m) in distances.iter().zip(&magnitudes) {
        if m > floor {
            xs.push(d as f64);
            ys.push(m.ln());
        }
    }
    let (slope, correlation) = if xs.len() >= 2 {
        let (s, _, c) = line_fit(&xs, &ys)?;
        (Some(s), Some(c))
    } else {
        (None, None)
    };
    Ok(DecayProfile { distances, magnitudes, slope, correlation, floor })
}

/// Tridiagonal flux-form Dirichlet operator on `n` interior nodes of
/// (0, 1) with the oscillatory coefficient `a(x / eps_cell)`; the standard
/// two-scale test matrix for decay studies.
pub fn two_scale_operator(n: usize, profile: &PeriodicProfile, eps_cell: f64) -> DMatrix<f64> {
    let h = 1.0 / (n + 1) as f64;
    let a = |x: f64| profile.eval_scaled(x, eps_cell);
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        let x_left = (i as f64 + 0.5) * h;
        let x_right = (i as f64 + 1.5) * h;
        let (al, ar) = (a(x_left), a(x_right));
        l[(i, i)] = (al + ar) / (h * h);
        if i + 1 < n {
            l[(i, i + 1)] = -ar / (h * h);
            l[(i + 1, i)] = -ar / (h * h);
        }
    }
    l
}

/// Piecewise-linear hat interpolants on the nested coarse grid: fine
/// interior nodes `i h`, coarse interior nodes `j H` with
/// `(n+1) = ratio (N+1)`.
pub fn hat_basis(n_fine: usize, n_coarse: usize) -> Result<DMatrix<f64>> {
    let ratio = (n_fine + 1) / (n_coarse + 1);
    if ratio * (n_coarse + 1) != n_fine + 1 || ratio == 0 {
        return Err(Error::Config(format!(
            "fine size {n_fine} is not nested over coarse size {n_coarse}"
        )));
    }
    let mut basis = DMatrix::zeros(n_fine, n_coarse);
    for j in 0..n_coarse {
        let center = (j + 1) * ratio;
        for i in 0..n_fine {
            let fi = i + 1;
            let d = (fi as f64 - center as f64).abs() / ratio as f64;
            if d < 1.0 {
                basis[(i, j)] = 1.0 - d;
            }
        }
    }
    Ok(basis)
}

/// Coarse-node positions matching [`hat_basis`].
pub fn hat_positions(n_coarse: usize) -> Vec<f64> {
    let big_h = 1.0 / (n_coarse + 1) as f64;
    (0..n_coarse).map(|j| (j + 1) as f64 * big_h).collect()
}

/// Injection basis selecting every `ratio`-th fine node as a coarse degree
/// of freedom (the representative-node frame, in which elimination
/// inherits the fine operator's conservation row sums exactly).
pub fn selection_basis(n_fine: usize, n_coarse: usize) -> Result<DMatrix<f64>> {
    let ratio = (n_fine + 1) / (n_coarse + 1);
    if ratio * (n_coarse + 1) != n_fine + 1 || ratio == 0 {
        return Err(Error::Config(format!(
            "fine size {n_fine} is not nested over coarse size {n_coarse}"
        )));
    }
    let mut basis = DMatrix::zeros(n_fine, n_coarse);
    for j in 0..n_coarse {
        basis[((j + 1) * ratio - 1, j)] = 1.0;
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rank_coarse_space_reduces_to_identity_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (l, _, f) = random_instance(8, 4, &mut rng);
        let basis = DMatrix::identity(8, 8);
        let dec = decompose(&l, &basis, None).unwrap();
        assert_eq!(dec.complement().ncols(), 0);
        let coarse = schur_homogenize(&dec, &f).unwrap();
        // With V_c = I the coarse operator is L itself.
        assert!((coarse.operator.clone() - &l).norm() <= 1e-12 * l.norm());
        let report = equivalence_check(&dec, &f).unwrap();
        assert!(report.operator_diff <= 1e-12);
        assert!(report.solution_diff <= 1e-12);
        assert!(report.projection_diff <= 1e-12);
    }

    #[test]
    fn invariants_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (l, basis, _) = random_instance(16, 4, &mut rng);
        let dec = decompose(&l, &basis, None).unwrap();
        let (idem, selfadj, cb) = dec.invariant_residuals();
        assert!(idem <= 1e-12, "idempotency {idem}");
        assert!(selfadj <= 1e-12, "self-adjointness {selfadj}");
        assert!(cb <= 1e-12, "C = B^T {cb}");
    }

    #[test]
    fn weighted_inner_product_keeps_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (l, basis, f) = random_instance(20, 5, &mut rng);
        let w = DVector::from_fn(20, |_, _| rng.random_range(0.5..2.0));
        let dec = decompose(&l, &basis, Some(w)).unwrap();
        let (idem, selfadj, cb) = dec.invariant_residuals();
        assert!(idem <= 1e-12 && selfadj <= 1e-12 && cb <= 1e-12);
        let report = equivalence_check(&dec, &f).unwrap();
        assert!(report.operator_diff <= 1e-10);
        assert!(report.solution_diff <= 1e-10);
        assert!(report.projection_diff <= 1e-10);
    }

    #[test]
    fn orthonormal_input_basis_is_fixed_point() {
        let mut basis = DMatrix::zeros(6, 2);
        basis[(0, 0)] = 1.0;
        basis[(3, 1)] = 1.0;
        let l = DMatrix::identity(6, 6) * 2.0;
        let dec = decompose(&l, &basis, None).unwrap();
        let diff = (dec.coarse_basis().clone() - &basis).norm();
        assert!(diff <= 1e-14);
    }

    #[test]
    fn block_diagonal_operator_needs_no_corrector() {
        // L block-diagonal across the splitting: B = 0, correctors vanish,
        // and the coarse problem is plain Galerkin.
        let mut l = DMatrix::identity(6, 6);
        l[(0, 0)] = 3.0;
        l[(1, 1)] = 2.0;
        let mut basis = DMatrix::zeros(6, 2);
        basis[(0, 0)] = 1.0;
        basis[(1, 1)] = 1.0;
        let dec = decompose(&l, &basis, None).unwrap();
        let c = corrector_columns(&dec).unwrap();
        assert!(c.norm() <= 1e-14);
        let f = DVector::from_fn(6, |i, _| i as f64 + 1.0);
        let schur = schur_homogenize(&dec, &f).unwrap();
        let galerkin = dec.coarse_basis().transpose() * &l * dec.coarse_basis();
        assert!((schur.operator.clone() - galerkin).norm() <= 1e-13);
        assert!((schur.load.clone() - dec.coarse_basis().transpose() * &f).norm() <= 1e-13);
    }

    #[test]
    fn correctors_live_in_the_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (l, basis, _) = random_instance(64, 8, &mut rng);
        let dec = decompose(&l, &basis, None).unwrap();
        let c = corrector_columns(&dec).unwrap();
        let p = dec.projector();
        for j in 0..c.ncols() {
            let fine_corr = dec.complement() * c.column(j);
            let leaked = (&p * &fine_corr).norm();
            assert!(leaked <= 1e-12 * fine_corr.norm().max(1e-300), "column {j}: {leaked}");
        }
    }

    #[test]
    fn seeded_trials_agree_to_machine_precision() {
        let report = equivalence_trials(32, 6, 25, 0).unwrap();
        assert!(report.max_operator_diff <= 1e-10, "{}", report.max_operator_diff);
        assert!(report.max_solution_diff <= 1e-10, "{}", report.max_solution_diff);
        assert!(report.max_projection_diff <= 1e-10, "{}", report.max_projection_diff);
    }

    #[test]
    fn coarse_problems_stay_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (l, basis, f) = random_instance(24, 6, &mut rng);
        let dec = decompose(&l, &basis, None).unwrap();
        for coarse in [schur_homogenize(&dec, &f).unwrap(), lod_homogenize(&dec, &f).unwrap()] {
            let (asym, lmin) = coarse.spd_residuals();
            assert!(asym <= 1e-12, "asymmetry {asym}");
            assert!(lmin > 0.0, "lost definiteness: {lmin}");
        }
    }

    #[test]
    fn indefinite_or_rank_deficient_inputs_rejected() {
        let mut l = DMatrix::identity(4, 4);
        l[(0, 0)] = -1.0;
        let basis = DMatrix::from_fn(4, 2, |i, j| if i == j { 1.0 } else { 0.0 });
        assert!(decompose(&l, &basis, None).is_err());
        let l = DMatrix::identity(4, 4);
        let dependent = DMatrix::from_fn(4, 2, |i, _| if i == 0 { 1.0 } else { 0.0 });
        assert!(matches!(decompose(&l, &dependent, None), Err(Error::Basis(_))));
    }

    #[test]
    fn two_scale_decay_profile_is_exponential() {
        let profile = PeriodicProfile::two_valued(1.0, 2.0, 0.5).unwrap();
        let n = 255;
        let n_coarse = 15;
        let l = two_scale_operator(n, &profile, 1.0 / 16.0);
        let basis = hat_basis(n, n_coarse).unwrap();
        let dec = decompose(&l, &basis, None).unwrap();
        let f = DVector::from_element(n, 1.0);
        let coarse = schur_homogenize(&dec, &f).unwrap();
        let prof = decay_profile(&coarse, &hat_positions(n_coarse)).unwrap();
        let slope = prof.slope.unwrap();
        let corr = prof.correlation.unwrap();
        assert!(slope < 0.0, "slope {slope}");
        assert!(corr <= -0.99, "correlation {corr}");
    }

    #[test]
    fn moderate_contrast_keeps_negative_slope() {
        let profile = PeriodicProfile::two_valued(1.0, 10.0, 0.5).unwrap();
        let n = 255;
        let l = two_scale_operator(n, &profile, 1.0 / 16.0);
        let basis = hat_basis(n, 15).unwrap();
        let dec = decompose(&l, &basis, None).unwrap();
        let coarse = schur_homogenize(&dec, &DVector::from_element(n, 1.0)).unwrap();
        let prof = decay_profile(&coarse, &hat_positions(15)).unwrap();
        assert!(prof.slope.unwrap() < 0.0);
    }

    #[test]
    fn fine_equals_coarse_tridiagonal_has_no_fill_in() {
        let profile = PeriodicProfile::constant(1.0);
        let n = 15;
        let l = two_scale_operator(n, &profile, 1.0);
        let basis = DMatrix::identity(n, n);
        let dec = decompose(&l, &basis, None).unwrap();
        let coarse = schur_homogenize(&dec, &DVector::from_element(n, 1.0)).unwrap();
        let positions: Vec<f64> = (0..n).map(|i| (i + 1) as f64 / (n + 1) as f64).collect();
        let prof = decay_profile(&coarse, &positions).unwrap();
        for (&d, &m) in prof.distances.iter().zip(&prof.magnitudes) {
            if d >= 2 {
                assert_eq!(m, 0.0, "fill-in at distance {d}");
            }
        }
    }

    #[test]
    fn interior_rows_inherit_discrete_conservation() {
        // In the representative-node frame, eliminating the in-between
        // nodes of the flux-form operator keeps the zero interior row sums
        // of the fine operator (series-spring reduction).
        let profile = PeriodicProfile::two_valued(1.0, 2.0, 0.5).unwrap();
        let n = 255;
        let n_coarse = 15;
        let l = two_scale_operator(n, &profile, 1.0 / 16.0);
        let basis = selection_basis(n, n_coarse).unwrap();
        let dec = decompose(&l, &basis, None).unwrap();
        let coarse = schur_homogenize(&dec, &DVector::from_element(n, 1.0)).unwrap();
        let phys = dec.physical_operator(&coarse);
        let scale = phys.norm();
        for i in 1..n_coarse - 1 {
            let row_sum: f64 = (0..n_coarse).map(|j| phys[(i, j)]).sum();
            assert!(
                row_sum.abs() <= 1e-8 * scale,
                "row {i}: {row_sum} vs scale {scale}"
            );
        }
        // SPD is preserved through the elimination.
        let (asym, lmin) = coarse.spd_residuals();
        assert!(asym <= 1e-12 && lmin > 0.0);
    }
}
