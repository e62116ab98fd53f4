//! Rotation step: smallest eigenpairs of the Hessian restricted to zero-mean
//! fields.
//!
//! Two metrics are supported. In the projected L² metric the operator is
//! `PHP` on zero-mean fields. In the H⁻¹ metric the pencil is
//! `Hψ = λ(−Δ)⁻¹ψ`, solved as the symmetric problem
//! `(−Δ)^{1/2} H (−Δ)^{1/2} w = λw` with `ψ = (−Δ)^{1/2} w`, so that
//! `‖ψ‖_{H⁻¹} = ‖w‖_{L²}`.
//!
//! The iterative solver is locally optimal preconditioned conjugate gradient
//! with block size one: each step performs Rayleigh–Ritz on
//! `span{x, T r, p}`.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::{dot, inner_l2_unchecked, Field, Grid};
use crate::operators::{project, project_in_place};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    ProjectedL2,
    HMinus1,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::ProjectedL2 => "projected-l2",
            Metric::HMinus1 => "h-1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "projected-l2" | "l2" => Ok(Metric::ProjectedL2),
            "h-1" | "h1" | "hminus1" | "h-minus-1" => Ok(Metric::HMinus1),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinModeOptions {
    /// Converged when `‖Ax − λx‖ ≤ tolerance · max(1, |λ|)`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub metric: Metric,
    /// Seed for the random zero-mean start vector.
    pub seed: u64,
}

impl Default for MinModeOptions {
    fn default() -> Self {
        MinModeOptions { tolerance: 1e-10, max_iterations: 10_000, metric: Metric::ProjectedL2, seed: 0 }
    }
}

impl MinModeOptions {
    pub fn with_metric(metric: Metric) -> Self {
        MinModeOptions { metric, ..Default::default() }
    }
}

#[derive(Debug, Clone)]
pub struct MinModeResult {
    pub eigenvalue: f64,
    /// Zero-mean and unit-norm in the solver's metric.
    pub eigenvector: Field,
    pub residual: f64,
    pub iterations: usize,
    pub metric: Metric,
    /// Rayleigh quotient after every iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

/// Rayleigh quotient of `psi` for the Hessian at `phi` in the given metric.
pub fn rayleigh_quotient(
    model: &dyn EnergyModel,
    phi: &Field,
    psi: &Field,
    metric: Metric,
) -> Result<f64> {
    model.check_grid(phi)?;
    model.check_grid(psi)?;
    if psi.max_abs() == 0.0 {
        return Err(Error::Precondition("Rayleigh quotient of the zero field".into()));
    }
    model.ops().check_zero_mean(psi, "Rayleigh quotient argument")?;
    match metric {
        Metric::ProjectedL2 => {
            let p = project(psi);
            let php = project(&model.hessian_unchecked(phi, &p));
            Ok(inner_l2_unchecked(psi, &php) / inner_l2_unchecked(psi, psi))
        }
        Metric::HMinus1 => {
            let num = inner_l2_unchecked(psi, &model.hessian_unchecked(phi, psi));
            Ok(num / model.ops().inner_hminus1(psi, psi)?)
        }
    }
}

/// Smallest constrained eigenpair from a seeded random start.
pub fn min_mode(model: &dyn EnergyModel, phi: &Field, opts: &MinModeOptions) -> Result<MinModeResult> {
    MinModeSolver::new(model, phi, opts.metric)?.solve(None, &[], opts)
}

/// Smallest eigenpair, warm-started from `start` (if given) and restricted to
/// the orthogonal complement of `locked` (in the metric's inner product).
pub fn min_mode_from(
    model: &dyn EnergyModel,
    phi: &Field,
    start: Option<&Field>,
    locked: &[Field],
    opts: &MinModeOptions,
) -> Result<MinModeResult> {
    MinModeSolver::new(model, phi, opts.metric)?.solve(start, locked, opts)
}

/// The `count` smallest eigenpairs by successive deflation.
pub fn lowest_modes(
    model: &dyn EnergyModel,
    phi: &Field,
    count: usize,
    opts: &MinModeOptions,
) -> Result<Vec<MinModeResult>> {
    let solver = MinModeSolver::new(model, phi, opts.metric)?;
    let mut found: Vec<MinModeResult> = Vec::with_capacity(count);
    for k in 0..count {
        let locked: Vec<Field> = found.iter().map(|r| r.eigenvector.clone()).collect();
        let o = MinModeOptions { seed: opts.seed.wrapping_add(k as u64), ..*opts };
        found.push(solver.solve(None, &locked, &o)?);
    }
    Ok(found)
}

struct MinModeSolver<'a> {
    model: &'a dyn EnergyModel,
    phi: &'a Field,
    metric: Metric,
    grid: Grid,
    /// `(−Δ)^{1/2}` multipliers (H⁻¹ only).
    half: Vec<f64>,
    precond: Vec<f64>,
}

impl<'a> MinModeSolver<'a> {
    fn new(model: &'a dyn EnergyModel, phi: &'a Field, metric: Metric) -> Result<Self> {
        model.check_grid(phi)?;
        let ops = model.ops();
        let shift = 1.0 + phi.values().iter().fold(0.0f64, |m, &s| m.max(model.potential_d2(s).abs()));
        let lin = model.linear_symbol();
        let (half, precond) = match metric {
            Metric::ProjectedL2 => {
                let t = lin.iter().map(|&a| 1.0 / (a.abs() + shift)).collect();
                (Vec::new(), t)
            }
            Metric::HMinus1 => {
                let l = ops.neg_laplacian_symbol();
                let half = l.iter().map(|&x| x.sqrt()).collect();
                let t = l
                    .iter()
                    .zip(lin)
                    .enumerate()
                    .map(|(k, (&x, &a))| if k == 0 { 0.0 } else { 1.0 / (x * (a.abs() + shift) + shift) })
                    .collect();
                (half, t)
            }
        };
        Ok(MinModeSolver { model, phi, metric, grid: *phi.grid(), half, precond })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let f = Field::from_raw(self.grid, x.to_vec());
        match self.metric {
            Metric::ProjectedL2 => {
                let mut hx = self.model.hessian_unchecked(self.phi, &project(&f));
                project_in_place(&mut hx);
                hx.into_values()
            }
            Metric::HMinus1 => {
                let ops = self.model.ops();
                let psi = ops.apply_symbol(&f, &self.half);
                let hpsi = self.model.hessian_unchecked(self.phi, &psi);
                ops.apply_symbol(&hpsi, &self.half).into_values()
            }
        }
    }

    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let f = Field::from_raw(self.grid, r.to_vec());
        self.model.ops().apply_symbol(&f, &self.precond).into_values()
    }

    /// Maps a field into the solver variable (identity or `(−Δ)^{-1/2}`).
    fn to_solver_space(&self, psi: &Field) -> Vec<f64> {
        match self.metric {
            Metric::ProjectedL2 => project(psi).into_values(),
            Metric::HMinus1 => {
                let inv: Vec<f64> =
                    self.half.iter().map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 }).collect();
                self.model.ops().apply_symbol(psi, &inv).into_values()
            }
        }
    }

    fn to_field(&self, x: &[f64]) -> Field {
        let cell = self.grid.cell_volume();
        let scale = 1.0 / (dot(x, x) * cell).sqrt();
        let f = Field::from_raw(self.grid, x.iter().map(|v| v * scale).collect());
        match self.metric {
            Metric::ProjectedL2 => f,
            Metric::HMinus1 => self.model.ops().apply_symbol(&f, &self.half),
        }
    }

    fn solve(&self, start: Option<&Field>, locked: &[Field], opts: &MinModeOptions) -> Result<MinModeResult> {
        if !(opts.tolerance > 0.0) {
            return Err(Error::Config("eigensolver tolerance must be positive".into()));
        }
        for f in locked.iter().chain(start) {
            self.model.check_grid(f)?;
        }
        let n = self.grid.len();
        if locked.len() + 2 > n {
            return Err(Error::Precondition("too many locked vectors for this grid".into()));
        }
        let basis = orthonormal_set(locked.iter().map(|f| self.to_solver_space(f)).collect());
        let constrain = |v: &mut Vec<f64>| {
            for _ in 0..2 {
                let mean = v.iter().sum::<f64>() / n as f64;
                v.iter_mut().for_each(|x| *x -= mean);
                for b in &basis {
                    let c = dot(b, v);
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
        };

        let mut x = start.map(|s| self.to_solver_space(s)).unwrap_or_default();
        if !x.is_empty() {
            constrain(&mut x);
        }
        if x.is_empty() || norm(&x) < 1e-8 * start.map_or(1.0, |s| norm(s.values())).max(1e-300) {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            x = Field::random_normal(self.grid, &mut rng).into_values();
            constrain(&mut x);
        }
        normalize(&mut x);
        let mut ax = self.apply(&x);
        let mut lam = dot(&x, &ax);
        let mut history = vec![lam];
        let mut p: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut best = (f64::INFINITY, x.clone(), lam);
        // Tracked images `A·b` drift by roundoff; near the target every
        // iterate is re-applied instead.
        let mut exact = false;

        for it in 0..=opts.max_iterations {
            let mut r: Vec<f64> = ax.iter().zip(&x).map(|(a, b)| a - lam * b).collect();
            constrain(&mut r);
            let mut res = norm(&r);
            if res < best.0 {
                best = (res, x.clone(), lam);
            }
            let target = opts.tolerance * lam.abs().max(1.0);
            exact |= res <= 1e3 * target;
            if res <= target {
                // Confirm against a fresh operator application.
                ax = self.apply(&x);
                lam = dot(&x, &ax);
                r = ax.iter().zip(&x).map(|(a, b)| a - lam * b).collect();
                constrain(&mut r);
                res = norm(&r);
                if res <= target {
                    return Ok(MinModeResult {
                        eigenvalue: lam,
                        eigenvector: self.to_field(&x),
                        residual: res,
                        iterations: it,
                        metric: self.metric,
                        history,
                    });
                }
            }
            if it == opts.max_iterations {
                break;
            }

            let mut w = self.precondition(&r);
            constrain(&mut w);
            let aw = self.apply(&w);

            let mut vecs = vec![(x.clone(), ax.clone())];
            let mut candidates = vec![(w, aw)];
            if let Some(pp) = p.take() {
                candidates.push(pp);
            }
            for (mut v, mut av) in candidates {
                let before = norm(&v);
                if before == 0.0 {
                    continue;
                }
                for _ in 0..2 {
                    for (b, ab) in &vecs {
                        let c = dot(b, &v);
                        v.iter_mut().zip(b).for_each(|(s, y)| *s -= c * y);
                        av.iter_mut().zip(ab).for_each(|(s, y)| *s -= c * y);
                    }
                }
                let after = norm(&v);
                if after > 1e-10 * before {
                    v.iter_mut().for_each(|s| *s /= after);
                    av.iter_mut().for_each(|s| *s /= after);
                    vecs.push((v, av));
                }
            }

            let m = vecs.len();
            let gram = DMatrix::from_fn(m, m, |i, j| {
                0.5 * (dot(&vecs[i].0, &vecs[j].1) + dot(&vecs[j].0, &vecs[i].1))
            });
            let c = lowest_eigenvector(gram);

            let mut xn = vec![0.0; n];
            let mut axn = vec![0.0; n];
            let mut pn = vec![0.0; n];
            let mut apn = vec![0.0; n];
            for (k, (v, av)) in vecs.iter().enumerate() {
                let ck = c[k];
                for i in 0..n {
                    xn[i] += ck * v[i];
                    axn[i] += ck * av[i];
                    if k > 0 {
                        pn[i] += ck * v[i];
                        apn[i] += ck * av[i];
                    }
                }
            }
            let s = norm(&xn);
            xn.iter_mut().for_each(|v| *v /= s);
            axn.iter_mut().for_each(|v| *v /= s);
            x = xn;
            ax = axn;
            if exact || (it + 1) % 25 == 0 {
                constrain(&mut x);
                normalize(&mut x);
                ax = self.apply(&x);
            }
            lam = dot(&x, &ax);
            history.push(lam);
            p = (m > 1).then_some((pn, apn));
        }

        let (res, xb, lb) = best;
        Err(Error::MinModeNotConverged(Box::new(MinModeResult {
            eigenvalue: lb,
            eigenvector: self.to_field(&xb),
            residual: res,
            iterations: opts.max_iterations,
            metric: self.metric,
            history,
        })))
    }
}

/// Lowest eigenvector of a small symmetric matrix by cyclic Jacobi sweeps.
/// Near convergence the off-diagonal Ritz couplings are tiny next to the
/// diagonal gaps; rotations keep them to full relative accuracy where the
/// closed-form 2×2 path of `SymmetricEigen` cancels them away.
fn lowest_eigenvector(mut a: DMatrix<f64>) -> Vec<f64> {
    let m = a.nrows();
    let mut q = DMatrix::<f64>::identity(m, m);
    for _ in 0..50 {
        let mut off = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off == 0.0 {
            break;
        }
        for p in 0..m {
            for r in p + 1..m {
                let apr = a[(p, r)];
                if apr == 0.0 {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let (akp, akr) = (a[(k, p)], a[(k, r)]);
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..m {
                    let (apk, ark) = (a[(p, k)], a[(r, k)]);
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
                for k in 0..m {
                    let (qkp, qkr) = (q[(k, p)], q[(k, r)]);
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }
    let imin = (0..m).min_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)])).expect("non-empty");
    q.column(imin).iter().copied().collect()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn normalize(v: &mut [f64]) {
    let s = norm(v);
    v.iter_mut().for_each(|x| *x /= s);
}

fn orthonormal_set(vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for mut v in vs {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        v.iter_mut().for_each(|x| *x -= mean);
        for _ in 0..2 {
            for b in &out {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        if norm(&v) > 1e-12 {
            normalize(&mut v);
            out.push(v);
        }
    }
    out
}

/// Largest grid the dense oracle accepts.
pub const DENSE_ORACLE_MAX_POINTS: usize = 64;

/// Full constrained spectrum from a dense eigendecomposition.
#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    pub metric: Metric,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Zero-mean, unit norm in the metric, same order as `eigenvalues`.
    pub eigenvectors: Vec<Field>,
}

impl DenseSpectrum {
    /// Eigenvectors whose eigenvalue lies within `tol` of the smallest one.
    pub fn smallest_eigenspace(&self, tol: f64) -> Vec<Field> {
        let lo = self.eigenvalues[0];
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .take_while(|(l, _)| **l - lo <= tol)
            .map(|(_, v)| v.clone())
            .collect()
    }
}

/// Angle between `v` and the span of `basis`, measured with the Euclidean
/// (equivalently L²) inner product on grid values.
pub fn principal_angle(v: &Field, basis: &[Field]) -> f64 {
    let ortho = orthonormal_set(basis.iter().map(|b| b.values().to_vec()).collect());
    let mut u = v.values().to_vec();
    let n = u.len() as f64;
    let mean = u.iter().sum::<f64>() / n;
    u.iter_mut().for_each(|x| *x -= mean);
    normalize(&mut u);
    // atan2 of the orthogonal and parallel parts stays accurate for tiny angles.
    let mut rest = u.clone();
    let mut par2 = 0.0;
    for b in &ortho {
        let c = dot(b, &u);
        par2 += c * c;
        rest.iter_mut().zip(b).for_each(|(r, x)| *r -= c * x);
    }
    dot(&rest, &rest).sqrt().atan2(par2.sqrt())
}

/// Assembles the constrained operator column by column with
/// `hessian_apply` and diagonalizes it densely.
///
/// The zero-mean subspace is spanned by an orthonormal basis `Q` taken from
/// the QR factorization of the centering matrix. For the H⁻¹ metric the
/// pencil `(QᵀHQ, Qᵀ(−Δ)⁻¹Q)` is reduced with a Cholesky factor of the
/// second matrix.
pub fn dense_oracle(model: &dyn EnergyModel, phi: &Field, metric: Metric) -> Result<DenseSpectrum> {
    model.check_grid(phi)?;
    let grid = *phi.grid();
    let n = grid.len();
    if n > DENSE_ORACLE_MAX_POINTS {
        return Err(Error::Precondition(format!(
            "dense oracle needs at most {DENSE_ORACLE_MAX_POINTS} grid points, got {n}"
        )));
    }
    let unit = |i: usize| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        Field::from_raw(grid, e)
    };
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        let col = model.hessian_unchecked(phi, &unit(i));
        h.set_column(i, &nalgebra::DVector::from_column_slice(col.values()));
    }
    let h = (&h + h.transpose()) * 0.5;

    let centering = DMatrix::from_fn(n, n - 1, |i, j| if i == j { 1.0 } else { 0.0 } - 1.0 / n as f64);
    let q = centering.qr().q();
    let reduced_h = q.transpose() * &h * &q;

    let cell = grid.cell_volume();
    let (values, coeffs) = match metric {
        Metric::ProjectedL2 => {
            let eig = SymmetricEigen::new(reduced_h);
            (eig.eigenvalues, q * eig.eigenvectors)
        }
        Metric::HMinus1 => {
            let ops = model.ops();
            let mut g = DMatrix::zeros(n, n);
            for i in 0..n {
                let col = ops.inverse_neg_laplacian_unchecked(&project(&unit(i)));
                g.set_column(i, &nalgebra::DVector::from_column_slice(col.values()));
            }
            let g = (&g + g.transpose()) * 0.5;
            let b = q.transpose() * g * &q;
            let chol = b
                .cholesky()
                .ok_or_else(|| Error::Breakdown("(−Δ)⁻¹ restricted to zero-mean fields is not positive".into()))?;
            let l = chol.l();
            let linv = l
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Breakdown("singular Cholesky factor".into()))?;
            let c = &linv * reduced_h * linv.transpose();
            let c = (&c + c.transpose()) * 0.5;
            let eig = SymmetricEigen::new(c);
            let y = linv.transpose() * eig.eigenvectors;
            (eig.eigenvalues, q * y)
        }
    };

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut eigenvalues = Vec::with_capacity(order.len());
    let mut eigenvectors = Vec::with_capacity(order.len());
    for k in order {
        let v = Field::from_raw(grid, coeffs.column(k).iter().copied().collect());
        let norm2 = match metric {
            Metric::ProjectedL2 => dot(v.values(), v.values()) * cell,
            Metric::HMinus1 => inner_l2_unchecked(&model.ops().inverse_neg_laplacian_unchecked(&v), &v),
        };
        eigenvalues.push(values[k]);
        eigenvectors.push(v.scaled(1.0 / norm2.sqrt()));
    }
    Ok(DenseSpectrum { metric, eigenvalues, eigenvectors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{GinzburgLandau, LandauBrazovskii};
    use crate::operators::BackendKind;
    use std::f64::consts::PI;

    const KAPPA: f64 = 0.04;

    #[test]
    fn ritz_vector_resolves_tiny_coupling() {
        let (d0, d1, off) = (-0.18881674031827256, 0.5406412147034254, 2.1642810423059926e-9);
        let g = DMatrix::from_row_slice(2, 2, &[d0, off, off, d1]);
        let c = lowest_eigenvector(g);
        // First-order perturbation theory.
        let expected = off / (d0 - d1);
        assert!((c[1] / c[0] - expected).abs() < 1e-6 * expected.abs());
    }

    #[test]
    fn ritz_vector_matches_dense_solver() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, -1.0, 0.4, -0.1, 0.4, 0.5]);
        let c = lowest_eigenvector(g.clone());
        let eig = SymmetricEigen::new(g.clone());
        let lam = eig.eigenvalues.min();
        let cv = nalgebra::DVector::from_vec(c);
        assert!((&g * &cv - &cv * lam).norm() < 1e-12);
        assert!((cv.norm() - 1.0).abs() < 1e-14);
    }

    fn gl(n: usize, backend: BackendKind) -> GinzburgLandau {
        GinzburgLandau::new(Grid::new_1d(n, 1.0).unwrap(), backend, Default::default()).unwrap()
    }

    #[test]
    fn rayleigh_quotient_examples() {
        let m = gl(100, BackendKind::Spectral);
        let g = *m.grid();
        let zero = Field::zeros(g);
        let s = Field::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let l2 = rayleigh_quotient(&m, &zero, &s, Metric::ProjectedL2).unwrap();
        let q2 = 4.0 * PI * PI;
        assert!((l2 - (KAPPA * KAPPA * q2 - 1.0)).abs() < 1e-12);
        let h1 = rayleigh_quotient(&m, &zero, &s, Metric::HMinus1).unwrap();
        assert!((h1 - q2 * (KAPPA * KAPPA * q2 - 1.0)).abs() < 1e-9);
        assert!((h1 + 36.985).abs() < 1e-3);
        let doubled = rayleigh_quotient(&m, &zero, &s.scaled(2.0), Metric::ProjectedL2).unwrap();
        assert!((doubled - l2).abs() <= 1e-13 * l2.abs());
    }

    #[test]
    fn rayleigh_quotient_rejects_bad_arguments() {
        let m = gl(16, BackendKind::Spectral);
        let g = *m.grid();
        let zero = Field::zeros(g);
        assert!(rayleigh_quotient(&m, &zero, &zero, Metric::ProjectedL2).is_err());
        let c = Field::constant(g, 1.0);
        assert!(matches!(
            rayleigh_quotient(&m, &zero, &c, Metric::HMinus1),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn l2_min_mode_at_zero_state() {
        let m = gl(100, BackendKind::FiniteDifference);
        let g = *m.grid();
        let r = min_mode(&m, &Field::zeros(g), &MinModeOptions::default()).unwrap();
        let h = 0.01;
        let fd1 = (2.0 - 2.0 * (2.0 * PI / 100.0).cos()) / (h * h);
        assert!((r.eigenvalue - (KAPPA * KAPPA * fd1 - 1.0)).abs() < 1e-9);
        let s = Field::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let c = Field::from_fn(g, |x, _| (2.0 * PI * x).cos());
        assert!(principal_angle(&r.eigenvector, &[s, c]) < 1e-5);
        assert!(r.eigenvector.mean().abs() < 1e-12);
        assert!((r.eigenvector.norm_l2() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h1_min_mode_picks_third_mode() {
        let m = gl(100, BackendKind::Spectral);
        let g = *m.grid();
        let r = min_mode(&m, &Field::zeros(g), &MinModeOptions::with_metric(Metric::HMinus1)).unwrap();
        let q2 = 36.0 * PI * PI;
        let expect = q2 * (KAPPA * KAPPA * q2 - 1.0);
        assert!((r.eigenvalue - expect).abs() < 1e-6, "{} vs {expect}", r.eigenvalue);
        assert!((r.eigenvalue + 153.318).abs() < 1e-3);
        let norm = m.ops().inner_hminus1(&r.eigenvector, &r.eigenvector).unwrap();
        assert!((norm - 1.0).abs() < 1e-12);
        let s = Field::from_fn(g, |x, _| (6.0 * PI * x).sin());
        let c = Field::from_fn(g, |x, _| (6.0 * PI * x).cos());
        assert!(principal_angle(&r.eigenvector, &[s, c]) < 1e-5);
    }

    #[test]
    fn uniform_metastable_state_has_positive_min_mode() {
        let m = gl(100, BackendKind::Spectral);
        let phi = Field::constant(*m.grid(), 0.6);
        let r = min_mode(&m, &phi, &MinModeOptions::default()).unwrap();
        let expect = KAPPA * KAPPA * 4.0 * PI * PI + 0.08;
        assert!((r.eigenvalue - expect).abs() < 1e-9);
        assert!((r.eigenvalue - 0.143166).abs() < 1e-6);
    }

    #[test]
    fn rayleigh_history_is_monotone() {
        let m = LandauBrazovskii::standard(16, Default::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let phi = Field::random_normal(*m.grid(), &mut rng).scaled(0.3);
        for metric in [Metric::ProjectedL2, Metric::HMinus1] {
            let r = min_mode(&m, &phi, &MinModeOptions::with_metric(metric)).unwrap();
            for w in r.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{metric}: {w:?}");
            }
            let rq = rayleigh_quotient(&m, &phi, &r.eigenvector, metric).unwrap();
            assert!((rq - r.eigenvalue).abs() <= 1e-10 * r.eigenvalue.abs().max(1.0));
        }
    }

    #[test]
    fn dense_oracle_mode_one_matches_stencil() {
        let m = gl(32, BackendKind::FiniteDifference);
        let spec = dense_oracle(&m, &Field::zeros(*m.grid()), Metric::ProjectedL2).unwrap();
        let h = 1.0 / 32.0;
        let fd1 = (2.0 - 2.0 * (2.0 * PI / 32.0).cos()) / (h * h);
        assert!((spec.eigenvalues[0] - (KAPPA * KAPPA * fd1 - 1.0)).abs() < 1e-12);
        assert_eq!(spec.eigenvalues.len(), 31);
        // sin/cos pairs at a constant state
        assert!((spec.eigenvalues[0] - spec.eigenvalues[1]).abs() < 1e-12);
        assert!((spec.eigenvalues[2] - spec.eigenvalues[3]).abs() < 1e-12);
        assert_eq!(spec.smallest_eigenspace(1e-8).len(), 2);
    }

    #[test]
    fn dense_oracle_rejects_large_grids() {
        let m = gl(100, BackendKind::FiniteDifference);
        assert!(dense_oracle(&m, &Field::zeros(*m.grid()), Metric::ProjectedL2).is_err());
    }

    #[test]
    fn deflation_finds_second_shell() {
        let m = gl(32, BackendKind::FiniteDifference);
        let phi = Field::zeros(*m.grid());
        let spec = dense_oracle(&m, &phi, Metric::ProjectedL2).unwrap();
        let modes = lowest_modes(&m, &phi, 3, &MinModeOptions::default()).unwrap();
        for (r, want) in modes.iter().zip(&spec.eigenvalues) {
            assert!((r.eigenvalue - want).abs() < 1e-8);
        }
    }

    #[test]
    fn warm_start_at_an_eigenvector_returns_immediately() {
        let m = gl(64, BackendKind::Spectral);
        let phi = Field::zeros(*m.grid());
        let first = min_mode(&m, &phi, &MinModeOptions::default()).unwrap();
        let again = min_mode_from(&m, &phi, Some(&first.eigenvector), &[], &MinModeOptions::default()).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn non_convergence_carries_best_iterate() {
        let m = LandauBrazovskii::standard(16, Default::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let phi = Field::random_normal(*m.grid(), &mut rng);
        let opts = MinModeOptions { max_iterations: 1, tolerance: 1e-14, ..Default::default() };
        match min_mode(&m, &phi, &opts) {
            Err(Error::MinModeNotConverged(best)) => {
                assert!(best.residual.is_finite());
                assert!(best.eigenvector.mean().abs() < 1e-12);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn principal_angle_resolves_tiny_angles() {
        let g = Grid::new_1d(16, 1.0).unwrap();
        let c = Field::from_fn(g, |x, _| (2.0 * PI * x).cos());
        let s = Field::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let c2 = Field::from_fn(g, |x, _| (4.0 * PI * x).cos());
        let t: f64 = 1e-9;
        let v = c.lincomb(t.cos(), &c2, t.sin()).unwrap();
        assert!((principal_angle(&v, &[c.clone(), s]) - t).abs() < 1e-15);
        assert!((principal_angle(&c, &[c2]) - PI / 2.0).abs() < 1e-12);
    }
}
