//! Periodic differential operators, the mass projection, and the H⁻¹ metric.
//!
//! Every operator here is diagonal in the discrete Fourier basis. The
//! spectral backend uses the exact multipliers `|q|²` with `q = 2πk/L`; the
//! finite-difference backend uses the eigenvalues of the centered second
//! difference, `(2 − 2cos(2πk/n))/h²` per axis. Forward transforms are
//! unnormalized and the inverse divides by the number of points.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{inner_l2_unchecked, integrate, Field, Grid};

/// Relative tolerance for the zero-mean precondition of the H⁻¹ machinery.
pub const ZERO_MEAN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    FiniteDifference,
    Spectral,
}

impl BackendKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BackendKind::FiniteDifference => "finite-difference",
            BackendKind::Spectral => "spectral",
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finite-difference" | "fd" => Ok(BackendKind::FiniteDifference),
            "spectral" | "fft" => Ok(BackendKind::Spectral),
            other => Err(Error::Config(format!("unknown backend {other:?}"))),
        }
    }
}

type Plan = Arc<dyn Fft<f64>>;

/// Complex FFT plans for one grid, applied axis by axis.
#[derive(Clone)]
struct FftPlans {
    nx: usize,
    ny: usize,
    fwd_x: Plan,
    inv_x: Plan,
    /// Forward and inverse plans along y.
    fwd_y: Option<(Plan, Plan)>,
    scratch_len: usize,
}

impl FftPlans {
    fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(grid.nx());
        let inv_x = planner.plan_fft_inverse(grid.nx());
        let fwd_y = (grid.ndim() == 2)
            .then(|| (planner.plan_fft_forward(grid.ny()), planner.plan_fft_inverse(grid.ny())));
        let mut scratch_len =
            fwd_x.get_inplace_scratch_len().max(inv_x.get_inplace_scratch_len());
        if let Some((f, i)) = &fwd_y {
            scratch_len =
                scratch_len.max(f.get_inplace_scratch_len()).max(i.get_inplace_scratch_len());
        }
        FftPlans { nx: grid.nx(), ny: grid.ny(), fwd_x, inv_x, fwd_y, scratch_len }
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let mut scratch = vec![Complex64::default(); self.scratch_len];
        let px = if inverse { &self.inv_x } else { &self.fwd_x };
        for row in data.chunks_exact_mut(self.nx) {
            px.process_with_scratch(row, &mut scratch);
        }
        if let Some((fy, iy)) = &self.fwd_y {
            let py = if inverse { iy } else { fy };
            let mut column = vec![Complex64::default(); self.ny];
            for i in 0..self.nx {
                for (j, c) in column.iter_mut().enumerate() {
                    *c = data[j * self.nx + i];
                }
                py.process_with_scratch(&mut column, &mut scratch);
                for (j, c) in column.iter().enumerate() {
                    data[j * self.nx + i] = *c;
                }
            }
        }
    }
}

/// Signed integer wavenumber for FFT slot `i` of an `n`-point transform.
fn signed_mode(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Operator backend bound to one grid: FFT plans plus per-mode multipliers.
#[derive(Clone)]
pub struct Operators {
    grid: Grid,
    kind: BackendKind,
    fft: FftPlans,
    /// Multiplier of −Δ for this backend, in FFT slot order.
    neg_lap: Vec<f64>,
    /// Exact `|q|²`, independent of backend.
    wavenumber_sq: Vec<f64>,
    /// Spectral derivative multipliers `q_x`, `q_y` (Nyquist zeroed).
    derivative_q: [Vec<f64>; 2],
}

impl fmt::Debug for Operators {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operators").field("grid", &self.grid).field("kind", &self.kind).finish()
    }
}

impl Operators {
    pub fn new(grid: Grid, kind: BackendKind) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut neg_lap = vec![0.0; grid.len()];
        let mut wavenumber_sq = vec![0.0; grid.len()];
        let mut dqx = vec![0.0; grid.len()];
        let mut dqy = vec![0.0; grid.len()];
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                let mut fd = 0.0;
                let mut q2 = 0.0;
                for (axis, (slot, n)) in [(i, nx), (j, ny)].into_iter().enumerate() {
                    if axis >= grid.ndim() {
                        continue;
                    }
                    let k = signed_mode(slot, n);
                    let q = 2.0 * std::f64::consts::PI * k / grid.lengths()[axis];
                    let h = grid.spacing(axis);
                    q2 += q * q;
                    fd += (2.0 - 2.0 * (2.0 * std::f64::consts::PI * k / n as f64).cos()) / (h * h);
                    let dq = if slot == n / 2 { 0.0 } else { q };
                    if axis == 0 {
                        dqx[idx] = dq;
                    } else {
                        dqy[idx] = dq;
                    }
                }
                wavenumber_sq[idx] = q2;
                neg_lap[idx] = match kind {
                    BackendKind::Spectral => q2,
                    BackendKind::FiniteDifference => fd,
                };
            }
        }
        neg_lap[0] = 0.0;
        Operators {
            grid,
            kind,
            fft: FftPlans::new(&grid),
            neg_lap,
            wavenumber_sq,
            derivative_q: [dqx, dqy],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    /// Per-mode multiplier of −Δ for this backend; exactly 0 at the zero mode.
    pub fn neg_laplacian_symbol(&self) -> &[f64] {
        &self.neg_lap
    }

    /// Exact `|q|²` per mode, whatever the backend.
    pub fn wavenumber_sq(&self) -> &[f64] {
        &self.wavenumber_sq
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft.transform(&mut data, false);
        data
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.fft.transform(&mut data, true);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    /// Applies the Fourier multiplier `symbol` (FFT slot order) to `f`.
    pub fn apply_symbol(&self, f: &Field, symbol: &[f64]) -> Field {
        debug_assert_eq!(symbol.len(), self.grid.len());
        let mut coeffs = self.forward(f.values());
        for (c, &s) in coeffs.iter_mut().zip(symbol) {
            *c *= s;
        }
        Field::from_raw(self.grid, self.inverse(coeffs))
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if *f.grid() == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Δf with periodic boundary conditions.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        Ok(self.laplacian_unchecked(f))
    }

    pub(crate) fn laplacian_unchecked(&self, f: &Field) -> Field {
        match self.kind {
            BackendKind::Spectral => {
                let mut coeffs = self.forward(f.values());
                for (c, &s) in coeffs.iter_mut().zip(&self.neg_lap) {
                    *c *= -s;
                }
                Field::from_raw(self.grid, self.inverse(coeffs))
            }
            BackendKind::FiniteDifference => self.stencil_laplacian(f),
        }
    }

    fn stencil_laplacian(&self, f: &Field) -> Field {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let v = f.values();
        let cx = 1.0 / (self.grid.spacing(0) * self.grid.spacing(0));
        let mut out = vec![0.0; v.len()];
        for j in 0..ny {
            let row = &v[j * nx..(j + 1) * nx];
            let dst = &mut out[j * nx..(j + 1) * nx];
            for i in 0..nx {
                let left = row[(i + nx - 1) % nx];
                let right = row[(i + 1) % nx];
                dst[i] = cx * (left - 2.0 * row[i] + right);
            }
        }
        if self.grid.ndim() == 2 {
            let cy = 1.0 / (self.grid.spacing(1) * self.grid.spacing(1));
            for j in 0..ny {
                let down = ((j + ny - 1) % ny) * nx;
                let up = ((j + 1) % ny) * nx;
                for i in 0..nx {
                    let c = j * nx + i;
                    out[c] += cy * (v[down + i] - 2.0 * v[c] + v[up + i]);
                }
            }
        }
        Field::from_raw(self.grid, out)
    }

    /// (Δ + 1)²f. Spectral in 2D; in 1D the finite-difference backend uses its
    /// own −Δ multiplier.
    pub fn biharmonic_shifted(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        if self.kind == BackendKind::FiniteDifference && self.grid.ndim() == 2 {
            return Err(Error::UnsupportedBackend(
                "(Δ+1)² in 2D requires the spectral backend".into(),
            ));
        }
        let symbol: Vec<f64> = self.neg_lap.iter().map(|&l| (1.0 - l) * (1.0 - l)).collect();
        Ok(self.apply_symbol(f, &symbol))
    }

    /// Errors unless `|∫f| ≤ tol·√|Ω|·‖f‖`, i.e. unless `f` is orthogonal to
    /// constants up to a relative cosine of `ZERO_MEAN_TOL`.
    pub fn check_zero_mean(&self, f: &Field, what: &str) -> Result<()> {
        let bound = ZERO_MEAN_TOL * self.grid.volume().sqrt() * f.norm_l2();
        let total = integrate(f);
        if total.abs() <= bound {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "{what} must have zero mean (∫ = {total:.3e}, allowed {bound:.3e})"
            )))
        }
    }

    /// The zero-mean solution `g` of `−Δg = f` for zero-mean `f`.
    pub fn inverse_neg_laplacian(&self, f: &Field) -> Result<Field> {
        self.check_grid(f)?;
        self.check_zero_mean(f, "input to (−Δ)⁻¹")?;
        Ok(self.inverse_neg_laplacian_unchecked(f))
    }

    pub(crate) fn inverse_neg_laplacian_unchecked(&self, f: &Field) -> Field {
        let mut coeffs = self.forward(f.values());
        coeffs[0] = Complex64::default();
        for (c, &s) in coeffs.iter_mut().zip(&self.neg_lap).skip(1) {
            *c /= s;
        }
        Field::from_raw(self.grid, self.inverse(coeffs))
    }

    /// ⟨f, g⟩_{H⁻¹} = ⟨(−Δ)⁻¹f, g⟩_{L²} for zero-mean `f`, `g`.
    pub fn inner_hminus1(&self, f: &Field, g: &Field) -> Result<f64> {
        self.check_grid(f)?;
        self.check_grid(g)?;
        self.check_zero_mean(f, "first H⁻¹ argument")?;
        self.check_zero_mean(g, "second H⁻¹ argument")?;
        Ok(inner_l2_unchecked(&self.inverse_neg_laplacian_unchecked(f), g))
    }

    /// Spectral derivative along `axis` (0 = x, 1 = y); the Nyquist mode is
    /// dropped so the result is real.
    pub fn derivative(&self, f: &Field, axis: usize) -> Result<Field> {
        self.check_grid(f)?;
        if axis >= self.grid.ndim() {
            return Err(Error::Precondition(format!("axis {axis} out of range")));
        }
        let mut coeffs = self.forward(f.values());
        for (c, &q) in coeffs.iter_mut().zip(&self.derivative_q[axis]) {
            *c *= Complex64::new(0.0, q);
        }
        Ok(Field::from_raw(self.grid, self.inverse(coeffs)))
    }
}

/// Orthogonal projection onto zero-mean fields: `f − mean(f)`.
pub fn project(f: &Field) -> Field {
    let mean = f.mean();
    f.map(|v| v - mean)
}

pub(crate) fn project_in_place(f: &mut Field) {
    let mean = f.mean();
    for v in f.values_mut() {
        *v -= mean;
    }
}
