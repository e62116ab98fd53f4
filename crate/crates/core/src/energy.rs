//! Phase-field energy functionals.
//!
//! Both models split as `F(φ) = ½⟨Aφ, φ⟩ + ∫ f(φ)` where `A` is a
//! translation-invariant linear operator (diagonal in Fourier space) and `f`
//! a pointwise polynomial. The first variation is `Aφ + f′(φ)` and the
//! Hessian `A + f″(φ)`. The implicit time steppers in [`crate::saddle`] rely
//! on the same split.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{inner_l2_unchecked, integrate, Field, Grid};
use crate::operators::{BackendKind, Operators};

pub trait EnergyModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn ops(&self) -> &Operators;

    fn grid(&self) -> &Grid {
        self.ops().grid()
    }

    /// Fourier multiplier of the linear part `A`, in FFT slot order.
    fn linear_symbol(&self) -> &[f64];

    /// `Aφ` without a grid check.
    fn apply_linear(&self, phi: &Field) -> Field;

    /// Pointwise potential `f` and its first three derivatives.
    fn potential(&self, s: f64) -> f64;
    fn potential_d1(&self, s: f64) -> f64;
    fn potential_d2(&self, s: f64) -> f64;
    fn potential_d3(&self, s: f64) -> f64;

    /// Shift added to `A` in the implicit part of the time steppers.
    fn default_stabilization(&self) -> f64;

    /// Weight of the implicit rank-one term in the translation steppers: the
    /// concave linear part of `f′`, i.e. `max(0, −f″(0))`.
    fn default_rank_one_shift(&self) -> f64 {
        (-self.potential_d2(0.0)).max(0.0)
    }

    fn as_ginzburg_landau(&self) -> Option<&GinzburgLandau> {
        None
    }

    fn check_grid(&self, f: &Field) -> Result<()> {
        if f.grid() == self.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn energy(&self, phi: &Field) -> Result<f64> {
        self.check_grid(phi)?;
        let quadratic = 0.5 * inner_l2_unchecked(&self.apply_linear(phi), phi);
        Ok(quadratic + integrate(&phi.map(|s| self.potential(s))))
    }

    /// First variation δF/δφ in L²; no projection applied.
    fn gradient_l2(&self, phi: &Field) -> Result<Field> {
        self.check_grid(phi)?;
        Ok(self.gradient_unchecked(phi))
    }

    fn gradient_unchecked(&self, phi: &Field) -> Field {
        let mut g = self.apply_linear(phi);
        for (out, &s) in g.values_mut().iter_mut().zip(phi.values()) {
            *out += self.potential_d1(s);
        }
        g
    }

    /// `H(φ)v = Av + f″(φ)v`.
    fn hessian_apply(&self, phi: &Field, v: &Field) -> Result<Field> {
        self.check_grid(phi)?;
        self.check_grid(v)?;
        Ok(self.hessian_unchecked(phi, v))
    }

    fn hessian_unchecked(&self, phi: &Field, v: &Field) -> Field {
        let mut hv = self.apply_linear(v);
        for ((out, &s), &x) in hv.values_mut().iter_mut().zip(phi.values()).zip(v.values()) {
            *out += self.potential_d2(s) * x;
        }
        hv
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GinzburgLandauParams {
    pub kappa: f64,
    /// Conserved mean value of φ; enters only through initial data.
    pub mass: f64,
}

impl Default for GinzburgLandauParams {
    fn default() -> Self {
        GinzburgLandauParams { kappa: 0.04, mass: 0.6 }
    }
}

/// `∫ κ²|∇φ|²/2 + (φ² − 1)²/4`.
#[derive(Debug, Clone)]
pub struct GinzburgLandau {
    params: GinzburgLandauParams,
    ops: Operators,
    symbol: Vec<f64>,
}

impl GinzburgLandau {
    pub fn new(grid: Grid, backend: BackendKind, params: GinzburgLandauParams) -> Result<Self> {
        if !(params.kappa.is_finite() && params.kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be positive, got {}", params.kappa)));
        }
        let ops = Operators::new(grid, backend);
        let k2 = params.kappa * params.kappa;
        let symbol = ops.neg_laplacian_symbol().iter().map(|&l| k2 * l).collect();
        Ok(GinzburgLandau { params, ops, symbol })
    }

    pub fn params(&self) -> &GinzburgLandauParams {
        &self.params
    }
}

impl EnergyModel for GinzburgLandau {
    fn name(&self) -> &'static str {
        "ginzburg-landau"
    }

    fn ops(&self) -> &Operators {
        &self.ops
    }

    fn linear_symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn apply_linear(&self, phi: &Field) -> Field {
        let k2 = self.params.kappa * self.params.kappa;
        let mut out = self.ops.laplacian_unchecked(phi);
        for v in out.values_mut() {
            *v *= -k2;
        }
        out
    }

    fn potential(&self, s: f64) -> f64 {
        let w = s * s - 1.0;
        0.25 * w * w
    }

    fn potential_d1(&self, s: f64) -> f64 {
        s * s * s - s
    }

    fn potential_d2(&self, s: f64) -> f64 {
        3.0 * s * s - 1.0
    }

    fn potential_d3(&self, s: f64) -> f64 {
        6.0 * s
    }

    /// Dominates `f″ = 3φ² − 1` on `|φ| ≤ 1`.
    fn default_stabilization(&self) -> f64 {
        2.0
    }

    fn as_ginzburg_landau(&self) -> Option<&GinzburgLandau> {
        Some(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandauBrazovskiiParams {
    pub tau: f64,
    pub xi: f64,
    /// Cubic coefficient of the bulk potential.
    pub gamma: f64,
    pub mass: f64,
}

impl Default for LandauBrazovskiiParams {
    fn default() -> Self {
        LandauBrazovskiiParams { tau: -0.15, xi: 1.0, gamma: 0.25, mass: 0.0 }
    }
}

/// `∫ ξ²[(Δ + 1)φ]²/2 + τφ²/2 − γφ³/6 + φ⁴/24`.
#[derive(Debug, Clone)]
pub struct LandauBrazovskii {
    params: LandauBrazovskiiParams,
    ops: Operators,
    symbol: Vec<f64>,
}

impl LandauBrazovskii {
    pub fn new(grid: Grid, backend: BackendKind, params: LandauBrazovskiiParams) -> Result<Self> {
        if !(params.xi.is_finite() && params.xi > 0.0) {
            return Err(Error::Config(format!("xi must be positive, got {}", params.xi)));
        }
        if backend == BackendKind::FiniteDifference && grid.ndim() == 2 {
            return Err(Error::UnsupportedBackend(
                "Landau-Brazovskii in 2D requires the spectral backend".into(),
            ));
        }
        let ops = Operators::new(grid, backend);
        let x2 = params.xi * params.xi;
        let symbol =
            ops.neg_laplacian_symbol().iter().map(|&l| x2 * (1.0 - l) * (1.0 - l)).collect();
        Ok(LandauBrazovskii { params, ops, symbol })
    }

    /// The paper-sized setup: Ω = [0, 16π/√3] × [0, 8π] on an `n × n` grid.
    pub fn standard(n: usize, params: LandauBrazovskiiParams) -> Result<Self> {
        let pi = std::f64::consts::PI;
        let grid = Grid::new_2d(n, n, 16.0 * pi / 3f64.sqrt(), 8.0 * pi)?;
        Self::new(grid, BackendKind::Spectral, params)
    }

    pub fn params(&self) -> &LandauBrazovskiiParams {
        &self.params
    }
}

impl EnergyModel for LandauBrazovskii {
    fn name(&self) -> &'static str {
        "landau-brazovskii"
    }

    fn ops(&self) -> &Operators {
        &self.ops
    }

    fn linear_symbol(&self) -> &[f64] {
        &self.symbol
    }

    fn apply_linear(&self, phi: &Field) -> Field {
        self.ops.apply_symbol(phi, &self.symbol)
    }

    fn potential(&self, s: f64) -> f64 {
        let p = &self.params;
        0.5 * p.tau * s * s - p.gamma / 6.0 * s * s * s + s * s * s * s / 24.0
    }

    fn potential_d1(&self, s: f64) -> f64 {
        let p = &self.params;
        p.tau * s - 0.5 * p.gamma * s * s + s * s * s / 6.0
    }

    fn potential_d2(&self, s: f64) -> f64 {
        let p = &self.params;
        p.tau - p.gamma * s + 0.5 * s * s
    }

    fn potential_d3(&self, s: f64) -> f64 {
        -self.params.gamma + s
    }

    fn default_stabilization(&self) -> f64 {
        1.0
    }
}
