//! Translation step: gradient flow of the auxiliary functional
//! `L(φ) = (1−α)F(φ) + αF(φ − ⟨v,φ−φₖ⟩v) − βF(φₖ + ⟨v,φ−φₖ⟩v)`.
//!
//! The steppers fix (α, β) = (0, 2) and solve their implicit part on the
//! zero-mean subspace, so the mean of φ never changes.

use rustfft::num_complex::Complex64;

use crate::energy::{EnergyModel, GinzburgLandau};
use crate::error::{Error, Result};
use crate::grid::{inner_l2_unchecked, Field};
use crate::operators::project_in_place;

/// Rank-one update denominators below this are a breakdown.
pub const RANK_ONE_BREAKDOWN: f64 = 1e-14;

const UNIT_TOL: f64 = 1e-8;

fn check_direction(model: &dyn EnergyModel, v: &Field, h1: bool) -> Result<()> {
    model.check_grid(v)?;
    model.ops().check_zero_mean(v, "direction v")?;
    let norm = if h1 { model.ops().inner_hminus1(v, v)?.sqrt() } else { v.norm_l2() };
    if (norm - 1.0).abs() > UNIT_TOL {
        let which = if h1 { "H⁻¹" } else { "L²" };
        return Err(Error::Precondition(format!("direction v must be {which}-unit, has norm {norm}")));
    }
    Ok(())
}

fn check_states(model: &dyn EnergyModel, phi: &Field, phi_k: &Field) -> Result<()> {
    model.check_grid(phi)?;
    model.check_grid(phi_k)?;
    if !phi.is_finite() || !phi_k.is_finite() {
        return Err(Error::NonFinite("translation state"));
    }
    Ok(())
}

/// `−P δL/δφ` for general (α, β); `v` must be zero-mean and L²-unit.
pub fn auxiliary_gradient(
    model: &dyn EnergyModel,
    phi: &Field,
    phi_k: &Field,
    v: &Field,
    alpha: f64,
    beta: f64,
) -> Result<Field> {
    check_states(model, phi, phi_k)?;
    check_direction(model, v, false)?;
    let c = inner_l2_unchecked(v, &phi.lincomb_unchecked(1.0, phi_k, -1.0));
    let hat = phi_k.lincomb_unchecked(1.0, v, c);
    let g_hat = model.gradient_unchecked(&hat);

    let mut dl = model.gradient_unchecked(phi).scaled(1.0 - alpha);
    let mut along_v = -beta * inner_l2_unchecked(v, &g_hat);
    if alpha != 0.0 {
        let check = phi.lincomb_unchecked(1.0, v, -c);
        let g_check = model.gradient_unchecked(&check);
        dl.axpy_unchecked(alpha, &g_check);
        along_v -= alpha * inner_l2_unchecked(v, &g_check);
    }
    dl.axpy_unchecked(along_v, v);
    project_in_place(&mut dl);
    Ok(dl.scaled(-1.0))
}

/// Value of the auxiliary functional `L(φ; φₖ, v)`.
pub fn auxiliary_functional(
    model: &dyn EnergyModel,
    phi: &Field,
    phi_k: &Field,
    v: &Field,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_states(model, phi, phi_k)?;
    model.check_grid(v)?;
    let c = inner_l2_unchecked(v, &phi.lincomb_unchecked(1.0, phi_k, -1.0));
    let hat = phi_k.lincomb_unchecked(1.0, v, c);
    let mut value = (1.0 - alpha) * model.energy(phi)? - beta * model.energy(&hat)?;
    if alpha != 0.0 {
        value += alpha * model.energy(&phi.lincomb_unchecked(1.0, v, -c))?;
    }
    Ok(value)
}

/// One step of the 1D Ginzburg–Landau convex-splitting scheme
///
/// ```text
/// (φⁿ⁺¹ − φⁿ)/dt = P[κ²Δφ − 2φ − 2⟨v,φ⟩v]ⁿ⁺¹ + P[−φ³ + 3φ + 2⟨v, −κ²Δφ̂ + φ̂³⟩v]ⁿ
/// ```
///
/// with `φ̂ = φₖ + ⟨v, φⁿ − φₖ⟩v`. The implicit operator is diagonal in the
/// backend eigenbasis apart from the rank-one term, which is handled by the
/// Sherman–Morrison formula.
pub fn translation_step_convex_split(
    model: &GinzburgLandau,
    phi_n: &Field,
    phi_k: &Field,
    v: &Field,
    dt: f64,
) -> Result<Field> {
    check_states(model, phi_n, phi_k)?;
    check_direction(model, v, false)?;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let ops = model.ops();
    let k2 = model.params().kappa.powi(2);
    let inv: Vec<f64> = ops
        .neg_laplacian_symbol()
        .iter()
        .enumerate()
        .map(|(i, &l)| if i == 0 { 0.0 } else { 1.0 / (1.0 / dt + k2 * l + 2.0) })
        .collect();

    let c = inner_l2_unchecked(v, &phi_n.lincomb_unchecked(1.0, phi_k, -1.0));
    let hat = phi_k.lincomb_unchecked(1.0, v, c);
    let lap_hat = ops.laplacian_unchecked(&hat);
    let w = lap_hat.lincomb_unchecked(-k2, &hat.map(|s| s * s * s), 1.0);
    let coef = 2.0 * inner_l2_unchecked(v, &w);

    let mut rhs = phi_n.map(|s| s / dt - s * s * s + 3.0 * s);
    rhs.axpy_unchecked(coef, v);
    let y = ops.apply_symbol(&rhs, &inv);
    let z = ops.apply_symbol(v, &inv);
    let denom = 1.0 + 2.0 * inner_l2_unchecked(v, &z);
    if denom.abs() < RANK_ONE_BREAKDOWN {
        return Err(Error::Breakdown(format!("rank-one denominator {denom:e}")));
    }
    let u = y.lincomb_unchecked(1.0, &z, -2.0 * inner_l2_unchecked(v, &y) / denom);
    Ok(u.map(|s| s + phi_n.mean()))
}

/// One IMEX step of the projected translation flow for any model:
///
/// ```text
/// (φⁿ⁺¹ − φⁿ)/dt = −P(𝒜 + a)φⁿ⁺¹ − 2b⟨v,φⁿ⁺¹⟩v
///                 + P(aφⁿ − f′(φⁿ)) + 2⟨v, δF(φ̂ⁿ) + bφ̂ⁿ⟩v
/// ```
///
/// where `𝒜` is the model's linear operator, `a` the stabilization and `b`
/// the implicit rank-one weight. For Ginzburg–Landau with `a = 2, b = 1`
/// this is exactly the convex-splitting scheme.
pub fn translation_step_imex(
    model: &dyn EnergyModel,
    phi_n: &Field,
    phi_k: &Field,
    v: &Field,
    dt: f64,
    a: f64,
    b: f64,
) -> Result<Field> {
    check_states(model, phi_n, phi_k)?;
    check_direction(model, v, false)?;
    ProjectedStepper::new(model, phi_k, v, dt, a, b)?.step(phi_n)
}

/// One IMEX step of the direct H⁻¹ translation flow
///
/// ```text
/// φₜ = Δ δF(φ) + 2⟨δF(φ̂), v⟩ v,   φ̂ = φₖ + ⟨v, φ − φₖ⟩_{H⁻¹} v
/// ```
///
/// with `(−Δ)(𝒜 + a)` implicit and `Δ(f′(φ) − aφ)` and the rank-one term
/// explicit. `v` must be H⁻¹-unit.
pub fn translation_step_hminus1(
    model: &dyn EnergyModel,
    phi_n: &Field,
    phi_k: &Field,
    v: &Field,
    dt: f64,
    a: f64,
) -> Result<Field> {
    check_states(model, phi_n, phi_k)?;
    check_direction(model, v, true)?;
    HMinus1Stepper::new(model, phi_k, v, dt, a)?.step(phi_n)
}

fn check_step_params(dt: f64, a: f64, b: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if !(a.is_finite() && a >= 0.0 && b.is_finite() && b >= 0.0) {
        return Err(Error::Config(format!("stabilization shifts must be non-negative, got {a} and {b}")));
    }
    Ok(())
}

/// Cached implicit solve for [`translation_step_imex`] at fixed (φₖ, v).
pub(crate) struct ProjectedStepper<'a> {
    model: &'a dyn EnergyModel,
    phi_k: &'a Field,
    v: &'a Field,
    dt: f64,
    a: f64,
    b: f64,
    inv: Vec<f64>,
    inv_v: Field,
    denom: f64,
}

impl<'a> ProjectedStepper<'a> {
    pub(crate) fn new(
        model: &'a dyn EnergyModel,
        phi_k: &'a Field,
        v: &'a Field,
        dt: f64,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        check_step_params(dt, a, b)?;
        let inv: Vec<f64> = model
            .linear_symbol()
            .iter()
            .enumerate()
            .map(|(i, &s)| if i == 0 { 0.0 } else { 1.0 / (1.0 / dt + s + a) })
            .collect();
        let inv_v = model.ops().apply_symbol(v, &inv);
        let denom = 1.0 + 2.0 * b * inner_l2_unchecked(v, &inv_v);
        if denom.abs() < RANK_ONE_BREAKDOWN {
            return Err(Error::Breakdown(format!("rank-one denominator {denom:e}")));
        }
        Ok(ProjectedStepper { model, phi_k, v, dt, a, b, inv, inv_v, denom })
    }

    pub(crate) fn step(&self, phi_n: &Field) -> Result<Field> {
        let (model, v) = (self.model, self.v);
        let c = inner_l2_unchecked(v, &phi_n.lincomb_unchecked(1.0, self.phi_k, -1.0));
        let hat = self.phi_k.lincomb_unchecked(1.0, v, c);
        let g_hat = model.gradient_unchecked(&hat);
        let coef = 2.0 * (inner_l2_unchecked(v, &g_hat) + self.b * inner_l2_unchecked(v, &hat));

        let (dt, a) = (self.dt, self.a);
        let mut rhs = phi_n.map(|s| s / dt + a * s - model.potential_d1(s));
        rhs.axpy_unchecked(coef, v);
        let mut u = model.ops().apply_symbol(&rhs, &self.inv);
        if self.b != 0.0 {
            let w = -2.0 * self.b * inner_l2_unchecked(v, &u) / self.denom;
            u.axpy_unchecked(w, &self.inv_v);
        }
        let mean = phi_n.mean();
        let out = u.map(|s| s + mean);
        if !out.is_finite() {
            return Err(Error::NonFinite("translation step"));
        }
        Ok(out)
    }
}

/// Cached implicit solve for [`translation_step_hminus1`] at fixed (φₖ, v).
pub(crate) struct HMinus1Stepper<'a> {
    model: &'a dyn EnergyModel,
    phi_k: &'a Field,
    v: &'a Field,
    dt: f64,
    a: f64,
    inv: Vec<f64>,
    v_hat: Vec<Complex64>,
}

impl<'a> HMinus1Stepper<'a> {
    pub(crate) fn new(model: &'a dyn EnergyModel, phi_k: &'a Field, v: &'a Field, dt: f64, a: f64) -> Result<Self> {
        check_step_params(dt, a, 0.0)?;
        let l = model.ops().neg_laplacian_symbol();
        let inv = l
            .iter()
            .zip(model.linear_symbol())
            .enumerate()
            .map(|(i, (&l, &s))| if i == 0 { 0.0 } else { 1.0 / (1.0 / dt + l * (s + a)) })
            .collect();
        let v_hat = model.ops().forward(v.values());
        Ok(HMinus1Stepper { model, phi_k, v, dt, a, inv, v_hat })
    }

    pub(crate) fn step(&self, phi_n: &Field) -> Result<Field> {
        let (model, v) = (self.model, self.v);
        let ops = model.ops();
        let mut d = phi_n.lincomb_unchecked(1.0, self.phi_k, -1.0);
        project_in_place(&mut d);
        let c = inner_l2_unchecked(&ops.inverse_neg_laplacian_unchecked(&d), v);
        let hat = self.phi_k.lincomb_unchecked(1.0, v, c);
        let coef = 2.0 * inner_l2_unchecked(&model.gradient_unchecked(&hat), v);

        let a = self.a;
        let nonlinear: Vec<f64> = phi_n.values().iter().map(|&s| model.potential_d1(s) - a * s).collect();
        let p_hat = ops.forward(phi_n.values());
        let n_hat = ops.forward(&nonlinear);
        let l = ops.neg_laplacian_symbol();
        let rate = 1.0 / self.dt;
        let u_hat: Vec<Complex64> = (0..p_hat.len())
            .map(|k| (p_hat[k] * rate - n_hat[k] * l[k] + self.v_hat[k] * coef) * self.inv[k])
            .collect();
        let mean = phi_n.mean();
        let out: Vec<f64> = ops.inverse(u_hat).into_iter().map(|s| s + mean).collect();
        let out = Field::from_raw(*phi_n.grid(), out);
        if !out.is_finite() {
            return Err(Error::NonFinite("translation step"));
        }
        Ok(out)
    }
}
