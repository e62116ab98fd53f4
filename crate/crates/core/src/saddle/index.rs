//! Index-1 check from the two smallest eigenvalues of `PHP`.
//!
//! On the torus every non-uniform critical point has neutral translation
//! modes `∂ₓφ`, `∂ᵧφ` with eigenvalue ≈ 0. They are symmetries of the
//! energy, not unstable directions, so a deflated eigenvector that lies in
//! their span is recorded separately and skipped.

use crate::energy::EnergyModel;
use crate::error::Result;
use crate::grid::{dot, Field};
use crate::minmode::{min_mode_from, principal_angle, MinModeOptions};
use crate::operators::project;

/// |λ₂ − λ₁| at or below this is reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Minimum cosine between an eigenvector and the translation generators for
/// the mode to count as neutral.
const SYMMETRY_OVERLAP: f64 = 0.99;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexReport {
    /// Smallest eigenvalue excluding translation modes.
    pub lambda1: f64,
    /// Next eigenvalue excluding translation modes.
    pub lambda2: f64,
    pub is_index1: bool,
    pub degenerate: bool,
    /// Eigenvalues of the skipped translation modes.
    pub translation_modes: Vec<f64>,
    /// ‖PδF(φ)‖_{L²}.
    pub residual: f64,
    pub mean: f64,
}

pub fn verify_index1(model: &dyn EnergyModel, phi: &Field, opts: &MinModeOptions) -> Result<IndexReport> {
    model.check_grid(phi)?;
    let opts = MinModeOptions { metric: crate::minmode::Metric::ProjectedL2, ..*opts };
    let residual = project(&model.gradient_unchecked(phi)).norm_l2();

    let generators = translation_generators(model, phi)?;

    // Deflate one eigenpair at a time until two non-neutral ones are found.
    let mut locked: Vec<Field> = Vec::new();
    let mut translation_modes = Vec::new();
    let mut found: Vec<f64> = Vec::with_capacity(2);
    for k in 0..generators.len() + 2 {
        let o = MinModeOptions { seed: opts.seed.wrapping_add(k as u64), ..opts };
        let r = min_mode_from(model, phi, None, &locked, &o)?;
        let neutral = translation_modes.len() < generators.len()
            && principal_angle(&r.eigenvector, &generators).cos() >= SYMMETRY_OVERLAP;
        if neutral {
            translation_modes.push(r.eigenvalue);
        } else {
            found.push(r.eigenvalue);
            if found.len() == 2 {
                break;
            }
        }
        locked.push(r.eigenvector);
    }
    let (lambda1, lambda2) = (found[0], found[1]);
    Ok(IndexReport {
        lambda1,
        lambda2,
        is_index1: lambda1 < 0.0 && lambda2 > 0.0,
        degenerate: (lambda2 - lambda1).abs() <= DEGENERACY_TOL,
        translation_modes,
        residual,
        mean: phi.mean(),
    })
}

/// Spectral derivatives of φ along each axis, dropping negligible ones.
fn translation_generators(model: &dyn EnergyModel, phi: &Field) -> Result<Vec<Field>> {
    let scale = phi.norm_l2().max(1e-300);
    let mut out = Vec::new();
    for axis in 0..phi.grid().ndim() {
        let d = model.ops().derivative(phi, axis)?;
        let len = phi.grid().lengths()[axis];
        if d.norm_l2() * len > 1e-6 * scale {
            out.push(d);
        }
    }
    // Keep the set linearly independent.
    if out.len() == 2 {
        let (a, b) = (out[0].values(), out[1].values());
        let c = dot(a, b) / (dot(a, a) * dot(b, b)).sqrt();
        if c.abs() > 1.0 - 1e-10 {
            out.pop();
        }
    }
    Ok(out)
}
