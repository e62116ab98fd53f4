//! Gentlest ascent dynamics, semi-implicit in the linear part.
//!
//! ```text
//! φₜ  = −PδF(φ) + 2⟨δF(φ), v⟩/⟨v, v⟩ Pv
//! γvₜ = −PHPv + ⟨v, Hv⟩v
//! ```
//!
//! The plain L² variant drops every `P`.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{is_divergent, ConvergenceTrace, InitialDirection, Method, SaddleResult, SearchConfig, Status, TraceRecord};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::{inner_l2_unchecked, Field};
use crate::minmode::{min_mode, Metric};
use crate::operators::{project, project_in_place};

const DEGENERATE_NORM: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct GadStep {
    pub phi: Field,
    /// L²-unit.
    pub v: Field,
    /// Force residual at the input state: ‖PδF‖ (projected) or ‖δF‖ (L²).
    pub residual: f64,
    /// `⟨v, Hv⟩/⟨v, v⟩` at the input state.
    pub rayleigh: f64,
}

/// One time step of the coupled (φ, v) flow. Both updates use the input
/// state; `v` is renormalized in L² afterwards.
pub fn gad_step(model: &dyn EnergyModel, phi: &Field, v: &Field, cfg: &SearchConfig) -> Result<GadStep> {
    let projected = match cfg.method {
        Method::GadProjected => true,
        Method::GadL2 => false,
        m => return Err(Error::Config(format!("{m} is not a GAD method"))),
    };
    model.check_grid(phi)?;
    model.check_grid(v)?;
    if !phi.is_finite() || !v.is_finite() {
        return Err(Error::NonFinite("GAD state"));
    }
    let vv = inner_l2_unchecked(v, v);
    if vv.sqrt() < DEGENERATE_NORM {
        return Err(Error::DegenerateDirection(format!("‖v‖ = {:e}", vv.sqrt())));
    }
    if projected {
        model.ops().check_zero_mean(v, "GAD direction")?;
    }
    let a = cfg.stabilization.unwrap_or_else(|| model.default_stabilization());
    let (dt, gamma) = (cfg.dt, cfg.gad_gamma);
    let ops = model.ops();
    let symbol = model.linear_symbol();
    let solve = |rhs: &Field, rate: f64| {
        let inv: Vec<f64> = symbol
            .iter()
            .enumerate()
            .map(|(i, &s)| if projected && i == 0 { 0.0 } else { 1.0 / (rate + s + a) })
            .collect();
        ops.apply_symbol(rhs, &inv)
    };

    let grad = model.gradient_unchecked(phi);
    let residual = if projected { project(&grad).norm_l2() } else { grad.norm_l2() };
    let coef = 2.0 * inner_l2_unchecked(&grad, v) / vv;
    let mut rhs = phi.map(|s| s / dt + a * s - model.potential_d1(s));
    rhs.axpy_unchecked(coef, v);
    let mut phi_next = solve(&rhs, 1.0 / dt);
    if projected {
        let mean = phi.mean();
        phi_next = phi_next.map(|s| s + mean);
    }

    let hv = model.hessian_unchecked(phi, v);
    let rayleigh = inner_l2_unchecked(v, &hv) / vv;
    let rate = gamma / dt;
    let values = v
        .values()
        .iter()
        .zip(phi.values())
        .map(|(&x, &s)| (rate + a - model.potential_d2(s) + rayleigh) * x)
        .collect();
    let mut rhs_v = Field::from_raw(*v.grid(), values);
    if projected {
        project_in_place(&mut rhs_v);
    }
    let v_next = solve(&rhs_v, rate);
    let norm = v_next.norm_l2();
    if !(norm >= DEGENERATE_NORM) {
        return Err(if norm.is_finite() {
            Error::DegenerateDirection(format!("updated ‖v‖ = {norm:e}"))
        } else {
            Error::NonFinite("GAD direction")
        });
    }
    if !phi_next.is_finite() {
        return Err(Error::NonFinite("GAD state"));
    }
    Ok(GadStep { phi: phi_next, v: v_next.scaled(1.0 / norm), residual, rayleigh })
}

/// Iterates [`gad_step`]; one cycle is one time step. Without `v0` the start
/// direction follows `cfg.v0`.
pub fn gad_search(model: &dyn EnergyModel, phi0: &Field, v0: Option<&Field>, cfg: &SearchConfig) -> Result<SaddleResult> {
    cfg.validate()?;
    let projected = match cfg.method {
        Method::GadProjected => true,
        Method::GadL2 => false,
        m => return Err(Error::Config(format!("{m} is not a GAD method"))),
    };
    model.check_grid(phi0)?;
    if !phi0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let mut v = match v0 {
        Some(v) => {
            model.check_grid(v)?;
            let v = if projected { project(v) } else { v.clone() };
            let n = v.norm_l2();
            if !(n >= DEGENERATE_NORM) {
                return Err(Error::DegenerateDirection("initial direction is zero".into()));
            }
            v.scaled(1.0 / n)
        }
        None => initial_direction(model, phi0, cfg, projected)?,
    };

    let clock = Instant::now();
    let mass = phi0.mean();
    let mut phi = phi0.clone();
    let mut trace = ConvergenceTrace::default();
    let mut max_drift = 0.0f64;
    let mut lambda = f64::NAN;
    let mut cycle = 0usize;
    let status = loop {
        max_drift = max_drift.max((phi.mean() - mass).abs());
        let step = match gad_step(model, &phi, &v, cfg) {
            Ok(s) => s,
            Err(Error::NonFinite(_)) => break Status::Diverged,
            Err(e) => return Err(e),
        };
        lambda = step.rayleigh;
        trace.push(TraceRecord {
            cycle,
            inner_iters: usize::from(cycle > 0),
            residual_l2: step.residual,
            energy: model.energy(&phi)?,
            min_eig: step.rayleigh,
            wall_s: if cfg.wall_time { clock.elapsed().as_secs_f64() } else { 0.0 },
        });
        if is_divergent(step.residual, &[&phi]) {
            break Status::Diverged;
        }
        if step.residual <= cfg.outer_tol {
            break Status::Converged;
        }
        if cycle >= cfg.max_cycles {
            break Status::MaxCycles;
        }
        phi = step.phi;
        v = step.v;
        cycle += 1;
    };

    Ok(SaddleResult {
        phi,
        v,
        lambda,
        trace,
        status,
        max_mass_drift: max_drift,
        total_steps: cycle,
        wall_s: clock.elapsed().as_secs_f64(),
    })
}

fn initial_direction(model: &dyn EnergyModel, phi0: &Field, cfg: &SearchConfig, projected: bool) -> Result<Field> {
    match cfg.v0 {
        InitialDirection::MinMode => {
            let r = match min_mode(model, phi0, &cfg.minmode_options(Metric::ProjectedL2)) {
                Ok(r) => r,
                Err(Error::MinModeNotConverged(best)) => *best,
                Err(e) => return Err(e),
            };
            Ok(r.eigenvector)
        }
        InitialDirection::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut v = Field::random_normal(*phi0.grid(), &mut rng);
            if projected {
                project_in_place(&mut v);
            }
            let n = v.norm_l2();
            Ok(v.scaled(1.0 / n))
        }
    }
}
