//! Iterative minimization formulation: alternate a rotation step (min-mode)
//! with a translation step (descent on the auxiliary functional).

use std::time::Instant;

use super::translation::{HMinus1Stepper, ProjectedStepper};
use super::{is_divergent, ConvergenceTrace, SaddleResult, SearchConfig, Status, TraceRecord};
use crate::energy::EnergyModel;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::minmode::{min_mode_from, Metric};
use crate::operators::project;

/// Runs IMF until `‖PδF‖ ≤ outer_tol`, divergence or `max_cycles`.
pub fn imf_search(model: &dyn EnergyModel, phi0: &Field, cfg: &SearchConfig) -> Result<SaddleResult> {
    run(model, phi0, cfg, None)
}

/// Runs IMF for exactly `total_steps` translation steps in cycles of
/// `cfg.inner_iters`, ignoring the outer tolerance. Used for timing.
pub fn imf_fixed_budget(
    model: &dyn EnergyModel,
    phi0: &Field,
    cfg: &SearchConfig,
    total_steps: usize,
) -> Result<SaddleResult> {
    if cfg.inner_iters == 0 {
        return Err(Error::Config("a fixed step budget needs inner_iters > 0".into()));
    }
    run(model, phi0, cfg, Some(total_steps))
}

enum Stepper<'a> {
    Projected(ProjectedStepper<'a>),
    HMinus1(HMinus1Stepper<'a>),
}

impl Stepper<'_> {
    fn step(&self, phi: &Field) -> Result<Field> {
        match self {
            Stepper::Projected(s) => s.step(phi),
            Stepper::HMinus1(s) => s.step(phi),
        }
    }
}

fn run(model: &dyn EnergyModel, phi0: &Field, cfg: &SearchConfig, budget: Option<usize>) -> Result<SaddleResult> {
    cfg.validate()?;
    if !cfg.method.is_imf() {
        return Err(Error::Config(format!("{} is not an IMF method", cfg.method)));
    }
    model.check_grid(phi0)?;
    if !phi0.is_finite() {
        return Err(Error::NonFinite("initial state"));
    }
    let metric = cfg.method.metric();
    let opts = cfg.minmode_options(metric);
    let a = cfg.stabilization.unwrap_or_else(|| model.default_stabilization());
    let b = cfg.rank_one_shift.unwrap_or_else(|| model.default_rank_one_shift());
    let mass = phi0.mean();

    let clock = Instant::now();
    let mut phi = phi0.clone();
    let mut v: Option<Field> = None;
    let mut lambda;
    let mut trace = ConvergenceTrace::default();
    let mut max_drift = 0.0f64;
    let mut total_steps = 0usize;
    let mut last_inner = 0usize;
    let mut cycle = 0usize;

    let status = loop {
        let rot = match min_mode_from(model, &phi, v.as_ref(), &[], &opts) {
            Ok(r) => r,
            Err(Error::MinModeNotConverged(best)) => *best,
            Err(e) => return Err(e),
        };
        lambda = rot.eigenvalue;
        v = Some(rot.eigenvector);

        let residual = project(&model.gradient_unchecked(&phi)).norm_l2();
        let energy = model.energy(&phi)?;
        max_drift = max_drift.max((phi.mean() - mass).abs());
        trace.push(TraceRecord {
            cycle,
            inner_iters: last_inner,
            residual_l2: residual,
            energy,
            min_eig: lambda,
            wall_s: if cfg.wall_time { clock.elapsed().as_secs_f64() } else { 0.0 },
        });

        if is_divergent(residual, &[&phi]) {
            break Status::Diverged;
        }
        let steps = match budget {
            None => {
                if residual <= cfg.outer_tol {
                    break Status::Converged;
                }
                if cycle >= cfg.max_cycles {
                    break Status::MaxCycles;
                }
                cfg.inner_iters
            }
            Some(total) => {
                if total_steps >= total {
                    break if residual <= cfg.outer_tol { Status::Converged } else { Status::MaxCycles };
                }
                cfg.inner_iters.min(total - total_steps)
            }
        };

        let dir = v.as_ref().expect("rotation sets v");
        match translate(model, &phi, dir, metric, cfg, a, b, steps) {
            Ok((next, used)) => {
                phi = next;
                last_inner = used;
                total_steps += used;
            }
            Err(Error::NonFinite(_)) => break Status::Diverged,
            Err(e) => return Err(e),
        }
        cycle += 1;
    };

    Ok(SaddleResult {
        phi,
        v: v.expect("at least one rotation"),
        lambda,
        trace,
        status,
        max_mass_drift: max_drift,
        total_steps,
        wall_s: clock.elapsed().as_secs_f64(),
    })
}

/// Takes `steps` translation steps, or iterates until the step velocity
/// `‖φⁿ⁺¹ − φⁿ‖/dt` falls below `inner_tol` when `steps == 0`.
#[allow(clippy::too_many_arguments)]
fn translate(
    model: &dyn EnergyModel,
    phi_k: &Field,
    v: &Field,
    metric: Metric,
    cfg: &SearchConfig,
    a: f64,
    b: f64,
    steps: usize,
) -> Result<(Field, usize)> {
    let stepper = match metric {
        Metric::ProjectedL2 => Stepper::Projected(ProjectedStepper::new(model, phi_k, v, cfg.dt, a, b)?),
        Metric::HMinus1 => Stepper::HMinus1(HMinus1Stepper::new(model, phi_k, v, cfg.dt, a)?),
    };
    let mut cur = phi_k.clone();
    if steps > 0 {
        for _ in 0..steps {
            cur = stepper.step(&cur)?;
        }
        return Ok((cur, steps));
    }
    for n in 1..=cfg.max_inner_iters {
        let next = stepper.step(&cur)?;
        let velocity = next.lincomb_unchecked(1.0, &cur, -1.0).norm_l2() / cfg.dt;
        cur = next;
        if velocity <= cfg.inner_tol || !(velocity < 1e10) {
            return Ok((cur, n));
        }
    }
    Ok((cur, cfg.max_inner_iters))
}
