//! Acceptance suite. Every criterion prints one `PASS`/`FAIL` line with the
//! measured values and the pinned tolerances; the test fails if any line
//! fails. The target runs without the libtest harness, so the lines are
//! always printed and the checks run one after another, which keeps the
//! timing ratios free of concurrent load.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use phasesaddle::cli::{run_bench, BenchRow};
use phasesaddle::config::RunConfig;
use phasesaddle::grid::inner_l2;
use phasesaddle::minmode::{dense_oracle, min_mode, principal_angle};
use phasesaddle::saddle::{
    search, verify_index1, InitialDirection, Method, SaddleResult, SearchConfig, Status,
};
use phasesaddle::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const PROJ_TOL: f64 = 1e-13;
const GRAD_FD_TOL: f64 = 1e-5;
const HESS_FD_TOL: f64 = 1e-4;
const FD_EPS: f64 = 1e-5;
const ORACLE_EIG_TOL: f64 = 1e-8;
const ORACLE_ANGLE_TOL: f64 = 1e-5;
const L2_EIG_TOL: f64 = 1e-6;
const HM1_EIG_TOL: f64 = 0.01;
const MASS_DRIFT_TOL: f64 = 1e-10;
const IMF_AGREE_TOL: f64 = 1e-6;
const GAD_AGREE_TOL: f64 = 1e-4;
const QUAD_SLOPE_MIN: f64 = 1.7;
const QUAD_FIT_CYCLES: usize = 3;
const SPEEDUP_1D_MIN: f64 = 1.3;
const SPEEDUP_2D_MIN: f64 = 1.1;

// Pinned runtime limits.
const LIMITS_S: [u64; 10] = [5, 30, 60, 10, 300, 300, 120, 300, 900, 300];

const KAPPA: f64 = 0.04;
const MASS: f64 = 0.6;

struct Report {
    failures: Vec<usize>,
}

impl Report {
    fn line(&mut self, id: usize, ok: bool, elapsed: Duration, detail: String) {
        let limit = LIMITS_S[id - 1];
        let in_time = elapsed.as_secs_f64() < limit as f64;
        let pass = ok && in_time;
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] criterion {id:>2}: {detail}; runtime {:.2} s (limit {limit} s)",
            elapsed.as_secs_f64()
        );
        if !pass {
            self.failures.push(id);
        }
    }
}

fn gl(n: usize, backend: BackendKind, mass: f64) -> GinzburgLandau {
    let grid = Grid::new_1d(n, 1.0).unwrap();
    GinzburgLandau::new(grid, backend, GinzburgLandauParams { kappa: KAPPA, mass }).unwrap()
}

fn lb_params() -> LandauBrazovskiiParams {
    LandauBrazovskiiParams { tau: -0.15, xi: 1.0, gamma: 0.25, mass: 0.0 }
}

fn lb(n: usize) -> LandauBrazovskii {
    LandauBrazovskii::standard(n, lb_params()).unwrap()
}

fn lb_start(grid: Grid) -> Field {
    let s = 3f64.sqrt() / 2.0;
    Field::from_fn(grid, |x, y| y.cos() + 0.54 * (s * x).cos() * (0.5 * y).cos())
}

fn cos_start(grid: Grid, coeffs: &[f64]) -> Field {
    Field::from_fn(grid, |x, _| {
        MASS + coeffs.iter().enumerate().map(|(k, c)| c * (2.0 * PI * (k + 1) as f64 * x).cos()).sum::<f64>()
    })
}

/// Smooth random field: a few low Fourier modes with normal amplitudes.
fn smooth_random(grid: Grid, rng: &mut ChaCha8Rng, mean: f64, amp: f64) -> Field {
    let lx = grid.lengths()[0];
    let ly = if grid.ndim() == 2 { grid.lengths()[1] } else { 1.0 };
    let kmax = if grid.ndim() == 2 { 3 } else { 5 };
    let mut terms = Vec::new();
    for kx in 0..=kmax {
        for ky in 0..=(if grid.ndim() == 2 { kmax } else { 0 }) {
            if kx + ky == 0 {
                continue;
            }
            terms.push((kx as f64, ky as f64, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)));
        }
    }
    Field::from_fn(grid, |x, y| {
        mean + amp
            * terms
                .iter()
                .map(|(kx, ky, a, p)| a * (2.0 * PI * (kx * x / lx + ky * y / ly) + p).cos())
                .sum::<f64>()
            / (terms.len() as f64).sqrt()
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn criterion_1(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grids = [Grid::new_1d(100, 1.0).unwrap(), Grid::new_2d(64, 64, 1.0, 1.0).unwrap()];
    let (mut idem, mut mean, mut adj) = (0.0f64, 0.0f64, 0.0f64);
    for grid in grids {
        for _ in 0..100 {
            let f = Field::random_normal(grid, &mut rng).map(|s| s + 3.0);
            let g = Field::random_normal(grid, &mut rng).map(|s| 2.0 * s - 1.0);
            let pf = project(&f);
            let scale = f.max_abs();
            idem = idem.max(project(&pf).max_abs_diff(&pf).unwrap() / scale);
            mean = mean.max(pf.mean().abs() / scale);
            let lhs = inner_l2(&pf, &g).unwrap();
            let rhs = inner_l2(&f, &project(&g)).unwrap();
            adj = adj.max((lhs - rhs).abs() / (f.norm_l2() * g.norm_l2()));
        }
    }
    let ok = idem <= PROJ_TOL && mean <= PROJ_TOL && adj <= PROJ_TOL;
    rep.line(
        1,
        ok,
        t.elapsed(),
        format!("projection: |P²f−Pf| {idem:.1e}, |mean Pf| {mean:.1e}, adjointness {adj:.1e} (tol {PROJ_TOL:.0e}; n=100 and 64², 100 fields each)"),
    );
}

fn fd_errors(model: &dyn EnergyModel, rng: &mut ChaCha8Rng, mean: f64, amp: f64) -> (f64, f64) {
    let grid = *model.grid();
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let phi = smooth_random(grid, rng, mean, amp);
        let v = project(&smooth_random(grid, rng, 0.0, 1.0));
        let plus = phi.lincomb(1.0, &v, FD_EPS).unwrap();
        let minus = phi.lincomb(1.0, &v, -FD_EPS).unwrap();
        let fd = (model.energy(&plus).unwrap() - model.energy(&minus).unwrap()) / (2.0 * FD_EPS);
        let an = inner_l2(&model.gradient_l2(&phi).unwrap(), &v).unwrap();
        eg = eg.max(rel(fd, an));
        let gd = model
            .gradient_l2(&plus)
            .unwrap()
            .lincomb(1.0, &model.gradient_l2(&minus).unwrap(), -1.0)
            .unwrap()
            .scaled(1.0 / (2.0 * FD_EPS));
        let hv = model.hessian_apply(&phi, &v).unwrap();
        eh = eh.max(gd.sub(&hv).unwrap().norm_l2() / hv.norm_l2());
    }
    (eg, eh)
}

fn criterion_2(rep: &mut Report) {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (g1, h1) = fd_errors(&gl(100, BackendKind::FiniteDifference, MASS), &mut rng, MASS, 0.3);
    let (g2, h2) = fd_errors(&lb(64), &mut rng, 0.0, 0.5);
    let ok = g1.max(g2) <= GRAD_FD_TOL && h1.max(h2) <= HESS_FD_TOL;
    rep.line(
        2,
        ok,
        t.elapsed(),
        format!(
            "finite differences (eps {FD_EPS:.0e}, 20 pairs): gradient GL {g1:.1e} LB {g2:.1e} (tol {GRAD_FD_TOL:.0e}); Hessian GL {h1:.1e} LB {h2:.1e} (tol {HESS_FD_TOL:.0e})"
        ),
    );
}

fn criterion_3(rep: &mut Report) {
    let t = Instant::now();
    let g = gl(32, BackendKind::FiniteDifference, MASS);
    let phi_gl = cos_start(*g.grid(), &[0.2, -0.05]);
    let lb_grid = Grid::new_2d(8, 8, 16.0 * PI / 3f64.sqrt(), 8.0 * PI).unwrap();
    let l = LandauBrazovskii::new(lb_grid, BackendKind::Spectral, lb_params()).unwrap();
    let phi_lb = lb_start(lb_grid);
    let cases: [(&str, &dyn EnergyModel, &Field); 2] = [("GL n=32", &g, &phi_gl), ("LB 8x8", &l, &phi_lb)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, model, phi) in cases {
        for metric in [Metric::ProjectedL2, Metric::HMinus1] {
            let dense = dense_oracle(model, phi, metric).unwrap();
            let it = min_mode(model, phi, &MinModeOptions::with_metric(metric)).unwrap();
            let de = (it.eigenvalue - dense.eigenvalues[0]).abs();
            let angle = principal_angle(&it.eigenvector, &dense.smallest_eigenspace(1e-8));
            ok &= de <= ORACLE_EIG_TOL && angle <= ORACLE_ANGLE_TOL;
            parts.push(format!("{name} {metric}: dλ {de:.1e}, angle {angle:.1e}"));
        }
    }
    rep.line(
        3,
        ok,
        t.elapsed(),
        format!("eigensolver vs dense oracle (tol {ORACLE_EIG_TOL:.0e}, {ORACLE_ANGLE_TOL:.0e} rad): {}", parts.join("; ")),
    );
}

fn criterion_4(rep: &mut Report) {
    let t = Instant::now();
    let model = gl(100, BackendKind::Spectral, 0.0);
    let zero = Field::zeros(*model.grid());
    // Independent oracle: the Hessian at φ≡0 is diagonal in Fourier modes,
    // with symbol κ²q² − 1 (L²) and q²(κ²q² − 1) (H⁻¹), q = 2πk.
    let k2 = KAPPA * KAPPA;
    let scan = |h1: bool| {
        (1..=50)
            .map(|k| {
                let q2 = (2.0 * PI * k as f64).powi(2);
                let l = k2 * q2 - 1.0;
                (k, if h1 { q2 * l } else { l })
            })
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
    };
    let (kl2, ol2) = scan(false);
    let (kh1, oh1) = scan(true);
    let l2 = min_mode(&model, &zero, &MinModeOptions::with_metric(Metric::ProjectedL2)).unwrap();
    let h1 = min_mode(&model, &zero, &MinModeOptions::with_metric(Metric::HMinus1)).unwrap();
    // Dominant mode of the H⁻¹ eigenvector.
    let grid = *model.grid();
    let weight = |k: usize| {
        let c = Field::from_fn(grid, |x, _| (2.0 * PI * k as f64 * x).cos());
        let s = Field::from_fn(grid, |x, _| (2.0 * PI * k as f64 * x).sin());
        let v = &h1.eigenvector;
        (inner_l2(v, &c).unwrap().powi(2) / inner_l2(&c, &c).unwrap()
            + inner_l2(v, &s).unwrap().powi(2) / inner_l2(&s, &s).unwrap())
            / inner_l2(v, v).unwrap()
    };
    let k_sel = (1..=50).max_by(|&a, &b| weight(a).total_cmp(&weight(b))).unwrap();
    let literal = -153.34;
    let ok = kl2 == 1
        && (l2.eigenvalue - ol2).abs() <= L2_EIG_TOL
        && (l2.eigenvalue - (k2 * 4.0 * PI * PI - 1.0)).abs() <= L2_EIG_TOL
        && kh1 == 3
        && k_sel == 3
        && (h1.eigenvalue - oh1).abs() <= HM1_EIG_TOL;
    rep.line(
        4,
        ok,
        t.elapsed(),
        format!(
            "metric distinction: L² λ {:.9} vs oracle {ol2:.9} (tol {L2_EIG_TOL:.0e}); H⁻¹ λ {:.6} on mode k={k_sel} vs oracle {oh1:.6} at k={kh1} (tol {HM1_EIG_TOL}); the quoted {literal} is {:.4} from the oracle",
            l2.eigenvalue,
            h1.eigenvalue,
            (literal - oh1).abs()
        ),
    );
}

/// The converged runs shared by criteria 5 to 7 and 10.
struct Runs {
    gl: [SaddleResult; 3],
    lb: [SaddleResult; 2],
    gl_model: GinzburgLandau,
    lb_model: LandauBrazovskii,
    gl_start: Field,
    gl_elapsed: Duration,
    lb_elapsed: Duration,
}

fn gl_config(method: Method) -> SearchConfig {
    let mut c = SearchConfig::with_method(method);
    c.dt = 0.1;
    c.outer_tol = 1e-8;
    if method.is_imf() {
        c.inner_iters = 20;
        c.max_cycles = 500;
    } else {
        c.v0 = InitialDirection::MinMode;
        c.max_cycles = 100_000;
    }
    c
}

fn run_all() -> Runs {
    let gl_model = gl(100, BackendKind::FiniteDifference, MASS);
    // Two-mode start; see the README for why the single-mode start is not used.
    let gl_start = cos_start(*gl_model.grid(), &[0.15, -0.05]);
    let t = Instant::now();
    let gl = [Method::ImfProjected, Method::ImfH1, Method::GadProjected]
        .map(|m| search(&gl_model, &gl_start, &gl_config(m)).unwrap());
    let gl_elapsed = t.elapsed();

    let lb_model = lb(64);
    let start = lb_start(*lb_model.grid());
    let t = Instant::now();
    let lb = [Method::ImfProjected, Method::GadProjected].map(|m| {
        let mut c = SearchConfig::with_method(m);
        c.outer_tol = 1e-8;
        if m.is_imf() {
            c.inner_iters = 100;
            c.max_cycles = 300;
        } else {
            c.max_cycles = 100_000;
        }
        search(&lb_model, &start, &c).unwrap()
    });
    Runs { gl, lb, gl_model, lb_model, gl_start, gl_elapsed, lb_elapsed: t.elapsed() }
}

fn criterion_5(rep: &mut Report, runs: &Runs) {
    let cases = [
        ("GL imf-projected", &runs.gl[0]),
        ("GL gad-projected", &runs.gl[2]),
        ("LB imf-projected", &runs.lb[0]),
        ("LB gad-projected", &runs.lb[1]),
    ];
    let ok = cases.iter().all(|(_, r)| r.status == Status::Converged && r.max_mass_drift <= MASS_DRIFT_TOL);
    let parts: Vec<String> =
        cases.iter().map(|(n, r)| format!("{n} {:.1e} ({}, {} steps)", r.max_mass_drift, r.status, r.total_steps)).collect();
    rep.line(
        5,
        ok,
        runs.gl_elapsed + runs.lb_elapsed,
        format!("max |mean φ − m| (tol {MASS_DRIFT_TOL:.0e}): {}", parts.join("; ")),
    );
}

fn criterion_6(rep: &mut Report, runs: &Runs) {
    let [p, h, g] = &runs.gl;
    let ph = p.phi.max_abs_diff(&h.phi).unwrap();
    let pg = p.phi.max_abs_diff(&g.phi).unwrap();
    let hg = h.phi.max_abs_diff(&g.phi).unwrap();
    let converged = [p, h, g].iter().all(|r| r.status == Status::Converged);
    let ok = converged && ph <= IMF_AGREE_TOL && pg <= GAD_AGREE_TOL && hg <= GAD_AGREE_TOL;
    rep.line(
        6,
        ok,
        runs.gl_elapsed,
        format!(
            "GL saddle max-norm differences: imf-projected vs imf-h1 {ph:.1e} (tol {IMF_AGREE_TOL:.0e}); gad-projected vs imf-projected {pg:.1e}, vs imf-h1 {hg:.1e} (tol {GAD_AGREE_TOL:.0e}); residuals {:.1e} {:.1e} {:.1e}",
            p.residual(),
            h.residual(),
            g.residual()
        ),
    );
}

fn criterion_7(rep: &mut Report, runs: &Runs) {
    let t = Instant::now();
    let opts = MinModeOptions::default();
    let r1 = verify_index1(&runs.gl_model, &runs.gl[0].phi, &opts).unwrap();
    let r2 = verify_index1(&runs.lb_model, &runs.lb[0].phi, &opts).unwrap();
    let ok = r1.is_index1 && r2.is_index1 && r1.lambda1 < 0.0 && r1.lambda2 > 0.0 && r2.lambda1 < 0.0 && r2.lambda2 > 0.0;
    let fmt = |r: &saddle::IndexReport| {
        format!(
            "λ₁ {:.6e} λ₂ {:.6e} (margins {:.2e}, {:.2e}; {} translation modes skipped)",
            r.lambda1,
            r.lambda2,
            -r.lambda1,
            r.lambda2,
            r.translation_modes.len()
        )
    };
    rep.line(7, ok, t.elapsed(), format!("index-1: GL {}; LB {}", fmt(&r1), fmt(&r2)));
}

/// Least-squares slope of log e_{k+1} against log e_k.
fn order_fit(res: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = res.windows(2).map(|w| (w[0].ln(), w[1].ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn criterion_8(rep: &mut Report) {
    let t = Instant::now();
    let model = gl(100, BackendKind::FiniteDifference, MASS);
    let start = cos_start(*model.grid(), &[0.15, -0.08, 0.03]);
    let mut c = SearchConfig::with_method(Method::ImfProjected);
    c.inner_iters = 0;
    c.inner_tol = 1e-12;
    c.outer_tol = 1e-8;
    c.max_cycles = 50;
    let r = search(&model, &start, &c).unwrap();
    let all = r.trace.residuals();
    let tail = &all[all.len().saturating_sub(QUAD_FIT_CYCLES)..];
    let slope = if tail.len() >= 2 { order_fit(tail) } else { f64::NAN };
    let monotone = tail.windows(2).all(|w| w[1] < w[0]);
    let ok = r.status == Status::Converged && tail.len() == QUAD_FIT_CYCLES && monotone && slope >= QUAD_SLOPE_MIN;
    let shown: Vec<String> = tail.iter().map(|e| format!("{e:.2e}")).collect();
    rep.line(
        8,
        ok,
        t.elapsed(),
        format!(
            "quadratic convergence: final {} residuals [{}], fitted order {slope:.3} (min {QUAD_SLOPE_MIN}), monotone {monotone}, {} cycles",
            QUAD_FIT_CYCLES,
            shown.join(", "),
            r.trace.len()
        ),
    );
}

fn ratios(rows: &[BenchRow]) -> Vec<(String, usize, f64)> {
    rows.iter()
        .filter(|r| r.method == Method::ImfProjected)
        .filter_map(|p| {
            let h = rows.iter().find(|h| h.method == Method::ImfH1 && h.init == p.init && h.budget == p.budget)?;
            let complete = p.steps == p.budget && h.steps == h.budget;
            Some((p.init.clone(), p.budget, if complete { h.wall_s / p.wall_s } else { f64::NAN }))
        })
        .collect()
}

fn criterion_9(rep: &mut Report) {
    let t = Instant::now();
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut ok = true;
    let mut parts = Vec::new();
    for (file, min) in [("bench_gl1d.toml", SPEEDUP_1D_MIN), ("bench_lb2d.toml", SPEEDUP_2D_MIN)] {
        let cfg = RunConfig::load(dir.join(file)).unwrap();
        let rows = run_bench(&cfg, 1).unwrap();
        for (init, budget, ratio) in ratios(&rows) {
            // NaN (an incomplete run) fails the comparison.
            ok &= ratio >= min;
            parts.push(format!("{file} {init} {budget}: {ratio:.2}"));
        }
    }
    rep.line(
        9,
        ok,
        t.elapsed(),
        format!(
            "wall-time ratio imf-h1/imf-projected (min {SPEEDUP_1D_MIN} in 1D, {SPEEDUP_2D_MIN} in 2D): {}",
            parts.join("; ")
        ),
    );
}

fn criterion_10(rep: &mut Report, runs: &Runs) {
    let t = Instant::now();
    let mut c = gl_config(Method::ImfProjected);
    c.wall_time = false;
    let a = search(&runs.gl_model, &runs.gl_start, &c).unwrap();
    let b = search(&runs.gl_model, &runs.gl_start, &c).unwrap();
    let same_trace = a.trace.to_csv() == b.trace.to_csv();
    let same_phi = a.phi.values() == b.phi.values();
    // The timed run differs from these only in the wall-clock column.
    let strip = |r: &SaddleResult| -> Vec<(usize, usize, u64, u64, u64)> {
        r.trace
            .records
            .iter()
            .map(|x| (x.cycle, x.inner_iters, x.residual_l2.to_bits(), x.energy.to_bits(), x.min_eig.to_bits()))
            .collect()
    };
    let same_timed = strip(&a) == strip(&runs.gl[0]);
    let ok = same_trace && same_phi && same_timed;
    rep.line(
        10,
        ok,
        t.elapsed() + runs.gl_elapsed / 3,
        format!(
            "determinism: trace.csv bit-identical {same_trace} ({} bytes), φ* bit-identical {same_phi}, timed run equal outside wall_s {same_timed}",
            a.trace.to_csv().len()
        ),
    );
}

fn informational(runs: &Runs) {
    let model = &runs.gl_model;
    let start = cos_start(*model.grid(), &[0.2]);
    let p = search(model, &start, &gl_config(Method::ImfProjected)).unwrap();
    let mut c = gl_config(Method::GadProjected);
    c.v0 = InitialDirection::Random;
    let g = search(model, &start, &c).unwrap();
    let d = p.phi.max_abs_diff(&g.phi).unwrap();
    let best_shift = (0..model.grid().len())
        .map(|s| g.phi.shifted(s, 0).max_abs_diff(&p.phi).unwrap())
        .fold(f64::INFINITY, f64::min);
    println!(
        "[INFO] single-mode start 0.6 + 0.2cos(2πx): gad-projected vs imf-projected max diff {d:.2e}, best grid translate {best_shift:.2e}; energies {:.10} {:.10}",
        p.trace.last().unwrap().energy,
        g.trace.last().unwrap().energy,
    );
}

fn main() {
    let mut rep = Report { failures: Vec::new() };
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep);
    let runs = run_all();
    criterion_5(&mut rep, &runs);
    criterion_6(&mut rep, &runs);
    criterion_7(&mut rep, &runs);
    criterion_8(&mut rep);
    criterion_9(&mut rep);
    criterion_10(&mut rep, &runs);
    informational(&runs);
    println!("acceptance: {} of 10 criteria passed", 10 - rep.failures.len());
    if !rep.failures.is_empty() {
        eprintln!("failed criteria: {:?}", rep.failures);
        std::process::exit(1);
    }
}
