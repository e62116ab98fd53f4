//! Command-line front end: `run`, `bench`, `verify` and `minmode`.
//!
//! Exit codes: 0 success; 1 a well-formed negative result (not converged,
//! not index-1); 2 invalid configuration or input files; 3 divergence or a
//! numerical failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::{read_field, write_field};
use crate::minmode::{min_mode, Metric};
use crate::saddle::{imf_fixed_budget, search, verify_index1, IndexReport, Method, SaddleResult, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NEGATIVE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "phasesaddle", version, about = "Saddle search for phase-field energies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the configured saddle search and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time IMF methods at fixed translation-step budgets.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check that a field is an index-1 saddle of the configured model.
    Verify {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute the minimum mode at the configured initial field.
    Minmode {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            code
        }
    }
}

pub fn execute(cli: Cli) -> i32 {
    match cli.command {
        Command::Run { config, out } => cmd_run(&config, out.as_deref()),
        Command::Bench { config, out, jobs } => cmd_bench(&config, out.as_deref(), jobs),
        Command::Verify { field, config } => cmd_verify(&field, &config),
        Command::Minmode { config, metric, out } => cmd_minmode(&config, metric, out.as_deref()),
    }
}

fn input_error(e: Error) -> i32 {
    eprintln!("error: {e}");
    EXIT_INPUT
}

fn failure(e: Error) -> i32 {
    eprintln!("error: {e}");
    EXIT_FAILURE
}

fn out_dir(cfg: &RunConfig, config_path: &Path, flag: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output.dir {
        return p.clone();
    }
    let stem = config_path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    PathBuf::from("out").join(stem)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn cmd_run(config: &Path, out: Option<&Path>) -> i32 {
    let loaded = RunConfig::load(config).and_then(|cfg| {
        let model = cfg.build_model()?;
        let sc = cfg.search_config()?;
        let phi0 = cfg.initial_field()?;
        Ok((cfg, model, sc, phi0))
    });
    let (cfg, model, sc, phi0) = match loaded {
        Ok(x) => x,
        Err(e) => return input_error(e),
    };
    let dir = out_dir(&cfg, config, out);
    if let Err(e) = create_dir(&dir) {
        return input_error(e);
    }

    let result = match search(model.as_ref(), &phi0, &sc) {
        Ok(r) => r,
        Err(e) => return failure(e),
    };
    let report = if cfg.output.verify && result.status != Status::Diverged {
        Some(verify_index1(model.as_ref(), &result.phi, &sc.minmode_options(Metric::ProjectedL2)))
    } else {
        None
    };
    let energy = model.energy(&result.phi).unwrap_or(f64::NAN);
    let summary = run_summary(&sc.method, &result, energy, report.as_ref());

    let written = (|| -> Result<()> {
        if cfg.output.fields {
            write_field(&result.phi, dir.join("phi_star.field"))?;
            write_field(&result.v, dir.join("v_star.field"))?;
        }
        if cfg.output.trace {
            result.trace.write_csv(dir.join("trace.csv"))?;
        }
        if cfg.output.summary {
            fs::write(dir.join("summary.txt"), &summary)?;
        }
        Ok(())
    })();
    print!("{summary}");
    if let Err(e) = written {
        return failure(e);
    }
    match result.status {
        Status::Converged => EXIT_OK,
        Status::MaxCycles => EXIT_NEGATIVE,
        Status::Diverged => EXIT_FAILURE,
    }
}

fn run_summary(
    method: &Method,
    r: &SaddleResult,
    energy: f64,
    report: Option<&Result<IndexReport>>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method = {method}");
    let _ = writeln!(s, "status = {}", r.status);
    let _ = writeln!(s, "cycles = {}", r.trace.len().saturating_sub(1));
    let _ = writeln!(s, "translation_steps = {}", r.total_steps);
    let _ = writeln!(s, "residual = {:.6e}", r.residual());
    let _ = writeln!(s, "energy = {energy:.12}");
    let _ = writeln!(s, "lambda = {:.12}", r.lambda);
    match report {
        Some(Ok(rep)) => {
            let _ = writeln!(s, "lambda1 = {:.12}", rep.lambda1);
            let _ = writeln!(s, "lambda2 = {:.12}", rep.lambda2);
            let _ = writeln!(s, "is_index1 = {}", rep.is_index1);
            let _ = writeln!(s, "translation_modes = {}", fmt_list(&rep.translation_modes));
        }
        Some(Err(e)) => {
            let _ = writeln!(s, "index_check_error = {e}");
        }
        None => {}
    }
    let _ = writeln!(s, "mass = {:.15}", r.phi.mean());
    let _ = writeln!(s, "max_mass_drift = {:.3e}", r.max_mass_drift);
    let _ = writeln!(s, "wall_s = {:.6}", r.wall_s);
    s
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", items.join(", "))
}

fn cmd_verify(field: &Path, config: &Path) -> i32 {
    let loaded = RunConfig::load(config).and_then(|cfg| {
        let model = cfg.build_model()?;
        let sc = cfg.search_config()?;
        let phi = read_field(field)?;
        if phi.grid() != model.grid() {
            return Err(Error::GridMismatch);
        }
        if !phi.is_finite() {
            return Err(Error::NonFinite("field"));
        }
        Ok((model, sc, phi))
    });
    let (model, sc, phi) = match loaded {
        Ok(x) => x,
        Err(e) => return input_error(e),
    };
    match verify_index1(model.as_ref(), &phi, &sc.minmode_options(Metric::ProjectedL2)) {
        Ok(rep) => {
            println!("residual = {:.6e}", rep.residual);
            println!("lambda1 = {:.12}", rep.lambda1);
            println!("lambda2 = {:.12}", rep.lambda2);
            println!("is_index1 = {}", rep.is_index1);
            println!("degenerate = {}", rep.degenerate);
            println!("translation_modes = {}", fmt_list(&rep.translation_modes));
            println!("mass = {:.15}", rep.mean);
            if rep.is_index1 && rep.residual <= sc.outer_tol {
                EXIT_OK
            } else {
                EXIT_NEGATIVE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_NEGATIVE
        }
    }
}

fn cmd_minmode(config: &Path, metric: Option<Metric>, out: Option<&Path>) -> i32 {
    let loaded = RunConfig::load(config).and_then(|cfg| {
        let model = cfg.build_model()?;
        let sc = cfg.search_config()?;
        let phi = cfg.initial_field()?;
        Ok((cfg, model, sc, phi))
    });
    let (cfg, model, sc, phi) = match loaded {
        Ok(x) => x,
        Err(e) => return input_error(e),
    };
    let metric = metric.unwrap_or_else(|| sc.method.metric());
    let (res, converged) = match min_mode(model.as_ref(), &phi, &sc.minmode_options(metric)) {
        Ok(r) => (r, true),
        Err(Error::MinModeNotConverged(best)) => (*best, false),
        Err(e) => return failure(e),
    };
    let mut s = String::new();
    let _ = writeln!(s, "metric = {metric}");
    let _ = writeln!(s, "converged = {converged}");
    let _ = writeln!(s, "eigenvalue = {:.12}", res.eigenvalue);
    let _ = writeln!(s, "residual = {:.6e}", res.residual);
    let _ = writeln!(s, "iterations = {}", res.iterations);
    print!("{s}");
    let dir = out_dir(&cfg, config, out);
    let written = create_dir(&dir).and_then(|_| {
        fs::write(dir.join("minmode.txt"), &s)?;
        write_field(&res.eigenvector, dir.join("eigenvector.field"))
    });
    if let Err(e) = written {
        return failure(e);
    }
    if converged {
        EXIT_OK
    } else {
        eprintln!("error: eigensolver did not reach tolerance {:e}", sc.minmode_tol);
        EXIT_FAILURE
    }
}

/// One timed (init, method, budget) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub init: String,
    pub method: Method,
    pub budget: usize,
    pub wall_s: f64,
    /// Translation steps actually taken; equals `budget` unless the run diverged.
    pub steps: usize,
    pub status: Status,
}

/// Runs every bench cell. With `jobs > 1` cells run concurrently, which
/// perturbs the timings.
pub fn run_bench(cfg: &RunConfig, jobs: usize) -> Result<Vec<BenchRow>> {
    let bench = cfg.bench.as_ref().ok_or_else(|| Error::Config("missing [bench] table".into()))?;
    let inits = cfg.bench_fields()?;
    let base = cfg.search_config()?;
    let inner = bench.inner_iters.unwrap_or(base.inner_iters);
    if inner == 0 {
        return Err(Error::Config("bench needs inner_iters > 0".into()));
    }
    let methods: Vec<Method> = bench.methods.iter().map(|m| m.parse()).collect::<Result<_>>()?;
    let mut cells = Vec::new();
    for (name, phi) in &inits {
        for &budget in &bench.budgets {
            for &method in &methods {
                cells.push((name.clone(), phi, method, budget));
            }
        }
    }

    // Repeats run in rounds over all cells, so slow drifts in machine load
    // hit every method alike; each cell keeps its fastest run.
    let ncells = cells.len();
    let total = ncells * bench.repeats;
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<Result<BenchRow>>>> = Mutex::new((0..ncells).map(|_| None).collect());
    let worker = || -> Result<()> {
        let model = cfg.build_model()?;
        loop {
            let k = next.fetch_add(1, Ordering::SeqCst);
            if k >= total {
                return Ok(());
            }
            let i = k % ncells;
            let (name, phi, method, budget) = &cells[i];
            if matches!(rows.lock().expect("bench lock")[i], Some(Err(_))) {
                continue;
            }
            let sc = crate::saddle::SearchConfig { method: *method, inner_iters: inner, ..base.clone() };
            let r = imf_fixed_budget(model.as_ref(), phi, &sc, *budget).map(|res| BenchRow {
                init: name.clone(),
                method: *method,
                budget: *budget,
                wall_s: res.wall_s,
                steps: res.total_steps,
                status: res.status,
            });
            let mut guard = rows.lock().expect("bench lock");
            let slot = &mut guard[i];
            *slot = Some(match (slot.take(), r) {
                (Some(Ok(best)), Ok(new)) => Ok(if new.wall_s < best.wall_s { new } else { best }),
                (Some(Err(e)), _) | (_, Err(e)) => Err(e),
                (None, Ok(new)) => Ok(new),
            });
        }
    };
    let jobs = jobs.max(1).min(total.max(1));
    if jobs == 1 {
        worker()?;
    } else {
        std::thread::scope(|s| -> Result<()> {
            let handles: Vec<_> = (0..jobs).map(|_| s.spawn(worker)).collect();
            for h in handles {
                h.join().expect("bench worker panicked")?;
            }
            Ok(())
        })?;
    }
    rows.into_inner()
        .expect("bench lock")
        .into_iter()
        .map(|r| r.expect("every cell ran"))
        .collect()
}

/// `init,method,iterN,wall_s`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("init,method,iterN,wall_s\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{:.6}", r.init, r.method, r.budget, r.wall_s);
    }
    s
}

/// `init,iterN,wall_projected_s,wall_h1_s,speedup` for every completed
/// pair with a non-zero budget; speedup is the imf-h1 time over the
/// imf-projected time.
pub fn speedup_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("init,iterN,wall_projected_s,wall_h1_s,speedup\n");
    for p in rows.iter().filter(|r| r.method == Method::ImfProjected && r.budget > 0) {
        let h1 = rows.iter().find(|r| r.method == Method::ImfH1 && r.init == p.init && r.budget == p.budget);
        if let Some(h) = h1 {
            if p.steps == p.budget && h.steps == h.budget {
                let _ = writeln!(s, "{},{},{:.6},{:.6},{:.4}", p.init, p.budget, p.wall_s, h.wall_s, h.wall_s / p.wall_s);
            }
        }
    }
    s
}

fn cmd_bench(config: &Path, out: Option<&Path>, jobs: usize) -> i32 {
    let cfg = match RunConfig::load(config).and_then(|c| {
        c.bench_fields()?;
        c.build_model()?;
        Ok(c)
    }) {
        Ok(c) => c,
        Err(e) => return input_error(e),
    };
    let dir = out_dir(&cfg, config, out);
    if let Err(e) = create_dir(&dir) {
        return input_error(e);
    }
    let rows = match run_bench(&cfg, jobs) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => return input_error(e),
        Err(e) => return failure(e),
    };
    let (table, ratios) = (bench_csv(&rows), speedup_csv(&rows));
    print!("{table}\n{ratios}");
    let written = fs::write(dir.join("bench.csv"), &table).and_then(|_| fs::write(dir.join("speedup.csv"), &ratios));
    if let Err(e) = written {
        return failure(e.into());
    }
    let incomplete: Vec<&BenchRow> = rows.iter().filter(|r| r.steps != r.budget).collect();
    for r in &incomplete {
        eprintln!(
            "warning: {} / {} / {} stopped after {} steps ({})",
            r.init, r.method, r.budget, r.steps, r.status
        );
    }
    if incomplete.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}
